//! Malformed and random inputs to every parser: no panics, and whatever
//! parses survives a write/read round trip.

use proptest::prelude::*;
use qendy::expr::parse;
use qendy::{io, Provenance};

fn token() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("x1".to_string()),
        Just("x2".to_string()),
        Just("x3".to_string()),
        Just("sin".to_string()),
        Just("cos".to_string()),
        Just("exp".to_string()),
        Just("log".to_string()),
        Just("sqrt".to_string()),
        Just("(".to_string()),
        Just(")".to_string()),
        Just("+".to_string()),
        Just("-".to_string()),
        Just("*".to_string()),
        Just("/".to_string()),
        Just("^".to_string()),
        Just(" ".to_string()),
        (0u32..1000).prop_map(|n| n.to_string()),
        (0.0f64..10.0).prop_map(|v| format!("{v}")),
        Just("1e-3".to_string()),
    ]
}

fn csv_field() -> impl Strategy<Value = String> {
    prop_oneof![
        (-1e6f64..1e6).prop_map(|v| format!("{v}")),
        Just("nan".to_string()),
        Just("inf".to_string()),
        Just("".to_string()),
        Just("x1".to_string()),
        Just("dx1".to_string()),
        Just("t".to_string()),
        Just("\"1\"".to_string()),
    ]
}

fn csv_text() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::collection::vec(csv_field(), 1..5), 0..6)
        .prop_map(|rows| rows.into_iter().map(|r| r.join(",") + "\n").collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn expressions_round_trip(tokens in prop::collection::vec(token(), 1..16)) {
        let text = tokens.concat();
        if let Ok(e) = parse(&text) {
            let rendered = e.to_string();
            prop_assert_eq!(parse(&rendered).unwrap(), e.clone(), "{} -> {}", text, rendered);
            let _ = e.eval(&[0.3, -0.7, 1.1]);
        }
    }

    #[test]
    fn arbitrary_text_never_panics(text in ".{0,64}") {
        let _ = parse(&text);
        let _ = io::dictionary_from_json(&text);
        let _ = io::model_from_json(&text);
        let _ = io::linear_model_from_json(&text);
        let _ = io::pca_from_json(&text);
        let _ = io::read_matrix_csv(text.as_bytes());
    }

    #[test]
    fn csv_readers(text in csv_text()) {
        if let Ok(ts) = io::read_training_csv(text.as_bytes(), Provenance::External) {
            let mut buf = Vec::new();
            io::write_training_csv(&mut buf, &ts).unwrap();
            prop_assert_eq!(io::read_training_csv(buf.as_slice(), Provenance::External).unwrap(), ts);
        }
        if let Ok(t) = io::read_trajectory_csv(text.as_bytes()) {
            let mut buf = Vec::new();
            io::write_trajectory_csv(&mut buf, &t).unwrap();
            prop_assert_eq!(io::read_trajectory_csv(buf.as_slice()).unwrap(), t);
        }
        if let Ok(m) = io::read_matrix_csv(text.as_bytes()) {
            let mut buf = Vec::new();
            io::write_matrix_csv(&mut buf, &m).unwrap();
            let back = io::read_matrix_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back.shape(), m.shape());
        }
    }

    #[test]
    fn dictionaries_from_tokens(
        n in 1usize..4,
        basis in prop::collection::vec(prop::collection::vec(token(), 1..6), 1..5),
    ) {
        let names: Vec<String> = basis.into_iter().map(|t| t.concat()).collect();
        let json = serde_json::json!({"state_dim": n, "basis": names}).to_string();
        if let Ok(d) = io::dictionary_from_json(&json) {
            let back = io::dictionary_from_json(&io::dictionary_to_json(&d).unwrap()).unwrap();
            prop_assert_eq!(back.names(), d.names());
        }
    }
}

#[test]
fn seed_corpus_is_accepted() {
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fuzz/corpus");
    let read = |t: &str, f: &str| std::fs::read_to_string(format!("{root}/{t}/{f}")).unwrap();
    assert!(parse(&read("parse_expr", "thomas")).is_ok());
    assert!(io::dictionary_from_json(&read("dictionary_json", "pendulum")).is_ok());
    assert!(io::dictionary_from_json(&read("dictionary_json", "explicit_g")).is_ok());
    assert!(io::dictionary_from_json(&read("dictionary_json", "bad_key")).is_err());
    assert!(io::model_from_json(&read("model_json", "pendulum")).is_ok());
    assert!(io::linear_model_from_json(&read("model_json", "sindy")).is_ok());
    assert!(io::read_training_csv(read("training_csv", "pendulum").as_bytes(), Provenance::External).is_ok());
    assert!(io::read_training_csv(read("training_csv", "nan").as_bytes(), Provenance::External).is_err());
    assert!(io::read_trajectory_csv(read("trajectory_csv", "short").as_bytes()).is_ok());
    assert!(io::pca_from_json(&read("pca_json", "small")).is_ok());
}
