#![no_main]

use libfuzzer_sys::fuzz_target;
use qendy::io;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = io::model_from_json(text) {
        let back = io::model_from_json(&io::model_to_json(&m).unwrap()).expect("round trip");
        assert_eq!(back.a(), m.a());
        assert_eq!(back.b(), m.b());
        let _ = m.extract_rhs(&vec![0.1; m.state_dim()]);
        let _ = m.sparsity_report(1e-6);
    }
    let _ = io::linear_model_from_json(text);
    let _ = qendy_cli::commands::parse_model(text);
});
