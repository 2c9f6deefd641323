#![no_main]

use libfuzzer_sys::fuzz_target;
use qendy::expr::parse;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(e) = parse(text) {
        let rendered = e.to_string();
        let again = parse(&rendered).expect("rendered expression parses");
        assert_eq!(again, e, "{text:?} -> {rendered:?}");
        let x = [0.3; 8];
        let _ = e.eval(&x);
        let _ = e.eval_directional(&x, &[1.0; 8]);
    }
});
