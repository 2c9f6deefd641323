#![no_main]

use libfuzzer_sys::fuzz_target;
use qendy::io;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(d) = io::dictionary_from_json(text) {
        let json = io::dictionary_to_json(&d).expect("serializes");
        let back = io::dictionary_from_json(&json).expect("round trip");
        assert_eq!(back.names(), d.names());
        let _ = d.feature_map(&vec![0.5; d.state_dim()]);
    }
});
