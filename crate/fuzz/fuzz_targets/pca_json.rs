#![no_main]

use libfuzzer_sys::fuzz_target;
use qendy::io;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(p) = io::pca_from_json(text) {
        assert_eq!(p.components.nrows(), p.k());
        assert_eq!(p.components.ncols(), p.ambient_dim());
    }
});
