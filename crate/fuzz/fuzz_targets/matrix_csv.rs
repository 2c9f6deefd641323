#![no_main]

use libfuzzer_sys::fuzz_target;
use qendy::io;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = io::read_matrix_csv(data) {
        let mut buf = Vec::new();
        io::write_matrix_csv(&mut buf, &m).unwrap();
        let back = io::read_matrix_csv(buf.as_slice()).expect("round trip");
        assert_eq!(back.shape(), m.shape());
    }
});
