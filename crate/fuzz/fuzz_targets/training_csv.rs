#![no_main]

use libfuzzer_sys::fuzz_target;
use qendy::{io, Provenance};

fuzz_target!(|data: &[u8]| {
    if let Ok(ts) = io::read_training_csv(data, Provenance::External) {
        assert_eq!(ts.states().shape(), ts.derivatives().shape());
        let mut buf = Vec::new();
        io::write_training_csv(&mut buf, &ts).unwrap();
        let back = io::read_training_csv(buf.as_slice(), Provenance::External).expect("round trip");
        assert_eq!(back.len(), ts.len());
    }
});
