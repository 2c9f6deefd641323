#![no_main]

use libfuzzer_sys::fuzz_target;
use qendy::io;

fuzz_target!(|data: &[u8]| {
    if let Ok(traj) = io::read_trajectory_csv(data) {
        assert_eq!(traj.times().len(), traj.states().nrows());
        let mut buf = Vec::new();
        io::write_trajectory_csv(&mut buf, &traj).unwrap();
        let back = io::read_trajectory_csv(buf.as_slice()).expect("round trip");
        assert_eq!(back.len(), traj.len());
        let _ = qendy::dynamics::finite_diff_derivatives(&traj);
    }
});
