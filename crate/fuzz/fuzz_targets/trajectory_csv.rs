#![no_main]

use codesign_core::trajectory::Trajectory;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = Trajectory::read_csv(data) {
        // whatever parses must survive its own serialization
        let again = Trajectory::read_csv(t.to_csv_string().as_bytes()).expect("round trip");
        assert_eq!(again.n_axes, t.n_axes);
        assert_eq!(again.n_intervals(), t.n_intervals());
    }
});
