#![no_main]

use codesign_cli::config::parse_json;
use codesign_cli::report::motor_report;
use codesign_core::mec::MotorEvalDoc;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(doc) = parse_json::<MotorEvalDoc>(text) {
        let _ = motor_report(&doc);
    }
});
