#![no_main]

use codesign_cli::config::parse_json;
use codesign_core::robot::ArmModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(arm) = parse_json::<ArmModel>(text) {
        if arm.validate().is_ok() {
            let _ = arm.truncated(1).limits();
        }
    }
});
