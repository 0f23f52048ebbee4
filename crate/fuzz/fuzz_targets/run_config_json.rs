#![no_main]

use codesign_cli::config::{parse_grid, parse_json, RunConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_json::<RunConfig>(text) {
        let _ = cfg.pipeline.validate();
    }
    let _ = parse_grid(text);
});
