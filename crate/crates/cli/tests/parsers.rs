//! The fuzz targets' bodies on stable: corpus seeds plus random byte
//! mutations of them must parse or fail cleanly, never panic.

use std::fs;
use std::path::PathBuf;

use codesign_cli::config::{parse_grid, parse_json, RunConfig};
use codesign_cli::report::motor_report;
use codesign_core::artifacts::Manifest;
use codesign_core::mec::MotorEvalDoc;
use codesign_core::robot::ArmModel;
use codesign_core::trajectory::Trajectory;
use proptest::prelude::*;

fn seeds(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<_> = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files.iter().map(|p| fs::read(p).unwrap()).collect()
}

fn motor_eval(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(doc) = parse_json::<MotorEvalDoc>(text) {
        let _ = motor_report(&doc);
    }
}

fn arm(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(arm) = parse_json::<ArmModel>(text) {
        if arm.validate().is_ok() {
            let _ = arm.truncated(1).limits();
        }
    }
}

fn run_config(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_json::<RunConfig>(text) {
        let _ = cfg.pipeline.validate();
    }
    let _ = parse_grid(text);
}

fn manifest(data: &[u8]) {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = Manifest::parse(text);
    }
}

fn trajectory(data: &[u8]) {
    if let Ok(t) = Trajectory::read_csv(data) {
        let again = Trajectory::read_csv(t.to_csv_string().as_bytes()).expect("round trip");
        assert_eq!(again.n_axes, t.n_axes);
        assert_eq!(again.n_intervals(), t.n_intervals());
    }
}

type Body = fn(&[u8]);
const TARGETS: [(&str, Body); 5] = [
    ("motor_eval_json", motor_eval),
    ("arm_json", arm),
    ("run_config_json", run_config),
    ("manifest_json", manifest),
    ("trajectory_csv", trajectory),
];

#[test]
fn seeds_parse() {
    for (name, body) in TARGETS {
        let s = seeds(name);
        assert!(!s.is_empty(), "{name} has no seeds");
        s.iter().for_each(|d| body(d));
    }
    let good = String::from_utf8(seeds("trajectory_csv")[0].clone()).unwrap();
    assert!(Trajectory::read_csv(good.as_bytes()).is_ok());
    assert!(Manifest::parse(std::str::from_utf8(&seeds("manifest_json")[0]).unwrap()).is_ok());
    assert!(parse_json::<RunConfig>(std::str::from_utf8(&seeds("run_config_json")[0]).unwrap()).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn mutated_seeds_never_panic(target in 0..TARGETS.len(), seed in any::<prop::sample::Index>(),
                                 edits in prop::collection::vec((any::<prop::sample::Index>(), any::<u8>(), 0..3u8), 1..8)) {
        let (name, body) = TARGETS[target];
        let all = seeds(name);
        let mut data = all[seed.index(all.len())].clone();
        for (at, byte, kind) in edits {
            let i = at.index(data.len() + 1);
            match kind {
                0 if i < data.len() => data[i] = byte,
                1 => data.insert(i, byte),
                _ if i < data.len() => { data.remove(i); }
                _ => {}
            }
        }
        body(&data);
    }

    #[test]
    fn arbitrary_text_never_panics(s in "\\PC{0,200}") {
        for (_, body) in TARGETS {
            body(s.as_bytes());
        }
    }
}
