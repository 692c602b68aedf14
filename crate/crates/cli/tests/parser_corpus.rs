//! Runs the fuzz corpus seeds and random inputs through every parser entry point.

use std::path::{Path, PathBuf};

use proptest::prelude::*;
use wrk::{Command, Manifest, RunConfig};
use wrk_core::gf_algebra::FiniteConfiguration2;
use wrk_core::microsim::EventLog;
use wrk_core::potential::PotentialDescriptor;

fn corpus(target: &str) -> Vec<(PathBuf, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            let s = std::fs::read_to_string(&p).unwrap();
            (p, s)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "empty corpus for {target}");
    out
}

fn name(p: &Path) -> &str {
    p.file_name().unwrap().to_str().unwrap()
}

fn run_config(s: &str) -> bool {
    match RunConfig::from_json_str(s) {
        Ok(cfg) => {
            assert_eq!(RunConfig::from_json_str(&cfg.to_json_pretty()).unwrap(), cfg);
            cfg.validate(cfg.command.unwrap_or(Command::Equilibria)).is_ok()
        }
        Err(_) => false,
    }
}

fn event_log(s: &str) -> bool {
    match EventLog::from_ndjson(s) {
        Ok(log) => {
            let again = EventLog::from_ndjson(&log.to_ndjson()).unwrap();
            assert_eq!(again, log);
            true
        }
        Err(_) => false,
    }
}

fn potential(s: &str) -> bool {
    PotentialDescriptor::from_json_str(s).ok().and_then(|d| d.build().ok()).is_some()
}

#[test]
fn run_config_seeds() {
    for (p, s) in corpus("run_config") {
        let valid = run_config(&s);
        let expect_valid = !matches!(name(&p), "negative_m" | "bad_eps");
        assert_eq!(valid, expect_valid, "{}", p.display());
    }
}

#[test]
fn potential_seeds() {
    for (p, s) in corpus("potential_descriptor") {
        assert_eq!(potential(&s), name(&p) != "invalid", "{}", p.display());
    }
}

#[test]
fn event_log_seeds() {
    for (p, s) in corpus("event_log") {
        assert_eq!(event_log(&s), name(&p) != "decreasing_time", "{}", p.display());
    }
}

#[test]
fn configuration_seeds() {
    for (p, s) in corpus("configuration_fixture") {
        assert_eq!(FiniteConfiguration2::from_json_str(&s).is_ok(), name(&p) != "overlap", "{}", p.display());
    }
}

#[test]
fn manifest_seeds() {
    for (p, s) in corpus("manifest") {
        let m = Manifest::from_json_str(&s).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert!(!m.files.is_empty());
        assert_eq!(Manifest::from_json_str(&m.to_json_pretty()).unwrap(), m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parsers_never_panic(s in "\\PC{0,200}") {
        let _ = run_config(&s);
        let _ = event_log(&s);
        let _ = potential(&s);
        let _ = FiniteConfiguration2::from_json_str(&s);
        let _ = Manifest::from_json_str(&s);
    }

    #[test]
    fn mutated_seeds_never_panic(idx in 0usize..1000, cut in 0usize..4000, byte in any::<u8>()) {
        let all: Vec<String> = ["run_config", "potential_descriptor", "event_log", "configuration_fixture", "manifest"]
            .iter()
            .flat_map(|t| corpus(t).into_iter().map(|(_, s)| s))
            .collect();
        let mut bytes = all[idx % all.len()].clone().into_bytes();
        if !bytes.is_empty() {
            let k = cut % bytes.len();
            bytes[k] = byte;
        }
        if let Ok(s) = String::from_utf8(bytes) {
            let _ = run_config(&s);
            let _ = event_log(&s);
            let _ = potential(&s);
            let _ = FiniteConfiguration2::from_json_str(&s);
            let _ = Manifest::from_json_str(&s);
        }
    }
}
