#![no_main]
use libfuzzer_sys::fuzz_target;
use wrk::{Command, RunConfig};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(cfg) = RunConfig::from_json_str(s) {
            let back = RunConfig::from_json_str(&cfg.to_json_pretty()).expect("echoed config reparses");
            assert_eq!(back, cfg);
            let _ = cfg.validate(cfg.command.unwrap_or(Command::Equilibria));
        }
    }
});
