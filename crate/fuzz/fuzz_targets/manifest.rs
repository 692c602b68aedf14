#![no_main]
use libfuzzer_sys::fuzz_target;
use wrk::Manifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = Manifest::from_json_str(s);
    }
});
