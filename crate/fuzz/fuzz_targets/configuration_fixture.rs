#![no_main]
use libfuzzer_sys::fuzz_target;
use wrk_core::gf_algebra::FiniteConfiguration2;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = FiniteConfiguration2::from_json_str(s);
    }
});
