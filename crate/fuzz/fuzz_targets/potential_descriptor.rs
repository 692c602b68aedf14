#![no_main]
use libfuzzer_sys::fuzz_target;
use wrk_core::potential::PotentialDescriptor;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(d) = PotentialDescriptor::from_json_str(s) {
            if let Ok(phi) = d.build() {
                let _ = phi.l1_norm();
                let _ = phi.radial(0.5 * phi.cutoff());
            }
        }
    }
});
