#![no_main]
use libfuzzer_sys::fuzz_target;
use wrk_core::microsim::EventLog;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(log) = EventLog::from_ndjson(s) {
            let again = EventLog::from_ndjson(&log.to_ndjson()).expect("serialized log reparses");
            assert_eq!(again.records.len(), log.records.len());
        }
    }
});
