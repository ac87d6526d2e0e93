#![no_main]

use libfuzzer_sys::fuzz_target;
use resfluor::correlation::G2Trace;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(trace) = G2Trace::from_csv(text) {
        let again = G2Trace::from_csv(&trace.to_csv()).expect("written csv parses");
        assert_eq!(again.values(), trace.values());
    }
    let _ = G2Trace::from_json(text);
});
