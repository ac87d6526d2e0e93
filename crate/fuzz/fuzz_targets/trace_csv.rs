#![no_main]

use libfuzzer_sys::fuzz_target;
use resfluor::trace::SpectrumTrace;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(trace) = SpectrumTrace::from_csv(text) {
        let again = SpectrumTrace::from_csv(&trace.to_csv()).expect("written csv parses");
        assert_eq!(again.values(), trace.values());
        assert_eq!(again.grid(), trace.grid());
    }
});
