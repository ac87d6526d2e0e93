#![no_main]

use libfuzzer_sys::fuzz_target;
use resfluor::trace::SpectrumTrace;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(trace) = SpectrumTrace::from_json(text) {
        let again = SpectrumTrace::from_json(&trace.to_json()).expect("written json parses");
        assert_eq!(again, trace);
    }
});
