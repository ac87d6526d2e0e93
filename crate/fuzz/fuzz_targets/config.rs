#![no_main]

use libfuzzer_sys::fuzz_target;
use resfluor_cli::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    match RunConfig::from_bytes(data) {
        Ok(cfg) => {
            let again = RunConfig::parse(&cfg.to_ini()).expect("canonical text parses");
            assert_eq!(again, cfg);
        }
        Err(e) => {
            let lines = data.split(|&b| b == b'\n').count();
            assert!(e.line.map_or(true, |l| l >= 1 && l <= lines));
        }
    }
});
