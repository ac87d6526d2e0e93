#![no_main]

use libfuzzer_sys::fuzz_target;
use resfluor_cli::table::{sweep_from_table, sweep_to_table, Table};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(table) = Table::parse(text) else { return };
    let again = Table::parse(&table.to_csv()).expect("written table parses");
    assert_eq!(again.rows.len(), table.rows.len());
    if let Ok(sweep) = sweep_from_table(&table) {
        assert_eq!(sweep_from_table(&sweep_to_table(&sweep)).expect("round trip"), sweep);
    }
});
