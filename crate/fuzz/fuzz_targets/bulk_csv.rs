#![no_main]

use libfuzzer_sys::fuzz_target;
use seglab::bulk::BulkTable;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(table) = BulkTable::parse_csv(text, 8) {
        let mut out = Vec::new();
        table.write_csv(&mut out).unwrap();
        let again = BulkTable::parse_csv(std::str::from_utf8(&out).unwrap(), 8).expect("written tables parse");
        assert_eq!(again, table);
    }
});
