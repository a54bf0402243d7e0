#![no_main]

use acbc_core::io::{parse_record_line, record_to_line};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    if let Ok(record) = parse_record_line(line) {
        let again = parse_record_line(&record_to_line(&record)).expect("re-parse");
        assert_eq!(again, record);
    }
});
