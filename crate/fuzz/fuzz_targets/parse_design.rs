#![no_main]

use acbc_core::io::{design_to_json, parse_design};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(design) = parse_design(text) {
        // anything accepted must survive a round trip
        let again = parse_design(&design_to_json(&design)).expect("re-parse");
        assert_eq!(again, design);
    }
});
