#![no_main]

use acbc_service::api::parse_response_request;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(req) = parse_response_request(data) {
        let json = serde_json::to_vec(&req).unwrap();
        assert_eq!(parse_response_request(&json).expect("re-parse"), req);
    }
});
