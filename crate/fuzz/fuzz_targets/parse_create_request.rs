#![no_main]

use acbc_service::api::parse_create_request;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_create_request(data);
});
