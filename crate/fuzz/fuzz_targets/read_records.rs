#![no_main]

use acbc_core::io::read_records;
use acbc_core::SurveyDesign;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let design = SurveyDesign::four_by_three();
    if let Ok(records) = read_records(data, &design) {
        for r in &records {
            r.validate(&design).expect("read_records only returns valid records");
        }
    }
});
