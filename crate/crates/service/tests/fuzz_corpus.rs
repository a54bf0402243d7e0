//! Runs the checked-in fuzz seeds through the same entry points the fuzz
//! targets use, so a plain `cargo test` catches regressions on them.

use std::fs;
use std::path::PathBuf;

use acbc_core::io::{design_to_json, parse_design, parse_record_line, read_records, record_to_line};
use acbc_core::SurveyDesign;
use acbc_service::api::{parse_create_request, parse_response_request};
use acbc_service::store::parse_event_line;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn ok_count<T, E>(results: impl Iterator<Item = Result<T, E>>) -> usize {
    results.filter(Result::is_ok).count()
}

#[test]
fn design_seeds() {
    let mut accepted = 0;
    for (_, bytes) in seeds("parse_design") {
        if let Ok(d) = parse_design(&String::from_utf8_lossy(&bytes)) {
            assert_eq!(parse_design(&design_to_json(&d)).unwrap(), d);
            accepted += 1;
        }
    }
    assert_eq!(accepted, 2);
}

#[test]
fn record_seeds() {
    let lines = seeds("parse_record_line");
    for (_, bytes) in &lines {
        if let Ok(r) = parse_record_line(&String::from_utf8_lossy(bytes)) {
            assert_eq!(parse_record_line(&record_to_line(&r)).unwrap(), r);
        }
    }
    assert_eq!(ok_count(lines.iter().map(|(_, b)| parse_record_line(&String::from_utf8_lossy(b)))), 2);

    let design = SurveyDesign::four_by_three();
    let files = seeds("read_records");
    let got: Vec<(String, bool)> = files
        .iter()
        .map(|(n, b)| (n.clone(), read_records(b.as_slice(), &design).is_ok()))
        .collect();
    assert_eq!(
        got,
        vec![
            ("blank.jsonl".to_string(), true),
            ("one_record.jsonl".to_string(), true),
            ("torn.jsonl".to_string(), false)
        ]
    );
}

#[test]
fn request_and_event_seeds() {
    let create = seeds("parse_create_request");
    assert_eq!(ok_count(create.iter().map(|(_, b)| parse_create_request(b))), 2);
    let respond = seeds("parse_response_request");
    assert_eq!(ok_count(respond.iter().map(|(_, b)| parse_response_request(b))), 2);
    let events = seeds("parse_event_line");
    assert_eq!(
        ok_count(events.iter().map(|(_, b)| parse_event_line(&String::from_utf8_lossy(b)))),
        events.len()
    );
}
