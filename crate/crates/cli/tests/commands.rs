use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use acbc_core::io::{design_to_json, write_records};
use acbc_core::simulation::SimulatedRespondent;
use acbc_core::survey::{generate_candidate_profiles, select_tournament_field, Bracket};
use acbc_core::{Profile, RespondentRecord, SurveyDesign};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn acbc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acbc")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn record(design: &SurveyDesign, id: &str, tag: &str, byo: &[usize], seed: u64) -> RespondentRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let byo = Profile::from_indices(byo);
    let respondent = SimulatedRespondent::uniform(4, &[2.0, 1.0, 0.0]).unwrap();
    let candidates = generate_candidate_profiles(&byo, design, &mut rng).unwrap();
    let field = select_tournament_field(&candidates, 16, &mut rng).unwrap();
    let mut bracket = Bracket::new(field.clone()).unwrap();
    bracket.play_out(|t| respondent.simulate_choice(t)).unwrap();
    RespondentRecord {
        id: id.into(),
        population_tag: tag.into(),
        byo,
        field,
        tasks: bracket.tasks(),
        seed: Some(seed),
    }
}

/// Design plus five respondents in two populations.
fn fixture(dir: &Path) -> (String, String) {
    let design = SurveyDesign::four_by_three();
    let records = vec![
        record(&design, "g1", "G", &[0, 1, 1, 2], 1),
        record(&design, "g2", "G", &[1, 1, 0, 2], 2),
        record(&design, "g3", "G", &[0, 0, 1, 1], 3),
        record(&design, "h1", "H", &[2, 1, 0, 0], 4),
        record(&design, "h2", "H", &[1, 2, 2, 1], 5),
    ];
    let design_path = dir.join("design.json");
    let records_path = dir.join("records.jsonl");
    fs::write(&design_path, design_to_json(&design)).unwrap();
    let mut buf = Vec::new();
    write_records(&mut buf, &records).unwrap();
    fs::write(&records_path, buf).unwrap();
    (
        design_path.to_str().unwrap().to_string(),
        records_path.to_str().unwrap().to_string(),
    )
}

#[test]
fn validate_accepts_good_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let (design, records) = fixture(dir.path());
    let o = acbc(&["validate", "--design", &design, "--records", &records, "--population", "G=40"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("records ok: 5"), "{text}");
    assert!(text.contains("G: n = 3, N = 40"), "{text}");
    assert!(text.contains("H: n = 2"), "{text}");
}

#[test]
fn validation_failures_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let (design, records) = fixture(dir.path());

    let bad_design = dir.path().join("bad.json");
    fs::write(&bad_design, fs::read_to_string(&design).unwrap().replace("\"choiceTasks\": 15", "\"choiceTasks\": 14")).unwrap();
    let o = acbc(&["validate", "--design", bad_design.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let mut text = fs::read_to_string(&records).unwrap();
    text.push_str("{not json}\n");
    let bad_records = dir.path().join("bad.jsonl");
    fs::write(&bad_records, text).unwrap();
    let o = acbc(&["validate", "--design", &design, "--records", bad_records.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 6"), "{}", stderr(&o));

    let o = acbc(&["report", "--design", &design, "--records", &records, "--population", "G=40"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains('H'), "{}", stderr(&o));

    // argument errors come from clap, also 2
    let o = acbc(&["estimate", "--counts", "1,x", "--population", "9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_file_is_a_runtime_error() {
    let o = acbc(&["validate", "--design", "/nonexistent/design.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn estimate_prints_both_estimators_and_scores() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("est");
    let o = acbc(&["estimate", "--counts", "9,0,3", "--population", "49", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("mle   (37,0,12) id 687"), "{text}");
    assert!(text.contains("wmae  (34,2,13) id 653 wmae 3.3459"), "{text}");
    let csv = fs::read_to_string(out.join("wmae_scores.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("id,N1,N2,N3,wmae"));
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() >= 687);
    assert!(rows[652].starts_with("653,34,2,13,3.345"), "{}", rows[652]);
    assert_eq!(fs::read_to_string(out.join("estimate.txt")).unwrap(), text);
}

#[test]
fn simulate_is_seeded() {
    let run = |seed: &str| {
        let o = acbc(&["simulate", "--mode", "typical", "--trials", "200", "--seed", seed]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        stdout(&o)
    };
    let a = run("5");
    assert_eq!(a, run("5"));
    assert_ne!(a, run("6"));
    let mut lines = a.lines();
    assert!(lines.next().unwrap().starts_with("mode,trials,seed,A1"));
    assert!(lines.next().unwrap().starts_with("typical,200,5,"));

    let o = acbc(&["simulate", "--utilities", "3,1", "--trials", "10"]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn paprika_lists_shares_and_feasible_rankings() {
    let dir = tempfile::tempdir().unwrap();
    let (design, records) = fixture(dir.path());
    let o = acbc(&["paprika", "--design", &design, "--records", &records]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("respondent,attribute,level,share"));
    assert_eq!(text.lines().count(), 1 + 5 * 12);

    let out = dir.path().join("p");
    let o = acbc(&[
        "paprika", "--design", &design, "--records", &records, "--respondent", "h1", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let feasible = fs::read_to_string(out.join("feasible_h1.csv")).unwrap();
    assert!(feasible.lines().count() > 1);

    let o = acbc(&["paprika", "--design", &design, "--records", &records, "--respondent", "zz"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_writes_all_sections() {
    let dir = tempfile::tempdir().unwrap();
    let (design, records) = fixture(dir.path());
    let out = dir.path().join("r");
    let o = acbc(&[
        "report", "--design", &design, "--records", &records, "--population", "G=20", "--population", "H=9",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["report.txt", "section_a.csv", "section_b.csv", "section_c.csv", "removals.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_eq!(fs::read_to_string(out.join("report.txt")).unwrap(), stdout(&o));
}
