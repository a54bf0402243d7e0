//! File formats: the survey design JSON, respondent JSON Lines, and audit CSV
//! exports of feasible ranking sets and MI shares.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Attribute, RespondentRecord, SurveyDesign};
use crate::paprika::{FeasibleRankingSet, LevelShares};

pub const DESIGN_SCHEMA_VERSION: u32 = 1;
pub const RECORD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct DesignFile {
    schema_version: u32,
    attributes: Vec<Attribute>,
    #[serde(default = "default_alternatives")]
    alternatives_per_task: usize,
    #[serde(default = "default_tasks")]
    choice_tasks: usize,
}

fn default_alternatives() -> usize {
    2
}

fn default_tasks() -> usize {
    15
}

/// Parses and validates a design document.
pub fn parse_design(text: &str) -> Result<SurveyDesign> {
    let file: DesignFile = serde_json::from_str(text)?;
    if file.schema_version != DESIGN_SCHEMA_VERSION {
        return Err(Error::InvalidDesign(format!(
            "unsupported schemaVersion {} (expected {DESIGN_SCHEMA_VERSION})",
            file.schema_version
        )));
    }
    SurveyDesign::new(file.attributes, file.alternatives_per_task, file.choice_tasks)
}

pub fn design_to_json(design: &SurveyDesign) -> String {
    let file = DesignFile {
        schema_version: DESIGN_SCHEMA_VERSION,
        attributes: design.attributes.clone(),
        alternatives_per_task: design.alternatives_per_task,
        choice_tasks: design.choice_tasks,
    };
    serde_json::to_string_pretty(&file).expect("design serializes")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct RecordLine {
    #[serde(default = "record_version")]
    schema_version: u32,
    #[serde(flatten)]
    record: RespondentRecord,
}

fn record_version() -> u32 {
    RECORD_SCHEMA_VERSION
}

/// Parses one JSON Lines entry without checking it against a design.
pub fn parse_record_line(line: &str) -> Result<RespondentRecord> {
    let parsed: RecordLine = serde_json::from_str(line)?;
    if parsed.schema_version != RECORD_SCHEMA_VERSION {
        return Err(Error::InvalidInput(format!(
            "unsupported record schemaVersion {}",
            parsed.schema_version
        )));
    }
    Ok(parsed.record)
}

pub fn record_to_line(record: &RespondentRecord) -> String {
    serde_json::to_string(&RecordLine {
        schema_version: RECORD_SCHEMA_VERSION,
        record: record.clone(),
    })
    .expect("record serializes")
}

/// Reads respondent records, validating each against `design`. Blank lines
/// are skipped; errors carry the 1-based line number.
pub fn read_records<R: BufRead>(reader: R, design: &SurveyDesign) -> Result<Vec<RespondentRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_record_line(&line).map_err(|e| Error::Record {
            line: line_no,
            message: e.to_string(),
        })?;
        record.validate(design).map_err(|e| Error::Record {
            line: line_no,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_records<W: Write>(mut out: W, records: &[RespondentRecord]) -> Result<()> {
    for r in records {
        writeln!(out, "{}", record_to_line(r))?;
    }
    Ok(())
}

/// One row per feasible ranking: the ranking string and the top level of each
/// attribute.
pub fn write_feasible_csv<W: Write>(out: W, design: &SurveyDesign, frs: &FeasibleRankingSet<'_>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["ranking".to_string()];
    header.extend(design.attributes.iter().map(|a| format!("top {}", a.label)));
    w.write_record(&header)?;
    for r in frs.rankings() {
        let mut row = vec![r.to_string()];
        for a in 0..design.attribute_count() {
            row.push(design.level_label(a, r.top(a)).to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `respondent, attribute, level, share` rows; shares printed as exact
/// fractions.
pub fn write_mi_shares_csv<W: Write>(
    out: W,
    design: &SurveyDesign,
    rows: &[(String, Option<LevelShares>)],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["respondent", "attribute", "level", "share"])?;
    for (id, shares) in rows {
        match shares {
            None => w.write_record([id.as_str(), "", "", "removed"])?,
            Some(shares) => {
                for (a, attr) in shares.iter().enumerate() {
                    for (l, s) in attr.iter().enumerate() {
                        w.write_record([
                            id.as_str(),
                            design.attributes[a].label.as_str(),
                            design.level_label(a, l),
                            &s.to_string(),
                        ])?;
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}
