//! Batch study report: MT tallies, part-worth and PAPRIKA MI distributions,
//! and estimated population MT shares, per population and attribute.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::{minimize_wmae, mle_estimate, population_proportions, LevelProportion};
use crate::model::{Count, RespondentRecord, SurveyDesign};
use crate::paprika::{
    compile_mi_distribution, constraints_from_tasks, FeasibilityRule, RankingSpace,
    RespondentShares, RoundingCases,
};
use crate::partworth::{estimate_partworths, mi_from_partworths, DEFAULT_RIDGE};

#[derive(Debug, Clone, Copy)]
pub struct ReportOptions {
    pub ridge: f64,
    pub rule: FeasibilityRule,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            ridge: DEFAULT_RIDGE,
            rule: FeasibilityRule::Ordinal,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AttributeBlock {
    pub attribute: usize,
    pub label: String,
    pub levels: Vec<String>,
    /// Section A: BYO tally.
    pub mt: Vec<u64>,
    /// Part-worth argmax tally.
    pub mi_partworth: Vec<u64>,
    /// Respondents whose part-worth MI was an exact tie (lowest level used).
    pub partworth_ties: usize,
    /// Section B: PAPRIKA tally, exact.
    pub mi_paprika: Vec<Count>,
    pub paprika_rounding: RoundingCases,
    /// Section C.
    pub sample_mt_share: Vec<f64>,
    pub population_mt: Vec<LevelProportion>,
    pub population_wmae: f64,
    pub mle_counts: Vec<u64>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PopulationBlock {
    pub tag: String,
    pub n: usize,
    pub population: u64,
    /// Respondents kept for the PAPRIKA tally.
    pub paprika_n: usize,
    pub removed: Vec<String>,
    pub attributes: Vec<AttributeBlock>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub populations: Vec<PopulationBlock>,
}

fn share(num: u64, den: usize) -> f64 {
    if den == 0 {
        return 0.0;
    }
    let scaled = 100 * num as u128;
    let den = den as u128;
    ((2 * scaled + den) / (2 * den)) as f64 / 100.0
}

/// Runs the whole pipeline. Populations appear in order of first occurrence
/// in `records`.
pub fn build_report(
    design: &SurveyDesign,
    records: &[RespondentRecord],
    population_sizes: &BTreeMap<String, u64>,
    options: &ReportOptions,
) -> Result<StudyReport> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no respondent records to report on".into()));
    }
    let mut tags: Vec<&str> = Vec::new();
    for r in records {
        r.validate(design)?;
        if r.tasks.is_empty() {
            return Err(Error::InvalidInput(format!("respondent {:?} has no answered tasks", r.id)));
        }
        if !tags.contains(&r.population_tag.as_str()) {
            tags.push(&r.population_tag);
        }
    }
    let space = RankingSpace::new(design)?;
    let counts = design.level_counts();

    let mut populations = Vec::with_capacity(tags.len());
    for tag in tags {
        let population = *population_sizes.get(tag).ok_or_else(|| {
            Error::InvalidInput(format!("no population size given for population tag {tag:?}"))
        })?;
        let members: Vec<&RespondentRecord> =
            records.iter().filter(|r| r.population_tag == tag).collect();
        let n = members.len();
        if (n as u64) > population {
            return Err(Error::InvalidInput(format!(
                "population {tag:?} has {n} respondents but N = {population}"
            )));
        }

        let per_respondent: Vec<(Vec<usize>, Vec<bool>, RespondentShares)> = members
            .par_iter()
            .map(|r| -> Result<_> {
                let pw = estimate_partworths(&counts, &r.tasks, options.ridge)?;
                let picks = mi_from_partworths(&pw);
                let constraints = constraints_from_tasks(&r.tasks)?;
                let frs = space.feasible_set(&constraints, options.rule);
                Ok((
                    picks.iter().map(|p| p.level).collect(),
                    picks.iter().map(|p| p.tied).collect(),
                    RespondentShares {
                        id: r.id.clone(),
                        shares: frs.mi_counts(),
                    },
                ))
            })
            .collect::<Result<_>>()?;

        let shares: Vec<RespondentShares> = per_respondent.iter().map(|p| p.2.clone()).collect();
        let compiled = compile_mi_distribution(&counts, &shares);

        let mut attributes = Vec::with_capacity(counts.len());
        for (a, &m) in counts.iter().enumerate() {
            let mut mt = vec![0u64; m];
            for r in &members {
                mt[r.byo.level(a)] += 1;
            }
            let mut mi_partworth = vec![0u64; m];
            let mut ties = 0;
            for (levels, tied, _) in &per_respondent {
                mi_partworth[levels[a]] += 1;
                if tied[a] {
                    ties += 1;
                }
            }
            let best = minimize_wmae(&mt, population)?;
            let mle = mle_estimate(&mt, population)?;
            attributes.push(AttributeBlock {
                attribute: a,
                label: design.attributes[a].label.clone(),
                levels: design.attributes[a].levels.clone(),
                sample_mt_share: mt.iter().map(|&c| share(c, n)).collect(),
                population_mt: population_proportions(&mt, population)?,
                population_wmae: best.wmae,
                mle_counts: mle.counts,
                mt,
                mi_partworth,
                partworth_ties: ties,
                mi_paprika: compiled.distributions[a].counts.clone(),
                paprika_rounding: compiled.rounding[a].clone(),
            });
        }
        populations.push(PopulationBlock {
            tag: tag.to_string(),
            n,
            population,
            paprika_n: compiled.n,
            removed: compiled.removed,
            attributes,
        });
    }
    Ok(StudyReport { populations })
}

fn fmt_count(c: &Count) -> String {
    if c.is_integer() {
        c.to_integer().to_string()
    } else {
        let v = *c.numer() as f64 / *c.denom() as f64;
        format!("{v:.2}")
    }
}

fn fmt_share(x: f64) -> String {
    let s = format!("{x:.2}");
    s.strip_prefix('0').map(str::to_string).unwrap_or(s)
}

impl StudyReport {
    pub fn section_a_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["population", "attribute", "level", "byo_mt", "partworth_mi"])?;
        for p in &self.populations {
            for a in &p.attributes {
                for (l, level) in a.levels.iter().enumerate() {
                    w.write_record([
                        p.tag.as_str(),
                        &a.label,
                        level,
                        &a.mt[l].to_string(),
                        &a.mi_partworth[l].to_string(),
                    ])?;
                }
            }
        }
        csv_string(w)
    }

    pub fn section_b_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "population",
            "attribute",
            "level",
            "partworth_mi",
            "paprika_mi",
            "paprika_mi_rounded",
            "paprika_mi_rounded_alt",
        ])?;
        for p in &self.populations {
            for a in &p.attributes {
                let cases = &a.paprika_rounding.cases;
                for (l, level) in a.levels.iter().enumerate() {
                    let alt = if cases.len() > 1 {
                        cases[1..]
                            .iter()
                            .map(|c| c[l].to_string())
                            .collect::<Vec<_>>()
                            .join("|")
                    } else {
                        String::new()
                    };
                    w.write_record([
                        p.tag.as_str(),
                        &a.label,
                        level,
                        &a.mi_partworth[l].to_string(),
                        &a.mi_paprika[l].to_string(),
                        &cases[0][l].to_string(),
                        &alt,
                    ])?;
                }
            }
        }
        csv_string(w)
    }

    pub fn section_c_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "population",
            "attribute",
            "level",
            "sample_mt",
            "population_mt",
            "error",
            "estimated_count",
        ])?;
        for p in &self.populations {
            for a in &p.attributes {
                for (l, level) in a.levels.iter().enumerate() {
                    let est = &a.population_mt[l];
                    w.write_record([
                        p.tag.as_str(),
                        &a.label,
                        level,
                        &format!("{:.2}", a.sample_mt_share[l]),
                        &format!("{:.2}", est.proportion),
                        &format!("{:.2}", est.error),
                        &est.estimated_count.to_string(),
                    ])?;
                }
            }
        }
        csv_string(w)
    }

    pub fn removals_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["population", "respondent", "reason"])?;
        for p in &self.populations {
            for id in &p.removed {
                w.write_record([p.tag.as_str(), id, "empty feasible ranking set"])?;
            }
        }
        csv_string(w)
    }

    /// Plain-text rendering of all three sections.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "MT/MI study report");
        let _ = writeln!(
            s,
            "Part-worth MI ties are resolved to the lowest level index. PAPRIKA ties share the respondent's vote equally."
        );
        for p in &self.populations {
            let _ = writeln!(s);
            let _ = writeln!(
                s,
                "== {} (n = {}, N = {}, PAPRIKA n = {}) ==",
                p.tag, p.n, p.population, p.paprika_n
            );
            for id in &p.removed {
                let _ = writeln!(s, "removed {id}: empty feasible ranking set");
            }
            let _ = writeln!(s, "(A) {:<24} {:<22} {:>6} {:>6}", "attribute", "level", "MT", "pwMI");
            for a in &p.attributes {
                for (l, level) in a.levels.iter().enumerate() {
                    let _ = writeln!(s, "    {:<24} {:<22} {:>6} {:>6}", a.label, level, a.mt[l], a.mi_partworth[l]);
                }
            }
            let _ = writeln!(s, "(B) {:<24} {:<22} {:>6} {:>8}", "attribute", "level", "pwMI", "PAPRIKA");
            for a in &p.attributes {
                for (l, level) in a.levels.iter().enumerate() {
                    let _ = writeln!(
                        s,
                        "    {:<24} {:<22} {:>6} {:>8}",
                        a.label,
                        level,
                        a.mi_partworth[l],
                        fmt_count(&a.mi_paprika[l])
                    );
                }
                if a.paprika_rounding.is_split() {
                    let cases: Vec<String> = a
                        .paprika_rounding
                        .cases
                        .iter()
                        .map(|c| format!("{c:?}"))
                        .collect();
                    let _ = writeln!(s, "    {} rounding split: {}", a.label, cases.join(" or "));
                }
            }
            let _ = writeln!(s, "(C) {:<24} {:<22} {:>6} {:>12}", "attribute", "level", "sample", "population");
            for a in &p.attributes {
                for (l, level) in a.levels.iter().enumerate() {
                    let est = &a.population_mt[l];
                    let _ = writeln!(
                        s,
                        "    {:<24} {:<22} {:>6} {:>6}±{}",
                        a.label,
                        level,
                        fmt_share(a.sample_mt_share[l]),
                        fmt_share(est.proportion),
                        fmt_share(est.error)
                    );
                }
            }
        }
        s
    }

    /// Writes `report.txt`, `section_a.csv`, `section_b.csv`,
    /// `section_c.csv` and `removals.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.txt"), self.to_text())?;
        fs::write(dir.join("section_a.csv"), self.section_a_csv()?)?;
        fs::write(dir.join("section_b.csv"), self.section_b_csv()?)?;
        fs::write(dir.join("section_c.csv"), self.section_c_csv()?)?;
        fs::write(dir.join("removals.csv"), self.removals_csv()?)?;
        Ok(())
    }
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Loads the design and records, builds the report and writes it to
/// `out_dir`.
pub fn run_report(
    design_file: &Path,
    records_file: &Path,
    population_sizes: &BTreeMap<String, u64>,
    out_dir: &Path,
    options: &ReportOptions,
) -> Result<StudyReport> {
    let design = crate::io::parse_design(&fs::read_to_string(design_file)?)?;
    let file = fs::File::open(records_file)?;
    let records = crate::io::read_records(std::io::BufReader::new(file), &design)?;
    let report = build_report(&design, &records, population_sizes, options)?;
    report.write_to(out_dir)?;
    Ok(report)
}

/// Sum of a fractional distribution.
pub fn total(counts: &[Count]) -> Count {
    counts.iter().fold(Count::zero(), |a, c| a + c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shares_round_half_up() {
        assert_eq!(share(6, 13), 0.46);
        assert_eq!(share(7, 13), 0.54);
        assert_eq!(share(11, 13), 0.85);
        assert_eq!(share(1, 8), 0.13);
        assert_eq!(fmt_share(0.5), ".50");
    }

    #[test]
    fn empty_records_error() {
        let d = SurveyDesign::four_by_three();
        let err = build_report(&d, &[], &BTreeMap::new(), &ReportOptions::default()).unwrap_err();
        assert!(err.is_validation());
    }
}
