//! Monte Carlo estimate of how often PAPRIKA recovers a respondent's true
//! Most Ideal levels from one round-of-16 tournament.
//!
//! The simulated respondent has additive utilities that decrease with the
//! level index, so level 1 of every attribute is the true MI level. Choices
//! are deterministic: higher total utility wins, and equal totals are broken
//! by the first attribute (A, then B, ...) whose levels differ.
//!
//! Every trial draws from its own ChaCha stream keyed by `(seed, trial)`, so
//! results do not depend on thread count and the three BYO modes see the same
//! random streams.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChoiceTask, Profile, Side, SurveyDesign};
use crate::paprika::{constraints_from_tasks, FeasibilityRule, RankingSpace};
use crate::survey::{
    generate_candidate_profiles, select_field_including, select_tournament_field, Bracket,
};

pub const DEFAULT_UTILITIES: [f64; 3] = [2.0, 1.0, 0.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulatedRespondent {
    utilities: Vec<Vec<f64>>,
}

impl SimulatedRespondent {
    pub fn new(utilities: Vec<Vec<f64>>) -> Result<Self> {
        for (a, u) in utilities.iter().enumerate() {
            if u.len() < 2 {
                return Err(Error::InvalidInput(format!("attribute {a} needs at least 2 utilities")));
            }
            if u.iter().any(|v| !v.is_finite()) || u.windows(2).any(|w| w[0] <= w[1]) {
                return Err(Error::InvalidInput(format!(
                    "attribute {a} utilities must be finite and strictly decreasing, got {u:?}"
                )));
            }
        }
        Ok(SimulatedRespondent { utilities })
    }

    /// The same level utilities for each of `attributes` attributes.
    pub fn uniform(attributes: usize, levels: &[f64]) -> Result<Self> {
        Self::new(vec![levels.to_vec(); attributes])
    }

    pub fn utilities(&self) -> &[Vec<f64>] {
        &self.utilities
    }

    pub fn level_counts(&self) -> Vec<usize> {
        self.utilities.iter().map(Vec::len).collect()
    }

    pub fn total(&self, profile: &Profile) -> f64 {
        profile
            .levels()
            .iter()
            .enumerate()
            .map(|(a, &l)| self.utilities[a][l as usize])
            .sum()
    }

    /// The full ranking this respondent holds, least preferred first.
    pub fn true_orders(&self) -> Vec<Vec<u8>> {
        self.utilities
            .iter()
            .map(|u| (0..u.len() as u8).rev().collect())
            .collect()
    }

    pub fn simulate_choice(&self, task: &ChoiceTask) -> Side {
        let left = self.total(&task.left);
        let right = self.total(&task.right);
        if left > right {
            return Side::Left;
        }
        if right > left {
            return Side::Right;
        }
        for (a, u) in self.utilities.iter().enumerate() {
            let (l, r) = (task.left.level(a), task.right.level(a));
            if l != r {
                return if u[l] > u[r] { Side::Left } else { Side::Right };
            }
        }
        // identical profiles never reach a task
        Side::Left
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ByoMode {
    /// BYO equals the true MI profile (all level 1).
    Ideal,
    /// BYO fixed at level 2 of every attribute.
    Typical,
    /// Each BYO level drawn uniformly and independently.
    Random,
}

impl ByoMode {
    pub const ALL: [ByoMode; 3] = [ByoMode::Ideal, ByoMode::Typical, ByoMode::Random];

    pub fn byo<R: Rng + ?Sized>(self, level_counts: &[usize], rng: &mut R) -> Profile {
        match self {
            ByoMode::Ideal => Profile::from_indices(&vec![0; level_counts.len()]),
            ByoMode::Typical => Profile::from_indices(&vec![1; level_counts.len()]),
            ByoMode::Random => Profile::new(
                level_counts.iter().map(|&m| rng.random_range(0..m) as u8).collect(),
            ),
        }
    }
}

impl fmt::Display for ByoMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ByoMode::Ideal => "ideal",
            ByoMode::Typical => "typical",
            ByoMode::Random => "random",
        })
    }
}

impl FromStr for ByoMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" | "i" => Ok(ByoMode::Ideal),
            "typical" | "ii" => Ok(ByoMode::Typical),
            "random" | "iii" => Ok(ByoMode::Random),
            other => Err(Error::InvalidInput(format!(
                "unknown BYO mode {other:?} (expected ideal, typical or random)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrialOptions {
    pub force_byo_in_field: bool,
    pub rule: FeasibilityRule,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    /// Per attribute, the share of the MI vote that went to level 1.
    pub credits: Vec<f64>,
    pub feasible_rankings: usize,
    pub champion: Profile,
}

/// Everything a trial needs that does not change between trials.
#[derive(Debug, Clone)]
pub struct SimulationSetup {
    pub design: SurveyDesign,
    pub respondent: SimulatedRespondent,
    pub space: RankingSpace,
    pub options: TrialOptions,
}

impl SimulationSetup {
    /// 4 attributes x 3 levels, 15 tasks, the given level utilities for
    /// every attribute.
    pub fn standard(levels: &[f64]) -> Result<Self> {
        if levels.len() != 3 {
            return Err(Error::InvalidInput(format!(
                "the 4x3 simulation needs 3 level utilities, got {}",
                levels.len()
            )));
        }
        let design = SurveyDesign::with_level_counts(&[3, 3, 3, 3], 15)?;
        let respondent = SimulatedRespondent::uniform(4, levels)?;
        Self::new(design, respondent, TrialOptions::default())
    }

    pub fn new(design: SurveyDesign, respondent: SimulatedRespondent, options: TrialOptions) -> Result<Self> {
        if design.level_counts() != respondent.level_counts() {
            return Err(Error::InvalidInput(
                "respondent utilities do not match the design's level counts".into(),
            ));
        }
        let space = RankingSpace::new(&design)?;
        Ok(SimulationSetup {
            design,
            respondent,
            space,
            options,
        })
    }

    /// Random stream for one trial.
    pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        rng
    }

    pub fn run_trial<R: Rng + ?Sized>(&self, mode: ByoMode, rng: &mut R) -> Result<TrialResult> {
        let counts = self.design.level_counts();
        let byo = mode.byo(&counts, rng);
        let candidates = generate_candidate_profiles(&byo, &self.design, rng)?;
        let size = self.design.field_size();
        let field = if self.options.force_byo_in_field {
            select_field_including(&candidates, &byo, size, rng)?
        } else {
            select_tournament_field(&candidates, size, rng)?
        };
        let mut bracket = Bracket::new(field)?;
        bracket.play_out(|task| self.respondent.simulate_choice(task))?;
        let constraints = constraints_from_tasks(&bracket.tasks())?;
        let frs = self.space.feasible_set(&constraints, self.options.rule);
        let credits = match frs.mi_counts() {
            Some(shares) => shares
                .iter()
                .map(|s| *s[0].numer() as f64 / *s[0].denom() as f64)
                .collect(),
            // unreachable for a consistent respondent under the ordinal rule
            None => vec![0.0; counts.len()],
        };
        Ok(TrialResult {
            credits,
            feasible_rankings: frs.len(),
            champion: bracket.champion().cloned().expect("completed bracket"),
        })
    }
}

/// Per-attribute recovery probability for one BYO mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HitProbabilities {
    pub mode: ByoMode,
    pub trials: u64,
    pub seed: u64,
    pub probabilities: Vec<f64>,
    /// `sqrt(p (1 - p) / trials)`
    pub standard_errors: Vec<f64>,
    /// Trials whose feasible set came out empty.
    pub empty_sets: u64,
}

pub fn estimate_hit_probabilities(
    setup: &SimulationSetup,
    mode: ByoMode,
    trials: u64,
    seed: u64,
) -> Result<HitProbabilities> {
    if trials == 0 {
        return Err(Error::InvalidInput("need at least one trial".into()));
    }
    let results: Vec<TrialResult> = (0..trials)
        .into_par_iter()
        .map(|t| setup.run_trial(mode, &mut SimulationSetup::trial_rng(seed, t)))
        .collect::<Result<_>>()?;
    let k = setup.design.attribute_count();
    let mut sums = vec![0.0; k];
    let mut empty = 0;
    // sequential sum keeps the float result independent of thread count
    for r in &results {
        if r.feasible_rankings == 0 {
            empty += 1;
        }
        for (s, c) in sums.iter_mut().zip(&r.credits) {
            *s += c;
        }
    }
    let probabilities: Vec<f64> = sums.iter().map(|s| s / trials as f64).collect();
    let standard_errors = probabilities
        .iter()
        .map(|p| (p * (1.0 - p) / trials as f64).sqrt())
        .collect();
    Ok(HitProbabilities {
        mode,
        trials,
        seed,
        probabilities,
        standard_errors,
        empty_sets: empty,
    })
}

/// One row per mode with a probability
/// and standard error column per attribute.
pub fn write_table_csv<W: std::io::Write>(out: W, rows: &[HitProbabilities]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let k = rows.first().map_or(0, |r| r.probabilities.len());
    let mut header = vec!["mode".to_string(), "trials".to_string(), "seed".to_string()];
    for a in 0..k {
        header.push(format!("{}1", crate::model::attribute_letter(a)));
    }
    for a in 0..k {
        header.push(format!("se_{}1", crate::model::attribute_letter(a)));
    }
    header.push("empty_sets".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.mode.to_string(), r.trials.to_string(), r.seed.to_string()];
        rec.extend(r.probabilities.iter().map(|p| format!("{p:.4}")));
        rec.extend(r.standard_errors.iter().map(|s| format!("{s:.4}")));
        rec.push(r.empty_sets.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn respondent() -> SimulatedRespondent {
        SimulatedRespondent::uniform(4, &DEFAULT_UTILITIES).unwrap()
    }

    fn task(l: &[usize], r: &[usize]) -> ChoiceTask {
        ChoiceTask::new(Profile::from_indices(l), Profile::from_indices(r)).unwrap()
    }

    #[test]
    fn higher_total_wins() {
        // totals 5 vs 3
        assert_eq!(respondent().simulate_choice(&task(&[0, 0, 1, 2], &[1, 1, 1, 2])), Side::Left);
        assert_eq!(respondent().simulate_choice(&task(&[1, 1, 1, 2], &[0, 0, 1, 2])), Side::Right);
    }

    #[test]
    fn ties_break_on_first_attribute() {
        // A1C2 vs A2C1: equal totals, A decides
        assert_eq!(respondent().simulate_choice(&task(&[0, 0, 1, 0], &[1, 0, 0, 0])), Side::Left);
        assert_eq!(respondent().simulate_choice(&task(&[1, 0, 0, 0], &[0, 0, 1, 0])), Side::Right);
        // same A, B decides
        assert_eq!(respondent().simulate_choice(&task(&[1, 2, 0, 0], &[1, 1, 1, 0])), Side::Right);
    }

    #[test]
    fn utilities_must_decrease() {
        assert!(SimulatedRespondent::uniform(4, &[0.0, 1.0, 2.0]).is_err());
        assert!(SimulatedRespondent::uniform(4, &[1.0, 1.0, 0.0]).is_err());
        assert!(SimulationSetup::standard(&[2.0, 1.0]).is_err());
    }

    #[test]
    fn modes_parse() {
        assert_eq!("ideal".parse::<ByoMode>().unwrap(), ByoMode::Ideal);
        assert_eq!("typical".parse::<ByoMode>().unwrap(), ByoMode::Typical);
        assert_eq!("random".parse::<ByoMode>().unwrap(), ByoMode::Random);
        assert!("best".parse::<ByoMode>().is_err());
    }

    #[test]
    fn trials_are_reproducible() {
        let setup = SimulationSetup::standard(&DEFAULT_UTILITIES).unwrap();
        for mode in ByoMode::ALL {
            let a = setup.run_trial(mode, &mut SimulationSetup::trial_rng(9, 4)).unwrap();
            let b = setup.run_trial(mode, &mut SimulationSetup::trial_rng(9, 4)).unwrap();
            assert_eq!(a, b);
            assert!(a.feasible_rankings > 0);
            assert!(a.credits.iter().all(|c| (0.0..=1.0).contains(c)));
        }
    }

    #[test]
    fn small_run_is_bit_identical_on_rerun() {
        let setup = SimulationSetup::standard(&DEFAULT_UTILITIES).unwrap();
        let a = estimate_hit_probabilities(&setup, ByoMode::Random, 64, 5).unwrap();
        let b = estimate_hit_probabilities(&setup, ByoMode::Random, 64, 5).unwrap();
        assert_eq!(a, b);
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        write_table_csv(&mut buf_a, &[a]).unwrap();
        write_table_csv(&mut buf_b, &[b]).unwrap();
        assert_eq!(buf_a, buf_b);
        assert!(String::from_utf8(buf_a).unwrap().starts_with("mode,trials,seed,A1,B1,C1,D1,se_A1"));
    }

    #[test]
    fn zero_trials_rejected() {
        let setup = SimulationSetup::standard(&DEFAULT_UTILITIES).unwrap();
        assert!(estimate_hit_probabilities(&setup, ByoMode::Ideal, 0, 1).is_err());
    }
}
