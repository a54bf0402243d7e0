//! Candidate generation from the BYO answer and the single-elimination
//! choice-task tournament.

use std::collections::HashSet;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ChoiceTask, Profile, Side, SurveyDesign};

/// Number of variants generated around the BYO profile.
pub const VARIANT_COUNT: usize = 24;
/// Tournament field size for the standard 15-task design.
pub const FIELD_SIZE: usize = 16;

/// Every profile at Hamming distance exactly 2 from `byo`, ordered by
/// attribute pair and then by alternative levels.
pub fn distance_two_variants(byo: &Profile, design: &SurveyDesign) -> Vec<Profile> {
    let counts = design.level_counts();
    let k = counts.len();
    let mut out = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            for li in (0..counts[i]).filter(|&l| l != byo.level(i)) {
                for lj in (0..counts[j]).filter(|&l| l != byo.level(j)) {
                    out.push(byo.with_level(i, li).with_level(j, lj));
                }
            }
        }
    }
    out
}

/// The BYO profile followed by 24 profiles that each differ from it in exactly
/// two attributes.
///
/// On the 4x3 design there are exactly 24 such profiles, so the random source
/// only shuffles them. Larger designs draw a uniform 24-subset. Designs with
/// fewer than 24 distance-2 profiles are rejected.
pub fn generate_candidate_profiles<R: Rng + ?Sized>(
    byo: &Profile,
    design: &SurveyDesign,
    rng: &mut R,
) -> Result<Vec<Profile>> {
    design.validate()?;
    byo.validate(design)?;
    let mut variants = distance_two_variants(byo, design);
    if variants.len() < VARIANT_COUNT {
        return Err(Error::UnsupportedShape {
            shape: design.shape(),
            reason: format!(
                "only {} profiles differ from the BYO in exactly 2 attributes, need {VARIANT_COUNT}",
                variants.len()
            ),
        });
    }
    if variants.len() > VARIANT_COUNT {
        let picked = index::sample(rng, variants.len(), VARIANT_COUNT);
        variants = picked.iter().map(|i| variants[i].clone()).collect();
    }
    variants.shuffle(rng);
    let mut out = Vec::with_capacity(VARIANT_COUNT + 1);
    out.push(byo.clone());
    out.extend(variants);
    Ok(out)
}

fn ensure_distinct(profiles: &[Profile], what: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(profiles.len());
    for p in profiles {
        if !seen.insert(p) {
            return Err(Error::InvalidInput(format!("{what} contains duplicate profile {p}")));
        }
    }
    Ok(())
}

/// Uniformly random `size`-subset of the candidates, in random bracket order.
pub fn select_tournament_field<R: Rng + ?Sized>(
    candidates: &[Profile],
    size: usize,
    rng: &mut R,
) -> Result<Vec<Profile>> {
    ensure_distinct(candidates, "candidate list")?;
    if candidates.len() < size {
        return Err(Error::InvalidInput(format!(
            "{} candidates cannot fill a tournament field of {size}",
            candidates.len()
        )));
    }
    let picked = index::sample(rng, candidates.len(), size);
    let mut field: Vec<Profile> = picked.iter().map(|i| candidates[i].clone()).collect();
    field.shuffle(rng);
    Ok(field)
}

/// Like [`select_tournament_field`] but `required` always gets a slot.
pub fn select_field_including<R: Rng + ?Sized>(
    candidates: &[Profile],
    required: &Profile,
    size: usize,
    rng: &mut R,
) -> Result<Vec<Profile>> {
    if !candidates.contains(required) {
        return Err(Error::InvalidInput(format!(
            "required profile {required} is not a candidate"
        )));
    }
    let rest: Vec<Profile> = candidates.iter().filter(|p| *p != required).cloned().collect();
    let mut field = select_tournament_field(&rest, size - 1, rng)?;
    field.push(required.clone());
    field.shuffle(rng);
    Ok(field)
}

/// Single-elimination bracket. Round 1 pairs the field in order
/// (`0v1`, `2v3`, ...); each later round pairs the previous round's winners in
/// order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Bracket {
    field: Vec<Profile>,
    rounds: Vec<Vec<ChoiceTask>>,
    entrants: Vec<Profile>,
    winners: Vec<Profile>,
}

impl Bracket {
    pub fn new(field: Vec<Profile>) -> Result<Self> {
        if field.len() < 2 || !field.len().is_power_of_two() {
            return Err(Error::Bracket(format!(
                "field size {} is not a power of two >= 2",
                field.len()
            )));
        }
        ensure_distinct(&field, "tournament field")?;
        let width = field[0].len();
        if field.iter().any(|p| p.len() != width) {
            return Err(Error::Bracket("field profiles have different attribute counts".into()));
        }
        Ok(Bracket {
            entrants: field.clone(),
            field,
            rounds: vec![Vec::new()],
            winners: Vec::new(),
        })
    }

    /// Rebuilds a bracket from its field and the recorded winner sides.
    pub fn replay(field: Vec<Profile>, winners: &[Side]) -> Result<Self> {
        let mut bracket = Bracket::new(field)?;
        for &side in winners {
            bracket.record_choice(side)?;
        }
        Ok(bracket)
    }

    pub fn field(&self) -> &[Profile] {
        &self.field
    }

    /// Answered tasks grouped by round; the last round may be partial.
    pub fn rounds(&self) -> &[Vec<ChoiceTask>] {
        &self.rounds
    }

    pub fn total_tasks(&self) -> usize {
        self.field.len() - 1
    }

    pub fn answered(&self) -> usize {
        self.rounds.iter().map(Vec::len).sum()
    }

    pub fn is_complete(&self) -> bool {
        self.entrants.len() == 1
    }

    /// 1-based round number of the pending task.
    pub fn current_round(&self) -> usize {
        self.rounds.len()
    }

    pub fn pending(&self) -> Option<ChoiceTask> {
        if self.is_complete() {
            return None;
        }
        let i = 2 * self.winners.len();
        Some(ChoiceTask {
            left: self.entrants[i].clone(),
            right: self.entrants[i + 1].clone(),
            winner: None,
        })
    }

    /// Records the pick for the pending task and advances the bracket.
    pub fn record_choice(&mut self, winner: Side) -> Result<&ChoiceTask> {
        let mut task = self
            .pending()
            .ok_or_else(|| Error::Bracket("bracket is already complete".into()))?;
        task.winner = Some(winner);
        self.winners.push(task.profile(winner).clone());
        let round = self.rounds.len() - 1;
        self.rounds[round].push(task);
        if 2 * self.winners.len() == self.entrants.len() {
            self.entrants = std::mem::take(&mut self.winners);
            if self.entrants.len() > 1 {
                self.rounds.push(Vec::new());
            }
        }
        let round = &self.rounds[round];
        Ok(&round[round.len() - 1])
    }

    pub fn champion(&self) -> Option<&Profile> {
        self.is_complete().then(|| &self.entrants[0])
    }

    /// All answered tasks in the order they were asked.
    pub fn tasks(&self) -> Vec<ChoiceTask> {
        self.rounds.iter().flatten().cloned().collect()
    }

    pub fn winner_sides(&self) -> Vec<Side> {
        self.rounds
            .iter()
            .flatten()
            .filter_map(|t| t.winner)
            .collect()
    }

    /// Plays every remaining task with `choose`.
    pub fn play_out(&mut self, mut choose: impl FnMut(&ChoiceTask) -> Side) -> Result<()> {
        while let Some(task) = self.pending() {
            let side = choose(&task);
            self.record_choice(side)?;
        }
        Ok(())
    }
}
