//! PAPRIKA feasible-ranking elimination.
//!
//! A [`Ranking`] orders the levels of every attribute from least to most
//! preferred. Each answered choice task becomes a [`Constraint`] on the summed
//! utilities of the levels in which the two profiles differ. Rankings that are
//! contradicted by a constraint are dropped; the survivors form the
//! respondent's [`FeasibleRankingSet`], and the level most often ranked on top
//! is the respondent's Most Ideal level.

mod exact;

use std::fmt;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    attribute_letter, ChoiceTask, Count, CountKind, FrequencyDistribution, SurveyDesign,
};

/// Default cap on the number of rankings materialized for one design.
pub const DEFAULT_RANKING_CAP: u128 = 10_000_000;

/// One permutation of level indices per attribute, least preferred first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ranking {
    orders: Vec<Vec<u8>>,
    positions: Vec<Vec<u8>>,
}

impl Ranking {
    pub fn new(orders: Vec<Vec<u8>>) -> Result<Self> {
        let mut positions = Vec::with_capacity(orders.len());
        for (a, order) in orders.iter().enumerate() {
            let mut pos = vec![u8::MAX; order.len()];
            for (p, &level) in order.iter().enumerate() {
                let slot = pos.get_mut(level as usize).ok_or_else(|| {
                    Error::InvalidInput(format!("attribute {a}: level {level} out of range"))
                })?;
                if *slot != u8::MAX {
                    return Err(Error::InvalidInput(format!(
                        "attribute {a}: level {level} ranked twice"
                    )));
                }
                *slot = p as u8;
            }
            positions.push(pos);
        }
        Ok(Ranking { orders, positions })
    }

    pub fn orders(&self) -> &[Vec<u8>] {
        &self.orders
    }

    /// Rank of `level` within `attribute`, 0 = least preferred.
    pub fn position(&self, attribute: usize, level: usize) -> usize {
        self.positions[attribute][level] as usize
    }

    /// Most preferred level of `attribute`.
    pub fn top(&self, attribute: usize) -> usize {
        *self.orders[attribute].last().expect("non-empty order") as usize
    }

    /// Level at `depth` places below the top (0 = top).
    pub fn level_from_top(&self, attribute: usize, depth: usize) -> usize {
        let order = &self.orders[attribute];
        order[order.len() - 1 - depth] as usize
    }
}

impl fmt::Display for Ranking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (a, order) in self.orders.iter().enumerate() {
            if a > 0 {
                f.write_str(" ")?;
            }
            let letter = attribute_letter(a);
            for &l in order {
                write!(f, "{letter}{}", l + 1)?;
            }
        }
        Ok(())
    }
}

fn permutations(n: usize) -> Vec<Vec<u8>> {
    fn rec(prefix: &mut Vec<u8>, used: &mut [bool], out: &mut Vec<Vec<u8>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for l in 0..used.len() {
            if !used[l] {
                used[l] = true;
                prefix.push(l as u8);
                rec(prefix, used, out);
                prefix.pop();
                used[l] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// All rankings of a design, in lexicographic order (first attribute slowest,
/// permutations in lexicographic order within each attribute).
#[derive(Debug, Clone)]
pub struct RankingSpace {
    level_counts: Vec<usize>,
    rankings: Vec<Ranking>,
}

impl RankingSpace {
    pub fn new(design: &SurveyDesign) -> Result<Self> {
        Self::with_cap(&design.level_counts(), DEFAULT_RANKING_CAP)
    }

    pub fn with_cap(level_counts: &[usize], cap: u128) -> Result<Self> {
        let size = level_counts
            .iter()
            .try_fold(1u128, |acc, &m| acc.checked_mul(factorial(m)))
            .unwrap_or(u128::MAX);
        if size > cap {
            return Err(Error::CapExceeded {
                what: "ranking enumeration",
                size,
                cap,
                hint: "reduce levels or filter constraint-first instead of enumerating",
            });
        }
        let per_attr: Vec<Vec<Vec<u8>>> = level_counts.iter().map(|&m| permutations(m)).collect();
        let mut rankings = Vec::with_capacity(size as usize);
        let mut idx = vec![0usize; level_counts.len()];
        'outer: loop {
            let orders = idx
                .iter()
                .zip(&per_attr)
                .map(|(&i, perms)| perms[i].clone())
                .collect();
            rankings.push(Ranking::new(orders)?);
            for a in (0..idx.len()).rev() {
                idx[a] += 1;
                if idx[a] < per_attr[a].len() {
                    continue 'outer;
                }
                idx[a] = 0;
            }
            break;
        }
        Ok(RankingSpace {
            level_counts: level_counts.to_vec(),
            rankings,
        })
    }

    pub fn level_counts(&self) -> &[usize] {
        &self.level_counts
    }

    pub fn rankings(&self) -> &[Ranking] {
        &self.rankings
    }

    pub fn len(&self) -> usize {
        self.rankings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rankings.is_empty()
    }

    /// Keeps the rankings that violate none of `constraints`.
    pub fn feasible_set(&self, constraints: &[Constraint], rule: FeasibilityRule) -> FeasibleRankingSet<'_> {
        let members = (0..self.rankings.len())
            .filter(|&i| rule.admits(&self.rankings[i], constraints))
            .collect();
        FeasibleRankingSet {
            space: self,
            members,
            constraints: constraints.to_vec(),
        }
    }
}

/// Enumerates every ranking of the design under the default cap.
pub fn enumerate_rankings(design: &SurveyDesign) -> Result<Vec<Ranking>> {
    Ok(RankingSpace::new(design)?.rankings)
}

/// `winner_level` of `attribute` was on the winning profile, `loser_level` on
/// the losing one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Term {
    pub attribute: usize,
    pub winner_level: usize,
    pub loser_level: usize,
}

/// `sum(u(winner levels)) > sum(u(loser levels))` over the attributes where
/// the two profiles differ; shared levels cancel.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Constraint {
    terms: Vec<Term>,
}

impl Constraint {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidInput("constraint needs at least one term".into()));
        }
        if let Some(t) = terms.iter().find(|t| t.winner_level == t.loser_level) {
            return Err(Error::InvalidInput(format!(
                "term for attribute {} compares a level with itself",
                t.attribute
            )));
        }
        Ok(Constraint { terms })
    }

    pub fn from_choice(task: &ChoiceTask) -> Result<Self> {
        let (winner, loser) = task
            .outcome()
            .ok_or_else(|| Error::InvalidInput("choice task has no recorded winner".into()))?;
        if winner.len() != loser.len() {
            return Err(Error::InvalidInput(
                "choice task profiles have different attribute counts".into(),
            ));
        }
        let terms: Vec<Term> = winner
            .levels()
            .iter()
            .zip(loser.levels())
            .enumerate()
            .filter(|(_, (w, l))| w != l)
            .map(|(attribute, (&w, &l))| Term {
                attribute,
                winner_level: w as usize,
                loser_level: l as usize,
            })
            .collect();
        if terms.is_empty() {
            return Err(Error::InvalidInput(format!(
                "choice task pairs identical profiles {winner}"
            )));
        }
        Ok(Constraint { terms })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            let letter = attribute_letter(t.attribute);
            write!(
                f,
                "{letter}{} over {letter}{}",
                t.winner_level + 1,
                t.loser_level + 1
            )?;
        }
        Ok(())
    }
}

/// Constraints from every answered task, in task order.
pub fn constraints_from_tasks(tasks: &[ChoiceTask]) -> Result<Vec<Constraint>> {
    tasks.iter().map(Constraint::from_choice).collect()
}

/// True iff the ranking puts every winning level strictly below the level it
/// beat. Then each term of the sum is negative whatever the utilities are, so
/// the ranking cannot be reconciled with the choice. Mixed-direction rankings
/// are kept.
pub fn ranking_violates(ranking: &Ranking, constraint: &Constraint) -> bool {
    constraint.terms.iter().all(|t| {
        ranking.position(t.attribute, t.winner_level) < ranking.position(t.attribute, t.loser_level)
    })
}

/// How a ranking is tested against a respondent's constraints.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeasibilityRule {
    /// Eliminate only rankings that reverse every term of some constraint.
    #[default]
    Ordinal,
    /// Keep a ranking only if real utilities exist that respect its level
    /// orders and satisfy all constraints jointly.
    Exact,
}

impl FeasibilityRule {
    pub fn admits(self, ranking: &Ranking, constraints: &[Constraint]) -> bool {
        match self {
            FeasibilityRule::Ordinal => !constraints.iter().any(|c| ranking_violates(ranking, c)),
            FeasibilityRule::Exact => {
                !constraints.iter().any(|c| ranking_violates(ranking, c))
                    && exact::is_feasible(ranking, constraints)
            }
        }
    }
}

/// Per attribute, the share of the respondent's vote going to each level.
pub type LevelShares = Vec<Vec<Count>>;

/// Rankings consistent with one respondent's choices.
#[derive(Debug, Clone)]
pub struct FeasibleRankingSet<'a> {
    space: &'a RankingSpace,
    members: Vec<usize>,
    constraints: Vec<Constraint>,
}

impl<'a> FeasibleRankingSet<'a> {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    /// An empty set means the respondent's choices contradict each other.
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Indices into the enumeration the set was filtered from.
    pub fn member_indices(&self) -> &[usize] {
        &self.members
    }

    pub fn rankings(&self) -> impl Iterator<Item = &'a Ranking> + '_ {
        self.members.iter().map(|&i| &self.space.rankings[i])
    }

    pub fn contains(&self, ranking: &Ranking) -> bool {
        self.rankings().any(|r| r == ranking)
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn space(&self) -> &'a RankingSpace {
        self.space
    }

    /// Applies more constraints to the surviving rankings.
    pub fn refine(&self, constraints: &[Constraint], rule: FeasibilityRule) -> FeasibleRankingSet<'a> {
        let mut all = self.constraints.clone();
        all.extend_from_slice(constraints);
        let members = match rule {
            FeasibilityRule::Ordinal => self
                .members
                .iter()
                .copied()
                .filter(|&i| rule.admits(&self.space.rankings[i], constraints))
                .collect(),
            // joint feasibility has to see every constraint at once
            FeasibilityRule::Exact => self
                .members
                .iter()
                .copied()
                .filter(|&i| rule.admits(&self.space.rankings[i], &all))
                .collect(),
        };
        FeasibleRankingSet {
            space: self.space,
            members,
            constraints: all,
        }
    }

    /// How often each level sits `depth` places below the top, per attribute.
    pub fn rank_tallies(&self, depth: usize) -> Vec<Vec<usize>> {
        let mut tallies: Vec<Vec<usize>> =
            self.space.level_counts.iter().map(|&m| vec![0; m]).collect();
        for r in self.rankings() {
            for (a, tally) in tallies.iter_mut().enumerate() {
                if depth < tally.len() {
                    tally[r.level_from_top(a, depth)] += 1;
                }
            }
        }
        tallies
    }

    /// Modal level at `depth` below the top; tied modes share the unit vote
    /// equally. `None` for an empty set.
    pub fn modal_shares(&self, depth: usize) -> Option<LevelShares> {
        if self.is_empty() {
            return None;
        }
        Some(
            self.rank_tallies(depth)
                .into_iter()
                .map(|tally| {
                    let best = tally.iter().copied().max().unwrap_or(0);
                    let modes = tally.iter().filter(|&&c| c == best).count() as i64;
                    tally
                        .iter()
                        .map(|&c| {
                            if c == best {
                                Count::new(1, modes)
                            } else {
                                Count::zero()
                            }
                        })
                        .collect()
                })
                .collect(),
        )
    }

    /// Most Ideal level shares: 1 for a unique modal top level, 1/2 each for
    /// a two-way tie, 1/3 each for a three-way tie.
    pub fn mi_counts(&self) -> Option<LevelShares> {
        self.modal_shares(0)
    }
}

/// One respondent's extracted shares, or `None` when the feasible set was
/// empty.
#[derive(Debug, Clone)]
pub struct RespondentShares {
    pub id: String,
    pub shares: Option<LevelShares>,
}

/// Whole-number versions of a fractional distribution. Usually one case;
/// several when rounding ties (two counts ending in .5) force a split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundingCases {
    pub cases: Vec<Vec<u64>>,
}

impl RoundingCases {
    pub fn is_split(&self) -> bool {
        self.cases.len() > 1
    }
}

/// Rounds to whole numbers while keeping the total: floor everything, then
/// hand the remaining units to the largest fractional parts. When the last
/// unit(s) fall on a tie, every way of breaking the tie is returned.
pub fn round_counts(counts: &[Count]) -> RoundingCases {
    let floors: Vec<i64> = counts.iter().map(|c| c.floor().to_integer()).collect();
    let fracs: Vec<Count> = counts.iter().zip(&floors).map(|(c, f)| c - Count::from_integer(*f)).collect();
    let total: Count = counts.iter().fold(Count::zero(), |a, c| a + c);
    let units = total.round().to_integer() - floors.iter().sum::<i64>();
    if units <= 0 {
        return RoundingCases {
            cases: vec![floors.iter().map(|&f| f as u64).collect()],
        };
    }
    let units = units as usize;
    let mut order: Vec<usize> = (0..counts.len()).filter(|&i| !fracs[i].is_zero()).collect();
    order.sort_by(|&a, &b| fracs[b].cmp(&fracs[a]).then(a.cmp(&b)));
    let units = units.min(order.len());
    if units == 0 {
        return RoundingCases {
            cases: vec![floors.iter().map(|&f| f as u64).collect()],
        };
    }
    let cutoff = fracs[order[units - 1]];
    let sure: Vec<usize> = order.iter().copied().filter(|&i| fracs[i] > cutoff).collect();
    let tied: Vec<usize> = order.iter().copied().filter(|&i| fracs[i] == cutoff).collect();
    let pick = units - sure.len();

    let mut cases = Vec::new();
    let mut chosen = Vec::with_capacity(pick);
    fn combos(
        tied: &[usize],
        start: usize,
        pick: usize,
        chosen: &mut Vec<usize>,
        emit: &mut dyn FnMut(&[usize]),
    ) {
        if chosen.len() == pick {
            emit(chosen);
            return;
        }
        for i in start..tied.len() {
            chosen.push(tied[i]);
            combos(tied, i + 1, pick, chosen, emit);
            chosen.pop();
        }
    }
    combos(&tied, 0, pick, &mut chosen, &mut |up: &[usize]| {
        let mut case: Vec<u64> = floors.iter().map(|&f| f as u64).collect();
        for &i in sure.iter().chain(up) {
            case[i] += 1;
        }
        cases.push(case);
    });
    RoundingCases { cases }
}

/// PAPRIKA MI frequency distributions for a population.
#[derive(Debug, Clone, Serialize)]
pub struct MiCompilation {
    pub distributions: Vec<FrequencyDistribution>,
    pub rounding: Vec<RoundingCases>,
    /// IDs of respondents dropped for an empty feasible set.
    pub removed: Vec<String>,
    /// Respondents kept.
    pub n: usize,
}

/// Sums per-respondent shares into one distribution per attribute. Fractional
/// sums are kept exactly; rounding is reported separately.
pub fn compile_mi_distribution(level_counts: &[usize], respondents: &[RespondentShares]) -> MiCompilation {
    let mut sums: Vec<Vec<Count>> = level_counts.iter().map(|&m| vec![Count::zero(); m]).collect();
    let mut removed = Vec::new();
    let mut n = 0;
    for r in respondents {
        match &r.shares {
            None => removed.push(r.id.clone()),
            Some(shares) => {
                n += 1;
                for (sum, share) in sums.iter_mut().zip(shares) {
                    for (s, v) in sum.iter_mut().zip(share) {
                        *s += v;
                    }
                }
            }
        }
    }
    let rounding = sums.iter().map(|c| round_counts(c)).collect();
    let distributions = sums
        .into_iter()
        .enumerate()
        .map(|(attribute, counts)| FrequencyDistribution {
            attribute,
            kind: CountKind::MiPaprika,
            counts,
        })
        .collect();
    MiCompilation {
        distributions,
        rounding,
        removed,
        n,
    }
}
