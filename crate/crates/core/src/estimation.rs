//! Population frequency estimates from a small sample of a known, small
//! population.
//!
//! A sample `S = (n_1, .., n_m)` of size `n` drawn without replacement from a
//! population `P = (N_1, .., N_m)` of size `N` has multivariate
//! hypergeometric probability `prod C(N_i, n_i) / C(N, n)`. Every `P` with
//! `N_i >= n_i` and `sum N_i = N` is *admissible*.
//!
//! Two estimators are provided:
//!
//! * [`mle_estimate`] picks the `N - n` largest entries of the probability
//!   factor table `f_ij = 1 + n_i / j`. It never moves mass onto a level that
//!   was not observed.
//! * [`minimize_wmae`] searches every admissible estimate for the smallest
//!   weighted mean absolute error, where each admissible population is
//!   weighted by its probability of producing the observed sample.

use std::cmp::Ordering;

use num_bigint::BigUint;
use num_rational::{BigRational, Ratio};
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{EstimationMethod, PopulationEstimate};

/// Default cap on admissible-ensemble enumeration.
pub const DEFAULT_ENSEMBLE_CAP: u128 = 10_000_000;
/// Populations up to this size get exact integer weights.
pub const EXACT_WEIGHT_LIMIT: u64 = 60;

fn check_inputs(sample: &[u64], population: u64) -> Result<u64> {
    if sample.is_empty() {
        return Err(Error::InvalidInput("sample distribution has no levels".into()));
    }
    let n: u64 = sample.iter().sum();
    if n > population {
        return Err(Error::InvalidInput(format!(
            "sample size n = {n} exceeds population size N = {population}"
        )));
    }
    Ok(n)
}

/// `C(n, k)` in `u128`, saturating at `u128::MAX`.
pub fn binomial_u128(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        let num = (n - i) as u128;
        acc = match acc.checked_mul(num) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

fn binomial_big(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `ln C(n, k)`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

/// Probability factor table for a sample and the `N - n` units still to be
/// placed.
#[derive(Debug, Clone)]
pub struct FactorTable {
    sample: Vec<u64>,
    rows: u64,
}

impl FactorTable {
    pub fn new(sample: &[u64], population: u64) -> Result<Self> {
        let n = check_inputs(sample, population)?;
        Ok(FactorTable {
            sample: sample.to_vec(),
            rows: population - n,
        })
    }

    pub fn rows(&self) -> u64 {
        self.rows
    }

    /// `f_ij = 1 + n_i / j` for `j >= 1`; `f_i0 = 1`.
    pub fn factor(&self, level: usize, j: u64) -> Ratio<u64> {
        if j == 0 {
            return Ratio::one();
        }
        Ratio::new(self.sample[level] + j, j)
    }

    /// Greedy choice of the `N - n` largest factors. Returns how many factors
    /// came from each column and whether the cut fell on a tie between
    /// different columns.
    pub fn select_largest(&self) -> (Vec<u64>, bool) {
        let m = self.sample.len();
        let mut taken = vec![0u64; m];
        // next factor in column i is f_{i, taken[i] + 1}
        let next = |taken: &[u64], i: usize| -> Option<(u64, u64)> {
            let j = taken[i] + 1;
            (j <= self.rows).then(|| (self.sample[i] + j, j))
        };
        let cmp = |a: (u64, u64), b: (u64, u64)| -> Ordering {
            (a.0 as u128 * b.1 as u128).cmp(&(b.0 as u128 * a.1 as u128))
        };
        let best = |taken: &[u64]| -> Option<(usize, (u64, u64))> {
            let mut best: Option<(usize, (u64, u64))> = None;
            for i in 0..m {
                if let Some(f) = next(taken, i) {
                    if best.is_none_or(|(_, b)| cmp(f, b) == Ordering::Greater) {
                        best = Some((i, f));
                    }
                }
            }
            best
        };
        let mut last: Option<(usize, (u64, u64))> = None;
        for _ in 0..self.rows {
            let (i, f) = best(&taken).expect("a column with n_i > 0 always has a factor left");
            taken[i] += 1;
            last = Some((i, f));
        }
        let tie = match (last, best(&taken)) {
            (Some((li, lf)), Some(_)) => (0..m).any(|i| {
                i != li && next(&taken, i).is_some_and(|f| cmp(f, lf) == Ordering::Equal)
            }),
            _ => false,
        };
        (taken, tie)
    }
}

/// Probability that a uniform draw of `n` from population `P` yields `S`.
pub fn sample_probability(population: &[u64], sample: &[u64]) -> f64 {
    log_sample_probability(population, sample).exp()
}

pub fn log_sample_probability(population: &[u64], sample: &[u64]) -> f64 {
    if population.len() != sample.len() || population.iter().zip(sample).any(|(p, s)| s > p) {
        return f64::NEG_INFINITY;
    }
    let big_n: u64 = population.iter().sum();
    let n: u64 = sample.iter().sum();
    population
        .iter()
        .zip(sample)
        .map(|(&p, &s)| ln_binomial(p, s))
        .sum::<f64>()
        - ln_binomial(big_n, n)
}

/// Exact hypergeometric probability as a rational.
pub fn sample_probability_exact(population: &[u64], sample: &[u64]) -> BigRational {
    if population.len() != sample.len() || population.iter().zip(sample).any(|(p, s)| s > p) {
        return BigRational::zero();
    }
    let big_n: u64 = population.iter().sum();
    let n: u64 = sample.iter().sum();
    let num: BigUint = population
        .iter()
        .zip(sample)
        .map(|(&p, &s)| binomial_big(p, s))
        .product();
    BigRational::new(num.into(), binomial_big(big_n, n).into())
}

/// Every admissible population for a sample, in lexicographic order of
/// `(N_1, N_2, ..)`. IDs are 1-based positions in that order.
#[derive(Debug, Clone)]
pub struct AdmissibleEnsemble {
    sample: Vec<u64>,
    population: u64,
    members: Vec<Vec<u64>>,
    log_weights: Vec<f64>,
    weights: Vec<f64>,
}

/// `C(N - n + m - 1, m - 1)`.
pub fn ensemble_size(sample: &[u64], population: u64) -> Result<u128> {
    let n = check_inputs(sample, population)?;
    let m = sample.len() as u64;
    Ok(binomial_u128(population - n + m - 1, m - 1))
}

pub fn admissible_populations(sample: &[u64], population: u64) -> Result<AdmissibleEnsemble> {
    AdmissibleEnsemble::with_cap(sample, population, DEFAULT_ENSEMBLE_CAP)
}

impl AdmissibleEnsemble {
    pub fn with_cap(sample: &[u64], population: u64, cap: u128) -> Result<Self> {
        let n = check_inputs(sample, population)?;
        let size = ensemble_size(sample, population)?;
        if size > cap {
            return Err(Error::CapExceeded {
                what: "admissible population ensemble",
                size,
                cap,
                hint: "reduce N - n or the number of levels",
            });
        }
        let extra = population - n;
        let m = sample.len();
        let mut members = Vec::with_capacity(size as usize);
        let mut current = Vec::with_capacity(m);
        fn rec(sample: &[u64], left: u64, current: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
            let i = current.len();
            if i + 1 == sample.len() {
                current.push(sample[i] + left);
                out.push(current.clone());
                current.pop();
                return;
            }
            for x in 0..=left {
                current.push(sample[i] + x);
                rec(sample, left - x, current, out);
                current.pop();
            }
        }
        rec(sample, extra, &mut current, &mut members);

        let log_weights: Vec<f64> = members
            .iter()
            .map(|p| log_sample_probability(p, sample))
            .collect();
        let weights = if population <= EXACT_WEIGHT_LIMIT {
            exact_normalized(&members, sample)
        } else {
            let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let raw: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|w| w / total).collect()
        };
        Ok(AdmissibleEnsemble {
            sample: sample.to_vec(),
            population,
            members,
            log_weights,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Vec<u64>] {
        &self.members
    }

    /// Population with the given 1-based ID.
    pub fn get(&self, id: usize) -> Option<&[u64]> {
        id.checked_sub(1).and_then(|i| self.members.get(i)).map(Vec::as_slice)
    }

    pub fn id_of(&self, population: &[u64]) -> Option<usize> {
        self.members.iter().position(|p| p == population).map(|i| i + 1)
    }

    /// `p_k / p`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `ln p_k`.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn sample(&self) -> &[u64] {
        &self.sample
    }

    pub fn population(&self) -> u64 {
        self.population
    }

    /// Per level, the expected absolute deviation `sum_k w_k |N_ik - v|` for
    /// every value `v` that level can take in an admissible estimate. Since
    /// the mean absolute error is a sum over levels, WMAE separates into
    /// these marginal costs.
    fn marginal_costs(&self) -> Vec<Vec<f64>> {
        let extra = (self.population - self.sample.iter().sum::<u64>()) as usize;
        let m = self.sample.len();
        let mut marginals = vec![vec![0.0; extra + 1]; m];
        for (p, w) in self.members.iter().zip(&self.weights) {
            for i in 0..m {
                marginals[i][(p[i] - self.sample[i]) as usize] += w;
            }
        }
        marginals
            .iter()
            .map(|dist| {
                (0..=extra)
                    .map(|v| {
                        dist.iter()
                            .enumerate()
                            .map(|(u, w)| w * (u as f64 - v as f64).abs())
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }
}

fn exact_normalized(members: &[Vec<u64>], sample: &[u64]) -> Vec<f64> {
    // C(N, n) is common to every member and cancels.
    let raw: Vec<BigUint> = members
        .iter()
        .map(|p| p.iter().zip(sample).map(|(&a, &b)| binomial_big(a, b)).product())
        .collect();
    let total: BigUint = raw.iter().sum();
    let total = num_bigint::BigInt::from(total);
    raw.into_iter()
        .map(|r| {
            BigRational::new(r.into(), total.clone())
                .to_f64()
                .unwrap_or(0.0)
        })
        .collect()
}

/// `E(P, P̂) = (1/m) sum |N_i - N̂_i|`.
pub fn mean_absolute_error(actual: &[u64], estimate: &[u64]) -> f64 {
    let total: u64 = actual.iter().zip(estimate).map(|(a, b)| a.abs_diff(*b)).sum();
    total as f64 / actual.len() as f64
}

/// `(2/m)(N - n)`: no admissible estimate can be further off than this.
pub fn error_bound(sample: &[u64], population: u64) -> f64 {
    let n: u64 = sample.iter().sum();
    2.0 * (population - n) as f64 / sample.len() as f64
}

/// Weighted mean absolute error of `estimate` over the ensemble.
pub fn wmae(estimate: &[u64], ensemble: &AdmissibleEnsemble) -> f64 {
    ensemble
        .members
        .iter()
        .zip(&ensemble.weights)
        .map(|(p, w)| w * mean_absolute_error(p, estimate))
        .sum()
}

/// Greedy factor-table MLE. Levels with `n_i = 0` always stay at 0.
/// `wmae` is filled in when the ensemble fits under the default cap and is
/// `NaN` otherwise.
pub fn mle_estimate(sample: &[u64], population: u64) -> Result<PopulationEstimate> {
    let table = FactorTable::new(sample, population)?;
    let (taken, tie) = table.select_largest();
    let counts: Vec<u64> = sample.iter().zip(&taken).map(|(s, x)| s + x).collect();
    let wmae_value = match admissible_populations(sample, population) {
        Ok(ens) => wmae(&counts, &ens),
        Err(Error::CapExceeded { .. }) => f64::NAN,
        Err(e) => return Err(e),
    };
    Ok(PopulationEstimate {
        counts,
        population,
        method: EstimationMethod::Mle,
        wmae: wmae_value,
        non_unique: tie,
    })
}

/// Full WMAE search: every admissible estimate scored against the ensemble.
#[derive(Debug, Clone, Serialize)]
pub struct WmaeSearch {
    pub best: PopulationEstimate,
    pub best_id: usize,
    /// `(id, wmae)` for every admissible estimate, in ID order.
    pub scores: Vec<(usize, f64)>,
}

pub fn minimize_wmae(sample: &[u64], population: u64) -> Result<PopulationEstimate> {
    Ok(wmae_search(&admissible_populations(sample, population)?).best)
}

/// Scores every member of the ensemble as an estimate. Ties within `1e-12`
/// relative go to the lowest ID and set `non_unique`.
pub fn wmae_search(ensemble: &AdmissibleEnsemble) -> WmaeSearch {
    let costs = ensemble.marginal_costs();
    let m = ensemble.sample.len() as f64;
    let scores: Vec<(usize, f64)> = ensemble
        .members
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let total: f64 = p
                .iter()
                .zip(&ensemble.sample)
                .zip(&costs)
                .map(|((&v, &s), c)| c[(v - s) as usize])
                .sum();
            (k + 1, total / m)
        })
        .collect();
    let min = scores.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * min.abs().max(1.0);
    let mut tied = scores.iter().filter(|s| s.1 <= min + tol);
    let (best_id, best_value) = *tied.next().expect("ensemble is never empty");
    let non_unique = tied.next().is_some();
    WmaeSearch {
        best: PopulationEstimate {
            counts: ensemble.members[best_id - 1].clone(),
            population: ensemble.population,
            method: EstimationMethod::WmaeMin,
            wmae: best_value,
            non_unique,
        },
        best_id,
        scores,
    }
}

/// Estimated population share of one level.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LevelProportion {
    pub level: usize,
    pub estimated_count: u64,
    /// `N̂_i / N` to two decimals.
    pub proportion: f64,
    /// `Ē / N` to two decimals.
    pub error: f64,
}

/// Rounds half away from zero to two decimals.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn round2_ratio(num: u64, den: u64) -> f64 {
    // exact half-away-from-zero on 100 * num / den
    let scaled = 100 * num as u128;
    let den = den as u128;
    let q = (2 * scaled + den) / (2 * den);
    q as f64 / 100.0
}

/// WMAE-minimizing population shares with a `± Ē/N` error band.
pub fn population_proportions(sample: &[u64], population: u64) -> Result<Vec<LevelProportion>> {
    if population == 0 {
        return Err(Error::InvalidInput("population size must be positive".into()));
    }
    let best = minimize_wmae(sample, population)?;
    Ok(best
        .counts
        .iter()
        .enumerate()
        .map(|(level, &c)| LevelProportion {
            level,
            estimated_count: c,
            proportion: round2_ratio(c, population),
            error: round2(best.wmae / population as f64),
        })
        .collect())
}
