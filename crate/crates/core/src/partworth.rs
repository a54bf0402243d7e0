//! Pairwise-logit part-worth baseline.
//!
//! Utilities are effects-coded: each attribute with `m` levels has `m - 1`
//! free parameters and the last level carries minus their sum, so utilities
//! sum to zero within every attribute. The probability that the observed
//! winner beats the loser is `sigmoid(U(winner) - U(loser))`. The fit
//! minimizes the negative log-likelihood plus `ridge / 2` times the sum of
//! squared level utilities, using damped Newton steps.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ChoiceTask, Profile};

pub const DEFAULT_RIDGE: f64 = 0.1;
pub const MAX_ITERATIONS: usize = 500;
pub const GRADIENT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartworthVector {
    pub utilities: Vec<Vec<f64>>,
}

impl PartworthVector {
    pub fn zeros(level_counts: &[usize]) -> Self {
        PartworthVector {
            utilities: level_counts.iter().map(|&m| vec![0.0; m]).collect(),
        }
    }

    pub fn total(&self, profile: &Profile) -> f64 {
        profile
            .levels()
            .iter()
            .enumerate()
            .map(|(a, &l)| self.utilities[a][l as usize])
            .sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        PartworthVector {
            utilities: self
                .utilities
                .iter()
                .map(|u| u.iter().map(|v| v * factor).collect())
                .collect(),
        }
    }

    fn from_params(level_counts: &[usize], beta: &[f64]) -> Self {
        let mut offset = 0;
        let utilities = level_counts
            .iter()
            .map(|&m| {
                let free = &beta[offset..offset + m - 1];
                offset += m - 1;
                let mut u = free.to_vec();
                u.push(-free.iter().sum::<f64>());
                u
            })
            .collect();
        PartworthVector { utilities }
    }
}

/// Penalized negative log-likelihood in the reduced (effects-coded)
/// coordinates.
#[derive(Debug, Clone)]
pub struct LogitObjective {
    level_counts: Vec<usize>,
    /// Winner-minus-loser effects-coded difference per task.
    contrasts: Vec<DVector<f64>>,
    ridge: f64,
    dim: usize,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(-z))` without overflow.
fn softplus_neg(z: f64) -> f64 {
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

impl LogitObjective {
    pub fn new(level_counts: &[usize], tasks: &[ChoiceTask], ridge: f64) -> Result<Self> {
        if !(ridge >= 0.0) || !ridge.is_finite() {
            return Err(Error::InvalidInput(format!("ridge must be a non-negative number, got {ridge}")));
        }
        let dim: usize = level_counts.iter().map(|m| m - 1).sum();
        let mut contrasts = Vec::with_capacity(tasks.len());
        for (i, task) in tasks.iter().enumerate() {
            let (w, l) = task.outcome().ok_or_else(|| {
                Error::InvalidInput(format!("task {} has no recorded winner", i + 1))
            })?;
            if w.len() != level_counts.len() || l.len() != level_counts.len() {
                return Err(Error::InvalidInput(format!(
                    "task {} profile width does not match the design",
                    i + 1
                )));
            }
            let mut x = DVector::zeros(dim);
            add_coding(&mut x, level_counts, w, 1.0);
            add_coding(&mut x, level_counts, l, -1.0);
            contrasts.push(x);
        }
        Ok(LogitObjective {
            level_counts: level_counts.to_vec(),
            contrasts,
            ridge,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `ridge * (I + J)` per attribute block: the penalty `sum u^2` written in
    /// reduced coordinates is `beta^T (I + J) beta`.
    fn penalty_matrix(&self) -> DMatrix<f64> {
        let mut q = DMatrix::zeros(self.dim, self.dim);
        let mut offset = 0;
        for &m in &self.level_counts {
            let k = m - 1;
            for i in 0..k {
                for j in 0..k {
                    q[(offset + i, offset + j)] = if i == j { 2.0 } else { 1.0 };
                }
            }
            offset += k;
        }
        q
    }

    pub fn value(&self, beta: &[f64]) -> f64 {
        let b = DVector::from_column_slice(beta);
        let nll: f64 = self.contrasts.iter().map(|x| softplus_neg(x.dot(&b))).sum();
        let q = self.penalty_matrix();
        nll + 0.5 * self.ridge * b.dot(&(&q * &b))
    }

    pub fn gradient(&self, beta: &[f64]) -> Vec<f64> {
        let b = DVector::from_column_slice(beta);
        self.gradient_vec(&b, &self.penalty_matrix()).as_slice().to_vec()
    }

    fn gradient_vec(&self, b: &DVector<f64>, q: &DMatrix<f64>) -> DVector<f64> {
        let mut g = self.ridge * (q * b);
        for x in &self.contrasts {
            g -= x * (1.0 - sigmoid(x.dot(b)));
        }
        g
    }

    fn hessian(&self, b: &DVector<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
        let mut h = self.ridge * q;
        for x in &self.contrasts {
            let p = sigmoid(x.dot(b));
            h += (p * (1.0 - p)) * (x * x.transpose());
        }
        h
    }
}

fn add_coding(x: &mut DVector<f64>, level_counts: &[usize], profile: &Profile, sign: f64) {
    let mut offset = 0;
    for (a, &m) in level_counts.iter().enumerate() {
        let level = profile.level(a);
        if level + 1 < m {
            x[offset + level] += sign;
        } else {
            for j in 0..m - 1 {
                x[offset + j] -= sign;
            }
        }
        offset += m - 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub ridge: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            ridge: DEFAULT_RIDGE,
            max_iterations: MAX_ITERATIONS,
            tolerance: GRADIENT_TOLERANCE,
        }
    }
}

/// Fits part-worths to one respondent's answered tasks.
pub fn estimate_partworths(level_counts: &[usize], tasks: &[ChoiceTask], ridge: f64) -> Result<PartworthVector> {
    estimate_partworths_with(level_counts, tasks, &FitOptions { ridge, ..FitOptions::default() })
}

pub fn estimate_partworths_with(
    level_counts: &[usize],
    tasks: &[ChoiceTask],
    options: &FitOptions,
) -> Result<PartworthVector> {
    let ridge = options.ridge;
    if tasks.is_empty() {
        return Err(Error::InvalidInput("part-worth estimation needs at least one answered task".into()));
    }
    let objective = LogitObjective::new(level_counts, tasks, ridge)?;
    let q = objective.penalty_matrix();
    let mut beta = DVector::zeros(objective.dim);
    let mut value = objective.value(beta.as_slice());
    let mut grad_norm = f64::INFINITY;
    for _ in 0..options.max_iterations {
        let g = objective.gradient_vec(&beta, &q);
        grad_norm = g.norm();
        if grad_norm < options.tolerance {
            return Ok(PartworthVector::from_params(level_counts, beta.as_slice()));
        }
        let mut h = objective.hessian(&beta, &q);
        // Levenberg-style damping keeps the step defined when the Hessian is
        // (near-)singular, i.e. ridge = 0 with separable data.
        let step = loop {
            if let Some(chol) = h.clone().cholesky() {
                break -chol.solve(&g);
            }
            for i in 0..objective.dim {
                h[(i, i)] += 1e-8_f64.max(h[(i, i)].abs() * 1e-6);
            }
        };
        if grad_norm < 1e-4 {
            // inside the quadratic-convergence region the objective change
            // drops below f64 resolution, so line search would stall
            beta += step;
            value = objective.value(beta.as_slice());
            continue;
        }
        let slope = g.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let candidate = &beta + t * &step;
            let v = objective.value(candidate.as_slice());
            if v <= value + 1e-4 * t * slope {
                beta = candidate;
                value = v;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(Error::NonConvergence {
        iterations: options.max_iterations,
        gradient_norm: grad_norm,
        last_iterate: beta.as_slice().to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MiPick {
    pub level: usize,
    /// Another level has exactly the same utility; `level` is the lowest index.
    pub tied: bool,
}

/// Relative gap below which two utilities of one attribute count as tied.
/// Fitted values that are equal in exact arithmetic differ by rounding only.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Highest-utility level per attribute, lowest index on ties.
pub fn mi_from_partworths(pw: &PartworthVector) -> Vec<MiPick> {
    pw.utilities
        .iter()
        .map(|u| {
            let best = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let near = |v: f64| best - v <= TIE_TOLERANCE * scale;
            let level = u.iter().position(|&v| near(v)).unwrap_or(0);
            let tied = u.iter().filter(|&&v| near(v)).count() > 1;
            MiPick { level, tied }
        })
        .collect()
}

/// Share of tasks where the higher-utility profile is the recorded winner;
/// equal totals count one half.
pub fn hit_rate(pw: &PartworthVector, tasks: &[ChoiceTask]) -> f64 {
    let answered: Vec<_> = tasks.iter().filter_map(ChoiceTask::outcome).collect();
    if answered.is_empty() {
        return 0.0;
    }
    let score: f64 = answered
        .iter()
        .map(|(w, l)| {
            let d = pw.total(w) - pw.total(l);
            if d.abs() <= 1e-12 {
                0.5
            } else if d > 0.0 {
                1.0
            } else {
                0.0
            }
        })
        .sum();
    score / answered.len() as f64
}
