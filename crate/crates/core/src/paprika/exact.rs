//! Exact feasibility: does some real-valued utility assignment exist that
//! orders every attribute's levels as the ranking says and satisfies every
//! choice constraint strictly?
//!
//! Within attribute `a` the ranking fixes `u(order[0]) < u(order[1]) < ...`.
//! Writing the utilities as cumulative gaps `g_q >= 1` (homogeneous strict
//! inequalities may be rescaled to margin 1) turns each constraint into
//! `sum_q c_q g_q >= 1`, and substituting `g = 1 + h` leaves a phase-one LP
//! in `h >= 0`.

use super::{Constraint, Ranking};

const EPS: f64 = 1e-9;

pub(super) fn is_feasible(ranking: &Ranking, constraints: &[Constraint]) -> bool {
    if constraints.is_empty() {
        return true;
    }
    let offsets: Vec<usize> = ranking
        .orders()
        .iter()
        .scan(0, |acc, order| {
            let start = *acc;
            *acc += order.len() - 1;
            Some(start)
        })
        .collect();
    let nvars: usize = ranking.orders().iter().map(|o| o.len() - 1).sum();

    let rows: Vec<(Vec<f64>, f64)> = constraints
        .iter()
        .map(|c| {
            let mut coef = vec![0.0; nvars];
            for term in c.terms() {
                let pw = ranking.position(term.attribute, term.winner_level);
                let pl = ranking.position(term.attribute, term.loser_level);
                let base = offsets[term.attribute];
                for q in 0..pw {
                    coef[base + q] += 1.0;
                }
                for q in 0..pl {
                    coef[base + q] -= 1.0;
                }
            }
            let rhs = 1.0 - coef.iter().sum::<f64>();
            (coef, rhs)
        })
        .collect();
    phase_one(&rows, nvars)
}

/// True iff some `h >= 0` satisfies `row . h >= rhs` for every row.
fn phase_one(rows: &[(Vec<f64>, f64)], nvars: usize) -> bool {
    let m = rows.len();
    let art: Vec<usize> = (0..m).filter(|&i| rows[i].1 > EPS).collect();
    let ncols = nvars + m + art.len();
    // Tableau rows: coefficients followed by the right-hand side.
    let mut tab = vec![vec![0.0; ncols + 1]; m];
    let mut basis = vec![0usize; m];
    let mut art_col = nvars + m;
    for (i, (coef, rhs)) in rows.iter().enumerate() {
        let row = &mut tab[i];
        if *rhs > EPS {
            row[..nvars].copy_from_slice(coef);
            row[nvars + i] = -1.0;
            row[art_col] = 1.0;
            row[ncols] = *rhs;
            basis[i] = art_col;
            art_col += 1;
        } else {
            for (dst, c) in row[..nvars].iter_mut().zip(coef) {
                *dst = -c;
            }
            row[nvars + i] = 1.0;
            row[ncols] = -rhs;
            basis[i] = nvars + i;
        }
    }
    if art.is_empty() {
        return true;
    }
    // Reduced costs for minimizing the sum of artificials.
    let mut cost = vec![0.0; ncols + 1];
    for &i in &art {
        for (c, v) in cost.iter_mut().zip(&tab[i]) {
            *c -= v;
        }
    }
    for col in (nvars + m)..ncols {
        cost[col] += 1.0;
    }

    for _ in 0..10_000 {
        // Bland's rule: lowest-index improving column.
        let Some(enter) = (0..ncols).find(|&j| cost[j] < -EPS) else {
            break;
        };
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            let a = tab[i][enter];
            if a > EPS {
                let ratio = tab[i][ncols] / a;
                let better = ratio < best - EPS
                    || (ratio <= best + EPS && leave.is_some_and(|l| basis[i] < basis[l]));
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(r) = leave else {
            // Unbounded direction cannot occur in a phase-one problem bounded
            // below by zero; treat it as "no further progress".
            break;
        };
        let pivot = tab[r][enter];
        for v in tab[r].iter_mut() {
            *v /= pivot;
        }
        let pivot_row = tab[r].clone();
        for (i, row) in tab.iter_mut().enumerate() {
            if i != r {
                let f = row[enter];
                if f.abs() > 0.0 {
                    for (v, p) in row.iter_mut().zip(&pivot_row) {
                        *v -= f * p;
                    }
                }
            }
        }
        let f = cost[enter];
        for (v, p) in cost.iter_mut().zip(&pivot_row) {
            *v -= f * p;
        }
        basis[r] = enter;
    }
    // -cost[rhs] is the current sum of artificials.
    -cost[ncols] <= 1e-7
}
