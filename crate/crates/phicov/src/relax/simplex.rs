//! Self-contained two-phase primal simplex on a dense tableau.
//!
//! Sized for this crate's models (at most a few thousand rows). Pivoting
//! uses Dantzig's rule with a fixed tie order, and switches to Bland's rule
//! if the objective stalls, which guarantees termination under degeneracy.

use super::{FEASIBILITY_TOL, OPTIMALITY_TOL, PIVOT_TOL};
use crate::{Error, Result};

/// How many consecutive non-improving pivots trigger Bland's rule.
const STALL_LIMIT: usize = 64;

struct Tableau {
    /// `nrows x (ncols + 1)` coefficient matrix; the extra column is the rhs.
    rows: Vec<Vec<f64>>,
    /// Reduced-cost row (minimization); `cost[ncols]` holds `-z`.
    cost: Vec<f64>,
    /// Basic variable of each row.
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.ncols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        let prow: Vec<f64> = self.rows[r].iter().map(|v| v / p).collect();
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][c];
            if f != 0.0 {
                for (t, pv) in self.rows[i].iter_mut().zip(&prow) {
                    *t -= f * pv;
                }
                self.rows[i][c] = 0.0;
            }
        }
        let f = self.cost[c];
        if f != 0.0 {
            for (t, pv) in self.cost.iter_mut().zip(&prow) {
                *t -= f * pv;
            }
            self.cost[c] = 0.0;
        }
        self.rows[r] = prow;
        self.rows[r][c] = 1.0;
        self.basis[r] = c;
    }

    /// Minimizes the current cost row over columns `< allowed_cols`.
    fn optimize(&mut self, allowed_cols: usize) -> Result<()> {
        let mut bland = false;
        let mut stall = 0usize;
        let mut last = f64::INFINITY;
        let max_iters = 50_000 + 200 * (self.rows.len() + self.ncols);
        for _ in 0..max_iters {
            let mut entering = None;
            if bland {
                entering = (0..allowed_cols).find(|&j| self.cost[j] < -OPTIMALITY_TOL);
            } else {
                let mut best = -OPTIMALITY_TOL;
                for j in 0..allowed_cols {
                    if self.cost[j] < best {
                        best = self.cost[j];
                        entering = Some(j);
                    }
                }
            }
            let Some(c) = entering else {
                return Ok(());
            };

            let mut leaving: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.rows.len() {
                let a = self.rows[i][c];
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(i) / a;
                let tie = (ratio - best_ratio).abs() <= 1e-12;
                let wins = match leaving {
                    None => true,
                    Some(l) if tie => {
                        // under Bland, break ties on the basic variable index
                        bland && self.basis[i] < self.basis[l]
                    }
                    Some(_) => ratio < best_ratio,
                };
                if wins {
                    best_ratio = ratio;
                    leaving = Some(i);
                }
            }
            let Some(r) = leaving else {
                return Err(Error::Invariant(
                    "simplex found an unbounded direction in a box-bounded model".into(),
                ));
            };
            self.pivot(r, c);

            let z = -self.cost[self.ncols];
            if (z - last).abs() <= 1e-13 * (1.0 + z.abs()) {
                stall += 1;
                if stall > STALL_LIMIT {
                    bland = true;
                }
            } else {
                stall = 0;
            }
            last = z;
        }
        Err(Error::Invariant("simplex exceeded its iteration budget".into()))
    }
}

/// Maximizes `objective . v` over `v >= 0`, `leq` rows (`coeffs . v <= b`)
/// and `eq` rows (`coeffs . v = b`). Returns the structural variable values
/// and the objective. Deterministic for a fixed input.
pub(super) fn maximize(
    objective: &[f64],
    leq: &[(Vec<(usize, f64)>, f64)],
    eq: &[(Vec<(usize, f64)>, f64)],
    num_vars: usize,
) -> Result<(Vec<f64>, f64)> {
    let slack_start = num_vars;
    let art_start = slack_start + leq.len();
    // one artificial per row keeps the construction uniform; rows that get a
    // slack basis never price theirs in
    let ncols = art_start + leq.len() + eq.len();

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(leq.len() + eq.len());
    let mut basis = Vec::with_capacity(leq.len() + eq.len());
    let mut artificial_used = vec![false; ncols];

    for (r, (coeffs, b)) in leq.iter().enumerate() {
        let mut row = vec![0.0; ncols + 1];
        for &(j, v) in coeffs {
            row[j] += v;
        }
        row[slack_start + r] = 1.0;
        row[ncols] = *b;
        if *b < 0.0 {
            for v in &mut row {
                *v = -*v;
            }
            let art = art_start + r;
            row[art] = 1.0;
            artificial_used[art] = true;
            basis.push(art);
        } else {
            basis.push(slack_start + r);
        }
        rows.push(row);
    }
    for (r, (coeffs, b)) in eq.iter().enumerate() {
        let mut row = vec![0.0; ncols + 1];
        for &(j, v) in coeffs {
            row[j] += v;
        }
        row[ncols] = *b;
        if *b < 0.0 {
            for v in &mut row {
                *v = -*v;
            }
        }
        let art = art_start + leq.len() + r;
        row[art] = 1.0;
        artificial_used[art] = true;
        basis.push(art);
        rows.push(row);
    }

    let mut t = Tableau { rows, cost: vec![0.0; ncols + 1], basis, ncols };

    // phase 1: minimize the sum of artificials
    for j in art_start..ncols {
        if artificial_used[j] {
            t.cost[j] = 1.0;
        }
    }
    for i in 0..t.rows.len() {
        if t.basis[i] >= art_start {
            let row = t.rows[i].clone();
            for (cv, rv) in t.cost.iter_mut().zip(&row) {
                *cv -= rv;
            }
        }
    }
    t.optimize(ncols)?;
    let infeasibility = -t.cost[t.ncols];
    let scale: f64 = 1.0
        + leq.iter().chain(eq).map(|(_, b)| b.abs()).fold(0.0, f64::max);
    if infeasibility > FEASIBILITY_TOL * scale {
        return Err(Error::Infeasible(format!(
            "no feasible point; residual {infeasibility:.3e}"
        )));
    }

    // drive leftover artificials out of the basis; rows that cannot pivot
    // are redundant and dropped
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= art_start {
            match (0..art_start).find(|&j| t.rows[i][j].abs() > PIVOT_TOL) {
                Some(j) => t.pivot(i, j),
                None => {
                    t.rows.remove(i);
                    t.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    // strip artificial columns (they form the last block before the rhs)
    for row in &mut t.rows {
        let rhs = row[t.ncols];
        row.truncate(art_start);
        row.push(rhs);
    }
    t.ncols = art_start;

    // phase 2: minimize the negated objective
    let static_cost: Vec<f64> = (0..t.ncols)
        .map(|j| if j < num_vars { -objective[j] } else { 0.0 })
        .collect();
    t.cost = static_cost.clone();
    t.cost.push(0.0);
    for i in 0..t.rows.len() {
        let cb = static_cost[t.basis[i]];
        if cb != 0.0 {
            let row = t.rows[i].clone();
            for (cv, rv) in t.cost.iter_mut().zip(&row) {
                *cv -= cb * rv;
            }
        }
    }
    t.optimize(t.ncols)?;

    let mut values = vec![0.0; num_vars];
    for (i, &b) in t.basis.iter().enumerate() {
        if b < num_vars {
            values[b] = t.rhs(i);
        }
    }
    let objective_value = objective.iter().zip(&values).map(|(o, v)| o * v).sum();
    Ok((values, objective_value))
}
