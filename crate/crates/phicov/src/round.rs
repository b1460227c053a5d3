//! Exact multilinear extension of the coverage objective, pipage rounding,
//! and the end-to-end solve with its certified approximation bound.
//!
//! For a fractional `x`, each element's coverage count follows the Poisson
//! binomial law of the `x_i` over sets containing it, so the expected
//! objective `F(x)` is computable exactly from those distributions. Pipage
//! repeatedly moves a pair of fractional coordinates of one part to an
//! extreme point without decreasing `F`, ending at an integral selection.

use num_complex::Complex64;

use crate::counting::CountingFunction;
use crate::instance::{Constraint, CoverageInstance, SelectionValue};
use crate::poisson::ratio_at;
use crate::relax::{build_lp, solve_lp, FractionalSolution, LpModel};
use crate::{Error, Result};

/// Negative probability mass tolerated (and clamped) in a distribution.
const NEG_MASS_TOL: f64 = 1e-12;
/// Total mass must match 1 to this accuracy.
const MASS_TOL: f64 = 1e-10;
/// Coordinates this close to 0 or 1 count as integral during rounding.
const SNAP_TOL: f64 = 1e-9;
/// Slack allowed in the certified-bound and monotonicity assertions.
const CERT_TOL: f64 = 1e-6;
/// Precision of the per-count ratio evaluations behind the certificate.
const CERT_EPS: f64 = 1e-9;

/// Distribution of a sum of independent Bernoulli draws: `probs[k]` is the
/// probability the sum equals `k`.
#[derive(Debug, Clone)]
pub struct PoissonBinomial {
    pub probs: Vec<f64>,
}

impl PoissonBinomial {
    fn checked(mut probs: Vec<f64>, source: &str) -> Result<Self> {
        let mut total = 0.0;
        for p in &mut probs {
            if *p < -NEG_MASS_TOL {
                return Err(Error::Invariant(format!(
                    "{source} produced probability {p}"
                )));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
            total += *p;
        }
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Invariant(format!(
                "{source} mass {total} is not 1"
            )));
        }
        Ok(PoissonBinomial { probs })
    }

    /// Expectation of `phi` under this distribution.
    pub fn expectation(&self, phi: &CountingFunction) -> f64 {
        let terms: Vec<f64> = self
            .probs
            .iter()
            .enumerate()
            .map(|(k, &p)| p * phi.at_int(k))
            .collect();
        pairwise_sum(&terms)
    }
}

fn check_unit(probs: &[f64]) -> Result<()> {
    for &p in probs {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!(
                "probability {p} outside [0, 1]"
            )));
        }
    }
    Ok(())
}

/// Exact distribution by iterated convolution: folding in a Bernoulli(p)
/// maps `new[k] = old[k]*(1-p) + old[k-1]*p`. This is the production path.
pub fn pb_distribution(probs: &[f64]) -> Result<PoissonBinomial> {
    check_unit(probs)?;
    let mut dist = vec![0.0; probs.len() + 1];
    dist[0] = 1.0;
    for (j, &p) in probs.iter().enumerate() {
        for k in (0..=j + 1).rev() {
            let stay = dist[k] * (1.0 - p);
            let arrive = if k > 0 { dist[k - 1] * p } else { 0.0 };
            dist[k] = stay + arrive;
        }
    }
    PoissonBinomial::checked(dist, "convolution")
}

/// The same distribution through the roots-of-unity inversion
/// `P(k) = (d+1)^-1 * sum_l w^(-lk) * prod_j (1 + (w^l - 1) p_j)` with
/// `w = exp(2*pi*i/(d+1))`. Kept as an independent cross-check of
/// `pb_distribution`; the two must agree to 1e-8.
pub fn pb_distribution_dft(probs: &[f64]) -> Result<PoissonBinomial> {
    check_unit(probs)?;
    let d = probs.len();
    let size = d + 1;
    let omega = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / size as f64);
    // prod[l] = product over j of (1 + (w^l - 1) p_j)
    let mut prod = vec![Complex64::new(1.0, 0.0); size];
    for (l, value) in prod.iter_mut().enumerate() {
        let wl = omega.powu(l as u32);
        for &p in probs {
            *value *= Complex64::new(1.0, 0.0) + (wl - 1.0) * p;
        }
    }
    let mut dist = vec![0.0; size];
    for (k, slot) in dist.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (l, value) in prod.iter().enumerate() {
            let power = (l * k) % size;
            acc += omega.powu(power as u32).conj() * value;
        }
        *slot = acc.re / size as f64;
    }
    PoissonBinomial::checked(dist, "root-of-unity inversion")
}

/// Fixed-shape pairwise summation; keeps results reproducible independent
/// of any future parallel split over elements.
fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => {
            let (a, b) = v.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// The multilinear extension `F(x)`: expected objective when set `i` is
/// drawn independently with probability `x_i`.
pub fn multilinear_value(
    inst: &CoverageInstance,
    phi: &CountingFunction,
    x: &[f64],
) -> Result<f64> {
    if x.len() != inst.m() {
        return Err(Error::Domain(format!(
            "x has {} coordinates, instance has {} sets",
            x.len(),
            inst.m()
        )));
    }
    check_unit(x)?;
    let terms: Vec<f64> = (0..inst.n())
        .map(|a| {
            let incident: Vec<f64> =
                inst.sets_containing(a).iter().map(|&i| x[i]).collect();
            let dist = pb_distribution(&incident)?;
            Ok(inst.weights()[a] * dist.expectation(phi))
        })
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(&terms))
}

/// Result of rounding: the integral selection plus the `F` value after each
/// step (index 0 is `F` at the input point).
#[derive(Debug, Clone)]
pub struct PipageOutcome {
    pub selection: Vec<usize>,
    pub f_trace: Vec<f64>,
}

/// Rounds a fractional base-polytope point to an integral base without
/// decreasing the multilinear extension.
///
/// Each step takes the lexicographically smallest pair of fractional
/// coordinates sharing a part, moves along `e_i - e_j` to the two extreme
/// feasible points, and keeps the endpoint with the larger `F` (ties keep
/// the one raising `x_i`). `F` restricted to that segment is convex, so one
/// endpoint is always at least the current value; this is asserted at run
/// time rather than trusted.
pub fn pipage_round(
    inst: &CoverageInstance,
    phi: &CountingFunction,
    x: &[f64],
    constraint: &Constraint,
) -> Result<PipageOutcome> {
    let m = inst.m();
    constraint.validate(m)?;
    if x.len() != m {
        return Err(Error::Domain(format!(
            "x has {} coordinates, instance has {m} sets",
            x.len()
        )));
    }
    let (parts, capacities) = constraint.normalized_parts(m);

    let mut x = x.to_vec();
    for xi in &mut x {
        if !(-1e-8..=1.0 + 1e-8).contains(xi) {
            return Err(Error::Infeasible(format!(
                "coordinate {xi} outside the unit box"
            )));
        }
        if *xi < SNAP_TOL {
            *xi = 0.0;
        } else if *xi > 1.0 - SNAP_TOL {
            *xi = 1.0;
        }
    }
    for (part, &d) in parts.iter().zip(&capacities) {
        let total: f64 = part.iter().map(|&i| x[i]).sum();
        if (total - d as f64).abs() > 1e-8 {
            return Err(Error::Infeasible(format!(
                "part sum {total} differs from required {d}"
            )));
        }
    }

    let mut trace = vec![multilinear_value(inst, phi, &x)?];
    // each step zeroes in at least one coordinate, so m steps suffice
    for _ in 0..m {
        let Some((i, j)) = first_fractional_pair(&x, &parts) else {
            break;
        };
        let f_here = *trace.last().expect("trace is never empty");
        let scale = 1.0 + f_here.abs();

        let mut up = x.clone(); // raise x[i] as far as feasible
        if 1.0 - up[i] <= up[j] {
            up[j] -= 1.0 - up[i];
            up[i] = 1.0;
        } else {
            up[i] += up[j];
            up[j] = 0.0;
        }
        let mut down = x.clone(); // lower x[i] as far as feasible
        if down[i] <= 1.0 - down[j] {
            down[j] += down[i];
            down[i] = 0.0;
        } else {
            down[i] -= 1.0 - down[j];
            down[j] = 1.0;
        }

        let f_up = multilinear_value(inst, phi, &up)?;
        let f_down = multilinear_value(inst, phi, &down)?;
        if f_up.max(f_down) < f_here - SNAP_TOL * scale {
            return Err(Error::Invariant(format!(
                "both segment endpoints drop below the current value: \
                 {} and {} vs {f_here}",
                f_up, f_down
            )));
        }
        if f_up >= f_down {
            x = up;
            trace.push(f_up);
        } else {
            x = down;
            trace.push(f_down);
        }
    }

    let mut selection = Vec::new();
    for (i, &xi) in x.iter().enumerate() {
        if (xi - 1.0).abs() < 1e-7 {
            selection.push(i);
        } else if xi.abs() >= 1e-7 {
            return Err(Error::Invariant(format!(
                "rounding left coordinate {i} fractional at {xi}"
            )));
        }
    }
    Ok(PipageOutcome { selection, f_trace: trace })
}

/// Smallest `(i, j)`, `i < j`, with both coordinates fractional and both in
/// the same part.
fn first_fractional_pair(x: &[f64], parts: &[Vec<usize>]) -> Option<(usize, usize)> {
    let fractional = |v: f64| v > 0.0 && v < 1.0;
    let mut best: Option<(usize, usize)> = None;
    for part in parts {
        let mut iter = part.iter().copied().filter(|&i| fractional(x[i]));
        if let (Some(i), Some(j)) = (iter.next(), iter.next()) {
            if best.is_none_or(|b| (i, j) < b) {
                best = Some((i, j));
            }
        }
    }
    best
}

/// Outcome of the full relax-and-round pipeline.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub selection: SelectionValue,
    pub lp_objective: f64,
    /// `F` at the fractional optimum (the value rounding starts from).
    pub multilinear_at_lp: f64,
    /// `min over j in 1..=m` of the Poisson ratio at `j`: the proven
    /// worst-case factor between the returned value and the relaxation.
    pub certified_ratio_bound: f64,
    pub method_tag: &'static str,
    pub f_trace: Vec<f64>,
}

/// Relax, solve, round, and certify: the returned selection's value is
/// checked against `certified_ratio_bound * lp_objective` before returning.
pub fn solve(
    inst: &CoverageInstance,
    phi: &CountingFunction,
    constraint: &Constraint,
) -> Result<SolveResult> {
    let model: LpModel = build_lp(inst, phi, constraint)?;
    let fractional: FractionalSolution = solve_lp(&model)?;
    let outcome = pipage_round(inst, phi, &fractional.x, constraint)?;
    let selection = SelectionValue::new(inst, phi, outcome.selection.clone())?;
    if !constraint.is_base(&selection.selected, inst.m()) {
        return Err(Error::Invariant(
            "rounded selection is not a base of the constraint".into(),
        ));
    }

    let mut bound = f64::INFINITY;
    for j in 1..=inst.m() {
        bound = bound.min(ratio_at(phi, j as f64, CERT_EPS)?);
    }

    let multilinear_at_lp = outcome.f_trace[0];
    if selection.value < multilinear_at_lp - CERT_TOL {
        return Err(Error::Invariant(format!(
            "rounded value {} fell below the fractional expectation {}",
            selection.value, multilinear_at_lp
        )));
    }
    if selection.value < bound * fractional.objective - CERT_TOL {
        return Err(Error::Invariant(format!(
            "certificate violated: value {} < {} * {}",
            selection.value, bound, fractional.objective
        )));
    }

    Ok(SolveResult {
        selection,
        lp_objective: fractional.objective,
        multilinear_at_lp,
        certified_ratio_bound: bound,
        method_tag: "lp-pipage",
        f_trace: outcome.f_trace,
    })
}
