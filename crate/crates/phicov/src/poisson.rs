//! Poisson and binomial expectations of counting functions, and the
//! concavity ratio that certifies the rounding pipeline.
//!
//! The central quantity is
//!
//! ```text
//! alpha_phi = min_{x > 0}  E[phi(Poisson(x))] / phi(x)
//! ```
//!
//! which lies in [0, 1] by Jensen's inequality. The per-point ratio
//! `alpha_phi(x)` satisfies `alpha_phi(x) >= min(alpha_phi(floor x),
//! alpha_phi(ceil x))`, so the infimum over the reals is attained on the
//! integers and [`concavity_ratio`] only scans integer points. Two structural
//! shortcuts keep the scan short:
//!
//! * if `phi` is linear from some `l` (every stored function is, because of
//!   the linear tail), the ratio is nondecreasing past `l` and the scan stops
//!   there;
//! * if the increment ratios are nonincreasing
//!   ([`CountingFunction::is_geometrically_dominant`]), the minimum sits at
//!   `x = 1`.
//!
//! Without a shortcut, the ratio is within `eps` of 1 for all
//! `x >= (6/eps)^4`, which bounds the scan; a hard cap of 10^7 evaluations
//! guards against absurd requests.

use crate::counting::{CountingFunction, Family};
use crate::{Error, Result};

/// Hard cap on ratio evaluations in one [`concavity_ratio`] call.
pub const EVAL_CAP: u64 = 10_000_000;

/// Largest `x` for which the truncation index is found by iterating
/// `u_K = x^(K+1)/K!` in plain f64; the running peak `~ e^x sqrt(x)` stays
/// below f64::MAX up to here. Larger arguments switch to a mode-centered
/// summation with the same remainder guarantee.
const FORWARD_LIMIT: f64 = 650.0;

/// Result of a concavity-ratio computation.
#[derive(Debug, Clone)]
pub struct RatioReport {
    /// `min_x alpha_phi(x)`, accurate to `2 * epsilon`.
    pub alpha: f64,
    /// Integer argmin; ties break toward the smallest x.
    pub argmin_x: usize,
    /// Upper end of the integer scan actually performed.
    pub search_bound: usize,
    /// Requested per-evaluation precision.
    pub epsilon: f64,
    /// `(x, alpha_phi(x))` at every scanned integer.
    pub curve: Vec<(f64, f64)>,
    /// `1 - c/e` where `c = 1 - (phi(m) - phi(m-1))` at the supplied (or
    /// default) m; a curvature-style reference bound.
    pub curvature_ratio: f64,
}

/// `E[phi(Poisson(x))]` with absolute truncation error at most `eps`.
///
/// The series is cut at `K = max(ceil(x) + 2, smallest K with
/// x^(K+1)/K! <= eps)`; since `phi(k) <= k`, the discarded tail is at most
/// `x * e^-x * sum_{k>=K} x^k/k! <= x^(K+1)/K!`.
pub fn poisson_expectation(phi: &CountingFunction, x: f64, eps: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain(format!("Poisson mean must be finite and >= 0, got {x}")));
    }
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x <= FORWARD_LIMIT {
        forward_sum(phi, x, eps)
    } else {
        central_sum(phi, x, eps)
    }
}

fn forward_sum(phi: &CountingFunction, x: f64, eps: f64) -> Result<f64> {
    let k_min = x.ceil() as usize + 2;
    let mut k = 0usize;
    let mut u = x; // u = x^(k+1)/k!
    while k < k_min || u > eps {
        k += 1;
        u *= x / k as f64;
        if k > 5_000_000 {
            return Err(Error::Resource(format!(
                "series truncation for x = {x}, eps = {eps} did not converge"
            )));
        }
    }
    let mut term = (-x).exp();
    let mut sum = 0.0;
    for j in 0..=k {
        sum += term * phi.at_int(j);
        term *= x / (j + 1) as f64;
    }
    Ok(sum)
}

/// Mode-centered summation for large x, where `e^-x` underflows. Terms are
/// seeded at the mode in log space and recursed outward; the loops stop once
/// a geometric bound on the remaining tail (using `phi(k) <= k` upward and
/// monotonicity downward) drops below eps/4 per side.
fn central_sum(phi: &CountingFunction, x: f64, eps: f64) -> Result<f64> {
    let mode = x.floor() as u64;
    let t_mode = (-x + mode as f64 * x.ln() - ln_factorial(mode)).exp();
    let mut sum = t_mode * phi.at_int(mode as usize);

    // downward from the mode
    let mut t = t_mode;
    let mut k = mode;
    while k > 0 {
        t *= k as f64 / x; // t_(k-1) = t_k * k / x
        k -= 1;
        let pk = phi.at_int(k as usize);
        sum += t * pk;
        let rho = k as f64 / x;
        if t * pk / (1.0 - rho) < eps * 0.25 {
            break;
        }
    }

    // upward from the mode
    let mut t = t_mode;
    let mut k = mode;
    loop {
        k += 1;
        t *= x / k as f64;
        sum += t * phi.at_int(k as usize);
        let next = (k + 1) as f64;
        if next > x {
            let tail = x * t / (1.0 - x / next);
            if tail < eps * 0.25 {
                break;
            }
        }
        if k > mode + 1_000_000_000 {
            return Err(Error::Resource("upper tail did not converge".into()));
        }
    }
    Ok(sum)
}

/// `ln(n!)`: direct accumulation up to 1024, Stirling with the 1/z^5 term
/// beyond (relative error far below f64 resolution there).
fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    if n <= 1024 {
        return (2..=n).map(|k| (k as f64).ln()).sum();
    }
    let z = n as f64 + 1.0;
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * z)
        - 1.0 / (360.0 * z.powi(3))
        + 1.0 / (1260.0 * z.powi(5))
}

/// `E[phi(Binomial(k, q))]`, an exact finite sum. The pmf is built by the
/// same sequential convolution as a Poisson-binomial with equal entries,
/// which is numerically stabler than raw binomial coefficients.
pub fn binomial_expectation(phi: &CountingFunction, k: usize, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) || !q.is_finite() {
        return Err(Error::Domain(format!("q must lie in [0, 1], got {q}")));
    }
    let mut pmf = vec![0.0f64; k + 1];
    pmf[0] = 1.0;
    for i in 0..k {
        for j in (1..=i + 1).rev() {
            pmf[j] = pmf[j] * (1.0 - q) + pmf[j - 1] * q;
        }
        pmf[0] *= 1.0 - q;
    }
    Ok(pmf.iter().enumerate().map(|(j, &p)| p * phi.at_int(j)).sum())
}

/// `alpha_phi(x) = E[phi(Poisson(x))] / phi(x)`, with `alpha_phi(0) = 1`.
/// The requested `eps` is an absolute error bound on the ratio.
pub fn ratio_at(phi: &CountingFunction, x: f64, eps: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain(format!("ratio is defined for x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    let fx = phi.value_at(x)?;
    if fx <= 0.0 {
        return Err(Error::Domain(format!(
            "phi({x}) = {fx} is not positive; the ratio is undefined"
        )));
    }
    let e = poisson_expectation(phi, x, (eps * fx).max(f64::MIN_POSITIVE))?;
    Ok(e / fx)
}

/// Computes `alpha_phi` by scanning integer points, together with the curve,
/// the argmin, and a curvature reference bound.
///
/// `eps` must lie in `(1e-9, 0.1]`; the result is accurate to `2 * eps`.
/// `m_hint`, when given, selects the m used for the reported
/// `curvature_ratio`; the default is one past the function's linear point,
/// where the curvature bound provably applies.
pub fn concavity_ratio(
    phi: &CountingFunction,
    eps: f64,
    m_hint: Option<usize>,
) -> Result<RatioReport> {
    if !(eps > 1e-9 && eps <= 0.1) {
        return Err(Error::Domain(format!("eps = {eps} must lie in (1e-9, 0.1]")));
    }
    let ell = phi.linear_from();
    let n_eps = (6.0 / eps).powi(4).ceil();
    let bound = (ell as f64).min(n_eps).max(1.0);
    if bound > EVAL_CAP as f64 {
        return Err(Error::Resource(format!(
            "scan bound {bound} exceeds the evaluation cap {EVAL_CAP}"
        )));
    }
    let hi = bound as usize;

    // Nonincreasing increment ratios pin the argmin at 1 (the scan then only
    // cross-checks). Zero increments make the ratio test inapplicable.
    let dominant = phi.is_geometrically_dominant(phi.horizon().max(1)).unwrap_or(false);

    let mut curve = Vec::with_capacity(hi);
    let mut alpha = f64::INFINITY;
    let mut argmin = 0usize;
    for xi in 1..=hi {
        let r = ratio_at(phi, xi as f64, eps)?;
        curve.push((xi as f64, r));
        if r < alpha {
            alpha = r;
            argmin = xi;
        }
    }
    if dominant {
        let r1 = curve[0].1;
        if alpha < r1 - 2.0 * eps {
            return Err(Error::Invariant(format!(
                "increment-ratio dominance claims argmin 1 but the scan found alpha({argmin}) = {alpha} < alpha(1) = {r1}"
            )));
        }
        alpha = r1;
        argmin = 1;
    }

    let m_used = m_hint.unwrap_or(ell + 1);
    let curvature = curvature_ratio(phi, m_used)?;
    Ok(RatioReport {
        alpha,
        argmin_x: argmin,
        search_bound: hi,
        epsilon: eps,
        curve,
        curvature_ratio: curvature,
    })
}

/// Closed forms for families that admit one:
/// `threshold:l` -> `1 - l^l e^-l / l!`, `geo:p` -> `(1 - e^-p)/p`,
/// `power:d` -> `e^-1 sum_k k^d / k!` (series truncated below 1e-16).
/// Other families return `None`.
pub fn closed_form_ratio(family: &Family) -> Option<f64> {
    match family {
        Family::Threshold { cap } => {
            // e^-l l^l / l! via the pmf recurrence, stable for any desk-scale l
            let l = *cap as f64;
            let mut t = (-l).exp();
            for j in 1..=*cap {
                t *= l / j as f64;
            }
            Some(1.0 - t)
        }
        Family::Geometric { p } => Some(-(-p).exp_m1() / p),
        Family::Power { exponent } => {
            let mut inv_fact = 1.0f64;
            let mut sum = 0.0;
            for k in 1..200usize {
                inv_fact /= k as f64;
                let term = (k as f64).powf(*exponent) * inv_fact;
                sum += term;
                if term < 1e-16 {
                    break;
                }
            }
            Some(sum * (-1.0f64).exp())
        }
        _ => None,
    }
}

/// The curvature-style reference `1 - c/e` with `c = 1 - (phi(m) - phi(m-1))`.
///
/// This equals `alpha_phi` only under the hypothesis that `phi` is linear
/// from `m` with that slope; see the acceptance suite for the exact check.
pub fn curvature_ratio(phi: &CountingFunction, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("m must be >= 1".into()));
    }
    let c = 1.0 - phi.increment(m);
    Ok(1.0 - c * (-1.0f64).exp())
}
