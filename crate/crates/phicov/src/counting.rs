//! Counting functions: how much the j-th coverage of an element is worth.
//!
//! A counting function is normalized (`phi(0) = 0`, `phi(1) = 1`),
//! nondecreasing, and concave over the integers. We store values on
//! `0..=horizon` plus a linear tail slope for larger arguments, so every
//! represented function is eventually linear; real arguments are evaluated by
//! piecewise-linear interpolation.
//!
//! Built-in families, written in the descriptor grammar accepted by
//! [`CountingFunction::parse`]:
//!
//! | descriptor                   | phi(j)                            |
//! |------------------------------|-----------------------------------|
//! | `threshold:l=<int>`          | `min(j, l)`                       |
//! | `pav`                        | `1 + 1/2 + ... + 1/j`             |
//! | `pav-cap:l=<int>`            | harmonic, frozen at `j = l`       |
//! | `geo:p=<float>`              | `(1 - (1-p)^j) / p`               |
//! | `geo-cap:p=<float>,l=<int>`  | geometric, frozen at `j = l`      |
//! | `power:d=<float>`            | `j^d`, `0 < d <= 1`               |
//! | `custom:<v0>,<v1>,...[;tail=<float>]` | explicit values          |
//!
//! Capped families store a zero tail slope; the other families store their
//! next true increment (e.g. `(1-p)^L` for `geo`), which keeps the stored
//! function concave across the horizon boundary.

use crate::{Error, Result};

/// Default stored horizon. Callers pairing a function with an instance of `m`
/// sets should extend to at least `m + 2` via [`CountingFunction::with_horizon`].
pub const DEFAULT_HORIZON: usize = 64;

/// Slack used when checking normalization/monotonicity/concavity.
const VALIDATE_TOL: f64 = 1e-12;

/// Which family a function was built from; `Custom` for explicit value lists.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Threshold { cap: usize },
    Pav,
    PavCapped { cap: usize },
    Geometric { p: f64 },
    GeometricCapped { p: f64, cap: usize },
    Power { exponent: f64 },
    Custom,
}

/// A normalized nondecreasing concave counting function, stored as values on
/// `0..=horizon` plus a linear tail.
#[derive(Debug, Clone)]
pub struct CountingFunction {
    values: Vec<f64>,
    tail_slope: f64,
    family: Family,
}

impl CountingFunction {
    /// Parses a family descriptor at the default horizon.
    pub fn parse(spec: &str) -> Result<Self> {
        Self::parse_with_horizon(spec, DEFAULT_HORIZON)
    }

    /// Parses a family descriptor, storing values on `0..=horizon`.
    ///
    /// For capped families the horizon is raised to the cap if necessary so
    /// the stored values always reach the flat region.
    pub fn parse_with_horizon(spec: &str, horizon: usize) -> Result<Self> {
        let spec = spec.trim();
        if spec == "pav" {
            return Self::from_family(Family::Pav, horizon);
        }
        let (head, rest) = spec
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("unknown family descriptor '{spec}'")))?;
        match head {
            "threshold" => {
                let cap = parse_fields(rest, &["l"])?[0].parse_int("l")?;
                Self::from_family(Family::Threshold { cap }, horizon)
            }
            "pav-cap" => {
                let cap = parse_fields(rest, &["l"])?[0].parse_int("l")?;
                Self::from_family(Family::PavCapped { cap }, horizon)
            }
            "geo" => {
                let p = parse_fields(rest, &["p"])?[0].parse_float("p")?;
                Self::from_family(Family::Geometric { p }, horizon)
            }
            "geo-cap" => {
                let fields = parse_fields(rest, &["p", "l"])?;
                let p = fields[0].parse_float("p")?;
                let cap = fields[1].parse_int("l")?;
                Self::from_family(Family::GeometricCapped { p, cap }, horizon)
            }
            "power" => {
                let d = parse_fields(rest, &["d"])?[0].parse_float("d")?;
                Self::from_family(Family::Power { exponent: d }, horizon)
            }
            "custom" => parse_custom(rest),
            other => Err(Error::Parse(format!("unknown family '{other}'"))),
        }
    }

    /// Builds a family at the given horizon, validating its parameters.
    pub fn from_family(family: Family, horizon: usize) -> Result<Self> {
        let horizon = horizon.max(1);
        let horizon = match &family {
            Family::Threshold { cap } | Family::PavCapped { cap } => {
                if *cap == 0 {
                    return Err(Error::Domain("cap l must be >= 1".into()));
                }
                horizon.max(*cap)
            }
            Family::GeometricCapped { p, cap } => {
                check_p(*p)?;
                if *cap == 0 {
                    return Err(Error::Domain("cap l must be >= 1".into()));
                }
                horizon.max(*cap)
            }
            Family::Geometric { p } => {
                check_p(*p)?;
                horizon
            }
            Family::Power { exponent } => {
                if !(*exponent > 0.0 && *exponent <= 1.0) {
                    return Err(Error::Domain(format!(
                        "power exponent d = {exponent} must lie in (0, 1] for concavity"
                    )));
                }
                horizon
            }
            Family::Pav => horizon,
            Family::Custom => {
                return Err(Error::Domain(
                    "custom functions are built from explicit values".into(),
                ))
            }
        };

        let l = horizon;
        let values: Vec<f64> = (0..=l).map(|j| family_value(&family, j)).collect();
        // Uncapped families continue with their next true increment; capped
        // families are flat past the cap.
        let tail_slope = match &family {
            Family::Threshold { .. } | Family::PavCapped { .. } | Family::GeometricCapped { .. } => 0.0,
            _ => family_value(&family, l + 1) - family_value(&family, l),
        };
        Ok(CountingFunction { values, tail_slope, family })
    }

    /// Builds a custom function from explicit values and an optional tail
    /// slope (defaults to the last stored increment). Fails if the result
    /// does not validate.
    pub fn from_values(values: Vec<f64>, tail_slope: Option<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Domain(
                "custom functions need at least phi(0) and phi(1)".into(),
            ));
        }
        let last_inc = values[values.len() - 1] - values[values.len() - 2];
        let f = CountingFunction {
            values,
            tail_slope: tail_slope.unwrap_or(last_inc),
            family: Family::Custom,
        };
        let violations = f.validate();
        if violations.is_empty() {
            Ok(f)
        } else {
            Err(Error::Domain(format!(
                "invalid counting function: {}",
                violations.join("; ")
            )))
        }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Largest integer with an explicitly stored value.
    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail_slope(&self) -> f64 {
        self.tail_slope
    }

    /// `phi(j)` at an integer argument, using the linear tail past the horizon.
    pub fn at_int(&self, j: usize) -> f64 {
        let l = self.horizon();
        if j <= l {
            self.values[j]
        } else {
            self.values[l] + self.tail_slope * (j - l) as f64
        }
    }

    /// `phi(j) - phi(j-1)` for `j >= 1`.
    pub fn increment(&self, j: usize) -> f64 {
        debug_assert!(j >= 1);
        self.at_int(j) - self.at_int(j - 1)
    }

    /// Piecewise-linear evaluation at a real argument `x >= 0`.
    pub fn value_at(&self, x: f64) -> Result<f64> {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::Domain(format!("phi is defined on x >= 0, got {x}")));
        }
        let l = self.horizon() as f64;
        if x >= l {
            return Ok(self.values[self.horizon()] + self.tail_slope * (x - l));
        }
        let j = x.floor() as usize;
        let frac = x - j as f64;
        Ok(self.values[j] + frac * (self.values[j + 1] - self.values[j]))
    }

    /// Checks normalization, monotonicity, and concavity (tail included).
    /// Returns a list of human-readable violations; empty means valid.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        let v = &self.values;
        for (j, &x) in v.iter().enumerate() {
            if !x.is_finite() {
                out.push(format!("phi({j}) = {x} is not finite"));
                return out;
            }
        }
        if !self.tail_slope.is_finite() {
            out.push(format!("tail slope {} is not finite", self.tail_slope));
            return out;
        }
        if v[0].abs() > VALIDATE_TOL {
            out.push(format!("phi(0) = {} (must be 0)", v[0]));
        }
        if (v[1] - 1.0).abs() > VALIDATE_TOL {
            out.push(format!("phi(1) = {} (must be 1)", v[1]));
        }
        for j in 1..v.len() {
            if v[j] < v[j - 1] - VALIDATE_TOL {
                out.push(format!("decreasing at j={j}: phi({j}) = {} < phi({}) = {}", v[j], j - 1, v[j - 1]));
            }
        }
        if self.tail_slope < -VALIDATE_TOL {
            out.push(format!("negative tail slope {}", self.tail_slope));
        }
        for j in 1..v.len() - 1 {
            let w_j = v[j] - v[j - 1];
            let w_next = v[j + 1] - v[j];
            if w_next > w_j + VALIDATE_TOL {
                out.push(format!(
                    "concavity violated at j={j}: increment rises from {w_j} to {w_next}"
                ));
            }
        }
        let last_inc = v[v.len() - 1] - v[v.len() - 2];
        if self.tail_slope > last_inc + VALIDATE_TOL {
            out.push(format!(
                "tail slope {} exceeds the last stored increment {last_inc}",
                self.tail_slope
            ));
        }
        out
    }

    /// Whether the increment sequence `w_j = phi(j) - phi(j-1)` has
    /// nonincreasing consecutive ratios, checked multiplicatively as
    /// `w_i * w_(i+2) >= w_(i+1)^2` for `i = 1..=up_to`.
    ///
    /// Errors if any increment in the checked range `1..=up_to+2` is zero or
    /// negative, since the ratio condition is undefined there.
    pub fn is_geometrically_dominant(&self, up_to: usize) -> Result<bool> {
        if up_to == 0 {
            return Err(Error::Domain("up_to must be >= 1".into()));
        }
        for j in 1..=up_to + 2 {
            if self.increment(j) <= 0.0 {
                return Err(Error::Domain(format!(
                    "increment at j={j} is not positive; increment ratios are undefined"
                )));
            }
        }
        for i in 1..=up_to {
            let (a, b, c) = (self.increment(i), self.increment(i + 1), self.increment(i + 2));
            if a * c < b * b * (1.0 - 1e-12) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Smallest `l >= 1` such that the function is linear on `[l, infinity)`:
    /// every increment past `l` (including the tail) equals the tail slope.
    /// Always at most the horizon, because the tail itself is linear.
    pub fn linear_from(&self) -> usize {
        let l = self.horizon();
        let mut last_mismatch = 0usize;
        for j in 1..=l {
            let w = self.values[j] - self.values[j - 1];
            let tol = VALIDATE_TOL * (1.0 + w.abs().max(self.tail_slope.abs()));
            if (w - self.tail_slope).abs() > tol {
                last_mismatch = j;
            }
        }
        last_mismatch.max(1)
    }

    /// Re-derives the function at a larger horizon: families recompute their
    /// formula, custom functions extend along the tail. Horizons never shrink.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        if horizon <= self.horizon() {
            return Ok(self.clone());
        }
        match self.family {
            Family::Custom => {
                let l = self.horizon();
                let mut values = self.values.clone();
                for j in l + 1..=horizon {
                    values.push(self.values[l] + self.tail_slope * (j - l) as f64);
                }
                Ok(CountingFunction {
                    values,
                    tail_slope: self.tail_slope,
                    family: Family::Custom,
                })
            }
            ref fam => Self::from_family(fam.clone(), horizon),
        }
    }

    /// Canonical descriptor string that reparses to this function.
    pub fn spec_string(&self) -> String {
        match &self.family {
            Family::Threshold { cap } => format!("threshold:l={cap}"),
            Family::Pav => "pav".to_string(),
            Family::PavCapped { cap } => format!("pav-cap:l={cap}"),
            Family::Geometric { p } => format!("geo:p={p}"),
            Family::GeometricCapped { p, cap } => format!("geo-cap:p={p},l={cap}"),
            Family::Power { exponent } => format!("power:d={exponent}"),
            Family::Custom => {
                let vals: Vec<String> = self.values.iter().map(|v| v.to_string()).collect();
                format!("custom:{};tail={}", vals.join(","), self.tail_slope)
            }
        }
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("geometric parameter p = {p} must lie in (0, 1]")))
    }
}

fn family_value(family: &Family, j: usize) -> f64 {
    match family {
        Family::Threshold { cap } => j.min(*cap) as f64,
        Family::Pav => harmonic(j),
        Family::PavCapped { cap } => harmonic(j.min(*cap)),
        Family::Geometric { p } => geometric_value(*p, j),
        Family::GeometricCapped { p, cap } => geometric_value(*p, j.min(*cap)),
        Family::Power { exponent } => (j as f64).powf(*exponent),
        Family::Custom => unreachable!("custom families carry no formula"),
    }
}

fn harmonic(j: usize) -> f64 {
    // an explicit fold from +0.0: the std `Sum` impl folds from -0.0, which
    // would give the empty sum (phi(0)) a negative sign bit
    (1..=j).fold(0.0, |acc, i| acc + 1.0 / i as f64)
}

/// `(1 - (1-p)^j) / p`, accumulated as a sum of increments `(1-p)^(i-1)` to
/// avoid cancellation for small `p`.
fn geometric_value(p: f64, j: usize) -> f64 {
    let q = 1.0 - p;
    let mut total = 0.0;
    let mut inc = 1.0;
    for _ in 0..j {
        total += inc;
        inc *= q;
    }
    total
}

struct Field<'a> {
    raw: &'a str,
}

impl Field<'_> {
    fn parse_int(&self, key: &str) -> Result<usize> {
        self.raw
            .parse()
            .map_err(|_| Error::Parse(format!("{key}={}: not an integer", self.raw)))
    }
    fn parse_float(&self, key: &str) -> Result<f64> {
        self.raw
            .parse()
            .map_err(|_| Error::Parse(format!("{key}={}: not a number", self.raw)))
    }
}

/// Parses `k1=v1,k2=v2` against an exact expected key sequence.
fn parse_fields<'a>(rest: &'a str, keys: &[&str]) -> Result<Vec<Field<'a>>> {
    let parts: Vec<&str> = rest.split(',').collect();
    if parts.len() != keys.len() {
        return Err(Error::Parse(format!(
            "expected fields {}, got '{rest}'",
            keys.join(",")
        )));
    }
    parts
        .iter()
        .zip(keys)
        .map(|(part, key)| {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected {key}=<value>, got '{part}'")))?;
            if k != *key {
                return Err(Error::Parse(format!("expected key '{key}', got '{k}'")));
            }
            Ok(Field { raw: v })
        })
        .collect()
}

fn parse_custom(rest: &str) -> Result<CountingFunction> {
    let (values_part, tail) = match rest.split_once(';') {
        Some((v, t)) => {
            let t = t
                .strip_prefix("tail=")
                .ok_or_else(|| Error::Parse(format!("expected ';tail=<float>', got ';{t}'")))?;
            let tail: f64 = t
                .parse()
                .map_err(|_| Error::Parse(format!("tail={t}: not a number")))?;
            (v, Some(tail))
        }
        None => (rest, None),
    };
    let values: Vec<f64> = values_part
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Parse(format!("custom value '{s}': not a number")))
        })
        .collect::<Result<_>>()?;
    CountingFunction::from_values(values, tail)
}
