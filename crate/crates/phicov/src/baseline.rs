//! Reference algorithms: incremental greedy and guarded exhaustive search.
//! Both exist to compare against and to certify the relax-and-round
//! pipeline on instances small enough to enumerate.

use crate::counting::CountingFunction;
use crate::instance::{Constraint, CoverageInstance, SelectionValue};
use crate::{Error, Result};

/// Enumeration budget of [`exact`].
pub const ENUMERATION_CAP: u128 = 10_000_000;

/// Builds a base greedily: each step adds the feasible set with the largest
/// marginal gain, breaking ties toward the smallest set index. Runs until
/// the base is full even when the best remaining gain is zero.
pub fn greedy(
    inst: &CoverageInstance,
    phi: &CountingFunction,
    constraint: &Constraint,
) -> Result<SelectionValue> {
    let m = inst.m();
    constraint.validate(m)?;
    let (parts, capacities) = constraint.normalized_parts(m);
    let mut part_of = vec![0usize; m];
    for (p, part) in parts.iter().enumerate() {
        for &i in part {
            part_of[i] = p;
        }
    }
    let mut remaining = capacities.clone();

    let mut counts = vec![0usize; inst.n()];
    let mut chosen = vec![false; m];
    let mut selection = Vec::with_capacity(constraint.base_size());
    for _ in 0..constraint.base_size() {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..m {
            if chosen[i] || remaining[part_of[i]] == 0 {
                continue;
            }
            let gain: f64 = inst.sets()[i]
                .iter()
                .map(|&a| {
                    inst.weights()[a] * (phi.at_int(counts[a] + 1) - phi.at_int(counts[a]))
                })
                .sum();
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        let (i, _) = best.expect("base size never exceeds the feasible sets");
        chosen[i] = true;
        remaining[part_of[i]] -= 1;
        for &a in &inst.sets()[i] {
            counts[a] += 1;
        }
        selection.push(i);
    }
    SelectionValue::new(inst, phi, selection)
}

/// Number of bases of the constraint, saturating at `u128::MAX`.
fn base_count(constraint: &Constraint, m: usize) -> u128 {
    let (parts, capacities) = constraint.normalized_parts(m);
    let mut total: u128 = 1;
    for (part, &d) in parts.iter().zip(&capacities) {
        total = total.saturating_mul(binomial(part.len(), d));
    }
    total
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut num: u128 = 1;
    for i in 0..k {
        num = num.saturating_mul((n - i) as u128);
        num /= (i + 1) as u128; // exact: prefix products are binomials
    }
    num
}

/// Global optimum by full enumeration of constraint bases.
/// Ties resolve to the lexicographically smallest selection. Refuses to run
/// past [`ENUMERATION_CAP`] bases.
pub fn exact(
    inst: &CoverageInstance,
    phi: &CountingFunction,
    constraint: &Constraint,
) -> Result<SelectionValue> {
    let m = inst.m();
    constraint.validate(m)?;
    let total = base_count(constraint, m);
    if total > ENUMERATION_CAP {
        return Err(Error::Resource(format!(
            "{total} bases exceed the enumeration budget of {ENUMERATION_CAP}"
        )));
    }
    let (parts, capacities) = constraint.normalized_parts(m);

    // per-part combination indices, advanced like an odometer
    let mut combos: Vec<Vec<usize>> =
        capacities.iter().map(|&d| (0..d).collect()).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let mut selection: Vec<usize> = combos
            .iter()
            .zip(&parts)
            .flat_map(|(combo, part)| combo.iter().map(|&c| part[c]))
            .collect();
        selection.sort_unstable();
        let value = crate::instance::evaluate(inst, phi, &selection)?;
        let replace = match &best {
            None => true,
            Some((v, s)) => value > *v || (value == *v && selection < *s),
        };
        if replace {
            best = Some((value, selection));
        }

        // advance the last part that still has room
        let mut p = parts.len();
        loop {
            if p == 0 {
                let (value, selected) = best.expect("at least one base exists");
                return Ok(SelectionValue { selected, value });
            }
            p -= 1;
            if advance_combo(&mut combos[p], parts[p].len()) {
                break;
            }
            combos[p] = (0..capacities[p]).collect();
        }
    }
}

/// Next k-combination of `0..n` in lexicographic order; false on wrap.
fn advance_combo(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - (k - i) {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
