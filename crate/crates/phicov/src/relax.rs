//! The linear-programming relaxation of weighted phi-coverage.
//!
//! Variables are `x_1..x_m` (fractional set indicators) and `c_1..c_n`
//! (element scores). Writing `|x|_a` for the sum of `x_i` over sets
//! containing element `a`, the nonlinear constraint `c_a <= phi(|x|_a)` is
//! replaced by one linear chord per count `j`:
//!
//! ```text
//! c_a <= (phi(j) - phi(j-1)) * |x|_a + j*phi(j-1) - (j-1)*phi(j)
//! ```
//!
//! which together describe the piecewise-linear interpolation of `phi`.
//! The objective maximizes the weighted sum of the element scores subject
//! to box bounds `x_i <= 1` and one equality per constraint part.

mod simplex;

use crate::counting::CountingFunction;
use crate::instance::{Constraint, CoverageInstance};
use crate::{Error, Result};

/// Row feasibility slack accepted on returned solutions.
pub const FEASIBILITY_TOL: f64 = 1e-8;
/// Absolute objective tolerance of the solver.
pub const OPTIMALITY_TOL: f64 = 1e-7;
/// Smallest pivot magnitude the solver accepts.
pub const PIVOT_TOL: f64 = 1e-9;

/// One chord constraint `c_a <= slope * |x|_a + rhs`.
#[derive(Debug, Clone)]
pub struct CoverageRow {
    pub element: usize,
    /// Increment `phi(j) - phi(j-1)` of the chord's count `j`.
    pub slope: f64,
    /// Intercept `j*phi(j-1) - (j-1)*phi(j)`.
    pub rhs: f64,
}

/// The assembled relaxation.
#[derive(Debug, Clone)]
pub struct LpModel {
    pub m: usize,
    pub n: usize,
    /// Objective coefficients over (x_1..x_m, c_1..c_n).
    pub objective: Vec<f64>,
    /// Chord rows after merging counts with equal slope (equal slopes give
    /// byte-identical rows, so the merge loses nothing).
    pub coverage_rows: Vec<CoverageRow>,
    /// `incident[a]` = indices of sets containing element `a`.
    pub incident: Vec<Vec<usize>>,
    /// Per-part equality rows: (member sets, required count).
    pub equalities: Vec<(Vec<usize>, usize)>,
    /// Constraint count of the textbook formulation (no merging):
    /// `n*m` chords + `m` box rows + one equality per part.
    pub declared_rows: usize,
}

/// An optimal point of the relaxation.
#[derive(Debug, Clone)]
pub struct FractionalSolution {
    pub x: Vec<f64>,
    pub c: Vec<f64>,
    pub objective: f64,
}

/// Assembles the relaxation for an instance. Chord slopes are the exact
/// increments of `phi`; counts sharing a slope are merged into one row.
pub fn build_lp(
    inst: &CoverageInstance,
    phi: &CountingFunction,
    constraint: &Constraint,
) -> Result<LpModel> {
    constraint.validate(inst.m())?;
    let m = inst.m();
    let n = inst.n();

    let mut chords: Vec<(f64, f64)> = Vec::new();
    for j in 1..=m {
        let slope = phi.increment(j);
        let rhs = j as f64 * phi.at_int(j - 1) - (j - 1) as f64 * phi.at_int(j);
        if chords.last().map(|&(s, _)| s) != Some(slope) {
            chords.push((slope, rhs));
        }
    }

    let mut coverage_rows = Vec::with_capacity(n * chords.len());
    for a in 0..n {
        for &(slope, rhs) in &chords {
            coverage_rows.push(CoverageRow { element: a, slope, rhs });
        }
    }

    let mut objective = vec![0.0; m + n];
    for (a, &w) in inst.weights().iter().enumerate() {
        objective[m + a] = w;
    }

    let (parts, capacities) = constraint.normalized_parts(m);
    let equalities: Vec<(Vec<usize>, usize)> =
        parts.into_iter().zip(capacities).collect();

    let incident: Vec<Vec<usize>> =
        (0..n).map(|a| inst.sets_containing(a).to_vec()).collect();

    let declared_rows = (n + 1) * m + equalities.len();

    Ok(LpModel {
        m,
        n,
        objective,
        coverage_rows,
        incident,
        equalities,
        declared_rows,
    })
}

/// Solves the relaxation with a two-phase primal simplex. Deterministic:
/// the pivot order is fixed, so equal models give bit-equal solutions.
pub fn solve_lp(model: &LpModel) -> Result<FractionalSolution> {
    let m = model.m;
    let n = model.n;
    let num_vars = m + n;

    let mut leq: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    for row in &model.coverage_rows {
        // c_a - slope * |x|_a <= rhs
        let mut coeffs: Vec<(usize, f64)> = model.incident[row.element]
            .iter()
            .map(|&i| (i, -row.slope))
            .collect();
        coeffs.push((m + row.element, 1.0));
        leq.push((coeffs, row.rhs));
    }
    for i in 0..m {
        leq.push((vec![(i, 1.0)], 1.0));
    }
    let eq: Vec<(Vec<(usize, f64)>, f64)> = model
        .equalities
        .iter()
        .map(|(members, d)| {
            (members.iter().map(|&i| (i, 1.0)).collect(), *d as f64)
        })
        .collect();

    let (values, _) = simplex::maximize(&model.objective, &leq, &eq, num_vars)?;

    let mut x = values[..m].to_vec();
    for xi in &mut x {
        if !(-FEASIBILITY_TOL..=1.0 + FEASIBILITY_TOL).contains(xi) {
            return Err(Error::Invariant(format!(
                "lp solution leaves the unit box: x = {xi}"
            )));
        }
        *xi = xi.clamp(0.0, 1.0);
    }
    for (members, d) in &model.equalities {
        let total: f64 = members.iter().map(|&i| x[i]).sum();
        if (total - *d as f64).abs() > FEASIBILITY_TOL {
            return Err(Error::Invariant(format!(
                "lp solution misses an equality: sum = {total}, want {d}"
            )));
        }
    }
    let c = values[m..].to_vec();
    let objective: f64 =
        model.objective.iter().zip(&values).map(|(o, v)| o * v).sum();
    Ok(FractionalSolution { x, c, objective })
}

/// Writes the model in a line-oriented text format:
/// a header with sizes, `obj` lines for nonzero objective coefficients,
/// `cov` lines (`c[a] <= slope*|x|_a + rhs` with the incident sets listed),
/// `box` lines (`x[i] <= 1`), and `eq` lines (one per part).
pub fn dump_lp(model: &LpModel) -> String {
    let mut out = String::new();
    out.push_str("# phi-coverage lp relaxation\n");
    out.push_str("# variables: x[0..m) set indicators in [0,1], c[0..n) element scores\n");
    out.push_str(&format!("m {}\nn {}\n", model.m, model.n));
    for (a, w) in model.objective[model.m..].iter().enumerate() {
        if *w != 0.0 {
            out.push_str(&format!("obj c{a} {w}\n"));
        }
    }
    out.push_str("# cov: c[a] <= slope * (sum of x[i] for i in incident) + rhs\n");
    for row in &model.coverage_rows {
        let incident: Vec<String> = model.incident[row.element]
            .iter()
            .map(|i| i.to_string())
            .collect();
        out.push_str(&format!(
            "cov a={} slope={} rhs={} incident={}\n",
            row.element,
            row.slope,
            row.rhs,
            incident.join(",")
        ));
    }
    for i in 0..model.m {
        out.push_str(&format!("box x{i} <= 1\n"));
    }
    for (p, (members, d)) in model.equalities.iter().enumerate() {
        let members: Vec<String> = members.iter().map(|i| i.to_string()).collect();
        out.push_str(&format!("eq part={p} members={} rhs={d}\n", members.join(",")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::CountingFunction;
    use crate::instance::{evaluate, random_instance};

    fn phi(spec: &str) -> CountingFunction {
        CountingFunction::parse(spec).unwrap()
    }

    fn feasible_and_bounded(
        model: &LpModel,
        sol: &FractionalSolution,
        f: &CountingFunction,
    ) {
        for (a, &ca) in sol.c.iter().enumerate() {
            let coverage: f64 = model.incident[a].iter().map(|&i| sol.x[i]).sum();
            let cap = f.value_at(coverage).unwrap();
            assert!(ca <= cap + FEASIBILITY_TOL, "c[{a}] = {ca} > phi = {cap}");
        }
    }

    #[test]
    fn census_and_chord_merging() {
        // n=1, m=2, cardinality: 3 variables, declared rows 2*1 + 2 + 1
        let inst = CoverageInstance::new(1, vec![1.0], vec![vec![0], vec![0]]).unwrap();
        let model =
            build_lp(&inst, &phi("pav"), &Constraint::Cardinality { k: 1 }).unwrap();
        assert_eq!(model.objective.len(), 3);
        assert_eq!(model.declared_rows, 5);
        assert_eq!(model.coverage_rows.len(), 2); // pav slopes 1, 1/2 both kept
        assert_eq!(model.equalities.len(), 1);

        // plain coverage: slopes 1, 0, 0, ... merge to two rows per element,
        // and the flat row reads c_a <= 1
        let inst =
            CoverageInstance::new(2, vec![1.0, 1.0], vec![vec![0], vec![0, 1], vec![1]])
                .unwrap();
        let model =
            build_lp(&inst, &phi("threshold:l=1"), &Constraint::Cardinality { k: 2 })
                .unwrap();
        assert_eq!(model.declared_rows, (2 + 1) * 3 + 1);
        assert_eq!(model.coverage_rows.len(), 4);
        let flat: Vec<_> =
            model.coverage_rows.iter().filter(|r| r.slope == 0.0).collect();
        assert_eq!(flat.len(), 2);
        assert!(flat.iter().all(|r| r.rhs == 1.0));

        // two parts -> two equality rows
        let cons = Constraint::Partition {
            parts: vec![vec![0, 1], vec![2]],
            capacities: vec![1, 1],
        };
        let model = build_lp(&inst, &phi("pav"), &cons).unwrap();
        assert_eq!(model.equalities.len(), 2);
        assert_eq!(model.declared_rows, (2 + 1) * 3 + 2);
    }

    #[test]
    fn disjoint_sets_pick_the_largest() {
        // disjoint sets of sizes 3, 2, 1 over 6 unit-weight elements
        let inst = CoverageInstance::new(
            6,
            vec![1.0; 6],
            vec![vec![0, 1, 2], vec![3, 4], vec![5]],
        )
        .unwrap();
        let f = phi("threshold:l=1");
        let model = build_lp(&inst, &f, &Constraint::Cardinality { k: 2 }).unwrap();
        let sol = solve_lp(&model).unwrap();
        assert!((sol.objective - 5.0).abs() < OPTIMALITY_TOL, "{}", sol.objective);
        feasible_and_bounded(&model, &sol, &f);
    }

    #[test]
    fn k_equals_m_forces_all_ones() {
        let inst = CoverageInstance::new(
            3,
            vec![0.5, 2.0, 1.0],
            vec![vec![0, 2], vec![0, 1], vec![1, 2]],
        )
        .unwrap();
        let f = phi("geo:p=0.3");
        let model = build_lp(&inst, &f, &Constraint::Cardinality { k: 3 }).unwrap();
        let sol = solve_lp(&model).unwrap();
        assert!(sol.x.iter().all(|&xi| (xi - 1.0).abs() < 1e-9));
        let want = evaluate(&inst, &f, &[0, 1, 2]).unwrap();
        assert!((sol.objective - want).abs() < OPTIMALITY_TOL);
    }

    #[test]
    fn shared_element_saturates_at_phi_of_k() {
        // one element in all m=5 sets, k=3: optimum is phi(3)
        let inst = CoverageInstance::new(1, vec![1.0], vec![vec![0]; 5]).unwrap();
        let f = phi("pav");
        let model = build_lp(&inst, &f, &Constraint::Cardinality { k: 3 }).unwrap();
        let sol = solve_lp(&model).unwrap();
        let h3 = 1.0 + 0.5 + 1.0 / 3.0;
        assert!((sol.objective - h3).abs() < OPTIMALITY_TOL, "{}", sol.objective);
        feasible_and_bounded(&model, &sol, &f);
    }

    #[test]
    fn relaxation_dominates_every_integral_point() {
        for seed in 0..8u64 {
            let inst = random_instance(6, 6, 0.5, (0.5, 2.0), seed).unwrap();
            for f in [phi("threshold:l=2"), phi("pav"), phi("geo:p=0.3")] {
                let k = 3;
                let model =
                    build_lp(&inst, &f, &Constraint::Cardinality { k }).unwrap();
                let sol = solve_lp(&model).unwrap();
                feasible_and_bounded(&model, &sol, &f);
                // enumerate all C(6,3) = 20 selections
                let mut best: f64 = 0.0;
                for s in all_k_subsets(6, k) {
                    best = best.max(evaluate(&inst, &f, &s).unwrap());
                }
                assert!(
                    sol.objective >= best - OPTIMALITY_TOL,
                    "lp {} < integral {} (seed {seed})",
                    sol.objective,
                    best
                );
            }
        }
    }

    #[test]
    fn partition_constraint_is_respected() {
        let inst = random_instance(8, 6, 0.5, (1.0, 1.0), 4).unwrap();
        let cons = Constraint::Partition {
            parts: vec![vec![0, 1, 2], vec![3, 4, 5]],
            capacities: vec![2, 1],
        };
        let f = phi("pav");
        let model = build_lp(&inst, &f, &cons).unwrap();
        let sol = solve_lp(&model).unwrap();
        let s0: f64 = sol.x[..3].iter().sum();
        let s1: f64 = sol.x[3..].iter().sum();
        assert!((s0 - 2.0).abs() < FEASIBILITY_TOL);
        assert!((s1 - 1.0).abs() < FEASIBILITY_TOL);
        feasible_and_bounded(&model, &sol, &f);
    }

    #[test]
    fn row_order_does_not_change_the_objective() {
        let inst = random_instance(7, 5, 0.6, (0.5, 3.0), 2).unwrap();
        let f = phi("geo:p=0.5");
        let model = build_lp(&inst, &f, &Constraint::Cardinality { k: 2 }).unwrap();
        let base = solve_lp(&model).unwrap();
        let mut permuted = model.clone();
        permuted.coverage_rows.reverse();
        permuted.coverage_rows.rotate_left(3);
        let other = solve_lp(&permuted).unwrap();
        assert!(
            (base.objective - other.objective).abs() < OPTIMALITY_TOL,
            "{} vs {}",
            base.objective,
            other.objective
        );
    }

    #[test]
    fn dump_lists_every_row() {
        let inst = CoverageInstance::new(1, vec![2.5], vec![vec![0], vec![0]]).unwrap();
        let model =
            build_lp(&inst, &phi("pav"), &Constraint::Cardinality { k: 1 }).unwrap();
        let text = dump_lp(&model);
        assert!(text.contains("m 2\nn 1\n"));
        assert!(text.contains("obj c0 2.5"));
        assert!(text.contains("cov a=0 slope=1 rhs=0 incident=0,1"));
        assert!(text.contains("cov a=0 slope=0.5 rhs=0.5 incident=0,1"));
        assert!(text.contains("box x0 <= 1"));
        assert!(text.contains("box x1 <= 1"));
        assert!(text.contains("eq part=0 members=0,1 rhs=1"));
    }

    fn all_k_subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = Vec::new();
        fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for i in start..m {
                cur.push(i);
                rec(i + 1, m, k, cur, out);
                cur.pop();
            }
        }
        rec(0, m, k, &mut cur, &mut out);
        out
    }
}
