//! Weighted coverage instances, feasibility constraints, JSON I/O, and
//! instance generators.
//!
//! The on-disk format is a single JSON object:
//!
//! ```json
//! {
//!   "n": 3,
//!   "weights": ["0.5", "2", "1"],
//!   "sets": [[0, 2], [0, 1]],
//!   "constraint": {"type": "cardinality", "k": 1},
//!   "phi": "threshold:l=2",
//!   "seed": 7
//! }
//! ```
//!
//! Weights are decimal strings so files stay exact and diff-friendly.
//! Partition constraints use
//! `{"type": "partition", "parts": [[0,1],[2]], "capacities": [1,1]}`.
//! Schema problems are reported with the JSON path of the offending field.

pub mod gadget;

use serde::{Deserialize, Serialize};

use crate::counting::{CountingFunction, DEFAULT_HORIZON};
use crate::{Error, Result};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A ground set of `n` weighted elements plus `m` cover sets, with the
/// element -> sets incidence cached for fast marginal evaluation.
#[derive(Debug, Clone)]
pub struct CoverageInstance {
    n: usize,
    weights: Vec<f64>,
    sets: Vec<Vec<usize>>,
    incidence: Vec<Vec<usize>>,
}

impl CoverageInstance {
    /// Validates and builds an instance. Sets are sorted; duplicate element
    /// indices within a set are rejected.
    pub fn new(n: usize, weights: Vec<f64>, mut sets: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("an instance needs at least one element".into()));
        }
        if weights.len() != n {
            return Err(Error::Domain(format!(
                "expected {n} weights, got {}",
                weights.len()
            )));
        }
        for (a, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::Domain(format!("weight of element {a} must be positive, got {w}")));
            }
        }
        if sets.is_empty() {
            return Err(Error::Domain("an instance needs at least one cover set".into()));
        }
        for (i, set) in sets.iter_mut().enumerate() {
            set.sort_unstable();
            for pair in set.windows(2) {
                if pair[0] == pair[1] {
                    return Err(Error::Domain(format!(
                        "set {i} lists element {} twice",
                        pair[0]
                    )));
                }
            }
            if let Some(&last) = set.last() {
                if last >= n {
                    return Err(Error::Domain(format!(
                        "set {i} references element {last}, but n = {n}"
                    )));
                }
            }
        }
        let mut incidence = vec![Vec::new(); n];
        for (i, set) in sets.iter().enumerate() {
            for &a in set {
                incidence[a].push(i);
            }
        }
        Ok(CoverageInstance { n, weights, sets, incidence })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of cover sets.
    pub fn m(&self) -> usize {
        self.sets.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    /// Indices of the sets containing element `a`.
    pub fn sets_containing(&self, a: usize) -> &[usize] {
        &self.incidence[a]
    }

    /// Per-element coverage counts under a selection of set indices.
    pub fn coverage_counts(&self, selection: &[usize]) -> Vec<usize> {
        let mut counts = vec![0usize; self.n];
        for &i in selection {
            for &a in &self.sets[i] {
                counts[a] += 1;
            }
        }
        counts
    }
}

/// Feasible families of sets: exactly `k` sets, or a partition-matroid base
/// (exactly `capacities[p]` sets from each part).
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    Cardinality { k: usize },
    Partition { parts: Vec<Vec<usize>>, capacities: Vec<usize> },
}

impl Constraint {
    pub fn validate(&self, m: usize) -> Result<()> {
        match self {
            Constraint::Cardinality { k } => {
                if *k == 0 || *k > m {
                    return Err(Error::Domain(format!("k = {k} must satisfy 1 <= k <= m = {m}")));
                }
            }
            Constraint::Partition { parts, capacities } => {
                if parts.len() != capacities.len() {
                    return Err(Error::Domain(format!(
                        "{} parts but {} capacities",
                        parts.len(),
                        capacities.len()
                    )));
                }
                let mut seen = vec![false; m];
                for (p, part) in parts.iter().enumerate() {
                    if part.is_empty() {
                        return Err(Error::Domain(format!("part {p} is empty")));
                    }
                    for &i in part {
                        if i >= m {
                            return Err(Error::Domain(format!(
                                "part {p} references set {i}, but m = {m}"
                            )));
                        }
                        if seen[i] {
                            return Err(Error::Domain(format!(
                                "set {i} appears in more than one part"
                            )));
                        }
                        seen[i] = true;
                    }
                    if capacities[p] > part.len() {
                        return Err(Error::Domain(format!(
                            "capacity {} of part {p} exceeds its size {}",
                            capacities[p],
                            part.len()
                        )));
                    }
                }
                if let Some(i) = seen.iter().position(|&s| !s) {
                    return Err(Error::Domain(format!("set {i} belongs to no part")));
                }
            }
        }
        Ok(())
    }

    /// Uniform view: cardinality k is a single part covering all sets.
    /// Parts come back sorted.
    pub fn normalized_parts(&self, m: usize) -> (Vec<Vec<usize>>, Vec<usize>) {
        match self {
            Constraint::Cardinality { k } => (vec![(0..m).collect()], vec![*k]),
            Constraint::Partition { parts, capacities } => {
                let mut parts: Vec<Vec<usize>> = parts.clone();
                for part in &mut parts {
                    part.sort_unstable();
                }
                (parts, capacities.clone())
            }
        }
    }

    /// Total number of sets in any feasible base.
    pub fn base_size(&self) -> usize {
        match self {
            Constraint::Cardinality { k } => *k,
            Constraint::Partition { capacities, .. } => capacities.iter().sum(),
        }
    }

    /// Whether a (duplicate-free) selection is a base of the constraint.
    pub fn is_base(&self, selection: &[usize], m: usize) -> bool {
        match self {
            Constraint::Cardinality { k } => {
                selection.len() == *k && selection.iter().all(|&i| i < m)
            }
            Constraint::Partition { parts, capacities } => {
                let mut part_of = vec![usize::MAX; m];
                for (p, part) in parts.iter().enumerate() {
                    for &i in part {
                        part_of[i] = p;
                    }
                }
                let mut used = vec![0usize; parts.len()];
                for &i in selection {
                    if i >= m || part_of[i] == usize::MAX {
                        return false;
                    }
                    used[part_of[i]] += 1;
                }
                used == *capacities
            }
        }
    }
}

/// Total weighted phi-coverage of a selection of distinct set indices.
pub fn evaluate(inst: &CoverageInstance, phi: &CountingFunction, selection: &[usize]) -> Result<f64> {
    let mut seen = vec![false; inst.m()];
    for &i in selection {
        if i >= inst.m() {
            return Err(Error::Domain(format!("selection references set {i}, but m = {}", inst.m())));
        }
        if seen[i] {
            return Err(Error::Domain(format!("selection lists set {i} twice")));
        }
        seen[i] = true;
    }
    let counts = inst.coverage_counts(selection);
    Ok(counts
        .iter()
        .zip(&inst.weights)
        .map(|(&c, &w)| w * phi.at_int(c))
        .sum())
}

/// A selection together with its objective value; the value is computed at
/// construction so the two cannot drift apart.
#[derive(Debug, Clone)]
pub struct SelectionValue {
    pub selected: Vec<usize>,
    pub value: f64,
}

impl SelectionValue {
    pub fn new(
        inst: &CoverageInstance,
        phi: &CountingFunction,
        mut selected: Vec<usize>,
    ) -> Result<Self> {
        selected.sort_unstable();
        let value = evaluate(inst, phi, &selected)?;
        Ok(SelectionValue { selected, value })
    }
}

// ---------------------------------------------------------------------------
// JSON I/O

#[derive(Serialize, Deserialize)]
struct FileConstraint {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parts: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    capacities: Option<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct FileInstance {
    n: usize,
    weights: Vec<String>,
    sets: Vec<Vec<usize>>,
    constraint: FileConstraint,
    phi: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

/// A fully parsed instance file.
#[derive(Debug)]
pub struct LoadedInstance {
    pub instance: CoverageInstance,
    pub constraint: Constraint,
    /// Counting function from the file's `phi` field, horizon already
    /// extended to cover the instance's set count.
    pub phi: CountingFunction,
    pub phi_spec: String,
    pub seed: Option<u64>,
}

fn schema_err(path: &str, message: impl Into<String>) -> Error {
    Error::Schema { path: path.to_string(), message: message.into() }
}

pub fn load_instance_str(text: &str) -> Result<LoadedInstance> {
    let file: FileInstance = serde_json::from_str(text)
        .map_err(|e| schema_err("$", e.to_string()))?;

    let mut weights = Vec::with_capacity(file.weights.len());
    for (a, raw) in file.weights.iter().enumerate() {
        let w: f64 = raw
            .trim()
            .parse()
            .map_err(|_| schema_err(&format!("weights[{a}]"), format!("'{raw}' is not a decimal number")))?;
        if !w.is_finite() || w <= 0.0 {
            return Err(schema_err(&format!("weights[{a}]"), format!("weight {w} must be positive and finite")));
        }
        weights.push(w);
    }
    if weights.len() != file.n {
        return Err(schema_err("weights", format!("expected n = {} entries, got {}", file.n, weights.len())));
    }

    for (i, set) in file.sets.iter().enumerate() {
        for (j, &a) in set.iter().enumerate() {
            if a >= file.n {
                return Err(schema_err(&format!("sets[{i}][{j}]"), format!("element {a} out of range (n = {})", file.n)));
            }
        }
    }
    let m = file.sets.len();
    let instance = CoverageInstance::new(file.n, weights, file.sets)
        .map_err(|e| schema_err("sets", e.to_string()))?;

    let constraint = match file.constraint.kind.as_str() {
        "cardinality" => {
            let k = file.constraint.k.ok_or_else(|| schema_err("constraint.k", "missing for type 'cardinality'"))?;
            Constraint::Cardinality { k }
        }
        "partition" => {
            let parts = file.constraint.parts.ok_or_else(|| schema_err("constraint.parts", "missing for type 'partition'"))?;
            let capacities = file
                .constraint
                .capacities
                .ok_or_else(|| schema_err("constraint.capacities", "missing for type 'partition'"))?;
            Constraint::Partition { parts, capacities }
        }
        other => {
            return Err(schema_err("constraint.type", format!("unknown constraint type '{other}'")))
        }
    };
    constraint
        .validate(m)
        .map_err(|e| schema_err("constraint", e.to_string()))?;

    let phi = CountingFunction::parse_with_horizon(&file.phi, DEFAULT_HORIZON.max(m + 2))
        .map_err(|e| schema_err("phi", e.to_string()))?;

    Ok(LoadedInstance {
        instance,
        constraint,
        phi,
        phi_spec: file.phi,
        seed: file.seed,
    })
}

pub fn load_instance(path: &std::path::Path) -> Result<LoadedInstance> {
    load_instance_str(&std::fs::read_to_string(path)?)
}

/// Serializes an instance to the JSON schema (stable field order, trailing
/// newline; weights rendered as shortest round-tripping decimals).
pub fn instance_to_json(
    inst: &CoverageInstance,
    constraint: &Constraint,
    phi_spec: &str,
    seed: Option<u64>,
) -> Result<String> {
    let constraint = match constraint {
        Constraint::Cardinality { k } => FileConstraint {
            kind: "cardinality".into(),
            k: Some(*k),
            parts: None,
            capacities: None,
        },
        Constraint::Partition { parts, capacities } => FileConstraint {
            kind: "partition".into(),
            k: None,
            parts: Some(parts.clone()),
            capacities: Some(capacities.clone()),
        },
    };
    let file = FileInstance {
        n: inst.n(),
        weights: inst.weights().iter().map(|w| w.to_string()).collect(),
        sets: inst.sets().to_vec(),
        constraint,
        phi: phi_spec.to_string(),
        seed,
    };
    Ok(serde_json::to_string_pretty(&file)? + "\n")
}

pub fn save_instance(
    inst: &CoverageInstance,
    constraint: &Constraint,
    phi_spec: &str,
    seed: Option<u64>,
    path: &std::path::Path,
) -> Result<()> {
    std::fs::write(path, instance_to_json(inst, constraint, phi_spec, seed)?)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Generators

/// Seeded random instance: each element joins each set independently with
/// probability `density`, weights are uniform in `weight_range`.
///
/// The generator is ChaCha8 seeded with `seed`; draws happen in a fixed
/// order (all `n` weights first, then memberships row by row over sets), so
/// identical arguments reproduce the identical instance on any platform.
pub fn random_instance(
    n: usize,
    m: usize,
    density: f64,
    weight_range: (f64, f64),
    seed: u64,
) -> Result<CoverageInstance> {
    if n == 0 || m == 0 {
        return Err(Error::Domain("n and m must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::Domain(format!("density {density} must lie in [0, 1]")));
    }
    let (lo, hi) = weight_range;
    if !(lo.is_finite() && hi.is_finite()) || lo <= 0.0 || hi < lo {
        return Err(Error::Domain(format!("weight range ({lo}, {hi}) must satisfy 0 < lo <= hi")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
    let mut sets = Vec::with_capacity(m);
    for _ in 0..m {
        let mut set = Vec::new();
        for a in 0..n {
            if rng.random::<f64>() < density {
                set.push(a);
            }
        }
        sets.push(set);
    }
    CoverageInstance::new(n, weights, sets)
}

/// Builds the coverage view of a resource-allocation problem: agent `i`
/// contributes one contiguous block of sets (one per action), and a feasible
/// base picks exactly one action per agent (partition matroid, capacities 1).
///
/// `action_sets[i][j]` lists the resources used when agent `i` plays its
/// `j`-th action; `weights` are the resource weights (so `n = weights.len()`).
pub fn from_resource_allocation(
    action_sets: &[Vec<Vec<usize>>],
    weights: Vec<f64>,
) -> Result<(CoverageInstance, Constraint)> {
    if action_sets.is_empty() {
        return Err(Error::Domain("need at least one agent".into()));
    }
    let mut sets = Vec::new();
    let mut parts = Vec::with_capacity(action_sets.len());
    for (agent, actions) in action_sets.iter().enumerate() {
        if actions.is_empty() {
            return Err(Error::Domain(format!("agent {agent} has no actions")));
        }
        let start = sets.len();
        sets.extend(actions.iter().cloned());
        parts.push((start..sets.len()).collect());
    }
    let n = weights.len();
    let instance = CoverageInstance::new(n, weights, sets)?;
    let capacities = vec![1; action_sets.len()];
    Ok((instance, Constraint::Partition { parts, capacities }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::CountingFunction;

    fn pav() -> CountingFunction {
        CountingFunction::parse("pav").unwrap()
    }

    #[test]
    fn evaluate_counts_multiplicity() {
        // one element of weight 2 covered by both selected sets: 2 * phi(2) = 3
        let inst = CoverageInstance::new(1, vec![2.0], vec![vec![0], vec![0]]).unwrap();
        let v = evaluate(&inst, &pav(), &[0, 1]).unwrap();
        assert!((v - 3.0).abs() < 1e-15);
        assert_eq!(evaluate(&inst, &pav(), &[]).unwrap(), 0.0);
        assert!(evaluate(&inst, &pav(), &[0, 0]).is_err());
        assert!(evaluate(&inst, &pav(), &[7]).is_err());
    }

    #[test]
    fn constructor_validation() {
        assert!(CoverageInstance::new(2, vec![1.0], vec![vec![0]]).is_err());
        assert!(CoverageInstance::new(2, vec![1.0, 0.0], vec![vec![0]]).is_err());
        assert!(CoverageInstance::new(2, vec![1.0, 1.0], vec![vec![0, 0]]).is_err());
        assert!(CoverageInstance::new(2, vec![1.0, 1.0], vec![vec![2]]).is_err());
        assert!(CoverageInstance::new(2, vec![1.0, 1.0], vec![]).is_err());
        let inst = CoverageInstance::new(2, vec![1.0, 1.0], vec![vec![1, 0]]).unwrap();
        assert_eq!(inst.sets()[0], vec![0, 1]); // sorted
        assert_eq!(inst.sets_containing(1), &[0]);
    }

    #[test]
    fn constraint_validation() {
        let card = Constraint::Cardinality { k: 3 };
        assert!(card.validate(5).is_ok());
        assert!(card.validate(2).is_err());
        assert!(Constraint::Cardinality { k: 0 }.validate(2).is_err());

        let part = Constraint::Partition {
            parts: vec![vec![0, 1], vec![2]],
            capacities: vec![1, 1],
        };
        assert!(part.validate(3).is_ok());
        assert!(part.is_base(&[0, 2], 3));
        assert!(!part.is_base(&[0, 1], 3));

        let overlap = Constraint::Partition {
            parts: vec![vec![0, 1], vec![1, 2]],
            capacities: vec![1, 1],
        };
        assert!(overlap.validate(3).is_err());
        let oversize = Constraint::Partition {
            parts: vec![vec![0], vec![1, 2]],
            capacities: vec![2, 1],
        };
        assert!(oversize.validate(3).is_err());
        let missing = Constraint::Partition { parts: vec![vec![0]], capacities: vec![1] };
        assert!(missing.validate(2).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let inst = CoverageInstance::new(
            3,
            vec![0.5, 2.0, 1.0],
            vec![vec![0, 2], vec![0, 1], vec![1, 2]],
        )
        .unwrap();
        let cons = Constraint::Partition {
            parts: vec![vec![0, 1], vec![2]],
            capacities: vec![1, 1],
        };
        let text = instance_to_json(&inst, &cons, "geo:p=0.3", Some(9)).unwrap();
        let loaded = load_instance_str(&text).unwrap();
        assert_eq!(loaded.instance.n(), 3);
        assert_eq!(loaded.instance.m(), 3);
        assert_eq!(loaded.instance.weights(), &[0.5, 2.0, 1.0]);
        assert_eq!(loaded.constraint, cons);
        assert_eq!(loaded.phi_spec, "geo:p=0.3");
        assert_eq!(loaded.seed, Some(9));
        // byte-stable re-serialization
        let again = instance_to_json(
            &loaded.instance,
            &loaded.constraint,
            &loaded.phi_spec,
            loaded.seed,
        )
        .unwrap();
        assert_eq!(text, again);
    }

    #[test]
    fn schema_errors_name_the_path() {
        let bad_weight = r#"{"n":1,"weights":["abc"],"sets":[[0]],"constraint":{"type":"cardinality","k":1},"phi":"pav"}"#;
        let err = load_instance_str(bad_weight).unwrap_err().to_string();
        assert!(err.contains("weights[0]"), "{err}");

        let bad_elem = r#"{"n":1,"weights":["1"],"sets":[[0,3]],"constraint":{"type":"cardinality","k":1},"phi":"pav"}"#;
        let err = load_instance_str(bad_elem).unwrap_err().to_string();
        assert!(err.contains("sets[0][1]"), "{err}");

        let bad_cap = r#"{"n":1,"weights":["1"],"sets":[[0],[0]],"constraint":{"type":"partition","parts":[[0],[1]],"capacities":[1,2]},"phi":"pav"}"#;
        let err = load_instance_str(bad_cap).unwrap_err().to_string();
        assert!(err.contains("constraint"), "{err}");
        assert!(err.contains("capacity 2"), "{err}");

        let bad_kind = r#"{"n":1,"weights":["1"],"sets":[[0]],"constraint":{"type":"knapsack"},"phi":"pav"}"#;
        let err = load_instance_str(bad_kind).unwrap_err().to_string();
        assert!(err.contains("constraint.type"), "{err}");

        let bad_phi = r#"{"n":1,"weights":["1"],"sets":[[0]],"constraint":{"type":"cardinality","k":1},"phi":"nope"}"#;
        let err = load_instance_str(bad_phi).unwrap_err().to_string();
        assert!(err.contains("phi"), "{err}");
    }

    #[test]
    fn phi_horizon_covers_the_instance() {
        // m = 70 sets: the loaded pav horizon must reach past 70
        let sets: Vec<Vec<usize>> = (0..70).map(|_| vec![0]).collect();
        let inst = CoverageInstance::new(1, vec![1.0], sets).unwrap();
        let text =
            instance_to_json(&inst, &Constraint::Cardinality { k: 70 }, "pav", None).unwrap();
        let loaded = load_instance_str(&text).unwrap();
        assert!(loaded.phi.horizon() >= 72);
    }

    #[test]
    fn random_instance_is_reproducible_and_respects_density() {
        let a = random_instance(10, 8, 0.4, (0.5, 2.0), 7).unwrap();
        let b = random_instance(10, 8, 0.4, (0.5, 2.0), 7).unwrap();
        assert_eq!(a.sets(), b.sets());
        assert_eq!(a.weights(), b.weights());
        let c = random_instance(10, 8, 0.4, (0.5, 2.0), 8).unwrap();
        assert!(a.sets() != c.sets() || a.weights() != c.weights());

        let full = random_instance(6, 4, 1.0, (1.0, 1.0), 3).unwrap();
        assert!(full.sets().iter().all(|s| s.len() == 6));
        assert!(full.weights().iter().all(|&w| w == 1.0));
        let empty_density = random_instance(6, 4, 0.0, (1.0, 1.0), 3).unwrap();
        assert!(empty_density.sets().iter().all(|s| s.is_empty()));

        assert!(random_instance(5, 5, 1.5, (1.0, 1.0), 0).is_err());
        assert!(random_instance(5, 5, 0.5, (0.0, 1.0), 0).is_err());
    }

    #[test]
    fn resource_allocation_reduction() {
        // two agents, one shared resource of weight 2; both choosing it gives
        // w * phi(2) = 2 * 1.5 = 3 under geo:p=0.5
        let phi = CountingFunction::parse("geo:p=0.5").unwrap();
        let (inst, cons) = from_resource_allocation(
            &[vec![vec![0]], vec![vec![0]]],
            vec![2.0],
        )
        .unwrap();
        assert_eq!(inst.m(), 2);
        match &cons {
            Constraint::Partition { parts, capacities } => {
                assert_eq!(parts, &vec![vec![0], vec![1]]);
                assert_eq!(capacities, &vec![1, 1]);
            }
            _ => panic!("expected partition"),
        }
        assert!(cons.is_base(&[0, 1], 2));
        let v = evaluate(&inst, &phi, &[0, 1]).unwrap();
        assert!((v - 3.0).abs() < 1e-15);

        assert!(from_resource_allocation(&[vec![]], vec![1.0]).is_err());
    }
}
