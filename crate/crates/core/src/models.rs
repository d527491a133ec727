//! Deterministic schedules and positive-martingale generators used to
//! instantiate rational kernels `pi_i = alpha_i + beta_i * N_i`.

use std::collections::{BTreeMap, HashMap};
use std::ops::Deref;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::filtration::{AdaptedProcess, FiltrationTree, NodeRef};

/// Tolerance on `p*u + (1-p)*d = 1` and on branch probabilities.
pub const MARTINGALE_CONDITION_TOLERANCE: f64 = 1e-12;

/// Node budget for exact population trees.
pub const DEFAULT_NODE_CAP: usize = 100_000;

/// Strictly positive, strictly decreasing deterministic sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Schedule(Vec<f64>);

impl Schedule {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        validate_schedule(&values)?;
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for Schedule {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Schedule {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<Schedule> for Vec<f64> {
    fn from(s: Schedule) -> Self {
        s.0
    }
}

pub(crate) fn validate_schedule(values: &[f64]) -> Result<()> {
    for (index, &value) in values.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonPositiveSchedule { index, value });
        }
        if index > 0 && !(value < values[index - 1]) {
            return Err(Error::ScheduleNotDecreasing { index });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `initial * ratio^i`, ratio in (0, 1).
    Geometric {
        initial: f64,
        ratio: f64,
    },
    Explicit {
        values: Vec<f64>,
    },
}

/// Schedule on depths `0..=horizon`.
pub fn gen_schedule(kind: &ScheduleKind, horizon: usize) -> Result<Schedule> {
    let values = match kind {
        ScheduleKind::Geometric { initial, ratio } => {
            if !(*initial > 0.0) {
                return Err(Error::NonPositiveSchedule {
                    index: 0,
                    value: *initial,
                });
            }
            if !(*ratio > 0.0) {
                return Err(Error::NonPositiveSchedule {
                    index: 1,
                    value: initial * ratio,
                });
            }
            if !(*ratio < 1.0) {
                return Err(Error::ScheduleNotDecreasing { index: 1 });
            }
            let mut values = Vec::with_capacity(horizon + 1);
            let mut v = *initial;
            for _ in 0..=horizon {
                values.push(v);
                v *= ratio;
            }
            values
        }
        ScheduleKind::Explicit { values } => {
            if values.len() != horizon + 1 {
                return Err(Error::ScheduleLength {
                    needed: horizon + 1,
                    found: values.len(),
                });
            }
            values.clone()
        }
    };
    Schedule::new(values)
}

/// Offspring distribution of a Galton-Watson process with finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringLaw {
    /// `(count, probability)` sorted by count.
    pmf: Vec<(u64, f64)>,
}

impl OffspringLaw {
    pub fn new(pmf: impl IntoIterator<Item = (u64, f64)>) -> Result<Self> {
        let mut merged: BTreeMap<u64, f64> = BTreeMap::new();
        for (count, p) in pmf {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidOffspringLaw(format!(
                    "probability {p} for {count} offspring"
                )));
            }
            *merged.entry(count).or_default() += p;
        }
        if let Some(&mass) = merged.get(&0) {
            if mass > 0.0 {
                return Err(Error::ExtinctionMassPresent { mass });
            }
        }
        let pmf: Vec<(u64, f64)> = merged.into_iter().filter(|&(_, p)| p > 0.0).collect();
        if pmf.is_empty() {
            return Err(Error::InvalidOffspringLaw("empty support".into()));
        }
        let total: f64 = pmf.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > MARTINGALE_CONDITION_TOLERANCE {
            return Err(Error::InvalidOffspringLaw(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(Self { pmf })
    }

    pub fn pmf(&self) -> &[(u64, f64)] {
        &self.pmf
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().map(|&(k, p)| k as f64 * p).sum()
    }

    fn convolve(&self, dist: &[(u64, f64)]) -> Vec<(u64, f64)> {
        let mut out: BTreeMap<u64, f64> = BTreeMap::new();
        for &(a, pa) in dist {
            for &(b, pb) in &self.pmf {
                *out.entry(a + b).or_default() += pa * pb;
            }
        }
        out.into_iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MartingaleSpec {
    MultiplicativeBinomial {
        up: f64,
        down: f64,
        p: f64,
        initial: f64,
    },
    /// Offspring probabilities keyed by offspring count.
    Branching {
        #[serde(deserialize_with = "count_keys")]
        offspring: BTreeMap<u64, f64>,
        initial: u64,
        depth: usize,
    },
    Constant {
        value: f64,
    },
}

// Tagged enums buffer their content, so JSON object keys arrive as strings.
fn count_keys<'de, D: Deserializer<'de>>(
    de: D,
) -> std::result::Result<BTreeMap<u64, f64>, D::Error> {
    BTreeMap::<String, f64>::deserialize(de)?
        .into_iter()
        .map(|(k, p)| {
            k.trim().parse::<u64>().map(|k| (k, p)).map_err(|_| {
                serde::de::Error::custom(format!("offspring count {k:?} is not an integer"))
            })
        })
        .collect()
}

impl MartingaleSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::MultiplicativeBinomial {
                up,
                down,
                p,
                initial,
            } => check_binomial_parameters(*up, *down, *p, *initial),
            Self::Branching {
                offspring, initial, ..
            } => {
                if *initial == 0 {
                    return Err(Error::InvalidParameter(
                        "initial population must be at least 1".into(),
                    ));
                }
                OffspringLaw::new(offspring.iter().map(|(&k, &p)| (k, p))).map(|_| ())
            }
            Self::Constant { value } => {
                if *value > 0.0 && value.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "constant martingale value {value} must be positive"
                    )))
                }
            }
        }
    }
}

fn check_binomial_parameters(up: f64, down: f64, p: f64, initial: f64) -> Result<()> {
    if !(up > 0.0 && down > 0.0 && initial > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "factors and initial value must be positive (u = {up}, d = {down}, N_0 = {initial})"
        )));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "branch probability {p} outside (0, 1)"
        )));
    }
    let expectation = p * up + (1.0 - p) * down;
    if (expectation - 1.0).abs() > MARTINGALE_CONDITION_TOLERANCE {
        return Err(Error::MartingaleConditionViolated { expectation });
    }
    Ok(())
}

/// Multiplies by `up` along the first child and `down` along the second.
pub fn gen_binomial_martingale(
    tree: &FiltrationTree,
    up: f64,
    down: f64,
    p: f64,
    initial: f64,
) -> Result<AdaptedProcess> {
    check_binomial_parameters(up, down, p, initial)?;
    for d in 0..tree.depth() {
        for node in tree.nodes(d) {
            let children = tree.children(node);
            if children.len() != 2 {
                return Err(Error::TreeNotBinary { node });
            }
            let first = NodeRef::new(d + 1, children.start);
            let found = tree.transition_probability(first);
            if (found - p).abs() > MARTINGALE_CONDITION_TOLERANCE {
                return Err(Error::BranchProbabilityMismatch {
                    node,
                    expected: p,
                    found,
                });
            }
        }
    }
    let mut values: Vec<Vec<f64>> = vec![vec![initial]];
    for d in 1..=tree.depth() {
        let field = tree
            .nodes(d)
            .map(|node| {
                let parent = tree.parent(node).expect("non-root node");
                let factor = if node.index == tree.children(parent).start {
                    up
                } else {
                    down
                };
                values[d - 1][parent.index] * factor
            })
            .collect();
        values.push(field);
    }
    AdaptedProcess::new(tree, 0, values)
}

/// Exact Galton-Watson population tree and its normalized martingale.
#[derive(Debug, Clone)]
pub struct BranchingModel {
    pub tree: FiltrationTree,
    /// Population `Z_i` (integer valued).
    pub population: AdaptedProcess,
    /// `N_i = Z_i / mu^i`.
    pub martingale: AdaptedProcess,
    pub mean: f64,
}

/// Enumerates every attainable population path up to `depth`. Children of a
/// node are the attainable next populations in ascending order, weighted by
/// the exact law of a sum of `Z` independent offspring counts.
pub fn gen_branching_martingale(
    depth: usize,
    law: &OffspringLaw,
    initial: u64,
    node_cap: usize,
) -> Result<BranchingModel> {
    if depth == 0 {
        return Err(Error::MalformedTree("depth must be at least 1".into()));
    }
    if initial == 0 {
        return Err(Error::InvalidParameter(
            "initial population must be at least 1".into(),
        ));
    }
    let mean = law.mean();
    let mut cache: HashMap<u64, Vec<(u64, f64)>> = HashMap::new();
    // sum laws for 1..=z individuals, built incrementally
    let mut sums: Vec<Vec<(u64, f64)>> = vec![vec![(0, 1.0)]];
    let mut populations: Vec<Vec<u64>> = vec![vec![initial]];
    let mut child_probabilities = Vec::with_capacity(depth);
    let mut total_nodes = 1usize;
    for d in 0..depth {
        let mut next = Vec::new();
        let mut per_node = Vec::with_capacity(populations[d].len());
        for &z in &populations[d] {
            let dist = cache.entry(z).or_insert_with(|| {
                while sums.len() <= z as usize {
                    let last = sums.last().expect("seeded");
                    let conv = law.convolve(last);
                    sums.push(conv);
                }
                sums[z as usize].clone()
            });
            total_nodes += dist.len();
            if total_nodes > node_cap {
                return Err(Error::SupportTooLarge { cap: node_cap });
            }
            next.extend(dist.iter().map(|&(k, _)| k));
            per_node.push(dist.iter().map(|&(_, p)| p).collect::<Vec<_>>());
        }
        child_probabilities.push(per_node);
        populations.push(next);
    }
    let tree = FiltrationTree::from_child_probabilities(child_probabilities, None)?;
    let population = AdaptedProcess::new(
        &tree,
        0,
        populations
            .iter()
            .map(|f| f.iter().map(|&z| z as f64).collect())
            .collect(),
    )?;
    let martingale = population.map(|node, z| z / mean.powi(node.depth as i32));
    Ok(BranchingModel {
        tree,
        population,
        martingale,
        mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtration::is_martingale;

    #[test]
    fn geometric_schedule_halves() {
        let s = gen_schedule(
            &ScheduleKind::Geometric {
                initial: 1.0,
                ratio: 0.5,
            },
            2,
        )
        .unwrap();
        assert_eq!(s.values(), &[1.0, 0.5, 0.25]);
    }

    #[test]
    fn explicit_schedules() {
        let ok = gen_schedule(
            &ScheduleKind::Explicit {
                values: vec![3.0, 2.0, 1.0],
            },
            2,
        );
        assert!(ok.is_ok());
        let flat = gen_schedule(
            &ScheduleKind::Explicit {
                values: vec![1.0, 1.0, 0.5],
            },
            2,
        );
        assert!(matches!(
            flat,
            Err(Error::ScheduleNotDecreasing { index: 1 })
        ));
        let neg = Schedule::new(vec![1.0, -1.0]);
        assert!(matches!(
            neg,
            Err(Error::NonPositiveSchedule { index: 1, .. })
        ));
        let bad_ratio = gen_schedule(
            &ScheduleKind::Geometric {
                initial: 1.0,
                ratio: 1.5,
            },
            2,
        );
        assert!(matches!(
            bad_ratio,
            Err(Error::ScheduleNotDecreasing { .. })
        ));
    }

    #[test]
    fn binomial_martingale_examples() {
        let tree = FiltrationTree::binomial(2, 0.5).unwrap();
        let flat = gen_binomial_martingale(&tree, 1.0, 1.0, 0.5, 1.0).unwrap();
        assert!(flat.iter().all(|(_, v)| v == 1.0));

        let n = gen_binomial_martingale(&tree, 1.2, 0.8, 0.5, 1.0).unwrap();
        assert_eq!(n.at(1).unwrap(), &[1.2, 0.8]);
        let leaves = n.at(2).unwrap();
        for (got, want) in leaves.iter().zip([1.44, 0.96, 0.96, 0.64]) {
            assert!((got - want).abs() < 1e-15);
        }
        let report = is_martingale(&tree, &n, 1e-13).unwrap();
        assert!(report.pass, "{report}");

        let err = gen_binomial_martingale(&tree, 1.2, 0.9, 0.5, 1.0).unwrap_err();
        match err {
            Error::MartingaleConditionViolated { expectation } => {
                assert!((expectation - 1.05).abs() < 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn binomial_martingale_needs_binary_tree() {
        let tree = FiltrationTree::from_branching(&[3], None, None).unwrap();
        let err = gen_binomial_martingale(&tree, 1.2, 0.8, 0.5, 1.0).unwrap_err();
        assert!(matches!(err, Error::TreeNotBinary { .. }));
        let skewed = FiltrationTree::binomial(1, 0.3).unwrap();
        let err = gen_binomial_martingale(&skewed, 1.2, 0.8, 0.5, 1.0).unwrap_err();
        assert!(matches!(err, Error::BranchProbabilityMismatch { .. }));
    }

    #[test]
    fn deterministic_offspring_keeps_population() {
        let law = OffspringLaw::new([(1, 1.0)]).unwrap();
        let model = gen_branching_martingale(3, &law, 4, DEFAULT_NODE_CAP).unwrap();
        assert_eq!(model.mean, 1.0);
        assert_eq!(model.tree.node_count(), 4);
        assert!(model.martingale.iter().all(|(_, v)| v == 4.0));
    }

    #[test]
    fn one_or_two_offspring_enumeration() {
        let law = OffspringLaw::new([(1, 0.5), (2, 0.5)]).unwrap();
        let model = gen_branching_martingale(2, &law, 1, DEFAULT_NODE_CAP).unwrap();
        assert_eq!(model.mean, 1.5);
        assert_eq!(model.population.at(1).unwrap(), &[1.0, 2.0]);
        let n1 = model.martingale.at(1).unwrap();
        assert!((n1[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((n1[1] - 4.0 / 3.0).abs() < 1e-15);
        // population 2 splits into 2, 3, 4 with weights 1/4, 1/2, 1/4
        assert_eq!(model.population.at(2).unwrap(), &[1.0, 2.0, 2.0, 3.0, 4.0]);
        let probs: Vec<f64> = model
            .tree
            .nodes(2)
            .map(|n| model.tree.transition_probability(n))
            .collect();
        assert_eq!(probs, vec![0.5, 0.5, 0.25, 0.5, 0.25]);
        let report = is_martingale(&model.tree, &model.martingale, 1e-13).unwrap();
        assert!(report.pass, "{report}");
    }

    #[test]
    fn extinction_and_cap_are_rejected() {
        let err = OffspringLaw::new([(0, 0.1), (2, 0.9)]).unwrap_err();
        assert!(matches!(err, Error::ExtinctionMassPresent { .. }));
        let law = OffspringLaw::new([(1, 0.5), (3, 0.5)]).unwrap();
        let err = gen_branching_martingale(6, &law, 2, 200).unwrap_err();
        assert!(matches!(err, Error::SupportTooLarge { cap: 200 }));
    }
}
