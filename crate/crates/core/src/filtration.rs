//! Finite filtered probability spaces realized as non-recombining event trees.
//!
//! A [`FiltrationTree`] of depth `N` carries the one-step transition
//! probabilities of every node; the information set at depth `i` is the
//! partition of paths by their depth-`i` ancestor. An [`AdaptedProcess`]
//! stores one value per node over a contiguous range of depths.
//!
//! Conditional expectations are evaluated by backward induction one level at
//! a time. Children are always folded left in declared order, so
//! `E_i[X_j]` computed directly and computed through an intermediate depth
//! `k` agree bit for bit.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the child-probability sum of every node.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-12;

/// Position of a node: its depth and its index within that depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeRef {
    pub depth: usize,
    pub index: usize,
}

impl NodeRef {
    pub const ROOT: NodeRef = NodeRef { depth: 0, index: 0 };

    pub fn new(depth: usize, index: usize) -> Self {
        Self { depth, index }
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node {} at depth {}", self.index, self.depth)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Level {
    parent: Vec<usize>,
    prob: Vec<f64>,
    /// `first_child[k]..first_child[k + 1]` are the children of node `k`;
    /// empty on the terminal level.
    first_child: Vec<usize>,
}

impl Level {
    fn width(&self) -> usize {
        self.prob.len()
    }
}

/// Validated event tree with one root, transition probabilities and
/// optional time labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FiltrationTree {
    levels: Vec<Level>,
    offsets: Vec<usize>,
    times: Option<Vec<f64>>,
}

impl FiltrationTree {
    /// General constructor: `child_probabilities[d][k]` lists the transition
    /// probabilities to the children of node `k` at depth `d`, for every
    /// depth `d < N`. Children at depth `d + 1` are numbered in the order
    /// they appear here.
    pub fn from_child_probabilities(
        child_probabilities: Vec<Vec<Vec<f64>>>,
        times: Option<Vec<f64>>,
    ) -> Result<Self> {
        let depth = child_probabilities.len();
        if depth == 0 {
            return Err(Error::MalformedTree("depth must be at least 1".into()));
        }
        let mut levels = vec![Level {
            parent: vec![0],
            prob: vec![1.0],
            first_child: Vec::new(),
        }];
        for (d, per_node) in child_probabilities.into_iter().enumerate() {
            let width = levels[d].width();
            if per_node.len() != width {
                return Err(Error::MalformedTree(format!(
                    "depth {d} has {width} nodes but {} child lists were given",
                    per_node.len()
                )));
            }
            let mut next = Level {
                parent: Vec::new(),
                prob: Vec::new(),
                first_child: Vec::new(),
            };
            let mut first_child = Vec::with_capacity(width + 1);
            for (k, probs) in per_node.into_iter().enumerate() {
                let node = NodeRef::new(d, k);
                if probs.is_empty() {
                    return Err(Error::MalformedTree(format!("{node} has no children")));
                }
                let mut sum = 0.0;
                for (c, &p) in probs.iter().enumerate() {
                    if !(p > 0.0 && p <= 1.0) {
                        return Err(Error::NonPositiveProbability {
                            node: NodeRef::new(d + 1, next.width() + c),
                            value: p,
                        });
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
                    return Err(Error::ProbabilitySumMismatch { node, sum });
                }
                first_child.push(next.width());
                next.parent.extend(std::iter::repeat_n(k, probs.len()));
                next.prob.extend(probs);
            }
            first_child.push(next.width());
            levels[d].first_child = first_child;
            levels.push(next);
        }
        if let Some(t) = &times {
            if t.len() != depth + 1 {
                return Err(Error::MalformedTree(format!(
                    "{} time labels given for {} depths",
                    t.len(),
                    depth + 1
                )));
            }
            for d in 1..t.len() {
                if !(t[d] > t[d - 1]) {
                    return Err(Error::NonIncreasingTimes { depth: d });
                }
            }
        }
        let mut offsets = Vec::with_capacity(levels.len());
        let mut total = 0;
        for level in &levels {
            offsets.push(total);
            total += level.width();
        }
        Ok(Self {
            levels,
            offsets,
            times,
        })
    }

    /// Every node at depth `d` has `counts[d]` children with the transition
    /// probabilities `probabilities[d]` (equal weights when omitted).
    pub fn from_branching(
        counts: &[usize],
        probabilities: Option<&[Vec<f64>]>,
        times: Option<Vec<f64>>,
    ) -> Result<Self> {
        if let Some(p) = probabilities {
            if p.len() != counts.len() {
                return Err(Error::MalformedTree(format!(
                    "{} probability rows for {} depths",
                    p.len(),
                    counts.len()
                )));
            }
        }
        let mut per_depth = Vec::with_capacity(counts.len());
        let mut width = 1usize;
        for (d, &count) in counts.iter().enumerate() {
            if count == 0 {
                return Err(Error::MalformedTree(format!(
                    "child count at depth {d} must be at least 1"
                )));
            }
            let row = match probabilities {
                Some(p) => {
                    if p[d].len() != count {
                        return Err(Error::MalformedTree(format!(
                            "depth {d}: {} probabilities for {count} children",
                            p[d].len()
                        )));
                    }
                    p[d].clone()
                }
                None => vec![1.0 / count as f64; count],
            };
            per_depth.push(vec![row; width]);
            width = width
                .checked_mul(count)
                .ok_or_else(|| Error::MalformedTree("tree too large".into()))?;
        }
        Self::from_child_probabilities(per_depth, times)
    }

    /// Binary tree of the given depth, first child taken with probability `p`.
    pub fn binomial(depth: usize, p: f64) -> Result<Self> {
        let rows = vec![vec![p, 1.0 - p]; depth];
        Self::from_branching(&vec![2; depth], Some(&rows), None)
    }

    /// Deterministic single-path filtration.
    pub fn chain(depth: usize) -> Result<Self> {
        Self::from_branching(&vec![1; depth], None, None)
    }

    /// Terminal depth `N`.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// Number of nodes at depth `d` (0 when `d > N`).
    pub fn width(&self, depth: usize) -> usize {
        self.levels.get(depth).map_or(0, Level::width)
    }

    pub fn node_count(&self) -> usize {
        self.levels.iter().map(Level::width).sum()
    }

    pub fn nodes(&self, depth: usize) -> impl Iterator<Item = NodeRef> {
        (0..self.width(depth)).map(move |k| NodeRef::new(depth, k))
    }

    pub fn parent(&self, node: NodeRef) -> Option<NodeRef> {
        if node.depth == 0 {
            None
        } else {
            Some(NodeRef::new(
                node.depth - 1,
                self.levels[node.depth].parent[node.index],
            ))
        }
    }

    /// Indices (at depth `node.depth + 1`) of the children of `node`.
    pub fn children(&self, node: NodeRef) -> Range<usize> {
        let level = &self.levels[node.depth];
        if level.first_child.is_empty() {
            0..0
        } else {
            level.first_child[node.index]..level.first_child[node.index + 1]
        }
    }

    /// One-step probability of reaching `node` from its parent (1 at the root).
    pub fn transition_probability(&self, node: NodeRef) -> f64 {
        self.levels[node.depth].prob[node.index]
    }

    /// Unconditional probability of the event `node`.
    pub fn path_probability(&self, node: NodeRef) -> f64 {
        let mut p = 1.0;
        let mut cur = node;
        while let Some(parent) = self.parent(cur) {
            p *= self.transition_probability(cur);
            cur = parent;
        }
        p
    }

    pub fn times(&self) -> Option<&[f64]> {
        self.times.as_deref()
    }

    /// Time label of depth `d`; the depth itself when no labels were given.
    pub fn time(&self, depth: usize) -> f64 {
        self.times.as_ref().map_or(depth as f64, |t| t[depth])
    }

    /// Breadth-first identifier of a node: the root is 0.
    pub fn node_id(&self, node: NodeRef) -> usize {
        self.offsets[node.depth] + node.index
    }

    pub fn node_from_id(&self, id: usize) -> Option<NodeRef> {
        let depth = self.offsets.partition_point(|&o| o <= id).checked_sub(1)?;
        let index = id - self.offsets[depth];
        (index < self.width(depth)).then_some(NodeRef::new(depth, index))
    }

    /// `E_{j-1}[X_j]` for a field given at depth `j >= 1`.
    pub fn expect_one_step(&self, field: &[f64], depth: usize) -> Vec<f64> {
        debug_assert!(depth >= 1 && field.len() == self.width(depth));
        let child = &self.levels[depth];
        let level = &self.levels[depth - 1];
        (0..level.width())
            .map(|k| {
                (level.first_child[k]..level.first_child[k + 1])
                    .fold(0.0, |acc, c| acc + child.prob[c] * field[c])
            })
            .collect()
    }

    /// `E_i[X_j]` for a field given at depth `j`, as a depth-`i` field.
    ///
    /// Panics if `i > j` or the field does not match the width of depth `j`;
    /// [`conditional_expectation`] is the checked entry point.
    pub fn expect_field(&self, field: &[f64], from: usize, to: usize) -> Vec<f64> {
        assert!(to <= from, "conditioning depth {to} exceeds {from}");
        assert_eq!(field.len(), self.width(from), "field width mismatch");
        let mut cur = field.to_vec();
        for d in (to + 1..=from).rev() {
            cur = self.expect_one_step(&cur, d);
        }
        cur
    }

    /// Unconditional expectation `E[X_j]`.
    pub fn expect_root(&self, field: &[f64], depth: usize) -> f64 {
        self.expect_field(field, depth, 0)[0]
    }

    /// Largest spread `max - min` among the children of any depth-`(d-1)`
    /// node, for a field at depth `d >= 1`, with the child achieving it.
    fn sibling_spread(&self, field: &[f64], depth: usize) -> (f64, Option<NodeRef>) {
        let level = &self.levels[depth - 1];
        let mut worst = (0.0, None);
        for k in 0..level.width() {
            let range = level.first_child[k]..level.first_child[k + 1];
            let base = field[range.start];
            for c in range {
                let spread = (field[c] - base).abs();
                if spread > worst.0 || worst.1.is_none() {
                    worst = (spread, Some(NodeRef::new(depth, c)));
                }
            }
        }
        worst
    }
}

/// One finite value per node over the depth range `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptedProcess {
    lo: usize,
    values: Vec<Vec<f64>>,
}

impl AdaptedProcess {
    /// `values[k]` is the field at depth `lo + k`.
    pub fn new(tree: &FiltrationTree, lo: usize, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyRange);
        }
        let process = Self { lo, values };
        process.ensure_fits(tree)?;
        for (d, field) in process.fields() {
            if let Some(k) = field.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue {
                    node: NodeRef::new(d, k),
                });
            }
        }
        Ok(process)
    }

    /// Builds a process node by node. Values are not validated.
    pub fn from_fn(
        tree: &FiltrationTree,
        lo: usize,
        hi: usize,
        mut f: impl FnMut(NodeRef) -> f64,
    ) -> Self {
        assert!(lo <= hi && hi <= tree.depth(), "invalid depth range");
        let values = (lo..=hi)
            .map(|d| tree.nodes(d).map(&mut f).collect())
            .collect();
        Self { lo, values }
    }

    pub fn constant(tree: &FiltrationTree, lo: usize, hi: usize, value: f64) -> Self {
        Self::from_fn(tree, lo, hi, |_| value)
    }

    /// Process taking the value `per_depth[k]` at every node of depth `lo + k`.
    pub fn deterministic(tree: &FiltrationTree, lo: usize, per_depth: &[f64]) -> Result<Self> {
        if per_depth.is_empty() {
            return Err(Error::EmptyRange);
        }
        let values = per_depth
            .iter()
            .enumerate()
            .map(|(k, &v)| vec![v; tree.width(lo + k)])
            .collect();
        Self::new(tree, lo, values)
    }

    /// Assembles a process from per-depth fields without validation.
    pub(crate) fn from_fields(lo: usize, values: Vec<Vec<f64>>) -> Self {
        debug_assert!(!values.is_empty());
        Self { lo, values }
    }

    pub fn lo(&self) -> usize {
        self.lo
    }

    pub fn hi(&self) -> usize {
        self.lo + self.values.len() - 1
    }

    pub fn is_defined_at(&self, depth: usize) -> bool {
        depth >= self.lo && depth <= self.hi()
    }

    pub fn at(&self, depth: usize) -> Option<&[f64]> {
        depth
            .checked_sub(self.lo)
            .and_then(|k| self.values.get(k))
            .map(Vec::as_slice)
    }

    /// Like [`at`](Self::at), reporting the defined range on failure.
    pub fn field(&self, depth: usize) -> Result<&[f64]> {
        self.at(depth).ok_or(Error::ProcessNotDefinedAtDepth {
            depth,
            lo: self.lo,
            hi: self.hi(),
        })
    }

    pub fn get(&self, node: NodeRef) -> Option<f64> {
        self.at(node.depth).and_then(|f| f.get(node.index).copied())
    }

    /// `(depth, field)` pairs in increasing depth order.
    pub fn fields(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.values
            .iter()
            .enumerate()
            .map(move |(k, f)| (self.lo + k, f.as_slice()))
    }

    /// Every `(node, value)` pair in breadth-first order.
    pub fn iter(&self) -> impl Iterator<Item = (NodeRef, f64)> + '_ {
        self.fields().flat_map(|(d, f)| {
            f.iter()
                .enumerate()
                .map(move |(k, &v)| (NodeRef::new(d, k), v))
        })
    }

    pub fn ensure_fits(&self, tree: &FiltrationTree) -> Result<()> {
        if self.hi() > tree.depth() {
            return Err(Error::ShapeMismatch {
                depth: self.hi(),
                expected: 0,
                found: self.values.last().map_or(0, Vec::len),
            });
        }
        for (d, field) in self.fields() {
            if field.len() != tree.width(d) {
                return Err(Error::ShapeMismatch {
                    depth: d,
                    expected: tree.width(d),
                    found: field.len(),
                });
            }
        }
        Ok(())
    }

    /// Sub-process on `[lo, hi]`.
    pub fn restrict(&self, lo: usize, hi: usize) -> Result<Self> {
        if lo > hi {
            return Err(Error::EmptyRange);
        }
        for d in [lo, hi] {
            self.field(d)?;
        }
        Ok(Self {
            lo,
            values: self.values[lo - self.lo..=hi - self.lo].to_vec(),
        })
    }

    pub fn map(&self, mut f: impl FnMut(NodeRef, f64) -> f64) -> Self {
        let values = self
            .fields()
            .map(|(d, field)| {
                field
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| f(NodeRef::new(d, k), v))
                    .collect()
            })
            .collect();
        Self {
            lo: self.lo,
            values,
        }
    }

    /// Node-wise combination over the common depth range.
    pub fn zip_with(&self, other: &Self, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi().min(other.hi());
        if lo > hi {
            return Err(Error::EmptyRange);
        }
        let values = (lo..=hi)
            .map(|d| {
                let a = self.at(d).unwrap_or_default();
                let b = other.at(d).unwrap_or_default();
                a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
            })
            .collect();
        Ok(Self { lo, values })
    }

    /// Smallest value and where it occurs.
    pub fn min_node(&self) -> (NodeRef, f64) {
        self.iter()
            .fold((NodeRef::ROOT, f64::INFINITY), |best, (n, v)| {
                if v < best.1 {
                    (n, v)
                } else {
                    best
                }
            })
    }
}

/// `E_i[X_j]` as a process defined at the single depth `i`.
pub fn conditional_expectation(
    tree: &FiltrationTree,
    x: &AdaptedProcess,
    j: usize,
    i: usize,
) -> Result<AdaptedProcess> {
    if i > j {
        return Err(Error::DepthOrderViolation { from: j, to: i });
    }
    x.ensure_fits(tree)?;
    let field = x.field(j)?;
    Ok(AdaptedProcess::from_fields(
        i,
        vec![tree.expect_field(field, j, i)],
    ))
}

/// Outcome of a node-wise property check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub pass: bool,
    /// Largest violation observed; for strictness checks, how far the
    /// weak inequality fails (0 when it holds everywhere).
    pub max_violation: f64,
    pub witness: Option<NodeRef>,
    pub tolerance: f64,
    /// Smallest strictness margin, reported by strict checks only. Such a
    /// check passes iff the margin exceeds the tolerance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

impl CheckReport {
    pub fn from_violation(
        name: impl Into<String>,
        max_violation: f64,
        witness: Option<NodeRef>,
        tolerance: f64,
    ) -> Self {
        Self {
            name: name.into(),
            pass: max_violation <= tolerance,
            max_violation,
            witness,
            tolerance,
            margin: None,
        }
    }

    pub fn from_margin(
        name: impl Into<String>,
        margin: f64,
        witness: Option<NodeRef>,
        tolerance: f64,
    ) -> Self {
        Self {
            name: name.into(),
            pass: margin > tolerance,
            max_violation: (-margin).max(0.0),
            witness,
            tolerance,
            margin: Some(margin),
        }
    }

    /// Renames the check, e.g. to qualify it with an asset id.
    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{}: {verdict}", self.name)?;
        match self.margin {
            Some(m) => write!(f, " (min margin {m:e}")?,
            None => write!(f, " (max violation {:e}", self.max_violation)?,
        }
        if let Some(w) = self.witness {
            write!(f, " at {w}")?;
        }
        write!(f, ", tolerance {:e})", self.tolerance)
    }
}

/// Running maximum of a node-wise violation measure.
#[derive(Debug, Clone, Copy, Default)]
pub struct ViolationTracker {
    max: f64,
    witness: Option<NodeRef>,
}

impl ViolationTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, node: NodeRef, violation: f64) {
        // NaN counts as an infinite violation.
        let v = if violation.is_nan() {
            f64::INFINITY
        } else {
            violation
        };
        if self.witness.is_none() || v > self.max {
            self.max = v;
            self.witness = Some(node);
        }
    }

    pub fn observe_field(&mut self, depth: usize, violations: impl IntoIterator<Item = f64>) {
        for (k, v) in violations.into_iter().enumerate() {
            self.observe(NodeRef::new(depth, k), v);
        }
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn finish(self, name: impl Into<String>, tolerance: f64) -> CheckReport {
        CheckReport::from_violation(name, self.max, self.witness, tolerance)
    }
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Node-wise relative comparison of two processes over `a`'s depth range.
pub fn compare_relative(
    name: impl Into<String>,
    a: &AdaptedProcess,
    b: &AdaptedProcess,
    tolerance: f64,
) -> CheckReport {
    let mut tracker = ViolationTracker::new();
    for (d, fa) in a.fields() {
        match b.at(d) {
            Some(fb) if fb.len() == fa.len() => {
                tracker.observe_field(d, fa.iter().zip(fb).map(|(&x, &y)| relative_error(x, y)))
            }
            _ => tracker.observe(NodeRef::new(d, 0), f64::INFINITY),
        }
    }
    tracker.finish(name, tolerance)
}

fn adjacent_range(tree: &FiltrationTree, x: &AdaptedProcess) -> Result<Range<usize>> {
    x.ensure_fits(tree)?;
    if x.lo() == x.hi() {
        return Err(Error::EmptyRange);
    }
    Ok(x.lo()..x.hi())
}

/// Passes iff `|E_i[X_{i+1}] - X_i| <= tolerance` at every node of every
/// adjacent pair of depths in the process range.
pub fn is_martingale(
    tree: &FiltrationTree,
    x: &AdaptedProcess,
    tolerance: f64,
) -> Result<CheckReport> {
    let mut tracker = ViolationTracker::new();
    for i in adjacent_range(tree, x)? {
        let next = tree.expect_one_step(x.field(i + 1)?, i + 1);
        let cur = x.field(i)?;
        tracker.observe_field(i, cur.iter().zip(&next).map(|(a, b)| (a - b).abs()));
    }
    Ok(tracker.finish("martingale", tolerance))
}

/// Passes iff `X_i - E_i[X_{i+1}] > tolerance` at every node; the smallest
/// margin is reported.
pub fn is_strict_supermartingale(
    tree: &FiltrationTree,
    x: &AdaptedProcess,
    tolerance: f64,
) -> Result<CheckReport> {
    let mut margin = f64::INFINITY;
    let mut witness = None;
    for i in adjacent_range(tree, x)? {
        let next = tree.expect_one_step(x.field(i + 1)?, i + 1);
        for (k, (a, b)) in x.field(i)?.iter().zip(&next).enumerate() {
            let m = a - b;
            if witness.is_none() || m < margin || m.is_nan() {
                margin = if m.is_nan() { f64::NEG_INFINITY } else { m };
                witness = Some(NodeRef::new(i, k));
            }
        }
    }
    Ok(CheckReport::from_margin(
        "strict supermartingale",
        margin,
        witness,
        tolerance,
    ))
}

/// Passes iff at every depth of the range, siblings share one value (within
/// `tolerance`), i.e. `X_i` is known at depth `i - 1`.
pub fn is_previsible(
    tree: &FiltrationTree,
    x: &AdaptedProcess,
    tolerance: f64,
) -> Result<CheckReport> {
    x.ensure_fits(tree)?;
    if x.lo() == 0 {
        return Err(Error::RangeStartsAtRoot);
    }
    let mut tracker = ViolationTracker::new();
    for (d, field) in x.fields() {
        let (spread, node) = tree.sibling_spread(field, d);
        if let Some(node) = node {
            tracker.observe(node, spread);
        }
    }
    Ok(tracker.finish("previsible", tolerance))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial2() -> FiltrationTree {
        FiltrationTree::binomial(2, 0.5).unwrap()
    }

    #[test]
    fn chain_is_a_four_node_path() {
        let tree = FiltrationTree::chain(3).unwrap();
        assert_eq!(tree.node_count(), 4);
        assert_eq!(tree.depth(), 3);
        for d in 0..=3 {
            assert_eq!(tree.width(d), 1);
        }
    }

    #[test]
    fn binomial_depth_two_has_quarter_leaves() {
        let tree = binomial2();
        assert_eq!(tree.node_count(), 7);
        assert_eq!(tree.width(2), 4);
        for leaf in tree.nodes(2) {
            assert_eq!(tree.path_probability(leaf), 0.25);
        }
    }

    #[test]
    fn probability_sum_mismatch_is_reported_with_node() {
        let err =
            FiltrationTree::from_child_probabilities(vec![vec![vec![0.6, 0.5]]], None).unwrap_err();
        match err {
            Error::ProbabilitySumMismatch { node, sum } => {
                assert_eq!(node, NodeRef::ROOT);
                assert!((sum - 1.1).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_zero_probability_and_bad_times() {
        let err =
            FiltrationTree::from_child_probabilities(vec![vec![vec![1.0, 0.0]]], None).unwrap_err();
        assert!(matches!(err, Error::NonPositiveProbability { .. }));
        let err =
            FiltrationTree::from_branching(&[1, 1], None, Some(vec![0.0, 1.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::NonIncreasingTimes { depth: 2 }));
    }

    #[test]
    fn node_ids_are_breadth_first() {
        let tree = binomial2();
        assert_eq!(tree.node_id(NodeRef::ROOT), 0);
        assert_eq!(tree.node_id(NodeRef::new(1, 1)), 2);
        assert_eq!(tree.node_id(NodeRef::new(2, 0)), 3);
        for id in 0..7 {
            let node = tree.node_from_id(id).unwrap();
            assert_eq!(tree.node_id(node), id);
        }
        assert!(tree.node_from_id(7).is_none());
        assert_eq!(tree.children(NodeRef::new(1, 1)), 2..4);
        assert_eq!(tree.parent(NodeRef::new(2, 3)), Some(NodeRef::new(1, 1)));
    }

    #[test]
    fn conditional_expectation_examples() {
        let chain = FiltrationTree::chain(3).unwrap();
        let x = AdaptedProcess::deterministic(&chain, 2, &[5.0]).unwrap();
        let e = conditional_expectation(&chain, &x, 2, 0).unwrap();
        assert_eq!(e.at(0).unwrap(), &[5.0]);

        let tree = binomial2();
        let x = AdaptedProcess::new(&tree, 1, vec![vec![1.1, 0.9]]).unwrap();
        let e = conditional_expectation(&tree, &x, 1, 0).unwrap();
        assert!((e.at(0).unwrap()[0] - 1.0).abs() < 1e-15);

        let same = conditional_expectation(&tree, &x, 1, 1).unwrap();
        assert_eq!(same.at(1).unwrap(), x.at(1).unwrap());
    }

    #[test]
    fn conditional_expectation_errors() {
        let tree = binomial2();
        let x = AdaptedProcess::new(&tree, 1, vec![vec![1.1, 0.9]]).unwrap();
        assert!(matches!(
            conditional_expectation(&tree, &x, 0, 1),
            Err(Error::DepthOrderViolation { .. })
        ));
        assert!(matches!(
            conditional_expectation(&tree, &x, 2, 0),
            Err(Error::ProcessNotDefinedAtDepth { depth: 2, .. })
        ));
    }

    #[test]
    fn martingale_examples() {
        let tree = FiltrationTree::binomial(1, 0.5).unwrap();
        let c = AdaptedProcess::constant(&tree, 0, 1, 3.0);
        let r = is_martingale(&tree, &c, 1e-12).unwrap();
        assert!(r.pass);
        assert_eq!(r.max_violation, 0.0);

        let x = AdaptedProcess::new(&tree, 0, vec![vec![1.0], vec![1.2, 0.8]]).unwrap();
        assert!(is_martingale(&tree, &x, 1e-12).unwrap().pass);

        let y = AdaptedProcess::new(&tree, 0, vec![vec![1.0], vec![1.2, 0.9]]).unwrap();
        let r = is_martingale(&tree, &y, 1e-12).unwrap();
        assert!(!r.pass);
        assert!((r.max_violation - 0.05).abs() < 1e-12);
        assert_eq!(r.witness, Some(NodeRef::ROOT));

        let single = AdaptedProcess::constant(&tree, 1, 1, 1.0);
        assert!(matches!(
            is_martingale(&tree, &single, 1e-12),
            Err(Error::EmptyRange)
        ));
    }

    #[test]
    fn strict_supermartingale_examples() {
        let chain = FiltrationTree::chain(4).unwrap();
        let x = AdaptedProcess::deterministic(&chain, 0, &[1.0, 0.5, 0.25, 0.125, 0.0625]).unwrap();
        let r = is_strict_supermartingale(&chain, &x, 1e-12).unwrap();
        assert!(r.pass);
        assert_eq!(r.margin, Some(0.0625));
        assert_eq!(r.witness, Some(NodeRef::new(3, 0)));

        let c = AdaptedProcess::constant(&chain, 0, 4, 1.0);
        let r = is_strict_supermartingale(&chain, &c, 1e-12).unwrap();
        assert!(!r.pass);
        assert_eq!(r.max_violation, 0.0);
    }

    #[test]
    fn previsibility_examples() {
        let tree = binomial2();
        let det = AdaptedProcess::deterministic(&tree, 1, &[2.0, 4.0]).unwrap();
        assert!(is_previsible(&tree, &det, 0.0).unwrap().pass);

        let x = AdaptedProcess::new(&tree, 1, vec![vec![1.1, 0.9]]).unwrap();
        let r = is_previsible(&tree, &x, 0.0).unwrap();
        assert!(!r.pass);
        assert_eq!(r.witness.unwrap().depth, 1);

        let rooted = AdaptedProcess::constant(&tree, 0, 2, 1.0);
        assert!(matches!(
            is_previsible(&tree, &rooted, 0.0),
            Err(Error::RangeStartsAtRoot)
        ));
    }

    #[test]
    fn process_shape_is_validated() {
        let tree = binomial2();
        let err = AdaptedProcess::new(&tree, 1, vec![vec![1.0, 2.0, 3.0]]).unwrap_err();
        assert!(matches!(
            err,
            Error::ShapeMismatch {
                depth: 1,
                expected: 2,
                found: 3
            }
        ));
        let err = AdaptedProcess::new(&tree, 1, vec![vec![1.0, f64::NAN]]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteValue { .. }));
    }
}
