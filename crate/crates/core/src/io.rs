//! Structured-text documents for trees and processes, CSV writers, and the
//! fixed 12-significant-digit number format used by every report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bonds::{per_period_rate, BondSurface};
use crate::error::{Error, Result};
use crate::filtration::{AdaptedProcess, FiltrationTree, NodeRef};

/// Significant digits of every floating-point value written by reports.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Number accepted either as a decimal string (preferred, parsed exactly by
/// the standard library) or as a JSON number. Serialized as the shortest
/// decimal string that round-trips.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decimal(pub f64);

impl Serialize for Decimal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Number(x) => Ok(Decimal(x)),
            Raw::Text(s) => s
                .trim()
                .parse::<f64>()
                .map(Decimal)
                .map_err(|_| serde::de::Error::custom(format!("invalid decimal {s:?}"))),
        }
    }
}

impl From<Decimal> for f64 {
    fn from(d: Decimal) -> f64 {
        d.0
    }
}

/// `x` with 12 significant digits, trailing zeros dropped; plain notation
/// for exponents in `[-5, 12)`, scientific otherwise.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Rounds `x` to [`SIGNIFICANT_DIGITS`].
pub fn round_significant(x: f64) -> f64 {
    format_number(x).parse().unwrap_or(x)
}

/// Rewrites every number in a JSON value with 12 significant digits.
pub fn round_json(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Number(n) => {
            if let Some(x) = n.as_f64() {
                if !(n.is_i64() || n.is_u64()) {
                    if let Some(r) = serde_json::Number::from_f64(round_significant(x)) {
                        *n = r;
                    }
                }
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(round_json),
        serde_json::Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: usize,
    pub depth: usize,
    pub parent: Option<usize>,
    /// Transition probability from the parent; 1 at the root.
    pub probability: Decimal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<Decimal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeDocument {
    pub depth: usize,
    pub nodes: Vec<NodeRecord>,
}

/// Breadth-first node list; ids are [`FiltrationTree::node_id`].
pub fn tree_to_document(tree: &FiltrationTree) -> TreeDocument {
    let nodes = (0..=tree.depth())
        .flat_map(|d| tree.nodes(d))
        .map(|node| NodeRecord {
            id: tree.node_id(node),
            depth: node.depth,
            parent: tree.parent(node).map(|p| tree.node_id(p)),
            probability: Decimal(tree.transition_probability(node)),
            time: tree.times().map(|t| Decimal(t[node.depth])),
        })
        .collect();
    TreeDocument {
        depth: tree.depth(),
        nodes,
    }
}

/// Rebuilds a tree from a node list. Nodes are renumbered breadth-first:
/// children keep the order in which they appear in the document.
pub fn tree_from_document(doc: &TreeDocument) -> Result<FiltrationTree> {
    let bad = |msg: String| Error::InvalidDocument(msg);
    let mut by_id: BTreeMap<usize, &NodeRecord> = BTreeMap::new();
    for rec in &doc.nodes {
        if by_id.insert(rec.id, rec).is_some() {
            return Err(bad(format!("duplicate node id {}", rec.id)));
        }
        if rec.depth > doc.depth {
            return Err(bad(format!("node {} deeper than the tree", rec.id)));
        }
    }
    let roots: Vec<&NodeRecord> = doc.nodes.iter().filter(|r| r.parent.is_none()).collect();
    if roots.len() != 1 || roots[0].depth != 0 {
        return Err(bad("exactly one root at depth 0 is required".into()));
    }
    let mut children: BTreeMap<usize, Vec<&NodeRecord>> = BTreeMap::new();
    for rec in &doc.nodes {
        if let Some(pid) = rec.parent {
            let parent = by_id
                .get(&pid)
                .ok_or_else(|| bad(format!("node {} has unknown parent {pid}", rec.id)))?;
            if parent.depth + 1 != rec.depth {
                return Err(bad(format!(
                    "node {} at depth {} under parent at depth {}",
                    rec.id, rec.depth, parent.depth
                )));
            }
            children.entry(pid).or_default().push(rec);
        }
    }

    let mut level: Vec<&NodeRecord> = vec![roots[0]];
    let mut per_depth = Vec::with_capacity(doc.depth);
    let mut times: Vec<Option<f64>> = vec![roots[0].time.map(f64::from)];
    for d in 0..doc.depth {
        let mut next = Vec::new();
        let mut rows = Vec::with_capacity(level.len());
        for rec in &level {
            let kids = children.get(&rec.id).cloned().unwrap_or_default();
            rows.push(kids.iter().map(|k| k.probability.0).collect::<Vec<_>>());
            next.extend(kids);
        }
        let mut label = None;
        for (k, rec) in next.iter().enumerate() {
            let t = rec.time.map(f64::from);
            if k > 0 && t != label {
                return Err(bad(format!("inconsistent time labels at depth {}", d + 1)));
            }
            label = t;
        }
        times.push(label);
        per_depth.push(rows);
        level = next;
    }
    if level.iter().any(|rec| children.contains_key(&rec.id)) {
        return Err(bad("nodes below the declared depth".into()));
    }
    let times = if times.iter().all(Option::is_some) {
        Some(times.into_iter().map(|t| t.expect("checked")).collect())
    } else if times.iter().all(Option::is_none) {
        None
    } else {
        return Err(bad(
            "time labels must be given for every depth or none".into()
        ));
    };
    FiltrationTree::from_child_probabilities(per_depth, times)
}

/// Process values keyed by breadth-first node id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub lo: usize,
    pub hi: usize,
    pub values: BTreeMap<usize, f64>,
}

pub fn process_to_document(
    tree: &FiltrationTree,
    name: Option<&str>,
    process: &AdaptedProcess,
) -> ProcessDocument {
    ProcessDocument {
        name: name.map(str::to_owned),
        lo: process.lo(),
        hi: process.hi(),
        values: process
            .iter()
            .map(|(node, v)| (tree.node_id(node), v))
            .collect(),
    }
}

pub fn process_from_document(
    tree: &FiltrationTree,
    doc: &ProcessDocument,
) -> Result<AdaptedProcess> {
    if doc.lo > doc.hi || doc.hi > tree.depth() {
        return Err(Error::InvalidDocument(format!(
            "depth range [{}, {}] invalid for a tree of depth {}",
            doc.lo,
            doc.hi,
            tree.depth()
        )));
    }
    let mut fields = Vec::with_capacity(doc.hi - doc.lo + 1);
    for d in doc.lo..=doc.hi {
        let field =
            tree.nodes(d)
                .map(|node| {
                    let id = tree.node_id(node);
                    doc.values.get(&id).copied().ok_or_else(|| {
                        Error::InvalidDocument(format!("missing value for node {id}"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
        fields.push(field);
    }
    let expected: usize = (doc.lo..=doc.hi).map(|d| tree.width(d)).sum();
    if doc.values.len() != expected {
        return Err(Error::InvalidDocument(format!(
            "{} values given for {expected} nodes",
            doc.values.len()
        )));
    }
    AdaptedProcess::new(tree, doc.lo, fields)
}

/// `time_i,time_j,node,P,R` for every maturity `j > i` and depth-`i` node.
/// Header only when `i >= H`.
pub fn curve_csv(surface: &BondSurface, from: usize) -> String {
    let tree = surface.kernel().tree();
    let rates = per_period_rate(surface);
    let mut out = String::from("time_i,time_j,node,P,R\n");
    for j in from + 1..=surface.horizon() {
        let (Ok(p), Ok(r)) = (surface.get(from, j), rates.get(from, j)) else {
            continue;
        };
        for node in tree.nodes(from) {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                format_number(tree.time(from)),
                format_number(tree.time(j)),
                tree.node_id(node),
                format_number(p[node.index]),
                format_number(r[node.index]),
            );
        }
    }
    out
}

/// `depth,node,value,transversality`: one row per node, the last column
/// repeating `E[pi_d S_d]` for the row's depth.
pub fn price_csv(tree: &FiltrationTree, price: &AdaptedProcess, transversality: &[f64]) -> String {
    let mut out = String::from("depth,node,value,transversality\n");
    for (node, v) in price.iter() {
        let e = transversality.get(node.depth).copied().unwrap_or(f64::NAN);
        let _ = writeln!(
            out,
            "{},{},{},{}",
            node.depth,
            tree.node_id(node),
            format_number(v),
            format_number(e)
        );
    }
    out
}

/// `depth,node,value` rows.
pub fn process_csv(tree: &FiltrationTree, process: &AdaptedProcess) -> String {
    let mut out = String::from("depth,node,value\n");
    for (node, v) in process.iter() {
        let _ = writeln!(
            out,
            "{},{},{}",
            node.depth,
            tree.node_id(node),
            format_number(v)
        );
    }
    out
}

/// Node label used in human-readable summaries.
pub fn describe_node(tree: &FiltrationTree, node: NodeRef) -> String {
    format!("node {} (depth {})", tree.node_id(node), node.depth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(format_number(0.5), "0.5");
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(3.0), "3");
        assert_eq!(format_number(0.1 + 0.2), "0.3");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(2.0 / 3.0 * 1e-9), "6.66666666667e-10");
        assert_eq!(format_number(-1234.5), "-1234.5");
        assert_eq!(format_number(1e15), "1e15");
        assert_eq!(format_number(0.0101010101010101), "0.010101010101");
    }

    #[test]
    fn decimal_accepts_strings_and_numbers() {
        let d: Vec<Decimal> = serde_json::from_str(r#"["0.1", 0.25, " 1e-3 "]"#).unwrap();
        assert_eq!(d, vec![Decimal(0.1), Decimal(0.25), Decimal(0.001)]);
        assert!(serde_json::from_str::<Decimal>(r#""abc""#).is_err());
        assert_eq!(serde_json::to_string(&Decimal(0.1)).unwrap(), r#""0.1""#);
    }

    #[test]
    fn tree_document_round_trip() {
        let tree = FiltrationTree::from_child_probabilities(
            vec![vec![vec![0.3, 0.7]], vec![vec![1.0], vec![0.25, 0.5, 0.25]]],
            Some(vec![0.0, 0.5, 1.25]),
        )
        .unwrap();
        let doc = tree_to_document(&tree);
        let text = serde_json::to_string(&doc).unwrap();
        let back = tree_from_document(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, tree);
    }

    #[test]
    fn tree_document_order_and_errors() {
        // children listed out of breadth-first order are regrouped by parent
        let doc: TreeDocument = serde_json::from_str(
            r#"{"depth": 1, "nodes": [
                {"id": 7, "depth": 1, "parent": 0, "probability": "0.25"},
                {"id": 0, "depth": 0, "parent": null, "probability": "1"},
                {"id": 3, "depth": 1, "parent": 0, "probability": "0.75"}
            ]}"#,
        )
        .unwrap();
        let tree = tree_from_document(&doc).unwrap();
        assert_eq!(tree.transition_probability(NodeRef::new(1, 0)), 0.25);

        let orphan: TreeDocument = serde_json::from_str(
            r#"{"depth": 1, "nodes": [
                {"id": 0, "depth": 0, "parent": null, "probability": "1"},
                {"id": 1, "depth": 1, "parent": 5, "probability": "1"}
            ]}"#,
        )
        .unwrap();
        assert!(matches!(
            tree_from_document(&orphan),
            Err(Error::InvalidDocument(_))
        ));

        let bad_sum: TreeDocument = serde_json::from_str(
            r#"{"depth": 1, "nodes": [
                {"id": 0, "depth": 0, "parent": null, "probability": "1"},
                {"id": 1, "depth": 1, "parent": 0, "probability": "0.6"},
                {"id": 2, "depth": 1, "parent": 0, "probability": "0.5"}
            ]}"#,
        )
        .unwrap();
        assert!(matches!(
            tree_from_document(&bad_sum),
            Err(Error::ProbabilitySumMismatch { .. })
        ));
    }

    #[test]
    fn process_document_round_trip_and_gaps() {
        let tree = FiltrationTree::binomial(2, 0.5).unwrap();
        let p = AdaptedProcess::new(&tree, 1, vec![vec![1.1, 0.9], vec![0.61, 0.49, 0.49, 0.41]])
            .unwrap();
        let doc = process_to_document(&tree, Some("pi"), &p);
        let text = serde_json::to_string(&doc).unwrap();
        let back: ProcessDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(process_from_document(&tree, &back).unwrap(), p);

        let mut gap = doc.clone();
        gap.values.remove(&4);
        assert!(process_from_document(&tree, &gap).is_err());
    }
}
