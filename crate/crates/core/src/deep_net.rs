//! DAG-structured compositions of constituent functions with pooling, and
//! the error-propagation bound for replacing each constituent by an
//! approximant.
//!
//! Approximants built here need the true constituents to label per-node
//! data; the construction demonstrates existence rather than learning the
//! composition from end-to-end samples.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate_at, Dataset, EstimatorConfig};

/// A constituent function `R^{d(v)} → R`.
pub type Constituent = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// One constituent per node id.
pub type ConstituentSet = HashMap<String, Constituent>;

/// Raw inputs, one point per source id.
pub type SourceInputs = HashMap<String, Vec<f64>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Source,
    Internal,
}

/// Maps a node's vector of child outputs into its constituent's domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Pooling {
    Identity,
    /// Coordinatewise clipping to `[lo, hi]`.
    Clip { lo: f64, hi: f64 },
    /// Radial projection onto the sphere of the given radius.
    Sphere { radius: f64 },
}

impl Pooling {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Pooling::Identity => v.to_vec(),
            Pooling::Clip { lo, hi } => v.iter().map(|x| x.clamp(*lo, *hi)).collect(),
            Pooling::Sphere { radius } => {
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm == 0.0 {
                    let mut out = vec![0.0; v.len()];
                    if let Some(first) = out.first_mut() {
                        *first = *radius;
                    }
                    out
                } else {
                    v.iter().map(|x| radius * x / norm).collect()
                }
            }
        }
    }

    /// Default contraction constant `c(v)`.
    pub fn default_constant(&self) -> f64 {
        match self {
            Pooling::Identity | Pooling::Clip { .. } => 1.0,
            Pooling::Sphere { .. } => 2.0,
        }
    }
}

/// Pooling map plus its declared constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolingSpec {
    #[serde(flatten)]
    pub map: Pooling,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

impl PoolingSpec {
    pub fn constant(&self) -> f64 {
        self.c.unwrap_or_else(|| self.map.default_constant())
    }
}

impl From<Pooling> for PoolingSpec {
    fn from(map: Pooling) -> Self {
        Self { map, c: None }
    }
}

fn identity_pooling() -> PoolingSpec {
    Pooling::Identity.into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagNode {
    pub id: String,
    pub kind: NodeKind,
    pub in_dim: usize,
    #[serde(default)]
    pub children: Vec<String>,
    #[serde(default = "identity_pooling")]
    pub pooling: PoolingSpec,
    #[serde(default)]
    pub lipschitz: Option<f64>,
}

impl DagNode {
    pub fn source(id: &str, in_dim: usize) -> Self {
        Self {
            id: id.into(),
            kind: NodeKind::Source,
            in_dim,
            children: Vec::new(),
            pooling: identity_pooling(),
            lipschitz: None,
        }
    }

    pub fn internal(id: &str, children: &[&str], pooling: Pooling, lipschitz: Option<f64>) -> Self {
        Self {
            id: id.into(),
            kind: NodeKind::Internal,
            in_dim: children.len(),
            children: children.iter().map(|c| c.to_string()).collect(),
            pooling: pooling.into(),
            lipschitz,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DagFile {
    nodes: Vec<DagNode>,
    sink: String,
}

/// A validated DAG with a deterministic topological order.
#[derive(Debug, Clone)]
pub struct Dag {
    nodes: IndexMap<String, DagNode>,
    sink: String,
    order: Vec<usize>,
    levels: Vec<usize>,
}

impl Dag {
    pub fn new(nodes: Vec<DagNode>, sink: &str) -> Result<Self> {
        let mut map = IndexMap::new();
        for node in nodes {
            if map.contains_key(&node.id) {
                return Err(Error::InvalidGraph(format!("duplicate node `{}`", node.id)));
            }
            map.insert(node.id.clone(), node);
        }
        if !map.contains_key(sink) {
            return Err(Error::InvalidGraph(format!("sink `{sink}` is not a node")));
        }
        let mut parents = vec![0usize; map.len()];
        for node in map.values() {
            match node.kind {
                NodeKind::Source if !node.children.is_empty() => {
                    return Err(Error::InvalidGraph(format!("source `{}` has children", node.id)));
                }
                NodeKind::Internal if node.children.is_empty() => {
                    return Err(Error::InvalidGraph(format!("internal `{}` has no children", node.id)));
                }
                NodeKind::Internal if node.children.len() != node.in_dim => {
                    return Err(Error::InvalidGraph(format!(
                        "node `{}` declares in_dim {} with {} children",
                        node.id,
                        node.in_dim,
                        node.children.len()
                    )));
                }
                _ => {}
            }
            if node.in_dim == 0 {
                return Err(Error::InvalidGraph(format!("node `{}` has in_dim 0", node.id)));
            }
            for c in &node.children {
                let idx = map
                    .get_index_of(c)
                    .ok_or_else(|| Error::InvalidGraph(format!("unknown child `{c}` of `{}`", node.id)))?;
                parents[idx] += 1;
            }
        }
        let sinks: Vec<&String> = map
            .keys()
            .enumerate()
            .filter(|(i, _)| parents[*i] == 0)
            .map(|(_, k)| k)
            .collect();
        if sinks.len() != 1 || sinks[0] != sink {
            return Err(Error::InvalidGraph(format!(
                "expected the single sink `{sink}`, found {sinks:?}"
            )));
        }
        let order = topological_order(&map)?;
        let mut levels = vec![0usize; map.len()];
        for &i in &order {
            let node = &map[i];
            if node.kind == NodeKind::Internal {
                levels[i] = 1 + node
                    .children
                    .iter()
                    .map(|c| levels[map.get_index_of(c).expect("validated")])
                    .max()
                    .expect("internal nodes have children");
            }
        }
        Ok(Self {
            nodes: map,
            sink: sink.into(),
            order,
            levels,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DagFile = serde_json::from_str(text)?;
        Self::new(file.nodes, &file.sink)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = DagFile {
            nodes: self.nodes.values().cloned().collect(),
            sink: self.sink.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn sink(&self) -> &str {
        &self.sink
    }

    pub fn node(&self, id: &str) -> Option<&DagNode> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &DagNode> {
        self.nodes.values()
    }

    pub fn sources(&self) -> impl Iterator<Item = &DagNode> {
        self.nodes.values().filter(|n| n.kind == NodeKind::Source)
    }

    /// Node ids in evaluation order.
    pub fn topological_ids(&self) -> Vec<&str> {
        self.order.iter().map(|&i| self.nodes[i].id.as_str()).collect()
    }

    /// Length of the longest path from a source.
    pub fn level(&self, id: &str) -> Option<usize> {
        self.nodes.get_index_of(id).map(|i| self.levels[i])
    }

    pub fn depth(&self) -> usize {
        self.level(&self.sink).expect("sink exists")
    }

    /// Source ids feeding `id`, in child order with repeats kept.
    pub fn inputs_seen(&self, id: &str) -> Result<Vec<String>> {
        let node = self
            .nodes
            .get(id)
            .ok_or_else(|| Error::Missing(format!("node `{id}`")))?;
        match node.kind {
            NodeKind::Source => Ok(vec![node.id.clone()]),
            NodeKind::Internal => {
                let mut out = Vec::new();
                for c in &node.children {
                    out.extend(self.inputs_seen(c)?);
                }
                Ok(out)
            }
        }
    }

    fn check_inputs(&self, inputs: &SourceInputs) -> Result<()> {
        for s in self.sources() {
            let x = inputs
                .get(&s.id)
                .ok_or_else(|| Error::Missing(format!("input for source `{}`", s.id)))?;
            if x.len() != s.in_dim {
                return Err(Error::DimensionMismatch {
                    expected: s.in_dim,
                    got: x.len(),
                });
            }
        }
        Ok(())
    }

    fn evaluate_with(
        &self,
        inputs: &SourceInputs,
        pick: impl FnMut(&DagNode) -> Result<Constituent>,
    ) -> Result<Vec<f64>> {
        self.evaluate_in(&self.order, inputs, pick)
    }

    fn evaluate_in(
        &self,
        order: &[usize],
        inputs: &SourceInputs,
        mut pick: impl FnMut(&DagNode) -> Result<Constituent>,
    ) -> Result<Vec<f64>> {
        self.check_inputs(inputs)?;
        let mut values = vec![f64::NAN; self.nodes.len()];
        for &i in order {
            let node = &self.nodes[i];
            let f = pick(node)?;
            values[i] = match node.kind {
                NodeKind::Source => f(&inputs[&node.id]),
                NodeKind::Internal => f(&self.pooled_args(node, &values)),
            };
        }
        Ok(values)
    }

    fn pooled_args(&self, node: &DagNode, values: &[f64]) -> Vec<f64> {
        let raw: Vec<f64> = node
            .children
            .iter()
            .map(|c| values[self.nodes.get_index_of(c).expect("validated")])
            .collect();
        node.pooling.map.apply(&raw)
    }

    /// Every node's value, keyed by id, with each node computed once.
    pub fn eval_all(&self, constituents: &ConstituentSet, inputs: &SourceInputs) -> Result<BTreeMap<String, f64>> {
        let values = self.evaluate_with(inputs, |n| lookup(constituents, &n.id))?;
        Ok(self
            .nodes
            .keys()
            .cloned()
            .zip(values)
            .collect())
    }
}

impl Dag {
    /// As [`Dag::eval_all`] but following a caller-supplied order, which
    /// must list every node after all of its children.
    pub fn eval_all_in_order(
        &self,
        order: &[&str],
        constituents: &ConstituentSet,
        inputs: &SourceInputs,
    ) -> Result<BTreeMap<String, f64>> {
        let mut idx = Vec::with_capacity(order.len());
        let mut seen = vec![false; self.nodes.len()];
        for id in order {
            let i = self
                .nodes
                .get_index_of(*id)
                .ok_or_else(|| Error::Missing(format!("node `{id}`")))?;
            let node = &self.nodes[i];
            let ready = node
                .children
                .iter()
                .all(|c| seen[self.nodes.get_index_of(c).expect("validated")]);
            if seen[i] || !ready {
                return Err(Error::InvalidGraph(format!("`{id}` is out of topological order")));
            }
            seen[i] = true;
            idx.push(i);
        }
        if idx.len() != self.nodes.len() {
            return Err(Error::InvalidGraph("order does not cover every node".into()));
        }
        let values = self.evaluate_in(&idx, inputs, |n| lookup(constituents, &n.id))?;
        Ok(self.nodes.keys().cloned().zip(values).collect())
    }
}

fn lookup(set: &ConstituentSet, id: &str) -> Result<Constituent> {
    set.get(id)
        .cloned()
        .ok_or_else(|| Error::Missing(format!("constituent for node `{id}`")))
}

fn topological_order(map: &IndexMap<String, DagNode>) -> Result<Vec<usize>> {
    // Kahn's algorithm over child → parent edges, smallest index first
    let count = map.len();
    let mut pending: Vec<usize> = map.values().map(|n| n.children.len()).collect();
    let mut parents_of: Vec<Vec<usize>> = vec![Vec::new(); count];
    for (i, node) in map.values().enumerate() {
        for c in &node.children {
            parents_of[map.get_index_of(c).expect("validated")].push(i);
        }
    }
    let mut ready: std::collections::BTreeSet<usize> =
        (0..count).filter(|&i| pending[i] == 0).collect();
    let mut order = Vec::with_capacity(count);
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &p in &parents_of[i] {
            pending[p] -= 1;
            if pending[p] == 0 {
                ready.insert(p);
            }
        }
    }
    if order.len() != count {
        return Err(Error::InvalidGraph("cycle detected".into()));
    }
    Ok(order)
}

/// Value at the sink.
pub fn eval_gfunction(dag: &Dag, constituents: &ConstituentSet, inputs: &SourceInputs) -> Result<f64> {
    Ok(dag.eval_all(constituents, inputs)?[dag.sink()])
}

/// Measured and predicted composite error.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationReport {
    /// `max_probes |f_{v*}(x) - g_{v*}(x)|`.
    pub measured: f64,
    /// `B(v*)` from `B(v) = c(v) L_v Σ_children B(u) + ε_v`, `B(source) = ε_v`.
    pub predicted: f64,
    /// Per-node sup gaps `ε_v` measured on the probes.
    pub node_gaps: BTreeMap<String, f64>,
}

/// Compares the composite built from `f` with the one built from `g`.
///
/// `ε_v` is the largest `|f_v - g_v|` seen at the arguments node `v`
/// receives on either path; `L_v` is the node's declared Lipschitz bound.
pub fn propagation_gap(
    dag: &Dag,
    f: &ConstituentSet,
    g: &ConstituentSet,
    probes: &[SourceInputs],
) -> Result<PropagationReport> {
    for node in dag.nodes() {
        if node.kind == NodeKind::Internal && node.lipschitz.is_none() {
            return Err(Error::Missing(format!("Lipschitz bound for node `{}`", node.id)));
        }
    }
    let mut gaps = vec![0.0f64; dag.nodes.len()];
    let mut measured = 0.0f64;
    for probe in probes {
        let fv = dag.evaluate_with(probe, |n| lookup(f, &n.id))?;
        let gv = dag.evaluate_with(probe, |n| lookup(g, &n.id))?;
        for (i, node) in dag.nodes.values().enumerate() {
            let fi = lookup(f, &node.id)?;
            let gi = lookup(g, &node.id)?;
            let args: Vec<Vec<f64>> = match node.kind {
                NodeKind::Source => vec![probe[&node.id].clone()],
                NodeKind::Internal => vec![dag.pooled_args(node, &fv), dag.pooled_args(node, &gv)],
            };
            for a in &args {
                gaps[i] = gaps[i].max((fi(a) - gi(a)).abs());
            }
        }
        let s = dag.nodes.get_index_of(dag.sink()).expect("sink exists");
        measured = measured.max((fv[s] - gv[s]).abs());
    }
    let mut bound = vec![0.0; dag.nodes.len()];
    for &i in &dag.order {
        let node = &dag.nodes[i];
        bound[i] = match node.kind {
            NodeKind::Source => gaps[i],
            NodeKind::Internal => {
                let below: f64 = node
                    .children
                    .iter()
                    .map(|c| bound[dag.nodes.get_index_of(c).expect("validated")])
                    .sum();
                node.pooling.constant() * node.lipschitz.expect("checked above") * below + gaps[i]
            }
        };
    }
    let s = dag.nodes.get_index_of(dag.sink()).expect("sink exists");
    Ok(PropagationReport {
        measured,
        predicted: bound[s],
        node_gaps: dag.nodes.keys().cloned().zip(gaps).collect(),
    })
}

/// Largest difference quotient `|f(a) - f(b)| / |a - b|` over probe pairs.
///
/// This is an estimate from below of the true Lipschitz constant.
pub fn estimate_lipschitz(f: &dyn Fn(&[f64]) -> f64, probes: &[Vec<f64>]) -> f64 {
    let vals: Vec<f64> = probes.iter().map(|p| f(p)).collect();
    let mut best = 0.0f64;
    for i in 0..probes.len() {
        for j in i + 1..probes.len() {
            let d = probes[i]
                .iter()
                .zip(&probes[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if d > 0.0 {
                best = best.max((vals[i] - vals[j]).abs() / d);
            }
        }
    }
    best
}

/// Checks `|π(a) - π(b)|₂ ≤ c Σ_k |a_k - b_k|` on every pair.
pub fn check_pooling_contract(pooling: &PoolingSpec, pairs: &[(Vec<f64>, Vec<f64>)]) -> bool {
    let c = pooling.constant();
    pairs.iter().all(|(a, b)| {
        let pa = pooling.map.apply(a);
        let pb = pooling.map.apply(b);
        let lhs = pa.iter().zip(&pb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let rhs: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
        lhs <= c * rhs * (1.0 + 1e-12) + 1e-15
    })
}

/// Replaces constituents with kernel estimators built from per-node data.
///
/// Nodes with a dataset get `x ↦ estimate_at(data, cfg, x)`. Sources
/// without data keep their constituent from `truth`; an internal node
/// without data is an error.
pub fn build_deep_approx(
    dag: &Dag,
    truth: &ConstituentSet,
    data: &HashMap<String, (Dataset, EstimatorConfig)>,
) -> Result<ConstituentSet> {
    let mut out = ConstituentSet::new();
    for node in dag.nodes() {
        match data.get(&node.id) {
            Some((ds, cfg)) => {
                if ds.ambient_dim() != node.in_dim {
                    return Err(Error::DimensionMismatch {
                        expected: node.in_dim,
                        got: ds.ambient_dim(),
                    });
                }
                let ds = ds.clone();
                let cfg = cfg.clone();
                let g: Constituent =
                    Arc::new(move |x: &[f64]| estimate_at(&ds, &cfg, x).unwrap_or(f64::NAN));
                out.insert(node.id.clone(), g);
            }
            None if node.kind == NodeKind::Source => {
                out.insert(node.id.clone(), lookup(truth, &node.id)?);
            }
            None => return Err(Error::Missing(format!("dataset for node `{}`", node.id))),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum_all() -> Constituent {
        Arc::new(|x: &[f64]| x.iter().sum())
    }

    fn set(ids: &[&str], f: impl Fn(&str) -> Constituent) -> ConstituentSet {
        ids.iter().map(|id| (id.to_string(), f(id))).collect()
    }

    fn binary_tree() -> Dag {
        Dag::new(
            vec![
                DagNode::source("a", 1),
                DagNode::source("b", 1),
                DagNode::source("c", 1),
                DagNode::source("d", 1),
                DagNode::internal("l", &["a", "b"], Pooling::Identity, Some(1.0)),
                DagNode::internal("r", &["c", "d"], Pooling::Identity, Some(1.0)),
                DagNode::internal("top", &["l", "r"], Pooling::Identity, Some(1.0)),
            ],
            "top",
        )
        .unwrap()
    }

    #[test]
    fn order_does_not_change_values() {
        let dag = binary_tree();
        let f = set(&["a", "b", "c", "d", "l", "r", "top"], |id| {
            let w = id.len() as f64;
            Arc::new(move |x: &[f64]| x.iter().map(|v| (w * v).sin()).sum())
        });
        let inputs: SourceInputs = ["a", "b", "c", "d"]
            .iter()
            .enumerate()
            .map(|(i, s)| (s.to_string(), vec![0.2 + i as f64]))
            .collect();
        let base = dag.eval_all(&f, &inputs).unwrap();
        let other = dag
            .eval_all_in_order(&["d", "c", "r", "b", "a", "l", "top"], &f, &inputs)
            .unwrap();
        assert_eq!(base, other);
        assert!(dag
            .eval_all_in_order(&["l", "a", "b", "c", "d", "r", "top"], &f, &inputs)
            .is_err());
    }

    #[test]
    fn single_node_dag() {
        let dag = Dag::new(vec![DagNode::source("x", 2)], "x").unwrap();
        let f = set(&["x"], |_| Arc::new(|v: &[f64]| v[0] * v[1]));
        let inputs: SourceInputs = [("x".to_string(), vec![3.0, 4.0])].into();
        assert_eq!(eval_gfunction(&dag, &f, &inputs).unwrap(), 12.0);
        assert_eq!(dag.depth(), 0);
    }

    #[test]
    fn chain_is_plain_composition() {
        let dag = Dag::new(
            vec![
                DagNode::source("x", 1),
                DagNode::internal("u", &["x"], Pooling::Identity, Some(1.0)),
            ],
            "u",
        )
        .unwrap();
        let mut f = ConstituentSet::new();
        f.insert("x".into(), Arc::new(|v: &[f64]| v[0].sin()));
        f.insert("u".into(), Arc::new(|v: &[f64]| v[0].exp()));
        let inputs: SourceInputs = [("x".to_string(), vec![0.7])].into();
        assert_eq!(eval_gfunction(&dag, &f, &inputs).unwrap(), 0.7f64.sin().exp());
    }

    #[test]
    fn validation_rejects_bad_graphs() {
        let cyc = Dag::new(
            vec![
                DagNode::internal("a", &["b"], Pooling::Identity, None),
                DagNode::internal("b", &["a"], Pooling::Identity, None),
                DagNode::internal("s", &["a"], Pooling::Identity, None),
            ],
            "s",
        );
        assert!(matches!(cyc, Err(Error::InvalidGraph(_))));
        let two_sinks = Dag::new(vec![DagNode::source("a", 1), DagNode::source("b", 1)], "a");
        assert!(two_sinks.is_err());
        let unknown = Dag::new(
            vec![DagNode::internal("s", &["zz"], Pooling::Identity, None)],
            "s",
        );
        assert!(unknown.is_err());
        let mut bad_dim = DagNode::internal("s", &["a"], Pooling::Identity, None);
        bad_dim.in_dim = 2;
        assert!(Dag::new(vec![DagNode::source("a", 1), bad_dim], "s").is_err());
        assert!(Dag::new(vec![DagNode::source("a", 1), DagNode::source("a", 1)], "a").is_err());
    }

    #[test]
    fn levels_and_inputs_seen() {
        let dag = Dag::new(
            vec![
                DagNode::source("x1", 1),
                DagNode::source("x2", 1),
                DagNode::internal("u", &["x1", "x2"], Pooling::Identity, Some(1.0)),
                DagNode::internal("v", &["u", "x2", "x1"], Pooling::Identity, Some(1.0)),
            ],
            "v",
        )
        .unwrap();
        assert_eq!(dag.level("x1"), Some(0));
        assert_eq!(dag.level("u"), Some(1));
        assert_eq!(dag.level("v"), Some(2));
        assert_eq!(dag.inputs_seen("v").unwrap(), ["x1", "x2", "x2", "x1"]);
        for node in dag.nodes().filter(|n| n.kind == NodeKind::Internal) {
            let expected = 1 + node.children.iter().map(|c| dag.level(c).unwrap()).max().unwrap();
            assert_eq!(dag.level(&node.id), Some(expected));
        }
    }

    #[test]
    fn missing_inputs_and_constituents() {
        let dag = binary_tree();
        let f = set(&["a", "b", "c", "d", "l", "r", "top"], |_| sum_all());
        let partial: SourceInputs = [("a".to_string(), vec![1.0])].into();
        assert!(matches!(eval_gfunction(&dag, &f, &partial), Err(Error::Missing(_))));
        let mut inputs: SourceInputs = ["a", "b", "c", "d"]
            .iter()
            .map(|s| (s.to_string(), vec![1.0]))
            .collect();
        inputs.insert("a".into(), vec![1.0, 2.0]);
        assert!(eval_gfunction(&dag, &f, &inputs).is_err());
        let g = set(&["a", "b"], |_| sum_all());
        inputs.insert("a".into(), vec![1.0]);
        assert!(eval_gfunction(&dag, &g, &inputs).is_err());
    }

    #[test]
    fn identical_sets_have_zero_gap() {
        let dag = binary_tree();
        let f = set(&["a", "b", "c", "d", "l", "r", "top"], |_| sum_all());
        let probe: SourceInputs = ["a", "b", "c", "d"]
            .iter()
            .enumerate()
            .map(|(i, s)| (s.to_string(), vec![i as f64 * 0.3]))
            .collect();
        let rep = propagation_gap(&dag, &f, &f, &[probe]).unwrap();
        assert_eq!(rep.measured, 0.0);
        assert_eq!(rep.predicted, 0.0);
    }

    #[test]
    fn binary_tree_bound_is_three_eps() {
        let dag = binary_tree();
        let eps = 1e-3;
        let f = set(&["a", "b", "c", "d", "l", "r", "top"], |_| sum_all());
        let g = set(&["a", "b", "c", "d", "l", "r", "top"], |id| {
            let shift = match id {
                "l" | "top" => eps,
                "r" => -eps,
                _ => 0.0,
            };
            Arc::new(move |x: &[f64]| x.iter().sum::<f64>() + shift)
        });
        let probe: SourceInputs = ["a", "b", "c", "d"]
            .iter()
            .map(|s| (s.to_string(), vec![0.5]))
            .collect();
        let rep = propagation_gap(&dag, &f, &g, &[probe]).unwrap();
        // sources have zero gap here, so B(top) = 1·(ε + ε) + ε
        assert!((rep.predicted - 3.0 * eps).abs() < 1e-15);
        assert!(rep.measured <= rep.predicted + 1e-15);
    }

    #[test]
    fn missing_lipschitz_is_rejected() {
        let dag = Dag::new(
            vec![
                DagNode::source("x", 1),
                DagNode::internal("u", &["x"], Pooling::Identity, None),
            ],
            "u",
        )
        .unwrap();
        let f = set(&["x", "u"], |_| sum_all());
        assert!(propagation_gap(&dag, &f, &f, &[]).is_err());
    }

    #[test]
    fn pooling_maps_and_contract() {
        let clip = Pooling::Clip { lo: -1.0, hi: 1.0 };
        assert_eq!(clip.apply(&[-3.0, 0.5, 2.0]), vec![-1.0, 0.5, 1.0]);
        let sphere = Pooling::Sphere { radius: 2.0 };
        let p = sphere.apply(&[3.0, 4.0]);
        assert!((p[0] - 1.2).abs() < 1e-15 && (p[1] - 1.6).abs() < 1e-15);
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..50)
            .map(|i| {
                let t = i as f64 * 0.13;
                (vec![t.cos() * 1.1, t.sin()], vec![(t + 0.05).cos(), (t + 0.05).sin() * 0.95])
            })
            .collect();
        assert!(check_pooling_contract(&Pooling::Identity.into(), &pairs));
        assert!(check_pooling_contract(&clip.into(), &pairs));
        assert!(check_pooling_contract(&Pooling::Sphere { radius: 1.0 }.into(), &pairs));
        let tight = PoolingSpec {
            map: Pooling::Identity,
            c: Some(0.1),
        };
        assert!(!check_pooling_contract(&tight, &pairs));
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{
            "nodes": [
                {"id": "x", "kind": "source", "in_dim": 1},
                {"id": "y", "kind": "source", "in_dim": 1},
                {"id": "s", "kind": "internal", "in_dim": 2, "children": ["x", "y"],
                 "pooling": {"name": "sphere", "radius": 1.0, "c": 2.5}, "lipschitz": 3.0}
            ],
            "sink": "s"
        }"#;
        let dag = Dag::from_json(text).unwrap();
        let s = dag.node("s").unwrap();
        assert_eq!(s.pooling.constant(), 2.5);
        assert_eq!(s.lipschitz, Some(3.0));
        let again = Dag::from_json(&dag.to_json().unwrap()).unwrap();
        assert_eq!(again.topological_ids(), dag.topological_ids());
        assert!(Dag::from_json(r#"{"nodes": [], "sink": "q"}"#).is_err());
    }

    #[test]
    fn lipschitz_estimate_for_linear_map() {
        let probes: Vec<Vec<f64>> = (0..25)
            .map(|i| vec![(i % 5) as f64 * 0.1, (i / 5) as f64 * 0.13])
            .collect();
        let l = estimate_lipschitz(&|x: &[f64]| 3.0 * x[0] + 4.0 * x[1], &probes);
        assert!(l <= 5.0 + 1e-12);
        assert!(l > 4.5);
    }
}
