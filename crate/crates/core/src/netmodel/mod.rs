//! Flow-network data model.
//!
//! A [`FlowNetwork`] is a weighted directed graph whose nodes are kept in
//! lexicographic order of their ids, so every matrix built downstream has a
//! reproducible row order. Parallel edges are merged by summing weights.

mod io;
mod synth;

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_labels, load_network, write_labels, write_network, IngestReport, LabelReport};
pub use synth::{planted_communities, synth_network, synth_network_with, PlantedLaw, SynthConfig};

/// Site identifier. Never empty.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::Validation("node id must not be empty".into()));
        }
        Ok(NodeId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

// Ord, Eq and Hash are derived from the single `String` field, so they agree
// with `str`'s.
impl Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl FromStr for NodeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NodeId::new(s)
    }
}

impl TryFrom<String> for NodeId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        NodeId::new(s)
    }
}

impl From<NodeId> for String {
    fn from(id: NodeId) -> String {
        id.0
    }
}

/// A directed edge between node indices of the owning network.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowNetwork {
    nodes: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    /// Sorted by `(src, dst)`, at most one edge per ordered pair.
    edges: Vec<Edge>,
}

fn check_weight(weight: f64) -> Result<()> {
    if !(weight.is_finite() && weight > 0.0) {
        return Err(Error::Validation(format!(
            "edge weight must be a positive finite number, got {weight}"
        )));
    }
    Ok(())
}

impl FlowNetwork {
    /// Builds a network whose node set is the union of edge endpoints.
    pub fn from_edges<I, S, T>(edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T, f64)>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        Self::with_nodes(std::iter::empty::<&str>(), edges)
    }

    /// Like [`FlowNetwork::from_edges`] but also keeps the listed nodes even
    /// when no edge touches them.
    pub fn with_nodes<N, NS, I, S, T>(nodes: N, edges: I) -> Result<Self>
    where
        N: IntoIterator<Item = NS>,
        NS: AsRef<str>,
        I: IntoIterator<Item = (S, T, f64)>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let mut names: BTreeSet<String> = BTreeSet::new();
        for n in nodes {
            let n = n.as_ref();
            if n.is_empty() {
                return Err(Error::Validation("node id must not be empty".into()));
            }
            names.insert(n.to_owned());
        }
        let mut raw = Vec::new();
        for (s, t, w) in edges {
            let (s, t) = (s.as_ref(), t.as_ref());
            if s.is_empty() || t.is_empty() {
                return Err(Error::Validation("node id must not be empty".into()));
            }
            check_weight(w)?;
            names.insert(s.to_owned());
            names.insert(t.to_owned());
            raw.push((s.to_owned(), t.to_owned(), w));
        }
        let nodes: Vec<NodeId> = names.into_iter().map(NodeId).collect();
        let index: HashMap<NodeId, usize> =
            nodes.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        let edges = raw
            .into_iter()
            .map(|(s, t, weight)| Edge {
                src: index[s.as_str()],
                dst: index[t.as_str()],
                weight,
            })
            .collect();
        Ok(Self::assemble(nodes, index, edges).0)
    }

    /// Builds a network over an already-sorted node list. Duplicate ordered
    /// pairs are merged; the number of merges is returned alongside.
    pub(crate) fn from_indexed(nodes: Vec<NodeId>, edges: Vec<Edge>) -> (Self, usize) {
        debug_assert!(nodes.windows(2).all(|w| w[0] < w[1]));
        let index = nodes.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        Self::assemble(nodes, index, edges)
    }

    fn assemble(
        nodes: Vec<NodeId>,
        index: HashMap<NodeId, usize>,
        mut edges: Vec<Edge>,
    ) -> (Self, usize) {
        // Stable sort keeps summation order equal to input order.
        edges.sort_by_key(|e| (e.src, e.dst));
        let mut merged: Vec<Edge> = Vec::with_capacity(edges.len());
        let mut merges = 0;
        for e in edges {
            match merged.last_mut() {
                Some(last) if last.src == e.src && last.dst == e.dst => {
                    last.weight += e.weight;
                    merges += 1;
                }
                _ => merged.push(e),
            }
        }
        (
            FlowNetwork {
                nodes,
                index,
                edges: merged,
            },
            merges,
        )
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &NodeId {
        &self.nodes[i]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn weight(&self, src: &str, dst: &str) -> Option<f64> {
        let (s, d) = (self.index_of(src)?, self.index_of(dst)?);
        self.edges
            .binary_search_by_key(&(s, d), |e| (e.src, e.dst))
            .ok()
            .map(|k| self.edges[k].weight)
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Edges as `(src id, dst id, weight)`, in index order.
    pub fn edge_triples(&self) -> impl Iterator<Item = (&str, &str, f64)> + '_ {
        self.edges
            .iter()
            .map(|e| (self.nodes[e.src].as_str(), self.nodes[e.dst].as_str(), e.weight))
    }

    pub fn out_strength(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_nodes()];
        for e in &self.edges {
            out[e.src] += e.weight;
        }
        out
    }

    pub fn in_strength(&self) -> Vec<f64> {
        let mut inn = vec![0.0; self.n_nodes()];
        for e in &self.edges {
            inn[e.dst] += e.weight;
        }
        inn
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n_nodes()];
        for e in &self.edges {
            d[e.src] += 1;
        }
        d
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n_nodes()];
        for e in &self.edges {
            d[e.dst] += 1;
        }
        d
    }

    /// Copy of the network restricted to the given edges, dropping nodes no
    /// kept edge touches.
    pub(crate) fn keep_edges(&self, keep: impl Fn(usize, &Edge) -> bool) -> FlowNetwork {
        let kept: Vec<Edge> = self
            .edges
            .iter()
            .enumerate()
            .filter(|(k, e)| keep(*k, e))
            .map(|(_, e)| *e)
            .collect();
        remap_touched(&self.nodes, kept)
    }

    /// Multiplies every weight by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<FlowNetwork> {
        check_weight(factor)?;
        let mut out = self.clone();
        for e in &mut out.edges {
            e.weight *= factor;
        }
        Ok(out)
    }
}

/// Rebuilds a network from edges indexed into `nodes`, keeping only touched
/// nodes and merging duplicate pairs.
pub(crate) fn remap_touched(nodes: &[NodeId], edges: Vec<Edge>) -> FlowNetwork {
    let mut used = vec![false; nodes.len()];
    for e in &edges {
        used[e.src] = true;
        used[e.dst] = true;
    }
    let mut new_index = vec![usize::MAX; nodes.len()];
    let mut kept_nodes = Vec::new();
    for (i, n) in nodes.iter().enumerate() {
        if used[i] {
            new_index[i] = kept_nodes.len();
            kept_nodes.push(n.clone());
        }
    }
    let edges = edges
        .into_iter()
        .map(|e| Edge {
            src: new_index[e.src],
            dst: new_index[e.dst],
            weight: e.weight,
        })
        .collect();
    FlowNetwork::from_indexed(kept_nodes, edges).0
}

/// Node → label assignment. Nodes without an entry are "unlabeled".
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabelMap {
    entries: BTreeMap<NodeId, String>,
}

impl LabelMap {
    /// Collects `(node, label)` pairs. Repeating a pair is fine; assigning a
    /// node two different labels is an error.
    pub fn from_pairs<I, S, L>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, L)>,
        S: AsRef<str>,
        L: AsRef<str>,
    {
        let mut map = LabelMap::default();
        for (node, label) in pairs {
            map.insert(NodeId::new(node.as_ref())?, label.as_ref())?;
        }
        Ok(map)
    }

    pub(crate) fn insert(&mut self, node: NodeId, label: &str) -> Result<()> {
        if label.is_empty() {
            return Err(Error::Validation(format!("empty label for node {node}")));
        }
        match self.entries.get(&node) {
            Some(existing) if existing != label => Err(Error::Validation(format!(
                "node {node} has conflicting labels {existing:?} and {label:?}"
            ))),
            Some(_) => Ok(()),
            None => {
                self.entries.insert(node, label.to_owned());
                Ok(())
            }
        }
    }

    pub fn get(&self, node: &str) -> Option<&str> {
        self.entries.get(node).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, &str)> {
        self.entries.iter().map(|(k, v)| (k, v.as_str()))
    }

    /// Distinct labels, sorted.
    pub fn labels(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self.entries.values().map(String::as_str).collect();
        set.into_iter().collect()
    }

    /// Per-node label lookup aligned with `net`'s node indices.
    pub fn by_index<'a>(&'a self, net: &FlowNetwork) -> Vec<Option<&'a str>> {
        net.nodes().iter().map(|n| self.get(n.as_str())).collect()
    }

    pub(crate) fn retain(&mut self, mut keep: impl FnMut(&NodeId) -> bool) {
        self.entries.retain(|k, _| keep(k));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_merge_by_summation() {
        let net = FlowNetwork::from_edges([("a", "b", 10.0), ("a", "b", 5.0)]).unwrap();
        assert_eq!(net.n_nodes(), 2);
        assert_eq!(net.n_edges(), 1);
        assert_eq!(net.weight("a", "b"), Some(15.0));
    }

    #[test]
    fn opposite_directions_are_distinct_edges() {
        let net = FlowNetwork::from_edges([("a", "b", 10.0), ("b", "a", 5.0)]).unwrap();
        assert_eq!(net.n_nodes(), 2);
        assert_eq!(net.n_edges(), 2);
    }

    #[test]
    fn self_loops_are_kept() {
        let net = FlowNetwork::from_edges([("a", "a", 5.0)]).unwrap();
        assert_eq!(net.n_nodes(), 1);
        assert_eq!(net.weight("a", "a"), Some(5.0));
    }

    #[test]
    fn rejects_nonpositive_weights() {
        assert!(matches!(
            FlowNetwork::from_edges([("a", "b", -1.0)]),
            Err(Error::Validation(_))
        ));
        assert!(FlowNetwork::from_edges([("a", "b", 0.0)]).is_err());
        assert!(FlowNetwork::from_edges([("a", "b", f64::NAN)]).is_err());
    }

    #[test]
    fn nodes_are_sorted_lexicographically() {
        let net = FlowNetwork::from_edges([("zeta", "alpha", 1.0), ("mid", "zeta", 1.0)]).unwrap();
        let ids: Vec<&str> = net.nodes().iter().map(NodeId::as_str).collect();
        assert_eq!(ids, ["alpha", "mid", "zeta"]);
    }

    #[test]
    fn label_conflict_is_rejected() {
        let err = LabelMap::from_pairs([("a", "English"), ("a", "French")]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        let ok = LabelMap::from_pairs([("a", "English"), ("a", "English")]).unwrap();
        assert_eq!(ok.len(), 1);
        assert_eq!(ok.get("a"), Some("English"));
        assert_eq!(ok.get("b"), None);
    }

    #[test]
    fn keep_edges_drops_isolated_nodes() {
        let net = FlowNetwork::from_edges([("a", "b", 1.0), ("c", "d", 2.0)]).unwrap();
        let kept = net.keep_edges(|_, e| e.weight > 1.5);
        assert_eq!(kept.n_nodes(), 2);
        assert_eq!(kept.weight("c", "d"), Some(2.0));
    }
}
