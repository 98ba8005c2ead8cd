//! Two-level spring embedding: communities are laid out as circles, then each
//! community's sites are laid out inside its circle.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::community::induce_subnetworks;
use crate::error::{Error, Result};
use crate::netmodel::{FlowNetwork, LabelMap, NodeId};
use crate::output::write_json;
use crate::seeds::hash_str;

pub const OTHER_LABEL: &str = "__other__";
pub const DEFAULT_ITERATIONS: usize = 500;

/// Label-level network: one node per label, edges carry the flow between
/// distinct labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub network: FlowNetwork,
    /// Total weight of edges inside each label.
    pub intra_flow: BTreeMap<String, f64>,
}

/// Collapses labeled nodes into one node per label. Edges touching unlabeled
/// nodes are ignored.
pub fn aggregate_communities(net: &FlowNetwork, labels: &LabelMap) -> Result<Aggregate> {
    let label_of = labels.by_index(net);
    let present: BTreeSet<&str> = label_of.iter().flatten().copied().collect();
    let mut intra: BTreeMap<String, f64> = present.iter().map(|l| (l.to_string(), 0.0)).collect();
    let mut cross: Vec<(&str, &str, f64)> = Vec::new();
    for e in net.edges() {
        if let (Some(a), Some(b)) = (label_of[e.src], label_of[e.dst]) {
            if a == b {
                *intra.get_mut(a).unwrap() += e.weight;
            } else {
                cross.push((a, b, e.weight));
            }
        }
    }
    Ok(Aggregate {
        network: FlowNetwork::with_nodes(present, cross)?,
        intra_flow: intra,
    })
}

/// Fruchterman-Reingold in the unit square from random initial positions.
/// Returns positions aligned with `net.nodes()`.
pub fn spring_layout(net: &FlowNetwork, iterations: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init: Vec<[f64; 2]> = (0..net.n_nodes())
        .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
        .collect();
    spring_layout_from(net, init, iterations)
}

/// Fruchterman-Reingold from the given positions. Edges are treated as
/// undirected and unweighted; self-loops exert no force. The step cap starts
/// at 0.1 and cools linearly to zero.
pub fn spring_layout_from(net: &FlowNetwork, mut pos: Vec<[f64; 2]>, iterations: usize) -> Vec<[f64; 2]> {
    let n = pos.len();
    assert_eq!(n, net.n_nodes(), "one initial position per node");
    if n == 1 {
        return vec![[0.5, 0.5]];
    }
    if n == 0 {
        return pos;
    }
    let links: BTreeSet<(usize, usize)> = net
        .edges()
        .iter()
        .filter(|e| e.src != e.dst)
        .map(|e| (e.src.min(e.dst), e.src.max(e.dst)))
        .collect();
    let k = (1.0 / n as f64).sqrt();
    let k2 = k * k;
    let t0 = 0.1;
    let mut disp = vec![[0.0f64; 2]; n];
    for it in 0..iterations {
        for d in disp.iter_mut() {
            *d = [0.0, 0.0];
        }
        for i in 0..n {
            for j in i + 1..n {
                let dx = pos[i][0] - pos[j][0];
                let dy = pos[i][1] - pos[j][1];
                let dist = (dx * dx + dy * dy).sqrt().max(1e-9);
                let f = k2 / (dist * dist);
                disp[i][0] += dx * f;
                disp[i][1] += dy * f;
                disp[j][0] -= dx * f;
                disp[j][1] -= dy * f;
            }
        }
        for &(i, j) in &links {
            let dx = pos[i][0] - pos[j][0];
            let dy = pos[i][1] - pos[j][1];
            let dist = (dx * dx + dy * dy).sqrt();
            let f = dist / k;
            disp[i][0] -= dx * f;
            disp[i][1] -= dy * f;
            disp[j][0] += dx * f;
            disp[j][1] += dy * f;
        }
        let t = t0 * (1.0 - it as f64 / iterations as f64);
        for (p, d) in pos.iter_mut().zip(&disp) {
            let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
            if len > 0.0 {
                let step = len.min(t) / len;
                p[0] = (p[0] + d[0] * step).clamp(0.0, 1.0);
                p[1] = (p[1] + d[1] * step).clamp(0.0, 1.0);
            }
        }
    }
    pos
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RadiusRule {
    /// Circle area proportional to intra-community flow.
    #[default]
    Sqrt,
    /// Radius proportional to intra-community flow.
    Linear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayoutOptions {
    pub iterations: usize,
    /// Radius of the community with the most internal flow, before shrinking.
    pub r_max: f64,
    pub radius: RadiusRule,
}

impl Default for LayoutOptions {
    fn default() -> Self {
        LayoutOptions {
            iterations: DEFAULT_ITERATIONS,
            r_max: 0.15,
            radius: RadiusRule::Sqrt,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Circle {
    pub label: String,
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodePosition {
    pub id: NodeId,
    pub label: String,
    pub x: f64,
    pub y: f64,
    pub traffic: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayoutResult {
    pub seed: u64,
    pub circles: Vec<Circle>,
    pub nodes: Vec<NodePosition>,
}

impl LayoutResult {
    pub fn circle(&self, label: &str) -> Option<&Circle> {
        self.circles.iter().find(|c| c.label == label)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(self, path)
    }
}

pub fn two_level_layout(net: &FlowNetwork, labels: &LabelMap, seed: u64) -> Result<LayoutResult> {
    two_level_layout_with(net, labels, seed, &LayoutOptions::default())
}

/// Lays out community centers with the aggregate network, sizes circles by
/// internal flow, shrinks them uniformly until no two overlap, then fits each
/// community's own layout into its circle. Unlabeled nodes share the
/// `__other__` circle.
pub fn two_level_layout_with(
    net: &FlowNetwork,
    labels: &LabelMap,
    seed: u64,
    opts: &LayoutOptions,
) -> Result<LayoutResult> {
    if net.n_nodes() == 0 {
        return Err(Error::EmptyNetwork);
    }
    if opts.iterations == 0 || !(opts.r_max > 0.0) {
        return Err(Error::Validation("layout needs iterations >= 1 and r_max > 0".into()));
    }
    let mut full = labels.clone();
    for n in net.nodes() {
        if labels.get(n.as_str()).is_none() {
            full.insert(n.clone(), OTHER_LABEL)?;
        }
    }

    let agg = aggregate_communities(net, &full)?;
    let centers = spring_layout(&agg.network, opts.iterations, seed);
    let flow_max = agg.intra_flow.values().copied().fold(0.0, f64::max);
    let mut radii: Vec<f64> = agg
        .network
        .nodes()
        .iter()
        .map(|l| {
            if flow_max == 0.0 {
                return opts.r_max;
            }
            let share = agg.intra_flow[l.as_str()] / flow_max;
            match opts.radius {
                RadiusRule::Sqrt => opts.r_max * share.sqrt(),
                RadiusRule::Linear => opts.r_max * share,
            }
        })
        .collect();
    let mut shrink: f64 = 1.0;
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            let sum = radii[i] + radii[j];
            if sum > 0.0 {
                let dist = (centers[i][0] - centers[j][0]).hypot(centers[i][1] - centers[j][1]);
                shrink = shrink.min(dist / sum);
            }
        }
    }
    for r in &mut radii {
        *r *= shrink;
    }

    let traffic: Vec<f64> = net
        .out_strength()
        .into_iter()
        .zip(net.in_strength())
        .map(|(o, i)| o.max(i))
        .collect();
    let part = induce_subnetworks(net, &full);
    let placed: Vec<Vec<NodePosition>> = part
        .communities
        .par_iter()
        .map(|c| {
            let k = agg.network.index_of(&c.label).unwrap();
            let (center, r) = (centers[k], radii[k]);
            let local = spring_layout(&c.network, opts.iterations, seed ^ hash_str(&c.label));
            let reach = local
                .iter()
                .map(|p| (p[0] - 0.5).hypot(p[1] - 0.5))
                .fold(0.0, f64::max);
            let scale = if reach > 0.0 { r / reach } else { 0.0 };
            c.network
                .nodes()
                .iter()
                .zip(&local)
                .map(|(id, p)| NodePosition {
                    id: id.clone(),
                    label: c.label.clone(),
                    x: center[0] + (p[0] - 0.5) * scale,
                    y: center[1] + (p[1] - 0.5) * scale,
                    traffic: traffic[net.index_of(id.as_str()).unwrap()],
                })
                .collect()
        })
        .collect();
    let mut nodes: Vec<NodePosition> = placed.into_iter().flatten().collect();
    nodes.sort_by(|a, b| a.id.cmp(&b.id));
    let circles = agg
        .network
        .nodes()
        .iter()
        .enumerate()
        .map(|(k, l)| Circle {
            label: l.to_string(),
            cx: centers[k][0],
            cy: centers[k][1],
            r: radii[k],
        })
        .collect();
    Ok(LayoutResult {
        seed,
        circles,
        nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(pairs: &[(&str, &str)]) -> LabelMap {
        LabelMap::from_pairs(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn aggregate_sums_by_label_pair() {
        let net = FlowNetwork::from_edges([("a", "c", 3.0), ("b", "c", 4.0), ("c", "a", 1.0)])
            .unwrap();
        let agg = aggregate_communities(&net, &labels(&[("a", "X"), ("b", "X"), ("c", "Y")]))
            .unwrap();
        assert_eq!(agg.network.n_edges(), 2);
        assert_eq!(agg.network.weight("X", "Y"), Some(7.0));
        assert_eq!(agg.network.weight("Y", "X"), Some(1.0));
        assert_eq!(agg.intra_flow["X"], 0.0);
    }

    #[test]
    fn aggregate_without_cross_edges() {
        let net = FlowNetwork::from_edges([("a", "b", 3.0), ("c", "d", 4.0)]).unwrap();
        let agg = aggregate_communities(
            &net,
            &labels(&[("a", "X"), ("b", "X"), ("c", "Y"), ("d", "Y")]),
        )
        .unwrap();
        assert_eq!(agg.network.n_nodes(), 2);
        assert_eq!(agg.network.n_edges(), 0);
        assert_eq!(agg.intra_flow["X"], 3.0);
        assert_eq!(agg.intra_flow["Y"], 4.0);
    }

    #[test]
    fn single_node_at_center() {
        let net = FlowNetwork::from_edges([("a", "a", 1.0)]).unwrap();
        assert_eq!(spring_layout(&net, 50, 3), [[0.5, 0.5]]);
    }

    #[test]
    fn symmetric_pair_stays_symmetric() {
        let net = FlowNetwork::from_edges([("a", "b", 1.0)]).unwrap();
        let pos = spring_layout_from(&net, vec![[0.2, 0.4], [0.8, 0.6]], 500);
        assert!((pos[0][0] + pos[1][0] - 1.0).abs() < 1e-9);
        assert!((pos[0][1] + pos[1][1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn spring_is_deterministic() {
        let net = crate::netmodel::synth_network(60, 2, 1).unwrap();
        assert_eq!(spring_layout(&net, 100, 9), spring_layout(&net, 100, 9));
        assert_ne!(spring_layout(&net, 100, 9), spring_layout(&net, 100, 10));
    }

    #[test]
    fn one_community_is_centered() {
        let net = FlowNetwork::from_edges([("a", "b", 3.0), ("b", "c", 1.0)]).unwrap();
        let res = two_level_layout(&net, &labels(&[("a", "X"), ("b", "X"), ("c", "X")]), 1).unwrap();
        assert_eq!(res.circles.len(), 1);
        let c = &res.circles[0];
        assert_eq!((c.cx, c.cy), (0.5, 0.5));
        for p in &res.nodes {
            assert!((p.x - c.cx).hypot(p.y - c.cy) <= c.r + 1e-12);
        }
    }

    #[test]
    fn radius_follows_square_root_of_flow() {
        let net = FlowNetwork::from_edges([
            ("a", "b", 60.0),
            ("b", "a", 40.0),
            ("c", "d", 25.0),
            ("b", "c", 1.0),
        ])
        .unwrap();
        let res = two_level_layout(
            &net,
            &labels(&[("a", "X"), ("b", "X"), ("c", "Y"), ("d", "Y")]),
            2,
        )
        .unwrap();
        let (x, y) = (res.circle("X").unwrap(), res.circle("Y").unwrap());
        assert!((x.r / y.r - 2.0).abs() < 1e-12);
        assert!((x.cx - y.cx).hypot(x.cy - y.cy) >= x.r + y.r - 1e-12);
    }

    #[test]
    fn unlabeled_nodes_go_to_other() {
        let net = FlowNetwork::from_edges([("a", "b", 3.0), ("b", "c", 1.0), ("c", "d", 2.0)])
            .unwrap();
        let res = two_level_layout(&net, &labels(&[("a", "X"), ("b", "X")]), 5).unwrap();
        assert!(res.circle(OTHER_LABEL).is_some());
        let c = res.nodes.iter().find(|p| p.id.as_str() == "c").unwrap();
        assert_eq!(c.label, OTHER_LABEL);
        assert_eq!(c.traffic, 2.0);
        assert_eq!(res.nodes.len(), 4);
    }
}
