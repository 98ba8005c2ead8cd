use std::cmp::Ordering;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::impact::analyze;
use crate::netmodel::{Edge, FlowNetwork};
use crate::output::write_file;
use crate::scaling::{fit_scaling_with, FitOptions, ScalingFit};

/// How many of a node's `k` weakest edges are flagged at retention `alpha`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RemovalCount {
    /// `floor((1 - alpha) k)`: never flags a node's only edge unless `alpha = 0`.
    #[default]
    Floor,
    /// `ceil((1 - alpha) k)`.
    Ceil,
}

/// How the per-endpoint flags combine into a removal decision.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FlagCombine {
    /// Removed when either endpoint flags the edge.
    #[default]
    Union,
    /// Removed only when both endpoints flag it.
    Intersection,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BackboneRule {
    pub count: RemovalCount,
    pub combine: FlagCombine,
}

// Absorbs representation error in (1 - alpha) * k, e.g. (1 - 0.8) * 5.
const COUNT_EPS: f64 = 1e-9;

fn removal_count(alpha: f64, k: usize, rule: RemovalCount) -> usize {
    let raw = (1.0 - alpha) * k as f64;
    let n = match rule {
        RemovalCount::Floor => (raw + COUNT_EPS).floor(),
        RemovalCount::Ceil => (raw - COUNT_EPS).ceil().max(0.0),
    };
    (n as usize).min(k)
}

/// Keeps each node's strongest edges. For every node, its outgoing edges are
/// ranked by weight (heaviest first, ties by target id) and the weakest
/// `floor((1 - alpha) k_out)` are flagged; incoming edges likewise, ties by
/// source id. An edge flagged by either endpoint is removed and nodes left
/// without edges are dropped.
pub fn backbone(net: &FlowNetwork, alpha: f64) -> Result<FlowNetwork> {
    backbone_with(net, alpha, BackboneRule::default())
}

pub fn backbone_with(net: &FlowNetwork, alpha: f64, rule: BackboneRule) -> Result<FlowNetwork> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Validation(format!(
            "backbone alpha must be in (0, 1], got {alpha}"
        )));
    }
    let flags = edge_flags(net, alpha, rule.count);
    Ok(net.keep_edges(|k, _| {
        let (by_src, by_dst) = flags[k];
        let removed = match rule.combine {
            FlagCombine::Union => by_src || by_dst,
            FlagCombine::Intersection => by_src && by_dst,
        };
        !removed
    }))
}

/// Per edge: (flagged by its source, flagged by its target).
fn edge_flags(net: &FlowNetwork, alpha: f64, count: RemovalCount) -> Vec<(bool, bool)> {
    let n = net.n_nodes();
    let edges = net.edges();
    let mut out_edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut in_edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, e) in edges.iter().enumerate() {
        out_edges[e.src].push(k);
        in_edges[e.dst].push(k);
    }
    let mut flags = vec![(false, false); edges.len()];
    // Node indices follow lexicographic id order, so comparing indices breaks
    // ties by id.
    let strongest_first = |key: fn(&Edge) -> usize| {
        move |a: &usize, b: &usize| -> Ordering {
            let (ea, eb) = (&edges[*a], &edges[*b]);
            eb.weight
                .total_cmp(&ea.weight)
                .then_with(|| key(ea).cmp(&key(eb)))
        }
    };
    for list in &mut out_edges {
        list.sort_by(strongest_first(|e| e.dst));
        let drop = removal_count(alpha, list.len(), count);
        for &k in &list[list.len() - drop..] {
            flags[k].0 = true;
        }
    }
    for list in &mut in_edges {
        list.sort_by(strongest_first(|e| e.src));
        let drop = removal_count(alpha, list.len(), count);
        for &k in &list[list.len() - drop..] {
            flags[k].1 = true;
        }
    }
    flags
}

#[derive(Clone, Debug, PartialEq)]
pub struct BackbonePoint {
    pub alpha: f64,
    pub n_nodes: usize,
    pub n_edges: usize,
    /// The fit, or why the thinned network could not be analyzed.
    pub fit: std::result::Result<ScalingFit, String>,
}

/// Thins, rebalances, recomputes impact and refits for each alpha, in the
/// order given. Analysis failures become per-point errors.
pub fn backbone_sweep(net: &FlowNetwork, alphas: &[f64], opts: &FitOptions) -> Result<Vec<BackbonePoint>> {
    backbone_sweep_with(net, alphas, BackboneRule::default(), opts)
}

pub fn backbone_sweep_with(
    net: &FlowNetwork,
    alphas: &[f64],
    rule: BackboneRule,
    opts: &FitOptions,
) -> Result<Vec<BackbonePoint>> {
    let thinned: Vec<FlowNetwork> = alphas
        .iter()
        .map(|&a| backbone_with(net, a, rule))
        .collect::<Result<_>>()?;
    Ok(alphas
        .par_iter()
        .zip(thinned.par_iter())
        .map(|(&alpha, sub)| {
            let fit = analyze(sub)
                .and_then(|an| fit_scaling_with(&an.table, opts))
                .map_err(|e| e.to_string());
            BackbonePoint {
                alpha,
                n_nodes: sub.n_nodes(),
                n_edges: sub.n_edges(),
                fit,
            }
        })
        .collect())
}

/// CSV `alpha,nodes,edges,gamma,r2,rho,d`; failed points carry `NA` stats.
pub fn sweep_csv(points: &[BackbonePoint]) -> String {
    let mut out = String::from("alpha,nodes,edges,gamma,r2,rho,d\n");
    for p in points {
        let stats = match &p.fit {
            Ok(f) => format!("{},{},{},{}", f.gamma, f.r2, f.rho, f.d),
            Err(_) => "NA,NA,NA,NA".to_string(),
        };
        out.push_str(&format!("{},{},{},{}\n", p.alpha, p.n_nodes, p.n_edges, stats));
    }
    out
}

pub fn write_sweep_csv(points: &[BackbonePoint], path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), sweep_csv(points).as_bytes())
}
