//! Per-label subnetworks and their scaling fits.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::impact::analyze;
use crate::netmodel::{Edge, FlowNetwork, LabelMap, NodeId};
use crate::output::write_file;
use crate::scaling::{fit_scaling_with, FitOptions, ScalingFit};

pub const DEFAULT_MIN_SITES: usize = 3;
pub const SKIP_BELOW_MIN: &str = "below minimum size";

#[derive(Clone, Debug, PartialEq)]
pub struct Community {
    pub label: String,
    /// Every node carrying the label, with the edges among them.
    pub network: FlowNetwork,
}

/// A network split by label.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    /// One entry per distinct label, in label order.
    pub communities: Vec<Community>,
    /// Edges joining two different labels.
    pub cross_edges: usize,
    pub cross_weight: f64,
    /// Edges with at least one unlabeled endpoint.
    pub unlabeled_edges: usize,
    pub unlabeled_weight: f64,
    pub unlabeled_nodes: usize,
}

pub fn induce_subnetworks(net: &FlowNetwork, labels: &LabelMap) -> Partition {
    let label_of = labels.by_index(net);
    let mut groups: BTreeMap<&str, (Vec<usize>, Vec<Edge>)> = BTreeMap::new();
    for (i, l) in label_of.iter().enumerate() {
        if let Some(l) = l {
            groups.entry(l).or_default().0.push(i);
        }
    }
    let mut part = Partition {
        communities: Vec::with_capacity(groups.len()),
        cross_edges: 0,
        cross_weight: 0.0,
        unlabeled_edges: 0,
        unlabeled_weight: 0.0,
        unlabeled_nodes: label_of.iter().filter(|l| l.is_none()).count(),
    };
    for e in net.edges() {
        match (label_of[e.src], label_of[e.dst]) {
            (Some(a), Some(b)) if a == b => groups.get_mut(a).unwrap().1.push(*e),
            (Some(_), Some(_)) => {
                part.cross_edges += 1;
                part.cross_weight += e.weight;
            }
            _ => {
                part.unlabeled_edges += 1;
                part.unlabeled_weight += e.weight;
            }
        }
    }
    for (label, (members, edges)) in groups {
        // Members are in index order, hence already sorted by id.
        let mut local = vec![usize::MAX; net.n_nodes()];
        for (k, &i) in members.iter().enumerate() {
            local[i] = k;
        }
        let nodes: Vec<NodeId> = members.iter().map(|&i| net.node(i).clone()).collect();
        let edges = edges
            .into_iter()
            .map(|e| Edge {
                src: local[e.src],
                dst: local[e.dst],
                weight: e.weight,
            })
            .collect();
        part.communities.push(Community {
            label: label.to_string(),
            network: FlowNetwork::from_indexed(nodes, edges).0,
        });
    }
    part
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommunityStats {
    pub label: String,
    pub n_sites: usize,
    pub n_edges: usize,
    /// Total weight of the community's internal edges.
    pub daily_flow: f64,
    /// The fit, or why the community was skipped.
    pub fit: std::result::Result<ScalingFit, String>,
}

pub fn community_report(
    net: &FlowNetwork,
    labels: &LabelMap,
    min_sites: usize,
) -> Result<Vec<CommunityStats>> {
    community_report_with(net, labels, min_sites, &FitOptions::default())
}

/// Fits every community with at least `min_sites` sites, each rebalanced on
/// its own. Sorted by size (largest first), then label.
pub fn community_report_with(
    net: &FlowNetwork,
    labels: &LabelMap,
    min_sites: usize,
    opts: &FitOptions,
) -> Result<Vec<CommunityStats>> {
    if min_sites < DEFAULT_MIN_SITES {
        return Err(Error::Validation(format!(
            "min_sites must be at least {DEFAULT_MIN_SITES}, got {min_sites}"
        )));
    }
    let part = induce_subnetworks(net, labels);
    let mut stats: Vec<CommunityStats> = part
        .communities
        .par_iter()
        .map(|c| {
            let n_sites = c.network.n_nodes();
            let fit = if n_sites < min_sites {
                Err(SKIP_BELOW_MIN.to_string())
            } else {
                analyze(&c.network)
                    .and_then(|an| fit_scaling_with(&an.table, opts))
                    .map_err(|e| e.to_string())
            };
            CommunityStats {
                label: c.label.clone(),
                n_sites,
                n_edges: c.network.n_edges(),
                daily_flow: c.network.total_weight(),
                fit,
            }
        })
        .collect();
    stats.sort_by(|a, b| b.n_sites.cmp(&a.n_sites).then_with(|| a.label.cmp(&b.label)));
    Ok(stats)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `label,n_sites,n_edges,daily_flow,gamma,r2,skip_reason`.
pub fn report_csv(stats: &[CommunityStats]) -> String {
    let mut out = String::from("label,n_sites,n_edges,daily_flow,gamma,r2,skip_reason\n");
    for s in stats {
        let (gamma, r2, reason) = match &s.fit {
            Ok(f) => (f.gamma.to_string(), f.r2.to_string(), String::new()),
            Err(e) => ("NA".into(), "NA".into(), csv_field(e)),
        };
        out.push_str(&format!(
            "{},{},{},{},{gamma},{r2},{reason}\n",
            csv_field(&s.label),
            s.n_sites,
            s.n_edges,
            s.daily_flow
        ));
    }
    out
}

/// `label,n_sites,gamma` for fitted communities only.
pub fn size_gamma_csv(stats: &[CommunityStats]) -> String {
    let mut out = String::from("label,n_sites,gamma\n");
    for s in stats {
        if let Ok(f) = &s.fit {
            out.push_str(&format!("{},{},{}\n", csv_field(&s.label), s.n_sites, f.gamma));
        }
    }
    out
}

pub fn write_report_csv(stats: &[CommunityStats], path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), report_csv(stats).as_bytes())
}

pub fn write_size_gamma_csv(stats: &[CommunityStats], path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), size_gamma_csv(stats).as_bytes())
}
