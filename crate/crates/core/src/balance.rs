//! Source/sink balancing and the row-normalized transition matrix.
//!
//! Row and column `0` of every matrix belong to the artificial source; site
//! `i` of the base network lives at row `i + 1`. The sink is never stored as
//! a column: a row's missing mass is exactly its probability of leaving
//! through the sink.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::netmodel::{FlowNetwork, NodeId};

pub const SOURCE_ID: &str = "__source__";
pub const SINK_ID: &str = "__sink__";

/// A flow network plus the source and sink edges that make every site's
/// inflow equal its outflow.
#[derive(Clone, Debug, PartialEq)]
pub struct BalancedNetwork {
    base: FlowNetwork,
    inflow: Vec<f64>,
    outflow: Vec<f64>,
    source_out: Vec<f64>,
    sink_in: Vec<f64>,
}

/// Adds the least artificial flow that balances each site: a site whose raw
/// outflow exceeds its inflow draws the difference from the source, and one
/// whose inflow exceeds its outflow spills the difference into the sink.
pub fn balance(net: &FlowNetwork) -> Result<BalancedNetwork> {
    if net.n_nodes() == 0 {
        return Err(Error::EmptyNetwork);
    }
    let inflow = net.in_strength();
    let outflow = net.out_strength();
    let (source_out, sink_in) = inflow
        .iter()
        .zip(&outflow)
        .map(|(&i, &o)| if o > i { (o - i, 0.0) } else { (0.0, i - o) })
        .unzip();
    Ok(BalancedNetwork {
        base: net.clone(),
        inflow,
        outflow,
        source_out,
        sink_in,
    })
}

impl BalancedNetwork {
    pub fn base(&self) -> &FlowNetwork {
        &self.base
    }

    pub fn n_sites(&self) -> usize {
        self.base.n_nodes()
    }

    /// Matrix row of site `i`.
    pub fn row_of(site: usize) -> usize {
        site + 1
    }

    /// Raw inflow of site `i` (base edges only).
    pub fn inflow(&self, i: usize) -> f64 {
        self.inflow[i]
    }

    pub fn outflow(&self, i: usize) -> f64 {
        self.outflow[i]
    }

    /// Balancing flow from the source into site `i`.
    pub fn source_out(&self, i: usize) -> f64 {
        self.source_out[i]
    }

    /// Balancing flow from site `i` into the sink.
    pub fn sink_in(&self, i: usize) -> f64 {
        self.sink_in[i]
    }

    /// Balanced outflow of site `i`, sink edge included. This is the
    /// site's traffic.
    pub fn traffic(&self, i: usize) -> f64 {
        self.outflow[i] + self.sink_in[i]
    }

    pub fn total_source(&self) -> f64 {
        self.source_out.iter().sum()
    }

    pub fn total_sink(&self) -> f64 {
        self.sink_in.iter().sum()
    }

    /// Nonzero source edges keyed by site id.
    pub fn source_map(&self) -> BTreeMap<&NodeId, f64> {
        nonzero(self.base.nodes(), &self.source_out)
    }

    /// Nonzero sink edges keyed by site id.
    pub fn sink_map(&self) -> BTreeMap<&NodeId, f64> {
        nonzero(self.base.nodes(), &self.sink_in)
    }

    /// Writes the balanced network as an edge list with the reserved
    /// `__source__` / `__sink__` ids.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        for reserved in [SOURCE_ID, SINK_ID] {
            if self.base.index_of(reserved).is_some() {
                return Err(Error::Validation(format!(
                    "network already contains reserved node id {reserved}"
                )));
            }
        }
        let mut out = String::from("src,dst,weight\n");
        for (s, d, w) in self.base.edge_triples() {
            out.push_str(&format!("{s},{d},{w}\n"));
        }
        for (i, n) in self.base.nodes().iter().enumerate() {
            if self.source_out[i] > 0.0 {
                out.push_str(&format!("{SOURCE_ID},{n},{}\n", self.source_out[i]));
            }
        }
        for (i, n) in self.base.nodes().iter().enumerate() {
            if self.sink_in[i] > 0.0 {
                out.push_str(&format!("{n},{SINK_ID},{}\n", self.sink_in[i]));
            }
        }
        crate::output::write_file(path.as_ref(), out.as_bytes())
    }
}

fn nonzero<'a>(nodes: &'a [NodeId], values: &[f64]) -> BTreeMap<&'a NodeId, f64> {
    nodes
        .iter()
        .zip(values)
        .filter(|(_, &v)| v > 0.0)
        .map(|(n, &v)| (n, v))
        .collect()
}

/// Row-normalized balanced flows over `{source, sites}` with the sink column
/// dropped. Stored sparsely; `rows[r]` holds `(column, probability)` pairs
/// sorted by column.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    rows: Vec<Vec<(usize, f64)>>,
    row_totals: Vec<f64>,
    sink: Vec<f64>,
}

pub fn transition_matrix(bn: &BalancedNetwork) -> TransitionMatrix {
    let n = bn.n_sites();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + 1];
    let mut row_totals = vec![0.0; n + 1];
    let mut sink = vec![0.0; n + 1];

    let total_source = bn.total_source();
    row_totals[0] = total_source;
    if total_source > 0.0 {
        rows[0] = (0..n)
            .filter(|&j| bn.source_out(j) > 0.0)
            .map(|j| (j + 1, bn.source_out(j) / total_source))
            .collect();
    }
    for i in 0..n {
        let total = bn.traffic(i);
        row_totals[i + 1] = total;
        if total > 0.0 {
            sink[i + 1] = bn.sink_in(i) / total;
        }
    }
    for e in bn.base().edges() {
        // traffic > 0 whenever the site has an out-edge.
        rows[e.src + 1].push((e.dst + 1, e.weight / row_totals[e.src + 1]));
    }
    TransitionMatrix {
        rows,
        row_totals,
        sink,
    }
}

impl TransitionMatrix {
    /// Builds a matrix directly from sparse rows of `(column, probability)`;
    /// whatever a row does not assign goes to the sink. Row totals are set
    /// to 1. Row 0 plays the source.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let d = rows.len();
        let mut sink = Vec::with_capacity(d);
        let mut sorted = Vec::with_capacity(d);
        for (r, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(c, _)| c);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::Validation(format!("row {r} repeats a column")));
            }
            if row.iter().any(|&(c, p)| c >= d || !(0.0..=1.0).contains(&p)) {
                return Err(Error::Validation(format!(
                    "row {r} has a column out of range or a probability outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().map(|&(_, p)| p).sum();
            if sum > 1.0 + 1e-12 {
                return Err(Error::Validation(format!("row {r} sums to {sum} > 1")));
            }
            sink.push((1.0 - sum).max(0.0));
            row.retain(|&(_, p)| p > 0.0);
            sorted.push(row);
        }
        Ok(TransitionMatrix {
            rows: sorted,
            row_totals: vec![1.0; d],
            sink,
        })
    }

    /// Number of rows (and columns): sites plus the source.
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, r: usize) -> &[(usize, f64)] {
        &self.rows[r]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.rows[r]
            .binary_search_by_key(&c, |&(j, _)| j)
            .map_or(0.0, |k| self.rows[r][k].1)
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.rows[r].iter().map(|&(_, p)| p).sum()
    }

    /// Balanced outflow of row `r` before normalization, sink flow included.
    pub fn row_total(&self, r: usize) -> f64 {
        self.row_totals[r]
    }

    /// Probability that a walker at row `r` steps into the sink.
    pub fn sink_prob(&self, r: usize) -> f64 {
        self.sink[r]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut m = vec![vec![0.0; d]; d];
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, p) in row {
                m[r][c] = p;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> FlowNetwork {
        FlowNetwork::from_edges([("1", "2", 10.0)]).unwrap()
    }

    fn feedback() -> FlowNetwork {
        FlowNetwork::from_edges([("1", "2", 10.0), ("2", "1", 5.0)]).unwrap()
    }

    fn ids(map: BTreeMap<&NodeId, f64>) -> Vec<(String, f64)> {
        map.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    #[test]
    fn chain_balance() {
        let bn = balance(&chain()).unwrap();
        assert_eq!(ids(bn.source_map()), [("1".to_string(), 10.0)]);
        assert_eq!(ids(bn.sink_map()), [("2".to_string(), 10.0)]);
    }

    #[test]
    fn feedback_balance() {
        let bn = balance(&feedback()).unwrap();
        assert_eq!(ids(bn.source_map()), [("1".to_string(), 5.0)]);
        assert_eq!(ids(bn.sink_map()), [("2".to_string(), 5.0)]);
    }

    #[test]
    fn balanced_cycle_needs_nothing() {
        let net = FlowNetwork::from_edges([("1", "2", 10.0), ("2", "1", 10.0)]).unwrap();
        let bn = balance(&net).unwrap();
        assert!(bn.source_map().is_empty());
        assert!(bn.sink_map().is_empty());
    }

    #[test]
    fn chain_transition() {
        let tm = transition_matrix(&balance(&chain()).unwrap());
        assert_eq!(tm.dim(), 3);
        assert_eq!(tm.get(0, 1), 1.0);
        assert_eq!(tm.get(1, 2), 1.0);
        assert_eq!(tm.row_sum(2), 0.0);
        assert_eq!(tm.sink_prob(2), 1.0);
        assert_eq!(tm.row_total(2), 10.0);
    }

    #[test]
    fn feedback_transition() {
        let tm = transition_matrix(&balance(&feedback()).unwrap());
        assert_eq!(tm.get(0, 1), 1.0);
        assert_eq!(tm.get(1, 2), 1.0);
        assert_eq!(tm.get(2, 1), 0.5);
        assert_eq!(tm.row_sum(2), 0.5);
        assert_eq!(tm.row_sum(1), 1.0);
        assert_eq!(tm.sink_prob(1), 0.0);
    }

    #[test]
    fn self_loop_only() {
        let net = FlowNetwork::from_edges([("1", "1", 5.0)]).unwrap();
        let tm = transition_matrix(&balance(&net).unwrap());
        assert_eq!(tm.get(1, 1), 1.0);
        assert_eq!(tm.row_sum(0), 0.0);
    }

    #[test]
    fn export_refuses_reserved_ids() {
        let net = FlowNetwork::from_edges([("__sink__", "a", 1.0)]).unwrap();
        let bn = balance(&net).unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert!(bn.write_csv(dir.path().join("b.csv")).is_err());
    }

    #[test]
    fn export_includes_boundary_edges() {
        let bn = balance(&feedback()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        bn.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(
            text,
            "src,dst,weight\n1,2,10\n2,1,5\n__source__,1,5\n2,__sink__,5\n"
        );
    }
}
