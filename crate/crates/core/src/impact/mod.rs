//! Fundamental matrix, traffic, through-flow and impact.
//!
//! For a balanced network with transition matrix `M` (source at index 0),
//! `U = (I - M)^-1` counts expected visits: `u_ij` is the expected number of
//! times a unit of flow entering at `i` passes through `j` before it drains
//! into the sink. From it, per site `i`:
//!
//! * traffic `A_i` is the balanced outflow (sink edge included),
//! * through-flow `G_i = (sum_j f0_j u_ji) / u_ii` is the flow arriving from
//!   the source with self-recirculation at `i` divided out,
//! * impact `C_i = G_i * sum_k u_ik` (sites only) is the flow that passed
//!   through `i` and keeps circulating among sites.

mod surfer;

use std::path::Path;

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::balance::{balance, transition_matrix, BalancedNetwork, TransitionMatrix, SOURCE_ID};
use crate::error::{Error, Result};
use crate::netmodel::{FlowNetwork, NodeId};
use crate::output::{fmt_sig, write_file};

pub use surfer::{surfer_oracle, surfer_oracle_with, SurferConfig, SurferEstimate};

/// `I - M` with a 1-norm condition number above this is treated as singular.
pub const CONDITION_LIMIT: f64 = 1e12;
/// Maximum absolute entry of `U (I - M) - I` accepted from the solver.
pub const RESIDUAL_LIMIT: f64 = 1e-8;
/// Negative entries of `U` down to this value are rounding noise.
pub const NEGATIVE_SLACK: f64 = 1e-9;

/// `(I - M)^-1` over `{source, sites}`.
#[derive(Clone, Debug)]
pub struct FundamentalMatrix {
    u: Mat<f64>,
    condition: f64,
}

impl FundamentalMatrix {
    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.u[(i, j)]
    }

    /// Estimated 1-norm condition number of `I - M`.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// `sum_{k >= 1} u_rk`: expected site visits of a walker started at row `r`.
    pub fn site_row_sum(&self, r: usize) -> f64 {
        (1..self.dim()).map(|k| self.u[(r, k)]).sum()
    }
}

/// Rows from which no path reaches the sink. Empty when the chain is
/// absorbing.
fn trapped_rows(tm: &TransitionMatrix) -> Vec<usize> {
    let d = tm.dim();
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); d];
    for r in 0..d {
        for &(c, _) in tm.row(r) {
            reverse[c].push(r);
        }
    }
    // A row leaks when it sends flow to the sink or has no outflow at all.
    let mut reaches = vec![false; d];
    let mut stack: Vec<usize> = (0..d)
        .filter(|&r| tm.sink_prob(r) > 0.0 || tm.row(r).is_empty())
        .collect();
    for &r in &stack {
        reaches[r] = true;
    }
    while let Some(r) = stack.pop() {
        for &p in &reverse[r] {
            if !reaches[p] {
                reaches[p] = true;
                stack.push(p);
            }
        }
    }
    (0..d).filter(|&r| !reaches[r]).collect()
}

/// A closed strongly connected component among `rows`, i.e. one with no
/// edge leaving it.
fn closed_component(tm: &TransitionMatrix, rows: &[usize]) -> Vec<usize> {
    let mut graph = DiGraph::<usize, ()>::new();
    let mut local = vec![usize::MAX; tm.dim()];
    for &r in rows {
        local[r] = graph.add_node(r).index();
    }
    for &r in rows {
        for &(c, _) in tm.row(r) {
            if local[c] != usize::MAX {
                graph.add_edge(NodeIndex::new(local[r]), NodeIndex::new(local[c]), ());
            }
        }
    }
    // tarjan_scc yields components in reverse topological order, so the
    // first one has no outgoing edges.
    let sccs = tarjan_scc(&graph);
    let mut comp: Vec<usize> = sccs
        .into_iter()
        .next()
        .unwrap_or_default()
        .into_iter()
        .map(|ix| graph[ix])
        .collect();
    comp.sort_unstable();
    comp
}

/// Every component from which no flow reaches the sink makes `I - M`
/// singular. Checked structurally, before any factorization.
pub fn check_dissipative(tm: &TransitionMatrix, sites: &[NodeId]) -> Result<()> {
    let trapped = trapped_rows(tm);
    if trapped.is_empty() {
        return Ok(());
    }
    let comp = closed_component(tm, &trapped);
    Err(Error::NonDissipative {
        reason: format!("{} node(s) have no path to the sink", trapped.len()),
        component: row_names(&comp, sites),
    })
}

fn row_names(rows: &[usize], sites: &[NodeId]) -> Vec<String> {
    rows.iter()
        .map(|&r| {
            if r == 0 {
                SOURCE_ID.to_string()
            } else {
                sites[r - 1].to_string()
            }
        })
        .collect()
}

/// Inverts `I - M` by dense LU with partial pivoting.
///
/// `sites` names the non-source rows for diagnostics.
pub fn compute_u(tm: &TransitionMatrix, sites: &[NodeId]) -> Result<FundamentalMatrix> {
    let d = tm.dim();
    if sites.len() + 1 != d {
        return Err(Error::Validation(format!(
            "transition matrix has {d} rows but {} sites were named",
            sites.len()
        )));
    }
    check_dissipative(tm, sites)?;

    let mut a = Mat::<f64>::identity(d, d);
    for r in 0..d {
        for &(c, p) in tm.row(r) {
            a[(r, c)] -= p;
        }
    }
    // 1-norm of I - M: max column sum of absolute values.
    let mut col_abs = vec![0.0f64; d];
    for c in 0..d {
        for r in 0..d {
            col_abs[c] += a[(r, c)].abs();
        }
    }
    let norm_a = col_abs.iter().copied().fold(0.0, f64::max);

    let mut u = a.partial_piv_lu().inverse();
    drop(a);

    let mut norm_u = 0.0f64;
    for c in 0..d {
        let mut s = 0.0;
        for r in 0..d {
            s += u[(r, c)].abs();
        }
        norm_u = norm_u.max(s);
    }
    let condition = norm_a * norm_u;
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        // Name the component around the most recirculating site.
        let worst = (1..d)
            .max_by(|&x, &y| u[(x, x)].abs().total_cmp(&u[(y, y)].abs()))
            .unwrap_or(0);
        let all: Vec<usize> = (0..d).collect();
        let comp = component_containing(tm, &all, worst);
        return Err(Error::NonDissipative {
            reason: format!("I - M is near-singular (condition estimate {condition:.3e})"),
            component: row_names(&comp, sites),
        });
    }

    // Residual U (I - M) - I = U - U M - I, using the sparse rows of M.
    let mut residual = 0.0f64;
    let mut acc = vec![0.0f64; d];
    for i in 0..d {
        acc.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..d {
            let uir = u[(i, r)];
            if uir != 0.0 {
                for &(c, p) in tm.row(r) {
                    acc[c] += uir * p;
                }
            }
        }
        for c in 0..d {
            let target = if i == c { 1.0 } else { 0.0 };
            residual = residual.max((u[(i, c)] - acc[c] - target).abs());
        }
    }
    if residual > RESIDUAL_LIMIT {
        return Err(Error::Numerical(format!(
            "fundamental matrix residual {residual:.3e} exceeds {RESIDUAL_LIMIT:e}"
        )));
    }

    for c in 0..d {
        for r in 0..d {
            let v = u[(r, c)];
            if v < 0.0 {
                if v < -NEGATIVE_SLACK {
                    return Err(Error::Numerical(format!(
                        "fundamental matrix entry ({r}, {c}) = {v:e} is negative"
                    )));
                }
                u[(r, c)] = 0.0;
            }
        }
    }
    Ok(FundamentalMatrix { u, condition })
}

fn component_containing(tm: &TransitionMatrix, rows: &[usize], target: usize) -> Vec<usize> {
    let mut graph = DiGraph::<usize, ()>::new();
    let idx: Vec<_> = rows.iter().map(|&r| graph.add_node(r)).collect();
    for &r in rows {
        for &(c, _) in tm.row(r) {
            graph.add_edge(idx[r], idx[c], ());
        }
    }
    let mut comp: Vec<usize> = tarjan_scc(&graph)
        .into_iter()
        .find(|scc| scc.iter().any(|&ix| graph[ix] == target))
        .unwrap_or_default()
        .into_iter()
        .map(|ix| graph[ix])
        .collect();
    comp.sort_unstable();
    comp
}

/// Per-site traffic, through-flow and impact, in input weight units.
#[derive(Clone, Debug, PartialEq)]
pub struct ImpactRow {
    pub node: NodeId,
    /// Index of the site in the base network.
    pub site: usize,
    pub traffic: f64,
    pub through_flow: f64,
    pub impact: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ImpactTable {
    pub rows: Vec<ImpactRow>,
}

impl ImpactTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, node: &str) -> Option<&ImpactRow> {
        self.rows.iter().find(|r| r.node.as_str() == node)
    }

    pub fn traffic(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.traffic).collect()
    }

    pub fn impact(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.impact).collect()
    }

    /// CSV `node,A,G,C` with 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,A,G,C\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.node,
                fmt_sig(r.traffic, 12),
                fmt_sig(r.through_flow, 12),
                fmt_sig(r.impact, 12)
            ));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), self.to_csv().as_bytes())
    }
}

/// Sites with zero traffic (no edges at all) are left out of the table.
pub fn impact_table(bn: &BalancedNetwork, u: &FundamentalMatrix) -> Result<ImpactTable> {
    let n = bn.n_sites();
    if u.dim() != n + 1 {
        return Err(Error::Numerical(format!(
            "fundamental matrix is {}x{} but the network has {n} sites",
            u.dim(),
            u.dim()
        )));
    }
    let sources: Vec<(usize, f64)> = (0..n)
        .filter(|&j| bn.source_out(j) > 0.0)
        .map(|j| (j + 1, bn.source_out(j)))
        .collect();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let traffic = bn.traffic(i);
        if traffic <= 0.0 {
            continue;
        }
        let r = i + 1;
        let arrived: f64 = sources.iter().map(|&(j, f)| f * u.get(j, r)).sum();
        let through_flow = arrived / u.get(r, r);
        let impact = through_flow * u.site_row_sum(r);
        rows.push(ImpactRow {
            node: bn.base().node(i).clone(),
            site: i,
            traffic,
            through_flow,
            impact,
        });
    }
    Ok(ImpactTable { rows })
}

/// Everything computed on the way from a raw network to its impact table.
#[derive(Clone, Debug)]
pub struct ImpactAnalysis {
    pub balanced: BalancedNetwork,
    pub transition: TransitionMatrix,
    pub fundamental: FundamentalMatrix,
    pub table: ImpactTable,
}

/// balance → transition matrix → `U` → impact table.
pub fn analyze(net: &FlowNetwork) -> Result<ImpactAnalysis> {
    let balanced = balance(net)?;
    let transition = transition_matrix(&balanced);
    let fundamental = compute_u(&transition, net.nodes())?;
    let table = impact_table(&balanced, &fundamental)?;
    Ok(ImpactAnalysis {
        balanced,
        transition,
        fundamental,
        table,
    })
}
