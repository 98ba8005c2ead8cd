//! Monte Carlo random surfer, an independent check on the analytic impact.
//!
//! Walkers enter at the source, pick their first site in proportion to the
//! source flows, follow the rows of `M` and stop when they step into the
//! sink. Per walker and site `i`:
//!
//! * `V_i`, the number of visits to `i`, has mean `sum_j f0_j u_ji / F0`;
//! * `L_i`, the number of site visits from the walker's first arrival at `i`
//!   until absorption (zero if it never arrives), has mean
//!   `P(hit i) * sum_k u_ik`. The tail of a walk after its first arrival at
//!   `i` is itself a fresh walk started at `i`, so `F0 * E[L_i]` equals
//!   `G_i * sum_k u_ik = C_i` without ever forming `u_ii`.
//!
//! All tallies are integers, so the reduction over streams is exact and the
//! estimate does not depend on how streams are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use rayon::prelude::*;

use super::check_dissipative;
use crate::balance::{transition_matrix, BalancedNetwork};
use crate::error::{Error, Result};
use crate::netmodel::NodeId;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SurferConfig {
    pub walkers: u64,
    pub seed: u64,
    /// A walker exceeding this many site visits aborts the run.
    pub hop_limit: u64,
    /// Walkers per independently seeded stream.
    pub stream_len: u64,
}

impl SurferConfig {
    pub fn new(walkers: u64, seed: u64) -> Self {
        SurferConfig {
            walkers,
            seed,
            hop_limit: 1_000_000,
            stream_len: 1 << 15,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurferEstimate {
    pub nodes: Vec<NodeId>,
    /// Estimated `sum_j f0_j u_ji`, total flow passing through each site.
    pub visits: Vec<f64>,
    pub visits_se: Vec<f64>,
    /// Estimated impact `C_i`.
    pub c_hat: Vec<f64>,
    pub c_hat_se: Vec<f64>,
    pub walkers: u64,
    pub seed: u64,
}

impl SurferEstimate {
    pub fn index_of(&self, node: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.as_str() == node)
    }
}

#[derive(Clone, Default)]
struct Tally {
    visits: Vec<u64>,
    visits_sq: Vec<u128>,
    tail: Vec<u64>,
    tail_sq: Vec<u128>,
}

impl Tally {
    fn new(n: usize) -> Self {
        Tally {
            visits: vec![0; n],
            visits_sq: vec![0; n],
            tail: vec![0; n],
            tail_sq: vec![0; n],
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for i in 0..self.visits.len() {
            self.visits[i] += other.visits[i];
            self.visits_sq[i] += other.visits_sq[i];
            self.tail[i] += other.tail[i];
            self.tail_sq[i] += other.tail_sq[i];
        }
        self
    }
}

/// Where a step from a site row leads.
struct Row {
    /// Alias table over the row's targets followed by the sink.
    alias: Option<WeightedAliasIndex<f64>>,
    /// Site index of each target (the sink is the slot past the end).
    targets: Vec<usize>,
}

pub fn surfer_oracle(bn: &BalancedNetwork, walkers: u64, seed: u64) -> Result<SurferEstimate> {
    surfer_oracle_with(bn, &SurferConfig::new(walkers, seed))
}

pub fn surfer_oracle_with(bn: &BalancedNetwork, cfg: &SurferConfig) -> Result<SurferEstimate> {
    if cfg.walkers == 0 || cfg.stream_len == 0 {
        return Err(Error::Validation("surfer needs at least one walker".into()));
    }
    let n = bn.n_sites();
    let tm = transition_matrix(bn);
    check_dissipative(&tm, bn.base().nodes())?;
    let total_source = bn.total_source();

    let mut entry_weights = Vec::new();
    let mut entry_sites = Vec::new();
    for &(c, p) in tm.row(0) {
        entry_weights.push(p);
        entry_sites.push(c - 1);
    }
    let entry = if entry_weights.is_empty() {
        None
    } else {
        Some(
            WeightedAliasIndex::new(entry_weights)
                .map_err(|e| Error::Numerical(format!("source row: {e}")))?,
        )
    };

    let rows: Vec<Row> = (1..=n)
        .map(|r| {
            let mut weights: Vec<f64> = tm.row(r).iter().map(|&(_, p)| p).collect();
            let targets: Vec<usize> = tm.row(r).iter().map(|&(c, _)| c - 1).collect();
            weights.push(tm.sink_prob(r));
            let alias = if weights.iter().any(|&w| w > 0.0) {
                Some(
                    WeightedAliasIndex::new(weights)
                        .map_err(|e| Error::Numerical(format!("row {r}: {e}")))?,
                )
            } else {
                None
            };
            Ok(Row { alias, targets })
        })
        .collect::<Result<_>>()?;

    let streams = cfg.walkers.div_ceil(cfg.stream_len);
    let tallies: Vec<Tally> = (0..streams)
        .into_par_iter()
        .map(|s| {
            let start = s * cfg.stream_len;
            let count = cfg.stream_len.min(cfg.walkers - start);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(s));
            run_stream(entry.as_ref(), &entry_sites, &rows, count, cfg.hop_limit, &mut rng)
                .map_err(|site| Error::HopLimit {
                    limit: cfg.hop_limit,
                    last_site: bn.base().node(site).to_string(),
                })
        })
        .collect::<Result<_>>()?;
    let tally = tallies.into_iter().fold(Tally::new(n), Tally::merge);

    let w = cfg.walkers as f64;
    let scaled = |sum: u64, sum_sq: u128| -> (f64, f64) {
        let mean = sum as f64 / w;
        let var = (sum_sq as f64 / w - mean * mean).max(0.0);
        // Sample variance of the per-walker values.
        let var = if cfg.walkers > 1 { var * w / (w - 1.0) } else { 0.0 };
        (total_source * mean, total_source * (var / w).sqrt())
    };
    let mut est = SurferEstimate {
        nodes: bn.base().nodes().to_vec(),
        visits: Vec::with_capacity(n),
        visits_se: Vec::with_capacity(n),
        c_hat: Vec::with_capacity(n),
        c_hat_se: Vec::with_capacity(n),
        walkers: cfg.walkers,
        seed: cfg.seed,
    };
    for i in 0..n {
        let (v, v_se) = scaled(tally.visits[i], tally.visits_sq[i]);
        let (c, c_se) = scaled(tally.tail[i], tally.tail_sq[i]);
        est.visits.push(v);
        est.visits_se.push(v_se);
        est.c_hat.push(c);
        est.c_hat_se.push(c_se);
    }
    Ok(est)
}

/// Runs `count` walkers. On hitting the hop limit returns the site where the
/// offending walker was.
fn run_stream(
    entry: Option<&WeightedAliasIndex<f64>>,
    entry_sites: &[usize],
    rows: &[Row],
    count: u64,
    hop_limit: u64,
    rng: &mut ChaCha8Rng,
) -> std::result::Result<Tally, usize> {
    let n = rows.len();
    let mut tally = Tally::new(n);
    let Some(entry) = entry else {
        // Nothing enters the network.
        return Ok(tally);
    };
    // Per-walker scratch, reset lazily through `stamp`.
    let mut stamp = vec![u64::MAX; n];
    let mut first = vec![0u64; n];
    let mut visits = vec![0u64; n];
    let mut touched: Vec<usize> = Vec::new();

    for walker in 0..count {
        touched.clear();
        let mut site = entry_sites[entry.sample(rng)];
        let mut steps: u64 = 0;
        loop {
            if stamp[site] != walker {
                stamp[site] = walker;
                first[site] = steps;
                visits[site] = 0;
                touched.push(site);
            }
            visits[site] += 1;
            steps += 1;
            if steps > hop_limit {
                return Err(site);
            }
            let row = &rows[site];
            let Some(alias) = &row.alias else { break };
            let k = alias.sample(rng);
            if k == row.targets.len() {
                break;
            }
            site = row.targets[k];
        }
        for &i in &touched {
            let v = visits[i];
            let tail = steps - first[i];
            tally.visits[i] += v;
            tally.visits_sq[i] += (v as u128) * (v as u128);
            tally.tail[i] += tail;
            tally.tail_sq[i] += (tail as u128) * (tail as u128);
        }
    }
    Ok(tally)
}
