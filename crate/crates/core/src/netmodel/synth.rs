//! Deterministic fixture generators.


use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use super::{Edge, FlowNetwork, LabelMap, NodeId};
use crate::error::{Error, Result};

/// Parameters of the preferential-attachment generator.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    /// Probability that a link also gets a reverse edge.
    pub reciprocity: f64,
    /// Log-space standard deviation of the weight noise.
    pub weight_sigma: f64,
    /// Exponent coupling edge weight to the endpoint degrees,
    /// `w ~ (k_src * k_dst)^coupling * LogNormal(0, sigma)`.
    pub degree_coupling: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            reciprocity: 0.43,
            weight_sigma: 2.0,
            degree_coupling: 0.5,
        }
    }
}

fn node_names(n: usize, prefix: &str) -> Vec<NodeId> {
    let width = (n.max(2) - 1).to_string().len().max(4);
    (0..n)
        .map(|i| NodeId(format!("{prefix}{i:0width$}")))
        .collect()
}

/// Grows a directed network by preferential attachment: the first `m` nodes
/// form the seed, and every later node links to `m` distinct earlier nodes
/// picked with probability proportional to `degree + 1`. Each link points
/// either way with equal odds and is reciprocated with probability
/// `reciprocity`. Weights are heavy-tailed (log-normal noise scaled by
/// endpoint degrees). Deterministic for a fixed seed.
pub fn synth_network(n: usize, m: usize, seed: u64) -> Result<FlowNetwork> {
    synth_network_with(n, m, seed, &SynthConfig::default())
}

pub fn synth_network_with(n: usize, m: usize, seed: u64, cfg: &SynthConfig) -> Result<FlowNetwork> {
    if n < 2 || m < 1 || m >= n {
        return Err(Error::Validation(format!(
            "synthetic network needs n >= 2 and 1 <= m < n, got n={n}, m={m}"
        )));
    }
    if !(0.0..=1.0).contains(&cfg.reciprocity) || !(cfg.weight_sigma >= 0.0) {
        return Err(Error::Validation("invalid synthetic network config".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Each node appears once, plus once per incident link.
    let mut pool: Vec<usize> = (0..m).collect();
    let mut links: Vec<(usize, usize)> = Vec::with_capacity((n - m) * m);
    let mut chosen: Vec<usize> = Vec::with_capacity(m);
    for new in m..n {
        chosen.clear();
        if new == m {
            chosen.extend(0..m);
        } else {
            while chosen.len() < m {
                let t = pool[rng.random_range(0..pool.len())];
                if !chosen.contains(&t) {
                    chosen.push(t);
                }
            }
        }
        for &t in &chosen {
            links.push((new, t));
            pool.push(t);
            pool.push(new);
        }
        pool.push(new);
    }

    let mut directed: Vec<(usize, usize)> = Vec::with_capacity(links.len() * 2);
    for &(new, old) in &links {
        let (s, d) = if rng.random_bool(0.5) { (new, old) } else { (old, new) };
        directed.push((s, d));
        if rng.random_bool(cfg.reciprocity) {
            directed.push((d, s));
        }
    }

    let mut degree = vec![0usize; n];
    for &(s, d) in &directed {
        degree[s] += 1;
        degree[d] += 1;
    }
    let noise = LogNormal::new(0.0, cfg.weight_sigma)
        .map_err(|e| Error::Validation(format!("weight distribution: {e}")))?;
    let edges = directed
        .into_iter()
        .map(|(src, dst)| {
            let k = (degree[src] * degree[dst]) as f64;
            Edge {
                src,
                dst,
                weight: k.powf(cfg.degree_coupling) * noise.sample(&mut rng),
            }
        })
        .collect();
    Ok(FlowNetwork::from_indexed(node_names(n, "s"), edges).0)
}

/// Parameters for [`planted_communities`].
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedLaw {
    pub groups: usize,
    /// Exponent of the planted law, in `(0, 1)`.
    pub gamma: f64,
    pub seed: u64,
    /// Add a few edges between groups (they vanish once each group is
    /// analyzed on its own).
    pub cross_edges: bool,
}

/// Builds labeled hub-and-spoke groups on which impact follows
/// `C = c * A^gamma` exactly once each group is analyzed in isolation.
///
/// Each group has a hub `h` with traffic `K` and a self-loop, fed by spokes
/// `x_j` that each carry a self-loop and one edge into the hub. For a spoke
/// with traffic `a_j` and hub edge weight `w_j`, balancing gives
/// `C_x = a_j + w_j * K / W` with `W = sum w_j`, while the hub is a pure
/// dissipator with `C_h = A_h = K`. Choosing `c = K^(1 - gamma)` and
/// `w_j = (c a_j^gamma - a_j) * W / K` puts every node on the law, which
/// requires `sum_j (c a_j^gamma - a_j) = K`.
pub fn planted_communities(p: &PlantedLaw) -> Result<(FlowNetwork, LabelMap)> {
    if p.groups == 0 || !(p.gamma > 0.0 && p.gamma < 1.0) {
        return Err(Error::Validation(
            "planted law needs groups >= 1 and 0 < gamma < 1".into(),
        ));
    }
    let gamma = p.gamma;
    // h(t) = t^gamma - t on (0, 1) for t = a / K; its maximum sits at t_peak.
    let h = |t: f64| t.powf(gamma) - t;
    let t_peak = gamma.powf(1.0 / (1.0 - gamma));
    let h_peak = h(t_peak);

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut triples: Vec<(String, String, f64)> = Vec::new();
    let mut labels = LabelMap::default();
    let mut hubs = Vec::new();
    let mut first_spokes = Vec::new();

    for g in 0..p.groups {
        let label = format!("group{g}");
        let k = 1000.0 * (g + 1) as f64;
        let mut ts: Vec<f64> = Vec::new();
        let mut total = 0.0;
        // Draw spokes until one more spoke can close the gap to 1. The gap
        // never drops below h_peak / 4: a tiny gap needs a spoke with t near
        // 0 or 1, which makes I - M badly conditioned.
        while 1.0 - total > h_peak || ts.len() < 2 {
            let t: f64 = rng.random_range(0.05..0.95);
            if total + h(t) <= 1.0 - 0.25 * h_peak {
                ts.push(t);
                total += h(t);
            }
        }
        let rest = 1.0 - total;
        // Bisection for h(t) = rest on [t_peak, 1), where h is decreasing.
        let (mut lo, mut hi) = (t_peak, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) > rest {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        ts.push(0.5 * (lo + hi));

        // Keep every spoke self-loop positive: w_j / a_j = beta * (t^(gamma-1) - 1).
        let worst = ts
            .iter()
            .map(|t| t.powf(gamma - 1.0) - 1.0)
            .fold(0.0f64, f64::max);
        let beta = 0.5 * (1.0f64).min(1.0 / worst);
        let hub = format!("g{g}-hub");
        labels.insert(NodeId(hub.clone()), &label)?;
        triples.push((hub.clone(), hub.clone(), k * (1.0 - beta)));
        for (j, &t) in ts.iter().enumerate() {
            let a = t * k;
            let w = h(t) * beta * k;
            let spoke = format!("g{g}-s{j:03}");
            labels.insert(NodeId(spoke.clone()), &label)?;
            triples.push((spoke.clone(), hub.clone(), w));
            triples.push((spoke.clone(), spoke.clone(), a - w));
            if j == 0 {
                first_spokes.push(spoke);
            }
        }
        hubs.push(hub);
    }
    if p.cross_edges && p.groups > 1 {
        for g in 0..p.groups {
            let next = (g + 1) % p.groups;
            triples.push((hubs[g].clone(), first_spokes[next].clone(), 7.0));
        }
    }
    let net = FlowNetwork::from_edges(triples)?;
    Ok((net, labels))
}

/// Number of distinct undirected links `synth_network` creates before
/// direction and reciprocity are applied.
#[cfg(test)]
fn link_count(n: usize, m: usize) -> usize {
    (n - m) * m
}
