use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::distr::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::impact::analyze;
use crate::netmodel::{remap_touched, Edge, FlowNetwork};
use crate::output::write_json;
use crate::scaling::{fit_scaling_with, FitOptions, ScalingFit};
use crate::seeds::mix64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkMode {
    Original,
    /// Degree-preserving double-edge swaps.
    Shuffled,
    /// `|E|` ordered pairs drawn uniformly with replacement.
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    Original,
    /// The original weights, permuted.
    Shuffled,
    /// Drawn uniformly between the original minimum and maximum.
    Uniform,
}

/// One of the eight null models; `(Original, Original)` is the network itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ReshuffleMode {
    links: LinkMode,
    weights: WeightMode,
}

impl ReshuffleMode {
    pub const ALL: [ReshuffleMode; 8] = [
        ReshuffleMode::of(LinkMode::Original, WeightMode::Shuffled),
        ReshuffleMode::of(LinkMode::Original, WeightMode::Uniform),
        ReshuffleMode::of(LinkMode::Shuffled, WeightMode::Original),
        ReshuffleMode::of(LinkMode::Shuffled, WeightMode::Shuffled),
        ReshuffleMode::of(LinkMode::Shuffled, WeightMode::Uniform),
        ReshuffleMode::of(LinkMode::Random, WeightMode::Original),
        ReshuffleMode::of(LinkMode::Random, WeightMode::Shuffled),
        ReshuffleMode::of(LinkMode::Random, WeightMode::Uniform),
    ];

    const fn of(links: LinkMode, weights: WeightMode) -> Self {
        ReshuffleMode { links, weights }
    }

    pub fn new(links: LinkMode, weights: WeightMode) -> Result<Self> {
        if links == LinkMode::Original && weights == WeightMode::Original {
            return Err(Error::Validation(
                "original links with original weights is not a null model".into(),
            ));
        }
        Ok(Self::of(links, weights))
    }

    pub fn links(self) -> LinkMode {
        self.links
    }

    pub fn weights(self) -> WeightMode {
        self.weights
    }

    fn index(self) -> usize {
        Self::ALL.iter().position(|m| *m == self).unwrap()
    }

    /// `"a"` through `"h"`, row-major over links then weights.
    pub fn label(self) -> &'static str {
        ["a", "b", "c", "d", "e", "f", "g", "h"][self.index()]
    }

    pub fn from_label(label: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.label() == label)
            .ok_or_else(|| Error::Validation(format!("unknown reshuffle mode {label:?}")))
    }
}

impl fmt::Display for ReshuffleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ReshuffleStats {
    /// Swap attempts, accepted or not.
    pub swap_attempts: usize,
    /// Sampled pairs folded into an earlier identical pair.
    pub pairs_merged: usize,
}

pub fn reshuffle(net: &FlowNetwork, mode: ReshuffleMode, seed: u64) -> Result<FlowNetwork> {
    reshuffle_with_stats(net, mode, seed).map(|(n, _)| n)
}

/// Rebuilds `net` under `mode`. Reshuffled links keep each edge's weight slot
/// (the original weight for mode c). Random links carry the original or
/// permuted weights in edge order and sum them when pairs repeat; uniform
/// weights are drawn once per distinct pair so they stay within the original
/// range.
pub fn reshuffle_with_stats(
    net: &FlowNetwork,
    mode: ReshuffleMode,
    seed: u64,
) -> Result<(FlowNetwork, ReshuffleStats)> {
    let n = net.n_nodes();
    let m = net.n_edges();
    if n < 2 || m == 0 {
        return Err(Error::Validation(format!(
            "reshuffling needs at least 2 nodes and 1 edge, got {n} and {m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = ReshuffleStats::default();

    let mut pairs: Vec<(usize, usize)> = net.edges().iter().map(|e| (e.src, e.dst)).collect();
    match mode.links {
        LinkMode::Original => {}
        LinkMode::Shuffled => stats.swap_attempts = swap_links(&mut pairs, &mut rng)?,
        LinkMode::Random => {
            for p in &mut pairs {
                *p = (rng.random_range(0..n), rng.random_range(0..n));
            }
        }
    }

    let original: Vec<f64> = net.edges().iter().map(|e| e.weight).collect();
    let (lo, hi) = original
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &w| (lo.min(w), hi.max(w)));
    let uniform = Uniform::new_inclusive(lo, hi)
        .map_err(|e| Error::Numerical(format!("weight range [{lo}, {hi}]: {e}")))?;

    if mode.links == LinkMode::Random && mode.weights == WeightMode::Uniform {
        let distinct: Vec<(usize, usize)> = {
            let mut d = pairs.clone();
            d.sort_unstable();
            d.dedup();
            d
        };
        stats.pairs_merged = m - distinct.len();
        let edges = distinct
            .into_iter()
            .map(|(src, dst)| Edge {
                src,
                dst,
                weight: uniform.sample(&mut rng),
            })
            .collect();
        return Ok((remap_touched(net.nodes(), edges), stats));
    }

    let weights: Vec<f64> = match mode.weights {
        WeightMode::Original => original,
        WeightMode::Shuffled => {
            let mut w = original;
            w.shuffle(&mut rng);
            w
        }
        WeightMode::Uniform => (0..m).map(|_| uniform.sample(&mut rng)).collect(),
    };
    let edges: Vec<Edge> = pairs
        .iter()
        .zip(weights)
        .map(|(&(src, dst), weight)| Edge { src, dst, weight })
        .collect();
    let out = remap_touched(net.nodes(), edges);
    stats.pairs_merged = m - out.n_edges();
    Ok((out, stats))
}

/// Directed double-edge swaps `(a->b, c->d) => (a->d, c->b)` until `10 |E|`
/// have been accepted. Swaps that change nothing or would duplicate an
/// existing pair are rejected. Returns the number of attempts.
fn swap_links(pairs: &mut [(usize, usize)], rng: &mut ChaCha8Rng) -> Result<usize> {
    let m = pairs.len();
    let target = 10 * m;
    let max_attempts = 100 * m;
    let mut present: HashSet<(usize, usize)> = pairs.iter().copied().collect();
    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < target {
        if attempts == max_attempts {
            return Err(Error::DegenerateTopology(format!(
                "only {accepted} of {target} link swaps accepted in {max_attempts} attempts"
            )));
        }
        attempts += 1;
        if m < 2 {
            continue;
        }
        let i = rng.random_range(0..m);
        let j = rng.random_range(0..m);
        let (a, b) = pairs[i];
        let (c, d) = pairs[j];
        if a == c || b == d || present.contains(&(a, d)) || present.contains(&(c, b)) {
            continue;
        }
        present.remove(&(a, b));
        present.remove(&(c, d));
        present.insert((a, d));
        present.insert((c, b));
        pairs[i] = (a, d);
        pairs[j] = (c, b);
        accepted += 1;
    }
    Ok(attempts)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    /// Sample standard deviation; zero for a single run.
    pub std: f64,
}

impl Moments {
    /// Mean and sample standard deviation, summed in the given order.
    /// `NaN` for an empty slice.
    pub fn of(xs: &[f64]) -> Moments {
        let n = xs.len() as f64;
        if xs.is_empty() {
            return Moments {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Moments { mean, std }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeSummary {
    pub label: &'static str,
    pub links: LinkMode,
    pub weights: WeightMode,
    pub runs_ok: usize,
    pub runs_failed: usize,
    /// `null` in JSON when every run failed.
    pub gamma: Moments,
    pub r2: Moments,
    pub rho: Moments,
    pub d: Moments,
    /// Mean number of sampled pairs merged into duplicates per run.
    pub mean_pairs_merged: f64,
    /// One entry per failed run: `run <r>: <error>`.
    pub failures: Vec<String>,
}

impl ModeSummary {
    pub fn failed(&self) -> bool {
        self.runs_ok == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReshuffleReport {
    pub runs: usize,
    pub master_seed: u64,
    pub original: ScalingFit,
    pub modes: Vec<ModeSummary>,
}

impl ReshuffleReport {
    pub fn mode(&self, label: &str) -> Option<&ModeSummary> {
        self.modes.iter().find(|m| m.label == label)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(self, path)
    }
}

/// Seed of run `run` of `mode` under `master_seed`.
pub fn run_seed(master_seed: u64, mode: ReshuffleMode, run: usize) -> u64 {
    master_seed ^ mix64(((mode.index() as u64) << 32) | run as u64)
}

pub fn reshuffle_battery(net: &FlowNetwork, runs: usize, master_seed: u64) -> Result<ReshuffleReport> {
    reshuffle_battery_with(net, &ReshuffleMode::ALL, runs, master_seed, &FitOptions::default())
}

/// Runs every `(mode, run)` pair (in parallel, order-independent), and
/// aggregates per mode. Runs whose network cannot be analyzed or fitted are
/// excluded and listed.
pub fn reshuffle_battery_with(
    net: &FlowNetwork,
    modes: &[ReshuffleMode],
    runs: usize,
    master_seed: u64,
    opts: &FitOptions,
) -> Result<ReshuffleReport> {
    if runs == 0 {
        return Err(Error::Validation("battery needs at least one run".into()));
    }
    let original = fit_scaling_with(&analyze(net)?.table, opts)?;
    let jobs: Vec<(ReshuffleMode, usize)> = modes
        .iter()
        .flat_map(|&m| (0..runs).map(move |r| (m, r)))
        .collect();
    let outcomes: Vec<(std::result::Result<ScalingFit, String>, usize)> = jobs
        .par_iter()
        .map(|&(mode, r)| {
            match reshuffle_with_stats(net, mode, run_seed(master_seed, mode, r)) {
                Ok((shuffled, stats)) => {
                    let fit = analyze(&shuffled)
                        .and_then(|an| fit_scaling_with(&an.table, opts))
                        .map_err(|e| e.to_string());
                    (fit, stats.pairs_merged)
                }
                Err(e) => (Err(e.to_string()), 0),
            }
        })
        .collect();

    let mut by_mode: BTreeMap<usize, Vec<(usize, &(std::result::Result<ScalingFit, String>, usize))>> =
        BTreeMap::new();
    for (k, ((_, r), out)) in jobs.iter().zip(&outcomes).enumerate() {
        by_mode.entry(k / runs).or_default().push((*r, out));
    }
    let summaries = modes
        .iter()
        .enumerate()
        .map(|(mi, &mode)| {
            let results = &by_mode[&mi];
            let fits: Vec<&ScalingFit> = results.iter().filter_map(|(_, o)| o.0.as_ref().ok()).collect();
            let failures: Vec<String> = results
                .iter()
                .filter_map(|(r, o)| o.0.as_ref().err().map(|e| format!("run {r}: {e}")))
                .collect();
            let stat = |f: fn(&ScalingFit) -> f64| Moments::of(&fits.iter().map(|x| f(x)).collect::<Vec<_>>());
            ModeSummary {
                label: mode.label(),
                links: mode.links,
                weights: mode.weights,
                runs_ok: fits.len(),
                runs_failed: failures.len(),
                gamma: stat(|f| f.gamma),
                r2: stat(|f| f.r2),
                rho: stat(|f| f.rho),
                d: stat(|f| f.d),
                mean_pairs_merged: results.iter().map(|(_, o)| o.1 as f64).sum::<f64>() / runs as f64,
                failures,
            }
        })
        .collect();
    Ok(ReshuffleReport {
        runs,
        master_seed,
        original,
        modes: summaries,
    })
}
