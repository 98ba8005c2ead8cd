mod common;

use attnflow::impact::{surfer_oracle, SurferEstimate};
use attnflow::{analyze, compute_u, FlowNetwork, NodeId, TransitionMatrix};
use common::*;
use proptest::prelude::*;

// With ~10^4 node comparisons across a suite, a per-node 3-sigma band would
// fail by chance; this band keeps the family-wise false alarm rate below 1e-4.
const Z_FAMILY: f64 = 6.0;

/// Dense `M`, with `u = (I - M)^-1` checked as `U - U M - I`.
fn residual(tm: &TransitionMatrix, u: &attnflow::FundamentalMatrix) -> f64 {
    let m = tm.to_dense();
    let d = tm.dim();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let um: f64 = (0..d).map(|k| u.get(i, k) * m[k][j]).sum();
            let id = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((u.get(i, j) - um - id).abs());
        }
    }
    worst
}

/// Expected site visits per walker started at the source.
fn walk_length(net: &FlowNetwork) -> f64 {
    let an = analyze(net).unwrap();
    (1..an.fundamental.dim()).map(|k| an.fundamental.get(0, k)).sum()
}

fn short_walks(max_nodes: usize, max_len: f64) -> impl Strategy<Value = FlowNetwork> {
    analyzable(max_nodes).prop_filter("short walks", move |n| walk_length(n) <= max_len)
}

fn agree(est: &SurferEstimate, i: usize, got: f64, se: f64, want: f64) -> Result<(), TestCaseError> {
    if se == 0.0 {
        prop_assert!(close(got, want, 1e-9), "{}: {} vs {}", est.nodes[i], got, want);
    } else {
        let z = (got - want) / se;
        prop_assert!(z.abs() <= Z_FAMILY, "{}: {} vs {} (z = {})", est.nodes[i], got, want, z);
    }
    Ok(())
}

/// Substochastic rows over `d` columns with every row sum at most `cap`.
fn substochastic(cap: f64) -> impl Strategy<Value = Vec<Vec<(usize, f64)>>> {
    (2usize..=12).prop_flat_map(move |d| {
        prop::collection::vec(
            (
                prop::collection::vec((0..d, 1u32..1000), 0..=d),
                0.0..=cap,
            ),
            d,
        )
        .prop_map(|rows| {
            rows.into_iter()
                .map(|(entries, s)| {
                    let mut dedup: Vec<(usize, u32)> = Vec::new();
                    for (c, w) in entries {
                        if !dedup.iter().any(|&(k, _)| k == c) {
                            dedup.push((c, w));
                        }
                    }
                    let total: f64 = dedup.iter().map(|&(_, w)| w as f64).sum();
                    dedup
                        .into_iter()
                        .map(|(c, w)| (c, s * w as f64 / total))
                        .collect()
                })
                .collect()
        })
    })
}

proptest! {
    #![proptest_config(config(0x696d_7061))]

    #[test]
    fn fundamental_matrix_invariants(net in analyzable(15)) {
        let an = analyze(&net).unwrap();
        let u = &an.fundamental;
        for i in 0..u.dim() {
            prop_assert!(u.get(i, i) >= 1.0 - 1e-12);
            for j in 0..u.dim() {
                prop_assert!(u.get(i, j) >= 0.0);
            }
        }
        prop_assert!(residual(&an.transition, u) <= 1e-8);
    }

    #[test]
    fn impact_bounds(net in analyzable(15)) {
        let an = analyze(&net).unwrap();
        let mut g_sum = 0.0;
        let mut a_sum = 0.0;
        let mut u_max = 0.0f64;
        for r in &an.table.rows {
            prop_assert!(r.traffic > 0.0);
            prop_assert!(r.through_flow >= 0.0);
            prop_assert!(r.impact >= r.through_flow * (1.0 - 1e-12));
            g_sum += r.through_flow;
            a_sum += r.traffic;
            u_max = u_max.max(an.fundamental.get(r.site + 1, r.site + 1));
        }
        prop_assert!(g_sum <= a_sum * u_max * (1.0 + 1e-12));
    }

    #[test]
    fn relabeling_permutes_results(
        net in analyzable(12),
        keys in prop::collection::vec(any::<u32>(), 12),
    ) {
        // Rename node i to a key-derived id so the lexicographic order changes.
        let rename = |id: &str| -> String {
            let i: usize = id[1..].parse().unwrap();
            format!("m{:010}-{i}", keys[i])
        };
        let renamed = FlowNetwork::from_edges(
            net.edge_triples().map(|(s, d, w)| (rename(s), rename(d), w)),
        )
        .unwrap();
        let a = analyze(&net).unwrap().table;
        let b = analyze(&renamed).unwrap().table;
        prop_assert_eq!(a.len(), b.len());
        for r in &a.rows {
            let other = b.get(&rename(r.node.as_str())).unwrap();
            prop_assert!(close(r.traffic, other.traffic, 1e-12));
            prop_assert!(close(r.through_flow, other.through_flow, 1e-9));
            prop_assert!(close(r.impact, other.impact, 1e-9));
        }
    }

    #[test]
    fn neumann_series_matches_inverse(rows in substochastic(0.9)) {
        let d = rows.len();
        let tm = TransitionMatrix::from_rows(rows).unwrap();
        let sites: Vec<NodeId> = (1..d).map(|i| NodeId::new(name(i)).unwrap()).collect();
        let u = compute_u(&tm, &sites).unwrap();
        let m = tm.to_dense();
        let mut power: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let mut sum = power.clone();
        for _ in 0..200 {
            power = (0..d)
                .map(|i| (0..d).map(|j| (0..d).map(|k| power[i][k] * m[k][j]).sum()).collect())
                .collect();
            for i in 0..d {
                for j in 0..d {
                    sum[i][j] += power[i][j];
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                prop_assert!((sum[i][j] - u.get(i, j)).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn surfer_agrees_with_analytic_impact(net in short_walks(8, 30.0), seed in any::<u64>()) {
        let an = analyze(&net).unwrap();
        let small = surfer_oracle(&an.balanced, 5_000, seed).unwrap();
        let large = surfer_oracle(&an.balanced, 20_000, seed ^ 0x5eed).unwrap();
        for r in &an.table.rows {
            let i = r.site;
            prop_assert!(large.c_hat[i] >= 0.0 && large.visits[i] >= 0.0);
            agree(&large, i, large.c_hat[i], large.c_hat_se[i], r.impact)?;
            // Flow through i, counting recirculation: G_i u_ii.
            let through = r.through_flow * an.fundamental.get(i + 1, i + 1);
            agree(&large, i, large.visits[i], large.visits_se[i], through)?;
        }
        let se_small: f64 = small.c_hat_se.iter().sum();
        let se_large: f64 = large.c_hat_se.iter().sum();
        if se_small > 0.0 {
            prop_assert!(se_large < se_small);
        }
    }
}
