//! Label-shuffling permutation engine: z-scores and significance flags for
//! any labeled-graph statistic, with per-shuffle sub-generators so results
//! never depend on scheduling.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{CommGraph, NodeId, Status, StatusLabels};
use crate::socmetrics::{rank_by_score, BurtScorer, HoleScorer, TieType};

type Prepared<'g> = Box<dyn Fn(&StatusLabels) -> f64 + Send + Sync + 'g>;
type PrepareFn =
    dyn for<'g> Fn(&'g CommGraph) -> Prepared<'g> + Send + Sync;

/// A named pure function of `(graph, labels)`. Statistics may hoist
/// label-independent work into a per-graph preparation step; evaluation must
/// stay deterministic and independent of label storage order.
#[derive(Clone)]
pub struct Statistic {
    name: String,
    prepare: Arc<PrepareFn>,
}

impl Statistic {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(&CommGraph, &StatusLabels) -> f64 + Send + Sync + 'static,
    ) -> Statistic {
        let f = Arc::new(f);
        Statistic {
            name: name.into(),
            prepare: Arc::new(move |g| {
                let f = f.clone();
                Box::new(move |labels| f(g, labels))
            }),
        }
    }

    pub fn with_prepare(name: impl Into<String>, prepare: Arc<PrepareFn>) -> Statistic {
        Statistic {
            name: name.into(),
            prepare,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn prepare<'g>(&self, g: &'g CommGraph) -> Prepared<'g> {
        (self.prepare)(g)
    }

    pub fn eval(&self, g: &CommGraph, labels: &StatusLabels) -> f64 {
        self.prepare(g)(labels)
    }
}

impl std::fmt::Debug for Statistic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Statistic").field("name", &self.name).finish()
    }
}

/// Uniformly random permutation of the label multiset over the same nodes;
/// group counts are preserved exactly.
pub fn permute_labels(labels: &StatusLabels, rng: &mut impl Rng) -> Result<StatusLabels> {
    if !labels.fully_observed() {
        return Err(Error::PartialLabels);
    }
    let mut values: Vec<Status> = labels.as_slice().iter().map(|s| s.unwrap()).collect();
    values.shuffle(rng);
    let shuffled = StatusLabels::new(values.into_iter().map(Some).collect());
    debug_assert_eq!(shuffled.manager_count(), labels.manager_count());
    debug_assert_eq!(shuffled.subordinate_count(), labels.subordinate_count());
    Ok(shuffled)
}

/// Permutation-test outcome. `z = (observed - mean) / std` with the
/// population standard deviation over shuffles; `significant` means |z| > 2.
/// The two-sided normal-approximation p-value rides along so consumers can
/// apply their own thresholds.
#[derive(Debug, Clone, Serialize)]
pub struct PermutationReport {
    pub statistic: String,
    pub observed: f64,
    pub null_mean: f64,
    pub null_std: f64,
    pub z: Option<f64>,
    pub p_value: Option<f64>,
    pub significant: bool,
    pub degenerate_null: bool,
    pub n_shuffles: u64,
    pub seed: u64,
}

/// Runs `stat` against `n_shuffles` label shuffles. Shuffle `i` draws from a
/// sub-generator keyed by `(seed, i)`, so the report is bitwise identical for
/// fixed inputs regardless of thread count or execution order.
pub fn permutation_test(
    g: &CommGraph,
    labels: &StatusLabels,
    stat: &Statistic,
    n_shuffles: u64,
    seed: u64,
) -> Result<PermutationReport> {
    if n_shuffles < 2 {
        return Err(Error::Config("n_shuffles must be at least 2".into()));
    }
    if !labels.fully_observed() {
        return Err(Error::PartialLabels);
    }
    let prepared = stat.prepare(g);
    let observed = prepared(labels);
    if !observed.is_finite() {
        return Err(Error::Numerical(format!(
            "statistic `{}` is undefined on the observed labels",
            stat.name()
        )));
    }

    // No short-circuiting inside the parallel map: the first failing shuffle
    // is found by a sequential scan so the reported index never depends on
    // thread scheduling.
    let raw: Vec<Result<f64>> = (0..n_shuffles)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i.wrapping_add(1));
            let shuffled = permute_labels(labels, &mut rng)?;
            let value = prepared(&shuffled);
            if !value.is_finite() {
                return Err(Error::Numerical(format!(
                    "statistic `{}` is undefined on shuffle {i}",
                    stat.name()
                )));
            }
            Ok(value)
        })
        .collect();
    let mut values = Vec::with_capacity(raw.len());
    for value in raw {
        values.push(value?);
    }

    // Sequential reduction over the ordered vector keeps the result exact
    // across thread counts.
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let degenerate = values.iter().all(|&v| v == values[0]);
    let std = if degenerate {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
    };

    let (z, p_value) = if degenerate || std == 0.0 {
        (None, None)
    } else {
        let z = (observed - mean) / std;
        let p = statrs::function::erf::erfc(z.abs() / std::f64::consts::SQRT_2);
        (Some(z), Some(p))
    };
    Ok(PermutationReport {
        statistic: stat.name().to_string(),
        observed,
        null_mean: mean,
        null_std: std,
        significant: z.map(|z| z.abs() > 2.0).unwrap_or(false),
        z,
        p_value,
        degenerate_null: degenerate || std == 0.0,
        n_shuffles,
        seed,
    })
}

/// Structural-hole group fraction with the ranking hoisted out of the shuffle
/// loop (scores are label-independent).
fn sh_fraction_stat(name: &str, rho: f64, group: Status) -> Statistic {
    Statistic::with_prepare(
        name,
        Arc::new(move |g: &CommGraph| {
            let scores = BurtScorer.score_all(g);
            let ranking = rank_by_score(0..g.n(), &scores);
            Box::new(move |labels: &StatusLabels| {
                let labeled: Vec<NodeId> = ranking
                    .iter()
                    .copied()
                    .filter(|&v| labels.get(v).is_some())
                    .collect();
                if labeled.is_empty() {
                    return f64::NAN;
                }
                let quota = ((rho * labeled.len() as f64).ceil() as usize).min(labeled.len());
                let group_total = labeled
                    .iter()
                    .filter(|&&v| labels.get(v) == Some(group))
                    .count();
                if group_total == 0 {
                    return 0.0;
                }
                let hit = labeled[..quota]
                    .iter()
                    .filter(|&&v| labels.get(v) == Some(group))
                    .count();
                hit as f64 / group_total as f64
            })
        }),
    )
}

/// Which of the three per-ego balance ratios a statistic averages.
#[derive(Debug, Clone, Copy)]
enum BalanceKind {
    ManagerFriends,
    SubordinateFriends,
    AllFriends,
}

/// Group mean of one balance ratio over egos of one status, with wedge
/// closedness hoisted out of the shuffle loop.
fn group_balance_stat(name: &str, group: Status, kind: BalanceKind) -> Statistic {
    Statistic::with_prepare(
        name,
        Arc::new(move |g: &CommGraph| {
            // (ego, friend a, friend b, wedge closed)
            let mut wedges: Vec<(NodeId, NodeId, NodeId, bool)> = Vec::new();
            for v in 0..g.n() {
                let nbrs = g.neighbors(v);
                for (i, &a) in nbrs.iter().enumerate() {
                    for &b in &nbrs[(i + 1)..] {
                        wedges.push((v, a, b, g.has_edge(a, b)));
                    }
                }
            }
            let n = g.n();
            Box::new(move |labels: &StatusLabels| {
                let mut closed = vec![0u64; n];
                let mut total = vec![0u64; n];
                for &(v, a, b, is_closed) in &wedges {
                    let keep = match kind {
                        BalanceKind::AllFriends => true,
                        BalanceKind::ManagerFriends => {
                            labels.get(a) == Some(Status::Manager)
                                && labels.get(b) == Some(Status::Manager)
                        }
                        BalanceKind::SubordinateFriends => {
                            labels.get(a) == Some(Status::Subordinate)
                                && labels.get(b) == Some(Status::Subordinate)
                        }
                    };
                    if keep {
                        total[v] += 1;
                        if is_closed {
                            closed[v] += 1;
                        }
                    }
                }
                let mut sum = 0.0;
                let mut count = 0usize;
                for v in 0..n {
                    if labels.get(v) == Some(group) && total[v] > 0 {
                        sum += closed[v] as f64 / total[v] as f64;
                        count += 1;
                    }
                }
                if count == 0 {
                    f64::NAN
                } else {
                    sum / count as f64
                }
            })
        }),
    )
}

/// Mean common neighbors over labeled pairs of one tie type. Pair counts are
/// label-independent, so the nonzero counts are hoisted once per graph.
fn mean_common_neighbors_stat(name: &str, tie: TieType) -> Statistic {
    Statistic::with_prepare(
        name,
        Arc::new(move |g: &CommGraph| {
            // cn(u,v) summed per unordered pair via wedge counting.
            let mut counts: std::collections::BTreeMap<(NodeId, NodeId), u64> =
                std::collections::BTreeMap::new();
            for q in 0..g.n() {
                let nbrs = g.neighbors(q);
                for (i, &u) in nbrs.iter().enumerate() {
                    for &v in &nbrs[(i + 1)..] {
                        *counts.entry((u, v)).or_insert(0) += 1;
                    }
                }
            }
            let pairs: Vec<(NodeId, NodeId, u64)> =
                counts.into_iter().map(|((u, v), c)| (u, v, c)).collect();
            Box::new(move |labels: &StatusLabels| {
                let n_m = labels.manager_count() as u64;
                let n_s = labels.subordinate_count() as u64;
                let denom = match tie {
                    TieType::MM => n_m * n_m.saturating_sub(1) / 2,
                    TieType::SS => n_s * n_s.saturating_sub(1) / 2,
                    TieType::MS => n_m * n_s,
                };
                if denom == 0 {
                    return f64::NAN;
                }
                let mut numer = 0u64;
                for &(u, v, c) in &pairs {
                    match (labels.get(u), labels.get(v)) {
                        (Some(a), Some(b)) if TieType::of(a, b) == tie => numer += c,
                        _ => {}
                    }
                }
                numer as f64 / denom as f64
            })
        }),
    )
}

/// The statistics mirrored in the significance tables: structural-hole group
/// fractions at the given selection fraction, per-group balance means, and
/// mean common neighbors per tie type.
pub fn stat_library(rho: f64) -> Vec<Statistic> {
    vec![
        sh_fraction_stat("p_manager_is_sh", rho, Status::Manager),
        sh_fraction_stat("p_subordinate_is_sh", rho, Status::Subordinate),
        group_balance_stat("manager_mean_m_sb", Status::Manager, BalanceKind::ManagerFriends),
        group_balance_stat(
            "manager_mean_s_sb",
            Status::Manager,
            BalanceKind::SubordinateFriends,
        ),
        group_balance_stat("manager_mean_sb", Status::Manager, BalanceKind::AllFriends),
        group_balance_stat(
            "subordinate_mean_m_sb",
            Status::Subordinate,
            BalanceKind::ManagerFriends,
        ),
        group_balance_stat(
            "subordinate_mean_s_sb",
            Status::Subordinate,
            BalanceKind::SubordinateFriends,
        ),
        group_balance_stat(
            "subordinate_mean_sb",
            Status::Subordinate,
            BalanceKind::AllFriends,
        ),
        mean_common_neighbors_stat("mean_common_neighbors_mm", TieType::MM),
        mean_common_neighbors_stat("mean_common_neighbors_ms", TieType::MS),
        mean_common_neighbors_stat("mean_common_neighbors_ss", TieType::SS),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::socmetrics::select_structural_holes;

    fn star(leaves: usize) -> CommGraph {
        CommGraph::new(leaves + 1, (1..=leaves).map(|v| (0, v))).unwrap()
    }

    fn all_labeled(tokens: &str) -> StatusLabels {
        StatusLabels::new(
            tokens
                .chars()
                .map(|c| match c {
                    'M' => Some(Status::Manager),
                    'S' => Some(Status::Subordinate),
                    _ => None,
                })
                .collect(),
        )
    }

    #[test]
    fn permute_all_managers_is_identity() {
        let labels = all_labeled("MMMM");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let shuffled = permute_labels(&labels, &mut rng).unwrap();
        assert_eq!(shuffled, labels);
    }

    #[test]
    fn permute_rejects_partial_labels() {
        let labels = all_labeled("M_S");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            permute_labels(&labels, &mut rng),
            Err(Error::PartialLabels)
        ));
    }

    #[test]
    fn permute_preserves_counts() {
        let labels = all_labeled("MMSSS");
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let shuffled = permute_labels(&labels, &mut rng).unwrap();
            assert_eq!(shuffled.manager_count(), 2);
            assert_eq!(shuffled.subordinate_count(), 3);
        }
    }

    #[test]
    fn permute_two_arrangements_are_balanced() {
        let labels = all_labeled("MS");
        let mut first = 0u32;
        for i in 0..10_000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            rng.set_stream(i);
            let shuffled = permute_labels(&labels, &mut rng).unwrap();
            if shuffled.get(0) == Some(Status::Manager) {
                first += 1;
            }
        }
        let freq = first as f64 / 10_000.0;
        assert!((freq - 0.5).abs() < 0.02, "frequency {freq}");
    }

    #[test]
    fn constant_statistic_degenerates() {
        let g = star(3);
        let labels = all_labeled("MSSS");
        let stat = Statistic::new("constant", |_, _| 0.25);
        let report = permutation_test(&g, &labels, &stat, 100, 3).unwrap();
        assert!(report.degenerate_null);
        assert_eq!(report.z, None);
        assert!(!report.significant);
        assert_eq!(report.null_std, 0.0);
    }

    #[test]
    fn label_invariant_statistic_has_small_z() {
        let g = star(9);
        let labels = all_labeled("MSSSSSSSSS");
        // Fraction of managers among all nodes: invariant under shuffles of a
        // fixed multiset only in expectation terms; use a node-0-independent
        // statistic instead: manager fraction over the whole node set.
        let stat = Statistic::new("manager_fraction", |_, labels: &StatusLabels| {
            labels.manager_count() as f64 / labels.len() as f64
        });
        let report = permutation_test(&g, &labels, &stat, 10_000, 5);
        // The statistic is constant under count-preserving shuffles.
        assert!(report.unwrap().degenerate_null);
    }

    #[test]
    fn star_fixture_matches_hypergeometric_null() {
        // 1 manager center, 9 subordinate leaves, rho = 0.1: one node gets
        // flagged and it is always the center, so the null fraction is
        // Bernoulli(1/10) and the null mean is 0.1.
        let g = star(9);
        let labels = all_labeled("MSSSSSSSSS");
        let stat = &stat_library(0.1)[0];
        assert_eq!(stat.name(), "p_manager_is_sh");
        let report = permutation_test(&g, &labels, stat, 10_000, 9).unwrap();
        assert_eq!(report.observed, 1.0);
        let se = 0.3 / (10_000f64).sqrt();
        assert!(
            (report.null_mean - 0.1).abs() < 3.0 * se,
            "null mean {} strays from 0.1",
            report.null_mean
        );
        assert!(report.z.unwrap() > 2.0);
        assert!(report.significant);
    }

    #[test]
    fn sh_statistic_agrees_with_selection() {
        use crate::ingest::{generate_synthetic, SyntheticConfig};
        let ds = generate_synthetic(&SyntheticConfig {
            n: 60,
            manager_fraction: 0.25,
            p_mm: 0.5,
            p_ms: 0.15,
            p_ss: 0.08,
            event_rate_manager: 5.0,
            event_rate_subordinate: 2.0,
            seed: 21,
        })
        .unwrap();
        let stat = sh_fraction_stat("p_manager_is_sh", 0.25, Status::Manager);
        let direct =
            select_structural_holes(&ds.graph, &ds.labels, 0.25, &BurtScorer).unwrap();
        let via_stat = stat.eval(&ds.graph, &ds.labels);
        assert!((via_stat - direct.p_manager_is_sh).abs() < 1e-12);
    }

    #[test]
    fn reports_are_bitwise_deterministic_across_thread_counts() {
        let g = star(9);
        let labels = all_labeled("MSSSSSSSSS");
        let stat = &stat_library(0.1)[0];
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| permutation_test(&g, &labels, stat, 500, 4).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.observed.to_bits(), b.observed.to_bits());
        assert_eq!(a.null_mean.to_bits(), b.null_mean.to_bits());
        assert_eq!(a.null_std.to_bits(), b.null_std.to_bits());
        assert_eq!(a.z.unwrap().to_bits(), b.z.unwrap().to_bits());
    }

    #[test]
    fn group_balance_is_isomorphism_invariant() {
        // Relabeling nodes and permuting labels identically leaves the value
        // unchanged.
        let g = CommGraph::new(5, [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4)]).unwrap();
        let labels = all_labeled("MSMSS");
        let stat = group_balance_stat("sb", Status::Manager, BalanceKind::AllFriends);
        let base = stat.eval(&g, &labels);

        // Apply the permutation pi(v) = (v + 2) % 5 to the graph and labels.
        let pi = |v: usize| (v + 2) % 5;
        let edges: Vec<(usize, usize)> = g.edges().map(|(u, v)| (pi(u), pi(v))).collect();
        let g2 = CommGraph::new(5, edges).unwrap();
        let mut relabeled = vec![None; 5];
        for v in 0..5 {
            relabeled[pi(v)] = labels.get(v);
        }
        let labels2 = StatusLabels::new(relabeled);
        let moved = stat.eval(&g2, &labels2);
        assert!((base - moved).abs() < 1e-12);
    }

    #[test]
    fn mean_common_neighbors_matches_direct_computation() {
        use crate::socmetrics::common_neighbors;
        let g = CommGraph::new(6, [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (2, 4), (4, 5)])
            .unwrap();
        let labels = all_labeled("MMSSMS");
        for (idx, tie) in [(8, TieType::MM), (9, TieType::MS), (10, TieType::SS)] {
            let stat = &stat_library(0.2)[idx];
            let hoisted = stat.eval(&g, &labels);
            // Direct oracle over all labeled pairs.
            let labeled: Vec<usize> = labels.labeled_nodes().collect();
            let mut sum = 0.0;
            let mut count = 0u64;
            for (i, &u) in labeled.iter().enumerate() {
                for &v in &labeled[(i + 1)..] {
                    if TieType::of(labels.get(u).unwrap(), labels.get(v).unwrap()) == tie {
                        sum += common_neighbors(&g, u, v) as f64;
                        count += 1;
                    }
                }
            }
            assert!((hoisted - sum / count as f64).abs() < 1e-12, "{tie:?}");
        }
    }
}
