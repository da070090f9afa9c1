//! Social-theory analyses over a labeled communication graph: structural-hole
//! scoring and top-rho selection, link homophily by tie type, ego-network
//! balance ratios, and maximal-clique size distributions.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{CommGraph, NodeId, Status, StatusLabels};

/// Default clique-count budget for enumeration.
pub const DEFAULT_CLIQUE_BUDGET: u64 = 10_000_000;

/// Counts common neighbors of two distinct nodes.
pub fn common_neighbors(g: &CommGraph, u: NodeId, v: NodeId) -> usize {
    debug_assert_ne!(u, v);
    sorted_intersection_count(g.neighbors(u), g.neighbors(v))
}

fn sorted_intersection_count(a: &[NodeId], b: &[NodeId]) -> usize {
    let mut i = 0;
    let mut j = 0;
    let mut count = 0;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Burt's network constraint on the unweighted projection:
/// `C(v) = sum_j (p_vj + sum_q p_vq * p_qj)^2` with `p_xy = 1/deg(x)`,
/// `j` over neighbors of `v` and `q` over common neighbors of `v` and `j`.
/// `None` for isolated nodes.
pub fn burt_constraint(g: &CommGraph, v: NodeId) -> Option<f64> {
    let nbrs = g.neighbors(v);
    if nbrs.is_empty() {
        return None;
    }
    let p_v = 1.0 / nbrs.len() as f64;
    let mut total = 0.0;
    for &j in nbrs {
        let mut c = p_v;
        // Two-pointer walk over the sorted lists; q != v and q != j hold
        // because the graph has no self-loops.
        let (a, b) = (nbrs, g.neighbors(j));
        let (mut i, mut k) = (0, 0);
        while i < a.len() && k < b.len() {
            match a[i].cmp(&b[k]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => k += 1,
                std::cmp::Ordering::Equal => {
                    let q = a[i];
                    c += p_v / g.degree(q) as f64;
                    i += 1;
                    k += 1;
                }
            }
        }
        total += c * c;
    }
    Some(total)
}

/// Structural-hole scorer interface. Higher scores mean more hole-spanning;
/// `None` ranks last.
pub trait HoleScorer: Sync {
    fn name(&self) -> &'static str;
    fn score(&self, g: &CommGraph, v: NodeId) -> Option<f64>;

    fn score_all(&self, g: &CommGraph) -> Vec<Option<f64>> {
        (0..g.n()).map(|v| self.score(g, v)).collect()
    }
}

/// Default scorer: negated Burt constraint (lower constraint spans more holes).
#[derive(Debug, Clone, Copy, Default)]
pub struct BurtScorer;

impl HoleScorer for BurtScorer {
    fn name(&self) -> &'static str {
        "negated_burt_constraint"
    }

    fn score(&self, g: &CommGraph, v: NodeId) -> Option<f64> {
        burt_constraint(g, v).map(|c| -c)
    }
}

/// Outcome of top-rho structural-hole selection.
#[derive(Debug, Clone, Serialize)]
pub struct SHReport {
    pub scorer: String,
    pub rho: f64,
    pub n_flagged: usize,
    /// Fraction of labeled managers flagged as structural holes.
    pub p_manager_is_sh: f64,
    /// Fraction of labeled subordinates flagged as structural holes.
    pub p_subordinate_is_sh: f64,
    pub scores: Vec<Option<f64>>,
    pub flagged: Vec<bool>,
}

/// Ranks node ids by score descending, `None` last, ties broken by id ascending.
pub fn rank_by_score(nodes: impl Iterator<Item = NodeId>, scores: &[Option<f64>]) -> Vec<NodeId> {
    let mut order: Vec<NodeId> = nodes.collect();
    order.sort_by(|&a, &b| match (scores[a], scores[b]) {
        (Some(x), Some(y)) => y.partial_cmp(&x).unwrap().then(a.cmp(&b)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.cmp(&b),
    });
    order
}

/// Flags the top `ceil(rho * n_labeled)` labeled nodes by hole score and
/// reports per-group flagged fractions.
pub fn select_structural_holes(
    g: &CommGraph,
    labels: &StatusLabels,
    rho: f64,
    scorer: &dyn HoleScorer,
) -> Result<SHReport> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Config(format!("rho must lie in (0,1), got {rho}")));
    }
    let n_labeled = labels.labeled_count();
    if n_labeled == 0 {
        return Err(Error::Config("structural-hole selection needs labels".into()));
    }
    let scores = scorer.score_all(g);
    let order = rank_by_score(labels.labeled_nodes(), &scores);
    let n_flagged = ((rho * n_labeled as f64).ceil() as usize).min(n_labeled);
    let mut flagged = vec![false; g.n()];
    for &v in order.iter().take(n_flagged) {
        flagged[v] = true;
    }
    let fraction = |status: Status| {
        let total = labels
            .labeled_nodes()
            .filter(|&v| labels.get(v) == Some(status))
            .count();
        if total == 0 {
            return 0.0;
        }
        let hit = labels
            .labeled_nodes()
            .filter(|&v| flagged[v] && labels.get(v) == Some(status))
            .count();
        hit as f64 / total as f64
    };
    Ok(SHReport {
        scorer: scorer.name().to_string(),
        rho,
        n_flagged,
        p_manager_is_sh: fraction(Status::Manager),
        p_subordinate_is_sh: fraction(Status::Subordinate),
        scores,
        flagged,
    })
}

/// Tie type of a labeled pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum TieType {
    MM,
    MS,
    SS,
}

impl TieType {
    pub fn of(a: Status, b: Status) -> TieType {
        match (a, b) {
            (Status::Manager, Status::Manager) => TieType::MM,
            (Status::Subordinate, Status::Subordinate) => TieType::SS,
            _ => TieType::MS,
        }
    }
}

/// Common-neighbor summary for one tie type.
#[derive(Debug, Clone, Serialize)]
pub struct TieStats {
    pub pairs: u64,
    pub mean: f64,
    /// Normal-approximation half-width `1.96 * s / sqrt(m)`; `None` for m < 2.
    pub ci_halfwidth: Option<f64>,
}

/// Mean common neighbors per tie type over labeled pairs.
#[derive(Debug, Clone, Serialize)]
pub struct HomophilyReport {
    pub edges_only: bool,
    pub mm: Option<TieStats>,
    pub ms: Option<TieStats>,
    pub ss: Option<TieStats>,
}

impl HomophilyReport {
    pub fn get(&self, tie: TieType) -> Option<&TieStats> {
        match tie {
            TieType::MM => self.mm.as_ref(),
            TieType::MS => self.ms.as_ref(),
            TieType::SS => self.ss.as_ref(),
        }
    }
}

/// Computes mean common-neighbor counts per tie type. By default every
/// labeled unordered pair counts, connected or not; `edges_only` restricts to
/// adjacent pairs.
pub fn homophily_report(
    g: &CommGraph,
    labels: &StatusLabels,
    edges_only: bool,
) -> Result<HomophilyReport> {
    if labels.labeled_count() < 2 {
        return Err(Error::Config("homophily needs at least 2 labeled nodes".into()));
    }
    let labeled: Vec<NodeId> = labels.labeled_nodes().collect();
    let mut acc: BTreeMap<TieType, (u64, f64, f64)> = BTreeMap::new();
    for (i, &u) in labeled.iter().enumerate() {
        for &v in &labeled[(i + 1)..] {
            if edges_only && !g.has_edge(u, v) {
                continue;
            }
            let tie = TieType::of(labels.get(u).unwrap(), labels.get(v).unwrap());
            let cn = common_neighbors(g, u, v) as f64;
            let entry = acc.entry(tie).or_insert((0, 0.0, 0.0));
            entry.0 += 1;
            entry.1 += cn;
            entry.2 += cn * cn;
        }
    }
    let stats = |tie: TieType| {
        acc.get(&tie).map(|&(m, sum, sumsq)| {
            let mean = sum / m as f64;
            let ci = if m >= 2 {
                let var = (sumsq - sum * sum / m as f64) / (m as f64 - 1.0);
                Some(1.96 * var.max(0.0).sqrt() / (m as f64).sqrt())
            } else {
                None
            };
            TieStats {
                pairs: m,
                mean,
                ci_halfwidth: ci,
            }
        })
    };
    Ok(HomophilyReport {
        edges_only,
        mm: stats(TieType::MM),
        ms: stats(TieType::MS),
        ss: stats(TieType::SS),
    })
}

/// Closed/total wedge counts around one ego, split by friend set.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct BalanceCounts {
    pub manager_closed: u64,
    pub manager_total: u64,
    pub subordinate_closed: u64,
    pub subordinate_total: u64,
    pub all_closed: u64,
    pub all_total: u64,
}

impl BalanceCounts {
    /// `(m_sb, s_sb, sb)` as balanced/total fractions; `None` when the friend
    /// set has fewer than two members.
    pub fn ratios(&self) -> (Option<f64>, Option<f64>, Option<f64>) {
        let frac = |c: u64, t: u64| (t > 0).then(|| c as f64 / t as f64);
        (
            frac(self.manager_closed, self.manager_total),
            frac(self.subordinate_closed, self.subordinate_total),
            frac(self.all_closed, self.all_total),
        )
    }

    /// Balanced/unbalanced odds; `None` when no wedge is open (or none exists).
    pub fn odds(&self) -> (Option<f64>, Option<f64>, Option<f64>) {
        let odds = |c: u64, t: u64| (t > c).then(|| c as f64 / (t - c) as f64);
        (
            odds(self.manager_closed, self.manager_total),
            odds(self.subordinate_closed, self.subordinate_total),
            odds(self.all_closed, self.all_total),
        )
    }
}

/// Wedge counts for one ego. A wedge over two friends is balanced iff the
/// friends are themselves adjacent.
pub fn balance_counts(g: &CommGraph, labels: &StatusLabels, v: NodeId) -> BalanceCounts {
    let nbrs = g.neighbors(v);
    let mut counts = BalanceCounts::default();
    for (i, &a) in nbrs.iter().enumerate() {
        for &b in &nbrs[(i + 1)..] {
            let closed = g.has_edge(a, b);
            let bump = |c: &mut u64, t: &mut u64| {
                *t += 1;
                if closed {
                    *c += 1;
                }
            };
            bump(&mut counts.all_closed, &mut counts.all_total);
            if labels.get(a) == Some(Status::Manager) && labels.get(b) == Some(Status::Manager) {
                bump(&mut counts.manager_closed, &mut counts.manager_total);
            }
            if labels.get(a) == Some(Status::Subordinate)
                && labels.get(b) == Some(Status::Subordinate)
            {
                bump(&mut counts.subordinate_closed, &mut counts.subordinate_total);
            }
        }
    }
    counts
}

/// Per-node balance ratios `(m_sb, s_sb, sb)`.
pub fn balance_ratios(
    g: &CommGraph,
    labels: &StatusLabels,
    v: NodeId,
) -> (Option<f64>, Option<f64>, Option<f64>) {
    balance_counts(g, labels, v).ratios()
}

/// Mean of an optional-valued per-node quantity with the defined count.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeanCount {
    pub mean: Option<f64>,
    pub defined: usize,
}

fn mean_count(values: impl Iterator<Item = Option<f64>>) -> MeanCount {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values.flatten() {
        sum += v;
        n += 1;
    }
    MeanCount {
        mean: (n > 0).then(|| sum / n as f64),
        defined: n,
    }
}

/// Group means of the balance ratios for egos of one status.
#[derive(Debug, Clone, Serialize)]
pub struct GroupBalance {
    pub m_sb: MeanCount,
    pub s_sb: MeanCount,
    pub sb: MeanCount,
    /// Secondary odds form (balanced/unbalanced) of the same three ratios.
    pub m_sb_odds: MeanCount,
    pub s_sb_odds: MeanCount,
    pub sb_odds: MeanCount,
}

/// Per-node balance ratios plus per-status group means.
#[derive(Debug, Clone, Serialize)]
pub struct BalanceReport {
    pub per_node: Vec<BalanceCounts>,
    pub manager: GroupBalance,
    pub subordinate: GroupBalance,
}

pub fn balance_report(g: &CommGraph, labels: &StatusLabels) -> BalanceReport {
    let per_node: Vec<BalanceCounts> =
        (0..g.n()).map(|v| balance_counts(g, labels, v)).collect();
    let group = |status: Status| {
        let members = || {
            (0..g.n()).filter(move |&v| labels.get(v) == Some(status))
        };
        GroupBalance {
            m_sb: mean_count(members().map(|v| per_node[v].ratios().0)),
            s_sb: mean_count(members().map(|v| per_node[v].ratios().1)),
            sb: mean_count(members().map(|v| per_node[v].ratios().2)),
            m_sb_odds: mean_count(members().map(|v| per_node[v].odds().0)),
            s_sb_odds: mean_count(members().map(|v| per_node[v].odds().1)),
            sb_odds: mean_count(members().map(|v| per_node[v].odds().2)),
        }
    };
    BalanceReport {
        manager: group(Status::Manager),
        subordinate: group(Status::Subordinate),
        per_node,
    }
}

/// Size histogram of maximal cliques. Keys start at 2; isolated nodes are
/// counted separately as singletons.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CliqueDistribution {
    pub histogram: BTreeMap<usize, u64>,
    pub max_size: usize,
    pub singletons: u64,
}

/// Enumerates all maximal cliques (pivoted recursive search) and histograms
/// them by size. Aborts with `BudgetExceeded` once the number of maximal
/// cliques found passes `budget`.
pub fn maximal_cliques(g: &CommGraph, budget: u64) -> Result<CliqueDistribution> {
    let mut dist = CliqueDistribution {
        histogram: BTreeMap::new(),
        max_size: 0,
        singletons: 0,
    };
    let mut found = 0u64;
    let mut r = Vec::new();
    let p: Vec<NodeId> = (0..g.n()).collect();
    let x = Vec::new();
    bron_kerbosch(g, &mut r, p, x, budget, &mut found, &mut dist)?;
    Ok(dist)
}

fn bron_kerbosch(
    g: &CommGraph,
    r: &mut Vec<NodeId>,
    p: Vec<NodeId>,
    mut x: Vec<NodeId>,
    budget: u64,
    found: &mut u64,
    dist: &mut CliqueDistribution,
) -> Result<()> {
    if p.is_empty() && x.is_empty() {
        *found += 1;
        if *found > budget {
            return Err(Error::BudgetExceeded(budget));
        }
        let size = r.len();
        if size >= 2 {
            *dist.histogram.entry(size).or_insert(0) += 1;
        } else {
            dist.singletons += 1;
        }
        dist.max_size = dist.max_size.max(size);
        return Ok(());
    }
    // Pivot: the candidate (from P union X) covering the most of P.
    let pivot = p
        .iter()
        .chain(x.iter())
        .copied()
        .max_by_key(|&u| (sorted_intersection_count(g.neighbors(u), &p), std::cmp::Reverse(u)))
        .unwrap();
    let mut p = p;
    let candidates: Vec<NodeId> = p
        .iter()
        .copied()
        .filter(|&v| !g.has_edge(pivot, v))
        .collect();
    for v in candidates {
        let nbrs = g.neighbors(v);
        let next_p: Vec<NodeId> = p.iter().copied().filter(|&w| nbrs.binary_search(&w).is_ok()).collect();
        let next_x: Vec<NodeId> = x.iter().copied().filter(|&w| nbrs.binary_search(&w).is_ok()).collect();
        r.push(v);
        bron_kerbosch(g, r, next_p, next_x, budget, found, dist)?;
        r.pop();
        p.retain(|&w| w != v);
        // Keep X sorted so the intersection filters above stay valid.
        let pos = x.binary_search(&v).unwrap_or_else(|e| e);
        x.insert(pos, v);
    }
    Ok(())
}

/// Clique distributions for the manager subgraph, subordinate subgraph, and
/// the full graph.
#[derive(Debug, Clone, Serialize)]
pub struct CliqueReport {
    pub managers: CliqueDistribution,
    pub subordinates: CliqueDistribution,
    pub full: CliqueDistribution,
}

pub fn clique_report(g: &CommGraph, labels: &StatusLabels, budget: u64) -> Result<CliqueReport> {
    if labels.labeled_count() == 0 {
        return Err(Error::Config("clique report needs labels".into()));
    }
    let keep = |status: Status| -> Vec<bool> {
        (0..g.n()).map(|v| labels.get(v) == Some(status)).collect()
    };
    let (gm, _) = g.induced_subgraph(&keep(Status::Manager));
    let (gs, _) = g.induced_subgraph(&keep(Status::Subordinate));
    Ok(CliqueReport {
        managers: maximal_cliques(&gm, budget)?,
        subordinates: maximal_cliques(&gs, budget)?,
        full: maximal_cliques(g, budget)?,
    })
}
