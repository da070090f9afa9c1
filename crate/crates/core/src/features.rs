//! Per-node communication attributes, derived social features, and the
//! equal-frequency discretization that turns both into the indicator blocks
//! consumed by the factor graph model and the logistic baseline.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CommGraph, NodeId};
use crate::ingest::{EventRecord, TimeUnit};
use crate::socmetrics;

/// Communication attributes per time unit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CommAttributes {
    pub in_degree: f64,
    pub out_degree: f64,
    pub in_event: f64,
    pub out_event: f64,
}

pub const COMM_ATTRIBUTE_NAMES: [&str; 4] = ["in_degree", "out_degree", "in_event", "out_event"];

impl CommAttributes {
    pub fn as_array(&self) -> [f64; 4] {
        [self.in_degree, self.out_degree, self.in_event, self.out_event]
    }
}

/// Number of whole time units spanned by the events (`ceil(span/unit)`,
/// minimum 1 so empty or single-instant logs stay well-defined).
fn time_units(events: &[&EventRecord], unit: TimeUnit) -> u64 {
    let (mut min_ts, mut max_ts) = (u64::MAX, 0u64);
    for e in events {
        min_ts = min_ts.min(e.timestamp);
        max_ts = max_ts.max(e.timestamp);
    }
    if events.is_empty() {
        return 1;
    }
    let span = max_ts - min_ts;
    span.div_ceil(unit.seconds()).max(1)
}

/// Extracts per-node attributes from single-channel events: event counts per
/// direction and distinct-contact counts per direction, both divided by the
/// number of time units.
pub fn extract_attributes(
    events: &[&EventRecord],
    index: &BTreeMap<&str, NodeId>,
    n: usize,
    unit: TimeUnit,
) -> Vec<CommAttributes> {
    let t = time_units(events, unit) as f64;
    let mut out_events = vec![0u64; n];
    let mut in_events = vec![0u64; n];
    let mut out_contacts: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    let mut in_contacts: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for e in events {
        let s = index[e.src.as_str()];
        let d = index[e.dst.as_str()];
        out_events[s] += 1;
        in_events[d] += 1;
        out_contacts[s].push(d);
        in_contacts[d].push(s);
    }
    (0..n)
        .map(|v| {
            let distinct = |list: &mut Vec<NodeId>| {
                list.sort_unstable();
                list.dedup();
                list.len() as f64
            };
            CommAttributes {
                in_degree: distinct(&mut in_contacts[v]) / t,
                out_degree: distinct(&mut out_contacts[v]) / t,
                in_event: in_events[v] as f64 / t,
                out_event: out_events[v] as f64 / t,
            }
        })
        .collect()
}

/// Attributes from bare directed counts (prepared edge lists and synthetic
/// datasets carry no timestamps, so the window is a single time unit).
pub fn attributes_from_counts(
    directed: &BTreeMap<(NodeId, NodeId), u64>,
    n: usize,
) -> Vec<CommAttributes> {
    let mut attrs = vec![CommAttributes::default(); n];
    for (&(s, d), &c) in directed {
        if c == 0 {
            continue;
        }
        attrs[s].out_event += c as f64;
        attrs[s].out_degree += 1.0;
        attrs[d].in_event += c as f64;
        attrs[d].in_degree += 1.0;
    }
    attrs
}

pub const SOCIAL_FEATURE_NAMES: [&str; 5] = [
    "hole_score",
    "clustering",
    "balance_sb",
    "degree",
    "mean_common_neighbors",
];

/// Social feature vector for one node, fixed order:
/// `[negated Burt constraint, local clustering, overall balance ratio,
/// degree, mean common neighbors with neighbors]`. Undefined values map to 0.
pub fn social_features(g: &CommGraph, v: NodeId) -> [f64; 5] {
    let (values, _) = social_features_with_flags(g, v);
    values
}

/// Same vector plus definedness flags for the two entries that can be
/// undefined (hole score on isolated nodes, balance ratio below degree 2).
pub fn social_features_with_flags(g: &CommGraph, v: NodeId) -> ([f64; 5], [bool; 2]) {
    let hole = socmetrics::burt_constraint(g, v).map(|c| -c);
    let labels = crate::graph::StatusLabels::unlabeled(g.n());
    let (_, _, sb) = socmetrics::balance_ratios(g, &labels, v);
    let degree = g.degree(v);
    let mean_cn = if degree == 0 {
        0.0
    } else {
        let total: usize = g
            .neighbors(v)
            .iter()
            .map(|&u| socmetrics::common_neighbors(g, v, u))
            .sum();
        total as f64 / degree as f64
    };
    (
        [
            hole.unwrap_or(0.0),
            g.local_clustering(v),
            sb.unwrap_or(0.0),
            degree as f64,
            mean_cn,
        ],
        [hole.is_some(), sb.is_some()],
    )
}

/// One-hot feature matrix produced by [`Discretizer::transform`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    /// `n x K` indicator matrix; rows are concatenated one-hot blocks.
    pub x: Vec<Vec<f64>>,
    pub feature_names: Vec<String>,
    /// Cut points per raw attribute, as fitted on training rows.
    pub bin_edges: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.x.len()
    }

    pub fn k(&self) -> usize {
        self.feature_names.len()
    }
}

/// Equal-frequency binning fitted on training rows and reused verbatim at
/// prediction time. Out-of-range values clamp to the extreme bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretizer {
    pub raw_names: Vec<String>,
    pub bin_edges: Vec<Vec<f64>>,
}

impl Discretizer {
    /// Fits cut points per raw attribute from the given training rows.
    /// A constant attribute degenerates to a single bin, flagged in the name.
    pub fn fit(
        raw: &[Vec<f64>],
        train_rows: &[usize],
        raw_names: &[String],
        n_bins: usize,
    ) -> Result<Discretizer> {
        if n_bins < 2 {
            return Err(Error::Config("n_bins must be at least 2".into()));
        }
        if train_rows.is_empty() {
            return Err(Error::Config("discretizer needs training rows".into()));
        }
        let n_cols = raw_names.len();
        for &r in train_rows {
            if r >= raw.len() {
                return Err(Error::Shape(format!("training row {r} out of range")));
            }
            if raw[r].len() != n_cols {
                return Err(Error::Shape(format!(
                    "row {r} has {} columns, expected {n_cols}",
                    raw[r].len()
                )));
            }
        }
        let mut bin_edges = Vec::with_capacity(n_cols);
        for col in 0..n_cols {
            let mut values: Vec<f64> = train_rows.iter().map(|&r| raw[r][col]).collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let m = values.len();
            let mut edges = Vec::new();
            for k in 1..n_bins {
                let idx = (k * m).div_ceil(n_bins).saturating_sub(1);
                let edge = values[idx];
                // Skip duplicate and vacuous edges (edge at the max splits nothing).
                if edge < values[m - 1] && edges.last() != Some(&edge) {
                    edges.push(edge);
                }
            }
            bin_edges.push(edges);
        }
        Ok(Discretizer {
            raw_names: raw_names.to_vec(),
            bin_edges,
        })
    }

    pub fn n_bins_of(&self, col: usize) -> usize {
        self.bin_edges[col].len() + 1
    }

    fn bin_of(&self, col: usize, value: f64) -> usize {
        self.bin_edges[col].iter().filter(|&&e| value > e).count()
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (col, raw) in self.raw_names.iter().enumerate() {
            let bins = self.n_bins_of(col);
            if bins == 1 {
                names.push(format!("{raw}[constant]"));
            } else {
                for b in 0..bins {
                    names.push(format!("{raw}[bin{b}]"));
                }
            }
        }
        names
    }

    /// Maps raw rows to concatenated one-hot blocks using the fitted edges.
    pub fn transform(&self, raw: &[Vec<f64>]) -> Result<FeatureMatrix> {
        let k: usize = (0..self.raw_names.len()).map(|c| self.n_bins_of(c)).sum();
        let mut x = Vec::with_capacity(raw.len());
        for (r, row) in raw.iter().enumerate() {
            if row.len() != self.raw_names.len() {
                return Err(Error::Shape(format!(
                    "row {r} has {} columns, expected {}",
                    row.len(),
                    self.raw_names.len()
                )));
            }
            let mut out = Vec::with_capacity(k);
            for (col, &value) in row.iter().enumerate() {
                let bins = self.n_bins_of(col);
                let hit = self.bin_of(col, value);
                for b in 0..bins {
                    out.push(if b == hit { 1.0 } else { 0.0 });
                }
            }
            x.push(out);
        }
        Ok(FeatureMatrix {
            x,
            feature_names: self.feature_names(),
            bin_edges: self.bin_edges.clone(),
        })
    }
}
