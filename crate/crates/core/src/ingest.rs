//! Event-log parsing, dataset assembly, prepared edge-list loading, and the
//! seedable planted-rich-club synthetic generator.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{self, CommAttributes};
use crate::graph::{CommGraph, NodeId, Status, StatusLabels};

/// Communication channel of an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Channel {
    Call,
    Sms,
    Email,
}

impl Channel {
    pub fn parse(token: &str) -> Option<Channel> {
        match token.to_ascii_uppercase().as_str() {
            "CALL" => Some(Channel::Call),
            "SMS" => Some(Channel::Sms),
            "EMAIL" => Some(Channel::Email),
            _ => None,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Channel::Call => "CALL",
            Channel::Sms => "SMS",
            Channel::Email => "EMAIL",
        }
    }
}

/// Attribute normalization window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    Month,
    Year,
}

impl TimeUnit {
    /// Window length in seconds (30-day month, 365-day year).
    pub fn seconds(self) -> u64 {
        match self {
            TimeUnit::Month => 30 * 86_400,
            TimeUnit::Year => 365 * 86_400,
        }
    }

    pub fn parse(token: &str) -> Option<TimeUnit> {
        match token.to_ascii_lowercase().as_str() {
            "month" => Some(TimeUnit::Month),
            "year" => Some(TimeUnit::Year),
            _ => None,
        }
    }
}

/// One communication event as parsed from the events CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub src: String,
    pub dst: String,
    pub timestamp: u64,
    pub channel: Channel,
    pub duration: Option<u64>,
}

/// Row-level outcome of [`parse_events`]. Malformed rows are never silently
/// dropped; they are counted here with their line numbers.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ParseReport {
    pub parsed: usize,
    pub self_events: usize,
    pub malformed: Vec<MalformedRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MalformedRow {
    pub line: usize,
    pub reason: String,
}

const EVENT_HEADER: [&str; 4] = ["src", "dst", "timestamp", "channel"];

/// Parses the events CSV (`src,dst,timestamp,channel[,duration]`, header
/// mandatory). Valid rows come back in file order; self-events are kept in
/// the list but flagged so the graph builder can drop them.
pub fn parse_events<R: Read>(reader: R) -> Result<(Vec<EventRecord>, ParseReport)> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);

    let headers = csv_reader
        .headers()
        .map_err(map_csv_error)?
        .iter()
        .map(|h| h.trim().to_ascii_lowercase())
        .collect::<Vec<_>>();
    if headers.len() < 4
        || headers.len() > 5
        || headers[..4] != EVENT_HEADER
        || (headers.len() == 5 && headers[4] != "duration")
    {
        return Err(Error::format(
            1,
            format!(
                "expected header `src,dst,timestamp,channel[,duration]`, found `{}`",
                headers.join(",")
            ),
        ));
    }

    let mut events = Vec::new();
    let mut report = ParseReport::default();
    for record in csv_reader.records() {
        let record = record.map_err(map_csv_error)?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(0);
        match parse_event_row(&record) {
            Ok(ev) => {
                if ev.src == ev.dst {
                    report.self_events += 1;
                }
                report.parsed += 1;
                events.push(ev);
            }
            Err(reason) => report.malformed.push(MalformedRow { line, reason }),
        }
    }
    Ok((events, report))
}

fn parse_event_row(record: &csv::StringRecord) -> std::result::Result<EventRecord, String> {
    if record.len() < 4 || record.len() > 5 {
        return Err(format!("expected 4 or 5 fields, found {}", record.len()));
    }
    let src = record[0].trim();
    let dst = record[1].trim();
    if src.is_empty() || dst.is_empty() {
        return Err("empty node key".to_string());
    }
    let timestamp: u64 = record[2]
        .trim()
        .parse()
        .map_err(|_| format!("bad timestamp `{}`", &record[2]))?;
    let channel =
        Channel::parse(record[3].trim()).ok_or_else(|| format!("bad channel `{}`", &record[3]))?;
    let duration = match record.get(4).map(str::trim) {
        None | Some("") => None,
        Some(d) => Some(d.parse().map_err(|_| format!("bad duration `{d}`"))?),
    };
    Ok(EventRecord {
        src: src.to_string(),
        dst: dst.to_string(),
        timestamp,
        channel,
        duration,
    })
}

fn map_csv_error(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        }
    } else {
        let line = e
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(0);
        Error::format(line, e.to_string())
    }
}

/// Parses the labels CSV (`node,status` with `M`/`S`, header mandatory).
pub fn parse_labels<R: Read>(reader: R) -> Result<BTreeMap<String, Status>> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = csv_reader
        .headers()
        .map_err(map_csv_error)?
        .iter()
        .map(|h| h.trim().to_ascii_lowercase())
        .collect::<Vec<_>>();
    if headers != ["node", "status"] {
        return Err(Error::format(
            1,
            format!("expected header `node,status`, found `{}`", headers.join(",")),
        ));
    }
    let mut labels = BTreeMap::new();
    for record in csv_reader.records() {
        let record = record.map_err(map_csv_error)?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != 2 {
            return Err(Error::format(line, "expected 2 fields"));
        }
        let node = record[0].trim().to_string();
        let status = match record[1].trim() {
            "M" => Status::Manager,
            "S" => Status::Subordinate,
            other => {
                return Err(Error::format(line, format!("unknown status token `{other}`")))
            }
        };
        labels.insert(node, status);
    }
    Ok(labels)
}

/// A fully assembled analysis input: graph, labels, and per-node attributes,
/// all dimensioned over one node set.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: CommGraph,
    pub labels: StatusLabels,
    pub attributes: Vec<CommAttributes>,
    /// External key per node id, sorted ascending (ids are assigned in key order).
    pub node_keys: Vec<String>,
    pub channel: Channel,
    pub time_unit: TimeUnit,
}

impl Dataset {
    pub fn key_index(&self) -> BTreeMap<&str, NodeId> {
        self.node_keys
            .iter()
            .enumerate()
            .map(|(i, k)| (k.as_str(), i))
            .collect()
    }
}

/// Builds a dataset from parsed events and labels.
///
/// The node set is the union of endpoint keys on the selected channel and
/// label-file keys; label-only nodes stay as isolated nodes. An undirected
/// edge exists iff the pair has at least `min_events` events summed over both
/// directions (the analysis default is 1).
pub fn build_dataset(
    events: &[EventRecord],
    labels: &BTreeMap<String, Status>,
    channel: Channel,
    time_unit: TimeUnit,
    min_events: u64,
) -> Result<Dataset> {
    let selected: Vec<&EventRecord> = events
        .iter()
        .filter(|e| e.channel == channel && e.src != e.dst)
        .collect();
    if selected.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no usable events on channel {}",
            channel.token()
        )));
    }

    let mut keys: BTreeSet<&str> = labels.keys().map(|k| k.as_str()).collect();
    for e in &selected {
        keys.insert(e.src.as_str());
        keys.insert(e.dst.as_str());
    }
    let node_keys: Vec<String> = keys.iter().map(|k| k.to_string()).collect();
    let index: BTreeMap<&str, NodeId> = node_keys
        .iter()
        .enumerate()
        .map(|(i, k)| (k.as_str(), i))
        .collect();

    let mut directed: BTreeMap<(NodeId, NodeId), u64> = BTreeMap::new();
    for e in &selected {
        let s = index[e.src.as_str()];
        let d = index[e.dst.as_str()];
        *directed.entry((s, d)).or_insert(0) += 1;
    }

    let mut pair_totals: BTreeMap<(NodeId, NodeId), u64> = BTreeMap::new();
    for (&(s, d), &c) in &directed {
        let key = (s.min(d), s.max(d));
        *pair_totals.entry(key).or_insert(0) += c;
    }
    let edges: Vec<(NodeId, NodeId)> = pair_totals
        .iter()
        .filter(|(_, &total)| total >= min_events)
        .map(|(&pair, _)| pair)
        .collect();
    if edges.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no pair reaches the minimum of {min_events} events"
        )));
    }
    // Sub-threshold pairs carry no edge, so their orientation counts are dropped
    // to keep the event map consistent with the edge set.
    directed.retain(|&(s, d), _| {
        let key = (s.min(d), s.max(d));
        pair_totals[&key] >= min_events
    });

    let graph = CommGraph::new(node_keys.len(), edges)?.with_directed_events(directed)?;
    let status = StatusLabels::new(
        node_keys
            .iter()
            .map(|k| labels.get(k.as_str()).copied())
            .collect(),
    );
    let attributes = features::extract_attributes(&selected, &index, node_keys.len(), time_unit);

    Ok(Dataset {
        graph,
        labels: status,
        attributes,
        node_keys,
        channel,
        time_unit,
    })
}

/// Configuration of the planted-rich-club generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n: usize,
    pub manager_fraction: f64,
    pub p_mm: f64,
    pub p_ms: f64,
    pub p_ss: f64,
    pub event_rate_manager: f64,
    pub event_rate_subordinate: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if !(self.manager_fraction > 0.0 && self.manager_fraction < 1.0) {
            return Err(Error::Config("manager_fraction must lie in (0,1)".into()));
        }
        for (name, p) in [
            ("p_mm", self.p_mm),
            ("p_ms", self.p_ms),
            ("p_ss", self.p_ss),
        ] {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::Config(format!("{name} must lie in [0,1]")));
            }
        }
        if !(self.p_mm >= self.p_ms && self.p_ms >= self.p_ss) {
            return Err(Error::Config(
                "planted rich club requires p_mm >= p_ms >= p_ss".into(),
            ));
        }
        for (name, r) in [
            ("event_rate_manager", self.event_rate_manager),
            ("event_rate_subordinate", self.event_rate_subordinate),
        ] {
            if !r.is_finite() || r < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Generates a planted-rich-club dataset: the first `floor(n * manager_fraction)`
/// nodes are managers, each unordered pair links with the probability of its
/// status pair, and each orientation of an edge draws a Poisson event count at
/// the source's status rate. Bitwise deterministic for a fixed config.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Dataset> {
    cfg.validate()?;
    let n = cfg.n;
    let n_managers = (n as f64 * cfg.manager_fraction).floor() as usize;
    let status_of = |v: NodeId| {
        if v < n_managers {
            Status::Manager
        } else {
            Status::Subordinate
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = match (status_of(u), status_of(v)) {
                (Status::Manager, Status::Manager) => cfg.p_mm,
                (Status::Subordinate, Status::Subordinate) => cfg.p_ss,
                _ => cfg.p_ms,
            };
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }

    let mut directed = BTreeMap::new();
    for &(u, v) in &edges {
        for (src, dst) in [(u, v), (v, u)] {
            let rate = match status_of(src) {
                Status::Manager => cfg.event_rate_manager,
                Status::Subordinate => cfg.event_rate_subordinate,
            };
            let count = if rate > 0.0 {
                Poisson::new(rate)
                    .map_err(|e| Error::Config(format!("bad event rate: {e}")))?
                    .sample(&mut rng) as u64
            } else {
                0
            };
            if count > 0 {
                directed.insert((src, dst), count);
            }
        }
    }

    let graph = CommGraph::new(n, edges)?.with_directed_events(directed)?;
    let attributes = features::attributes_from_counts(graph.directed_events(), n);
    let width = (n.max(2) - 1).to_string().len();
    let node_keys = (0..n).map(|v| format!("n{v:0width$}")).collect();
    let labels = StatusLabels::new((0..n).map(|v| Some(status_of(v))).collect());

    Ok(Dataset {
        graph,
        labels,
        attributes,
        node_keys,
        channel: Channel::Call,
        time_unit: TimeUnit::Month,
    })
}

/// Loads a prepared corpus: edges CSV (`src,dst,weight`) plus labels CSV
/// (`node,status`). The symmetric weight splits across orientations, odd
/// weights rounding up on the lexicographically smaller source key.
pub fn load_prepared_edgelist(path_edges: &Path, path_labels: &Path) -> Result<Dataset> {
    let labels = parse_labels(open(path_labels)?)?;

    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(open(path_edges)?);
    let headers = csv_reader
        .headers()
        .map_err(map_csv_error)?
        .iter()
        .map(|h| h.trim().to_ascii_lowercase())
        .collect::<Vec<_>>();
    if headers != ["src", "dst", "weight"] {
        return Err(Error::format(
            1,
            format!("expected header `src,dst,weight`, found `{}`", headers.join(",")),
        ));
    }

    // Unordered pair -> total weight, keyed by external string keys.
    let mut pair_weights: BTreeMap<(String, String), u64> = BTreeMap::new();
    for record in csv_reader.records() {
        let record = record.map_err(map_csv_error)?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != 3 {
            return Err(Error::format(line, "expected 3 fields"));
        }
        let src = record[0].trim().to_string();
        let dst = record[1].trim().to_string();
        if src.is_empty() || dst.is_empty() {
            return Err(Error::format(line, "empty node key"));
        }
        if src == dst {
            return Err(Error::format(line, format!("self-loop on `{src}`")));
        }
        let weight: u64 = record[2]
            .trim()
            .parse()
            .map_err(|_| Error::format(line, format!("bad weight `{}`", &record[2])))?;
        if weight == 0 {
            return Err(Error::format(line, "weight must be positive"));
        }
        let key = if src < dst { (src, dst) } else { (dst, src) };
        *pair_weights.entry(key).or_insert(0) += weight;
    }
    if pair_weights.is_empty() {
        return Err(Error::EmptyDataset("edge list contains no edges".into()));
    }

    let mut keys: BTreeSet<&str> = labels.keys().map(|k| k.as_str()).collect();
    for (a, b) in pair_weights.keys() {
        keys.insert(a);
        keys.insert(b);
    }
    let node_keys: Vec<String> = keys.iter().map(|k| k.to_string()).collect();
    let index: BTreeMap<&str, NodeId> = node_keys
        .iter()
        .enumerate()
        .map(|(i, k)| (k.as_str(), i))
        .collect();

    let mut edges = Vec::new();
    let mut directed = BTreeMap::new();
    for ((a, b), w) in &pair_weights {
        // `a < b` lexicographically by construction, so `a` takes the round-up half.
        let ia = index[a.as_str()];
        let ib = index[b.as_str()];
        edges.push((ia, ib));
        let forward = w.div_ceil(2);
        let backward = w - forward;
        if forward > 0 {
            directed.insert((ia, ib), forward);
        }
        if backward > 0 {
            directed.insert((ib, ia), backward);
        }
    }

    let graph = CommGraph::new(node_keys.len(), edges)?.with_directed_events(directed)?;
    let status = StatusLabels::new(
        node_keys
            .iter()
            .map(|k| labels.get(k.as_str()).copied())
            .collect(),
    );
    let attributes = features::attributes_from_counts(graph.directed_events(), node_keys.len());

    Ok(Dataset {
        graph,
        labels: status,
        attributes,
        node_keys,
        channel: Channel::Email,
        time_unit: TimeUnit::Year,
    })
}

/// Writes a dataset back out in the prepared edge-list format. The weight of
/// an edge is the total event count over both orientations (minimum 1 so the
/// edge survives a reload).
pub fn write_prepared_edgelist(ds: &Dataset, edges_out: &mut dyn std::io::Write, labels_out: &mut dyn std::io::Write) -> Result<()> {
    writeln!(edges_out, "src,dst,weight")?;
    for (u, v) in ds.graph.edges() {
        let total = ds.graph.event_count(u, v) + ds.graph.event_count(v, u);
        let (a, b) = if ds.node_keys[u] < ds.node_keys[v] {
            (u, v)
        } else {
            (v, u)
        };
        writeln!(
            edges_out,
            "{},{},{}",
            ds.node_keys[a],
            ds.node_keys[b],
            total.max(1)
        )?;
    }
    writeln!(labels_out, "node,status")?;
    for (v, key) in ds.node_keys.iter().enumerate() {
        if let Some(status) = ds.labels.get(v) {
            writeln!(labels_out, "{},{}", key, status.token())?;
        }
    }
    Ok(())
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels_ab() -> BTreeMap<String, Status> {
        [
            ("a".to_string(), Status::Manager),
            ("b".to_string(), Status::Subordinate),
        ]
        .into_iter()
        .collect()
    }

    #[test]
    fn parse_single_row() {
        let input = "src,dst,timestamp,channel,duration\na,b,100,CALL,32\n";
        let (events, report) = parse_events(input.as_bytes()).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(
            events[0],
            EventRecord {
                src: "a".into(),
                dst: "b".into(),
                timestamp: 100,
                channel: Channel::Call,
                duration: Some(32),
            }
        );
        assert_eq!(report.parsed, 1);
        assert!(report.malformed.is_empty());
    }

    #[test]
    fn parse_flags_self_event() {
        let input = "src,dst,timestamp,channel\na,a,100,SMS\n";
        let (events, report) = parse_events(input.as_bytes()).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(report.self_events, 1);
        // The self event never becomes a graph edge.
        let labels = labels_ab();
        let err = build_dataset(&events, &labels, Channel::Sms, TimeUnit::Month, 1);
        assert!(matches!(err, Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn parse_counts_malformed_with_line() {
        let input = "src,dst,timestamp,channel\n\
                     a,b,100,CALL\n\
                     b,c,101,CALL\n\
                     c,d,oops,CALL\n\
                     d,e,103,CALL\n";
        let (events, report) = parse_events(input.as_bytes()).unwrap();
        assert_eq!(events.len(), 3);
        assert_eq!(report.malformed.len(), 1);
        assert_eq!(report.malformed[0].line, 4);
    }

    #[test]
    fn parse_requires_header() {
        let input = "a,b,100,CALL\n";
        assert!(matches!(
            parse_events(input.as_bytes()),
            Err(Error::Format { line: 1, .. })
        ));
    }

    #[test]
    fn build_reciprocal_pair() {
        let input = "src,dst,timestamp,channel\na,b,100,CALL\nb,a,200,CALL\n";
        let (events, _) = parse_events(input.as_bytes()).unwrap();
        let ds = build_dataset(&events, &labels_ab(), Channel::Call, TimeUnit::Month, 1).unwrap();
        assert_eq!(ds.graph.edge_count(), 1);
        assert_eq!(ds.graph.event_count(0, 1), 1);
        assert_eq!(ds.graph.event_count(1, 0), 1);
    }

    #[test]
    fn build_respects_channel_filter() {
        let input = "src,dst,timestamp,channel\na,b,100,CALL\n";
        let (events, _) = parse_events(input.as_bytes()).unwrap();
        let err = build_dataset(&events, &labels_ab(), Channel::Sms, TimeUnit::Month, 1);
        assert!(matches!(err, Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn build_triangle_matches_pair_scan() {
        let input = "src,dst,timestamp,channel\n\
                     a,b,1,CALL\nb,c,2,CALL\nc,a,3,CALL\na,c,4,CALL\nb,a,5,CALL\n";
        let (events, _) = parse_events(input.as_bytes()).unwrap();
        let labels: BTreeMap<String, Status> = [
            ("a".to_string(), Status::Manager),
            ("b".to_string(), Status::Subordinate),
            ("c".to_string(), Status::Subordinate),
        ]
        .into_iter()
        .collect();
        let ds = build_dataset(&events, &labels, Channel::Call, TimeUnit::Month, 1).unwrap();
        assert_eq!(ds.graph.n(), 3);
        assert_eq!(ds.graph.edge_count(), 3);
        // Brute-force oracle: a pair is an edge iff any event touches it.
        for u in 0..3 {
            for v in (u + 1)..3 {
                let expected = events.iter().any(|e| {
                    let s = ds.node_keys.iter().position(|k| *k == e.src).unwrap();
                    let d = ds.node_keys.iter().position(|k| *k == e.dst).unwrap();
                    (s, d) == (u, v) || (s, d) == (v, u)
                });
                assert_eq!(ds.graph.has_edge(u, v), expected);
            }
        }
    }

    #[test]
    fn min_events_threshold_filters_pairs() {
        let input = "src,dst,timestamp,channel\na,b,1,CALL\na,b,2,CALL\nb,c,3,CALL\n";
        let (events, _) = parse_events(input.as_bytes()).unwrap();
        let labels: BTreeMap<String, Status> = [
            ("a".to_string(), Status::Manager),
            ("b".to_string(), Status::Subordinate),
            ("c".to_string(), Status::Subordinate),
        ]
        .into_iter()
        .collect();
        let ds = build_dataset(&events, &labels, Channel::Call, TimeUnit::Month, 2).unwrap();
        assert_eq!(ds.graph.edge_count(), 1);
        assert!(ds.graph.has_edge(0, 1));
        assert_eq!(ds.graph.event_count(1, 2), 0);
    }

    #[test]
    fn synthetic_extreme_probabilities() {
        let mut cfg = SyntheticConfig {
            n: 4,
            manager_fraction: 0.5,
            p_mm: 0.0,
            p_ms: 0.0,
            p_ss: 0.0,
            event_rate_manager: 2.0,
            event_rate_subordinate: 1.0,
            seed: 1,
        };
        let ds = generate_synthetic(&cfg).unwrap();
        assert_eq!(ds.graph.edge_count(), 0);

        cfg.p_mm = 1.0;
        cfg.p_ms = 1.0;
        cfg.p_ss = 1.0;
        let ds = generate_synthetic(&cfg).unwrap();
        assert_eq!(ds.graph.edge_count(), 6);
    }

    #[test]
    fn synthetic_rejects_inverted_probabilities() {
        let cfg = SyntheticConfig {
            n: 10,
            manager_fraction: 0.2,
            p_mm: 0.1,
            p_ms: 0.4,
            p_ss: 0.05,
            event_rate_manager: 1.0,
            event_rate_subordinate: 1.0,
            seed: 1,
        };
        assert!(matches!(generate_synthetic(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn synthetic_deterministic_for_seed() {
        let cfg = SyntheticConfig {
            n: 50,
            manager_fraction: 0.2,
            p_mm: 0.4,
            p_ms: 0.1,
            p_ss: 0.05,
            event_rate_manager: 9.0,
            event_rate_subordinate: 3.0,
            seed: 7,
        };
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.attributes, b.attributes);
    }

    #[test]
    fn synthetic_rich_club_degree_gap() {
        // Managers should out-degree subordinates in nearly every seed.
        let mut hits = 0;
        for seed in 0..100 {
            let cfg = SyntheticConfig {
                n: 200,
                manager_fraction: 0.2,
                p_mm: 0.4,
                p_ms: 0.1,
                p_ss: 0.05,
                event_rate_manager: 9.0,
                event_rate_subordinate: 3.0,
                seed,
            };
            let ds = generate_synthetic(&cfg).unwrap();
            let n_m = ds.labels.manager_count();
            let mean = |range: std::ops::Range<usize>| {
                let sum: usize = range.clone().map(|v| ds.graph.degree(v)).sum();
                sum as f64 / range.len() as f64
            };
            if mean(0..n_m) > mean(n_m..200) {
                hits += 1;
            }
        }
        assert!(hits >= 95, "manager degree exceeded subordinate in {hits}/100 seeds");
    }

    #[test]
    fn synthetic_manager_subgraph_denser() {
        // Density gap between the induced manager and subordinate subgraphs,
        // checked statistically across seeds.
        let mut gaps = Vec::new();
        for seed in 0..50 {
            let cfg = SyntheticConfig {
                n: 120,
                manager_fraction: 0.25,
                p_mm: 0.4,
                p_ms: 0.1,
                p_ss: 0.05,
                event_rate_manager: 9.0,
                event_rate_subordinate: 3.0,
                seed: 1000 + seed,
            };
            let ds = generate_synthetic(&cfg).unwrap();
            let n_m = ds.labels.manager_count();
            let keep_m: Vec<bool> = (0..ds.graph.n()).map(|v| v < n_m).collect();
            let keep_s: Vec<bool> = (0..ds.graph.n()).map(|v| v >= n_m).collect();
            let density = |g: &CommGraph| {
                let n = g.n();
                g.edge_count() as f64 / (n * (n - 1) / 2) as f64
            };
            let (gm, _) = ds.graph.induced_subgraph(&keep_m);
            let (gs, _) = ds.graph.induced_subgraph(&keep_s);
            gaps.push(density(&gm) - density(&gs));
        }
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let var = gaps.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / gaps.len() as f64;
        let se = (var / gaps.len() as f64).sqrt();
        assert!(
            mean > 3.0 * se,
            "density gap {mean} not significant at 3 sigma (se {se})"
        );
    }

    #[test]
    fn edgelist_small_file() {
        let edges = "src,dst,weight\na,b,2\nb,c,4\n";
        let labels = "node,status\na,M\nb,S\nc,S\n";
        let dir = tempfile::tempdir().unwrap();
        let ep = dir.path().join("edges.csv");
        let lp = dir.path().join("labels.csv");
        std::fs::write(&ep, edges).unwrap();
        std::fs::write(&lp, labels).unwrap();
        let ds = load_prepared_edgelist(&ep, &lp).unwrap();
        assert_eq!(ds.graph.edge_count(), 2);
        assert_eq!(ds.labels.manager_count(), 1);
    }

    #[test]
    fn edgelist_unknown_status_token() {
        let edges = "src,dst,weight\na,x,1\n";
        let labels = "node,status\nx,Q\n";
        let dir = tempfile::tempdir().unwrap();
        let ep = dir.path().join("edges.csv");
        let lp = dir.path().join("labels.csv");
        std::fs::write(&ep, edges).unwrap();
        std::fs::write(&lp, labels).unwrap();
        match load_prepared_edgelist(&ep, &lp) {
            Err(Error::Format { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains('Q'));
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn edgelist_odd_weight_split() {
        let edges = "src,dst,weight\na,b,5\n";
        let labels = "node,status\na,M\nb,S\n";
        let dir = tempfile::tempdir().unwrap();
        let ep = dir.path().join("edges.csv");
        let lp = dir.path().join("labels.csv");
        std::fs::write(&ep, edges).unwrap();
        std::fs::write(&lp, labels).unwrap();
        let ds = load_prepared_edgelist(&ep, &lp).unwrap();
        let a = ds.node_keys.iter().position(|k| k == "a").unwrap();
        let b = ds.node_keys.iter().position(|k| k == "b").unwrap();
        assert_eq!(ds.graph.event_count(a, b), 3);
        assert_eq!(ds.graph.event_count(b, a), 2);
    }

    #[test]
    fn dataset_roundtrips_through_prepared_format() {
        let cfg = SyntheticConfig {
            n: 40,
            manager_fraction: 0.25,
            p_mm: 0.5,
            p_ms: 0.2,
            p_ss: 0.1,
            event_rate_manager: 5.0,
            event_rate_subordinate: 2.0,
            seed: 11,
        };
        let ds = generate_synthetic(&cfg).unwrap();
        let mut edges_buf = Vec::new();
        let mut labels_buf = Vec::new();
        write_prepared_edgelist(&ds, &mut edges_buf, &mut labels_buf).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let ep = dir.path().join("edges.csv");
        let lp = dir.path().join("labels.csv");
        std::fs::write(&ep, &edges_buf).unwrap();
        std::fs::write(&lp, &labels_buf).unwrap();
        let reloaded = load_prepared_edgelist(&ep, &lp).unwrap();
        assert_eq!(reloaded.node_keys, ds.node_keys);
        // The undirected edge set round-trips exactly.
        let orig: Vec<_> = ds.graph.edges().collect();
        let back: Vec<_> = reloaded.graph.edges().collect();
        assert_eq!(orig, back);
        assert_eq!(reloaded.labels, ds.labels);
    }
}
