//! Batch command-line front end: `analyze`, `nulltest`, `synth`, `train`,
//! `predict`, `evaluate`. Every output embeds the run configuration and
//! content hashes of the inputs; files are written atomically after all
//! computation succeeds.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::baselines::LogisticConfig;
use crate::error::{Error, Result};
use crate::fgm::{Inference, LbpConfig, ModelFile, TrainConfig};
use crate::graph::{Status, TopologyStats};
use crate::ingest::{self, Channel, Dataset, SyntheticConfig, TimeUnit};
use crate::nullmodel::{permutation_test, stat_library, PermutationReport};
use crate::pipeline;
use crate::report::{
    cell_f64, cell_opt, input_hashes, significance_stars, OutputSet, Table,
};
use crate::socmetrics::{
    self, clique_report, homophily_report, select_structural_holes, BurtScorer, TieType,
};

#[derive(Debug, Parser)]
#[command(name = "statusnet", version, about = "Communication network analysis and social status inference")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Topology, structural-hole, homophily, balance, and clique reports.
    Analyze(AnalyzeArgs),
    /// Label-shuffling permutation tests for the statistic library.
    Nulltest(NulltestArgs),
    /// Generate a planted-rich-club dataset in the prepared edge-list format.
    Synth(SynthArgs),
    /// Train the factor graph model on the labeled nodes.
    Train(TrainArgs),
    /// Predict unlabeled nodes with a trained model.
    Predict(PredictArgs),
    /// Cross-validated comparison of NB, LRC, and FGM.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Tsv,
    Both,
}

impl Format {
    fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }

    fn tsv(self) -> bool {
        matches!(self, Format::Tsv | Format::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ChannelArg {
    Call,
    Sms,
    Email,
}

impl From<ChannelArg> for Channel {
    fn from(c: ChannelArg) -> Channel {
        match c {
            ChannelArg::Call => Channel::Call,
            ChannelArg::Sms => Channel::Sms,
            ChannelArg::Email => Channel::Email,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnitArg {
    Month,
    Year,
}

impl From<TimeUnitArg> for TimeUnit {
    fn from(t: TimeUnitArg) -> TimeUnit {
        match t {
            TimeUnitArg::Month => TimeUnit::Month,
            TimeUnitArg::Year => TimeUnit::Year,
        }
    }
}

/// Dataset selection shared by the analysis commands: either an events CSV or
/// a prepared edge list, plus the labels CSV.
#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Events CSV: src,dst,timestamp,channel[,duration]
    #[arg(long, conflicts_with = "edgelist")]
    pub events: Option<PathBuf>,
    /// Prepared edge list CSV: src,dst,weight
    #[arg(long)]
    pub edgelist: Option<PathBuf>,
    /// Labels CSV: node,status with M/S
    #[arg(long)]
    pub labels: PathBuf,
    /// Channel to select from the events file
    #[arg(long, value_enum, default_value_t = ChannelArg::Call)]
    pub channel: ChannelArg,
    /// Attribute normalization window
    #[arg(long = "time-unit", value_enum, default_value_t = TimeUnitArg::Month)]
    pub time_unit: TimeUnitArg,
    /// Minimum events (both directions combined) for a pair to become an edge
    #[arg(long = "min-events", default_value_t = 1)]
    pub min_events: u64,
}

impl InputArgs {
    fn load(&self) -> Result<(Dataset, Vec<PathBuf>)> {
        match (&self.events, &self.edgelist) {
            (Some(events_path), None) => {
                let file = std::fs::File::open(events_path).map_err(|e| {
                    Error::Io(std::io::Error::new(
                        e.kind(),
                        format!("{}: {e}", events_path.display()),
                    ))
                })?;
                let (events, parse_report) =
                    ingest::parse_events(file).map_err(|e| name_input(e, events_path))?;
                if !parse_report.malformed.is_empty() {
                    eprintln!(
                        "warning: {} malformed event row(s), first at line {}",
                        parse_report.malformed.len(),
                        parse_report.malformed[0].line
                    );
                }
                if parse_report.self_events > 0 {
                    eprintln!(
                        "warning: {} self-event(s) excluded from graph edges",
                        parse_report.self_events
                    );
                }
                let labels_file = std::fs::File::open(&self.labels).map_err(|e| {
                    Error::Io(std::io::Error::new(
                        e.kind(),
                        format!("{}: {e}", self.labels.display()),
                    ))
                })?;
                let labels =
                    ingest::parse_labels(labels_file).map_err(|e| name_input(e, &self.labels))?;
                let ds = ingest::build_dataset(
                    &events,
                    &labels,
                    self.channel.into(),
                    self.time_unit.into(),
                    self.min_events,
                )
                .map_err(|e| name_input(e, events_path))?;
                Ok((ds, vec![events_path.clone(), self.labels.clone()]))
            }
            (None, Some(edges_path)) => {
                let ds = ingest::load_prepared_edgelist(edges_path, &self.labels)?;
                Ok((ds, vec![edges_path.clone(), self.labels.clone()]))
            }
            _ => Err(Error::Config(
                "provide exactly one of --events or --edgelist".into(),
            )),
        }
    }
}

fn name_input(e: Error, path: &Path) -> Error {
    let named = |msg: String| format!("{}: {msg}", path.display());
    match e {
        Error::Format { line, message } => Error::Format {
            line,
            message: named(message),
        },
        Error::EmptyDataset(msg) => Error::EmptyDataset(named(msg)),
        Error::Config(msg) => Error::Config(named(msg)),
        other => other,
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    /// Output directory
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Which report formats to write
    #[arg(long, value_enum, default_value_t = Format::Both)]
    pub format: Format,
}

/// Factor graph model hyperparameters shared by train and evaluate.
#[derive(Debug, Clone, Args, Serialize)]
pub struct FgmArgs {
    /// Bins per raw attribute for equal-frequency discretization
    #[arg(long, default_value_t = 4)]
    pub bins: usize,
    /// Gradient-ascent learning rate
    #[arg(long, default_value_t = 0.05)]
    pub eta: f64,
    /// Maximum training epochs
    #[arg(long = "epochs", default_value_t = 500)]
    pub max_epochs: usize,
    /// L2 regularization strength
    #[arg(long, default_value_t = 0.01)]
    pub lambda: f64,
    /// Stop when the gradient infinity-norm falls below this
    #[arg(long = "grad-tol", default_value_t = 1e-4)]
    pub grad_tol: f64,
    /// Belief propagation iterations
    #[arg(long = "lbp-iters", default_value_t = 100)]
    pub lbp_iters: usize,
    /// Belief propagation damping in [0,1)
    #[arg(long, default_value_t = 0.5)]
    pub damping: f64,
    /// Belief propagation convergence tolerance
    #[arg(long = "lbp-tol", default_value_t = 1e-6)]
    pub lbp_tol: f64,
}

impl FgmArgs {
    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            eta: self.eta,
            max_epochs: self.max_epochs,
            grad_tol: self.grad_tol,
            lambda: self.lambda,
            lbp: LbpConfig {
                max_iters: self.lbp_iters,
                damping: self.damping,
                tol: self.lbp_tol,
            },
            inference: Inference::default(),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Fraction of labeled nodes flagged as structural holes
    #[arg(long, default_value_t = 0.21)]
    pub rho: f64,
    /// Restrict homophily pairs to connected pairs
    #[arg(long = "homophily-edges-only", default_value_t = false)]
    pub homophily_edges_only: bool,
    /// Clique enumeration budget
    #[arg(long = "clique-budget", default_value_t = socmetrics::DEFAULT_CLIQUE_BUDGET)]
    pub clique_budget: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NulltestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Fraction of labeled nodes flagged as structural holes
    #[arg(long, default_value_t = 0.21)]
    pub rho: f64,
    /// Number of label shuffles
    #[arg(long, default_value_t = 10_000)]
    pub shuffles: u64,
    /// Master seed; shuffle i derives its own generator from (seed, i)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long = "manager-fraction", default_value_t = 0.2)]
    pub manager_fraction: f64,
    #[arg(long = "p-mm", default_value_t = 0.4)]
    pub p_mm: f64,
    #[arg(long = "p-ms", default_value_t = 0.1)]
    pub p_ms: f64,
    #[arg(long = "p-ss", default_value_t = 0.05)]
    pub p_ss: f64,
    /// Mean events per directed edge when the source is a manager
    #[arg(long = "rate-m", default_value_t = 9.0)]
    pub rate_m: f64,
    /// Mean events per directed edge when the source is a subordinate
    #[arg(long = "rate-s", default_value_t = 3.0)]
    pub rate_s: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for edges.csv and labels.csv
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

impl SynthArgs {
    fn config(&self) -> SyntheticConfig {
        SyntheticConfig {
            n: self.n,
            manager_fraction: self.manager_fraction,
            p_mm: self.p_mm,
            p_ms: self.p_ms,
            p_ss: self.p_ss,
            event_rate_manager: self.rate_m,
            event_rate_subordinate: self.rate_s,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub fgm: FgmArgs,
    /// Output directory for model.json and train_trace.json
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PredictArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Trained model file
    #[arg(long)]
    pub model: PathBuf,
    /// Output directory for predictions.csv
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub fgm: FgmArgs,
    /// Stratified fold count
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Split seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Serialize)]
struct RunConfig<'a, T: Serialize> {
    subcommand: &'static str,
    #[serde(flatten)]
    args: &'a T,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze(args) => cmd_analyze(&args),
        Command::Nulltest(args) => cmd_nulltest(&args),
        Command::Synth(args) => cmd_synth(&args),
        Command::Train(args) => cmd_train(&args),
        Command::Predict(args) => cmd_predict(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
    }
}

/// Process exit code for an error: 2 for bad inputs, 3 for a blown clique
/// budget, 4 for model-file problems, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::BudgetExceeded(_) => 3,
        Error::Model(_) => 4,
        Error::EmptyGraph
        | Error::EmptyDataset(_)
        | Error::Format { .. }
        | Error::Io(_)
        | Error::Config(_)
        | Error::PartialLabels
        | Error::Shape(_) => 2,
        Error::Numerical(_) | Error::DegenerateTraining => 1,
    }
}

#[derive(Serialize)]
struct TopologyReport {
    full: TopologyStats,
    managers: Option<TopologyStats>,
    subordinates: Option<TopologyStats>,
}

#[derive(Serialize)]
struct ShReportJson {
    scorer: String,
    rho: f64,
    n_flagged: usize,
    p_manager_is_sh: f64,
    p_subordinate_is_sh: f64,
    nodes: Vec<ShNode>,
}

#[derive(Serialize)]
struct ShNode {
    node: String,
    status: Option<Status>,
    score: Option<f64>,
    flagged: bool,
}

fn group_topology(ds: &Dataset, status: Status) -> Option<TopologyStats> {
    let keep: Vec<bool> = (0..ds.graph.n())
        .map(|v| ds.labels.get(v) == Some(status))
        .collect();
    let (sub, _) = ds.graph.induced_subgraph(&keep);
    TopologyStats::compute(&sub).ok()
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let (ds, inputs) = args.input.load()?;
    let input_paths: Vec<&Path> = inputs.iter().map(|p| p.as_path()).collect();
    let hashes = input_hashes(&input_paths)?;
    let config = RunConfig {
        subcommand: "analyze",
        args,
    };

    let topology = TopologyReport {
        full: TopologyStats::compute(&ds.graph)?,
        managers: group_topology(&ds, Status::Manager),
        subordinates: group_topology(&ds, Status::Subordinate),
    };
    let sh = select_structural_holes(&ds.graph, &ds.labels, args.rho, &BurtScorer)?;
    let homophily = homophily_report(&ds.graph, &ds.labels, args.homophily_edges_only)?;
    let balance = socmetrics::balance_report(&ds.graph, &ds.labels);
    let cliques = clique_report(&ds.graph, &ds.labels, args.clique_budget)?;

    let mut out = OutputSet::new();
    let dir = &args.output.out;
    if args.output.format.json() {
        out.add_json(dir, "topology", &config, &hashes, &topology)?;
        let sh_json = ShReportJson {
            scorer: sh.scorer.clone(),
            rho: sh.rho,
            n_flagged: sh.n_flagged,
            p_manager_is_sh: sh.p_manager_is_sh,
            p_subordinate_is_sh: sh.p_subordinate_is_sh,
            nodes: (0..ds.graph.n())
                .map(|v| ShNode {
                    node: ds.node_keys[v].clone(),
                    status: ds.labels.get(v),
                    score: sh.scores[v],
                    flagged: sh.flagged[v],
                })
                .collect(),
        };
        out.add_json(dir, "structural_holes", &config, &hashes, &sh_json)?;
        out.add_json(dir, "homophily", &config, &hashes, &homophily)?;
        out.add_json(dir, "balance", &config, &hashes, &balance)?;
        out.add_json(dir, "cliques", &config, &hashes, &cliques)?;
    }
    if args.output.format.tsv() {
        let mut t = Table::new(&["scope", "nodes", "edges", "cc", "ac", "components"]);
        let mut push = |scope: &str, stats: Option<&TopologyStats>| {
            match stats {
                Some(s) => t.row(vec![
                    scope.to_string(),
                    s.nodes.to_string(),
                    s.edges.to_string(),
                    cell_f64(s.avg_clustering),
                    cell_opt(s.assortativity),
                    s.components.to_string(),
                ]),
                None => t.row(vec![
                    scope.to_string(),
                    "0".into(),
                    "0".into(),
                    "undefined".into(),
                    "undefined".into(),
                    "0".into(),
                ]),
            };
        };
        push("full", Some(&topology.full));
        push("managers", topology.managers.as_ref());
        push("subordinates", topology.subordinates.as_ref());
        out.add_tsv(dir, "topology", &config, &hashes, &t)?;

        let mut t = Table::new(&["metric", "value"]);
        t.row(vec!["scorer".into(), sh.scorer.clone()]);
        t.row(vec!["rho".into(), cell_f64(sh.rho)]);
        t.row(vec!["n_flagged".into(), sh.n_flagged.to_string()]);
        t.row(vec!["p_manager_is_sh".into(), cell_f64(sh.p_manager_is_sh)]);
        t.row(vec![
            "p_subordinate_is_sh".into(),
            cell_f64(sh.p_subordinate_is_sh),
        ]);
        out.add_tsv(dir, "structural_holes", &config, &hashes, &t)?;

        let mut t = Table::new(&["tie", "pairs", "mean_common_neighbors", "ci_halfwidth"]);
        for (name, tie) in [("MM", TieType::MM), ("MS", TieType::MS), ("SS", TieType::SS)] {
            match homophily.get(tie) {
                Some(s) => t.row(vec![
                    name.into(),
                    s.pairs.to_string(),
                    cell_f64(s.mean),
                    cell_opt(s.ci_halfwidth),
                ]),
                None => t.row(vec![
                    name.into(),
                    "0".into(),
                    "undefined".into(),
                    "undefined".into(),
                ]),
            };
        }
        out.add_tsv(dir, "homophily", &config, &hashes, &t)?;

        let mut t = Table::new(&["group", "ratio", "mean", "defined", "mean_odds"]);
        for (group_name, group) in [("M", &balance.manager), ("S", &balance.subordinate)] {
            for (ratio_name, mc, odds) in [
                ("m_sb", &group.m_sb, &group.m_sb_odds),
                ("s_sb", &group.s_sb, &group.s_sb_odds),
                ("sb", &group.sb, &group.sb_odds),
            ] {
                t.row(vec![
                    group_name.into(),
                    ratio_name.into(),
                    cell_opt(mc.mean),
                    mc.defined.to_string(),
                    cell_opt(odds.mean),
                ]);
            }
        }
        out.add_tsv(dir, "balance", &config, &hashes, &t)?;

        let mut t = Table::new(&["scope", "clique_size", "count"]);
        for (scope, dist) in [
            ("managers", &cliques.managers),
            ("subordinates", &cliques.subordinates),
            ("full", &cliques.full),
        ] {
            for (size, count) in &dist.histogram {
                t.row(vec![scope.into(), size.to_string(), count.to_string()]);
            }
            t.row(vec![scope.into(), "max".into(), dist.max_size.to_string()]);
        }
        out.add_tsv(dir, "cliques", &config, &hashes, &t)?;
    }
    let written = out.write_all()?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Row in the nulltest summary; failed statistics are reported, not hidden.
#[derive(Serialize)]
struct NulltestRow {
    statistic: String,
    outcome: Option<PermutationReport>,
    error: Option<String>,
}

fn cmd_nulltest(args: &NulltestArgs) -> Result<()> {
    let (ds, inputs) = args.input.load()?;
    if !ds.labels.fully_observed() {
        return Err(Error::PartialLabels);
    }
    let input_paths: Vec<&Path> = inputs.iter().map(|p| p.as_path()).collect();
    let hashes = input_hashes(&input_paths)?;
    let config = RunConfig {
        subcommand: "nulltest",
        args,
    };

    let mut rows = Vec::new();
    for stat in stat_library(args.rho) {
        match permutation_test(&ds.graph, &ds.labels, &stat, args.shuffles, args.seed) {
            Ok(report) => rows.push(NulltestRow {
                statistic: stat.name().to_string(),
                outcome: Some(report),
                error: None,
            }),
            Err(e @ Error::Numerical(_)) => rows.push(NulltestRow {
                statistic: stat.name().to_string(),
                outcome: None,
                error: Some(e.to_string()),
            }),
            Err(e) => return Err(e),
        }
    }

    let mut out = OutputSet::new();
    let dir = &args.output.out;
    if args.output.format.json() {
        out.add_json(dir, "nulltest", &config, &hashes, &rows)?;
        for row in &rows {
            if let Some(report) = &row.outcome {
                out.add_json(dir, &format!("null_{}", row.statistic), &config, &hashes, report)?;
            }
        }
    }
    if args.output.format.tsv() {
        let mut t = Table::new(&[
            "statistic",
            "observed",
            "null_mean",
            "null_std",
            "z",
            "p_value",
            "stars",
        ]);
        for row in &rows {
            match &row.outcome {
                Some(r) => t.row(vec![
                    row.statistic.clone(),
                    cell_f64(r.observed),
                    cell_f64(r.null_mean),
                    cell_f64(r.null_std),
                    cell_opt(r.z),
                    match r.p_value {
                        Some(p) => format!("{p:.6}"),
                        None => "undefined".into(),
                    },
                    significance_stars(r.p_value).to_string(),
                ]),
                None => t.row(vec![
                    row.statistic.clone(),
                    "undefined".into(),
                    "undefined".into(),
                    "undefined".into(),
                    "undefined".into(),
                    "undefined".into(),
                    String::new(),
                ]),
            };
        }
        out.add_tsv(dir, "nulltest", &config, &hashes, &t)?;
    }
    let written = out.write_all()?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let ds = ingest::generate_synthetic(&args.config())?;
    let mut edges_buf = Vec::new();
    let mut labels_buf = Vec::new();
    ingest::write_prepared_edgelist(&ds, &mut edges_buf, &mut labels_buf)?;

    let config = RunConfig {
        subcommand: "synth",
        args,
    };
    let mut out = OutputSet::new();
    out.add_json(&args.out, "synth", &config, &BTreeMap::new(), &args.config())?;
    crate::report::atomic_write(&args.out.join("edges.csv"), &edges_buf)?;
    crate::report::atomic_write(&args.out.join("labels.csv"), &labels_buf)?;
    let written = out.write_all()?;
    println!("wrote {}", args.out.join("edges.csv").display());
    println!("wrote {}", args.out.join("labels.csv").display());
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let (ds, inputs) = args.input.load()?;
    let input_paths: Vec<&Path> = inputs.iter().map(|p| p.as_path()).collect();
    let hashes = input_hashes(&input_paths)?;
    let config = RunConfig {
        subcommand: "train",
        args,
    };

    let (mut model, trace) =
        pipeline::train_model(&ds, &ds.labels, args.fgm.bins, &args.fgm.train_config())?;
    model.provenance = Some(serde_json::json!({
        "config": &config,
        "input_sha256": &hashes,
    }));

    let model_json = serde_json::to_string_pretty(&model)
        .map_err(|e| Error::Model(format!("serialize model: {e}")))?;
    crate::report::atomic_write(&args.out.join("model.json"), model_json.as_bytes())?;

    let mut out = OutputSet::new();
    out.add_json(&args.out, "train_trace", &config, &hashes, &trace)?;
    let written = out.write_all()?;
    println!("wrote {}", args.out.join("model.json").display());
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let (ds, mut inputs) = args.input.load()?;
    let model = ModelFile::load(&args.model)?;
    inputs.push(args.model.clone());
    let input_paths: Vec<&Path> = inputs.iter().map(|p| p.as_path()).collect();
    let hashes = input_hashes(&input_paths)?;
    let config = RunConfig {
        subcommand: "predict",
        args,
    };

    let prediction = pipeline::predict_with_model(&ds, &model, &ds.labels)?;
    let mut csv = String::from("node,status,confidence\n");
    for v in 0..ds.graph.n() {
        csv.push_str(&format!(
            "{},{},{:.6}\n",
            ds.node_keys[v],
            prediction.labels.get(v).unwrap().token(),
            prediction.confidence[v]
        ));
    }

    #[derive(Serialize)]
    struct PredictionJson {
        converged: bool,
        iterations: usize,
        rows: Vec<PredictionRow>,
    }
    #[derive(Serialize)]
    struct PredictionRow {
        node: String,
        status: Status,
        confidence: f64,
        clamped: bool,
    }
    let report = PredictionJson {
        converged: prediction.marginals.converged,
        iterations: prediction.marginals.iterations,
        rows: (0..ds.graph.n())
            .map(|v| PredictionRow {
                node: ds.node_keys[v].clone(),
                status: prediction.labels.get(v).unwrap(),
                confidence: prediction.confidence[v],
                clamped: ds.labels.get(v).is_some(),
            })
            .collect(),
    };

    let mut out = OutputSet::new();
    out.add_json(&args.out, "predictions", &config, &hashes, &report)?;
    crate::report::atomic_write(&args.out.join("predictions.csv"), csv.as_bytes())?;
    let written = out.write_all()?;
    println!("wrote {}", args.out.join("predictions.csv").display());
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let (ds, inputs) = args.input.load()?;
    let input_paths: Vec<&Path> = inputs.iter().map(|p| p.as_path()).collect();
    let hashes = input_hashes(&input_paths)?;
    let config = RunConfig {
        subcommand: "evaluate",
        args,
    };

    let cv = pipeline::CvConfig {
        k: args.folds,
        seed: args.seed,
        n_bins: args.fgm.bins,
        train: args.fgm.train_config(),
        logistic: LogisticConfig::default(),
    };
    let scores = pipeline::cross_validate(&ds, &cv)?;

    let mut out = OutputSet::new();
    let dir = &args.output.out;
    if args.output.format.json() {
        out.add_json(dir, "eval", &config, &hashes, &scores)?;
    }
    if args.output.format.tsv() {
        let mut t = Table::new(&["Method", "Precision", "Recall", "F1", "Accuracy"]);
        for method in &scores {
            t.row(vec![
                method.method.clone(),
                cell_f64(method.mean.precision),
                cell_f64(method.mean.recall),
                cell_f64(method.mean.f1),
                cell_f64(method.mean.accuracy),
            ]);
        }
        out.add_tsv(dir, "eval", &config, &hashes, &t)?;
    }
    let written = out.write_all()?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
