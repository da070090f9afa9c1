//! Enterprise communication network analysis and social status inference.
//!
//! The library builds undirected communication graphs from event logs,
//! computes status-correlated structural metrics (structural holes, link
//! homophily, ego-network balance, maximal cliques), tests their significance
//! with a label-shuffling null model, and infers per-node status with a
//! triangle-factor graphical model trained by gradient ascent and decoded via
//! loopy belief propagation, benchmarked against independent-instance
//! classifiers.
//!
//! The `statusnet` binary exposes the batch pipeline; see the crate README
//! for the subcommands and file formats.

pub mod baselines;
pub mod cli;
pub mod error;
pub mod features;
pub mod fgm;
pub mod graph;
pub mod ingest;
pub mod nullmodel;
pub mod pipeline;
pub mod report;
pub mod socmetrics;

pub use error::{Error, Result};
pub use graph::{CommGraph, NodeId, Status, StatusLabels, TopologyStats};
pub use ingest::{Channel, Dataset, EventRecord, SyntheticConfig, TimeUnit};
