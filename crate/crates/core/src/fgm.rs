//! Factor graph model over binary status variables: unary indicator factors
//! per node and one correlation factor per closed triangle, trained by
//! gradient ascent on the log-likelihood and decoded through marginals.
//!
//! Inference runs either by exhaustive enumeration (small graphs, also the
//! oracle path for the likelihood) or by loopy belief propagation in
//! log-space with a synchronous, damped schedule.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Discretizer, FeatureMatrix};
use crate::graph::{CommGraph, NodeId, Status, StatusLabels};

/// Largest node count for which enumeration-based inference is attempted.
pub const EXACT_ENUMERATION_MAX_N: usize = 20;

/// Hard ceiling: beyond this the enumeration state space is unrepresentable.
const ENUMERATION_HARD_CAP: usize = 25;

/// Factor graph: one binary variable per node, unary potentials from the
/// indicator feature matrix, and a shared 4-weight potential on every closed
/// triangle.
#[derive(Debug, Clone)]
pub struct FactorGraph {
    n: usize,
    k: usize,
    x: Vec<Vec<f64>>,
    triangles: Vec<[NodeId; 3]>,
    incident: Vec<Vec<usize>>,
}

impl FactorGraph {
    /// Assembles a factor graph from explicit parts. Triangles must be
    /// canonical (`u < v < w`), in range, and unique.
    pub fn from_parts(x: Vec<Vec<f64>>, triangles: Vec<[NodeId; 3]>) -> Result<FactorGraph> {
        let n = x.len();
        let k = x.first().map(|r| r.len()).unwrap_or(0);
        for (v, row) in x.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Shape(format!(
                    "feature row {v} has {} columns, expected {k}",
                    row.len()
                )));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut incident = vec![Vec::new(); n];
        for (c, t) in triangles.iter().enumerate() {
            if !(t[0] < t[1] && t[1] < t[2]) {
                return Err(Error::Shape(format!("triangle {t:?} is not canonical")));
            }
            if t[2] >= n {
                return Err(Error::Shape(format!("triangle {t:?} out of range")));
            }
            if !seen.insert(*t) {
                return Err(Error::Shape(format!("duplicate triangle {t:?}")));
            }
            for &v in t {
                incident[v].push(c);
            }
        }
        Ok(FactorGraph {
            n,
            k,
            x,
            triangles,
            incident,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of raw indicator features per node.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn triangles(&self) -> &[[NodeId; 3]] {
        &self.triangles
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.x
    }
}

/// All closed triangles of the graph, each once, canonical `u < v < w`.
pub fn enumerate_triangles(g: &CommGraph) -> Vec<[NodeId; 3]> {
    let mut triangles = Vec::new();
    for (u, v) in g.edges() {
        // Common neighbors above v close a canonical triangle.
        let (a, b) = (g.neighbors(u), g.neighbors(v));
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    if a[i] > v {
                        triangles.push([u, v, a[i]]);
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
    }
    triangles.sort_unstable();
    triangles
}

/// Builds the factor graph for a communication graph and its feature matrix.
pub fn build_factor_graph(g: &CommGraph, features: &FeatureMatrix) -> Result<FactorGraph> {
    if features.rows() != g.n() {
        return Err(Error::Shape(format!(
            "feature matrix has {} rows for {} nodes",
            features.rows(),
            g.n()
        )));
    }
    FactorGraph::from_parts(features.x.clone(), enumerate_triangles(g))
}

/// Model weights: two per feature column (one per state) plus four shared
/// triangle weights indexed by the subordinate count of the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub node_weights: Vec<f64>,
    pub triangle_weights: [f64; 4],
    pub l2_lambda: f64,
}

impl Theta {
    pub fn zeros(k: usize, l2_lambda: f64) -> Theta {
        Theta {
            node_weights: vec![0.0; 2 * k],
            triangle_weights: [0.0; 4],
            l2_lambda,
        }
    }

    pub fn dim(&self) -> usize {
        self.node_weights.len() + 4
    }

    fn is_finite(&self) -> bool {
        self.node_weights.iter().all(|w| w.is_finite())
            && self.triangle_weights.iter().all(|w| w.is_finite())
            && self.l2_lambda.is_finite()
    }

    fn squared_norm(&self) -> f64 {
        self.node_weights.iter().map(|w| w * w).sum::<f64>()
            + self.triangle_weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Flattened view `[node_weights..., triangle_weights...]` matching the
    /// gradient layout.
    pub fn as_vec(&self) -> Vec<f64> {
        let mut v = self.node_weights.clone();
        v.extend_from_slice(&self.triangle_weights);
        v
    }

    pub fn add_scaled(&mut self, direction: &[f64], scale: f64) {
        let nw = self.node_weights.len();
        for (i, w) in self.node_weights.iter_mut().enumerate() {
            *w += scale * direction[i];
        }
        for (i, w) in self.triangle_weights.iter_mut().enumerate() {
            *w += scale * direction[nw + i];
        }
    }
}

fn unary_log_potentials(fg: &FactorGraph, theta: &Theta) -> Vec<[f64; 2]> {
    fg.x.iter()
        .map(|row| {
            let mut pot = [0.0f64; 2];
            for (k, &x) in row.iter().enumerate() {
                if x != 0.0 {
                    pot[0] += x * theta.node_weights[2 * k];
                    pot[1] += x * theta.node_weights[2 * k + 1];
                }
            }
            pot
        })
        .collect()
}

/// Triangle log-potential table, indexed by the 3-bit configuration
/// `(y_u << 2) | (y_v << 1) | y_w` with Manager = 0 and Subordinate = 1.
fn triangle_log_potentials(theta: &Theta) -> [f64; 8] {
    let mut pot = [0.0f64; 8];
    for (cfg, p) in pot.iter_mut().enumerate() {
        *p = theta.triangle_weights[cfg.count_ones() as usize];
    }
    pot
}

fn log_sum_exp2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn log_normalize2(m: [f64; 2]) -> [f64; 2] {
    let lse = log_sum_exp2(m[0], m[1]);
    [m[0] - lse, m[1] - lse]
}

/// Approximate (or, on factor trees, exact) marginals from message passing.
#[derive(Debug, Clone, Serialize)]
pub struct Marginals {
    /// Per node, distribution over (Manager, Subordinate).
    pub node_beliefs: Vec<[f64; 2]>,
    /// Per triangle, distribution over the 8 joint configurations.
    pub triangle_beliefs: Vec<[f64; 8]>,
    pub converged: bool,
    pub iterations: usize,
    pub max_residual: f64,
}

/// Loopy belief propagation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbpConfig {
    pub max_iters: usize,
    pub damping: f64,
    pub tol: f64,
}

impl Default for LbpConfig {
    fn default() -> Self {
        LbpConfig {
            max_iters: 100,
            damping: 0.5,
            tol: 1e-6,
        }
    }
}

impl LbpConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::Config("damping must lie in [0,1)".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("tol must be positive".into()));
        }
        Ok(())
    }
}

fn clamp_states(fg: &FactorGraph, clamped: &StatusLabels) -> Result<Vec<Option<usize>>> {
    if clamped.len() != fg.n() {
        return Err(Error::Shape(format!(
            "clamp vector has {} entries for {} nodes",
            clamped.len(),
            fg.n()
        )));
    }
    Ok(clamped.as_slice().iter().map(|s| s.map(Status::index)).collect())
}

/// Message state of a belief propagation run. Reusing it across calls warm
/// starts the next run from the previous fixed point, which keeps gradient
/// ascent tracking one fixed-point branch as the weights move.
#[derive(Debug, Clone)]
pub struct LbpState {
    fac_to_var: Vec<[f64; 2]>,
}

impl LbpState {
    pub fn new(fg: &FactorGraph) -> LbpState {
        LbpState {
            fac_to_var: vec![[0.0; 2]; 3 * fg.triangles.len()],
        }
    }
}

/// Sum-product message passing in log-space. The schedule is synchronous
/// within each phase (all variable messages, then all factor messages), with
/// factor messages damped. Clamped variables emit delta messages and keep
/// delta beliefs.
pub fn lbp_marginals(
    fg: &FactorGraph,
    theta: &Theta,
    clamped: &StatusLabels,
    cfg: &LbpConfig,
) -> Result<Marginals> {
    let mut state = LbpState::new(fg);
    lbp_marginals_resumed(fg, theta, clamped, cfg, &mut state)
}

/// [`lbp_marginals`] continuing from (and updating) an explicit message state.
pub fn lbp_marginals_resumed(
    fg: &FactorGraph,
    theta: &Theta,
    clamped: &StatusLabels,
    cfg: &LbpConfig,
    state: &mut LbpState,
) -> Result<Marginals> {
    cfg.validate()?;
    if !theta.is_finite() {
        return Err(Error::Numerical("theta contains non-finite weights".into()));
    }
    let clamp = clamp_states(fg, clamped)?;
    let unary = unary_log_potentials(fg, theta);
    let tri_pot = triangle_log_potentials(theta);
    let t = fg.triangles.len();
    if state.fac_to_var.len() != 3 * t {
        return Err(Error::Shape(format!(
            "message state holds {} messages for {} triangles",
            state.fac_to_var.len(),
            t
        )));
    }

    // Indexed 3c + p for triangle c, position p.
    let mut fac_to_var: Vec<[f64; 2]> = std::mem::take(&mut state.fac_to_var);
    let mut var_to_fac: Vec<[f64; 2]> = vec![[0.0; 2]; 3 * t];
    let mut iterations = 0;
    let mut max_residual = 0.0f64;
    let mut converged = t == 0;

    // Sum of unary potential and all incoming factor messages per node.
    let belief_sums = |fac_to_var: &Vec<[f64; 2]>| -> Vec<[f64; 2]> {
        (0..fg.n)
            .map(|v| {
                let mut s = unary[v];
                for &c in &fg.incident[v] {
                    let p = fg.triangles[c].iter().position(|&w| w == v).unwrap();
                    let m = fac_to_var[3 * c + p];
                    s[0] += m[0];
                    s[1] += m[1];
                }
                s
            })
            .collect()
    };

    for iter in 1..=cfg.max_iters {
        iterations = iter;
        let sums = belief_sums(&fac_to_var);
        // Phase 1: variable -> factor.
        var_to_fac = (0..3 * t)
            .into_par_iter()
            .map(|idx| {
                let (c, p) = (idx / 3, idx % 3);
                let v = fg.triangles[c][p];
                match clamp[v] {
                    Some(s) => {
                        let mut m = [f64::NEG_INFINITY; 2];
                        m[s] = 0.0;
                        m
                    }
                    None => {
                        let m = fac_to_var[idx];
                        log_normalize2([sums[v][0] - m[0], sums[v][1] - m[1]])
                    }
                }
            })
            .collect();
        // Phase 2: factor -> variable, damped.
        let new_fac: Vec<[f64; 2]> = (0..3 * t)
            .into_par_iter()
            .map(|idx| {
                let (c, p) = (idx / 3, idx % 3);
                let (pa, pb) = match p {
                    0 => (1, 2),
                    1 => (0, 2),
                    _ => (0, 1),
                };
                let ma = var_to_fac[3 * c + pa];
                let mb = var_to_fac[3 * c + pb];
                let mut out = [f64::NEG_INFINITY; 2];
                for (y, slot) in out.iter_mut().enumerate() {
                    let mut acc = f64::NEG_INFINITY;
                    for (ya, &wa) in ma.iter().enumerate() {
                        for (yb, &wb) in mb.iter().enumerate() {
                            let mut cfg_bits = [0usize; 3];
                            cfg_bits[p] = y;
                            cfg_bits[pa] = ya;
                            cfg_bits[pb] = yb;
                            let cfg_idx =
                                (cfg_bits[0] << 2) | (cfg_bits[1] << 1) | cfg_bits[2];
                            acc = log_sum_exp2(acc, tri_pot[cfg_idx] + wa + wb);
                        }
                    }
                    *slot = acc;
                }
                let out = log_normalize2(out);
                let old = fac_to_var[idx];
                [
                    (1.0 - cfg.damping) * out[0] + cfg.damping * old[0],
                    (1.0 - cfg.damping) * out[1] + cfg.damping * old[1],
                ]
            })
            .collect();

        let mut residual = 0.0f64;
        for (c, (new, old)) in new_fac.iter().zip(&fac_to_var).enumerate() {
            for y in 0..2 {
                if new[y].is_nan() {
                    return Err(Error::Numerical(format!(
                        "NaN message from triangle factor {} ({:?})",
                        c / 3,
                        fg.triangles[c / 3]
                    )));
                }
                residual = residual.max((new[y] - old[y]).abs());
            }
        }
        fac_to_var = new_fac;
        max_residual = residual;
        if residual < cfg.tol {
            converged = true;
            break;
        }
    }

    // Final beliefs from the settled messages.
    let sums = belief_sums(&fac_to_var);
    let node_beliefs: Vec<[f64; 2]> = (0..fg.n)
        .map(|v| match clamp[v] {
            Some(s) => {
                let mut b = [0.0; 2];
                b[s] = 1.0;
                b
            }
            None => {
                let ln = log_normalize2(sums[v]);
                [ln[0].exp(), ln[1].exp()]
            }
        })
        .collect();

    // Variable -> factor messages consistent with the final factor messages.
    let final_var_to_fac: Vec<[f64; 2]> = (0..3 * t)
        .map(|idx| {
            let (c, p) = (idx / 3, idx % 3);
            let v = fg.triangles[c][p];
            match clamp[v] {
                Some(s) => {
                    let mut m = [f64::NEG_INFINITY; 2];
                    m[s] = 0.0;
                    m
                }
                None => {
                    let m = fac_to_var[idx];
                    log_normalize2([sums[v][0] - m[0], sums[v][1] - m[1]])
                }
            }
        })
        .collect();
    let triangle_beliefs: Vec<[f64; 8]> = (0..t)
        .map(|c| {
            let mut logs = [0.0f64; 8];
            let mut mx = f64::NEG_INFINITY;
            for (cfg_idx, l) in logs.iter_mut().enumerate() {
                let states = [cfg_idx >> 2 & 1, cfg_idx >> 1 & 1, cfg_idx & 1];
                let mut acc = tri_pot[cfg_idx];
                for (p, &y) in states.iter().enumerate() {
                    acc += final_var_to_fac[3 * c + p][y];
                }
                *l = acc;
                mx = mx.max(acc);
            }
            let total: f64 = logs.iter().map(|l| (l - mx).exp()).sum();
            let mut b = [0.0f64; 8];
            for (i, l) in logs.iter().enumerate() {
                b[i] = (l - mx).exp() / total;
            }
            b
        })
        .collect();
    let _ = var_to_fac;
    state.fac_to_var = fac_to_var;

    Ok(Marginals {
        node_beliefs,
        triangle_beliefs,
        converged,
        iterations,
        max_residual,
    })
}

/// Log-potential score of one full assignment.
fn assignment_score(
    unary: &[[f64; 2]],
    tri_pot: &[f64; 8],
    triangles: &[[NodeId; 3]],
    states: &[usize],
) -> f64 {
    let mut score = 0.0;
    for (v, &y) in states.iter().enumerate() {
        score += unary[v][y];
    }
    for t in triangles {
        let cfg = (states[t[0]] << 2) | (states[t[1]] << 1) | states[t[2]];
        score += tri_pot[cfg];
    }
    score
}

/// Exact marginals and log partition function by enumeration over the free
/// variables. Only feasible for small graphs.
pub fn exact_posterior(
    fg: &FactorGraph,
    theta: &Theta,
    clamped: &StatusLabels,
) -> Result<(Marginals, f64)> {
    if !theta.is_finite() {
        return Err(Error::Numerical("theta contains non-finite weights".into()));
    }
    let clamp = clamp_states(fg, clamped)?;
    let free: Vec<NodeId> = (0..fg.n).filter(|&v| clamp[v].is_none()).collect();
    if free.len() > ENUMERATION_HARD_CAP {
        return Err(Error::Config(format!(
            "{} free variables is beyond exact enumeration",
            free.len()
        )));
    }
    let unary = unary_log_potentials(fg, theta);
    let tri_pot = triangle_log_potentials(theta);

    let mut states: Vec<usize> = clamp.iter().map(|c| c.unwrap_or(0)).collect();
    let total = 1usize << free.len();
    let mut scores = Vec::with_capacity(total);
    let mut max_score = f64::NEG_INFINITY;
    for mask in 0..total {
        for (bit, &v) in free.iter().enumerate() {
            states[v] = mask >> bit & 1;
        }
        let s = assignment_score(&unary, &tri_pot, &fg.triangles, &states);
        max_score = max_score.max(s);
        scores.push(s);
    }
    let log_z = max_score + scores.iter().map(|s| (s - max_score).exp()).sum::<f64>().ln();

    let mut node_beliefs = vec![[0.0f64; 2]; fg.n];
    let mut triangle_beliefs = vec![[0.0f64; 8]; fg.triangles.len()];
    for (mask, score) in scores.iter().enumerate() {
        for (bit, &v) in free.iter().enumerate() {
            states[v] = mask >> bit & 1;
        }
        let p = (score - log_z).exp();
        for (v, &y) in states.iter().enumerate() {
            node_beliefs[v][y] += p;
        }
        for (c, t) in fg.triangles.iter().enumerate() {
            let cfg = (states[t[0]] << 2) | (states[t[1]] << 1) | states[t[2]];
            triangle_beliefs[c][cfg] += p;
        }
    }

    Ok((
        Marginals {
            node_beliefs,
            triangle_beliefs,
            converged: true,
            iterations: 0,
            max_residual: 0.0,
        },
        log_z,
    ))
}

/// Bethe approximation of the log partition function from LBP beliefs.
fn bethe_log_z(fg: &FactorGraph, theta: &Theta, marginals: &Marginals) -> f64 {
    let unary = unary_log_potentials(fg, theta);
    let tri_pot = triangle_log_potentials(theta);
    let xlnx = |p: f64| if p > 0.0 { p * p.ln() } else { 0.0 };

    let mut log_z = 0.0;
    for (c, b) in marginals.triangle_beliefs.iter().enumerate() {
        for (cfg, &p) in b.iter().enumerate() {
            if p > 0.0 {
                log_z += p * tri_pot[cfg] - xlnx(p);
            }
        }
        let _ = c;
    }
    for (v, b) in marginals.node_beliefs.iter().enumerate() {
        let degree = fg.incident[v].len() as f64;
        for (y, &p) in b.iter().enumerate() {
            log_z += p * unary[v][y] + (degree - 1.0) * xlnx(p);
        }
    }
    log_z
}

/// Inference backend selection for likelihood, gradient, and training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Inference {
    Exact,
    Lbp,
    /// Enumerate exactly up to `exact_max_n` nodes, otherwise run LBP.
    Auto { exact_max_n: usize },
}

impl Default for Inference {
    fn default() -> Self {
        Inference::Auto {
            exact_max_n: EXACT_ENUMERATION_MAX_N,
        }
    }
}

/// Marginals plus the (exact or Bethe) log partition function.
fn posterior(
    fg: &FactorGraph,
    theta: &Theta,
    clamped: &StatusLabels,
    inference: Inference,
    lbp: &LbpConfig,
) -> Result<(Marginals, f64)> {
    let use_exact = match inference {
        Inference::Exact => true,
        Inference::Lbp => false,
        Inference::Auto { exact_max_n } => fg.n <= exact_max_n,
    };
    if use_exact {
        exact_posterior(fg, theta, clamped)
    } else {
        let marginals = lbp_marginals(fg, theta, clamped, lbp)?;
        let log_z = bethe_log_z(fg, theta, &marginals);
        Ok((marginals, log_z))
    }
}

/// Log-likelihood of a fully observed assignment, minus the L2 penalty.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Likelihood {
    pub value: f64,
    /// True when the partition function came from exact enumeration rather
    /// than the Bethe approximation.
    pub exact: bool,
}

pub fn log_likelihood(fg: &FactorGraph, theta: &Theta, labels: &StatusLabels) -> Result<Likelihood> {
    if !theta.is_finite() {
        return Err(Error::Numerical("theta contains non-finite weights".into()));
    }
    if labels.len() != fg.n() {
        return Err(Error::Shape(format!(
            "labels have {} entries for {} nodes",
            labels.len(),
            fg.n()
        )));
    }
    if !labels.fully_observed() {
        return Err(Error::PartialLabels);
    }
    let unary = unary_log_potentials(fg, theta);
    let tri_pot = triangle_log_potentials(theta);
    let states: Vec<usize> = labels.as_slice().iter().map(|s| s.unwrap().index()).collect();
    let score = assignment_score(&unary, &tri_pot, &fg.triangles, &states);

    let free = StatusLabels::unlabeled(fg.n());
    let (log_z, exact) = if fg.n <= EXACT_ENUMERATION_MAX_N {
        let (_, log_z) = exact_posterior(fg, theta, &free)?;
        (log_z, true)
    } else {
        let marginals = lbp_marginals(fg, theta, &free, &LbpConfig::default())?;
        (bethe_log_z(fg, theta, &marginals), false)
    };
    Ok(Likelihood {
        value: score - log_z - 0.5 * theta.l2_lambda * theta.squared_norm(),
        exact,
    })
}

/// Expected feature counts under a set of marginals, laid out as
/// `[node_weights..., triangle_weights...]`.
fn feature_expectations(fg: &FactorGraph, marginals: &Marginals) -> Vec<f64> {
    let mut e = vec![0.0f64; 2 * fg.k + 4];
    for (v, row) in fg.x.iter().enumerate() {
        let b = marginals.node_beliefs[v];
        for (k, &x) in row.iter().enumerate() {
            if x != 0.0 {
                e[2 * k] += x * b[0];
                e[2 * k + 1] += x * b[1];
            }
        }
    }
    for b in &marginals.triangle_beliefs {
        for (cfg, &p) in b.iter().enumerate() {
            e[2 * fg.k + cfg.count_ones() as usize] += p;
        }
    }
    e
}

/// Gradient of the log-likelihood: data-pass expectations (training labels
/// clamped) minus model-pass expectations (free), minus the L2 term. On fully
/// labeled inputs the data pass reduces to the empirical feature counts, so
/// this matches finite differences of [`log_likelihood`].
pub fn gradient(
    fg: &FactorGraph,
    theta: &Theta,
    train_labels: &StatusLabels,
    inference: Inference,
    lbp: &LbpConfig,
) -> Result<Vec<f64>> {
    if train_labels.labeled_count() == 0 {
        return Err(Error::Config("gradient needs at least one labeled node".into()));
    }
    let (data, _) = posterior(fg, theta, train_labels, inference, lbp)?;
    let free = StatusLabels::unlabeled(fg.n());
    let (model, _) = posterior(fg, theta, &free, inference, lbp)?;
    let e_data = feature_expectations(fg, &data);
    let e_model = feature_expectations(fg, &model);
    let theta_vec = theta.as_vec();
    Ok((0..theta.dim())
        .map(|i| e_data[i] - e_model[i] - theta.l2_lambda * theta_vec[i])
        .collect())
}

/// Gradient-ascent settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub eta: f64,
    pub max_epochs: usize,
    pub grad_tol: f64,
    pub lambda: f64,
    pub lbp: LbpConfig,
    pub inference: Inference,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta: 0.05,
            max_epochs: 500,
            grad_tol: 1e-4,
            lambda: 0.01,
            lbp: LbpConfig::default(),
            inference: Inference::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainEpoch {
    pub epoch: usize,
    pub objective: f64,
    pub grad_inf_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainTrace {
    pub epochs: Vec<TrainEpoch>,
    pub converged: bool,
}

/// Trains theta by gradient ascent. The ascended objective is the clamped-
/// minus-free log partition difference, normalized per labeled node so the
/// step size stays scale-free, minus the L2 penalty.
pub fn train(
    fg: &FactorGraph,
    train_labels: &StatusLabels,
    cfg: &TrainConfig,
) -> Result<(Theta, TrainTrace)> {
    if !(cfg.eta > 0.0) {
        return Err(Error::Config("eta must be positive".into()));
    }
    let labeled = train_labels.labeled_count();
    if labeled == 0 {
        return Err(Error::Config("training needs at least one labeled node".into()));
    }
    let m = labeled as f64;
    let use_exact = match cfg.inference {
        Inference::Exact => true,
        Inference::Lbp => false,
        Inference::Auto { exact_max_n } => fg.n <= exact_max_n,
    };
    let mut theta = Theta::zeros(fg.k(), cfg.lambda);
    let mut trace = TrainTrace {
        epochs: Vec::new(),
        converged: false,
    };
    // Warm-started message states keep successive epochs on one fixed-point
    // branch of the approximate inference.
    let mut data_state = LbpState::new(fg);
    let mut model_state = LbpState::new(fg);
    let free = StatusLabels::unlabeled(fg.n());
    for epoch in 0..cfg.max_epochs {
        let (data, log_z_data, model, log_z_model) = if use_exact {
            let (data, log_z_data) = exact_posterior(fg, &theta, train_labels)?;
            let (model, log_z_model) = exact_posterior(fg, &theta, &free)?;
            (data, log_z_data, model, log_z_model)
        } else {
            let data =
                lbp_marginals_resumed(fg, &theta, train_labels, &cfg.lbp, &mut data_state)?;
            let log_z_data = bethe_log_z(fg, &theta, &data);
            let model = lbp_marginals_resumed(fg, &theta, &free, &cfg.lbp, &mut model_state)?;
            let log_z_model = bethe_log_z(fg, &theta, &model);
            (data, log_z_data, model, log_z_model)
        };
        let objective =
            (log_z_data - log_z_model) / m - 0.5 * cfg.lambda * theta.squared_norm();
        if !objective.is_finite() {
            return Err(Error::Numerical(format!(
                "objective became non-finite at epoch {epoch}"
            )));
        }
        let e_data = feature_expectations(fg, &data);
        let e_model = feature_expectations(fg, &model);
        let theta_vec = theta.as_vec();
        let step: Vec<f64> = (0..theta.dim())
            .map(|i| (e_data[i] - e_model[i]) / m - cfg.lambda * theta_vec[i])
            .collect();
        let grad_inf_norm = step.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        trace.epochs.push(TrainEpoch {
            epoch,
            objective,
            grad_inf_norm,
        });
        if grad_inf_norm < cfg.grad_tol {
            trace.converged = true;
            break;
        }
        theta.add_scaled(&step, cfg.eta);
    }
    Ok((theta, trace))
}

/// Transductive decoding: training labels stay clamped, every unlabeled node
/// takes the argmax of its marginal belief. Near-exact ties (|p - 0.5| below
/// 1e-12) break to Subordinate, the majority class.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub labels: StatusLabels,
    pub confidence: Vec<f64>,
    pub marginals: Marginals,
}

pub fn predict(
    fg: &FactorGraph,
    theta: &Theta,
    train_labels: &StatusLabels,
    lbp: &LbpConfig,
) -> Result<Prediction> {
    let marginals = lbp_marginals(fg, theta, train_labels, lbp)?;
    let mut labels = Vec::with_capacity(fg.n());
    let mut confidence = Vec::with_capacity(fg.n());
    for v in 0..fg.n() {
        match train_labels.get(v) {
            Some(s) => {
                labels.push(Some(s));
                confidence.push(1.0);
            }
            None => {
                let p_manager = marginals.node_beliefs[v][0];
                let status = if (p_manager - 0.5).abs() < 1e-12 {
                    Status::Subordinate
                } else if p_manager > 0.5 {
                    Status::Manager
                } else {
                    Status::Subordinate
                };
                labels.push(Some(status));
                confidence.push(marginals.node_beliefs[v][status.index()]);
            }
        }
    }
    Ok(Prediction {
        labels: StatusLabels::new(labels),
        confidence,
        marginals,
    })
}

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Serialized model: weights, feature metadata, and inference settings.
/// Reloads bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub discretizer: Discretizer,
    pub feature_names: Vec<String>,
    pub theta: Theta,
    pub lbp: LbpConfig,
    /// Run configuration and input hashes recorded by the CLI.
    #[serde(default)]
    pub provenance: Option<serde_json::Value>,
}

impl ModelFile {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Model(format!("serialize: {e}")))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ModelFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Model(format!("{}: {e}", path.display())))?;
        let model: ModelFile = serde_json::from_str(&text)
            .map_err(|e| Error::Model(format!("{}: {e}", path.display())))?;
        if model.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::Model(format!(
                "schema version {} does not match supported version {}",
                model.schema_version, MODEL_SCHEMA_VERSION
            )));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn complete(n: usize) -> CommGraph {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                edges.push((u, v));
            }
        }
        CommGraph::new(n, edges).unwrap()
    }

    fn labels_of(tokens: &str) -> StatusLabels {
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

    fn identity_features(n: usize) -> FeatureMatrix {
        // One always-on indicator column.
        FeatureMatrix {
            x: vec![vec![1.0]; n],
            feature_names: vec!["bias".into()],
            bin_edges: vec![vec![]],
        }
    }

    fn random_fg(rng: &mut ChaCha8Rng, n: usize, k: usize, p_edge: f64) -> (FactorGraph, Theta) {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.random_bool(p_edge) {
                    edges.push((u, v));
                }
            }
        }
        let g = CommGraph::new(n, edges).unwrap();
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| f64::from(rng.random_bool(0.5))).collect())
            .collect();
        let fg = FactorGraph::from_parts(x, enumerate_triangles(&g)).unwrap();
        let mut theta = Theta::zeros(k, 0.01);
        for w in theta.node_weights.iter_mut() {
            *w = rng.random_range(-1.0..1.0);
        }
        for w in theta.triangle_weights.iter_mut() {
            *w = rng.random_range(-1.0..1.0);
        }
        (fg, theta)
    }

    // Independent enumeration oracle: recomputes potentials from first
    // principles instead of reusing the library's scoring helpers.
    fn oracle_enumerate(
        fg: &FactorGraph,
        theta: &Theta,
        clamp: &StatusLabels,
    ) -> (Vec<[f64; 2]>, Vec<[f64; 8]>, f64) {
        let n = fg.n();
        let mut weights = Vec::new();
        let mut configs = Vec::new();
        for mask in 0..(1usize << n) {
            let states: Vec<usize> = (0..n).map(|v| mask >> v & 1).collect();
            let ok = (0..n).all(|v| match clamp.get(v) {
                Some(s) => states[v] == s.index(),
                None => true,
            });
            if !ok {
                continue;
            }
            let mut log_w = 0.0;
            for v in 0..n {
                for (k, &x) in fg.features()[v].iter().enumerate() {
                    log_w += x * theta.node_weights[2 * k + states[v]];
                }
            }
            for t in fg.triangles() {
                let subs = states[t[0]] + states[t[1]] + states[t[2]];
                log_w += theta.triangle_weights[subs];
            }
            weights.push(log_w.exp());
            configs.push(states);
        }
        let z: f64 = weights.iter().sum();
        let mut node = vec![[0.0f64; 2]; n];
        let mut tri = vec![[0.0f64; 8]; fg.triangles().len()];
        for (w, states) in weights.iter().zip(&configs) {
            for v in 0..n {
                node[v][states[v]] += w / z;
            }
            for (c, t) in fg.triangles().iter().enumerate() {
                let cfg = (states[t[0]] << 2) | (states[t[1]] << 1) | states[t[2]];
                tri[c][cfg] += w / z;
            }
        }
        (node, tri, z.ln())
    }

    #[test]
    fn triangle_counts() {
        let path = CommGraph::new(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        assert!(enumerate_triangles(&path).is_empty());
        assert_eq!(enumerate_triangles(&complete(3)), vec![[0, 1, 2]]);
        assert_eq!(enumerate_triangles(&complete(4)).len(), 4);
    }

    #[test]
    fn triangle_enumeration_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let n = rng.random_range(1..=50);
            let mut edges = Vec::new();
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.random_bool(0.15) {
                        edges.push((u, v));
                    }
                }
            }
            let g = CommGraph::new(n, edges).unwrap();
            let mut oracle = Vec::new();
            for u in 0..n {
                for v in (u + 1)..n {
                    for w in (v + 1)..n {
                        if g.has_edge(u, v) && g.has_edge(u, w) && g.has_edge(v, w) {
                            oracle.push([u, v, w]);
                        }
                    }
                }
            }
            assert_eq!(enumerate_triangles(&g), oracle);
        }
    }

    #[test]
    fn log_likelihood_uniform_model() {
        for n in [1, 3, 7] {
            let g = complete(n);
            let fg = build_factor_graph(&g, &identity_features(n)).unwrap();
            let theta = Theta::zeros(1, 0.0);
            let labels = StatusLabels::new(vec![Some(Status::Manager); n]);
            let ll = log_likelihood(&fg, &theta, &labels).unwrap();
            assert!(ll.exact);
            assert!(
                (ll.value + n as f64 * std::f64::consts::LN_2).abs() < 1e-12,
                "n={n}: {}",
                ll.value
            );
        }
    }

    #[test]
    fn log_likelihood_single_node_closed_form() {
        let g = CommGraph::new(1, []).unwrap();
        let fg = build_factor_graph(&g, &identity_features(1)).unwrap();
        let w = 0.7;
        let theta = Theta {
            node_weights: vec![w, 0.0],
            triangle_weights: [0.0; 4],
            l2_lambda: 0.0,
        };
        let ll = log_likelihood(&fg, &theta, &labels_of("M")).unwrap();
        let expected = w - (w.exp() + 1.0).ln();
        assert!((ll.value - expected).abs() < 1e-12);
    }

    #[test]
    fn log_likelihood_matches_independent_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (fg, theta) = random_fg(&mut rng, 5, 2, 0.7);
        let labels = labels_of("MSMSS");
        let ll = log_likelihood(&fg, &theta, &labels).unwrap();
        let (_, _, log_z) = oracle_enumerate(&fg, &theta, &StatusLabels::unlabeled(5));
        let states: Vec<usize> = labels.as_slice().iter().map(|s| s.unwrap().index()).collect();
        let unary = unary_log_potentials(&fg, &theta);
        let tri = triangle_log_potentials(&theta);
        let score = assignment_score(&unary, &tri, fg.triangles(), &states);
        let expected = score - log_z - 0.5 * theta.l2_lambda * theta.squared_norm();
        assert!((ll.value - expected).abs() < 1e-9);
    }

    #[test]
    fn lbp_unary_only_is_exact_in_one_iteration() {
        let g = CommGraph::new(3, [(0, 1)]).unwrap();
        let fg = build_factor_graph(&g, &identity_features(3)).unwrap();
        let theta = Theta {
            node_weights: vec![0.4, -0.3],
            triangle_weights: [0.0; 4],
            l2_lambda: 0.0,
        };
        let marg = lbp_marginals(&fg, &theta, &StatusLabels::unlabeled(3), &LbpConfig::default())
            .unwrap();
        assert!(marg.converged);
        assert_eq!(marg.iterations, 1);
        let p0 = (0.4f64).exp() / ((0.4f64).exp() + (-0.3f64).exp());
        for b in &marg.node_beliefs {
            assert!((b[0] - p0).abs() < 1e-12);
            assert!((b[0] + b[1] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn lbp_exact_on_acyclic_factor_graphs() {
        // Two triangles sharing a single variable form a factor tree.
        let g = CommGraph::new(
            5,
            [(0, 1), (0, 2), (1, 2), (2, 3), (2, 4), (3, 4)],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<Vec<f64>> = (0..5)
            .map(|_| vec![f64::from(rng.random_bool(0.5)), 1.0])
            .collect();
        let fg = FactorGraph::from_parts(x, enumerate_triangles(&g)).unwrap();
        assert_eq!(fg.triangles().len(), 2);
        let mut theta = Theta::zeros(2, 0.0);
        for w in theta.node_weights.iter_mut() {
            *w = rng.random_range(-1.0..1.0);
        }
        theta.triangle_weights = [0.8, -0.2, 0.1, -0.5];
        let cfg = LbpConfig {
            max_iters: 500,
            damping: 0.5,
            tol: 1e-12,
        };
        let marg = lbp_marginals(&fg, &theta, &StatusLabels::unlabeled(5), &cfg).unwrap();
        assert!(marg.converged);
        let (node, tri, _) = oracle_enumerate(&fg, &theta, &StatusLabels::unlabeled(5));
        for (b, e) in marg.node_beliefs.iter().zip(&node) {
            assert!((b[0] - e[0]).abs() < 1e-9, "{b:?} vs {e:?}");
        }
        for (b, e) in marg.triangle_beliefs.iter().zip(&tri) {
            for cfg_idx in 0..8 {
                assert!((b[cfg_idx] - e[cfg_idx]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn triangle_weight_bias_shifts_beliefs() {
        let g = complete(3);
        let fg = build_factor_graph(&g, &identity_features(3)).unwrap();
        let neutral = Theta::zeros(1, 0.0);
        let mut favor_managers = Theta::zeros(1, 0.0);
        favor_managers.triangle_weights = [1.5, 0.0, 0.0, 0.0];

        let cfg = LbpConfig {
            max_iters: 500,
            damping: 0.5,
            tol: 1e-10,
        };
        let free = StatusLabels::unlabeled(3);
        let base = lbp_marginals(&fg, &neutral, &free, &cfg).unwrap();
        let biased = lbp_marginals(&fg, &favor_managers, &free, &cfg).unwrap();
        for v in 0..3 {
            assert!(biased.node_beliefs[v][0] > base.node_beliefs[v][0]);
        }
        let (node, _, _) = oracle_enumerate(&fg, &favor_managers, &free);
        for v in 0..3 {
            assert!((biased.node_beliefs[v][0] - node[v][0]).abs() < 1e-6);
        }
    }

    #[test]
    fn lbp_beliefs_normalize_and_stay_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let (fg, theta) = random_fg(&mut rng, 8, 2, 0.5);
        let cfg = LbpConfig {
            max_iters: 1000,
            damping: 0.5,
            tol: 1e-10,
        };
        let marg = lbp_marginals(&fg, &theta, &StatusLabels::unlabeled(8), &cfg).unwrap();
        for b in &marg.node_beliefs {
            assert!((b[0] + b[1] - 1.0).abs() < 1e-9);
        }
        for b in &marg.triangle_beliefs {
            assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        if marg.converged {
            // Node belief equals the marginalized belief of incident triangles.
            for (c, t) in fg.triangles().iter().enumerate() {
                for (p, &v) in t.iter().enumerate() {
                    let mut from_tri = [0.0f64; 2];
                    for cfg_idx in 0..8 {
                        let y = cfg_idx >> (2 - p) & 1;
                        from_tri[y] += marg.triangle_beliefs[c][cfg_idx];
                    }
                    for y in 0..2 {
                        assert!(
                            (from_tri[y] - marg.node_beliefs[v][y]).abs() < 1e-5,
                            "triangle {c} position {p}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn beliefs_invariant_to_potential_translation() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (fg, theta) = random_fg(&mut rng, 6, 1, 0.6);
        let mut shifted = theta.clone();
        for w in shifted.triangle_weights.iter_mut() {
            *w += 3.7;
        }
        // The always-present feature columns shift both states equally.
        let cfg = LbpConfig {
            max_iters: 800,
            damping: 0.5,
            tol: 1e-11,
        };
        let free = StatusLabels::unlabeled(6);
        let a = lbp_marginals(&fg, &theta, &free, &cfg).unwrap();
        let b = lbp_marginals(&fg, &shifted, &free, &cfg).unwrap();
        for (ba, bb) in a.node_beliefs.iter().zip(&b.node_beliefs) {
            assert!((ba[0] - bb[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for trial in 0..10 {
            let n = rng.random_range(2..=8);
            let (fg, theta) = random_fg(&mut rng, n, 2, 0.6);
            let labels = StatusLabels::new(
                (0..n)
                    .map(|_| {
                        Some(if rng.random_bool(0.5) {
                            Status::Manager
                        } else {
                            Status::Subordinate
                        })
                    })
                    .collect(),
            );
            let grad =
                gradient(&fg, &theta, &labels, Inference::Exact, &LbpConfig::default()).unwrap();
            let h = 1e-5;
            for i in 0..theta.dim() {
                let mut up = theta.clone();
                let mut down = theta.clone();
                let mut dir = vec![0.0; theta.dim()];
                dir[i] = 1.0;
                up.add_scaled(&dir, h);
                down.add_scaled(&dir, -h);
                let f_up = log_likelihood(&fg, &up, &labels).unwrap().value;
                let f_down = log_likelihood(&fg, &down, &labels).unwrap().value;
                let fd = (f_up - f_down) / (2.0 * h);
                let denom = fd.abs().max(1.0);
                assert!(
                    (grad[i] - fd).abs() / denom < 1e-4,
                    "trial {trial} param {i}: grad {} vs fd {fd}",
                    grad[i]
                );
            }
        }
    }

    #[test]
    fn gradient_cancels_under_label_symmetry() {
        let g = CommGraph::new(2, []).unwrap();
        let fg = build_factor_graph(&g, &identity_features(2)).unwrap();
        let theta = Theta::zeros(1, 0.0);
        let labels = labels_of("MS");
        let grad =
            gradient(&fg, &theta, &labels, Inference::Exact, &LbpConfig::default()).unwrap();
        for g in grad {
            assert!(g.abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_vanishes_at_trained_optimum() {
        // Acyclic fixture (triangle plus pendant) so LBP agrees with
        // enumeration; train tightly, then check the raw gradient.
        let g = CommGraph::new(4, [(0, 1), (0, 2), (1, 2), (2, 3)]).unwrap();
        let mut x = identity_features(4);
        x.x[0] = vec![1.0];
        let fg = build_factor_graph(&g, &x).unwrap();
        let labels = labels_of("MMSS");
        let cfg = TrainConfig {
            eta: 0.5,
            max_epochs: 20_000,
            grad_tol: 1e-9,
            lambda: 0.05,
            inference: Inference::Exact,
            ..TrainConfig::default()
        };
        let (theta, trace) = train(&fg, &labels, &cfg).unwrap();
        assert!(trace.converged, "training did not converge");
        // Training normalizes by the number of labeled nodes; undo that.
        let grad =
            gradient(&fg, &theta, &labels, Inference::Exact, &LbpConfig::default()).unwrap();
        let theta_vec = theta.as_vec();
        let m = 4.0;
        for i in 0..theta.dim() {
            let expect_minus_model = grad[i] + theta.l2_lambda * theta_vec[i];
            let step = expect_minus_model / m - theta.l2_lambda * theta_vec[i];
            assert!(step.abs() < 1e-6, "param {i}: step gradient {step}");
        }
    }

    #[test]
    fn train_is_inert_without_features_or_triangles() {
        let g = CommGraph::new(3, [(0, 1), (1, 2)]).unwrap();
        let fm = FeatureMatrix {
            x: vec![vec![]; 3],
            feature_names: vec![],
            bin_edges: vec![],
        };
        let fg = build_factor_graph(&g, &fm).unwrap();
        let (theta, trace) = train(&fg, &labels_of("MSS"), &TrainConfig::default()).unwrap();
        assert!(trace.converged);
        assert!(theta.node_weights.is_empty());
        assert_eq!(theta.triangle_weights, [0.0; 4]);
    }

    #[test]
    fn train_single_node_reaches_confident_optimum() {
        let g = CommGraph::new(1, []).unwrap();
        let fg = build_factor_graph(&g, &identity_features(1)).unwrap();
        let cfg = TrainConfig {
            eta: 0.5,
            max_epochs: 10_000,
            grad_tol: 1e-8,
            lambda: 0.01,
            inference: Inference::Exact,
            ..TrainConfig::default()
        };
        let (theta, _) = train(&fg, &labels_of("M"), &cfg).unwrap();
        let (marg, _) = exact_posterior(&fg, &theta, &StatusLabels::unlabeled(1)).unwrap();
        assert!(marg.node_beliefs[0][0] > 0.95, "P(M) = {}", marg.node_beliefs[0][0]);
    }

    #[test]
    fn predict_follows_strong_unary_and_keeps_clamps() {
        let g = CommGraph::new(2, [(0, 1)]).unwrap();
        let fg = build_factor_graph(&g, &identity_features(2)).unwrap();
        let theta = Theta {
            node_weights: vec![3.0, -3.0],
            triangle_weights: [0.0; 4],
            l2_lambda: 0.0,
        };
        let train_labels = StatusLabels::new(vec![Some(Status::Subordinate), None]);
        let pred = predict(&fg, &theta, &train_labels, &LbpConfig::default()).unwrap();
        assert_eq!(pred.labels.get(0), Some(Status::Subordinate));
        assert_eq!(pred.confidence[0], 1.0);
        assert_eq!(pred.labels.get(1), Some(Status::Manager));
        assert!(pred.confidence[1] > 0.9);

        // Fully clamped graphs echo the clamps.
        let full = labels_of("SM");
        let pred = predict(&fg, &theta, &full, &LbpConfig::default()).unwrap();
        assert_eq!(pred.labels, full);
    }

    #[test]
    fn predict_matches_conditional_enumeration() {
        let g = complete(3);
        let fg = build_factor_graph(&g, &identity_features(3)).unwrap();
        let mut theta = Theta::zeros(1, 0.0);
        theta.triangle_weights = [0.9, -0.4, 0.2, 0.6];
        theta.node_weights = vec![0.3, -0.1];
        let clamp = StatusLabels::new(vec![Some(Status::Manager), None, None]);
        let cfg = LbpConfig {
            max_iters: 500,
            damping: 0.5,
            tol: 1e-12,
        };
        let pred = predict(&fg, &theta, &clamp, &cfg).unwrap();
        let (node, _, _) = oracle_enumerate(&fg, &theta, &clamp);
        for v in 1..3 {
            let expected = if node[v][0] > 0.5 {
                Status::Manager
            } else {
                Status::Subordinate
            };
            assert_eq!(pred.labels.get(v), Some(expected), "node {v}");
            assert!((pred.marginals.node_beliefs[v][0] - node[v][0]).abs() < 1e-6);
        }
    }

    #[test]
    fn predictions_invariant_under_reindexing() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let (fg, theta) = random_fg(&mut rng, 7, 2, 0.5);
        let train_labels = StatusLabels::new(vec![
            Some(Status::Manager),
            None,
            Some(Status::Subordinate),
            None,
            None,
            Some(Status::Subordinate),
            None,
        ]);
        let cfg = LbpConfig {
            max_iters: 500,
            damping: 0.5,
            tol: 1e-10,
        };
        let base = predict(&fg, &theta, &train_labels, &cfg).unwrap();

        // Reverse the node order.
        let n = fg.n();
        let pi = |v: usize| n - 1 - v;
        let x: Vec<Vec<f64>> = (0..n).map(|v| fg.features()[pi(v)].clone()).collect();
        let mut triangles: Vec<[usize; 3]> = fg
            .triangles()
            .iter()
            .map(|t| {
                let mut m = [pi(t[0]), pi(t[1]), pi(t[2])];
                m.sort_unstable();
                m
            })
            .collect();
        triangles.sort_unstable();
        let fg2 = FactorGraph::from_parts(x, triangles).unwrap();
        let labels2 = StatusLabels::new((0..n).map(|v| train_labels.get(pi(v))).collect());
        let moved = predict(&fg2, &theta, &labels2, &cfg).unwrap();
        for v in 0..n {
            assert_eq!(base.labels.get(v), moved.labels.get(pi(v)));
            assert!(
                (base.marginals.node_beliefs[v][0] - moved.marginals.node_beliefs[pi(v)][0])
                    .abs()
                    < 1e-9
            );
        }
    }

    #[test]
    fn model_file_roundtrips_bit_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let theta = Theta {
            node_weights: (0..6).map(|_| rng.random_range(-2.0..2.0)).collect(),
            triangle_weights: [
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ],
            l2_lambda: 0.01,
        };
        let model = ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            discretizer: Discretizer {
                raw_names: vec!["a".into()],
                bin_edges: vec![vec![0.3333333333333333, 1.7]],
            },
            feature_names: vec!["a[bin0]".into(), "a[bin1]".into(), "a[bin2]".into()],
            theta,
            lbp: LbpConfig::default(),
            provenance: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save(&path).unwrap();
        let back = ModelFile::load(&path).unwrap();
        assert_eq!(back, model);
        for (a, b) in back
            .theta
            .node_weights
            .iter()
            .zip(&model.theta.node_weights)
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn model_file_rejects_unknown_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        std::fs::write(&path, "{\"schema_version\": 999}").unwrap();
        assert!(matches!(ModelFile::load(&path), Err(Error::Model(_))));
        std::fs::write(&path, "not json").unwrap();
        assert!(matches!(ModelFile::load(&path), Err(Error::Model(_))));
    }
}
