//! Independent-instance baselines (Gaussian naive Bayes, L2-regularized
//! logistic regression) and the evaluation harness: stratified folds and
//! class-weighted precision/recall/F1/accuracy.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Status, StatusLabels};

const VARIANCE_FLOOR: f64 = 1e-9;

/// Gaussian naive Bayes over raw continuous attributes, one Gaussian per
/// class per attribute with a floored variance.
#[derive(Debug, Clone)]
pub struct GaussianNb {
    log_prior: [f64; 2],
    mean: [Vec<f64>; 2],
    var: [Vec<f64>; 2],
}

impl GaussianNb {
    pub fn train(rows: &[Vec<f64>], labels: &[Status]) -> Result<GaussianNb> {
        if rows.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} rows vs {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let d = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut count = [0usize; 2];
        let mut sum = [vec![0.0; d], vec![0.0; d]];
        for (row, label) in rows.iter().zip(labels) {
            let c = label.index();
            count[c] += 1;
            for (j, &x) in row.iter().enumerate() {
                sum[c][j] += x;
            }
        }
        if count[0] == 0 || count[1] == 0 {
            return Err(Error::DegenerateTraining);
        }
        let mean = [
            sum[0].iter().map(|s| s / count[0] as f64).collect::<Vec<_>>(),
            sum[1].iter().map(|s| s / count[1] as f64).collect::<Vec<_>>(),
        ];
        let mut var = [vec![0.0; d], vec![0.0; d]];
        for (row, label) in rows.iter().zip(labels) {
            let c = label.index();
            for (j, &x) in row.iter().enumerate() {
                let diff = x - mean[c][j];
                var[c][j] += diff * diff;
            }
        }
        for c in 0..2 {
            for v in var[c].iter_mut() {
                *v = (*v / count[c] as f64).max(VARIANCE_FLOOR);
            }
        }
        let total = (count[0] + count[1]) as f64;
        Ok(GaussianNb {
            log_prior: [
                (count[0] as f64 / total).ln(),
                (count[1] as f64 / total).ln(),
            ],
            mean,
            var,
        })
    }

    /// Log joint score per class.
    pub fn scores(&self, row: &[f64]) -> [f64; 2] {
        let mut out = self.log_prior;
        for c in 0..2 {
            for (j, &x) in row.iter().enumerate() {
                let diff = x - self.mean[c][j];
                out[c] -=
                    0.5 * (diff * diff / self.var[c][j] + (2.0 * std::f64::consts::PI * self.var[c][j]).ln());
            }
        }
        out
    }

    pub fn predict(&self, row: &[f64]) -> Status {
        let s = self.scores(row);
        if s[0] > s[1] {
            Status::Manager
        } else {
            Status::Subordinate
        }
    }
}

/// Settings for the logistic baseline.
#[derive(Debug, Clone, Copy)]
pub struct LogisticConfig {
    pub eta: f64,
    pub max_epochs: usize,
    pub lambda: f64,
    pub grad_tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            eta: 0.1,
            max_epochs: 1000,
            lambda: 0.01,
            grad_tol: 1e-6,
        }
    }
}

/// L2-regularized logistic regression trained by full-batch gradient ascent
/// on the mean log-likelihood. The intercept is not penalized.
#[derive(Debug, Clone)]
pub struct LogisticRegression {
    pub weights: Vec<f64>,
    pub bias: f64,
    lambda: f64,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl LogisticRegression {
    pub fn train(rows: &[Vec<f64>], labels: &[Status], cfg: &LogisticConfig) -> Result<LogisticRegression> {
        if rows.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} rows vs {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let n_m = labels.iter().filter(|s| **s == Status::Manager).count();
        if n_m == 0 || n_m == labels.len() {
            return Err(Error::DegenerateTraining);
        }
        let d = rows.first().map(|r| r.len()).unwrap_or(0);
        let n = rows.len() as f64;
        let targets: Vec<f64> = labels
            .iter()
            .map(|s| if *s == Status::Manager { 1.0 } else { 0.0 })
            .collect();

        let mut model = LogisticRegression {
            weights: vec![0.0; d],
            bias: 0.0,
            lambda: cfg.lambda,
        };
        for _epoch in 0..cfg.max_epochs {
            let loss = model.objective(rows, &targets);
            if !loss.is_finite() {
                return Err(Error::Numerical("logistic objective became non-finite".into()));
            }
            let mut grad_w = vec![0.0; d];
            let mut grad_b = 0.0;
            for (row, &t) in rows.iter().zip(&targets) {
                let p = sigmoid(model.margin(row));
                let delta = t - p;
                for (j, &x) in row.iter().enumerate() {
                    grad_w[j] += x * delta;
                }
                grad_b += delta;
            }
            let mut inf_norm: f64 = 0.0;
            for (j, g) in grad_w.iter_mut().enumerate() {
                *g = *g / n - cfg.lambda * model.weights[j];
                inf_norm = inf_norm.max(g.abs());
            }
            grad_b /= n;
            inf_norm = inf_norm.max(grad_b.abs());
            if inf_norm < cfg.grad_tol {
                break;
            }
            for (w, g) in model.weights.iter_mut().zip(&grad_w) {
                *w += cfg.eta * g;
            }
            model.bias += cfg.eta * grad_b;
        }
        Ok(model)
    }

    fn margin(&self, row: &[f64]) -> f64 {
        self.bias
            + self
                .weights
                .iter()
                .zip(row)
                .map(|(w, x)| w * x)
                .sum::<f64>()
    }

    /// Penalized mean log-likelihood (the quantity being ascended).
    pub fn objective(&self, rows: &[Vec<f64>], targets: &[f64]) -> f64 {
        let n = rows.len() as f64;
        let mut ll = 0.0;
        for (row, &t) in rows.iter().zip(targets) {
            let m = self.margin(row);
            // log sigmoid in a stable form
            let log_p = -((-m).exp()).ln_1p();
            let log_q = -(m.exp()).ln_1p();
            ll += t * log_p + (1.0 - t) * log_q;
        }
        ll / n - 0.5 * self.lambda * self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    pub fn probability_manager(&self, row: &[f64]) -> f64 {
        sigmoid(self.margin(row))
    }

    /// Decision threshold 0.5; the boundary itself falls to the majority
    /// class (Subordinate).
    pub fn predict(&self, row: &[f64]) -> Status {
        if self.probability_manager(row) > 0.5 {
            Status::Manager
        } else {
            Status::Subordinate
        }
    }
}

/// Fold assignment over labeled nodes.
#[derive(Debug, Clone, Serialize)]
pub struct SplitPlan {
    pub k: usize,
    pub seed: u64,
    /// Fold id per node; `None` for unlabeled nodes.
    pub fold_of: Vec<Option<usize>>,
}

impl SplitPlan {
    pub fn fold_nodes(&self, fold: usize) -> Vec<usize> {
        self.fold_of
            .iter()
            .enumerate()
            .filter_map(|(v, f)| (*f == Some(fold)).then_some(v))
            .collect()
    }
}

/// Deterministic stratified k-fold split: each class is shuffled with the
/// seeded generator and dealt round-robin through a shared fold cursor, so
/// per-fold class counts stay within one node of the global ratio. `k` equal
/// to the labeled count (leave-one-out) is allowed as a boundary case.
pub fn stratified_kfold(labels: &StatusLabels, k: usize, seed: u64) -> Result<SplitPlan> {
    let n_labeled = labels.labeled_count();
    if k < 2 {
        return Err(Error::Config("fold count must be at least 2".into()));
    }
    if k > n_labeled {
        return Err(Error::Config(format!(
            "fold count {k} exceeds {n_labeled} labeled nodes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![None; labels.len()];
    let mut cursor = 0usize;
    for status in [Status::Manager, Status::Subordinate] {
        let mut members: Vec<usize> = labels
            .labeled_nodes()
            .filter(|&v| labels.get(v) == Some(status))
            .collect();
        if !members.is_empty() && members.len() < k && k < n_labeled {
            return Err(Error::Config(format!(
                "class {} has {} members, fewer than {k} folds",
                status.token(),
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for v in members {
            fold_of[v] = Some(cursor % k);
            cursor += 1;
        }
    }
    Ok(SplitPlan { k, seed, fold_of })
}

/// Class-weighted evaluation report. Weighted recall equals accuracy whenever
/// every node receives a prediction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// `confusion[true][predicted]` with Manager = 0, Subordinate = 1.
    pub confusion: [[u64; 2]; 2],
}

pub fn evaluate(truth: &[Status], predicted: &[Status]) -> Result<EvalReport> {
    if truth.len() != predicted.len() {
        return Err(Error::Shape(format!(
            "{} true labels vs {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Shape("cannot evaluate zero predictions".into()));
    }
    let mut confusion = [[0u64; 2]; 2];
    for (t, p) in truth.iter().zip(predicted) {
        confusion[t.index()][p.index()] += 1;
    }
    let total: u64 = truth.len() as u64;
    let mut precision = 0.0;
    let mut recall = 0.0;
    let mut f1 = 0.0;
    for c in 0..2 {
        let support = confusion[c][0] + confusion[c][1];
        if support == 0 {
            continue;
        }
        let weight = support as f64 / total as f64;
        let tp = confusion[c][c];
        let predicted_c = confusion[0][c] + confusion[1][c];
        let p = if predicted_c > 0 {
            tp as f64 / predicted_c as f64
        } else {
            0.0
        };
        let r = tp as f64 / support as f64;
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        precision += weight * p;
        recall += weight * r;
        f1 += weight * f;
    }
    let accuracy = (confusion[0][0] + confusion[1][1]) as f64 / total as f64;
    Ok(EvalReport {
        precision,
        recall,
        f1,
        accuracy,
        confusion,
    })
}

/// Arithmetic mean of per-fold metrics.
#[derive(Debug, Clone, Serialize)]
pub struct MeanMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

pub fn mean_metrics(folds: &[EvalReport]) -> MeanMetrics {
    let n = folds.len().max(1) as f64;
    MeanMetrics {
        precision: folds.iter().map(|f| f.precision).sum::<f64>() / n,
        recall: folds.iter().map(|f| f.recall).sum::<f64>() / n,
        f1: folds.iter().map(|f| f.f1).sum::<f64>() / n,
        accuracy: folds.iter().map(|f| f.accuracy).sum::<f64>() / n,
    }
}
