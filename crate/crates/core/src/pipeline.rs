//! Shared experiment protocol: raw feature assembly, the train/predict path
//! used by the CLI, and stratified cross-validation scoring every method
//! through one evaluation route.

use serde::Serialize;

use crate::baselines::{
    evaluate, mean_metrics, stratified_kfold, EvalReport, GaussianNb, LogisticConfig,
    LogisticRegression, MeanMetrics,
};
use crate::error::{Error, Result};
use crate::features::{self, Discretizer, FeatureMatrix};
use crate::fgm::{self, ModelFile, TrainConfig, MODEL_SCHEMA_VERSION};
use crate::graph::{Status, StatusLabels};
use crate::ingest::Dataset;

/// Raw per-node design matrix: the four communication attributes, the five
/// social features, and definedness indicators for the two social entries
/// that can be undefined. Column order is fixed and versioned through the
/// model file.
pub fn raw_feature_matrix(ds: &Dataset) -> (Vec<Vec<f64>>, Vec<String>) {
    let mut names: Vec<String> = features::COMM_ATTRIBUTE_NAMES
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend(features::SOCIAL_FEATURE_NAMES.iter().map(|s| s.to_string()));
    names.push("hole_score_defined".to_string());
    names.push("balance_sb_defined".to_string());

    let rows = (0..ds.graph.n())
        .map(|v| {
            let mut row = Vec::with_capacity(names.len());
            row.extend_from_slice(&ds.attributes[v].as_array());
            let (social, defined) = features::social_features_with_flags(&ds.graph, v);
            row.extend_from_slice(&social);
            row.push(f64::from(defined[0]));
            row.push(f64::from(defined[1]));
            row
        })
        .collect();
    (rows, names)
}

/// Raw communication attributes only (the naive Bayes input).
pub fn comm_attribute_matrix(ds: &Dataset) -> Vec<Vec<f64>> {
    ds.attributes.iter().map(|a| a.as_array().to_vec()).collect()
}

/// Fits the discretizer on the labeled training rows and trains the factor
/// graph model with those labels clamped.
pub fn train_model(
    ds: &Dataset,
    train_labels: &StatusLabels,
    n_bins: usize,
    cfg: &TrainConfig,
) -> Result<(ModelFile, fgm::TrainTrace)> {
    let (raw, names) = raw_feature_matrix(ds);
    let train_rows: Vec<usize> = train_labels.labeled_nodes().collect();
    if train_rows.is_empty() {
        return Err(Error::Config("training needs labeled nodes".into()));
    }
    let discretizer = Discretizer::fit(&raw, &train_rows, &names, n_bins)?;
    let matrix = discretizer.transform(&raw)?;
    let fg = fgm::build_factor_graph(&ds.graph, &matrix)?;
    let (theta, trace) = fgm::train(&fg, train_labels, cfg)?;
    Ok((
        ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            discretizer,
            feature_names: matrix.feature_names,
            theta,
            lbp: cfg.lbp,
            provenance: None,
        },
        trace,
    ))
}

/// Rebuilds the feature matrix with the model's stored bin edges and decodes
/// the unlabeled nodes with training labels clamped.
pub fn predict_with_model(
    ds: &Dataset,
    model: &ModelFile,
    train_labels: &StatusLabels,
) -> Result<fgm::Prediction> {
    let (raw, names) = raw_feature_matrix(ds);
    if names != model.discretizer.raw_names {
        return Err(Error::Model(format!(
            "model was fitted on raw attributes [{}], this build produces [{}]",
            model.discretizer.raw_names.join(", "),
            names.join(", ")
        )));
    }
    let matrix = model.discretizer.transform(&raw)?;
    if matrix.feature_names != model.feature_names {
        return Err(Error::Model("model feature layout does not match".into()));
    }
    let fg = fgm::build_factor_graph(&ds.graph, &matrix)?;
    fgm::predict(&fg, &model.theta, train_labels, &model.lbp)
}

fn feature_matrix_for_fold(
    raw: &[Vec<f64>],
    names: &[String],
    train_rows: &[usize],
    n_bins: usize,
) -> Result<FeatureMatrix> {
    let discretizer = Discretizer::fit(raw, train_rows, names, n_bins)?;
    discretizer.transform(raw)
}

/// Cross-validated scores for one method.
#[derive(Debug, Clone, Serialize)]
pub struct MethodScores {
    pub method: String,
    pub folds: Vec<EvalReport>,
    pub mean: MeanMetrics,
}

/// Protocol settings for [`cross_validate`].
#[derive(Debug, Clone)]
pub struct CvConfig {
    pub k: usize,
    pub seed: u64,
    pub n_bins: usize,
    pub train: TrainConfig,
    pub logistic: LogisticConfig,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k: 5,
            seed: 0,
            n_bins: 4,
            train: TrainConfig::default(),
            logistic: LogisticConfig::default(),
        }
    }
}

/// Stratified k-fold cross-validation of the three methods. Every method is
/// scored through the identical [`evaluate`] path on identical splits: NB on
/// raw communication attributes, the logistic baseline and the factor graph
/// model on the discretized feature matrix (bin edges fitted per fold on the
/// training rows only).
pub fn cross_validate(ds: &Dataset, cfg: &CvConfig) -> Result<Vec<MethodScores>> {
    let labels = &ds.labels;
    let plan = stratified_kfold(labels, cfg.k, cfg.seed)?;
    let (raw, names) = raw_feature_matrix(ds);
    let comm = comm_attribute_matrix(ds);

    let mut nb_folds = Vec::with_capacity(cfg.k);
    let mut lrc_folds = Vec::with_capacity(cfg.k);
    let mut fgm_folds = Vec::with_capacity(cfg.k);

    for fold in 0..cfg.k {
        let test_nodes = plan.fold_nodes(fold);
        let train_nodes: Vec<usize> = labels
            .labeled_nodes()
            .filter(|v| plan.fold_of[*v] != Some(fold))
            .collect();
        let truth: Vec<Status> = test_nodes.iter().map(|&v| labels.get(v).unwrap()).collect();

        // Naive Bayes on raw communication attributes.
        let nb_rows: Vec<Vec<f64>> = train_nodes.iter().map(|&v| comm[v].clone()).collect();
        let nb_labels: Vec<Status> = train_nodes.iter().map(|&v| labels.get(v).unwrap()).collect();
        let nb = GaussianNb::train(&nb_rows, &nb_labels)?;
        let nb_pred: Vec<Status> = test_nodes.iter().map(|&v| nb.predict(&comm[v])).collect();
        nb_folds.push(evaluate(&truth, &nb_pred)?);

        // Shared discretized features for the logistic baseline and the model.
        let matrix = feature_matrix_for_fold(&raw, &names, &train_nodes, cfg.n_bins)?;
        let lrc_rows: Vec<Vec<f64>> = train_nodes.iter().map(|&v| matrix.x[v].clone()).collect();
        let lrc = LogisticRegression::train(&lrc_rows, &nb_labels, &cfg.logistic)?;
        let lrc_pred: Vec<Status> = test_nodes
            .iter()
            .map(|&v| lrc.predict(&matrix.x[v]))
            .collect();
        lrc_folds.push(evaluate(&truth, &lrc_pred)?);

        // Factor graph model, transductive: fold labels hidden, rest clamped.
        let mut fold_labels = labels.clone();
        for &v in &test_nodes {
            fold_labels.set(v, None);
        }
        let fg = fgm::build_factor_graph(&ds.graph, &matrix)?;
        let (theta, _) = fgm::train(&fg, &fold_labels, &cfg.train)?;
        let prediction = fgm::predict(&fg, &theta, &fold_labels, &cfg.train.lbp)?;
        let fgm_pred: Vec<Status> = test_nodes
            .iter()
            .map(|&v| prediction.labels.get(v).unwrap())
            .collect();
        fgm_folds.push(evaluate(&truth, &fgm_pred)?);
    }

    Ok(vec![
        MethodScores {
            method: "NB".to_string(),
            mean: mean_metrics(&nb_folds),
            folds: nb_folds,
        },
        MethodScores {
            method: "LRC".to_string(),
            mean: mean_metrics(&lrc_folds),
            folds: lrc_folds,
        },
        MethodScores {
            method: "FGM".to_string(),
            mean: mean_metrics(&fgm_folds),
            folds: fgm_folds,
        },
    ])
}
