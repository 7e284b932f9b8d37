use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{carve_validation, fold_seed, stratified_kfold, FoldPlan};
use super::metrics::{accuracy, macro_f1};
use super::report::{EvalReport, FoldResult, Timing};
use crate::baseline::{
    default_rank, project, randomized_svd, softmax_regression_train, zscore_columns, SoftmaxConfig, SoftmaxRegression,
    SvdProjection, DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gcn::{normalize_adjacency, predict, train, GcnModel, TrainConfig, TrainResult};
use crate::latent_graph::{
    edge_retention, similarity_matrix, theta_grid, threshold_graph, LatentGraph, SimilarityMatrix, DEFAULT_QUANTILES,
};
use crate::scalar::Scalar;

const STREAM_CARVE: u64 = 1;
const STREAM_TRAIN: u64 = 2;
const STREAM_SVD: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Gcn,
    SvdLr,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Gcn => "gcn",
            Method::SvdLr => "svd-lr",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gcn" => Ok(Method::Gcn),
            "svd-lr" | "svd_lr" | "svdlr" => Ok(Method::SvdLr),
            other => Err(Error::InvalidParameter(format!(
                "unknown method `{other}` (gcn, svd-lr)"
            ))),
        }
    }
}

/// How the similarity threshold is chosen in each fold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "lowercase")]
pub enum ThetaMode {
    /// Candidates are quantiles of the positive similarities.
    Auto,
    Fixed(f64),
    /// Explicit candidate thresholds.
    List(Vec<f64>),
}

impl FromStr for ThetaMode {
    type Err = Error;

    /// `auto`, `fixed:<θ>`, a bare `<θ>`, or `list:<θ>,<θ>,...`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidParameter(format!("cannot parse theta `{s}` (auto, fixed:<v>, list:<v>,<v>...)"));
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
        if s.eq_ignore_ascii_case("auto") {
            Ok(ThetaMode::Auto)
        } else if let Some(v) = s.strip_prefix("fixed:") {
            Ok(ThetaMode::Fixed(num(v)?))
        } else if let Some(v) = s.strip_prefix("list:") {
            Ok(ThetaMode::List(v.split(',').map(num).collect::<Result<_>>()?))
        } else {
            Ok(ThetaMode::Fixed(num(s)?))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvdConfig {
    /// `None` picks `min(64, N−1, D)`.
    pub rank: Option<usize>,
    pub oversample: usize,
    pub power_iters: usize,
}

impl Default for SvdConfig {
    fn default() -> Self {
        Self {
            rank: None,
            oversample: DEFAULT_OVERSAMPLE,
            power_iters: DEFAULT_POWER_ITERS,
        }
    }
}

/// Cross-validation settings. `train.seed` is ignored: every fold trains
/// with a seed derived from `seed` and the fold id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub method: Method,
    pub k: usize,
    pub seed: u64,
    pub theta: ThetaMode,
    pub quantiles: Vec<f64>,
    pub val_fraction: f64,
    /// Require every class to have at least `k` members.
    pub strict: bool,
    pub train: TrainConfig,
    pub svd: SvdConfig,
    pub softmax: SoftmaxConfig,
    /// Worker threads for folds; results do not depend on it.
    #[serde(skip)]
    pub jobs: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            method: Method::Gcn,
            k: 10,
            seed: 0,
            theta: ThetaMode::Auto,
            quantiles: DEFAULT_QUANTILES.to_vec(),
            val_fraction: 0.1,
            strict: false,
            train: TrainConfig::default(),
            svd: SvdConfig::default(),
            softmax: SoftmaxConfig::default(),
            jobs: 1,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.softmax.validate()?;
        if self.jobs < 1 {
            return Err(Error::InvalidParameter("jobs must be at least 1".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 0.5) {
            return Err(Error::InvalidParameter("val_fraction must lie in (0, 0.5)".into()));
        }
        let theta_ok = |t: f64| t > 0.0 && t <= 1.0;
        match &self.theta {
            ThetaMode::Fixed(t) if !theta_ok(*t) => Err(Error::InvalidParameter(format!(
                "fixed theta must lie in (0, 1], got {t}"
            ))),
            ThetaMode::List(v) if v.is_empty() || !v.iter().all(|&t| theta_ok(t)) => Err(Error::InvalidParameter(
                "theta list must be non-empty with values in (0, 1]".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Fitting, validation and test nodes of one fold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold: usize,
    pub fit: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub val_fallback: bool,
}

/// Carves a validation set out of every training fold of `plan`.
pub fn plan_splits(labels: &[usize], plan: &FoldPlan, cfg: &EvalConfig) -> Result<Vec<FoldSplit>> {
    (0..plan.k)
        .map(|fold| {
            let carve = carve_validation(
                &plan.train_indices(fold),
                labels,
                cfg.val_fraction,
                fold_seed(cfg.seed, fold, STREAM_CARVE),
            )?;
            Ok(FoldSplit {
                fold,
                fit: carve.fit,
                val: carve.val,
                test: plan.test_indices(fold),
                val_fallback: carve.fallback,
            })
        })
        .collect()
}

/// Outcome of training at one candidate threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaTrial {
    pub theta: f64,
    pub edges: usize,
    pub edge_retention: Option<f64>,
    /// Training loss at the early-stopped (best validation) epoch.
    pub train_loss: f64,
    pub val_loss: f64,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
}

pub struct ThetaSelection<T> {
    pub theta: T,
    pub graph: LatentGraph<T>,
    pub result: TrainResult<T>,
    pub trials: Vec<ThetaTrial>,
    pub graph_seconds: f64,
    pub train_seconds: f64,
}

/// Trains one model per candidate threshold on the fit/validation split and
/// keeps the one with the lowest training loss at its early-stopped epoch;
/// equal losses go to the larger θ. Candidates whose graph is edgeless are
/// skipped when self-loops are off.
pub fn select_theta<T: Scalar>(
    ds: &Dataset<T>,
    sm: &SimilarityMatrix<T>,
    fit: &[usize],
    val: &[usize],
    candidates: &[T],
    cfg: &TrainConfig,
) -> Result<ThetaSelection<T>> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("no candidate thresholds".into()));
    }
    let mut trials = Vec::with_capacity(candidates.len());
    let mut best: Option<(f64, T, LatentGraph<T>, TrainResult<T>)> = None;
    let (mut graph_seconds, mut train_seconds) = (0.0, 0.0);
    for &theta in candidates {
        let t0 = Instant::now();
        let g = threshold_graph(sm, theta)?;
        if g.n_edges() == 0 && !cfg.self_loops {
            continue;
        }
        let adj = normalize_adjacency(&g, cfg.self_loops);
        let retention = edge_retention(sm, theta).ok();
        graph_seconds += t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let res = train(ds, &adj, fit, val, cfg)?;
        train_seconds += t1.elapsed().as_secs_f64();

        let loss = res.best_train_loss();
        trials.push(ThetaTrial {
            theta: theta.as_f64(),
            edges: g.n_edges(),
            edge_retention: retention,
            train_loss: loss,
            val_loss: res.best_val_loss,
            best_epoch: res.best_epoch,
            stopped_epoch: res.stopped_epoch,
        });
        let better = match &best {
            None => true,
            Some((b, bt, _, _)) => loss < *b || (loss == *b && theta > *bt),
        };
        if better {
            best = Some((loss, theta, g, res));
        }
    }
    let (_, theta, graph, result) = best.ok_or(Error::EdgelessGraph("training without self-loops"))?;
    Ok(ThetaSelection {
        theta,
        graph,
        result,
        trials,
        graph_seconds,
        train_seconds,
    })
}

/// Model fitted in one fold.
#[derive(Clone, Debug)]
pub enum FoldModel<T> {
    Gcn(GcnModel<T>),
    SvdLr {
        projection: SvdProjection<T>,
        head: SoftmaxRegression<T>,
    },
}

pub struct FoldOutcome<T> {
    pub result: FoldResult,
    pub trials: Vec<ThetaTrial>,
    pub model: FoldModel<T>,
}

/// Similarity matrix and candidate thresholds shared by every fold.
pub struct GraphContext<T> {
    pub similarity: SimilarityMatrix<T>,
    pub candidates: Vec<T>,
}

impl<T: Scalar> GraphContext<T> {
    pub fn new(ds: &Dataset<T>, cfg: &EvalConfig) -> Result<Self> {
        let similarity = similarity_matrix(ds);
        let candidates = match &cfg.theta {
            ThetaMode::Auto => theta_grid(&similarity, &cfg.quantiles)?,
            ThetaMode::Fixed(t) => vec![T::lit(*t)],
            ThetaMode::List(v) => v.iter().map(|&t| T::lit(t)).collect(),
        };
        Ok(Self { similarity, candidates })
    }
}

/// Trains and scores one fold. Labels of test nodes are read only when
/// scoring.
pub fn run_fold<T: Scalar>(
    ds: &Dataset<T>,
    ctx: Option<&GraphContext<T>>,
    split: &FoldSplit,
    cfg: &EvalConfig,
) -> Result<FoldOutcome<T>> {
    match cfg.method {
        Method::Gcn => {
            let ctx = ctx.ok_or_else(|| Error::InvalidParameter("graph context required for gcn".into()))?;
            let train_cfg = TrainConfig {
                seed: fold_seed(cfg.seed, split.fold, STREAM_TRAIN),
                ..cfg.train.clone()
            };
            let sel = select_theta(ds, &ctx.similarity, &split.fit, &split.val, &ctx.candidates, &train_cfg)?;
            let adj = normalize_adjacency(&sel.graph, train_cfg.self_loops);
            let (_, pred) = predict(&sel.result.model, &adj, ds.features())?;
            let (acc, f1) = score(ds, &pred, &split.test)?;
            let result = FoldResult {
                fold: split.fold,
                n_fit: split.fit.len(),
                n_val: split.val.len(),
                n_test: split.test.len(),
                val_fallback: split.val_fallback,
                selected_theta: Some(sel.theta.as_f64()),
                edges: Some(sel.graph.n_edges()),
                edge_retention: edge_retention(&ctx.similarity, sel.theta).ok(),
                best_epoch: Some(sel.result.best_epoch),
                stopped_epoch: Some(sel.result.stopped_epoch),
                accuracy: acc,
                macro_f1: f1,
                graph_seconds: sel.graph_seconds,
                train_seconds: sel.train_seconds,
            };
            Ok(FoldOutcome {
                result,
                trials: sel.trials,
                model: FoldModel::Gcn(sel.result.model),
            })
        }
        Method::SvdLr => {
            let t0 = Instant::now();
            let x = ds.features();
            let rank = cfg.svd.rank.unwrap_or_else(|| default_rank(ds.n(), ds.d()));
            let projection = randomized_svd(
                x,
                rank,
                cfg.svd.oversample,
                cfg.svd.power_iters,
                fold_seed(cfg.seed, split.fold, STREAM_SVD),
            )?;
            let z = zscore_columns(&project(&projection, x)?);
            let mut labelled: Vec<usize> = split.fit.iter().chain(&split.val).copied().collect();
            labelled.sort_unstable();
            let head = softmax_regression_train(&z, ds.labels(), ds.c(), &labelled, &cfg.softmax)?;
            let pred = head.predict(&z)?;
            let train_seconds = t0.elapsed().as_secs_f64();
            let (acc, f1) = score(ds, &pred, &split.test)?;
            let result = FoldResult {
                fold: split.fold,
                n_fit: labelled.len(),
                n_val: 0,
                n_test: split.test.len(),
                val_fallback: split.val_fallback,
                selected_theta: None,
                edges: None,
                edge_retention: None,
                best_epoch: None,
                stopped_epoch: None,
                accuracy: acc,
                macro_f1: f1,
                graph_seconds: 0.0,
                train_seconds,
            };
            Ok(FoldOutcome {
                result,
                trials: Vec::new(),
                model: FoldModel::SvdLr { projection, head },
            })
        }
    }
}

fn score<T: Scalar>(ds: &Dataset<T>, pred: &[usize], test: &[usize]) -> Result<(f64, f64)> {
    let p: Vec<usize> = test.iter().map(|&i| pred[i]).collect();
    let t: Vec<usize> = test.iter().map(|&i| ds.labels()[i]).collect();
    Ok((accuracy(&p, &t)?, macro_f1(&p, &t, ds.c())?))
}

/// Fold outcomes, the shared graph context (GCN only) and the seconds spent
/// building it.
pub type SplitRun<T> = (Vec<FoldOutcome<T>>, Option<GraphContext<T>>, f64);

/// Runs every split on a pool of `cfg.jobs` threads; outcomes are returned in
/// split order.
pub fn run_splits<T: Scalar>(ds: &Dataset<T>, splits: &[FoldSplit], cfg: &EvalConfig) -> Result<SplitRun<T>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        let t0 = Instant::now();
        let ctx = match cfg.method {
            Method::Gcn => Some(GraphContext::new(ds, cfg)?),
            Method::SvdLr => None,
        };
        let similarity_seconds = t0.elapsed().as_secs_f64();
        let outcomes = splits
            .par_iter()
            .map(|s| run_fold(ds, ctx.as_ref(), s, cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok((outcomes, ctx, similarity_seconds))
    })
}

pub fn run_cv_with_plan<T: Scalar>(ds: &Dataset<T>, plan: &FoldPlan, cfg: &EvalConfig) -> Result<EvalReport> {
    let start = Instant::now();
    let splits = plan_splits(ds.labels(), plan, cfg)?;
    let (outcomes, _, similarity_seconds) = run_splits(ds, &splits, cfg)?;
    let per_fold = outcomes.into_iter().map(|o| o.result).collect();
    Ok(EvalReport::new(
        ds,
        cfg.clone(),
        per_fold,
        Timing {
            similarity_seconds,
            total_seconds: start.elapsed().as_secs_f64(),
        },
    ))
}

/// Stratified k-fold cross-validation of `cfg.method` on `ds`.
pub fn run_cv<T: Scalar>(ds: &Dataset<T>, cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let plan = stratified_kfold(ds.labels(), cfg.k, cfg.seed, cfg.strict)?;
    run_cv_with_plan(ds, &plan, cfg)
}

/// One row per fold and candidate threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub fold: usize,
    #[serde(flatten)]
    pub trial: ThetaTrial,
}

/// Trains every candidate threshold in every fold (GCN only).
pub fn run_sweep<T: Scalar>(ds: &Dataset<T>, cfg: &EvalConfig) -> Result<Vec<SweepRow>> {
    if cfg.method != Method::Gcn {
        return Err(Error::InvalidParameter(
            "threshold sweeps apply to the gcn method".into(),
        ));
    }
    cfg.validate()?;
    let plan = stratified_kfold(ds.labels(), cfg.k, cfg.seed, cfg.strict)?;
    let splits = plan_splits(ds.labels(), &plan, cfg)?;
    let (outcomes, _, _) = run_splits(ds, &splits, cfg)?;
    let mut rows = Vec::new();
    for o in outcomes {
        let mut trials = o.trials;
        trials.sort_by(|a, b| a.theta.total_cmp(&b.theta));
        rows.extend(trials.into_iter().map(|trial| SweepRow {
            fold: o.result.fold,
            trial,
        }));
    }
    Ok(rows)
}
