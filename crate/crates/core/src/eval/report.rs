use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::metrics::mean_std;
use super::run::{EvalConfig, Method};
use crate::data::Dataset;
use crate::error::Result;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_fit: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub val_fallback: bool,
    pub selected_theta: Option<f64>,
    pub edges: Option<usize>,
    pub edge_retention: Option<f64>,
    pub best_epoch: Option<usize>,
    pub stopped_epoch: Option<usize>,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub graph_seconds: f64,
    pub train_seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let (mean, std) = mean_std(values);
        Self { mean, std }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub accuracy: MeanStd,
    pub macro_f1: MeanStd,
    pub selected_theta: Option<MeanStd>,
    pub edge_retention: Option<MeanStd>,
    pub graph_seconds: MeanStd,
    pub train_seconds: MeanStd,
}

impl Aggregate {
    pub fn from_folds(folds: &[FoldResult]) -> Self {
        let col = |f: fn(&FoldResult) -> f64| MeanStd::of(&folds.iter().map(f).collect::<Vec<_>>());
        let opt = |f: fn(&FoldResult) -> Option<f64>| {
            folds
                .iter()
                .map(f)
                .collect::<Option<Vec<f64>>>()
                .map(|v| MeanStd::of(&v))
        };
        Self {
            accuracy: col(|r| r.accuracy),
            macro_f1: col(|r| r.macro_f1),
            selected_theta: opt(|r| r.selected_theta),
            edge_retention: opt(|r| r.edge_retention),
            graph_seconds: col(|r| r.graph_seconds),
            train_seconds: col(|r| r.train_seconds),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub similarity_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub method: Method,
    pub n: usize,
    pub d: usize,
    pub c: usize,
    pub class_names: Vec<String>,
    pub config: EvalConfig,
    pub per_fold: Vec<FoldResult>,
    pub aggregate: Aggregate,
    pub timing: Timing,
}

const TIMING_KEYS: [&str; 2] = ["graph_seconds", "train_seconds"];

impl EvalReport {
    pub fn new<T: Scalar>(ds: &Dataset<T>, config: EvalConfig, per_fold: Vec<FoldResult>, timing: Timing) -> Self {
        Self {
            dataset: String::new(),
            method: config.method,
            n: ds.n(),
            d: ds.d(),
            c: ds.c(),
            class_names: ds.class_names().to_vec(),
            aggregate: Aggregate::from_folds(&per_fold),
            config,
            per_fold,
            timing,
        }
    }

    pub fn with_dataset(mut self, name: impl Into<String>) -> Self {
        self.dataset = name.into();
        self
    }

    /// Pretty JSON. Wall-clock fields are left out unless `include_timing`,
    /// so reports from identical seeds are byte-identical.
    pub fn to_json(&self, include_timing: bool) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if !include_timing {
            if let Value::Object(top) = &mut v {
                top.remove("timing");
                if let Some(Value::Object(agg)) = top.get_mut("aggregate") {
                    TIMING_KEYS.iter().for_each(|k| drop(agg.remove(*k)));
                }
                if let Some(Value::Array(folds)) = top.get_mut("per_fold") {
                    for f in folds.iter_mut().filter_map(Value::as_object_mut) {
                        TIMING_KEYS.iter().for_each(|k| drop(f.remove(*k)));
                    }
                }
            }
        }
        let mut s = serde_json::to_string_pretty(&v)?;
        s.push('\n');
        Ok(s)
    }

    /// One row per fold followed by an `aggregate` row of means; the `*_std`
    /// columns are filled only in the aggregate row.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "fold",
            "n_fit",
            "n_val",
            "n_test",
            "selected_theta",
            "edges",
            "edge_retention",
            "best_epoch",
            "stopped_epoch",
            "accuracy",
            "macro_f1",
            "graph_seconds",
            "train_seconds",
            "accuracy_std",
            "macro_f1_std",
            "selected_theta_std",
            "edge_retention_std",
        ])?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for f in &self.per_fold {
            out.write_record([
                f.fold.to_string(),
                f.n_fit.to_string(),
                f.n_val.to_string(),
                f.n_test.to_string(),
                opt(f.selected_theta.map(|x| x.to_string())),
                opt(f.edges.map(|x| x.to_string())),
                opt(f.edge_retention.map(|x| x.to_string())),
                opt(f.best_epoch.map(|x| x.to_string())),
                opt(f.stopped_epoch.map(|x| x.to_string())),
                f.accuracy.to_string(),
                f.macro_f1.to_string(),
                f.graph_seconds.to_string(),
                f.train_seconds.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ])?;
        }
        let a = &self.aggregate;
        let mean = |m: Option<MeanStd>| opt(m.map(|m| m.mean.to_string()));
        let std = |m: Option<MeanStd>| opt(m.map(|m| m.std.to_string()));
        out.write_record([
            "aggregate".to_string(),
            String::new(),
            String::new(),
            String::new(),
            mean(a.selected_theta),
            String::new(),
            mean(a.edge_retention),
            String::new(),
            String::new(),
            a.accuracy.mean.to_string(),
            a.macro_f1.mean.to_string(),
            a.graph_seconds.mean.to_string(),
            a.train_seconds.mean.to_string(),
            a.accuracy.std.to_string(),
            a.macro_f1.std.to_string(),
            std(a.selected_theta),
            std(a.edge_retention),
        ])?;
        out.flush().map_err(|e| crate::Error::io("<csv output>", e))?;
        Ok(())
    }
}
