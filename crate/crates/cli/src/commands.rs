use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;
use tabgraph::data::{load_csv, standardize, synth_blobs, write_csv_to, Dataset};
use tabgraph::eval::{plan_splits, run_splits, run_sweep, stratified_kfold, FoldModel, MeanStd, Timing};
use tabgraph::graph_stats::graph_stats;
use tabgraph::latent_graph::{similarity_matrix, threshold_graph, write_edge_list};
use tabgraph::stats_tests::{
    bayesian_correlated_ttest, friedman_ranks, nemenyi_cd, read_fold_scores, read_score_table, significance_matrix,
    Alpha, BayesResult, DEFAULT_ROPE,
};
use tabgraph::{EvalReport, Scalar, ThetaMode};

use crate::output::{dataset_name, sibling_csv, write_atomic};
use crate::settings::{Overrides, Precision, Settings};
use crate::UsageError;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Instances.
    #[arg(long, default_value_t = 120)]
    pub n: usize,
    /// Features.
    #[arg(long, default_value_t = 50)]
    pub d: usize,
    /// Classes.
    #[arg(long, default_value_t = 3)]
    pub c: usize,
    /// Distance between class centers.
    #[arg(long, default_value_t = 8.0)]
    pub sep: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub settings: Overrides,
    /// JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV report path [default: the JSON path with a .csv extension].
    #[arg(long = "csv-out")]
    pub csv_out: Option<PathBuf>,
    /// Keep wall-clock fields in the JSON report (they always appear in the CSV).
    #[arg(long)]
    pub json_timing: bool,
    /// Write the selected graph of every fold as `fold_<i>.tsv`.
    #[arg(long)]
    pub edges_dir: Option<PathBuf>,
    /// Write the trained GCN of every fold as `fold_<i>.json`.
    #[arg(long)]
    pub models_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub settings: Overrides,
    /// Output CSV, one row per fold and threshold.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub settings: Overrides,
    /// JSON output path [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the graph as an edge list.
    #[arg(long)]
    pub edges: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Score table: first column method names, header row dataset names.
    #[arg(long)]
    pub scores: PathBuf,
    /// Significance level for the critical distance: 0.05 or 0.01.
    #[arg(long, default_value = "0.05")]
    pub alpha: String,
    /// Method pair `A,B` for the Bayesian correlated t-test; repeatable.
    #[arg(long = "pair", value_name = "A,B")]
    pub pairs: Vec<String>,
    /// Per-fold scores with one column per method, needed by --pair.
    #[arg(long)]
    pub folds: Option<PathBuf>,
    /// Correlation between folds [default: 0.1].
    #[arg(long, default_value_t = 0.1)]
    pub rho: f64,
    /// Half-width of the region of practical equivalence.
    #[arg(long, default_value_t = DEFAULT_ROPE)]
    pub rope: f64,
    /// JSON output path [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write `method,average_rank` as CSV.
    #[arg(long)]
    pub ranks_csv: Option<PathBuf>,
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let ds: Dataset<f64> = synth_blobs(args.n, args.d, args.c, args.sep, args.seed)?;
    let mut buf = Vec::new();
    write_csv_to(&ds, &mut buf, b',')?;
    write_atomic(&args.out, &buf)?;
    println!(
        "wrote {} ({} instances, {} features, {} classes)",
        args.out.display(),
        ds.n(),
        ds.d(),
        ds.c()
    );
    Ok(())
}

fn load<T: Scalar>(s: &Settings) -> Result<Dataset<T>> {
    let path = s.data_path()?;
    let ds = load_csv::<T>(path, &s.csv).with_context(|| format!("loading {}", path.display()))?;
    Ok(standardize(&ds, s.standardize))
}

pub fn run(args: &RunArgs) -> Result<()> {
    let s = args.settings.resolve()?;
    match s.precision {
        Precision::F64 => run_with::<f64>(&s, args),
        Precision::F32 => run_with::<f32>(&s, args),
    }
}

fn fmt_ms(m: Option<MeanStd>) -> String {
    m.map_or_else(|| "n/a".into(), |m| format!("{:.4}", m.mean))
}

fn run_with<T: Scalar>(s: &Settings, args: &RunArgs) -> Result<()> {
    let start = Instant::now();
    let ds = load::<T>(s)?;
    let cfg = &s.eval;
    let plan = stratified_kfold(ds.labels(), cfg.k, cfg.seed, cfg.strict)?;
    let splits = plan_splits(ds.labels(), &plan, cfg)?;
    let (outcomes, ctx, similarity_seconds) = run_splits(&ds, &splits, cfg)?;

    if let (Some(dir), Some(ctx)) = (&args.edges_dir, &ctx) {
        for o in &outcomes {
            if let Some(theta) = o.result.selected_theta {
                let g = threshold_graph(&ctx.similarity, T::lit(theta))?;
                let mut buf = Vec::new();
                write_edge_list(&g, &ctx.similarity, &mut buf)?;
                write_atomic(&dir.join(format!("fold_{}.tsv", o.result.fold)), &buf)?;
            }
        }
    }
    if let Some(dir) = &args.models_dir {
        for o in &outcomes {
            if let FoldModel::Gcn(m) = &o.model {
                write_atomic(
                    &dir.join(format!("fold_{}.json", o.result.fold)),
                    m.to_json()?.as_bytes(),
                )?;
            }
        }
    }

    let per_fold = outcomes.into_iter().map(|o| o.result).collect();
    let name = dataset_name(s.data_path()?);
    let timing = Timing {
        similarity_seconds,
        total_seconds: start.elapsed().as_secs_f64(),
    };
    let report = EvalReport::new(&ds, cfg.clone(), per_fold, timing).with_dataset(&name);

    if let Some(out) = &args.out {
        write_atomic(out, report.to_json(args.json_timing)?.as_bytes())?;
    }
    if let Some(csv) = args.csv_out.clone().or_else(|| args.out.as_deref().map(sibling_csv)) {
        let mut buf = Vec::new();
        report.write_csv(&mut buf)?;
        write_atomic(&csv, &buf)?;
    }
    let a = &report.aggregate;
    println!(
        "{name}  {}  accuracy {:.4} ± {:.4}  macro-F1 {:.4} ± {:.4}  theta {}  {:.2} s",
        report.method,
        a.accuracy.mean,
        a.accuracy.std,
        a.macro_f1.mean,
        a.macro_f1.std,
        fmt_ms(a.selected_theta),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let s = args.settings.resolve()?;
    match s.precision {
        Precision::F64 => sweep_with::<f64>(&s, args),
        Precision::F32 => sweep_with::<f32>(&s, args),
    }
}

fn sweep_with<T: Scalar>(s: &Settings, args: &SweepArgs) -> Result<()> {
    let ds = load::<T>(s)?;
    let rows = run_sweep(&ds, &s.eval)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "fold",
        "theta",
        "edges",
        "edge_retention",
        "train_loss",
        "val_loss",
        "best_epoch",
        "stopped_epoch",
    ])?;
    for r in &rows {
        let t = &r.trial;
        w.write_record([
            r.fold.to_string(),
            t.theta.to_string(),
            t.edges.to_string(),
            t.edge_retention.map(|x| x.to_string()).unwrap_or_default(),
            t.train_loss.to_string(),
            t.val_loss.to_string(),
            t.best_epoch.to_string(),
            t.stopped_epoch.to_string(),
        ])?;
    }
    let buf = w.into_inner().map_err(|e| anyhow::anyhow!("{}", e.error()))?;
    write_atomic(&args.out, &buf)?;
    println!(
        "{}  sweep  {} rows  {}",
        dataset_name(s.data_path()?),
        rows.len(),
        args.out.display()
    );
    Ok(())
}

pub fn stats(args: &StatsArgs) -> Result<()> {
    let s = args.settings.resolve()?;
    match s.precision {
        Precision::F64 => stats_with::<f64>(&s, args),
        Precision::F32 => stats_with::<f32>(&s, args),
    }
}

fn stats_with<T: Scalar>(s: &Settings, args: &StatsArgs) -> Result<()> {
    let ThetaMode::Fixed(theta) = s.eval.theta else {
        return Err(UsageError("stats needs a single threshold, e.g. --theta 0.5".into()).into());
    };
    let ds = load::<T>(s)?;
    let sm = similarity_matrix(&ds);
    let g = threshold_graph(&sm, T::lit(theta))?;
    if let Some(path) = &args.edges {
        let mut buf = Vec::new();
        write_edge_list(&g, &sm, &mut buf)?;
        write_atomic(path, &buf)?;
    }
    let report = graph_stats(&g, ds.labels())?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    emit(args.out.as_deref(), &json)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct PairResult {
    first: String,
    second: String,
    n_folds: usize,
    rho: f64,
    #[serde(flatten)]
    posterior: BayesResult<f64>,
}

#[derive(Serialize)]
struct Comparison {
    methods: Vec<String>,
    datasets: Vec<String>,
    average_ranks: Vec<f64>,
    alpha: f64,
    critical_distance: f64,
    /// `significant[i][j]`: methods i and j differ by more than the critical distance.
    significant: Vec<Vec<bool>>,
    bayesian: Vec<PairResult>,
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))
}

pub fn compare(args: &CompareArgs) -> Result<()> {
    let alpha: Alpha = args
        .alpha
        .parse()
        .map_err(|e: tabgraph::Error| UsageError(e.to_string()))?;
    if !args.pairs.is_empty() && args.folds.is_none() {
        return Err(UsageError("--pair needs per-fold scores via --folds".into()).into());
    }
    let pairs = args
        .pairs
        .iter()
        .map(|p| match p.split_once(',') {
            Some((a, b)) if !a.trim().is_empty() && !b.trim().is_empty() => Ok((a.trim(), b.trim())),
            _ => Err(UsageError(format!("--pair expects `A,B`, got `{p}`"))),
        })
        .collect::<Result<Vec<_>, _>>()?;

    let table = read_score_table::<f64, _>(open(&args.scores)?)
        .with_context(|| format!("reading {}", args.scores.display()))?;
    let ranks = friedman_ranks(&table);
    let cd = nemenyi_cd(table.methods().len(), table.datasets().len(), alpha)?;

    let mut bayesian = Vec::new();
    if let Some(path) = &args.folds {
        let folds = read_fold_scores::<f64, _>(open(path)?).with_context(|| format!("reading {}", path.display()))?;
        for (a, b) in pairs {
            let col = |m: &str| {
                folds
                    .column(m)
                    .with_context(|| format!("method `{m}` is not a column of {}", path.display()))
            };
            let diffs: Vec<f64> = col(a)?.iter().zip(col(b)?).map(|(x, y)| x - y).collect();
            bayesian.push(PairResult {
                first: a.into(),
                second: b.into(),
                n_folds: diffs.len(),
                rho: args.rho,
                posterior: bayesian_correlated_ttest(&diffs, args.rho, args.rope)?,
            });
        }
    }

    if let Some(path) = &args.ranks_csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "average_rank"])?;
        for (m, r) in table.methods().iter().zip(&ranks) {
            w.write_record([m.clone(), r.to_string()])?;
        }
        let buf = w.into_inner().map_err(|e| anyhow::anyhow!("{}", e.error()))?;
        write_atomic(path, &buf)?;
    }

    let out = Comparison {
        methods: table.methods().to_vec(),
        datasets: table.datasets().to_vec(),
        significant: significance_matrix(&ranks, cd),
        average_ranks: ranks,
        alpha: alpha.value(),
        critical_distance: cd,
        bayesian,
    };
    let mut json = serde_json::to_string_pretty(&out)?;
    json.push('\n');
    emit(args.out.as_deref(), &json)
}
