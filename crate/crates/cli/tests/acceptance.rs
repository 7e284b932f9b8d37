//! Acceptance suite. Every criterion prints one PASS/FAIL line; the process
//! exits non-zero when any criterion fails.
//!
//! The optional real-data criterion runs only when `TABGRAPH_TCGA` names the
//! TCGA CSV (`TABGRAPH_TCGA_LABEL` sets its label column, default `label`).

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::Value;
use tabgraph::baseline::{randomized_svd, DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS};
use tabgraph::data::{load_csv, synth_blobs, CsvOptions};
use tabgraph::eval::{plan_splits, run_fold, stratified_kfold, FoldModel, GraphContext};
use tabgraph::gcn::{backward, forward, loss, normalize_adjacency};
use tabgraph::graph_stats::{graph_stats, homophily};
use tabgraph::latent_graph::{similarity_matrix, threshold_graph};
use tabgraph::stats_tests::{bayesian_correlated_ttest, nemenyi_cd, Alpha};
use tabgraph::{Dataset, EvalConfig, GcnModel, LatentGraph, Matrix, Method};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gaussian(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_tabgraph")
}

fn tabgraph(args: &[&str]) -> Result<std::process::Output, String> {
    let out = Command::new(bin()).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(out)
    } else {
        Err(format!(
            "`tabgraph {}` exited with {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().expect("temporary directory");
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn fixture(&self) -> Result<PathBuf, String> {
        let p = self.path("fixture.csv");
        if !p.exists() {
            let s = p.to_str().unwrap();
            tabgraph(&[
                "synth", "--n", "120", "--d", "50", "--c", "3", "--sep", "8", "--seed", "7", "--out", s,
            ])?;
        }
        Ok(p)
    }
}

fn read_json(p: &Path) -> Result<Value, String> {
    let text = std::fs::read_to_string(p).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

// ---------------------------------------------------------------- gradients

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let step = 1e-5;
    let (mut accepted, mut worst) = (0, 0.0f64);
    while accepted < 50 {
        let n = rng.random_range(2..=10);
        let d = rng.random_range(1..=8);
        let h = rng.random_range(1..=5);
        let c = rng.random_range(2..=3);
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|_| rng.random_bool(0.4))
            .collect();
        let g = LatentGraph::from_edges(n, edges, 0.5).unwrap();
        let adj = normalize_adjacency(&g, rng.random_bool(0.8));
        let x = gaussian(n, d, 1.0, &mut rng);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let mask: Vec<usize> = (0..n).filter(|&i| i == 0 || rng.random_bool(0.6)).collect();
        let wd = rng.random_range(0.0..0.01);
        let mut model = GcnModel::zeros(d, h, c);
        model.w1 = gaussian(d, h, 0.8, &mut rng);
        model.w2 = gaussian(h, c, 0.8, &mut rng);
        model.head_propagation = rng.random_bool(0.7);

        let (_, cache) = forward(&model, &adj, &x).unwrap();
        // central differences are meaningless across a relu kink
        if cache.z1.as_slice().iter().any(|z| z.abs() < 1e-3) {
            continue;
        }
        let grads = backward(&cache, &labels, &mask, &model, wd).unwrap();
        let objective = |m: &GcnModel| {
            let (logits, _) = forward(m, &adj, &x).unwrap();
            loss(&logits, &labels, &mask, m, wd).unwrap()
        };
        for layer in 0..2 {
            let analytic = if layer == 0 { &grads.w1 } else { &grads.w2 };
            for k in 0..analytic.as_slice().len() {
                let bumped = |delta: f64| {
                    let mut m = model.clone();
                    let w = if layer == 0 { &mut m.w1 } else { &mut m.w2 };
                    w.as_mut_slice()[k] += delta;
                    objective(&m)
                };
                let fd = (bumped(step) - bumped(-step)) / (2.0 * step);
                let an = analytic.as_slice()[k];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
        accepted += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst < 1e-4, || format!("max relative error {worst:e}"))?;
    check(secs < 10.0, || format!("took {secs:.1} s"))?;
    Ok(format!("50 instances, max relative error {worst:.2e}, {secs:.2} s"))
}

// ---------------------------------------------------------- fixture pipeline

fn fixture_pipeline(ws: &Workspace) -> Outcome {
    let data = ws.fixture()?;
    let out = ws.path("fixture_report.json");
    let start = Instant::now();
    let stdout = tabgraph(&[
        "run",
        "--data",
        data.to_str().unwrap(),
        "--method",
        "gcn",
        "--k",
        "10",
        "--jobs",
        "1",
        "--out",
        out.to_str().unwrap(),
    ])?
    .stdout;
    let secs = start.elapsed().as_secs_f64();
    let report = read_json(&out)?;
    let acc = report["aggregate"]["accuracy"]["mean"].as_f64().ok_or("no accuracy")?;
    let f1 = report["aggregate"]["macro_f1"]["mean"].as_f64().ok_or("no macro F1")?;
    check(acc >= 0.95, || format!("mean accuracy {acc}"))?;
    check(f1 >= 0.95, || format!("mean macro F1 {f1}"))?;
    check(secs < 60.0, || format!("took {secs:.1} s"))?;
    check(String::from_utf8_lossy(&stdout).lines().count() == 1, || {
        "summary is not one line".into()
    })?;
    Ok(format!("accuracy {acc:.4}, macro F1 {f1:.4}, {secs:.2} s"))
}

// -------------------------------------------------------- threshold behavior

fn threshold_behavior(ws: &Workspace) -> Outcome {
    let report = read_json(&ws.path("fixture_report.json"))?;
    let folds = report["per_fold"].as_array().ok_or("no per_fold")?;
    let mut retention = Vec::new();
    for f in folds {
        let r = f["edge_retention"].as_f64().ok_or("no retention")?;
        check((0.05..=0.20).contains(&r), || {
            format!("fold {}: selected retention {r}", f["fold"])
        })?;
        retention.push(r);
    }

    let data = ws.fixture()?;
    let sweep = ws.path("sweep.csv");
    tabgraph(&[
        "sweep",
        "--data",
        data.to_str().unwrap(),
        "--k",
        "10",
        "--out",
        sweep.to_str().unwrap(),
    ])?;
    let text = std::fs::read_to_string(&sweep).map_err(|e| e.to_string())?;
    let mut rows: Vec<(usize, f64, usize)> = Vec::new();
    for line in text.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let num = |i: usize| cells[i].parse::<f64>().map_err(|e| format!("{line}: {e}"));
        rows.push((num(0)? as usize, num(1)?, num(2)? as usize));
    }
    for fold in 0..10 {
        let mut r: Vec<(f64, usize)> = rows.iter().filter(|x| x.0 == fold).map(|x| (x.1, x.2)).collect();
        check(r.len() >= 2, || format!("fold {fold}: {} sweep rows", r.len()))?;
        r.sort_by(|a, b| a.0.total_cmp(&b.0));
        check(r.windows(2).all(|w| w[0].1 >= w[1].1), || {
            format!("fold {fold}: edges increase")
        })?;
    }
    let lo = retention.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = retention.iter().copied().fold(0.0, f64::max);
    Ok(format!(
        "selected retention in [{lo:.4}, {hi:.4}], {} sweep rows monotone",
        rows.len()
    ))
}

// ------------------------------------------------------------ graph metrics

fn random_graph(rng: &mut ChaCha8Rng) -> (LatentGraph, Vec<usize>) {
    let n = rng.random_range(2..=12);
    let p = rng.random_range(0.05..0.9);
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .filter(|_| rng.random_bool(p))
        .collect();
    let labels = (0..n).map(|_| rng.random_range(0..3)).collect();
    (LatentGraph::from_edges(n, edges, 0.5).unwrap(), labels)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

/// Brute-force statistics: triple loops, Floyd-Warshall, direct Pearson and
/// a dense eigendecomposition.
fn graph_oracle_mismatch(g: &LatentGraph, labels: &[usize]) -> Option<String> {
    let n = g.n();
    let mut a = vec![vec![false; n]; n];
    for &(i, j) in g.edges() {
        a[i][j] = true;
        a[j][i] = true;
    }
    let deg: Vec<usize> = a.iter().map(|r| r.iter().filter(|&&x| x).count()).collect();
    let s = graph_stats(g, labels).ok()?;

    let m = g.n_edges();
    let same = g.edges().iter().filter(|&&(i, j)| labels[i] == labels[j]).count();
    if !close(s.homophily, same as f64 / m as f64) || !close(s.heterophily, 1.0 - same as f64 / m as f64) {
        return Some("homophily".into());
    }

    let mut triangles = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                triangles += usize::from(a[i][j] && a[j][k] && a[i][k]);
            }
        }
    }
    let triples: usize = deg.iter().map(|&d| d * d.saturating_sub(1) / 2).sum();
    let trans = if triples == 0 {
        0.0
    } else {
        3.0 * triangles as f64 / triples as f64
    };
    if !close(s.transitivity, trans) {
        return Some(format!("transitivity {} vs {trans}", s.transitivity));
    }

    let mut clustering = 0.0;
    for v in (0..n).filter(|&v| deg[v] >= 2) {
        let mut closed = 0;
        for u in 0..n {
            for w in (u + 1)..n {
                closed += usize::from(a[v][u] && a[v][w] && a[u][w]);
            }
        }
        clustering += closed as f64 / (deg[v] * (deg[v] - 1) / 2) as f64;
    }
    if !close(s.avg_clustering, clustering / n as f64) {
        return Some("clustering".into());
    }

    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for i in 0..n {
        for j in (0..n).filter(|&j| a[i][j]) {
            xs.push(deg[i] as f64);
            ys.push(deg[j] as f64);
        }
    }
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let assort = (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt());
    match (s.assortativity, assort) {
        (None, None) => {}
        (Some(p), Some(q)) if close(p, q) => {}
        other => return Some(format!("assortativity {other:?}")),
    }

    let degc = deg.iter().map(|&d| d as f64 / (n - 1) as f64).sum::<f64>() / n as f64;
    if !close(s.avg_degree_centrality, degc) {
        return Some("degree centrality".into());
    }

    const INF: usize = usize::MAX / 4;
    let mut dist = vec![vec![INF; n]; n];
    for i in 0..n {
        dist[i][i] = 0;
        for j in (0..n).filter(|&j| a[i][j]) {
            dist[i][j] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                dist[i][j] = dist[i][j].min(dist[i][k] + dist[k][j]);
            }
        }
    }
    let mut closeness = 0.0;
    for v in 0..n {
        let reach: Vec<usize> = (0..n).filter(|&u| dist[v][u] < INF).collect();
        let sum: usize = reach.iter().map(|&u| dist[v][u]).sum();
        if sum > 0 {
            let r = (reach.len() - 1) as f64;
            closeness += (r / (n - 1) as f64) * (r / sum as f64);
        }
    }
    if !close(s.avg_closeness_centrality, closeness / n as f64) {
        return Some("closeness".into());
    }

    let mut seen = vec![false; n];
    let mut components = 0;
    for v in 0..n {
        if !seen[v] {
            components += 1;
            (0..n).filter(|&u| dist[v][u] < INF).for_each(|u| seen[u] = true);
        }
    }
    if s.n_components != components {
        return Some(format!("components {} vs {components}", s.n_components));
    }
    if components == 1 {
        let pairs: Vec<usize> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| dist[i][j])
            .collect();
        let avg = pairs.iter().sum::<usize>() as f64 / pairs.len() as f64;
        if s.diameter != pairs.iter().max().copied() || !s.avg_shortest_path.is_some_and(|p| close(p, avg)) {
            return Some("paths".into());
        }
    } else if s.diameter.is_some() || s.avg_shortest_path.is_some() {
        return Some("paths reported on a disconnected graph".into());
    }

    // the limit of power iteration from the uniform vector: its projection on
    // the top eigenspace, normalized
    let dense = DMatrix::from_fn(n, n, |i, j| f64::from(u8::from(a[i][j])));
    let eig = SymmetricEigen::new(dense);
    let top = eig.eigenvalues.max();
    let ones = DVector::from_element(n, 1.0);
    let mut proj = DVector::zeros(n);
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l > top - 1e-9 * top.max(1.0) {
            let v = eig.eigenvectors.column(k);
            proj += v * v.dot(&ones);
        }
    }
    let eigen = proj.sum() / proj.norm() / n as f64;
    if !close(s.avg_eigenvector_centrality, eigen) {
        return Some(format!(
            "eigenvector centrality {} vs {eigen}",
            s.avg_eigenvector_centrality
        ));
    }
    None
}

fn graph_metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let mut checked = 0;
    while checked < 500 {
        let (g, labels) = random_graph(&mut rng);
        if g.n_edges() == 0 {
            continue;
        }
        checked += 1;
        if let Some(what) = graph_oracle_mismatch(&g, &labels) {
            return Err(format!("graph {checked} (n={}, edges {:?}): {what}", g.n(), g.edges()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 30.0, || format!("took {secs:.1} s"))?;
    Ok(format!("500 graphs, {secs:.2} s"))
}

fn homophily_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(501);
    let mut checked = 0;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (g, labels) = random_graph(&mut rng);
        if g.n_edges() == 0 {
            continue;
        }
        let (h, he) = homophily(&g, &labels).map_err(|e| e.to_string())?;
        worst = worst.max((h + he - 1.0).abs());
        checked += 1;
    }
    check(worst <= f64::EPSILON, || format!("|h + he − 1| = {worst:e}"))?;
    Ok(format!("{checked} graphs, max deviation {worst:e}"))
}

// -------------------------------------------------------- statistical tests

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

/// Student-t mass below `x`, integrated over `u = atan(t)`.
fn t_below(x: f64, df: f64) -> f64 {
    let norm = libm::lgamma((df + 1.0) / 2.0) - libm::lgamma(df / 2.0) - 0.5 * (df * PI).ln();
    let f = |u: f64| {
        let c = u.cos();
        if c == 0.0 {
            return 0.0;
        }
        let t = u.tan();
        (norm - (df + 1.0) / 2.0 * (1.0 + t * t / df).ln()).exp() / (c * c)
    };
    simpson(&f, -FRAC_PI_2, x.atan(), 1e-13)
}

fn statistical_tests() -> Outcome {
    let cd = nemenyi_cd(2, 9, Alpha::P05).map_err(|e| e.to_string())?;
    check((cd - 0.6533).abs() <= 1e-3, || format!("CD {cd}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(600);
    let (mut worst_sum, mut worst_quad) = (0.0f64, 0.0f64);
    for case in 0..100 {
        let n = rng.random_range(2..=30);
        let shift = rng.random_range(-0.03..0.03);
        let spread = rng.random_range(0.001..0.05);
        let diffs: Vec<f64> = (0..n).map(|_| shift + spread * rng.random_range(-1.0..1.0)).collect();
        let rho = [0.0, 0.1, 0.3][case % 3];
        let rope = 0.01;
        let got = bayesian_correlated_ttest(&diffs, rho, rope).map_err(|e| e.to_string())?;
        worst_sum = worst_sum.max((got.p_left + got.p_rope + got.p_right - 1.0).abs());

        let nf = n as f64;
        let mean = diffs.iter().sum::<f64>() / nf;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        let scale = ((1.0 / nf + rho / (1.0 - rho)) * var).sqrt();
        let left = t_below((-rope - mean) / scale, nf - 1.0);
        let right = t_below((mean - rope) / scale, nf - 1.0);
        for (p, q) in [
            (got.p_left, left),
            (got.p_rope, 1.0 - left - right),
            (got.p_right, right),
        ] {
            worst_quad = worst_quad.max((p - q).abs());
        }

        let neg: Vec<f64> = diffs.iter().map(|d| -d).collect();
        let mirrored = bayesian_correlated_ttest(&neg, rho, rope).map_err(|e| e.to_string())?;
        check(
            mirrored.p_left == got.p_right && mirrored.p_right == got.p_left && mirrored.p_rope == got.p_rope,
            || format!("case {case}: negation is not an exact mirror"),
        )?;
    }
    check(worst_sum <= 1e-9, || format!("triple sums off by {worst_sum:e}"))?;
    check(worst_quad <= 1e-6, || format!("quadrature deviation {worst_quad:e}"))?;
    Ok(format!(
        "CD {cd:.4}, sum error {worst_sum:.1e}, quadrature error {worst_quad:.1e}"
    ))
}

// -------------------------------------------------------------- svd baseline

fn svd_baseline() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(700);
    let (mut worst_ratio, mut worst_orth) = (0.0f64, 0.0f64);
    for case in 0..20 {
        let n = rng.random_range(5..=100);
        let d = rng.random_range(5..=100);
        let k = rng.random_range(1..=n.min(d));
        let signal = gaussian(n, k, 1.0, &mut rng)
            .matmul(&gaussian(k, d, 1.0, &mut rng))
            .unwrap();
        let noise = gaussian(n, d, rng.random_range(0.01..1.0), &mut rng);
        let x = Matrix::from_fn(n, d, |i, j| signal[(i, j)] + noise[(i, j)]);
        let rank = rng.random_range(1..=n.min(d));
        let p = randomized_svd(&x, rank, DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS, case).map_err(|e| e.to_string())?;

        let mut sigma: Vec<f64> = DMatrix::from_fn(n, d, |i, j| x[(i, j)])
            .singular_values()
            .iter()
            .copied()
            .collect();
        sigma.sort_by(|a, b| b.total_cmp(a));
        let exact = sigma[rank..].iter().map(|s| s * s).sum::<f64>().sqrt();
        let v = &p.components;
        let approx = x.matmul(v).unwrap().matmul_t(v).unwrap();
        let err = x.sub(&approx).unwrap().frobenius();
        let ratio = if exact > 1e-9 * sigma[0] {
            err / exact
        } else {
            1.0 + err / sigma[0]
        };
        worst_ratio = worst_ratio.max(ratio);

        let gram = v.t_matmul(v).unwrap();
        for i in 0..rank {
            for j in 0..rank {
                let want = if i == j { 1.0 } else { 0.0 };
                worst_orth = worst_orth.max((gram[(i, j)] - want).abs());
            }
        }
    }
    check(worst_ratio <= 1.05, || format!("error ratio {worst_ratio}"))?;
    check(worst_orth <= 1e-8, || format!("orthonormality error {worst_orth:e}"))?;
    Ok(format!(
        "20 matrices, worst error ratio {worst_ratio:.4}, orthonormality {worst_orth:.1e}"
    ))
}

// ------------------------------------------------------------- no leakage

fn bits(m: &Matrix) -> Vec<u64> {
    m.as_slice().iter().map(|v| v.to_bits()).collect()
}

fn no_leakage() -> Outcome {
    let ds: Dataset = synth_blobs(120, 50, 3, 8.0, 7).map_err(|e| e.to_string())?;
    let cfg = EvalConfig {
        method: Method::Gcn,
        k: 10,
        seed: 7,
        ..EvalConfig::default()
    };
    let plan = stratified_kfold(ds.labels(), cfg.k, cfg.seed, false).map_err(|e| e.to_string())?;
    let splits = plan_splits(ds.labels(), &plan, &cfg).map_err(|e| e.to_string())?;
    let ctx = GraphContext::new(&ds, &cfg).map_err(|e| e.to_string())?;
    for split in &splits {
        let mut labels = ds.labels().to_vec();
        for &i in &split.test {
            labels[i] = (labels[i] + 1) % ds.c();
        }
        let garbage = ds.with_labels(labels).map_err(|e| e.to_string())?;
        let a = run_fold(&ds, Some(&ctx), split, &cfg).map_err(|e| e.to_string())?;
        let b = run_fold(&garbage, Some(&ctx), split, &cfg).map_err(|e| e.to_string())?;
        check(
            a.result.selected_theta.map(f64::to_bits) == b.result.selected_theta.map(f64::to_bits),
            || format!("fold {}: selected theta changed", split.fold),
        )?;
        let (FoldModel::Gcn(ma), FoldModel::Gcn(mb)) = (&a.model, &b.model) else {
            return Err("expected GCN models".into());
        };
        check(bits(&ma.w1) == bits(&mb.w1) && bits(&ma.w2) == bits(&mb.w2), || {
            format!("fold {}: weights changed", split.fold)
        })?;
    }
    Ok(format!(
        "{} folds with corrupted test labels, theta and weights bitwise equal",
        splits.len()
    ))
}

// ------------------------------------------------------------ determinism

fn determinism(ws: &Workspace) -> Outcome {
    let data = ws.fixture()?;
    let mut reports = Vec::new();
    for (tag, jobs) in [("a", "1"), ("b", "1"), ("c", "4")] {
        let out = ws.path(&format!("det_{tag}.json"));
        tabgraph(&[
            "run",
            "--data",
            data.to_str().unwrap(),
            "--seed",
            "11",
            "--jobs",
            jobs,
            "--out",
            out.to_str().unwrap(),
        ])?;
        reports.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    check(reports[0] == reports[1], || "two single-worker runs differ".into())?;
    check(reports[0] == reports[2], || "--jobs 1 and --jobs 4 differ".into())?;
    Ok(format!("3 runs byte-identical ({} bytes)", reports[0].len()))
}

// ------------------------------------------------------- optional real data

fn tcga(ws: &Workspace) -> Option<Outcome> {
    let path = PathBuf::from(std::env::var_os("TABGRAPH_TCGA")?);
    let label = std::env::var("TABGRAPH_TCGA_LABEL").unwrap_or_else(|_| "label".into());
    Some((|| {
        let opts = CsvOptions {
            label_column: label.clone(),
            ..CsvOptions::default()
        };
        let ds: Dataset = load_csv(&path, &opts).map_err(|e| e.to_string())?;
        let sm = similarity_matrix(&ds);
        let mut sims = sm.positive_pairs();
        sims.sort_by(|a, b| b.total_cmp(a));
        let target = 23_903.min(sims.len());
        let g = threshold_graph(&sm, sims[target - 1]).map_err(|e| e.to_string())?;
        let s = graph_stats(&g, ds.labels()).map_err(|e| e.to_string())?;
        check((s.homophily - 0.98).abs() <= 0.02, || {
            format!("homophily {}", s.homophily)
        })?;
        check((s.transitivity - 0.80).abs() <= 0.03, || {
            format!("transitivity {}", s.transitivity)
        })?;
        let assort = s.assortativity.ok_or("assortativity undefined")?;
        check((assort - 0.74).abs() <= 0.05, || format!("assortativity {assort}"))?;
        check(s.n_components.abs_diff(10) <= 3, || {
            format!("{} components", s.n_components)
        })?;

        let out = ws.path("tcga.json");
        tabgraph(&[
            "run",
            "--data",
            path.to_str().ok_or("path is not UTF-8")?,
            "--label-column",
            &label,
            "--k",
            "10",
            "--out",
            out.to_str().unwrap(),
        ])?;
        let acc = read_json(&out)?["aggregate"]["accuracy"]["mean"]
            .as_f64()
            .ok_or("no accuracy")?;
        check(acc >= 0.97, || format!("mean accuracy {acc}"))?;
        Ok(format!(
            "{} edges, homophily {:.2}, transitivity {:.2}, assortativity {assort:.2}, {} components, accuracy {acc:.3}",
            g.n_edges(),
            s.homophily,
            s.transitivity,
            s.n_components
        ))
    })())
}

fn main() {
    let ws = Workspace::new();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("gradient correctness", Box::new(gradient_correctness)),
        ("fixture pipeline", Box::new(|| fixture_pipeline(&ws))),
        ("threshold behavior", Box::new(|| threshold_behavior(&ws))),
        ("graph-metric oracle equivalence", Box::new(graph_metric_oracles)),
        ("homophily identity", Box::new(homophily_identity)),
        ("statistical tests", Box::new(statistical_tests)),
        ("svd baseline", Box::new(svd_baseline)),
        ("no-leakage audit", Box::new(no_leakage)),
        ("determinism", Box::new(|| determinism(&ws))),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    match tcga(&ws) {
        None => println!("SKIP  real-data check: set TABGRAPH_TCGA to the TCGA CSV to run it"),
        Some(Ok(detail)) => println!("PASS  real-data check: {detail}"),
        Some(Err(why)) => {
            failed += 1;
            println!("FAIL  real-data check: {why}");
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed.min(criteria.len()),
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
