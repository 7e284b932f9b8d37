//! Cosine-similarity latent graphs over dataset instances.
//!
//! Every instance is a node. Two instances are joined when the cosine of the
//! angle between their feature vectors reaches a threshold θ > 0.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::scalar::Scalar;

/// Quantile levels of the positive-similarity distribution used as θ
/// candidates. They retain roughly 20% down to 5% of the positive edges.
pub const DEFAULT_QUANTILES: [f64; 6] = [0.80, 0.85, 0.875, 0.90, 0.925, 0.95];

/// Cosine similarity clamped to `[-1, 1]`; zero when either vector is zero.
pub fn cosine_similarity<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    if u.len() != v.len() || u.is_empty() {
        return Err(Error::Shape(format!(
            "cosine of vectors with lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    Ok(cosine_with_sq_norms(u, v, dot(u, u), dot(v, v)))
}

/// `dot/√(‖u‖²‖v‖²)`: exact 1 for identical vectors, since `√(x²) = x` in
/// IEEE arithmetic.
#[inline]
fn cosine_with_sq_norms<T: Scalar>(u: &[T], v: &[T], nu2: T, nv2: T) -> T {
    if nu2 == T::zero() || nv2 == T::zero() {
        return T::zero();
    }
    let c = dot(u, v) / (nu2 * nv2).sqrt();
    c.max(-T::one()).min(T::one())
}

/// Symmetric matrix of pairwise instance similarities.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix<T> {
    scores: Matrix<T>,
}

impl<T: Scalar> SimilarityMatrix<T> {
    /// Wraps an existing score matrix after checking it is square, exactly
    /// symmetric and bounded.
    pub fn from_scores(scores: Matrix<T>) -> Result<Self> {
        let (r, c) = scores.shape();
        if r != c {
            return Err(Error::Shape(format!("similarity matrix {r}x{c} is not square")));
        }
        for i in 0..r {
            for j in 0..r {
                let s = scores[(i, j)];
                if s != scores[(j, i)] || !(s >= -T::one() && s <= T::one()) {
                    return Err(Error::InvalidParameter(format!(
                        "similarity ({i},{j}) not symmetric or outside [-1,1]"
                    )));
                }
            }
        }
        Ok(Self { scores })
    }

    pub fn n(&self) -> usize {
        self.scores.rows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.scores[(i, j)]
    }

    pub fn scores(&self) -> &Matrix<T> {
        &self.scores
    }

    /// Off-diagonal upper-triangle values that are strictly positive: the
    /// admissible edge universe, since θ must exceed 0.
    pub fn positive_pairs(&self) -> Vec<T> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let s = self.get(i, j);
                if s > T::zero() {
                    out.push(s);
                }
            }
        }
        out
    }

    fn count_at_least_positive(&self) -> usize {
        let n = self.n();
        (0..n)
            .map(|i| ((i + 1)..n).filter(|&j| self.get(i, j) > T::zero()).count())
            .sum()
    }

    /// Number of unordered pairs with similarity ≥ θ.
    pub fn count_at_least(&self, theta: T) -> usize {
        let n = self.n();
        (0..n)
            .map(|i| ((i + 1)..n).filter(|&j| self.get(i, j) >= theta).count())
            .sum()
    }
}

/// All pairwise cosine similarities between rows. Each unordered pair is
/// computed once and mirrored, so the result is bitwise symmetric and does
/// not depend on the number of worker threads.
pub fn similarity_matrix<T: Scalar>(ds: &Dataset<T>) -> SimilarityMatrix<T> {
    similarity_matrix_of(ds.features())
}

pub fn similarity_matrix_of<T: Scalar>(x: &Matrix<T>) -> SimilarityMatrix<T> {
    let n = x.rows();
    let norms: Vec<T> = (0..n).map(|i| dot(x.row(i), x.row(i))).collect();
    let upper: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| cosine_with_sq_norms(x.row(i), x.row(j), norms[i], norms[j]))
                .collect()
        })
        .collect();
    let mut scores = Matrix::zeros(n, n);
    for (i, row) in upper.into_iter().enumerate() {
        scores[(i, i)] = if norms[i] > T::zero() { T::one() } else { T::zero() };
        for (off, s) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            scores[(i, j)] = s;
            scores[(j, i)] = s;
        }
    }
    SimilarityMatrix { scores }
}

/// Undirected, unweighted graph over `n` nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentGraph<T> {
    n: usize,
    edges: Vec<(usize, usize)>,
    theta: T,
}

impl<T: Scalar> LatentGraph<T> {
    /// Builds a graph from arbitrary unordered pairs. Pairs are normalized to
    /// `(min, max)` and sorted; self-edges, duplicates and out-of-range nodes
    /// are rejected.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>, theta: T) -> Result<Self> {
        let mut edges: Vec<(usize, usize)> = edges.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        edges.sort_unstable();
        for w in edges.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidParameter(format!("duplicate edge {:?}", w[0])));
            }
        }
        if let Some(&(a, b)) = edges.iter().find(|&&(a, b)| a == b || b >= n) {
            return Err(Error::InvalidParameter(format!("invalid edge ({a},{b}) for {n} nodes")));
        }
        Ok(Self { n, edges, theta })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// Sorted adjacency lists.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj.iter_mut().for_each(|l| l.sort_unstable());
        adj
    }

    /// True when every edge clears the threshold in `sm`.
    pub fn verify_against(&self, sm: &SimilarityMatrix<T>) -> bool {
        sm.n() == self.n && self.edges.iter().all(|&(i, j)| sm.get(i, j) >= self.theta)
    }
}

fn check_theta<T: Scalar>(theta: T) -> Result<()> {
    if theta > T::zero() && theta <= T::one() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "theta must lie in (0, 1], got {theta}"
        )))
    }
}

/// Keeps every pair `i < j` with similarity ≥ θ. All `n` nodes remain, so
/// instances without a qualifying partner become isolated nodes.
pub fn threshold_graph<T: Scalar>(sm: &SimilarityMatrix<T>, theta: T) -> Result<LatentGraph<T>> {
    check_theta(theta)?;
    let n = sm.n();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if sm.get(i, j) >= theta {
                edges.push((i, j));
            }
        }
    }
    Ok(LatentGraph { n, edges, theta })
}

/// Fraction of the positive-similarity graph's edges that survive θ.
pub fn edge_retention<T: Scalar>(sm: &SimilarityMatrix<T>, theta: T) -> Result<f64> {
    check_theta(theta)?;
    let full = sm.count_at_least_positive();
    if full == 0 {
        return Err(Error::NoPositiveSimilarity);
    }
    Ok(sm.count_at_least(theta) as f64 / full as f64)
}

/// Empirical quantiles (linear interpolation between order statistics) of
/// the positive off-diagonal similarities, deduplicated, ascending.
pub fn theta_grid<T: Scalar>(sm: &SimilarityMatrix<T>, quantiles: &[f64]) -> Result<Vec<T>> {
    if quantiles.is_empty() {
        return Err(Error::InvalidParameter("empty quantile list".into()));
    }
    if quantiles.iter().any(|&q| !(q > 0.0 && q < 1.0)) || quantiles.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "quantiles must be strictly increasing and inside (0, 1)".into(),
        ));
    }
    let mut pos = sm.positive_pairs();
    if pos.is_empty() {
        return Err(Error::NoPositiveSimilarity);
    }
    pos.sort_unstable_by(|a, b| a.partial_cmp(b).expect("similarities are finite"));
    let mut out: Vec<T> = quantiles.iter().map(|&q| interpolated_quantile(&pos, q)).collect();
    out.dedup();
    Ok(out)
}

fn interpolated_quantile<T: Scalar>(sorted: &[T], q: f64) -> T {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = T::lit(pos - lo as f64);
    let v = sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
    // interpolation between two positives stays positive; clamp guards rounding
    v.max(sorted[lo]).min(sorted[hi])
}

/// Writes `# n=<N> theta=<θ>` followed by one `i<TAB>j<TAB>similarity` line
/// per edge.
pub fn write_edge_list<T: Scalar, W: Write>(
    g: &LatentGraph<T>,
    sm: &SimilarityMatrix<T>,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "# n={} theta={}", g.n(), g.theta())?;
    for &(i, j) in g.edges() {
        writeln!(w, "{i}\t{j}\t{}", sm.get(i, j))?;
    }
    w.flush()
}

pub fn save_edge_list<T: Scalar>(g: &LatentGraph<T>, sm: &SimilarityMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_edge_list(g, sm, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}
