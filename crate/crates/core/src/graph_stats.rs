//! Topology statistics of latent graphs: label homophily, triangle density,
//! degree assortativity, centralities and connectivity.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent_graph::LatentGraph;
use crate::scalar::Scalar;

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 1000;

/// Summary row for one latent graph. Serializes with snake_case column names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub homophily: f64,
    pub heterophily: f64,
    pub transitivity: f64,
    /// `None` when the degree variance over edge endpoints is zero.
    pub assortativity: Option<f64>,
    #[serde(rename = "global_clustering_coefficient")]
    pub avg_clustering: f64,
    pub avg_degree_centrality: f64,
    pub avg_eigenvector_centrality: f64,
    pub avg_closeness_centrality: f64,
    #[serde(rename = "num_connected_components")]
    pub n_components: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diameter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub avg_shortest_path: Option<f64>,
}

/// Every statistic at once. Fails on edgeless graphs, where homophily is
/// undefined.
pub fn graph_stats<T: Scalar>(g: &LatentGraph<T>, labels: &[usize]) -> Result<GraphStats> {
    let (homophily, heterophily) = homophily(g, labels)?;
    let cent = centralities(g)?;
    let (n_components, _) = connected_components(g);
    let (diameter, avg_shortest_path) = if n_components == 1 {
        let (d, a) = diameter_and_avg_path(g)?;
        (Some(d), Some(a))
    } else {
        (None, None)
    };
    Ok(GraphStats {
        nodes: g.n(),
        edges: g.n_edges(),
        homophily,
        heterophily,
        transitivity: transitivity(g),
        assortativity: degree_assortativity(g),
        avg_clustering: avg_clustering(g),
        avg_degree_centrality: cent.avg_degree,
        avg_eigenvector_centrality: cent.avg_eigenvector,
        avg_closeness_centrality: cent.avg_closeness,
        n_components,
        diameter,
        avg_shortest_path,
    })
}

/// Edge homophily: share of edges joining same-label endpoints, and its
/// complement.
pub fn homophily<T: Scalar>(g: &LatentGraph<T>, labels: &[usize]) -> Result<(f64, f64)> {
    if labels.len() != g.n() {
        return Err(Error::Shape(format!("{} labels for {} nodes", labels.len(), g.n())));
    }
    if g.n_edges() == 0 {
        return Err(Error::EdgelessGraph("homophily"));
    }
    let same = g.edges().iter().filter(|&&(a, b)| labels[a] == labels[b]).count();
    let h = same as f64 / g.n_edges() as f64;
    Ok((h, 1.0 - h))
}

/// Per-node triangle counts.
fn triangles_per_node(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut marks = vec![false; n];
    let mut tri = vec![0usize; n];
    for v in 0..n {
        for &u in &adj[v] {
            marks[u] = true;
        }
        for &u in adj[v].iter().filter(|&&u| u > v) {
            for &w in adj[u].iter().filter(|&&w| w > u) {
                if marks[w] {
                    tri[v] += 1;
                    tri[u] += 1;
                    tri[w] += 1;
                }
            }
        }
        for &u in &adj[v] {
            marks[u] = false;
        }
    }
    tri
}

fn pairs(d: usize) -> usize {
    d * d.saturating_sub(1) / 2
}

/// `3 · triangles / connected triples`, 0 without triples.
pub fn transitivity<T: Scalar>(g: &LatentGraph<T>) -> f64 {
    let adj = g.neighbors();
    let tri3: usize = triangles_per_node(&adj).iter().sum(); // each triangle counted at 3 nodes
    let triples: usize = adj.iter().map(|l| pairs(l.len())).sum();
    if triples == 0 {
        0.0
    } else {
        tri3 as f64 / triples as f64
    }
}

/// Mean local clustering over all nodes; nodes of degree < 2 contribute 0.
pub fn avg_clustering<T: Scalar>(g: &LatentGraph<T>) -> f64 {
    if g.n() == 0 {
        return 0.0;
    }
    let adj = g.neighbors();
    let tri = triangles_per_node(&adj);
    let total: f64 = adj
        .iter()
        .zip(&tri)
        .map(|(l, &t)| {
            let p = pairs(l.len());
            if p == 0 {
                0.0
            } else {
                t as f64 / p as f64
            }
        })
        .sum();
    total / g.n() as f64
}

/// Pearson correlation of the degrees at either end of each edge, counting
/// both orientations. `None` when there are no edges or the degree variance
/// is zero (e.g. regular graphs).
pub fn degree_assortativity<T: Scalar>(g: &LatentGraph<T>) -> Option<f64> {
    if g.n_edges() == 0 {
        return None;
    }
    let deg = g.degrees();
    let m2 = 2.0 * g.n_edges() as f64;
    let (mut s, mut s2, mut sxy) = (0.0, 0.0, 0.0);
    for &(a, b) in g.edges() {
        let (x, y) = (deg[a] as f64, deg[b] as f64);
        s += x + y;
        s2 += x * x + y * y;
        sxy += 2.0 * x * y;
    }
    let mean = s / m2;
    let var = s2 / m2 - mean * mean;
    // degrees are integers, so anything this small is exact cancellation
    if var <= 1e-12 * (s2 / m2) {
        return None;
    }
    Some((sxy / m2 - mean * mean) / var)
}

/// Union-find components; returns the count and a dense component id per node
/// (ids assigned in order of each component's smallest node).
pub fn connected_components<T: Scalar>(g: &LatentGraph<T>) -> (usize, Vec<usize>) {
    let n = g.n();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for &(a, b) in g.edges() {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut ids = vec![usize::MAX; n];
    let mut root_id = vec![usize::MAX; n];
    let mut count = 0;
    for v in 0..n {
        let r = find(&mut parent, v);
        if root_id[r] == usize::MAX {
            root_id[r] = count;
            count += 1;
        }
        ids[v] = root_id[r];
    }
    (count, ids)
}

fn bfs(adj: &[Vec<usize>], src: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    let mut queue = VecDeque::new();
    dist[src] = Some(0);
    queue.push_back(src);
    while let Some(v) = queue.pop_front() {
        let dv = dist[v].expect("queued nodes have a distance");
        for &u in &adj[v] {
            if dist[u].is_none() {
                dist[u] = Some(dv + 1);
                queue.push_back(u);
            }
        }
    }
    dist
}

/// Largest shortest-path distance and the mean over unordered distinct pairs.
pub fn diameter_and_avg_path<T: Scalar>(g: &LatentGraph<T>) -> Result<(usize, f64)> {
    let n = g.n();
    let adj = g.neighbors();
    let per_source: Vec<Option<(usize, usize)>> = (0..n)
        .into_par_iter()
        .map(|s| {
            let dist = bfs(&adj, s);
            let mut far = 0;
            let mut sum = 0;
            for d in dist {
                let d = d?;
                far = far.max(d);
                sum += d;
            }
            Some((far, sum))
        })
        .collect();
    let mut diameter = 0;
    let mut total = 0usize;
    for r in per_source {
        let (far, sum) = r.ok_or(Error::Disconnected)?;
        diameter = diameter.max(far);
        total += sum;
    }
    let npairs = n * n.saturating_sub(1);
    let avg = if npairs == 0 { 0.0 } else { total as f64 / npairs as f64 };
    Ok((diameter, avg))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Centralities {
    pub avg_degree: f64,
    pub avg_eigenvector: f64,
    pub avg_closeness: f64,
}

pub fn centralities<T: Scalar>(g: &LatentGraph<T>) -> Result<Centralities> {
    let n = g.n();
    if n < 2 {
        return Err(Error::InvalidParameter("centralities need at least 2 nodes".into()));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let (eig, _) = eigenvector_centrality(g)?;
    Ok(Centralities {
        avg_degree: mean(&degree_centrality(g)),
        avg_eigenvector: mean(&eig),
        avg_closeness: mean(&closeness_centrality(g)),
    })
}

/// `deg(v)/(n−1)` per node.
pub fn degree_centrality<T: Scalar>(g: &LatentGraph<T>) -> Vec<f64> {
    let denom = (g.n().max(2) - 1) as f64;
    g.degrees().into_iter().map(|d| d as f64 / denom).collect()
}

/// Closeness with within-component distances, scaled by the reachable share
/// of the graph (Wasserman–Faust), so disconnected graphs stay comparable.
/// Isolated nodes score 0.
pub fn closeness_centrality<T: Scalar>(g: &LatentGraph<T>) -> Vec<f64> {
    let n = g.n();
    let adj = g.neighbors();
    (0..n)
        .into_par_iter()
        .map(|v| {
            let (reach, sum) = bfs(&adj, v)
                .into_iter()
                .flatten()
                .fold((0usize, 0usize), |(r, s), d| (r + 1, s + d));
            if sum == 0 || n < 2 {
                0.0
            } else {
                let k = (reach - 1) as f64;
                (k / (n - 1) as f64) * (k / sum as f64)
            }
        })
        .collect()
}

/// Unit-norm, non-negative dominant eigenvector of the adjacency matrix and
/// its eigenvalue.
///
/// Equivalent to plain power iteration on the whole graph from the uniform
/// vector: only components attaining the largest eigenvalue keep mass, each
/// weighted by its overlap with the start vector. Computed per component on
/// `A + I` so bipartite components (eigenvalues ±λ) still converge. An
/// edgeless graph yields all zeros.
pub fn eigenvector_centrality<T: Scalar>(g: &LatentGraph<T>) -> Result<(Vec<f64>, f64)> {
    let n = g.n();
    if g.n_edges() == 0 {
        return Ok((vec![0.0; n], 0.0));
    }
    let adj = g.neighbors();
    let (count, ids) = connected_components(g);
    let mut members = vec![Vec::new(); count];
    for (v, &c) in ids.iter().enumerate() {
        members[c].push(v);
    }

    let mut local = vec![0.0; n];
    let mut lambdas = vec![0.0; count];
    for (c, nodes) in members.iter().enumerate() {
        if nodes.len() < 2 {
            continue;
        }
        lambdas[c] = power_iterate(&adj, nodes, &mut local)?;
    }
    let lmax = lambdas.iter().copied().fold(0.0, f64::max);
    let tie = 1e-9 * lmax.max(1.0);

    let mut x = vec![0.0; n];
    for (c, nodes) in members.iter().enumerate() {
        if nodes.len() < 2 || lambdas[c] < lmax - tie {
            continue;
        }
        let overlap: f64 = nodes.iter().map(|&v| local[v]).sum();
        for &v in nodes {
            x[v] = overlap * local[v];
        }
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
    Ok((x, lmax))
}

/// Power iteration on `A + I` restricted to one connected component. Writes
/// the unit eigenvector into `out` at the member positions and returns the
/// Rayleigh quotient of `A`.
fn power_iterate(adj: &[Vec<usize>], nodes: &[usize], out: &mut [f64]) -> Result<f64> {
    let start = 1.0 / (nodes.len() as f64).sqrt();
    for &v in nodes {
        out[v] = start;
    }
    let mut next = vec![0.0; nodes.len()];
    for _iter in 1..=POWER_MAX_ITER {
        for (slot, &v) in next.iter_mut().zip(nodes) {
            *slot = out[v] + adj[v].iter().map(|&u| out[u]).sum::<f64>();
        }
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut delta = 0.0;
        for (slot, &v) in next.iter_mut().zip(nodes) {
            *slot /= norm;
            delta += (*slot - out[v]).powi(2);
            out[v] = *slot;
        }
        if delta.sqrt() < POWER_TOL {
            let rayleigh: f64 = nodes
                .iter()
                .map(|&v| out[v] * adj[v].iter().map(|&u| out[u]).sum::<f64>())
                .sum();
            return Ok(rayleigh);
        }
    }
    Err(Error::NoConvergence {
        iterations: POWER_MAX_ITER,
    })
}
