use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Studentized range quantiles at infinite degrees of freedom divided by √2,
/// for 2..=20 methods. Obtained by root-finding
/// `k∫φ(z)[Φ(z)−Φ(z−q)]^{k−1}dz = 1−α` with adaptive quadrature; they agree
/// with the commonly tabulated Nemenyi values to the printed precision.
const Q_05: [f64; 19] = [
    1.959964, 2.343701, 2.569032, 2.727774, 2.849705, 2.948320, 3.030878, 3.101730, 3.163684, 3.218654, 3.268004,
    3.312739, 3.353618, 3.391230, 3.426041, 3.458425, 3.488685, 3.517073, 3.543799,
];
const Q_01: [f64; 19] = [
    2.575829, 2.913494, 3.113250, 3.254686, 3.363740, 3.452213, 3.526471, 3.590339, 3.646292, 3.696021, 3.740733,
    3.781318, 3.818451, 3.852654, 3.884343, 3.913850, 3.941446, 3.967357, 3.991770,
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Alpha {
    #[serde(rename = "0.05")]
    P05,
    #[serde(rename = "0.01")]
    P01,
}

impl Alpha {
    pub fn value(self) -> f64 {
        match self {
            Alpha::P05 => 0.05,
            Alpha::P01 => 0.01,
        }
    }

    /// `q_α(m)` for `m` methods.
    pub fn q(self, m: usize) -> Result<f64> {
        let table = match self {
            Alpha::P05 => &Q_05,
            Alpha::P01 => &Q_01,
        };
        m.checked_sub(2)
            .and_then(|i| table.get(i).copied())
            .ok_or_else(|| Error::InvalidParameter(format!("Nemenyi table covers 2..=20 methods, got {m}")))
    }
}

impl FromStr for Alpha {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "0.05" | ".05" => Ok(Alpha::P05),
            "0.01" | ".01" => Ok(Alpha::P01),
            other => Err(Error::InvalidParameter(format!(
                "alpha must be 0.05 or 0.01, got `{other}`"
            ))),
        }
    }
}

/// Critical distance `q_α(m)·√(m(m+1)/(6·nd))`: two methods differ when their
/// average ranks are further apart than this.
pub fn nemenyi_cd(m: usize, nd: usize, alpha: Alpha) -> Result<f64> {
    if nd < 1 {
        return Err(Error::InvalidParameter("need at least one dataset".into()));
    }
    let q = alpha.q(m)?;
    Ok(q * ((m * (m + 1)) as f64 / (6 * nd) as f64).sqrt())
}

/// Methods × datasets score table, higher is better.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable<T> {
    methods: Vec<String>,
    datasets: Vec<String>,
    scores: Vec<Vec<T>>,
}

impl<T: Scalar> ScoreTable<T> {
    pub fn new(methods: Vec<String>, datasets: Vec<String>, scores: Vec<Vec<T>>) -> Result<Self> {
        if methods.len() < 2 || datasets.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "score table needs ≥ 2 methods and ≥ 2 datasets, got {}×{}",
                methods.len(),
                datasets.len()
            )));
        }
        if scores.len() != methods.len() || scores.iter().any(|r| r.len() != datasets.len()) {
            return Err(Error::Shape("score table dimensions".into()));
        }
        if scores.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("score table has a non-finite cell".into()));
        }
        Ok(Self {
            methods,
            datasets,
            scores,
        })
    }

    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    pub fn datasets(&self) -> &[String] {
        &self.datasets
    }

    pub fn score(&self, method: usize, dataset: usize) -> T {
        self.scores[method][dataset]
    }
}

/// Ranks with 1 for the highest value; ties share the mean of their positions.
pub fn rank_descending<T: Scalar>(values: &[T]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).expect("finite scores"));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let mid = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mid;
        }
        start = end;
    }
    ranks
}

/// Average rank of each method across datasets.
pub fn friedman_ranks<T: Scalar>(table: &ScoreTable<T>) -> Vec<f64> {
    let m = table.methods.len();
    let nd = table.datasets.len();
    let mut sums = vec![0.0; m];
    for j in 0..nd {
        let column: Vec<T> = (0..m).map(|i| table.scores[i][j]).collect();
        for (s, r) in sums.iter_mut().zip(rank_descending(&column)) {
            *s += r;
        }
    }
    sums.into_iter().map(|s| s / nd as f64).collect()
}

/// `sig[i][j]` is true when methods `i` and `j` differ by more than `cd`.
pub fn significance_matrix(avg_ranks: &[f64], cd: f64) -> Vec<Vec<bool>> {
    avg_ranks
        .iter()
        .map(|a| avg_ranks.iter().map(|b| (a - b).abs() > cd).collect())
        .collect()
}

/// Reads a score table: header row is a corner label followed by dataset
/// names; every other row is a method name followed by its scores.
pub fn read_score_table<T: Scalar, R: Read>(reader: R) -> Result<ScoreTable<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.len() < 3 {
        return Err(Error::InvalidParameter(
            "score table header needs a corner cell and at least two datasets".into(),
        ));
    }
    let datasets = header[1..].to_vec();
    let mut methods = Vec::new();
    let mut scores = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        if rec.len() != header.len() {
            return Err(Error::RaggedRow {
                row,
                found: rec.len(),
                expected: header.len(),
            });
        }
        methods.push(rec[0].to_owned());
        let parsed = rec
            .iter()
            .enumerate()
            .skip(1)
            .map(|(c, cell)| parse_finite(cell, row, &header[c]))
            .collect::<Result<Vec<T>>>()?;
        scores.push(parsed);
    }
    ScoreTable::new(methods, datasets, scores)
}

/// Per-fold scores of several methods: one column per method, one row per fold.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldScores<T> {
    pub methods: Vec<String>,
    pub columns: Vec<Vec<T>>,
}

impl<T: Scalar> FoldScores<T> {
    pub fn column(&self, method: &str) -> Option<&[T]> {
        self.methods
            .iter()
            .position(|m| m == method)
            .map(|i| self.columns[i].as_slice())
    }
}

pub fn read_fold_scores<T: Scalar, R: Read>(reader: R) -> Result<FoldScores<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let methods: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let mut columns = vec![Vec::new(); methods.len()];
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        if rec.len() != methods.len() {
            return Err(Error::RaggedRow {
                row,
                found: rec.len(),
                expected: methods.len(),
            });
        }
        for (c, cell) in rec.iter().enumerate() {
            columns[c].push(parse_finite(cell, row, &methods[c])?);
        }
    }
    Ok(FoldScores { methods, columns })
}

fn parse_finite<T: Scalar>(cell: &str, row: usize, column: &str) -> Result<T> {
    cell.parse::<T>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::ParseCell {
            row,
            column: column.to_owned(),
            value: cell.to_owned(),
        })
}
