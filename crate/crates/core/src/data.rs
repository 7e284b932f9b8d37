//! Tabular datasets: CSV ingestion, feature scaling and a Gaussian-blob
//! fixture generator.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{orthonormalize_rows, Matrix};
use crate::scalar::Scalar;

/// Instances × features matrix with dense class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    features: Matrix<T>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    feature_names: Vec<String>,
    label_column: String,
}

impl<T: Scalar> Dataset<T> {
    /// Builds a dataset, checking every invariant: finite features, labels in
    /// `0..C` with each class populated, `N ≥ 2`, `D ≥ 1`, `C ≥ 2`.
    pub fn new(
        features: Matrix<T>,
        labels: Vec<usize>,
        class_names: Vec<String>,
        feature_names: Vec<String>,
        label_column: impl Into<String>,
    ) -> Result<Self> {
        let (n, d) = features.shape();
        let c = class_names.len();
        if n < 2 {
            return Err(Error::InvalidDataset(format!("need at least 2 instances, got {n}")));
        }
        if d < 1 {
            return Err(Error::InvalidDataset("need at least 1 feature".into()));
        }
        if c < 2 {
            return Err(Error::InvalidDataset(format!("need at least 2 classes, got {c}")));
        }
        if labels.len() != n {
            return Err(Error::InvalidDataset(format!(
                "{} labels for {n} instances",
                labels.len()
            )));
        }
        if feature_names.len() != d {
            return Err(Error::InvalidDataset(format!(
                "{} feature names for {d} features",
                feature_names.len()
            )));
        }
        let mut counts = vec![0usize; c];
        for &y in &labels {
            if y >= c {
                return Err(Error::InvalidDataset(format!("label {y} outside 0..{c}")));
            }
            counts[y] += 1;
        }
        if let Some(k) = counts.iter().position(|&n| n == 0) {
            return Err(Error::InvalidDataset(format!(
                "class `{}` has no instances",
                class_names[k]
            )));
        }
        if !features.is_finite() {
            return Err(Error::InvalidDataset("non-finite feature value".into()));
        }
        Ok(Self {
            features,
            labels,
            class_names,
            feature_names,
            label_column: label_column.into(),
        })
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_column(&self) -> &str {
        &self.label_column
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn d(&self) -> usize {
        self.features.cols()
    }

    pub fn c(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.c()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Same features and metadata with a different label vector.
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Self> {
        Self::new(
            self.features.clone(),
            labels,
            self.class_names.clone(),
            self.feature_names.clone(),
            self.label_column.clone(),
        )
    }

    /// Reorders instances: row `i` of the result is row `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n() {
            return Err(Error::Shape("permutation length".into()));
        }
        Self::new(
            self.features.select_rows(order),
            order.iter().map(|&i| self.labels[i]).collect(),
            self.class_names.clone(),
            self.feature_names.clone(),
            self.label_column.clone(),
        )
    }
}

#[derive(Clone, Debug)]
pub struct CsvOptions {
    pub label_column: String,
    pub delimiter: u8,
    /// Reject classes with fewer than two instances.
    pub strict: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            label_column: "label".into(),
            delimiter: b',',
            strict: false,
        }
    }
}

pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, opts)
}

/// Parses a header-first CSV. Labels are mapped to dense indices in order of
/// first appearance; row order is preserved.
pub fn read_csv<T: Scalar, R: Read>(reader: R, opts: &CsvOptions) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let hits: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| **h == opts.label_column)
        .map(|(i, _)| i)
        .collect();
    let label_idx = match hits.as_slice() {
        [] => return Err(Error::MissingLabelColumn(opts.label_column.clone())),
        [i] => *i,
        _ => return Err(Error::DuplicateLabelColumn(opts.label_column.clone())),
    };
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut class_index: HashMap<String, usize> = HashMap::new();

    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                row,
                found: record.len(),
                expected: header.len(),
            });
        }
        for (i, cell) in record.iter().enumerate() {
            if i == label_idx {
                let next = class_names.len();
                let y = *class_index.entry(cell.to_owned()).or_insert_with(|| {
                    class_names.push(cell.to_owned());
                    next
                });
                labels.push(y);
                continue;
            }
            let v = cell
                .parse::<T>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::ParseCell {
                    row,
                    column: header[i].clone(),
                    value: cell.to_owned(),
                })?;
            values.push(v);
        }
    }

    if opts.strict {
        let mut counts = vec![0usize; class_names.len()];
        labels.iter().for_each(|&y| counts[y] += 1);
        if let Some((k, &count)) = counts.iter().enumerate().find(|(_, &c)| c < 2) {
            return Err(Error::ClassTooSmall {
                class: class_names[k].clone(),
                count,
                required: 2,
            });
        }
    }

    let features = Matrix::from_vec(labels.len(), feature_names.len(), values)?;
    Dataset::new(features, labels, class_names, feature_names, opts.label_column.clone())
}

pub fn write_csv<T: Scalar>(ds: &Dataset<T>, path: impl AsRef<Path>, delimiter: u8) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(ds, file, delimiter)
}

/// Writes features followed by the label column. Values use the shortest
/// representation that parses back to the identical bit pattern.
pub fn write_csv_to<T: Scalar, W: Write>(ds: &Dataset<T>, writer: W, delimiter: u8) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
    let mut header: Vec<&str> = ds.feature_names.iter().map(String::as_str).collect();
    header.push(&ds.label_column);
    wtr.write_record(&header)?;
    let mut record: Vec<String> = Vec::with_capacity(ds.d() + 1);
    for i in 0..ds.n() {
        record.clear();
        record.extend(ds.features.row(i).iter().map(|v| v.to_string()));
        record.push(ds.class_names[ds.labels[i]].clone());
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Standardize {
    #[default]
    None,
    Zscore,
}

impl std::str::FromStr for Standardize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "zscore" => Ok(Self::Zscore),
            other => Err(Error::InvalidParameter(format!("unknown standardize mode `{other}`"))),
        }
    }
}

/// Per-feature z-scoring with the population standard deviation; constant
/// features become all-zero.
pub fn standardize<T: Scalar>(ds: &Dataset<T>, mode: Standardize) -> Dataset<T> {
    match mode {
        Standardize::None => ds.clone(),
        Standardize::Zscore => {
            let (n, d) = ds.features.shape();
            let nf = T::from_usize_lossy(n);
            let mut out = ds.features.clone();
            for j in 0..d {
                let mean = (0..n).map(|i| ds.features[(i, j)]).sum::<T>() / nf;
                let var = (0..n)
                    .map(|i| {
                        let c = ds.features[(i, j)] - mean;
                        c * c
                    })
                    .sum::<T>()
                    / nf;
                let std = var.sqrt();
                for i in 0..n {
                    out[(i, j)] = if std > T::zero() {
                        (ds.features[(i, j)] - mean) / std
                    } else {
                        T::zero()
                    };
                }
            }
            Dataset {
                features: out,
                ..ds.clone()
            }
        }
    }
}

/// `c` unit-variance isotropic Gaussian clusters whose centers are pairwise
/// at least `separation` apart. Instance `i` belongs to class `i mod c`.
///
/// When `c ≤ d` the centers sit at distance `separation/√2` from the origin
/// along mutually orthogonal random directions, so every pair of centers is
/// exactly `separation` apart and clusters also differ in direction (which
/// cosine similarity can see). Otherwise centers are rejection-sampled.
pub fn synth_blobs<T: Scalar>(n: usize, d: usize, c: usize, separation: f64, seed: u64) -> Result<Dataset<T>> {
    if c < 2 || n < c || d < 1 || !(separation > 0.0) || !separation.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "synth_blobs needs n ≥ c ≥ 2, d ≥ 1, separation > 0 (got n={n}, d={d}, c={c}, separation={separation})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = if c <= d {
        let mut dirs = Matrix::<f64>::from_fn(c, d, |_, _| StandardNormal.sample(&mut rng));
        while orthonormalize_rows(&mut dirs) < c {
            dirs = Matrix::from_fn(c, d, |_, _| StandardNormal.sample(&mut rng));
        }
        dirs.map(|v| v * separation / std::f64::consts::SQRT_2)
    } else {
        rejection_centers(c, d, separation, &mut rng)?
    };

    let mut features = Matrix::<T>::zeros(n, d);
    let labels: Vec<usize> = (0..n).map(|i| i % c).collect();
    for (i, &y) in labels.iter().enumerate() {
        let center = centers.row(y);
        for (j, v) in features.row_mut(i).iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = T::lit(center[j] + z);
        }
    }
    Dataset::new(
        features,
        labels,
        (0..c).map(|k| format!("class_{k}")).collect(),
        (0..d).map(|j| format!("f{j}")).collect(),
        "label",
    )
}

fn rejection_centers(c: usize, d: usize, separation: f64, rng: &mut ChaCha8Rng) -> Result<Matrix<f64>> {
    let mut radius = separation * c as f64;
    for _round in 0..20 {
        let unif = Uniform::new_inclusive(-radius, radius).expect("finite radius");
        for _attempt in 0..1000 {
            let cand = Matrix::from_fn(c, d, |_, _| unif.sample(rng));
            let ok = (0..c).all(|a| {
                ((a + 1)..c).all(|b| {
                    let dist2: f64 = cand.row(a).iter().zip(cand.row(b)).map(|(x, y)| (x - y).powi(2)).sum();
                    dist2.sqrt() >= separation
                })
            });
            if ok {
                return Ok(cand);
            }
        }
        radius *= 2.0;
    }
    Err(Error::InvalidParameter(format!(
        "could not place {c} centers {separation} apart in {d} dimensions"
    )))
}
