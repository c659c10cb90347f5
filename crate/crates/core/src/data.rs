//! Dataset ingestion, preprocessing, subsampling and synthetic blobs.
//!
//! All operations are pure: a [`Dataset`] is immutable once built and every
//! transformation returns a fresh value.

use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// A row-major matrix of `n` points with `d` real features each.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<f64>,
    column_names: Vec<String>,
    n: usize,
    d: usize,
}

impl Dataset {
    /// Builds a dataset from a flat row-major buffer.
    pub fn from_flat(points: Vec<f64>, n: usize, d: usize, column_names: Vec<String>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidParameter(format!(
                "dataset must have n >= 1 and d >= 1, got n={n}, d={d}"
            )));
        }
        if points.len() != n * d {
            return Err(Error::InvalidParameter(format!(
                "buffer length {} does not equal n*d = {}",
                points.len(),
                n * d
            )));
        }
        if column_names.len() != d {
            return Err(Error::InvalidParameter(format!(
                "expected {d} column names, got {}",
                column_names.len()
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("dataset contains a non-finite value".into()));
        }
        Ok(Self { points, column_names, n, d })
    }

    /// Builds a dataset from explicit rows, naming columns `x0..x{d-1}`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.len());
        let names = (0..d).map(|i| format!("x{i}")).collect();
        let mut flat = Vec::with_capacity(n * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: r.len() });
            }
            flat.extend_from_slice(r);
        }
        Self::from_flat(flat, n, d, names)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.points
    }
}

/// Column selection and preprocessing applied at load time.
///
/// When both flags are set, standardization runs first and unit
/// normalization second, so the final rows are unit-norm.
#[derive(Debug, Clone, Default)]
pub struct PreprocessSpec {
    pub selected_columns: Vec<String>,
    pub standardize: bool,
    pub unit_normalize: bool,
}

/// Loads the selected columns of a CSV file, dropping rows with missing or
/// non-numeric values in any selected column.
///
/// Returns the dataset and the number of dropped rows.
///
/// Expected format: UTF-8, first row is a header, comma separator, `.`
/// decimal point, plain unquoted fields.
pub fn load_csv(path: &Path, spec: &PreprocessSpec) -> Result<(Dataset, usize)> {
    if spec.selected_columns.is_empty() {
        return Err(Error::InvalidParameter("selected_columns must be nonempty".into()));
    }
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Csv(format!("{}: empty file", path.display())))?;
    let header_fields: Vec<&str> = header.split(',').map(str::trim).collect();

    let mut col_idx = Vec::with_capacity(spec.selected_columns.len());
    for name in &spec.selected_columns {
        let idx = header_fields
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.clone()))?;
        col_idx.push(idx);
    }

    let d = col_idx.len();
    let mut flat = Vec::new();
    let mut dropped = 0usize;
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let mut row = Vec::with_capacity(d);
        let mut ok = true;
        for &idx in &col_idx {
            match fields.get(idx).and_then(|f| f.parse::<f64>().ok()) {
                Some(v) if v.is_finite() => row.push(v),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            flat.extend_from_slice(&row);
        } else {
            dropped += 1;
        }
    }

    let n = flat.len() / d;
    if n == 0 {
        return Err(Error::EmptyAfterDrop { dropped });
    }
    let mut ds = Dataset::from_flat(flat, n, d, spec.selected_columns.clone())?;
    if spec.standardize {
        ds = standardize(&ds)?;
    }
    if spec.unit_normalize {
        ds = unit_normalize(&ds)?;
    }
    Ok((ds, dropped))
}

/// Z-scores each column to mean 0 and population standard deviation 1.
pub fn standardize(ds: &Dataset) -> Result<Dataset> {
    let (n, d) = (ds.n, ds.d);
    let mut means = vec![0.0; d];
    for row in ds.rows() {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut vars = vec![0.0; d];
    for row in ds.rows() {
        for ((s, v), m) in vars.iter_mut().zip(row).zip(&means) {
            let diff = v - m;
            *s += diff * diff;
        }
    }
    let mut stds = vec![0.0; d];
    for (j, s) in vars.iter().enumerate() {
        let sigma = (s / n as f64).sqrt();
        if sigma == 0.0 {
            return Err(Error::ZeroVariance(ds.column_names[j].clone()));
        }
        stds[j] = sigma;
    }
    let mut flat = Vec::with_capacity(n * d);
    for row in ds.rows() {
        for j in 0..d {
            flat.push((row[j] - means[j]) / stds[j]);
        }
    }
    Dataset::from_flat(flat, n, d, ds.column_names.clone())
}

/// Scales each row to unit Euclidean norm.
pub fn unit_normalize(ds: &Dataset) -> Result<Dataset> {
    let (n, d) = (ds.n, ds.d);
    let mut flat = Vec::with_capacity(n * d);
    for (i, row) in ds.rows().enumerate() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroNormRow(i));
        }
        flat.extend(row.iter().map(|v| v / norm));
    }
    Dataset::from_flat(flat, n, d, ds.column_names.clone())
}

/// Samples `m` rows uniformly without replacement, deterministically per seed.
pub fn subsample(ds: &Dataset, m: usize, seed: u64) -> Result<Dataset> {
    if m == 0 || m > ds.n {
        return Err(Error::SampleTooLarge { m, n: ds.n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = sample_indices(&mut rng, ds.n, m).into_iter().collect();
    idx.sort_unstable();
    let mut flat = Vec::with_capacity(m * ds.d);
    for &i in &idx {
        flat.extend_from_slice(ds.row(i));
    }
    Dataset::from_flat(flat, m, ds.d, ds.column_names.clone())
}

/// Generates `k` isotropic Gaussian blobs of near-equal size (sizes differ by
/// at most one). Blob centers are drawn uniformly in [-10, 10]^d.
///
/// Returns the dataset and the true blob label of each row.
pub fn make_blobs(
    n: usize,
    k: usize,
    d: usize,
    spread: f64,
    seed: u64,
) -> Result<(Dataset, Vec<usize>)> {
    if k == 0 || n < k || d == 0 {
        return Err(Error::InvalidParameter(format!(
            "make_blobs requires n >= k >= 1 and d >= 1, got n={n}, k={k}, d={d}"
        )));
    }
    if !(spread > 0.0) {
        return Err(Error::InvalidParameter(format!("spread must be > 0, got {spread}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = Vec::with_capacity(k * d);
    for _ in 0..k * d {
        centers.push(rng.random_range(-10.0..10.0));
    }
    let base = n / k;
    let extra = n % k;
    let mut flat = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for j in 0..k {
        let size = base + usize::from(j < extra);
        for _ in 0..size {
            for m in 0..d {
                let noise: f64 = StandardNormal.sample(&mut rng);
                flat.push(centers[j * d + m] + spread * noise);
            }
            labels.push(j);
        }
    }
    let names = (0..d).map(|i| format!("x{i}")).collect();
    let ds = Dataset::from_flat(flat, n, d, names)?;
    Ok((ds, labels))
}
