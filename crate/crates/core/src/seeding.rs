//! k-means++ initialization with D² sampling.
//!
//! Only the seeding phase lives here; the coordinate-descent loop that
//! follows it belongs to the solver in [`crate::engine`].

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// An ordered list of k cluster centers in the dataset's feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centroids {
    centers: Vec<f64>,
    k: usize,
    d: usize,
}

impl Centroids {
    pub fn from_flat(centers: Vec<f64>, k: usize, d: usize) -> Result<Self> {
        if k == 0 || d == 0 || centers.len() != k * d {
            return Err(Error::InvalidParameter(format!(
                "centroid buffer length {} does not equal k*d = {}",
                centers.len(),
                k * d
            )));
        }
        if centers.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("centroid contains a non-finite value".into()));
        }
        Ok(Self { centers, k, d })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        let d = rows.first().map_or(0, |r| r.len());
        let mut flat = Vec::with_capacity(k * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: r.len() });
            }
            flat.extend_from_slice(r);
        }
        Self::from_flat(flat, k, d)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn center(&self, j: usize) -> &[f64] {
        &self.centers[j * self.d..(j + 1) * self.d]
    }

    pub fn center_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.centers[j * self.d..(j + 1) * self.d]
    }

    pub fn centers(&self) -> impl Iterator<Item = &[f64]> {
        self.centers.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.centers
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// For each point, the squared distance to its nearest centroid.
pub fn d2_distances(ds: &Dataset, cs: &Centroids) -> Result<Vec<f64>> {
    if ds.d() != cs.d() {
        return Err(Error::DimensionMismatch { expected: ds.d(), got: cs.d() });
    }
    Ok(ds
        .rows()
        .map(|x| {
            cs.centers()
                .map(|c| squared_distance(x, c))
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

/// Result of k-means++ seeding.
#[derive(Debug, Clone)]
pub struct SeedResult {
    pub centroids: Centroids,
    /// Indices of the chosen rows, in selection order.
    pub chosen: Vec<usize>,
    /// Number of centers picked by the uniform fallback because all
    /// remaining D² mass was zero (duplicate-heavy data).
    pub uniform_fallbacks: usize,
}

/// k-means++ seeding: the first center is uniform over rows, each
/// subsequent center is a row sampled with probability proportional to its
/// squared distance to the nearest already-chosen center.
///
/// If the total D² mass hits zero before k centers are chosen, the
/// remaining centers are sampled uniformly from not-yet-chosen rows and
/// the fallback count is reported.
pub fn kmeanspp_seed(ds: &Dataset, k: usize, rng: &mut ChaCha8Rng) -> Result<SeedResult> {
    let n = ds.n();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "k must satisfy 1 <= k <= n, got k={k}, n={n}"
        )));
    }

    let mut chosen = Vec::with_capacity(k);
    let mut is_chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen.push(first);
    is_chosen[first] = true;

    // d2[i] = squared distance to the nearest chosen center so far.
    let mut d2: Vec<f64> = ds.rows().map(|x| squared_distance(x, ds.row(first))).collect();
    let mut uniform_fallbacks = 0usize;

    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                target -= w;
                if target < 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can exhaust the scan; fall back to the last positive weight.
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("total > 0"))
        } else {
            uniform_fallbacks += 1;
            let remaining: Vec<usize> = (0..n).filter(|&i| !is_chosen[i]).collect();
            remaining[sample_indices(rng, remaining.len(), 1).index(0)]
        };
        chosen.push(next);
        is_chosen[next] = true;
        let c = ds.row(next);
        for (i, w) in d2.iter_mut().enumerate() {
            let dist = squared_distance(ds.row(i), c);
            if dist < *w {
                *w = dist;
            }
        }
    }

    let d = ds.d();
    let mut flat = Vec::with_capacity(k * d);
    for &i in &chosen {
        flat.extend_from_slice(ds.row(i));
    }
    Ok(SeedResult {
        centroids: Centroids::from_flat(flat, k, d)?,
        chosen,
        uniform_fallbacks,
    })
}
