//! Clustering-utility and fairness measurements.
//!
//! `f(x, c)` below always denotes the squared Euclidean distance from a
//! point to a centroid. All tilted quantities are evaluated with a max
//! shift so that exponents of several thousand do not overflow.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::engine::Assignment;
use crate::error::{Error, Result};
use crate::seeding::{squared_distance, Centroids};

/// Which distance enters the fairness variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceKind {
    /// Variance of squared distances f(x, c). The default.
    #[default]
    Squared,
    /// Variance of plain Euclidean distances, for comparison.
    Unsquared,
}

/// Summary metrics of one clustering solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsBundle {
    pub sse: f64,
    pub tilted_sse: f64,
    /// Population variance of squared distances within each cluster.
    pub per_cluster_variance: Vec<f64>,
    /// Max Euclidean (unsquared) distance within each cluster.
    pub per_cluster_max_distance: Vec<f64>,
    pub cluster_sizes: Vec<usize>,
}

impl MetricsBundle {
    pub fn compute(t: f64, ds: &Dataset, a: &Assignment, cs: &Centroids) -> Result<Self> {
        Ok(Self {
            sse: sse(ds, a, cs)?,
            tilted_sse: tilted_sse(t, ds, a, cs)?,
            per_cluster_variance: cluster_variances(ds, a, cs, DistanceKind::Squared)?,
            per_cluster_max_distance: max_distances(ds, a, cs)?,
            cluster_sizes: a.members.iter().map(Vec::len).collect(),
        })
    }
}

fn check_shapes(ds: &Dataset, a: &Assignment, cs: &Centroids) -> Result<()> {
    if ds.d() != cs.d() {
        return Err(Error::DimensionMismatch { expected: ds.d(), got: cs.d() });
    }
    if a.labels.len() != ds.n() || a.members.len() != cs.k() {
        return Err(Error::DimensionMismatch { expected: ds.n(), got: a.labels.len() });
    }
    Ok(())
}

/// Mean squared distance of each point to its assigned centroid:
/// (1/n) Σ_j Σ_{i∈S_j} ‖x_i − c_j‖².
pub fn sse(ds: &Dataset, a: &Assignment, cs: &Centroids) -> Result<f64> {
    check_shapes(ds, a, cs)?;
    let total: f64 = a
        .labels
        .iter()
        .enumerate()
        .map(|(i, &j)| squared_distance(ds.row(i), cs.center(j)))
        .sum();
    Ok(total / ds.n() as f64)
}

/// Tilted SSE: Σ_j (1/t)·log[(1/n)·Σ_{i=1}^n e^{t·f(x_i,c_j)·δ_ij}].
///
/// Non-members of a cluster contribute e⁰ = 1 to that cluster's sum.
/// At t = 0 this returns the plain SSE.
pub fn tilted_sse(t: f64, ds: &Dataset, a: &Assignment, cs: &Centroids) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!("t must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return sse(ds, a, cs);
    }
    check_shapes(ds, a, cs)?;
    let n = ds.n();
    let mut total = 0.0;
    for (j, members) in a.members.iter().enumerate() {
        let c = cs.center(j);
        let m = members.len();
        // Max-shifted log of Σ_{i∈S_j} e^{t f_i} + (n − m)·e⁰, minus log n.
        let mut shift = if m < n { 0.0 } else { f64::NEG_INFINITY };
        let exps: Vec<f64> = members
            .iter()
            .map(|&i| {
                let e = t * squared_distance(ds.row(i), c);
                if e > shift {
                    shift = e;
                }
                e
            })
            .collect();
        let mut sum: f64 = exps.iter().map(|e| (e - shift).exp()).sum();
        sum += (n - m) as f64 * (-shift).exp();
        total += (shift + sum.ln() - (n as f64).ln()) / t;
    }
    Ok(total)
}

/// Per-cluster population variance of the distances from members to the
/// centroid. Empty clusters report 0.
pub fn cluster_variances(
    ds: &Dataset,
    a: &Assignment,
    cs: &Centroids,
    kind: DistanceKind,
) -> Result<Vec<f64>> {
    check_shapes(ds, a, cs)?;
    let mut out = Vec::with_capacity(cs.k());
    for (j, members) in a.members.iter().enumerate() {
        if members.is_empty() {
            out.push(0.0);
            continue;
        }
        let c = cs.center(j);
        let vals: Vec<f64> = members
            .iter()
            .map(|&i| {
                let f = squared_distance(ds.row(i), c);
                match kind {
                    DistanceKind::Squared => f,
                    DistanceKind::Unsquared => f.sqrt(),
                }
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
        out.push(var);
    }
    Ok(out)
}

/// Per-cluster maximum Euclidean distance from a member to the centroid.
/// Empty clusters report 0.
pub fn max_distances(ds: &Dataset, a: &Assignment, cs: &Centroids) -> Result<Vec<f64>> {
    check_shapes(ds, a, cs)?;
    Ok(a.members
        .iter()
        .enumerate()
        .map(|(j, members)| {
            members
                .iter()
                .map(|&i| squared_distance(ds.row(i), cs.center(j)).sqrt())
                .fold(0.0, f64::max)
        })
        .collect())
}

/// Tilted weights of a cluster's members: w_i = e^{t·f_i} / Σ e^{t·f}.
pub fn tilted_weights(t: f64, members: &[&[f64]], c: &[f64]) -> Result<Vec<f64>> {
    if members.is_empty() {
        return Err(Error::InvalidParameter("tilted_weights over empty members".into()));
    }
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!("t must be >= 0, got {t}")));
    }
    let exps: Vec<f64> = members.iter().map(|x| t * squared_distance(x, c)).collect();
    let shift = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = exps.iter().map(|e| (e - shift).exp()).collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    Ok(w)
}

/// Tilted empirical mean and variance of the squared distances from the
/// members to `c`.
pub fn tilted_mean_var(t: f64, members: &[&[f64]], c: &[f64]) -> Result<(f64, f64)> {
    let w = tilted_weights(t, members, c)?;
    let f: Vec<f64> = members.iter().map(|x| squared_distance(x, c)).collect();
    let mean: f64 = w.iter().zip(&f).map(|(wi, fi)| wi * fi).sum();
    let var: f64 = w.iter().zip(&f).map(|(wi, fi)| wi * (fi - mean) * (fi - mean)).sum();
    Ok((mean, var))
}
