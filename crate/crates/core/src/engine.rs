//! The tilted k-means solver: nearest-centroid assignment, tilted
//! mini-batch gradient refinement, and the t→0 baselines (Lloyd's
//! heuristic and plain SGD k-means).

use std::time::Instant;

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{sse, tilted_sse, MetricsBundle};
use crate::seeding::{d2_distances, kmeanspp_seed, squared_distance, Centroids};

/// Per-point cluster labels plus per-cluster membership lists.
///
/// Membership lists are sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub labels: Vec<usize>,
    pub members: Vec<Vec<usize>>,
}

impl Assignment {
    pub fn from_labels(labels: Vec<usize>, k: usize) -> Self {
        let mut members = vec![Vec::new(); k];
        for (i, &j) in labels.iter().enumerate() {
            members[j].push(i);
        }
        Self { labels, members }
    }
}

/// Solver selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Tilted k-means via mini-batch SGD.
    Tkm,
    /// SGD k-means without tilting (TKM at t = 0).
    Nf,
    /// Lloyd's heuristic (assignment + arithmetic-mean refinement).
    Lloyd,
}

/// Which population the tilted-gradient denominator Z_j sums over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Denominator {
    /// The literal formula: members' tilted terms plus one unit term per
    /// non-member of the whole dataset.
    #[default]
    Full,
    /// Batch-estimated: batch members' tilted terms plus one unit term per
    /// non-member batch point.
    Batch,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub k: usize,
    pub t: f64,
    /// Learning rate η.
    pub eta: f64,
    /// Epochs E per outer iteration.
    pub epochs: usize,
    pub batch_size: usize,
    /// Outer iteration budget T.
    pub max_iters: usize,
    /// Early-stop threshold on the relative objective change over the last
    /// 10 iterations; 0 disables early stopping.
    pub tol: f64,
    pub seed: u64,
    pub method: Method,
    #[serde(default)]
    pub denominator: Denominator,
}

impl SolverConfig {
    /// t actually used by the objective and gradients: `nf` and `lloyd`
    /// run untilted regardless of the configured t.
    pub fn effective_t(&self) -> f64 {
        match self.method {
            Method::Tkm => self.t,
            Method::Nf | Method::Lloyd => 0.0,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.k > n {
            return Err(Error::InvalidParameter(format!(
                "k must satisfy 1 <= k <= n, got k={}, n={n}",
                self.k
            )));
        }
        if self.t < 0.0 {
            return Err(Error::InvalidParameter(format!("t must be >= 0, got {}", self.t)));
        }
        if !(self.eta > 0.0) && self.method != Method::Lloyd {
            return Err(Error::InvalidParameter(format!("eta must be > 0, got {}", self.eta)));
        }
        if self.method != Method::Lloyd {
            if self.epochs == 0 {
                return Err(Error::InvalidParameter("epochs must be >= 1".into()));
            }
            if self.batch_size == 0 || self.batch_size > n {
                return Err(Error::InvalidParameter(format!(
                    "batch_size must satisfy 1 <= batch_size <= n, got {}, n={n}",
                    self.batch_size
                )));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        if self.tol < 0.0 {
            return Err(Error::InvalidParameter(format!("tol must be >= 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Outcome of one solve run.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub centroids: Centroids,
    pub assignment: Assignment,
    /// Tilted SSE after each outer iteration (plain SSE for `lloyd`/`nf`).
    pub objective_trace: Vec<f64>,
    /// Cumulative wall-clock milliseconds at the end of each iteration.
    pub iter_wall_ms: Vec<f64>,
    pub iterations_run: usize,
    pub wall_time: f64,
    pub metrics: MetricsBundle,
    /// Empty clusters reseeded to the farthest point during the run.
    pub empty_cluster_reseeds: usize,
    /// Uniform-fallback draws taken during k-means++ seeding.
    pub seed_uniform_fallbacks: usize,
}

/// Labels each point with its nearest centroid; ties break toward the
/// lowest cluster index.
pub fn assign(ds: &Dataset, cs: &Centroids) -> Result<Assignment> {
    if ds.d() != cs.d() {
        return Err(Error::DimensionMismatch { expected: ds.d(), got: cs.d() });
    }
    let labels = ds
        .rows()
        .map(|x| {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (j, c) in cs.centers().enumerate() {
                let d = squared_distance(x, c);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            best
        })
        .collect();
    Ok(Assignment::from_labels(labels, cs.k()))
}

/// Arithmetic-mean refinement. Empty clusters are reseeded to the row
/// farthest (in min squared distance) from the already-computed centers.
pub fn lloyd_update(ds: &Dataset, a: &Assignment, k: usize) -> Result<Centroids> {
    if a.labels.len() != ds.n() || a.members.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: a.members.len() });
    }
    let d = ds.d();
    let mut flat = vec![0.0; k * d];
    let mut empties = Vec::new();
    for (j, members) in a.members.iter().enumerate() {
        if members.is_empty() {
            empties.push(j);
            continue;
        }
        let c = &mut flat[j * d..(j + 1) * d];
        for &i in members {
            for (cm, xm) in c.iter_mut().zip(ds.row(i)) {
                *cm += xm;
            }
        }
        for cm in c.iter_mut() {
            *cm /= members.len() as f64;
        }
    }
    for &j in &empties {
        let filled: Vec<&[f64]> = (0..k)
            .filter(|jj| !a.members[*jj].is_empty() || *jj < j)
            .map(|jj| &flat[jj * d..(jj + 1) * d])
            .collect();
        let far = ds
            .rows()
            .enumerate()
            .max_by(|(_, x), (_, y)| {
                let dx = filled.iter().map(|c| squared_distance(x, c)).fold(f64::INFINITY, f64::min);
                let dy = filled.iter().map(|c| squared_distance(y, c)).fold(f64::INFINITY, f64::min);
                dx.total_cmp(&dy)
            })
            .map(|(i, _)| i)
            .expect("dataset nonempty");
        flat[j * d..(j + 1) * d].copy_from_slice(ds.row(far));
    }
    Centroids::from_flat(flat, k, d)
}

/// Tilted gradient of the per-cluster objective at `c_j`, restricted to a
/// batch of the cluster's members:
///
/// g = Σ_{i∈B_j} e^{t·f(x_i,c_j)} · 2(c_j − x_i) / Z_j
///
/// where Z_j sums the tilted terms of all members plus one unit term per
/// non-member (of the whole dataset, or of the batch when
/// `Denominator::Batch` is selected). Exponentials are max-shifted.
pub fn tilted_cluster_gradient(
    ds: &Dataset,
    a: &Assignment,
    cluster: usize,
    c_j: &[f64],
    t: f64,
    batch_members: &[usize],
    denominator: Denominator,
) -> Result<Vec<f64>> {
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!("t must be >= 0, got {t}")));
    }
    if c_j.len() != ds.d() {
        return Err(Error::DimensionMismatch { expected: ds.d(), got: c_j.len() });
    }
    for &i in batch_members {
        if a.labels[i] != cluster {
            return Err(Error::InvalidParameter(format!(
                "batch point {i} is not a member of cluster {cluster}"
            )));
        }
    }

    // log Z_j via max-shifted summation.
    let (z_members, unit_terms): (&[usize], usize) = match denominator {
        Denominator::Full => {
            let members = a.members[cluster].as_slice();
            (members, ds.n() - members.len())
        }
        // Only B_j is visible here, so batch mode normalizes over the
        // cluster's batch members alone. refine_sgd additionally counts
        // each non-member batch point as e⁰.
        Denominator::Batch => (batch_members, 0),
    };
    let log_z = log_z(ds, c_j, t, z_members, unit_terms);

    let mut g = vec![0.0; ds.d()];
    for &i in batch_members {
        let x = ds.row(i);
        let w = (t * squared_distance(x, c_j) - log_z).exp();
        for (gm, (cm, xm)) in g.iter_mut().zip(c_j.iter().zip(x)) {
            *gm += w * 2.0 * (cm - xm);
        }
    }
    Ok(g)
}

fn log_z(ds: &Dataset, c_j: &[f64], t: f64, tilted_members: &[usize], unit_terms: usize) -> f64 {
    let exps: Vec<f64> = tilted_members
        .iter()
        .map(|&i| t * squared_distance(ds.row(i), c_j))
        .collect();
    let mut shift = if unit_terms > 0 { 0.0 } else { f64::NEG_INFINITY };
    for &e in &exps {
        if e > shift {
            shift = e;
        }
    }
    let sum: f64 = exps.iter().map(|e| (e - shift).exp()).sum::<f64>()
        + unit_terms as f64 * (-shift).exp();
    shift + sum.ln()
}

// Gradient with an explicit unit-term count in Z, used by refine_sgd for
// the batch-estimated denominator.
fn gradient_with_units(
    ds: &Dataset,
    c_j: &[f64],
    t: f64,
    batch_members: &[usize],
    z_members: &[usize],
    unit_terms: usize,
) -> Vec<f64> {
    let lz = log_z(ds, c_j, t, z_members, unit_terms);
    let mut g = vec![0.0; ds.d()];
    for &i in batch_members {
        let x = ds.row(i);
        let w = (t * squared_distance(x, c_j) - lz).exp();
        for (gm, (cm, xm)) in g.iter_mut().zip(c_j.iter().zip(x)) {
            *gm += w * 2.0 * (cm - xm);
        }
    }
    g
}

/// Mini-batch SGD refinement (the refinement phase of the solver): for
/// each of E epochs, draw one batch uniformly without replacement from the
/// whole dataset and step every cluster whose batch intersection is
/// nonempty.
///
/// The mini-batch gradient is applied unscaled, as written; the implied
/// |B|/n factor on the expected gradient is absorbed by η.
pub fn refine_sgd(
    ds: &Dataset,
    a: &Assignment,
    cs: &Centroids,
    cfg: &SolverConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Centroids> {
    if cfg.method == Method::Lloyd {
        return Err(Error::InvalidParameter("refine_sgd requires method tkm or nf".into()));
    }
    let n = ds.n();
    if cfg.batch_size > n {
        return Err(Error::InvalidParameter(format!(
            "batch_size {} exceeds dataset size {n}",
            cfg.batch_size
        )));
    }
    let t = cfg.effective_t();
    let k = cs.k();
    let mut out = cs.clone();
    for _ in 0..cfg.epochs {
        let batch: Vec<usize> = sample_indices(rng, n, cfg.batch_size).into_iter().collect();
        let mut per_cluster: Vec<Vec<usize>> = vec![Vec::new(); k];
        for &i in &batch {
            per_cluster[a.labels[i]].push(i);
        }
        for (j, batch_j) in per_cluster.iter().enumerate() {
            if batch_j.is_empty() {
                continue;
            }
            let c_j = out.center(j).to_vec();
            let g = match cfg.denominator {
                Denominator::Full => {
                    let members = a.members[j].as_slice();
                    gradient_with_units(ds, &c_j, t, batch_j, members, n - members.len())
                }
                Denominator::Batch => {
                    gradient_with_units(ds, &c_j, t, batch_j, batch_j, batch.len() - batch_j.len())
                }
            };
            for (cm, gm) in out.center_mut(j).iter_mut().zip(&g) {
                *cm -= cfg.eta * gm;
            }
        }
    }
    Ok(out)
}

// Reseeds each empty cluster to the row with the largest current D² and
// re-assigns once. Returns the number of reseeded clusters.
fn reseed_empty_clusters(ds: &Dataset, a: &mut Assignment, cs: &mut Centroids) -> Result<usize> {
    let empties: Vec<usize> = a
        .members
        .iter()
        .enumerate()
        .filter(|(_, m)| m.is_empty())
        .map(|(j, _)| j)
        .collect();
    if empties.is_empty() {
        return Ok(0);
    }
    for &j in &empties {
        let d2 = d2_distances(ds, cs)?;
        let far = d2
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.total_cmp(b))
            .map(|(i, _)| i)
            .expect("dataset nonempty");
        cs.center_mut(j).copy_from_slice(ds.row(far));
    }
    *a = assign(ds, cs)?;
    Ok(empties.len())
}

/// Runs the full solver: k-means++ seeding, then alternating assignment
/// and refinement until the iteration budget or the early-stop window is
/// hit. Deterministic given (dataset, config).
pub fn solve(ds: &Dataset, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate(ds.n())?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seeded = kmeanspp_seed(ds, cfg.k, &mut rng)?;
    let mut cs = seeded.centroids;
    let t = cfg.effective_t();

    let mut trace = Vec::with_capacity(cfg.max_iters);
    let mut iter_wall_ms = Vec::with_capacity(cfg.max_iters);
    let mut reseeds = 0usize;
    let mut a = assign(ds, &cs)?;
    for it in 0..cfg.max_iters {
        if it > 0 {
            a = assign(ds, &cs)?;
        }
        reseeds += reseed_empty_clusters(ds, &mut a, &mut cs)?;
        cs = match cfg.method {
            Method::Lloyd => lloyd_update(ds, &a, cfg.k)?,
            Method::Tkm | Method::Nf => refine_sgd(ds, &a, &cs, cfg, &mut rng)?,
        };
        let obj = match cfg.method {
            Method::Lloyd => sse(ds, &a, &cs)?,
            _ => tilted_sse(t, ds, &a, &cs)?,
        };
        trace.push(obj);
        iter_wall_ms.push(start.elapsed().as_secs_f64() * 1e3);
        // Early stop: relative change over a 10-iteration window.
        if cfg.tol > 0.0 && it + 1 >= 11 {
            let prev = trace[trace.len() - 11];
            if ((obj - prev).abs() / (1.0 + prev.abs())) < cfg.tol {
                break;
            }
        }
    }
    a = assign(ds, &cs)?;
    reseeds += reseed_empty_clusters(ds, &mut a, &mut cs)?;

    let metrics = MetricsBundle::compute(t, ds, &a, &cs)?;
    Ok(SolveReport {
        centroids: cs,
        assignment: a,
        iterations_run: trace.len(),
        objective_trace: trace,
        iter_wall_ms,
        wall_time: start.elapsed().as_secs_f64(),
        metrics,
        empty_cluster_reseeds: reseeds,
        seed_uniform_fallbacks: seeded.uniform_fallbacks,
    })
}
