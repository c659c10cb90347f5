//! Experiment runner for tilted k-means: t-sweeps with seed-averaged
//! metrics, convergence traces, centroid trajectories over a geometric
//! t-grid, and runtime-scaling measurements.
//!
//! All outputs are plain CSV/JSON so any plotting tool can consume them.

use std::fs;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use tkm_core::data::{load_csv, make_blobs, subsample, Dataset, PreprocessSpec};
use tkm_core::engine::{solve, Denominator, Method, SolveReport, SolverConfig};

pub type Result<T> = anyhow::Result<T>;

/// Source data for an experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        columns: Vec<String>,
        #[serde(default)]
        standardize: bool,
        #[serde(default)]
        unit_normalize: bool,
    },
    Blobs {
        n: usize,
        blobs: usize,
        d: usize,
        spread: f64,
    },
}

/// Solver settings shared by every run of an experiment; k, t and the
/// per-run seed are filled in by the sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverTemplate {
    pub eta: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub max_iters: usize,
    #[serde(default)]
    pub tol: f64,
    pub seed: u64,
    pub method: Method,
    #[serde(default)]
    pub denominator: Denominator,
}

impl SolverTemplate {
    pub fn config(&self, k: usize, t: f64, seed: u64) -> SolverConfig {
        SolverConfig {
            k,
            t,
            eta: self.eta,
            epochs: self.epochs,
            batch_size: self.batch_size,
            max_iters: self.max_iters,
            tol: self.tol,
            seed,
            method: self.method,
            denominator: self.denominator,
        }
    }
}

/// A full sweep: for each (k, t, repeat) subsample with a derived seed,
/// solve, and aggregate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub dataset: DatasetSource,
    /// Subsample size m; omit to use the full dataset.
    #[serde(default)]
    pub sample_size: Option<usize>,
    pub repeats: usize,
    pub k: Vec<usize>,
    pub t: Vec<f64>,
    pub solver: SolverTemplate,
    pub output_dir: PathBuf,
}

impl ExperimentSpec {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(toml::from_str(&text)?)
    }

    fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            anyhow::bail!("repeats must be >= 1");
        }
        if self.k.is_empty() || self.t.is_empty() {
            anyhow::bail!("k and t lists must be nonempty");
        }
        if self.t.iter().any(|&t| t < 0.0) {
            anyhow::bail!("all t values must be >= 0");
        }
        Ok(())
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Run seed for one (k, t, repeat) cell: a splitmix64 fold over the base
/// seed and the cell coordinates (t enters via its IEEE bit pattern).
pub fn derive_seed(base: u64, k: usize, t: f64, repeat: usize) -> u64 {
    let mut h = splitmix64(base);
    for v in [k as u64, t.to_bits(), repeat as u64] {
        h = splitmix64(h ^ v);
    }
    h
}

/// Geometric grid of `count` points from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 1);
    if count == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).powf(1.0 / (count - 1) as f64);
    (0..count).map(|i| lo * ratio.powi(i as i32)).collect()
}

fn load_source(source: &DatasetSource, base_seed: u64) -> Result<Dataset> {
    match source {
        DatasetSource::Csv { path, columns, standardize, unit_normalize } => {
            let spec = PreprocessSpec {
                selected_columns: columns.clone(),
                standardize: *standardize,
                unit_normalize: *unit_normalize,
            };
            let (ds, _dropped) = load_csv(path, &spec)?;
            Ok(ds)
        }
        DatasetSource::Blobs { n, blobs, d, spread } => {
            let (ds, _) = make_blobs(*n, *blobs, *d, *spread, base_seed)?;
            Ok(ds)
        }
    }
}

/// One solved cell of the sweep.
#[derive(Debug)]
pub struct RunOutcome {
    pub k: usize,
    pub t: f64,
    pub repeat: usize,
    pub seed: u64,
    pub report: SolveReport,
}

/// The deterministic part of one run, written to `result_*.json`.
#[derive(Debug, Serialize)]
struct RunResultJson<'a> {
    config: &'a SolverConfig,
    centroids: Vec<Vec<f64>>,
    metrics: &'a tkm_core::metrics::MetricsBundle,
    iterations_run: usize,
    empty_cluster_reseeds: usize,
    seed_uniform_fallbacks: usize,
}

fn centroid_rows(report: &SolveReport) -> Vec<Vec<f64>> {
    report.centroids.centers().map(<[f64]>::to_vec).collect()
}

/// Serializes the deterministic portion of a solve run as pretty JSON.
pub fn result_json(cfg: &SolverConfig, report: &SolveReport) -> String {
    let res = RunResultJson {
        config: cfg,
        centroids: centroid_rows(report),
        metrics: &report.metrics,
        iterations_run: report.iterations_run,
        empty_cluster_reseeds: report.empty_cluster_reseeds,
        seed_uniform_fallbacks: report.seed_uniform_fallbacks,
    };
    let mut s = serde_json::to_string_pretty(&res).expect("serializable");
    s.push('\n');
    s
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("CLUSTER_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| anyhow::anyhow!("CLUSTER_THREADS must be a positive integer"))?;
        if n == 0 {
            anyhow::bail!("CLUSTER_THREADS must be a positive integer");
        }
        builder = builder.num_threads(n);
    }
    Ok(builder.build()?)
}

/// Runs the sweep and writes `summary.csv`, `trace.csv` and one
/// `result_k{k}_t{t}_r{rep}.json` per run into the output directory.
/// Runs execute in a worker pool (capped by `CLUSTER_THREADS`); writes are
/// serialized in a fixed order so everything except the trace's wall-clock
/// column is byte-deterministic.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<RunOutcome>> {
    spec.validate()?;
    fs::create_dir_all(&spec.output_dir)?;
    let base = load_source(&spec.dataset, spec.solver.seed)?;
    if let Some(m) = spec.sample_size {
        if m > base.n() {
            anyhow::bail!("sample_size {m} exceeds dataset size {}", base.n());
        }
    }

    let mut cells = Vec::new();
    for &k in &spec.k {
        for &t in &spec.t {
            for rep in 0..spec.repeats {
                cells.push((k, t, rep));
            }
        }
    }

    let pool = thread_pool()?;
    let outcomes: Vec<Result<RunOutcome>> = pool.install(|| {
        use rayon::prelude::*;
        cells
            .par_iter()
            .map(|&(k, t, rep)| {
                let seed = derive_seed(spec.solver.seed, k, t, rep);
                let ds = match spec.sample_size {
                    Some(m) => subsample(&base, m, seed)?,
                    None => base.clone(),
                };
                let cfg = spec.solver.config(k, t, seed);
                let report = solve(&ds, &cfg)?;
                Ok(RunOutcome { k, t, repeat: rep, seed, report })
            })
            .collect()
    });
    let outcomes: Vec<RunOutcome> = outcomes.into_iter().collect::<Result<_>>()?;

    write_summary(&spec.output_dir.join("summary.csv"), spec, &outcomes)?;
    write_trace(&spec.output_dir.join("trace.csv"), &outcomes)?;
    for out in &outcomes {
        let cfg = spec.solver.config(out.k, out.t, out.seed);
        let name = format!("result_k{}_t{}_r{}.json", out.k, out.t, out.repeat);
        fs::write(spec.output_dir.join(name), result_json(&cfg, &out.report))?;
    }
    Ok(outcomes)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

// Long format: one row per (k, t, cluster rank), rank 1 = largest.
// Per-cluster columns are sorted descending within each run before the
// rank-wise average, matching how the sweep results are usually displayed.
fn write_summary(path: &Path, spec: &ExperimentSpec, outcomes: &[RunOutcome]) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "k,t,sse_mean,sse_std,rank,variance_mean,max_distance_mean")?;
    for &k in &spec.k {
        for &t in &spec.t {
            let runs: Vec<&RunOutcome> = outcomes
                .iter()
                .filter(|o| o.k == k && o.t == t)
                .collect();
            let sses: Vec<f64> = runs.iter().map(|o| o.report.metrics.sse).collect();
            let (sse_mean, sse_std) = mean_std(&sses);
            for rank in 0..k {
                let vars: Vec<f64> = runs
                    .iter()
                    .map(|o| {
                        let mut v = o.report.metrics.per_cluster_variance.clone();
                        v.sort_by(|a, b| b.total_cmp(a));
                        v[rank]
                    })
                    .collect();
                let maxds: Vec<f64> = runs
                    .iter()
                    .map(|o| {
                        let mut v = o.report.metrics.per_cluster_max_distance.clone();
                        v.sort_by(|a, b| b.total_cmp(a));
                        v[rank]
                    })
                    .collect();
                writeln!(
                    out,
                    "{k},{t},{sse_mean},{sse_std},{},{},{}",
                    rank + 1,
                    mean_std(&vars).0,
                    mean_std(&maxds).0
                )?;
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_trace(path: &Path, outcomes: &[RunOutcome]) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "k,t,repeat,seed,iteration,objective,wall_ms")?;
    for o in outcomes {
        for (it, (obj, ms)) in o
            .report
            .objective_trace
            .iter()
            .zip(&o.report.iter_wall_ms)
            .enumerate()
        {
            writeln!(out, "{},{},{},{},{},{obj},{ms}", o.k, o.t, o.repeat, o.seed, it + 1)?;
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Trajectory sweep over a geometric t-grid on a 2-D dataset: solves once
/// per t and writes the final centroids as rows (t, cluster, x, y).
#[derive(Debug, Clone)]
pub struct TrajectorySpec {
    pub dataset: DatasetSource,
    pub k: usize,
    pub t_grid: Vec<f64>,
    pub solver: SolverTemplate,
    pub output_dir: PathBuf,
}

pub fn sweep_t_trajectory(spec: &TrajectorySpec) -> Result<PathBuf> {
    let ds = load_source(&spec.dataset, spec.solver.seed)?;
    if ds.d() != 2 {
        anyhow::bail!("trajectory sweeps require 2-D data, got d={}", ds.d());
    }
    fs::create_dir_all(&spec.output_dir)?;
    let mut out = String::new();
    writeln!(out, "t,cluster,x,y")?;
    for &t in &spec.t_grid {
        let cfg = spec.solver.config(spec.k, t, spec.solver.seed);
        let report = solve(&ds, &cfg)?;
        for (j, c) in report.centroids.centers().enumerate() {
            writeln!(out, "{t},{j},{},{}", c[0], c[1])?;
        }
    }
    let path = spec.output_dir.join("trajectory.csv");
    fs::write(&path, out)?;
    Ok(path)
}

/// One measured point of a runtime-scaling sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub batch_size: usize,
    pub seconds: f64,
    /// Wall-time ratio to the previous (smaller) size; 0 for the first row.
    pub ratio_to_previous: f64,
}

/// Measures solver wall time on synthetic blobs of the given sizes, with
/// batch size n/50. Each size is timed `repeats` times and the median is
/// reported. Timing covers the solve only, never file I/O.
pub fn runtime_scaling(
    sizes: &[usize],
    blobs: usize,
    d: usize,
    spread: f64,
    template: &SolverTemplate,
    t: f64,
    repeats: usize,
) -> Result<Vec<ScalingRow>> {
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        anyhow::bail!("sizes must be strictly ascending");
    }
    let mut rows: Vec<ScalingRow> = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let (ds, _) = make_blobs(n, blobs, d, spread, template.seed)?;
        let batch = (n / 50).max(1);
        let mut cfg = template.config(blobs, t, template.seed);
        cfg.batch_size = batch;
        let mut times = Vec::with_capacity(repeats.max(1));
        for _ in 0..repeats.max(1) {
            let start = Instant::now();
            let _ = solve(&ds, &cfg)?;
            times.push(start.elapsed().as_secs_f64());
        }
        times.sort_by(f64::total_cmp);
        let median = times[times.len() / 2];
        let ratio = rows.last().map_or(0.0, |prev| median / prev.seconds);
        rows.push(ScalingRow { n, batch_size: batch, seconds: median, ratio_to_previous: ratio });
    }
    Ok(rows)
}

pub fn write_scaling_csv(path: &Path, rows: &[ScalingRow]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "n,batch_size,seconds,ratio_to_previous")?;
    for r in rows {
        writeln!(f, "{},{},{},{}", r.n, r.batch_size, r.seconds, r.ratio_to_previous)?;
    }
    Ok(())
}
