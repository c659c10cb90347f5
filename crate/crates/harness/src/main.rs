use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tkm_core::data::{load_csv, subsample, PreprocessSpec};
use tkm_core::engine::{solve, Denominator, Method, SolverConfig};
use tkm_harness::{
    geometric_grid, result_json, run_experiment, runtime_scaling, sweep_t_trajectory,
    write_scaling_csv, DatasetSource, ExperimentSpec, SolverTemplate, TrajectorySpec,
};

#[derive(Parser)]
#[command(name = "cluster", about = "Tilted k-means solver and experiment runner", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full experiment sweep from a TOML config file.
    Run {
        /// Path to the experiment config (TOML).
        #[arg(long)]
        config: PathBuf,
    },
    /// Solve a single instance from a CSV file and write result files.
    Solve(SolveArgs),
    /// Sweep t over a geometric grid on 2-D blobs and dump centroid paths.
    Trajectory(TrajectoryArgs),
    /// Measure solver wall time across dataset sizes (batch = n/50).
    Scale(ScaleArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Input CSV file (header row, comma-separated).
    #[arg(long)]
    input: PathBuf,
    /// Columns to use, comma-separated. Defaults to every column.
    #[arg(long, value_delimiter = ',')]
    columns: Vec<String>,
    /// Z-score each column before clustering.
    #[arg(long)]
    standardize: bool,
    /// Scale each row to unit norm (after standardization if both set).
    #[arg(long)]
    unit_normalize: bool,
    /// Subsample this many rows before solving.
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0.1)]
    t: f64,
    #[arg(long, default_value_t = 0.05)]
    eta: f64,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 100)]
    batch: usize,
    #[arg(long, default_value_t = 500)]
    iters: usize,
    /// Early-stop tolerance on the objective (0 disables).
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// tkm, nf, or lloyd.
    #[arg(long, default_value = "tkm", value_parser = parse_method)]
    method: Method,
    /// Gradient normalization: full or batch.
    #[arg(long, default_value = "full", value_parser = parse_denominator)]
    denominator: Denominator,
    /// Output directory for result.json and trace.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrajectoryArgs {
    /// Optional input CSV with exactly two selected columns; blobs otherwise.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Columns to use with --input (must select exactly 2).
    #[arg(long, value_delimiter = ',')]
    columns: Vec<String>,
    /// Blob dataset size when no --input is given.
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Number of generated blobs when no --input is given.
    #[arg(long, default_value_t = 2)]
    blobs: usize,
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1e-2)]
    t_min: f64,
    #[arg(long, default_value_t = 1e2)]
    t_max: f64,
    /// Number of geometrically spaced t values.
    #[arg(long, default_value_t = 60)]
    points: usize,
    #[arg(long, default_value_t = 0.05)]
    eta: f64,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 100)]
    batch: usize,
    #[arg(long, default_value_t = 500)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScaleArgs {
    /// Dataset sizes, comma-separated, strictly ascending.
    #[arg(long, value_delimiter = ',', default_values_t = [10_000, 20_000, 40_000])]
    sizes: Vec<usize>,
    /// Number of blobs (also the k used for solving).
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    #[arg(long, default_value_t = 0.1)]
    t: f64,
    #[arg(long, default_value_t = 0.05)]
    eta: f64,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 500)]
    iters: usize,
    /// Timing repeats per size; the median is reported.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_method(s: &str) -> Result<Method, String> {
    match s {
        "tkm" => Ok(Method::Tkm),
        "nf" => Ok(Method::Nf),
        "lloyd" => Ok(Method::Lloyd),
        _ => Err(format!("unknown method {s:?}; expected tkm, nf or lloyd")),
    }
}

fn parse_denominator(s: &str) -> Result<Denominator, String> {
    match s {
        "full" => Ok(Denominator::Full),
        "batch" => Ok(Denominator::Batch),
        _ => Err(format!("unknown denominator {s:?}; expected full or batch")),
    }
}

fn cmd_solve(args: &SolveArgs) -> anyhow::Result<()> {
    let columns = if args.columns.is_empty() {
        // peek the header to select every column
        let text = fs::read_to_string(&args.input)
            .map_err(|e| anyhow::anyhow!("{}: {e}", args.input.display()))?;
        let header = text
            .lines()
            .next()
            .ok_or_else(|| anyhow::anyhow!("{}: empty file", args.input.display()))?;
        header.split(',').map(|s| s.trim().to_string()).collect()
    } else {
        args.columns.clone()
    };
    let spec = PreprocessSpec {
        selected_columns: columns,
        standardize: args.standardize,
        unit_normalize: args.unit_normalize,
    };
    let (mut ds, dropped) = load_csv(&args.input, &spec)
        .map_err(|e| anyhow::anyhow!("{}: {e}", args.input.display()))?;
    if dropped > 0 {
        eprintln!("dropped {dropped} rows with missing or non-numeric values");
    }
    if let Some(m) = args.sample {
        ds = subsample(&ds, m, args.seed)?;
    }
    let cfg = SolverConfig {
        k: args.k,
        t: args.t,
        eta: args.eta,
        epochs: args.epochs,
        batch_size: args.batch,
        max_iters: args.iters,
        tol: args.tol,
        seed: args.seed,
        method: args.method,
        denominator: args.denominator,
    };
    let report = solve(&ds, &cfg)?;

    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("result.json"), result_json(&cfg, &report))?;
    let mut trace = String::from("iteration,objective,wall_ms\n");
    for (i, (obj, ms)) in report.objective_trace.iter().zip(&report.iter_wall_ms).enumerate() {
        trace.push_str(&format!("{},{obj},{ms}\n", i + 1));
    }
    fs::write(args.out.join("trace.csv"), trace)?;
    println!(
        "solved: n={} k={} t={} iters={} sse={:.6} tilted_sse={:.6}",
        ds.n(),
        cfg.k,
        cfg.t,
        report.iterations_run,
        report.metrics.sse,
        report.metrics.tilted_sse
    );
    Ok(())
}

fn cmd_trajectory(args: &TrajectoryArgs) -> anyhow::Result<()> {
    let dataset = match &args.input {
        Some(path) => DatasetSource::Csv {
            path: path.clone(),
            columns: args.columns.clone(),
            standardize: false,
            unit_normalize: false,
        },
        None => DatasetSource::Blobs { n: args.n, blobs: args.blobs, d: 2, spread: args.spread },
    };
    let spec = TrajectorySpec {
        dataset,
        k: args.k,
        t_grid: geometric_grid(args.t_min, args.t_max, args.points),
        solver: SolverTemplate {
            eta: args.eta,
            epochs: args.epochs,
            batch_size: args.batch,
            max_iters: args.iters,
            tol: 0.0,
            seed: args.seed,
            method: Method::Tkm,
            denominator: Denominator::Full,
        },
        output_dir: args.out.clone(),
    };
    let path = sweep_t_trajectory(&spec)?;
    println!("wrote {} ({} t values x {} clusters)", path.display(), args.points, args.k);
    Ok(())
}

fn cmd_scale(args: &ScaleArgs) -> anyhow::Result<()> {
    let template = SolverTemplate {
        eta: args.eta,
        epochs: args.epochs,
        batch_size: 1, // replaced per size with n/50
        max_iters: args.iters,
        tol: 0.0,
        seed: args.seed,
        method: Method::Tkm,
        denominator: Denominator::Full,
    };
    let rows = runtime_scaling(
        &args.sizes,
        args.k,
        args.d,
        args.spread,
        &template,
        args.t,
        args.repeats,
    )?;
    fs::create_dir_all(&args.out)?;
    let path = args.out.join("scaling.csv");
    write_scaling_csv(&path, &rows)?;
    for r in &rows {
        println!(
            "n={} batch={} seconds={:.3} ratio={:.3}",
            r.n, r.batch_size, r.seconds, r.ratio_to_previous
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Run { config } => {
            let spec = ExperimentSpec::from_toml_file(config)?;
            let outcomes = run_experiment(&spec)?;
            println!("completed {} runs; outputs in {}", outcomes.len(), spec.output_dir.display());
            Ok(())
        }
        Command::Solve(args) => cmd_solve(args),
        Command::Trajectory(args) => cmd_trajectory(args),
        Command::Scale(args) => cmd_scale(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
