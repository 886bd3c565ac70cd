//! Subcommand definitions and implementations.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use sodmd::bench::{
    self, experiment1, experiment2, rms_relative_error, simulate_with_substeps,
    Experiment1Config, Experiment2Config, SystemSpec,
};
use sodmd::model::{fit, ReconstructionRequest};
use sodmd::quadrature::{QuadMethod, TimeGrid};
use sodmd::signals::{add_noise, segment, Dataset, Trajectory};
use sodmd::{heuristic_shape, Error, KernelFamily, KernelSpec, Result};

use crate::model_file::{load_model, ModelFile};

/// Fit and evaluate second-order Liouville DMD models from sampled
/// trajectories.
#[derive(Debug, Parser)]
#[command(name = "sodmd", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a second-order system and write a trajectory CSV.
    Simulate(SimulateArgs),
    /// Fit a model from a trajectory dataset and write a model file.
    Fit(FitArgs),
    /// Predict a trajectory from a fitted model and an initial condition.
    Reconstruct(ReconstructArgs),
    /// Split one trajectory into overlapping windows.
    Segment(SegmentArgs),
    /// Add Gaussian measurement noise to a trajectory or dataset.
    Noise(NoiseArgs),
    /// Compare two trajectory CSVs with the RMS relative error metric.
    Evaluate(EvaluateArgs),
    /// Run a packaged benchmark experiment and write its report.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SystemKind {
    /// Undamped linear oscillator ẍ = -k·x.
    Linosc,
    /// Fixed-left mass-spring chain.
    Chain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelKind {
    Gaussian,
    Linear,
    Exponential,
}

impl From<KernelKind> for KernelFamily {
    fn from(kind: KernelKind) -> Self {
        match kind {
            KernelKind::Gaussian => KernelFamily::Gaussian,
            KernelKind::Linear => KernelFamily::LinearDot,
            KernelKind::Exponential => KernelFamily::ExponentialDot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QuadKind {
    Trapezoid,
    Simpson,
}

impl From<QuadKind> for QuadMethod {
    fn from(kind: QuadKind) -> Self {
        match kind {
            QuadKind::Trapezoid => QuadMethod::Trapezoid,
            QuadKind::Simpson => QuadMethod::Simpson,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// System to integrate.
    #[arg(long, value_enum, default_value = "linosc")]
    pub system: SystemKind,
    /// Stiffness of the oscillator or chain springs.
    #[arg(long, default_value_t = 2.0)]
    pub k: f64,
    /// Initial position, comma-separated.
    #[arg(long)]
    pub x0: String,
    /// Initial velocity, comma-separated (defaults to rest).
    #[arg(long)]
    pub v0: Option<String>,
    /// Sample spacing in seconds.
    #[arg(long)]
    pub dt: f64,
    /// Number of integration intervals; the CSV gets steps+1 rows.
    #[arg(long)]
    pub steps: usize,
    /// RK4 substeps per sample interval.
    #[arg(long, default_value_t = 10)]
    pub substeps: usize,
    /// Output trajectory CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Trajectory dataset: a directory of CSVs, one CSV, or a combined CSV
    /// with a traj_id column.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub kernel: KernelKind,
    /// Kernel shape parameter (defaults to a data-driven heuristic).
    #[arg(long)]
    pub shape: Option<f64>,
    /// Tikhonov ridge (defaults to 1e-8·trace(G)/M).
    #[arg(long)]
    pub ridge: Option<f64>,
    #[arg(long, value_enum, default_value = "trapezoid")]
    pub quad: QuadKind,
    /// Output model JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Fitted model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Initial position, comma-separated.
    #[arg(long)]
    pub x0: String,
    /// Initial velocity, comma-separated (defaults to rest).
    #[arg(long)]
    pub v0: Option<String>,
    /// Prediction horizon in seconds.
    #[arg(long = "t-end")]
    pub t_end: f64,
    /// Prediction sample spacing.
    #[arg(long)]
    pub dt: f64,
    /// Output trajectory CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Input trajectory CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Samples per segment.
    #[arg(long)]
    pub window: usize,
    /// Offset between consecutive segments.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Output directory (one CSV per segment).
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    /// Input trajectory CSV or dataset directory.
    #[arg(long)]
    pub input: PathBuf,
    /// Noise standard deviation.
    #[arg(long)]
    pub sigma: f64,
    /// RNG seed; required so runs are reproducible.
    #[arg(long)]
    pub seed: u64,
    /// Output path (file for file input, directory for directory input).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Ground-truth trajectory CSV.
    #[arg(long)]
    pub truth: PathBuf,
    /// Estimated trajectory CSV with the same grid and dimension.
    #[arg(long)]
    pub estimate: PathBuf,
    /// Optional output CSV for the pointwise relative error signal.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(subcommand)]
    pub which: ExperimentKind,
}

#[derive(Debug, Subcommand)]
pub enum ExperimentKind {
    /// Noisy scalar oscillator: fit from 4 short trajectories, score random
    /// initial conditions over a doubled horizon.
    Exp1(Exp1Args),
    /// Mass-spring chain: fit from overlapping segments of one trajectory,
    /// reconstruct the first third of the horizon.
    Exp2(Exp2Args),
}

#[derive(Debug, Args)]
pub struct Exp1Args {
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub kernel: KernelKind,
    #[arg(long)]
    pub shape: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub sigma: f64,
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Output directory for exp1_trials.csv and exp1_summary.json.
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct Exp2Args {
    #[arg(long, default_value_t = 50)]
    pub masses: usize,
    #[arg(long, default_value_t = 400.0)]
    pub stiffness: f64,
    #[arg(long, default_value_t = 301)]
    pub snapshots: usize,
    #[arg(long, default_value_t = 31)]
    pub window: usize,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for exp2_snapshots.csv and exp2_summary.json.
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => run_simulate(&args),
        Command::Fit(args) => run_fit(&args),
        Command::Reconstruct(args) => run_reconstruct(&args),
        Command::Segment(args) => run_segment(&args),
        Command::Noise(args) => run_noise(&args),
        Command::Evaluate(args) => run_evaluate(&args),
        Command::Experiment(args) => match args.which {
            ExperimentKind::Exp1(a) => run_exp1(&a),
            ExperimentKind::Exp2(a) => run_exp2(&a),
        },
    }
}

fn parse_vector(text: &str, what: &str) -> Result<DVector<f64>> {
    let values: std::result::Result<Vec<f64>, _> =
        text.split(',').map(|f| f.trim().parse::<f64>()).collect();
    match values {
        Ok(v) if !v.is_empty() && v.iter().all(|x| x.is_finite()) => Ok(DVector::from_vec(v)),
        _ => Err(Error::InvalidInput(format!(
            "{what} must be a comma-separated list of finite numbers, got `{text}`"
        ))),
    }
}

pub fn run_simulate(args: &SimulateArgs) -> Result<()> {
    if args.steps == 0 {
        return Err(Error::InvalidInput("--steps must be at least 1".into()));
    }
    let x0 = parse_vector(&args.x0, "--x0")?;
    let v0 = match &args.v0 {
        Some(text) => parse_vector(text, "--v0")?,
        None => DVector::zeros(x0.len()),
    };
    let system = match args.system {
        SystemKind::Linosc => SystemSpec::linear_oscillator(args.k, x0.len())?,
        SystemKind::Chain => SystemSpec::mass_spring_chain(x0.len(), args.k)?,
    };
    let grid = TimeGrid::new(args.dt, args.steps + 1)?;
    let trajectory = simulate_with_substeps(&system, &x0, &v0, grid, args.substeps)?;
    trajectory.save_csv(&args.out)?;
    println!(
        "wrote {} samples over [0, {}] to {}",
        grid.count(),
        grid.horizon(),
        args.out.display()
    );
    Ok(())
}

pub fn run_fit(args: &FitArgs) -> Result<()> {
    let dataset = Dataset::load(&args.data)?;
    let family: KernelFamily = args.kernel.into();
    let shape = args.shape.unwrap_or_else(|| {
        let samples: Vec<DVector<f64>> =
            dataset.all_samples().into_iter().cloned().collect();
        heuristic_shape(family, &samples)
    });
    let kernel = KernelSpec::new(family, shape, dataset.dim())?;
    let model = fit(&dataset, &kernel, args.quad.into(), args.ridge)?;

    println!(
        "fitted {} trajectories ({} samples x {} dims), kernel {} shape {shape}",
        dataset.len(),
        dataset.grid().count(),
        dataset.dim(),
        family.name(),
    );
    if let Some(diag) = model.diagnostics() {
        println!(
            "ridge {:e}, Gram rank {}/{}, condition estimate {:.3e}, projection error {:.3e}",
            diag.ridge,
            diag.gram_rank,
            dataset.len(),
            diag.condition_estimate,
            diag.projection_error
        );
        if !diag.dropped_modes.is_empty() {
            println!("dropped {} modes with numerically zero normalizers", diag.dropped_modes.len());
        }
    }
    for (i, lambda) in model.eigenvalues().iter().enumerate() {
        println!("lambda[{i}] = {:+.6} {:+.6}i", lambda.re, lambda.im);
    }

    ModelFile::from_model(&model).save(&args.out)?;
    println!("model written to {}", args.out.display());
    Ok(())
}

pub fn run_reconstruct(args: &ReconstructArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let x0 = parse_vector(&args.x0, "--x0")?;
    let v0 = match &args.v0 {
        Some(text) => parse_vector(text, "--v0")?,
        None => DVector::zeros(model.dim()),
    };
    if x0.len() != model.dim() || v0.len() != model.dim() {
        return Err(Error::InvalidInput(format!(
            "--x0/--v0 must have the model dimension {} (got {} and {})",
            model.dim(),
            x0.len(),
            v0.len()
        )));
    }
    if !(args.dt > 0.0 && args.t_end > 0.0) {
        return Err(Error::InvalidInput("--dt and --t-end must be positive".into()));
    }
    let count = (args.t_end / args.dt).floor() as usize + 1;
    let grid = TimeGrid::new(args.dt, count.max(2))?;
    let times: Vec<f64> = grid.times().collect();
    let recon = model.reconstruct(&ReconstructionRequest { x0, v0, times })?;

    let samples = (0..grid.count())
        .map(|k| recon.states.row(k).transpose())
        .collect();
    Trajectory::new(grid, samples, "reconstruction")?.save_csv(&args.out)?;
    println!(
        "imaginary residual ratio {:.3e}{}",
        recon.diagnostics.max_imag_ratio,
        if recon.diagnostics.conditioning_warning {
            " (warning: exceeds 1e-3, the fit may be ill-conditioned)"
        } else {
            ""
        }
    );
    println!("reconstruction written to {}", args.out.display());
    Ok(())
}

pub fn run_segment(args: &SegmentArgs) -> Result<()> {
    let trajectory = Trajectory::load_csv(&args.input)?;
    let segments = segment(&trajectory, args.window, args.stride)?;
    segments.save_dir(&args.out_dir)?;
    println!("wrote {} segments to {}", segments.len(), args.out_dir.display());
    Ok(())
}

pub fn run_noise(args: &NoiseArgs) -> Result<()> {
    if args.input.is_dir() {
        let dataset = Dataset::load(&args.input)?;
        let noisy = add_noise(&dataset, args.sigma, args.seed)?;
        noisy.save_dir(&args.out)?;
        println!("wrote {} noisy trajectories to {}", noisy.len(), args.out.display());
    } else {
        let trajectory = Trajectory::load_csv(&args.input)?;
        let dataset = Dataset::new(vec![trajectory])?;
        let noisy = add_noise(&dataset, args.sigma, args.seed)?;
        noisy.trajectories()[0].save_csv(&args.out)?;
        println!("wrote noisy trajectory to {}", args.out.display());
    }
    Ok(())
}

pub fn run_evaluate(args: &EvaluateArgs) -> Result<()> {
    let truth = Trajectory::load_csv(&args.truth)?;
    let estimate = Trajectory::load_csv(&args.estimate)?;
    if estimate.count() != truth.count() || estimate.dim() != truth.dim() {
        return Err(Error::Format {
            path: args.estimate.clone(),
            line: 1,
            message: format!(
                "estimate is {}x{} but the truth is {}x{}",
                estimate.count(),
                estimate.dim(),
                truth.count(),
                truth.dim()
            ),
        });
    }
    let matrix = nalgebra::DMatrix::from_fn(truth.count(), truth.dim(), |k, i| {
        estimate.sample(k)[i]
    });
    let rms = rms_relative_error(&truth, &matrix)?;
    println!("{rms}");

    if let Some(out) = &args.out {
        let mut max_abs = 0.0f64;
        for s in truth.samples() {
            max_abs = max_abs.max(s.amax());
        }
        let mut text = String::from("t");
        for i in 1..=truth.dim() {
            text.push_str(&format!(",e{i}"));
        }
        text.push('\n');
        for k in 0..truth.count() {
            text.push_str(&format!("{}", truth.grid().time(k)));
            for i in 0..truth.dim() {
                let e = (truth.sample(k)[i] - matrix[(k, i)]) / max_abs;
                text.push_str(&format!(",{e}"));
            }
            text.push('\n');
        }
        fs::write(out, text).map_err(|source| Error::Io {
            path: out.clone(),
            source,
        })?;
        println!("error signal written to {}", out.display());
    }
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn run_exp1(args: &Exp1Args) -> Result<()> {
    let config = Experiment1Config {
        trials: args.trials,
        seed: args.seed,
        kernel_family: args.kernel.into(),
        shape: args.shape,
        sigma: args.sigma,
        ridge: args.ridge,
        ..Default::default()
    };
    let report = experiment1(&config)?;
    ensure_dir(&args.out_dir)?;
    write_text(&args.out_dir.join("exp1_trials.csv"), &report.to_csv())?;
    write_text(&args.out_dir.join("exp1_summary.json"), &report.to_summary_json())?;
    println!(
        "exp1: {} trials, median {:.4}, p95 {:.4}, max {:.4}",
        report.trials.len(),
        report.summary.median,
        report.summary.p95,
        report.summary.max
    );
    println!("report written to {}", args.out_dir.display());
    Ok(())
}

pub fn run_exp2(args: &Exp2Args) -> Result<()> {
    let config = Experiment2Config {
        masses: args.masses,
        stiffness: args.stiffness,
        snapshots: args.snapshots,
        window: args.window,
        stride: args.stride,
        sigma: args.sigma,
        seed: args.seed,
        ..Default::default()
    };
    let report = experiment2(&config)?;
    ensure_dir(&args.out_dir)?;
    write_text(&args.out_dir.join("exp2_snapshots.csv"), &report.to_csv())?;
    write_text(&args.out_dir.join("exp2_summary.json"), &report.to_summary_json())?;
    println!(
        "exp2: {} segments, {} retained modes, rms relative error {:.5}",
        report.segments, report.retained_modes, report.rms_relative_error
    );
    println!("report written to {}", args.out_dir.display());
    Ok(())
}

// Re-exported for tests that need the harness types without the binary.
pub use bench::ErrorSummary;
