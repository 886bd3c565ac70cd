//! Ground-truth simulators, error metrics, and desk-scale replications of
//! the two reference experiments.
//!
//! Experiment 1: a planar undamped linear oscillator `ẍ = -2x` fitted from
//! 4 short noisy trajectories, then evaluated on randomly drawn initial
//! conditions over a horizon twice as long as the training data.
//!
//! Experiment 2: a fixed-left mass-spring chain (the desk-scale stand-in
//! for a high-dimensional undamped structure) fitted from overlapping
//! segments of one long trajectory, then reconstructed from its initial
//! condition.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{heuristic_shape, KernelFamily, KernelSpec};
use crate::model::{fit, ReconstructionRequest};
use crate::quadrature::{QuadMethod, TimeGrid};
use crate::signals::{add_noise, segment, Dataset, Trajectory};

/// A second-order system `ẍ = f(x)` with a known acceleration field.
#[derive(Clone)]
pub enum SystemSpec {
    /// `ẍ = -k·x` componentwise.
    LinearOscillator { stiffness: f64, dim: usize },
    /// Unit masses in a chain, spring `k` between neighbours, leftmost mass
    /// anchored to a wall, rightmost end free: `ẍ = L·x` with tridiagonal L.
    MassSpringChain { masses: usize, stiffness: f64 },
    /// Arbitrary acceleration field, for tests and experiments.
    Custom {
        dim: usize,
        accel: Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>,
    },
}

impl fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemSpec::LinearOscillator { stiffness, dim } => f
                .debug_struct("LinearOscillator")
                .field("stiffness", stiffness)
                .field("dim", dim)
                .finish(),
            SystemSpec::MassSpringChain { masses, stiffness } => f
                .debug_struct("MassSpringChain")
                .field("masses", masses)
                .field("stiffness", stiffness)
                .finish(),
            SystemSpec::Custom { dim, .. } => {
                f.debug_struct("Custom").field("dim", dim).finish_non_exhaustive()
            }
        }
    }
}

impl SystemSpec {
    pub fn linear_oscillator(stiffness: f64, dim: usize) -> Result<Self> {
        if !(stiffness.is_finite() && stiffness > 0.0) {
            return Err(Error::InvalidInput(format!(
                "oscillator stiffness must be positive, got {stiffness}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidInput("oscillator dimension must be positive".into()));
        }
        Ok(SystemSpec::LinearOscillator { stiffness, dim })
    }

    pub fn mass_spring_chain(masses: usize, stiffness: f64) -> Result<Self> {
        if masses == 0 {
            return Err(Error::InvalidInput("chain needs at least one mass".into()));
        }
        if !(stiffness.is_finite() && stiffness > 0.0) {
            return Err(Error::InvalidInput(format!(
                "chain stiffness must be positive, got {stiffness}"
            )));
        }
        Ok(SystemSpec::MassSpringChain { masses, stiffness })
    }

    pub fn custom(
        dim: usize,
        accel: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        SystemSpec::Custom {
            dim,
            accel: Arc::new(accel),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SystemSpec::LinearOscillator { dim, .. } => *dim,
            SystemSpec::MassSpringChain { masses, .. } => *masses,
            SystemSpec::Custom { dim, .. } => *dim,
        }
    }

    pub fn acceleration(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            SystemSpec::LinearOscillator { stiffness, .. } => x * -*stiffness,
            SystemSpec::MassSpringChain { masses, stiffness } => {
                let n = *masses;
                let k = *stiffness;
                DVector::from_fn(n, |i, _| {
                    let left = if i == 0 { 0.0 } else { x[i - 1] };
                    if i + 1 < n {
                        k * (x[i + 1] - 2.0 * x[i] + left)
                    } else {
                        // Free right end: only the left spring pulls.
                        k * (left - x[i])
                    }
                })
            }
            SystemSpec::Custom { accel, .. } => accel(x),
        }
    }
}

/// Classical RK4 on the augmented first-order system, sampled onto `grid`.
/// The internal step is `dt/10`.
pub fn simulate(
    system: &SystemSpec,
    x0: &DVector<f64>,
    v0: &DVector<f64>,
    grid: TimeGrid,
) -> Result<Trajectory> {
    simulate_with_substeps(system, x0, v0, grid, 10)
}

pub fn simulate_with_substeps(
    system: &SystemSpec,
    x0: &DVector<f64>,
    v0: &DVector<f64>,
    grid: TimeGrid,
    substeps: usize,
) -> Result<Trajectory> {
    let (positions, _) = simulate_states(system, x0, v0, grid, substeps)?;
    Trajectory::new(grid, positions, "sim")?.with_initial_velocity(v0.clone())
}

/// Like [`simulate`] but also returns the velocity at each grid node, for
/// energy bookkeeping and phase-space output.
pub fn simulate_with_velocities(
    system: &SystemSpec,
    x0: &DVector<f64>,
    v0: &DVector<f64>,
    grid: TimeGrid,
    substeps: usize,
) -> Result<(Trajectory, Vec<DVector<f64>>)> {
    let (positions, velocities) = simulate_states(system, x0, v0, grid, substeps)?;
    let traj = Trajectory::new(grid, positions, "sim")?.with_initial_velocity(v0.clone())?;
    Ok((traj, velocities))
}

fn simulate_states(
    system: &SystemSpec,
    x0: &DVector<f64>,
    v0: &DVector<f64>,
    grid: TimeGrid,
    substeps: usize,
) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
    let n = system.dim();
    if x0.len() != n || v0.len() != n {
        return Err(Error::InvalidInput(format!(
            "initial condition dimensions ({}, {}) do not match the system dimension {n}",
            x0.len(),
            v0.len()
        )));
    }
    if substeps == 0 {
        return Err(Error::InvalidInput("substeps must be at least 1".into()));
    }
    let h = grid.dt() / substeps as f64;
    let mut x = x0.clone();
    let mut v = v0.clone();
    let mut positions = Vec::with_capacity(grid.count());
    let mut velocities = Vec::with_capacity(grid.count());
    positions.push(x.clone());
    velocities.push(v.clone());
    for k in 1..grid.count() {
        for _ in 0..substeps {
            rk4_step(system, &mut x, &mut v, h);
        }
        if x.iter().chain(v.iter()).any(|e| !e.is_finite()) {
            return Err(Error::Divergence { time: grid.time(k) });
        }
        positions.push(x.clone());
        velocities.push(v.clone());
    }
    Ok((positions, velocities))
}

fn rk4_step(system: &SystemSpec, x: &mut DVector<f64>, v: &mut DVector<f64>, h: f64) {
    let k1x = v.clone();
    let k1v = system.acceleration(x);
    let k2x = &*v + &k1v * (h / 2.0);
    let k2v = system.acceleration(&(&*x + &k1x * (h / 2.0)));
    let k3x = &*v + &k2v * (h / 2.0);
    let k3v = system.acceleration(&(&*x + &k2x * (h / 2.0)));
    let k4x = &*v + &k3v * h;
    let k4v = system.acceleration(&(&*x + &k3x * h));
    *x += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
    *v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
}

/// Root mean square of the relative error signal
/// `t ↦ (γ(t) - γ̂(t)) / ‖γ‖∞`, with `‖γ‖∞` the largest absolute entry of
/// the truth.
pub fn rms_relative_error(truth: &Trajectory, estimate: &DMatrix<f64>) -> Result<f64> {
    if estimate.nrows() != truth.count() || estimate.ncols() != truth.dim() {
        return Err(Error::InvalidInput(format!(
            "estimate is {}x{} but the truth is {}x{}",
            estimate.nrows(),
            estimate.ncols(),
            truth.count(),
            truth.dim()
        )));
    }
    let mut max_abs = 0.0f64;
    for s in truth.samples() {
        max_abs = max_abs.max(s.amax());
    }
    if max_abs == 0.0 {
        return Err(Error::InvalidInput(
            "truth trajectory is identically zero; the relative error signal is undefined".into(),
        ));
    }
    let mut sum_sq = 0.0;
    let mut n = 0usize;
    for (k, s) in truth.samples().iter().enumerate() {
        for (i, x) in s.iter().enumerate() {
            let e = (x - estimate[(k, i)]) / max_abs;
            sum_sq += e * e;
            n += 1;
        }
    }
    Ok((sum_sq / n as f64).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorSummary {
    pub median: f64,
    pub mean: f64,
    pub p95: f64,
    pub max: f64,
}

fn summarize(mut values: Vec<f64>) -> ErrorSummary {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    };
    // Nearest-rank percentile.
    let p95 = values[((0.95 * n as f64).ceil() as usize).clamp(1, n) - 1];
    ErrorSummary {
        median,
        mean,
        p95,
        max: values[n - 1],
    }
}

// ---------------------------------------------------------------------------
// Experiment 1: scalar undamped oscillator ẍ = -2x.
//
// Initial conditions live in the phase plane: a point of `[-1,1]²` is a
// (position, velocity) pair. Four short noisy trajectories train the model;
// reconstruction is scored on random phase points over a horizon twice as
// long as the training data.

/// Hand-tuned Gaussian width for the reference configuration. The generic
/// median heuristic lands near 1 here, which badly under-resolves this
/// dataset; reconstruction quality was measured across μ and is flat and
/// good for μ in roughly [30, 130].
const EXPERIMENT1_SHAPE: f64 = 64.0;

/// Noise-calibrated ridge for the reference configuration, relative to
/// `trace(G)/M`. Chosen by measuring reconstruction error across seeds at
/// the experiment's noise level; values in [4e-5, 7e-5] behave the same.
const EXPERIMENT1_RIDGE_REL: f64 = 5e-5;

#[derive(Debug, Clone)]
pub struct Experiment1Config {
    /// Number of random evaluation initial conditions.
    pub trials: usize,
    pub seed: u64,
    pub kernel_family: KernelFamily,
    /// Shape parameter; `None` uses the hand-tuned default for Gaussian and
    /// the data-driven heuristic otherwise.
    pub shape: Option<f64>,
    /// Measurement noise on trajectory samples and initial velocities.
    pub sigma: f64,
    pub train_dt: f64,
    pub train_count: usize,
    /// Absolute Tikhonov ridge; `None` uses the noise-calibrated relative
    /// default.
    pub ridge: Option<f64>,
    pub quad: QuadMethod,
    pub eval_dt: f64,
    pub eval_horizon: f64,
}

impl Default for Experiment1Config {
    fn default() -> Self {
        Self {
            trials: 100,
            seed: 0,
            kernel_family: KernelFamily::Gaussian,
            shape: None,
            sigma: 0.01,
            train_dt: 0.5,
            train_count: 11,
            ridge: None,
            quad: QuadMethod::Trapezoid,
            eval_dt: 0.05,
            eval_horizon: 10.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trial: usize,
    pub x0: f64,
    pub v0: f64,
    pub rms_relative_error: f64,
}

#[derive(Debug, Clone)]
pub struct Experiment1Report {
    pub shape: f64,
    pub ridge: f64,
    pub eigenvalues: Vec<Complex64>,
    pub trials: Vec<TrialResult>,
    pub summary: ErrorSummary,
}

#[derive(Serialize)]
struct Experiment1Summary<'a> {
    trials: usize,
    median_rms: f64,
    mean_rms: f64,
    p95_rms: f64,
    max_rms: f64,
    shape: f64,
    ridge: f64,
    eigenvalues: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'a str>,
}

impl Experiment1Report {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,x0,v0,rms_relative_error\n");
        for t in &self.trials {
            out.push_str(&format!(
                "{},{},{},{}\n",
                t.trial, t.x0, t.v0, t.rms_relative_error
            ));
        }
        out
    }

    pub fn to_summary_json(&self) -> String {
        let summary = Experiment1Summary {
            trials: self.trials.len(),
            median_rms: self.summary.median,
            mean_rms: self.summary.mean,
            p95_rms: self.summary.p95,
            max_rms: self.summary.max,
            shape: self.shape,
            ridge: self.ridge,
            eigenvalues: self.eigenvalues.iter().map(|l| [l.re, l.im]).collect(),
            note: None,
        };
        let mut s = serde_json::to_string_pretty(&summary).expect("plain summary struct");
        s.push('\n');
        s
    }
}

/// The 4 training trajectories of Experiment 1: unit-amplitude phase points
/// spread over the phase plane (phases 0°, 45°, 90°, 135°), sampled on
/// `grid`, with optional measurement noise on every sample and on the
/// initial velocities.
///
/// The phases matter: initial conditions symmetric about the origin produce
/// mirror-image trajectories whose occupation kernels carry duplicated
/// information, and the fit becomes noise-unstable.
pub fn experiment1_training_dataset(grid: TimeGrid, sigma: f64, seed: u64) -> Result<Dataset> {
    let system = SystemSpec::linear_oscillator(2.0, 1)?;
    let omega = 2.0f64.sqrt();
    let phases = [0.0f64, 45.0, 90.0, 135.0];
    let mut trajectories = Vec::new();
    for (i, deg) in phases.iter().enumerate() {
        // x(t) = cos(ωt + φ) starts at (cos φ, -ω sin φ).
        let phi = deg.to_radians();
        let x0 = DVector::from_column_slice(&[phi.cos()]);
        let v0 = DVector::from_column_slice(&[-omega * phi.sin()]);
        let t = simulate(&system, &x0, &v0, grid)?;
        let t = Trajectory::new(grid, t.samples().to_vec(), format!("train_{i}"))?
            .with_initial_velocity(v0)?;
        trajectories.push(t);
    }
    add_noise(&Dataset::new(trajectories)?, sigma, seed)
}

/// Fits the oscillator from 4 short noisy trajectories and scores
/// reconstructions from `trials` random phase points in `[-1,1]²` over
/// `[0, eval_horizon]`.
pub fn experiment1(config: &Experiment1Config) -> Result<Experiment1Report> {
    if config.trials == 0 {
        return Err(Error::InvalidInput("experiment needs at least one trial".into()));
    }
    let train_grid = TimeGrid::new(config.train_dt, config.train_count)?;
    let training = experiment1_training_dataset(train_grid, config.sigma, config.seed)?;

    let shape = config.shape.unwrap_or_else(|| match config.kernel_family {
        KernelFamily::Gaussian => EXPERIMENT1_SHAPE,
        family => heuristic_shape(family, &samples_owned(&training)),
    });
    let kernel = KernelSpec::new(config.kernel_family, shape, 1)?;
    let ridge = match config.ridge {
        Some(r) => r,
        None => {
            let rule = crate::quadrature::QuadratureRule::new(train_grid, 2, config.quad)?;
            let g = crate::operator::gram(&kernel, &rule, &training)?;
            EXPERIMENT1_RIDGE_REL * g.entries().trace() / g.dim() as f64
        }
    };
    let model = fit(&training, &kernel, config.quad, Some(ridge))?;

    let system = SystemSpec::linear_oscillator(2.0, 1)?;
    let eval_count = (config.eval_horizon / config.eval_dt).round() as usize + 1;
    let eval_grid = TimeGrid::new(config.eval_dt, eval_count)?;
    let times: Vec<f64> = eval_grid.times().collect();

    let mut trials = Vec::with_capacity(config.trials);
    for trial in 0..config.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1 + trial as u64);
        let x0 = rng.random_range(-1.0..1.0);
        let v0 = rng.random_range(-1.0..1.0);
        let x0_vec = DVector::from_column_slice(&[x0]);
        let v0_vec = DVector::from_column_slice(&[v0]);
        let truth = simulate(&system, &x0_vec, &v0_vec, eval_grid)?;
        let recon = model.reconstruct(&ReconstructionRequest {
            x0: x0_vec,
            v0: v0_vec,
            times: times.clone(),
        })?;
        trials.push(TrialResult {
            trial,
            x0,
            v0,
            rms_relative_error: rms_relative_error(&truth, &recon.states)?,
        });
    }

    let summary = summarize(trials.iter().map(|t| t.rms_relative_error).collect());
    Ok(Experiment1Report {
        shape,
        ridge: model.ridge(),
        eigenvalues: model.eigenvalues().to_vec(),
        trials,
        summary,
    })
}

fn samples_owned(dataset: &Dataset) -> Vec<DVector<f64>> {
    dataset.all_samples().into_iter().cloned().collect()
}

// ---------------------------------------------------------------------------
// Experiment 2: mass-spring chain from one segmented trajectory.

#[derive(Debug, Clone)]
pub struct Experiment2Config {
    pub masses: usize,
    pub stiffness: f64,
    pub dt: f64,
    pub snapshots: usize,
    pub window: usize,
    pub stride: usize,
    pub sigma: f64,
    pub seed: u64,
    /// Tip displacement of the initial quadratic bend profile.
    pub bend_amplitude: f64,
    pub ridge: Option<f64>,
    pub quad: QuadMethod,
    /// Number of evenly spaced comparison snapshots in the report CSV.
    pub snapshot_rows: usize,
}

impl Default for Experiment2Config {
    fn default() -> Self {
        Self {
            masses: 50,
            stiffness: 400.0,
            dt: 0.01,
            snapshots: 301,
            window: 31,
            stride: 1,
            sigma: 0.0,
            seed: 0,
            bend_amplitude: 0.5,
            ridge: None,
            quad: QuadMethod::Trapezoid,
            snapshot_rows: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SnapshotRow {
    pub time: f64,
    pub node: usize,
    pub truth: f64,
    pub estimate: f64,
}

#[derive(Debug, Clone)]
pub struct Experiment2Report {
    pub segments: usize,
    pub retained_modes: usize,
    pub rms_relative_error: f64,
    pub reconstruction_samples: usize,
    pub eigenvalues: Vec<Complex64>,
    pub snapshots: Vec<SnapshotRow>,
}

#[derive(Serialize)]
struct Experiment2Summary {
    segments: usize,
    retained_modes: usize,
    rms_relative_error: f64,
    reconstruction_samples: usize,
    eigenvalues: Vec<[f64; 2]>,
}

impl Experiment2Report {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,node,truth,estimate\n");
        for row in &self.snapshots {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.time, row.node, row.truth, row.estimate
            ));
        }
        out
    }

    pub fn to_summary_json(&self) -> String {
        let summary = Experiment2Summary {
            segments: self.segments,
            retained_modes: self.retained_modes,
            rms_relative_error: self.rms_relative_error,
            reconstruction_samples: self.reconstruction_samples,
            eigenvalues: self.eigenvalues.iter().map(|l| [l.re, l.im]).collect(),
        };
        let mut s = serde_json::to_string_pretty(&summary).expect("plain summary struct");
        s.push('\n');
        s
    }
}

/// Simulates one long chain trajectory from a bent rest profile, segments
/// it, fits a linear-kernel model on the segments (with estimated segment
/// initial velocities), and reconstructs the first third of the horizon
/// from the original initial condition.
pub fn experiment2(config: &Experiment2Config) -> Result<Experiment2Report> {
    let system = SystemSpec::mass_spring_chain(config.masses, config.stiffness)?;
    let n = config.masses;
    let grid = TimeGrid::new(config.dt, config.snapshots)?;
    let bend = DVector::from_fn(n, |i, _| {
        config.bend_amplitude * ((i + 1) as f64 / n as f64).powi(2)
    });
    let rest = DVector::zeros(n);
    let clean = simulate(&system, &bend, &rest, grid)?;

    let observed = add_noise(&Dataset::new(vec![clean.clone()])?, config.sigma, config.seed)?
        .trajectories()[0]
        .clone();

    let segments = segment(&observed, config.window, config.stride)?;
    let kernel = KernelSpec::linear(n)?;
    let model = fit(&segments, &kernel, config.quad, config.ridge)?;

    // Reconstruct the first third of the horizon from the observed IC.
    let horizon_samples = (config.snapshots / 3).max(2);
    let times: Vec<f64> = (0..horizon_samples).map(|k| grid.time(k)).collect();
    let x0 = observed.sample(0).clone();
    let v0 = observed
        .initial_velocity()
        .cloned()
        .unwrap_or_else(|| observed.estimate_initial_velocity());
    let recon = model.reconstruct(&ReconstructionRequest { x0, v0, times: times.clone() })?;

    let truth_grid = TimeGrid::new(config.dt, horizon_samples)?;
    let truth = Trajectory::new(
        truth_grid,
        clean.samples()[..horizon_samples].to_vec(),
        "truth",
    )?;
    let rms = rms_relative_error(&truth, &recon.states)?;

    let rows = config.snapshot_rows.clamp(1, horizon_samples);
    let mut snapshots = Vec::with_capacity(rows * n);
    for r in 0..rows {
        let k = if rows == 1 { 0 } else { r * (horizon_samples - 1) / (rows - 1) };
        for node in 0..n {
            snapshots.push(SnapshotRow {
                time: grid.time(k),
                node,
                truth: truth.sample(k)[node],
                estimate: recon.states[(k, node)],
            });
        }
    }

    Ok(Experiment2Report {
        segments: segments.len(),
        retained_modes: model.n_modes(),
        rms_relative_error: rms,
        reconstruction_samples: horizon_samples,
        eigenvalues: model.eigenvalues().to_vec(),
        snapshots,
    })
}
