//! The fitted model: normalized eigenfunction coefficients, Liouville
//! modes, and closed-form trajectory reconstruction.
//!
//! An eigenfunction `φ` of the second-order operator with eigenvalue `λ`
//! evolves along a trajectory as `φ̈ = λφ`, so its value is a combination of
//! `e^{±√λ t}`. Expanding the full state observable over the fitted
//! eigenfunctions turns that into the predictor
//!
//! ```text
//! x̂(t) = Re Σₘ ξₘ·[½(φₘ(0) + ∇φₘ(0)·v₀/√λₘ)·e^{√λₘ t}
//!               + ½(φₘ(0) - ∇φₘ(0)·v₀/√λₘ)·e^{-√λₘ t}]
//! ```
//!
//! which needs only the initial state and velocity of the trajectory being
//! predicted.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::eig::eigendecompose;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::operator::{
    default_ridge, finite_rank_with_info, full_state_matrix, gram, interaction,
    occupation_eval_unchecked, occupation_grad_dot_unchecked, GramMatrix,
};
use crate::quadrature::{QuadMethod, QuadratureRule};
use crate::signals::{Dataset, Trajectory};

/// Below this eigenvalue modulus the reconstruction uses the analytic
/// `λ → 0` limit `φ(0) + ∇φ(0)·v₀·t` instead of dividing by `√λ`.
const LAMBDA_EPS: f64 = 1e-10;

/// Eigenvectors whose bilinear normalizer `|νᵀGν|` falls below this factor
/// of the Gram scale are dropped: their normalization is undefined.
const NORMALIZER_CUTOFF: f64 = 1e-12;

/// Imaginary residual ratio above which reconstruction diagnostics raise a
/// conditioning warning.
const IMAG_WARN: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct FitDiagnostics {
    /// `λmax/λmin` of the ridged Gram matrix.
    pub condition_estimate: f64,
    /// Numerical rank of the unridged Gram matrix.
    pub gram_rank: usize,
    /// Positions (in sorted eigenvalue order) of modes dropped because
    /// `|νᵀGν|` was numerically zero.
    pub dropped_modes: Vec<usize>,
    /// Worst relative error when the fitted model reproduces the training
    /// initial states at `t = 0`.
    pub projection_error: f64,
    /// Ridge actually used for the finite-rank solve.
    pub ridge: f64,
}

/// A fitted second-order Liouville DMD model.
///
/// Keeps the training trajectories: evaluating an eigenfunction at a new
/// initial condition integrates the kernel along every training trajectory,
/// so the model is the matrices *and* the data.
#[derive(Debug, Clone)]
pub struct SodmdModel {
    kernel: KernelSpec,
    rule: QuadratureRule,
    training: Vec<Trajectory>,
    eigenvalues: Vec<Complex64>,
    /// Row `m` is `νₘᵀ/√(νₘᵀGνₘ)` over the occupation-kernel basis (R x M).
    coeffs: DMatrix<Complex64>,
    /// Liouville modes, one column per retained eigenfunction (n x R).
    modes: DMatrix<Complex64>,
    ridge: f64,
    diagnostics: Option<FitDiagnostics>,
}

/// Initial condition and prediction times for [`SodmdModel::reconstruct`].
#[derive(Debug, Clone)]
pub struct ReconstructionRequest {
    pub x0: DVector<f64>,
    pub v0: DVector<f64>,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ReconstructionDiagnostics {
    /// Largest discarded imaginary magnitude relative to `‖x̂‖∞`.
    pub max_imag_ratio: f64,
    /// Set when the imaginary residual exceeds 1e-3: the fit is likely
    /// ill-conditioned for this request.
    pub conditioning_warning: bool,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// One row per requested time, `len(times) x n`.
    pub states: DMatrix<f64>,
    pub diagnostics: ReconstructionDiagnostics,
}

/// Fits a model: Gram and interaction assembly, ridge-stabilized
/// finite-rank solve, eigendecomposition, normalization, Liouville modes.
///
/// Missing initial velocities are estimated from the first three samples.
/// `ridge = None` uses the default `1e-8·trace(G)/M`.
pub fn fit(
    dataset: &Dataset,
    kernel: &KernelSpec,
    method: QuadMethod,
    ridge: Option<f64>,
) -> Result<SodmdModel> {
    if kernel.dim() != dataset.dim() {
        return Err(Error::InvalidInput(format!(
            "kernel dimension {} does not match dataset dimension {}",
            kernel.dim(),
            dataset.dim()
        )));
    }
    let prepared = dataset.with_initial_velocities();
    let rule = QuadratureRule::new(*prepared.grid(), 2, method)?;
    let g = gram(kernel, &rule, &prepared)?;
    let a = interaction(kernel, &rule, &prepared)?;
    let ridge = match ridge {
        Some(r) if r.is_finite() && r >= 0.0 => r,
        Some(r) => {
            return Err(Error::InvalidInput(format!(
                "ridge must be non-negative, got {r}"
            )))
        }
        None => default_ridge(&g),
    };
    let (finite, info) = finite_rank_with_info(&g, &a, ridge)?;
    let eig = eigendecompose(&finite)?;

    let m = prepared.len();
    let g_complex = g.entries().map(|x| Complex64::new(x, 0.0));
    let gram_scale = g.entries().iter().fold(0.0f64, |acc, x| acc.max(x.abs()));

    // Normalize each eigenvector by the principal square root of the
    // unconjugated bilinear form νᵀGν, dropping vectors it cannot scale.
    let mut retained_values = Vec::new();
    let mut retained_rows: Vec<DVector<Complex64>> = Vec::new();
    let mut dropped = Vec::new();
    for (idx, &lambda) in eig.values.iter().enumerate() {
        let nu = eig.vectors.column(idx).clone_owned();
        let normalizer = (&g_complex * &nu).dot(&nu);
        if normalizer.norm() < NORMALIZER_CUTOFF * gram_scale {
            dropped.push(idx);
            continue;
        }
        let scale = normalizer.sqrt();
        retained_values.push(lambda);
        retained_rows.push(nu.map(|c| c / scale));
    }
    if retained_rows.is_empty() {
        return Err(Error::DegenerateData(
            "every candidate mode had a numerically zero normalizer νᵀGν".into(),
        ));
    }
    let r = retained_rows.len();
    let coeffs = DMatrix::from_fn(r, m, |row, col| retained_rows[row][col]);

    // Liouville modes: solve ξ·(W·G) = V.
    let v_real = full_state_matrix(&rule, &prepared);
    let v_complex = v_real.map(|x| Complex64::new(x, 0.0));
    let wg = &coeffs * &g_complex;
    let modes = solve_modes(&wg, &v_complex)?;

    let mut model = SodmdModel {
        kernel: kernel.clone(),
        rule,
        training: prepared.trajectories().to_vec(),
        eigenvalues: retained_values,
        coeffs,
        modes,
        ridge,
        diagnostics: None,
    };

    let projection_error = projection_error(&model)?;
    model.diagnostics = Some(FitDiagnostics {
        condition_estimate: info.condition_estimate,
        gram_rank: info.rank,
        dropped_modes: dropped,
        projection_error,
        ridge,
    });
    Ok(model)
}

/// Solves `ξ·P = V` for the modes. Square systems go through an LU solve;
/// when modes were dropped, `P` is rectangular (R x M with R < M) and the
/// least-squares normal equations are used instead.
fn solve_modes(p: &DMatrix<Complex64>, v: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let singular = || Error::Numerical("mode projection system is singular".into());
    if p.nrows() == p.ncols() {
        // Pᵀ ξᵀ = Vᵀ.
        let lu = p.transpose().lu();
        if let Some(solution) = lu.solve(&v.transpose()) {
            let xi = solution.transpose();
            if xi.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
                return Ok(xi);
            }
        }
    }
    // ξ = V·Pᴴ·(P·Pᴴ)⁻¹.
    let s = p * p.adjoint();
    let rhs = v * p.adjoint();
    let lu = s.transpose().lu();
    let solution = lu.solve(&rhs.transpose()).ok_or_else(singular)?;
    let xi = solution.transpose();
    if xi.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        Ok(xi)
    } else {
        Err(singular())
    }
}

/// Worst relative defect when reproducing the training initial states.
fn projection_error(model: &SodmdModel) -> Result<f64> {
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for traj in &model.training {
        let x0 = traj.sample(0).clone();
        let v0 = traj
            .initial_velocity()
            .expect("fit materializes initial velocities")
            .clone();
        scale = scale.max(x0.amax());
        let recon = model.reconstruct(&ReconstructionRequest {
            x0: x0.clone(),
            v0,
            times: vec![0.0],
        })?;
        for k in 0..model.dim() {
            worst = worst.max((recon.states[(0, k)] - x0[k]).abs());
        }
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

impl SodmdModel {
    /// Rebuilds a model from persisted parts. Every training trajectory must
    /// carry its initial velocity.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        kernel: KernelSpec,
        rule: QuadratureRule,
        training: Vec<Trajectory>,
        eigenvalues: Vec<Complex64>,
        coeffs: DMatrix<Complex64>,
        modes: DMatrix<Complex64>,
        ridge: f64,
    ) -> Result<Self> {
        let dataset = Dataset::new(training)?;
        let training = dataset.trajectories().to_vec();
        for t in &training {
            if t.initial_velocity().is_none() {
                return Err(Error::MissingInitialVelocity {
                    label: t.label().to_string(),
                });
            }
        }
        if rule.order() != 2 || rule.grid() != training[0].grid() {
            return Err(Error::InvalidInput(
                "quadrature rule does not match the training grid (order-2 required)".into(),
            ));
        }
        if kernel.dim() != training[0].dim() {
            return Err(Error::InvalidInput(
                "kernel dimension does not match the training data".into(),
            ));
        }
        let m = training.len();
        let r = eigenvalues.len();
        let n = training[0].dim();
        if coeffs.nrows() != r || coeffs.ncols() != m {
            return Err(Error::InvalidInput(format!(
                "coefficient matrix must be {r}x{m}, got {}x{}",
                coeffs.nrows(),
                coeffs.ncols()
            )));
        }
        if modes.nrows() != n || modes.ncols() != r {
            return Err(Error::InvalidInput(format!(
                "mode matrix must be {n}x{r}, got {}x{}",
                modes.nrows(),
                modes.ncols()
            )));
        }
        let finite = |c: &Complex64| c.re.is_finite() && c.im.is_finite();
        if !eigenvalues.iter().all(finite)
            || !coeffs.iter().all(finite)
            || !modes.iter().all(finite)
            || !(ridge.is_finite() && ridge >= 0.0)
        {
            return Err(Error::InvalidInput(
                "model parts contain non-finite values".into(),
            ));
        }
        Ok(Self {
            kernel,
            rule,
            training,
            eigenvalues,
            coeffs,
            modes,
            ridge,
            diagnostics: None,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn training(&self) -> &[Trajectory] {
        &self.training
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn coeffs(&self) -> &DMatrix<Complex64> {
        &self.coeffs
    }

    pub fn modes(&self) -> &DMatrix<Complex64> {
        &self.modes
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn diagnostics(&self) -> Option<&FitDiagnostics> {
        self.diagnostics.as_ref()
    }

    /// State dimension `n`.
    pub fn dim(&self) -> usize {
        self.training[0].dim()
    }

    /// Number of retained modes `R ≤ M`.
    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    fn check_state(&self, name: &str, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "{name} has length {} but the model dimension is {}",
                x.len(),
                self.dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("{name} contains non-finite entries")));
        }
        Ok(())
    }

    /// `(φₘ(0), ∇φₘ(0)·v₀)` for every retained mode at an initial condition.
    fn eigenfunctions_at(
        &self,
        x0: &DVector<f64>,
        v0: &DVector<f64>,
    ) -> (DVector<Complex64>, DVector<Complex64>) {
        let m = self.training.len();
        let mut occ = DVector::<Complex64>::zeros(m);
        let mut grad = DVector::<Complex64>::zeros(m);
        let zero_velocity = v0.iter().all(|&x| x == 0.0);
        for (i, traj) in self.training.iter().enumerate() {
            occ[i] = Complex64::new(
                occupation_eval_unchecked(&self.kernel, &self.rule, traj, x0),
                0.0,
            );
            if !zero_velocity {
                grad[i] = Complex64::new(
                    occupation_grad_dot_unchecked(&self.kernel, &self.rule, traj, x0, v0),
                    0.0,
                );
            }
        }
        (&self.coeffs * occ, &self.coeffs * grad)
    }

    /// Value and velocity pairing of one normalized eigenfunction at an
    /// initial condition: `φₘ[θ](0)` and `∇φₘ[θ](0)·v₀`.
    pub fn eigenfunction_at(
        &self,
        m: usize,
        x0: &DVector<f64>,
        v0: &DVector<f64>,
    ) -> Result<(Complex64, Complex64)> {
        if m >= self.n_modes() {
            return Err(Error::InvalidInput(format!(
                "mode index {m} out of range ({} retained modes)",
                self.n_modes()
            )));
        }
        self.check_state("x0", x0)?;
        self.check_state("v0", v0)?;
        let (phi0, dphi0) = self.eigenfunctions_at(x0, v0);
        Ok((phi0[m], dphi0[m]))
    }

    /// Predicts the state at each requested time from an initial condition.
    pub fn reconstruct(&self, request: &ReconstructionRequest) -> Result<Reconstruction> {
        let sqrts: Vec<Complex64> = self.eigenvalues.iter().map(|l| l.sqrt()).collect();
        self.reconstruct_inner(request, &sqrts)
    }

    /// Reconstruction with explicitly flipped square-root branches; the
    /// output is invariant under any sign pattern (the two modal terms
    /// swap). Exists so tests can assert that invariance.
    #[doc(hidden)]
    pub fn reconstruct_with_branch_signs(
        &self,
        request: &ReconstructionRequest,
        signs: &[f64],
    ) -> Result<Reconstruction> {
        if signs.len() != self.n_modes() {
            return Err(Error::InvalidInput(format!(
                "expected {} branch signs, got {}",
                self.n_modes(),
                signs.len()
            )));
        }
        let sqrts: Vec<Complex64> = self
            .eigenvalues
            .iter()
            .zip(signs)
            .map(|(l, &s)| l.sqrt() * s)
            .collect();
        self.reconstruct_inner(request, &sqrts)
    }

    fn reconstruct_inner(
        &self,
        request: &ReconstructionRequest,
        sqrts: &[Complex64],
    ) -> Result<Reconstruction> {
        self.check_state("x0", &request.x0)?;
        self.check_state("v0", &request.v0)?;
        if request.times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::InvalidInput(
                "prediction times must be finite and non-negative".into(),
            ));
        }

        let (phi0, dphi0) = self.eigenfunctions_at(&request.x0, &request.v0);
        let n = self.dim();
        let r = self.n_modes();
        let mut states = DMatrix::<f64>::zeros(request.times.len(), n);
        let mut max_im = 0.0f64;
        let mut max_re = 0.0f64;
        let one = Complex64::new(1.0, 0.0);
        let mut acc = DVector::<Complex64>::zeros(n);
        for (row, &t) in request.times.iter().enumerate() {
            acc.fill(Complex64::new(0.0, 0.0));
            for m in 0..r {
                let contribution = if self.eigenvalues[m].norm() < LAMBDA_EPS {
                    phi0[m] + dphi0[m] * t
                } else {
                    let s = sqrts[m];
                    let shifted = dphi0[m] / s;
                    (phi0[m] + shifted) * 0.5 * (s * t).exp()
                        + (phi0[m] - shifted) * 0.5 * (-s * t).exp()
                };
                acc.axpy(contribution, &self.modes.column(m), one);
            }
            for k in 0..n {
                states[(row, k)] = acc[k].re;
                max_re = max_re.max(acc[k].re.abs());
                max_im = max_im.max(acc[k].im.abs());
            }
        }
        if states.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(
                "reconstruction produced non-finite states (unstable eigenvalues over this horizon)"
                    .into(),
            ));
        }

        let max_imag_ratio = if max_im == 0.0 {
            0.0
        } else {
            max_im / max_re.max(f64::MIN_POSITIVE)
        };
        Ok(Reconstruction {
            states,
            diagnostics: ReconstructionDiagnostics {
                max_imag_ratio,
                conditioning_warning: max_imag_ratio > IMAG_WARN,
            },
        })
    }

    /// `(row·G·rowᵀ)` for each coefficient row; 1 for a healthy fit. Used by
    /// tests and diagnostics.
    pub fn normalization_residuals(&self, gram: &GramMatrix) -> Vec<Complex64> {
        let g_complex = gram.entries().map(|x| Complex64::new(x, 0.0));
        (0..self.n_modes())
            .map(|m| {
                let row = self.coeffs.row(m).transpose();
                (&g_complex * &row).dot(&row)
            })
            .collect()
    }
}
