//! Gram and interaction matrix assembly, and the finite-rank operator
//! representation.
//!
//! With second-order occupation kernels `Γᵢ` attached to the training
//! trajectories, the operator is represented on their span by `G⁻¹A`, where
//!
//! * `G[i][j] = ⟨Γᵢ, Γⱼ⟩` is a doubly `(T-t)`-weighted kernel integral, and
//! * `A[i][j] = ⟨B*Γᵢ, Γⱼ⟩` needs only the endpoints of trajectory `i`, its
//!   initial velocity, and kernel gradients — no trajectory derivatives.
//!
//! Row `i` of `A` carries the adjoint-transported kernel `B*Γᵢ`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::quadrature::QuadratureRule;
use crate::signals::{Dataset, Trajectory};

/// Relative eigenvalue cutoff below which a Gram direction is treated as
/// exactly null. Finite-dimensional kernel families (the linear dot
/// product) make the Gram matrix rank-deficient by construction; those null
/// directions are projected out rather than inverted.
const RANK_CUTOFF: f64 = 1e-12;

/// Gram correlation above which two trajectories are reported as
/// near-duplicates.
const DUPLICATE_CORRELATION: f64 = 1.0 - 1e-10;

/// `M x M` matrix of pairwise occupation-kernel inner products. Symmetric
/// and positive semidefinite up to roundoff.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
}

impl GramMatrix {
    /// Wraps a precomputed Gram matrix, checking shape, finiteness, and
    /// symmetry (to `1e-10` of the largest entry).
    pub fn from_entries(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "Gram matrix must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("Gram matrix contains non-finite entries".into()));
        }
        let scale = entries.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..entries.nrows() {
            for j in (i + 1)..entries.ncols() {
                if (entries[(i, j)] - entries[(j, i)]).abs() > 1e-10 * scale.max(1e-300) {
                    return Err(Error::InvalidInput(format!(
                        "Gram matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

/// `M x M` matrix of pairings `⟨B*Γᵢ, Γⱼ⟩`. No symmetry expected.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    entries: DMatrix<f64>,
}

impl InteractionMatrix {
    pub fn from_entries(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "interaction matrix must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(
                "interaction matrix contains non-finite entries".into(),
            ));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

fn check_rule(kernel: &KernelSpec, rule: &QuadratureRule, traj: &Trajectory) -> Result<()> {
    if rule.order() != 2 {
        return Err(Error::InvalidInput(format!(
            "second-order fitting needs an order-2 quadrature rule, got order {}",
            rule.order()
        )));
    }
    if rule.grid() != traj.grid() {
        return Err(Error::InvalidInput(format!(
            "quadrature grid (dt {}, {} nodes) does not match trajectory `{}` (dt {}, {} nodes)",
            rule.grid().dt(),
            rule.grid().count(),
            traj.label(),
            traj.grid().dt(),
            traj.grid().count()
        )));
    }
    if kernel.dim() != traj.dim() {
        return Err(Error::InvalidInput(format!(
            "kernel dimension {} does not match trajectory dimension {}",
            kernel.dim(),
            traj.dim()
        )));
    }
    Ok(())
}

/// `Γᵢ[θ](t)` at a single evaluation point `θ(t)`:
/// `Σₖ wₖ·K̃(point, γᵢ(tₖ))` with `w` the order-2 weights.
pub fn occupation_eval(
    kernel: &KernelSpec,
    rule: &QuadratureRule,
    trajectory: &Trajectory,
    point: &DVector<f64>,
) -> Result<f64> {
    check_rule(kernel, rule, trajectory)?;
    if point.len() != kernel.dim() {
        return Err(Error::InvalidInput(format!(
            "evaluation point has length {} but the kernel dimension is {}",
            point.len(),
            kernel.dim()
        )));
    }
    Ok(occupation_eval_unchecked(kernel, rule, trajectory, point))
}

pub(crate) fn occupation_eval_unchecked(
    kernel: &KernelSpec,
    rule: &QuadratureRule,
    trajectory: &Trajectory,
    point: &DVector<f64>,
) -> f64 {
    rule.order_weights()
        .iter()
        .zip(trajectory.samples())
        .filter(|(&w, _)| w != 0.0)
        .map(|(&w, sample)| w * kernel.eval_unchecked(point, sample))
        .sum()
}

/// `⟨∇₁Γᵢ[θ](0), v⟩` at an evaluation point: the directional derivative of
/// the occupation kernel in its evaluation argument.
pub(crate) fn occupation_grad_dot_unchecked(
    kernel: &KernelSpec,
    rule: &QuadratureRule,
    trajectory: &Trajectory,
    point: &DVector<f64>,
    direction: &DVector<f64>,
) -> f64 {
    // ∇₁K̃(point, sample)·v = ∇₂K̃(sample, point)·v by kernel symmetry.
    rule.order_weights()
        .iter()
        .zip(trajectory.samples())
        .filter(|(&w, _)| w != 0.0)
        .map(|(&w, sample)| w * kernel.grad2_dot_unchecked(sample, point, direction))
        .sum()
}

/// Pairwise occupation-kernel inner products:
/// `G[i][j] = Σₛ Σₜ wₛ wₜ K̃(γᵢ(tₜ), γⱼ(tₛ))`. The upper triangle is
/// computed and mirrored, so the result is exactly symmetric.
pub fn gram(kernel: &KernelSpec, rule: &QuadratureRule, dataset: &Dataset) -> Result<GramMatrix> {
    check_rule(kernel, rule, &dataset.trajectories()[0])?;
    let m = dataset.len();
    let w = rule.order_weights();
    let mut entries = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        let gi = dataset.trajectories()[i].samples();
        for j in i..m {
            let gj = dataset.trajectories()[j].samples();
            let mut total = 0.0;
            for (wa, sa) in w.iter().zip(gi) {
                if *wa == 0.0 {
                    continue;
                }
                let mut inner = 0.0;
                for (wb, sb) in w.iter().zip(gj) {
                    if *wb == 0.0 {
                        continue;
                    }
                    inner += wb * kernel.eval_unchecked(sa, sb);
                }
                total += wa * inner;
            }
            entries[(i, j)] = total;
            entries[(j, i)] = total;
        }
    }
    GramMatrix::from_entries(entries)
}

/// Pairings of the adjoint-transported kernels with the occupation kernels:
///
/// `A[i][j] = Σₜ wₜ·[K̃(γᵢ(T), γⱼ(tₜ)) - K̃(γᵢ(0), γⱼ(tₜ))
///                   - T·∇₂K̃(γⱼ(tₜ), γᵢ(0))·γ̇ᵢ(0)]`.
///
/// Every trajectory must carry an initial velocity (measured or estimated).
pub fn interaction(
    kernel: &KernelSpec,
    rule: &QuadratureRule,
    dataset: &Dataset,
) -> Result<InteractionMatrix> {
    check_rule(kernel, rule, &dataset.trajectories()[0])?;
    let m = dataset.len();
    let horizon = rule.grid().horizon();
    let w = rule.order_weights();
    let mut entries = DMatrix::<f64>::zeros(m, m);
    for (i, ti) in dataset.trajectories().iter().enumerate() {
        let velocity = ti
            .initial_velocity()
            .ok_or_else(|| Error::MissingInitialVelocity {
                label: ti.label().to_string(),
            })?;
        let start = ti.sample(0);
        let end = ti.sample(ti.count() - 1);
        for (j, tj) in dataset.trajectories().iter().enumerate() {
            let mut total = 0.0;
            for (wt, sample) in w.iter().zip(tj.samples()) {
                if *wt == 0.0 {
                    continue;
                }
                total += wt
                    * (kernel.eval_unchecked(end, sample) - kernel.eval_unchecked(start, sample)
                        - horizon * kernel.grad2_dot_unchecked(sample, start, velocity));
            }
            entries[(i, j)] = total;
        }
    }
    InteractionMatrix::from_entries(entries)
}

/// Inner products of the full state observable with each occupation kernel:
/// column `j` is `Σₜ wₜ·γⱼ(tₜ)` (an `n x M` matrix).
pub(crate) fn full_state_matrix(rule: &QuadratureRule, dataset: &Dataset) -> DMatrix<f64> {
    let n = dataset.dim();
    let m = dataset.len();
    let w = rule.order_weights();
    let mut v = DMatrix::<f64>::zeros(n, m);
    for (j, traj) in dataset.trajectories().iter().enumerate() {
        let mut acc = DVector::<f64>::zeros(n);
        for (wt, sample) in w.iter().zip(traj.samples()) {
            if *wt != 0.0 {
                acc.axpy(*wt, sample, 1.0);
            }
        }
        v.set_column(j, &acc);
    }
    v
}

/// Default Tikhonov ridge: `1e-8·trace(G)/M`.
pub fn default_ridge(gram: &GramMatrix) -> f64 {
    1e-8 * gram.entries().trace() / gram.dim() as f64
}

pub(crate) struct FiniteRankInfo {
    /// `(λmax + ridge)/(λmin + ridge)` over the retained eigenspace.
    pub condition_estimate: f64,
    /// Numerical rank of the Gram matrix.
    pub rank: usize,
}

/// Solves `(G + ridge·I)·X = A` for the finite-rank operator representation,
/// restricted to the numerically supported eigenspace of `G`.
///
/// A rank-deficient Gram matrix is not an error by itself: finite-dimensional
/// kernel families produce exactly singular G with A in its range. The null
/// directions carry no information about the operator (no occupation kernel
/// reaches them, and whatever A holds there is discretization residue), so
/// they are projected out instead of being amplified by `1/ridge`. Rank
/// deficiency *is* an error when it comes from near-duplicate trajectories,
/// which are reported by index pair.
pub fn finite_rank(gram: &GramMatrix, interaction: &InteractionMatrix, ridge: f64) -> Result<DMatrix<f64>> {
    finite_rank_with_info(gram, interaction, ridge).map(|(x, _)| x)
}

pub(crate) fn finite_rank_with_info(
    gram: &GramMatrix,
    interaction: &InteractionMatrix,
    ridge: f64,
) -> Result<(DMatrix<f64>, FiniteRankInfo)> {
    let m = gram.dim();
    if interaction.dim() != m {
        return Err(Error::InvalidInput(format!(
            "Gram is {m}x{m} but the interaction matrix is {0}x{0}",
            interaction.dim()
        )));
    }
    if !(ridge.is_finite() && ridge >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "ridge must be non-negative, got {ridge}"
        )));
    }

    let g = gram.entries();
    let eig = g.clone().symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    if !(lambda_max > 0.0) {
        return Err(Error::DegenerateData(
            "Gram matrix is numerically zero; the kernel cannot see this data".into(),
        ));
    }

    let cutoff = RANK_CUTOFF * lambda_max;
    let rank = eig.eigenvalues.iter().filter(|&&l| l > cutoff).count();

    if rank < m {
        let duplicates = near_duplicates(g);
        if !duplicates.is_empty() {
            let listed: Vec<String> = duplicates
                .iter()
                .take(5)
                .map(|(i, j)| format!("({i}, {j})"))
                .collect();
            let suffix = if duplicates.len() > 5 { ", ..." } else { "" };
            return Err(Error::DegenerateData(format!(
                "Gram matrix is singular: trajectory pairs {}{} are near-duplicates; \
                 remove the redundant trajectories or raise the ridge",
                listed.join(", "),
                suffix
            )));
        }
    }

    let lambda_min_retained = eig
        .eigenvalues
        .iter()
        .cloned()
        .filter(|&l| l > cutoff)
        .fold(f64::MAX, f64::min);
    let condition_estimate = (lambda_max + ridge) / (lambda_min_retained + ridge);

    // X = Q·f(Λ)·Qᵀ·A with f(λ) = 1/(λ + ridge) on the retained eigenspace
    // and 0 elsewhere.
    let q = &eig.eigenvectors;
    let mut qta = q.transpose() * interaction.entries();
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        let f = if l > cutoff { 1.0 / (l + ridge) } else { 0.0 };
        qta.row_mut(i).scale_mut(f);
    }
    let x = q * qta;
    Ok((
        x,
        FiniteRankInfo {
            condition_estimate,
            rank,
        },
    ))
}

/// Index pairs whose Gram correlation exceeds the duplicate threshold.
fn near_duplicates(g: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let m = g.nrows();
    let mut pairs = Vec::new();
    for i in 0..m {
        if g[(i, i)] <= 0.0 {
            continue;
        }
        for j in (i + 1)..m {
            if g[(j, j)] <= 0.0 {
                continue;
            }
            let corr = g[(i, j)] / (g[(i, i)] * g[(j, j)]).sqrt();
            if corr > DUPLICATE_CORRELATION {
                pairs.push((i, j));
            }
        }
    }
    pairs
}
