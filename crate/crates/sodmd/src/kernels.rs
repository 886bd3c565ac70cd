//! Scalar kernel functions on ℝⁿ and their gradients.
//!
//! Three families are supported: the Gaussian RBF `exp(-‖x-y‖²/μ)`, the
//! linear dot product `xᵀy`, and the exponential dot product `exp(xᵀy/μ)`.
//! Gradients are closed-form, not numeric: `grad2` differentiates in the
//! second argument, `grad1` in the first, and symmetry of the kernel gives
//! `grad1(x, y) = grad2(y, x)` exactly.

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Gaussian,
    LinearDot,
    ExponentialDot,
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::LinearDot => "linear",
            KernelFamily::ExponentialDot => "exponential",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "gaussian" => Some(KernelFamily::Gaussian),
            "linear" => Some(KernelFamily::LinearDot),
            "exponential" => Some(KernelFamily::ExponentialDot),
            _ => None,
        }
    }

    /// Whether the family uses its shape parameter.
    pub fn uses_shape(&self) -> bool {
        !matches!(self, KernelFamily::LinearDot)
    }
}

/// A kernel family together with its shape parameter and the state dimension
/// it evaluates on.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    shape: f64,
    dim: usize,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, shape: f64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("kernel dimension must be positive".into()));
        }
        if family.uses_shape() && !(shape.is_finite() && shape > 0.0) {
            return Err(Error::InvalidInput(format!(
                "{} kernel needs a positive shape parameter, got {shape}",
                family.name()
            )));
        }
        Ok(Self { family, shape, dim })
    }

    pub fn gaussian(shape: f64, dim: usize) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, shape, dim)
    }

    pub fn linear(dim: usize) -> Result<Self> {
        Self::new(KernelFamily::LinearDot, 1.0, dim)
    }

    pub fn exponential(shape: f64, dim: usize) -> Result<Self> {
        Self::new(KernelFamily::ExponentialDot, shape, dim)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim || y.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "kernel arguments must have length {}, got {} and {}",
                self.dim,
                x.len(),
                y.len()
            )));
        }
        Ok(())
    }

    /// K̃(x, y). Symmetric in its arguments for every family.
    pub fn eval(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        self.check(x, y)?;
        Ok(self.eval_unchecked(x, y))
    }

    pub(crate) fn eval_unchecked(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        match self.family {
            KernelFamily::Gaussian => {
                let sq_dist: f64 = x
                    .iter()
                    .zip(y.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (-sq_dist / self.shape).exp()
            }
            KernelFamily::LinearDot => x.dot(y),
            KernelFamily::ExponentialDot => (x.dot(y) / self.shape).exp(),
        }
    }

    /// ∇₂K̃(x, y): gradient in the second argument, evaluated at `(x, y)`.
    pub fn grad2(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(x, y)?;
        Ok(self.grad2_unchecked(x, y))
    }

    pub(crate) fn grad2_unchecked(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        match self.family {
            KernelFamily::Gaussian => {
                let k = self.eval_unchecked(x, y);
                DVector::from_fn(self.dim, |i, _| 2.0 / self.shape * (x[i] - y[i]) * k)
            }
            KernelFamily::LinearDot => x.clone(),
            KernelFamily::ExponentialDot => {
                let k = self.eval_unchecked(x, y);
                x * (k / self.shape)
            }
        }
    }

    /// ∇₁K̃(x, y); equals `grad2(y, x)` by kernel symmetry.
    pub fn grad1(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(x, y)?;
        Ok(self.grad2_unchecked(y, x))
    }

    /// `∇₂K̃(x, y)·v` without materializing the gradient vector.
    pub(crate) fn grad2_dot_unchecked(
        &self,
        x: &DVector<f64>,
        y: &DVector<f64>,
        v: &DVector<f64>,
    ) -> f64 {
        match self.family {
            KernelFamily::Gaussian => {
                let k = self.eval_unchecked(x, y);
                let s: f64 = x
                    .iter()
                    .zip(y.iter())
                    .zip(v.iter())
                    .map(|((a, b), c)| (a - b) * c)
                    .sum();
                2.0 / self.shape * s * k
            }
            KernelFamily::LinearDot => x.dot(v),
            KernelFamily::ExponentialDot => {
                let k = self.eval_unchecked(x, y);
                x.dot(v) * k / self.shape
            }
        }
    }
}

/// Data-driven shape parameter when none is given.
///
/// Gaussian: twice the median pairwise squared distance of the training
/// samples. Exponential dot product: the mean of `|xᵀy|` over training
/// pairs. Linear: unused, returns 1. Falls back to 1 whenever the statistic
/// degenerates (fewer than two distinct samples, all-zero data).
pub fn heuristic_shape(family: KernelFamily, samples: &[DVector<f64>]) -> f64 {
    const MAX_SAMPLES: usize = 512;
    if !family.uses_shape() || samples.len() < 2 {
        return 1.0;
    }
    let stride = samples.len().div_ceil(MAX_SAMPLES);
    let subset: Vec<&DVector<f64>> = samples.iter().step_by(stride).collect();
    if subset.len() < 2 {
        return 1.0;
    }
    let value = match family {
        KernelFamily::Gaussian => {
            let mut sq_dists = Vec::with_capacity(subset.len() * (subset.len() - 1) / 2);
            for i in 0..subset.len() {
                for j in (i + 1)..subset.len() {
                    let d: f64 = subset[i]
                        .iter()
                        .zip(subset[j].iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    sq_dists.push(d);
                }
            }
            sq_dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
            2.0 * sq_dists[sq_dists.len() / 2]
        }
        KernelFamily::ExponentialDot => {
            let mut total = 0.0;
            let mut pairs = 0usize;
            for i in 0..subset.len() {
                for j in (i + 1)..subset.len() {
                    total += subset[i].dot(subset[j]).abs();
                    pairs += 1;
                }
            }
            total / pairs as f64
        }
        KernelFamily::LinearDot => unreachable!(),
    };
    if value.is_finite() && value > 0.0 {
        value
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(entries: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(entries)
    }

    #[test]
    fn spec_rejects_bad_parameters() {
        assert!(KernelSpec::gaussian(0.0, 2).is_err());
        assert!(KernelSpec::gaussian(-1.0, 2).is_err());
        assert!(KernelSpec::exponential(f64::NAN, 2).is_err());
        assert!(KernelSpec::gaussian(1.0, 0).is_err());
        assert!(KernelSpec::linear(3).is_ok());
    }

    #[test]
    fn eval_rejects_dimension_mismatch() {
        let k = KernelSpec::gaussian(1.0, 2).unwrap();
        assert!(k.eval(&v(&[1.0]), &v(&[1.0, 2.0])).is_err());
        assert!(k.grad1(&v(&[1.0, 2.0]), &v(&[1.0])).is_err());
        assert!(k.grad2(&v(&[1.0]), &v(&[1.0])).is_err());
    }

    #[test]
    fn gaussian_eval_hand_values() {
        let k = KernelSpec::gaussian(1.0, 2).unwrap();
        assert_eq!(k.eval(&v(&[0.3, -0.7]), &v(&[0.3, -0.7])).unwrap(), 1.0);
        let k = KernelSpec::gaussian(1.0, 1).unwrap();
        assert_relative_eq!(
            k.eval(&v(&[0.0]), &v(&[1.0])).unwrap(),
            0.3678794,
            epsilon = 1e-7
        );
    }

    #[test]
    fn linear_eval_hand_values() {
        let k = KernelSpec::linear(2).unwrap();
        assert_eq!(k.eval(&v(&[1.0, 2.0]), &v(&[3.0, 4.0])).unwrap(), 11.0);
        assert_eq!(k.eval(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
    }

    #[test]
    fn grad2_hand_values() {
        let k = KernelSpec::gaussian(1.0, 2).unwrap();
        let g = k.grad2(&v(&[2.0, 5.0]), &v(&[2.0, 5.0])).unwrap();
        assert_eq!(g, v(&[0.0, 0.0]));

        let k = KernelSpec::gaussian(1.0, 1).unwrap();
        let g = k.grad2(&v(&[1.0]), &v(&[0.0])).unwrap();
        assert_relative_eq!(g[0], 0.7357589, epsilon = 1e-7);

        let k = KernelSpec::linear(2).unwrap();
        let g = k.grad2(&v(&[3.0, -1.0]), &v(&[8.0, 0.5])).unwrap();
        assert_eq!(g, v(&[3.0, -1.0]));
    }

    #[test]
    fn grad1_hand_values() {
        // ∂/∂x exp(-(x-y)²/2) at x=0, y=1 is +exp(-0.5): the kernel grows as
        // x moves toward y. Matches grad2(y, x) and the finite-difference
        // check below.
        let k = KernelSpec::gaussian(2.0, 1).unwrap();
        let g = k.grad1(&v(&[0.0]), &v(&[1.0])).unwrap();
        assert_relative_eq!(g[0], 0.6065307, epsilon = 1e-7);

        let k = KernelSpec::linear(2).unwrap();
        let g = k.grad1(&v(&[1.0, 1.0]), &v(&[4.0, -2.0])).unwrap();
        assert_eq!(g, v(&[4.0, -2.0]));
    }

    fn families() -> [KernelSpec; 3] {
        [
            KernelSpec::gaussian(1.7, 3).unwrap(),
            KernelSpec::linear(3).unwrap(),
            KernelSpec::exponential(2.3, 3).unwrap(),
        ]
    }

    #[test]
    fn symmetry_over_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for spec in families() {
            for _ in 0..100 {
                let x = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
                let y = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
                let a = spec.eval(&x, &y).unwrap();
                let b = spec.eval(&y, &x).unwrap();
                assert_eq!(a, b, "{:?}", spec.family());
            }
        }
    }

    #[test]
    fn grad1_equals_grad2_with_swapped_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for spec in families() {
            for _ in 0..50 {
                let x = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
                let y = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
                assert_eq!(
                    spec.grad1(&x, &y).unwrap(),
                    spec.grad2(&y, &x).unwrap(),
                    "{:?}",
                    spec.family()
                );
            }
        }
    }

    #[test]
    fn gradients_match_central_finite_differences() {
        let step = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for spec in families() {
            for _ in 0..50 {
                let x = DVector::from_fn(3, |_, _| rng.random_range(-1.5..1.5));
                let y = DVector::from_fn(3, |_, _| rng.random_range(-1.5..1.5));
                let grad = spec.grad2(&x, &y).unwrap();
                let mut fd = DVector::zeros(3);
                for i in 0..3 {
                    let mut hi = y.clone();
                    let mut lo = y.clone();
                    hi[i] += step;
                    lo[i] -= step;
                    fd[i] = (spec.eval(&x, &hi).unwrap() - spec.eval(&x, &lo).unwrap())
                        / (2.0 * step);
                }
                let scale = grad.norm().max(1e-12);
                assert!(
                    (&fd - &grad).norm() / scale < 1e-6,
                    "{:?}: grad {grad:?} fd {fd:?}",
                    spec.family()
                );
            }
        }
    }

    #[test]
    fn grad2_dot_agrees_with_materialized_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for spec in families() {
            for _ in 0..30 {
                let x = DVector::from_fn(3, |_, _| rng.random_range(-1.5..1.5));
                let y = DVector::from_fn(3, |_, _| rng.random_range(-1.5..1.5));
                let dir = DVector::from_fn(3, |_, _| rng.random_range(-1.5..1.5));
                let full = spec.grad2(&x, &y).unwrap().dot(&dir);
                let fused = spec.grad2_dot_unchecked(&x, &y, &dir);
                assert_relative_eq!(full, fused, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn kernel_matrices_are_positive_semidefinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for spec in families() {
            let points: Vec<DVector<f64>> = (0..20)
                .map(|_| DVector::from_fn(3, |_, _| rng.random_range(-1.5..1.5)))
                .collect();
            let k = nalgebra::DMatrix::from_fn(20, 20, |i, j| {
                spec.eval(&points[i], &points[j]).unwrap()
            });
            let eigs = k.symmetric_eigen().eigenvalues;
            let max = eigs.iter().cloned().fold(f64::MIN, f64::max);
            let min = eigs.iter().cloned().fold(f64::MAX, f64::min);
            assert!(
                min >= -1e-10 * max,
                "{:?}: min {min} max {max}",
                spec.family()
            );
        }
    }

    #[test]
    fn heuristic_shape_is_positive_and_scale_aware() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let samples: Vec<DVector<f64>> = (0..40)
            .map(|_| DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let mu = heuristic_shape(KernelFamily::Gaussian, &samples);
        assert!(mu > 0.0 && mu < 20.0);

        // Doubling the data scale quadruples the squared-distance median.
        let scaled: Vec<DVector<f64>> = samples.iter().map(|s| s * 2.0).collect();
        let mu_scaled = heuristic_shape(KernelFamily::Gaussian, &scaled);
        assert_relative_eq!(mu_scaled, 4.0 * mu, max_relative = 1e-12);

        let mu = heuristic_shape(KernelFamily::ExponentialDot, &samples);
        assert!(mu > 0.0);

        assert_eq!(heuristic_shape(KernelFamily::LinearDot, &samples), 1.0);
        assert_eq!(heuristic_shape(KernelFamily::Gaussian, &samples[..1]), 1.0);
    }
}
