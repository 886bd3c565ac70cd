//! Quadrature rules for the weighted integrals behind occupation kernels.
//!
//! An order-`m` occupation kernel pairs an observable sampled along a
//! trajectory with the functional
//!
//! ```text
//! h  ↦  1/(m-1)! ∫₀ᵀ (T-t)^(m-1) h(t) dt
//! ```
//!
//! (Cauchy's formula for the m-fold iterated integral of `h`). On a uniform
//! grid this becomes a fixed weight vector, so every Gram or interaction
//! entry is a weighted bilinear form over kernel samples.

use crate::error::{Error, Result};

/// Uniform sampling grid on `[0, T]` with `t₀ = 0` and `tₖ = k·dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    count: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, count: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidInput(format!(
                "time step must be positive and finite, got {dt}"
            )));
        }
        if count < 2 {
            return Err(Error::InvalidInput(format!(
                "a time grid needs at least 2 samples, got {count}"
            )));
        }
        Ok(Self { dt, count })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Horizon `T = dt·(count-1)`.
    pub fn horizon(&self) -> f64 {
        self.dt * (self.count - 1) as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.dt * k as f64
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(|k| self.time(k))
    }
}

/// Base quadrature family for the plain integral `∫₀ᵀ h dt`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadMethod {
    Trapezoid,
    Simpson,
}

impl QuadMethod {
    pub fn name(&self) -> &'static str {
        match self {
            QuadMethod::Trapezoid => "trapezoid",
            QuadMethod::Simpson => "simpson",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "trapezoid" => Some(QuadMethod::Trapezoid),
            "simpson" => Some(QuadMethod::Simpson),
            _ => None,
        }
    }
}

/// Node/weight realization of the order-`m` occupation pairing on a grid.
///
/// `base_weights` approximate `∫₀ᵀ h dt`; `order_weights[k]` additionally
/// carry the Cauchy factor `(T-tₖ)^(m-1)/(m-1)!`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    grid: TimeGrid,
    order: usize,
    method: QuadMethod,
    /// True when Simpson was requested on an odd number of intervals and the
    /// final interval fell back to the trapezoid rule.
    mixed: bool,
    base_weights: Vec<f64>,
    order_weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(grid: TimeGrid, order: usize, method: QuadMethod) -> Result<Self> {
        if order < 1 {
            return Err(Error::InvalidInput(
                "quadrature order must be at least 1".into(),
            ));
        }
        let (base_weights, mixed) = base_weights(&grid, method);
        let factorial: f64 = (1..order).map(|k| k as f64).product();
        let order_weights = base_weights
            .iter()
            .enumerate()
            .map(|(k, &w)| {
                // (T - tₖ) written as dt·(count-1-k) so the last weight is an
                // exact zero for order ≥ 2.
                let remaining = grid.dt() * (grid.count() - 1 - k) as f64;
                w * remaining.powi(order as i32 - 1) / factorial
            })
            .collect();
        Ok(Self {
            grid,
            order,
            method,
            mixed,
            base_weights,
            order_weights,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn method(&self) -> QuadMethod {
        self.method
    }

    pub fn is_mixed(&self) -> bool {
        self.mixed
    }

    pub fn base_weights(&self) -> &[f64] {
        &self.base_weights
    }

    pub fn order_weights(&self) -> &[f64] {
        &self.order_weights
    }

    /// Approximates `1/(m-1)! ∫₀ᵀ (T-t)^(m-1) h(t) dt` from samples of `h`
    /// on the grid nodes.
    pub fn integrate(&self, samples: &[f64]) -> Result<f64> {
        if samples.len() != self.grid.count() {
            return Err(Error::InvalidInput(format!(
                "expected {} samples, got {}",
                self.grid.count(),
                samples.len()
            )));
        }
        Ok(self
            .order_weights
            .iter()
            .zip(samples)
            .map(|(w, h)| w * h)
            .sum())
    }
}

fn base_weights(grid: &TimeGrid, method: QuadMethod) -> (Vec<f64>, bool) {
    let n = grid.count();
    let dt = grid.dt();
    match method {
        QuadMethod::Trapezoid => {
            let mut w = vec![dt; n];
            w[0] = dt / 2.0;
            w[n - 1] = dt / 2.0;
            (w, false)
        }
        QuadMethod::Simpson => {
            if n == 2 {
                // A single interval cannot take a Simpson step at all.
                return (vec![dt / 2.0, dt / 2.0], true);
            }
            let (simpson_nodes, mixed) = if n % 2 == 1 { (n, false) } else { (n - 1, true) };
            let mut w = vec![0.0; n];
            w[0] = dt / 3.0;
            w[simpson_nodes - 1] = dt / 3.0;
            for k in 1..simpson_nodes - 1 {
                w[k] = if k % 2 == 1 { 4.0 * dt / 3.0 } else { 2.0 * dt / 3.0 };
            }
            if mixed {
                // Close the leftover interval with a trapezoid step.
                w[n - 2] += dt / 2.0;
                w[n - 1] = dt / 2.0;
            }
            (w, mixed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(dt: f64, count: usize) -> TimeGrid {
        TimeGrid::new(dt, count).unwrap()
    }

    fn sample<F: Fn(f64) -> f64>(g: &TimeGrid, f: F) -> Vec<f64> {
        g.times().map(f).collect()
    }

    /// Independent oracle: the m-fold iterated integral evaluated by nested
    /// cumulative trapezoid passes, with no (T-t) weight anywhere.
    fn nested_integral(samples: &[f64], dt: f64, order: usize) -> f64 {
        let mut current = samples.to_vec();
        for _ in 0..order {
            let mut cumulative = vec![0.0; current.len()];
            for k in 1..current.len() {
                cumulative[k] = cumulative[k - 1] + dt * (current[k - 1] + current[k]) / 2.0;
            }
            current = cumulative;
        }
        *current.last().unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(0.0, 5).is_err());
        assert!(TimeGrid::new(-1.0, 5).is_err());
        assert!(TimeGrid::new(f64::NAN, 5).is_err());
        assert!(TimeGrid::new(0.1, 1).is_err());
        assert!(TimeGrid::new(0.1, 2).is_ok());
    }

    #[test]
    fn trapezoid_weights_match_hand_computation() {
        let rule = QuadratureRule::new(grid(0.5, 3), 1, QuadMethod::Trapezoid).unwrap();
        assert_eq!(rule.base_weights(), &[0.25, 0.5, 0.25]);
        assert_eq!(rule.order_weights(), rule.base_weights());
        assert!(!rule.is_mixed());
    }

    #[test]
    fn order_two_weights_attach_the_cauchy_factor() {
        // T = 1, so (T - tₖ) = (1.0, 0.5, 0.0).
        let rule = QuadratureRule::new(grid(0.5, 3), 2, QuadMethod::Trapezoid).unwrap();
        assert_eq!(rule.order_weights(), &[0.25, 0.25, 0.0]);
    }

    #[test]
    fn order_weights_end_in_exact_zero_for_order_at_least_two() {
        for count in [2, 5, 8, 11] {
            for order in [2, 3, 5] {
                let rule = QuadratureRule::new(grid(0.3, count), order, QuadMethod::Trapezoid)
                    .unwrap();
                assert_eq!(*rule.order_weights().last().unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn base_weights_sum_to_horizon() {
        for count in [2, 3, 4, 7, 10, 101] {
            for method in [QuadMethod::Trapezoid, QuadMethod::Simpson] {
                let g = grid(0.37, count);
                let rule = QuadratureRule::new(g, 1, method).unwrap();
                let total: f64 = rule.base_weights().iter().sum();
                assert_relative_eq!(total, g.horizon(), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn simpson_with_even_count_is_flagged_mixed() {
        let rule = QuadratureRule::new(grid(0.1, 6), 1, QuadMethod::Simpson).unwrap();
        assert!(rule.is_mixed());
        let rule = QuadratureRule::new(grid(0.1, 7), 1, QuadMethod::Simpson).unwrap();
        assert!(!rule.is_mixed());
    }

    #[test]
    fn integrate_rejects_length_mismatch() {
        let rule = QuadratureRule::new(grid(0.5, 3), 2, QuadMethod::Trapezoid).unwrap();
        assert!(rule.integrate(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn integrate_zero_signal_is_zero() {
        let g = grid(0.01, 101);
        let rule = QuadratureRule::new(g, 2, QuadMethod::Trapezoid).unwrap();
        assert_eq!(rule.integrate(&vec![0.0; 101]).unwrap(), 0.0);
    }

    #[test]
    fn integrate_constant_one_order_two() {
        // ∫₀¹ (1-t) dt = 1/2.
        let g = grid(1e-3, 1001);
        let rule = QuadratureRule::new(g, 2, QuadMethod::Trapezoid).unwrap();
        assert_relative_eq!(rule.integrate(&vec![1.0; 1001]).unwrap(), 0.5, epsilon = 1e-9);
    }

    #[test]
    fn integrate_t_squared_order_two() {
        // ∫₀¹ (1-t) t² dt = 1/12; equals the iterated double integral by
        // Cauchy's formula.
        let g = grid(1e-3, 1001);
        let rule = QuadratureRule::new(g, 2, QuadMethod::Trapezoid).unwrap();
        let samples = sample(&g, |t| t * t);
        assert_relative_eq!(
            rule.integrate(&samples).unwrap(),
            1.0 / 12.0,
            epsilon = 1e-6
        );
    }

    #[test]
    fn order_one_reduces_to_base_weights() {
        let rule = QuadratureRule::new(grid(0.2, 9), 1, QuadMethod::Simpson).unwrap();
        assert_eq!(rule.base_weights(), rule.order_weights());
    }

    #[test]
    fn cauchy_formula_matches_nested_double_integral() {
        // The weighted rule and a numerically nested double integral must
        // agree within O(dt²) on a smooth test function.
        let f = |t: f64| (1.3 * t).sin() + 0.4 * t;
        let mut errors = Vec::new();
        for count in [51, 101, 201] {
            let g = grid(1.0 / (count - 1) as f64, count);
            let rule = QuadratureRule::new(g, 2, QuadMethod::Trapezoid).unwrap();
            let samples = sample(&g, f);
            let weighted = rule.integrate(&samples).unwrap();
            let nested = nested_integral(&samples, g.dt(), 2);
            errors.push((weighted - nested).abs());
        }
        // Successive halvings of dt must shrink the discrepancy at an O(dt²)
        // rate (allow slack below the asymptotic factor 4).
        assert!(errors[0] / errors[1] > 3.0, "errors: {errors:?}");
        assert!(errors[1] / errors[2] > 3.0, "errors: {errors:?}");
    }

    #[test]
    fn trapezoid_converges_at_second_order_on_exp() {
        let exact = std::f64::consts::E - 1.0;
        let err = |count: usize| {
            let g = grid(1.0 / (count - 1) as f64, count);
            let rule = QuadratureRule::new(g, 1, QuadMethod::Trapezoid).unwrap();
            (rule.integrate(&sample(&g, f64::exp)).unwrap() - exact).abs()
        };
        let coarse = err(101);
        let fine = err(201);
        assert!(coarse / fine >= 3.5, "ratio {}", coarse / fine);
    }

    #[test]
    fn simpson_beats_trapezoid_on_smooth_integrand() {
        let exact = std::f64::consts::E - 1.0;
        let g = grid(0.05, 21);
        let samples = sample(&g, f64::exp);
        let trap = QuadratureRule::new(g, 1, QuadMethod::Trapezoid).unwrap();
        let simp = QuadratureRule::new(g, 1, QuadMethod::Simpson).unwrap();
        let e_trap = (trap.integrate(&samples).unwrap() - exact).abs();
        let e_simp = (simp.integrate(&samples).unwrap() - exact).abs();
        assert!(e_simp < e_trap / 100.0);
    }
}
