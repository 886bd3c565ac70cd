//! Eigendecomposition of a general (nonsymmetric) real matrix.
//!
//! Householder reduction to Hessenberg form followed by the Francis
//! double-shift QR iteration with eigenvector backsubstitution. The
//! algorithm follows the public-domain JAMA `EigenvalueDecomposition`
//! (itself derived from the Algol procedures `orthes` and `hqr2` in
//! Wilkinson & Reinsch and the EISPACK Fortran routines). Kept
//! dependency-free so the whole fit pipeline also runs on wasm targets.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Iterations allowed per eigenvalue before giving up. JAMA applies
/// exceptional shifts at 10 and 30 and then loops forever; we surface the
/// failure instead.
const MAX_ITER: usize = 128;

/// Eigenvalues with matching eigenvectors (column `m` pairs with
/// `values[m]`), sorted by descending modulus, ties broken by descending
/// imaginary part. Vectors are scaled to unit Euclidean norm. For real
/// input, complex eigenvalues come in adjacent conjugate pairs with
/// conjugate vectors.
#[derive(Debug, Clone)]
pub struct Eigendecomposition {
    pub values: Vec<Complex64>,
    pub vectors: DMatrix<Complex64>,
}

/// Full eigendecomposition of a square real matrix.
///
/// Every returned pair satisfies `‖A·ν - λ·ν‖ ≤ 1e-8·‖A‖·‖ν‖`; a QR
/// iteration that fails to converge is reported as a numerical error, never
/// returned silently.
pub fn eigendecompose(matrix: &DMatrix<f64>) -> Result<Eigendecomposition> {
    let nn = matrix.nrows();
    if nn == 0 || matrix.ncols() != nn {
        return Err(Error::InvalidInput(format!(
            "eigendecomposition needs a non-empty square matrix, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(
            "eigendecomposition input contains non-finite entries".into(),
        ));
    }

    let mut h = matrix.clone();
    let mut v = DMatrix::<f64>::identity(nn, nn);
    if nn > 2 {
        orthes(&mut h, &mut v);
    }
    let mut d = vec![0.0; nn];
    let mut e = vec![0.0; nn];
    hqr2(&mut h, &mut v, &mut d, &mut e)?;

    // Unpack the packed real/imaginary column storage into complex columns.
    let mut values = vec![Complex64::new(0.0, 0.0); nn];
    let mut vectors = DMatrix::<Complex64>::zeros(nn, nn);
    let mut j = 0;
    while j < nn {
        if e[j] == 0.0 {
            values[j] = Complex64::new(d[j], 0.0);
            for i in 0..nn {
                vectors[(i, j)] = Complex64::new(v[(i, j)], 0.0);
            }
            j += 1;
        } else {
            // Columns j and j+1 hold the real and imaginary parts of the
            // eigenvector for d[j] + i·e[j] (e[j] > 0 by construction).
            values[j] = Complex64::new(d[j], e[j]);
            values[j + 1] = Complex64::new(d[j + 1], e[j + 1]);
            for i in 0..nn {
                let re = v[(i, j)];
                let im = v[(i, j + 1)];
                vectors[(i, j)] = Complex64::new(re, im);
                vectors[(i, j + 1)] = Complex64::new(re, -im);
            }
            j += 2;
        }
    }

    for mut col in vectors.column_iter_mut() {
        let norm = col.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for c in col.iter_mut() {
                *c /= norm;
            }
        }
    }

    let mut order: Vec<usize> = (0..nn).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .norm()
            .total_cmp(&values[a].norm())
            .then(values[b].im.total_cmp(&values[a].im))
    });
    let sorted_values = order.iter().map(|&k| values[k]).collect();
    let sorted_vectors = DMatrix::from_fn(nn, nn, |i, m| vectors[(i, order[m])]);

    Ok(Eigendecomposition {
        values: sorted_values,
        vectors: sorted_vectors,
    })
}

/// Householder reduction of `h` to upper Hessenberg form, accumulating the
/// orthogonal similarity transform into `v`.
fn orthes(h: &mut DMatrix<f64>, v: &mut DMatrix<f64>) {
    let n = h.nrows();
    let low = 0;
    let high = n - 1;
    let mut ort = vec![0.0; n];

    for m in (low + 1)..high {
        let mut scale = 0.0;
        for i in m..=high {
            scale += h[(i, m - 1)].abs();
        }
        if scale != 0.0 {
            // Householder vector for column m-1.
            let mut hh = 0.0;
            for i in (m..=high).rev() {
                ort[i] = h[(i, m - 1)] / scale;
                hh += ort[i] * ort[i];
            }
            let mut g = hh.sqrt();
            if ort[m] > 0.0 {
                g = -g;
            }
            hh -= ort[m] * g;
            ort[m] -= g;

            // Apply H = (I - u uᵀ/h) H (I - u uᵀ/h).
            for j in m..n {
                let mut f = 0.0;
                for i in (m..=high).rev() {
                    f += ort[i] * h[(i, j)];
                }
                f /= hh;
                for i in m..=high {
                    h[(i, j)] -= f * ort[i];
                }
            }
            for i in 0..=high {
                let mut f = 0.0;
                for j in (m..=high).rev() {
                    f += ort[j] * h[(i, j)];
                }
                f /= hh;
                for j in m..=high {
                    h[(i, j)] -= f * ort[j];
                }
            }
            ort[m] *= scale;
            h[(m, m - 1)] = scale * g;
        }
    }

    // Accumulate the transformations (Algol's ortran).
    for m in ((low + 1)..high).rev() {
        if h[(m, m - 1)] != 0.0 {
            for i in (m + 1)..=high {
                ort[i] = h[(i, m - 1)];
            }
            for j in m..=high {
                let mut g = 0.0;
                for i in m..=high {
                    g += ort[i] * v[(i, j)];
                }
                // Double division avoids possible underflow.
                g = (g / ort[m]) / h[(m, m - 1)];
                for i in m..=high {
                    v[(i, j)] += g * ort[i];
                }
            }
        }
    }
}

fn cdiv(xr: f64, xi: f64, yr: f64, yi: f64) -> (f64, f64) {
    if yr.abs() > yi.abs() {
        let r = yi / yr;
        let d = yr + r * yi;
        ((xr + r * xi) / d, (xi - r * xr) / d)
    } else {
        let r = yr / yi;
        let d = yi + r * yr;
        ((r * xr + xi) / d, (r * xi - xr) / d)
    }
}

/// Francis double-shift QR on a Hessenberg matrix, with eigenvector
/// backsubstitution and back-transformation into `v`.
// Scratch variables mirror the Algol/EISPACK structure; some initializers
// are dead on purpose.
#[allow(clippy::needless_range_loop, unused_assignments)]
fn hqr2(h: &mut DMatrix<f64>, v: &mut DMatrix<f64>, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let nn = h.nrows();
    let low: usize = 0;
    let high: usize = nn - 1;
    let eps = 2.0_f64.powi(-52);
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut t, mut w, mut x, mut y);

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[(i, j)].abs();
        }
    }
    if norm == 0.0 {
        // Zero matrix: eigenvalues 0, eigenvectors already in v.
        d.fill(0.0);
        e.fill(0.0);
        return Ok(());
    }

    // Outer loop over the active trailing index.
    let mut en = high as isize;
    let mut iter = 0usize;
    while en >= low as isize {
        let n = en as usize;

        // Look for a single small sub-diagonal element.
        let mut l = n;
        while l > low {
            s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            // EISPACK uses <=, which also deflates exactly-zero
            // subdiagonals when the neighbouring diagonal vanishes.
            if h[(l, l - 1)].abs() <= eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            // One root found.
            h[(n, n)] += exshift;
            d[n] = h[(n, n)];
            e[n] = 0.0;
            en -= 1;
            iter = 0;
        } else if l == n - 1 {
            // Two roots found.
            w = h[(n, n - 1)] * h[(n - 1, n)];
            p = (h[(n - 1, n - 1)] - h[(n, n)]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[(n, n)] += exshift;
            h[(n - 1, n - 1)] += exshift;
            x = h[(n, n)];

            if q >= 0.0 {
                // Real pair.
                z = if p >= 0.0 { p + z } else { p - z };
                d[n - 1] = x + z;
                d[n] = d[n - 1];
                if z != 0.0 {
                    d[n] = x - w / z;
                }
                e[n - 1] = 0.0;
                e[n] = 0.0;
                x = h[(n, n - 1)];
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;

                for j in (n - 1)..nn {
                    z = h[(n - 1, j)];
                    h[(n - 1, j)] = q * z + p * h[(n, j)];
                    h[(n, j)] = q * h[(n, j)] - p * z;
                }
                for i in 0..=n {
                    z = h[(i, n - 1)];
                    h[(i, n - 1)] = q * z + p * h[(i, n)];
                    h[(i, n)] = q * h[(i, n)] - p * z;
                }
                for i in low..=high {
                    z = v[(i, n - 1)];
                    v[(i, n - 1)] = q * z + p * v[(i, n)];
                    v[(i, n)] = q * v[(i, n)] - p * z;
                }
            } else {
                // Complex pair.
                d[n - 1] = x + p;
                d[n] = x + p;
                e[n - 1] = z;
                e[n] = -z;
            }
            en -= 2;
            iter = 0;
        } else {
            // No convergence yet: perform a double QR step.
            x = h[(n, n)];
            y = 0.0;
            w = 0.0;
            if l < n {
                y = h[(n - 1, n - 1)];
                w = h[(n, n - 1)] * h[(n - 1, n)];
            }

            // Wilkinson's original ad hoc shift.
            if iter == 10 {
                exshift += x;
                for i in low..=n {
                    h[(i, i)] -= x;
                }
                s = h[(n, n - 1)].abs() + h[(n - 1, n - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }

            // MATLAB's new ad hoc shift.
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in low..=n {
                        h[(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }

            iter += 1;
            if iter > MAX_ITER {
                return Err(Error::Numerical(format!(
                    "QR iteration did not converge after {MAX_ITER} steps on a {nn}x{nn} matrix"
                )));
            }

            // Look for two consecutive small sub-diagonal elements.
            let mut m = n - 2;
            loop {
                z = h[(m, m)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[(m + 1, m)] + h[(m, m + 1)];
                q = h[(m + 1, m + 1)] - z - r - s;
                r = h[(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[(m, m - 1)].abs() * (q.abs() + r.abs())
                    < eps
                        * (p.abs()
                            * (h[(m - 1, m - 1)].abs() + z.abs() + h[(m + 1, m + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in (m + 2)..=n {
                h[(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[(i, i - 3)] = 0.0;
                }
            }

            // Double QR step on rows l..=n and columns m..=n.
            for k in m..n {
                let notlast = k != n - 1;
                if k != m {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if notlast { h[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[(k, k - 1)] = -s * x;
                    } else if l != m {
                        h[(k, k - 1)] = -h[(k, k - 1)];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn {
                        p = h[(k, j)] + q * h[(k + 1, j)];
                        if notlast {
                            p += r * h[(k + 2, j)];
                            h[(k + 2, j)] -= p * z;
                        }
                        h[(k, j)] -= p * x;
                        h[(k + 1, j)] -= p * y;
                    }
                    for i in 0..=n.min(k + 3) {
                        p = x * h[(i, k)] + y * h[(i, k + 1)];
                        if notlast {
                            p += z * h[(i, k + 2)];
                            h[(i, k + 2)] -= p * r;
                        }
                        h[(i, k)] -= p;
                        h[(i, k + 1)] -= p * q;
                    }
                    for i in low..=high {
                        p = x * v[(i, k)] + y * v[(i, k + 1)];
                        if notlast {
                            p += z * v[(i, k + 2)];
                            v[(i, k + 2)] -= p * r;
                        }
                        v[(i, k)] -= p;
                        v[(i, k + 1)] -= p * q;
                    }
                }
            }
        }
    }

    if norm == 0.0 {
        return Ok(());
    }

    // Backsubstitute to find the vectors of the upper triangular form.
    for n in (0..nn).rev() {
        p = d[n];
        q = e[n];

        if q == 0.0 {
            // Real vector.
            let mut l = n;
            h[(n, n)] = 1.0;
            for i in (0..n).rev() {
                w = h[(i, i)] - p;
                r = 0.0;
                for j in l..=n {
                    r += h[(i, j)] * h[(j, n)];
                }
                if e[i] < 0.0 {
                    z = w;
                    s = r;
                } else {
                    l = i;
                    if e[i] == 0.0 {
                        h[(i, n)] = if w != 0.0 { -r / w } else { -r / (eps * norm) };
                    } else {
                        // Solve the real 2x2 system.
                        x = h[(i, i + 1)];
                        y = h[(i + 1, i)];
                        q = (d[i] - p) * (d[i] - p) + e[i] * e[i];
                        t = (x * s - z * r) / q;
                        h[(i, n)] = t;
                        h[(i + 1, n)] = if x.abs() > z.abs() {
                            (-r - w * t) / x
                        } else {
                            (-s - y * t) / z
                        };
                    }

                    // Overflow control.
                    t = h[(i, n)].abs();
                    if (eps * t) * t > 1.0 {
                        for j in i..=n {
                            h[(j, n)] /= t;
                        }
                    }
                }
            }
        } else if q < 0.0 {
            // Complex vector (second member of the pair).
            let mut l = n - 1;

            // Last vector component imaginary, so the matrix is triangular.
            if h[(n, n - 1)].abs() > h[(n - 1, n)].abs() {
                h[(n - 1, n - 1)] = q / h[(n, n - 1)];
                h[(n - 1, n)] = -(h[(n, n)] - p) / h[(n, n - 1)];
            } else {
                let (cr, ci) = cdiv(0.0, -h[(n - 1, n)], h[(n - 1, n - 1)] - p, q);
                h[(n - 1, n - 1)] = cr;
                h[(n - 1, n)] = ci;
            }
            h[(n, n - 1)] = 0.0;
            h[(n, n)] = 1.0;
            for i in (0..n.saturating_sub(1)).rev() {
                let mut ra = 0.0;
                let mut sa = 0.0;
                for j in l..=n {
                    ra += h[(i, j)] * h[(j, n - 1)];
                    sa += h[(i, j)] * h[(j, n)];
                }
                w = h[(i, i)] - p;

                if e[i] < 0.0 {
                    z = w;
                    r = ra;
                    s = sa;
                } else {
                    l = i;
                    if e[i] == 0.0 {
                        let (cr, ci) = cdiv(-ra, -sa, w, q);
                        h[(i, n - 1)] = cr;
                        h[(i, n)] = ci;
                    } else {
                        // Solve the complex 2x2 system.
                        x = h[(i, i + 1)];
                        y = h[(i + 1, i)];
                        let mut vr = (d[i] - p) * (d[i] - p) + e[i] * e[i] - q * q;
                        let vi = (d[i] - p) * 2.0 * q;
                        if vr == 0.0 && vi == 0.0 {
                            vr = eps * norm * (w.abs() + q.abs() + x.abs() + y.abs() + z.abs());
                        }
                        let (cr, ci) =
                            cdiv(x * r - z * ra + q * sa, x * s - z * sa - q * ra, vr, vi);
                        h[(i, n - 1)] = cr;
                        h[(i, n)] = ci;
                        if x.abs() > z.abs() + q.abs() {
                            h[(i + 1, n - 1)] = (-ra - w * h[(i, n - 1)] + q * h[(i, n)]) / x;
                            h[(i + 1, n)] = (-sa - w * h[(i, n)] - q * h[(i, n - 1)]) / x;
                        } else {
                            let (cr, ci) =
                                cdiv(-r - y * h[(i, n - 1)], -s - y * h[(i, n)], z, q);
                            h[(i + 1, n - 1)] = cr;
                            h[(i + 1, n)] = ci;
                        }
                    }

                    // Overflow control.
                    t = h[(i, n - 1)].abs().max(h[(i, n)].abs());
                    if (eps * t) * t > 1.0 {
                        for j in i..=n {
                            h[(j, n - 1)] /= t;
                            h[(j, n)] /= t;
                        }
                    }
                }
            }
        }
    }

    // Back-transform to eigenvectors of the original matrix.
    for j in (low..nn).rev() {
        for i in low..=high {
            z = 0.0;
            for k in low..=j.min(high) {
                z += v[(i, k)] * h[(k, j)];
            }
            v[(i, j)] = z;
        }
    }

    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn residual(a: &DMatrix<f64>, eig: &Eigendecomposition) -> f64 {
        let ac = a.map(|x| Complex64::new(x, 0.0));
        let mut worst: f64 = 0.0;
        for (m, &lambda) in eig.values.iter().enumerate() {
            let v = eig.vectors.column(m).clone_owned();
            let r = &ac * &v - &v * lambda;
            let vnorm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            worst = worst.max(r.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt() / vnorm.max(1e-300));
        }
        worst
    }

    fn matrix_norm(a: &DMatrix<f64>) -> f64 {
        a.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn assert_contract(a: &DMatrix<f64>) {
        let eig = eigendecompose(a).unwrap();
        let tol = 1e-8 * matrix_norm(a).max(1e-300);
        assert!(
            residual(a, &eig) <= tol,
            "residual {} above {tol} for {a}",
            residual(a, &eig)
        );
        // First Newton identities: Σλ = tr(A), Σλ² = tr(A²).
        let sum: Complex64 = eig.values.iter().sum();
        assert_relative_eq!(sum.re, a.trace(), epsilon = 1e-8 * matrix_norm(a).max(1.0));
        assert!(sum.im.abs() <= 1e-8 * matrix_norm(a).max(1.0));
        let sum_sq: Complex64 = eig.values.iter().map(|l| l * l).sum();
        let a2 = a * a;
        assert_relative_eq!(sum_sq.re, a2.trace(), epsilon = 1e-7 * matrix_norm(&a2).max(1.0));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(eigendecompose(&DMatrix::zeros(0, 0)).is_err());
        assert!(eigendecompose(&DMatrix::zeros(2, 3)).is_err());
        let mut nan = DMatrix::zeros(2, 2);
        nan[(0, 0)] = f64::NAN;
        assert!(eigendecompose(&nan).is_err());
    }

    #[test]
    fn diagonal_matrix_sorted_by_modulus() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[-2.0, 3.0]));
        let eig = eigendecompose(&a).unwrap();
        assert_relative_eq!(eig.values[0].re, 3.0, epsilon = 1e-12);
        assert_relative_eq!(eig.values[1].re, -2.0, epsilon = 1e-12);
        assert_contract(&a);
    }

    #[test]
    fn rotation_block_has_pure_imaginary_pair() {
        // charpoly λ² + 2 = 0 → ±i√2; positive imaginary part sorts first.
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, 0.0]);
        let eig = eigendecompose(&a).unwrap();
        let rt2 = 2.0_f64.sqrt();
        assert_relative_eq!(eig.values[0].im, rt2, epsilon = 1e-12);
        assert!(eig.values[0].re.abs() < 1e-12);
        assert_relative_eq!(eig.values[1].im, -rt2, epsilon = 1e-12);
        assert_contract(&a);
    }

    #[test]
    fn defective_nilpotent_block_still_meets_the_residual_contract() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let eig = eigendecompose(&a).unwrap();
        assert!(eig.values.iter().all(|l| l.norm() < 1e-12));
        assert_contract(&a);
    }

    #[test]
    fn one_by_one_matrix() {
        let a = DMatrix::from_row_slice(1, 1, &[4.5]);
        let eig = eigendecompose(&a).unwrap();
        assert_eq!(eig.values[0], Complex64::new(4.5, 0.0));
        assert_eq!(eig.vectors[(0, 0)].norm(), 1.0);
    }

    #[test]
    fn zero_matrix() {
        let a = DMatrix::<f64>::zeros(4, 4);
        let eig = eigendecompose(&a).unwrap();
        assert!(eig.values.iter().all(|l| l.norm() == 0.0));
        assert_contract(&a);
    }

    #[test]
    fn companion_matrix_recovers_known_roots() {
        // charpoly x³ - 6x² + 11x - 6 has roots 1, 2, 3.
        let a = DMatrix::from_row_slice(3, 3, &[6.0, -11.0, 6.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let eig = eigendecompose(&a).unwrap();
        let mut roots: Vec<f64> = eig.values.iter().map(|l| l.re).collect();
        roots.sort_by(f64::total_cmp);
        assert_relative_eq!(roots[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(roots[1], 2.0, epsilon = 1e-9);
        assert_relative_eq!(roots[2], 3.0, epsilon = 1e-9);
        assert_contract(&a);
    }

    #[test]
    fn conjugate_pairs_are_adjacent_with_conjugate_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
        let eig = eigendecompose(&a).unwrap();
        let mut m = 0;
        while m < 6 {
            if eig.values[m].im.abs() > 1e-12 {
                let conj = eig.values[m + 1];
                assert_relative_eq!(eig.values[m].re, conj.re, max_relative = 1e-8);
                assert_relative_eq!(eig.values[m].im, -conj.im, max_relative = 1e-8);
                for i in 0..6 {
                    let a_ = eig.vectors[(i, m)];
                    let b = eig.vectors[(i, m + 1)];
                    assert_relative_eq!(a_.re, b.re, epsilon = 1e-10);
                    assert_relative_eq!(a_.im, -b.im, epsilon = 1e-10);
                }
                m += 2;
            } else {
                m += 1;
            }
        }
    }

    #[test]
    fn random_matrices_meet_the_residual_and_trace_contracts() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in 1..=12 {
            for _ in 0..8 {
                let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
                assert_contract(&a);
            }
        }
    }

    #[test]
    fn symmetric_matrices_agree_with_the_symmetric_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let b = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
            let a = &b + b.transpose();
            let eig = eigendecompose(&a).unwrap();
            assert!(eig.values.iter().all(|l| l.im.abs() < 1e-9));
            let mut ours: Vec<f64> = eig.values.iter().map(|l| l.re).collect();
            let mut reference: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().cloned().collect();
            ours.sort_by(f64::total_cmp);
            reference.sort_by(f64::total_cmp);
            for (o, r) in ours.iter().zip(&reference) {
                assert_relative_eq!(o, r, epsilon = 1e-9 * matrix_norm(&a).max(1.0));
            }
        }
    }

    #[test]
    fn badly_scaled_similarity_still_converges() {
        // D S D⁻¹ with a wide diagonal spread; eigenvalues are those of S.
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.5, -1.0, 0.0, 1.5, 0.3, -0.7, 2.0]);
        let scales = [1e4, 1.0, 1e-4];
        let a = DMatrix::from_fn(3, 3, |i, j| scales[i] * s[(i, j)] / scales[j]);
        let eig_a = eigendecompose(&a).unwrap();
        let eig_s = eigendecompose(&s).unwrap();
        for (x, y) in eig_a.values.iter().zip(&eig_s.values) {
            assert_relative_eq!(x.re, y.re, epsilon = 1e-6);
            assert_relative_eq!(x.im, y.im, epsilon = 1e-6);
        }
    }

    #[test]
    fn repeated_eigenvalues_of_the_identity() {
        let a = DMatrix::<f64>::identity(5, 5);
        let eig = eigendecompose(&a).unwrap();
        for l in &eig.values {
            assert_relative_eq!(l.re, 1.0, epsilon = 1e-12);
            assert!(l.im.abs() < 1e-12);
        }
        assert_contract(&a);
    }
}
