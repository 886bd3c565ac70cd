//! Versioned JSON persistence for fitted models.
//!
//! The file keeps the retained training samples and initial velocities:
//! evaluating eigenfunctions at new initial conditions integrates the
//! kernel along every training trajectory, so the matrices alone are not a
//! usable model. Complex numbers are stored as explicit `[re, im]` pairs.
//! Save → load → save is byte-identical.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sodmd::quadrature::{QuadMethod, QuadratureRule, TimeGrid};
use sodmd::signals::Trajectory;
use sodmd::{Error, KernelFamily, KernelSpec, Result, SodmdModel};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelField {
    pub family: String,
    pub shape: f64,
    pub dim: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridField {
    pub dt: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub kernel: KernelField,
    pub grid: GridField,
    pub quad_method: String,
    pub ridge: f64,
    pub eigenvalues: Vec<(f64, f64)>,
    /// Rows of the normalized eigenvector coefficient matrix (R x M).
    pub coeffs: Vec<Vec<(f64, f64)>>,
    /// Liouville modes, row-major n x R.
    pub modes: Vec<Vec<(f64, f64)>>,
    /// M x count x n retained training samples.
    pub training_samples: Vec<Vec<Vec<f64>>>,
    /// M x n initial velocities.
    pub training_iv: Vec<Vec<f64>>,
}

impl ModelFile {
    pub fn from_model(model: &SodmdModel) -> Self {
        let pair = |c: &Complex64| (c.re, c.im);
        let coeffs = (0..model.coeffs().nrows())
            .map(|r| (0..model.coeffs().ncols()).map(|c| pair(&model.coeffs()[(r, c)])).collect())
            .collect();
        let modes = (0..model.modes().nrows())
            .map(|r| (0..model.modes().ncols()).map(|c| pair(&model.modes()[(r, c)])).collect())
            .collect();
        let training_samples = model
            .training()
            .iter()
            .map(|t| t.samples().iter().map(|s| s.iter().cloned().collect()).collect())
            .collect();
        let training_iv = model
            .training()
            .iter()
            .map(|t| {
                t.initial_velocity()
                    .expect("fitted models carry initial velocities")
                    .iter()
                    .cloned()
                    .collect()
            })
            .collect();
        Self {
            format_version: FORMAT_VERSION,
            kernel: KernelField {
                family: model.kernel().family().name().to_string(),
                shape: model.kernel().shape(),
                dim: model.kernel().dim(),
            },
            grid: GridField {
                dt: model.rule().grid().dt(),
                count: model.rule().grid().count(),
            },
            quad_method: model.rule().method().name().to_string(),
            ridge: model.ridge(),
            eigenvalues: model.eigenvalues().iter().map(pair).collect(),
            coeffs,
            modes,
            training_samples,
            training_iv,
        }
    }

    pub fn to_model(&self) -> Result<SodmdModel> {
        let family = KernelFamily::from_name(&self.kernel.family).ok_or_else(|| {
            Error::InvalidInput(format!("unknown kernel family `{}`", self.kernel.family))
        })?;
        let kernel = KernelSpec::new(family, self.kernel.shape, self.kernel.dim)?;
        let grid = TimeGrid::new(self.grid.dt, self.grid.count)?;
        let method = QuadMethod::from_name(&self.quad_method).ok_or_else(|| {
            Error::InvalidInput(format!("unknown quadrature method `{}`", self.quad_method))
        })?;
        let rule = QuadratureRule::new(grid, 2, method)?;

        if self.training_samples.len() != self.training_iv.len() {
            return Err(Error::InvalidInput(
                "training_samples and training_iv disagree on the trajectory count".into(),
            ));
        }
        let training = self
            .training_samples
            .iter()
            .zip(&self.training_iv)
            .enumerate()
            .map(|(i, (samples, iv))| {
                let rows = samples
                    .iter()
                    .map(|row| DVector::from_column_slice(row))
                    .collect();
                Trajectory::new(grid, rows, format!("train_{i}"))?
                    .with_initial_velocity(DVector::from_column_slice(iv))
            })
            .collect::<Result<Vec<_>>>()?;

        let r = self.eigenvalues.len();
        let m = training.len();
        let n = self.kernel.dim;
        let complex = |&(re, im): &(f64, f64)| Complex64::new(re, im);
        let eigenvalues: Vec<Complex64> = self.eigenvalues.iter().map(complex).collect();

        let coeffs = matrix_from_rows(&self.coeffs, r, m, "coeffs")?;
        let modes = matrix_from_rows(&self.modes, n, r, "modes")?;
        SodmdModel::from_parts(kernel, rule, training, eigenvalues, coeffs, modes, self.ridge)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).map_err(|e| {
            Error::InvalidInput(format!("model serialization failed: {e}"))
        })?;
        text.push('\n');
        fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::Format {
                path: path.to_path_buf(),
                line: 1,
                message: format!(
                    "unsupported format_version {} (expected {FORMAT_VERSION})",
                    file.format_version
                ),
            });
        }
        Ok(file)
    }
}

fn matrix_from_rows(
    rows: &[Vec<(f64, f64)>],
    nrows: usize,
    ncols: usize,
    what: &str,
) -> Result<DMatrix<Complex64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidInput(format!(
            "{what} matrix must be {nrows}x{ncols}"
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| {
        Complex64::new(rows[i][j].0, rows[i][j].1)
    }))
}

/// Loads a model file and rebuilds the model, reporting semantic problems
/// as data-format errors tied to the file.
pub fn load_model(path: impl AsRef<Path>) -> Result<SodmdModel> {
    let path = path.as_ref();
    let file = ModelFile::load(path)?;
    file.to_model().map_err(|e| match e {
        Error::InvalidInput(message) | Error::DegenerateData(message) => Error::Format {
            path: path.to_path_buf(),
            line: 1,
            message,
        },
        other => other,
    })
}
