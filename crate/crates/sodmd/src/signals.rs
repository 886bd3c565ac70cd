//! Trajectory data model, CSV I/O, segmentation, noise injection, and
//! one-point initial-velocity estimation.
//!
//! CSV layout for a single trajectory:
//!
//! ```text
//! t,x1,...,xn
//! #iv: v1,...,vn        (optional, carries the initial velocity)
//! 0,<x1>,...,<xn>
//! <dt>,<x1>,...,<xn>
//! ...
//! ```
//!
//! A dataset is either a directory of such files or a single file whose
//! header starts with `traj_id` and whose rows are grouped by the leading
//! id column (no `#iv:` support in the combined form; missing velocities
//! are estimated at fit time).

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::quadrature::TimeGrid;

/// A uniformly sampled signal `γ: [0,T] → ℝⁿ` with an optional measured
/// initial velocity `γ̇(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: TimeGrid,
    samples: Vec<DVector<f64>>,
    initial_velocity: Option<DVector<f64>>,
    label: String,
}

impl Trajectory {
    pub fn new(grid: TimeGrid, samples: Vec<DVector<f64>>, label: impl Into<String>) -> Result<Self> {
        if samples.len() != grid.count() {
            return Err(Error::InvalidInput(format!(
                "trajectory has {} samples but its grid expects {}",
                samples.len(),
                grid.count()
            )));
        }
        let dim = samples[0].len();
        if dim == 0 {
            return Err(Error::InvalidInput("trajectory samples must be non-empty vectors".into()));
        }
        for (k, s) in samples.iter().enumerate() {
            if s.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "sample {k} has dimension {} but sample 0 has {dim}",
                    s.len()
                )));
            }
            if s.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!("sample {k} contains a non-finite entry")));
            }
        }
        Ok(Self {
            grid,
            samples,
            initial_velocity: None,
            label: label.into(),
        })
    }

    pub fn with_initial_velocity(mut self, velocity: DVector<f64>) -> Result<Self> {
        if velocity.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "initial velocity has length {} but the trajectory dimension is {}",
                velocity.len(),
                self.dim()
            )));
        }
        if velocity.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("initial velocity contains a non-finite entry".into()));
        }
        self.initial_velocity = Some(velocity);
        Ok(self)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn count(&self) -> usize {
        self.grid.count()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn samples(&self) -> &[DVector<f64>] {
        &self.samples
    }

    pub fn sample(&self, k: usize) -> &DVector<f64> {
        &self.samples[k]
    }

    pub fn initial_velocity(&self) -> Option<&DVector<f64>> {
        self.initial_velocity.as_ref()
    }

    /// `γ̇(0)`, measured if present, otherwise the one-sided O(dt²)
    /// difference `(-3γ(t₀) + 4γ(t₁) - γ(t₂)) / (2 dt)`. With only two
    /// samples this degrades to the first-order forward difference.
    pub fn estimate_initial_velocity(&self) -> DVector<f64> {
        if let Some(v) = &self.initial_velocity {
            return v.clone();
        }
        let dt = self.grid.dt();
        if self.count() >= 3 {
            (-3.0 * &self.samples[0] + 4.0 * &self.samples[1] - &self.samples[2]) / (2.0 * dt)
        } else {
            (&self.samples[1] - &self.samples[0]) / dt
        }
    }

    /// Same trajectory with the initial velocity materialized.
    pub fn with_estimated_initial_velocity(&self) -> Self {
        let mut out = self.clone();
        if out.initial_velocity.is_none() {
            out.initial_velocity = Some(self.estimate_initial_velocity());
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        out.push('t');
        for i in 1..=self.dim() {
            out.push_str(&format!(",x{i}"));
        }
        out.push('\n');
        if let Some(v) = &self.initial_velocity {
            out.push_str("#iv: ");
            push_row(&mut out, v.iter().cloned());
            out.push('\n');
        }
        for (k, s) in self.samples.iter().enumerate() {
            out.push_str(&format!("{}", self.grid.time(k)));
            for x in s.iter() {
                out.push_str(&format!(",{x}"));
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        parse_trajectory(&text, path, label)
    }
}

fn push_row(out: &mut String, values: impl Iterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(',');
        }
        out.push_str(&format!("{v}"));
        first = false;
    }
}

fn format_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_float(field: &str, path: &Path, line: usize) -> Result<f64> {
    let value: f64 = field
        .trim()
        .parse()
        .map_err(|_| format_err(path, line, format!("invalid number `{}`", field.trim())))?;
    if !value.is_finite() {
        return Err(format_err(path, line, format!("non-finite number `{}`", field.trim())));
    }
    Ok(value)
}

fn parse_trajectory(text: &str, path: &Path, label: String) -> Result<Trajectory> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| format_err(path, 1, "empty file"))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.is_empty() || columns[0].trim() != "t" || columns.len() < 2 {
        return Err(format_err(path, 1, "expected header `t,x1,...,xn`"));
    }
    let dim = columns.len() - 1;

    let mut initial_velocity = None;
    let mut times = Vec::new();
    let mut samples = Vec::new();
    let mut row_lines = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("#iv:") {
            if !samples.is_empty() || initial_velocity.is_some() {
                return Err(format_err(path, line_no, "`#iv:` must appear once, before any data row"));
            }
            let fields: Vec<&str> = rest.split(',').collect();
            if fields.len() != dim {
                return Err(format_err(
                    path,
                    line_no,
                    format!("`#iv:` carries {} values but the header has {dim} coordinates", fields.len()),
                ));
            }
            let v: Result<Vec<f64>> = fields
                .iter()
                .map(|f| parse_float(f, path, line_no))
                .collect();
            initial_velocity = Some(DVector::from_vec(v?));
            continue;
        }
        if trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != dim + 1 {
            return Err(format_err(
                path,
                line_no,
                format!("expected {} fields, got {}", dim + 1, fields.len()),
            ));
        }
        times.push(parse_float(fields[0], path, line_no)?);
        let row: Result<Vec<f64>> = fields[1..]
            .iter()
            .map(|f| parse_float(f, path, line_no))
            .collect();
        samples.push(DVector::from_vec(row?));
        row_lines.push(line_no);
    }

    if samples.len() < 2 {
        return Err(format_err(path, row_lines.last().copied().unwrap_or(1), "a trajectory needs at least 2 samples"));
    }
    let dt = times[1] - times[0];
    if !(dt.is_finite() && dt > 0.0) {
        return Err(format_err(path, row_lines[1], format!("time step {dt} is not positive")));
    }
    for (k, (&t, &line_no)) in times.iter().zip(&row_lines).enumerate() {
        let expected = k as f64 * dt;
        if (t - expected).abs() > 1e-9 * dt {
            return Err(format_err(
                path,
                line_no,
                format!("non-uniform time column: expected t = {expected}, got {t}"),
            ));
        }
    }

    let grid = TimeGrid::new(dt, samples.len())?;
    let traj = Trajectory::new(grid, samples, label)?;
    match initial_velocity {
        Some(v) => traj.with_initial_velocity(v).map_err(|e| match e {
            Error::InvalidInput(msg) => format_err(path, 2, msg),
            other => other,
        }),
        None => Ok(traj),
    }
}

/// A nonempty collection of trajectories sharing one grid and one state
/// dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    trajectories: Vec<Trajectory>,
}

impl Dataset {
    pub fn new(trajectories: Vec<Trajectory>) -> Result<Self> {
        let first = trajectories
            .first()
            .ok_or_else(|| Error::InvalidInput("dataset must contain at least one trajectory".into()))?;
        let grid = *first.grid();
        let dim = first.dim();
        for t in &trajectories {
            if *t.grid() != grid {
                return Err(Error::InvalidInput(format!(
                    "trajectory `{}` uses a different time grid than `{}`",
                    t.label(),
                    first.label()
                )));
            }
            if t.dim() != dim {
                return Err(Error::InvalidInput(format!(
                    "trajectory `{}` has dimension {} but `{}` has {}",
                    t.label(),
                    t.dim(),
                    first.label(),
                    dim
                )));
            }
        }
        Ok(Self { trajectories })
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn grid(&self) -> &TimeGrid {
        self.trajectories[0].grid()
    }

    pub fn dim(&self) -> usize {
        self.trajectories[0].dim()
    }

    /// Every sample of every trajectory, for shape-parameter heuristics.
    pub fn all_samples(&self) -> Vec<&DVector<f64>> {
        self.trajectories
            .iter()
            .flat_map(|t| t.samples().iter())
            .collect()
    }

    /// Same dataset with every missing initial velocity estimated.
    pub fn with_initial_velocities(&self) -> Self {
        Self {
            trajectories: self
                .trajectories
                .iter()
                .map(Trajectory::with_estimated_initial_velocity)
                .collect(),
        }
    }

    /// Loads a dataset from a directory of trajectory CSVs (sorted by file
    /// name) or from a single CSV, which may be either one trajectory or a
    /// combined file with a leading `traj_id` column.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let trajectories = if path.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(path)
                .map_err(|source| Error::Io {
                    path: path.to_path_buf(),
                    source,
                })?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "csv"))
                .collect();
            if files.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "no .csv files in {}",
                    path.display()
                )));
            }
            files.sort();
            files
                .iter()
                .map(Trajectory::load_csv)
                .collect::<Result<Vec<_>>>()?
        } else {
            let text = fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?;
            let header = text.lines().next().unwrap_or_default();
            if header.split(',').next().map(str::trim) == Some("traj_id") {
                parse_combined(&text, path)?
            } else {
                vec![Trajectory::load_csv(path)?]
            }
        };

        // Re-state homogeneity failures as format errors: they describe the
        // files, not the caller's arguments.
        let first = &trajectories[0];
        for t in &trajectories[1..] {
            if t.grid() != first.grid() || t.dim() != first.dim() {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    line: 1,
                    message: format!(
                        "trajectory `{}` (grid {}x{}, dim {}) is incompatible with `{}` (grid {}x{}, dim {})",
                        t.label(),
                        t.grid().count(),
                        t.grid().dt(),
                        t.dim(),
                        first.label(),
                        first.grid().count(),
                        first.grid().dt(),
                        first.dim(),
                    ),
                });
            }
        }
        Self::new(trajectories)
    }

    /// Writes one CSV per trajectory into `dir`, named by label.
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut used = std::collections::BTreeSet::new();
        for (i, t) in self.trajectories.iter().enumerate() {
            let mut stem = sanitize(t.label());
            if stem.is_empty() {
                stem = format!("traj_{i:05}");
            }
            while !used.insert(stem.clone()) {
                stem.push('_');
            }
            t.save_csv(dir.join(format!("{stem}.csv")))?;
        }
        Ok(())
    }
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

fn parse_combined(text: &str, path: &Path) -> Result<Vec<Trajectory>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| format_err(path, 1, "empty file"))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 3 || columns[1].trim() != "t" {
        return Err(format_err(path, 1, "expected header `traj_id,t,x1,...,xn`"));
    }
    let dim = columns.len() - 2;

    struct Group {
        id: String,
        start_line: usize,
        times: Vec<f64>,
        samples: Vec<DVector<f64>>,
        row_lines: Vec<usize>,
    }
    let mut groups: Vec<Group> = Vec::new();
    let mut seen: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();

    for (idx, line) in lines {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != dim + 2 {
            return Err(format_err(
                path,
                line_no,
                format!("expected {} fields, got {}", dim + 2, fields.len()),
            ));
        }
        let id = fields[0].trim().to_string();
        let new_group = groups.last().map(|g| g.id != id).unwrap_or(true);
        if new_group {
            if !seen.insert(id.clone()) {
                return Err(format_err(
                    path,
                    line_no,
                    format!("trajectory id `{id}` appears in non-contiguous rows"),
                ));
            }
            groups.push(Group {
                id,
                start_line: line_no,
                times: Vec::new(),
                samples: Vec::new(),
                row_lines: Vec::new(),
            });
        }
        let group = groups.last_mut().unwrap();
        group.times.push(parse_float(fields[1], path, line_no)?);
        let row: Result<Vec<f64>> = fields[2..]
            .iter()
            .map(|f| parse_float(f, path, line_no))
            .collect();
        group.samples.push(DVector::from_vec(row?));
        group.row_lines.push(line_no);
    }

    let mut out = Vec::new();
    for g in groups {
        if g.samples.len() < 2 {
            return Err(format_err(
                path,
                g.start_line,
                format!("trajectory `{}` needs at least 2 samples", g.id),
            ));
        }
        let dt = g.times[1] - g.times[0];
        if !(dt.is_finite() && dt > 0.0) {
            return Err(format_err(path, g.row_lines[1], format!("time step {dt} is not positive")));
        }
        for (k, (&t, &line_no)) in g.times.iter().zip(&g.row_lines).enumerate() {
            let expected = k as f64 * dt;
            if (t - expected).abs() > 1e-9 * dt {
                return Err(format_err(
                    path,
                    line_no,
                    format!("non-uniform time column: expected t = {expected}, got {t}"),
                ));
            }
        }
        let grid = TimeGrid::new(dt, g.samples.len())?;
        out.push(Trajectory::new(grid, g.samples, g.id)?);
    }
    if out.is_empty() {
        return Err(format_err(path, 1, "combined file contains no data rows"));
    }
    Ok(out)
}

/// Splits a trajectory into windows of `window` consecutive samples at
/// offsets `0, stride, 2·stride, ...`. Each segment restarts time at 0 on
/// the same `dt`; initial velocities are left unset.
pub fn segment(trajectory: &Trajectory, window: usize, stride: usize) -> Result<Dataset> {
    if window < 2 {
        return Err(Error::InvalidInput("segment window must be at least 2".into()));
    }
    if window > trajectory.count() {
        return Err(Error::InvalidInput(format!(
            "segment window {window} exceeds trajectory length {}",
            trajectory.count()
        )));
    }
    if stride < 1 {
        return Err(Error::InvalidInput("segment stride must be at least 1".into()));
    }
    let grid = TimeGrid::new(trajectory.grid().dt(), window)?;
    let segments = (trajectory.count() - window) / stride + 1;
    let mut out = Vec::with_capacity(segments);
    for s in 0..segments {
        let offset = s * stride;
        let samples = trajectory.samples()[offset..offset + window].to_vec();
        out.push(Trajectory::new(
            grid,
            samples,
            format!("{}_s{offset:05}", trajectory.label()),
        )?);
    }
    Dataset::new(out)
}

/// Adds independent `N(0, σ²)` noise to every sample entry and every
/// present initial-velocity entry. Deterministic for a given seed.
pub fn add_noise(dataset: &Dataset, sigma: f64, seed: u64) -> Result<Dataset> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "noise standard deviation must be non-negative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(dataset.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("validated sigma");
    let trajectories = dataset
        .trajectories()
        .iter()
        .map(|t| {
            let samples = t
                .samples()
                .iter()
                .map(|s| s.map(|x| x + normal.sample(&mut rng)))
                .collect();
            let noisy = Trajectory::new(*t.grid(), samples, t.label())?;
            match t.initial_velocity() {
                Some(v) => noisy.with_initial_velocity(v.map(|x| x + normal.sample(&mut rng))),
                None => Ok(noisy),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(trajectories)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(entries: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(entries)
    }

    fn ramp_trajectory(dt: f64, count: usize, dim: usize) -> Trajectory {
        let grid = TimeGrid::new(dt, count).unwrap();
        let samples = (0..count)
            .map(|k| DVector::from_fn(dim, |i, _| k as f64 * dt + i as f64))
            .collect();
        Trajectory::new(grid, samples, "ramp").unwrap()
    }

    #[test]
    fn construction_validates_shape_and_finiteness() {
        let grid = TimeGrid::new(0.5, 3).unwrap();
        assert!(Trajectory::new(grid, vec![v(&[1.0]); 2], "short").is_err());
        assert!(Trajectory::new(grid, vec![v(&[1.0]), v(&[1.0, 2.0]), v(&[1.0])], "ragged").is_err());
        assert!(Trajectory::new(grid, vec![v(&[1.0]), v(&[f64::NAN]), v(&[1.0])], "nan").is_err());
        let t = Trajectory::new(grid, vec![v(&[1.0]); 3], "ok").unwrap();
        assert!(t.clone().with_initial_velocity(v(&[1.0, 2.0])).is_err());
        assert!(t.with_initial_velocity(v(&[1.0])).is_ok());
    }

    #[test]
    fn csv_round_trip_preserves_everything() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        let t = ramp_trajectory(0.5, 3, 2)
            .with_initial_velocity(v(&[0.25, -1.5]))
            .unwrap();
        t.save_csv(&path).unwrap();
        let back = Trajectory::load_csv(&path).unwrap();
        assert_eq!(back.grid(), t.grid());
        assert_eq!(back.samples(), t.samples());
        assert_eq!(back.initial_velocity(), t.initial_velocity());
        assert_eq!(back.label(), "traj");
    }

    #[test]
    fn csv_round_trip_survives_awkward_floats() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        let grid = TimeGrid::new(0.1, 3).unwrap();
        let samples = vec![
            v(&[1.0 / 3.0, -2.2250738585072014e-308]),
            v(&[std::f64::consts::PI, 1.7976931348623157e308]),
            v(&[-0.0, 123456789.123456789]),
        ];
        let t = Trajectory::new(grid, samples, "weird").unwrap();
        t.save_csv(&path).unwrap();
        let back = Trajectory::load_csv(&path).unwrap();
        for (a, b) in t.samples().iter().zip(back.samples()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn non_uniform_time_column_is_rejected_with_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "t,x1\n0,1\n0.5,2\n1.1,3\n").unwrap();
        match Trajectory::load_csv(&path) {
            Err(Error::Format { line, message, .. }) => {
                assert_eq!(line, 4);
                assert!(message.contains("non-uniform"), "{message}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn ragged_and_non_numeric_rows_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let ragged = dir.path().join("ragged.csv");
        fs::write(&ragged, "t,x1,x2\n0,1,2\n0.5,3\n").unwrap();
        match Trajectory::load_csv(&ragged) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected format error, got {other:?}"),
        }

        let alpha = dir.path().join("alpha.csv");
        fs::write(&alpha, "t,x1\n0,1\n0.5,abc\n").unwrap();
        match Trajectory::load_csv(&alpha) {
            Err(Error::Format { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("abc"));
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn experiment_one_shaped_file_loads() {
        // 11 rows sampled every 0.5 s over [0, 5].
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("osc.csv");
        let t = ramp_trajectory(0.5, 11, 2);
        t.save_csv(&path).unwrap();
        let back = Trajectory::load_csv(&path).unwrap();
        assert_eq!(back.count(), 11);
        assert_relative_eq!(back.grid().horizon(), 5.0);
    }

    #[test]
    fn combined_file_groups_by_leading_id() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("all.csv");
        fs::write(
            &path,
            "traj_id,t,x1\na,0,1\na,0.5,2\na,1,3\nb,0,4\nb,0.5,5\nb,1,6\n",
        )
        .unwrap();
        let ds = Dataset::load(&path).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.trajectories()[0].label(), "a");
        assert_eq!(ds.trajectories()[1].label(), "b");
        assert_eq!(ds.trajectories()[1].sample(2), &v(&[6.0]));
    }

    #[test]
    fn combined_file_rejects_non_contiguous_ids() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("all.csv");
        fs::write(
            &path,
            "traj_id,t,x1\na,0,1\na,0.5,2\nb,0,4\nb,0.5,5\na,1,3\n",
        )
        .unwrap();
        match Dataset::load(&path) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 6),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn heterogeneous_directory_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        ramp_trajectory(0.5, 3, 2).save_csv(dir.path().join("a.csv")).unwrap();
        ramp_trajectory(0.25, 3, 2).save_csv(dir.path().join("b.csv")).unwrap();
        assert!(matches!(Dataset::load(dir.path()), Err(Error::Format { .. })));
    }

    #[test]
    fn dataset_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("ds");
        let ds = segment(&ramp_trajectory(0.5, 10, 2), 4, 3).unwrap();
        ds.save_dir(&out).unwrap();
        let back = Dataset::load(&out).unwrap();
        assert_eq!(back.len(), ds.len());
        for (a, b) in back.trajectories().iter().zip(ds.trajectories()) {
            assert_eq!(a.samples(), b.samples());
        }
    }

    #[test]
    fn segment_counts_match_the_window_formula() {
        let long = ramp_trajectory(0.1, 301, 2);
        assert_eq!(segment(&long, 31, 1).unwrap().len(), 271);

        let exact = ramp_trajectory(0.1, 5, 1);
        let one = segment(&exact, 5, 1).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.trajectories()[0].samples(), exact.samples());

        let ds = segment(&ramp_trajectory(0.1, 10, 1), 4, 3).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.trajectories()[2].sample(0)[0], ramp_trajectory(0.1, 10, 1).sample(6)[0]);

        assert!(segment(&exact, 6, 1).is_err());
        assert!(segment(&exact, 3, 0).is_err());
    }

    #[test]
    fn segments_restart_time_and_leave_velocity_unset() {
        let ds = segment(&ramp_trajectory(0.2, 9, 1), 3, 2).unwrap();
        for t in ds.trajectories() {
            assert_eq!(t.grid().time(0), 0.0);
            assert_eq!(t.grid().dt(), 0.2);
            assert!(t.initial_velocity().is_none());
        }
    }

    #[test]
    fn non_overlapping_segments_reassemble_the_source() {
        let source = ramp_trajectory(0.1, 12, 3);
        let ds = segment(&source, 4, 4).unwrap();
        let reassembled: Vec<_> = ds
            .trajectories()
            .iter()
            .flat_map(|t| t.samples().iter().cloned())
            .collect();
        assert_eq!(reassembled, source.samples());
    }

    #[test]
    fn zero_noise_is_the_identity() {
        let ds = segment(&ramp_trajectory(0.1, 10, 2), 4, 2).unwrap();
        let out = add_noise(&ds, 0.0, 7).unwrap();
        assert_eq!(out, ds);
    }

    #[test]
    fn noise_is_deterministic_per_seed_and_differs_across_seeds() {
        let ds = Dataset::new(vec![ramp_trajectory(0.1, 20, 2)
            .with_initial_velocity(v(&[0.5, 0.5]))
            .unwrap()])
        .unwrap();
        let a = add_noise(&ds, 0.01, 42).unwrap();
        let b = add_noise(&ds, 0.01, 42).unwrap();
        let c = add_noise(&ds, 0.01, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        // Initial velocities are perturbed too.
        assert_ne!(a.trajectories()[0].initial_velocity(), ds.trajectories()[0].initial_velocity());
    }

    #[test]
    fn noise_has_the_requested_standard_deviation() {
        // 10 trajectories x 1000 samples x 10 coordinates = 1e5 draws.
        let grid = TimeGrid::new(0.01, 1000).unwrap();
        let trajectories: Vec<_> = (0..10)
            .map(|i| {
                Trajectory::new(grid, vec![DVector::zeros(10); 1000], format!("z{i}")).unwrap()
            })
            .collect();
        let ds = Dataset::new(trajectories).unwrap();
        let noisy = add_noise(&ds, 0.01, 1).unwrap();
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut n = 0usize;
        for t in noisy.trajectories() {
            for s in t.samples() {
                for x in s.iter() {
                    sum += x;
                    sum_sq += x * x;
                    n += 1;
                }
            }
        }
        let mean = sum / n as f64;
        let std = (sum_sq / n as f64 - mean * mean).sqrt();
        assert!(std > 0.0095 && std < 0.0105, "std {std}");
    }

    #[test]
    fn initial_velocity_estimates_are_exact_on_low_degree_polynomials() {
        let grid = TimeGrid::new(0.1, 5).unwrap();
        let linear = Trajectory::new(
            grid,
            (0..5).map(|k| v(&[k as f64 * 0.1, 2.0 * k as f64 * 0.1])).collect(),
            "lin",
        )
        .unwrap();
        assert_eq!(linear.estimate_initial_velocity(), v(&[1.0, 2.0]));

        let constant = Trajectory::new(grid, vec![v(&[3.0]); 5], "const").unwrap();
        assert_eq!(constant.estimate_initial_velocity(), v(&[0.0]));

        let quadratic = Trajectory::new(
            grid,
            (0..5).map(|k| v(&[(k as f64 * 0.1).powi(2)])).collect(),
            "quad",
        )
        .unwrap();
        assert_eq!(quadratic.estimate_initial_velocity(), v(&[0.0]));
    }

    #[test]
    fn initial_velocity_prefers_the_measured_value() {
        let t = ramp_trajectory(0.1, 5, 1)
            .with_initial_velocity(v(&[9.0]))
            .unwrap();
        assert_eq!(t.estimate_initial_velocity(), v(&[9.0]));
    }

    #[test]
    fn two_samples_fall_back_to_forward_difference() {
        let grid = TimeGrid::new(0.5, 2).unwrap();
        let t = Trajectory::new(grid, vec![v(&[1.0]), v(&[2.0])], "two").unwrap();
        assert_eq!(t.estimate_initial_velocity(), v(&[2.0]));
    }

    #[test]
    fn initial_velocity_estimate_converges_at_second_order() {
        let err = |dt: f64| {
            let grid = TimeGrid::new(dt, 4).unwrap();
            let t = Trajectory::new(
                grid,
                (0..4).map(|k| v(&[(k as f64 * dt).sin()])).collect(),
                "sin",
            )
            .unwrap();
            (t.estimate_initial_velocity()[0] - 1.0).abs()
        };
        assert!(err(0.1) / err(0.025) >= 12.0);
    }
}
