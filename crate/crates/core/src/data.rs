//! Datasets: the trigonometric simulation generator, CSV ingestion and
//! serialization, and dense-grid field export.
//!
//! The dataset file format is UTF-8 CSV with header
//! `x,t,channel,value,noise_variance`, channel in {Y, F} and `.` as the
//! decimal separator. Optional leading `# key: value` comment lines carry
//! provenance metadata and survive a round trip. Field exports are
//! long-format CSV `x,t,channel,mean,variance` sorted by (channel, x, t).

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{NoiseModel, ObservationVector};
use crate::kernels::{Channel, Point};

/// Noiseless protein field of the simulation study, `cos(x) + sin(t)`.
pub fn simulation_truth_y(p: Point) -> f64 {
    p.x.cos() + p.t.sin()
}

/// Noiseless mRNA field, `sin(t) + cos(t) + 2 cos(x)`. This is exactly the
/// operator with unit coefficients applied to [`simulation_truth_y`].
pub fn simulation_truth_f(p: Point) -> f64 {
    p.t.sin() + p.t.cos() + 2.0 * p.x.cos()
}

/// One tagged, noisy observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub x: f64,
    pub t: f64,
    pub channel: Channel,
    pub value: f64,
    pub noise_variance: f64,
}

/// Provenance carried in `#` comment lines of the CSV.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub description: Option<String>,
    pub seed: Option<u64>,
    pub generator: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: Vec<DatasetRow>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(rows: Vec<DatasetRow>) -> Result<Self> {
        let ds = Dataset {
            rows,
            meta: DatasetMeta::default(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::Validation("dataset has no rows".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !(row.x.is_finite() && row.t.is_finite() && row.value.is_finite()) {
                return Err(Error::Validation(format!(
                    "row {i}: non-finite coordinate or value"
                )));
            }
            if !(row.noise_variance.is_finite() && row.noise_variance > 0.0) {
                return Err(Error::Validation(format!(
                    "row {i}: noise_variance must be > 0, got {}",
                    row.noise_variance
                )));
            }
        }
        Ok(())
    }

    pub fn n_y(&self) -> usize {
        self.rows.iter().filter(|r| r.channel == Channel::Y).count()
    }

    pub fn n_f(&self) -> usize {
        self.rows.iter().filter(|r| r.channel == Channel::F).count()
    }

    /// Split into the stacked observation vector and matching noise model,
    /// all-Y-then-all-F in file order.
    pub fn to_observations(&self) -> Result<(ObservationVector, NoiseModel)> {
        self.validate()?;
        let mut points_y = Vec::new();
        let mut values_y = Vec::new();
        let mut points_f = Vec::new();
        let mut values_f = Vec::new();
        let mut noise_y = Vec::new();
        let mut noise_f = Vec::new();
        for row in &self.rows {
            let p = Point::new(row.x, row.t);
            match row.channel {
                Channel::Y => {
                    points_y.push(p);
                    values_y.push(row.value);
                    noise_y.push(row.noise_variance);
                }
                Channel::F => {
                    points_f.push(p);
                    values_f.push(row.value);
                    noise_f.push(row.noise_variance);
                }
            }
        }
        noise_y.extend(noise_f);
        let obs = ObservationVector::new(points_y, values_y, points_f, values_f)?;
        let noise = NoiseModel::new(noise_y)?;
        Ok((obs, noise))
    }
}

/// Where observations are placed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PointSpec {
    /// `n_locations` points uniform over the rectangle.
    RandomUniform {
        n_locations: usize,
        x_range: (f64, f64),
        t_range: (f64, f64),
    },
    /// A regular inclusive grid.
    Grid {
        x_start: f64,
        x_stop: f64,
        n_x: usize,
        t_start: f64,
        t_stop: f64,
        n_t: usize,
    },
    Explicit(Vec<Point>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelSelection {
    Both,
    YOnly,
    FOnly,
}

/// Simulation design: sampling locations are drawn once and each selected
/// channel contributes one row per location, with i.i.d. observation noise
/// per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub points: PointSpec,
    pub channels: ChannelSelection,
    pub sigma0: f64,
    pub seed: u64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        // 30 locations x 2 channels = 60 rows over one full period of the
        // trigonometric fields.
        SimulationSpec {
            points: PointSpec::RandomUniform {
                n_locations: 30,
                x_range: (0.0, 2.0 * std::f64::consts::PI),
                t_range: (0.0, 2.0 * std::f64::consts::PI),
            },
            channels: ChannelSelection::Both,
            sigma0: 0.1,
            seed: 0,
        }
    }
}

/// Inclusive linspace.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

fn spec_locations(spec: &PointSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Point>> {
    use rand::Rng as _;
    let pts = match spec {
        PointSpec::RandomUniform {
            n_locations,
            x_range,
            t_range,
        } => {
            if x_range.1 <= x_range.0 || t_range.1 <= t_range.0 {
                return Err(Error::InvalidInput("point spec: empty range".into()));
            }
            (0..*n_locations)
                .map(|_| {
                    let x = rng.random_range(x_range.0..x_range.1);
                    let t = rng.random_range(t_range.0..t_range.1);
                    Point::new(x, t)
                })
                .collect()
        }
        PointSpec::Grid {
            x_start,
            x_stop,
            n_x,
            t_start,
            t_stop,
            n_t,
        } => {
            let xs = linspace(*x_start, *x_stop, *n_x);
            let ts = linspace(*t_start, *t_stop, *n_t);
            let mut pts = Vec::with_capacity(xs.len() * ts.len());
            for &x in &xs {
                for &t in &ts {
                    pts.push(Point::new(x, t));
                }
            }
            pts
        }
        PointSpec::Explicit(pts) => pts.clone(),
    };
    if pts.is_empty() {
        return Err(Error::InvalidInput("point spec produced no locations".into()));
    }
    for p in &pts {
        if !(p.x.is_finite() && p.t.is_finite()) {
            return Err(Error::InvalidInput("point spec contains non-finite point".into()));
        }
    }
    Ok(pts)
}

/// Generate the simulation-study dataset: `Y = cos(x) + sin(t) + e`,
/// `F = sin(t) + cos(t) + 2 cos(x) + e`, `e ~ N(0, sigma0^2)` i.i.d. per
/// row. Deterministic per seed. When `sigma0 = 0` the recorded noise
/// variance is floored at 1e-12 so the noise model stays positive.
pub fn generate_simulation(spec: &SimulationSpec) -> Result<Dataset> {
    if !(spec.sigma0.is_finite() && spec.sigma0 >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "sigma0 must be finite and >= 0, got {}",
            spec.sigma0
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let locations = spec_locations(&spec.points, &mut rng)?;
    let noise_variance = (spec.sigma0 * spec.sigma0).max(1e-12);
    let normal = Normal::new(0.0, spec.sigma0.max(f64::MIN_POSITIVE)).unwrap();
    let draw = |rng: &mut ChaCha8Rng| -> f64 {
        if spec.sigma0 > 0.0 {
            normal.sample(rng)
        } else {
            0.0
        }
    };

    let mut rows = Vec::new();
    if spec.channels != ChannelSelection::FOnly {
        for &p in &locations {
            rows.push(DatasetRow {
                x: p.x,
                t: p.t,
                channel: Channel::Y,
                value: simulation_truth_y(p) + draw(&mut rng),
                noise_variance,
            });
        }
    }
    if spec.channels != ChannelSelection::YOnly {
        for &p in &locations {
            rows.push(DatasetRow {
                x: p.x,
                t: p.t,
                channel: Channel::F,
                value: simulation_truth_f(p) + draw(&mut rng),
                noise_variance,
            });
        }
    }

    let mut ds = Dataset::new(rows)?;
    ds.meta = DatasetMeta {
        description: Some("simulated trigonometric protein/mRNA fields".into()),
        seed: Some(spec.seed),
        generator: Some(format!(
            "trig-simulation sigma0={} channels={:?}",
            spec.sigma0, spec.channels
        )),
    };
    Ok(ds)
}

const DATASET_HEADER: &str = "x,t,channel,value,noise_variance";

/// Serialize a dataset. Float formatting is shortest-round-trip, so
/// `load(save(ds))` reproduces every value bit for bit.
pub fn dataset_to_string(ds: &Dataset) -> String {
    let mut out = String::new();
    if let Some(d) = &ds.meta.description {
        let _ = writeln!(out, "# description: {d}");
    }
    if let Some(s) = ds.meta.seed {
        let _ = writeln!(out, "# seed: {s}");
    }
    if let Some(g) = &ds.meta.generator {
        let _ = writeln!(out, "# generator: {g}");
    }
    let _ = writeln!(out, "{DATASET_HEADER}");
    for r in &ds.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.x,
            r.t,
            r.channel.as_str(),
            r.value,
            r.noise_variance
        );
    }
    out
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    ds.validate()?;
    std::fs::write(path, dataset_to_string(ds))?;
    Ok(())
}

fn parse_meta_line(line: &str, meta: &mut DatasetMeta) {
    let body = line.trim_start_matches('#').trim();
    if let Some((key, value)) = body.split_once(':') {
        let value = value.trim();
        match key.trim() {
            "description" => meta.description = Some(value.to_string()),
            "seed" => meta.seed = value.parse().ok(),
            "generator" => meta.generator = Some(value.to_string()),
            _ => {}
        }
    }
}

fn parse_f64(
    raw: &str,
    path: &str,
    line_no: usize,
    column: &str,
) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| Error::Parse {
        path: path.to_string(),
        line: line_no,
        column: column.to_string(),
        message: format!("`{raw}` is not a number"),
    })
}

fn load_dataset_impl(path: &Path, default_noise: Option<f64>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let path_str = path.display().to_string();
    let mut meta = DatasetMeta::default();
    let mut rows = Vec::new();
    let mut header_seen = false;
    let mut has_noise_column = true;

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            parse_meta_line(trimmed, &mut meta);
            continue;
        }
        if !header_seen {
            header_seen = true;
            if trimmed == DATASET_HEADER {
                has_noise_column = true;
            } else if trimmed == "x,t,channel,value" {
                has_noise_column = false;
                if default_noise.is_none() {
                    return Err(Error::Validation(format!(
                        "{path_str}: missing `noise_variance` column; pass a homoscedastic \
                         default with --noise-var to load this file"
                    )));
                }
            } else {
                return Err(Error::Parse {
                    path: path_str,
                    line: line_no,
                    column: "header".into(),
                    message: format!("expected `{DATASET_HEADER}`, got `{trimmed}`"),
                });
            }
            continue;
        }

        let fields: Vec<&str> = trimmed.split(',').collect();
        let expected = if has_noise_column { 5 } else { 4 };
        if fields.len() != expected {
            return Err(Error::Parse {
                path: path_str,
                line: line_no,
                column: "row".into(),
                message: format!("expected {expected} fields, got {}", fields.len()),
            });
        }
        let x = parse_f64(fields[0], &path_str, line_no, "x")?;
        let t = parse_f64(fields[1], &path_str, line_no, "t")?;
        let channel = Channel::parse(fields[2].trim()).ok_or_else(|| Error::Parse {
            path: path_str.clone(),
            line: line_no,
            column: "channel".into(),
            message: format!("`{}` is not a channel (expected Y or F)", fields[2]),
        })?;
        let value = parse_f64(fields[3], &path_str, line_no, "value")?;
        let noise_variance = if has_noise_column {
            let v = parse_f64(fields[4], &path_str, line_no, "noise_variance")?;
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!(
                    "{path_str}:{line_no}: noise_variance must be > 0, got {v}"
                )));
            }
            v
        } else {
            default_noise.unwrap()
        };
        rows.push(DatasetRow {
            x,
            t,
            channel,
            value,
            noise_variance,
        });
    }

    let mut ds = Dataset::new(rows)?;
    ds.meta = meta;
    Ok(ds)
}

/// Load a dataset CSV; every row must carry its own noise variance.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    load_dataset_impl(path, None)
}

/// Load a dataset CSV that lacks the `noise_variance` column, assigning the
/// given homoscedastic variance to every row.
pub fn load_dataset_with_noise_default(path: &Path, noise_variance: f64) -> Result<Dataset> {
    if !(noise_variance.is_finite() && noise_variance > 0.0) {
        return Err(Error::InvalidInput(format!(
            "default noise variance must be > 0, got {noise_variance}"
        )));
    }
    load_dataset_impl(path, Some(noise_variance))
}

/// Posterior mean/variance of one channel on a regular grid, shape
/// `n_x x n_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelField {
    pub mean: DMatrix<f64>,
    pub variance: DMatrix<f64>,
}

/// Dense-grid reconstruction of the spatio-temporal fields, the data behind
/// contour plots.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub xs: Vec<f64>,
    pub ts: Vec<f64>,
    pub y: Option<ChannelField>,
    pub f: Option<ChannelField>,
}

impl FieldGrid {
    pub fn new(xs: Vec<f64>, ts: Vec<f64>) -> Result<Self> {
        for axis in [&xs, &ts] {
            if axis.is_empty() {
                return Err(Error::InvalidInput("field grid axis is empty".into()));
            }
            if axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidInput(
                    "field grid axes must be finite and strictly increasing".into(),
                ));
            }
        }
        Ok(FieldGrid {
            xs,
            ts,
            y: None,
            f: None,
        })
    }

    pub fn set_channel(
        &mut self,
        channel: Channel,
        mean: DMatrix<f64>,
        variance: DMatrix<f64>,
    ) -> Result<()> {
        let shape = (self.xs.len(), self.ts.len());
        if mean.shape() != shape || variance.shape() != shape {
            return Err(Error::InvalidInput(format!(
                "field matrices must be {}x{}",
                shape.0, shape.1
            )));
        }
        if variance.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidInput("field variance must be >= 0".into()));
        }
        let field = ChannelField { mean, variance };
        match channel {
            Channel::Y => self.y = Some(field),
            Channel::F => self.f = Some(field),
        }
        Ok(())
    }

    pub fn channel(&self, channel: Channel) -> Option<&ChannelField> {
        match channel {
            Channel::Y => self.y.as_ref(),
            Channel::F => self.f.as_ref(),
        }
    }
}

const FIELD_HEADER: &str = "x,t,channel,mean,variance";

/// Write a field grid as long-format CSV sorted by (channel, x, t).
pub fn export_field(field: &FieldGrid, path: &Path) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{FIELD_HEADER}");
    // channel F sorts before Y
    for (ch, data) in [(Channel::F, &field.f), (Channel::Y, &field.y)] {
        let Some(data) = data else { continue };
        for (i, &x) in field.xs.iter().enumerate() {
            for (j, &t) in field.ts.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    x,
                    t,
                    ch.as_str(),
                    data.mean[(i, j)],
                    data.variance[(i, j)]
                );
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Re-import an exported field file, reconstructing the grid exactly.
pub fn load_field(path: &Path) -> Result<FieldGrid> {
    let text = std::fs::read_to_string(path)?;
    let path_str = path.display().to_string();
    let mut header_seen = false;
    let mut entries: Vec<(f64, f64, Channel, f64, f64)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !header_seen {
            header_seen = true;
            if trimmed != FIELD_HEADER {
                return Err(Error::Parse {
                    path: path_str,
                    line: line_no,
                    column: "header".into(),
                    message: format!("expected `{FIELD_HEADER}`, got `{trimmed}`"),
                });
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                path: path_str,
                line: line_no,
                column: "row".into(),
                message: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let x = parse_f64(fields[0], &path_str, line_no, "x")?;
        let t = parse_f64(fields[1], &path_str, line_no, "t")?;
        let ch = Channel::parse(fields[2].trim()).ok_or_else(|| Error::Parse {
            path: path_str.clone(),
            line: line_no,
            column: "channel".into(),
            message: format!("`{}` is not a channel", fields[2]),
        })?;
        let mean = parse_f64(fields[3], &path_str, line_no, "mean")?;
        let variance = parse_f64(fields[4], &path_str, line_no, "variance")?;
        entries.push((x, t, ch, mean, variance));
    }
    if entries.is_empty() {
        return Err(Error::Validation(format!("{path_str}: no field rows")));
    }

    let mut xs: Vec<f64> = entries.iter().map(|e| e.0).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    let mut ts: Vec<f64> = entries.iter().map(|e| e.1).collect();
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup();
    let mut grid = FieldGrid::new(xs, ts)?;

    for ch in [Channel::Y, Channel::F] {
        let rows: Vec<_> = entries.iter().filter(|e| e.2 == ch).collect();
        if rows.is_empty() {
            continue;
        }
        if rows.len() != grid.xs.len() * grid.ts.len() {
            return Err(Error::Validation(format!(
                "{path_str}: channel {} has {} rows, expected a complete {}x{} grid",
                ch.as_str(),
                rows.len(),
                grid.xs.len(),
                grid.ts.len()
            )));
        }
        let mut mean = DMatrix::zeros(grid.xs.len(), grid.ts.len());
        let mut variance = DMatrix::zeros(grid.xs.len(), grid.ts.len());
        for &&(x, t, _, m, v) in &rows {
            let i = grid.xs.iter().position(|&g| g == x).unwrap();
            let j = grid.ts.iter().position(|&g| g == t).unwrap();
            mean[(i, j)] = m;
            variance[(i, j)] = v;
        }
        grid.set_channel(ch, mean, variance)?;
    }
    Ok(grid)
}
