//! Command implementations behind the `pdegp` binary: `simulate`, `fit`,
//! `predict` and `summarize`.
//!
//! Every run directory is self-describing: the resolved configuration is
//! serialized verbatim to `config.resolved`, and together with the seed it
//! reproduces all outputs bit-identically. Traces and summaries are CSV-like
//! text with `# key: value` metadata lines so `summarize` can recompute a
//! fit's summary exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{
    export_field, generate_simulation, load_dataset, load_dataset_with_noise_default, linspace,
    save_dataset, ChannelSelection, Dataset, FieldGrid, PointSpec, SimulationSpec,
};
use crate::error::{Error, Result};
use crate::gp::{GpModel, JitterPolicy, Prior, PriorSet};
use crate::hmc::{run_chain, summarize, summarize_pooled, Chain, HmcConfig, PosteriorSummary};
use crate::kernels::{Channel, Param, Params, Point, PARAM_NAMES};

/// Prediction grid `x0:x1:nx,t0:t1:nt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_start: f64,
    pub x_stop: f64,
    pub n_x: usize,
    pub t_start: f64,
    pub t_stop: f64,
    pub n_t: usize,
}

impl GridSpec {
    pub fn parse(spec: &str) -> Result<Self> {
        let err = || {
            Error::InvalidConfig(format!(
                "grid spec `{spec}` must look like x0:x1:nx,t0:t1:nt"
            ))
        };
        let (xs, ts) = spec.split_once(',').ok_or_else(err)?;
        let parse_axis = |axis: &str| -> Result<(f64, f64, usize)> {
            let parts: Vec<&str> = axis.split(':').collect();
            if parts.len() != 3 {
                return Err(err());
            }
            let a: f64 = parts[0].trim().parse().map_err(|_| err())?;
            let b: f64 = parts[1].trim().parse().map_err(|_| err())?;
            let n: usize = parts[2].trim().parse().map_err(|_| err())?;
            Ok((a, b, n))
        };
        let (x_start, x_stop, n_x) = parse_axis(xs)?;
        let (t_start, t_stop, n_t) = parse_axis(ts)?;
        let g = GridSpec {
            x_start,
            x_stop,
            n_x,
            t_start,
            t_stop,
            n_t,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_x == 0 || self.n_t == 0 {
            return Err(Error::InvalidConfig("grid spec: empty axis".into()));
        }
        if !(self.x_start.is_finite()
            && self.x_stop.is_finite()
            && self.t_start.is_finite()
            && self.t_stop.is_finite())
        {
            return Err(Error::InvalidConfig("grid spec: non-finite bounds".into()));
        }
        if (self.n_x > 1 && self.x_stop <= self.x_start)
            || (self.n_t > 1 && self.t_stop <= self.t_start)
        {
            return Err(Error::InvalidConfig("grid spec: axis must increase".into()));
        }
        Ok(())
    }

    pub fn axes(&self) -> (Vec<f64>, Vec<f64>) {
        (
            linspace(self.x_start, self.x_stop, self.n_x),
            linspace(self.t_start, self.t_stop, self.n_t),
        )
    }
}

fn parse_channels(s: &str) -> Result<ChannelSelection> {
    match s.to_ascii_lowercase().as_str() {
        "both" | "yf" | "fy" => Ok(ChannelSelection::Both),
        "y" => Ok(ChannelSelection::YOnly),
        "f" => Ok(ChannelSelection::FOnly),
        other => Err(Error::InvalidConfig(format!(
            "channels must be both, y or f, got `{other}`"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    pub out: PathBuf,
    pub seed: u64,
    /// Number of random sampling locations; each selected channel adds one
    /// row per location.
    pub points: usize,
    /// Regular grid instead of random locations.
    pub grid: Option<GridSpec>,
    pub x_range: (f64, f64),
    pub t_range: (f64, f64),
    pub sigma0: f64,
    pub channels: String,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            out: PathBuf::from("run"),
            seed: 0,
            points: 30,
            grid: None,
            x_range: (0.0, 2.0 * std::f64::consts::PI),
            t_range: (0.0, 2.0 * std::f64::consts::PI),
            sigma0: 0.1,
            channels: "both".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub data: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub samples: usize,
    pub warmup: usize,
    pub step_size: f64,
    pub leapfrog: usize,
    pub target_accept: f64,
    pub chains: usize,
    /// Parameters frozen at a given value, e.g. {"theta_x": 1.0}.
    pub fix: BTreeMap<String, f64>,
    /// Initial values (constrained scale); default 1.0 each.
    pub init: BTreeMap<String, f64>,
    /// Prior specs per parameter: `flat`, `lognormal(mu,sigma)`,
    /// `gamma(shape,rate)`.
    pub priors: BTreeMap<String, String>,
    /// Homoscedastic noise variance for datasets without the column.
    pub noise_var: Option<f64>,
    pub jitter: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            data: PathBuf::new(),
            out: PathBuf::from("run"),
            seed: 0,
            samples: 7000,
            warmup: 1000,
            step_size: 0.1,
            leapfrog: 20,
            target_accept: 0.8,
            chains: 1,
            fix: BTreeMap::new(),
            init: BTreeMap::new(),
            priors: BTreeMap::new(),
            noise_var: None,
            jitter: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictConfig {
    pub data: PathBuf,
    pub out: PathBuf,
    pub grid: Option<GridSpec>,
    /// Summary file to take posterior means from.
    pub params_from: Option<PathBuf>,
    /// Explicit parameter values; override `params_from` entries.
    pub params: BTreeMap<String, f64>,
    pub channels: String,
    pub noise_var: Option<f64>,
}

impl Default for PredictConfig {
    fn default() -> Self {
        PredictConfig {
            data: PathBuf::new(),
            out: PathBuf::from("run"),
            grid: None,
            params_from: None,
            params: BTreeMap::new(),
            channels: "both".into(),
            noise_var: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SummarizeConfig {
    pub trace: PathBuf,
    /// Output path; stdout when absent.
    pub out: Option<PathBuf>,
    /// Leading rows to drop before summarizing.
    pub burn_in: usize,
}

impl Default for SummarizeConfig {
    fn default() -> Self {
        SummarizeConfig {
            trace: PathBuf::new(),
            out: None,
            burn_in: 0,
        }
    }
}

fn ensure_out_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

fn write_resolved_config<T: Serialize>(out: &Path, cfg: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(cfg)
        .map_err(|e| Error::InvalidConfig(format!("cannot serialize config: {e}")))?;
    std::fs::write(out.join("config.resolved"), json + "\n")?;
    Ok(())
}

/// Generate a dataset file plus its provenance sidecar.
pub fn cmd_simulate(cfg: &SimulateConfig) -> Result<PathBuf> {
    let channels = parse_channels(&cfg.channels)?;
    let points = match &cfg.grid {
        Some(g) => {
            g.validate()?;
            PointSpec::Grid {
                x_start: g.x_start,
                x_stop: g.x_stop,
                n_x: g.n_x,
                t_start: g.t_start,
                t_stop: g.t_stop,
                n_t: g.n_t,
            }
        }
        None => {
            if cfg.points == 0 {
                return Err(Error::InvalidInput("simulate: points must be >= 1".into()));
            }
            PointSpec::RandomUniform {
                n_locations: cfg.points,
                x_range: cfg.x_range,
                t_range: cfg.t_range,
            }
        }
    };
    let spec = SimulationSpec {
        points,
        channels,
        sigma0: cfg.sigma0,
        seed: cfg.seed,
    };
    let ds = generate_simulation(&spec)?;
    ensure_out_dir(&cfg.out)?;
    let path = cfg.out.join("dataset.csv");
    save_dataset(&ds, &path)?;
    write_resolved_config(&cfg.out, cfg)?;
    Ok(path)
}

const TRACE_HEADER: &str =
    "iteration,D,alpha,beta,sigma_y2,theta_t,theta_x,accept,log_posterior";

fn trace_to_string(chain: &Chain) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# seed: {}", chain.seed);
    let _ = writeln!(out, "# divergences: {}", chain.divergences);
    let _ = writeln!(out, "# warmup_divergences: {}", chain.warmup_divergences);
    let _ = writeln!(out, "# adapted_step_size: {}", chain.adapted_step_size);
    let _ = writeln!(out, "{TRACE_HEADER}");
    for (i, row) in chain.draws.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            i + 1,
            row[0],
            row[1],
            row[2],
            row[3],
            row[4],
            row[5],
            u8::from(chain.accepts[i]),
            chain.log_posteriors[i]
        );
    }
    out
}

/// A parsed trace file.
#[derive(Debug, Clone)]
pub struct TraceData {
    pub draws: Vec<[f64; 6]>,
    pub accepts: Vec<bool>,
    pub log_posteriors: Vec<f64>,
    pub divergences: usize,
}

pub fn read_trace(path: &Path) -> Result<TraceData> {
    let text = std::fs::read_to_string(path)?;
    let path_str = path.display().to_string();
    let mut data = TraceData {
        draws: Vec::new(),
        accepts: Vec::new(),
        log_posteriors: Vec::new(),
        divergences: 0,
    };
    let mut header_seen = false;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(body) = trimmed.strip_prefix('#') {
            if let Some((key, value)) = body.split_once(':') {
                if key.trim() == "divergences" {
                    data.divergences = value.trim().parse().unwrap_or(0);
                }
            }
            continue;
        }
        if !header_seen {
            header_seen = true;
            if trimmed != TRACE_HEADER {
                return Err(Error::Parse {
                    path: path_str,
                    line: line_no,
                    column: "header".into(),
                    message: format!("expected `{TRACE_HEADER}`"),
                });
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Parse {
                path: path_str,
                line: line_no,
                column: "row".into(),
                message: format!("expected 9 fields, got {}", fields.len()),
            });
        }
        let mut row = [0.0; 6];
        for k in 0..6 {
            row[k] = fields[k + 1].trim().parse().map_err(|_| Error::Parse {
                path: path_str.clone(),
                line: line_no,
                column: PARAM_NAMES[k].to_string(),
                message: format!("`{}` is not a number", fields[k + 1]),
            })?;
        }
        let accept = match fields[7].trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Parse {
                    path: path_str,
                    line: line_no,
                    column: "accept".into(),
                    message: format!("`{other}` is not 0 or 1"),
                })
            }
        };
        let lp: f64 = fields[8].trim().parse().map_err(|_| Error::Parse {
            path: path_str.clone(),
            line: line_no,
            column: "log_posterior".into(),
            message: format!("`{}` is not a number", fields[8]),
        })?;
        data.draws.push(row);
        data.accepts.push(accept);
        data.log_posteriors.push(lp);
    }
    Ok(data)
}

fn summary_to_string(s: &PosteriorSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# posterior summary");
    let _ = writeln!(out, "# samples: {}", s.n);
    let _ = writeln!(out, "# acceptance_rate: {}", s.acceptance_rate);
    let _ = writeln!(out, "# divergences: {}", s.divergences);
    let _ = writeln!(out, "parameter,mean,sd,ess,degenerate");
    for (i, name) in PARAM_NAMES.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            name, s.mean[i], s.sd[i], s.ess[i], s.degenerate[i]
        );
    }
    let _ = writeln!(out, "correlation,{}", PARAM_NAMES.join(","));
    for (i, name) in PARAM_NAMES.iter().enumerate() {
        let row: Vec<String> = (0..6).map(|j| s.correlation[i][j].to_string()).collect();
        let _ = writeln!(out, "{},{}", name, row.join(","));
    }
    out
}

/// Parse a summary file back; used by `predict --params-from` and the
/// idempotence checks.
pub fn read_summary(path: &Path) -> Result<PosteriorSummary> {
    let text = std::fs::read_to_string(path)?;
    let path_str = path.display().to_string();
    let mut n = 0usize;
    let mut acceptance_rate = 0.0;
    let mut divergences = 0usize;
    let mut mean = [0.0; 6];
    let mut sd = [0.0; 6];
    let mut ess = [0.0; 6];
    let mut degenerate = [false; 6];
    let mut correlation = [[0.0; 6]; 6];
    let mut in_correlation = false;
    let parse_err = |line: usize, column: &str, message: String| Error::Parse {
        path: path_str.clone(),
        line,
        column: column.to_string(),
        message,
    };

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(body) = trimmed.strip_prefix('#') {
            if let Some((key, value)) = body.split_once(':') {
                let value = value.trim();
                match key.trim() {
                    "samples" => n = value.parse().unwrap_or(0),
                    "acceptance_rate" => acceptance_rate = value.parse().unwrap_or(0.0),
                    "divergences" => divergences = value.parse().unwrap_or(0),
                    _ => {}
                }
            }
            continue;
        }
        if trimmed.starts_with("parameter,") {
            in_correlation = false;
            continue;
        }
        if trimmed.starts_with("correlation,") {
            in_correlation = true;
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        let name = fields[0].trim();
        let param = Param::from_name(name)
            .ok_or_else(|| parse_err(line_no, "parameter", format!("unknown parameter `{name}`")))?;
        let i = param.index();
        if in_correlation {
            if fields.len() != 7 {
                return Err(parse_err(line_no, "row", "expected 7 fields".into()));
            }
            for j in 0..6 {
                correlation[i][j] = fields[j + 1].trim().parse().map_err(|_| {
                    parse_err(line_no, PARAM_NAMES[j], "not a number".into())
                })?;
            }
        } else {
            if fields.len() != 5 {
                return Err(parse_err(line_no, "row", "expected 5 fields".into()));
            }
            mean[i] = fields[1].trim().parse().map_err(|_| {
                parse_err(line_no, "mean", "not a number".into())
            })?;
            sd[i] = fields[2].trim().parse().map_err(|_| {
                parse_err(line_no, "sd", "not a number".into())
            })?;
            ess[i] = fields[3].trim().parse().map_err(|_| {
                parse_err(line_no, "ess", "not a number".into())
            })?;
            degenerate[i] = fields[4].trim() == "true";
        }
    }
    Ok(PosteriorSummary {
        n,
        mean,
        sd,
        correlation,
        ess,
        acceptance_rate,
        divergences,
        degenerate,
    })
}

fn parse_prior_spec(spec: &str) -> Result<Prior> {
    let s = spec.trim().to_ascii_lowercase();
    if s == "flat" || s == "flat_log" || s == "flatlog" {
        return Ok(Prior::FlatLog);
    }
    let err = || {
        Error::InvalidConfig(format!(
            "prior spec `{spec}` must be flat, lognormal(mu,sigma) or gamma(shape,rate)"
        ))
    };
    let (family, rest) = s.split_once('(').ok_or_else(err)?;
    let args = rest.strip_suffix(')').ok_or_else(err)?;
    let parts: Vec<&str> = args.split(',').collect();
    if parts.len() != 2 {
        return Err(err());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| err())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| err())?;
    match family.trim() {
        "lognormal" | "log_normal" => Prior::log_normal(a, b),
        "gamma" => Prior::gamma(a, b),
        _ => Err(err()),
    }
}

fn resolve_param_name(name: &str) -> Result<Param> {
    Param::from_name(name)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown parameter `{name}`")))
}

fn load_dataset_flexible(path: &Path, noise_var: Option<f64>) -> Result<Dataset> {
    match noise_var {
        Some(v) => load_dataset_with_noise_default(path, v),
        None => load_dataset(path),
    }
}

/// Outcome of `cmd_fit`: where the artifacts went plus the merged summary.
#[derive(Debug)]
pub struct FitArtifacts {
    pub trace_paths: Vec<PathBuf>,
    pub summary_path: PathBuf,
    pub summary: PosteriorSummary,
}

/// Run HMC on a dataset and write trace(s), summary and resolved config.
pub fn cmd_fit(cfg: &FitConfig) -> Result<FitArtifacts> {
    let ds = load_dataset_flexible(&cfg.data, cfg.noise_var)?;
    let (obs, noise) = ds.to_observations()?;
    let model = GpModel::new(obs, noise)?.with_jitter(JitterPolicy {
        initial: cfg.jitter,
        max: cfg.jitter.max(1e-4),
    });

    let mut priors = PriorSet::flat();
    for (name, spec) in &cfg.priors {
        priors.set(resolve_param_name(name)?, parse_prior_spec(spec)?);
    }

    let mut init = [1.0f64; 6];
    for (name, &value) in &cfg.init {
        init[resolve_param_name(name)?.index()] = value;
    }
    let mut sampled = [true; 6];
    for (name, &value) in &cfg.fix {
        let p = resolve_param_name(name)?;
        sampled[p.index()] = false;
        init[p.index()] = value;
    }
    let init = Params::from_array(init)?;

    if cfg.chains == 0 {
        return Err(Error::InvalidConfig("chains must be >= 1".into()));
    }

    let hmc_cfg = |seed: u64| HmcConfig {
        n_warmup: cfg.warmup,
        n_samples: cfg.samples,
        leapfrog_steps: cfg.leapfrog,
        step_size: cfg.step_size,
        mass_diag: None,
        target_accept: cfg.target_accept,
        seed,
        sampled,
        jitter_steps: true,
    };

    // Chains are fully independent; distinct seeds derive from the master
    // seed, so results do not depend on scheduling.
    let chains: Vec<Chain> = if cfg.chains == 1 {
        vec![run_chain(&model, &priors, &init, &hmc_cfg(cfg.seed))?.0]
    } else {
        std::thread::scope(|scope| -> Result<Vec<Chain>> {
            let handles: Vec<_> = (0..cfg.chains)
                .map(|k| {
                    let model = &model;
                    let priors = &priors;
                    let init = &init;
                    let cfg_k = hmc_cfg(cfg.seed.wrapping_add(k as u64));
                    scope.spawn(move || run_chain(model, priors, init, &cfg_k).map(|r| r.0))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("chain thread panicked"))
                .collect()
        })?
    };

    ensure_out_dir(&cfg.out)?;
    save_dataset(&ds, &cfg.out.join("dataset.csv"))?;

    let mut trace_paths = Vec::new();
    if chains.len() == 1 {
        let p = cfg.out.join("trace.csv");
        std::fs::write(&p, trace_to_string(&chains[0]))?;
        trace_paths.push(p);
    } else {
        for (k, chain) in chains.iter().enumerate() {
            let p = cfg.out.join(format!("trace_chain{k}.csv"));
            std::fs::write(&p, trace_to_string(chain))?;
            trace_paths.push(p);
        }
    }

    let views: Vec<(&[[f64; 6]], &[bool])> = chains
        .iter()
        .map(|c| (c.draws.as_slice(), c.accepts.as_slice()))
        .collect();
    let total_divergences = chains.iter().map(|c| c.divergences).sum();
    let summary = summarize_pooled(&views, total_divergences)?;

    let summary_path = cfg.out.join("summary.txt");
    std::fs::write(&summary_path, summary_to_string(&summary))?;
    write_resolved_config(&cfg.out, cfg)?;

    Ok(FitArtifacts {
        trace_paths,
        summary_path,
        summary,
    })
}

/// Resolve the parameter source for prediction: summary means, overridden
/// by explicit values.
fn resolve_params(cfg: &PredictConfig) -> Result<Params> {
    let mut values: [Option<f64>; 6] = [None; 6];
    if let Some(path) = &cfg.params_from {
        let summary = read_summary(path)?;
        for (slot, mean) in values.iter_mut().zip(summary.mean) {
            *slot = Some(mean);
        }
    }
    for (name, &v) in &cfg.params {
        values[resolve_param_name(name)?.index()] = Some(v);
    }
    let mut out = [0.0; 6];
    for i in 0..6 {
        out[i] = values[i].ok_or_else(|| {
            Error::InvalidConfig(format!(
                "missing parameter source for {}; pass --params-from or --param {}=<value>",
                PARAM_NAMES[i], PARAM_NAMES[i]
            ))
        })?;
    }
    Params::from_array(out)
}

/// Artifacts of `cmd_predict`.
#[derive(Debug)]
pub struct PredictArtifacts {
    pub field_paths: Vec<PathBuf>,
    pub grid: FieldGrid,
}

/// Evaluate the posterior fields on a grid and export them. When the
/// dataset has only F rows and channel y is requested, this is the
/// probabilistic PDE solve: y is reconstructed without any Y observation.
pub fn cmd_predict(cfg: &PredictConfig) -> Result<PredictArtifacts> {
    let grid_spec = cfg
        .grid
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("predict: missing --grid".into()))?;
    grid_spec.validate()?;
    let params = resolve_params(cfg)?;
    let ds = load_dataset_flexible(&cfg.data, cfg.noise_var)?;
    let (obs, noise) = ds.to_observations()?;
    let f_only = obs.points_y().is_empty();
    let model = GpModel::new(obs, noise)?;

    let channels = match parse_channels(&cfg.channels)? {
        ChannelSelection::Both => vec![Channel::Y, Channel::F],
        ChannelSelection::YOnly => vec![Channel::Y],
        ChannelSelection::FOnly => vec![Channel::F],
    };

    let (xs, ts) = grid_spec.axes();
    let mut grid = FieldGrid::new(xs.clone(), ts.clone())?;
    for ch in &channels {
        let points: Vec<Point> = xs
            .iter()
            .flat_map(|&x| ts.iter().map(move |&t| Point::new(x, t)))
            .collect();
        let field = if *ch == Channel::Y && f_only {
            model.predict_y_from_f(&params, &points)?
        } else {
            let targets: Vec<(Point, Channel)> = points.iter().map(|&p| (p, *ch)).collect();
            model.predict(&params, &targets)?
        };
        let mut mean = DMatrix::zeros(xs.len(), ts.len());
        let mut variance = DMatrix::zeros(xs.len(), ts.len());
        for (k, _) in field.targets.iter().enumerate() {
            let i = k / ts.len();
            let j = k % ts.len();
            mean[(i, j)] = field.mean[k];
            variance[(i, j)] = field.variance[k];
        }
        grid.set_channel(*ch, mean, variance)?;
    }

    ensure_out_dir(&cfg.out)?;
    let mut field_paths = Vec::new();
    for ch in &channels {
        let mut single = FieldGrid::new(xs.clone(), ts.clone())?;
        let data = grid.channel(*ch).unwrap().clone();
        single.set_channel(*ch, data.mean, data.variance)?;
        let path = cfg
            .out
            .join(format!("field_{}.csv", ch.as_str().to_ascii_lowercase()));
        export_field(&single, &path)?;
        field_paths.push(path);
    }
    write_resolved_config(&cfg.out, cfg)?;
    Ok(PredictArtifacts { field_paths, grid })
}

/// Recompute a posterior summary from a stored trace.
pub fn cmd_summarize(cfg: &SummarizeConfig) -> Result<(PosteriorSummary, String)> {
    let trace = read_trace(&cfg.trace)?;
    if trace.draws.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{}: trace has no samples",
            cfg.trace.display()
        )));
    }
    if cfg.burn_in >= trace.draws.len() {
        return Err(Error::InvalidInput(format!(
            "burn-in {} leaves no samples out of {}",
            cfg.burn_in,
            trace.draws.len()
        )));
    }
    let draws = &trace.draws[cfg.burn_in..];
    let accepts = &trace.accepts[cfg.burn_in..];
    let summary = summarize(draws, accepts, trace.divergences)?;
    let text = summary_to_string(&summary);
    if let Some(out) = &cfg.out {
        if let Some(parent) = out.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(out, &text)?;
    }
    Ok((summary, text))
}
