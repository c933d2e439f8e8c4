//! `pdegp` command line: simulate, fit, predict, summarize.
//!
//! Each subcommand can load a JSON config file via `--config`; command-line
//! flags override config-file values, and the resolved configuration is
//! written into the output directory for reproducibility.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use pdegp::cli::{
    cmd_fit, cmd_predict, cmd_simulate, cmd_summarize, FitConfig, GridSpec, PredictConfig,
    SimulateConfig, SummarizeConfig,
};
use pdegp::error::{Error, Result};
use pdegp::kernels::PARAM_NAMES;

#[derive(Parser)]
#[command(
    name = "pdegp",
    version,
    about = "PDE parameter inference with operator-derived Gaussian processes and HMC"
)]
struct CliArgs {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a simulated dataset of noisy protein/mRNA observations.
    Simulate {
        /// JSON config file; flags override its values.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of random sampling locations.
        #[arg(long)]
        points: Option<usize>,
        /// Regular grid instead of random locations: x0:x1:nx,t0:t1:nt.
        #[arg(long)]
        grid: Option<String>,
        /// Observation noise standard deviation.
        #[arg(long)]
        sigma0: Option<f64>,
        /// Channels to emit: both, y or f.
        #[arg(long)]
        channels: Option<String>,
        /// Sampling range for x as start:stop.
        #[arg(long)]
        x_range: Option<String>,
        /// Sampling range for t as start:stop.
        #[arg(long)]
        t_range: Option<String>,
    },
    /// Sample the posterior over PDE parameters and kernel hyperparameters.
    Fit {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Post-warmup samples.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        warmup: Option<usize>,
        #[arg(long)]
        step_size: Option<f64>,
        /// Upper bound on leapfrog steps per iteration.
        #[arg(long)]
        leapfrog: Option<usize>,
        #[arg(long)]
        target_accept: Option<f64>,
        /// Independent chains (distinct derived seeds), run concurrently.
        #[arg(long)]
        chains: Option<usize>,
        /// Freeze a parameter: --fix theta_x=1.0 (repeatable).
        #[arg(long = "fix", value_name = "PARAM=VALUE")]
        fix: Vec<String>,
        /// Prior spec: --prior D=lognormal(0,1) (repeatable).
        #[arg(long = "prior", value_name = "PARAM=SPEC")]
        prior: Vec<String>,
        /// Initial value: --init alpha=0.5 (repeatable).
        #[arg(long = "init", value_name = "PARAM=VALUE")]
        init: Vec<String>,
        /// Homoscedastic noise variance for datasets without the column.
        #[arg(long)]
        noise_var: Option<f64>,
        /// Initial relative diagonal jitter.
        #[arg(long)]
        jitter: Option<f64>,
    },
    /// Reconstruct posterior fields on a grid.
    Predict {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Prediction grid: x0:x1:nx,t0:t1:nt.
        #[arg(long)]
        grid: Option<String>,
        /// Take parameter values from a fit's summary file.
        #[arg(long)]
        params_from: Option<PathBuf>,
        /// Explicit parameter value: --param D=1.0 (repeatable, wins over
        /// --params-from).
        #[arg(long = "param", value_name = "PARAM=VALUE")]
        param: Vec<String>,
        #[arg(long)]
        channels: Option<String>,
        #[arg(long)]
        noise_var: Option<f64>,
    },
    /// Recompute a posterior summary from a stored trace.
    Summarize {
        #[arg(long)]
        trace: PathBuf,
        /// Write the summary here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Drop this many leading rows first.
        #[arg(long, default_value_t = 0)]
        burn_in: usize,
    },
}

fn load_config<T: serde::de::DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))
        }
    }
}

fn parse_pair(s: &str) -> Result<(String, f64)> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("expected PARAM=VALUE, got `{s}`")))?;
    let v: f64 = value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("`{value}` is not a number in `{s}`")))?;
    Ok((name.trim().to_string(), v))
}

fn parse_range(s: &str) -> Result<(f64, f64)> {
    let err = || Error::InvalidConfig(format!("expected start:stop, got `{s}`"));
    let (a, b) = s.split_once(':').ok_or_else(err)?;
    let a: f64 = a.trim().parse().map_err(|_| err())?;
    let b: f64 = b.trim().parse().map_err(|_| err())?;
    Ok((a, b))
}

fn merge_pairs(target: &mut BTreeMap<String, f64>, pairs: &[String]) -> Result<()> {
    for s in pairs {
        let (name, v) = parse_pair(s)?;
        target.insert(name, v);
    }
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            config,
            out,
            seed,
            points,
            grid,
            sigma0,
            channels,
            x_range,
            t_range,
        } => {
            let mut cfg: SimulateConfig = load_config(&config)?;
            if let Some(v) = out {
                cfg.out = v;
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if let Some(v) = points {
                cfg.points = v;
            }
            if let Some(v) = grid {
                cfg.grid = Some(GridSpec::parse(&v)?);
            }
            if let Some(v) = sigma0 {
                cfg.sigma0 = v;
            }
            if let Some(v) = channels {
                cfg.channels = v;
            }
            if let Some(v) = x_range {
                cfg.x_range = parse_range(&v)?;
            }
            if let Some(v) = t_range {
                cfg.t_range = parse_range(&v)?;
            }
            let path = cmd_simulate(&cfg)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Fit {
            config,
            data,
            out,
            seed,
            samples,
            warmup,
            step_size,
            leapfrog,
            target_accept,
            chains,
            fix,
            prior,
            init,
            noise_var,
            jitter,
        } => {
            let mut cfg: FitConfig = load_config(&config)?;
            if let Some(v) = data {
                cfg.data = v;
            }
            if let Some(v) = out {
                cfg.out = v;
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if let Some(v) = samples {
                cfg.samples = v;
            }
            if let Some(v) = warmup {
                cfg.warmup = v;
            }
            if let Some(v) = step_size {
                cfg.step_size = v;
            }
            if let Some(v) = leapfrog {
                cfg.leapfrog = v;
            }
            if let Some(v) = target_accept {
                cfg.target_accept = v;
            }
            if let Some(v) = chains {
                cfg.chains = v;
            }
            if let Some(v) = noise_var {
                cfg.noise_var = Some(v);
            }
            if let Some(v) = jitter {
                cfg.jitter = v;
            }
            merge_pairs(&mut cfg.fix, &fix)?;
            merge_pairs(&mut cfg.init, &init)?;
            for s in &prior {
                let (name, spec) = s.split_once('=').ok_or_else(|| {
                    Error::InvalidConfig(format!("expected PARAM=SPEC, got `{s}`"))
                })?;
                cfg.priors
                    .insert(name.trim().to_string(), spec.trim().to_string());
            }
            if cfg.data.as_os_str().is_empty() {
                return Err(Error::InvalidConfig("fit: missing --data".into()));
            }
            let artifacts = cmd_fit(&cfg)?;
            let s = &artifacts.summary;
            println!(
                "fit complete: {} samples, acceptance {:.3}, {} divergences",
                s.n, s.acceptance_rate, s.divergences
            );
            for (i, name) in PARAM_NAMES.iter().enumerate() {
                println!(
                    "  {:<9} mean {:>12.6}  sd {:>12.6}  ess {:>9.1}",
                    name, s.mean[i], s.sd[i], s.ess[i]
                );
            }
            println!("wrote {}", artifacts.summary_path.display());
            Ok(())
        }
        Command::Predict {
            config,
            data,
            out,
            grid,
            params_from,
            param,
            channels,
            noise_var,
        } => {
            let mut cfg: PredictConfig = load_config(&config)?;
            if let Some(v) = data {
                cfg.data = v;
            }
            if let Some(v) = out {
                cfg.out = v;
            }
            if let Some(v) = grid {
                cfg.grid = Some(GridSpec::parse(&v)?);
            }
            if let Some(v) = params_from {
                cfg.params_from = Some(v);
            }
            if let Some(v) = channels {
                cfg.channels = v;
            }
            if let Some(v) = noise_var {
                cfg.noise_var = Some(v);
            }
            merge_pairs(&mut cfg.params, &param)?;
            if cfg.data.as_os_str().is_empty() {
                return Err(Error::InvalidConfig("predict: missing --data".into()));
            }
            let artifacts = cmd_predict(&cfg)?;
            for p in &artifacts.field_paths {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Summarize { trace, out, burn_in } => {
            let cfg = SummarizeConfig {
                trace,
                out: out.clone(),
                burn_in,
            };
            let (_, text) = cmd_summarize(&cfg)?;
            match out {
                Some(p) => println!("wrote {}", p.display()),
                None => print!("{text}"),
            }
            Ok(())
        }
    }
}

fn main() {
    let args = CliArgs::parse();
    if let Err(e) = run(args.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
