//! Hybrid Monte Carlo over the unconstrained log-parameters.
//!
//! Positivity of every inferred parameter is enforced by sampling
//! `phi = ln theta` with the log-Jacobian folded into the target, so the
//! Hamiltonian stays smooth. The integrator is the classic leapfrog;
//! warmup adapts the step size by dual averaging toward a target acceptance
//! rate and sets the diagonal mass matrix from warmup sample variances.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gp::{GpModel, PriorSet};
use crate::kernels::{Params, PARAM_NAMES};

/// Trajectories whose energy error exceeds this are abandoned and counted
/// as divergences rather than fed to the Metropolis test.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;

/// Joint evaluation of the potential energy `U = -log posterior` and its
/// gradient. `None` marks a numerically unusable point (factorization
/// failure, overflow); the trajectory that reached it is treated as
/// divergent.
pub type PotentialResult = Option<(f64, DVector<f64>)>;

/// Sampler configuration. `sampled` masks which of the six parameters move;
/// the rest stay frozen at their initial values.
#[derive(Debug, Clone)]
pub struct HmcConfig {
    pub n_warmup: usize,
    pub n_samples: usize,
    /// Upper bound L on leapfrog steps per iteration.
    pub leapfrog_steps: usize,
    /// Initial step size; adapted during warmup.
    pub step_size: f64,
    /// Diagonal of the mass matrix over the sampled coordinates. `None`
    /// starts from the identity.
    pub mass_diag: Option<Vec<f64>>,
    pub target_accept: f64,
    pub seed: u64,
    pub sampled: [bool; 6],
    /// Draw the per-iteration step count uniformly from {L/2, .., L} to
    /// avoid resonant trajectories.
    pub jitter_steps: bool,
}

impl Default for HmcConfig {
    fn default() -> Self {
        HmcConfig {
            n_warmup: 1000,
            n_samples: 7000,
            leapfrog_steps: 20,
            step_size: 0.1,
            mass_diag: None,
            target_accept: 0.8,
            seed: 0,
            sampled: [true; 6],
            jitter_steps: true,
        }
    }
}

impl HmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidConfig("n_samples must be >= 1".into()));
        }
        if self.leapfrog_steps == 0 {
            return Err(Error::InvalidConfig("leapfrog_steps must be >= 1".into()));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "step_size must be finite and > 0, got {}",
                self.step_size
            )));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "target_accept must lie in (0, 1), got {}",
                self.target_accept
            )));
        }
        if let Some(m) = &self.mass_diag {
            if m.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
                return Err(Error::InvalidConfig(
                    "mass_diag entries must be finite and > 0".into(),
                ));
            }
        }
        if !self.sampled.iter().any(|&s| s) {
            return Err(Error::InvalidConfig(
                "at least one parameter must be sampled".into(),
            ));
        }
        Ok(())
    }
}

/// Position/momentum pair with the potential energy and gradient cached at
/// the position.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub position: DVector<f64>,
    pub momentum: DVector<f64>,
    pub potential: f64,
    pub grad: DVector<f64>,
}

/// Total energy `U(phi) + 1/2 ln((2pi)^d |M|) + 1/2 h' M^-1 h` for a
/// diagonal mass matrix.
pub fn hamiltonian(state: &ChainState, mass_diag: &[f64]) -> f64 {
    let d = mass_diag.len() as f64;
    let log_det_m: f64 = mass_diag.iter().map(|m| m.ln()).sum();
    let kinetic: f64 = state
        .momentum
        .iter()
        .zip(mass_diag)
        .map(|(h, m)| h * h / m)
        .sum::<f64>()
        / 2.0;
    state.potential + 0.5 * (d * (2.0 * std::f64::consts::PI).ln() + log_det_m) + kinetic
}

/// Result of integrating one trajectory.
#[derive(Debug)]
pub enum LeapfrogOutcome {
    Proposal(ChainState),
    Divergent,
}

/// Integrate `steps` leapfrog steps of Hamilton's equations: half-momentum,
/// full-position, half-momentum, reusing the gradient across step
/// boundaries so each step costs one potential evaluation.
pub fn leapfrog<F>(
    state: &ChainState,
    step_size: f64,
    steps: usize,
    mass_diag: &[f64],
    potential: &mut F,
) -> Result<LeapfrogOutcome>
where
    F: FnMut(&DVector<f64>) -> PotentialResult,
{
    if steps == 0 {
        return Err(Error::InvalidInput("leapfrog: steps must be >= 1".into()));
    }
    if !(step_size.is_finite() && step_size > 0.0) {
        return Err(Error::InvalidInput(format!(
            "leapfrog: step size must be finite and > 0, got {step_size}"
        )));
    }

    let mut position = state.position.clone();
    let mut momentum = state.momentum.clone();
    let mut grad = state.grad.clone();
    let mut energy = state.potential;

    for _ in 0..steps {
        momentum.zip_apply(&grad, |h, g| *h -= 0.5 * step_size * g);
        for (p, (h, m)) in position
            .iter_mut()
            .zip(momentum.iter().zip(mass_diag))
        {
            *p += step_size * h / m;
        }
        match potential(&position) {
            Some((u, g))
                if u.is_finite() && g.iter().all(|v| v.is_finite()) =>
            {
                energy = u;
                grad = g;
            }
            _ => return Ok(LeapfrogOutcome::Divergent),
        }
        momentum.zip_apply(&grad, |h, g| *h -= 0.5 * step_size * g);
    }

    Ok(LeapfrogOutcome::Proposal(ChainState {
        position,
        momentum,
        potential: energy,
        grad,
    }))
}

/// One HMC transition.
#[derive(Debug)]
pub struct StepOutcome {
    pub state: ChainState,
    pub accepted: bool,
    pub divergent: bool,
    /// min(1, exp(-dH)); 0 for divergent trajectories.
    pub accept_prob: f64,
}

/// Refresh the momentum from `N(0, M)`, integrate, and apply the Metropolis
/// correction `min(1, exp(-H(proposal) + H(current)))`. On rejection the
/// position (and its cached potential) is kept unchanged.
pub fn hmc_step<F, R>(
    state: ChainState,
    step_size: f64,
    steps: usize,
    mass_diag: &[f64],
    potential: &mut F,
    rng: &mut R,
) -> Result<StepOutcome>
where
    F: FnMut(&DVector<f64>) -> PotentialResult,
    R: Rng,
{
    let mut current = state;
    for (h, m) in current.momentum.iter_mut().zip(mass_diag) {
        let z: f64 = StandardNormal.sample(rng);
        *h = m.sqrt() * z;
    }
    let h_current = hamiltonian(&current, mass_diag);

    match leapfrog(&current, step_size, steps, mass_diag, potential)? {
        LeapfrogOutcome::Divergent => Ok(StepOutcome {
            state: current,
            accepted: false,
            divergent: true,
            accept_prob: 0.0,
        }),
        LeapfrogOutcome::Proposal(proposal) => {
            let h_proposal = hamiltonian(&proposal, mass_diag);
            let delta_h = h_proposal - h_current;
            if !delta_h.is_finite() || delta_h > DIVERGENCE_THRESHOLD {
                return Ok(StepOutcome {
                    state: current,
                    accepted: false,
                    divergent: true,
                    accept_prob: 0.0,
                });
            }
            let accept_prob = (-delta_h).exp().min(1.0);
            let u: f64 = rng.random();
            if u < accept_prob {
                Ok(StepOutcome {
                    state: proposal,
                    accepted: true,
                    divergent: false,
                    accept_prob,
                })
            } else {
                Ok(StepOutcome {
                    state: current,
                    accepted: false,
                    divergent: false,
                    accept_prob,
                })
            }
        }
    }
}

// Dual-averaging step-size adaptation (Hoffman & Gelman's scheme with the
// usual constants).
struct DualAveraging {
    mu: f64,
    log_eps: f64,
    log_eps_bar: f64,
    h_bar: f64,
    m: f64,
    delta: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps0: f64, delta: f64) -> Self {
        DualAveraging {
            mu: (10.0 * eps0).ln(),
            log_eps: eps0.ln(),
            log_eps_bar: eps0.ln(),
            h_bar: 0.0,
            m: 0.0,
            delta,
        }
    }

    fn update(&mut self, accept_prob: f64) -> f64 {
        self.m += 1.0;
        let frac = 1.0 / (self.m + Self::T0);
        self.h_bar = (1.0 - frac) * self.h_bar + frac * (self.delta - accept_prob);
        self.log_eps = self.mu - self.m.sqrt() / Self::GAMMA * self.h_bar;
        let w = self.m.powf(-Self::KAPPA);
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar;
        self.log_eps.exp()
    }

    fn adapted(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

/// Raw output of one chain: constrained-scale draws for all six parameters
/// (frozen ones constant), per-iteration accept flags and target values,
/// and what adaptation settled on.
#[derive(Debug, Clone)]
pub struct Chain {
    pub draws: Vec<[f64; 6]>,
    pub accepts: Vec<bool>,
    pub log_posteriors: Vec<f64>,
    pub divergences: usize,
    pub warmup_divergences: usize,
    pub adapted_step_size: f64,
    pub adapted_mass: Vec<f64>,
    pub sampled: [bool; 6],
    pub seed: u64,
}

/// Per-parameter posterior statistics on the constrained scale.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub n: usize,
    pub mean: [f64; 6],
    pub sd: [f64; 6],
    pub correlation: [[f64; 6]; 6],
    pub ess: [f64; 6],
    pub acceptance_rate: f64,
    pub divergences: usize,
    /// Marks parameters whose chain was (numerically) constant; their sd is
    /// reported as 0, correlations as 0 and ESS as 0.
    pub degenerate: [bool; 6],
}

// Sample variance per coordinate with the n-1 divisor.
fn column_stats(draws: &[[f64; 6]]) -> ([f64; 6], [f64; 6]) {
    let n = draws.len() as f64;
    let mut mean = [0.0; 6];
    for row in draws {
        for i in 0..6 {
            mean[i] += row[i];
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = [0.0; 6];
    if draws.len() > 1 {
        for row in draws {
            for i in 0..6 {
                let d = row[i] - mean[i];
                var[i] += d * d;
            }
        }
        for v in &mut var {
            *v /= n - 1.0;
        }
    }
    (mean, var)
}

/// Effective sample size via Geyer's initial positive sequence: sum paired
/// autocorrelations until a pair goes non-positive.
pub fn effective_sample_size(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 4 {
        return n as f64;
    }
    let nf = n as f64;
    let mean = series.iter().sum::<f64>() / nf;
    let c0 = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / nf;
    if c0 <= 0.0 {
        return 0.0;
    }
    let autocorr = |k: usize| -> f64 {
        let mut s = 0.0;
        for i in 0..n - k {
            s += (series[i] - mean) * (series[i + k] - mean);
        }
        s / nf / c0
    };

    let mut tau = -1.0;
    let mut lag = 0;
    loop {
        let r0 = if lag == 0 { 1.0 } else { autocorr(lag) };
        let r1 = if lag + 1 < n { autocorr(lag + 1) } else { 0.0 };
        let pair = r0 + r1;
        if lag > 0 && pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
        if lag >= n - 1 {
            break;
        }
    }
    nf / tau.max(1e-12)
}

/// Summarize constrained-scale draws: means, sds, pairwise correlations and
/// per-parameter ESS, plus the acceptance rate over the accompanying flags.
pub fn summarize(
    draws: &[[f64; 6]],
    accepts: &[bool],
    divergences: usize,
) -> Result<PosteriorSummary> {
    if draws.is_empty() {
        return Err(Error::InvalidInput("summarize: empty chain".into()));
    }
    if accepts.len() != draws.len() {
        return Err(Error::InvalidInput(format!(
            "summarize: {} accept flags for {} draws",
            accepts.len(),
            draws.len()
        )));
    }

    let (mean, var) = column_stats(draws);
    let mut sd = var.map(f64::sqrt);
    let degenerate: [bool; 6] = std::array::from_fn(|i| sd[i] <= 1e-14 * mean[i].abs());
    for i in 0..6 {
        if degenerate[i] {
            sd[i] = 0.0;
        }
    }

    let n = draws.len() as f64;
    let mut correlation = [[0.0; 6]; 6];
    for i in 0..6 {
        correlation[i][i] = 1.0;
        for j in 0..i {
            if degenerate[i] || degenerate[j] {
                continue;
            }
            let mut cov = 0.0;
            for row in draws {
                cov += (row[i] - mean[i]) * (row[j] - mean[j]);
            }
            cov /= n - 1.0;
            let r = (cov / (sd[i] * sd[j])).clamp(-1.0, 1.0);
            correlation[i][j] = r;
            correlation[j][i] = r;
        }
    }

    let ess = std::array::from_fn(|i| {
        if degenerate[i] {
            0.0
        } else {
            let series: Vec<f64> = draws.iter().map(|row| row[i]).collect();
            effective_sample_size(&series)
        }
    });

    let accepted = accepts.iter().filter(|&&a| a).count();
    Ok(PosteriorSummary {
        n: draws.len(),
        mean,
        sd,
        correlation,
        ess,
        acceptance_rate: accepted as f64 / accepts.len() as f64,
        divergences,
        degenerate,
    })
}

/// Pool several chains into one summary: moments and correlations over the
/// concatenated draws, ESS summed across chains.
pub fn summarize_pooled(
    chains: &[(&[[f64; 6]], &[bool])],
    divergences: usize,
) -> Result<PosteriorSummary> {
    if chains.is_empty() {
        return Err(Error::InvalidInput("summarize: no chains".into()));
    }
    if chains.len() == 1 {
        return summarize(chains[0].0, chains[0].1, divergences);
    }
    let pooled_draws: Vec<[f64; 6]> = chains.iter().flat_map(|(d, _)| d.iter().copied()).collect();
    let pooled_accepts: Vec<bool> = chains.iter().flat_map(|(_, a)| a.iter().copied()).collect();
    let mut summary = summarize(&pooled_draws, &pooled_accepts, divergences)?;
    for i in 0..6 {
        if summary.degenerate[i] {
            continue;
        }
        summary.ess[i] = chains
            .iter()
            .map(|(d, _)| {
                let series: Vec<f64> = d.iter().map(|row| row[i]).collect();
                effective_sample_size(&series)
            })
            .sum();
    }
    Ok(summary)
}

impl Chain {
    pub fn summarize(&self) -> Result<PosteriorSummary> {
        summarize(&self.draws, &self.accepts, self.divergences)
    }
}

fn draw_steps<R: Rng>(rng: &mut R, cfg: &HmcConfig) -> usize {
    if cfg.jitter_steps && cfg.leapfrog_steps >= 2 {
        rng.random_range(cfg.leapfrog_steps / 2..=cfg.leapfrog_steps)
    } else {
        cfg.leapfrog_steps
    }
}

// Warmup windows shorter than this keep the identity mass matrix.
const MIN_MASS_WINDOW: usize = 20;

/// Run one HMC chain against the GP posterior. Warmup adapts the step size
/// by dual averaging; halfway through, the mass matrix is set to the
/// reciprocal of the warmup sample variances and step-size adaptation
/// restarts around the current estimate. Post-warmup draws are returned on
/// the constrained scale together with their summary.
pub fn run_chain(
    model: &GpModel,
    priors: &PriorSet,
    init: &Params,
    cfg: &HmcConfig,
) -> Result<(Chain, PosteriorSummary)> {
    cfg.validate()?;

    let sampled_idx: Vec<usize> = (0..6).filter(|&i| cfg.sampled[i]).collect();
    let d = sampled_idx.len();
    if let Some(m) = &cfg.mass_diag {
        if m.len() != d {
            return Err(Error::InvalidConfig(format!(
                "mass_diag has {} entries for {} sampled parameters",
                m.len(),
                d
            )));
        }
    }

    let phi_base = init.ln();
    let embed = |pos: &DVector<f64>| -> [f64; 6] {
        let mut full = phi_base;
        for (k, &i) in sampled_idx.iter().enumerate() {
            full[i] = pos[k];
        }
        full
    };

    // Evaluation failures at proposed points (overflowed parameters,
    // factorization breakdown) surface as divergent trajectories.
    let mut potential = |pos: &DVector<f64>| -> PotentialResult {
        let full = embed(pos);
        match model.log_posterior_unconstrained_and_grad(&full, priors) {
            Ok((lp, g)) if lp.is_finite() => Some((
                -lp,
                DVector::from_iterator(d, sampled_idx.iter().map(|&i| -g[i])),
            )),
            _ => None,
        }
    };

    // The starting point must evaluate cleanly.
    let init_pos = DVector::from_iterator(d, sampled_idx.iter().map(|&i| phi_base[i]));
    let (lp0, g0) = model.log_posterior_unconstrained_and_grad(&phi_base, priors)?;
    if !lp0.is_finite() {
        return Err(Error::InvalidInput(
            "log posterior is not finite at the initial point".into(),
        ));
    }
    let mut state = ChainState {
        position: init_pos,
        momentum: DVector::zeros(d),
        potential: -lp0,
        grad: DVector::from_iterator(d, sampled_idx.iter().map(|&i| -g0[i])),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut mass = cfg.mass_diag.clone().unwrap_or_else(|| vec![1.0; d]);
    let mut da = DualAveraging::new(cfg.step_size, cfg.target_accept);
    let mut eps = cfg.step_size;
    let half = cfg.n_warmup / 2;
    let mut phase1: Vec<DVector<f64>> = Vec::with_capacity(half);
    let mut warmup_divergences = 0usize;

    for iter in 0..cfg.n_warmup {
        let steps = draw_steps(&mut rng, cfg);
        let out = hmc_step(state, eps, steps, &mass, &mut potential, &mut rng)?;
        state = out.state;
        if out.divergent {
            warmup_divergences += 1;
        }
        eps = da.update(out.accept_prob);

        if iter < half {
            phase1.push(state.position.clone());
        }
        if iter + 1 == half && half >= MIN_MASS_WINDOW {
            // Variance over the second half of phase one, past the initial
            // transient.
            let window = &phase1[half / 2..];
            let wn = window.len() as f64;
            let mut usable = true;
            let mut new_mass = vec![1.0; d];
            for k in 0..d {
                let mean = window.iter().map(|p| p[k]).sum::<f64>() / wn;
                let var = window.iter().map(|p| (p[k] - mean).powi(2)).sum::<f64>()
                    / (wn - 1.0);
                if var.is_finite() && var > 0.0 {
                    new_mass[k] = 1.0 / var;
                } else {
                    usable = false;
                }
            }
            if usable {
                mass = new_mass;
                let eps_now = da.adapted();
                da = DualAveraging::new(eps_now, cfg.target_accept);
                eps = eps_now;
            }
        }
    }

    if cfg.n_warmup > 0 && warmup_divergences == cfg.n_warmup {
        return Err(Error::AdaptationFailure(format!(
            "all {} warmup trajectories diverged (last step size {:.3e}); \
             try a smaller initial step size or tighter priors",
            cfg.n_warmup, eps
        )));
    }

    let eps_final = if cfg.n_warmup > 0 {
        da.adapted()
    } else {
        cfg.step_size
    };

    let mut draws = Vec::with_capacity(cfg.n_samples);
    let mut accepts = Vec::with_capacity(cfg.n_samples);
    let mut log_posteriors = Vec::with_capacity(cfg.n_samples);
    let mut divergences = 0usize;

    for _ in 0..cfg.n_samples {
        let steps = draw_steps(&mut rng, cfg);
        let out = hmc_step(state, eps_final, steps, &mass, &mut potential, &mut rng)?;
        state = out.state;
        if out.divergent {
            divergences += 1;
        }
        let full = embed(&state.position);
        let theta = full.map(f64::exp);
        debug_assert!(theta.iter().all(|&v| v > 0.0));
        draws.push(theta);
        accepts.push(out.accepted);
        log_posteriors.push(-state.potential);
    }

    // Keep the frozen coordinates in the record exactly as initialized.
    for (i, &is_sampled) in cfg.sampled.iter().enumerate() {
        if !is_sampled {
            let v = init.to_array()[i];
            for row in &mut draws {
                row[i] = v;
            }
        }
    }

    let chain = Chain {
        draws,
        accepts,
        log_posteriors,
        divergences,
        warmup_divergences,
        adapted_step_size: eps_final,
        adapted_mass: mass,
        sampled: cfg.sampled,
        seed: cfg.seed,
    };
    let summary = chain.summarize()?;
    Ok((chain, summary))
}

/// Human-readable parameter order used in every trace and summary.
pub fn param_names() -> [&'static str; 6] {
    PARAM_NAMES
}
