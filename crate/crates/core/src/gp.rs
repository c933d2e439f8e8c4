//! Multi-output Gaussian process regression with heteroscedastic noise.
//!
//! Observations of both channels are stacked all-Y-then-all-F, matching the
//! block layout of the joint kernel. The noisy covariance `K + Sigma` is
//! factorized once per parameter value and shared between the log marginal
//! likelihood, its gradient and predictions. Everything is standardized on
//! log densities; the Hamiltonian Monte Carlo potential energy is their
//! negation.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::kernels::{assemble_joint, cross_matrix, entry_unchecked, Channel, Params, Point};

/// Per-observation noise variances, the diagonal of `Sigma`.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    variances: Vec<f64>,
}

impl NoiseModel {
    pub fn new(variances: Vec<f64>) -> Result<Self> {
        for (i, &v) in variances.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "noise variance at index {i} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(NoiseModel { variances })
    }

    pub fn homoscedastic(n: usize, variance: f64) -> Result<Self> {
        NoiseModel::new(vec![variance; n])
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn len(&self) -> usize {
        self.variances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variances.is_empty()
    }
}

/// Stacked observation vector `S = (Y_1..Y_nY, F_1..F_nF)` with the
/// coordinates that go with each entry.
#[derive(Debug, Clone)]
pub struct ObservationVector {
    values: DVector<f64>,
    points_y: Vec<Point>,
    points_f: Vec<Point>,
}

impl ObservationVector {
    pub fn new(
        points_y: Vec<Point>,
        values_y: Vec<f64>,
        points_f: Vec<Point>,
        values_f: Vec<f64>,
    ) -> Result<Self> {
        if points_y.len() != values_y.len() || points_f.len() != values_f.len() {
            return Err(Error::InvalidInput(
                "observation points and values must have matching lengths".into(),
            ));
        }
        if points_y.is_empty() && points_f.is_empty() {
            return Err(Error::InvalidInput("no observations".into()));
        }
        for &v in values_y.iter().chain(values_f.iter()) {
            if !v.is_finite() {
                return Err(Error::InvalidInput("non-finite observation value".into()));
            }
        }
        let stacked: Vec<f64> = values_y.into_iter().chain(values_f).collect();
        Ok(ObservationVector {
            values: DVector::from_vec(stacked),
            points_y,
            points_f,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn points_y(&self) -> &[Point] {
        &self.points_y
    }

    pub fn points_f(&self) -> &[Point] {
        &self.points_f
    }

    /// Training rows in stacking order as `(point, channel)` pairs.
    pub fn tagged_points(&self) -> Vec<(Point, Channel)> {
        self.points_y
            .iter()
            .map(|&p| (p, Channel::Y))
            .chain(self.points_f.iter().map(|&p| (p, Channel::F)))
            .collect()
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Lanczos approximation of `ln Gamma(x)` for x > 0, accurate to ~1e-13.
fn ln_gamma(x: f64) -> f64 {
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Independent prior on one positive parameter.
///
/// `FlatLog` contributes nothing on the constrained scale; the sampler's
/// log-Jacobian is what makes it flat in log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prior {
    FlatLog,
    LogNormal { mu: f64, sigma: f64 },
    Gamma { shape: f64, rate: f64 },
}

impl Prior {
    pub fn log_normal(mu: f64, sigma: f64) -> Result<Prior> {
        if !(mu.is_finite() && sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "log-normal prior needs finite mu and sigma > 0, got ({mu}, {sigma})"
            )));
        }
        Ok(Prior::LogNormal { mu, sigma })
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Prior> {
        if !(shape.is_finite() && rate.is_finite() && shape > 0.0 && rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma prior needs shape > 0 and rate > 0, got ({shape}, {rate})"
            )));
        }
        Ok(Prior::Gamma { shape, rate })
    }

    /// `ln p(theta)` on the constrained scale.
    pub fn log_density(&self, theta: f64) -> f64 {
        match *self {
            Prior::FlatLog => 0.0,
            Prior::LogNormal { mu, sigma } => {
                let z = (theta.ln() - mu) / sigma;
                -theta.ln() - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * z * z
            }
            Prior::Gamma { shape, rate } => {
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * theta.ln() - rate * theta
            }
        }
    }

    /// `d/dtheta ln p(theta)`.
    pub fn score(&self, theta: f64) -> f64 {
        match *self {
            Prior::FlatLog => 0.0,
            Prior::LogNormal { mu, sigma } => {
                -(1.0 + (theta.ln() - mu) / (sigma * sigma)) / theta
            }
            Prior::Gamma { shape, rate } => (shape - 1.0) / theta - rate,
        }
    }
}

/// One prior per parameter, in [`PARAMS`] order. Defaults to flat-on-log
/// everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSet {
    priors: [Prior; 6],
}

impl Default for PriorSet {
    fn default() -> Self {
        PriorSet {
            priors: [Prior::FlatLog; 6],
        }
    }
}

impl PriorSet {
    pub fn flat() -> Self {
        Self::default()
    }

    pub fn set(&mut self, param: crate::kernels::Param, prior: Prior) {
        self.priors[param.index()] = prior;
    }

    pub fn get(&self, param: crate::kernels::Param) -> &Prior {
        &self.priors[param.index()]
    }

    pub fn log_density(&self, params: &Params) -> f64 {
        let theta = params.to_array();
        self.priors
            .iter()
            .zip(theta)
            .map(|(p, t)| p.log_density(t))
            .sum()
    }

    pub fn scores(&self, params: &Params) -> [f64; 6] {
        let theta = params.to_array();
        std::array::from_fn(|i| self.priors[i].score(theta[i]))
    }
}

/// Posterior mean and variance per requested target.
#[derive(Debug, Clone)]
pub struct PredictionField {
    pub targets: Vec<(Point, Channel)>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// Diagonal inflation applied to `K + Sigma` before factorizing, scaled by
/// the mean diagonal. Starts at `initial` and escalates tenfold up to `max`;
/// the k_ff block conditions poorly, so some inflation is routine.
#[derive(Debug, Clone, Copy)]
pub struct JitterPolicy {
    pub initial: f64,
    pub max: f64,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        JitterPolicy {
            initial: 1e-10,
            max: 1e-4,
        }
    }
}

pub(crate) struct Factorized {
    pub chol: Cholesky<f64, Dyn>,
    pub alpha: DVector<f64>,
    pub log_det: f64,
    pub grads: Option<Vec<DMatrix<f64>>>,
}

/// A regression problem: tagged observations plus their noise model. All
/// evaluation methods are read-only, so a model can be shared across threads
/// evaluating different parameter values.
#[derive(Debug, Clone)]
pub struct GpModel {
    obs: ObservationVector,
    noise: NoiseModel,
    jitter: JitterPolicy,
}

impl GpModel {
    pub fn new(obs: ObservationVector, noise: NoiseModel) -> Result<Self> {
        if obs.len() != noise.len() {
            return Err(Error::InvalidInput(format!(
                "noise model has {} entries for {} observations",
                noise.len(),
                obs.len()
            )));
        }
        Ok(GpModel {
            obs,
            noise,
            jitter: JitterPolicy::default(),
        })
    }

    pub fn with_jitter(mut self, jitter: JitterPolicy) -> Self {
        self.jitter = jitter;
        self
    }

    pub fn observations(&self) -> &ObservationVector {
        &self.obs
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn jitter(&self) -> JitterPolicy {
        self.jitter
    }

    /// Factorize `K + Sigma (+ jitter)`, escalating jitter on failure. The
    /// factorization carries everything the likelihood, gradient and
    /// predictions share.
    pub(crate) fn factorize(&self, params: &Params, with_grads: bool) -> Result<Factorized> {
        let jk = assemble_joint(
            self.obs.points_y(),
            self.obs.points_f(),
            &params.hypers,
            &params.pde,
            with_grads,
        )?;
        let n = self.obs.len();
        let mut noisy = jk.matrix;
        for i in 0..n {
            noisy[(i, i)] += self.noise.variances[i];
        }
        let mean_diag = noisy.trace() / n as f64;

        let mut attempted = Vec::new();
        let mut level = self.jitter.initial;
        loop {
            attempted.push(level);
            let mut m = noisy.clone();
            for i in 0..n {
                m[(i, i)] += level * mean_diag;
            }
            // A factorization that went through with overflowed entries is
            // still unusable; escalate in that case too.
            if let Some(chol) = Cholesky::new(m) {
                let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
                let alpha = chol.solve(&self.obs.values);
                if log_det.is_finite() && alpha.iter().all(|v| v.is_finite()) {
                    return Ok(Factorized {
                        chol,
                        alpha,
                        log_det,
                        grads: jk.grads,
                    });
                }
            }
            level *= 10.0;
            if level > self.jitter.max {
                return Err(Error::IllConditionedKernel { attempted });
            }
        }
    }

    /// `ln p(S | params) = -1/2 [n ln 2pi + ln|K+Sigma| + S' (K+Sigma)^-1 S]`.
    pub fn log_marginal_likelihood(&self, params: &Params) -> Result<f64> {
        let f = self.factorize(params, false)?;
        Ok(self.lml_from(&f))
    }

    fn lml_from(&self, f: &Factorized) -> f64 {
        let n = self.obs.len() as f64;
        -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + f.log_det
            + self.obs.values.dot(&f.alpha))
    }

    /// Gradient of the log marginal likelihood over all six parameters:
    /// `1/2 sum[(alpha alpha' - (K+Sigma)^-1) o dK/dtheta_i]`.
    pub fn grad_log_marginal_likelihood(&self, params: &Params) -> Result<[f64; 6]> {
        Ok(self.log_marginal_and_grad(params)?.1)
    }

    /// Likelihood and gradient from a single factorization.
    pub fn log_marginal_and_grad(&self, params: &Params) -> Result<(f64, [f64; 6])> {
        let f = self.factorize(params, true)?;
        let value = self.lml_from(&f);
        let binv = f.chol.inverse();
        let w = &f.alpha * f.alpha.transpose() - binv;
        let grads = f.grads.as_ref().expect("factorized with gradients");
        let g = std::array::from_fn(|i| {
            0.5 * w
                .iter()
                .zip(grads[i].iter())
                .map(|(a, b)| a * b)
                .sum::<f64>()
        });
        Ok((value, g))
    }

    /// `ln p(S | params) + sum_i ln p(theta_i)` on the constrained scale.
    pub fn log_posterior(&self, params: &Params, priors: &PriorSet) -> Result<f64> {
        Ok(self.log_marginal_likelihood(params)? + priors.log_density(params))
    }

    pub fn grad_log_posterior(&self, params: &Params, priors: &PriorSet) -> Result<[f64; 6]> {
        let g = self.grad_log_marginal_likelihood(params)?;
        let s = priors.scores(params);
        Ok(std::array::from_fn(|i| g[i] + s[i]))
    }

    /// Log posterior in unconstrained coordinates `phi_i = ln theta_i`,
    /// including the `sum_i phi_i` log-Jacobian of the transform.
    pub fn log_posterior_unconstrained(&self, phi: &[f64; 6], priors: &PriorSet) -> Result<f64> {
        let params = Params::from_ln(phi)?;
        Ok(self.log_posterior(&params, priors)? + phi.iter().sum::<f64>())
    }

    pub fn grad_log_posterior_unconstrained(
        &self,
        phi: &[f64; 6],
        priors: &PriorSet,
    ) -> Result<[f64; 6]> {
        Ok(self.log_posterior_unconstrained_and_grad(phi, priors)?.1)
    }

    /// Unconstrained log posterior and its gradient from one factorization;
    /// the chain rule contributes `theta_i` per coordinate and the Jacobian
    /// adds one.
    pub fn log_posterior_unconstrained_and_grad(
        &self,
        phi: &[f64; 6],
        priors: &PriorSet,
    ) -> Result<(f64, [f64; 6])> {
        let params = Params::from_ln(phi)?;
        let (lml, grad) = self.log_marginal_and_grad(&params)?;
        let theta = params.to_array();
        let scores = priors.scores(&params);
        let value = lml + priors.log_density(&params) + phi.iter().sum::<f64>();
        let g = std::array::from_fn(|i| (grad[i] + scores[i]) * theta[i] + 1.0);
        Ok((value, g))
    }

    /// Posterior mean and variance at each `(point, channel)` target:
    /// `mean = K_*' (K+Sigma)^-1 S`, `var = K_** - K_*' (K+Sigma)^-1 K_*`.
    pub fn predict(
        &self,
        params: &Params,
        targets: &[(Point, Channel)],
    ) -> Result<PredictionField> {
        let f = self.factorize(params, false)?;
        self.predict_from(&f, params, targets)
    }

    fn predict_from(
        &self,
        f: &Factorized,
        params: &Params,
        targets: &[(Point, Channel)],
    ) -> Result<PredictionField> {
        for (p, _) in targets {
            if !(p.x.is_finite() && p.t.is_finite()) {
                return Err(Error::InvalidInput("non-finite prediction target".into()));
            }
        }
        let train = self.obs.tagged_points();
        let m = targets.len();
        let kstar = cross_matrix(&train, targets, &params.hypers, &params.pde);
        let solved = f.chol.solve(&kstar);

        let mut mean = Vec::with_capacity(m);
        let mut variance = Vec::with_capacity(m);
        for (j, &(q, cq)) in targets.iter().enumerate() {
            let col = kstar.column(j);
            mean.push(col.dot(&f.alpha));
            let prior_var = entry_unchecked(q, cq, q, cq, &params.hypers, &params.pde);
            let mut var = prior_var - col.dot(&solved.column(j));
            if var < 0.0 {
                if var >= -1e-10 * prior_var {
                    var = 0.0;
                } else {
                    return Err(Error::NegativeVariance {
                        index: j,
                        value: var,
                        prior_variance: prior_var,
                    });
                }
            }
            variance.push(var);
        }
        Ok(PredictionField {
            targets: targets.to_vec(),
            mean,
            variance,
        })
    }

    /// Probabilistic solve of the PDE: predict the protein channel from
    /// mRNA-only observations, without ever discretizing the equation.
    /// Requires the training set to contain only channel-F rows.
    pub fn predict_y_from_f(&self, params: &Params, targets: &[Point]) -> Result<PredictionField> {
        if !self.obs.points_y().is_empty() {
            return Err(Error::InvalidInput(
                "predict_y_from_f: observations must contain only channel F".into(),
            ));
        }
        if self.obs.points_f().is_empty() {
            return Err(Error::InvalidInput(
                "predict_y_from_f: empty training set (no F observations)".into(),
            ));
        }
        let tagged: Vec<(Point, Channel)> = targets.iter().map(|&p| (p, Channel::Y)).collect();
        self.predict(params, &tagged)
    }
}
