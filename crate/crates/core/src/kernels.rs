//! Operator-derived covariance kernels.
//!
//! The latent protein field `y(x,t)` gets a separable spatio-temporal RBF
//! prior. The mRNA field is tied to it by the linear differential operator
//!
//! ```text
//! L = -D d²/dx² + alpha d/dt + beta,      f = L y
//! ```
//!
//! so every covariance involving `f` is obtained by applying `L` to the base
//! kernel: once for the cross covariances (`k_yf`, `k_fy`), twice for `k_ff`.
//! All closed forms and their parameter gradients below were derived
//! symbolically and are gated in the test suite by a finite-difference
//! application of `L` to `k_yy`, which is the ground truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A spatio-temporal location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub t: f64,
}

impl Point {
    pub fn new(x: f64, t: f64) -> Self {
        Point { x, t }
    }

    fn check(&self) -> Result<()> {
        if self.x.is_finite() && self.t.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "non-finite point ({}, {})",
                self.x, self.t
            )))
        }
    }
}

/// The three PDE coefficients. All strictly positive: diffusion by Fick's
/// law, production and degradation rates physically non-negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeParams {
    d: f64,
    alpha: f64,
    beta: f64,
}

impl PdeParams {
    pub fn new(d: f64, alpha: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("D", d), ("alpha", alpha), ("beta", beta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "PDE parameter {name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(PdeParams { d, alpha, beta })
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// RBF signal variance and the two lengthscales of the separable kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelHypers {
    sigma_y2: f64,
    theta_t: f64,
    theta_x: f64,
}

impl KernelHypers {
    pub fn new(sigma_y2: f64, theta_t: f64, theta_x: f64) -> Result<Self> {
        for (name, v) in [
            ("sigma_y2", sigma_y2),
            ("theta_t", theta_t),
            ("theta_x", theta_x),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "kernel hyperparameter {name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(KernelHypers {
            sigma_y2,
            theta_t,
            theta_x,
        })
    }

    pub fn sigma_y2(&self) -> f64 {
        self.sigma_y2
    }

    pub fn theta_t(&self) -> f64 {
        self.theta_t
    }

    pub fn theta_x(&self) -> f64 {
        self.theta_x
    }
}

/// One of the six inferred parameters, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Param {
    D,
    Alpha,
    Beta,
    SigmaY2,
    ThetaT,
    ThetaX,
}

/// Canonical parameter order used by gradients, traces and summaries.
pub const PARAMS: [Param; 6] = [
    Param::D,
    Param::Alpha,
    Param::Beta,
    Param::SigmaY2,
    Param::ThetaT,
    Param::ThetaX,
];

pub const PARAM_NAMES: [&str; 6] = ["D", "alpha", "beta", "sigma_y2", "theta_t", "theta_x"];

impl Param {
    pub fn index(self) -> usize {
        match self {
            Param::D => 0,
            Param::Alpha => 1,
            Param::Beta => 2,
            Param::SigmaY2 => 3,
            Param::ThetaT => 4,
            Param::ThetaX => 5,
        }
    }

    pub fn name(self) -> &'static str {
        PARAM_NAMES[self.index()]
    }

    pub fn from_name(name: &str) -> Option<Param> {
        let lower = name.to_ascii_lowercase();
        PARAMS
            .into_iter()
            .find(|p| p.name().to_ascii_lowercase() == lower)
    }
}

/// The full parameter set of the model: PDE coefficients plus kernel
/// hyperparameters, always handled in [`PARAMS`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub pde: PdeParams,
    pub hypers: KernelHypers,
}

impl Params {
    pub fn new(pde: PdeParams, hypers: KernelHypers) -> Self {
        Params { pde, hypers }
    }

    pub fn from_array(values: [f64; 6]) -> Result<Self> {
        Ok(Params {
            pde: PdeParams::new(values[0], values[1], values[2])?,
            hypers: KernelHypers::new(values[3], values[4], values[5])?,
        })
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.pde.d,
            self.pde.alpha,
            self.pde.beta,
            self.hypers.sigma_y2,
            self.hypers.theta_t,
            self.hypers.theta_x,
        ]
    }

    pub fn get(&self, p: Param) -> f64 {
        self.to_array()[p.index()]
    }

    /// Element-wise natural log, the unconstrained coordinates.
    pub fn ln(&self) -> [f64; 6] {
        self.to_array().map(f64::ln)
    }

    /// Inverse of [`Params::ln`].
    pub fn from_ln(phi: &[f64; 6]) -> Result<Self> {
        Self::from_array(phi.map(f64::exp))
    }
}

/// Which output of the multi-output process an observation or target refers
/// to: `Y` is the protein channel, `F` the mRNA channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    Y,
    F,
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Y => "Y",
            Channel::F => "F",
        }
    }

    pub fn parse(s: &str) -> Option<Channel> {
        match s {
            "Y" => Some(Channel::Y),
            "F" => Some(Channel::F),
            _ => None,
        }
    }
}

// Parameter-only quantities hoisted out of the per-entry loop: reciprocal
// lengthscale powers and products of the PDE coefficients.
#[derive(Clone, Copy)]
struct EvalCtx {
    sigma_y2: f64,
    d: f64,
    alpha: f64,
    beta: f64,
    inv_tt2: f64,
    inv_tt3: f64,
    inv_tt4: f64,
    inv_tt5: f64,
    inv_tx2: f64,
    inv_tx3: f64,
    inv_tx4: f64,
    inv_tx5: f64,
    inv_tx6: f64,
    inv_tx7: f64,
    inv_tx8: f64,
    inv_tx9: f64,
}

impl EvalCtx {
    fn new(h: &KernelHypers, th: &PdeParams) -> Self {
        let inv_tt = 1.0 / h.theta_t;
        let inv_tx = 1.0 / h.theta_x;
        let inv_tt2 = inv_tt * inv_tt;
        let inv_tx2 = inv_tx * inv_tx;
        let inv_tx4 = inv_tx2 * inv_tx2;
        EvalCtx {
            sigma_y2: h.sigma_y2,
            d: th.d,
            alpha: th.alpha,
            beta: th.beta,
            inv_tt2,
            inv_tt3: inv_tt2 * inv_tt,
            inv_tt4: inv_tt2 * inv_tt2,
            inv_tt5: inv_tt2 * inv_tt2 * inv_tt,
            inv_tx2,
            inv_tx3: inv_tx2 * inv_tx,
            inv_tx4,
            inv_tx5: inv_tx4 * inv_tx,
            inv_tx6: inv_tx4 * inv_tx2,
            inv_tx7: inv_tx4 * inv_tx2 * inv_tx,
            inv_tx8: inv_tx4 * inv_tx4,
            inv_tx9: inv_tx4 * inv_tx4 * inv_tx,
        }
    }

    fn without_pde(h: &KernelHypers) -> Self {
        // The PDE coefficients are irrelevant for k_yy-only evaluation.
        let dummy = PdeParams {
            d: 1.0,
            alpha: 1.0,
            beta: 1.0,
        };
        Self::new(h, &dummy)
    }

    /// `sigma_y2 * exp(...)` for the separation (dx, dt).
    fn e(&self, dx: f64, dt: f64) -> f64 {
        self.sigma_y2 * (-0.5 * (dt * dt * self.inv_tt2 + dx * dx * self.inv_tx2)).exp()
    }

    // d²/dx² and d²/dx'² of the exponential both give ax * e.
    fn ax(&self, dx: f64) -> f64 {
        dx * dx * self.inv_tx4 - self.inv_tx2
    }

    // d/dt' gives (dt/tt²) e; d/dt gives the negative.
    fn b(&self, dt: f64) -> f64 {
        self.alpha * dt * self.inv_tt2
    }

    // Prefactor of k_ff = L L' k_yy, from expanding
    //   (-D d²/dx² + a d/dt + b)(-D d²/dx'² + a d/dt' + b) applied to e.
    fn q_ff(&self, dx: f64, dt: f64) -> f64 {
        let ct = self.inv_tt2 - dt * dt * self.inv_tt4;
        let dx2 = dx * dx;
        let cx = 3.0 * self.inv_tx4 - 6.0 * dx2 * self.inv_tx6 + dx2 * dx2 * self.inv_tx8;
        self.alpha * self.alpha * ct - 2.0 * self.d * self.beta * self.ax(dx)
            + self.d * self.d * cx
            + self.beta * self.beta
    }
}

fn kyy_unchecked(p: Point, q: Point, h: &KernelHypers) -> f64 {
    EvalCtx::without_pde(h).e(p.x - q.x, p.t - q.t)
}

fn kyf_unchecked(p: Point, q: Point, h: &KernelHypers, th: &PdeParams) -> f64 {
    let ctx = EvalCtx::new(h, th);
    let (dx, dt) = (p.x - q.x, p.t - q.t);
    (-ctx.d * ctx.ax(dx) + ctx.b(dt) + ctx.beta) * ctx.e(dx, dt)
}

fn kfy_unchecked(p: Point, q: Point, h: &KernelHypers, th: &PdeParams) -> f64 {
    let ctx = EvalCtx::new(h, th);
    let (dx, dt) = (p.x - q.x, p.t - q.t);
    (-ctx.d * ctx.ax(dx) - ctx.b(dt) + ctx.beta) * ctx.e(dx, dt)
}

fn kff_unchecked(p: Point, q: Point, h: &KernelHypers, th: &PdeParams) -> f64 {
    let ctx = EvalCtx::new(h, th);
    let (dx, dt) = (p.x - q.x, p.t - q.t);
    ctx.q_ff(dx, dt) * ctx.e(dx, dt)
}

/// Base spatio-temporal RBF covariance of the protein channel,
/// `sigma_y2 * exp(-(t-t')²/(2 theta_t²) - (x-x')²/(2 theta_x²))`.
pub fn k_yy(p: Point, q: Point, h: &KernelHypers) -> Result<f64> {
    p.check()?;
    q.check()?;
    Ok(kyy_unchecked(p, q, h))
}

/// Cross covariance `cov(y(p), f(q))`, the operator applied to the second
/// argument pair of `k_yy`.
pub fn k_yf(p: Point, q: Point, h: &KernelHypers, theta: &PdeParams) -> Result<f64> {
    p.check()?;
    q.check()?;
    Ok(kyf_unchecked(p, q, h, theta))
}

/// Cross covariance `cov(f(p), y(q))`, the operator applied to the first
/// argument pair. Satisfies `k_fy(p, q) = k_yf(q, p)` exactly.
pub fn k_fy(p: Point, q: Point, h: &KernelHypers, theta: &PdeParams) -> Result<f64> {
    p.check()?;
    q.check()?;
    Ok(kfy_unchecked(p, q, h, theta))
}

/// mRNA-channel covariance `cov(f(p), f(q))`, the operator applied twice.
pub fn k_ff(p: Point, q: Point, h: &KernelHypers, theta: &PdeParams) -> Result<f64> {
    p.check()?;
    q.check()?;
    Ok(kff_unchecked(p, q, h, theta))
}

/// Covariance between two tagged observations, dispatching on the channel
/// pair.
pub fn kernel_value(
    row: (Point, Channel),
    col: (Point, Channel),
    h: &KernelHypers,
    theta: &PdeParams,
) -> Result<f64> {
    row.0.check()?;
    col.0.check()?;
    Ok(entry_unchecked(row.0, row.1, col.0, col.1, h, theta))
}

fn entry_ctx(ctx: &EvalCtx, p: Point, cp: Channel, q: Point, cq: Channel) -> f64 {
    let (dx, dt) = (p.x - q.x, p.t - q.t);
    let e = ctx.e(dx, dt);
    match (cp, cq) {
        (Channel::Y, Channel::Y) => e,
        (Channel::Y, Channel::F) => (-ctx.d * ctx.ax(dx) + ctx.b(dt) + ctx.beta) * e,
        (Channel::F, Channel::Y) => (-ctx.d * ctx.ax(dx) - ctx.b(dt) + ctx.beta) * e,
        (Channel::F, Channel::F) => ctx.q_ff(dx, dt) * e,
    }
}

pub(crate) fn entry_unchecked(
    p: Point,
    cp: Channel,
    q: Point,
    cq: Channel,
    h: &KernelHypers,
    theta: &PdeParams,
) -> f64 {
    entry_ctx(&EvalCtx::new(h, theta), p, cp, q, cq)
}

/// Covariance matrix between two tagged point lists (rows: `from`, columns:
/// `to`), used for prediction cross-covariances.
pub(crate) fn cross_matrix(
    from: &[(Point, Channel)],
    to: &[(Point, Channel)],
    h: &KernelHypers,
    theta: &PdeParams,
) -> nalgebra::DMatrix<f64> {
    let ctx = EvalCtx::new(h, theta);
    nalgebra::DMatrix::from_fn(from.len(), to.len(), |i, j| {
        entry_ctx(&ctx, from[i].0, from[i].1, to[j].0, to[j].1)
    })
}

// Value plus the six partial derivatives in PARAMS order for one matrix
// entry. Everything shares the exponential, so this is much cheaper than six
// separate evaluations.
fn entry_with_grads(
    ctx: &EvalCtx,
    p: Point,
    cp: Channel,
    q: Point,
    cq: Channel,
) -> (f64, [f64; 6]) {
    let (dx, dt) = (p.x - q.x, p.t - q.t);
    let dx2 = dx * dx;
    let dt2 = dt * dt;
    let e = ctx.e(dx, dt);
    // log-derivatives of the exponential w.r.t. the lengthscales
    let lt = dt2 * ctx.inv_tt3;
    let lx = dx2 * ctx.inv_tx3;

    match (cp, cq) {
        (Channel::Y, Channel::Y) => {
            (e, [0.0, 0.0, 0.0, e / ctx.sigma_y2, e * lt, e * lx])
        }
        (Channel::Y, Channel::F) | (Channel::F, Channel::Y) => {
            // k_yf and k_fy differ only in the sign of the alpha term.
            let sign = if cp == Channel::Y { 1.0 } else { -1.0 };
            let ax = ctx.ax(dx);
            let g = -ctx.d * ax + sign * ctx.b(dt) + ctx.beta;
            let dax_dtx = -4.0 * dx2 * ctx.inv_tx5 + 2.0 * ctx.inv_tx3;
            let dg_dtt = sign * (-2.0 * ctx.alpha * dt * ctx.inv_tt3);
            let dg_dtx = -ctx.d * dax_dtx;
            (
                g * e,
                [
                    -ax * e,
                    sign * dt * ctx.inv_tt2 * e,
                    e,
                    g * e / ctx.sigma_y2,
                    e * (dg_dtt + g * lt),
                    e * (dg_dtx + g * lx),
                ],
            )
        }
        (Channel::F, Channel::F) => {
            let ax = ctx.ax(dx);
            let ct = ctx.inv_tt2 - dt2 * ctx.inv_tt4;
            let cx = 3.0 * ctx.inv_tx4 - 6.0 * dx2 * ctx.inv_tx6 + dx2 * dx2 * ctx.inv_tx8;
            let q_ff = ctx.alpha * ctx.alpha * ct - 2.0 * ctx.d * ctx.beta * ax
                + ctx.d * ctx.d * cx
                + ctx.beta * ctx.beta;
            let dax_dtx = -4.0 * dx2 * ctx.inv_tx5 + 2.0 * ctx.inv_tx3;
            let dct_dtt = -2.0 * ctx.inv_tt3 + 4.0 * dt2 * ctx.inv_tt5;
            let dcx_dtx =
                -12.0 * ctx.inv_tx5 + 36.0 * dx2 * ctx.inv_tx7 - 8.0 * dx2 * dx2 * ctx.inv_tx9;
            let dq_dtt = ctx.alpha * ctx.alpha * dct_dtt;
            let dq_dtx = -2.0 * ctx.d * ctx.beta * dax_dtx + ctx.d * ctx.d * dcx_dtx;
            (
                q_ff * e,
                [
                    (-2.0 * ctx.beta * ax + 2.0 * ctx.d * cx) * e,
                    2.0 * ctx.alpha * ct * e,
                    (-2.0 * ctx.d * ax + 2.0 * ctx.beta) * e,
                    q_ff * e / ctx.sigma_y2,
                    e * (dq_dtt + q_ff * lt),
                    e * (dq_dtx + q_ff * lx),
                ],
            )
        }
    }
}

/// The joint covariance over stacked `(Y, F)` observation points, with block
/// layout `[k_yy, k_yf; k_fy, k_ff]`, plus optionally the per-parameter
/// gradient matrices in [`PARAMS`] order.
#[derive(Debug, Clone)]
pub struct JointKernel {
    pub matrix: nalgebra::DMatrix<f64>,
    pub grads: Option<Vec<nalgebra::DMatrix<f64>>>,
    pub n_y: usize,
    pub n_f: usize,
}

/// Assemble the joint covariance over `points_y ++ points_f`. Only the lower
/// triangle is computed; the upper is mirrored, which is valid because each
/// block pair is a transpose pair by construction.
pub fn assemble_joint(
    points_y: &[Point],
    points_f: &[Point],
    h: &KernelHypers,
    theta: &PdeParams,
    with_grads: bool,
) -> Result<JointKernel> {
    let n_y = points_y.len();
    let n_f = points_f.len();
    let n = n_y + n_f;
    if n == 0 {
        return Err(Error::InvalidInput(
            "assemble_joint: empty point set".into(),
        ));
    }
    for p in points_y.iter().chain(points_f.iter()) {
        p.check()?;
    }

    let loc = |i: usize| -> (Point, Channel) {
        if i < n_y {
            (points_y[i], Channel::Y)
        } else {
            (points_f[i - n_y], Channel::F)
        }
    };

    let ctx = EvalCtx::new(h, theta);
    let mut matrix = nalgebra::DMatrix::<f64>::zeros(n, n);
    let mut grads = if with_grads {
        Some(vec![nalgebra::DMatrix::<f64>::zeros(n, n); 6])
    } else {
        None
    };

    for i in 0..n {
        let (pi, ci) = loc(i);
        for j in 0..=i {
            let (pj, cj) = loc(j);
            if let Some(gs) = grads.as_mut() {
                let (v, dv) = entry_with_grads(&ctx, pi, ci, pj, cj);
                matrix[(i, j)] = v;
                matrix[(j, i)] = v;
                for (k, g) in gs.iter_mut().enumerate() {
                    g[(i, j)] = dv[k];
                    g[(j, i)] = dv[k];
                }
            } else {
                let v = entry_ctx(&ctx, pi, ci, pj, cj);
                matrix[(i, j)] = v;
                matrix[(j, i)] = v;
            }
        }
    }

    Ok(JointKernel {
        matrix,
        grads,
        n_y,
        n_f,
    })
}

/// Central-difference application of the differential operator to a scalar
/// field `g` at `p`:
///
/// ```text
/// -D (g(x+s,t) - 2 g(x,t) + g(x-s,t)) / s²
///   + alpha (g(x,t+s) - g(x,t-s)) / (2s) + beta g(x,t)
/// ```
///
/// This is the independent oracle the closed-form kernels are tested
/// against; it is exported because the acceptance checks also apply it to
/// posterior mean fields.
pub fn operator_apply_fd<G>(g: G, p: Point, theta: &PdeParams, step: f64) -> f64
where
    G: Fn(Point) -> f64,
{
    assert!(step > 0.0, "operator_apply_fd: step must be > 0");
    let s = step;
    let g0 = g(p);
    let gxp = g(Point::new(p.x + s, p.t));
    let gxm = g(Point::new(p.x - s, p.t));
    let gtp = g(Point::new(p.x, p.t + s));
    let gtm = g(Point::new(p.x, p.t - s));
    -theta.d * (gxp - 2.0 * g0 + gxm) / (s * s) + theta.alpha * (gtp - gtm) / (2.0 * s)
        + theta.beta * g0
}

/// [`operator_apply_fd`] with one level of Richardson extrapolation,
/// cancelling the leading O(s²) truncation term.
pub fn operator_apply_fd_richardson<G>(g: G, p: Point, theta: &PdeParams, step: f64) -> f64
where
    G: Fn(Point) -> f64,
{
    let coarse = operator_apply_fd(&g, p, theta, step);
    let fine = operator_apply_fd(&g, p, theta, step / 2.0);
    (4.0 * fine - coarse) / 3.0
}
