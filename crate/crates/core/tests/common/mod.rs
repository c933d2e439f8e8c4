//! Shared helpers for the oracle test suites: finite-difference application
//! of the differential operator to the base kernel, random problem
//! generators, and tolerance helpers.
//!
//! The finite-difference oracles are deliberately independent of the
//! closed-form kernel implementations they check: they only ever evaluate
//! `k_yy` (whose three-line formula is asserted separately against direct
//! exponentials) and combine pointwise samples of it.

#![allow(dead_code)]

use pdegp::kernels::{
    k_yy, operator_apply_fd_richardson, KernelHypers, Params, PdeParams, Point,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Step factor for single operator applications (times the smaller
/// lengthscale).
pub const FD_STEP_SINGLE: f64 = 1e-4;

/// Step factor for the double application. Nesting two second differences
/// amplifies round-off like eps/s^4, so the single-application step would
/// drown the signal; 1e-2 with Richardson keeps both truncation and
/// cancellation near 1e-6 relative.
pub const FD_STEP_DOUBLE: f64 = 1e-2;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_hypers(rng: &mut ChaCha8Rng) -> KernelHypers {
    KernelHypers::new(
        rng.random_range(0.3..3.0),
        rng.random_range(0.5..2.0),
        rng.random_range(0.5..2.0),
    )
    .unwrap()
}

pub fn random_pde(rng: &mut ChaCha8Rng) -> PdeParams {
    PdeParams::new(
        rng.random_range(0.3..3.0),
        rng.random_range(0.3..3.0),
        rng.random_range(0.3..3.0),
    )
    .unwrap()
}

pub fn random_params(rng: &mut ChaCha8Rng) -> Params {
    Params::new(random_pde(rng), random_hypers(rng))
}

/// A random pair with separation between 0.05 and 2 lengthscales in each
/// direction, avoiding both FD cancellation at zero separation and the
/// vanishing-kernel regime far away.
pub fn random_pair(rng: &mut ChaCha8Rng, h: &KernelHypers) -> (Point, Point) {
    let p = Point::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let sign = |r: &mut ChaCha8Rng| if r.random::<bool>() { 1.0 } else { -1.0 };
    let dx = sign(rng) * rng.random_range(0.05..2.0) * h.theta_x();
    let dt = sign(rng) * rng.random_range(0.05..2.0) * h.theta_t();
    (p, Point::new(p.x + dx, p.t + dt))
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point> {
    (0..n)
        .map(|_| Point::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
        .collect()
}

/// FD oracle for `k_yf = L_{x',t'} k_yy`: the operator acts on the second
/// argument pair.
pub fn fd_kyf(p: Point, q: Point, h: &KernelHypers, th: &PdeParams) -> f64 {
    let step = FD_STEP_SINGLE * h.theta_x().min(h.theta_t());
    operator_apply_fd_richardson(|q2| k_yy(p, q2, h).unwrap(), q, th, step)
}

/// FD oracle for `k_fy = L_{x,t} k_yy`: the operator acts on the first
/// argument pair.
pub fn fd_kfy(p: Point, q: Point, h: &KernelHypers, th: &PdeParams) -> f64 {
    let step = FD_STEP_SINGLE * h.theta_x().min(h.theta_t());
    operator_apply_fd_richardson(|p2| k_yy(p2, q, h).unwrap(), p, th, step)
}

/// FD oracle for `k_ff = L_{x,t} L_{x',t'} k_yy`: nested application, inner
/// over the second argument pair, outer over the first.
pub fn fd_kff(p: Point, q: Point, h: &KernelHypers, th: &PdeParams) -> f64 {
    let step = FD_STEP_DOUBLE * h.theta_x().min(h.theta_t());
    operator_apply_fd_richardson(
        |p2| operator_apply_fd_richardson(|q2| k_yy(p2, q2, h).unwrap(), q, th, step),
        p,
        th,
        step,
    )
}

/// Natural magnitude of operator-kernel values for the given parameters,
/// used as the floor of relative comparisons so that incidental zeros of
/// the prefactors do not inflate relative errors.
pub fn kernel_scale(h: &KernelHypers, th: &PdeParams) -> f64 {
    let lx2 = h.theta_x() * h.theta_x();
    let lt = h.theta_t();
    h.sigma_y2() * (1.0 + th.d() / lx2 + th.alpha() / lt + th.beta()).powi(2)
}

/// Relative agreement with a scale floor: `|got - want|` must not exceed
/// `tol * max(|want|, 0.01 * scale)`.
pub fn assert_close(got: f64, want: f64, tol: f64, scale: f64, context: &str) {
    let denom = want.abs().max(0.01 * scale);
    let err = (got - want).abs();
    assert!(
        err <= tol * denom,
        "{context}: got {got}, want {want}, |err| = {err:.3e} > {tol:.1e} * {denom:.3e}"
    );
}

use nalgebra::DMatrix;
use pdegp::gp::{GpModel, NoiseModel, ObservationVector};
use pdegp::kernels::{assemble_joint, Channel};
use rand_distr::{Distribution, StandardNormal};

/// A random two-channel regression problem with comfortable noise, so the
/// base jitter level never escalates and a dense oracle can reproduce the
/// factorized matrix exactly.
pub fn random_problem(
    r: &mut ChaCha8Rng,
    n_y: usize,
    n_f: usize,
) -> (GpModel, Vec<(Point, Channel)>) {
    let pts_y = random_points(r, n_y);
    let pts_f = random_points(r, n_f);
    let vals_y: Vec<f64> = (0..n_y).map(|_| StandardNormal.sample(r)).collect();
    let vals_f: Vec<f64> = (0..n_f)
        .map(|_| {
            let z: f64 = StandardNormal.sample(r);
            3.0 * z
        })
        .collect();
    let noise: Vec<f64> = (0..n_y + n_f).map(|_| r.random_range(0.05..0.3)).collect();
    let tagged: Vec<(Point, Channel)> = pts_y
        .iter()
        .map(|&p| (p, Channel::Y))
        .chain(pts_f.iter().map(|&p| (p, Channel::F)))
        .collect();
    let obs = ObservationVector::new(pts_y, vals_y, pts_f, vals_f).unwrap();
    let model = GpModel::new(obs, NoiseModel::new(noise).unwrap()).unwrap();
    (model, tagged)
}

/// The exact matrix the implementation factorizes: `K + diag(noise)` plus
/// the documented base jitter level times the mean diagonal.
pub fn noisy_matrix(model: &GpModel, params: &Params) -> DMatrix<f64> {
    let obs = model.observations();
    let jk = assemble_joint(obs.points_y(), obs.points_f(), &params.hypers, &params.pde, false)
        .unwrap();
    let n = obs.len();
    let mut b = jk.matrix;
    for i in 0..n {
        b[(i, i)] += model.noise().variances()[i];
    }
    let jitter = model.jitter().initial * b.trace() / n as f64;
    for i in 0..n {
        b[(i, i)] += jitter;
    }
    b
}

/// Log marginal likelihood by explicit inverse and determinant.
pub fn dense_lml(model: &GpModel, params: &Params) -> f64 {
    let b = noisy_matrix(model, params);
    let n = b.nrows();
    let s = model.observations().values();
    let det = b.determinant();
    let inv = b.try_inverse().unwrap();
    -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln()
        + det.ln()
        + (s.transpose() * &inv * s)[(0, 0)])
}
