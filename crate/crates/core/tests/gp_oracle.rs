//! GP oracle suite: likelihood, gradient and predictions against explicit
//! inverse/determinant Gaussian formulas on small problems, finite
//! differences of the likelihood, and structural posterior properties.

mod common;

use common::*;
use nalgebra::DVector;
use pdegp::data::{generate_simulation, ChannelSelection, PointSpec, SimulationSpec};
use pdegp::gp::{GpModel, JitterPolicy, NoiseModel, ObservationVector, PriorSet};
use pdegp::kernels::{
    operator_apply_fd_richardson, Channel, KernelHypers, Params, PdeParams, Point, PARAMS,
};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[test]
fn lml_matches_dense_oracle() {
    let mut r = rng(20);
    for case in 0..12 {
        let n_y = r.random_range(1..=6);
        let n_f = r.random_range(1..=6);
        let (model, _) = random_problem(&mut r, n_y, n_f);
        let params = random_params(&mut r);
        let got = model.log_marginal_likelihood(&params).unwrap();
        let want = dense_lml(&model, &params);
        assert!(
            (got - want).abs() < 1e-10,
            "case {case}: cholesky {got} vs dense {want}"
        );
    }
}

#[test]
fn predictions_match_dense_oracle() {
    let mut r = rng(21);
    for case in 0..10 {
        let (model, _) = random_problem(&mut r, 3, 2);
        let params = random_params(&mut r);
        let targets: Vec<(Point, Channel)> = (0..3)
            .map(|_| {
                let p = Point::new(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
                let ch = if r.random::<bool>() { Channel::Y } else { Channel::F };
                (p, ch)
            })
            .collect();
        let field = model.predict(&params, &targets).unwrap();

        let b = noisy_matrix(&model, &params);
        let inv = b.try_inverse().unwrap();
        let s = model.observations().values();
        let train = model.observations().tagged_points();
        for (j, &(q, cq)) in targets.iter().enumerate() {
            let kst = DVector::from_iterator(
                train.len(),
                train.iter().map(|&(p, cp)| {
                    pdegp::kernels::kernel_value((p, cp), (q, cq), &params.hypers, &params.pde)
                        .unwrap()
                }),
            );
            let mean = (kst.transpose() * &inv * s)[(0, 0)];
            let prior = pdegp::kernels::kernel_value((q, cq), (q, cq), &params.hypers, &params.pde)
                .unwrap();
            let var = prior - (kst.transpose() * &inv * &kst)[(0, 0)];
            assert!(
                (field.mean[j] - mean).abs() < 1e-10,
                "case {case} target {j}: mean {} vs dense {mean}",
                field.mean[j]
            );
            assert!(
                (field.variance[j] - var.max(0.0)).abs() < 1e-10,
                "case {case} target {j}: var {} vs dense {var}",
                field.variance[j]
            );
        }
    }
}

fn fd_grad_lml(model: &GpModel, params: &Params) -> [f64; 6] {
    let theta = params.to_array();
    std::array::from_fn(|i| {
        let h = 1e-6 * theta[i];
        let mut up = theta;
        up[i] += h;
        let mut down = theta;
        down[i] -= h;
        let lu = model
            .log_marginal_likelihood(&Params::from_array(up).unwrap())
            .unwrap();
        let ld = model
            .log_marginal_likelihood(&Params::from_array(down).unwrap())
            .unwrap();
        (lu - ld) / (2.0 * h)
    })
}

#[test]
fn lml_gradient_matches_finite_differences() {
    let mut r = rng(22);
    for case in 0..20 {
        let n_y = r.random_range(1..=6);
        let n_f = r.random_range(1..=6);
        let (model, _) = random_problem(&mut r, n_y, n_f);
        let params = random_params(&mut r);
        let got = model.grad_log_marginal_likelihood(&params).unwrap();
        let fd = fd_grad_lml(&model, &params);
        let scale = got.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        for (i, p) in PARAMS.iter().enumerate() {
            let denom = got[i].abs().max(1e-3 * scale);
            assert!(
                (got[i] - fd[i]).abs() <= 1e-5 * denom,
                "case {case} d/d{}: analytic {} vs fd {}",
                p.name(),
                got[i],
                fd[i]
            );
        }
    }
}

#[test]
fn unconstrained_posterior_gradient_matches_finite_differences() {
    let mut r = rng(23);
    let mut priors = PriorSet::flat();
    priors.set(
        pdegp::kernels::Param::D,
        pdegp::gp::Prior::log_normal(0.0, 1.0).unwrap(),
    );
    priors.set(
        pdegp::kernels::Param::Beta,
        pdegp::gp::Prior::gamma(2.0, 1.5).unwrap(),
    );
    for case in 0..10 {
        let (model, _) = random_problem(&mut r, 4, 3);
        let params = random_params(&mut r);
        let phi = params.ln();
        let (_, got) = model
            .log_posterior_unconstrained_and_grad(&phi, &priors)
            .unwrap();
        let scale = got.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        for (i, p) in PARAMS.iter().enumerate() {
            let h = 1e-6 * phi[i].abs().max(1.0);
            let mut up = phi;
            up[i] += h;
            let mut down = phi;
            down[i] -= h;
            let lu = model.log_posterior_unconstrained(&up, &priors).unwrap();
            let ld = model.log_posterior_unconstrained(&down, &priors).unwrap();
            let fd = (lu - ld) / (2.0 * h);
            let denom = got[i].abs().max(1e-3 * scale);
            assert!(
                (got[i] - fd).abs() <= 1e-5 * denom,
                "case {case} d/dphi_{}: analytic {} vs fd {fd}",
                p.name(),
                got[i]
            );
        }
    }
}

#[test]
fn gradient_vanishes_at_optimizer_stationary_point() {
    // Backtracking gradient ascent on the log marginal likelihood in log
    // coordinates; at convergence the constrained-scale gradient must be
    // numerically zero as well.
    let spec = SimulationSpec {
        points: PointSpec::RandomUniform {
            n_locations: 10,
            x_range: (0.0, 2.0 * std::f64::consts::PI),
            t_range: (0.0, 2.0 * std::f64::consts::PI),
        },
        channels: ChannelSelection::Both,
        sigma0: 0.2,
        seed: 99,
    };
    let ds = generate_simulation(&spec).unwrap();
    let (obs, noise) = ds.to_observations().unwrap();
    let model = GpModel::new(obs, noise).unwrap();

    let lml_phi = |phi: &[f64; 6]| -> f64 {
        model
            .log_marginal_likelihood(&Params::from_ln(phi).unwrap())
            .unwrap()
    };
    let grad_phi = |phi: &[f64; 6]| -> [f64; 6] {
        let params = Params::from_ln(phi).unwrap();
        let g = model.grad_log_marginal_likelihood(&params).unwrap();
        let theta = params.to_array();
        std::array::from_fn(|i| g[i] * theta[i])
    };

    let mut phi = [0.0f64; 6];
    let mut value = lml_phi(&phi);
    for _ in 0..5000 {
        let g = grad_phi(&phi);
        let gnorm2: f64 = g.iter().map(|v| v * v).sum();
        if gnorm2.sqrt() < 1e-6 {
            break;
        }
        let mut step = 0.1;
        loop {
            let cand = std::array::from_fn(|i| phi[i] + step * g[i]);
            let cand_value = lml_phi(&cand);
            if cand_value > value + 1e-4 * step * gnorm2 {
                phi = cand;
                value = cand_value;
                break;
            }
            step *= 0.5;
            if step < 1e-14 {
                break;
            }
        }
        if step < 1e-14 {
            break;
        }
    }

    let params = Params::from_ln(&phi).unwrap();
    let g = model.grad_log_marginal_likelihood(&params).unwrap();
    let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(gnorm < 1e-4, "gradient norm at stationary point: {gnorm:.3e}");
}

#[test]
fn adding_an_observation_never_increases_variance() {
    let mut r = rng(24);
    for case in 0..10 {
        let (model, _) = random_problem(&mut r, 4, 2);
        let params = random_params(&mut r);
        let targets: Vec<(Point, Channel)> = (0..5)
            .map(|_| {
                let p = Point::new(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
                let ch = if r.random::<bool>() { Channel::Y } else { Channel::F };
                (p, ch)
            })
            .collect();
        let before = model.predict(&params, &targets).unwrap();

        // same data plus one extra Y observation
        let obs = model.observations();
        let mut pts_y = obs.points_y().to_vec();
        let mut vals_y: Vec<f64> = obs.values().iter().take(pts_y.len()).copied().collect();
        let vals_f: Vec<f64> = obs.values().iter().skip(pts_y.len()).copied().collect();
        pts_y.push(Point::new(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)));
        vals_y.push(StandardNormal.sample(&mut r));
        let mut noise = model.noise().variances().to_vec();
        noise.insert(pts_y.len() - 1, 0.1);
        let bigger = GpModel::new(
            ObservationVector::new(pts_y, vals_y, obs.points_f().to_vec(), vals_f).unwrap(),
            NoiseModel::new(noise).unwrap(),
        )
        .unwrap();
        let after = bigger.predict(&params, &targets).unwrap();

        for j in 0..targets.len() {
            assert!(
                after.variance[j] <= before.variance[j] + 1e-10,
                "case {case} target {j}: variance rose from {} to {}",
                before.variance[j],
                after.variance[j]
            );
        }
    }
}

#[test]
fn jitter_level_is_transparent_on_well_conditioned_problems() {
    let mut r = rng(25);
    let (model, _) = random_problem(&mut r, 5, 4);
    let params = random_params(&mut r);
    let tight = model.clone().with_jitter(JitterPolicy {
        initial: 1e-10,
        max: 1e-4,
    });
    let loose = model.clone().with_jitter(JitterPolicy {
        initial: 1e-8,
        max: 1e-4,
    });
    let a = tight.log_marginal_likelihood(&params).unwrap();
    let b = loose.log_marginal_likelihood(&params).unwrap();
    assert!(((a - b) / a).abs() < 1e-5, "lml {a} vs {b}");

    let targets = [(Point::new(0.3, 0.3), Channel::Y), (Point::new(1.0, -0.5), Channel::F)];
    let fa = tight.predict(&params, &targets).unwrap();
    let fb = loose.predict(&params, &targets).unwrap();
    for j in 0..targets.len() {
        let denom = fa.mean[j].abs().max(1.0);
        assert!(((fa.mean[j] - fb.mean[j]) / denom).abs() < 1e-5);
        assert!(((fa.variance[j] - fb.variance[j]) / fa.variance[j].max(1e-6)).abs() < 1e-5);
    }
}

#[test]
fn posterior_mean_fields_satisfy_the_operator_identity() {
    // The joint covariance encodes f = L y exactly, so FD-applying the
    // operator to the posterior y-mean must reproduce the posterior f-mean.
    // Noiseless-limit training data from the simulation truth.
    let spec = SimulationSpec {
        points: PointSpec::Grid {
            x_start: 0.5,
            x_stop: 5.5,
            n_x: 4,
            t_start: 0.5,
            t_stop: 5.5,
            n_t: 4,
        },
        channels: ChannelSelection::Both,
        sigma0: 0.0,
        seed: 1,
    };
    let ds = generate_simulation(&spec).unwrap();
    let (obs, noise) = ds.to_observations().unwrap();
    let model = GpModel::new(obs, noise).unwrap();
    let params = Params::new(
        PdeParams::new(1.0, 1.0, 1.0).unwrap(),
        KernelHypers::new(1.0, 1.5, 1.5).unwrap(),
    );

    let mean_y = |p: Point| {
        model
            .predict(&params, &[(p, Channel::Y)])
            .unwrap()
            .mean[0]
    };

    let interior: Vec<Point> = (0..5)
        .flat_map(|i| (0..5).map(move |j| Point::new(1.5 + 0.7 * i as f64, 1.5 + 0.7 * j as f64)))
        .collect();
    let f_field = model
        .predict(
            &params,
            &interior.iter().map(|&p| (p, Channel::F)).collect::<Vec<_>>(),
        )
        .unwrap();
    let f_scale = f_field.mean.iter().fold(0.0f64, |a, v| a.max(v.abs()));

    for (k, &p) in interior.iter().enumerate() {
        let lhs = operator_apply_fd_richardson(mean_y, p, &params.pde, 1e-3);
        let rhs = f_field.mean[k];
        assert!(
            (lhs - rhs).abs() <= 1e-3 * rhs.abs().max(0.01 * f_scale),
            "point {k}: L[mean_y] = {lhs} vs mean_f = {rhs}"
        );
    }
}
