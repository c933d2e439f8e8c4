//! Exercises the C ABI the way a foreign caller would: raw pointers,
//! status codes, explicit frees.

use std::ffi::{CStr, CString};
use std::ptr;

use pdegp_ffi::*;

fn default_sim_options() -> PdegpSimulationOptions {
    PdegpSimulationOptions {
        n_locations: 12,
        x_min: 0.0,
        x_max: 6.0,
        t_min: 0.0,
        t_max: 6.0,
        sigma0: 0.1,
        seed: 42,
        channels: PdegpChannels::Both,
    }
}

fn unit_params() -> [f64; 6] {
    [1.0; 6]
}

#[test]
fn generate_inspect_save_load_free() {
    unsafe {
        let mut ds: *mut PdegpDataset = ptr::null_mut();
        let status = pdegp_dataset_generate(&default_sim_options(), &mut ds);
        assert_eq!(status, PdegpStatus::Ok);
        assert_eq!(pdegp_dataset_len(ds), 24);

        let dir = std::env::temp_dir().join(format!("pdegp-ffi-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = CString::new(dir.join("ffi.csv").to_str().unwrap()).unwrap();
        assert_eq!(pdegp_dataset_save(ds, path.as_ptr()), PdegpStatus::Ok);

        let mut loaded: *mut PdegpDataset = ptr::null_mut();
        assert_eq!(
            pdegp_dataset_load(path.as_ptr(), &mut loaded),
            PdegpStatus::Ok
        );
        assert_eq!(pdegp_dataset_len(loaded), 24);

        pdegp_dataset_free(ds);
        pdegp_dataset_free(loaded);
    }
}

#[test]
fn null_pointers_are_reported_not_crashed() {
    unsafe {
        let mut out: *mut PdegpDataset = ptr::null_mut();
        assert_eq!(
            pdegp_dataset_load(ptr::null(), &mut out),
            PdegpStatus::NullPointer
        );
        let msg = CStr::from_ptr(pdegp_last_error_message());
        assert!(!msg.to_bytes().is_empty());
        assert_eq!(pdegp_dataset_len(ptr::null()), 0);
        pdegp_dataset_free(ptr::null_mut());
    }
}

#[test]
fn missing_file_is_an_io_error_with_message() {
    unsafe {
        let mut out: *mut PdegpDataset = ptr::null_mut();
        let path = CString::new("/definitely/not/here.csv").unwrap();
        assert_eq!(
            pdegp_dataset_load(path.as_ptr(), &mut out),
            PdegpStatus::IoError
        );
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    unsafe {
        let mut ds: *mut PdegpDataset = ptr::null_mut();
        assert_eq!(
            pdegp_dataset_generate(&default_sim_options(), &mut ds),
            PdegpStatus::Ok
        );
        let mut lml = 0.0f64;
        let bad = [-1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        assert_eq!(
            pdegp_log_marginal_likelihood(ds, bad.as_ptr(), &mut lml),
            PdegpStatus::InvalidInput
        );
        pdegp_dataset_free(ds);
    }
}

#[test]
fn likelihood_and_gradient_round_trip() {
    unsafe {
        let mut ds: *mut PdegpDataset = ptr::null_mut();
        assert_eq!(
            pdegp_dataset_generate(&default_sim_options(), &mut ds),
            PdegpStatus::Ok
        );
        let params = unit_params();
        let mut lml = f64::NAN;
        assert_eq!(
            pdegp_log_marginal_likelihood(ds, params.as_ptr(), &mut lml),
            PdegpStatus::Ok
        );
        assert!(lml.is_finite());

        let mut grad = [f64::NAN; 6];
        assert_eq!(
            pdegp_grad_log_marginal_likelihood(ds, params.as_ptr(), grad.as_mut_ptr()),
            PdegpStatus::Ok
        );
        // central finite difference on the first component through the same ABI
        let h = 1e-6;
        let mut up = params;
        up[0] += h;
        let mut dn = params;
        dn[0] -= h;
        let (mut lu, mut ld) = (0.0, 0.0);
        assert_eq!(
            pdegp_log_marginal_likelihood(ds, up.as_ptr(), &mut lu),
            PdegpStatus::Ok
        );
        assert_eq!(
            pdegp_log_marginal_likelihood(ds, dn.as_ptr(), &mut ld),
            PdegpStatus::Ok
        );
        let fd = (lu - ld) / (2.0 * h);
        assert!(
            (grad[0] - fd).abs() <= 1e-5 * grad[0].abs().max(1.0),
            "grad {} vs fd {}",
            grad[0],
            fd
        );
        pdegp_dataset_free(ds);
    }
}

#[test]
fn fit_exposes_summary_and_draws() {
    unsafe {
        let mut ds: *mut PdegpDataset = ptr::null_mut();
        assert_eq!(
            pdegp_dataset_generate(&default_sim_options(), &mut ds),
            PdegpStatus::Ok
        );

        let mut opts = PdegpFitOptions {
            n_warmup: 0,
            n_samples: 0,
            leapfrog_steps: 0,
            step_size: 0.0,
            target_accept: 0.0,
            seed: 0,
            sampled: [0; 6],
            init: [0.0; 6],
        };
        assert_eq!(pdegp_fit_options_default(&mut opts), PdegpStatus::Ok);
        assert_eq!(opts.n_samples, 7000);
        opts.n_warmup = 80;
        opts.n_samples = 60;
        opts.seed = 5;

        let mut fit: *mut PdegpFitResult = ptr::null_mut();
        assert_eq!(pdegp_fit(ds, &opts, &mut fit), PdegpStatus::Ok);
        assert_eq!(pdegp_fit_result_len(fit), 60);
        for i in 0..6 {
            assert!(pdegp_fit_result_mean(fit, i) > 0.0);
            assert!(pdegp_fit_result_sd(fit, i) >= 0.0);
            assert!(pdegp_fit_result_ess(fit, i) >= 0.0);
        }
        assert_eq!(pdegp_fit_result_correlation(fit, 2, 2), 1.0);
        let rate = pdegp_fit_result_acceptance_rate(fit);
        assert!((0.0..=1.0).contains(&rate));
        let _ = pdegp_fit_result_divergences(fit);

        let mut draws = vec![0.0f64; 60];
        let copied = pdegp_fit_result_draws(fit, 0, draws.as_mut_ptr(), draws.len());
        assert_eq!(copied, 60);
        assert!(draws.iter().all(|&v| v > 0.0));

        // bad index goes to NaN, not UB
        assert!(pdegp_fit_result_mean(fit, 17).is_nan());

        pdegp_fit_result_free(fit);
        pdegp_dataset_free(ds);
    }
}

#[test]
fn zero_samples_is_invalid_config_through_the_abi() {
    unsafe {
        let mut ds: *mut PdegpDataset = ptr::null_mut();
        assert_eq!(
            pdegp_dataset_generate(&default_sim_options(), &mut ds),
            PdegpStatus::Ok
        );
        let mut opts = PdegpFitOptions {
            n_warmup: 0,
            n_samples: 0,
            leapfrog_steps: 0,
            step_size: 0.0,
            target_accept: 0.0,
            seed: 0,
            sampled: [0; 6],
            init: [0.0; 6],
        };
        pdegp_fit_options_default(&mut opts);
        opts.n_samples = 0;
        let mut fit: *mut PdegpFitResult = ptr::null_mut();
        assert_eq!(pdegp_fit(ds, &opts, &mut fit), PdegpStatus::InvalidConfig);
        pdegp_dataset_free(ds);
    }
}

#[test]
fn predict_fills_caller_buffers() {
    unsafe {
        // F-only dataset so the y prediction takes the cross-channel path
        let mut opts = default_sim_options();
        opts.channels = PdegpChannels::FOnly;
        opts.sigma0 = 0.01;
        opts.n_locations = 20;
        let mut ds: *mut PdegpDataset = ptr::null_mut();
        assert_eq!(pdegp_dataset_generate(&opts, &mut ds), PdegpStatus::Ok);

        let xs = [1.0, 2.0, 3.0];
        let ts = [1.0, 2.5, 4.0, 5.5];
        let mut mean = vec![f64::NAN; xs.len() * ts.len()];
        let mut var = vec![f64::NAN; xs.len() * ts.len()];
        let params = [1.0, 1.0, 1.0, 1.0, 1.5, 1.5];
        let status = pdegp_predict(
            ds,
            params.as_ptr(),
            PdegpChannel::Y,
            xs.as_ptr(),
            xs.len(),
            ts.as_ptr(),
            ts.len(),
            mean.as_mut_ptr(),
            var.as_mut_ptr(),
        );
        assert_eq!(status, PdegpStatus::Ok);
        assert!(mean.iter().all(|v| v.is_finite()));
        assert!(var.iter().all(|&v| v >= 0.0));
        pdegp_dataset_free(ds);
    }
}

#[test]
fn param_names_match_canonical_order() {
    unsafe {
        let expected = ["D", "alpha", "beta", "sigma_y2", "theta_t", "theta_x"];
        for (i, want) in expected.iter().enumerate() {
            let name = CStr::from_ptr(pdegp_param_name(i));
            assert_eq!(name.to_str().unwrap(), *want);
        }
        assert!(pdegp_param_name(6).is_null());
    }
}
