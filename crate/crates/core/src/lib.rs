//! Bayesian inference of PDE parameters with operator-derived Gaussian
//! process kernels.
//!
//! A reaction-diffusion model links a latent protein field `y(x,t)` to an
//! mRNA field `f(x,t)` through the linear operator
//! `L = -D d²/dx² + alpha d/dt + beta`. Because the operator is linear, it
//! can be folded into the covariance of a multi-output Gaussian process over
//! `(y, f)`: no discretization, no PDE solves. The [`kernels`] module builds
//! that covariance and its analytic parameter gradients, [`gp`] does the
//! heteroscedastic regression (likelihood, gradient, posterior fields),
//! [`hmc`] samples PDE parameters and kernel hyperparameters jointly with
//! Hybrid Monte Carlo, and [`data`]/[`cli`] provide the simulation study,
//! file formats and command-line workflows.
//!
//! ```
//! use pdegp::data::{generate_simulation, SimulationSpec};
//! use pdegp::gp::{GpModel, PriorSet};
//! use pdegp::hmc::{run_chain, HmcConfig};
//! use pdegp::kernels::Params;
//!
//! let ds = generate_simulation(&SimulationSpec::default()).unwrap();
//! let (obs, noise) = ds.to_observations().unwrap();
//! let model = GpModel::new(obs, noise).unwrap();
//! let init = Params::from_array([1.0; 6]).unwrap();
//! let cfg = HmcConfig { n_warmup: 20, n_samples: 10, ..HmcConfig::default() };
//! let (_chain, summary) = run_chain(&model, &PriorSet::flat(), &init, &cfg).unwrap();
//! assert_eq!(summary.n, 10);
//! ```

pub mod cli;
pub mod data;
pub mod error;
pub mod gp;
pub mod hmc;
pub mod kernels;

pub use error::{Error, Result};
