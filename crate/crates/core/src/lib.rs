//! Random means: p-variable means drawn at random, their expectations, and
//! Monte Carlo checks of the associated strong laws and limit laws.

pub mod distributions;
pub mod error;
pub mod expectation;
pub mod gaussian;
pub mod grid;
pub mod interval;
pub mod limit_sim;
pub mod mean;
pub mod quadrature;
pub mod random_mean;
pub mod rng;
pub mod stats;
pub mod sup;

pub use distributions::{multinomial_covariance, Law, Moments, ScalarDist, VectorDist};
pub use error::{Error, Result};
pub use gaussian::{sample_gaussian, GaussianSampler};
pub use grid::GridSpec;
pub use interval::{Interval, Point};
pub use mean::{Interpolation, MeanExpr};
pub use random_mean::{running_average, running_geometric, RandomMeanSpec, RunningAverage};
pub use rng::RngStream;
pub use sup::{internality_violation, refine_sup, rho, sup_abs_inner, tabulate};
pub use expectation::{
    check_is_mean, closed_form_expectation, monte_carlo_expectation, quadrature_expectation,
    ExpectationResult, Method,
};
pub use limit_sim::{
    bernoulli_closed_form_limit_sample, clt_sample, half_normal_limit_scale, kappa, limit_law_sample, power_limit_sample,
    power_sup_ratio, slln_trajectory, PowerLimit, SimConfig, Trajectories,
};
pub use stats::{half_normal_cdf, ks_against_cdf, ks_distance, EmpiricalSample};
