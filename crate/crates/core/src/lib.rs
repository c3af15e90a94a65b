//! Exponentially weighted aggregation (EWA) over a finite dictionary, with
//! the noise couplings, Bernstein profiles and oracle bounds used to certify
//! its risk.
//!
//! The observation model is `Y = theta* + xi` in `R^n`. EWA averages the
//! dictionary atoms with weights proportional to
//! `exp(-||Y - theta_j||^2 / beta) pi_0(j)`.

pub mod bernstein;
pub mod cli;
pub mod coupling;
pub mod error;
pub mod ewa;
pub mod model;
pub mod noise;
pub mod oracle;
pub mod report;
pub mod rng;
pub mod stats;

pub use bernstein::{beta_threshold, profile_for, variance_penalty_coefficient, BernsteinProfile};
pub use coupling::{draw_coupling, verify_coupling, CouplingDraw, CouplingReport, Method};
pub use error::{Error, Result};
pub use ewa::{
    aggregate, ewa_estimate, gibbs_objective, kl_divergence, posterior_variance, posterior_weights,
    PosteriorWeights,
};
pub use model::{
    squared_distance, sup_diameter, Dictionary, ExperimentConfig, SignalVector, SupportDiameter, WeightVector,
};
pub use noise::{Family, NoiseModel};
pub use oracle::{
    certify_corollary, mc_risk, oracle_bound_finite, oracle_bound_gibbs, Mode, RiskReport, Scenario,
};
