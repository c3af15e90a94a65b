//! Oracle bounds and Monte Carlo certification of the EWA risk.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bernstein::{beta_threshold, profile_for, variance_penalty_coefficient};
use crate::error::{Error, Result};
use crate::ewa::{
    check_beta, ewa_estimate, gibbs_free_energy, posterior_variance, sampled_prior_ewa_detailed,
    DictionaryPrior,
};
use crate::model::{sq_dist, sup_diameter, Dictionary, ExperimentConfig, SignalVector, SupportDiameter, WeightVector};
use crate::noise::{sample_noise, Family, MixingAtom, NoiseModel};
use crate::rng::{stream_rng, streams};
use crate::stats::mean_and_stderr;

/// Standard errors of slack granted to a Monte Carlo verdict.
pub const CONFIDENCE_MULTIPLIER: f64 = 3.0;

fn check_bound_inputs(dict: &Dictionary, truth: &SignalVector, prior: &WeightVector, beta: f64) -> Result<Vec<f64>> {
    check_beta(beta)?;
    dict.check_signal("truth", truth)?;
    dict.check_weights("prior", prior)?;
    Ok(dict
        .atoms()
        .iter()
        .map(|a| sq_dist(a.as_slice(), truth.as_slice()))
        .collect())
}

/// `min_j ||theta_j - theta*||^2 + beta log(1 / pi_0(j))` over atoms with
/// positive prior weight.
pub fn oracle_bound_finite(dict: &Dictionary, truth: &SignalVector, prior: &WeightVector, beta: f64) -> Result<f64> {
    let d = check_bound_inputs(dict, truth, prior, beta)?;
    Ok(d.iter()
        .zip(prior.log_weights())
        .filter(|(_, l)| **l > f64::NEG_INFINITY)
        .map(|(dj, l)| if *l == 0.0 { *dj } else { dj - beta * l })
        .fold(f64::INFINITY, f64::min))
}

/// `inf_pi { sum_j pi_j ||theta_j - theta*||^2 + beta KL(pi || pi_0) }`,
/// evaluated as `-beta log sum_j pi_0(j) exp(-||theta_j - theta*||^2 / beta)`.
pub fn oracle_bound_gibbs(dict: &Dictionary, truth: &SignalVector, prior: &WeightVector, beta: f64) -> Result<f64> {
    let d = check_bound_inputs(dict, truth, prior, beta)?;
    Ok(gibbs_free_energy(&d, prior, beta))
}

/// Which inequality a Monte Carlo run certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `risk <= bound`, valid for `beta` at or above the threshold.
    Clean,
    /// `risk <= bound + coefficient * E[Var]`.
    VariancePenalty,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Clean => "clean",
            Mode::VariancePenalty => "variance_penalty",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clean" => Ok(Mode::Clean),
            "variance_penalty" => Ok(Mode::VariancePenalty),
            other => Err(Error::invalid(format!(
                "mode must be clean or variance_penalty (got {other:?})"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub family: Family,
    pub n: usize,
    pub m: usize,
    pub beta: f64,
    pub diameter: f64,
    pub threshold: f64,
    pub mode: Mode,
    pub risk_estimate: f64,
    pub risk_stderr: f64,
    pub mean_posterior_variance: f64,
    pub posterior_variance_stderr: f64,
    /// `None` when `beta <= 2 b(0) d0`, where the coefficient is undefined.
    pub penalty_coefficient: Option<f64>,
    /// `coefficient * mean_posterior_variance` in variance-penalty mode, 0 otherwise.
    pub penalty_term: f64,
    pub oracle_bound: f64,
    /// `oracle_bound + penalty_term - risk_estimate`.
    pub slack: f64,
    /// Standard error used by the verdict: that of the risk in clean mode,
    /// that of the per-replicate `loss - coefficient * variance` otherwise.
    pub verdict_stderr: f64,
    pub confidence_multiplier: f64,
    pub passed: bool,
    pub replicates: usize,
    pub seed: u64,
}

/// Monte Carlo risk of EWA under `config`, with the diameter of the
/// dictionary support as `d0`.
pub fn mc_risk(config: &ExperimentConfig, mode: Mode) -> Result<RiskReport> {
    mc_risk_with_diameter(config, mode, sup_diameter(&config.dictionary))
}

/// As [`mc_risk`] with an explicit `d0`, which must be at least the diameter
/// of the dictionary support.
///
/// Replicate `r` draws from its own stream, so the report is identical for
/// any worker count.
pub fn mc_risk_with_diameter(config: &ExperimentConfig, mode: Mode, d0: SupportDiameter) -> Result<RiskReport> {
    config.validate()?;
    let actual = sup_diameter(&config.dictionary).value();
    if d0.value() < actual * (1.0 - 1e-12) {
        return Err(Error::invalid(format!(
            "diameter {} is smaller than the dictionary support diameter {actual}",
            d0.value()
        )));
    }
    let profile = profile_for(&config.noise);
    let threshold = beta_threshold(&profile, d0);
    let coefficient = variance_penalty_coefficient(config.beta, &profile, d0).ok();
    match mode {
        Mode::Clean if config.beta < threshold => log::warn!(
            "beta = {} is below the threshold {threshold}; the clean bound is not guaranteed",
            config.beta
        ),
        Mode::VariancePenalty if coefficient.is_none() => {
            return Err(Error::invalid(format!(
                "beta = {} must exceed 2 b(0) d0 = {} for the variance-penalty bound",
                config.beta,
                2.0 * profile.b_0 * d0.value()
            )))
        }
        _ => {}
    }
    let bound = oracle_bound_gibbs(&config.dictionary, &config.truth, &config.prior, config.beta)?;

    let sampler = match config.prior_samples {
        Some(_) => Some(DictionaryPrior::new(config.dictionary.clone(), &config.prior)?),
        None => None,
    };
    let per_replicate: Vec<(f64, f64)> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(config.seed, streams::REPLICATES + r as u64);
            let xi = sample_noise(&config.noise, &mut rng);
            let y = config.truth.add(&xi);
            let (estimate, variance) = match (&sampler, config.prior_samples) {
                (Some(s), Some(count)) => {
                    let est = sampled_prior_ewa_detailed(&y, s, config.beta, count, &mut rng)?;
                    let var = posterior_variance(&est.draws, &est.weights)?;
                    (est.estimate, var)
                }
                _ => {
                    let (est, post) = ewa_estimate(&y, &config.dictionary, &config.prior, config.beta)?;
                    let var = posterior_variance(&config.dictionary, &post.weights)?;
                    (est, var)
                }
            };
            Ok((sq_dist(estimate.as_slice(), config.truth.as_slice()), variance))
        })
        .collect::<Result<Vec<_>>>()?;

    let losses: Vec<f64> = per_replicate.iter().map(|p| p.0).collect();
    let variances: Vec<f64> = per_replicate.iter().map(|p| p.1).collect();
    let (risk, risk_se) = mean_and_stderr(&losses);
    let (mean_var, var_se) = mean_and_stderr(&variances);
    let (penalty_term, verdict_se) = match mode {
        Mode::Clean => (0.0, risk_se),
        Mode::VariancePenalty => {
            let c = coefficient.expect("checked above");
            let combined: Vec<f64> = per_replicate.iter().map(|(l, v)| l - c * v).collect();
            (c * mean_var, mean_and_stderr(&combined).1)
        }
    };
    let passed = risk <= bound + penalty_term + CONFIDENCE_MULTIPLIER * verdict_se;
    Ok(RiskReport {
        family: config.noise.family(),
        n: config.dictionary.dim(),
        m: config.dictionary.len(),
        beta: config.beta,
        diameter: d0.value(),
        threshold,
        mode,
        risk_estimate: risk,
        risk_stderr: risk_se,
        mean_posterior_variance: mean_var,
        posterior_variance_stderr: var_se,
        penalty_coefficient: coefficient,
        penalty_term,
        oracle_bound: bound,
        slack: bound + penalty_term - risk,
        verdict_stderr: verdict_se,
        confidence_multiplier: CONFIDENCE_MULTIPLIER,
        passed,
        replicates: config.replicates,
        seed: config.seed,
    })
}

/// An experiment together with the diameter of its natural signal domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub config: ExperimentConfig,
    pub diameter: f64,
}

impl Scenario {
    /// Desk-scale scenario on `[0, 1]^n` (diameter 1): atom 0 is a small
    /// perturbation of the truth, the rest are uniform on the cube, and the
    /// prior is uniform. Noise parameters per family: `rho = theta*` for
    /// Bernoulli and binomial (`a = 1/5`, `k = 5`), `sigma = 1`, `mu = 1`, and
    /// binary mixtures with `a, b <= 1/2` (so `L = 1`).
    pub fn desk(family: Family, n: usize, m: usize, replicates: usize, seed: u64) -> Result<Scenario> {
        if n == 0 || m == 0 {
            return Err(Error::invalid("scenario needs n >= 1 and m >= 1"));
        }
        let mut rng = stream_rng(seed, streams::SCENARIO);
        let truth: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..0.9)).collect();
        let mut rows = Vec::with_capacity(m);
        rows.push(
            truth
                .iter()
                .map(|t| (t + rng.random_range(-0.1..0.1)).clamp(0.0, 1.0))
                .collect::<Vec<f64>>(),
        );
        for _ in 1..m {
            rows.push((0..n).map(|_| rng.random::<f64>()).collect());
        }
        let noise = match family {
            Family::CenteredBernoulli => NoiseModel::centered_bernoulli(truth.clone())?,
            Family::Gaussian => NoiseModel::iid_gaussian(n, 1.0)?,
            Family::Laplace => NoiseModel::iid_laplace(n, 1.0)?,
            Family::CenteredBinomial => NoiseModel::centered_binomial(0.2, 5, truth.clone())?,
            Family::BoundedBinaryMixture => NoiseModel::iid_bounded_binary_mixture(
                n,
                0.5,
                0.5,
                vec![
                    MixingAtom { a: 0.5, b: 0.5, weight: 0.5 },
                    MixingAtom { a: 0.2, b: 0.4, weight: 0.3 },
                    MixingAtom { a: 0.5, b: 0.1, weight: 0.2 },
                ],
            )?,
        };
        let config = ExperimentConfig::new(
            SignalVector::new(truth)?,
            Dictionary::from_rows(rows)?,
            WeightVector::uniform(m)?,
            noise,
            1.0,
            replicates,
            seed,
            None,
        )?;
        Ok(Scenario { config, diameter: 1.0 })
    }

    pub fn threshold(&self) -> Result<f64> {
        Ok(beta_threshold(&profile_for(&self.config.noise), SupportDiameter::new(self.diameter)?))
    }

    /// The same scenario at another `beta`.
    pub fn at_beta(&self, beta: f64) -> Result<ExperimentConfig> {
        let mut cfg = self.config.clone();
        cfg.beta = beta;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Reports of [`certify_corollary`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Clean bound at `beta = threshold`.
    pub at_threshold: RiskReport,
    /// Variance-penalty bound at `beta = threshold / 2`.
    pub below_threshold: RiskReport,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.at_threshold.passed && self.below_threshold.passed
    }
}

/// Runs the scenario at its family's threshold in clean mode and at half the
/// threshold in variance-penalty mode.
pub fn certify_corollary(scenario: &Scenario) -> Result<Certificate> {
    let d0 = SupportDiameter::new(scenario.diameter)?;
    let threshold = scenario.threshold()?;
    let at_threshold = mc_risk_with_diameter(&scenario.at_beta(threshold)?, Mode::Clean, d0)?;
    let below_threshold = mc_risk_with_diameter(&scenario.at_beta(0.5 * threshold)?, Mode::VariancePenalty, d0)?;
    Ok(Certificate {
        at_threshold,
        below_threshold,
    })
}
