//! Exponentially weighted aggregation.
//!
//! For an observation `y`, atoms `theta_1..theta_m`, prior `pi_0` and
//! temperature `beta > 0`, the posterior weights are
//!
//! ```text
//! pi_hat(j) ∝ exp(-||y - theta_j||^2 / beta) * pi_0(j)
//! ```
//!
//! and the estimate is `sum_j pi_hat(j) theta_j`. The posterior is also the
//! unique minimizer over the simplex of the Gibbs objective
//!
//! ```text
//! G(w) = sum_j w_j ||y - theta_j||^2 + beta * KL(w || pi_0),
//! ```
//!
//! with minimum value `-beta * log sum_j pi_0(j) exp(-||y - theta_j||^2 / beta)`.
//!
//! `beta = f64::INFINITY` is accepted everywhere and returns the prior.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{log_sum_exp, sq_dist, Dictionary, SignalVector, WeightVector};

/// Violation tolerance of [`dv_minimality_test`].
pub const DV_TOLERANCE: f64 = 1e-9;

/// Posterior weights together with the temperature that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorWeights {
    pub weights: WeightVector,
    pub beta: f64,
}

impl AsRef<WeightVector> for PosteriorWeights {
    fn as_ref(&self) -> &WeightVector {
        &self.weights
    }
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("beta must be positive"))
    }
}

fn distances(y: &SignalVector, dict: &Dictionary) -> Vec<f64> {
    dict.atoms()
        .iter()
        .map(|a| sq_dist(y.as_slice(), a.as_slice()))
        .collect()
}

/// Log-space softmin of `losses` against `prior` at temperature `beta`.
/// Zero-prior atoms are excluded and get weight exactly 0.
pub(crate) fn gibbs_weights(losses: &[f64], prior: &WeightVector, beta: f64) -> Result<WeightVector> {
    if beta == f64::INFINITY {
        return Ok(prior.clone());
    }
    let logp = prior.log_weights();
    let best = losses
        .iter()
        .zip(logp)
        .filter(|(_, l)| **l > f64::NEG_INFINITY)
        .map(|(d, _)| *d)
        .fold(f64::INFINITY, f64::min);
    if best == f64::INFINITY {
        return Err(Error::invalid("prior puts no mass on any atom"));
    }
    let log_unnorm = losses
        .iter()
        .zip(logp)
        .map(|(d, l)| {
            if *l == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                l - (d - best) / beta
            }
        })
        .collect();
    WeightVector::from_log_unnormalized(log_unnorm)
}

/// `-beta * log sum_j pi_0(j) exp(-loss_j / beta)`, the minimum of the Gibbs
/// objective. For `beta = inf` this is the prior-averaged loss.
pub(crate) fn gibbs_free_energy(losses: &[f64], prior: &WeightVector, beta: f64) -> f64 {
    if beta == f64::INFINITY {
        return losses
            .iter()
            .zip(prior.weights())
            .filter(|(_, w)| **w > 0.0)
            .map(|(d, w)| d * w)
            .sum();
    }
    let best = losses
        .iter()
        .zip(prior.log_weights())
        .filter(|(_, l)| **l > f64::NEG_INFINITY)
        .map(|(d, _)| *d)
        .fold(f64::INFINITY, f64::min);
    let terms: Vec<f64> = losses
        .iter()
        .zip(prior.log_weights())
        .map(|(d, l)| l - (d - best) / beta)
        .collect();
    best - beta * log_sum_exp(&terms)
}

pub fn posterior_weights(
    y: &SignalVector,
    dict: &Dictionary,
    prior: &WeightVector,
    beta: f64,
) -> Result<PosteriorWeights> {
    check_beta(beta)?;
    dict.check_signal("observation", y)?;
    dict.check_weights("prior", prior)?;
    let weights = gibbs_weights(&distances(y, dict), prior, beta)?;
    Ok(PosteriorWeights { weights, beta })
}

/// `sum_j w_j theta_j`, clipped coordinate-wise to the atoms' range so the
/// convex-hull property survives rounding.
pub fn aggregate(dict: &Dictionary, w: &WeightVector) -> Result<SignalVector> {
    dict.check_weights("weights", w)?;
    let n = dict.dim();
    let mut out = vec![0.0; n];
    for (atom, &wj) in dict.atoms().iter().zip(w.weights()) {
        if wj == 0.0 {
            continue;
        }
        for (o, x) in out.iter_mut().zip(atom.as_slice()) {
            *o += wj * x;
        }
    }
    for (i, o) in out.iter_mut().enumerate() {
        let (lo, hi) = dict
            .atoms()
            .iter()
            .map(|a| a.as_slice()[i])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        *o = o.clamp(lo, hi);
    }
    Ok(SignalVector::from_finite(out))
}

/// `Var_w(theta) = sum_j w_j ||theta_j||^2 - ||sum_j w_j theta_j||^2`,
/// evaluated in the centered form `sum_j w_j ||theta_j - mean||^2`.
pub fn posterior_variance(dict: &Dictionary, w: &WeightVector) -> Result<f64> {
    let mean = aggregate(dict, w)?;
    let v: f64 = dict
        .atoms()
        .iter()
        .zip(w.weights())
        .filter(|(_, wj)| **wj > 0.0)
        .map(|(a, wj)| wj * sq_dist(a.as_slice(), mean.as_slice()))
        .sum();
    Ok(v.max(0.0))
}

/// `KL(p || q) = sum_j p_j log(p_j / q_j)` with `0 log 0 = 0`; `+inf` when
/// `p` charges an atom that `q` does not.
pub fn kl_divergence(p: &WeightVector, q: &WeightVector) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            what: "kl_divergence",
            expected: p.len(),
            found: q.len(),
        });
    }
    let mut kl = 0.0;
    for ((pj, lp), lq) in p.weights().iter().zip(p.log_weights()).zip(q.log_weights()) {
        if *pj == 0.0 {
            continue;
        }
        if *lq == f64::NEG_INFINITY {
            return Ok(f64::INFINITY);
        }
        kl += pj * (lp - lq);
    }
    Ok(kl.max(0.0))
}

/// `sum_j w_j ||y - theta_j||^2 + beta * KL(w || prior)`.
pub fn gibbs_objective(
    w: &WeightVector,
    y: &SignalVector,
    dict: &Dictionary,
    prior: &WeightVector,
    beta: f64,
) -> Result<f64> {
    check_beta(beta)?;
    dict.check_signal("observation", y)?;
    dict.check_weights("weights", w)?;
    dict.check_weights("prior", prior)?;
    let fit: f64 = distances(y, dict)
        .iter()
        .zip(w.weights())
        .filter(|(_, wj)| **wj > 0.0)
        .map(|(d, wj)| d * wj)
        .sum();
    let kl = kl_divergence(w, prior)?;
    // 0 * inf = 0
    let penalty = if kl == 0.0 { 0.0 } else { beta * kl };
    Ok(fit + penalty)
}

/// Posterior weights followed by aggregation.
pub fn ewa_estimate(
    y: &SignalVector,
    dict: &Dictionary,
    prior: &WeightVector,
    beta: f64,
) -> Result<(SignalVector, PosteriorWeights)> {
    let post = posterior_weights(y, dict, prior, beta)?;
    let estimate = aggregate(dict, &post.weights)?;
    Ok((estimate, post))
}

/// Source of i.i.d. draws from a prior on `R^n`.
pub trait PriorSampler {
    fn dim(&self) -> usize;
    fn draw(&self, rng: &mut dyn RngCore) -> SignalVector;
}

/// Degenerate prior at one point.
#[derive(Debug, Clone)]
pub struct PointMassPrior(pub SignalVector);

impl PriorSampler for PointMassPrior {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn draw(&self, _rng: &mut dyn RngCore) -> SignalVector {
        self.0.clone()
    }
}

/// Prior charging dictionary atom `j` with probability `weights[j]`.
#[derive(Debug, Clone)]
pub struct DictionaryPrior {
    dict: Dictionary,
    cumulative: Vec<f64>,
}

impl DictionaryPrior {
    pub fn new(dict: Dictionary, weights: &WeightVector) -> Result<Self> {
        dict.check_weights("prior", weights)?;
        let mut acc = 0.0;
        let cumulative = weights
            .weights()
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self { dict, cumulative })
    }
}

impl PriorSampler for DictionaryPrior {
    fn dim(&self) -> usize {
        self.dict.dim()
    }

    fn draw(&self, rng: &mut dyn RngCore) -> SignalVector {
        let u: f64 = rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1];
        let j = self
            .cumulative
            .iter()
            .position(|c| u < *c)
            .unwrap_or(self.cumulative.len() - 1);
        self.dict.atom(j).clone()
    }
}

/// Uniform prior on the box `prod_i [lower_i, upper_i]`.
#[derive(Debug, Clone)]
pub struct BoxPrior {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxPrior {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::invalid("box bounds must be nonempty and of equal length"));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l.is_finite() && u.is_finite() && l <= u))
        {
            return Err(Error::invalid("box bounds must be finite with lower <= upper"));
        }
        Ok(Self { lower, upper })
    }
}

impl PriorSampler for BoxPrior {
    fn dim(&self) -> usize {
        self.lower.len()
    }

    fn draw(&self, rng: &mut dyn RngCore) -> SignalVector {
        let v = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| l + (u - l) * rng.random::<f64>())
            .collect();
        SignalVector::from_finite(v)
    }
}

/// Result of the sampled continuous-prior estimator.
#[derive(Debug, Clone)]
pub struct SampledEstimate {
    pub estimate: SignalVector,
    /// The prior draws, used as a dictionary with uniform prior.
    pub draws: Dictionary,
    pub weights: WeightVector,
}

/// Self-normalized estimate of the continuous-prior aggregate: draw `s`
/// points from the prior, then run [`ewa_estimate`] on them with a uniform
/// prior.
pub fn sampled_prior_ewa(
    y: &SignalVector,
    prior_sampler: &dyn PriorSampler,
    beta: f64,
    s: usize,
    rng: &mut dyn RngCore,
) -> Result<SignalVector> {
    sampled_prior_ewa_detailed(y, prior_sampler, beta, s, rng).map(|r| r.estimate)
}

pub fn sampled_prior_ewa_detailed(
    y: &SignalVector,
    prior_sampler: &dyn PriorSampler,
    beta: f64,
    s: usize,
    rng: &mut dyn RngCore,
) -> Result<SampledEstimate> {
    if s == 0 {
        return Err(Error::invalid("prior sample count must be at least 1"));
    }
    check_beta(beta)?;
    if prior_sampler.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            what: "prior sampler",
            expected: y.dim(),
            found: prior_sampler.dim(),
        });
    }
    let draws = Dictionary::new((0..s).map(|_| prior_sampler.draw(rng)).collect())?;
    let uniform = WeightVector::uniform(s)?;
    let (estimate, post) = ewa_estimate(y, &draws, &uniform, beta)?;
    Ok(SampledEstimate {
        estimate,
        draws,
        weights: post.weights,
    })
}

/// Outcome of [`dv_minimality_test`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvReport {
    pub trials: usize,
    pub objective_at_posterior: f64,
    /// `max_w (G(w_post) - G(w))`; positive values are violations.
    pub worst_violation: f64,
    pub passed: bool,
}

fn normalized_from_positive(values: &[f64]) -> Option<WeightVector> {
    let logs = values
        .iter()
        .map(|v| if *v > 0.0 { v.ln() } else { f64::NEG_INFINITY })
        .collect();
    WeightVector::from_log_unnormalized(logs).ok()
}

fn perturbation<R: Rng + ?Sized>(kind: usize, w_star: &WeightVector, prior: &WeightVector, rng: &mut R) -> Option<WeightVector> {
    let m = w_star.len();
    match kind {
        // Dirichlet centred on w_star with a random concentration.
        0 => {
            let concentration = 10f64.powf(rng.random_range(0.5..6.0));
            let draws: Vec<f64> = w_star
                .weights()
                .iter()
                .map(|&w| {
                    if w > 0.0 {
                        Gamma::new((concentration * w).max(1e-3), 1.0)
                            .map(|g| g.sample(rng))
                            .unwrap_or(0.0)
                    } else {
                        0.0
                    }
                })
                .collect();
            normalized_from_positive(&draws)
        }
        // Multiplicative log-normal jitter at a random scale.
        1 => {
            let scale = 10f64.powf(rng.random_range(-6.0..0.5));
            let logs = w_star
                .log_weights()
                .iter()
                .map(|l| {
                    let z: f64 = rng.sample(StandardNormal);
                    l + scale * z
                })
                .collect();
            WeightVector::from_log_unnormalized(logs).ok()
        }
        // Uniform point of the simplex face carried by the prior.
        2 => {
            let draws: Vec<f64> = prior
                .weights()
                .iter()
                .map(|&p| {
                    if p > 0.0 {
                        let u: f64 = rng.sample(rand::distr::Open01);
                        -u.ln()
                    } else {
                        0.0
                    }
                })
                .collect();
            normalized_from_positive(&draws)
        }
        // Mixture of w_star with a random vertex of the prior's face.
        _ => {
            let support: Vec<usize> = (0..m).filter(|&j| prior.get(j) > 0.0).collect();
            let j = support[rng.random_range(0..support.len())];
            let t: f64 = rng.random();
            let mixed: Vec<f64> = w_star
                .weights()
                .iter()
                .enumerate()
                .map(|(i, &w)| (1.0 - t) * w + if i == j { t } else { 0.0 })
                .collect();
            normalized_from_positive(&mixed)
        }
    }
}

/// Checks that the posterior weights minimize the Gibbs objective against
/// `trials` random simplex points (jitters around the posterior, uniform
/// points, and segments toward vertices).
pub fn dv_minimality_test<R: Rng + ?Sized>(
    y: &SignalVector,
    dict: &Dictionary,
    prior: &WeightVector,
    beta: f64,
    trials: usize,
    rng: &mut R,
) -> Result<DvReport> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let post = posterior_weights(y, dict, prior, beta)?;
    let best = gibbs_objective(&post.weights, y, dict, prior, beta)?;
    let mut worst = f64::NEG_INFINITY;
    let mut done = 0;
    let mut attempt = 0usize;
    while done < trials {
        let kind = attempt % 4;
        attempt += 1;
        let Some(w) = perturbation(kind, &post.weights, prior, rng) else {
            continue;
        };
        let value = gibbs_objective(&w, y, dict, prior, beta)?;
        worst = worst.max(best - value);
        done += 1;
    }
    Ok(DvReport {
        trials,
        objective_at_posterior: best,
        worst_violation: worst,
        passed: worst <= DV_TOLERANCE,
    })
}
