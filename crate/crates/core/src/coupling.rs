//! Noise couplings.
//!
//! For `alpha` in `(0, 1]` each family admits a random vector `zeta` with
//! `E[zeta | F] = 0` and `xi + zeta` distributed as `(1 + alpha) xi`, where
//! `F` is generated by the latent record of the noise draw. This module
//! builds those `zeta`, enumerates their conditional laws for the discrete
//! families, and checks both properties exactly or statistically.
//!
//! `alpha = 0` is accepted as a degenerate value and yields `zeta = 0`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SignalVector;
use crate::noise::{exact_law, sample_laplace, DiscreteLaw, ExactLaw, Family, Latent, NoiseModel};
use crate::rng::{stream_rng, streams};
use crate::stats::{empirical_cf, ks_two_sample, linspace};

/// Threshold on atom-probability and conditional-mean errors for exact checks.
pub const EXACT_TOLERANCE: f64 = 1e-12;
/// Significance level of the two-sample KS check.
pub const KS_SIGNIFICANCE: f64 = 0.001;
/// Number of grid points of the characteristic-function check.
pub const CF_GRID_POINTS: usize = 64;
/// Half-width of the CF grid in units of `1 / scale`.
pub const CF_GRID_HALF_WIDTH: f64 = 5.0;

const CHUNK: usize = 1 << 16;

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha must lie in (0, 1], got {alpha}")))
    }
}

/// The two outcomes of a binary coupling given the current noise value:
/// keep the direction (`stay`) or jump to the opposite side (`jump`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branches {
    pub stay_value: f64,
    pub stay_probability: f64,
    pub jump_value: f64,
    pub jump_probability: f64,
}

impl Branches {
    pub fn law(&self) -> DiscreteLaw {
        DiscreteLaw::merged(vec![
            (self.stay_value, self.stay_probability),
            (self.jump_value, self.jump_probability),
        ])
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        if u < self.stay_probability {
            self.stay_value
        } else {
            self.jump_value
        }
    }
}

fn on_support(x: f64, support: [f64; 2]) -> bool {
    support.iter().any(|s| (x - s).abs() <= 1e-12 * s.abs().max(1.0))
}

/// Centered Bernoulli coupling: `zeta = alpha xi` with probability
/// `(1 + alpha - alpha|xi|) / (1 + alpha)`, otherwise
/// `zeta = -sgn(xi)(1 + alpha - alpha|xi|)`.
pub fn bernoulli_branches(xi: f64, alpha: f64) -> Branches {
    let ax = alpha * xi.abs();
    let spread = 1.0 + alpha - ax;
    Branches {
        stay_value: alpha * xi,
        stay_probability: spread / (1.0 + alpha),
        jump_value: -xi.signum() * spread,
        jump_probability: ax / (1.0 + alpha),
    }
}

/// Binary coupling for `B(a, b)`. From `eta = a` the variable stays at
/// `alpha a` with probability `((1+alpha) b + a) / ((1+alpha)(a+b))` and
/// otherwise jumps to `-(1+alpha) b - a`; from `eta = -b` it stays at
/// `-alpha b` with probability `((1+alpha) a + b) / ((1+alpha)(a+b))` and
/// otherwise jumps to `(1+alpha) a + b`.
pub fn binary_branches(a: f64, b: f64, eta: f64, alpha: f64) -> Branches {
    let s = (1.0 + alpha) * (a + b);
    if eta == a {
        let stay = ((1.0 + alpha) * b + a) / s;
        Branches {
            stay_value: alpha * a,
            stay_probability: stay,
            jump_value: -(1.0 + alpha) * b - a,
            jump_probability: alpha * a / s,
        }
    } else {
        let stay = ((1.0 + alpha) * a + b) / s;
        Branches {
            stay_value: -alpha * b,
            stay_probability: stay,
            jump_value: (1.0 + alpha) * a + b,
            jump_probability: alpha * b / s,
        }
    }
}

pub fn couple_bernoulli<R: Rng + ?Sized>(xi: f64, rho: f64, alpha: f64, rng: &mut R) -> Result<f64> {
    check_alpha(alpha)?;
    if !on_support(xi, [1.0 - rho, -rho]) {
        return Err(Error::invalid(format!(
            "xi = {xi} is not in the support {{{}, {}}}",
            1.0 - rho,
            -rho
        )));
    }
    Ok(bernoulli_branches(xi, alpha).sample(rng))
}

pub fn couple_binary<R: Rng + ?Sized>(a: f64, b: f64, eta: f64, alpha: f64, rng: &mut R) -> Result<f64> {
    check_alpha(alpha)?;
    if !(a >= 0.0 && b >= 0.0 && a + b > 0.0) {
        return Err(Error::invalid("binary coupling needs a, b >= 0 and a + b > 0"));
    }
    if eta != a && eta != -b {
        return Err(Error::invalid(format!("eta = {eta} is not in {{{a}, {}}}", -b)));
    }
    Ok(binary_branches(a, b, eta, alpha).sample(rng))
}

/// Independent `N(0, (2 alpha + alpha^2) sigma^2)` draw.
pub fn couple_gaussian<R: Rng + ?Sized>(sigma: f64, alpha: f64, rng: &mut R) -> Result<f64> {
    check_alpha(alpha)?;
    let z: f64 = rng.sample(StandardNormal);
    Ok(sigma * (2.0 * alpha + alpha * alpha).sqrt() * z)
}

/// `a * sum_j zeta_bar_j`, one Bernoulli coupling per summand.
pub fn couple_binomial<R: Rng + ?Sized>(
    etas: &[f64],
    a: f64,
    rho: f64,
    alpha: f64,
    rng: &mut R,
) -> Result<f64> {
    let mut total = 0.0;
    for &eta in etas {
        total += couple_bernoulli(eta, rho, alpha, rng)?;
    }
    Ok(a * total)
}

/// `0` with probability `1/(1+alpha)^2`, otherwise an independent
/// `Laplace((1+alpha) mu)` draw.
pub fn couple_laplace<R: Rng + ?Sized>(mu: f64, alpha: f64, rng: &mut R) -> Result<f64> {
    check_alpha(alpha)?;
    let keep_zero = 1.0 / ((1.0 + alpha) * (1.0 + alpha));
    let u: f64 = rng.random();
    if u < keep_zero {
        Ok(0.0)
    } else {
        Ok(sample_laplace((1.0 + alpha) * mu, rng))
    }
}

/// `zeta_i` given the latent record of `xi_i`.
pub fn couple_coordinate<R: Rng + ?Sized>(
    model: &NoiseModel,
    i: usize,
    latent: &Latent,
    alpha: f64,
    rng: &mut R,
) -> Result<f64> {
    match (model, latent) {
        (NoiseModel::CenteredBernoulli { rho }, Latent::Value(x)) => couple_bernoulli(*x, rho[i], alpha, rng),
        (NoiseModel::Gaussian { sigma }, Latent::Value(_)) => couple_gaussian(sigma[i], alpha, rng),
        (NoiseModel::Laplace { mu }, Latent::Value(_)) => couple_laplace(mu[i], alpha, rng),
        (NoiseModel::CenteredBinomial { a, rho, .. }, Latent::Summands(etas)) => {
            couple_binomial(etas, *a, rho[i], alpha, rng)
        }
        (NoiseModel::BoundedBinaryMixture { .. }, Latent::Binary { a, b, eta }) => {
            couple_binary(*a, *b, *eta, alpha, rng)
        }
        _ => Err(Error::invalid("latent record does not match the noise family")),
    }
}

/// A joint draw of `(xi, zeta)` with the record that generates `F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingDraw {
    pub xi: SignalVector,
    pub zeta: SignalVector,
    pub alpha: f64,
    pub conditioning_record: Vec<Latent>,
}

pub fn draw_coupling<R: Rng + ?Sized>(model: &NoiseModel, alpha: f64, rng: &mut R) -> Result<CouplingDraw> {
    check_alpha(alpha)?;
    let n = model.dim();
    let mut xi = Vec::with_capacity(n);
    let mut zeta = Vec::with_capacity(n);
    let mut record = Vec::with_capacity(n);
    for i in 0..n {
        let (x, latent) = model.sample_coordinate(i, rng);
        zeta.push(couple_coordinate(model, i, &latent, alpha, rng)?);
        xi.push(x);
        record.push(latent);
    }
    Ok(CouplingDraw {
        xi: SignalVector::new(xi)?,
        zeta: SignalVector::new(zeta)?,
        alpha,
        conditioning_record: record,
    })
}

/// One value of the conditioning record with its probability, the noise value
/// it produces, and the conditional law of `zeta` given it.
#[derive(Debug, Clone)]
pub struct ConditionalBranch {
    pub probability: f64,
    pub xi: f64,
    pub record: Latent,
    pub zeta: DiscreteLaw,
}

/// Enumerates the conditioning records of coordinate `i` of a discrete
/// family. Binomial records are grouped by the number of positive summands;
/// the conditional law of `zeta` only depends on that count.
pub fn conditional_zeta_laws(model: &NoiseModel, i: usize, alpha: f64) -> Result<Vec<ConditionalBranch>> {
    check_alpha(alpha)?;
    match model {
        NoiseModel::CenteredBernoulli { rho } => {
            let r = rho[i];
            Ok([(1.0 - r, r), (-r, 1.0 - r)]
                .into_iter()
                .map(|(xi, p)| ConditionalBranch {
                    probability: p,
                    xi,
                    record: Latent::Value(xi),
                    zeta: bernoulli_branches(xi, alpha).law(),
                })
                .collect())
        }
        NoiseModel::BoundedBinaryMixture { mixing, .. } => {
            let mut out = Vec::new();
            for m in &mixing[i] {
                let (a, b) = (m.a, m.b);
                for (eta, p) in [(a, b / (a + b)), (-b, a / (a + b))] {
                    out.push(ConditionalBranch {
                        probability: m.weight * p,
                        xi: eta,
                        record: Latent::Binary { a, b, eta },
                        zeta: binary_branches(a, b, eta, alpha).law(),
                    });
                }
            }
            Ok(out)
        }
        NoiseModel::CenteredBinomial { a, k, rho } => {
            let r = rho[i];
            let up = bernoulli_branches(1.0 - r, alpha).law();
            let down = bernoulli_branches(-r, alpha).law();
            let mut out = Vec::new();
            for c in 0..=*k {
                let mut law = DiscreteLaw::point(0.0);
                for _ in 0..c {
                    law = law.convolve(&up);
                }
                for _ in c..*k {
                    law = law.convolve(&down);
                }
                let coeff = (0..c.min(k - c)).fold(1.0, |acc, j| {
                    acc * f64::from(k - j) / f64::from(j + 1)
                });
                let etas: Vec<f64> = (0..*k).map(|j| if j < c { 1.0 - r } else { -r }).collect();
                out.push(ConditionalBranch {
                    probability: coeff * r.powi(c as i32) * (1.0 - r).powi((k - c) as i32),
                    xi: a * etas.iter().sum::<f64>(),
                    record: Latent::Summands(etas),
                    zeta: law.scaled(*a),
                });
            }
            Ok(out)
        }
        NoiseModel::Gaussian { .. } | NoiseModel::Laplace { .. } => {
            Err(Error::Unsupported("exact enumeration".into()))
        }
    }
}

/// Verification strategy for the coupling identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Ks,
    CfGrid,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Ks => "ks",
            Method::CfGrid => "cf_grid",
        }
    }

    /// Exact for discrete families, KS for Gaussian, CF grid for Laplace.
    pub fn default_for(family: Family) -> Method {
        match family {
            Family::Gaussian => Method::Ks,
            Family::Laplace => Method::CfGrid,
            _ => Method::Exact,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Method::Exact),
            "ks" => Ok(Method::Ks),
            "cf_grid" => Ok(Method::CfGrid),
            other => Err(Error::invalid(format!(
                "method must be one of exact, ks, cf_grid (got {other:?})"
            ))),
        }
    }
}

/// Outcome of [`verify_coupling`]. `statistic` is the max atom-probability
/// error (exact), the KS distance (ks) or the max CF modulus error (cf_grid);
/// the verdict passes when every check is under its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub family: Family,
    pub alpha: f64,
    pub method: Method,
    pub statistic: f64,
    pub threshold: f64,
    /// Max `|E[zeta | F]|` over enumerated records (exact method only).
    pub mean_zero_check: Option<f64>,
    pub mean_zero_threshold: Option<f64>,
    pub passed: bool,
    pub sample_size: Option<usize>,
    pub enumerated: bool,
    /// Number of distinct coordinate laws that were checked.
    pub coordinates_checked: usize,
}

/// Checks `xi + zeta =d (1 + alpha) xi` (and `E[zeta | F] = 0` for the exact
/// method) on every distinct coordinate law of `model`.
///
/// Statistical methods draw `sample_size` values per distinct coordinate from
/// streams derived from `seed`.
pub fn verify_coupling(
    model: &NoiseModel,
    alpha: f64,
    method: Method,
    sample_size: usize,
    seed: u64,
) -> Result<CouplingReport> {
    model.validate()?;
    check_alpha(alpha)?;
    let family = model.family();
    let coords = model.distinct_coordinates();
    match method {
        Method::Exact => {
            if !family.is_discrete() {
                return Err(Error::invalid(format!(
                    "method exact requires a discrete family, got {family}"
                )));
            }
            let mut atom_err = 0.0f64;
            let mut mean_err = 0.0f64;
            for &i in &coords {
                let (a, m) = exact_coupling_errors(model, i, alpha)?;
                atom_err = atom_err.max(a);
                mean_err = mean_err.max(m);
            }
            Ok(CouplingReport {
                family,
                alpha,
                method,
                statistic: atom_err,
                threshold: EXACT_TOLERANCE,
                mean_zero_check: Some(mean_err),
                mean_zero_threshold: Some(EXACT_TOLERANCE),
                passed: atom_err <= EXACT_TOLERANCE && mean_err <= EXACT_TOLERANCE,
                sample_size: None,
                enumerated: true,
                coordinates_checked: coords.len(),
            })
        }
        Method::Ks => {
            check_sample_size(sample_size)?;
            let mut worst = 0.0f64;
            let mut threshold = 0.0;
            let mut passed = true;
            for (g, &i) in coords.iter().enumerate() {
                let mut coupled = coupled_samples(model, i, alpha, sample_size, seed, g as u64)?;
                let mut reference = reference_samples(model, i, alpha, sample_size, seed, g as u64);
                let ks = ks_two_sample(&mut coupled, &mut reference, KS_SIGNIFICANCE);
                threshold = ks.critical_value;
                worst = worst.max(ks.statistic);
                passed &= ks.p_value > KS_SIGNIFICANCE;
            }
            Ok(CouplingReport {
                family,
                alpha,
                method,
                statistic: worst,
                threshold,
                mean_zero_check: None,
                mean_zero_threshold: None,
                passed,
                sample_size: Some(sample_size),
                enumerated: false,
                coordinates_checked: coords.len(),
            })
        }
        Method::CfGrid => {
            check_sample_size(sample_size)?;
            let threshold = 5.0 / (sample_size as f64).sqrt();
            let mut worst = 0.0f64;
            for (g, &i) in coords.iter().enumerate() {
                let samples = coupled_samples(model, i, alpha, sample_size, seed, g as u64)?;
                let scale = model.coordinate_scale(i);
                let grid = linspace(-CF_GRID_HALF_WIDTH / scale, CF_GRID_HALF_WIDTH / scale, CF_GRID_POINTS);
                let err = grid
                    .par_iter()
                    .map(|&t| {
                        let (re, im) = empirical_cf(&samples, t);
                        let (tr, ti) = scaled_cf(model, i, 1.0 + alpha, t);
                        ((re - tr).powi(2) + (im - ti).powi(2)).sqrt()
                    })
                    .reduce(|| 0.0, f64::max);
                worst = worst.max(err);
            }
            Ok(CouplingReport {
                family,
                alpha,
                method,
                statistic: worst,
                threshold,
                mean_zero_check: None,
                mean_zero_threshold: None,
                passed: worst < threshold,
                sample_size: Some(sample_size),
                enumerated: false,
                coordinates_checked: coords.len(),
            })
        }
    }
}

fn check_sample_size(n: usize) -> Result<()> {
    if n < 2 {
        Err(Error::invalid("sample_size must be at least 2"))
    } else {
        Ok(())
    }
}

/// `(max atom-probability error, max |E[zeta | record]|)` for coordinate `i`.
pub fn exact_coupling_errors(model: &NoiseModel, i: usize, alpha: f64) -> Result<(f64, f64)> {
    let branches = conditional_zeta_laws(model, i, alpha)?;
    let shifted: Vec<(f64, DiscreteLaw)> = branches
        .iter()
        .map(|b| (b.probability, b.zeta.shifted(b.xi)))
        .collect();
    let marginal = DiscreteLaw::mixture(shifted.iter().map(|(p, l)| (*p, l)));
    let target = match exact_law(model, i) {
        ExactLaw::Discrete(l) => l.scaled(1.0 + alpha),
        ExactLaw::Continuous => return Err(Error::Unsupported("exact enumeration".into())),
    };
    let mean_err = branches
        .iter()
        .map(|b| b.zeta.mean().abs())
        .fold(0.0, f64::max);
    Ok((marginal.max_probability_error(&target), mean_err))
}

/// Characteristic function of `c * xi_i` at `t`.
fn scaled_cf(model: &NoiseModel, i: usize, c: f64, t: f64) -> (f64, f64) {
    match model {
        NoiseModel::Gaussian { sigma } => {
            let s = c * sigma[i] * t;
            ((-0.5 * s * s).exp(), 0.0)
        }
        NoiseModel::Laplace { mu } => {
            let s = c * mu[i] * t;
            (1.0 / (1.0 + s * s), 0.0)
        }
        _ => match exact_law(model, i) {
            ExactLaw::Discrete(l) => l.characteristic_function(c * t),
            ExactLaw::Continuous => unreachable!(),
        },
    }
}

/// `n` draws produced by `f`, generated in fixed-size chunks with one stream
/// per chunk so the output is independent of the worker count.
pub(crate) fn chunked_samples<F>(n: usize, seed: u64, base: u64, f: F) -> Result<Vec<f64>>
where
    F: Fn(&mut ChaCha8Rng) -> Result<f64> + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, base + c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len).map(|_| f(&mut rng)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.concat())
}

fn coupled_samples(model: &NoiseModel, i: usize, alpha: f64, n: usize, seed: u64, group: u64) -> Result<Vec<f64>> {
    chunked_samples(n, seed, streams::COUPLED + (group << 24), |rng| {
        let (x, latent) = model.sample_coordinate(i, rng);
        Ok(x + couple_coordinate(model, i, &latent, alpha, rng)?)
    })
}

fn reference_samples(model: &NoiseModel, i: usize, alpha: f64, n: usize, seed: u64, group: u64) -> Vec<f64> {
    chunked_samples(n, seed, streams::REFERENCE + (group << 24), |rng| {
        Ok((1.0 + alpha) * model.sample_coordinate(i, rng).0)
    })
    .expect("reference sampling is infallible")
}

/// Draws of `zeta_i` alone (continuous families: independent of `xi`).
pub fn zeta_samples(model: &NoiseModel, i: usize, alpha: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    chunked_samples(n, seed, streams::MGF, |rng| {
        let (_, latent) = model.sample_coordinate(i, rng);
        couple_coordinate(model, i, &latent, alpha, rng)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::MixingAtom;

    fn law(atoms: &[(f64, f64)]) -> DiscreteLaw {
        DiscreteLaw::new(atoms.to_vec()).unwrap()
    }

    #[test]
    fn bernoulli_branch_example() {
        let br = bernoulli_branches(0.5, 1.0);
        assert_eq!(br.stay_value, 0.5);
        assert_eq!(br.stay_probability, 0.75);
        assert_eq!(br.jump_value, -1.5);
        assert_eq!(br.jump_probability, 0.25);
        assert_eq!(0.5 * 0.75 - 1.5 * 0.25, 0.0);
    }

    #[test]
    fn bernoulli_small_alpha_limit() {
        for &alpha in &[1e-3, 1e-6, 1e-9] {
            let br = bernoulli_branches(0.7, alpha);
            assert!((br.stay_probability - 1.0).abs() < 2.0 * alpha);
            assert!(br.stay_value.abs() < alpha);
        }
        let br = bernoulli_branches(0.7, 0.0);
        assert_eq!(br.law().atoms(), &[(0.0, 1.0)]);
    }

    #[test]
    fn bernoulli_four_branch_enumeration() {
        // rho = 0.3, alpha = 0.5: brute-force over (xi, zeta) branches.
        let (rho, alpha) = (0.3, 0.5);
        let mut atoms = Vec::new();
        for (xi, p) in [(1.0 - rho, rho), (-rho, 1.0 - rho)] {
            let br = bernoulli_branches(xi, alpha);
            atoms.push((xi + br.stay_value, p * br.stay_probability));
            atoms.push((xi + br.jump_value, p * br.jump_probability));
        }
        let marginal = DiscreteLaw::new(atoms).unwrap();
        let expected = law(&[(1.05, 0.3), (-0.45, 0.7)]);
        assert!(marginal.max_probability_error(&expected) < 1e-15);
    }

    #[test]
    fn bernoulli_support_interval_has_length_one_plus_alpha() {
        for r in 1..10 {
            let rho = f64::from(r) / 10.0;
            for &alpha in &[0.1, 0.25, 0.5, 1.0] {
                for xi in [1.0 - rho, -rho] {
                    let br = bernoulli_branches(xi, alpha);
                    let width = (br.stay_value - br.jump_value).abs();
                    assert!(width <= 1.0 + alpha + 1e-15);
                    assert!(br.stay_value.abs() <= 1.0 + alpha && br.jump_value.abs() <= 1.0 + alpha);
                }
            }
        }
    }

    #[test]
    fn binary_examples() {
        let br = binary_branches(1.0, 1.0, 1.0, 1.0);
        assert_eq!((br.stay_value, br.stay_probability), (1.0, 0.75));
        assert_eq!((br.jump_value, br.jump_probability), (-3.0, 0.25));
        assert_eq!(br.stay_value * br.stay_probability + br.jump_value * br.jump_probability, 0.0);

        // a = 2, b = 1, alpha = 0.5: law of eta + zeta is law of 1.5 eta.
        let (a, b, alpha) = (2.0, 1.0, 0.5);
        let mut atoms = Vec::new();
        for (eta, p) in [(a, b / (a + b)), (-b, a / (a + b))] {
            let br = binary_branches(a, b, eta, alpha);
            atoms.push((eta + br.stay_value, p * br.stay_probability));
            atoms.push((eta + br.jump_value, p * br.jump_probability));
        }
        let marginal = DiscreteLaw::new(atoms).unwrap();
        assert!(marginal.max_probability_error(&law(&[(3.0, 1.0 / 3.0), (-1.5, 2.0 / 3.0)])) < 1e-15);
    }

    #[test]
    fn binary_reproduces_bernoulli_branch_for_branch() {
        for r in 1..10 {
            let rho = f64::from(r) / 10.0;
            for &alpha in &[0.1, 0.25, 0.5, 1.0] {
                for xi in [1.0 - rho, -rho] {
                    let x = bernoulli_branches(xi, alpha);
                    let y = binary_branches(1.0 - rho, rho, xi, alpha);
                    assert!((x.stay_value - y.stay_value).abs() < 1e-15);
                    assert!((x.jump_value - y.jump_value).abs() < 1e-15);
                    assert!((x.stay_probability - y.stay_probability).abs() < 1e-15);
                    assert!((x.jump_probability - y.jump_probability).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn couple_rejects_off_support() {
        let mut rng = stream_rng(0, 0);
        assert!(couple_bernoulli(0.5, 0.3, 0.5, &mut rng).is_err());
        assert!(couple_bernoulli(0.7, 0.3, 1.5, &mut rng).is_err());
        assert!(couple_binary(1.0, 2.0, 0.5, 0.5, &mut rng).is_err());
        assert!(couple_binomial(&[0.7, 0.1], 1.0, 0.3, 0.5, &mut rng).is_err());
        assert!(couple_bernoulli(0.7, 0.3, 0.5, &mut rng).is_ok());
    }

    #[test]
    fn binomial_k2_convolution_matches_scaled_law() {
        let model = NoiseModel::centered_binomial(1.0, 2, vec![0.5]).unwrap();
        let (atom_err, mean_err) = exact_coupling_errors(&model, 0, 1.0).unwrap();
        assert!(atom_err < 1e-15, "{atom_err}");
        assert!(mean_err < 1e-15);
        // Brute-force the 4 eta configurations and 4 zeta branch pairs.
        let mut atoms = Vec::new();
        for e1 in [0.5, -0.5] {
            for e2 in [0.5, -0.5] {
                let (b1, b2) = (bernoulli_branches(e1, 1.0), bernoulli_branches(e2, 1.0));
                for (z1, p1) in [(b1.stay_value, b1.stay_probability), (b1.jump_value, b1.jump_probability)] {
                    for (z2, p2) in [(b2.stay_value, b2.stay_probability), (b2.jump_value, b2.jump_probability)] {
                        atoms.push((e1 + e2 + z1 + z2, 0.25 * p1 * p2));
                    }
                }
            }
        }
        let brute = DiscreteLaw::new(atoms).unwrap();
        assert!(brute.max_probability_error(&law(&[(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)])) < 1e-15);
    }

    #[test]
    fn conditional_means_vanish_for_all_records() {
        let models = [
            NoiseModel::centered_bernoulli(vec![0.1, 0.9]).unwrap(),
            NoiseModel::centered_binomial(0.3, 4, vec![0.35]).unwrap(),
            NoiseModel::bounded_binary_mixture(
                2.0,
                1.0,
                vec![vec![
                    MixingAtom { a: 2.0, b: 1.0, weight: 0.5 },
                    MixingAtom { a: 0.0, b: 1.0, weight: 0.25 },
                    MixingAtom { a: 1.2, b: 0.4, weight: 0.25 },
                ]],
            )
            .unwrap(),
        ];
        for model in &models {
            for &alpha in &[0.1, 0.25, 0.5, 1.0] {
                for i in 0..model.dim() {
                    for b in conditional_zeta_laws(model, i, alpha).unwrap() {
                        assert!(b.zeta.mean().abs() < 1e-12, "{model:?} {b:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn exact_method_rejects_continuous_families() {
        let g = NoiseModel::iid_gaussian(2, 1.0).unwrap();
        assert!(verify_coupling(&g, 0.5, Method::Exact, 0, 1).is_err());
        assert!(conditional_zeta_laws(&g, 0, 0.5).is_err());
    }

    #[test]
    fn exact_report_for_bernoulli() {
        let m = NoiseModel::centered_bernoulli(vec![0.3]).unwrap();
        let r = verify_coupling(&m, 0.5, Method::Exact, 0, 0).unwrap();
        assert!(r.passed);
        assert!(r.statistic <= 1e-15);
        assert!(r.enumerated);
    }

    #[test]
    fn draw_coupling_is_consistent_with_records() {
        let mut rng = stream_rng(4, 0);
        let m = NoiseModel::centered_binomial(0.5, 3, vec![0.2, 0.6]).unwrap();
        let d = draw_coupling(&m, 0.25, &mut rng).unwrap();
        for (x, rec) in d.xi.as_slice().iter().zip(&d.conditioning_record) {
            match rec {
                Latent::Summands(etas) => assert!((x - 0.5 * etas.iter().sum::<f64>()).abs() < 1e-15),
                _ => panic!("binomial record expected"),
            }
        }
    }

    #[test]
    fn statistical_methods_pass_on_small_samples() {
        let g = NoiseModel::iid_gaussian(3, 1.0).unwrap();
        let r = verify_coupling(&g, 1.0, Method::Ks, 100_000, 3).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.coordinates_checked, 1);
        let l = NoiseModel::iid_laplace(2, 2.0).unwrap();
        let r = verify_coupling(&l, 0.5, Method::CfGrid, 100_000, 3).unwrap();
        assert!(r.passed, "{r:?}");
        let b = NoiseModel::centered_bernoulli(vec![0.3]).unwrap();
        let r = verify_coupling(&b, 0.5, Method::CfGrid, 100_000, 3).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn statistical_methods_detect_a_wrong_coupling() {
        // Feeding alpha = 1 samples to an alpha = 0.5 target must fail.
        let g = NoiseModel::iid_gaussian(1, 1.0).unwrap();
        let mut coupled = coupled_samples(&g, 0, 1.0, 50_000, 9, 0).unwrap();
        let mut reference = reference_samples(&g, 0, 0.5, 50_000, 9, 0);
        let ks = ks_two_sample(&mut coupled, &mut reference, KS_SIGNIFICANCE);
        assert!(ks.p_value < KS_SIGNIFICANCE);
    }

    #[test]
    fn sampling_is_worker_count_independent() {
        let g = NoiseModel::iid_laplace(1, 1.0).unwrap();
        let one = crate::rng::with_threads(Some(1), || zeta_samples(&g, 0, 0.5, 200_000, 5).unwrap());
        let four = crate::rng::with_threads(Some(4), || zeta_samples(&g, 0, 0.5, 200_000, 5).unwrap());
        assert_eq!(one, four);
    }
}
