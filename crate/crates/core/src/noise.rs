//! The five additive noise families, their samplers and, for the discrete
//! ones, their exact finite laws.

use std::fmt;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SignalVector;

/// Relative tolerance under which two support points are treated as the same
/// atom when laws are built by enumeration.
pub const VALUE_MERGE_TOLERANCE: f64 = 1e-10;

/// Family tag, also the JSON `"family"` name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    CenteredBernoulli,
    Gaussian,
    BoundedBinaryMixture,
    CenteredBinomial,
    Laplace,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::CenteredBernoulli,
        Family::Gaussian,
        Family::BoundedBinaryMixture,
        Family::CenteredBinomial,
        Family::Laplace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::CenteredBernoulli => "centered_bernoulli",
            Family::Gaussian => "gaussian",
            Family::BoundedBinaryMixture => "bounded_binary_mixture",
            Family::CenteredBinomial => "centered_binomial",
            Family::Laplace => "laplace",
        }
    }

    pub fn is_discrete(self) -> bool {
        !matches!(self, Family::Gaussian | Family::Laplace)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown noise family {s:?}")))
    }
}

/// One atom `(a, b)` of a finite mixing distribution, with its probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingAtom {
    pub a: f64,
    pub b: f64,
    pub weight: f64,
}

/// Independent-coordinate noise law. Parameters are per coordinate.
///
/// Deserialized values are not validated on their own; [`NoiseModel::validate`]
/// runs whenever a model enters an [`crate::ExperimentConfig`] or a
/// verification routine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum NoiseModel {
    /// `xi_i` is `1 - rho_i` with probability `rho_i`, else `-rho_i`.
    CenteredBernoulli { rho: Vec<f64> },
    Gaussian { sigma: Vec<f64> },
    /// `xi_i` mixes the binary laws `B(a, b)` (value `a` w.p. `b/(a+b)`,
    /// value `-b` w.p. `a/(a+b)`) over a finite mixing list per coordinate.
    BoundedBinaryMixture {
        a_max: f64,
        b_max: f64,
        mixing: Vec<Vec<MixingAtom>>,
    },
    /// `a * (Binomial(k, rho_i) - k rho_i)`.
    CenteredBinomial { a: f64, k: u32, rho: Vec<f64> },
    /// Density `exp(-|x|/mu_i) / (2 mu_i)`.
    Laplace { mu: Vec<f64> },
}

/// What a coordinate's draw was generated from. For the Bernoulli, Gaussian
/// and Laplace families this is the value itself; for the mixture it is the
/// mixing pair plus the binary outcome; for the binomial it is the list of
/// centered Bernoulli summands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Latent {
    Value(f64),
    Binary { a: f64, b: f64, eta: f64 },
    Summands(Vec<f64>),
}

impl NoiseModel {
    pub fn centered_bernoulli(rho: Vec<f64>) -> Result<Self> {
        let m = NoiseModel::CenteredBernoulli { rho };
        m.validate()?;
        Ok(m)
    }

    pub fn gaussian(sigma: Vec<f64>) -> Result<Self> {
        let m = NoiseModel::Gaussian { sigma };
        m.validate()?;
        Ok(m)
    }

    pub fn bounded_binary_mixture(
        a_max: f64,
        b_max: f64,
        mixing: Vec<Vec<MixingAtom>>,
    ) -> Result<Self> {
        let m = NoiseModel::BoundedBinaryMixture {
            a_max,
            b_max,
            mixing,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn centered_binomial(a: f64, k: u32, rho: Vec<f64>) -> Result<Self> {
        let m = NoiseModel::CenteredBinomial { a, k, rho };
        m.validate()?;
        Ok(m)
    }

    pub fn laplace(mu: Vec<f64>) -> Result<Self> {
        let m = NoiseModel::Laplace { mu };
        m.validate()?;
        Ok(m)
    }

    pub fn iid_gaussian(n: usize, sigma: f64) -> Result<Self> {
        Self::gaussian(vec![sigma; n])
    }

    pub fn iid_laplace(n: usize, mu: f64) -> Result<Self> {
        Self::laplace(vec![mu; n])
    }

    pub fn iid_centered_bernoulli(n: usize, rho: f64) -> Result<Self> {
        Self::centered_bernoulli(vec![rho; n])
    }

    pub fn iid_centered_binomial(n: usize, a: f64, k: u32, rho: f64) -> Result<Self> {
        Self::centered_binomial(a, k, vec![rho; n])
    }

    pub fn iid_bounded_binary_mixture(
        n: usize,
        a_max: f64,
        b_max: f64,
        mixing: Vec<MixingAtom>,
    ) -> Result<Self> {
        Self::bounded_binary_mixture(a_max, b_max, vec![mixing; n])
    }

    pub fn family(&self) -> Family {
        match self {
            NoiseModel::CenteredBernoulli { .. } => Family::CenteredBernoulli,
            NoiseModel::Gaussian { .. } => Family::Gaussian,
            NoiseModel::BoundedBinaryMixture { .. } => Family::BoundedBinaryMixture,
            NoiseModel::CenteredBinomial { .. } => Family::CenteredBinomial,
            NoiseModel::Laplace { .. } => Family::Laplace,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            NoiseModel::CenteredBernoulli { rho } => rho.len(),
            NoiseModel::Gaussian { sigma } => sigma.len(),
            NoiseModel::BoundedBinaryMixture { mixing, .. } => mixing.len(),
            NoiseModel::CenteredBinomial { rho, .. } => rho.len(),
            NoiseModel::Laplace { mu } => mu.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(Error::invalid("noise must have at least one coordinate"));
        }
        let open_unit = |name: &str, xs: &[f64]| -> Result<()> {
            for (i, &r) in xs.iter().enumerate() {
                if !(r > 0.0 && r < 1.0) {
                    return Err(Error::invalid(format!("{name}[{i}] must lie in (0, 1), got {r}")));
                }
            }
            Ok(())
        };
        let positive = |name: &str, xs: &[f64]| -> Result<()> {
            for (i, &s) in xs.iter().enumerate() {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::invalid(format!("{name}[{i}] must be positive, got {s}")));
                }
            }
            Ok(())
        };
        match self {
            NoiseModel::CenteredBernoulli { rho } => open_unit("rho", rho),
            NoiseModel::Gaussian { sigma } => positive("sigma", sigma),
            NoiseModel::Laplace { mu } => positive("mu", mu),
            NoiseModel::CenteredBinomial { a, k, rho } => {
                if !(*a > 0.0 && a.is_finite()) {
                    return Err(Error::invalid(format!("a must be positive, got {a}")));
                }
                if *k == 0 {
                    return Err(Error::invalid("k must be at least 1"));
                }
                open_unit("rho", rho)
            }
            NoiseModel::BoundedBinaryMixture {
                a_max,
                b_max,
                mixing,
            } => {
                if !(*a_max >= 0.0 && a_max.is_finite() && *b_max >= 0.0 && b_max.is_finite()) {
                    return Err(Error::invalid("a_max and b_max must be finite and nonnegative"));
                }
                for (i, atoms) in mixing.iter().enumerate() {
                    if atoms.is_empty() {
                        return Err(Error::invalid(format!("mixing[{i}] is empty")));
                    }
                    let mut total = 0.0;
                    for atom in atoms {
                        if !(atom.a >= 0.0 && atom.a <= *a_max && atom.b >= 0.0 && atom.b <= *b_max)
                        {
                            return Err(Error::invalid(format!(
                                "mixing[{i}] atom ({}, {}) lies outside [0, {a_max}] x [0, {b_max}]",
                                atom.a, atom.b
                            )));
                        }
                        if (atom.a + atom.b).is_nan() || atom.a + atom.b <= 0.0 {
                            return Err(Error::invalid(format!(
                                "mixing[{i}] atom needs a + b > 0"
                            )));
                        }
                        if !(atom.weight >= 0.0 && atom.weight.is_finite()) {
                            return Err(Error::invalid(format!(
                                "mixing[{i}] weights must be nonnegative"
                            )));
                        }
                        total += atom.weight;
                    }
                    if (total - 1.0).abs() > 1e-12 {
                        return Err(Error::invalid(format!(
                            "mixing[{i}] weights must sum to 1 (got {total})"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Natural scale of coordinate `i`: `sigma_i`, `mu_i`, or the standard
    /// deviation of the exact law for discrete families.
    pub fn coordinate_scale(&self, i: usize) -> f64 {
        match self {
            NoiseModel::Gaussian { sigma } => sigma[i],
            NoiseModel::Laplace { mu } => mu[i],
            _ => match exact_law(self, i) {
                ExactLaw::Discrete(law) => law_mean_and_variance(&law).1.sqrt(),
                ExactLaw::Continuous => unreachable!("discrete family"),
            },
        }
    }

    /// Bit-level key of coordinate `i`'s parameters; coordinates with equal
    /// keys are identically distributed.
    pub(crate) fn coordinate_key(&self, i: usize) -> Vec<u64> {
        match self {
            NoiseModel::CenteredBernoulli { rho } => vec![rho[i].to_bits()],
            NoiseModel::Gaussian { sigma } => vec![sigma[i].to_bits()],
            NoiseModel::Laplace { mu } => vec![mu[i].to_bits()],
            NoiseModel::CenteredBinomial { rho, .. } => vec![rho[i].to_bits()],
            NoiseModel::BoundedBinaryMixture { mixing, .. } => mixing[i]
                .iter()
                .flat_map(|m| [m.a.to_bits(), m.b.to_bits(), m.weight.to_bits()])
                .collect(),
        }
    }

    /// Indices of one representative per group of identically distributed
    /// coordinates, in first-appearance order.
    pub fn distinct_coordinates(&self) -> Vec<usize> {
        let mut seen: Vec<Vec<u64>> = Vec::new();
        let mut reps = Vec::new();
        for i in 0..self.dim() {
            let key = self.coordinate_key(i);
            if !seen.contains(&key) {
                seen.push(key);
                reps.push(i);
            }
        }
        reps
    }

    /// Draws coordinate `i` together with its latent record.
    pub fn sample_coordinate<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> (f64, Latent) {
        match self {
            NoiseModel::CenteredBernoulli { rho } => {
                let x = sample_centered_bernoulli(rho[i], rng);
                (x, Latent::Value(x))
            }
            NoiseModel::Gaussian { sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                let x = sigma[i] * z;
                (x, Latent::Value(x))
            }
            NoiseModel::Laplace { mu } => {
                let x = sample_laplace(mu[i], rng);
                (x, Latent::Value(x))
            }
            NoiseModel::CenteredBinomial { a, k, rho } => {
                let etas: Vec<f64> = (0..*k)
                    .map(|_| sample_centered_bernoulli(rho[i], rng))
                    .collect();
                let x = a * etas.iter().sum::<f64>();
                (x, Latent::Summands(etas))
            }
            NoiseModel::BoundedBinaryMixture { mixing, .. } => {
                let atoms = &mixing[i];
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = atoms[atoms.len() - 1];
                for atom in atoms {
                    acc += atom.weight;
                    if u < acc {
                        chosen = *atom;
                        break;
                    }
                }
                let (a, b) = (chosen.a, chosen.b);
                let v: f64 = rng.random();
                let eta = if v < b / (a + b) { a } else { -b };
                (eta, Latent::Binary { a, b, eta })
            }
        }
    }
}

fn sample_centered_bernoulli<R: Rng + ?Sized>(rho: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    if u < rho {
        1.0 - rho
    } else {
        -rho
    }
}

/// Inverse-CDF Laplace draw with scale `mu`.
pub(crate) fn sample_laplace<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    if u < 0.5 {
        mu * (2.0 * u).ln()
    } else {
        -mu * (2.0 * (1.0 - u)).ln()
    }
}

/// One draw of the full noise vector; coordinates are independent.
pub fn sample_noise<R: Rng + ?Sized>(model: &NoiseModel, rng: &mut R) -> SignalVector {
    let values = (0..model.dim())
        .map(|i| model.sample_coordinate(i, rng).0)
        .collect();
    SignalVector::from_finite(values)
}

/// A finite law: distinct support points in increasing order with strictly
/// positive probabilities summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteLaw {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteLaw {
    /// Builds a law from `(value, probability)` pairs. Pairs whose values
    /// coincide up to [`VALUE_MERGE_TOLERANCE`] are merged and zero-probability
    /// pairs are dropped.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        for &(v, p) in &atoms {
            if !v.is_finite() {
                return Err(Error::invalid(format!("law value {v} is not finite")));
            }
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::invalid(format!("law probability {p} is invalid")));
            }
        }
        let law = Self::merged(atoms);
        let total: f64 = law.atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "law probabilities must sum to 1 (got {total:.17})"
            )));
        }
        Ok(law)
    }

    pub fn point(value: f64) -> Self {
        Self {
            atoms: vec![(value, 1.0)],
        }
    }

    /// Sort-and-merge without the unit-sum check; internal builders keep the
    /// total at one by construction.
    pub(crate) fn merged(mut atoms: Vec<(f64, f64)>) -> Self {
        atoms.retain(|a| a.1 > 0.0);
        atoms.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (v, p) in atoms {
            match out.last_mut() {
                Some(last) if same_value(last.0, v) => last.1 += p,
                _ => out.push((v, p)),
            }
        }
        Self { atoms: out }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Probability of the atom at `value` (0 if absent).
    pub fn probability_of(&self, value: f64) -> f64 {
        self.atoms
            .iter()
            .find(|a| same_value(a.0, value))
            .map_or(0.0, |a| a.1)
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(v, p)| v * p).sum()
    }

    /// Law of `c * X`.
    pub fn scaled(&self, c: f64) -> Self {
        Self::merged(self.atoms.iter().map(|&(v, p)| (c * v, p)).collect())
    }

    /// Law of `X + s`.
    pub fn shifted(&self, s: f64) -> Self {
        Self::merged(self.atoms.iter().map(|&(v, p)| (v + s, p)).collect())
    }

    /// Law of `X + Y` for independent `X ~ self`, `Y ~ other`.
    pub fn convolve(&self, other: &DiscreteLaw) -> Self {
        let mut atoms = Vec::with_capacity(self.len() * other.len());
        for &(v, p) in &self.atoms {
            for &(w, q) in &other.atoms {
                atoms.push((v + w, p * q));
            }
        }
        Self::merged(atoms)
    }

    /// `sum_k weight_k * law_k` for weights summing to one.
    pub fn mixture<'a>(components: impl IntoIterator<Item = (f64, &'a DiscreteLaw)>) -> Self {
        let atoms = components
            .into_iter()
            .flat_map(|(w, law)| law.atoms.iter().map(move |&(v, p)| (v, w * p)))
            .collect();
        Self::merged(atoms)
    }

    /// `E[exp(t X)]`.
    pub fn mgf(&self, t: f64) -> f64 {
        self.atoms.iter().map(|(v, p)| p * (t * v).exp()).sum()
    }

    /// `E[exp(i t X)]` as `(re, im)`.
    pub fn characteristic_function(&self, t: f64) -> (f64, f64) {
        self.atoms.iter().fold((0.0, 0.0), |(re, im), (v, p)| {
            let (s, c) = (t * v).sin_cos();
            (re + p * c, im + p * s)
        })
    }

    /// Largest absolute probability difference over the union of supports.
    pub fn max_probability_error(&self, other: &DiscreteLaw) -> f64 {
        let one_way = |x: &DiscreteLaw, y: &DiscreteLaw| {
            x.atoms
                .iter()
                .map(|&(v, p)| (p - y.probability_of(v)).abs())
                .fold(0.0, f64::max)
        };
        one_way(self, other).max(one_way(other, self))
    }
}

fn same_value(x: f64, y: f64) -> bool {
    (x - y).abs() <= VALUE_MERGE_TOLERANCE * x.abs().max(y.abs()).max(1.0)
}

/// Exact law of one coordinate, or the marker for continuous families.
#[derive(Debug, Clone, PartialEq)]
pub enum ExactLaw {
    Discrete(DiscreteLaw),
    Continuous,
}

impl ExactLaw {
    pub fn discrete(self) -> Option<DiscreteLaw> {
        match self {
            ExactLaw::Discrete(l) => Some(l),
            ExactLaw::Continuous => None,
        }
    }
}

pub(crate) fn centered_bernoulli_law(rho: f64) -> DiscreteLaw {
    DiscreteLaw::merged(vec![(1.0 - rho, rho), (-rho, 1.0 - rho)])
}

/// `B(a, b)`: value `a` with probability `b/(a+b)`, value `-b` with
/// probability `a/(a+b)`.
pub(crate) fn binary_law(a: f64, b: f64) -> DiscreteLaw {
    let s = a + b;
    DiscreteLaw::merged(vec![(a, b / s), (-b, a / s)])
}

fn binomial_coefficient(k: u32, j: u32) -> f64 {
    let j = j.min(k - j);
    (0..j).fold(1.0, |acc, i| acc * f64::from(k - i) / f64::from(i + 1))
}

/// Exact law of coordinate `i`. Panics if `i >= model.dim()`.
pub fn exact_law(model: &NoiseModel, i: usize) -> ExactLaw {
    match model {
        NoiseModel::CenteredBernoulli { rho } => ExactLaw::Discrete(centered_bernoulli_law(rho[i])),
        NoiseModel::CenteredBinomial { a, k, rho } => {
            let r = rho[i];
            let kf = f64::from(*k);
            let atoms = (0..=*k)
                .map(|j| {
                    let p = binomial_coefficient(*k, j)
                        * r.powi(j as i32)
                        * (1.0 - r).powi((k - j) as i32);
                    (a * (f64::from(j) - kf * r), p)
                })
                .collect();
            ExactLaw::Discrete(DiscreteLaw::merged(atoms))
        }
        NoiseModel::BoundedBinaryMixture { mixing, .. } => {
            let parts: Vec<(f64, DiscreteLaw)> = mixing[i]
                .iter()
                .map(|m| (m.weight, binary_law(m.a, m.b)))
                .collect();
            ExactLaw::Discrete(DiscreteLaw::mixture(parts.iter().map(|(w, l)| (*w, l))))
        }
        NoiseModel::Gaussian { .. } | NoiseModel::Laplace { .. } => ExactLaw::Continuous,
    }
}

/// Exact mean and variance of a finite law.
pub fn law_mean_and_variance(law: &DiscreteLaw) -> (f64, f64) {
    let mean = law.mean();
    let var = law
        .atoms()
        .iter()
        .map(|(v, p)| p * (v - mean) * (v - mean))
        .sum::<f64>();
    (mean, var.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn law_of(model: &NoiseModel) -> DiscreteLaw {
        exact_law(model, 0).discrete().unwrap()
    }

    #[test]
    fn sample_support_checks() {
        let mut rng = stream_rng(7, 0);
        let bern = NoiseModel::iid_centered_bernoulli(200, 0.5).unwrap();
        for x in sample_noise(&bern, &mut rng).as_slice() {
            assert!(*x == 0.5 || *x == -0.5);
        }
        let binom = NoiseModel::iid_centered_binomial(200, 1.0, 2, 0.5).unwrap();
        for x in sample_noise(&binom, &mut rng).as_slice() {
            assert!([-1.0, 0.0, 1.0].contains(x), "{x}");
        }
    }

    #[test]
    fn degenerate_parameters_rejected() {
        assert!(NoiseModel::gaussian(vec![0.0]).is_err());
        assert!(NoiseModel::centered_bernoulli(vec![0.0]).is_err());
        assert!(NoiseModel::centered_bernoulli(vec![1.0]).is_err());
        assert!(NoiseModel::laplace(vec![-1.0]).is_err());
        assert!(NoiseModel::centered_binomial(1.0, 0, vec![0.5]).is_err());
        let bad_mix = vec![vec![MixingAtom { a: 2.0, b: 0.5, weight: 1.0 }]];
        assert!(NoiseModel::bounded_binary_mixture(1.0, 1.0, bad_mix).is_err());
    }

    #[test]
    fn exact_law_examples() {
        let bern = law_of(&NoiseModel::centered_bernoulli(vec![0.3]).unwrap());
        assert_eq!(bern.atoms(), &[(-0.3, 0.7), (0.7, 0.3)]);

        let binom = law_of(&NoiseModel::centered_binomial(1.0, 2, vec![0.5]).unwrap());
        assert_eq!(binom.atoms(), &[(-1.0, 0.25), (0.0, 0.5), (1.0, 0.25)]);

        let mix = NoiseModel::bounded_binary_mixture(
            1.0,
            1.0,
            vec![vec![MixingAtom { a: 1.0, b: 1.0, weight: 1.0 }]],
        )
        .unwrap();
        assert_eq!(law_of(&mix).atoms(), &[(-1.0, 0.5), (1.0, 0.5)]);

        let gauss = NoiseModel::iid_gaussian(3, 1.0).unwrap();
        assert_eq!(exact_law(&gauss, 1), ExactLaw::Continuous);
        assert_eq!(exact_law(&NoiseModel::iid_laplace(1, 1.0).unwrap(), 0), ExactLaw::Continuous);
    }

    #[test]
    fn mean_and_variance_examples() {
        let sym = DiscreteLaw::new(vec![(1.0, 0.5), (-1.0, 0.5)]).unwrap();
        assert_eq!(law_mean_and_variance(&sym), (0.0, 1.0));
        let (m, v) = law_mean_and_variance(&centered_bernoulli_law(0.3));
        assert!(m.abs() < 1e-15);
        assert!((v - 0.21).abs() < 1e-15);
        assert_eq!(law_mean_and_variance(&DiscreteLaw::point(0.0)), (0.0, 0.0));
    }

    #[test]
    fn discrete_families_are_centered() {
        for &rho in &[0.05, 0.1, 0.3, 0.5, 0.77, 0.95] {
            for k in 1..=7 {
                for &a in &[0.1, 1.0, 3.0] {
                    let law = law_of(&NoiseModel::centered_binomial(a, k, vec![rho]).unwrap());
                    assert!(law.mean().abs() < 1e-12, "binomial a={a} k={k} rho={rho}");
                }
            }
            assert!(law_of(&NoiseModel::centered_bernoulli(vec![rho]).unwrap()).mean().abs() < 1e-12);
        }
        let mix = NoiseModel::bounded_binary_mixture(
            2.0,
            1.5,
            vec![vec![
                MixingAtom { a: 2.0, b: 0.5, weight: 0.2 },
                MixingAtom { a: 0.3, b: 1.5, weight: 0.5 },
                MixingAtom { a: 0.0, b: 1.0, weight: 0.3 },
            ]],
        )
        .unwrap();
        assert!(law_of(&mix).mean().abs() < 1e-12);
    }

    #[test]
    fn bernoulli_is_single_atom_mixture() {
        for r in 1..10 {
            let rho = f64::from(r) / 10.0;
            let bern = law_of(&NoiseModel::centered_bernoulli(vec![rho]).unwrap());
            let mix = law_of(
                &NoiseModel::bounded_binary_mixture(
                    1.0,
                    1.0,
                    vec![vec![MixingAtom { a: 1.0 - rho, b: rho, weight: 1.0 }]],
                )
                .unwrap(),
            );
            assert_eq!(bern.len(), mix.len());
            for (x, y) in bern.atoms().iter().zip(mix.atoms()) {
                assert_eq!(x.0, y.0);
                assert!((x.1 - y.1).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn binomial_k1_is_scaled_bernoulli() {
        for &rho in &[0.1, 0.3, 0.5, 0.9] {
            for &a in &[0.5, 1.0, 2.5] {
                let binom = law_of(&NoiseModel::centered_binomial(a, 1, vec![rho]).unwrap());
                let bern = centered_bernoulli_law(rho).scaled(a);
                assert_eq!(binom.atoms(), bern.atoms());
            }
        }
    }

    #[test]
    fn empirical_moments_match_exact_laws() {
        let models = [
            NoiseModel::centered_bernoulli(vec![0.3]).unwrap(),
            NoiseModel::centered_binomial(0.5, 3, vec![0.2]).unwrap(),
            NoiseModel::bounded_binary_mixture(
                1.0,
                1.0,
                vec![vec![
                    MixingAtom { a: 1.0, b: 0.2, weight: 0.6 },
                    MixingAtom { a: 0.4, b: 1.0, weight: 0.4 },
                ]],
            )
            .unwrap(),
        ];
        let n = 1_000_000;
        for (s, model) in models.iter().enumerate() {
            let (mean, var) = law_mean_and_variance(&law_of(model));
            let fourth: f64 = law_of(model)
                .atoms()
                .iter()
                .map(|(v, p)| p * (v - mean).powi(4))
                .sum();
            let mut rng = stream_rng(11, s as u64);
            let xs: Vec<f64> = (0..n).map(|_| model.sample_coordinate(0, &mut rng).0).collect();
            let emp_mean = xs.iter().sum::<f64>() / n as f64;
            let emp_var = xs.iter().map(|x| (x - emp_mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se_mean = (var / n as f64).sqrt();
            let se_var = ((fourth - var * var) / n as f64).sqrt();
            assert!((emp_mean - mean).abs() < 5.0 * se_mean, "{model:?}");
            assert!((emp_var - var).abs() < 5.0 * se_var, "{model:?}");
        }
    }

    #[test]
    fn continuous_samplers_have_expected_variance() {
        let n = 1_000_000;
        let mut rng = stream_rng(3, 0);
        let lap = NoiseModel::laplace(vec![2.0]).unwrap();
        let xs: Vec<f64> = (0..n).map(|_| lap.sample_coordinate(0, &mut rng).0).collect();
        // Laplace(mu): variance 2 mu^2, fourth central moment 24 mu^4.
        let var = 8.0;
        let emp_var = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
        let se = ((24.0 * 16.0 - var * var) / n as f64).sqrt();
        assert!((emp_var - var).abs() < 5.0 * se);
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 5.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn noise_json_shape() {
        let m = NoiseModel::centered_binomial(0.2, 5, vec![0.5, 0.4]).unwrap();
        let v: serde_json::Value = serde_json::to_value(&m).unwrap();
        assert_eq!(v["family"], "centered_binomial");
        assert_eq!(v["params"]["k"], 5);
        let back: NoiseModel = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);
        let g: NoiseModel =
            serde_json::from_str(r#"{"family":"gaussian","params":{"sigma":[1.0,2.0]}}"#).unwrap();
        assert_eq!(g.family(), Family::Gaussian);
        assert_eq!(g.dim(), 2);
    }

    #[test]
    fn discrete_law_rejects_bad_input() {
        assert!(DiscreteLaw::new(vec![(0.0, 0.5)]).is_err());
        assert!(DiscreteLaw::new(vec![(f64::NAN, 1.0)]).is_err());
        let merged = DiscreteLaw::new(vec![(1.0, 0.25), (1.0, 0.25), (0.0, 0.5)]).unwrap();
        assert_eq!(merged.atoms(), &[(0.0, 0.5), (1.0, 0.5)]);
    }
}
