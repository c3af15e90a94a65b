//! Numeric carriers shared by every other module: signals, dictionaries,
//! simplex weights and the experiment configuration.
//!
//! All types validate at construction and are immutable afterwards, so the
//! numerical routines downstream only check cross-argument consistency
//! (matching dimensions, matching lengths).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseModel;

/// Absolute tolerance on the sum of a weight vector.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// A point of `R^n` with finite entries and `n >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SignalVector(Vec<f64>);

impl SignalVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("signal must have at least one coordinate"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "signal coordinate {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Coordinate-wise sum. Panics only if the dimensions differ, which callers
    /// rule out beforehand.
    pub(crate) fn add(&self, other: &SignalVector) -> SignalVector {
        debug_assert_eq!(self.dim(), other.dim());
        SignalVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub(crate) fn from_finite(values: Vec<f64>) -> SignalVector {
        debug_assert!(!values.is_empty() && values.iter().all(|v| v.is_finite()));
        SignalVector(values)
    }
}

impl TryFrom<Vec<f64>> for SignalVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<SignalVector> for Vec<f64> {
    fn from(v: SignalVector) -> Self {
        v.0
    }
}

/// Ordered, nonempty list of candidate signals sharing one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SignalVector>", into = "Vec<SignalVector>")]
pub struct Dictionary {
    atoms: Vec<SignalVector>,
}

impl Dictionary {
    pub fn new(atoms: Vec<SignalVector>) -> Result<Self> {
        let first = atoms
            .first()
            .ok_or_else(|| Error::invalid("dictionary must contain at least one atom"))?;
        let n = first.dim();
        for atom in &atoms {
            if atom.dim() != n {
                return Err(Error::DimensionMismatch {
                    what: "dictionary atom",
                    expected: n,
                    found: atom.dim(),
                });
            }
        }
        Ok(Self { atoms })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(
            rows.into_iter()
                .map(SignalVector::new)
                .collect::<Result<Vec<_>>>()?,
        )
    }

    /// Number of atoms `m`.
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Ambient dimension `n`.
    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    pub fn atoms(&self) -> &[SignalVector] {
        &self.atoms
    }

    pub fn atom(&self, j: usize) -> &SignalVector {
        &self.atoms[j]
    }

    pub(crate) fn check_signal(&self, what: &'static str, v: &SignalVector) -> Result<()> {
        if v.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                what,
                expected: self.dim(),
                found: v.dim(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_weights(&self, what: &'static str, w: &WeightVector) -> Result<()> {
        if w.len() != self.len() {
            return Err(Error::DimensionMismatch {
                what,
                expected: self.len(),
                found: w.len(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<SignalVector>> for Dictionary {
    type Error = Error;

    fn try_from(atoms: Vec<SignalVector>) -> Result<Self> {
        Self::new(atoms)
    }
}

impl From<Dictionary> for Vec<SignalVector> {
    fn from(d: Dictionary) -> Self {
        d.atoms
    }
}

/// A probability vector over `m` atoms, kept in both linear and log space.
///
/// `log_weights[j]` is `-inf` exactly when `weights[j] == 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector {
    weights: Vec<f64>,
    log_weights: Vec<f64>,
}

impl WeightVector {
    /// Validates nonnegativity and the unit sum (absolute tolerance 1e-12).
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("weights must be nonempty"));
        }
        for (j, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::invalid(format!(
                    "weight {j} must be a finite nonnegative number, got {w}"
                )));
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::invalid(format!(
                "weights must sum to 1 (got {total:.17})"
            )));
        }
        let log_weights = weights
            .iter()
            .map(|&w| if w > 0.0 { w.ln() } else { f64::NEG_INFINITY })
            .collect();
        Ok(Self {
            weights,
            log_weights,
        })
    }

    /// Normalizes unnormalized log-weights with a max-shifted log-sum-exp.
    /// Entries equal to `-inf` receive weight exactly 0.
    pub fn from_log_unnormalized(log_unnorm: Vec<f64>) -> Result<Self> {
        if log_unnorm.is_empty() {
            return Err(Error::invalid("weights must be nonempty"));
        }
        if log_unnorm.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
            return Err(Error::invalid("log-weights must be finite or -inf"));
        }
        let max = log_unnorm.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::invalid("all weights are zero"));
        }
        let unnorm: Vec<f64> = log_unnorm.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = unnorm.iter().sum();
        let log_total = total.ln();
        let log_weights = log_unnorm.iter().map(|l| l - max - log_total).collect();
        let weights = unnorm.iter().map(|u| u / total).collect();
        Ok(Self {
            weights,
            log_weights,
        })
    }

    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("weights must be nonempty"));
        }
        let w = 1.0 / m as f64;
        Ok(Self {
            weights: vec![w; m],
            log_weights: vec![-(m as f64).ln(); m],
        })
    }

    /// Point mass on index `j`.
    pub fn dirac(m: usize, j: usize) -> Result<Self> {
        if j >= m {
            return Err(Error::invalid(format!("dirac index {j} out of range for {m} atoms")));
        }
        let mut weights = vec![0.0; m];
        let mut log_weights = vec![f64::NEG_INFINITY; m];
        weights[j] = 1.0;
        log_weights[j] = 0.0;
        Ok(Self {
            weights,
            log_weights,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn get(&self, j: usize) -> f64 {
        self.weights[j]
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;

    fn try_from(weights: Vec<f64>) -> Result<Self> {
        Self::new(weights)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.weights
    }
}

/// `log(sum(exp(x)))` with the maximum subtracted first. Returns `-inf` for
/// an empty slice or when every entry is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + s.ln()
}

/// Sup-norm diameter of a support set.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SupportDiameter(f64);

impl SupportDiameter {
    pub fn new(d0: f64) -> Result<Self> {
        if !d0.is_finite() || d0 < 0.0 {
            return Err(Error::invalid(format!(
                "diameter must be finite and nonnegative, got {d0}"
            )));
        }
        Ok(Self(d0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `max_{j,l} ||theta_j - theta_l||_inf`.
///
/// Computed per coordinate as `max_j theta_{j,i} - min_j theta_{j,i}`, which
/// equals the pairwise maximum and costs `O(mn)`.
pub fn sup_diameter(dictionary: &Dictionary) -> SupportDiameter {
    let n = dictionary.dim();
    let mut d0 = 0.0f64;
    for i in 0..n {
        let (lo, hi) = dictionary
            .atoms()
            .iter()
            .map(|a| a.as_slice()[i])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        d0 = d0.max(hi - lo);
    }
    SupportDiameter(d0)
}

/// Squared Euclidean distance `||a - b||^2`.
pub fn squared_distance(a: &SignalVector, b: &SignalVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            what: "squared_distance",
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(sq_dist(a.as_slice(), b.as_slice()))
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// One Monte Carlo experiment: truth, dictionary, prior, noise law, tuning
/// parameter and replication settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawExperimentConfig")]
pub struct ExperimentConfig {
    pub truth: SignalVector,
    pub dictionary: Dictionary,
    pub prior: WeightVector,
    pub noise: NoiseModel,
    pub beta: f64,
    pub replicates: usize,
    pub seed: u64,
    pub prior_samples: Option<usize>,
}

impl ExperimentConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        truth: SignalVector,
        dictionary: Dictionary,
        prior: WeightVector,
        noise: NoiseModel,
        beta: f64,
        replicates: usize,
        seed: u64,
        prior_samples: Option<usize>,
    ) -> Result<Self> {
        let cfg = Self {
            truth,
            dictionary,
            prior,
            noise,
            beta,
            replicates,
            seed,
            prior_samples,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta.is_nan() || self.beta <= 0.0 {
            return Err(Error::invalid("beta must be positive"));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("replicates must be at least 1"));
        }
        if self.prior_samples == Some(0) {
            return Err(Error::invalid("prior_samples must be at least 1"));
        }
        let n = self.dictionary.dim();
        if self.truth.dim() != n {
            return Err(Error::invalid(format!(
                "truth has dimension {} but dictionary atoms have dimension {n}",
                self.truth.dim()
            )));
        }
        if self.prior.len() != self.dictionary.len() {
            return Err(Error::invalid(format!(
                "prior has {} weights but dictionary has {} atoms",
                self.prior.len(),
                self.dictionary.len()
            )));
        }
        self.noise
            .validate()
            .map_err(|e| Error::invalid(format!("noise: {e}")))?;
        if self.noise.dim() != n {
            return Err(Error::invalid(format!(
                "noise has dimension {} but dictionary atoms have dimension {n}",
                self.noise.dim()
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Wire form, validated field by field so diagnostics name the offending key.
#[derive(Deserialize)]
struct RawExperimentConfig {
    truth: Vec<f64>,
    dictionary: Vec<Vec<f64>>,
    prior: Vec<f64>,
    noise: NoiseModel,
    beta: f64,
    replicates: i64,
    seed: u64,
    #[serde(default)]
    prior_samples: Option<i64>,
}

impl TryFrom<RawExperimentConfig> for ExperimentConfig {
    type Error = Error;

    fn try_from(raw: RawExperimentConfig) -> Result<Self> {
        fn keyed(key: &'static str) -> impl Fn(Error) -> Error {
            move |e| Error::invalid(format!("{key}: {e}"))
        }
        if raw.beta.is_nan() || raw.beta <= 0.0 {
            return Err(Error::invalid("beta must be positive"));
        }
        if raw.replicates < 1 {
            return Err(Error::invalid("replicates must be at least 1"));
        }
        let prior_samples = match raw.prior_samples {
            Some(s) if s < 1 => return Err(Error::invalid("prior_samples must be at least 1")),
            Some(s) => Some(s as usize),
            None => None,
        };
        let truth = SignalVector::new(raw.truth).map_err(keyed("truth"))?;
        let dictionary = Dictionary::from_rows(raw.dictionary).map_err(keyed("dictionary"))?;
        let prior = WeightVector::new(raw.prior).map_err(keyed("prior"))?;
        ExperimentConfig::new(
            truth,
            dictionary,
            prior,
            raw.noise,
            raw.beta,
            raw.replicates as usize,
            raw.seed,
            prior_samples,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dict(rows: &[&[f64]]) -> Dictionary {
        Dictionary::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn sup_diameter_examples() {
        assert_eq!(sup_diameter(&dict(&[&[0.0, 0.0]])).value(), 0.0);
        assert_eq!(sup_diameter(&dict(&[&[0.0, 0.0], &[1.0, 0.5]])).value(), 1.0);
        assert_eq!(
            sup_diameter(&dict(&[&[0.0, 1.0], &[1.0, 0.0], &[0.5, 0.5]])).value(),
            1.0
        );
    }

    #[test]
    fn squared_distance_examples() {
        let a = SignalVector::new(vec![0.0, 0.0]).unwrap();
        let b = SignalVector::new(vec![3.0, 4.0]).unwrap();
        assert_eq!(squared_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(squared_distance(&a, &b).unwrap(), 25.0);
        let one = SignalVector::new(vec![1.0]).unwrap();
        let zero = SignalVector::new(vec![0.0]).unwrap();
        assert_eq!(squared_distance(&one, &zero).unwrap(), 1.0);
        assert!(matches!(
            squared_distance(&a, &one),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn signal_rejects_nonfinite_and_empty() {
        assert!(SignalVector::new(vec![]).is_err());
        assert!(SignalVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(SignalVector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn dictionary_rejects_ragged_atoms() {
        let err = Dictionary::from_rows(vec![vec![0.0, 1.0], vec![2.0]]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
        assert!(Dictionary::from_rows(vec![]).is_err());
    }

    #[test]
    fn weight_vector_invariants() {
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::new(vec![-0.1, 1.1]).is_err());
        let w = WeightVector::new(vec![0.0, 0.25, 0.75]).unwrap();
        assert_eq!(w.log_weights()[0], f64::NEG_INFINITY);
        for (wj, lj) in w.weights().iter().zip(w.log_weights()) {
            if *wj > 0.0 {
                assert!((lj.exp() - wj).abs() <= 1e-12 * wj);
            }
        }
        let from_logs = WeightVector::from_log_unnormalized(vec![1000.0, 1000.0]).unwrap();
        assert_eq!(from_logs.weights(), &[0.5, 0.5]);
        assert!(WeightVector::from_log_unnormalized(vec![f64::NEG_INFINITY; 3]).is_err());
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[-1e4, -1e4]) - (-1e4 + 2f64.ln())).abs() < 1e-9);
        assert!((log_sum_exp(&[0.0, f64::NEG_INFINITY]) - 0.0).abs() < 1e-15);
    }
}
