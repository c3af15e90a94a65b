//! Bernstein profiles of the noise couplings and the penalty formulas built
//! on them.
//!
//! A profile `(v, b, c)` asserts `E[exp(t zeta) | F] <= exp(v t^2 / (c (1 - b|t|)))`
//! for `|t| < 1/b`. Every profile here has the shape
//! `v(alpha) = v_scale * alpha * (v_shift + alpha)` and
//! `b(alpha) = b_0 * (1 + alpha)`.

use serde::{Deserialize, Serialize};

use crate::coupling::{check_alpha, conditional_zeta_laws, zeta_samples};
use crate::error::{Error, Result};
use crate::model::SupportDiameter;
use crate::noise::{DiscreteLaw, Family, NoiseModel};
use crate::stats::{linspace, mean_and_stderr};

/// Fraction of the admissible `t` domain covered by [`admissible_t_grid`].
pub const T_GRID_COVERAGE: f64 = 0.95;
/// Default number of `t` points.
pub const T_GRID_POINTS: usize = 64;
/// Relative slack allowed when the MGF is computed exactly.
pub const EXACT_MGF_TOLERANCE: f64 = 1e-12;
/// Standard-error margin for sampled MGFs.
pub const SAMPLED_MGF_MARGIN: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernsteinProfile {
    pub family: Family,
    pub v_scale: f64,
    pub v_shift: f64,
    /// `v'(0)`, stored in closed form.
    pub v_prime_0: f64,
    /// `b(0)`.
    pub b_0: f64,
    /// Normalization constant in the MGF bound, 1 or 2.
    pub mgf_normalization: f64,
}

impl BernsteinProfile {
    fn new(family: Family, v_scale: f64, v_shift: f64, b_0: f64, c: f64) -> Self {
        Self {
            family,
            v_scale,
            v_shift,
            v_prime_0: v_scale * v_shift,
            b_0,
            mgf_normalization: c,
        }
    }

    pub fn v(&self, alpha: f64) -> f64 {
        self.v_scale * alpha * (self.v_shift + alpha)
    }

    pub fn b(&self, alpha: f64) -> f64 {
        self.b_0 * (1.0 + alpha)
    }

    /// `exp(v t^2 / (c (1 - b|t|)))`, or `+inf` outside the domain.
    pub fn mgf_bound(&self, alpha: f64, t: f64) -> f64 {
        mgf_bound(self.v(alpha), self.b(alpha), self.mgf_normalization, t)
    }
}

fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(0.0, f64::max)
}

pub fn profile_for(model: &NoiseModel) -> BernsteinProfile {
    match model {
        NoiseModel::CenteredBernoulli { .. } => {
            BernsteinProfile::new(Family::CenteredBernoulli, 1.0, 1.0, 1.0 / 3.0, 2.0)
        }
        NoiseModel::Gaussian { sigma } => {
            let s = max_of(sigma);
            BernsteinProfile::new(Family::Gaussian, s * s, 2.0, 0.0, 2.0)
        }
        NoiseModel::BoundedBinaryMixture { a_max, b_max, .. } => {
            let l = a_max + b_max;
            BernsteinProfile::new(Family::BoundedBinaryMixture, l * l, 1.0, l / 3.0, 2.0)
        }
        NoiseModel::CenteredBinomial { a, k, .. } => {
            BernsteinProfile::new(Family::CenteredBinomial, a * a * f64::from(*k), 1.0, a / 3.0, 2.0)
        }
        NoiseModel::Laplace { mu } => {
            let m = max_of(mu);
            BernsteinProfile::new(Family::Laplace, m * m, 2.0, m, 1.0)
        }
    }
}

pub fn mgf_bound(v: f64, b: f64, c: f64, t: f64) -> f64 {
    let denom = 1.0 - b * t.abs();
    if denom <= 0.0 {
        f64::INFINITY
    } else {
        (v * t * t / (c * denom)).exp()
    }
}

/// `points` evenly spaced values covering 95% of `(-1/b, 1/b)`; when `b = 0`
/// the grid spans `+-2/sqrt(v)` (or `+-1` if `v = 0`).
pub fn admissible_t_grid(v: f64, b: f64, points: usize) -> Vec<f64> {
    let half = if b > 0.0 {
        T_GRID_COVERAGE / b
    } else if v > 0.0 {
        2.0 / v.sqrt()
    } else {
        1.0
    };
    linspace(-half, half, points)
}

/// Law whose MGF is checked.
#[derive(Debug, Clone, Copy)]
pub enum MgfSource<'a> {
    Exact(&'a DiscreteLaw),
    Samples(&'a [f64]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgfReport {
    /// Largest `E[exp(t zeta)] / bound` over the grid (point estimate).
    pub max_ratio: f64,
    /// `t` at which `max_ratio` is attained.
    pub argmax_t: f64,
    pub passed: bool,
    pub exact: bool,
}

/// Checks `E[exp(t zeta)] <= exp(v t^2 / (c (1 - b|t|)))` on `t_grid`.
///
/// Exact laws pass when every ratio is at most `1 + 1e-12`; sampled laws pass
/// when the sample mean minus five standard errors is below the bound.
pub fn mgf_bound_check(source: MgfSource<'_>, v: f64, b: f64, c: f64, t_grid: &[f64]) -> Result<MgfReport> {
    if !(v >= 0.0 && b >= 0.0 && c > 0.0) {
        return Err(Error::invalid("mgf check needs v >= 0, b >= 0, c > 0"));
    }
    if let Some(t) = t_grid.iter().find(|t| !t.is_finite() || b * t.abs() >= 1.0) {
        return Err(Error::invalid(format!("t = {t} is outside the admissible domain |t| < 1/b")));
    }
    if let MgfSource::Samples(xs) = source {
        if xs.len() < 2 {
            return Err(Error::invalid("sampled mgf check needs at least two samples"));
        }
    }
    let mut report = MgfReport {
        max_ratio: 0.0,
        argmax_t: 0.0,
        passed: true,
        exact: matches!(source, MgfSource::Exact(_)),
    };
    let mut buf = Vec::new();
    for &t in t_grid {
        let bound = mgf_bound(v, b, c, t);
        let (estimate, ok) = match source {
            MgfSource::Exact(law) => {
                let m = law.mgf(t);
                (m, m <= bound * (1.0 + EXACT_MGF_TOLERANCE))
            }
            MgfSource::Samples(xs) => {
                buf.clear();
                buf.extend(xs.iter().map(|x| (t * x).exp()));
                let (m, se) = mean_and_stderr(&buf);
                (m, m - SAMPLED_MGF_MARGIN * se <= bound)
            }
        };
        let ratio = estimate / bound;
        if ratio > report.max_ratio {
            report.max_ratio = ratio;
            report.argmax_t = t;
        }
        report.passed &= ok;
    }
    Ok(report)
}

/// `2 v'(0) + 2 b(0) d0`: the smallest `beta` for which the variance penalty
/// vanishes.
pub fn beta_threshold(profile: &BernsteinProfile, d0: SupportDiameter) -> f64 {
    2.0 * profile.v_prime_0 + 2.0 * profile.b_0 * d0.value()
}

/// `2 v'(0) / (beta - 2 b(0) d0) - 1`, the multiplier of the expected
/// posterior variance in the risk bound. Requires `beta > 2 b(0) d0`.
pub fn variance_penalty_coefficient(beta: f64, profile: &BernsteinProfile, d0: SupportDiameter) -> Result<f64> {
    let floor = 2.0 * profile.b_0 * d0.value();
    if beta.is_nan() || beta <= floor {
        return Err(Error::invalid(format!(
            "beta = {beta} must exceed 2 b(0) d0 = {floor}"
        )));
    }
    Ok(2.0 * profile.v_prime_0 / (beta - floor) - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernsteinReport {
    pub family: Family,
    pub alpha: f64,
    pub v: f64,
    pub b: f64,
    pub c: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub t_points: usize,
    pub max_ratio: f64,
    pub argmax_t: f64,
    pub exact: bool,
    /// Number of conditional laws checked.
    pub laws_checked: usize,
    pub sample_size: Option<usize>,
    pub passed: bool,
}

/// Checks the family's profile against the coupling's conditional MGFs at
/// `alpha`: every enumerated conditional law for discrete families, a
/// `sample_size` draw for continuous ones.
pub fn verify_bernstein(
    model: &NoiseModel,
    alpha: f64,
    t_points: usize,
    sample_size: usize,
    seed: u64,
) -> Result<BernsteinReport> {
    model.validate()?;
    check_alpha(alpha)?;
    if t_points < 2 {
        return Err(Error::invalid("t_grid_points must be at least 2"));
    }
    let profile = profile_for(model);
    let (v, b, c) = (profile.v(alpha), profile.b(alpha), profile.mgf_normalization);
    let grid = admissible_t_grid(v, b, t_points);
    let family = model.family();
    let mut out = BernsteinReport {
        family,
        alpha,
        v,
        b,
        c,
        t_min: grid[0],
        t_max: grid[grid.len() - 1],
        t_points,
        max_ratio: 0.0,
        argmax_t: 0.0,
        exact: family.is_discrete(),
        laws_checked: 0,
        sample_size: None,
        passed: true,
    };
    let absorb = |r: MgfReport, out: &mut BernsteinReport| {
        if r.max_ratio > out.max_ratio {
            out.max_ratio = r.max_ratio;
            out.argmax_t = r.argmax_t;
        }
        out.passed &= r.passed;
        out.laws_checked += 1;
    };
    for i in model.distinct_coordinates() {
        if family.is_discrete() {
            for branch in conditional_zeta_laws(model, i, alpha)? {
                let r = mgf_bound_check(MgfSource::Exact(&branch.zeta), v, b, c, &grid)?;
                absorb(r, &mut out);
            }
        } else {
            if sample_size < 2 {
                return Err(Error::invalid("sample_size must be at least 2"));
            }
            let xs = zeta_samples(model, i, alpha, sample_size, seed ^ i as u64)?;
            let r = mgf_bound_check(MgfSource::Samples(&xs), v, b, c, &grid)?;
            out.sample_size = Some(sample_size);
            absorb(r, &mut out);
        }
    }
    Ok(out)
}
