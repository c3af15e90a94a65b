//! Sample statistics used by the verification routines.

/// Mean and standard error (sample standard deviation over `sqrt(len)`).
/// The standard error is 0 for fewer than two values.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Survival function of the Kolmogorov distribution,
/// `P(K > lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.3 {
        // The alternating series converges slowly here; use the theta-function
        // form of the CDF instead.
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda
            * (1..=5)
                .map(|k| (-((2 * k - 1) * (2 * k - 1)) as f64 * c).exp())
                .sum::<f64>();
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// `lambda` with `kolmogorov_survival(lambda) = significance`, by bisection.
pub fn kolmogorov_critical_value(significance: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_survival(mid) > significance {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Two-sample Kolmogorov–Smirnov result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    /// Statistic value at which the asymptotic p-value equals the significance.
    pub critical_value: f64,
    pub p_value: f64,
}

/// Two-sample KS test; sorts both inputs in place.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64], significance: f64) -> KsResult {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n as f64 * m as f64) / (n + m) as f64;
    let scale = ne.sqrt();
    KsResult {
        statistic: d,
        critical_value: kolmogorov_critical_value(significance) / scale,
        p_value: kolmogorov_survival(d * scale),
    }
}

/// Empirical characteristic function `(1/N) sum exp(i t x)` as `(re, im)`.
pub fn empirical_cf(xs: &[f64], t: f64) -> (f64, f64) {
    let n = xs.len() as f64;
    let (re, im) = xs.iter().fold((0.0, 0.0), |(re, im), x| {
        let (s, c) = (t * x).sin_cos();
        (re + c, im + s)
    });
    (re / n, im / n)
}

/// `n` evenly spaced points on `[lo, hi]`, endpoints included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}
