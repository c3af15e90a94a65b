//! Acceptance suite: one PASS/FAIL line per criterion.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ewa_oracle::bernstein::verify_bernstein;
use ewa_oracle::coupling::{verify_coupling, Method};
use ewa_oracle::ewa::{dv_minimality_test, DV_TOLERANCE};
use ewa_oracle::noise::MixingAtom;
use ewa_oracle::rng::{stream_rng, THREADS_ENV};
use ewa_oracle::{
    beta_threshold, certify_corollary, kl_divergence, oracle_bound_finite, oracle_bound_gibbs, profile_for,
    variance_penalty_coefficient, Dictionary, Family, NoiseModel, Scenario, SignalVector, SupportDiameter,
    WeightVector,
};
use rand::Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn timed(budget: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut out = f();
    let elapsed = start.elapsed();
    if elapsed > budget {
        out.passed = false;
    }
    out.detail = format!("{} [{:.2?} / budget {:?}]", out.detail, elapsed, budget);
    out
}

fn coupling_exact() -> Outcome {
    let alphas = [0.1, 0.25, 0.5, 1.0];
    let mut models = Vec::new();
    for rho in [0.1, 0.3, 0.5, 0.7, 0.9] {
        models.push(NoiseModel::iid_centered_bernoulli(1, rho).unwrap());
    }
    models.push(
        NoiseModel::iid_bounded_binary_mixture(
            1,
            2.0,
            1.5,
            vec![
                MixingAtom { a: 2.0, b: 1.0, weight: 0.5 },
                MixingAtom { a: 0.5, b: 1.5, weight: 0.3 },
                MixingAtom { a: 1.0, b: 0.25, weight: 0.2 },
            ],
        )
        .unwrap(),
    );
    for k in [1, 2, 3, 5] {
        models.push(NoiseModel::iid_centered_binomial(1, 1.0, k, 0.3).unwrap());
    }
    let (mut worst_atom, mut worst_mean, mut passed, mut cases) = (0.0f64, 0.0f64, true, 0);
    for m in &models {
        for &alpha in &alphas {
            let r = verify_coupling(m, alpha, Method::Exact, 0, 0).unwrap();
            worst_atom = worst_atom.max(r.statistic);
            worst_mean = worst_mean.max(r.mean_zero_check.unwrap());
            passed &= r.passed;
            cases += 1;
        }
    }
    Outcome {
        passed: passed && worst_atom <= 1e-12 && worst_mean <= 1e-12,
        detail: format!("{cases} cases, max atom error {worst_atom:.3e}, max |E[zeta|F]| {worst_mean:.3e}"),
    }
}

fn coupling_continuous() -> Outcome {
    let n = 1_000_000;
    let gauss = NoiseModel::iid_gaussian(1, 1.0).unwrap();
    let laplace = NoiseModel::iid_laplace(1, 1.0).unwrap();
    let mut passed = true;
    let mut parts = Vec::new();
    for alpha in [0.1, 0.5, 1.0] {
        let ks = verify_coupling(&gauss, alpha, Method::Ks, n, 20_240_901).unwrap();
        let cf = verify_coupling(&laplace, alpha, Method::CfGrid, n, 20_240_901).unwrap();
        passed &= ks.passed && cf.passed;
        parts.push(format!(
            "alpha={alpha}: KS D={:.2e} (crit {:.2e}), CF err={:.2e} (tol {:.2e})",
            ks.statistic, ks.threshold, cf.statistic, cf.threshold
        ));
    }
    Outcome {
        passed,
        detail: parts.join("; "),
    }
}

fn bernstein_domination() -> Outcome {
    let models = [
        NoiseModel::iid_centered_bernoulli(1, 0.3).unwrap(),
        NoiseModel::iid_gaussian(1, 1.0).unwrap(),
        NoiseModel::iid_bounded_binary_mixture(
            1,
            1.0,
            1.0,
            vec![
                MixingAtom { a: 1.0, b: 1.0, weight: 0.5 },
                MixingAtom { a: 0.3, b: 0.9, weight: 0.5 },
            ],
        )
        .unwrap(),
        NoiseModel::iid_centered_binomial(1, 0.2, 5, 0.4).unwrap(),
        NoiseModel::iid_laplace(1, 1.0).unwrap(),
    ];
    let mut passed = true;
    let mut worst = 0.0f64;
    for m in &models {
        for alpha in [0.1, 0.5, 1.0] {
            let r = verify_bernstein(m, alpha, 64, 1_000_000, 7).unwrap();
            passed &= r.passed;
            worst = worst.max(r.max_ratio);
        }
    }
    Outcome {
        passed,
        detail: format!("5 families x 3 alphas, max E[e^tz]/bound = {worst:.6}"),
    }
}

fn thresholds() -> Outcome {
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0);
    let d = |x: f64| SupportDiameter::new(x).unwrap();
    let mut failures = Vec::new();
    let mut checks = 0;
    let mut check = |ok: bool, what: String| {
        checks += 1;
        if !ok {
            failures.push(what);
        }
    };
    let diameters = [0.0, 0.25, 1.0, 2.0];
    let betas = [0.3, 1.0, 2.5, 8.0];
    for sigma in [0.5, 1.0, 2.0] {
        let p = profile_for(&NoiseModel::iid_gaussian(2, sigma).unwrap());
        for &d0 in &diameters {
            let t = beta_threshold(&p, d(d0));
            check(close(t, 4.0 * sigma * sigma), format!("gaussian threshold sigma={sigma}"));
            check(variance_penalty_coefficient(t, &p, d(d0)).unwrap().abs() <= 1e-12, "gaussian zero".into());
            for &beta in &betas {
                let c = variance_penalty_coefficient(beta, &p, d(d0)).unwrap();
                check(close(c + 1.0, 4.0 * sigma * sigma / beta), "gaussian form".into());
            }
        }
    }
    let bern = profile_for(&NoiseModel::iid_centered_bernoulli(2, 0.4).unwrap());
    check(close(beta_threshold(&bern, d(1.0)), 8.0 / 3.0), "bernoulli 8/3".into());
    for &d0 in &diameters {
        let t = beta_threshold(&bern, d(d0));
        check(close(t, 2.0 + 2.0 * d0 / 3.0), "bernoulli threshold".into());
        check(variance_penalty_coefficient(t, &bern, d(d0)).unwrap().abs() <= 1e-12, "bernoulli zero".into());
        for &beta in betas.iter().filter(|b| 3.0 * **b > 2.0 * d0) {
            let c = variance_penalty_coefficient(beta, &bern, d(d0)).unwrap();
            check(close(c + 1.0, 6.0 / (3.0 * beta - 2.0 * d0)), "bernoulli form".into());
        }
    }
    for (a_max, b_max) in [(0.5, 0.5), (1.0, 2.0), (0.2, 0.7)] {
        let l: f64 = a_max + b_max;
        let m = NoiseModel::iid_bounded_binary_mixture(1, a_max, b_max, vec![MixingAtom { a: a_max, b: b_max, weight: 1.0 }])
            .unwrap();
        let p = profile_for(&m);
        for &d0 in &diameters {
            let t = beta_threshold(&p, d(d0));
            check(close(t, 2.0 * l * l + 2.0 * l * d0 / 3.0), format!("bounded threshold L={l}"));
            check(variance_penalty_coefficient(t, &p, d(d0)).unwrap().abs() <= 1e-12, "bounded zero".into());
            for &beta in betas.iter().filter(|b| 3.0 * **b > 2.0 * l * d0) {
                let c = variance_penalty_coefficient(beta, &p, d(d0)).unwrap();
                check(close(c + 1.0, 6.0 * l * l / (3.0 * beta - 2.0 * l * d0)), "bounded form".into());
            }
        }
    }
    for k in [1u32, 2, 3, 5, 10] {
        let kf = f64::from(k);
        for a in [1.0 / kf, 0.5, 2.0] {
            let p = profile_for(&NoiseModel::iid_centered_binomial(1, a, k, 0.5).unwrap());
            for &d0 in &diameters {
                let t = beta_threshold(&p, d(d0));
                check(close(t, 2.0 * a * a * kf + 2.0 * a * d0 / 3.0), format!("binomial threshold k={k}"));
                check(variance_penalty_coefficient(t, &p, d(d0)).unwrap().abs() <= 1e-12, "binomial zero".into());
                for &beta in betas.iter().filter(|b| 3.0 * **b > 2.0 * a * d0) {
                    let c = variance_penalty_coefficient(beta, &p, d(d0)).unwrap();
                    check(close(c + 1.0, 6.0 * a * a * kf / (3.0 * beta - 2.0 * a * d0)), "binomial form".into());
                }
            }
        }
        let p = profile_for(&NoiseModel::iid_centered_binomial(1, 1.0 / kf, k, 0.5).unwrap());
        check(close(beta_threshold(&p, d(1.0)), 8.0 / (3.0 * kf)), format!("binomial 8/(3k) k={k}"));
    }
    for mu in [0.5, 1.0, 3.0] {
        let p = profile_for(&NoiseModel::iid_laplace(1, mu).unwrap());
        for &d0 in &diameters {
            let t = beta_threshold(&p, d(d0));
            check(close(t, 4.0 * mu * mu + 2.0 * mu * d0), format!("laplace threshold mu={mu}"));
            check(variance_penalty_coefficient(t, &p, d(d0)).unwrap().abs() <= 1e-12, "laplace zero".into());
            for &beta in betas.iter().filter(|b| **b > 2.0 * mu * d0) {
                let c = variance_penalty_coefficient(beta, &p, d(d0)).unwrap();
                check(close(c + 1.0, 4.0 * mu * mu / (beta - 2.0 * mu * d0)), "laplace form".into());
            }
        }
    }
    Outcome {
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("{checks} identities hold to 1e-12")
        } else {
            format!("{} of {checks} failed: {}", failures.len(), failures.join(", "))
        },
    }
}

fn certification() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for (i, family) in Family::ALL.iter().enumerate() {
        let scenario = Scenario::desk(*family, 50, 10, 10_000, 1000 + i as u64).unwrap();
        let c = certify_corollary(&scenario).unwrap();
        let (a, b) = (&c.at_threshold, &c.below_threshold);
        let penalty_positive = b.penalty_coefficient.is_some_and(|x| x > 0.0);
        passed &= a.passed && b.passed && penalty_positive;
        parts.push(format!(
            "{family}: beta={:.4} risk={:.4}+-{:.4} <= bound {:.4}; beta/2: risk {:.4} <= {:.4}+{:.4}",
            a.beta,
            a.risk_estimate,
            a.risk_stderr,
            a.oracle_bound,
            b.risk_estimate,
            b.oracle_bound,
            b.penalty_term
        ));
    }
    Outcome {
        passed,
        detail: parts.join("; "),
    }
}

fn dv_minimality() -> Outcome {
    let mut rng = stream_rng(31, 0);
    let mut worst = f64::NEG_INFINITY;
    let mut passed = true;
    for _ in 0..50 {
        let n = rng.random_range(1..=10);
        let m = rng.random_range(1..=8);
        let dict = Dictionary::from_rows(
            (0..m).map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).collect(),
        )
        .unwrap();
        let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut prior: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let fix: f64 = prior[1..].iter().sum();
        prior[0] = 1.0 - fix;
        let prior = WeightVector::new(prior).unwrap();
        let y = SignalVector::new((0..n).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
        let beta = 10f64.powf(rng.random_range(-1.0..1.5));
        let r = dv_minimality_test(&y, &dict, &prior, beta, 100, &mut rng).unwrap();
        worst = worst.max(r.worst_violation);
        passed &= r.passed;
    }
    Outcome {
        passed: passed && worst <= DV_TOLERANCE,
        detail: format!("50 instances x 100 perturbations, worst violation {worst:.3e}"),
    }
}

fn kl_and_ordering() -> Outcome {
    let mut passed = true;
    let mut worst_kl = 0.0f64;
    for m in [2usize, 4, 10] {
        for j in 0..m {
            let kl = kl_divergence(&WeightVector::dirac(m, j).unwrap(), &WeightVector::uniform(m).unwrap()).unwrap();
            worst_kl = worst_kl.max((kl - (m as f64).ln()).abs());
        }
    }
    passed &= worst_kl <= 1e-12;
    let mut rng = stream_rng(77, 0);
    let mut worst_gap = f64::NEG_INFINITY;
    for _ in 0..100 {
        let n = rng.random_range(1..=8);
        let m = rng.random_range(1..=12);
        let dict = Dictionary::from_rows(
            (0..m).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
        )
        .unwrap();
        let logs: Vec<f64> = (0..m).map(|_| rng.random_range(-4.0..0.0)).collect();
        let prior = WeightVector::from_log_unnormalized(logs).unwrap();
        let truth = SignalVector::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let beta = 10f64.powf(rng.random_range(-2.0..2.0));
        let g = oracle_bound_gibbs(&dict, &truth, &prior, beta).unwrap();
        let f = oracle_bound_finite(&dict, &truth, &prior, beta).unwrap();
        worst_gap = worst_gap.max(g - f);
    }
    passed &= worst_gap <= 0.0;
    Outcome {
        passed,
        detail: format!("max |KL - log m| = {worst_kl:.3e}; max (gibbs - finite) = {worst_gap:.3e} over 100 instances"),
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let scenario = Scenario::desk(Family::Gaussian, 50, 10, 10_000, 5).unwrap();
    let cfg = scenario.at_beta(4.0).unwrap();
    let path = dir.path().join("certify.json");
    std::fs::write(&path, cfg.to_json()).unwrap();
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_ewa-oracle"))
            .args(["certify", "--config"])
            .arg(&path)
            .args(["--seed", "42"])
            .env(THREADS_ENV, threads)
            .output()
            .unwrap()
    };
    let one = run("1");
    let four = run("4");
    let identical = one.stdout == four.stdout;
    Outcome {
        passed: identical && one.status.success() && four.status.success() && !one.stdout.is_empty(),
        detail: format!(
            "{} bytes, identical = {identical}, exit codes {:?}/{:?}",
            one.stdout.len(),
            one.status.code(),
            four.status.code()
        ),
    }
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("coupling identity, exact enumeration", Duration::from_secs(1), coupling_exact),
        ("coupling identity, continuous families", Duration::from_secs(30), coupling_continuous),
        ("Bernstein MGF domination", Duration::from_secs(30), bernstein_domination),
        ("threshold and penalty constants", Duration::from_secs(5), thresholds),
        ("oracle inequality certification", Duration::from_secs(120), certification),
        ("Gibbs-objective minimality", Duration::from_secs(5), dv_minimality),
        ("KL of a Dirac and bound ordering", Duration::from_secs(5), kl_and_ordering),
        ("determinism across worker counts", Duration::from_secs(60), determinism),
    ];
    let mut all = true;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let out = timed(*budget, f);
        all &= out.passed;
        println!(
            "{} criterion {}: {name}: {}",
            if out.passed { "PASS" } else { "FAIL" },
            i + 1,
            out.detail
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
