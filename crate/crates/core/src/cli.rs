//! Command-line front end.
//!
//! Every subcommand reads a JSON experiment config (plus optional
//! per-subcommand keys), runs the matching operation and writes CSV or JSON.
//! Exit status: 0 when every verdict passes, 1 when one fails, 2 on bad input.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{Map, Value};

use crate::bernstein::{beta_threshold, profile_for, verify_bernstein, variance_penalty_coefficient, T_GRID_POINTS};
use crate::coupling::{verify_coupling, Method};
use crate::error::{Error, Result};
use crate::ewa::{dv_minimality_test, DV_TOLERANCE};
use crate::model::{sup_diameter, ExperimentConfig, SupportDiameter};
use crate::noise::{sample_noise, NoiseModel};
use crate::oracle::{mc_risk_with_diameter, oracle_bound_finite, oracle_bound_gibbs, Mode};
use crate::report::{render, BoundSummary, DvSummary, Format, Seeded};
use crate::rng::{stream_rng, streams, threads_from_env, with_threads};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_INPUT: u8 = 2;

const DEFAULT_ALPHA_GRID: [f64; 3] = [0.1, 0.5, 1.0];
const DEFAULT_SAMPLE_SIZE: usize = 1_000_000;
const DEFAULT_TRIALS: usize = 100;
const DEFAULT_INSTANCES: usize = 10;

#[derive(Debug, Parser)]
#[command(name = "ewa-oracle", version, about = "Exponentially weighted aggregation: coupling, Bernstein and oracle-inequality checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: SubcommandArgs,
}

#[derive(Debug, Subcommand)]
pub enum SubcommandArgs {
    /// Monte Carlo risk of EWA for the configured beta.
    Simulate(CommonArgs),
    /// Certify the oracle inequality at the configured beta.
    Certify(CommonArgs),
    /// Check the noise coupling on an alpha grid.
    VerifyCoupling(CommonArgs),
    /// Check the Bernstein MGF bound on an alpha grid.
    VerifyBernstein(CommonArgs),
    /// Check that the posterior weights minimize the Gibbs objective.
    DvCheck(CommonArgs),
    /// Print the exact oracle bounds of the configuration.
    OracleBound(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON experiment config.
    #[arg(long)]
    pub config: PathBuf,
    /// Output file (default: standard output).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubcommandKind {
    Simulate,
    Certify,
    VerifyCoupling,
    VerifyBernstein,
    DvCheck,
    OracleBound,
}

impl std::str::FromStr for SubcommandKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simulate" => Ok(SubcommandKind::Simulate),
            "certify" => Ok(SubcommandKind::Certify),
            "verify-coupling" => Ok(SubcommandKind::VerifyCoupling),
            "verify-bernstein" => Ok(SubcommandKind::VerifyBernstein),
            "dv-check" => Ok(SubcommandKind::DvCheck),
            "oracle-bound" => Ok(SubcommandKind::OracleBound),
            other => Err(Error::invalid(format!("unknown subcommand {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CliCommand {
    pub subcommand: SubcommandKind,
    pub config_path: PathBuf,
    pub output_path: Option<PathBuf>,
    pub seed_override: Option<u64>,
    pub format: Format,
}

impl From<Cli> for CliCommand {
    fn from(cli: Cli) -> Self {
        let (kind, args) = match cli.command {
            SubcommandArgs::Simulate(a) => (SubcommandKind::Simulate, a),
            SubcommandArgs::Certify(a) => (SubcommandKind::Certify, a),
            SubcommandArgs::VerifyCoupling(a) => (SubcommandKind::VerifyCoupling, a),
            SubcommandArgs::VerifyBernstein(a) => (SubcommandKind::VerifyBernstein, a),
            SubcommandArgs::DvCheck(a) => (SubcommandKind::DvCheck, a),
            SubcommandArgs::OracleBound(a) => (SubcommandKind::OracleBound, a),
        };
        CliCommand {
            subcommand: kind,
            config_path: args.config,
            output_path: args.output,
            seed_override: args.seed,
            format: args.format,
        }
    }
}

/// Rendered report and whether every verdict in it passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub text: String,
    pub passed: bool,
}

/// Runs `command`, writes its report and returns the exit status.
pub fn run(command: &CliCommand) -> u8 {
    let result = threads_from_env().and_then(|threads| {
        let text = std::fs::read_to_string(&command.config_path).map_err(|e| {
            Error::invalid(format!("config: cannot read {}: {e}", command.config_path.display()))
        })?;
        with_threads(threads, || execute(command.subcommand, &text, command.seed_override, command.format))
    });
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
    };
    let written = match &command.output_path {
        Some(path) => std::fs::write(path, &outcome.text)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(outcome.text.as_bytes())
                .map_err(|e| format!("cannot write to standard output: {e}"))
        }
    };
    if let Err(msg) = written {
        eprintln!("error: {msg}");
        return EXIT_INPUT;
    }
    if outcome.passed {
        EXIT_PASS
    } else {
        eprintln!("verification failed");
        EXIT_FAIL
    }
}

/// Runs one subcommand on the JSON config text.
pub fn execute(kind: SubcommandKind, config_text: &str, seed_override: Option<u64>, format: Format) -> Result<Outcome> {
    let value: Value =
        serde_json::from_str(config_text).map_err(|e| Error::invalid(format!("config is not valid JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::invalid("config must be a JSON object"))?;
    let ext = Extensions(obj);
    match kind {
        SubcommandKind::Simulate | SubcommandKind::Certify => {
            let cfg = full_config(&value, seed_override)?;
            let d0 = ext.diameter(&cfg)?;
            let mode = if kind == SubcommandKind::Simulate {
                ext.mode()?.unwrap_or(Mode::Clean)
            } else if cfg.beta >= beta_threshold(&profile_for(&cfg.noise), d0) {
                Mode::Clean
            } else {
                Mode::VariancePenalty
            };
            let report = mc_risk_with_diameter(&cfg, mode, d0)?;
            let passed = report.passed;
            Ok(Outcome {
                text: render(&[report], format)?,
                passed,
            })
        }
        SubcommandKind::VerifyCoupling => {
            let (noise, seed) = noise_only(obj, seed_override)?;
            let method = ext.method()?.unwrap_or_else(|| Method::default_for(noise.family()));
            let n = ext.sample_size()?;
            let rows = ext
                .alpha_grid()?
                .into_iter()
                .map(|alpha| {
                    verify_coupling(&noise, alpha, method, n, seed).map(|report| Seeded { report, seed })
                })
                .collect::<Result<Vec<_>>>()?;
            let passed = rows.iter().all(|r| r.report.passed);
            Ok(Outcome {
                text: render(&rows, format)?,
                passed,
            })
        }
        SubcommandKind::VerifyBernstein => {
            let (noise, seed) = noise_only(obj, seed_override)?;
            let points = ext.t_grid_points()?;
            let n = ext.sample_size()?;
            let rows = ext
                .alpha_grid()?
                .into_iter()
                .map(|alpha| {
                    verify_bernstein(&noise, alpha, points, n, seed).map(|report| Seeded { report, seed })
                })
                .collect::<Result<Vec<_>>>()?;
            let passed = rows.iter().all(|r| r.report.passed);
            Ok(Outcome {
                text: render(&rows, format)?,
                passed,
            })
        }
        SubcommandKind::DvCheck => {
            let cfg = full_config(&value, seed_override)?;
            let trials = ext.positive("trials", DEFAULT_TRIALS)?;
            let instances = ext.positive("instances", DEFAULT_INSTANCES)?;
            let reports = (0..instances)
                .into_par_iter()
                .map(|r| {
                    let mut rng = stream_rng(cfg.seed, streams::DV + r as u64);
                    let y = cfg.truth.add(&sample_noise(&cfg.noise, &mut rng));
                    dv_minimality_test(&y, &cfg.dictionary, &cfg.prior, cfg.beta, trials, &mut rng)
                })
                .collect::<Result<Vec<_>>>()?;
            let summary = DvSummary {
                family: cfg.noise.family(),
                n: cfg.dictionary.dim(),
                m: cfg.dictionary.len(),
                beta: cfg.beta,
                instances,
                trials,
                worst_violation: reports.iter().map(|r| r.worst_violation).fold(f64::NEG_INFINITY, f64::max),
                tolerance: DV_TOLERANCE,
                passed: reports.iter().all(|r| r.passed),
                seed: cfg.seed,
            };
            let passed = summary.passed;
            Ok(Outcome {
                text: render(&[summary], format)?,
                passed,
            })
        }
        SubcommandKind::OracleBound => {
            let cfg = full_config(&value, seed_override)?;
            let d0 = ext.diameter(&cfg)?;
            let profile = profile_for(&cfg.noise);
            let summary = BoundSummary {
                family: cfg.noise.family(),
                n: cfg.dictionary.dim(),
                m: cfg.dictionary.len(),
                beta: cfg.beta,
                diameter: d0.value(),
                threshold: beta_threshold(&profile, d0),
                penalty_coefficient: variance_penalty_coefficient(cfg.beta, &profile, d0).ok(),
                bound_finite: oracle_bound_finite(&cfg.dictionary, &cfg.truth, &cfg.prior, cfg.beta)?,
                bound_gibbs: oracle_bound_gibbs(&cfg.dictionary, &cfg.truth, &cfg.prior, cfg.beta)?,
                seed: cfg.seed,
            };
            Ok(Outcome {
                text: render(&[summary], format)?,
                passed: true,
            })
        }
    }
}

fn full_config(value: &Value, seed_override: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = serde_json::from_value(value.clone()).map_err(|e| Error::invalid(e.to_string()))?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// The coupling and Bernstein checks only need the noise law and a seed.
fn noise_only(obj: &Map<String, Value>, seed_override: Option<u64>) -> Result<(NoiseModel, u64)> {
    let noise = obj
        .get("noise")
        .ok_or_else(|| Error::invalid("missing field `noise`"))?;
    let noise: NoiseModel =
        serde_json::from_value(noise.clone()).map_err(|e| Error::invalid(format!("noise: {e}")))?;
    noise.validate().map_err(|e| Error::invalid(format!("noise: {e}")))?;
    let seed = match (seed_override, obj.get("seed")) {
        (Some(s), _) => s,
        (None, None) => 0,
        (None, Some(v)) => v
            .as_u64()
            .ok_or_else(|| Error::invalid("seed must be a nonnegative integer"))?,
    };
    Ok((noise, seed))
}

struct Extensions<'a>(&'a Map<String, Value>);

impl Extensions<'_> {
    fn alpha_grid(&self) -> Result<Vec<f64>> {
        let Some(v) = self.0.get("alpha_grid") else {
            return Ok(DEFAULT_ALPHA_GRID.to_vec());
        };
        let bad = || Error::invalid("alpha_grid must be a nonempty array of numbers in (0, 1]");
        let arr = v.as_array().filter(|a| !a.is_empty()).ok_or_else(bad)?;
        arr.iter()
            .map(|x| x.as_f64().filter(|a| *a > 0.0 && *a <= 1.0).ok_or_else(bad))
            .collect()
    }

    fn positive(&self, key: &str, default: usize) -> Result<usize> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .filter(|n| *n >= 1)
                .map(|n| n as usize)
                .ok_or_else(|| Error::invalid(format!("{key} must be a positive integer"))),
        }
    }

    fn sample_size(&self) -> Result<usize> {
        let n = self.positive("sample_size", DEFAULT_SAMPLE_SIZE)?;
        if n < 2 {
            return Err(Error::invalid("sample_size must be at least 2"));
        }
        Ok(n)
    }

    fn t_grid_points(&self) -> Result<usize> {
        let n = self.positive("t_grid_points", T_GRID_POINTS)?;
        if n < 2 {
            return Err(Error::invalid("t_grid_points must be at least 2"));
        }
        Ok(n)
    }

    fn string(&self, key: &str) -> Result<Option<&str>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_str()
                .map(Some)
                .ok_or_else(|| Error::invalid(format!("{key} must be a string"))),
        }
    }

    fn method(&self) -> Result<Option<Method>> {
        self.string("method")?.map(str::parse).transpose()
    }

    fn mode(&self) -> Result<Option<Mode>> {
        self.string("mode")?.map(str::parse).transpose()
    }

    /// `diameter` if given, else the diameter of the dictionary support.
    fn diameter(&self, cfg: &ExperimentConfig) -> Result<SupportDiameter> {
        match self.0.get("diameter") {
            None => Ok(sup_diameter(&cfg.dictionary)),
            Some(v) => {
                let d = v
                    .as_f64()
                    .ok_or_else(|| Error::invalid("diameter must be a nonnegative number"))?;
                SupportDiameter::new(d).map_err(|e| Error::invalid(format!("diameter: {e}")))
            }
        }
    }
}
