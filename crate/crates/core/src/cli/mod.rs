//! Command-line front end of `mgfml`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 verification failure.

mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::optim::{fit_mmle, marginal, NelderMeadOptions};
use crate::verify::{run_suite, tally, Suite};
use crate::worked::{run_example, RunOptions};

pub use config::{Builtin, DataConfig, ModelConfig, ProblemConfig, RegressionConfig, RunConfig, Shapes};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

/// Output style.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Text,
    /// One JSON object per line.
    Records,
}

#[derive(Debug, Parser)]
#[command(name = "mgfml", version, about = "Exact marginal likelihoods through prior mgf derivatives")]
struct Cli {
    #[arg(long, value_enum, global = true)]
    format: Option<Format>,
    /// Seed for Monte Carlo and synthetic data [default: 42].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Relative tolerance replacing the built-in ones.
    #[arg(long, global = true)]
    tolerance_override: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reproduce a worked example and check it against its oracle.
    Example {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=10))]
        n: u8,
    },
    /// Compute a marginal likelihood described by a TOML file.
    Marginal {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fit fixed effects by maximizing the marginal likelihood.
    FitMmle {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run verification suites.
    Verify {
        #[arg(value_enum, required = true)]
        suites: Vec<Suite>,
    },
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    if let Some(t) = cli.tolerance_override {
        if !(t >= 0.0 && t.is_finite()) {
            let _ = writeln!(err, "error: --tolerance-override must be a non-negative number");
            return EXIT_USAGE;
        }
    }
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Config(_) | Error::Io(_) | Error::Parse { .. } | Error::InvalidInput(_) | Error::Dimension(_) => EXIT_USAGE,
                _ => EXIT_FAILED,
            }
        }
    }
}

fn emit(out: &mut dyn Write, line: &str) -> Result<()> {
    writeln!(out, "{line}").map_err(Error::from)
}

fn record<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| Error::Io(e.to_string()))
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    let opts = RunOptions { seed: cli.seed.unwrap_or(42), tolerance_override: cli.tolerance_override, ..RunOptions::default() };
    match &cli.command {
        Command::Example { n } => {
            let rep = run_example(*n, &opts)?;
            match cli.format.unwrap_or_default() {
                Format::Text => emit(out, &rep.to_text())?,
                Format::Records => emit(out, &record(&rep)?)?,
            }
            Ok(if rep.pass { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Marginal { config } => {
            let cfg = RunConfig::load(config)?;
            let format = cli.format.or(cfg.output.format).unwrap_or_default();
            let table = cfg.table(cli.seed)?;
            let start = Instant::now();
            let res = match &cfg.model {
                ModelConfig::Poisson(p) => p.poisson(&table)?,
                ModelConfig::Gamma(p) => p.gamma(&table)?,
                ModelConfig::Regression(r) => {
                    let (spec, response) = r.build(&table)?;
                    marginal(&spec, &response)?
                }
            };
            let seconds = start.elapsed().as_secs_f64();
            match format {
                Format::Text => emit(
                    out,
                    &format!(
                        "log marginal likelihood: {:.15}\nmarginal likelihood:     {}\npath: {}\norders: {}\ntime: {:.3e} s",
                        res.log_value,
                        plain_value(res.value()),
                        res.path,
                        short_list(&res.orders_used),
                        seconds
                    ),
                )?,
                Format::Records => emit(
                    out,
                    &record(&json!({
                        "log_marginal": res.log_value,
                        "sign": res.sign,
                        "path": res.path,
                        "orders": res.orders_used,
                        "seconds": seconds,
                    }))?,
                )?,
            }
            Ok(EXIT_OK)
        }
        Command::FitMmle { config } => {
            let cfg = RunConfig::load(config)?;
            let format = cli.format.or(cfg.output.format).unwrap_or_default();
            let ModelConfig::Regression(reg) = &cfg.model else {
                return Err(Error::Config("model.type: fit-mmle needs a regression model".into()));
            };
            let table = cfg.table(cli.seed)?;
            let (mut spec, response) = reg.build(&table)?;
            if reg.start.is_none() && reg.link == crate::models::Link::Log && reg.fixed.first().is_some_and(|t| t == "intercept") {
                spec.a[0] = initial_intercept(&response);
            }
            let start = Instant::now();
            let fit = fit_mmle(&spec, &response, &NelderMeadOptions::default())?;
            let seconds = start.elapsed().as_secs_f64();
            match format {
                Format::Text => emit(
                    out,
                    &format!(
                        "fixed effects: {:?}\nlog marginal likelihood: {:.10}\niterations: {}\nevaluations: {}\nconverged: {}\ntime: {:.3} s",
                        fit.x, fit.value, fit.iterations, fit.evaluations, fit.converged, seconds
                    ),
                )?,
                Format::Records => emit(
                    out,
                    &record(&json!({
                        "a_hat": fit.x,
                        "log_marginal": fit.value,
                        "iterations": fit.iterations,
                        "evaluations": fit.evaluations,
                        "converged": fit.converged,
                        "seconds": seconds,
                    }))?,
                )?,
            }
            Ok(if fit.converged { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Verify { suites } => {
            let format = cli.format.unwrap_or_default();
            let mut all = Vec::new();
            for &suite in suites {
                let checks = run_suite(suite, &opts);
                for c in &checks {
                    match format {
                        Format::Text => emit(out, &format!("[{}] {}: {} ({})", if c.pass { "PASS" } else { "FAIL" }, c.suite, c.name, c.detail))?,
                        Format::Records => emit(out, &record(c)?)?,
                    }
                }
                all.extend(checks);
            }
            let (pass, fail) = tally(&all);
            match format {
                Format::Text => emit(out, &format!("{pass} passed, {fail} failed"))?,
                Format::Records => emit(out, &record(&json!({ "passed": pass, "failed": fail }))?)?,
            }
            Ok(if fail == 0 { EXIT_OK } else { EXIT_FAILED })
        }
    }
}

fn plain_value(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        "outside the f64 range (see the log value)".into()
    } else {
        format!("{v:.10e}")
    }
}

fn short_list(v: &[f64]) -> String {
    if v.len() <= 12 {
        return format!("{v:?}");
    }
    format!("{:?} ... ({} entries, total {})", &v[..6], v.len(), v.iter().sum::<f64>())
}

/// Mean log response, a starting value for a log-link intercept.
fn initial_intercept(response: &crate::optim::Response) -> f64 {
    let logs: Vec<f64> = match response {
        crate::optim::Response::Positive(y) => y.iter().map(|v| v.ln()).collect(),
        crate::optim::Response::Counts(y) => y.iter().map(|&v| (v as f64 + 0.5).ln()).collect(),
    };
    logs.iter().sum::<f64>() / logs.len().max(1) as f64
}
