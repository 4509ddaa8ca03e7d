//! Ten worked examples, each computed through the mgf route and checked
//! against an independent oracle.

use ndarray::{array, Array2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::marginalize::{gamma_hier, gamma_marginal, gamma_single, poisson_hier, poisson_scaled, poisson_single, GammaProblem, MarginalResult, Path, PoissonProblem};
use crate::mgf::PriorMgf;
use crate::models::{build_gamma_hglm, CakeData, CakeSettings, PumpData};
use crate::optim::{fit_mmle, NelderMeadOptions, Response};
use crate::oracles::{chib_poisson_gamma, compound_gamma, compound_gamma_groups, mc_overlap_check, membership_labels, negbin_mixture, quadrature_poisson, McReport};
use crate::special_fn::SignedLogReal;

/// Relative tolerance between two closed forms.
pub const CLOSED_FORM_TOL: f64 = 1e-9;
/// Relative tolerance against a quadrature oracle.
pub const QUADRATURE_TOL: f64 = 1e-6;
/// Relative tolerance of the structural cake identity.
pub const CAKE_TOL: f64 = 1e-10;
/// Shape and random-effect hyperparameter at which the cake identity is checked.
///
/// The log terms grow like `mα`, so at much larger shapes the two routes only
/// agree to the rounding level of sums of order `10^6`.
pub const CAKE_CHECK_ALPHA: f64 = 45.0;
pub const CAKE_CHECK_XI: f64 = 34.42982;

/// Settings shared by every example run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub seed: u64,
    /// Replaces the per-example tolerance when set.
    pub tolerance_override: Option<f64>,
    pub mc_iterations: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { seed: 42, tolerance_override: None, mc_iterations: 1_000_000 }
    }
}

/// Fixed-effect fit attached to the cake example.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitSummary {
    pub a_hat: Vec<f64>,
    pub a_true: Vec<f64>,
    pub max_abs_error: f64,
    pub log_marginal: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Outcome of one worked example.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExampleReport {
    pub example: u8,
    pub title: &'static str,
    pub log_marginal: f64,
    pub sign: i8,
    pub path: Path,
    pub orders: Vec<f64>,
    pub oracle: &'static str,
    pub oracle_log: f64,
    pub abs_log_diff: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<McReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSummary>,
}

impl ExampleReport {
    fn compare(example: u8, title: &'static str, res: MarginalResult, oracle: &'static str, want: SignedLogReal, tol: f64) -> Self {
        let got = res.as_signed();
        let rel = got.rel_diff(want);
        Self {
            example,
            title,
            log_marginal: res.log_value,
            sign: res.sign,
            path: res.path,
            orders: res.orders_used,
            oracle,
            oracle_log: want.ln_abs(),
            abs_log_diff: (res.log_value - want.ln_abs()).abs(),
            tolerance: Some(tol),
            pass: rel <= tol,
            monte_carlo: None,
            fit: None,
        }
    }

    /// One human-readable paragraph.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "example {}: {}\n  mgf path ({}): {:.10e} (log {:.15})\n  {}: {:.10e} (log {:.15})\n  |log difference| = {:.3e}",
            self.example,
            self.title,
            self.path,
            (self.sign as f64) * self.log_marginal.exp(),
            self.log_marginal,
            self.oracle,
            self.oracle_log.exp(),
            self.oracle_log,
            self.abs_log_diff,
        );
        if let Some(tol) = self.tolerance {
            s += &format!(" (tolerance {tol:.0e})");
        }
        if let Some(mc) = &self.monte_carlo {
            s += &format!(
                "\n  Monte Carlo: {} hits in {} iterations, central 95% interval ({}, {})",
                mc.hits, mc.n_iter, mc.ci_low, mc.ci_high
            );
        }
        if let Some(fit) = &self.fit {
            s += &format!(
                "\n  MMLE: a = {:?}\n  generator truth: {:?}\n  max |error| = {:.4}, log marginal {:.6}, {} iterations, converged = {}",
                fit.a_hat.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(),
                fit.a_true,
                fit.max_abs_error,
                fit.log_marginal,
                fit.iterations,
                fit.converged
            );
        }
        s + &format!("\n  {}", if self.pass { "PASS" } else { "FAIL" })
    }
}

/// The overlap matrix of the three-source Poisson example.
pub fn overlap_matrix() -> Array2<f64> {
    array![[0.1, 0.0, 0.0], [0.9, 0.1, 0.0], [0.0, 0.1, 0.0], [0.0, 0.8, 0.1], [0.0, 0.0, 0.9]]
}

/// Counts observed in the three-source Poisson example.
pub const OVERLAP_COUNTS: [u64; 5] = [0, 1, 0, 2, 3];

/// Probability the three-source example is tested against.
pub const OVERLAP_P0: f64 = 0.005_745_693;

/// The three-source Poisson problem with `Gamma(4.5, 2)` sources.
pub fn overlap_problem() -> Result<PoissonProblem> {
    Ok(PoissonProblem {
        priors: vec![PriorMgf::gamma(4.5, 2.0)?; 3],
        r: Some(overlap_matrix()),
        zeta: None,
        y: OVERLAP_COUNTS.to_vec(),
    })
}

fn product(parts: impl IntoIterator<Item = Result<SignedLogReal>>) -> Result<SignedLogReal> {
    parts.into_iter().try_fold(SignedLogReal::ONE, |acc, v| Ok(acc * v?))
}

/// Runs worked example `n` (1 to 10).
pub fn run_example(n: u8, opts: &RunOptions) -> Result<ExampleReport> {
    let tol = |default: f64| opts.tolerance_override.unwrap_or(default);
    match n {
        1 => {
            let prior = PriorMgf::gamma(4.0, 5.0)?;
            let res = poisson_hier(&PoissonProblem { priors: vec![prior], r: None, zeta: None, y: vec![0] })?;
            let want = negbin_mixture(0, 4.0, 5.0, 1.0)?;
            Ok(ExampleReport::compare(1, "single zero count, Gamma(4, 5) rate", res, "negative binomial", want, tol(CLOSED_FORM_TOL)))
        }
        2 => {
            let y = vec![0, 1, 2, 3];
            let res = poisson_hier(&PoissonProblem { priors: vec![PriorMgf::gamma(6.0, 5.0)?; 4], r: None, zeta: None, y: y.clone() })?;
            let want = product(y.iter().map(|&v| negbin_mixture(v, 6.0, 5.0, 1.0)))?;
            Ok(ExampleReport::compare(2, "hierarchical Poisson, Gamma(6, 5) rates", res, "negative binomial product", want, tol(CLOSED_FORM_TOL)))
        }
        3 => {
            let y = [0, 0, 1, 2];
            let res = poisson_single(&PriorMgf::gamma(4.0, 6.0)?, &y, 1.0)?;
            let want = chib_poisson_gamma(&y, 4.0, 6.0, 1.0)?;
            Ok(ExampleReport::compare(3, "shared Poisson rate, Gamma(4, 6) prior", res, "Chib identity", want, tol(CLOSED_FORM_TOL)))
        }
        4 => {
            let problem = overlap_problem()?;
            let res = poisson_scaled(&problem)?;
            let mc = mc_overlap_check(&overlap_matrix(), &problem.priors, &OVERLAP_COUNTS, opts.mc_iterations, opts.seed, OVERLAP_P0)?;
            let freq = SignedLogReal::from_f64(mc.hits as f64 / mc.n_iter as f64);
            let mut rep = ExampleReport::compare(4, "overlapping Poisson sources", res, "Monte Carlo frequency", freq, 0.0);
            rep.tolerance = None;
            rep.pass = mc.pass;
            rep.monte_carlo = Some(mc);
            Ok(rep)
        }
        5 => {
            let pump = PumpData::load();
            let res = poisson_scaled(&pump.hierarchical_problem(PriorMgf::gamma(1.27, 0.82)?))?;
            let want = product(pump.y.iter().zip(&pump.t).map(|(&y, &t)| negbin_mixture(y, 1.27, 0.82, t)))?;
            Ok(ExampleReport::compare(5, "pump failures, Gamma(1.27, 0.82) rates", res, "negative binomial with offsets", want, tol(CLOSED_FORM_TOL)))
        }
        6 => {
            let pump = PumpData::load();
            let problem = pump.shared_rate_problem(PriorMgf::pareto(80.0, 0.01)?);
            let res = poisson_scaled(&problem)?;
            let want = quadrature_poisson(&problem)?.value;
            Ok(ExampleReport::compare(6, "pump failures, shared Pareto(80, 0.01) rate", res, "quadrature", want, tol(QUADRATURE_TOL)))
        }
        7 => {
            let res = gamma_hier(&GammaProblem { priors: vec![PriorMgf::exponential(1.0)?], alpha: vec![1.0], r: None, zeta: None, y: vec![3.4] })?;
            let want = compound_gamma(&[3.4], 1.0, 1.0, 1.0, &[1.0])?;
            Ok(ExampleReport::compare(7, "exponential observation, Exp(1) rate", res, "compound gamma", want, tol(CLOSED_FORM_TOL)))
        }
        8 => {
            let problem = GammaProblem {
                priors: vec![PriorMgf::exponential(0.9)?; 2],
                alpha: vec![1.5, 2.0],
                r: None,
                zeta: None,
                y: vec![0.4, 2.2],
            };
            let res = gamma_hier(&problem)?;
            let want = compound_gamma(&[0.4], 1.0, 0.9, 1.5, &[1.0])? * compound_gamma(&[2.2], 1.0, 0.9, 2.0, &[1.0])?;
            Ok(ExampleReport::compare(8, "gamma shapes 1.5 and 2, Exp(0.9) rates", res, "compound gamma", want, tol(CLOSED_FORM_TOL)))
        }
        9 => {
            let y = [2.7, 3.3, 3.6];
            let res = gamma_single(&PriorMgf::exponential(1.1)?, 0.5, &y, 1.0)?;
            let want = compound_gamma(&y, 1.0, 1.1, 0.5, &[1.0; 3])?;
            Ok(ExampleReport::compare(9, "shared Exp(1.1) rate, shape 0.5", res, "compound gamma", want, tol(CLOSED_FORM_TOL)))
        }
        10 => cake_example(opts, tol(CAKE_TOL)),
        _ => Err(Error::InvalidInput(format!("example must be between 1 and 10, got {n}"))),
    }
}

/// Mgf-route and grouped compound-gamma log marginals of a cake data set at `a`.
pub fn cake_identity(data: &CakeData, a: &[f64], alpha: f64, xi: f64) -> Result<(MarginalResult, SignedLogReal)> {
    let spec = data.spec(a, alpha, xi)?;
    let problem = build_gamma_hglm(&spec, &data.angle)?;
    let res = gamma_marginal(&problem)?;
    let labels = membership_labels(&spec.z)?;
    let zeta: Vec<f64> = problem.zeta.clone().unwrap_or_default();
    let want = compound_gamma_groups(&data.angle, &labels, xi, alpha, &zeta)?;
    Ok((res, want))
}

/// Fits the cake fixed effects starting from the mean log response.
pub fn fit_cake(data: &CakeData, alpha: f64, xi: f64, opts: &NelderMeadOptions) -> Result<crate::optim::OptimResult> {
    let mut start = vec![0.0; CakeData::FIXED_EFFECTS];
    start[0] = data.angle.iter().map(|v| v.ln()).sum::<f64>() / data.len() as f64;
    let spec = data.spec(&start, alpha, xi)?;
    fit_mmle(&spec, &Response::Positive(data.angle.clone()), opts)
}

fn cake_example(opts: &RunOptions, tol: f64) -> Result<ExampleReport> {
    let settings = CakeSettings { seed: opts.seed, ..CakeSettings::default() };
    let data = CakeData::generate(&settings)?;
    let (res, want) = cake_identity(&data, &settings.a, CAKE_CHECK_ALPHA, CAKE_CHECK_XI)?;
    let mut rep = ExampleReport::compare(10, "synthetic cake baking, log-link gamma HGLM", res, "grouped compound gamma", want, tol);
    let fit = fit_cake(&data, settings.alpha, settings.xi, &NelderMeadOptions::default())?;
    let max_abs_error = fit.x.iter().zip(&settings.a).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    rep.fit = Some(FitSummary {
        a_hat: fit.x,
        a_true: settings.a,
        max_abs_error,
        log_marginal: fit.value,
        iterations: fit.iterations,
        converged: fit.converged,
    });
    Ok(rep)
}
