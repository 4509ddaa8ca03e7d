//! Verification suites run by `mgfml verify`.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::marginalize::{gamma_hier, gamma_single, poisson_hier, poisson_scaled, poisson_single, GammaProblem, PoissonProblem};
use crate::mgf::{FracMethod, FracOrder, PriorMgf};
use crate::oracles::{compound_gamma, negbin_mixture, quadrature_gamma, quadrature_poisson};
use crate::special_fn::quadrature::{integrate_log, QuadOptions};
use crate::special_fn::SignedLogReal;
use crate::taylor::{LiftMethod, MgfFactor, MgfProduct};
use crate::worked::{run_example, RunOptions, QUADRATURE_TOL};

/// A verification suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    ClosedForms,
    Quadrature,
    MonteCarlo,
    Properties,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::ClosedForms => "closed-forms",
            Suite::Quadrature => "quadrature",
            Suite::MonteCarlo => "monte-carlo",
            Suite::Properties => "properties",
        }
    }
}

/// One named pass/fail result.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(suite: Suite, name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self { suite: suite.name(), name: name.into(), pass, detail: detail.into() }
    }

    fn from_result(suite: Suite, name: impl Into<String>, res: Result<(bool, String)>) -> Self {
        match res {
            Ok((pass, detail)) => Self::new(suite, name, pass, detail),
            Err(e) => Self::new(suite, name, false, format!("error: {e}")),
        }
    }
}

/// Runs every check of `suite`.
pub fn run_suite(suite: Suite, opts: &RunOptions) -> Vec<Check> {
    match suite {
        Suite::ClosedForms => [1u8, 2, 3, 5, 7, 8, 9].iter().map(|&n| example_check(suite, n, opts)).collect(),
        Suite::MonteCarlo => vec![example_check(suite, 4, opts)],
        Suite::Quadrature => quadrature_suite(opts),
        Suite::Properties => properties_suite(opts),
    }
}

fn example_check(suite: Suite, n: u8, opts: &RunOptions) -> Check {
    Check::from_result(
        suite,
        format!("example {n}"),
        run_example(n, opts).map(|r| {
            let detail = match &r.monte_carlo {
                Some(mc) => format!("{} hits, interval ({}, {})", mc.hits, mc.ci_low, mc.ci_high),
                None => format!("|log difference| {:.3e}", r.abs_log_diff),
            };
            (r.pass, detail)
        }),
    )
}

fn tol(opts: &RunOptions, default: f64) -> f64 {
    opts.tolerance_override.unwrap_or(default)
}

/// Agreement within `tol` and a quadrature error estimate no smaller than a
/// tenth of the true error.
fn quad_agrees(est: crate::oracles::QuadEstimate, exact: SignedLogReal, tol: f64) -> (bool, String) {
    let err = est.value.rel_diff(exact);
    (err <= tol && err <= 10.0 * est.rel_error, format!("relative error {err:.2e}, estimate {:.2e}", est.rel_error))
}

fn quadrature_suite(opts: &RunOptions) -> Vec<Check> {
    let s = Suite::Quadrature;
    let t = tol(opts, QUADRATURE_TOL);
    let mut out = vec![example_check(s, 6, opts)];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for i in 0..5 {
        let (a, b, z, y) = (rng.random_range(0.5..6.0), rng.random_range(0.3..4.0), rng.random_range(0.2..3.0), rng.random_range(0..8u64));
        out.push(Check::from_result(s, format!("gamma-Poisson vs negative binomial #{i}"), (|| {
            let p = PoissonProblem { priors: vec![PriorMgf::gamma(a, b)?], r: None, zeta: Some(vec![z]), y: vec![y] };
            Ok(quad_agrees(quadrature_poisson(&p)?, negbin_mixture(y, a, b, z)?, t))
        })()));
    }
    for i in 0..5 {
        let (lam, alpha) = (rng.random_range(0.3..3.0), rng.random_range(0.5..4.0));
        let y: Vec<f64> = (0..2).map(|_| rng.random_range(0.1..5.0)).collect();
        out.push(Check::from_result(s, format!("exponential-gamma vs compound gamma #{i}"), (|| {
            let p = GammaProblem { priors: vec![PriorMgf::exponential(lam)?], alpha: vec![alpha; 2], r: Some(Array2::ones((2, 1))), zeta: None, y: y.clone() };
            Ok(quad_agrees(quadrature_gamma(&p)?, compound_gamma(&y, 1.0, lam, alpha, &[1.0; 2])?, t))
        })()));
    }
    for i in 0..3 {
        let (a, b) = (rng.random_range(1.0..5.0), rng.random_range(0.5..3.0));
        let r = Array2::from_shape_fn((3, 2), |_| rng.random_range(0.0..1.0));
        let y: Vec<u64> = (0..3).map(|_| rng.random_range(0..3u64)).collect();
        out.push(Check::from_result(s, format!("two overlapping effects vs series #{i}"), (|| {
            let p = PoissonProblem { priors: vec![PriorMgf::gamma(a, b)?; 2], r: Some(r.clone()), zeta: None, y: y.clone() };
            Ok(quad_agrees(quadrature_poisson(&p)?, poisson_scaled(&p)?.as_signed(), t))
        })()));
    }
    out
}

fn properties_suite(opts: &RunOptions) -> Vec<Check> {
    let s = Suite::Properties;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    vec![
        Check::from_result(s, "gamma mgf derivative recursion, k <= 30", recursion(&mut rng, tol(opts, 1e-12))),
        Check::from_result(s, "fractional route at integer orders", fractional_vs_integer(&mut rng, tol(opts, 1e-7))),
        Check::from_result(s, "shared-rate Poisson dual forms, 50 instances", poisson_dual(&mut rng)),
        Check::from_result(s, "shared-rate gamma dual forms, 50 instances", gamma_dual(&mut rng)),
        Check::from_result(s, "mixed partial permutation invariance", permutation(&mut rng, tol(opts, 1e-10))),
        Check::from_result(s, "normalization deficit", normalization(tol(opts, 1e-8))),
        Check::from_result(s, "finite-difference derivatives", finite_differences(&mut rng, tol(opts, 1e-5))),
    ]
}

fn worst(errors: impl IntoIterator<Item = f64>) -> f64 {
    errors.into_iter().fold(0.0, f64::max)
}

fn verdict(err: f64, tol: f64) -> Result<(bool, String)> {
    Ok((err <= tol, format!("worst relative error {err:.2e}")))
}

fn recursion(rng: &mut ChaCha8Rng, tol: f64) -> Result<(bool, String)> {
    let mut errs = Vec::new();
    for _ in 0..20 {
        let (a, b) = (rng.random_range(0.2..10.0), rng.random_range(0.2..10.0));
        let t = rng.random_range(-20.0..0.9 * b);
        let p = PriorMgf::gamma(a, b)?;
        let mut prev = p.deriv_int(0, t)?;
        for k in 0..30u32 {
            let next = p.deriv_int(k + 1, t)?;
            let want = prev * SignedLogReal::from_f64((a + k as f64) / (b - t));
            errs.push(next.rel_diff(want));
            prev = next;
        }
    }
    verdict(worst(errs), tol)
}

fn fractional_vs_integer(rng: &mut ChaCha8Rng, tol: f64) -> Result<(bool, String)> {
    let mut errs = Vec::new();
    for _ in 0..10 {
        let p = PriorMgf::gamma(rng.random_range(0.5..6.0), rng.random_range(0.5..4.0))?;
        let t = rng.random_range(-5.0..0.0);
        for k in 1..=4u32 {
            let frac = p.deriv_frac_with(FracOrder::integer(k), t, FracMethod::MellinUnderIntegral)?;
            errs.push(frac.rel_diff(p.deriv_int(k, t)?));
        }
    }
    verdict(worst(errs), tol)
}

fn poisson_dual(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    for _ in 0..50 {
        let p = PriorMgf::gamma(rng.random_range(0.5..8.0), rng.random_range(0.3..5.0))?;
        let n = rng.random_range(1..6usize);
        let y: Vec<u64> = (0..n).map(|_| rng.random_range(0..6u64)).collect();
        poisson_single(&p, &y, rng.random_range(0.2..3.0))?;
    }
    Ok((true, "all instances agree".into()))
}

fn gamma_dual(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    for _ in 0..50 {
        let p = PriorMgf::gamma(rng.random_range(0.5..6.0), rng.random_range(0.3..4.0))?;
        let n = rng.random_range(1..4usize);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..4.0)).collect();
        gamma_single(&p, rng.random_range(0.3..3.0), &y, rng.random_range(0.3..2.0))?;
    }
    Ok((true, "all instances agree".into()))
}

fn permutation(rng: &mut ChaCha8Rng, tol: f64) -> Result<(bool, String)> {
    let mut errs = Vec::new();
    for _ in 0..10 {
        let factors = (0..3)
            .map(|_| {
                Ok(MgfFactor {
                    prior: PriorMgf::gamma(rng.random_range(0.5..5.0), rng.random_range(0.5..3.0))?,
                    weights: (0..4).map(|_| rng.random_range(0.0..1.0)).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let f = MgfProduct::new(4, factors)?;
        let orders: Vec<u32> = (0..4).map(|_| rng.random_range(1..4u32)).collect();
        let t: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..0.0)).collect();
        let base = f.mixed_partial_dense_ordered(&orders, &t, LiftMethod::Native, &[0, 1, 2, 3])?;
        for axes in [[3, 2, 1, 0], [1, 3, 0, 2], [2, 0, 3, 1]] {
            errs.push(f.mixed_partial_dense_ordered(&orders, &t, LiftMethod::Native, &axes)?.rel_diff(base));
        }
    }
    verdict(worst(errs), tol)
}

fn normalization(tol: f64) -> Result<(bool, String)> {
    let prior = PriorMgf::gamma(2.5, 1.5)?;
    let counts: Vec<SignedLogReal> = (0..400u64)
        .map(|y| Ok(poisson_hier(&PoissonProblem { priors: vec![prior], r: None, zeta: None, y: vec![y] })?.as_signed()))
        .collect::<Result<_>>()?;
    let poisson_deficit = (1.0 - SignedLogReal::sum_slice(&counts).to_f64()).abs();
    let exp = PriorMgf::exponential(0.9)?;
    let density = |ln_y: f64| {
        let p = GammaProblem { priors: vec![exp], alpha: vec![1.5], r: None, zeta: None, y: vec![ln_y.exp()] };
        gamma_hier(&p).map_or(f64::NAN, |r| r.log_value + ln_y)
    };
    let total = integrate_log(density, f64::NEG_INFINITY, f64::INFINITY, 0.0, 1.0, &QuadOptions::with_rel_tol(1e-12))?;
    let gamma_deficit = total.ln_value.abs();
    let err = poisson_deficit.max(gamma_deficit);
    Ok((err <= tol, format!("Poisson deficit {poisson_deficit:.2e}, fractional gamma deficit {gamma_deficit:.2e}")))
}

fn finite_differences(rng: &mut ChaCha8Rng, tol: f64) -> Result<(bool, String)> {
    let mut errs = Vec::new();
    for _ in 0..20 {
        let p = match rng.random_range(0..3) {
            0 => PriorMgf::gamma(rng.random_range(0.5..6.0), rng.random_range(0.5..4.0))?,
            1 => PriorMgf::exponential(rng.random_range(0.5..4.0))?,
            _ => PriorMgf::pareto(rng.random_range(3.0..10.0), rng.random_range(0.2..2.0))?,
        };
        let t = rng.random_range(-4.0..-0.5);
        let h = 1e-4;
        for k in 0..4u32 {
            let up = p.deriv_int(k, t + h)?.to_f64();
            let down = p.deriv_int(k, t - h)?.to_f64();
            let fd = (up - down) / (2.0 * h);
            errs.push(SignedLogReal::from_f64(fd).rel_diff(p.deriv_int(k + 1, t)?));
        }
    }
    verdict(worst(errs), tol)
}

/// Total passes and failures.
pub fn tally(checks: &[Check]) -> (usize, usize) {
    let pass = checks.iter().filter(|c| c.pass).count();
    (pass, checks.len() - pass)
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed-forms" => Ok(Suite::ClosedForms),
            "quadrature" => Ok(Suite::Quadrature),
            "monte-carlo" => Ok(Suite::MonteCarlo),
            "properties" => Ok(Suite::Properties),
            _ => Err(Error::InvalidInput(format!("unknown suite {s:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms_suite_passes() {
        let checks = run_suite(Suite::ClosedForms, &RunOptions::default());
        assert_eq!(tally(&checks), (7, 0), "{checks:#?}");
    }

    #[test]
    fn quadrature_suite_passes() {
        let checks = run_suite(Suite::Quadrature, &RunOptions::default());
        assert!(checks.iter().all(|c| c.pass), "{checks:#?}");
    }

    #[test]
    fn properties_suite_passes() {
        let checks = run_suite(Suite::Properties, &RunOptions::default());
        assert!(checks.iter().all(|c| c.pass), "{checks:#?}");
    }

    #[test]
    fn suite_names_round_trip() {
        for s in [Suite::ClosedForms, Suite::Quadrature, Suite::MonteCarlo, Suite::Properties] {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
    }
}
