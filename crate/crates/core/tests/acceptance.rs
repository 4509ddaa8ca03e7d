//! Worked-example acceptance run. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

use std::io::Write;
use std::time::Instant;

use mgf_marginal::error::Result;
use mgf_marginal::marginalize::{gamma_hier, gamma_single, poisson_hier, poisson_scaled, poisson_single, GammaProblem, PoissonProblem};
use mgf_marginal::mgf::PriorMgf;
use mgf_marginal::models::{CakeData, CakeSettings, PumpData};
use mgf_marginal::optim::NelderMeadOptions;
use mgf_marginal::oracles::{
    chib_poisson_gamma, compound_gamma, ln_poisson_prefactor, mc_overlap_check, negbin_mixture, quadrature_poisson,
};
use mgf_marginal::special_fn::SignedLogReal;
use mgf_marginal::verify::{run_suite, Suite};
use mgf_marginal::worked::{cake_identity, fit_cake, overlap_matrix, overlap_problem, RunOptions, OVERLAP_COUNTS, OVERLAP_P0};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn negbin_product(y: &[u64], size: f64, rate: f64, t: &[f64]) -> Result<SignedLogReal> {
    let mut acc = SignedLogReal::from_f64(1.0);
    for (&yi, &ti) in y.iter().zip(t) {
        acc = acc * negbin_mixture(yi, size, rate, ti)?;
    }
    Ok(acc)
}

fn criterion_1() -> Result<Outcome> {
    let problem = PoissonProblem { priors: vec![PriorMgf::gamma(4.0, 5.0)?], r: None, zeta: None, y: vec![0] };
    let res = poisson_hier(&problem)?;
    let oracle = negbin_mixture(0, 4.0, 5.0, 1.0)?;
    let reps = 1000;
    let start = Instant::now();
    for _ in 0..reps {
        std::hint::black_box(poisson_hier(std::hint::black_box(&problem))?);
    }
    let per_call = start.elapsed().as_secs_f64() / reps as f64;
    let diff = (res.log_value - oracle.ln_abs()).abs();
    let pass = rel(res.value(), 0.4822531) < 5e-7 && diff <= 1e-9 && per_call < 1e-3;
    Ok(Outcome { pass, detail: format!("p = {:.10}, |log diff| = {diff:.1e}, {per_call:.1e} s per call", res.value()) })
}

fn criterion_2() -> Result<Outcome> {
    let y = vec![0, 1, 2, 3];
    let problem = PoissonProblem { priors: vec![PriorMgf::gamma(6.0, 5.0)?; 4], r: None, zeta: None, y: y.clone() };
    let res = poisson_hier(&problem)?;
    let oracle = negbin_product(&y, 6.0, 5.0, &[1.0; 4])?;
    let r = rel(res.value(), oracle.to_f64());
    let pass = rel(res.value(), 0.001902397) < 5e-7 && r <= 1e-9;
    Ok(Outcome { pass, detail: format!("p = {:.12}, relative diff {r:.1e}", res.value()) })
}

fn criterion_3() -> Result<Outcome> {
    let y = [0, 0, 1, 2];
    let res = poisson_single(&PriorMgf::gamma(4.0, 6.0)?, &y, 1.0)?;
    let chib: Vec<f64> =
        [0.5, 1.0, 2.0, 5.0].iter().map(|&l| chib_poisson_gamma(&y, 4.0, 6.0, l).map(|v| v.ln_abs())).collect::<Result<_>>()?;
    let spread = chib.iter().cloned().fold(f64::MIN, f64::max) - chib.iter().cloned().fold(f64::MAX, f64::min);
    let diff = (res.log_value - chib[1]).abs();
    let pass = rel(res.value(), 0.007776) < 1e-9 && diff <= 1e-9 && spread <= 1e-12;
    Ok(Outcome { pass, detail: format!("p = {:.12}, vs Chib {diff:.1e}, Chib spread {spread:.1e}", res.value()) })
}

/// Exact multinomial expansion of the overlap example, evaluated at 40 digits.
const OVERLAP_EXACT: f64 = 0.005_745_692_565_544_901;

fn criterion_4() -> Result<Outcome> {
    let problem = overlap_problem()?;
    let res = poisson_scaled(&problem)?;
    // The published figure has seven significant digits.
    let printed = (res.value() - OVERLAP_P0).abs() <= 5e-10;
    let r = rel(res.value(), OVERLAP_EXACT);
    let start = Instant::now();
    let mc = mc_overlap_check(&overlap_matrix(), &problem.priors, &OVERLAP_COUNTS, 1_000_000, 42, OVERLAP_P0)?;
    let secs = start.elapsed().as_secs_f64();
    let pass = r <= 1e-8 && printed && (mc.ci_low, mc.ci_high) == (5598, 5894) && mc.pass && secs < 30.0;
    Ok(Outcome {
        pass,
        detail: format!(
            "p = {:.10} ({}), relative {r:.1e}; MC {} hits in ({}, {}), {secs:.2} s",
            res.value(),
            res.path,
            mc.hits,
            mc.ci_low,
            mc.ci_high
        ),
    })
}

fn criterion_5() -> Result<Outcome> {
    let pump = PumpData::load();
    let res = poisson_scaled(&pump.hierarchical_problem(PriorMgf::gamma(1.27, 0.82)?))?;
    let oracle = negbin_product(&pump.y, 1.27, 0.82, &pump.t)?;
    let diff = (res.log_value - oracle.ln_abs()).abs();
    let pass = rel(res.value(), 2.766569e-16) < 5e-7 && diff <= 1e-12;
    Ok(Outcome { pass, detail: format!("p = {:.7e}, |log diff| = {diff:.1e}", res.value()) })
}

fn criterion_6() -> Result<Outcome> {
    let pump = PumpData::load();
    let prefactor = ln_poisson_prefactor(&pump.y, &pump.t)?;
    let target = 2.799194e48f64.ln();
    let r_pre = rel(prefactor, target);
    let problem = pump.shared_rate_problem(PriorMgf::pareto(80.0, 0.01)?);
    let res = poisson_scaled(&problem)?;
    let quad = quadrature_poisson(&problem)?;
    let r_full = (res.log_value - quad.value.ln_abs()).abs();
    let pass = r_pre <= 1e-6 && r_full <= 1e-6;
    Ok(Outcome { pass, detail: format!("prefactor relative {r_pre:.1e}, marginal vs quadrature {r_full:.1e}") })
}

fn criterion_7() -> Result<Outcome> {
    let ex7 = gamma_hier(&GammaProblem {
        priors: vec![PriorMgf::exponential(1.0)?],
        alpha: vec![1.0],
        r: None,
        zeta: None,
        y: vec![3.4],
    })?;
    let o7 = compound_gamma(&[3.4], 1.0, 1.0, 1.0, &[1.0])?;
    let ex8 = gamma_hier(&GammaProblem {
        priors: vec![PriorMgf::exponential(0.9)?; 2],
        alpha: vec![1.5, 2.0],
        r: None,
        zeta: None,
        y: vec![0.4, 2.2],
    })?;
    let o8 = compound_gamma(&[0.4], 1.0, 0.9, 1.5, &[1.0])? * compound_gamma(&[2.2], 1.0, 0.9, 2.0, &[1.0])?;
    let ex9 = gamma_single(&PriorMgf::exponential(1.1)?, 0.5, &[2.7, 3.3, 3.6], 1.0)?;
    let o9 = compound_gamma(&[2.7, 3.3, 3.6], 1.0, 1.1, 0.5, &[1.0; 3])?;
    let pairs = [(ex7.value(), o7.to_f64(), 1.0 / (4.4f64 * 4.4)), (ex8.value(), o8.to_f64(), 0.05890003), (ex9.value(), o9.to_f64(), 0.0001238097)];
    let worst = pairs.iter().map(|&(m, o, _)| rel(m, o)).fold(0.0, f64::max);
    let printed = pairs.iter().all(|&(m, _, p)| rel(m, p) < 5e-7);
    Ok(Outcome {
        pass: worst <= 1e-9 && printed,
        detail: format!("values {:.10}, {:.10}, {:.10e}; worst relative {worst:.1e}", pairs[0].0, pairs[1].0, pairs[2].0),
    })
}

fn criterion_8() -> Result<Outcome> {
    let settings = CakeSettings::default();
    let data = CakeData::generate(&settings)?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let a: Vec<f64> = settings.a.iter().map(|v| v + rng.random_range(-0.2..0.2)).collect();
        let xi = rng.random_range(1.0..200.0);
        let alpha = rng.random_range(2..=50) as f64;
        let (res, oracle) = cake_identity(&data, &a, alpha, xi)?;
        worst = worst.max(res.as_signed().rel_diff(oracle));
    }
    let fit = fit_cake(&data, settings.alpha, settings.xi, &NelderMeadOptions::default())?;
    let err = fit.x.iter().zip(&settings.a).map(|(x, a)| (x - a).abs()).fold(0.0, f64::max);
    Ok(Outcome {
        pass: worst <= 1e-10 && err <= 0.05 && fit.converged,
        detail: format!("identity worst relative {worst:.1e} over 20 draws; MMLE max error {err:.4}"),
    })
}

fn criterion_9() -> Result<Outcome> {
    let start = Instant::now();
    let opts = RunOptions::default();
    let mut failed = Vec::new();
    let mut total = 0;
    for suite in [Suite::ClosedForms, Suite::Quadrature, Suite::Properties] {
        for c in run_suite(suite, &opts) {
            total += 1;
            if !c.pass {
                failed.push(format!("{}: {}", c.name, c.detail));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(Outcome {
        pass: failed.is_empty() && secs < 60.0,
        detail: format!("{} of {total} checks pass in {secs:.2} s {}", total - failed.len(), failed.join("; ")),
    })
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Result<Outcome>); 9] = [
        ("single zero count", criterion_1),
        ("hierarchical Poisson", criterion_2),
        ("shared rate and Chib", criterion_3),
        ("overlapping sources", criterion_4),
        ("pump failures", criterion_5),
        ("shared Pareto rate", criterion_6),
        ("fractional gamma examples", criterion_7),
        ("cake identity and MMLE", criterion_8),
        ("property suites", criterion_9),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (pass, detail) = match check() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        // Written to the raw handle so the lines survive test output capture.
        let _ = writeln!(std::io::stderr(), "criterion {}: {} {name}: {detail}", i + 1, if pass { "PASS" } else { "FAIL" });
        failures += usize::from(!pass);
    }
    assert_eq!(failures, 0, "{failures} acceptance criteria failed");
}
