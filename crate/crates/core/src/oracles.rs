//! Independent ground truth for the marginal likelihoods: conjugate closed
//! forms, Chib's identity, brute-force quadrature and Monte Carlo.

use std::cell::{Cell, RefCell};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginalize::{check_gamma_inputs, check_priors, positive_vec, resolve_r, resolve_zeta, GammaProblem, PoissonProblem};
use crate::mgf::PriorMgf;
use crate::special_fn::quadrature::{integrate_log, QuadOptions};
use crate::special_fn::{ln_exp_integral_e, ln_factorial, ln_gamma_pos, log_negbin_pmf, log_poisson_pmf, SignedLogReal};

/// Negative binomial mass of a Poisson count whose rate `θ t` has a
/// `Gamma(size, rate)` prior.
pub fn negbin_mixture(y: u64, size: f64, rate: f64, time_offset: f64) -> Result<SignedLogReal> {
    positive_vec("rate", &[rate])?;
    positive_vec("time_offset", &[time_offset])?;
    Ok(SignedLogReal::from_ln(log_negbin_pmf(y, size, rate / (rate + time_offset))?))
}

/// `p(y) = p(λ) p(y | λ) / p(λ | y)` for iid Poisson counts with a
/// `Gamma(a, b)` prior, evaluated at `eval_lambda`.
pub fn chib_poisson_gamma(y: &[u64], a: f64, b: f64, eval_lambda: f64) -> Result<SignedLogReal> {
    positive_vec("eval_lambda", &[eval_lambda])?;
    let prior = PriorMgf::gamma(a, b)?;
    let n = y.len() as f64;
    let sum: u64 = y.iter().sum();
    let posterior = PriorMgf::gamma(a + sum as f64, b + n)?;
    let mut ln = prior.ln_pdf(eval_lambda)? - posterior.ln_pdf(eval_lambda)?;
    for &v in y {
        ln += log_poisson_pmf(v, eval_lambda)?;
    }
    Ok(SignedLogReal::from_ln(ln))
}

/// Log of `∏ t_i^{y_i} / y_i!`, the data-only factor of the Poisson likelihood.
pub fn ln_poisson_prefactor(y: &[u64], t: &[f64]) -> Result<f64> {
    if y.len() != t.len() {
        return Err(Error::Dimension(format!("{} counts but {} exposures", y.len(), t.len())));
    }
    positive_vec("t", t)?;
    Ok(y.iter().zip(t).map(|(&v, &ti)| v as f64 * ti.ln() - ln_factorial(v)).sum())
}

/// Poisson counts `y_i ~ Poisson(λ t_i)` with one shared `Pareto(alpha, k)`
/// rate: `[∏ t_i^{y_i}/y_i!] α k^{Σy} E_{α+1-Σy}(k Σt)`.
pub fn poisson_pareto_marginal(y: &[u64], t: &[f64], alpha: f64, k: f64) -> Result<SignedLogReal> {
    PriorMgf::pareto(alpha, k)?;
    let pre = ln_poisson_prefactor(y, t)?;
    let s = y.iter().sum::<u64>() as f64;
    let total: f64 = t.iter().sum();
    let e = ln_exp_integral_e(alpha + 1.0 - s, k * total)?;
    Ok(SignedLogReal::from_ln(pre + alpha.ln() + s * k.ln() + e))
}

/// Gamma observations `y_i ~ Gamma(α, ζ_i β)` with a shared
/// `β ~ Gamma(γ, ν)`:
/// `Γ(nα+γ)/(Γ(α)^n Γ(γ)) ν^γ ∏(ζ_i^α y_i^{α-1}) / (ν + Σ ζ_i y_i)^{nα+γ}`.
pub fn compound_gamma(y: &[f64], gamma: f64, nu: f64, alpha: f64, zeta: &[f64]) -> Result<SignedLogReal> {
    if y.is_empty() {
        return Err(Error::InvalidInput("no observations".into()));
    }
    if zeta.len() != y.len() {
        return Err(Error::Dimension(format!("{} multipliers for {} observations", zeta.len(), y.len())));
    }
    positive_vec("y", y)?;
    positive_vec("zeta", zeta)?;
    positive_vec("gamma, nu, alpha", &[gamma, nu, alpha]).map_err(|e| Error::Domain(e.to_string()))?;
    let n = y.len() as f64;
    let shape = n * alpha + gamma;
    let weighted: f64 = y.iter().zip(zeta).map(|(a, b)| a * b).sum();
    let data: f64 = y.iter().zip(zeta).map(|(&v, &z)| alpha * z.ln() + (alpha - 1.0) * v.ln()).sum();
    let ln = ln_gamma_pos(shape) - n * ln_gamma_pos(alpha) - ln_gamma_pos(gamma) + gamma * nu.ln() + data
        - shape * (nu + weighted).ln();
    Ok(SignedLogReal::from_ln(ln))
}

/// Product of [`compound_gamma`] over equally sized groups with
/// `Gamma(ξ+1, ξ)` random effects; `group[j]` is the group of observation `j`.
pub fn compound_gamma_groups(y: &[f64], group: &[usize], xi: f64, alpha: f64, zeta: &[f64]) -> Result<SignedLogReal> {
    if group.len() != y.len() || zeta.len() != y.len() {
        return Err(Error::Dimension("group labels, multipliers and observations differ in length".into()));
    }
    let groups = group.iter().max().map_or(0, |g| g + 1);
    let mut members = vec![Vec::new(); groups];
    for (j, &g) in group.iter().enumerate() {
        members[g].push(j);
    }
    let size = members.first().map_or(0, Vec::len);
    if size == 0 || members.iter().any(|m| m.len() != size) {
        return Err(Error::InvalidInput("groups must be non-empty and of equal size".into()));
    }
    let mut acc = SignedLogReal::ONE;
    for m in &members {
        let yg: Vec<f64> = m.iter().map(|&j| y[j]).collect();
        let zg: Vec<f64> = m.iter().map(|&j| zeta[j]).collect();
        acc = acc * compound_gamma(&yg, xi + 1.0, xi, alpha, &zg)?;
    }
    Ok(acc)
}

/// Group label of each row of a 0/1 membership matrix.
pub fn membership_labels(r: &Array2<f64>) -> Result<Vec<usize>> {
    r.rows()
        .into_iter()
        .enumerate()
        .map(|(j, row)| {
            let hits: Vec<usize> = row.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, _)| i).collect();
            match hits.as_slice() {
                [i] if row[*i] == 1.0 => Ok(*i),
                _ => Err(Error::InvalidInput(format!("row {j} is not a single group indicator"))),
            }
        })
        .collect()
}

/// A quadrature value with its estimated relative error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadEstimate {
    pub value: SignedLogReal,
    pub rel_error: f64,
}

enum Likelihood<'a> {
    Poisson(&'a [u64]),
    Gamma(&'a [f64], &'a [f64]),
}

impl Likelihood<'_> {
    fn ln(&self, rates: &[f64]) -> f64 {
        match self {
            Likelihood::Poisson(y) => y
                .iter()
                .zip(rates)
                .map(|(&v, &rate)| match (v, rate > 0.0) {
                    (0, _) => -rate,
                    (_, false) => f64::NEG_INFINITY,
                    _ => v as f64 * rate.ln() - rate - ln_factorial(v),
                })
                .sum(),
            Likelihood::Gamma(y, alpha) => y
                .iter()
                .zip(alpha.iter())
                .zip(rates)
                .map(|((&v, &a), &rate)| {
                    if rate > 0.0 {
                        a * rate.ln() + (a - 1.0) * v.ln() - rate * v - ln_gamma_pos(a)
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .sum(),
        }
    }
}

/// Brute-force `∫ p(y | θ) p(θ) dθ` for a Poisson problem with at most two
/// non-degenerate random effects.
pub fn quadrature_poisson(problem: &PoissonProblem) -> Result<QuadEstimate> {
    check_priors(&problem.priors)?;
    let m = problem.y.len();
    let r = resolve_r(&problem.r, m, problem.priors.len())?;
    let zeta = resolve_zeta(&problem.zeta, m)?;
    quadrature_marginal(&problem.priors, &r, &zeta, &Likelihood::Poisson(&problem.y))
}

/// Brute-force `∫ p(y | θ) p(θ) dθ` for a gamma problem with at most two
/// non-degenerate random effects.
pub fn quadrature_gamma(problem: &GammaProblem) -> Result<QuadEstimate> {
    let (r, zeta) = check_gamma_inputs(problem)?;
    quadrature_marginal(&problem.priors, &r, &zeta, &Likelihood::Gamma(&problem.y, &problem.alpha))
}

/// Maps an unconstrained coordinate onto the prior support.
fn to_theta(prior: &PriorMgf, s: f64) -> f64 {
    match *prior {
        PriorMgf::Pareto { scale, .. } => scale * s.exp(),
        _ => s.exp(),
    }
}

fn coordinate_range(prior: &PriorMgf) -> (f64, f64, f64) {
    match *prior {
        PriorMgf::Pareto { .. } => (0.0, f64::INFINITY, 0.5),
        _ => {
            let mean = prior.mean();
            (f64::NEG_INFINITY, f64::INFINITY, if mean > 0.0 { mean.ln() } else { 0.0 })
        }
    }
}

fn quadrature_marginal(priors: &[PriorMgf], r: &Array2<f64>, zeta: &[f64], lik: &Likelihood) -> Result<QuadEstimate> {
    let m = zeta.len();
    let fixed: Vec<f64> = (0..m)
        .map(|j| {
            priors
                .iter()
                .enumerate()
                .filter_map(|(i, p)| match p {
                    PriorMgf::PointMass { location } => Some(r[[j, i]] * location),
                    _ => None,
                })
                .sum()
        })
        .collect();
    let free: Vec<usize> = (0..priors.len()).filter(|&i| !matches!(priors[i], PriorMgf::PointMass { .. })).collect();
    if free.len() > 2 {
        return Err(Error::Quadrature(format!("{} random effects; quadrature handles at most two", free.len())));
    }
    // Log integrand in the unconstrained coordinates, Jacobian included.
    let integrand = |s: &[f64]| -> f64 {
        let mut rates = fixed.clone();
        let mut ln = 0.0;
        for (k, &i) in free.iter().enumerate() {
            let theta = to_theta(&priors[i], s[k]);
            ln += priors[i].ln_pdf(theta).unwrap_or(f64::NEG_INFINITY) + theta.ln();
            for j in 0..m {
                rates[j] += r[[j, i]] * theta;
            }
        }
        for (rate, z) in rates.iter_mut().zip(zeta) {
            *rate *= z;
        }
        let v = ln + lik.ln(&rates);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let opts = QuadOptions::with_rel_tol(1e-12);
    let (ln_value, rel_error) = match free.as_slice() {
        [] => (integrand(&[]), 0.0),
        [i] => {
            let (lo, hi, hint) = coordinate_range(&priors[*i]);
            let res = integrate_log(|s| integrand(&[s]), lo, hi, hint, 0.25, &opts)?;
            (res.ln_value, res.rel_error)
        }
        [i, k] => {
            let (lo1, hi1, hint1) = coordinate_range(&priors[*i]);
            let (lo2, hi2, hint2) = coordinate_range(&priors[*k]);
            let inner_err = Cell::new(0.0f64);
            let failure: RefCell<Option<Error>> = RefCell::new(None);
            let outer = |s1: f64| match integrate_log(|s2| integrand(&[s1, s2]), lo2, hi2, hint2, 0.25, &opts) {
                Ok(v) => {
                    inner_err.set(inner_err.get().max(v.rel_error));
                    v.ln_value
                }
                Err(Error::Quadrature(msg)) if msg.contains("vanishes") => f64::NEG_INFINITY,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    f64::NEG_INFINITY
                }
            };
            let res = integrate_log(outer, lo1, hi1, hint1, 0.25, &opts)?;
            if let Some(e) = failure.into_inner() {
                return Err(e);
            }
            (res.ln_value, res.rel_error + inner_err.get())
        }
        _ => unreachable!(),
    };
    if ln_value == f64::NEG_INFINITY {
        return Ok(QuadEstimate { value: SignedLogReal::ZERO, rel_error });
    }
    if !ln_value.is_finite() {
        return Err(Error::Quadrature(format!("non-finite log integral {ln_value}")));
    }
    // Rounding in the log integrand limits the attainable accuracy.
    let floor = 64.0 * f64::EPSILON * (1.0 + ln_value.abs());
    Ok(QuadEstimate { value: SignedLogReal::from_ln(ln_value), rel_error: rel_error.max(floor) })
}

/// Outcome of a Monte Carlo check of a point probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub n_iter: u64,
    pub hits: u64,
    /// Probability under test.
    pub p0: f64,
    pub ci_low: u64,
    pub ci_high: u64,
    pub pass: bool,
}

/// Iterations per independent random stream.
pub const MC_CHUNK: u64 = 8192;

/// Smallest number of iterations accepted by [`mc_overlap_check`].
pub const MC_MIN_ITER: u64 = 10_000;

/// Central 95% interval of `Binomial(n, p)`: the 2.5% and 97.5% quantiles.
pub fn binomial_central_interval(n: u64, p: f64) -> Result<(u64, u64)> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability must lie in [0, 1], got {p}")));
    }
    if p == 0.0 {
        return Ok((0, 0));
    }
    if p == 1.0 {
        return Ok((n, n));
    }
    // Log masses from the mode outward by the ratio recurrence, then normalise.
    let mode = (((n + 1) as f64) * p).floor().min(n as f64) as u64;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    let reach = (40.0 * sd + 50.0) as u64;
    let lo = mode.saturating_sub(reach);
    let hi = (mode + reach).min(n);
    let odds = (p / (1.0 - p)).ln();
    let len = (hi - lo + 1) as usize;
    let mut ln = vec![0.0; len];
    let at = (mode - lo) as usize;
    for k in mode..hi {
        let i = (k - lo) as usize;
        ln[i + 1] = ln[i] + ((n - k) as f64).ln() - ((k + 1) as f64).ln() + odds;
    }
    for k in (lo + 1..=mode).rev() {
        let i = (k - lo) as usize;
        ln[i - 1] = ln[i] - ((n - k + 1) as f64).ln() + (k as f64).ln() - odds;
    }
    let top = ln[at];
    let w: Vec<f64> = ln.iter().map(|v| (v - top).exp()).collect();
    let total: f64 = w.iter().sum();
    let quantile = |q: f64| {
        let mut acc = 0.0;
        for (i, wi) in w.iter().enumerate() {
            acc += wi / total;
            if acc >= q {
                return lo + i as u64;
            }
        }
        hi
    };
    Ok((quantile(0.025), quantile(0.975)))
}

/// Simulates `θ_i ~ priors[i]`, `y ~ Poisson(Aθ)` and counts exact matches of
/// `y_target`, then tests the count against `Binomial(n_iter, p0)`.
///
/// Iterations are split into chunks of [`MC_CHUNK`]; chunk `c` draws from
/// `ChaCha8Rng::seed_from_u64(seed)` on stream `c`, so the result does not
/// depend on thread scheduling.
pub fn mc_overlap_check(a: &Array2<f64>, priors: &[PriorMgf], y_target: &[u64], n_iter: u64, seed: u64, p0: f64) -> Result<McReport> {
    if n_iter < MC_MIN_ITER {
        return Err(Error::InvalidInput(format!("n_iter must be at least {MC_MIN_ITER}, got {n_iter}")));
    }
    check_priors(priors)?;
    let a = resolve_r(&Some(a.clone()), y_target.len(), priors.len())?;
    let (ci_low, ci_high) = binomial_central_interval(n_iter, p0)?;
    let chunks = n_iter.div_ceil(MC_CHUNK);
    let hits: Vec<u64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let count = MC_CHUNK.min(n_iter - c * MC_CHUNK);
            let mut hits = 0u64;
            let mut theta = vec![0.0; priors.len()];
            for _ in 0..count {
                if simulate_once(&a, priors, y_target, &mut theta, &mut rng)? {
                    hits += 1;
                }
            }
            Ok(hits)
        })
        .collect::<Result<_>>()?;
    let hits = hits.iter().sum();
    Ok(McReport { n_iter, hits, p0, ci_low, ci_high, pass: ci_low <= hits && hits <= ci_high })
}

fn simulate_once<R: Rng>(a: &Array2<f64>, priors: &[PriorMgf], y: &[u64], theta: &mut [f64], rng: &mut R) -> Result<bool> {
    for (t, p) in theta.iter_mut().zip(priors) {
        *t = p.sample(rng)?;
    }
    for (j, &target) in y.iter().enumerate() {
        let rate: f64 = a.row(j).iter().zip(theta.iter()).map(|(x, t)| x * t).sum();
        let count = if rate > 0.0 {
            Poisson::new(rate).map_err(|e| Error::InvalidInput(e.to_string()))?.sample(rng) as u64
        } else {
            0
        };
        if count != target {
            return Ok(false);
        }
    }
    Ok(true)
}
