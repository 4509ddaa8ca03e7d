//! Maximum marginal-likelihood estimation of fixed effects by a
//! Nelder–Mead simplex search.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginalize::{gamma_marginal, poisson_scaled, MarginalResult};
use crate::models::{build_gamma_hglm, build_poisson_identity_glmm, build_poisson_log_hglm, Family, Link, RegressionSpec};

/// Stopping rules for [`nelder_mead_max`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    /// Relative spread of simplex values at which the search stops.
    pub ftol_rel: f64,
    pub max_evals: usize,
    /// Edge length of the starting simplex.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { ftol_rel: 1e-10, max_evals: 5000, initial_step: 0.1 }
    }
}

/// Best point found by the simplex search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Maximizes `f` from `x0`. Points where `f` is not finite are treated as
/// infinitely bad. Stops once the simplex values agree to `ftol_rel`, then
/// restarts once around the best vertex to guard against a collapsed simplex.
pub fn nelder_mead_max<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Result<OptimResult> {
    let d = x0.len();
    if d == 0 {
        return Err(Error::InvalidInput("nothing to optimize".into()));
    }
    let evals = std::cell::Cell::new(0usize);
    let mut cost = |x: &[f64]| {
        evals.set(evals.get() + 1);
        let v = f(x);
        if v.is_finite() {
            -v
        } else {
            f64::INFINITY
        }
    };
    let mut start = x0.to_vec();
    let mut iterations = 0;
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut converged = false;
    for round in 0..2 {
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
        let c0 = cost(&start);
        simplex.push((start.clone(), c0));
        for k in 0..d {
            let mut x = start.clone();
            x[k] += opts.initial_step;
            let c = cost(&x);
            simplex.push((x, c));
        }
        if !simplex.iter().any(|v| v.1.is_finite()) {
            return Err(Error::InvalidInput("objective is not finite near the starting point".into()));
        }
        converged = false;
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (lo, hi) = (simplex[0].1, simplex[d].1);
            if hi.is_finite() && (hi - lo).abs() <= opts.ftol_rel * 0.5 * (lo.abs() + hi.abs()) + 1e-300 {
                converged = true;
                break;
            }
            if evals.get() >= opts.max_evals {
                break;
            }
            iterations += 1;
            let centroid: Vec<f64> = (0..d).map(|k| simplex[..d].iter().map(|v| v.0[k]).sum::<f64>() / d as f64).collect();
            let along = |t: f64, worst: &[f64]| -> Vec<f64> {
                centroid.iter().zip(worst).map(|(c, w)| c + t * (w - c)).collect()
            };
            let worst = simplex[d].0.clone();
            let xr = along(-1.0, &worst);
            let cr = cost(&xr);
            if cr < simplex[0].1 {
                let xe = along(-2.0, &worst);
                let ce = cost(&xe);
                simplex[d] = if ce < cr { (xe, ce) } else { (xr, cr) };
                continue;
            }
            if cr < simplex[d - 1].1 {
                simplex[d] = (xr, cr);
                continue;
            }
            let (xc, cc) = if cr < simplex[d].1 {
                let x = along(-0.5, &worst);
                let c = cost(&x);
                (x, c)
            } else {
                let x = along(0.5, &worst);
                let c = cost(&x);
                (x, c)
            };
            if cc < simplex[d].1.min(cr) {
                simplex[d] = (xc, cc);
                continue;
            }
            let head = simplex[0].0.clone();
            for v in simplex.iter_mut().skip(1) {
                let x: Vec<f64> = head.iter().zip(&v.0).map(|(b, p)| b + 0.5 * (p - b)).collect();
                let c = cost(&x);
                *v = (x, c);
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let improved = match &best {
            None => true,
            Some((_, c)) => simplex[0].1 < *c,
        };
        let gain = best.as_ref().map_or(f64::INFINITY, |(_, c)| c - simplex[0].1);
        if improved {
            best = Some(simplex[0].clone());
        }
        let scale = best.as_ref().map_or(1.0, |b| b.1.abs());
        if round == 1 || !converged || gain <= opts.ftol_rel * scale {
            break;
        }
        start = best.as_ref().map(|b| b.0.clone()).unwrap_or_default();
    }
    let (x, c) = best.ok_or_else(|| Error::InvalidInput("optimizer produced no point".into()))?;
    Ok(OptimResult { x, value: -c, iterations, evaluations: evals.get(), converged })
}

/// Observed responses matching the family of a [`RegressionSpec`].
#[derive(Clone, Debug, PartialEq)]
pub enum Response {
    Counts(Vec<u64>),
    Positive(Vec<f64>),
}

/// Marginal likelihood of `spec` at its current coefficients.
pub fn marginal(spec: &RegressionSpec, response: &Response) -> Result<MarginalResult> {
    Ok(match (spec.family, response) {
        (Family::Poisson, Response::Counts(y)) => match spec.link {
            Link::Log => poisson_scaled(&build_poisson_log_hglm(spec, y)?)?,
            Link::Identity => poisson_scaled(&build_poisson_identity_glmm(spec, y)?)?,
            Link::Inverse => return Err(Error::InvalidInput("Poisson responses support log and identity links".into())),
        },
        (Family::Gamma { .. }, Response::Positive(y)) => gamma_marginal(&build_gamma_hglm(spec, y)?)?,
        _ => return Err(Error::InvalidInput("response type does not match the model family".into())),
    })
}

/// Log marginal likelihood of `spec` at its current coefficients.
pub fn log_marginal(spec: &RegressionSpec, response: &Response) -> Result<f64> {
    let res = marginal(spec, response)?;
    if res.sign <= 0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(res.log_value)
}

/// Maximizes the marginal likelihood over the fixed effects, starting from `spec.a`.
pub fn fit_mmle(spec: &RegressionSpec, response: &Response, opts: &NelderMeadOptions) -> Result<OptimResult> {
    spec.validate()?;
    log_marginal(spec, response)?;
    let mut trial = spec.clone();
    nelder_mead_max(
        |a| {
            trial.a = Array1::from(a.to_vec());
            log_marginal(&trial, response).unwrap_or(f64::NEG_INFINITY)
        },
        &spec.a.to_vec(),
        opts,
    )
}

/// Intercept that maximizes the log-link gamma marginal when every response
/// equals `c`: `ln c + ln((ξ+1)/ξ)`.
pub fn constant_response_intercept(c: f64, xi: f64) -> f64 {
    c.ln() + ((xi + 1.0) / xi).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mgf::PriorMgf;
    use ndarray::Array2;

    #[test]
    fn recovers_quadratic_peak() {
        // Curvature of a log-likelihood with many observations.
        let f = |x: &[f64]| -10.0 - 5e5 * (x[0] - 1.234_567).powi(2);
        let res = nelder_mead_max(f, &[0.0], &NelderMeadOptions::default()).unwrap();
        assert!(res.converged);
        assert!((res.x[0] - 1.234_567).abs() < 1e-6);
    }

    #[test]
    fn recovers_rosenbrock_peak() {
        let f = |x: &[f64]| -(100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2)) - 1.0;
        let opts = NelderMeadOptions { ftol_rel: 1e-14, ..Default::default() };
        let res = nelder_mead_max(f, &[-1.2, 1.0], &opts).unwrap();
        assert!((res.x[0] - 1.0).abs() < 1e-4 && (res.x[1] - 1.0).abs() < 1e-4, "{res:?}");
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let opts = NelderMeadOptions { max_evals: 10, ..Default::default() };
        let res = nelder_mead_max(|x| -(x[0] * x[0] + x[1] * x[1]), &[5.0, 5.0], &opts).unwrap();
        assert!(!res.converged);
        assert!(res.evaluations <= 12);
    }

    #[test]
    fn constant_response_gives_closed_form_intercept() {
        let (m, groups, c, alpha, xi) = (12usize, 3usize, 2.5, 4.0, 6.0);
        let mut z = Array2::zeros((m, groups));
        for j in 0..m {
            z[[j, j % groups]] = 1.0;
        }
        let spec = RegressionSpec {
            x: Array2::ones((m, 1)),
            a: Array1::from(vec![0.0]),
            b: Array1::zeros(m),
            z,
            link: Link::Log,
            family: Family::Gamma { shape: alpha },
            random_prior: PriorMgf::gamma(xi + 1.0, xi).unwrap(),
        };
        let res = fit_mmle(&spec, &Response::Positive(vec![c; m]), &NelderMeadOptions::default()).unwrap();
        assert!(res.converged);
        assert!((res.x[0] - constant_response_intercept(c, xi)).abs() < 1e-4, "{res:?}");
    }

    #[test]
    fn mismatched_response_is_rejected() {
        let spec = RegressionSpec {
            x: Array2::ones((2, 1)),
            a: Array1::from(vec![0.0]),
            b: Array1::zeros(2),
            z: Array2::eye(2),
            link: Link::Log,
            family: Family::Poisson,
            random_prior: PriorMgf::gamma(2.0, 1.0).unwrap(),
        };
        assert!(log_marginal(&spec, &Response::Positive(vec![1.0, 2.0])).is_err());
        assert!(log_marginal(&spec, &Response::Counts(vec![1, 2])).unwrap().is_finite());
    }
}
