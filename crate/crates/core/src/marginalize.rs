//! Marginal likelihoods of Poisson and gamma models with random effects.
//!
//! Every operation returns the natural log of `p(y | hyperparameters)` after
//! integrating the random effects out through derivatives of their prior mgfs.
//!
//! Poisson counts `y_j ~ Poisson(ζ_j (rθ)_j)` give
//! `p(y) = ∏ ζ_j^{y_j}/y_j! · ∂^y/∂t^y ∏_i M_i((tᵀr)_i) |_{t=-ζ}`.
//!
//! Gamma observations `y_j ~ Gamma(α_j, rate ζ_j (rθ)_j)` give
//! `p(y) = ∏ y_j^{α_j-1} ζ_j^{α_j}/Γ(α_j) · ∂^α/∂t^α ∏_i M_i((tᵀr)_i) |_{t=-y⊙ζ}`,
//! where the derivative is of Riemann–Liouville type when `α` is not integral.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mgf::{FracMethod, FracOrder, PriorMgf};
use crate::special_fn::{ln_factorial, ln_gamma_pos, SignedLogReal};
use crate::taylor::{MgfProduct, Strategy, TruncatedSeries};

/// Relative tolerance for agreement between equivalent closed forms.
pub const FORM_TOLERANCE: f64 = 1e-10;

/// Poisson counts with linearly mixed random effects.
#[derive(Clone, Debug, PartialEq)]
pub struct PoissonProblem {
    pub priors: Vec<PriorMgf>,
    /// `m × n` loading matrix; identity when `None`.
    pub r: Option<Array2<f64>>,
    /// Per-observation rate multipliers; all ones when `None`.
    pub zeta: Option<Vec<f64>>,
    pub y: Vec<u64>,
}

/// Gamma observations with known shapes and random-effect rates.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaProblem {
    pub priors: Vec<PriorMgf>,
    /// Known shape of each observation.
    pub alpha: Vec<f64>,
    /// `m × n` loading matrix; identity when `None`.
    pub r: Option<Array2<f64>>,
    /// Per-observation rate multipliers; all ones when `None`.
    pub zeta: Option<Vec<f64>>,
    pub y: Vec<f64>,
}

/// Algorithm that produced a marginal likelihood.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Path {
    ClosedForm,
    SeparableDeriv,
    DenseSeries,
    MellinFrac,
}

impl std::fmt::Display for Path {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Path::ClosedForm => "closed_form",
            Path::SeparableDeriv => "separable_deriv",
            Path::DenseSeries => "dense_series",
            Path::MellinFrac => "mellin_frac",
        };
        f.write_str(s)
    }
}

/// A log marginal likelihood and how it was obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalResult {
    pub log_value: f64,
    /// `+1` for a positive likelihood, `0` when the data are impossible.
    pub sign: i8,
    pub path: Path,
    /// Derivative orders used, one per variable.
    pub orders_used: Vec<f64>,
}

impl MarginalResult {
    fn new(value: SignedLogReal, path: Path, orders_used: Vec<f64>) -> Self {
        Self { log_value: value.ln_abs(), sign: value.sign(), path, orders_used }
    }

    pub fn value(&self) -> f64 {
        self.as_signed().to_f64()
    }

    pub fn as_signed(&self) -> SignedLogReal {
        SignedLogReal::new(self.log_value, self.sign)
    }
}

pub(crate) fn positive_vec(name: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !(*x > 0.0) || !x.is_finite()) {
        Some(i) => Err(Error::InvalidInput(format!("{name}[{i}] must be positive and finite, got {}", v[i]))),
        None => Ok(()),
    }
}

pub(crate) fn resolve_r(r: &Option<Array2<f64>>, m: usize, n: usize) -> Result<Array2<f64>> {
    match r {
        None => {
            if m != n {
                return Err(Error::Dimension(format!("{m} observations but {n} priors and no loading matrix")));
            }
            Ok(Array2::eye(n))
        }
        Some(r) => {
            if r.nrows() != m || r.ncols() != n {
                return Err(Error::Dimension(format!(
                    "loading matrix is {}×{}, expected {m}×{n}",
                    r.nrows(),
                    r.ncols()
                )));
            }
            if let Some(x) = r.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
                return Err(Error::InvalidInput(format!("loading matrix entries must be non-negative, found {x}")));
            }
            Ok(r.clone())
        }
    }
}

pub(crate) fn resolve_zeta(zeta: &Option<Vec<f64>>, m: usize) -> Result<Vec<f64>> {
    match zeta {
        None => Ok(vec![1.0; m]),
        Some(z) => {
            if z.len() != m {
                return Err(Error::Dimension(format!("{} rate multipliers for {m} observations", z.len())));
            }
            positive_vec("zeta", z)?;
            Ok(z.clone())
        }
    }
}

fn is_identity(r: &Array2<f64>) -> bool {
    r.is_square() && r.indexed_iter().all(|((i, j), &x)| x == if i == j { 1.0 } else { 0.0 })
}

fn is_diagonal(r: &Array2<f64>) -> bool {
    r.is_square() && r.indexed_iter().all(|((i, j), &x)| i == j || x == 0.0)
}

pub(crate) fn check_priors(priors: &[PriorMgf]) -> Result<()> {
    if priors.is_empty() {
        return Err(Error::InvalidInput("at least one prior is required".into()));
    }
    priors.iter().try_for_each(PriorMgf::validate)
}

fn orders_f64(y: &[u64]) -> Vec<f64> {
    y.iter().map(|&v| v as f64).collect()
}

/// Independent Poisson counts with one random effect each: `y_i ~ Poisson(θ_i)`.
pub fn poisson_hier(problem: &PoissonProblem) -> Result<MarginalResult> {
    check_priors(&problem.priors)?;
    let m = problem.y.len();
    if problem.priors.len() != m {
        return Err(Error::Dimension(format!("{} priors for {m} observations", problem.priors.len())));
    }
    if let Some(r) = &problem.r {
        if !is_identity(r) {
            return Err(Error::InvalidInput("hierarchical Poisson model requires an identity loading matrix".into()));
        }
    }
    if resolve_zeta(&problem.zeta, m)?.iter().any(|&z| z != 1.0) {
        return Err(Error::InvalidInput("hierarchical Poisson model requires unit rate multipliers".into()));
    }
    let mut acc = SignedLogReal::ONE;
    for (prior, &y) in problem.priors.iter().zip(&problem.y) {
        let d = prior.deriv_int(checked_order(y)?, -1.0)?;
        acc = acc * d * SignedLogReal::from_ln(-ln_factorial(y));
    }
    Ok(MarginalResult::new(acc, Path::ClosedForm, orders_f64(&problem.y)))
}

fn checked_order(y: u64) -> Result<u32> {
    u32::try_from(y).map_err(|_| Error::InvalidInput(format!("count {y} is too large")))
}

/// Poisson counts with rates `ζ ⊙ (rθ)`.
pub fn poisson_scaled(problem: &PoissonProblem) -> Result<MarginalResult> {
    check_priors(&problem.priors)?;
    let m = problem.y.len();
    let n = problem.priors.len();
    let r = resolve_r(&problem.r, m, n)?;
    let zeta = resolve_zeta(&problem.zeta, m)?;
    if is_identity(&r) && zeta.iter().all(|&z| z == 1.0) {
        return poisson_hier(problem);
    }
    let f = MgfProduct::from_columns(&problem.priors, &r)?;
    let orders: Vec<u32> = problem.y.iter().map(|&y| checked_order(y)).collect::<Result<_>>()?;
    let t: Vec<f64> = zeta.iter().map(|z| -z).collect();
    // Every factor must be finite at the evaluation point, even when unused by the orders.
    f.eval(&t)?;
    let (d, strategy) = f.mixed_partial(&orders, &t)?;
    let pre: f64 = problem.y.iter().zip(&zeta).map(|(&y, &z)| y as f64 * z.ln() - ln_factorial(y)).sum();
    let path = match strategy {
        Strategy::Separable => Path::SeparableDeriv,
        Strategy::Dense => Path::DenseSeries,
    };
    Ok(MarginalResult::new(d * SignedLogReal::from_ln(pre), path, orders_f64(&problem.y)))
}

/// Univariate series of `t ↦ M(c t)` around `t0`, truncated at `order`.
fn scaled_lift(prior: &PriorMgf, c: f64, t0: f64, order: u32) -> Result<SignedLogReal> {
    let u = c * t0;
    prior.eval(u)?;
    let series = match *prior {
        PriorMgf::Gamma { shape, rate } => lift_gamma_kernel(shape, rate, c, u, order)?,
        PriorMgf::Exponential { rate } => lift_gamma_kernel(1.0, rate, c, u, order)?,
        PriorMgf::PointMass { location } => TruncatedSeries::affine(
            &[order],
            SignedLogReal::from_f64(location * u),
            &[SignedLogReal::from_f64(location * c)],
        )?
        .exp()?,
        PriorMgf::Pareto { .. } => {
            let taylor = prior.taylor_coefficients(u, order)?;
            TruncatedSeries::affine(&[order], SignedLogReal::from_f64(u), &[SignedLogReal::from_f64(c)])?
                .compose(&taylor)?
        }
    };
    series.derivative(&[order])
}

fn lift_gamma_kernel(a: f64, b: f64, c: f64, u: f64, order: u32) -> Result<TruncatedSeries> {
    let base = TruncatedSeries::affine(&[order], SignedLogReal::from_f64(b - u), &[SignedLogReal::from_f64(-c)])?;
    Ok(base.pow_real(-a)?.scale(SignedLogReal::from_ln(a * b.ln())))
}

fn agree(a: SignedLogReal, b: SignedLogReal, what: &str) -> Result<()> {
    let d = a.rel_diff(b);
    if d > FORM_TOLERANCE {
        return Err(Error::FormMismatch(format!("{what}: {a} vs {b} (relative difference {d:.3e})")));
    }
    Ok(())
}

/// Poisson counts sharing one random effect: `y_i ~ Poisson(ζ θ)`.
///
/// Evaluates `ζ^{Σy} M^{(Σy)}(-nζ)` and, independently, the `Σy`-th derivative
/// of `t ↦ M(ζ t)` at `-n` through a power-series lift, and checks they agree.
pub fn poisson_single(prior: &PriorMgf, y: &[u64], zeta: f64) -> Result<MarginalResult> {
    prior.validate()?;
    if y.is_empty() {
        return Err(Error::InvalidInput("no observations".into()));
    }
    positive_vec("zeta", &[zeta])?;
    let total: u64 = y.iter().sum();
    let s = checked_order(total)?;
    let n = y.len() as f64;
    let pre: f64 = -y.iter().map(|&v| ln_factorial(v)).sum::<f64>();
    let form1 = prior.deriv_int(s, -n * zeta)? * SignedLogReal::from_ln(f64::from(s) * zeta.ln());
    let form2 = scaled_lift(prior, zeta, -n, s)?;
    agree(form1, form2, "single-effect Poisson forms")?;
    Ok(MarginalResult::new(form1 * SignedLogReal::from_ln(pre), Path::ClosedForm, vec![total as f64]))
}

/// Gamma observations with one random effect each and diagonal loadings.
pub fn gamma_hier(problem: &GammaProblem) -> Result<MarginalResult> {
    gamma_hier_with(problem, FracMethod::ClosedForm)
}

pub(crate) fn check_gamma_inputs(problem: &GammaProblem) -> Result<(Array2<f64>, Vec<f64>)> {
    check_priors(&problem.priors)?;
    let m = problem.y.len();
    if problem.alpha.len() != m {
        return Err(Error::Dimension(format!("{} shapes for {m} observations", problem.alpha.len())));
    }
    positive_vec("y", &problem.y)?;
    positive_vec("alpha", &problem.alpha)?;
    let r = resolve_r(&problem.r, m, problem.priors.len())?;
    let zeta = resolve_zeta(&problem.zeta, m)?;
    Ok((r, zeta))
}

/// [`gamma_hier`] with an explicit fractional-derivative method.
pub fn gamma_hier_with(problem: &GammaProblem, method: FracMethod) -> Result<MarginalResult> {
    let (r, zeta) = check_gamma_inputs(problem)?;
    if !is_diagonal(&r) {
        return Err(Error::InvalidInput("hierarchical gamma model requires a diagonal loading matrix".into()));
    }
    let mut acc = SignedLogReal::ONE;
    let mut fractional = false;
    for (i, prior) in problem.priors.iter().enumerate() {
        let (a, y) = (problem.alpha[i], problem.y[i]);
        let s = zeta[i] * r[[i, i]];
        if !(s > 0.0) {
            return Err(Error::InvalidInput(format!("diagonal loading {i} must be positive")));
        }
        let order = FracOrder::new(a)?;
        fractional |= !order.is_integer();
        let d = prior.deriv_frac_with(order, -s * y, method)?;
        let pre = (a - 1.0) * y.ln() + a * s.ln() - ln_gamma_pos(a);
        acc = acc * d * SignedLogReal::from_ln(pre);
    }
    let path = if fractional { Path::MellinFrac } else { Path::ClosedForm };
    Ok(MarginalResult::new(acc, path, problem.alpha.clone()))
}

/// Gamma observations sharing one random effect: `y_i ~ Gamma(α, rate rθ)`.
///
/// Evaluates `r^{nα} D^{nα} M(-rΣy)` and, independently, the derivative of
/// `t ↦ M(r t)` at `-Σy` (by quadrature for fractional orders, by a series
/// lift for integer ones), and checks they agree.
pub fn gamma_single(prior: &PriorMgf, alpha: f64, y: &[f64], r: f64) -> Result<MarginalResult> {
    prior.validate()?;
    if y.is_empty() {
        return Err(Error::InvalidInput("no observations".into()));
    }
    positive_vec("y", y)?;
    positive_vec("alpha", &[alpha])?;
    positive_vec("r", &[r])?;
    let n = y.len() as f64;
    let sum_y: f64 = y.iter().sum();
    let order = FracOrder::new(n * alpha)?;
    let pre = (alpha - 1.0) * y.iter().map(|v| v.ln()).sum::<f64>() - n * ln_gamma_pos(alpha);
    let form1 = prior.deriv_frac(order, -r * sum_y)? * SignedLogReal::from_ln(order.total() * r.ln());
    let form2 = if order.is_integer() {
        scaled_lift(prior, r, -sum_y, order.integer_part())?
    } else {
        prior.scaled(r)?.deriv_frac_with(order, -sum_y, FracMethod::MellinUnderIntegral)?
    };
    agree(form1, form2, "single-effect gamma forms")?;
    let path = if order.is_integer() { Path::ClosedForm } else { Path::MellinFrac };
    Ok(MarginalResult::new(form1 * SignedLogReal::from_ln(pre), path, vec![order.total()]))
}

/// Gamma observations with integer shapes and a general loading matrix.
pub fn gamma_integer(problem: &GammaProblem) -> Result<MarginalResult> {
    let (r, zeta) = check_gamma_inputs(problem)?;
    let orders: Vec<u32> = problem
        .alpha
        .iter()
        .map(|&a| {
            let o = FracOrder::new(a)?;
            if !o.is_integer() {
                return Err(Error::NonIntegerShapeWithCoupling(format!("shape {a} is not an integer")));
            }
            Ok(o.integer_part())
        })
        .collect::<Result<_>>()?;
    let f = MgfProduct::from_columns(&problem.priors, &r)?;
    let t: Vec<f64> = problem.y.iter().zip(&zeta).map(|(y, z)| -y * z).collect();
    f.eval(&t)?;
    let (d, strategy) = f.mixed_partial(&orders, &t)?;
    let pre: f64 = problem
        .alpha
        .iter()
        .zip(problem.y.iter().zip(&zeta))
        .map(|(&a, (&y, &z))| (a - 1.0) * y.ln() + a * z.ln() - ln_gamma_pos(a))
        .sum();
    let path = match strategy {
        Strategy::Separable => Path::SeparableDeriv,
        Strategy::Dense => Path::DenseSeries,
    };
    Ok(MarginalResult::new(d * SignedLogReal::from_ln(pre), path, problem.alpha.clone()))
}

/// Picks the appropriate gamma operation: diagonal loadings use the
/// fractional path, anything else needs integer shapes.
pub fn gamma_marginal(problem: &GammaProblem) -> Result<MarginalResult> {
    let (r, _) = check_gamma_inputs(problem)?;
    if is_diagonal(&r) {
        gamma_hier(problem)
    } else {
        gamma_integer(problem)
    }
}
