//! Prior moment generating functions and their derivatives.
//!
//! Integer-order derivatives come from closed forms. Fractional derivatives
//! are Riemann–Liouville derivatives with lower limit `-inf`:
//!
//! `D^α M(t) = d^n/dt^n (1/Γ(γ)) ∫_0^∞ x^{γ-1} M(t - x) dx`, with `n = ⌊α⌋ + 1`
//! and `γ = n - α`.

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special_fn::quadrature::{integrate_log, QuadOptions};
use crate::special_fn::{ln_exp_integral_e, ln_factorial, ln_gamma_pos, SignedLogReal};

/// Prior distribution of a non-negative random effect, identified by its mgf.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorMgf {
    /// Gamma with shape and rate; mgf `rate^shape / (rate - t)^shape` for `t < rate`.
    Gamma { shape: f64, rate: f64 },
    /// Exponential with rate; mgf `rate / (rate - t)` for `t < rate`.
    Exponential { rate: f64 },
    /// Pareto with tail index and scale (minimum); mgf `tail E_{tail+1}(-scale t)` for `t <= 0`.
    Pareto { tail: f64, scale: f64 },
    /// Degenerate distribution at a non-negative location; mgf `e^{ct}`.
    PointMass { location: f64 },
}

/// Order of a Riemann–Liouville derivative split into `n - γ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FracOrder {
    total: f64,
    integer_part: u32,
    gamma_frac: f64,
}

impl FracOrder {
    /// Relative distance to an integer below which an order counts as integral.
    pub const INTEGER_SNAP: f64 = 1e-12;

    pub fn new(total: f64) -> Result<Self> {
        if !(total >= 0.0) || !total.is_finite() || total > 1e7 {
            return Err(Error::Domain(format!("derivative order must be finite and non-negative, got {total}")));
        }
        let r = total.round();
        if (total - r).abs() <= Self::INTEGER_SNAP * r.max(1.0) {
            return Ok(Self::integer(r as u32));
        }
        let n = total.floor() + 1.0;
        Ok(Self { total, integer_part: n as u32, gamma_frac: n - total })
    }

    pub fn integer(n: u32) -> Self {
        Self { total: f64::from(n), integer_part: n, gamma_frac: 0.0 }
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// `⌊α⌋ + 1` for fractional orders, `α` itself for integer orders.
    pub fn integer_part(&self) -> u32 {
        self.integer_part
    }

    /// `γ = integer_part - total`, in `[0, 1)`.
    pub fn gamma_frac(&self) -> f64 {
        self.gamma_frac
    }

    pub fn is_integer(&self) -> bool {
        self.gamma_frac == 0.0
    }
}

/// How a fractional derivative is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FracMethod {
    /// Family closed form.
    #[default]
    ClosedForm,
    /// Quadrature of `x^{γ-1} M^{(n)}(t - x)`, i.e. differentiation under the integral.
    MellinUnderIntegral,
    /// Quadrature of the fractional integral followed by Richardson-extrapolated
    /// central differences. Limited to `n <= 4`.
    MellinRichardson,
}

impl PriorMgf {
    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        let m = Self::Gamma { shape, rate };
        m.validate()?;
        Ok(m)
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        let m = Self::Exponential { rate };
        m.validate()?;
        Ok(m)
    }

    pub fn pareto(tail: f64, scale: f64) -> Result<Self> {
        let m = Self::Pareto { tail, scale };
        m.validate()?;
        Ok(m)
    }

    pub fn point_mass(location: f64) -> Result<Self> {
        let m = Self::PointMass { location };
        m.validate()?;
        Ok(m)
    }

    /// Checks parameter ranges.
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{} {name} must be positive and finite, got {v}", self.name())))
            }
        };
        match *self {
            Self::Gamma { shape, rate } => pos("shape", shape).and(pos("rate", rate)),
            Self::Exponential { rate } => pos("rate", rate),
            Self::Pareto { tail, scale } => pos("tail", tail).and(pos("scale", scale)),
            Self::PointMass { location } => {
                if location >= 0.0 && location.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidInput(format!("point mass location must be non-negative, got {location}")))
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Gamma { .. } => "gamma",
            Self::Exponential { .. } => "exponential",
            Self::Pareto { .. } => "pareto",
            Self::PointMass { .. } => "point mass",
        }
    }

    /// Gamma-kernel parameters `(shape, rate)` for the gamma and exponential families.
    fn gamma_kernel(&self) -> Option<(f64, f64)> {
        match *self {
            Self::Gamma { shape, rate } => Some((shape, rate)),
            Self::Exponential { rate } => Some((1.0, rate)),
            _ => None,
        }
    }

    /// Whether the mgf is finite at `t`; boundaries are excluded for open domains.
    pub fn in_domain(&self, t: f64) -> bool {
        if t.is_nan() {
            return false;
        }
        match *self {
            Self::Gamma { rate, .. } | Self::Exponential { rate } => t < rate,
            Self::Pareto { .. } => t <= 0.0,
            Self::PointMass { .. } => t.is_finite(),
        }
    }

    fn check(&self, t: f64) -> Result<()> {
        self.validate()?;
        if self.in_domain(t) {
            Ok(())
        } else {
            Err(Error::Domain(format!("{} mgf is not finite at t = {t}", self.name())))
        }
    }

    /// `M(t)`.
    pub fn eval(&self, t: f64) -> Result<SignedLogReal> {
        self.deriv_int(0, t)
    }

    /// `M^{(k)}(t) = E[θ^k e^{tθ}]`.
    pub fn deriv_int(&self, k: u32, t: f64) -> Result<SignedLogReal> {
        self.check(t)?;
        let kf = f64::from(k);
        match *self {
            Self::Gamma { .. } | Self::Exponential { .. } => {
                let (a, b) = self.gamma_kernel().unwrap_or_default();
                let lg = if k == 0 { 0.0 } else { ln_gamma_pos(a + kf) - ln_gamma_pos(a) };
                Ok(SignedLogReal::from_ln(lg + a * b.ln() - (a + kf) * (b - t).ln()))
            }
            Self::Pareto { tail, scale } => {
                if t == 0.0 {
                    if k == 0 {
                        return Ok(SignedLogReal::ONE);
                    }
                    // E_ν(0) = 1/(ν - 1) for ν > 1.
                    if kf < tail {
                        return Ok(SignedLogReal::from_ln(kf * scale.ln() + tail.ln() - (tail - kf).ln()));
                    }
                    return Err(Error::Divergence(format!(
                        "pareto moment of order {k} is infinite for tail {tail}"
                    )));
                }
                let e = ln_exp_integral_e(tail + 1.0 - kf, -scale * t)?;
                Ok(SignedLogReal::from_ln(kf * scale.ln() + tail.ln() + e))
            }
            Self::PointMass { location } => {
                if k == 0 {
                    Ok(SignedLogReal::from_ln(location * t))
                } else if location == 0.0 {
                    Ok(SignedLogReal::ZERO)
                } else {
                    Ok(SignedLogReal::from_ln(kf * location.ln() + location * t))
                }
            }
        }
    }

    /// Taylor coefficients `M^{(k)}(t) / k!` for `k = 0..=degree`.
    pub fn taylor_coefficients(&self, t: f64, degree: u32) -> Result<Vec<SignedLogReal>> {
        (0..=degree)
            .map(|k| Ok(self.deriv_int(k, t)? * SignedLogReal::from_ln(-ln_factorial(u64::from(k)))))
            .collect()
    }

    /// Riemann–Liouville derivative of order `order` at `t` using the family closed form.
    ///
    /// Integer orders return [`deriv_int`](Self::deriv_int) unchanged.
    pub fn deriv_frac(&self, order: FracOrder, t: f64) -> Result<SignedLogReal> {
        self.deriv_frac_with(order, t, FracMethod::ClosedForm)
    }

    /// Riemann–Liouville derivative with an explicit evaluation method.
    pub fn deriv_frac_with(&self, order: FracOrder, t: f64, method: FracMethod) -> Result<SignedLogReal> {
        if order.is_integer() && method == FracMethod::ClosedForm {
            return self.deriv_int(order.integer_part(), t);
        }
        self.check(t)?;
        if let Self::Pareto { .. } = self {
            if !order.is_integer() {
                return Err(Error::UnsupportedFractional("the pareto prior".into()));
            }
        }
        match method {
            FracMethod::ClosedForm => self.deriv_frac_closed(order.total(), t),
            FracMethod::MellinUnderIntegral => {
                // Integer orders use γ = 1 and one extra derivative.
                let (n, g) = if order.is_integer() {
                    (order.integer_part() + 1, 1.0)
                } else {
                    (order.integer_part(), order.gamma_frac())
                };
                let v = self.mellin_integral(g, n, t)?;
                Ok(v * SignedLogReal::from_ln(-ln_gamma_pos(g)))
            }
            FracMethod::MellinRichardson => self.deriv_frac_richardson(order, t),
        }
    }

    fn deriv_frac_closed(&self, alpha: f64, t: f64) -> Result<SignedLogReal> {
        match *self {
            Self::Gamma { .. } | Self::Exponential { .. } => {
                let (a, b) = self.gamma_kernel().unwrap_or_default();
                Ok(SignedLogReal::from_ln(
                    ln_gamma_pos(a + alpha) - ln_gamma_pos(a) + a * b.ln() - (a + alpha) * (b - t).ln(),
                ))
            }
            Self::PointMass { location } => {
                if location == 0.0 {
                    Ok(if alpha == 0.0 { SignedLogReal::ONE } else { SignedLogReal::ZERO })
                } else {
                    Ok(SignedLogReal::from_ln(alpha * location.ln() + location * t))
                }
            }
            Self::Pareto { .. } => Err(Error::UnsupportedFractional("the pareto prior".into())),
        }
    }

    /// `∫_0^∞ x^{γ-1} M^{(n)}(t - x) dx` by log-space quadrature with `x = e^s`.
    ///
    /// With `n = 0` this is the Mellin transform of `x ↦ M(t - x)` at `γ`.
    pub fn mellin_integral(&self, gamma: f64, n: u32, t: f64) -> Result<SignedLogReal> {
        self.check(t)?;
        if !(gamma > 0.0) {
            return Err(Error::Domain(format!("Mellin exponent must be positive, got {gamma}")));
        }
        let nf = f64::from(n);
        let (lnf, hint): (Box<dyn Fn(f64) -> f64>, f64) = match *self {
            Self::Gamma { .. } | Self::Exponential { .. } => {
                let (a, b) = self.gamma_kernel().unwrap_or_default();
                let lead = if n == 0 { 0.0 } else { ln_gamma_pos(a + nf) - ln_gamma_pos(a) } + a * b.ln();
                let d = b - t;
                let p = a + nf;
                if !(p > gamma) {
                    return Err(Error::Divergence(format!(
                        "Mellin integral of order {gamma} diverges for this {} prior",
                        self.name()
                    )));
                }
                let hint = (gamma * d / (p - gamma)).ln();
                (Box::new(move |x: f64| lead - p * (d + x).ln()), hint)
            }
            Self::PointMass { location } => {
                if location == 0.0 {
                    if n == 0 {
                        return Err(Error::Divergence("Mellin integral of a constant".into()));
                    }
                    return Ok(SignedLogReal::ZERO);
                }
                let lead = nf * location.ln() + location * t;
                (Box::new(move |x: f64| lead - location * x), (gamma / location).ln())
            }
            Self::Pareto { .. } => return Err(Error::UnsupportedFractional("the pareto prior".into())),
        };
        let g = |s: f64| {
            let x = s.exp();
            if x == f64::INFINITY {
                f64::NEG_INFINITY
            } else {
                gamma * s + lnf(x)
            }
        };
        let r = integrate_log(g, f64::NEG_INFINITY, f64::INFINITY, hint, 1.0, &QuadOptions::default())?;
        Ok(SignedLogReal::from_ln(r.ln_value))
    }

    fn deriv_frac_richardson(&self, order: FracOrder, t: f64) -> Result<SignedLogReal> {
        let (n, g) = if order.is_integer() {
            (order.integer_part(), 0.0)
        } else {
            (order.integer_part(), order.gamma_frac())
        };
        if n > 4 {
            return Err(Error::InvalidInput(format!(
                "finite-difference derivative of order {n} is too unstable; at most 4 is allowed"
            )));
        }
        // Fractional integral of order γ (identity for γ = 0).
        let lnf = |u: f64| -> Result<f64> {
            if g == 0.0 {
                Ok(self.eval(u)?.ln_abs())
            } else {
                Ok(self.mellin_integral(g, 0, u)?.ln_abs() - ln_gamma_pos(g))
            }
        };
        if n == 0 {
            return Ok(SignedLogReal::from_ln(lnf(t)?));
        }
        let h0 = (1e-3f64).max(1e-3 * t.abs());
        let half = 0.5 * f64::from(n);
        if !self.in_domain(t + half * h0) {
            return Err(Error::Domain(format!("finite-difference stencil leaves the mgf domain at t = {t}")));
        }
        let f0 = lnf(t)?;
        let binom = |j: u32| -> f64 { (0..j).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1)) };
        let diff = |h: f64| -> Result<f64> {
            let mut acc = 0.0;
            for j in 0..=n {
                let u = t + (half - f64::from(j)) * h;
                let w = if j % 2 == 0 { 1.0 } else { -1.0 } * binom(j);
                acc += w * (lnf(u)? - f0).exp();
            }
            Ok(acc / h.powi(n as i32))
        };
        let d1 = diff(h0)?;
        let d2 = diff(0.5 * h0)?;
        let d3 = diff(0.25 * h0)?;
        let r1 = (4.0 * d2 - d1) / 3.0;
        let r2 = (4.0 * d3 - d2) / 3.0;
        let est = (16.0 * r2 - r1) / 15.0;
        Ok(SignedLogReal::from_f64(est) * SignedLogReal::from_ln(f0))
    }

    /// Prior of `c θ` for `c > 0`, whose mgf is `t ↦ M(c t)`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidInput(format!("scale factor must be positive, got {c}")));
        }
        let m = match *self {
            Self::Gamma { shape, rate } => Self::Gamma { shape, rate: rate / c },
            Self::Exponential { rate } => Self::Exponential { rate: rate / c },
            Self::Pareto { tail, scale } => Self::Pareto { tail, scale: scale * c },
            Self::PointMass { location } => Self::PointMass { location: location * c },
        };
        m.validate()?;
        Ok(m)
    }

    /// Prior mean, infinite for Pareto tails `<= 1`.
    pub fn mean(&self) -> f64 {
        match *self {
            Self::Gamma { shape, rate } => shape / rate,
            Self::Exponential { rate } => 1.0 / rate,
            Self::Pareto { tail, scale } => {
                if tail > 1.0 {
                    tail * scale / (tail - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            Self::PointMass { location } => location,
        }
    }

    /// Lower end of the support.
    pub fn support_lower(&self) -> f64 {
        match *self {
            Self::Pareto { scale, .. } => scale,
            Self::PointMass { location } => location,
            _ => 0.0,
        }
    }

    /// Log density of the prior; point masses have none.
    pub fn ln_pdf(&self, theta: f64) -> Result<f64> {
        match *self {
            Self::Gamma { .. } | Self::Exponential { .. } => {
                let (a, b) = self.gamma_kernel().unwrap_or_default();
                if theta <= 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                Ok(a * b.ln() - ln_gamma_pos(a) + (a - 1.0) * theta.ln() - b * theta)
            }
            Self::Pareto { tail, scale } => {
                if theta < scale {
                    return Ok(f64::NEG_INFINITY);
                }
                Ok(tail.ln() + tail * scale.ln() - (tail + 1.0) * theta.ln())
            }
            Self::PointMass { .. } => Err(Error::InvalidInput("a point mass has no density".into())),
        }
    }

    /// Draws one value from the prior.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let bad = |e: &dyn std::fmt::Display| Error::InvalidInput(e.to_string());
        match *self {
            Self::Gamma { shape, rate } => {
                Ok(rand_distr::Gamma::new(shape, 1.0 / rate).map_err(|e| bad(&e))?.sample(rng))
            }
            Self::Exponential { rate } => Ok(rand_distr::Exp::new(rate).map_err(|e| bad(&e))?.sample(rng)),
            Self::Pareto { tail, scale } => {
                Ok(rand_distr::Pareto::new(scale, tail).map_err(|e| bad(&e))?.sample(rng))
            }
            Self::PointMass { location } => Ok(location),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: SignedLogReal, b: f64) -> f64 {
        a.rel_diff(SignedLogReal::from_f64(b))
    }

    fn families() -> Vec<PriorMgf> {
        vec![
            PriorMgf::gamma(4.5, 2.0).unwrap(),
            PriorMgf::gamma(0.3, 0.7).unwrap(),
            PriorMgf::exponential(0.9).unwrap(),
            PriorMgf::pareto(3.5, 0.4).unwrap(),
            PriorMgf::point_mass(1.7).unwrap(),
        ]
    }

    #[test]
    fn gamma_mgf_example() {
        let m = PriorMgf::gamma(4.0, 5.0).unwrap();
        assert!(rel(m.eval(-1.0).unwrap(), 625.0 / 1296.0) < 1e-15);
        assert!((m.eval(-1.0).unwrap().to_f64() - 0.482_253_1).abs() < 5e-8);
    }

    #[test]
    fn every_family_is_one_at_zero() {
        for m in families() {
            assert!((m.eval(0.0).unwrap().to_f64() - 1.0).abs() < 1e-15, "{m:?}");
        }
    }

    #[test]
    fn pareto_normalisation_near_zero() {
        // αE_{α+1}(0+) -> 1
        let m = PriorMgf::pareto(2.5, 1.3).unwrap();
        assert!((m.eval(-1e-12).unwrap().to_f64() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn boundary_is_a_domain_error() {
        let g = PriorMgf::gamma(2.0, 3.0).unwrap();
        assert!(matches!(g.eval(3.0), Err(Error::Domain(_))));
        assert!(matches!(g.eval(3.5), Err(Error::Domain(_))));
        assert!(matches!(PriorMgf::pareto(2.0, 1.0).unwrap().eval(0.1), Err(Error::Domain(_))));
        assert!(PriorMgf::point_mass(2.0).unwrap().eval(100.0).is_ok());
        assert!(PriorMgf::gamma(-1.0, 2.0).is_err());
        assert!(PriorMgf::point_mass(-0.5).is_err());
    }

    #[test]
    fn integer_derivative_examples() {
        let g = PriorMgf::gamma(4.0, 6.0).unwrap();
        let want = (6.0 * 5.0 * 4.0) / 1000.0 * 1296.0 / 10000.0;
        assert!(rel(g.deriv_int(3, -4.0).unwrap(), want) < 1e-14);
        assert!((g.deriv_int(3, -4.0).unwrap().to_f64() - 0.015_552).abs() < 1e-15);
        let e = PriorMgf::exponential(0.9).unwrap();
        assert!(rel(e.deriv_int(2, -2.2).unwrap(), 2.0 * 0.9 / 3.1f64.powi(3)) < 1e-14);
        for m in families() {
            assert_eq!(m.deriv_int(0, -0.3).unwrap(), m.eval(-0.3).unwrap());
        }
    }

    #[test]
    fn pareto_derivative_at_zero() {
        let m = PriorMgf::pareto(3.5, 0.4).unwrap();
        // E[θ^2] = α k^2 / (α - 2)
        assert!(rel(m.deriv_int(2, 0.0).unwrap(), 3.5 * 0.16 / 1.5) < 1e-14);
        assert!(matches!(m.deriv_int(4, 0.0), Err(Error::Divergence(_))));
        assert!(matches!(PriorMgf::pareto(2.0, 1.0).unwrap().deriv_int(2, 0.0), Err(Error::Divergence(_))));
    }

    #[test]
    fn pareto_derivative_matches_moment_integral() {
        // E[θ^k e^{tθ}] by quadrature over the Pareto density.
        let (alpha, k, t) = (3.5, 0.4, -0.8);
        let m = PriorMgf::pareto(alpha, k).unwrap();
        for order in 0..6u32 {
            let g = |s: f64| {
                let th = k * s.exp();
                m.ln_pdf(th).unwrap() + f64::from(order) * th.ln() + t * th + th.ln()
            };
            let q = integrate_log(g, 0.0, f64::INFINITY, 1.0, 1.0, &QuadOptions::default()).unwrap();
            let got = m.deriv_int(order, t).unwrap().ln_abs();
            assert!((got - q.ln_value).abs() < 1e-11, "order {order}: {got} {}", q.ln_value);
        }
    }

    #[test]
    fn gamma_recursion_to_order_thirty() {
        let (a, b, t) = (2.3, 1.7, -0.6);
        let m = PriorMgf::gamma(a, b).unwrap();
        for k in 0..30u32 {
            let lhs = m.deriv_int(k + 1, t).unwrap();
            let rhs = SignedLogReal::from_f64((a + f64::from(k)) / (b - t)) * m.deriv_int(k, t).unwrap();
            assert!(lhs.rel_diff(rhs) <= 1e-12, "k={k}");
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for m in families() {
            for t in [-0.7, -2.5] {
                let h = 1e-5 * f64::abs(t);
                for k in 1..=5u32 {
                    let up = m.deriv_int(k - 1, t + h).unwrap().to_f64();
                    let dn = m.deriv_int(k - 1, t - h).unwrap().to_f64();
                    let fd = (up - dn) / (2.0 * h);
                    let exact = m.deriv_int(k, t).unwrap().to_f64();
                    assert!(((fd - exact) / exact).abs() <= 1e-5, "{m:?} k={k} t={t}");
                }
            }
        }
    }

    #[test]
    fn derivatives_are_positive() {
        for m in families() {
            for k in 0..8u32 {
                assert_eq!(m.deriv_int(k, -1.1).unwrap().sign(), 1);
            }
        }
    }

    #[test]
    fn frac_order_split() {
        let o = FracOrder::new(1.5).unwrap();
        assert_eq!(o.integer_part(), 2);
        assert!((o.gamma_frac() - 0.5).abs() < 1e-15);
        let o = FracOrder::new(3.0).unwrap();
        assert!(o.is_integer());
        assert_eq!(o.integer_part(), 3);
        let o = FracOrder::new(0.25).unwrap();
        assert_eq!(o.integer_part(), 1);
        assert!((o.gamma_frac() - 0.75).abs() < 1e-15);
        assert!(FracOrder::new(-0.5).is_err());
    }

    #[test]
    fn exponential_order_one_and_a_half() {
        let (lam, t) = (0.9, -2.2);
        let m = PriorMgf::exponential(lam).unwrap();
        let want = 0.5 * 1.5 * lam * std::f64::consts::PI * (lam - t).powf(-2.5) / std::f64::consts::PI.sqrt();
        let o = FracOrder::new(1.5).unwrap();
        assert!(rel(m.deriv_frac(o, t).unwrap(), want) < 1e-13);
        assert!(rel(m.deriv_frac_with(o, t, FracMethod::MellinUnderIntegral).unwrap(), want) < 1e-10);
        assert!(rel(m.deriv_frac_with(o, t, FracMethod::MellinRichardson).unwrap(), want) < 1e-7);
    }

    #[test]
    fn half_order_mellin_integral_of_exponential() {
        let (lam, t) = (0.9, -2.2);
        let m = PriorMgf::exponential(lam).unwrap();
        let got = m.mellin_integral(0.5, 0, t).unwrap();
        assert!(rel(got, lam * std::f64::consts::PI * (lam - t).powf(-0.5)) < 1e-12);
    }

    #[test]
    fn integer_order_frac_is_deriv_int_exactly() {
        for m in families() {
            for n in 0..5u32 {
                assert_eq!(m.deriv_frac(FracOrder::integer(n), -0.9).unwrap(), m.deriv_int(n, -0.9).unwrap());
            }
        }
    }

    #[test]
    fn mellin_agrees_with_integer_derivatives() {
        for m in families() {
            if matches!(m, PriorMgf::Pareto { .. }) {
                continue;
            }
            for n in 0..6u32 {
                let exact = m.deriv_int(n, -0.9).unwrap();
                let q = m.deriv_frac_with(FracOrder::integer(n), -0.9, FracMethod::MellinUnderIntegral).unwrap();
                assert!(q.rel_diff(exact) <= 1e-7, "{m:?} n={n}");
            }
            for n in 0..=2u32 {
                let exact = m.deriv_int(n, -0.9).unwrap();
                let q = m.deriv_frac_with(FracOrder::integer(n), -0.9, FracMethod::MellinRichardson).unwrap();
                assert!(q.rel_diff(exact) <= 1e-7, "{m:?} n={n} richardson");
            }
        }
    }

    #[test]
    fn pareto_fractional_is_unsupported() {
        let m = PriorMgf::pareto(3.0, 1.0).unwrap();
        let o = FracOrder::new(0.5).unwrap();
        assert!(matches!(m.deriv_frac(o, -1.0), Err(Error::UnsupportedFractional(_))));
        assert!(matches!(
            m.deriv_frac_with(o, -1.0, FracMethod::MellinUnderIntegral),
            Err(Error::UnsupportedFractional(_))
        ));
    }

    #[test]
    fn richardson_order_cap() {
        let m = PriorMgf::gamma(2.0, 1.0).unwrap();
        let o = FracOrder::new(4.5).unwrap();
        assert!(m.deriv_frac_with(o, -1.0, FracMethod::MellinRichardson).is_err());
    }

    #[test]
    fn point_mass_fractional() {
        let m = PriorMgf::point_mass(1.7).unwrap();
        let o = FracOrder::new(2.3).unwrap();
        let want = 1.7f64.powf(2.3) * (1.7f64 * -0.4).exp();
        assert!(rel(m.deriv_frac(o, -0.4).unwrap(), want) < 1e-14);
        assert!(rel(m.deriv_frac_with(o, -0.4, FracMethod::MellinUnderIntegral).unwrap(), want) < 1e-10);
    }

    #[test]
    fn scaled_prior_is_mgf_composition() {
        for m in families() {
            let c = 2.5;
            let sm = m.scaled(c).unwrap();
            for k in 0..4u32 {
                let lhs = sm.deriv_int(k, -0.3).unwrap();
                let rhs = m.deriv_int(k, -0.3 * c).unwrap() * SignedLogReal::from_f64(c).powi(k as i32);
                assert!(lhs.rel_diff(rhs) < 1e-12, "{m:?} {k}");
            }
        }
    }

    #[test]
    fn sampling_means() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for m in [PriorMgf::gamma(4.5, 2.0).unwrap(), PriorMgf::exponential(0.9).unwrap(), PriorMgf::pareto(5.0, 0.4).unwrap()] {
            let n = 200_000;
            let s: f64 = (0..n).map(|_| m.sample(&mut rng).unwrap()).sum::<f64>() / n as f64;
            assert!((s - m.mean()).abs() < 0.02 * m.mean(), "{m:?} {s}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn fractional_mellin_matches_closed_form(a in 0.2f64..20.0, b in 0.1f64..10.0, alpha in 0.01f64..6.0, d in 0.05f64..20.0) {
            let m = PriorMgf::gamma(a, b).unwrap();
            let t = b - d;
            let o = FracOrder::new(alpha).unwrap();
            let c = m.deriv_frac(o, t).unwrap();
            let q = m.deriv_frac_with(o, t, FracMethod::MellinUnderIntegral).unwrap();
            prop_assert!(c.rel_diff(q) <= 1e-9, "{} {}", c, q);
        }
    }
}
