//! Dense multivariate truncated power series and mixed partials of mgf products.
//!
//! A [`TruncatedSeries`] stores the Taylor coefficients of a function of `m`
//! variables around a fixed point, truncated at a per-variable maximum order.
//! An [`MgfProduct`] is `∏_i M_i(Σ_j w_ij t_j)`; its mixed partial derivatives
//! are read off the product of lifted factors, or computed factor by factor
//! when no variable is shared.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::mgf::PriorMgf;
use crate::special_fn::{ln_factorial, SignedLogReal};

/// Largest number of coefficients a dense series may hold.
pub const MAX_SERIES_LEN: usize = 10_000_000;
/// Largest total derivative order accepted on the dense path.
pub const MAX_DENSE_TOTAL_ORDER: u32 = 64;

/// Taylor coefficients on the box `0 <= k_j <= max_orders[j]`, row-major with the
/// last variable varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSeries {
    max_orders: Vec<u32>,
    strides: Vec<usize>,
    coeffs: Vec<SignedLogReal>,
}

/// Calls `f(flat)` for every multi-index in the box `0..=bounds`, in increasing flat order.
fn for_each_in_box(bounds: &[u32], strides: &[usize], mut f: impl FnMut(usize, &[u32])) {
    let d = bounds.len();
    let mut idx = vec![0u32; d];
    let mut flat = 0usize;
    loop {
        f(flat, &idx);
        let mut j = d;
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            if idx[j] < bounds[j] {
                idx[j] += 1;
                flat += strides[j];
                break;
            }
            flat -= idx[j] as usize * strides[j];
            idx[j] = 0;
        }
    }
}

impl TruncatedSeries {
    fn zeros(max_orders: &[u32]) -> Result<Self> {
        let mut len: usize = 1;
        for &m in max_orders {
            len = len
                .checked_mul(m as usize + 1)
                .filter(|&l| l <= MAX_SERIES_LEN)
                .ok_or_else(|| Error::SeriesTooLarge(format!("truncation {max_orders:?} exceeds {MAX_SERIES_LEN} coefficients")))?;
        }
        let d = max_orders.len();
        let mut strides = vec![1usize; d];
        for j in (0..d.saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * (max_orders[j + 1] as usize + 1);
        }
        Ok(Self { max_orders: max_orders.to_vec(), strides, coeffs: vec![SignedLogReal::ZERO; len] })
    }

    /// Constant series.
    pub fn constant(max_orders: &[u32], value: SignedLogReal) -> Result<Self> {
        let mut s = Self::zeros(max_orders)?;
        s.coeffs[0] = value;
        Ok(s)
    }

    /// `value + δt_j`.
    pub fn variable(max_orders: &[u32], j: usize, value: SignedLogReal) -> Result<Self> {
        let mut slopes = vec![SignedLogReal::ZERO; max_orders.len()];
        if j >= max_orders.len() {
            return Err(Error::Dimension(format!("variable {j} out of range for {} dimensions", max_orders.len())));
        }
        slopes[j] = SignedLogReal::ONE;
        Self::affine(max_orders, value, &slopes)
    }

    /// `value + Σ_j slopes[j] δt_j`.
    pub fn affine(max_orders: &[u32], value: SignedLogReal, slopes: &[SignedLogReal]) -> Result<Self> {
        if slopes.len() != max_orders.len() {
            return Err(Error::Dimension(format!("{} slopes for {} variables", slopes.len(), max_orders.len())));
        }
        let mut s = Self::constant(max_orders, value)?;
        for (j, &w) in slopes.iter().enumerate() {
            if max_orders[j] > 0 {
                s.coeffs[s.strides[j]] = w;
            }
        }
        Ok(s)
    }

    pub fn dims(&self) -> usize {
        self.max_orders.len()
    }

    pub fn max_orders(&self) -> &[u32] {
        &self.max_orders
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Flat coefficient storage.
    pub fn coeffs(&self) -> &[SignedLogReal] {
        &self.coeffs
    }

    fn flat(&self, index: &[u32]) -> Result<usize> {
        if index.len() != self.dims() {
            return Err(Error::Dimension(format!("index of length {} for {} variables", index.len(), self.dims())));
        }
        let mut f = 0;
        for (j, (&k, &m)) in index.iter().zip(&self.max_orders).enumerate() {
            if k > m {
                return Err(Error::Dimension(format!("order {k} exceeds truncation {m} in variable {j}")));
            }
            f += k as usize * self.strides[j];
        }
        Ok(f)
    }

    /// Taylor coefficient at a multi-index.
    pub fn coeff(&self, index: &[u32]) -> Result<SignedLogReal> {
        Ok(self.coeffs[self.flat(index)?])
    }

    /// Mixed partial derivative at the expansion point: coefficient × ∏ k_j!.
    pub fn derivative(&self, index: &[u32]) -> Result<SignedLogReal> {
        let c = self.coeff(index)?;
        let lf: f64 = index.iter().map(|&k| ln_factorial(u64::from(k))).sum();
        Ok(c * SignedLogReal::from_ln(lf))
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.max_orders != other.max_orders {
            return Err(Error::Dimension(format!(
                "series truncations differ: {:?} vs {:?}",
                self.max_orders, other.max_orders
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| a + b).collect();
        Ok(Self { coeffs, ..self.clone() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        Self { coeffs: self.coeffs.iter().map(|&c| -c).collect(), ..self.clone() }
    }

    /// Multiplies every coefficient by `c`.
    pub fn scale(&self, c: SignedLogReal) -> Self {
        Self { coeffs: self.coeffs.iter().map(|&a| a * c).collect(), ..self.clone() }
    }

    /// Truncated Cauchy product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let mut out = vec![SignedLogReal::ZERO; self.len()];
        let mut room = vec![0u32; self.dims()];
        for_each_in_box(&self.max_orders, &self.strides, |ia, ki| {
            let a = self.coeffs[ia];
            if a.is_zero() {
                return;
            }
            for (r, (&m, &k)) in room.iter_mut().zip(self.max_orders.iter().zip(ki)) {
                *r = m - k;
            }
            for_each_in_box(&room, &self.strides, |ib, _| {
                let b = other.coeffs[ib];
                if !b.is_zero() {
                    out[ia + ib] = out[ia + ib] + a * b;
                }
            });
        });
        Ok(Self { coeffs: out, ..self.clone() })
    }

    /// Sum over `0 != i <= k` of `w(i) a_i b_{k-i}`, used by the power and exp recurrences.
    fn recurrence_sum(
        &self,
        b: &[SignedLogReal],
        k_flat: usize,
        k: &[u32],
        weight: impl Fn(&[u32]) -> f64,
    ) -> SignedLogReal {
        let mut terms = Vec::new();
        for_each_in_box(k, &self.strides, |i_flat, i| {
            if i_flat == 0 {
                return;
            }
            let a = self.coeffs[i_flat];
            let w = weight(i);
            if a.is_zero() || w == 0.0 {
                return;
            }
            terms.push(SignedLogReal::from_f64(w) * a * b[k_flat - i_flat]);
        });
        SignedLogReal::sum_slice(&terms)
    }

    /// `self^p` for real `p`; the constant term must be positive.
    pub fn pow_real(&self, p: f64) -> Result<Self> {
        let a0 = self.coeffs[0];
        if a0.sign() != 1 {
            return Err(Error::NonPositiveConstantTerm);
        }
        let mut b = vec![SignedLogReal::ZERO; self.len()];
        b[0] = a0.powf(p);
        for_each_in_box(&self.max_orders.clone(), &self.strides.clone(), |k_flat, k| {
            if k_flat == 0 {
                return;
            }
            let j = k.iter().position(|&x| x > 0).unwrap_or(0);
            let kj = f64::from(k[j]);
            let s = self.recurrence_sum(&b, k_flat, k, |i| p * f64::from(i[j]) - (kj - f64::from(i[j])));
            b[k_flat] = s / (SignedLogReal::from_f64(kj) * a0);
        });
        Ok(Self { coeffs: b, ..self.clone() })
    }

    /// `exp(self)`.
    pub fn exp(&self) -> Result<Self> {
        let a0 = self.coeffs[0];
        if !a0.is_finite() {
            return Err(Error::Domain("exp of a non-finite constant term".into()));
        }
        let mut b = vec![SignedLogReal::ZERO; self.len()];
        b[0] = SignedLogReal::from_ln(a0.to_f64());
        for_each_in_box(&self.max_orders.clone(), &self.strides.clone(), |k_flat, k| {
            if k_flat == 0 {
                return;
            }
            let j = k.iter().position(|&x| x > 0).unwrap_or(0);
            let kj = f64::from(k[j]);
            let s = self.recurrence_sum(&b, k_flat, k, |i| f64::from(i[j]));
            b[k_flat] = s / SignedLogReal::from_f64(kj);
        });
        Ok(Self { coeffs: b, ..self.clone() })
    }

    /// `f(self)` where `taylor[k] = f^{(k)}(a_0) / k!` and `a_0` is the constant term.
    ///
    /// Terms beyond the total truncation degree are ignored; missing ones are
    /// treated as zero.
    pub fn compose(&self, taylor: &[SignedLogReal]) -> Result<Self> {
        if taylor.is_empty() {
            return Err(Error::InvalidInput("empty Taylor coefficient list".into()));
        }
        let degree: u32 = self.max_orders.iter().sum();
        let top = taylor.len().min(degree as usize + 1);
        let mut delta = self.clone();
        delta.coeffs[0] = SignedLogReal::ZERO;
        let mut r = Self::constant(&self.max_orders, taylor[top - 1])?;
        for k in (0..top - 1).rev() {
            r = r.mul(&delta)?;
            r.coeffs[0] = r.coeffs[0] + taylor[k];
        }
        Ok(r)
    }

    /// Swaps variable axes: axis `j` of the result is axis `perm[j]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        check_perm(perm, self.dims())?;
        let orders: Vec<u32> = perm.iter().map(|&p| self.max_orders[p]).collect();
        let mut out = Self::zeros(&orders)?;
        let strides = out.strides.clone();
        for_each_in_box(&orders, &strides, |flat, idx| {
            let mut src = vec![0u32; idx.len()];
            for (j, &p) in perm.iter().enumerate() {
                src[p] = idx[j];
            }
            out.coeffs[flat] = self.coeffs[self.flat(&src).unwrap_or(0)];
        });
        Ok(out)
    }
}

fn check_perm(perm: &[usize], d: usize) -> Result<()> {
    let mut seen = vec![false; d];
    if perm.len() != d {
        return Err(Error::Dimension(format!("permutation of length {} for {d} variables", perm.len())));
    }
    for &p in perm {
        if p >= d || seen[p] {
            return Err(Error::InvalidInput(format!("{perm:?} is not a permutation")));
        }
        seen[p] = true;
    }
    Ok(())
}

/// One factor `M(Σ_j weights[j] t_j)` of an [`MgfProduct`].
#[derive(Clone, Debug, PartialEq)]
pub struct MgfFactor {
    pub prior: PriorMgf,
    pub weights: Vec<f64>,
}

/// How a factor is turned into a series on the dense path.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LiftMethod {
    /// Power recurrence for gamma kernels, exp recurrence for point masses,
    /// composition for everything else.
    #[default]
    Native,
    /// Composition with the family's univariate Taylor coefficients for every factor.
    Compose,
}

/// Which algorithm produced a mixed partial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Separable,
    Dense,
}

/// `F(t) = ∏_i M_i(Σ_j w_ij t_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MgfProduct {
    dims: usize,
    factors: Vec<MgfFactor>,
}

impl MgfProduct {
    pub fn new(dims: usize, factors: Vec<MgfFactor>) -> Result<Self> {
        for (i, f) in factors.iter().enumerate() {
            if f.weights.len() != dims {
                return Err(Error::Dimension(format!("factor {i} has {} weights, expected {dims}", f.weights.len())));
            }
            if f.weights.iter().any(|w| !w.is_finite()) {
                return Err(Error::InvalidInput(format!("factor {i} has non-finite weights")));
            }
            f.prior.validate()?;
        }
        Ok(Self { dims, factors })
    }

    /// Factor `i` is `priors[i]` applied to column `i` of `r` (shape `dims × factors`).
    pub fn from_columns(priors: &[PriorMgf], r: &Array2<f64>) -> Result<Self> {
        if r.ncols() != priors.len() {
            return Err(Error::Dimension(format!("{} priors for {} columns", priors.len(), r.ncols())));
        }
        let factors = priors
            .iter()
            .enumerate()
            .map(|(i, &prior)| MgfFactor { prior, weights: r.column(i).to_vec() })
            .collect();
        Self::new(r.nrows(), factors)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn factors(&self) -> &[MgfFactor] {
        &self.factors
    }

    fn arguments(&self, t: &[f64]) -> Result<Vec<f64>> {
        if t.len() != self.dims {
            return Err(Error::Dimension(format!("point of length {} for {} variables", t.len(), self.dims)));
        }
        Ok(self.factors.iter().map(|f| f.weights.iter().zip(t).map(|(w, x)| w * x).sum()).collect())
    }

    pub fn eval(&self, t: &[f64]) -> Result<SignedLogReal> {
        let u = self.arguments(t)?;
        let mut acc = SignedLogReal::ONE;
        for (f, &ui) in self.factors.iter().zip(&u) {
            acc = acc * f.prior.eval(ui)?;
        }
        Ok(acc)
    }

    /// True when every variable with positive order enters at most one factor.
    pub fn is_separable(&self, orders: &[u32]) -> bool {
        (0..self.dims.min(orders.len()))
            .filter(|&j| orders[j] > 0)
            .all(|j| self.factors.iter().filter(|f| f.weights[j] != 0.0).count() <= 1)
    }

    /// `∂^{Σk} F / ∂t_1^{k_1} … ∂t_m^{k_m}` at `t`, choosing the separable path when possible.
    pub fn mixed_partial(&self, orders: &[u32], t: &[f64]) -> Result<(SignedLogReal, Strategy)> {
        self.check_orders(orders)?;
        if self.is_separable(orders) {
            Ok((self.mixed_partial_separable(orders, t)?, Strategy::Separable))
        } else {
            Ok((self.mixed_partial_dense(orders, t, LiftMethod::Native)?, Strategy::Dense))
        }
    }

    fn check_orders(&self, orders: &[u32]) -> Result<()> {
        if orders.len() != self.dims {
            return Err(Error::Dimension(format!("{} orders for {} variables", orders.len(), self.dims)));
        }
        Ok(())
    }

    /// Product of univariate derivatives; requires [`is_separable`](Self::is_separable).
    pub fn mixed_partial_separable(&self, orders: &[u32], t: &[f64]) -> Result<SignedLogReal> {
        self.check_orders(orders)?;
        if !self.is_separable(orders) {
            return Err(Error::InvalidInput("variables with positive order are shared between factors".into()));
        }
        let u = self.arguments(t)?;
        let mut covered = vec![false; self.dims];
        let mut acc = SignedLogReal::ONE;
        for (f, &ui) in self.factors.iter().zip(&u) {
            let mut k = 0u32;
            let mut chain = SignedLogReal::ONE;
            for (j, &w) in f.weights.iter().enumerate() {
                if orders[j] > 0 && w != 0.0 {
                    covered[j] = true;
                    k += orders[j];
                    chain = chain * SignedLogReal::from_f64(w).powi(orders[j] as i32);
                }
            }
            acc = acc * f.prior.deriv_int(k, ui)? * chain;
        }
        if (0..self.dims).any(|j| orders[j] > 0 && !covered[j]) {
            return Ok(SignedLogReal::ZERO);
        }
        Ok(acc)
    }

    /// Dense series path over the variables with positive order.
    pub fn mixed_partial_dense(&self, orders: &[u32], t: &[f64], lift: LiftMethod) -> Result<SignedLogReal> {
        let active: Vec<usize> = (0..self.dims).filter(|&j| orders.get(j).copied().unwrap_or(0) > 0).collect();
        self.mixed_partial_dense_ordered(orders, t, lift, &active)
    }

    /// Dense path with the active variables laid out in the order given by `axes`.
    ///
    /// `axes` must list exactly the variables with positive order.
    pub fn mixed_partial_dense_ordered(
        &self,
        orders: &[u32],
        t: &[f64],
        lift: LiftMethod,
        axes: &[usize],
    ) -> Result<SignedLogReal> {
        self.check_orders(orders)?;
        let mut expect: Vec<usize> = (0..self.dims).filter(|&j| orders[j] > 0).collect();
        let mut got = axes.to_vec();
        got.sort_unstable();
        expect.sort_unstable();
        if got != expect {
            return Err(Error::InvalidInput(format!("axes {axes:?} must list the variables with positive order")));
        }
        let total: u32 = orders.iter().sum();
        if total > MAX_DENSE_TOTAL_ORDER {
            return Err(Error::SeriesTooLarge(format!(
                "total order {total} exceeds {MAX_DENSE_TOTAL_ORDER} and the product is not separable"
            )));
        }
        let u = self.arguments(t)?;
        let sub_orders: Vec<u32> = axes.iter().map(|&j| orders[j]).collect();
        let mut acc = TruncatedSeries::constant(&sub_orders, SignedLogReal::ONE)?;
        for (f, &ui) in self.factors.iter().zip(&u) {
            let slopes: Vec<f64> = axes.iter().map(|&j| f.weights[j]).collect();
            let lifted = lift_factor(&f.prior, ui, &slopes, &sub_orders, lift)?;
            acc = acc.mul(&lifted)?;
        }
        acc.derivative(&sub_orders)
    }
}

/// Series of `M(u + Σ_j slopes[j] δ_j)`.
fn lift_factor(prior: &PriorMgf, u: f64, slopes: &[f64], orders: &[u32], lift: LiftMethod) -> Result<TruncatedSeries> {
    let value = prior.eval(u)?;
    if slopes.iter().all(|&w| w == 0.0) {
        return TruncatedSeries::constant(orders, value);
    }
    let sl = |c: f64| -> Vec<SignedLogReal> { slopes.iter().map(|&w| SignedLogReal::from_f64(c * w)).collect() };
    match (lift, *prior) {
        (LiftMethod::Native, PriorMgf::Gamma { .. } | PriorMgf::Exponential { .. }) => {
            let (a, b) = match *prior {
                PriorMgf::Gamma { shape, rate } => (shape, rate),
                PriorMgf::Exponential { rate } => (1.0, rate),
                _ => unreachable!(),
            };
            // b^a (b - u)^{-a}
            let base = TruncatedSeries::affine(orders, SignedLogReal::from_f64(b - u), &sl(-1.0))?;
            Ok(base.pow_real(-a)?.scale(SignedLogReal::from_ln(a * b.ln())))
        }
        (LiftMethod::Native, PriorMgf::PointMass { location }) => {
            TruncatedSeries::affine(orders, SignedLogReal::from_f64(location * u), &sl(location))?.exp()
        }
        _ => {
            let degree: u32 = orders.iter().sum();
            let taylor = prior.taylor_coefficients(u, degree)?;
            TruncatedSeries::affine(orders, SignedLogReal::from_f64(u), &sl(1.0))?.compose(&taylor)
        }
    }
}

/// Free-function form of [`MgfProduct::mixed_partial`].
pub fn mixed_partial(f: &MgfProduct, orders: &[u32], t: &[f64]) -> Result<SignedLogReal> {
    Ok(f.mixed_partial(orders, t)?.0)
}
