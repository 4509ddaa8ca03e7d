//! Adaptive Gauss–Kronrod quadrature for integrands given by their logarithm.
//!
//! The caller supplies `g = ln f`. The integrator locates the peak of `g`,
//! truncates the range where `g` falls a fixed number of nats below it and
//! integrates `exp(g - gmax)` with a globally adaptive 21-point rule.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Tuning knobs for [`integrate_log`].
#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    /// Target relative error of the integral.
    pub rel_tol: f64,
    /// Hard cap on the number of interval bisections.
    pub max_subdivisions: usize,
    /// Nats below the peak at which the range is truncated.
    pub log_cutoff: f64,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-13, max_subdivisions: 1 << 20, log_cutoff: 60.0 }
    }
}

impl QuadOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self { rel_tol, ..Self::default() }
    }
}

/// Result of a log-space integral.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogIntegral {
    /// Natural log of the integral.
    pub ln_value: f64,
    /// Estimated relative error of the integral (absolute error of `ln_value`).
    pub rel_error: f64,
    /// Number of integrand evaluations.
    pub evaluations: usize,
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * res_abs;
        if min_err > scaled {
            scaled = min_err;
        }
    }
    scaled
}

/// One 21-point Gauss–Kronrod panel: `(integral, error estimate)`.
fn qk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_abs = res_k.abs();
    let mut res_g = 0.0;
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let (f1, f2) = (f(center - dx), f(center + dx));
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let scale = half.abs();
    let err = rescale_error((res_k - res_g) * half, res_abs * scale, res_asc * scale);
    (res_k * half, err)
}

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive integration of a non-negative bounded `f` over consecutive
/// breakpoints. Returns `(integral, absolute error estimate)`.
fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    breaks: &[f64],
    opts: &QuadOptions,
) -> Result<(f64, f64)> {
    let mut heap = BinaryHeap::new();
    let mut done: Vec<Panel> = Vec::new();
    let (mut total, mut total_err) = (0.0, 0.0);
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (value, err) = qk21(f, w[0], w[1]);
            total += value;
            total_err += err;
            heap.push(Panel { a: w[0], b: w[1], value, err });
        }
    }
    let mut splits = 0usize;
    while total_err > opts.rel_tol * total.abs() {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            done.push(worst);
            continue;
        }
        splits += 1;
        if splits > opts.max_subdivisions {
            return Err(Error::Quadrature(format!(
                "exceeded {} subdivisions (estimated relative error {:.3e})",
                opts.max_subdivisions,
                total_err / total.abs()
            )));
        }
        let (v1, e1) = qk21(f, worst.a, mid);
        let (v2, e2) = qk21(f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Panel { a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, err: e2 });
        if splits.is_multiple_of(4096) {
            // Refresh running sums to stop drift.
            total = heap.iter().chain(done.iter()).map(|p| p.value).sum();
            total_err = heap.iter().chain(done.iter()).map(|p| p.err).sum();
        }
    }
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.extend(done);
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let total: f64 = panels.iter().map(|p| p.value).sum();
    let total_err: f64 = panels.iter().map(|p| p.err).sum();
    Ok((total, total_err))
}

fn checked<G: Fn(f64) -> f64>(g: &G, x: f64) -> Result<f64> {
    let v = g(x);
    if v.is_nan() {
        return Err(Error::Quadrature(format!("log-integrand is NaN at {x}")));
    }
    if v == f64::INFINITY {
        return Err(Error::Divergence(format!("log-integrand is +inf at {x}")));
    }
    Ok(v)
}

/// Walks from `x0` towards `limit` with growing steps until `g` has dropped
/// `cutoff` nats below the running maximum. Returns the visited points.
fn explore<G: Fn(f64) -> f64>(
    g: &G,
    x0: f64,
    g0: f64,
    limit: f64,
    scale: f64,
    dir: f64,
    gmax: &mut f64,
    cutoff: f64,
) -> Result<(Vec<(f64, f64)>, f64)> {
    let mut pts = Vec::new();
    let mut x = x0;
    let mut prev = g0;
    let mut step = scale;
    for _ in 0..4000 {
        let nx = x + dir * step;
        if !nx.is_finite() {
            break;
        }
        if (dir > 0.0 && nx >= limit) || (dir < 0.0 && nx <= limit) {
            return Ok((pts, limit));
        }
        let gx = checked(g, nx)?;
        pts.push((nx, gx));
        if gx > *gmax {
            *gmax = gx;
        }
        if gx < *gmax - cutoff && gx <= prev {
            return Ok((pts, nx));
        }
        prev = gx;
        x = nx;
        step *= 1.6;
    }
    Err(Error::Divergence("integrand does not decay".into()))
}

/// Golden-section refinement of a local maximum of `g` inside `[a, b]`.
fn refine_max<G: Fn(f64) -> f64>(g: &G, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..80 {
        if gc.is_nan() || gd.is_nan() {
            break;
        }
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
        if (b - a) <= 1e-12 * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
    }
    if gc > gd {
        (c, gc)
    } else {
        (d, gd)
    }
}

/// Integrates `exp(g(x))` over `(lo, hi)`; either bound may be infinite.
///
/// `hint` should lie near the peak of `g` and `scale` should be a rough
/// width of the peak. The integrand must be unimodal or at least have all
/// its mass reachable by walking outward from `hint`.
pub fn integrate_log<G: Fn(f64) -> f64>(
    g: G,
    lo: f64,
    hi: f64,
    hint: f64,
    scale: f64,
    opts: &QuadOptions,
) -> Result<LogIntegral> {
    if !(lo < hi) {
        return Err(Error::InvalidInput(format!("empty integration range ({lo}, {hi})")));
    }
    let count = Cell::new(0usize);
    let g = |x: f64| {
        count.set(count.get() + 1);
        g(x)
    };
    let scale = if scale.is_finite() && scale > 0.0 { scale } else { 1.0 };
    let x0 = if hint.is_finite() { hint } else { 0.0 };
    let x0 = if x0 <= lo || x0 >= hi {
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo + scale,
            (false, true) => hi - scale,
            (false, false) => 0.0,
        }
    } else {
        x0
    };
    let g0 = checked(&g, x0)?;
    let mut gmax = g0;
    let (right, r_end) = explore(&g, x0, g0, hi, scale, 1.0, &mut gmax, opts.log_cutoff)?;
    let (left, l_end) = explore(&g, x0, g0, lo, scale, -1.0, &mut gmax, opts.log_cutoff)?;

    let mut pts: Vec<(f64, f64)> = left.into_iter().rev().collect();
    pts.push((x0, g0));
    pts.extend(right);
    if gmax == f64::NEG_INFINITY {
        return Err(Error::Quadrature("integrand vanishes on every probe".into()));
    }
    let best = pts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let ba = if best == 0 { l_end } else { pts[best - 1].0 };
    let bb = if best + 1 == pts.len() { r_end } else { pts[best + 1].0 };
    let (ba, bb) = (ba.max(pts[best].0 - 1e6 * scale), bb.min(pts[best].0 + 1e6 * scale));
    let (xm, gm) = refine_max(&g, ba, bb);
    if gm.is_finite() && gm > gmax {
        gmax = gm;
    }
    let mut breaks: Vec<f64> = pts.iter().map(|p| p.0).collect();
    if xm.is_finite() && xm > l_end && xm < r_end {
        breaks.push(xm);
        // Geometric ladder around the peak so narrow modes are resolved.
        for (dir, end) in [(1.0, bb), (-1.0, ba)] {
            let span = (end - xm).abs();
            if !(span > 0.0) {
                continue;
            }
            let mut d = span;
            for _ in 0..200 {
                let gd = g(xm + dir * d);
                if gd.is_nan() || gm - gd <= 4.0 {
                    break;
                }
                d *= 0.5;
            }
            while d < span {
                breaks.push(xm + dir * d);
                d *= 2.0;
            }
        }
    }
    breaks.push(l_end);
    breaks.push(r_end);
    breaks.retain(|x| x.is_finite());
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    if breaks.len() < 2 {
        return Err(Error::Quadrature("degenerate integration range".into()));
    }

    let mut shift = gmax;
    for _ in 0..3 {
        let seen = Cell::new(f64::NEG_INFINITY);
        let f = |x: f64| {
            let v = g(x);
            if v > seen.get() {
                seen.set(v);
            }
            if v.is_nan() {
                f64::NAN
            } else {
                (v - shift).exp()
            }
        };
        let (value, err) = adaptive(&f, &breaks, opts)?;
        if !value.is_finite() {
            if seen.get() > shift {
                shift = seen.get();
                continue;
            }
            return Err(Error::Quadrature("non-finite panel sum".into()));
        }
        if seen.get() > shift + 1.0 {
            shift = seen.get();
            continue;
        }
        if value <= 0.0 {
            return Err(Error::Quadrature("integral underflowed".into()));
        }
        return Ok(LogIntegral {
            ln_value: shift + value.ln(),
            rel_error: err / value,
            evaluations: count.get(),
        });
    }
    Err(Error::Quadrature("could not stabilise the integrand scale".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_integral() {
        let r = integrate_log(|x| -0.5 * x * x, f64::NEG_INFINITY, f64::INFINITY, 3.0, 1.0, &QuadOptions::default())
            .unwrap();
        let exact = (2.0 * std::f64::consts::PI).sqrt().ln();
        assert!((r.ln_value - exact).abs() < 1e-14, "{}", r.ln_value - exact);
        assert!(r.rel_error < 1e-13);
    }

    #[test]
    fn narrow_peak_far_from_hint() {
        // Normal with sd 1e-3 centered at 40, started from 0.
        let s = 1e-3;
        let r = integrate_log(
            |x| -0.5 * ((x - 40.0) / s).powi(2) + 1000.0,
            f64::NEG_INFINITY,
            f64::INFINITY,
            0.0,
            1.0,
            &QuadOptions::default(),
        )
        .unwrap();
        let exact = 1000.0 + (s * (2.0 * std::f64::consts::PI).sqrt()).ln();
        // Conditioning of x - 40 at this width limits accuracy to about 1e-11.
        assert!((r.ln_value - exact).abs() < 1e-10, "{}", r.ln_value - exact);
    }

    #[test]
    fn half_line_exponential() {
        // int_0^inf exp(-2x) dx = 1/2
        let r = integrate_log(|x| -2.0 * x, 0.0, f64::INFINITY, 0.0, 1.0, &QuadOptions::default()).unwrap();
        assert!((r.ln_value - 0.5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn non_decaying_integrand_is_divergent() {
        let r = integrate_log(|x| 0.1 * x, 0.0, f64::INFINITY, 1.0, 1.0, &QuadOptions::default());
        assert!(matches!(r, Err(Error::Divergence(_))));
    }

    #[test]
    fn subdivision_cap_is_reported() {
        let opts = QuadOptions { rel_tol: 1e-15, max_subdivisions: 2, log_cutoff: 60.0 };
        let r = integrate_log(|x: f64| (x.sin() * 30.0).exp().ln(), 0.0, 50.0, 1.0, 1.0, &opts);
        assert!(matches!(r, Err(Error::Quadrature(_))));
    }
}
