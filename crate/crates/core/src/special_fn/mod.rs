//! Special functions evaluated in log space.
//!
//! Everything here is a pure function. Probability-like results are returned
//! as [`SignedLogReal`] so that values of order `1e-300` or `1e300` survive.

pub mod quadrature;
mod signed_log;

pub use signed_log::SignedLogReal;

use crate::error::{Error, Result};
use quadrature::{integrate_log, QuadOptions};

const LANCZOS_G: f64 = 607.0 / 128.0;
const LANCZOS: [f64; 15] = [
    0.999_999_999_999_997_091_82,
    57.156_235_665_862_923_517,
    -59.597_960_355_475_491_248,
    14.136_097_974_741_747_174,
    -0.491_913_816_097_620_199_78,
    0.339_946_499_848_118_886_99e-4,
    0.465_236_289_270_485_756_65e-4,
    -0.983_744_753_048_795_646_77e-4,
    0.158_088_703_224_912_488_84e-3,
    -0.210_264_441_724_104_883_19e-3,
    0.217_439_618_115_212_643_20e-3,
    -0.164_318_106_536_763_890_22e-3,
    0.844_182_239_838_527_432_93e-4,
    -0.261_908_384_015_814_086_70e-4,
    0.368_991_826_595_316_227_04e-5,
];

const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_61;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_741_78;

/// Riemann zeta at integers `k >= 2`.
fn zeta_int(k: u32) -> f64 {
    const Z: [f64; 9] = [
        1.644_934_066_848_226_436_5,
        1.202_056_903_159_594_285_4,
        1.082_323_233_711_138_191_5,
        1.036_927_755_143_369_926_3,
        1.017_343_061_984_449_139_7,
        1.008_349_277_381_922_826_8,
        1.004_077_356_197_944_339_4,
        1.002_008_392_826_082_214_4,
        1.000_994_575_127_818_085_3,
    ];
    if k <= 10 {
        return Z[(k - 2) as usize];
    }
    1.0 + (2..40).map(|n| f64::from(n).powi(-(k as i32))).sum::<f64>()
}

/// `ln Γ(1 + e)` for small `|e|` via the Taylor series about 1.
fn ln_gamma_1p_series(e: f64) -> f64 {
    let mut acc = -EULER_GAMMA * e;
    let mut pow = -e;
    for k in 2..60u32 {
        pow *= -e;
        let term = zeta_int(k) * pow / f64::from(k);
        acc += term;
        if term.abs() < 1e-18 * acc.abs().max(1e-300) {
            break;
        }
    }
    acc
}

fn ln_gamma_lanczos(x: f64) -> f64 {
    // Γ(x) with x >= 0.5, written as Γ(z + 1), z = x - 1.
    let z = x - 1.0;
    let mut a = LANCZOS[0];
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (z + 0.5) * t.ln() - t + a.ln()
}

/// Natural log of the gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("log_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma_pos(x))
}

/// Unchecked `ln Γ(x)` for `x > 0`.
pub(crate) fn ln_gamma_pos(x: f64) -> f64 {
    if (x - 1.0).abs() < 0.2 {
        return ln_gamma_1p_series(x - 1.0);
    }
    if (x - 2.0).abs() < 0.2 {
        let e = x - 2.0;
        return e.ln_1p() + ln_gamma_1p_series(e);
    }
    if x < 0.5 {
        return ln_gamma_pos(x + 1.0) - x.ln();
    }
    ln_gamma_lanczos(x)
}

/// `ln n!`
pub fn ln_factorial(n: u64) -> f64 {
    ln_gamma_pos(n as f64 + 1.0)
}

/// Upper incomplete gamma `Γ(s, z) = ∫_z^∞ t^{s-1} e^{-t} dt` for any real `s`.
///
/// `z = 0` is accepted when `s > 0` and gives the complete gamma function.
pub fn upper_incomplete_gamma(s: f64, z: f64) -> Result<SignedLogReal> {
    Ok(SignedLogReal::from_ln(ln_upper_incomplete_gamma(s, z)?))
}

/// `ln Γ(s, z)`; see [`upper_incomplete_gamma`].
pub fn ln_upper_incomplete_gamma(s: f64, z: f64) -> Result<f64> {
    if !s.is_finite() || z.is_nan() {
        return Err(Error::Domain(format!("incomplete gamma at s={s}, z={z}")));
    }
    if z == 0.0 && s > 0.0 {
        return Ok(ln_gamma_pos(s));
    }
    if !(z > 0.0) || z == f64::INFINITY {
        return Err(Error::Domain(format!("incomplete gamma requires z > 0, got {z}")));
    }
    // t = z e^v maps (z, inf) to (0, inf).
    let g = |v: f64| s * v - z * v.exp();
    let (hint, scale) = if s > z {
        ((s / z).ln(), 1.0 / s.sqrt())
    } else {
        (0.0, (1.0 / (z - s)).min(1.0))
    };
    let r = integrate_log(g, 0.0, f64::INFINITY, hint, scale, &QuadOptions::default())?;
    Ok(s * z.ln() + r.ln_value)
}

/// Generalised exponential integral `E_ν(z) = ∫_1^∞ e^{-zt} t^{-ν} dt`.
pub fn exp_integral_e(nu: f64, z: f64) -> Result<SignedLogReal> {
    Ok(SignedLogReal::from_ln(ln_exp_integral_e(nu, z)?))
}

/// `ln E_ν(z)` through the incomplete gamma identity `E_ν(z) = z^{ν-1} Γ(1-ν, z)`.
pub fn ln_exp_integral_e(nu: f64, z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() || !nu.is_finite() {
        return Err(Error::Domain(format!("E_nu requires z > 0, got nu={nu}, z={z}")));
    }
    Ok((nu - 1.0) * z.ln() + ln_upper_incomplete_gamma(1.0 - nu, z)?)
}

/// `ln E_ν(z)` by direct quadrature of `e^{-z} ∫_0^∞ e^{-zu} (1+u)^{-ν} du`.
///
/// Kept as an independent route for cross-checking.
pub fn ln_exp_integral_e_direct(nu: f64, z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() || !nu.is_finite() {
        return Err(Error::Domain(format!("E_nu requires z > 0, got nu={nu}, z={z}")));
    }
    let g = |u: f64| -z * u - nu * u.ln_1p();
    let peak = -nu / z - 1.0;
    let (hint, scale) = if peak > 0.0 {
        (peak, ((-nu).sqrt() / z).max(1e-6))
    } else {
        (0.0, (1.0 / (z + nu.max(0.0))).min(1.0))
    };
    let r = integrate_log(g, 0.0, f64::INFINITY, hint, scale, &QuadOptions::default())?;
    Ok(-z + r.ln_value)
}

/// Poisson log mass `y ln λ - λ - ln y!`.
pub fn log_poisson_pmf(y: u64, rate: f64) -> Result<f64> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::Domain(format!("Poisson rate must be positive, got {rate}")));
    }
    Ok(y as f64 * rate.ln() - rate - ln_factorial(y))
}

/// Negative binomial log mass: `Γ(y+r)/(Γ(r) y!) p^r (1-p)^y`.
pub fn log_negbin_pmf(y: u64, size: f64, prob: f64) -> Result<f64> {
    if !(size > 0.0) || !size.is_finite() {
        return Err(Error::Domain(format!("negative binomial size must be positive, got {size}")));
    }
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::Domain(format!("negative binomial prob must lie in (0, 1), got {prob}")));
    }
    let yf = y as f64;
    let coef = if y == 0 { 0.0 } else { ln_gamma_pos(yf + size) - ln_gamma_pos(size) - ln_factorial(y) };
    Ok(coef + size * prob.ln() + yf * (-prob).ln_1p())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Stirling series after shifting the argument above 30.
    fn ln_gamma_stirling(x: f64) -> f64 {
        let mut shift = 0.0;
        let mut y = x;
        while y < 30.0 {
            shift += y.ln();
            y += 1.0;
        }
        let b = [1.0 / 12.0, -1.0 / 360.0, 1.0 / 1260.0, -1.0 / 1680.0, 1.0 / 1188.0, -691.0 / 360360.0];
        let mut s = 0.0;
        let mut p = y;
        for c in b {
            s += c / p;
            p *= y * y;
        }
        (y - 0.5) * y.ln() - y + LN_SQRT_2PI + s - shift
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs()
    }

    #[test]
    fn log_gamma_trivial_values() {
        assert_eq!(log_gamma(1.0).unwrap(), 0.0);
        assert!(close(log_gamma(0.5).unwrap(), std::f64::consts::PI.sqrt().ln(), 1e-14));
        assert!(matches!(log_gamma(0.0), Err(Error::Domain(_))));
        assert!(matches!(log_gamma(-1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn log_gamma_reference_values() {
        // High-precision references evaluated at the exact binary inputs.
        let cases = [
            (1e-6, 13.815_509_980_749_431_714),
            (0.1, 2.252_712_651_734_205_902_0),
            (0.999, 0.000_578_038_532_891_380_238_17),
            (1.001, -0.000_576_393_598_283_306_151_52),
            (1.5, -0.120_782_237_635_245_222_35),
            (2.0001, 0.000_042_281_658_112_919_946_317),
            (4.5, 2.453_736_570_842_442_220_5),
            (100.25, 360.284_559_637_764_234_97),
            (1e6, 12_815_504.569_147_611_66),
        ];
        for (x, want) in cases {
            let got = log_gamma(x).unwrap();
            assert!(close(got, want, 1e-13), "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn incomplete_gamma_reference_values() {
        let cases = [
            (-73.5, 350.032, -786.647_382_079_314_777_06),
            (2.5, 0.5, 0.246_529_991_159_281_032_90),
            (-0.5, 1e-8, 9.903_310_301_442_990_571_2),
            (0.0, 1e-10, 3.111_229_822_368_937_960_4),
            (80.0, 60.0, 269.283_249_012_742_328_94),
            (-80.0, 0.1, 179.723_515_803_032_336_01),
            (0.5, 30.0, -31.716_622_089_780_041_675),
        ];
        for (s, z, want) in cases {
            let got = ln_upper_incomplete_gamma(s, z).unwrap();
            assert!((got - want).abs() <= 1e-13 * want.abs().max(1.0), "s={s} z={z}: {got} vs {want}");
        }
    }

    #[test]
    fn incomplete_gamma_trivial_values() {
        for z in [0.01, 1.0, 7.5, 300.0] {
            let got = ln_upper_incomplete_gamma(1.0, z).unwrap();
            assert!((got + z).abs() < 1e-13 * z.max(1.0));
        }
        let full = upper_incomplete_gamma(0.5, 0.0).unwrap();
        assert!(close(full.to_f64(), std::f64::consts::PI.sqrt(), 1e-14));
        assert!(matches!(upper_incomplete_gamma(-0.5, 0.0), Err(Error::Domain(_))));
        assert!(matches!(upper_incomplete_gamma(1.0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn exp_integral_reference_values() {
        let cases = [
            (1.0, 1.0, -1.516_931_959_002_045_610_9),
            (6.0, 3.50032, -5.688_360_950_488_833_460_4),
            (-73.5, 3.50032, 152.081_540_103_132_148_88),
            (0.5, 2.0, -2.864_245_800_477_359_207_1),
            (40.0, 0.01, -3.673_824_767_533_779_638_6),
        ];
        for (nu, z, want) in cases {
            let got = ln_exp_integral_e(nu, z).unwrap();
            assert!((got - want).abs() <= 1e-13 * want.abs().max(1.0), "nu={nu} z={z}: {got} vs {want}");
        }
        assert!(close(exp_integral_e(1.0, 1.0).unwrap().to_f64(), 0.219_383_934_395_520_27, 1e-13));
    }

    #[test]
    fn exp_integral_order_zero() {
        for z in [0.3, 2.0, 40.0] {
            let want = -z - f64::ln(z);
            assert!((ln_exp_integral_e(0.0, z).unwrap() - want).abs() < 1e-13 * want.abs().max(1.0));
        }
        assert!(matches!(exp_integral_e(1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn pmf_values() {
        assert!(close(log_poisson_pmf(0, 2.5).unwrap(), -2.5, 1e-15));
        assert!(close(log_poisson_pmf(2, 1.5).unwrap(), -1.382_216_964_343_616_545_5, 1e-14));
        assert!(matches!(log_poisson_pmf(1, 0.0), Err(Error::Domain(_))));
        assert!(close(log_negbin_pmf(0, 4.0, 5.0 / 6.0).unwrap().exp(), 0.482_253_1, 1e-7));
        assert!(close(log_negbin_pmf(0, 2.5, 0.3).unwrap(), 2.5 * 0.3f64.ln(), 1e-15));
        assert!(close(log_negbin_pmf(3, 6.0, 5.0 / 6.0).unwrap(), -2.443_856_057_712_743_526_4, 1e-14));
        assert!(matches!(log_negbin_pmf(1, 1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn negbin_recurrence_from_zero() {
        // P(y+1)/P(y) = (y+r)/(y+1) (1-p)
        let (r, p) = (6.0, 5.0 / 6.0);
        let mut lp = log_negbin_pmf(0, r, p).unwrap();
        for y in 0..30u64 {
            lp += ((y as f64 + r) / (y as f64 + 1.0)).ln() + (1.0 - p).ln();
            assert!((log_negbin_pmf(y + 1, r, p).unwrap() - lp).abs() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn log_gamma_matches_stirling(x in 1e-6f64..1e6) {
            let want = ln_gamma_stirling(x);
            let got = log_gamma(x).unwrap();
            prop_assert!((got - want).abs() <= 1e-13 * want.abs().max(1.0), "x={} {} {}", x, got, want);
        }

        #[test]
        fn incomplete_gamma_recurrence(s in -80f64..80.0, z in 0.1f64..500.0) {
            let lhs = upper_incomplete_gamma(s + 1.0, z).unwrap();
            let rhs = SignedLogReal::from_f64(s) * upper_incomplete_gamma(s, z).unwrap()
                + SignedLogReal::from_ln(s * z.ln() - z);
            prop_assert!(lhs.rel_diff(rhs) <= 1e-10, "s={} z={} {}", s, z, lhs.rel_diff(rhs));
        }

        #[test]
        fn exp_integral_two_routes_agree(nu in -80f64..80.0, z in 0.05f64..400.0) {
            let a = ln_exp_integral_e(nu, z).unwrap();
            let b = ln_exp_integral_e_direct(nu, z).unwrap();
            prop_assert!((a - b).abs() <= 1e-8, "nu={} z={} {} {}", nu, z, a, b);
        }
    }

    #[test]
    fn exp_integral_derivative_recurrence() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let nu: f64 = rng.random_range(-20.0..20.0);
            let z: f64 = rng.random_range(0.2..50.0);
            let h = 1e-4;
            let up = exp_integral_e(nu, z + h).unwrap().to_f64();
            let dn = exp_integral_e(nu, z - h).unwrap().to_f64();
            let fd = (up - dn) / (2.0 * h);
            let want = -exp_integral_e(nu - 1.0, z).unwrap().to_f64();
            assert!(((fd - want) / want).abs() <= 1e-6, "nu={nu} z={z} fd={fd} want={want}");
        }
    }
}
