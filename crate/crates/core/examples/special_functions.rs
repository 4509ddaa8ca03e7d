//! Log-space special functions: lnΓ, the upper incomplete gamma and the
//! generalized exponential integral, with signed log arithmetic.

use mgf_marginal::error::Result;
use mgf_marginal::special_fn::{exp_integral_e, ln_upper_incomplete_gamma, log_gamma, SignedLogReal};

pub fn run() -> Result<()> {
    for x in [0.5, 1.0, 4.5, 171.5, 1e6] {
        println!("lnΓ({x}) = {:.15}", log_gamma(x)?);
    }
    // Γ(s, z) for a negative s stays finite in log space.
    for (s, z) in [(0.5, 1.0), (-2.5, 3.0), (10.0, 250.0)] {
        println!("ln Γ({s}, {z}) = {:.15}", ln_upper_incomplete_gamma(s, z)?);
    }
    let e = exp_integral_e(1.5, 80.0)?;
    println!("E_1.5(80) = {:.10e} (ln {:.12})", e.to_f64(), e.ln_abs());

    // e^{-800} - e^{-801} underflows as f64 but not as a signed log value.
    let a = SignedLogReal::from_ln(-800.0);
    let b = SignedLogReal::from_ln(-801.0);
    let d = a - b;
    println!("ln(e^-800 - e^-801) = {:.15}, sign {}", d.ln_abs(), d.sign());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
