//! Pump failure counts with independent gamma rates, checked against the
//! negative binomial closed form.

use mgf_marginal::error::Result;
use mgf_marginal::marginalize::poisson_scaled;
use mgf_marginal::mgf::PriorMgf;
use mgf_marginal::models::PumpData;
use mgf_marginal::oracles::negbin_mixture;
use mgf_marginal::special_fn::SignedLogReal;

pub fn run() -> Result<f64> {
    let pump = PumpData::load();
    let problem = pump.hierarchical_problem(PriorMgf::gamma(1.27, 0.82)?);
    let res = poisson_scaled(&problem)?;

    let mut oracle = SignedLogReal::from_f64(1.0);
    for (&y, &t) in pump.y.iter().zip(&pump.t) {
        oracle = oracle * negbin_mixture(y, 1.27, 0.82, t)?;
    }
    println!("mgf route ({}): log p(y) = {:.15}", res.path, res.log_value);
    println!("negative binomial:    log p(y) = {:.15}", oracle.ln_abs());
    println!("p(y) = {:.7e}", res.value());
    Ok((res.log_value - oracle.ln_abs()).abs())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run().map(|_| ())
}
