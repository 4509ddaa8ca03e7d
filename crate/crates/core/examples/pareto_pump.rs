//! One Pareto rate shared by all pumps. The heavy-tailed prior has no closed
//! form marginal, so the mgf route is checked by quadrature.

use mgf_marginal::error::Result;
use mgf_marginal::marginalize::poisson_scaled;
use mgf_marginal::mgf::PriorMgf;
use mgf_marginal::models::PumpData;
use mgf_marginal::oracles::{ln_poisson_prefactor, quadrature_poisson};

pub fn run() -> Result<f64> {
    let pump = PumpData::load();
    let problem = pump.shared_rate_problem(PriorMgf::pareto(80.0, 0.01)?);
    let res = poisson_scaled(&problem)?;
    let quad = quadrature_poisson(&problem)?;
    println!("Poisson prefactor: ln = {:.12}", ln_poisson_prefactor(&pump.y, &pump.t)?);
    println!("mgf route ({}): log p(y) = {:.12}", res.path, res.log_value);
    println!("quadrature:            log p(y) = {:.12} (rel. error estimate {:.1e})", quad.value.ln_abs(), quad.rel_error);
    Ok((res.log_value - quad.value.ln_abs()).abs())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run().map(|_| ())
}
