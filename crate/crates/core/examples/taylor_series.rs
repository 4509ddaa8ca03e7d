//! Truncated multivariate Taylor series: a mixed partial of a product of
//! mgfs computed densely and, where the orders allow, separably.

use mgf_marginal::error::Result;
use mgf_marginal::mgf::PriorMgf;
use mgf_marginal::taylor::{LiftMethod, MgfFactor, MgfProduct};

pub fn run() -> Result<f64> {
    let product = MgfProduct::new(
        2,
        vec![
            MgfFactor { prior: PriorMgf::gamma(2.0, 3.0)?, weights: vec![1.0, 0.5] },
            MgfFactor { prior: PriorMgf::exponential(4.0)?, weights: vec![0.0, 1.0] },
            MgfFactor { prior: PriorMgf::point_mass(0.3)?, weights: vec![1.0, 1.0] },
        ],
    )?;
    let t = [-1.0, -0.5];
    let orders = [3, 2];
    let (value, strategy) = product.mixed_partial(&orders, &t)?;
    let native = product.mixed_partial_dense(&orders, &t, LiftMethod::Native)?;
    let composed = product.mixed_partial_dense(&orders, &t, LiftMethod::Compose)?;
    println!("∂^3_1 ∂^2_2 F(t) at {t:?} = {:.15} ({strategy:?})", value.to_f64());
    println!("native lift:   {:.15}", native.to_f64());
    println!("composed lift: {:.15}", composed.to_f64());
    Ok(native.rel_diff(composed))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run().map(|_| ())
}
