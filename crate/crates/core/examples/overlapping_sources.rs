//! Counts driven by overlapping random effects. The mixed partial is dense,
//! so the truncated multivariate Taylor series is used, and a seeded Monte
//! Carlo run gives an independent check.

use mgf_marginal::error::Result;
use mgf_marginal::marginalize::poisson_scaled;
use mgf_marginal::oracles::mc_overlap_check;
use mgf_marginal::worked::{overlap_matrix, overlap_problem, OVERLAP_COUNTS};

pub fn run(n_iter: u64) -> Result<bool> {
    let problem = overlap_problem()?;
    let res = poisson_scaled(&problem)?;
    println!("loadings:\n{}", overlap_matrix());
    println!("p(y = {:?}) = {:.10} via {}", OVERLAP_COUNTS, res.value(), res.path);

    let mc = mc_overlap_check(&overlap_matrix(), &problem.priors, &OVERLAP_COUNTS, n_iter, 42, res.value())?;
    println!(
        "Monte Carlo: {} hits in {} draws, central 95% interval ({}, {}), {}",
        mc.hits,
        mc.n_iter,
        mc.ci_low,
        mc.ci_high,
        if mc.pass { "consistent" } else { "inconsistent" }
    );
    Ok(mc.pass)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run(1_000_000).map(|_| ())
}
