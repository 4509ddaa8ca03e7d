//! Exact marginal likelihoods for Poisson and gamma hierarchical models.
//!
//! The random effects are integrated out by differentiating the prior
//! moment generating function: integer orders for Poisson counts, real
//! (Riemann–Liouville) orders for gamma observations with non-integer shape.
//! Coupled effects go through truncated multivariate Taylor series.
//!
//! ```
//! use mgf_marginal::marginalize::{poisson_hier, PoissonProblem};
//! use mgf_marginal::mgf::PriorMgf;
//!
//! let problem = PoissonProblem { priors: vec![PriorMgf::gamma(4.0, 5.0)?], r: None, zeta: None, y: vec![0] };
//! let res = poisson_hier(&problem)?;
//! assert!((res.value() - 0.4822531).abs() < 1e-7);
//! # Ok::<(), mgf_marginal::error::Error>(())
//! ```
//!
//! Independent checks (closed forms, quadrature, Monte Carlo) live in
//! [`oracles`]; the `mgfml` binary wraps [`cli`].

pub mod error;
pub mod special_fn;
pub mod mgf;
pub mod taylor;
pub mod marginalize;
pub mod models;
pub mod oracles;
pub mod optim;
pub mod worked;
pub mod verify;
pub mod cli;
