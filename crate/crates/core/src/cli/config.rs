//! TOML run configuration.
//!
//! ```toml
//! [data]
//! builtin = "pump"            # or: csv = "file.csv", or an [data.inline] table
//!
//! [model]
//! type = "poisson"            # poisson | gamma | regression
//! response = "y"
//! exposure = "t"
//! prior = { family = "gamma", shape = 1.27, rate = 0.82 }
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::marginalize::{gamma_hier_with, gamma_marginal, gamma_single, poisson_scaled, GammaProblem, MarginalResult, PoissonProblem};
use crate::mgf::{FracMethod, PriorMgf};
use crate::models::{load_table, CakeData, CakeSettings, Family, Link, PumpData, RegressionSpec, Table};
use crate::optim::Response;

/// A complete run description.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Exactly one of `builtin`, `csv` or `inline`.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub builtin: Option<Builtin>,
    pub csv: Option<PathBuf>,
    pub inline: Option<BTreeMap<String, Vec<f64>>>,
    /// Generator seed for `builtin = "cake"`; the `--seed` flag wins.
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    Pump,
    Cake,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelConfig {
    Poisson(ProblemConfig),
    Gamma(ProblemConfig),
    Regression(RegressionConfig),
}

/// Shape parameter: one value for all observations or one each.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Shapes {
    One(f64),
    Each(Vec<f64>),
}

/// A Poisson or gamma problem given directly by its priors and loadings.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "default_response")]
    pub response: String,
    /// Column of per-observation rate multipliers.
    pub exposure: Option<String>,
    pub prior: PriorMgf,
    /// One random effect shared by every observation.
    #[serde(default)]
    pub shared: bool,
    /// Explicit loading matrix, one row per observation.
    pub r: Option<Vec<Vec<f64>>>,
    /// Gamma shapes; required for gamma problems.
    pub alpha: Option<Shapes>,
    #[serde(default)]
    pub frac_method: FracMethod,
}

/// A GLMM/HGLM built from data columns.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionConfig {
    #[serde(default = "default_response")]
    pub response: String,
    pub link: Link,
    pub family: Family,
    /// Random effects `Gamma(ξ+1, ξ)`.
    pub xi: Option<f64>,
    pub random_prior: Option<PriorMgf>,
    /// Terms: `intercept`, a numeric column, or `factor:<column>`.
    #[serde(default)]
    pub fixed: Vec<String>,
    /// Column whose levels index the random effects; one per observation if absent.
    pub groups: Option<String>,
    /// Offset column, or `log:<column>` for its logarithm.
    pub offset: Option<String>,
    /// Coefficients at which `marginal` evaluates and `fit-mmle` starts.
    pub start: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub format: Option<super::Format>,
}

fn default_response() -> String {
    "y".into()
}

impl RunConfig {
    /// Parses and validates a configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(csv) = &cfg.data.csv {
            if csv.is_relative() {
                cfg.data.csv = Some(path.parent().unwrap_or(Path::new(".")).join(csv));
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let d = &self.data;
        let sources = [d.builtin.is_some(), d.csv.is_some(), d.inline.is_some()].iter().filter(|v| **v).count();
        if sources != 1 {
            return Err(Error::Config(format!("data: exactly one of builtin, csv or inline is required, found {sources}")));
        }
        if let Some(cols) = &d.inline {
            let lens: Vec<usize> = cols.values().map(Vec::len).collect();
            if lens.is_empty() || lens.contains(&0) || lens.iter().any(|&l| l != lens[0]) {
                return Err(Error::Config("data.inline: columns must be non-empty and of equal length".into()));
            }
        }
        match &self.model {
            ModelConfig::Poisson(p) | ModelConfig::Gamma(p) => {
                p.prior.validate().map_err(|e| Error::Config(format!("model.prior: {e}")))?;
                if p.shared && p.r.is_some() {
                    return Err(Error::Config("model: shared and r are mutually exclusive".into()));
                }
                if matches!(self.model, ModelConfig::Gamma(_)) && p.alpha.is_none() {
                    return Err(Error::Config("model.alpha: required for gamma models".into()));
                }
                if matches!(self.model, ModelConfig::Poisson(_)) && p.alpha.is_some() {
                    return Err(Error::Config("model.alpha: only valid for gamma models".into()));
                }
            }
            ModelConfig::Regression(r) => {
                if r.xi.is_some() == r.random_prior.is_some() {
                    return Err(Error::Config("model: give exactly one of xi or random_prior".into()));
                }
                if let Some(xi) = r.xi {
                    if !(xi > 0.0 && xi.is_finite()) {
                        return Err(Error::Config(format!("model.xi: must be positive, got {xi}")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Reads the configured data into a numeric table.
    pub fn table(&self, seed: Option<u64>) -> Result<Table> {
        let d = &self.data;
        if let Some(b) = d.builtin {
            return Ok(match b {
                Builtin::Pump => {
                    let p = PumpData::load();
                    Table { headers: vec!["y".into(), "t".into()], columns: vec![p.y.iter().map(|&v| v as f64).collect(), p.t] }
                }
                Builtin::Cake => {
                    let settings = CakeSettings { seed: seed.or(d.seed).unwrap_or(CakeSettings::default().seed), ..Default::default() };
                    let c = CakeData::generate(&settings)?;
                    Table {
                        headers: ["recipe", "temperature", "replication", "angle"].map(String::from).to_vec(),
                        columns: vec![
                            c.recipe.iter().map(|&v| v as f64).collect(),
                            c.temperature,
                            c.replication.iter().map(|&v| v as f64).collect(),
                            c.angle,
                        ],
                    }
                }
            });
        }
        if let Some(path) = &d.csv {
            return load_table(path);
        }
        let cols = d.inline.clone().unwrap_or_default();
        Ok(Table { headers: cols.keys().cloned().collect(), columns: cols.into_values().collect() })
    }
}

fn loading_matrix(rows: &[Vec<f64>], m: usize) -> Result<Array2<f64>> {
    let n = rows.first().map_or(0, Vec::len);
    if rows.len() != m || n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config(format!("model.r: expected {m} rows of equal, non-zero length")));
    }
    Ok(Array2::from_shape_fn((m, n), |(i, j)| rows[i][j]))
}

impl ProblemConfig {
    fn layout(&self, m: usize) -> Result<(Vec<PriorMgf>, Option<Array2<f64>>)> {
        if self.shared {
            return Ok((vec![self.prior], Some(Array2::ones((m, 1)))));
        }
        match &self.r {
            Some(rows) => {
                let r = loading_matrix(rows, m)?;
                Ok((vec![self.prior; r.ncols()], Some(r)))
            }
            None => Ok((vec![self.prior; m], None)),
        }
    }

    fn zeta(&self, table: &Table) -> Result<Option<Vec<f64>>> {
        self.exposure.as_deref().map(|c| table.column(c).map(<[f64]>::to_vec)).transpose()
    }

    pub fn poisson(&self, table: &Table) -> Result<MarginalResult> {
        let y = table.count_column(&self.response)?;
        let (priors, r) = self.layout(y.len())?;
        poisson_scaled(&PoissonProblem { priors, r, zeta: self.zeta(table)?, y })
    }

    pub fn gamma(&self, table: &Table) -> Result<MarginalResult> {
        let y = table.column(&self.response)?.to_vec();
        let m = y.len();
        let alpha = match &self.alpha {
            Some(Shapes::One(a)) => vec![*a; m],
            Some(Shapes::Each(v)) if v.len() == m => v.clone(),
            Some(Shapes::Each(v)) => return Err(Error::Config(format!("model.alpha: {} shapes for {m} observations", v.len()))),
            None => return Err(Error::Config("model.alpha: required for gamma models".into())),
        };
        let zeta = self.zeta(table)?;
        let uniform = |v: &[f64]| v.iter().all(|&x| x == v[0]);
        if self.shared && uniform(&alpha) && zeta.as_deref().is_none_or(uniform) {
            let scale = zeta.as_ref().map_or(1.0, |z| z[0]);
            return gamma_single(&self.prior, alpha[0], &y, scale);
        }
        let (priors, r) = self.layout(m)?;
        let problem = GammaProblem { priors, alpha, r, zeta, y };
        if problem.r.is_none() {
            gamma_hier_with(&problem, self.frac_method)
        } else {
            gamma_marginal(&problem)
        }
    }
}

fn factor_dummies(values: &[f64]) -> Vec<Vec<f64>> {
    let mut levels: Vec<f64> = values.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    levels[1..].iter().map(|&l| values.iter().map(|&v| if v == l { 1.0 } else { 0.0 }).collect()).collect()
}

impl RegressionConfig {
    /// Builds the regression at `start` (zeros when absent) and its responses.
    pub fn build(&self, table: &Table) -> Result<(RegressionSpec, Response)> {
        let m = table.rows();
        let mut cols: Vec<Vec<f64>> = Vec::new();
        for term in &self.fixed {
            if term == "intercept" {
                cols.push(vec![1.0; m]);
            } else if let Some(name) = term.strip_prefix("factor:") {
                cols.extend(factor_dummies(table.column(name)?));
            } else {
                cols.push(table.column(term)?.to_vec());
            }
        }
        let x = Array2::from_shape_fn((m, cols.len()), |(j, k)| cols[k][j]);
        let z = match &self.groups {
            None => Array2::eye(m),
            Some(name) => {
                let values = table.column(name)?;
                let mut levels = values.to_vec();
                levels.sort_by(f64::total_cmp);
                levels.dedup();
                Array2::from_shape_fn((m, levels.len()), |(j, i)| if values[j] == levels[i] { 1.0 } else { 0.0 })
            }
        };
        let b = match self.offset.as_deref() {
            None => Array1::zeros(m),
            Some(spec) => match spec.strip_prefix("log:") {
                Some(name) => table.column(name)?.iter().map(|v| v.ln()).collect(),
                None => Array1::from(table.column(spec)?.to_vec()),
            },
        };
        let a = match &self.start {
            Some(a) if a.len() == cols.len() => Array1::from(a.clone()),
            Some(a) => return Err(Error::Config(format!("model.start: {} values for {} fixed-effect columns", a.len(), cols.len()))),
            None => Array1::zeros(cols.len()),
        };
        let random_prior = match (self.xi, self.random_prior) {
            (Some(xi), _) => PriorMgf::gamma(xi + 1.0, xi)?,
            (None, Some(p)) => p,
            (None, None) => return Err(Error::Config("model: give exactly one of xi or random_prior".into())),
        };
        let response = match self.family {
            Family::Poisson => Response::Counts(table.count_column(&self.response)?),
            Family::Gamma { .. } => Response::Positive(table.column(&self.response)?.to_vec()),
        };
        Ok((RegressionSpec { x, a, b, z, link: self.link, family: self.family, random_prior }, response))
    }
}
