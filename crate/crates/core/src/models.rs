//! Regression specifications translated into marginal-likelihood problems,
//! plus the data sets used by the examples.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginalize::{GammaProblem, PoissonProblem};
use crate::mgf::PriorMgf;

/// Link between the conditional mean and the linear predictor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Identity,
    Log,
    Inverse,
}

/// Conditional distribution of the response.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Family {
    Poisson,
    Gamma { shape: f64 },
}

/// A GLMM/HGLM with fixed effects `a`, offsets `b` and random effects
/// entering through `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionSpec {
    /// `m × p` fixed-effect design.
    pub x: Array2<f64>,
    pub a: Array1<f64>,
    /// Per-observation offset.
    pub b: Array1<f64>,
    /// `m × n` random-effect design.
    pub z: Array2<f64>,
    pub link: Link,
    pub family: Family,
    /// Prior shared by all `n` random effects.
    pub random_prior: PriorMgf,
}

impl RegressionSpec {
    /// Checks that the matrix and vector shapes line up.
    pub fn validate(&self) -> Result<()> {
        let m = self.x.nrows();
        if m == 0 {
            return Err(Error::Dimension("design matrix has no rows".into()));
        }
        if self.x.ncols() != self.a.len() {
            return Err(Error::Dimension(format!("X has {} columns but a has {} entries", self.x.ncols(), self.a.len())));
        }
        if self.b.len() != m {
            return Err(Error::Dimension(format!("offset has {} entries for {m} observations", self.b.len())));
        }
        if self.z.nrows() != m {
            return Err(Error::Dimension(format!("Z has {} rows for {m} observations", self.z.nrows())));
        }
        if self.x.iter().chain(&self.a).chain(&self.b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("design, coefficients and offsets must be finite".into()));
        }
        self.random_prior.validate()
    }

    /// `Xa + b`.
    pub fn linear_predictor(&self) -> Array1<f64> {
        self.x.dot(&self.a) + &self.b
    }

    fn random_priors(&self) -> Vec<PriorMgf> {
        vec![self.random_prior; self.z.ncols()]
    }
}

/// `λ = θ e^{Xa+b}` with one random effect per block.
pub fn build_poisson_log_hglm(spec: &RegressionSpec, y: &[u64]) -> Result<PoissonProblem> {
    spec.validate()?;
    expect(spec, Link::Log, matches!(spec.family, Family::Poisson), "Poisson")?;
    check_len(y.len(), spec.x.nrows())?;
    let zeta = spec.linear_predictor().mapv(f64::exp).to_vec();
    Ok(PoissonProblem { priors: spec.random_priors(), r: Some(spec.z.clone()), zeta: Some(zeta), y: y.to_vec() })
}

/// `λ = Xa + b + Zθ`; the fixed part becomes point-mass random effects.
pub fn build_poisson_identity_glmm(spec: &RegressionSpec, y: &[u64]) -> Result<PoissonProblem> {
    spec.validate()?;
    expect(spec, Link::Identity, matches!(spec.family, Family::Poisson), "Poisson")?;
    check_len(y.len(), spec.x.nrows())?;
    let (priors, r) = augment_offsets(spec)?;
    Ok(PoissonProblem { priors, r: Some(r), zeta: None, y: y.to_vec() })
}

/// Gamma responses with shape `α`.
///
/// Log link: `β = αθ e^{-Xa-b}`, so `ζ = α e^{-Xa-b}`.
/// Inverse link: `β = α(Xa + b + Zθ)`, so `ζ = α` with point-mass augmentation.
pub fn build_gamma_hglm(spec: &RegressionSpec, y: &[f64]) -> Result<GammaProblem> {
    spec.validate()?;
    let alpha = match spec.family {
        Family::Gamma { shape } if shape > 0.0 && shape.is_finite() => shape,
        Family::Gamma { shape } => return Err(Error::InvalidInput(format!("gamma shape must be positive, got {shape}"))),
        Family::Poisson => return Err(Error::InvalidInput("gamma builder needs the gamma family".into())),
    };
    check_len(y.len(), spec.x.nrows())?;
    let m = y.len();
    let (priors, r, zeta) = match spec.link {
        Link::Log => {
            let zeta = spec.linear_predictor().mapv(|eta| alpha * (-eta).exp()).to_vec();
            (spec.random_priors(), spec.z.clone(), zeta)
        }
        Link::Inverse => {
            let (priors, r) = augment_offsets(spec)?;
            (priors, r, vec![alpha; m])
        }
        Link::Identity => return Err(Error::InvalidInput("gamma responses support log and inverse links".into())),
    };
    let coupled = !(r.is_square() && r.indexed_iter().all(|((i, j), &v)| i == j || v == 0.0));
    if coupled && (alpha - alpha.round()).abs() > 1e-12 {
        return Err(Error::NonIntegerShapeWithCoupling(format!(
            "shape {alpha} with a {}×{} non-diagonal random-effect design",
            r.nrows(),
            r.ncols()
        )));
    }
    Ok(GammaProblem { priors, alpha: vec![alpha; m], r: Some(r), zeta: Some(zeta), y: y.to_vec() })
}

fn expect(spec: &RegressionSpec, link: Link, family_ok: bool, family: &str) -> Result<()> {
    if spec.link != link || !family_ok {
        return Err(Error::InvalidInput(format!("builder needs {link:?} link and {family} family, got {:?}/{:?}", spec.link, spec.family)));
    }
    Ok(())
}

fn check_len(got: usize, m: usize) -> Result<()> {
    if got != m {
        return Err(Error::Dimension(format!("{got} responses for {m} design rows")));
    }
    Ok(())
}

/// Appends one point-mass column per observation with a positive offset.
fn augment_offsets(spec: &RegressionSpec) -> Result<(Vec<PriorMgf>, Array2<f64>)> {
    let offsets = spec.linear_predictor();
    let m = offsets.len();
    let mut extra = Vec::new();
    for (j, &o) in offsets.iter().enumerate() {
        let covered = spec.z.row(j).iter().any(|&v| v > 0.0);
        if o < 0.0 {
            return Err(Error::NegativeRateRisk(format!("observation {j} has negative fixed part {o}")));
        }
        if o == 0.0 && !covered {
            return Err(Error::NegativeRateRisk(format!("observation {j} has zero fixed part and no random effect")));
        }
        if o > 0.0 {
            extra.push((j, o));
        }
    }
    let n = spec.z.ncols();
    let mut r = Array2::zeros((m, n + extra.len()));
    r.slice_mut(ndarray::s![.., ..n]).assign(&spec.z);
    let mut priors = spec.random_priors();
    for (k, &(j, o)) in extra.iter().enumerate() {
        r[[j, n + k]] = 1.0;
        priors.push(PriorMgf::point_mass(o)?);
    }
    Ok((priors, r))
}

/// Pump failure counts and operating times (thousands of hours).
#[derive(Clone, Debug, PartialEq)]
pub struct PumpData {
    pub t: Vec<f64>,
    pub y: Vec<u64>,
}

impl PumpData {
    pub const T: [f64; 10] = [94.32, 15.72, 62.88, 125.76, 5.24, 31.44, 1.048, 1.048, 2.096, 10.48];
    pub const Y: [u64; 10] = [5, 1, 5, 14, 3, 19, 1, 1, 4, 22];

    pub fn load() -> Self {
        Self { t: Self::T.to_vec(), y: Self::Y.to_vec() }
    }

    /// Each pump gets its own rate with log operating time as offset.
    pub fn hierarchical_problem(&self, prior: PriorMgf) -> PoissonProblem {
        PoissonProblem { priors: vec![prior; self.y.len()], r: None, zeta: Some(self.t.clone()), y: self.y.clone() }
    }

    /// All pumps share one rate.
    pub fn shared_rate_problem(&self, prior: PriorMgf) -> PoissonProblem {
        PoissonProblem {
            priors: vec![prior],
            r: Some(Array2::ones((self.y.len(), 1))),
            zeta: Some(self.t.clone()),
            y: self.y.clone(),
        }
    }
}

/// Numeric columns read from a CSV file with a header row.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.headers
            .iter()
            .position(|h| h == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::InvalidInput(format!("no column named {name:?}; have {:?}", self.headers)))
    }

    /// A column whose entries must all be non-negative integers.
    pub fn count_column(&self, name: &str) -> Result<Vec<u64>> {
        self.column(name)?
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(53) {
                    Ok(v as u64)
                } else {
                    Err(Error::Parse { line: i as u64 + 2, message: format!("{name} = {v} is not a count") })
                }
            })
            .collect()
    }
}

/// Reads an all-numeric CSV file.
pub fn load_table(path: &Path) -> Result<Table> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_table(file)
}

/// Parses an all-numeric CSV stream.
pub fn read_table<R: std::io::Read>(input: R) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::Parse { line: 1, message: "missing header row".into() });
    }
    let mut columns = vec![Vec::new(); headers.len()];
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Parse { line, message: e.to_string() }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        for (k, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse { line, message: format!("column {:?}: {field:?} is not a number", headers[k]) })?;
            columns[k].push(v);
        }
    }
    if columns[0].is_empty() {
        return Err(Error::Parse { line: 2, message: "no data rows".into() });
    }
    Ok(Table { headers, columns })
}

/// Settings for the synthetic cake-baking generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CakeSettings {
    /// Fixed effects: intercept, recipes 2–3, temperatures 185–225.
    pub a: Vec<f64>,
    /// Shape of the gamma response.
    pub alpha: f64,
    /// Random effects are `Gamma(ξ+1, ξ)`.
    pub xi: f64,
    pub seed: u64,
}

impl Default for CakeSettings {
    /// Low-noise settings under which the fixed effects are recoverable to a
    /// few hundredths from one data set.
    fn default() -> Self {
        Self {
            a: vec![3.4, -0.05, -0.08, 0.02, 0.06, 0.1, 0.13, 0.18],
            alpha: 400.0,
            xi: 1000.0,
            seed: 1938,
        }
    }
}

/// Breaking angles for 3 recipes × 15 replications × 6 temperatures.
#[derive(Clone, Debug, PartialEq)]
pub struct CakeData {
    pub recipe: Vec<u32>,
    pub replication: Vec<u32>,
    pub temperature: Vec<f64>,
    pub angle: Vec<f64>,
}

impl CakeData {
    pub const RECIPES: u32 = 3;
    pub const REPLICATIONS: u32 = 15;
    pub const TEMPERATURES: [f64; 6] = [175.0, 185.0, 195.0, 205.0, 215.0, 225.0];
    /// Columns of the fixed-effect design.
    pub const FIXED_EFFECTS: usize = 8;

    /// Draws a data set. Row order is recipe, then replication, then temperature.
    pub fn generate(settings: &CakeSettings) -> Result<Self> {
        if settings.a.len() != Self::FIXED_EFFECTS {
            return Err(Error::Dimension(format!("cake model has {} fixed effects, got {}", Self::FIXED_EFFECTS, settings.a.len())));
        }
        if !(settings.alpha > 0.0 && settings.xi > 0.0) {
            return Err(Error::InvalidInput("cake alpha and xi must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
        let prior = Gamma::new(settings.xi + 1.0, 1.0 / settings.xi).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let theta: Vec<f64> = (0..Self::REPLICATIONS).map(|_| prior.sample(&mut rng)).collect();
        let mut data = CakeData { recipe: vec![], replication: vec![], temperature: vec![], angle: vec![] };
        for recipe in 1..=Self::RECIPES {
            for rep in 1..=Self::REPLICATIONS {
                for &temp in &Self::TEMPERATURES {
                    let eta: f64 = Self::design_row(recipe, temp).iter().zip(&settings.a).map(|(x, a)| x * a).sum();
                    let rate = settings.alpha * theta[rep as usize - 1] * (-eta).exp();
                    let dist = Gamma::new(settings.alpha, 1.0 / rate).map_err(|e| Error::InvalidInput(e.to_string()))?;
                    data.recipe.push(recipe);
                    data.replication.push(rep);
                    data.temperature.push(temp);
                    data.angle.push(dist.sample(&mut rng));
                }
            }
        }
        Ok(data)
    }

    /// Builds the data from a table with `recipe`, `temperature`,
    /// `replication` and `angle` columns.
    pub fn from_table(table: &Table) -> Result<Self> {
        let ints = |name: &str| -> Result<Vec<u32>> {
            table.count_column(name)?.into_iter().map(|v| u32::try_from(v).map_err(|e| Error::InvalidInput(e.to_string()))).collect()
        };
        let data = CakeData {
            recipe: ints("recipe")?,
            replication: ints("replication")?,
            temperature: table.column("temperature")?.to_vec(),
            angle: table.column("angle")?.to_vec(),
        };
        data.check()?;
        Ok(data)
    }

    fn check(&self) -> Result<()> {
        for (j, ((&rc, &rp), &t)) in self.recipe.iter().zip(&self.replication).zip(&self.temperature).enumerate() {
            if !(1..=Self::RECIPES).contains(&rc) || !(1..=Self::REPLICATIONS).contains(&rp) || !Self::TEMPERATURES.contains(&t) {
                return Err(Error::Parse { line: j as u64 + 2, message: format!("unexpected level recipe={rc} replication={rp} temperature={t}") });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.angle.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angle.is_empty()
    }

    fn design_row(recipe: u32, temp: f64) -> [f64; 8] {
        let mut row = [0.0; 8];
        row[0] = 1.0;
        if recipe >= 2 {
            row[recipe as usize - 1] = 1.0;
        }
        if let Some(k) = Self::TEMPERATURES.iter().position(|&t| t == temp) {
            if k > 0 {
                row[2 + k] = 1.0;
            }
        }
        row
    }

    /// Intercept, recipe dummies and temperature dummies (175 °C is the baseline).
    pub fn design(&self) -> Array2<f64> {
        let mut x = Array2::zeros((self.len(), Self::FIXED_EFFECTS));
        for j in 0..self.len() {
            for (k, v) in Self::design_row(self.recipe[j], self.temperature[j]).into_iter().enumerate() {
                x[[j, k]] = v;
            }
        }
        x
    }

    /// Replication membership, `270 × 15`.
    pub fn membership(&self) -> Array2<f64> {
        let mut z = Array2::zeros((self.len(), Self::REPLICATIONS as usize));
        for (j, &rep) in self.replication.iter().enumerate() {
            z[[j, rep as usize - 1]] = 1.0;
        }
        z
    }

    /// Log-link gamma HGLM at the given coefficients.
    pub fn spec(&self, a: &[f64], alpha: f64, xi: f64) -> Result<RegressionSpec> {
        Ok(RegressionSpec {
            x: self.design(),
            a: Array1::from(a.to_vec()),
            b: Array1::zeros(self.len()),
            z: self.membership(),
            link: Link::Log,
            family: Family::Gamma { shape: alpha },
            random_prior: PriorMgf::gamma(xi + 1.0, xi)?,
        })
    }

    pub fn to_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["recipe", "temperature", "replication", "angle"]).map_err(io)?;
        for j in 0..self.len() {
            w.write_record([
                self.recipe[j].to_string(),
                self.temperature[j].to_string(),
                self.replication[j].to_string(),
                format!("{:?}", self.angle[j]),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn spec(link: Link, family: Family, x: Array2<f64>, a: Vec<f64>, b: Vec<f64>, z: Array2<f64>) -> RegressionSpec {
        RegressionSpec {
            x,
            a: Array1::from(a),
            b: Array1::from(b),
            z,
            link,
            family,
            random_prior: PriorMgf::gamma(2.0, 3.0).unwrap(),
        }
    }

    #[test]
    fn pump_constants() {
        let p = PumpData::load();
        assert_eq!(p.y.iter().sum::<u64>(), 75);
        assert!((p.t.iter().sum::<f64>() - 350.032).abs() < 1e-12);
    }

    #[test]
    fn pump_offsets_become_multipliers() {
        let p = PumpData::load();
        let s = spec(
            Link::Log,
            Family::Poisson,
            Array2::zeros((10, 0)),
            vec![],
            p.t.iter().map(|t| t.ln()).collect(),
            Array2::eye(10),
        );
        let prob = build_poisson_log_hglm(&s, &p.y).unwrap();
        for (z, t) in prob.zeta.unwrap().iter().zip(&p.t) {
            assert!(rel(*z, *t) < 1e-12);
        }
        assert_eq!(prob.r.unwrap(), Array2::<f64>::eye(10));
    }

    #[test]
    fn zero_predictor_gives_unit_multipliers() {
        let s = spec(Link::Log, Family::Poisson, Array2::ones((3, 1)), vec![0.0], vec![0.0; 3], Array2::eye(3));
        assert_eq!(build_poisson_log_hglm(&s, &[1, 2, 3]).unwrap().zeta.unwrap(), vec![1.0; 3]);
        let g = spec(Link::Log, Family::Gamma { shape: 2.0 }, Array2::ones((3, 1)), vec![0.0], vec![0.0; 3], Array2::eye(3));
        assert_eq!(build_gamma_hglm(&g, &[1.0, 2.0, 3.0]).unwrap().zeta.unwrap(), vec![2.0; 3]);
    }

    #[test]
    fn identity_link_without_fixed_part_keeps_design() {
        let a = array![[0.1, 0.0, 0.0], [0.9, 0.1, 0.0], [0.0, 0.1, 0.0], [0.0, 0.8, 0.1], [0.0, 0.0, 0.9]];
        let s = spec(Link::Identity, Family::Poisson, Array2::zeros((5, 0)), vec![], vec![0.0; 5], a.clone());
        let prob = build_poisson_identity_glmm(&s, &[0, 1, 0, 2, 3]).unwrap();
        assert_eq!(prob.r.unwrap(), a);
        assert_eq!(prob.priors.len(), 3);
        assert!(prob.zeta.is_none());
    }

    #[test]
    fn identity_link_offsets_become_point_masses() {
        let s = spec(Link::Identity, Family::Poisson, array![[1.0], [2.0]], vec![0.5], vec![0.25, 0.0], array![[1.0], [0.0]]);
        let prob = build_poisson_identity_glmm(&s, &[1, 1]).unwrap();
        assert_eq!(prob.priors.len(), 3);
        assert_eq!(prob.priors[1], PriorMgf::point_mass(0.75).unwrap());
        assert_eq!(prob.priors[2], PriorMgf::point_mass(1.0).unwrap());
        assert_eq!(prob.r.unwrap(), array![[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    }

    #[test]
    fn uncovered_zero_rate_is_rejected() {
        let s = spec(Link::Identity, Family::Poisson, array![[1.0], [0.0]], vec![1.0], vec![0.0, 0.0], array![[1.0], [0.0]]);
        assert!(matches!(build_poisson_identity_glmm(&s, &[0, 0]), Err(Error::NegativeRateRisk(_))));
        let s = spec(Link::Identity, Family::Poisson, array![[1.0]], vec![-1.0], vec![0.0], array![[1.0]]);
        assert!(matches!(build_poisson_identity_glmm(&s, &[0]), Err(Error::NegativeRateRisk(_))));
    }

    #[test]
    fn coupled_fractional_shape_is_rejected() {
        let s = spec(Link::Log, Family::Gamma { shape: 1.5 }, Array2::ones((2, 1)), vec![0.0], vec![0.0; 2], array![[1.0], [1.0]]);
        assert!(matches!(build_gamma_hglm(&s, &[1.0, 2.0]), Err(Error::NonIntegerShapeWithCoupling(_))));
        let s = spec(Link::Log, Family::Gamma { shape: 1.5 }, Array2::ones((2, 1)), vec![0.0], vec![0.0; 2], Array2::eye(2));
        assert!(build_gamma_hglm(&s, &[1.0, 2.0]).is_ok());
    }

    #[test]
    fn inverse_link_uses_shape_as_multiplier() {
        let s = spec(Link::Inverse, Family::Gamma { shape: 3.0 }, array![[1.0], [1.0]], vec![0.5], vec![0.0, 1.0], array![[1.0], [1.0]]);
        let prob = build_gamma_hglm(&s, &[1.0, 2.0]).unwrap();
        assert_eq!(prob.zeta.unwrap(), vec![3.0, 3.0]);
        assert_eq!(prob.priors[1], PriorMgf::point_mass(0.5).unwrap());
        assert_eq!(prob.priors[2], PriorMgf::point_mass(1.5).unwrap());
    }

    #[test]
    fn mismatched_shapes_are_dimension_errors() {
        let s = spec(Link::Log, Family::Poisson, Array2::ones((3, 2)), vec![0.0], vec![0.0; 3], Array2::eye(3));
        assert!(matches!(build_poisson_log_hglm(&s, &[1, 2, 3]), Err(Error::Dimension(_))));
        let s = spec(Link::Log, Family::Poisson, Array2::ones((3, 1)), vec![0.0], vec![0.0; 3], Array2::eye(3));
        assert!(matches!(build_poisson_log_hglm(&s, &[1, 2]), Err(Error::Dimension(_))));
    }

    #[test]
    fn empty_or_broken_csv_is_an_error() {
        assert!(matches!(read_table("".as_bytes()), Err(Error::Parse { .. })));
        assert!(matches!(read_table("a,b\n".as_bytes()), Err(Error::Parse { .. })));
        match read_table("a,b\n1,2\n3,x\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match read_table("a,b\n1,2\n3\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cake_generator_shape_and_round_trip() {
        let data = CakeData::generate(&CakeSettings::default()).unwrap();
        assert_eq!(data.len(), 270);
        assert!(data.angle.iter().all(|v| *v > 0.0));
        let z = data.membership();
        assert_eq!(z.dim(), (270, 15));
        assert!(z.sum_axis(ndarray::Axis(0)).iter().all(|&c| c == 18.0));
        let mut buf = Vec::new();
        data.to_csv(&mut buf).unwrap();
        let back = CakeData::from_table(&read_table(buf.as_slice()).unwrap()).unwrap();
        assert_eq!(back, data);
        assert_eq!(CakeData::generate(&CakeSettings::default()).unwrap(), data);
    }

    #[test]
    fn cake_design_has_full_rank_columns() {
        let data = CakeData::generate(&CakeSettings::default()).unwrap();
        let x = data.design();
        let gram = x.t().dot(&x);
        for k in 0..CakeData::FIXED_EFFECTS {
            assert!(gram[[k, k]] > 0.0);
        }
        assert_eq!(x.column(0).sum(), 270.0);
        assert_eq!(x.column(1).sum(), 90.0);
        assert_eq!(x.column(3).sum(), 45.0);
    }

    proptest! {
        #[test]
        fn log_link_round_trip(xs in proptest::collection::vec(-1.0f64..1.0, 8), a in proptest::collection::vec(-2.0f64..2.0, 2), b in proptest::collection::vec(-1.0f64..1.0, 4), shape in 0.5f64..5.0) {
            let x = Array2::from_shape_vec((4, 2), xs).unwrap();
            let s = spec(Link::Log, Family::Poisson, x.clone(), a.clone(), b.clone(), Array2::eye(4));
            let p = build_poisson_log_hglm(&s, &[0, 1, 2, 3]).unwrap();
            let g = RegressionSpec { family: Family::Gamma { shape }, ..s.clone() };
            let q = build_gamma_hglm(&g, &[1.0, 2.0, 3.0, 4.0]).unwrap();
            for j in 0..4 {
                let eta = x[[j, 0]] * a[0] + x[[j, 1]] * a[1] + b[j];
                prop_assert!(rel(p.zeta.as_ref().unwrap()[j], eta.exp()) < 1e-12);
                prop_assert!(rel(q.zeta.as_ref().unwrap()[j], shape * (-eta).exp()) < 1e-12);
            }
        }

        #[test]
        fn identity_link_round_trip(xs in proptest::collection::vec(0.0f64..1.0, 6), a in proptest::collection::vec(0.0f64..2.0, 2), theta in proptest::collection::vec(0.0f64..3.0, 2)) {
            let x = Array2::from_shape_vec((3, 2), xs).unwrap();
            let z = array![[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]];
            let s = spec(Link::Identity, Family::Poisson, x.clone(), a.clone(), vec![0.1; 3], z.clone());
            let p = build_poisson_identity_glmm(&s, &[0, 1, 2]).unwrap();
            let r = p.r.unwrap();
            let mut effects = theta.clone();
            for prior in &p.priors[2..] {
                if let PriorMgf::PointMass { location } = prior { effects.push(*location) }
            }
            let rates = r.dot(&Array1::from(effects));
            for j in 0..3 {
                let want = x[[j, 0]] * a[0] + x[[j, 1]] * a[1] + 0.1 + z[[j, 0]] * theta[0] + z[[j, 1]] * theta[1];
                prop_assert!(rel(rates[j], want) < 1e-12);
            }
        }
    }
}
