use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AttributeKind, Dataset, Targets, INTERCEPT};
use crate::random::Sampler;

/// `a* = x1·weights + u_weight·u + noise_sd·v` with `v ~ N(0, 1)`; a binary
/// attribute is `1{a* > 0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeModel {
    pub kind: AttributeKind,
    /// One weight per selection column, intercept last.
    pub weights: Vec<f64>,
    #[serde(default)]
    pub u_weight: f64,
    #[serde(default = "one")]
    pub noise_sd: f64,
}

fn one() -> f64 {
    1.0
}

/// Selection `z = x1·γ + u`, outcome `y = x2·β + ε`, `(ε, u)` bivariate
/// normal with `Var(u) = 1`, `sd(ε) = sigma_eps` and correlation `rho`.
///
/// Features are independent standard normals named `x0, x1, …` followed by
/// the intercept; the prediction features are the first `d2 − 1` of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n: usize,
    pub n_test: usize,
    pub d1: usize,
    pub d2: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub rho: f64,
    pub sigma_eps: f64,
    #[serde(default)]
    pub seed: u64,
    pub attribute: AttributeModel,
}

impl Default for SyntheticConfig {
    /// A biased design: selection and the binary attribute both load on `u`
    /// and on `x0` with opposite signs.
    fn default() -> Self {
        SyntheticConfig {
            n: 3000,
            n_test: 3000,
            d1: 4,
            d2: 3,
            gamma: vec![-0.8, 0.8, 0.2, 1.0],
            beta: vec![0.0, -0.5, -1.0],
            rho: 0.8,
            sigma_eps: 1.0,
            seed: 0,
            attribute: AttributeModel {
                kind: AttributeKind::Binary,
                weights: vec![-1.0, 0.0, 0.0, 0.0],
                u_weight: 0.7,
                noise_sd: 1.0,
            },
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.d1 == 0 || self.d2 == 0 || self.d2 > self.d1 {
            return bad(format!("need 1 <= d2 <= d1, got d1 = {}, d2 = {}", self.d1, self.d2));
        }
        if self.gamma.len() != self.d1 || self.attribute.weights.len() != self.d1 {
            return bad(format!("gamma and attribute weights need {} entries", self.d1));
        }
        if self.beta.len() != self.d2 {
            return bad(format!("beta needs {} entries", self.d2));
        }
        if !(self.rho.abs() <= 1.0) {
            return bad(format!("rho must lie in [-1, 1], got {}", self.rho));
        }
        if !(self.sigma_eps > 0.0 && self.sigma_eps.is_finite()) {
            return bad(format!("sigma_eps must be positive, got {}", self.sigma_eps));
        }
        if !(self.attribute.noise_sd >= 0.0) {
            return bad("attribute noise_sd must be nonnegative".into());
        }
        if self.n == 0 || self.n_test == 0 {
            return bad("n and n_test must be positive".into());
        }
        let all = self.gamma.iter().chain(&self.beta).chain(&self.attribute.weights);
        if !all.chain([&self.attribute.u_weight]).all(|v| v.is_finite()) {
            return bad("coefficients must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub rho: f64,
    pub sigma_eps: f64,
}

/// Unobserved error draws of the training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Latent {
    pub u: Vec<f64>,
    pub eps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub train: Dataset,
    pub test: Dataset,
    pub truth: Truth,
    pub latent: Latent,
}

/// One standard bivariate normal pair mapped through the covariance square
/// root: `u = e1`, `ε = σ(ρ·e1 + √(1 − ρ²)·e2)`.
pub fn correlated_errors(sampler: &mut Sampler, rho: f64, sigma_eps: f64) -> (f64, f64) {
    let e1 = sampler.normal();
    let e2 = sampler.normal();
    (e1, sigma_eps * (rho * e1 + (1.0 - rho * rho).sqrt() * e2))
}

struct Draw {
    x: DMatrix<f64>,
    u: Vec<f64>,
    eps: Vec<f64>,
    a: Vec<f64>,
}

fn draw(config: &SyntheticConfig, sampler: &mut Sampler, n: usize) -> Draw {
    let d1 = config.d1;
    let mut x = DMatrix::zeros(n, d1);
    let (mut u, mut eps, mut a) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let w = DVector::from_column_slice(&config.attribute.weights);
    for i in 0..n {
        for j in 0..d1 - 1 {
            x[(i, j)] = sampler.normal();
        }
        x[(i, d1 - 1)] = 1.0;
        let (ui, ei) = correlated_errors(sampler, config.rho, config.sigma_eps);
        let v = sampler.normal();
        let latent = x.row(i).dot(&w.transpose()) + config.attribute.u_weight * ui + config.attribute.noise_sd * v;
        a.push(match config.attribute.kind {
            AttributeKind::Binary => f64::from(u8::from(latent > 0.0)),
            AttributeKind::Numeric => latent,
        });
        u.push(ui);
        eps.push(ei);
    }
    Draw { x, u, eps, a }
}

fn dataset(config: &SyntheticConfig, d: &Draw, selected: Vec<bool>, score: Vec<f64>) -> Dataset {
    let n = d.a.len();
    let mut selection_columns: Vec<String> = (0..config.d1 - 1).map(|j| format!("x{j}")).collect();
    selection_columns.push(INTERCEPT.into());
    let mut prediction_columns: Vec<String> = (0..config.d2 - 1).map(|j| format!("x{j}")).collect();
    prediction_columns.push(INTERCEPT.into());
    let x2 = DMatrix::from_fn(n, config.d2, |i, j| {
        if j == config.d2 - 1 {
            1.0
        } else {
            d.x[(i, j)]
        }
    });
    let beta = DVector::from_column_slice(&config.beta);
    let y: Vec<f64> = (&x2 * beta).iter().zip(&d.eps).map(|(m, e)| m + e).collect();
    Dataset {
        x1: d.x.clone(),
        x2,
        a: DVector::from_column_slice(&d.a),
        s: DVector::from_iterator(n, selected.iter().map(|&s| f64::from(u8::from(s)))),
        y: Targets::withheld(y, selected),
        selection_columns,
        prediction_columns,
        attribute_kind: config.attribute.kind,
        selection_score: Some(score),
        standardization: None,
    }
}

/// Training rows are selected where `z > 0` and carry `z` as their
/// selection score. The test rows come from the same law, continuing the
/// same random stream, with every target observed.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Synthetic> {
    config.validate()?;
    let mut sampler = Sampler::new(config.seed);
    let gamma = DVector::from_column_slice(&config.gamma);
    let train_draw = draw(config, &mut sampler, config.n);
    let test_draw = draw(config, &mut sampler, config.n_test);
    let z = |d: &Draw| -> Vec<f64> { (&d.x * &gamma).iter().zip(&d.u).map(|(m, u)| m + u).collect() };
    let z_train = z(&train_draw);
    let selected = z_train.iter().map(|&v| v > 0.0).collect();
    let train = dataset(config, &train_draw, selected, z_train);
    let test = dataset(config, &test_draw, vec![true; config.n_test], z(&test_draw));
    Ok(Synthetic {
        train,
        test,
        truth: Truth {
            gamma: config.gamma.clone(),
            beta: config.beta.clone(),
            rho: config.rho,
            sigma_eps: config.sigma_eps,
        },
        latent: Latent {
            u: train_draw.u,
            eps: train_draw.eps,
        },
    })
}
