//! Embedded invariant suite behind `heckfair selfcheck`.

use nalgebra::DVector;

use crate::data::{correlated_errors, generate_synthetic, AttributeModel, SyntheticConfig};
use crate::error::Result;
use crate::heckman::{plain_design, AugmentedDesign};
use crate::linalg::central_difference;
use crate::metrics::{correlation, grouped, msed};
use crate::model::AttributeKind;
use crate::probit::{probit_loglik, probit_loglik_grad};
use crate::random::Sampler;
use crate::solvers::{
    dual_ascent, md_form, solve_md_closed_form, solve_msed, solve_pearson, Constraint, DualConfig,
    LeastSquaresLoss, QuadraticConstraint, RootConfig,
};

/// Numerical kernels the checks exercise, replaceable for fault injection.
#[derive(Debug, Clone, Copy)]
pub struct Kernels {
    pub inverse_mills: fn(f64) -> f64,
}

impl Default for Kernels {
    fn default() -> Self {
        Kernels {
            inverse_mills: crate::normal::inverse_mills,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn(&Kernels) -> Result<(bool, String)>;

const CHECKS: [(&str, Check); 6] = [
    ("inverse_mills_values", imr_values),
    ("probit_gradient", probit_gradient),
    ("truncated_mean", truncated_mean),
    ("md_closed_form_vs_dual", md_closed_form_vs_dual),
    ("msed_root", msed_root),
    ("pearson_feasibility", pearson_feasibility),
];

pub fn run_selfcheck(kernels: &Kernels) -> Vec<CheckResult> {
    CHECKS
        .iter()
        .map(|&(name, check)| {
            let (passed, detail) = match check(kernels) {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e}")),
            };
            CheckResult { name, passed, detail }
        })
        .collect()
}

/// Fixed-width pass/fail table.
pub fn format_table(results: &[CheckResult]) -> String {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    results
        .iter()
        .map(|r| {
            format!(
                "{:<width$}  {}  {}\n",
                r.name,
                if r.passed { "PASS" } else { "FAIL" },
                r.detail
            )
        })
        .collect()
}

fn imr_values(k: &Kernels) -> Result<(bool, String)> {
    const ORACLE: [(f64, f64); 3] = [
        (0.0, 0.797_884_560_802_865_4),
        (-5.0, 5.186_503_967_125_842),
        (8.0, 5.052_271_083_536_895e-15),
    ];
    let worst = ORACLE
        .iter()
        .map(|&(t, want)| (((k.inverse_mills)(t) - want) / want).abs())
        .fold(0.0, f64::max);
    Ok((worst < 1e-8, format!("max rel err {worst:.2e}")))
}

fn probit_gradient(_: &Kernels) -> Result<(bool, String)> {
    let mut sampler = Sampler::new(101);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let x1 = nalgebra::DMatrix::from_fn(50, 4, |_, _| sampler.normal());
        let gamma = DVector::from_fn(4, |_, _| 0.5 * sampler.normal());
        let s = DVector::from_fn(50, |_, _| f64::from(u8::from(sampler.uniform() < 0.5)));
        let g = probit_loglik_grad(&gamma, &x1, &s)?;
        let fd = central_difference(|b| probit_loglik(b, &x1, &s).unwrap_or(f64::NAN), &gamma, 1e-5);
        worst = worst.max((&g - fd).amax() / g.amax().max(1.0));
    }
    Ok((worst < 1e-6, format!("max rel err {worst:.2e}")))
}

fn truncated_mean(k: &Kernels) -> Result<(bool, String)> {
    let (rho, sigma) = (0.8, 1.0);
    let mut sampler = Sampler::new(202);
    let draws: Vec<(f64, f64)> = (0..100_000).map(|_| correlated_errors(&mut sampler, rho, sigma)).collect();
    let mut worst: f64 = 0.0;
    for t in [-1.0, 0.0, 1.0] {
        let kept: Vec<f64> = draws.iter().filter(|(u, _)| *u > -t).map(|&(_, e)| e).collect();
        let m = kept.len() as f64;
        let mean = kept.iter().sum::<f64>() / m;
        let var = kept.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1.0);
        let want = rho * sigma * (k.inverse_mills)(t);
        worst = worst.max((mean - want).abs() / (var / m).sqrt());
    }
    Ok((worst < 3.0, format!("max deviation {worst:.2} SE")))
}

fn design(kind: AttributeKind, seed: u64) -> Result<AugmentedDesign> {
    let s = generate_synthetic(&SyntheticConfig {
        n: 400,
        n_test: 1,
        seed,
        attribute: AttributeModel {
            kind,
            ..SyntheticConfig::default().attribute
        },
        ..SyntheticConfig::default()
    })?;
    plain_design(&s.train)
}

fn md_closed_form_vs_dual(_: &Kernels) -> Result<(bool, String)> {
    let d = design(AttributeKind::Binary, 303)?;
    let closed = solve_md_closed_form(&d, 0.0)?;
    let loss = LeastSquaresLoss {
        x: d.x.clone(),
        y: d.y.clone(),
        ridge: 0.0,
    };
    let constraint = Constraint::equality(QuadraticConstraint {
        name: "md".into(),
        form: md_form(&d)?,
    });
    let sol = dual_ascent(&loss, &[constraint], &DualConfig::default())?;
    let diff = (&sol.beta - closed.beta_vector()).amax();
    let primal = loss.value(&closed.beta_vector());
    let gap = sol
        .trace
        .iterations
        .iter()
        .map(|it| it.dual_value - primal)
        .fold(f64::NEG_INFINITY, f64::max);
    let ok = diff < 1e-6 && gap <= 1e-8;
    Ok((ok, format!("coef diff {diff:.2e}, max dual - primal {gap:.2e}")))
}

fn msed_root(_: &Kernels) -> Result<(bool, String)> {
    let d = design(AttributeKind::Binary, 404)?;
    let fit = solve_msed(&d, 0.0, &RootConfig::default())?;
    let y_hat = &d.x * fit.model.beta_vector();
    let gp = grouped(&y_hat, &d.y, &d.a, AttributeKind::Binary)?;
    let v = msed(&gp)?.abs();
    Ok((v < 1e-6, format!("|MSED| {v:.2e}")))
}

fn pearson_feasibility(_: &Kernels) -> Result<(bool, String)> {
    let d = design(AttributeKind::Numeric, 505)?;
    let eps = 0.1;
    let (model, _) = solve_pearson(&d, eps, 0.0, &DualConfig::default())?;
    let y_hat = crate::heckman::predict(&model, &d.x, Some(&d.a), None)?;
    let r = correlation(y_hat.as_slice(), d.a.as_slice(), "prediction, attribute")?;
    Ok((r * r <= eps + 1e-6, format!("rho^2 {:.6} (bound {eps})", r * r)))
}
