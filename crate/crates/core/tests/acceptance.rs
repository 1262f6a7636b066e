//! End-to-end acceptance suite. Runs every criterion, prints one line per
//! criterion and exits non-zero if any fails.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use heckfair::data::{generate_synthetic, ingest, AttributeModel, DatasetConfig, SyntheticConfig};
use heckfair::experiment::{fit_split, run_ratio_sweep, DataSource, ExperimentSpec};
use heckfair::heckman::{fit_heckman, fit_lr, plain_design, predict, AugmentedDesign};
use heckfair::linalg::{central_difference, least_squares};
use heckfair::metrics::{correlation, grouped, mean_difference, msed};
use heckfair::model::{AttributeKind, FairnessConstraint, Method, Notion, Slice};
use heckfair::normal::inverse_mills;
use heckfair::probit::{fit_probit, probit_loglik, probit_loglik_grad, ProbitConfig};
use heckfair::random::Sampler;
use heckfair::solvers::{
    dual_ascent, md_form, solve_md_closed_form, solve_msed, solve_pearson, Constraint, DualConfig,
    LeastSquaresLoss, QuadraticConstraint, RootConfig, SolverConfig,
};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn synthetic(n: usize, seed: u64) -> SyntheticConfig {
    SyntheticConfig {
        n,
        n_test: n,
        seed,
        ..SyntheticConfig::default()
    }
}

fn probit_gradient() -> Outcome {
    let mut s = Sampler::new(1);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x1 = DMatrix::from_fn(50, 4, |_, _| s.normal());
        let gamma = DVector::from_fn(4, |_, _| 0.7 * s.normal());
        let sel = DVector::from_fn(50, |_, _| f64::from(u8::from(s.uniform() < 0.5)));
        let g = probit_loglik_grad(&gamma, &x1, &sel).unwrap();
        let fd = central_difference(|b| probit_loglik(b, &x1, &sel).unwrap(), &gamma, 1e-5);
        worst = worst.max((&g - fd).amax() / g.amax());
    }
    verdict(worst < 1e-6, format!("max rel err {worst:.2e} over 20 instances"))
}

fn probit_recovery() -> Outcome {
    let truth = [0.5, -1.0, 0.25];
    let data = generate_synthetic(&SyntheticConfig {
        n: 5000,
        n_test: 1,
        d1: 3,
        d2: 1,
        gamma: truth.to_vec(),
        beta: vec![0.0],
        rho: 0.0,
        sigma_eps: 1.0,
        seed: 2,
        attribute: AttributeModel {
            kind: AttributeKind::Binary,
            weights: vec![1.0, 0.0, 0.0],
            u_weight: 0.0,
            noise_sd: 1.0,
        },
    })
    .unwrap();
    let fit = fit_probit(&data.train.x1, &data.train.s, &ProbitConfig::default()).unwrap();
    let err = (fit.gamma - DVector::from_column_slice(&truth)).amax();
    verdict(err < 0.1, format!("sup error {err:.4}"))
}

fn imr_values() -> Outcome {
    let at0 = (inverse_mills(0.0) - 0.797_884_560_8).abs();
    // 50-digit reference values.
    let tail = [(-5.0, 5.186_503_967_125_842), (8.0, 5.052_271_083_536_895e-15)];
    let rel = tail
        .iter()
        .map(|&(t, want)| ((inverse_mills(t) - want) / want).abs())
        .fold(0.0, f64::max);
    verdict(at0 < 1e-9 && rel < 1e-8, format!("|IMR(0) - ref| {at0:.1e}, tail rel err {rel:.1e}"))
}

fn truncated_mean() -> Outcome {
    let data = generate_synthetic(&SyntheticConfig {
        n: 100_000,
        n_test: 1,
        rho: 0.8,
        sigma_eps: 1.0,
        seed: 4,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let (u, eps) = (&data.latent.u, &data.latent.eps);
    let mut worst: f64 = 0.0;
    for t in [-1.0, 0.0, 1.0] {
        let kept: Vec<f64> = u.iter().zip(eps).filter(|(u, _)| **u > -t).map(|(_, e)| *e).collect();
        let m = kept.len() as f64;
        let mean = kept.iter().sum::<f64>() / m;
        let var = kept.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1.0);
        let want = 0.8 * inverse_mills(t);
        worst = worst.max((mean - want).abs() / (var / m).sqrt());
    }
    verdict(worst < 3.0, format!("max deviation {worst:.2} SE"))
}

/// `x0` enters both equations, `w` only the selection equation.
fn heckman_design(rho: f64, seed: u64) -> SyntheticConfig {
    SyntheticConfig {
        n: 10_000,
        n_test: 1,
        d1: 3,
        d2: 2,
        gamma: vec![1.0, 1.0, 0.0],
        beta: vec![1.0, 0.5],
        rho,
        sigma_eps: 1.0,
        seed,
        attribute: AttributeModel {
            kind: AttributeKind::Binary,
            weights: vec![0.0, 0.0, 0.0],
            u_weight: 0.0,
            noise_sd: 1.0,
        },
    }
}

fn heckman_vs_ols() -> Outcome {
    let truth = DVector::from_vec(vec![1.0, 0.5]);
    let fit = |rho| {
        let data = generate_synthetic(&heckman_design(rho, 5)).unwrap();
        let h = fit_heckman(&data.train, &ProbitConfig::default(), 0.0).unwrap();
        let lr = fit_lr(&data.train, 0.0).unwrap();
        (h, lr)
    };
    let (h, lr) = fit(0.8);
    let eh = (h.beta_vector() - &truth).amax();
    let eo = (lr.beta_vector() - &truth).amax();
    let alpha = h.beta_alpha.unwrap();
    let (h0, lr0) = fit(0.0);
    let agree = (h0.beta_vector() - lr0.beta_vector()).amax();
    verdict(
        eh < eo && (0.65..=0.95).contains(&alpha) && agree < 0.05,
        format!("err Heckman {eh:.4} vs OLS {eo:.4}, beta_alpha {alpha:.4}, rho=0 gap {agree:.4}"),
    )
}

/// Small binary-attribute designs with a selection-corrected column.
fn small_designs(count: u64, n: usize) -> Vec<AugmentedDesign> {
    (0..count)
        .map(|seed| {
            let data = generate_synthetic(&SyntheticConfig {
                n,
                n_test: 1,
                seed: 1000 + seed,
                ..SyntheticConfig::default()
            })
            .unwrap();
            let fit = fit_probit(&data.train.x1, &data.train.s, &ProbitConfig::default()).unwrap();
            heckfair::heckman::augment(&data.train, &fit).unwrap()
        })
        .collect()
}

fn md_closed_form() -> Outcome {
    let mut worst_kkt: f64 = 0.0;
    let mut worst_md: f64 = 0.0;
    for d in small_designs(50, 40) {
        let model = solve_md_closed_form(&d, 0.0).unwrap();
        let mut coef = model.beta.clone();
        coef.extend(model.beta_alpha);
        let coef = DVector::from_vec(coef);
        // KKT system of min ‖Xβ − y‖² s.t. dᵀβ = 0, with d from group means.
        let p = d.x.ncols();
        let [g0, g1] = d.groups.clone().unwrap();
        let mean = |rows: &[usize]| {
            DVector::from_fn(p, |j, _| rows.iter().map(|&i| d.x[(i, j)]).sum::<f64>() / rows.len() as f64)
        };
        let dvec = mean(&g0) - mean(&g1);
        let mut kkt = DMatrix::zeros(p + 1, p + 1);
        kkt.view_mut((0, 0), (p, p)).copy_from(&(d.x.transpose() * &d.x * 2.0));
        kkt.view_mut((0, p), (p, 1)).copy_from(&dvec);
        kkt.view_mut((p, 0), (1, p)).copy_from(&dvec.transpose());
        let mut rhs = DVector::zeros(p + 1);
        rhs.rows_mut(0, p).copy_from(&(d.x.transpose() * &d.y * 2.0));
        let want = kkt.lu().solve(&rhs).unwrap();
        worst_kkt = worst_kkt.max((&coef - want.rows(0, p)).amax());
        let gp = grouped(&(&d.x * &coef), &d.y, &d.a, AttributeKind::Binary).unwrap();
        worst_md = worst_md.max(mean_difference(&gp).unwrap().abs());
    }
    verdict(
        worst_kkt < 1e-8 && worst_md < 1e-8,
        format!("max coef diff vs KKT {worst_kkt:.2e}, max |MD| {worst_md:.2e}"),
    )
}

/// MSED of the constrained normal-equation solution, computed with an
/// explicit inverse; `None` where the matrix is not positive definite.
fn msed_psi(d: &AugmentedDesign, lambda: f64) -> Option<f64> {
    let [g0, g1] = d.groups.clone().unwrap();
    let mut a = d.x.transpose() * &d.x;
    let mut b = d.x.transpose() * &d.y;
    for (rows, sign) in [(&g0, 1.0), (&g1, -1.0)] {
        let w = sign * lambda / rows.len() as f64;
        for &i in rows.iter() {
            let xi = d.x.row(i).transpose();
            a += &xi * xi.transpose() * w;
            b += &xi * (d.y[i] * w);
        }
    }
    let eig = a.clone().symmetric_eigenvalues();
    if eig.min() <= 1e-12 * eig.max().abs() {
        return None;
    }
    let beta = a.try_inverse()? * b;
    let mse = |rows: &[usize]| rows.iter().map(|&i| (d.x.row(i).dot(&beta.transpose()) - d.y[i]).powi(2)).sum::<f64>() / rows.len() as f64;
    Some(mse(&g0) - mse(&g1))
}

fn msed_oracle_root(d: &AugmentedDesign) -> Option<f64> {
    let psi0 = msed_psi(d, 0.0)?;
    let dir = psi0.signum();
    let (mut lo, mut hi): (f64, f64) = (0.0, f64::NAN);
    let mut step = 1e-3;
    while lo.abs() < 1e6 {
        let next = lo + dir * step;
        match msed_psi(d, next) {
            Some(v) if v.signum() == dir => {
                lo = next;
                step *= 1.5;
            }
            _ => {
                hi = next;
                break;
            }
        }
    }
    if hi.is_nan() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match msed_psi(d, mid) {
            Some(v) if v.signum() == dir => lo = mid,
            _ => hi = mid,
        }
    }
    let root = 0.5 * (lo + hi);
    msed_psi(d, root).filter(|v| v.abs() < 1e-6).map(|_| root)
}

fn msed_root() -> Outcome {
    let (mut worst_msed, mut worst_lambda): (f64, f64) = (0.0, 0.0);
    let mut failures = 0;
    for d in small_designs(50, 40) {
        match solve_msed(&d, 0.0, &RootConfig::default()) {
            Ok(fit) => {
                let mut coef = fit.model.beta.clone();
                coef.extend(fit.model.beta_alpha);
                let gp = grouped(&(&d.x * DVector::from_vec(coef)), &d.y, &d.a, AttributeKind::Binary).unwrap();
                worst_msed = worst_msed.max(msed(&gp).unwrap().abs());
                match msed_oracle_root(&d) {
                    Some(root) => worst_lambda = worst_lambda.max((fit.lambda - root).abs()),
                    None => failures += 1,
                }
            }
            Err(_) => failures += 1,
        }
    }
    verdict(
        failures == 0 && worst_msed < 1e-6 && worst_lambda < 1e-6,
        format!("max |MSED| {worst_msed:.2e}, max lambda diff {worst_lambda:.2e}, unsolved {failures}"),
    )
}

fn numeric_design(seed: u64, n: usize) -> AugmentedDesign {
    let data = generate_synthetic(&SyntheticConfig {
        n,
        n_test: 1,
        seed,
        attribute: AttributeModel {
            kind: AttributeKind::Numeric,
            weights: vec![-1.0, 0.5, 0.0, 0.0],
            u_weight: 0.7,
            noise_sd: 1.0,
        },
        ..SyntheticConfig::default()
    })
    .unwrap();
    plain_design(&data.train).unwrap()
}

/// Loss of the best `β_a` for fixed `β_x` on `ŷ = Xβ_x + (a − ā)β_a`, where
/// feasibility `ρ² ≤ ε` is a symmetric interval for `β_a` after removing
/// from `X` its projection on `a − ā`.
fn pearson_reduced(x: &DMatrix<f64>, a: &DVector<f64>, y: &DVector<f64>, eps: f64, beta: &DVector<f64>) -> f64 {
    let m = a.len() as f64;
    let ac = a.add_scalar(-a.mean());
    let xb = x * beta;
    let slope = xb.dot(&ac) / ac.norm_squared();
    let resid = &xb - &ac * slope;
    let v_u = resid.add_scalar(-resid.mean()).norm_squared() / m;
    let var_a = ac.norm_squared() / m;
    let bound = if eps >= 1.0 { f64::INFINITY } else { (eps * v_u / ((1.0 - eps) * var_a)).sqrt() };
    let free = ac.dot(&(y - &resid)) / ac.norm_squared();
    let coef = free.clamp(-bound, bound);
    (&resid + &ac * coef - y).norm_squared()
}

fn pearson_oracle(d: &AugmentedDesign, eps: f64) -> f64 {
    let p = d.x.ncols();
    let start = least_squares(&d.x, &d.y, 0.0).unwrap();
    let mut s = Sampler::new(77);
    let mut best = f64::INFINITY;
    for k in 0..5 {
        let mut b = if k == 0 { start.clone() } else { &start + DVector::from_fn(p, |_, _| s.normal()) };
        let f_of = |b: &DVector<f64>| pearson_reduced(&d.x, &d.a, &d.y, eps, b);
        let mut f = f_of(&b);
        let mut step = 1e-2;
        for _ in 0..50_000 {
            let g = central_difference(f_of, &b, 1e-7);
            if g.amax() < 1e-9 {
                break;
            }
            let mut moved = false;
            while step > 1e-16 {
                let cand = &b - &g * step;
                let fc = f_of(&cand);
                if fc < f {
                    b = cand;
                    f = fc;
                    step *= 2.0;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        best = best.min(f);
    }
    best
}

fn pearson_feasibility() -> Outcome {
    let mut worst_violation = f64::NEG_INFINITY;
    let mut ols_diff: f64 = 0.0;
    let mut worst_obj: f64 = 0.0;
    for seed in 0..10 {
        let d = numeric_design(2000 + seed, 30);
        for eps in [0.0, 0.1, 0.5, 1.0] {
            let (model, _) = solve_pearson(&d, eps, 0.0, &DualConfig::default()).unwrap();
            let y_hat = predict(&model, &d.x, Some(&d.a), None).unwrap();
            let r = correlation(y_hat.as_slice(), d.a.as_slice(), "").unwrap();
            worst_violation = worst_violation.max(r * r - eps);
            let loss = (&y_hat - &d.y).norm_squared();
            if eps == 1.0 {
                let mut z = d.x.clone().insert_column(d.x.ncols(), 0.0);
                z.set_column(d.x.ncols(), &d.a);
                let ols = &z * least_squares(&z, &d.y, 0.0).unwrap();
                ols_diff = ols_diff.max((&y_hat - ols).amax());
            }
            if eps == 0.1 {
                worst_obj = worst_obj.max((loss - pearson_oracle(&d, eps)).abs());
            }
        }
    }
    verdict(
        worst_violation <= 1e-6 && ols_diff < 1e-9 && worst_obj < 1e-4,
        format!(
            "max rho^2 - eps {worst_violation:.2e}, eps=1 vs OLS {ols_diff:.1e}, objective vs oracle {worst_obj:.2e}"
        ),
    )
}

fn dual_agreement() -> Outcome {
    let mut worst_coef: f64 = 0.0;
    let mut worst_gap = f64::NEG_INFINITY;
    for d in small_designs(10, 60) {
        let closed = solve_md_closed_form(&d, 0.0).unwrap();
        let mut coef = closed.beta.clone();
        coef.extend(closed.beta_alpha);
        let coef = DVector::from_vec(coef);
        let loss = LeastSquaresLoss {
            x: d.x.clone(),
            y: d.y.clone(),
            ridge: 0.0,
        };
        let c = Constraint::equality(QuadraticConstraint {
            name: "md".into(),
            form: md_form(&d).unwrap(),
        });
        let sol = dual_ascent(&loss, &[c], &DualConfig::default()).unwrap();
        worst_coef = worst_coef.max((&sol.beta - &coef).amax());
        let primal = loss.value(&coef);
        for it in &sol.trace.iterations {
            worst_gap = worst_gap.max(it.dual_value - primal);
        }
    }
    verdict(
        worst_coef < 1e-6 && worst_gap <= 1e-8,
        format!("max coef diff {worst_coef:.2e}, max dual - primal {worst_gap:.2e}"),
    )
}

fn spec(seed: u64) -> ExperimentSpec {
    ExperimentSpec {
        dataset: DataSource::Synthetic(synthetic(3000, seed)),
        methods: vec![Method::LR, Method::Heckman, Method::FairLR, Method::FairLRStar],
        constraint: Some(FairnessConstraint::equality(Notion::MD)),
        ratio_sweep: Some(vec![0.1, 0.2, 0.3, 0.4]),
        output_dir: None,
        solver: SolverConfig::default(),
        probit: ProbitConfig::default(),
    }
}

fn method_orderings() -> Outcome {
    let mut wins = [0; 4];
    for seed in 0..10 {
        let s = spec(seed);
        let data = generate_synthetic(&synthetic(3000, seed)).unwrap();
        let out = fit_split(&s, &data.train, &data.test).unwrap();
        let get = |m: Method, slice: Slice| {
            out.rows
                .iter()
                .find(|r| r.method == m && r.report.slice == slice)
                .map(|r| r.report.clone())
                .unwrap()
        };
        let test = |m| get(m, Slice::Test);
        let md = |m, slice| get(m, slice).md.unwrap();
        let gap = |m| (md(m, Slice::TrainSelected) - md(m, Slice::Test)).abs();
        let checks = [
            test(Method::Heckman).mse < test(Method::LR).mse,
            test(Method::FairLRStar).mse < test(Method::FairLR).mse,
            md(Method::FairLRStar, Slice::Test).abs() < md(Method::FairLR, Slice::Test).abs(),
            gap(Method::FairLRStar) < gap(Method::FairLR),
        ];
        for (w, c) in wins.iter_mut().zip(checks) {
            *w += usize::from(c);
        }
    }
    verdict(
        wins.iter().all(|&w| w >= 9),
        format!(
            "seeds holding: MSE Heckman<LR {}/10, MSE FairLR*<FairLR {}/10, |MD| {}/10, MD gap {}/10",
            wins[0], wins[1], wins[2], wins[3]
        ),
    )
}

fn ratio_sweep() -> Outcome {
    let mut wins = 0;
    for seed in 0..10 {
        let mut s = spec(seed);
        s.methods = vec![Method::FairLR, Method::FairLRStar];
        let rows = run_ratio_sweep(&s).unwrap();
        let spread = |m| {
            let v: Vec<f64> = rows.iter().filter(|r| r.method == m).map(|r| r.test_fairness.abs()).collect();
            v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min)
        };
        wins += usize::from(spread(Method::FairLRStar) < spread(Method::FairLR));
    }
    verdict(wins >= 9, format!("FairLR* spread smaller on {wins}/10 seeds"))
}

fn crime_counts() -> Outcome {
    let Ok(path) = std::env::var("HECKFAIR_CRIME_CSV") else {
        return Outcome::Skip("set HECKFAIR_CRIME_CSV to the CRIME csv to run".into());
    };
    let config_path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/crime.json");
    let text = std::fs::read_to_string(config_path).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let mut config: DatasetConfig = serde_json::from_value(value["dataset"]["csv"].clone()).unwrap();
    config.csv_path = path.into();
    match ingest(&config) {
        Ok(split) => {
            let ds = split.train.selected_count();
            let du = split.train.n() - ds;
            let test = split.test.n();
            verdict(
                (ds, du, test) == (976, 419, 599),
                format!("|D_s| {ds}, |D_u| {du}, test {test}"),
            )
        }
        Err(e) => Outcome::Fail(format!("ingest failed: {e}")),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("probit gradient check", probit_gradient),
        ("probit recovery", probit_recovery),
        ("inverse Mills ratio values", imr_values),
        ("truncated mean identity", truncated_mean),
        ("Heckman beats OLS under bias", heckman_vs_ols),
        ("MD closed form", md_closed_form),
        ("MSED root finding", msed_root),
        ("Pearson feasibility and optimality", pearson_feasibility),
        ("closed form vs dual ascent", dual_agreement),
        ("orderings on biased synthetic data", method_orderings),
        ("ratio sweep robustness", ratio_sweep),
        ("CRIME split sizes", crime_counts),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::Fail(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("criterion {:>2} {tag}  {name}: {detail} [{secs:.2}s]", i + 1);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
