//! Lagrangian dual ascent for least squares under fairness constraints.
//!
//! The primal loss is `‖Xβ − y‖² + ridge·‖β‖²`. Each iteration minimizes the
//! Lagrangian over `β` at fixed multipliers and then moves the multipliers
//! along the constraint values (the dual gradient), projecting inequality
//! multipliers onto `λ ≥ 0`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{central_difference, least_squares};

/// Step used for finite-difference constraint gradients.
pub const FD_STEP: f64 = 1e-6;

/// `½·βᵀQβ + lᵀβ + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub q: DMatrix<f64>,
    pub l: DVector<f64>,
    pub c: f64,
}

impl QuadraticForm {
    pub fn linear(l: DVector<f64>, c: f64) -> Self {
        let p = l.len();
        QuadraticForm {
            q: DMatrix::zeros(p, p),
            l,
            c,
        }
    }

    pub fn value(&self, beta: &DVector<f64>) -> f64 {
        0.5 * beta.dot(&(&self.q * beta)) + self.l.dot(beta) + self.c
    }

    pub fn gradient(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.q * beta + &self.l
    }

    pub fn negated(&self) -> Self {
        QuadraticForm {
            q: -&self.q,
            l: -&self.l,
            c: -self.c,
        }
    }

    pub fn shifted(&self, delta: f64) -> Self {
        QuadraticForm {
            c: self.c + delta,
            ..self.clone()
        }
    }
}

/// A differentiable constraint function of the coefficients.
pub trait ConstraintFn: Send + Sync {
    fn name(&self) -> &str;

    fn value(&self, beta: &DVector<f64>) -> Result<f64>;

    /// Central finite differences unless overridden.
    fn gradient(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        let mut failure = None;
        let g = central_difference(
            |b| match self.value(b) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            },
            beta,
            FD_STEP,
        );
        match failure {
            Some(e) => Err(e),
            None => Ok(g),
        }
    }

    /// Exact quadratic representation, when the constraint has one.
    fn quadratic(&self) -> Option<&QuadraticForm> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticConstraint {
    pub name: String,
    pub form: QuadraticForm,
}

impl ConstraintFn for QuadraticConstraint {
    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, beta: &DVector<f64>) -> Result<f64> {
        Ok(self.form.value(beta))
    }

    fn gradient(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.form.gradient(beta))
    }

    fn quadratic(&self) -> Option<&QuadraticForm> {
        Some(&self.form)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintKind {
    /// `g(β) ≤ 0` with multiplier `λ ≥ 0`.
    Inequality,
    /// `h(β) = 0` with a free multiplier `υ`.
    Equality,
}

pub struct Constraint {
    pub kind: ConstraintKind,
    pub function: Box<dyn ConstraintFn>,
}

impl Constraint {
    pub fn inequality(f: impl ConstraintFn + 'static) -> Self {
        Constraint {
            kind: ConstraintKind::Inequality,
            function: Box::new(f),
        }
    }

    pub fn equality(f: impl ConstraintFn + 'static) -> Self {
        Constraint {
            kind: ConstraintKind::Equality,
            function: Box::new(f),
        }
    }
}

/// `‖xβ − y‖² + ridge·‖β‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresLoss {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub ridge: f64,
}

impl LeastSquaresLoss {
    pub fn value(&self, beta: &DVector<f64>) -> f64 {
        (&self.x * beta - &self.y).norm_squared() + self.ridge * beta.norm_squared()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepRule {
    /// `μ_j += η·g_j / κ_j` with `κ_j = ∇g_jᵀ H⁻¹ ∇g_j` the curvature of the
    /// dual along `μ_j`, so `η = 1` is a Newton step on each multiplier.
    /// Steps are halved until the dual value does not decrease.
    CurvatureScaled { eta: f64 },
    /// `μ_j += η·decay^t·g_j`.
    Fixed { eta: f64, decay: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DualConfig {
    pub step: StepRule,
    pub max_iter: usize,
    /// Bound on the KKT residual: feasibility plus complementary slackness.
    pub tol: f64,
    /// Iteration cap for the inner quasi-Newton solve of non-quadratic constraints.
    pub inner_max_iter: usize,
}

impl Default for DualConfig {
    fn default() -> Self {
        DualConfig {
            step: StepRule::CurvatureScaled { eta: 1.0 },
            max_iter: 10_000,
            tol: 1e-6,
            inner_max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualIterate {
    pub iteration: usize,
    pub lambda: Vec<f64>,
    pub upsilon: Vec<f64>,
    pub primal_loss: f64,
    /// Inequality values followed by equality values.
    pub constraint_values: Vec<f64>,
    /// Lagrangian minimized over `β` at these multipliers.
    pub dual_value: f64,
    pub residual: f64,
}

/// Multipliers at which the inner problem was not positive definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedProbe {
    pub iteration: usize,
    pub lambda: Vec<f64>,
    pub upsilon: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DualTrace {
    pub iterations: Vec<DualIterate>,
    pub rejected: Vec<RejectedProbe>,
    pub converged: bool,
    /// Final primal loss minus the best dual value seen.
    pub final_gap_estimate: f64,
}

impl DualTrace {
    /// One JSON object per iterate.
    pub fn write_json_lines<W: Write>(&self, mut w: W) -> Result<()> {
        for it in &self.iterations {
            serde_json::to_writer(&mut w, it)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn best_dual(&self) -> f64 {
        self.iterations
            .iter()
            .map(|it| it.dual_value)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub beta: DVector<f64>,
    pub lambda: Vec<f64>,
    pub upsilon: Vec<f64>,
    pub trace: DualTrace,
}

struct Inner {
    beta: DVector<f64>,
    loss: f64,
    values: Vec<f64>,
    kappa: Vec<f64>,
    dual: f64,
}

struct Problem<'a> {
    loss: &'a LeastSquaresLoss,
    constraints: &'a [Constraint],
    gram2: DMatrix<f64>,
    xty2: DVector<f64>,
    inner_max_iter: usize,
}

impl Problem<'_> {
    /// Minimizes the Lagrangian at `mu`; `None` when it is not strictly convex.
    fn solve(&self, mu: &[f64], warm: Option<&DVector<f64>>) -> Result<Option<Inner>> {
        let mut h = self.gram2.clone();
        let mut rhs = self.xty2.clone();
        let mut general = Vec::new();
        for (c, &m) in self.constraints.iter().zip(mu) {
            match c.function.quadratic() {
                Some(f) => {
                    h += &f.q * m;
                    rhs -= &f.l * m;
                }
                None if m != 0.0 => general.push(c),
                None => {}
            }
        }
        let Some(chol) = h.cholesky() else {
            return Ok(None);
        };
        let (beta, inv) = if mu.iter().all(|&m| m == 0.0) {
            let b = least_squares(&self.loss.x, &self.loss.y, self.loss.ridge)?;
            (b, None)
        } else if general.is_empty() {
            (chol.solve(&rhs), None)
        } else {
            let start = warm.cloned().unwrap_or_else(|| chol.solve(&rhs));
            let objective = |b: &DVector<f64>| -> Option<f64> {
                let mut v = self.loss.value(b);
                for (c, &m) in self.constraints.iter().zip(mu) {
                    if m != 0.0 {
                        v += m * c.function.value(b).ok()?;
                    }
                }
                v.is_finite().then_some(v)
            };
            let gradient = |b: &DVector<f64>| -> Option<DVector<f64>> {
                let mut g = &self.gram2 * b - &self.xty2;
                for (c, &m) in self.constraints.iter().zip(mu) {
                    if m != 0.0 {
                        g += c.function.gradient(b).ok()? * m;
                    }
                }
                g.iter().all(|v| v.is_finite()).then_some(g)
            };
            let gtol = 1e-9 * self.xty2.amax().max(1.0);
            let (b, inv) = bfgs(objective, gradient, start, chol.inverse(), self.inner_max_iter, gtol);
            (b, Some(inv))
        };
        if beta.iter().any(|v| !v.is_finite()) {
            return Ok(None);
        }
        let mut values = Vec::with_capacity(mu.len());
        let mut kappa = Vec::with_capacity(mu.len());
        for c in self.constraints {
            values.push(c.function.value(&beta)?);
            let g = c.function.gradient(&beta)?;
            let hg = match &inv {
                Some(inv) => inv * &g,
                None => chol.solve(&g),
            };
            kappa.push(g.dot(&hg));
        }
        let loss = self.loss.value(&beta);
        let dual = loss + mu.iter().zip(&values).map(|(m, v)| m * v).sum::<f64>();
        Ok(Some(Inner {
            beta,
            loss,
            values,
            kappa,
            dual,
        }))
    }
}

/// Minimizes `f` by BFGS with Armijo backtracking, starting from the inverse
/// Hessian estimate `inv`. Returns the minimizer and final inverse Hessian.
fn bfgs<F, G>(
    f: F,
    grad: G,
    mut x: DVector<f64>,
    mut inv: DMatrix<f64>,
    max_iter: usize,
    gtol: f64,
) -> (DVector<f64>, DMatrix<f64>)
where
    F: Fn(&DVector<f64>) -> Option<f64>,
    G: Fn(&DVector<f64>) -> Option<DVector<f64>>,
{
    let (Some(mut fx), Some(mut g)) = (f(&x), grad(&x)) else {
        return (x, inv);
    };
    let n = x.len();
    for _ in 0..max_iter {
        if g.amax() < gtol {
            break;
        }
        let mut d = -(&inv * &g);
        let mut slope = g.dot(&d);
        if slope >= 0.0 {
            inv = DMatrix::identity(n, n) * (1.0 / g.norm().max(1.0));
            d = -(&inv * &g);
            slope = g.dot(&d);
        }
        let mut t = 1.0;
        let mut next = None;
        for _ in 0..60 {
            let cand = &x + &d * t;
            if let Some(fc) = f(&cand) {
                if fc <= fx + 1e-4 * t * slope {
                    next = Some((cand, fc));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, fxn)) = next else { break };
        let Some(gn) = grad(&xn) else { break };
        let s = &xn - &x;
        let yv = &gn - &g;
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            let rho = 1.0 / sy;
            let id = DMatrix::<f64>::identity(n, n);
            let left = &id - &s * yv.transpose() * rho;
            let right = &id - &yv * s.transpose() * rho;
            inv = &left * &inv * &right + &s * s.transpose() * rho;
        }
        let progress = fx - fxn;
        x = xn;
        fx = fxn;
        g = gn;
        if progress <= 1e-15 * fx.abs().max(1.0) {
            break;
        }
    }
    (x, inv)
}

fn kkt_residual(values: &[f64], mu: &[f64], constraints: &[Constraint]) -> f64 {
    values
        .iter()
        .zip(mu)
        .zip(constraints)
        .map(|((&v, &m), c)| match c.kind {
            ConstraintKind::Inequality if m > 0.0 => v.abs(),
            ConstraintKind::Inequality => v.max(0.0),
            ConstraintKind::Equality => v.abs(),
        })
        .fold(0.0, f64::max)
}

fn split(mu: &[f64], constraints: &[Constraint]) -> (Vec<f64>, Vec<f64>) {
    let pick = |kind| {
        mu.iter()
            .zip(constraints)
            .filter(|(_, c)| c.kind == kind)
            .map(|(&m, _)| m)
            .collect()
    };
    (pick(ConstraintKind::Inequality), pick(ConstraintKind::Equality))
}

fn ordered_values(values: &[f64], constraints: &[Constraint]) -> Vec<f64> {
    let (ineq, eq) = split(values, constraints);
    ineq.into_iter().chain(eq).collect()
}

/// A converged single inequality may still be violated by up to `tol`, and
/// then the returned loss can undercut the optimum. Raises the multiplier
/// until the minimizer is feasible. `None` if already feasible, or if the
/// inner problem stops being convex first.
fn restore_feasibility(problem: &Problem, mu: &[f64], cur: &Inner) -> Result<Option<(Vec<f64>, Inner)>> {
    if problem.constraints.len() != 1
        || problem.constraints[0].kind != ConstraintKind::Inequality
        || cur.values[0] <= 0.0
    {
        return Ok(None);
    }
    let lo_start = mu[0];
    let mut lo = lo_start;
    let mut delta = (lo_start.abs() * 1e-8).max(1e-12);
    let mut hi = None;
    for _ in 0..200 {
        let cand = lo_start + delta;
        match problem.solve(&[cand], Some(&cur.beta))? {
            None => return Ok(None),
            Some(next) if next.values[0] <= 0.0 => {
                hi = Some((cand, next));
                break;
            }
            Some(_) => {
                lo = cand;
                delta *= 2.0;
            }
        }
    }
    let Some((mut hi, mut best)) = hi else {
        return Ok(None);
    };
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match problem.solve(&[mid], Some(&best.beta))? {
            Some(next) if next.values[0] <= 0.0 => {
                hi = mid;
                best = next;
            }
            Some(_) => lo = mid,
            None => break,
        }
    }
    Ok(Some((vec![hi], best)))
}

/// Extra iterations allowed after the residual first drops below `tol`,
/// used to tighten it further while the steps keep being accepted.
const POLISH_ITERATIONS: usize = 10;

/// Alternates the inner minimization and multiplier updates until the KKT
/// residual is below `config.tol`.
pub fn dual_ascent(
    loss: &LeastSquaresLoss,
    constraints: &[Constraint],
    config: &DualConfig,
) -> Result<DualSolution> {
    let p = loss.x.ncols();
    if loss.x.nrows() != loss.y.len() {
        return Err(Error::ShapeMismatch {
            what: "dual ascent target".into(),
            expected: loss.x.nrows(),
            found: loss.y.len(),
        });
    }
    let gram2 = (loss.x.transpose() * &loss.x + DMatrix::identity(p, p) * loss.ridge) * 2.0;
    let xty2 = loss.x.transpose() * &loss.y * 2.0;
    let problem = Problem {
        loss,
        constraints,
        gram2,
        xty2,
        inner_max_iter: config.inner_max_iter,
    };

    let mut mu = vec![0.0; constraints.len()];
    let mut cur = problem.solve(&mu, None)?.ok_or(Error::IndefiniteInner)?;
    let mut trace = DualTrace::default();
    let mut polish = 0;
    let mut residual;
    let mut iteration = 0;
    loop {
        residual = kkt_residual(&cur.values, &mu, constraints);
        let (lambda, upsilon) = split(&mu, constraints);
        trace.iterations.push(DualIterate {
            iteration,
            lambda,
            upsilon,
            primal_loss: cur.loss,
            constraint_values: ordered_values(&cur.values, constraints),
            dual_value: cur.dual,
            residual,
        });
        if residual < config.tol {
            trace.converged = true;
            if residual < 1e-3 * config.tol || polish >= POLISH_ITERATIONS {
                break;
            }
            polish += 1;
        }
        if iteration >= config.max_iter {
            break;
        }

        let (direction, check_dual) = match config.step {
            StepRule::CurvatureScaled { eta } => {
                let d: Vec<f64> = cur
                    .values
                    .iter()
                    .zip(&cur.kappa)
                    .map(|(&g, &k)| {
                        let s = g / k;
                        if s.is_finite() {
                            eta * s
                        } else {
                            eta * g
                        }
                    })
                    .collect();
                (d, true)
            }
            StepRule::Fixed { eta, decay } => {
                let rate = eta * decay.powi(iteration as i32);
                (cur.values.iter().map(|g| rate * g).collect(), false)
            }
        };

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let cand: Vec<f64> = mu
                .iter()
                .zip(&direction)
                .zip(constraints)
                .map(|((&m, &d), c)| {
                    let v = m + step * d;
                    match c.kind {
                        ConstraintKind::Inequality => v.max(0.0),
                        ConstraintKind::Equality => v,
                    }
                })
                .collect();
            if cand == mu {
                break;
            }
            match problem.solve(&cand, Some(&cur.beta))? {
                None => {
                    let (lambda, upsilon) = split(&cand, constraints);
                    trace.rejected.push(RejectedProbe {
                        iteration,
                        lambda,
                        upsilon,
                    });
                }
                Some(next) => {
                    let tolerance = 1e-12 * (1.0 + cur.dual.abs());
                    if !check_dual || next.dual >= cur.dual - tolerance {
                        accepted = Some((cand, next));
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        iteration += 1;
        match accepted {
            Some((m, next)) => {
                mu = m;
                cur = next;
            }
            None => break,
        }
    }

    if trace.converged {
        if let Some((m, next)) = restore_feasibility(&problem, &mu, &cur)? {
            iteration += 1;
            let (lambda, upsilon) = split(&m, constraints);
            trace.iterations.push(DualIterate {
                iteration,
                lambda,
                upsilon,
                primal_loss: next.loss,
                constraint_values: ordered_values(&next.values, constraints),
                dual_value: next.dual,
                residual: kkt_residual(&next.values, &m, constraints),
            });
            mu = m;
            cur = next;
        }
    }
    trace.final_gap_estimate = cur.loss - trace.best_dual();
    if !trace.converged {
        return Err(Error::DualNotConverged {
            iterations: iteration,
            residual,
            trace: Box::new(trace),
        });
    }
    let (lambda, upsilon) = split(&mu, constraints);
    Ok(DualSolution {
        beta: cur.beta,
        lambda,
        upsilon,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_matrix, random_vector, rng};

    fn problem(seed: u64) -> LeastSquaresLoss {
        let mut r = rng(seed);
        LeastSquaresLoss {
            x: random_matrix(&mut r, 12, 3),
            y: random_vector(&mut r, 12),
            ridge: 0.0,
        }
    }

    #[test]
    fn no_constraints_is_least_squares() {
        let loss = problem(1);
        let sol = dual_ascent(&loss, &[], &DualConfig::default()).unwrap();
        assert_eq!(sol.beta, least_squares(&loss.x, &loss.y, 0.0).unwrap());
        assert_eq!(sol.trace.iterations.len(), 1);
        assert!(sol.trace.converged);
    }

    #[test]
    fn linear_equality_matches_kkt() {
        let loss = problem(2);
        let d = DVector::from_vec(vec![1.0, -0.5, 2.0]);
        let c = Constraint::equality(QuadraticConstraint {
            name: "lin".into(),
            form: QuadraticForm::linear(d.clone(), 0.3),
        });
        let sol = dual_ascent(&loss, &[c], &DualConfig::default()).unwrap();
        let mut kkt = DMatrix::zeros(4, 4);
        kkt.view_mut((0, 0), (3, 3)).copy_from(&(loss.x.transpose() * &loss.x * 2.0));
        kkt.view_mut((0, 3), (3, 1)).copy_from(&d);
        kkt.view_mut((3, 0), (1, 3)).copy_from(&d.transpose());
        let mut rhs = DVector::zeros(4);
        rhs.rows_mut(0, 3).copy_from(&(loss.x.transpose() * &loss.y * 2.0));
        rhs[3] = -0.3;
        let want = kkt.lu().solve(&rhs).unwrap();
        assert!((&sol.beta - want.rows(0, 3)).amax() < 1e-9);
        assert!((sol.upsilon[0] - want[3]).abs() < 1e-8);
    }

    #[test]
    fn inactive_inequality_keeps_zero_multiplier() {
        let loss = problem(3);
        let c = Constraint::inequality(QuadraticConstraint {
            name: "norm".into(),
            form: QuadraticForm {
                q: DMatrix::identity(3, 3) * 2.0,
                l: DVector::zeros(3),
                c: -1e6,
            },
        });
        let sol = dual_ascent(&loss, &[c], &DualConfig::default()).unwrap();
        assert_eq!(sol.lambda, vec![0.0]);
    }

    #[test]
    fn norm_ball_is_active_and_weakly_dual() {
        let loss = problem(4);
        let ols = least_squares(&loss.x, &loss.y, 0.0).unwrap();
        let radius2 = 0.25 * ols.norm_squared();
        let c = Constraint::inequality(QuadraticConstraint {
            name: "norm".into(),
            form: QuadraticForm {
                q: DMatrix::identity(3, 3) * 2.0,
                l: DVector::zeros(3),
                c: -radius2,
            },
        });
        let sol = dual_ascent(&loss, &[c], &DualConfig::default()).unwrap();
        assert!(sol.lambda[0] > 0.0);
        assert!((sol.beta.norm_squared() - radius2).abs() < 1e-6);
        let primal = loss.value(&sol.beta);
        for it in &sol.trace.iterations {
            assert!(it.dual_value <= primal + 1e-8);
            assert!(it.lambda[0] >= 0.0);
        }
        assert!(sol.trace.final_gap_estimate.abs() < 1e-6);
    }

    #[test]
    fn finite_difference_constraint_matches_quadratic() {
        struct Numeric(QuadraticForm);
        impl ConstraintFn for Numeric {
            fn name(&self) -> &str {
                "numeric"
            }
            fn value(&self, beta: &DVector<f64>) -> Result<f64> {
                Ok(self.0.value(beta))
            }
        }
        let loss = problem(5);
        let ols = least_squares(&loss.x, &loss.y, 0.0).unwrap();
        let form = QuadraticForm {
            q: DMatrix::identity(3, 3) * 2.0,
            l: DVector::zeros(3),
            c: -0.25 * ols.norm_squared(),
        };
        let exact = dual_ascent(
            &loss,
            &[Constraint::inequality(QuadraticConstraint {
                name: "q".into(),
                form: form.clone(),
            })],
            &DualConfig::default(),
        )
        .unwrap();
        let numeric = dual_ascent(&loss, &[Constraint::inequality(Numeric(form))], &DualConfig::default()).unwrap();
        assert!((exact.beta - numeric.beta).amax() < 1e-5);
    }

    #[test]
    fn fixed_step_rule_still_converges_on_easy_problem() {
        let loss = problem(6);
        let c = Constraint::equality(QuadraticConstraint {
            name: "lin".into(),
            form: QuadraticForm::linear(DVector::from_vec(vec![0.1, 0.0, 0.0]), 0.0),
        });
        let config = DualConfig {
            step: StepRule::Fixed { eta: 100.0, decay: 1.0 },
            ..DualConfig::default()
        };
        let sol = dual_ascent(&loss, &[c], &config).unwrap();
        assert!((sol.beta[0] * 0.1).abs() < 1e-6);
    }

    #[test]
    fn reports_non_convergence_with_trace() {
        let loss = problem(7);
        let c = Constraint::equality(QuadraticConstraint {
            name: "lin".into(),
            form: QuadraticForm::linear(DVector::from_vec(vec![1.0, 1.0, 1.0]), 5.0),
        });
        let config = DualConfig {
            step: StepRule::Fixed { eta: 1e-6, decay: 0.999 },
            max_iter: 20,
            ..DualConfig::default()
        };
        match dual_ascent(&loss, &[c], &config) {
            Err(Error::DualNotConverged { iterations, trace, .. }) => {
                assert_eq!(iterations, 20);
                assert_eq!(trace.iterations.len(), 21);
                assert!(!trace.converged);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn trace_serializes_as_json_lines() {
        let loss = problem(8);
        let c = Constraint::equality(QuadraticConstraint {
            name: "lin".into(),
            form: QuadraticForm::linear(DVector::from_vec(vec![1.0, 0.0, 0.0]), 0.0),
        });
        let sol = dual_ascent(&loss, &[c], &DualConfig::default()).unwrap();
        let mut buf = Vec::new();
        sol.trace.write_json_lines(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), sol.trace.iterations.len());
        for line in text.lines() {
            let it: DualIterate = serde_json::from_str(line).unwrap();
            assert_eq!(it.upsilon.len(), 1);
        }
    }
}
