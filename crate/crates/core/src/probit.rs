//! Probit selection equation `P(s = 1 | x1) = Φ(x1·γ)` fitted by maximum
//! likelihood, and the inverse Mills ratio derived from it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spd_solve;
use crate::normal::{inverse_mills, ln_cdf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbitConfig {
    pub max_iter: usize,
    /// Convergence threshold on the sup-norm of the penalized score.
    pub tol: f64,
    /// Weight of the `ridge·‖γ‖²` penalty subtracted from the log-likelihood.
    pub ridge: f64,
}

impl Default for ProbitConfig {
    fn default() -> Self {
        ProbitConfig {
            max_iter: 100,
            tol: 1e-8,
            ridge: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbitFit {
    pub gamma: DVector<f64>,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn check_shapes(gamma: &DVector<f64>, x1: &DMatrix<f64>, s: &DVector<f64>) -> Result<()> {
    if x1.ncols() != gamma.len() {
        return Err(Error::ShapeMismatch {
            what: "probit coefficients".into(),
            expected: x1.ncols(),
            found: gamma.len(),
        });
    }
    if x1.nrows() != s.len() {
        return Err(Error::ShapeMismatch {
            what: "selection indicator".into(),
            expected: x1.nrows(),
            found: s.len(),
        });
    }
    Ok(())
}

/// `Σ s·log Φ(t) + (1 − s)·log Φ(−t)` with `t = x1_i·γ`.
pub fn probit_loglik(gamma: &DVector<f64>, x1: &DMatrix<f64>, s: &DVector<f64>) -> Result<f64> {
    check_shapes(gamma, x1, s)?;
    Ok(loglik_unchecked(gamma, x1, s))
}

fn loglik_unchecked(gamma: &DVector<f64>, x1: &DMatrix<f64>, s: &DVector<f64>) -> f64 {
    let t = x1 * gamma;
    t.iter()
        .zip(s.iter())
        .map(|(&t, &si)| si * ln_cdf(t) + (1.0 - si) * ln_cdf(-t))
        .sum()
}

/// Per-row derivative of the log-likelihood with respect to `t`.
fn score_weight(t: f64, s: f64) -> f64 {
    s * inverse_mills(t) - (1.0 - s) * inverse_mills(-t)
}

/// Score of [`probit_loglik`] with respect to `γ`.
pub fn probit_loglik_grad(
    gamma: &DVector<f64>,
    x1: &DMatrix<f64>,
    s: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_shapes(gamma, x1, s)?;
    let t = x1 * gamma;
    let w = DVector::from_iterator(t.len(), t.iter().zip(s.iter()).map(|(&t, &s)| score_weight(t, s)));
    Ok(x1.transpose() * w)
}

/// Negative Hessian `Σ w_i x_i x_iᵀ`; each weight lies in (0, 1).
fn information(gamma: &DVector<f64>, x1: &DMatrix<f64>, s: &DVector<f64>) -> DMatrix<f64> {
    let t = x1 * gamma;
    let mut weighted = x1.clone();
    for (i, mut row) in weighted.row_iter_mut().enumerate() {
        let ti = t[i];
        let w = if s[i] == 1.0 {
            let l = inverse_mills(ti);
            l * (l + ti)
        } else {
            let l = inverse_mills(-ti);
            l * (l - ti)
        };
        row *= w;
    }
    x1.transpose() * weighted
}

/// Newton–Raphson with step halving on the concave (ridge-penalized)
/// log-likelihood, falling back to a gradient step if the Newton system
/// cannot be solved.
pub fn fit_probit(x1: &DMatrix<f64>, s: &DVector<f64>, config: &ProbitConfig) -> Result<ProbitFit> {
    let d = x1.ncols();
    let gamma0 = DVector::zeros(d);
    check_shapes(&gamma0, x1, s)?;
    for (i, &v) in s.iter().enumerate() {
        if v != 0.0 && v != 1.0 {
            return Err(Error::NonBinaryIndicator {
                row: i,
                column: "s".into(),
                value: v,
            });
        }
    }
    let ones = s.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == s.len() {
        return Err(Error::SingleClass);
    }

    let ridge = config.ridge;
    let objective = |g: &DVector<f64>| loglik_unchecked(g, x1, s) - ridge * g.norm_squared();
    let mut gamma = gamma0;
    let mut value = objective(&gamma);
    let mut grad_norm = f64::INFINITY;
    for iter in 0..=config.max_iter {
        let grad = probit_loglik_grad(&gamma, x1, s)? - &gamma * (2.0 * ridge);
        grad_norm = grad.amax();
        if grad_norm < config.tol {
            return Ok(ProbitFit {
                loglik: loglik_unchecked(&gamma, x1, s),
                gamma,
                iterations: iter,
                converged: true,
            });
        }
        if iter == config.max_iter {
            break;
        }
        let mut info = information(&gamma, x1, s);
        for j in 0..d {
            info[(j, j)] += 2.0 * ridge;
        }
        let direction = spd_solve(&info, &grad).unwrap_or_else(|| grad.clone());
        // Close to the optimum the predicted gain drops below the rounding
        // noise of the summed log-likelihood; the full step is then taken
        // as long as it does not lose more than that noise.
        let noise = 1e-12 * (1.0 + value.abs());
        let at_noise_level = grad.dot(&direction) <= 1e2 * noise;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let candidate = &gamma + &direction * step;
            let cand_value = objective(&candidate);
            let floor = if at_noise_level && step == 1.0 { value - noise } else { value };
            if cand_value.is_finite() && cand_value >= floor {
                gamma = candidate;
                value = cand_value;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // no ascent possible at working precision
            break;
        }
    }
    Err(Error::Diverged {
        iterations: config.max_iter,
        grad_norm,
    })
}

/// Inverse Mills ratio `φ(x1_i·γ̂) / Φ(x1_i·γ̂)` for every row of `x1`.
pub fn imr_column(fit: &ProbitFit, x1: &DMatrix<f64>) -> Result<DVector<f64>> {
    if !fit.converged {
        return Err(Error::NotConverged);
    }
    if x1.ncols() != fit.gamma.len() {
        return Err(Error::LayoutMismatch(format!(
            "probit fitted on {} columns, x1 has {}",
            fit.gamma.len(),
            x1.ncols()
        )));
    }
    Ok((x1 * &fit.gamma).map(inverse_mills))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal::quantile;
    use proptest::prelude::*;

    fn intercept(n: usize) -> DMatrix<f64> {
        DMatrix::from_element(n, 1, 1.0)
    }

    #[test]
    fn loglik_intercept_only() {
        let g = DVector::from_element(1, 0.0);
        let v = probit_loglik(&g, &intercept(2), &DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert!((v + 1.386_294_361_1).abs() < 1e-10);
        let v = probit_loglik(&g, &intercept(1), &DVector::from_vec(vec![1.0])).unwrap();
        assert!((v + std::f64::consts::LN_2).abs() < 1e-10);
    }

    #[test]
    fn loglik_matches_high_precision_reference() {
        // Reference from 50-digit evaluation of the same sum.
        let x = DMatrix::from_row_slice(
            5,
            2,
            &[1.0, 0.3, 1.0, -1.2, 1.0, 2.5, 1.0, -0.7, 1.0, 0.05],
        );
        let s = DVector::from_vec(vec![1.0, 0.0, 1.0, 1.0, 0.0]);
        let g = DVector::from_vec(vec![0.4, -1.3]);
        let v = probit_loglik(&g, &x, &s).unwrap();
        let want = -11.597_258_618_246_173;
        assert!(((v - want) / want).abs() < 1e-12, "{v}");
    }

    #[test]
    fn loglik_finite_at_extreme_index() {
        // |t| = 30 on both tails
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 10.0, 1.0, -10.0, 1.0, 9.0]);
        let s = DVector::from_vec(vec![0.0, 1.0, 1.0]);
        let g = DVector::from_vec(vec![0.0, 3.0]);
        let v = probit_loglik(&g, &x, &s).unwrap();
        let want = -908.642_487_912_686_4;
        assert!(((v - want) / want).abs() < 1e-12, "{v}");
    }

    #[test]
    fn loglik_rejects_shape_mismatch() {
        let g = DVector::zeros(2);
        assert!(matches!(
            probit_loglik(&g, &intercept(2), &DVector::zeros(2)),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn score_at_stationary_point() {
        let g = DVector::zeros(1);
        let s = DVector::from_vec(vec![1.0, 0.0, 1.0, 0.0]);
        let grad = probit_loglik_grad(&g, &intercept(4), &s).unwrap();
        assert!(grad[0].abs() < 1e-15);
    }

    #[test]
    fn score_all_selected() {
        let g = DVector::zeros(1);
        let grad = probit_loglik_grad(&g, &intercept(4), &DVector::from_element(4, 1.0)).unwrap();
        assert!((grad[0] - 3.191_538_243_2).abs() < 1e-9);
    }

    #[test]
    fn fit_balanced_intercept() {
        let s = DVector::from_vec(vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let fit = fit_probit(&intercept(6), &s, &ProbitConfig::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.gamma[0].abs() < 1e-8);
    }

    #[test]
    fn fit_intercept_recovers_quantile() {
        let s = DVector::from_iterator(10, (0..10).map(|i| if i < 7 { 1.0 } else { 0.0 }));
        let fit = fit_probit(&intercept(10), &s, &ProbitConfig::default()).unwrap();
        // Oracle: Φ⁻¹(0.7), itself checked against a 50-digit reference.
        assert!((quantile(0.7) - 0.524_400_512_7).abs() < 1e-10);
        assert!((fit.gamma[0] - quantile(0.7)).abs() < 1e-6, "{}", fit.gamma[0]);
        let grad = probit_loglik_grad(&fit.gamma, &intercept(10), &s).unwrap() - &fit.gamma * 2e-8;
        assert!(grad.amax() < 1e-8);
    }

    #[test]
    fn single_class_is_an_error() {
        let s = DVector::from_element(5, 1.0);
        assert_eq!(
            fit_probit(&intercept(5), &s, &ProbitConfig::default()),
            Err(Error::SingleClass)
        );
    }

    #[test]
    fn imr_column_values() {
        let fit = ProbitFit {
            gamma: DVector::zeros(1),
            loglik: 0.0,
            iterations: 0,
            converged: true,
        };
        let a = imr_column(&fit, &intercept(3)).unwrap();
        assert!(a.iter().all(|&v| (v - 0.797_884_560_8).abs() < 1e-10));

        let fit = ProbitFit {
            gamma: DVector::from_element(1, -5.0),
            ..fit
        };
        let a = imr_column(&fit, &intercept(1)).unwrap();
        assert!(((a[0] - 5.186_503_967_125_842) / a[0]).abs() < 1e-10);
    }

    #[test]
    fn imr_column_decreasing_in_index() {
        let fit = ProbitFit {
            gamma: DVector::from_vec(vec![1.0]),
            loglik: 0.0,
            iterations: 0,
            converged: true,
        };
        let x = DMatrix::from_column_slice(6, 1, &[-9.0, -4.0, -0.5, 0.0, 2.0, 7.0]);
        let a = imr_column(&fit, &x).unwrap();
        assert!(a.as_slice().windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn imr_column_requires_convergence() {
        let fit = ProbitFit {
            gamma: DVector::zeros(1),
            loglik: 0.0,
            iterations: 100,
            converged: false,
        };
        assert_eq!(imr_column(&fit, &intercept(1)), Err(Error::NotConverged));
    }

    fn instance() -> impl Strategy<Value = (DMatrix<f64>, DVector<f64>, DVector<f64>, DVector<f64>)> {
        (
            proptest::collection::vec(-2.0f64..2.0, 30),
            proptest::collection::vec(0u8..2, 10),
            proptest::collection::vec(-1.5f64..1.5, 3),
            proptest::collection::vec(-1.5f64..1.5, 3),
        )
            .prop_map(|(x, s, g1, g2)| {
                let mut x = DMatrix::from_row_slice(10, 3, &x);
                x.column_mut(0).fill(1.0);
                (
                    x,
                    DVector::from_iterator(10, s.into_iter().map(f64::from)),
                    DVector::from_vec(g1),
                    DVector::from_vec(g2),
                )
            })
    }

    proptest! {
        #[test]
        fn loglik_is_concave((x, s, g1, g2) in instance(), theta in 0.01f64..0.99) {
            let mid = &g1 * theta + &g2 * (1.0 - theta);
            let lhs = probit_loglik(&mid, &x, &s).unwrap();
            let rhs = theta * probit_loglik(&g1, &x, &s).unwrap()
                + (1.0 - theta) * probit_loglik(&g2, &x, &s).unwrap();
            prop_assert!(lhs >= rhs - 1e-9);
        }

        #[test]
        fn score_matches_finite_differences((x, s, g, _) in instance()) {
            let grad = probit_loglik_grad(&g, &x, &s).unwrap();
            let fd = crate::linalg::central_difference(|v| probit_loglik(v, &x, &s).unwrap(), &g, 1e-6);
            let err = (&grad - &fd).amax() / grad.amax().max(1.0);
            prop_assert!(err < 1e-6, "rel err {err}");
        }
    }
}
