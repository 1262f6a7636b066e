use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value cutoff below which a direction counts as null.
const RANK_TOL: f64 = 1e-10;

/// Least squares `argmin ‖xβ − y‖² + ridge·‖β‖²`.
///
/// Householder QR of the (ridge-augmented) matrix followed by an SVD of the
/// small triangular factor, so rank loss is detected instead of amplified.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>, ridge: f64) -> Result<DVector<f64>> {
    let (m, p) = x.shape();
    if y.len() != m {
        return Err(Error::ShapeMismatch {
            what: "least squares target".into(),
            expected: m,
            found: y.len(),
        });
    }
    if ridge < 0.0 || !ridge.is_finite() {
        return Err(Error::InvalidConfig(format!("ridge must be >= 0, got {ridge}")));
    }
    let (xa, ya) = if ridge > 0.0 {
        let mut xa = DMatrix::zeros(m + p, p);
        xa.view_mut((0, 0), (m, p)).copy_from(x);
        let r = ridge.sqrt();
        for j in 0..p {
            xa[(m + j, j)] = r;
        }
        let mut ya = DVector::zeros(m + p);
        ya.rows_mut(0, m).copy_from(y);
        (xa, ya)
    } else {
        (x.clone(), y.clone())
    };
    if xa.nrows() < p {
        return Err(Error::RankDeficient {
            rank: xa.nrows(),
            cols: p,
        });
    }
    let qr = xa.qr();
    let mut qty = ya;
    qr.q_tr_mul(&mut qty);
    let qty = qty.rows(0, p).into_owned();
    let r = qr.r();
    let svd = r.svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > RANK_TOL * smax)
        .count();
    if smax == 0.0 || rank < p {
        return Err(Error::RankDeficient { rank, cols: p });
    }
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let mut coef = u.transpose() * qty;
    for (c, s) in coef.iter_mut().zip(svd.singular_values.iter()) {
        *c /= s;
    }
    Ok(v_t.transpose() * coef)
}

/// Solve `a·x = b` for symmetric positive definite `a`; `None` when the
/// Cholesky factorization fails.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let chol = a.clone().cholesky()?;
    let x = chol.solve(b);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

pub fn is_positive_definite(a: &DMatrix<f64>) -> bool {
    a.clone().cholesky().is_some()
}

/// Row subset of `x` in the given order.
pub fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)])
}

pub fn select_entries(v: &DVector<f64>, rows: &[usize]) -> DVector<f64> {
    DVector::from_iterator(rows.len(), rows.iter().map(|&i| v[i]))
}

pub fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let m = x.nrows() as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / m))
}

/// Central finite-difference gradient with per-coordinate step `h·max(1, |x_j|)`.
pub fn central_difference<F>(mut f: F, x: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: FnMut(&DVector<f64>) -> f64,
{
    let mut probe = x.clone();
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|j| {
            let step = h * x[j].abs().max(1.0);
            let orig = probe[j];
            probe[j] = orig + step;
            let up = f(&probe);
            probe[j] = orig - step;
            let down = f(&probe);
            probe[j] = orig;
            (up - down) / (2.0 * step)
        }),
    )
}
