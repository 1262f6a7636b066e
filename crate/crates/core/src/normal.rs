//! Standard normal density, distribution and hazard functions with stable tails.

use libm::erfc;
use statrs::function::erf::erfc_inv;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

/// Below this point `Φ(t)` is evaluated through the Mills-ratio continued fraction.
const LOWER_TAIL: f64 = -8.0;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

pub fn pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
}

pub fn ln_pdf(t: f64) -> f64 {
    -0.5 * t * t - LN_SQRT_2PI
}

pub fn cdf(t: f64) -> f64 {
    0.5 * erfc(-t * FRAC_1_SQRT_2)
}

/// `log Φ(t)`, finite for every finite `t`.
pub fn ln_cdf(t: f64) -> f64 {
    if t < LOWER_TAIL {
        ln_pdf(t) + mills_ratio(-t).ln()
    } else if t > 0.0 {
        (-0.5 * erfc(t * FRAC_1_SQRT_2)).ln_1p()
    } else {
        cdf(t).ln()
    }
}

/// Mills ratio `R(x) = (1 - Φ(x)) / φ(x)` for `x >= 0`.
///
/// Large arguments use the Laplace continued fraction
/// `R(x) = 1 / (x + 1 / (x + 2 / (x + 3 / (x + ...))))`, evaluated with the
/// modified Lentz scheme; it converges quickly once `x` is past a few units.
pub fn mills_ratio(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < -LOWER_TAIL {
        return 0.5 * erfc(x * FRAC_1_SQRT_2) / pdf(x);
    }
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = f;
    let mut d = 0.0;
    for j in 1..500 {
        let a = j as f64;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        d = 1.0 / d;
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// Inverse Mills ratio `φ(t) / Φ(t)`, the hazard of `-t`.
///
/// For `t < -8` this is `1 / R(-t)`, which stays finite and accurate where
/// both `φ(t)` and `Φ(t)` underflow.
pub fn inverse_mills(t: f64) -> f64 {
    if t < LOWER_TAIL {
        1.0 / mills_ratio(-t)
    } else {
        pdf(t) / cdf(t)
    }
}

/// Standard normal quantile `Φ⁻¹(p)` for `p ∈ (0, 1)`.
pub fn quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}
