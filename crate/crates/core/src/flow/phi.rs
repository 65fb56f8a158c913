//! `Φ(x) = ∫_{-∞}^x (4π)^{-1/2} e^{-y²/4} dy` and its inverse.
//!
//! Values near 1 lose relative precision when stored directly, so the
//! gradient checks carry the pair `(Φ(x), Φ(−x))` and invert from the
//! smaller tail.

use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

#[inline]
pub fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / 2.0)
}

/// `Φ'(x) = (4π)^{-1/2} e^{-x²/4}`.
#[inline]
pub fn phi_prime(x: f64) -> f64 {
    (-x * x / 4.0).exp() / (4.0 * std::f64::consts::PI).sqrt()
}

pub fn phi_inv(y: f64) -> Result<f64> {
    if !(y > 0.0 && y < 1.0) {
        return Err(Error::Domain(format!("Φ⁻¹ needs y in (0,1), got {y}")));
    }
    Ok(if y <= 0.5 { phi_inv_lower(y) } else { -phi_inv_lower(1.0 - y) })
}

/// `Φ⁻¹(y)` for `y ∈ (0, ½]`, polished by Newton steps.
#[inline]
fn phi_inv_lower(y: f64) -> f64 {
    let mut x = -2.0 * erfc_inv(2.0 * y);
    for _ in 0..3 {
        let d = phi_prime(x);
        if d <= 0.0 {
            break;
        }
        let step = (phi(x) - y) / d;
        x -= step;
        if step.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Inverts a value given with its complement `(u, 1 − u)`, reading whichever is
/// smaller. Returns `None` when either entry is 0.
#[inline]
pub fn phi_inv_pair(u: f64, uc: f64) -> Option<f64> {
    if !(u > 0.0 && uc > 0.0) {
        return None;
    }
    Some(if u <= uc { phi_inv_lower(u) } else { -phi_inv_lower(uc) })
}
