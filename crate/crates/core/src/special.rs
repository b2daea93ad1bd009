//! Unit-ball volumes.

use crate::error::{domain, Result};
use crate::scalar::Real;

/// `ω_s = π^{s/2} / Γ(s/2 + 1)`, the volume of the unit ball in R^s for
/// integer `s`.
///
/// Integer dimensions up to 3 are returned from their closed forms so that
/// flat sets meet the density bound with exact equality.
pub fn omega<T: Real>(s: T) -> Result<T> {
    if !(s >= T::zero() && s.is_finite()) {
        return domain(format!("omega needs a finite s >= 0, got {s}"));
    }
    let v = s.as_f64();
    let out = if v == 0.0 {
        1.0
    } else if v == 1.0 {
        2.0
    } else if v == 2.0 {
        std::f64::consts::PI
    } else if v == 3.0 {
        4.0 * std::f64::consts::PI / 3.0
    } else {
        std::f64::consts::PI.powf(v / 2.0) / libm::tgamma(v / 2.0 + 1.0)
    };
    Ok(T::of(out))
}

/// `log 2 / log 3`, the dimension of the middle-thirds Cantor set.
pub const CANTOR_DIMENSION: f64 = std::f64::consts::LN_2 / 1.098_612_288_668_109_8;
