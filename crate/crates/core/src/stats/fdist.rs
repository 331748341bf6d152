//! Fisher–Snedecor F distribution.

use super::special::betainc;

/// P(F ≤ f) for F(d1, d2).
pub fn f_cdf(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 0.0;
    }
    if f.is_infinite() {
        return 1.0;
    }
    let x = d1 * f / (d1 * f + d2);
    betainc(d1 / 2.0, d2 / 2.0, x)
}

/// Upper tail P(F > f). Evaluated directly rather than as `1 - cdf` so tiny
/// p-values keep their precision.
pub fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    let x = d2 / (d2 + d1 * f);
    betainc(d2 / 2.0, d1 / 2.0, x).clamp(0.0, 1.0)
}
