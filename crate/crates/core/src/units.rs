//! Unit conventions.
//!
//! Matrices carry angular frequencies in rad/ns. Every value that crosses the
//! library boundary (config, CSV, report structs) is an ordinary frequency in
//! GHz, i.e. the angular value divided by 2π.

use std::f64::consts::PI;

pub const TWO_PI: f64 = 2.0 * PI;

/// Elementary charge, C.
pub const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;
/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// One femtofarad in farad.
pub const FEMTOFARAD: f64 = 1e-15;

/// GHz → rad/ns.
#[inline]
pub fn ang(f_ghz: f64) -> f64 {
    TWO_PI * f_ghz
}

/// rad/ns → GHz.
#[inline]
pub fn ghz(w: f64) -> f64 {
    w / TWO_PI
}

/// Fold `x` into `[-w/2, w/2)`.
#[inline]
pub fn fold(x: f64, w: f64) -> f64 {
    let y = (x + 0.5 * w).rem_euclid(w) - 0.5 * w;
    if y >= 0.5 * w {
        y - w
    } else {
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_range_and_periodicity() {
        let w = 1.7;
        for k in -5..5 {
            for &x in &[-0.84, -0.3, 0.0, 0.2, 0.8499] {
                let f = fold(x + k as f64 * w, w);
                assert!((-0.5 * w..0.5 * w).contains(&f));
                assert!((f - x).abs() < 1e-12);
            }
        }
        assert_eq!(fold(0.85, w), -0.85);
    }
}
