//! Bessel functions of the first kind and small scalar solvers.

/// `J_n(x)` for integer order, via Miller's downward recurrence normalized by
/// `J_0 + 2 Σ J_2k = 1`.
pub fn bessel_j(n: i32, x: f64) -> f64 {
    if n < 0 {
        let v = bessel_j(-n, x);
        return if n % 2 == 0 { v } else { -v };
    }
    if x < 0.0 {
        let v = bessel_j(n, -x);
        return if n % 2 == 0 { v } else { -v };
    }
    let n = n as usize;
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let top = n.max(x as usize);
    let mut m = top + 20 + (40.0 * (top as f64).max(1.0)).sqrt() as usize;
    m += m % 2;
    let two_over_x = 2.0 / x;
    let (mut jp, mut j) = (0.0_f64, 1e-300_f64);
    let mut ans = 0.0;
    let mut norm = 0.0;
    for k in (1..=m).rev() {
        let jm = k as f64 * two_over_x * j - jp;
        jp = j;
        j = jm;
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp *= 1e-250;
            ans *= 1e-250;
            norm *= 1e-250;
        }
        if k - 1 == n {
            ans = j;
        }
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * j;
        }
    }
    norm += j;
    ans / norm
}

#[inline]
pub fn j0(x: f64) -> f64 {
    bessel_j(0, x)
}

#[inline]
pub fn j1(x: f64) -> f64 {
    bessel_j(1, x)
}

#[inline]
pub fn j2(x: f64) -> f64 {
    bessel_j(2, x)
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Option<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() || !flo.is_finite() || !fhi.is_finite() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo <= tol {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Result of a bracketed scalar minimization.
#[derive(Clone, Copy, Debug)]
pub struct Minimum {
    pub x: f64,
    pub fx: f64,
    pub evaluations: usize,
}

/// Brent minimization on `[a, b]`: golden-section steps with parabolic
/// interpolation when it is safe.
pub fn brent_min<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> Minimum {
    const CGOLD: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = if a < b { (a, b) } else { (b, a) };
    let mut x = a + CGOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    let mut evals = 1;
    for _ in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = tol + 1e-12 * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        evals += 1;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Minimum { x, fx, evaluations: evals }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // Bessel integral J_n(x) = (1/π)∫_0^π cos(nτ − x sin τ) dτ; the trapezoid
    // rule over the full period is spectrally accurate.
    fn bessel_integral(n: i32, x: f64) -> f64 {
        let m = 4096;
        let h = 2.0 * PI / m as f64;
        (0..m)
            .map(|k| {
                let t = k as f64 * h;
                (n as f64 * t - x * t.sin()).cos()
            })
            .sum::<f64>()
            * h
            / (2.0 * PI)
    }

    #[test]
    fn bessel_matches_integral_representation() {
        for n in 0..6 {
            for &x in &[1e-6, 0.004, 0.1, 0.5, 1.0, 1.841, 3.0, 7.5, 15.0, 30.0] {
                let a = bessel_j(n, x);
                let b = bessel_integral(n, x);
                assert!((a - b).abs() < 1e-13, "n={n} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn bessel_reference_values() {
        assert!((j0(1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((j1(1.0) - 0.440_050_585_744_933_5).abs() < 1e-15);
        assert!((j1(-1.0) + 0.440_050_585_744_933_5).abs() < 1e-15);
        assert!((bessel_j(-1, 1.0) + j1(1.0)).abs() < 1e-15);
        assert!((j2(2.0) - 0.352_834_028_615_637_7).abs() < 1e-15);
        assert_eq!(j0(0.0), 1.0);
        assert_eq!(j2(0.0), 0.0);
    }

    #[test]
    fn brent_finds_parabola_minimum() {
        let m = brent_min(|x| (x - 0.3).powi(2) + 1.0, -1.0, 2.0, 1e-10, 200);
        assert!((m.x - 0.3).abs() < 1e-8);
        assert!(m.evaluations < 40, "{}", m.evaluations);
    }

    #[test]
    fn brent_finds_j1_peak() {
        let m = brent_min(|x| -j1(x), 0.5, 3.0, 1e-12, 200);
        assert!((m.x - 1.841_183_781_340_659).abs() < 1e-6);
    }

    #[test]
    fn bisect_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect(|x| x * x + 1.0, 0.0, 2.0, 1e-14).is_none());
    }
}
