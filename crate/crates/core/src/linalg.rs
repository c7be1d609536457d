//! Dense complex matrix helpers on top of faer.

use faer::{c64, Mat, MatRef, Side};

pub type CMat = Mat<c64>;

#[inline]
pub fn cx(re: f64, im: f64) -> c64 {
    c64::new(re, im)
}

pub fn zeros(n: usize) -> CMat {
    Mat::zeros(n, n)
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

pub fn adjoint(a: MatRef<'_, c64>) -> CMat {
    a.adjoint().to_owned()
}

pub fn max_abs(a: MatRef<'_, c64>) -> f64 {
    let mut m = 0.0_f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn max_abs_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let mut m = 0.0_f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

/// `max |A − A†|`.
pub fn hermiticity_error(a: MatRef<'_, c64>) -> f64 {
    let n = a.nrows();
    let mut m = 0.0_f64;
    for j in 0..n {
        for i in 0..=j {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

/// `max |U†U − I|`.
pub fn unitarity_error(u: MatRef<'_, c64>) -> f64 {
    let g = u.adjoint() * u;
    let n = g.nrows();
    let mut m = 0.0_f64;
    for j in 0..n {
        for i in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            m = m.max((g[(i, j)] - cx(target, 0.0)).norm());
        }
    }
    m
}

pub fn commutator(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> CMat {
    a * b - b * a
}

/// `dst += s · src`.
pub fn axpy(dst: &mut CMat, s: c64, src: MatRef<'_, c64>) {
    assert_eq!(dst.shape(), src.shape());
    for j in 0..src.ncols() {
        for i in 0..src.nrows() {
            dst[(i, j)] += s * src[(i, j)];
        }
    }
}

pub fn scaled(a: MatRef<'_, c64>, s: c64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| s * a[(i, j)])
}

/// Replace `a` by `(a + a†)/2`.
pub fn symmetrize(a: &mut CMat) {
    let n = a.nrows();
    for j in 0..n {
        for i in 0..j {
            let v = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = v;
            a[(j, i)] = v.conj();
        }
        a[(j, j)] = cx(a[(j, j)].re, 0.0);
    }
}

pub fn kron(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> CMat {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    Mat::from_fn(ra * rb, ca * cb, |i, j| a[(i / rb, j / cb)] * b[(i % rb, j % cb)])
}

/// Hermitian eigendecomposition, eigenvalues ascending, eigenvectors in columns.
pub fn eigh(a: MatRef<'_, c64>) -> (Vec<f64>, CMat) {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .expect("hermitian eigendecomposition failed to converge");
    let s = evd.S();
    let vals = (0..a.nrows()).map(|i| s[i].re).collect();
    (vals, evd.U().to_owned())
}

/// Real symmetric eigendecomposition, eigenvalues ascending.
pub fn eigh_real(a: MatRef<'_, f64>) -> (Vec<f64>, Mat<f64>) {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .expect("symmetric eigendecomposition failed to converge");
    let s = evd.S();
    let vals = (0..a.nrows()).map(|i| s[i]).collect();
    (vals, evd.U().to_owned())
}

/// `exp(−i K)` for Hermitian `K`.
pub fn expm_minus_i(k: MatRef<'_, c64>) -> CMat {
    let (vals, v) = eigh(k);
    let phases: Vec<c64> = vals.iter().map(|&l| cx(l.cos(), -l.sin())).collect();
    let scaled = Mat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * phases[j]);
    &scaled * v.adjoint()
}

/// Eigendecomposition of a unitary matrix with orthonormal eigenvectors.
///
/// The general eigensolver returns vectors that are only approximately
/// orthogonal inside near-degenerate clusters; a symmetric (Löwdin)
/// orthonormalization restores an exact unitary basis with the smallest
/// possible change, and the eigenvalues are re-read from the diagonal of
/// `Z† U Z`.
pub fn eig_unitary(u: MatRef<'_, c64>) -> (Vec<c64>, CMat) {
    let n = u.nrows();
    let evd = u.eigen().expect("eigendecomposition of unitary failed");
    let z = evd.U().to_owned();
    let gram = z.adjoint() * &z;
    let (g_vals, g_vecs) = eigh(gram.as_ref());
    let inv_sqrt: Vec<f64> = g_vals.iter().map(|&l| 1.0 / l.max(1e-300).sqrt()).collect();
    let scaled = Mat::from_fn(n, n, |i, j| g_vecs[(i, j)] * inv_sqrt[j]);
    let g_inv_sqrt = &scaled * g_vecs.adjoint();
    let z = &z * &g_inv_sqrt;
    let d = z.adjoint() * (u * &z);
    let vals = (0..n)
        .map(|i| {
            let l = d[(i, i)];
            l / l.norm()
        })
        .collect();
    (vals, z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn herm(n: usize, seed: u64) -> CMat {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut a = Mat::from_fn(n, n, |_, _| cx(next(), next()));
        symmetrize(&mut a);
        a
    }

    #[test]
    fn expm_of_diagonal() {
        let k = Mat::from_fn(3, 3, |i, j| if i == j { cx(i as f64, 0.0) } else { cx(0.0, 0.0) });
        let e = expm_minus_i(k.as_ref());
        for i in 0..3 {
            let z = e[(i, i)];
            assert!((z - cx((i as f64).cos(), -(i as f64).sin())).norm() < 1e-14);
        }
    }

    #[test]
    fn expm_is_unitary_and_matches_taylor() {
        let k = herm(12, 7);
        let e = expm_minus_i(scaled(k.as_ref(), cx(0.3, 0.0)).as_ref());
        assert!(unitarity_error(e.as_ref()) < 1e-13);
        let mut taylor = identity(12);
        let mut term = identity(12);
        for p in 1..40 {
            term = scaled((&term * &k).as_ref(), cx(0.0, -0.3 / p as f64));
            taylor = &taylor + &term;
        }
        assert!(max_abs_diff(e.as_ref(), taylor.as_ref()) < 1e-12);
    }

    #[test]
    fn unitary_eigendecomposition_with_degeneracy() {
        // U = V diag(1, 1, i, −1, −1) V†, exact degeneracies.
        let (_, v) = eigh(herm(5, 3).as_ref());
        let lam = [cx(1.0, 0.0), cx(1.0, 0.0), cx(0.0, 1.0), cx(-1.0, 0.0), cx(-1.0, 0.0)];
        let dv = Mat::from_fn(5, 5, |i, j| v[(i, j)] * lam[j]);
        let u = &dv * v.adjoint();
        let (vals, z) = eig_unitary(u.as_ref());
        assert!(unitarity_error(z.as_ref()) < 1e-12);
        let uz = &u * &z;
        for j in 0..5 {
            for i in 0..5 {
                assert!((uz[(i, j)] - z[(i, j)] * vals[j]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn kron_shapes() {
        let a = identity(2);
        let b = Mat::from_fn(3, 3, |i, j| cx((i * 3 + j) as f64, 0.0));
        let k = kron(a.as_ref(), b.as_ref());
        assert_eq!(k.shape(), (6, 6));
        assert_eq!(k[(4, 5)], b[(1, 2)]);
        assert_eq!(k[(1, 4)], cx(0.0, 0.0));
    }
}
