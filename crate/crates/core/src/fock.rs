//! Truncated bosonic operators on a tensor-product Fock space.
//!
//! Basis states are composed row-major in mode order `(a, b, c)`: the last
//! mode varies fastest.

use std::collections::BTreeMap;

use faer::{c64, Mat};

use crate::error::{invalid, Error, Result};
use crate::linalg::{cx, hermiticity_error, kron, unitarity_error, CMat};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FockLayout {
    dims: Vec<usize>,
}

impl FockLayout {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() {
            return Err(invalid("dims", "at least one mode is required"));
        }
        if dims.iter().any(|&d| d < 2) {
            return Err(invalid("dims", "every truncation dimension must be at least 2"));
        }
        Ok(Self { dims: dims.to_vec() })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_modes(&self) -> usize {
        self.dims.len()
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    /// Flat index of an occupation tuple, `None` if it lies outside the truncation.
    pub fn index(&self, occ: &[usize]) -> Option<usize> {
        if occ.len() != self.dims.len() {
            return None;
        }
        let mut idx = 0;
        for (&n, &d) in occ.iter().zip(&self.dims) {
            if n >= d {
                return None;
            }
            idx = idx * d + n;
        }
        Some(idx)
    }

    pub fn occupation(&self, mut idx: usize) -> Vec<usize> {
        let mut occ = vec![0; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            occ[k] = idx % self.dims[k];
            idx /= self.dims[k];
        }
        occ
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.dims.len() {
            return Err(Error::ModeOutOfRange { mode, n_modes: self.dims.len() });
        }
        Ok(())
    }

    /// Embed a single-mode operator `local` acting on `mode`.
    pub fn embed(&self, mode: usize, local: &CMat) -> Result<CMat> {
        self.check_mode(mode)?;
        assert_eq!(local.nrows(), self.dims[mode]);
        let left: usize = self.dims[..mode].iter().product();
        let right: usize = self.dims[mode + 1..].iter().product();
        let mut m = local.clone();
        if right > 1 {
            m = kron(m.as_ref(), Mat::<c64>::identity(right, right).as_ref());
        }
        if left > 1 {
            m = kron(Mat::<c64>::identity(left, left).as_ref(), m.as_ref());
        }
        Ok(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Units {
    Dimensionless,
    /// rad/ns
    AngularFrequency,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    General,
    Observable,
    Propagator,
}

#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub layout: FockLayout,
    pub matrix: CMat,
    pub units: Units,
    pub kind: OperatorKind,
}

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const UNITARY_TOL: f64 = 1e-9;

impl OperatorMatrix {
    pub fn new(layout: FockLayout, matrix: CMat, units: Units, kind: OperatorKind) -> Self {
        assert_eq!(matrix.nrows(), layout.total());
        assert_eq!(matrix.ncols(), layout.total());
        Self { layout, matrix, units, kind }
    }

    pub fn zeros(layout: &FockLayout, units: Units, kind: OperatorKind) -> Self {
        let n = layout.total();
        Self::new(layout.clone(), Mat::zeros(n, n), units, kind)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dagger(&self) -> Self {
        Self { matrix: self.matrix.adjoint().to_owned(), ..self.clone() }
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(self.matrix.as_ref())
    }

    pub fn unitarity_error(&self) -> f64 {
        unitarity_error(self.matrix.as_ref())
    }

    /// Check the invariant implied by `kind`.
    pub fn is_valid(&self) -> bool {
        match self.kind {
            OperatorKind::General => true,
            OperatorKind::Observable => self.hermiticity_error() < HERMITIAN_TOL,
            OperatorKind::Propagator => self.unitarity_error() < UNITARY_TOL,
        }
    }
}

fn ladder(d: usize) -> CMat {
    Mat::from_fn(d, d, |i, j| if j == i + 1 { cx((j as f64).sqrt(), 0.0) } else { cx(0.0, 0.0) })
}

/// Annihilation operator of `mode`, `⟨n−1|a|n⟩ = √n`.
pub fn annihilator(layout: &FockLayout, mode: usize) -> Result<OperatorMatrix> {
    layout.check_mode(mode)?;
    let m = layout.embed(mode, &ladder(layout.dims[mode]))?;
    Ok(OperatorMatrix::new(layout.clone(), m, Units::Dimensionless, OperatorKind::General))
}

/// `φ = √(s/2)(a + a†)`, `n = −i(a − a†)/√(2s)`.
pub fn quadratures(layout: &FockLayout, mode: usize, scale: f64) -> Result<(OperatorMatrix, OperatorMatrix)> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(invalid("scale", format!("must be positive, got {scale}")));
    }
    let a = annihilator(layout, mode)?.matrix;
    let n = a.nrows();
    let p = (scale / 2.0).sqrt();
    let q = 1.0 / (2.0 * scale).sqrt();
    let phi = Mat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * p);
    let num = Mat::from_fn(n, n, |i, j| (a[(i, j)] - a[(j, i)].conj()) * cx(0.0, -q));
    Ok((
        OperatorMatrix::new(layout.clone(), phi, Units::Dimensionless, OperatorKind::Observable),
        OperatorMatrix::new(layout.clone(), num, Units::Dimensionless, OperatorKind::Observable),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrigKind {
    Cos,
    Sin,
}

/// Coefficients `c_{mn}` of `a†^m a^n`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NormalOrderedSeries {
    pub terms: BTreeMap<(usize, usize), f64>,
}

impl NormalOrderedSeries {
    pub fn max_order(&self) -> usize {
        self.terms.keys().map(|&(m, n)| m + n).max().unwrap_or(0)
    }

    /// Keep only terms whose total order satisfies `keep`.
    pub fn filter_order(&self, keep: impl Fn(usize) -> bool) -> Self {
        Self { terms: self.terms.iter().filter(|(k, _)| keep(k.0 + k.1)).map(|(k, v)| (*k, *v)).collect() }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { terms: self.terms.iter().map(|(k, v)| (*k, v * s)).collect() }
    }

    /// `self + s · other`.
    pub fn add_scaled(&mut self, other: &Self, s: f64) {
        for (k, v) in &other.terms {
            *self.terms.entry(*k).or_insert(0.0) += s * v;
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Normal-ordered expansion of `cos φ` or `sin φ` with `φ = √(η/2)(a + a†)`.
pub fn normal_ordered_trig(kind: TrigKind, eta: f64, max_total_order: usize) -> Result<NormalOrderedSeries> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(invalid("eta", format!("must be positive, got {eta}")));
    }
    let g = (-eta / 4.0).exp();
    let mut terms = BTreeMap::new();
    for m in 0..=max_total_order {
        for n in 0..=(max_total_order - m) {
            let s = m + n;
            let denom = factorial(m) * factorial(n);
            match kind {
                TrigKind::Cos if s % 2 == 0 => {
                    terms.insert((m, n), g * (-eta / 2.0).powi((s / 2) as i32) / denom);
                }
                TrigKind::Sin if s % 2 == 1 => {
                    terms.insert((m, n), g * (eta / 2.0).sqrt() * (-eta / 2.0).powi(((s - 1) / 2) as i32) / denom);
                }
                _ => {}
            }
        }
    }
    Ok(NormalOrderedSeries { terms })
}

/// Argument of a materialized series.
#[derive(Clone, Debug)]
pub enum Argument<'a> {
    /// The series refers to the ladder operator of one mode.
    Mode(usize),
    /// `φ = Σ_β (u_β/√2)(β + β†)`; the series must have been generated with
    /// `η = Σ_β u_β²`, and refers to `A = Σ_β (u_β/√η) β`.
    Multimode(&'a [f64]),
}

fn monomials(series: &NormalOrderedSeries, a: &CMat) -> CMat {
    let n = a.nrows();
    let top = series.max_order();
    let mut pow_a: Vec<CMat> = vec![Mat::identity(n, n)];
    for k in 1..=top {
        pow_a.push(&pow_a[k - 1] * a);
    }
    let mut out: CMat = Mat::zeros(n, n);
    for (&(m, k), &c) in &series.terms {
        if c == 0.0 {
            continue;
        }
        let term = if m == 0 {
            pow_a[k].clone()
        } else if k == 0 {
            pow_a[m].adjoint().to_owned()
        } else {
            pow_a[m].adjoint() * &pow_a[k]
        };
        let c = cx(c, 0.0);
        for j in 0..n {
            for i in 0..n {
                out[(i, j)] += c * term[(i, j)];
            }
        }
    }
    out
}

/// Assemble `Σ c_{mn} A†^m A^n`.
///
/// Monomials are products of truncated ladder matrices, which equals the
/// exact normal-ordered monomial projected onto the truncated space.
pub fn materialize(series: &NormalOrderedSeries, layout: &FockLayout, arg: Argument<'_>) -> Result<OperatorMatrix> {
    let matrix = match arg {
        Argument::Mode(mode) => {
            layout.check_mode(mode)?;
            let local = monomials(series, &ladder(layout.dims[mode]));
            layout.embed(mode, &local)?
        }
        Argument::Multimode(u) => {
            if u.len() != layout.n_modes() {
                return Err(invalid("u", format!("expected {} coefficients, got {}", layout.n_modes(), u.len())));
            }
            let eta: f64 = u.iter().map(|x| x * x).sum();
            if !(eta > 0.0) {
                return Err(invalid("u", "all coefficients are zero"));
            }
            let n = layout.total();
            let mut a: CMat = Mat::zeros(n, n);
            for (beta, &ub) in u.iter().enumerate() {
                if ub == 0.0 {
                    continue;
                }
                let op = annihilator(layout, beta)?.matrix;
                let s = cx(ub / eta.sqrt(), 0.0);
                for j in 0..n {
                    for i in 0..n {
                        a[(i, j)] += s * op[(i, j)];
                    }
                }
            }
            monomials(series, &a)
        }
    };
    Ok(OperatorMatrix::new(layout.clone(), matrix, Units::Dimensionless, OperatorKind::General))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator, eigh, max_abs_diff};

    #[test]
    fn two_level_ladder() {
        let l = FockLayout::new(&[2]).unwrap();
        let a = annihilator(&l, 0).unwrap().matrix;
        assert_eq!(a[(0, 1)], cx(1.0, 0.0));
        assert_eq!(a[(1, 0)], cx(0.0, 0.0));
        assert_eq!(a[(0, 0)], cx(0.0, 0.0));
    }

    #[test]
    fn tensor_embedding_second_mode() {
        let l = FockLayout::new(&[3, 3]).unwrap();
        let a = annihilator(&l, 1).unwrap().matrix;
        let a3 = ladder(3);
        let expected = kron(Mat::<c64>::identity(3, 3).as_ref(), a3.as_ref());
        assert_eq!(max_abs_diff(a.as_ref(), expected.as_ref()), 0.0);
        assert!((a3[(1, 2)].re - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn commutator_identity_below_top_level() {
        let l = FockLayout::new(&[5]).unwrap();
        let a = annihilator(&l, 0).unwrap().matrix;
        let ad = a.adjoint().to_owned();
        let c = commutator(a.as_ref(), ad.as_ref());
        for i in 0..5 {
            for j in 0..5 {
                let expect = if i == j && i < 4 { 1.0 } else if i == j { -4.0 } else { 0.0 };
                assert!((c[(i, j)] - cx(expect, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn mode_out_of_range() {
        let l = FockLayout::new(&[3, 3]).unwrap();
        assert!(matches!(annihilator(&l, 2), Err(Error::ModeOutOfRange { .. })));
        assert!(FockLayout::new(&[3, 1]).is_err());
    }

    #[test]
    fn quadrature_unit_scale_two_level() {
        let l = FockLayout::new(&[2]).unwrap();
        let (phi, n) = quadratures(&l, 0, 1.0).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((phi.matrix[(0, 1)] - cx(s, 0.0)).norm() < 1e-15);
        assert!((phi.matrix[(1, 0)] - cx(s, 0.0)).norm() < 1e-15);
        assert!(phi.is_valid() && n.is_valid());
        assert!(quadratures(&l, 0, 0.0).is_err());
    }

    #[test]
    fn canonical_commutator_away_from_edge() {
        let l = FockLayout::new(&[8]).unwrap();
        let (phi, n) = quadratures(&l, 0, 0.37).unwrap();
        let c = commutator(phi.matrix.as_ref(), n.matrix.as_ref());
        for i in 0..7 {
            for j in 0..7 {
                let expect = if i == j { cx(0.0, 1.0) } else { cx(0.0, 0.0) };
                assert!((c[(i, j)] - expect).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn trig_leading_terms() {
        let eta = 0.3;
        let c = normal_ordered_trig(TrigKind::Cos, eta, 0).unwrap();
        assert_eq!(c.terms.len(), 1);
        assert!((c.terms[&(0, 0)] - (-eta / 4.0f64).exp()).abs() < 1e-16);
        let s = normal_ordered_trig(TrigKind::Sin, eta, 1).unwrap();
        let v = (-eta / 4.0f64).exp() * (eta / 2.0f64).sqrt();
        assert_eq!(s.terms.len(), 2);
        assert!((s.terms[&(1, 0)] - v).abs() < 1e-16);
        assert!((s.terms[&(0, 1)] - v).abs() < 1e-16);
    }

    // Oracle: the projection of the exact cos/sin of φ onto the first `d`
    // levels, evaluated by eigendecomposition of φ in a much larger space.
    fn projected_trig(kind: TrigKind, eta: f64, d: usize, big: usize) -> CMat {
        let l = FockLayout::new(&[big]).unwrap();
        let (phi, _) = quadratures(&l, 0, eta).unwrap();
        let (vals, v) = eigh(phi.matrix.as_ref());
        let f: Vec<f64> = vals.iter().map(|&x| if kind == TrigKind::Cos { x.cos() } else { x.sin() }).collect();
        let scaled = Mat::from_fn(big, big, |i, j| v[(i, j)] * f[j]);
        let full = &scaled * v.adjoint();
        Mat::from_fn(d, d, |i, j| full[(i, j)])
    }

    #[test]
    fn materialized_cosine_matches_projected_matrix_function() {
        let l = FockLayout::new(&[8]).unwrap();
        // The order-14 remainder grows as η⁷; at η = 0.5 it reaches ~1.1e-8.
        for &(eta, tol) in &[(0.1, 1e-11), (0.3, 1e-9), (0.45, 1e-8), (0.5, 1.2e-8)] {
            for kind in [TrigKind::Cos, TrigKind::Sin] {
                let order = if kind == TrigKind::Cos { 12 } else { 13 };
                let s = normal_ordered_trig(kind, eta, order).unwrap();
                let m = materialize(&s, &l, Argument::Mode(0)).unwrap();
                let oracle = projected_trig(kind, eta, 8, 80);
                let err = max_abs_diff(m.matrix.as_ref(), oracle.as_ref());
                assert!(err < tol, "{kind:?} eta={eta}: {err}");
            }
        }
    }

    #[test]
    fn materialize_trivial_tables() {
        let l = FockLayout::new(&[3, 2]).unwrap();
        let empty = NormalOrderedSeries::default();
        let z = materialize(&empty, &l, Argument::Mode(0)).unwrap();
        assert_eq!(crate::linalg::max_abs(z.matrix.as_ref()), 0.0);
        let mut num = NormalOrderedSeries::default();
        num.terms.insert((1, 1), 1.0);
        let nm = materialize(&num, &l, Argument::Mode(0)).unwrap().matrix;
        for i in 0..6 {
            let occ = l.occupation(i);
            assert!((nm[(i, i)] - cx(occ[0] as f64, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn multimode_single_component_matches_mode() {
        let l = FockLayout::new(&[4, 3]).unwrap();
        let s = normal_ordered_trig(TrigKind::Cos, 0.2, 4).unwrap();
        let a = materialize(&s, &l, Argument::Mode(1)).unwrap();
        let u = [0.0, 0.2f64.sqrt()];
        let b = materialize(&s, &l, Argument::Multimode(&u)).unwrap();
        assert!(max_abs_diff(a.matrix.as_ref(), b.matrix.as_ref()) < 1e-14);
    }

    #[test]
    fn index_roundtrip() {
        let l = FockLayout::new(&[3, 4, 5]).unwrap();
        for i in 0..l.total() {
            assert_eq!(l.index(&l.occupation(i)), Some(i));
        }
        assert_eq!(l.index(&[1, 0, 0]), Some(20));
        assert_eq!(l.index(&[3, 0, 0]), None);
    }
}
