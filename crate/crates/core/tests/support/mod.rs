//! Strategies and property checks shared by the property suite and the
//! acceptance run.
#![allow(dead_code)]

use paragate::circuit::*;
use paragate::floquet::*;
use paragate::fock::FockLayout;
use paragate::linalg::{hermiticity_error, identity, max_abs, max_abs_diff, unitarity_error};
use paragate::normal_modes::{normal_mode_transform, QuadraticForm};
use paragate::reports::{gate_amplitude, number_probe, two_tone_spectrum};
use paragate::units::{fold, TWO_PI};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub type Check = std::result::Result<(), TestCaseError>;

pub fn cases() -> ProptestConfig {
    ProptestConfig { cases: 100, ..ProptestConfig::default() }
}

pub fn toy() -> impl Strategy<Value = ToyParams> {
    (3.8..4.2f64, 5.0..5.6f64, 4.3..4.9f64, -0.25..-0.1f64, -0.25..-0.1f64, 0.05..0.3f64, -0.06..0.06f64, 0.0..0.4f64).prop_map(
        |(wa, wb, wc, aa, ab, ac, g, delta)| ToyParams {
            omega_a: wa,
            omega_b: wb,
            omega_c: wc,
            alpha_a: aa,
            alpha_b: ab,
            alpha_c: ac,
            g_ab: 0.0,
            g_bc: g,
            g_ca: 0.05,
            delta,
        },
    )
}

pub fn drive_frequency() -> impl Strategy<Value = f64> {
    0.8..2.0f64
}

/// `(φ̄/2π, δφ/2π, t, coupler capacitance scale)`
pub fn circuit_point() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (0.05..0.48f64, 0.0..0.04f64, 0.0..1.0f64, 0.9..1.1f64)
}

pub fn quadratic_form() -> impl Strategy<Value = QuadraticForm> {
    (prop::array::uniform3(0.5..3.0f64), prop::array::uniform3(-0.2..0.2f64), prop::array::uniform3(5.0..30.0f64)).prop_map(
        |(d, off, b)| QuadraticForm { a: [[d[0], off[0], off[1]], [off[0], d[1], off[2]], [off[1], off[2], d[2]]], b },
    )
}

pub fn small_toy(toy: &ToyParams) -> (HarmonicHamiltonian, StaticReference) {
    let layout = FockLayout::new(&[3, 3, 3]).unwrap();
    let h = build_toy_hamiltonian(toy, &layout).unwrap();
    let r = static_eigensolve(&h.static_part).unwrap();
    (h, r)
}

pub fn opts() -> PropagatorOptions {
    PropagatorOptions { tol: 1e-9, ..PropagatorOptions::default() }
}

fn label(s: &str) -> Label {
    s.parse().unwrap()
}

fn fail(msg: String) -> Check {
    Err(TestCaseError::fail(msg))
}

pub fn unitarity(toy: &ToyParams, wd: f64) -> Check {
    let (h, _) = small_toy(toy);
    let p = propagate_one_period(&h, wd, &opts()).unwrap();
    let e = unitarity_error(p.u.as_ref());
    if e > 1e-9 {
        return fail(format!("unitarity error {e:e}"));
    }
    Ok(())
}

pub fn hermiticity(&(x, d, t, scale): &(f64, f64, f64, f64)) -> Check {
    let mut params = CircuitParams::reference_device();
    params.c_c *= scale;
    let drive = DriveSpec::new(x * TWO_PI, d * TWO_PI, 1.0);
    let layout = FockLayout::new(&[3, 3, 3]).unwrap();
    let h = build_circuit_hamiltonian(&params, &drive, &layout).unwrap();
    let m = h.at(t, TWO_PI);
    let e = hermiticity_error(m.as_ref()) / max_abs(m.as_ref()).max(1.0);
    if e > 1e-12 {
        return fail(format!("relative Hermiticity error {e:e}"));
    }
    Ok(())
}

pub fn canonical(q: &QuadraticForm) -> Check {
    let nm = normal_mode_transform(q).unwrap();
    let e = nm.canonicity_error();
    if e > 1e-10 {
        return fail(format!("|u vᵀ − I| = {e:e}"));
    }
    Ok(())
}

/// Quasienergies lie in `[−ω_d/2, ω_d/2)`, folding is idempotent modulo
/// `ω_d`, and a constant shift `c` moves the spectrum by `fold(c)`.
pub fn fold_invariance(toy: &ToyParams, wd: f64, k: i64, c: f64) -> Check {
    let (h, r) = small_toy(toy);
    let s = floquet_solve(&h, wd, &r, &opts(), 0.5).unwrap();
    for &e in &s.quasienergies {
        if !(-0.5 * wd..0.5 * wd).contains(&e) {
            return fail(format!("{e} outside the zone of width {wd}"));
        }
        if (fold(e + k as f64 * wd, wd) - e).abs() > 1e-9 {
            return fail(format!("fold({e} + {k}ω_d) ≠ {e}"));
        }
    }
    let shifted = floquet_solve(&h.shifted(TWO_PI * c), wd, &r, &opts(), 0.5).unwrap();
    let mut a: Vec<f64> = s.quasienergies.iter().map(|&e| fold(e + c, wd)).collect();
    let mut b = shifted.quasienergies.clone();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    // Sorting can split a pair straddling the zone edge; compare cyclically.
    let n = a.len();
    let best = (0..n)
        .map(|off| (0..n).map(|i| fold(a[i] - b[(i + off) % n], wd).abs()).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min);
    if best > 1e-7 {
        return fail(format!("shifted spectrum differs by {best:e}"));
    }
    Ok(())
}

/// Adjacent photon sidebands are spaced by exactly ω_d, and `|X_αβk| = |X_βα,−k|`.
pub fn spectroscopy_ladder(toy: &ToyParams, wd: f64) -> Check {
    let (h, r) = small_toy(toy);
    let s = floquet_solve(&h, wd, &r, &opts().with_grid(), 0.0).unwrap();
    let probe = number_probe(&h.layout, 0).unwrap();
    let labels = ["000", "100", "010", "001"].map(label);
    let pts = two_tone_spectrum(&s, &probe, &labels, -4..=4).unwrap();
    let find = |a: &Label, b: &Label, k: i64| pts.iter().find(|p| &p.alpha == a && &p.beta == b && p.k == k).unwrap();
    for p in &pts {
        if p.k < 4 {
            let next = find(&p.alpha, &p.beta, p.k + 1);
            let e = (next.delta - p.delta - wd).abs();
            if e > 1e-12 * (1.0 + p.delta.abs()) {
                return fail(format!("ladder spacing off by {e:e}"));
            }
        }
        let mirror = find(&p.beta, &p.alpha, -p.k);
        if (mirror.weight - p.weight).abs() > 1e-10 || (mirror.delta + p.delta).abs() > 1e-10 {
            return fail(format!("{}→{} k={} is not mirrored", p.alpha, p.beta, p.k));
        }
    }
    Ok(())
}

pub fn gate_rate_offset(toy: &ToyParams, c: f64) -> Check {
    let (h, r) = small_toy(toy);
    let (l1, l2) = (label("100"), label("010"));
    let wd = (r.energy(&l1).unwrap() - r.energy(&l2).unwrap()).abs();
    let a = floquet_solve(&h, wd, &r, &opts(), 0.0).unwrap();
    let hs = h.shifted(TWO_PI * c);
    let rs = static_eigensolve(&hs.static_part).unwrap();
    let b = floquet_solve(&hs, wd, &rs, &opts(), 0.0).unwrap();
    let ja = gate_amplitude(&a, &r, (&l1, &l2)).unwrap();
    let jb = gate_amplitude(&b, &rs, (&l1, &l2)).unwrap();
    if (ja - jb).abs() > 1e-8 {
        return fail(format!("J changed from {ja} to {jb} under a shift of {c}"));
    }
    Ok(())
}

pub fn grid_composition(toy: &ToyParams, wd: f64) -> Check {
    let (h, _) = small_toy(toy);
    let p = propagate_one_period(&h, wd, &opts().with_grid()).unwrap();
    let grid = p.grid.as_ref().unwrap();
    let mut u = identity(p.u.nrows());
    for w in grid.windows(2) {
        u = (&w[1] * w[0].adjoint()) * &u;
    }
    let e = max_abs_diff(u.as_ref(), p.u.as_ref());
    if e > 1e-9 {
        return fail(format!("segment product differs by {e:e}"));
    }
    Ok(())
}

pub fn overlaps_bounded(toy: &ToyParams, wd: f64) -> Check {
    let (h, r) = small_toy(toy);
    let s = floquet_solve(&h, wd, &r, &opts(), 0.5).unwrap();
    let p = s.pair_modes(&r, &label("100"), &label("010")).unwrap();
    let all = s.labels.values().map(|a| a.overlap).chain(p.weights).chain(p.mixing);
    for w in all {
        if !(0.0..=1.0 + 1e-12).contains(&w) {
            return fail(format!("overlap {w} outside [0, 1]"));
        }
    }
    Ok(())
}
