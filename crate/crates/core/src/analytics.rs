//! Closed-form first- and second-order rotating-wave couplings.
//!
//! All frequencies and couplings in GHz. Hybridization matrices are indexed
//! `u[bare][normal]`.

use serde::{Deserialize, Serialize};

use crate::circuit::{bare_modes, BuildOptions, CircuitParams, DriveSpec, ToyParams};
use crate::error::{Error, Result};
use crate::normal_modes::{drive_dependent_basis, NormalModeBasis};
use crate::special::{bessel_j, bisect, j0, j1};

/// Bookkeeping order parameter of the perturbative expansion.
pub const LAMBDA: f64 = 1.0;

/// Default resonance tolerance for second-order denominators, 1 MHz.
pub const DEN_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCouplings {
    pub j_ab: f64,
    pub alpha: [f64; 3],
    pub chi_ab: f64,
    pub chi_bc: f64,
    pub chi_ca: f64,
    /// `J_{ab;a}, J_{ab;b}, J_{ab;c}`.
    pub j_ab_cond: [f64; 3],
    pub k_ab: f64,
    pub order: u8,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CrossResonanceCouplings {
    pub omega_a: f64,
    pub omega_aa: f64,
    pub omega_ab: f64,
    pub omega_ac: f64,
}

/// Second-order static/dynamical cross-Kerr corrections.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderChi {
    /// Normal-mode starting point, including the `O(δ)` dynamical term.
    pub chi_bare_start: f64,
    /// Anharmonicity-dressed denominators, static.
    pub chi_dressed_start: f64,
    /// Smallest denominator magnitude encountered.
    pub min_denominator: f64,
    pub divergent: bool,
}

fn chi_first(u: &[[f64; 3]; 3], al: &[f64; 3], j: usize, k: usize) -> f64 {
    (0..3).map(|i| 2.0 * u[i][j].powi(2) * u[i][k].powi(2) * al[i]).sum()
}

pub fn toy_first_order(basis: &NormalModeBasis, toy: &ToyParams) -> EffectiveCouplings {
    let u = &basis.u;
    let al = toy.anharmonicities();
    let alpha = [0, 1, 2].map(|j| (0..3).map(|i| u[i][j].powi(4) * al[i]).sum());
    EffectiveCouplings {
        j_ab: u[2][0] * u[2][1] * toy.delta / 2.0,
        alpha,
        chi_ab: chi_first(u, &al, 0, 1),
        chi_bc: chi_first(u, &al, 1, 2),
        chi_ca: chi_first(u, &al, 2, 0),
        j_ab_cond: [0.0; 3],
        k_ab: 0.0,
        order: 1,
    }
}

/// Second-order cross-Kerr between the two qubits of the toy model, in both
/// flavors. Resonant denominators below `den_tol` set the divergence flag.
pub fn toy_second_order_chi(basis: &NormalModeBasis, toy: &ToyParams, den_tol: f64) -> SecondOrderChi {
    let u = &basis.u;
    let al = toy.anharmonicities();
    let [wa, wb, wc] = basis.frequencies;
    let s = |f: &dyn Fn(usize) -> f64| -> f64 { (0..3).map(|j| f(j) * al[j]).sum() };
    let (a, b, c) = (0usize, 1usize, 2usize);
    let n_a = s(&|j| u[j][a].powi(2) * u[j][b] * u[j][c]);
    let n_b = s(&|j| u[j][a] * u[j][b].powi(2) * u[j][c]);
    let n_c = s(&|j| u[j][a] * u[j][b] * u[j][c].powi(2));
    let n_d = s(&|j| u[j][a].powi(3) * u[j][b]);
    let n_e = s(&|j| u[j][a] * u[j][b].powi(3));
    let dyn_num = s(&|j| u[j][a] * u[j][b] * (u[j][a].powi(2) - u[j][b].powi(2)));

    let bare_dens = [wb - wc, wa - wc, wa + wb - 2.0 * wc, wa - wb, wa - wb];
    let dressed_dens = [
        wb - wc + s(&|j| 2.0 * u[j][a].powi(2) * (u[j][b].powi(2) - u[j][c].powi(2))),
        wa - wc + s(&|j| 2.0 * u[j][b].powi(2) * (u[j][a].powi(2) - u[j][c].powi(2))),
        wa + wb - 2.0 * wc + s(&|j| 2.0 * u[j][a].powi(2) * u[j][b].powi(2) - u[j][c].powi(4)),
        wa - wb + s(&|j| u[j][a].powi(4) - 2.0 * u[j][a].powi(2) * u[j][b].powi(2)),
        wa - wb + s(&|j| 2.0 * u[j][a].powi(2) * u[j][b].powi(2) - u[j][b].powi(4)),
    ];
    let nums = [4.0 * n_a * n_a, 4.0 * n_b * n_b, 2.0 * n_c * n_c, -2.0 * n_d * n_d, 2.0 * n_e * n_e];
    let chi_bare: f64 = nums.iter().zip(&bare_dens).map(|(n, d)| n / d).sum::<f64>()
        + u[c][a] * u[c][b] * dyn_num / (wa - wb) * toy.delta;
    let chi_dressed: f64 = nums.iter().zip(&dressed_dens).map(|(n, d)| n / d).sum();
    let min_den = bare_dens.iter().chain(&dressed_dens).fold(f64::INFINITY, |m, d| m.min(d.abs()));
    SecondOrderChi {
        chi_bare_start: chi_bare,
        chi_dressed_start: chi_dressed,
        min_denominator: min_den,
        divergent: min_den < den_tol,
    }
}

/// Gate rate with the leading Bessel corrections from the drive-dressed
/// starting point; `omega_d` in GHz.
pub fn toy_bessel_gate_rate(basis: &NormalModeBasis, toy: &ToyParams, omega_d: f64) -> f64 {
    let (uca, ucb) = (basis.u[2][0], basis.u[2][1]);
    let x1 = toy.delta * uca * uca / omega_d;
    let x2 = toy.delta * ucb * ucb / omega_d;
    toy.delta / 2.0 * uca * ucb * (j0(x1) * j0(x2) + 3.0 * j1(x1) * j1(x2))
}

/// Branch-resolved Josephson factors shared by the circuit formulas.
struct CouplerFactors {
    /// α ε E_Jc^(α)
    wa: f64,
    /// β E_Jc^(β)
    wb: f64,
    xa: f64,
    xb: f64,
    theta_a: f64,
    theta_b: f64,
    n: f64,
}

fn coupler_factors(basis: &NormalModeBasis, params: &CircuitParams, drive: &DriveSpec) -> Result<CouplerFactors> {
    let bare = bare_modes(params, drive, &BuildOptions::default())?;
    let n = params.n as f64;
    let su2: f64 = (0..3).map(|b| basis.u[2][b].powi(2)).sum();
    let e_alpha = (-su2 / 4.0).exp() * params.e_jc;
    let e_beta = (-su2 / (4.0 * n * n)).exp() * params.e_jc;
    Ok(CouplerFactors {
        wa: params.alpha * params.epsilon * e_alpha,
        wb: params.beta * e_beta,
        xa: bare.mu_alpha * drive.delta_phi,
        xb: bare.mu_beta * drive.delta_phi,
        theta_a: bare.theta_alpha,
        theta_b: bare.theta_beta,
        n,
    })
}

/// First-order couplings of the circuit at a beam-splitter drive. The branch
/// phases are those of the displaced coupler.
pub fn circuit_first_order(
    basis: &NormalModeBasis,
    params: &CircuitParams,
    drive: &DriveSpec,
) -> Result<EffectiveCouplings> {
    let f = coupler_factors(basis, params, drive)?;
    let u = &basis.u;
    let (uca, ucb) = (u[2][0], u[2][1]);
    let j_ab = -uca * ucb / 2.0
        * (f.wa * j1(f.xa) * f.theta_a.sin() + f.wb / f.n * j1(f.xb) * f.theta_b.sin());
    let ej_prime = [
        (-(0..3).map(|b| u[0][b].powi(2)).sum::<f64>() / 4.0).exp() * params.e_ja,
        (-(0..3).map(|b| u[1][b].powi(2)).sum::<f64>() / 4.0).exp() * params.e_jb,
        f.wa * j0(f.xa) * f.theta_a.cos() + f.wb / f.n.powi(3) * j0(f.xb) * f.theta_b.cos(),
    ];
    let alpha = [0, 1, 2].map(|j| -(0..3).map(|i| u[i][j].powi(4) * ej_prime[i]).sum::<f64>() / 8.0);
    let chi = |j: usize, k: usize| -(0..3).map(|i| u[i][j].powi(2) * u[i][k].powi(2) * ej_prime[i]).sum::<f64>() / 4.0;
    let k_ab = -uca.powi(2) * ucb.powi(2) / 16.0
        * (f.wa * bessel_j(2, f.xa) * f.theta_a.cos() + f.wb / f.n.powi(3) * bessel_j(2, f.xb) * f.theta_b.cos());
    Ok(EffectiveCouplings {
        j_ab,
        alpha,
        chi_ab: chi(0, 1),
        chi_bc: chi(1, 2),
        chi_ca: chi(2, 0),
        j_ab_cond: [0, 1, 2].map(|j| -u[2][j].powi(2) / 4.0 * j_ab),
        k_ab,
        order: 1,
    })
}

/// Couplings of the cross-resonance protocol (drive at `ω_a`).
pub fn cross_resonance_couplings(
    basis: &NormalModeBasis,
    params: &CircuitParams,
    drive: &DriveSpec,
) -> Result<CrossResonanceCouplings> {
    let f = coupler_factors(basis, params, drive)?;
    let u = &basis.u;
    let r2 = std::f64::consts::SQRT_2;
    let e2 = f.wa * j1(f.xa) * f.theta_a.cos() / r2 + f.wb * j1(f.xb) * f.theta_b.cos() / r2;
    let e3 = -f.wa * j1(f.xa) * f.theta_a.cos() / r2 - f.wb * j1(f.xb) * f.theta_b.cos() / (r2 * f.n * f.n);
    let (uca, ucb, ucc) = (u[2][0], u[2][1], u[2][2]);
    Ok(CrossResonanceCouplings {
        omega_a: uca * e2,
        omega_aa: uca.powi(3) * e3 / 2.0,
        omega_ab: uca * ucb * ucb * e3,
        omega_ac: uca * ucc * ucc * e3,
    })
}

/// Flux `φ̄′` at which the coupler normal-mode frequency equals `target_omega_c`
/// (GHz), searched outward from the drive's flux.
pub fn flux_reparametrization(params: &CircuitParams, drive: &DriveSpec, target_omega_c: f64) -> Result<f64> {
    let omega_c = |phi: f64| -> f64 {
        let d = DriveSpec { phi_ext_bar: phi, ..*drive };
        drive_dependent_basis(params, &d).map(|b| b.frequencies[2] - target_omega_c).unwrap_or(f64::NAN)
    };
    let phi0 = drive.phi_ext_bar;
    let r0 = omega_c(phi0);
    if r0.abs() < 1e-12 {
        return Ok(phi0);
    }
    let step = 0.002 * std::f64::consts::TAU;
    for k in 1..=125 {
        for dir in [1.0, -1.0] {
            let (lo, hi) = (phi0 + dir * (k - 1) as f64 * step, phi0 + dir * k as f64 * step);
            let (flo, fhi) = (omega_c(lo), omega_c(hi));
            if flo.is_finite() && fhi.is_finite() && flo.signum() != fhi.signum() {
                let (a, b) = if lo < hi { (lo, hi) } else { (hi, lo) };
                return bisect(omega_c, a, b, 1e-15).ok_or(Error::NoBracket("flux reparametrization"));
            }
        }
    }
    Err(Error::NoBracket("flux reparametrization"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gate {
    #[serde(alias = "iswap")]
    ISwap,
    TwoModeSqueezing,
    Cz,
    Cnot,
    Cswap,
}

impl std::str::FromStr for Gate {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['_', ' '], "-").as_str() {
            "iswap" | "beam-splitter" => Ok(Gate::ISwap),
            "two-mode-squeezing" | "tms" => Ok(Gate::TwoModeSqueezing),
            "cz" | "ising-zz" => Ok(Gate::Cz),
            "cnot" => Ok(Gate::Cnot),
            "cswap" => Ok(Gate::Cswap),
            _ => Err(Error::UnknownGate(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateDrive {
    pub gate: Gate,
    /// GHz; `None` when the gate needs no drive.
    pub omega_d: Option<f64>,
    pub dominant_unwanted: Option<&'static str>,
}

/// Drive frequency and dominant parasitic term for each accessible gate.
pub fn gate_menu(omega_a: f64, omega_b: f64, gate: Gate) -> GateDrive {
    let (omega_d, unwanted) = match gate {
        Gate::ISwap => (Some((omega_a - omega_b).abs()), Some("a†a b†b")),
        Gate::TwoModeSqueezing => (Some(omega_a + omega_b), Some("a†a b†b")),
        Gate::Cz => (None, None),
        Gate::Cnot => (Some(omega_a), Some("-i(a - a†) a†a")),
        Gate::Cswap => (Some((omega_a - omega_b).abs()), Some("-i a†b + i b†a")),
    };
    GateDrive { gate, omega_d, dominant_unwanted: unwanted }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal_modes::toy_normal_modes;

    fn identity_basis(freqs: [f64; 3]) -> NormalModeBasis {
        let u = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        NormalModeBasis { u, v: u, frequencies: freqs, epsilons: [1.0; 3] }
    }

    #[test]
    fn toy_first_order_identity_basis() {
        let toy = ToyParams::reference(4.5, 0.3);
        let c = toy_first_order(&identity_basis(toy.frequencies()), &toy);
        assert_eq!(c.j_ab, 0.0);
        assert_eq!(c.chi_ab, 0.0);
        assert_eq!(c.alpha, toy.anharmonicities());
    }

    #[test]
    fn toy_first_order_hand_value() {
        let mut toy = ToyParams::reference(4.5, 0.0);
        toy.alpha_a = 0.0;
        toy.alpha_b = 0.0;
        let mut nm = identity_basis(toy.frequencies());
        nm.u[2][0] = 0.1;
        nm.u[2][1] = 0.1;
        let c = toy_first_order(&nm, &toy);
        assert!((c.chi_ab - 2e-4 * toy.alpha_c).abs() < 1e-18);
    }

    #[test]
    fn second_order_vanishes_without_anharmonicity() {
        let mut toy = ToyParams::reference(4.5, 0.0);
        toy.alpha_a = 0.0;
        toy.alpha_b = 0.0;
        toy.alpha_c = 0.0;
        let nm = toy_normal_modes(&toy).unwrap();
        let c = toy_second_order_chi(&nm, &toy, DEN_TOL);
        assert_eq!(c.chi_bare_start, 0.0);
        assert_eq!(c.chi_dressed_start, 0.0);
    }

    #[test]
    fn second_order_flags_two_photon_pole() {
        let toy = ToyParams::reference(4.75, 0.0);
        let mut nm = toy_normal_modes(&toy).unwrap();
        nm.frequencies[2] = 0.5 * (nm.frequencies[0] + nm.frequencies[1]) + 1e-4;
        assert!(toy_second_order_chi(&nm, &toy, DEN_TOL).divergent);
    }

    #[test]
    fn flavors_agree_as_anharmonicities_vanish() {
        let mut prev = f64::INFINITY;
        for &s in &[1.0, 0.1, 0.01] {
            let mut toy = ToyParams::reference(4.7, 0.0);
            toy.alpha_a *= s;
            toy.alpha_b *= s;
            toy.alpha_c *= s;
            let nm = toy_normal_modes(&toy).unwrap();
            let c = toy_second_order_chi(&nm, &toy, DEN_TOL);
            let rel = ((c.chi_bare_start - c.chi_dressed_start) / c.chi_bare_start).abs();
            assert!(rel < prev);
            prev = rel;
        }
        assert!(prev < 1e-2);
    }

    #[test]
    fn bessel_rate_small_argument() {
        let toy = ToyParams { delta: 0.1, ..ToyParams::reference(4.5, 0.1) };
        let mut nm = identity_basis(toy.frequencies());
        nm.u[2][0] = 0.2;
        nm.u[2][1] = 0.2;
        let j = toy_bessel_gate_rate(&nm, &toy, 1.0);
        let x = 0.004f64;
        let factor = j0(x).powi(2) + 3.0 * j1(x).powi(2);
        assert!((factor - 1.0).abs() < 1e-5);
        assert!((j - 0.1 / 2.0 * 0.04 * factor).abs() < 1e-16);
        let toy0 = ToyParams { delta: 1e-9, ..toy };
        assert!((toy_bessel_gate_rate(&nm, &toy0, 1.0) / (0.04 * 1e-9 / 2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn circuit_couplings_vanish_without_drive() {
        let p = CircuitParams::reference_device();
        let d = DriveSpec::new(0.3 * std::f64::consts::TAU, 0.0, 1.0);
        let nm = drive_dependent_basis(&p, &d).unwrap();
        let c = circuit_first_order(&nm, &p, &d).unwrap();
        assert_eq!(c.j_ab, 0.0);
        assert_eq!(c.k_ab, 0.0);
        assert!(c.chi_ab < 0.0);
        let cr = cross_resonance_couplings(&nm, &p, &d).unwrap();
        assert_eq!(cr, CrossResonanceCouplings::default());
    }

    #[test]
    fn zero_flux_kills_gate_rate_but_not_pair_term() {
        let p = CircuitParams::reference_device();
        let d = DriveSpec::new(0.0, 0.2 * std::f64::consts::TAU, 1.0);
        let nm = drive_dependent_basis(&p, &d).unwrap();
        let c = circuit_first_order(&nm, &p, &d).unwrap();
        assert!(c.j_ab.abs() < 1e-15);
        assert!(c.k_ab.abs() > 1e-9);
    }

    #[test]
    fn cross_resonance_ratio() {
        let p = CircuitParams::reference_device();
        let d = DriveSpec::new(0.3 * std::f64::consts::TAU, 0.1, 6.0);
        let nm = drive_dependent_basis(&p, &d).unwrap();
        let cr = cross_resonance_couplings(&nm, &p, &d).unwrap();
        let ratio = cr.omega_ab / cr.omega_ac;
        assert!((ratio - nm.u[2][1].powi(2) / nm.u[2][2].powi(2)).abs() < 1e-12);
    }

    #[test]
    fn gate_menu_rows() {
        let g = gate_menu(4.0, 5.5, Gate::ISwap);
        assert!((g.omega_d.unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(gate_menu(4.0, 5.5, Gate::Cz).omega_d, None);
        assert!((gate_menu(4.0, 5.5, Gate::TwoModeSqueezing).omega_d.unwrap() - 9.5).abs() < 1e-15);
        assert_eq!(gate_menu(4.0, 5.5, Gate::Cnot).omega_d, Some(4.0));
        assert!("swap".parse::<Gate>().is_err());
        assert_eq!("iSWAP".parse::<Gate>().unwrap(), Gate::ISwap);
    }

    #[test]
    fn reparametrization_identity_and_shift() {
        let p = CircuitParams::reference_device();
        let phi = 0.3 * std::f64::consts::TAU;
        let d = DriveSpec::new(phi, 0.0, 1.0);
        let w0 = drive_dependent_basis(&p, &d).unwrap().frequencies[2];
        let same = flux_reparametrization(&p, &d, w0).unwrap();
        assert!((same - phi).abs() < 1e-12);
        // Small correction: shift ≈ correction / slope.
        let h = 1e-5;
        let wp = drive_dependent_basis(&p, &DriveSpec::new(phi + h, 0.0, 1.0)).unwrap().frequencies[2];
        let wm = drive_dependent_basis(&p, &DriveSpec::new(phi - h, 0.0, 1.0)).unwrap().frequencies[2];
        let slope = (wp - wm) / (2.0 * h);
        let corr = 1e-3;
        let shifted = flux_reparametrization(&p, &d, w0 + corr).unwrap();
        assert!(((shifted - phi) - corr / slope).abs() < 1e-2 * (corr / slope).abs());
        let d2 = DriveSpec::new(shifted, 0.0, 1.0);
        let res = drive_dependent_basis(&p, &d2).unwrap().frequencies[2] - (w0 + corr);
        assert!(res.abs() < 1e-9);
    }
}
