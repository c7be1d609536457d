//! Circuit parameters, bare-mode quantities and Hamiltonian builders.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::{
    annihilator, materialize, normal_ordered_trig, quadratures, Argument, FockLayout, OperatorKind, OperatorMatrix, TrigKind, Units,
};
use crate::linalg::{cx, max_abs, scaled, symmetrize, CMat};
use crate::special::{bessel_j, bisect, j0};
use crate::units::{ang, ELECTRON_CHARGE, FEMTOFARAD, PLANCK};

/// How the diagonal of the capacitance matrix is formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacitanceConvention {
    /// `C_ii = C_i + Σ_j C_ij`: the node capacitances exclude the couplers.
    #[default]
    AddCouplings,
    /// `C_ii = C_i`: the node capacitances are already totals.
    Total,
}

fn default_epsilon() -> f64 {
    1.0
}

/// Physical circuit description. Capacitances in fF, Josephson energies in GHz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitParams {
    pub c_a: f64,
    pub c_b: f64,
    pub c_c: f64,
    #[serde(default)]
    pub c_ab: f64,
    #[serde(default)]
    pub c_bc: f64,
    #[serde(default)]
    pub c_ac: f64,
    /// Coupler branch capacitances; when both are given they fix the μ weights.
    #[serde(default)]
    pub c_alpha: Option<f64>,
    #[serde(default)]
    pub c_beta: Option<f64>,
    /// Direct μ weights, used when branch capacitances are absent.
    #[serde(default)]
    pub mu_alpha: Option<f64>,
    #[serde(default)]
    pub mu_beta: Option<f64>,
    pub e_ja: f64,
    pub e_jb: f64,
    pub e_jc: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "N")]
    pub n: u32,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub capacitance_convention: CapacitanceConvention,
}

impl CircuitParams {
    /// Transmon-coupler-transmon device used for the flux sweeps.
    pub fn reference_device() -> Self {
        Self {
            c_a: 134.205,
            c_b: 134.218,
            c_c: 75.987,
            c_ab: 0.0,
            c_bc: 11.22,
            c_ac: 11.11,
            c_alpha: None,
            c_beta: None,
            mu_alpha: None,
            mu_beta: None,
            e_ja: 37.0,
            e_jb: 27.0,
            e_jc: 50.0,
            alpha: 0.258,
            beta: 1.0,
            n: 3,
            epsilon: 1.0,
            capacitance_convention: CapacitanceConvention::AddCouplings,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c_a", self.c_a), ("c_b", self.c_b), ("c_c", self.c_c)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [("c_ab", self.c_ab), ("c_bc", self.c_bc), ("c_ac", self.c_ac)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("must be nonnegative, got {v}")));
            }
        }
        for (name, v) in [("e_ja", self.e_ja), ("e_jb", self.e_jb), ("e_jc", self.e_jc)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        if self.n < 1 {
            return Err(invalid("N", "must be at least 1"));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("epsilon", self.epsilon)] {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        for (name, v) in [("c_alpha", self.c_alpha), ("c_beta", self.c_beta)] {
            if let Some(v) = v {
                if !(v >= 0.0) {
                    return Err(invalid(name, format!("must be nonnegative, got {v}")));
                }
            }
        }
        self.mu()?;
        Ok(())
    }

    /// `(μ_α, μ_β)`: from branch capacitances when both are given, else the
    /// explicit weights, else the single-junction default `(1, 0)`.
    pub fn mu(&self) -> Result<(f64, f64)> {
        match (self.c_alpha, self.c_beta) {
            (Some(a), Some(b)) => mu_weights(a, b, self.n),
            (None, None) => Ok((self.mu_alpha.unwrap_or(1.0), self.mu_beta.unwrap_or(0.0))),
            _ => Err(invalid("c_alpha", "c_alpha and c_beta must be given together")),
        }
    }

    /// Capacitance matrix in fF.
    pub fn capacitance_matrix(&self) -> [[f64; 3]; 3] {
        let (ab, bc, ac) = (self.c_ab, self.c_bc, self.c_ac);
        let (da, db, dc) = match self.capacitance_convention {
            CapacitanceConvention::AddCouplings => (self.c_a + ab + ac, self.c_b + ab + bc, self.c_c + ac + bc),
            CapacitanceConvention::Total => (self.c_a, self.c_b, self.c_c),
        };
        [[da, -ab, -ac], [-ab, db, -bc], [-ac, -bc, dc]]
    }
}

/// Charging energies in GHz. Diagonal entries follow `E_C = e²/2C`; the
/// couplings are normalised so that the charge interaction reads `4 E_Cij n_i n_j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargingEnergies {
    pub e_ca: f64,
    pub e_cb: f64,
    pub e_cc: f64,
    pub e_cab: f64,
    pub e_cbc: f64,
    pub e_cca: f64,
}

impl ChargingEnergies {
    pub fn diagonal(&self) -> [f64; 3] {
        [self.e_ca, self.e_cb, self.e_cc]
    }

    /// Coupling between bare modes `i` and `j` (`i ≠ j`).
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        match (i.min(j), i.max(j)) {
            (0, 1) => self.e_cab,
            (1, 2) => self.e_cbc,
            (0, 2) => self.e_cca,
            _ => 0.0,
        }
    }
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Adjugate inverse of a 3×3 matrix.
fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = det3(m);
    if det.abs() < 1e-300 {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            // cofactor of element (j, i)
            let r: Vec<usize> = (0..3).filter(|&k| k != j).collect();
            let c: Vec<usize> = (0..3).filter(|&k| k != i).collect();
            let minor = m[r[0]][c[0]] * m[r[1]][c[1]] - m[r[0]][c[1]] * m[r[1]][c[0]];
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            *v = sign * minor / det;
        }
    }
    Some(inv)
}

fn positive_definite3(m: &[[f64; 3]; 3]) -> bool {
    let d1 = m[0][0];
    let d2 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    d1 > 0.0 && d2 > 0.0 && det3(m) > 0.0
}

pub fn charging_energies(params: &CircuitParams) -> Result<ChargingEnergies> {
    let c = params.capacitance_matrix();
    if !positive_definite3(&c) {
        return Err(Error::CapacitanceNotPositiveDefinite);
    }
    let inv = invert3(&c).ok_or(Error::CapacitanceNotPositiveDefinite)?;
    // e²/h per inverse femtofarad, in GHz.
    let k = ELECTRON_CHARGE * ELECTRON_CHARGE / (PLANCK * FEMTOFARAD) * 1e-9;
    Ok(ChargingEnergies {
        e_ca: 0.5 * k * inv[0][0],
        e_cb: 0.5 * k * inv[1][1],
        e_cc: 0.5 * k * inv[2][2],
        e_cab: k * inv[0][1],
        e_cbc: k * inv[1][2],
        e_cca: k * inv[0][2],
    })
}

/// Solve `μ_α − N μ_β = 1` and `C_α μ_α + C_β N μ_β = 0`.
pub fn mu_weights(c_alpha: f64, c_beta: f64, n: u32) -> Result<(f64, f64)> {
    let total = c_alpha + c_beta;
    if !(total > 0.0) {
        return Err(invalid("c_alpha", "branch capacitances must not both vanish"));
    }
    if n < 1 {
        return Err(invalid("N", "must be at least 1"));
    }
    Ok((c_beta / total, -(c_alpha / total) / n as f64))
}

/// Flux drive. Angles in radians, `omega_d` in GHz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub phi_ext_bar: f64,
    pub delta_phi: f64,
    pub omega_d: f64,
    pub n_harmonics: usize,
}

impl DriveSpec {
    pub fn new(phi_ext_bar: f64, delta_phi: f64, omega_d: f64) -> Self {
        Self { phi_ext_bar, delta_phi, omega_d, n_harmonics: 2 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_phi >= 0.0) {
            return Err(invalid("delta_phi", "must be nonnegative"));
        }
        if self.delta_phi > 0.0 && !(self.omega_d > 0.0) {
            return Err(invalid("omega_d", "must be positive when a drive is active"));
        }
        if self.n_harmonics < 1 {
            return Err(invalid("n_harmonics", "must be at least 1"));
        }
        if !self.phi_ext_bar.is_finite() {
            return Err(invalid("phi_ext_bar", "must be finite"));
        }
        Ok(())
    }
}

/// Three linearly coupled Kerr oscillators, all values in GHz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyParams {
    pub omega_a: f64,
    pub omega_b: f64,
    pub omega_c: f64,
    pub alpha_a: f64,
    pub alpha_b: f64,
    pub alpha_c: f64,
    pub g_ab: f64,
    pub g_bc: f64,
    pub g_ca: f64,
    #[serde(default)]
    pub delta: f64,
}

impl ToyParams {
    /// Toy parameters of the static/dynamical cross-Kerr scans.
    pub fn reference(omega_c: f64, delta: f64) -> Self {
        Self {
            omega_a: 4.0,
            omega_b: 5.5,
            omega_c,
            alpha_a: -0.3,
            alpha_b: -0.2,
            alpha_c: 0.25,
            g_ab: 0.12,
            g_bc: -0.12,
            g_ca: 0.0,
            delta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [
            ("omega_a", self.omega_a),
            ("omega_b", self.omega_b),
            ("omega_c", self.omega_c),
            ("alpha_a", self.alpha_a),
            ("alpha_b", self.alpha_b),
            ("alpha_c", self.alpha_c),
            ("g_ab", self.g_ab),
            ("g_bc", self.g_bc),
            ("g_ca", self.g_ca),
            ("delta", self.delta),
        ];
        for (name, v) in vals {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        Ok(())
    }

    pub fn frequencies(&self) -> [f64; 3] {
        [self.omega_a, self.omega_b, self.omega_c]
    }

    pub fn anharmonicities(&self) -> [f64; 3] {
        [self.alpha_a, self.alpha_b, self.alpha_c]
    }
}

/// Static coupler potential, with the phases measured from the flux-shifted
/// branch origins.
#[derive(Clone, Copy, Debug)]
struct CouplerPotential {
    /// α ε J₀(μ_α δφ)
    wa: f64,
    /// β J₀(μ_β δφ)
    wb: f64,
    theta_a: f64,
    theta_b: f64,
    n: f64,
}

impl CouplerPotential {
    fn new(params: &CircuitParams, drive: &DriveSpec) -> Result<Self> {
        let (mu_a, mu_b) = params.mu()?;
        Ok(Self {
            wa: params.alpha * params.epsilon * j0(mu_a * drive.delta_phi),
            wb: params.beta * j0(mu_b * drive.delta_phi),
            theta_a: mu_a * drive.phi_ext_bar,
            theta_b: mu_b * drive.phi_ext_bar,
            n: params.n as f64,
        })
    }

    /// `U(φ)/E_Jc`.
    fn value(&self, x: f64) -> f64 {
        -self.wa * (x + self.theta_a).cos() - self.wb * self.n * (x / self.n + self.theta_b).cos()
    }

    fn slope(&self, x: f64) -> f64 {
        self.wa * (x + self.theta_a).sin() + self.wb * (x / self.n + self.theta_b).sin()
    }

    fn curvature(&self, x: f64) -> f64 {
        self.wa * (x + self.theta_a).cos() + self.wb / self.n * (x / self.n + self.theta_b).cos()
    }
}

/// Minimum of the static coupler potential, Newton from 0 with a dense-scan
/// and bisection fallback.
pub fn classical_displacement(params: &CircuitParams, drive: &DriveSpec) -> Result<f64> {
    let pot = CouplerPotential::new(params, drive)?;
    let span = std::f64::consts::PI * pot.n;
    let mut x = 0.0;
    for _ in 0..60 {
        let c = pot.curvature(x);
        if c <= 0.0 {
            break;
        }
        let step = pot.slope(x) / c;
        x -= step;
        if !x.is_finite() || x.abs() > span {
            break;
        }
        if step.abs() < 1e-15 {
            break;
        }
    }
    if x.is_finite() && x.abs() <= span && pot.slope(x).abs() < 1e-12 && pot.curvature(x) > 0.0 {
        return Ok(x);
    }
    // Fallback: lowest sampled point, refined by bisection on the slope.
    let m = 4000;
    let h = 2.0 * span / m as f64;
    let (mut best, mut best_u) = (f64::NAN, f64::INFINITY);
    for k in 0..=m {
        let y = -span + k as f64 * h;
        let u = pot.value(y);
        if u < best_u {
            best_u = u;
            best = y;
        }
    }
    let root = bisect(|y| pot.slope(y), best - h, best + h, 1e-15).ok_or(Error::NoPotentialMinimum)?;
    if pot.curvature(root) > 0.0 {
        Ok(root)
    } else {
        Err(Error::NoPotentialMinimum)
    }
}

/// Options for assembling the bare-mode description.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    /// Expand the coupler about the classical potential minimum.
    pub displace: bool,
    /// Highest total order kept in the trigonometric expansions.
    pub max_order: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { displace: true, max_order: 4 }
    }
}

/// Bare-mode quantities at one flux/drive point. Frequencies in GHz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BareModes {
    pub omega: [f64; 3],
    pub eta: [f64; 3],
    pub charging: ChargingEnergies,
    pub phi_cls: f64,
    /// Branch phase offsets after displacement.
    pub theta_alpha: f64,
    pub theta_beta: f64,
    pub mu_alpha: f64,
    pub mu_beta: f64,
}

impl BareModes {
    /// Coupler form factor `F(η)` so that the quadratic potential is `F E_Jc φ²/2`.
    pub fn coupler_form_factor(params: &CircuitParams, drive: &DriveSpec, theta_a: f64, theta_b: f64, eta: f64) -> f64 {
        let (mu_a, mu_b) = params.mu().unwrap_or((1.0, 0.0));
        let n = params.n as f64;
        params.alpha * params.epsilon * j0(mu_a * drive.delta_phi) * theta_a.cos() * (-eta / 4.0).exp()
            + params.beta / n * j0(mu_b * drive.delta_phi) * theta_b.cos() * (-eta / (4.0 * n * n)).exp()
    }
}

fn solve_eta_single(e_c: f64, e_j: f64, form: impl Fn(f64) -> f64, mode: char) -> Result<f64> {
    let target = 8.0 * e_c / e_j;
    bisect(|x| form(x) * x * x - target, 1e-6, 10.0, 1e-12).ok_or(Error::ModeSoftening { mode })
}

/// Bare-mode frequencies, impedance factors η and the coupler displacement.
pub fn bare_modes(params: &CircuitParams, drive: &DriveSpec, opts: &BuildOptions) -> Result<BareModes> {
    params.validate()?;
    drive.validate()?;
    let ec = charging_energies(params)?;
    let (mu_a, mu_b) = params.mu()?;
    let phi_cls = if opts.displace { classical_displacement(params, drive)? } else { 0.0 };
    let n = params.n as f64;
    let theta_alpha = mu_a * drive.phi_ext_bar + phi_cls;
    let theta_beta = mu_b * drive.phi_ext_bar + phi_cls / n;
    let transmon = |x: f64| (-x / 4.0).exp();
    let coupler = |x: f64| BareModes::coupler_form_factor(params, drive, theta_alpha, theta_beta, x);
    let eta_a = solve_eta_single(ec.e_ca, params.e_ja, transmon, 'a')?;
    let eta_b = solve_eta_single(ec.e_cb, params.e_jb, transmon, 'b')?;
    let eta_c = solve_eta_single(ec.e_cc, params.e_jc, coupler, 'c')?;
    let freq = |e_c: f64, e_j: f64, f: f64, eta: f64| 4.0 * e_c / eta + 0.5 * f * eta * e_j;
    let omega = [
        freq(ec.e_ca, params.e_ja, transmon(eta_a), eta_a),
        freq(ec.e_cb, params.e_jb, transmon(eta_b), eta_b),
        freq(ec.e_cc, params.e_jc, coupler(eta_c), eta_c),
    ];
    Ok(BareModes {
        omega,
        eta: [eta_a, eta_b, eta_c],
        charging: ec,
        phi_cls,
        theta_alpha,
        theta_beta,
        mu_alpha: mu_a,
        mu_beta: mu_b,
    })
}

/// `(η_a, η_b, η_c)` at this drive, with the coupler displaced to its
/// classical minimum.
pub fn solve_eta(params: &CircuitParams, drive: &DriveSpec) -> Result<[f64; 3]> {
    Ok(bare_modes(params, drive, &BuildOptions::default())?.eta)
}

/// One Fourier component pair of a periodic Hamiltonian.
#[derive(Clone, Debug)]
pub struct Harmonic {
    pub n: usize,
    pub cos_part: OperatorMatrix,
    pub sin_part: OperatorMatrix,
}

/// `H(t) = H₀ + Σ_n [C_n cos(nω_d t) + S_n sin(nω_d t)]`, rad/ns.
#[derive(Clone, Debug)]
pub struct HarmonicHamiltonian {
    pub layout: FockLayout,
    pub static_part: OperatorMatrix,
    pub harmonics: Vec<Harmonic>,
    pub warnings: Vec<String>,
}

impl HarmonicHamiltonian {
    pub fn dim(&self) -> usize {
        self.layout.total()
    }

    /// Nonzero time-dependent terms as `(n, is_sin, matrix)`.
    pub fn drive_terms(&self) -> Vec<(usize, bool, &CMat)> {
        let mut out = Vec::new();
        for h in &self.harmonics {
            if max_abs(h.cos_part.matrix.as_ref()) > 0.0 {
                out.push((h.n, false, &h.cos_part.matrix));
            }
            if max_abs(h.sin_part.matrix.as_ref()) > 0.0 {
                out.push((h.n, true, &h.sin_part.matrix));
            }
        }
        out
    }

    pub fn is_static(&self) -> bool {
        self.drive_terms().is_empty()
    }

    /// `H(t)` for drive frequency `omega_d` in rad/ns.
    pub fn at(&self, t: f64, omega_d: f64) -> CMat {
        let mut m = self.static_part.matrix.clone();
        for h in &self.harmonics {
            let (c, s) = ((h.n as f64 * omega_d * t).cos(), (h.n as f64 * omega_d * t).sin());
            add_scaled(&mut m, c, &h.cos_part.matrix);
            add_scaled(&mut m, s, &h.sin_part.matrix);
        }
        m
    }

    pub fn max_hermiticity_error(&self) -> f64 {
        let mut e = self.static_part.hermiticity_error();
        for h in &self.harmonics {
            e = e.max(h.cos_part.hermiticity_error()).max(h.sin_part.hermiticity_error());
        }
        e
    }

    /// Add `c·I` to the static part.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        for i in 0..out.dim() {
            out.static_part.matrix[(i, i)] += cx(c, 0.0);
        }
        out
    }
}

fn observable(layout: &FockLayout, mut m: CMat) -> OperatorMatrix {
    symmetrize(&mut m);
    OperatorMatrix::new(layout.clone(), m, Units::AngularFrequency, OperatorKind::Observable)
}

fn add_scaled(dst: &mut CMat, s: f64, src: &CMat) {
    let n = dst.nrows();
    for j in 0..n {
        for i in 0..n {
            dst[(i, j)] += src[(i, j)] * s;
        }
    }
}

fn number(layout: &FockLayout, mode: usize) -> Result<CMat> {
    let a = annihilator(layout, mode)?.matrix;
    Ok(a.adjoint() * &a)
}

/// Full-circuit Hamiltonian in the bare basis with the default options.
pub fn build_circuit_hamiltonian(
    params: &CircuitParams,
    drive: &DriveSpec,
    layout: &FockLayout,
) -> Result<HarmonicHamiltonian> {
    build_circuit_hamiltonian_with(params, drive, layout, &BuildOptions::default())
}

/// Full-circuit Hamiltonian in the bare basis.
///
/// Transmons: `ω a†a` plus the normal-ordered Josephson terms of order ≥ 3.
/// Coupler: `ω_c c†c` plus, for each branch `−w cos(sφ + θ + m sin ω_d t)`,
/// the Jacobi-Anger harmonics up to `n_harmonics` with every trigonometric
/// factor expanded in normal order about the displaced minimum; the static
/// quadratic part is the one absorbed into `ω_c`. Capacitive couplings
/// `4E_Cij n_i n_j`.
pub fn build_circuit_hamiltonian_with(
    params: &CircuitParams,
    drive: &DriveSpec,
    layout: &FockLayout,
    opts: &BuildOptions,
) -> Result<HarmonicHamiltonian> {
    if layout.n_modes() != 3 {
        return Err(invalid("dims", "the circuit has exactly three modes"));
    }
    let bare = bare_modes(params, drive, opts)?;
    let mut warnings = Vec::new();
    if layout.dims().iter().any(|&d| d < 3) {
        warnings.push("truncation below 3 levels: quartic monomials act unfaithfully".to_string());
    }
    let dim = layout.total();
    let mut h0: CMat = Mat::zeros(dim, dim);

    let ej = [params.e_ja, params.e_jb];
    for mode in 0..2 {
        add_scaled(&mut h0, bare.omega[mode], &number(layout, mode)?);
        let cos = normal_ordered_trig(TrigKind::Cos, bare.eta[mode], opts.max_order)?.filter_order(|s| s >= 3);
        add_scaled(&mut h0, -ej[mode], &materialize(&cos, layout, Argument::Mode(mode))?.matrix);
    }
    add_scaled(&mut h0, bare.omega[2], &number(layout, 2)?);

    let n = params.n as f64;
    let branches = [
        (params.alpha * params.epsilon * params.e_jc, 1.0, bare.theta_alpha, bare.mu_alpha),
        (params.beta * n * params.e_jc, 1.0 / n, bare.theta_beta, bare.mu_beta),
    ];
    let nh = drive.n_harmonics;
    let mut cos_parts: Vec<CMat> = (0..nh).map(|_| Mat::zeros(dim, dim)).collect();
    let mut sin_parts: Vec<CMat> = (0..nh).map(|_| Mat::zeros(dim, dim)).collect();
    for &(w, s, theta, mu) in &branches {
        if w == 0.0 {
            continue;
        }
        let eta = bare.eta[2] * s * s;
        let cos_full = normal_ordered_trig(TrigKind::Cos, eta, opts.max_order)?.filter_order(|o| o > 0);
        let sin_full = normal_ordered_trig(TrigKind::Sin, eta, opts.max_order)?;
        let cos_no_quad = cos_full.filter_order(|o| o != 2);
        let cm = materialize(&cos_full, layout, Argument::Mode(2))?.matrix;
        let cm_nq = materialize(&cos_no_quad, layout, Argument::Mode(2))?.matrix;
        let sm = materialize(&sin_full, layout, Argument::Mode(2))?.matrix;
        let m = mu * drive.delta_phi;
        // cos(x + θ + m sin τ) = J₀ cos(x+θ) + Σ_{even n} 2J_n cos(nτ) cos(x+θ) − Σ_{odd n} 2J_n sin(nτ) sin(x+θ)
        let (ct, st) = (theta.cos(), theta.sin());
        add_scaled(&mut h0, -w * j0(m) * ct, &cm_nq);
        add_scaled(&mut h0, w * j0(m) * st, &sm);
        for k in 1..=nh {
            let jn = bessel_j(k as i32, m);
            if jn == 0.0 {
                continue;
            }
            if k % 2 == 0 {
                add_scaled(&mut cos_parts[k - 1], -w * 2.0 * jn * ct, &cm);
                add_scaled(&mut cos_parts[k - 1], w * 2.0 * jn * st, &sm);
            } else {
                add_scaled(&mut sin_parts[k - 1], w * 2.0 * jn * st, &cm);
                add_scaled(&mut sin_parts[k - 1], w * 2.0 * jn * ct, &sm);
            }
        }
    }

    let charges: Vec<CMat> =
        (0..3).map(|k| quadratures(layout, k, bare.eta[k]).map(|(_, q)| q.matrix)).collect::<Result<_>>()?;
    for (i, j) in [(0, 1), (1, 2), (0, 2)] {
        let e = bare.charging.coupling(i, j);
        if e != 0.0 {
            add_scaled(&mut h0, 4.0 * e, &(&charges[i] * &charges[j]));
        }
    }

    let to_ang = ang(1.0);
    let scale = |m: CMat| observable(layout, scaled(m.as_ref(), cx(to_ang, 0.0)));
    let harmonics = cos_parts
        .into_iter()
        .zip(sin_parts)
        .enumerate()
        .map(|(k, (c, s))| Harmonic { n: k + 1, cos_part: scale(c), sin_part: scale(s) })
        .collect();
    Ok(HarmonicHamiltonian { layout: layout.clone(), static_part: scale(h0), harmonics, warnings })
}

/// Kerr oscillators with beam-splitter couplings and coupler-frequency
/// modulation `δ sin(ω_d t) c†c`.
pub fn build_toy_hamiltonian(toy: &ToyParams, layout: &FockLayout) -> Result<HarmonicHamiltonian> {
    toy.validate()?;
    if layout.n_modes() != 3 {
        return Err(invalid("dims", "the toy model has exactly three modes"));
    }
    let dim = layout.total();
    let ops: Vec<CMat> = (0..3).map(|k| annihilator(layout, k).map(|a| a.matrix)).collect::<Result<_>>()?;
    let mut h0: CMat = Mat::zeros(dim, dim);
    let w = toy.frequencies();
    let al = toy.anharmonicities();
    for k in 0..3 {
        let a = &ops[k];
        let ad = a.adjoint().to_owned();
        add_scaled(&mut h0, w[k], &(&ad * a));
        let ad2 = &ad * &ad;
        add_scaled(&mut h0, al[k] / 2.0, &(&ad2 * (a * a)));
    }
    for (i, j, g) in [(0, 1, toy.g_ab), (1, 2, toy.g_bc), (2, 0, toy.g_ca)] {
        if g != 0.0 {
            let hop = ops[i].adjoint() * &ops[j];
            add_scaled(&mut h0, -g, &hop);
            add_scaled(&mut h0, -g, &hop.adjoint().to_owned());
        }
    }
    let mut s1: CMat = Mat::zeros(dim, dim);
    add_scaled(&mut s1, toy.delta, &(ops[2].adjoint() * &ops[2]));
    let to_ang = ang(1.0);
    let scale = |m: CMat| observable(layout, scaled(m.as_ref(), cx(to_ang, 0.0)));
    Ok(HarmonicHamiltonian {
        layout: layout.clone(),
        static_part: scale(h0),
        harmonics: vec![Harmonic { n: 1, cos_part: scale(Mat::zeros(dim, dim)), sin_part: scale(s1) }],
        warnings: Vec::new(),
    })
}

/// Drop every matrix element between Fock states of different total
/// excitation number. Each monomial shifts the total number by its
/// creation-minus-annihilation count, so this removes exactly the
/// number-nonconserving monomials.
pub fn rwa_strip(h: &HarmonicHamiltonian) -> HarmonicHamiltonian {
    let layout = &h.layout;
    let total: Vec<usize> = (0..layout.total()).map(|i| layout.occupation(i).iter().sum()).collect();
    let strip = |op: &OperatorMatrix| {
        let m = &op.matrix;
        let out = Mat::from_fn(m.nrows(), m.ncols(), |i, j| if total[i] == total[j] { m[(i, j)] } else { cx(0.0, 0.0) });
        OperatorMatrix { matrix: out, ..op.clone() }
    };
    HarmonicHamiltonian {
        layout: layout.clone(),
        static_part: strip(&h.static_part),
        harmonics: h
            .harmonics
            .iter()
            .map(|hm| Harmonic { n: hm.n, cos_part: strip(&hm.cos_part), sin_part: strip(&hm.sin_part) })
            .collect(),
        warnings: h.warnings.clone(),
    }
}

/// Bare charge operator `n = −i(a − a†)/√(2η)` of one circuit mode.
pub fn charge_operator(layout: &FockLayout, mode: usize, eta: f64) -> Result<OperatorMatrix> {
    Ok(quadratures(layout, mode, eta)?.1)
}
