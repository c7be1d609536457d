//! One-period propagation, quasienergies, state tracking and drive calibration.
//!
//! Public frequencies are in GHz and times in ns; the propagator itself works
//! with the rad/ns matrices of [`HarmonicHamiltonian`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::circuit::HarmonicHamiltonian;
use crate::error::{invalid, Error, Result};
use crate::fock::{FockLayout, OperatorMatrix};
use crate::linalg::{commutator, cx, eig_unitary, eigh, expm_minus_i, max_abs, max_abs_diff, CMat};
use crate::special::brent_min;
use crate::units::{ang, fold, ghz, TWO_PI};

pub const DEFAULT_OVERLAP_THRESHOLD: f64 = 0.5;
pub const DEFAULT_GRID_POINTS: usize = 128;

/// Occupation tuple `(n_a, n_b, n_c, ...)` naming a state.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Label(pub Vec<usize>);

impl Label {
    pub fn new(occ: &[usize]) -> Self {
        Self(occ.to_vec())
    }

    pub fn vacuum(n_modes: usize) -> Self {
        Self(vec![0; n_modes])
    }
}

impl From<[usize; 3]> for Label {
    fn from(occ: [usize; 3]) -> Self {
        Self(occ.to_vec())
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.iter().all(|&n| n < 10) {
            for n in &self.0 {
                write!(f, "{n}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.0.iter().map(|n| n.to_string()).collect();
            write!(f, "{}", parts.join(","))
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    /// `"110"` or `"1,1,0"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || invalid("label", format!("cannot parse `{s}`"));
        let occ: Option<Vec<usize>> = if s.contains(',') {
            s.split(',').map(|p| p.trim().parse().ok()).collect()
        } else {
            s.chars().map(|c| c.to_digit(10).map(|d| d as usize)).collect()
        };
        match occ {
            Some(v) if !v.is_empty() => Ok(Self(v)),
            _ => Err(bad()),
        }
    }
}

impl From<Label> for String {
    fn from(l: Label) -> Self {
        l.to_string()
    }
}

impl TryFrom<String> for Label {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Labels of the Walsh combination for the qubit pair `(a, b)` of a three-mode system.
pub fn walsh_labels() -> [Label; 4] {
    [[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]].map(Label::from)
}

/// Eigenstates of the undriven Hamiltonian, energies in GHz.
#[derive(Clone, Debug)]
pub struct StaticReference {
    pub layout: FockLayout,
    pub energies: Vec<f64>,
    pub vectors: CMat,
    pub labels: BTreeMap<Label, usize>,
    pub state_labels: Vec<Option<Label>>,
}

impl StaticReference {
    pub fn index(&self, label: &Label) -> Result<usize> {
        self.labels.get(label).copied().ok_or_else(|| Error::LabelMissing(label.to_string()))
    }

    pub fn energy(&self, label: &Label) -> Result<f64> {
        Ok(self.energies[self.index(label)?])
    }

    /// `E_110 − E_100 − E_010 + E_000`.
    pub fn walsh_chi(&self) -> Result<f64> {
        let [l000, l100, l010, l110] = walsh_labels();
        Ok(self.energy(&l110)? - self.energy(&l100)? - self.energy(&l010)? + self.energy(&l000)?)
    }
}

/// Full spectrum of `H0` with labels by maximal Fock-state weight. When two
/// eigenstates peak on the same Fock state the lower one keeps the label.
pub fn static_eigensolve(h0: &OperatorMatrix) -> Result<StaticReference> {
    let scale = max_abs(h0.matrix.as_ref()).max(1.0);
    if h0.hermiticity_error() > 1e-12 * scale {
        return Err(invalid("H0", "static Hamiltonian is not Hermitian"));
    }
    let (vals, vecs) = eigh(h0.matrix.as_ref());
    let n = vals.len();
    let mut labels = BTreeMap::new();
    let mut state_labels = vec![None; n];
    for k in 0..n {
        let mut best = (0, -1.0);
        for i in 0..n {
            let w = vecs[(i, k)].norm_sqr();
            if w > best.1 {
                best = (i, w);
            }
        }
        let l = Label(h0.layout.occupation(best.0));
        if !labels.contains_key(&l) {
            labels.insert(l.clone(), k);
            state_labels[k] = Some(l);
        }
    }
    Ok(StaticReference {
        layout: h0.layout.clone(),
        energies: vals.into_iter().map(ghz).collect(),
        vectors: vecs,
        labels,
        state_labels,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Fourth-order Magnus expansion with two Gauss-Legendre nodes.
    #[default]
    Magnus4,
    /// Exponential of `H(t_mid) Δt`, second order.
    Midpoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagatorOptions {
    /// Accept once doubling the step count changes `U` by less than this (max norm).
    pub tol: f64,
    pub integrator: Integrator,
    pub min_steps: usize,
    pub max_steps: usize,
    pub grid_points: usize,
    pub retain_grid: bool,
}

impl Default for PropagatorOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            integrator: Integrator::Magnus4,
            min_steps: 16,
            max_steps: 1 << 15,
            grid_points: DEFAULT_GRID_POINTS,
            retain_grid: false,
        }
    }
}

impl PropagatorOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        if self.min_steps < 1 || self.max_steps < self.min_steps {
            return Err(invalid("max_steps", "must be at least min_steps"));
        }
        if self.grid_points < 1 {
            return Err(invalid("grid_points", "must be at least 1"));
        }
        Ok(())
    }

    pub fn with_grid(self) -> Self {
        Self { retain_grid: true, ..self }
    }
}

/// `U(T, 0)` and, optionally, `U(t_i, 0)` at `t_i = iT/G`, `i = 0..=G`.
#[derive(Clone, Debug)]
pub struct Propagation {
    pub omega_d: f64,
    pub period: f64,
    pub u: CMat,
    pub steps: usize,
    /// Max-norm change of `U` under the last step doubling.
    pub doubling_change: f64,
    pub grid: Option<Vec<CMat>>,
}

struct Stepper<'a> {
    h0: &'a CMat,
    terms: Vec<(f64, bool, &'a CMat)>,
    /// `[M_k, H0]`
    c: Vec<CMat>,
    /// `([M_k, M_l], k, l)` for `k < l`
    d: Vec<(usize, usize, CMat)>,
    w: f64,
    integrator: Integrator,
}

impl<'a> Stepper<'a> {
    fn new(h: &'a HarmonicHamiltonian, w: f64, integrator: Integrator) -> Self {
        let terms: Vec<(f64, bool, &CMat)> = h.drive_terms().into_iter().map(|(n, s, m)| (n as f64, s, m)).collect();
        let h0 = &h.static_part.matrix;
        let (mut c, mut d) = (Vec::new(), Vec::new());
        if integrator == Integrator::Magnus4 {
            c = terms.iter().map(|(_, _, m)| commutator(m.as_ref(), h0.as_ref())).collect();
            for k in 0..terms.len() {
                for l in k + 1..terms.len() {
                    d.push((k, l, commutator(terms[k].2.as_ref(), terms[l].2.as_ref())));
                }
            }
        }
        Self { h0, terms, c, d, w, integrator }
    }

    fn coeffs(&self, t: f64) -> Vec<f64> {
        self.terms
            .iter()
            .map(|&(n, is_sin, _)| if is_sin { (n * self.w * t).sin() } else { (n * self.w * t).cos() })
            .collect()
    }

    /// Hermitian `K` with `U(t + dt, t) ≈ exp(−iK)`.
    fn generator(&self, t: f64, dt: f64) -> CMat {
        let dim = self.h0.nrows();
        let mut acc: Vec<(c64, &CMat)> = vec![(cx(dt, 0.0), self.h0)];
        match self.integrator {
            Integrator::Midpoint => {
                let f = self.coeffs(t + 0.5 * dt);
                for (fk, (_, _, m)) in f.iter().zip(&self.terms) {
                    acc.push((cx(dt * fk, 0.0), *m));
                }
            }
            Integrator::Magnus4 => {
                let g = 3f64.sqrt() / 6.0;
                let b = self.coeffs(t + (0.5 - g) * dt);
                let a = self.coeffs(t + (0.5 + g) * dt);
                let s = 3f64.sqrt() * dt * dt / 12.0;
                for k in 0..self.terms.len() {
                    acc.push((cx(0.5 * dt * (a[k] + b[k]), 0.0), self.terms[k].2));
                    acc.push((cx(0.0, -s * (a[k] - b[k])), &self.c[k]));
                }
                for (k, l, m) in &self.d {
                    acc.push((cx(0.0, -s * (a[*k] * b[*l] - a[*l] * b[*k])), m));
                }
            }
        }
        let mut out: CMat = Mat::zeros(dim, dim);
        for j in 0..dim {
            for (s, m) in &acc {
                if s.re == 0.0 && s.im == 0.0 {
                    continue;
                }
                let col = m.col(j);
                let mut dst = out.col_mut(j);
                for i in 0..dim {
                    dst[i] += *s * col[i];
                }
            }
        }
        out
    }

    fn run(&self, steps: usize, period: f64, grid_every: Option<usize>) -> (CMat, Option<Vec<CMat>>) {
        let dim = self.h0.nrows();
        let dt = period / steps as f64;
        let mut u = crate::linalg::identity(dim);
        let mut grid = grid_every.map(|_| vec![u.clone()]);
        for k in 0..steps {
            let step = expm_minus_i(self.generator(k as f64 * dt, dt).as_ref());
            u = &step * &u;
            if let (Some(g), Some(every)) = (grid.as_mut(), grid_every) {
                if (k + 1) % every == 0 {
                    g.push(u.clone());
                }
            }
        }
        (u, grid)
    }
}

/// Propagator over one drive period `T = 1/ω_d` (ω_d in GHz), refined by
/// step doubling until the change falls below `opts.tol`.
pub fn propagate_one_period(h: &HarmonicHamiltonian, omega_d: f64, opts: &PropagatorOptions) -> Result<Propagation> {
    opts.validate()?;
    if !(omega_d > 0.0) || !omega_d.is_finite() {
        return Err(invalid("omega_d", "must be positive"));
    }
    let period = 1.0 / omega_d;
    let g = opts.grid_points;
    if h.is_static() {
        let (vals, v) = eigh(h.static_part.matrix.as_ref());
        let at = |t: f64| {
            let ph: Vec<c64> = vals.iter().map(|&l| cx((l * t).cos(), -(l * t).sin())).collect();
            let s = Mat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * ph[j]);
            &s * v.adjoint()
        };
        let grid = opts.retain_grid.then(|| (0..=g).map(|i| at(period * i as f64 / g as f64)).collect());
        return Ok(Propagation { omega_d, period, u: at(period), steps: 1, doubling_change: 0.0, grid });
    }
    let stepper = Stepper::new(h, ang(omega_d), opts.integrator);
    let mut n = opts.min_steps;
    if opts.retain_grid {
        n = n.div_ceil(g) * g;
    }
    let every = |n: usize| opts.retain_grid.then_some(n / g);
    // With a retained grid the doubling test covers every grid point: for a
    // periodic drive the end-point alone can converge much faster than the
    // intermediate propagators.
    let (mut u, mut grid) = stepper.run(n, period, every(n));
    while 2 * n <= opts.max_steps {
        let (u2, grid2) = stepper.run(2 * n, period, every(2 * n));
        let mut change = max_abs_diff(u.as_ref(), u2.as_ref());
        if let (Some(a), Some(b)) = (&grid, &grid2) {
            for (x, y) in a.iter().zip(b) {
                change = change.max(max_abs_diff(x.as_ref(), y.as_ref()));
            }
        }
        if change < opts.tol {
            return Ok(Propagation { omega_d, period, u: u2, steps: 2 * n, doubling_change: change, grid: grid2 });
        }
        u = u2;
        grid = grid2;
        n *= 2;
    }
    Err(Error::NoConvergence { what: "one-period propagator", budget: opts.max_steps })
}

/// Direct time-domain evolution of a state with `steps_per_period` fixed
/// steps per drive period, `total_steps` steps in all. Columns of `psi` are
/// evolved independently.
pub fn simulate_state(
    h: &HarmonicHamiltonian,
    omega_d: f64,
    psi: &CMat,
    steps_per_period: usize,
    total_steps: usize,
    integrator: Integrator,
) -> Result<CMat> {
    if !(omega_d > 0.0) || !omega_d.is_finite() {
        return Err(invalid("omega_d", "must be positive"));
    }
    if steps_per_period == 0 {
        return Err(invalid("steps_per_period", "must be positive"));
    }
    if psi.nrows() != h.dim() {
        return Err(invalid("psi", "dimension does not match the Hamiltonian"));
    }
    let stepper = Stepper::new(h, ang(omega_d), integrator);
    let dt = 1.0 / omega_d / steps_per_period as f64;
    let mut out = psi.clone();
    for k in 0..total_steps {
        let (vals, v) = eigh(stepper.generator(k as f64 * dt, dt).as_ref());
        let mut y = v.adjoint() * &out;
        for (i, &l) in vals.iter().enumerate() {
            let ph = cx(l.cos(), -l.sin());
            for j in 0..y.ncols() {
                y[(i, j)] *= ph;
            }
        }
        out = &v * &y;
    }
    Ok(out)
}

/// Labeled mode of a Floquet solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelAssignment {
    pub index: usize,
    /// Squared overlap with the static reference state.
    pub overlap: f64,
    /// `k` in `ε + kω_d`.
    pub unfold: i64,
}

#[derive(Clone, Debug)]
pub struct FloquetSolution {
    pub omega_d: f64,
    pub period: f64,
    /// Folded into `[−ω_d/2, ω_d/2)`, GHz.
    pub quasienergies: Vec<f64>,
    pub modes_t0: CMat,
    pub labels: BTreeMap<Label, LabelAssignment>,
    pub excluded: BTreeSet<Label>,
    pub overlap_threshold: f64,
    pub grid: Option<Vec<CMat>>,
}

/// The two Floquet modes spanning (mostly) a pair of static states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairModes {
    pub labels: [Label; 2],
    pub modes: [usize; 2],
    /// Weight of each mode inside the two-state manifold.
    pub weights: [f64; 2],
    /// Fraction of each mode's manifold weight carried by `l1`.
    pub mixing: [f64; 2],
}

impl FloquetSolution {
    pub fn assignment(&self, label: &Label) -> Result<LabelAssignment> {
        if self.excluded.contains(label) {
            return Err(Error::LabelMissing(format!("{label} (excluded)")));
        }
        self.labels.get(label).copied().ok_or_else(|| Error::LabelMissing(label.to_string()))
    }

    pub fn is_tracked(&self, label: &Label) -> bool {
        self.labels.contains_key(label) && !self.excluded.contains(label)
    }

    /// `ε + kω_d` for a tracked label, GHz.
    pub fn unfolded(&self, label: &Label) -> Result<f64> {
        let a = self.assignment(label)?;
        Ok(self.quasienergies[a.index] + a.unfold as f64 * self.omega_d)
    }

    /// Modes with the largest weight in `span{|l1⟩, |l2⟩}`. Each mode is
    /// matched to the label it overlaps more strongly, `modes[0]` to `l1`.
    pub fn pair_modes(&self, reference: &StaticReference, l1: &Label, l2: &Label) -> Result<PairModes> {
        let (i1, i2) = (reference.index(l1)?, reference.index(l2)?);
        let n = self.modes_t0.ncols();
        let ov = |i: usize, j: usize| -> f64 {
            let mut s = cx(0.0, 0.0);
            for r in 0..n {
                s += reference.vectors[(r, i)].conj() * self.modes_t0[(r, j)];
            }
            s.norm_sqr()
        };
        let mut w: Vec<(f64, f64, usize)> = (0..n).map(|j| (ov(i1, j), ov(i2, j), j)).collect();
        w.sort_by(|a, b| (b.0 + b.1).total_cmp(&(a.0 + a.1)));
        let (p, q) = (w[0], w[1]);
        let (m1, m2) = if p.0 - p.1 >= q.0 - q.1 { (p, q) } else { (q, p) };
        Ok(PairModes {
            labels: [l1.clone(), l2.clone()],
            modes: [m1.2, m2.2],
            weights: [m1.0 + m1.1, m2.0 + m2.1],
            mixing: [m1.0 / (m1.0 + m1.1).max(f64::MIN_POSITIVE), m2.0 / (m2.0 + m2.1).max(f64::MIN_POSITIVE)],
        })
    }

    /// `|ε₁ − ε₂|` folded, GHz.
    pub fn pair_gap(&self, pair: &PairModes) -> f64 {
        fold(self.quasienergies[pair.modes[0]] - self.quasienergies[pair.modes[1]], self.omega_d).abs()
    }

    /// Two-level coupling `gap·√(p(1−p))` from the gap and the mixing
    /// fraction `p`; equals half the gap on resonance and is insensitive
    /// to a residual detuning. GHz.
    pub fn pair_coupling(&self, pair: &PairModes) -> f64 {
        let s: f64 = pair.mixing.iter().map(|&p| (p * (1.0 - p)).max(0.0).sqrt()).sum::<f64>() * 0.5;
        self.pair_gap(pair) * s
    }

    /// `ε₁ + ε₂` unfolded against `reference_sum`, GHz.
    pub fn pair_sum(&self, pair: &PairModes, reference_sum: f64) -> f64 {
        let s = self.quasienergies[pair.modes[0]] + self.quasienergies[pair.modes[1]];
        reference_sum + fold(s - reference_sum, self.omega_d)
    }

    pub fn pair_is_tracked(&self, pair: &PairModes) -> bool {
        pair.weights.iter().all(|&w| w >= self.overlap_threshold)
    }
}

/// Eigen-decomposition of `U(T,0)` with labels from `reference`. A label
/// whose best available mode has squared overlap below `threshold` is kept
/// but marked excluded.
pub fn floquet_decompose(prop: &Propagation, reference: &StaticReference, threshold: f64) -> FloquetSolution {
    let omega_d = prop.omega_d;
    let (vals, modes) = eig_unitary(prop.u.as_ref());
    let quasienergies: Vec<f64> = vals.iter().map(|l| fold(-l.arg() * omega_d / TWO_PI, omega_d)).collect();
    let ov = reference.vectors.adjoint() * &modes;
    let n = quasienergies.len();
    let mut best: Vec<(usize, usize, f64)> = Vec::new();
    for (k, l) in reference.state_labels.iter().enumerate() {
        if l.is_some() {
            let (j, w) = (0..n).map(|j| (j, ov[(k, j)].norm_sqr())).fold((0, -1.0), |m, x| if x.1 > m.1 { x } else { m });
            best.push((k, j, w));
        }
    }
    best.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    let mut claimed = vec![false; n];
    let mut labels = BTreeMap::new();
    let mut excluded = BTreeSet::new();
    for (k, j0, _) in best {
        let j = if !claimed[j0] {
            j0
        } else {
            match (0..n).filter(|&j| !claimed[j]).max_by(|&a, &b| ov[(k, a)].norm_sqr().total_cmp(&ov[(k, b)].norm_sqr())) {
                Some(j) => j,
                None => continue,
            }
        };
        claimed[j] = true;
        let overlap = ov[(k, j)].norm_sqr().min(1.0);
        let e = reference.energies[k];
        let unfold = ((e - quasienergies[j]) / omega_d).round() as i64;
        let label = reference.state_labels[k].clone().expect("labeled state");
        if overlap < threshold {
            excluded.insert(label.clone());
        }
        labels.insert(label, LabelAssignment { index: j, overlap, unfold });
    }
    FloquetSolution {
        omega_d,
        period: prop.period,
        quasienergies,
        modes_t0: modes,
        labels,
        excluded,
        overlap_threshold: threshold,
        grid: prop.grid.clone(),
    }
}

/// Propagate and decompose in one call.
pub fn floquet_solve(
    h: &HarmonicHamiltonian,
    omega_d: f64,
    reference: &StaticReference,
    opts: &PropagatorOptions,
    threshold: f64,
) -> Result<FloquetSolution> {
    let prop = propagate_one_period(h, omega_d, opts)?;
    Ok(floquet_decompose(&prop, reference, threshold))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationOptions {
    /// Search window `guess ± half_window`, GHz.
    pub half_window: f64,
    /// Tolerance on `ω_d*`, GHz.
    pub tol: f64,
    pub max_iter: usize,
    pub overlap_threshold: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self { half_window: 0.05, tol: 1e-6, max_iter: 100, overlap_threshold: DEFAULT_OVERLAP_THRESHOLD }
    }
}

#[derive(Clone, Debug)]
pub struct Calibration {
    pub omega_d_star: f64,
    /// Minimal labeled gap `|ε₁ − ε₂|`, GHz.
    pub min_gap: f64,
    pub evaluations: usize,
    pub pair: PairModes,
    pub solution: FloquetSolution,
}

/// Drive frequency minimizing the quasienergy gap of the pair `(l1, l2)`.
/// The default guess is the static splitting `|E_l1 − E_l2|`.
pub fn calibrate_drive_frequency(
    h: &HarmonicHamiltonian,
    reference: &StaticReference,
    pair: (&Label, &Label),
    guess: Option<f64>,
    prop_opts: &PropagatorOptions,
    opts: &CalibrationOptions,
) -> Result<Calibration> {
    let (l1, l2) = pair;
    let w0 = match guess {
        Some(g) => g,
        None => (reference.energy(l1)? - reference.energy(l2)?).abs(),
    };
    let (lo, hi) = (w0 - opts.half_window, w0 + opts.half_window);
    if !(lo > 0.0) {
        return Err(invalid("half_window", "search window must stay at positive drive frequency"));
    }
    let search_opts = PropagatorOptions { retain_grid: false, ..*prop_opts };
    let mut failure = None;
    let gap2 = |w: f64| -> f64 {
        let r = floquet_solve(h, w, reference, &search_opts, opts.overlap_threshold)
            .and_then(|s| s.pair_modes(reference, l1, l2).map(|p| s.pair_gap(&p)));
        match r {
            Ok(g) => g * g,
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        }
    };
    let m = brent_min(gap2, lo, hi, opts.tol, opts.max_iter);
    if let Some(e) = failure {
        return Err(e);
    }
    if (m.x - lo).abs() < 2.0 * opts.tol || (hi - m.x).abs() < 2.0 * opts.tol {
        return Err(Error::BracketEdge { at: m.x });
    }
    let solution = floquet_solve(h, m.x, reference, prop_opts, opts.overlap_threshold)?;
    let pair = solution.pair_modes(reference, l1, l2)?;
    Ok(Calibration {
        omega_d_star: m.x,
        min_gap: solution.pair_gap(&pair),
        evaluations: m.evaluations + 1,
        pair,
        solution,
    })
}

/// Stroboscopic populations of static eigenstates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RabiTrace {
    /// ns
    pub times: Vec<f64>,
    pub populations: BTreeMap<Label, Vec<f64>>,
}

/// Time-domain populations at `t = mT`, `m = 0..=n_periods`, starting in the
/// static eigenstate `initial`, using the one-period propagator assembled
/// from the retained grid segments.
pub fn rabi_crosscheck(
    prop: &Propagation,
    reference: &StaticReference,
    initial: &Label,
    observed: &[Label],
    n_periods: usize,
) -> Result<RabiTrace> {
    let grid = prop.grid.as_ref().ok_or(Error::GridNotRetained)?;
    let dim = prop.u.nrows();
    // U(T,0) = Π U(t_{i+1}, t_i), each segment U_{i+1} U_i†.
    let mut one_period = crate::linalg::identity(dim);
    for w in grid.windows(2) {
        let seg = &w[1] * w[0].adjoint();
        one_period = &seg * &one_period;
    }
    let i0 = reference.index(initial)?;
    let obs: Vec<(Label, usize)> = observed.iter().map(|l| reference.index(l).map(|i| (l.clone(), i))).collect::<Result<_>>()?;
    let mut psi: CMat = Mat::from_fn(dim, 1, |r, _| reference.vectors[(r, i0)]);
    let mut times = Vec::with_capacity(n_periods + 1);
    let mut populations: BTreeMap<Label, Vec<f64>> = obs.iter().map(|(l, _)| (l.clone(), Vec::new())).collect();
    for m in 0..=n_periods {
        times.push(m as f64 * prop.period);
        for (l, i) in &obs {
            let mut s = cx(0.0, 0.0);
            for r in 0..dim {
                s += reference.vectors[(r, *i)].conj() * psi[(r, 0)];
            }
            populations.get_mut(l).expect("observed label").push(s.norm_sqr());
        }
        psi = &one_period * &psi;
    }
    Ok(RabiTrace { times, populations })
}

/// `|φ_α(t_i)⟩ = e^{+iε_α t_i} U(t_i,0)|φ_α(0)⟩` for the requested mode
/// indices; one `dim × indices.len()` matrix per grid point.
pub fn floquet_modes_on_grid(solution: &FloquetSolution, indices: &[usize]) -> Result<Vec<CMat>> {
    let grid = solution.grid.as_ref().ok_or(Error::GridNotRetained)?;
    let dim = solution.modes_t0.nrows();
    let phi0 = Mat::from_fn(dim, indices.len(), |r, c| solution.modes_t0[(r, indices[c])]);
    let g = grid.len() - 1;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let t = solution.period * i as f64 / g as f64;
            let m = u * &phi0;
            Mat::from_fn(dim, indices.len(), |r, c| {
                let ph = ang(solution.quasienergies[indices[c]]) * t;
                m[(r, c)] * cx(ph.cos(), ph.sin())
            })
        })
        .collect())
}
