//! Gate observables, synthetic two-tone spectroscopy and parameter sweeps.

use std::ops::RangeInclusive;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::analytics::{circuit_first_order, toy_bessel_gate_rate, toy_first_order, toy_second_order_chi};
use crate::circuit::{build_circuit_hamiltonian_with, build_toy_hamiltonian, rwa_strip, BuildOptions, HarmonicHamiltonian};
use crate::config::{AxisName, DriveFrequency, RunConfig, System};
use crate::error::{invalid, Error, Result};
use crate::floquet::{
    calibrate_drive_frequency, floquet_modes_on_grid, floquet_solve, static_eigensolve, walsh_labels, FloquetSolution, Label,
    StaticReference,
};
use crate::fock::{FockLayout, OperatorMatrix};
use crate::linalg::cx;
use crate::normal_modes::{drive_dependent_basis, toy_normal_modes};
use crate::units::TWO_PI;

/// Half the labeled avoided-crossing gap of the pair, GHz.
pub fn gate_amplitude(solution: &FloquetSolution, reference: &StaticReference, pair: (&Label, &Label)) -> Result<f64> {
    let p = solution.pair_modes(reference, pair.0, pair.1)?;
    if !solution.pair_is_tracked(&p) {
        return Err(Error::LabelMissing(format!("{}/{} (excluded)", pair.0, pair.1)));
    }
    Ok(solution.pair_coupling(&p))
}

/// Walsh combination `ε̃_110 − ε̃_100 − ε̃_010 + ε̃_000`. The single-excitation
/// pair enters through its two-mode manifold so the value stays defined on
/// resonance, where the individual labels hybridize.
pub fn dynamical_cross_kerr(solution: &FloquetSolution, reference: &StaticReference) -> Result<f64> {
    let [l000, l100, l010, l110] = walsh_labels();
    let p = solution.pair_modes(reference, &l100, &l010)?;
    if !solution.pair_is_tracked(&p) {
        return Err(Error::LabelMissing("100/010 (excluded)".into()));
    }
    let pair = solution.pair_sum(&p, reference.energy(&l100)? + reference.energy(&l010)?);
    Ok(solution.unfolded(&l110)? - pair + solution.unfolded(&l000)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectroscopyPoint {
    pub alpha: Label,
    pub beta: Label,
    pub k: i64,
    /// `ε̃_α − ε̃_β + kω_d`, GHz.
    pub delta: f64,
    /// `|X_αβk|`
    pub weight: f64,
    /// Either label is in the excluded set.
    pub excluded: bool,
}

/// Fourier components `X_αβk = (1/T)∫dt e^{ikω_d t}⟨φ_β(t)|X|φ_α(t)⟩` by the
/// trapezoid rule on the retained grid, for all ordered pairs `α ≠ β` of
/// `labels`. Unfolded labels shift the harmonic index by `m_α − m_β`.
pub fn two_tone_spectrum(
    solution: &FloquetSolution,
    probe: &OperatorMatrix,
    labels: &[Label],
    k_range: RangeInclusive<i64>,
) -> Result<Vec<SpectroscopyPoint>> {
    let assigned: Vec<_> = labels
        .iter()
        .map(|l| solution.labels.get(l).copied().ok_or_else(|| Error::LabelMissing(l.to_string())))
        .collect::<Result<_>>()?;
    let idx: Vec<usize> = assigned.iter().map(|a| a.index).collect();
    let modes = floquet_modes_on_grid(solution, &idx)?;
    let g = modes.len() - 1;
    let n = labels.len();
    // Y_i = Φ(t_i)† X Φ(t_i); the closing point equals the first and is dropped.
    let ys: Vec<_> = modes[..g].iter().map(|phi| phi.adjoint() * (&probe.matrix * phi)).collect();
    let (k_lo, k_hi) = (*k_range.start(), *k_range.end());
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let (ma, mb) = (assigned[a].unfold, assigned[b].unfold);
            let ea = solution.quasienergies[assigned[a].index] + ma as f64 * solution.omega_d;
            let eb = solution.quasienergies[assigned[b].index] + mb as f64 * solution.omega_d;
            let excluded = solution.excluded.contains(&labels[a]) || solution.excluded.contains(&labels[b]);
            for k in k_lo..=k_hi {
                let kk = (k + ma - mb) as f64;
                let mut s = cx(0.0, 0.0);
                for (i, y) in ys.iter().enumerate() {
                    let ph = TWO_PI * kk * i as f64 / g as f64;
                    s += y[(b, a)] * cx(ph.cos(), ph.sin());
                }
                out.push(SpectroscopyPoint {
                    alpha: labels[a].clone(),
                    beta: labels[b].clone(),
                    k,
                    delta: ea - eb + k as f64 * solution.omega_d,
                    weight: s.norm() / g as f64,
                    excluded,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Analytic,
    Floquet,
    #[default]
    Both,
}

impl Mode {
    pub fn floquet(&self) -> bool {
        matches!(self, Mode::Floquet | Mode::Both)
    }

    pub fn analytic(&self) -> bool {
        matches!(self, Mode::Analytic | Mode::Both)
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let (a, f) = (parts.contains(&"analytic"), parts.contains(&"floquet"));
        if parts.contains(&"both") || (a && f) {
            return Ok(Mode::Both);
        }
        match (a, f, parts.len()) {
            (true, false, 1) => Ok(Mode::Analytic),
            (false, true, 1) => Ok(Mode::Floquet),
            _ => Err(invalid("mode", format!("expected analytic, floquet or both, got `{s}`"))),
        }
    }
}

/// One sweep point. Frequencies in GHz; unavailable values are NaN.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub index: usize,
    pub primary: f64,
    pub secondary: Option<f64>,
    pub omega_d: f64,
    pub j_floquet: f64,
    pub chi_floquet: f64,
    /// Walsh combination of the undriven eigenenergies.
    pub chi_static: f64,
    /// `ε̃_100 + ε̃_010 − E_100 − E_010`.
    pub stark_pair: f64,
    /// `ε̃_110 − E_110`.
    pub stark_110: f64,
    /// Smallest squared overlap among the tracked Walsh states.
    pub min_overlap: f64,
    pub j1: f64,
    pub j2_bessel: f64,
    pub chi1: f64,
    pub chi2: f64,
    pub excluded: bool,
    /// A second-order denominator is below the resonance tolerance.
    pub divergent: bool,
    pub error: Option<String>,
}

impl GateReport {
    fn empty(index: usize, primary: f64, secondary: Option<f64>) -> Self {
        let nan = f64::NAN;
        Self {
            index,
            primary,
            secondary,
            omega_d: nan,
            j_floquet: nan,
            chi_floquet: nan,
            chi_static: nan,
            stark_pair: nan,
            stark_110: nan,
            min_overlap: nan,
            j1: nan,
            j2_bessel: nan,
            chi1: nan,
            chi2: nan,
            excluded: false,
            divergent: false,
            error: None,
        }
    }

    /// Best available cross-Kerr: Floquet, else second order, else first order.
    pub fn chi(&self) -> f64 {
        [self.chi_floquet, self.chi2, self.chi1].into_iter().find(|x| x.is_finite()).unwrap_or(f64::NAN)
    }

    pub fn j(&self) -> f64 {
        [self.j_floquet, self.j2_bessel, self.j1.abs()].into_iter().find(|x| x.is_finite()).unwrap_or(f64::NAN)
    }
}

/// Hamiltonian, static reference and drive policy at one point.
#[derive(Clone, Debug)]
pub struct PointContext {
    pub system: System,
    pub policy: DriveFrequency,
    pub layout: FockLayout,
    pub hamiltonian: HarmonicHamiltonian,
    pub reference: StaticReference,
}

pub fn system_hamiltonian(system: &System, cfg: &RunConfig, layout: &FockLayout) -> Result<HarmonicHamiltonian> {
    let h = match system {
        System::Circuit { params, drive } => {
            let opts = BuildOptions { displace: true, max_order: cfg.numerics.max_order };
            build_circuit_hamiltonian_with(params, drive, layout, &opts)?
        }
        System::Toy(t) => build_toy_hamiltonian(t, layout)?,
    };
    Ok(if cfg.numerics.rwa_strip { rwa_strip(&h) } else { h })
}

/// The labeling reference is the time-averaged Hamiltonian: for the circuit
/// the bare basis itself depends on the drive, so only the static part of the
/// same Hamiltonian shares its basis.
pub fn prepare_point(cfg: &RunConfig, values: &[(AxisName, f64)]) -> Result<PointContext> {
    let (system, policy) = cfg.system_at(values)?;
    let layout = FockLayout::new(&cfg.numerics.dims)?;
    let hamiltonian = system_hamiltonian(&system, cfg, &layout)?;
    let reference = static_eigensolve(&hamiltonian.static_part)?;
    Ok(PointContext { system, policy, layout, hamiltonian, reference })
}

/// Floquet solution at the point's drive frequency, with the minimal gap when calibrated.
pub fn solve_point(ctx: &PointContext, cfg: &RunConfig, retain_grid: bool) -> Result<(FloquetSolution, Option<f64>)> {
    let mut prop = cfg.numerics.propagator();
    prop.retain_grid = retain_grid;
    let [l1, l2] = &cfg.drive.pair;
    let thr = cfg.numerics.overlap_threshold;
    match ctx.policy {
        DriveFrequency::Calibrate => {
            let c = calibrate_drive_frequency(&ctx.hamiltonian, &ctx.reference, (l1, l2), None, &prop, &cfg.numerics.calibration())?;
            Ok((c.solution, Some(c.min_gap)))
        }
        DriveFrequency::Static => {
            let w = (ctx.reference.energy(l1)? - ctx.reference.energy(l2)?).abs();
            Ok((floquet_solve(&ctx.hamiltonian, w, &ctx.reference, &prop, thr)?, None))
        }
        DriveFrequency::Fixed(w) => Ok((floquet_solve(&ctx.hamiltonian, w, &ctx.reference, &prop, thr)?, None)),
    }
}

fn static_chi(ctx: &PointContext, cfg: &RunConfig) -> Result<f64> {
    match &ctx.system {
        System::Toy(_) => ctx.reference.walsh_chi(),
        System::Circuit { params, drive } => {
            let undriven = System::Circuit { params: params.clone(), drive: crate::circuit::DriveSpec { delta_phi: 0.0, ..*drive } };
            let h = system_hamiltonian(&undriven, cfg, &ctx.layout)?;
            static_eigensolve(&h.static_part)?.walsh_chi()
        }
    }
}

fn fill_analytics(r: &mut GateReport, ctx: &PointContext, cfg: &RunConfig, omega_d: Option<f64>) -> Result<()> {
    match &ctx.system {
        System::Toy(t) => {
            let nm = toy_normal_modes(t)?;
            let first = toy_first_order(&nm, t);
            let second = toy_second_order_chi(&nm, t, cfg.numerics.den_tol);
            let wd = omega_d.unwrap_or((nm.frequencies[0] - nm.frequencies[1]).abs());
            r.j1 = first.j_ab;
            r.chi1 = first.chi_ab;
            r.chi2 = first.chi_ab + second.chi_dressed_start;
            r.j2_bessel = toy_bessel_gate_rate(&nm, t, wd).abs();
            r.divergent = second.divergent;
        }
        System::Circuit { params, drive } => {
            let nm = drive_dependent_basis(params, drive)?;
            let c = circuit_first_order(&nm, params, drive)?;
            r.j1 = c.j_ab;
            r.chi1 = c.chi_ab;
        }
    }
    Ok(())
}

fn fill_floquet(r: &mut GateReport, ctx: &PointContext, cfg: &RunConfig) -> Result<()> {
    let (sol, gap) = solve_point(ctx, cfg, false)?;
    let [l1, l2] = &cfg.drive.pair;
    let [l000, l100, l010, l110] = walsh_labels();
    r.omega_d = sol.omega_d;
    let pair = sol.pair_modes(&ctx.reference, l1, l2)?;
    let mut min_ov = pair.weights[0].min(pair.weights[1]);
    for l in [&l000, &l110] {
        min_ov = min_ov.min(sol.labels.get(l).map_or(0.0, |a| a.overlap));
    }
    r.min_overlap = min_ov;
    r.excluded = !sol.pair_is_tracked(&pair) || !sol.is_tracked(&l000) || !sol.is_tracked(&l110);
    if sol.pair_is_tracked(&pair) {
        r.j_floquet = gap.map_or_else(|| sol.pair_coupling(&pair), |g| 0.5 * g);
    }
    if let Ok(chi) = dynamical_cross_kerr(&sol, &ctx.reference) {
        r.chi_floquet = chi;
    }
    let e_pair = ctx.reference.energy(&l100)? + ctx.reference.energy(&l010)?;
    if let Ok(p) = sol.pair_modes(&ctx.reference, &l100, &l010) {
        if sol.pair_is_tracked(&p) {
            r.stark_pair = sol.pair_sum(&p, e_pair) - e_pair;
        }
    }
    if let Ok(e) = sol.unfolded(&l110) {
        r.stark_110 = e - ctx.reference.energy(&l110)?;
    }
    Ok(())
}

/// Evaluate one grid point; failures are recorded in the report.
pub fn evaluate_point(cfg: &RunConfig, index: usize, values: &[(AxisName, f64)], mode: Mode) -> GateReport {
    let primary = values.first().map_or(f64::NAN, |v| v.1);
    let secondary = values.get(1).map(|v| v.1);
    let mut r = GateReport::empty(index, primary, secondary);
    let ctx = match prepare_point(cfg, values) {
        Ok(c) => c,
        Err(e) => {
            r.error = Some(e.to_string());
            r.excluded = true;
            return r;
        }
    };
    let mut errors = Vec::new();
    match static_chi(&ctx, cfg) {
        Ok(c) => r.chi_static = c,
        Err(e) => errors.push(e.to_string()),
    }
    if mode.floquet() {
        if let Err(e) = fill_floquet(&mut r, &ctx, cfg) {
            errors.push(e.to_string());
            r.excluded = true;
        }
    }
    if mode.analytic() {
        let wd = r.omega_d.is_finite().then_some(r.omega_d);
        if let Err(e) = fill_analytics(&mut r, &ctx, cfg, wd) {
            errors.push(e.to_string());
        }
    }
    if !errors.is_empty() {
        r.error = Some(errors.join("; "));
    }
    r
}

/// Sweep grid as `(index, [(axis, value)...])`, primary axis outermost.
pub fn sweep_points(cfg: &RunConfig) -> Result<Vec<(usize, Vec<(AxisName, f64)>)>> {
    let Some(s) = &cfg.sweep else {
        return Ok(vec![(0, Vec::new())]);
    };
    let prim = s.primary().grid()?;
    let sec = match &s.second {
        Some(a) => Some((a.axis, a.grid()?)),
        None => None,
    };
    let mut out = Vec::new();
    for &p in &prim {
        match &sec {
            Some((axis, vals)) => {
                for &v in vals {
                    out.push((out.len(), vec![(s.axis, p), (*axis, v)]));
                }
            }
            None => out.push((out.len(), vec![(s.axis, p)])),
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Worker pool; `None` uses the global pool. Falls back to sequential
    /// when the `parallel` feature is off.
    Parallel { threads: Option<usize> },
}

pub fn map_points<T, F>(points: &[(usize, Vec<(AxisName, f64)>)], exec: Execution, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &[(AxisName, f64)]) -> T + Sync + Send,
{
    match exec {
        Execution::Sequential => Ok(points.iter().map(|(i, v)| f(*i, v)).collect()),
        #[cfg(feature = "parallel")]
        Execution::Parallel { threads } => {
            use rayon::prelude::*;
            let work = || points.par_iter().map(|(i, v)| f(*i, v)).collect();
            match threads {
                Some(n) => {
                    let pool = rayon::ThreadPoolBuilder::new()
                        .num_threads(n)
                        .build()
                        .map_err(|e| invalid("threads", e.to_string()))?;
                    Ok(pool.install(work))
                }
                None => Ok(work()),
            }
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel { .. } => Ok(points.iter().map(|(i, v)| f(*i, v)).collect()),
    }
}

/// Every grid point of the configured sweep, ordered by grid index.
pub fn sweep(cfg: &RunConfig, mode: Mode, exec: Execution) -> Result<Vec<GateReport>> {
    cfg.validate()?;
    let points = sweep_points(cfg)?;
    let mut out = map_points(&points, exec, |i, v| evaluate_point(cfg, i, v, mode))?;
    out.sort_by_key(|r| r.index);
    Ok(out)
}

/// Spectroscopy lines of one point, with the point's key values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectroscopyRow {
    pub index: usize,
    pub primary: f64,
    pub secondary: Option<f64>,
    pub omega_d: f64,
    pub point: SpectroscopyPoint,
}

pub fn spectroscopy_at(cfg: &RunConfig, index: usize, values: &[(AxisName, f64)]) -> Result<Vec<SpectroscopyRow>> {
    let ctx = prepare_point(cfg, values)?;
    let (sol, _) = solve_point(&ctx, cfg, true)?;
    let eta = match &ctx.system {
        System::Circuit { params, drive } => crate::circuit::solve_eta(params, drive)?[cfg.spectroscopy.probe_mode.min(2)],
        System::Toy(_) => 1.0,
    };
    let probe = crate::circuit::charge_operator(&ctx.layout, cfg.spectroscopy.probe_mode, eta)?;
    let labels: Vec<Label> = cfg.spectroscopy.labels.iter().filter(|l| sol.labels.contains_key(l)).cloned().collect();
    let pts = two_tone_spectrum(&sol, &probe, &labels, cfg.spectroscopy.k_min..=cfg.spectroscopy.k_max)?;
    Ok(pts
        .into_iter()
        .map(|point| SpectroscopyRow {
            index,
            primary: values.first().map_or(f64::NAN, |v| v.1),
            secondary: values.get(1).map(|v| v.1),
            omega_d: sol.omega_d,
            point,
        })
        .collect())
}

/// Spectroscopy over the sweep grid; failed points are skipped and returned
/// as `(index, message)`.
pub fn spectroscopy_sweep(cfg: &RunConfig, exec: Execution) -> Result<(Vec<SpectroscopyRow>, Vec<(usize, String)>)> {
    cfg.validate()?;
    let points = sweep_points(cfg)?;
    let results = map_points(&points, exec, |i, v| (i, spectroscopy_at(cfg, i, v)))?;
    let (mut rows, mut failed) = (Vec::new(), Vec::new());
    for (i, r) in results {
        match r {
            Ok(mut v) => rows.append(&mut v),
            Err(e) => failed.push((i, e.to_string())),
        }
    }
    rows.sort_by_key(|r| r.index);
    failed.sort();
    Ok((rows, failed))
}

/// Zero of χ_ab along the control axis within one amplitude slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiZero {
    pub slice: f64,
    pub control: f64,
    pub j_at_zero: f64,
    /// χ re-evaluated at `control`.
    pub chi_residual: f64,
    pub refined: bool,
    /// The refined |χ| exceeds both bracket values: a sign change through
    /// a pole rather than a zero.
    pub pole: bool,
    /// `∂χ/∂(slice)` at the zero, from the neighbouring slices; NaN when unavailable.
    pub dchi_dslice: f64,
    pub sweet_spot: bool,
}

/// Continuous `(χ, J)` run of one slice between excluded or failed points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JChiTrace {
    pub slice: f64,
    pub region: usize,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChiZeroCurve {
    pub zeros: Vec<ChiZero>,
    pub omitted: Vec<(f64, String)>,
    pub traces: Vec<JChiTrace>,
}

fn slices(reports: &[GateReport]) -> Vec<(f64, Vec<&GateReport>)> {
    let mut keys: Vec<f64> = reports.iter().map(|r| r.secondary.unwrap_or(f64::NAN)).collect();
    keys.sort_by(|a, b| a.total_cmp(b));
    keys.dedup_by(|a, b| a.to_bits() == b.to_bits());
    keys.into_iter()
        .map(|k| {
            let mut v: Vec<&GateReport> =
                reports.iter().filter(|r| r.secondary.unwrap_or(f64::NAN).to_bits() == k.to_bits()).collect();
            v.sort_by(|a, b| a.primary.total_cmp(&b.primary));
            (k, v)
        })
        .collect()
}

fn interp_chi(slice: &[&GateReport], x: f64) -> Option<f64> {
    slice.windows(2).find_map(|w| {
        let (a, b) = (w[0], w[1]);
        if a.primary <= x && x <= b.primary && !a.excluded && !b.excluded && a.chi().is_finite() && b.chi().is_finite() {
            let s = (x - a.primary) / (b.primary - a.primary);
            Some(a.chi() + s * (b.chi() - a.chi()))
        } else {
            None
        }
    })
}

/// Per-slice roots of χ_ab along the primary axis, each refined by two
/// regula-falsi re-solves, plus the `J(χ)` traces of every slice.
pub fn chi_zero_curve(cfg: &RunConfig, reports: &[GateReport], mode: Mode) -> Result<ChiZeroCurve> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| invalid("sweep", "chi-zero needs a sweep section"))?;
    let slice_axis = sweep.second.as_ref().map(|s| s.axis);
    let sl = slices(reports);
    let mut out = ChiZeroCurve::default();
    for (si, (key, pts)) in sl.iter().enumerate() {
        let mut region = 0;
        let mut cur = Vec::new();
        for r in pts {
            if r.excluded || !r.chi().is_finite() || !r.j().is_finite() {
                if !cur.is_empty() {
                    out.traces.push(JChiTrace { slice: *key, region, points: std::mem::take(&mut cur) });
                    region += 1;
                }
                continue;
            }
            cur.push((r.chi(), r.j()));
        }
        if !cur.is_empty() {
            out.traces.push(JChiTrace { slice: *key, region, points: cur });
        }

        let mut found = false;
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if a.excluded || b.excluded {
                continue;
            }
            let (ca, cb) = (a.chi(), b.chi());
            if !(ca.is_finite() && cb.is_finite()) || ca.signum() == cb.signum() {
                continue;
            }
            found = true;
            let values_at = |x: f64| {
                let mut v = vec![(sweep.axis, x)];
                if let (Some(ax), true) = (slice_axis, key.is_finite()) {
                    v.push((ax, *key));
                }
                v
            };
            let (mut lo, mut hi, mut flo, mut fhi) = (a.primary, b.primary, ca, cb);
            let mut x = lo - flo * (hi - lo) / (fhi - flo);
            let mut last: Option<GateReport> = None;
            for _ in 0..2 {
                let r = evaluate_point(cfg, usize::MAX, &values_at(x), mode);
                let c = r.chi();
                if !c.is_finite() || r.excluded {
                    break;
                }
                if c.signum() == flo.signum() {
                    lo = x;
                    flo = c;
                } else {
                    hi = x;
                    fhi = c;
                }
                last = Some(r);
                x = lo - flo * (hi - lo) / (fhi - flo);
            }
            let refined = last.is_some();
            let pole = match &last {
                Some(r) => r.chi().abs() > ca.abs().max(cb.abs()),
                None => false,
            };
            let (j, res) = match &last {
                Some(r) => (r.j(), r.chi()),
                None => {
                    let s = (x - a.primary) / (b.primary - a.primary);
                    (a.j() + s * (b.j() - a.j()), f64::NAN)
                }
            };
            let d = {
                let prev = si.checked_sub(1).and_then(|p| sl.get(p));
                let next = sl.get(si + 1);
                let at = |s: Option<&(f64, Vec<&GateReport>)>| s.and_then(|(k, v)| interp_chi(v, x).map(|c| (*k, c)));
                match (at(prev), at(next)) {
                    (Some((k0, c0)), Some((k1, c1))) => (c1 - c0) / (k1 - k0),
                    (Some((k0, c0)), None) => -c0 / (key - k0),
                    (None, Some((k1, c1))) => c1 / (k1 - key),
                    _ => f64::NAN,
                }
            };
            out.zeros.push(ChiZero {
                slice: *key,
                control: x,
                j_at_zero: j,
                chi_residual: res,
                refined,
                pole,
                dchi_dslice: d,
                sweet_spot: d.abs() < sweep.sweet_spot_tol,
            });
        }
        if !found {
            out.omitted.push((*key, "no sign change of chi along the control axis".into()));
        }
    }
    Ok(out)
}

/// Calibrated drive frequency of one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub index: usize,
    pub primary: f64,
    pub secondary: Option<f64>,
    pub omega_d_star: f64,
    pub min_gap: f64,
    /// Half the minimal gap.
    pub j: f64,
    pub evaluations: usize,
}

fn calibrate_ctx(ctx: &PointContext, cfg: &RunConfig, retain_grid: bool) -> Result<crate::floquet::Calibration> {
    let mut prop = cfg.numerics.propagator();
    prop.retain_grid = retain_grid;
    let [l1, l2] = &cfg.drive.pair;
    // A fixed frequency in the config serves as the search centre.
    let guess = match ctx.policy {
        DriveFrequency::Fixed(w) => Some(w),
        _ => None,
    };
    calibrate_drive_frequency(&ctx.hamiltonian, &ctx.reference, (l1, l2), guess, &prop, &cfg.numerics.calibration())
}

pub fn calibrate_at(cfg: &RunConfig, index: usize, values: &[(AxisName, f64)]) -> Result<CalibrationRow> {
    let ctx = prepare_point(cfg, values)?;
    let c = calibrate_ctx(&ctx, cfg, false)?;
    Ok(CalibrationRow {
        index,
        primary: values.first().map_or(f64::NAN, |v| v.1),
        secondary: values.get(1).map(|v| v.1),
        omega_d_star: c.omega_d_star,
        min_gap: c.min_gap,
        j: 0.5 * c.min_gap,
        evaluations: c.evaluations,
    })
}

/// Calibration over the sweep grid; failed points are returned as `(index, message)`.
pub fn calibrate_sweep(cfg: &RunConfig, exec: Execution) -> Result<(Vec<CalibrationRow>, Vec<(usize, String)>)> {
    cfg.validate()?;
    let points = sweep_points(cfg)?;
    let results = map_points(&points, exec, |i, v| (i, calibrate_at(cfg, i, v)))?;
    let (mut rows, mut failed) = (Vec::new(), Vec::new());
    for (i, r) in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => failed.push((i, e.to_string())),
        }
    }
    rows.sort_by_key(|r| r.index);
    failed.sort();
    Ok((rows, failed))
}

/// Stroboscopic swap between the drive pair at the calibrated frequency,
/// fitted to `sin²(2πJt)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RabiCheck {
    pub omega_d_star: f64,
    /// Half the minimal gap, GHz.
    pub j_gap: f64,
    /// Least-squares `J` of the transferred population, GHz.
    pub j_fit: f64,
    pub max_deviation: f64,
    pub n_periods: usize,
    pub trace: crate::floquet::RabiTrace,
}

/// Rabi cross-check of one point over one full swap, `⌈ω_d*/(2J)⌉` periods
/// unless `n_periods` is given.
pub fn rabi_check_at(cfg: &RunConfig, values: &[(AxisName, f64)], n_periods: Option<usize>) -> Result<RabiCheck> {
    let ctx = prepare_point(cfg, values)?;
    let c = calibrate_ctx(&ctx, cfg, false)?;
    let j_gap = 0.5 * c.min_gap;
    if !(j_gap > 0.0) {
        return Err(invalid("pair", "the calibrated gap vanishes"));
    }
    let mut prop = cfg.numerics.propagator();
    prop.retain_grid = true;
    let p = crate::floquet::propagate_one_period(&ctx.hamiltonian, c.omega_d_star, &prop)?;
    let n = n_periods.unwrap_or((c.omega_d_star / (2.0 * j_gap)).ceil() as usize);
    let [l1, l2] = &cfg.drive.pair;
    let trace = crate::floquet::rabi_crosscheck(&p, &ctx.reference, l1, &[l1.clone(), l2.clone()], n)?;
    let pops = &trace.populations[l2];
    let model = |j: f64, t: f64| (TWO_PI * j * t).sin().powi(2);
    let sse = |j: f64| trace.times.iter().zip(pops).map(|(&t, &y)| (y - model(j, t)).powi(2)).sum::<f64>();
    let j_fit = crate::special::brent_min(sse, 0.9 * j_gap, 1.1 * j_gap, 1e-12, 200).x;
    let max_deviation = trace.times.iter().zip(pops).map(|(&t, &y)| (y - model(j_fit, t)).abs()).fold(0.0, f64::max);
    Ok(RabiCheck { omega_d_star: c.omega_d_star, j_gap, j_fit, max_deviation, n_periods: n, trace })
}

/// Dense static χ_ab scan helper used for cross-checks: `(control, χ)`.
pub fn static_chi_scan(cfg: &RunConfig, axis: AxisName, values: &[f64]) -> Result<Vec<(f64, f64)>> {
    values
        .iter()
        .map(|&x| {
            let ctx = prepare_point(cfg, &[(axis, x)])?;
            Ok((x, static_chi(&ctx, cfg)?))
        })
        .collect()
}

/// Number operator `a†a` of one mode, usable as a spectroscopy probe.
pub fn number_probe(layout: &FockLayout, mode: usize) -> Result<OperatorMatrix> {
    let a = crate::fock::annihilator(layout, mode)?;
    let m: Mat<faer::c64> = a.matrix.adjoint() * &a.matrix;
    Ok(OperatorMatrix::new(layout.clone(), m, crate::fock::Units::Dimensionless, crate::fock::OperatorKind::Observable))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::ToyParams;
    use crate::config::{DriveConfig, NumericsConfig, SweepConfig};
    use crate::floquet::PropagatorOptions;

    fn toy_cfg(toy: ToyParams, dims: usize) -> RunConfig {
        RunConfig {
            circuit: None,
            toy: Some(toy),
            drive: DriveConfig::default(),
            numerics: NumericsConfig { dims: vec![dims; 3], ..Default::default() },
            sweep: None,
            spectroscopy: Default::default(),
            output: Default::default(),
        }
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("analytic,floquet".parse::<Mode>().unwrap(), Mode::Both);
        assert_eq!("floquet".parse::<Mode>().unwrap(), Mode::Floquet);
        assert!("exact".parse::<Mode>().is_err());
    }

    #[test]
    fn uncoupled_undriven_has_no_gate_and_no_cross_kerr() {
        let toy = ToyParams { g_ab: 0.0, g_bc: 0.0, ..ToyParams::reference(4.6, 0.0) };
        let layout = FockLayout::new(&[3, 3, 3]).unwrap();
        let h = build_toy_hamiltonian(&toy, &layout).unwrap();
        let r = static_eigensolve(&h.static_part).unwrap();
        let s = floquet_solve(&h, 1.5, &r, &PropagatorOptions::default(), 0.5).unwrap();
        let (l1, l2) = (Label::from([1, 0, 0]), Label::from([0, 1, 0]));
        assert!(gate_amplitude(&s, &r, (&l1, &l2)).unwrap().abs() < 1e-9);
        assert!(dynamical_cross_kerr(&s, &r).unwrap().abs() < 1e-9);
    }

    #[test]
    fn walsh_at_zero_drive_equals_static() {
        let toy = ToyParams::reference(4.7, 0.0);
        let layout = FockLayout::new(&[4, 4, 4]).unwrap();
        let h = build_toy_hamiltonian(&toy, &layout).unwrap();
        let r = static_eigensolve(&h.static_part).unwrap();
        let s = floquet_solve(&h, 1.37, &r, &PropagatorOptions::default(), 0.5).unwrap();
        assert!((dynamical_cross_kerr(&s, &r).unwrap() - r.walsh_chi().unwrap()).abs() < 1e-10);
    }

    #[test]
    fn undriven_spectrum_reduces_to_static_matrix_elements() {
        let toy = ToyParams::reference(4.7, 0.0);
        let layout = FockLayout::new(&[3, 3, 3]).unwrap();
        let h = build_toy_hamiltonian(&toy, &layout).unwrap();
        let r = static_eigensolve(&h.static_part).unwrap();
        let opts = PropagatorOptions { grid_points: 32, ..Default::default() }.with_grid();
        let s = floquet_solve(&h, 1.1, &r, &opts, 0.5).unwrap();
        let probe = number_probe(&layout, 2).unwrap();
        let labels: Vec<Label> = [[0, 0, 1], [1, 0, 0], [0, 1, 0]].into_iter().map(Label::from).collect();
        let pts = two_tone_spectrum(&s, &probe, &labels, -2..=2).unwrap();
        for p in &pts {
            let (ia, ib) = (r.index(&p.alpha).unwrap(), r.index(&p.beta).unwrap());
            let mut m = cx(0.0, 0.0);
            for i in 0..27 {
                for j in 0..27 {
                    m += r.vectors[(i, ib)].conj() * probe.matrix[(i, j)] * r.vectors[(j, ia)];
                }
            }
            let expect = if p.k == 0 { m.norm() } else { 0.0 };
            assert!((p.weight - expect).abs() < 1e-9, "{p:?}");
            let de = r.energy(&p.alpha).unwrap() - r.energy(&p.beta).unwrap() + p.k as f64 * 1.1;
            assert!((p.delta - de).abs() < 1e-9);
        }
    }

    #[test]
    fn single_point_sweep_matches_direct_evaluation() {
        let mut cfg = toy_cfg(ToyParams::reference(4.7, 0.3), 3);
        cfg.numerics.tol = 1e-7;
        cfg.sweep = Some(SweepConfig {
            axis: AxisName::OmegaC,
            start: None,
            stop: None,
            count: None,
            values: Some(vec![4.7]),
            second: None,
            sweet_spot_tol: 1e-3,
        });
        let table = sweep(&cfg, Mode::Both, Execution::Sequential).unwrap();
        assert_eq!(table.len(), 1);
        let direct = evaluate_point(&cfg, 0, &[(AxisName::OmegaC, 4.7)], Mode::Both);
        assert_eq!(format!("{:?}", table[0]), format!("{direct:?}"));
        assert!(table[0].error.is_none(), "{:?}", table[0].error);
        assert!(table[0].j_floquet > 0.0);
    }

    #[test]
    fn failed_points_are_flagged_not_fatal() {
        let mut cfg = toy_cfg(ToyParams::reference(4.7, 0.3), 3);
        cfg.numerics.max_steps = 32;
        cfg.numerics.tol = 1e-14;
        cfg.drive.omega_d = DriveFrequency::Fixed(1.5);
        let r = evaluate_point(&cfg, 3, &[], Mode::Both);
        assert!(r.error.is_some());
        assert!(r.excluded);
        assert!(r.j_floquet.is_nan());
    }
}
