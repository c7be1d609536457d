//! Run configuration shared by the sweeps and the command-line front end.
//!
//! Exactly one of `circuit` / `toy` must be present. Frequencies in GHz,
//! fluxes in units of 2π.

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::circuit::{CircuitParams, DriveSpec, ToyParams};
use crate::error::{invalid, Result};
use crate::floquet::{CalibrationOptions, Integrator, Label, PropagatorOptions, DEFAULT_GRID_POINTS, DEFAULT_OVERLAP_THRESHOLD};
use crate::units::TWO_PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub circuit: Option<CircuitParams>,
    #[serde(default)]
    pub toy: Option<ToyParams>,
    #[serde(default)]
    pub drive: DriveConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub spectroscopy: SpectroscopyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// How the drive frequency is chosen at each point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DriveFrequency {
    /// Minimize the labeled quasienergy gap of the drive pair.
    Calibrate,
    /// Static splitting of the drive pair, no calibration.
    Static,
    Fixed(f64),
}

impl Default for DriveFrequency {
    fn default() -> Self {
        Self::Calibrate
    }
}

impl Serialize for DriveFrequency {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Calibrate => s.serialize_str("calibrate"),
            Self::Static => s.serialize_str("static"),
            Self::Fixed(w) => s.serialize_f64(*w),
        }
    }
}

impl<'de> Deserialize<'de> for DriveFrequency {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = DriveFrequency;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a frequency in GHz, \"calibrate\" or \"static\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Self::Value, E> {
                Ok(DriveFrequency::Fixed(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Self::Value, E> {
                Ok(DriveFrequency::Fixed(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Self::Value, E> {
                Ok(DriveFrequency::Fixed(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
                match v {
                    "calibrate" => Ok(DriveFrequency::Calibrate),
                    "static" => Ok(DriveFrequency::Static),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveConfig {
    pub phi_ext_bar_over_2pi: f64,
    /// Circuit flux-modulation amplitude.
    pub delta_phi_over_2pi: f64,
    /// Toy coupler-frequency modulation amplitude, GHz. Overrides `toy.delta`.
    pub delta: Option<f64>,
    pub omega_d: DriveFrequency,
    pub n_harmonics: usize,
    /// States exchanged by the gate.
    pub pair: [Label; 2],
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            phi_ext_bar_over_2pi: 0.0,
            delta_phi_over_2pi: 0.0,
            delta: None,
            omega_d: DriveFrequency::Calibrate,
            n_harmonics: 2,
            pair: [Label::from([1, 0, 0]), Label::from([0, 1, 0])],
        }
    }
}

impl DriveConfig {
    /// Circuit drive with a placeholder frequency; the propagator receives the
    /// actual one.
    pub fn circuit_drive(&self) -> DriveSpec {
        DriveSpec {
            phi_ext_bar: self.phi_ext_bar_over_2pi * TWO_PI,
            delta_phi: self.delta_phi_over_2pi * TWO_PI,
            omega_d: 1.0,
            n_harmonics: self.n_harmonics,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsConfig {
    pub dims: Vec<usize>,
    pub tol: f64,
    pub integrator: Integrator,
    pub min_steps: usize,
    pub max_steps: usize,
    pub grid_points: usize,
    pub overlap_threshold: f64,
    pub den_tol: f64,
    pub calibration_window: f64,
    pub calibration_tol: f64,
    pub max_order: usize,
    pub rwa_strip: bool,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            dims: vec![5, 5, 5],
            tol: 1e-7,
            integrator: Integrator::Magnus4,
            min_steps: 16,
            max_steps: 1 << 15,
            grid_points: DEFAULT_GRID_POINTS,
            overlap_threshold: DEFAULT_OVERLAP_THRESHOLD,
            den_tol: crate::analytics::DEN_TOL,
            calibration_window: 0.05,
            calibration_tol: 1e-6,
            max_order: 4,
            rwa_strip: false,
        }
    }
}

impl NumericsConfig {
    pub fn propagator(&self) -> PropagatorOptions {
        PropagatorOptions {
            tol: self.tol,
            integrator: self.integrator,
            min_steps: self.min_steps,
            max_steps: self.max_steps,
            grid_points: self.grid_points,
            retain_grid: false,
        }
    }

    pub fn calibration(&self) -> CalibrationOptions {
        CalibrationOptions {
            half_window: self.calibration_window,
            tol: self.calibration_tol,
            max_iter: 100,
            overlap_threshold: self.overlap_threshold,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisName {
    OmegaC,
    Delta,
    PhiExtBarOver2pi,
    DeltaPhiOver2pi,
    OmegaD,
}

impl AxisName {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::OmegaC => "omega_c",
            Self::Delta => "delta",
            Self::PhiExtBarOver2pi => "phi_ext_bar_over_2pi",
            Self::DeltaPhiOver2pi => "delta_phi_over_2pi",
            Self::OmegaD => "omega_d",
        }
    }

    /// Whether this axis scales the drive amplitude.
    pub fn is_amplitude(&self) -> bool {
        matches!(self, Self::Delta | Self::DeltaPhiOver2pi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub axis: AxisName,
    #[serde(default)]
    pub start: Option<f64>,
    #[serde(default)]
    pub stop: Option<f64>,
    #[serde(default)]
    pub count: Option<usize>,
    /// Explicit grid; overrides start/stop/count.
    #[serde(default)]
    pub values: Option<Vec<f64>>,
}

impl AxisSpec {
    pub fn grid(&self) -> Result<Vec<f64>> {
        if let Some(v) = &self.values {
            if v.is_empty() {
                return Err(invalid("values", "axis grid is empty"));
            }
            return Ok(v.clone());
        }
        let (start, stop, count) = match (self.start, self.stop, self.count) {
            (Some(a), Some(b), Some(n)) => (a, b, n),
            _ => return Err(invalid("start", "axis needs either `values` or all of `start`, `stop`, `count`")),
        };
        match count {
            0 => Err(invalid("count", "axis grid is empty")),
            1 => Ok(vec![start]),
            n => Ok((0..n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: AxisName,
    #[serde(default)]
    pub start: Option<f64>,
    #[serde(default)]
    pub stop: Option<f64>,
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub second: Option<AxisSpec>,
    /// `|∂χ/∂(second axis)|` below which a χ zero is annotated as a sweet spot.
    #[serde(default = "default_sweet_spot_tol")]
    pub sweet_spot_tol: f64,
}

fn default_sweet_spot_tol() -> f64 {
    1e-3
}

impl SweepConfig {
    pub fn primary(&self) -> AxisSpec {
        AxisSpec { axis: self.axis, start: self.start, stop: self.stop, count: self.count, values: self.values.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectroscopyConfig {
    /// Mode whose charge operator is the probe.
    pub probe_mode: usize,
    pub labels: Vec<Label>,
    pub k_min: i64,
    pub k_max: i64,
}

impl Default for SpectroscopyConfig {
    fn default() -> Self {
        Self {
            probe_mode: 0,
            labels: vec![[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]].into_iter().map(Label::from).collect(),
            k_min: -15,
            k_max: 15,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<String>,
    pub format: OutputFormat,
}

/// The system selected by a configuration.
#[derive(Clone, Debug, PartialEq)]
pub enum System {
    Circuit { params: CircuitParams, drive: DriveSpec },
    Toy(ToyParams),
}

impl RunConfig {
    /// Structural checks beyond what deserialization enforces.
    pub fn validate(&self) -> Result<()> {
        match (&self.circuit, &self.toy) {
            (Some(_), Some(_)) => return Err(invalid("toy", "exactly one of `circuit` and `toy` may be given")),
            (None, None) => return Err(invalid("circuit", "one of `circuit` or `toy` is required")),
            _ => {}
        }
        if let Some(c) = &self.circuit {
            c.validate()?;
            if self.drive.delta.is_some() {
                return Err(invalid("delta", "`drive.delta` applies to the toy model; use `delta_phi_over_2pi`"));
            }
        }
        if let Some(t) = &self.toy {
            t.validate()?;
            if let Some(d) = self.drive.delta {
                if t.delta != 0.0 && t.delta != d {
                    return Err(invalid("delta", "`toy.delta` and `drive.delta` disagree"));
                }
            }
        }
        let n = &self.numerics;
        if n.dims.len() != 3 {
            return Err(invalid("dims", "three truncation dimensions are required"));
        }
        if n.dims.iter().any(|&d| d < 2) {
            return Err(invalid("dims", "every truncation dimension must be at least 2"));
        }
        if !(n.tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        if !(0.0..=1.0).contains(&n.overlap_threshold) {
            return Err(invalid("overlap_threshold", "must lie in [0, 1]"));
        }
        if !(n.calibration_window > 0.0) {
            return Err(invalid("calibration_window", "must be positive"));
        }
        if n.grid_points < 2 {
            return Err(invalid("grid_points", "must be at least 2"));
        }
        if self.drive.n_harmonics < 1 {
            return Err(invalid("n_harmonics", "must be at least 1"));
        }
        if let DriveFrequency::Fixed(w) = self.drive.omega_d {
            if !(w > 0.0) {
                return Err(invalid("omega_d", "must be positive"));
            }
        }
        if self.spectroscopy.k_min > self.spectroscopy.k_max {
            return Err(invalid("k_min", "must not exceed k_max"));
        }
        if let Some(s) = &self.sweep {
            s.primary().grid()?;
            if let Some(sec) = &s.second {
                sec.grid()?;
                if sec.axis == s.axis {
                    return Err(invalid("second", "the two sweep axes must differ"));
                }
            }
            for a in std::iter::once(s.axis).chain(s.second.as_ref().map(|x| x.axis)) {
                let ok = match a {
                    AxisName::OmegaC | AxisName::Delta => self.toy.is_some(),
                    AxisName::PhiExtBarOver2pi | AxisName::DeltaPhiOver2pi => self.circuit.is_some(),
                    AxisName::OmegaD => true,
                };
                if !ok {
                    return Err(invalid("axis", format!("axis `{}` does not apply to this model", a.as_str())));
                }
            }
        }
        Ok(())
    }

    /// System and drive frequency policy at one sweep point.
    pub fn system_at(&self, values: &[(AxisName, f64)]) -> Result<(System, DriveFrequency)> {
        let mut drive_freq = self.drive.omega_d;
        let mut system = if let Some(c) = &self.circuit {
            System::Circuit { params: c.clone(), drive: self.drive.circuit_drive() }
        } else {
            let mut t = self.toy.ok_or_else(|| invalid("toy", "missing model"))?;
            if let Some(d) = self.drive.delta {
                t.delta = d;
            }
            System::Toy(t)
        };
        for &(axis, v) in values {
            match (&mut system, axis) {
                (System::Toy(t), AxisName::OmegaC) => t.omega_c = v,
                (System::Toy(t), AxisName::Delta) => t.delta = v,
                (System::Circuit { drive, .. }, AxisName::PhiExtBarOver2pi) => drive.phi_ext_bar = v * TWO_PI,
                (System::Circuit { drive, .. }, AxisName::DeltaPhiOver2pi) => drive.delta_phi = v * TWO_PI,
                (_, AxisName::OmegaD) => drive_freq = DriveFrequency::Fixed(v),
                (_, a) => return Err(invalid("axis", format!("axis `{}` does not apply to this model", a.as_str()))),
            }
        }
        Ok((system, drive_freq))
    }
}
