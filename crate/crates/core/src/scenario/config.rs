//! Scenario files: TOML with unit-suffixed quantities.
//!
//! Parsing happens in two stages. The TOML is first read into raw structs
//! whose fields are all optional, so syntax problems surface as
//! [`Error::Parse`]. The raw values are then checked and converted to SI in
//! one pass that records every problem with its field path, reported
//! together as [`Error::Validation`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::units::{parse_quantity, Dimension};
use crate::analysis::{AnalysisOptions, Resampling, MIN_MC_SAMPLES};
use crate::coherence::{
    coherence_length, coherence_time, pump_coherence_factor, Lineshape, SourceSpectrum,
};
use crate::error::{Error, Result};
use crate::rates::DetectorParams;
use crate::tagsim::{ScanPlan, DEFAULT_TAG_CAP};
use crate::turbulence::{sigma_from_distance, Anchor, TurbulenceModel};

/// A scalar written either as a bare number (SI) or as `"<number> <unit>"`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum Quantity {
    Number(f64),
    Text(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    scenario: Option<RawMeta>,
    pump: Option<RawPump>,
    optics: Option<RawOptics>,
    layout: Option<RawLayout>,
    source: Option<RawSource>,
    turbulence: Option<RawTurbulence>,
    detector: Option<RawDetector>,
    scan: Option<RawScan>,
    analysis: Option<RawAnalysis>,
    reference: Option<RawReference>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeta {
    name: Option<String>,
    description: Option<String>,
    distance: Option<Quantity>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPump {
    wavelength: Option<Quantity>,
    optics_wavelength: Option<Quantity>,
    bandwidth: Option<Quantity>,
    lineshape: Option<Lineshape>,
    power: Option<Quantity>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptics {
    dc_wavelength: Option<Quantity>,
    fiber_collimated_radius: Option<Quantity>,
    focus_focal_length: Option<Quantity>,
    pump_waist: Option<Quantity>,
    dc_waist: Option<Quantity>,
    mirror_focal_length: Option<Quantity>,
    aperture_diameter: Option<Quantity>,
    crystal_length: Option<Quantity>,
    xi_pump: Option<Quantity>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayout {
    pump_mismatch: Option<Quantity>,
    dc_mismatch: Option<Quantity>,
    dc_coherence_length: Option<Quantity>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    pair_rate: Option<Quantity>,
    gain_first: Option<Quantity>,
    gain_second: Option<Quantity>,
    mode_overlap: Option<Quantity>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnchor {
    distance: Option<Quantity>,
    sigma_angle: Option<Quantity>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTurbulence {
    sigma_angle: Option<Quantity>,
    angle_scale: Option<Quantity>,
    sigma_phase: Option<Quantity>,
    correlation_time: Option<Quantity>,
    anchors: Option<Vec<RawAnchor>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetector {
    efficiency_s: Option<Quantity>,
    efficiency_i: Option<Quantity>,
    dark_rate: Option<Quantity>,
    coincidence_window: Option<Quantity>,
    integration_time: Option<Quantity>,
    background_fraction_s: Option<Quantity>,
    background_fraction_i: Option<Quantity>,
    jitter: Option<Quantity>,
    dead_time: Option<Quantity>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScan {
    duration: Option<Quantity>,
    stage_velocity: Option<Quantity>,
    fold_factor: Option<Quantity>,
    initial_phase: Option<Quantity>,
    tag_cap: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    n_samples: Option<usize>,
    resampling: Option<Resampling>,
    fit: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReference {
    focused_pump_waist: Option<Quantity>,
    focused_pump_rayleigh_length: Option<Quantity>,
    collimated_pump_radius: Option<Quantity>,
    collimated_dc_radius: Option<Quantity>,
    pump_rayleigh_length: Option<Quantity>,
    dc_rayleigh_length: Option<Quantity>,
    radius_distance: Option<Quantity>,
    pump_radius_at_distance: Option<Quantity>,
    dc_radius_at_distance: Option<Quantity>,
    dc_focal_parameter: Option<Quantity>,
    coherence_time: Option<Quantity>,
    coherence_length: Option<Quantity>,
    peak_intensity_w_per_cm2: Option<Quantity>,
    brightness: Option<Quantity>,
    accidental_rate: Option<Quantity>,
    visibility_coincidences: Option<Quantity>,
    std_coincidences: Option<Quantity>,
    shot_noise_coincidences: Option<Quantity>,
    visibility_signal: Option<Quantity>,
    std_signal: Option<Quantity>,
    shot_noise_signal: Option<Quantity>,
    visibility_idler: Option<Quantity>,
    std_idler: Option<Quantity>,
    shot_noise_idler: Option<Quantity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpConfig {
    /// Centre wavelength setting the interference phase, m.
    pub wavelength: f64,
    /// Wavelength used for beam propagation, m.
    pub optics_wavelength: f64,
    /// FWHM bandwidth, Hz.
    pub bandwidth: f64,
    pub lineshape: Lineshape,
    /// Power at the first crystal, W.
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticsConfig {
    pub dc_wavelength: f64,
    /// Radius of the collimated pump leaving the fibre coupler, m.
    pub fiber_collimated_radius: f64,
    /// Focal length of the lens focusing the pump into the crystal, m.
    pub focus_focal_length: f64,
    /// Pump waist in the crystal, m; derived from the focusing lens when absent.
    pub pump_waist: Option<f64>,
    /// Down-conversion waist in the crystal, m.
    pub dc_waist: f64,
    /// Focal length of the collimating mirrors, m.
    pub mirror_focal_length: f64,
    pub aperture_diameter: f64,
    pub crystal_length: f64,
    /// Pump focal parameter.
    pub xi_pump: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutConfig {
    /// `L_p - L_DC^a - L_DC^b`, m.
    pub pump_mismatch: f64,
    /// `L_DC^a - L_DC^b`, m.
    pub dc_mismatch: f64,
    pub dc_coherence_length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    /// Phase-averaged pair rate with both sources at nominal gain, 1/s.
    pub pair_rate: f64,
    pub gain_first: f64,
    pub gain_second: f64,
    /// Spatial and spectral overlap of the two sources' modes, in `[0, 1]`.
    pub mode_overlap: f64,
}

/// Where the turbulence angle spread came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaOrigin {
    /// Given explicitly in the scenario file.
    Explicit,
    /// Interpolated from calibration anchors.
    Calibrated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurbulenceConfig {
    pub model: TurbulenceModel,
    pub sigma_origin: SigmaOrigin,
    pub anchors: Vec<Anchor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub duration: f64,
    pub stage_velocity: f64,
    pub fold_factor: f64,
    pub initial_phase: Option<f64>,
    pub tag_cap: u64,
}

/// Reference values a run can be compared against. Visibilities and their
/// errors are fractions, not percent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValues {
    pub focused_pump_waist: Option<f64>,
    pub focused_pump_rayleigh_length: Option<f64>,
    pub collimated_pump_radius: Option<f64>,
    pub collimated_dc_radius: Option<f64>,
    pub pump_rayleigh_length: Option<f64>,
    pub dc_rayleigh_length: Option<f64>,
    pub radius_distance: Option<f64>,
    pub pump_radius_at_distance: Option<f64>,
    pub dc_radius_at_distance: Option<f64>,
    pub dc_focal_parameter: Option<f64>,
    pub coherence_time: Option<f64>,
    pub coherence_length: Option<f64>,
    pub peak_intensity_w_per_cm2: Option<f64>,
    pub brightness: Option<f64>,
    pub accidental_rate: Option<f64>,
    pub visibility_coincidences: Option<f64>,
    pub std_coincidences: Option<f64>,
    pub shot_noise_coincidences: Option<f64>,
    pub visibility_signal: Option<f64>,
    pub std_signal: Option<f64>,
    pub shot_noise_signal: Option<f64>,
    pub visibility_idler: Option<f64>,
    pub std_idler: Option<f64>,
    pub shot_noise_idler: Option<f64>,
}

/// A fully validated scenario in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    /// Separation of the two sources, m.
    pub distance: f64,
    pub seed: u64,
    pub pump: PumpConfig,
    pub optics: OpticsConfig,
    pub layout: LayoutConfig,
    pub source: SourceConfig,
    pub turbulence: TurbulenceConfig,
    pub detector: DetectorParams,
    pub scan: ScanConfig,
    pub analysis: AnalysisOptions,
    pub reference: Option<ReferenceValues>,
}

/// Collects every problem found while converting a raw scenario.
#[derive(Default)]
struct Checker {
    errors: Vec<(String, String)>,
}

impl Checker {
    fn fail(&mut self, field: &str, message: impl Into<String>) {
        self.errors.push((field.to_string(), message.into()));
    }

    fn quantity(&mut self, field: &str, q: Option<&Quantity>, dim: Dimension) -> Option<f64> {
        let q = q?;
        let parsed = match q {
            Quantity::Number(x) => Ok(*x),
            Quantity::Text(s) => parse_quantity(s, dim),
        };
        match parsed {
            Ok(v) if v.is_finite() => Some(v),
            Ok(_) => {
                self.fail(field, "must be finite");
                None
            }
            Err(m) => {
                self.fail(field, m);
                None
            }
        }
    }

    fn required(&mut self, field: &str, q: Option<&Quantity>, dim: Dimension) -> f64 {
        if q.is_none() {
            self.fail(field, "missing required field");
            return f64::NAN;
        }
        self.quantity(field, q, dim).unwrap_or(f64::NAN)
    }

    fn or(&mut self, field: &str, q: Option<&Quantity>, dim: Dimension, default: f64) -> f64 {
        match q {
            None => default,
            Some(_) => self.quantity(field, q, dim).unwrap_or(f64::NAN),
        }
    }

    fn positive(&mut self, field: &str, v: f64) {
        if !v.is_nan() && v <= 0.0 {
            self.fail(field, format!("must be positive, got {v}"));
        }
    }

    fn nonnegative(&mut self, field: &str, v: f64) {
        if !v.is_nan() && v < 0.0 {
            self.fail(field, format!("must be nonnegative, got {v}"));
        }
    }

    fn unit_interval(&mut self, field: &str, v: f64) {
        if !v.is_nan() && !(0.0..=1.0).contains(&v) {
            self.fail(field, format!("must lie in [0, 1], got {v}"));
        }
    }

    fn finish(self) -> Result<()> {
        if self.errors.is_empty() {
            return Ok(());
        }
        let fields: Vec<&str> = self.errors.iter().map(|e| e.0.as_str()).collect();
        let message: Vec<String> = self
            .errors
            .iter()
            .map(|(f, m)| format!("{f}: {m}"))
            .collect();
        Err(Error::Validation {
            field: fields.join(", "),
            message: message.join("; "),
        })
    }
}

impl Scenario {
    /// Parses and validates scenario text. `origin` names the source in
    /// error messages.
    pub fn from_toml_str(text: &str, origin: &str, anchors: &[Anchor]) -> Result<Scenario> {
        let raw: RawScenario =
            toml::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
        convert(raw, anchors)
    }

    /// Scan description for the tag simulator.
    pub fn scan_plan(&self) -> Result<ScanPlan> {
        let spectrum = SourceSpectrum::new(
            self.pump.wavelength,
            self.pump.bandwidth,
            self.pump.lineshape,
        )?;
        let coh_len = coherence_length(coherence_time(&spectrum)?)?;
        let v_p = pump_coherence_factor(
            self.layout.pump_mismatch.abs(),
            coh_len,
            self.pump.lineshape,
        )?;
        let plan = ScanPlan {
            scenario: self.name.clone(),
            duration: self.scan.duration,
            pair_rate: self.source.pair_rate,
            gain_first: self.source.gain_first,
            gain_second: self.source.gain_second,
            intrinsic_visibility: self.source.mode_overlap * v_p,
            pump_wavelength: self.pump.wavelength,
            stage_velocity: self.scan.stage_velocity,
            fold_factor: self.scan.fold_factor,
            initial_phase: self.scan.initial_phase,
            turbulence: self.turbulence.model,
            detector: self.detector,
            tag_cap: self.scan.tag_cap,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Expected fringe period in integration bins.
    pub fn period_bins(&self) -> Result<f64> {
        crate::analysis::expected_period_bins(
            self.pump.wavelength,
            self.scan.stage_velocity,
            self.scan.fold_factor,
            self.detector.integration_time,
        )
    }
}

fn convert(raw: RawScenario, default_anchors: &[Anchor]) -> Result<Scenario> {
    use Dimension::*;
    let mut c = Checker::default();

    let meta = raw.scenario.unwrap_or_default();
    let name = meta.name.unwrap_or_else(|| {
        c.fail("scenario.name", "missing required field");
        String::new()
    });
    let distance = c.required("scenario.distance", meta.distance.as_ref(), Length);
    c.nonnegative("scenario.distance", distance);

    let p = raw.pump.unwrap_or_default();
    let wavelength = c.required("pump.wavelength", p.wavelength.as_ref(), Length);
    c.positive("pump.wavelength", wavelength);
    let optics_wavelength = c.or(
        "pump.optics_wavelength",
        p.optics_wavelength.as_ref(),
        Length,
        wavelength,
    );
    c.positive("pump.optics_wavelength", optics_wavelength);
    let bandwidth = c.required("pump.bandwidth", p.bandwidth.as_ref(), Frequency);
    c.positive("pump.bandwidth", bandwidth);
    let power = c.required("pump.power", p.power.as_ref(), Power);
    c.nonnegative("pump.power", power);
    let pump = PumpConfig {
        wavelength,
        optics_wavelength,
        bandwidth,
        lineshape: p.lineshape.unwrap_or_default(),
        power,
    };

    let o = raw.optics.unwrap_or_default();
    let optics = OpticsConfig {
        dc_wavelength: c.required("optics.dc_wavelength", o.dc_wavelength.as_ref(), Length),
        fiber_collimated_radius: c.required(
            "optics.fiber_collimated_radius",
            o.fiber_collimated_radius.as_ref(),
            Length,
        ),
        focus_focal_length: c.required(
            "optics.focus_focal_length",
            o.focus_focal_length.as_ref(),
            Length,
        ),
        pump_waist: c.quantity("optics.pump_waist", o.pump_waist.as_ref(), Length),
        dc_waist: c.required("optics.dc_waist", o.dc_waist.as_ref(), Length),
        mirror_focal_length: c.required(
            "optics.mirror_focal_length",
            o.mirror_focal_length.as_ref(),
            Length,
        ),
        aperture_diameter: c.required(
            "optics.aperture_diameter",
            o.aperture_diameter.as_ref(),
            Length,
        ),
        crystal_length: c.required("optics.crystal_length", o.crystal_length.as_ref(), Length),
        xi_pump: c.required("optics.xi_pump", o.xi_pump.as_ref(), Dimensionless),
    };
    for (f, v) in [
        ("optics.dc_wavelength", optics.dc_wavelength),
        (
            "optics.fiber_collimated_radius",
            optics.fiber_collimated_radius,
        ),
        ("optics.focus_focal_length", optics.focus_focal_length),
        ("optics.pump_waist", optics.pump_waist.unwrap_or(1.0)),
        ("optics.dc_waist", optics.dc_waist),
        ("optics.mirror_focal_length", optics.mirror_focal_length),
        ("optics.aperture_diameter", optics.aperture_diameter),
        ("optics.crystal_length", optics.crystal_length),
        ("optics.xi_pump", optics.xi_pump),
    ] {
        c.positive(f, v);
    }

    let l = raw.layout.unwrap_or_default();
    let layout = LayoutConfig {
        pump_mismatch: c.or(
            "layout.pump_mismatch",
            l.pump_mismatch.as_ref(),
            Length,
            0.0,
        ),
        dc_mismatch: c.or("layout.dc_mismatch", l.dc_mismatch.as_ref(), Length, 0.0),
        dc_coherence_length: c.quantity(
            "layout.dc_coherence_length",
            l.dc_coherence_length.as_ref(),
            Length,
        ),
    };
    if let Some(v) = layout.dc_coherence_length {
        c.positive("layout.dc_coherence_length", v);
    }

    let s = raw.source.unwrap_or_default();
    let pair_rate = c.required("source.pair_rate", s.pair_rate.as_ref(), Rate);
    c.nonnegative("source.pair_rate", pair_rate);
    let gain_first = c.required("source.gain_first", s.gain_first.as_ref(), Dimensionless);
    c.nonnegative("source.gain_first", gain_first);
    let gain_second = c.or(
        "source.gain_second",
        s.gain_second.as_ref(),
        Dimensionless,
        gain_first,
    );
    c.nonnegative("source.gain_second", gain_second);
    if gain_first == 0.0 && gain_second == 0.0 {
        c.fail(
            "source.gain_first",
            "at least one source must have a positive gain",
        );
    }
    let mode_overlap = c.or(
        "source.mode_overlap",
        s.mode_overlap.as_ref(),
        Dimensionless,
        1.0,
    );
    c.unit_interval("source.mode_overlap", mode_overlap);
    let source = SourceConfig {
        pair_rate,
        gain_first,
        gain_second,
        mode_overlap,
    };

    let t = raw.turbulence.unwrap_or_default();
    let anchors: Vec<Anchor> = match &t.anchors {
        Some(list) => list
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let d = c.required(
                    &format!("turbulence.anchors[{i}].distance"),
                    a.distance.as_ref(),
                    Length,
                );
                let s = c.required(
                    &format!("turbulence.anchors[{i}].sigma_angle"),
                    a.sigma_angle.as_ref(),
                    Angle,
                );
                c.nonnegative(&format!("turbulence.anchors[{i}].sigma_angle"), s);
                Anchor {
                    distance: d,
                    sigma_angle: s,
                }
            })
            .collect(),
        None => default_anchors.to_vec(),
    };
    let (sigma_angle, sigma_origin) = match &t.sigma_angle {
        Some(Quantity::Text(s)) if s.trim() == "calibrated" => {
            let v = if distance.is_nan() {
                f64::NAN
            } else {
                match sigma_from_distance(distance, &anchors) {
                    Ok(v) => v,
                    Err(e) => {
                        c.fail("turbulence.anchors", e.to_string());
                        f64::NAN
                    }
                }
            };
            (v, SigmaOrigin::Calibrated)
        }
        q => (
            c.or("turbulence.sigma_angle", q.as_ref(), Angle, 0.0),
            SigmaOrigin::Explicit,
        ),
    };
    c.nonnegative("turbulence.sigma_angle", sigma_angle);
    let angle_scale = c.or("turbulence.angle_scale", t.angle_scale.as_ref(), Angle, 1.0);
    c.positive("turbulence.angle_scale", angle_scale);
    let sigma_phase = c.or("turbulence.sigma_phase", t.sigma_phase.as_ref(), Angle, 0.0);
    c.nonnegative("turbulence.sigma_phase", sigma_phase);
    let correlation_time = c.or(
        "turbulence.correlation_time",
        t.correlation_time.as_ref(),
        Time,
        1.0,
    );
    c.positive("turbulence.correlation_time", correlation_time);
    let turbulence = TurbulenceConfig {
        model: TurbulenceModel {
            sigma_angle,
            angle_scale,
            sigma_phase,
            correlation_time,
            distance,
        },
        sigma_origin,
        anchors,
    };

    let d = raw.detector.unwrap_or_default();
    let detector = DetectorParams {
        efficiency_s: c.required(
            "detector.efficiency_s",
            d.efficiency_s.as_ref(),
            Dimensionless,
        ),
        efficiency_i: c.required(
            "detector.efficiency_i",
            d.efficiency_i.as_ref(),
            Dimensionless,
        ),
        dark_rate: c.or("detector.dark_rate", d.dark_rate.as_ref(), Rate, 0.0),
        coincidence_window: c.required(
            "detector.coincidence_window",
            d.coincidence_window.as_ref(),
            Time,
        ),
        integration_time: c.required(
            "detector.integration_time",
            d.integration_time.as_ref(),
            Time,
        ),
        background_fraction_s: c.or(
            "detector.background_fraction_s",
            d.background_fraction_s.as_ref(),
            Dimensionless,
            0.0,
        ),
        background_fraction_i: c.or(
            "detector.background_fraction_i",
            d.background_fraction_i.as_ref(),
            Dimensionless,
            0.0,
        ),
        jitter: c.or("detector.jitter", d.jitter.as_ref(), Time, 100e-12),
        dead_time: c.or("detector.dead_time", d.dead_time.as_ref(), Time, 0.0),
    };
    c.unit_interval("detector.efficiency_s", detector.efficiency_s);
    c.unit_interval("detector.efficiency_i", detector.efficiency_i);
    for (f, v) in [
        (
            "detector.background_fraction_s",
            detector.background_fraction_s,
        ),
        (
            "detector.background_fraction_i",
            detector.background_fraction_i,
        ),
    ] {
        if !v.is_nan() && !(0.0..1.0).contains(&v) {
            c.fail(f, format!("must lie in [0, 1), got {v}"));
        }
    }
    c.nonnegative("detector.dark_rate", detector.dark_rate);
    c.positive("detector.coincidence_window", detector.coincidence_window);
    c.positive("detector.integration_time", detector.integration_time);
    c.nonnegative("detector.jitter", detector.jitter);
    c.nonnegative("detector.dead_time", detector.dead_time);

    let sc = raw.scan.unwrap_or_default();
    let scan = ScanConfig {
        duration: c.required("scan.duration", sc.duration.as_ref(), Time),
        stage_velocity: c.required("scan.stage_velocity", sc.stage_velocity.as_ref(), Velocity),
        fold_factor: c.or(
            "scan.fold_factor",
            sc.fold_factor.as_ref(),
            Dimensionless,
            2.0,
        ),
        initial_phase: c.quantity("scan.initial_phase", sc.initial_phase.as_ref(), Angle),
        tag_cap: sc.tag_cap.unwrap_or(DEFAULT_TAG_CAP),
    };
    c.positive("scan.duration", scan.duration);
    c.positive("scan.stage_velocity", scan.stage_velocity);
    if !scan.fold_factor.is_nan() && scan.fold_factor < 1.0 {
        c.fail(
            "scan.fold_factor",
            format!("must be at least 1, got {}", scan.fold_factor),
        );
    }
    let fringe_s = wavelength / (scan.fold_factor * scan.stage_velocity);
    if fringe_s.is_finite() && scan.duration.is_finite() && scan.duration < 2.0 * fringe_s {
        c.fail(
            "scan.duration",
            format!(
                "{} s covers fewer than two {fringe_s:.3} s fringe periods",
                scan.duration
            ),
        );
    }
    let bins_per_fringe = fringe_s / detector.integration_time;
    if bins_per_fringe.is_finite() && bins_per_fringe < 4.0 {
        c.fail(
            "detector.integration_time",
            format!("gives {bins_per_fringe:.2} bins per fringe; at least 4 are needed"),
        );
    }

    let a = raw.analysis.unwrap_or_default();
    let analysis = AnalysisOptions {
        n_samples: a.n_samples.unwrap_or(crate::analysis::DEFAULT_MC_SAMPLES),
        seed: 0,
        resampling: a.resampling.unwrap_or_default(),
        fit: a.fit.unwrap_or(true),
    };
    if analysis.n_samples < MIN_MC_SAMPLES {
        c.fail(
            "analysis.n_samples",
            format!("must be at least {MIN_MC_SAMPLES}"),
        );
    }

    let reference = raw.reference.map(|r| {
        let mut q = |f: &str, v: Option<Quantity>, dim| {
            c.quantity(&format!("reference.{f}"), v.as_ref(), dim)
        };
        ReferenceValues {
            focused_pump_waist: q("focused_pump_waist", r.focused_pump_waist, Length),
            focused_pump_rayleigh_length: q(
                "focused_pump_rayleigh_length",
                r.focused_pump_rayleigh_length,
                Length,
            ),
            collimated_pump_radius: q("collimated_pump_radius", r.collimated_pump_radius, Length),
            collimated_dc_radius: q("collimated_dc_radius", r.collimated_dc_radius, Length),
            pump_rayleigh_length: q("pump_rayleigh_length", r.pump_rayleigh_length, Length),
            dc_rayleigh_length: q("dc_rayleigh_length", r.dc_rayleigh_length, Length),
            radius_distance: q("radius_distance", r.radius_distance, Length),
            pump_radius_at_distance: q(
                "pump_radius_at_distance",
                r.pump_radius_at_distance,
                Length,
            ),
            dc_radius_at_distance: q("dc_radius_at_distance", r.dc_radius_at_distance, Length),
            dc_focal_parameter: q("dc_focal_parameter", r.dc_focal_parameter, Dimensionless),
            coherence_time: q("coherence_time", r.coherence_time, Time),
            coherence_length: q("coherence_length", r.coherence_length, Length),
            peak_intensity_w_per_cm2: q(
                "peak_intensity_w_per_cm2",
                r.peak_intensity_w_per_cm2,
                Dimensionless,
            ),
            brightness: q("brightness", r.brightness, Rate),
            accidental_rate: q("accidental_rate", r.accidental_rate, Rate),
            visibility_coincidences: q(
                "visibility_coincidences",
                r.visibility_coincidences,
                Dimensionless,
            ),
            std_coincidences: q("std_coincidences", r.std_coincidences, Dimensionless),
            shot_noise_coincidences: q(
                "shot_noise_coincidences",
                r.shot_noise_coincidences,
                Dimensionless,
            ),
            visibility_signal: q("visibility_signal", r.visibility_signal, Dimensionless),
            std_signal: q("std_signal", r.std_signal, Dimensionless),
            shot_noise_signal: q("shot_noise_signal", r.shot_noise_signal, Dimensionless),
            visibility_idler: q("visibility_idler", r.visibility_idler, Dimensionless),
            std_idler: q("std_idler", r.std_idler, Dimensionless),
            shot_noise_idler: q("shot_noise_idler", r.shot_noise_idler, Dimensionless),
        }
    });

    c.finish()?;
    Ok(Scenario {
        name,
        description: meta.description.unwrap_or_default(),
        distance,
        seed: meta.seed.unwrap_or(0),
        pump,
        optics,
        layout,
        source,
        turbulence,
        detector,
        scan,
        analysis,
        reference,
    })
}

/// Loads a scenario from a file, or from the built-in presets when `path`
/// is not an existing file but names one (`link_2m`, `link_20m`, `link_70m`).
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    if !path.exists() {
        if let Some(s) = path
            .to_str()
            .and_then(|name| super::presets::preset(name).transpose())
        {
            return s;
        }
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Scenario::from_toml_str(
        &text,
        &path.display().to_string(),
        &super::presets::calibrated_anchors(),
    )
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::scenario::presets::{preset, preset_text, CALIBRATED_ANCHORS};

    fn parse(text: &str) -> Result<Scenario> {
        Scenario::from_toml_str(text, "test", &CALIBRATED_ANCHORS)
    }

    fn edited(from: &str, to: &str) -> String {
        let text = preset_text("link_2m").unwrap();
        assert!(text.contains(from), "preset lacks `{from}`");
        text.replacen(from, to, 1)
    }

    #[test]
    fn preset_parameters() {
        let s = preset("link_2m").unwrap().unwrap();
        assert_eq!(s.name, "link_2m");
        assert_relative_eq!(s.distance, 2.0);
        assert_relative_eq!(s.scan.stage_velocity, 180e-9, max_relative = 1e-12);
        assert_relative_eq!(s.detector.integration_time, 0.07, max_relative = 1e-12);
        assert_relative_eq!(s.detector.coincidence_window, 1.5e-9, max_relative = 1e-12);
        assert_eq!(s.turbulence.sigma_origin, SigmaOrigin::Calibrated);
        assert_eq!(
            s.turbulence.model.sigma_angle,
            CALIBRATED_ANCHORS[0].sigma_angle
        );
        assert_relative_eq!(s.period_bins().unwrap(), 16.09, max_relative = 1e-3);
        assert!(preset("link_5m").unwrap().is_none());
        for name in crate::scenario::PRESET_NAMES {
            let s = preset(name).unwrap().unwrap();
            assert!(s.reference.is_some());
            s.scan_plan().unwrap();
        }
    }

    #[test]
    fn missing_field_is_named() {
        let err = parse(&edited("duration = \"70 s\"\n", "")).unwrap_err();
        match err {
            Error::Validation { field, message } => {
                assert_eq!(field, "scan.duration");
                assert!(message.contains("missing"), "{message}");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn negative_gain_rejected() {
        let err = parse(&edited("gain_second = 0.01", "gain_second = -0.01")).unwrap_err();
        assert!(
            matches!(&err, Error::Validation { field, .. } if field == "source.gain_second"),
            "{err}"
        );
    }

    #[test]
    fn all_problems_reported_together() {
        let text = edited("efficiency_s = 0.185", "efficiency_s = 1.5").replacen(
            "bandwidth = \"160 MHz\"",
            "bandwidth = \"160 m\"",
            1,
        );
        let err = parse(&text).unwrap_err();
        let Error::Validation { field, message } = err else {
            panic!("expected a validation error");
        };
        assert_eq!(field, "pump.bandwidth, detector.efficiency_s");
        assert!(message.contains("not a frequency unit"), "{message}");
        assert!(message.contains("[0, 1]"), "{message}");
    }

    #[test]
    fn syntax_and_unknown_keys_are_parse_errors() {
        assert!(matches!(
            parse("[scenario\nname = 1"),
            Err(Error::Parse { .. })
        ));
        let err = parse(&edited("fold_factor = 2", "fold_factor = 2\nspeed = 3")).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn explicit_and_inline_calibrated_sigma() {
        let s = parse(&edited(
            "sigma_angle = \"calibrated\"",
            "sigma_angle = \"7 urad\"",
        ))
        .unwrap();
        assert_eq!(s.turbulence.sigma_origin, SigmaOrigin::Explicit);
        assert_relative_eq!(s.turbulence.model.sigma_angle, 7e-6, max_relative = 1e-12);

        let inline = edited(
            "correlation_time = \"5 ms\"",
            "correlation_time = \"5 ms\"\nanchors = [{ distance = \"1 m\", sigma_angle = \"1 urad\" }, { distance = \"3 m\", sigma_angle = \"3 urad\" }]",
        );
        let s = parse(&inline).unwrap();
        assert_eq!(s.turbulence.sigma_origin, SigmaOrigin::Calibrated);
        assert_relative_eq!(s.turbulence.model.sigma_angle, 2e-6, max_relative = 1e-12);
    }

    #[test]
    fn scan_must_cover_two_fringes() {
        let err = parse(&edited("duration = \"70 s\"", "duration = \"1 s\"")).unwrap_err();
        assert!(
            matches!(&err, Error::Validation { field, .. } if field == "scan.duration"),
            "{err}"
        );
    }

    #[test]
    fn load_scenario_reads_files_and_presets() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.toml");
        std::fs::write(&path, preset_text("link_20m").unwrap()).unwrap();
        assert_eq!(load_scenario(&path).unwrap().name, "link_20m");
        assert_eq!(load_scenario(Path::new("link_70m")).unwrap().distance, 70.0);
        assert!(matches!(
            load_scenario(Path::new("/nonexistent/x.toml")),
            Err(Error::Io { .. })
        ));
    }
}
