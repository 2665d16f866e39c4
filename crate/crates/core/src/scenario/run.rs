//! End-to-end pipelines behind the command-line subcommands.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ReferenceValues, Scenario, SigmaOrigin};
use super::presets::{preset, PRESET_NAMES};
use crate::analysis::{
    analyze_trace, linear_visibility_extrapolation, write_histogram_csv, AnalysisOptions,
    TraceAnalysis, HISTOGRAM_BINS,
};
use crate::coherence::{
    coherence_length, coherence_time, dc_condition, pump_condition, ConditionCheck, PathLayout,
    SourceSpectrum,
};
use crate::coincidence::{count_coincidences, CoincidenceWindow};
use crate::error::{Error, Result};
use crate::optics::{
    aperture_check, conjugate_waist, matched_spdc_focal_parameter, peak_intensity, ApertureCheck,
    FocusingElement, GaussianBeam,
};
use crate::rates::{accidental_rate, brightness};
use crate::tags::{write_tag_file, StreamMeta, TagFormat};
use crate::tagsim::{simulate_scan, ScanGroundTruth, ScanPlan};
use crate::trace::FringeTrace;

/// Relative tolerance of the optics and coherence audit.
pub const AUDIT_TOLERANCE: f64 = 0.01;

/// Trace labels, in the order they are analysed.
pub const TRACE_LABELS: [&str; 3] = ["coincidences", "signal", "idler"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

// ---------------------------------------------------------------- audit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub quantity: String,
    pub unit: String,
    pub value: f64,
    pub reference: Option<f64>,
    pub rel_error: Option<f64>,
    /// Whether the row counts towards the pass/fail verdict.
    pub gated: bool,
    pub within_tolerance: Option<bool>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub scenario: String,
    pub distance: f64,
    pub rows: Vec<AuditRow>,
    pub pump_condition: ConditionCheck<f64>,
    /// Absent when the down-conversion coherence length is not configured.
    pub dc_condition: Option<ConditionCheck<f64>>,
    pub pump_aperture: ApertureCheck<f64>,
    pub dc_aperture: ApertureCheck<f64>,
    /// Every gated row with a reference lies within [`AUDIT_TOLERANCE`].
    pub all_within_tolerance: bool,
}

impl AuditReport {
    pub fn row(&self, quantity: &str) -> Option<&AuditRow> {
        self.rows.iter().find(|r| r.quantity == quantity)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "quantity,unit,value,reference,rel_error,gated,within_tolerance"
        )?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.quantity,
                r.unit,
                r.value,
                csv_opt(r.reference),
                csv_opt(r.rel_error),
                r.gated,
                r.within_tolerance
                    .map(|b| b.to_string())
                    .unwrap_or_default()
            )?;
        }
        w.flush()
    }

    pub fn summary(&self) -> String {
        let mut s = format!("audit of {} ({} m)\n", self.scenario, self.distance);
        for r in &self.rows {
            let _ = write!(s, "  {:<34} {:>14.6} {:<6}", r.quantity, r.value, r.unit);
            if let Some(reference) = r.reference {
                let _ = write!(
                    s,
                    " ref {reference:>12.6}  err {:+.3}%",
                    100.0 * r.rel_error.unwrap_or(0.0)
                );
            }
            if let Some(n) = &r.note {
                let _ = write!(s, "  ({n})");
            }
            s.push('\n');
        }
        let _ = writeln!(
            s,
            "  pump coherence condition: {} (margin {:.4} m)",
            if self.pump_condition.satisfied {
                "satisfied"
            } else {
                "VIOLATED"
            },
            self.pump_condition.margin
        );
        let _ = writeln!(
            s,
            "  apertures: pump ratio {:.3} {}, down-conversion ratio {:.3} {}",
            self.pump_aperture.ratio,
            if self.pump_aperture.pass {
                "pass"
            } else {
                "FAIL"
            },
            self.dc_aperture.ratio,
            if self.dc_aperture.pass {
                "pass"
            } else {
                "FAIL"
            },
        );
        let _ = writeln!(
            s,
            "  verdict: {}",
            if self.all_within_tolerance {
                "all references within 1%"
            } else {
                "reference mismatch"
            }
        );
        s
    }
}

struct RowBuilder {
    rows: Vec<AuditRow>,
}

impl RowBuilder {
    fn push(
        &mut self,
        quantity: &str,
        unit: &str,
        value: f64,
        reference: Option<f64>,
        gated: bool,
        note: Option<&str>,
    ) {
        let rel_error = reference.filter(|r| *r != 0.0).map(|r| (value - r) / r);
        self.rows.push(AuditRow {
            quantity: quantity.into(),
            unit: unit.into(),
            value,
            reference,
            rel_error,
            gated,
            within_tolerance: rel_error.map(|e| e.abs() <= AUDIT_TOLERANCE),
            note: note.map(Into::into),
        });
    }
}

/// Phase-averaged expected rates of a scan without turbulence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NominalRates {
    pub singles_s: f64,
    pub singles_i: f64,
    pub coincidences: f64,
    pub accidentals: f64,
    /// `C_A C_B / C_c` evaluated on the rates above.
    pub brightness: f64,
}

pub fn nominal_rates(plan: &ScanPlan) -> Result<NominalRates> {
    let d = &plan.detector;
    let (bg_s, bg_i) = plan.background_rates();
    let singles_s = d.efficiency_s * plan.pair_rate + bg_s + d.dark_rate;
    let singles_i = d.efficiency_i * plan.pair_rate + bg_i + d.dark_rate;
    let accidentals = accidental_rate(singles_s, singles_i, d.coincidence_window)?;
    let coincidences = d.efficiency_s * d.efficiency_i * plan.pair_rate + accidentals;
    let b = if coincidences > 0.0 {
        brightness(singles_s, singles_i, coincidences)?
    } else {
        0.0
    };
    Ok(NominalRates {
        singles_s,
        singles_i,
        coincidences,
        accidentals,
        brightness: b,
    })
}

/// Tabulates the beam, coherence and counting figures of a scenario.
pub fn run_audit(scenario: &Scenario) -> Result<AuditReport> {
    let o = &scenario.optics;
    let r = scenario.reference.clone().unwrap_or_default();
    let lp = scenario.pump.optics_wavelength;
    let mut b = RowBuilder { rows: Vec::new() };

    let focus = FocusingElement::new(o.focus_focal_length, o.aperture_diameter)?;
    let fiber_beam = GaussianBeam::at_origin(lp, o.fiber_collimated_radius)?;
    let focused = conjugate_waist(&fiber_beam, &focus);
    b.push(
        "focused_pump_waist",
        "m",
        focused.waist_radius,
        r.focused_pump_waist,
        true,
        None,
    );

    let pump_waist = o.pump_waist.unwrap_or(focused.waist_radius);
    let pump_in_crystal = GaussianBeam::at_origin(lp, pump_waist)?;
    b.push(
        "focused_pump_rayleigh_length",
        "m",
        pump_in_crystal.rayleigh_length(),
        r.focused_pump_rayleigh_length,
        true,
        None,
    );
    let crystal_ratio = pump_in_crystal.rayleigh_length() / o.crystal_length;
    b.push(
        "rayleigh_length_over_crystal_length",
        "",
        crystal_ratio,
        None,
        false,
        Some(if crystal_ratio > 1.0 {
            "plane-wave pump inside the crystal"
        } else {
            "pump diverges inside the crystal"
        }),
    );

    let mirror = FocusingElement::new(o.mirror_focal_length, o.aperture_diameter)?;
    let pump_coll = conjugate_waist(&pump_in_crystal, &mirror);
    let dc_in_crystal = GaussianBeam::at_origin(o.dc_wavelength, o.dc_waist)?;
    let dc_coll = conjugate_waist(&dc_in_crystal, &mirror);
    b.push(
        "collimated_pump_radius",
        "m",
        pump_coll.waist_radius,
        r.collimated_pump_radius,
        true,
        None,
    );
    b.push(
        "collimated_dc_radius",
        "m",
        dc_coll.waist_radius,
        r.collimated_dc_radius,
        true,
        None,
    );
    b.push(
        "pump_rayleigh_length",
        "m",
        pump_coll.rayleigh_length(),
        r.pump_rayleigh_length,
        true,
        None,
    );
    b.push(
        "dc_rayleigh_length",
        "m",
        dc_coll.rayleigh_length(),
        r.dc_rayleigh_length,
        true,
        None,
    );

    // Distances are counted from the collimated waist.
    let d = scenario.distance;
    b.push(
        "pump_radius_at_link_distance",
        "m",
        pump_coll.radius_at(pump_coll.waist_position + d),
        None,
        false,
        None,
    );
    b.push(
        "dc_radius_at_link_distance",
        "m",
        dc_coll.radius_at(dc_coll.waist_position + d),
        None,
        false,
        None,
    );
    if let Some(z) = r.radius_distance {
        b.push(
            "pump_radius_at_reference_distance",
            "m",
            pump_coll.radius_at(pump_coll.waist_position + z),
            r.pump_radius_at_distance,
            true,
            None,
        );
        b.push(
            "dc_radius_at_reference_distance",
            "m",
            dc_coll.radius_at(dc_coll.waist_position + z),
            r.dc_radius_at_distance,
            true,
            None,
        );
    }
    b.push(
        "dc_focal_parameter",
        "",
        matched_spdc_focal_parameter(o.xi_pump)?,
        r.dc_focal_parameter,
        true,
        None,
    );

    let spectrum = SourceSpectrum::new(
        scenario.pump.wavelength,
        scenario.pump.bandwidth,
        scenario.pump.lineshape,
    )?;
    let t_coh = coherence_time(&spectrum)?;
    let l_coh = coherence_length(t_coh)?;
    b.push(
        "pump_coherence_time",
        "s",
        t_coh,
        r.coherence_time,
        true,
        None,
    );
    b.push(
        "pump_coherence_length",
        "m",
        l_coh,
        r.coherence_length,
        true,
        None,
    );

    let intensity = peak_intensity(scenario.pump.power, pump_waist)?;
    b.push(
        "peak_intensity",
        "W/cm2",
        intensity,
        r.peak_intensity_w_per_cm2,
        false,
        r.peak_intensity_w_per_cm2.map(|_| {
            "2P/(pi w^2); the reference is inconsistent with this definition and is not gated"
        }),
    );

    let plan = scenario.scan_plan()?;
    let rates = nominal_rates(&plan)?;
    b.push(
        "nominal_singles_signal",
        "1/s",
        rates.singles_s,
        None,
        false,
        None,
    );
    b.push(
        "nominal_singles_idler",
        "1/s",
        rates.singles_i,
        None,
        false,
        None,
    );
    b.push(
        "nominal_coincidences",
        "1/s",
        rates.coincidences,
        None,
        false,
        None,
    );
    b.push(
        "nominal_accidentals",
        "1/s",
        rates.accidentals,
        r.accidental_rate,
        false,
        None,
    );
    b.push(
        "nominal_brightness",
        "1/s",
        rates.brightness,
        r.brightness,
        false,
        None,
    );
    b.push(
        "intrinsic_visibility",
        "",
        plan.intrinsic_visibility,
        None,
        false,
        None,
    );
    b.push(
        "turbulence_sigma_angle",
        "rad",
        scenario.turbulence.model.sigma_angle,
        None,
        false,
        Some(match scenario.turbulence.sigma_origin {
            SigmaOrigin::Calibrated => "calibrated",
            SigmaOrigin::Explicit => "explicit",
        }),
    );

    // All lengths are measured from the first crystal's output facet to the
    // second crystal's input facet; the down-conversion light covers the
    // link split evenly between the two arms of the relation.
    let half = d / 2.0;
    let layout = PathLayout::new(
        d + scenario.layout.pump_mismatch,
        half + scenario.layout.dc_mismatch / 2.0,
        half - scenario.layout.dc_mismatch / 2.0,
        l_coh,
        scenario.layout.dc_coherence_length.unwrap_or(f64::MAX),
    )?;
    let pump_check = pump_condition(&layout);
    let dc_check = scenario
        .layout
        .dc_coherence_length
        .map(|_| dc_condition(&layout));

    let pump_aperture = aperture_check(
        &pump_coll,
        pump_coll.waist_position + d,
        o.aperture_diameter,
    )?;
    let dc_aperture = aperture_check(&dc_coll, dc_coll.waist_position + d, o.aperture_diameter)?;

    let all_within_tolerance = b
        .rows
        .iter()
        .filter(|r| r.gated)
        .all(|r| r.within_tolerance.unwrap_or(true));
    Ok(AuditReport {
        scenario: scenario.name.clone(),
        distance: d,
        rows: b.rows,
        pump_condition: pump_check,
        dc_condition: dc_check,
        pump_aperture,
        dc_aperture,
        all_within_tolerance,
    })
}

pub fn write_audit(audit: &AuditReport, out_dir: &Path, format: ReportFormat) -> Result<()> {
    ensure_dir(out_dir)?;
    let p = out_dir.join(format!("audit.{}", format.extension()));
    match format {
        ReportFormat::Json => write_json(&p, audit),
        ReportFormat::Csv => audit.write_csv(create(&p)?).map_err(|e| Error::io(&p, e)),
    }
}

// ----------------------------------------------------------- simulation

/// In-memory result of simulating and counting one scan.
#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub signal: Vec<u64>,
    pub idler: Vec<u64>,
    pub meta: StreamMeta,
    pub truth: ScanGroundTruth,
    pub coincidences: FringeTrace,
    pub singles_signal: FringeTrace,
    pub singles_idler: FringeTrace,
}

impl SimulationOutput {
    pub fn traces(&self) -> [&FringeTrace; 3] {
        [
            &self.coincidences,
            &self.singles_signal,
            &self.singles_idler,
        ]
    }
}

/// Simulates a scan, matches coincidences and bins all three channels.
pub fn simulate(scenario: &Scenario, seed: u64) -> Result<SimulationOutput> {
    let plan = scenario.scan_plan()?;
    let scan = simulate_scan(&plan, seed)?;
    let t_int = scenario.detector.integration_time;
    let duration = scenario.scan.duration;
    let window = CoincidenceWindow::from_full_width(scenario.detector.coincidence_window)?;
    let matched = count_coincidences(scan.signal.timestamps(), scan.idler.timestamps(), window)?;
    let v = scenario.scan.stage_velocity;
    let trace = |t: FringeTrace, label: &str| t.with_label(label).with_stage_velocity(v);
    let coincidences = trace(matched.binned(t_int, duration)?, TRACE_LABELS[0]);
    let singles_signal = trace(
        crate::coincidence::bin_counts(scan.signal.timestamps(), t_int, duration)?,
        TRACE_LABELS[1],
    );
    let singles_idler = trace(
        crate::coincidence::bin_counts(scan.idler.timestamps(), t_int, duration)?,
        TRACE_LABELS[2],
    );
    let meta = scan.signal.meta.clone();
    Ok(SimulationOutput {
        signal: scan.signal.into_timestamps(),
        idler: scan.idler.into_timestamps(),
        meta,
        truth: scan.truth,
        coincidences,
        singles_signal,
        singles_idler,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagSidecar {
    pub scenario: String,
    pub seed: u64,
    pub duration_ps: u64,
    pub n_signal: usize,
    pub n_idler: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub scenario: String,
    pub seed: u64,
    pub n_bins: usize,
    pub n_signal: usize,
    pub n_idler: usize,
    pub n_coincidences: u64,
    pub files: Vec<PathBuf>,
}

fn write_truth_csv<W: Write>(truth: &ScanGroundTruth, mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "bin_index,pair_rate,phase,gain,phase_offset,expected_coincidences,expected_singles_s,expected_singles_i"
    )?;
    for k in 0..truth.pair_rate.len() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            k,
            truth.pair_rate[k],
            truth.phase[k],
            truth.gains[k],
            truth.phase_offsets[k],
            truth.expected_coincidences[k],
            truth.expected_singles_s[k],
            truth.expected_singles_i[k]
        )?;
    }
    w.flush()
}

/// Simulates a scan and writes the tag stream, the three traces and the
/// ground truth into `out_dir`.
pub fn run_simulate(
    scenario: &Scenario,
    seed: u64,
    out_dir: &Path,
    tags: TagFormat,
    format: ReportFormat,
) -> Result<SimulateSummary> {
    let sim = simulate(scenario, seed)?;
    ensure_dir(out_dir)?;
    let mut files = Vec::new();

    let tag_path = out_dir.join(match tags {
        TagFormat::Binary => "tags.ptag",
        TagFormat::Csv => "tags.csv",
    });
    write_tag_file(&tag_path, &sim.signal, &sim.idler, tags)?;
    files.push(tag_path);
    let sidecar = TagSidecar {
        scenario: scenario.name.clone(),
        seed,
        duration_ps: sim.meta.duration_ps,
        n_signal: sim.signal.len(),
        n_idler: sim.idler.len(),
    };
    let p = out_dir.join("tags.json");
    write_json(&p, &sidecar)?;
    files.push(p);

    for t in sim.traces() {
        let p = out_dir.join(format!("{}.csv", t.label));
        t.save(&p)?;
        files.push(p);
    }
    let p = out_dir.join(format!("truth.{}", format.extension()));
    match format {
        ReportFormat::Json => write_json(&p, &sim.truth)?,
        ReportFormat::Csv => {
            write_truth_csv(&sim.truth, create(&p)?).map_err(|e| Error::io(&p, e))?
        }
    }
    files.push(p);
    let p = out_dir.join("scenario.json");
    write_json(&p, scenario)?;
    files.push(p);

    Ok(SimulateSummary {
        scenario: scenario.name.clone(),
        seed,
        n_bins: sim.coincidences.len(),
        n_signal: sim.signal.len(),
        n_idler: sim.idler.len(),
        n_coincidences: sim.coincidences.total(),
        files,
    })
}

// ------------------------------------------------------------- analysis

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub trace: String,
    pub quantity: String,
    pub value: f64,
    pub reference: f64,
    /// `value - reference`.
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub distance: f64,
    pub seed: u64,
    pub turbulence_sigma_angle: f64,
    pub turbulence_sigma_origin: SigmaOrigin,
    pub audit: AuditReport,
    pub traces: Vec<TraceAnalysis>,
    pub comparison: Vec<ComparisonRow>,
    /// Set when any trace produced no visibility estimate.
    pub degenerate: bool,
}

impl RunReport {
    pub fn trace(&self, label: &str) -> Option<&TraceAnalysis> {
        self.traces.iter().find(|t| t.label == label)
    }

    /// Mean Monte Carlo visibility of the coincidence trace.
    pub fn coincidence_visibility(&self) -> Option<f64> {
        self.trace(TRACE_LABELS[0])?
            .estimate
            .as_ref()
            .map(|e| e.mean)
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} at {} m (seed {}), sigma_angle {:.3e} rad ({})\n",
            self.scenario,
            self.distance,
            self.seed,
            self.turbulence_sigma_angle,
            match self.turbulence_sigma_origin {
                SigmaOrigin::Calibrated => "calibrated",
                SigmaOrigin::Explicit => "explicit",
            }
        );
        for t in &self.traces {
            let _ = write!(
                s,
                "  {:<13} {:>5} bins, {:>3} max / {:>3} min",
                t.label, t.n_bins, t.n_maxima, t.n_minima
            );
            match &t.estimate {
                Some(e) => {
                    let _ = write!(s, ", V = {:.2}% ± {:.2}%", 100.0 * e.mean, 100.0 * e.std);
                    if let Some(sn) = t.shot_noise {
                        let _ = write!(s, " (shot noise ± {:.2}%)", 100.0 * sn);
                    }
                    if let Some(f) = &t.fit {
                        let _ = write!(s, ", fit V = {:.2}%", 100.0 * f.visibility());
                    }
                }
                None => s.push_str(", no visibility (degenerate trace)"),
            }
            s.push('\n');
        }
        for c in &self.comparison {
            let _ = writeln!(
                s,
                "  {:<13} {:<10} {:>8.2}% vs reference {:>8.2}% ({:+.2} pp)",
                c.trace,
                c.quantity,
                100.0 * c.value,
                100.0 * c.reference,
                100.0 * c.difference
            );
        }
        s
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "scenario,distance_m,trace,n_bins,n_maxima,n_minima,max_mean,min_mean,point,mean,std,shot_noise,fit_visibility,degenerate"
        )?;
        for t in &self.traces {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                self.scenario,
                self.distance,
                t.label,
                t.n_bins,
                t.n_maxima,
                t.n_minima,
                csv_opt(t.max_mean),
                csv_opt(t.min_mean),
                csv_opt(t.point.map(|p| p.value)),
                csv_opt(t.estimate.as_ref().map(|e| e.mean)),
                csv_opt(t.estimate.as_ref().map(|e| e.std)),
                csv_opt(t.shot_noise),
                csv_opt(t.fit.map(|f| f.visibility())),
                t.degenerate
            )?;
        }
        w.flush()
    }
}

fn comparison_rows(reference: &ReferenceValues, traces: &[TraceAnalysis]) -> Vec<ComparisonRow> {
    let mut rows = Vec::new();
    let refs = [
        (
            TRACE_LABELS[0],
            reference.visibility_coincidences,
            reference.std_coincidences,
            reference.shot_noise_coincidences,
        ),
        (
            TRACE_LABELS[1],
            reference.visibility_signal,
            reference.std_signal,
            reference.shot_noise_signal,
        ),
        (
            TRACE_LABELS[2],
            reference.visibility_idler,
            reference.std_idler,
            reference.shot_noise_idler,
        ),
    ];
    for (label, vis, std, shot) in refs {
        let Some(t) = traces.iter().find(|t| t.label == label) else {
            continue;
        };
        let mut push = |quantity: &str, value: Option<f64>, reference: Option<f64>| {
            if let (Some(value), Some(reference)) = (value, reference) {
                rows.push(ComparisonRow {
                    trace: label.into(),
                    quantity: quantity.into(),
                    value,
                    reference,
                    difference: value - reference,
                });
            }
        };
        push("visibility", t.estimate.as_ref().map(|e| e.mean), vis);
        push("std", t.estimate.as_ref().map(|e| e.std), std);
        push("shot_noise", t.shot_noise, shot);
    }
    rows
}

/// Analyses already-binned traces of a scenario.
pub fn analyze_traces(scenario: &Scenario, traces: &[FringeTrace], seed: u64) -> Result<RunReport> {
    let period = scenario.period_bins()?;
    let mut analyses = Vec::with_capacity(traces.len());
    for (k, t) in traces.iter().enumerate() {
        let opts = AnalysisOptions {
            seed: seed.wrapping_add(k as u64),
            ..scenario.analysis
        };
        analyses.push(analyze_trace(t, period, &opts)?);
    }
    let comparison = scenario
        .reference
        .as_ref()
        .map(|r| comparison_rows(r, &analyses))
        .unwrap_or_default();
    let degenerate = analyses.iter().any(|a| a.degenerate);
    Ok(RunReport {
        scenario: scenario.name.clone(),
        distance: scenario.distance,
        seed,
        turbulence_sigma_angle: scenario.turbulence.model.sigma_angle,
        turbulence_sigma_origin: scenario.turbulence.sigma_origin,
        audit: run_audit(scenario)?,
        traces: analyses,
        comparison,
        degenerate,
    })
}

/// Expands directories into their trace files, in [`TRACE_LABELS`] order.
pub fn resolve_trace_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let found: Vec<PathBuf> = TRACE_LABELS
                .iter()
                .map(|l| p.join(format!("{l}.csv")))
                .filter(|f| f.is_file())
                .collect();
            if found.is_empty() {
                return Err(Error::io(
                    p,
                    std::io::Error::new(
                        std::io::ErrorKind::NotFound,
                        "directory holds no trace CSV files",
                    ),
                ));
            }
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Loads trace CSVs, analyses them and writes the report, one histogram per
/// trace and a plain-text summary into `out_dir`.
pub fn run_analyze(
    scenario: &Scenario,
    inputs: &[PathBuf],
    seed: u64,
    out_dir: &Path,
    format: ReportFormat,
) -> Result<RunReport> {
    let files = resolve_trace_inputs(inputs)?;
    let traces = files
        .iter()
        .map(|f| FringeTrace::load(f))
        .collect::<Result<Vec<_>>>()?;
    let report = analyze_traces(scenario, &traces, seed)?;
    write_report(&report, out_dir, format)?;
    Ok(report)
}

pub fn write_report(report: &RunReport, out_dir: &Path, format: ReportFormat) -> Result<()> {
    ensure_dir(out_dir)?;
    let p = out_dir.join(format!("report.{}", format.extension()));
    match format {
        ReportFormat::Json => write_json(&p, report)?,
        ReportFormat::Csv => report
            .write_csv(create(&p)?)
            .map_err(|e| Error::io(&p, e))?,
    }
    for t in &report.traces {
        if let Some(e) = &t.estimate {
            let p = out_dir.join(format!("histogram_{}.csv", t.label));
            write_histogram_csv(&e.samples, HISTOGRAM_BINS, create(&p)?)
                .map_err(|e| Error::io(&p, e))?;
        }
    }
    write_text(&out_dir.join("summary.txt"), &report.summary())
}

// --------------------------------------------------------- extrapolation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationReport {
    /// `(distance m, visibility)` pairs.
    pub points: Vec<(f64, f64)>,
    /// Visibility change per metre.
    pub slope: f64,
    pub intercept: f64,
    pub visibility_at_250m: f64,
    pub visibility_at_500m: f64,
    pub distance_at_50pct: Option<f64>,
    pub distance_at_10pct: Option<f64>,
    pub flags: Vec<String>,
}

impl ExtrapolationReport {
    pub fn summary(&self) -> String {
        let fmt_d = |d: Option<f64>| {
            d.map(|d| format!("{d:.1} m"))
                .unwrap_or_else(|| "unbounded".into())
        };
        format!(
            "line through {} points: V(d) = {:.4} {:+.6} d\n  V(250 m) = {:.2}%\n  V(500 m) = {:.2}%\n  V = 50% at {}\n  V = 10% at {}\n{}",
            self.points.len(),
            self.intercept,
            self.slope,
            100.0 * self.visibility_at_250m,
            100.0 * self.visibility_at_500m,
            fmt_d(self.distance_at_50pct),
            fmt_d(self.distance_at_10pct),
            self.flags.iter().map(|f| format!("  note: {f}\n")).collect::<String>()
        )
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "quantity,value")?;
        writeln!(w, "slope_per_m,{}", self.slope)?;
        writeln!(w, "intercept,{}", self.intercept)?;
        writeln!(w, "visibility_at_250m,{}", self.visibility_at_250m)?;
        writeln!(w, "visibility_at_500m,{}", self.visibility_at_500m)?;
        writeln!(w, "distance_at_50pct_m,{}", csv_opt(self.distance_at_50pct))?;
        writeln!(w, "distance_at_10pct_m,{}", csv_opt(self.distance_at_10pct))?;
        w.flush()
    }
}

/// Straight-line extrapolation of visibility (fractions) over distance.
pub fn extrapolate_points(points: &[(f64, f64)]) -> Result<ExtrapolationReport> {
    let line = linear_visibility_extrapolation(points)?;
    let mut flags = Vec::new();
    let mut reach = |v: f64| match line.distance_at(v) {
        None => {
            flags.push(format!("flat line never reaches V = {v}"));
            None
        }
        Some(d) if line.slope > 0.0 || d < 0.0 => {
            flags.push(format!(
                "V = {v} is reached only at {d:.1} m, outside the decaying regime"
            ));
            None
        }
        Some(d) => Some(d),
    };
    let distance_at_50pct = reach(0.5);
    let distance_at_10pct = reach(0.1);
    Ok(ExtrapolationReport {
        points: points.to_vec(),
        slope: line.slope,
        intercept: line.intercept,
        visibility_at_250m: line.value_at(250.0),
        visibility_at_500m: line.value_at(500.0),
        distance_at_50pct,
        distance_at_10pct,
        flags,
    })
}

/// Reads `report.json` files (or directories holding one) and extrapolates
/// their coincidence visibilities.
pub fn run_extrapolate(
    reports: &[PathBuf],
    extra_points: &[(f64, f64)],
) -> Result<ExtrapolationReport> {
    let mut points = Vec::new();
    for p in reports {
        let path = if p.is_dir() {
            p.join("report.json")
        } else {
            p.clone()
        };
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let report: RunReport = serde_json::from_str(&text)
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        let v = report.coincidence_visibility().ok_or_else(|| {
            Error::degenerate(format!("{} has no coincidence visibility", path.display()))
        })?;
        points.push((report.distance, v));
    }
    points.extend_from_slice(extra_points);
    extrapolate_points(&points)
}

pub fn write_extrapolation(
    report: &ExtrapolationReport,
    out_dir: &Path,
    format: ReportFormat,
) -> Result<()> {
    ensure_dir(out_dir)?;
    let p = out_dir.join(format!("extrapolation.{}", format.extension()));
    match format {
        ReportFormat::Json => write_json(&p, report),
        ReportFormat::Csv => report.write_csv(create(&p)?).map_err(|e| Error::io(&p, e)),
    }
}

// ------------------------------------------------------------ reproduce

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproductionRow {
    pub scenario: String,
    pub distance: f64,
    pub trace: String,
    pub visibility: Option<f64>,
    pub std: Option<f64>,
    pub shot_noise: Option<f64>,
    pub reference_visibility: Option<f64>,
    pub reference_std: Option<f64>,
    pub reference_shot_noise: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reproduction {
    pub seed: u64,
    pub rows: Vec<ReproductionRow>,
    pub audits_within_tolerance: bool,
    pub simulated_extrapolation: Option<ExtrapolationReport>,
    pub reference_extrapolation: Option<ExtrapolationReport>,
}

impl Reproduction {
    pub fn summary(&self) -> String {
        let pct = |v: Option<f64>| {
            v.map(|x| format!("{:6.2}", 100.0 * x))
                .unwrap_or_else(|| "   n/a".into())
        };
        let mut s = format!(
            "{:<10} {:<13} {:>7} {:>7} {:>7} | {:>7} {:>7} {:>7}\n",
            "scenario", "trace", "V%", "std%", "shot%", "refV%", "refstd%", "refsh%"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<10} {:<13} {:>7} {:>7} {:>7} | {:>7} {:>7} {:>7}",
                r.scenario,
                r.trace,
                pct(r.visibility),
                pct(r.std),
                pct(r.shot_noise),
                pct(r.reference_visibility),
                pct(r.reference_std),
                pct(r.reference_shot_noise)
            );
        }
        let _ = writeln!(
            s,
            "optics audit: {}",
            if self.audits_within_tolerance {
                "all references within 1%"
            } else {
                "reference mismatch"
            }
        );
        if let Some(e) = &self.simulated_extrapolation {
            let _ = write!(s, "simulated {}", e.summary());
        }
        if let Some(e) = &self.reference_extrapolation {
            let _ = write!(s, "reference {}", e.summary());
        }
        s
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "scenario,distance_m,trace,visibility,std,shot_noise,reference_visibility,reference_std,reference_shot_noise"
        )?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.scenario,
                r.distance,
                r.trace,
                csv_opt(r.visibility),
                csv_opt(r.std),
                csv_opt(r.shot_noise),
                csv_opt(r.reference_visibility),
                csv_opt(r.reference_std),
                csv_opt(r.reference_shot_noise)
            )?;
        }
        w.flush()
    }
}

/// Simulates and analyses every preset, writing per-preset outputs into
/// subdirectories of `out_dir` and a comparison table at its top level.
pub fn reproduce(
    seed: u64,
    out_dir: &Path,
    tags: TagFormat,
    format: ReportFormat,
) -> Result<Reproduction> {
    ensure_dir(out_dir)?;
    let mut rows = Vec::new();
    let mut sim_points = Vec::new();
    let mut ref_points = Vec::new();
    let mut audits_ok = true;
    for name in PRESET_NAMES {
        let scenario = preset(name)?.expect("preset exists");
        let dir = out_dir.join(name);
        run_simulate(&scenario, seed, &dir, tags, format)?;
        let report = run_analyze(&scenario, std::slice::from_ref(&dir), seed, &dir, format)?;
        audits_ok &= report.audit.all_within_tolerance;
        let r = scenario.reference.clone().unwrap_or_default();
        let refs = [
            (
                r.visibility_coincidences,
                r.std_coincidences,
                r.shot_noise_coincidences,
            ),
            (r.visibility_signal, r.std_signal, r.shot_noise_signal),
            (r.visibility_idler, r.std_idler, r.shot_noise_idler),
        ];
        for (t, (rv, rs, rsn)) in report.traces.iter().zip(refs) {
            rows.push(ReproductionRow {
                scenario: name.into(),
                distance: scenario.distance,
                trace: t.label.clone(),
                visibility: t.estimate.as_ref().map(|e| e.mean),
                std: t.estimate.as_ref().map(|e| e.std),
                shot_noise: t.shot_noise,
                reference_visibility: rv,
                reference_std: rs,
                reference_shot_noise: rsn,
            });
        }
        if let Some(v) = report.coincidence_visibility() {
            sim_points.push((scenario.distance, v));
        }
        if let Some(v) = r.visibility_coincidences {
            ref_points.push((scenario.distance, v));
        }
    }
    let result = Reproduction {
        seed,
        rows,
        audits_within_tolerance: audits_ok,
        simulated_extrapolation: extrapolate_points(&sim_points).ok(),
        reference_extrapolation: extrapolate_points(&ref_points).ok(),
    };
    let p = out_dir.join(format!("reproduce.{}", format.extension()));
    match format {
        ReportFormat::Json => write_json(&p, &result)?,
        ReportFormat::Csv => result
            .write_csv(create(&p)?)
            .map_err(|e| Error::io(&p, e))?,
    }
    write_text(&out_dir.join("summary.txt"), &result.summary())?;
    Ok(result)
}
