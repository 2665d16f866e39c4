//! Scenario files, built-in presets and the end-to-end pipelines.

pub mod config;
pub mod presets;
pub mod run;
pub mod units;

pub use config::{load_scenario, ReferenceValues, Scenario, SigmaOrigin};
pub use presets::{preset, CALIBRATED_ANCHORS, PRESET_NAMES};
pub use run::{
    analyze_traces, extrapolate_points, nominal_rates, reproduce, run_analyze, run_audit,
    run_extrapolate, run_simulate, simulate, write_audit, write_extrapolation, write_report,
    AuditReport, ExtrapolationReport, ReportFormat, Reproduction, RunReport, SimulateSummary,
    SimulationOutput, AUDIT_TOLERANCE, TRACE_LABELS,
};
pub use units::{parse_quantity, Dimension};
