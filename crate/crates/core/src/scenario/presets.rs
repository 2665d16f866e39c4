//! Built-in scenarios for the 2 m, 20 m and 70 m source separations.

use super::config::Scenario;
use crate::error::Result;
use crate::turbulence::Anchor;

pub const PRESET_NAMES: [&str; 3] = ["link_2m", "link_20m", "link_70m"];

const LINK_2M: &str = include_str!("../../../../scenarios/link_2m.toml");
const LINK_20M: &str = include_str!("../../../../scenarios/link_20m.toml");
const LINK_70M: &str = include_str!("../../../../scenarios/link_70m.toml");

/// Angle-of-arrival spread against link length, fitted once so that
/// simulated ensembles reproduce the measured coincidence visibilities
/// (see the `calibrate` example).
pub const CALIBRATED_ANCHORS: [Anchor; 3] = [
    Anchor {
        distance: 2.0,
        sigma_angle: 4e-6,
    },
    Anchor {
        distance: 20.0,
        sigma_angle: 20e-6,
    },
    Anchor {
        distance: 70.0,
        sigma_angle: 45e-6,
    },
];

pub fn calibrated_anchors() -> Vec<Anchor> {
    CALIBRATED_ANCHORS.to_vec()
}

/// TOML text of a preset.
pub fn preset_text(name: &str) -> Option<&'static str> {
    match name {
        "link_2m" => Some(LINK_2M),
        "link_20m" => Some(LINK_20M),
        "link_70m" => Some(LINK_70M),
        _ => None,
    }
}

/// Parses a preset by name; `Ok(None)` when no preset has that name.
pub fn preset(name: &str) -> Result<Option<Scenario>> {
    preset_text(name)
        .map(|text| Scenario::from_toml_str(text, name, &CALIBRATED_ANCHORS))
        .transpose()
}

/// Like [`preset`] with caller-supplied anchors, for calibration runs.
pub fn preset_with_anchors(name: &str, anchors: &[Anchor]) -> Result<Option<Scenario>> {
    preset_text(name)
        .map(|text| Scenario::from_toml_str(text, name, anchors))
        .transpose()
}
