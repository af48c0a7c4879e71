#![allow(dead_code)]

use std::path::PathBuf;

use isac_beam::scene::{ArrayGeometry, Scenario, TargetSpec, UserSpec};
use isac_beam::units::dbm_to_mw;

pub fn scenario(n: usize, users: &[(f64, f64)], targets: &[(f64, f64)], width_deg: f64) -> Scenario {
    Scenario {
        array: ArrayGeometry::half_wavelength(n, 0.95e9).unwrap(),
        users: users.iter().map(|&(a, d)| UserSpec::new(a, d, -75.0, 0.0, 0.0)).collect(),
        targets: targets.iter().map(|&(a, d)| TargetSpec::new(a, d)).collect(),
        rate_floor: 1.0,
        beam_width_deg: width_deg,
        target_receive_level: dbm_to_mw(-13.0),
        grid_resolution_deg: 1.0,
        sidelobe_region_enabled: false,
        sidelobe_level: 0.0,
        sidelobe_tolerance: 0.0,
        mainlobe_tolerance_fraction: 0.1,
        channel_scaling: Default::default(),
    }
}

pub fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}
