//! Physical problem description: uniform linear array, line-of-sight
//! channels with free-space fading, and the sampled desired beampattern.
//!
//! Angles are carried in degrees and converted at the point of use; powers
//! and gains are linear (mW, unitless). The TOML scenario file is the only
//! place dB quantities appear, see [`ScenarioConfig`].

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CVector, C64};
use crate::units::{db_to_linear, dbm_to_mw, linear_to_db};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Angles must lie strictly inside this half-plane, in degrees.
pub const MAX_ANGLE_DEG: f64 = 90.0;

const ANGLE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    num_antennas: usize,
    carrier_frequency: f64,
    element_spacing: f64,
}

impl ArrayGeometry {
    pub fn new(num_antennas: usize, carrier_frequency: f64, element_spacing: f64) -> Result<Self> {
        if num_antennas < 2 {
            return Err(Error::invalid(format!("array needs at least 2 antennas, got {num_antennas}")));
        }
        if !(carrier_frequency > 0.0 && carrier_frequency.is_finite()) {
            return Err(Error::invalid(format!("carrier frequency must be positive, got {carrier_frequency}")));
        }
        if !(element_spacing > 0.0 && element_spacing.is_finite()) {
            return Err(Error::invalid(format!("element spacing must be positive, got {element_spacing}")));
        }
        Ok(Self { num_antennas, carrier_frequency, element_spacing })
    }

    /// Array with the customary half-wavelength spacing.
    pub fn half_wavelength(num_antennas: usize, carrier_frequency: f64) -> Result<Self> {
        if !(carrier_frequency > 0.0) {
            return Err(Error::invalid(format!("carrier frequency must be positive, got {carrier_frequency}")));
        }
        Self::new(num_antennas, carrier_frequency, 0.5 * SPEED_OF_LIGHT / carrier_frequency)
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn carrier_frequency(&self) -> f64 {
        self.carrier_frequency
    }

    pub fn element_spacing(&self) -> f64 {
        self.element_spacing
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    /// Same carrier and spacing, different element count.
    pub fn with_antennas(&self, num_antennas: usize) -> Result<Self> {
        Self::new(num_antennas, self.carrier_frequency, self.element_spacing)
    }
}

/// Anything the array can point at: a communication user or a radar target.
pub trait Endpoint {
    fn angle_deg(&self) -> f64;
    fn distance_m(&self) -> f64;
    fn tx_gain(&self) -> f64;
    fn rx_gain(&self) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserSpec {
    pub angle_deg: f64,
    pub distance_m: f64,
    /// Receiver noise power, mW.
    pub noise_power: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
}

impl UserSpec {
    pub fn new(angle_deg: f64, distance_m: f64, noise_power_dbm: f64, tx_gain_db: f64, rx_gain_db: f64) -> Self {
        Self {
            angle_deg,
            distance_m,
            noise_power: dbm_to_mw(noise_power_dbm),
            tx_gain: db_to_linear(tx_gain_db),
            rx_gain: db_to_linear(rx_gain_db),
        }
    }

    fn validate(&self, k: usize) -> Result<()> {
        check_angle(self.angle_deg).map_err(|e| Error::invalid(format!("user {k}: {e}")))?;
        if !(self.distance_m > 0.0 && self.distance_m.is_finite()) {
            return Err(Error::invalid(format!("user {k}: distance must be positive")));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(Error::invalid(format!("user {k}: noise power must be positive")));
        }
        if !(self.tx_gain > 0.0 && self.rx_gain > 0.0) {
            return Err(Error::invalid(format!("user {k}: gains must be positive")));
        }
        Ok(())
    }
}

impl Endpoint for UserSpec {
    fn angle_deg(&self) -> f64 {
        self.angle_deg
    }
    fn distance_m(&self) -> f64 {
        self.distance_m
    }
    fn tx_gain(&self) -> f64 {
        self.tx_gain
    }
    fn rx_gain(&self) -> f64 {
        self.rx_gain
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    pub angle_deg: f64,
    pub distance_m: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
}

impl TargetSpec {
    /// Target seen through unit (0 dB) antenna gains.
    pub fn new(angle_deg: f64, distance_m: f64) -> Self {
        Self { angle_deg, distance_m, tx_gain: 1.0, rx_gain: 1.0 }
    }

    fn validate(&self, p: usize) -> Result<()> {
        check_angle(self.angle_deg).map_err(|e| Error::invalid(format!("target {p}: {e}")))?;
        if !(self.distance_m > 0.0 && self.distance_m.is_finite()) {
            return Err(Error::invalid(format!("target {p}: distance must be positive")));
        }
        if !(self.tx_gain > 0.0 && self.rx_gain > 0.0) {
            return Err(Error::invalid(format!("target {p}: gains must be positive")));
        }
        Ok(())
    }
}

impl Endpoint for TargetSpec {
    fn angle_deg(&self) -> f64 {
        self.angle_deg
    }
    fn distance_m(&self) -> f64 {
        self.distance_m
    }
    fn tx_gain(&self) -> f64 {
        self.tx_gain
    }
    fn rx_gain(&self) -> f64 {
        self.rx_gain
    }
}

/// How free-space loss scales the user channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelScaling {
    /// `h = beta a(theta)`: the received power is `beta^2 |a^H w|^2`.
    #[default]
    Pathloss,
    /// `h = sqrt(beta) a(theta)`, so `h^H h = beta N`.
    SqrtPathloss,
}

impl ChannelScaling {
    /// Amplitude factor applied to the steering vector.
    pub fn amplitude(self, beta: f64) -> f64 {
        match self {
            Self::Pathloss => beta,
            Self::SqrtPathloss => beta.sqrt(),
        }
    }
}

/// A complete problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub array: ArrayGeometry,
    pub users: Vec<UserSpec>,
    pub targets: Vec<TargetSpec>,
    /// Minimum rate per user, bits/s/Hz.
    pub rate_floor: f64,
    /// Full mainlobe width, degrees.
    pub beam_width_deg: f64,
    /// Power the target must receive, mW.
    pub target_receive_level: f64,
    pub grid_resolution_deg: f64,
    pub sidelobe_region_enabled: bool,
    pub sidelobe_level: f64,
    pub sidelobe_tolerance: f64,
    pub mainlobe_tolerance_fraction: f64,
    pub channel_scaling: ChannelScaling,
}

pub const DEFAULT_GRID_RESOLUTION_DEG: f64 = 1.0;
pub const DEFAULT_MAINLOBE_TOLERANCE_FRACTION: f64 = 0.1;

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.users.is_empty() {
            return Err(Error::invalid("scenario needs at least one user"));
        }
        if self.targets.is_empty() {
            return Err(Error::invalid("scenario needs at least one target"));
        }
        for (k, u) in self.users.iter().enumerate() {
            u.validate(k)?;
        }
        for (p, t) in self.targets.iter().enumerate() {
            t.validate(p)?;
        }
        if !(self.rate_floor > 0.0 && self.rate_floor.is_finite()) {
            return Err(Error::invalid(format!("rate floor must be positive, got {}", self.rate_floor)));
        }
        if !(self.beam_width_deg >= 0.0 && self.beam_width_deg.is_finite()) {
            return Err(Error::invalid(format!("beam width must be >= 0, got {}", self.beam_width_deg)));
        }
        if !(self.target_receive_level > 0.0 && self.target_receive_level.is_finite()) {
            return Err(Error::invalid("target receive level must be a finite power"));
        }
        if !(self.grid_resolution_deg > 0.0 && self.grid_resolution_deg.is_finite()) {
            return Err(Error::invalid(format!("grid resolution must be positive, got {}", self.grid_resolution_deg)));
        }
        let f = self.mainlobe_tolerance_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::invalid(format!("mainlobe tolerance fraction must be in (0, 1), got {f}")));
        }
        if self.sidelobe_region_enabled {
            if !(self.sidelobe_level >= 0.0 && self.sidelobe_level.is_finite()) {
                return Err(Error::invalid("sidelobe level must be >= 0"));
            }
            if !(self.sidelobe_tolerance > 0.0 && self.sidelobe_tolerance.is_finite()) {
                return Err(Error::invalid("sidelobe tolerance must be > 0"));
            }
        }
        let half = self.beam_width_deg / 2.0;
        for (p, t) in self.targets.iter().enumerate() {
            if t.angle_deg - half <= -MAX_ANGLE_DEG || t.angle_deg + half >= MAX_ANGLE_DEG {
                return Err(Error::invalid(format!(
                    "target {p}: mainlobe [{}, {}] leaves (-90, 90)",
                    t.angle_deg - half,
                    t.angle_deg + half
                )));
            }
        }
        Ok(())
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.array.num_antennas()
    }

    pub fn user_pathloss(&self, k: usize) -> Result<f64> {
        endpoint_pathloss(&self.users[k], self.array.wavelength())
    }

    pub fn target_pathloss(&self, p: usize) -> Result<f64> {
        endpoint_pathloss(&self.targets[p], self.array.wavelength())
    }

    pub fn user_channel(&self, k: usize) -> Result<CVector> {
        channel_vector(&self.array, &self.users[k], self.channel_scaling)
    }

    /// Desired mainlobe level for target `p`, chosen so the target receives
    /// the configured power after free-space loss.
    pub fn target_level(&self, p: usize) -> Result<f64> {
        Ok(self.target_receive_level / self.target_pathloss(p)?)
    }

    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        let array = match cfg.array.element_spacing_m {
            Some(d) => ArrayGeometry::new(cfg.array.num_antennas, cfg.array.carrier_frequency_hz, d)?,
            None => ArrayGeometry::half_wavelength(cfg.array.num_antennas, cfg.array.carrier_frequency_hz)?,
        };
        let users = cfg
            .users
            .iter()
            .map(|u| UserSpec::new(u.angle_deg, u.distance_m, u.noise_power_dbm, u.tx_gain_db, u.rx_gain_db))
            .collect();
        let targets = cfg
            .targets
            .iter()
            .map(|t| TargetSpec {
                angle_deg: t.angle_deg,
                distance_m: t.distance_m,
                tx_gain: db_to_linear(t.tx_gain_db),
                rx_gain: db_to_linear(t.rx_gain_db),
            })
            .collect();
        if cfg.sidelobe_region_enabled && (cfg.sidelobe_level.is_none() || cfg.sidelobe_tolerance.is_none()) {
            return Err(Error::Config("sidelobe_region_enabled requires sidelobe_level and sidelobe_tolerance".into()));
        }
        let s = Self {
            array,
            users,
            targets,
            rate_floor: cfg.rate_floor,
            beam_width_deg: cfg.beam_width_deg,
            target_receive_level: dbm_to_mw(cfg.target_receive_level_dbm),
            grid_resolution_deg: cfg.grid_resolution_deg,
            sidelobe_region_enabled: cfg.sidelobe_region_enabled,
            sidelobe_level: cfg.sidelobe_level.unwrap_or(0.0),
            sidelobe_tolerance: cfg.sidelobe_tolerance.unwrap_or(0.0),
            mainlobe_tolerance_fraction: cfg.mainlobe_tolerance_fraction,
            channel_scaling: cfg.channel_scaling,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn to_config(&self) -> ScenarioConfig {
        ScenarioConfig {
            rate_floor: self.rate_floor,
            beam_width_deg: self.beam_width_deg,
            target_receive_level_dbm: linear_to_db(self.target_receive_level),
            grid_resolution_deg: self.grid_resolution_deg,
            mainlobe_tolerance_fraction: self.mainlobe_tolerance_fraction,
            channel_scaling: self.channel_scaling,
            sidelobe_region_enabled: self.sidelobe_region_enabled,
            sidelobe_level: self.sidelobe_region_enabled.then_some(self.sidelobe_level),
            sidelobe_tolerance: self.sidelobe_region_enabled.then_some(self.sidelobe_tolerance),
            array: ArrayConfig {
                num_antennas: self.array.num_antennas(),
                carrier_frequency_hz: self.array.carrier_frequency(),
                element_spacing_m: Some(self.array.element_spacing()),
            },
            users: self
                .users
                .iter()
                .map(|u| UserConfig {
                    angle_deg: u.angle_deg,
                    distance_m: u.distance_m,
                    noise_power_dbm: linear_to_db(u.noise_power),
                    tx_gain_db: linear_to_db(u.tx_gain),
                    rx_gain_db: linear_to_db(u.rx_gain),
                })
                .collect(),
            targets: self
                .targets
                .iter()
                .map(|t| TargetConfig {
                    angle_deg: t.angle_deg,
                    distance_m: t.distance_m,
                    tx_gain_db: linear_to_db(t.tx_gain),
                    rx_gain_db: linear_to_db(t.rx_gain),
                })
                .collect(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_config(&cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

fn check_angle(deg: f64) -> Result<()> {
    if !(deg > -MAX_ANGLE_DEG && deg < MAX_ANGLE_DEG) {
        return Err(Error::invalid(format!("angle {deg} deg outside (-90, 90)")));
    }
    Ok(())
}

/// On-disk scenario. Field names carry their units; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub rate_floor: f64,
    pub beam_width_deg: f64,
    pub target_receive_level_dbm: f64,
    #[serde(default = "default_grid")]
    pub grid_resolution_deg: f64,
    #[serde(default = "default_mainlobe_fraction")]
    pub mainlobe_tolerance_fraction: f64,
    #[serde(default)]
    pub channel_scaling: ChannelScaling,
    #[serde(default)]
    pub sidelobe_region_enabled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sidelobe_level: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sidelobe_tolerance: Option<f64>,
    pub array: ArrayConfig,
    pub users: Vec<UserConfig>,
    pub targets: Vec<TargetConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub num_antennas: usize,
    pub carrier_frequency_hz: f64,
    /// Defaults to half a wavelength.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element_spacing_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserConfig {
    pub angle_deg: f64,
    pub distance_m: f64,
    pub noise_power_dbm: f64,
    #[serde(default)]
    pub tx_gain_db: f64,
    #[serde(default)]
    pub rx_gain_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub angle_deg: f64,
    pub distance_m: f64,
    #[serde(default)]
    pub tx_gain_db: f64,
    #[serde(default)]
    pub rx_gain_db: f64,
}

fn default_grid() -> f64 {
    DEFAULT_GRID_RESOLUTION_DEG
}

fn default_mainlobe_fraction() -> f64 {
    DEFAULT_MAINLOBE_TOLERANCE_FRACTION
}

/// ULA response; element `n` is `exp(j 2 pi (d/lambda) n cos(theta))`.
///
/// Accepts the closed range [-90, 90] degrees; scenario angles are further
/// restricted to the open interval.
pub fn steering_vector(array: &ArrayGeometry, angle_deg: f64) -> Result<CVector> {
    if !(-MAX_ANGLE_DEG..=MAX_ANGLE_DEG).contains(&angle_deg) {
        return Err(Error::invalid(format!("angle {angle_deg} deg outside [-90, 90]")));
    }
    let phase_step = 2.0 * PI * array.element_spacing() / array.wavelength() * angle_deg.to_radians().cos();
    Ok(CVector::from_fn(array.num_antennas(), |n, _| C64::from_polar(1.0, phase_step * n as f64)))
}

/// Free-space power gain `G_T G_R lambda^2 / ((4 pi)^2 d^2)`.
pub fn pathloss(distance_m: f64, tx_gain: f64, rx_gain: f64, wavelength: f64) -> Result<f64> {
    if !(distance_m > 0.0 && distance_m.is_finite()) {
        return Err(Error::invalid(format!("distance must be positive, got {distance_m}")));
    }
    if !(wavelength > 0.0 && tx_gain > 0.0 && rx_gain > 0.0) {
        return Err(Error::invalid("wavelength and gains must be positive"));
    }
    let four_pi = 4.0 * PI;
    Ok(tx_gain * rx_gain * wavelength * wavelength / (four_pi * four_pi * distance_m * distance_m))
}

pub fn endpoint_pathloss(e: &impl Endpoint, wavelength: f64) -> Result<f64> {
    pathloss(e.distance_m(), e.tx_gain(), e.rx_gain(), wavelength)
}

/// LOS channel, `a(theta)` scaled by the pathloss amplitude.
pub fn channel_vector(array: &ArrayGeometry, e: &impl Endpoint, scaling: ChannelScaling) -> Result<CVector> {
    let beta = endpoint_pathloss(e, array.wavelength())?;
    Ok(steering_vector(array, e.angle_deg())? * C64::new(scaling.amplitude(beta), 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternSample {
    pub angle_deg: f64,
    /// Desired transmit beampattern level.
    pub level: f64,
    pub tolerance: f64,
    /// Target whose mainlobe holds this sample; `None` for sidelobe samples.
    pub target: Option<usize>,
}

impl PatternSample {
    pub fn lower(&self) -> f64 {
        self.level - self.tolerance
    }

    pub fn upper(&self) -> f64 {
        self.level + self.tolerance
    }
}

/// Sampled desired beampattern, sorted by angle.
#[derive(Debug, Clone, PartialEq)]
pub struct DesiredBeampattern {
    samples: Vec<PatternSample>,
}

impl DesiredBeampattern {
    pub fn new(mut samples: Vec<PatternSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("desired beampattern needs at least one sample"));
        }
        for s in &samples {
            check_angle(s.angle_deg)?;
            if !(s.level >= 0.0 && s.level.is_finite()) {
                return Err(Error::invalid(format!("sample at {} deg has negative level", s.angle_deg)));
            }
            if !(s.tolerance > 0.0 && s.tolerance.is_finite()) {
                return Err(Error::invalid(format!("sample at {} deg needs a positive tolerance", s.angle_deg)));
            }
        }
        samples.sort_by(|a, b| a.angle_deg.total_cmp(&b.angle_deg));
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[PatternSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn angles(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.angle_deg).collect()
    }

    pub fn contains_angle(&self, deg: f64) -> bool {
        self.samples.iter().any(|s| (s.angle_deg - deg).abs() <= ANGLE_EPS)
    }
}

fn grid_points(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let first = (lo / step - ANGLE_EPS).ceil() as i64;
    let last = (hi / step + ANGLE_EPS).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

/// Mainlobe samples at `phi_p` over `[theta_p - Delta/2, theta_p + Delta/2]`
/// on the grid, plus `theta_p` itself; optional sidelobe samples elsewhere.
pub fn build_desired_pattern(scenario: &Scenario) -> Result<DesiredBeampattern> {
    scenario.validate()?;
    let half = scenario.beam_width_deg / 2.0;
    let step = scenario.grid_resolution_deg;
    let frac = scenario.mainlobe_tolerance_fraction;

    let levels: Vec<f64> = (0..scenario.targets.len()).map(|p| scenario.target_level(p)).collect::<Result<_>>()?;
    let lobes: Vec<(f64, f64)> = scenario.targets.iter().map(|t| (t.angle_deg - half, t.angle_deg + half)).collect();

    for p in 0..lobes.len() {
        for q in p + 1..lobes.len() {
            let overlap = lobes[p].0 <= lobes[q].1 + ANGLE_EPS && lobes[q].0 <= lobes[p].1 + ANGLE_EPS;
            let same_level = (levels[p] - levels[q]).abs() <= 1e-12 * levels[p].max(levels[q]);
            if overlap && !same_level {
                return Err(Error::AmbiguousPattern(format!(
                    "mainlobes of targets {p} and {q} overlap with levels {:.6e} and {:.6e}",
                    levels[p], levels[q]
                )));
            }
        }
    }

    let mut samples: Vec<PatternSample> = Vec::new();
    let push = |s: PatternSample, samples: &mut Vec<PatternSample>| {
        if !samples.iter().any(|o| (o.angle_deg - s.angle_deg).abs() <= ANGLE_EPS) {
            samples.push(s);
        }
    };
    for (p, t) in scenario.targets.iter().enumerate() {
        let (lo, hi) = lobes[p];
        let mut angles = grid_points(lo, hi, step);
        angles.push(t.angle_deg);
        for a in angles {
            push(
                PatternSample { angle_deg: a, level: levels[p], tolerance: frac * levels[p], target: Some(p) },
                &mut samples,
            );
        }
    }
    if scenario.sidelobe_region_enabled {
        let in_lobe = |a: f64| lobes.iter().any(|&(lo, hi)| a >= lo - ANGLE_EPS && a <= hi + ANGLE_EPS);
        for a in grid_points(-MAX_ANGLE_DEG, MAX_ANGLE_DEG, step) {
            if a <= -MAX_ANGLE_DEG + ANGLE_EPS || a >= MAX_ANGLE_DEG - ANGLE_EPS || in_lobe(a) {
                continue;
            }
            push(
                PatternSample {
                    angle_deg: a,
                    level: scenario.sidelobe_level,
                    tolerance: scenario.sidelobe_tolerance,
                    target: None,
                },
                &mut samples,
            );
        }
    }
    DesiredBeampattern::new(samples)
}

/// Index of the target whose angle is closest to `deg`.
pub fn nearest_target(scenario: &Scenario, deg: f64) -> usize {
    scenario
        .targets
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1.angle_deg - deg).abs().total_cmp(&(b.1.angle_deg - deg).abs()))
        .map(|(p, _)| p)
        .unwrap_or(0)
}
