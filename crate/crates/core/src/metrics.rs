//! Evaluation of candidate beamformers: power, SINR, rate, beampatterns.
//!
//! Every function here is a pure read of a [`BeamformerSet`]. When the set
//! carries extracted vectors `w_k`, communication terms are evaluated from
//! the vectors (`|a^H w_k|^2`); otherwise from the covariances.

use crate::error::{Error, Result};
use crate::linalg::{CVector, HermitianMatrix};
use crate::scene::{steering_vector, ArrayGeometry, DesiredBeampattern, Scenario};
use crate::units::mw_to_dbm;

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    covariances: Vec<HermitianMatrix>,
    radar_covariance: HermitianMatrix,
    vectors: Option<Vec<CVector>>,
}

impl BeamformerSet {
    pub fn new(covariances: Vec<HermitianMatrix>, radar_covariance: HermitianMatrix) -> Result<Self> {
        let n = radar_covariance.dim();
        if covariances.iter().any(|w| w.dim() != n) {
            return Err(Error::dims("all covariances must share the radar covariance dimension"));
        }
        Ok(Self { covariances, radar_covariance, vectors: None })
    }

    /// Rank-one set `W_k = w_k w_k^H`.
    pub fn from_vectors(vectors: Vec<CVector>, radar_covariance: HermitianMatrix) -> Result<Self> {
        let covariances = vectors.iter().map(HermitianMatrix::outer).collect();
        let mut set = Self::new(covariances, radar_covariance)?;
        if vectors.iter().any(|v| v.len() != set.dim()) {
            return Err(Error::dims("beamformer length must match the array size"));
        }
        set.vectors = Some(vectors);
        Ok(set)
    }

    /// Attaches extracted vectors; each must reproduce its covariance to
    /// `rank_one_tol` in relative Frobenius norm.
    pub fn with_vectors(mut self, vectors: Vec<CVector>, rank_one_tol: f64) -> Result<Self> {
        if vectors.len() != self.covariances.len() {
            return Err(Error::dims("one vector per covariance required"));
        }
        for (k, (w, cov)) in vectors.iter().zip(&self.covariances).enumerate() {
            if w.len() != self.dim() {
                return Err(Error::dims("beamformer length must match the array size"));
            }
            let resid = (cov.as_matrix() - w * w.adjoint()).norm();
            let scale = cov.frobenius_norm();
            if resid > rank_one_tol * scale {
                return Err(Error::RankOneViolation { index: k, ratio: resid / scale, tol: rank_one_tol });
            }
        }
        self.vectors = Some(vectors);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.radar_covariance.dim()
    }

    pub fn num_users(&self) -> usize {
        self.covariances.len()
    }

    pub fn covariances(&self) -> &[HermitianMatrix] {
        &self.covariances
    }

    pub fn radar_covariance(&self) -> &HermitianMatrix {
        &self.radar_covariance
    }

    pub fn vectors(&self) -> Option<&[CVector]> {
        self.vectors.as_deref()
    }

    /// Sum of communication covariances (from vectors when present).
    pub fn communication_covariance(&self) -> HermitianMatrix {
        let mut acc = HermitianMatrix::zeros(self.dim());
        match &self.vectors {
            Some(ws) => ws.iter().for_each(|w| acc = acc.add(&HermitianMatrix::outer(w))),
            None => self.covariances.iter().for_each(|w| acc = acc.add(w)),
        }
        acc
    }

    pub fn total_covariance(&self) -> HermitianMatrix {
        self.communication_covariance().add(&self.radar_covariance)
    }

    /// `x^H W_k x` for user `k`.
    fn user_quad(&self, k: usize, x: &CVector) -> f64 {
        match &self.vectors {
            Some(ws) => ws[k].dotc(x).norm_sqr(),
            None => self.covariances[k].quad_form(x),
        }
    }

    fn user_power(&self, k: usize) -> f64 {
        match &self.vectors {
            Some(ws) => ws[k].norm_squared(),
            None => self.covariances[k].trace(),
        }
    }
}

/// Average transmit power `sum_k tr(W_k) + tr(R_d)`, mW.
pub fn total_power(set: &BeamformerSet) -> f64 {
    (0..set.num_users()).map(|k| set.user_power(k)).sum::<f64>() + set.radar_covariance.trace()
}

/// Transmit-side beampattern `a^H (sum W_k + R_d) a`.
pub fn transmit_beampattern(set: &BeamformerSet, array: &ArrayGeometry, angle_deg: f64) -> Result<f64> {
    let a = steering_vector(array, angle_deg)?;
    check_dim(set, &a)?;
    Ok(quad_total(set, &a))
}

fn quad_total(set: &BeamformerSet, x: &CVector) -> f64 {
    (0..set.num_users()).map(|k| set.user_quad(k, x)).sum::<f64>() + set.radar_covariance.quad_form(x)
}

fn check_dim(set: &BeamformerSet, v: &CVector) -> Result<()> {
    if v.len() != set.dim() {
        return Err(Error::dims(format!(
            "vector of length {} against {}x{} covariances",
            v.len(),
            set.dim(),
            set.dim()
        )));
    }
    Ok(())
}

/// Beam gain through a channel, `h^H (sum W_k + R_d) h`.
pub fn channel_beam_gain(set: &BeamformerSet, channel: &CVector) -> Result<f64> {
    check_dim(set, channel)?;
    Ok(quad_total(set, channel))
}

/// Sum of squared deviations from the desired levels.
pub fn beam_matching_error(set: &BeamformerSet, pattern: &DesiredBeampattern, array: &ArrayGeometry) -> Result<f64> {
    pattern.samples().iter().try_fold(0.0, |acc, s| {
        let b = transmit_beampattern(set, array, s.angle_deg)?;
        Ok(acc + (s.level - b).powi(2))
    })
}

/// Signal-to-interference-plus-noise ratio at user `k`.
pub fn sinr(set: &BeamformerSet, k: usize, scenario: &Scenario) -> Result<f64> {
    if k >= scenario.num_users() {
        return Err(Error::invalid(format!("user index {k} out of range")));
    }
    let h = scenario.user_channel(k)?;
    sinr_for_channel(set, k, &h, scenario.users[k].noise_power)
}

/// SINR of user `k` given its channel vector and noise power (mW).
pub fn sinr_for_channel(set: &BeamformerSet, k: usize, channel: &CVector, noise_power: f64) -> Result<f64> {
    if k >= set.num_users() {
        return Err(Error::invalid(format!("user index {k} out of range")));
    }
    check_dim(set, channel)?;
    if !(noise_power > 0.0) {
        return Err(Error::invalid("noise power must be positive"));
    }
    let signal = set.user_quad(k, channel);
    let interference: f64 = (0..set.num_users()).filter(|&i| i != k).map(|i| set.user_quad(i, channel)).sum();
    let radar = set.radar_covariance.quad_form(channel);
    Ok(signal.max(0.0) / (interference.max(0.0) + radar.max(0.0) + noise_power))
}

/// Shannon rate `log2(1 + sinr)`, bits/s/Hz.
pub fn rate(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

/// Per-angle communication, radar and total transmit levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentCurves {
    pub angles_deg: Vec<f64>,
    pub communication: Vec<f64>,
    pub radar: Vec<f64>,
    pub total: Vec<f64>,
}

pub fn component_decomposition(
    set: &BeamformerSet,
    array: &ArrayGeometry,
    grid_deg: &[f64],
) -> Result<ComponentCurves> {
    let mut out = ComponentCurves {
        angles_deg: grid_deg.to_vec(),
        communication: Vec::with_capacity(grid_deg.len()),
        radar: Vec::with_capacity(grid_deg.len()),
        total: Vec::with_capacity(grid_deg.len()),
    };
    for &deg in grid_deg {
        let a = steering_vector(array, deg)?;
        check_dim(set, &a)?;
        let comm: f64 = (0..set.num_users()).map(|k| set.user_quad(k, &a)).sum();
        let radar = set.radar_covariance.quad_form(&a);
        out.communication.push(comm);
        out.radar.push(radar);
        out.total.push(comm + radar);
    }
    Ok(out)
}

/// The 181-point plotting grid, -90..=90 degrees in 1 degree steps.
pub fn plot_grid() -> Vec<f64> {
    (-90..=90).map(f64::from).collect()
}

/// dBm rendering used by every exported table; non-positive powers have no
/// logarithm and are written as `-inf`.
pub fn format_dbm(mw: f64) -> String {
    match mw_to_dbm(mw) {
        Some(v) => format_sig9(v),
        None => "-inf".to_string(),
    }
}

/// Nine significant digits, fixed notation when the exponent is moderate.
pub fn format_sig9(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0.00000000".into();
    }
    let sci = format!("{x:.8e}");
    let exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        sci
    }
}

/// Margin of one constraint of the rank-constrained problem; `margin >= -allowance` means satisfied.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintCheck {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    /// Positive when the constraint holds strictly.
    pub margin: f64,
    pub allowance: f64,
}

impl ConstraintCheck {
    pub fn passed(&self) -> bool {
        self.margin >= -self.allowance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub checks: Vec<ConstraintCheck>,
}

impl FeasibilityReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(ConstraintCheck::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConstraintCheck> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

/// Tolerances for [`check_constraints`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityTolerances {
    /// Allowed shortfall of each user's rate, bits/s/Hz.
    pub rate: f64,
    /// Relative slack on pattern bounds, times the desired level.
    pub pattern_relative: f64,
    /// Absolute slack on pattern bounds.
    pub pattern_absolute: f64,
    /// PSD tolerance on the radar covariance, relative to its largest eigenvalue.
    pub psd: f64,
}

impl Default for FeasibilityTolerances {
    fn default() -> Self {
        Self { rate: 1e-6, pattern_relative: 1e-6, pattern_absolute: 1e-8, psd: crate::linalg::PSD_TOL }
    }
}

/// Re-evaluates every constraint of the rank-constrained problem: user
/// rates, pattern bounds, and PSD radar covariance.
pub fn check_constraints(
    set: &BeamformerSet,
    scenario: &Scenario,
    pattern: &DesiredBeampattern,
    tol: &FeasibilityTolerances,
) -> Result<FeasibilityReport> {
    let mut checks = Vec::new();
    for k in 0..scenario.num_users() {
        let r = rate(sinr(set, k, scenario)?);
        checks.push(ConstraintCheck {
            name: format!("rate[{k}]"),
            value: r,
            bound: scenario.rate_floor,
            margin: r - scenario.rate_floor,
            allowance: tol.rate,
        });
    }
    for (m, s) in pattern.samples().iter().enumerate() {
        let b = transmit_beampattern(set, &scenario.array, s.angle_deg)?;
        let allowance = tol.pattern_relative * s.level + tol.pattern_absolute;
        checks.push(ConstraintCheck {
            name: format!("pattern_lower[{m}]@{}", s.angle_deg),
            value: b,
            bound: s.lower(),
            margin: b - s.lower(),
            allowance,
        });
        checks.push(ConstraintCheck {
            name: format!("pattern_upper[{m}]@{}", s.angle_deg),
            value: b,
            bound: s.upper(),
            margin: s.upper() - b,
            allowance,
        });
    }
    let (lo, hi) = set.radar_covariance.min_max_eigenvalues()?;
    checks.push(ConstraintCheck {
        name: "radar_psd".into(),
        value: lo,
        bound: 0.0,
        margin: lo,
        allowance: tol.psd * hi.max(0.0),
    });
    for (k, w) in set.covariances.iter().enumerate() {
        let (lo, hi) = w.min_max_eigenvalues()?;
        checks.push(ConstraintCheck {
            name: format!("covariance_psd[{k}]"),
            value: lo,
            bound: 0.0,
            margin: lo,
            allowance: tol.psd * hi.max(0.0),
        });
    }
    Ok(FeasibilityReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use crate::scene::{ChannelScaling, TargetSpec, UserSpec};
    use crate::units::dbm_to_mw;

    fn array(n: usize) -> ArrayGeometry {
        ArrayGeometry::half_wavelength(n, 0.95e9).unwrap()
    }

    #[test]
    fn total_power_trivial_cases() {
        let z = BeamformerSet::new(vec![HermitianMatrix::zeros(2)], HermitianMatrix::zeros(2)).unwrap();
        assert_eq!(total_power(&z), 0.0);
        let i = BeamformerSet::new(vec![HermitianMatrix::identity(2)], HermitianMatrix::identity(2)).unwrap();
        assert_eq!(total_power(&i), 4.0);
    }

    #[test]
    fn identity_radar_gives_flat_pattern() {
        let n = 6;
        let set = BeamformerSet::new(vec![HermitianMatrix::zeros(n)], HermitianMatrix::identity(n)).unwrap();
        for deg in [-80.0, -10.0, 0.0, 33.0] {
            let b = transmit_beampattern(&set, &array(n), deg).unwrap();
            assert!((b - n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn coherent_gain_is_n_squared() {
        let n = 8;
        let arr = array(n);
        let a = steering_vector(&arr, 17.0).unwrap();
        let set = BeamformerSet::new(vec![], HermitianMatrix::outer(&a)).unwrap();
        let b = transmit_beampattern(&set, &arr, 17.0).unwrap();
        assert!((b - (n * n) as f64).abs() < 1e-9);
    }

    #[test]
    fn single_sample_matching_error() {
        use crate::scene::PatternSample;
        let n = 4;
        let arr = array(n);
        // R_d = I / N gives B = 1 everywhere.
        let set = BeamformerSet::new(vec![], HermitianMatrix::identity(n).scale(1.0 / n as f64)).unwrap();
        let pat = DesiredBeampattern::new(vec![PatternSample {
            angle_deg: 10.0,
            level: 2.0,
            tolerance: 0.1,
            target: Some(0),
        }])
        .unwrap();
        assert!((beam_matching_error(&set, &pat, &arr).unwrap() - 1.0).abs() < 1e-12);
        let exact = DesiredBeampattern::new(vec![PatternSample {
            angle_deg: 10.0,
            level: 1.0,
            tolerance: 0.1,
            target: Some(0),
        }])
        .unwrap();
        assert!(beam_matching_error(&set, &exact, &arr).unwrap() < 1e-24);
    }

    fn two_antenna_scenario() -> Scenario {
        Scenario {
            array: array(2),
            users: vec![UserSpec::new(20.0, 1.0, 0.0, 0.0, 0.0)],
            targets: vec![TargetSpec::new(-30.0, 20.0)],
            rate_floor: 1.0,
            beam_width_deg: 0.0,
            target_receive_level: dbm_to_mw(-13.0),
            grid_resolution_deg: 1.0,
            sidelobe_region_enabled: false,
            sidelobe_level: 0.0,
            sidelobe_tolerance: 0.0,
            mainlobe_tolerance_fraction: 0.1,
            channel_scaling: ChannelScaling::SqrtPathloss,
        }
    }

    #[test]
    fn sinr_direct_substitution() {
        let h = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let w = CVector::from_vec(vec![C64::new(2.0, 0.0), C64::new(0.0, 0.0)]);
        let set = BeamformerSet::from_vectors(vec![w], HermitianMatrix::zeros(2)).unwrap();
        assert!((sinr_for_channel(&set, 0, &h, 1.0).unwrap() - 4.0).abs() < 1e-15);
        // Same numbers through the covariance path.
        let cov = BeamformerSet::new(set.covariances().to_vec(), HermitianMatrix::zeros(2)).unwrap();
        assert!((sinr_for_channel(&cov, 0, &h, 1.0).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn sinr_through_scenario_channel() {
        let s = two_antenna_scenario();
        let h = s.user_channel(0).unwrap();
        let beta = s.user_pathloss(0).unwrap();
        let w = h.clone() * C64::new(2.0 / h.norm(), 0.0);
        let set = BeamformerSet::from_vectors(vec![w], HermitianMatrix::zeros(2)).unwrap();
        // |h^H w|^2 = 4 ||h||^2 = 8 beta against 1 mW of noise.
        let g = sinr(&set, 0, &s).unwrap();
        assert!((g - 8.0 * beta).abs() < 1e-12 * g);
    }

    #[test]
    fn orthogonal_beam_gives_zero_sinr() {
        let s = two_antenna_scenario();
        let h = s.user_channel(0).unwrap();
        let w = CVector::from_vec(vec![-h[1].conj(), h[0].conj()]);
        assert!(h.dotc(&w).norm() < 1e-15);
        let set = BeamformerSet::from_vectors(vec![w], HermitianMatrix::zeros(2)).unwrap();
        assert!(sinr(&set, 0, &s).unwrap() < 1e-20);
    }

    #[test]
    fn rate_values() {
        assert_eq!(rate(0.0), 0.0);
        assert_eq!(rate(1.0), 1.0);
        assert_eq!(rate(3.0), 2.0);
    }

    #[test]
    fn zero_radar_curve_is_zero() {
        let n = 5;
        let arr = array(n);
        let w = steering_vector(&arr, 40.0).unwrap();
        let set = BeamformerSet::from_vectors(vec![w], HermitianMatrix::zeros(n)).unwrap();
        let c = component_decomposition(&set, &arr, &plot_grid()).unwrap();
        assert!(c.radar.iter().all(|&r| r == 0.0));
        for i in 0..c.total.len() {
            assert_eq!(c.total[i], c.communication[i] + c.radar[i]);
        }
    }

    #[test]
    fn with_vectors_rejects_non_rank_one() {
        let set = BeamformerSet::new(vec![HermitianMatrix::identity(2)], HermitianMatrix::zeros(2)).unwrap();
        let w = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        assert!(matches!(set.with_vectors(vec![w], 1e-6), Err(Error::RankOneViolation { .. })));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let r = BeamformerSet::new(vec![HermitianMatrix::zeros(3)], HermitianMatrix::zeros(2));
        assert!(r.is_err());
        let set = BeamformerSet::new(vec![], HermitianMatrix::identity(2)).unwrap();
        let h = CVector::from_element(3, C64::new(1.0, 0.0));
        assert!(channel_beam_gain(&set, &h).is_err());
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(33.0), "33.0000000");
        assert_eq!(format_sig9(-90.0), "-90.0000000");
        assert_eq!(format_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig9(1.5e12), "1.50000000e12");
        assert_eq!(format_dbm(0.0), "-inf");
        assert_eq!(format_dbm(1000.0), "30.0000000");
    }
}
