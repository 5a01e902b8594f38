//! Physical constants and shared field/readout configuration.
//!
//! Everything is stored in SI internally (rad/s, T, Hz, m, s). The paper-style
//! mixed units (mT, MHz, ns, nm, Hz cm/V) appear only at the IO boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed physical constants of the toolkit.
///
/// Gyromagnetic ratios and dipole moments follow the values used throughout
/// the NV sensing literature; the generic constants are CODATA 2018.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// NV electron gyromagnetic ratio, rad s^-1 T^-1 (gamma_e/2pi = 28 MHz/mT).
    pub gamma_e: f64,
    /// Proton gyromagnetic ratio, rad s^-1 T^-1 (gamma_h/2pi = 42.577 kHz/mT).
    pub gamma_h: f64,
    /// Electric dipole moment parallel to the NV axis, Hz m/V (0.35 Hz cm/V).
    pub d_par: f64,
    /// Electric dipole moment perpendicular to the NV axis, Hz m/V (17 Hz cm/V).
    pub d_perp: f64,
    /// Vacuum permeability, N A^-2.
    pub mu_0: f64,
    /// Reduced Planck constant, J s.
    pub hbar: f64,
    /// Bohr magneton, J T^-1.
    pub mu_b: f64,
    /// Free-electron g-factor (dimensionless).
    pub g_e: f64,
    /// NV ground-state zero-field splitting, Hz.
    pub d_zfs: f64,
}

impl PhysicalConstants {
    pub const fn standard() -> Self {
        PhysicalConstants {
            gamma_e: 2.0 * std::f64::consts::PI * 28.0e9,
            gamma_h: 2.0 * std::f64::consts::PI * 42.577e6,
            d_par: 0.35e-2,
            d_perp: 17.0e-2,
            mu_0: 1.256_637_062_12e-6,
            hbar: 1.054_571_817e-34,
            mu_b: 9.274_010_078_3e-24,
            g_e: 2.0,
            d_zfs: 2.870e9,
        }
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::standard()
    }
}

/// Global constants instance; immutable, safe to share across threads.
pub const CONSTANTS: PhysicalConstants = PhysicalConstants::standard();

/// Photon readout model: mean counts from the mS = 0 state and the optical
/// contrast `c` relating the mS = -1 counts as n1 = (1 - c) n0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonModel {
    /// Mean photon counts from the mS = 0 state, per accumulated point.
    pub n0: f64,
    /// Fractional contrast c, 0 < c < 1.
    pub contrast_c: f64,
}

impl PhotonModel {
    pub fn new(n0: f64, contrast_c: f64) -> Result<Self> {
        if !(n0 > 0.0) {
            return Err(Error::InvalidParameter(format!("n0 must be > 0, got {n0}")));
        }
        if !(contrast_c > 0.0 && contrast_c < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "contrast c must be in (0, 1), got {contrast_c}"
            )));
        }
        Ok(PhotonModel { n0, contrast_c })
    }

    /// Mean photon counts from the mS = -1 state, n1 = (1 - c) n0.
    pub fn n1(&self) -> f64 {
        (1.0 - self.contrast_c) * self.n0
    }

    /// Mean signal counts n_s = n1 + (n0 - n1) p0 for a population p0.
    pub fn signal_counts(&self, p0: f64) -> f64 {
        self.n1() + (self.n0 - self.n1()) * p0
    }

    /// Invert counts back to a population estimate, p0 = (n_s - n1)/(c n0).
    pub fn invert_counts(&self, n_s: f64) -> f64 {
        (n_s - self.n1()) / (self.contrast_c * self.n0)
    }

    /// Shot-noise level of one p0 estimate near p0 ~ 1, N ~ (c sqrt(n0))^-1.
    pub fn noise_level(&self) -> f64 {
        1.0 / (self.contrast_c * self.n0.sqrt())
    }
}

/// Static field configuration along the NV axis, with optional measured
/// transition frequencies that override the nominal ones when present.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    /// Static field magnitude, T, applied along the NV symmetry axis.
    pub b0: f64,
    /// Proton Larmor angular frequency, rad/s (always gamma_h * b0).
    pub omega_n: f64,
    /// Measured mS = 0 <-> -1 transition frequency, Hz, if available.
    pub omega_sq_hz: Option<f64>,
    /// Measured mS = -1 <-> +1 separation, Hz, if available.
    pub omega_dq_hz: Option<f64>,
}

impl FieldConfig {
    pub fn new(constants: &PhysicalConstants, b0: f64) -> Result<Self> {
        if !(b0 >= 0.0) {
            return Err(Error::FieldOutOfRange(format!("b0 must be >= 0, got {b0} T")));
        }
        Ok(FieldConfig {
            b0,
            omega_n: constants.gamma_h * b0,
            omega_sq_hz: None,
            omega_dq_hz: None,
        })
    }

    pub fn with_measured(mut self, omega_sq_hz: Option<f64>, omega_dq_hz: Option<f64>) -> Self {
        self.omega_sq_hz = omega_sq_hz;
        self.omega_dq_hz = omega_dq_hz;
        self
    }

    /// Probe frequencies (f_sq, f_dq) in Hz: measured values when present,
    /// nominal secular ones otherwise.
    pub fn probe_frequencies(&self, constants: &PhysicalConstants) -> Result<(f64, f64)> {
        let (nominal_sq, nominal_dq) = nominal_transitions(constants, self.b0)?;
        Ok((
            self.omega_sq_hz.unwrap_or(nominal_sq),
            self.omega_dq_hz.unwrap_or(nominal_dq),
        ))
    }
}

/// Nominal NV transition frequencies in the secular, axial-field regime:
/// f_sq = D - gamma_e B0 / 2pi (mS = 0 <-> -1) and f_dq = 2 gamma_e B0 / 2pi
/// (mS = -1 <-> +1 separation). Valid for 0 <= b0 < 0.1 T.
pub fn nominal_transitions(constants: &PhysicalConstants, b0: f64) -> Result<(f64, f64)> {
    if !(0.0..0.1).contains(&b0) {
        return Err(Error::FieldOutOfRange(format!(
            "nominal_transitions supports 0 <= b0 < 0.1 T (axial secular regime), got {b0} T"
        )));
    }
    let zeeman = constants.gamma_e / (2.0 * std::f64::consts::PI) * b0;
    Ok((constants.d_zfs - zeeman, 2.0 * zeeman))
}

/// Proton NMR frequency gamma_h B0 / 2pi, Hz.
pub fn proton_larmor(constants: &PhysicalConstants, b0: f64) -> Result<f64> {
    if !(b0 >= 0.0) {
        return Err(Error::FieldOutOfRange(format!("b0 must be >= 0, got {b0} T")));
    }
    Ok(constants.gamma_h / (2.0 * std::f64::consts::PI) * b0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};

    #[test]
    fn constants_all_positive() {
        let c = CONSTANTS;
        for (name, v) in [
            ("gamma_e", c.gamma_e),
            ("gamma_h", c.gamma_h),
            ("d_par", c.d_par),
            ("d_perp", c.d_perp),
            ("mu_0", c.mu_0),
            ("hbar", c.hbar),
            ("mu_b", c.mu_b),
            ("g_e", c.g_e),
            ("d_zfs", c.d_zfs),
        ] {
            assert!(v > 0.0, "{name} must be strictly positive");
        }
    }

    #[test]
    fn nominal_transitions_zero_field() {
        let (f_sq, f_dq) = nominal_transitions(&CONSTANTS, 0.0).unwrap();
        assert_relative_eq!(f_sq, 2.870e9, max_relative = 1e-12);
        assert_abs_diff_eq!(f_dq, 0.0);
    }

    #[test]
    fn nominal_transitions_at_23p2_mt() {
        // Measured values are 2218.2 MHz / 1301.5 MHz; nominal secular values
        // sit within the documented +-3 MHz nominal-vs-measured window.
        let (f_sq, f_dq) = nominal_transitions(&CONSTANTS, 23.2e-3).unwrap();
        assert_relative_eq!(f_sq, 2220.4e6, max_relative = 1e-9);
        assert_relative_eq!(f_dq, 1299.2e6, max_relative = 1e-9);
        assert!((f_sq - 2218.2e6).abs() < 3.0e6);
        assert!((f_dq - 1301.5e6).abs() < 3.0e6);
    }

    #[test]
    fn nominal_transitions_rejects_large_field() {
        assert!(nominal_transitions(&CONSTANTS, 0.2).is_err());
        assert!(nominal_transitions(&CONSTANTS, -1e-3).is_err());
    }

    #[test]
    fn proton_larmor_values() {
        let f = proton_larmor(&CONSTANTS, 23.2e-3).unwrap();
        assert_relative_eq!(f, 0.987_786_4e6, max_relative = 1e-12);
        // Matches the observed dip at 0.988 MHz.
        assert!((f - 0.988e6).abs() < 1.0e3);
        assert_abs_diff_eq!(proton_larmor(&CONSTANTS, 0.0).unwrap(), 0.0);
        assert_relative_eq!(
            proton_larmor(&CONSTANTS, 46.4e-3).unwrap(),
            2.0 * f,
            max_relative = 1e-12
        );
    }

    #[test]
    fn proton_larmor_is_linear() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10 {
            let b0: f64 = rng.gen_range(1e-4..0.09);
            let k: f64 = rng.gen_range(0.1..5.0);
            let f1 = proton_larmor(&CONSTANTS, b0).unwrap();
            let f2 = proton_larmor(&CONSTANTS, k * b0).unwrap();
            assert_relative_eq!(f2, k * f1, max_relative = 1e-12);
        }
    }

    #[test]
    fn transition_sum_matches_zero_field_splitting() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let b0: f64 = rng.gen_range(0.0..0.099);
            let (f_sq, f_dq) = nominal_transitions(&CONSTANTS, b0).unwrap();
            assert_relative_eq!(f_sq + f_dq / 2.0, CONSTANTS.d_zfs, max_relative = 1e-12);
        }
    }

    #[test]
    fn photon_model_basics() {
        let p = PhotonModel::new(5e5, 0.2).unwrap();
        assert!(p.n1() < p.n0);
        assert_relative_eq!(p.n1(), 4e5, max_relative = 1e-12);
        assert_relative_eq!(p.invert_counts(p.signal_counts(0.73)), 0.73, max_relative = 1e-12);
        assert_relative_eq!(p.noise_level(), 0.007_071_067_8, max_relative = 1e-6);
        assert!(PhotonModel::new(0.0, 0.2).is_err());
        assert!(PhotonModel::new(1e5, 1.0).is_err());
    }

    #[test]
    fn field_config_omega_n_consistency() {
        let f = FieldConfig::new(&CONSTANTS, 23.2e-3).unwrap();
        assert_relative_eq!(f.omega_n, CONSTANTS.gamma_h * 23.2e-3, max_relative = 0.0);
        let (sq, dq) = f.probe_frequencies(&CONSTANTS).unwrap();
        assert_relative_eq!(sq, 2220.4e6, max_relative = 1e-9);
        let f = f.with_measured(Some(2218.2e6), Some(1301.5e6));
        let (sq, dq2) = f.probe_frequencies(&CONSTANTS).unwrap();
        assert_relative_eq!(sq, 2218.2e6, max_relative = 0.0);
        assert_relative_eq!(dq2, 1301.5e6, max_relative = 0.0);
        assert_ne!(dq, dq2);
    }
}
