//! Detectability bound: the T2 a given NV depth needs before its proton NMR
//! dip rises above photon shot noise (the S/N = 1 condition at the
//! N tau = 2 T2 operating point, p = 1), plus the practical 3 us floor below
//! which no clear NMR is observed.

use serde::{Deserialize, Serialize};

use crate::constants::{PhotonModel, PhysicalConstants};
use crate::error::{Error, Result};
use crate::models::b_rms;

/// Hard floor: NV centers with shorter echo T2 never show clear NMR dips.
pub const T2_FLOOR: f64 = 3e-6;

/// Minimum echo T2 at which the dip of an NV at depth `d_nv` reaches S/N = 1:
/// T2 = pi / (2 sqrt2 gamma_e B_rms) sqrt(-ln(1 - 2 e^2 / (c sqrt(n0)))).
pub fn t2_limit(
    photon: &PhotonModel,
    rho: f64,
    d_nv: f64,
    constants: &PhysicalConstants,
) -> Result<f64> {
    let readout = photon.contrast_c * photon.n0.sqrt();
    let arg = 1.0 - 2.0 * std::f64::consts::E.powi(2) / readout;
    if arg <= 0.0 {
        return Err(Error::ReadoutTooNoisy(readout));
    }
    let b = b_rms(constants, d_nv, rho)?;
    Ok(std::f64::consts::PI / (2.0 * 2.0f64.sqrt() * constants.gamma_e * b) * (-arg.ln()).sqrt())
}

/// Whether an NV with echo time `t2` at depth `d_nv` lies in the accessible
/// region: above both the S/N = 1 curve and the 3 us floor.
pub fn is_accessible(
    photon: &PhotonModel,
    rho: f64,
    t2: f64,
    d_nv: f64,
    constants: &PhysicalConstants,
) -> Result<bool> {
    if t2 < T2_FLOOR {
        return Ok(false);
    }
    Ok(t2 >= t2_limit(photon, rho, d_nv, constants)?)
}

/// The sampled accessibility boundary over a depth grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessibleRegion {
    /// Depth grid, m.
    pub depths: Vec<f64>,
    /// S/N = 1 curve: minimum T2 per depth, s.
    pub t2_limit: Vec<f64>,
    /// Practical floor, s.
    pub t2_floor: f64,
    pub photon: PhotonModel,
    /// Analyte proton density, m^-3.
    pub rho: f64,
}

impl AccessibleRegion {
    /// Exact classification (recomputed from the formula, not the grid).
    pub fn classify(&self, t2: f64, d_nv: f64, constants: &PhysicalConstants) -> Result<bool> {
        is_accessible(&self.photon, self.rho, t2, d_nv, constants)
    }
}

/// Evaluate the bound over a depth grid.
pub fn accessible_region(
    photon: &PhotonModel,
    rho: f64,
    depth_grid: &[f64],
    constants: &PhysicalConstants,
) -> Result<AccessibleRegion> {
    if depth_grid.is_empty() {
        return Err(Error::InvalidParameter("depth grid must be nonempty".to_string()));
    }
    let t2_limit_curve: Result<Vec<f64>> = depth_grid
        .iter()
        .map(|&d| t2_limit(photon, rho, d, constants))
        .collect();
    Ok(AccessibleRegion {
        depths: depth_grid.to_vec(),
        t2_limit: t2_limit_curve?,
        t2_floor: T2_FLOOR,
        photon: *photon,
        rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::CONSTANTS;
    use approx::assert_relative_eq;

    fn paper_photon() -> PhotonModel {
        PhotonModel::new(5e5, 0.2).unwrap()
    }

    #[test]
    fn limit_matches_frozen_oracle() {
        // Independent arbitrary-precision evaluation of Eqs. (3)+(4) at
        // c = 0.2, n0 = 5e5, rho = 6e28, d = 17.4 nm.
        let t2 = t2_limit(&paper_photon(), 6e28, 17.4e-9, &CONSTANTS).unwrap();
        assert_relative_eq!(t2, 1.722_204_965_082_513_1e-5, max_relative = 1e-9);
    }

    #[test]
    fn paper_point_is_accessible() {
        assert!(is_accessible(&paper_photon(), 6e28, 27.1e-6, 17.4e-9, &CONSTANTS).unwrap());
        // Any T2 below 3 us is inaccessible regardless of depth.
        for d_nm in [1.0, 5.0, 17.4, 50.0] {
            assert!(!is_accessible(&paper_photon(), 6e28, 2.9e-6, d_nm * 1e-9, &CONSTANTS)
                .unwrap());
        }
    }

    #[test]
    fn limit_monotone_in_depth() {
        let grid: Vec<f64> = (1..=60).map(|i| i as f64 * 1e-9).collect();
        let region = accessible_region(&paper_photon(), 6e28, &grid, &CONSTANTS).unwrap();
        assert!(region.t2_limit.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn classification_monotone_in_t2() {
        let region = accessible_region(&paper_photon(), 6e28, &[17.4e-9], &CONSTANTS).unwrap();
        let mut was_accessible = false;
        for i in 0..200 {
            let t2 = 1e-6 * (i as f64 + 1.0);
            let acc = region.classify(t2, 17.4e-9, &CONSTANTS).unwrap();
            assert!(acc || !was_accessible, "accessible flipped back off as T2 grew");
            was_accessible = acc;
        }
        assert!(was_accessible);
    }

    #[test]
    fn perfect_readout_limit_goes_to_zero() {
        // The limit falls like (c sqrt(n0))^-1/2 as readout sharpens.
        let baseline = t2_limit(&paper_photon(), 6e28, 17.4e-9, &CONSTANTS).unwrap();
        let mut prev = baseline;
        for n0 in [1e8, 1e12, 1e18] {
            let sharp = PhotonModel::new(n0, 0.999).unwrap();
            let t2 = t2_limit(&sharp, 6e28, 17.4e-9, &CONSTANTS).unwrap();
            assert!(t2 < prev, "t2 limit {t2} did not shrink below {prev} at n0 = {n0}");
            prev = t2;
        }
        assert!(prev < 1e-8, "t2 limit = {prev}");
    }

    #[test]
    fn noisy_readout_rejected() {
        // c sqrt(n0) = 0.01 * 10 = 0.1 << 2 e^2.
        let noisy = PhotonModel::new(100.0, 0.01).unwrap();
        assert!(matches!(
            t2_limit(&noisy, 6e28, 17.4e-9, &CONSTANTS),
            Err(Error::ReadoutTooNoisy(_))
        ));
    }
}
