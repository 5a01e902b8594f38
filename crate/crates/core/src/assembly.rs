//! Population-level analysis: N+-to-NV yield and depth histograms that fold
//! in the depth-undetermined NV centers, with the Monte Carlo overlay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::implant::DepthProfile;

/// One characterized NV center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NvRecord {
    pub id: String,
    /// SiO2 mask thickness of the implantation area, nm.
    pub mask_thickness_nm: f64,
    /// Echo coherence time, s.
    pub t2_echo: f64,
    /// Stretch exponent.
    pub p: f64,
    /// NV depth, nm; None when the NMR dip could not be resolved.
    pub d_nv_nm: Option<f64>,
    /// Static field the characterization used, T.
    pub b0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

impl NvRecord {
    pub fn validate(&self) -> Result<()> {
        if !(self.t2_echo > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "record {}: t2_echo must be > 0",
                self.id
            )));
        }
        if let Some(d) = self.d_nv_nm {
            if !(d > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "record {}: depth must be > 0 when present",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// Conversion efficiency from implanted N+ areal density to observed NV areal
/// density.
pub fn conversion_yield(nv_areal_cm2: f64, implanted_areal_cm2: f64) -> Result<f64> {
    if !(implanted_areal_cm2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "implanted density must be > 0, got {implanted_areal_cm2}"
        )));
    }
    if !(nv_areal_cm2 >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "NV areal density must be >= 0, got {nv_areal_cm2}"
        )));
    }
    Ok(nv_areal_cm2 / implanted_areal_cm2)
}

/// Depth where the undetermined records are assumed to live: d <= 5 nm.
pub const UNDETERMINED_DEPTH_NM: f64 = 5.0;

/// One histogram bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    /// Bin center, nm.
    pub center_nm: f64,
    /// Occurrence mass (integer counts for determined records; spread
    /// fractions for the undetermined ones).
    pub mass: f64,
    /// Vertical Poisson error sqrt(mass).
    pub mass_err: f64,
    /// Horizontal position center for plotting, nm.
    pub x_center_nm: f64,
    /// Horizontal half-width, nm: half the bin for determined bins,
    /// 2.5 +- 2.5 nm for the undetermined mass.
    pub x_err_nm: f64,
    /// True when this bin carries spread undetermined mass.
    pub from_undetermined: bool,
    /// Monte Carlo profile x yield overlay, cm^-3, when supplied.
    pub overlay_density_cm3: Option<f64>,
}

/// Depth histogram of one mask-thickness group with undetermined-mass
/// bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthHistogram {
    pub mask_thickness_nm: f64,
    pub bin_width_nm: f64,
    pub bins: Vec<HistogramBin>,
    pub determined_count: usize,
    pub undetermined_count: usize,
}

impl DepthHistogram {
    /// Total plotted mass; conserved at determined + undetermined.
    pub fn total_mass(&self) -> f64 {
        self.bins.iter().map(|b| b.mass).sum()
    }
}

/// Bin the records of one mask-thickness group into 1-nm depth bins.
///
/// Determined records fall in their own bin. Each depth-undetermined record
/// contributes mass 1/5 to each of the five bins covering 0-5 nm (we are
/// agnostic about which of those bins it belongs to), plotted at
/// 2.5 +- 2.5 nm. The overlay multiplies the Monte Carlo density profile by
/// the group's yield.
pub fn assemble_histogram(
    records: &[NvRecord],
    mask_thickness_nm: f64,
    yield_fraction: f64,
    mc_profile: Option<&DepthProfile>,
) -> Result<DepthHistogram> {
    const BIN_NM: f64 = 1.0;
    let group: Vec<&NvRecord> = records
        .iter()
        .filter(|r| (r.mask_thickness_nm - mask_thickness_nm).abs() < 1e-9)
        .collect();
    for r in &group {
        r.validate()?;
    }
    if group.is_empty() {
        return Err(Error::UngroupedRecord { t_nm: mask_thickness_nm });
    }
    if let Some(profile) = mc_profile {
        if (profile.bin_width_nm - BIN_NM).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "overlay profile bin width {} nm does not match the 1 nm histogram",
                profile.bin_width_nm
            )));
        }
    }

    let determined: Vec<f64> = group.iter().filter_map(|r| r.d_nv_nm).collect();
    let undetermined_count = group.len() - determined.len();

    let undetermined_bins = (UNDETERMINED_DEPTH_NM / BIN_NM) as usize;
    let max_depth = determined.iter().cloned().fold(0.0, f64::max);
    let n_bins = ((max_depth / BIN_NM).floor() as usize + 1).max(undetermined_bins);

    let mut mass = vec![0.0f64; n_bins];
    for d in &determined {
        let k = ((d / BIN_NM).floor() as usize).min(n_bins - 1);
        mass[k] += 1.0;
    }
    if undetermined_count > 0 {
        let spread = undetermined_count as f64 / undetermined_bins as f64;
        for m in mass.iter_mut().take(undetermined_bins) {
            *m += spread;
        }
    }

    let bins = mass
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let center = (k as f64 + 0.5) * BIN_NM;
            let from_undetermined = undetermined_count > 0 && k < undetermined_bins;
            let (x_center, x_err) = if from_undetermined {
                (UNDETERMINED_DEPTH_NM / 2.0, UNDETERMINED_DEPTH_NM / 2.0)
            } else {
                (center, BIN_NM / 2.0)
            };
            let overlay = mc_profile.and_then(|p| {
                p.density_cm3.get(k).map(|d| d * yield_fraction)
            });
            HistogramBin {
                center_nm: center,
                mass: m,
                mass_err: m.sqrt(),
                x_center_nm: x_center,
                x_err_nm: x_err,
                from_undetermined,
                overlay_density_cm3: overlay,
            }
        })
        .collect();

    Ok(DepthHistogram {
        mask_thickness_nm,
        bin_width_nm: BIN_NM,
        bins,
        determined_count: determined.len(),
        undetermined_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn record(id: &str, t: f64, d: Option<f64>) -> NvRecord {
        NvRecord {
            id: id.to_string(),
            mask_thickness_nm: t,
            t2_echo: 20e-6,
            p: 1.0,
            d_nv_nm: d,
            b0: 23.2e-3,
            notes: None,
        }
    }

    #[test]
    fn yield_reference_points() {
        // 1e8 / 1e11 = 0.1%, inside the observed 0.1-0.4% range.
        let y = conversion_yield(1e8, 1e11).unwrap();
        assert_relative_eq!(y, 1e-3, max_relative = 1e-12);
        assert!((0.001..=0.004).contains(&y));
        assert_eq!(conversion_yield(0.0, 1e11).unwrap(), 0.0);
        assert!(conversion_yield(1e8, 0.0).is_err());
    }

    #[test]
    fn histogram_spreads_undetermined_mass() {
        // The t = 52.3 nm group: 13 determined + 44 undetermined; the spread
        // mass is 8.8 per 1-nm bin over 0-5 nm and the total is 57.
        let mut records = Vec::new();
        for i in 0..13 {
            records.push(record(&format!("d{i}"), 52.3, Some(6.0 + i as f64 * 2.0)));
        }
        for i in 0..44 {
            records.push(record(&format!("u{i}"), 52.3, None));
        }
        let hist = assemble_histogram(&records, 52.3, 1e-3, None).unwrap();
        assert_eq!(hist.determined_count, 13);
        assert_eq!(hist.undetermined_count, 44);
        for bin in &hist.bins[..5] {
            assert_relative_eq!(bin.mass, 8.8, max_relative = 1e-12);
            assert!(bin.from_undetermined);
            assert_relative_eq!(bin.x_center_nm, 2.5, max_relative = 1e-12);
            assert_relative_eq!(bin.x_err_nm, 2.5, max_relative = 1e-12);
        }
        assert_relative_eq!(hist.total_mass(), 57.0, max_relative = 1e-12);
    }

    #[test]
    fn histogram_plain_binning_without_undetermined() {
        let records = vec![
            record("a", 69.1, Some(2.2)),
            record("b", 69.1, Some(2.7)),
            record("c", 69.1, Some(7.9)),
        ];
        let hist = assemble_histogram(&records, 69.1, 1e-3, None).unwrap();
        assert_eq!(hist.undetermined_count, 0);
        assert_relative_eq!(hist.bins[2].mass, 2.0, max_relative = 1e-12);
        assert_relative_eq!(hist.bins[7].mass, 1.0, max_relative = 1e-12);
        assert_relative_eq!(hist.total_mass(), 3.0, max_relative = 1e-12);
        // No undetermined mass: every bin keeps its own horizontal bar.
        assert!(hist.bins.iter().all(|b| !b.from_undetermined));
    }

    #[test]
    fn histogram_group_mass_69p1() {
        // t = 69.1 nm: 9 determined + 11 undetermined = 20 total.
        let mut records = Vec::new();
        for i in 0..9 {
            records.push(record(&format!("d{i}"), 69.1, Some(5.5 + i as f64)));
        }
        for i in 0..11 {
            records.push(record(&format!("u{i}"), 69.1, None));
        }
        let hist = assemble_histogram(&records, 69.1, 1e-3, None).unwrap();
        assert_relative_eq!(hist.total_mass(), 20.0, max_relative = 1e-12);
    }

    #[test]
    fn overlay_scales_linearly_with_yield() {
        let profile = DepthProfile {
            bin_width_nm: 1.0,
            counts: vec![100, 50, 25, 10, 5, 2, 1],
            density_cm3: vec![1e17, 5e16, 2.5e16, 1e16, 5e15, 2e15, 1e15],
            mask_stopped: 0,
            reflected: 0,
            n_ions: 193,
            dose_cm2: 1e11,
        };
        let records = vec![record("a", 52.3, Some(1.5)), record("b", 52.3, None)];
        let h1 = assemble_histogram(&records, 52.3, 1e-3, Some(&profile)).unwrap();
        let h2 = assemble_histogram(&records, 52.3, 2e-3, Some(&profile)).unwrap();
        for (b1, b2) in h1.bins.iter().zip(&h2.bins) {
            assert_relative_eq!(
                b2.overlay_density_cm3.unwrap(),
                2.0 * b1.overlay_density_cm3.unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn missing_group_is_an_error() {
        let records = vec![record("a", 52.3, Some(1.5))];
        assert!(matches!(
            assemble_histogram(&records, 69.1, 1e-3, None),
            Err(Error::UngroupedRecord { .. })
        ));
    }
}
