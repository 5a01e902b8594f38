//! Noise spectroscopy: spectral decomposition of dynamical-decoupling decay
//! data, conversion to an effective electric-field PSD, Lorentzian fitting,
//! and SQ/DQ relaxation-rate algebra.
//!
//! Unit conventions: S_DD is in s^-1 at angular probe frequency omega = pi/tau;
//! S_e = 2 S_DD / d_par^2 is in V^2 m^-2 Hz^-1. The Lorentzian coupling
//! strength <E_perp^2> is kept in (rad/s)^2 so that Eq.-(7)-style values have
//! S_DD units; divide by d_par^2 for a field-squared reading.

use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::fit::lm::{levenberg_marquardt, FitData, LmModel, LmOptions};
use crate::fit::FitResult;
use crate::records::DecayTrace;

/// One dynamical-decoupling observation: N pi pulses at spacing tau gave
/// population p0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DdObservation {
    pub n_pulses: u32,
    /// Inter-pulse spacing, s.
    pub tau: f64,
    pub p0: f64,
    /// Optional 1-sigma uncertainty of p0.
    pub sigma_p0: Option<f64>,
}

impl DdObservation {
    /// Flatten a trace (t_tot = N tau) into per-point observations. A Hahn
    /// trace is the N = 1 case: its total time 2 tau_hahn equals the
    /// decoupling-convention spacing, so tau = t_tot there too.
    pub fn from_trace(trace: &DecayTrace) -> Vec<DdObservation> {
        let n = trace.kind.n_pulses();
        trace
            .times
            .iter()
            .zip(&trace.p0)
            .enumerate()
            .map(|(i, (&t, &p0))| DdObservation {
                n_pulses: n,
                tau: t / n as f64,
                p0,
                sigma_p0: trace.sigma.as_ref().map(|s| s[i]),
            })
            .collect()
    }
}

/// One extracted noise-spectrum point with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    /// Probe angular frequency omega = pi/tau, rad/s.
    pub omega: f64,
    /// Raw decomposition value S_DD(omega), s^-1.
    pub s_dd: f64,
    /// Converted effective electric-field PSD S_e = 2 S_DD / d_par^2, V^2 m^-2 Hz^-1.
    pub s_e: f64,
    /// 1-sigma uncertainty on s_dd propagated from the p0 shot noise.
    pub sigma_s_dd: Option<f64>,
    pub n_pulses: u32,
    pub tau: f64,
    pub p0: f64,
}

/// Extracted noise spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpectrum {
    pub points: Vec<SpectrumPoint>,
    /// Filter width used: points with 2 p0 - 1 <= eps or >= 1 - eps dropped.
    pub eps: f64,
}

impl NoiseSpectrum {
    pub fn omega_max(&self) -> f64 {
        self.points.iter().map(|p| p.omega).fold(0.0, f64::max)
    }
}

pub const DEFAULT_COHERENCE_EPS: f64 = 0.02;

/// Spectral decomposition S_DD(pi/tau) = -pi ln(2 p0 - 1) / (N tau).
///
/// Points with 2 p0 - 1 close to 0 or 1 (within `eps`) are insensitive to tau
/// and are dropped; dropping everything is an error.
pub fn spectral_decomposition(
    observations: &[DdObservation],
    constants: &PhysicalConstants,
    eps: Option<f64>,
) -> Result<NoiseSpectrum> {
    let eps = eps.unwrap_or(DEFAULT_COHERENCE_EPS);
    let mut points = Vec::new();
    for obs in observations {
        let coherence = 2.0 * obs.p0 - 1.0;
        if coherence <= eps || coherence >= 1.0 - eps {
            continue;
        }
        let n_tau = obs.n_pulses as f64 * obs.tau;
        let s_dd = -std::f64::consts::PI * coherence.ln() / n_tau;
        let sigma_s_dd = obs.sigma_p0.map(|s| {
            2.0 * std::f64::consts::PI * s / (n_tau * coherence)
        });
        points.push(SpectrumPoint {
            omega: std::f64::consts::PI / obs.tau,
            s_dd,
            s_e: 2.0 * s_dd / (constants.d_par * constants.d_par),
            sigma_s_dd,
            n_pulses: obs.n_pulses,
            tau: obs.tau,
            p0: obs.p0,
        });
    }
    if points.is_empty() {
        return Err(Error::EmptySpectrum { eps });
    }
    points.sort_by(|a, b| a.omega.partial_cmp(&b.omega).unwrap());
    Ok(NoiseSpectrum { points, eps })
}

/// Lorentzian bath model S_DD(omega) = <E_perp^2> tau_c / (pi [1 + (omega tau_c)^2]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianNoise {
    /// Average coupling strength <E_perp^2>, (rad/s)^2.
    pub coupling_sq: f64,
    /// Bath correlation time, s.
    pub tau_c: f64,
    /// Set when the probed band never reaches the knee (omega tau_c << 1
    /// everywhere), which makes the Lorentzian fit arbitrary.
    pub white_degenerate: bool,
    /// Largest correlation time consistent with seeing no knee, 1/omega_max;
    /// present only in the degenerate case.
    pub tau_c_upper_bound: Option<f64>,
}

impl LorentzianNoise {
    pub fn s_dd(&self, omega: f64) -> f64 {
        self.coupling_sq * self.tau_c
            / (std::f64::consts::PI * (1.0 + (omega * self.tau_c).powi(2)))
    }
}

struct LogLorentzian;

// Parameters: theta = [log10 coupling_sq, log10 tau_c]; x = omega; y = log10 S_DD.
impl LmModel for LogLorentzian {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: f64, theta: &[f64]) -> f64 {
        let coupling = 10f64.powf(theta[0]);
        let tau_c = 10f64.powf(theta[1]);
        (coupling * tau_c / (std::f64::consts::PI * (1.0 + (x * tau_c).powi(2)))).log10()
    }

    fn jacobian(&self, x: f64, theta: &[f64], out: &mut [f64]) {
        let tau_c = 10f64.powf(theta[1]);
        let wt = x * tau_c;
        out[0] = 1.0;
        // d log10 S / d log10 tau_c = 1 - 2 (w tau_c)^2 / (1 + (w tau_c)^2).
        out[1] = 1.0 - 2.0 * wt * wt / (1.0 + wt * wt);
    }

    fn feasible(&self, theta: &[f64]) -> bool {
        theta.iter().all(|v| v.is_finite() && v.abs() < 60.0)
    }
}

/// How far above the probed band the knee must sit to call the spectrum white.
const WHITE_KNEE_FACTOR: f64 = 3.0;

/// Fit the Lorentzian model to a spectrum in log-log space.
///
/// Weights come from point-wise propagated shot noise when available. When the
/// fitted knee 1/tau_c lies more than 3x above the largest probed omega, the
/// result is flagged white-noise degenerate and tau_c is replaced by its upper
/// bound 1/omega_max with the coupling rescaled to preserve the plateau.
pub fn lorentzian_fit(spectrum: &NoiseSpectrum) -> Result<(LorentzianNoise, FitResult)> {
    if spectrum.points.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "lorentzian fit needs >= 3 spectrum points, got {}",
            spectrum.points.len()
        )));
    }
    let xs: Vec<f64> = spectrum.points.iter().map(|p| p.omega).collect();
    let ys: Vec<f64> = spectrum.points.iter().map(|p| p.s_dd.log10()).collect();
    // sigma(log10 S) = sigma_S / (S ln 10).
    let sigmas: Option<Vec<f64>> = spectrum
        .points
        .iter()
        .map(|p| {
            p.sigma_s_dd
                .map(|s| (s / (p.s_dd * std::f64::consts::LN_10)).max(1e-6))
        })
        .collect();

    let omega_max = spectrum.omega_max();
    let omega_min = spectrum.points.iter().map(|p| p.omega).fold(f64::INFINITY, f64::min);
    let plateau = median(spectrum.points.iter().map(|p| p.s_dd));
    // Start with the knee at the geometric center of the band.
    let tau_c0 = 1.0 / (omega_min * omega_max).sqrt();
    let coupling0 = std::f64::consts::PI * plateau / tau_c0;
    let init = [coupling0.log10(), tau_c0.log10()];

    let data = FitData {
        xs: &xs,
        ys: &ys,
        sigmas: sigmas.as_deref(),
    };
    let names = ["log10_coupling_sq", "log10_tau_c"];
    let fit = levenberg_marquardt(&LogLorentzian, &data, &init, &names, &LmOptions::default());

    let (theta, fit_result) = match fit {
        Ok(r) => (r.theta.clone(), r.into_result(&names, &[])),
        Err(Error::NonConvergence { .. }) => {
            // Flat data leaves (coupling, tau_c) degenerate along
            // coupling*tau_c = const; classify from the plateau instead.
            let slope = band_slope(&xs, &ys);
            if slope > -0.3 {
                let tau_c = 1.0 / omega_max;
                let noise = LorentzianNoise {
                    coupling_sq: std::f64::consts::PI * plateau / tau_c,
                    tau_c,
                    white_degenerate: true,
                    tau_c_upper_bound: Some(tau_c),
                };
                let fr = FitResult::degenerate(
                    &["coupling_sq", "tau_c"],
                    &[noise.coupling_sq, noise.tau_c],
                );
                return Ok((noise, fr));
            }
            return Err(Error::NonConvergence { iterations: 200, residual_norm: f64::NAN });
        }
        Err(e) => return Err(e),
    };

    let coupling_sq = 10f64.powf(theta[0]);
    let tau_c = 10f64.powf(theta[1]);
    if 1.0 / tau_c > WHITE_KNEE_FACTOR * omega_max {
        // Knee far above the probed band: only the plateau product is
        // constrained. Report the largest tau_c consistent with the data.
        let bound = 1.0 / omega_max;
        let noise = LorentzianNoise {
            coupling_sq: coupling_sq * tau_c / bound,
            tau_c: bound,
            white_degenerate: true,
            tau_c_upper_bound: Some(bound),
        };
        return Ok((noise, fit_result));
    }
    Ok((
        LorentzianNoise { coupling_sq, tau_c, white_degenerate: false, tau_c_upper_bound: None },
        fit_result,
    ))
}

fn median(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

fn band_slope(xs: &[f64], ys: &[f64]) -> f64 {
    // Least-squares slope of log10 S vs log10 omega.
    let lx: Vec<f64> = xs.iter().map(|x| x.log10()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let num: f64 = lx.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// SQ and DQ relaxation rates with the relaxation times they reproduce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationRates {
    /// Magnetic (SQ) rate Omega, Hz.
    pub omega_rate: f64,
    /// Electric (DQ) rate gamma, Hz.
    pub gamma_rate: f64,
    /// T1 through the SQ channel, s; exactly 1/(3 Omega).
    pub t1_sq: f64,
    /// T1 through the DQ channel, s; exactly 1/(Omega + 2 gamma).
    pub t1_dq: f64,
}

/// Invert T1_SQ = 1/(3 Omega), T1_DQ = 1/(Omega + 2 gamma) for the rates.
pub fn rates_from_t1(t1_sq: f64, t1_dq: f64) -> Result<RelaxationRates> {
    if !(t1_sq > 0.0) || !(t1_dq > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "relaxation times must be > 0, got {t1_sq}, {t1_dq}"
        )));
    }
    let omega_rate = 1.0 / (3.0 * t1_sq);
    let gamma_rate = (1.0 / t1_dq - omega_rate) / 2.0;
    if gamma_rate < 0.0 {
        return Err(Error::InconsistentRates { gamma_hz: gamma_rate });
    }
    Ok(RelaxationRates {
        omega_rate,
        gamma_rate,
        t1_sq: 1.0 / (3.0 * omega_rate),
        t1_dq: 1.0 / (omega_rate + 2.0 * gamma_rate),
    })
}

/// PSD point produced by converting a relaxation rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePsdPoint {
    /// Probe frequency, Hz.
    pub freq_hz: f64,
    /// Effective electric-field PSD, V^2 m^-2 Hz^-1.
    pub s_e: f64,
}

/// Convert rates to spectral components: 2 Omega / d_par^2 probed at the SQ
/// transition and gamma / d_perp^2 probed at the DQ separation.
pub fn rates_to_psd(
    rates: &RelaxationRates,
    constants: &PhysicalConstants,
    probe_sq_hz: f64,
    probe_dq_hz: f64,
) -> (RatePsdPoint, RatePsdPoint) {
    (
        RatePsdPoint {
            freq_hz: probe_sq_hz,
            s_e: 2.0 * rates.omega_rate / (constants.d_par * constants.d_par),
        },
        RatePsdPoint {
            freq_hz: probe_dq_hz,
            s_e: rates.gamma_rate / (constants.d_perp * constants.d_perp),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::CONSTANTS;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn decomposition_ln_arithmetic() {
        // p0 = (1 + e^-1)/2 at N = 1, tau = pi us: S_DD = 1/(1 us) = 1e6 s^-1.
        let obs = [DdObservation {
            n_pulses: 1,
            tau: std::f64::consts::PI * 1e-6,
            p0: 0.5 * (1.0 + (-1.0f64).exp()),
            sigma_p0: None,
        }];
        let spec = spectral_decomposition(&obs, &CONSTANTS, None).unwrap();
        assert_eq!(spec.points.len(), 1);
        assert_relative_eq!(spec.points[0].s_dd, 1e6, max_relative = 1e-12);
        assert_relative_eq!(
            spec.points[0].s_e,
            2.0 * 1e6 / (CONSTANTS.d_par * CONSTANTS.d_par),
            max_relative = 1e-12
        );
    }

    #[test]
    fn decomposition_filters_saturated_points() {
        let near_one = DdObservation { n_pulses: 8, tau: 1e-6, p0: 0.999, sigma_p0: None };
        let near_half = DdObservation { n_pulses: 8, tau: 1e-6, p0: 0.505, sigma_p0: None };
        let good = DdObservation { n_pulses: 8, tau: 1e-6, p0: 0.8, sigma_p0: None };
        let spec = spectral_decomposition(&[near_one, near_half, good], &CONSTANTS, None).unwrap();
        assert_eq!(spec.points.len(), 1);
        assert!(matches!(
            spectral_decomposition(&[near_one, near_half], &CONSTANTS, None),
            Err(Error::EmptySpectrum { .. })
        ));
    }

    #[test]
    fn decomposition_equivariance() {
        // Scaling N tau by k scales S_DD by 1/k at fixed p0.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let tau = rng.gen_range(1e-7..1e-5);
            let p0 = rng.gen_range(0.55..0.95);
            let a = DdObservation { n_pulses: 16, tau, p0, sigma_p0: None };
            let b = DdObservation { n_pulses: 64, tau, p0, sigma_p0: None };
            let sa = spectral_decomposition(&[a], &CONSTANTS, None).unwrap().points[0].s_dd;
            let sb = spectral_decomposition(&[b], &CONSTANTS, None).unwrap().points[0].s_dd;
            assert_relative_eq!(sa, 4.0 * sb, max_relative = 1e-12);
        }
    }

    #[test]
    fn rates_reference_values() {
        let r = rates_from_t1(1.06e-3, 1.16e-3).unwrap();
        // Paper rounds to Omega = 316 Hz, gamma = 272 Hz; accept 1%.
        assert!((r.omega_rate - 316.0).abs() / 316.0 < 0.01, "Omega = {}", r.omega_rate);
        assert!((r.gamma_rate - 272.0).abs() / 272.0 < 0.01, "gamma = {}", r.gamma_rate);
        // Round trip to machine precision.
        assert_relative_eq!(r.t1_sq, 1.06e-3, max_relative = 1e-14);
        assert_relative_eq!(r.t1_dq, 1.16e-3, max_relative = 1e-14);
    }

    #[test]
    fn rates_boundary_and_inconsistent() {
        // T1_DQ = 3 T1_SQ puts gamma exactly at 0.
        let r = rates_from_t1(1e-3, 3e-3).unwrap();
        assert_relative_eq!(r.gamma_rate, 0.0, epsilon = 1e-9);
        assert!(matches!(
            rates_from_t1(1e-3, 10e-3),
            Err(Error::InconsistentRates { .. })
        ));
    }

    #[test]
    fn psd_reference_values() {
        let rates = RelaxationRates {
            omega_rate: 316.0,
            gamma_rate: 272.0,
            t1_sq: 1.0 / (3.0 * 316.0),
            t1_dq: 1.0 / (316.0 + 2.0 * 272.0),
        };
        let (sq, dq) = rates_to_psd(&rates, &CONSTANTS, 2218.2e6, 1301.5e6);
        assert_relative_eq!(sq.s_e, 5.16e7, max_relative = 0.01);
        assert_relative_eq!(dq.s_e, 9.41e3, max_relative = 0.01);
        let zero = RelaxationRates { omega_rate: 0.0, gamma_rate: 0.0, t1_sq: 1.0, t1_dq: 1.0 };
        let (sq0, _) = rates_to_psd(&zero, &CONSTANTS, 2218.2e6, 1301.5e6);
        assert_eq!(sq0.s_e, 0.0);
    }

    fn synth_lorentzian_points(
        coupling_sq: f64,
        tau_c: f64,
        omegas: &[f64],
    ) -> NoiseSpectrum {
        let truth = LorentzianNoise {
            coupling_sq,
            tau_c,
            white_degenerate: false,
            tau_c_upper_bound: None,
        };
        let points = omegas
            .iter()
            .map(|&omega| {
                let s_dd = truth.s_dd(omega);
                SpectrumPoint {
                    omega,
                    s_dd,
                    s_e: 2.0 * s_dd / (CONSTANTS.d_par * CONSTANTS.d_par),
                    sigma_s_dd: Some(s_dd * 0.01),
                    n_pulses: 16,
                    tau: std::f64::consts::PI / omega,
                    p0: 0.8,
                }
            })
            .collect();
        NoiseSpectrum { points, eps: DEFAULT_COHERENCE_EPS }
    }

    fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
            .collect()
    }

    #[test]
    fn lorentzian_round_trip() {
        // tau_c = 50 ns, plateau chosen to give S_e ~ 1e10 V^2/m^2Hz.
        let tau_c = 50e-9;
        let plateau_sdd = 1e10 * CONSTANTS.d_par * CONSTANTS.d_par / 2.0;
        let coupling = std::f64::consts::PI * plateau_sdd / tau_c;
        let omegas = log_grid(1e6, 1e9, 25);
        let spec = synth_lorentzian_points(coupling, tau_c, &omegas);
        let (noise, fit) = lorentzian_fit(&spec).unwrap();
        assert!(fit.converged);
        assert!(!noise.white_degenerate);
        assert_relative_eq!(noise.tau_c, tau_c, max_relative = 0.1);
        assert_relative_eq!(noise.coupling_sq, coupling, max_relative = 0.1);
    }

    #[test]
    fn lorentzian_round_trip_random_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let tau_c = 10f64.powf(rng.gen_range(-8.0..-6.0));
            let coupling = 10f64.powf(rng.gen_range(10.0..14.0));
            // Band spanning the knee 1/tau_c by a factor 30 each way.
            let knee = 1.0 / tau_c;
            let omegas = log_grid(knee / 30.0, knee * 30.0, 21);
            let spec = synth_lorentzian_points(coupling, tau_c, &omegas);
            let (noise, _) = lorentzian_fit(&spec).unwrap();
            assert!(!noise.white_degenerate);
            assert_relative_eq!(noise.tau_c, tau_c, max_relative = 0.1);
            assert_relative_eq!(noise.coupling_sq, coupling, max_relative = 0.1);
        }
    }

    #[test]
    fn lorentzian_white_degenerate() {
        // Flat spectrum over omega/2pi in [1e5, 1e7] Hz: the knee is far above
        // the band, tau_c can only be bounded, and the bound is < 100 ns.
        let tau_c = 1e-9;
        let coupling = 1e12;
        let omegas = log_grid(2.0 * std::f64::consts::PI * 1e5, 2.0 * std::f64::consts::PI * 1e7, 15);
        let spec = synth_lorentzian_points(coupling, tau_c, &omegas);
        let (noise, _) = lorentzian_fit(&spec).unwrap();
        assert!(noise.white_degenerate);
        let bound = noise.tau_c_upper_bound.unwrap();
        assert!(bound <= 100e-9, "bound = {bound}");
        // Plateau preserved by the reparametrization.
        let plateau_in = coupling * tau_c / std::f64::consts::PI;
        assert_relative_eq!(
            noise.coupling_sq * noise.tau_c / std::f64::consts::PI,
            plateau_in,
            max_relative = 0.05
        );
    }

    #[test]
    fn lorentzian_needs_three_points() {
        let spec = synth_lorentzian_points(1e12, 50e-9, &[1e7]);
        assert!(lorentzian_fit(&spec).is_err());
    }
}
