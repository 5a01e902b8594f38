//! The inverse-problem engine: damped least-squares fits of every forward
//! model, NV-depth inference from NMR spectra, DD-scaling fits, DEER fits
//! with frozen echo parameters, and the detectability bound.

pub mod bound;
pub mod lm;
pub mod models;

use serde::{Deserialize, Serialize};

use crate::constants::{PhotonModel, PhysicalConstants};
use crate::error::{Error, Result};
use crate::models::{b_rms, instantaneous_diffusion_rate, DeerModel, NmrDipModel};
use crate::records::{DecayTrace, NmrSpectrum};

pub use bound::{accessible_region, is_accessible, t2_limit, AccessibleRegion, T2_FLOOR};

use lm::{levenberg_marquardt, FitData, LmOptions};
use models::{DdScalingCurve, DeerCurve, NmrDepthCurve, StretchedDecayCurve};

/// One fitted parameter with its 95% confidence half-width from the
/// linearized covariance (absent when the fit is degenerate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedParameter {
    pub name: String,
    pub value: f64,
    pub ci95: Option<f64>,
}

/// A parameter held fixed during the fit, echoed unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenParameter {
    pub name: String,
    pub value: f64,
}

/// Outcome of a least-squares fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: Vec<FittedParameter>,
    /// sqrt of the (weighted) sum of squared residuals at the optimum.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub frozen: Vec<FrozenParameter>,
    /// Quantities computed from the fitted parameters (no CI attached).
    pub derived: Vec<FittedParameter>,
}

impl FitResult {
    /// Look up a fitted or derived parameter by name.
    pub fn get(&self, name: &str) -> Option<f64> {
        self.parameters
            .iter()
            .chain(&self.derived)
            .find(|p| p.name == name)
            .map(|p| p.value)
    }

    pub fn ci95(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|p| p.name == name).and_then(|p| p.ci95)
    }

    /// Placeholder result for a degenerate (non-fittable) configuration.
    pub(crate) fn degenerate(names: &[&str], values: &[f64]) -> FitResult {
        FitResult {
            parameters: names
                .iter()
                .zip(values)
                .map(|(n, v)| FittedParameter { name: n.to_string(), value: *v, ci95: None })
                .collect(),
            residual_norm: f64::INFINITY,
            iterations: 0,
            converged: false,
            frozen: Vec::new(),
            derived: Vec::new(),
        }
    }

    fn push_derived(&mut self, name: &str, value: f64) {
        self.derived.push(FittedParameter { name: name.to_string(), value, ci95: None });
    }
}

/// Initial-guess policy for decay fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GuessPolicy {
    /// T2 from the 1/e crossing of the coherence, p = 1.
    Auto,
    Explicit { t2: f64, p: f64 },
}

/// Linear-interpolated time at which the normalized coherence 2(p0 - 1/2)
/// first crosses 1/e. Falls back to the span midpoint when there is no
/// crossing.
fn one_over_e_crossing(times: &[f64], p0: &[f64]) -> f64 {
    let target = (-1.0f64).exp();
    let coh: Vec<f64> = p0.iter().map(|v| 2.0 * (v - 0.5)).collect();
    for i in 1..coh.len() {
        if coh[i - 1] > target && coh[i] <= target {
            let frac = (coh[i - 1] - target) / (coh[i - 1] - coh[i]);
            return times[i - 1] + frac * (times[i] - times[i - 1]);
        }
    }
    if coh.last().copied().unwrap_or(0.0) > target {
        // Not yet decayed: T2 beyond the window.
        *times.last().unwrap()
    } else {
        0.5 * (times[0] + times[times.len() - 1])
    }
}

fn trace_fit_data(trace: &DecayTrace) -> FitData<'_> {
    FitData {
        xs: &trace.times,
        ys: &trace.p0,
        sigmas: trace.sigma.as_deref(),
    }
}

/// Fit the general coherence decay p0 = 1/2 + (C/2) exp[-(t/T2)^p] with C = 1
/// for (T2, p).
pub fn fit_decay(trace: &DecayTrace, policy: GuessPolicy) -> Result<FitResult> {
    if trace.len() < 5 {
        return Err(Error::InvalidParameter(format!(
            "decay fit needs >= 5 points, got {}",
            trace.len()
        )));
    }
    let spread = trace.p0.iter().cloned().fold(f64::MIN, f64::max)
        - trace.p0.iter().cloned().fold(f64::MAX, f64::min);
    if spread < 0.05 {
        return Err(Error::DegenerateData(format!(
            "p0 spread {spread:.4} too small to constrain a decay (all points near one level)"
        )));
    }
    let (t2_0, p_0) = match policy {
        GuessPolicy::Auto => (one_over_e_crossing(&trace.times, &trace.p0), 1.0),
        GuessPolicy::Explicit { t2, p } => (t2, p),
    };
    let model = StretchedDecayCurve { contrast: 1.0 };
    let names = ["t2", "p"];
    let out = levenberg_marquardt(
        &model,
        &trace_fit_data(trace),
        &[t2_0.max(trace.times[0]), p_0],
        &names,
        &LmOptions::default(),
    )?;
    Ok(out.into_result(&names, &[]))
}

/// Fixed parameters for the single-parameter NV-depth fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmrFixedParams {
    pub n_pulses: u32,
    /// Static field, T.
    pub b0: f64,
    /// Proton density of the analyte, m^-3.
    pub rho: f64,
    /// Echo coherence time, s (frozen).
    pub t2: f64,
    /// Stretch exponent (frozen).
    pub p: f64,
}

/// Invert the on-resonance dip contrast for a depth estimate (initial guess).
fn depth_from_dip(
    fixed: &NmrFixedParams,
    constants: &PhysicalConstants,
    c_min: f64,
) -> f64 {
    let omega_n = constants.gamma_h * fixed.b0;
    let tau_res = std::f64::consts::PI / omega_n;
    let n_tau = fixed.n_pulses as f64 * tau_res;
    let c = c_min.clamp(1e-9, 1.0 - 1e-9);
    let amp = (-c.ln() / 2.0).sqrt();
    let b = amp * std::f64::consts::PI / (constants.gamma_e * n_tau);
    // b_rms = K d^-3/2  =>  d = (K/b)^(2/3).
    let k = b_rms(constants, 1.0, fixed.rho).expect("rho validated by caller");
    (k / b).powf(2.0 / 3.0)
}

/// Fit the NMR spectrum for the NV depth with {N, B0, rho, T2, p} fixed.
///
/// When shot-noise metadata is available the result is screened for
/// detectability: the fitted dip must exceed the per-point noise (the S/N >= 1
/// condition) and the (T2, d) pair must lie in the accessible region.
pub fn fit_nmr_depth(
    spectrum: &NmrSpectrum,
    fixed: &NmrFixedParams,
    constants: &PhysicalConstants,
) -> Result<FitResult> {
    if spectrum.len() < 5 {
        return Err(Error::InvalidParameter(format!(
            "NMR depth fit needs >= 5 points, got {}",
            spectrum.len()
        )));
    }
    if !(fixed.rho > 0.0) || !(fixed.b0 > 0.0) || !(fixed.t2 > 0.0) {
        return Err(Error::InvalidParameter(
            "rho, b0 and t2 must all be > 0".to_string(),
        ));
    }
    let omega_n = constants.gamma_h * fixed.b0;
    let c_min = spectrum.p0_norm.iter().cloned().fold(f64::MAX, f64::min);
    let d0 = depth_from_dip(fixed, constants, c_min).clamp(1e-9, 1e-6);

    let curve = NmrDepthCurve {
        n_pulses: fixed.n_pulses,
        rho: fixed.rho,
        omega_n,
        constants: *constants,
    };
    let data = FitData {
        xs: &spectrum.freq_hz,
        ys: &spectrum.p0_norm,
        sigmas: spectrum.sigma.as_deref(),
    };
    let names = ["d_nv"];
    let frozen = [
        ("n_pulses", fixed.n_pulses as f64),
        ("b0", fixed.b0),
        ("rho", fixed.rho),
        ("t2", fixed.t2),
        ("p", fixed.p),
    ];
    let fitted = levenberg_marquardt(&curve, &data, &[d0], &names, &LmOptions::default());

    let (d_hat, mut result) = match fitted {
        Ok(out) => (out.theta[0], out.into_result(&names, &frozen)),
        Err(e) => {
            // A fit that cannot even converge on sub-noise data is reported
            // as undetectable rather than a numeric failure.
            if detectability_deficit(spectrum, fixed, constants, d0).is_some() {
                return Err(Error::Undetectable(format!(
                    "no dip resolvable above shot noise (initial estimate {:.3} nm): {e}",
                    d0 * 1e9
                )));
            }
            return Err(e);
        }
    };

    if let Some(reason) = detectability_deficit(spectrum, fixed, constants, d_hat) {
        return Err(Error::Undetectable(reason));
    }
    // The dip model rests on a small-phase treatment; report the on-resonance
    // phase amplitude gamma_e B_rms N tau / pi so values approaching pi can
    // be flagged by the caller.
    if let Ok(dip) = NmrDipModel::new(d_hat, fixed.rho, fixed.n_pulses) {
        let tau_res = std::f64::consts::PI / omega_n;
        result.push_derived("phase_amplitude", dip.phase_amplitude(constants, tau_res));
    }
    Ok(result)
}

/// Returns a reason string when the fitted configuration is below the
/// detection threshold; None when it is detectable (or undecidable for lack
/// of noise metadata).
fn detectability_deficit(
    spectrum: &NmrSpectrum,
    fixed: &NmrFixedParams,
    constants: &PhysicalConstants,
    d_hat: f64,
) -> Option<String> {
    let omega_n = constants.gamma_h * fixed.b0;
    let tau_res = std::f64::consts::PI / omega_n;
    let dip_model = NmrDipModel::new(d_hat, fixed.rho, fixed.n_pulses).ok()?;
    let dip = 1.0 - dip_model.contrast(constants, omega_n, tau_res);
    if let Some(sigma) = &spectrum.sigma {
        let mut s = sigma.clone();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let noise = s[s.len() / 2];
        if dip < noise {
            return Some(format!(
                "fitted dip {dip:.4} at d = {:.2} nm is below the per-point noise {noise:.4} (S/N < 1)",
                d_hat * 1e9
            ));
        }
    }
    if let Some(meta) = &spectrum.counts_meta {
        // The shot-noise term is set by the accumulated counts per point.
        let effective = PhotonModel {
            n0: meta.photon.n0 * meta.shots as f64,
            contrast_c: meta.photon.contrast_c,
        };
        match is_accessible(&effective, fixed.rho, fixed.t2, d_hat, constants) {
            Ok(false) => {
                return Some(format!(
                    "(T2 = {:.2} us, d = {:.2} nm) lies outside the accessible region",
                    fixed.t2 * 1e6,
                    d_hat * 1e9
                ));
            }
            Ok(true) => {}
            Err(e) => return Some(e.to_string()),
        }
    }
    None
}

/// Fit the scaling-and-saturation law T2(N) = T2_1 [N_sat^s + (N^s - N_sat^s)
/// e^(-N/N_sat)] to (N, T2) points. Requires >= 4 distinct pulse counts
/// including N = 1. The derived T2_inf = T2_1 N_sat^s is reported.
pub fn fit_dd_scaling(points: &[(f64, f64)]) -> Result<FitResult> {
    let mut ns: Vec<f64> = points.iter().map(|p| p.0).collect();
    ns.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ns.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if ns.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "scaling fit needs >= 4 distinct N values, got {}",
            ns.len()
        )));
    }
    if (ns[0] - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(
            "scaling fit needs the N = 1 (echo) point".to_string(),
        ));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let t2_1_guess = points
        .iter()
        .find(|p| (p.0 - 1.0).abs() < 1e-9)
        .map(|p| p.1)
        .unwrap();
    let (n_max, t2_max) = points
        .iter()
        .cloned()
        .fold((1.0f64, t2_1_guess), |acc, p| if p.0 > acc.0 { p } else { acc });
    let s_guess = ((t2_max / t2_1_guess).ln() / n_max.ln()).clamp(0.01, 1.0);
    let n_sat_guess = (n_max / 4.0).max(2.0);

    let names = ["n_sat", "s", "t2_1"];
    let out = levenberg_marquardt(
        &DdScalingCurve,
        &FitData { xs: &xs, ys: &ys, sigmas: None },
        &[n_sat_guess, s_guess, t2_1_guess],
        &names,
        &LmOptions::default(),
    )?;
    let t2_inf = out.theta[2] * out.theta[0].powf(out.theta[1]);
    let mut result = out.into_result(&names, &[]);
    result.push_derived("t2_inf", t2_inf);
    Ok(result)
}

/// DEER fit outcome: the decay parameters plus the driven-defect density from
/// the instantaneous-diffusion relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeerFit {
    pub fit: FitResult,
    /// Driven-defect density, m^-3.
    pub n_d: f64,
    /// The Eq.-(9)-style inversion is exact only for q = 1; set when the
    /// fitted q deviates from 1 and n_d is an order-of-magnitude estimate.
    pub order_of_magnitude: bool,
}

/// Fit the pulsed-DEER decay p0 = 1/2 + (1/2) e^{-(t/T2)^p} e^{-(t/T2_DEER)^q}
/// for (T2_DEER, q), with the echo parameters frozen, then invert the
/// instantaneous-diffusion relation (1/T_id = 1/T2_DEER) for the defect
/// density at flip angle `beta`.
pub fn fit_deer(
    trace: &DecayTrace,
    frozen_t2: f64,
    frozen_p: f64,
    beta: f64,
    constants: &PhysicalConstants,
) -> Result<DeerFit> {
    if trace.len() < 5 {
        return Err(Error::InvalidParameter(format!(
            "DEER fit needs >= 5 points, got {}",
            trace.len()
        )));
    }
    if !(frozen_t2 > 0.0) {
        return Err(Error::InvalidParameter("frozen t2 must be > 0".to_string()));
    }
    let unit_rate = instantaneous_diffusion_rate(1.0, beta, constants)?;
    if unit_rate == 0.0 {
        return Err(Error::InvalidParameter(
            "n_d undefined at beta = 0: sin^2(beta/2) = 0 in the diffusion relation".to_string(),
        ));
    }

    // Initial T2_DEER from the 1/e crossing of the envelope-corrected data.
    let corrected: Vec<f64> = trace
        .times
        .iter()
        .zip(&trace.p0)
        .map(|(&t, &p0)| {
            let env = (-(t / frozen_t2).powf(frozen_p)).exp();
            0.5 + (p0 - 0.5) / env.max(1e-12)
        })
        .collect();
    let t2d_0 = one_over_e_crossing(&trace.times, &corrected).max(trace.times[0]);

    let curve = DeerCurve { t2: frozen_t2, p: frozen_p };
    let names = ["t2_deer", "q"];
    let frozen = [("t2", frozen_t2), ("p", frozen_p), ("beta", beta)];
    let out = levenberg_marquardt(
        &curve,
        &trace_fit_data(trace),
        &[t2d_0, 1.0],
        &names,
        &LmOptions::default(),
    )?;
    let t2_deer = out.theta[0];
    let q = out.theta[1];
    let deer = DeerModel::new(t2_deer, q, beta)?;
    let n_d = deer.defect_density(constants)?;
    let mut fit = out.into_result(&names, &frozen);
    fit.push_derived("n_d", n_d);
    Ok(DeerFit { fit, n_d, order_of_magnitude: (q - 1.0).abs() > 0.05 })
}
