//! Forward models for every measured signal: coherence decay, proton NMR dip
//! lineshape, rms dipolar field, dynamical-decoupling scaling, DEER decay,
//! instantaneous diffusion, and relaxation curves.
//!
//! All functions here are pure; synthetic-data generation with photon shot
//! noise lives in [`crate::synth`].

use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};

/// sin(x)/x with sinc(0) = 1 (unnormalized convention, so the NMR dip sits at
/// omega_n = pi/tau).
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Which contrast factor C multiplies the coherence envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ContrastTerm {
    /// Plain echo / dynamical decoupling, C = 1.
    Echo,
    /// Proton NMR dip; tau is recovered from t_tot = N tau.
    Nmr {
        dip: NmrDipModel,
        /// Proton Larmor angular frequency, rad/s.
        omega_n: f64,
    },
    /// Pulsed DEER extra decay on top of the echo envelope; t_tot = 2 tau.
    Deer(DeerModel),
}

/// General coherence decay: p0(t) = 1/2 + (C/2) exp[-(t/T2)^p].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayModel {
    /// Coherence time, s.
    pub t2: f64,
    /// Stretch exponent.
    pub p: f64,
    pub contrast: ContrastTerm,
}

impl DecayModel {
    pub fn new(t2: f64, p: f64, contrast: ContrastTerm) -> Result<Self> {
        if !(t2 > 0.0) {
            return Err(Error::InvalidParameter(format!("t2 must be > 0, got {t2}")));
        }
        if !(0.3..=3.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "stretch exponent p must be in [0.3, 3] (fit-sanity window), got {p}"
            )));
        }
        Ok(DecayModel { t2, p, contrast })
    }

    pub fn echo(t2: f64, p: f64) -> Result<Self> {
        Self::new(t2, p, ContrastTerm::Echo)
    }

    /// Stretched-exponential envelope exp[-(t/T2)^p].
    pub fn envelope(&self, t_tot: f64) -> f64 {
        if t_tot == 0.0 {
            1.0
        } else {
            (-(t_tot / self.t2).powf(self.p)).exp()
        }
    }

    fn contrast_at(&self, constants: &PhysicalConstants, t_tot: f64) -> f64 {
        match &self.contrast {
            ContrastTerm::Echo => 1.0,
            ContrastTerm::Nmr { dip, omega_n } => {
                let tau = t_tot / dip.n_pulses as f64;
                dip.contrast(constants, *omega_n, tau)
            }
            ContrastTerm::Deer(deer) => deer.extra_decay(t_tot),
        }
    }
}

/// Evaluate the decay curve p0(t_tot) = 1/2 + (C/2) exp[-(t_tot/T2)^p].
pub fn decay_curve(model: &DecayModel, constants: &PhysicalConstants, t_tot: f64) -> f64 {
    debug_assert!(t_tot >= 0.0);
    0.5 + 0.5 * model.contrast_at(constants, t_tot) * model.envelope(t_tot)
}

/// Root-mean-square nuclear dipolar field from the semi-infinite proton bath:
/// B_rms = (mu0 hbar gamma_h / 4pi) sqrt(5 pi rho / (96 d^3)).
pub fn b_rms(constants: &PhysicalConstants, d_nv: f64, rho: f64) -> Result<f64> {
    if !(d_nv > 0.0) {
        return Err(Error::InvalidParameter(format!("d_nv must be > 0, got {d_nv}")));
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!("rho must be > 0, got {rho}")));
    }
    let prefactor = constants.mu_0 * constants.hbar * constants.gamma_h
        / (4.0 * std::f64::consts::PI);
    Ok(prefactor * (5.0 * std::f64::consts::PI * rho / (96.0 * d_nv.powi(3))).sqrt())
}

/// Proton NMR dip model for a single NV under an XYk-N sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmrDipModel {
    /// NV depth below the diamond surface, m.
    pub d_nv: f64,
    /// Proton number density of the analyte, m^-3 (6e28 for immersion oil).
    pub rho: f64,
    /// Number of pi pulses N.
    pub n_pulses: u32,
}

impl NmrDipModel {
    pub fn new(d_nv: f64, rho: f64, n_pulses: u32) -> Result<Self> {
        if n_pulses == 0 {
            return Err(Error::InvalidParameter("n_pulses must be >= 1".to_string()));
        }
        if !(d_nv > 0.0) || !(rho > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "d_nv and rho must be > 0, got {d_nv}, {rho}"
            )));
        }
        Ok(NmrDipModel { d_nv, rho, n_pulses })
    }

    /// rms dipolar field, recomputed from depth and density (never stored).
    pub fn b_rms(&self, constants: &PhysicalConstants) -> f64 {
        b_rms(constants, self.d_nv, self.rho).expect("validated at construction")
    }

    /// Dip contrast at inter-pulse spacing tau:
    /// C_NMR = exp{-2 (gamma_e B_rms N tau / pi)^2 sinc^2[(N tau / 2)(omega_n - pi/tau)]}.
    pub fn contrast(&self, constants: &PhysicalConstants, omega_n: f64, tau: f64) -> f64 {
        nmr_contrast(self, constants, omega_n, tau)
    }

    /// Phase amplitude gamma_e B_rms N tau / pi; Eq.-(2)-style small-phase
    /// treatment is reliable for values well below ~1.
    pub fn phase_amplitude(&self, constants: &PhysicalConstants, tau: f64) -> f64 {
        constants.gamma_e * self.b_rms(constants) * self.n_pulses as f64 * tau
            / std::f64::consts::PI
    }
}

/// NMR dip contrast C_NMR(tau); see [`NmrDipModel::contrast`].
pub fn nmr_contrast(
    model: &NmrDipModel,
    constants: &PhysicalConstants,
    omega_n: f64,
    tau: f64,
) -> f64 {
    debug_assert!(tau > 0.0);
    let n_tau = model.n_pulses as f64 * tau;
    let amp = constants.gamma_e * model.b_rms(constants) * n_tau / std::f64::consts::PI;
    let detune = sinc(0.5 * n_tau * (omega_n - std::f64::consts::PI / tau));
    (-2.0 * amp * amp * detune * detune).exp()
}

/// Scaling-and-saturation of T2 under N-pulse dynamical decoupling:
/// T2(N) = T2_1 [N_sat^s + (N^s - N_sat^s) exp(-N/N_sat)].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DdScalingModel {
    /// Single-echo T2 parameter, s.
    pub t2_1: f64,
    /// Saturation pulse number.
    pub n_sat: f64,
    /// Scaling exponent.
    pub s_exp: f64,
}

impl DdScalingModel {
    pub fn new(t2_1: f64, n_sat: f64, s_exp: f64) -> Result<Self> {
        if !(t2_1 > 0.0) || !(n_sat > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "t2_1 and n_sat must be > 0, got {t2_1}, {n_sat}"
            )));
        }
        Ok(DdScalingModel { t2_1, n_sat, s_exp })
    }

    /// Saturated coherence time T2_inf = T2_1 N_sat^s.
    pub fn t2_inf(&self) -> f64 {
        self.t2_1 * self.n_sat.powf(self.s_exp)
    }
}

/// T2 under an N-pulse sequence per the saturating scaling law.
pub fn dd_t2(model: &DdScalingModel, n: f64) -> f64 {
    debug_assert!(n >= 1.0);
    let n_sat_s = model.n_sat.powf(model.s_exp);
    model.t2_1 * (n_sat_s + (n.powf(model.s_exp) - n_sat_s) * (-n / model.n_sat).exp())
}

/// Pulsed-DEER decay parameters: extra factor exp[-(2 tau / T2_DEER)^q] on the
/// echo envelope, with the driven-defect density linked through the
/// instantaneous-diffusion relation when q = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeerModel {
    /// DEER decay time, s.
    pub t2_deer: f64,
    /// Stretch exponent of the DEER decay.
    pub q: f64,
    /// Drive flip angle beta, rad (pi for a full flip).
    pub beta: f64,
}

impl DeerModel {
    pub fn new(t2_deer: f64, q: f64, beta: f64) -> Result<Self> {
        if !(t2_deer > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "t2_deer must be > 0, got {t2_deer}"
            )));
        }
        if !(0.0..=std::f64::consts::PI).contains(&beta) {
            return Err(Error::InvalidParameter(format!(
                "beta must be in [0, pi], got {beta}"
            )));
        }
        Ok(DeerModel { t2_deer, q, beta })
    }

    /// exp[-(t_tot/T2_DEER)^q] with t_tot = 2 tau.
    pub fn extra_decay(&self, t_tot: f64) -> f64 {
        if t_tot == 0.0 {
            1.0
        } else {
            (-(t_tot / self.t2_deer).powf(self.q)).exp()
        }
    }

    /// Driven-defect density from 1/T_id = 1/T2_DEER, m^-3. Only exact for
    /// q = 1; order-of-magnitude otherwise.
    pub fn defect_density(&self, constants: &PhysicalConstants) -> Result<f64> {
        let rate = 1.0 / self.t2_deer;
        let unit = instantaneous_diffusion_rate(1.0, self.beta, constants)?;
        if unit == 0.0 {
            return Err(Error::InvalidParameter(
                "defect density undefined at beta = 0 (sin^2(beta/2) = 0)".to_string(),
            ));
        }
        Ok(rate / unit)
    }
}

/// Instantaneous-diffusion rate 1/T_id = N_d pi mu0 g_e^2 mu_B^2 / (9 sqrt(3) hbar) sin^2(beta/2).
pub fn instantaneous_diffusion_rate(
    n_d: f64,
    beta: f64,
    constants: &PhysicalConstants,
) -> Result<f64> {
    if !(n_d >= 0.0) {
        return Err(Error::InvalidParameter(format!("n_d must be >= 0, got {n_d}")));
    }
    if !(0.0..=std::f64::consts::PI).contains(&beta) {
        return Err(Error::InvalidParameter(format!("beta must be in [0, pi], got {beta}")));
    }
    let s = (0.5 * beta).sin();
    let kappa = std::f64::consts::PI * constants.mu_0 * constants.g_e * constants.g_e
        * constants.mu_b
        * constants.mu_b
        / (9.0 * 3.0_f64.sqrt() * constants.hbar);
    Ok(n_d * kappa * s * s)
}

/// Relaxation channel probed by the pulse sequences of the appendix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelaxationChannel {
    /// Single quantum, magnetically allowed (mS 0 <-> -1); T1_SQ = 1/(3 Omega).
    Sq,
    /// Double quantum, electric-noise sensitive (mS -1 <-> +1); T1_DQ = 1/(Omega + 2 gamma).
    Dq,
}

/// Normalized relaxation difference signal exp(-tau_w / T1_channel).
pub fn relaxation_signal(_channel: RelaxationChannel, t1: f64, tau_w: f64) -> Result<f64> {
    if !(t1 > 0.0) {
        return Err(Error::InvalidParameter(format!("t1 must be > 0, got {t1}")));
    }
    if !(tau_w >= 0.0) {
        return Err(Error::InvalidParameter(format!("tau_w must be >= 0, got {tau_w}")));
    }
    Ok((-tau_w / t1).exp())
}

/// Operating-condition planner: suggest the pi-pulse count N for a measured
/// echo T2 at spacing tau, from the N tau / T2_echo ~ 2 heuristic, rounded to
/// a multiple of 8 (minimum 8).
pub fn suggest_pulse_count(t2_echo: f64, tau: f64) -> Result<u32> {
    if !(t2_echo > 0.0) || !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "t2_echo and tau must be > 0, got {t2_echo}, {tau}"
        )));
    }
    let raw = 2.0 * t2_echo / tau;
    let rounded = ((raw / 8.0).round() as u32).max(1) * 8;
    Ok(rounded)
}
