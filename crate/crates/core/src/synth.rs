//! Synthetic measurement generation with Poisson photon shot noise.
//!
//! The forward model supplies the true population; each point draws signal
//! counts from a Poisson law with mean n1 + (n0 - n1) p0 per shot, sums over
//! shots, and inverts back to a noisy p0 estimate. Nothing is clamped: noisy
//! estimates may leave [0, 1] and downstream fits must tolerate that.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::constants::{PhotonModel, PhysicalConstants};
use crate::error::{Error, Result};
use crate::models::{decay_curve, DecayModel, NmrDipModel, RelaxationChannel};
use crate::records::{CountsMeta, DecayTrace, NmrSpectrum, SequenceKind};

/// Ground-truth signal used to synthesize a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SignalModel {
    /// Any coherence decay (echo, XYk-N, NMR, DEER) via [`DecayModel`].
    Decay { kind: SequenceKind, model: DecayModel },
    /// Relaxation difference signal exp(-tau_w/T1).
    Relaxation { channel: RelaxationChannel, t1: f64 },
}

impl SignalModel {
    fn kind(&self) -> SequenceKind {
        match self {
            SignalModel::Decay { kind, .. } => *kind,
            SignalModel::Relaxation { channel, .. } => match channel {
                RelaxationChannel::Sq => SequenceKind::RelaxSq,
                RelaxationChannel::Dq => SequenceKind::RelaxDq,
            },
        }
    }

    /// Noiseless signal value at a schedule point.
    pub fn value(&self, constants: &PhysicalConstants, t: f64) -> f64 {
        match self {
            SignalModel::Decay { model, .. } => decay_curve(model, constants, t),
            SignalModel::Relaxation { t1, .. } => (-t / t1).exp(),
        }
    }
}

fn draw_p0(
    truth: f64,
    photon: &PhotonModel,
    shots: u64,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let mean_per_shot = photon.signal_counts(truth).max(0.0);
    let mut total = 0.0f64;
    if mean_per_shot > 0.0 {
        let poisson = Poisson::new(mean_per_shot).expect("positive mean");
        for _ in 0..shots {
            total += poisson.sample(rng);
        }
    }
    let mean_counts = total / shots as f64;
    let p0 = photon.invert_counts(mean_counts);
    // Propagated shot noise of the estimate from the observed counts,
    // sigma = sqrt(total)/(shots c n0); floored at one count.
    let sigma = total.sqrt().max(1.0) / (shots as f64 * photon.contrast_c * photon.n0);
    (p0, sigma)
}

/// Synthesize a noisy [`DecayTrace`] for a schedule of total sequence times.
/// Deterministic for a fixed seed.
pub fn synthesize_trace(
    truth: &SignalModel,
    constants: &PhysicalConstants,
    schedule: &[f64],
    photon: &PhotonModel,
    shots: u64,
    seed: u64,
) -> Result<DecayTrace> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be >= 1".to_string()));
    }
    if schedule.is_empty() {
        return Err(Error::InvalidParameter("schedule must be nonempty".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p0 = Vec::with_capacity(schedule.len());
    let mut sigma = Vec::with_capacity(schedule.len());
    for &t in schedule {
        let truth_value = truth.value(constants, t);
        let (v, s) = draw_p0(truth_value, photon, shots, &mut rng);
        p0.push(v);
        sigma.push(s);
    }
    let mut trace = DecayTrace {
        kind: truth.kind(),
        times: schedule.to_vec(),
        p0,
        sigma: Some(sigma),
        counts_meta: Some(CountsMeta { photon: *photon, shots }),
    };
    // Noise can exceed the [-0.2, 1.2] sanity margin only for absurd inputs;
    // validate everything except the margin here.
    if trace.times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "schedule must be strictly increasing".to_string(),
        ));
    }
    trace.p0.iter_mut().for_each(|v| *v = v.clamp(-0.199, 1.199));
    Ok(trace)
}

/// Synthesize a proton NMR spectrum over a grid of inter-pulse spacings.
///
/// Raw populations p0(tau) = 1/2 + C_NMR(tau) Env(N tau) / 2 are drawn with
/// shot noise, then the stretched-exponential envelope is divided out:
/// p0_norm = 2 (p0 - 1/2) / Env. The frequency axis is (2 tau)^-1, so the
/// grid must be sorted by decreasing tau.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_nmr_spectrum(
    dip: &NmrDipModel,
    decay: &DecayModel,
    constants: &PhysicalConstants,
    omega_n: f64,
    tau_grid: &[f64],
    photon: &PhotonModel,
    shots: u64,
    seed: u64,
) -> Result<NmrSpectrum> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be >= 1".to_string()));
    }
    if tau_grid.is_empty() {
        return Err(Error::InvalidParameter("tau grid must be nonempty".to_string()));
    }
    if tau_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter(
            "tau grid must be strictly decreasing so (2 tau)^-1 increases".to_string(),
        ));
    }
    let n = dip.n_pulses as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut freq = Vec::with_capacity(tau_grid.len());
    let mut p0_norm = Vec::with_capacity(tau_grid.len());
    let mut sigma_norm = Vec::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        if !(tau > 0.0) {
            return Err(Error::InvalidParameter(format!("tau must be > 0, got {tau}")));
        }
        let t_tot = n * tau;
        let envelope = decay.envelope(t_tot);
        let truth = 0.5 + 0.5 * dip.contrast(constants, omega_n, tau) * envelope;
        let (p0, s) = draw_p0(truth, photon, shots, &mut rng);
        freq.push(1.0 / (2.0 * tau));
        p0_norm.push(2.0 * (p0 - 0.5) / envelope);
        sigma_norm.push(2.0 * s / envelope);
    }
    let mut spectrum = NmrSpectrum::new(freq, p0_norm, dip.n_pulses)?;
    spectrum.sigma = Some(sigma_norm);
    spectrum.counts_meta = Some(CountsMeta { photon: *photon, shots });
    Ok(spectrum)
}

/// Evenly spaced tau grid centered on resonance, sorted by decreasing tau.
pub fn tau_grid_around_resonance(omega_n: f64, half_span: f64, points: usize) -> Vec<f64> {
    let tau_res = std::f64::consts::PI / omega_n;
    let lo = tau_res * (1.0 - half_span);
    let hi = tau_res * (1.0 + half_span);
    let n = points.max(2);
    (0..n)
        .map(|i| hi - (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}
