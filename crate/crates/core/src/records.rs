//! Measurement records: time-series decay traces and frequency-series NMR
//! spectra, real or synthetic.

use serde::{Deserialize, Serialize};

use crate::constants::PhotonModel;
use crate::error::{Error, Result};

/// Pulse sequence that produced a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SequenceKind {
    /// Hahn echo; the time axis is t_tot = 2 tau.
    Hahn,
    /// XYk-N dynamical decoupling with N pi pulses; t_tot = N tau.
    Xy { k: u8, n_pulses: u32 },
    /// Pulsed DEER on top of a Hahn echo; t_tot = 2 tau.
    Deer,
    /// Single-quantum relaxation difference signal S_{0,0} - S_{0,-1}.
    RelaxSq,
    /// Double-quantum relaxation difference signal S_{-1,-1} - S_{-1,1}.
    RelaxDq,
    /// Hahn echo under continuous drive of the bath spins.
    Drive,
}

impl SequenceKind {
    /// Conventional sequence for a given pi-pulse count: Hahn for N = 1,
    /// otherwise XYk-N with the largest k in {16, 8, 4} dividing N.
    pub fn for_pulses(n_pulses: u32) -> SequenceKind {
        match n_pulses {
            0 | 1 => SequenceKind::Hahn,
            n if n % 16 == 0 => SequenceKind::Xy { k: 16, n_pulses: n },
            n if n % 8 == 0 => SequenceKind::Xy { k: 8, n_pulses: n },
            n => SequenceKind::Xy { k: 4, n_pulses: n },
        }
    }

    /// Number of pi pulses in the sequence.
    pub fn n_pulses(&self) -> u32 {
        match self {
            SequenceKind::Xy { n_pulses, .. } => *n_pulses,
            _ => 1,
        }
    }

    pub fn label(&self) -> String {
        match self {
            SequenceKind::Hahn => "hahn".to_string(),
            SequenceKind::Xy { k, n_pulses } => format!("xy{k}-{n_pulses}"),
            SequenceKind::Deer => "deer".to_string(),
            SequenceKind::RelaxSq => "relax-sq".to_string(),
            SequenceKind::RelaxDq => "relax-dq".to_string(),
            SequenceKind::Drive => "drive".to_string(),
        }
    }

    pub fn parse(label: &str) -> Result<SequenceKind> {
        match label {
            "hahn" => Ok(SequenceKind::Hahn),
            "deer" => Ok(SequenceKind::Deer),
            "relax-sq" => Ok(SequenceKind::RelaxSq),
            "relax-dq" => Ok(SequenceKind::RelaxDq),
            "drive" => Ok(SequenceKind::Drive),
            other => {
                let rest = other.strip_prefix("xy").ok_or_else(|| {
                    Error::InvalidParameter(format!("unknown sequence kind `{other}`"))
                })?;
                let (k, n) = rest.split_once('-').ok_or_else(|| {
                    Error::InvalidParameter(format!("malformed XY sequence label `{other}`"))
                })?;
                let k: u8 = k.parse().map_err(|_| {
                    Error::InvalidParameter(format!("malformed XY sequence label `{other}`"))
                })?;
                let n_pulses: u32 = n.parse().map_err(|_| {
                    Error::InvalidParameter(format!("malformed XY sequence label `{other}`"))
                })?;
                Ok(SequenceKind::Xy { k, n_pulses })
            }
        }
    }
}

/// Photon-counting metadata attached to synthetic or calibrated records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountsMeta {
    pub photon: PhotonModel,
    pub shots: u64,
}

/// One measured (or synthesized) decay: total sequence time vs the mS = 0
/// population p0. For the relax-sq/relax-dq kinds the series stores the
/// normalized difference signal instead of a raw population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayTrace {
    pub kind: SequenceKind,
    /// Total sequence times t_tot, s, strictly increasing.
    pub times: Vec<f64>,
    /// Population of mS = 0 at each time (noise may push it outside [0, 1]).
    pub p0: Vec<f64>,
    /// Per-point 1-sigma uncertainty of p0, when known.
    pub sigma: Option<Vec<f64>>,
    pub counts_meta: Option<CountsMeta>,
}

impl DecayTrace {
    pub fn new(kind: SequenceKind, times: Vec<f64>, p0: Vec<f64>) -> Result<Self> {
        let trace = DecayTrace { kind, times, p0, sigma: None, counts_meta: None };
        trace.validate()?;
        Ok(trace)
    }

    pub fn with_sigma(mut self, sigma: Vec<f64>) -> Result<Self> {
        if sigma.len() != self.times.len() {
            return Err(Error::InvalidParameter(format!(
                "sigma length {} does not match {} points",
                sigma.len(),
                self.times.len()
            )));
        }
        self.sigma = Some(sigma);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.p0.len() {
            return Err(Error::InvalidParameter(format!(
                "times ({}) and p0 ({}) length mismatch",
                self.times.len(),
                self.p0.len()
            )));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "times must be strictly increasing".to_string(),
            ));
        }
        if let Some(bad) = self.p0.iter().find(|v| !(-0.2..=1.2).contains(*v)) {
            return Err(Error::InvalidParameter(format!(
                "p0 value {bad} outside the [-0.2, 1.2] noise margin"
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Proton NMR spectrum: dip contrast C_NMR vs the sensed frequency (2 tau)^-1,
/// with the stretched-exponential decay envelope already divided out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmrSpectrum {
    /// Sensed frequency (2 tau)^-1, Hz, strictly increasing.
    pub freq_hz: Vec<f64>,
    /// Normalized spectrum values (1 off resonance, < 1 in the dip).
    pub p0_norm: Vec<f64>,
    /// Per-point 1-sigma uncertainty of p0_norm, when known.
    pub sigma: Option<Vec<f64>>,
    /// Number of pi pulses used for every point.
    pub n_pulses: u32,
    pub counts_meta: Option<CountsMeta>,
}

impl NmrSpectrum {
    pub fn new(freq_hz: Vec<f64>, p0_norm: Vec<f64>, n_pulses: u32) -> Result<Self> {
        if freq_hz.len() != p0_norm.len() {
            return Err(Error::InvalidParameter(format!(
                "freq ({}) and p0_norm ({}) length mismatch",
                freq_hz.len(),
                p0_norm.len()
            )));
        }
        if freq_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "frequencies must be strictly increasing".to_string(),
            ));
        }
        if n_pulses == 0 {
            return Err(Error::InvalidParameter("n_pulses must be >= 1".to_string()));
        }
        Ok(NmrSpectrum { freq_hz, p0_norm, sigma: None, n_pulses, counts_meta: None })
    }

    /// Inter-pulse spacing tau for a spectrum point, tau = 1/(2 f).
    pub fn tau_at(&self, idx: usize) -> f64 {
        1.0 / (2.0 * self.freq_hz[idx])
    }

    pub fn len(&self) -> usize {
        self.freq_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq_hz.is_empty()
    }
}
