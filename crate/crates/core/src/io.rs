//! File codecs: CSV artifacts with `#`-comment metadata headers, JSONL record
//! stores, fit reports, and run manifests.
//!
//! Every CSV starts with a `# format = shallow-nv/1` line, optional
//! `# key = value` metadata, then a header row with units in the column
//! names. Numbers are written in shortest round-trip form so re-serializing a
//! parsed artifact is byte-stable.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assembly::{DepthHistogram, NvRecord};
use crate::constants::PhotonModel;
use crate::error::{Error, Result};
use crate::fit::AccessibleRegion;
use crate::implant::{DepthProfile, IonTransportScenario};
use crate::noise::{DdObservation, NoiseSpectrum};
use crate::records::{CountsMeta, DecayTrace, NmrSpectrum, SequenceKind};

pub const FORMAT_VERSION: &str = "shallow-nv/1";

struct CsvDocument {
    meta: Vec<(String, String)>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvDocument {
    fn parse(text: &str, path: &str) -> Result<CsvDocument> {
        let mut meta = Vec::new();
        let mut header: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some((key, value)) = comment.split_once('=') {
                    let key = key.trim().to_string();
                    let value = value.trim().to_string();
                    if key == "format" && value != FORMAT_VERSION {
                        return Err(Error::VersionMismatch {
                            path: path.to_string(),
                            found: value,
                            expected: FORMAT_VERSION.to_string(),
                        });
                    }
                    meta.push((key, value));
                }
                continue;
            }
            let fields: Vec<String> = line.split(',').map(|f| f.trim().to_string()).collect();
            if header.is_none() {
                header = Some(fields);
            } else {
                rows.push(fields);
            }
            let _ = idx;
        }
        let header = header.ok_or_else(|| Error::Parse {
            path: path.to_string(),
            line: 0,
            detail: "missing header row".to_string(),
        })?;
        Ok(CsvDocument { meta, header, rows })
    }

    fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn meta_f64(&self, key: &str, path: &str) -> Result<Option<f64>> {
        match self.meta(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|e| Error::Parse {
                    path: path.to_string(),
                    line: 0,
                    detail: format!("metadata {key} = {v}: {e}"),
                }),
        }
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn require_column(&self, name: &str, path: &str) -> Result<usize> {
        self.column(name).ok_or_else(|| Error::Parse {
            path: path.to_string(),
            line: 1,
            detail: format!("missing column `{name}` in header {:?}", self.header),
        })
    }

    fn f64_at(&self, row: usize, col: usize, path: &str) -> Result<f64> {
        self.f64_shifted_at(row, col, 0, path)
    }

    /// Parse a unit-scaled column exactly: the decimal exponent is shifted by
    /// `shift` before conversion (e.g. -6 turns a `t_us` column into seconds).
    fn f64_shifted_at(&self, row: usize, col: usize, shift: i32, path: &str) -> Result<f64> {
        decimal::parse_shifted(&self.rows[row][col], shift).ok_or_else(|| Error::Parse {
            path: path.to_string(),
            line: row + 2,
            detail: format!("unparseable number `{}`", self.rows[row][col]),
        })
    }
}

/// Exact unit-scaled float formatting.
///
/// Columns carry scaled units (us, MHz, nm) while memory holds SI; scaling by
/// multiplication loses ulps, so instead the decimal exponent of the shortest
/// float representation is shifted textually. parse(serialize(x)) == x holds
/// exactly and re-serializing a parsed file is byte-identical.
mod decimal {
    /// Shortest representation of `v` with its decimal exponent shifted by
    /// `shift`.
    pub fn fmt_shifted(v: f64, shift: i32) -> String {
        if v == 0.0 {
            return "0".to_string();
        }
        let s = format!("{v:e}");
        let (mantissa, exp) = s.split_once('e').expect("e-notation");
        let exp: i32 = exp.parse().expect("exponent");
        render(mantissa, exp + shift)
    }

    pub fn fmt_plain(v: f64) -> String {
        fmt_shifted(v, 0)
    }

    fn render(mantissa: &str, exp: i32) -> String {
        let (sign, rest) = match mantissa.strip_prefix('-') {
            Some(rest) => ("-", rest),
            None => ("", mantissa),
        };
        let digits: String = rest.chars().filter(|c| *c != '.').collect();
        if (-4..=15).contains(&exp) {
            if exp >= 0 {
                let int_len = exp as usize + 1;
                if digits.len() <= int_len {
                    format!("{sign}{digits}{}", "0".repeat(int_len - digits.len()))
                } else {
                    format!("{sign}{}.{}", &digits[..int_len], &digits[int_len..])
                }
            } else {
                format!("{sign}0.{}{digits}", "0".repeat((-exp - 1) as usize))
            }
        } else if digits.len() == 1 {
            format!("{sign}{digits}e{exp}")
        } else {
            format!("{sign}{}.{}e{exp}", &digits[..1], &digits[1..])
        }
    }

    /// Parse a decimal string with its exponent shifted by `shift`; the shift
    /// happens on the text so no rounding is introduced beyond the one
    /// correctly-rounded `from_str`.
    pub fn parse_shifted(s: &str, shift: i32) -> Option<f64> {
        let s = s.trim();
        let (body, exp) = match s.find(['e', 'E']) {
            Some(i) => (&s[..i], s[i + 1..].parse::<i64>().ok()?),
            None => (s, 0),
        };
        if body.is_empty() || !body.chars().all(|c| c.is_ascii_digit() || c == '.' || c == '-' || c == '+') {
            return None;
        }
        format!("{body}e{}", exp + shift as i64).parse::<f64>().ok()
    }
}

use decimal::{fmt_plain, fmt_shifted};

fn counts_meta_lines(out: &mut String, meta: &Option<CountsMeta>) {
    if let Some(m) = meta {
        let _ = writeln!(out, "# photon_n0 = {}", fmt_plain(m.photon.n0));
        let _ = writeln!(out, "# photon_c = {}", fmt_plain(m.photon.contrast_c));
        let _ = writeln!(out, "# shots = {}", m.shots);
    }
}

fn parse_counts_meta(doc: &CsvDocument, path: &str) -> Result<Option<CountsMeta>> {
    let n0 = doc.meta_f64("photon_n0", path)?;
    let c = doc.meta_f64("photon_c", path)?;
    let shots = doc.meta_f64("shots", path)?;
    match (n0, c, shots) {
        (Some(n0), Some(c), Some(shots)) => Ok(Some(CountsMeta {
            photon: PhotonModel::new(n0, c)?,
            shots: shots as u64,
        })),
        _ => Ok(None),
    }
}

/// DecayTrace CSV: `t_us,p0[,sigma]`.
#[allow(clippy::needless_range_loop)]
pub fn decay_trace_to_csv(trace: &DecayTrace) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# format = {FORMAT_VERSION}");
    let _ = writeln!(out, "# kind = {}", trace.kind.label());
    counts_meta_lines(&mut out, &trace.counts_meta);
    match &trace.sigma {
        Some(sigma) => {
            let _ = writeln!(out, "t_us,p0,sigma");
            for i in 0..trace.len() {
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    fmt_shifted(trace.times[i], 6),
                    fmt_plain(trace.p0[i]),
                    fmt_plain(sigma[i])
                );
            }
        }
        None => {
            let _ = writeln!(out, "t_us,p0");
            for i in 0..trace.len() {
                let _ = writeln!(
                    out,
                    "{},{}",
                    fmt_shifted(trace.times[i], 6),
                    fmt_plain(trace.p0[i])
                );
            }
        }
    }
    out
}

pub fn decay_trace_from_csv(text: &str, path: &str) -> Result<DecayTrace> {
    let doc = CsvDocument::parse(text, path)?;
    let kind = match doc.meta("kind") {
        Some(label) => SequenceKind::parse(label)?,
        None => SequenceKind::Hahn,
    };
    let t_col = doc.require_column("t_us", path)?;
    let p_col = doc.require_column("p0", path)?;
    let s_col = doc.column("sigma");
    let mut times = Vec::with_capacity(doc.rows.len());
    let mut p0 = Vec::with_capacity(doc.rows.len());
    let mut sigma = Vec::with_capacity(doc.rows.len());
    for row in 0..doc.rows.len() {
        times.push(doc.f64_shifted_at(row, t_col, -6, path)?);
        p0.push(doc.f64_at(row, p_col, path)?);
        if let Some(c) = s_col {
            sigma.push(doc.f64_at(row, c, path)?);
        }
    }
    let mut trace = DecayTrace::new(kind, times, p0)?;
    if s_col.is_some() {
        trace = trace.with_sigma(sigma)?;
    }
    trace.counts_meta = parse_counts_meta(&doc, path)?;
    Ok(trace)
}

/// NmrSpectrum CSV: `freq_mhz,p0_norm[,sigma]`.
#[allow(clippy::needless_range_loop)]
pub fn nmr_spectrum_to_csv(spectrum: &NmrSpectrum) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# format = {FORMAT_VERSION}");
    let _ = writeln!(out, "# n_pulses = {}", spectrum.n_pulses);
    counts_meta_lines(&mut out, &spectrum.counts_meta);
    match &spectrum.sigma {
        Some(sigma) => {
            let _ = writeln!(out, "freq_mhz,p0_norm,sigma");
            for i in 0..spectrum.len() {
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    fmt_shifted(spectrum.freq_hz[i], -6),
                    fmt_plain(spectrum.p0_norm[i]),
                    fmt_plain(sigma[i])
                );
            }
        }
        None => {
            let _ = writeln!(out, "freq_mhz,p0_norm");
            for i in 0..spectrum.len() {
                let _ = writeln!(
                    out,
                    "{},{}",
                    fmt_shifted(spectrum.freq_hz[i], -6),
                    fmt_plain(spectrum.p0_norm[i])
                );
            }
        }
    }
    out
}

pub fn nmr_spectrum_from_csv(text: &str, path: &str) -> Result<NmrSpectrum> {
    let doc = CsvDocument::parse(text, path)?;
    let n_pulses = doc
        .meta_f64("n_pulses", path)?
        .map(|v| v as u32)
        .unwrap_or(1);
    let f_col = doc.require_column("freq_mhz", path)?;
    let p_col = doc.require_column("p0_norm", path)?;
    let s_col = doc.column("sigma");
    let mut freq = Vec::new();
    let mut p0_norm = Vec::new();
    let mut sigma = Vec::new();
    for row in 0..doc.rows.len() {
        freq.push(doc.f64_shifted_at(row, f_col, 6, path)?);
        p0_norm.push(doc.f64_at(row, p_col, path)?);
        if let Some(c) = s_col {
            sigma.push(doc.f64_at(row, c, path)?);
        }
    }
    let mut spectrum = NmrSpectrum::new(freq, p0_norm, n_pulses)?;
    if s_col.is_some() {
        spectrum.sigma = Some(sigma);
    }
    spectrum.counts_meta = parse_counts_meta(&doc, path)?;
    Ok(spectrum)
}

/// DepthProfile CSV: `depth_nm,count,density_cm3` with bookkeeping metadata.
/// Row depth is the bin center.
pub fn depth_profile_to_csv(profile: &DepthProfile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# format = {FORMAT_VERSION}");
    let _ = writeln!(out, "# bin_width_nm = {}", fmt_plain(profile.bin_width_nm));
    let _ = writeln!(out, "# n_ions = {}", profile.n_ions);
    let _ = writeln!(out, "# mask_stopped = {}", profile.mask_stopped);
    let _ = writeln!(out, "# reflected = {}", profile.reflected);
    let _ = writeln!(out, "# dose_cm2 = {}", fmt_plain(profile.dose_cm2));
    let _ = writeln!(out, "depth_nm,count,density_cm3");
    for (k, &count) in profile.counts.iter().enumerate() {
        let center = (k as f64 + 0.5) * profile.bin_width_nm;
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_plain(center),
            count,
            fmt_plain(profile.density_cm3[k])
        );
    }
    out
}

pub fn depth_profile_from_csv(text: &str, path: &str) -> Result<DepthProfile> {
    let doc = CsvDocument::parse(text, path)?;
    let bin_width_nm = doc.meta_f64("bin_width_nm", path)?.unwrap_or(1.0);
    let n_ions = doc.meta_f64("n_ions", path)?.unwrap_or(0.0) as u64;
    let mask_stopped = doc.meta_f64("mask_stopped", path)?.unwrap_or(0.0) as u64;
    let reflected = doc.meta_f64("reflected", path)?.unwrap_or(0.0) as u64;
    let dose_cm2 = doc.meta_f64("dose_cm2", path)?.unwrap_or(f64::NAN);
    let c_col = doc.require_column("count", path)?;
    let d_col = doc.require_column("density_cm3", path)?;
    let mut counts = Vec::new();
    let mut density = Vec::new();
    for row in 0..doc.rows.len() {
        counts.push(doc.f64_at(row, c_col, path)? as u64);
        density.push(doc.f64_at(row, d_col, path)?);
    }
    let profile = DepthProfile {
        bin_width_nm,
        counts,
        density_cm3: density,
        mask_stopped,
        reflected,
        n_ions,
        dose_cm2,
    };
    if !profile.is_conserved() {
        return Err(Error::Parse {
            path: path.to_string(),
            line: 0,
            detail: format!(
                "ion-count conservation violated: mask {} + reflected {} + binned {} != {}",
                profile.mask_stopped,
                profile.reflected,
                profile.in_substrate(),
                profile.n_ions
            ),
        });
    }
    Ok(profile)
}

/// Noise spectrum CSV: `omega_rad_s,s_dd_hz,s_e_v2m2hz,n_pulses,tau_us`.
pub fn noise_spectrum_to_csv(spectrum: &NoiseSpectrum) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# format = {FORMAT_VERSION}");
    let _ = writeln!(out, "# eps = {}", fmt_plain(spectrum.eps));
    let _ = writeln!(out, "omega_rad_s,s_dd_hz,s_e_v2m2hz,n_pulses,tau_us");
    for p in &spectrum.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_plain(p.omega),
            fmt_plain(p.s_dd),
            fmt_plain(p.s_e),
            p.n_pulses,
            fmt_shifted(p.tau, 6)
        );
    }
    out
}

pub fn noise_spectrum_from_csv(text: &str, path: &str) -> Result<NoiseSpectrum> {
    let doc = CsvDocument::parse(text, path)?;
    let eps = doc
        .meta_f64("eps", path)?
        .unwrap_or(crate::noise::DEFAULT_COHERENCE_EPS);
    let w_col = doc.require_column("omega_rad_s", path)?;
    let sdd_col = doc.require_column("s_dd_hz", path)?;
    let se_col = doc.require_column("s_e_v2m2hz", path)?;
    let n_col = doc.require_column("n_pulses", path)?;
    let tau_col = doc.require_column("tau_us", path)?;
    let mut points = Vec::new();
    for row in 0..doc.rows.len() {
        points.push(crate::noise::SpectrumPoint {
            omega: doc.f64_at(row, w_col, path)?,
            s_dd: doc.f64_at(row, sdd_col, path)?,
            s_e: doc.f64_at(row, se_col, path)?,
            sigma_s_dd: None,
            n_pulses: doc.f64_at(row, n_col, path)? as u32,
            tau: doc.f64_shifted_at(row, tau_col, -6, path)?,
            p0: f64::NAN,
        });
    }
    Ok(NoiseSpectrum { points, eps })
}

/// Dynamical-decoupling observations CSV: `n_pulses,tau_us,p0[,sigma]`.
pub fn dd_observations_from_csv(text: &str, path: &str) -> Result<Vec<DdObservation>> {
    let doc = CsvDocument::parse(text, path)?;
    let n_col = doc.require_column("n_pulses", path)?;
    let tau_col = doc.require_column("tau_us", path)?;
    let p_col = doc.require_column("p0", path)?;
    let s_col = doc.column("sigma");
    let mut obs = Vec::new();
    for row in 0..doc.rows.len() {
        obs.push(DdObservation {
            n_pulses: doc.f64_at(row, n_col, path)? as u32,
            tau: doc.f64_shifted_at(row, tau_col, -6, path)?,
            p0: doc.f64_at(row, p_col, path)?,
            sigma_p0: match s_col {
                Some(c) => Some(doc.f64_at(row, c, path)?),
                None => None,
            },
        });
    }
    Ok(obs)
}

pub fn dd_observations_to_csv(observations: &[DdObservation]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# format = {FORMAT_VERSION}");
    let with_sigma = observations.iter().any(|o| o.sigma_p0.is_some());
    if with_sigma {
        let _ = writeln!(out, "n_pulses,tau_us,p0,sigma");
    } else {
        let _ = writeln!(out, "n_pulses,tau_us,p0");
    }
    for o in observations {
        if with_sigma {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                o.n_pulses,
                fmt_shifted(o.tau, 6),
                fmt_plain(o.p0),
                fmt_plain(o.sigma_p0.unwrap_or(f64::NAN))
            );
        } else {
            let _ = writeln!(
                out,
                "{},{},{}",
                o.n_pulses,
                fmt_shifted(o.tau, 6),
                fmt_plain(o.p0)
            );
        }
    }
    out
}

/// DD scaling points CSV: `n,t2_us`.
pub fn dd_points_from_csv(text: &str, path: &str) -> Result<Vec<(f64, f64)>> {
    let doc = CsvDocument::parse(text, path)?;
    let n_col = doc.require_column("n", path)?;
    let t_col = doc.require_column("t2_us", path)?;
    let mut points = Vec::new();
    for row in 0..doc.rows.len() {
        points.push((
            doc.f64_at(row, n_col, path)?,
            doc.f64_shifted_at(row, t_col, -6, path)?,
        ));
    }
    Ok(points)
}

/// Accessibility bound CSV: `d_nm,t2_limit_us,t2_floor_us`.
pub fn accessible_region_to_csv(region: &AccessibleRegion) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# format = {FORMAT_VERSION}");
    let _ = writeln!(out, "# photon_n0 = {}", fmt_plain(region.photon.n0));
    let _ = writeln!(out, "# photon_c = {}", fmt_plain(region.photon.contrast_c));
    let _ = writeln!(out, "# rho_m3 = {}", fmt_plain(region.rho));
    let _ = writeln!(out, "d_nm,t2_limit_us,t2_floor_us");
    for (d, t2) in region.depths.iter().zip(&region.t2_limit) {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_shifted(*d, 9),
            fmt_shifted(*t2, 6),
            fmt_shifted(region.t2_floor, 6)
        );
    }
    out
}

/// Depth histogram CSV: `bin_center_nm,mass,mass_err,overlay_density`.
pub fn histogram_to_csv(histogram: &DepthHistogram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# format = {FORMAT_VERSION}");
    let _ = writeln!(out, "# mask_thickness_nm = {}", fmt_plain(histogram.mask_thickness_nm));
    let _ = writeln!(out, "# determined = {}", histogram.determined_count);
    let _ = writeln!(out, "# undetermined = {}", histogram.undetermined_count);
    let _ = writeln!(out, "bin_center_nm,mass,mass_err,overlay_density");
    for bin in &histogram.bins {
        let overlay = bin
            .overlay_density_cm3
            .map(fmt_plain)
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{overlay}",
            fmt_plain(bin.center_nm),
            fmt_plain(bin.mass),
            fmt_plain(bin.mass_err)
        );
    }
    out
}

/// NvRecord store: one JSON object per line.
pub fn nv_records_to_jsonl(records: &[NvRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn nv_records_from_jsonl(text: &str, path: &str) -> Result<Vec<NvRecord>> {
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let record: NvRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_string(),
            line: idx + 1,
            detail: e.to_string(),
        })?;
        record.validate()?;
        records.push(record);
    }
    Ok(records)
}

/// Run manifest: the fully resolved configuration (defaults included) plus a
/// single isolated timestamp field, so artifacts minus the timestamp are
/// byte-reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub format: String,
    /// The one non-reproducible field.
    pub created_unix_ms: u128,
    pub command: String,
    pub config: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> RunManifest {
        RunManifest {
            tool: "shallow-nv".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            format: FORMAT_VERSION.to_string(),
            created_unix_ms: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
            command: command.to_string(),
            config,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Sidecar the full implantation scenario next to a profile CSV.
pub fn write_profile_with_sidecar(
    path: &Path,
    profile: &DepthProfile,
    scenario: &IonTransportScenario,
) -> Result<()> {
    std::fs::write(path, depth_profile_to_csv(profile))?;
    let sidecar = sidecar_path(path);
    let mut text = serde_json::to_string_pretty(scenario)?;
    text.push('\n');
    std::fs::write(sidecar, text)?;
    Ok(())
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    std::path::PathBuf::from(os)
}
