//! Command-line pipeline. The binary is a thin wrapper around [`run`]; every
//! subcommand maps onto one library operation, writes its artifacts plus a
//! manifest echoing the fully resolved configuration, and reports failures as
//! machine-readable JSON on stderr.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::constants::{proton_larmor, FieldConfig, PhotonModel, CONSTANTS};
use crate::error::{Error, Result};
use crate::fit::{
    accessible_region, fit_dd_scaling, fit_decay, fit_deer, fit_nmr_depth, is_accessible,
    GuessPolicy, NmrFixedParams,
};
use crate::implant::{material::MaterialDb, standard_stack_with, transport, IonTransportScenario};
use crate::io;
use crate::models::{
    instantaneous_diffusion_rate, ContrastTerm, DecayModel, DeerModel, NmrDipModel,
};
use crate::noise::{lorentzian_fit, rates_from_t1, rates_to_psd, spectral_decomposition};
use crate::records::SequenceKind;
use crate::synth::{synthesize_nmr_spectrum, synthesize_trace, tau_grid_around_resonance, SignalModel};

/// Environment variable naming a default material database JSON file.
pub const MATERIAL_DB_ENV: &str = "SHALLOW_NV_MATERIALS";

#[derive(Parser, Debug)]
#[command(
    name = "shallow-nv",
    version,
    about = "Near-surface NV toolkit: implantation profiles, coherence forward models, and inverse fits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo N+ implantation through a screening mask.
    Implant(ImplantArgs),
    /// Generate synthetic measurements with photon shot noise.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Least-squares fits of measured or synthetic data.
    #[command(subcommand)]
    Fit(FitCommand),
    /// Noise spectroscopy: spectral decomposition and Lorentzian fits.
    #[command(subcommand)]
    Noise(NoiseCommand),
    /// Relaxation-rate algebra (SQ/DQ channels).
    #[command(subcommand)]
    Relax(RelaxCommand),
    /// Detectability bound in the (T2, depth) plane.
    #[command(subcommand)]
    Bound(BoundCommand),
    /// Population-level analysis: yields and depth histograms.
    #[command(subcommand)]
    Profile(ProfileCommand),
    /// DEER defect-density estimation.
    #[command(subcommand)]
    Deer(DeerCommand),
}

#[derive(Args, Debug)]
struct ImplantArgs {
    /// Acceleration energy, keV.
    #[arg(long, default_value_t = 10.0)]
    energy_kev: f64,
    /// SiO2 mask thickness, nm.
    #[arg(long)]
    mask_nm: f64,
    /// Areal dose, cm^-2.
    #[arg(long, default_value_t = 1e11)]
    dose_cm2: f64,
    /// Number of simulated ions.
    #[arg(long, default_value_t = 200_000)]
    ions: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Projectile atomic number.
    #[arg(long, default_value_t = 7.0)]
    ion_z: f64,
    /// Projectile mass, u.
    #[arg(long, default_value_t = 14.003074)]
    ion_mass: f64,
    /// Incidence angle from the surface normal, degrees.
    #[arg(long, default_value_t = 0.0)]
    incidence_deg: f64,
    /// Histogram bin width, nm.
    #[arg(long, default_value_t = 1.0)]
    bin_nm: f64,
    /// SiO2 mass density, g/cm^3 (ignored when a material database supplies
    /// the mask material).
    #[arg(long, default_value_t = 2.2)]
    sio2_density: f64,
    /// Mask material label from the database.
    #[arg(long, default_value = "sio2")]
    mask_material: String,
    /// Substrate material label from the database.
    #[arg(long, default_value = "diamond")]
    substrate: String,
    /// Material database JSON (defaults to $SHALLOW_NV_MATERIALS).
    #[arg(long)]
    material_db: Option<PathBuf>,
    /// Worker threads for the transport (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Output CSV path; a `<out>.json` scenario sidecar is written too.
    #[arg(long)]
    out: PathBuf,
    /// Manifest path (default `<out>.manifest.json`).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum SynthCommand {
    /// Synthesize a coherence decay trace.
    Decay(SynthDecayArgs),
    /// Synthesize a proton NMR spectrum.
    Nmr(SynthNmrArgs),
}

#[derive(Args, Debug)]
struct SynthDecayArgs {
    /// Sequence kind: hahn, xy8-8, xy16-128, deer, relax-sq, relax-dq.
    #[arg(long, default_value = "hahn")]
    kind: String,
    /// Coherence time (required for all kinds except relax-*).
    #[arg(long)]
    t2_us: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// DEER decay time (only for --kind deer).
    #[arg(long)]
    deer_t2_us: Option<f64>,
    /// DEER stretch exponent.
    #[arg(long, default_value_t = 1.0)]
    deer_q: f64,
    /// Relaxation time for relax-sq/relax-dq kinds, ms.
    #[arg(long)]
    t1_ms: Option<f64>,
    /// Last point of the schedule, us.
    #[arg(long)]
    t_max_us: f64,
    #[arg(long, default_value_t = 30)]
    points: usize,
    #[arg(long, default_value_t = 5e5)]
    n0: f64,
    #[arg(long, default_value_t = 0.2)]
    contrast: f64,
    #[arg(long, default_value_t = 1)]
    shots: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthNmrArgs {
    /// NV depth, nm.
    #[arg(long)]
    d_nm: f64,
    /// Static field, mT.
    #[arg(long)]
    b0_mt: f64,
    /// Analyte proton density, m^-3.
    #[arg(long, default_value_t = 6e28)]
    rho: f64,
    /// Number of pi pulses.
    #[arg(long)]
    n: u32,
    #[arg(long)]
    t2_us: f64,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// Half-span of the tau grid around resonance (fractional).
    #[arg(long, default_value_t = 0.03)]
    span: f64,
    #[arg(long, default_value_t = 81)]
    points: usize,
    #[arg(long, default_value_t = 5e5)]
    n0: f64,
    #[arg(long, default_value_t = 0.2)]
    contrast: f64,
    #[arg(long, default_value_t = 8)]
    shots: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum FitCommand {
    /// Fit (T2, p) of a coherence decay.
    Decay(FitDecayArgs),
    /// Fit the NV depth from an NMR spectrum.
    Nmr(FitNmrArgs),
    /// Fit the decoupling scaling law to (N, T2) points.
    Dd(FitDdArgs),
    /// Fit a DEER decay with frozen echo parameters.
    Deer(FitDeerArgs),
}

#[derive(Args, Debug)]
struct FitDecayArgs {
    /// Input trace CSV (t_us,p0[,sigma]).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    guess_t2_us: Option<f64>,
    #[arg(long)]
    guess_p: Option<f64>,
    /// Report JSON path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitNmrArgs {
    /// Input spectrum CSV (freq_mhz,p0_norm[,sigma]).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    b0_mt: f64,
    #[arg(long, default_value_t = 6e28)]
    rho: f64,
    /// Number of pi pulses (defaults to the value recorded in the CSV).
    #[arg(long)]
    n: Option<u32>,
    /// Frozen echo T2, us.
    #[arg(long)]
    t2_us: f64,
    /// Frozen stretch exponent.
    #[arg(long)]
    p: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitDdArgs {
    /// Input points CSV (n,t2_us).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitDeerArgs {
    /// Input trace CSV (t_us,p0[,sigma]).
    #[arg(long = "in")]
    input: PathBuf,
    /// Frozen echo T2, us.
    #[arg(long)]
    t2_us: f64,
    /// Frozen echo stretch exponent.
    #[arg(long)]
    p: f64,
    /// Drive flip angle in units of pi.
    #[arg(long, default_value_t = 1.0)]
    beta_pi: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum NoiseCommand {
    /// Spectral decomposition of decoupling observations.
    Spectrum(NoiseSpectrumArgs),
    /// Lorentzian fit of an extracted spectrum.
    Lorentz(NoiseLorentzArgs),
}

#[derive(Args, Debug)]
struct NoiseSpectrumArgs {
    /// Input observations CSV (n_pulses,tau_us,p0[,sigma]).
    #[arg(long = "in")]
    input: PathBuf,
    /// Coherence filter width.
    #[arg(long, default_value_t = 0.02)]
    eps: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct NoiseLorentzArgs {
    /// Input spectrum CSV (omega_rad_s,s_dd_hz,...).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum RelaxCommand {
    /// Rates (Omega, gamma) from the two relaxation times, with PSD points.
    Rates(RelaxRatesArgs),
}

#[derive(Args, Debug)]
struct RelaxRatesArgs {
    #[arg(long)]
    t1sq_ms: f64,
    #[arg(long)]
    t1dq_ms: f64,
    /// Static field for nominal probe frequencies, mT.
    #[arg(long)]
    b0_mt: Option<f64>,
    /// Measured SQ transition frequency, MHz (overrides the nominal value).
    #[arg(long)]
    f_sq_mhz: Option<f64>,
    /// Measured DQ separation, MHz.
    #[arg(long)]
    f_dq_mhz: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum BoundCommand {
    /// Emit the T2-limit curve over a depth grid.
    Accessible(BoundAccessibleArgs),
    /// Classify one (T2, depth) point.
    Classify(BoundClassifyArgs),
}

#[derive(Args, Debug)]
struct BoundAccessibleArgs {
    /// Readout contrast c.
    #[arg(long, default_value_t = 0.2)]
    c: f64,
    /// Accumulated photon counts n0.
    #[arg(long, default_value_t = 5e5)]
    n0: f64,
    #[arg(long, default_value_t = 6e28)]
    rho: f64,
    #[arg(long, default_value_t = 2.0)]
    d_min_nm: f64,
    #[arg(long, default_value_t = 60.0)]
    d_max_nm: f64,
    #[arg(long, default_value_t = 117)]
    steps: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BoundClassifyArgs {
    #[arg(long, default_value_t = 0.2)]
    c: f64,
    #[arg(long, default_value_t = 5e5)]
    n0: f64,
    #[arg(long, default_value_t = 6e28)]
    rho: f64,
    #[arg(long)]
    t2_us: f64,
    #[arg(long)]
    d_nm: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum ProfileCommand {
    /// N+-to-NV conversion yield.
    Yield(ProfileYieldArgs),
    /// Assemble the depth histogram of one mask-thickness group.
    Hist(ProfileHistArgs),
}

#[derive(Args, Debug)]
struct ProfileYieldArgs {
    /// NV areal density, cm^-2.
    #[arg(long)]
    nv_cm2: f64,
    /// Implanted N+ areal density, cm^-2.
    #[arg(long)]
    implanted_cm2: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ProfileHistArgs {
    /// NvRecord JSONL store.
    #[arg(long)]
    records: PathBuf,
    /// Mask-thickness group to assemble, nm.
    #[arg(long)]
    t_nm: f64,
    /// Group yield used for the Monte Carlo overlay.
    #[arg(long, default_value_t = 1e-3)]
    yield_fraction: f64,
    /// Depth-profile CSV for the overlay.
    #[arg(long)]
    mc: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum DeerCommand {
    /// Invert the instantaneous-diffusion relation for the defect density.
    Invert(DeerInvertArgs),
    /// Fit a DEER trace (same as `fit deer`).
    Fit(FitDeerArgs),
}

#[derive(Args, Debug)]
struct DeerInvertArgs {
    /// Instantaneous diffusion time, us.
    #[arg(long)]
    tid_us: f64,
    /// Drive flip angle in units of pi.
    #[arg(long, default_value_t = 1.0)]
    beta_pi: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parse argv and execute; returns the process exit code and prints a
/// machine-readable error JSON on stderr for failures.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version through this path too.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let payload = json!({ "error": e.code(), "message": e.to_string() });
            eprintln!("{payload}");
            1
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Implant(args) => cmd_implant(args),
        Command::Synth(SynthCommand::Decay(args)) => cmd_synth_decay(args),
        Command::Synth(SynthCommand::Nmr(args)) => cmd_synth_nmr(args),
        Command::Fit(FitCommand::Decay(args)) => cmd_fit_decay(args),
        Command::Fit(FitCommand::Nmr(args)) => cmd_fit_nmr(args),
        Command::Fit(FitCommand::Dd(args)) => cmd_fit_dd(args),
        Command::Fit(FitCommand::Deer(args)) | Command::Deer(DeerCommand::Fit(args)) => {
            cmd_fit_deer(args)
        }
        Command::Noise(NoiseCommand::Spectrum(args)) => cmd_noise_spectrum(args),
        Command::Noise(NoiseCommand::Lorentz(args)) => cmd_noise_lorentz(args),
        Command::Relax(RelaxCommand::Rates(args)) => cmd_relax_rates(args),
        Command::Bound(BoundCommand::Accessible(args)) => cmd_bound_accessible(args),
        Command::Bound(BoundCommand::Classify(args)) => cmd_bound_classify(args),
        Command::Profile(ProfileCommand::Yield(args)) => cmd_profile_yield(args),
        Command::Profile(ProfileCommand::Hist(args)) => cmd_profile_hist(args),
        Command::Deer(DeerCommand::Invert(args)) => cmd_deer_invert(args),
    }
}

fn manifest_path(out: &Path, explicit: &Option<PathBuf>) -> PathBuf {
    explicit.clone().unwrap_or_else(|| {
        let mut os = out.as_os_str().to_owned();
        os.push(".manifest.json");
        PathBuf::from(os)
    })
}

fn emit_report(out: &Option<PathBuf>, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn material_db(explicit: &Option<PathBuf>) -> Result<MaterialDb> {
    let path = explicit
        .clone()
        .or_else(|| std::env::var_os(MATERIAL_DB_ENV).map(PathBuf::from));
    match path {
        Some(p) => MaterialDb::with_file(&p),
        None => Ok(MaterialDb::default()),
    }
}

fn cmd_implant(args: ImplantArgs) -> Result<()> {
    let scenario = IonTransportScenario {
        ion_z: args.ion_z,
        ion_mass: args.ion_mass,
        energy_kev: args.energy_kev,
        mask_thickness_nm: args.mask_nm,
        dose_cm2: args.dose_cm2,
        n_ions: args.ions,
        seed: args.seed,
        incidence_rad: args.incidence_deg.to_radians(),
        bin_width_nm: args.bin_nm,
    };
    let db = material_db(&args.material_db)?;
    let layers = if args.mask_material == "sio2"
        && args.substrate == "diamond"
        && args.material_db.is_none()
        && std::env::var_os(MATERIAL_DB_ENV).is_none()
    {
        standard_stack_with(&scenario, args.sio2_density)
    } else {
        let mut layers = Vec::new();
        if scenario.mask_thickness_nm > 0.0 {
            layers.push(
                db.get(&args.mask_material)?
                    .with_thickness(Some(scenario.mask_thickness_nm)),
            );
        }
        layers.push(db.get(&args.substrate)?.with_thickness(None));
        layers
    };

    let profile = if args.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(args.workers)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?
            .install(|| transport(&scenario, &layers))?
    } else {
        transport(&scenario, &layers)?
    };

    io::write_profile_with_sidecar(&args.out, &profile, &scenario)?;
    let config = json!({
        "scenario": scenario,
        "layers": layers,
        "workers": args.workers,
        "out": args.out,
    });
    io::RunManifest::new("implant", config).write(&manifest_path(&args.out, &args.manifest))?;
    Ok(())
}

fn photon(n0: f64, contrast: f64) -> Result<PhotonModel> {
    PhotonModel::new(n0, contrast)
}

fn require_t2(args: &SynthDecayArgs) -> Result<f64> {
    args.t2_us
        .map(|v| v * 1e-6)
        .ok_or_else(|| Error::InvalidParameter("--t2-us is required for this kind".to_string()))
}

fn cmd_synth_decay(args: SynthDecayArgs) -> Result<()> {
    let kind = SequenceKind::parse(&args.kind)?;
    let schedule: Vec<f64> = (1..=args.points)
        .map(|i| args.t_max_us * 1e-6 * i as f64 / args.points as f64)
        .collect();
    let truth = match kind {
        SequenceKind::RelaxSq => SignalModel::Relaxation {
            channel: crate::models::RelaxationChannel::Sq,
            t1: args.t1_ms.ok_or_else(|| {
                Error::InvalidParameter("--t1-ms is required for relax kinds".to_string())
            })? * 1e-3,
        },
        SequenceKind::RelaxDq => SignalModel::Relaxation {
            channel: crate::models::RelaxationChannel::Dq,
            t1: args.t1_ms.ok_or_else(|| {
                Error::InvalidParameter("--t1-ms is required for relax kinds".to_string())
            })? * 1e-3,
        },
        SequenceKind::Deer => {
            let t2_deer = args.deer_t2_us.ok_or_else(|| {
                Error::InvalidParameter("--deer-t2-us is required for --kind deer".to_string())
            })? * 1e-6;
            let deer = DeerModel::new(t2_deer, args.deer_q, std::f64::consts::PI)?;
            SignalModel::Decay {
                kind,
                model: DecayModel::new(require_t2(&args)?, args.p, ContrastTerm::Deer(deer))?,
            }
        }
        _ => SignalModel::Decay {
            kind,
            model: DecayModel::echo(require_t2(&args)?, args.p)?,
        },
    };
    let trace = synthesize_trace(
        &truth,
        &CONSTANTS,
        &schedule,
        &photon(args.n0, args.contrast)?,
        args.shots,
        args.seed,
    )?;
    std::fs::write(&args.out, io::decay_trace_to_csv(&trace))?;
    let config = json!({
        "kind": args.kind, "t2_us": args.t2_us, "p": args.p,
        "deer_t2_us": args.deer_t2_us, "deer_q": args.deer_q, "t1_ms": args.t1_ms,
        "t_max_us": args.t_max_us, "points": args.points,
        "n0": args.n0, "contrast": args.contrast, "shots": args.shots, "seed": args.seed,
        "out": args.out,
    });
    io::RunManifest::new("synth decay", config)
        .write(&manifest_path(&args.out, &args.manifest))?;
    Ok(())
}

fn cmd_synth_nmr(args: SynthNmrArgs) -> Result<()> {
    let field = FieldConfig::new(&CONSTANTS, args.b0_mt * 1e-3)?;
    let dip = NmrDipModel::new(args.d_nm * 1e-9, args.rho, args.n)?;
    let decay = DecayModel::echo(args.t2_us * 1e-6, args.p)?;
    let grid = tau_grid_around_resonance(field.omega_n, args.span, args.points);
    let spectrum = synthesize_nmr_spectrum(
        &dip,
        &decay,
        &CONSTANTS,
        field.omega_n,
        &grid,
        &photon(args.n0, args.contrast)?,
        args.shots,
        args.seed,
    )?;
    std::fs::write(&args.out, io::nmr_spectrum_to_csv(&spectrum))?;
    let config = json!({
        "d_nm": args.d_nm, "b0_mt": args.b0_mt, "rho": args.rho, "n": args.n,
        "t2_us": args.t2_us, "p": args.p, "span": args.span, "points": args.points,
        "n0": args.n0, "contrast": args.contrast, "shots": args.shots, "seed": args.seed,
        "out": args.out,
    });
    io::RunManifest::new("synth nmr", config).write(&manifest_path(&args.out, &args.manifest))?;
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

fn cmd_fit_decay(args: FitDecayArgs) -> Result<()> {
    let trace = io::decay_trace_from_csv(&read_to_string(&args.input)?, &args.input.to_string_lossy())?;
    let policy = match (args.guess_t2_us, args.guess_p) {
        (Some(t2), p) => GuessPolicy::Explicit { t2: t2 * 1e-6, p: p.unwrap_or(1.0) },
        _ => GuessPolicy::Auto,
    };
    let fit = fit_decay(&trace, policy)?;
    emit_report(&args.out, &serde_json::to_value(&fit)?)
}

fn cmd_fit_nmr(args: FitNmrArgs) -> Result<()> {
    let spectrum =
        io::nmr_spectrum_from_csv(&read_to_string(&args.input)?, &args.input.to_string_lossy())?;
    let fixed = NmrFixedParams {
        n_pulses: args.n.unwrap_or(spectrum.n_pulses),
        b0: args.b0_mt * 1e-3,
        rho: args.rho,
        t2: args.t2_us * 1e-6,
        p: args.p,
    };
    let fit = fit_nmr_depth(&spectrum, &fixed, &CONSTANTS)?;
    let d_nm = fit.get("d_nv").map(|d| d * 1e9);
    let mut value = serde_json::to_value(&fit)?;
    if let (Some(obj), Some(d)) = (value.as_object_mut(), d_nm) {
        obj.insert("d_nv_nm".to_string(), json!(d));
    }
    emit_report(&args.out, &value)
}

fn cmd_fit_dd(args: FitDdArgs) -> Result<()> {
    let points =
        io::dd_points_from_csv(&read_to_string(&args.input)?, &args.input.to_string_lossy())?;
    let fit = fit_dd_scaling(&points)?;
    emit_report(&args.out, &serde_json::to_value(&fit)?)
}

fn cmd_fit_deer(args: FitDeerArgs) -> Result<()> {
    let trace =
        io::decay_trace_from_csv(&read_to_string(&args.input)?, &args.input.to_string_lossy())?;
    let result = fit_deer(
        &trace,
        args.t2_us * 1e-6,
        args.p,
        args.beta_pi * std::f64::consts::PI,
        &CONSTANTS,
    )?;
    let mut value = serde_json::to_value(&result)?;
    if let Some(obj) = value.as_object_mut() {
        obj.insert("n_d_cm3".to_string(), json!(result.n_d * 1e-6));
    }
    emit_report(&args.out, &value)
}

fn cmd_noise_spectrum(args: NoiseSpectrumArgs) -> Result<()> {
    let observations =
        io::dd_observations_from_csv(&read_to_string(&args.input)?, &args.input.to_string_lossy())?;
    let spectrum = spectral_decomposition(&observations, &CONSTANTS, Some(args.eps))?;
    std::fs::write(&args.out, io::noise_spectrum_to_csv(&spectrum))?;
    let config = json!({
        "in": args.input, "eps": args.eps, "out": args.out,
        "points_in": observations.len(), "points_kept": spectrum.points.len(),
    });
    io::RunManifest::new("noise spectrum", config)
        .write(&manifest_path(&args.out, &args.manifest))?;
    Ok(())
}

fn cmd_noise_lorentz(args: NoiseLorentzArgs) -> Result<()> {
    let spectrum =
        io::noise_spectrum_from_csv(&read_to_string(&args.input)?, &args.input.to_string_lossy())?;
    let (noise, fit) = lorentzian_fit(&spectrum)?;
    let value = json!({
        "lorentzian": noise,
        "tau_c_ns": noise.tau_c * 1e9,
        "fit": fit,
    });
    emit_report(&args.out, &value)
}

fn cmd_relax_rates(args: RelaxRatesArgs) -> Result<()> {
    let rates = rates_from_t1(args.t1sq_ms * 1e-3, args.t1dq_ms * 1e-3)?;
    let probes = match (args.f_sq_mhz, args.f_dq_mhz, args.b0_mt) {
        (Some(sq), Some(dq), _) => Some((sq * 1e6, dq * 1e6)),
        (_, _, Some(b0)) => {
            let field = FieldConfig::new(&CONSTANTS, b0 * 1e-3)?
                .with_measured(args.f_sq_mhz.map(|v| v * 1e6), args.f_dq_mhz.map(|v| v * 1e6));
            Some(field.probe_frequencies(&CONSTANTS)?)
        }
        _ => None,
    };
    let mut value = json!({
        "omega_hz": rates.omega_rate,
        "gamma_hz": rates.gamma_rate,
        "t1_sq_ms": rates.t1_sq * 1e3,
        "t1_dq_ms": rates.t1_dq * 1e3,
    });
    if let Some((f_sq, f_dq)) = probes {
        let (sq, dq) = rates_to_psd(&rates, &CONSTANTS, f_sq, f_dq);
        value.as_object_mut().unwrap().insert(
            "psd".to_string(),
            json!({
                "sq": { "freq_mhz": sq.freq_hz * 1e-6, "s_e_v2m2hz": sq.s_e },
                "dq": { "freq_mhz": dq.freq_hz * 1e-6, "s_e_v2m2hz": dq.s_e },
            }),
        );
    }
    emit_report(&args.out, &value)
}

fn cmd_bound_accessible(args: BoundAccessibleArgs) -> Result<()> {
    let photon = photon(args.n0, args.c)?;
    let steps = args.steps.max(2);
    let grid: Vec<f64> = (0..steps)
        .map(|i| {
            (args.d_min_nm + (args.d_max_nm - args.d_min_nm) * i as f64 / (steps - 1) as f64)
                * 1e-9
        })
        .collect();
    let region = accessible_region(&photon, args.rho, &grid, &CONSTANTS)?;
    std::fs::write(&args.out, io::accessible_region_to_csv(&region))?;
    let config = json!({
        "c": args.c, "n0": args.n0, "rho": args.rho,
        "d_min_nm": args.d_min_nm, "d_max_nm": args.d_max_nm, "steps": steps,
        "t2_floor_us": region.t2_floor * 1e6,
        "out": args.out,
    });
    io::RunManifest::new("bound accessible", config)
        .write(&manifest_path(&args.out, &args.manifest))?;
    Ok(())
}

fn cmd_bound_classify(args: BoundClassifyArgs) -> Result<()> {
    let photon = photon(args.n0, args.c)?;
    let accessible =
        is_accessible(&photon, args.rho, args.t2_us * 1e-6, args.d_nm * 1e-9, &CONSTANTS)?;
    let limit = crate::fit::t2_limit(&photon, args.rho, args.d_nm * 1e-9, &CONSTANTS)?;
    emit_report(
        &args.out,
        &json!({
            "accessible": accessible,
            "t2_us": args.t2_us,
            "d_nm": args.d_nm,
            "t2_limit_us": limit * 1e6,
            "t2_floor_us": crate::fit::T2_FLOOR * 1e6,
        }),
    )
}

fn cmd_profile_yield(args: ProfileYieldArgs) -> Result<()> {
    let y = crate::assembly::conversion_yield(args.nv_cm2, args.implanted_cm2)?;
    emit_report(
        &args.out,
        &json!({
            "yield_fraction": y,
            "yield_percent": 100.0 * y,
            "nv_cm2": args.nv_cm2,
            "implanted_cm2": args.implanted_cm2,
        }),
    )
}

fn cmd_profile_hist(args: ProfileHistArgs) -> Result<()> {
    let records = io::nv_records_from_jsonl(
        &read_to_string(&args.records)?,
        &args.records.to_string_lossy(),
    )?;
    let mc = match &args.mc {
        Some(path) => Some(io::depth_profile_from_csv(
            &read_to_string(path)?,
            &path.to_string_lossy(),
        )?),
        None => None,
    };
    let hist = crate::assembly::assemble_histogram(
        &records,
        args.t_nm,
        args.yield_fraction,
        mc.as_ref(),
    )?;
    std::fs::write(&args.out, io::histogram_to_csv(&hist))?;
    let config = json!({
        "records": args.records, "t_nm": args.t_nm, "yield": args.yield_fraction,
        "mc": args.mc, "out": args.out,
        "determined": hist.determined_count, "undetermined": hist.undetermined_count,
    });
    io::RunManifest::new("profile hist", config)
        .write(&manifest_path(&args.out, &args.manifest))?;
    Ok(())
}

fn cmd_deer_invert(args: DeerInvertArgs) -> Result<()> {
    let beta = args.beta_pi * std::f64::consts::PI;
    let unit = instantaneous_diffusion_rate(1.0, beta, &CONSTANTS)?;
    if unit == 0.0 {
        return Err(Error::InvalidParameter(
            "n_d undefined at beta = 0: sin^2(beta/2) = 0".to_string(),
        ));
    }
    if !(args.tid_us > 0.0) {
        return Err(Error::InvalidParameter("tid must be > 0".to_string()));
    }
    let n_d = 1.0 / (args.tid_us * 1e-6 * unit);
    emit_report(
        &args.out,
        &json!({
            "tid_us": args.tid_us,
            "beta_rad": beta,
            "n_d_m3": n_d,
            "n_d_cm3": n_d * 1e-6,
        }),
    )
}

/// Proton Larmor helper used by the examples and docs.
pub fn larmor_mhz(b0_mt: f64) -> Result<f64> {
    Ok(proton_larmor(&CONSTANTS, b0_mt * 1e-3)? * 1e-6)
}
