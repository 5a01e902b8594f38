//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured values (run with `--nocapture` to see them).
//!
//! Run in release mode: `cargo test --release --test acceptance`.

// Frozen oracle constants keep every digit of the high-precision evaluation.
#![allow(clippy::excessive_precision)]

use std::time::Instant;

use shallow_nv::assembly::{assemble_histogram, NvRecord};
use shallow_nv::constants::{proton_larmor, PhotonModel, CONSTANTS};
use shallow_nv::fit::lm::{verify_jacobian, LmModel};
use shallow_nv::fit::models::{DdScalingCurve, DeerCurve, NmrDepthCurve, StretchedDecayCurve};
use shallow_nv::fit::{
    fit_dd_scaling, fit_decay, fit_deer, fit_nmr_depth, is_accessible, t2_limit, GuessPolicy,
    NmrFixedParams, T2_FLOOR,
};
use shallow_nv::implant::{standard_stack, stopped_fraction, transport, IonTransportScenario};
use shallow_nv::models::{
    dd_t2, decay_curve, instantaneous_diffusion_rate, ContrastTerm, DdScalingModel, DecayModel,
    DeerModel, NmrDipModel,
};
use shallow_nv::noise::{rates_from_t1, rates_to_psd, RelaxationRates};
use shallow_nv::records::{DecayTrace, NmrSpectrum, SequenceKind};
use shallow_nv::synth::{
    synthesize_nmr_spectrum, synthesize_trace, tau_grid_around_resonance, SignalModel,
};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn criterion_01_relaxation_algebra() {
    let start = Instant::now();
    let rates = rates_from_t1(1.06e-3, 1.16e-3).unwrap();
    let elapsed = start.elapsed();
    assert!(rel(rates.omega_rate, 316.0) < 0.01, "Omega = {}", rates.omega_rate);
    assert!(rel(rates.gamma_rate, 272.0) < 0.01, "gamma = {}", rates.gamma_rate);
    assert!(elapsed.as_secs_f64() < 1.0);
    println!(
        "PASS criterion 1: Omega = {:.2} Hz (316 +- 1%), gamma = {:.2} Hz (272 +- 1%), {:?}",
        rates.omega_rate, rates.gamma_rate, elapsed
    );
}

#[test]
fn criterion_02_psd_conversion() {
    let start = Instant::now();
    // From the paper's rounded rates.
    let rounded = RelaxationRates {
        omega_rate: 316.0,
        gamma_rate: 272.0,
        t1_sq: 1.0 / (3.0 * 316.0),
        t1_dq: 1.0 / (316.0 + 2.0 * 272.0),
    };
    let (sq, dq) = rates_to_psd(&rounded, &CONSTANTS, 2218.2e6, 1301.5e6);
    assert!(rel(sq.s_e, 5.16e7) < 0.01, "sq = {}", sq.s_e);
    assert!(rel(dq.s_e, 9.41e3) < 0.01, "dq = {}", dq.s_e);
    // And chained from the raw relaxation times.
    let rates = rates_from_t1(1.06e-3, 1.16e-3).unwrap();
    let (sq2, dq2) = rates_to_psd(&rates, &CONSTANTS, 2218.2e6, 1301.5e6);
    assert!(rel(sq2.s_e, 5.16e7) < 0.01, "chained sq = {}", sq2.s_e);
    assert!(rel(dq2.s_e, 9.41e3) < 0.01, "chained dq = {}", dq2.s_e);
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0);
    println!(
        "PASS criterion 2: 2 Omega/d_par^2 = {:.3e} (5.16e7 +- 1%), gamma/d_perp^2 = {:.3e} (9.41e3 +- 1%), {:?}",
        sq.s_e, dq.s_e, elapsed
    );
}

#[test]
fn criterion_03_nmr_resonance_position() {
    let b0 = 23.2e-3;
    let omega_n = CONSTANTS.gamma_h * b0;
    let tau_res = std::f64::consts::PI / omega_n;
    assert!(
        (tau_res - 506.2e-9).abs() < 0.1e-9,
        "tau_res = {} ns",
        tau_res * 1e9
    );

    let dip = NmrDipModel::new(17.4e-9, 6e28, 128).unwrap();
    let decay = DecayModel::echo(27.1e-6, 0.98).unwrap();
    let photon = PhotonModel::new(5e5, 0.2).unwrap();
    let grid = tau_grid_around_resonance(omega_n, 0.03, 161);
    let spectrum = synthesize_nmr_spectrum(
        &dip, &decay, &CONSTANTS, omega_n, &grid, &photon, 100_000, 3,
    )
    .unwrap();
    let dip_freq = spectrum
        .p0_norm
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| spectrum.freq_hz[i])
        .unwrap();
    assert!(
        (dip_freq - 0.988e6).abs() < 0.001e6,
        "dip at {} MHz",
        dip_freq * 1e-6
    );
    let f_n = proton_larmor(&CONSTANTS, b0).unwrap();
    println!(
        "PASS criterion 3: dip at {:.4} MHz (0.988 +- 0.001; Larmor {:.4}), tau_res = {:.2} ns (506.2 +- 0.1)",
        dip_freq * 1e-6,
        f_n * 1e-6,
        tau_res * 1e9
    );
}

#[test]
fn criterion_04_depth_round_trip() {
    let fixed = NmrFixedParams {
        n_pulses: 128,
        b0: 23.2e-3,
        rho: 6e28,
        t2: 27.1e-6,
        p: 0.98,
    };
    let omega_n = CONSTANTS.gamma_h * fixed.b0;
    let decay = DecayModel::echo(fixed.t2, fixed.p).unwrap();
    let photon = PhotonModel::new(5e5, 0.2).unwrap();
    let dip = NmrDipModel::new(17.4e-9, fixed.rho, fixed.n_pulses).unwrap();
    let grid = tau_grid_around_resonance(omega_n, 0.03, 81);

    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let spectrum = synthesize_nmr_spectrum(
            &dip, &decay, &CONSTANTS, omega_n, &grid, &photon, 8, seed,
        )
        .unwrap();
        let fit = fit_nmr_depth(&spectrum, &fixed, &CONSTANTS).unwrap();
        let d = fit.get("d_nv").unwrap();
        worst = worst.max(rel(d, 17.4e-9));
        assert!(
            rel(d, 17.4e-9) < 0.05,
            "seed {seed}: d = {} nm",
            d * 1e9
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "PASS criterion 4: 20 seeds recover 17.4 nm within 5% (worst {:.2}%), total {:?} (< 10 s)",
        100.0 * worst,
        elapsed
    );
}

#[test]
fn criterion_05_scaling_fit_consistency() {
    let truth = DdScalingModel::new(27.0e-6, 105.2, 0.10).unwrap();
    let t2_inf = truth.t2_inf();
    assert!((t2_inf - 43.0e-6).abs() < 0.5e-6, "T2_inf = {} us", t2_inf * 1e6);

    let points: Vec<(f64, f64)> = [1.0f64, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0]
        .iter()
        .map(|&n| (n, dd_t2(&truth, n)))
        .collect();
    let fit = fit_dd_scaling(&points).unwrap();
    let errs = [
        rel(fit.get("n_sat").unwrap(), 105.2),
        rel(fit.get("s").unwrap(), 0.10),
        rel(fit.get("t2_1").unwrap(), 27.0e-6),
    ];
    for (name, err) in ["n_sat", "s", "t2_1"].iter().zip(errs) {
        assert!(err < 1e-4, "{name} off by {err:.2e}");
    }
    println!(
        "PASS criterion 5: T2_inf = {:.2} us (43.0 +- 0.5); noiseless recovery errors {:.1e}/{:.1e}/{:.1e} (< 1e-4)",
        t2_inf * 1e6,
        errs[0],
        errs[1],
        errs[2]
    );
}

#[test]
fn criterion_06_accessibility_bound() {
    let photon = PhotonModel::new(5e5, 0.2).unwrap();
    let limit = t2_limit(&photon, 6e28, 17.4e-9, &CONSTANTS).unwrap();
    // Frozen value from an independent arbitrary-precision (40-digit)
    // evaluation of the B_rms and S/N = 1 formulas.
    let oracle = 1.722_204_965_082_513_1e-5;
    assert!(rel(limit, oracle) < 1e-6, "limit = {limit}");
    assert!(is_accessible(&photon, 6e28, 27.1e-6, 17.4e-9, &CONSTANTS).unwrap());
    for d_nm in [1.0, 3.0, 10.0, 17.4, 40.0] {
        assert!(
            !is_accessible(&photon, 6e28, 2.99e-6, d_nm * 1e-9, &CONSTANTS).unwrap(),
            "T2 < 3 us must be inaccessible at d = {d_nm} nm"
        );
    }
    println!(
        "PASS criterion 6: T2 limit(17.4 nm) = {:.6e} s vs oracle {:.6e} ({:.1e} rel); (27.1 us, 17.4 nm) accessible; T2 < {} us inaccessible",
        limit,
        oracle,
        rel(limit, oracle),
        T2_FLOOR * 1e6
    );
}

#[test]
fn criterion_07_deer_density() {
    // Forward value against the frozen arbitrary-precision oracle:
    // kappa = pi mu0 ge^2 muB^2 / (9 sqrt3 hbar).
    let kappa_oracle = 8.261_816_745_578_460_5e-19;
    let rate = instantaneous_diffusion_rate(1e23, std::f64::consts::PI, &CONSTANTS).unwrap();
    assert!(rel(rate, 1e23 * kappa_oracle) < 1e-6, "rate = {rate}");

    let mut densities = Vec::new();
    for tid_us in [12.0, 13.0] {
        let deer = DeerModel::new(tid_us * 1e-6, 1.0, std::f64::consts::PI).unwrap();
        let n_d_cm3 = deer.defect_density(&CONSTANTS).unwrap() * 1e-6;
        assert!(
            (0.8e17..=1.3e17).contains(&n_d_cm3),
            "T_id = {tid_us} us gives N_d = {n_d_cm3:.3e} cm^-3"
        );
        densities.push(n_d_cm3);
    }
    println!(
        "PASS criterion 7: Eq. forward = {:.6e} s^-1 ({:.1e} rel to oracle); N_d(12 us) = {:.3e}, N_d(13 us) = {:.3e} cm^-3 in [0.8e17, 1.3e17]",
        rate,
        rel(rate, 1e23 * kappa_oracle),
        densities[0],
        densities[1]
    );
}

#[test]
fn criterion_08_implantation_profiles() {
    let n_ions = 200_000;
    let mut in_diamond_prev = u64::MAX;
    let mut summaries = Vec::new();
    for (i, t) in [52.3f64, 57.6, 64.1, 69.1].iter().enumerate() {
        let scenario = IonTransportScenario::nitrogen_10kev(*t, n_ions, 99);
        let layers = standard_stack(&scenario);
        let start = Instant::now();
        let profile = if i == 0 {
            // (e) determinism: 1 vs 8 workers must agree bit for bit.
            let single = rayon::ThreadPoolBuilder::new()
                .num_threads(1)
                .build()
                .unwrap()
                .install(|| transport(&scenario, &layers))
                .unwrap();
            let multi = rayon::ThreadPoolBuilder::new()
                .num_threads(8)
                .build()
                .unwrap()
                .install(|| transport(&scenario, &layers))
                .unwrap();
            assert_eq!(single, multi, "worker count changed the profile");
            multi
        } else {
            transport(&scenario, &layers).unwrap()
        };
        let elapsed = start.elapsed();
        assert!(
            elapsed.as_secs_f64() < 60.0 * if i == 0 { 2.0 } else { 1.0 },
            "t = {t}: {elapsed:?}"
        );

        // (d) conservation is exact.
        assert!(profile.is_conserved());
        // (a) profile maximum in the 0-2 nm bins.
        let peak = profile.peak_bin().unwrap();
        assert!(peak <= 1, "t = {t}: peak bin {peak}");
        // (c) at least half of the in-diamond ions within 10 nm.
        let in_diamond = profile.in_substrate();
        let frac10 =
            stopped_fraction(&profile, 10.0) * profile.n_ions as f64 / in_diamond as f64;
        assert!(frac10 >= 0.5, "t = {t}: {frac10}");
        // (b) in-diamond dose strictly decreasing with mask thickness.
        assert!(
            in_diamond < in_diamond_prev,
            "t = {t}: {in_diamond} !< {in_diamond_prev}"
        );
        in_diamond_prev = in_diamond;
        summaries.push(format!(
            "t={t}: diamond {in_diamond}, peak bin {peak}, <=10 nm {:.1}%, {:.1}s",
            100.0 * frac10,
            elapsed.as_secs_f64()
        ));
    }
    println!("PASS criterion 8: {}", summaries.join(" | "));
}

#[test]
fn criterion_09_histogram_convention() {
    let mut records = Vec::new();
    for i in 0..13 {
        records.push(NvRecord {
            id: format!("d{i}"),
            mask_thickness_nm: 52.3,
            t2_echo: 20e-6,
            p: 1.0,
            d_nv_nm: Some(6.0 + i as f64),
            b0: 23.2e-3,
            notes: None,
        });
    }
    for i in 0..44 {
        records.push(NvRecord {
            id: format!("u{i}"),
            mask_thickness_nm: 52.3,
            t2_echo: 2e-6,
            p: 1.0,
            d_nv_nm: None,
            b0: 23.2e-3,
            notes: None,
        });
    }
    let hist = assemble_histogram(&records, 52.3, 1e-3, None).unwrap();
    for bin in &hist.bins[..5] {
        assert!((bin.mass - 8.8).abs() < 1e-12, "bin mass = {}", bin.mass);
    }
    assert!((hist.total_mass() - 57.0).abs() < 1e-12);
    println!(
        "PASS criterion 9: t = 52.3 nm group spreads 44/5 = {} per 0-5 nm bin; total mass {}",
        hist.bins[0].mass,
        hist.total_mass()
    );
}

struct JacobianCase<'a> {
    name: &'a str,
    model: &'a dyn LmModel,
    theta_ranges: Vec<(f64, f64)>,
    x_range: (f64, f64),
}

#[test]
fn criterion_10_fitter_integrity() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);

    let omega_n = CONSTANTS.gamma_h * 23.2e-3;
    let f_n = omega_n / (2.0 * std::f64::consts::PI);
    let decay = StretchedDecayCurve { contrast: 1.0 };
    let nmr = NmrDepthCurve { n_pulses: 128, rho: 6e28, omega_n, constants: CONSTANTS };
    let deer = DeerCurve { t2: 16.9e-6, p: 1.14 };
    let cases = [
        JacobianCase {
            name: "coherence decay",
            model: &decay,
            theta_ranges: vec![(5e-6, 1e-4), (0.4, 2.5)],
            x_range: (1e-7, 1.5e-4),
        },
        JacobianCase {
            name: "NMR dip",
            model: &nmr,
            theta_ranges: vec![(5e-9, 6e-8)],
            x_range: (0.97 * f_n, 1.03 * f_n),
        },
        JacobianCase {
            name: "DD scaling",
            model: &DdScalingCurve,
            theta_ranges: vec![(5.0, 300.0), (0.02, 0.8), (5e-6, 5e-5)],
            x_range: (1.0, 512.0),
        },
        JacobianCase {
            name: "DEER decay",
            model: &deer,
            theta_ranges: vec![(2e-6, 5e-5), (0.4, 2.5)],
            x_range: (1e-6, 6e-5),
        },
    ];
    for case in &cases {
        for _ in 0..20 {
            let theta: Vec<f64> = case
                .theta_ranges
                .iter()
                .map(|(lo, hi)| rng.gen_range(*lo..*hi))
                .collect();
            let x = rng.gen_range(case.x_range.0..case.x_range.1);
            if let Err(e) = verify_jacobian(case.model, x, &theta, 1e-6) {
                panic!("{}: {e}", case.name);
            }
        }
    }

    // Noiseless recovery to 1e-6 for the four fitted equations.
    let echo = DecayModel::echo(27.1e-6, 0.98).unwrap();
    let times: Vec<f64> = (1..=30).map(|i| 80e-6 * i as f64 / 30.0).collect();
    let p0: Vec<f64> = times.iter().map(|&t| decay_curve(&echo, &CONSTANTS, t)).collect();
    let trace = DecayTrace::new(SequenceKind::Hahn, times.clone(), p0).unwrap();
    let fit = fit_decay(&trace, GuessPolicy::Auto).unwrap();
    assert!(rel(fit.get("t2").unwrap(), 27.1e-6) < 1e-6);
    assert!(rel(fit.get("p").unwrap(), 0.98) < 1e-6);

    let fixed = NmrFixedParams { n_pulses: 128, b0: 23.2e-3, rho: 6e28, t2: 27.1e-6, p: 0.98 };
    let dip = NmrDipModel::new(17.4e-9, fixed.rho, fixed.n_pulses).unwrap();
    let grid = tau_grid_around_resonance(omega_n, 0.03, 81);
    let freqs: Vec<f64> = grid.iter().map(|t| 1.0 / (2.0 * t)).collect();
    let values: Vec<f64> =
        grid.iter().map(|&tau| dip.contrast(&CONSTANTS, omega_n, tau)).collect();
    let spectrum = NmrSpectrum::new(freqs, values, 128).unwrap();
    let fit = fit_nmr_depth(&spectrum, &fixed, &CONSTANTS).unwrap();
    assert!(rel(fit.get("d_nv").unwrap(), 17.4e-9) < 1e-6);

    let scaling = DdScalingModel::new(27.0e-6, 105.2, 0.10).unwrap();
    let points: Vec<(f64, f64)> = [1.0f64, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0]
        .iter()
        .map(|&n| (n, dd_t2(&scaling, n)))
        .collect();
    let fit = fit_dd_scaling(&points).unwrap();
    assert!(rel(fit.get("n_sat").unwrap(), 105.2) < 1e-6);
    assert!(rel(fit.get("s").unwrap(), 0.10) < 1e-6);
    assert!(rel(fit.get("t2_1").unwrap(), 27.0e-6) < 1e-6);

    let deer_truth = DeerModel::new(13.1e-6, 1.91, std::f64::consts::PI).unwrap();
    let deer_model =
        DecayModel::new(16.9e-6, 1.14, ContrastTerm::Deer(deer_truth)).unwrap();
    let deer_truth_signal =
        SignalModel::Decay { kind: SequenceKind::Deer, model: deer_model };
    let schedule: Vec<f64> = (1..=40).map(|i| 40e-6 * i as f64 / 40.0).collect();
    let p0: Vec<f64> = schedule
        .iter()
        .map(|&t| deer_truth_signal.value(&CONSTANTS, t))
        .collect();
    let trace = DecayTrace::new(SequenceKind::Deer, schedule, p0).unwrap();
    let fit = fit_deer(&trace, 16.9e-6, 1.14, std::f64::consts::PI, &CONSTANTS).unwrap();
    assert!(rel(fit.fit.get("t2_deer").unwrap(), 13.1e-6) < 1e-6);
    assert!(rel(fit.fit.get("q").unwrap(), 1.91) < 1e-6);

    // Also exercised with shot noise: synthesize-then-fit stays consistent.
    let photon = PhotonModel::new(5e5, 0.2).unwrap();
    let noisy = synthesize_trace(
        &SignalModel::Decay { kind: SequenceKind::Hahn, model: echo },
        &CONSTANTS,
        &times,
        &photon,
        4,
        9,
    )
    .unwrap();
    let fit = fit_decay(&noisy, GuessPolicy::Auto).unwrap();
    assert!(rel(fit.get("t2").unwrap(), 27.1e-6) < 0.05);

    println!(
        "PASS criterion 10: 4 models x 20 random Jacobian checks at 1e-6; noiseless recovery < 1e-6 for decay, NMR depth, DD scaling, DEER"
    );
}
