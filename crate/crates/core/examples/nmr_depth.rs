//! NV-depth estimation round trip: synthesize a proton NMR spectrum for an
//! NV 17.4 nm deep at 23.2 mT, then fit the depth back with everything else
//! frozen.

use shallow_nv::constants::{proton_larmor, PhotonModel, CONSTANTS};
use shallow_nv::fit::{fit_nmr_depth, NmrFixedParams};
use shallow_nv::models::{DecayModel, NmrDipModel};
use shallow_nv::synth::{synthesize_nmr_spectrum, tau_grid_around_resonance};

fn main() -> shallow_nv::Result<()> {
    let fixed = NmrFixedParams {
        n_pulses: 128,
        b0: 23.2e-3,
        rho: 6e28,
        t2: 27.1e-6,
        p: 0.98,
    };
    let f_n = proton_larmor(&CONSTANTS, fixed.b0)?;
    let omega_n = CONSTANTS.gamma_h * fixed.b0;
    println!(
        "proton NMR frequency at {} mT: {:.4} MHz (on-resonance tau = {:.1} ns)",
        fixed.b0 * 1e3,
        f_n * 1e-6,
        0.5e9 / f_n
    );

    let dip = NmrDipModel::new(17.4e-9, fixed.rho, fixed.n_pulses)?;
    println!("B_rms at 17.4 nm: {:.3e} T", dip.b_rms(&CONSTANTS));

    let decay = DecayModel::echo(fixed.t2, fixed.p)?;
    let photon = PhotonModel::new(5e5, 0.2)?;
    let grid = tau_grid_around_resonance(omega_n, 0.03, 81);
    let spectrum =
        synthesize_nmr_spectrum(&dip, &decay, &CONSTANTS, omega_n, &grid, &photon, 8, 11)?;

    let dip_at = spectrum
        .p0_norm
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| spectrum.freq_hz[i])
        .unwrap();
    println!("synthetic spectrum dips at {:.4} MHz", dip_at * 1e-6);

    let fit = fit_nmr_depth(&spectrum, &fixed, &CONSTANTS)?;
    let d = fit.get("d_nv").unwrap();
    let ci = fit.ci95("d_nv").unwrap_or(f64::NAN);
    println!(
        "recovered depth: {:.2} +- {:.2} nm (truth 17.4 nm)",
        d * 1e9,
        ci * 1e9
    );
    Ok(())
}
