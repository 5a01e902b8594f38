//! SQ/DQ relaxation algebra: from the two measured T1 values to the rates
//! (Omega, gamma) and their effective electric-field PSD points.

use shallow_nv::constants::{FieldConfig, CONSTANTS};
use shallow_nv::noise::{rates_from_t1, rates_to_psd};

fn main() -> shallow_nv::Result<()> {
    let rates = rates_from_t1(1.06e-3, 1.16e-3)?;
    println!("T1_SQ = 1.06 ms, T1_DQ = 1.16 ms");
    println!(
        "Omega = {:.1} Hz (magnetic), gamma = {:.1} Hz (electric)",
        rates.omega_rate, rates.gamma_rate
    );

    // Probe frequencies: measured values override the nominal secular ones.
    let field = FieldConfig::new(&CONSTANTS, 23.2e-3)?
        .with_measured(Some(2218.2e6), Some(1301.5e6));
    let (f_sq, f_dq) = field.probe_frequencies(&CONSTANTS)?;
    let (sq, dq) = rates_to_psd(&rates, &CONSTANTS, f_sq, f_dq);
    println!(
        "S_e = 2 Omega / d_par^2  = {:.3e} V^2/m^2Hz at {:.1} MHz",
        sq.s_e,
        sq.freq_hz * 1e-6
    );
    println!(
        "S_e = gamma / d_perp^2 = {:.3e} V^2/m^2Hz at {:.1} MHz",
        dq.s_e,
        dq.freq_hz * 1e-6
    );
    println!("the magnetic contribution dominates by ~{:.0e}", sq.s_e / dq.s_e);
    Ok(())
}
