//! Monte Carlo implantation profiles for 10 keV N+ through the four SiO2
//! screening-mask thicknesses, written as CSV + scenario sidecars.
//!
//! Run with `cargo run --release --example implant_profiles` (the transport
//! is ~50x slower in debug builds).

use shallow_nv::implant::{standard_stack, stopped_fraction, transport, IonTransportScenario};
use shallow_nv::io::write_profile_with_sidecar;

fn main() -> shallow_nv::Result<()> {
    let out_dir = std::path::Path::new("examples-output");
    std::fs::create_dir_all(out_dir)?;

    println!("10 keV N+ -> SiO2(t) / diamond, dose 1e11 cm^-2, 200k ions per mask");
    println!("{:>8} {:>10} {:>10} {:>10} {:>12} {:>10}", "t (nm)", "in-mask", "diamond", "peak bin", "<=10 nm", "runtime");
    for t in [0.0, 52.3, 57.6, 64.1, 69.1] {
        let scenario = IonTransportScenario::nitrogen_10kev(t, 200_000, 7);
        let start = std::time::Instant::now();
        let profile = transport(&scenario, &standard_stack(&scenario))?;
        let elapsed = start.elapsed();
        let within_10 = stopped_fraction(&profile, 10.0) * profile.n_ions as f64;
        let in_diamond = profile.in_substrate();
        let frac10 = if in_diamond > 0 { within_10 / in_diamond as f64 } else { f64::NAN };
        let peak = profile
            .peak_bin()
            .map(|k| k.to_string())
            .unwrap_or_else(|| "-".to_string());
        println!(
            "{t:>8} {:>10} {:>10} {:>10} {:>11.1}% {:>9.2?}",
            profile.mask_stopped,
            in_diamond,
            peak,
            100.0 * frac10,
            elapsed
        );
        let path = out_dir.join(format!("profile_t{t}.csv"));
        write_profile_with_sidecar(&path, &profile, &scenario)?;
    }
    println!("profiles written to {}", out_dir.display());
    Ok(())
}
