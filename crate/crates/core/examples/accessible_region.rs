//! The detectability bound in the (depth, T2) plane: the minimum echo T2 at
//! which the proton NMR dip beats photon shot noise, plus the 3 us floor.

use shallow_nv::constants::{PhotonModel, CONSTANTS};
use shallow_nv::fit::{accessible_region, T2_FLOOR};
use shallow_nv::io::accessible_region_to_csv;

fn main() -> shallow_nv::Result<()> {
    let photon = PhotonModel::new(5e5, 0.2)?;
    let rho = 6e28;
    let grid: Vec<f64> = (2..=60).map(|d| d as f64 * 1e-9).collect();
    let region = accessible_region(&photon, rho, &grid, &CONSTANTS)?;

    println!("T2 limit vs depth (c = 0.2, n0 = 5e5, rho = 6e28 m^-3):");
    for d_nm in [5.0, 10.0, 17.4, 30.0, 50.0] {
        let idx = region
            .depths
            .iter()
            .position(|&d| (d * 1e9 - d_nm).abs() < 0.5)
            .unwrap();
        println!("  d = {d_nm:>5.1} nm: T2 >= {:>7.2} us", region.t2_limit[idx] * 1e6);
    }
    println!("hard floor: T2 >= {} us at any depth", T2_FLOOR * 1e6);

    for (t2_us, d_nm) in [(27.1, 17.4), (5.0, 30.0), (2.0, 4.0)] {
        let ok = region.classify(t2_us * 1e-6, d_nm * 1e-9, &CONSTANTS)?;
        println!(
            "  (T2 = {t2_us} us, d = {d_nm} nm) -> {}",
            if ok { "accessible" } else { "inaccessible" }
        );
    }

    let out_dir = std::path::Path::new("examples-output");
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("accessible_region.csv");
    std::fs::write(&path, accessible_region_to_csv(&region))?;
    println!("curve written to {}", path.display());
    Ok(())
}
