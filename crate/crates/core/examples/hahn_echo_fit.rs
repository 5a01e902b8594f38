//! Synthesize a Hahn echo decay with photon shot noise and fit (T2, p) back.

use shallow_nv::constants::{PhotonModel, CONSTANTS};
use shallow_nv::fit::{fit_decay, GuessPolicy};
use shallow_nv::models::DecayModel;
use shallow_nv::records::SequenceKind;
use shallow_nv::synth::{synthesize_trace, SignalModel};

fn main() -> shallow_nv::Result<()> {
    let truth = SignalModel::Decay {
        kind: SequenceKind::Hahn,
        model: DecayModel::echo(27.1e-6, 0.98)?,
    };
    let photon = PhotonModel::new(5e5, 0.2)?;
    let schedule: Vec<f64> = (1..=30).map(|i| 80e-6 * i as f64 / 30.0).collect();
    let trace = synthesize_trace(&truth, &CONSTANTS, &schedule, &photon, 1, 2024)?;

    let fit = fit_decay(&trace, GuessPolicy::Auto)?;
    println!("truth: T2 = 27.1 us, p = 0.98");
    for p in &fit.parameters {
        let unit = if p.name == "t2" { 1e6 } else { 1.0 };
        let suffix = if p.name == "t2" { " us" } else { "" };
        println!(
            "fit:   {} = {:.4}{suffix} +- {:.4}{suffix} (95%)",
            p.name,
            p.value * unit,
            p.ci95.unwrap_or(f64::NAN) * unit
        );
    }
    println!(
        "converged in {} iterations, residual norm {:.3e}",
        fit.iterations, fit.residual_norm
    );
    Ok(())
}
