//! Binary-collision Monte Carlo transport of ions through an amorphous layer
//! stack, producing depth profiles of stopped ions.
//!
//! Amorphous targets only (no channeling, no recoil cascades). The transport
//! kernel is pure per ion and every ion owns its RNG stream, so histograms
//! are bit-identical for a fixed (seed, n_ions) regardless of how the work is
//! scheduled across threads.

pub mod kinematics;
pub mod material;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use kinematics::PairKinematics;
use material::MaterialLayer;

/// Ions are tracked until their energy falls below this cutoff.
pub const STOP_ENERGY_EV: f64 = 100.0;

/// Default histogram bin width, nm.
pub const DEFAULT_BIN_NM: f64 = 1.0;

/// Inputs of one implantation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IonTransportScenario {
    /// Projectile atomic number (7 for N+).
    pub ion_z: f64,
    /// Projectile mass, u (14.003074 for 14N+).
    pub ion_mass: f64,
    /// Initial kinetic energy, keV.
    pub energy_kev: f64,
    /// Screening-mask thickness, nm.
    pub mask_thickness_nm: f64,
    /// Areal dose, cm^-2.
    pub dose_cm2: f64,
    /// Monte Carlo sample count.
    pub n_ions: u64,
    /// RNG seed; combined with the ion index into per-ion streams.
    pub seed: u64,
    /// Incidence angle from the surface normal, rad (0 = normal).
    pub incidence_rad: f64,
    /// Histogram bin width, nm.
    pub bin_width_nm: f64,
}

impl IonTransportScenario {
    pub fn nitrogen_10kev(mask_thickness_nm: f64, n_ions: u64, seed: u64) -> Self {
        IonTransportScenario {
            ion_z: 7.0,
            ion_mass: 14.003_074,
            energy_kev: 10.0,
            mask_thickness_nm,
            dose_cm2: 1e11,
            n_ions,
            seed,
            incidence_rad: 0.0,
            bin_width_nm: DEFAULT_BIN_NM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.energy_kev > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "energy must be > 0 keV, got {}",
                self.energy_kev
            )));
        }
        if !(self.mask_thickness_nm >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mask thickness must be >= 0, got {}",
                self.mask_thickness_nm
            )));
        }
        if self.n_ions < 1 {
            return Err(Error::InvalidParameter("n_ions must be >= 1".to_string()));
        }
        if !(self.bin_width_nm > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bin width must be > 0, got {}",
                self.bin_width_nm
            )));
        }
        if !(self.dose_cm2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dose must be > 0, got {}",
                self.dose_cm2
            )));
        }
        Ok(())
    }
}

/// Binned distribution of stopped ions, depth measured from the substrate
/// surface. Ions stopping in the mask stack and ions leaving through the top
/// surface are booked separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthProfile {
    pub bin_width_nm: f64,
    /// Stopped ions per bin; bin k covers [k, k+1) * bin_width.
    pub counts: Vec<u64>,
    /// counts converted to cm^-3 through the dose: density[k] =
    /// (counts[k]/n_ions) dose / bin_width.
    pub density_cm3: Vec<f64>,
    pub mask_stopped: u64,
    pub reflected: u64,
    pub n_ions: u64,
    pub dose_cm2: f64,
}

impl DepthProfile {
    /// Conservation check: mask + reflected + binned = n_ions.
    pub fn is_conserved(&self) -> bool {
        self.mask_stopped + self.reflected + self.counts.iter().sum::<u64>() == self.n_ions
    }

    pub fn in_substrate(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Mean stopping depth of the ions that stopped in the substrate, nm
    /// (bin centers).
    pub fn mean_depth_nm(&self) -> f64 {
        let total = self.in_substrate();
        if total == 0 {
            return f64::NAN;
        }
        let weighted: f64 = self
            .counts
            .iter()
            .enumerate()
            .map(|(k, &c)| (k as f64 + 0.5) * self.bin_width_nm * c as f64)
            .sum();
        weighted / total as f64
    }

    /// Bin index of the profile maximum.
    pub fn peak_bin(&self) -> Option<usize> {
        self.counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .filter(|(_, &c)| c > 0)
            .map(|(k, _)| k)
    }

    fn densities(counts: &[u64], n_ions: u64, dose_cm2: f64, bin_width_nm: f64) -> Vec<f64> {
        let bin_cm = bin_width_nm * 1e-7;
        counts
            .iter()
            .map(|&c| (c as f64 / n_ions as f64) * dose_cm2 / bin_cm)
            .collect()
    }
}

/// Fraction of all simulated ions that stopped in the substrate at depth
/// <= depth_max_nm (whole bins).
pub fn stopped_fraction(profile: &DepthProfile, depth_max_nm: f64) -> f64 {
    if depth_max_nm <= 0.0 {
        return 0.0;
    }
    let cut = (depth_max_nm / profile.bin_width_nm + 1e-9).floor() as usize;
    let in_range: u64 = profile.counts.iter().take(cut).sum();
    in_range as f64 / profile.n_ions as f64
}

/// Per-layer transport tables.
struct LayerTransport {
    /// Depth of the layer top, nm.
    x_start: f64,
    /// Depth of the layer bottom, nm (infinite for the substrate).
    x_end: f64,
    /// Free-flight path = interatomic spacing n^-1/3, nm.
    mfp: f64,
    /// Impact-parameter disk radius: pi pmax^2 mfp n = 1.
    p_max: f64,
    /// Cumulative species-selection weights and pair kinematics.
    species: Vec<(f64, PairKinematics)>,
    /// dE/dx_e = el_factor sqrt(E[eV]), eV/nm.
    el_factor: f64,
}

struct Stack {
    layers: Vec<LayerTransport>,
    /// Top of the substrate (= total mask thickness), nm.
    substrate_start: f64,
}

impl Stack {
    fn layer_at(&self, x: f64) -> &LayerTransport {
        for layer in &self.layers {
            if x < layer.x_end {
                return layer;
            }
        }
        self.layers.last().expect("stack validated nonempty")
    }
}

fn build_stack(scenario: &IonTransportScenario, layers: &[MaterialLayer]) -> Result<Stack> {
    if layers.is_empty() {
        return Err(Error::EmptyLayerList);
    }
    for layer in layers {
        layer.validate()?;
    }
    let (finite, substrate) = layers.split_at(layers.len() - 1);
    if substrate[0].thickness_nm.is_some() {
        return Err(Error::InvalidParameter(
            "the last layer is the substrate and must be semi-infinite (thickness_nm = null)"
                .to_string(),
        ));
    }
    let mask_total: f64 = finite
        .iter()
        .map(|l| {
            l.thickness_nm.ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "layer {} above the substrate needs a finite thickness",
                    l.label
                ))
            })
        })
        .sum::<Result<f64>>()?;
    if (mask_total - scenario.mask_thickness_nm).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "stacked mask thickness {mask_total} nm does not match scenario value {} nm",
            scenario.mask_thickness_nm
        )));
    }

    let mut built = Vec::new();
    let mut x = 0.0;
    for layer in layers {
        let thickness = layer.thickness_nm.unwrap_or(f64::INFINITY);
        if thickness == 0.0 {
            continue;
        }
        let n_total = layer.number_density_nm3();
        let mfp = n_total.powf(-1.0 / 3.0);
        let p_max = 1.0 / (std::f64::consts::PI * mfp * n_total).sqrt();
        let mut cumulative = 0.0;
        let mut species = Vec::new();
        let mut el_factor = 0.0;
        for atom in &layer.atoms {
            cumulative += atom.fraction;
            let pair =
                PairKinematics::new(scenario.ion_z, scenario.ion_mass, atom.z, atom.mass_amu);
            el_factor += atom.fraction * n_total * pair.ls_coeff;
            species.push((cumulative, pair));
        }
        built.push(LayerTransport {
            x_start: x,
            x_end: x + thickness,
            mfp,
            p_max,
            species,
            el_factor,
        });
        x += thickness;
    }
    if built.is_empty() {
        return Err(Error::EmptyLayerList);
    }
    let substrate_start = built.last().map(|l| l.x_start).unwrap_or(0.0);
    Ok(Stack { layers: built, substrate_start })
}

/// Standard stack for this toolkit: SiO2 mask of the scenario thickness on a
/// semi-infinite diamond substrate.
pub fn standard_stack(scenario: &IonTransportScenario) -> Vec<MaterialLayer> {
    standard_stack_with(scenario, material::SIO2_DEFAULT_DENSITY)
}

/// Standard stack with an explicit SiO2 density (the paper does not state the
/// one its Monte Carlo runs assumed; 2.2 g/cm^3 is the default).
pub fn standard_stack_with(
    scenario: &IonTransportScenario,
    sio2_density_g_cm3: f64,
) -> Vec<MaterialLayer> {
    if scenario.mask_thickness_nm > 0.0 {
        vec![
            material::sio2(sio2_density_g_cm3)
                .with_thickness(Some(scenario.mask_thickness_nm)),
            material::diamond(),
        ]
    } else {
        vec![material::diamond()]
    }
}

#[derive(Debug, Clone, Copy)]
enum IonFate {
    Reflected,
    StoppedAt(f64),
}

/// Follow one ion through the stack. Pure: all randomness comes from `rng`.
fn trace_ion(
    scenario: &IonTransportScenario,
    stack: &Stack,
    rng: &mut ChaCha8Rng,
    ion_index: u64,
) -> Result<IonFate> {
    let mut x = 0.0f64;
    let mut dir = [
        scenario.incidence_rad.cos(),
        scenario.incidence_rad.sin(),
        0.0f64,
    ];
    let mut energy = scenario.energy_kev * 1e3;
    let mut step_count = 0u64;

    loop {
        step_count += 1;
        if !energy.is_finite() {
            return Err(Error::NonFiniteEnergy {
                ion: ion_index,
                step: step_count,
                detail: format!("energy became {energy} at depth {x} nm"),
            });
        }
        if energy < STOP_ENERGY_EV {
            return Ok(IonFate::StoppedAt(x));
        }

        let layer = stack.layer_at(x);
        // Distance to the boundary the ion is heading toward.
        let boundary_dist = if dir[0] > 0.0 {
            (layer.x_end - x) / dir[0]
        } else if dir[0] < 0.0 {
            (layer.x_start - x) / dir[0]
        } else {
            f64::INFINITY
        };
        let (step, collides) = if layer.mfp < boundary_dist {
            (layer.mfp, true)
        } else {
            // Advance just past the boundary; the collision is re-drawn in
            // the next layer.
            (boundary_dist + 1e-6, false)
        };

        let de_electronic = step * layer.el_factor * energy.sqrt();
        x += dir[0] * step;
        energy -= de_electronic;

        if x < 0.0 {
            return Ok(IonFate::Reflected);
        }
        if !collides {
            continue;
        }
        if energy < STOP_ENERGY_EV {
            return Ok(IonFate::StoppedAt(x));
        }

        let u_p: f64 = rng.gen();
        let phi: f64 = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
        let u_species: f64 = rng.gen();
        let p = layer.p_max * u_p.sqrt();
        let pair = layer
            .species
            .iter()
            .find(|(w, _)| u_species <= *w)
            .map(|(_, pair)| pair)
            .unwrap_or(&layer.species.last().expect("nonempty species").1);

        let theta_cm = pair.scattering_angle(energy, p);
        let recoil = pair.recoil_energy(energy, theta_cm);
        energy -= recoil;
        let psi = pair.lab_angle(theta_cm);
        dir = rotate(dir, psi, phi);
    }
}

/// Deflect `dir` by polar angle `psi` with azimuth `phi` around itself.
fn rotate(dir: [f64; 3], psi: f64, phi: f64) -> [f64; 3] {
    let (sin_psi, cos_psi) = psi.sin_cos();
    let (sin_phi, cos_phi) = phi.sin_cos();
    // Orthonormal frame around dir; the reference axis choice only has to be
    // deterministic.
    let u = if dir[2].abs() < 0.9 {
        cross(dir, [0.0, 0.0, 1.0])
    } else {
        cross(dir, [1.0, 0.0, 0.0])
    };
    let u = normalize(u);
    let v = cross(dir, u);
    let mut out = [0.0f64; 3];
    for i in 0..3 {
        out[i] = dir[i] * cos_psi + (u[i] * cos_phi + v[i] * sin_phi) * sin_psi;
    }
    normalize(out)
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let norm = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    [a[0] / norm, a[1] / norm, a[2] / norm]
}

#[derive(Debug, Clone)]
struct Tally {
    bins: Vec<u64>,
    mask_stopped: u64,
    reflected: u64,
}

impl Tally {
    fn new() -> Self {
        Tally { bins: Vec::new(), mask_stopped: 0, reflected: 0 }
    }

    fn record(&mut self, fate: IonFate, substrate_start: f64, bin_width_nm: f64) {
        match fate {
            IonFate::Reflected => self.reflected += 1,
            IonFate::StoppedAt(x) if x < substrate_start => self.mask_stopped += 1,
            IonFate::StoppedAt(x) => {
                let depth = x - substrate_start;
                let bin = (depth / bin_width_nm).floor() as usize;
                if bin >= self.bins.len() {
                    self.bins.resize(bin + 1, 0);
                }
                self.bins[bin] += 1;
            }
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        if other.bins.len() > self.bins.len() {
            return other.merge(self);
        }
        for (k, c) in other.bins.iter().enumerate() {
            self.bins[k] += c;
        }
        self.mask_stopped += other.mask_stopped;
        self.reflected += other.reflected;
        self
    }
}

/// Run the transport. Deterministic for fixed (seed, n_ions) independent of
/// the rayon worker count: ion i draws from stream i of a ChaCha generator
/// keyed by the scenario seed, and the histogram reduction is integer-valued
/// and order-independent.
pub fn transport(
    scenario: &IonTransportScenario,
    layers: &[MaterialLayer],
) -> Result<DepthProfile> {
    scenario.validate()?;
    let stack = build_stack(scenario, layers)?;

    let tally = (0..scenario.n_ions as usize)
        .into_par_iter()
        .with_min_len(512)
        .try_fold(Tally::new, |mut tally, ion| {
            let ion = ion as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
            rng.set_stream(ion);
            let fate = trace_ion(scenario, &stack, &mut rng, ion)?;
            tally.record(fate, stack.substrate_start, scenario.bin_width_nm);
            Ok::<Tally, Error>(tally)
        })
        .try_reduce(Tally::new, |a, b| Ok(a.merge(b)))?;

    let density_cm3 = DepthProfile::densities(
        &tally.bins,
        scenario.n_ions,
        scenario.dose_cm2,
        scenario.bin_width_nm,
    );
    Ok(DepthProfile {
        bin_width_nm: scenario.bin_width_nm,
        counts: tally.bins,
        density_cm3,
        mask_stopped: tally.mask_stopped,
        reflected: tally.reflected,
        n_ions: scenario.n_ions,
        dose_cm2: scenario.dose_cm2,
    })
}
