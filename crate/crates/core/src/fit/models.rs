//! [`LmModel`] adapters for the physics curves, with analytic Jacobians.

use crate::constants::PhysicalConstants;
use crate::fit::lm::LmModel;
use crate::models::{b_rms, sinc};

/// p0(t) = 1/2 + (C/2) exp[-(t/T2)^p]; theta = [t2, p].
pub struct StretchedDecayCurve {
    pub contrast: f64,
}

impl LmModel for StretchedDecayCurve {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, t: f64, theta: &[f64]) -> f64 {
        let (t2, p) = (theta[0], theta[1]);
        if t <= 0.0 {
            return 0.5 + 0.5 * self.contrast;
        }
        0.5 + 0.5 * self.contrast * (-(t / t2).powf(p)).exp()
    }

    fn jacobian(&self, t: f64, theta: &[f64], out: &mut [f64]) {
        let (t2, p) = (theta[0], theta[1]);
        if t <= 0.0 {
            out[0] = 0.0;
            out[1] = 0.0;
            return;
        }
        let u = (t / t2).powf(p);
        let e = (-u).exp();
        out[0] = 0.5 * self.contrast * e * p * u / t2;
        out[1] = -0.5 * self.contrast * e * u * (t / t2).ln();
    }

    fn feasible(&self, theta: &[f64]) -> bool {
        theta[0] > 0.0 && (0.3..=3.0).contains(&theta[1])
    }
}

/// NMR dip spectrum C_NMR(f; d) on the sensed-frequency axis f = (2 tau)^-1;
/// theta = [d_nv].
pub struct NmrDepthCurve {
    pub n_pulses: u32,
    pub rho: f64,
    /// Proton Larmor angular frequency, rad/s.
    pub omega_n: f64,
    pub constants: PhysicalConstants,
}

impl NmrDepthCurve {
    fn amp_and_detune(&self, f: f64, d: f64) -> (f64, f64) {
        let tau = 1.0 / (2.0 * f);
        let n_tau = self.n_pulses as f64 * tau;
        let b = b_rms(&self.constants, d, self.rho).expect("positive depth enforced by feasible");
        let amp = self.constants.gamma_e * b * n_tau / std::f64::consts::PI;
        let detune = sinc(0.5 * n_tau * (self.omega_n - std::f64::consts::PI / tau));
        (amp, detune)
    }
}

impl LmModel for NmrDepthCurve {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, f: f64, theta: &[f64]) -> f64 {
        let (amp, detune) = self.amp_and_detune(f, theta[0]);
        (-2.0 * amp * amp * detune * detune).exp()
    }

    fn jacobian(&self, f: f64, theta: &[f64], out: &mut [f64]) {
        let d = theta[0];
        let (amp, detune) = self.amp_and_detune(f, d);
        let c = (-2.0 * amp * amp * detune * detune).exp();
        // dC/dd = 6 C amp^2 detune^2 / d  (since B_rms ~ d^-3/2).
        out[0] = 6.0 * c * amp * amp * detune * detune / d;
    }

    fn feasible(&self, theta: &[f64]) -> bool {
        theta[0] > 1e-10 && theta[0] < 1e-5
    }
}

/// T2(N) = T2_1 [N_sat^s + (N^s - N_sat^s) exp(-N/N_sat)];
/// theta = [n_sat, s, t2_1].
pub struct DdScalingCurve;

impl LmModel for DdScalingCurve {
    fn dim(&self) -> usize {
        3
    }

    fn value(&self, n: f64, theta: &[f64]) -> f64 {
        let (n_sat, s, t2_1) = (theta[0], theta[1], theta[2]);
        let n_sat_s = n_sat.powf(s);
        t2_1 * (n_sat_s + (n.powf(s) - n_sat_s) * (-n / n_sat).exp())
    }

    fn jacobian(&self, n: f64, theta: &[f64], out: &mut [f64]) {
        let (n_sat, s, t2_1) = (theta[0], theta[1], theta[2]);
        let n_sat_s = n_sat.powf(s);
        let n_s = n.powf(s);
        let e = (-n / n_sat).exp();
        // d/dn_sat: s n_sat^(s-1) (1 - e) + (n^s - n_sat^s) e n / n_sat^2.
        out[0] = t2_1
            * (s * n_sat.powf(s - 1.0) * (1.0 - e) + (n_s - n_sat_s) * e * n / (n_sat * n_sat));
        // d/ds: ln(n_sat) n_sat^s (1 - e) + ln(n) n^s e.
        out[1] = t2_1 * (n_sat.ln() * n_sat_s * (1.0 - e) + n.ln() * n_s * e);
        out[2] = n_sat_s + (n_s - n_sat_s) * e;
    }

    fn feasible(&self, theta: &[f64]) -> bool {
        theta[0] > 1.0 && theta[1] > -1.0 && theta[1] < 2.0 && theta[2] > 0.0
    }
}

/// DEER decay p0(t) = 1/2 + (1/2) e^{-(t/T2)^p} e^{-(t/T2_DEER)^q} with the
/// echo envelope frozen; theta = [t2_deer, q], t = 2 tau.
pub struct DeerCurve {
    pub t2: f64,
    pub p: f64,
}

impl DeerCurve {
    fn envelope(&self, t: f64) -> f64 {
        if t <= 0.0 {
            1.0
        } else {
            (-(t / self.t2).powf(self.p)).exp()
        }
    }
}

impl LmModel for DeerCurve {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, t: f64, theta: &[f64]) -> f64 {
        let (t2d, q) = (theta[0], theta[1]);
        if t <= 0.0 {
            return 1.0;
        }
        0.5 + 0.5 * self.envelope(t) * (-(t / t2d).powf(q)).exp()
    }

    fn jacobian(&self, t: f64, theta: &[f64], out: &mut [f64]) {
        let (t2d, q) = (theta[0], theta[1]);
        if t <= 0.0 {
            out[0] = 0.0;
            out[1] = 0.0;
            return;
        }
        let v = (t / t2d).powf(q);
        let factor = 0.5 * self.envelope(t) * (-v).exp();
        out[0] = factor * q * v / t2d;
        out[1] = -factor * v * (t / t2d).ln();
    }

    fn feasible(&self, theta: &[f64]) -> bool {
        theta[0] > 0.0 && (0.3..=3.0).contains(&theta[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::CONSTANTS;
    use crate::fit::lm::verify_jacobian;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check_jacobian(model: &dyn LmModel, x: f64, theta: &[f64]) {
        if let Err(e) = verify_jacobian(model, x, theta, 1e-6) {
            panic!("{e}");
        }
    }

    #[test]
    fn stretched_decay_jacobian_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let model = StretchedDecayCurve { contrast: 1.0 };
        for _ in 0..20 {
            let theta = [rng.gen_range(5e-6..1e-4), rng.gen_range(0.4..2.5)];
            let t = rng.gen_range(1e-7..2e-4);
            check_jacobian(&model, t, &theta);
        }
    }

    #[test]
    fn nmr_depth_jacobian_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(102);
        let omega_n = CONSTANTS.gamma_h * 23.2e-3;
        let model = NmrDepthCurve {
            n_pulses: 128,
            rho: 6e28,
            omega_n,
            constants: CONSTANTS,
        };
        let f_n = omega_n / (2.0 * std::f64::consts::PI);
        for _ in 0..20 {
            let theta = [rng.gen_range(5e-9..60e-9)];
            let f = f_n * rng.gen_range(0.97..1.03);
            check_jacobian(&model, f, &theta);
        }
    }

    #[test]
    fn dd_scaling_jacobian_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        for _ in 0..20 {
            let theta = [
                rng.gen_range(5.0..300.0),
                rng.gen_range(0.02..0.8),
                rng.gen_range(5e-6..5e-5),
            ];
            let n = rng.gen_range(1.0..512.0);
            check_jacobian(&DdScalingCurve, n, &theta);
        }
    }

    #[test]
    fn deer_jacobian_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(104);
        let model = DeerCurve { t2: 16.9e-6, p: 1.14 };
        for _ in 0..20 {
            let theta = [rng.gen_range(2e-6..5e-5), rng.gen_range(0.4..2.5)];
            let t = rng.gen_range(1e-6..6e-5);
            check_jacobian(&model, t, &theta);
        }
    }
}
