//! Screened-Coulomb two-body collision kinematics and electronic stopping.
//!
//! Nuclear scattering uses the ZBL universal screening function with the
//! distance of closest approach from a Newton solve and the scattering angle
//! from the Biersack-Haggmark "magic" fit. Electronic stopping is the
//! velocity-proportional Lindhard-Scharff cross section. Units: eV, nm, u.

/// e^2 / (4 pi eps0), eV nm.
pub const KE2_EV_NM: f64 = 1.439_964_5;
/// Bohr radius, nm.
pub const BOHR_NM: f64 = 0.052_917_721_090_3;

/// ZBL universal screening function.
pub fn zbl_phi(x: f64) -> f64 {
    0.18175 * (-3.19980 * x).exp()
        + 0.50986 * (-0.94229 * x).exp()
        + 0.28022 * (-0.40290 * x).exp()
        + 0.02817 * (-0.20162 * x).exp()
}

/// d phi / dx for the ZBL screening function.
pub fn zbl_dphi(x: f64) -> f64 {
    -3.19980 * 0.18175 * (-3.19980 * x).exp()
        - 0.94229 * 0.50986 * (-0.94229 * x).exp()
        - 0.40290 * 0.28022 * (-0.40290 * x).exp()
        - 0.20162 * 0.02817 * (-0.20162 * x).exp()
}

/// ZBL universal screening length a_U = 0.8854 a0 / (Z1^0.23 + Z2^0.23), nm.
pub fn screening_length(z1: f64, z2: f64) -> f64 {
    0.8854 * BOHR_NM / (z1.powf(0.23) + z2.powf(0.23))
}

/// Precomputed two-body constants for a projectile/target-species pair.
#[derive(Debug, Clone, Copy)]
pub struct PairKinematics {
    pub z2: f64,
    pub m2: f64,
    /// Screening length, nm.
    pub a: f64,
    /// Energy-transfer factor 4 m1 m2 / (m1 + m2)^2.
    pub lambda: f64,
    /// Mass ratio m1/m2 for the lab-frame angle.
    pub mass_ratio: f64,
    /// Potential scale V0 = Z1 Z2 e^2/(4 pi eps0 a), eV.
    pub v0: f64,
    /// Fraction of the relative energy, m2/(m1+m2).
    pub relative_factor: f64,
    /// Lindhard-Scharff prefactor: S_e = ls_coeff sqrt(E[eV]), eV nm^2.
    pub ls_coeff: f64,
}

impl PairKinematics {
    pub fn new(z1: f64, m1: f64, z2: f64, m2: f64) -> Self {
        let a = screening_length(z1, z2);
        // 1.212 Z1^(7/6) Z2 / (Z1^(2/3) + Z2^(2/3))^(3/2) sqrt(E/M1) in eV A^2;
        // 1 A^2 = 0.01 nm^2.
        let ls = 1.212e-2 * z1.powf(7.0 / 6.0) * z2
            / (z1.powf(2.0 / 3.0) + z2.powf(2.0 / 3.0)).powf(1.5)
            / m1.sqrt();
        PairKinematics {
            z2,
            m2,
            a,
            lambda: 4.0 * m1 * m2 / ((m1 + m2) * (m1 + m2)),
            mass_ratio: m1 / m2,
            v0: z1 * z2 * KE2_EV_NM / a,
            relative_factor: m2 / (m1 + m2),
            ls_coeff: ls,
        }
    }

    /// Reduced distance of closest approach: root of
    /// 1 - phi(x)/(x eps) - beta^2/x^2 = 0.
    ///
    /// The function is monotone increasing in x with a single root, so a
    /// bracketed Newton iteration (bisection fallback) always converges. The
    /// unscreened-Coulomb closest approach is an upper bound: screening only
    /// weakens the potential.
    fn closest_approach(&self, reduced_energy: f64, beta: f64) -> f64 {
        let eps = reduced_energy;
        let f = |x: f64| 1.0 - zbl_phi(x) / (x * eps) - beta * beta / (x * x);
        let df = |x: f64| {
            -zbl_dphi(x) / (x * eps) + zbl_phi(x) / (x * x * eps)
                + 2.0 * beta * beta / (x * x * x)
        };
        let inv2e = 0.5 / eps;
        let mut hi = inv2e + (inv2e * inv2e + beta * beta).sqrt();
        while f(hi) < 0.0 {
            hi *= 2.0;
        }
        let mut lo = 1e-12;
        let mut x = hi;
        for _ in 0..60 {
            let fx = f(x);
            if fx > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let newton = x - fx / df(x);
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let step = (next - x).abs();
            x = next;
            if step < 1e-12 * x.max(1e-12) {
                break;
            }
        }
        x
    }

    /// Center-of-mass scattering angle for lab energy `e_lab` (eV) and impact
    /// parameter `p_nm`, via the magic-formula fit for the ZBL potential.
    pub fn scattering_angle(&self, e_lab: f64, p_nm: f64) -> f64 {
        const C1: f64 = 0.99229;
        const C2: f64 = 0.011615;
        const C3: f64 = 0.0071222;
        const C4: f64 = 9.3066;
        const C5: f64 = 14.813;

        let relative_energy = e_lab * self.relative_factor;
        let eps = relative_energy / self.v0;
        let beta = p_nm / self.a;
        let x0 = self.closest_approach(eps, beta);

        let sqe = eps.sqrt();
        let r0 = self.a * x0;
        let v = self.v0 * zbl_phi(x0) / x0;
        let dv = -v / r0 + self.v0 * zbl_dphi(x0) / r0;
        let rho = -2.0 * (relative_energy - v) / dv;
        let d = 2.0 * (1.0 + C1 / sqe) * eps * beta.powf((C2 + sqe) / (C3 + sqe));
        let g = (C4 + eps) / (C5 + eps) * ((1.0 + d * d).sqrt() - d);
        let delta = d * g / (1.0 + g) * (x0 - beta);
        let cos_half = ((beta + rho / self.a + delta) / (x0 + rho / self.a)).clamp(-1.0, 1.0);
        2.0 * cos_half.acos()
    }

    /// Energy transferred to the recoil, T = Lambda E sin^2(theta_cm/2).
    pub fn recoil_energy(&self, e_lab: f64, theta_cm: f64) -> f64 {
        let s = (0.5 * theta_cm).sin();
        self.lambda * e_lab * s * s
    }

    /// Lab-frame deflection of the projectile.
    pub fn lab_angle(&self, theta_cm: f64) -> f64 {
        theta_cm.sin().atan2(theta_cm.cos() + self.mass_ratio)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zbl_phi_is_a_screening_function() {
        assert_relative_eq!(zbl_phi(0.0), 1.0, max_relative = 1e-12);
        let mut prev = 1.0;
        for i in 1..100 {
            let v = zbl_phi(i as f64 * 0.1);
            assert!(v < prev && v > 0.0);
            prev = v;
        }
        // Derivative consistency with a central difference.
        for x in [0.05, 0.4, 1.3, 4.0] {
            let h = 1e-6;
            let fd = (zbl_phi(x + h) - zbl_phi(x - h)) / (2.0 * h);
            assert_relative_eq!(zbl_dphi(x), fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn screening_length_nitrogen_carbon() {
        // a_U for N on C: 0.8854 * 0.0529177 / (7^0.23 + 6^0.23) ~ 0.0152 nm.
        let a = screening_length(7.0, 6.0);
        assert!((a - 0.01524).abs() < 2e-4, "a = {a}");
    }

    #[test]
    fn head_on_collision_transfers_lambda_fraction() {
        let pair = PairKinematics::new(7.0, 14.003074, 6.0, 12.011);
        // p = 0: theta -> pi, T -> Lambda E.
        let theta = pair.scattering_angle(1e4, 0.0);
        assert_relative_eq!(theta, std::f64::consts::PI, max_relative = 1e-6);
        let t = pair.recoil_energy(1e4, theta);
        assert_relative_eq!(t, pair.lambda * 1e4, max_relative = 1e-9);
        assert!((pair.lambda - 0.994).abs() < 1e-3);
    }

    #[test]
    fn scattering_angle_decreases_with_impact_parameter() {
        let pair = PairKinematics::new(7.0, 14.003074, 14.0, 28.0855);
        let mut prev = std::f64::consts::PI + 1e-9;
        for i in 0..40 {
            let p = i as f64 * 0.01;
            let theta = pair.scattering_angle(1e4, p);
            assert!(theta <= prev + 1e-9, "theta not decreasing at p = {p}");
            assert!(theta >= 0.0);
            prev = theta;
        }
        // Distant collisions barely deflect.
        assert!(pair.scattering_angle(1e4, 0.4) < 0.05);
    }

    #[test]
    fn scattering_angle_decreases_with_energy() {
        let pair = PairKinematics::new(7.0, 14.003074, 6.0, 12.011);
        let p = 0.05;
        let mut prev = std::f64::consts::PI;
        for e in [500.0, 2e3, 1e4, 5e4] {
            let theta = pair.scattering_angle(e, p);
            assert!(theta < prev, "theta not decreasing at E = {e}");
            prev = theta;
        }
    }

    /// Independent oracle: the classical scattering integral
    /// theta = pi - 2 beta/x0 int_0^1 du / sqrt(1 - phi(x0/u)/((x0/u) eps) - (beta u/x0)^2)
    /// evaluated with the singularity-removing substitution u = cos(pi s/2)
    /// and composite Simpson quadrature.
    fn theta_quadrature(pair: &PairKinematics, e_lab: f64, p_nm: f64) -> f64 {
        let relative_energy = e_lab * pair.relative_factor;
        let eps = relative_energy / pair.v0;
        let beta = p_nm / pair.a;
        if beta == 0.0 {
            return std::f64::consts::PI;
        }
        let x0 = pair.closest_approach(eps, beta);
        let integrand = |s: f64| {
            let u = (std::f64::consts::PI * s / 2.0).cos();
            let x = x0 / u;
            let f = 1.0 - zbl_phi(x) / (x * eps) - beta * beta / (x * x);
            (std::f64::consts::PI / 2.0) * (std::f64::consts::PI * s / 2.0).sin()
                / f.max(1e-300).sqrt()
        };
        let n = 2000;
        let h = 1.0 / n as f64;
        let mut acc = integrand(1e-12) + integrand(1.0 - 1e-12);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * integrand(i as f64 * h);
        }
        let integral = acc * h / 3.0;
        std::f64::consts::PI - 2.0 * beta / x0 * integral
    }

    #[test]
    fn magic_formula_tracks_the_scattering_integral() {
        let pair = PairKinematics::new(7.0, 14.003074, 14.0, 28.0855);
        for e_lab in [300.0, 1e3, 5e3, 1e4, 3e4] {
            for p_nm in [0.002, 0.01, 0.03, 0.06, 0.1] {
                let exact = theta_quadrature(&pair, e_lab, p_nm);
                // Angles below ~0.05 rad transfer under a few eV; the fit is
                // not built for that regime and it cannot matter.
                if exact < 0.05 {
                    continue;
                }
                let magic = pair.scattering_angle(e_lab, p_nm);
                let rel = (magic - exact).abs() / exact;
                assert!(
                    rel < 0.05,
                    "E = {e_lab} eV, p = {p_nm} nm: magic {magic} vs quadrature {exact} ({rel:.3} rel)"
                );
            }
        }
    }

    #[test]
    fn lindhard_scharff_reference_value() {
        // N in diamond at 10 keV: S_e ~ 102 eV A^2 = 1.02 eV nm^2.
        let pair = PairKinematics::new(7.0, 14.0, 6.0, 12.011);
        let s_e = pair.ls_coeff * (1e4f64).sqrt();
        assert!((s_e - 1.02).abs() < 0.03, "S_e = {s_e} eV nm^2");
    }

    #[test]
    fn lab_angle_below_cm_angle_for_heavier_projectile() {
        let pair = PairKinematics::new(7.0, 14.003074, 6.0, 12.011);
        for theta in [0.3, 1.0, 2.0] {
            assert!(pair.lab_angle(theta) < theta);
        }
    }
}
