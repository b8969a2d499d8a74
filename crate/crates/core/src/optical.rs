//! Optical cavity QED and optical-linewidth models.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::coherence::freeze_factor;
use crate::constants::{C, EPS_0, HBAR};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalCavityModel {
    pub q: f64,
    /// Vacuum wavelength, m.
    pub lambda_m: f64,
    pub refractive_n: f64,
    /// Cavity energy decay rate, Hz.
    pub gamma_cav_hz: f64,
    /// Branching ratio into the cavity-coupled transition.
    pub branching_zeta: f64,
}

impl OpticalCavityModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.lambda_m > 0.0 && self.refractive_n > 0.0) {
            return Err(Error::InvalidInput(format!("cavity needs Q, lambda, n > 0: {self:?}")));
        }
        check_zeta("OpticalCavityModel", self.branching_zeta)
    }

    /// `(lambda/n)^3`, m^3.
    pub fn cubic_wavelength(&self) -> f64 {
        (self.lambda_m / self.refractive_n).powi(3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterOptical {
    pub t1_intrinsic_s: f64,
    pub t1_cavity_s: f64,
    pub t2_star_s: f64,
    /// Transition dipole moment, C m.
    pub dipole_mu: f64,
    /// Transition angular frequency, rad/s.
    pub omega_a: f64,
}

impl EmitterOptical {
    pub fn validate(&self) -> Result<()> {
        let all = [self.t1_intrinsic_s, self.t1_cavity_s, self.t2_star_s, self.dipole_mu, self.omega_a];
        if all.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidInput(format!("emitter parameters must be > 0: {self:?}")));
        }
        if self.t1_cavity_s > self.t1_intrinsic_s {
            log::warn!("cavity T1 exceeds intrinsic T1; no Purcell enhancement");
        }
        Ok(())
    }
}

/// Optical broadening parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalLinewidthModel {
    pub gamma0_hz: f64,
    pub gamma_sd_hz: f64,
    pub rate_hz: f64,
    pub gamma_tls_hz: f64,
    pub g_env: f64,
    pub t_bath_k: f64,
}

impl OpticalLinewidthModel {
    pub fn validate(&self) -> Result<()> {
        let rates = [self.gamma0_hz, self.gamma_sd_hz, self.rate_hz, self.gamma_tls_hz];
        if rates.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidInput(format!("linewidth rates must be >= 0: {self:?}")));
        }
        if !(self.t_bath_k > 0.0) {
            return Err(Error::InvalidInput(format!("bath temperature must be > 0, got {}", self.t_bath_k)));
        }
        Ok(())
    }
}

fn check_zeta(op: &'static str, zeta: f64) -> Result<()> {
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(Error::domain(op, format!("branching ratio must lie in (0, 1], got {zeta}")));
    }
    Ok(())
}

/// `FP = (tau0/tau_cav - 1)/zeta`.
pub fn purcell_factor(tau0: f64, tau_cav: f64, zeta: f64) -> Result<f64> {
    check_zeta("purcell_factor", zeta)?;
    if !(tau_cav > 0.0) {
        return Err(Error::domain("purcell_factor", format!("lifetimes must be > 0, got {tau_cav}")));
    }
    if tau_cav >= tau0 {
        return Err(Error::domain(
            "purcell_factor",
            format!("no enhancement: cavity lifetime {tau_cav} s >= free-space lifetime {tau0} s"),
        ));
    }
    Ok((tau0 / tau_cav - 1.0) / zeta)
}

/// Local-field factor `3n^2/(2n^2+1)`.
pub fn local_field_correction(n: f64) -> Result<f64> {
    if !(n > 0.0) {
        return Err(Error::domain("local_field_correction", format!("refractive index must be > 0, got {n}")));
    }
    let n2 = n * n;
    Ok(3.0 * n2 / (2.0 * n2 + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeVolume {
    pub m3: f64,
    /// In units of `(lambda/n)^3`.
    pub cubic_wavelengths: f64,
}

fn volume_prefactor(cavity: &OpticalCavityModel) -> Result<f64> {
    cavity.validate()?;
    let chi = local_field_correction(cavity.refractive_n)?;
    Ok(3.0 * cavity.q * cavity.lambda_m.powi(3) / (4.0 * PI * PI * chi * chi * cavity.refractive_n.powi(3)))
}

/// `Vm = 3 Q lambda^3 / (4 pi^2 chi_L^2 n^3 FP)`.
pub fn mode_volume_from_purcell(fp: f64, cavity: &OpticalCavityModel) -> Result<ModeVolume> {
    if !(fp > 0.0) {
        return Err(Error::domain("mode_volume_from_purcell", format!("Purcell factor must be > 0, got {fp}")));
    }
    let m3 = volume_prefactor(cavity)? / fp;
    Ok(ModeVolume {
        m3,
        cubic_wavelengths: m3 / cavity.cubic_wavelength(),
    })
}

/// Inverse of [`mode_volume_from_purcell`].
pub fn purcell_from_mode_volume(vm_m3: f64, cavity: &OpticalCavityModel) -> Result<f64> {
    if !(vm_m3 > 0.0) {
        return Err(Error::domain("purcell_from_mode_volume", format!("mode volume must be > 0, got {vm_m3}")));
    }
    Ok(volume_prefactor(cavity)? / vm_m3)
}

/// Single-ion coupling `(mu/n) sqrt(omega_a / (2 hbar eps0 Vm))`, s^-1.
///
/// Divide by `2 pi` for an ordinary frequency; quoted values in MHz are
/// sometimes half this number.
pub fn g0_from_mode_volume(mu: f64, n: f64, omega_a: f64, vm_m3: f64) -> Result<f64> {
    if !(mu >= 0.0 && n > 0.0 && omega_a > 0.0 && vm_m3 > 0.0) {
        return Err(Error::domain("g0_from_mode_volume", "inputs must be positive"));
    }
    Ok(mu / n * (omega_a / (2.0 * HBAR * EPS_0 * vm_m3)).sqrt())
}

/// Angular frequency of a vacuum wavelength, rad/s.
pub fn omega_from_wavelength(lambda_m: f64) -> f64 {
    2.0 * PI * C / lambda_m
}

/// Cavity-enhanced lifetime vs emitter-cavity detuning `delta` (Hz).
pub fn purcell_t1_vs_detuning(delta: f64, t1_0: f64, zeta: f64, fp: f64, gamma_cav: f64) -> Result<f64> {
    check_zeta("purcell_t1_vs_detuning", zeta)?;
    if !(gamma_cav > 0.0 && t1_0 > 0.0) {
        return Err(Error::domain("purcell_t1_vs_detuning", "cavity linewidth and T1 must be > 0"));
    }
    let h2 = 0.25 * gamma_cav * gamma_cav;
    let lorentz = h2 / (h2 + delta * delta);
    Ok(t1_0 / (1.0 + zeta * (fp * lorentz - 1.0)))
}

/// Hole linewidth in the Bloch limit, Hz; `omega` is the optical Rabi
/// frequency in rad/s.
pub fn bloch_linewidth(omega: f64, t1: f64, t2_star: f64) -> Result<f64> {
    if !(t1 > 0.0 && t2_star > 0.0) {
        return Err(Error::domain("bloch_linewidth", "T1 and T2* must be > 0"));
    }
    let a = 1.0 / t2_star;
    Ok((a + (a * a + omega * omega * t1 * a).sqrt()) / (2.0 * PI))
}

/// Inverts [`bloch_linewidth`] for T2*.
///
/// With `X = 2 pi Gamma` and `a = 1/T2*` the relation reduces to
/// `a = X^2 / (2X + Omega^2 T1)`, which is always positive.
pub fn t2star_from_linewidth(gamma: f64, omega: f64, t1: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::domain("t2star_from_linewidth", format!("linewidth must be > 0, got {gamma}")));
    }
    if !(t1 > 0.0) {
        return Err(Error::domain("t2star_from_linewidth", format!("T1 must be > 0, got {t1}")));
    }
    let x = 2.0 * PI * gamma;
    let a = x * x / (2.0 * x + omega * omega * t1);
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::domain("t2star_from_linewidth", "no positive root"));
    }
    Ok(1.0 / a)
}

/// `Gamma0 + Gamma_SD sech^2(g mu_B B / 2 k_B T)`, Hz.
pub fn holeburn_b_model(b: f64, model: &OpticalLinewidthModel) -> Result<f64> {
    model.validate()?;
    Ok(model.gamma0_hz + model.gamma_sd_hz * freeze_factor(model.g_env, b, model.t_bath_k))
}

/// Linewidth vs measurement window, combining frozen spectral diffusion and
/// a logarithmic two-level-system term.
pub fn c2_linewidth_model(t_window: f64, t1: f64, b: f64, model: &OpticalLinewidthModel) -> Result<f64> {
    model.validate()?;
    if !(t_window > 0.0) {
        return Err(Error::domain("c2_linewidth_model", format!("window must be > 0, got {t_window}")));
    }
    if t_window > t1 {
        return Err(Error::domain(
            "c2_linewidth_model",
            format!("window {t_window} s exceeds T1 {t1} s"),
        ));
    }
    let sd = model.gamma_sd_hz * freeze_factor(model.g_env, b, model.t_bath_k) * (1.0 - (-model.rate_hz * t_window).exp());
    Ok(model.gamma0_hz + sd + model.gamma_tls_hz * (t1 / t_window).ln())
}

/// Stage transmissions between the emitter and the detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectionChain {
    pub cavity: f64,
    pub fiber: f64,
    pub passive: f64,
    pub detector: f64,
}

/// Product of the stage efficiencies.
pub fn collection_efficiency(chain: &CollectionChain) -> Result<f64> {
    let stages = [
        ("cavity", chain.cavity),
        ("fiber", chain.fiber),
        ("passive", chain.passive),
        ("detector", chain.detector),
    ];
    for (name, v) in stages {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::domain("collection_efficiency", format!("{name} efficiency {v} outside [0, 1]")));
        }
    }
    Ok(stages.iter().map(|(_, v)| v).product())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{K_B, MU_B};
    use approx::assert_relative_eq;

    fn cavity() -> OpticalCavityModel {
        OpticalCavityModel {
            q: 58_000.0,
            lambda_m: 1536.8e-9,
            refractive_n: 1.89,
            gamma_cav_hz: 3.36e9,
            branching_zeta: 0.22,
        }
    }

    #[test]
    fn purcell_examples() {
        assert_relative_eq!(purcell_factor(8.5e-3, 0.14e-3, 0.22).unwrap(), 271.4, epsilon = 0.05);
        assert_relative_eq!(purcell_factor(2.0, 1.0, 1.0).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(
            purcell_factor(8.5e-3, 0.14e-3, 0.11).unwrap(),
            2.0 * purcell_factor(8.5e-3, 0.14e-3, 0.22).unwrap(),
            max_relative = 1e-12
        );
        let err = purcell_factor(1e-3, 1e-3, 0.5).unwrap_err();
        assert!(err.to_string().contains("no enhancement"));
        assert!(purcell_factor(1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn local_field_examples() {
        assert_eq!(local_field_correction(1.0).unwrap(), 1.0);
        assert_relative_eq!(local_field_correction(1.89).unwrap(), 1.316, epsilon = 5e-4);
        assert_relative_eq!(local_field_correction(1e8).unwrap(), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn mode_volume_examples() {
        let v = mode_volume_from_purcell(271.4, &cavity()).unwrap();
        // 3 Q / (4 pi^2 chi^2 FP) with chi = 1.31579
        let chi: f64 = 3.0 * 1.89f64.powi(2) / (2.0 * 1.89f64.powi(2) + 1.0);
        let oracle = 3.0 * 58_000.0 / (4.0 * PI * PI * chi * chi * 271.4);
        assert_relative_eq!(v.cubic_wavelengths, oracle, max_relative = 1e-12);
        assert_relative_eq!(v.cubic_wavelengths, 9.38, epsilon = 0.01);
        assert!((v.cubic_wavelengths - 8.9).abs() / 8.9 < 0.1);
        let doubled = OpticalCavityModel { q: 116_000.0, ..cavity() };
        assert_relative_eq!(mode_volume_from_purcell(271.4, &doubled).unwrap().m3, 2.0 * v.m3, max_relative = 1e-12);
        assert!(mode_volume_from_purcell(1e300, &cavity()).unwrap().m3 < 1e-300);
    }

    #[test]
    fn g0_examples() {
        let c = cavity();
        let vm = 8.9 * c.cubic_wavelength();
        let omega = 2.0 * PI * 195.1e12;
        let g0 = g0_from_mode_volume(9.7e-33, 1.89, omega, vm).unwrap();
        assert_relative_eq!(g0, 1.90e6, max_relative = 5e-3);
        assert_relative_eq!(g0_from_mode_volume(9.7e-33, 1.89, omega, 4.0 * vm).unwrap(), 0.5 * g0, max_relative = 1e-12);
        assert_eq!(g0_from_mode_volume(0.0, 1.89, omega, vm).unwrap(), 0.0);
    }

    #[test]
    fn purcell_detuning_examples() {
        let t = purcell_t1_vs_detuning(0.0, 8.5e-3, 0.22, 271.4, 3.36e9).unwrap();
        assert_relative_eq!(t, 0.14e-3, max_relative = 0.02);
        assert_relative_eq!(t, 0.1405e-3, max_relative = 1e-3);
        let far = purcell_t1_vs_detuning(1e16, 8.5e-3, 0.22, 271.4, 3.36e9).unwrap();
        assert_relative_eq!(far, 8.5e-3 / 0.78, max_relative = 1e-6);
        assert_relative_eq!(purcell_t1_vs_detuning(0.0, 8.5e-3, 0.22, 1.0, 1e9).unwrap(), 8.5e-3, max_relative = 1e-12);
    }

    #[test]
    fn bloch_examples() {
        assert_relative_eq!(bloch_linewidth(0.0, 3e-3, 122e-6).unwrap(), 1.0 / (PI * 122e-6), max_relative = 1e-12);
        assert_relative_eq!(bloch_linewidth(0.0, 3e-3, 122e-6).unwrap(), 2.6e3, epsilon = 0.05e3);
        let g = bloch_linewidth(2.0 * PI * 33e3, 3e-3, 122e-6).unwrap();
        assert_relative_eq!(g, 164.96e3, max_relative = 1e-3);
        assert!((g - 161e3).abs() / 161e3 < 0.05);
        let big = 1e12;
        let asym = big * (3e-3f64 / 122e-6).sqrt() / (2.0 * PI);
        assert_relative_eq!(bloch_linewidth(big, 3e-3, 122e-6).unwrap(), asym, max_relative = 1e-6);
    }

    /// Bisection on the forward model; independent of the closed form.
    fn t2star_oracle(gamma: f64, omega: f64, t1: f64) -> f64 {
        let (mut lo, mut hi) = (1e-12f64, 1.0f64);
        for _ in 0..400 {
            let mid = (lo * hi).sqrt();
            // linewidth decreases with T2*
            if bloch_linewidth(omega, t1, mid).unwrap() > gamma {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo * hi).sqrt()
    }

    #[test]
    fn t2star_examples() {
        let omega = 2.0 * PI * 33e3;
        let t2 = t2star_from_linewidth(161e3, omega, 3e-3).unwrap();
        assert_relative_eq!(t2, t2star_oracle(161e3, omega, 3e-3), max_relative = 1e-9);
        assert_relative_eq!(t2, 128.0e-6, max_relative = 2e-3);
        assert_relative_eq!(t2star_from_linewidth(2.6e3, 0.0, 3e-3).unwrap(), 1.0 / (PI * 2.6e3), max_relative = 1e-12);
        assert!(t2star_from_linewidth(0.0, omega, 3e-3).is_err());
    }

    #[test]
    fn holeburn_examples() {
        let m = OpticalLinewidthModel {
            gamma0_hz: 158.6e3,
            gamma_sd_hz: 635.5e3,
            rate_hz: 0.0,
            gamma_tls_hz: 0.0,
            g_env: 2.02,
            t_bath_k: 0.22,
        };
        assert_relative_eq!(holeburn_b_model(0.0, &m).unwrap(), 794.1e3, max_relative = 1e-9);
        assert_relative_eq!(holeburn_b_model(1e3, &m).unwrap(), 158.6e3, max_relative = 1e-12);
        // arcsech^2(0.5): x = ln(1 + sqrt 2)
        let b_half = (1.0 + 2f64.sqrt()).ln() * 2.0 * K_B * 0.22 / (2.02 * MU_B);
        assert_relative_eq!(b_half, 0.286, epsilon = 1e-3);
        let half = holeburn_b_model(b_half, &m).unwrap();
        assert_relative_eq!(half, 158.6e3 + 0.5 * 635.5e3, max_relative = 1e-12);
    }

    #[test]
    fn c2_linewidth_examples() {
        let m = OpticalLinewidthModel {
            gamma0_hz: 0.88e6,
            gamma_sd_hz: 4.32e6,
            rate_hz: 0.83e3,
            gamma_tls_hz: 0.2e6,
            g_env: 1.2,
            t_bath_k: 0.1,
        };
        let at_t1 = c2_linewidth_model(3e-3, 3e-3, 0.0, &m).unwrap();
        assert_relative_eq!(at_t1, 0.88e6 + 4.32e6 * (1.0 - (-0.83e3 * 3e-3f64).exp()), max_relative = 1e-12);
        let no_tls = OpticalLinewidthModel { gamma_tls_hz: 0.0, ..m };
        let g = c2_linewidth_model(1.3e-3, 3e-3, 0.0, &no_tls).unwrap();
        assert_relative_eq!(g, 3.73e6, epsilon = 0.01e6);
        let flat = OpticalLinewidthModel {
            gamma_sd_hz: 0.0,
            gamma_tls_hz: 0.0,
            ..m
        };
        for t in [1e-6, 1e-4, 1e-3] {
            assert_eq!(c2_linewidth_model(t, 3e-3, 0.1, &flat).unwrap(), 0.88e6);
        }
        assert!(c2_linewidth_model(4e-3, 3e-3, 0.0, &m).is_err());
    }

    #[test]
    fn collection_examples() {
        let ones = CollectionChain {
            cavity: 1.0,
            fiber: 1.0,
            passive: 1.0,
            detector: 1.0,
        };
        assert_eq!(collection_efficiency(&ones).unwrap(), 1.0);
        let measured = CollectionChain {
            cavity: 0.04,
            fiber: 0.51,
            passive: 0.724,
            detector: 0.70,
        };
        assert_relative_eq!(collection_efficiency(&measured).unwrap(), 0.0103, epsilon = 5e-5);
        assert_eq!(collection_efficiency(&CollectionChain { fiber: 0.0, ..measured }).unwrap(), 0.0);
        assert!(collection_efficiency(&CollectionChain { detector: 1.2, ..measured }).is_err());
    }

    #[test]
    fn optical_and_spin_linewidths_agree() {
        use crate::coherence::{effective_linewidth, SpectralDiffusionModel};
        let optical = bloch_linewidth(0.0, 3e-3, 122e-6).unwrap();
        let spin = effective_linewidth(
            0.0,
            10e-3,
            &SpectralDiffusionModel {
                gamma0_hz: 700.0,
                gamma_sd_hz: 4400.0,
                rate_hz: 287.0,
                t1_s: 0.8,
            },
        )
        .unwrap();
        assert!((optical - spin).abs() < 500.0, "{optical} vs {spin}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn bloch_roundtrip(omega in 0.0f64..1e7, t1 in 1e-5f64..1e-1, t2 in 1e-7f64..1e-3) {
                let g = bloch_linewidth(omega, t1, t2).unwrap();
                let back = t2star_from_linewidth(g, omega, t1).unwrap();
                prop_assert!(((back - t2) / t2).abs() < 1e-9);
            }

            #[test]
            fn bloch_monotone_in_rabi(omega in 0.0f64..1e7, d in 1.0f64..1e6) {
                prop_assert!(bloch_linewidth(omega + d, 3e-3, 122e-6).unwrap() > bloch_linewidth(omega, 3e-3, 122e-6).unwrap());
            }

            #[test]
            fn detuning_even_and_monotone(d in 0.0f64..1e11, dd in 1.0f64..1e10) {
                let t = |x: f64| purcell_t1_vs_detuning(x, 8.5e-3, 0.22, 271.4, 3.36e9).unwrap();
                prop_assert_eq!(t(d), t(-d));
                prop_assert!(t(d + dd) >= t(d));
            }

            #[test]
            fn holeburn_even(b in 0.0f64..2.0) {
                let m = OpticalLinewidthModel {
                    gamma0_hz: 158.6e3, gamma_sd_hz: 635.5e3, rate_hz: 0.0,
                    gamma_tls_hz: 0.0, g_env: 2.02, t_bath_k: 0.22,
                };
                prop_assert_eq!(holeburn_b_model(b, &m).unwrap(), holeburn_b_model(-b, &m).unwrap());
            }

            #[test]
            fn mode_volume_roundtrip(fp in 1e-2f64..1e5) {
                let c = cavity();
                let v = mode_volume_from_purcell(fp, &c).unwrap();
                let back = purcell_from_mode_volume(v.m3, &c).unwrap();
                prop_assert!(((back - fp) / fp).abs() < 1e-12);
            }
        }
    }
}
