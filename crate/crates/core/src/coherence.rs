//! Spin coherence: echo decays, spectral diffusion, thermal dephasing,
//! instantaneous diffusion and magnetic-noise budgets.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{H, K_B, MU_0, MU_B};
use crate::quadrature::{integrate_breakpoints, QuadratureOptions};
use crate::{Error, Result};

/// Hahn-echo envelope `A0 exp(-(2t/T2)^n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StretchedDecay {
    pub a0: f64,
    pub t2_s: f64,
    pub stretch_n: f64,
}

impl StretchedDecay {
    pub fn new(a0: f64, t2_s: f64, stretch_n: f64) -> Result<Self> {
        if !(t2_s > 0.0 && stretch_n > 0.0) {
            return Err(Error::InvalidInput(format!(
                "stretched decay needs T2 > 0 and n > 0 (got {t2_s}, {stretch_n})"
            )));
        }
        Ok(Self { a0, t2_s, stretch_n })
    }

    /// Partial derivatives with respect to `(a0, t2, n)` at delay `t`.
    pub fn gradient(&self, t: f64) -> [f64; 3] {
        let x = 2.0 * t / self.t2_s;
        if x <= 0.0 {
            return [1.0, 0.0, 0.0];
        }
        let y = x.powf(self.stretch_n);
        let e = (-y).exp();
        [
            e,
            self.a0 * e * self.stretch_n * y / self.t2_s,
            -self.a0 * e * y * x.ln(),
        ]
    }
}

/// Echo amplitude at pulse spacing `t` (echo time `2t`).
pub fn hahn_decay(t: f64, model: &StretchedDecay) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain("hahn_decay", format!("delay must be >= 0, got {t}")));
    }
    Ok(model.a0 * (-(2.0 * t / model.t2_s).powf(model.stretch_n)).exp())
}

/// Saturation-recovery curve `A0 (1 - exp(-t/T1))`.
pub fn saturation_recovery(t: f64, a0: f64, t1: f64) -> f64 {
    a0 * (1.0 - (-t / t1).exp())
}

/// Sudden-jump spectral diffusion parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralDiffusionModel {
    /// Linewidth at short times, Hz.
    pub gamma0_hz: f64,
    /// Spectral diffusion linewidth, Hz.
    pub gamma_sd_hz: f64,
    /// Bath flip rate, Hz.
    pub rate_hz: f64,
    /// Population lifetime, s (infinite disables the waiting-time decay).
    pub t1_s: f64,
}

impl SpectralDiffusionModel {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.gamma0_hz, self.gamma_sd_hz, self.rate_hz, self.t1_s]
            .iter()
            .all(|v| *v >= 0.0);
        if !ok {
            return Err(Error::InvalidInput(format!("spectral diffusion parameters must be >= 0: {self:?}")));
        }
        Ok(())
    }
}

fn check_delays(op: &'static str, tau: f64, tw: f64) -> Result<()> {
    if !(tau >= 0.0 && tw >= 0.0) {
        return Err(Error::domain(op, format!("delays must be >= 0 (tau = {tau}, T_W = {tw})")));
    }
    Ok(())
}

/// `Gamma0 + Gamma_SD/2 (R tau + 1 - exp(-R T_W))`, Hz.
pub fn effective_linewidth(tau: f64, tw: f64, model: &SpectralDiffusionModel) -> Result<f64> {
    check_delays("effective_linewidth", tau, tw)?;
    let r = model.rate_hz;
    Ok(model.gamma0_hz + 0.5 * model.gamma_sd_hz * (r * tau + 1.0 - (-r * tw).exp()))
}

/// Three-pulse echo ratio `A/A0 = exp(-(T_W/T1 + 2 pi tau Gamma_eff))`.
pub fn stimulated_echo(tau: f64, tw: f64, model: &SpectralDiffusionModel) -> Result<f64> {
    let g = effective_linewidth(tau, tw, model)?;
    let lifetime = if model.t1_s.is_infinite() { 0.0 } else { tw / model.t1_s };
    Ok((-(lifetime + 2.0 * PI * tau * g)).exp())
}

/// Spectral-diffusion-limited coherence time `2 / sqrt(pi Gamma_SD R)`.
pub fn sd_limited_t2(gamma_sd: f64, rate: f64) -> Result<f64> {
    if !(gamma_sd > 0.0 && rate > 0.0) {
        return Err(Error::domain(
            "sd_limited_t2",
            format!("Gamma_SD and R must be > 0 (got {gamma_sd}, {rate})"),
        ));
    }
    Ok(2.0 / (PI * gamma_sd * rate).sqrt())
}

/// Temperature-dependence parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalModel {
    /// Zeeman temperature `h f / k_B`, K.
    pub t_ze_k: f64,
    /// Stage-to-spin temperature correction factor.
    pub c_corr: f64,
    /// Bath-coupling strength, Hz.
    pub xi_hz: f64,
    /// Temperature-independent dephasing rate, Hz.
    pub gamma0_hz: f64,
}

impl ThermalModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_ze_k > 0.0 && self.c_corr > 0.0) {
            return Err(Error::InvalidInput(format!("thermal model needs T_Ze > 0 and C > 0: {self:?}")));
        }
        Ok(())
    }
}

/// `h f / k_B`, K.
pub fn zeeman_temperature(f: f64) -> f64 {
    H * f / K_B
}

/// `sech^2(x)` without overflow for large `|x|`.
pub fn sech_squared(x: f64) -> f64 {
    let e = (-2.0 * x.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

/// `1 - tanh(x)` without cancellation for large `x`.
pub fn one_minus_tanh(x: f64) -> f64 {
    2.0 / ((2.0 * x).exp() + 1.0)
}

/// Bath freezing factor `sech^2(g mu_B B / (2 k_B T))`.
///
/// Shared by the spin and optical broadening models.
pub fn freeze_factor(g_env: f64, b: f64, t_bath: f64) -> f64 {
    sech_squared(g_env * MU_B * b / (2.0 * K_B * t_bath))
}

/// Echo amplitude `tanh(T_Ze / (C T))` relative to full polarization.
pub fn polarization_amplitude(t: f64, model: &ThermalModel) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain("polarization_amplitude", format!("temperature must be > 0, got {t}")));
    }
    Ok((model.t_ze_k / (model.c_corr * t)).tanh())
}

/// Dephasing rate `Gamma0 + xi / ((1 + e^{T_Ze/x})(1 + e^{-T_Ze/x}))` with `x = C T`.
///
/// Evaluated as `Gamma0 + (xi/4) sech^2(T_Ze / 2x)`, which is identical and
/// stays finite at millikelvin temperatures.
pub fn dephasing_vs_t(t: f64, model: &ThermalModel) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain("dephasing_vs_t", format!("temperature must be > 0, got {t}")));
    }
    let x = model.c_corr * t;
    Ok(model.gamma0_hz + 0.25 * model.xi_hz * sech_squared(model.t_ze_k / (2.0 * x)))
}

/// Spin polarization `tanh(h f / 2 k_B T)`.
pub fn thermal_polarization(f: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain("thermal_polarization", format!("temperature must be > 0, got {t}")));
    }
    Ok((H * f / (2.0 * K_B * t)).tanh())
}

/// `1 - tanh(h f / 2 k_B T)`, accurate when the polarization is near unity.
pub fn polarization_deficit(f: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain("polarization_deficit", format!("temperature must be > 0, got {t}")));
    }
    Ok(one_minus_tanh(H * f / (2.0 * K_B * t)))
}

/// Gyromagnetic ratio `g mu_B / h`, Hz/T.
pub fn gyromagnetic_hz_per_t(g: f64) -> f64 {
    g * MU_B / H
}

/// Result of the Hahn-vs-CPMG magnetic noise estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudget {
    /// RMS field noise with `Gamma_res = 1/(pi T2_cpmg)`, T.
    pub delta_b_t: f64,
    /// RMS field noise with `Gamma_res = 1/T2_cpmg`, T; `None` when that
    /// convention makes the residual exceed the Hahn rate.
    pub delta_b_unit_convention_t: Option<f64>,
    /// Transition sensitivity `g mu_B / h`, Hz/T.
    pub sensitivity_hz_per_t: f64,
    /// `1/(pi T2_hahn)`, Hz.
    pub hahn_rate_hz: f64,
    /// `1/(pi T2_cpmg)`, Hz.
    pub residual_rate_hz: f64,
    /// `1/T2_cpmg`, Hz.
    pub residual_rate_unit_convention_hz: f64,
}

/// Field noise from `1/(pi T2_hahn) = S1 dB + Gamma_res`.
pub fn noise_budget(t2_hahn: f64, t2_cpmg: f64, g_eff: f64) -> Result<NoiseBudget> {
    if !(t2_hahn > 0.0 && t2_cpmg > 0.0) {
        return Err(Error::domain("noise_budget", "coherence times must be > 0"));
    }
    if !(g_eff > 0.0) {
        return Err(Error::domain("noise_budget", format!("g must be > 0, got {g_eff}")));
    }
    if t2_hahn > t2_cpmg {
        log::warn!("T2_hahn ({t2_hahn} s) exceeds T2_cpmg ({t2_cpmg} s)");
    }
    let s1 = gyromagnetic_hz_per_t(g_eff);
    let hahn = 1.0 / (PI * t2_hahn);
    let residual = 1.0 / (PI * t2_cpmg);
    let residual_unit = 1.0 / t2_cpmg;
    if hahn < residual {
        return Err(Error::domain(
            "noise_budget",
            format!("residual rate exceeds Hahn rate ({residual:.4e} Hz > {hahn:.4e} Hz)"),
        ));
    }
    let unit = hahn - residual_unit;
    Ok(NoiseBudget {
        delta_b_t: (hahn - residual) / s1,
        delta_b_unit_convention_t: (unit >= 0.0).then(|| unit / s1),
        sensitivity_hz_per_t: s1,
        hahn_rate_hz: hahn,
        residual_rate_hz: residual,
        residual_rate_unit_convention_hz: residual_unit,
    })
}

fn id_prefactor(g_eff: f64) -> f64 {
    let gamma = gyromagnetic_hz_per_t(g_eff);
    2.0 * PI * PI * MU_0 * H * gamma * gamma / (9.0 * 3f64.sqrt())
}

/// Effective spin density `9 sqrt(3) / (2 pi^2 mu0 h gamma^2 T2)` that
/// would limit coherence to `t2_cpmg`, m^-3.
pub fn id_effective_density(t2_cpmg: f64, g_eff: f64) -> Result<f64> {
    if !(t2_cpmg > 0.0) {
        return Err(Error::domain("id_effective_density", format!("T2 must be > 0, got {t2_cpmg}")));
    }
    Ok(1.0 / (id_prefactor(g_eff) * t2_cpmg))
}

/// Instantaneous-diffusion decoherence rate, Hz.
pub fn id_rate(density: f64, g_eff: f64, flip_prob: f64) -> f64 {
    id_prefactor(g_eff) * density * flip_prob
}

/// Instantaneous-diffusion-limited T2; `None` when no spins are flipped.
pub fn id_limited_t2(density: f64, g_eff: f64, flip_prob: f64) -> Result<Option<f64>> {
    if !(0.0..=1.0).contains(&flip_prob) {
        return Err(Error::domain("id_limited_t2", format!("flip probability must lie in [0, 1], got {flip_prob}")));
    }
    if !(density >= 0.0) {
        return Err(Error::domain("id_limited_t2", format!("density must be >= 0, got {density}")));
    }
    let rate = id_rate(density, g_eff, flip_prob);
    Ok((rate > 0.0).then(|| 1.0 / rate))
}

/// Inhomogeneous lineshape used for ensemble averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lineshape {
    #[default]
    Lorentzian,
    Gaussian,
}

impl std::str::FromStr for Lineshape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lorentzian" => Ok(Lineshape::Lorentzian),
            "gaussian" => Ok(Lineshape::Gaussian),
            other => Err(Error::InvalidInput(format!("unknown lineshape `{other}`"))),
        }
    }
}

/// Flip probability of a resonant-pi pulse for a spin detuned by `delta`
/// (both in Hz): `W^2/(W^2+D^2) sin^2(pi sqrt(W^2+D^2) / (2W))`.
pub fn rabi_flip_probability(omega: f64, delta: f64) -> f64 {
    let w2 = omega * omega + delta * delta;
    let s = (PI * w2.sqrt() / (2.0 * omega)).sin();
    omega * omega / w2 * s * s
}

/// Flip probability averaged over a normalized inhomogeneous line of width `fwhm`.
pub fn average_flip_probability(omega: f64, fwhm: f64, lineshape: Lineshape) -> Result<f64> {
    if !(omega > 0.0 && fwhm > 0.0) {
        return Err(Error::domain(
            "average_flip_probability",
            format!("Rabi frequency and linewidth must be > 0 (got {omega}, {fwhm})"),
        ));
    }
    // absolute truncation budget for the Lorentzian tail
    const TAIL: f64 = 1e-14;
    let (weight, cutoff, scale): (Box<dyn Fn(f64) -> f64>, f64, f64) = match lineshape {
        Lineshape::Lorentzian => {
            let g = 0.5 * fwhm;
            // tail beyond D contributes at most 2 g W^2 / (3 pi D^3)
            let tail = (2.0 * g * omega * omega / (3.0 * PI * TAIL)).cbrt();
            (
                Box::new(move |d: f64| g / (PI * (g * g + d * d))),
                tail.max(50.0 * g).max(10.0 * omega),
                g,
            )
        }
        Lineshape::Gaussian => {
            let s = fwhm / (2.0 * (2.0 * 2f64.ln()).sqrt());
            let norm = 1.0 / ((2.0 * PI).sqrt() * s);
            (
                Box::new(move |d: f64| norm * (-0.5 * (d / s) * (d / s)).exp()),
                12.0 * s,
                s,
            )
        }
    };
    // panels of at most half an oscillation period and a fraction of the line width
    let width = omega.min(0.5 * scale);
    let n = ((cutoff / width).ceil() as usize).clamp(1, 200_000);
    let step = cutoff / n as f64;
    let breaks: Vec<f64> = (0..=n).map(|i| if i == n { cutoff } else { step * i as f64 }).collect();
    let opts = QuadratureOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-10,
        max_intervals: 400_000,
    };
    let half = integrate_breakpoints(|d| rabi_flip_probability(omega, d) * weight(d), &breaks, &opts)?;
    Ok((2.0 * half.value).clamp(f64::MIN_POSITIVE, 1.0))
}

/// Purcell-enhanced spin relaxation rate `4 kappa g^2 / (kappa^2 + delta^2)`, Hz.
pub fn purcell_spin_rate(g_single: f64, kappa: f64, detuning: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::domain("purcell_spin_rate", format!("kappa must be > 0, got {kappa}")));
    }
    Ok(4.0 * kappa * g_single * g_single / (kappa * kappa + detuning * detuning))
}

/// Reference operating point for direct-phonon scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhononReference {
    pub t1_s: f64,
    pub b_t: f64,
    pub f_hz: f64,
    pub temperature_k: f64,
}

/// Scales a direct-process T1 (rate `~ B^5 coth(h f / 2 k_B T)`) to a new
/// field, frequency and temperature.
pub fn direct_phonon_scaling(reference: &PhononReference, b: f64, f: f64, t: f64) -> Result<f64> {
    let all = [
        reference.t1_s,
        reference.b_t,
        reference.f_hz,
        reference.temperature_k,
        b,
        f,
        t,
    ];
    if all.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::domain("direct_phonon_scaling", "all inputs must be > 0"));
    }
    let coth = |f: f64, t: f64| 1.0 / (H * f / (2.0 * K_B * t)).tanh();
    Ok(reference.t1_s * (reference.b_t / b).powi(5) * coth(reference.f_hz, reference.temperature_k) / coth(f, t))
}

/// Dipolar coupling `h mu0 gamma1 gamma2 n / (4 pi)` between two spin species, Hz.
pub fn dipolar_coupling(g1: f64, g2: f64, density: f64) -> Result<f64> {
    if !(density >= 0.0) {
        return Err(Error::domain("dipolar_coupling", format!("density must be >= 0, got {density}")));
    }
    Ok(H * MU_0 * gyromagnetic_hz_per_t(g1) * gyromagnetic_hz_per_t(g2) * density / (4.0 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::Y2O3_CATION_DENSITY;
    use approx::assert_relative_eq;

    fn sd() -> SpectralDiffusionModel {
        SpectralDiffusionModel {
            gamma0_hz: 700.0,
            gamma_sd_hz: 4400.0,
            rate_hz: 287.0,
            t1_s: 0.8,
        }
    }

    #[test]
    fn hahn_decay_examples() {
        let m = StretchedDecay::new(2.5, 0.18e-3, 1.18).unwrap();
        assert_relative_eq!(hahn_decay(0.09e-3, &m).unwrap(), 2.5 / std::f64::consts::E, max_relative = 1e-12);
        assert_eq!(hahn_decay(0.0, &m).unwrap(), 2.5);
        let unit = StretchedDecay::new(1.0, 0.18e-3, 1.18).unwrap();
        assert_relative_eq!(hahn_decay(0.18e-3, &unit).unwrap(), (-(2f64.powf(1.18))).exp(), max_relative = 1e-12);
        assert_relative_eq!(hahn_decay(0.18e-3, &unit).unwrap(), 0.1037, epsilon = 1e-4);
        assert!(hahn_decay(-1.0, &unit).is_err());
        assert!(StretchedDecay::new(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn unit_stretch_is_exponential() {
        let m = StretchedDecay::new(1.3, 1e-3, 1.0).unwrap();
        for t in [0.0, 1e-4, 7e-4, 3e-3] {
            assert!((hahn_decay(t, &m).unwrap() - 1.3 * (-2.0 * t / 1e-3).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn effective_linewidth_examples() {
        let m = sd();
        assert_eq!(effective_linewidth(0.0, 0.0, &m).unwrap(), 700.0);
        let g = effective_linewidth(0.0, 10e-3, &m).unwrap();
        assert_relative_eq!(g, 700.0 + 2200.0 * (1.0 - (-2.87f64).exp()), max_relative = 1e-12);
        assert!((g - 2.78e3).abs() < 10.0);
        let far = effective_linewidth(20e-6, 1e3, &m).unwrap();
        assert_relative_eq!(far, 700.0 + 2200.0 * (1.0 + 287.0 * 20e-6), max_relative = 1e-12);
        assert!(effective_linewidth(-1.0, 0.0, &m).is_err());
    }

    #[test]
    fn stimulated_echo_examples() {
        let m = sd();
        assert_eq!(stimulated_echo(0.0, 0.0, &m).unwrap(), 1.0);
        // oracle: Gamma_eff = 700 + 2200 (0.01435 + 1 - e^{-2.87}) = 2806.83 Hz
        let expected = (-(0.0125 + 2.0 * PI * 5e-5 * 2806.832)).exp();
        assert_relative_eq!(stimulated_echo(50e-6, 10e-3, &m).unwrap(), expected, max_relative = 1e-6);
        assert_relative_eq!(stimulated_echo(50e-6, 10e-3, &m).unwrap(), 0.4089, epsilon = 1e-4);
        let plateau = SpectralDiffusionModel { t1_s: f64::INFINITY, ..m };
        let a = stimulated_echo(10e-6, 1.0, &plateau).unwrap();
        let b = stimulated_echo(10e-6, 2.0, &plateau).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn sd_limited_t2_examples() {
        let t2 = sd_limited_t2(4400.0, 287.0).unwrap();
        assert_relative_eq!(t2, 1.00e-3, max_relative = 0.01);
        assert_relative_eq!(sd_limited_t2(4.0 * 4400.0, 287.0).unwrap(), 0.5 * t2, max_relative = 1e-12);
        assert_relative_eq!(sd_limited_t2(1.0 / PI, 1.0 / PI).unwrap(), 2.0 * PI.sqrt(), max_relative = 1e-12);
        assert!(sd_limited_t2(0.0, 1.0).is_err());
    }

    #[test]
    fn sd_limited_t2_unit_case() {
        // Gamma_SD = R = 1/pi makes pi Gamma_SD R = 1/pi; the unit case is Gamma_SD R = 1/pi
        assert_relative_eq!(sd_limited_t2(1.0, 1.0 / PI).unwrap(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn thermal_examples() {
        let m = ThermalModel {
            t_ze_k: zeeman_temperature(5.81e9),
            c_corr: 1.0,
            xi_hz: 96.8e3,
            gamma0_hz: 2.9e3,
        };
        assert_relative_eq!(m.t_ze_k, 0.2788, max_relative = 1e-3);
        assert_relative_eq!(polarization_amplitude(1e-6, &m).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(polarization_amplitude(m.t_ze_k, &m).unwrap(), 1f64.tanh(), epsilon = 1e-15);
        assert!(polarization_amplitude(0.0, &m).is_err());

        assert_relative_eq!(dephasing_vs_t(1e-6, &m).unwrap(), 2.9e3, epsilon = 1e-9);
        assert_relative_eq!(dephasing_vs_t(1e6, &m).unwrap(), 27.1e3, max_relative = 1e-3);
        let e = std::f64::consts::E;
        let at = 2.9e3 + 96.8e3 / ((1.0 + e) * (1.0 + 1.0 / e));
        assert_relative_eq!(dephasing_vs_t(m.t_ze_k, &m).unwrap(), at, max_relative = 1e-12);
        assert_relative_eq!((1.0 + e) * (1.0 + 1.0 / e), 5.086, epsilon = 1e-3);
    }

    #[test]
    fn dephasing_limits_hold_for_any_correction() {
        for c in [0.5, 1.45, 3.0] {
            let m = ThermalModel {
                t_ze_k: 0.34,
                c_corr: c,
                xi_hz: 96.8e3,
                gamma0_hz: 2.9e3,
            };
            assert!((dephasing_vs_t(1e-6, &m).unwrap() - m.gamma0_hz).abs() < 1e-6 * m.xi_hz);
            assert!((dephasing_vs_t(1e6, &m).unwrap() - (m.gamma0_hz + m.xi_hz / 4.0)).abs() < 1e-6 * m.xi_hz);
        }
    }

    #[test]
    fn polarization_examples() {
        let f = 5.8e9;
        let t_one = H * f / (2.0 * K_B);
        assert_relative_eq!(thermal_polarization(f, t_one).unwrap(), 1f64.tanh(), max_relative = 1e-12);
        // x = h f / (2 k_B T) = 11.13 at 12.5 mK
        let deficit = polarization_deficit(f, 12.5e-3).unwrap();
        assert_relative_eq!(deficit, 4.265e-10, max_relative = 1e-3);
        assert!(thermal_polarization(f, 1e9).unwrap() < 1e-9);
        assert!(thermal_polarization(f, 0.0).is_err());
    }

    #[test]
    fn noise_budget_examples() {
        let nb = noise_budget(0.38e-3, 1.14e-3, 3.2).unwrap();
        assert_relative_eq!(nb.delta_b_t, 12.47e-9, max_relative = 2e-3);
        assert!(nb.delta_b_t > 11e-9 && nb.delta_b_t < 13e-9);
        assert!(nb.delta_b_unit_convention_t.is_none());
        assert!(noise_budget(1e-3, 1e-3, 3.2).unwrap().delta_b_t.abs() < 1e-20);
        let doubled = noise_budget(0.38e-3, 1.14e-3, 6.4).unwrap();
        assert_relative_eq!(doubled.delta_b_t, 0.5 * nb.delta_b_t, max_relative = 1e-12);
        let err = noise_budget(2e-3, 1e-3, 3.2).unwrap_err();
        assert!(err.to_string().contains("residual rate exceeds Hahn rate"));
        let wide = noise_budget(0.1e-3, 1.14e-3, 3.2).unwrap();
        assert!(wide.delta_b_unit_convention_t.unwrap() > 0.0);
    }

    #[test]
    fn instantaneous_diffusion_examples() {
        let n = id_effective_density(1.14e-3, 3.2).unwrap();
        // 9 sqrt3 / (2 pi^2 mu0 h gamma^2 T2), gamma = 3.2 * 13.996 GHz/T
        assert_relative_eq!(n * 1e-6, 4.147e14, max_relative = 2e-3);
        assert_relative_eq!(id_effective_density(2.28e-3, 3.2).unwrap(), 0.5 * n, max_relative = 1e-12);
        assert_relative_eq!(id_effective_density(1.14e-3, 6.4).unwrap(), 0.25 * n, max_relative = 1e-12);

        assert_eq!(id_limited_t2(1e23, 3.2, 0.0).unwrap(), None);
        let t2 = id_limited_t2(3.29e23, 3.2, 0.016).unwrap().unwrap();
        assert_relative_eq!(t2, 89.8e-6, max_relative = 5e-3);
        // rate(n_eff(T2)) * p = p / T2
        let rate = id_rate(n, 3.2, 0.3);
        assert_relative_eq!(rate, 0.3 / 1.14e-3, max_relative = 1e-12);
        assert!(id_limited_t2(1e23, 3.2, 1.5).is_err());
    }

    #[test]
    fn flip_probability_limits() {
        assert_relative_eq!(rabi_flip_probability(1e6, 0.0), 1.0, epsilon = 1e-15);
        let narrow = average_flip_probability(1e6, 1e3, Lineshape::Lorentzian).unwrap();
        assert!(narrow > 0.99 && narrow <= 1.0, "{narrow}");
        let narrow_g = average_flip_probability(1e6, 1e3, Lineshape::Gaussian).unwrap();
        assert!(narrow_g > 0.999, "{narrow_g}");
        assert!(average_flip_probability(0.0, 1e6, Lineshape::Gaussian).is_err());
    }

    #[test]
    fn flip_probability_scales_with_rabi_over_width() {
        for shape in [Lineshape::Lorentzian, Lineshape::Gaussian] {
            let a = average_flip_probability(0.78e6, 100e6, shape).unwrap();
            let b = average_flip_probability(0.78e6, 1000e6, shape).unwrap();
            assert_relative_eq!(a / b, 10.0, max_relative = 0.02);
        }
    }

    #[test]
    fn lineshapes_agree_within_factor_two() {
        for ratio in [10.0, 30.0, 100.0, 300.0, 1000.0] {
            let l = average_flip_probability(1e6, ratio * 1e6, Lineshape::Lorentzian).unwrap();
            let g = average_flip_probability(1e6, ratio * 1e6, Lineshape::Gaussian).unwrap();
            assert!(l > 0.0 && l <= 1.0 && g > 0.0 && g <= 1.0);
            assert!(l / g < 2.0 && g / l < 2.0, "ratio {ratio}: {l} vs {g}");
        }
    }

    #[test]
    fn purcell_spin_rate_examples() {
        let r = purcell_spin_rate(128.0, 1.94e6, 0.0).unwrap();
        assert_relative_eq!(r, 0.0338, epsilon = 1e-4);
        let k = 1.94e6;
        assert_relative_eq!(purcell_spin_rate(128.0, k, k).unwrap(), 2.0 * 128.0f64.powi(2) / k, max_relative = 1e-12);
        assert_eq!(purcell_spin_rate(0.0, k, 0.0).unwrap(), 0.0);
        assert!(purcell_spin_rate(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn direct_phonon_examples() {
        let reference = PhononReference {
            t1_s: 3.4,
            b_t: 0.113,
            f_hz: 5.81e9,
            temperature_k: 0.01,
        };
        assert_relative_eq!(direct_phonon_scaling(&reference, 0.113, 5.81e9, 0.01).unwrap(), 3.4, max_relative = 1e-12);
        // deep in the low-temperature limit coth -> 1
        let cold = PhononReference {
            temperature_k: 1e-4,
            ..reference
        };
        let t1 = direct_phonon_scaling(&cold, 0.0565, 5.81e9, 1e-4).unwrap();
        assert_relative_eq!(t1 / 3.4, 32.0, max_relative = 1e-9);
        let ratio = direct_phonon_scaling(&cold, 0.011, 5.81e9, 1e-4).unwrap() / 3.4;
        assert_relative_eq!(ratio, (113.0f64 / 11.0).powi(5), max_relative = 1e-9);
        assert!(direct_phonon_scaling(&reference, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn dipolar_coupling_examples() {
        assert_eq!(dipolar_coupling(3.2, 3.8, 0.0).unwrap(), 0.0);
        let n = 81.4e-6 * Y2O3_CATION_DENSITY;
        let nu = dipolar_coupling(3.2, 3.8, n).unwrap();
        assert_relative_eq!(nu, 342e3, max_relative = 5e-3);
        assert!((nu - 295e3).abs() / 295e3 < 0.2);
        assert_relative_eq!(dipolar_coupling(3.2, 3.8, 2.0 * n).unwrap(), 2.0 * nu, max_relative = 1e-12);
    }

    #[test]
    fn sech_squared_is_stable() {
        assert_eq!(sech_squared(0.0), 1.0);
        assert_eq!(sech_squared(1e4), 0.0);
        assert_relative_eq!(sech_squared(0.881_373_587), 0.5, max_relative = 1e-8);
        assert_relative_eq!(one_minus_tanh(0.3), 1.0 - 0.3f64.tanh(), max_relative = 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn linewidth_monotone(tau in 0.0f64..1e-3, dtau in 0.0f64..1e-3, tw in 0.0f64..0.1, dtw in 0.0f64..0.1) {
                let m = sd();
                let base = effective_linewidth(tau, tw, &m).unwrap();
                prop_assert!(effective_linewidth(tau + dtau, tw, &m).unwrap() >= base);
                prop_assert!(effective_linewidth(tau, tw + dtw, &m).unwrap() >= base - 1e-12);
            }

            #[test]
            fn noise_budget_monotonicity(h in 0.1e-3f64..1e-3, dh in 1e-6f64..1e-4, c in 1.2e-3f64..5e-3, dc in 1e-6f64..1e-3) {
                let base = noise_budget(h, c, 3.2).unwrap().delta_b_t;
                prop_assert!(noise_budget(h + dh, c, 3.2).unwrap().delta_b_t < base);
                prop_assert!(noise_budget(h, c + dc, 3.2).unwrap().delta_b_t > base);
            }
        }
    }
}
