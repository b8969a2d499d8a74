//! Superconducting resonator response and spin-ensemble coupling.
//!
//! Linewidths, couplings and detunings in this module are ordinary
//! frequencies (Hz), never angular. In particular the spin detuning is
//! `Delta = g mu_B (B - B0) / h` so that it shares units with `gamma_s`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{H, MU_B};
use crate::{Error, Result};

/// LC resonator with Fano-like asymmetry and kinetic-inductance drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorModel {
    /// Resonance frequency, Hz.
    pub f0_hz: f64,
    pub qi: f64,
    pub qe: f64,
    /// Asymmetry quality factor; `f64::INFINITY` for a symmetric dip.
    pub q_alpha: f64,
    /// Quadratic kinetic-inductance coefficient, Hz/T^2.
    pub kinetic_c_hz_per_t2: f64,
}

impl ResonatorModel {
    pub fn new(f0_hz: f64, qi: f64, qe: f64) -> Result<Self> {
        let m = Self {
            f0_hz,
            qi,
            qe,
            q_alpha: f64::INFINITY,
            kinetic_c_hz_per_t2: 0.0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0_hz > 0.0 && self.qi > 0.0 && self.qe > 0.0) {
            return Err(Error::InvalidInput(format!(
                "resonator needs f0, Qi, Qe > 0 (got {}, {}, {})",
                self.f0_hz, self.qi, self.qe
            )));
        }
        if self.q_alpha == 0.0 || self.q_alpha.is_nan() {
            return Err(Error::InvalidInput("Q_alpha must be non-zero (use infinity for none)".into()));
        }
        Ok(())
    }

    /// Total linewidth `f0 (1/Qi + 1/Qe)`, Hz.
    pub fn kappa_hz(&self) -> f64 {
        self.f0_hz * (1.0 / self.qi + 1.0 / self.qe)
    }

    /// External (coupling) linewidth `f0 / Qe`, Hz.
    pub fn kappa_e_hz(&self) -> f64 {
        self.f0_hz / self.qe
    }
}

/// Transmission `S21(f)` of a notch-coupled LC resonator.
pub fn s21(f: f64, model: &ResonatorModel) -> Complex64 {
    let x = 2.0 * model.qi * (f - model.f0_hz) / model.f0_hz;
    let num = Complex64::new(1.0, x);
    let den = Complex64::new(1.0 + model.qi / model.qe, model.qi / model.q_alpha + x);
    num / den
}

/// Power-dependent TLS loss parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlsLoss {
    /// Power-independent internal quality factor.
    pub qi0: f64,
    /// Filling factor times loss tangent.
    pub f_tan_delta: f64,
    /// Critical photon number.
    pub nc: f64,
    /// Saturation exponent.
    pub alpha: f64,
}

impl TlsLoss {
    pub fn validate(&self) -> Result<()> {
        if !(self.qi0 > 0.0 && self.nc > 0.0 && self.f_tan_delta >= 0.0) {
            return Err(Error::InvalidInput(format!("invalid TLS parameters {self:?}")));
        }
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            log::warn!("TLS exponent alpha = {} is outside (0, 2]", self.alpha);
        }
        Ok(())
    }
}

/// Internal quality factor `1/Qi = 1/Qi0 + F tan(delta) / (1 + (n/nc)^alpha)`.
pub fn tls_quality(n_photons: f64, tls: &TlsLoss) -> Result<f64> {
    if !(n_photons >= 0.0) {
        return Err(Error::domain("tls_quality", format!("photon number must be >= 0, got {n_photons}")));
    }
    let inv = 1.0 / tls.qi0 + tls.f_tan_delta / (1.0 + (n_photons / tls.nc).powf(tls.alpha));
    Ok(1.0 / inv)
}

/// Inhomogeneously broadened spin ensemble coupled to the resonator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinEnsemble {
    /// Ensemble coupling strength, Hz.
    pub omega_ens_hz: f64,
    /// Inhomogeneous half-width (half the FWHM), Hz.
    pub gamma_s_hz: f64,
    pub g_eff: f64,
    /// Resonance field, T.
    pub b0_t: f64,
    /// Single-spin coupling, Hz.
    pub g_single_hz: f64,
    /// Mode volume filled by spins, m^3.
    pub volume_m3: f64,
}

impl SpinEnsemble {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_ens_hz > 0.0 && self.gamma_s_hz > 0.0 && self.g_single_hz > 0.0) {
            return Err(Error::InvalidInput(format!(
                "ensemble needs Omega, gamma_s, g > 0 (got {}, {}, {})",
                self.omega_ens_hz, self.gamma_s_hz, self.g_single_hz
            )));
        }
        Ok(())
    }

    /// Spin detuning at field `b`, Hz.
    pub fn detuning_hz(&self, b: f64) -> f64 {
        self.g_eff * MU_B * (b - self.b0_t) / H
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinSignature {
    /// Linewidth increase, Hz.
    pub delta_kappa_hz: f64,
    /// Dispersive frequency shift, Hz.
    pub delta_f_hz: f64,
}

/// Absorptive and dispersive resonator response to the ensemble at field `b`.
pub fn spin_signature(b: f64, ens: &SpinEnsemble) -> SpinSignature {
    let delta = ens.detuning_hz(b);
    let w2 = ens.omega_ens_hz * ens.omega_ens_hz;
    let den = ens.gamma_s_hz * ens.gamma_s_hz + delta * delta;
    SpinSignature {
        delta_kappa_hz: w2 * ens.gamma_s_hz / den,
        delta_f_hz: -w2 * delta / den,
    }
}

/// Field-dependent resonance `f0 - c B^2`, Hz.
pub fn kinetic_background(b: f64, model: &ResonatorModel) -> f64 {
    model.f0_hz - model.kinetic_c_hz_per_t2 * b * b
}

/// Converts dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// Mean intracavity photon number `(P / h f) (kappa_e / kappa^2)`.
///
/// All linewidths and the detuning are ordinary frequencies in Hz; nonzero
/// detuning applies the Lorentzian factor `(kappa/2)^2 / ((kappa/2)^2 + delta^2)`.
pub fn intracavity_photons(power_w: f64, f: f64, kappa_e: f64, kappa: f64, detuning: f64) -> Result<f64> {
    if !(power_w >= 0.0) {
        return Err(Error::domain("intracavity_photons", format!("power must be >= 0, got {power_w}")));
    }
    if !(kappa > 0.0) || !(f > 0.0) {
        return Err(Error::domain("intracavity_photons", "kappa and f must be > 0"));
    }
    let hk2 = 0.25 * kappa * kappa;
    let rolloff = hk2 / (hk2 + detuning * detuning);
    Ok(power_w / (H * f) * kappa_e / (kappa * kappa) * rolloff)
}

/// Driven Rabi frequency `g sqrt(n)`, Hz.
pub fn rabi_from_photons(g_single: f64, n_photons: f64) -> Result<f64> {
    if !(n_photons >= 0.0) {
        return Err(Error::domain("rabi_from_photons", format!("photon number must be >= 0, got {n_photons}")));
    }
    Ok(g_single * n_photons.sqrt())
}

/// Number of coupled spins `N = (Omega / g)^2`.
pub fn ensemble_to_count(omega_ens: f64, g_single: f64) -> Result<f64> {
    if !(g_single > 0.0) {
        return Err(Error::domain("ensemble_to_count", format!("single-spin coupling must be > 0, got {g_single}")));
    }
    let r = omega_ens / g_single;
    Ok(r * r)
}

/// Inverse of [`ensemble_to_count`]: `Omega = g sqrt(N)`.
pub fn count_to_ensemble(count: f64, g_single: f64) -> Result<f64> {
    if !(count >= 0.0) {
        return Err(Error::domain("count_to_ensemble", format!("spin count must be >= 0, got {count}")));
    }
    Ok(g_single * count.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinDensity {
    pub per_m3: f64,
    /// Parts per million of the host cation density.
    pub ppm: f64,
}

impl SpinDensity {
    pub fn per_cm3(&self) -> f64 {
        self.per_m3 * 1e-6
    }
}

pub fn count_to_density(count: f64, volume_m3: f64, host_density_m3: f64) -> Result<SpinDensity> {
    if !(volume_m3 > 0.0) {
        return Err(Error::domain("count_to_density", format!("volume must be > 0, got {volume_m3}")));
    }
    if !(host_density_m3 > 0.0) {
        return Err(Error::domain("count_to_density", "host density must be > 0"));
    }
    let per_m3 = count / volume_m3;
    Ok(SpinDensity {
        per_m3,
        ppm: per_m3 / host_density_m3 * 1e6,
    })
}

/// Removes a least-squares polynomial of degree `order` in `x` from `y`.
///
/// Used to strip the slowly varying background from field-sweep maps.
pub fn polynomial_detrend(x: &[f64], y: &[f64], order: usize) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!("x and y lengths differ ({} vs {})", x.len(), y.len())));
    }
    if x.len() <= order {
        return Err(Error::InsufficientData {
            points: x.len(),
            params: order + 1,
        });
    }
    // centre and scale x for conditioning
    let (lo, hi) = x.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
    let mid = 0.5 * (lo + hi);
    let half = (0.5 * (hi - lo)).max(f64::MIN_POSITIVE);
    let design = DMatrix::from_fn(x.len(), order + 1, |i, j| ((x[i] - mid) / half).powi(j as i32));
    let rhs = DVector::from_column_slice(y);
    let coef = design
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let fitted = design * coef;
    Ok(y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect())
}
