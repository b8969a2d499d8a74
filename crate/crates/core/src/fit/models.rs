//! Fit adapters for the forward models of this crate.

use std::f64::consts::{LN_10, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{Bound, Model};
use crate::anisotropy::{strain_linewidth, StrainLinewidthModel};
use crate::coherence::{sech_squared, SpectralDiffusionModel, ThermalModel};
use crate::constants::{K_B, MU_B};
use crate::optical::{bloch_linewidth, purcell_t1_vs_detuning};
use crate::resonator::{s21, spin_signature, ResonatorModel, SpinEnsemble};

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn from_rows(rows: Vec<Vec<f64>>, k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j])
}

/// Hahn echo `a0 exp(-(2 tau / t2)^n)`; input: pulse spacing tau (s).
#[derive(Debug, Clone, Copy, Default)]
pub struct HahnModel;

impl Model for HahnModel {
    fn name(&self) -> &str {
        "hahn"
    }
    fn param_names(&self) -> Vec<String> {
        names(&["a0", "t2_s", "stretch_n"])
    }
    fn predict(&self, x: &[f64], p: &[f64]) -> Vec<f64> {
        x.iter().map(|t| p[0] * (-(2.0 * t / p[1]).powf(p[2])).exp()).collect()
    }
    fn jacobian(&self, x: &[f64], p: &[f64]) -> Option<DMatrix<f64>> {
        let rows = x
            .iter()
            .map(|t| {
                let z = 2.0 * t / p[1];
                if z <= 0.0 {
                    return vec![1.0, 0.0, 0.0];
                }
                let y = z.powf(p[2]);
                let e = (-y).exp();
                vec![e, p[0] * e * p[2] * y / p[1], -p[0] * e * y * z.ln()]
            })
            .collect();
        Some(from_rows(rows, 3))
    }
    fn default_bounds(&self) -> Vec<Bound> {
        vec![Bound::FREE, Bound::lower(0.0), Bound { lo: 0.05, hi: 10.0 }]
    }
}

/// Saturation recovery `a0 (1 - exp(-t / t1))`; input: delay (s).
#[derive(Debug, Clone, Copy, Default)]
pub struct SaturationRecoveryModel;

impl Model for SaturationRecoveryModel {
    fn name(&self) -> &str {
        "saturation_recovery"
    }
    fn param_names(&self) -> Vec<String> {
        names(&["a0", "t1_s"])
    }
    fn predict(&self, x: &[f64], p: &[f64]) -> Vec<f64> {
        x.iter().map(|t| p[0] * (1.0 - (-t / p[1]).exp())).collect()
    }
    fn jacobian(&self, x: &[f64], p: &[f64]) -> Option<DMatrix<f64>> {
        let rows = x
            .iter()
            .map(|t| {
                let e = (-t / p[1]).exp();
                vec![1.0 - e, -p[0] * e * t / (p[1] * p[1])]
            })
            .collect();
        Some(from_rows(rows, 2))
    }
    fn default_bounds(&self) -> Vec<Bound> {
        vec![Bound::FREE, Bound::lower(0.0)]
    }
}

/// Complex transmission; input: frequency (Hz); outputs interleaved
/// `(Re S21, Im S21)` per point. The asymmetry enters as `1/Q_alpha` so a
/// symmetric line sits at zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct S21Model;

impl S21Model {
    fn resonator(p: &[f64]) -> ResonatorModel {
        ResonatorModel {
            f0_hz: p[0],
            qi: p[1],
            qe: p[2],
            q_alpha: 1.0 / p[3],
            kinetic_c_hz_per_t2: 0.0,
        }
    }
}

impl Model for S21Model {
    fn name(&self) -> &str {
        "s21"
    }
    fn param_names(&self) -> Vec<String> {
        names(&["f0_hz", "qi", "qe", "inv_q_alpha"])
    }
    fn outputs_per_point(&self) -> usize {
        2
    }
    fn predict(&self, x: &[f64], p: &[f64]) -> Vec<f64> {
        let m = Self::resonator(p);
        x.iter()
            .flat_map(|f| {
                let s = s21(*f, &m);
                [s.re, s.im]
            })
            .collect()
    }
    fn jacobian(&self, x: &[f64], p: &[f64]) -> Option<DMatrix<f64>> {
        let (f0, qi, qe, iqa) = (p[0], p[1], p[2], p[3]);
        let j = Complex64::i();
        let mut out = DMatrix::zeros(2 * x.len(), 4);
        for (k, &f) in x.iter().enumerate() {
            let xx = 2.0 * qi * (f - f0) / f0;
            let num = Complex64::new(1.0, xx);
            let den = Complex64::new(1.0 + qi / qe, qi * iqa + xx);
            let dx_df0 = -2.0 * qi * f / (f0 * f0);
            let dx_dqi = 2.0 * (f - f0) / f0;
            let partials = [
                (j * dx_df0, j * dx_df0),
                (j * dx_dqi, Complex64::new(1.0 / qe, iqa + dx_dqi)),
                (Complex64::new(0.0, 0.0), Complex64::new(-qi / (qe * qe), 0.0)),
                (Complex64::new(0.0, 0.0), j * qi),
            ];
            for (c, (dn, dd)) in partials.iter().enumerate() {
                let d = (dn * den - num * dd) / (den * den);
                out[(2 * k, c)] = d.re;
                out[(2 * k + 1, c)] = d.im;
            }
        }
        Some(out)
    }
    fn default_bounds(&self) -> Vec<Bound> {
        vec![Bound::lower(0.0), Bound::lower(0.0), Bound::lower(0.0), Bound::FREE]
    }
}

/// Three-pulse echo `a0 exp(-(T_W/T1 + 2 pi tau Gamma_eff))`; inputs
/// `(tau, T_W)` in seconds; T1 held fixed.
#[derive(Debug, Clone, Copy)]
pub struct StimulatedEchoModel {
    pub t1_s: f64,
}

impl Model for StimulatedEchoModel {
    fn name(&self) -> &str {
        "stimulated_echo"
    }
    fn param_names(&self) -> Vec<String> {
        names(&["a0", "gamma0_hz", "gamma_sd_hz", "rate_hz"])
    }
    fn input_dim(&self) -> usize {
        2
    }
    fn predict(&self, x: &[f64], p: &[f64]) -> Vec<f64> {
        let m = SpectralDiffusionModel {
            gamma0_hz: p[1],
            gamma_sd_hz: p[2],
            rate_hz: p[3],
            t1_s: self.t1_s,
        };
        x.chunks(2)
            .map(|c| {
                let tau = c[0];
                let tw = c[1];
                let g = m.gamma0_hz + 0.5 * m.gamma_sd_hz * (m.rate_hz * tau + 1.0 - (-m.rate_hz * tw).exp());
                p[0] * (-(tw / self.t1_s + 2.0 * PI * tau * g)).exp()
            })
            .collect()
    }
    fn jacobian(&self, x: &[f64], p: &[f64]) -> Option<DMatrix<f64>> {
        let (a0, g0, gsd, r) = (p[0], p[1], p[2], p[3]);
        let rows = x
            .chunks(2)
            .map(|c| {
                let (tau, tw) = (c[0], c[1]);
                let er = (-r * tw).exp();
                let g = g0 + 0.5 * gsd * (r * tau + 1.0 - er);
                let e = (-(tw / self.t1_s + 2.0 * PI * tau * g)).exp();
                let k = -a0 * e * 2.0 * PI * tau;
                vec![e, k, k * 0.5 * (r * tau + 1.0 - er), k * 0.5 * gsd * (tau + tw * er)]
            })
            .collect();
        Some(from_rows(rows, 4))
    }
    fn default_bounds(&self) -> Vec<Bound> {
        vec![Bound::FREE, Bound::lower(0.0), Bound::lower(0.0), Bound::lower(0.0)]
    }
}

/// TLS loss `1/Qi = 1/qi0 + F tan(delta) / (1 + (n / 10^log10_nc)^alpha)`;
/// input: photon number; output: `1/Qi`.
#[derive(Debug, Clone, Copy, Default)]
pub struct TlsModel;

impl Model for TlsModel {
    fn name(&self) -> &str {
        "tls"
    }
    fn param_names(&self) -> Vec<String> {
        names(&["qi0", "f_tan_delta", "log10_nc", "alpha"])
    }
    fn predict(&self, x: &[f64], p: &[f64]) -> Vec<f64> {
        let nc = 10f64.powf(p[2]);
        x.iter().map(|n| 1.0 / p[0] + p[1] / (1.0 + (n / nc).powf(p[3]))).collect()
    }
    fn jacobian(&self, x: &[f64], p: &[f64]) -> Option<DMatrix<f64>> {
        let (q0, f, l, a) = (p[0], p[1], p[2], p[3]);
        let nc = 10f64.powf(l);
        let rows = x
            .iter()
            .map(|&n| {
                let ratio = n / nc;
                let r = ratio.powf(a);
                let den = 1.0 + r;
                let log_ratio = if n > 0.0 { ratio.ln() } else { 0.0 };
                vec![
                    -1.0 / (q0 * q0),
                    1.0 / den,
                    f * a * LN_10 * r / (den * den),
                    -f * r * log_ratio / (den * den),
                ]
            })
            .collect();
        Some(from_rows(rows, 4))
    }
    fn default_bounds(&self) -> Vec<Bound> {
        vec![
            Bound::lower(0.0),
            Bound::lower(0.0),
            Bound { lo: -3.0, hi: 15.0 },
            Bound { lo: 0.01, hi: 2.0 },
        ]
    }
}

fn freeze(g_env: f64, b: f64, t: f64) -> (f64, f64) {
    let z = g_env * MU_B * b / (2.0 * K_B * t);
    (z, sech_squared(z))
}

/// Hole linewidth vs field `gamma0 + gamma_sd sech^2(g mu_B B / 2 k_B T)`;
/// input: field (T). Only `g_env / t_bath` is identifiable, so one of the
/// two is normally fixed.
#[derive(Debug, Clone, Copy, Default)]
pub struct HoleburnModel;

impl Model for HoleburnModel {
    fn name(&self) -> &str {
        "holeburn"
    }
    fn param_names(&self) -> Vec<String> {
        names(&["gamma0_hz", "gamma_sd_hz", "g_env", "t_bath_k"])
    }
    fn predict(&self, x: &[f64], p: &[f64]) -> Vec<f64> {
        x.iter().map(|b| p[0] + p[1] * freeze(p[2], *b, p[3]).1).collect()
    }
    fn jacobian(&self, x: &[f64], p: &[f64]) -> Option<DMatrix<f64>> {
        let rows = x
            .iter()
            .map(|&b| {
                let (z, s) = freeze(p[2], b, p[3]);
                let ds_dz = -2.0 * s * z.tanh();
                vec![1.0, s, p[1] * ds_dz * z / p[2], -p[1] * ds_dz * z / p[3]]
            })
            .collect();
        Some(from_rows(rows, 4))
    }
    fn default_bounds(&self) -> Vec<Bound> {
        vec![Bound::lower(0.0), Bound::lower(0.0), Bound::lower(0.0), Bound::lower(0.0)]
    }
}

/// Optical hole linewidth vs Rabi frequency (rad/s) in the Bloch limit.
#[derive(Debug, Clone, Copy, Default)]
pub struct BlochLinewidthModel;

impl Model for BlochLinewidthModel {
    fn name(&self) -> &str {
        "bloch_linewidth"
    }
    fn param_names(&self) -> Vec<String> {
        names(&["t1_s", "t2_star_s"])
    }
    fn predict(&self, x: &[f64], p: &[f64]) -> Vec<f64> {
        x.iter().map(|w| bloch_linewidth(*w, p[0], p[1]).unwrap_or(f64::NAN)).collect()
    }
    fn default_bounds(&self) -> Vec<Bound> {
        vec![Bound::lower(0.0), Bound::lower(0.0)]
    }
}

/// Spin-induced `(delta_kappa, delta_f)` vs field (T), interleaved per point.
#[derive(Debug, Clone, Copy)]
pub struct SpinSignatureModel {
    pub g_eff: f64,
}

impl Model for SpinSignatureModel {
    fn name(&self) -> &str {
        "spin_signature"
    }
    fn param_names(&self) -> Vec<String> {
        names(&["omega_ens_hz", "gamma_s_hz", "b0_t"])
    }
    fn outputs_per_point(&self) -> usize {
        2
    }
    fn predict(&self, x: &[f64], p: &[f64]) -> Vec<f64> {
        let ens = SpinEnsemble {
            omega_ens_hz: p[0],
            gamma_s_hz: p[1],
            g_eff: self.g_eff,
            b0_t: p[2],
            g_single_hz: 1.0,
            volume_m3: 1.0,
        };
        x.iter()
            .flat_map(|b| {
                let s = spin_signature(*b, &ens);
                [s.delta_kappa_hz, s.delta_f_hz]
            })
            .collect()
    }
    fn default_bounds(&self) -> Vec<Bound> {
        vec![Bound::lower(0.0), Bound::lower(0.0), Bound::FREE]
    }
}

/// `(g^2, g dg)` vs in-plane angle (deg), interleaved per point.
#[derive(Debug, Clone, Copy, Default)]
pub struct StrainModel;

impl Model for StrainModel {
    fn name(&self) -> &str {
        "strain_linewidth"
    }
    fn param_names(&self) -> Vec<String> {
        names(&["a", "b", "c", "a_prime", "b_prime", "c_prime"])
    }
    fn outputs_per_point(&self) -> usize {
        2
    }
    fn predict(&self, x: &[f64], p: &[f64]) -> Vec<f64> {
        let m = StrainLinewidthModel {
            a: p[0],
            b: p[1],
            c: p[2],
            a_prime: p[3],
            b_prime: p[4],
            c_prime: p[5],
        };
        x.iter()
            .flat_map(|t| {
                let s = strain_linewidth(*t, &m);
                [s.g_squared, s.g_delta_g]
            })
            .collect()
    }
}

/// Echo amplitude vs temperature `a0 tanh(T_Ze / (C T))`.
#[derive(Debug, Clone, Copy)]
pub struct PolarizationModel {
    pub t_ze_k: f64,
}

impl Model for PolarizationModel {
    fn name(&self) -> &str {
        "polarization"
    }
    fn param_names(&self) -> Vec<String> {
        names(&["a0", "c_corr"])
    }
    fn predict(&self, x: &[f64], p: &[f64]) -> Vec<f64> {
        x.iter().map(|t| p[0] * (self.t_ze_k / (p[1] * t)).tanh()).collect()
    }
    fn default_bounds(&self) -> Vec<Bound> {
        vec![Bound::FREE, Bound::lower(0.0)]
    }
}

/// Dephasing rate vs temperature; `T_Ze` held fixed.
#[derive(Debug, Clone, Copy)]
pub struct DephasingModel {
    pub t_ze_k: f64,
}

impl Model for DephasingModel {
    fn name(&self) -> &str {
        "dephasing"
    }
    fn param_names(&self) -> Vec<String> {
        names(&["gamma0_hz", "xi_hz", "c_corr"])
    }
    fn predict(&self, x: &[f64], p: &[f64]) -> Vec<f64> {
        let m = ThermalModel {
            t_ze_k: self.t_ze_k,
            c_corr: p[2],
            xi_hz: p[1],
            gamma0_hz: p[0],
        };
        x.iter()
            .map(|t| crate::coherence::dephasing_vs_t(*t, &m).unwrap_or(f64::NAN))
            .collect()
    }
    fn default_bounds(&self) -> Vec<Bound> {
        vec![Bound::lower(0.0), Bound::lower(0.0), Bound::lower(0.0)]
    }
}

/// Optical lifetime vs emitter-cavity detuning (Hz).
#[derive(Debug, Clone, Copy, Default)]
pub struct PurcellDetuningModel;

impl Model for PurcellDetuningModel {
    fn name(&self) -> &str {
        "purcell_detuning"
    }
    fn param_names(&self) -> Vec<String> {
        names(&["t1_0_s", "zeta", "purcell", "gamma_cav_hz"])
    }
    fn predict(&self, x: &[f64], p: &[f64]) -> Vec<f64> {
        x.iter()
            .map(|d| purcell_t1_vs_detuning(*d, p[0], p[1], p[2], p[3]).unwrap_or(f64::NAN))
            .collect()
    }
    fn default_bounds(&self) -> Vec<Bound> {
        vec![
            Bound::lower(0.0),
            Bound { lo: 1e-6, hi: 1.0 },
            Bound::lower(0.0),
            Bound::lower(0.0),
        ]
    }
}

type ScalarFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;

/// Scalar model from a closure `f(x, p)`.
pub struct FnModel {
    name: String,
    params: Vec<String>,
    f: Box<ScalarFn>,
}

impl FnModel {
    pub fn new(name: &str, params: &[&str], f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.to_string(),
            params: names(params),
            f: Box::new(f),
        }
    }
}

impl Model for FnModel {
    fn name(&self) -> &str {
        &self.name
    }
    fn param_names(&self) -> Vec<String> {
        self.params.clone()
    }
    fn predict(&self, x: &[f64], p: &[f64]) -> Vec<f64> {
        x.iter().map(|xi| (self.f)(*xi, p)).collect()
    }
}
