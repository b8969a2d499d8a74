//! Pulsed-ESR echo extraction from demodulated quadrature traces.
//!
//! Each quadrature is Fourier transformed over a window around the echo,
//! its magnitude spectrum `|X(f)|` (with `X_k = dt * FFT_k`) is integrated
//! over the signal band, and a pedestal estimated from two adjacent
//! background bands is subtracted. The two quadrature areas are then
//! combined in quadrature.
//!
//! Synthetic noise comes from ChaCha8 (`rand_chacha::ChaCha8Rng`), a
//! counter-based generator, seeded with `seed_from_u64`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const MIN_SAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureTrace {
    pub sample_rate_hz: f64,
    pub i: Vec<f64>,
    pub q: Vec<f64>,
    /// Seed of a synthetic trace.
    pub seed: Option<u64>,
}

impl QuadratureTrace {
    pub fn new(sample_rate_hz: f64, i: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::InvalidInput(format!("sample rate must be > 0, got {sample_rate_hz}")));
        }
        if i.len() != q.len() {
            return Err(Error::InvalidInput(format!(
                "quadratures differ in length ({} vs {})",
                i.len(),
                q.len()
            )));
        }
        if let Some(k) = i.iter().chain(&q).position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite sample at flat index {k}")));
        }
        Ok(Self {
            sample_rate_hz,
            i,
            q,
            seed: None,
        })
    }

    /// Builds a trace from uniformly spaced time stamps.
    pub fn from_time_series(time_s: &[f64], i: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if time_s.len() < 2 || time_s.len() != i.len() {
            return Err(Error::InvalidInput("need at least two time stamps matching the samples".into()));
        }
        let dt = (time_s[time_s.len() - 1] - time_s[0]) / (time_s.len() - 1) as f64;
        if !(dt > 0.0) {
            return Err(Error::InvalidInput("time stamps must increase".into()));
        }
        for (k, w) in time_s.windows(2).enumerate() {
            if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt {
                return Err(Error::InvalidInput(format!("non-uniform sampling at row {}", k + 1)));
            }
        }
        Self::new(1.0 / dt, i, q)
    }

    pub fn len(&self) -> usize {
        self.i.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate_hz
    }

    /// Global phase rotation `(I + jQ) e^{j phi}`.
    pub fn rotated(&self, phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        let (i, q) = self
            .i
            .iter()
            .zip(&self.q)
            .map(|(i, q)| (i * c - q * s, i * s + q * c))
            .unzip();
        Self {
            sample_rate_hz: self.sample_rate_hz,
            i,
            q,
            seed: self.seed,
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            sample_rate_hz: self.sample_rate_hz,
            i: self.i.iter().map(|v| v * k).collect(),
            q: self.q.iter().map(|v| v * k).collect(),
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoSynthesis {
    pub center_f_hz: f64,
    pub amplitude: f64,
    pub envelope_sigma_s: f64,
    pub noise_rms: f64,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub seed: u64,
}

impl Default for EchoSynthesis {
    fn default() -> Self {
        Self {
            center_f_hz: 200e6,
            amplitude: 1e-3,
            envelope_sigma_s: 100e-9,
            noise_rms: 0.0,
            duration_s: 3e-6,
            sample_rate_hz: 1e9,
            seed: 0,
        }
    }
}

/// Gaussian-envelope tone centred in the trace, `A e^{-t^2/2s^2} e^{j 2 pi f t}`,
/// plus independent white Gaussian noise on each quadrature.
pub fn synth_echo(p: &EchoSynthesis) -> Result<QuadratureTrace> {
    if !(p.sample_rate_hz > 2.0 * p.center_f_hz) {
        return Err(Error::domain(
            "synth_echo",
            format!(
                "Nyquist violation: sample rate {} Hz <= 2 x {} Hz",
                p.sample_rate_hz, p.center_f_hz
            ),
        ));
    }
    if !(p.envelope_sigma_s > 0.0 && p.noise_rms >= 0.0) {
        return Err(Error::domain("synth_echo", "envelope width must be > 0 and noise >= 0"));
    }
    let n = (p.duration_s * p.sample_rate_hz).round();
    if !(n >= MIN_SAMPLES as f64) {
        return Err(Error::domain("synth_echo", format!("trace needs >= {MIN_SAMPLES} samples, got {n}")));
    }
    let n = n as usize;
    let dt = 1.0 / p.sample_rate_hz;
    let tc = 0.5 * n as f64 * dt;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut i = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * dt - tc;
        let env = p.amplitude * (-0.5 * (t / p.envelope_sigma_s).powi(2)).exp();
        let (s, c) = (2.0 * PI * p.center_f_hz * t).sin_cos();
        let (ni, nq) = if p.noise_rms > 0.0 {
            (
                p.noise_rms * rng.sample::<f64, _>(StandardNormal),
                p.noise_rms * rng.sample::<f64, _>(StandardNormal),
            )
        } else {
            (0.0, 0.0)
        };
        i.push(env * c + ni);
        q.push(env * s + nq);
    }
    let mut trace = QuadratureTrace::new(p.sample_rate_hz, i, q)?;
    trace.seed = Some(p.seed);
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Taper {
    #[default]
    Rectangular,
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoAnalysis {
    pub window_s: f64,
    /// Window centre; the trace midpoint when `None`.
    pub window_center_s: Option<f64>,
    pub band_center_hz: f64,
    pub band_width_hz: f64,
    /// Width of each of the two background bands.
    pub bg_bin_width_hz: f64,
    pub taper: Taper,
    pub subtract_background: bool,
}

impl Default for EchoAnalysis {
    fn default() -> Self {
        Self {
            window_s: 1500e-9,
            window_center_s: None,
            band_center_hz: 200e6,
            band_width_hz: 20e6,
            bg_bin_width_hz: 10e6,
            taper: Taper::Rectangular,
            subtract_background: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureArea {
    /// Integrated `|X|` over the signal band.
    pub raw: f64,
    /// Background integral rescaled to the signal band.
    pub pedestal: f64,
    /// `raw - pedestal` (or `raw` without subtraction).
    pub net: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoArea {
    /// Combined area, `sgn(S) sqrt(|S|)` with `S = sgn(a_I) a_I^2 + sgn(a_Q) a_Q^2`.
    pub area: f64,
    /// Combined pedestal `sqrt(p_I^2 + p_Q^2)`.
    pub pedestal: f64,
    pub i: QuadratureArea,
    pub q: QuadratureArea,
    pub signal_bins: usize,
    pub background_bins: usize,
}

/// Magnitude spectrum `|dt * FFT(w x)|` for bins `0..=N/2`.
pub fn magnitude_spectrum(samples: &[f64], dt: f64, taper: Taper) -> Vec<f64> {
    let n = samples.len();
    let mut buf: Vec<Complex<f64>> = samples
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let w = match taper {
                Taper::Rectangular => 1.0,
                Taper::Hann if n > 1 => 0.5 * (1.0 - (2.0 * PI * k as f64 / (n - 1) as f64).cos()),
                Taper::Hann => 1.0,
            };
            Complex::new(w * v, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.iter().take(n / 2 + 1).map(|c| dt * c.norm()).collect()
}

fn first_bin_at_or_above(f: f64, df: f64) -> usize {
    // tolerate rounding in f/df landing just above an integer
    ((f / df) - 1e-9).ceil().max(0.0) as usize
}

struct Bands {
    signal: (usize, usize),
    lower: (usize, usize),
    upper: (usize, usize),
}

fn bands(a: &EchoAnalysis, df: f64, nyquist_bin: usize) -> Result<Bands> {
    let lo = a.band_center_hz - 0.5 * a.band_width_hz;
    let hi = a.band_center_hz + 0.5 * a.band_width_hz;
    let bg_lo = lo - a.bg_bin_width_hz;
    let bg_hi = hi + a.bg_bin_width_hz;
    if !(a.band_width_hz > 0.0 && a.bg_bin_width_hz >= 0.0) {
        return Err(Error::domain("echo_area", "band widths must be positive"));
    }
    if bg_lo < 0.0 || bg_hi > nyquist_bin as f64 * df {
        return Err(Error::domain(
            "echo_area",
            format!(
                "band [{bg_lo:.4e}, {bg_hi:.4e}] Hz exceeds spectrum [0, {:.4e}] Hz",
                nyquist_bin as f64 * df
            ),
        ));
    }
    let b = |f: f64| first_bin_at_or_above(f, df);
    let out = Bands {
        signal: (b(lo), b(hi)),
        lower: (b(bg_lo), b(lo)),
        upper: (b(hi), b(bg_hi).min(nyquist_bin + 1)),
    };
    if out.signal.1 <= out.signal.0 {
        return Err(Error::domain("echo_area", format!("signal band narrower than one bin ({df:.4e} Hz)")));
    }
    Ok(out)
}

fn band_sum(spectrum: &[f64], (a, b): (usize, usize)) -> f64 {
    spectrum[a..b].iter().sum()
}

fn quadrature_area(spectrum: &[f64], bands: &Bands, df: f64, subtract: bool) -> QuadratureArea {
    let n_sig = (bands.signal.1 - bands.signal.0) as f64;
    let n_bg = (bands.lower.1 - bands.lower.0 + bands.upper.1 - bands.upper.0) as f64;
    let raw = band_sum(spectrum, bands.signal) * df;
    let pedestal = if n_bg > 0.0 {
        (band_sum(spectrum, bands.lower) + band_sum(spectrum, bands.upper)) * df * n_sig / n_bg
    } else {
        0.0
    };
    QuadratureArea {
        raw,
        pedestal,
        net: if subtract { raw - pedestal } else { raw },
    }
}

fn signed_square(v: f64) -> f64 {
    v.signum() * v * v
}

/// Echo area of one trace.
pub fn echo_area(trace: &QuadratureTrace, analysis: &EchoAnalysis) -> Result<EchoArea> {
    let dt = 1.0 / trace.sample_rate_hz;
    let n_w = (analysis.window_s * trace.sample_rate_hz).round() as usize;
    if n_w < 2 {
        return Err(Error::domain("echo_area", "window shorter than two samples"));
    }
    if n_w > trace.len() {
        return Err(Error::domain(
            "echo_area",
            format!(
                "window {:.4e} s exceeds trace duration {:.4e} s",
                analysis.window_s,
                trace.duration_s()
            ),
        ));
    }
    let center = analysis.window_center_s.unwrap_or(0.5 * trace.len() as f64 * dt);
    let start = (center / dt - 0.5 * n_w as f64).round();
    if start < 0.0 || start as usize + n_w > trace.len() {
        return Err(Error::domain("echo_area", format!("window centred at {center:.4e} s leaves the trace")));
    }
    let start = start as usize;
    let df = trace.sample_rate_hz / n_w as f64;
    let b = bands(analysis, df, n_w / 2)?;
    let si = magnitude_spectrum(&trace.i[start..start + n_w], dt, analysis.taper);
    let sq = magnitude_spectrum(&trace.q[start..start + n_w], dt, analysis.taper);
    let i = quadrature_area(&si, &b, df, analysis.subtract_background);
    let q = quadrature_area(&sq, &b, df, analysis.subtract_background);
    let s = signed_square(i.net) + signed_square(q.net);
    Ok(EchoArea {
        area: s.signum() * s.abs().sqrt(),
        pedestal: i.pedestal.hypot(q.pedestal),
        i,
        q,
        signal_bins: b.signal.1 - b.signal.0,
        background_bins: b.lower.1 - b.lower.0 + b.upper.1 - b.upper.0,
    })
}

/// Processes traces independently; output order follows input order.
pub fn echo_areas(traces: &[QuadratureTrace], analysis: &EchoAnalysis) -> Result<Vec<EchoArea>> {
    traces.iter().map(|t| echo_area(t, analysis)).collect()
}
