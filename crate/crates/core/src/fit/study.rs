//! Seeded synthetic-recovery studies: generate noisy data from known
//! parameters, refit, and count how often every free parameter lands within
//! three standard errors of the truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::models::{HoleburnModel, S21Model, HahnModel, StimulatedEchoModel, TlsModel};
use super::{fit, FitOptions, FitProblem, FitResult, Model};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryCase {
    S21,
    StretchedExp,
    StimulatedEcho,
    Tls,
    Holeburn,
}

impl RecoveryCase {
    pub const ALL: [RecoveryCase; 5] = [
        RecoveryCase::S21,
        RecoveryCase::StretchedExp,
        RecoveryCase::StimulatedEcho,
        RecoveryCase::Tls,
        RecoveryCase::Holeburn,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RecoveryCase::S21 => "s21",
            RecoveryCase::StretchedExp => "stretched_exp",
            RecoveryCase::StimulatedEcho => "stimulated_echo",
            RecoveryCase::Tls => "tls",
            RecoveryCase::Holeburn => "holeburn",
        }
    }

    /// Ground-truth parameters used for the synthetic data.
    pub fn truth(self) -> Vec<f64> {
        match self {
            RecoveryCase::S21 => vec![5.81e9, 370_043.0, 3001.0, 2e-6],
            RecoveryCase::StretchedExp => vec![1.0, 0.38e-3, 2.11],
            RecoveryCase::StimulatedEcho => vec![1.0, 700.0, 4400.0, 287.0],
            RecoveryCase::Tls => vec![14088.0, 3.10e-5, 2.6e5f64.log10(), 0.54],
            RecoveryCase::Holeburn => vec![158.6e3, 635.5e3, 2.02, 0.22],
        }
    }
}

/// Synthetic data set with its noise model.
pub struct Synthetic {
    pub model: Box<dyn Model>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Vec<f64>,
    pub truth: Vec<f64>,
    pub init: Vec<f64>,
    pub fixed: Vec<&'static str>,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a, b, n).into_iter().map(|e| 10f64.powf(e)).collect()
}

/// Builds the synthetic data for `case` from `seed`.
///
/// Noise levels: S21 0.5% of `|S21|` per quadrature, stretched exponential
/// 1% of the amplitude, stimulated echo 1% of the amplitude, TLS 1% of
/// `1/Qi`, hole linewidth 5 kHz. Starting values are the truth perturbed by
/// up to 10%.
pub fn synthesize(case: RecoveryCase, seed: u64) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = case.truth();
    let (model, x, fixed): (Box<dyn Model>, Vec<f64>, Vec<&'static str>) = match case {
        RecoveryCase::S21 => {
            let kappa = truth[0] * (1.0 / truth[1] + 1.0 / truth[2]);
            (Box::new(S21Model), linspace(truth[0] - 3.0 * kappa, truth[0] + 3.0 * kappa, 601), vec![])
        }
        RecoveryCase::StretchedExp => (Box::new(HahnModel), linspace(5e-6, 0.5e-3, 100), vec![]),
        RecoveryCase::StimulatedEcho => {
            let taus = linspace(5e-6, 80e-6, 8);
            let tws = logspace(-4.0, -1.0, 12);
            let x = taus.iter().flat_map(|t| tws.iter().flat_map(move |w| [*t, *w])).collect();
            (Box::new(StimulatedEchoModel { t1_s: 0.8 }), x, vec![])
        }
        RecoveryCase::Tls => (Box::new(TlsModel), logspace(0.0, 10.0, 41), vec![]),
        RecoveryCase::Holeburn => (Box::new(HoleburnModel), linspace(0.0, 1.0, 101), vec!["t_bath_k"]),
    };
    let clean = model.predict(&x, &truth);
    let sigma: Vec<f64> = match case {
        RecoveryCase::S21 => clean
            .chunks(2)
            .flat_map(|c| {
                let s = 0.005 * c[0].hypot(c[1]);
                [s, s]
            })
            .collect(),
        RecoveryCase::StretchedExp | RecoveryCase::StimulatedEcho => vec![0.01 * truth[0]; clean.len()],
        RecoveryCase::Tls => clean.iter().map(|v| 0.01 * v).collect(),
        RecoveryCase::Holeburn => vec![5e3; clean.len()],
    };
    let y = clean
        .iter()
        .zip(&sigma)
        .map(|(c, s)| c + s * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let names = model.param_names();
    let init = truth
        .iter()
        .zip(&names)
        .map(|(t, n)| {
            if fixed.contains(&n.as_str()) {
                return *t;
            }
            let shift: f64 = rng.gen_range(-0.1..0.1);
            match (case, n.as_str()) {
                // the line is ~1e-4 of f0 wide; perturb by a fraction of it
                (RecoveryCase::S21, "f0_hz") => t * (1.0 + 1e-5 * shift),
                _ => t * (1.0 + shift),
            }
        })
        .collect();
    Synthetic {
        model,
        x,
        y,
        sigma,
        truth,
        init,
        fixed,
    }
}

/// Fits one synthetic data set.
pub fn recover(data: &Synthetic, options: &FitOptions) -> Result<FitResult> {
    let mut problem = FitProblem::new(data.model.as_ref(), data.x.clone(), data.y.clone(), data.init.clone())
        .with_sigma(data.sigma.clone());
    for name in &data.fixed {
        problem = problem.fix(name)?;
    }
    fit(&problem, options)
}

/// Whether every free parameter lies within `k` standard errors of the truth.
pub fn within(result: &FitResult, truth: &[f64], k: f64) -> bool {
    result
        .params
        .iter()
        .zip(&result.sigmas)
        .zip(truth)
        .zip(&result.fixed)
        .all(|(((p, s), t), fixed)| *fixed || (p - t).abs() <= k * s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub case: RecoveryCase,
    pub runs: usize,
    pub covered: usize,
    pub not_converged: usize,
    pub errors: usize,
}

impl Coverage {
    pub fn fraction(&self) -> f64 {
        self.covered as f64 / self.runs as f64
    }
}

/// Runs `runs` seeded recoveries (seeds `base_seed..base_seed + runs`) and
/// counts 3-sigma coverage. Failed or non-converged fits count as misses.
pub fn coverage(case: RecoveryCase, runs: usize, base_seed: u64) -> Coverage {
    let options = FitOptions::default();
    let mut out = Coverage {
        case,
        runs,
        covered: 0,
        not_converged: 0,
        errors: 0,
    };
    for i in 0..runs as u64 {
        let data = synthesize(case, base_seed.wrapping_add(i));
        match recover(&data, &options) {
            Ok(r) if !r.converged => out.not_converged += 1,
            Ok(r) => {
                if within(&r, &data.truth, 3.0) {
                    out.covered += 1;
                }
            }
            Err(e) => {
                log::warn!("{} seed {}: {e}", case.label(), base_seed.wrapping_add(i));
                out.errors += 1;
            }
        }
    }
    out
}
