//! `decay-fit`, `sd-map` and `noise-budget`.

use std::path::PathBuf;

use clap::Args;
use spinfit::coherence::{
    average_flip_probability, effective_linewidth, id_effective_density, noise_budget, sd_limited_t2,
    stimulated_echo, Lineshape, SpectralDiffusionModel,
};
use spinfit::fit::models::{HahnModel, SaturationRecoveryModel, StimulatedEchoModel};
use spinfit::fit::{fit, FitProblem, FitResult, Model};

use super::{dense, fit_options, fit_status, plot_style, weights, Outcome};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::plot::Series;
use crate::report::{fit_json, Quantity, Report};
use crate::table::{load_table_any, render_csv, schemas, Cell, MeasurementTable};

#[derive(Debug, Args)]
pub struct DecayArgs {
    /// Decay CSV (delay, amplitude[, amplitude_err]) or stimulated-echo CSV (tau, tw, amplitude)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// hahn or saturation_recovery (two-column decays only)
    #[arg(long)]
    pub model: Option<String>,
    /// Logarithmic amplitude axis in the plot
    #[arg(long)]
    pub log_y: bool,
}

fn sd_model(cfg: &RunConfig) -> SpectralDiffusionModel {
    SpectralDiffusionModel {
        gamma0_hz: cfg.num("spectral_diffusion", "gamma0_hz"),
        gamma_sd_hz: cfg.num("spectral_diffusion", "gamma_sd_hz"),
        rate_hz: cfg.num("spectral_diffusion", "rate_hz"),
        t1_s: cfg.num("spectral_diffusion", "t1_s"),
    }
}

/// First abscissa at which `y` crosses `level` (in the direction of travel).
fn crossing(x: &[f64], y: &[f64], level: f64, falling: bool) -> Option<f64> {
    x.iter()
        .zip(y)
        .find(|(_, v)| if falling { **v <= level } else { **v >= level })
        .map(|(t, _)| *t)
}

pub fn decay_fit(cfg: &mut RunConfig, args: &DecayArgs) -> CliResult<Outcome> {
    if let Some(p) = &args.input {
        cfg.set("io", "input", &p.display().to_string())?;
    }
    if let Some(m) = &args.model {
        cfg.set("decay", "model", m)?;
    }
    let path = cfg
        .path("io", "input")
        .ok_or_else(|| CliError::Validation("decay-fit needs --input or [io] input".into()))?;
    let table = load_table_any(&path, &[&schemas::STIMULATED_ECHO, &schemas::DECAY])?;
    if table.schema == schemas::STIMULATED_ECHO.name {
        return stimulated(cfg, &table);
    }
    let t = table.column("delay").to_vec();
    let a = table.column("amplitude").to_vec();
    let a0 = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let t_max = t.iter().copied().fold(0.0, f64::max);
    let hahn = cfg.text("decay", "model") == "hahn";
    let (model, init, units): (Box<dyn Model>, Vec<f64>, &[&str]) = if hahn {
        // amplitude reaches a0/e at 2 tau = T2
        let t2 = crossing(&t, &a, a0 / std::f64::consts::E, true).map_or(2.0 * t_max, |x| 2.0 * x);
        (Box::new(HahnModel), vec![a0, t2, 1.0], &["", "s", ""])
    } else {
        let t1 = crossing(&t, &a, (1.0 - (-1.0f64).exp()) * a0, false).unwrap_or(t_max);
        (Box::new(SaturationRecoveryModel), vec![a0, t1], &["", "s"])
    };
    let mut problem = FitProblem::new(model.as_ref(), t.clone(), a.clone(), init);
    if let Some(err) = table.optional("amplitude_err") {
        problem = problem.with_sigma(weights("amplitude_err", err)?);
    }
    let result = fit(&problem, &fit_options(cfg))?;

    let mut report = Report::new("decay-fit", cfg);
    report.input(&table);
    report.section("fit", fit_json(&result, units, Some(&table.digest)));
    let op = if hahn { "fit::hahn" } else { "fit::saturation_recovery" };
    report.quantity("a0", Quantity::new(result.params[0], "", op));
    let time = |r: &FitResult, j: usize| {
        Quantity::scaled(r.params[j], 1e3, "ms", op).with_note(format!("sigma {:.3e} ms", r.sigmas[j] * 1e3))
    };
    if hahn {
        report.quantity("t2", time(&result, 1));
        report.quantity("stretch_n", Quantity::new(result.params[2], "", op));
    } else {
        report.quantity("t1", time(&result, 1));
    }

    let tx = dense(&t, 300, false);
    let us = |v: &[f64]| v.iter().map(|x| x * 1e6).collect::<Vec<_>>();
    let series = vec![
        Series::points(cfg.text("plot", "data_label"), us(&t), a),
        Series::line(cfg.text("plot", "model_label"), us(&tx), model.predict(&tx, &result.params)),
    ];
    let x_label = if hahn { "pulse spacing tau (us)" } else { "delay (us)" };
    let mut style = plot_style(cfg, if hahn { "Hahn echo decay" } else { "Saturation recovery" }, x_label, "amplitude");
    style.log_y = args.log_y;
    let mut out = Outcome::new(report);
    out.status = fit_status(&result);
    out.plot = Some((series, style));
    Ok(out)
}

fn stimulated(cfg: &RunConfig, table: &MeasurementTable) -> CliResult<Outcome> {
    let tau = table.column("tau");
    let tw = table.column("tw");
    let amp = table.column("amplitude").to_vec();
    let sd = sd_model(cfg);
    let model = StimulatedEchoModel { t1_s: sd.t1_s };
    let x: Vec<f64> = tau.iter().zip(tw).flat_map(|(a, b)| [*a, *b]).collect();
    let a0 = amp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let init = vec![a0, sd.gamma0_hz, sd.gamma_sd_hz, sd.rate_hz];
    let result = fit(&FitProblem::new(&model, x, amp.clone(), init), &fit_options(cfg))?;

    let mut report = Report::new("decay-fit", cfg);
    report.input(table);
    report.section("fit", fit_json(&result, &["", "Hz", "Hz", "Hz"], Some(&table.digest)));
    report.note(format!("T1 held at {} s", sd.t1_s));
    let p = &result.params;
    let op = "fit::stimulated_echo";
    report.quantity("gamma0", Quantity::scaled(p[1], 1e-3, "kHz", op));
    report.quantity("gamma_sd", Quantity::scaled(p[2], 1e-3, "kHz", op));
    report.quantity("sd_rate", Quantity::new(p[3], "Hz", op));
    let fitted = SpectralDiffusionModel {
        gamma0_hz: p[1],
        gamma_sd_hz: p[2],
        rate_hz: p[3],
        t1_s: sd.t1_s,
    };
    report.quantity(
        "sd_limited_t2",
        Quantity::scaled(sd_limited_t2(p[2], p[3])?, 1e3, "ms", "coherence::sd_limited_t2"),
    );
    report.quantity(
        "gamma_eff_10ms",
        Quantity::scaled(effective_linewidth(0.0, 10e-3, &fitted)?, 1e-3, "kHz", "coherence::effective_linewidth"),
    );

    let mut taus: Vec<f64> = tau.to_vec();
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    let mut series = Vec::new();
    for t in &taus {
        let (xs, ys): (Vec<f64>, Vec<f64>) =
            tw.iter().zip(tau).zip(&amp).filter(|((_, a), _)| *a == t).map(|((w, _), y)| (*w, *y)).unzip();
        let wx = dense(&xs, 200, xs.iter().all(|w| *w > 0.0));
        let px: Vec<f64> = wx.iter().flat_map(|w| [*t, *w]).collect();
        series.push(Series::points(format!("tau {:.0} us", t * 1e6), xs, ys));
        series.push(Series::line(format!("model tau {:.0} us", t * 1e6), wx, model.predict(&px, p)));
    }
    let mut style = plot_style(cfg, "Stimulated echo", "waiting time (s)", "amplitude");
    style.log_x = tw.iter().all(|w| *w > 0.0);
    let mut out = Outcome::new(report);
    out.status = fit_status(&result);
    out.plot = Some((series, style));
    Ok(out)
}

#[derive(Debug, Args)]
pub struct SdMapArgs {
    /// Comma-separated pulse spacings, s
    #[arg(long, value_delimiter = ',', required = true)]
    pub tau: Vec<f64>,
    /// Comma-separated waiting times, s
    #[arg(long, value_delimiter = ',', required = true)]
    pub tw: Vec<f64>,
}

pub fn sd_map(cfg: &mut RunConfig, args: &SdMapArgs) -> CliResult<Outcome> {
    let sd = sd_model(cfg);
    sd.validate()?;
    let mut cells = Vec::new();
    let mut series = Vec::new();
    for &tau in &args.tau {
        let mut ys = Vec::new();
        for &tw in &args.tw {
            let a = stimulated_echo(tau, tw, &sd)?;
            cells.push(vec![Cell::Num(tau), Cell::Num(tw), Cell::Num(a)]);
            ys.push(a);
        }
        series.push(Series::line(format!("tau {:.0} us", tau * 1e6), args.tw.clone(), ys));
    }
    let mut report = Report::new("sd-map", cfg);
    report.quantity(
        "sd_limited_t2",
        Quantity::scaled(sd_limited_t2(sd.gamma_sd_hz, sd.rate_hz)?, 1e3, "ms", "coherence::sd_limited_t2"),
    );
    report.quantity(
        "gamma_eff_10ms",
        Quantity::scaled(effective_linewidth(0.0, 10e-3, &sd)?, 1e-3, "kHz", "coherence::effective_linewidth"),
    );
    report.quantity(
        "stimulated_echo_reference",
        Quantity::new(stimulated_echo(cfg.num("spectral_diffusion", "tau_s"), 10e-3, &sd)?, "", "coherence::stimulated_echo")
            .with_note(format!("tau = {} s, waiting time 10 ms", cfg.num("spectral_diffusion", "tau_s"))),
    );
    let mut style = plot_style(cfg, "Stimulated echo", "waiting time (s)", "amplitude");
    style.log_x = args.tw.iter().all(|w| *w > 0.0);
    let mut out = Outcome::new(report);
    out.primary = Some(render_csv(&["tau_s", "tw_s", "amplitude"], &cells));
    out.plot = Some((series, style));
    Ok(out)
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    /// Hahn-echo coherence time, s
    #[arg(long)]
    pub t2_hahn: Option<f64>,
    /// CPMG coherence time, s
    #[arg(long)]
    pub t2_cpmg: Option<f64>,
    /// Effective g of the transition
    #[arg(long)]
    pub g: Option<f64>,
}

pub fn noise(cfg: &mut RunConfig, args: &NoiseArgs) -> CliResult<Outcome> {
    for (key, v) in [("t2_hahn_s", args.t2_hahn), ("t2_cpmg_s", args.t2_cpmg), ("g_eff", args.g)] {
        if let Some(v) = v {
            cfg.set_num("noise", key, v)?;
        }
    }
    let (th, tc, g) = (cfg.num("noise", "t2_hahn_s"), cfg.num("noise", "t2_cpmg_s"), cfg.num("noise", "g_eff"));
    let nb = noise_budget(th, tc, g)?;
    let mut report = Report::new("noise-budget", cfg);
    let op = "coherence::noise_budget";
    report.quantity(
        "delta_b",
        Quantity::scaled(nb.delta_b_t, 1e9, "nT", op).with_note("residual rate 1/(pi T2_cpmg)"),
    );
    match nb.delta_b_unit_convention_t {
        Some(v) => report.quantity(
            "delta_b_unit_convention",
            Quantity::scaled(v, 1e9, "nT", op).with_note("residual rate 1/T2_cpmg"),
        ),
        None => report.note(format!(
            "with residual rate 1/T2_cpmg = {:.4e} Hz the residual exceeds the Hahn rate {:.4e} Hz, so no field noise is left",
            nb.residual_rate_unit_convention_hz, nb.hahn_rate_hz
        )),
    }
    report.quantity("sensitivity", Quantity::scaled(nb.sensitivity_hz_per_t, 1e-9, "GHz/T", op));
    report.quantity("hahn_rate", Quantity::new(nb.hahn_rate_hz, "Hz", op));
    report.quantity("residual_rate", Quantity::new(nb.residual_rate_hz, "Hz", op));
    report.quantity(
        "id_effective_density",
        Quantity::scaled(id_effective_density(tc, g)?, 1e-6, "cm^-3", "coherence::id_effective_density"),
    );
    let shape: Lineshape = cfg.text("noise", "lineshape").parse()?;
    let p = average_flip_probability(cfg.num("noise", "rabi_hz"), cfg.num("noise", "inhomogeneous_fwhm_hz"), shape)?;
    report.quantity(
        "flip_probability",
        Quantity::new(p, "", "coherence::average_flip_probability")
            .with_note(format!("{} line, Rabi {} Hz", cfg.text("noise", "lineshape"), cfg.num("noise", "rabi_hz"))),
    );
    Ok(Outcome::new(report))
}
