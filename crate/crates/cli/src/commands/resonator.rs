//! `s21-fit` and `tls-fit`.

use std::f64::consts::LN_10;
use std::path::PathBuf;

use clap::Args;
use spinfit::fit::models::{S21Model, TlsModel};
use spinfit::fit::{fit, FitProblem, Model};

use super::{dense, fit_options, fit_status, plot_style, weights, Outcome};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::plot::Series;
use crate::report::{fit_json, Quantity, Report};
use crate::table::{load_table, load_table_any, schemas};

#[derive(Debug, Args)]
pub struct S21Args {
    /// Transmission CSV, complex (s21_real, s21_imag) or polar (s21_mag_db, s21_phase_rad)
    #[arg(long)]
    pub input: Option<PathBuf>,
}

/// Initial `[f0, qi, qe, 1/q_alpha]` from the dip: depth `d = |S21|min`
/// gives `Qi/Qe = 1/d - 1`, and the half-power width of `|S21|^2` gives
/// the loaded Q.
pub fn estimate_s21(f: &[f64], re: &[f64], im: &[f64]) -> CliResult<[f64; 4]> {
    let mag2: Vec<f64> = re.iter().zip(im).map(|(r, i)| r * r + i * i).collect();
    let (k, &d2) = mag2
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| CliError::Validation("empty S21 trace".into()))?;
    let f0 = f[k];
    let d = d2.sqrt();
    if !(d < 0.99) {
        return Err(CliError::Validation(format!(
            "no resonance dip found: minimum |S21| = {d:.3} at {f0:.6e} Hz"
        )));
    }
    let half = 0.5 * (1.0 + d2);
    let lo = (0..k).rev().find(|&j| mag2[j] >= half).map(|j| f[j]);
    let hi = (k..f.len()).find(|&j| mag2[j] >= half).map(|j| f[j]);
    let fwhm = match (lo, hi) {
        (Some(a), Some(b)) => b - a,
        (Some(a), None) => 2.0 * (f0 - a),
        (None, Some(b)) => 2.0 * (b - f0),
        (None, None) => {
            return Err(CliError::Validation(
                "resonance wider than the trace: |S21|^2 never recovers to half depth".into(),
            ))
        }
    };
    let ql = f0 / fwhm.abs().max(f64::MIN_POSITIVE);
    let r = (1.0 / d.max(1e-6) - 1.0).max(1e-3);
    let qi = ql * (1.0 + r);
    Ok([f0, qi, qi / r, 0.0])
}

pub fn s21_fit(cfg: &mut RunConfig, args: &S21Args) -> CliResult<Outcome> {
    if let Some(p) = &args.input {
        cfg.set("io", "input", &p.display().to_string())?;
    }
    let path = cfg
        .path("io", "input")
        .ok_or_else(|| CliError::Validation("s21-fit needs --input or [io] input".into()))?;
    let table = load_table_any(&path, &[&schemas::S21_COMPLEX, &schemas::S21_POLAR])?;
    let f = table.column("frequency").to_vec();
    let (re, im): (Vec<f64>, Vec<f64>) = if table.schema == schemas::S21_COMPLEX.name {
        (table.column("s21_real").to_vec(), table.column("s21_imag").to_vec())
    } else {
        table
            .column("s21_mag")
            .iter()
            .zip(table.column("s21_phase"))
            .map(|(db, ph)| {
                let m = 10f64.powf(db / 20.0);
                (m * ph.cos(), m * ph.sin())
            })
            .unzip()
    };
    let mut init = estimate_s21(&f, &re, &im)?;
    for (j, key) in ["f0_hz", "qi", "qe", "inv_q_alpha"].iter().enumerate() {
        let v = cfg.num("resonator", key);
        if v != 0.0 {
            init[j] = v;
        }
    }
    let y: Vec<f64> = re.iter().zip(&im).flat_map(|(r, i)| [*r, *i]).collect();
    let model = S21Model;
    let result = fit(&FitProblem::new(&model, f.clone(), y, init.to_vec()), &fit_options(cfg))?;

    let mut report = Report::new("s21-fit", cfg);
    report.input(&table);
    report.section("fit", fit_json(&result, &["Hz", "", "", ""], Some(&table.digest)));
    report.section("initial_guess", serde_json::json!(init));
    let p = &result.params;
    let op = "fit::s21";
    report.quantity("f0", Quantity::scaled(p[0], 1e-9, "GHz", op));
    report.quantity("qi", Quantity::new(p[1], "", op));
    report.quantity("qe", Quantity::new(p[2], "", op));
    report.quantity("inv_q_alpha", Quantity::new(p[3], "", op));
    let ql = 1.0 / (1.0 / p[1] + 1.0 / p[2]);
    report.quantity("kappa", Quantity::scaled(p[0] / ql, 1e-6, "MHz", "resonator::kappa_hz"));
    report.quantity("kappa_e", Quantity::scaled(p[0] / p[2], 1e-6, "MHz", "resonator::kappa_e_hz"));

    let fx = dense(&f, 600, false);
    let pred = model.predict(&fx, p);
    let det = |v: &[f64]| v.iter().map(|x| (x - p[0]) * 1e-6).collect::<Vec<_>>();
    let mag = |re: &[f64], im: &[f64]| re.iter().zip(im).map(|(r, i)| r.hypot(*i)).collect::<Vec<_>>();
    let pr: Vec<f64> = pred.iter().step_by(2).copied().collect();
    let pi: Vec<f64> = pred.iter().skip(1).step_by(2).copied().collect();
    let series = vec![
        Series::points(cfg.text("plot", "data_label"), det(&f), mag(&re, &im)),
        Series::line(cfg.text("plot", "model_label"), det(&fx), mag(&pr, &pi)),
    ];
    let mut out = Outcome::new(report);
    out.status = fit_status(&result);
    out.plot = Some((series, plot_style(cfg, "S21", "detuning (MHz)", "|S21|")));
    Ok(out)
}

#[derive(Debug, Args)]
pub struct TlsArgs {
    /// Power sweep CSV (n_photons, qi[, qi_err])
    #[arg(long)]
    pub input: Option<PathBuf>,
}

pub fn tls_fit(cfg: &mut RunConfig, args: &TlsArgs) -> CliResult<Outcome> {
    if let Some(p) = &args.input {
        cfg.set("io", "input", &p.display().to_string())?;
    }
    let path = cfg
        .path("io", "input")
        .ok_or_else(|| CliError::Validation("tls-fit needs --input or [io] input".into()))?;
    let table = load_table(&path, &schemas::TLS)?;
    let n = table.column("n_photons").to_vec();
    let qi = table.column("qi").to_vec();
    if let Some(i) = qi.iter().position(|q| !(*q > 0.0)) {
        return Err(CliError::Validation(format!("qi in data row {} must be > 0", i + 1)));
    }
    if let Some(i) = n.iter().position(|v| !(*v > 0.0)) {
        return Err(CliError::Validation(format!("n_photons in data row {} must be > 0", i + 1)));
    }
    let y: Vec<f64> = qi.iter().map(|q| 1.0 / q).collect();
    let (ymin, ymax) = y.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    // critical photon number where the loss is halfway between its limits
    let mid = 0.5 * (ymin + ymax);
    let k = y
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - mid).abs().total_cmp(&(b.1 - mid).abs()))
        .map_or(0, |(k, _)| k);
    let init = vec![1.0 / ymin, (ymax - ymin).max(1e-3 * ymin), n[k].log10(), cfg.num("tls", "alpha_init")];
    let model = TlsModel;
    let mut problem = FitProblem::new(&model, n.clone(), y.clone(), init);
    if let Some(err) = table.optional("qi_err") {
        let s = weights("qi_err", err)?;
        problem = problem.with_sigma(s.iter().zip(&qi).map(|(e, q)| e / (q * q)).collect());
    }
    let result = fit(&problem, &fit_options(cfg))?;

    let mut report = Report::new("tls-fit", cfg);
    report.input(&table);
    report.section("fit", fit_json(&result, &["", "", "", ""], Some(&table.digest)));
    let op = "fit::tls";
    let p = &result.params;
    report.quantity("qi0", Quantity::new(p[0], "", op));
    report.quantity("f_tan_delta", Quantity::new(p[1], "", op));
    let nc = 10f64.powf(p[2]);
    report.quantity(
        "nc",
        Quantity::new(nc, "photons", op).with_note(format!("sigma {:.3e} propagated from log10_nc", LN_10 * nc * result.sigmas[2])),
    );
    report.quantity("alpha", Quantity::new(p[3], "", op));
    if p[3] >= 1.99 || p[3] <= 0.011 {
        report.note(format!("alpha = {:.3} sits on its bound", p[3]));
    }

    let nx = dense(&n, 300, true);
    let series = vec![
        Series::points(cfg.text("plot", "data_label"), n.clone(), qi),
        Series::line(
            cfg.text("plot", "model_label"),
            nx.clone(),
            model.predict(&nx, p).iter().map(|v| 1.0 / v).collect(),
        ),
    ];
    let mut style = plot_style(cfg, "TLS loss", "photon number", "Qi");
    style.log_x = true;
    let mut out = Outcome::new(report);
    out.status = fit_status(&result);
    out.plot = Some((series, style));
    Ok(out)
}
