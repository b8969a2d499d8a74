//! `purcell` and `holeburn`.

use std::f64::consts::PI;
use std::path::PathBuf;

use clap::Args;
use spinfit::constants::{K_B, MU_B};
use spinfit::fit::models::{BlochLinewidthModel, HoleburnModel};
use spinfit::fit::{fit, FitProblem, Model};
use spinfit::optical::{
    bloch_linewidth, g0_from_mode_volume, holeburn_b_model, local_field_correction, mode_volume_from_purcell,
    purcell_factor, purcell_t1_vs_detuning, t2star_from_linewidth, OpticalCavityModel, OpticalLinewidthModel,
};

use super::{dense, fit_options, fit_status, parse_linspace, plot_style, weights, Outcome};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::plot::Series;
use crate::report::{fit_json, Quantity, Report};
use crate::table::{load_table_any, render_csv, schemas, Cell};

#[derive(Debug, Args)]
pub struct PurcellArgs {
    /// Lifetime without cavity, s
    #[arg(long)]
    pub tau0: Option<f64>,
    /// Lifetime on cavity resonance, s
    #[arg(long)]
    pub tau_cav: Option<f64>,
    /// Branching ratio of the cavity-coupled transition
    #[arg(long)]
    pub zeta: Option<f64>,
    /// Measured hole linewidth, Hz, inverted for T2* at `--rabi`
    #[arg(long)]
    pub linewidth: Option<f64>,
    /// Optical Rabi frequency for `--linewidth`, Hz (ordinary frequency)
    #[arg(long, default_value_t = 0.0)]
    pub rabi: f64,
    /// Detuning grid start:stop:count in Hz; writes T1 vs detuning as CSV
    #[arg(long, allow_hyphen_values = true)]
    pub sweep: Option<String>,
}

fn cavity(cfg: &RunConfig) -> OpticalCavityModel {
    OpticalCavityModel {
        q: cfg.num("optical", "q"),
        lambda_m: cfg.num("optical", "lambda_m"),
        refractive_n: cfg.num("optical", "refractive_n"),
        gamma_cav_hz: cfg.num("optical", "gamma_cav_hz"),
        branching_zeta: cfg.num("optical", "zeta"),
    }
}

pub fn purcell(cfg: &mut RunConfig, args: &PurcellArgs) -> CliResult<Outcome> {
    for (key, v) in [("tau0_s", args.tau0), ("tau_cav_s", args.tau_cav), ("zeta", args.zeta)] {
        if let Some(v) = v {
            cfg.set_num("optical", key, v)?;
        }
    }
    let cav = cavity(cfg);
    cav.validate()?;
    let (tau0, zeta) = (cfg.num("optical", "tau0_s"), cav.branching_zeta);
    let fp = purcell_factor(tau0, cfg.num("optical", "tau_cav_s"), zeta)?;
    let vm = mode_volume_from_purcell(fp, &cav)?;
    let omega_a = 2.0 * PI * cfg.num("optical", "frequency_hz");
    let g0 = g0_from_mode_volume(cfg.num("optical", "dipole_cm"), cav.refractive_n, omega_a, vm.m3)?;
    let (t1, t2) = (cfg.num("optical", "t1_s"), cfg.num("optical", "t2_star_s"));

    let mut report = Report::new("purcell", cfg);
    report.quantity("purcell_factor", Quantity::new(fp, "", "optical::purcell_factor"));
    report.quantity(
        "local_field_correction",
        Quantity::new(local_field_correction(cav.refractive_n)?, "", "optical::local_field_correction"),
    );
    report.quantity(
        "mode_volume",
        Quantity::new(vm.cubic_wavelengths, "(lambda/n)^3", "optical::mode_volume_from_purcell"),
    );
    report.quantity("mode_volume_m3", Quantity::scaled(vm.m3, 1e18, "um^3", "optical::mode_volume_from_purcell"));
    report.quantity(
        "g0",
        Quantity::new(g0, "s^-1", "optical::g0_from_mode_volume")
            .with_note(format!("half of this, {:.3e}, is the figure usually quoted in MHz", 0.5 * g0)),
    );
    let t1_res = purcell_t1_vs_detuning(0.0, tau0, zeta, fp, cav.gamma_cav_hz)?;
    let t1_far = purcell_t1_vs_detuning(1e3 * cav.gamma_cav_hz, tau0, zeta, fp, cav.gamma_cav_hz)?;
    report.quantity("t1_on_resonance", Quantity::scaled(t1_res, 1e3, "ms", "optical::purcell_t1_vs_detuning"));
    report.quantity("t1_far_detuned", Quantity::scaled(t1_far, 1e3, "ms", "optical::purcell_t1_vs_detuning"));
    report.quantity(
        "bloch_linewidth_low_power",
        Quantity::scaled(bloch_linewidth(0.0, t1, t2)?, 1e-3, "kHz", "optical::bloch_linewidth"),
    );
    if let Some(gamma) = args.linewidth {
        let t2s = t2star_from_linewidth(gamma, 2.0 * PI * args.rabi, t1)?;
        report.quantity(
            "t2_star",
            Quantity::scaled(t2s, 1e6, "us", "optical::t2star_from_linewidth")
                .with_note(format!("linewidth {gamma} Hz at Rabi {} Hz, T1 {t1} s", args.rabi)),
        );
    }
    let mut out = Outcome::new(report);
    if let Some(s) = &args.sweep {
        let grid = parse_linspace(s)?;
        let t1s = grid
            .iter()
            .map(|d| purcell_t1_vs_detuning(*d, tau0, zeta, fp, cav.gamma_cav_hz))
            .collect::<Result<Vec<_>, _>>()?;
        let cells: Vec<Vec<Cell>> = grid.iter().zip(&t1s).map(|(d, t)| vec![Cell::Num(*d), Cell::Num(*t)]).collect();
        out.primary = Some(render_csv(&["detuning_hz", "t1_s"], &cells));
        out.plot = Some((
            vec![Series::line(
                "T1",
                grid.iter().map(|d| d * 1e-9).collect(),
                t1s.iter().map(|t| t * 1e3).collect(),
            )],
            plot_style(cfg, "Lifetime vs cavity detuning", "detuning (GHz)", "T1 (ms)"),
        ));
    }
    Ok(out)
}

#[derive(Debug, Args)]
pub struct HoleburnArgs {
    /// Hole widths vs drive (rabi_rad_s, gamma) or vs field (b_field, gamma)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Field grid start:stop:count in tesla when evaluating the model
    #[arg(long, allow_hyphen_values = true)]
    pub field: Option<String>,
}

fn linewidth_model(cfg: &RunConfig) -> OpticalLinewidthModel {
    OpticalLinewidthModel {
        gamma0_hz: cfg.num("holeburn", "gamma0_hz"),
        gamma_sd_hz: cfg.num("holeburn", "gamma_sd_hz"),
        rate_hz: 0.0,
        gamma_tls_hz: 0.0,
        g_env: cfg.num("holeburn", "g_env"),
        t_bath_k: cfg.num("holeburn", "t_bath_k"),
    }
}

/// Field at which the frozen fraction `sech^2` falls to one half.
fn half_freeze_field(g_env: f64, t_bath: f64) -> f64 {
    2.0f64.sqrt().acosh() * 2.0 * K_B * t_bath / (g_env * MU_B)
}

pub fn holeburn(cfg: &mut RunConfig, args: &HoleburnArgs) -> CliResult<Outcome> {
    if let Some(p) = &args.input {
        cfg.set("io", "input", &p.display().to_string())?;
    }
    let Some(path) = cfg.path("io", "input") else {
        return evaluate(cfg, args);
    };
    let table = load_table_any(&path, &[&schemas::HOLE_LINEWIDTH, &schemas::PLE_LINEWIDTH])?;
    let gamma = table.column("gamma").to_vec();
    let sigma = table.optional("gamma_err").map(|s| weights("gamma_err", s)).transpose()?;
    let mut report = Report::new("holeburn", cfg);
    report.input(&table);

    let (x, model, problem_init, x_label, x_scale): (Vec<f64>, Box<dyn Model>, Vec<f64>, &str, f64) =
        if table.schema == schemas::HOLE_LINEWIDTH.name {
            let x = table.column("rabi").to_vec();
            let t1 = cfg.num("optical", "t1_s");
            let k = (0..x.len()).min_by(|a, b| x[*a].total_cmp(&x[*b])).expect("non-empty table");
            let t2 = t2star_from_linewidth(gamma[k], x[k], t1)?;
            (x, Box::new(BlochLinewidthModel), vec![t1, t2], "Rabi frequency (rad/s)", 1.0)
        } else {
            let m = linewidth_model(cfg);
            let x = table.column("b_field").to_vec();
            (
                x,
                Box::new(HoleburnModel),
                vec![m.gamma0_hz, m.gamma_sd_hz, m.g_env, m.t_bath_k],
                "B (mT)",
                1e3,
            )
        };
    let bloch = table.schema == schemas::HOLE_LINEWIDTH.name;
    let mut problem = FitProblem::new(model.as_ref(), x.clone(), gamma.clone(), problem_init);
    if bloch {
        problem = problem.fix("t1_s")?;
        report.note(format!("T1 held at {} s", cfg.num("optical", "t1_s")));
    } else if cfg.flag("holeburn", "fix_t_bath") {
        // only g_env / T_bath is identifiable
        problem = problem.fix("t_bath_k")?;
        report.note(format!("bath temperature held at {} K", cfg.num("holeburn", "t_bath_k")));
    }
    if let Some(s) = sigma {
        problem = problem.with_sigma(s);
    }
    let result = fit(&problem, &fit_options(cfg))?;
    let p = result.params.clone();
    if bloch {
        report.section("fit", fit_json(&result, &["s", "s"], Some(&table.digest)));
        report.quantity(
            "t2_star",
            Quantity::scaled(p[1], 1e6, "us", "fit::bloch_linewidth")
                .with_note(format!("sigma {:.2} us", result.sigmas[1] * 1e6)),
        );
        report.quantity(
            "dephasing_linewidth",
            Quantity::scaled(1.0 / (PI * p[1]), 1e-3, "kHz", "optical::bloch_linewidth"),
        );
    } else {
        report.section("fit", fit_json(&result, &["Hz", "Hz", "", "K"], Some(&table.digest)));
        let op = "fit::holeburn";
        report.quantity("gamma0", Quantity::scaled(p[0], 1e-3, "kHz", op));
        report.quantity("gamma_sd", Quantity::scaled(p[1], 1e-3, "kHz", op));
        report.quantity("g_env", Quantity::new(p[2], "", op));
        report.quantity("zero_field_linewidth", Quantity::scaled(p[0] + p[1], 1e-3, "kHz", op));
    }
    let xs = dense(&x, 300, false);
    let series = vec![
        Series::points(cfg.text("plot", "data_label"), x.iter().map(|v| v * x_scale).collect(), gamma.iter().map(|g| g * 1e-3).collect()),
        Series::line(
            cfg.text("plot", "model_label"),
            xs.iter().map(|v| v * x_scale).collect(),
            model.predict(&xs, &p).iter().map(|g| g * 1e-3).collect(),
        ),
    ];
    let mut out = Outcome::new(report);
    out.status = fit_status(&result);
    out.plot = Some((series, plot_style(cfg, "Hole linewidth", x_label, "linewidth (kHz)")));
    Ok(out)
}

fn evaluate(cfg: &RunConfig, args: &HoleburnArgs) -> CliResult<Outcome> {
    let m = linewidth_model(cfg);
    m.validate()?;
    let b_half = half_freeze_field(m.g_env, m.t_bath_k);
    let mut report = Report::new("holeburn", cfg);
    let op = "optical::holeburn_b_model";
    report.quantity("zero_field_linewidth", Quantity::scaled(holeburn_b_model(0.0, &m)?, 1e-3, "kHz", op));
    report.quantity("high_field_linewidth", Quantity::scaled(m.gamma0_hz, 1e-3, "kHz", op));
    report.quantity("half_freeze_field", Quantity::scaled(b_half, 1e3, "mT", "coherence::freeze_factor"));
    let grid = match &args.field {
        Some(g) => parse_linspace(g)?,
        None => parse_linspace(&format!("0:{}:201", 6.0 * b_half))?,
    };
    if grid.iter().any(|b| *b < 0.0) {
        return Err(CliError::Validation("field grid must be >= 0".into()));
    }
    let gamma = grid.iter().map(|b| holeburn_b_model(*b, &m)).collect::<Result<Vec<_>, _>>()?;
    let cells: Vec<Vec<Cell>> = grid.iter().zip(&gamma).map(|(b, g)| vec![Cell::Num(*b), Cell::Num(*g)]).collect();
    let mut out = Outcome::new(report);
    out.primary = Some(render_csv(&["b_field_t", "gamma_hz"], &cells));
    out.plot = Some((
        vec![Series::line(
            "model",
            grid.iter().map(|b| b * 1e3).collect(),
            gamma.iter().map(|g| g * 1e-3).collect(),
        )],
        plot_style(cfg, "Hole linewidth vs field", "B (mT)", "linewidth (kHz)"),
    ));
    Ok(out)
}
