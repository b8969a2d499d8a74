//! `angle-map` and `spin-signature`.

use std::path::PathBuf;

use clap::Args;
use serde_json::json;
use spinfit::anisotropy::{angle_map as map_orbit, resonance_field, SubSiteOrbit, TiltAxis, TiltParams};
use spinfit::fit::models::SpinSignatureModel;
use spinfit::fit::{fit, Bound, FitProblem, Model};
use spinfit::resonator::{
    count_to_density, ensemble_to_count, spin_signature, SpinEnsemble,
};

use super::{dense, fit_options, fit_status, parse_linspace, parse_range, plot_style, Outcome};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::plot::Series;
use crate::report::{fit_json, Quantity, Report};
use crate::table::{load_table, render_csv, schemas, Cell};

/// C3i sub-site ids are shifted by this much when both sites are mapped.
pub const C3I_ID_OFFSET: usize = 6;

#[derive(Debug, Args)]
pub struct AngleMapArgs {
    /// Microwave frequency, Hz
    #[arg(long)]
    pub freq: Option<f64>,
    /// In-plane angle grid start:stop:step in degrees (stop excluded)
    #[arg(long, allow_hyphen_values = true, default_value = "0:360:1")]
    pub theta: String,
    /// c2, c3i or both
    #[arg(long)]
    pub site: Option<String>,
    /// Keep the angular offset but drop the out-of-plane tilt
    #[arg(long)]
    pub no_tilt: bool,
}

fn tilt(cfg: &RunConfig) -> TiltParams {
    TiltParams {
        dphi1_deg: cfg.num("anisotropy", "tilt_dphi1_deg"),
        dphi2_deg: cfg.num("anisotropy", "tilt_dphi2_deg"),
        theta0_deg: cfg.num("anisotropy", "tilt_theta0_deg"),
        axis: match cfg.text("anisotropy", "tilt_axis") {
            "fixed" => TiltAxis::FixedReference,
            _ => TiltAxis::PerpendicularToField,
        },
    }
}

pub fn angle_map(cfg: &mut RunConfig, args: &AngleMapArgs) -> CliResult<Outcome> {
    if let Some(f) = args.freq {
        cfg.set_num("spin", "frequency_hz", f)?;
    }
    if let Some(s) = &args.site {
        cfg.set("anisotropy", "site", s)?;
    }
    let f = cfg.num("spin", "frequency_hz");
    let grid = parse_range(&args.theta)?;
    let mut tilt = tilt(cfg);
    if args.no_tilt {
        tilt = tilt.without_tilt();
    }
    let site = cfg.text("anisotropy", "site").to_string();
    let mut orbits = Vec::new();
    if site != "c3i" {
        let c2 = SubSiteOrbit::c2(
            [cfg.num("anisotropy", "c2_g1"), cfg.num("anisotropy", "c2_g2"), cfg.num("anisotropy", "c2_g3")],
            cfg.num("anisotropy", "c2_rotation_deg"),
        )?;
        orbits.push(("C2", c2, 0));
    }
    if site != "c2" {
        let c3i = SubSiteOrbit::c3i(
            cfg.num("anisotropy", "c3i_g_parallel"),
            cfg.num("anisotropy", "c3i_g_perpendicular"),
        )?;
        let offset = if site == "both" { C3I_ID_OFFSET } else { 0 };
        orbits.push(("C3i", c3i, offset));
    }

    let mut rows = Vec::new();
    let mut report = Report::new("angle-map", cfg);
    let mut series = Vec::new();
    let mut ids = serde_json::Map::new();
    for (label, orbit, offset) in &orbits {
        let map = map_orbit(orbit, f, &grid, &tilt)?;
        for m in orbit.members() {
            let id = m.id + offset;
            ids.insert(id.to_string(), json!(format!("{label} sub-site {}", m.id)));
            let pts: Vec<&_> = map.iter().filter(|r| r.sub_site_id == m.id).collect();
            series.push(Series::line(
                format!("{label} #{}", m.id),
                pts.iter().map(|r| r.theta_deg).collect(),
                pts.iter().map(|r| r.b_res_t * 1e3).collect(),
            ));
        }
        let (lo, hi) = map
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.b_res_t), hi.max(r.b_res_t)));
        let key = label.to_ascii_lowercase();
        report.quantity(&format!("{key}_b_res_min"), Quantity::scaled(lo, 1e3, "mT", "anisotropy::angle_map"));
        report.quantity(&format!("{key}_b_res_max"), Quantity::scaled(hi, 1e3, "mT", "anisotropy::angle_map"));
        rows.extend(map.into_iter().map(|r| (r.theta_deg, r.sub_site_id + offset, r.b_res_t)));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    report.section("sub_sites", serde_json::Value::Object(ids));
    report.section("grid", json!({"theta_deg": args.theta, "points": grid.len(), "rows": rows.len()}));

    let cells: Vec<Vec<Cell>> = rows
        .iter()
        .map(|(t, id, b)| vec![Cell::Num(*t), Cell::Int(*id as i64), Cell::Num(b * 1e3)])
        .collect();
    let mut out = Outcome::new(report);
    out.primary = Some(render_csv(&["theta_deg", "sub_site_id", "b_res_mT"], &cells));
    out.plot = Some((series, plot_style(cfg, "Resonance field", "in-plane angle (deg)", "B_res (mT)")));
    Ok(out)
}

#[derive(Debug, Args)]
pub struct SignatureArgs {
    /// Field-sweep CSV (b_field, delta_kappa, delta_f) to fit
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Fit a polynomial background of `[spin] detrend_order` on each channel
    /// together with the line
    #[arg(long)]
    pub detrend: bool,
    /// Evaluation grid start:stop:count in tesla when no input is given
    #[arg(long, allow_hyphen_values = true)]
    pub field: Option<String>,
}

fn ensemble(cfg: &RunConfig) -> CliResult<SpinEnsemble> {
    let g = cfg.num("spin", "g_eff");
    let b0 = match cfg.num("spin", "b0_t") {
        b if b > 0.0 => b,
        _ => resonance_field(g, cfg.num("spin", "frequency_hz"))?,
    };
    let ens = SpinEnsemble {
        omega_ens_hz: cfg.num("spin", "omega_ens_hz"),
        gamma_s_hz: cfg.num("spin", "gamma_s_hz"),
        g_eff: g,
        b0_t: b0,
        g_single_hz: cfg.num("spin", "g_single_hz"),
        volume_m3: cfg.num("spin", "volume_m3"),
    };
    ens.validate()?;
    Ok(ens)
}

fn count_quantities(report: &mut Report, cfg: &RunConfig, omega: f64, sigma_omega: Option<f64>) -> CliResult<()> {
    let g = cfg.num("spin", "g_single_hz");
    let n = ensemble_to_count(omega, g)?;
    let mut q = Quantity::new(n, "", "resonator::ensemble_to_count");
    if let Some(s) = sigma_omega {
        q = q.with_note(format!("sigma {:.3e} from the fitted coupling", 2.0 * n * s / omega));
    }
    report.quantity("spin_count", q);
    let d = count_to_density(n, cfg.num("spin", "volume_m3"), cfg.num("spin", "host_density_m3"))?;
    report.quantity("spin_density", Quantity::new(d.per_cm3(), "cm^-3", "resonator::count_to_density"));
    report.quantity("spin_concentration", Quantity::new(d.ppm, "ppm", "resonator::count_to_density"));
    Ok(())
}

pub fn signature(cfg: &mut RunConfig, args: &SignatureArgs) -> CliResult<Outcome> {
    if let Some(p) = &args.input {
        cfg.set("io", "input", &p.display().to_string())?;
    }
    let ens = ensemble(cfg)?;
    let Some(path) = cfg.path("io", "input") else {
        return evaluate(cfg, args, &ens);
    };
    let table = load_table(&path, &schemas::FIELD_SWEEP)?;
    let b = table.column("b_field").to_vec();
    let (mut dk, mut df) = (table.column("delta_kappa").to_vec(), table.column("delta_f").to_vec());
    let order = args.detrend.then(|| cfg.int("spin", "detrend_order") as usize);
    let model = SignatureWithBackground::new(SpinSignatureModel { g_eff: ens.g_eff }, order, &b);
    let y: Vec<f64> = dk.iter().zip(&df).flat_map(|(k, f)| [*k, *f]).collect();
    let mut init = vec![ens.omega_ens_hz, ens.gamma_s_hz, ens.b0_t];
    init.resize(model.param_names().len(), 0.0);
    let result = fit(&FitProblem::new(&model, b.clone(), y, init), &fit_options(cfg))?;
    if order.is_some() {
        let bg = model.background(&b, &result.params);
        for (k, (bk, bf)) in bg.iter().enumerate() {
            dk[k] -= bk;
            df[k] -= bf;
        }
    }

    let mut report = Report::new("spin-signature", cfg);
    report.input(&table);
    let mut units = vec!["Hz", "Hz", "T"];
    units.resize(result.params.len(), "Hz");
    report.section("fit", fit_json(&result, &units, Some(&table.digest)));
    let (omega, s_omega) = result.param("omega_ens_hz").expect("model parameter");
    let (gamma, _) = result.param("gamma_s_hz").expect("model parameter");
    let (b0, _) = result.param("b0_t").expect("model parameter");
    report.quantity("omega_ens", Quantity::scaled(omega, 1e-6, "MHz", "fit::spin_signature"));
    report.quantity("gamma_s", Quantity::scaled(gamma, 1e-6, "MHz", "fit::spin_signature"));
    report.quantity("b0", Quantity::scaled(b0, 1e3, "mT", "fit::spin_signature"));
    count_quantities(&mut report, cfg, omega, Some(s_omega))?;
    if let Some(o) = order {
        report.note(format!("order-{o} polynomial background fitted jointly on each channel and removed from the plotted data"));
    }

    let bx = dense(&b, 400, false);
    let pred = model.inner.predict(&bx, &result.params[..3]);
    let mt: Vec<f64> = b.iter().map(|v| v * 1e3).collect();
    let mx: Vec<f64> = bx.iter().map(|v| v * 1e3).collect();
    let mhz = |v: &[f64]| v.iter().map(|x| x * 1e-6).collect::<Vec<_>>();
    let series = vec![
        Series::points("delta_kappa data", mt.clone(), mhz(&dk)),
        Series::points("delta_f data", mt, mhz(&df)),
        Series::line("delta_kappa model", mx.clone(), pred.iter().step_by(2).map(|v| v * 1e-6).collect()),
        Series::line("delta_f model", mx, pred.iter().skip(1).step_by(2).map(|v| v * 1e-6).collect()),
    ];
    let mut out = Outcome::new(report);
    out.status = fit_status(&result);
    out.plot = Some((series, plot_style(cfg, "Spin signature", "B (mT)", "shift (MHz)")));
    Ok(out)
}

/// Spin signature plus an independent polynomial background on each
/// channel, in the field scaled to [-1, 1] over the sweep.
struct SignatureWithBackground {
    inner: SpinSignatureModel,
    order: Option<usize>,
    mid: f64,
    half: f64,
}

impl SignatureWithBackground {
    fn new(inner: SpinSignatureModel, order: Option<usize>, b: &[f64]) -> Self {
        let (lo, hi) = b.iter().fold((f64::MAX, f64::MIN), |(l, h), v| (l.min(*v), h.max(*v)));
        Self {
            inner,
            order,
            mid: 0.5 * (lo + hi),
            half: (0.5 * (hi - lo)).max(f64::MIN_POSITIVE),
        }
    }

    fn terms(&self) -> usize {
        self.order.map_or(0, |o| o + 1)
    }

    /// `(delta_kappa, delta_f)` background at each field.
    fn background(&self, x: &[f64], p: &[f64]) -> Vec<(f64, f64)> {
        let n = self.terms();
        let (ck, cf) = p[3..].split_at(n);
        x.iter()
            .map(|b| {
                let u = (b - self.mid) / self.half;
                (0..n).fold((0.0, 0.0), |(k, f), j| {
                    let uj = u.powi(j as i32);
                    (k + ck[j] * uj, f + cf[j] * uj)
                })
            })
            .collect()
    }
}

impl Model for SignatureWithBackground {
    fn name(&self) -> &str {
        if self.order.is_some() {
            "spin_signature_with_background"
        } else {
            self.inner.name()
        }
    }
    fn param_names(&self) -> Vec<String> {
        let mut names = self.inner.param_names();
        for ch in ["kappa_bg", "shift_bg"] {
            names.extend((0..self.terms()).map(|j| format!("{ch}_{j}")));
        }
        names
    }
    fn outputs_per_point(&self) -> usize {
        2
    }
    fn predict(&self, x: &[f64], p: &[f64]) -> Vec<f64> {
        let mut y = self.inner.predict(x, &p[..3]);
        for (k, (bk, bf)) in self.background(x, p).into_iter().enumerate() {
            y[2 * k] += bk;
            y[2 * k + 1] += bf;
        }
        y
    }
    fn default_bounds(&self) -> Vec<Bound> {
        let mut b = self.inner.default_bounds();
        b.resize(3 + 2 * self.terms(), Bound::FREE);
        b
    }
}

fn evaluate(cfg: &RunConfig, args: &SignatureArgs, ens: &SpinEnsemble) -> CliResult<Outcome> {
    let grid = match &args.field {
        Some(g) => parse_linspace(g)?,
        None => {
            // six half-widths either side of the line
            let half = 6.0 * ens.gamma_s_hz / (ens.detuning_hz(ens.b0_t + 1.0) - ens.detuning_hz(ens.b0_t));
            parse_linspace(&format!("{}:{}:401", ens.b0_t - half, ens.b0_t + half))?
        }
    };
    if args.detrend {
        return Err(CliError::Validation("--detrend needs an --input field sweep".into()));
    }
    let sig: Vec<_> = grid.iter().map(|b| spin_signature(*b, ens)).collect();
    let mut report = Report::new("spin-signature", cfg);
    let peak = spin_signature(ens.b0_t, ens);
    report.quantity("b0", Quantity::scaled(ens.b0_t, 1e3, "mT", "anisotropy::resonance_field"));
    report.quantity(
        "delta_kappa_peak",
        Quantity::scaled(peak.delta_kappa_hz, 1e-6, "MHz", "resonator::spin_signature"),
    );
    report.quantity(
        "delta_f_extremum",
        Quantity::scaled(
            ens.omega_ens_hz * ens.omega_ens_hz / (2.0 * ens.gamma_s_hz),
            1e-6,
            "MHz",
            "resonator::spin_signature",
        ),
    );
    count_quantities(&mut report, cfg, ens.omega_ens_hz, None)?;
    let cells: Vec<Vec<Cell>> = grid
        .iter()
        .zip(&sig)
        .map(|(b, s)| vec![Cell::Num(*b), Cell::Num(s.delta_kappa_hz), Cell::Num(s.delta_f_hz)])
        .collect();
    let mt: Vec<f64> = grid.iter().map(|v| v * 1e3).collect();
    let series = vec![
        Series::line("delta_kappa", mt.clone(), sig.iter().map(|s| s.delta_kappa_hz * 1e-6).collect()),
        Series::line("delta_f", mt, sig.iter().map(|s| s.delta_f_hz * 1e-6).collect()),
    ];
    let mut out = Outcome::new(report);
    out.primary = Some(render_csv(&["b_field_t", "delta_kappa_hz", "delta_f_hz"], &cells));
    out.plot = Some((series, plot_style(cfg, "Spin signature", "B (mT)", "shift (MHz)")));
    Ok(out)
}
