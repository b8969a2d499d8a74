//! `echo-process`.

use std::path::PathBuf;

use clap::Args;
use serde_json::json;
use spinfit::signal::{echo_area, synth_echo, EchoAnalysis, EchoSynthesis, QuadratureTrace, Taper};

use super::Outcome;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::plot::Series;
use crate::report::{Quantity, Report};
use crate::table::{load_table, render_csv, schemas, Cell};

#[derive(Debug, Args)]
pub struct EchoArgs {
    /// Trace CSVs (time, i, q); one echo area per file
    pub inputs: Vec<PathBuf>,
    /// Generate this many synthetic traces instead, seeded from --seed
    #[arg(long, conflicts_with = "inputs")]
    pub synth: Option<u64>,
    /// Synthetic echo amplitude, V
    #[arg(long, default_value_t = 1e-3)]
    pub amplitude: f64,
    /// Synthetic white-noise RMS per quadrature, V
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
}

fn analysis(cfg: &RunConfig) -> EchoAnalysis {
    EchoAnalysis {
        window_s: cfg.num("echo", "window_s"),
        window_center_s: None,
        band_center_hz: cfg.num("echo", "band_center_hz"),
        band_width_hz: cfg.num("echo", "band_width_hz"),
        bg_bin_width_hz: cfg.num("echo", "bg_bin_width_hz"),
        taper: match cfg.text("echo", "taper") {
            "hann" => Taper::Hann,
            _ => Taper::Rectangular,
        },
        subtract_background: cfg.flag("echo", "subtract_background"),
    }
}

pub fn echo_process(cfg: &mut RunConfig, args: &EchoArgs) -> CliResult<Outcome> {
    let an = analysis(cfg);
    let mut traces: Vec<(String, QuadratureTrace)> = Vec::new();
    let mut tables = Vec::new();
    if let Some(n) = args.synth {
        let seed = cfg.int("run", "seed");
        for k in 0..n {
            let p = EchoSynthesis {
                amplitude: args.amplitude,
                noise_rms: args.noise,
                center_f_hz: an.band_center_hz,
                seed: seed + k,
                ..EchoSynthesis::default()
            };
            traces.push((format!("synthetic seed {}", seed + k), synth_echo(&p)?));
        }
    } else {
        if args.inputs.is_empty() {
            return Err(CliError::Validation("echo-process needs trace files or --synth N".into()));
        }
        let joined: Vec<String> = args.inputs.iter().map(|p| p.display().to_string()).collect();
        cfg.set("io", "input", &joined.join(","))?;
        for path in &args.inputs {
            let t = load_table(path, &schemas::TRACE)?;
            let trace =
                QuadratureTrace::from_time_series(t.column("time"), t.column("i").to_vec(), t.column("q").to_vec())?;
            traces.push((path.display().to_string(), trace));
            tables.push(t);
        }
    }
    let mut report = Report::new("echo-process", cfg);
    for t in &tables {
        report.input(t);
    }
    let mut cells = Vec::new();
    let mut per_trace = Vec::new();
    let mut areas = Vec::new();
    for (id, (source, trace)) in traces.iter().enumerate() {
        let a = echo_area(trace, &an)?;
        cells.push(vec![Cell::Int(id as i64), Cell::Num(a.area), Cell::Num(a.pedestal)]);
        per_trace.push(json!({
            "trace_id": id,
            "source": source,
            "echo_area": a.area,
            "pedestal_area": a.pedestal,
            "signal_bins": a.signal_bins,
            "background_bins": a.background_bins,
        }));
        areas.push(a.area);
    }
    report.section("traces", json!(per_trace));
    let n = areas.len() as f64;
    let mean = areas.iter().sum::<f64>() / n;
    report.quantity("traces", Quantity::new(n, "", "signal::echo_areas"));
    report.quantity("mean_echo_area", Quantity::new(mean, "V s", "signal::echo_areas"));
    if areas.len() > 1 {
        let sd = (areas.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        report.quantity("echo_area_std", Quantity::new(sd, "V s", "signal::echo_areas"));
    }
    let mut out = Outcome::new(report);
    out.primary = Some(render_csv(&["trace_id", "echo_area", "pedestal_area"], &cells));
    out.plot = Some((
        vec![Series::points("echo area", (0..areas.len()).map(|k| k as f64).collect(), areas)],
        super::plot_style(cfg, "Echo areas", "trace", "area (V s)"),
    ));
    Ok(out)
}
