//! Subcommand implementations. Each returns an [`Outcome`]; [`emit`] writes
//! the CSV, plot and report it carries to the configured destinations.

use std::io::Write;

use clap::Args;
use spinfit::fit::{FitOptions, FitResult};

use crate::config::RunConfig;
use crate::error::{exit, CliError, CliResult};
use crate::plot::{emit_plot, PlotStyle, Series};
use crate::reference::ReferenceSet;
use crate::report::Report;
use crate::reproduce;
use crate::table::write_text;

pub mod coherence;
pub mod echo;
pub mod optical;
pub mod resonator;
pub mod spin;

/// How a command finished once its outputs are written.
#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Ok,
    /// A fit stopped without meeting its tolerances (exit 3).
    NotConverged(String),
    /// The command produced its outputs but a check failed (exit 1).
    Failed(String),
}

#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    /// Tabular or text output; goes to `io.output` or stdout.
    pub primary: Option<String>,
    pub plot: Option<(Vec<Series>, PlotStyle)>,
    pub status: Status,
}

impl Outcome {
    pub fn new(report: Report) -> Self {
        Self {
            report,
            primary: None,
            plot: None,
            status: Status::Ok,
        }
    }
}

/// Writes the outputs of `outcome`. The report goes to stdout only when
/// neither a report path nor a primary output claims it.
pub fn emit(cfg: &RunConfig, outcome: Outcome, stdout: &mut dyn Write) -> CliResult<i32> {
    let stdout_err = |e: std::io::Error| CliError::io("<stdout>", e);
    if let (Some((series, style)), Some(path)) = (&outcome.plot, cfg.path("io", "plot")) {
        emit_plot(series, style, &path)?;
    }
    let output = cfg.path("io", "output");
    if let Some(text) = &outcome.primary {
        match &output {
            Some(p) => write_text(p, text)?,
            None => stdout.write_all(text.as_bytes()).map_err(stdout_err)?,
        }
    }
    let rendered = outcome.report.render();
    match cfg.path("io", "report") {
        Some(p) => write_text(&p, &rendered)?,
        None if outcome.primary.is_none() || output.is_some() => {
            stdout.write_all(rendered.as_bytes()).map_err(stdout_err)?
        }
        None => {}
    }
    match outcome.status {
        Status::Ok => Ok(exit::OK),
        Status::NotConverged(m) => Err(CliError::NotConverged(m)),
        Status::Failed(m) => Err(CliError::Other(m)),
    }
}

/// `a:b:step` (half-open) into a grid.
pub fn parse_range(text: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || CliError::Validation(format!("range `{text}`: expected start:stop:step with step > 0"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let (a, b, s) = (v[0], v[1], v[2]);
    if !(s > 0.0 && a.is_finite() && b.is_finite() && b > a) {
        return Err(bad());
    }
    let n = ((b - a) / s - 1e-9).ceil() as usize;
    Ok((0..n).map(|k| a + k as f64 * s).collect())
}

/// `a:b:n`: `n` evenly spaced points including both ends.
pub fn parse_linspace(text: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || CliError::Validation(format!("grid `{text}`: expected start:stop:count with count >= 2"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n < 2 || !(a.is_finite() && b.is_finite()) {
        return Err(bad());
    }
    Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect())
}

pub fn fit_options(cfg: &RunConfig) -> FitOptions {
    FitOptions {
        xtol: cfg.num("fit", "xtol"),
        ftol: cfg.num("fit", "ftol"),
        max_iter: cfg.int("fit", "max_iter") as usize,
        ..FitOptions::default()
    }
}

pub fn fit_status(result: &FitResult) -> Status {
    if result.converged {
        Status::Ok
    } else {
        Status::NotConverged(format!(
            "{} after {} iterations ({})",
            result.model,
            result.n_iter,
            result.termination.describe()
        ))
    }
}

/// Column-wise check that error bars are usable as weights.
pub fn weights(name: &str, sigma: &[f64]) -> CliResult<Vec<f64>> {
    if let Some((i, s)) = sigma.iter().enumerate().find(|(_, s)| !(s.is_finite() && **s > 0.0)) {
        return Err(CliError::Validation(format!(
            "{name}: uncertainty in data row {} must be finite and > 0, got {s}",
            i + 1
        )));
    }
    Ok(sigma.to_vec())
}

pub fn plot_style(cfg: &RunConfig, title: &str, x_label: &str, y_label: &str) -> PlotStyle {
    PlotStyle {
        title: title.to_string(),
        x_label: x_label.to_string(),
        y_label: y_label.to_string(),
        width: cfg.int("plot", "width") as u32,
        height: cfg.int("plot", "height") as u32,
        ..PlotStyle::default()
    }
}

/// Evenly spaced model-curve abscissae spanning `x`.
pub fn dense(x: &[f64], n: usize, log: bool) -> Vec<f64> {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..n)
        .map(|k| {
            let t = k as f64 / (n - 1) as f64;
            if log && lo > 0.0 {
                (lo.ln() + t * (hi / lo).ln()).exp()
            } else {
                lo + t * (hi - lo)
            }
        })
        .collect()
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Run every criterion
    #[arg(long, conflicts_with = "only")]
    pub all: bool,
    /// Comma-separated criterion numbers
    #[arg(long, value_delimiter = ',')]
    pub only: Option<Vec<u8>>,
    /// Exit 1 when any selected criterion fails
    #[arg(long)]
    pub strict: bool,
}

pub fn reproduce(cfg: &mut RunConfig, args: &ReproduceArgs) -> CliResult<Outcome> {
    if !args.all && args.only.is_none() {
        return Err(CliError::Validation("reproduce needs --all or --only N[,M...]".into()));
    }
    if let Some(bad) = args.only.iter().flatten().find(|i| !(1..=17).contains(*i)) {
        return Err(CliError::Validation(format!("criterion {bad} does not exist (1..=17)")));
    }
    let refs = ReferenceSet::bundled();
    let r = reproduce::run(&refs, args.only.as_deref())?;
    let mut report = Report::new("reproduce", cfg);
    report.section("reproduce", reproduce::to_json(&r));
    let mut out = Outcome::new(report);
    out.primary = Some(reproduce::render_text(&r));
    if args.strict && !r.all_pass() {
        out.status = Status::Failed(format!("{} of {} criteria failed", r.rows.len() - r.passed(), r.rows.len()));
    }
    Ok(out)
}
