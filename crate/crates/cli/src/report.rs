//! JSON run reports.
//!
//! Objects are `serde_json::Map`s, which keep keys sorted, so identical
//! inputs serialize to identical bytes.

use serde_json::{json, Map, Value as Json};
use spinfit::fit::FitResult;

use crate::config::RunConfig;
use crate::table::MeasurementTable;

/// A reported number in display units, tagged with the producing operation.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub unit: &'static str,
    pub op: &'static str,
    pub note: Option<String>,
}

impl Quantity {
    /// `si` converted with `factor` into `unit` (e.g. `1e9` for T to nT).
    pub fn scaled(si: f64, factor: f64, unit: &'static str, op: &'static str) -> Self {
        Self {
            value: si * factor,
            unit,
            op,
            note: None,
        }
    }

    pub fn new(value: f64, unit: &'static str, op: &'static str) -> Self {
        Self::scaled(value, 1.0, unit, op)
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Three significant digits with the unit, e.g. `12.5 nT`.
    pub fn display(&self) -> String {
        let text = if self.value == 0.0 {
            "0".to_string()
        } else if (1e-3..1e5).contains(&self.value.abs()) {
            let digits = self.value.abs().log10().floor() as i32;
            let decimals = (2 - digits).max(0) as usize;
            format!("{:.decimals$}", self.value)
        } else {
            format!("{:.2e}", self.value)
        };
        if self.unit.is_empty() {
            text
        } else {
            format!("{text} {}", self.unit)
        }
    }

    fn to_json(&self) -> Json {
        let mut m = Map::new();
        m.insert("value".into(), finite(self.value));
        m.insert("unit".into(), json!(self.unit));
        m.insert("op".into(), json!(self.op));
        m.insert("display".into(), json!(self.display()));
        if let Some(n) = &self.note {
            m.insert("note".into(), json!(n));
        }
        Json::Object(m)
    }
}

/// JSON number, or the string form of a non-finite value.
fn finite(v: f64) -> Json {
    if v.is_finite() {
        json!(v)
    } else {
        json!(v.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    command: String,
    config: Json,
    inputs: Vec<Json>,
    quantities: Map<String, Json>,
    sections: Map<String, Json>,
    notes: Vec<String>,
}

impl Report {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.to_string(),
            config: config.to_json(),
            inputs: Vec::new(),
            quantities: Map::new(),
            sections: Map::new(),
            notes: Vec::new(),
        }
    }

    pub fn input(&mut self, table: &MeasurementTable) {
        self.inputs.push(json!({
            "path": table.path.display().to_string(),
            "schema": table.schema,
            "rows": table.rows,
            "sha256": table.digest,
        }));
    }

    pub fn quantity(&mut self, name: &str, q: Quantity) {
        self.quantities.insert(name.to_string(), q.to_json());
    }

    pub fn section(&mut self, name: &str, value: Json) {
        self.sections.insert(name.to_string(), value);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn to_json(&self) -> Json {
        let mut m = Map::new();
        m.insert("command".into(), json!(self.command));
        m.insert("config".into(), self.config.clone());
        m.insert("inputs".into(), Json::Array(self.inputs.clone()));
        m.insert("quantities".into(), Json::Object(self.quantities.clone()));
        m.insert("notes".into(), json!(self.notes));
        m.insert(
            "tool".into(),
            json!({"name": "spinfit", "version": env!("CARGO_PKG_VERSION")}),
        );
        for (k, v) in &self.sections {
            m.insert(k.clone(), v.clone());
        }
        Json::Object(m)
    }

    pub fn render(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("report values serialize");
        s.push('\n');
        s
    }
}

/// Fit summary: parameters with sigmas and units, correlation matrix,
/// iteration count and termination reason.
pub fn fit_json(result: &FitResult, units: &[&str], digest: Option<&str>) -> Json {
    let mut params = Map::new();
    for (j, name) in result.param_names.iter().enumerate() {
        params.insert(
            name.clone(),
            json!({
                "value": finite(result.params[j]),
                "sigma": finite(result.sigmas[j]),
                "unit": units.get(j).copied().unwrap_or(""),
                "fixed": result.fixed[j],
            }),
        );
    }
    let correlation: Vec<Json> = result
        .correlation
        .iter()
        .map(|row| Json::Array(row.iter().map(|v| finite(*v)).collect()))
        .collect();
    json!({
        "model": result.model,
        "op": "fit::levenberg_marquardt",
        "parameters": params,
        "parameter_order": result.param_names,
        "correlation": correlation,
        "iterations": result.n_iter,
        "converged": result.converged,
        "termination": result.termination,
        "reason": result.termination.describe(),
        "reduced_chi2": finite(result.reduced_chi2),
        "rank": result.rank,
        "warnings": result.warnings,
        "input_digest": digest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_uses_three_significant_digits() {
        assert_eq!(Quantity::new(12.4716, "nT", "x").display(), "12.5 nT");
        assert_eq!(Quantity::new(0.0338, "Hz", "x").display(), "0.0338 Hz");
        assert_eq!(Quantity::new(271.43, "", "x").display(), "271");
        assert_eq!(Quantity::new(4.3e7, "", "x").display(), "4.30e7");
        assert_eq!(Quantity::new(0.0, "K", "x").display(), "0 K");
    }

    #[test]
    fn report_is_byte_stable_and_sorted() {
        let cfg = RunConfig::default();
        let make = || {
            let mut r = Report::new("noise-budget", &cfg);
            r.quantity("z_last", Quantity::new(1.0, "s", "op::z"));
            r.quantity("a_first", Quantity::new(2.0, "s", "op::a"));
            r.note("a note");
            r.render()
        };
        let a = make();
        assert_eq!(a, make());
        assert!(a.find("\"a_first\"").unwrap() < a.find("\"z_last\"").unwrap());
        let v: Json = serde_json::from_str(&a).unwrap();
        assert_eq!(v["quantities"]["a_first"]["op"], "op::a");
        assert_eq!(v["config"]["spin"]["g_eff"], 3.2);
    }

    #[test]
    fn non_finite_values_stay_visible() {
        let q = Quantity::new(f64::INFINITY, "s", "op");
        assert_eq!(q.to_json()["value"], "inf");
    }
}
