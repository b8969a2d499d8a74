//! Schema-checked CSV measurement tables.
//!
//! A schema column names a quantity (`delay`) and its dimension; the file
//! header carries the unit as a suffix (`delay_s`, `delay_us`). Values are
//! converted to SI on load. Dimensionless columns match their name exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    None,
    Frequency,
    Time,
    Field,
    Angle,
    Phase,
    AngularRate,
    Voltage,
    Decibel,
}

/// Recognised header suffixes with their dimension and factor to SI.
/// Angles stay in degrees, the unit used at every angle-taking API.
const SUFFIXES: &[(&str, Dim, f64)] = &[
    ("hz", Dim::Frequency, 1.0),
    ("khz", Dim::Frequency, 1e3),
    ("mhz", Dim::Frequency, 1e6),
    ("s", Dim::Time, 1.0),
    ("ms", Dim::Time, 1e-3),
    ("us", Dim::Time, 1e-6),
    ("t", Dim::Field, 1.0),
    ("mT", Dim::Field, 1e-3),
    ("deg", Dim::Angle, 1.0),
    ("rad", Dim::Phase, 1.0),
    ("rad_s", Dim::AngularRate, 1.0),
    ("volts", Dim::Voltage, 1.0),
    ("db", Dim::Decibel, 1.0),
];

fn suffix(s: &str) -> Option<(Dim, f64)> {
    SUFFIXES.iter().find(|(n, _, _)| *n == s).map(|(_, d, f)| (*d, *f))
}

#[derive(Debug, Clone, Copy)]
pub struct Column {
    pub name: &'static str,
    pub dim: Dim,
    pub optional: bool,
}

const fn col(name: &'static str, dim: Dim) -> Column {
    Column {
        name,
        dim,
        optional: false,
    }
}

const fn opt(name: &'static str, dim: Dim) -> Column {
    Column {
        name,
        dim,
        optional: true,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Schema {
    pub name: &'static str,
    pub columns: &'static [Column],
}

impl Schema {
    /// Canonical SI header, e.g. `delay_s,amplitude[,amplitude_err]`.
    pub fn describe(&self) -> String {
        let parts: Vec<String> = self
            .columns
            .iter()
            .map(|c| {
                let h = header_for(c, canonical_suffix(c.dim));
                if c.optional {
                    format!("[{h}]")
                } else {
                    h
                }
            })
            .collect();
        format!("{} ({})", self.name, parts.join(","))
    }
}

fn canonical_suffix(dim: Dim) -> &'static str {
    match dim {
        Dim::None => "",
        Dim::Frequency => "hz",
        Dim::Time => "s",
        Dim::Field => "t",
        Dim::Angle => "deg",
        Dim::Phase => "rad",
        Dim::AngularRate => "rad_s",
        Dim::Voltage => "volts",
        Dim::Decibel => "db",
    }
}

fn header_for(c: &Column, suffix: &str) -> String {
    if suffix.is_empty() {
        c.name.to_string()
    } else {
        format!("{}_{suffix}", c.name)
    }
}

pub mod schemas {
    use super::{col, opt, Dim, Schema};

    pub const ANGLE_MAP: Schema = Schema {
        name: "angle_map",
        columns: &[col("theta", Dim::Angle), col("sub_site_id", Dim::None), col("b_res", Dim::Field)],
    };
    pub const S21_COMPLEX: Schema = Schema {
        name: "s21_complex",
        columns: &[col("frequency", Dim::Frequency), col("s21_real", Dim::None), col("s21_imag", Dim::None)],
    };
    pub const S21_POLAR: Schema = Schema {
        name: "s21_polar",
        columns: &[col("frequency", Dim::Frequency), col("s21_mag", Dim::Decibel), col("s21_phase", Dim::Phase)],
    };
    pub const FIELD_SWEEP: Schema = Schema {
        name: "field_sweep",
        columns: &[col("b_field", Dim::Field), col("delta_kappa", Dim::Frequency), col("delta_f", Dim::Frequency)],
    };
    pub const DECAY: Schema = Schema {
        name: "decay",
        columns: &[col("delay", Dim::Time), col("amplitude", Dim::None), opt("amplitude_err", Dim::None)],
    };
    pub const STIMULATED_ECHO: Schema = Schema {
        name: "stimulated_echo",
        columns: &[col("tau", Dim::Time), col("tw", Dim::Time), col("amplitude", Dim::None)],
    };
    pub const TLS: Schema = Schema {
        name: "tls",
        columns: &[col("n_photons", Dim::None), col("qi", Dim::None), opt("qi_err", Dim::None)],
    };
    pub const HOLE_LINEWIDTH: Schema = Schema {
        name: "hole_linewidth",
        columns: &[col("rabi", Dim::AngularRate), col("gamma", Dim::Frequency), opt("gamma_err", Dim::Frequency)],
    };
    pub const PLE_LINEWIDTH: Schema = Schema {
        name: "ple_linewidth",
        columns: &[col("b_field", Dim::Field), col("gamma", Dim::Frequency), opt("gamma_err", Dim::Frequency)],
    };
    pub const TRACE: Schema = Schema {
        name: "trace",
        columns: &[col("time", Dim::Time), col("i", Dim::Voltage), col("q", Dim::Voltage)],
    };
    pub const ECHO_AREAS: Schema = Schema {
        name: "echo_areas",
        columns: &[col("trace_id", Dim::None), col("echo_area", Dim::None), col("pedestal_area", Dim::None)],
    };
    pub const PURCELL_SWEEP: Schema = Schema {
        name: "purcell_sweep",
        columns: &[col("detuning", Dim::Frequency), col("t1", Dim::Time)],
    };
}

/// Loaded table, all values in SI.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementTable {
    pub schema: &'static str,
    pub path: PathBuf,
    /// Header names as written in the file, in schema order.
    pub headers: Vec<Option<String>>,
    columns: Vec<Option<Vec<f64>>>,
    pub rows: usize,
    /// Hex SHA-256 of the file bytes.
    pub digest: String,
    column_names: Vec<&'static str>,
}

impl MeasurementTable {
    /// Column by schema name. Panics on a name outside the schema.
    pub fn column(&self, name: &str) -> &[f64] {
        self.optional(name)
            .unwrap_or_else(|| panic!("column `{name}` is optional and absent, or not in schema {}", self.schema))
    }

    pub fn optional(&self, name: &str) -> Option<&[f64]> {
        let j = self
            .column_names
            .iter()
            .position(|n| *n == name)
            .unwrap_or_else(|| panic!("`{name}` is not a column of schema {}", self.schema));
        self.columns[j].as_deref()
    }
}

fn located(path: &Path, line: u64, column: usize, msg: impl Into<String>) -> CliError {
    CliError::Located {
        path: path.to_path_buf(),
        line,
        column,
        msg: msg.into(),
    }
}

struct Matched {
    index: usize,
    header: String,
    factor: f64,
}

/// Finds the header matching `c`. `Err` carries a unit-mismatch message.
fn match_column(c: &Column, header: &[String]) -> Result<Option<Matched>, String> {
    if c.dim == Dim::None {
        return Ok(header.iter().position(|h| h == c.name).map(|index| Matched {
            index,
            header: c.name.to_string(),
            factor: 1.0,
        }));
    }
    let prefix = format!("{}_", c.name);
    for (index, h) in header.iter().enumerate() {
        let Some(rest) = h.strip_prefix(&prefix) else {
            continue;
        };
        match suffix(rest) {
            Some((dim, factor)) if dim == c.dim => {
                return Ok(Some(Matched {
                    index,
                    header: h.clone(),
                    factor,
                }))
            }
            Some(_) => {
                return Err(format!(
                    "unit suffix mismatch: column `{h}` has unit `{rest}`, expected a {:?} unit such as `{}`",
                    c.dim,
                    header_for(c, canonical_suffix(c.dim))
                ))
            }
            None => continue,
        }
    }
    Ok(None)
}

/// Loads `path` under `schema`.
pub fn load_table(path: &Path, schema: &Schema) -> CliResult<MeasurementTable> {
    load_table_any(path, &[schema])
}

/// Loads `path` under the first schema whose required columns all appear
/// in the header.
pub fn load_table_any(path: &Path, schemas: &[&Schema]) -> CliResult<MeasurementTable> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let digest = hex::encode(Sha256::digest(&bytes));
    let text = std::str::from_utf8(&bytes).map_err(|e| {
        let upto = &bytes[..e.valid_up_to()];
        let line = upto.iter().filter(|b| **b == b'\n').count() as u64 + 1;
        located(path, line, 1, "file is not UTF-8")
    })?;
    let expected = || schemas.iter().map(|s| s.describe()).collect::<Vec<_>>().join(" or ");

    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let (header, header_line) = match records.next() {
        Some(Ok(r)) => {
            let line = r.position().map_or(1, |p| p.line());
            (r.iter().map(str::to_string).collect::<Vec<_>>(), line)
        }
        Some(Err(e)) => return Err(csv_error(path, &e)),
        None => return Err(located(path, 1, 1, format!("empty table: no header, expected {}", expected()))),
    };

    let mut chosen = None;
    let mut mismatch = None;
    for schema in schemas {
        let mut found = Vec::new();
        let mut complete = true;
        for c in schema.columns {
            match match_column(c, &header) {
                Ok(Some(m)) => found.push(Some(m)),
                Ok(None) if c.optional => found.push(None),
                Ok(None) => {
                    complete = false;
                    break;
                }
                Err(msg) => {
                    mismatch.get_or_insert(msg);
                    complete = false;
                    break;
                }
            }
        }
        if complete {
            chosen = Some((*schema, found));
            break;
        }
    }
    let Some((schema, found)) = chosen else {
        let msg = match mismatch {
            Some(m) => m,
            None => format!("header `{}` is missing columns; expected {}", header.join(","), expected()),
        };
        return Err(located(path, header_line, 1, msg));
    };

    let mut columns: Vec<Option<Vec<f64>>> = found.iter().map(|m| m.as_ref().map(|_| Vec::new())).collect();
    let mut rows = 0;
    for record in records {
        let record = record.map_err(|e| csv_error(path, &e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != header.len() {
            return Err(located(
                path,
                line,
                record.len().min(header.len()) + 1,
                format!("row has {} fields, header has {}", record.len(), header.len()),
            ));
        }
        for (j, m) in found.iter().enumerate() {
            let Some(m) = m else { continue };
            let cell = &record[m.index];
            let optional = schema.columns[j].optional;
            let value = if cell.is_empty() && optional {
                f64::NAN
            } else {
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => v * m.factor,
                    Ok(v) if v.is_nan() && optional => v,
                    _ => {
                        return Err(located(
                            path,
                            line,
                            m.index + 1,
                            format!("non-numeric cell `{cell}` in column `{}`", m.header),
                        ))
                    }
                }
            };
            columns[j].as_mut().expect("allocated for matched columns").push(value);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(located(path, header_line + 1, 1, "empty table"));
    }
    Ok(MeasurementTable {
        schema: schema.name,
        path: path.to_path_buf(),
        headers: found.iter().map(|m| m.as_ref().map(|m| m.header.clone())).collect(),
        columns,
        rows,
        digest,
        column_names: schema.columns.iter().map(|c| c.name).collect(),
    })
}

fn csv_error(path: &Path, e: &csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    located(path, line, 1, format!("malformed CSV: {e}"))
}

/// Formats `v` with six significant digits.
pub fn sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    // the exponent after rounding to six digits, so 999999.7 becomes 1e6
    let sci = format!("{v:.5e}");
    let e: i32 = sci.split('e').nth(1).and_then(|x| x.parse().ok()).unwrap_or(0);
    if (-4..6).contains(&e) {
        let decimals = (5 - e) as usize;
        format!("{v:.decimals$}")
    } else {
        sci
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
}

/// CSV text with the given header; numbers use six significant digits.
pub fn render_csv(header: &[&str], rows: &[Vec<Cell>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .map(|c| match c {
                Cell::Int(v) => v.to_string(),
                Cell::Num(v) => sig6(*v),
            })
            .collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}
