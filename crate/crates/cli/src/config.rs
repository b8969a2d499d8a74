//! INI run configuration.
//!
//! Every accepted key is listed in [`SCHEMA`] with its type and default; a
//! file may override any subset. Unknown sections or keys, unparsable
//! values and constants that differ from CODATA-2018 are rejected with the
//! line of the offending entry.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ini::Ini;
use serde_json::{json, Map, Value as Json};
use spinfit::constants::CODATA_2018;

use crate::error::{CliError, CliResult};

/// Environment variable naming a config file when `--config` is absent.
pub const CONFIG_ENV: &str = "SPINFIT_CONFIG";

/// Relative tolerance for `[constants]` entries.
const CONSTANT_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub enum Kind {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(&'static str),
    Choice(&'static str, &'static [&'static str]),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
}

impl Value {
    fn to_json(&self) -> Json {
        match self {
            Value::Num(v) => json!(v),
            Value::Int(v) => json!(v),
            Value::Bool(v) => json!(v),
            Value::Text(v) => json!(v),
        }
    }
}

const fn num(section: &'static str, key: &'static str, v: f64) -> (&'static str, &'static str, Kind) {
    (section, key, Kind::Num(v))
}

const TILT_AXES: &[&str] = &["perpendicular", "fixed"];
const SITES: &[&str] = &["c2", "c3i", "both"];
const DECAY_MODELS: &[&str] = &["hahn", "saturation_recovery"];
const TAPERS: &[&str] = &["rectangular", "hann"];
const LINESHAPES: &[&str] = &["lorentzian", "gaussian"];

/// Accepted `(section, key, kind/default)` entries.
pub const SCHEMA: &[(&str, &str, Kind)] = &[
    // CODATA-2018; the numerics use compiled-in values, so these are checked, not applied
    num("constants", "h", spinfit::constants::H),
    num("constants", "hbar", spinfit::constants::HBAR),
    num("constants", "mu_b", spinfit::constants::MU_B),
    num("constants", "mu_0", spinfit::constants::MU_0),
    num("constants", "k_b", spinfit::constants::K_B),
    num("constants", "eps_0", spinfit::constants::EPS_0),
    ("run", "seed", Kind::Int(0)),
    ("io", "input", Kind::Text("")),
    ("io", "output", Kind::Text("")),
    ("io", "report", Kind::Text("")),
    ("io", "plot", Kind::Text("")),
    num("anisotropy", "c2_g1", 9.33),
    num("anisotropy", "c2_g2", 5.84),
    num("anisotropy", "c2_g3", 0.10),
    num("anisotropy", "c2_rotation_deg", 144.4),
    num("anisotropy", "c3i_g_parallel", 12.0),
    num("anisotropy", "c3i_g_perpendicular", 3.2),
    num("anisotropy", "tilt_dphi1_deg", 2.8),
    num("anisotropy", "tilt_dphi2_deg", 0.2),
    num("anisotropy", "tilt_theta0_deg", 30.0),
    ("anisotropy", "tilt_axis", Kind::Choice("perpendicular", TILT_AXES)),
    ("anisotropy", "site", Kind::Choice("both", SITES)),
    // zero means "estimate from the data"
    num("resonator", "f0_hz", 0.0),
    num("resonator", "qi", 0.0),
    num("resonator", "qe", 0.0),
    num("resonator", "inv_q_alpha", 0.0),
    num("spin", "frequency_hz", 5.81e9),
    num("spin", "g_eff", 3.2),
    num("spin", "omega_ens_hz", 3.07e6),
    num("spin", "gamma_s_hz", 34e6),
    // zero means the resonance field of g_eff at frequency_hz
    num("spin", "b0_t", 0.0),
    num("spin", "g_single_hz", 128.0),
    num("spin", "volume_m3", 1256e-12 * 1.4e-6),
    num("spin", "host_density_m3", spinfit::constants::Y2O3_CATION_DENSITY),
    ("spin", "detrend_order", Kind::Int(2)),
    ("decay", "model", Kind::Choice("hahn", DECAY_MODELS)),
    num("spectral_diffusion", "gamma0_hz", 700.0),
    num("spectral_diffusion", "gamma_sd_hz", 4400.0),
    num("spectral_diffusion", "rate_hz", 287.0),
    num("spectral_diffusion", "t1_s", 0.8),
    num("spectral_diffusion", "tau_s", 50e-6),
    num("thermal", "t_ze_k", 0.2788),
    num("thermal", "c_corr", 1.45),
    num("thermal", "xi_hz", 96.8e3),
    num("thermal", "gamma0_hz", 2.9e3),
    num("noise", "t2_hahn_s", 0.38e-3),
    num("noise", "t2_cpmg_s", 1.14e-3),
    num("noise", "g_eff", 3.2),
    num("noise", "rabi_hz", 0.78e6),
    num("noise", "inhomogeneous_fwhm_hz", 100e6),
    ("noise", "lineshape", Kind::Choice("lorentzian", LINESHAPES)),
    num("tls", "alpha_init", 0.5),
    num("optical", "tau0_s", 8.5e-3),
    num("optical", "tau_cav_s", 0.14e-3),
    num("optical", "zeta", 0.22),
    num("optical", "q", 58000.0),
    num("optical", "lambda_m", 1536.8e-9),
    num("optical", "refractive_n", 1.89),
    num("optical", "gamma_cav_hz", 3.36e9),
    num("optical", "dipole_cm", 9.7e-33),
    num("optical", "frequency_hz", 195.1e12),
    num("optical", "t1_s", 3e-3),
    num("optical", "t2_star_s", 122e-6),
    num("holeburn", "gamma0_hz", 158.6e3),
    num("holeburn", "gamma_sd_hz", 635.5e3),
    num("holeburn", "g_env", 2.02),
    num("holeburn", "t_bath_k", 0.22),
    ("holeburn", "fix_t_bath", Kind::Bool(true)),
    num("echo", "window_s", 1500e-9),
    num("echo", "band_center_hz", 200e6),
    num("echo", "band_width_hz", 20e6),
    num("echo", "bg_bin_width_hz", 10e6),
    ("echo", "taper", Kind::Choice("rectangular", TAPERS)),
    ("echo", "subtract_background", Kind::Bool(true)),
    num("fit", "xtol", 1e-10),
    num("fit", "ftol", 1e-12),
    ("fit", "max_iter", Kind::Int(200)),
    ("plot", "width", Kind::Int(640)),
    ("plot", "height", Kind::Int(420)),
    ("plot", "data_label", Kind::Text("data")),
    ("plot", "model_label", Kind::Text("model")),
];

fn kind_of(section: &str, key: &str) -> Option<Kind> {
    SCHEMA.iter().find(|(s, k, _)| *s == section && *k == key).map(|(_, _, kind)| *kind)
}

fn default_value(kind: Kind) -> Value {
    match kind {
        Kind::Num(v) => Value::Num(v),
        Kind::Int(v) => Value::Int(v),
        Kind::Bool(v) => Value::Bool(v),
        Kind::Text(v) | Kind::Choice(v, _) => Value::Text(v.to_string()),
    }
}

fn parse_value(kind: Kind, raw: &str) -> Result<Value, String> {
    let raw = raw.trim();
    match kind {
        Kind::Num(_) => match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Value::Num(v)),
            _ => Err(format!("expected a finite number, got `{raw}`")),
        },
        Kind::Int(_) => raw
            .parse::<u64>()
            .map(Value::Int)
            .map_err(|_| format!("expected a non-negative integer, got `{raw}`")),
        Kind::Bool(_) => match raw.to_ascii_lowercase().as_str() {
            "true" | "yes" | "on" | "1" => Ok(Value::Bool(true)),
            "false" | "no" | "off" | "0" => Ok(Value::Bool(false)),
            _ => Err(format!("expected true or false, got `{raw}`")),
        },
        Kind::Text(_) => Ok(Value::Text(raw.to_string())),
        Kind::Choice(_, allowed) => {
            let lower = raw.to_ascii_lowercase();
            if allowed.contains(&lower.as_str()) {
                Ok(Value::Text(lower))
            } else {
                Err(format!("expected one of {}, got `{raw}`", allowed.join(", ")))
            }
        }
    }
}

/// Line (1-based) of `key` inside `[section]`, or of the section header
/// when `key` is `None`.
fn locate(text: &str, section: Option<&str>, key: Option<&str>) -> u64 {
    let mut current: Option<String> = None;
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = Some(name.trim().to_string());
            if key.is_none() && current.as_deref() == section {
                return i as u64 + 1;
            }
            continue;
        }
        if let Some(key) = key {
            let lhs = t.split(['=', ':']).next().unwrap_or("").trim();
            if current.as_deref() == section && lhs == key {
                return i as u64 + 1;
            }
        }
    }
    0
}

/// Resolved configuration: schema defaults overlaid with file values and
/// command-line overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<(String, String), Value>,
    source: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let values = SCHEMA
            .iter()
            .map(|(s, k, kind)| ((s.to_string(), k.to_string()), default_value(*kind)))
            .collect();
        Self { values, source: None }
    }
}

impl RunConfig {
    /// Reads `path`, or the file named by [`CONFIG_ENV`], or returns the defaults.
    pub fn resolve(path: Option<&Path>) -> CliResult<Self> {
        let env = std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
        match path.map(Path::to_path_buf).or(env) {
            Some(p) => Self::load(&p),
            None => Ok(Self::default()),
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let text = String::from_utf8(bytes)
            .map_err(|e| CliError::Validation(format!("config {} is not UTF-8: {e}", path.display())))?;
        let mut cfg = Self::parse(&text, path)?;
        cfg.source = Some(path.to_path_buf());
        Ok(cfg)
    }

    pub fn parse(text: &str, path: &Path) -> CliResult<Self> {
        let at = |line: u64, msg: String| CliError::Located {
            path: path.to_path_buf(),
            line,
            column: 1,
            msg,
        };
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Located {
            path: path.to_path_buf(),
            line: e.line as u64,
            column: e.col,
            msg: e.msg.to_string(),
        })?;
        let mut cfg = Self::default();
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if let Some((key, _)) = props.iter().next() {
                    return Err(at(locate(text, None, Some(key)), format!("key `{key}` outside any section")));
                }
                continue;
            };
            if !SCHEMA.iter().any(|(s, _, _)| *s == section) {
                let known: Vec<&str> = SCHEMA.iter().map(|(s, _, _)| *s).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
                return Err(at(
                    locate(text, Some(section), None),
                    format!("unknown section [{section}] (known: {})", known.join(", ")),
                ));
            }
            let mut seen = std::collections::BTreeSet::new();
            for (key, raw) in props.iter() {
                let line = locate(text, Some(section), Some(key));
                let Some(kind) = kind_of(section, key) else {
                    return Err(at(line, format!("unknown key `{key}` in [{section}]")));
                };
                if !seen.insert(key) {
                    return Err(at(line, format!("duplicate key `{key}` in [{section}]")));
                }
                let value = parse_value(kind, raw).map_err(|m| at(line, format!("[{section}] {key}: {m}")))?;
                if section == "constants" {
                    check_constant(key, &value).map_err(|m| at(line, m))?;
                }
                cfg.values.insert((section.to_string(), key.to_string()), value);
            }
        }
        Ok(cfg)
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    fn get(&self, section: &str, key: &str) -> &Value {
        self.values
            .get(&(section.to_string(), key.to_string()))
            .unwrap_or_else(|| panic!("[{section}] {key} is not in the config schema"))
    }

    pub fn num(&self, section: &str, key: &str) -> f64 {
        match self.get(section, key) {
            Value::Num(v) => *v,
            Value::Int(v) => *v as f64,
            other => panic!("[{section}] {key} is not numeric: {other:?}"),
        }
    }

    pub fn int(&self, section: &str, key: &str) -> u64 {
        match self.get(section, key) {
            Value::Int(v) => *v,
            other => panic!("[{section}] {key} is not an integer: {other:?}"),
        }
    }

    pub fn flag(&self, section: &str, key: &str) -> bool {
        match self.get(section, key) {
            Value::Bool(v) => *v,
            other => panic!("[{section}] {key} is not a boolean: {other:?}"),
        }
    }

    pub fn text(&self, section: &str, key: &str) -> &str {
        match self.get(section, key) {
            Value::Text(v) => v,
            other => panic!("[{section}] {key} is not text: {other:?}"),
        }
    }

    /// Optional path: empty text means unset.
    pub fn path(&self, section: &str, key: &str) -> Option<PathBuf> {
        let t = self.text(section, key);
        (!t.is_empty()).then(|| PathBuf::from(t))
    }

    /// Overrides a value from the command line, with the same validation
    /// as a file entry.
    pub fn set(&mut self, section: &str, key: &str, raw: &str) -> CliResult<()> {
        let kind = kind_of(section, key).unwrap_or_else(|| panic!("[{section}] {key} is not in the config schema"));
        let value = parse_value(kind, raw).map_err(|m| CliError::Validation(format!("[{section}] {key}: {m}")))?;
        self.values.insert((section.to_string(), key.to_string()), value);
        Ok(())
    }

    pub fn set_num(&mut self, section: &str, key: &str, v: f64) -> CliResult<()> {
        if !v.is_finite() {
            return Err(CliError::Validation(format!("[{section}] {key}: expected a finite number, got {v}")));
        }
        self.set(section, key, &format!("{v:e}"))
    }

    /// Resolved configuration as `{section: {key: value}}` with sorted keys.
    pub fn to_json(&self) -> Json {
        let mut out = Map::new();
        for ((section, key), v) in &self.values {
            let entry = out.entry(section.clone()).or_insert_with(|| Json::Object(Map::new()));
            if let Json::Object(m) = entry {
                m.insert(key.clone(), v.to_json());
            }
        }
        Json::Object(out)
    }
}

fn check_constant(key: &str, value: &Value) -> Result<(), String> {
    let Value::Num(v) = value else {
        return Err(format!("constant `{key}` must be numeric"));
    };
    if !(*v > 0.0) {
        return Err(format!("constant `{key}` must be positive, got {v}"));
    }
    let (_, pinned, unit) = CODATA_2018
        .iter()
        .find(|(n, _, _)| *n == key)
        .ok_or_else(|| format!("unknown constant `{key}`"))?;
    if ((v - pinned) / pinned).abs() > CONSTANT_RTOL {
        return Err(format!(
            "constant `{key}` = {v:e} differs from the CODATA-2018 value {pinned:e} {unit} used by the numerics"
        ));
    }
    Ok(())
}
