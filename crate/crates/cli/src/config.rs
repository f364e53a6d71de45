//! INI-style experiment configuration.
//!
//! ```text
//! # comment
//! [device]
//! d_fe_nm = 4.9
//! channels = composite
//! [iv]
//! temps_k = 300, 350
//! ```
//!
//! Every key carries its unit in its name. Missing keys take their
//! defaults; unknown keys, duplicates, malformed lines and out-of-range
//! values are rejected with a line/column diagnostic.

use std::fmt;

use fenvm::conduction::{CalibrationTargets, Channels, ConductionParams, TunnelingParams};
use fenvm::device_state::{DcHysteresis, SchemeKind, UpdateModel};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.col, self.msg)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy)]
enum Kind {
    /// Closed or open bounds; `open` excludes the lower bound.
    Float { min: f64, max: f64, open: bool },
    Int { min: u64, max: u64 },
    Choice(&'static [&'static str]),
    Path,
    List { min: f64, max: f64, open: bool },
}

struct KeySpec {
    section: &'static str,
    key: &'static str,
    kind: Kind,
    default: &'static str,
}

const INF: f64 = f64::INFINITY;

const fn pos() -> Kind {
    Kind::Float {
        min: 0.0,
        max: INF,
        open: true,
    }
}

const fn nonneg() -> Kind {
    Kind::Float {
        min: 0.0,
        max: INF,
        open: false,
    }
}

const fn unbounded() -> Kind {
    Kind::Float {
        min: -INF,
        max: INF,
        open: false,
    }
}

const fn count(min: u64, max: u64) -> Kind {
    Kind::Int { min, max }
}

const SCHEMES: &[&str] = &["amplitude", "width", "hybrid"];

macro_rules! spec {
    ($s:literal, $k:literal, $kind:expr, $d:literal) => {
        KeySpec {
            section: $s,
            key: $k,
            kind: $kind,
            default: $d,
        }
    };
}

const SCHEMA: &[KeySpec] = &[
    spec!("device", "d_fe_nm", pos(), "4.9"),
    spec!("device", "area_um2", pos(), "14400"),
    spec!("device", "phi_pf_ev", pos(), "0.15"),
    spec!("device", "ea_ohm_ev", nonneg(), "0.15"),
    spec!("device", "channels", Kind::Choice(&["composite", "ohmic", "pf"]), "composite"),
    spec!("device", "phi_tun_ev", pos(), "1"),
    spec!("device", "m_eff_rel", pos(), "0.3"),
    spec!("device", "r_on_mohm", pos(), "100"),
    spec!("device", "on_off_ratio", Kind::Float { min: 1.0, max: INF, open: false }, "10"),
    spec!("device", "selection_ratio", Kind::Float { min: 2.0, max: INF, open: false }, "45"),
    spec!("device", "crossover_mv", pos(), "220"),
    spec!("device", "t_k", pos(), "300"),
    spec!("update", "n_full_pulses", count(2, 1_000_000), "50"),
    spec!("update", "v_on_pot_mv", Kind::Float { min: -INF, max: 0.0, open: false }, "-600"),
    spec!("update", "v_on_dep_mv", pos(), "800"),
    spec!("update", "c2c_pct", Kind::Float { min: 0.0, max: 99.0, open: false }, "10"),
    spec!("update", "a_pot_amplitude_pulses", pos(), "5"),
    spec!("update", "a_dep_amplitude_pulses", pos(), "25"),
    spec!("update", "a_pot_width_pulses", pos(), "25"),
    spec!("update", "a_dep_width_pulses", pos(), "5"),
    spec!("update", "a_pot_hybrid_pulses", pos(), "12"),
    spec!("update", "a_dep_hybrid_pulses", pos(), "12"),
    spec!("variation", "sigma_d2d_dec", nonneg(), "0.1"),
    spec!("variation", "drift_rate_per_s", nonneg(), "0"),
    spec!("iv", "v_min_mv", unbounded(), "-500"),
    spec!("iv", "v_max_mv", unbounded(), "500"),
    spec!("iv", "v_step_mv", pos(), "10"),
    spec!("iv", "temps_k", Kind::List { min: 0.0, max: INF, open: true }, "300"),
    spec!("iv", "states_w", Kind::List { min: 0.0, max: 1.0, open: false }, "0, 1"),
    spec!("hysteresis", "v_min_mv", unbounded(), "-1200"),
    spec!("hysteresis", "v_max_mv", unbounded(), "1400"),
    spec!("hysteresis", "v_step_mv", pos(), "10"),
    spec!("hysteresis", "v_read_mv", pos(), "300"),
    spec!("hysteresis", "v_c_minus_mv", Kind::Float { min: -INF, max: 0.0, open: false }, "-600"),
    spec!("hysteresis", "v_c_plus_mv", pos(), "800"),
    spec!("hysteresis", "width_mv", pos(), "50"),
    spec!("scheme", "kind", Kind::Choice(SCHEMES), "amplitude"),
    spec!("scheme", "cycles", count(1, 100_000), "17"),
    spec!("scheme", "v_read_mv", pos(), "300"),
    spec!("fitA", "seeds", count(1, 1_000_000), "100"),
    spec!("cdf", "kind", Kind::Choice(SCHEMES), "amplitude"),
    spec!("cdf", "cycles", count(2, 100_000), "17"),
    spec!("retention", "duration_s", nonneg(), "950400"),
    spec!("retention", "points", count(2, 1_000_000), "12"),
    spec!("d2d", "devices", count(2, 10_000_000), "10000"),
    spec!("scaling", "areas_um2", Kind::List { min: 0.0, max: INF, open: true }, "100, 1600, 14400"),
    spec!("scaling", "v_max_mv", pos(), "500"),
    spec!("scaling", "v_step_mv", pos(), "10"),
    spec!("arrhenius", "temps_k", Kind::List { min: 0.0, max: INF, open: true }, "300, 325, 350, 375"),
    spec!("arrhenius", "v_step_mv", pos(), "10"),
    spec!("arrhenius", "pf_min_mv", pos(), "200"),
    spec!("arrhenius", "pf_max_mv", pos(), "300"),
    spec!("arrhenius", "ohmic_min_mv", pos(), "20"),
    spec!("arrhenius", "ohmic_max_mv", pos(), "100"),
    spec!("arrhenius", "tunneling_mv", pos(), "100"),
    spec!("arrhenius", "sweeps_csv", Kind::Path, ""),
    spec!("xbar", "sizes", Kind::List { min: 1.0, max: 64.0, open: false }, "2, 4, 8, 16"),
    spec!("xbar", "v_read_mv", pos(), "500"),
    spec!("xbar", "v_write_pot_mv", Kind::Float { min: -INF, max: 0.0, open: true }, "-1600"),
    spec!("xbar", "v_write_dep_mv", pos(), "2400"),
    spec!("xbar", "width_us", pos(), "50"),
    spec!("bench", "seeds", count(1, 1_000_000), "20"),
    spec!("mvm", "outputs", count(1, 4096), "8"),
    spec!("mvm", "inputs", count(1, 4096), "8"),
    spec!("mvm", "vectors", count(1, 100_000), "16"),
    spec!("mvm", "levels", count(0, 1_000_000), "11"),
    spec!("mvm", "trials", count(1, 1_000_000), "100"),
    spec!("mvm", "programming", Kind::Choice(&["write_verify", "ideal"]), "write_verify"),
    spec!("mvm", "tol_pct", pos(), "2"),
    spec!("mvm", "max_pulses", count(1, 1_000_000), "150"),
    spec!("mvm", "v_read_mv", Kind::Float { min: 0.0, max: 300.0, open: true }, "100"),
];

/// Section names in emission order.
pub const SECTIONS: &[&str] = &[
    "device",
    "update",
    "variation",
    "iv",
    "hysteresis",
    "scheme",
    "fitA",
    "cdf",
    "retention",
    "d2d",
    "scaling",
    "arrhenius",
    "xbar",
    "bench",
    "mvm",
];

const UNITS: &[&str] = &[
    "per_s", "per_h", "um2", "nm2", "mm2", "cm2", "m2", "mohm", "kohm", "ohm", "nm", "um", "mm", "cm", "m", "ev", "j",
    "mv", "uv", "kv", "v", "k", "c", "pct", "s", "ms", "us", "ns", "dec", "rel", "ratio", "pulses", "w",
];

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Float(f64),
    Int(u64),
    Text(String),
    List(Vec<f64>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Text(s) => f.write_str(s),
            Value::List(xs) => {
                let parts: Vec<String> = xs.iter().map(|x| format!("{x:?}")).collect();
                f.write_str(&parts.join(", "))
            }
        }
    }
}

fn parse_value(kind: Kind, raw: &str) -> Result<Value, String> {
    let float = |s: &str| -> Result<f64, String> {
        let x: f64 = s.trim().parse().map_err(|_| format!("`{}` is not a number", s.trim()))?;
        if !x.is_finite() {
            return Err(format!("`{}` is not finite", s.trim()));
        }
        Ok(x)
    };
    let bounded = |x: f64, min: f64, max: f64, open: bool| -> Result<f64, String> {
        let low_ok = if open { x > min } else { x >= min };
        if low_ok && x <= max {
            return Ok(x);
        }
        let lo = if open { format!("> {min}") } else { format!(">= {min}") };
        let hi = if max.is_finite() { format!(" and <= {max}") } else { String::new() };
        Err(format!("{x} out of range, must be {lo}{hi}"))
    };
    match kind {
        Kind::Float { min, max, open } => Ok(Value::Float(bounded(float(raw)?, min, max, open)?)),
        Kind::Int { min, max } => {
            let n: u64 = raw.parse().map_err(|_| format!("`{raw}` is not a non-negative integer"))?;
            if n < min || n > max {
                return Err(format!("{n} out of range, must be in [{min}, {max}]"));
            }
            Ok(Value::Int(n))
        }
        Kind::Choice(options) => {
            if options.contains(&raw) {
                Ok(Value::Text(raw.to_string()))
            } else {
                Err(format!("`{raw}` is not one of {}", options.join(", ")))
            }
        }
        Kind::Path => Ok(Value::Text(raw.to_string())),
        Kind::List { min, max, open } => {
            if raw.is_empty() {
                return Err("empty list".into());
            }
            raw.split(',')
                .map(|s| float(s).and_then(|x| bounded(x, min, max, open)))
                .collect::<Result<Vec<_>, _>>()
                .map(Value::List)
        }
    }
}

fn unit_split(key: &str) -> Option<(&str, &str)> {
    UNITS
        .iter()
        .filter_map(|u| key.strip_suffix(u).and_then(|s| s.strip_suffix('_')).map(|stem| (stem, *u)))
        .max_by_key(|(_, u)| u.len())
}

fn index_of(section: &str, key: &str) -> Option<usize> {
    SCHEMA.iter().position(|s| s.section == section && s.key == key)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: Vec<Value>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            values: SCHEMA
                .iter()
                .map(|s| parse_value(s.kind, s.default).expect("schema defaults are valid"))
                .collect(),
        }
    }
}

impl Config {
    fn get(&self, section: &str, key: &str) -> &Value {
        let k = index_of(section, key).unwrap_or_else(|| panic!("no key {section}.{key} in schema"));
        &self.values[k]
    }

    pub fn float(&self, section: &str, key: &str) -> f64 {
        match self.get(section, key) {
            Value::Float(x) => *x,
            v => panic!("{section}.{key} is {v:?}, not a float"),
        }
    }

    pub fn int(&self, section: &str, key: &str) -> u64 {
        match self.get(section, key) {
            Value::Int(n) => *n,
            v => panic!("{section}.{key} is {v:?}, not an integer"),
        }
    }

    pub fn text(&self, section: &str, key: &str) -> &str {
        match self.get(section, key) {
            Value::Text(s) => s,
            v => panic!("{section}.{key} is {v:?}, not text"),
        }
    }

    pub fn list(&self, section: &str, key: &str) -> &[f64] {
        match self.get(section, key) {
            Value::List(xs) => xs,
            v => panic!("{section}.{key} is {v:?}, not a list"),
        }
    }

    /// Replaces one value, checked against the schema.
    pub fn set(&mut self, section: &str, key: &str, raw: &str) -> Result<(), String> {
        let k = index_of(section, key).ok_or_else(|| format!("unknown key {section}.{key}"))?;
        self.values[k] = parse_value(SCHEMA[k].kind, raw.trim())?;
        Ok(())
    }

    /// Canonical text: every section and key in schema order.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        for (n, section) in SECTIONS.iter().enumerate() {
            if n > 0 {
                out.push('\n');
            }
            out.push_str(&format!("[{section}]\n"));
            for (spec, value) in SCHEMA.iter().zip(&self.values) {
                if spec.section == *section {
                    let text = value.to_string();
                    if text.is_empty() {
                        out.push_str(&format!("{} =\n", spec.key));
                    } else {
                        out.push_str(&format!("{} = {text}\n", spec.key));
                    }
                }
            }
        }
        out
    }

    pub fn calibration_targets(&self) -> CalibrationTargets {
        CalibrationTargets {
            r_on_at_0p3v: self.float("device", "r_on_mohm") * 1e6,
            on_off_at_0p1v: self.float("device", "on_off_ratio"),
            selection_ratio_at_0p5v: self.float("device", "selection_ratio"),
            crossover_v: self.float("device", "crossover_mv") / 1e3,
            t_kelvin: self.float("device", "t_k"),
        }
    }

    pub fn channels(&self) -> Channels {
        match self.text("device", "channels") {
            "ohmic" => Channels::OhmicOnly,
            "pf" => Channels::PooleFrenkelOnly,
            _ => Channels::Composite,
        }
    }

    /// Device geometry and barriers before calibration.
    pub fn skeleton(&self) -> ConductionParams {
        ConductionParams {
            d_fe: self.float("device", "d_fe_nm") / 1e9,
            area: self.float("device", "area_um2") / 1e12,
            phi_pf_ev: self.float("device", "phi_pf_ev"),
            ea_ohm_ev: self.float("device", "ea_ohm_ev"),
            tun: TunnelingParams {
                phi_bar_ev: self.float("device", "phi_tun_ev"),
                m_eff: self.float("device", "m_eff_rel"),
            },
            ..ConductionParams::skeleton()
        }
    }

    pub fn t_kelvin(&self) -> f64 {
        self.float("device", "t_k")
    }

    pub fn update_model(&self) -> UpdateModel {
        let mut m = UpdateModel {
            n_full: self.int("update", "n_full_pulses") as u32,
            v_on_pot: self.float("update", "v_on_pot_mv") / 1e3,
            v_on_dep: self.float("update", "v_on_dep_mv") / 1e3,
            c2c_rel: self.float("update", "c2c_pct") / 100.0,
            ..UpdateModel::default()
        };
        for kind in SchemeKind::ALL {
            let shape = m.shapes.get_mut(kind);
            shape.a_pot = self.float("update", &format!("a_pot_{}_pulses", kind.name()));
            shape.a_dep = self.float("update", &format!("a_dep_{}_pulses", kind.name()));
        }
        m
    }

    pub fn hysteresis(&self) -> DcHysteresis {
        DcHysteresis {
            v_c_minus: self.float("hysteresis", "v_c_minus_mv") / 1e3,
            v_c_plus: self.float("hysteresis", "v_c_plus_mv") / 1e3,
            width: self.float("hysteresis", "width_mv") / 1e3,
        }
    }

    pub fn sigma_d2d(&self) -> f64 {
        self.float("variation", "sigma_d2d_dec")
    }

    pub fn drift_rate(&self) -> f64 {
        self.float("variation", "drift_rate_per_s")
    }
}

/// Parses configuration text.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let mut cfg = Config::default();
    let mut seen: Vec<Option<usize>> = vec![None; SCHEMA.len()];
    let mut section: Option<&'static str> = None;
    for (n, raw_line) in text.lines().enumerate() {
        let line_no = n + 1;
        let err = |col: usize, msg: String| ConfigError {
            line: line_no,
            col,
            msg,
        };
        let content = raw_line.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        let col_of = |s: &str| s.as_ptr() as usize - raw_line.as_ptr() as usize + 1;
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(indent + 1, "section header is missing `]`".into()))?
                .trim();
            section = Some(
                SECTIONS
                    .iter()
                    .copied()
                    .find(|s| *s == name)
                    .ok_or_else(|| err(col_of(name), format!("unknown section `[{name}]`")))?,
            );
            continue;
        }
        let (key_part, value_part) = trimmed
            .split_once('=')
            .ok_or_else(|| err(indent + 1, format!("expected `key = value`, found `{trimmed}`")))?;
        let key = key_part.trim();
        let key_col = col_of(key_part) + (key_part.len() - key_part.trim_start().len());
        if key.is_empty() {
            return Err(err(key_col, "missing key before `=`".into()));
        }
        let sec = section.ok_or_else(|| err(key_col, format!("key `{key}` appears before any [section]")))?;
        let value = value_part.trim();
        let value_col = if value.is_empty() {
            col_of(value_part)
        } else {
            col_of(value_part) + (value_part.len() - value_part.trim_start().len())
        };
        let Some(k) = index_of(sec, key) else {
            let mismatch = unit_split(key).and_then(|(stem, unit)| {
                SCHEMA
                    .iter()
                    .filter(|s| s.section == sec)
                    .find(|s| matches!(unit_split(s.key), Some((st, u)) if st == stem && u != unit))
            });
            return Err(match mismatch {
                Some(s) => err(key_col, format!("unit mismatch: `{key}` given, [{sec}] expects `{}`", s.key)),
                None => err(key_col, format!("unknown key `{key}` in [{sec}]")),
            });
        };
        if let Some(first) = seen[k] {
            return Err(err(key_col, format!("duplicate key `{key}` (first set on line {first})")));
        }
        seen[k] = Some(line_no);
        cfg.values[k] = parse_value(SCHEMA[k].kind, value).map_err(|m| err(value_col, format!("{key}: {m}")))?;
    }
    Ok(cfg)
}
