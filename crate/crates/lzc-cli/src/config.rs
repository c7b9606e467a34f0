//! Flat key-value run configuration: one `key = value` pair per line,
//! `#` comments, arrays comma-separated. No nesting.
//!
//! ```text
//! beta  = 2.02
//! k     = 1.57, 12.4
//! g     = 0.5, 0.425
//! init  = level0              # level0 | band:<q>
//! mode  = validate            # analytic | numeric | validate
//! sweep = g[0], 0, 4, 41, linear
//! csv   = out.csv
//! svg   = out.svg
//! ```

use std::fmt;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{file}:{line}: field `{field}`: {message}")]
pub struct ConfigError {
    pub file: String,
    pub line: usize,
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(file: &str, line: usize, field: &str, message: impl Into<String>) -> Self {
        Self {
            file: file.into(),
            line,
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitSpec {
    Level0,
    Band(usize),
}

impl fmt::Display for InitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitSpec::Level0 => write!(f, "level0"),
            InitSpec::Band(q) => write!(f, "band:{q}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Analytic,
    Numeric,
    Validate,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Analytic => write!(f, "analytic"),
            Mode::Numeric => write!(f, "numeric"),
            Mode::Validate => write!(f, "validate"),
        }
    }
}

/// Which scalar a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepPath {
    Beta,
    K(usize),
    G(usize),
    /// Band splitting: `k[1] = k[0] + value` (requires N = 2).
    DeltaK,
}

impl fmt::Display for SweepPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepPath::Beta => write!(f, "beta"),
            SweepPath::K(i) => write!(f, "k[{i}]"),
            SweepPath::G(i) => write!(f, "g[{i}]"),
            SweepPath::DeltaK => write!(f, "dk"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub path: SweepPath,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    pub log_scale: bool,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        let n = self.steps;
        (0..n)
            .map(|i| {
                let f = i as f64 / (n - 1) as f64;
                if self.log_scale {
                    self.start * (self.stop / self.start).powf(f)
                } else {
                    self.start + (self.stop - self.start) * f
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub beta: f64,
    pub k: Vec<f64>,
    pub g: Vec<f64>,
    pub init: InitSpec,
    pub mode: Mode,
    pub sweep: Option<Sweep>,
    /// Integration horizon as `β t`.
    pub bt_horizon: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub tau0: Option<f64>,
    pub max_steps: u64,
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            beta: f64::NAN,
            k: Vec::new(),
            g: Vec::new(),
            init: InitSpec::Level0,
            mode: Mode::Analytic,
            sweep: None,
            bt_horizon: 2000.0,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            tau0: None,
            max_steps: 50_000_000,
            csv: None,
            svg: None,
        }
    }
}

impl RunConfig {
    /// Parses the flat key-value format. `file` is used in diagnostics only.
    pub fn parse(file: &str, text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut saw_beta = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::new(file, line_no, line, "expected `key = value`"))?;
            let key = key.trim();
            let value = value.trim();
            cfg.apply(file, line_no, key, value)?;
            if key == "beta" {
                saw_beta = true;
            }
        }
        if !saw_beta {
            return Err(ConfigError::new(file, 0, "beta", "missing required field"));
        }
        cfg.validate(file)?;
        Ok(cfg)
    }

    /// Applies one `key=value` override (the `--set` flag).
    pub fn apply_override(&mut self, spec: &str) -> Result<(), ConfigError> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| ConfigError::new("<override>", 0, spec, "expected `key=value`"))?;
        self.apply("<override>", 0, key.trim(), value.trim())?;
        self.validate("<override>")
    }

    fn apply(
        &mut self,
        file: &str,
        line: usize,
        key: &str,
        value: &str,
    ) -> Result<(), ConfigError> {
        let scalar = |v: &str, field: &str| -> Result<f64, ConfigError> {
            v.parse::<f64>()
                .map_err(|_| ConfigError::new(file, line, field, format!("`{v}` is not a number")))
        };
        match key {
            "beta" => self.beta = scalar(value, key)?,
            "k" => self.k = parse_array(file, line, key, value)?,
            "g" => self.g = parse_array(file, line, key, value)?,
            "init" => {
                self.init = if value == "level0" {
                    InitSpec::Level0
                } else if let Some(q) = value.strip_prefix("band:") {
                    let q = q.trim().parse::<usize>().map_err(|_| {
                        ConfigError::new(
                            file,
                            line,
                            key,
                            format!("`{value}`: band index must be an integer"),
                        )
                    })?;
                    InitSpec::Band(q)
                } else {
                    return Err(ConfigError::new(
                        file,
                        line,
                        key,
                        format!("`{value}` is not `level0` or `band:<q>`"),
                    ));
                }
            }
            "mode" => {
                self.mode = match value {
                    "analytic" => Mode::Analytic,
                    "numeric" => Mode::Numeric,
                    "validate" => Mode::Validate,
                    _ => {
                        return Err(ConfigError::new(
                            file,
                            line,
                            key,
                            format!("`{value}` is not analytic|numeric|validate"),
                        ))
                    }
                }
            }
            "sweep" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 5 {
                    return Err(ConfigError::new(
                        file,
                        line,
                        key,
                        "expected `path, start, stop, steps, linear|log`",
                    ));
                }
                let path = parse_path(file, line, parts[0])?;
                let start = scalar(parts[1], key)?;
                let stop = scalar(parts[2], key)?;
                let steps = parts[3].parse::<usize>().map_err(|_| {
                    ConfigError::new(
                        file,
                        line,
                        key,
                        format!("`{}` is not a step count", parts[3]),
                    )
                })?;
                let log_scale = match parts[4] {
                    "linear" => false,
                    "log" => true,
                    other => {
                        return Err(ConfigError::new(
                            file,
                            line,
                            key,
                            format!("`{other}` is not linear|log"),
                        ))
                    }
                };
                self.sweep = Some(Sweep {
                    path,
                    start,
                    stop,
                    steps,
                    log_scale,
                });
            }
            "bt_horizon" => self.bt_horizon = scalar(value, key)?,
            "rel_tol" => self.rel_tol = scalar(value, key)?,
            "abs_tol" => self.abs_tol = scalar(value, key)?,
            "tau0" => self.tau0 = Some(scalar(value, key)?),
            "max_steps" => {
                self.max_steps = value.parse::<u64>().map_err(|_| {
                    ConfigError::new(file, line, key, format!("`{value}` is not an integer"))
                })?
            }
            "csv" => self.csv = Some(PathBuf::from(value)),
            "svg" => self.svg = Some(PathBuf::from(value)),
            other => {
                return Err(ConfigError::new(file, line, other, "unknown field"));
            }
        }
        Ok(())
    }

    fn validate(&self, file: &str) -> Result<(), ConfigError> {
        let err = |field: &str, msg: String| Err(ConfigError::new(file, 0, field, msg));
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return err(
                "beta",
                format!("must be positive and finite, got {}", self.beta),
            );
        }
        if self.k.is_empty() {
            return err("k", "must contain at least one level".into());
        }
        if self.k.len() != self.g.len() {
            return err(
                "g",
                format!("has {} entries but k has {}", self.g.len(), self.k.len()),
            );
        }
        if let InitSpec::Band(q) = self.init {
            if q == 0 || q > self.k.len() {
                return err(
                    "init",
                    format!("band index {q} outside 1..={}", self.k.len()),
                );
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.steps < 2 {
                return err("sweep", format!("steps must be >= 2, got {}", sweep.steps));
            }
            match sweep.path {
                SweepPath::K(i) | SweepPath::G(i) => {
                    if i >= self.k.len() {
                        return err(
                            "sweep",
                            format!("index {i} outside the band (N = {})", self.k.len()),
                        );
                    }
                }
                SweepPath::DeltaK => {
                    if self.k.len() != 2 {
                        return err("sweep", "dk sweeps require exactly N = 2".into());
                    }
                }
                SweepPath::Beta => {}
            }
            if sweep.log_scale && (sweep.start <= 0.0 || sweep.stop <= 0.0) {
                return err("sweep", "log scale needs positive start/stop".into());
            }
            if sweep.path == SweepPath::Beta && (sweep.start.min(sweep.stop) <= 0.0) {
                return err("sweep", "beta sweep values must stay positive".into());
            }
        }
        if !(self.bt_horizon.is_finite() && self.bt_horizon > 0.0) {
            return err(
                "bt_horizon",
                format!("must be positive, got {}", self.bt_horizon),
            );
        }
        Ok(())
    }

    /// The config file rendering of this configuration.
    pub fn to_config_text(&self) -> String {
        let fmt_arr = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let mut out = String::new();
        out.push_str(&format!("beta = {}\n", self.beta));
        out.push_str(&format!("k = {}\n", fmt_arr(&self.k)));
        out.push_str(&format!("g = {}\n", fmt_arr(&self.g)));
        out.push_str(&format!("init = {}\n", self.init));
        out.push_str(&format!("mode = {}\n", self.mode));
        if let Some(s) = &self.sweep {
            out.push_str(&format!(
                "sweep = {}, {}, {}, {}, {}\n",
                s.path,
                s.start,
                s.stop,
                s.steps,
                if s.log_scale { "log" } else { "linear" }
            ));
        }
        out.push_str(&format!("bt_horizon = {}\n", self.bt_horizon));
        out.push_str(&format!("rel_tol = {}\n", self.rel_tol));
        out.push_str(&format!("abs_tol = {}\n", self.abs_tol));
        if let Some(t) = self.tau0 {
            out.push_str(&format!("tau0 = {t}\n"));
        }
        out.push_str(&format!("max_steps = {}\n", self.max_steps));
        if let Some(p) = &self.csv {
            out.push_str(&format!("csv = {}\n", p.display()));
        }
        if let Some(p) = &self.svg {
            out.push_str(&format!("svg = {}\n", p.display()));
        }
        out
    }
}

fn parse_array(file: &str, line: usize, field: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| ConfigError::new(file, line, field, format!("`{s}` is not a number")))
        })
        .collect()
}

fn parse_path(file: &str, line: usize, s: &str) -> Result<SweepPath, ConfigError> {
    if s == "beta" {
        return Ok(SweepPath::Beta);
    }
    if s == "dk" {
        return Ok(SweepPath::DeltaK);
    }
    for (prefix, ctor) in [
        ("k[", SweepPath::K as fn(usize) -> SweepPath),
        ("g[", SweepPath::G),
    ] {
        if let Some(rest) = s.strip_prefix(prefix) {
            if let Some(idx) = rest.strip_suffix(']') {
                let i = idx.parse::<usize>().map_err(|_| {
                    ConfigError::new(file, line, "sweep", format!("`{s}`: bad index"))
                })?;
                return Ok(ctor(i));
            }
        }
    }
    Err(ConfigError::new(
        file,
        line,
        "sweep",
        format!("`{s}` is not beta, dk, k[i] or g[i]"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_config() {
        let text = "\
# comment
beta = 2.02
k = 1.57, 12.4
g = 0.5, 0.425   # inline comment
init = band:1
mode = validate
sweep = g[0], 0, 4, 41, linear
csv = out.csv
";
        let cfg = RunConfig::parse("test.lzc", text).unwrap();
        assert_eq!(cfg.beta, 2.02);
        assert_eq!(cfg.k, vec![1.57, 12.4]);
        assert_eq!(cfg.init, InitSpec::Band(1));
        assert_eq!(cfg.mode, Mode::Validate);
        let s = cfg.sweep.unwrap();
        assert_eq!(s.path, SweepPath::G(0));
        assert_eq!(s.steps, 41);
        assert_eq!(cfg.csv, Some(PathBuf::from("out.csv")));
    }

    #[test]
    fn empty_band_is_field_error() {
        let text = "beta = 1.0\nk = \ng = \n";
        let e = RunConfig::parse("bad.lzc", text).unwrap_err();
        assert_eq!(e.field, "k");
        assert!(e.message.contains("at least one"));
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let text = "beta = 1.0\nk = 1.0\ng = oops\n";
        let e = RunConfig::parse("bad.lzc", text).unwrap_err();
        assert_eq!(e.line, 3);
        assert_eq!(e.field, "g");
    }

    #[test]
    fn sweep_validation() {
        let base = "beta = 1.0\nk = 0.5, 2.0\ng = 0.4, 0.3\n";
        let bad_steps = format!("{base}sweep = g[0], 0, 1, 1, linear\n");
        assert!(RunConfig::parse("t", &bad_steps).is_err());
        let bad_index = format!("{base}sweep = g[5], 0, 1, 3, linear\n");
        assert!(RunConfig::parse("t", &bad_index).is_err());
        let ok = format!("{base}sweep = dk, 0.5, 8, 5, log\n");
        let cfg = RunConfig::parse("t", &ok).unwrap();
        let vals = cfg.sweep.unwrap().values();
        assert_eq!(vals.len(), 5);
        assert!((vals[0] - 0.5).abs() < 1e-12);
        assert!((vals[4] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn overrides_apply() {
        let text = "beta = 1.0\nk = 0.5\ng = 0.4\n";
        let mut cfg = RunConfig::parse("t", text).unwrap();
        cfg.apply_override("mode=numeric").unwrap();
        assert_eq!(cfg.mode, Mode::Numeric);
        assert!(cfg.apply_override("beta=-1").is_err());
    }

    #[test]
    fn roundtrips_through_text() {
        let text =
            "beta = 1.5\nk = 0.5, 2\ng = 0.4, 0.1\nmode = numeric\nsweep = k[1], 1, 3, 7, linear\n";
        let cfg = RunConfig::parse("t", text).unwrap();
        let cfg2 = RunConfig::parse("t2", &cfg.to_config_text()).unwrap();
        assert_eq!(cfg, cfg2);
    }
}
