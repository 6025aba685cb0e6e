//! Experiment configuration: `[section]` headings with `key = value` lines.
//!
//! Values are layered: file, then environment variables
//! `PEIERLS__<section>__<key>`, then `--set section.key=value` overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Prefix of environment overrides.
pub const ENV_PREFIX: &str = "PEIERLS__";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.line, &self.key) {
            (Some(l), Some(k)) => write!(f, "line {l}, key `{k}`: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, Some(k)) => write!(f, "key `{k}`: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl ConfigError {
    fn new(message: impl Into<String>) -> Self {
        ConfigError { line: None, key: None, message: message.into() }
    }

    fn at(entry: &Entry, key: &str, message: impl Into<String>) -> Self {
        ConfigError { line: entry.line, key: Some(key.to_string()), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: Option<usize>,
}

/// Untyped `section -> key -> value` table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::default();
        let mut current: Option<String> = None;
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or(ConfigError { line: Some(lineno), key: None, message: "unterminated section heading".into() })?;
                let name = name.trim();
                if name.is_empty() {
                    return Err(ConfigError { line: Some(lineno), key: None, message: "empty section name".into() });
                }
                raw.sections.entry(name.to_string()).or_default();
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError { line: Some(lineno), key: None, message: format!("expected `key = value`, found `{line}`") })?;
            let key = key.trim();
            let section = current
                .as_ref()
                .ok_or(ConfigError { line: Some(lineno), key: Some(key.to_string()), message: "key outside of any section".into() })?;
            if key.is_empty() {
                return Err(ConfigError { line: Some(lineno), key: None, message: "empty key".into() });
            }
            let table = raw.sections.get_mut(section).expect("section exists");
            if table.contains_key(key) {
                return Err(ConfigError { line: Some(lineno), key: Some(key.to_string()), message: "duplicate key".into() });
            }
            table.insert(key.to_string(), Entry { value: value.trim().to_string(), line: Some(lineno) });
        }
        Ok(raw)
    }

    pub fn set(&mut self, section: &str, key: &str, value: &str) {
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), Entry { value: value.trim().to_string(), line: None });
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(|e| e.value.as_str())
    }

    /// Applies `PEIERLS__<section>__<key>` variables from `vars`.
    pub fn apply_env<I>(&mut self, vars: I)
    where
        I: IntoIterator<Item = (String, String)>,
    {
        for (name, value) in vars {
            if let Some(rest) = name.strip_prefix(ENV_PREFIX) {
                if let Some((section, key)) = rest.split_once("__") {
                    if !section.is_empty() && !key.is_empty() {
                        self.set(section, key, &value);
                    }
                }
            }
        }
    }

    /// Applies one `section.key=value` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), ConfigError> {
        let (path, value) = spec.split_once('=').ok_or_else(|| ConfigError::new(format!("override `{spec}` is not `section.key=value`")))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| ConfigError::new(format!("override `{spec}` is not `section.key=value`")))?;
        if section.is_empty() || key.is_empty() {
            return Err(ConfigError::new(format!("override `{spec}` is not `section.key=value`")));
        }
        self.set(section, key, value);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ModelKind {
    Free,
    Harmonic,
    Sphere,
    Qm,
    Kg,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [ModelKind::Free, ModelKind::Harmonic, ModelKind::Sphere, ModelKind::Qm, ModelKind::Kg];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Free => "free",
            ModelKind::Harmonic => "harmonic",
            ModelKind::Sphere => "sphere",
            ModelKind::Qm => "qm",
            ModelKind::Kg => "kg",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn summary(self) -> &'static str {
        match self {
            ModelKind::Free => "free particle in flat space, L = m|v|^2/2",
            ModelKind::Harmonic => "isotropic oscillator, L = m(|v|^2 - omega^2 |x|^2)/2",
            ModelKind::Sphere => "geodesics of the unit 2-sphere in (theta, phi)",
            ModelKind::Qm => "finite-dimensional Schrodinger dynamics, 2i psi' = H psi",
            ModelKind::Kg => "free Klein-Gordon field on a periodic lattice",
        }
    }

    /// Parameter schema of the `[model]` section.
    pub fn schema(self) -> &'static [ParamSpec] {
        match self {
            ModelKind::Free => FREE_SCHEMA,
            ModelKind::Harmonic => HARMONIC_SCHEMA,
            ModelKind::Sphere => SPHERE_SCHEMA,
            ModelKind::Qm => QM_SCHEMA,
            ModelKind::Kg => KG_SCHEMA,
        }
    }

    /// Artifacts the model can write.
    pub fn outputs(self) -> &'static [Output] {
        match self {
            ModelKind::Free | ModelKind::Harmonic | ModelKind::Sphere => &[Output::Trajectory, Output::Kernel, Output::Brackets],
            ModelKind::Qm => &[Output::Brackets],
            ModelKind::Kg => &[Output::Commutator],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamSpec {
    pub key: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

const fn p(key: &'static str, default: &'static str, help: &'static str) -> ParamSpec {
    ParamSpec { key, default, help }
}

const FREE_SCHEMA: &[ParamSpec] = &[
    p("n", "1", "configuration dimension"),
    p("T", "1", "half-length of the parameter interval [-T, T]"),
    p("N", "201", "grid points (odd, >= 3)"),
    p("m", "1", "mass"),
    p("x_minus", "0", "position at s = -T (one value or n values)"),
    p("x_plus", "1", "position at s = +T (one value or n values)"),
];

const HARMONIC_SCHEMA: &[ParamSpec] = &[
    p("n", "1", "configuration dimension"),
    p("T", "1", "half-length of the parameter interval [-T, T]"),
    p("N", "201", "grid points (odd, >= 3)"),
    p("m", "1", "mass"),
    p("omega", "1", "angular frequency"),
    p("x_minus", "0", "position at s = -T (one value or n values)"),
    p("x_plus", "1", "position at s = +T (one value or n values)"),
];

const SPHERE_SCHEMA: &[ParamSpec] = &[
    p("T", "1", "half-length of the parameter interval, below pi/2"),
    p("N", "201", "grid points (odd, >= 3)"),
    p("m", "1", "mass"),
    p("tilt", "0.5", "inclination of the reference great circle to the equator"),
];

const QM_SCHEMA: &[ParamSpec] = &[
    p("d", "2", "Hilbert-space dimension"),
    p("T", "1", "half-length of the time interval"),
    p("N", "201", "grid points (odd, >= 3)"),
    p("hamiltonian", "zero", "`zero`, `random`, or a file of d rows with 2d numbers (re im pairs)"),
];

const KG_SCHEMA: &[ParamSpec] = &[
    p("d", "1", "spatial dimension (1, 2 or 3)"),
    p("L", "6.283185307179586", "box edge length"),
    p("M", "64", "sites per dimension (even)"),
    p("m", "1", "field mass (> 0)"),
    p("dt_max", "2", "largest time separation in the commutator table"),
    p("dt_steps", "21", "time separations in the commutator table"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Output {
    Trajectory,
    Kernel,
    Brackets,
    Commutator,
}

impl Output {
    pub fn name(self) -> &'static str {
        match self {
            Output::Trajectory => "trajectory",
            Output::Kernel => "kernel",
            Output::Brackets => "brackets",
            Output::Commutator => "commutator",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        [Output::Trajectory, Output::Kernel, Output::Brackets, Output::Commutator].into_iter().find(|o| o.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleParams {
    pub n: usize,
    pub half_width: f64,
    pub points: usize,
    pub mass: f64,
    pub omega: f64,
    pub tilt: f64,
    pub x_minus: Vec<f64>,
    pub x_plus: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum HamiltonianSource {
    Zero,
    Random,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QmParams {
    pub d: usize,
    pub half_width: f64,
    pub points: usize,
    pub hamiltonian: HamiltonianSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KgParams {
    pub d: usize,
    pub length: f64,
    pub sites: usize,
    pub mass: f64,
    pub dt_max: f64,
    pub dt_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Parameters {
    Particle(ParticleParams),
    Qm(QmParams),
    Kg(KgParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub seed: u64,
    /// Random functional pairs for the bracket checks.
    pub pairs: usize,
    pub outputs: Vec<Output>,
    pub parameters: Parameters,
}

const EXPERIMENT_KEYS: &[&str] = &["model", "seed", "pairs", "outputs"];

/// Typed lookup with schema defaults and line-aware diagnostics.
struct Lookup<'a> {
    table: Option<&'a BTreeMap<String, Entry>>,
    schema: &'a [ParamSpec],
}

impl Lookup<'_> {
    fn raw(&self, key: &str) -> (String, Entry) {
        let default = self.schema.iter().find(|p| p.key == key).map(|p| p.default).unwrap_or("");
        match self.table.and_then(|t| t.get(key)) {
            Some(e) => (key.to_string(), e.clone()),
            None => (key.to_string(), Entry { value: default.to_string(), line: None }),
        }
    }

    fn float(&self, key: &str) -> Result<f64, ConfigError> {
        let (k, e) = self.raw(key);
        let v: f64 = e.value.parse().map_err(|_| ConfigError::at(&e, &k, format!("`{}` is not a number", e.value)))?;
        if !v.is_finite() {
            return Err(ConfigError::at(&e, &k, "must be finite"));
        }
        Ok(v)
    }

    fn positive(&self, key: &str) -> Result<f64, ConfigError> {
        let v = self.float(key)?;
        if v <= 0.0 {
            let (k, e) = self.raw(key);
            return Err(ConfigError::at(&e, &k, "must be positive"));
        }
        Ok(v)
    }

    fn int(&self, key: &str, min: usize) -> Result<usize, ConfigError> {
        let (k, e) = self.raw(key);
        let v: usize = e.value.parse().map_err(|_| ConfigError::at(&e, &k, format!("`{}` is not a non-negative integer", e.value)))?;
        if v < min {
            return Err(ConfigError::at(&e, &k, format!("must be at least {min}")));
        }
        Ok(v)
    }

    fn odd(&self, key: &str) -> Result<usize, ConfigError> {
        let v = self.int(key, 3)?;
        if v % 2 == 0 {
            let (k, e) = self.raw(key);
            return Err(ConfigError::at(&e, &k, format!("must be odd, got {v}")));
        }
        Ok(v)
    }

    fn vector(&self, key: &str, n: usize) -> Result<Vec<f64>, ConfigError> {
        let (k, e) = self.raw(key);
        let vals = e
            .value
            .split(',')
            .map(|t| t.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| ConfigError::at(&e, &k, format!("`{}` is not a comma-separated list of numbers", e.value)))?;
        match vals.len() {
            1 => Ok(vec![vals[0]; n]),
            len if len == n => Ok(vals),
            len => Err(ConfigError::at(&e, &k, format!("expected 1 or {n} values, got {len}"))),
        }
    }
}

impl ExperimentConfig {
    /// Validates a raw table. `base` resolves relative file paths.
    pub fn from_raw(raw: &RawConfig, base: &Path) -> Result<Self, ConfigError> {
        for (name, table) in &raw.sections {
            if name != "experiment" && name != "model" {
                let line = table.values().filter_map(|e| e.line).min();
                return Err(ConfigError { line, key: None, message: format!("unknown section `[{name}]`") });
            }
        }
        let experiment = raw.sections.get("experiment");
        if let Some(t) = experiment {
            if let Some((k, e)) = t.iter().find(|(k, _)| !EXPERIMENT_KEYS.contains(&k.as_str())) {
                return Err(ConfigError::at(e, k, "unknown key in [experiment]"));
            }
        }
        let model_entry = experiment
            .and_then(|t| t.get("model"))
            .ok_or_else(|| ConfigError { line: None, key: Some("model".into()), message: "missing in [experiment]".into() })?;
        let model = ModelKind::from_name(&model_entry.value).ok_or_else(|| {
            ConfigError::at(model_entry, "model", format!("unknown model `{}` (see `peierls models`)", model_entry.value))
        })?;

        let exp = Lookup { table: experiment, schema: &[p("seed", "0", ""), p("pairs", "10", "")] };
        let (sk, se) = exp.raw("seed");
        let seed: u64 = se.value.parse().map_err(|_| ConfigError::at(&se, &sk, format!("`{}` is not a non-negative integer", se.value)))?;
        let pairs = exp.int("pairs", 0)?;

        let outputs = match experiment.and_then(|t| t.get("outputs")) {
            None => model.outputs().to_vec(),
            Some(e) => {
                let mut out = Vec::new();
                for name in e.value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let o = Output::from_name(name)
                        .filter(|o| model.outputs().contains(o))
                        .ok_or_else(|| ConfigError::at(e, "outputs", format!("`{name}` is not an output of model `{}`", model.name())))?;
                    if !out.contains(&o) {
                        out.push(o);
                    }
                }
                out
            }
        };

        let table = raw.sections.get("model");
        let schema = model.schema();
        if let Some(t) = table {
            if let Some((k, e)) = t.iter().find(|(k, _)| !schema.iter().any(|p| p.key == k.as_str())) {
                return Err(ConfigError::at(e, k, format!("not a parameter of model `{}`", model.name())));
            }
        }
        let look = Lookup { table, schema };
        let parameters = match model {
            ModelKind::Free | ModelKind::Harmonic | ModelKind::Sphere => {
                let n = if model == ModelKind::Sphere { 2 } else { look.int("n", 1)? };
                let (x_minus, x_plus) = if model == ModelKind::Sphere { (vec![], vec![]) } else { (look.vector("x_minus", n)?, look.vector("x_plus", n)?) };
                Parameters::Particle(ParticleParams {
                    n,
                    half_width: look.positive("T")?,
                    points: look.odd("N")?,
                    mass: look.positive("m")?,
                    omega: if model == ModelKind::Harmonic { look.positive("omega")? } else { 0.0 },
                    tilt: if model == ModelKind::Sphere { look.float("tilt")? } else { 0.0 },
                    x_minus,
                    x_plus,
                })
            }
            ModelKind::Qm => {
                let (_, e) = look.raw("hamiltonian");
                let hamiltonian = match e.value.as_str() {
                    "zero" => HamiltonianSource::Zero,
                    "random" => HamiltonianSource::Random,
                    "" => return Err(ConfigError::at(&e, "hamiltonian", "empty value")),
                    path => HamiltonianSource::File(base.join(path)),
                };
                Parameters::Qm(QmParams { d: look.int("d", 1)?, half_width: look.positive("T")?, points: look.odd("N")?, hamiltonian })
            }
            ModelKind::Kg => {
                let d = look.int("d", 1)?;
                if d > 3 {
                    let (k, e) = look.raw("d");
                    return Err(ConfigError::at(&e, &k, "must be 1, 2 or 3"));
                }
                let sites = look.int("M", 2)?;
                if sites % 2 != 0 {
                    let (k, e) = look.raw("M");
                    return Err(ConfigError::at(&e, &k, format!("must be even, got {sites}")));
                }
                Parameters::Kg(KgParams {
                    d,
                    length: look.positive("L")?,
                    sites,
                    mass: look.positive("m")?,
                    dt_max: look.positive("dt_max")?,
                    dt_steps: look.int("dt_steps", 2)?,
                })
            }
        };
        Ok(ExperimentConfig { model, seed, pairs, outputs, parameters })
    }

    /// Reads a file, then applies the process environment and `overrides`.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new(format!("cannot read {}: {e}", path.display())))?;
        let mut raw = RawConfig::parse(&text)?;
        raw.apply_env(std::env::vars());
        for o in overrides {
            raw.apply_override(o)?;
        }
        Self::from_raw(&raw, path.parent().unwrap_or(Path::new(".")))
    }
}

/// Text catalog of the model registry.
pub fn list_models() -> String {
    let mut out = String::new();
    for m in ModelKind::ALL {
        out.push_str(&format!("{}: {}\n", m.name(), m.summary()));
        for p in m.schema() {
            out.push_str(&format!("  {:<12} default {:<20} {}\n", p.key, p.default, p.help));
        }
        let outs: Vec<&str> = m.outputs().iter().map(|o| o.name()).collect();
        out.push_str(&format!("  outputs: {}\n", outs.join(", ")));
    }
    out
}
