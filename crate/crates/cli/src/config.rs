//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use autochemo::experiments::{InitialCondition, ScenarioSpec, PRESET_NAMES};
use autochemo::Parameters;

use crate::error::CliError;

/// Which snapshot files to write.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Vtk,
    Both,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Self::Csv),
            "vtk" => Some(Self::Vtk),
            "both" => Some(Self::Both),
            _ => None,
        }
    }

    pub fn csv(self) -> bool {
        matches!(self, Self::Csv | Self::Both)
    }

    pub fn vtk(self) -> bool {
        matches!(self, Self::Vtk | Self::Both)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Mode {
    Scenario(ScenarioSpec),
    Converge { levels: Vec<usize>, final_time: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub out_dir: PathBuf,
    /// Snapshot every this many steps; `None` uses the scenario's preset times.
    pub snapshot_every: Option<usize>,
    pub format: OutputFormat,
    pub verbosity: u8,
}

/// Values given on the command line; each one replaces the file's value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub mode: Option<String>,
    pub preset: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub snapshot_every: Option<usize>,
    pub format: Option<String>,
    pub seed: Option<u64>,
    pub levels: Option<Vec<usize>>,
    pub final_time: Option<f64>,
}

const KEYS: &[&str] = &[
    "mode",
    "preset",
    "out_dir",
    "snapshot_every",
    "format",
    "verbosity",
    "seed",
    "lx",
    "ly",
    "nx",
    "ny",
    "dt",
    "final_time",
    "d_c",
    "d_p",
    "s",
    "k",
    "gamma",
    "gamma2",
    "g",
    "initial",
    "epsilon",
    "gaussian_width",
    "levels",
];

#[derive(Clone, Debug)]
struct Entry {
    value: String,
    line: usize,
}

/// Raw key-value pairs with the line each was read from (0 for flags).
#[derive(Clone, Debug, Default)]
struct Table(BTreeMap<String, Entry>);

fn parse_table(text: &str) -> Result<Table, CliError> {
    let mut table = Table::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| {
            CliError::config(format!(
                "line {line}: expected `key = value`, found `{content}`"
            ))
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(CliError::config(format!("line {line}: missing key")));
        }
        if !KEYS.contains(&key) {
            return Err(CliError::config(format!(
                "line {line}: unknown key `{key}`"
            )));
        }
        if value.is_empty() {
            return Err(CliError::config(format!(
                "line {line}: missing value for `{key}`"
            )));
        }
        if table.0.contains_key(key) {
            return Err(CliError::config(format!(
                "line {line}: duplicate key `{key}`"
            )));
        }
        table.0.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line,
            },
        );
    }
    Ok(table)
}

impl Table {
    fn set(&mut self, key: &str, value: String) {
        self.0.insert(key.to_string(), Entry { value, line: 0 });
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|e| e.value.as_str())
    }

    fn get<T: std::str::FromStr>(&self, key: &str, kind: &str) -> Result<Option<T>, CliError> {
        let Some(entry) = self.0.get(key) else {
            return Ok(None);
        };
        entry.value.parse().map(Some).map_err(|_| {
            let origin = if entry.line == 0 {
                "command line".to_string()
            } else {
                format!("line {}", entry.line)
            };
            CliError::config(format!(
                "{origin}: `{key}` expects {kind}, found `{}`",
                entry.value
            ))
        })
    }

    fn f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.get(key, "a number")
    }

    fn usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        self.get(key, "a non-negative integer")
    }

    fn levels(&self) -> Result<Option<Vec<usize>>, CliError> {
        let Some(entry) = self.0.get("levels") else {
            return Ok(None);
        };
        parse_levels(&entry.value).map(Some).map_err(|_| {
            CliError::config(format!(
                "line {}: `levels` expects a comma-separated list of integers, found `{}`",
                entry.line, entry.value
            ))
        })
    }
}

pub fn parse_levels(s: &str) -> Result<Vec<usize>, std::num::ParseIntError> {
    s.split(',').map(|v| v.trim().parse()).collect()
}

fn scenario_defaults() -> Parameters {
    Parameters {
        d_c: 1.0,
        d_p: 1.0,
        s: 0.0,
        k: 0.5,
        gamma: 1.0,
        gamma2: 10.0,
        g: 0.0,
    }
}

fn build_scenario(t: &Table) -> Result<ScenarioSpec, CliError> {
    let mut spec = match t.str("preset") {
        Some(name) => ScenarioSpec::preset(name).ok_or_else(|| {
            CliError::config(format!(
                "unknown preset `{name}`; valid presets: {}",
                PRESET_NAMES.join(", ")
            ))
        })?,
        None => {
            let missing: Vec<&str> = ["initial", "s", "g"]
                .into_iter()
                .filter(|k| t.str(k).is_none())
                .collect();
            if !missing.is_empty() {
                return Err(CliError::config(format!(
                    "scenario mode needs `preset`, or an inline scenario with keys: {}",
                    missing.join(", ")
                )));
            }
            let mut base = ScenarioSpec::preset("case1").expect("built-in preset");
            base.name = "custom".into();
            base.params = scenario_defaults();
            base.snapshot_times.clear();
            base
        }
    };

    if let Some(name) = t.str("initial") {
        spec.initial =
            InitialCondition::from_name(name).map_err(|e| CliError::config(e.to_string()))?;
    }
    macro_rules! float_fields {
        ($($key:literal => $field:expr),* $(,)?) => {
            $(if let Some(v) = t.f64($key)? { $field = v; })*
        };
    }
    float_fields! {
        "lx" => spec.lx,
        "ly" => spec.ly,
        "dt" => spec.dt,
        "final_time" => spec.final_time,
        "d_c" => spec.params.d_c,
        "d_p" => spec.params.d_p,
        "s" => spec.params.s,
        "k" => spec.params.k,
        "gamma" => spec.params.gamma,
        "gamma2" => spec.params.gamma2,
        "g" => spec.params.g,
    }
    if let Some(nx) = t.usize("nx")? {
        spec.nx = nx;
        spec.ny = t.usize("ny")?.unwrap_or(nx);
    } else if let Some(ny) = t.usize("ny")? {
        spec.ny = ny;
    }
    if let Some(seed) = t.get::<u64>("seed", "a non-negative integer")? {
        spec.seed = seed;
    }
    if let Some(eps) = t.f64("epsilon")? {
        match &mut spec.initial {
            InitialCondition::UniformPerturbed { epsilon } => *epsilon = eps,
            InitialCondition::GaussianBlob { noise, .. } => *noise = eps,
        }
    }
    if let Some(w) = t.f64("gaussian_width")? {
        spec.set_gaussian_width(w)
            .map_err(|e| CliError::config(e.to_string()))?;
    }
    spec.validate()
        .map_err(|e| CliError::config(e.to_string()))?;
    Ok(spec)
}

fn build(t: &Table) -> Result<RunConfig, CliError> {
    if t.0.is_empty() {
        return Err(CliError::config(
            "configuration is empty; required keys: mode, and preset (scenario mode) or levels (converge mode)",
        ));
    }
    let mode = t
        .str("mode")
        .ok_or_else(|| CliError::config("missing required key `mode` (scenario | converge)"))?;
    let mode = match mode {
        "scenario" => Mode::Scenario(build_scenario(t)?),
        "converge" => {
            let levels = t.levels()?.unwrap_or_else(|| vec![8, 16, 32, 64]);
            if levels.len() < 3 || levels.iter().any(|&n| n < 2) {
                return Err(CliError::config(
                    "`levels` needs at least 3 entries, each at least 2",
                ));
            }
            let final_time = t.f64("final_time")?.unwrap_or(1.0);
            if final_time.is_nan() || final_time <= 0.0 {
                return Err(CliError::config("`final_time` must be positive"));
            }
            Mode::Converge { levels, final_time }
        }
        other => {
            return Err(CliError::config(format!(
                "`mode` must be `scenario` or `converge`, found `{other}`"
            )))
        }
    };
    let snapshot_every = t.usize("snapshot_every")?;
    if snapshot_every == Some(0) {
        return Err(CliError::config("`snapshot_every` must be at least 1"));
    }
    let format = match t.str("format") {
        None => OutputFormat::Csv,
        Some(f) => OutputFormat::parse(f).ok_or_else(|| {
            CliError::config(format!("`format` must be csv, vtk or both, found `{f}`"))
        })?,
    };
    Ok(RunConfig {
        mode,
        out_dir: PathBuf::from(t.str("out_dir").unwrap_or("output")),
        snapshot_every,
        format,
        verbosity: t.get("verbosity", "an integer 0-255")?.unwrap_or(0),
    })
}

/// Parses configuration text, then applies command-line overrides.
pub fn parse_config_str(text: &str, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let mut t = parse_table(text)?;
    if let Some(v) = &overrides.mode {
        t.set("mode", v.clone());
    }
    if let Some(v) = &overrides.preset {
        t.set("preset", v.clone());
    }
    if let Some(v) = &overrides.out_dir {
        t.set("out_dir", v.display().to_string());
    }
    if let Some(v) = overrides.snapshot_every {
        t.set("snapshot_every", v.to_string());
    }
    if let Some(v) = &overrides.format {
        t.set("format", v.clone());
    }
    if let Some(v) = overrides.seed {
        t.set("seed", v.to_string());
    }
    if let Some(v) = &overrides.levels {
        let joined: Vec<String> = v.iter().map(|n| n.to_string()).collect();
        t.set("levels", joined.join(","));
    }
    if let Some(v) = overrides.final_time {
        t.set("final_time", v.to_string());
    }
    build(&t)
}

pub fn parse_config(path: &Path, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_str(&text, overrides)
}
