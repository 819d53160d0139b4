//! Experiment configuration: named presets deep-merged with user TOML and
//! command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::excitation::{GridSpec, MultisineSpec};
use crate::lti::RationalTF;
use crate::lure::LureModel;
use crate::nonlinearity::{BasisFn, StaticNL};
use crate::sim::ControlMode;

pub const PRESETS: [&str; 4] = ["desk-fhn", "desk-chua", "paper-fhn", "paper-chua"];

const COMMON: &str = r#"
seed = 1
sigma = 0.01
ts = 1e-3
workers = 0
output_dir = "out"

[validation]
kind = "replay"
warmup = 10.0
duration = 60.0
input_mean = -1.5
input_rms = 0.3
input_f_max = 1.0
spike_threshold = 0.0
min_separation = 0.5
attractor_duration = 500.0
attractor_ts = 1e-2
x0 = [0.1, 0.0, 0.0]
seeds = 5

[memory]
k = 1.5
t1 = 1.0
t2 = 2.0
amplitude = 0.5
eta = [5.0, 10.0, 20.0, 30.0]
probes = [40.0, 60.0, 80.0]
epsilon = 0.01
ts = 1e-2

[simulate]
controller = "open"
input = "constant"
level = 0.0
duration = 50.0
"#;

const FHN: &str = r#"
model = "fhn"

[static_stage]
k = 1.5
v_min = -2.5
v_max = 2.5
m = 15
spacing = "chebyshev"
settle_time = 20.0
n_avg = 1000
bases = [{ kind = "monomial", param = 2 }, { kind = "monomial", param = 3 }]

[dynamic_stage]
k = 1.5
period = 20.0
f_max = 20.0
rms = 0.5
realizations = 5
periods = 2
n_poles = 2
n_zeros = 1
mode = "sampled"
"#;

const CHUA: &str = r#"
model = "chua"

[static_stage]
k = 5.0
v_min = -8.0
v_max = 8.0
m = 15
spacing = "chebyshev"
settle_time = 100.0
n_avg = 1000
bases = [{ kind = "hinge_pos", param = 1 }, { kind = "hinge_neg", param = 1 }]

[dynamic_stage]
k = 5.0
period = 100.0
f_max = 20.0
rms = 2.0
realizations = 5
periods = 2
n_poles = 3
n_zeros = 2
mode = "sampled"

[validation]
kind = "attractor"

[memory]
k = 5.0

[simulate]
x0 = [0.0, 0.0, 0.05]
duration = 200.0
"#;

const PAPER: &str = r#"
[static_stage]
settle_time = 100.0
m = 30
n_avg = 10000

[dynamic_stage]
period = 500.0
f_max = 100.0
realizations = 5
"#;

/// Built-in model by name or an inline `{ g, h }` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Named(String),
    Inline { g: RationalTF, h: StaticNL },
}

impl ModelSpec {
    pub fn build(&self) -> Result<LureModel> {
        match self {
            ModelSpec::Named(name) => LureModel::builtin(name),
            ModelSpec::Inline { g, h } => LureModel::new(g.clone(), h.clone()),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            ModelSpec::Named(name) => name,
            ModelSpec::Inline { .. } => "inline",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaticSection {
    pub k: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub m: usize,
    pub spacing: crate::excitation::Spacing,
    pub settle_time: f64,
    pub n_avg: usize,
    pub bases: Vec<BasisFn>,
}

impl StaticSection {
    pub fn grid(&self) -> GridSpec {
        GridSpec {
            v_min: self.v_min,
            v_max: self.v_max,
            m: self.m,
            spacing: self.spacing,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicSection {
    pub k: f64,
    pub period: f64,
    pub f_max: f64,
    /// Reference RMS; sets the per-line amplitude.
    pub rms: f64,
    pub realizations: usize,
    pub periods: usize,
    pub n_poles: usize,
    pub n_zeros: usize,
    pub mode: ControlMode,
}

/// Open-loop replay with output comparison, or autonomous attractor runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationKind {
    Replay,
    Attractor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationSection {
    pub kind: ValidationKind,
    /// Discarded start of each replay run, seconds.
    pub warmup: f64,
    pub duration: f64,
    pub input_mean: f64,
    pub input_rms: f64,
    pub input_f_max: f64,
    pub spike_threshold: f64,
    pub min_separation: f64,
    pub attractor_duration: f64,
    pub attractor_ts: f64,
    pub x0: Vec<f64>,
    pub seeds: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemorySection {
    pub k: f64,
    pub t1: f64,
    pub t2: f64,
    pub amplitude: f64,
    pub eta: Vec<f64>,
    pub probes: Vec<f64>,
    pub epsilon: f64,
    pub ts: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulateSection {
    /// `"open"` or `"linear"`.
    pub controller: String,
    /// `"constant"`, `"pulse"` or `"multisine"`.
    pub input: String,
    pub level: f64,
    pub duration: f64,
    #[serde(default)]
    pub k: Option<f64>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub model: ModelSpec,
    pub seed: u64,
    pub sigma: f64,
    pub ts: f64,
    /// Worker threads; zero uses every available core.
    pub workers: usize,
    pub output_dir: PathBuf,
    pub static_stage: StaticSection,
    pub dynamic_stage: DynamicSection,
    pub validation: ValidationSection,
    pub memory: MemorySection,
    pub simulate: SimulateSection,
}

/// Overrides applied after the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub sigma: Option<f64>,
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

fn parse(text: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>().map_err(|e| Error::Config(e.to_string()))
}

/// Recursive table merge; `over` wins on conflicts.
pub fn deep_merge(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => deep_merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// TOML table of a named preset.
pub fn preset_table(name: &str) -> Result<toml::Table> {
    let (model, paper) = match name {
        "desk-fhn" => (FHN, false),
        "desk-chua" => (CHUA, false),
        "paper-fhn" => (FHN, true),
        "paper-chua" => (CHUA, true),
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    let mut t = parse(COMMON)?;
    deep_merge(&mut t, parse(model)?);
    if paper {
        deep_merge(&mut t, parse(PAPER)?);
    }
    t.insert("preset".into(), toml::Value::String(name.into()));
    Ok(t)
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        Self::from_table(preset_table(name)?)
    }

    /// Merge `text` over its `preset` key (or `default_preset`).
    pub fn from_toml(text: &str, default_preset: Option<&str>) -> Result<Self> {
        let user = parse(text)?;
        let name = user
            .get("preset")
            .and_then(|v| v.as_str())
            .map(str::to_owned)
            .or_else(|| default_preset.map(str::to_owned));
        let mut table = match name {
            Some(n) => preset_table(&n)?,
            None => toml::Table::new(),
        };
        deep_merge(&mut table, user);
        Self::from_table(table)
    }

    pub fn load(path: &Path, default_preset: Option<&str>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, default_preset)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(mut self, o: &Overrides) -> Result<Self> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(s) = o.sigma {
            self.sigma = s;
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ts > 0.0) || !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::Config("ts must be positive and sigma nonnegative".into()));
        }
        if self.memory.eta.is_empty() || self.memory.probes.is_empty() {
            return Err(Error::Config("memory test needs eta and probe lists".into()));
        }
        if self.dynamic_stage.realizations == 0 {
            return Err(Error::Config("dynamic stage needs at least one realization".into()));
        }
        Ok(())
    }

    /// Multisine settings of the dynamic stage, scaled to the requested RMS.
    pub fn multisine_spec(&self) -> Result<MultisineSpec> {
        let d = &self.dynamic_stage;
        MultisineSpec {
            period: d.period,
            ts: self.ts,
            f_max: d.f_max,
            u_bar: 1.0,
            seed: self.seed,
            periods: d.periods,
        }
        .with_rms(d.rms)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}
