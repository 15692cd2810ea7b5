//! Flat `key = value` experiment files.
//!
//! Blank lines and `#` comments are ignored. Lists are comma separated.
//! Unknown or repeated keys are rejected so typos fail loudly.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nc_core::optim::{LrSchedule, OptimizerConfig, OptimizerKind, ScheduleKind};
use serde::Serialize;

use crate::error::{HarnessError, Result};

const EXPERIMENT_KEYS: &[&str] = &[
    "model.kind",
    "model.hidden_sizes",
    "model.w_init",
    "data.k",
    "data.d",
    "data.per_class",
    "data.seed",
    "data.margin",
    "optimizer.kind",
    "optimizer.lr",
    "optimizer.momentum",
    "optimizer.beta2",
    "optimizer.eps",
    "optimizer.weight_decay",
    "optimizer.coupled_wd",
    "optimizer.decoupled_wd",
    "optimizer.schedule",
    "optimizer.milestone_fractions",
    "optimizer.decay_factor",
    "optimizer.shrink_factor",
    "epochs",
    "batch_size",
    "seed",
    "metric_period",
    "output",
];

const SWEEP_KEYS: &[&str] = &[
    "sweep.lr",
    "sweep.momentum",
    "sweep.weight_decay",
    "sweep.optimizers",
    "sweep.accuracy_threshold",
    "sweep.seeds",
    "sweep.output_dir",
];

/// Parsed but uninterpreted entries, keyed by name with their line numbers.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| HarnessError::Config {
                line: line_no,
                msg: format!("expected key = value, got {content:?}"),
            })?;
            let key = key.trim();
            if !EXPERIMENT_KEYS.contains(&key) && !SWEEP_KEYS.contains(&key) {
                return Err(HarnessError::Config {
                    line: line_no,
                    msg: format!("unknown key {key:?}"),
                });
            }
            if entries
                .insert(key.to_string(), (line_no, value.trim().to_string()))
                .is_some()
            {
                return Err(HarnessError::Config {
                    line: line_no,
                    msg: format!("duplicate key {key:?}"),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|e| HarnessError::Config {
                line: *line,
                msg: format!("{key}: {e}"),
            }),
        }
    }

    fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: fmt::Display,
    {
        let Some((line, v)) = self.entries.get(key) else {
            return Ok(None);
        };
        if v.is_empty() {
            return Ok(Some(Vec::new()));
        }
        v.split(',')
            .map(|item| {
                item.trim().parse().map_err(|e| HarnessError::Config {
                    line: *line,
                    msg: format!("{key}: {e}"),
                })
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Trainable features.
    Ufm,
    /// `H = M*` frozen with `P = N = K`.
    UfmFixedFeatures,
    Mlp,
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ufm" => Ok(Self::Ufm),
            "ufm_fixed_features" => Ok(Self::UfmFixedFeatures),
            "mlp" => Ok(Self::Mlp),
            other => Err(format!("unknown model kind {other:?}")),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ufm => "ufm",
            Self::UfmFixedFeatures => "ufm_fixed_features",
            Self::Mlp => "mlp",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightInit {
    Random,
    Zero,
}

impl FromStr for WeightInit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(Self::Random),
            "zero" => Ok(Self::Zero),
            other => Err(format!("unknown w_init {other:?}")),
        }
    }
}

impl fmt::Display for WeightInit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Random => "random",
            Self::Zero => "zero",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Hidden widths of the MLP backbone; ignored by the UFM kinds.
    pub hidden_sizes: Vec<usize>,
    /// Last-layer initialization. Defaults to zero for the fixed-feature UFM,
    /// random otherwise.
    pub w_init: WeightInit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataSpec {
    pub k: usize,
    /// Input dimension for the MLP, feature dimension `P` for the trainable UFM.
    pub d: usize,
    pub per_class: usize,
    pub seed: u64,
    pub margin: f64,
}

impl DataSpec {
    pub fn num_samples(&self, kind: ModelKind) -> usize {
        match kind {
            ModelKind::UfmFixedFeatures => self.k,
            _ => self.k * self.per_class,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub data: DataSpec,
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    /// `None` means full batch.
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub metric_period: usize,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    /// Desk-scale defaults: four classes of 25 blobs in eight dimensions, a
    /// 16×16 MLP, 500 full-batch epochs.
    fn default() -> Self {
        Self {
            model: ModelSpec {
                kind: ModelKind::Mlp,
                hidden_sizes: vec![16, 16],
                w_init: WeightInit::Random,
            },
            data: DataSpec {
                k: 4,
                d: 8,
                per_class: 25,
                seed: 0,
                margin: 1.0,
            },
            optimizer: OptimizerConfig::new(OptimizerKind::SgdCoupled, 0.05, 0.0),
            epochs: 500,
            batch_size: None,
            seed: 0,
            metric_period: 1,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_raw(&RawConfig::parse(text)?)
    }

    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let mut c = Self::default();
        if let Some(kind) = raw.get("model.kind")? {
            c.model.kind = kind;
        }
        if let Some(h) = raw.get_list("model.hidden_sizes")? {
            c.model.hidden_sizes = h;
        }
        c.model.w_init = match raw.get("model.w_init")? {
            Some(w) => w,
            None if c.model.kind == ModelKind::UfmFixedFeatures => WeightInit::Zero,
            None => WeightInit::Random,
        };
        if let Some(v) = raw.get("data.k")? {
            c.data.k = v;
        }
        if let Some(v) = raw.get("data.d")? {
            c.data.d = v;
        }
        if let Some(v) = raw.get("data.per_class")? {
            c.data.per_class = v;
        }
        if let Some(v) = raw.get("data.seed")? {
            c.data.seed = v;
        }
        if let Some(v) = raw.get("data.margin")? {
            c.data.margin = v;
        }

        c.optimizer = optimizer_from_raw(raw)?;

        if let Some(v) = raw.get("epochs")? {
            c.epochs = v;
        }
        if let Some(v) = raw.get::<String>("batch_size")? {
            c.batch_size = match v.as_str() {
                "full" | "0" => None,
                n => Some(n.parse().map_err(|e| {
                    HarnessError::invalid(format!("batch_size {n:?}: {e}"))
                })?),
            };
        }
        if let Some(v) = raw.get("seed")? {
            c.seed = v;
        }
        if let Some(v) = raw.get("metric_period")? {
            c.metric_period = v;
        }
        if let Some(v) = raw.get::<String>("output")? {
            c.output = Some(PathBuf::from(v));
        }
        c.validate()?;
        Ok(c)
    }

    pub fn num_samples(&self) -> usize {
        self.data.num_samples(self.model.kind)
    }

    /// Full batch size when `batch_size` is unset.
    pub fn effective_batch_size(&self) -> usize {
        self.batch_size.unwrap_or_else(|| self.num_samples())
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(HarnessError::invalid("epochs must be at least 1"));
        }
        if self.metric_period == 0 {
            return Err(HarnessError::invalid("metric_period must be at least 1"));
        }
        if self.data.k < 2 {
            return Err(HarnessError::invalid("data.k must be at least 2"));
        }
        if self.model.kind != ModelKind::UfmFixedFeatures && self.data.per_class == 0 {
            return Err(HarnessError::invalid("data.per_class must be at least 1"));
        }
        if self.model.kind != ModelKind::UfmFixedFeatures && self.data.d == 0 {
            return Err(HarnessError::invalid("data.d must be at least 1"));
        }
        match self.batch_size {
            Some(0) => return Err(HarnessError::invalid("batch_size must be positive")),
            Some(b) if b > self.num_samples() => {
                return Err(HarnessError::invalid(format!(
                    "batch_size {b} exceeds the {} training samples",
                    self.num_samples()
                )))
            }
            _ => {}
        }
        self.optimizer.validate()?;
        Ok(())
    }

    /// The config as a key-value file that [`ExperimentConfig::parse`] reads back.
    pub fn to_text(&self) -> String {
        let o = &self.optimizer;
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let mut lines = vec![
            format!("model.kind = {}", self.model.kind),
            format!(
                "model.hidden_sizes = {}",
                self.model
                    .hidden_sizes
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join(",")
            ),
            format!("model.w_init = {}", self.model.w_init),
            format!("data.k = {}", self.data.k),
            format!("data.d = {}", self.data.d),
            format!("data.per_class = {}", self.data.per_class),
            format!("data.seed = {}", self.data.seed),
            format!("data.margin = {}", self.data.margin),
            format!("optimizer.kind = {}", o.kind),
            format!("optimizer.lr = {}", o.learning_rate),
            format!("optimizer.momentum = {}", o.momentum),
            format!("optimizer.beta2 = {}", o.beta2),
            format!("optimizer.eps = {}", o.epsilon),
            format!("optimizer.coupled_wd = {}", o.coupled_wd),
            format!("optimizer.decoupled_wd = {}", o.decoupled_wd),
            format!("optimizer.schedule = {}", o.schedule.kind),
            format!(
                "optimizer.milestone_fractions = {}",
                join(&o.schedule.milestone_fractions)
            ),
            format!("optimizer.decay_factor = {}", o.schedule.decay_factor),
            format!("optimizer.shrink_factor = {}", o.schedule.shrink_factor),
            format!("epochs = {}", self.epochs),
            format!(
                "batch_size = {}",
                self.batch_size.map_or("full".to_string(), |b| b.to_string())
            ),
            format!("seed = {}", self.seed),
            format!("metric_period = {}", self.metric_period),
        ];
        if let Some(p) = &self.output {
            lines.push(format!("output = {}", p.display()));
        }
        lines.join("\n") + "\n"
    }
}

fn optimizer_from_raw(raw: &RawConfig) -> Result<OptimizerConfig> {
    let kind: OptimizerKind = raw
        .get::<String>("optimizer.kind")?
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(OptimizerKind::SgdCoupled);
    let lr = raw.get("optimizer.lr")?.unwrap_or(0.05);
    let wd = raw.get("optimizer.weight_decay")?.unwrap_or(0.0);
    let mut o = OptimizerConfig::new(kind, lr, wd);
    if let Some(v) = raw.get("optimizer.momentum")? {
        o.momentum = v;
    }
    if let Some(v) = raw.get("optimizer.beta2")? {
        o.beta2 = v;
    }
    if let Some(v) = raw.get("optimizer.eps")? {
        o.epsilon = v;
    }
    if let Some(v) = raw.get("optimizer.coupled_wd")? {
        o.coupled_wd = v;
    }
    if let Some(v) = raw.get("optimizer.decoupled_wd")? {
        o.decoupled_wd = v;
    }
    let mut schedule = match raw.get::<String>("optimizer.schedule")? {
        Some(s) => match s.parse::<ScheduleKind>()? {
            ScheduleKind::Constant => LrSchedule::constant(),
            ScheduleKind::StepDecay => LrSchedule::step_decay(),
            ScheduleKind::OscillationDecay => LrSchedule::oscillation_decay(0.5),
        },
        None => LrSchedule::constant(),
    };
    if let Some(v) = raw.get_list("optimizer.milestone_fractions")? {
        schedule.milestone_fractions = v;
    }
    if let Some(v) = raw.get("optimizer.decay_factor")? {
        schedule.decay_factor = v;
    }
    if let Some(v) = raw.get("optimizer.shrink_factor")? {
        schedule.shrink_factor = v;
    }
    o.schedule = schedule;
    Ok(o)
}

/// How sweep runs choose their seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedMode {
    /// Every grid point reuses the base seeds, so runs differ only in their
    /// hyperparameters.
    Shared,
    /// Seeds mixed from the base seed and the grid coordinates.
    Derived,
}

impl FromStr for SeedMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "shared" => Ok(Self::Shared),
            "derived" => Ok(Self::Derived),
            other => Err(format!("unknown seed mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub base: ExperimentConfig,
    pub learning_rates: Vec<f64>,
    pub momenta: Vec<f64>,
    pub weight_decays: Vec<f64>,
    pub optimizers: Vec<OptimizerKind>,
    /// Runs below this final training accuracy are left out of summaries.
    pub accuracy_threshold: f64,
    pub seed_mode: SeedMode,
    pub output_dir: Option<PathBuf>,
}

impl SweepSpec {
    /// A 1×1×1×1 grid at the base config's own hyperparameters.
    pub fn single(base: ExperimentConfig) -> Self {
        let o = &base.optimizer;
        Self {
            learning_rates: vec![o.learning_rate],
            momenta: vec![o.momentum],
            weight_decays: vec![o.total_weight_decay()],
            optimizers: vec![o.kind],
            accuracy_threshold: 0.99,
            seed_mode: SeedMode::Shared,
            output_dir: None,
            base,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw = RawConfig::parse(text)?;
        let base = ExperimentConfig::from_raw(&raw)?;
        let mut spec = Self::single(base);
        if let Some(v) = raw.get_list("sweep.lr")? {
            spec.learning_rates = v;
        }
        if let Some(v) = raw.get_list("sweep.momentum")? {
            spec.momenta = v;
        }
        if let Some(v) = raw.get_list("sweep.weight_decay")? {
            spec.weight_decays = v;
        }
        if let Some(v) = raw.get_list::<String>("sweep.optimizers")? {
            spec.optimizers = v
                .iter()
                .map(|s| s.parse())
                .collect::<nc_core::Result<Vec<_>>>()?;
        }
        if let Some(v) = raw.get("sweep.accuracy_threshold")? {
            spec.accuracy_threshold = v;
        }
        if let Some(v) = raw.get("sweep.seeds")? {
            spec.seed_mode = v;
        }
        if let Some(v) = raw.get::<String>("sweep.output_dir")? {
            spec.output_dir = Some(PathBuf::from(v));
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.learning_rates.is_empty()
            || self.momenta.is_empty()
            || self.weight_decays.is_empty()
            || self.optimizers.is_empty()
        {
            return Err(HarnessError::invalid("every sweep grid needs at least one value"));
        }
        if !(0.0..=1.0).contains(&self.accuracy_threshold) {
            return Err(HarnessError::invalid("accuracy_threshold must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn num_runs(&self) -> usize {
        self.learning_rates.len() * self.momenta.len() * self.weight_decays.len() * self.optimizers.len()
    }
}
