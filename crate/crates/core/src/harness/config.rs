use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::degrade::OperatorKind;
use crate::error::{Error, Result};
use crate::fmtrain::{DataSource, ModelConfig, TrainConfig};
use crate::schedule::{GammaPolicy, HPolicy, Schedule, ScheduleKind};
use crate::solver::{InitMode, SolverConfig};

/// The five restoration tasks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Denoise,
    Deblur,
    SuperResolution,
    RandomInpainting,
    BoxInpainting,
}

impl Task {
    pub const ALL: [Task; 5] = [
        Task::Denoise,
        Task::Deblur,
        Task::SuperResolution,
        Task::RandomInpainting,
        Task::BoxInpainting,
    ];

    pub fn default_operator(self) -> OperatorKind {
        match self {
            Task::Denoise => OperatorKind::IdentityNoise,
            Task::Deblur => OperatorKind::gaussian_blur(),
            Task::SuperResolution => OperatorKind::Downsample { factor: 2 },
            Task::RandomInpainting => OperatorKind::RandomMask {
                drop_ratio: 0.7,
                seed: 0,
            },
            Task::BoxInpainting => OperatorKind::BoxMask { area_fraction: 1.0 / 16.0 },
        }
    }

    pub fn default_noise_std(self) -> f64 {
        match self {
            Task::Denoise => 0.1,
            Task::RandomInpainting => 0.01,
            _ => 0.05,
        }
    }

    /// The constant gradient step of the reference hyper-parameter table.
    pub fn table_gamma(self) -> f64 {
        match self {
            Task::Denoise => 0.004,
            Task::Deblur => 0.003,
            Task::SuperResolution => 0.002,
            Task::RandomInpainting => 0.0002,
            Task::BoxInpainting => 0.0012,
        }
    }

    /// Checks that an operator family fits the task.
    fn accepts(self, op: &OperatorKind) -> bool {
        matches!(
            (self, op),
            (Task::Denoise, OperatorKind::IdentityNoise)
                | (Task::Deblur, OperatorKind::GaussianBlur { .. })
                | (Task::SuperResolution, OperatorKind::Downsample { .. })
                | (Task::RandomInpainting, OperatorKind::RandomMask { .. })
                | (Task::BoxInpainting, OperatorKind::BoxMask { .. })
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaRule {
    /// `gamma_k = 1 - l_k`.
    OneMinusL,
    /// The task's table value, held constant.
    Table,
}

/// `gamma = "one-minus-l"`, `gamma = "table"` or a number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSpec {
    Rule(GammaRule),
    Value(f64),
}

/// How `h` enters the iteration relative to the warm-up index `K`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HShape {
    #[default]
    Constant,
    /// Linear ramp from 0 at `k = 0` to `h` at `k = K`.
    Ramp,
    /// Zero before `K`, `h` from then on.
    AfterWarmup,
}

fn default_schedule() -> ScheduleKind {
    ScheduleKind::Geometric { lambda: 0.965, n: 100 }
}
fn default_gamma() -> GammaSpec {
    GammaSpec::Rule(GammaRule::Table)
}
fn default_h() -> f64 {
    0.5
}
fn default_warmup() -> usize {
    80
}
fn default_cap() -> f64 {
    0.95
}
fn default_draws() -> usize {
    1
}

/// Iteration settings; the defaults follow the reference table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_schedule")]
    pub schedule: ScheduleKind,
    #[serde(default = "default_gamma")]
    pub gamma: GammaSpec,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default)]
    pub h_shape: HShape,
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    #[serde(default = "default_cap")]
    pub max_extrapolation: f64,
    #[serde(default)]
    pub unsafe_h: bool,
    #[serde(default = "default_draws")]
    pub noise_draws: usize,
    #[serde(default)]
    pub init: InitMode,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            schedule: default_schedule(),
            gamma: default_gamma(),
            h: default_h(),
            h_shape: HShape::default(),
            warmup: default_warmup(),
            max_extrapolation: default_cap(),
            unsafe_h: false,
            noise_draws: default_draws(),
            init: InitMode::default(),
        }
    }
}

impl SolverSection {
    pub fn schedule_for(&self, task: Task) -> Result<Schedule> {
        let gamma = match self.gamma {
            GammaSpec::Rule(GammaRule::OneMinusL) => GammaPolicy::OneMinusL,
            GammaSpec::Rule(GammaRule::Table) => GammaPolicy::Constant(task.table_gamma()),
            GammaSpec::Value(g) => GammaPolicy::Constant(g),
        };
        let h = match self.h_shape {
            HShape::Constant => HPolicy::Constant(self.h),
            HShape::Ramp => HPolicy::Ramp {
                h: self.h,
                over: self.warmup,
            },
            HShape::AfterWarmup => HPolicy::After {
                h: self.h,
                from: self.warmup,
            },
        };
        Schedule::new(self.schedule, gamma, h)
    }

    /// The solver configuration of one run.
    pub fn build(&self, task: Task, seed: u64) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            schedule: self.schedule_for(task)?,
            warmup: self.warmup,
            max_extrapolation: self.max_extrapolation,
            unsafe_h: self.unsafe_h,
            noise_draws: self.noise_draws,
            seed,
            init: self.init,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Which vector field drives the restoration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    /// A trained network saved by `train`.
    Checkpoint { path: PathBuf },
    /// The closed-form field of the data source, where one exists.
    Exact,
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}
fn one() -> usize {
    1
}

/// A complete experiment, as read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    /// Observation noise; the task default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Test images per seed.
    #[serde(default = "one")]
    pub images: usize,
    #[serde(default)]
    pub out_dir: PathBuf,
    pub data: DataSource,
    /// The task default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorKind>,
    pub field: FieldSpec,
    #[serde(default)]
    pub solver: SolverSection,
    /// Architecture for `train` and the Lipschitz ablation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
}

impl ExperimentConfig {
    pub fn new(task: Task, data: DataSource, field: FieldSpec) -> Self {
        Self {
            task,
            noise_std: None,
            seeds: default_seeds(),
            images: 1,
            out_dir: PathBuf::new(),
            data,
            operator: None,
            field,
            solver: SolverSection::default(),
            model: None,
            train: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn operator_kind(&self) -> OperatorKind {
        self.operator.clone().unwrap_or_else(|| self.task.default_operator())
    }

    pub fn noise(&self) -> f64 {
        self.noise_std.unwrap_or_else(|| self.task.default_noise_std())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.images == 0 {
            return Err(Error::Config("images must be positive".into()));
        }
        let noise = self.noise();
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(Error::Config(format!("noise_std must be non-negative, got {noise}")));
        }
        let op = self.operator_kind();
        if !self.task.accepts(&op) {
            return Err(Error::Config(format!("operator {op:?} does not fit task {:?}", self.task)));
        }
        self.solver.build(self.task, 0)?;
        if let Some(train) = &self.train {
            train.validate()?;
        }
        Ok(())
    }

    /// The configuration with every default made explicit and the output
    /// directory cleared: equal for configs that run the same experiment.
    pub fn canonical(&self) -> Self {
        let mut c = self.clone();
        c.noise_std = Some(self.noise());
        c.operator = Some(self.operator_kind());
        c.out_dir = PathBuf::new();
        if let GammaSpec::Rule(GammaRule::Table) = c.solver.gamma {
            c.solver.gamma = GammaSpec::Value(self.task.table_gamma());
        }
        c
    }

    /// SHA-256 of the canonical form, as lowercase hex. Layout, key order,
    /// spelled-out defaults and `out_dir` do not change it.
    pub fn hash(&self) -> String {
        let text = toml::to_string(&self.canonical()).expect("configs always serialize");
        let digest = Sha256::digest(text.as_bytes());
        let mut out = String::with_capacity(64);
        for b in digest {
            let _ = write!(out, "{b:02x}");
        }
        out
    }
}
