//! Run configuration, datasets and the commands behind the CLI.
//!
//! A run is described by one TOML file with the sections `[dataset]`,
//! `[task]`, `[model]` and `[train]` plus a top-level `out` directory:
//!
//! ```toml
//! out = "runs/contact"
//!
//! [dataset]
//! kind = "synth-contact"     # synth-contact | synth-citations | complex | contact-list | coauthorship
//! [dataset.contact]
//! n_vertices = 60
//!
//! [task]
//! kind = "classification"    # classification | imputation
//! missing_rate = 0.4
//! vertex_inputs = { kind = "train-labels", dropout = 0.25 }
//!
//! [model]
//! max_order = 1
//! walk_length = 50
//!
//! [train]
//! seed = 7
//! repeats = 5
//! ```
//!
//! Relative paths are resolved against the directory of the config file.
//! Trial `i` of a run uses seed `seed + i` for its mask, parameters and walks.

mod checkpoint;
mod commands;

pub use checkpoint::{Checkpoint, NamedTensor};
pub use commands::{
    ablate, dump_walks, evaluate, featurize, train, train_trial, validate_complex, AblationRow, EvalReport, Sweep, TrainSummary,
    TrialResult,
};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::io::{load_complex, write_complex_text, FormatError};
use crate::complex::{ComplexError, SimplicialComplex};
use crate::data::{
    load_coauthorship, load_contact_list, load_labels, load_value_csv, make_classification_task, make_imputation_task, synth_citations,
    synth_contact, CitationConfig, ContactConfig, DataError, Task, ValueTransform, VertexInputs,
};
use crate::model::{ModelConfig, ModelError, TrainConfig};
use crate::nn::PoolMode;
use crate::rng::fnv1a;
use crate::walk::{AdjacencyMode, SamplingStrategy, WalkCount};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Toml {
        path: String,
        #[source]
        source: toml::de::Error,
    },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error("checkpoint was trained with config hash {expected}, this dataset and config give {found}")]
    ConfigHashMismatch { expected: String, found: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Runtime(String),
}

impl RunError {
    /// Process exit code: 1 validation failure, 2 config error, 3 runtime failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Format(FormatError::Io { .. }) | RunError::Data(DataError::Format(FormatError::Io { .. })) => 2,
            RunError::Format(_) | RunError::Complex(_) => 1,
            RunError::Data(DataError::Format(_) | DataError::Complex(_) | DataError::EmptyDataset(_)) => 1,
            RunError::Config(_) | RunError::Toml { .. } | RunError::ConfigHashMismatch { .. } => 2,
            RunError::Data(_) | RunError::Model(ModelError::Config(_)) => 2,
            RunError::Model(_) | RunError::Io { .. } | RunError::Runtime(_) => 3,
        }
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    #[default]
    SynthContact,
    SynthCitations,
    /// A complex file (text or JSON) with optional label and value CSVs.
    Complex,
    ContactList,
    Coauthorship,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    pub path: Option<PathBuf>,
    /// `vertex,label` CSV for classification.
    pub labels: Option<PathBuf>,
    /// One `simplex,value` CSV per order, starting at order 0.
    pub values: Vec<PathBuf>,
    /// Add missing faces when loading a complex file.
    pub auto_close: bool,
    pub contact: ContactConfig,
    pub citations: CitationConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            kind: DatasetKind::SynthContact,
            path: None,
            labels: None,
            values: Vec::new(),
            auto_close: true,
            contact: ContactConfig::default(),
            citations: CitationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    #[default]
    Classification,
    Imputation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    pub kind: TaskKind,
    /// Fraction of labels hidden or values removed.
    pub missing_rate: f64,
    /// Hide the same share of every class instead of masking each vertex
    /// independently.
    pub stratified: bool,
    pub vertex_inputs: VertexInputs,
    pub transform: ValueTransform,
    pub input_dropout: f64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            kind: TaskKind::Classification,
            missing_rate: 0.4,
            stratified: false,
            vertex_inputs: VertexInputs::Featureless,
            transform: ValueTransform::Log1p,
            input_dropout: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub lr: f64,
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
    pub min_epochs: usize,
    pub max_epochs: usize,
    pub repeats: usize,
    /// Master seed; trial `i` uses `seed + i`.
    pub seed: u64,
    /// Run every trial on a single thread, one after the other.
    pub strict_determinism: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            lr: t.lr,
            factor: t.factor,
            patience: t.patience,
            min_lr: t.min_lr,
            min_epochs: t.min_epochs,
            max_epochs: t.max_epochs,
            repeats: 1,
            seed: 0,
            strict_determinism: false,
        }
    }
}

impl TrainSection {
    pub fn trainer_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            factor: self.factor,
            patience: self.patience,
            min_lr: self.min_lr,
            min_epochs: self.min_epochs,
            max_epochs: self.max_epochs,
        }
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.seed.wrapping_add(trial as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out: PathBuf,
    pub dataset: DatasetConfig,
    pub task: TaskConfig,
    pub model: ModelConfig,
    pub train: TrainSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out: PathBuf::from("runs/default"),
            dataset: DatasetConfig::default(),
            task: TaskConfig::default(),
            model: ModelConfig::default(),
            train: TrainSection::default(),
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, RunError> {
        toml::from_str(text).map_err(|source| RunError::Toml {
            path: path.display().to_string(),
            source,
        })
    }

    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        resolve(base, &mut cfg.out);
        if let Some(p) = cfg.dataset.path.as_mut() {
            resolve(base, p);
        }
        if let Some(p) = cfg.dataset.labels.as_mut() {
            resolve(base, p);
        }
        for p in &mut cfg.dataset.values {
            resolve(base, p);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Single-line JSON used in output headers.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("run config serializes")
    }

    /// Checks everything that can be checked without loading data.
    pub fn validate(&self) -> Result<(), RunError> {
        self.model.validate()?;
        self.train.trainer_config().validate()?;
        if self.train.repeats == 0 {
            return Err(RunError::Config("repeats must be at least 1".into()));
        }
        let t = &self.task;
        if !(t.missing_rate > 0.0 && t.missing_rate < 1.0) {
            return Err(RunError::Config(format!("missing_rate {} must lie in (0, 1)", t.missing_rate)));
        }
        if !(0.0..1.0).contains(&t.input_dropout) {
            return Err(RunError::Config(format!("input_dropout {} must lie in [0, 1)", t.input_dropout)));
        }
        if let VertexInputs::TrainLabels { dropout } = t.vertex_inputs {
            if !(0.0..1.0).contains(&dropout) {
                return Err(RunError::Config(format!("label dropout {dropout} must lie in [0, 1)")));
            }
        }
        let d = &self.dataset;
        let needs_path = matches!(d.kind, DatasetKind::Complex | DatasetKind::ContactList | DatasetKind::Coauthorship);
        let mut files: Vec<&PathBuf> = d.values.iter().chain(d.labels.iter()).collect();
        match (&d.path, needs_path) {
            (None, true) => return Err(RunError::Config(format!("dataset kind {:?} needs a path", d.kind))),
            (Some(p), true) => files.push(p),
            _ => {}
        }
        if let Some(missing) = files.iter().find(|p| !p.is_file()) {
            return Err(RunError::Config(format!("dataset file {} does not exist", missing.display())));
        }
        Ok(())
    }
}

/// Command-line overrides; `None` keeps the config value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub repeats: Option<usize>,
    pub walks: Option<WalkCount>,
    pub walk_length: Option<usize>,
    pub window: Option<usize>,
    pub strategy: Option<SamplingStrategy>,
    pub adjacency: Option<AdjacencyMode>,
    pub pool: Option<PoolMode>,
    pub min_epochs: Option<usize>,
    pub strict_determinism: bool,
    pub out: Option<PathBuf>,
}

pub fn walk_count_key(w: WalkCount) -> String {
    match w {
        WalkCount::All => "all".into(),
        WalkCount::Sampled(m) => m.to_string(),
    }
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.train.seed = s;
        }
        if let Some(r) = self.repeats {
            cfg.train.repeats = r;
        }
        if let Some(w) = self.walks {
            cfg.model.walks = walk_count_key(w);
        }
        if let Some(l) = self.walk_length {
            cfg.model.walk_length = l;
        }
        if let Some(s) = self.window {
            cfg.model.window = s;
        }
        if let Some(s) = self.strategy {
            cfg.model.strategy = s;
        }
        if let Some(a) = self.adjacency {
            cfg.model.adjacency = a;
        }
        if let Some(p) = self.pool {
            cfg.model.pool = p;
        }
        if let Some(m) = self.min_epochs {
            cfg.train.min_epochs = m;
        }
        if self.strict_determinism {
            cfg.train.strict_determinism = true;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
    }
}

/// A loaded complex with whatever targets its source provides.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub complex: SimplicialComplex,
    pub labels: Option<Vec<usize>>,
    pub values: Option<Vec<Vec<f64>>>,
}

impl Dataset {
    pub fn load(cfg: &DatasetConfig) -> Result<Self, RunError> {
        let path = || cfg.path.as_deref().ok_or_else(|| RunError::Config(format!("dataset kind {:?} needs a path", cfg.kind)));
        let (complex, mut labels, mut values) = match cfg.kind {
            DatasetKind::SynthContact => {
                let (c, l) = synth_contact(&cfg.contact)?;
                (c, Some(l), None)
            }
            DatasetKind::SynthCitations => {
                let (c, v, _) = synth_citations(&cfg.citations)?;
                (c, None, Some(v))
            }
            DatasetKind::Complex => (load_complex(path()?, cfg.auto_close)?, None, None),
            DatasetKind::ContactList => (load_contact_list(path()?)?, None, None),
            DatasetKind::Coauthorship => {
                let (c, v) = load_coauthorship(path()?)?;
                (c, None, Some(v))
            }
        };
        if let Some(p) = &cfg.labels {
            labels = Some(load_labels(&complex, p)?.0);
        }
        if !cfg.values.is_empty() {
            let v = cfg
                .values
                .iter()
                .enumerate()
                .map(|(k, p)| load_value_csv(&complex, k, p))
                .collect::<Result<Vec<_>, _>>()?;
            values = Some(v);
        }
        Ok(Self { complex, labels, values })
    }

    /// Hash of the complex and its targets.
    pub fn fingerprint(&self) -> u64 {
        let mut text = write_complex_text(&self.complex);
        if let Some(l) = &self.labels {
            text.push_str(&format!("labels {l:?}\n"));
        }
        if let Some(v) = &self.values {
            for (k, vals) in v.iter().enumerate() {
                let bits: Vec<u64> = vals.iter().map(|x| x.to_bits()).collect();
                text.push_str(&format!("values {k} {bits:?}\n"));
            }
        }
        fnv1a(text.as_bytes())
    }

    /// Builds the learning task of one trial.
    pub fn task(&self, cfg: &TaskConfig, seed: u64) -> Result<Task, RunError> {
        match cfg.kind {
            TaskKind::Classification => {
                let labels = self.labels.as_ref().ok_or_else(|| RunError::Config("classification needs vertex labels".into()))?;
                let mut t = make_classification_task(&self.complex, labels, cfg.missing_rate, seed, cfg.stratified)?;
                t.inputs = cfg.vertex_inputs;
                Ok(Task::Classification(t))
            }
            TaskKind::Imputation => {
                let values = self.values.as_ref().ok_or_else(|| RunError::Config("imputation needs simplex values".into()))?;
                let mut t = make_imputation_task(&self.complex, values, cfg.missing_rate, seed, cfg.transform)?;
                t.input_dropout = cfg.input_dropout;
                Ok(Task::Imputation(t))
            }
        }
    }
}

/// Hash tying a checkpoint to its data, task and architecture. Walk count and
/// walk length are left out since evaluation may change them.
pub fn config_hash(cfg: &RunConfig, data: &Dataset) -> String {
    let mut model = cfg.model.clone();
    model.walks = String::new();
    model.walk_length = 0;
    let text = format!(
        "{}|{}|{:016x}",
        serde_json::to_string(&model).expect("serializable"),
        serde_json::to_string(&cfg.task).expect("serializable"),
        data.fingerprint()
    );
    format!("{:016x}", fnv1a(text.as_bytes()))
}

/// Worker threads: 1 under strict determinism, else `SCRAWL_THREADS` or the
/// number of available cores.
pub fn thread_count(strict: bool) -> usize {
    if strict {
        return 1;
    }
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var("SCRAWL_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(n) if n > 0 => n,
        _ => cores,
    }
}
