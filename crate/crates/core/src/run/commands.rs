use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, FORMAT};
use super::{config_hash, io_err, thread_count, Dataset, RunConfig, RunError};
use crate::complex::io::load_complex;
use crate::features::{build_feature_matrix, column_names, to_csv};
use crate::model::{EpochMetrics, Trainer};
use crate::nn::OptimizerState;
use crate::walk::{sample_walk_set, sample_walk_sets, AdjacencyMode, WalkCount};

/// Loads and closure-checks a complex; reports counts and boundary densities.
pub fn validate_complex(path: &Path, auto_close: bool) -> Result<String, RunError> {
    let c = load_complex(path, auto_close)?;
    c.validate()?;
    let counts: Vec<String> = c.counts().iter().enumerate().map(|(k, n)| format!("n_{k}={n}")).collect();
    let mut report = format!("{}, closure OK\n", counts.join(" "));
    for k in 1..=c.max_order() {
        let b = c.boundary(k);
        writeln!(report, "B_{k}: {}x{} nnz={} density={:.4}", b.rows(), b.cols(), b.nnz(), b.density()).unwrap();
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub log: Vec<EpochMetrics>,
    pub final_loss: f64,
    pub final_metric: f64,
    pub checkpoint: Checkpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub config: RunConfig,
    pub config_hash: String,
    pub task: String,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    pub epochs: Vec<usize>,
    pub final_losses: Vec<f64>,
    /// Validation metric of each trial after training.
    pub final_metrics: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (0 for a single trial).
    pub std: f64,
}

pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Trains one trial in memory.
pub fn train_trial(
    cfg: &RunConfig,
    data: &Dataset,
    hash: &str,
    trial: usize,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrialResult, RunError> {
    let seed = cfg.train.trial_seed(trial);
    let task = data.task(&cfg.task, seed)?;
    let mut trainer = Trainer::new(&data.complex, &task, &cfg.model, &cfg.train.trainer_config(), seed)?;
    let log = trainer.run(|m| {
        if m.epoch % 25 == 0 || m.stop {
            log::info!(
                "trial {trial} epoch {} train_loss {:.4} val_loss {:.4} val_metric {:.4} lr {:.2e}",
                m.epoch,
                m.train_loss,
                m.val_loss,
                m.val_metric,
                m.lr
            );
        }
        on_epoch(m)
    })?;
    let eval_seed = trainer.epoch_seed(trainer.epoch);
    let (final_loss, final_metric) = trainer.evaluate(None, None, eval_seed)?;
    let checkpoint = Checkpoint {
        format: FORMAT.into(),
        config: cfg.clone(),
        config_hash: hash.into(),
        trial,
        seed,
        epochs: trainer.epoch,
        eval_seed,
        final_loss,
        final_metric,
        params: Checkpoint::tensors(&trainer.store),
        optimizer: OptimizerState::capture(&trainer.adam, &trainer.schedule),
    };
    Ok(TrialResult {
        trial,
        seed,
        log,
        final_loss,
        final_metric,
        checkpoint,
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), RunError> {
    std::fs::write(path, text).map_err(io_err(path))
}

fn header(cfg: &RunConfig, hash: &str, seeds: &[u64]) -> String {
    let seeds: Vec<String> = seeds.iter().map(u64::to_string).collect();
    format!(
        "# config: {}\n# config_hash: {hash}\n# master_seed: {} trial_seeds: {}\n",
        cfg.to_json_line(),
        cfg.train.seed,
        seeds.join(" ")
    )
}

/// Runs every trial and writes `metrics.csv`, `checkpoint-<trial>.json` and
/// `summary.json` into `cfg.out`.
pub fn train(cfg: &RunConfig) -> Result<TrainSummary, RunError> {
    cfg.validate()?;
    let data = Dataset::load(&cfg.dataset)?;
    let hash = config_hash(cfg, &data);
    // Fail on task errors before any training starts.
    data.task(&cfg.task, cfg.train.seed)?;
    std::fs::create_dir_all(&cfg.out).map_err(io_err(&cfg.out))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(cfg.train.strict_determinism))
        .build()
        .map_err(|e| RunError::Runtime(e.to_string()))?;
    let results: Vec<TrialResult> = pool.install(|| {
        (0..cfg.train.repeats)
            .into_par_iter()
            .map(|i| train_trial(cfg, &data, &hash, i, |_| {}))
            .collect::<Result<_, _>>()
    })?;

    let seeds: Vec<u64> = results.iter().map(|r| r.seed).collect();
    let mut csv = header(cfg, &hash, &seeds);
    csv.push_str("trial,seed,epoch,train_loss,train_metric,val_loss,val_metric,lr\n");
    for r in &results {
        for m in &r.log {
            writeln!(
                csv,
                "{},{},{},{},{},{},{},{}",
                r.trial, r.seed, m.epoch, m.train_loss, m.train_metric, m.val_loss, m.val_metric, m.lr
            )
            .unwrap();
        }
    }
    write_file(&cfg.out.join("metrics.csv"), &csv)?;
    for r in &results {
        r.checkpoint.save(&cfg.out.join(format!("checkpoint-{}.json", r.trial)))?;
    }

    let final_metrics: Vec<f64> = results.iter().map(|r| r.final_metric).collect();
    let (mean, std) = mean_std(&final_metrics);
    let task = match cfg.task.kind {
        super::TaskKind::Classification => "classification",
        super::TaskKind::Imputation => "imputation",
    };
    let summary = TrainSummary {
        config: cfg.clone(),
        config_hash: hash,
        task: task.into(),
        master_seed: cfg.train.seed,
        seeds,
        epochs: results.iter().map(|r| r.log.len()).collect(),
        final_losses: results.iter().map(|r| r.final_loss).collect(),
        final_metrics,
        mean,
        std,
    };
    write_file(&cfg.out.join("summary.json"), &serde_json::to_string_pretty(&summary).expect("serializable"))?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub checkpoint: PathBuf,
    pub config_hash: String,
    pub seed: u64,
    pub walks: String,
    pub walk_length: usize,
    pub loss: f64,
    pub metric: f64,
}

/// Re-evaluates a checkpoint, optionally on another dataset config and with
/// a different walk count, walk length or walk seed.
pub fn evaluate(
    path: &Path,
    dataset: Option<&super::DatasetConfig>,
    walks: Option<WalkCount>,
    walk_length: Option<usize>,
    seed: Option<u64>,
) -> Result<EvalReport, RunError> {
    let ck = Checkpoint::load(path)?;
    let mut cfg = ck.config.clone();
    if let Some(d) = dataset {
        cfg.dataset = d.clone();
    }
    let data = Dataset::load(&cfg.dataset)?;
    let found = config_hash(&cfg, &data);
    if found != ck.config_hash {
        return Err(RunError::ConfigHashMismatch {
            expected: ck.config_hash.clone(),
            found,
        });
    }
    let task = data.task(&cfg.task, ck.seed)?;
    let mut trainer = Trainer::new(&data.complex, &task, &cfg.model, &cfg.train.trainer_config(), ck.seed)?;
    ck.restore(&mut trainer.store)?;
    let seed = seed.unwrap_or(ck.eval_seed);
    let (loss, metric) = trainer.evaluate(walks, walk_length, seed)?;
    Ok(EvalReport {
        checkpoint: path.to_path_buf(),
        config_hash: ck.config_hash,
        seed,
        walks: walks.map_or(cfg.model.walks.clone(), super::walk_count_key),
        walk_length: walk_length.unwrap_or(cfg.model.walk_length),
        loss,
        metric,
    })
}

/// Walks of one epoch in the `dump-walks` line format; `order` limits the
/// output to one order.
pub fn dump_walks(cfg: &RunConfig, order: Option<usize>, seed: u64) -> Result<Vec<String>, RunError> {
    cfg.model.validate()?;
    let data = Dataset::load(&cfg.dataset)?;
    let m = &cfg.model;
    let count = m.walk_count()?;
    let lines = match order {
        Some(k) => sample_walk_set(&data.complex, k, count, m.walk_length, m.walk_params(), seed)
            .map_err(crate::model::ModelError::from)?
            .iter()
            .map(|w| w.to_line())
            .collect(),
        None => {
            let top = m.max_order.min(data.complex.max_order());
            sample_walk_sets(&data.complex, top, count, m.walk_length, m.walk_params(), seed)
                .map_err(crate::model::ModelError::from)?
                .to_lines()
        }
    };
    Ok(lines)
}

/// Writes one feature-matrix CSV per walk on `order`-simplices into `dir`
/// and returns the file paths. Uses the complex's own simplex features.
pub fn featurize(cfg: &RunConfig, order: usize, seed: u64, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    cfg.model.validate()?;
    let data = Dataset::load(&cfg.dataset)?;
    let c = &data.complex;
    if order > c.max_order() {
        return Err(RunError::Config(format!("order {order} exceeds the complex's top order {}", c.max_order())));
    }
    let m = &cfg.model;
    let walks = sample_walk_set(c, order, m.walk_count()?, m.walk_length, m.walk_params(), seed).map_err(crate::model::ModelError::from)?;
    let feats = |k: usize| c.features(k).cloned().unwrap_or_else(|| ndarray::Array2::zeros((c.count(k), 0)));
    let fk = feats(order);
    let ff = (order > 0).then(|| feats(order - 1));
    let fc = (order < c.max_order()).then(|| feats(order + 1));
    let names = column_names(
        fk.ncols(),
        ff.as_ref().map_or(0, |f| f.ncols()),
        fc.as_ref().map_or(0, |f| f.ncols()),
        m.window,
    );
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut paths = Vec::with_capacity(walks.len());
    for (j, w) in walks.iter().enumerate() {
        let fm = build_feature_matrix::<f64>(j, w, c, &fk, ff.as_ref(), fc.as_ref(), m.window).map_err(|e| RunError::Runtime(e.to_string()))?;
        let path = dir.join(format!("walk-k{order}-{j:05}.csv"));
        write_file(&path, &to_csv(&fm, &names))?;
        paths.push(path);
    }
    Ok(paths)
}

/// One hyperparameter swept with everything else held at the config values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sweep {
    Adjacency,
    Window(Vec<usize>),
    WalkLength(Vec<usize>),
}

impl Sweep {
    pub fn window() -> Self {
        Sweep::Window((1..=8).collect())
    }

    pub fn walk_length() -> Self {
        Sweep::WalkLength((5..=50).step_by(5).collect())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Sweep::Adjacency => "adjacency",
            Sweep::Window(_) => "window",
            Sweep::WalkLength(_) => "walk_length",
        }
    }

    /// Config of every sweep point, labelled by its value.
    pub fn points(&self, base: &RunConfig) -> Vec<(String, RunConfig)> {
        let mut out = Vec::new();
        match self {
            Sweep::Adjacency => {
                for mode in [AdjacencyMode::Both, AdjacencyMode::UpperOnly, AdjacencyMode::LowerOnly] {
                    let mut c = base.clone();
                    c.model.adjacency = mode;
                    out.push((mode.name().to_string(), c));
                }
            }
            Sweep::Window(values) => {
                for &s in values {
                    let mut c = base.clone();
                    c.model.window = s;
                    c.model.kernels.clear();
                    out.push((s.to_string(), c));
                }
            }
            Sweep::WalkLength(values) => {
                for &l in values {
                    let mut c = base.clone();
                    c.model.walk_length = l;
                    if c.model.receptive_field() > l {
                        let s = l.saturating_sub(1).max(1);
                        log::warn!("walk length {l} is shorter than the receptive field; window lowered from {} to {s}", c.model.window);
                        c.model.window = s;
                        c.model.kernels.clear();
                    }
                    out.push((l.to_string(), c));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub value: String,
    pub mean: f64,
    pub std: f64,
    pub metrics: Vec<f64>,
}

/// Trains every sweep point into `out/<sweep>-<value>` and writes
/// `out/ablation-<sweep>.csv`.
pub fn ablate(cfg: &RunConfig, sweep: &Sweep) -> Result<Vec<AblationRow>, RunError> {
    let points = sweep.points(cfg);
    for (_, c) in &points {
        c.validate()?;
    }
    let mut rows = Vec::with_capacity(points.len());
    for (value, mut c) in points {
        c.out = cfg.out.join(format!("{}-{value}", sweep.name()));
        log::info!("ablation {} = {value}", sweep.name());
        let s = train(&c)?;
        rows.push(AblationRow {
            value,
            mean: s.mean,
            std: s.std,
            metrics: s.final_metrics,
        });
    }
    let mut csv = format!("# config: {}\n# sweep: {}\n{},mean,std,n\n", cfg.to_json_line(), sweep.name(), sweep.name());
    for r in &rows {
        writeln!(csv, "{},{},{},{}", r.value, r.mean, r.std, r.metrics.len()).unwrap();
    }
    std::fs::create_dir_all(&cfg.out).map_err(io_err(&cfg.out))?;
    write_file(&cfg.out.join(format!("ablation-{}.csv", sweep.name())), &csv)?;
    Ok(rows)
}
