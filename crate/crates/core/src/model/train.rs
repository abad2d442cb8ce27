//! Full-batch training with per-epoch walk sampling.

use ndarray::Array2;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{EpochBatch, ModelConfig, ModelError, ScrawlModel};
use crate::complex::SimplicialComplex;
use crate::data::{HeadTarget, Task, TaskView};
use crate::nn::{Adam, Graph, ParamStore, PlateauSchedule, Var};
use crate::rng::{self, domain};
use crate::walk::WalkCount;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
    pub min_epochs: usize,
    pub max_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            factor: 0.5,
            patience: 10,
            min_lr: 1e-6,
            min_epochs: 100,
            max_epochs: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(m.into()));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be finite and non-negative");
        }
        if !(self.factor > 0.0 && self.factor < 1.0) {
            return bad("plateau factor must lie in (0, 1)");
        }
        if self.patience == 0 || self.max_epochs == 0 {
            return bad("patience and max_epochs must be positive");
        }
        Ok(())
    }

    pub fn schedule(&self) -> PlateauSchedule {
        let mut s = PlateauSchedule::new(self.lr, self.min_epochs);
        s.factor = self.factor;
        s.patience = self.patience;
        s.min_lr = self.min_lr;
        s
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_metric: f64,
    pub val_loss: f64,
    pub val_metric: f64,
    /// Learning rate used for this epoch's update.
    pub lr: f64,
    pub stop: bool,
}

fn to_f32(x: &Array2<f64>) -> Array2<f32> {
    x.mapv(|v| v as f32)
}

fn to_f64(x: &Array2<f32>) -> Array2<f64> {
    x.mapv(f64::from)
}

/// Sum of the masked head losses of `view`.
fn add_losses(g: &mut Graph<f32>, outputs: &[Option<Var>], view: &TaskView) -> Result<Option<Var>, ModelError> {
    let mut total: Option<Var> = None;
    for loss in &view.losses {
        let out = outputs[loss.order].ok_or_else(|| ModelError::Config(format!("no head on order {}", loss.order)))?;
        let l = match &loss.target {
            HeadTarget::Values(t) => {
                let t: Vec<f32> = t.iter().map(|&v| v as f32).collect();
                g.masked_mse(out, &t, &loss.mask)?
            }
            HeadTarget::Classes(c) => g.masked_cross_entropy(out, c, &loss.mask)?,
        };
        total = Some(match total {
            Some(acc) => g.add(acc, l)?,
            None => l,
        });
    }
    Ok(total)
}

/// Loss of fixed outputs on the masks of `view`.
fn loss_value(outputs: &[Option<Array2<f32>>], view: &TaskView) -> Result<f64, ModelError> {
    let mut g = Graph::new();
    let vars: Vec<Option<Var>> = outputs.iter().map(|o| o.as_ref().map(|a| g.constant(a.clone()))).collect();
    Ok(add_losses(&mut g, &vars, view)?.map_or(0.0, |v| f64::from(g.value(v)[[0, 0]])))
}

fn score(task: &Task, outputs: &[Option<Array2<f32>>], view: &TaskView) -> f64 {
    let outs: Vec<Option<Array2<f64>>> = outputs.iter().map(|o| o.as_ref().map(to_f64)).collect();
    task.score(&outs, view).unwrap_or(f64::NAN)
}

/// Owns the parameters and optimizer of one training run.
pub struct Trainer<'a> {
    pub complex: &'a SimplicialComplex,
    pub task: &'a Task,
    pub model: ScrawlModel,
    pub store: ParamStore<f32>,
    pub adam: Adam<f32>,
    pub schedule: PlateauSchedule,
    pub config: TrainConfig,
    pub seed: u64,
    /// Number of completed epochs.
    pub epoch: usize,
    eval_view: TaskView,
    eval_inputs: Vec<Array2<f32>>,
}

impl<'a> Trainer<'a> {
    pub fn new(
        complex: &'a SimplicialComplex,
        task: &'a Task,
        model_config: &ModelConfig,
        config: &TrainConfig,
        seed: u64,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let counts = complex.counts();
        let k = model_config.max_order;
        let top = if counts.get(k + 1).is_some_and(|&n| n > 0) { k + 1 } else { k };
        let mut store = ParamStore::new(seed);
        let model = ScrawlModel::new(
            &mut store,
            model_config,
            &counts,
            &task.input_dims(complex, top.min(counts.len() - 1)),
            &task.head_dims(k),
        )?;
        let eval_view = task.eval_view(complex, model.top_order(), k);
        let eval_inputs = eval_view.inputs.iter().map(to_f32).collect();
        let adam = Adam::new(&store, config.lr);
        Ok(Self {
            complex,
            task,
            model,
            adam,
            schedule: config.schedule(),
            config: config.clone(),
            seed,
            epoch: 0,
            store,
            eval_view,
            eval_inputs,
        })
    }

    /// Seed of the walk set and input dropout of epoch `e`.
    pub fn epoch_seed(&self, e: usize) -> u64 {
        rng::stream(self.seed, domain::EPOCH, e as u64).next_u64()
    }

    pub fn batch(&self, epoch_seed: u64) -> Result<EpochBatch<f32>, ModelError> {
        let walks = self.model.sample_walks(self.complex, epoch_seed)?;
        self.model.prepare(self.complex, &walks)
    }

    /// Samples walks, takes one optimizer step and reports the losses.
    pub fn train_epoch(&mut self) -> Result<EpochMetrics, ModelError> {
        let e = self.epoch;
        let epoch_seed = self.epoch_seed(e);
        let batch = self.batch(epoch_seed)?;
        let k = self.model.config.max_order;
        let top = self.model.top_order();
        let stochastic = self.task.stochastic_inputs();
        let train_view = if stochastic {
            self.task.train_view(self.complex, top, k, epoch_seed)
        } else {
            TaskView {
                inputs: self.eval_view.inputs.clone(),
                losses: self.task.train_view(self.complex, top, k, epoch_seed).losses,
            }
        };
        let inputs: Vec<Array2<f32>> = if stochastic {
            train_view.inputs.iter().map(to_f32).collect()
        } else {
            self.eval_inputs.clone()
        };

        let mut g = Graph::new();
        let bound = self.store.bind(&mut g);
        let fwd = self.model.forward(&mut g, &bound, &inputs, &batch)?;
        let loss = add_losses(&mut g, &fwd.outputs, &train_view)?.ok_or_else(|| ModelError::Config("task defines no loss".into()))?;
        let train_loss = f64::from(g.value(loss)[[0, 0]]);
        if !train_loss.is_finite() {
            return Err(ModelError::NonFiniteLoss(train_loss, e));
        }
        let train_outputs: Vec<Option<Array2<f32>>> = fwd.outputs.iter().map(|o| o.map(|v| g.value(v).clone())).collect();
        let train_metric = score(self.task, &train_outputs, &train_view);

        let (val_loss, val_metric) = if stochastic {
            let outs = self.model.predict(&self.store, &self.eval_inputs, &batch)?;
            (loss_value(&outs, &self.eval_view)?, score(self.task, &outs, &self.eval_view))
        } else {
            (loss_value(&train_outputs, &self.eval_view)?, score(self.task, &train_outputs, &self.eval_view))
        };

        let mut grads = g.backward(loss)?;
        let grads: Vec<Option<Array2<f32>>> = bound.iter().map(|&v| grads.take(v)).collect();
        drop(g);
        let lr = self.adam.lr;
        self.adam.step(&mut self.store, &grads);
        let step = self.schedule.step(val_loss);
        self.adam.lr = step.lr;
        self.epoch += 1;
        let stop = step.stop || self.epoch >= self.config.max_epochs;
        Ok(EpochMetrics {
            epoch: e,
            train_loss,
            train_metric,
            val_loss,
            val_metric,
            lr,
            stop,
        })
    }

    /// Trains until the schedule stops or `max_epochs` is reached.
    pub fn run(&mut self, mut on_epoch: impl FnMut(&EpochMetrics)) -> Result<Vec<EpochMetrics>, ModelError> {
        let mut log = Vec::new();
        loop {
            let m = self.train_epoch()?;
            on_epoch(&m);
            log.push(m);
            if m.stop {
                return Ok(log);
            }
        }
    }

    /// Evaluation loss and metric with freshly sampled walks; `walks` and
    /// `walk_length` may differ from training.
    pub fn evaluate(&self, walks: Option<WalkCount>, walk_length: Option<usize>, epoch_seed: u64) -> Result<(f64, f64), ModelError> {
        let mut model = self.model.clone();
        if let Some(w) = walks {
            model.config.walks = match w {
                WalkCount::All => "all".into(),
                WalkCount::Sampled(m) => m.to_string(),
            };
        }
        if let Some(l) = walk_length {
            model.config.walk_length = l;
        }
        model.config.validate()?;
        let ws = model.sample_walks(self.complex, epoch_seed)?;
        let batch = model.prepare::<f32>(self.complex, &ws)?;
        let outs = model.predict(&self.store, &self.eval_inputs, &batch)?;
        Ok((loss_value(&outs, &self.eval_view)?, score(self.task, &outs, &self.eval_view)))
    }

    /// Raw-unit predictions and head outputs on the evaluation inputs.
    pub fn predict(&self, epoch_seed: u64) -> Result<Vec<Option<Array2<f64>>>, ModelError> {
        let batch = self.batch(epoch_seed)?;
        let outs = self.model.predict(&self.store, &self.eval_inputs, &batch)?;
        Ok(outs.iter().map(|o| o.as_ref().map(to_f64)).collect())
    }

    pub fn eval_view(&self) -> &TaskView {
        &self.eval_view
    }
}
