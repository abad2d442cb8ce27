//! The layered SCRaWl architecture.
//!
//! Every modelled order `k` has an input encoder, one module per layer and an
//! optional output head. A module turns the walks on `k`-simplices into
//! per-simplex updates that are added onto the previous hidden state. The
//! order above the top modelled order, when present, only ever contributes
//! its encoded input as coface features.

mod train;

pub use train::{EpochMetrics, TrainConfig, Trainer};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::{ComplexError, SimplicialComplex};
use crate::features::structural_block;
use crate::nn::{conv_kernels_for_window, ConvStack, Graph, Linear, Mlp, NnError, ParamId, ParamStore, PoolMode, Real, Var};
use crate::walk::{AdjacencyMode, Connection, SamplingStrategy, WalkCount, WalkError, WalkParams, WalkSet};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error("input for order {order} has shape {got:?}, expected {expected:?}")]
    InputShape {
        order: usize,
        got: (usize, usize),
        expected: (usize, usize),
    },
    #[error("non-finite loss {0} at epoch {1}")]
    NonFiniteLoss(f64, usize),
}

/// Architecture and walk hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Highest modelled order `K`.
    pub max_order: usize,
    pub layers: usize,
    /// Local window `s`.
    pub window: usize,
    pub walk_length: usize,
    /// `"all"` or a positive walk count per order.
    pub walks: String,
    pub hidden: usize,
    /// Convolution kernel widths; empty picks two widths with receptive field `s + 1`.
    pub kernels: Vec<usize>,
    pub pool: PoolMode,
    pub strategy: SamplingStrategy,
    pub adjacency: AdjacencyMode,
    pub include_self: bool,
    pub exclude_return: bool,
    pub head_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            max_order: 2,
            layers: 4,
            window: 8,
            walk_length: 50,
            walks: "all".into(),
            hidden: 32,
            kernels: Vec::new(),
            pool: PoolMode::Mean,
            strategy: SamplingStrategy::UniformConnection,
            adjacency: AdjacencyMode::Both,
            include_self: true,
            exclude_return: false,
            head_hidden: 32,
        }
    }
}

impl ModelConfig {
    pub fn kernel_widths(&self) -> Vec<usize> {
        if self.kernels.is_empty() {
            conv_kernels_for_window(self.window)
        } else {
            self.kernels.clone()
        }
    }

    pub fn receptive_field(&self) -> usize {
        1 + self.kernel_widths().iter().map(|k| k.saturating_sub(1)).sum::<usize>()
    }

    pub fn walk_count(&self) -> Result<WalkCount, ModelError> {
        self.walks.parse().map_err(ModelError::Config)
    }

    pub fn walk_params(&self) -> WalkParams {
        WalkParams {
            strategy: self.strategy,
            mode: self.adjacency,
            include_self: self.include_self,
            exclude_return: self.exclude_return,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.window == 0 {
            return bad("window must be at least 1".into());
        }
        if self.hidden == 0 || self.head_hidden == 0 {
            return bad("hidden widths must be positive".into());
        }
        if self.kernel_widths().iter().any(|&k| k == 0) {
            return bad("kernel widths must be positive".into());
        }
        let r = self.receptive_field();
        if self.walk_length < r {
            return bad(format!("walk length {} is shorter than the receptive field {r}", self.walk_length));
        }
        self.walk_count()?;
        if !self.kernels.is_empty() && r != self.window + 1 {
            log::warn!("kernels {:?} give receptive field {r}, not window + 1 = {}", self.kernels, self.window + 1);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Encoder {
    Affine(Linear),
    /// Learned `1 x d` row shared by every simplex of the order.
    Constant(ParamId),
}

/// Parameters of one module `(layer, order)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScrawlModule {
    pub order: usize,
    pub conv: ConvStack,
    pub update: Mlp,
    pub has_faces: bool,
    pub has_cofaces: bool,
}

/// Walk-derived tensors for one order, shared by all layers of an epoch.
#[derive(Debug, Clone)]
pub struct OrderBatch<T> {
    pub walks: usize,
    pub steps: usize,
    /// Step-major simplex index of every walk position.
    pub simplex_rows: Vec<Option<usize>>,
    pub face_rows: Vec<Option<usize>>,
    pub coface_rows: Vec<Option<usize>>,
    /// Step-major `[I | A↓ | A↑]` bits.
    pub bits: Array2<T>,
    /// Center simplex of each convolution output row.
    pub centers: Vec<Option<usize>>,
    pub pool_weights: Vec<T>,
    /// 1 for simplices with at least one center row, else 0.
    pub covered: Vec<T>,
    pub coverage: Vec<usize>,
}

/// Everything a forward pass needs from one sampled walk set.
#[derive(Debug, Clone)]
pub struct EpochBatch<T> {
    pub epoch_seed: u64,
    pub orders: Vec<Option<OrderBatch<T>>>,
}

/// Result of [`ScrawlModel::forward`].
#[derive(Debug, Clone)]
pub struct Forward {
    /// `states[t][k]` is `H_k^t`, for `t = 0..=L` and every encoded order.
    pub states: Vec<Vec<Var>>,
    /// Head output per modelled order.
    pub outputs: Vec<Option<Var>>,
    /// `(layer, order, epoch seed)` of every module evaluation.
    pub module_calls: Vec<(usize, usize, u64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScrawlModel {
    pub config: ModelConfig,
    pub counts: Vec<usize>,
    pub input_dims: Vec<usize>,
    pub encoders: Vec<Encoder>,
    /// `modules[t][k]`, `None` for orders without simplices.
    pub modules: Vec<Vec<Option<ScrawlModule>>>,
    pub heads: Vec<Option<Mlp>>,
}

impl ScrawlModel {
    /// `input_dims[k]` is the raw input width of order `k` for every encoded
    /// order; `head_dims[k]` is the output width of the head on order `k`.
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        config: &ModelConfig,
        counts: &[usize],
        input_dims: &[usize],
        head_dims: &[Option<usize>],
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let k_max = config.max_order;
        if counts.len() <= k_max {
            return Err(ModelError::Config(format!(
                "max_order {k_max} exceeds the complex's top order {}",
                counts.len().saturating_sub(1)
            )));
        }
        let top = if counts.get(k_max + 1).is_some_and(|&n| n > 0) { k_max + 1 } else { k_max };
        if input_dims.len() <= top {
            return Err(ModelError::Config(format!("need input widths for orders 0..={top}")));
        }
        let d = config.hidden;
        let encoders = (0..=top)
            .map(|k| match input_dims[k] {
                0 => Encoder::Constant(store.uniform(format!("encoder.{k}.constant"), (1, d), 1)),
                dk => Encoder::Affine(Linear::new(store, &format!("encoder.{k}"), dk, d)),
            })
            .collect();
        let kernels = config.kernel_widths();
        let s = config.window;
        let mut modules = Vec::with_capacity(config.layers);
        for t in 0..config.layers {
            let mut per_order = Vec::with_capacity(k_max + 1);
            for k in 0..=k_max {
                if counts[k] == 0 {
                    per_order.push(None);
                    continue;
                }
                let has_faces = k > 0;
                let has_cofaces = k < top && counts[k + 1] > 0;
                let d_in = d + usize::from(has_faces) * d + usize::from(has_cofaces) * d + 3 * s - 2;
                let mut channels = vec![d_in];
                channels.extend(std::iter::repeat_n(d, kernels.len()));
                let name = format!("layer.{t}.order.{k}");
                let conv = ConvStack::new(store, &format!("{name}.conv"), &kernels, &channels);
                let update = Mlp::new(store, &format!("{name}.update"), &[d, d, d]);
                per_order.push(Some(ScrawlModule {
                    order: k,
                    conv,
                    update,
                    has_faces,
                    has_cofaces,
                }));
            }
            modules.push(per_order);
        }
        let heads = (0..=k_max)
            .map(|k| {
                head_dims.get(k).copied().flatten().map(|out| Mlp::new(store, &format!("head.{k}"), &[d, config.head_hidden, out]))
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            counts: counts[..=top].to_vec(),
            input_dims: input_dims[..=top].to_vec(),
            encoders,
            modules,
            heads,
        })
    }

    /// Highest encoded order (the modelled top, or one above it).
    pub fn top_order(&self) -> usize {
        self.encoders.len() - 1
    }

    pub fn receptive_field(&self) -> usize {
        self.config.receptive_field()
    }

    /// Samples the walk set of one epoch.
    pub fn sample_walks(&self, c: &SimplicialComplex, epoch_seed: u64) -> Result<WalkSet, ModelError> {
        Ok(crate::walk::sample_walk_sets(
            c,
            self.config.max_order,
            self.config.walk_count()?,
            self.config.walk_length,
            self.config.walk_params(),
            epoch_seed,
        )?)
    }

    /// Precomputes gather indices, structural bits and pooling weights.
    pub fn prepare<T: Real>(&self, c: &SimplicialComplex, walks: &WalkSet) -> Result<EpochBatch<T>, ModelError> {
        let r = self.receptive_field();
        let s = self.config.window;
        let orders = (0..=self.config.max_order)
            .map(|k| {
                let ws = walks.walks(k);
                if ws.is_empty() || self.counts[k] == 0 {
                    return Ok(None);
                }
                let m = ws.len();
                let l = ws[0].len();
                if ws.iter().any(|w| w.len() != l || w.order != k) {
                    return Err(ModelError::Config(format!("walks on order {k} differ in length or order")));
                }
                if l < r {
                    return Err(NnError::WalkTooShort { length: l, field: r }.into());
                }
                let blocks: Vec<Array2<u8>> = ws.par_iter().map(|w| structural_block(w, c, s)).collect();
                let width = 3 * s - 2;
                let mut bits = Array2::zeros((l * m, width));
                let mut simplex_rows = vec![None; l * m];
                let mut face_rows = vec![None; l * m];
                let mut coface_rows = vec![None; l * m];
                for (j, w) in ws.iter().enumerate() {
                    for p in 0..l {
                        let row = p * m + j;
                        simplex_rows[row] = Some(w.simplices[p]);
                        if p > 0 {
                            match w.connections[p - 1] {
                                Connection::Face(f) => face_rows[row] = Some(f),
                                Connection::Coface(f) => coface_rows[row] = Some(f),
                                Connection::Stay => {}
                            }
                        }
                        for (col, &b) in blocks[j].row(p).iter().enumerate() {
                            if b != 0 {
                                bits[[row, col]] = T::one();
                            }
                        }
                    }
                }
                let out_steps = l - r + 1;
                let half = r / 2;
                let mut centers = vec![None; out_steps * m];
                for q in 0..out_steps {
                    for (j, w) in ws.iter().enumerate() {
                        centers[q * m + j] = Some(w.simplices[q + half]);
                    }
                }
                let (pool_weights, coverage) = self.config.pool.weights::<T>(&centers, self.counts[k]);
                let covered = coverage.iter().map(|&n| if n > 0 { T::one() } else { T::zero() }).collect();
                Ok(Some(OrderBatch {
                    walks: m,
                    steps: l,
                    simplex_rows,
                    face_rows,
                    coface_rows,
                    bits,
                    centers,
                    pool_weights,
                    covered,
                    coverage,
                }))
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        Ok(EpochBatch {
            epoch_seed: walks.epoch_seed,
            orders,
        })
    }

    /// `H_k^0` for every encoded order.
    pub fn init_hidden<T: Real>(&self, g: &mut Graph<T>, bound: &[Var], inputs: &[Array2<T>]) -> Result<Vec<Var>, ModelError> {
        self.encoders
            .iter()
            .enumerate()
            .map(|(k, enc)| {
                let n = self.counts[k];
                let x = inputs.get(k).ok_or_else(|| ModelError::Config(format!("missing input for order {k}")))?;
                let expected = (n, self.input_dims[k]);
                if x.dim() != expected {
                    return Err(ModelError::InputShape {
                        order: k,
                        got: x.dim(),
                        expected,
                    });
                }
                Ok(match enc {
                    Encoder::Affine(lin) => {
                        let xv = g.constant(x.clone());
                        lin.forward(g, bound, xv)?
                    }
                    Encoder::Constant(id) => g.broadcast_rows(bound[id.0], n)?,
                })
            })
            .collect()
    }

    /// Module output for one order: pooled, updated and zeroed where uncovered.
    pub fn module_forward<T: Real>(
        &self,
        g: &mut Graph<T>,
        bound: &[Var],
        module: &ScrawlModule,
        batch: &OrderBatch<T>,
        states: &[Var],
    ) -> Result<Var, ModelError> {
        let k = module.order;
        let mut parts = vec![g.gather_rows(states[k], &batch.simplex_rows)?];
        if module.has_faces {
            parts.push(g.gather_rows(states[k - 1], &batch.face_rows)?);
        }
        if module.has_cofaces {
            parts.push(g.gather_rows(states[k + 1], &batch.coface_rows)?);
        }
        parts.push(g.constant(batch.bits.clone()));
        let x = g.concat_cols(&parts)?;
        let conv = module.conv.forward(g, bound, x, batch.walks)?;
        let pooled = g.pool(conv, &batch.centers, &batch.pool_weights, self.counts[k])?;
        let upd = module.update.forward(g, bound, pooled)?;
        Ok(g.row_scale(upd, &batch.covered)?)
    }

    /// One synchronous layer: every module reads `states`, outputs are added.
    pub fn layer_forward<T: Real>(
        &self,
        g: &mut Graph<T>,
        bound: &[Var],
        layer: usize,
        batch: &EpochBatch<T>,
        states: &[Var],
        calls: &mut Vec<(usize, usize, u64)>,
    ) -> Result<Vec<Var>, ModelError> {
        let mut next = states.to_vec();
        for (k, module) in self.modules[layer].iter().enumerate() {
            let (Some(module), Some(Some(ob))) = (module, batch.orders.get(k)) else {
                continue;
            };
            let out = self.module_forward(g, bound, module, ob, states)?;
            calls.push((layer, k, batch.epoch_seed));
            next[k] = g.add(states[k], out)?;
        }
        Ok(next)
    }

    pub fn forward<T: Real>(
        &self,
        g: &mut Graph<T>,
        bound: &[Var],
        inputs: &[Array2<T>],
        batch: &EpochBatch<T>,
    ) -> Result<Forward, ModelError> {
        let mut states = vec![self.init_hidden(g, bound, inputs)?];
        let mut module_calls = Vec::new();
        for t in 0..self.config.layers {
            let next = self.layer_forward(g, bound, t, batch, states.last().expect("non-empty"), &mut module_calls)?;
            states.push(next);
        }
        let last = states.last().expect("non-empty").clone();
        let outputs = self
            .heads
            .iter()
            .enumerate()
            .map(|(k, head)| head.as_ref().map(|h| h.forward(g, bound, last[k])).transpose())
            .collect::<Result<Vec<_>, NnError>>()?;
        Ok(Forward {
            states,
            outputs,
            module_calls,
        })
    }

    /// Forward pass with parameters as constants; returns head outputs.
    pub fn predict<T: Real>(
        &self,
        store: &ParamStore<T>,
        inputs: &[Array2<T>],
        batch: &EpochBatch<T>,
    ) -> Result<Vec<Option<Array2<T>>>, ModelError> {
        let mut g = Graph::new();
        let bound: Vec<Var> = store.values().iter().map(|v| g.constant(v.clone())).collect();
        let fwd = self.forward(&mut g, &bound, inputs, batch)?;
        Ok(fwd.outputs.iter().map(|o| o.map(|v| g.value(v).clone())).collect())
    }

    /// Parameters of every module (conv stacks and update MLPs).
    pub fn module_params(&self) -> Vec<ParamId> {
        let mut ids = Vec::new();
        for m in self.modules.iter().flatten().flatten() {
            for l in &m.conv.layers {
                ids.extend([l.weight, l.bias]);
            }
            for l in &m.update.layers {
                ids.extend([l.weight, l.bias]);
            }
        }
        ids
    }
}
