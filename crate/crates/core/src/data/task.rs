//! Imputation and vertex-classification tasks.
//!
//! A task turns a complex and its targets into model inputs and masked losses.
//! Masks are drawn per simplex from a stream keyed by the simplex's sorted
//! vertex labels, so they do not depend on enumeration order.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::metrics::{classification_accuracy, imputation_accuracy};
use super::DataError;
use crate::complex::{SimplexId, SimplicialComplex};
use crate::rng::{self, domain};

fn keyed_draw(c: &SimplicialComplex, s: SimplexId, seed: u64) -> f64 {
    let mut labels = c.labels_of(s);
    labels.sort_unstable();
    let key = labels.join("\u{1f}");
    let mut r = rng::stream(seed, domain::TASK_MASK, rng::fnv1a(key.as_bytes()));
    rng::uniform_unit(&mut r)
}

fn median(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueTransform {
    None,
    /// `ln(1 + x)` before standardizing; for heavy-tailed non-negative counts.
    #[default]
    Log1p,
}

impl std::str::FromStr for ValueTransform {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "log1p" => Ok(Self::Log1p),
            _ => Err(format!("unknown value transform `{s}` (expected none|log1p)")),
        }
    }
}

/// Per-order map from raw values to model units and back.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub transform: ValueTransform,
    pub shift: f64,
    pub scale: f64,
}

impl Normalization {
    pub fn apply(&self, x: f64) -> f64 {
        let t = match self.transform {
            ValueTransform::None => x,
            ValueTransform::Log1p => x.ln_1p(),
        };
        (t - self.shift) / self.scale
    }

    pub fn invert(&self, z: f64) -> f64 {
        let t = z * self.scale + self.shift;
        match self.transform {
            ValueTransform::None => t,
            ValueTransform::Log1p => t.exp_m1(),
        }
    }

    /// Standardizes the transformed values.
    fn fit(values: &[f64], transform: ValueTransform) -> Self {
        let id = Self {
            transform,
            shift: 0.0,
            scale: 1.0,
        };
        let t: Vec<f64> = values.iter().map(|&x| id.apply(x)).collect();
        let n = t.len().max(1) as f64;
        let mean = t.iter().sum::<f64>() / n;
        let var = t.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        Self {
            transform,
            shift: mean,
            scale: if std > 1e-12 { std } else { 1.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputationTask {
    /// Raw values per order.
    pub truth: Vec<Vec<f64>>,
    pub known: Vec<Vec<bool>>,
    /// Raw model inputs: known values kept, missing replaced by the median.
    pub inputs: Vec<Vec<f64>>,
    pub medians: Vec<f64>,
    pub norms: Vec<Normalization>,
    pub missing_rate: f64,
    pub seed: u64,
    /// Fraction of known inputs additionally median-filled in each training
    /// epoch (their loss still counts).
    pub input_dropout: f64,
}

/// Masks each simplex with probability `p` and fills the gaps with the
/// per-order median of the known values.
pub fn make_imputation_task(
    c: &SimplicialComplex,
    values: &[Vec<f64>],
    p: f64,
    seed: u64,
    transform: ValueTransform,
) -> Result<ImputationTask, DataError> {
    if !(0.0..1.0).contains(&p) {
        return Err(DataError::InvalidRate(p));
    }
    if values.len() > c.max_order() + 1 {
        return Err(DataError::Invalid(format!("values for {} orders, complex has {}", values.len(), c.max_order() + 1)));
    }
    let mut known = Vec::new();
    let mut inputs = Vec::new();
    let mut medians = Vec::new();
    let mut norms = Vec::new();
    for (k, vals) in values.iter().enumerate() {
        if vals.len() != c.count(k) {
            return Err(DataError::Invalid(format!("order {k}: {} values for {} simplices", vals.len(), c.count(k))));
        }
        if transform == ValueTransform::Log1p && vals.iter().any(|&v| v < 0.0) {
            return Err(DataError::Invalid(format!("order {k}: log1p needs non-negative values")));
        }
        let mask: Vec<bool> = (0..vals.len()).map(|i| keyed_draw(c, SimplexId::new(k, i), seed) >= p).collect();
        let med = median(vals.iter().zip(&mask).filter(|(_, &m)| m).map(|(&v, _)| v)).ok_or(DataError::AllMasked(k))?;
        let filled: Vec<f64> = vals.iter().zip(&mask).map(|(&v, &m)| if m { v } else { med }).collect();
        let known_vals: Vec<f64> = vals.iter().zip(&mask).filter(|(_, &m)| m).map(|(&v, _)| v).collect();
        norms.push(Normalization::fit(&known_vals, transform));
        known.push(mask);
        inputs.push(filled);
        medians.push(med);
    }
    Ok(ImputationTask {
        truth: values.to_vec(),
        known,
        inputs,
        medians,
        norms,
        missing_rate: p,
        seed,
        input_dropout: 0.25,
    })
}

impl ImputationTask {
    pub fn missing(&self, order: usize) -> Vec<bool> {
        self.known[order].iter().map(|k| !k).collect()
    }

    /// Per-order accuracy of the raw predictions on `mask`, paired with the
    /// accuracy of the median predictor on the same entries.
    pub fn order_accuracy(&self, order: usize, pred_raw: &[f64], mask: &[bool]) -> Result<(f64, f64), DataError> {
        let acc = imputation_accuracy(pred_raw, &self.truth[order], mask)?;
        let base = super::metrics::median_accuracy(self.medians[order], &self.truth[order], mask)?;
        Ok((acc, base))
    }
}

/// What the order-0 inputs of a classification task contain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VertexInputs {
    /// Only the complex's own features (a learned constant when there are none).
    Featureless,
    /// One-hot training labels; hidden vertices get zeros. During training a
    /// `dropout` fraction of the training labels is hidden as well and the
    /// loss covers exactly those.
    TrainLabels { dropout: f64 },
}

impl Default for VertexInputs {
    fn default() -> Self {
        Self::Featureless
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationTask {
    pub labels: Vec<usize>,
    pub classes: usize,
    /// `true` for vertices whose label is available for training.
    pub train: Vec<bool>,
    pub missing_rate: f64,
    pub seed: u64,
    pub inputs: VertexInputs,
}

/// Hides each vertex label with probability `p`, then returns one hidden
/// vertex of any class that lost all its training vertices. With
/// `stratified`, each class instead hides `round(p * size)` of its members,
/// those with the lowest keyed draws.
pub fn make_classification_task(
    c: &SimplicialComplex,
    labels: &[usize],
    p: f64,
    seed: u64,
    stratified: bool,
) -> Result<ClassificationTask, DataError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(DataError::InvalidRate(p));
    }
    if labels.len() != c.count(0) {
        return Err(DataError::Invalid(format!("{} labels for {} vertices", labels.len(), c.count(0))));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let draws: Vec<f64> = (0..labels.len()).map(|i| keyed_draw(c, SimplexId::new(0, i), seed)).collect();
    let mut train: Vec<bool> = draws.iter().map(|&u| u >= p).collect();
    for class in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&v| labels[v] == class).collect();
        if stratified {
            members.sort_by(|&a, &b| draws[a].total_cmp(&draws[b]));
            let hide = ((p * members.len() as f64).round() as usize).min(members.len().saturating_sub(1));
            for (rank, &v) in members.iter().enumerate() {
                train[v] = rank >= hide;
            }
            continue;
        }
        if members.len() > 1 && !members.iter().any(|&v| train[v]) {
            let keep = *members
                .iter()
                .max_by(|&&a, &&b| draws[a].total_cmp(&draws[b]))
                .expect("non-empty");
            train[keep] = true;
        }
    }
    Ok(ClassificationTask {
        labels: labels.to_vec(),
        classes,
        train,
        missing_rate: p,
        seed,
        inputs: VertexInputs::Featureless,
    })
}

impl ClassificationTask {
    pub fn hidden(&self) -> Vec<bool> {
        self.train.iter().map(|t| !t).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HeadTarget {
    /// Normalized regression targets.
    Values(Vec<f64>),
    Classes(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadLoss {
    pub order: usize,
    pub target: HeadTarget,
    pub mask: Vec<bool>,
}

/// Model inputs for every encoded order plus the losses to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskView {
    pub inputs: Vec<Array2<f64>>,
    pub losses: Vec<HeadLoss>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    Imputation(ImputationTask),
    Classification(ClassificationTask),
}

impl Task {
    /// Orders that get an output head, given the top modelled order.
    pub fn head_orders(&self, max_order: usize) -> Vec<usize> {
        match self {
            Task::Imputation(t) => (0..t.truth.len().min(max_order + 1)).collect(),
            Task::Classification(_) => vec![0],
        }
    }

    pub fn head_dims(&self, max_order: usize) -> Vec<Option<usize>> {
        let mut dims = vec![None; max_order + 1];
        for k in self.head_orders(max_order) {
            dims[k] = Some(match self {
                Task::Imputation(_) => 1,
                Task::Classification(t) => t.classes,
            });
        }
        dims
    }

    fn task_channels(&self, order: usize) -> usize {
        match self {
            Task::Imputation(t) if order < t.truth.len() => 2,
            Task::Classification(ClassificationTask {
                inputs: VertexInputs::TrainLabels { .. },
                classes,
                ..
            }) if order == 0 => *classes,
            _ => 0,
        }
    }

    /// Input width of each order `0..=top`.
    pub fn input_dims(&self, c: &SimplicialComplex, top: usize) -> Vec<usize> {
        (0..=top).map(|k| c.feature_dim(k) + self.task_channels(k)).collect()
    }

    /// Whether training inputs differ from evaluation inputs.
    pub fn stochastic_inputs(&self) -> bool {
        match self {
            Task::Imputation(t) => t.input_dropout > 0.0,
            Task::Classification(t) => matches!(t.inputs, VertexInputs::TrainLabels { dropout } if dropout > 0.0),
        }
    }

    fn build_inputs(&self, c: &SimplicialComplex, top: usize, hidden_extra: &[Vec<bool>]) -> Vec<Array2<f64>> {
        (0..=top)
            .map(|k| {
                let n = c.count(k);
                let base = c.features(k).cloned().unwrap_or_else(|| Array2::zeros((n, 0)));
                let extra = self.task_channels(k);
                if extra == 0 {
                    return base;
                }
                let d0 = base.ncols();
                let mut x = Array2::zeros((n, d0 + extra));
                x.slice_mut(ndarray::s![.., ..d0]).assign(&base);
                let dropped = |i: usize| hidden_extra.get(k).is_some_and(|h| h[i]);
                match self {
                    Task::Imputation(t) => {
                        let norm = t.norms[k];
                        for i in 0..n {
                            let filled = !t.known[k][i] || dropped(i);
                            let raw = if filled { t.medians[k] } else { t.inputs[k][i] };
                            x[[i, d0]] = norm.apply(raw);
                            x[[i, d0 + 1]] = if filled { 1.0 } else { 0.0 };
                        }
                    }
                    Task::Classification(t) => {
                        for i in 0..n {
                            if t.train[i] && !dropped(i) {
                                x[[i, d0 + t.labels[i]]] = 1.0;
                            }
                        }
                    }
                }
                x
            })
            .collect()
    }

    /// Inputs with every known value visible; losses on the evaluation set
    /// (missing values, hidden labels).
    pub fn eval_view(&self, c: &SimplicialComplex, top: usize, max_order: usize) -> TaskView {
        let inputs = self.build_inputs(c, top, &[]);
        let losses = self
            .head_orders(max_order)
            .into_iter()
            .map(|k| match self {
                Task::Imputation(t) => HeadLoss {
                    order: k,
                    target: HeadTarget::Values(t.truth[k].iter().map(|&v| t.norms[k].apply(v)).collect()),
                    mask: t.missing(k),
                },
                Task::Classification(t) => HeadLoss {
                    order: 0,
                    target: HeadTarget::Classes(t.labels.clone()),
                    mask: t.hidden(),
                },
            })
            .collect();
        TaskView { inputs, losses }
    }

    /// Training inputs and losses for one epoch.
    pub fn train_view(&self, c: &SimplicialComplex, top: usize, max_order: usize, epoch_seed: u64) -> TaskView {
        let rate = match self {
            Task::Imputation(t) => t.input_dropout,
            Task::Classification(t) => match t.inputs {
                VertexInputs::TrainLabels { dropout } => dropout,
                VertexInputs::Featureless => 0.0,
            },
        };
        let known: Vec<Vec<bool>> = match self {
            Task::Imputation(t) => t.known.clone(),
            Task::Classification(t) => vec![t.train.clone()],
        };
        let dropped: Vec<Vec<bool>> = known
            .iter()
            .enumerate()
            .map(|(k, mask)| {
                if rate <= 0.0 {
                    return vec![false; mask.len()];
                }
                let mut r = rng::stream(epoch_seed, domain::LABEL_DROPOUT, k as u64);
                mask.iter().map(|&m| rng::uniform_unit(&mut r) < rate && m).collect()
            })
            .collect();
        let inputs = self.build_inputs(c, top, &dropped);
        let losses = self
            .head_orders(max_order)
            .into_iter()
            .map(|k| match self {
                Task::Imputation(t) => HeadLoss {
                    order: k,
                    target: HeadTarget::Values(t.truth[k].iter().map(|&v| t.norms[k].apply(v)).collect()),
                    mask: t.known[k].clone(),
                },
                Task::Classification(t) => {
                    let label_inputs = matches!(t.inputs, VertexInputs::TrainLabels { .. });
                    let any_dropped = dropped[0].iter().any(|&d| d);
                    HeadLoss {
                        order: 0,
                        target: HeadTarget::Classes(t.labels.clone()),
                        mask: if label_inputs && any_dropped { dropped[0].clone() } else { t.train.clone() },
                    }
                }
            })
            .collect();
        TaskView { inputs, losses }
    }

    /// Task metric of head outputs on the masks of `view`: mean per-order
    /// imputation accuracy or vertex classification accuracy.
    pub fn score(&self, outputs: &[Option<Array2<f64>>], view: &TaskView) -> Result<f64, DataError> {
        let mut accs = Vec::new();
        for loss in &view.losses {
            let out = outputs
                .get(loss.order)
                .and_then(Option::as_ref)
                .ok_or_else(|| DataError::Invalid(format!("no output for order {}", loss.order)))?;
            match (self, &loss.target) {
                (Task::Imputation(t), HeadTarget::Values(_)) => {
                    if !loss.mask.iter().any(|&m| m) {
                        continue;
                    }
                    let raw = self.denormalize(loss.order, out);
                    accs.push(imputation_accuracy(&raw, &t.truth[loss.order], &loss.mask)?);
                }
                (Task::Classification(_), HeadTarget::Classes(labels)) => {
                    accs.push(classification_accuracy(out, labels, &loss.mask)?);
                }
                _ => return Err(DataError::Invalid("task and target kinds differ".into())),
            }
        }
        if accs.is_empty() {
            return Err(DataError::EmptyEvalMask);
        }
        Ok(accs.iter().sum::<f64>() / accs.len() as f64)
    }

    /// Raw-unit predictions of an imputation head (empty for classification).
    pub fn denormalize(&self, order: usize, out: &Array2<f64>) -> Vec<f64> {
        match self {
            Task::Imputation(t) => out.column(0).iter().map(|&z| t.norms[order].invert(z)).collect(),
            Task::Classification(_) => Vec::new(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Task::Imputation(_) => "imputation",
            Task::Classification(_) => "classification",
        }
    }
}
