//! Walk batches and the forward-only helpers used outside training.

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::graph::{Graph, NnError};
use super::layers::{ConvStack, ParamStore};
use super::Real;

/// `walks x steps x channels`, stored step-major as a
/// `(steps * walks) x channels` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub walks: usize,
    pub steps: usize,
    pub data: Array2<T>,
    pub grad: Option<Array2<T>>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(walks: usize, steps: usize, channels: usize) -> Self {
        Self {
            walks,
            steps,
            data: Array2::zeros((walks * steps, channels)),
            grad: None,
        }
    }

    pub fn from_step_major(walks: usize, data: Array2<T>) -> Result<Self, NnError> {
        if walks == 0 || data.nrows() % walks != 0 {
            return Err(NnError::Shape {
                op: "tensor",
                detail: format!("{} rows for {walks} walks", data.nrows()),
            });
        }
        Ok(Self {
            walks,
            steps: data.nrows() / walks,
            data,
            grad: None,
        })
    }

    /// Stacks per-walk `steps x channels` matrices.
    pub fn from_walks(per_walk: &[ArrayView2<'_, T>]) -> Result<Self, NnError> {
        let walks = per_walk.len();
        let (steps, channels) = per_walk.first().map_or((0, 0), |m| m.dim());
        if per_walk.iter().any(|m| m.dim() != (steps, channels)) {
            return Err(NnError::Shape {
                op: "tensor",
                detail: "walk matrices differ in shape".into(),
            });
        }
        let mut t = Self::zeros(walks, steps, channels);
        for (j, m) in per_walk.iter().enumerate() {
            for p in 0..steps {
                t.data.row_mut(p * walks + j).assign(&m.row(p));
            }
        }
        Ok(t)
    }

    pub fn channels(&self) -> usize {
        self.data.ncols()
    }

    pub fn at(&self, walk: usize, step: usize) -> ndarray::ArrayView1<'_, T> {
        self.data.row(step * self.walks + walk)
    }

    /// `steps x channels` matrix of one walk.
    pub fn walk(&self, j: usize) -> Array2<T> {
        self.data.slice(s![j..; self.walks, ..]).to_owned()
    }

    pub fn set_grad(&mut self, grad: Array2<T>) -> Result<(), NnError> {
        if grad.dim() != self.data.dim() {
            return Err(NnError::Shape {
                op: "tensor grad",
                detail: format!("{:?} vs {:?}", grad.dim(), self.data.dim()),
            });
        }
        self.grad = Some(grad);
        Ok(())
    }
}

/// Runs `stack` over `x` without recording gradients.
pub fn conv1d_forward<T: Real>(x: &Tensor<T>, stack: &ConvStack, store: &ParamStore<T>) -> Result<Tensor<T>, NnError> {
    let mut g = Graph::new();
    let bound: Vec<_> = store.values().iter().map(|v| g.constant(v.clone())).collect();
    let input = g.constant(x.data.clone());
    let out = stack.forward(&mut g, &bound, input, x.walks)?;
    Tensor::from_step_major(x.walks, g.value(out).clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolMode {
    #[default]
    Mean,
    Sum,
}

impl std::str::FromStr for PoolMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(Self::Mean),
            "sum" => Ok(Self::Sum),
            other => Err(format!("unknown pooling mode '{other}' (expected mean or sum)")),
        }
    }
}

impl PoolMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Mean => "mean",
            Self::Sum => "sum",
        }
    }

    /// Per-row pooling weights and per-segment coverage counts.
    pub fn weights<T: Real>(self, centers: &[Option<usize>], segments: usize) -> (Vec<T>, Vec<usize>) {
        let mut counts = vec![0usize; segments];
        for c in centers.iter().flatten() {
            counts[*c] += 1;
        }
        let weights = centers
            .iter()
            .map(|c| match (self, c) {
                (_, None) => T::zero(),
                (Self::Sum, Some(_)) => T::one(),
                (Self::Mean, Some(c)) => T::one() / T::of(counts[*c] as f64),
            })
            .collect();
        (weights, counts)
    }
}

/// Groups rows by center simplex. Uncovered segments are zero and have a
/// count of zero.
pub fn segment_pool<T: Real>(
    rows: &Array2<T>,
    centers: &[usize],
    segments: usize,
    mode: PoolMode,
) -> Result<(Array2<T>, Vec<usize>), NnError> {
    if centers.len() != rows.nrows() {
        return Err(NnError::Shape {
            op: "segment_pool",
            detail: format!("{} rows, {} centers", rows.nrows(), centers.len()),
        });
    }
    if let Some(&bad) = centers.iter().find(|&&c| c >= segments) {
        return Err(NnError::Shape {
            op: "segment_pool",
            detail: format!("center {bad} of {segments}"),
        });
    }
    let ids: Vec<Option<usize>> = centers.iter().map(|&c| Some(c)).collect();
    let (weights, counts) = mode.weights::<T>(&ids, segments);
    let mut g = Graph::new();
    let x = g.constant(rows.clone());
    let pooled = g.pool(x, &ids, &weights, segments)?;
    Ok((g.value(pooled).clone(), counts))
}
