//! Parameter storage and the layers built on it.

use ndarray::Array2;

use super::graph::{Graph, NnError, Var};
use super::Real;
use crate::rng::{self, domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// Named parameter matrices. Insertion order is stable and defines ids.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    names: Vec<String>,
    values: Vec<Array2<T>>,
    seed: u64,
}

impl<T: Real> ParamStore<T> {
    pub fn new(seed: u64) -> Self {
        Self {
            names: Vec::new(),
            values: Vec::new(),
            seed,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array2<T>) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn zeros(&mut self, name: impl Into<String>, shape: (usize, usize)) -> ParamId {
        self.add(name, Array2::zeros(shape))
    }

    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, drawn from a stream keyed by the
    /// store seed and the new parameter's id.
    pub fn uniform(&mut self, name: impl Into<String>, shape: (usize, usize), fan_in: usize) -> ParamId {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let mut r = rng::stream(self.seed, domain::PARAM_INIT, self.values.len() as u64);
        let value = Array2::from_shape_simple_fn(shape, || T::of((2.0 * rng::uniform_unit(&mut r) - 1.0) * bound));
        self.add(name, value)
    }

    pub fn get(&self, id: ParamId) -> &Array2<T> {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<T> {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn values(&self) -> &[Array2<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Array2<T>] {
        &mut self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    /// Puts every parameter on the graph as a differentiable input.
    pub fn bind(&self, g: &mut Graph<T>) -> Vec<Var> {
        self.values.iter().map(|v| g.input(v.clone())).collect()
    }

    pub fn set_all_zero(&mut self) {
        for v in &mut self.values {
            v.fill(T::zero());
        }
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            names: self.names.clone(),
            values: self.values.iter().map(|v| v.mapv(|x| U::of(x.as_f64()))).collect(),
            seed: self.seed,
        }
    }
}

/// `y = x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub d_in: usize,
    pub d_out: usize,
}

impl Linear {
    pub fn new<T: Real>(store: &mut ParamStore<T>, name: &str, d_in: usize, d_out: usize) -> Self {
        let weight = store.uniform(format!("{name}.weight"), (d_in, d_out), d_in);
        let bias = store.zeros(format!("{name}.bias"), (1, d_out));
        Self { weight, bias, d_in, d_out }
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, bound: &[Var], x: Var) -> Result<Var, NnError> {
        let y = g.matmul(x, bound[self.weight.0])?;
        g.add_bias(y, bound[self.bias.0])
    }
}

/// Linear layers with ReLU between them (not after the last).
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    pub fn new<T: Real>(store: &mut ParamStore<T>, name: &str, widths: &[usize]) -> Self {
        assert!(widths.len() >= 2, "an MLP needs an input and an output width");
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1]))
            .collect();
        Self { layers }
    }

    pub fn d_in(&self) -> usize {
        self.layers[0].d_in
    }

    pub fn d_out(&self) -> usize {
        self.layers.last().expect("non-empty").d_out
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, bound: &[Var], x: Var) -> Result<Var, NnError> {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                h = g.relu(h);
            }
            h = layer.forward(g, bound, h)?;
        }
        Ok(h)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub kernel: usize,
    pub c_in: usize,
    pub c_out: usize,
}

/// Unpadded 1D convolutions over walk steps with ReLU between layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvStack {
    pub layers: Vec<ConvLayer>,
}

impl ConvStack {
    /// `channels` has one more entry than `kernels`.
    pub fn new<T: Real>(store: &mut ParamStore<T>, name: &str, kernels: &[usize], channels: &[usize]) -> Self {
        assert_eq!(channels.len(), kernels.len() + 1, "one channel count per layer boundary");
        let layers = kernels
            .iter()
            .enumerate()
            .map(|(i, &kernel)| {
                assert!(kernel >= 1, "kernel width must be positive");
                let (c_in, c_out) = (channels[i], channels[i + 1]);
                let weight = store.uniform(format!("{name}.{i}.weight"), (kernel * c_in, c_out), kernel * c_in);
                let bias = store.zeros(format!("{name}.{i}.bias"), (1, c_out));
                ConvLayer {
                    weight,
                    bias,
                    kernel,
                    c_in,
                    c_out,
                }
            })
            .collect();
        Self { layers }
    }

    /// `1 + Σ (kernel - 1)`.
    pub fn receptive_field(&self) -> usize {
        1 + self.layers.iter().map(|l| l.kernel - 1).sum::<usize>()
    }

    pub fn c_out(&self) -> usize {
        self.layers.last().map_or(0, |l| l.c_out)
    }

    /// `x` is step-major with `walks` walks; returns step-major output with
    /// `len - r + 1` steps.
    pub fn forward<T: Real>(&self, g: &mut Graph<T>, bound: &[Var], x: Var, walks: usize) -> Result<Var, NnError> {
        let steps = if walks == 0 { 0 } else { g.shape(x).0 / walks };
        let r = self.receptive_field();
        if steps < r {
            return Err(NnError::WalkTooShort { length: steps, field: r });
        }
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                h = g.relu(h);
            }
            h = g.conv1d(h, bound[layer.weight.0], bound[layer.bias.0], walks, layer.kernel)?;
        }
        Ok(h)
    }
}

/// Two kernel widths whose receptive field is `window + 1`.
pub fn conv_kernels_for_window(window: usize) -> Vec<usize> {
    let total = window + 2;
    let a = total.div_ceil(2);
    vec![a, total - a]
}
