//! Tape of recorded operations and the reverse sweep over it.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, Axis};
use thiserror::Error;

use super::Real;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("no recorded forward pass leads to variable {0}")]
    GraphNotRecorded(usize),
    #[error("loss must be a 1x1 value, got {0}x{1}")]
    NotScalar(usize, usize),
    #[error("walk length {length} is shorter than the receptive field {field}")]
    WalkTooShort { length: usize, field: usize },
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
}

/// Handle to a value on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Marker for "no source row" in gathers and pools.
pub(crate) const NONE: u32 = u32::MAX;

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Scale(Var, T),
    Relu(Var),
    Gather { src: Var, index: Vec<u32> },
    ConcatCols(Vec<Var>),
    Conv1d { x: Var, w: Var, b: Var, walks: usize, kernel: usize },
    Pool { x: Var, segment: Vec<u32>, weight: Vec<T> },
    RowScale { x: Var, scale: Vec<T> },
    Broadcast { src: Var },
    Sum(Var),
    MaskedMse { pred: Var, target: Vec<T>, mask: Vec<bool>, count: usize },
    MaskedCrossEntropy { logits: Var, labels: Vec<usize>, mask: Vec<bool>, probs: Array2<T>, count: usize },
}

#[derive(Debug)]
struct Node<T> {
    value: Array2<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Records a forward computation for later differentiation.
#[derive(Debug, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients from one reverse sweep, indexed by [`Var`].
#[derive(Debug)]
pub struct Grads<T> {
    grads: Vec<Option<Array2<T>>>,
}

impl<T: Real> Grads<T> {
    pub fn get(&self, v: Var) -> Option<&Array2<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or zeros of `shape` if nothing flowed into it.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Array2<T> {
        self.get(v).cloned().unwrap_or_else(|| Array2::zeros(shape))
    }

    pub fn take(&mut self, v: Var) -> Option<Array2<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn shape_err(op: &'static str, detail: String) -> NnError {
    NnError::Shape { op, detail }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array2<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    fn push(&mut self, value: Array2<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A differentiable input (parameter or input whose gradient is wanted).
    pub fn input(&mut self, value: Array2<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A constant; no gradient flows into it.
    pub fn constant(&mut self, value: Array2<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.ncols() != vb.nrows() {
            return Err(shape_err("matmul", format!("{:?} x {:?}", va.dim(), vb.dim())));
        }
        let out = va.dot(vb);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    /// `x + b` with `b` a `1 x n` row broadcast over all rows of `x`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var, NnError> {
        let (vx, vb) = (self.value(x), self.value(b));
        if vb.nrows() != 1 || vb.ncols() != vx.ncols() {
            return Err(shape_err("add_bias", format!("{:?} + {:?}", vx.dim(), vb.dim())));
        }
        let out = vx + vb;
        let rg = self.rg(x) || self.rg(b);
        Ok(self.push(out, Op::AddBias(x, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.dim() != vb.dim() {
            return Err(shape_err("add", format!("{:?} + {:?}", va.dim(), vb.dim())));
        }
        let out = va + vb;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn scale(&mut self, x: Var, factor: T) -> Var {
        let out = self.value(x).mapv(|v| v * factor);
        let rg = self.rg(x);
        self.push(out, Op::Scale(x, factor), rg)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).mapv(|v| if v > T::zero() { v } else { T::zero() });
        let rg = self.rg(x);
        self.push(out, Op::Relu(x), rg)
    }

    /// Row `r` of the result is row `index[r]` of `src`, or zeros when
    /// `index[r]` is `None`.
    pub fn gather_rows(&mut self, src: Var, index: &[Option<usize>]) -> Result<Var, NnError> {
        let vs = self.value(src);
        let d = vs.ncols();
        let mut out = Array2::zeros((index.len(), d));
        let mut packed = Vec::with_capacity(index.len());
        for (r, i) in index.iter().enumerate() {
            match *i {
                Some(i) if i < vs.nrows() => {
                    out.row_mut(r).assign(&vs.row(i));
                    packed.push(i as u32);
                }
                Some(i) => return Err(shape_err("gather_rows", format!("row {i} of {}", vs.nrows()))),
                None => packed.push(NONE),
            }
        }
        let rg = self.rg(src);
        Ok(self.push(out, Op::Gather { src, index: packed }, rg))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let out = ndarray::concatenate(Axis(1), &views)
            .map_err(|e| shape_err("concat_cols", e.to_string()))?;
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), rg))
    }

    /// Unpadded stride-1 1D convolution over step-major rows.
    ///
    /// `x` has `len_in * walks` rows, `w` is `(kernel * c_in) x c_out` with tap
    /// `t` occupying rows `t * c_in .. (t + 1) * c_in`, `b` is `1 x c_out`.
    /// The result has `(len_in - kernel + 1) * walks` rows.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var, walks: usize, kernel: usize) -> Result<Var, NnError> {
        let (vx, vw, vb) = (self.value(x), self.value(w), self.value(b));
        let c_in = vx.ncols();
        if walks == 0 || vx.nrows() % walks != 0 {
            return Err(shape_err("conv1d", format!("{} rows for {walks} walks", vx.nrows())));
        }
        let len_in = vx.nrows() / walks;
        if kernel == 0 || len_in < kernel {
            return Err(NnError::WalkTooShort { length: len_in, field: kernel });
        }
        if vw.nrows() != kernel * c_in || vb.dim() != (1, vw.ncols()) {
            return Err(shape_err(
                "conv1d",
                format!("input width {c_in}, kernel {kernel}, weight {:?}, bias {:?}", vw.dim(), vb.dim()),
            ));
        }
        let len_out = len_in - kernel + 1;
        let rows = len_out * walks;
        let mut out = Array2::zeros((rows, vw.ncols()));
        for t in 0..kernel {
            let xs = vx.slice(s![t * walks..t * walks + rows, ..]);
            let ws = vw.slice(s![t * c_in..(t + 1) * c_in, ..]);
            general_mat_mul(T::one(), &xs, &ws, T::one(), &mut out);
        }
        out += vb;
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(out, Op::Conv1d { x, w, b, walks, kernel }, rg))
    }

    /// Weighted segment sum: output row `s` is `Σ weight[r] * x[r]` over rows
    /// with `segment[r] == Some(s)`.
    pub fn pool(&mut self, x: Var, segment: &[Option<usize>], weight: &[T], segments: usize) -> Result<Var, NnError> {
        let vx = self.value(x);
        if segment.len() != vx.nrows() || weight.len() != vx.nrows() {
            return Err(shape_err("pool", format!("{} rows, {} segment ids", vx.nrows(), segment.len())));
        }
        let mut out = Array2::zeros((segments, vx.ncols()));
        let mut packed = Vec::with_capacity(segment.len());
        for (r, s) in segment.iter().enumerate() {
            match *s {
                Some(s) if s < segments => {
                    out.row_mut(s).scaled_add(weight[r], &vx.row(r));
                    packed.push(s as u32);
                }
                Some(s) => return Err(shape_err("pool", format!("segment {s} of {segments}"))),
                None => packed.push(NONE),
            }
        }
        let rg = self.rg(x);
        Ok(self.push(
            out,
            Op::Pool {
                x,
                segment: packed,
                weight: weight.to_vec(),
            },
            rg,
        ))
    }

    /// Multiplies row `r` by `scale[r]`.
    pub fn row_scale(&mut self, x: Var, scale: &[T]) -> Result<Var, NnError> {
        let vx = self.value(x);
        if scale.len() != vx.nrows() {
            return Err(shape_err("row_scale", format!("{} rows, {} scales", vx.nrows(), scale.len())));
        }
        let mut out = vx.clone();
        for (mut row, &c) in out.rows_mut().into_iter().zip(scale) {
            row.mapv_inplace(|v| v * c);
        }
        let rg = self.rg(x);
        Ok(self.push(out, Op::RowScale { x, scale: scale.to_vec() }, rg))
    }

    /// Repeats a `1 x d` row `rows` times.
    pub fn broadcast_rows(&mut self, src: Var, rows: usize) -> Result<Var, NnError> {
        let vs = self.value(src);
        if vs.nrows() != 1 {
            return Err(shape_err("broadcast_rows", format!("{:?}", vs.dim())));
        }
        let out = vs.broadcast((rows, vs.ncols())).expect("1 x d broadcasts").to_owned();
        let rg = self.rg(src);
        Ok(self.push(out, Op::Broadcast { src }, rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let total = self.value(x).sum();
        let rg = self.rg(x);
        self.push(Array2::from_elem((1, 1), total), Op::Sum(x), rg)
    }

    /// Mean squared error over rows where `mask` is set; `pred` is `n x 1`.
    pub fn masked_mse(&mut self, pred: Var, target: &[T], mask: &[bool]) -> Result<Var, NnError> {
        let vp = self.value(pred);
        if vp.ncols() != 1 || vp.nrows() != target.len() || mask.len() != target.len() {
            return Err(shape_err("masked_mse", format!("pred {:?}, {} targets", vp.dim(), target.len())));
        }
        let count = mask.iter().filter(|&&m| m).count();
        let mut total = T::zero();
        for r in 0..target.len() {
            if mask[r] {
                let d = vp[[r, 0]] - target[r];
                total += d * d;
            }
        }
        let loss = if count == 0 { T::zero() } else { total / T::of(count as f64) };
        let rg = self.rg(pred);
        Ok(self.push(
            Array2::from_elem((1, 1), loss),
            Op::MaskedMse {
                pred,
                target: target.to_vec(),
                mask: mask.to_vec(),
                count,
            },
            rg,
        ))
    }

    /// Mean softmax cross-entropy over rows where `mask` is set.
    pub fn masked_cross_entropy(&mut self, logits: Var, labels: &[usize], mask: &[bool]) -> Result<Var, NnError> {
        let vl = self.value(logits);
        let classes = vl.ncols();
        if vl.nrows() != labels.len() || mask.len() != labels.len() || labels.iter().any(|&c| c >= classes) {
            return Err(shape_err("masked_cross_entropy", format!("logits {:?}, {} labels", vl.dim(), labels.len())));
        }
        let mut probs = Array2::zeros(vl.dim());
        let mut total = T::zero();
        let mut count = 0;
        for (r, row) in vl.rows().into_iter().enumerate() {
            let max = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
            let mut z = T::zero();
            for (c, &v) in row.iter().enumerate() {
                let e = (v - max).exp();
                probs[[r, c]] = e;
                z += e;
            }
            probs.row_mut(r).mapv_inplace(|p| p / z);
            if mask[r] {
                count += 1;
                total += z.ln() + max - row[labels[r]];
            }
        }
        let loss = if count == 0 { T::zero() } else { total / T::of(count as f64) };
        let rg = self.rg(logits);
        Ok(self.push(
            Array2::from_elem((1, 1), loss),
            Op::MaskedCrossEntropy {
                logits,
                labels: labels.to_vec(),
                mask: mask.to_vec(),
                probs,
                count,
            },
            rg,
        ))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Grads<T>, NnError> {
        let node = self.nodes.get(loss.0).ok_or(NnError::GraphNotRecorded(loss.0))?;
        if node.value.dim() != (1, 1) {
            let (r, c) = node.value.dim();
            return Err(NnError::NotScalar(r, c));
        }
        let mut grads: Vec<Option<Array2<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Array2::from_elem((1, 1), T::one()));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if node.requires_grad {
                self.propagate(&node.op, &node.value, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        Ok(Grads { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Array2<T>>], v: Var, g: Array2<T>) {
        if !self.rg(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => *existing += &g,
            slot => *slot = Some(g),
        }
    }

    /// Like `accumulate` but builds the contribution in place to avoid a
    /// temporary for large inputs.
    fn slot<'g>(&self, grads: &'g mut [Option<Array2<T>>], v: Var) -> &'g mut Array2<T> {
        let shape = self.shape(v);
        grads[v.0].get_or_insert_with(|| Array2::zeros(shape))
    }

    fn propagate(&self, op: &Op<T>, value: &Array2<T>, g: &Array2<T>, grads: &mut [Option<Array2<T>>]) {
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.rg(*a) {
                    let ga = g.dot(&self.value(*b).t());
                    self.accumulate(grads, *a, ga);
                }
                if self.rg(*b) {
                    let gb = self.value(*a).t().dot(g);
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::AddBias(x, b) => {
                self.accumulate(grads, *x, g.clone());
                if self.rg(*b) {
                    self.accumulate(grads, *b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Scale(x, f) => self.accumulate(grads, *x, g.mapv(|v| v * *f)),
            Op::Relu(x) => {
                let mut gx = g.clone();
                gx.zip_mut_with(value, |d, &y| {
                    if y <= T::zero() {
                        *d = T::zero();
                    }
                });
                self.accumulate(grads, *x, gx);
            }
            Op::Gather { src, index } => {
                if !self.rg(*src) {
                    return;
                }
                let dst = self.slot(grads, *src);
                for (r, &i) in index.iter().enumerate() {
                    if i != NONE {
                        let mut row = dst.row_mut(i as usize);
                        row += &g.row(r);
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for &p in parts {
                    let w = self.value(p).ncols();
                    if self.rg(p) {
                        self.accumulate(grads, p, g.slice(s![.., start..start + w]).to_owned());
                    }
                    start += w;
                }
            }
            Op::Conv1d { x, w, b, walks, kernel } => {
                let vx = self.value(*x);
                let vw = self.value(*w);
                let c_in = vx.ncols();
                let rows = g.nrows();
                if self.rg(*b) {
                    self.accumulate(grads, *b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
                if self.rg(*w) {
                    let gw = self.slot(grads, *w);
                    for t in 0..*kernel {
                        let xs = vx.slice(s![t * walks..t * walks + rows, ..]);
                        let mut gws = gw.slice_mut(s![t * c_in..(t + 1) * c_in, ..]);
                        general_mat_mul(T::one(), &xs.t(), g, T::one(), &mut gws);
                    }
                }
                if self.rg(*x) {
                    let gx = self.slot(grads, *x);
                    for t in 0..*kernel {
                        let ws = vw.slice(s![t * c_in..(t + 1) * c_in, ..]);
                        let mut gxs = gx.slice_mut(s![t * walks..t * walks + rows, ..]);
                        general_mat_mul(T::one(), g, &ws.t(), T::one(), &mut gxs);
                    }
                }
            }
            Op::Pool { x, segment, weight } => {
                if !self.rg(*x) {
                    return;
                }
                let gx = self.slot(grads, *x);
                for (r, &s) in segment.iter().enumerate() {
                    if s != NONE {
                        gx.row_mut(r).scaled_add(weight[r], &g.row(s as usize));
                    }
                }
            }
            Op::RowScale { x, scale } => {
                let mut gx = g.clone();
                for (mut row, &c) in gx.rows_mut().into_iter().zip(scale) {
                    row.mapv_inplace(|v| v * c);
                }
                self.accumulate(grads, *x, gx);
            }
            Op::Broadcast { src } => {
                self.accumulate(grads, *src, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
            }
            Op::Sum(x) => {
                let shape = self.shape(*x);
                self.accumulate(grads, *x, Array2::from_elem(shape, g[[0, 0]]));
            }
            Op::MaskedMse { pred, target, mask, count } => {
                let vp = self.value(*pred);
                let mut gp = Array2::zeros(vp.dim());
                if *count > 0 {
                    let c = g[[0, 0]] * T::of(2.0) / T::of(*count as f64);
                    for r in 0..target.len() {
                        if mask[r] {
                            gp[[r, 0]] = c * (vp[[r, 0]] - target[r]);
                        }
                    }
                }
                self.accumulate(grads, *pred, gp);
            }
            Op::MaskedCrossEntropy {
                logits,
                labels,
                mask,
                probs,
                count,
            } => {
                let mut gl = Array2::zeros(probs.dim());
                if *count > 0 {
                    let c = g[[0, 0]] / T::of(*count as f64);
                    for r in 0..labels.len() {
                        if mask[r] {
                            let mut row = gl.row_mut(r);
                            row.assign(&probs.row(r));
                            row[labels[r]] -= T::one();
                            row.mapv_inplace(|v| v * c);
                        }
                    }
                }
                self.accumulate(grads, *logits, gl);
            }
        }
    }
}
