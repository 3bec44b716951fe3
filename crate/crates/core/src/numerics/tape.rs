//! Reverse-mode gradient tape over 1-D activations.
//!
//! Activations are plain vectors stored on the tape; weights live in a
//! [`ParamStore`] and are referenced by id, so a forward pass only borrows the
//! store immutably and [`Tape::backward`] scatters gradients into it.

use rand::Rng;

use super::{NumericError, ParamId, ParamStore};
use crate::SeededRng;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tanh" => Some(Activation::Tanh),
            "relu" => Some(Activation::Relu),
            _ => None,
        }
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Linear { w: ParamId, x: usize, b: Option<ParamId> },
    Embedding { table: ParamId, row: usize },
    Concat(Vec<usize>),
    Add(Vec<usize>),
    Tanh(usize),
    Relu(usize),
    Mask { x: usize, mask: Vec<f64> },
    Mean(Vec<usize>),
    LogSoftmax(usize),
    Pick { x: usize, index: usize },
    Scale { x: usize, factor: f64 },
    Dot { x: usize, weights: Vec<f64> },
    WeightedSum(Vec<(usize, f64)>),
}

#[derive(Debug)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    first_non_finite: Option<usize>,
}

fn acc(grads: &mut [Vec<f64>], idx: usize, len: usize) -> &mut [f64] {
    let g = &mut grads[idx];
    if g.is_empty() {
        g.resize(len, 0.0);
    }
    g
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
        self.first_non_finite = None;
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        let idx = self.nodes.len();
        if self.first_non_finite.is_none() && value.iter().any(|v| !v.is_finite()) {
            self.first_non_finite = Some(idx);
        }
        self.nodes.push(Node { value, op });
        Var(idx)
    }

    fn check(&self, v: Var) -> Result<usize, NumericError> {
        if v.0 < self.nodes.len() {
            Ok(v.0)
        } else {
            Err(NumericError::Usage(format!("variable {} is not on this tape", v.0)))
        }
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    /// Fails if any recorded value is NaN or infinite.
    pub fn ensure_finite(&self) -> Result<(), NumericError> {
        match self.first_non_finite {
            Some(i) => Err(NumericError::NonFinite(format!("tape node {i} holds a non-finite value"))),
            None => Ok(()),
        }
    }

    pub fn constant(&mut self, values: Vec<f64>) -> Var {
        self.push(values, Op::Leaf)
    }

    /// `W·x (+ b)` with `W` of shape `[out, in]`.
    pub fn linear(
        &mut self,
        store: &ParamStore,
        w: ParamId,
        x: Var,
        b: Option<ParamId>,
    ) -> Result<Var, NumericError> {
        let xi = self.check(x)?;
        let wt = &store.get(w).value;
        let (rows, cols) = (wt.rows(), wt.cols());
        let xv = &self.nodes[xi].value;
        if wt.shape().len() != 2 || cols != xv.len() {
            return Err(NumericError::Shape(format!(
                "linear `{}` has shape {:?} but input length is {}",
                store.get(w).name,
                wt.shape(),
                xv.len()
            )));
        }
        let wd = wt.data();
        let mut out: Vec<f64> = (0..rows)
            .map(|r| wd[r * cols..(r + 1) * cols].iter().zip(xv).map(|(a, b)| a * b).sum())
            .collect();
        if let Some(b) = b {
            let bv = store.get(b).value.data();
            if bv.len() != rows {
                return Err(NumericError::Shape(format!(
                    "bias `{}` has length {} but layer has {} outputs",
                    store.get(b).name,
                    bv.len(),
                    rows
                )));
            }
            out.iter_mut().zip(bv).for_each(|(o, b)| *o += b);
        }
        Ok(self.push(out, Op::Linear { w, x: xi, b }))
    }

    pub fn embedding(
        &mut self,
        store: &ParamStore,
        table: ParamId,
        row: usize,
    ) -> Result<Var, NumericError> {
        let t = &store.get(table).value;
        if t.shape().len() != 2 || row >= t.rows() {
            return Err(NumericError::Index(format!(
                "row {} out of range for table `{}` with {} rows",
                row,
                store.get(table).name,
                t.rows()
            )));
        }
        let value = t.row(row).to_vec();
        Ok(self.push(value, Op::Embedding { table, row }))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, NumericError> {
        let mut idx = Vec::with_capacity(parts.len());
        let mut value = Vec::new();
        for &p in parts {
            let i = self.check(p)?;
            value.extend_from_slice(&self.nodes[i].value);
            idx.push(i);
        }
        Ok(self.push(value, Op::Concat(idx)))
    }

    pub fn add(&mut self, parts: &[Var]) -> Result<Var, NumericError> {
        let idx = self.same_len(parts, "add")?;
        let mut value = self.nodes[idx[0]].value.clone();
        for &i in &idx[1..] {
            value.iter_mut().zip(&self.nodes[i].value).for_each(|(a, b)| *a += b);
        }
        Ok(self.push(value, Op::Add(idx)))
    }

    pub fn mean(&mut self, parts: &[Var]) -> Result<Var, NumericError> {
        let idx = self.same_len(parts, "mean")?;
        let n = idx.len() as f64;
        let mut value = vec![0.0; self.nodes[idx[0]].value.len()];
        for &i in &idx {
            value.iter_mut().zip(&self.nodes[i].value).for_each(|(a, b)| *a += b);
        }
        value.iter_mut().for_each(|v| *v /= n);
        Ok(self.push(value, Op::Mean(idx)))
    }

    fn same_len(&self, parts: &[Var], what: &str) -> Result<Vec<usize>, NumericError> {
        if parts.is_empty() {
            return Err(NumericError::Shape(format!("{what} of no inputs")));
        }
        let idx = parts.iter().map(|&p| self.check(p)).collect::<Result<Vec<_>, _>>()?;
        let n = self.nodes[idx[0]].value.len();
        if idx.iter().any(|&i| self.nodes[i].value.len() != n) {
            return Err(NumericError::Shape(format!("{what} inputs differ in length")));
        }
        Ok(idx)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.nodes[x.0].value.iter().map(|v| v.tanh()).collect();
        self.push(value, Op::Tanh(x.0))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.nodes[x.0].value.iter().map(|v| v.max(0.0)).collect();
        self.push(value, Op::Relu(x.0))
    }

    pub fn activation(&mut self, act: Activation, x: Var) -> Var {
        match act {
            Activation::Tanh => self.tanh(x),
            Activation::Relu => self.relu(x),
        }
    }

    /// Inverted dropout: each element is zeroed with probability `rate`
    /// (one uniform draw per element, dropped when the draw is below `rate`)
    /// and survivors are scaled by `1 / (1 - rate)`.
    pub fn dropout(&mut self, x: Var, rate: f64, rng: &mut SeededRng) -> Result<Var, NumericError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(NumericError::Usage(format!("dropout rate {rate} outside [0, 1)")));
        }
        if rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - rate);
        let n = self.nodes[x.0].value.len();
        let mask: Vec<f64> =
            (0..n).map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep }).collect();
        let value = self.nodes[x.0].value.iter().zip(&mask).map(|(v, m)| v * m).collect();
        Ok(self.push(value, Op::Mask { x: x.0, mask }))
    }

    pub fn log_softmax(&mut self, x: Var) -> Var {
        let value = super::tensor::log_softmax_values(&self.nodes[x.0].value);
        self.push(value, Op::LogSoftmax(x.0))
    }

    pub fn pick(&mut self, x: Var, index: usize) -> Result<Var, NumericError> {
        let xi = self.check(x)?;
        let v = *self.nodes[xi]
            .value
            .get(index)
            .ok_or_else(|| NumericError::Index(format!("pick index {index} out of range")))?;
        Ok(self.push(vec![v], Op::Pick { x: xi, index }))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let value = self.nodes[x.0].value.iter().map(|v| v * factor).collect();
        self.push(value, Op::Scale { x: x.0, factor })
    }

    /// Scalar `Σ x_i · w_i` against constant weights.
    pub fn dot(&mut self, x: Var, weights: &[f64]) -> Result<Var, NumericError> {
        let xi = self.check(x)?;
        if self.nodes[xi].value.len() != weights.len() {
            return Err(NumericError::Shape("dot operands differ in length".into()));
        }
        let v = self.nodes[xi].value.iter().zip(weights).map(|(a, b)| a * b).sum();
        Ok(self.push(vec![v], Op::Dot { x: xi, weights: weights.to_vec() }))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var, NumericError> {
        let n = self.nodes[x.0].value.len();
        self.dot(x, &vec![1.0; n])
    }

    /// Scalar `Σ c_k · s_k` over scalar variables.
    pub fn weighted_sum(&mut self, terms: &[(Var, f64)]) -> Result<Var, NumericError> {
        let mut idx = Vec::with_capacity(terms.len());
        let mut total = 0.0;
        for &(v, c) in terms {
            let i = self.check(v)?;
            if self.nodes[i].value.len() != 1 {
                return Err(NumericError::Shape("weighted_sum expects scalar terms".into()));
            }
            total += c * self.nodes[i].value[0];
            idx.push((i, c));
        }
        Ok(self.push(vec![total], Op::WeightedSum(idx)))
    }

    /// Accumulate `loss_grad · ∂loss/∂p` into the gradient slot of every
    /// parameter reachable from `loss`, then drain the tape.
    pub fn backward(
        &mut self,
        loss: Var,
        loss_grad: f64,
        store: &mut ParamStore,
    ) -> Result<(), NumericError> {
        if self.nodes.is_empty() {
            return Err(NumericError::Usage("backward on an empty or drained tape".into()));
        }
        let li = self.check(loss)?;
        if self.nodes[li].value.len() != 1 {
            return Err(NumericError::Shape("backward needs a scalar loss".into()));
        }
        self.ensure_finite()?;

        let mut grads: Vec<Vec<f64>> = vec![Vec::new(); li + 1];
        grads[li] = vec![loss_grad];
        for i in (0..=li).rev() {
            let g = std::mem::take(&mut grads[i]);
            if g.is_empty() {
                continue;
            }
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Linear { w, x, b } => {
                    let xv = &self.nodes[*x].value;
                    let cols = xv.len();
                    {
                        let p = store.get_mut(*w);
                        let gw = p.grad.data_mut();
                        for (r, &gr) in g.iter().enumerate() {
                            if gr != 0.0 {
                                let row = &mut gw[r * cols..(r + 1) * cols];
                                row.iter_mut().zip(xv).for_each(|(a, xj)| *a += gr * xj);
                            }
                        }
                    }
                    if let Some(b) = b {
                        let gb = store.get_mut(*b).grad.data_mut();
                        gb.iter_mut().zip(&g).for_each(|(a, gr)| *a += gr);
                    }
                    let wd = store.get(*w).value.data();
                    let gx = acc(&mut grads, *x, cols);
                    for (r, &gr) in g.iter().enumerate() {
                        if gr != 0.0 {
                            let row = &wd[r * cols..(r + 1) * cols];
                            gx.iter_mut().zip(row).for_each(|(a, wj)| *a += gr * wj);
                        }
                    }
                }
                Op::Embedding { table, row } => {
                    let p = store.get_mut(*table);
                    let cols = p.grad.cols();
                    let slot = &mut p.grad.data_mut()[row * cols..(row + 1) * cols];
                    slot.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let n = self.nodes[p].value.len();
                        let gp = acc(&mut grads, p, n);
                        gp.iter_mut().zip(&g[off..off + n]).for_each(|(a, b)| *a += b);
                        off += n;
                    }
                }
                Op::Add(parts) => {
                    for &p in parts {
                        let gp = acc(&mut grads, p, g.len());
                        gp.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                    }
                }
                Op::Mean(parts) => {
                    let k = 1.0 / parts.len() as f64;
                    for &p in parts {
                        let gp = acc(&mut grads, p, g.len());
                        gp.iter_mut().zip(&g).for_each(|(a, b)| *a += b * k);
                    }
                }
                Op::Tanh(x) => {
                    let y = &node.value;
                    let gx = acc(&mut grads, *x, g.len());
                    for ((a, gy), yv) in gx.iter_mut().zip(&g).zip(y) {
                        *a += gy * (1.0 - yv * yv);
                    }
                }
                Op::Relu(x) => {
                    let xv = &self.nodes[*x].value;
                    let gx = acc(&mut grads, *x, g.len());
                    for ((a, gy), xv) in gx.iter_mut().zip(&g).zip(xv) {
                        if *xv > 0.0 {
                            *a += gy;
                        }
                    }
                }
                Op::Mask { x, mask } => {
                    let gx = acc(&mut grads, *x, g.len());
                    for ((a, gy), m) in gx.iter_mut().zip(&g).zip(mask) {
                        *a += gy * m;
                    }
                }
                Op::LogSoftmax(x) => {
                    let total: f64 = g.iter().sum();
                    let y = &node.value;
                    let gx = acc(&mut grads, *x, g.len());
                    for ((a, gy), yv) in gx.iter_mut().zip(&g).zip(y) {
                        *a += gy - yv.exp() * total;
                    }
                }
                Op::Pick { x, index } => {
                    let n = self.nodes[*x].value.len();
                    acc(&mut grads, *x, n)[*index] += g[0];
                }
                Op::Scale { x, factor } => {
                    let gx = acc(&mut grads, *x, g.len());
                    gx.iter_mut().zip(&g).for_each(|(a, b)| *a += b * factor);
                }
                Op::Dot { x, weights } => {
                    let gx = acc(&mut grads, *x, weights.len());
                    gx.iter_mut().zip(weights).for_each(|(a, w)| *a += g[0] * w);
                }
                Op::WeightedSum(terms) => {
                    for &(t, c) in terms {
                        acc(&mut grads, t, 1)[0] += g[0] * c;
                    }
                }
            }
        }
        self.clear();
        Ok(())
    }
}

/// One affine layer of an MLP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layer {
    pub weight: ParamId,
    pub bias: ParamId,
}

/// affine → activation → (inverted dropout when training), per layer.
#[allow(clippy::too_many_arguments)]
pub fn mlp_forward(
    tape: &mut Tape,
    store: &ParamStore,
    layers: &[Layer],
    x: Var,
    activation: Activation,
    dropout_rate: f64,
    training: bool,
    rng: &mut SeededRng,
) -> Result<Var, NumericError> {
    let mut h = x;
    for layer in layers {
        let z = tape.linear(store, layer.weight, h, Some(layer.bias))?;
        h = tape.activation(activation, z);
        if training {
            h = tape.dropout(h, dropout_rate, rng)?;
        }
    }
    Ok(h)
}
