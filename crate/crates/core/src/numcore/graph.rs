//! Tape-style reverse-mode differentiation over [`Matrix`] values.
//!
//! Nodes are appended in evaluation order, so walking the tape backwards is a
//! valid reverse topological order. Values never change after a node is
//! recorded.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::matrix::{softmax_stable, Matrix};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    ScaleRows(Var, Vec<f64>),
    Tanh(Var),
    Relu(Var),
    Sigmoid(Var),
    Softplus(Var),
    Log(Var),
    ClampMin(Var, f64),
    Softmax(Var),
    RowMean(Var),
    RowSum(Var),
    Sum(Var),
    SelectRows(Var, Vec<usize>),
}

/// A recorded value with its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Node {
    value: Matrix,
    gradient: Matrix,
    op: Op,
    requires_grad: bool,
}

impl Node {
    pub fn value(&self) -> &Matrix {
        &self.value
    }

    pub fn gradient(&self) -> &Matrix {
        &self.gradient
    }

    /// Indices of the nodes this one was computed from.
    pub fn parents(&self) -> Vec<Var> {
        match &self.op {
            Op::Leaf => vec![],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::AddRow(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => {
                vec![*a, *b]
            }
            Op::Scale(a, _)
            | Op::ScaleRows(a, _)
            | Op::Tanh(a)
            | Op::Relu(a)
            | Op::Sigmoid(a)
            | Op::Softplus(a)
            | Op::Log(a)
            | Op::ClampMin(a, _)
            | Op::Softmax(a)
            | Op::RowMean(a)
            | Op::RowSum(a)
            | Op::Sum(a)
            | Op::SelectRows(a, _) => vec![*a],
        }
    }
}

/// Computation graph owned by a single training step.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    #[cfg(test)]
    pub(crate) corrupt_tanh_rule: bool,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub fn softplus(x: f64) -> f64 {
    // log(1 + e^x) = max(x, 0) + log(1 + e^-|x|)
    x.max(0.0) + libm::log1p(libm::exp(-x.abs()))
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn gradient(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].gradient
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool, name: &'static str) -> Result<Var> {
        if !value.all_finite() {
            return Err(Error::NonFinite { op: name });
        }
        let gradient = Matrix::zeros(value.rows(), value.cols());
        self.nodes.push(Node {
            value,
            gradient,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Constant input; no gradient flows past it.
    pub fn constant(&mut self, value: Matrix) -> Var {
        let gradient = Matrix::zeros(value.rows(), value.cols());
        self.nodes.push(Node {
            value,
            gradient,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf.
    pub fn parameter(&mut self, value: Matrix) -> Var {
        let gradient = Matrix::zeros(value.rows(), value.cols());
        self.nodes.push(Node {
            value,
            gradient,
            op: Op::Leaf,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Copies a node's value into a new constant, cutting the gradient path.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.nodes[v.0].value.clone();
        self.constant(value)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        self.push(value, Op::MatMul(a, b), self.rg(&[a, b]), "matmul")
    }

    /// Elementwise sum of equal shapes.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        self.push(value, Op::Add(a, b), self.rg(&[a, b]), "add")
    }

    /// Adds a `1 x n` row (bias) to each row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let value = self.value(a).add_row(self.value(row))?;
        self.push(value, Op::AddRow(a, row), self.rg(&[a, row]), "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        self.push(value, Op::Sub(a, b), self.rg(&[a, b]), "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).hadamard(self.value(b))?;
        self.push(value, Op::Mul(a, b), self.rg(&[a, b]), "mul")
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let value = self.value(a).scale(s);
        self.push(value, Op::Scale(a, s), self.rg(&[a]), "scale")
    }

    /// Multiplies row `i` of `a` by the constant `weights[i]`.
    pub fn scale_rows(&mut self, a: Var, weights: &[f64]) -> Result<Var> {
        let value = self.value(a).scale_rows(weights)?;
        self.push(value, Op::ScaleRows(a, weights.to_vec()), self.rg(&[a]), "scale_rows")
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(libm::tanh);
        self.push(value, Op::Tanh(a), self.rg(&[a]), "tanh")
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(relu);
        self.push(value, Op::Relu(a), self.rg(&[a]), "relu")
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(sigmoid);
        self.push(value, Op::Sigmoid(a), self.rg(&[a]), "sigmoid")
    }

    /// `log(1 + e^x)`, computed without overflow.
    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(softplus);
        self.push(value, Op::Softplus(a), self.rg(&[a]), "softplus")
    }

    /// Natural log. Rejects non-positive entries; callers clamp first.
    pub fn log(&mut self, a: Var) -> Result<Var> {
        let input = self.value(a);
        if let Some(bad) = input.data().iter().find(|v| **v <= 0.0) {
            return Err(Error::Domain {
                op: "log",
                detail: format!("non-positive input {bad}"),
            });
        }
        let value = input.map(libm::log);
        self.push(value, Op::Log(a), self.rg(&[a]), "log")
    }

    pub fn clamp_min(&mut self, a: Var, floor: f64) -> Result<Var> {
        let value = self.value(a).map(|v| v.max(floor));
        self.push(value, Op::ClampMin(a, floor), self.rg(&[a]), "clamp_min")
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let value = softmax_stable(self.value(a))?;
        self.push(value, Op::Softmax(a), self.rg(&[a]), "softmax")
    }

    /// Mean of each row, `n x c -> n x 1`.
    pub fn row_mean(&mut self, a: Var) -> Result<Var> {
        let m = self.value(a);
        let c = m.cols() as f64;
        let value = Matrix::new(m.rows(), 1, m.row_sums().into_iter().map(|s| s / c).collect())?;
        self.push(value, Op::RowMean(a), self.rg(&[a]), "row_mean")
    }

    /// Sum of each row, `n x c -> n x 1`.
    pub fn row_sum(&mut self, a: Var) -> Result<Var> {
        let m = self.value(a);
        let value = Matrix::new(m.rows(), 1, m.row_sums())?;
        self.push(value, Op::RowSum(a), self.rg(&[a]), "row_sum")
    }

    /// Sum of all entries, `-> 1 x 1`.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let value = Matrix::scalar(self.value(a).sum());
        self.push(value, Op::Sum(a), self.rg(&[a]), "sum")
    }

    /// Mean of all entries, `-> 1 x 1`.
    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).data().len();
        if n == 0 {
            return Err(Error::dim("mean", self.value(a).shape(), (1, 1)));
        }
        let s = self.sum(a)?;
        self.scale(s, 1.0 / n as f64)
    }

    /// Gathers rows by index; indices may repeat.
    pub fn select_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let value = self.value(a).select_rows(indices)?;
        self.push(value, Op::SelectRows(a, indices.to_vec()), self.rg(&[a]), "select_rows")
    }

    /// Clears every accumulated gradient.
    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            for g in node.gradient.data_mut() {
                *g = 0.0;
            }
        }
    }

    /// Accumulates `d(loss)/d(node)` into every node's gradient.
    ///
    /// Each call propagates a fresh adjoint, so calling twice without
    /// [`Graph::zero_grad`] doubles every gradient.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let shape = self.value(loss).shape();
        if shape != (1, 1) {
            return Err(Error::NotScalar {
                rows: shape.0,
                cols: shape.1,
            });
        }
        let mut adjoint: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        adjoint[loss.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(upstream) = adjoint[idx].take() else {
                continue;
            };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            self.propagate(idx, &upstream, &mut adjoint)?;
            self.nodes[idx].gradient.add_assign(&upstream);
        }
        Ok(())
    }

    fn propagate(&self, idx: usize, up: &Matrix, adjoint: &mut [Option<Matrix>]) -> Result<()> {
        let node = &self.nodes[idx];
        let mut send = |target: Var, g: Matrix| {
            if !self.nodes[target.0].requires_grad {
                return;
            }
            match &mut adjoint[target.0] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.requires_grad(*a) {
                    send(*a, up.matmul_nt(self.value(*b))?);
                }
                if self.requires_grad(*b) {
                    send(*b, self.value(*a).matmul_tn(up)?);
                }
            }
            Op::Add(a, b) => {
                send(*a, up.clone());
                send(*b, up.clone());
            }
            Op::AddRow(a, row) => {
                send(*a, up.clone());
                send(*row, Matrix::new(1, up.cols(), up.col_sums())?);
            }
            Op::Sub(a, b) => {
                send(*a, up.clone());
                send(*b, up.scale(-1.0));
            }
            Op::Mul(a, b) => {
                if self.requires_grad(*a) {
                    send(*a, up.hadamard(self.value(*b))?);
                }
                if self.requires_grad(*b) {
                    send(*b, up.hadamard(self.value(*a))?);
                }
            }
            Op::Scale(a, s) => send(*a, up.scale(*s)),
            Op::ScaleRows(a, w) => send(*a, up.scale_rows(w)?),
            Op::Tanh(a) => {
                #[cfg(test)]
                let bias = if self.corrupt_tanh_rule { 0.5 } else { 0.0 };
                #[cfg(not(test))]
                let bias = 0.0;
                let g = up.zip_map(&node.value, "tanh", |u, y| u * (1.0 - y * y + bias))?;
                send(*a, g);
            }
            Op::Relu(a) => {
                let g = up.zip_map(self.value(*a), "relu", |u, x| if x > 0.0 { u } else { 0.0 })?;
                send(*a, g);
            }
            Op::Sigmoid(a) => {
                let g = up.zip_map(&node.value, "sigmoid", |u, y| u * y * (1.0 - y))?;
                send(*a, g);
            }
            Op::Softplus(a) => {
                let g = up.zip_map(self.value(*a), "softplus", |u, x| u * sigmoid(x))?;
                send(*a, g);
            }
            Op::Log(a) => {
                let g = up.zip_map(self.value(*a), "log", |u, x| u / x)?;
                send(*a, g);
            }
            Op::ClampMin(a, floor) => {
                let g = up.zip_map(self.value(*a), "clamp_min", |u, x| if x >= *floor { u } else { 0.0 })?;
                send(*a, g);
            }
            Op::Softmax(a) => {
                let y = &node.value;
                let mut g = Matrix::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let (yr, ur) = (y.row(r), up.row(r));
                    let dot: f64 = yr.iter().zip(ur).map(|(p, u)| p * u).sum();
                    for (j, out) in g.row_mut(r).iter_mut().enumerate() {
                        *out = yr[j] * (ur[j] - dot);
                    }
                }
                send(*a, g);
            }
            Op::RowMean(a) => {
                let (rows, cols) = self.value(*a).shape();
                let mut g = Matrix::zeros(rows, cols);
                for r in 0..rows {
                    let u = up.get(r, 0) / cols as f64;
                    g.row_mut(r).fill(u);
                }
                send(*a, g);
            }
            Op::RowSum(a) => {
                let (rows, cols) = self.value(*a).shape();
                let mut g = Matrix::zeros(rows, cols);
                for r in 0..rows {
                    g.row_mut(r).fill(up.get(r, 0));
                }
                send(*a, g);
            }
            Op::Sum(a) => {
                let (rows, cols) = self.value(*a).shape();
                send(*a, Matrix::filled(rows, cols, up.value()));
            }
            Op::SelectRows(a, indices) => {
                let (rows, cols) = self.value(*a).shape();
                let mut g = Matrix::zeros(rows, cols);
                for (k, &src) in indices.iter().enumerate() {
                    for (o, u) in g.row_mut(src).iter_mut().zip(up.row(k)) {
                        *o += u;
                    }
                }
                send(*a, g);
            }
        }
        Ok(())
    }
}

pub(crate) fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}
