//! Reverse-mode automatic differentiation on a linear tape.
//!
//! A [`Graph`] records every forward operation in order; [`Graph::backward`]
//! replays the tape once in reverse, accumulating gradients additively
//! across fan-out. Gradients only flow into nodes that (transitively)
//! require them, so frozen inputs never receive a gradient.
//!
//! The op set is exactly what the controller needs: matrix product,
//! elementwise arithmetic, tanh, row-wise softmax, layer norm, row
//! pooling/concatenation/slicing, scaling by a routing weight, and cosine
//! similarity. All values are rank-2 [`Tensor`]s; losses are `1 x 1`.

use super::tensor::Tensor;
use super::NumericsError;

/// Handle to a node on the tape. Only valid for the graph that issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// a (m x k) . b (k x n)
    Matmul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    /// Row vector broadcast-added to every row of the matrix.
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    /// 1 - x, elementwise.
    OneMinus(Var),
    Tanh(Var),
    SoftmaxRows(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
    },
    MeanRows(Var),
    SumAll(Var),
    ConcatRows(Var, Var),
    /// First n rows of the input.
    TakeRows(Var, usize),
    /// x scaled by entry `col` of a 1 x K weight vector.
    ScaleByEntry {
        x: Var,
        weights: Var,
        col: usize,
    },
    /// Cosine similarity of two 1 x d vectors; output 1 x 1.
    Cosine(Var, Var),
}

struct Node {
    value: Tensor,
    grad: Option<Tensor>,
    requires_grad: bool,
    op: Op,
}

/// Layer-norm variance stabilizer.
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Tape of recorded operations plus their forward values.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    /// Test hook: scales the input gradients of one recorded matmul,
    /// simulating a broken backward rule.
    corrupt: Option<Corruption>,
}

#[derive(Debug, Clone, Copy)]
struct Corruption {
    factor: f64,
    target: Option<usize>,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    /// Arm the corruption hook: the first matmul recorded after this call
    /// has its backward contributions multiplied by `factor`.
    pub fn corrupt_first_matmul(&mut self, factor: f64) {
        self.corrupt = Some(Corruption {
            factor,
            target: None,
        });
    }

    fn push(&mut self, value: Tensor, requires_grad: bool, op: Op) -> Var {
        if let (Op::Matmul(..), Some(c)) = (&op, &mut self.corrupt) {
            if c.target.is_none() {
                c.target = Some(self.nodes.len());
            }
        }
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn requires(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Trainable leaf.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, true, Op::Leaf)
    }

    /// Frozen input; never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, false, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last backward pass, if any reached this node.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let value = self.nodes[a.0].value.matmul(&self.nodes[b.0].value)?;
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(value, rg, Op::Matmul(a, b)))
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let value = self.nodes[x.0].value.transposed();
        let rg = self.requires(x);
        self.push(value, rg, Op::Transpose(x))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let value = self.nodes[a.0].value.add(&self.nodes[b.0].value)?;
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(value, rg, Op::Add(a, b)))
    }

    /// `x` is `n x d`, `row` is `1 x d`; adds the row to every row of x.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var, NumericsError> {
        let xv = &self.nodes[x.0].value;
        let rv = &self.nodes[row.0].value;
        if rv.rows() != 1 || rv.cols() != xv.cols() {
            return Err(NumericsError::ShapeMismatch {
                op: "add_row",
                lhs: xv.shape(),
                rhs: rv.shape(),
            });
        }
        let mut value = xv.clone();
        for r in 0..value.rows() {
            for c in 0..value.cols() {
                let v = value.at(r, c) + rv.at(0, c);
                value.set(r, c, v);
            }
        }
        let rg = self.requires(x) || self.requires(row);
        Ok(self.push(value, rg, Op::AddRow(x, row)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let value = self.nodes[a.0]
            .value
            .zip_with(&self.nodes[b.0].value, "mul", |x, y| x * y)?;
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(value, rg, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Var {
        let value = self.nodes[x.0].value.scaled(k);
        let rg = self.requires(x);
        self.push(value, rg, Op::Scale(x, k))
    }

    /// `1 - x` elementwise; turns a cosine into a loss.
    pub fn one_minus(&mut self, x: Var) -> Var {
        let value = self.nodes[x.0].value.map(|v| 1.0 - v);
        let rg = self.requires(x);
        self.push(value, rg, Op::OneMinus(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.nodes[x.0].value.map(f64::tanh);
        let rg = self.requires(x);
        self.push(value, rg, Op::Tanh(x))
    }

    /// Numerically stable softmax applied to each row independently.
    /// Outputs are strictly positive (underflowed entries are floored at
    /// the smallest positive normal) and each row sums to 1 within 1e-12.
    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let xv = &self.nodes[x.0].value;
        let mut value = xv.clone();
        for r in 0..value.rows() {
            let row = &mut value.data_mut()[r * xv.cols()..(r + 1) * xv.cols()];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v = (*v / sum).max(f64::MIN_POSITIVE);
            }
        }
        let rg = self.requires(x);
        self.push(value, rg, Op::SoftmaxRows(x))
    }

    /// Per-row standardization (epsilon-stabilized) followed by the
    /// affine gain/bias, both `1 x d`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var, NumericsError> {
        let xv = &self.nodes[x.0].value;
        let gv = &self.nodes[gain.0].value;
        let bv = &self.nodes[bias.0].value;
        let d = xv.cols();
        if gv.shape() != (1, d) || bv.shape() != (1, d) {
            return Err(NumericsError::ShapeMismatch {
                op: "layer_norm",
                lhs: xv.shape(),
                rhs: gv.shape(),
            });
        }
        let mut value = xv.clone();
        for r in 0..xv.rows() {
            let row = xv.row_slice(r);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for c in 0..d {
                let norm = (row[c] - mean) * inv;
                value.set(r, c, gv.at(0, c) * norm + bv.at(0, c));
            }
        }
        let rg = self.requires(x) || self.requires(gain) || self.requires(bias);
        Ok(self.push(value, rg, Op::LayerNorm { x, gain, bias }))
    }

    /// Column-wise mean over rows: `n x d` -> `1 x d`.
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let value = self.nodes[x.0].value.mean_rows();
        let rg = self.requires(x);
        self.push(value, rg, Op::MeanRows(x))
    }

    /// Sum of all entries: `n x d` -> `1 x 1`.
    pub fn sum_all(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.nodes[x.0].value.data().iter().sum());
        let rg = self.requires(x);
        self.push(value, rg, Op::SumAll(x))
    }

    /// Stack b's rows under a's rows; both must share the column count.
    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let av = &self.nodes[a.0].value;
        let bv = &self.nodes[b.0].value;
        if av.cols() != bv.cols() {
            return Err(NumericsError::ShapeMismatch {
                op: "concat_rows",
                lhs: av.shape(),
                rhs: bv.shape(),
            });
        }
        let mut data = Vec::with_capacity(av.len() + bv.len());
        data.extend_from_slice(av.data());
        data.extend_from_slice(bv.data());
        let value = Tensor::new(av.rows() + bv.rows(), av.cols(), data)?;
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(value, rg, Op::ConcatRows(a, b)))
    }

    /// First `n` rows of the input.
    pub fn take_rows(&mut self, x: Var, n: usize) -> Result<Var, NumericsError> {
        let xv = &self.nodes[x.0].value;
        if n == 0 || n > xv.rows() {
            return Err(NumericsError::ShapeMismatch {
                op: "take_rows",
                lhs: xv.shape(),
                rhs: (n, xv.cols()),
            });
        }
        let value = Tensor::new(n, xv.cols(), xv.data()[..n * xv.cols()].to_vec())?;
        let rg = self.requires(x);
        Ok(self.push(value, rg, Op::TakeRows(x, n)))
    }

    /// Scale every entry of `x` by entry `col` of the `1 x K` weight
    /// vector; the gradient flows into both operands.
    pub fn scale_by_entry(
        &mut self,
        x: Var,
        weights: Var,
        col: usize,
    ) -> Result<Var, NumericsError> {
        let wv = &self.nodes[weights.0].value;
        if wv.rows() != 1 || col >= wv.cols() {
            return Err(NumericsError::ShapeMismatch {
                op: "scale_by_entry",
                lhs: wv.shape(),
                rhs: (1, col + 1),
            });
        }
        let w = wv.at(0, col);
        let value = self.nodes[x.0].value.scaled(w);
        let rg = self.requires(x) || self.requires(weights);
        Ok(self.push(value, rg, Op::ScaleByEntry { x, weights, col }))
    }

    /// Cosine similarity of two `1 x d` vectors, differentiable in both.
    /// Errors when either vector has (near-)zero norm.
    pub fn cosine(&mut self, u: Var, v: Var) -> Result<Var, NumericsError> {
        let uv = &self.nodes[u.0].value;
        let vv = &self.nodes[v.0].value;
        if uv.rows() != 1 || uv.shape() != vv.shape() {
            return Err(NumericsError::ShapeMismatch {
                op: "cosine",
                lhs: uv.shape(),
                rhs: vv.shape(),
            });
        }
        let nu = uv.l2_norm();
        let nv = vv.l2_norm();
        if nu <= 1e-12 || nv <= 1e-12 {
            return Err(NumericsError::DegenerateVector { norm: nu.min(nv) });
        }
        let value = Tensor::scalar(uv.dot(vv)? / (nu * nv));
        let rg = self.requires(u) || self.requires(v);
        Ok(self.push(value, rg, Op::Cosine(u, v)))
    }

    fn accumulate(grads: &mut [Option<Tensor>], target: usize, contrib: Tensor) {
        match &mut grads[target] {
            Some(g) => {
                for (a, b) in g.data_mut().iter_mut().zip(contrib.data()) {
                    *a += b;
                }
            }
            slot @ None => *slot = Some(contrib),
        }
    }

    /// Reverse pass from a scalar loss. Visits recorded operations in
    /// reverse order exactly once and stores gradients on every node that
    /// requires them; frozen nodes keep `grad == None`.
    pub fn backward(&mut self, loss: Var) -> Result<(), NumericsError> {
        let loss_shape = self.nodes[loss.0].value.shape();
        if loss_shape != (1, 1) {
            return Err(NumericsError::NonScalarLoss { shape: loss_shape });
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(mut dy) = grads[idx].clone() else {
                continue;
            };
            if let Some(c) = self.corrupt {
                if c.target == Some(idx) {
                    dy = dy.scaled(c.factor);
                }
            }
            let op = self.nodes[idx].op.clone();
            match op {
                Op::Leaf => {}
                Op::Matmul(a, b) => {
                    if self.requires(a) {
                        let bt = self.nodes[b.0].value.transposed();
                        Self::accumulate(&mut grads, a.0, dy.matmul(&bt)?);
                    }
                    if self.requires(b) {
                        let at = self.nodes[a.0].value.transposed();
                        Self::accumulate(&mut grads, b.0, at.matmul(&dy)?);
                    }
                }
                Op::Transpose(x) => {
                    if self.requires(x) {
                        Self::accumulate(&mut grads, x.0, dy.transposed());
                    }
                }
                Op::Add(a, b) => {
                    if self.requires(a) {
                        Self::accumulate(&mut grads, a.0, dy.clone());
                    }
                    if self.requires(b) {
                        Self::accumulate(&mut grads, b.0, dy);
                    }
                }
                Op::AddRow(x, row) => {
                    if self.requires(row) {
                        let mut rsum = Tensor::zeros(1, dy.cols());
                        for r in 0..dy.rows() {
                            for c in 0..dy.cols() {
                                let v = rsum.at(0, c) + dy.at(r, c);
                                rsum.set(0, c, v);
                            }
                        }
                        Self::accumulate(&mut grads, row.0, rsum);
                    }
                    if self.requires(x) {
                        Self::accumulate(&mut grads, x.0, dy);
                    }
                }
                Op::Mul(a, b) => {
                    if self.requires(a) {
                        let contrib = dy.zip_with(&self.nodes[b.0].value, "mul", |g, v| g * v)?;
                        Self::accumulate(&mut grads, a.0, contrib);
                    }
                    if self.requires(b) {
                        let contrib = dy.zip_with(&self.nodes[a.0].value, "mul", |g, v| g * v)?;
                        Self::accumulate(&mut grads, b.0, contrib);
                    }
                }
                Op::Scale(x, k) => {
                    if self.requires(x) {
                        Self::accumulate(&mut grads, x.0, dy.scaled(k));
                    }
                }
                Op::OneMinus(x) => {
                    if self.requires(x) {
                        Self::accumulate(&mut grads, x.0, dy.scaled(-1.0));
                    }
                }
                Op::Tanh(x) => {
                    if self.requires(x) {
                        let y = &self.nodes[idx].value;
                        let contrib = dy.zip_with(y, "tanh", |g, t| g * (1.0 - t * t))?;
                        Self::accumulate(&mut grads, x.0, contrib);
                    }
                }
                Op::SoftmaxRows(x) => {
                    if self.requires(x) {
                        let p = &self.nodes[idx].value;
                        let mut dx = Tensor::zeros(p.rows(), p.cols());
                        for r in 0..p.rows() {
                            let dot: f64 = (0..p.cols()).map(|c| dy.at(r, c) * p.at(r, c)).sum();
                            for c in 0..p.cols() {
                                dx.set(r, c, p.at(r, c) * (dy.at(r, c) - dot));
                            }
                        }
                        Self::accumulate(&mut grads, x.0, dx);
                    }
                }
                Op::LayerNorm { x, gain, bias } => {
                    let xv = self.nodes[x.0].value.clone();
                    let gv = self.nodes[gain.0].value.clone();
                    let d = xv.cols();
                    // Recompute per-row statistics; cheaper than caching.
                    let mut dx = Tensor::zeros(xv.rows(), d);
                    let mut dg = Tensor::zeros(1, d);
                    let mut db = Tensor::zeros(1, d);
                    for r in 0..xv.rows() {
                        let row = xv.row_slice(r);
                        let mean = row.iter().sum::<f64>() / d as f64;
                        let var =
                            row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
                        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
                        let norm: Vec<f64> = row.iter().map(|v| (v - mean) * inv).collect();
                        let dnorm: Vec<f64> =
                            (0..d).map(|c| dy.at(r, c) * gv.at(0, c)).collect();
                        let mean_dnorm = dnorm.iter().sum::<f64>() / d as f64;
                        let mean_dnorm_norm =
                            dnorm.iter().zip(&norm).map(|(a, b)| a * b).sum::<f64>() / d as f64;
                        for c in 0..d {
                            dx.set(
                                r,
                                c,
                                inv * (dnorm[c] - mean_dnorm - norm[c] * mean_dnorm_norm),
                            );
                            let g = dg.at(0, c) + dy.at(r, c) * norm[c];
                            dg.set(0, c, g);
                            let b = db.at(0, c) + dy.at(r, c);
                            db.set(0, c, b);
                        }
                    }
                    if self.requires(x) {
                        Self::accumulate(&mut grads, x.0, dx);
                    }
                    if self.requires(gain) {
                        Self::accumulate(&mut grads, gain.0, dg);
                    }
                    if self.requires(bias) {
                        Self::accumulate(&mut grads, bias.0, db);
                    }
                }
                Op::MeanRows(x) => {
                    if self.requires(x) {
                        let xv = &self.nodes[x.0].value;
                        let inv = 1.0 / xv.rows() as f64;
                        let mut dx = Tensor::zeros(xv.rows(), xv.cols());
                        for r in 0..xv.rows() {
                            for c in 0..xv.cols() {
                                dx.set(r, c, dy.at(0, c) * inv);
                            }
                        }
                        Self::accumulate(&mut grads, x.0, dx);
                    }
                }
                Op::SumAll(x) => {
                    if self.requires(x) {
                        let xv = &self.nodes[x.0].value;
                        let contrib = Tensor::filled(xv.rows(), xv.cols(), dy.item());
                        Self::accumulate(&mut grads, x.0, contrib);
                    }
                }
                Op::ConcatRows(a, b) => {
                    let ar = self.nodes[a.0].value.rows();
                    let cols = dy.cols();
                    if self.requires(a) {
                        let da = Tensor::new(ar, cols, dy.data()[..ar * cols].to_vec())?;
                        Self::accumulate(&mut grads, a.0, da);
                    }
                    if self.requires(b) {
                        let br = dy.rows() - ar;
                        let dbv = Tensor::new(br, cols, dy.data()[ar * cols..].to_vec())?;
                        Self::accumulate(&mut grads, b.0, dbv);
                    }
                }
                Op::TakeRows(x, n) => {
                    if self.requires(x) {
                        let xv = &self.nodes[x.0].value;
                        let mut dx = Tensor::zeros(xv.rows(), xv.cols());
                        dx.data_mut()[..n * xv.cols()].copy_from_slice(dy.data());
                        Self::accumulate(&mut grads, x.0, dx);
                    }
                }
                Op::ScaleByEntry { x, weights, col } => {
                    let w = self.nodes[weights.0].value.at(0, col);
                    if self.requires(x) {
                        Self::accumulate(&mut grads, x.0, dy.scaled(w));
                    }
                    if self.requires(weights) {
                        let xv = &self.nodes[x.0].value;
                        let mut dw = Tensor::zeros(1, self.nodes[weights.0].value.cols());
                        dw.set(0, col, xv.dot(&dy)?);
                        Self::accumulate(&mut grads, weights.0, dw);
                    }
                }
                Op::Cosine(u, v) => {
                    let uv = &self.nodes[u.0].value;
                    let vv = &self.nodes[v.0].value;
                    let nu = uv.l2_norm();
                    let nv = vv.l2_norm();
                    let c = self.nodes[idx].value.item();
                    let g = dy.item();
                    if self.requires(u) {
                        let du = vv
                            .scaled(1.0 / (nu * nv))
                            .zip_with(&uv.scaled(c / (nu * nu)), "cos", |a, b| g * (a - b))?;
                        Self::accumulate(&mut grads, u.0, du);
                    }
                    if self.requires(v) {
                        let dv = uv
                            .scaled(1.0 / (nu * nv))
                            .zip_with(&vv.scaled(c / (nv * nv)), "cos", |a, b| g * (a - b))?;
                        Self::accumulate(&mut grads, v.0, dv);
                    }
                }
            }
            self.nodes[idx].grad = grads[idx].clone();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient_at_three() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(3.0));
        let y = g.mul(x, x).unwrap();
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap().item(), 6.0);
    }

    #[test]
    fn frozen_tensor_receives_no_grad() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(2.0));
        let c = g.constant(Tensor::scalar(5.0));
        let y = g.mul(x, c).unwrap();
        g.backward(y).unwrap();
        assert!(g.grad(c).is_none());
        assert_eq!(g.grad(x).unwrap().item(), 5.0);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(2, 2));
        assert!(matches!(
            g.backward(x),
            Err(NumericsError::NonScalarLoss { shape: (2, 2) })
        ));
    }

    #[test]
    fn sum_of_matmul_grad_is_b_transpose() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
        let b = g.constant(Tensor::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap());
        let prod = g.matmul(a, b).unwrap();
        let loss = g.sum_all(prod);
        g.backward(loss).unwrap();
        // d sum(A.B) / dA = 1 . B^T, i.e. each row is the column sums of B^T rows.
        let expect = Tensor::from_rows(&[vec![11.0, 15.0], vec![11.0, 15.0]]).unwrap();
        assert_eq!(g.grad(a).unwrap(), &expect);
    }

    #[test]
    fn fanout_accumulates_additively() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(4.0));
        let double = g.add(x, x).unwrap();
        g.backward(double).unwrap();
        assert_eq!(g.grad(x).unwrap().item(), 2.0);
    }

    #[test]
    fn softmax_rows_sums_to_one_under_large_inputs() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::row(&[1000.0, 1000.0]));
        let s = g.softmax_rows(x);
        let v = g.value(s);
        assert_eq!(v.data(), &[0.5, 0.5]);
        let x2 = g.constant(Tensor::row(&[0.0, 0.0]));
        let s2 = g.softmax_rows(x2);
        assert_eq!(g.value(s2).data(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_row_sum_is_one_for_random_k5() {
        let mut rng = crate::rng::Rng::new(7);
        for _ in 0..50 {
            let vals: Vec<f64> = (0..5).map(|_| rng.uniform(-1e3, 1e3)).collect();
            let mut g = Graph::new();
            let x = g.constant(Tensor::row(&vals));
            let s = g.softmax_rows(x);
            let out = g.value(s);
            assert!(out.data().iter().all(|&v| v > 0.0));
            let sum: f64 = out.data().iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12, "sum {sum}");
        }
    }

    #[test]
    fn cosine_identity_antipodal_orthogonal() {
        let mut g = Graph::new();
        let v = g.constant(Tensor::row(&[0.3, -1.2, 4.0]));
        let nv = g.scale(v, -1.0);
        let same = g.cosine(v, v).unwrap();
        assert!((g.value(same).item() - 1.0).abs() < 1e-15);
        let anti = g.cosine(v, nv).unwrap();
        assert!((g.value(anti).item() + 1.0).abs() < 1e-15);
        let e1 = g.constant(Tensor::row(&[1.0, 0.0]));
        let e2 = g.constant(Tensor::row(&[0.0, 1.0]));
        let orth = g.cosine(e1, e2).unwrap();
        assert_eq!(g.value(orth).item(), 0.0);
    }

    #[test]
    fn cosine_rejects_zero_norm() {
        let mut g = Graph::new();
        let z = g.constant(Tensor::row(&[0.0, 0.0]));
        let v = g.constant(Tensor::row(&[1.0, 0.0]));
        assert!(matches!(
            g.cosine(z, v),
            Err(NumericsError::DegenerateVector { .. })
        ));
    }

    #[test]
    fn layer_norm_constant_row_is_zeroed() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::row(&[3.0, 3.0, 3.0]));
        let gain = g.constant(Tensor::row(&[1.0, 1.0, 1.0]));
        let bias = g.constant(Tensor::row(&[0.0, 0.0, 0.0]));
        let y = g.layer_norm(x, gain, bias).unwrap();
        for &v in g.value(y).data() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn layer_norm_row_mean_near_zero() {
        let mut rng = crate::rng::Rng::new(21);
        let vals: Vec<f64> = (0..8).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let mut g = Graph::new();
        let x = g.constant(Tensor::row(&vals));
        let gain = g.constant(Tensor::filled(1, 8, 1.0));
        let bias = g.constant(Tensor::zeros(1, 8));
        let y = g.layer_norm(x, gain, bias).unwrap();
        let mean: f64 = g.value(y).data().iter().sum::<f64>() / 8.0;
        assert!(mean.abs() < 1e-9, "mean {mean}");
    }
}
