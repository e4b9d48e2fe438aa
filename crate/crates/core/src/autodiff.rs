//! Reverse-mode automatic differentiation over a dynamic graph.
//!
//! A [`Graph`] is rebuilt for every forward pass. Nodes are appended in
//! evaluation order, so node index order is a topological order. Values are
//! computed eagerly when a node is created.
//!
//! [`Graph::grad`] records the backward pass as ordinary graph nodes, which
//! makes gradients themselves differentiable. Second-order quantities (the
//! meta-gradient through an inner SGD step) fall out of calling `grad` on a
//! loss that was built from an earlier `grad` result.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{self, Tensor};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Reshape(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Powf(Var, f64),
    Relu(Var),
    /// `grad ∘ [input > 0]`; constant in `input`.
    ReluGrad(Var, Var),
    Sum(Var),
    BroadcastScalar(Var),
    SumCols(Var),
    BroadcastCols(Var),
    AddCol(Var, Var),
    MulCol(Var, Var),
    Upsample(Var),
    UpsampleAdjoint(Var),
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// A differentiable input.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A constant input; gradients never flow into it.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = tensor::matmul(self.value(a), self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = tensor::transpose(self.value(a));
        let rg = self.rg(&[a]);
        self.push(out, Op::Transpose(a), rg)
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).reshaped(shape)?;
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::Reshape(a), rg))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim(op, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| x * c);
        let rg = self.rg(&[a]);
        self.push(out, Op::Scale(a, c), rg)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| x + c);
        let rg = self.rg(&[a]);
        self.push(out, Op::AddScalar(a), rg)
    }

    pub fn powf(&mut self, a: Var, p: f64) -> Var {
        let out = self.value(a).map(|x| libm::pow(x, p));
        let rg = self.rg(&[a]);
        self.push(out, Op::Powf(a, p), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        let rg = self.rg(&[a]);
        self.push(out, Op::Relu(a), rg)
    }

    fn relu_grad(&mut self, g: Var, input: Var) -> Var {
        let out = self
            .value(g)
            .zip_map(self.value(input), |gv, x| if x > 0.0 { gv } else { 0.0 });
        let rg = self.rg(&[g]);
        self.push(out, Op::ReluGrad(g, input), rg)
    }

    /// Sum of all elements, as a 0-d tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        let rg = self.rg(&[a]);
        self.push(out, Op::Sum(a), rg)
    }

    fn broadcast_scalar(&mut self, s: Var, shape: &[usize]) -> Var {
        let out = Tensor::full(shape, self.value(s).item());
        let rg = self.rg(&[s]);
        self.push(out, Op::BroadcastScalar(s), rg)
    }

    /// Row sums, `C × N → C × 1`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let out = tensor::sum_cols(self.value(a));
        let rg = self.rg(&[a]);
        self.push(out, Op::SumCols(a), rg)
    }

    fn broadcast_cols(&mut self, v: Var, n: usize) -> Var {
        let out = tensor::broadcast_cols(self.value(v), n);
        let rg = self.rg(&[v]);
        self.push(out, Op::BroadcastCols(v), rg)
    }

    fn check_col(&self, op: &'static str, x: Var, v: Var) -> Result<()> {
        let vs = self.shape(v);
        let is_col = matches!(vs, [_] | [_, 1]);
        if !is_col || self.value(v).len() != self.value(x).rows() {
            return Err(Error::dim(op, self.shape(x), vs));
        }
        Ok(())
    }

    /// `x + v` with the column `v` (shape `[C]` or `[C, 1]`) added to every column of `x`.
    pub fn add_col(&mut self, x: Var, v: Var) -> Result<Var> {
        self.check_col("add_col", x, v)?;
        let out = tensor::col_op(self.value(x), self.value(v), |a, b| a + b);
        let rg = self.rg(&[x, v]);
        Ok(self.push(out, Op::AddCol(x, v), rg))
    }

    /// `x ∘ v` with the column `v` scaling each row of `x`.
    pub fn mul_col(&mut self, x: Var, v: Var) -> Result<Var> {
        self.check_col("mul_col", x, v)?;
        let out = tensor::col_op(self.value(x), self.value(v), |a, b| a * b);
        let rg = self.rg(&[x, v]);
        Ok(self.push(out, Op::MulCol(x, v), rg))
    }

    /// Linear upsampling by two along the time (column) axis.
    pub fn upsample_linear(&mut self, x: Var) -> Result<Var> {
        if self.value(x).cols() == 0 {
            return Err(Error::dim("upsample_linear", self.shape(x), &[1]));
        }
        let out = tensor::upsample_linear(self.value(x));
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::Upsample(x), rg))
    }

    fn upsample_adjoint(&mut self, g: Var) -> Var {
        let out = tensor::upsample_adjoint(self.value(g));
        let rg = self.rg(&[g]);
        self.push(out, Op::UpsampleAdjoint(g), rg)
    }

    /// Per-row normalization over the column axis with batch statistics,
    /// followed by a per-row affine map. `x` is `C × N` with `N ≥ 2`.
    pub fn batchnorm(&mut self, x: Var, scale: Var, shift: Var, eps: f64) -> Result<Var> {
        let n = self.value(x).cols();
        if n < 2 {
            return Err(Error::DegenerateBatch(n));
        }
        self.check_col("batchnorm", x, scale)?;
        self.check_col("batchnorm", x, shift)?;
        let inv_n = 1.0 / n as f64;
        let total = self.sum_cols(x);
        let neg_mean = self.scale(total, -inv_n);
        let centered = self.add_col(x, neg_mean)?;
        let sq = self.mul(centered, centered)?;
        let sq_total = self.sum_cols(sq);
        let var = self.scale(sq_total, inv_n);
        let var_eps = self.add_scalar(var, eps);
        let inv_std = self.powf(var_eps, -0.5);
        let normed = self.mul_col(centered, inv_std)?;
        let scaled = self.mul_col(normed, scale)?;
        self.add_col(scaled, shift)
    }

    /// Mean over samples (columns) of the squared ℓ2 distance between
    /// `pred` and `target`. A 1-d tensor is one sample.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.same_shape("mse_loss", pred, target)?;
        let samples = self.value(pred).cols().max(1);
        let sq = self.sq_error(pred, target)?;
        Ok(self.scale(sq, 1.0 / samples as f64))
    }

    /// Squared Frobenius distance `‖pred − target‖²`.
    pub fn sq_error(&mut self, pred: Var, target: Var) -> Result<Var> {
        let diff = self.sub(pred, target)?;
        let sq = self.mul(diff, diff)?;
        Ok(self.sum(sq))
    }

    /// Gradients of `output` with respect to each of `wrt`, recorded as new
    /// graph nodes. Inputs `output` does not depend on get a zero constant.
    pub fn grad(&mut self, output: Var, wrt: &[Var]) -> Result<Vec<Var>> {
        let end = output.0 + 1;
        let mut grads: Vec<Option<Var>> = vec![None; end];
        let seed = Tensor::full(self.shape(output), 1.0);
        grads[output.0] = Some(self.constant(seed));

        for i in (0..end).rev() {
            let Some(g) = grads[i] else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            let op = self.nodes[i].op;
            for (input, contrib) in self.vjp(op, g)? {
                grads[input.0] = Some(match grads[input.0] {
                    Some(prev) => self.add(prev, contrib)?,
                    None => contrib,
                });
            }
        }

        Ok(wrt
            .iter()
            .map(|&w| match grads.get(w.0).copied().flatten() {
                Some(g) => g,
                None => {
                    let zeros = Tensor::zeros(self.shape(w));
                    self.constant(zeros)
                }
            })
            .collect())
    }

    /// Gradient values of `output` with respect to `wrt`.
    pub fn gradients(&mut self, output: Var, wrt: &[Var]) -> Result<Vec<Tensor>> {
        let vars = self.grad(output, wrt)?;
        Ok(vars.into_iter().map(|v| self.value(v).clone()).collect())
    }

    fn vjp(&mut self, op: Op, g: Var) -> Result<Vec<(Var, Var)>> {
        let mut acc = Vec::with_capacity(2);
        let rg = |s: &Self, v: Var| s.nodes[v.0].requires_grad;
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if rg(self, a) {
                    let bt = self.transpose(b);
                    acc.push((a, self.matmul(g, bt)?));
                }
                if rg(self, b) {
                    let at = self.transpose(a);
                    acc.push((b, self.matmul(at, g)?));
                }
            }
            Op::Transpose(a) => acc.push((a, self.transpose(g))),
            Op::Reshape(a) => {
                let shape = self.shape(a).to_vec();
                acc.push((a, self.reshape(g, &shape)?));
            }
            Op::Add(a, b) => {
                acc.push((a, g));
                acc.push((b, g));
            }
            Op::Sub(a, b) => {
                acc.push((a, g));
                if rg(self, b) {
                    acc.push((b, self.scale(g, -1.0)));
                }
            }
            Op::Mul(a, b) => {
                if rg(self, a) {
                    acc.push((a, self.mul(g, b)?));
                }
                if rg(self, b) {
                    acc.push((b, self.mul(g, a)?));
                }
            }
            Op::Scale(a, c) => acc.push((a, self.scale(g, c))),
            Op::AddScalar(a) => acc.push((a, g)),
            Op::Powf(a, p) => {
                let d = self.powf(a, p - 1.0);
                let d = self.scale(d, p);
                acc.push((a, self.mul(g, d)?));
            }
            Op::Relu(a) => acc.push((a, self.relu_grad(g, a))),
            Op::ReluGrad(inner, input) => acc.push((inner, self.relu_grad(g, input))),
            Op::Sum(a) => {
                let shape = self.shape(a).to_vec();
                acc.push((a, self.broadcast_scalar(g, &shape)));
            }
            Op::BroadcastScalar(s) => {
                let total = self.sum(g);
                let shape = self.shape(s).to_vec();
                acc.push((s, self.reshape(total, &shape)?));
            }
            Op::SumCols(a) => {
                let n = self.value(a).cols();
                acc.push((a, self.broadcast_cols(g, n)));
            }
            Op::BroadcastCols(v) => {
                let s = self.sum_cols(g);
                let shape = self.shape(v).to_vec();
                acc.push((v, self.reshape(s, &shape)?));
            }
            Op::AddCol(x, v) => {
                acc.push((x, g));
                if rg(self, v) {
                    let s = self.sum_cols(g);
                    let shape = self.shape(v).to_vec();
                    acc.push((v, self.reshape(s, &shape)?));
                }
            }
            Op::MulCol(x, v) => {
                if rg(self, x) {
                    acc.push((x, self.mul_col(g, v)?));
                }
                if rg(self, v) {
                    let gx = self.mul(g, x)?;
                    let s = self.sum_cols(gx);
                    let shape = self.shape(v).to_vec();
                    acc.push((v, self.reshape(s, &shape)?));
                }
            }
            Op::Upsample(x) => acc.push((x, self.upsample_adjoint(g))),
            Op::UpsampleAdjoint(x) => acc.push((x, self.upsample_linear(g)?)),
        }
        acc.retain(|&(input, _)| self.nodes[input.0].requires_grad);
        Ok(acc)
    }
}

/// Compares reverse-mode gradients of a scalar function of several tensors
/// against central differences with the given step.
///
/// Returns the maximum over all coordinates of
/// `|autodiff − central| / max(1, |central|)`.
pub fn grad_check_many<F>(mut f: F, inputs: &[Tensor], step: f64) -> Result<f64>
where
    F: FnMut(&mut Graph, &[Var]) -> Result<Var>,
{
    let analytic = {
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|x| g.param(x.clone())).collect();
        let out = f(&mut g, &vars)?;
        if !g.value(out).is_finite() {
            return Err(Error::NonFinite("grad_check evaluation"));
        }
        g.gradients(out, &vars)?
    };

    let mut eval = |xs: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|x| g.constant(x.clone())).collect();
        let out = f(&mut g, &vars)?;
        let v = g.value(out).sum();
        if !v.is_finite() {
            return Err(Error::NonFinite("grad_check evaluation"));
        }
        Ok(v)
    };

    let mut xs = inputs.to_vec();
    let mut worst: f64 = 0.0;
    for t in 0..xs.len() {
        for i in 0..xs[t].len() {
            let orig = xs[t].data()[i];
            xs[t].data_mut()[i] = orig + step;
            let plus = eval(&xs)?;
            xs[t].data_mut()[i] = orig - step;
            let minus = eval(&xs)?;
            xs[t].data_mut()[i] = orig;
            let central = (plus - minus) / (2.0 * step);
            let ad = analytic[t].data()[i];
            if !ad.is_finite() {
                return Err(Error::NonFinite("grad_check gradient"));
            }
            worst = worst.max((ad - central).abs() / central.abs().max(1.0));
        }
    }
    Ok(worst)
}

/// Single-input form of [`grad_check_many`].
pub fn grad_check<F>(mut f: F, x: &Tensor, step: f64) -> Result<f64>
where
    F: FnMut(&mut Graph, Var) -> Result<Var>,
{
    grad_check_many(|g, vs| f(g, vs[0]), core::slice::from_ref(x), step)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, data: &[f64]) -> Tensor {
        Tensor::matrix(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn relu_forward_and_subgradient() {
        let mut g = Graph::new();
        let x = g.param(Tensor::column(vec![-1.0, 0.0, 2.0]));
        let y = g.relu(x);
        assert_eq!(g.value(y).data(), &[0.0, 0.0, 2.0]);
        let s = g.sum(y);
        let gx = g.gradients(s, &[x]).unwrap();
        assert_eq!(gx[0].data(), &[0.0, 0.0, 1.0]);

        let neg = g.constant(Tensor::column(vec![-3.0, -0.5]));
        let r = g.relu(neg);
        assert!(g.value(r).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batchnorm_by_hand() {
        let mut g = Graph::new();
        let x = g.constant(m(1, 3, &[1.0, 2.0, 3.0]));
        let scale = g.constant(Tensor::column(vec![1.0]));
        let shift = g.constant(Tensor::column(vec![0.0]));
        let y = g.batchnorm(x, scale, shift, 0.0).unwrap();
        let expect = [-1.224_744_871_391_589, 0.0, 1.224_744_871_391_589];
        for (a, b) in g.value(y).data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn batchnorm_constant_row_is_zero() {
        let mut g = Graph::new();
        let x = g.constant(m(2, 4, &[5.0; 8]));
        let scale = g.constant(Tensor::full(&[2, 1], 1.0));
        let shift = g.constant(Tensor::zeros(&[2, 1]));
        let y = g.batchnorm(x, scale, shift, 1e-5).unwrap();
        assert!(g.value(y).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batchnorm_rows_have_zero_mean() {
        let mut g = Graph::new();
        let x = g.constant(m(2, 5, &[0.3, 1.7, -2.0, 4.4, 0.1, 9.0, 8.0, -1.0, 0.0, 3.3]));
        let scale = g.constant(Tensor::full(&[2], 1.0));
        let shift = g.constant(Tensor::zeros(&[2]));
        let y = g.batchnorm(x, scale, shift, 1e-5).unwrap();
        for row in g.value(y).data().chunks(5) {
            assert!(row.iter().sum::<f64>().abs() / 5.0 < 1e-9);
        }
    }

    #[test]
    fn batchnorm_needs_two_samples() {
        let mut g = Graph::new();
        let x = g.constant(m(2, 1, &[1.0, 2.0]));
        let s = g.constant(Tensor::full(&[2, 1], 1.0));
        let err = g.batchnorm(x, s, s, 1e-5).unwrap_err();
        assert_eq!(err, Error::DegenerateBatch(1));
    }

    #[test]
    fn upsample_doubles_length() {
        let mut g = Graph::new();
        let x = g.constant(m(1, 3, &[2.0, 2.0, 2.0]));
        let y = g.upsample_linear(x).unwrap();
        assert_eq!(g.shape(y), &[1, 6]);
        assert!(g.value(y).data().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn mse_loss_values() {
        let mut g = Graph::new();
        let p = g.constant(Tensor::column(vec![1.0, 2.0, 3.0]));
        let l = g.mse_loss(p, p).unwrap();
        assert_eq!(g.value(l).item(), 0.0);

        let ones = g.constant(Tensor::full(&[4], 1.0));
        let zeros = g.constant(Tensor::zeros(&[4]));
        let l = g.mse_loss(ones, zeros).unwrap();
        assert_eq!(g.value(l).item(), 4.0);

        let b = g.constant(Tensor::zeros(&[2, 1]));
        assert!(matches!(g.mse_loss(p, b), Err(Error::Dimension { .. })));
    }

    #[test]
    fn mse_gradient_formula() {
        // d/dpred = 2 (pred - target) / samples
        let mut g = Graph::new();
        let pred = g.param(m(2, 2, &[1.0, 0.0, -1.0, 3.0]));
        let target = g.constant(m(2, 2, &[0.0, 0.0, 1.0, 1.0]));
        let l = g.mse_loss(pred, target).unwrap();
        let gp = g.gradients(l, &[pred]).unwrap();
        assert_eq!(gp[0].data(), &[1.0, 0.0, -2.0, 2.0]);
    }

    #[test]
    fn gradient_of_output_is_one() {
        let mut g = Graph::new();
        let x = g.param(Tensor::scalar(3.0));
        let gx = g.gradients(x, &[x]).unwrap();
        assert_eq!(gx[0].item(), 1.0);
    }

    #[test]
    fn repeated_backward_is_identical() {
        let mut g = Graph::new();
        let a = g.param(m(2, 3, &[0.1, -0.2, 0.3, 0.4, 0.5, -0.6]));
        let b = g.param(m(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.0, 0.25]));
        let c = g.matmul(a, b).unwrap();
        let r = g.relu(c);
        let l = g.sum(r);
        let first = g.gradients(l, &[a, b]).unwrap();
        let second = g.gradients(l, &[a, b]).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn unrelated_input_gets_zero_gradient() {
        let mut g = Graph::new();
        let a = g.param(Tensor::column(vec![1.0, 2.0]));
        let b = g.param(Tensor::column(vec![3.0]));
        let l = g.sum(a);
        let gr = g.gradients(l, &[b]).unwrap();
        assert_eq!(gr[0].data(), &[0.0]);
    }

    #[test]
    fn grad_check_quadratic() {
        let x = Tensor::column(vec![0.5, -1.5, 2.0, 3.25]);
        let err = grad_check(
            |g, x| {
                Ok({
                    let s = g.mul(x, x)?;
                    g.sum(s)
                })
            },
            &x,
            1e-6,
        )
        .unwrap();
        assert!(err <= 1e-7, "{err}");
    }

    #[test]
    fn grad_check_constant_function() {
        let x = Tensor::column(vec![1.0, 2.0]);
        let err = grad_check(
            |g, x| {
                let z = g.scale(x, 0.0);
                let s = g.sum(z);
                Ok(g.add_scalar(s, 7.0))
            },
            &x,
            1e-6,
        )
        .unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn grad_check_reports_non_finite() {
        let x = Tensor::column(vec![0.0]);
        let r = grad_check(
            |g, x| {
                Ok({
                    let p = g.powf(x, -1.0);
                    g.sum(p)
                })
            },
            &x,
            1e-6,
        );
        assert_eq!(r, Err(Error::NonFinite("grad_check evaluation")));
    }

    #[test]
    fn second_order_of_cubic() {
        // f(x) = x^3, f'(x) = 3x^2, f''(x) = 6x
        let mut g = Graph::new();
        let x = g.param(Tensor::scalar(2.0));
        let y = g.powf(x, 3.0);
        let d1 = g.grad(y, &[x]).unwrap()[0];
        assert!((g.value(d1).item() - 12.0).abs() < 1e-12);
        let d2 = g.grad(d1, &[x]).unwrap()[0];
        assert!((g.value(d2).item() - 12.0).abs() < 1e-12);
    }
}
