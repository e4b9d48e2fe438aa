//! Network architectures: the MLP channel predictor and the DIP denoising
//! network.
//!
//! Samples and time slots run along columns. An MLP layer is therefore the
//! same computation as a 1×1 convolution with bias: `W · X + b`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::Normal;

#[allow(unused_imports)]
use num_traits::Float;

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

/// Batch normalization epsilon used by the DIP network.
pub const BN_EPS: f64 = 1e-5;

/// Role of one parameter tensor, which fixes its shape and initialization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    /// `out × in` weight (or 1×1 filter bank).
    Weight {
        out: usize,
        inp: usize,
    },
    Bias(usize),
    /// Batch-norm scale.
    Scale(usize),
    /// Batch-norm shift.
    Shift(usize),
}

impl ParamKind {
    pub fn shape(self) -> Vec<usize> {
        match self {
            ParamKind::Weight { out, inp } => vec![out, inp],
            ParamKind::Bias(n) | ParamKind::Scale(n) | ParamKind::Shift(n) => vec![n, 1],
        }
    }
}

/// A network whose parameters are an ordered list of tensors.
pub trait Architecture {
    fn param_kinds(&self) -> Vec<ParamKind>;

    fn param_count(&self) -> usize {
        self.param_kinds()
            .into_iter()
            .map(|k| k.shape().iter().product::<usize>())
            .sum()
    }
}

/// A network mapping a batch of column samples to column predictions.
pub trait Predictor: Architecture {
    fn forward(&self, g: &mut Graph, params: &[Var], inputs: Var) -> Result<Var>;
}

/// Ordered parameter tensors of a network.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub tensors: Vec<Tensor>,
}

impl ModelParams {
    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Adds every tensor to `g` as a differentiable leaf.
    pub fn bind(&self, g: &mut Graph) -> Vec<Var> {
        self.tensors.iter().map(|t| g.param(t.clone())).collect()
    }

    /// `self − step · grads`.
    pub fn sgd_step(&self, grads: &[Tensor], step: f64) -> Result<ModelParams> {
        self.check_like(grads)?;
        Ok(ModelParams {
            tensors: self
                .tensors
                .iter()
                .zip(grads)
                .map(|(p, g)| p.zip_map(g, |a, b| a - step * b))
                .collect(),
        })
    }

    pub(crate) fn check_like(&self, other: &[Tensor]) -> Result<()> {
        if self.tensors.len() != other.len() {
            return Err(Error::dim("parameters", &[self.tensors.len()], &[other.len()]));
        }
        for (p, o) in self.tensors.iter().zip(other) {
            if p.shape() != o.shape() {
                return Err(Error::dim("parameters", p.shape(), o.shape()));
            }
        }
        Ok(())
    }

    /// Rejects parameter lists that do not fit `arch`.
    pub fn check_against(&self, arch: &impl Architecture) -> Result<()> {
        let kinds = arch.param_kinds();
        if kinds.len() != self.tensors.len() {
            return Err(Error::dim("parameters", &[kinds.len()], &[self.tensors.len()]));
        }
        for (k, t) in kinds.into_iter().zip(&self.tensors) {
            if k.shape() != t.shape() {
                return Err(Error::dim("parameters", &k.shape(), t.shape()));
            }
        }
        Ok(())
    }
}

/// Glorot-uniform weights, zero biases and shifts, unit scales.
pub fn init_params(arch: &impl Architecture, seed: u64) -> ModelParams {
    let mut rng = rng::stream(seed, "init", 0);
    let tensors = arch
        .param_kinds()
        .into_iter()
        .map(|kind| match kind {
            ParamKind::Weight { out, inp } => {
                let bound = (6.0 / (out + inp) as f64).sqrt();
                let data = (0..out * inp).map(|_| rng.random_range(-bound..=bound)).collect();
                Tensor::new(&[out, inp], data).expect("shape matches length")
            }
            ParamKind::Bias(n) | ParamKind::Shift(n) => Tensor::zeros(&[n, 1]),
            ParamKind::Scale(n) => Tensor::full(&[n, 1], 1.0),
        })
        .collect();
    ModelParams { tensors }
}

fn expect_params(params: &[Var], arch: &impl Architecture) -> Result<()> {
    let n = arch.param_kinds().len();
    if params.len() != n {
        return Err(Error::dim("parameters", &[n], &[params.len()]));
    }
    Ok(())
}

/// Multilayer perceptron: `hidden_layers` affine+ReLU layers then a linear output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub output_dim: usize,
}

impl MlpSpec {
    /// Predictor for `antennas`-element channels from `n_o` past slots.
    pub fn for_channel(antennas: usize, n_o: usize, hidden_layers: usize, hidden_width: usize) -> Self {
        MlpSpec {
            input_dim: 2 * antennas * n_o,
            hidden_layers,
            hidden_width,
            output_dim: 2 * antennas,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers == 0 || self.hidden_width == 0 || self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::Config(alloc::format!(
                "MLP needs at least one hidden layer and non-zero widths: {self:?}"
            )));
        }
        Ok(())
    }

    /// `(in, out)` of every affine layer, output layer last.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_layers + 1);
        let mut prev = self.input_dim;
        for _ in 0..self.hidden_layers {
            dims.push((prev, self.hidden_width));
            prev = self.hidden_width;
        }
        dims.push((prev, self.output_dim));
        dims
    }
}

impl Architecture for MlpSpec {
    fn param_kinds(&self) -> Vec<ParamKind> {
        self.layer_dims()
            .into_iter()
            .flat_map(|(inp, out)| [ParamKind::Weight { out, inp }, ParamKind::Bias(out)])
            .collect()
    }
}

impl Predictor for MlpSpec {
    fn forward(&self, g: &mut Graph, params: &[Var], inputs: Var) -> Result<Var> {
        expect_params(params, self)?;
        let last = self.hidden_layers;
        let mut h = inputs;
        for (layer, wb) in params.chunks(2).enumerate() {
            let expected = g.shape(wb[0])[1];
            let got = g.value(h).rows();
            if got != expected {
                return Err(Error::LayerDimension { layer, expected, got });
            }
            let z = g.matmul(wb[0], h)?;
            let z = g.add_col(z, wb[1])?;
            h = if layer < last { g.relu(z) } else { z };
        }
        Ok(h)
    }
}

/// Runs the MLP on a single input vector.
pub fn mlp_forward(spec: &MlpSpec, params: &ModelParams, input: &[f64]) -> Result<Vec<f64>> {
    let out = predict_batch(spec, params, &Tensor::column(input.to_vec()))?;
    Ok(out.into_data())
}

/// Runs a predictor on a `D × B` batch of column samples.
pub fn predict_batch(model: &impl Predictor, params: &ModelParams, inputs: &Tensor) -> Result<Tensor> {
    let mut g = Graph::new();
    let vars: Vec<Var> = params.tensors.iter().map(|t| g.constant(t.clone())).collect();
    let x = g.constant(inputs.clone());
    let y = model.forward(&mut g, &vars, x)?;
    Ok(g.value(y).clone())
}

/// 1×1 convolution over a `C_in × N` feature map: `filters · x`.
pub fn conv1x1(g: &mut Graph, filters: Var, x: Var) -> Result<Var> {
    let (cin_f, cin_x) = (g.shape(filters)[1], g.value(x).rows());
    if cin_f != cin_x {
        return Err(Error::dim("conv1x1", g.shape(filters), g.shape(x)));
    }
    g.matmul(filters, x)
}

/// DIP network: `depth` hidden layers of `filters` channels, output `2M × N`.
///
/// Hidden layers `1..depth−1` are conv → upsample → ReLU → batch-norm,
/// layer `depth` is conv → ReLU → batch-norm, and the output layer is a 1×1
/// conv with bias. The input is `filters × n1` and `N = n1 · 2^(depth−1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DipSpec {
    pub antennas: usize,
    pub depth: usize,
    pub filters: usize,
    pub n1: usize,
    pub n_iter: usize,
}

impl DipSpec {
    pub fn output_channels(&self) -> usize {
        2 * self.antennas
    }

    pub fn output_len(&self) -> usize {
        self.n1 << (self.depth - 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 || self.depth == 0 || self.filters == 0 || self.n1 == 0 {
            return Err(Error::Config(alloc::format!("invalid DIP spec {self:?}")));
        }
        if self.depth > 20 {
            return Err(Error::Config(alloc::format!("DIP depth {} is too large", self.depth)));
        }
        // batch statistics need two samples at the first layer output
        if self.depth == 1 && self.n1 < 2 {
            return Err(Error::Config("single-layer DIP needs n1 >= 2".into()));
        }
        Ok(())
    }

    /// Time dimension seen by each hidden layer's input, then the output.
    pub fn time_dims(&self) -> Vec<usize> {
        let mut dims: Vec<usize> = (0..self.depth).map(|i| self.n1 << i).collect();
        dims.push(self.output_len());
        dims
    }
}

impl Architecture for DipSpec {
    fn param_kinds(&self) -> Vec<ParamKind> {
        let f = self.filters;
        let mut kinds = Vec::with_capacity(3 * self.depth + 2);
        for _ in 0..self.depth {
            kinds.push(ParamKind::Weight { out: f, inp: f });
            kinds.push(ParamKind::Scale(f));
            kinds.push(ParamKind::Shift(f));
        }
        kinds.push(ParamKind::Weight {
            out: self.output_channels(),
            inp: f,
        });
        kinds.push(ParamKind::Bias(self.output_channels()));
        kinds
    }
}

/// Forward pass of the DIP network from the fixed input `z1`.
pub fn dip_forward(g: &mut Graph, spec: &DipSpec, params: &[Var], z1: Var) -> Result<Var> {
    expect_params(params, spec)?;
    if g.shape(z1) != [spec.filters, spec.n1] {
        return Err(Error::LayerDimension {
            layer: 0,
            expected: spec.filters * spec.n1,
            got: g.value(z1).len(),
        });
    }
    let mut z = z1;
    for layer in 0..spec.depth {
        let p = &params[3 * layer..3 * layer + 3];
        let mut h = conv1x1(g, p[0], z)?;
        if layer + 1 < spec.depth {
            h = g.upsample_linear(h)?;
        }
        h = g.relu(h);
        z = g.batchnorm(h, p[1], p[2], BN_EPS)?;
    }
    let out = &params[3 * spec.depth..];
    let y = conv1x1(g, out[0], z)?;
    g.add_col(y, out[1])
}

/// Gaussian fixed input `z1 ~ N(0, std²)` of shape `filters × n1`.
pub fn dip_input(spec: &DipSpec, std: f64, seed: u64) -> Tensor {
    let mut rng = rng::stream(seed, "dip-z", 0);
    let normal = Normal::new(0.0, std).expect("finite std");
    let data = (0..spec.filters * spec.n1).map(|_| rng.sample(normal)).collect();
    Tensor::new(&[spec.filters, spec.n1], data).expect("shape matches length")
}
