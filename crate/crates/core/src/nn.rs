//! Parameterized layers over the autodiff graph: linear maps, convolutions,
//! residual blocks, layer norm. Layers hold [`ParamId`]s into a shared
//! [`ParamStore`]; forward methods bind those params into the active graph.

use crate::error::Result;
use crate::rng::Rng;
use crate::tensor::{Graph, NodeId, ParamId, ParamStore, Tensor};

fn randn_tensor(rng: &mut Rng, shape: &[usize], std: f64) -> Tensor {
    let numel: usize = shape.iter().product();
    let data: Vec<f64> = (0..numel).map(|_| rng.normal_scaled(std)).collect();
    Tensor::from_vec(shape.to_vec(), data).expect("valid shape")
}

/// y = x @ W + b, with W stored [in, out].
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut Rng,
        name: &str,
        d_in: usize,
        d_out: usize,
        weight_scale: f64,
    ) -> Self {
        let std = weight_scale / (d_in as f64).sqrt();
        let weight = store.register(format!("{name}.w"), randn_tensor(rng, &[d_in, d_out], std));
        let bias = store.register(format!("{name}.b"), Tensor::zeros(&[d_out]));
        Linear { weight, bias }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        let w = g.param(store, self.weight)?;
        let b = g.param(store, self.bias)?;
        let y = g.matmul(x, w)?;
        g.add_bias_row(y, b)
    }
}

/// 3x3 (or arbitrary) convolution with bias.
pub struct Conv2dLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub stride: usize,
    pub padding: usize,
}

impl Conv2dLayer {
    /// `weight_scale` multiplies a variance-preserving base std of
    /// 1/sqrt(fan_in): pass sqrt(2) for He gain ahead of a ReLU, 1.0 for a
    /// purely linear conv (skip projections, stems), and less than one to
    /// start a saturating head in its linear region. Deep norm-free stacks
    /// explode otherwise and a saturated tanh head has exactly zero
    /// gradient in f64.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        rng: &mut Rng,
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        padding: usize,
        weight_scale: f64,
    ) -> Self {
        let fan_in = (c_in * kernel * kernel) as f64;
        let std = weight_scale / fan_in.sqrt();
        let weight = store.register(
            format!("{name}.w"),
            randn_tensor(rng, &[c_out, c_in, kernel, kernel], std),
        );
        let bias = store.register(format!("{name}.b"), Tensor::zeros(&[c_out]));
        Conv2dLayer {
            weight,
            bias,
            stride: 1,
            padding,
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        let w = g.param(store, self.weight)?;
        let b = g.param(store, self.bias)?;
        // edge-clamp padding: a zero fill against the non-zero background
        // would read as a bright halo along the borders
        g.conv2d_padded(x, w, Some(b), self.stride, self.padding, crate::tensor::PadMode::Replicate)
    }
}

/// Normalize each (batch, channel) plane of a [B, C, H, W] activation to
/// zero mean and unit variance. Keeps deep conv stacks scale-stable: without
/// it, coherent weight growth compounds across blocks until the tanh head
/// saturates and its gradient vanishes. No learnable affine; the next conv
/// supplies scale and shift.
pub fn instance_norm(g: &mut Graph, x: NodeId) -> Result<NodeId> {
    let shape = g.shape(x).to_vec();
    let (b, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
    let plane = h * w;
    let flat = g.reshape(x, &[b * c, plane])?;
    let ones = g.constant(&Tensor::full(&[plane], 1.0))?;
    let zeros = g.constant(&Tensor::zeros(&[plane]))?;
    let normed = g.layer_norm(flat, ones, zeros, 1e-5)?;
    g.reshape(normed, &[b, c, h, w])
}

/// Residual block: x + conv(relu(conv(norm(x)))), with a 1x1 projection on
/// the skip when the channel count changes. The second conv is initialized
/// small so blocks start near identity without zeroing any gradient path.
pub struct ResBlock {
    conv1: Conv2dLayer,
    conv2: Conv2dLayer,
    skip: Option<Conv2dLayer>,
}

impl ResBlock {
    pub fn new(store: &mut ParamStore, rng: &mut Rng, name: &str, c_in: usize, c_out: usize) -> Self {
        let he = std::f64::consts::SQRT_2;
        let conv1 = Conv2dLayer::new(store, rng, &format!("{name}.conv1"), c_in, c_out, 3, 1, he);
        let conv2 = Conv2dLayer::new(store, rng, &format!("{name}.conv2"), c_out, c_out, 3, 1, 0.3);
        // variance-preserving: no activation follows the skip
        let skip = if c_in != c_out {
            Some(Conv2dLayer::new(
                store,
                rng,
                &format!("{name}.skip"),
                c_in,
                c_out,
                1,
                0,
                1.0,
            ))
        } else {
            None
        };
        ResBlock { conv1, conv2, skip }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        let n = instance_norm(g, x)?;
        let h = self.conv1.forward(g, store, n)?;
        let h = g.relu(h)?;
        let h = self.conv2.forward(g, store, h)?;
        let shortcut = match &self.skip {
            Some(proj) => proj.forward(g, store, x)?,
            None => x,
        };
        g.add(h, shortcut)
    }
}

/// Affine layer norm over the last dimension of a 2-D activation.
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        let gamma = store.register(format!("{name}.gamma"), Tensor::full(&[dim], 1.0));
        let beta = store.register(format!("{name}.beta"), Tensor::zeros(&[dim]));
        LayerNorm {
            gamma,
            beta,
            eps: 1e-5,
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: NodeId) -> Result<NodeId> {
        let gamma = g.param(store, self.gamma)?;
        let beta = g.param(store, self.beta)?;
        g.layer_norm(x, gamma, beta, self.eps)
    }
}

/// Embedding table of shape [rows, dim] initialized N(0, 0.02).
pub fn embedding_table(
    store: &mut ParamStore,
    rng: &mut Rng,
    name: &str,
    rows: usize,
    dim: usize,
) -> ParamId {
    store.register(name, randn_tensor(rng, &[rows, dim], 0.02))
}
