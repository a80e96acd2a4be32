//! Tape-based reverse-mode autodiff.
//!
//! A [`Graph`] records every executed operation in topological order (inputs
//! are created before the ops that consume them, by construction). One
//! backward pass walks the tape once in reverse, accumulating adjoints
//! additively into each node. Parameters live outside the graph in a
//! [`ParamStore`]; they are bound into a graph as leaves and their gradients
//! harvested back after `backward`.

use std::collections::HashMap;

use super::kernels as k;
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`] tape.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(pub(crate) usize);

/// Handle to a parameter in a [`ParamStore`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

struct NamedParam {
    name: String,
    tensor: Tensor,
}

/// Owns all trainable tensors of a model, in a stable registration order.
#[derive(Default)]
pub struct ParamStore {
    params: Vec<NamedParam>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        let id = ParamId(self.params.len());
        self.params.push(NamedParam {
            name: name.into(),
            tensor: tensor.with_requires_grad(),
        });
        id
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].tensor
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].tensor
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.params
            .iter()
            .enumerate()
            .map(|(i, p)| (ParamId(i), p.name.as_str(), &p.tensor))
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.tensor.numel()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.tensor.zero_grad();
        }
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }
}

/// One recorded operation. Input references always point at earlier nodes.
#[derive(Clone, Debug)]
pub enum Op {
    Leaf { param: Option<ParamId> },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId, f64),
    Square(NodeId),
    Abs(NodeId),
    Relu(NodeId),
    Tanh(NodeId),
    Gelu(NodeId),
    Matmul(NodeId, NodeId),
    /// a @ b^T with b stored row-major; avoids materializing transposes.
    MatmulNT(NodeId, NodeId),
    AddBiasRow(NodeId, NodeId),
    Softmax(NodeId),
    LayerNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: f64,
    },
    Conv2d {
        x: NodeId,
        w: NodeId,
        bias: Option<NodeId>,
        stride: usize,
        padding: usize,
        pad_mode: k::PadMode,
    },
    AvgPool2x(NodeId),
    UpsampleNearest2x(NodeId),
    GatherRows {
        table: NodeId,
        indices: Vec<usize>,
    },
    Reshape(NodeId),
    ConcatRows(Vec<NodeId>),
    ConcatChannels(NodeId, NodeId),
    SliceCols {
        x: NodeId,
        start: usize,
        len: usize,
    },
    ConcatCols(Vec<NodeId>),
    SumAll(NodeId),
    MeanAll(NodeId),
    CrossEntropy {
        logits: NodeId,
        targets: Vec<usize>,
        ignore: Option<usize>,
    },
}

struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    grad: Option<Vec<f64>>,
    needs_grad: bool,
    op: Op,
}

/// Recorded forward tape; replayable in reverse for adjoints.
pub struct Graph {
    nodes: Vec<Node>,
    param_nodes: HashMap<ParamId, NodeId>,
    check_finite: bool,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
            check_finite: cfg!(debug_assertions),
        }
    }

    /// Enable or disable the post-op NaN/Inf check.
    pub fn with_finite_checks(mut self, on: bool) -> Self {
        self.check_finite = on;
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    /// Scalar value of a [1]-shaped node.
    pub fn scalar_value(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value[0]
    }

    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.nodes[id.0].grad.as_deref()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, needs_grad: bool, op: Op) -> Result<NodeId> {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        if self.check_finite && !value.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("{} (node {})", op_name(&op), self.nodes.len()),
            });
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            shape,
            value,
            grad: None,
            needs_grad,
            op,
        });
        Ok(id)
    }

    /// Register an input leaf. Gradients will be computed for it iff the
    /// tensor has `requires_grad` set; fetch them with [`Graph::grad`].
    pub fn input(&mut self, t: &Tensor) -> Result<NodeId> {
        self.push(
            t.shape().to_vec(),
            t.data().to_vec(),
            t.requires_grad(),
            Op::Leaf { param: None },
        )
    }

    /// Register a constant leaf (never differentiated).
    pub fn constant(&mut self, t: &Tensor) -> Result<NodeId> {
        self.push(
            t.shape().to_vec(),
            t.data().to_vec(),
            false,
            Op::Leaf { param: None },
        )
    }

    /// Bind a parameter into the graph. Repeated binds of the same parameter
    /// return the same node, so gradient contributions from every use
    /// accumulate on one adjoint.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<NodeId> {
        if let Some(&node) = self.param_nodes.get(&id) {
            return Ok(node);
        }
        let t = store.get(id);
        let node = self.push(
            t.shape().to_vec(),
            t.data().to_vec(),
            t.requires_grad(),
            Op::Leaf { param: Some(id) },
        )?;
        self.param_nodes.insert(id, node);
        Ok(node)
    }

    /// Add this graph's parameter gradients into the store (additive across
    /// graphs; call [`ParamStore::zero_grads`] between optimizer steps).
    pub fn harvest_into(&self, store: &mut ParamStore) {
        let mut bound: Vec<(ParamId, NodeId)> = self.param_nodes.iter().map(|(&p, &n)| (p, n)).collect();
        bound.sort_by_key(|(p, _)| p.0);
        for (pid, nid) in bound {
            if let Some(g) = self.nodes[nid.0].grad.as_deref() {
                store.get_mut(pid).accumulate_grad(g);
            }
        }
    }

    // ---- elementwise ----------------------------------------------------

    fn binary_same_shape(&mut self, op_name: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        if self.nodes[a.0].shape != self.nodes[b.0].shape {
            return Err(Error::ShapeMismatch {
                op: op_name,
                lhs: self.nodes[a.0].shape.clone(),
                rhs: self.nodes[b.0].shape.clone(),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape("add", a, b)?;
        let value: Vec<f64> = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(x, y)| x + y)
            .collect();
        let ng = self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad;
        self.push(self.nodes[a.0].shape.clone(), value, ng, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape("sub", a, b)?;
        let value: Vec<f64> = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(x, y)| x - y)
            .collect();
        let ng = self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad;
        self.push(self.nodes[a.0].shape.clone(), value, ng, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape("mul", a, b)?;
        let value: Vec<f64> = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(x, y)| x * y)
            .collect();
        let ng = self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad;
        self.push(self.nodes[a.0].shape.clone(), value, ng, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let value: Vec<f64> = self.nodes[a.0].value.iter().map(|x| x * c).collect();
        let ng = self.nodes[a.0].needs_grad;
        self.push(self.nodes[a.0].shape.clone(), value, ng, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let value: Vec<f64> = self.nodes[a.0].value.iter().map(|x| x + c).collect();
        let ng = self.nodes[a.0].needs_grad;
        self.push(self.nodes[a.0].shape.clone(), value, ng, Op::AddScalar(a, c))
    }

    pub fn square(&mut self, a: NodeId) -> Result<NodeId> {
        let value: Vec<f64> = self.nodes[a.0].value.iter().map(|x| x * x).collect();
        let ng = self.nodes[a.0].needs_grad;
        self.push(self.nodes[a.0].shape.clone(), value, ng, Op::Square(a))
    }

    pub fn abs(&mut self, a: NodeId) -> Result<NodeId> {
        let value: Vec<f64> = self.nodes[a.0].value.iter().map(|x| x.abs()).collect();
        let ng = self.nodes[a.0].needs_grad;
        self.push(self.nodes[a.0].shape.clone(), value, ng, Op::Abs(a))
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        let value: Vec<f64> = self.nodes[a.0].value.iter().map(|x| x.max(0.0)).collect();
        let ng = self.nodes[a.0].needs_grad;
        self.push(self.nodes[a.0].shape.clone(), value, ng, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        let value: Vec<f64> = self.nodes[a.0].value.iter().map(|x| x.tanh()).collect();
        let ng = self.nodes[a.0].needs_grad;
        self.push(self.nodes[a.0].shape.clone(), value, ng, Op::Tanh(a))
    }

    pub fn gelu(&mut self, a: NodeId) -> Result<NodeId> {
        let value: Vec<f64> = self.nodes[a.0].value.iter().map(|&x| gelu(x)).collect();
        let ng = self.nodes[a.0].needs_grad;
        self.push(self.nodes[a.0].shape.clone(), value, ng, Op::Gelu(a))
    }

    // ---- linear algebra --------------------------------------------------

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (&self.nodes[a.0].shape, &self.nodes[b.0].shape);
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: sa.clone(),
                rhs: sb.clone(),
            });
        }
        let (m, kk, n) = (sa[0], sa[1], sb[1]);
        let mut value = vec![0.0; m * n];
        k::gemm_nn(&self.nodes[a.0].value, &self.nodes[b.0].value, &mut value, m, kk, n);
        let ng = self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad;
        self.push(vec![m, n], value, ng, Op::Matmul(a, b))
    }

    /// a[m,k] @ b[n,k]^T -> [m,n]
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (&self.nodes[a.0].shape, &self.nodes[b.0].shape);
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[1] {
            return Err(Error::ShapeMismatch {
                op: "matmul_nt",
                lhs: sa.clone(),
                rhs: sb.clone(),
            });
        }
        let (m, kk, n) = (sa[0], sa[1], sb[0]);
        let mut value = vec![0.0; m * n];
        k::gemm_nt(&self.nodes[a.0].value, &self.nodes[b.0].value, &mut value, m, kk, n);
        let ng = self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad;
        self.push(vec![m, n], value, ng, Op::MatmulNT(a, b))
    }

    /// x[r,c] + bias[c] broadcast over rows.
    pub fn add_bias_row(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let (sx, sb) = (&self.nodes[x.0].shape, &self.nodes[bias.0].shape);
        if sx.len() != 2 || sb.len() != 1 || sb[0] != sx[1] {
            return Err(Error::ShapeMismatch {
                op: "add_bias_row",
                lhs: sx.clone(),
                rhs: sb.clone(),
            });
        }
        let (r, c) = (sx[0], sx[1]);
        let mut value = self.nodes[x.0].value.clone();
        for row in 0..r {
            for (v, b) in value[row * c..(row + 1) * c].iter_mut().zip(&self.nodes[bias.0].value) {
                *v += b;
            }
        }
        let ng = self.nodes[x.0].needs_grad || self.nodes[bias.0].needs_grad;
        self.push(vec![r, c], value, ng, Op::AddBiasRow(x, bias))
    }

    /// Softmax over the last dimension (rows of a 2-D tensor).
    pub fn softmax_lastdim(&mut self, x: NodeId) -> Result<NodeId> {
        let sx = &self.nodes[x.0].shape;
        if sx.len() != 2 {
            return Err(Error::BadShape {
                op: "softmax_lastdim",
                shape: sx.clone(),
                reason: "expected a 2-D tensor".into(),
            });
        }
        let (r, c) = (sx[0], sx[1]);
        let mut value = vec![0.0; r * c];
        k::softmax_rows(&self.nodes[x.0].value, &mut value, r, c);
        let ng = self.nodes[x.0].needs_grad;
        self.push(vec![r, c], value, ng, Op::Softmax(x))
    }

    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId, eps: f64) -> Result<NodeId> {
        let sx = self.nodes[x.0].shape.clone();
        if sx.len() != 2 {
            return Err(Error::BadShape {
                op: "layer_norm",
                shape: sx,
                reason: "expected a 2-D tensor".into(),
            });
        }
        let (r, c) = (sx[0], sx[1]);
        if self.nodes[gamma.0].shape != [c] || self.nodes[beta.0].shape != [c] {
            return Err(Error::ShapeMismatch {
                op: "layer_norm",
                lhs: sx,
                rhs: self.nodes[gamma.0].shape.clone(),
            });
        }
        let mut value = vec![0.0; r * c];
        let gv = &self.nodes[gamma.0].value;
        let bv = &self.nodes[beta.0].value;
        for row in 0..r {
            let xi = &self.nodes[x.0].value[row * c..(row + 1) * c];
            let (mean, rstd) = k::row_moments(xi, c, eps);
            let out = &mut value[row * c..(row + 1) * c];
            for j in 0..c {
                out[j] = (xi[j] - mean) * rstd * gv[j] + bv[j];
            }
        }
        let ng = self.nodes[x.0].needs_grad
            || self.nodes[gamma.0].needs_grad
            || self.nodes[beta.0].needs_grad;
        self.push(vec![r, c], value, ng, Op::LayerNorm { x, gamma, beta, eps })
    }

    // ---- convolution and spatial ops --------------------------------------

    pub fn conv2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        bias: Option<NodeId>,
        stride: usize,
        padding: usize,
    ) -> Result<NodeId> {
        self.conv2d_padded(x, w, bias, stride, padding, k::PadMode::Zero)
    }

    /// Convolution with an explicit out-of-range fill rule. Zero padding is
    /// the standard definition; replicate padding avoids the bright border
    /// halo a non-zero background otherwise produces.
    pub fn conv2d_padded(
        &mut self,
        x: NodeId,
        w: NodeId,
        bias: Option<NodeId>,
        stride: usize,
        padding: usize,
        pad_mode: k::PadMode,
    ) -> Result<NodeId> {
        let (sx, sw) = (&self.nodes[x.0].shape, &self.nodes[w.0].shape);
        if sx.len() != 4 || sw.len() != 4 || sx[1] != sw[1] {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                lhs: sx.clone(),
                rhs: sw.clone(),
            });
        }
        if stride == 0 {
            return Err(Error::Config("conv2d: stride must be positive".into()));
        }
        let (b, c, h, w_in) = (sx[0], sx[1], sx[2], sx[3]);
        let (o, kh, kw) = (sw[0], sw[2], sw[3]);
        if kh > h + 2 * padding || kw > w_in + 2 * padding {
            return Err(Error::Config(format!(
                "conv2d: kernel {kh}x{kw} larger than padded input {}x{}",
                h + 2 * padding,
                w_in + 2 * padding
            )));
        }
        if !(h + 2 * padding - kh).is_multiple_of(stride) || !(w_in + 2 * padding - kw).is_multiple_of(stride) {
            return Err(Error::Config(format!(
                "conv2d: non-integral output extent for input {h}x{w_in}, kernel {kh}x{kw}, stride {stride}, padding {padding}"
            )));
        }
        if let Some(bn) = bias {
            if self.nodes[bn.0].shape != [o] {
                return Err(Error::ShapeMismatch {
                    op: "conv2d bias",
                    lhs: vec![o],
                    rhs: self.nodes[bn.0].shape.clone(),
                });
            }
        }
        let oh = (h + 2 * padding - kh) / stride + 1;
        let ow = (w_in + 2 * padding - kw) / stride + 1;
        let ckk = c * kh * kw;
        let spatial = oh * ow;
        let mut value = vec![0.0; b * o * spatial];
        let mut cols = vec![0.0; ckk * spatial];
        for item in 0..b {
            let x_item = &self.nodes[x.0].value[item * c * h * w_in..(item + 1) * c * h * w_in];
            k::im2col(x_item, &mut cols, c, h, w_in, kh, kw, stride, padding, pad_mode, oh, ow);
            let out = &mut value[item * o * spatial..(item + 1) * o * spatial];
            k::gemm_nn(&self.nodes[w.0].value, &cols, out, o, ckk, spatial);
            if let Some(bn) = bias {
                let bv = &self.nodes[bn.0].value;
                for ch in 0..o {
                    let bias_v = bv[ch];
                    out[ch * spatial..(ch + 1) * spatial]
                        .iter_mut()
                        .for_each(|v| *v += bias_v);
                }
            }
        }
        let mut ng = self.nodes[x.0].needs_grad || self.nodes[w.0].needs_grad;
        if let Some(bn) = bias {
            ng |= self.nodes[bn.0].needs_grad;
        }
        self.push(
            vec![b, o, oh, ow],
            value,
            ng,
            Op::Conv2d {
                x,
                w,
                bias,
                stride,
                padding,
                pad_mode,
            },
        )
    }

    pub fn avgpool2x(&mut self, x: NodeId) -> Result<NodeId> {
        let sx = self.nodes[x.0].shape.clone();
        if sx.len() != 4 {
            return Err(Error::BadShape {
                op: "avgpool2x",
                shape: sx,
                reason: "expected a 4-D tensor".into(),
            });
        }
        if !sx[2].is_multiple_of(2) || !sx[3].is_multiple_of(2) {
            return Err(Error::Config(format!(
                "avgpool2x: spatial extents must be even, got {}x{}",
                sx[2], sx[3]
            )));
        }
        let (b, c, h, w) = (sx[0], sx[1], sx[2], sx[3]);
        let mut value = vec![0.0; b * c * (h / 2) * (w / 2)];
        k::avgpool2x(&self.nodes[x.0].value, &mut value, b * c, h, w);
        let ng = self.nodes[x.0].needs_grad;
        self.push(vec![b, c, h / 2, w / 2], value, ng, Op::AvgPool2x(x))
    }

    pub fn upsample_nearest2x(&mut self, x: NodeId) -> Result<NodeId> {
        let sx = self.nodes[x.0].shape.clone();
        if sx.len() != 4 {
            return Err(Error::BadShape {
                op: "upsample_nearest2x",
                shape: sx,
                reason: "expected a 4-D tensor".into(),
            });
        }
        let (b, c, h, w) = (sx[0], sx[1], sx[2], sx[3]);
        let mut value = vec![0.0; b * c * 4 * h * w];
        k::upsample_nearest2x(&self.nodes[x.0].value, &mut value, b * c, h, w);
        let ng = self.nodes[x.0].needs_grad;
        self.push(vec![b, c, 2 * h, 2 * w], value, ng, Op::UpsampleNearest2x(x))
    }

    // ---- gather / reshape / concat ----------------------------------------

    /// Select rows of a 2-D table: out[i] = table[indices[i]].
    pub fn gather_rows(&mut self, table: NodeId, indices: &[usize]) -> Result<NodeId> {
        let st = &self.nodes[table.0].shape;
        if st.len() != 2 {
            return Err(Error::BadShape {
                op: "gather_rows",
                shape: st.clone(),
                reason: "expected a 2-D table".into(),
            });
        }
        let (rows, d) = (st[0], st[1]);
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(Error::Contract(format!(
                "gather_rows: index {bad} out of range for table with {rows} rows"
            )));
        }
        let mut value = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            value.extend_from_slice(&self.nodes[table.0].value[i * d..(i + 1) * d]);
        }
        let ng = self.nodes[table.0].needs_grad;
        self.push(
            vec![indices.len(), d],
            value,
            ng,
            Op::GatherRows {
                table,
                indices: indices.to_vec(),
            },
        )
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let numel: usize = shape.iter().product();
        if numel != self.nodes[x.0].value.len() {
            return Err(Error::BadShape {
                op: "reshape",
                shape: shape.to_vec(),
                reason: format!("incompatible with {} elements", self.nodes[x.0].value.len()),
            });
        }
        let value = self.nodes[x.0].value.clone();
        let ng = self.nodes[x.0].needs_grad;
        self.push(shape.to_vec(), value, ng, Op::Reshape(x))
    }

    /// Stack 2-D tensors with equal column counts along dim 0.
    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::Contract("concat_rows: no inputs".into()));
        }
        let d = self.nodes[parts[0].0].shape[1];
        let mut rows = 0;
        for &p in parts {
            let sp = &self.nodes[p.0].shape;
            if sp.len() != 2 || sp[1] != d {
                return Err(Error::ShapeMismatch {
                    op: "concat_rows",
                    lhs: self.nodes[parts[0].0].shape.clone(),
                    rhs: sp.clone(),
                });
            }
            rows += sp[0];
        }
        let mut value = Vec::with_capacity(rows * d);
        for &p in parts {
            value.extend_from_slice(&self.nodes[p.0].value);
        }
        let ng = parts.iter().any(|&p| self.nodes[p.0].needs_grad);
        self.push(vec![rows, d], value, ng, Op::ConcatRows(parts.to_vec()))
    }

    /// Concatenate [B,C1,H,W] and [B,C2,H,W] along the channel dimension.
    pub fn concat_channels(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (&self.nodes[a.0].shape, &self.nodes[b.0].shape);
        if sa.len() != 4
            || sb.len() != 4
            || sa[0] != sb[0]
            || sa[2] != sb[2]
            || sa[3] != sb[3]
        {
            return Err(Error::ShapeMismatch {
                op: "concat_channels",
                lhs: sa.clone(),
                rhs: sb.clone(),
            });
        }
        let (bsz, c1, h, w) = (sa[0], sa[1], sa[2], sa[3]);
        let c2 = sb[1];
        let plane = h * w;
        let mut value = Vec::with_capacity(bsz * (c1 + c2) * plane);
        for item in 0..bsz {
            value.extend_from_slice(&self.nodes[a.0].value[item * c1 * plane..(item + 1) * c1 * plane]);
            value.extend_from_slice(&self.nodes[b.0].value[item * c2 * plane..(item + 1) * c2 * plane]);
        }
        let ng = self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad;
        self.push(vec![bsz, c1 + c2, h, w], value, ng, Op::ConcatChannels(a, b))
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let sx = &self.nodes[x.0].shape;
        if sx.len() != 2 || start + len > sx[1] {
            return Err(Error::BadShape {
                op: "slice_cols",
                shape: sx.clone(),
                reason: format!("column range {start}..{} out of bounds", start + len),
            });
        }
        let (r, c) = (sx[0], sx[1]);
        let mut value = Vec::with_capacity(r * len);
        for row in 0..r {
            value.extend_from_slice(&self.nodes[x.0].value[row * c + start..row * c + start + len]);
        }
        let ng = self.nodes[x.0].needs_grad;
        self.push(vec![r, len], value, ng, Op::SliceCols { x, start, len })
    }

    /// Concatenate 2-D tensors with equal row counts along dim 1.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::Contract("concat_cols: no inputs".into()));
        }
        let r = self.nodes[parts[0].0].shape[0];
        let mut total = 0;
        for &p in parts {
            let sp = &self.nodes[p.0].shape;
            if sp.len() != 2 || sp[0] != r {
                return Err(Error::ShapeMismatch {
                    op: "concat_cols",
                    lhs: self.nodes[parts[0].0].shape.clone(),
                    rhs: sp.clone(),
                });
            }
            total += sp[1];
        }
        let mut value = vec![0.0; r * total];
        let mut offset = 0;
        for &p in parts {
            let c = self.nodes[p.0].shape[1];
            for row in 0..r {
                value[row * total + offset..row * total + offset + c]
                    .copy_from_slice(&self.nodes[p.0].value[row * c..(row + 1) * c]);
            }
            offset += c;
        }
        let ng = parts.iter().any(|&p| self.nodes[p.0].needs_grad);
        self.push(vec![r, total], value, ng, Op::ConcatCols(parts.to_vec()))
    }

    // ---- reductions and losses --------------------------------------------

    pub fn sum_all(&mut self, x: NodeId) -> Result<NodeId> {
        let s: f64 = self.nodes[x.0].value.iter().sum();
        let ng = self.nodes[x.0].needs_grad;
        self.push(vec![1], vec![s], ng, Op::SumAll(x))
    }

    pub fn mean_all(&mut self, x: NodeId) -> Result<NodeId> {
        let n = self.nodes[x.0].value.len() as f64;
        let s: f64 = self.nodes[x.0].value.iter().sum();
        let ng = self.nodes[x.0].needs_grad;
        self.push(vec![1], vec![s / n], ng, Op::MeanAll(x))
    }

    /// Mean of -log softmax(logits)[target] over rows whose target is not
    /// `ignore`. Errors if every row is ignored.
    pub fn cross_entropy(
        &mut self,
        logits: NodeId,
        targets: &[usize],
        ignore: Option<usize>,
    ) -> Result<NodeId> {
        let sx = &self.nodes[logits.0].shape;
        if sx.len() != 2 || sx[0] != targets.len() {
            return Err(Error::Contract(format!(
                "cross_entropy: {} logit rows vs {} targets",
                if sx.len() == 2 { sx[0] } else { 0 },
                targets.len()
            )));
        }
        let (r, v) = (sx[0], sx[1]);
        if let Some(&bad) = targets.iter().find(|&&t| t >= v && Some(t) != ignore) {
            return Err(Error::Contract(format!(
                "cross_entropy: target {bad} out of range for vocab {v}"
            )));
        }
        let mut total = 0.0;
        let mut kept = 0usize;
        let mut probs = vec![0.0; r * v];
        k::softmax_rows(&self.nodes[logits.0].value, &mut probs, r, v);
        for (row, &t) in targets.iter().enumerate() {
            if Some(t) == ignore {
                continue;
            }
            total -= probs[row * v + t].ln();
            kept += 1;
        }
        if kept == 0 {
            return Err(Error::Contract("cross_entropy: every target ignored".into()));
        }
        let ng = self.nodes[logits.0].needs_grad;
        self.push(
            vec![1],
            vec![total / kept as f64],
            ng,
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                ignore,
            },
        )
    }

    // ---- backward ----------------------------------------------------------

    /// Reverse sweep from a scalar loss. Every `requires_grad` leaf reachable
    /// from `loss` ends up holding d(loss)/d(leaf); contributions from
    /// multiple uses accumulate additively.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.nodes[loss.0].shape
            )));
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        self.nodes[loss.0].grad = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            if self.nodes[i].grad.is_none() || !self.nodes[i].needs_grad {
                continue;
            }
            let op = self.nodes[i].op.clone();
            let g = self.nodes[i].grad.take().unwrap();
            self.apply_adjoint(i, &op, &g);
            self.nodes[i].grad = Some(g);
        }
        Ok(())
    }

    fn ensure_grad(&mut self, id: NodeId) -> &mut Vec<f64> {
        let len = self.nodes[id.0].value.len();
        self.nodes[id.0].grad.get_or_insert_with(|| vec![0.0; len])
    }

    fn add_grad_if_needed(&mut self, id: NodeId, delta: &[f64]) {
        if !self.nodes[id.0].needs_grad {
            return;
        }
        let grad = self.ensure_grad(id);
        for (d, s) in grad.iter_mut().zip(delta) {
            *d += s;
        }
    }

    fn apply_adjoint(&mut self, out: usize, op: &Op, g: &[f64]) {
        match *op {
            Op::Leaf { .. } => {}
            Op::Add(a, b) => {
                self.add_grad_if_needed(a, g);
                self.add_grad_if_needed(b, g);
            }
            Op::Sub(a, b) => {
                self.add_grad_if_needed(a, g);
                if self.nodes[b.0].needs_grad {
                    let grad = self.ensure_grad(b);
                    for (d, s) in grad.iter_mut().zip(g) {
                        *d -= s;
                    }
                }
            }
            Op::Mul(a, b) => {
                if self.nodes[a.0].needs_grad {
                    let delta: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[b.0].value)
                        .map(|(gv, bv)| gv * bv)
                        .collect();
                    self.add_grad_if_needed(a, &delta);
                }
                if self.nodes[b.0].needs_grad {
                    let delta: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[a.0].value)
                        .map(|(gv, av)| gv * av)
                        .collect();
                    self.add_grad_if_needed(b, &delta);
                }
            }
            Op::Scale(a, c) => {
                if self.nodes[a.0].needs_grad {
                    let delta: Vec<f64> = g.iter().map(|gv| gv * c).collect();
                    self.add_grad_if_needed(a, &delta);
                }
            }
            Op::AddScalar(a, _) => self.add_grad_if_needed(a, g),
            Op::Square(a) => {
                if self.nodes[a.0].needs_grad {
                    let delta: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[a.0].value)
                        .map(|(gv, xv)| 2.0 * xv * gv)
                        .collect();
                    self.add_grad_if_needed(a, &delta);
                }
            }
            Op::Abs(a) => {
                if self.nodes[a.0].needs_grad {
                    let delta: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[a.0].value)
                        .map(|(gv, xv)| gv * signum_zero(*xv))
                        .collect();
                    self.add_grad_if_needed(a, &delta);
                }
            }
            Op::Relu(a) => {
                if self.nodes[a.0].needs_grad {
                    let delta: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[a.0].value)
                        .map(|(gv, xv)| if *xv > 0.0 { *gv } else { 0.0 })
                        .collect();
                    self.add_grad_if_needed(a, &delta);
                }
            }
            Op::Tanh(a) => {
                if self.nodes[a.0].needs_grad {
                    let delta: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[out].value)
                        .map(|(gv, yv)| gv * (1.0 - yv * yv))
                        .collect();
                    self.add_grad_if_needed(a, &delta);
                }
            }
            Op::Gelu(a) => {
                if self.nodes[a.0].needs_grad {
                    let delta: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[a.0].value)
                        .map(|(gv, xv)| gv * gelu_derivative(*xv))
                        .collect();
                    self.add_grad_if_needed(a, &delta);
                }
            }
            Op::Matmul(a, b) => {
                let (m, kk) = (self.nodes[a.0].shape[0], self.nodes[a.0].shape[1]);
                let n = self.nodes[b.0].shape[1];
                if self.nodes[a.0].needs_grad {
                    let mut da = vec![0.0; m * kk];
                    k::gemm_nt(g, &self.nodes[b.0].value, &mut da, m, n, kk);
                    self.add_grad_if_needed(a, &da);
                }
                if self.nodes[b.0].needs_grad {
                    let mut db = vec![0.0; kk * n];
                    k::gemm_tn(&self.nodes[a.0].value, g, &mut db, kk, m, n);
                    self.add_grad_if_needed(b, &db);
                }
            }
            Op::MatmulNT(a, b) => {
                let (m, kk) = (self.nodes[a.0].shape[0], self.nodes[a.0].shape[1]);
                let n = self.nodes[b.0].shape[0];
                if self.nodes[a.0].needs_grad {
                    let mut da = vec![0.0; m * kk];
                    k::gemm_nn(g, &self.nodes[b.0].value, &mut da, m, n, kk);
                    self.add_grad_if_needed(a, &da);
                }
                if self.nodes[b.0].needs_grad {
                    let mut db = vec![0.0; n * kk];
                    k::gemm_tn(g, &self.nodes[a.0].value, &mut db, n, m, kk);
                    self.add_grad_if_needed(b, &db);
                }
            }
            Op::AddBiasRow(x, bias) => {
                self.add_grad_if_needed(x, g);
                if self.nodes[bias.0].needs_grad {
                    let c = self.nodes[bias.0].shape[0];
                    let r = g.len() / c;
                    let mut db = vec![0.0; c];
                    for row in 0..r {
                        for (d, s) in db.iter_mut().zip(&g[row * c..(row + 1) * c]) {
                            *d += s;
                        }
                    }
                    self.add_grad_if_needed(bias, &db);
                }
            }
            Op::Softmax(x) => {
                if self.nodes[x.0].needs_grad {
                    let c = *self.nodes[out].shape.last().unwrap();
                    let r = g.len() / c;
                    let y = &self.nodes[out].value;
                    let mut delta = vec![0.0; g.len()];
                    for row in 0..r {
                        let ys = &y[row * c..(row + 1) * c];
                        let gs = &g[row * c..(row + 1) * c];
                        let dot: f64 = ys.iter().zip(gs).map(|(a, b)| a * b).sum();
                        for j in 0..c {
                            delta[row * c + j] = ys[j] * (gs[j] - dot);
                        }
                    }
                    self.add_grad_if_needed(x, &delta);
                }
            }
            Op::LayerNorm { x, gamma, beta, eps } => {
                let c = self.nodes[gamma.0].shape[0];
                let r = g.len() / c;
                let xv = &self.nodes[x.0].value;
                let gv = &self.nodes[gamma.0].value;
                let mut dx = vec![0.0; r * c];
                let mut dgamma = vec![0.0; c];
                let mut dbeta = vec![0.0; c];
                for row in 0..r {
                    let xs = &xv[row * c..(row + 1) * c];
                    let gs = &g[row * c..(row + 1) * c];
                    let (mean, rstd) = k::row_moments(xs, c, eps);
                    let mut sum_dxhat = 0.0;
                    let mut sum_dxhat_xhat = 0.0;
                    for j in 0..c {
                        let xhat = (xs[j] - mean) * rstd;
                        let dxhat = gs[j] * gv[j];
                        dgamma[j] += gs[j] * xhat;
                        dbeta[j] += gs[j];
                        sum_dxhat += dxhat;
                        sum_dxhat_xhat += dxhat * xhat;
                    }
                    let inv_c = 1.0 / c as f64;
                    for j in 0..c {
                        let xhat = (xs[j] - mean) * rstd;
                        let dxhat = gs[j] * gv[j];
                        dx[row * c + j] =
                            rstd * (dxhat - inv_c * sum_dxhat - xhat * inv_c * sum_dxhat_xhat);
                    }
                }
                self.add_grad_if_needed(x, &dx);
                self.add_grad_if_needed(gamma, &dgamma);
                self.add_grad_if_needed(beta, &dbeta);
            }
            Op::Conv2d {
                x,
                w,
                bias,
                stride,
                padding,
                pad_mode,
            } => {
                let sx = self.nodes[x.0].shape.clone();
                let sw = self.nodes[w.0].shape.clone();
                let (b, c, h, w_in) = (sx[0], sx[1], sx[2], sx[3]);
                let (o, kh, kw) = (sw[0], sw[2], sw[3]);
                let oh = (h + 2 * padding - kh) / stride + 1;
                let ow = (w_in + 2 * padding - kw) / stride + 1;
                let ckk = c * kh * kw;
                let spatial = oh * ow;

                let x_needs = self.nodes[x.0].needs_grad;
                let w_needs = self.nodes[w.0].needs_grad;
                let mut dx = if x_needs { vec![0.0; b * c * h * w_in] } else { Vec::new() };
                let mut dw = if w_needs { vec![0.0; o * ckk] } else { Vec::new() };
                let mut cols = vec![0.0; ckk * spatial];
                let mut dcols = vec![0.0; ckk * spatial];
                for item in 0..b {
                    let g_item = &g[item * o * spatial..(item + 1) * o * spatial];
                    if w_needs {
                        let x_item =
                            &self.nodes[x.0].value[item * c * h * w_in..(item + 1) * c * h * w_in];
                        k::im2col(x_item, &mut cols, c, h, w_in, kh, kw, stride, padding, pad_mode, oh, ow);
                        // dW += g_item [o, spatial] @ cols^T [spatial, ckk]
                        k::gemm_nt(g_item, &cols, &mut dw, o, spatial, ckk);
                    }
                    if x_needs {
                        dcols.iter_mut().for_each(|v| *v = 0.0);
                        // dcols = W^T [ckk, o] @ g_item [o, spatial]
                        k::gemm_tn(&self.nodes[w.0].value, g_item, &mut dcols, ckk, o, spatial);
                        k::col2im(
                            &dcols,
                            &mut dx[item * c * h * w_in..(item + 1) * c * h * w_in],
                            c,
                            h,
                            w_in,
                            kh,
                            kw,
                            stride,
                            padding,
                            pad_mode,
                            oh,
                            ow,
                        );
                    }
                }
                if x_needs {
                    self.add_grad_if_needed(x, &dx);
                }
                if w_needs {
                    self.add_grad_if_needed(w, &dw);
                }
                if let Some(bn) = bias {
                    if self.nodes[bn.0].needs_grad {
                        let mut db = vec![0.0; o];
                        for item in 0..b {
                            for (ch, slot) in db.iter_mut().enumerate() {
                                let base = (item * o + ch) * spatial;
                                *slot += g[base..base + spatial].iter().sum::<f64>();
                            }
                        }
                        self.add_grad_if_needed(bn, &db);
                    }
                }
            }
            Op::AvgPool2x(x) => {
                if self.nodes[x.0].needs_grad {
                    let sx = self.nodes[x.0].shape.clone();
                    let mut dx = vec![0.0; self.nodes[x.0].value.len()];
                    k::avgpool2x_backward(g, &mut dx, sx[0] * sx[1], sx[2], sx[3]);
                    self.add_grad_if_needed(x, &dx);
                }
            }
            Op::UpsampleNearest2x(x) => {
                if self.nodes[x.0].needs_grad {
                    let sx = self.nodes[x.0].shape.clone();
                    let mut dx = vec![0.0; self.nodes[x.0].value.len()];
                    k::upsample_nearest2x_backward(g, &mut dx, sx[0] * sx[1], sx[2], sx[3]);
                    self.add_grad_if_needed(x, &dx);
                }
            }
            Op::GatherRows { table, ref indices } => {
                if self.nodes[table.0].needs_grad {
                    let d = self.nodes[table.0].shape[1];
                    let mut dt = vec![0.0; self.nodes[table.0].value.len()];
                    for (row, &idx) in indices.iter().enumerate() {
                        for (slot, s) in dt[idx * d..(idx + 1) * d]
                            .iter_mut()
                            .zip(&g[row * d..(row + 1) * d])
                        {
                            *slot += s;
                        }
                    }
                    self.add_grad_if_needed(table, &dt);
                }
            }
            Op::Reshape(x) => self.add_grad_if_needed(x, g),
            Op::ConcatRows(ref parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.nodes[p.0].value.len();
                    if self.nodes[p.0].needs_grad {
                        let delta = g[offset..offset + len].to_vec();
                        self.add_grad_if_needed(p, &delta);
                    }
                    offset += len;
                }
            }
            Op::ConcatChannels(a, b) => {
                let sa = self.nodes[a.0].shape.clone();
                let sb = self.nodes[b.0].shape.clone();
                let (bsz, c1, c2, plane) = (sa[0], sa[1], sb[1], sa[2] * sa[3]);
                if self.nodes[a.0].needs_grad {
                    let mut da = vec![0.0; bsz * c1 * plane];
                    for item in 0..bsz {
                        let src = item * (c1 + c2) * plane;
                        da[item * c1 * plane..(item + 1) * c1 * plane]
                            .copy_from_slice(&g[src..src + c1 * plane]);
                    }
                    self.add_grad_if_needed(a, &da);
                }
                if self.nodes[b.0].needs_grad {
                    let mut db = vec![0.0; bsz * c2 * plane];
                    for item in 0..bsz {
                        let src = item * (c1 + c2) * plane + c1 * plane;
                        db[item * c2 * plane..(item + 1) * c2 * plane]
                            .copy_from_slice(&g[src..src + c2 * plane]);
                    }
                    self.add_grad_if_needed(b, &db);
                }
            }
            Op::SliceCols { x, start, len } => {
                if self.nodes[x.0].needs_grad {
                    let c = self.nodes[x.0].shape[1];
                    let r = self.nodes[x.0].shape[0];
                    let mut dx = vec![0.0; r * c];
                    for row in 0..r {
                        dx[row * c + start..row * c + start + len]
                            .copy_from_slice(&g[row * len..(row + 1) * len]);
                    }
                    self.add_grad_if_needed(x, &dx);
                }
            }
            Op::ConcatCols(ref parts) => {
                let r = self.nodes[parts[0].0].shape[0];
                let total: usize = parts.iter().map(|&p| self.nodes[p.0].shape[1]).sum();
                let mut offset = 0;
                for &p in parts {
                    let c = self.nodes[p.0].shape[1];
                    if self.nodes[p.0].needs_grad {
                        let mut dp = vec![0.0; r * c];
                        for row in 0..r {
                            dp[row * c..(row + 1) * c]
                                .copy_from_slice(&g[row * total + offset..row * total + offset + c]);
                        }
                        self.add_grad_if_needed(p, &dp);
                    }
                    offset += c;
                }
            }
            Op::SumAll(x) => {
                if self.nodes[x.0].needs_grad {
                    let delta = vec![g[0]; self.nodes[x.0].value.len()];
                    self.add_grad_if_needed(x, &delta);
                }
            }
            Op::MeanAll(x) => {
                if self.nodes[x.0].needs_grad {
                    let n = self.nodes[x.0].value.len();
                    let delta = vec![g[0] / n as f64; n];
                    self.add_grad_if_needed(x, &delta);
                }
            }
            Op::CrossEntropy {
                logits,
                ref targets,
                ignore,
            } => {
                if self.nodes[logits.0].needs_grad {
                    let v = self.nodes[logits.0].shape[1];
                    let r = targets.len();
                    let kept = targets.iter().filter(|&&t| Some(t) != ignore).count() as f64;
                    let mut probs = vec![0.0; r * v];
                    k::softmax_rows(&self.nodes[logits.0].value, &mut probs, r, v);
                    let scale = g[0] / kept;
                    let mut delta = vec![0.0; r * v];
                    for (row, &t) in targets.iter().enumerate() {
                        if Some(t) == ignore {
                            continue;
                        }
                        for j in 0..v {
                            let indicator = if j == t { 1.0 } else { 0.0 };
                            delta[row * v + j] = scale * (probs[row * v + j] - indicator);
                        }
                    }
                    self.add_grad_if_needed(logits, &delta);
                }
            }
        }
    }
}

fn signum_zero(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044715;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_derivative(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    let du = GELU_C * (1.0 + 3.0 * GELU_A * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Leaf { .. } => "leaf",
        Op::Add(..) => "add",
        Op::Sub(..) => "sub",
        Op::Mul(..) => "mul",
        Op::Scale(..) => "scale",
        Op::AddScalar(..) => "add_scalar",
        Op::Square(..) => "square",
        Op::Abs(..) => "abs",
        Op::Relu(..) => "relu",
        Op::Tanh(..) => "tanh",
        Op::Gelu(..) => "gelu",
        Op::Matmul(..) => "matmul",
        Op::MatmulNT(..) => "matmul_nt",
        Op::AddBiasRow(..) => "add_bias_row",
        Op::Softmax(..) => "softmax",
        Op::LayerNorm { .. } => "layer_norm",
        Op::Conv2d { .. } => "conv2d",
        Op::AvgPool2x(..) => "avgpool2x",
        Op::UpsampleNearest2x(..) => "upsample_nearest2x",
        Op::GatherRows { .. } => "gather_rows",
        Op::Reshape(..) => "reshape",
        Op::ConcatRows(..) => "concat_rows",
        Op::ConcatChannels(..) => "concat_channels",
        Op::SliceCols { .. } => "slice_cols",
        Op::ConcatCols(..) => "concat_cols",
        Op::SumAll(..) => "sum_all",
        Op::MeanAll(..) => "mean_all",
        Op::CrossEntropy { .. } => "cross_entropy",
    }
}
