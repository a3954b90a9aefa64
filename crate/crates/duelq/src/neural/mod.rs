//! Minimal neural-network core: tensors, dense and 1-D convolution layers,
//! the dueling value/advantage head pair, exact reverse-mode gradients, and
//! a finite-difference gradient checker.
//!
//! Two trunk architectures are supported. `ffdqn` feeds the flattened
//! observation through dense layers. `cnn` runs the bar window (channels x N)
//! through 1-D convolutions, flattens, appends the position flag and
//! unrealized P&L, and continues through dense layers. Both end in a shared
//! feature vector consumed by the two heads, recombined as
//! `Q(s,a) = V(s) + A(s,a) - mean_a' A(s,a')`.

mod checkpoint;
mod gradcheck;
mod layers;
mod optim;
mod tensor;

pub use checkpoint::Checkpoint;
pub use gradcheck::{gradcheck, gradcheck_with_fault, MseLoss, QLoss, WeightedSumLoss};
pub use layers::{
    conv1d_forward, conv_out_len, Conv1dLayer, ConvGrad, DenseGrad, DenseLayer, Layer, LayerGrad,
};
pub use optim::{sgd_update, Optimizer, OptimizerConfig, OptimizerKind};
pub use tensor::Tensor;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Size of the action space.
pub const NUM_ACTIONS: usize = 3;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("kernel size {kernel} exceeds input length {len}")]
    KernelTooLarge { kernel: usize, len: usize },
    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),
    #[error("stale forward cache: parameters changed since the forward pass")]
    StaleCache,
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchTag {
    Ffdqn,
    Cnn,
}

impl std::fmt::Display for ArchTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ArchTag::Ffdqn => write!(f, "ffdqn"),
            ArchTag::Cnn => write!(f, "cnn"),
        }
    }
}

/// One convolution stage of a CNN trunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
}

/// Config-facing network description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetSpec {
    pub arch: ArchTag,
    /// Dense trunk widths (after the conv stack for `cnn`).
    pub hidden: Vec<usize>,
    /// Conv stack, used only by `cnn`.
    pub conv: Vec<ConvSpec>,
}

impl Default for NetSpec {
    fn default() -> Self {
        Self {
            arch: ArchTag::Ffdqn,
            hidden: vec![128, 128],
            conv: vec![
                ConvSpec { out_ch: 32, kernel: 5, stride: 1 },
                ConvSpec { out_ch: 32, kernel: 5, stride: 1 },
            ],
        }
    }
}

impl NetSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.hidden.iter().any(|&h| h == 0) {
            return Err("hidden widths must be positive".into());
        }
        if self.arch == ArchTag::Cnn {
            for (i, c) in self.conv.iter().enumerate() {
                if c.out_ch == 0 || c.kernel == 0 || c.stride == 0 {
                    return Err(format!("conv[{i}] fields must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// The input layout a network was built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputLayout {
    /// Bar channels: 3 (high/low/close) or 4 (plus volume).
    pub channels: usize,
    /// Bars per observation window.
    pub window: usize,
    /// Scalars appended after the bar block (position flag, unrealized P&L).
    pub extras: usize,
}

impl InputLayout {
    pub fn flat_len(&self) -> usize {
        self.channels * self.window + self.extras
    }
}

/// Q-network with a shared trunk and dueling value/advantage heads.
#[derive(Debug, Clone)]
pub struct DuelingNet {
    arch: ArchTag,
    layout: InputLayout,
    conv_stack: Vec<Layer>,
    dense_stack: Vec<Layer>,
    value_head: DenseLayer,
    advantage_head: DenseLayer,
    version: u64,
}

/// Activation record produced by [`DuelingNet::forward`], consumed by
/// [`DuelingNet::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    batch: usize,
    conv_inputs: Vec<Tensor>,
    conv_out_shape: Option<Vec<usize>>,
    dense_inputs: Vec<Tensor>,
    features: Tensor,
}

/// Gradients for every parameterized part of a [`DuelingNet`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub conv: Vec<LayerGrad>,
    pub dense: Vec<LayerGrad>,
    pub value_head: DenseGrad,
    pub advantage_head: DenseGrad,
}

impl LayerGrads {
    /// Flattens in the same order as [`DuelingNet::params_flat`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in self.conv.iter().chain(self.dense.iter()) {
            match g {
                LayerGrad::Dense(d) => {
                    out.extend_from_slice(&d.weights);
                    out.extend_from_slice(&d.bias);
                }
                LayerGrad::Conv1d(c) => {
                    out.extend_from_slice(&c.kernels);
                    out.extend_from_slice(&c.bias);
                }
                LayerGrad::None => {}
            }
        }
        out.extend_from_slice(&self.value_head.weights);
        out.extend_from_slice(&self.value_head.bias);
        out.extend_from_slice(&self.advantage_head.weights);
        out.extend_from_slice(&self.advantage_head.bias);
        out
    }
}

/// `q[b,a] = v[b] + a[b,a] - mean_a' a[b,a']`.
pub fn dueling_aggregate(v: &Tensor, a: &Tensor) -> Result<Tensor, NeuralError> {
    if v.shape().len() != 2 || v.ncols() != 1 || a.shape().len() != 2 || v.nrows() != a.nrows() {
        return Err(NeuralError::ShapeMismatch {
            expected: format!("v [batch, 1] and a [batch, k] with equal batch"),
            got: format!("v {:?}, a {:?}", v.shape(), a.shape()),
        });
    }
    let actions = a.ncols();
    let mut q = Tensor::zeros([a.nrows(), actions]);
    for b in 0..a.nrows() {
        let row = a.row(b);
        let mean = row.iter().sum::<f64>() / actions as f64;
        let vb = v.row(b)[0];
        let qr = q.row_mut(b);
        for j in 0..actions {
            qr[j] = vb + row[j] - mean;
        }
    }
    Ok(q)
}

impl DuelingNet {
    /// Builds a network for the given spec and input layout.
    pub fn build(
        spec: &NetSpec,
        layout: InputLayout,
        rng: &mut impl Rng,
    ) -> Result<Self, NeuralError> {
        spec.validate().map_err(|m| NeuralError::ShapeMismatch {
            expected: "valid net spec".into(),
            got: m,
        })?;
        let mut conv_stack = Vec::new();
        let mut dense_stack = Vec::new();
        let mut feat;
        match spec.arch {
            ArchTag::Ffdqn => {
                feat = layout.flat_len();
            }
            ArchTag::Cnn => {
                let mut in_ch = layout.channels;
                let mut len = layout.window;
                for c in &spec.conv {
                    if c.kernel > len {
                        return Err(NeuralError::KernelTooLarge {
                            kernel: c.kernel,
                            len,
                        });
                    }
                    conv_stack.push(Layer::Conv1d(Conv1dLayer::init(
                        in_ch, c.out_ch, c.kernel, c.stride, rng,
                    )));
                    conv_stack.push(Layer::Relu);
                    len = conv_out_len(len, c.kernel, c.stride);
                    in_ch = c.out_ch;
                }
                feat = in_ch * len + layout.extras;
            }
        }
        for &h in &spec.hidden {
            dense_stack.push(Layer::Dense(DenseLayer::init(feat, h, rng)));
            dense_stack.push(Layer::Relu);
            feat = h;
        }
        Ok(Self {
            arch: spec.arch,
            layout,
            conv_stack,
            dense_stack,
            value_head: DenseLayer::init(feat, 1, rng),
            advantage_head: DenseLayer::init(feat, NUM_ACTIONS, rng),
            version: 0,
        })
    }

    pub fn arch(&self) -> ArchTag {
        self.arch
    }

    pub fn layout(&self) -> InputLayout {
        self.layout
    }

    pub fn input_dim(&self) -> usize {
        self.layout.flat_len()
    }

    pub fn feature_dim(&self) -> usize {
        self.value_head.in_dim
    }

    /// Monotone counter bumped on every parameter mutation; forward caches
    /// record it so stale caches are rejected.
    pub fn version(&self) -> u64 {
        self.version
    }

    /// Structural signature used for architecture-compatibility checks.
    fn signature(&self) -> String {
        let mut s = format!("{}|{:?}", self.arch, self.layout);
        for l in self.conv_stack.iter().chain(self.dense_stack.iter()) {
            match l {
                Layer::Dense(d) => s.push_str(&format!("|d{}x{}", d.in_dim, d.out_dim)),
                Layer::Conv1d(c) => s.push_str(&format!(
                    "|c{}x{}k{}s{}",
                    c.in_ch, c.out_ch, c.kernel, c.stride
                )),
                Layer::Relu => s.push_str("|r"),
            }
        }
        s.push_str(&format!(
            "|v{}x{}|a{}x{}",
            self.value_head.in_dim,
            self.value_head.out_dim,
            self.advantage_head.in_dim,
            self.advantage_head.out_dim
        ));
        s
    }

    pub fn same_architecture(&self, other: &DuelingNet) -> bool {
        self.signature() == other.signature()
    }

    /// Q-values for a batch of flattened observations `[batch x input_dim]`.
    pub fn forward(&self, batch: &Tensor) -> Result<(Tensor, ForwardCache), NeuralError> {
        if batch.shape().len() != 2 || batch.ncols() != self.input_dim() {
            return Err(NeuralError::ShapeMismatch {
                expected: format!("[batch, {}]", self.input_dim()),
                got: format!("{:?}", batch.shape()),
            });
        }
        let n = batch.nrows();
        let mut cache = ForwardCache {
            version: self.version,
            batch: n,
            conv_inputs: Vec::new(),
            conv_out_shape: None,
            dense_inputs: Vec::new(),
            features: Tensor::zeros([0, 0]),
        };

        let dense_in = match self.arch {
            ArchTag::Ffdqn => batch.clone(),
            ArchTag::Cnn => {
                let (bars, extras) = self.split_input(batch)?;
                let mut x = bars;
                for layer in &self.conv_stack {
                    cache.conv_inputs.push(x.clone());
                    x = layer.forward(&x)?;
                }
                cache.conv_out_shape = Some(x.shape().to_vec());
                self.concat_extras(&x, &extras)?
            }
        };

        let mut x = dense_in;
        for layer in &self.dense_stack {
            cache.dense_inputs.push(x.clone());
            x = layer.forward(&x)?;
        }
        cache.features = x.clone();
        let v = self.value_head.forward(&x)?;
        let a = self.advantage_head.forward(&x)?;
        let q = dueling_aggregate(&v, &a)?;
        Ok((q, cache))
    }

    /// Exact reverse-mode gradients of `sum(q * dl_dq)` with respect to every
    /// parameter, including the dueling aggregation's Jacobian.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        dl_dq: &Tensor,
    ) -> Result<LayerGrads, NeuralError> {
        if cache.version != self.version {
            return Err(NeuralError::StaleCache);
        }
        if dl_dq.shape() != [cache.batch, NUM_ACTIONS] {
            return Err(NeuralError::ShapeMismatch {
                expected: format!("[{}, {NUM_ACTIONS}]", cache.batch),
                got: format!("{:?}", dl_dq.shape()),
            });
        }

        // Through the aggregation: dV = sum_a dQ; dA = dQ - mean_a dQ.
        let mut dv = Tensor::zeros([cache.batch, 1]);
        let mut da = Tensor::zeros([cache.batch, NUM_ACTIONS]);
        for b in 0..cache.batch {
            let g = dl_dq.row(b);
            let sum: f64 = g.iter().sum();
            dv.row_mut(b)[0] = sum;
            let mean = sum / NUM_ACTIONS as f64;
            let dr = da.row_mut(b);
            for j in 0..NUM_ACTIONS {
                dr[j] = g[j] - mean;
            }
        }

        let (vh_grad, d_feat_v) = self.value_head.backward(&cache.features, &dv)?;
        let (ah_grad, d_feat_a) = self.advantage_head.backward(&cache.features, &da)?;
        let mut d = d_feat_v;
        for (x, y) in d.data_mut().iter_mut().zip(d_feat_a.data()) {
            *x += y;
        }

        let mut dense_grads = Vec::with_capacity(self.dense_stack.len());
        for (layer, input) in self
            .dense_stack
            .iter()
            .zip(cache.dense_inputs.iter())
            .rev()
        {
            let (g, d_in) = layer.backward(input, &d)?;
            dense_grads.push(g);
            d = d_in;
        }
        dense_grads.reverse();

        let mut conv_grads = Vec::with_capacity(self.conv_stack.len());
        if self.arch == ArchTag::Cnn {
            let shape = cache
                .conv_out_shape
                .as_ref()
                .ok_or(NeuralError::StaleCache)?;
            // Drop the extras columns; they carry no parameters.
            let flat_bar = shape.iter().skip(1).product::<usize>();
            let mut d_bar = Tensor::zeros(shape.clone());
            for b in 0..cache.batch {
                let src = d.row(b);
                d_bar.data_mut()[b * flat_bar..(b + 1) * flat_bar]
                    .copy_from_slice(&src[..flat_bar]);
            }
            let mut dc = d_bar;
            for (layer, input) in self
                .conv_stack
                .iter()
                .zip(cache.conv_inputs.iter())
                .rev()
            {
                let (g, d_in) = layer.backward(input, &dc)?;
                conv_grads.push(g);
                dc = d_in;
            }
            conv_grads.reverse();
        }

        Ok(LayerGrads {
            conv: conv_grads,
            dense: dense_grads,
            value_head: vh_grad,
            advantage_head: ah_grad,
        })
    }

    fn split_input(&self, batch: &Tensor) -> Result<(Tensor, Tensor), NeuralError> {
        let n = batch.nrows();
        let bar_len = self.layout.channels * self.layout.window;
        let mut bars = Tensor::zeros([n, self.layout.channels, self.layout.window]);
        let mut extras = Tensor::zeros([n, self.layout.extras]);
        for b in 0..n {
            let row = batch.row(b);
            bars.data_mut()[b * bar_len..(b + 1) * bar_len].copy_from_slice(&row[..bar_len]);
            extras.row_mut(b).copy_from_slice(&row[bar_len..]);
        }
        Ok((bars, extras))
    }

    fn concat_extras(&self, conv_out: &Tensor, extras: &Tensor) -> Result<Tensor, NeuralError> {
        let n = conv_out.shape()[0];
        let flat = conv_out.numel() / n;
        let cols = flat + self.layout.extras;
        let mut out = Tensor::zeros([n, cols]);
        for b in 0..n {
            let dst = out.row_mut(b);
            dst[..flat].copy_from_slice(&conv_out.data()[b * flat..(b + 1) * flat]);
            dst[flat..].copy_from_slice(extras.row(b));
        }
        Ok(out)
    }

    pub fn param_count(&self) -> usize {
        self.conv_stack
            .iter()
            .chain(self.dense_stack.iter())
            .map(Layer::param_count)
            .sum::<usize>()
            + self.value_head.weights.len()
            + self.value_head.bias.len()
            + self.advantage_head.weights.len()
            + self.advantage_head.bias.len()
    }

    /// All parameters, flattened: conv stack, dense stack, value head,
    /// advantage head; within a layer, weights/kernels then bias.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in self.conv_stack.iter().chain(self.dense_stack.iter()) {
            match l {
                Layer::Dense(d) => {
                    out.extend_from_slice(&d.weights);
                    out.extend_from_slice(&d.bias);
                }
                Layer::Conv1d(c) => {
                    out.extend_from_slice(&c.kernels);
                    out.extend_from_slice(&c.bias);
                }
                Layer::Relu => {}
            }
        }
        out.extend_from_slice(&self.value_head.weights);
        out.extend_from_slice(&self.value_head.bias);
        out.extend_from_slice(&self.advantage_head.weights);
        out.extend_from_slice(&self.advantage_head.bias);
        out
    }

    /// Overwrites all parameters from a flat vector (same order as
    /// [`params_flat`](Self::params_flat)).
    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<(), NeuralError> {
        if params.len() != self.param_count() {
            return Err(NeuralError::ShapeMismatch {
                expected: format!("{} parameters", self.param_count()),
                got: format!("{}", params.len()),
            });
        }
        let mut off = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&params[off..off + dst.len()]);
            off += dst.len();
        };
        for l in self.conv_stack.iter_mut().chain(self.dense_stack.iter_mut()) {
            match l {
                Layer::Dense(d) => {
                    take(&mut d.weights);
                    take(&mut d.bias);
                }
                Layer::Conv1d(c) => {
                    take(&mut c.kernels);
                    take(&mut c.bias);
                }
                Layer::Relu => {}
            }
        }
        take(&mut self.value_head.weights);
        take(&mut self.value_head.bias);
        take(&mut self.advantage_head.weights);
        take(&mut self.advantage_head.bias);
        self.version += 1;
        Ok(())
    }

    pub(crate) fn stacks(&self) -> (&[Layer], &[Layer], &DenseLayer, &DenseLayer) {
        (
            &self.conv_stack,
            &self.dense_stack,
            &self.value_head,
            &self.advantage_head,
        )
    }

    pub(crate) fn from_parts(
        arch: ArchTag,
        layout: InputLayout,
        conv_stack: Vec<Layer>,
        dense_stack: Vec<Layer>,
        value_head: DenseLayer,
        advantage_head: DenseLayer,
    ) -> Self {
        Self {
            arch,
            layout,
            conv_stack,
            dense_stack,
            value_head,
            advantage_head,
            version: 0,
        }
    }
}

/// Copies the online network's parameters into the target network.
/// Subsequent online updates do not affect the target.
pub fn sync_target(online: &DuelingNet, target: &mut DuelingNet) -> Result<(), NeuralError> {
    if !online.same_architecture(target) {
        return Err(NeuralError::ArchitectureMismatch(format!(
            "{} vs {}",
            online.signature(),
            target.signature()
        )));
    }
    target.set_params_flat(&online.params_flat())
}
