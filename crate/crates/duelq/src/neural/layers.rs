//! Dense and 1-D convolution layers with explicit forward/backward passes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use super::NeuralError;

/// Fully connected layer. Weights are `[out_dim x in_dim]` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    /// Xavier-uniform weights, zero biases.
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        Self {
            in_dim,
            out_dim,
            weights,
            bias: vec![0.0; out_dim],
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// `x`: [batch x in_dim] -> [batch x out_dim].
    pub fn forward(&self, x: &Tensor) -> Result<Tensor, NeuralError> {
        if x.shape().len() != 2 || x.ncols() != self.in_dim {
            return Err(NeuralError::ShapeMismatch {
                expected: format!("[batch, {}]", self.in_dim),
                got: format!("{:?}", x.shape()),
            });
        }
        let batch = x.nrows();
        let mut out = Tensor::zeros([batch, self.out_dim]);
        for b in 0..batch {
            let xi = x.row(b);
            let oi = out.row_mut(b);
            for o in 0..self.out_dim {
                let w = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
                let mut acc = self.bias[o];
                for i in 0..self.in_dim {
                    acc += w[i] * xi[i];
                }
                oi[o] = acc;
            }
        }
        Ok(out)
    }

    /// Given the cached input and upstream gradient, returns parameter
    /// gradients and the gradient with respect to the input.
    pub fn backward(&self, x: &Tensor, d_out: &Tensor) -> Result<(DenseGrad, Tensor), NeuralError> {
        let batch = x.nrows();
        if d_out.nrows() != batch || d_out.ncols() != self.out_dim {
            return Err(NeuralError::ShapeMismatch {
                expected: format!("[{batch}, {}]", self.out_dim),
                got: format!("{:?}", d_out.shape()),
            });
        }
        let mut d_w = vec![0.0; self.weights.len()];
        let mut d_b = vec![0.0; self.out_dim];
        let mut d_in = Tensor::zeros([batch, self.in_dim]);
        for b in 0..batch {
            let xi = x.row(b);
            let gi = d_out.row(b);
            let di = d_in.row_mut(b);
            for o in 0..self.out_dim {
                let g = gi[o];
                d_b[o] += g;
                let w = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
                let dw = &mut d_w[o * self.in_dim..(o + 1) * self.in_dim];
                for i in 0..self.in_dim {
                    dw[i] += g * xi[i];
                    di[i] += g * w[i];
                }
            }
        }
        Ok((DenseGrad { weights: d_w, bias: d_b }, d_in))
    }
}

/// Valid (no padding) 1-D cross-correlation layer.
/// Kernels are `[out_ch x in_ch x kernel]` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1dLayer {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub kernels: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Output length of a valid 1-D convolution.
pub fn conv_out_len(n: usize, kernel: usize, stride: usize) -> usize {
    (n - kernel) / stride + 1
}

impl Conv1dLayer {
    pub fn init(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = in_ch * kernel;
        let fan_out = out_ch * kernel;
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let kernels = (0..out_ch * in_ch * kernel)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        Self {
            in_ch,
            out_ch,
            kernel,
            stride,
            kernels,
            bias: vec![0.0; out_ch],
        }
    }

    fn kernel_at(&self, oc: usize, ic: usize) -> &[f64] {
        let base = (oc * self.in_ch + ic) * self.kernel;
        &self.kernels[base..base + self.kernel]
    }

    /// `x`: [batch x in_ch x n] -> [batch x out_ch x out_len].
    pub fn forward(&self, x: &Tensor) -> Result<Tensor, NeuralError> {
        let (batch, n) = self.check_input(x)?;
        let out_len = conv_out_len(n, self.kernel, self.stride);
        let mut out = Tensor::zeros([batch, self.out_ch, out_len]);
        let xd = x.data();
        let od = out.data_mut();
        for b in 0..batch {
            for oc in 0..self.out_ch {
                for t in 0..out_len {
                    let mut acc = self.bias[oc];
                    for ic in 0..self.in_ch {
                        let k = self.kernel_at(oc, ic);
                        let row = &xd[(b * self.in_ch + ic) * n..][..n];
                        let start = t * self.stride;
                        for j in 0..self.kernel {
                            acc += k[j] * row[start + j];
                        }
                    }
                    od[(b * self.out_ch + oc) * out_len + t] = acc;
                }
            }
        }
        Ok(out)
    }

    pub fn backward(&self, x: &Tensor, d_out: &Tensor) -> Result<(ConvGrad, Tensor), NeuralError> {
        let (batch, n) = self.check_input(x)?;
        let out_len = conv_out_len(n, self.kernel, self.stride);
        if d_out.shape() != [batch, self.out_ch, out_len] {
            return Err(NeuralError::ShapeMismatch {
                expected: format!("[{batch}, {}, {out_len}]", self.out_ch),
                got: format!("{:?}", d_out.shape()),
            });
        }
        let mut d_k = vec![0.0; self.kernels.len()];
        let mut d_b = vec![0.0; self.out_ch];
        let mut d_in = Tensor::zeros([batch, self.in_ch, n]);
        let xd = x.data();
        let gd = d_out.data();
        let dd = d_in.data_mut();
        for b in 0..batch {
            for oc in 0..self.out_ch {
                for t in 0..out_len {
                    let g = gd[(b * self.out_ch + oc) * out_len + t];
                    d_b[oc] += g;
                    let start = t * self.stride;
                    for ic in 0..self.in_ch {
                        let kbase = (oc * self.in_ch + ic) * self.kernel;
                        let row_base = (b * self.in_ch + ic) * n + start;
                        for j in 0..self.kernel {
                            d_k[kbase + j] += g * xd[row_base + j];
                            dd[row_base + j] += g * self.kernels[kbase + j];
                        }
                    }
                }
            }
        }
        Ok((ConvGrad { kernels: d_k, bias: d_b }, d_in))
    }

    fn check_input(&self, x: &Tensor) -> Result<(usize, usize), NeuralError> {
        if x.shape().len() != 3 || x.shape()[1] != self.in_ch {
            return Err(NeuralError::ShapeMismatch {
                expected: format!("[batch, {}, n]", self.in_ch),
                got: format!("{:?}", x.shape()),
            });
        }
        let n = x.shape()[2];
        if n < self.kernel {
            return Err(NeuralError::KernelTooLarge {
                kernel: self.kernel,
                len: n,
            });
        }
        Ok((x.shape()[0], n))
    }
}

/// Cross-correlation of a single `[channels x n]` sample, plus bias.
pub fn conv1d_forward(
    input: &Tensor,
    kernels: &Tensor,
    bias: &[f64],
    stride: usize,
) -> Result<Tensor, NeuralError> {
    if input.shape().len() != 2 {
        return Err(NeuralError::ShapeMismatch {
            expected: "[channels, n]".into(),
            got: format!("{:?}", input.shape()),
        });
    }
    if kernels.shape().len() != 3 || kernels.shape()[1] != input.shape()[0] {
        return Err(NeuralError::ShapeMismatch {
            expected: format!("[out_ch, {}, k]", input.shape()[0]),
            got: format!("{:?}", kernels.shape()),
        });
    }
    let layer = Conv1dLayer {
        in_ch: kernels.shape()[1],
        out_ch: kernels.shape()[0],
        kernel: kernels.shape()[2],
        stride,
        kernels: kernels.data().to_vec(),
        bias: bias.to_vec(),
    };
    let batched = input.reshaped([1, input.shape()[0], input.shape()[1]])?;
    let out = layer.forward(&batched)?;
    let (oc, ol) = (out.shape()[1], out.shape()[2]);
    out.reshaped([oc, ol])
}

/// A trunk layer: parameterized (dense / conv) or the rectifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Layer {
    Dense(DenseLayer),
    Conv1d(Conv1dLayer),
    Relu,
}

impl Layer {
    pub fn forward(&self, x: &Tensor) -> Result<Tensor, NeuralError> {
        match self {
            Layer::Dense(l) => l.forward(x),
            Layer::Conv1d(l) => l.forward(x),
            Layer::Relu => {
                let mut y = x.clone();
                for v in y.data_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                Ok(y)
            }
        }
    }

    /// Returns this layer's parameter gradient and the input gradient.
    pub fn backward(&self, x: &Tensor, d_out: &Tensor) -> Result<(LayerGrad, Tensor), NeuralError> {
        match self {
            Layer::Dense(l) => {
                let (g, d_in) = l.backward(x, d_out)?;
                Ok((LayerGrad::Dense(g), d_in))
            }
            Layer::Conv1d(l) => {
                let (g, d_in) = l.backward(x, d_out)?;
                Ok((LayerGrad::Conv1d(g), d_in))
            }
            Layer::Relu => {
                if x.shape() != d_out.shape() {
                    return Err(NeuralError::ShapeMismatch {
                        expected: format!("{:?}", x.shape()),
                        got: format!("{:?}", d_out.shape()),
                    });
                }
                let mut d_in = d_out.clone();
                for (d, &v) in d_in.data_mut().iter_mut().zip(x.data()) {
                    if v <= 0.0 {
                        *d = 0.0;
                    }
                }
                Ok((LayerGrad::None, d_in))
            }
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Layer::Dense(l) => l.weights.len() + l.bias.len(),
            Layer::Conv1d(l) => l.kernels.len() + l.bias.len(),
            Layer::Relu => 0,
        }
    }
}

/// Gradients for a dense layer, same element order as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradients for a conv layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrad {
    pub kernels: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Per-layer gradient matching the layer's parameter shapes.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerGrad {
    Dense(DenseGrad),
    Conv1d(ConvGrad),
    None,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_kernel_passes_input_through() {
        let input = Tensor::new([1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let kernels = Tensor::new([1, 1, 1], vec![1.0]).unwrap();
        let out = conv1d_forward(&input, &kernels, &[0.0], 1).unwrap();
        assert_eq!(out.data(), input.data());
    }

    #[test]
    fn hand_cross_correlation() {
        let input = Tensor::new([1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let kernels = Tensor::new([1, 1, 2], vec![1.0, -1.0]).unwrap();
        let out = conv1d_forward(&input, &kernels, &[0.0], 1).unwrap();
        assert_eq!(out.data(), &[-1.0, -1.0, -1.0]);
    }

    #[test]
    fn kernel_longer_than_input_errors() {
        let input = Tensor::new([1, 2], vec![1.0, 2.0]).unwrap();
        let kernels = Tensor::new([1, 1, 3], vec![1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            conv1d_forward(&input, &kernels, &[0.0], 1),
            Err(NeuralError::KernelTooLarge { .. })
        ));
    }

    #[test]
    fn dense_weight_grad_sums_inputs_over_batch() {
        // L = sum(y) with y = Wx + b: dW[o][i] = sum_b x[b][i].
        let layer = DenseLayer::zeros(3, 2);
        let x = Tensor::new([2, 3], vec![1.0, 2.0, 3.0, 10.0, 20.0, 30.0]).unwrap();
        let d_out = Tensor::new([2, 2], vec![1.0; 4]).unwrap();
        let (grad, _) = layer.backward(&x, &d_out).unwrap();
        assert_eq!(grad.weights, vec![11.0, 22.0, 33.0, 11.0, 22.0, 33.0]);
        assert_eq!(grad.bias, vec![2.0, 2.0]);
    }

    proptest! {
        #[test]
        fn conv_shape_law(n in 1usize..40, k in 1usize..40, stride in 1usize..4) {
            prop_assume!(n >= k);
            let input = Tensor::zeros([1, n]);
            let kernels = Tensor::zeros([2, 1, k]);
            let out = conv1d_forward(&input, &kernels, &[0.0, 0.0], stride).unwrap();
            prop_assert_eq!(out.shape(), &[2, (n - k) / stride + 1]);
        }
    }
}
