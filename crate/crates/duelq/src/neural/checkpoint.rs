//! JSON checkpoint format for [`DuelingNet`].
//!
//! One document: format version, architecture tag, input layout, a flat list
//! of layer specs (trunk layers in order, then the two heads), a parallel
//! list of parameter blocks as nested arrays, the master RNG seed, and the
//! training step the snapshot was taken at. Loading validates every
//! parameter block against its spec.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layers::{Conv1dLayer, DenseLayer, Layer};
use super::{ArchTag, DuelingNet, InputLayout, NeuralError};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LayerSpec {
    Dense { in_dim: usize, out_dim: usize },
    Relu,
    Conv1d { in_ch: usize, out_ch: usize, kernel: usize, stride: usize },
    /// Marks where the conv stack output is flattened and the extra scalars
    /// are appended (cnn only).
    FlattenConcat,
    ValueHead { in_dim: usize, out_dim: usize },
    AdvantageHead { in_dim: usize, out_dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum LayerParams {
    Dense { weights: Vec<Vec<f64>>, bias: Vec<f64> },
    Conv1d { kernels: Vec<Vec<Vec<f64>>>, bias: Vec<f64> },
    Empty {},
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub arch_tag: ArchTag,
    pub input: InputLayout,
    layer_specs: Vec<LayerSpec>,
    parameters: Vec<LayerParams>,
    pub rng_seed: u64,
    pub training_step: u64,
}

fn dense_params(l: &DenseLayer) -> LayerParams {
    let weights = (0..l.out_dim)
        .map(|o| l.weights[o * l.in_dim..(o + 1) * l.in_dim].to_vec())
        .collect();
    LayerParams::Dense { weights, bias: l.bias.clone() }
}

fn conv_params(l: &Conv1dLayer) -> LayerParams {
    let kernels = (0..l.out_ch)
        .map(|oc| {
            (0..l.in_ch)
                .map(|ic| {
                    let base = (oc * l.in_ch + ic) * l.kernel;
                    l.kernels[base..base + l.kernel].to_vec()
                })
                .collect()
        })
        .collect();
    LayerParams::Conv1d { kernels, bias: l.bias.clone() }
}

fn dense_from_params(
    spec_in: usize,
    spec_out: usize,
    params: &LayerParams,
    what: &str,
) -> Result<DenseLayer, NeuralError> {
    let LayerParams::Dense { weights, bias } = params else {
        return Err(NeuralError::CheckpointMismatch(format!(
            "{what}: expected dense parameters"
        )));
    };
    if weights.len() != spec_out || bias.len() != spec_out {
        return Err(NeuralError::CheckpointMismatch(format!(
            "{what}: expected {spec_out} output rows"
        )));
    }
    let mut flat = Vec::with_capacity(spec_in * spec_out);
    for row in weights {
        if row.len() != spec_in {
            return Err(NeuralError::CheckpointMismatch(format!(
                "{what}: expected rows of {spec_in} weights"
            )));
        }
        flat.extend_from_slice(row);
    }
    Ok(DenseLayer {
        in_dim: spec_in,
        out_dim: spec_out,
        weights: flat,
        bias: bias.clone(),
    })
}

fn conv_from_params(
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    stride: usize,
    params: &LayerParams,
) -> Result<Conv1dLayer, NeuralError> {
    let LayerParams::Conv1d { kernels, bias } = params else {
        return Err(NeuralError::CheckpointMismatch(
            "conv1d: expected conv parameters".into(),
        ));
    };
    if kernels.len() != out_ch || bias.len() != out_ch {
        return Err(NeuralError::CheckpointMismatch(format!(
            "conv1d: expected {out_ch} output channels"
        )));
    }
    let mut flat = Vec::with_capacity(out_ch * in_ch * kernel);
    for per_out in kernels {
        if per_out.len() != in_ch {
            return Err(NeuralError::CheckpointMismatch(format!(
                "conv1d: expected {in_ch} input channels"
            )));
        }
        for k in per_out {
            if k.len() != kernel {
                return Err(NeuralError::CheckpointMismatch(format!(
                    "conv1d: expected kernel length {kernel}"
                )));
            }
            flat.extend_from_slice(k);
        }
    }
    Ok(Conv1dLayer {
        in_ch,
        out_ch,
        kernel,
        stride,
        kernels: flat,
        bias: bias.clone(),
    })
}

impl Checkpoint {
    pub fn from_net(net: &DuelingNet, rng_seed: u64, training_step: u64) -> Self {
        let (conv, dense, vh, ah) = net.stacks();
        let mut layer_specs = Vec::new();
        let mut parameters = Vec::new();
        for l in conv {
            match l {
                Layer::Conv1d(c) => {
                    layer_specs.push(LayerSpec::Conv1d {
                        in_ch: c.in_ch,
                        out_ch: c.out_ch,
                        kernel: c.kernel,
                        stride: c.stride,
                    });
                    parameters.push(conv_params(c));
                }
                Layer::Relu => {
                    layer_specs.push(LayerSpec::Relu);
                    parameters.push(LayerParams::Empty {});
                }
                Layer::Dense(_) => unreachable!("dense layer in conv stack"),
            }
        }
        if net.arch() == ArchTag::Cnn {
            layer_specs.push(LayerSpec::FlattenConcat);
            parameters.push(LayerParams::Empty {});
        }
        for l in dense {
            match l {
                Layer::Dense(d) => {
                    layer_specs.push(LayerSpec::Dense { in_dim: d.in_dim, out_dim: d.out_dim });
                    parameters.push(dense_params(d));
                }
                Layer::Relu => {
                    layer_specs.push(LayerSpec::Relu);
                    parameters.push(LayerParams::Empty {});
                }
                Layer::Conv1d(_) => unreachable!("conv layer in dense stack"),
            }
        }
        layer_specs.push(LayerSpec::ValueHead { in_dim: vh.in_dim, out_dim: vh.out_dim });
        parameters.push(dense_params(vh));
        layer_specs.push(LayerSpec::AdvantageHead { in_dim: ah.in_dim, out_dim: ah.out_dim });
        parameters.push(dense_params(ah));

        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            arch_tag: net.arch(),
            input: net.layout(),
            layer_specs,
            parameters,
            rng_seed,
            training_step,
        }
    }

    /// Rebuilds the network, validating parameter shapes against the specs.
    pub fn to_net(&self) -> Result<DuelingNet, NeuralError> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(NeuralError::CheckpointMismatch(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        if self.layer_specs.len() != self.parameters.len() {
            return Err(NeuralError::CheckpointMismatch(
                "layer_specs and parameters length differ".into(),
            ));
        }
        let mut conv_stack = Vec::new();
        let mut dense_stack = Vec::new();
        let mut value_head = None;
        let mut advantage_head = None;
        let mut in_dense_section = self.arch_tag == ArchTag::Ffdqn;

        for (spec, params) in self.layer_specs.iter().zip(&self.parameters) {
            match spec {
                LayerSpec::Conv1d { in_ch, out_ch, kernel, stride } => {
                    if in_dense_section {
                        return Err(NeuralError::CheckpointMismatch(
                            "conv1d after flatten_concat".into(),
                        ));
                    }
                    conv_stack.push(Layer::Conv1d(conv_from_params(
                        *in_ch, *out_ch, *kernel, *stride, params,
                    )?));
                }
                LayerSpec::FlattenConcat => in_dense_section = true,
                LayerSpec::Relu => {
                    if in_dense_section {
                        dense_stack.push(Layer::Relu);
                    } else {
                        conv_stack.push(Layer::Relu);
                    }
                }
                LayerSpec::Dense { in_dim, out_dim } => {
                    if !in_dense_section {
                        return Err(NeuralError::CheckpointMismatch(
                            "dense layer before flatten_concat".into(),
                        ));
                    }
                    dense_stack.push(Layer::Dense(dense_from_params(
                        *in_dim, *out_dim, params, "dense",
                    )?));
                }
                LayerSpec::ValueHead { in_dim, out_dim } => {
                    if *out_dim != 1 {
                        return Err(NeuralError::CheckpointMismatch(
                            "value head must have width 1".into(),
                        ));
                    }
                    value_head = Some(dense_from_params(*in_dim, *out_dim, params, "value_head")?);
                }
                LayerSpec::AdvantageHead { in_dim, out_dim } => {
                    if *out_dim != super::NUM_ACTIONS {
                        return Err(NeuralError::CheckpointMismatch(format!(
                            "advantage head must have width {}",
                            super::NUM_ACTIONS
                        )));
                    }
                    advantage_head =
                        Some(dense_from_params(*in_dim, *out_dim, params, "advantage_head")?);
                }
            }
        }
        let value_head = value_head
            .ok_or_else(|| NeuralError::CheckpointMismatch("missing value head".into()))?;
        let advantage_head = advantage_head
            .ok_or_else(|| NeuralError::CheckpointMismatch("missing advantage head".into()))?;
        Ok(DuelingNet::from_parts(
            self.arch_tag,
            self.input,
            conv_stack,
            dense_stack,
            value_head,
            advantage_head,
        ))
    }

    /// Checks the checkpoint was built for the given observation layout.
    pub fn validate_layout(&self, layout: InputLayout) -> Result<(), NeuralError> {
        if self.input != layout {
            return Err(NeuralError::CheckpointMismatch(format!(
                "checkpoint input {:?} does not match environment layout {:?}",
                self.input, layout
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        fs::write(path, json)
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        let text = fs::read_to_string(path).map_err(|e| {
            NeuralError::CheckpointMismatch(format!("cannot read {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text).map_err(|e| {
            NeuralError::CheckpointMismatch(format!("cannot parse {}: {e}", path.display()))
        })
    }
}
