//! Declarative network configuration, deterministic model construction, and
//! the forward pass of the assembled classifier.
//!
//! Every network in the family shares the same skeleton: a strided stem
//! convolution, a sequence of stages (PEPE blocks, attention condensers, or
//! plain convolutions), and a fixed head of global average pooling, a
//! two-way fully-connected layer, and softmax.

mod checkpoint;
mod complexity;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use complexity::{count_complexity, ComplexityReport, LayerComplexity};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    AttentionCondenser, AttentionCondenserSpec, ConvBnRelu, Mode, ParamInit, PepeBlock,
    PepeBlockSpec,
};
use crate::tensor::ops;
use crate::tensor::{NoGradGuard, Tensor};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
/// Number of output classes: TB negative (0) and TB positive (1).
pub const NUM_CLASSES: usize = 2;

/// Stem convolution: standard conv + batch norm + ReLU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StemConfig {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

/// One stage of the backbone. `repeat` instantiates the block that many
/// times; only the first instance applies the stage stride / channel change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StageConfig {
    /// Standard convolution stage.
    Conv {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        #[serde(default = "one")]
        repeat: usize,
    },
    /// PEPE bottleneck stage. Repeats beyond the first run at stride 1 with
    /// a residual connection.
    Pepe {
        out_channels: usize,
        proj1: usize,
        proj2: usize,
        dw_kernel: usize,
        stride: usize,
        #[serde(default = "one")]
        repeat: usize,
    },
    /// Attention condenser stage (channel- and shape-preserving).
    AttentionCondenser {
        condense_factor: usize,
        embed_channels: usize,
        groups: usize,
        #[serde(default = "one")]
        repeat: usize,
    },
}

fn one() -> usize {
    1
}

impl StageConfig {
    pub fn repeat(&self) -> usize {
        match self {
            StageConfig::Conv { repeat, .. }
            | StageConfig::Pepe { repeat, .. }
            | StageConfig::AttentionCondenser { repeat, .. } => *repeat,
        }
    }
}

/// Declarative description of a network in the family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    /// Input spatial size (height, width).
    pub input_size: (usize, usize),
    /// Input channels; chest X-rays are single-channel grayscale.
    pub in_channels: usize,
    pub stem: StemConfig,
    pub stages: Vec<StageConfig>,
}

fn default_schema_version() -> u32 {
    CONFIG_SCHEMA_VERSION
}

/// Shape and channel trace of a validated config.
pub(crate) struct ConfigTrace {
    /// (in_channels, h, w) entering each instantiated block, stem first.
    pub blocks: Vec<BlockInstance>,
    /// Channels entering the head.
    pub head_channels: usize,
    /// Spatial size entering the head.
    pub head_spatial: (usize, usize),
}

pub(crate) enum BlockInstance {
    Stem {
        in_channels: usize,
        h: usize,
        w: usize,
        cfg: StemConfig,
    },
    Conv {
        in_channels: usize,
        h: usize,
        w: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        stage: usize,
    },
    Pepe {
        spec: PepeBlockSpec,
        h: usize,
        w: usize,
        stage: usize,
    },
    Condenser {
        spec: AttentionCondenserSpec,
        h: usize,
        w: usize,
        stage: usize,
    },
}

impl NetworkConfig {
    /// Parses a config from JSON text.
    pub fn from_json(text: &str) -> Result<NetworkConfig> {
        let cfg: NetworkConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// The versioned reference configuration, tuned so the complexity
    /// analyzer reports ~4.2M parameters and ~0.4G MACs at 224x224.
    pub fn reference() -> NetworkConfig {
        NetworkConfig::from_json(include_str!("../../configs/reference.json"))
            .expect("bundled reference config parses")
    }

    /// A narrow sibling of the reference layout for fast desk-scale runs.
    pub fn reduced() -> NetworkConfig {
        NetworkConfig::from_json(include_str!("../../configs/reduced.json"))
            .expect("bundled reduced config parses")
    }

    /// Walks the config, instantiating per-block shapes and channels. Pure
    /// shape arithmetic with no validation: dimensions saturate at zero.
    pub(crate) fn walk(&self) -> ConfigTrace {
        let (mut h, mut w) = self.input_size;
        let mut blocks = Vec::new();
        blocks.push(BlockInstance::Stem {
            in_channels: self.in_channels,
            h,
            w,
            cfg: self.stem.clone(),
        });
        let pad = self.stem.kernel / 2;
        h = conv_out(h, self.stem.kernel, self.stem.stride.max(1), pad);
        w = conv_out(w, self.stem.kernel, self.stem.stride.max(1), pad);
        let mut channels = self.stem.out_channels;
        for (si, stage) in self.stages.iter().enumerate() {
            for rep in 0..stage.repeat() {
                match stage {
                    StageConfig::Conv {
                        out_channels,
                        kernel,
                        stride,
                        ..
                    } => {
                        let eff_stride = if rep == 0 { (*stride).max(1) } else { 1 };
                        blocks.push(BlockInstance::Conv {
                            in_channels: channels,
                            h,
                            w,
                            out_channels: *out_channels,
                            kernel: *kernel,
                            stride: eff_stride,
                            stage: si,
                        });
                        let p = kernel / 2;
                        h = conv_out(h, *kernel, eff_stride, p);
                        w = conv_out(w, *kernel, eff_stride, p);
                        channels = *out_channels;
                    }
                    StageConfig::Pepe {
                        out_channels,
                        proj1,
                        proj2,
                        dw_kernel,
                        stride,
                        ..
                    } => {
                        let eff_stride = if rep == 0 { (*stride).max(1) } else { 1 };
                        let spec = PepeBlockSpec {
                            in_channels: channels,
                            proj1_channels: *proj1,
                            proj2_channels: *proj2,
                            expand_channels: *out_channels,
                            dw_kernel: *dw_kernel,
                            stride: eff_stride,
                            use_residual: rep > 0,
                        };
                        blocks.push(BlockInstance::Pepe {
                            spec,
                            h,
                            w,
                            stage: si,
                        });
                        let p = dw_kernel / 2;
                        h = conv_out(h, *dw_kernel, eff_stride, p);
                        w = conv_out(w, *dw_kernel, eff_stride, p);
                        channels = *out_channels;
                    }
                    StageConfig::AttentionCondenser {
                        condense_factor,
                        embed_channels,
                        groups,
                        ..
                    } => {
                        let spec = AttentionCondenserSpec {
                            in_channels: channels,
                            condense_factor: *condense_factor,
                            embed_channels: *embed_channels,
                            groups: *groups,
                            scale_init: 1.0,
                        };
                        blocks.push(BlockInstance::Condenser {
                            spec,
                            h,
                            w,
                            stage: si,
                        });
                    }
                }
            }
        }
        ConfigTrace {
            blocks,
            head_channels: channels,
            head_spatial: (h, w),
        }
    }

    /// Checks every structural invariant, returning the violated rule by
    /// name, and traces per-block shapes for the builder.
    pub(crate) fn trace(&self) -> Result<ConfigTrace> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version: expected {CONFIG_SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        if self.in_channels == 0 {
            return Err(Error::Config("in_channels: must be >= 1".into()));
        }
        let (h0, w0) = self.input_size;
        if h0 == 0 || w0 == 0 {
            return Err(Error::Config(format!(
                "input_size: dimensions must be positive, got {:?}",
                self.input_size
            )));
        }
        if self.stem.kernel == 0 || self.stem.kernel % 2 == 0 {
            return Err(Error::Config(format!(
                "stem.kernel: must be odd and positive, got {}",
                self.stem.kernel
            )));
        }
        if self.stem.stride == 0 || self.stem.out_channels == 0 {
            return Err(Error::Config("stem: stride and out_channels must be >= 1".into()));
        }
        if self.stages.is_empty() {
            return Err(Error::Config("stages: at least one stage required".into()));
        }
        for (si, stage) in self.stages.iter().enumerate() {
            if stage.repeat() == 0 {
                return Err(Error::Config(format!("stage {si}: repeat must be >= 1")));
            }
            if let StageConfig::Conv { kernel, stride, .. } = stage {
                if *kernel == 0 || kernel % 2 == 0 {
                    return Err(Error::Config(format!(
                        "stage {si}: conv kernel must be odd and positive, got {kernel}"
                    )));
                }
                if *stride == 0 {
                    return Err(Error::Config(format!("stage {si}: stride must be >= 1")));
                }
            }
        }
        let trace = self.walk();
        for block in &trace.blocks {
            match block {
                BlockInstance::Stem { .. } => {}
                BlockInstance::Conv { h, w, stage, .. } => {
                    if *h == 0 || *w == 0 {
                        return Err(Error::Config(format!(
                            "stage {stage}: spatial dimensions collapsed to zero"
                        )));
                    }
                }
                BlockInstance::Pepe { spec, h, w, stage } => {
                    if *h == 0 || *w == 0 {
                        return Err(Error::Config(format!(
                            "stage {stage}: spatial dimensions collapsed to zero"
                        )));
                    }
                    spec.validate()
                        .map_err(|e| Error::Config(format!("stage {stage}: {e}")))?;
                }
                BlockInstance::Condenser { spec, h, w, stage } => {
                    spec.validate()
                        .map_err(|e| Error::Config(format!("stage {stage}: {e}")))?;
                    if *h == 0
                        || *w == 0
                        || h % spec.condense_factor != 0
                        || w % spec.condense_factor != 0
                    {
                        return Err(Error::Config(format!(
                            "stage {stage}: condense_factor {} does not divide spatial size {h}x{w}",
                            spec.condense_factor
                        )));
                    }
                }
            }
        }
        if trace.head_spatial.0 == 0 || trace.head_spatial.1 == 0 {
            return Err(Error::Config("head: spatial dimensions collapsed to zero".into()));
        }
        Ok(trace)
    }

    /// Validates the config, naming the violated rule on failure.
    pub fn validate(&self) -> Result<()> {
        self.trace().map(|_| ())
    }
}

fn conv_out(d: usize, k: usize, s: usize, p: usize) -> usize {
    if d + 2 * p < k {
        return 0;
    }
    (d + 2 * p - k) / s + 1
}

enum Layer {
    Stem(ConvBnRelu),
    Conv(ConvBnRelu),
    Pepe(PepeBlock),
    Condenser(AttentionCondenser),
}

/// An assembled classifier. Immutable during inference; the trainer mutates
/// parameters between steps through [`Model::visit_params_mut`].
pub struct Model {
    config: NetworkConfig,
    layers: Vec<Layer>,
    head_weight: Tensor,
    head_bias: Tensor,
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Model({} layers, {} params)",
            self.layers.len() + 1,
            self.param_scalar_count()
        )
    }
}

/// Builds a model from a validated config with deterministic seeding:
/// He fan-in initialization for weights, zeros for biases.
pub fn build_network(config: &NetworkConfig, seed: u64) -> Result<Model> {
    let trace = config.trace()?;
    let mut init = ParamInit::new(seed);
    let mut layers = Vec::new();
    for block in &trace.blocks {
        match block {
            BlockInstance::Stem { in_channels, cfg, .. } => {
                layers.push(Layer::Stem(ConvBnRelu::new(
                    &mut init,
                    *in_channels,
                    cfg.out_channels,
                    cfg.kernel,
                    cfg.stride,
                )));
            }
            BlockInstance::Conv {
                in_channels,
                out_channels,
                kernel,
                stride,
                ..
            } => {
                layers.push(Layer::Conv(ConvBnRelu::new(
                    &mut init,
                    *in_channels,
                    *out_channels,
                    *kernel,
                    *stride,
                )));
            }
            BlockInstance::Pepe { spec, .. } => {
                layers.push(Layer::Pepe(PepeBlock::new(&mut init, spec.clone())?));
            }
            BlockInstance::Condenser { spec, .. } => {
                layers.push(Layer::Condenser(AttentionCondenser::new(&mut init, spec.clone())?));
            }
        }
    }
    let head_weight = init.dense_weight(NUM_CLASSES, trace.head_channels);
    let head_bias = init.zeros(&[NUM_CLASSES]);
    Ok(Model {
        config: config.clone(),
        layers,
        head_weight,
        head_bias,
    })
}

impl Model {
    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    /// Pre-softmax class scores `[N, 2]`.
    pub fn forward_logits(&self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let shape = x.shape();
        if shape.len() != 4
            || shape[1] != self.config.in_channels
            || shape[2] != self.config.input_size.0
            || shape[3] != self.config.input_size.1
        {
            return Err(Error::Shape {
                op: "model.forward",
                msg: format!(
                    "expected [N, {}, {}, {}], got {:?}",
                    self.config.in_channels, self.config.input_size.0, self.config.input_size.1, shape
                ),
            });
        }
        let mut y = x.clone();
        for layer in &self.layers {
            y = match layer {
                Layer::Stem(l) | Layer::Conv(l) => l.forward(&y, mode)?,
                Layer::Pepe(l) => l.forward(&y, mode)?,
                Layer::Condenser(l) => l.forward(&y)?,
            };
        }
        let pooled = ops::global_avg_pool(&y)?;
        ops::dense(&pooled, &self.head_weight, &self.head_bias)
    }

    /// Class probabilities `[N, 2]` (softmax head).
    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        ops::softmax(&self.forward_logits(x, mode)?)
    }

    /// Frozen inference: eval mode, no autograd graph. Safe to call from
    /// multiple threads concurrently.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let _guard = NoGradGuard::new();
        self.forward(x, Mode::Eval)
    }

    /// Learnable parameters in declaration order.
    pub fn params(&self) -> Vec<Tensor> {
        let mut p = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Stem(l) | Layer::Conv(l) => p.extend(l.params()),
                Layer::Pepe(l) => p.extend(l.params()),
                Layer::Condenser(l) => p.extend(l.params()),
            }
        }
        p.push(self.head_weight.clone());
        p.push(self.head_bias.clone());
        p
    }

    pub fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Tensor)) {
        for layer in &mut self.layers {
            match layer {
                Layer::Stem(l) | Layer::Conv(l) => l.visit_params_mut(f),
                Layer::Pepe(l) => l.visit_params_mut(f),
                Layer::Condenser(l) => l.visit_params_mut(f),
            }
        }
        f(&mut self.head_weight);
        f(&mut self.head_bias);
    }

    pub fn zero_grads(&self) {
        for p in self.params() {
            p.zero_grad();
        }
    }

    /// Number of learnable scalars (matches the complexity analyzer).
    pub fn param_scalar_count(&self) -> u64 {
        self.params().iter().map(|p| p.numel() as u64).sum()
    }

    fn batch_norms(&self) -> Vec<&crate::nn::BatchNorm2d> {
        let mut v = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Stem(l) | Layer::Conv(l) => v.push(&l.bn),
                Layer::Pepe(l) => {
                    v.push(&l.bn1);
                    v.push(&l.bn2);
                    v.push(&l.bn3);
                }
                Layer::Condenser(_) => {}
            }
        }
        v
    }

    /// Full state in declaration order: learnable parameters followed by
    /// the batch-norm running statistics. This is the checkpoint payload.
    pub fn state_snapshot(&self) -> Vec<Vec<f32>> {
        let mut state: Vec<Vec<f32>> = self.params().iter().map(|p| p.data().to_vec()).collect();
        for bn in self.batch_norms() {
            let (mean, var) = bn.running_stats();
            state.push(mean);
            state.push(var);
        }
        state
    }

    /// Restores a state snapshot produced by [`Model::state_snapshot`] on a
    /// model built from the same config.
    pub fn load_state(&mut self, state: &[Vec<f32>]) -> Result<()> {
        let n_params = self.params().len();
        let n_bn = self.batch_norms().len();
        if state.len() != n_params + 2 * n_bn {
            return Err(Error::CheckpointShape(format!(
                "state has {} tensors, model expects {} ({} params + {} running stats)",
                state.len(),
                n_params + 2 * n_bn,
                n_params,
                2 * n_bn
            )));
        }
        let mut idx = 0;
        let mut shape_err = None;
        self.visit_params_mut(&mut |p: &mut Tensor| {
            if shape_err.is_some() {
                return;
            }
            let src = &state[idx];
            if src.len() != p.numel() {
                shape_err = Some(format!(
                    "parameter {idx} holds {} scalars, checkpoint supplies {}",
                    p.numel(),
                    src.len()
                ));
            } else {
                p.replace_data(src.clone());
            }
            idx += 1;
        });
        if let Some(msg) = shape_err {
            return Err(Error::CheckpointShape(msg));
        }
        for bn in self.batch_norms() {
            let mean = &state[idx];
            let var = &state[idx + 1];
            let c = bn.gamma.numel();
            if mean.len() != c || var.len() != c {
                return Err(Error::CheckpointShape(format!(
                    "running statistics at {idx} have lengths {}/{}, expected {c}",
                    mean.len(),
                    var.len()
                )));
            }
            bn.set_running_stats(mean.clone(), var.clone());
            idx += 2;
        }
        Ok(())
    }
}
