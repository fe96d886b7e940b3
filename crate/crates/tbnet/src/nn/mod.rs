//! Network building blocks: convolution/batch-norm layers, visual attention
//! condensers, and PEPE (projection-expansion-projection-expansion) blocks.

use std::sync::RwLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::ops::{self, BnMode};
use crate::tensor::Tensor;

/// Running-statistic momentum for batch normalization.
pub const BN_MOMENTUM: f32 = 0.9;
pub const BN_EPS: f32 = 1e-5;

/// Forward mode: training uses batch statistics and updates running
/// averages, inference is a pure function of the stored state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

impl Mode {
    fn bn(self) -> BnMode {
        match self {
            Mode::Train => BnMode::Train,
            Mode::Eval => BnMode::Eval,
        }
    }
}

/// Deterministic parameter initializer: He fan-in scaling for weights,
/// zeros for biases. All draws come from one seeded stream so the same seed
/// reproduces the same network bit for bit.
pub struct ParamInit {
    rng: ChaCha8Rng,
}

impl ParamInit {
    pub fn new(seed: u64) -> Self {
        ParamInit {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn he(&mut self, shape: &[usize], fan_in: usize) -> Tensor {
        let std = (2.0 / fan_in as f32).sqrt();
        let normal = Normal::new(0.0f32, std).expect("valid std");
        let n: usize = shape.iter().product();
        let data: Vec<f32> = (0..n).map(|_| normal.sample(&mut self.rng)).collect();
        Tensor::param(shape, data).expect("shape/data agree")
    }

    pub fn conv_weight(&mut self, co: usize, ci_per_group: usize, kh: usize, kw: usize) -> Tensor {
        self.he(&[co, ci_per_group, kh, kw], ci_per_group * kh * kw)
    }

    pub fn dense_weight(&mut self, co: usize, ci: usize) -> Tensor {
        self.he(&[co, ci], ci)
    }

    pub fn zeros(&mut self, shape: &[usize]) -> Tensor {
        Tensor::param(shape, vec![0.0; shape.iter().product()]).expect("shape/data agree")
    }

    pub fn constant(&mut self, shape: &[usize], value: f32) -> Tensor {
        Tensor::param(shape, vec![value; shape.iter().product()]).expect("shape/data agree")
    }
}

/// Convolution layer with bias.
pub struct Conv2dLayer {
    pub weight: Tensor,
    pub bias: Tensor,
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
}

impl Conv2dLayer {
    pub fn new(
        init: &mut ParamInit,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        groups: usize,
    ) -> Self {
        Conv2dLayer {
            weight: init.conv_weight(out_channels, in_channels / groups, kernel, kernel),
            bias: init.zeros(&[out_channels]),
            stride,
            padding,
            groups,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        ops::conv2d(x, &self.weight, Some(&self.bias), self.stride, self.padding, self.groups)
    }

    pub fn params(&self) -> Vec<Tensor> {
        vec![self.weight.clone(), self.bias.clone()]
    }

    pub fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Tensor)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

/// Batch normalization with learned per-channel affine and running
/// statistics for inference.
pub struct BatchNorm2d {
    pub gamma: Tensor,
    pub beta: Tensor,
    running_mean: RwLock<Vec<f32>>,
    running_var: RwLock<Vec<f32>>,
}

impl BatchNorm2d {
    pub fn new(init: &mut ParamInit, channels: usize) -> Self {
        BatchNorm2d {
            gamma: init.constant(&[channels], 1.0),
            beta: init.zeros(&[channels]),
            running_mean: RwLock::new(vec![0.0; channels]),
            running_var: RwLock::new(vec![1.0; channels]),
        }
    }

    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let (mean, var) = {
            let m = self.running_mean.read().unwrap();
            let v = self.running_var.read().unwrap();
            (m.clone(), v.clone())
        };
        let out = ops::batchnorm2d(x, &self.gamma, &self.beta, &mean, &var, BN_EPS, mode.bn())?;
        if let Some((batch_mean, batch_var)) = out.batch_stats {
            let mut m = self.running_mean.write().unwrap();
            let mut v = self.running_var.write().unwrap();
            for c in 0..m.len() {
                m[c] = BN_MOMENTUM * m[c] + (1.0 - BN_MOMENTUM) * batch_mean[c];
                v[c] = BN_MOMENTUM * v[c] + (1.0 - BN_MOMENTUM) * batch_var[c];
            }
        }
        Ok(out.output)
    }

    pub fn params(&self) -> Vec<Tensor> {
        vec![self.gamma.clone(), self.beta.clone()]
    }

    pub fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Tensor)) {
        f(&mut self.gamma);
        f(&mut self.beta);
    }

    pub fn running_stats(&self) -> (Vec<f32>, Vec<f32>) {
        (
            self.running_mean.read().unwrap().clone(),
            self.running_var.read().unwrap().clone(),
        )
    }

    pub fn set_running_stats(&self, mean: Vec<f32>, var: Vec<f32>) {
        *self.running_mean.write().unwrap() = mean;
        *self.running_var.write().unwrap() = var;
    }
}

/// Standard convolution -> batch norm -> ReLU stage.
pub struct ConvBnRelu {
    pub conv: Conv2dLayer,
    pub bn: BatchNorm2d,
}

impl ConvBnRelu {
    pub fn new(
        init: &mut ParamInit,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
    ) -> Self {
        ConvBnRelu {
            conv: Conv2dLayer::new(init, in_channels, out_channels, kernel, stride, kernel / 2, 1),
            bn: BatchNorm2d::new(init, out_channels),
        }
    }

    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        Ok(ops::relu(&self.bn.forward(&self.conv.forward(x)?, mode)?))
    }

    pub fn params(&self) -> Vec<Tensor> {
        let mut p = self.conv.params();
        p.extend(self.bn.params());
        p
    }

    pub fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Tensor)) {
        self.conv.visit_params_mut(f);
        self.bn.visit_params_mut(f);
    }
}

/// Hyperparameters of a visual attention condenser.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AttentionCondenserSpec {
    pub in_channels: usize,
    /// Spatial downsampling ratio of the condensed embedding.
    pub condense_factor: usize,
    /// Bottleneck width of the embedding.
    pub embed_channels: usize,
    /// Grouped-conv fan-in for the embedding projection.
    pub groups: usize,
    /// Initial value of the learned per-channel output scale.
    pub scale_init: f32,
}

impl AttentionCondenserSpec {
    pub fn validate(&self) -> Result<()> {
        if self.condense_factor < 2 {
            return Err(Error::Config(format!(
                "attention condenser: condense_factor must be >= 2, got {}",
                self.condense_factor
            )));
        }
        if self.embed_channels == 0 || self.embed_channels > self.in_channels {
            return Err(Error::Config(format!(
                "attention condenser: embed_channels {} must be in 1..={}",
                self.embed_channels, self.in_channels
            )));
        }
        if self.groups == 0
            || self.in_channels % self.groups != 0
            || self.embed_channels % self.groups != 0
        {
            return Err(Error::Config(format!(
                "attention condenser: groups {} must divide in_channels {} and embed_channels {}",
                self.groups, self.in_channels, self.embed_channels
            )));
        }
        Ok(())
    }
}

/// Visual attention condenser.
///
/// Downsamples the activation volume into a condensed embedding that mixes
/// spatial and cross-channel structure, expands it back to a full-resolution
/// gating map, and modulates the input:
///
/// ```text
/// Q  = maxpool(V, f, f)
/// E  = pointwise_grouped(Q, C -> embed) |> depthwise 3x3 |> pointwise(embed -> C)
/// A  = nearest_upsample(E, f)
/// V' = V * sigmoid(A) * S          (S: learned per-channel scale)
/// ```
pub struct AttentionCondenser {
    pub spec: AttentionCondenserSpec,
    pub embed_pw: Conv2dLayer,
    pub embed_dw: Conv2dLayer,
    pub expand_pw: Conv2dLayer,
    pub scale: Tensor,
}

impl AttentionCondenser {
    pub fn new(init: &mut ParamInit, spec: AttentionCondenserSpec) -> Result<Self> {
        spec.validate()?;
        let c = spec.in_channels;
        let e = spec.embed_channels;
        Ok(AttentionCondenser {
            embed_pw: Conv2dLayer::new(init, c, e, 1, 1, 0, spec.groups),
            embed_dw: Conv2dLayer::new(init, e, e, 3, 1, 1, e),
            expand_pw: Conv2dLayer::new(init, e, c, 1, 1, 0, 1),
            scale: init.constant(&[c], spec.scale_init),
            spec,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (h, w) = (x.shape()[2], x.shape()[3]);
        let f = self.spec.condense_factor;
        if h % f != 0 || w % f != 0 {
            return Err(Error::Shape {
                op: "attention_condenser",
                msg: format!("spatial dims {h}x{w} not divisible by condense_factor {f}"),
            });
        }
        let q = ops::maxpool2d(x, f, f)?;
        let e = self.embed_pw.forward(&q)?;
        let e = self.embed_dw.forward(&e)?;
        let a = self.expand_pw.forward(&e)?;
        let a = ops::nearest_upsample(&a, f)?;
        let gated = ops::mul_elem(x, &ops::sigmoid(&a))?;
        ops::scale_channels(&gated, &self.scale)
    }

    pub fn params(&self) -> Vec<Tensor> {
        let mut p = self.embed_pw.params();
        p.extend(self.embed_dw.params());
        p.extend(self.expand_pw.params());
        p.push(self.scale.clone());
        p
    }

    pub fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Tensor)) {
        self.embed_pw.visit_params_mut(f);
        self.embed_dw.visit_params_mut(f);
        self.expand_pw.visit_params_mut(f);
        f(&mut self.scale);
    }

    /// Learned-parameter count, matching the complexity analyzer.
    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.numel()).sum()
    }
}

/// Hyperparameters of a PEPE block.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PepeBlockSpec {
    pub in_channels: usize,
    pub proj1_channels: usize,
    pub proj2_channels: usize,
    pub expand_channels: usize,
    pub dw_kernel: usize,
    pub stride: usize,
    pub use_residual: bool,
}

impl PepeBlockSpec {
    pub fn validate(&self) -> Result<()> {
        if self.proj1_channels == 0 || self.proj1_channels >= self.in_channels {
            return Err(Error::Config(format!(
                "pepe block: proj1_channels {} must be in 1..{} (a genuine projection)",
                self.proj1_channels, self.in_channels
            )));
        }
        if self.proj2_channels == 0 || self.proj2_channels >= self.expand_channels {
            return Err(Error::Config(format!(
                "pepe block: proj2_channels {} must be in 1..{} (a genuine projection)",
                self.proj2_channels, self.expand_channels
            )));
        }
        if self.use_residual && (self.in_channels != self.expand_channels || self.stride != 1) {
            return Err(Error::Config(format!(
                "pepe block: residual requires in_channels == expand_channels and stride 1, \
                 got in {} expand {} stride {}",
                self.in_channels, self.expand_channels, self.stride
            )));
        }
        if self.dw_kernel == 0 || self.dw_kernel % 2 == 0 {
            return Err(Error::Config(format!(
                "pepe block: dw_kernel must be odd and positive, got {}",
                self.dw_kernel
            )));
        }
        if self.stride == 0 {
            return Err(Error::Config("pepe block: stride must be >= 1".into()));
        }
        Ok(())
    }
}

/// PEPE block: alternating channel-reducing and channel-expanding pointwise
/// convolutions around a depthwise convolution.
///
/// Pipeline: `pw(C -> p1)` -> `dw(k, stride)` -> `pw(p1 -> p2)` ->
/// `pw(p2 -> expand)`, with batch norm + ReLU after every stage except the
/// linear final pointwise; residual add when configured.
pub struct PepeBlock {
    pub spec: PepeBlockSpec,
    pub proj1: Conv2dLayer,
    pub bn1: BatchNorm2d,
    pub dw: Conv2dLayer,
    pub bn2: BatchNorm2d,
    pub proj2: Conv2dLayer,
    pub bn3: BatchNorm2d,
    pub expand: Conv2dLayer,
}

impl PepeBlock {
    pub fn new(init: &mut ParamInit, spec: PepeBlockSpec) -> Result<Self> {
        spec.validate()?;
        let (c, p1, p2, e) = (
            spec.in_channels,
            spec.proj1_channels,
            spec.proj2_channels,
            spec.expand_channels,
        );
        Ok(PepeBlock {
            proj1: Conv2dLayer::new(init, c, p1, 1, 1, 0, 1),
            bn1: BatchNorm2d::new(init, p1),
            dw: Conv2dLayer::new(init, p1, p1, spec.dw_kernel, spec.stride, spec.dw_kernel / 2, p1),
            bn2: BatchNorm2d::new(init, p1),
            proj2: Conv2dLayer::new(init, p1, p2, 1, 1, 0, 1),
            bn3: BatchNorm2d::new(init, p2),
            expand: Conv2dLayer::new(init, p2, e, 1, 1, 0, 1),
            spec,
        })
    }

    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let y = ops::relu(&self.bn1.forward(&self.proj1.forward(x)?, mode)?);
        let y = ops::relu(&self.bn2.forward(&self.dw.forward(&y)?, mode)?);
        let y = ops::relu(&self.bn3.forward(&self.proj2.forward(&y)?, mode)?);
        let y = self.expand.forward(&y)?;
        if self.spec.use_residual {
            ops::add(&y, x)
        } else {
            Ok(y)
        }
    }

    pub fn params(&self) -> Vec<Tensor> {
        let mut p = self.proj1.params();
        p.extend(self.bn1.params());
        p.extend(self.dw.params());
        p.extend(self.bn2.params());
        p.extend(self.proj2.params());
        p.extend(self.bn3.params());
        p.extend(self.expand.params());
        p
    }

    pub fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Tensor)) {
        self.proj1.visit_params_mut(f);
        self.bn1.visit_params_mut(f);
        self.dw.visit_params_mut(f);
        self.bn2.visit_params_mut(f);
        self.proj2.visit_params_mut(f);
        self.bn3.visit_params_mut(f);
        self.expand.visit_params_mut(f);
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.numel()).sum()
    }
}

/// Parameter count of a dense self-attention block over a `[C,H,W]` tensor,
/// used as the comparison point for the condenser's complexity claim.
pub fn dense_attention_param_scale(c: usize, h: usize, w: usize) -> usize {
    c * c * h * w
}
