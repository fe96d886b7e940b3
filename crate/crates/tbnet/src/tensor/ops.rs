//! Forward tensor operations.
//!
//! Each op validates shapes, runs the kernel, and records itself on the
//! autograd graph when any input requires gradients (and recording is
//! enabled on the current thread).

use super::kernels as k;
use super::op::{BnSaved, Op};
use super::{grad_enabled, Tensor};
use crate::error::{Error, Result};

fn record(inputs: &[&Tensor]) -> bool {
    grad_enabled() && inputs.iter().any(|t| t.requires_grad())
}

fn expect_dims(op: &'static str, t: &Tensor, dims: usize) -> Result<()> {
    if t.shape().len() != dims {
        return Err(Error::Shape {
            op,
            msg: format!("expected {dims}-d tensor, got shape {:?}", t.shape()),
        });
    }
    Ok(())
}

/// 2-D convolution over NCHW input with zero padding.
///
/// `weight` is `[Co, Ci/groups, kh, kw]`; output spatial size follows
/// `(d + 2*padding - k) / stride + 1` per axis.
pub fn conv2d(
    input: &Tensor,
    weight: &Tensor,
    bias: Option<&Tensor>,
    stride: usize,
    padding: usize,
    groups: usize,
) -> Result<Tensor> {
    expect_dims("conv2d", input, 4)?;
    expect_dims("conv2d", weight, 4)?;
    if stride == 0 {
        return Err(Error::Shape {
            op: "conv2d",
            msg: "stride must be >= 1".into(),
        });
    }
    let (n, ci, h, w) = {
        let s = input.shape();
        (s[0], s[1], s[2], s[3])
    };
    let (co, wci, kh, kw) = {
        let s = weight.shape();
        (s[0], s[1], s[2], s[3])
    };
    if groups == 0 || ci % groups != 0 {
        return Err(Error::GroupsIndivisible {
            op: "conv2d(input channels)",
            channels: ci,
            groups,
        });
    }
    if co % groups != 0 {
        return Err(Error::GroupsIndivisible {
            op: "conv2d(output channels)",
            channels: co,
            groups,
        });
    }
    if wci != ci / groups {
        return Err(Error::Shape {
            op: "conv2d",
            msg: format!(
                "weight expects {} input channels per group, input supplies {} ({} channels / {} groups)",
                wci,
                ci / groups,
                ci,
                groups
            ),
        });
    }
    if h + 2 * padding < kh || w + 2 * padding < kw {
        return Err(Error::Shape {
            op: "conv2d",
            msg: format!(
                "kernel {kh}x{kw} larger than padded input {}x{}",
                h + 2 * padding,
                w + 2 * padding
            ),
        });
    }
    if let Some(b) = bias {
        if b.shape() != [co] {
            return Err(Error::Shape {
                op: "conv2d",
                msg: format!("bias shape {:?} does not match {co} output channels", b.shape()),
            });
        }
    }
    let oh = k::conv_out_dim(h, kh, stride, padding);
    let ow = k::conv_out_dim(w, kw, stride, padding);
    let dims = k::ConvDims {
        n,
        ci,
        h,
        w,
        co,
        kh,
        kw,
        stride,
        padding,
        groups,
        oh,
        ow,
    };
    let out = k::conv2d_forward(input.data(), weight.data(), bias.map(|b| b.data()), &dims);
    let mut parents = vec![input, weight];
    if let Some(b) = bias {
        parents.push(b);
    }
    let op = record(&parents).then(|| Op::Conv2d {
        input: input.clone(),
        weight: weight.clone(),
        bias: bias.cloned(),
        stride,
        padding,
        groups,
    });
    Ok(Tensor::new_node(vec![n, co, oh, ow], out, op))
}

/// Depthwise convolution: one filter per channel (`groups = Ci`, `Co = Ci`).
/// `weight` is `[C, 1, kh, kw]`.
pub fn depthwise_conv2d(
    input: &Tensor,
    weight: &Tensor,
    bias: Option<&Tensor>,
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    expect_dims("depthwise_conv2d", input, 4)?;
    expect_dims("depthwise_conv2d", weight, 4)?;
    let ci = input.shape()[1];
    if weight.shape()[0] != ci || weight.shape()[1] != 1 {
        return Err(Error::Shape {
            op: "depthwise_conv2d",
            msg: format!(
                "weight shape {:?} must be [{ci}, 1, kh, kw] for {ci} input channels",
                weight.shape()
            ),
        });
    }
    conv2d(input, weight, bias, stride, padding, ci)
}

/// Pointwise (1x1) convolution: `weight` is `[Co, Ci, 1, 1]`.
pub fn pointwise_conv2d(input: &Tensor, weight: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
    expect_dims("pointwise_conv2d", input, 4)?;
    expect_dims("pointwise_conv2d", weight, 4)?;
    if weight.shape()[2] != 1 || weight.shape()[3] != 1 {
        return Err(Error::Shape {
            op: "pointwise_conv2d",
            msg: format!("kernel must be 1x1, got {:?}", &weight.shape()[2..]),
        });
    }
    conv2d(input, weight, bias, 1, 0, 1)
}

/// Grouped pointwise convolution (used by the attention condenser embedding).
pub fn grouped_pointwise_conv2d(
    input: &Tensor,
    weight: &Tensor,
    bias: Option<&Tensor>,
    groups: usize,
) -> Result<Tensor> {
    expect_dims("grouped_pointwise_conv2d", input, 4)?;
    if weight.shape()[2] != 1 || weight.shape()[3] != 1 {
        return Err(Error::Shape {
            op: "grouped_pointwise_conv2d",
            msg: format!("kernel must be 1x1, got {:?}", &weight.shape()[2..]),
        });
    }
    conv2d(input, weight, bias, 1, 0, groups)
}

/// Max pooling with a square window. Backward routes the gradient to the
/// first (row-major) argmax of each window.
pub fn maxpool2d(input: &Tensor, kernel: usize, stride: usize) -> Result<Tensor> {
    expect_dims("maxpool2d", input, 4)?;
    if kernel == 0 || stride == 0 {
        return Err(Error::Shape {
            op: "maxpool2d",
            msg: "kernel and stride must be >= 1".into(),
        });
    }
    let (n, c, h, w) = {
        let s = input.shape();
        (s[0], s[1], s[2], s[3])
    };
    if kernel > h || kernel > w {
        return Err(Error::WindowTooLarge { kernel, h, w });
    }
    let (out, argmax, oh, ow) = k::maxpool2d_forward(input.data(), n, c, h, w, kernel, stride);
    let op = record(&[input]).then(|| Op::MaxPool2d {
        input: input.clone(),
        argmax,
    });
    Ok(Tensor::new_node(vec![n, c, oh, ow], out, op))
}

/// Nearest-neighbour upsampling by an integer factor; backward sums the
/// gradient over each replicated block.
pub fn nearest_upsample(input: &Tensor, factor: usize) -> Result<Tensor> {
    expect_dims("nearest_upsample", input, 4)?;
    if factor == 0 {
        return Err(Error::Shape {
            op: "nearest_upsample",
            msg: "factor must be >= 1".into(),
        });
    }
    let (n, c, h, w) = {
        let s = input.shape();
        (s[0], s[1], s[2], s[3])
    };
    let out = k::nearest_upsample_forward(input.data(), n, c, h, w, factor);
    let op = record(&[input]).then(|| Op::NearestUpsample {
        input: input.clone(),
        factor,
    });
    Ok(Tensor::new_node(vec![n, c, h * factor, w * factor], out, op))
}

/// Mean over the spatial dimensions: `[N,C,H,W] -> [N,C]`.
pub fn global_avg_pool(input: &Tensor) -> Result<Tensor> {
    expect_dims("global_avg_pool", input, 4)?;
    let (n, c, h, w) = {
        let s = input.shape();
        (s[0], s[1], s[2], s[3])
    };
    let out = k::global_avg_pool_forward(input.data(), n, c, h, w);
    let op = record(&[input]).then(|| Op::GlobalAvgPool { input: input.clone() });
    Ok(Tensor::new_node(vec![n, c], out, op))
}

/// Fully-connected layer: `[N,Ci] x [Co,Ci] + [Co] -> [N,Co]`.
pub fn dense(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    expect_dims("dense", input, 2)?;
    expect_dims("dense", weight, 2)?;
    let (n, ci) = (input.shape()[0], input.shape()[1]);
    let (co, wci) = (weight.shape()[0], weight.shape()[1]);
    if wci != ci {
        return Err(Error::Shape {
            op: "dense",
            msg: format!("input features {ci} do not match weight features {wci}"),
        });
    }
    if bias.shape() != [co] {
        return Err(Error::Shape {
            op: "dense",
            msg: format!("bias shape {:?} does not match {co} outputs", bias.shape()),
        });
    }
    let out = k::dense_forward(input.data(), weight.data(), bias.data(), n, ci, co);
    let op = record(&[input, weight, bias]).then(|| Op::Dense {
        input: input.clone(),
        weight: weight.clone(),
        bias: bias.clone(),
    });
    Ok(Tensor::new_node(vec![n, co], out, op))
}

/// Row-wise softmax over `[N,K]` with max subtraction for stability.
pub fn softmax(input: &Tensor) -> Result<Tensor> {
    expect_dims("softmax", input, 2)?;
    let (n, kk) = (input.shape()[0], input.shape()[1]);
    let out = k::softmax_forward(input.data(), n, kk);
    let op = record(&[input]).then(|| Op::Softmax {
        input: input.clone(),
        probs: out.clone(),
    });
    Ok(Tensor::new_node(vec![n, kk], out, op))
}

pub fn sigmoid(input: &Tensor) -> Tensor {
    let out: Vec<f32> = input.data().iter().map(|&x| 1.0 / (1.0 + (-x).exp())).collect();
    let op = record(&[input]).then(|| Op::Sigmoid {
        input: input.clone(),
        output: out.clone(),
    });
    Tensor::new_node(input.shape().to_vec(), out, op)
}

pub fn relu(input: &Tensor) -> Tensor {
    let out: Vec<f32> = input.data().iter().map(|&x| x.max(0.0)).collect();
    let op = record(&[input]).then(|| Op::Relu { input: input.clone() });
    Tensor::new_node(input.shape().to_vec(), out, op)
}

/// Which statistics batch normalization uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    /// Normalize with batch statistics and report them for the running
    /// average update.
    Train,
    /// Normalize with the supplied running statistics.
    Eval,
}

pub struct BatchNormOutput {
    pub output: Tensor,
    /// Batch statistics observed in train mode (mean, biased variance).
    pub batch_stats: Option<(Vec<f32>, Vec<f32>)>,
}

/// Batch normalization over `[N,C,H,W]` with per-channel affine parameters.
///
/// In `Train` mode the batch statistics are returned so the caller can fold
/// them into its running averages; in `Eval` mode `running_mean`/`running_var`
/// are used directly.
pub fn batchnorm2d(
    input: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    running_mean: &[f32],
    running_var: &[f32],
    eps: f32,
    mode: BnMode,
) -> Result<BatchNormOutput> {
    expect_dims("batchnorm2d", input, 4)?;
    let (n, c, h, w) = {
        let s = input.shape();
        (s[0], s[1], s[2], s[3])
    };
    if gamma.shape() != [c] || beta.shape() != [c] {
        return Err(Error::Shape {
            op: "batchnorm2d",
            msg: format!(
                "gamma {:?} / beta {:?} must both be [{c}] for {c} channels",
                gamma.shape(),
                beta.shape()
            ),
        });
    }
    if running_mean.len() != c || running_var.len() != c {
        return Err(Error::Shape {
            op: "batchnorm2d",
            msg: format!("running statistics must have length {c}"),
        });
    }
    let (mean, invstd, batch_stats, saved) = match mode {
        BnMode::Train => {
            let stats = k::batchnorm_stats(input.data(), n, c, h, w, eps);
            let saved = BnSaved::Train {
                mean: stats.mean.clone(),
                invstd: stats.invstd.clone(),
            };
            (
                stats.mean.clone(),
                stats.invstd.clone(),
                Some((stats.mean, stats.var)),
                saved,
            )
        }
        BnMode::Eval => {
            let invstd: Vec<f32> = running_var.iter().map(|&v| 1.0 / (v + eps).sqrt()).collect();
            let saved = BnSaved::Eval {
                mean: running_mean.to_vec(),
                invstd: invstd.clone(),
            };
            (running_mean.to_vec(), invstd, None, saved)
        }
    };
    let out = k::batchnorm_forward(input.data(), gamma.data(), beta.data(), &mean, &invstd, n, c, h, w);
    let op = record(&[input, gamma, beta]).then(|| Op::BatchNorm {
        input: input.clone(),
        gamma: gamma.clone(),
        beta: beta.clone(),
        saved,
    });
    Ok(BatchNormOutput {
        output: Tensor::new_node(input.shape().to_vec(), out, op),
        batch_stats,
    })
}

fn expect_same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape {
            op,
            msg: format!("operand shapes differ: {:?} vs {:?}", a.shape(), b.shape()),
        });
    }
    Ok(())
}

pub fn add(lhs: &Tensor, rhs: &Tensor) -> Result<Tensor> {
    expect_same_shape("add", lhs, rhs)?;
    let out: Vec<f32> = lhs.data().iter().zip(rhs.data()).map(|(&a, &b)| a + b).collect();
    let op = record(&[lhs, rhs]).then(|| Op::Add {
        lhs: lhs.clone(),
        rhs: rhs.clone(),
    });
    Ok(Tensor::new_node(lhs.shape().to_vec(), out, op))
}

pub fn mul_elem(lhs: &Tensor, rhs: &Tensor) -> Result<Tensor> {
    expect_same_shape("mul_elem", lhs, rhs)?;
    let out: Vec<f32> = lhs.data().iter().zip(rhs.data()).map(|(&a, &b)| a * b).collect();
    let op = record(&[lhs, rhs]).then(|| Op::MulElem {
        lhs: lhs.clone(),
        rhs: rhs.clone(),
    });
    Ok(Tensor::new_node(lhs.shape().to_vec(), out, op))
}

/// Multiplies `[N,C,H,W]` by a per-channel scale `[C]`, broadcasting over
/// batch and space.
pub fn scale_channels(input: &Tensor, scale: &Tensor) -> Result<Tensor> {
    expect_dims("scale_channels", input, 4)?;
    let c = input.shape()[1];
    if scale.shape() != [c] {
        return Err(Error::Shape {
            op: "scale_channels",
            msg: format!("scale shape {:?} does not match {c} channels", scale.shape()),
        });
    }
    let (n, _, h, w) = {
        let s = input.shape();
        (s[0], s[1], s[2], s[3])
    };
    let plane = h * w;
    let s = scale.data();
    let mut out = vec![0.0f32; input.numel()];
    for ni in 0..n {
        for ci in 0..c {
            let base = (ni * c + ci) * plane;
            let sv = s[ci];
            for i in 0..plane {
                out[base + i] = input.data()[base + i] * sv;
            }
        }
    }
    let op = record(&[input, scale]).then(|| Op::ScaleChannels {
        input: input.clone(),
        scale: scale.clone(),
    });
    Ok(Tensor::new_node(input.shape().to_vec(), out, op))
}

/// Sum of all elements, as a scalar tensor.
pub fn sum(input: &Tensor) -> Tensor {
    let mut acc = 0.0f32;
    for v in input.data() {
        acc += v;
    }
    let op = record(&[input]).then(|| Op::Sum { input: input.clone() });
    Tensor::new_node(vec![1], vec![acc], op)
}

pub fn mul_scalar(input: &Tensor, factor: f32) -> Tensor {
    let out: Vec<f32> = input.data().iter().map(|&x| x * factor).collect();
    let op = record(&[input]).then(|| Op::MulScalar {
        input: input.clone(),
        factor,
    });
    Tensor::new_node(input.shape().to_vec(), out, op)
}

/// Mean cross-entropy between logits `[N,K]` and class labels, computed via
/// log-sum-exp. The gradient w.r.t. the logits is `(softmax - one_hot) / N`.
pub fn cross_entropy_loss(logits: &Tensor, labels: &[usize]) -> Result<Tensor> {
    expect_dims("cross_entropy_loss", logits, 2)?;
    let (n, kk) = (logits.shape()[0], logits.shape()[1]);
    if labels.len() != n {
        return Err(Error::Shape {
            op: "cross_entropy_loss",
            msg: format!("{} labels for a batch of {n}", labels.len()),
        });
    }
    for &l in labels {
        if l >= kk {
            return Err(Error::InvalidClassLabel(l as i64));
        }
    }
    let (loss, probs) = k::cross_entropy_forward(logits.data(), labels, n, kk);
    let op = record(&[logits]).then(|| Op::CrossEntropyLogits {
        logits: logits.clone(),
        labels: labels.to_vec(),
        probs,
    });
    Ok(Tensor::new_node(vec![1], vec![loss], op))
}
