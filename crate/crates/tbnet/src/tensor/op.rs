//! Recorded primitive operations and their backward rules.

use super::kernels as k;
use super::Tensor;

pub(crate) enum BnSaved {
    /// Training mode: batch statistics (gradients flow through them).
    Train { mean: Vec<f32>, invstd: Vec<f32> },
    /// Inference mode: running statistics are constants.
    Eval { mean: Vec<f32>, invstd: Vec<f32> },
}

pub(crate) enum Op {
    Conv2d {
        input: Tensor,
        weight: Tensor,
        bias: Option<Tensor>,
        stride: usize,
        padding: usize,
        groups: usize,
    },
    MaxPool2d {
        input: Tensor,
        argmax: Vec<u32>,
    },
    NearestUpsample {
        input: Tensor,
        factor: usize,
    },
    GlobalAvgPool {
        input: Tensor,
    },
    Dense {
        input: Tensor,
        weight: Tensor,
        bias: Tensor,
    },
    Softmax {
        input: Tensor,
        probs: Vec<f32>,
    },
    Sigmoid {
        input: Tensor,
        output: Vec<f32>,
    },
    Relu {
        input: Tensor,
    },
    BatchNorm {
        input: Tensor,
        gamma: Tensor,
        beta: Tensor,
        saved: BnSaved,
    },
    Add {
        lhs: Tensor,
        rhs: Tensor,
    },
    MulElem {
        lhs: Tensor,
        rhs: Tensor,
    },
    /// x[N,C,H,W] * s[C] with broadcast over N, H, W.
    ScaleChannels {
        input: Tensor,
        scale: Tensor,
    },
    Sum {
        input: Tensor,
    },
    MulScalar {
        input: Tensor,
        factor: f32,
    },
    CrossEntropyLogits {
        logits: Tensor,
        labels: Vec<usize>,
        probs: Vec<f32>,
    },
}

fn nchw(t: &Tensor) -> (usize, usize, usize, usize) {
    let s = t.shape();
    (s[0], s[1], s[2], s[3])
}

impl Op {
    pub(crate) fn parents(&self) -> Vec<&Tensor> {
        match self {
            Op::Conv2d { input, weight, bias, .. } => {
                let mut v = vec![input, weight];
                if let Some(b) = bias {
                    v.push(b);
                }
                v
            }
            Op::MaxPool2d { input, .. }
            | Op::NearestUpsample { input, .. }
            | Op::GlobalAvgPool { input }
            | Op::Softmax { input, .. }
            | Op::Sigmoid { input, .. }
            | Op::Relu { input }
            | Op::Sum { input }
            | Op::MulScalar { input, .. } => vec![input],
            Op::Dense { input, weight, bias } => vec![input, weight, bias],
            Op::BatchNorm { input, gamma, beta, .. } => vec![input, gamma, beta],
            Op::Add { lhs, rhs } | Op::MulElem { lhs, rhs } => vec![lhs, rhs],
            Op::ScaleChannels { input, scale } => vec![input, scale],
            Op::CrossEntropyLogits { logits, .. } => vec![logits],
        }
    }

    /// Propagates `grad_out` (gradient of the loss w.r.t. `node`) into the
    /// parents' gradient buffers. Parents that do not require gradients are
    /// skipped.
    pub(crate) fn backward(&self, node: &Tensor, grad_out: &[f32]) {
        match self {
            Op::Conv2d { input, weight, bias, stride, padding, groups } => {
                let (n, ci, h, w) = nchw(input);
                let ws = weight.shape();
                let os = node.shape();
                let dims = k::ConvDims {
                    n,
                    ci,
                    h,
                    w,
                    co: ws[0],
                    kh: ws[2],
                    kw: ws[3],
                    stride: *stride,
                    padding: *padding,
                    groups: *groups,
                    oh: os[2],
                    ow: os[3],
                };
                let grads = k::conv2d_backward(
                    input.data(),
                    weight.data(),
                    grad_out,
                    &dims,
                    input.requires_grad(),
                    weight.requires_grad(),
                    bias.as_ref().is_some_and(|b| b.requires_grad()),
                );
                if let Some(di) = grads.dinput {
                    input.accumulate_grad(&di);
                }
                if let Some(dw) = grads.dweight {
                    weight.accumulate_grad(&dw);
                }
                if let (Some(db), Some(b)) = (grads.dbias, bias.as_ref()) {
                    b.accumulate_grad(&db);
                }
            }
            Op::MaxPool2d { input, argmax } => {
                if input.requires_grad() {
                    let di = k::maxpool2d_backward(grad_out, argmax, input.numel());
                    input.accumulate_grad(&di);
                }
            }
            Op::NearestUpsample { input, factor } => {
                if input.requires_grad() {
                    let (n, c, h, w) = nchw(input);
                    let di = k::nearest_upsample_backward(grad_out, n, c, h, w, *factor);
                    input.accumulate_grad(&di);
                }
            }
            Op::GlobalAvgPool { input } => {
                if input.requires_grad() {
                    let (n, c, h, w) = nchw(input);
                    let di = k::global_avg_pool_backward(grad_out, n, c, h, w);
                    input.accumulate_grad(&di);
                }
            }
            Op::Dense { input, weight, bias } => {
                let n = input.shape()[0];
                let ci = input.shape()[1];
                let co = weight.shape()[0];
                let (di, dw, db) = k::dense_backward(input.data(), weight.data(), grad_out, n, ci, co);
                if input.requires_grad() {
                    input.accumulate_grad(&di);
                }
                if weight.requires_grad() {
                    weight.accumulate_grad(&dw);
                }
                if bias.requires_grad() {
                    bias.accumulate_grad(&db);
                }
            }
            Op::Softmax { input, probs } => {
                if input.requires_grad() {
                    let n = input.shape()[0];
                    let kk = input.shape()[1];
                    let di = k::softmax_backward(probs, grad_out, n, kk);
                    input.accumulate_grad(&di);
                }
            }
            Op::Sigmoid { input, output } => {
                if input.requires_grad() {
                    let di: Vec<f32> = output
                        .iter()
                        .zip(grad_out)
                        .map(|(&y, &g)| g * y * (1.0 - y))
                        .collect();
                    input.accumulate_grad(&di);
                }
            }
            Op::Relu { input } => {
                if input.requires_grad() {
                    let di: Vec<f32> = input
                        .data()
                        .iter()
                        .zip(grad_out)
                        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
                        .collect();
                    input.accumulate_grad(&di);
                }
            }
            Op::BatchNorm { input, gamma, beta, saved } => {
                let (n, c, h, w) = nchw(input);
                let (di, dgamma, dbeta) = match saved {
                    BnSaved::Train { mean, invstd } => k::batchnorm_backward_train(
                        input.data(),
                        gamma.data(),
                        mean,
                        invstd,
                        grad_out,
                        n,
                        c,
                        h,
                        w,
                    ),
                    BnSaved::Eval { mean, invstd } => k::batchnorm_backward_eval(
                        input.data(),
                        gamma.data(),
                        mean,
                        invstd,
                        grad_out,
                        n,
                        c,
                        h,
                        w,
                    ),
                };
                if input.requires_grad() {
                    input.accumulate_grad(&di);
                }
                if gamma.requires_grad() {
                    gamma.accumulate_grad(&dgamma);
                }
                if beta.requires_grad() {
                    beta.accumulate_grad(&dbeta);
                }
            }
            Op::Add { lhs, rhs } => {
                if lhs.requires_grad() {
                    lhs.accumulate_grad(grad_out);
                }
                if rhs.requires_grad() {
                    rhs.accumulate_grad(grad_out);
                }
            }
            Op::MulElem { lhs, rhs } => {
                if lhs.requires_grad() {
                    let d: Vec<f32> = rhs.data().iter().zip(grad_out).map(|(&r, &g)| r * g).collect();
                    lhs.accumulate_grad(&d);
                }
                if rhs.requires_grad() {
                    let d: Vec<f32> = lhs.data().iter().zip(grad_out).map(|(&l, &g)| l * g).collect();
                    rhs.accumulate_grad(&d);
                }
            }
            Op::ScaleChannels { input, scale } => {
                let (n, c, h, w) = nchw(input);
                let plane = h * w;
                if input.requires_grad() {
                    let s = scale.data();
                    let mut di = vec![0.0f32; input.numel()];
                    for ni in 0..n {
                        for ci in 0..c {
                            let base = (ni * c + ci) * plane;
                            for i in 0..plane {
                                di[base + i] = grad_out[base + i] * s[ci];
                            }
                        }
                    }
                    input.accumulate_grad(&di);
                }
                if scale.requires_grad() {
                    let x = input.data();
                    let mut ds = vec![0.0f32; c];
                    for ni in 0..n {
                        for ci in 0..c {
                            let base = (ni * c + ci) * plane;
                            let mut acc = 0.0f32;
                            for i in 0..plane {
                                acc += grad_out[base + i] * x[base + i];
                            }
                            ds[ci] += acc;
                        }
                    }
                    scale.accumulate_grad(&ds);
                }
            }
            Op::Sum { input } => {
                if input.requires_grad() {
                    let di = vec![grad_out[0]; input.numel()];
                    input.accumulate_grad(&di);
                }
            }
            Op::MulScalar { input, factor } => {
                if input.requires_grad() {
                    let di: Vec<f32> = grad_out.iter().map(|&g| g * factor).collect();
                    input.accumulate_grad(&di);
                }
            }
            Op::CrossEntropyLogits { logits, labels, probs } => {
                if logits.requires_grad() {
                    let n = logits.shape()[0];
                    let kk = logits.shape()[1];
                    let di = k::cross_entropy_backward(probs, labels, n, kk, grad_out[0]);
                    logits.accumulate_grad(&di);
                }
            }
        }
    }
}
