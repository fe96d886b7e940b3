//! Numeric kernels behind the tensor ops.
//!
//! Every kernel takes flat row-major slices plus explicit dimensions and is
//! deterministic: parallel sections split the output into disjoint planes
//! and keep a fixed accumulation order inside each plane, so results are
//! bit-identical regardless of thread count.

use rayon::prelude::*;

/// Output extent of a convolution/pooling axis.
pub fn conv_out_dim(input: usize, kernel: usize, stride: usize, padding: usize) -> usize {
    (input + 2 * padding - kernel) / stride + 1
}

/// Range of output positions whose tap `k - padding + o*stride` lands inside
/// `[0, input)`. Returns `lo..hi` over the output axis.
fn valid_out_range(input: usize, out: usize, k: usize, stride: usize, padding: usize) -> (usize, usize) {
    // need 0 <= o*stride + k - padding < input
    let lo = if k >= padding {
        0
    } else {
        (padding - k + stride - 1) / stride
    };
    let max_pos = input + padding;
    let hi = if max_pos > k {
        ((max_pos - k - 1) / stride + 1).min(out)
    } else {
        0
    };
    (lo.min(hi), hi)
}

pub struct ConvDims {
    pub n: usize,
    pub ci: usize,
    pub h: usize,
    pub w: usize,
    pub co: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvDims {
    fn ci_per_group(&self) -> usize {
        self.ci / self.groups
    }
    fn co_per_group(&self) -> usize {
        self.co / self.groups
    }
}

pub fn conv2d_forward(input: &[f32], weight: &[f32], bias: Option<&[f32]>, d: &ConvDims) -> Vec<f32> {
    let mut out = vec![0.0f32; d.n * d.co * d.oh * d.ow];
    let cig = d.ci_per_group();
    let cog = d.co_per_group();
    let in_plane = d.h * d.w;
    let out_plane = d.oh * d.ow;
    out.par_chunks_mut(out_plane).enumerate().for_each(|(plane, out_p)| {
        let n = plane / d.co;
        let co = plane % d.co;
        let g = co / cog;
        if let Some(b) = bias {
            out_p.fill(b[co]);
        }
        for ci_g in 0..cig {
            let ci = g * cig + ci_g;
            let in_p = &input[(n * d.ci + ci) * in_plane..(n * d.ci + ci + 1) * in_plane];
            for kh in 0..d.kh {
                let (oh_lo, oh_hi) = valid_out_range(d.h, d.oh, kh, d.stride, d.padding);
                for kw in 0..d.kw {
                    let wv = weight[((co * cig + ci_g) * d.kh + kh) * d.kw + kw];
                    if wv == 0.0 {
                        continue;
                    }
                    let (ow_lo, ow_hi) = valid_out_range(d.w, d.ow, kw, d.stride, d.padding);
                    for oh in oh_lo..oh_hi {
                        let ih = oh * d.stride + kh - d.padding;
                        let in_row = &in_p[ih * d.w..(ih + 1) * d.w];
                        let out_row = &mut out_p[oh * d.ow..(oh + 1) * d.ow];
                        let base = kw as isize - d.padding as isize;
                        for ow in ow_lo..ow_hi {
                            let iw = (ow * d.stride) as isize + base;
                            out_row[ow] += wv * in_row[iw as usize];
                        }
                    }
                }
            }
        }
    });
    out
}

pub struct ConvGrads {
    pub dinput: Option<Vec<f32>>,
    pub dweight: Option<Vec<f32>>,
    pub dbias: Option<Vec<f32>>,
}

pub fn conv2d_backward(
    input: &[f32],
    weight: &[f32],
    dout: &[f32],
    d: &ConvDims,
    need_dinput: bool,
    need_dweight: bool,
    need_dbias: bool,
) -> ConvGrads {
    let cig = d.ci_per_group();
    let cog = d.co_per_group();
    let in_plane = d.h * d.w;
    let out_plane = d.oh * d.ow;

    let dinput = need_dinput.then(|| {
        let mut di = vec![0.0f32; input.len()];
        di.par_chunks_mut(in_plane).enumerate().for_each(|(plane, di_p)| {
            let n = plane / d.ci;
            let ci = plane % d.ci;
            let g = ci / cig;
            let ci_g = ci % cig;
            for co_g in 0..cog {
                let co = g * cog + co_g;
                let dout_p = &dout[(n * d.co + co) * out_plane..(n * d.co + co + 1) * out_plane];
                for kh in 0..d.kh {
                    let (oh_lo, oh_hi) = valid_out_range(d.h, d.oh, kh, d.stride, d.padding);
                    for kw in 0..d.kw {
                        let wv = weight[((co * cig + ci_g) * d.kh + kh) * d.kw + kw];
                        if wv == 0.0 {
                            continue;
                        }
                        let (ow_lo, ow_hi) = valid_out_range(d.w, d.ow, kw, d.stride, d.padding);
                        for oh in oh_lo..oh_hi {
                            let ih = oh * d.stride + kh - d.padding;
                            let di_row = &mut di_p[ih * d.w..(ih + 1) * d.w];
                            let dout_row = &dout_p[oh * d.ow..(oh + 1) * d.ow];
                            let base = kw as isize - d.padding as isize;
                            for ow in ow_lo..ow_hi {
                                let iw = ((ow * d.stride) as isize + base) as usize;
                                di_row[iw] += wv * dout_row[ow];
                            }
                        }
                    }
                }
            }
        });
        di
    });

    let dweight = need_dweight.then(|| {
        let mut dw = vec![0.0f32; weight.len()];
        let per_co = cig * d.kh * d.kw;
        dw.par_chunks_mut(per_co).enumerate().for_each(|(co, dw_co)| {
            let g = co / cog;
            for n in 0..d.n {
                let dout_p = &dout[(n * d.co + co) * out_plane..(n * d.co + co + 1) * out_plane];
                for ci_g in 0..cig {
                    let ci = g * cig + ci_g;
                    let in_p = &input[(n * d.ci + ci) * in_plane..(n * d.ci + ci + 1) * in_plane];
                    for kh in 0..d.kh {
                        let (oh_lo, oh_hi) = valid_out_range(d.h, d.oh, kh, d.stride, d.padding);
                        for kw in 0..d.kw {
                            let (ow_lo, ow_hi) = valid_out_range(d.w, d.ow, kw, d.stride, d.padding);
                            let mut acc = 0.0f32;
                            for oh in oh_lo..oh_hi {
                                let ih = oh * d.stride + kh - d.padding;
                                let in_row = &in_p[ih * d.w..(ih + 1) * d.w];
                                let dout_row = &dout_p[oh * d.ow..(oh + 1) * d.ow];
                                let base = kw as isize - d.padding as isize;
                                for ow in ow_lo..ow_hi {
                                    let iw = ((ow * d.stride) as isize + base) as usize;
                                    acc += in_row[iw] * dout_row[ow];
                                }
                            }
                            dw_co[(ci_g * d.kh + kh) * d.kw + kw] += acc;
                        }
                    }
                }
            }
        });
        dw
    });

    let dbias = need_dbias.then(|| {
        let mut db = vec![0.0f32; d.co];
        for (co, slot) in db.iter_mut().enumerate() {
            let mut acc = 0.0f32;
            for n in 0..d.n {
                let dout_p = &dout[(n * d.co + co) * out_plane..(n * d.co + co + 1) * out_plane];
                for v in dout_p {
                    acc += v;
                }
            }
            *slot = acc;
        }
        db
    });

    ConvGrads { dinput, dweight, dbias }
}

/// Max pooling; returns the output and the flat input index of each window
/// maximum (first occurrence in row-major order on ties).
pub fn maxpool2d_forward(
    input: &[f32],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    kernel: usize,
    stride: usize,
) -> (Vec<f32>, Vec<u32>, usize, usize) {
    let oh = (h - kernel) / stride + 1;
    let ow = (w - kernel) / stride + 1;
    let mut out = vec![0.0f32; n * c * oh * ow];
    let mut argmax = vec![0u32; n * c * oh * ow];
    for plane in 0..n * c {
        let in_p = &input[plane * h * w..(plane + 1) * h * w];
        let out_base = plane * oh * ow;
        for ohi in 0..oh {
            for owi in 0..ow {
                let mut best = f32::NEG_INFINITY;
                let mut best_idx = 0usize;
                for dy in 0..kernel {
                    let ih = ohi * stride + dy;
                    for dx in 0..kernel {
                        let iw = owi * stride + dx;
                        let v = in_p[ih * w + iw];
                        if v > best {
                            best = v;
                            best_idx = ih * w + iw;
                        }
                    }
                }
                out[out_base + ohi * ow + owi] = best;
                argmax[out_base + ohi * ow + owi] = (plane * h * w + best_idx) as u32;
            }
        }
    }
    (out, argmax, oh, ow)
}

pub fn maxpool2d_backward(dout: &[f32], argmax: &[u32], input_len: usize) -> Vec<f32> {
    let mut di = vec![0.0f32; input_len];
    for (g, &idx) in dout.iter().zip(argmax) {
        di[idx as usize] += g;
    }
    di
}

pub fn nearest_upsample_forward(
    input: &[f32],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    factor: usize,
) -> Vec<f32> {
    let (oh, ow) = (h * factor, w * factor);
    let mut out = vec![0.0f32; n * c * oh * ow];
    for plane in 0..n * c {
        let in_p = &input[plane * h * w..(plane + 1) * h * w];
        let out_p = &mut out[plane * oh * ow..(plane + 1) * oh * ow];
        for ih in 0..h {
            for iw in 0..w {
                let v = in_p[ih * w + iw];
                for dy in 0..factor {
                    let orow = (ih * factor + dy) * ow + iw * factor;
                    out_p[orow..orow + factor].fill(v);
                }
            }
        }
    }
    out
}

pub fn nearest_upsample_backward(
    dout: &[f32],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    factor: usize,
) -> Vec<f32> {
    let (oh, ow) = (h * factor, w * factor);
    let mut di = vec![0.0f32; n * c * h * w];
    for plane in 0..n * c {
        let dout_p = &dout[plane * oh * ow..(plane + 1) * oh * ow];
        let di_p = &mut di[plane * h * w..(plane + 1) * h * w];
        for ih in 0..h {
            for iw in 0..w {
                let mut acc = 0.0f32;
                for dy in 0..factor {
                    let orow = (ih * factor + dy) * ow + iw * factor;
                    for v in &dout_p[orow..orow + factor] {
                        acc += v;
                    }
                }
                di_p[ih * w + iw] += acc;
            }
        }
    }
    di
}

pub fn global_avg_pool_forward(input: &[f32], n: usize, c: usize, h: usize, w: usize) -> Vec<f32> {
    let plane = h * w;
    let scale = 1.0 / plane as f32;
    let mut out = vec![0.0f32; n * c];
    for (i, slot) in out.iter_mut().enumerate() {
        let p = &input[i * plane..(i + 1) * plane];
        let mut acc = 0.0f32;
        for v in p {
            acc += v;
        }
        *slot = acc * scale;
    }
    out
}

pub fn global_avg_pool_backward(dout: &[f32], n: usize, c: usize, h: usize, w: usize) -> Vec<f32> {
    let plane = h * w;
    let scale = 1.0 / plane as f32;
    let mut di = vec![0.0f32; n * c * plane];
    for i in 0..n * c {
        let g = dout[i] * scale;
        di[i * plane..(i + 1) * plane].fill(g);
    }
    di
}

pub fn dense_forward(input: &[f32], weight: &[f32], bias: &[f32], n: usize, ci: usize, co: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; n * co];
    for ni in 0..n {
        let in_row = &input[ni * ci..(ni + 1) * ci];
        let out_row = &mut out[ni * co..(ni + 1) * co];
        for (coi, slot) in out_row.iter_mut().enumerate() {
            let w_row = &weight[coi * ci..(coi + 1) * ci];
            let mut acc = bias[coi];
            for (x, wv) in in_row.iter().zip(w_row) {
                acc += x * wv;
            }
            *slot = acc;
        }
    }
    out
}

pub fn dense_backward(
    input: &[f32],
    weight: &[f32],
    dout: &[f32],
    n: usize,
    ci: usize,
    co: usize,
) -> (Vec<f32>, Vec<f32>, Vec<f32>) {
    let mut di = vec![0.0f32; n * ci];
    let mut dw = vec![0.0f32; co * ci];
    let mut db = vec![0.0f32; co];
    for ni in 0..n {
        let dout_row = &dout[ni * co..(ni + 1) * co];
        let in_row = &input[ni * ci..(ni + 1) * ci];
        let di_row = &mut di[ni * ci..(ni + 1) * ci];
        for coi in 0..co {
            let g = dout_row[coi];
            db[coi] += g;
            let w_row = &weight[coi * ci..(coi + 1) * ci];
            let dw_row = &mut dw[coi * ci..(coi + 1) * ci];
            for cii in 0..ci {
                di_row[cii] += g * w_row[cii];
                dw_row[cii] += g * in_row[cii];
            }
        }
    }
    (di, dw, db)
}

/// Row-wise softmax with max subtraction.
pub fn softmax_forward(input: &[f32], n: usize, k: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; n * k];
    for ni in 0..n {
        let row = &input[ni * k..(ni + 1) * k];
        let out_row = &mut out[ni * k..(ni + 1) * k];
        let mut m = f32::NEG_INFINITY;
        for &v in row {
            if v > m {
                m = v;
            }
        }
        let mut z = 0.0f32;
        for (o, &v) in out_row.iter_mut().zip(row) {
            let e = (v - m).exp();
            *o = e;
            z += e;
        }
        let inv = 1.0 / z;
        for o in out_row.iter_mut() {
            *o *= inv;
        }
    }
    out
}

pub fn softmax_backward(probs: &[f32], dout: &[f32], n: usize, k: usize) -> Vec<f32> {
    let mut di = vec![0.0f32; n * k];
    for ni in 0..n {
        let p = &probs[ni * k..(ni + 1) * k];
        let g = &dout[ni * k..(ni + 1) * k];
        let mut dot = 0.0f32;
        for (pi, gi) in p.iter().zip(g) {
            dot += pi * gi;
        }
        let di_row = &mut di[ni * k..(ni + 1) * k];
        for i in 0..k {
            di_row[i] = p[i] * (g[i] - dot);
        }
    }
    di
}

pub struct BatchNormStats {
    pub mean: Vec<f32>,
    pub var: Vec<f32>,
    pub invstd: Vec<f32>,
}

/// Per-channel moments over the (N, H, W) reduce set. Biased variance.
pub fn batchnorm_stats(input: &[f32], n: usize, c: usize, h: usize, w: usize, eps: f32) -> BatchNormStats {
    let plane = h * w;
    let m = (n * plane) as f32;
    let mut mean = vec![0.0f32; c];
    let mut var = vec![0.0f32; c];
    for ci in 0..c {
        let mut acc = 0.0f32;
        for ni in 0..n {
            let p = &input[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
            for v in p {
                acc += v;
            }
        }
        mean[ci] = acc / m;
    }
    for ci in 0..c {
        let mu = mean[ci];
        let mut acc = 0.0f32;
        for ni in 0..n {
            let p = &input[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
            for v in p {
                let d = v - mu;
                acc += d * d;
            }
        }
        var[ci] = acc / m;
    }
    let invstd = var.iter().map(|&v| 1.0 / (v + eps).sqrt()).collect();
    BatchNormStats { mean, var, invstd }
}

pub fn batchnorm_forward(
    input: &[f32],
    gamma: &[f32],
    beta: &[f32],
    mean: &[f32],
    invstd: &[f32],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
) -> Vec<f32> {
    let plane = h * w;
    let mut out = vec![0.0f32; input.len()];
    for ni in 0..n {
        for ci in 0..c {
            let scale = gamma[ci] * invstd[ci];
            let shift = beta[ci] - mean[ci] * scale;
            let base = (ni * c + ci) * plane;
            for i in 0..plane {
                out[base + i] = input[base + i] * scale + shift;
            }
        }
    }
    out
}

/// Backward through training-mode batch norm (gradients flow through the
/// batch statistics).
pub fn batchnorm_backward_train(
    input: &[f32],
    gamma: &[f32],
    mean: &[f32],
    invstd: &[f32],
    dout: &[f32],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
) -> (Vec<f32>, Vec<f32>, Vec<f32>) {
    let plane = h * w;
    let m = (n * plane) as f32;
    let mut di = vec![0.0f32; input.len()];
    let mut dgamma = vec![0.0f32; c];
    let mut dbeta = vec![0.0f32; c];
    for ci in 0..c {
        let mu = mean[ci];
        let istd = invstd[ci];
        let mut sum_g = 0.0f32;
        let mut sum_gx = 0.0f32;
        for ni in 0..n {
            let base = (ni * c + ci) * plane;
            for i in 0..plane {
                let g = dout[base + i];
                let xhat = (input[base + i] - mu) * istd;
                sum_g += g;
                sum_gx += g * xhat;
            }
        }
        dgamma[ci] = sum_gx;
        dbeta[ci] = sum_g;
        let k = gamma[ci] * istd / m;
        for ni in 0..n {
            let base = (ni * c + ci) * plane;
            for i in 0..plane {
                let g = dout[base + i];
                let xhat = (input[base + i] - mu) * istd;
                di[base + i] = k * (m * g - sum_g - xhat * sum_gx);
            }
        }
    }
    (di, dgamma, dbeta)
}

/// Backward through inference-mode batch norm (statistics are constants).
pub fn batchnorm_backward_eval(
    input: &[f32],
    gamma: &[f32],
    mean: &[f32],
    invstd: &[f32],
    dout: &[f32],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
) -> (Vec<f32>, Vec<f32>, Vec<f32>) {
    let plane = h * w;
    let mut di = vec![0.0f32; input.len()];
    let mut dgamma = vec![0.0f32; c];
    let mut dbeta = vec![0.0f32; c];
    for ci in 0..c {
        let scale = gamma[ci] * invstd[ci];
        let mut sum_g = 0.0f32;
        let mut sum_gx = 0.0f32;
        for ni in 0..n {
            let base = (ni * c + ci) * plane;
            for i in 0..plane {
                let g = dout[base + i];
                sum_g += g;
                sum_gx += g * (input[base + i] - mean[ci]) * invstd[ci];
                di[base + i] = g * scale;
            }
        }
        dgamma[ci] = sum_gx;
        dbeta[ci] = sum_g;
    }
    (di, dgamma, dbeta)
}

/// Mean cross-entropy from logits via log-sum-exp; returns (loss, probs).
pub fn cross_entropy_forward(logits: &[f32], labels: &[usize], n: usize, k: usize) -> (f32, Vec<f32>) {
    let probs = softmax_forward(logits, n, k);
    let mut loss = 0.0f32;
    for ni in 0..n {
        let row = &logits[ni * k..(ni + 1) * k];
        let mut m = f32::NEG_INFINITY;
        for &v in row {
            if v > m {
                m = v;
            }
        }
        let mut z = 0.0f32;
        for &v in row {
            z += (v - m).exp();
        }
        let lse = m + z.ln();
        loss += lse - row[labels[ni]];
    }
    (loss / n as f32, probs)
}

/// d(loss)/d(logits) = (softmax - one_hot) / N, scaled by the upstream grad.
pub fn cross_entropy_backward(probs: &[f32], labels: &[usize], n: usize, k: usize, upstream: f32) -> Vec<f32> {
    let scale = upstream / n as f32;
    let mut d = vec![0.0f32; n * k];
    for ni in 0..n {
        for ki in 0..k {
            let one_hot = if labels[ni] == ki { 1.0 } else { 0.0 };
            d[ni * k + ki] = (probs[ni * k + ki] - one_hot) * scale;
        }
    }
    d
}
