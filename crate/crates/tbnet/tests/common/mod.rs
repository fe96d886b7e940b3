//! Shared test oracles: brute-force reference kernels and the
//! finite-difference gradient checker.
//!
//! The reference kernels are written directly from the operation
//! definitions, in f64, and stay independent of the library's optimized
//! f32 implementations. Gradient checks difference the f64 reference
//! forward, so f32 kernel rounding never masquerades as a gradient error.

#![allow(dead_code)]

pub mod gradchecks;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tbnet::tensor::{ops, Tensor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_vec(rng: &mut ChaCha8Rng, n: usize, lo: f32, hi: f32) -> Vec<f32> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

pub fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f32, hi: f32) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, rand_vec(rng, n, lo, hi)).unwrap()
}

pub fn to64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

pub fn assert_close(actual: &[f32], expected: &[f64], tol: f64, what: &str) {
    assert_eq!(actual.len(), expected.len(), "{what}: length mismatch");
    for (i, (a, e)) in actual.iter().zip(expected).enumerate() {
        assert!(
            (*a as f64 - e).abs() <= tol,
            "{what}: element {i} differs: {a} vs {e} (tol {tol})"
        );
    }
}

// ---------------------------------------------------------------------------
// f64 reference kernels (nested loops, no shortcuts)
// ---------------------------------------------------------------------------

/// Direct six-nested-loop convolution with zero padding and group support.
#[allow(clippy::too_many_arguments)]
pub fn ref_conv2d(
    input: &[f64],
    n: usize,
    ci: usize,
    h: usize,
    w: usize,
    weight: &[f64],
    co: usize,
    kh: usize,
    kw: usize,
    bias: Option<&[f64]>,
    stride: usize,
    padding: usize,
    groups: usize,
) -> (Vec<f64>, usize, usize) {
    let oh = (h + 2 * padding - kh) / stride + 1;
    let ow = (w + 2 * padding - kw) / stride + 1;
    let cig = ci / groups;
    let cog = co / groups;
    let mut out = vec![0.0f64; n * co * oh * ow];
    for ni in 0..n {
        for coi in 0..co {
            let g = coi / cog;
            for ohi in 0..oh {
                for owi in 0..ow {
                    let mut acc = bias.map(|b| b[coi]).unwrap_or(0.0);
                    for cig_i in 0..cig {
                        let cii = g * cig + cig_i;
                        for khi in 0..kh {
                            for kwi in 0..kw {
                                let ih = (ohi * stride + khi) as isize - padding as isize;
                                let iw = (owi * stride + kwi) as isize - padding as isize;
                                if ih >= 0 && (ih as usize) < h && iw >= 0 && (iw as usize) < w {
                                    let x = input
                                        [((ni * ci + cii) * h + ih as usize) * w + iw as usize];
                                    let k = weight[((coi * cig + cig_i) * kh + khi) * kw + kwi];
                                    acc += x * k;
                                }
                            }
                        }
                    }
                    out[((ni * co + coi) * oh + ohi) * ow + owi] = acc;
                }
            }
        }
    }
    (out, oh, ow)
}

/// Brute-force sliding-window maximum.
pub fn ref_maxpool2d(
    input: &[f64],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    kernel: usize,
    stride: usize,
) -> (Vec<f64>, usize, usize) {
    let oh = (h - kernel) / stride + 1;
    let ow = (w - kernel) / stride + 1;
    let mut out = vec![f64::NEG_INFINITY; n * c * oh * ow];
    for plane in 0..n * c {
        for ohi in 0..oh {
            for owi in 0..ow {
                let mut best = f64::NEG_INFINITY;
                for dy in 0..kernel {
                    for dx in 0..kernel {
                        let v =
                            input[plane * h * w + (ohi * stride + dy) * w + (owi * stride + dx)];
                        if v > best {
                            best = v;
                        }
                    }
                }
                out[plane * oh * ow + ohi * ow + owi] = best;
            }
        }
    }
    (out, oh, ow)
}

pub fn ref_upsample(input: &[f64], n: usize, c: usize, h: usize, w: usize, f: usize) -> Vec<f64> {
    let (oh, ow) = (h * f, w * f);
    let mut out = vec![0.0f64; n * c * oh * ow];
    for plane in 0..n * c {
        for oy in 0..oh {
            for ox in 0..ow {
                out[plane * oh * ow + oy * ow + ox] = input[plane * h * w + (oy / f) * w + (ox / f)];
            }
        }
    }
    out
}

pub fn ref_gap(input: &[f64], n: usize, c: usize, h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; n * c];
    for i in 0..n * c {
        let mut acc = 0.0;
        for j in 0..h * w {
            acc += input[i * h * w + j];
        }
        out[i] = acc / (h * w) as f64;
    }
    out
}

/// Triple-loop dense layer (per-row matrix product).
pub fn ref_dense(
    input: &[f64],
    weight: &[f64],
    bias: &[f64],
    n: usize,
    ci: usize,
    co: usize,
) -> Vec<f64> {
    let mut out = vec![0.0f64; n * co];
    for ni in 0..n {
        for coi in 0..co {
            let mut acc = bias[coi];
            for cii in 0..ci {
                acc += input[ni * ci + cii] * weight[coi * ci + cii];
            }
            out[ni * co + coi] = acc;
        }
    }
    out
}

pub fn ref_softmax(input: &[f64], n: usize, k: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; n * k];
    for ni in 0..n {
        let row = &input[ni * k..(ni + 1) * k];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for (o, &v) in out[ni * k..(ni + 1) * k].iter_mut().zip(row) {
            *o = (v - m).exp();
            z += *o;
        }
        for o in &mut out[ni * k..(ni + 1) * k] {
            *o /= z;
        }
    }
    out
}

pub fn ref_sigmoid(input: &[f64]) -> Vec<f64> {
    input.iter().map(|&x| 1.0 / (1.0 + (-x).exp())).collect()
}

pub fn ref_relu(input: &[f64]) -> Vec<f64> {
    input.iter().map(|&x| x.max(0.0)).collect()
}

pub fn ref_batchnorm_train(
    input: &[f64],
    gamma: &[f64],
    beta: &[f64],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    eps: f64,
) -> Vec<f64> {
    let plane = h * w;
    let m = (n * plane) as f64;
    let mut out = vec![0.0f64; input.len()];
    for ci in 0..c {
        let mut mean = 0.0;
        for ni in 0..n {
            for i in 0..plane {
                mean += input[(ni * c + ci) * plane + i];
            }
        }
        mean /= m;
        let mut var = 0.0;
        for ni in 0..n {
            for i in 0..plane {
                let d = input[(ni * c + ci) * plane + i] - mean;
                var += d * d;
            }
        }
        var /= m;
        let invstd = 1.0 / (var + eps).sqrt();
        for ni in 0..n {
            for i in 0..plane {
                let idx = (ni * c + ci) * plane + i;
                out[idx] = gamma[ci] * (input[idx] - mean) * invstd + beta[ci];
            }
        }
    }
    out
}

pub fn ref_batchnorm_eval(
    input: &[f64],
    gamma: &[f64],
    beta: &[f64],
    running_mean: &[f64],
    running_var: &[f64],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    eps: f64,
) -> Vec<f64> {
    let plane = h * w;
    let mut out = vec![0.0f64; input.len()];
    for ci in 0..c {
        let invstd = 1.0 / (running_var[ci] + eps).sqrt();
        for ni in 0..n {
            for i in 0..plane {
                let idx = (ni * c + ci) * plane + i;
                out[idx] = gamma[ci] * (input[idx] - running_mean[ci]) * invstd + beta[ci];
            }
        }
    }
    out
}

pub fn ref_cross_entropy(logits: &[f64], labels: &[usize], n: usize, k: usize) -> f64 {
    let mut loss = 0.0;
    for ni in 0..n {
        let row = &logits[ni * k..(ni + 1) * k];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = row.iter().map(|&v| (v - m).exp()).sum();
        loss += m + z.ln() - row[labels[ni]];
    }
    loss / n as f64
}

pub fn ref_scale_channels(input: &[f64], scale: &[f64], n: usize, c: usize, hw: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; input.len()];
    for ni in 0..n {
        for ci in 0..c {
            for i in 0..hw {
                let idx = (ni * c + ci) * hw + i;
                out[idx] = input[idx] * scale[ci];
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

/// Finite-difference gradient check.
///
/// `build` produces the library output tensor (any shape) from f32 leaves;
/// `eval64` computes the same function through the independent f64
/// reference path. The probe scalar is `sum(weights * output)` with fixed
/// pseudo-random weights. Analytic gradients come from one backward pass;
/// numeric gradients are central differences of the f64 reference at
/// `eps`. Returns the maximum of `|a - fd| / max(|a|, |fd|, 1e-6)` over
/// every input scalar.
pub fn finite_diff_max_rel_err(
    inputs: &[Tensor],
    build: &dyn Fn(&[Tensor]) -> Tensor,
    eval64: &dyn Fn(&[Vec<f64>]) -> Vec<f64>,
    eps: f64,
    weight_seed: u64,
) -> f64 {
    let grad_inputs: Vec<Tensor> = inputs.iter().map(|t| t.requiring_grad()).collect();
    let out = build(&grad_inputs);
    let mut wrng = rng(weight_seed);
    let weights = rand_vec(&mut wrng, out.numel(), -1.0, 1.0);
    let w_tensor = Tensor::from_vec(out.shape(), weights.clone()).unwrap();
    let loss = ops::sum(&ops::mul_elem(&out, &w_tensor).unwrap());
    loss.backward().expect("backward succeeds");
    let analytic: Vec<Vec<f32>> = grad_inputs
        .iter()
        .map(|t| t.grad().unwrap_or_else(|| vec![0.0; t.numel()]))
        .collect();

    // Agreement guard: the reference forward must match the library forward
    // at the unperturbed point, otherwise the gradient comparison is
    // meaningless.
    let base64: Vec<Vec<f64>> = inputs.iter().map(|t| to64(t.data())).collect();
    let ref_out = eval64(&base64);
    assert_eq!(ref_out.len(), out.numel(), "reference output shape mismatch");
    for (i, (a, e)) in out.data().iter().zip(&ref_out).enumerate() {
        assert!(
            (*a as f64 - e).abs() <= 1e-4 * (1.0 + e.abs()),
            "reference/library forward disagree at {i}: {a} vs {e}"
        );
    }

    let weighted = |leaves: &[Vec<f64>]| -> f64 {
        eval64(leaves)
            .iter()
            .zip(&weights)
            .map(|(&v, &w)| v * w as f64)
            .sum()
    };

    let mut max_rel = 0.0f64;
    for (ti, t) in inputs.iter().enumerate() {
        for ei in 0..t.numel() {
            let eval = |delta: f64| -> f64 {
                let mut leaves = base64.clone();
                leaves[ti][ei] += delta;
                weighted(&leaves)
            };
            let fd = (eval(eps) - eval(-eps)) / (2.0 * eps);
            let a = analytic[ti][ei] as f64;
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    max_rel
}

pub const GRAD_EPS: f64 = 1e-3;
pub const GRAD_TOL: f64 = 1e-3;
pub const BN_EPS64: f64 = 1e-5;
