//! Parameter and multiply-accumulate accounting.
//!
//! Conventions (chosen so the totals are comparable with published
//! complexity figures):
//! - conv params = Co*(Ci/g)*kh*kw + Co (bias) + 2*Co (batch-norm affine,
//!   when the layer carries one); conv MACs = H'*W'*Co*(Ci/g)*kh*kw
//! - dense params = Co*Ci + Co; dense MACs = Co*Ci
//! - pooling, activations, upsampling, elementwise gating and the
//!   condenser's per-channel scale contribute zero MACs
//! - MACs are counted for a single 1 x C x H x W forward pass at the
//!   config's input size.

use serde::Serialize;

use super::{BlockInstance, NetworkConfig, NUM_CLASSES};

#[derive(Debug, Clone, Serialize)]
pub struct LayerComplexity {
    pub name: String,
    pub params: u64,
    pub macs: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComplexityReport {
    pub total_params: u64,
    pub total_macs: u64,
    pub per_layer: Vec<LayerComplexity>,
}

impl ComplexityReport {
    /// Plain-text table with one row per layer plus totals.
    pub fn to_table(&self) -> String {
        let mut width = "layer".len();
        for l in &self.per_layer {
            width = width.max(l.name.len());
        }
        let mut s = String::new();
        s.push_str(&format!("{:<width$}  {:>12}  {:>14}\n", "layer", "params", "MACs"));
        for l in &self.per_layer {
            s.push_str(&format!("{:<width$}  {:>12}  {:>14}\n", l.name, l.params, l.macs));
        }
        s.push_str(&format!(
            "{:<width$}  {:>12}  {:>14}\n",
            "total", self.total_params, self.total_macs
        ));
        s.push_str(&format!(
            "{:<width$}  {:>9.3} M  {:>11.3} G\n",
            "",
            self.total_params as f64 / 1e6,
            self.total_macs as f64 / 1e9
        ));
        s
    }
}

fn conv_entry(
    name: String,
    out_c: u64,
    in_per_group: u64,
    kh: u64,
    kw: u64,
    oh: u64,
    ow: u64,
    with_bn: bool,
) -> LayerComplexity {
    let kernel_params = out_c * in_per_group * kh * kw;
    let params = kernel_params + out_c + if with_bn { 2 * out_c } else { 0 };
    LayerComplexity {
        name,
        params,
        macs: oh * ow * kernel_params,
    }
}

fn out_dim(d: usize, k: usize, s: usize, p: usize) -> usize {
    if d + 2 * p < k {
        0
    } else {
        (d + 2 * p - k) / s + 1
    }
}

/// Counts parameters and MACs layer by layer. Pure function of the config;
/// the totals equal the per-layer sums exactly, and the parameter total
/// equals the number of scalars in the built model's parameter list.
pub fn count_complexity(config: &NetworkConfig) -> ComplexityReport {
    let mut per_layer = Vec::new();
    let trace = config.walk();
    let mut counters = vec![0usize; config.stages.len()];
    for block in &trace.blocks {
        match block {
            BlockInstance::Stem { in_channels, h, w, cfg } => {
                let p = cfg.kernel / 2;
                let oh = out_dim(*h, cfg.kernel, cfg.stride, p);
                let ow = out_dim(*w, cfg.kernel, cfg.stride, p);
                per_layer.push(conv_entry(
                    format!("stem conv{}x{} {}->{}", cfg.kernel, cfg.kernel, in_channels, cfg.out_channels),
                    cfg.out_channels as u64,
                    *in_channels as u64,
                    cfg.kernel as u64,
                    cfg.kernel as u64,
                    oh as u64,
                    ow as u64,
                    true,
                ));
            }
            BlockInstance::Conv {
                in_channels,
                h,
                w,
                out_channels,
                kernel,
                stride,
                stage,
            } => {
                let idx = counters[*stage];
                counters[*stage] += 1;
                let p = kernel / 2;
                let oh = out_dim(*h, *kernel, *stride, p);
                let ow = out_dim(*w, *kernel, *stride, p);
                per_layer.push(conv_entry(
                    format!("s{stage}.b{idx} conv{kernel}x{kernel} {in_channels}->{out_channels}"),
                    *out_channels as u64,
                    *in_channels as u64,
                    *kernel as u64,
                    *kernel as u64,
                    oh as u64,
                    ow as u64,
                    true,
                ));
            }
            BlockInstance::Pepe { spec, h, w, stage } => {
                let idx = counters[*stage];
                counters[*stage] += 1;
                let (c, p1, p2, e) = (
                    spec.in_channels as u64,
                    spec.proj1_channels as u64,
                    spec.proj2_channels as u64,
                    spec.expand_channels as u64,
                );
                let k = spec.dw_kernel as u64;
                let pad = spec.dw_kernel / 2;
                let oh = out_dim(*h, spec.dw_kernel, spec.stride, pad) as u64;
                let ow = out_dim(*w, spec.dw_kernel, spec.stride, pad) as u64;
                let name = format!("s{stage}.b{idx} pepe {c}->{e}");
                let mut params = 0u64;
                let mut macs = 0u64;
                // pw1 (bn), dw (bn), pw2 (bn), pw3 (linear)
                let stages = [
                    (p1 * c, (*h as u64) * (*w as u64), p1, true),
                    (p1 * k * k, oh * ow, p1, true),
                    (p2 * p1, oh * ow, p2, true),
                    (e * p2, oh * ow, e, false),
                ];
                for (kernel_params, area, out_c, bn) in stages {
                    params += kernel_params + out_c + if bn { 2 * out_c } else { 0 };
                    macs += area * kernel_params;
                }
                per_layer.push(LayerComplexity { name, params, macs });
            }
            BlockInstance::Condenser { spec, h, w, stage } => {
                let idx = counters[*stage];
                counters[*stage] += 1;
                let (c, e, g, f) = (
                    spec.in_channels as u64,
                    spec.embed_channels as u64,
                    spec.groups.max(1) as u64,
                    spec.condense_factor.max(1),
                );
                let (ch, cw) = ((*h / f) as u64, (*w / f) as u64);
                let area = ch * cw;
                let name = format!("s{stage}.b{idx} condenser c{c}");
                // grouped pw + depthwise 3x3 + pw back, biases, learned scale
                let params = (e * (c / g) + e) + (e * 9 + e) + (c * e + c) + c;
                let macs = area * (e * (c / g)) + area * (e * 9) + area * (c * e);
                per_layer.push(LayerComplexity { name, params, macs });
            }
        }
    }
    let hc = trace.head_channels as u64;
    per_layer.push(LayerComplexity {
        name: format!("head dense {hc}->{NUM_CLASSES}"),
        params: NUM_CLASSES as u64 * hc + NUM_CLASSES as u64,
        macs: NUM_CLASSES as u64 * hc,
    });
    finish(per_layer)
}

fn finish(per_layer: Vec<LayerComplexity>) -> ComplexityReport {
    let total_params = per_layer.iter().map(|l| l.params).sum();
    let total_macs = per_layer.iter().map(|l| l.macs).sum();
    ComplexityReport {
        total_params,
        total_macs,
        per_layer,
    }
}
