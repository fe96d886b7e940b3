//! Screening metrics: confusion matrix, accuracy, sensitivity, specificity.

use serde::Serialize;

use crate::data::dataset::stack_batch;
use crate::data::{SampleSource, Split};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::nn::Mode;
use crate::tensor::{NoGradGuard, Tensor};

/// Prediction counts; the positive class is TB positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn record(&mut self, predicted_positive: bool, actually_positive: bool) {
        match (predicted_positive, actually_positive) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn metrics(&self) -> ScreeningMetrics {
        let ratio = |num: u64, den: u64| {
            if den == 0 {
                None
            } else {
                Some(num as f64 / den as f64)
            }
        };
        ScreeningMetrics {
            accuracy: ratio(self.tp + self.tn, self.total()),
            sensitivity: ratio(self.tp, self.tp + self.fn_),
            specificity: ratio(self.tn, self.tn + self.fp),
        }
    }
}

/// Derived rates. A zero denominator makes the metric undefined (`None`),
/// reported as "n/a" — never as 0 or 100.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScreeningMetrics {
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

fn pct(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{:.2}", x * 100.0),
        None => "n/a".to_string(),
    }
}

/// Full evaluation output.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub metrics: ScreeningMetrics,
}

impl EvalReport {
    /// Plain-text table with accuracy/sensitivity/specificity columns.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "{:>14}  {:>15}  {:>15}\n",
            "Accuracy (%)", "Sensitivity (%)", "Specificity (%)"
        ));
        s.push_str(&format!(
            "{:>14}  {:>15}  {:>15}\n",
            pct(self.metrics.accuracy),
            pct(self.metrics.sensitivity),
            pct(self.metrics.specificity)
        ));
        s.push_str(&format!(
            "TP {}  FP {}  TN {}  FN {}\n",
            self.confusion.tp, self.confusion.fp, self.confusion.tn, self.confusion.fn_
        ));
        s
    }
}

/// Argmax decision over `[p_negative, p_positive]`; ties go to the negative
/// class (conservative for specificity accounting).
pub fn predict_positive(probs: &[f32]) -> bool {
    probs[1] > probs[0]
}

/// Evaluates a frozen model over a sample source: deterministic, no
/// augmentation, argmax decisions.
pub fn evaluate(model: &Model, source: &dyn SampleSource) -> Result<EvalReport> {
    evaluate_batched(model, source, 16)
}

pub fn evaluate_batched(
    model: &Model,
    source: &dyn SampleSource,
    batch_size: usize,
) -> Result<EvalReport> {
    if source.is_empty() {
        return Err(Error::EmptySplit {
            split: "evaluation".into(),
        });
    }
    let _guard = NoGradGuard::new();
    let mut cm = ConfusionMatrix::default();
    let n = source.len();
    let bs = batch_size.max(1);
    let mut idx = 0;
    while idx < n {
        let hi = (idx + bs).min(n);
        let images: Vec<Tensor> = (idx..hi)
            .map(|i| source.image(i, 0, false))
            .collect::<Result<_>>()?;
        let batch = stack_batch(&images)?;
        let probs = model.forward(&batch, Mode::Eval)?;
        for (row, i) in probs.data().chunks(2).zip(idx..hi) {
            cm.record(predict_positive(row), source.label(i) == 1);
        }
        idx = hi;
    }
    Ok(EvalReport {
        metrics: cm.metrics(),
        confusion: cm,
    })
}

/// Evaluates one manifest split.
pub fn evaluate_split(
    model: &Model,
    manifest: &crate::data::DatasetManifest,
    split: Split,
    spec: &crate::data::PreprocessSpec,
) -> Result<EvalReport> {
    let ds = crate::data::ManifestDataset::load(manifest, split, spec, 0)?;
    evaluate(model, &ds)
}
