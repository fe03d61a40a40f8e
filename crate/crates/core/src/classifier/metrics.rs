use serde::{Deserialize, Serialize};

use super::{LabeledFeature, LinearModel};
use crate::error::{Error, Result};
use crate::io::fmt_sig;

/// Per-class rates of a binary detector. `accuracy` is the balanced accuracy,
/// the mean of the true-positive and true-negative rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryRates {
    pub tp_rate: f64,
    pub tn_rate: f64,
    pub fp_rate: f64,
    pub fn_rate: f64,
    pub accuracy: f64,
}

impl BinaryRates {
    /// Rates implied by a true-positive and a true-negative rate.
    pub fn from_tp_tn(tp_rate: f64, tn_rate: f64) -> Self {
        BinaryRates {
            tp_rate,
            tn_rate,
            fp_rate: 1.0 - tn_rate,
            fn_rate: 1.0 - tp_rate,
            accuracy: (tp_rate + tn_rate) / 2.0,
        }
    }

    pub(crate) fn fields(&self) -> [f64; 5] {
        [self.tp_rate, self.tn_rate, self.fp_rate, self.fn_rate, self.accuracy]
    }
}

pub fn binary_rates(truth: &[bool], predicted: &[bool]) -> Result<BinaryRates> {
    if truth.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "{} truths but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let (mut tp, mut fneg, mut tn, mut fp) = (0usize, 0usize, 0usize, 0usize);
    for (&t, &p) in truth.iter().zip(predicted) {
        match (t, p) {
            (true, true) => tp += 1,
            (true, false) => fneg += 1,
            (false, false) => tn += 1,
            (false, true) => fp += 1,
        }
    }
    if tp + fneg == 0 || tn + fp == 0 {
        return Err(Error::invalid("rates need both positive and negative ground truth"));
    }
    Ok(BinaryRates::from_tp_tn(
        tp as f64 / (tp + fneg) as f64,
        tn as f64 / (tn + fp) as f64,
    ))
}

/// Field-wise arithmetic mean.
pub fn aggregate_rates(per_concept: &[BinaryRates]) -> Result<BinaryRates> {
    if per_concept.is_empty() {
        return Err(Error::invalid("cannot average an empty list of rates"));
    }
    let n = per_concept.len() as f64;
    let mut sums = [0.0f64; 5];
    for r in per_concept {
        for (s, v) in sums.iter_mut().zip(r.fields()) {
            *s += v;
        }
    }
    Ok(BinaryRates {
        tp_rate: sums[0] / n,
        tn_rate: sums[1] / n,
        fp_rate: sums[2] / n,
        fn_rate: sums[3] / n,
        accuracy: sums[4] / n,
    })
}

/// Rates table with one column per concept plus an `Average` column.
pub fn rates_table_csv(columns: &[(String, BinaryRates)]) -> Result<String> {
    let avg = aggregate_rates(&columns.iter().map(|(_, r)| *r).collect::<Vec<_>>())?;
    let mut s = String::from("metric");
    for (name, _) in columns {
        s.push(',');
        s.push_str(name);
    }
    s.push_str(",Average\n");
    for (row, label) in ["TP", "TN", "FP", "FN", "Acc"].iter().enumerate() {
        s.push_str(label);
        for (_, r) in columns {
            s.push(',');
            s.push_str(&fmt_sig(r.fields()[row]));
        }
        s.push(',');
        s.push_str(&fmt_sig(avg.fields()[row]));
        s.push('\n');
    }
    Ok(s)
}

/// F1 of the positive class; 0 when there are no true positives.
pub fn f1_score(truth: &[bool], predicted: &[bool]) -> f64 {
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&t, &p) in truth.iter().zip(predicted) {
        match (t, p) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fneg += 1,
            _ => {}
        }
    }
    if tp == 0 {
        return 0.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fneg) as f64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub concepts: Vec<String>,
    /// `counts[truth][predicted]`.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("truth");
        for c in &self.concepts {
            s.push(',');
            s.push_str(c);
        }
        s.push('\n');
        for (c, row) in self.concepts.iter().zip(&self.counts) {
            s.push_str(c);
            for v in row {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Confusion among the models' concepts. Each test item must carry exactly
/// one label, which must belong to one of the models; the prediction is the
/// highest-scoring model, ties to the first.
pub fn confusion(models: &[LinearModel], test: &[LabeledFeature]) -> Result<ConfusionMatrix> {
    if models.is_empty() {
        return Err(Error::invalid("confusion matrix needs at least one model"));
    }
    let concepts: Vec<String> = models.iter().map(|m| m.concept.clone()).collect();
    let mut counts = vec![vec![0u64; concepts.len()]; concepts.len()];
    for item in test {
        if item.labels.len() != 1 {
            return Err(Error::Record {
                id: item.id.to_string(),
                message: format!("expected a single label, found {}", item.labels.len()),
            });
        }
        let label = item.labels.iter().next().expect("one label");
        let truth = concepts
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Error::UnknownConcept(label.clone()))?;
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, m) in models.iter().enumerate() {
            let s = m.score(&item.features)?;
            if s > best_score {
                best = i;
                best_score = s;
            }
        }
        counts[truth][best] += 1;
    }
    Ok(ConfusionMatrix { concepts, counts })
}
