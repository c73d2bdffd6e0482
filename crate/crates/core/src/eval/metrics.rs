use std::fmt;

use serde::{Deserialize, Serialize};

use crate::datasets::Class;
use crate::{Error, Result};

/// Confusion counts with the minority class as positive.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(y_true: &[Class], y_pred: &[Class]) -> Result<ConfusionCounts> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (t, p) in y_true.iter().zip(y_pred) {
        match (t.is_minority(), p.is_minority()) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Precision,
    Recall,
    GMean,
    F1,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Precision, Metric::Recall, Metric::GMean, Metric::F1];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::GMean => "g_mean",
            Metric::F1 => "f1",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub precision: f64,
    pub recall: f64,
    pub g_mean: f64,
    pub f1: f64,
    pub counts: ConfusionCounts,
}

impl MetricReport {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Precision => self.precision,
            Metric::Recall => self.recall,
            Metric::GMean => self.g_mean,
            Metric::F1 => self.f1,
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall, G-mean and F1. Any ratio with a zero denominator is 0.
pub fn metrics(counts: ConfusionCounts) -> MetricReport {
    let precision = ratio(counts.tp, counts.tp + counts.fp);
    let recall = ratio(counts.tp, counts.tp + counts.fn_);
    let specificity = ratio(counts.tn, counts.fp + counts.tn);
    let g_mean = (recall * specificity).sqrt();
    let f1 = if recall + precision == 0.0 {
        0.0
    } else {
        2.0 * recall * precision / (recall + precision)
    };
    MetricReport {
        precision,
        recall,
        g_mean,
        f1,
        counts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Class::{Majority as N, Minority as P};

    #[test]
    fn hand_counted() {
        let c = confusion(&[P, P, P, N, N], &[P, P, N, P, N]).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 2, fn_: 1, fp: 1, tn: 1 });
        let c = confusion(&[P, N, N], &[P, N, N]).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));
        assert!(confusion(&[P], &[]).is_err());
    }

    #[test]
    fn perfect_classifier() {
        let m = metrics(ConfusionCounts { tp: 4, fp: 0, tn: 9, fn_: 0 });
        assert_eq!((m.precision, m.recall, m.g_mean, m.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn worked_example() {
        let m = metrics(ConfusionCounts { tp: 3, fp: 1, fn_: 1, tn: 5 });
        assert_eq!(m.precision, 0.75);
        assert_eq!(m.recall, 0.75);
        assert!((m.f1 - 0.75).abs() < 1e-15);
        assert!((m.g_mean - (0.75f64 * 5.0 / 6.0).sqrt()).abs() < 1e-15);
        assert!((m.g_mean - 0.790569).abs() < 1e-6);
    }

    #[test]
    fn empty_predictions() {
        let m = metrics(ConfusionCounts { tp: 0, fp: 0, tn: 10, fn_: 3 });
        assert_eq!((m.precision, m.f1, m.recall, m.g_mean), (0.0, 0.0, 0.0, 0.0));
        let m = metrics(ConfusionCounts::default());
        assert_eq!((m.precision, m.recall, m.g_mean, m.f1), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn serde_uses_fn_key() {
        let s = serde_json::to_string(&ConfusionCounts { tp: 1, fp: 2, tn: 3, fn_: 4 }).unwrap();
        assert_eq!(s, r#"{"tp":1,"fp":2,"tn":3,"fn":4}"#);
    }
}
