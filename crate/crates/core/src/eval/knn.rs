use ndarray::{ArrayView1, ArrayView2};

use crate::datasets::{Class, Dataset};
use crate::{Error, Execution, Result};

/// Brute-force k-nearest-neighbour majority vote.
///
/// Distance ties are broken by the lower training row index, so the result
/// depends on training row order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KnnClassifier {
    pub k: usize,
    pub execution: Execution,
}

impl KnnClassifier {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 || k.is_multiple_of(2) {
            return Err(Error::Config(format!("k must be a positive odd number, got {k}")));
        }
        Ok(KnnClassifier {
            k,
            execution: Execution::default(),
        })
    }

    pub fn with_execution(self, execution: Execution) -> Self {
        KnnClassifier { execution, ..self }
    }

    pub fn predict(&self, train: &Dataset, test: ArrayView2<f64>) -> Result<Vec<Class>> {
        if train.is_empty() {
            return Err(Error::InsufficientData("k-NN needs a nonempty training set".into()));
        }
        if test.ncols() != train.dim() {
            return Err(Error::DimensionMismatch {
                expected: train.dim(),
                actual: test.ncols(),
            });
        }
        let k = self.k.min(train.len());
        Ok(self
            .execution
            .map_range(test.nrows(), |i| vote(train, test.row(i), k)))
    }
}

fn vote(train: &Dataset, x: ArrayView1<f64>, k: usize) -> Class {
    // (distance^2, row) kept sorted ascending; k is small.
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for (i, row) in train.features.rows().into_iter().enumerate() {
        let d: f64 = row.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.len() == k && d >= best[k - 1].0 {
            continue;
        }
        let pos = best.partition_point(|&(bd, _)| bd <= d);
        best.insert(pos, (d, i));
        best.truncate(k);
    }
    let minority = best.iter().filter(|&&(_, i)| train.labels[i].is_minority()).count();
    let majority = best.len() - minority;
    match minority.cmp(&majority) {
        std::cmp::Ordering::Greater => Class::Minority,
        std::cmp::Ordering::Less => Class::Majority,
        // Only reachable when k was clipped to an even training size.
        std::cmp::Ordering::Equal => train.labels[best[0].1],
    }
}

/// Convenience wrapper over [`KnnClassifier`].
pub fn knn_classify(train: &Dataset, test: ArrayView2<f64>, k: usize) -> Result<Vec<Class>> {
    KnnClassifier::new(k)?.predict(train, test)
}
