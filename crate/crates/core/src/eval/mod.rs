//! Evaluation harness: metrics, the k-NN classifier, the SMOTE baseline and
//! average-rank tables.

mod knn;
mod metrics;
mod rank;
mod smote;

pub use knn::{knn_classify, KnnClassifier};
pub use metrics::{confusion, metrics, ConfusionCounts, Metric, MetricReport};
pub use rank::{average_rank, RankTable, ResultGrid, TiePolicy};
pub use smote::{smote_oversample, SmoteOutput, SmoteProvenance};
