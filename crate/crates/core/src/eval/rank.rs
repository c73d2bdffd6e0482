use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Metric;
use crate::{Error, Result};

/// How tied scores share points within a `(dataset, metric)` cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// Tied methods share the mean of the points they span; each cell sums
    /// to `M (M + 1) / 2`.
    #[default]
    Average,
    /// Tied methods all get the lowest point they span (competition
    /// ranking from the bottom).
    Min,
}

/// Mean metric values indexed by `(dataset, method, metric)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultGrid {
    pub datasets: Vec<String>,
    pub methods: Vec<String>,
    pub metrics: Vec<Metric>,
    values: HashMap<(usize, usize, Metric), f64>,
}

impl ResultGrid {
    pub fn new(datasets: Vec<String>, methods: Vec<String>, metrics: Vec<Metric>) -> Self {
        ResultGrid {
            datasets,
            methods,
            metrics,
            values: HashMap::new(),
        }
    }

    pub fn set(&mut self, dataset: &str, method: &str, metric: Metric, value: f64) -> Result<()> {
        let d = position(&self.datasets, dataset, "dataset")?;
        let m = position(&self.methods, method, "method")?;
        if !self.metrics.contains(&metric) {
            return Err(Error::Config(format!("metric {metric} not in grid")));
        }
        self.values.insert((d, m, metric), value);
        Ok(())
    }

    pub fn get(&self, dataset: &str, method: &str, metric: Metric) -> Option<f64> {
        let d = self.datasets.iter().position(|x| x == dataset)?;
        let m = self.methods.iter().position(|x| x == method)?;
        self.values.get(&(d, m, metric)).copied()
    }
}

fn position(names: &[String], name: &str, what: &str) -> Result<usize> {
    names
        .iter()
        .position(|x| x == name)
        .ok_or_else(|| Error::Config(format!("unknown {what} {name:?}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellPoints {
    pub dataset: String,
    pub metric: Metric,
    /// Points per method, in method order.
    pub points: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricAverage {
    pub metric: Metric,
    pub points: Vec<f64>,
}

/// Points per method (best `M`, worst 1), averaged over datasets per metric
/// and then over metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub tie_policy: TiePolicy,
    pub methods: Vec<String>,
    pub cells: Vec<CellPoints>,
    pub metric_averages: Vec<MetricAverage>,
    pub overall: Vec<f64>,
}

impl RankTable {
    pub fn method_index(&self, method: &str) -> Option<usize> {
        self.methods.iter().position(|m| m == method)
    }

    pub fn metric_average(&self, metric: Metric, method: &str) -> Option<f64> {
        let m = self.method_index(method)?;
        self.metric_averages
            .iter()
            .find(|a| a.metric == metric)
            .map(|a| a.points[m])
    }

    pub fn overall(&self, method: &str) -> Option<f64> {
        self.method_index(method).map(|m| self.overall[m])
    }
}

fn cell_points(scores: &[f64], policy: TiePolicy) -> Vec<f64> {
    scores
        .iter()
        .map(|&s| {
            let below = scores.iter().filter(|&&o| o < s).count();
            let equal = scores.iter().filter(|&&o| o == s).count();
            match policy {
                TiePolicy::Min => 1.0 + below as f64,
                TiePolicy::Average => 1.0 + below as f64 + (equal - 1) as f64 / 2.0,
            }
        })
        .collect()
}

pub fn average_rank(grid: &ResultGrid, policy: TiePolicy) -> Result<RankTable> {
    if grid.datasets.is_empty() || grid.methods.is_empty() || grid.metrics.is_empty() {
        return Err(Error::IncompleteGrid("grid has an empty axis".into()));
    }
    let n_methods = grid.methods.len();
    let mut cells = Vec::new();
    let mut metric_averages = Vec::new();
    for &metric in &grid.metrics {
        let mut sum = vec![0.0; n_methods];
        for (d, dataset) in grid.datasets.iter().enumerate() {
            let mut scores = Vec::with_capacity(n_methods);
            for (m, method) in grid.methods.iter().enumerate() {
                match grid.values.get(&(d, m, metric)) {
                    Some(v) if v.is_finite() => scores.push(*v),
                    _ => {
                        return Err(Error::IncompleteGrid(format!(
                            "missing {metric} for {method} on {dataset}"
                        )))
                    }
                }
            }
            let points = cell_points(&scores, policy);
            for (s, p) in sum.iter_mut().zip(&points) {
                *s += p;
            }
            cells.push(CellPoints {
                dataset: dataset.clone(),
                metric,
                points,
            });
        }
        let n = grid.datasets.len() as f64;
        metric_averages.push(MetricAverage {
            metric,
            points: sum.into_iter().map(|s| s / n).collect(),
        });
    }
    let overall = (0..n_methods)
        .map(|m| metric_averages.iter().map(|a| a.points[m]).sum::<f64>() / metric_averages.len() as f64)
        .collect();
    Ok(RankTable {
        tie_policy: policy,
        methods: grid.methods.clone(),
        cells,
        metric_averages,
        overall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(scores: &[f64]) -> ResultGrid {
        let methods: Vec<String> = (0..scores.len()).map(|i| format!("m{i}")).collect();
        let mut g = ResultGrid::new(vec!["d".into()], methods.clone(), vec![Metric::F1]);
        for (m, s) in methods.iter().zip(scores) {
            g.set("d", m, Metric::F1, *s).unwrap();
        }
        g
    }

    #[test]
    fn simple_ranking() {
        let t = average_rank(&grid(&[0.9, 0.5, 0.7]), TiePolicy::Average).unwrap();
        assert_eq!(t.cells[0].points, vec![3.0, 1.0, 2.0]);
        assert_eq!(t.overall, vec![3.0, 1.0, 2.0]);
    }

    #[test]
    fn ties() {
        let t = average_rank(&grid(&[0.5, 0.5]), TiePolicy::Average).unwrap();
        assert_eq!(t.cells[0].points, vec![1.5, 1.5]);
        let t = average_rank(&grid(&[0.2, 0.8, 0.8, 0.1]), TiePolicy::Min).unwrap();
        assert_eq!(t.cells[0].points, vec![2.0, 3.0, 3.0, 1.0]);
        let t = average_rank(&grid(&[0.2, 0.8, 0.8, 0.1]), TiePolicy::Average).unwrap();
        assert_eq!(t.cells[0].points, vec![2.0, 3.5, 3.5, 1.0]);
    }

    #[test]
    fn incomplete() {
        let mut g = ResultGrid::new(vec!["d".into()], vec!["a".into(), "b".into()], vec![Metric::F1]);
        g.set("d", "a", Metric::F1, 0.3).unwrap();
        assert!(matches!(average_rank(&g, TiePolicy::Average), Err(Error::IncompleteGrid(_))));
        g.set("d", "b", Metric::F1, f64::NAN).unwrap();
        assert!(average_rank(&g, TiePolicy::Average).is_err());
        assert!(g.set("d", "zzz", Metric::F1, 0.1).is_err());
    }

    #[test]
    fn averages_over_datasets_and_metrics() {
        let mut g = ResultGrid::new(
            vec!["d1".into(), "d2".into()],
            vec!["a".into(), "b".into()],
            vec![Metric::Recall, Metric::F1],
        );
        for (d, m, metric, v) in [
            ("d1", "a", Metric::Recall, 0.9),
            ("d1", "b", Metric::Recall, 0.1),
            ("d2", "a", Metric::Recall, 0.1),
            ("d2", "b", Metric::Recall, 0.9),
            ("d1", "a", Metric::F1, 0.9),
            ("d1", "b", Metric::F1, 0.1),
            ("d2", "a", Metric::F1, 0.9),
            ("d2", "b", Metric::F1, 0.1),
        ] {
            g.set(d, m, metric, v).unwrap();
        }
        let t = average_rank(&g, TiePolicy::Average).unwrap();
        assert_eq!(t.metric_average(Metric::Recall, "a"), Some(1.5));
        assert_eq!(t.metric_average(Metric::F1, "a"), Some(2.0));
        assert_eq!(t.overall("a"), Some(1.75));
        assert_eq!(t.overall("b"), Some(1.25));
    }

    proptest! {
        #[test]
        fn average_points_sum(scores in proptest::collection::vec(0u8..5, 1..9)) {
            let scores: Vec<f64> = scores.into_iter().map(|s| s as f64 / 4.0).collect();
            let m = scores.len() as f64;
            let t = average_rank(&grid(&scores), TiePolicy::Average).unwrap();
            let sum: f64 = t.cells[0].points.iter().sum();
            prop_assert!((sum - m * (m + 1.0) / 2.0).abs() < 1e-12);
            for p in &t.cells[0].points {
                prop_assert!(*p >= 1.0 && *p <= m);
            }
        }
    }
}
