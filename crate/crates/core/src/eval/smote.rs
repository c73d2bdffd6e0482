use ndarray::{Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::{Class, Dataset};
use crate::{seeded_rng, Error, Result};

/// Parents and interpolation weight of one SMOTE sample:
/// `s = x[source] + u (x[neighbor] - x[source])`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoteProvenance {
    pub source_row: usize,
    pub neighbor_row: usize,
    pub u: f64,
}

#[derive(Clone, Debug)]
pub struct SmoteOutput {
    pub dataset: Dataset,
    pub provenance: Vec<SmoteProvenance>,
}

/// Classic SMOTE: for each minority row, `amount_per_minority` points on the
/// segment to one of its `k` nearest minority neighbours (Euclidean, ties to
/// the lower row index). Synthetic rows are appended after the originals.
pub fn smote_oversample(dataset: &Dataset, k: usize, amount_per_minority: usize, seed: u64) -> Result<SmoteOutput> {
    if k == 0 {
        return Err(Error::Config("SMOTE k must be positive".into()));
    }
    let minority = dataset.indices_of(Class::Minority);
    if minority.len() <= k {
        return Err(Error::TooFewMinority {
            k,
            found: minority.len(),
        });
    }
    if amount_per_minority == 0 {
        return Ok(SmoteOutput {
            dataset: dataset.clone(),
            provenance: Vec::new(),
        });
    }
    let x = dataset.features.select(Axis(0), &minority);
    let mut rng = seeded_rng(seed, 4);
    let mut samples = Array2::zeros((minority.len() * amount_per_minority, dataset.dim()));
    let mut provenance = Vec::with_capacity(samples.nrows());
    let mut out_rows = samples.rows_mut().into_iter();
    for i in 0..x.nrows() {
        let mut dists: Vec<(f64, usize)> = (0..x.nrows())
            .filter(|&j| j != i)
            .map(|j| {
                let d: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, j)
            })
            .collect();
        dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let neighbours = &dists[..k];
        for _ in 0..amount_per_minority {
            let j = neighbours[rng.random_range(0..k)].1;
            let u: f64 = rng.random();
            let mut row = out_rows.next().expect("sized above");
            row.assign(&(&x.row(i) + &((&x.row(j) - &x.row(i)) * u)));
            provenance.push(SmoteProvenance {
                source_row: minority[i],
                neighbor_row: minority[j],
                u,
            });
        }
    }
    Ok(SmoteOutput {
        dataset: dataset.appended(samples.view(), Class::Minority)?,
        provenance,
    })
}
