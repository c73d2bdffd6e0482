//! Minority oversampling through trained ASSOM subspaces.
//!
//! An ASSOM with `N` modules is trained on the mean-centred minority rows.
//! Every minority row is then reconstructed through each module's subspace,
//! producing `N` synthetic rows that lie in the module's affine subspace
//! through the minority mean.

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::datasets::{Class, Dataset, NormalizationParams};
use crate::network::{init_network, AssomNetwork, TrainingConfig, TrainingHistory};
use crate::{derive_seed, Error, Execution, Result};

/// `max(1, round(n_majority / n_minority) - 1)`, rounding half away from zero.
pub fn compute_module_count(n_majority: usize, n_minority: usize) -> Result<usize> {
    if n_minority == 0 {
        return Err(Error::EmptyClass("minority".into()));
    }
    if n_majority < n_minority {
        return Err(Error::NotMinority {
            positive: n_minority,
            negative: n_majority,
        });
    }
    let ratio = n_majority as f64 / n_minority as f64;
    Ok((ratio.round() as usize).saturating_sub(1).max(1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    KeepAll,
    /// Keep the `k` lowest-error reconstructions of each source row.
    TopK(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OversampleConfig {
    /// Replaces the imbalance-ratio formula for `N`.
    pub module_count: Option<usize>,
    pub subspace_dim: usize,
    pub selection: SelectionMode,
    /// Trim (or cycle) the synthetic pool to exactly equalize class counts.
    pub balance_trim: bool,
    /// Z-score with parameters fit on the input dataset before training and
    /// map synthetic rows back afterwards.
    pub standardize: bool,
    /// Supplied separately (e.g. the `[training]` table of an experiment
    /// config), so it is not part of this block's serialized form.
    #[serde(skip)]
    pub training: TrainingConfig,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for OversampleConfig {
    fn default() -> Self {
        OversampleConfig {
            module_count: None,
            subspace_dim: 2,
            selection: SelectionMode::KeepAll,
            balance_trim: true,
            standardize: true,
            training: TrainingConfig::default(),
            execution: Execution::default(),
        }
    }
}

impl OversampleConfig {
    pub fn validate(&self) -> Result<()> {
        self.training.validate()?;
        if self.subspace_dim == 0 {
            return Err(Error::Config("subspace_dim must be positive".into()));
        }
        if self.module_count == Some(0) {
            return Err(Error::Config("module_count must be positive".into()));
        }
        if self.selection == SelectionMode::TopK(0) {
            return Err(Error::Config("top_k needs k >= 1".into()));
        }
        Ok(())
    }
}

/// Where a synthetic row came from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Row index of the source sample in the minority rows passed to `fit`
    /// (for [`oversample`], the row index in the input dataset).
    pub source_row: usize,
    pub module: usize,
    /// `|(I - P) (x - mu)|` of the source row.
    pub reconstruction_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticBatch {
    pub samples: Array2<f64>,
    pub provenance: Vec<Provenance>,
}

impl SyntheticBatch {
    pub fn len(&self) -> usize {
        self.provenance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.provenance.is_empty()
    }

    /// Sidecar CSV with columns `source_row,module,reconstruction_error`.
    pub fn write_provenance_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["source_row", "module", "reconstruction_error"])?;
        for p in &self.provenance {
            w.write_record([
                p.source_row.to_string(),
                p.module.to_string(),
                format!("{:?}", p.reconstruction_error),
            ])?;
        }
        w.flush()
    }

    pub fn write_provenance(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_provenance_csv(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }
}

/// One reconstruction of a source row through one module.
#[derive(Clone, Debug, PartialEq)]
pub struct Synthetic {
    pub sample: Array1<f64>,
    pub module: usize,
    pub reconstruction_error: f64,
}

/// A trained sampler: the minority mean and the ASSOM over centred data.
#[derive(Clone, Debug, PartialEq)]
pub struct FittedSampler {
    pub mean: Array1<f64>,
    pub network: AssomNetwork,
    pub history: TrainingHistory,
}

impl FittedSampler {
    pub fn module_count(&self) -> usize {
        self.network.module_count()
    }

    /// `s_n = P_n (x - mu) + mu` for every module `n`, in module order.
    pub fn generate_for_sample(&self, x: ArrayView1<f64>) -> Result<Vec<Synthetic>> {
        if x.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                actual: x.len(),
            });
        }
        let centred = &x - &self.mean;
        self.network
            .modules()
            .iter()
            .map(|m| {
                let xhat = m.basis.project(centred.view())?;
                let r = &centred - &xhat;
                Ok(Synthetic {
                    sample: xhat + &self.mean,
                    module: m.index,
                    reconstruction_error: r.dot(&r).sqrt(),
                })
            })
            .collect()
    }
}

/// Trains a sampler on `minority` rows with `module_count` modules.
pub fn fit(minority: ArrayView2<f64>, module_count: usize, config: &OversampleConfig) -> Result<FittedSampler> {
    config.validate()?;
    let (rows, dim) = minority.dim();
    let h = config.subspace_dim;
    if h > dim {
        return Err(Error::Config(format!("subspace_dim {h} exceeds feature dimension {dim}")));
    }
    if rows < h + 1 {
        return Err(Error::InsufficientData(format!(
            "{rows} minority rows; at least subspace_dim + 1 = {} are needed",
            h + 1
        )));
    }
    let mean = minority.mean_axis(Axis(0)).expect("nonempty");
    let centred = &minority - &mean;
    let spread = centred.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if spread < 1e-12 {
        return Err(Error::InsufficientVariance);
    }
    let init_seed = derive_seed(config.training.seed, &[0x1417]);
    let mut network = init_network(dim, h, module_count, init_seed)?;
    let history = network.train(centred.view(), &config.training)?;
    Ok(FittedSampler {
        mean,
        network,
        history,
    })
}

/// Result of [`oversample`].
#[derive(Clone, Debug)]
pub struct Oversampled {
    /// Original rows (verbatim, original order) followed by synthetic rows.
    pub dataset: Dataset,
    pub batch: SyntheticBatch,
    pub module_count: usize,
    pub sampler: FittedSampler,
}

/// Runs the full algorithm on a binary dataset.
pub fn oversample(dataset: &Dataset, config: &OversampleConfig) -> Result<Oversampled> {
    config.validate()?;
    let n_min = dataset.count(Class::Minority);
    let n_maj = dataset.count(Class::Majority);
    let formula = compute_module_count(n_maj, n_min)?;
    let module_count = config.module_count.unwrap_or(formula);
    if let SelectionMode::TopK(k) = config.selection {
        if k > module_count {
            return Err(Error::Config(format!("top_k k={k} exceeds module count N={module_count}")));
        }
    }

    let minority_idx = dataset.indices_of(Class::Minority);
    let params = if config.standardize {
        Some(NormalizationParams::fit(dataset.features.view())?)
    } else {
        None
    };
    let raw_minority = dataset.features.select(Axis(0), &minority_idx);
    let minority = match &params {
        Some(p) => p.apply(raw_minority.view()),
        None => raw_minority,
    };

    let sampler = fit(minority.view(), module_count, config)?;

    let per_row: Vec<Result<Vec<Synthetic>>> = config.execution.map_range(minority.nrows(), |i| {
        let mut out = sampler.generate_for_sample(minority.row(i))?;
        if let SelectionMode::TopK(k) = config.selection {
            // Stable: equal errors keep module order.
            out.sort_by(|a, b| a.reconstruction_error.total_cmp(&b.reconstruction_error));
            out.truncate(k);
            out.sort_by_key(|s| s.module);
        }
        Ok(out)
    });

    let mut pool = Vec::new();
    for (i, row) in per_row.into_iter().enumerate() {
        for s in row? {
            pool.push((minority_idx[i], s));
        }
    }

    if config.balance_trim {
        let deficit = n_maj - n_min;
        let mut ranked: Vec<usize> = (0..pool.len()).collect();
        ranked.sort_by(|&a, &b| pool[a].1.reconstruction_error.total_cmp(&pool[b].1.reconstruction_error));
        let keep: Vec<usize> = if ranked.is_empty() {
            Vec::new()
        } else {
            ranked.iter().copied().cycle().take(deficit).collect()
        };
        pool = keep.into_iter().map(|i| pool[i].clone()).collect();
    }

    let dim = dataset.dim();
    let mut samples = Array2::zeros((pool.len(), dim));
    for (mut row, (_, s)) in samples.rows_mut().into_iter().zip(&pool) {
        row.assign(&s.sample);
    }
    if let Some(p) = &params {
        samples = p.invert(samples.view());
    }
    let provenance = pool
        .iter()
        .map(|(src, s)| Provenance {
            source_row: *src,
            module: s.module,
            reconstruction_error: s.reconstruction_error,
        })
        .collect();
    let augmented = dataset.appended(samples.view(), Class::Minority)?;
    Ok(Oversampled {
        dataset: augmented,
        batch: SyntheticBatch { samples, provenance },
        module_count,
        sampler,
    })
}
