//! Before/after comparison runner.
//!
//! For every dataset, outer repetition (a fresh stratified split) and inner
//! repetition (fresh training-row order and oversampler seeds), each method
//! augments the training split, the k-NN harness is fit on the result, and
//! the untouched test split is scored.
//!
//! Seeds: the split of outer repetition `r` on dataset `d` uses
//! `derive_seed(master, [d, r])`; cell `(d, r, i)` uses
//! `derive_seed(master, [d, r, i])`, from which the ASSOM seed is
//! `derive_seed(cell, [1])` and the SMOTE seed `derive_seed(cell, [2])`.
//! Appending datasets or repetitions leaves existing seeds untouched.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use ndarray::Axis;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::datasets::{
    binarize, load_csv, stratified_split, two_gaussians, Class, CsvOptions, Dataset, LabelColumn,
    NormalizationParams, SplitSpec,
};
use crate::eval::{
    average_rank, confusion, metrics, smote_oversample, KnnClassifier, Metric, MetricReport, RankTable,
    ResultGrid, TiePolicy,
};
use crate::network::TrainingConfig;
use crate::oversampler::{compute_module_count, oversample, OversampleConfig};
use crate::{derive_seed, seeded_rng, Error, Execution, Result, ARTIFACT_VERSION};

pub const PROTOCOL_NOTE: &str = "k-NN harness classifier in place of MLP/SVM; inner repetitions \
reseed training-row order and oversampler seeds instead of classifier restarts";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    None,
    Assom,
    Smote,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Assom => "assom",
            Method::Smote => "smote",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameters of a generated two-Gaussian dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_majority: usize,
    pub n_minority: usize,
    pub dim: usize,
    pub separation: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    /// CSV or KEEL file; relative paths are resolved against the config
    /// file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default)]
    pub positive_labels: Vec<String>,
    #[serde(default = "default_true")]
    pub has_header: bool,
    #[serde(default)]
    pub label_column: LabelColumn,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(skip)]
    pub resolved_path: Option<PathBuf>,
}

fn default_true() -> bool {
    true
}

fn default_delimiter() -> char {
    ','
}

impl DatasetEntry {
    pub fn csv_options(&self) -> CsvOptions {
        CsvOptions {
            has_header: self.has_header,
            label_column: self.label_column.clone(),
            delimiter: self.delimiter,
        }
    }

    pub fn file(&self) -> Option<&Path> {
        self.resolved_path.as_deref().or(self.path.as_deref())
    }

    pub fn load(&self) -> Result<Dataset> {
        match (&self.synthetic, self.file()) {
            (Some(s), None) => {
                let mut d = two_gaussians(s.n_majority, s.n_minority, s.dim, s.separation, s.seed);
                d.name = self.name.clone();
                Ok(d)
            }
            (None, Some(path)) => {
                let table = load_csv(path, &self.csv_options())?;
                binarize(&table, &self.name, &self.positive_labels)
            }
            _ => Err(Error::Config(format!(
                "dataset {:?} needs exactly one of `path` or `synthetic`",
                self.name
            ))),
        }
    }
}

/// Experiment description, read from TOML.
///
/// ```toml
/// seed = 42
/// methods = ["none", "assom", "smote"]
/// outer_repetitions = 5
/// inner_repetitions = 5
///
/// [training]
/// epochs = 100
///
/// [oversample]
/// subspace_dim = 2
///
/// [[datasets]]
/// name = "pima"
/// path = "pima.csv"
/// positive_labels = ["1"]
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub methods: Vec<Method>,
    pub outer_repetitions: usize,
    pub inner_repetitions: usize,
    pub train_fraction: f64,
    pub knn_k: usize,
    pub smote_k: usize,
    pub tie_policy: TiePolicy,
    pub training: TrainingConfig,
    pub oversample: OversampleConfig,
    pub datasets: Vec<DatasetEntry>,
    /// Report directory; not echoed into reports.
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            methods: vec![Method::None, Method::Assom, Method::Smote],
            outer_repetitions: 5,
            inner_repetitions: 5,
            train_fraction: 0.7,
            knn_k: 5,
            smote_k: 5,
            tie_policy: TiePolicy::Average,
            training: TrainingConfig::default(),
            oversample: OversampleConfig::default(),
            datasets: Vec::new(),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses a config file, resolving dataset and output paths against its
    /// directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for d in &mut cfg.datasets {
            d.resolved_path = d.path.as_ref().map(|p| base.join(p));
        }
        if let Some(out) = &cfg.output_dir {
            cfg.output_dir = Some(base.join(out));
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.training.validate()?;
        self.oversample.validate()?;
        if self.outer_repetitions == 0 || self.inner_repetitions == 0 {
            return bad("repetitions must be >= 1".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction {} not in (0, 1)", self.train_fraction));
        }
        KnnClassifier::new(self.knn_k)?;
        if self.smote_k == 0 {
            return bad("smote_k must be positive".into());
        }
        for d in &self.datasets {
            match (&d.synthetic, d.file()) {
                (Some(_), None) => {}
                (None, Some(p)) => {
                    if !p.is_file() {
                        return bad(format!("dataset {:?}: file not found: {}", d.name, p.display()));
                    }
                    if d.positive_labels.is_empty() {
                        return bad(format!("dataset {:?}: positive_labels must be set", d.name));
                    }
                }
                _ => return bad(format!("dataset {:?} needs exactly one of `path` or `synthetic`", d.name)),
            }
        }
        Ok(())
    }

    pub fn load_datasets(&self) -> Result<Vec<Dataset>> {
        self.datasets.iter().map(DatasetEntry::load).collect()
    }

    fn oversample_config(&self, seed: u64, execution: Execution) -> OversampleConfig {
        OversampleConfig {
            standardize: false,
            training: TrainingConfig {
                seed,
                ..self.training.clone()
            },
            execution,
            ..self.oversample.clone()
        }
    }
}

/// Which fitting step consumed which original rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FitAudit {
    pub dataset: usize,
    pub outer: usize,
    pub inner: usize,
    pub operation: &'static str,
    /// Row indices into the loaded dataset.
    pub rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub outer: usize,
    pub inner: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<MetricReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub precision: f64,
    pub recall: f64,
    pub g_mean: f64,
    pub f1: f64,
}

impl MetricSummary {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Precision => self.precision,
            Metric::Recall => self.recall,
            Metric::GMean => self.g_mean,
            Metric::F1 => self.f1,
        }
    }

    fn from_fn(f: impl Fn(Metric) -> f64) -> Self {
        MetricSummary {
            precision: f(Metric::Precision),
            recall: f(Metric::Recall),
            g_mean: f(Metric::GMean),
            f1: f(Metric::F1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodResults {
    pub repetitions: Vec<RepetitionResult>,
    /// Number of successful repetitions entering the aggregates.
    pub n: usize,
    pub mean: MetricSummary,
    /// Sample standard deviation (0 for fewer than two repetitions).
    pub std: MetricSummary,
}

impl MethodResults {
    fn aggregate(repetitions: Vec<RepetitionResult>) -> Self {
        let ok: Vec<&MetricReport> = repetitions.iter().filter_map(|r| r.report.as_ref()).collect();
        let n = ok.len();
        let mean = MetricSummary::from_fn(|m| {
            if n == 0 {
                f64::NAN
            } else {
                ok.iter().map(|r| r.get(m)).sum::<f64>() / n as f64
            }
        });
        let std = MetricSummary::from_fn(|m| {
            if n < 2 {
                0.0
            } else {
                let mu = mean.get(m);
                (ok.iter().map(|r| (r.get(m) - mu).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            }
        });
        MethodResults {
            repetitions,
            n,
            mean,
            std,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub artifact_version: String,
    pub master_seed: u64,
    pub protocol_note: String,
    pub config: ExperimentConfig,
    /// dataset -> method -> results.
    pub results: IndexMap<String, IndexMap<String, MethodResults>>,
    pub rank_table: Option<RankTable>,
    pub failures: Vec<String>,
}

impl RunReport {
    pub fn method(&self, dataset: &str, method: Method) -> Option<&MethodResults> {
        self.results.get(dataset)?.get(method.name())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per dataset x method x repetition.
    pub fn write_repetitions_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "dataset", "method", "outer", "inner", "tp", "fp", "tn", "fn", "precision", "recall", "g_mean", "f1",
            "error",
        ])?;
        for (dataset, methods) in &self.results {
            for (method, res) in methods {
                for r in &res.repetitions {
                    let mut rec = vec![dataset.clone(), method.clone(), r.outer.to_string(), r.inner.to_string()];
                    match &r.report {
                        Some(m) => {
                            let c = m.counts;
                            rec.extend([c.tp, c.fp, c.tn, c.fn_].map(|v| v.to_string()));
                            rec.extend([m.precision, m.recall, m.g_mean, m.f1].map(|v| format!("{v:?}")));
                            rec.push(String::new());
                        }
                        None => {
                            rec.extend(std::iter::repeat_n(String::new(), 8));
                            rec.push(r.error.clone().unwrap_or_default());
                        }
                    }
                    w.write_record(&rec)?;
                }
            }
        }
        w.flush()
    }

    /// One row per dataset x method x metric.
    pub fn write_summary_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["dataset", "method", "metric", "mean", "std", "n", "rank_points"])?;
        for (dataset, methods) in &self.results {
            for (mi, (method, res)) in methods.iter().enumerate() {
                for metric in Metric::ALL {
                    let points = self
                        .rank_table
                        .as_ref()
                        .and_then(|t| t.cells.iter().find(|c| &c.dataset == dataset && c.metric == metric))
                        .map(|c| format!("{:?}", c.points[mi]))
                        .unwrap_or_default();
                    w.write_record([
                        dataset.clone(),
                        method.clone(),
                        metric.to_string(),
                        format!("{:?}", res.mean.get(metric)),
                        format!("{:?}", res.std.get(metric)),
                        res.n.to_string(),
                        points,
                    ])?;
                }
            }
        }
        w.flush()
    }

    /// Average points per method and metric, plus the overall average.
    pub fn write_ranks_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["method", "metric", "average_points"])?;
        if let Some(t) = &self.rank_table {
            for (m, method) in t.methods.iter().enumerate() {
                for avg in &t.metric_averages {
                    w.write_record([method.clone(), avg.metric.to_string(), format!("{:?}", avg.points[m])])?;
                }
                w.write_record([method.clone(), "overall".into(), format!("{:?}", t.overall[m])])?;
            }
        }
        w.flush()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    #[default]
    Both,
}

/// Writes `report.json` and/or `repetitions.csv`, `summary.csv`,
/// `ranks.csv` into `dir`. Returns the written paths.
pub fn write_report(report: &RunReport, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    if matches!(format, OutputFormat::Json | OutputFormat::Both) {
        let p = dir.join("report.json");
        std::fs::write(&p, report.to_json() + "\n").map_err(|e| Error::io(&p, e))?;
        written.push(p);
    }
    if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
        type Writer = fn(&RunReport, std::io::BufWriter<std::fs::File>) -> std::io::Result<()>;
        let files: [(&str, Writer); 3] = [
            ("repetitions.csv", |r, w| r.write_repetitions_csv(w)),
            ("summary.csv", |r, w| r.write_summary_csv(w)),
            ("ranks.csv", |r, w| r.write_ranks_csv(w)),
        ];
        for (name, f) in files {
            let p = dir.join(name);
            let file = std::fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
            f(report, std::io::BufWriter::new(file)).map_err(|e| Error::io(&p, e))?;
            written.push(p);
        }
    }
    Ok(written)
}

/// Report plus the in-memory audit of every fitting step.
#[derive(Clone, Debug)]
pub struct CompareOutcome {
    pub report: RunReport,
    pub audit: Vec<FitAudit>,
}

impl CompareOutcome {
    /// `Err(IncompleteGrid)` if any cell failed; the report is still
    /// available through `self`.
    pub fn check_complete(&self) -> Result<()> {
        if self.report.failures.is_empty() {
            Ok(())
        } else {
            Err(Error::IncompleteGrid(self.report.failures.join("; ")))
        }
    }
}

struct CellOutput {
    reports: Vec<std::result::Result<MetricReport, String>>,
    audit: Vec<FitAudit>,
}

fn run_cell(
    config: &ExperimentConfig,
    dataset: &Dataset,
    (d, outer, inner): (usize, usize, usize),
    execution: Execution,
) -> Result<CellOutput> {
    let split_seed = derive_seed(config.seed, &[d as u64, outer as u64]);
    let cell_seed = derive_seed(config.seed, &[d as u64, outer as u64, inner as u64]);
    let split = stratified_split(
        dataset,
        &SplitSpec {
            train_fraction: config.train_fraction,
            seed: split_seed,
        },
    )?;

    // Inner repetitions permute the training rows, which changes k-NN
    // distance tie-breaks and the ASSOM/SMOTE inputs.
    let mut order: Vec<usize> = (0..split.train.len()).collect();
    order.shuffle(&mut seeded_rng(cell_seed, 5));
    let train_rows: Vec<usize> = order.iter().map(|&i| split.train_rows[i]).collect();
    let train = split.train.subset(&order);

    let audit_entry = |operation, rows: Vec<usize>| FitAudit {
        dataset: d,
        outer,
        inner,
        operation,
        rows,
        test_rows: split.test_rows.clone(),
    };
    let mut audit = vec![audit_entry("zscore_fit", train_rows.clone())];
    let params = NormalizationParams::fit(train.features.view())?;
    let train_z = train.with_features(params.apply(train.features.view()));
    let test_z = params.apply(split.test.features.view());
    let minority_rows: Vec<usize> = train_rows
        .iter()
        .zip(&train.labels)
        .filter(|(_, c)| c.is_minority())
        .map(|(&r, _)| r)
        .collect();
    let knn = KnnClassifier::new(config.knn_k)?.with_execution(execution);

    let mut reports = Vec::with_capacity(config.methods.len());
    for method in &config.methods {
        let augmented = match method {
            Method::None => Ok(train_z.clone()),
            Method::Assom => {
                audit.push(audit_entry("assom_fit", minority_rows.clone()));
                let cfg = config.oversample_config(derive_seed(cell_seed, &[1]), execution);
                oversample(&train_z, &cfg).map(|o| o.dataset)
            }
            Method::Smote => {
                audit.push(audit_entry("smote_fit", minority_rows.clone()));
                compute_module_count(train_z.count(Class::Majority), train_z.count(Class::Minority)).and_then(
                    |amount| {
                        smote_oversample(&train_z, config.smote_k, amount, derive_seed(cell_seed, &[2]))
                            .map(|o| o.dataset)
                    },
                )
            }
        };
        let report = augmented
            .and_then(|train| knn.predict(&train, test_z.view()))
            .and_then(|pred| confusion(&split.test.labels, &pred))
            .map(metrics)
            .map_err(|e| e.to_string());
        reports.push(report);
    }
    Ok(CellOutput { reports, audit })
}

/// Runs every (dataset, outer, inner) cell and assembles the report.
///
/// Cells run through `execution`; assembly is ordered by (dataset, method,
/// repetition), so the report is identical for any execution mode or pool
/// size. Cell failures are recorded in the report rather than aborting.
pub fn run_compare(config: &ExperimentConfig, datasets: &[Dataset], execution: Execution) -> Result<CompareOutcome> {
    config.validate()?;
    if datasets.len() != config.datasets.len() && !config.datasets.is_empty() {
        return Err(Error::Config("dataset list does not match config".into()));
    }
    let (outer_n, inner_n) = (config.outer_repetitions, config.inner_repetitions);
    let per_dataset = outer_n * inner_n;
    let n_cells = datasets.len() * per_dataset;
    let cells = execution.map_range(n_cells, |c| {
        let d = c / per_dataset;
        let outer = (c % per_dataset) / inner_n;
        let inner = c % inner_n;
        run_cell(config, &datasets[d], (d, outer, inner), execution)
    });

    let mut results = IndexMap::new();
    let mut failures = Vec::new();
    let mut audit = Vec::new();
    let mut per_method: Vec<Vec<Vec<RepetitionResult>>> = vec![vec![Vec::new(); config.methods.len()]; datasets.len()];
    for (c, cell) in cells.into_iter().enumerate() {
        let d = c / per_dataset;
        let outer = (c % per_dataset) / inner_n;
        let inner = c % inner_n;
        let outcomes: Vec<std::result::Result<MetricReport, String>> = match cell {
            Ok(out) => {
                audit.extend(out.audit);
                out.reports
            }
            Err(e) => vec![Err(e.to_string()); config.methods.len()],
        };
        for (m, outcome) in outcomes.into_iter().enumerate() {
            let (report, error) = match outcome {
                Ok(r) => (Some(r), None),
                Err(e) => {
                    failures.push(format!(
                        "{} / {} / outer {outer} inner {inner}: {e}",
                        datasets[d].name, config.methods[m]
                    ));
                    (None, Some(e))
                }
            };
            per_method[d][m].push(RepetitionResult {
                outer,
                inner,
                report,
                error,
            });
        }
    }
    for (d, methods) in per_method.into_iter().enumerate() {
        let entry: IndexMap<String, MethodResults> = methods
            .into_iter()
            .enumerate()
            .map(|(m, reps)| (config.methods[m].name().to_string(), MethodResults::aggregate(reps)))
            .collect();
        results.insert(datasets[d].name.clone(), entry);
    }

    let rank_table = if failures.is_empty() && !datasets.is_empty() {
        let mut grid = ResultGrid::new(
            datasets.iter().map(|d| d.name.clone()).collect(),
            config.methods.iter().map(|m| m.name().to_string()).collect(),
            Metric::ALL.to_vec(),
        );
        for (dataset, methods) in &results {
            for (method, res) in methods {
                for metric in Metric::ALL {
                    grid.set(dataset, method, metric, res.mean.get(metric))?;
                }
            }
        }
        Some(average_rank(&grid, config.tie_policy)?)
    } else {
        None
    };

    let report = RunReport {
        artifact_version: ARTIFACT_VERSION.to_string(),
        master_seed: config.seed,
        protocol_note: PROTOCOL_NOTE.to_string(),
        config: config.clone(),
        results,
        rank_table,
        failures,
    };
    Ok(CompareOutcome { report, audit })
}

/// Reads a two-column predictions CSV (`y_true,y_pred` by header name, or
/// the first two columns) and scores it with `positive` as the minority.
pub fn metrics_from_predictions(path: &Path, positive: &[String]) -> Result<MetricReport> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::format(path.display().to_string(), e))?
        .clone();
    let col = |name: &str, fallback: usize| headers.iter().position(|h| h == name).unwrap_or(fallback);
    let (ti, pi) = (col("y_true", 0), col("y_pred", 1));
    let to_class = |s: &str| {
        if positive.iter().any(|p| p == s) {
            Class::Minority
        } else {
            Class::Majority
        }
    };
    let mut y_true = Vec::new();
    let mut y_pred = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(path.display().to_string(), e))?;
        if rec.len() <= ti.max(pi) {
            return Err(Error::RaggedRows {
                path: path.to_path_buf(),
                row: r + 1,
                expected: headers.len(),
                found: rec.len(),
            });
        }
        y_true.push(to_class(&rec[ti]));
        y_pred.push(to_class(&rec[pi]));
    }
    Ok(metrics(confusion(&y_true, &y_pred)?))
}

/// Minority rows of `dataset`, as used by the `train` command.
pub fn minority_rows(dataset: &Dataset) -> ndarray::Array2<f64> {
    dataset.features.select(Axis(0), &dataset.indices_of(Class::Minority))
}
