//! Command implementations behind the `assom` binary.

use std::io::Write;
use std::path::{Path, PathBuf};

use assom::datasets::{load_csv, binarize, Class, CsvOptions, Dataset, LabelColumn, NormalizationParams};
use assom::experiment::{metrics_from_predictions, run_compare, write_report, ExperimentConfig, OutputFormat, RunReport};
use assom::oversampler::{compute_module_count, fit, oversample, OversampleConfig};
use assom::{Error, ErrorKind, Execution, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "assom", version, about = "ASSOM training, oversampling and imbalance experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train an ASSOM on the minority class of a configured dataset.
    Train(TrainArgs),
    /// Oversample the minority class of a CSV file.
    Oversample(OversampleArgs),
    /// Run the before/after comparison described by a config file.
    Compare(CompareArgs),
    /// Score a predictions CSV (`y_true,y_pred`).
    Metrics(MetricsArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    #[default]
    Both,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
            Format::Both => OutputFormat::Both,
        }
    }
}

#[derive(Args, Clone, Debug, Default)]
pub struct CommonArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the seed from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    pub format: Format,
}

impl CommonArgs {
    fn execution(&self) -> Result<Execution> {
        match self.jobs {
            Some(0) => Err(Error::Config("--jobs must be at least 1".into())),
            Some(1) => Ok(Execution::Sequential),
            _ => Ok(Execution::default()),
        }
    }

    fn load_config(&self) -> Result<Option<ExperimentConfig>> {
        self.config.as_deref().map(ExperimentConfig::from_file).transpose()
    }

    fn require_config(&self) -> Result<ExperimentConfig> {
        self.load_config()?
            .ok_or_else(|| Error::Config("--config is required".into()))
    }
}

#[derive(Args, Clone, Debug, Default)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Dataset name from the config (default: the first one).
    #[arg(long)]
    pub dataset: Option<String>,
    /// Network file (default: `<out>/network.json`).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Default)]
pub struct OversampleArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Provenance sidecar (default: `<output stem>.provenance.csv`).
    #[arg(long)]
    pub provenance: Option<PathBuf>,
    /// Label(s) forming the minority class.
    #[arg(long = "positive", required = true)]
    pub positive: Vec<String>,
    /// The input has no header row (KEEL files, for example).
    #[arg(long)]
    pub no_header: bool,
    /// Label column: index or header name (default: last).
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
}

#[derive(Args, Clone, Debug, Default)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Clone, Debug, Default)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long = "positive", required = true)]
    pub positive: Vec<String>,
}

/// Process exit code for an error: 2 config, 3 data, 4 runtime.
pub fn exit_code(err: &Error) -> i32 {
    match err.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Runtime => 4,
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Train(a) => cmd_train(&a, out).map(|_| ()),
        Command::Oversample(a) => cmd_oversample(&a, out),
        Command::Compare(a) => cmd_compare(&a, out).map(|_| ()),
        Command::Metrics(a) => cmd_metrics(&a, out),
    }
}

fn echo(out: &mut dyn Write, line: std::fmt::Arguments) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))
}

fn out_dir(common: &CommonArgs, config: Option<&ExperimentConfig>) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| config.and_then(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Trains on the minority rows and writes the network JSON. Returns the
/// written path.
pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<PathBuf> {
    let mut config = args.common.require_config()?;
    config.validate()?;
    if let Some(seed) = args.common.seed {
        config.training.seed = seed;
    }
    let entry = match &args.dataset {
        Some(name) => config
            .datasets
            .iter()
            .find(|d| &d.name == name)
            .ok_or_else(|| Error::Config(format!("no dataset named {name:?} in config")))?,
        None => config
            .datasets
            .first()
            .ok_or_else(|| Error::Config("config lists no datasets".into()))?,
    };
    let dataset = entry.load()?;
    let execution = args.common.execution()?;
    let cfg = OversampleConfig {
        training: config.training.clone(),
        execution,
        ..config.oversample.clone()
    };
    let n = match cfg.module_count {
        Some(n) => n,
        None => compute_module_count(dataset.count(Class::Majority), dataset.count(Class::Minority))?,
    };
    let minority = dataset.class_rows(Class::Minority);
    let minority = if cfg.standardize {
        NormalizationParams::fit(dataset.features.view())?.apply(minority.view())
    } else {
        minority
    };
    let sampler = execution.with_jobs(args.common.jobs, || fit(minority.view(), n, &cfg))??;
    for (epoch, e) in sampler.history.cost.iter().enumerate() {
        echo(out, format_args!("epoch {} E={e:.6e}", epoch + 1))?;
    }
    let path = args
        .output
        .clone()
        .unwrap_or_else(|| out_dir(&args.common, Some(&config)).join("network.json"));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(&path, sampler.network.to_json() + "\n").map_err(|e| Error::io(&path, e))?;
    echo(out, format_args!("wrote {} (N={n}, H={})", path.display(), cfg.subspace_dim))?;
    Ok(path)
}

fn provenance_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().and_then(|s| s.to_str()).unwrap_or("output");
    output.with_file_name(format!("{stem}.provenance.csv"))
}

pub fn cmd_oversample(args: &OversampleArgs, out: &mut dyn Write) -> Result<()> {
    let config = args.common.load_config()?.unwrap_or_default();
    let mut cfg = OversampleConfig {
        training: config.training.clone(),
        execution: args.common.execution()?,
        ..config.oversample.clone()
    };
    if let Some(seed) = args.common.seed {
        cfg.training.seed = seed;
    }
    cfg.validate()?;
    if !args.input.is_file() {
        return Err(Error::Config(format!("input file not found: {}", args.input.display())));
    }
    let options = CsvOptions {
        has_header: !args.no_header,
        label_column: match &args.label_column {
            None => LabelColumn::default(),
            Some(s) => s.parse().map(LabelColumn::Index).unwrap_or_else(|_| LabelColumn::Name(s.clone())),
        },
        delimiter: args.delimiter,
    };
    let table = load_csv(&args.input, &options)?;
    let name = args.input.file_stem().and_then(|s| s.to_str()).unwrap_or("input");
    let dataset: Dataset = binarize(&table, name, &args.positive)?;
    let result = cfg.execution.with_jobs(args.common.jobs, || oversample(&dataset, &cfg))??;
    let after = &result.dataset;
    if let Some(parent) = args.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    after.write_csv(&args.output, args.delimiter)?;
    let prov = args.provenance.clone().unwrap_or_else(|| provenance_path(&args.output));
    result.batch.write_provenance(&prov)?;
    echo(out, format_args!("N={}", result.module_count))?;
    echo(
        out,
        format_args!(
            "before: minority={} majority={}",
            dataset.count(Class::Minority),
            dataset.count(Class::Majority)
        ),
    )?;
    echo(
        out,
        format_args!(
            "after: minority={} majority={} (synthetic={})",
            after.count(Class::Minority),
            after.count(Class::Majority),
            result.batch.len()
        ),
    )?;
    echo(out, format_args!("wrote {} and {}", args.output.display(), prov.display()))
}

/// Runs the comparison and writes the report files. On cell failures the
/// report is still written and `IncompleteGrid` is returned.
pub fn cmd_compare(args: &CompareArgs, out: &mut dyn Write) -> Result<RunReport> {
    let mut config = args.common.require_config()?;
    if let Some(seed) = args.common.seed {
        config.seed = seed;
    }
    config.validate()?;
    let execution = args.common.execution()?;
    let datasets = config.load_datasets()?;
    let outcome = execution.with_jobs(args.common.jobs, || run_compare(&config, &datasets, execution))??;
    let dir = out_dir(&args.common, Some(&config));
    for path in write_report(&outcome.report, &dir, args.common.format.into())? {
        echo(out, format_args!("wrote {}", path.display()))?;
    }
    if let Some(table) = &outcome.report.rank_table {
        for (m, method) in table.methods.iter().enumerate() {
            echo(out, format_args!("{method}: overall rank {:.3}", table.overall[m]))?;
        }
    }
    outcome.check_complete()?;
    Ok(outcome.report)
}

pub fn cmd_metrics(args: &MetricsArgs, out: &mut dyn Write) -> Result<()> {
    if !args.predictions.is_file() {
        return Err(Error::Config(format!(
            "predictions file not found: {}",
            args.predictions.display()
        )));
    }
    let report = metrics_from_predictions(&args.predictions, &args.positive)?;
    let json = serde_json::to_string_pretty(&report).expect("metrics serialize");
    let format = args.common.format;
    if let Some(dir) = &args.common.out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let p = dir.join("metrics.json");
        std::fs::write(&p, json.clone() + "\n").map_err(|e| Error::io(&p, e))?;
    }
    if matches!(format, Format::Json | Format::Both) {
        echo(out, format_args!("{json}"))?;
    }
    if matches!(format, Format::Csv | Format::Both) {
        echo(out, format_args!("precision,recall,g_mean,f1"))?;
        echo(
            out,
            format_args!("{:?},{:?},{:?},{:?}", report.precision, report.recall, report.g_mean, report.f1),
        )?;
    }
    Ok(())
}
