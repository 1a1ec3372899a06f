//! Subcommand definitions and handlers.

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use spindle_core::dataset::{
    generate_synthetic, load_dataset_path, polymer_subset, polymers, write_dataset, RangeSummary, SynthConfig,
    PROCESS_FEATURES, SYNTHETIC_POLYMER,
};
use spindle_core::distribution::{compare_distributions, ComparisonRow};
use spindle_core::interpret::{response_surface, SURFACE_GRID};
use spindle_core::report::build_report;
use spindle_core::service::{run_pipeline, LoadedDataset, RunRequest, Service};
use spindle_core::validation::{benchmark, final_fit};
use spindle_core::{ModelKind, ProcessInputs, RangeViolation, RunArtifacts, Seed};

use crate::data;
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "spindle", version, about = "Predict electrospun fibre-diameter distributions from process parameters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a dataset file and print its ingest report as JSON.
    Ingest {
        path: PathBuf,
    },
    /// Write a seeded synthetic dataset as CSV.
    Synth(SynthArgs),
    /// Nested cross-validation of every polymer × model pair.
    Benchmark(BenchmarkArgs),
    /// Full prediction pipeline for one operating point; writes a report bundle.
    Run(RunArgs),
    /// Distribution comparison battery between two single-column CSV files.
    Compare(CompareArgs),
    /// Model predictions over a grid of two process parameters.
    Surface(SurfaceArgs),
    /// Start the HTTP JSON API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Dataset CSV/TSV; the seeded synthetic dataset is used when omitted.
    #[arg(long, env = "SPINDLE_DATA")]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 30)]
    pub studies: usize,
    #[arg(long, default_value_t = 20)]
    pub rows: usize,
    /// Row-level noise SD, nm.
    #[arg(long, default_value_t = 20.0)]
    pub noise_sd: f64,
    /// SD of the per-study additive offset, nm.
    #[arg(long, default_value_t = 20.0)]
    pub offset_sd: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value = SYNTHETIC_POLYMER)]
    pub polymer: String,
    /// Output file; standard output when omitted.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated model kinds; all seven when omitted.
    #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
    pub models: Vec<ModelKind>,
    #[arg(long, env = "SPINDLE_SEED", default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = TableFormat::Table)]
    pub format: TableFormat,
    /// Add collector-type indicator columns to the predictors.
    #[arg(long)]
    pub include_collector: bool,
}

/// The six process parameters of an operating point.
#[derive(Debug, Clone, Default, Args)]
pub struct InputArgs {
    /// Solution concentration, % w/w.
    #[arg(long)]
    pub concentration: Option<f64>,
    /// Needle gauge.
    #[arg(long)]
    pub needle_diameter: Option<f64>,
    /// Collector rotation speed, rpm.
    #[arg(long)]
    pub rotation_speed: Option<f64>,
    /// Applied voltage, kV.
    #[arg(long)]
    pub voltage: Option<f64>,
    /// Flow rate, ml/h.
    #[arg(long)]
    pub flow_rate: Option<f64>,
    /// Tip-to-collector distance, cm.
    #[arg(long)]
    pub distance: Option<f64>,
    #[arg(long, default_value = "")]
    pub collector: String,
}

impl InputArgs {
    fn values(&self) -> [Option<f64>; 6] {
        [self.concentration, self.needle_diameter, self.rotation_speed, self.voltage, self.flow_rate, self.distance]
    }

    /// All six parameters, or a usage error naming the missing ones.
    pub fn complete(&self) -> Result<ProcessInputs> {
        let values = self.values();
        let missing: Vec<String> =
            PROCESS_FEATURES.iter().zip(values).filter(|(_, v)| v.is_none()).map(|(n, _)| format!("--{}", n.replace('_', "-"))).collect();
        if !missing.is_empty() {
            return Err(CliError::Usage(format!("missing process parameters: {}", missing.join(", "))));
        }
        Ok(ProcessInputs::from_values(values.map(|v| v.unwrap_or_default()), self.collector.clone()))
    }

    /// Missing parameters filled with the midpoint of their observed range.
    pub fn or_midpoints(&self, range: &RangeSummary) -> ProcessInputs {
        let mut v = [0.0; 6];
        for (k, (name, given)) in PROCESS_FEATURES.iter().zip(self.values()).enumerate() {
            v[k] = given.unwrap_or_else(|| range.get(name).map_or(0.0, |r| 0.5 * (r.min + r.max)));
        }
        ProcessInputs::from_values(v, self.collector.clone())
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Polymer to model; may be omitted when the dataset holds only one.
    #[arg(long)]
    pub polymer: Option<String>,
    #[arg(long, value_parser = parse_kind)]
    pub model: ModelKind,
    #[command(flatten)]
    pub inputs: InputArgs,
    #[arg(long, env = "SPINDLE_SEED", default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub include_collector: bool,
    /// Report bundle path.
    #[arg(long, default_value = "report.zip")]
    pub out: PathBuf,
    /// Print a JSON summary instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Observed sample, one value per row.
    pub real: PathBuf,
    /// Simulated sample, one value per row.
    pub simulated: PathBuf,
    /// Column to read when the files have a header row.
    #[arg(long)]
    pub column: Option<String>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SurfaceArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub polymer: Option<String>,
    #[arg(long, value_parser = parse_kind)]
    pub model: ModelKind,
    /// Feature varied along the first axis.
    #[arg(long)]
    pub x: String,
    /// Feature varied along the second axis.
    #[arg(long)]
    pub y: String,
    #[arg(long, default_value_t = SURFACE_GRID)]
    pub grid: usize,
    /// Values held for the other parameters; range midpoints when omitted.
    #[command(flatten)]
    pub inputs: InputArgs,
    #[arg(long, env = "SPINDLE_SEED", default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    pub format: TableFormat,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, env = "SPINDLE_BIND", default_value = "127.0.0.1")]
    pub bind: String,
    #[arg(long, env = "SPINDLE_PORT", default_value_t = 8080)]
    pub port: u16,
    /// Threads executing queued runs.
    #[arg(long, env = "SPINDLE_WORKERS", default_value_t = 2)]
    pub workers: usize,
}

fn parse_kind(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse().map_err(|e: spindle_core::Error| e.to_string())
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Ingest { path } => ingest(&path, out),
        Command::Synth(args) => synth(&args, out),
        Command::Benchmark(args) => run_benchmark(&args, out),
        Command::Run(args) => run(&args, out),
        Command::Compare(args) => compare(&args, out),
        Command::Surface(args) => surface(&args, out),
        Command::Serve(args) => serve(&args),
    }
}

pub fn ingest(path: &Path, out: &mut dyn Write) -> Result<()> {
    let (_, report) = load_dataset_path(path)?;
    serde_json::to_writer_pretty(&mut *out, &report)?;
    writeln!(out)?;
    Ok(())
}

pub fn synth(args: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let config = SynthConfig {
        n_studies: args.studies,
        rows_per_study: args.rows,
        noise_sd: args.noise_sd,
        study_offset_sd: args.offset_sd,
        seed: args.seed,
        polymer: args.polymer.clone(),
    };
    let synth = generate_synthetic(&config)?;
    match &args.out {
        Some(path) => {
            let file = fs::File::create(path).map_err(|source| CliError::File { path: path.clone(), source })?;
            write_dataset(&synth.records, file)?;
            log::info!("wrote {} rows to {}", synth.records.len(), path.display());
        }
        None => write_dataset(&synth.records, &mut *out)?,
    }
    Ok(())
}

pub fn run_benchmark(args: &BenchmarkArgs, out: &mut dyn Write) -> Result<()> {
    let dataset = data::load(args.data.data.as_deref())?;
    let kinds = if args.models.is_empty() { ModelKind::ALL.to_vec() } else { args.models.clone() };
    let table = benchmark(&dataset.records, &kinds, args.include_collector, Seed(args.seed))?;
    match args.format {
        TableFormat::Table => {
            writeln!(out, "dataset: {}  seed: {}", dataset.name, args.seed)?;
            out.write_all(table.render().as_bytes())?;
        }
        TableFormat::Csv => out.write_all(table.to_csv()?.as_bytes())?,
        TableFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, &table)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

fn pick_polymer(dataset: &LoadedDataset, given: Option<&str>) -> Result<String> {
    if let Some(p) = given {
        return Ok(p.to_string());
    }
    match polymers(&dataset.records).as_slice() {
        [only] => Ok(only.clone()),
        many => Err(CliError::Usage(format!("--polymer is required; the dataset holds {}", many.join(", ")))),
    }
}

#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    polymer: &'a str,
    model: ModelKind,
    seed: u64,
    prediction_nm: f64,
    realisations: usize,
    realisation_mean_nm: f64,
    realisation_sd_nm: f64,
    cv: &'a spindle_core::MetricsSummary,
    final_params: String,
    recommendation: String,
    violations: &'a [RangeViolation],
    dataset_fingerprint: &'a str,
    bundle: String,
    bundle_bytes: usize,
}

fn range_lines(violations: &[RangeViolation]) -> Vec<String> {
    if violations.is_empty() {
        return vec!["Range check: all parameters within the observed range".into()];
    }
    violations
        .iter()
        .map(|v| format!("Out of range: {} = {} (observed {} to {})", v.feature, v.value, v.min, v.max))
        .collect()
}

pub fn run(args: &RunArgs, out: &mut dyn Write) -> Result<()> {
    let inputs = args.inputs.complete()?;
    let dataset = data::load(args.data.data.as_deref())?;
    let request = RunRequest {
        polymer: pick_polymer(&dataset, args.polymer.as_deref())?,
        inputs,
        model: args.model,
        seed: Some(Seed(args.seed)),
        include_collector: args.include_collector,
    };
    let artifacts = run_pipeline(&dataset, &request)?;
    let bytes = build_report(&artifacts)?.to_zip()?;
    fs::write(&args.out, &bytes).map_err(|source| CliError::File { path: args.out.clone(), source })?;
    write_run_summary(&artifacts, &args.out, bytes.len(), args.json, out)
}

fn write_run_summary(a: &RunArtifacts, bundle: &Path, bundle_bytes: usize, json: bool, out: &mut dyn Write) -> Result<()> {
    let seed = a.request.seed.unwrap_or_default().0;
    if json {
        let summary = RunSummary {
            polymer: &a.request.polymer,
            model: a.request.model,
            seed,
            prediction_nm: a.prediction,
            realisations: a.distribution.realisations.len(),
            realisation_mean_nm: a.distribution.mean(),
            realisation_sd_nm: a.distribution.sd(),
            cv: &a.cv.summary,
            final_params: a.final_params.to_string(),
            recommendation: a.recommendation.sentence(),
            violations: &a.violations,
            dataset_fingerprint: &a.dataset_fingerprint,
            bundle: bundle.display().to_string(),
            bundle_bytes,
        };
        serde_json::to_writer_pretty(&mut *out, &summary)?;
        writeln!(out)?;
        return Ok(());
    }
    let s = &a.cv.summary;
    writeln!(out, "Polymer: {}  Model: {}  Seed: {}", a.request.polymer, a.request.model, seed)?;
    writeln!(out, "Prediction: {:.3} nm", a.prediction)?;
    writeln!(
        out,
        "Distribution: {} realisations, mean {:.3} nm, SD {:.3} nm, 5-95% [{:.3}, {:.3}] nm",
        a.distribution.realisations.len(),
        a.distribution.mean(),
        a.distribution.sd(),
        a.distribution.quantile(0.05),
        a.distribution.quantile(0.95)
    )?;
    writeln!(out, "Nested CV ({} folds): RMSE {} nm, MAE {} nm, Rsquared {}", s.folds, s.rmse.display(2), s.mae.display(2), s.r2.display(3))?;
    writeln!(out, "Final hyperparameters: {}", a.final_params)?;
    writeln!(out, "{}", a.recommendation.sentence())?;
    for line in range_lines(&a.violations) {
        writeln!(out, "{line}")?;
    }
    writeln!(out, "Report bundle: {} ({} bytes)", bundle.display(), bundle_bytes)?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.6}"))
}

pub fn compare(args: &CompareArgs, out: &mut dyn Write) -> Result<()> {
    let a = data::read_sample(&args.real, args.column.as_deref())?;
    let b = data::read_sample(&args.simulated, args.column.as_deref())?;
    let cmp = compare_distributions(&a, &b)?;
    if args.json {
        serde_json::to_writer_pretty(&mut *out, &cmp)?;
        writeln!(out)?;
        return Ok(());
    }
    writeln!(out, "real: n = {}  simulated: n = {}", cmp.n_a, cmp.n_b)?;
    let mut w = csv::Writer::from_writer(&mut *out);
    w.write_record(["statistic", "value", "p", "method"])?;
    for ComparisonRow { statistic, value, p, method } in cmp.rows() {
        w.write_record([statistic, fmt_opt(value), fmt_opt(p), method])?;
    }
    w.flush()?;
    drop(w);
    for note in &cmp.notes {
        writeln!(out, "note: {note}")?;
    }
    Ok(())
}

pub fn surface(args: &SurfaceArgs, out: &mut dyn Write) -> Result<()> {
    let dataset = data::load(args.data.data.as_deref())?;
    let polymer = pick_polymer(&dataset, args.polymer.as_deref())?;
    let table = polymer_subset(&dataset.records, &polymer, false)?;
    let range = RangeSummary::from_table(&table)?;
    let model = final_fit(&table, args.model, Seed(args.seed))?;
    let fixed = args.inputs.or_midpoints(&range);
    let s = response_surface(&model, &args.x, &args.y, (args.grid, args.grid), &fixed, &range)?;
    match args.format {
        TableFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, &s)?;
            writeln!(out)?;
        }
        TableFormat::Csv | TableFormat::Table => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record([s.feature_a.as_str(), s.feature_b.as_str(), "prediction_nm"])?;
            for (i, a) in s.axis_a.iter().enumerate() {
                for (j, b) in s.axis_b.iter().enumerate() {
                    w.write_record([a.to_string(), b.to_string(), s.predictions.get(i, j).to_string()])?;
                }
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn serve(args: &ServeArgs) -> Result<()> {
    let dataset = data::load(args.data.data.as_deref())?;
    let addr: SocketAddr = format!("{}:{}", args.bind, args.port)
        .parse()
        .map_err(|e| CliError::Usage(format!("bad bind address '{}:{}': {e}", args.bind, args.port)))?;
    let service = Service::new(dataset, args.workers);
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        log::info!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, crate::server::router(service))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn missing_inputs_are_named() {
        let args = InputArgs { concentration: Some(10.0), voltage: Some(15.0), ..Default::default() };
        let err = args.complete().unwrap_err().to_string();
        assert!(err.contains("--needle-diameter") && err.contains("--distance") && !err.contains("--voltage"), "{err}");
    }

    #[test]
    fn model_aliases_parse() {
        let cli = Cli::try_parse_from(["spindle", "benchmark", "--models", "rf,knn,LINEAR"]).unwrap();
        let Command::Benchmark(b) = cli.command else { panic!() };
        assert_eq!(b.models, vec![ModelKind::Forest, ModelKind::Knn, ModelKind::Linear]);
        assert!(Cli::try_parse_from(["spindle", "benchmark", "--models", "boosting"]).is_err());
    }
}
