//! `geolens`: batch front end for the geolens-core pipelines.
//!
//! Exit codes: 0 success, 2 malformed input, 3 validation error (including
//! unreadable paths), 4 failed output invariant.

mod commands;
mod config;
mod error;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "geolens", version, about = "Geolocation, concept classification and annotation simulation tools")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract street nodes (`id,lat,lon`) from an OSM XML file.
    OsmExtract(OsmExtractArgs),
    /// Pick one medoid per K-Means cluster of a point CSV.
    Sample(SampleArgs),
    /// Assign records to train/test by grid cell.
    Split(SplitArgs),
    /// Generate a synthetic multi-city geotagged dataset (JSON lines).
    Synth(SynthArgs),
    /// Build a retrieval index over geotagged records.
    Index(IndexArgs),
    /// Estimate the location of each query record.
    Query(QueryArgs),
    /// Distance error and accuracy at 1/25/200 km per neighbour count.
    Evaluate(EvaluateArgs),
    /// Generate synthetic single-label concept features (JSON lines).
    SynthFeatures(SynthFeaturesArgs),
    /// Train one linear model per concept.
    Train(TrainArgs),
    /// TP/TN/FP/FN/Acc table from predictions or from models and features.
    Rates(RatesArgs),
    /// Confusion matrix among the trained concepts.
    Confusion(ConfusionArgs),
    /// Rank a concept bank by similarity to a query term.
    Expand(ExpandArgs),
    /// Simulate the annotate-train-select loop.
    SimulateAl(SimulateArgs),
}

#[derive(Debug, Args)]
struct OsmExtractArgs {
    #[arg(long)]
    osm: PathBuf,
    /// `lat,lon` CSV of boundary vertices.
    #[arg(long)]
    polygon: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RecordsArgs {
    /// Geotagged records, JSON lines.
    #[arg(long)]
    records: PathBuf,
    /// VEC1 file resolving `offset` fields in the records.
    #[arg(long)]
    vectors: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[command(flatten)]
    input: RecordsArgs,
    #[arg(long)]
    cell_deg: Option<f64>,
    #[arg(long)]
    train_frac: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Number of built-in cities to use (1 to 4).
    #[arg(long, default_value_t = 4)]
    cities: usize,
    #[arg(long, default_value_t = 500)]
    per_city: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 5.0)]
    spread_km: f64,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct IndexArgs {
    #[command(flatten)]
    input: RecordsArgs,
    /// Split CSV; only `train` records are indexed.
    #[arg(long)]
    split: Option<PathBuf>,
    /// Exhaustive search instead of product quantization.
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    pq_m: Option<usize>,
    #[arg(long)]
    pq_k: Option<usize>,
    #[arg(long)]
    pq_iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[arg(long)]
    index: PathBuf,
    #[command(flatten)]
    input: RecordsArgs,
    /// Split CSV; only `test` records are queried.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    nn: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    index: PathBuf,
    #[command(flatten)]
    input: RecordsArgs,
    /// Split CSV; only `test` records are evaluated.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 5, 9])]
    nn: Vec<usize>,
    /// Value of the `descriptor` column.
    #[arg(long, default_value = "embedding")]
    descriptor: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthFeaturesArgs {
    #[arg(long, value_delimiter = ',', default_values_t = ["car".to_string(), "gun".to_string(), "knife".to_string()])]
    concepts: Vec<String>,
    #[arg(long, default_value_t = 100)]
    per_concept: usize,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 3.0)]
    separation: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    /// Labeled features, JSON lines.
    #[arg(long)]
    features: PathBuf,
    /// VEC1 file resolving `offset` fields in the features.
    #[arg(long)]
    vectors: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    input: FeaturesArgs,
    /// Concepts to train; defaults to every label present.
    #[arg(long, value_delimiter = ',')]
    concepts: Vec<String>,
    /// Negatives per positive: an integer, `max`, or `cv` to choose by cross-validation.
    #[arg(long)]
    neg_ratio: Option<String>,
    #[arg(long)]
    cv_folds: Option<usize>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write the per-ratio cross-validation F1 (`cv` only).
    #[arg(long)]
    cv_report: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RatesArgs {
    /// CSV `concept,truth,predicted` with boolean columns.
    #[arg(long, conflicts_with_all = ["models", "features"])]
    predictions: Option<PathBuf>,
    #[arg(long, requires = "features")]
    models: Option<PathBuf>,
    #[arg(long, requires = "models")]
    features: Option<PathBuf>,
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ConfusionArgs {
    #[arg(long)]
    models: PathBuf,
    #[command(flatten)]
    input: FeaturesArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum ExpandMode {
    Wup,
    Cosine,
}

#[derive(Debug, Args)]
struct ExpandArgs {
    #[arg(long)]
    query: String,
    /// Concept bank, one label per line.
    #[arg(long)]
    bank: PathBuf,
    #[arg(long, value_enum)]
    mode: ExpandMode,
    #[arg(long, required_if_eq("mode", "wup"))]
    taxonomy: Option<PathBuf>,
    #[arg(long, required_if_eq("mode", "cosine"))]
    lexicon: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// `random`, `uncertainty`, `high-confidence`, or `all`.
    #[arg(long)]
    strategy: String,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    seed_count: Option<usize>,
    /// Independent runs per strategy; more than one (or `all`) writes the comparison report.
    #[arg(long, default_value_t = 1)]
    runs: u64,
    /// Labeled-item budget for the report's mAP column.
    #[arg(long, default_value_t = 100)]
    budget: usize,
    /// mAP threshold for the report's time column.
    #[arg(long, default_value_t = 0.9)]
    threshold: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))
}

pub(crate) fn read_text(path: &Path) -> Result<String, CliError> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes).map_err(|_| CliError::Parse(format!("{} is not valid UTF-8", path.display())))
}

/// Writes every output only after all of them have been computed; each file
/// goes through a temporary sibling and a rename.
pub(crate) fn write_outputs(outputs: &[(&Path, Vec<u8>)]) -> Result<(), CliError> {
    for (path, bytes) in outputs {
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".partial");
        let tmp = PathBuf::from(tmp);
        std::fs::write(&tmp, bytes)
            .and_then(|_| std::fs::rename(&tmp, path))
            .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::OsmExtract(a) => commands::osm_extract(&a.osm, a.polygon.as_deref(), &a.out),
        Command::Sample(a) => commands::sample(&cfg, &a.points, a.k, a.seed, a.max_iters, &a.out),
        Command::Split(a) => commands::split(&cfg, &a.input.records, a.input.vectors.as_deref(), a.cell_deg, a.train_frac, a.seed, &a.out),
        Command::Synth(a) => commands::synth(&cfg, a.cities, a.per_city, a.dim, a.spread_km, a.noise, a.seed, &a.out),
        Command::Index(a) => commands::index(
            &cfg,
            &a.input.records,
            a.input.vectors.as_deref(),
            a.split.as_deref(),
            commands::IndexChoice { exact: a.exact, m: a.pq_m, k: a.pq_k, iters: a.pq_iters, seed: a.seed },
            &a.out,
        ),
        Command::Query(a) => commands::query(&a.index, &a.input.records, a.input.vectors.as_deref(), a.split.as_deref(), a.nn, &a.out),
        Command::Evaluate(a) => commands::evaluate(
            &a.index,
            &a.input.records,
            a.input.vectors.as_deref(),
            a.split.as_deref(),
            &a.nn,
            &a.descriptor,
            &a.out,
        ),
        Command::SynthFeatures(a) => commands::synth_features(&cfg, &a.concepts, a.per_concept, a.dim, a.separation, a.seed, &a.out),
        Command::Train(a) => commands::train(
            &cfg,
            &a.input.features,
            a.input.vectors.as_deref(),
            &a.concepts,
            commands::TrainChoice { neg_ratio: a.neg_ratio, cv_folds: a.cv_folds, c: a.c, epochs: a.epochs, seed: a.seed },
            a.cv_report.as_deref(),
            &a.out,
        ),
        Command::Rates(a) => match (a.predictions, a.models, a.features) {
            (Some(p), None, None) => commands::rates_from_predictions(&p, &a.out),
            (None, Some(m), Some(f)) => commands::rates_from_models(&m, &f, a.vectors.as_deref(), &a.out),
            _ => Err(CliError::Validation("rates needs --predictions, or --models with --features".into())),
        },
        Command::Confusion(a) => commands::confusion(&a.models, &a.input.features, a.input.vectors.as_deref(), &a.out),
        Command::Expand(a) => commands::expand(
            &a.query,
            &a.bank,
            match a.mode {
                ExpandMode::Wup => commands::Source::Taxonomy(a.taxonomy.expect("required by clap")),
                ExpandMode::Cosine => commands::Source::Lexicon(a.lexicon.expect("required by clap")),
            },
            a.k,
            &a.out,
        ),
        Command::SimulateAl(a) => commands::simulate(
            &cfg,
            commands::SimulateChoice {
                strategy: a.strategy,
                rounds: a.rounds,
                batch: a.batch,
                seed_count: a.seed_count,
                runs: a.runs,
                budget: a.budget,
                threshold: a.threshold,
                seed: a.seed,
            },
            &a.out,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
