//! `layerdebias`: direction extraction, debiasing and evaluation pipelines.

mod backend;
mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use backend::ModelArgs;
use output::OutputDir;

#[derive(Parser, Debug)]
#[command(
    name = "layerdebias",
    version,
    about = "Layer-wise gender direction extraction, removal and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract per-layer directions from the definition pair.
    Extract(ExtractArgs),
    /// Train an intensity regressor on sentence vectors.
    TrainRegressor(TrainArgs),
    /// Score the equity evaluation corpus with trained regressors.
    EvalEec(EecArgs),
    /// Threshold separability of gendered words along each layer's directions.
    Separability(SeparabilityArgs),
    /// Train and test gender probes on word vectors.
    Probe(ProbeArgs),
    /// Write debiased layer vectors of a text file in the embedding dump format.
    DebiasDump(DumpArgs),
    /// Write the synthetic fixture files.
    GenFixture(FixtureArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// independent, iterative or both.
    #[arg(long, default_value = "iterative")]
    pub mode: String,
    /// Difference positions: pairs or all.
    #[arg(long, default_value = "pairs")]
    pub positions: String,
    /// Directions kept per layer in independent mode.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Mean-center difference vectors before PCA.
    #[arg(long)]
    pub center: bool,
    /// Gender pair list (default: bundled).
    #[arg(long)]
    #[serde(skip)]
    pub pairs: Option<PathBuf>,
    /// Deactivate every pair containing this word; repeatable.
    #[arg(long = "drop")]
    pub drop: Vec<String>,
    /// Definition template (default: bundled).
    #[arg(long)]
    #[serde(skip)]
    pub template: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Tab-separated training records.
    #[arg(long)]
    #[serde(skip)]
    pub train: PathBuf,
    /// Tab-separated test records.
    #[arg(long)]
    #[serde(skip)]
    pub test: PathBuf,
    /// anger, fear, joy, sadness or valence.
    #[arg(long)]
    pub task: String,
    /// Layer whose vectors feed the regressor (default: last).
    #[arg(long)]
    pub layer: Option<usize>,
    /// i1 (start sentinel) or i2 (mean of all tokens).
    #[arg(long, default_value = "i1")]
    pub input: String,
    /// Debias the forward pass with this direction set.
    #[arg(long)]
    #[serde(skip)]
    pub directions: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct EecArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    #[serde(skip)]
    pub checkpoint: PathBuf,
    /// Direction set the checkpoint was trained with, if any.
    #[arg(long)]
    #[serde(skip)]
    pub directions: Option<PathBuf>,
    /// Second checkpoint to compare against the first.
    #[arg(long)]
    #[serde(skip)]
    pub compare: Option<PathBuf>,
    /// Direction set of the compared checkpoint.
    #[arg(long)]
    #[serde(skip)]
    pub compare_directions: Option<PathBuf>,
    /// Corpus definition (default: bundled).
    #[arg(long)]
    #[serde(skip)]
    pub eec_spec: Option<PathBuf>,
    /// Scores closer than half a unit in this decimal place count as equal.
    #[arg(long, default_value_t = 3)]
    pub rounding: u32,
}

#[derive(Args, Debug, Serialize)]
pub struct GenDataArgs {
    /// Training word lists (default: bundled).
    #[arg(long)]
    #[serde(skip)]
    pub gendata_train: Option<PathBuf>,
    /// Test word lists (default: bundled).
    #[arg(long)]
    #[serde(skip)]
    pub gendata_test: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct SeparabilityArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub data: GenDataArgs,
    #[arg(long)]
    #[serde(skip)]
    pub directions: PathBuf,
    /// Comma-separated 1-based component indices (default: 1,2 when present).
    #[arg(long)]
    pub pcs: Option<String>,
    /// Comma-separated layers to report (default: all).
    #[arg(long)]
    pub layers: Option<String>,
    /// i1 or i2.
    #[arg(long, default_value = "i2")]
    pub input: String,
    /// Scale vectors to unit norm before projecting.
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct ProbeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub data: GenDataArgs,
    /// Probe vectors from the debiased forward pass.
    #[arg(long)]
    #[serde(skip)]
    pub directions: Option<PathBuf>,
    /// Comma-separated layers (default: all).
    #[arg(long)]
    pub layers: Option<String>,
    /// Comma-separated class counts, 2 and/or 3.
    #[arg(long, default_value = "2,3")]
    pub ways: String,
    /// Comma-separated input settings.
    #[arg(long, default_value = "i1,i2")]
    pub settings: String,
    /// Also train the subword convolutional baseline.
    #[arg(long)]
    pub baseline: bool,
    /// Folds for the baseline's cross-validation; 0 skips it.
    #[arg(long, default_value_t = 0)]
    pub cv_folds: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct DumpArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    #[serde(skip)]
    pub directions: PathBuf,
    /// One text per line.
    #[arg(long)]
    #[serde(skip)]
    pub texts: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct FixtureArgs {
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    /// Seed of the intensity data.
    #[arg(long, default_value_t = 5)]
    pub seed: u64,
    /// Seed of the word lists. Only the default matches the synthetic
    /// backend's lexicon.
    #[arg(long, default_value_t = layerdebias::fixtures::GENDATA_SEED)]
    pub gendata_seed: u64,
    #[arg(long, default_value_t = 4000)]
    pub train: usize,
    #[arg(long, default_value_t = 400)]
    pub test: usize,
    /// Female-minus-male intensity offset.
    #[arg(long, default_value_t = 0.05)]
    pub gender_offset: f64,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Extract(_) => "extract",
            Command::TrainRegressor(_) => "train-regressor",
            Command::EvalEec(_) => "eval-eec",
            Command::Separability(_) => "separability",
            Command::Probe(_) => "probe",
            Command::DebiasDump(_) => "debias-dump",
            Command::GenFixture(_) => "gen-fixture",
        }
    }

    fn out(&self) -> &PathBuf {
        match self {
            Command::Extract(a) => &a.model.out,
            Command::TrainRegressor(a) => &a.model.out,
            Command::EvalEec(a) => &a.model.out,
            Command::Separability(a) => &a.model.out,
            Command::Probe(a) => &a.model.out,
            Command::DebiasDump(a) => &a.model.out,
            Command::GenFixture(a) => &a.out,
        }
    }

    fn run(&self, out: &mut OutputDir) -> anyhow::Result<()> {
        match self {
            Command::Extract(a) => commands::extract(a, out),
            Command::TrainRegressor(a) => commands::train_regressor(a, out),
            Command::EvalEec(a) => commands::eval_eec(a, out),
            Command::Separability(a) => commands::separability(a, out),
            Command::Probe(a) => commands::probe(a, out),
            Command::DebiasDump(a) => commands::debias_dump(a, out),
            Command::GenFixture(a) => commands::gen_fixture(a, out),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cmd = &cli.command;
    let mut out = match OutputDir::create(cmd.out(), cmd.name()) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    match cmd.run(&mut out) {
        Ok(()) => match out.commit() {
            Ok(files) => {
                for f in files {
                    println!("{}", f.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        },
        Err(e) => {
            eprintln!("error: {e:#}");
            match out.quarantine() {
                Ok(q) => eprintln!("partial outputs kept in {}", q.display()),
                Err(qe) => eprintln!("could not quarantine partial outputs: {qe:#}"),
            }
            ExitCode::FAILURE
        }
    }
}
