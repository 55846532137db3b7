//! Command-line grammar.

use std::path::PathBuf;

use capeval_core::{
    Error, Language, MetricKind, ReportFormat, ReportOptions, Result, Segmentation, TokenizerPolicy,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::{
    cmd_correlate, cmd_eval, cmd_report, cmd_train_projector, parse_grid, report_format,
    CorrelateConfig, ReportConfig, TrainConfig,
};
use crate::config::{parse_metric_list, InputPaths, RunConfig, Scenario, ZMode};

/// Comma-separated metric names as one flag value.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricList(pub Vec<MetricKind>);

fn metric_list(s: &str) -> Result<MetricList> {
    parse_metric_list(s).map(MetricList)
}

#[derive(Debug, Parser)]
#[command(
    name = "capeval",
    version,
    about = "Reference-free scoring of cross-lingual image captions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score captions per model.
    Eval(EvalArgs),
    /// Spearman correlations between proposed and standard metrics.
    Correlate(CorrelateArgs),
    /// Fit a sentence-to-visual projector.
    TrainProjector(TrainArgs),
    /// Re-render a score table, rounded.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SegmentArg {
    Auto,
    Whitespace,
    Char,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ZModeArg {
    Fixed,
    BatchMax,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TokenizerArgs {
    /// How target-language text is split into tokens.
    #[arg(long, value_enum, default_value = "auto")]
    pub tokenizer: SegmentArg,
    /// Keep letter case.
    #[arg(long)]
    pub keep_case: bool,
    /// Keep punctuation tokens.
    #[arg(long)]
    pub keep_punctuation: bool,
}

impl TokenizerArgs {
    pub fn policy(&self) -> TokenizerPolicy {
        TokenizerPolicy {
            segmentation: match self.tokenizer {
                SegmentArg::Auto => Segmentation::Auto,
                SegmentArg::Whitespace => Segmentation::Whitespace,
                SegmentArg::Char => Segmentation::CjkChar,
            },
            lowercase: !self.keep_case,
            strip_punctuation: !self.keep_punctuation,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Report format; defaults to the output extension, else csv.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

impl OutputArgs {
    fn options(&self, precision: Option<usize>) -> ReportOptions {
        ReportOptions {
            format: report_format(self.format.map(Into::into), self.output.as_deref()),
            precision,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Captions JSONL: {"image_id", "model_id", "caption"} per line.
    #[arg(long)]
    pub captions: PathBuf,
    /// References JSONL: {"image_id", "source": [..], "target": [..], "mt": [..]}.
    #[arg(long)]
    pub references: Option<PathBuf>,
    #[arg(long, alias = "emb-source")]
    pub embeddings_source: Option<PathBuf>,
    #[arg(long, alias = "emb-target")]
    pub embeddings_target: Option<PathBuf>,
    /// Visual features, one image per line in word2vec text format.
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long, alias = "proj-source")]
    pub projector_source: Option<PathBuf>,
    #[arg(long, alias = "proj-target")]
    pub projector_target: Option<PathBuf>,
    /// Words removed before WMD.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    #[arg(long, default_value = "I")]
    pub scenario: Scenario,
    #[arg(long, value_enum, default_value = "batch-max")]
    pub z_mode: ZModeArg,
    /// WMD normalizer, required with --z-mode fixed.
    #[arg(long)]
    pub z: Option<f64>,
    /// Comma-separated metric names; default is all the scenario allows.
    #[arg(long, value_parser = metric_list)]
    pub metrics: Option<MetricList>,
    /// Average over every source and MT reference instead of the first.
    #[arg(long)]
    pub all_refs: bool,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Round reported scores to this many decimals.
    #[arg(long)]
    pub precision: Option<usize>,
    #[command(flatten)]
    pub tokenizer: TokenizerArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

impl EvalArgs {
    pub fn config(&self) -> Result<RunConfig> {
        let z_mode = match (self.z_mode, self.z) {
            (ZModeArg::Fixed, Some(z)) => ZMode::Fixed(z),
            (ZModeArg::Fixed, None) => {
                return Err(Error::Config("--z-mode fixed needs --z".into()))
            }
            (ZModeArg::BatchMax, Some(_)) => {
                return Err(Error::Config("--z only applies to --z-mode fixed".into()))
            }
            (ZModeArg::BatchMax, None) => ZMode::BatchMax,
        };
        let report = self.out.options(self.precision);
        Ok(RunConfig {
            paths: InputPaths {
                captions: self.captions.clone(),
                references: self.references.clone(),
                embeddings_source: self.embeddings_source.clone(),
                embeddings_target: self.embeddings_target.clone(),
                features: self.features.clone(),
                projector_source: self.projector_source.clone(),
                projector_target: self.projector_target.clone(),
                stopwords: self.stopwords.clone(),
            },
            tokenizer: self.tokenizer.policy(),
            scenario: self.scenario,
            z_mode,
            metrics: self.metrics.clone().map(|m| m.0),
            all_refs: self.all_refs,
            threads: self.threads,
            output: self.out.output.clone(),
            format: report.format,
            precision: report.precision,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct CorrelateArgs {
    /// Score table (CSV or JSON).
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, value_parser = metric_list)]
    pub proposed: Option<MetricList>,
    #[arg(long, value_parser = metric_list)]
    pub standard: Option<MetricList>,
    #[arg(long)]
    pub precision: Option<usize>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub precision: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Pairs JSONL: {"image_id", "caption", "origin": "mt"|"human", "weight"?}.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value = "target")]
    pub language: Language,
    #[arg(long, default_value_t = capeval_core::visual::DEFAULT_LAMBDA)]
    pub lambda: f64,
    /// Comma-separated lambdas to choose from by 5-fold cross-validation.
    #[arg(long)]
    pub lambda_grid: Option<String>,
    /// Weight of human-written pairs; machine-translated pairs weigh 1.
    #[arg(long, default_value_t = capeval_core::visual::DEFAULT_HUMAN_WEIGHT)]
    pub human_weight: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub tokenizer: TokenizerArgs,
    #[arg(long, short)]
    pub output: PathBuf,
}

/// Runs one parsed command.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Eval(a) => {
            cmd_eval(&a.config()?)?;
        }
        Command::Correlate(a) => {
            let mut c = CorrelateConfig::new(&a.scores);
            if let Some(p) = a.proposed {
                c.proposed = p.0;
            }
            if let Some(s) = a.standard {
                c.standard = s.0;
            }
            c.output = a.out.output.clone();
            c.report = a.out.options(a.precision);
            cmd_correlate(&c)?;
        }
        Command::TrainProjector(a) => {
            if !(a.human_weight.is_finite() && a.human_weight > 0.0) {
                return Err(Error::Config("--human-weight must be positive".into()));
            }
            let mut c = TrainConfig::new(&a.pairs, &a.embeddings, &a.features, &a.output);
            c.language = a.language;
            c.lambda = a.lambda;
            c.lambda_grid = a.lambda_grid.as_deref().map(parse_grid).transpose()?;
            c.human_weight = a.human_weight;
            c.seed = a.seed;
            c.tokenizer = a.tokenizer.policy();
            cmd_train_projector(&c)?;
        }
        Command::Report(a) => {
            cmd_report(&ReportConfig {
                scores: a.scores.clone(),
                output: a.out.output.clone(),
                report: a.out.options(Some(a.precision)),
            })?;
        }
    }
    Ok(())
}
