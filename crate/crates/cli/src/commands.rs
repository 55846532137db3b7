//! Subcommand bodies. Each returns its result so callers and tests can
//! inspect it; writing happens through [`emit`].

use std::collections::BTreeSet;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use capeval_core::io::{load_embeddings, load_features, load_score_table, render_report};
use capeval_core::rank::correlate_all;
use capeval_core::visual::{
    normal_equation_residual, select_lambda, sentence_repr, train_projector, DEFAULT_HUMAN_WEIGHT,
    DEFAULT_LAMBDA,
};
use capeval_core::{
    tokenize, CorrelationMatrix, Error, Language, MetricKind, Projector, Report, ReportFormat,
    ReportOptions, Result, ScoreTable, TokenizerPolicy, TrainingPair,
};
use serde::Deserialize;

use crate::config::RunConfig;
use crate::eval::{evaluate, EvalInputs, EvalOptions};

/// Writes a report to `out`, or to stdout when `out` is `None`.
pub fn emit(report: Report<'_>, out: Option<&Path>, opts: ReportOptions) -> Result<()> {
    match out {
        Some(p) => {
            let mut f = io::BufWriter::new(std::fs::File::create(p)?);
            render_report(report, &mut f, opts)?;
            f.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            render_report(report, &mut lock, opts)?;
            lock.flush()?;
        }
    }
    Ok(())
}

pub fn cmd_eval(config: &RunConfig) -> Result<ScoreTable> {
    let inputs = EvalInputs::load(&config.paths, &config.tokenizer)?;
    let table = evaluate(&inputs, &EvalOptions::from(config))?;
    emit(
        Report::Scores(&table),
        config.output.as_deref(),
        ReportOptions {
            format: config.format,
            precision: config.precision,
        },
    )?;
    Ok(table)
}

#[derive(Debug, Clone)]
pub struct CorrelateConfig {
    pub scores: PathBuf,
    pub proposed: Vec<MetricKind>,
    pub standard: Vec<MetricKind>,
    pub output: Option<PathBuf>,
    pub report: ReportOptions,
}

impl CorrelateConfig {
    pub fn new(scores: impl Into<PathBuf>) -> Self {
        CorrelateConfig {
            scores: scores.into(),
            proposed: MetricKind::PROPOSED.to_vec(),
            standard: [&MetricKind::STANDARD[..], &[MetricKind::Bmrc]].concat(),
            output: None,
            report: ReportOptions::default(),
        }
    }
}

/// Transcribed tables carry rounded aggregates, so a mismatch is reported
/// and the stored value kept.
fn check_aggregates(table: &ScoreTable) {
    if let Err(e) = table.validate() {
        log::warn!("{e}; keeping the stored aggregate");
    }
}

/// Proposed-vs-standard Spearman matrix of a score table. Aggregates
/// missing from the file are derived from their components.
pub fn correlate_scores(
    table: &mut ScoreTable,
    proposed: &[MetricKind],
    standard: &[MetricKind],
) -> Result<CorrelationMatrix> {
    check_aggregates(table);
    table.add_aggregates();
    correlate_all(table, proposed, standard)
}

pub fn cmd_correlate(config: &CorrelateConfig) -> Result<CorrelationMatrix> {
    let mut table = load_score_table(&config.scores)?;
    let m = correlate_scores(&mut table, &config.proposed, &config.standard)?;
    emit(
        Report::Correlation(&m),
        config.output.as_deref(),
        config.report,
    )?;
    Ok(m)
}

#[derive(Debug, Clone)]
pub struct ReportConfig {
    pub scores: PathBuf,
    pub output: Option<PathBuf>,
    pub report: ReportOptions,
}

/// Re-renders a score table, adding any derivable aggregates.
pub fn cmd_report(config: &ReportConfig) -> Result<ScoreTable> {
    let mut table = load_score_table(&config.scores)?;
    check_aggregates(&table);
    table.add_aggregates();
    emit(
        Report::Scores(&table),
        config.output.as_deref(),
        config.report,
    )?;
    Ok(table)
}

/// Where a training caption came from. Human captions get the larger
/// weight so they dominate the machine-translated bulk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    #[default]
    Mt,
    Human,
}

#[derive(Debug, Clone, Deserialize)]
struct PairLine {
    image_id: String,
    caption: String,
    #[serde(default)]
    origin: Origin,
    #[serde(default)]
    weight: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub pairs: PathBuf,
    pub embeddings: PathBuf,
    pub features: PathBuf,
    pub language: Language,
    pub lambda: f64,
    /// Pick lambda from this grid by 5-fold cross-validation instead.
    pub lambda_grid: Option<Vec<f64>>,
    pub human_weight: f64,
    pub seed: u64,
    pub tokenizer: TokenizerPolicy,
    pub output: PathBuf,
}

impl TrainConfig {
    pub fn new(
        pairs: impl Into<PathBuf>,
        embeddings: impl Into<PathBuf>,
        features: impl Into<PathBuf>,
        output: impl Into<PathBuf>,
    ) -> Self {
        TrainConfig {
            pairs: pairs.into(),
            embeddings: embeddings.into(),
            features: features.into(),
            language: Language::Target,
            lambda: DEFAULT_LAMBDA,
            lambda_grid: None,
            human_weight: DEFAULT_HUMAN_WEIGHT,
            seed: 0,
            tokenizer: TokenizerPolicy::default(),
            output: output.into(),
        }
    }
}

pub const CV_FOLDS: usize = 5;

/// Fits a projector from caption/image pairs and saves it.
pub fn cmd_train_projector(config: &TrainConfig) -> Result<Projector> {
    let table = load_embeddings(&config.embeddings, config.language)?;
    let feats = load_features(&config.features)?;
    let reader = io::BufReader::new(std::fs::File::open(&config.pairs)?);

    let mut pairs = Vec::new();
    let mut skipped = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: PairLine = serde_json::from_str(&line).map_err(|e| Error::Format {
            line: i + 1,
            message: e.to_string(),
        })?;
        let sentence = tokenize(&row.caption, config.language, &config.tokenizer).map_err(|e| {
            Error::Format {
                line: i + 1,
                message: e.to_string(),
            }
        })?;
        let target = feats.get(&row.image_id).ok_or_else(|| {
            Error::KeyMismatch(format!(
                "line {}: no visual feature for image {:?}",
                i + 1,
                row.image_id
            ))
        })?;
        let repr = match sentence_repr(&sentence, &table) {
            Ok(r) => r,
            Err(Error::AllOov(_)) => {
                skipped += 1;
                log::warn!(
                    "line {}: caption has no in-vocabulary words, skipped",
                    i + 1
                );
                continue;
            }
            Err(e) => return Err(e),
        };
        let weight = row.weight.unwrap_or(match row.origin {
            Origin::Mt => 1.0,
            Origin::Human => config.human_weight,
        });
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::Value {
                line: i + 1,
                message: format!("weight must be positive, got {weight}"),
            });
        }
        pairs.push(TrainingPair::new(repr, target.to_vec()).weighted(weight));
    }
    if pairs.is_empty() {
        return Err(Error::Config("no usable training pairs".into()));
    }
    log::info!("training on {} pairs ({skipped} skipped)", pairs.len());

    let lambda = match &config.lambda_grid {
        Some(grid) => {
            let l = select_lambda(&pairs, grid, CV_FOLDS, config.seed)?;
            log::info!("cross-validation picked lambda {l}");
            l
        }
        None => config.lambda,
    };
    let proj = train_projector(&pairs, lambda, config.language)?;
    log::info!(
        "normal-equation residual {:.3e}",
        normal_equation_residual(&proj, &pairs)?
    );
    proj.save(&config.output)?;
    Ok(proj)
}

/// Parses a comma-separated list of positive reals.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let grid: Vec<f64> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| *v > 0.0 && v.is_finite())
                .ok_or_else(|| Error::Config(format!("bad lambda {t:?}")))
        })
        .collect::<Result<_>>()?;
    let unique: BTreeSet<u64> = grid.iter().map(|v| v.to_bits()).collect();
    if grid.is_empty() || unique.len() != grid.len() {
        return Err(Error::Config(
            "lambda grid must be non-empty without repeats".into(),
        ));
    }
    Ok(grid)
}

pub fn report_format(explicit: Option<ReportFormat>, out: Option<&Path>) -> ReportFormat {
    explicit.unwrap_or_else(|| out.map(ReportFormat::from_path).unwrap_or_default())
}
