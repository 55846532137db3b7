use std::path::PathBuf;
use std::str::FromStr;

use capeval_core::{Error, MetricKind, ReportFormat, Result, TokenizerPolicy};

/// Scenario I has source-language references; scenario II has only images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scenario {
    #[default]
    WithSourceRefs,
    ImageOnly,
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(Scenario::WithSourceRefs),
            "II" | "2" => Ok(Scenario::ImageOnly),
            other => Err(Error::Config(format!(
                "unknown scenario {other:?}, expected I or II"
            ))),
        }
    }
}

/// How the WMD normalizer is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ZMode {
    /// Largest WMD observed in the batch (two passes).
    #[default]
    BatchMax,
    Fixed(f64),
}

#[derive(Debug, Clone, Default)]
pub struct InputPaths {
    pub captions: PathBuf,
    pub references: Option<PathBuf>,
    pub embeddings_source: Option<PathBuf>,
    pub embeddings_target: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub projector_source: Option<PathBuf>,
    pub projector_target: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
}

/// Everything `eval` needs.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub paths: InputPaths,
    pub tokenizer: TokenizerPolicy,
    pub scenario: Scenario,
    pub z_mode: ZMode,
    /// `None` selects every metric the scenario and inputs allow.
    pub metrics: Option<Vec<MetricKind>>,
    /// Average over every source / MT reference instead of using the first.
    pub all_refs: bool,
    /// Worker threads; 0 lets the pool decide, 1 runs sequentially.
    pub threads: usize,
    pub output: Option<PathBuf>,
    pub format: ReportFormat,
    pub precision: Option<usize>,
}

pub fn parse_metric_list(s: &str) -> Result<Vec<MetricKind>> {
    let list: Vec<MetricKind> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if list.is_empty() {
        return Err(Error::Config("empty metric list".into()));
    }
    Ok(list)
}
