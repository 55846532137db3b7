//! Shared domain types: sentences, caption records, reference sets, metric
//! identities and score tables.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which side of the cross-lingual pair a sentence belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Source,
    Target,
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Language::Source => "source",
            Language::Target => "target",
        })
    }
}

impl FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "source" | "src" => Ok(Language::Source),
            "target" | "tgt" => Ok(Language::Target),
            other => Err(Error::Config(format!("unknown language tag {other:?}"))),
        }
    }
}

/// How raw text is cut into tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Segmentation {
    /// Split on runs of whitespace only. Pre-segmented input is respected.
    Whitespace,
    /// Whitespace split, then every CJK codepoint becomes its own token.
    CjkChar,
    /// Whitespace split; if the text carries no segmentation at all (a single
    /// whitespace-free run), CJK runs are split per codepoint.
    #[default]
    Auto,
}

impl FromStr for Segmentation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "whitespace" | "ws" => Ok(Segmentation::Whitespace),
            "cjk-char" | "cjk" | "char" => Ok(Segmentation::CjkChar),
            "auto" => Ok(Segmentation::Auto),
            other => Err(Error::Config(format!("unknown tokenizer policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerPolicy {
    pub segmentation: Segmentation,
    /// Lowercase non-CJK tokens.
    pub lowercase: bool,
    /// Trim leading/trailing punctuation from tokens; punctuation-only tokens vanish.
    pub strip_punctuation: bool,
}

impl Default for TokenizerPolicy {
    fn default() -> Self {
        Self {
            segmentation: Segmentation::Auto,
            lowercase: true,
            strip_punctuation: true,
        }
    }
}

impl TokenizerPolicy {
    pub fn whitespace() -> Self {
        Self {
            segmentation: Segmentation::Whitespace,
            ..Self::default()
        }
    }

    pub fn cjk_char() -> Self {
        Self {
            segmentation: Segmentation::CjkChar,
            ..Self::default()
        }
    }
}

pub(crate) fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF        // hiragana, katakana
        | 0x31F0..=0x31FF
        | 0x3400..=0x4DBF      // ext A
        | 0x4E00..=0x9FFF      // unified ideographs
        | 0xF900..=0xFAFF      // compatibility ideographs
        | 0x20000..=0x2EBEF    // ext B..F
        | 0x30000..=0x3134F)
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(c as u32,
            0x00A1..=0x00BF
            | 0x2010..=0x2027
            | 0x2030..=0x205E
            | 0x3000..=0x303F
            | 0xFE10..=0xFE1F
            | 0xFE30..=0xFE4F
            | 0xFF01..=0xFF0F
            | 0xFF1A..=0xFF20
            | 0xFF3B..=0xFF40
            | 0xFF5B..=0xFF65)
}

fn split_cjk(token: &str, out: &mut Vec<String>) {
    let mut run = String::new();
    for c in token.chars() {
        if is_cjk(c) {
            if !run.is_empty() {
                out.push(std::mem::take(&mut run));
            }
            out.push(c.to_string());
        } else {
            run.push(c);
        }
    }
    if !run.is_empty() {
        out.push(run);
    }
}

/// A tokenized caption together with its language tag and original text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    tokens: Vec<String>,
    language: Language,
    raw: String,
}

impl Sentence {
    /// Builds a sentence from tokens that are already final. Tokens must be
    /// non-empty and whitespace-free.
    pub fn from_tokens<I, S>(tokens: I, language: Language) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if tokens.is_empty() {
            return Err(Error::EmptySentence(String::new()));
        }
        if let Some(bad) = tokens
            .iter()
            .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return Err(Error::Config(format!("invalid token {bad:?}")));
        }
        let raw = tokens.join(" ");
        Ok(Self {
            tokens,
            language,
            raw,
        })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Cuts `raw` into a [`Sentence`] according to `policy`.
pub fn tokenize(raw: &str, language: Language, policy: &TokenizerPolicy) -> Result<Sentence> {
    let pieces: Vec<&str> = raw.split_whitespace().collect();
    let split_chars = match policy.segmentation {
        Segmentation::Whitespace => false,
        Segmentation::CjkChar => true,
        Segmentation::Auto => pieces.len() == 1,
    };

    let mut tokens = Vec::with_capacity(pieces.len());
    for piece in pieces {
        let piece = if policy.strip_punctuation {
            piece.trim_matches(is_punctuation)
        } else {
            piece
        };
        if piece.is_empty() {
            continue;
        }
        if split_chars && piece.chars().any(is_cjk) {
            split_cjk(piece, &mut tokens);
        } else {
            tokens.push(piece.to_string());
        }
    }

    if policy.strip_punctuation {
        // CJK splitting can expose inner punctuation such as "旁,其中".
        tokens.retain_mut(|t| {
            let trimmed = t.trim_matches(is_punctuation);
            if trimmed.len() != t.len() {
                *t = trimmed.to_string();
            }
            !t.is_empty()
        });
    }
    if policy.lowercase {
        for t in tokens.iter_mut() {
            if !t.chars().any(is_cjk) {
                *t = t.to_lowercase();
            }
        }
    }

    if tokens.is_empty() {
        return Err(Error::EmptySentence(raw.to_string()));
    }
    Ok(Sentence {
        tokens,
        language,
        raw: raw.to_string(),
    })
}

/// One model's caption for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub image_id: String,
    pub model_id: String,
    pub candidate: Sentence,
}

/// All references attached to an image. `target_refs` and `mt_refs` may be
/// empty; reference-free evaluation only needs `source_refs`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReferenceSet {
    pub image_id: String,
    pub source_refs: Vec<Sentence>,
    pub target_refs: Vec<Sentence>,
    pub mt_refs: Vec<Sentence>,
}

/// Metric identities. Declaration order is the report column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "BLEU4")]
    Bleu4,
    #[serde(rename = "METEOR")]
    Meteor,
    #[serde(rename = "ROUGE_L")]
    RougeL,
    #[serde(rename = "CIDER")]
    Cider,
    #[serde(rename = "BMRC")]
    Bmrc,
    #[serde(rename = "WMDREL")]
    WmdRel,
    #[serde(rename = "CLINREL")]
    ClinRel,
    #[serde(rename = "CMEDREL")]
    CmedRel,
    #[serde(rename = "WCC")]
    Wcc,
}

impl MetricKind {
    pub const ALL: [MetricKind; 9] = [
        MetricKind::Bleu4,
        MetricKind::Meteor,
        MetricKind::RougeL,
        MetricKind::Cider,
        MetricKind::Bmrc,
        MetricKind::WmdRel,
        MetricKind::ClinRel,
        MetricKind::CmedRel,
        MetricKind::Wcc,
    ];

    /// Reference-based metrics that make up BMRC.
    pub const STANDARD: [MetricKind; 4] = [
        MetricKind::Bleu4,
        MetricKind::Meteor,
        MetricKind::RougeL,
        MetricKind::Cider,
    ];

    /// Target-reference-free metrics that make up WCC.
    pub const PROPOSED: [MetricKind; 3] =
        [MetricKind::WmdRel, MetricKind::ClinRel, MetricKind::CmedRel];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Bleu4 => "BLEU4",
            MetricKind::Meteor => "METEOR",
            MetricKind::RougeL => "ROUGE_L",
            MetricKind::Cider => "CIDER",
            MetricKind::Bmrc => "BMRC",
            MetricKind::WmdRel => "WMDREL",
            MetricKind::ClinRel => "CLINREL",
            MetricKind::CmedRel => "CMEDREL",
            MetricKind::Wcc => "WCC",
        }
    }

    pub fn is_aggregate(self) -> bool {
        matches!(self, MetricKind::Bmrc | MetricKind::Wcc)
    }

    /// Components summed into an aggregate; empty for non-aggregates.
    pub fn components(self) -> &'static [MetricKind] {
        match self {
            MetricKind::Bmrc => &Self::STANDARD,
            MetricKind::Wcc => &Self::PROPOSED,
            _ => &[],
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    /// Accepts the canonical names and the usual spellings ("BLEU-4",
    /// "ROUGE-L", "CIDEr", "WMDRel", ...), case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .flat_map(char::to_uppercase)
            .collect();
        MetricKind::ALL
            .into_iter()
            .find(|m| m.name().replace('_', "") == key)
            .ok_or_else(|| Error::Config(format!("unknown metric {s:?}")))
    }
}

/// Scores of one model, keyed by metric.
pub type ScoreRow = BTreeMap<MetricKind, f64>;

fn sum_components(row: &ScoreRow, aggregate: MetricKind) -> Result<f64> {
    aggregate.components().iter().try_fold(0.0, |acc, m| {
        row.get(m).map(|v| acc + v).ok_or(Error::MissingMetric(*m))
    })
}

/// BLEU-4 + METEOR + ROUGE-L + CIDEr.
pub fn bmrc(row: &ScoreRow) -> Result<f64> {
    sum_components(row, MetricKind::Bmrc)
}

/// WMDRel + CLinRel + CMedRel.
pub fn wcc(row: &ScoreRow) -> Result<f64> {
    sum_components(row, MetricKind::Wcc)
}

/// Appends BMRC and/or WCC to `row`. A family is aggregated when any of its
/// components is present; a partially present family is an error, as is a
/// row with no components at all. Existing entries are left untouched.
pub fn aggregate(row: &ScoreRow) -> Result<ScoreRow> {
    let mut out = row.clone();
    let mut any = false;
    for agg in [MetricKind::Bmrc, MetricKind::Wcc] {
        if agg.components().iter().any(|m| row.contains_key(m)) {
            any = true;
            let value = sum_components(row, agg)?;
            out.entry(agg).or_insert(value);
        }
    }
    if !any {
        return Err(Error::MissingMetric(MetricKind::Bleu4));
    }
    Ok(out)
}

/// Model x metric matrix. Scores are stored at full precision; `scale` is
/// the reporting multiplier the stored values already include.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub rows: BTreeMap<String, ScoreRow>,
    pub scale: f64,
}

impl Default for ScoreTable {
    fn default() -> Self {
        Self::new(100.0)
    }
}

impl ScoreTable {
    pub fn new(scale: f64) -> Self {
        Self {
            rows: BTreeMap::new(),
            scale,
        }
    }

    pub fn insert(&mut self, model: impl Into<String>, metric: MetricKind, score: f64) {
        self.rows
            .entry(model.into())
            .or_default()
            .insert(metric, score);
    }

    pub fn get(&self, model: &str, metric: MetricKind) -> Option<f64> {
        self.rows.get(model).and_then(|r| r.get(&metric)).copied()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Metrics present in at least one row, in declaration order.
    pub fn metrics(&self) -> Vec<MetricKind> {
        MetricKind::ALL
            .into_iter()
            .filter(|m| self.rows.values().any(|r| r.contains_key(m)))
            .collect()
    }

    /// Metric present in every row.
    pub fn has_metric(&self, metric: MetricKind) -> bool {
        !self.rows.is_empty() && self.rows.values().all(|r| r.contains_key(&metric))
    }

    /// Scores of `metric` for every model, or `MissingMetric` if any row lacks it.
    pub fn column(&self, metric: MetricKind) -> Result<BTreeMap<String, f64>> {
        self.rows
            .iter()
            .map(|(model, row)| {
                row.get(&metric)
                    .map(|v| (model.clone(), *v))
                    .ok_or(Error::MissingMetric(metric))
            })
            .collect()
    }

    /// Adds BMRC/WCC to every row where the component family is complete.
    pub fn add_aggregates(&mut self) {
        for row in self.rows.values_mut() {
            for agg in [MetricKind::Bmrc, MetricKind::Wcc] {
                if !row.contains_key(&agg) {
                    if let Ok(v) = sum_components(row, agg) {
                        row.insert(agg, v);
                    }
                }
            }
        }
    }

    /// Checks that stored aggregates equal the sum of their components.
    pub fn validate(&self) -> Result<()> {
        for (model, row) in &self.rows {
            for agg in [MetricKind::Bmrc, MetricKind::Wcc] {
                if let Some(stored) = row.get(&agg) {
                    let sum = sum_components(row, agg)?;
                    if (stored - sum).abs() > 1e-9 {
                        return Err(Error::Config(format!(
                            "{model}: {agg} = {stored} but components sum to {sum}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Report row order: descending BMRC when every row has it, otherwise by
    /// model id. Ties fall back to model id.
    pub fn ordered_models(&self) -> Vec<&str> {
        let mut models: Vec<&str> = self.rows.keys().map(String::as_str).collect();
        if self.has_metric(MetricKind::Bmrc) {
            models.sort_by(|a, b| {
                let sa = self.rows[*a][&MetricKind::Bmrc];
                let sb = self.rows[*b][&MetricKind::Bmrc];
                sb.total_cmp(&sa).then_with(|| a.cmp(b))
            });
        }
        models
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &Sentence) -> Vec<&str> {
        s.tokens().iter().map(String::as_str).collect()
    }

    #[test]
    fn whitespace_split() {
        let s = tokenize(
            "a red stop sign",
            Language::Source,
            &TokenizerPolicy::whitespace(),
        )
        .unwrap();
        assert_eq!(toks(&s), ["a", "red", "stop", "sign"]);
        assert_eq!(s.raw(), "a red stop sign");
    }

    #[test]
    fn cjk_char_split() {
        let s = tokenize("两个女人", Language::Target, &TokenizerPolicy::cjk_char()).unwrap();
        assert_eq!(toks(&s), ["两", "个", "女", "人"]);
    }

    #[test]
    fn presegmented_chinese_is_respected() {
        let s = tokenize(
            "两个 女人 站在",
            Language::Target,
            &TokenizerPolicy::whitespace(),
        )
        .unwrap();
        assert_eq!(toks(&s), ["两个", "女人", "站在"]);
        let auto = tokenize(
            "两个 女人 站在",
            Language::Target,
            &TokenizerPolicy::default(),
        )
        .unwrap();
        assert_eq!(toks(&auto), ["两个", "女人", "站在"]);
    }

    #[test]
    fn auto_falls_back_to_chars_on_raw_cjk() {
        let s = tokenize("两个女人", Language::Target, &TokenizerPolicy::default()).unwrap();
        assert_eq!(toks(&s), ["两", "个", "女", "人"]);
    }

    #[test]
    fn mixed_script_and_punctuation() {
        let s = tokenize(
            "两个人坐在桌子旁,其中一个",
            Language::Target,
            &TokenizerPolicy::cjk_char(),
        )
        .unwrap();
        assert!(!s.tokens().iter().any(|t| t == ","));
        let s = tokenize(
            "A Stop-Sign, near AI模型.",
            Language::Source,
            &TokenizerPolicy::cjk_char(),
        )
        .unwrap();
        assert_eq!(toks(&s), ["a", "stop-sign", "near", "ai", "模", "型"]);
    }

    #[test]
    fn flags_can_be_disabled() {
        let policy = TokenizerPolicy {
            segmentation: Segmentation::Whitespace,
            lowercase: false,
            strip_punctuation: false,
        };
        let s = tokenize("A sign .", Language::Source, &policy).unwrap();
        assert_eq!(toks(&s), ["A", "sign", "."]);
    }

    #[test]
    fn empty_sentence_is_rejected() {
        for raw in ["", "   ", " . , !"] {
            assert!(matches!(
                tokenize(raw, Language::Source, &TokenizerPolicy::default()),
                Err(Error::EmptySentence(_))
            ));
        }
    }

    #[test]
    fn from_tokens_validates() {
        assert!(Sentence::from_tokens(["a", "b c"], Language::Source).is_err());
        assert!(Sentence::from_tokens(Vec::<String>::new(), Language::Source).is_err());
        assert_eq!(
            Sentence::from_tokens(["a", "b"], Language::Target)
                .unwrap()
                .raw(),
            "a b"
        );
    }

    fn row(entries: &[(MetricKind, f64)]) -> ScoreRow {
        entries.iter().copied().collect()
    }

    #[test]
    fn aggregates_table_two_row() {
        use MetricKind::*;
        let r = row(&[
            (Bleu4, 33.5),
            (Meteor, 29.4),
            (RougeL, 52.7),
            (Cider, 97.5),
            (WmdRel, 51.1),
            (ClinRel, 42.7),
            (CmedRel, 33.5),
        ]);
        let out = aggregate(&r).unwrap();
        assert!((out[&Bmrc] - 213.1).abs() < 1e-9);
        assert!((out[&Wcc] - 127.3).abs() < 1e-9);
        assert_eq!(out[&Bleu4], 33.5);
    }

    #[test]
    fn aggregate_zero_and_missing() {
        use MetricKind::*;
        let out = aggregate(&row(&[
            (Bleu4, 0.0),
            (Meteor, 0.0),
            (RougeL, 0.0),
            (Cider, 0.0),
        ]))
        .unwrap();
        assert_eq!(out[&Bmrc], 0.0);
        assert!(!out.contains_key(&Wcc));

        let err = aggregate(&row(&[(WmdRel, 1.0), (CmedRel, 2.0)])).unwrap_err();
        assert!(matches!(err, Error::MissingMetric(ClinRel)));
        assert!(matches!(aggregate(&row(&[])), Err(Error::MissingMetric(_))));
    }

    #[test]
    fn metric_names_parse_leniently() {
        assert_eq!("BLEU-4".parse::<MetricKind>().unwrap(), MetricKind::Bleu4);
        assert_eq!("ROUGE-L".parse::<MetricKind>().unwrap(), MetricKind::RougeL);
        assert_eq!("CIDEr".parse::<MetricKind>().unwrap(), MetricKind::Cider);
        assert_eq!("WMDRel".parse::<MetricKind>().unwrap(), MetricKind::WmdRel);
        assert_eq!(
            "cmedrel".parse::<MetricKind>().unwrap(),
            MetricKind::CmedRel
        );
        assert!("SPICE".parse::<MetricKind>().is_err());
        for m in MetricKind::ALL {
            assert_eq!(m.name().parse::<MetricKind>().unwrap(), m);
        }
    }

    #[test]
    fn table_ordering_and_validation() {
        use MetricKind::*;
        let mut t = ScoreTable::default();
        for (m, b) in [("x", 10.0), ("y", 30.0), ("z", 20.0)] {
            t.insert(m, Bleu4, b);
            t.insert(m, Meteor, 1.0);
            t.insert(m, RougeL, 1.0);
            t.insert(m, Cider, 1.0);
        }
        assert_eq!(t.ordered_models(), ["x", "y", "z"]);
        t.add_aggregates();
        t.validate().unwrap();
        assert_eq!(t.ordered_models(), ["y", "z", "x"]);
        t.insert("x", Bmrc, 0.0);
        assert!(t.validate().is_err());
    }
}
