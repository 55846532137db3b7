//! Ingestion of embedding tables, visual features and caption/reference
//! streams, and serialization of score and correlation reports.
//!
//! Vector files use the word2vec text layout: a header line
//! `<count> <dim>` followed by one `<key> <f1> ... <f_dim>` line per entry.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    tokenize, CaptionRecord, Language, MetricKind, ReferenceSet, ScoreRow, ScoreTable, Sentence,
    TokenizerPolicy,
};
use crate::rank::CorrelationMatrix;

/// Dense string-keyed vectors of a fixed dimension, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorTable {
    dim: usize,
    keys: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl VectorTable {
    pub fn new(dim: usize) -> Self {
        Self::with_capacity(dim, 0)
    }

    pub fn with_capacity(dim: usize, n: usize) -> Self {
        Self {
            dim,
            keys: Vec::with_capacity(n),
            index: HashMap::with_capacity(n),
            data: Vec::with_capacity(n * dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn insert(&mut self, key: impl Into<String>, vector: &[f64]) -> Result<()> {
        let key = key.into();
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::value(0, format!("non-finite component for {key:?}")));
        }
        if self.index.contains_key(&key) {
            return Err(Error::DuplicateToken(key));
        }
        self.index.insert(key.clone(), self.keys.len());
        self.keys.push(key);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.index
            .get(key)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    /// Entries in file/insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.keys
            .iter()
            .zip(self.data.chunks_exact(self.dim.max(1)))
            .map(|(k, v)| (k.as_str(), v))
    }

    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (count, dim) = loop {
            let Some((i, line)) = lines.next() else {
                return Err(Error::format(1, "missing header"));
            };
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::format(i + 1, "header must be \"<count> <dim>\""));
            }
            let count: usize = fields[0]
                .parse()
                .map_err(|_| Error::format(i + 1, "invalid count"))?;
            let dim: usize = fields[1]
                .parse()
                .map_err(|_| Error::format(i + 1, "invalid dimension"))?;
            if dim == 0 {
                return Err(Error::format(i + 1, "dimension must be positive"));
            }
            break (count, dim);
        };

        let mut table = Self::with_capacity(dim, count);
        let mut row = Vec::with_capacity(dim);
        let mut last_line = 1;
        for (i, line) in lines {
            let line = line?;
            let lineno = i + 1;
            last_line = lineno;
            if line.trim().is_empty() {
                continue;
            }
            if table.len() == count {
                return Err(Error::format(
                    lineno,
                    format!("more rows than the {count} declared"),
                ));
            }
            let mut fields = line.split_ascii_whitespace();
            let key = fields.next().expect("non-empty line");
            row.clear();
            for field in fields {
                let v = f64::from_str(field)
                    .map_err(|_| Error::format(lineno, format!("invalid number {field:?}")))?;
                row.push(v);
            }
            if row.len() != dim {
                return Err(Error::format(
                    lineno,
                    format!("expected {dim} values, found {}", row.len()),
                ));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::value(
                    lineno,
                    format!("non-finite value for {key:?}"),
                ));
            }
            if table.contains(key) {
                return Err(Error::DuplicateToken(key.to_string()));
            }
            table.index.insert(key.to_string(), table.keys.len());
            table.keys.push(key.to_string());
            table.data.extend_from_slice(&row);
        }
        if table.len() != count {
            return Err(Error::format(
                last_line + 1,
                format!("expected {count} rows, found {}", table.len()),
            ));
        }
        Ok(table)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim)?;
        for (key, v) in self.iter() {
            write!(w, "{key}")?;
            for x in v {
                write!(w, " {x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Token -> word vector map for one language.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub language: Language,
    pub vectors: VectorTable,
}

impl EmbeddingTable {
    pub fn new(dim: usize, language: Language) -> Self {
        Self {
            language,
            vectors: VectorTable::new(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.vectors.dim()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token)
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: &[f64]) -> Result<()> {
        self.vectors.insert(token, vector)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Image id -> visual feature vector. Every vector has non-zero norm.
#[derive(Debug, Clone, PartialEq)]
pub struct VisualFeatures {
    pub vectors: VectorTable,
}

impl VisualFeatures {
    pub fn from_table(vectors: VectorTable) -> Result<Self> {
        for (key, v) in vectors.iter() {
            if v.iter().all(|x| *x == 0.0) {
                return Err(Error::value(
                    0,
                    format!("zero-norm feature for image {key:?}"),
                ));
            }
        }
        Ok(Self { vectors })
    }

    pub fn dim(&self) -> usize {
        self.vectors.dim()
    }

    pub fn get(&self, image_id: &str) -> Option<&[f64]> {
        self.vectors.get(image_id)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

pub fn parse_embeddings<R: BufRead>(reader: R, language: Language) -> Result<EmbeddingTable> {
    Ok(EmbeddingTable {
        language,
        vectors: VectorTable::parse(reader)?,
    })
}

pub fn load_embeddings(path: impl AsRef<Path>, language: Language) -> Result<EmbeddingTable> {
    parse_embeddings(open(path.as_ref())?, language)
}

pub fn parse_features<R: BufRead>(reader: R) -> Result<VisualFeatures> {
    let table = VectorTable::parse(reader)?;
    // Locate the offending row for a useful line number: header is line 1.
    for (i, (key, v)) in table.iter().enumerate() {
        if v.iter().all(|x| *x == 0.0) {
            return Err(Error::value(
                i + 2,
                format!("zero-norm feature for image {key:?}"),
            ));
        }
    }
    Ok(VisualFeatures { vectors: table })
}

pub fn load_features(path: impl AsRef<Path>) -> Result<VisualFeatures> {
    parse_features(open(path.as_ref())?)
}

#[derive(Debug, Deserialize)]
struct CaptionLine {
    image_id: String,
    model_id: String,
    caption: String,
}

#[derive(Debug, Deserialize)]
struct ReferenceLine {
    image_id: String,
    #[serde(default)]
    source: Vec<String>,
    #[serde(default)]
    target: Vec<String>,
    #[serde(default)]
    mt: Vec<String>,
}

fn json_lines<T, R>(reader: R) -> impl Iterator<Item = Result<(usize, T)>>
where
    T: for<'de> Deserialize<'de>,
    R: BufRead,
{
    reader.lines().enumerate().filter_map(|(i, line)| {
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(e.into())),
        };
        if line.trim().is_empty() {
            return None;
        }
        Some(
            serde_json::from_str::<T>(&line)
                .map(|v| (i + 1, v))
                .map_err(|e| Error::format(i + 1, e.to_string())),
        )
    })
}

fn tokenize_at(
    line: usize,
    raw: &str,
    language: Language,
    policy: &TokenizerPolicy,
) -> Result<Sentence> {
    tokenize(raw, language, policy).map_err(|e| match e {
        Error::EmptySentence(s) => Error::format(line, format!("empty sentence {s:?}")),
        other => other,
    })
}

pub fn parse_captions<R: BufRead>(
    reader: R,
    policy: &TokenizerPolicy,
) -> Result<Vec<CaptionRecord>> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for item in json_lines::<CaptionLine, _>(reader) {
        let (line, row) = item?;
        if !seen.insert((row.image_id.clone(), row.model_id.clone())) {
            return Err(Error::format(
                line,
                format!(
                    "duplicate caption for image {:?}, model {:?}",
                    row.image_id, row.model_id
                ),
            ));
        }
        let candidate = tokenize_at(line, &row.caption, Language::Target, policy)?;
        out.push(CaptionRecord {
            image_id: row.image_id,
            model_id: row.model_id,
            candidate,
        });
    }
    Ok(out)
}

pub fn load_captions(
    path: impl AsRef<Path>,
    policy: &TokenizerPolicy,
) -> Result<Vec<CaptionRecord>> {
    parse_captions(open(path.as_ref())?, policy)
}

pub fn parse_references<R: BufRead>(
    reader: R,
    policy: &TokenizerPolicy,
) -> Result<BTreeMap<String, ReferenceSet>> {
    let mut out = BTreeMap::new();
    for item in json_lines::<ReferenceLine, _>(reader) {
        let (line, row) = item?;
        let sentences = |raws: &[String], lang| -> Result<Vec<Sentence>> {
            raws.iter()
                .map(|r| tokenize_at(line, r, lang, policy))
                .collect()
        };
        let set = ReferenceSet {
            image_id: row.image_id.clone(),
            source_refs: sentences(&row.source, Language::Source)?,
            target_refs: sentences(&row.target, Language::Target)?,
            mt_refs: sentences(&row.mt, Language::Target)?,
        };
        if out.insert(row.image_id.clone(), set).is_some() {
            return Err(Error::format(
                line,
                format!("duplicate references for image {:?}", row.image_id),
            ));
        }
    }
    Ok(out)
}

pub fn load_references(
    path: impl AsRef<Path>,
    policy: &TokenizerPolicy,
) -> Result<BTreeMap<String, ReferenceSet>> {
    parse_references(open(path.as_ref())?, policy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Config(format!("unknown report format {other:?}"))),
        }
    }
}

impl ReportFormat {
    /// Guesses the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

/// Anything `write_report` can serialize.
#[derive(Debug, Clone, Copy)]
pub enum Report<'a> {
    Scores(&'a ScoreTable),
    Correlation(&'a CorrelationMatrix),
}

/// Number formatting for reports. `None` writes the shortest representation
/// that round-trips exactly; `Some(k)` rounds to `k` decimals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReportOptions {
    pub format: ReportFormat,
    pub precision: Option<usize>,
}

fn fmt_num(v: f64, precision: Option<usize>) -> String {
    match precision {
        Some(p) => {
            let s = format!("{v:.p$}");
            // Avoid "-0.0" after rounding tiny negatives.
            if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
                s[1..].to_string()
            } else {
                s
            }
        }
        None => format!("{v}"),
    }
}

fn round_to(v: f64, precision: Option<usize>) -> f64 {
    match precision {
        Some(p) => fmt_num(v, Some(p)).parse().unwrap_or(v),
        None => v,
    }
}

#[derive(Serialize, Deserialize)]
struct ScoreTableJson {
    scale: f64,
    metrics: Vec<MetricKind>,
    rows: Vec<ScoreRowJson>,
}

#[derive(Serialize, Deserialize)]
struct ScoreRowJson {
    model: String,
    scores: ScoreRow,
}

#[derive(Serialize, Deserialize)]
struct CorrelationJson {
    rows: Vec<String>,
    columns: Vec<String>,
    values: Vec<Vec<f64>>,
}

pub fn render_report<W: Write>(report: Report<'_>, w: W, opts: ReportOptions) -> Result<()> {
    match report {
        Report::Scores(t) => render_scores(t, w, opts),
        Report::Correlation(c) => render_correlation(c, w, opts),
    }
}

fn render_scores<W: Write>(table: &ScoreTable, mut w: W, opts: ReportOptions) -> Result<()> {
    let metrics = table.metrics();
    let models = table.ordered_models();
    match opts.format {
        ReportFormat::Csv => {
            let mut out = csv::Writer::from_writer(&mut w);
            let mut header = vec!["model".to_string()];
            header.extend(metrics.iter().map(|m| m.name().to_string()));
            out.write_record(&header)?;
            for model in models {
                let row = &table.rows[model];
                let mut record = vec![model.to_string()];
                record.extend(metrics.iter().map(|m| {
                    row.get(m)
                        .map(|v| fmt_num(*v, opts.precision))
                        .unwrap_or_default()
                }));
                out.write_record(&record)?;
            }
            out.flush()?;
        }
        ReportFormat::Json => {
            let doc = ScoreTableJson {
                scale: table.scale,
                metrics,
                rows: models
                    .into_iter()
                    .map(|m| ScoreRowJson {
                        model: m.to_string(),
                        scores: table.rows[m]
                            .iter()
                            .map(|(k, v)| (*k, round_to(*v, opts.precision)))
                            .collect(),
                    })
                    .collect(),
            };
            serde_json::to_writer_pretty(&mut w, &doc)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

fn render_correlation<W: Write>(
    matrix: &CorrelationMatrix,
    mut w: W,
    opts: ReportOptions,
) -> Result<()> {
    match opts.format {
        ReportFormat::Csv => {
            let mut out = csv::Writer::from_writer(&mut w);
            let mut header = vec!["metric".to_string()];
            header.extend(matrix.columns.iter().cloned());
            out.write_record(&header)?;
            for (label, values) in matrix.rows.iter().zip(&matrix.values) {
                let mut record = vec![label.clone()];
                record.extend(values.iter().map(|v| fmt_num(*v, opts.precision)));
                out.write_record(&record)?;
            }
            out.flush()?;
        }
        ReportFormat::Json => {
            let doc = CorrelationJson {
                rows: matrix.rows.clone(),
                columns: matrix.columns.clone(),
                values: matrix
                    .values
                    .iter()
                    .map(|r| r.iter().map(|v| round_to(*v, opts.precision)).collect())
                    .collect(),
            };
            serde_json::to_writer_pretty(&mut w, &doc)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

pub fn write_report(report: Report<'_>, path: impl AsRef<Path>, opts: ReportOptions) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    render_report(report, &mut w, opts)?;
    w.flush()?;
    Ok(())
}

/// Reads a score table from CSV (first column = model id, remaining headers
/// = metric names) or from the JSON layout `write_report` emits.
pub fn parse_score_table<R: Read>(reader: R, format: ReportFormat) -> Result<ScoreTable> {
    match format {
        ReportFormat::Json => {
            let doc: ScoreTableJson = serde_json::from_reader(reader)?;
            let mut table = ScoreTable::new(doc.scale);
            for row in doc.rows {
                if table.rows.insert(row.model.clone(), row.scores).is_some() {
                    return Err(Error::Config(format!("duplicate model {:?}", row.model)));
                }
            }
            Ok(table)
        }
        ReportFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new()
                .trim(csv::Trim::All)
                .from_reader(reader);
            let headers = rdr.headers()?.clone();
            if headers.len() < 2 {
                return Err(Error::format(
                    1,
                    "need a model column and at least one metric",
                ));
            }
            let metrics: Vec<MetricKind> = headers
                .iter()
                .skip(1)
                .map(|h| {
                    h.parse()
                        .map_err(|_| Error::format(1, format!("unknown metric {h:?}")))
                })
                .collect::<Result<_>>()?;
            let mut table = ScoreTable::default();
            for (i, record) in rdr.records().enumerate() {
                let line = i + 2;
                let record = record?;
                let model = record.get(0).unwrap_or_default().to_string();
                if model.is_empty() {
                    return Err(Error::format(line, "empty model id"));
                }
                if table.rows.contains_key(&model) {
                    return Err(Error::format(line, format!("duplicate model {model:?}")));
                }
                let mut row = ScoreRow::new();
                for (m, cell) in metrics.iter().zip(record.iter().skip(1)) {
                    if cell.is_empty() {
                        continue;
                    }
                    let v: f64 = cell
                        .parse()
                        .map_err(|_| Error::format(line, format!("invalid number {cell:?}")))?;
                    if !v.is_finite() {
                        return Err(Error::value(line, format!("non-finite score {cell:?}")));
                    }
                    row.insert(*m, v);
                }
                table.rows.insert(model, row);
            }
            Ok(table)
        }
    }
}

pub fn load_score_table(path: impl AsRef<Path>) -> Result<ScoreTable> {
    let path = path.as_ref();
    parse_score_table(open(path)?, ReportFormat::from_path(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(text: &str) -> Result<EmbeddingTable> {
        parse_embeddings(text.as_bytes(), Language::Target)
    }

    #[test]
    fn minimal_embedding_file() {
        let t = emb("2 3\na 1 0 0\nb 0 1 0").unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("a").unwrap(), &[1.0, 0.0, 0.0]);
        assert_eq!(t.get("b").unwrap(), &[0.0, 1.0, 0.0]);
        assert!(t.get("c").is_none());
    }

    #[test]
    fn scientific_notation() {
        let t = emb("1 2\nx 1e-3 -2.5E2\n").unwrap();
        assert_eq!(t.get("x").unwrap(), &[1e-3, -250.0]);
    }

    #[test]
    fn arity_mismatch_reports_line() {
        match emb("1 2\na 1 0 0").unwrap_err() {
            Error::Format { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e:?}"),
        }
        match emb("2 2\na 1 0\nb 1").unwrap_err() {
            Error::Format { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn row_count_mismatch() {
        assert!(matches!(
            emb("3 1\na 1\nb 2"),
            Err(Error::Format { line: 4, .. })
        ));
        assert!(matches!(
            emb("1 1\na 1\nb 2"),
            Err(Error::Format { line: 3, .. })
        ));
        assert!(matches!(
            emb("1 1 1\na 1"),
            Err(Error::Format { line: 1, .. })
        ));
        assert!(matches!(emb(""), Err(Error::Format { line: 1, .. })));
    }

    #[test]
    fn duplicate_token() {
        match emb("2 2\na 1 0\na 0 1").unwrap_err() {
            Error::DuplicateToken(t) => assert_eq!(t, "a"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn non_finite_and_garbage() {
        assert!(matches!(
            emb("1 2\na NaN 0"),
            Err(Error::Value { line: 2, .. })
        ));
        assert!(matches!(
            emb("1 2\na inf 0"),
            Err(Error::Value { line: 2, .. })
        ));
        assert!(matches!(
            emb("1 2\na x 0"),
            Err(Error::Format { line: 2, .. })
        ));
    }

    #[test]
    fn zero_norm_feature_rejected() {
        assert!(parse_features("2 2\nimg1 1 0\nimg2 0 0".as_bytes()).is_err());
        let f = parse_features("1 2\nimg1 0 3".as_bytes()).unwrap();
        assert_eq!(f.get("img1").unwrap(), &[0.0, 3.0]);
    }

    #[test]
    fn vector_table_round_trip() {
        let text = "3 2\nb 0.1 -2\na 1e-300 3.141592653589793\nc 0 0\n";
        let t = VectorTable::parse(text.as_bytes()).unwrap();
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        let back = VectorTable::parse(buf.as_slice()).unwrap();
        assert_eq!(t, back);
        assert_eq!(
            back.iter().map(|(k, _)| k).collect::<Vec<_>>(),
            ["b", "a", "c"]
        );
    }

    #[test]
    fn captions_and_references() {
        let policy = TokenizerPolicy::default();
        let caps = "{\"image_id\":\"1\",\"model_id\":\"m\",\"caption\":\"两个 女人\"}\n\n\
                    {\"image_id\":\"2\",\"model_id\":\"m\",\"caption\":\"一个钟\"}\n";
        let caps = parse_captions(caps.as_bytes(), &policy).unwrap();
        assert_eq!(caps.len(), 2);
        assert_eq!(caps[0].candidate.tokens(), ["两个", "女人"]);
        assert_eq!(caps[1].candidate.tokens(), ["一", "个", "钟"]);

        let refs = "{\"image_id\":\"1\",\"source\":[\"Two women.\"],\"mt\":[\"两个 女人\"]}\n";
        let refs = parse_references(refs.as_bytes(), &policy).unwrap();
        let r = &refs["1"];
        assert_eq!(r.source_refs[0].tokens(), ["two", "women"]);
        assert!(r.target_refs.is_empty());
        assert_eq!(r.mt_refs.len(), 1);
    }

    #[test]
    fn malformed_json_line_number() {
        let policy = TokenizerPolicy::default();
        let caps = "{\"image_id\":\"1\",\"model_id\":\"m\",\"caption\":\"a\"}\n{oops}\n";
        assert!(matches!(
            parse_captions(caps.as_bytes(), &policy),
            Err(Error::Format { line: 2, .. })
        ));
        let dup = "{\"image_id\":\"1\",\"model_id\":\"m\",\"caption\":\"a\"}\n\
                   {\"image_id\":\"1\",\"model_id\":\"m\",\"caption\":\"b\"}\n";
        assert!(matches!(
            parse_captions(dup.as_bytes(), &policy),
            Err(Error::Format { line: 2, .. })
        ));
    }

    fn sample_table() -> ScoreTable {
        let mut t = ScoreTable::default();
        t.insert("low", MetricKind::Bleu4, 1.0 / 3.0);
        t.insert("high", MetricKind::Bleu4, 2.0);
        t.insert("high", MetricKind::CmedRel, -0.25);
        for m in ["low", "high"] {
            for k in [MetricKind::Meteor, MetricKind::RougeL, MetricKind::Cider] {
                t.insert(m, k, 0.1);
            }
        }
        t.add_aggregates();
        t
    }

    #[test]
    fn score_csv_layout_and_round_trip() {
        let t = sample_table();
        let mut buf = Vec::new();
        render_report(Report::Scores(&t), &mut buf, ReportOptions::default()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "model,BLEU4,METEOR,ROUGE_L,CIDER,BMRC,CMEDREL"
        );
        assert!(lines.next().unwrap().starts_with("high,2,"));
        let back = parse_score_table(buf.as_slice(), ReportFormat::Csv).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn score_json_round_trip() {
        let t = sample_table();
        let mut buf = Vec::new();
        let opts = ReportOptions {
            format: ReportFormat::Json,
            precision: None,
        };
        render_report(Report::Scores(&t), &mut buf, opts).unwrap();
        let back = parse_score_table(buf.as_slice(), ReportFormat::Json).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rounded_report() {
        let t = sample_table();
        let mut buf = Vec::new();
        let opts = ReportOptions {
            format: ReportFormat::Csv,
            precision: Some(1),
        };
        render_report(Report::Scores(&t), &mut buf, opts).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("low,0.3,0.1,0.1,0.1,0.6,\n"), "{text}");
    }

    #[test]
    fn csv_with_spelled_out_headers() {
        let csv = "Model,BLEU-4,CIDEr\nA, 1.5 ,2\nB,,3\n";
        let t = parse_score_table(csv.as_bytes(), ReportFormat::Csv).unwrap();
        assert_eq!(t.get("A", MetricKind::Bleu4), Some(1.5));
        assert_eq!(t.get("B", MetricKind::Bleu4), None);
        assert_eq!(t.get("B", MetricKind::Cider), Some(3.0));
        assert!(parse_score_table("m,FOO\na,1\n".as_bytes(), ReportFormat::Csv).is_err());
    }
}
