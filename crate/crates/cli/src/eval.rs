//! Batch evaluation: loads inputs, scores every caption, reduces per model.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use capeval_core::io::{load_captions, load_embeddings, load_features, load_references};
use capeval_core::ngram::{bleu4_corpus, cider, meteor_exact, rouge_l, IdfTable};
use capeval_core::transport::{nbow, nbow_without, relevance_from_distance, wmd, NBow};
use capeval_core::visual::{clinrel, cmedrel};
use capeval_core::{
    CaptionRecord, EmbeddingTable, Error, Language, MetricKind, Projector, ReferenceSet, Result,
    ScoreTable, Sentence, TokenizerPolicy, VisualFeatures,
};
use rayon::prelude::*;

use crate::config::{InputPaths, RunConfig, Scenario, ZMode};

/// A configurable input, named after its command-line flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Input {
    References,
    EmbeddingsSource,
    EmbeddingsTarget,
    Features,
    ProjectorSource,
    ProjectorTarget,
}

impl Input {
    pub fn flag(self) -> &'static str {
        match self {
            Input::References => "--references",
            Input::EmbeddingsSource => "--embeddings-source",
            Input::EmbeddingsTarget => "--embeddings-target",
            Input::Features => "--features",
            Input::ProjectorSource => "--projector-source",
            Input::ProjectorTarget => "--projector-target",
        }
    }
}

/// Inputs a metric cannot be computed without.
pub fn required_inputs(metric: MetricKind) -> &'static [Input] {
    use Input::*;
    match metric {
        MetricKind::WmdRel => &[References, EmbeddingsTarget],
        MetricKind::ClinRel => &[
            References,
            EmbeddingsSource,
            EmbeddingsTarget,
            ProjectorSource,
            ProjectorTarget,
        ],
        MetricKind::CmedRel => &[EmbeddingsTarget, Features, ProjectorTarget],
        MetricKind::Bleu4 | MetricKind::Meteor | MetricKind::RougeL | MetricKind::Cider => {
            &[References]
        }
        MetricKind::Bmrc | MetricKind::Wcc => &[],
    }
}

/// Everything loaded for one evaluation run.
#[derive(Debug, Clone, Default)]
pub struct EvalInputs {
    pub captions: Vec<CaptionRecord>,
    pub references: Option<BTreeMap<String, ReferenceSet>>,
    pub embeddings_source: Option<EmbeddingTable>,
    pub embeddings_target: Option<EmbeddingTable>,
    pub features: Option<VisualFeatures>,
    pub projector_source: Option<Projector>,
    pub projector_target: Option<Projector>,
    pub stopwords: Option<HashSet<String>>,
}

impl EvalInputs {
    pub fn load(paths: &InputPaths, policy: &TokenizerPolicy) -> Result<Self> {
        fn opt<T>(
            p: &Option<impl AsRef<Path>>,
            f: impl FnOnce(&Path) -> Result<T>,
        ) -> Result<Option<T>> {
            p.as_ref().map(|p| f(p.as_ref())).transpose()
        }
        Ok(EvalInputs {
            captions: load_captions(&paths.captions, policy)?,
            references: opt(&paths.references, |p| load_references(p, policy))?,
            embeddings_source: opt(&paths.embeddings_source, |p| {
                load_embeddings(p, Language::Source)
            })?,
            embeddings_target: opt(&paths.embeddings_target, |p| {
                load_embeddings(p, Language::Target)
            })?,
            features: opt(&paths.features, |p| load_features(p))?,
            projector_source: opt(&paths.projector_source, |p| Projector::load(p))?,
            projector_target: opt(&paths.projector_target, |p| Projector::load(p))?,
            stopwords: opt(&paths.stopwords, load_stopwords)?,
        })
    }

    pub fn has(&self, input: Input) -> bool {
        match input {
            Input::References => self.references.is_some(),
            Input::EmbeddingsSource => self.embeddings_source.is_some(),
            Input::EmbeddingsTarget => self.embeddings_target.is_some(),
            Input::Features => self.features.is_some(),
            Input::ProjectorSource => self.projector_source.is_some(),
            Input::ProjectorTarget => self.projector_target.is_some(),
        }
    }

    fn refs(&self, image_id: &str) -> Result<&ReferenceSet> {
        self.references
            .as_ref()
            .and_then(|r| r.get(image_id))
            .ok_or_else(|| Error::KeyMismatch(format!("no references for image {image_id:?}")))
    }
}

/// Whitespace-separated stopword list; `#` starts a comment line.
pub fn load_stopwords(path: &Path) -> Result<HashSet<String>> {
    Ok(fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(str::split_whitespace)
        .map(str::to_lowercase)
        .collect())
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    pub scenario: Scenario,
    pub z_mode: ZMode,
    pub metrics: Option<Vec<MetricKind>>,
    pub all_refs: bool,
    pub threads: usize,
}

impl From<&RunConfig> for EvalOptions {
    fn from(c: &RunConfig) -> Self {
        EvalOptions {
            scenario: c.scenario,
            z_mode: c.z_mode,
            metrics: c.metrics.clone(),
            all_refs: c.all_refs,
            threads: c.threads,
        }
    }
}

fn allowed(scenario: Scenario, metric: MetricKind) -> bool {
    scenario == Scenario::WithSourceRefs
        || !matches!(metric, MetricKind::WmdRel | MetricKind::ClinRel)
}

fn all_have_targets(inputs: &EvalInputs) -> bool {
    inputs.captions.iter().all(|c| {
        inputs
            .refs(&c.image_id)
            .map(|r| !r.target_refs.is_empty())
            .unwrap_or(false)
    })
}

/// Resolves the metric selection for a scenario and checks that every
/// selected metric has its inputs. Aggregates expand to their components.
pub fn select_metrics(inputs: &EvalInputs, opts: &EvalOptions) -> Result<Vec<MetricKind>> {
    let mut chosen = BTreeSet::new();
    match &opts.metrics {
        Some(list) => {
            for &m in list {
                let parts = if m.is_aggregate() {
                    m.components()
                } else {
                    std::slice::from_ref(&m)
                };
                for &p in parts {
                    if !allowed(opts.scenario, p) {
                        return Err(Error::Config(format!(
                            "{} needs source references and is not available in scenario II",
                            p.name()
                        )));
                    }
                    chosen.insert(p);
                }
            }
        }
        None => {
            chosen.extend(
                MetricKind::PROPOSED
                    .iter()
                    .copied()
                    .filter(|m| allowed(opts.scenario, *m)),
            );
            if inputs.references.is_some() {
                if all_have_targets(inputs) {
                    chosen.extend(MetricKind::STANDARD);
                } else {
                    log::warn!(
                        "some captioned images lack target references; skipping standard metrics"
                    );
                }
            }
        }
    }
    for &m in &chosen {
        if let Some(missing) = required_inputs(m).iter().find(|i| !inputs.has(**i)) {
            return Err(Error::Config(format!(
                "{} requires {} but it was not given",
                m.name(),
                missing.flag()
            )));
        }
    }
    Ok(chosen.into_iter().collect())
}

/// Per-caption raw values; `None` where the metric is not selected.
#[derive(Debug, Clone, Default)]
struct CaptionScores {
    /// Distances to each MT reference used; `None` entries are OOV failures.
    wmd: Option<Vec<Option<f64>>>,
    clin: Option<f64>,
    cmed: Option<f64>,
    meteor: Option<f64>,
    rouge: Option<f64>,
    cider: Option<f64>,
}

fn first_or_all(refs: &[Sentence], all: bool) -> &[Sentence] {
    if all {
        refs
    } else {
        &refs[..refs.len().min(1)]
    }
}

/// Soft failures (OOV, degenerate projections) score 0 and are logged.
fn soft(rec: &CaptionRecord, what: &str, r: Result<f64>) -> Result<f64> {
    match r {
        Ok(v) => Ok(v),
        Err(e @ (Error::AllOov(_) | Error::ZeroVector)) => {
            log::warn!(
                "image {:?}, model {:?}: {what} scored 0 ({e})",
                rec.image_id,
                rec.model_id
            );
            Ok(0.0)
        }
        Err(e) => Err(e),
    }
}

fn bow(s: &Sentence, table: &EmbeddingTable, stop: Option<&HashSet<String>>) -> Result<NBow> {
    match stop {
        Some(sw) => nbow_without(s, table, sw),
        None => nbow(s, table),
    }
}

struct Scorer<'a> {
    inputs: &'a EvalInputs,
    metrics: &'a [MetricKind],
    all_refs: bool,
    idf: Option<IdfTable>,
}

impl Scorer<'_> {
    fn wants(&self, m: MetricKind) -> bool {
        self.metrics.contains(&m)
    }

    fn score(&self, rec: &CaptionRecord) -> Result<CaptionScores> {
        let inp = self.inputs;
        let cand = &rec.candidate;
        let mut out = CaptionScores::default();

        if self.wants(MetricKind::WmdRel) {
            let table = inp
                .embeddings_target
                .as_ref()
                .expect("checked in select_metrics");
            let refs = first_or_all(&inp.refs(&rec.image_id)?.mt_refs, self.all_refs);
            if refs.is_empty() {
                return Err(Error::KeyMismatch(format!(
                    "image {:?} has no machine-translated reference",
                    rec.image_id
                )));
            }
            let stop = inp.stopwords.as_ref();
            let mut dists = Vec::with_capacity(refs.len());
            match bow(cand, table, stop) {
                Ok(a) => {
                    for r in refs {
                        match bow(r, table, stop) {
                            Ok(b) => dists.push(Some(wmd(&a, &b).0)),
                            Err(Error::AllOov(_)) => dists.push(None),
                            Err(e) => return Err(e),
                        }
                    }
                }
                Err(Error::AllOov(_)) => dists.resize(refs.len(), None),
                Err(e) => return Err(e),
            }
            if dists.iter().any(Option::is_none) {
                log::warn!(
                    "image {:?}, model {:?}: no in-vocabulary words for WMD, WMDREL scored 0",
                    rec.image_id,
                    rec.model_id
                );
            }
            out.wmd = Some(dists);
        }

        if self.wants(MetricKind::ClinRel) {
            let refs = first_or_all(&inp.refs(&rec.image_id)?.source_refs, self.all_refs);
            if refs.is_empty() {
                return Err(Error::KeyMismatch(format!(
                    "image {:?} has no source reference",
                    rec.image_id
                )));
            }
            let mut sum = 0.0;
            for r in refs {
                sum += soft(
                    rec,
                    "CLINREL",
                    clinrel(
                        cand,
                        r,
                        inp.projector_target.as_ref().expect("checked"),
                        inp.projector_source.as_ref().expect("checked"),
                        inp.embeddings_target.as_ref().expect("checked"),
                        inp.embeddings_source.as_ref().expect("checked"),
                    ),
                )?;
            }
            out.clin = Some(sum / refs.len() as f64);
        }

        if self.wants(MetricKind::CmedRel) {
            let feats = inp.features.as_ref().expect("checked");
            let f = feats.get(&rec.image_id).ok_or_else(|| {
                Error::KeyMismatch(format!("no visual feature for image {:?}", rec.image_id))
            })?;
            out.cmed = Some(soft(
                rec,
                "CMEDREL",
                cmedrel(
                    cand,
                    f,
                    inp.projector_target.as_ref().expect("checked"),
                    inp.embeddings_target.as_ref().expect("checked"),
                ),
            )?);
        }

        if MetricKind::STANDARD.iter().any(|m| self.wants(*m)) {
            let targets = self.targets(&rec.image_id)?;
            if self.wants(MetricKind::Meteor) {
                out.meteor = Some(meteor_exact(cand, targets));
            }
            if self.wants(MetricKind::RougeL) {
                out.rouge = Some(rouge_l(cand, targets));
            }
            if let Some(idf) = &self.idf {
                out.cider = Some(cider(cand, targets, idf));
            }
        }
        Ok(out)
    }

    fn targets(&self, image_id: &str) -> Result<&[Sentence]> {
        let t = &self.inputs.refs(image_id)?.target_refs;
        if t.is_empty() {
            return Err(Error::KeyMismatch(format!(
                "image {image_id:?} has no target-language reference"
            )));
        }
        Ok(t)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Scores every caption and reduces to one row per model on the x100 scale.
pub fn evaluate(inputs: &EvalInputs, opts: &EvalOptions) -> Result<ScoreTable> {
    if inputs.captions.is_empty() {
        return Err(Error::Config("no captions to evaluate".into()));
    }
    let metrics = select_metrics(inputs, opts)?;
    log::info!(
        "evaluating {} captions on {}",
        inputs.captions.len(),
        metrics
            .iter()
            .map(|m| m.name())
            .collect::<Vec<_>>()
            .join(",")
    );

    let images: BTreeSet<&str> = inputs
        .captions
        .iter()
        .map(|c| c.image_id.as_str())
        .collect();
    let mut scorer = Scorer {
        inputs,
        metrics: &metrics,
        all_refs: opts.all_refs,
        idf: None,
    };
    if metrics.contains(&MetricKind::Cider) {
        let docs = images
            .iter()
            .map(|id| scorer.targets(id))
            .collect::<Result<Vec<_>>>()?;
        if docs.len() < 2 {
            log::warn!("CIDER over a single image: every n-gram has zero idf");
        }
        scorer.idf = Some(IdfTable::build(docs));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let per_caption: Vec<CaptionScores> = pool.install(|| {
        inputs
            .captions
            .par_iter()
            .map(|rec| scorer.score(rec))
            .collect::<Result<_>>()
    })?;

    let z = match opts.z_mode {
        ZMode::Fixed(z) => {
            relevance_from_distance(0.0, z)?;
            z
        }
        ZMode::BatchMax => {
            let max = per_caption
                .iter()
                .filter_map(|s| s.wmd.as_ref())
                .flatten()
                .flatten()
                .fold(0.0_f64, |a, &b| a.max(b));
            if max > 0.0 {
                max
            } else {
                1.0
            }
        }
    };
    if metrics.contains(&MetricKind::WmdRel) {
        log::info!("WMD normalizer z = {z}");
    }

    let mut by_model: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, c) in inputs.captions.iter().enumerate() {
        by_model.entry(&c.model_id).or_default().push(i);
    }

    let mut table = ScoreTable::new(100.0);
    for (model, idx) in &by_model {
        let rows = || idx.iter().map(|&i| &per_caption[i]);
        for &m in &metrics {
            let v = match m {
                MetricKind::WmdRel => {
                    let mut rel = Vec::with_capacity(idx.len());
                    for s in rows() {
                        let d = s.wmd.as_deref().unwrap_or_default();
                        let mut acc = 0.0;
                        for x in d {
                            acc += match x {
                                Some(x) => relevance_from_distance(*x, z)?,
                                None => 0.0,
                            };
                        }
                        rel.push(acc / d.len().max(1) as f64);
                    }
                    100.0 * mean(rel.into_iter())
                }
                MetricKind::ClinRel => 100.0 * mean(rows().filter_map(|s| s.clin)),
                MetricKind::CmedRel => 100.0 * mean(rows().filter_map(|s| s.cmed)),
                // n-gram metrics already report on the x100 scale
                MetricKind::Meteor => mean(rows().filter_map(|s| s.meteor)),
                MetricKind::RougeL => mean(rows().filter_map(|s| s.rouge)),
                MetricKind::Cider => mean(rows().filter_map(|s| s.cider)),
                MetricKind::Bleu4 => {
                    let pairs = idx
                        .iter()
                        .map(|&i| {
                            let c = &inputs.captions[i];
                            scorer.targets(&c.image_id).map(|t| (&c.candidate, t))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    bleu4_corpus(pairs)
                }
                MetricKind::Bmrc | MetricKind::Wcc => continue,
            };
            table.insert(*model, m, v);
        }
    }
    table.add_aggregates();
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use capeval_core::tokenize;

    fn sent(raw: &str) -> Sentence {
        tokenize(raw, Language::Target, &TokenizerPolicy::whitespace()).unwrap()
    }

    fn caption(image: &str, model: &str, raw: &str) -> CaptionRecord {
        CaptionRecord {
            image_id: image.into(),
            model_id: model.into(),
            candidate: sent(raw),
        }
    }

    fn refs(image: &str, target: &[&str], mt: &[&str]) -> (String, ReferenceSet) {
        (
            image.into(),
            ReferenceSet {
                image_id: image.into(),
                source_refs: vec![],
                target_refs: target.iter().map(|r| sent(r)).collect(),
                mt_refs: mt.iter().map(|r| sent(r)).collect(),
            },
        )
    }

    fn emb() -> EmbeddingTable {
        let mut t = EmbeddingTable::new(2, Language::Target);
        t.insert("a", &[0.0, 0.0]).unwrap();
        t.insert("b", &[3.0, 4.0]).unwrap();
        t.insert("c", &[6.0, 8.0]).unwrap();
        t
    }

    fn inputs() -> EvalInputs {
        EvalInputs {
            captions: vec![
                caption("i1", "m1", "a"),
                caption("i1", "m2", "b"),
                caption("i2", "m1", "c"),
                caption("i2", "m2", "zzz"),
            ],
            references: Some(
                [refs("i1", &["a b"], &["a"]), refs("i2", &["c a"], &["a"])]
                    .into_iter()
                    .collect(),
            ),
            embeddings_target: Some(emb()),
            ..Default::default()
        }
    }

    fn wmd_only() -> EvalOptions {
        EvalOptions {
            metrics: Some(vec![MetricKind::WmdRel]),
            threads: 1,
            ..Default::default()
        }
    }

    #[test]
    fn batch_max_normalizes_and_oov_scores_zero() {
        let t = evaluate(&inputs(), &wmd_only()).unwrap();
        // distances: m1 -> 0 and 10, m2 -> 5 and OOV; z = 10
        assert_eq!(t.get("m1", MetricKind::WmdRel), Some(50.0));
        assert_eq!(t.get("m2", MetricKind::WmdRel), Some(25.0));
    }

    #[test]
    fn fixed_z_clamps() {
        let mut o = wmd_only();
        o.z_mode = ZMode::Fixed(5.0);
        let t = evaluate(&inputs(), &o).unwrap();
        assert_eq!(t.get("m1", MetricKind::WmdRel), Some(50.0));
        assert_eq!(t.get("m2", MetricKind::WmdRel), Some(0.0));
        o.z_mode = ZMode::Fixed(0.0);
        assert!(matches!(evaluate(&inputs(), &o), Err(Error::Config(_))));
    }

    #[test]
    fn missing_input_names_metric_and_flag() {
        let mut o = wmd_only();
        o.metrics = Some(vec![MetricKind::CmedRel]);
        let msg = evaluate(&inputs(), &o).unwrap_err().to_string();
        assert!(
            msg.contains("CMEDREL") && msg.contains("--features"),
            "{msg}"
        );
        o.metrics = Some(vec![MetricKind::Wcc]);
        let msg = evaluate(&inputs(), &o).unwrap_err().to_string();
        assert!(msg.contains("CLINREL"), "{msg}");
    }

    #[test]
    fn scenario_two_rejects_reference_metrics() {
        let mut o = wmd_only();
        o.scenario = Scenario::ImageOnly;
        assert!(matches!(evaluate(&inputs(), &o), Err(Error::Config(_))));
        o.metrics = None;
        let chosen = select_metrics(&inputs(), &o);
        // defaults ask for CMEDREL, whose inputs are absent
        assert!(chosen.unwrap_err().to_string().contains("CMEDREL"));
    }

    #[test]
    fn standard_metrics_per_model() {
        let mut o = wmd_only();
        o.metrics = Some(vec![MetricKind::Bmrc]);
        let t = evaluate(&inputs(), &o).unwrap();
        assert!(t.has_metric(MetricKind::Bmrc));
        assert!(!t.has_metric(MetricKind::WmdRel));
        let m1 = t.get("m1", MetricKind::RougeL).unwrap();
        let m2 = t.get("m2", MetricKind::RougeL).unwrap();
        assert!(m1 > m2);
    }

    #[test]
    fn thread_count_does_not_change_scores() {
        let mut o = wmd_only();
        o.metrics = Some(vec![MetricKind::WmdRel, MetricKind::Bmrc]);
        let a = evaluate(&inputs(), &o).unwrap();
        o.threads = 4;
        assert_eq!(a, evaluate(&inputs(), &o).unwrap());
    }

    #[test]
    fn stopword_file_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("stop.txt");
        fs::write(&p, "# list\nThe a\n  of\n").unwrap();
        let s = load_stopwords(&p).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.contains("the"));
    }
}
