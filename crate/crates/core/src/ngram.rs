//! Reference-based caption metrics: corpus BLEU-4, ROUGE-L, CIDEr and an
//! exact-match METEOR. All scores are on the x100 reporting scale.

use std::collections::{BTreeMap, HashMap};

use crate::model::Sentence;

pub const MAX_ORDER: usize = 4;

pub type NGram = Vec<String>;

/// n-gram multisets for orders `1..=max_order`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramProfile {
    counts: Vec<BTreeMap<NGram, usize>>,
}

impl NGramProfile {
    pub fn new(tokens: &[String], max_order: usize) -> Self {
        let counts = (1..=max_order)
            .map(|n| {
                let mut m = BTreeMap::new();
                for w in tokens.windows(n) {
                    *m.entry(w.to_vec()).or_insert(0) += 1;
                }
                m
            })
            .collect();
        Self { counts }
    }

    pub fn of(sentence: &Sentence) -> Self {
        Self::new(sentence.tokens(), MAX_ORDER)
    }

    pub fn max_order(&self) -> usize {
        self.counts.len()
    }

    /// Multiset of order-`n` grams (1-based).
    pub fn order(&self, n: usize) -> &BTreeMap<NGram, usize> {
        &self.counts[n - 1]
    }

    pub fn total(&self, n: usize) -> usize {
        self.order(n).values().sum()
    }
}

/// Corpus BLEU-4 over `(candidate, references)` pairs: clipped n-gram
/// precisions pooled over the corpus, geometric mean, brevity penalty
/// against the closest reference length (ties go to the shorter one).
/// No smoothing: any zero pooled precision gives 0.
pub fn bleu4_corpus<'a, I>(pairs: I) -> f64
where
    I: IntoIterator<Item = (&'a Sentence, &'a [Sentence])>,
{
    let mut matched = [0usize; MAX_ORDER];
    let mut total = [0usize; MAX_ORDER];
    let mut cand_len = 0usize;
    let mut ref_len = 0usize;

    for (cand, refs) in pairs {
        if refs.is_empty() {
            continue;
        }
        let c = NGramProfile::of(cand);
        let rs: Vec<NGramProfile> = refs.iter().map(NGramProfile::of).collect();
        for n in 1..=MAX_ORDER {
            for (g, &cnt) in c.order(n) {
                let max_ref = rs
                    .iter()
                    .map(|r| r.order(n).get(g).copied().unwrap_or(0))
                    .max()
                    .unwrap_or(0);
                matched[n - 1] += cnt.min(max_ref);
            }
            total[n - 1] += c.total(n);
        }
        let len = cand.len();
        cand_len += len;
        ref_len += refs
            .iter()
            .map(Sentence::len)
            .min_by_key(|&r| (r.abs_diff(len), r))
            .expect("non-empty references");
    }

    if cand_len == 0 || (0..MAX_ORDER).any(|k| matched[k] == 0 || total[k] == 0) {
        return 0.0;
    }
    let log_p: f64 = (0..MAX_ORDER)
        .map(|k| (matched[k] as f64 / total[k] as f64).ln())
        .sum::<f64>()
        / MAX_ORDER as f64;
    let bp = (1.0 - ref_len as f64 / cand_len as f64).min(0.0);
    100.0 * (log_p + bp).exp()
}

/// Length of the longest common subsequence.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub const ROUGE_BETA: f64 = 1.2;

/// LCS F-measure with beta = 1.2, best over references.
pub fn rouge_l(candidate: &Sentence, references: &[Sentence]) -> f64 {
    let beta2 = ROUGE_BETA * ROUGE_BETA;
    references
        .iter()
        .map(|r| {
            let l = lcs_len(candidate.tokens(), r.tokens()) as f64;
            if l == 0.0 {
                return 0.0;
            }
            let p = l / candidate.len() as f64;
            let rec = l / r.len() as f64;
            (1.0 + beta2) * p * rec / (rec + beta2 * p)
        })
        .fold(0.0, f64::max)
        * 100.0
}

/// Document frequencies of reference n-grams, one document per image.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable {
    df: HashMap<NGram, usize>,
    doc_count: usize,
}

impl IdfTable {
    /// Each item is the reference list of one image; an n-gram counts once
    /// per image no matter how many of its references contain it.
    pub fn build<'a, I>(corpus: I) -> Self
    where
        I: IntoIterator<Item = &'a [Sentence]>,
    {
        let mut df: HashMap<NGram, usize> = HashMap::new();
        let mut doc_count = 0;
        for refs in corpus {
            doc_count += 1;
            let mut seen = std::collections::HashSet::new();
            for r in refs {
                for n in 1..=MAX_ORDER {
                    for w in r.tokens().windows(n) {
                        if seen.insert(w.to_vec()) {
                            *df.entry(w.to_vec()).or_insert(0) += 1;
                        }
                    }
                }
            }
        }
        if doc_count <= 1 {
            log::warn!(
                "CIDEr document frequencies built from {doc_count} image(s); every idf is 0"
            );
        }
        Self { df, doc_count }
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn df(&self, gram: &[String]) -> usize {
        self.df.get(gram).copied().unwrap_or(0)
    }

    /// `ln(doc_count / df)`; unseen n-grams use df = 1.
    pub fn idf(&self, gram: &[String]) -> f64 {
        if self.doc_count == 0 {
            return 0.0;
        }
        (self.doc_count as f64 / self.df(gram).max(1) as f64).ln()
    }
}

fn tfidf<'a>(profile: &'a NGramProfile, n: usize, idf: &IdfTable) -> BTreeMap<&'a NGram, f64> {
    profile
        .order(n)
        .iter()
        .map(|(g, &c)| (g, c as f64 * idf.idf(g)))
        .collect()
}

fn norm(v: &BTreeMap<&NGram, f64>) -> f64 {
    v.values().map(|x| x * x).sum::<f64>().sqrt()
}

/// CIDEr: per order n, mean over references of the TF-IDF cosine; mean
/// over orders. A zero vector on either side contributes 0 for that order.
pub fn cider(candidate: &Sentence, references: &[Sentence], idf: &IdfTable) -> f64 {
    if references.is_empty() {
        return 0.0;
    }
    let c = NGramProfile::of(candidate);
    let rs: Vec<NGramProfile> = references.iter().map(NGramProfile::of).collect();
    let mut score = 0.0;
    for n in 1..=MAX_ORDER {
        let vc = tfidf(&c, n, idf);
        let nc = norm(&vc);
        let mut sum = 0.0;
        for r in &rs {
            let vr = tfidf(r, n, idf);
            let nr = norm(&vr);
            if nc == 0.0 || nr == 0.0 {
                continue;
            }
            let dot: f64 = vc
                .iter()
                .filter_map(|(g, x)| vr.get(g).map(|y| x * y))
                .sum();
            sum += dot / (nc * nr);
        }
        score += sum / rs.len() as f64;
    }
    100.0 * score / MAX_ORDER as f64
}

pub const METEOR_ALPHA: f64 = 0.9;
pub const METEOR_BETA: f64 = 3.0;
pub const METEOR_GAMMA: f64 = 0.5;

/// Exact-match unigram alignment statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alignment {
    pub matches: usize,
    pub chunks: usize,
}

/// Alignment with the most matches and, among those, the fewest chunks.
/// A chunk is a maximal run of matches at adjacent candidate positions
/// whose reference positions are also adjacent (in either direction, so
/// "b c" against "c b" is one chunk).
pub fn align_exact(candidate: &[String], reference: &[String]) -> Alignment {
    type Key = (usize, Option<usize>, Vec<u64>);

    struct Search<'a> {
        cand: &'a [String],
        positions: Vec<Vec<usize>>,
        memo: HashMap<Key, (usize, usize)>,
    }

    fn better(a: (usize, usize), b: (usize, usize)) -> bool {
        a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
    }

    impl Search<'_> {
        fn go(&mut self, i: usize, prev: Option<usize>, used: &mut Vec<u64>) -> (usize, usize) {
            if i == self.cand.len() {
                return (0, 0);
            }
            let key = (i, prev, used.clone());
            if let Some(&v) = self.memo.get(&key) {
                return v;
            }
            let mut best = self.go(i + 1, None, used);
            for k in 0..self.positions[i].len() {
                let j = self.positions[i][k];
                let (word, bit) = (j / 64, 1u64 << (j % 64));
                if used[word] & bit != 0 {
                    continue;
                }
                used[word] |= bit;
                let (m, c) = self.go(i + 1, Some(j), used);
                used[word] &= !bit;
                let extends = prev.is_some_and(|p| p.abs_diff(j) == 1);
                let cand = (m + 1, c + usize::from(!extends));
                if better(cand, best) {
                    best = cand;
                }
            }
            self.memo.insert(key, best);
            best
        }
    }

    let positions = candidate
        .iter()
        .map(|w| {
            reference
                .iter()
                .enumerate()
                .filter(|(_, r)| *r == w)
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    let mut search = Search {
        cand: candidate,
        positions,
        memo: HashMap::new(),
    };
    let mut used = vec![0u64; reference.len().div_ceil(64).max(1)];
    let (matches, chunks) = search.go(0, None, &mut used);
    Alignment { matches, chunks }
}

/// METEOR score (unit scale) from alignment statistics and sentence lengths.
pub fn meteor_from_alignment(a: Alignment, cand_len: usize, ref_len: usize) -> f64 {
    if a.matches == 0 {
        return 0.0;
    }
    let m = a.matches as f64;
    let p = m / cand_len as f64;
    let r = m / ref_len as f64;
    let fmean = p * r / (METEOR_ALPHA * p + (1.0 - METEOR_ALPHA) * r);
    let penalty = METEOR_GAMMA * (a.chunks as f64 / m).powf(METEOR_BETA);
    fmean * (1.0 - penalty)
}

/// METEOR restricted to exact unigram matches; best over references.
pub fn meteor_exact(candidate: &Sentence, references: &[Sentence]) -> f64 {
    references
        .iter()
        .map(|r| {
            let a = align_exact(candidate.tokens(), r.tokens());
            meteor_from_alignment(a, candidate.len(), r.len())
        })
        .fold(0.0, f64::max)
        * 100.0
}
