//! Seeded synthetic evaluation fixture written in the on-disk formats the
//! CLI reads.
//!
//! Source token `sK` and target token `tK` share an embedding, and both
//! languages share one projector, so a source reference and its "machine
//! translation" (the same indices renamed) land on the same visual point.
//! Each image's feature is that point. A model's captions are the MT
//! reference with a per-model fraction of tokens replaced at random, so
//! lower corruption should mean higher scores on every metric.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub images: usize,
    /// `(model id, fraction of caption tokens replaced)`.
    pub models: Vec<(String, f64)>,
    pub vocab: usize,
    pub word_dim: usize,
    pub visual_dim: usize,
    pub seed: u64,
}

impl FixtureSpec {
    pub fn new(images: usize, models: &[(&str, f64)], seed: u64) -> Self {
        FixtureSpec {
            images,
            models: models.iter().map(|(m, q)| (m.to_string(), *q)).collect(),
            vocab: 60,
            word_dim: 8,
            visual_dim: 12,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FixturePaths {
    pub captions: PathBuf,
    pub references: PathBuf,
    pub embeddings_source: PathBuf,
    pub embeddings_target: PathBuf,
    pub features: PathBuf,
    pub projector_source: PathBuf,
    pub projector_target: PathBuf,
}

fn vectors(rows: &[(String, Vec<f64>)]) -> String {
    let mut s = format!("{} {}\n", rows.len(), rows[0].1.len());
    for (k, v) in rows {
        s.push_str(k);
        for x in v {
            write!(s, " {x}").unwrap();
        }
        s.push('\n');
    }
    s
}

fn projector(coef: &[Vec<f64>], language: &str) -> String {
    let d = coef[0].len() - 1;
    let mut s = format!("{d} {} 1 {language}\n", coef.len());
    for (k, row) in coef.iter().enumerate() {
        write!(s, "{k}").unwrap();
        for x in row {
            write!(s, " {x}").unwrap();
        }
        s.push('\n');
    }
    s
}

fn project(coef: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    coef.iter()
        .map(|row| {
            row[..x.len()]
                .iter()
                .zip(x)
                .map(|(w, v)| w * v)
                .sum::<f64>()
                + row[x.len()]
        })
        .collect()
}

/// Writes every fixture file into `dir`.
pub fn write_fixture(dir: &Path, spec: &FixtureSpec) -> io::Result<FixturePaths> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let emb: Vec<Vec<f64>> = (0..spec.vocab)
        .map(|_| {
            (0..spec.word_dim)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect()
        })
        .collect();
    let coef: Vec<Vec<f64>> = (0..spec.visual_dim)
        .map(|_| {
            (0..=spec.word_dim)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect()
        })
        .collect();

    let sentence = |rng: &mut ChaCha8Rng| -> Vec<usize> {
        let len = rng.gen_range(6..=10);
        (0..len).map(|_| rng.gen_range(0..spec.vocab)).collect()
    };
    let words = |ids: &[usize], prefix: &str| -> String {
        ids.iter()
            .map(|i| format!("{prefix}{i}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let corrupt = |rng: &mut ChaCha8Rng, ids: &[usize], q: f64| -> String {
        ids.iter()
            .map(|&i| {
                if rng.gen_bool(q) {
                    if rng.gen_bool(0.1) {
                        format!("oov{}", rng.gen_range(0..5))
                    } else {
                        format!("t{}", rng.gen_range(0..spec.vocab))
                    }
                } else {
                    format!("t{i}")
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut refs = String::new();
    let mut caps = String::new();
    let mut feats = Vec::new();
    for img in 0..spec.images {
        let id = format!("img{img:04}");
        let base = sentence(&mut rng);
        let extra = sentence(&mut rng);
        let mean: Vec<f64> = (0..spec.word_dim)
            .map(|k| base.iter().map(|&i| emb[i][k]).sum::<f64>() / base.len() as f64)
            .collect();
        feats.push((id.clone(), project(&coef, &mean)));
        let paraphrase = corrupt(&mut rng, &base, 0.2);
        let line = json!({
            "image_id": id,
            "source": [words(&base, "s"), words(&extra, "s")],
            "target": [words(&base, "t"), paraphrase],
            "mt": [words(&base, "t")],
        });
        writeln!(refs, "{line}").unwrap();
        for (model, q) in &spec.models {
            let line = json!({
                "image_id": id,
                "model_id": model,
                "caption": corrupt(&mut rng, &base, *q),
            });
            writeln!(caps, "{line}").unwrap();
        }
    }

    let named = |prefix: &str| -> Vec<(String, Vec<f64>)> {
        emb.iter()
            .enumerate()
            .map(|(i, v)| (format!("{prefix}{i}"), v.clone()))
            .collect()
    };
    let paths = FixturePaths {
        captions: dir.join("captions.jsonl"),
        references: dir.join("references.jsonl"),
        embeddings_source: dir.join("emb.source.txt"),
        embeddings_target: dir.join("emb.target.txt"),
        features: dir.join("features.txt"),
        projector_source: dir.join("proj.source.txt"),
        projector_target: dir.join("proj.target.txt"),
    };
    fs::write(&paths.captions, caps)?;
    fs::write(&paths.references, refs)?;
    fs::write(&paths.embeddings_source, vectors(&named("s")))?;
    fs::write(&paths.embeddings_target, vectors(&named("t")))?;
    fs::write(&paths.features, vectors(&feats))?;
    fs::write(&paths.projector_source, projector(&coef, "source"))?;
    fs::write(&paths.projector_target, projector(&coef, "target"))?;
    Ok(paths)
}

impl FixturePaths {
    /// `eval` arguments pointing at every file.
    pub fn eval_args(&self) -> Vec<String> {
        let pairs = [
            ("--captions", &self.captions),
            ("--references", &self.references),
            ("--embeddings-source", &self.embeddings_source),
            ("--embeddings-target", &self.embeddings_target),
            ("--features", &self.features),
            ("--projector-source", &self.projector_source),
            ("--projector-target", &self.projector_target),
        ];
        pairs
            .iter()
            .flat_map(|(f, p)| [f.to_string(), p.display().to_string()])
            .collect()
    }
}
