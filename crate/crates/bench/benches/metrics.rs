use std::collections::BTreeMap;

use capeval_core::ngram::{bleu4_corpus, cider, meteor_exact, rouge_l, IdfTable};
use capeval_core::rank::{rank_scores, spearman};
use capeval_core::transport::{rwmd, wcd, wmd};
use capeval_core::visual::train_projector;
use capeval_core::{Language, NBow, Sentence, SentenceRepr, TrainingPair};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn nbow(rng: &mut ChaCha8Rng, size: usize, dim: usize) -> NBow {
    let points = (0..size)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let raw: Vec<f64> = (0..size).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    NBow::new(points, raw.iter().map(|w| w / total).collect()).unwrap()
}

fn sentence(rng: &mut ChaCha8Rng, len: usize) -> Sentence {
    let tokens: Vec<String> = (0..len)
        .map(|_| format!("w{}", rng.gen_range(0..40)))
        .collect();
    Sentence::from_tokens(tokens, Language::Target).unwrap()
}

fn bench_transport(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("transport");
    for size in [4usize, 10, 20] {
        let a = nbow(&mut rng, size, 300);
        let b = nbow(&mut rng, size, 300);
        group.bench_with_input(BenchmarkId::new("wmd", size), &size, |bch, _| {
            bch.iter(|| wmd(black_box(&a), black_box(&b)).0)
        });
        group.bench_with_input(BenchmarkId::new("rwmd", size), &size, |bch, _| {
            bch.iter(|| rwmd(black_box(&a), black_box(&b)))
        });
        group.bench_with_input(BenchmarkId::new("wcd", size), &size, |bch, _| {
            bch.iter(|| wcd(black_box(&a), black_box(&b)))
        });
    }
    group.finish();
}

fn bench_ngram(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let images: Vec<(Sentence, Vec<Sentence>)> = (0..200)
        .map(|_| {
            let cand = sentence(&mut rng, 12);
            let refs = (0..5).map(|_| sentence(&mut rng, 12)).collect();
            (cand, refs)
        })
        .collect();
    let idf = IdfTable::build(images.iter().map(|(_, r)| r.as_slice()));

    let mut group = c.benchmark_group("ngram_200_images");
    group.bench_function("bleu4_corpus", |b| {
        b.iter(|| bleu4_corpus(images.iter().map(|(c, r)| (c, r.as_slice()))))
    });
    group.bench_function("rouge_l", |b| {
        b.iter(|| images.iter().map(|(c, r)| rouge_l(c, r)).sum::<f64>())
    });
    group.bench_function("cider", |b| {
        b.iter(|| images.iter().map(|(c, r)| cider(c, r, &idf)).sum::<f64>())
    });
    group.bench_function("meteor_exact", |b| {
        b.iter(|| images.iter().map(|(c, r)| meteor_exact(c, r)).sum::<f64>())
    });
    group.finish();
}

fn bench_rank(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let column = |rng: &mut ChaCha8Rng| -> BTreeMap<String, f64> {
        (0..8)
            .map(|i| (format!("m{i}"), rng.gen_range(0.0..100.0)))
            .collect()
    };
    let (a, b) = (column(&mut rng), column(&mut rng));
    c.bench_function("spearman_8_models", |bch| {
        bch.iter(|| spearman(&rank_scores(black_box(&a)), &rank_scores(black_box(&b))).unwrap())
    });
}

fn bench_ridge(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (d, dv) = (64, 128);
    let pairs: Vec<TrainingPair> = (0..1000)
        .map(|_| {
            let x = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = (0..dv).map(|_| rng.gen_range(-1.0..1.0)).collect();
            TrainingPair::new(SentenceRepr(x), y)
        })
        .collect();
    let mut group = c.benchmark_group("ridge");
    group.sample_size(20);
    group.bench_function("train_1000x64_to_128", |b| {
        b.iter(|| train_projector(black_box(&pairs), 1.0, Language::Target).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_transport,
    bench_ngram,
    bench_rank,
    bench_ridge
);
criterion_main!(benches);
