use approx::assert_relative_eq;
use capeval_core::io::{parse_score_table, render_report};
use capeval_core::ngram::{bleu4_corpus, cider, rouge_l, IdfTable, NGramProfile};
use capeval_core::rank::rank_scores;
use capeval_core::transport::{cost_matrix, solve_transport, wmd};
use capeval_core::visual::cosine;
use capeval_core::{
    tokenize, Language, MetricKind, NBow, Projector, Report, ReportFormat, ReportOptions,
    ScoreTable, Sentence, TokenizerPolicy,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn weights(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

fn nbow_strategy(dim: usize) -> impl Strategy<Value = NBow> {
    prop::collection::vec(
        (prop::collection::vec(-3.0..3.0f64, dim), 0.05..1.0f64),
        1..=6,
    )
    .prop_map(|items| {
        let (points, raw): (Vec<_>, Vec<_>) = items.into_iter().unzip();
        NBow::new(points, weights(&raw)).unwrap()
    })
}

fn sentence_strategy() -> impl Strategy<Value = Sentence> {
    prop::collection::vec(
        prop::sample::select(vec!["a", "b", "c", "d", "e", "f"]),
        1..10,
    )
    .prop_map(|t| Sentence::from_tokens(t, Language::Target).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn transport_plan_is_feasible_and_certified(a in nbow_strategy(2), b in nbow_strategy(2)) {
        let cost = cost_matrix(&a, &b);
        let plan = solve_transport(a.weights(), b.weights(), &cost);
        prop_assert!(plan.marginal_residual(a.weights(), b.weights()) < 1e-12);
        prop_assert!(plan.flows.iter().all(|f| f.2 >= 0.0));
        prop_assert!(plan.dual_violation(&cost) < 1e-9);
        let gap = (plan.dual_objective(a.weights(), b.weights()) - plan.cost).abs();
        prop_assert!(gap < 1e-9, "duality gap {}", gap);
    }

    #[test]
    fn wmd_is_symmetric_and_bounded(a in nbow_strategy(3), b in nbow_strategy(3)) {
        let d = wmd(&a, &b).0;
        prop_assert!(d >= 0.0);
        assert_relative_eq!(d, wmd(&b, &a).0, epsilon = 1e-9);
        let cost = cost_matrix(&a, &b);
        let (lo, hi) = cost.iter().fold((f64::INFINITY, 0.0f64), |(l, h), c| (l.min(*c), h.max(*c)));
        prop_assert!(d >= lo - 1e-12 && d <= hi + 1e-12);
    }

    #[test]
    fn cosine_ignores_positive_scale(
        u in prop::collection::vec(-5.0..5.0f64, 4),
        v in prop::collection::vec(-5.0..5.0f64, 4),
        k in 0.01..100.0f64,
    ) {
        prop_assume!(u.iter().any(|x| x.abs() > 1e-3) && v.iter().any(|x| x.abs() > 1e-3));
        let c = cosine(&u, &v).unwrap();
        let scaled: Vec<f64> = u.iter().map(|x| x * k).collect();
        prop_assert!((-1.0..=1.0).contains(&c));
        assert_relative_eq!(c, cosine(&scaled, &v).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn clipped_bleu_never_exceeds_identity(c in sentence_strategy(), r in sentence_strategy()) {
        let refs = std::slice::from_ref(&r);
        let s = bleu4_corpus([(&c, refs)]);
        prop_assert!((0.0..=100.0 + 1e-9).contains(&s));
        let cp = NGramProfile::of(&c);
        let rp = NGramProfile::of(&r);
        let clipped: usize = cp.order(1).iter().map(|(g, n)| (*n).min(rp.order(1).get(g).copied().unwrap_or(0))).sum();
        prop_assert!(clipped <= r.len());
    }

    #[test]
    fn rouge_and_cider_stay_in_range(c in sentence_strategy(), r in sentence_strategy(), o in sentence_strategy()) {
        let refs = vec![r.clone()];
        let other = vec![o];
        let idf = IdfTable::build([refs.as_slice(), other.as_slice()]);
        let rl = rouge_l(&c, &refs);
        let ci = cider(&c, &refs, &idf);
        prop_assert!((0.0..=100.0 + 1e-9).contains(&rl));
        prop_assert!((0.0..=100.0 + 1e-9).contains(&ci));
        assert_relative_eq!(rouge_l(&r, &refs), 100.0, epsilon = 1e-9);
    }

    #[test]
    fn ranks_are_a_permutation_average(values in prop::collection::vec(prop::sample::select(vec![1.0, 2.0, 3.0, 4.5]), 1..12)) {
        let scores = values.iter().enumerate().map(|(i, v)| (format!("m{i}"), *v)).collect();
        let r = rank_scores(&scores);
        let n = values.len() as f64;
        assert_relative_eq!(r.0.values().sum::<f64>(), n * (n + 1.0) / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn score_tables_round_trip_exactly(rows in prop::collection::vec(prop::collection::vec(-1e3..1e3f64, 3), 1..6), json in any::<bool>()) {
        let mut t = ScoreTable::new(100.0);
        for (i, row) in rows.iter().enumerate() {
            for (m, v) in MetricKind::PROPOSED.iter().zip(row) {
                t.insert(format!("model {i}"), *m, *v);
            }
        }
        t.add_aggregates();
        let format = if json { ReportFormat::Json } else { ReportFormat::Csv };
        let mut buf = Vec::new();
        render_report(Report::Scores(&t), &mut buf, ReportOptions { format, precision: None }).unwrap();
        prop_assert_eq!(parse_score_table(&buf[..], format).unwrap(), t);
    }

    #[test]
    fn whitespace_tokenization_is_idempotent(words in prop::collection::vec("[A-Za-z]{1,6}[,.!]?", 1..8)) {
        let p = TokenizerPolicy::whitespace();
        let once = tokenize(&words.join(" "), Language::Target, &p).unwrap();
        let twice = tokenize(&once.tokens().join(" "), Language::Target, &p).unwrap();
        prop_assert_eq!(once.tokens(), twice.tokens());
    }
}

#[test]
fn projector_file_round_trip() {
    let w = DMatrix::from_row_slice(2, 3, &[0.1, -2.5, 1e-17, 3.0, 0.0, -0.3333333333333333]);
    let b = DVector::from_vec(vec![0.5, -1.0]);
    let p = Projector::from_parts(w, b, Language::Source, 0.25).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.txt");
    p.save(&path).unwrap();
    assert_eq!(Projector::load(&path).unwrap(), p);
    let y = p.project_slice(&[1.0, 0.0, 2.0]).unwrap();
    assert_relative_eq!(y[0], 0.1 + 2e-17 + 0.5, epsilon = 1e-15);
    assert_relative_eq!(y[1], 3.0 - 2.0 / 3.0 - 1.0, epsilon = 1e-15);
}
