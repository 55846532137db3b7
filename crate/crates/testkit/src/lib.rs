//! Slow, independent reference implementations used as test oracles, plus
//! a deterministic synthetic-fixture writer.
//!
//! Nothing here depends on `capeval-core`: every oracle works on plain
//! slices so it cannot share a bug with the code under test.

pub mod fixture;

use std::collections::{BTreeMap, BTreeSet};

use minilp::{ComparisonOp, OptimizationDirection, Problem};

/// Transportation problem solved as a dense LP: one variable per cell,
/// one equality per supply row and per demand column (the last column is
/// implied and dropped so rounding in the totals cannot make it infeasible).
pub fn transport_lp(supply: &[f64], demand: &[f64], cost: &[f64]) -> f64 {
    let (m, n) = (supply.len(), demand.len());
    assert_eq!(cost.len(), m * n);
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = cost
        .iter()
        .map(|&c| p.add_var(c, (0.0, f64::INFINITY)))
        .collect();
    for (i, &a) in supply.iter().enumerate() {
        let row: Vec<_> = (0..n).map(|j| (vars[i * n + j], 1.0)).collect();
        p.add_constraint(row.as_slice(), ComparisonOp::Eq, a);
    }
    for (j, &b) in demand.iter().enumerate().take(n.saturating_sub(1)) {
        let col: Vec<_> = (0..m).map(|i| (vars[i * n + j], 1.0)).collect();
        p.add_constraint(col.as_slice(), ComparisonOp::Eq, b);
    }
    p.solve().expect("transport LP is feasible").objective()
}

fn grams(tokens: &[String], n: usize) -> Vec<String> {
    tokens.windows(n).map(|w| w.join("\u{1}")).collect()
}

/// CIDEr from dense TF-IDF vectors over an explicit vocabulary.
/// `corpus` holds the reference list of every image (documents for df);
/// `refs` are the candidate's own references. Returns the x100 score.
pub fn cider_dense(cand: &[String], refs: &[Vec<String>], corpus: &[Vec<Vec<String>>]) -> f64 {
    let docs = corpus.len() as f64;
    let mut total = 0.0;
    for n in 1..=4 {
        let mut vocab = BTreeSet::new();
        for image in corpus {
            for r in image {
                vocab.extend(grams(r, n));
            }
        }
        vocab.extend(grams(cand, n));
        for r in refs {
            vocab.extend(grams(r, n));
        }
        let vocab: Vec<String> = vocab.into_iter().collect();
        let idf: Vec<f64> = vocab
            .iter()
            .map(|g| {
                let df = corpus
                    .iter()
                    .filter(|image| image.iter().any(|r| grams(r, n).contains(g)))
                    .count();
                if corpus.is_empty() {
                    0.0
                } else {
                    (docs / df.max(1) as f64).ln()
                }
            })
            .collect();
        let vector = |t: &[String]| -> Vec<f64> {
            let gs = grams(t, n);
            vocab
                .iter()
                .zip(&idf)
                .map(|(g, w)| gs.iter().filter(|x| *x == g).count() as f64 * w)
                .collect()
        };
        let vc = vector(cand);
        let mut sum = 0.0;
        for r in refs {
            let vr = vector(r);
            let dot: f64 = vc.iter().zip(&vr).map(|(a, b)| a * b).sum();
            let na = vc.iter().map(|a| a * a).sum::<f64>().sqrt();
            let nb = vr.iter().map(|b| b * b).sum::<f64>().sqrt();
            if na > 0.0 && nb > 0.0 {
                sum += dot / (na * nb);
            }
        }
        if !refs.is_empty() {
            total += sum / refs.len() as f64;
        }
    }
    100.0 * total / 4.0
}

/// Exhaustive exact-match alignment: every partial injective matching is
/// enumerated; returns (most matches, fewest chunks among those). A match
/// continues a chunk when the previous candidate token is matched to an
/// adjacent reference position.
pub fn meteor_alignment_brute(cand: &[String], reference: &[String]) -> (usize, usize) {
    fn rec(
        i: usize,
        cand: &[String],
        reference: &[String],
        used: &mut Vec<bool>,
        assign: &mut Vec<Option<usize>>,
        best: &mut (usize, usize),
    ) {
        if i == cand.len() {
            let matches = assign.iter().flatten().count();
            let mut chunks = 0;
            for k in 0..assign.len() {
                if let Some(j) = assign[k] {
                    let continues = k > 0 && assign[k - 1].is_some_and(|p| p.abs_diff(j) == 1);
                    if !continues {
                        chunks += 1;
                    }
                }
            }
            if matches > best.0 || (matches == best.0 && chunks < best.1) {
                *best = (matches, chunks);
            }
            return;
        }
        assign.push(None);
        rec(i + 1, cand, reference, used, assign, best);
        assign.pop();
        for j in 0..reference.len() {
            if !used[j] && reference[j] == cand[i] {
                used[j] = true;
                assign.push(Some(j));
                rec(i + 1, cand, reference, used, assign, best);
                assign.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (0, usize::MAX);
    rec(
        0,
        cand,
        reference,
        &mut vec![false; reference.len()],
        &mut Vec::new(),
        &mut best,
    );
    if best.0 == 0 {
        (0, 0)
    } else {
        best
    }
}

/// Solves `a x = b` for a small dense system by Gaussian elimination with
/// partial pivoting. `a` is row-major `n x n`.
pub fn gauss_solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    assert_eq!(a.len(), n * n);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))
            .unwrap();
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            for k in col..n {
                a[r * n + k] -= f * a[col * n + k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r * n + k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r * n + r];
    }
    x
}

/// Weighted ridge with the bias regularized, built and solved from scratch.
/// Returns one row per output: `d` weights then the bias.
pub fn ridge_oracle(
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    weights: &[f64],
    lambda: f64,
) -> Vec<Vec<f64>> {
    let d = xs[0].len();
    let p = d + 1;
    let aug = |x: &Vec<f64>| -> Vec<f64> { x.iter().copied().chain([1.0]).collect() };
    let mut gram = vec![0.0; p * p];
    for (x, w) in xs.iter().zip(weights) {
        let x = aug(x);
        for r in 0..p {
            for c in 0..p {
                gram[r * p + c] += w * x[r] * x[c];
            }
        }
    }
    for k in 0..p {
        gram[k * p + k] += lambda;
    }
    (0..ys[0].len())
        .map(|k| {
            let mut rhs = vec![0.0; p];
            for ((x, y), w) in xs.iter().zip(ys).zip(weights) {
                for (r, v) in aug(x).into_iter().enumerate() {
                    rhs[r] += w * v * y[k];
                }
            }
            gauss_solve(gram.clone(), rhs)
        })
        .collect()
}

/// `1 - 6 sum d^2 / (n (n^2 - 1))` on two tie-free rank lists.
pub fn spearman_textbook(ra: &[usize], rb: &[usize]) -> f64 {
    let n = ra.len() as f64;
    let d2: f64 = ra
        .iter()
        .zip(rb)
        .map(|(a, b)| (*a as f64 - *b as f64).powi(2))
        .sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

/// Descending 1-based ranks without tie handling.
pub fn ranks_desc(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut r = vec![0; values.len()];
    for (pos, i) in order.into_iter().enumerate() {
        r[i] = pos + 1;
    }
    r
}

/// Models of a score map ordered by descending value, ties by name.
pub fn order_by_score(scores: &BTreeMap<String, f64>) -> Vec<String> {
    let mut v: Vec<(&String, f64)> = scores.iter().map(|(k, v)| (k, *v)).collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    v.into_iter().map(|(k, _)| k.clone()).collect()
}
