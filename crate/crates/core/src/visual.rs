//! Projection of sentences into the visual feature space and the two
//! cosine-based relevance scores computed there.
//!
//! A sentence is encoded as the mean of its in-vocabulary word vectors and
//! mapped into the visual space by a per-language linear projector fitted
//! with weighted ridge regression.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io::EmbeddingTable;
use crate::model::{Language, Sentence};

/// Default visual feature dimension (ResNeXt-style pooled features).
pub const DEFAULT_VISUAL_DIM: usize = 2048;
pub const DEFAULT_LAMBDA: f64 = 1.0;
/// Default weight of human-written pairs relative to machine-translated ones.
pub const DEFAULT_HUMAN_WEIGHT: f64 = 5.0;

/// Mean word vector of a sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceRepr(pub Vec<f64>);

impl SentenceRepr {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn sentence_repr(sentence: &Sentence, table: &EmbeddingTable) -> Result<SentenceRepr> {
    let mut sum = vec![0.0; table.dim()];
    let mut n = 0usize;
    for tok in sentence.tokens() {
        if let Some(v) = table.get(tok) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::AllOov(sentence.tokens().to_vec()));
    }
    for s in &mut sum {
        *s /= n as f64;
    }
    Ok(SentenceRepr(sum))
}

/// One training example for a projector.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub repr: SentenceRepr,
    pub target: Vec<f64>,
    pub weight: f64,
}

impl TrainingPair {
    pub fn new(repr: SentenceRepr, target: Vec<f64>) -> Self {
        Self {
            repr,
            target,
            weight: 1.0,
        }
    }

    pub fn weighted(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }
}

/// Affine map from sentence space (dim `d`) to visual space (dim `d_v`).
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    /// `d_v x (d + 1)`; the last column is the bias.
    coef: DMatrix<f64>,
    pub language: Language,
    pub lambda: f64,
}

impl Projector {
    /// Builds a projector from explicit weights (`d_v x d`) and bias (`d_v`).
    pub fn from_parts(
        weights: DMatrix<f64>,
        bias: DVector<f64>,
        language: Language,
        lambda: f64,
    ) -> Result<Self> {
        if weights.nrows() != bias.len() {
            return Err(Error::DimensionMismatch {
                expected: weights.nrows(),
                actual: bias.len(),
            });
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Config("projector weights must be finite".into()));
        }
        let d = weights.ncols();
        let mut coef = weights.insert_column(d, 0.0);
        let last = coef.ncols() - 1;
        coef.set_column(last, &bias);
        Ok(Self {
            coef,
            language,
            lambda,
        })
    }

    /// Input (sentence) dimension.
    pub fn input_dim(&self) -> usize {
        self.coef.ncols() - 1
    }

    /// Output (visual) dimension.
    pub fn output_dim(&self) -> usize {
        self.coef.nrows()
    }

    pub fn weights(&self) -> DMatrix<f64> {
        self.coef.columns(0, self.input_dim()).into_owned()
    }

    pub fn bias(&self) -> DVector<f64> {
        self.coef.column(self.input_dim()).into_owned()
    }

    pub fn project_slice(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        let d = self.input_dim();
        Ok((0..self.output_dim())
            .map(|k| {
                let row = self.coef.row(k);
                (0..d).map(|c| row[c] * x[c]).sum::<f64>() + row[d]
            })
            .collect())
    }

    pub fn project(&self, r: &SentenceRepr) -> Result<Vec<f64>> {
        self.project_slice(&r.0)
    }

    /// Text layout: header `<d> <d_v> <lambda> <language>`, then one line
    /// per output coordinate `<k> <w_k1> ... <w_kd> <bias_k>`.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "{} {} {} {}",
            self.input_dim(),
            self.output_dim(),
            self.lambda,
            self.language
        )?;
        for k in 0..self.output_dim() {
            write!(w, "{k}")?;
            for v in self.coef.row(k).iter() {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format(1, "missing header"))??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::format(
                1,
                "header must be \"<d> <d_v> <lambda> <language>\"",
            ));
        }
        let d: usize = fields[0]
            .parse()
            .map_err(|_| Error::format(1, "invalid d"))?;
        let dv: usize = fields[1]
            .parse()
            .map_err(|_| Error::format(1, "invalid d_v"))?;
        let lambda: f64 = fields[2]
            .parse()
            .map_err(|_| Error::format(1, "invalid lambda"))?;
        let language: Language = fields[3]
            .parse()
            .map_err(|_| Error::format(1, "invalid language"))?;

        let mut coef = DMatrix::zeros(dv, d + 1);
        let mut k = 0;
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            if k == dv {
                return Err(Error::format(lineno, "more rows than declared"));
            }
            let values: Vec<f64> = line
                .split_whitespace()
                .skip(1)
                .map(|f| {
                    f.parse()
                        .map_err(|_| Error::format(lineno, format!("invalid number {f:?}")))
                })
                .collect::<Result<_>>()?;
            if values.len() != d + 1 {
                return Err(Error::format(
                    lineno,
                    format!("expected {} values, found {}", d + 1, values.len()),
                ));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::value(lineno, "non-finite weight"));
            }
            for (c, v) in values.into_iter().enumerate() {
                coef[(k, c)] = v;
            }
            k += 1;
        }
        if k != dv {
            return Err(Error::format(
                k + 2,
                format!("expected {dv} rows, found {k}"),
            ));
        }
        Ok(Self {
            coef,
            language,
            lambda,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

/// Gram matrix `X^T D X + lambda I` and right-hand side `X^T D Y` of the
/// weighted ridge problem, with `X` augmented by a constant-1 column.
fn normal_equations(pairs: &[TrainingPair], lambda: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let first = pairs
        .first()
        .ok_or_else(|| Error::Config("cannot train a projector on zero pairs".into()))?;
    let d = first.repr.dim();
    let dv = first.target.len();
    let p = d + 1;
    for pair in pairs {
        if pair.repr.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: pair.repr.dim(),
            });
        }
        if pair.target.len() != dv {
            return Err(Error::DimensionMismatch {
                expected: dv,
                actual: pair.target.len(),
            });
        }
        if !(pair.weight.is_finite() && pair.weight > 0.0) {
            return Err(Error::Config(format!(
                "pair weight must be positive, got {}",
                pair.weight
            )));
        }
    }

    let x = DMatrix::from_fn(pairs.len(), p, |i, c| {
        let s = pairs[i].weight.sqrt();
        if c < d {
            s * pairs[i].repr.0[c]
        } else {
            s
        }
    });
    let y = DMatrix::from_fn(pairs.len(), dv, |i, k| {
        pairs[i].weight.sqrt() * pairs[i].target[k]
    });
    let mut gram = x.tr_mul(&x);
    for c in 0..p {
        gram[(c, c)] += lambda;
    }
    let rhs = x.tr_mul(&y);
    Ok((gram, rhs))
}

/// Largest per-output relative residual `|G w_k - b_k| / |b_k|`.
fn relative_residual(gram: &DMatrix<f64>, sol: &DMatrix<f64>, rhs: &DMatrix<f64>) -> f64 {
    let r = gram * sol - rhs;
    (0..rhs.ncols())
        .map(|k| {
            let bn = rhs.column(k).norm();
            let rn = r.column(k).norm();
            if bn == 0.0 {
                rn
            } else {
                rn / bn
            }
        })
        .fold(0.0, f64::max)
}

pub const RIDGE_RESIDUAL_TOL: f64 = 1e-8;

/// Weighted ridge regression `min sum w_i |W x~_i - y_i|^2 + lambda |W|_F^2`,
/// bias coordinate regularized like the rest. The normal equations are
/// solved by Cholesky with iterative refinement until the per-output
/// residual is below `1e-8 |X^T y_k|`.
pub fn train_projector(
    pairs: &[TrainingPair],
    lambda: f64,
    language: Language,
) -> Result<Projector> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Config(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let (gram, rhs) = normal_equations(pairs, lambda)?;
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Solver("normal equations are not positive definite".into()))?;
    let mut sol = chol.solve(&rhs);
    for _ in 0..3 {
        if relative_residual(&gram, &sol, &rhs) < RIDGE_RESIDUAL_TOL {
            break;
        }
        let r = &rhs - &gram * &sol;
        sol += chol.solve(&r);
    }
    let res = relative_residual(&gram, &sol, &rhs);
    if res >= RIDGE_RESIDUAL_TOL {
        return Err(Error::Solver(format!(
            "normal-equation residual {res:e} too large"
        )));
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("non-finite projector weights".into()));
    }
    Ok(Projector {
        coef: sol.transpose(),
        language,
        lambda,
    })
}

/// Residual of a trained projector's normal equations on `pairs`.
pub fn normal_equation_residual(projector: &Projector, pairs: &[TrainingPair]) -> Result<f64> {
    let (gram, rhs) = normal_equations(pairs, projector.lambda)?;
    Ok(relative_residual(&gram, &projector.coef.transpose(), &rhs))
}

/// Weighted sum of squared prediction errors.
pub fn fit_error(projector: &Projector, pairs: &[TrainingPair]) -> Result<f64> {
    let mut total = 0.0;
    for p in pairs {
        let y = projector.project(&p.repr)?;
        total += p.weight
            * y.iter()
                .zip(&p.target)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
    }
    Ok(total)
}

/// Picks lambda from `grid` by `folds`-fold cross-validation on held-out
/// weighted squared error. Fold assignment is a seeded shuffle.
pub fn select_lambda(pairs: &[TrainingPair], grid: &[f64], folds: usize, seed: u64) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Config("empty lambda grid".into()));
    }
    if folds < 2 || pairs.len() < folds {
        return Err(Error::Config(format!(
            "need at least {folds} pairs and 2 folds for cross-validation"
        )));
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut best = (f64::INFINITY, grid[0]);
    for &lambda in grid {
        let mut err = 0.0;
        for f in 0..folds {
            let (mut train, mut test) = (Vec::new(), Vec::new());
            for (pos, &i) in order.iter().enumerate() {
                if pos % folds == f {
                    test.push(pairs[i].clone());
                } else {
                    train.push(pairs[i].clone());
                }
            }
            let p = train_projector(&train, lambda, Language::Target)?;
            err += fit_error(&p, &test)?;
        }
        log::debug!("lambda {lambda}: cross-validated error {err}");
        if err < best.0 {
            best = (err, lambda);
        }
    }
    Ok(best.1)
}

/// Cosine similarity, clamped to `[-1, 1]` against rounding.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Cross-lingual relevance: cosine between the projected source reference
/// and the projected candidate. Negative values are kept.
pub fn clinrel(
    candidate: &Sentence,
    source_ref: &Sentence,
    proj_target: &Projector,
    proj_source: &Projector,
    table_target: &EmbeddingTable,
    table_source: &EmbeddingTable,
) -> Result<f64> {
    let vs = proj_source.project(&sentence_repr(source_ref, table_source)?)?;
    let vt = proj_target.project(&sentence_repr(candidate, table_target)?)?;
    cosine(&vs, &vt)
}

/// Cross-media relevance: cosine between the projected candidate and the
/// image's visual feature.
pub fn cmedrel(
    candidate: &Sentence,
    image_feature: &[f64],
    proj_target: &Projector,
    table_target: &EmbeddingTable,
) -> Result<f64> {
    let vt = proj_target.project(&sentence_repr(candidate, table_target)?)?;
    cosine(&vt, image_feature)
}
