//! Model rankings and Spearman rank correlation between metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MetricKind, ScoreTable};

/// Model id -> rank (1 = best). Tied models share the average of the ranks
/// they span, so the ranks always sum to `n(n+1)/2`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RankVector(pub BTreeMap<String, f64>);

impl RankVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, model: &str) -> Option<f64> {
        self.0.get(model).copied()
    }

    pub fn has_ties(&self) -> bool {
        let mut r: Vec<f64> = self.0.values().copied().collect();
        r.sort_by(f64::total_cmp);
        r.windows(2).any(|w| w[0] == w[1])
    }
}

/// Ranks scores in descending order; exactly equal scores get average ranks.
pub fn rank_scores(scores: &BTreeMap<String, f64>) -> RankVector {
    let mut items: Vec<(&String, f64)> = scores.iter().map(|(k, v)| (k, *v)).collect();
    items.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut out = BTreeMap::new();
    let mut start = 0;
    while start < items.len() {
        let mut end = start + 1;
        while end < items.len() && items[end].1 == items[start].1 {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let avg = (start + 1 + end) as f64 / 2.0;
        for (model, _) in &items[start..end] {
            out.insert((*model).clone(), avg);
        }
        start = end;
    }
    RankVector(out)
}

pub fn rank_models(table: &ScoreTable, metric: MetricKind) -> Result<RankVector> {
    Ok(rank_scores(&table.column(metric)?))
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        // A constant ranking carries no order information.
        return if sxx == 0.0 && syy == 0.0 { 1.0 } else { 0.0 };
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

fn paired(a: &RankVector, b: &RankVector) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.0.len() != b.0.len() || a.0.keys().zip(b.0.keys()).any(|(x, y)| x != y) {
        let only_a: Vec<&String> = a.0.keys().filter(|k| !b.0.contains_key(*k)).collect();
        let only_b: Vec<&String> = b.0.keys().filter(|k| !a.0.contains_key(*k)).collect();
        return Err(Error::KeyMismatch(format!(
            "only in first: {only_a:?}; only in second: {only_b:?}"
        )));
    }
    if a.len() < 2 {
        return Err(Error::Config("spearman needs at least two models".into()));
    }
    Ok((
        a.0.values().copied().collect(),
        b.0.values().copied().collect(),
    ))
}

/// Spearman's rho as the Pearson correlation of (tie-averaged) ranks.
pub fn spearman(a: &RankVector, b: &RankVector) -> Result<f64> {
    let (x, y) = paired(a, b)?;
    Ok(pearson(&x, &y))
}

/// `1 - 6 sum d^2 / (n (n^2 - 1))`; only valid without ties.
pub fn spearman_closed_form(a: &RankVector, b: &RankVector) -> Result<f64> {
    let (x, y) = paired(a, b)?;
    let n = x.len() as f64;
    let d2: f64 = x.iter().zip(&y).map(|(p, q)| (p - q) * (p - q)).sum();
    Ok(1.0 - 6.0 * d2 / (n * (n * n - 1.0)))
}

/// Labeled correlation matrix. Square matrices built by
/// [`correlate_square`] are symmetric with a unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, row: &str, column: &str) -> Option<f64> {
        let r = self.rows.iter().position(|x| x == row)?;
        let c = self.columns.iter().position(|x| x == column)?;
        Some(self.values[r][c])
    }
}

/// A ranking source: one metric, or the sum of several.
#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub label: String,
    pub parts: Vec<MetricKind>,
}

impl Criterion {
    pub fn single(metric: MetricKind) -> Self {
        Self {
            label: metric.name().to_string(),
            parts: vec![metric],
        }
    }

    pub fn sum(parts: &[MetricKind]) -> Self {
        Self {
            label: parts.iter().map(|m| m.name()).collect::<Vec<_>>().join("+"),
            parts: parts.to_vec(),
        }
    }

    pub fn scores(&self, table: &ScoreTable) -> Result<BTreeMap<String, f64>> {
        let mut out: BTreeMap<String, f64> = BTreeMap::new();
        for m in &self.parts {
            for (model, v) in table.column(*m)? {
                *out.entry(model).or_insert(0.0) += v;
            }
        }
        Ok(out)
    }

    pub fn ranks(&self, table: &ScoreTable) -> Result<RankVector> {
        Ok(rank_scores(&self.scores(table)?))
    }
}

/// Criteria for the rows of a proposed-vs-standard matrix: each proposed
/// metric alone, then every pairwise sum, then the full sum (read from the
/// table's WCC column when every component is proposed and WCC exists).
pub fn proposed_criteria(table: &ScoreTable, proposed: &[MetricKind]) -> Vec<Criterion> {
    let present: Vec<MetricKind> = proposed
        .iter()
        .copied()
        .filter(|m| table.has_metric(*m) && !m.is_aggregate())
        .collect();
    let mut out: Vec<Criterion> = present.iter().map(|m| Criterion::single(*m)).collect();
    for i in 0..present.len() {
        for j in i + 1..present.len() {
            out.push(Criterion::sum(&[present[i], present[j]]));
        }
    }
    if present.len() >= 3 {
        if present == MetricKind::PROPOSED && table.has_metric(MetricKind::Wcc) {
            out.push(Criterion::single(MetricKind::Wcc));
        } else if present == MetricKind::PROPOSED {
            let mut c = Criterion::sum(&present);
            c.label = MetricKind::Wcc.name().to_string();
            out.push(c);
        } else {
            out.push(Criterion::sum(&present));
        }
    }
    out
}

/// Spearman correlations between every row criterion and every column metric.
pub fn correlate(
    table: &ScoreTable,
    rows: &[Criterion],
    columns: &[Criterion],
) -> Result<CorrelationMatrix> {
    let col_ranks: Vec<RankVector> = columns
        .iter()
        .map(|c| c.ranks(table))
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(rows.len());
    for r in rows {
        let rr = r.ranks(table)?;
        values.push(
            col_ranks
                .iter()
                .map(|cr| spearman(&rr, cr))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(CorrelationMatrix {
        rows: rows.iter().map(|c| c.label.clone()).collect(),
        columns: columns.iter().map(|c| c.label.clone()).collect(),
        values,
    })
}

/// Proposed metrics (and their combinations) against standard metrics.
/// Columns are the standard metrics present in every row of the table.
pub fn correlate_all(
    table: &ScoreTable,
    proposed: &[MetricKind],
    standard: &[MetricKind],
) -> Result<CorrelationMatrix> {
    let rows = proposed_criteria(table, proposed);
    if rows.is_empty() {
        return Err(Error::Config(
            "no proposed metric present in the score table".into(),
        ));
    }
    let cols: Vec<Criterion> = standard
        .iter()
        .filter(|m| table.has_metric(**m))
        .map(|m| Criterion::single(*m))
        .collect();
    if cols.is_empty() {
        return Err(Error::Config(
            "no standard metric present in the score table".into(),
        ));
    }
    correlate(table, &rows, &cols)
}

/// Symmetric metric-by-metric matrix.
pub fn correlate_square(table: &ScoreTable, metrics: &[MetricKind]) -> Result<CorrelationMatrix> {
    let c: Vec<Criterion> = metrics.iter().map(|m| Criterion::single(*m)).collect();
    correlate(table, &c, &c)
}
