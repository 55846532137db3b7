//! Word Mover's Distance: exact optimal transport between normalized
//! bag-of-words distributions, its centroid and relaxed lower bounds, and the
//! normalized relevance score built on it.
//!
//! The transportation problem is solved as a min-cost flow on the bipartite
//! support graph with successive shortest paths (Dijkstra on reduced costs).
//! After solving, a Bellman-Ford pass over the residual graph produces dual
//! potentials that certify optimality.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::io::EmbeddingTable;
use crate::model::Sentence;

/// Residual capacities below this are treated as exhausted.
const CAP_EPS: f64 = 1e-13;

/// Normalized bag-of-words: distinct in-vocabulary words with their
/// frequency mass.
#[derive(Debug, Clone, PartialEq)]
pub struct NBow {
    labels: Vec<String>,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl NBow {
    /// Builds a distribution from explicit support points and weights.
    /// Weights must be positive and sum to one within 1e-12.
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::Config(
                "support must be non-empty with one weight per point".into(),
            ));
        }
        let dim = points[0].len();
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: points
                    .iter()
                    .map(Vec::len)
                    .find(|&l| l != dim)
                    .unwrap_or(dim),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Config("weights must be positive and finite".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("weights sum to {total}, not 1")));
        }
        let labels = (0..points.len()).map(|i| i.to_string()).collect();
        Ok(Self {
            labels,
            points,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Support words, in order of first occurrence.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.points[0].len()];
        for (p, w) in self.points.iter().zip(&self.weights) {
            for (ci, pi) in c.iter_mut().zip(p) {
                *ci += w * pi;
            }
        }
        c
    }
}

fn nbow_impl(
    sentence: &Sentence,
    table: &EmbeddingTable,
    stopwords: Option<&HashSet<String>>,
) -> Result<NBow> {
    let mut order: Vec<&str> = Vec::new();
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let mut total = 0usize;
    for tok in sentence.tokens() {
        if stopwords.is_some_and(|s| s.contains(tok)) || table.get(tok).is_none() {
            continue;
        }
        let c = counts.entry(tok.as_str()).or_insert(0);
        if *c == 0 {
            order.push(tok);
        }
        *c += 1;
        total += 1;
    }
    if total == 0 {
        return Err(Error::AllOov(sentence.tokens().to_vec()));
    }
    let total = total as f64;
    Ok(NBow {
        labels: order.iter().map(|t| t.to_string()).collect(),
        points: order
            .iter()
            .map(|t| table.get(t).expect("in vocabulary").to_vec())
            .collect(),
        weights: order.iter().map(|t| counts[t] as f64 / total).collect(),
    })
}

/// nBOW of a sentence: each distinct in-vocabulary token weighted by its
/// share of in-vocabulary occurrences. Out-of-vocabulary tokens are dropped.
pub fn nbow(sentence: &Sentence, table: &EmbeddingTable) -> Result<NBow> {
    nbow_impl(sentence, table, None)
}

/// Like [`nbow`], additionally dropping tokens listed in `stopwords`.
pub fn nbow_without(
    sentence: &Sentence,
    table: &EmbeddingTable,
    stopwords: &HashSet<String>,
) -> Result<NBow> {
    nbow_impl(sentence, table, Some(stopwords))
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Row-major `a.len() x b.len()` matrix of Euclidean ground costs.
pub fn cost_matrix(a: &NBow, b: &NBow) -> Vec<f64> {
    let mut c = Vec::with_capacity(a.len() * b.len());
    for p in &a.points {
        for q in &b.points {
            c.push(euclidean(p, q));
        }
    }
    c
}

/// Optimal flow between two discrete distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    /// Non-zero entries `(i, j, mass)` in row-major order.
    pub flows: Vec<(usize, usize, f64)>,
    pub cost: f64,
    /// Dual potentials with `row_duals[i] + col_duals[j] <= c(i, j)`,
    /// tight wherever flow is positive.
    pub row_duals: Vec<f64>,
    pub col_duals: Vec<f64>,
}

impl TransportPlan {
    pub fn dense(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.rows * self.cols];
        for &(i, j, f) in &self.flows {
            t[i * self.cols + j] = f;
        }
        t
    }

    /// Largest deviation of row/column sums from the marginals.
    pub fn marginal_residual(&self, supply: &[f64], demand: &[f64]) -> f64 {
        let mut rs = vec![0.0; self.rows];
        let mut cs = vec![0.0; self.cols];
        for &(i, j, f) in &self.flows {
            rs[i] += f;
            cs[j] += f;
        }
        rs.iter()
            .zip(supply)
            .chain(cs.iter().zip(demand))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Dual objective; equals `cost` at optimality.
    pub fn dual_objective(&self, supply: &[f64], demand: &[f64]) -> f64 {
        self.row_duals
            .iter()
            .zip(supply)
            .map(|(u, a)| u * a)
            .sum::<f64>()
            + self
                .col_duals
                .iter()
                .zip(demand)
                .map(|(v, b)| v * b)
                .sum::<f64>()
    }

    /// Worst violation of dual feasibility `u_i + v_j <= c_ij`.
    pub fn dual_violation(&self, cost: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let slack = cost[i * self.cols + j] - self.row_duals[i] - self.col_duals[j];
                worst = worst.max(-slack);
            }
        }
        worst
    }
}

/// Solves `min sum c_ij T_ij` subject to row sums `supply`, column sums
/// `demand`, `T >= 0`. `cost` is row-major `supply.len() x demand.len()` and
/// must be non-negative. Supply and demand must carry equal total mass.
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> TransportPlan {
    let m = supply.len();
    let n = demand.len();
    assert_eq!(cost.len(), m * n, "cost matrix shape");
    debug_assert!(cost.iter().all(|c| *c >= 0.0));

    // Node layout: 0 = source, 1..=m rows, m+1..=m+n columns, m+n+1 = sink.
    let source = 0;
    let sink = m + n + 1;
    let nodes = m + n + 2;
    let row = |i: usize| 1 + i;
    let col = |j: usize| 1 + m + j;

    let mut supply_left = supply.to_vec();
    let mut demand_left = demand.to_vec();
    let mut flow = vec![0.0; m * n];
    let mut potential = vec![0.0; nodes];

    let mut dist = vec![f64::INFINITY; nodes];
    let mut prev = vec![usize::MAX; nodes];
    let mut done = vec![false; nodes];

    loop {
        if !supply_left.iter().any(|&s| s > CAP_EPS) || !demand_left.iter().any(|&d| d > CAP_EPS) {
            break;
        }

        dist.fill(f64::INFINITY);
        prev.fill(usize::MAX);
        done.fill(false);
        dist[source] = 0.0;

        // Dense Dijkstra on reduced costs; the graph is complete bipartite so
        // an O(V^2) scan beats a heap.
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..nodes {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX || u == sink {
                break;
            }
            done[u] = true;

            let relax = |v: usize, w: f64, dist: &mut [f64], prev: &mut [usize]| {
                let rc = (w + potential[u] - potential[v]).max(0.0);
                let nd = dist[u] + rc;
                if nd < dist[v] {
                    dist[v] = nd;
                    prev[v] = u;
                }
            };

            if u == source {
                for (i, left) in supply_left.iter().enumerate() {
                    if *left > CAP_EPS {
                        relax(row(i), 0.0, &mut dist, &mut prev);
                    }
                }
            } else if u <= m {
                let i = u - 1;
                if supply[i] - supply_left[i] > CAP_EPS {
                    relax(source, 0.0, &mut dist, &mut prev);
                }
                for j in 0..n {
                    relax(col(j), cost[i * n + j], &mut dist, &mut prev);
                }
            } else {
                let j = u - 1 - m;
                for i in 0..m {
                    if flow[i * n + j] > CAP_EPS {
                        relax(row(i), -cost[i * n + j], &mut dist, &mut prev);
                    }
                }
                if demand_left[j] > CAP_EPS {
                    relax(sink, 0.0, &mut dist, &mut prev);
                }
            }
        }

        if !dist[sink].is_finite() {
            break;
        }
        let dt = dist[sink];
        for v in 0..nodes {
            potential[v] += dist[v].min(dt);
        }

        // Walk back from the sink to find the bottleneck.
        let mut path = vec![sink];
        let mut v = sink;
        while v != source {
            v = prev[v];
            path.push(v);
        }
        path.reverse();

        let mut delta = f64::INFINITY;
        for w in path.windows(2) {
            let (a, b) = (w[0], w[1]);
            let cap = if a == source {
                supply_left[b - 1]
            } else if b == sink {
                demand_left[a - 1 - m]
            } else if b == source {
                supply[a - 1] - supply_left[a - 1]
            } else if a <= m {
                f64::INFINITY
            } else {
                flow[(b - 1) * n + (a - 1 - m)]
            };
            delta = delta.min(cap);
        }

        for w in path.windows(2) {
            let (a, b) = (w[0], w[1]);
            if a == source {
                supply_left[b - 1] -= delta;
            } else if b == sink {
                demand_left[a - 1 - m] -= delta;
            } else if b == source {
                supply_left[a - 1] += delta;
            } else if a <= m {
                flow[(a - 1) * n + (b - 1 - m)] += delta;
            } else {
                let idx = (b - 1) * n + (a - 1 - m);
                flow[idx] -= delta;
                if flow[idx] < CAP_EPS {
                    flow[idx] = 0.0;
                }
            }
        }
    }

    let mut flows = Vec::new();
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..n {
            let f = flow[i * n + j];
            if f > 0.0 {
                flows.push((i, j, f));
                total += f * cost[i * n + j];
            }
        }
    }
    let (row_duals, col_duals) = certify(m, n, cost, &flow);
    TransportPlan {
        rows: m,
        cols: n,
        flows,
        cost: total,
        row_duals,
        col_duals,
    }
}

/// Dual potentials from shortest distances in the residual graph: forward
/// arcs `i -> j` at cost `c_ij`, backward arcs `j -> i` at `-c_ij` wherever
/// flow is positive. A negative cycle would mean the flow is not optimal.
fn certify(m: usize, n: usize, cost: &[f64], flow: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut dr = vec![0.0; m];
    let mut dc = vec![0.0; n];
    for _ in 0..(m + n) {
        let mut changed = false;
        for i in 0..m {
            for j in 0..n {
                let c = cost[i * n + j];
                if dr[i] + c < dc[j] - 1e-12 {
                    dc[j] = dr[i] + c;
                    changed = true;
                }
                if flow[i * n + j] > 0.0 && dc[j] - c < dr[i] - 1e-12 {
                    dr[i] = dc[j] - c;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    (dr.into_iter().map(|d| -d).collect(), dc)
}

/// Exact Word Mover's Distance and the optimal plan.
pub fn wmd(a: &NBow, b: &NBow) -> (f64, TransportPlan) {
    let cost = cost_matrix(a, b);
    let plan = solve_transport(&a.weights, &b.weights, &cost);
    (plan.cost, plan)
}

/// Word centroid distance: Euclidean distance between weighted centroids.
pub fn wcd(a: &NBow, b: &NBow) -> f64 {
    euclidean(&a.centroid(), &b.centroid())
}

/// Relaxed WMD: the larger of the two one-sided relaxations in which every
/// word moves all of its mass to its nearest counterpart.
pub fn rwmd(a: &NBow, b: &NBow) -> f64 {
    let cost = cost_matrix(a, b);
    let n = b.len();
    let forward: f64 = a
        .weights
        .iter()
        .enumerate()
        .map(|(i, w)| {
            w * cost[i * n..(i + 1) * n]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    let backward: f64 = b
        .weights
        .iter()
        .enumerate()
        .map(|(j, w)| {
            w * (0..a.len())
                .map(|i| cost[i * n + j])
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    forward.max(backward)
}

/// `1 - distance / z`, clamped to `[0, 1]`.
pub fn relevance_from_distance(distance: f64, z: f64) -> Result<f64> {
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::Config(format!(
            "normalizer z must be positive, got {z}"
        )));
    }
    Ok((1.0 - distance / z).clamp(0.0, 1.0))
}

/// WMD-based relevance of a candidate against a machine-translated reference.
pub fn wmdrel(
    candidate: &Sentence,
    mt_ref: &Sentence,
    table: &EmbeddingTable,
    z: f64,
) -> Result<f64> {
    relevance_from_distance(0.0, z)?;
    let a = nbow(candidate, table)?;
    let b = nbow(mt_ref, table)?;
    relevance_from_distance(wmd(&a, &b).0, z)
}
