//! Finite metric pairs (X, d, A), the strengthened quotient metric on X/A,
//! and the weighted graph model carrying the Dirichlet form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for metric-axiom checks.
pub const METRIC_TOL: f64 = 1e-9;
/// Absolute tolerance for symmetry of the input matrix.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A finite metric space with a distinguished nonempty strict subset A.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricPair {
    dist: Vec<Vec<f64>>,
    subset_a: Vec<usize>,
}

impl MetricPair {
    pub fn n_points(&self) -> usize {
        self.dist.len()
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i][j]
    }

    pub fn subset_a(&self) -> &[usize] {
        &self.subset_a
    }

    /// Indices of X \ A in increasing order.
    pub fn offdiag_points(&self) -> Vec<usize> {
        (0..self.n_points())
            .filter(|i| !self.subset_a.contains(i))
            .collect()
    }

    /// Distance from point i to the subset A.
    pub fn dist_to_a(&self, i: usize) -> f64 {
        self.subset_a
            .iter()
            .map(|&a| self.dist[i][a])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Validate a distance matrix and subset, producing a `MetricPair`.
pub fn build_metric_pair(dist_matrix: Vec<Vec<f64>>, subset_a: Vec<usize>) -> Result<MetricPair> {
    let n = dist_matrix.len();
    for (i, row) in dist_matrix.iter().enumerate() {
        if row.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: row.len(),
            });
        }
        if dist_matrix[i][i].abs() > SYMMETRY_TOL {
            return Err(Error::MetricViolation {
                axiom: "zero diagonal",
                i,
                j: i,
                k: i,
            });
        }
    }
    for i in 0..n {
        for j in 0..n {
            let d = dist_matrix[i][j];
            if !d.is_finite() || d < 0.0 {
                return Err(Error::MetricViolation {
                    axiom: "nonnegative finite",
                    i,
                    j,
                    k: j,
                });
            }
            if (d - dist_matrix[j][i]).abs() > SYMMETRY_TOL {
                return Err(Error::MetricViolation {
                    axiom: "symmetry",
                    i,
                    j,
                    k: j,
                });
            }
            if i != j && d <= 0.0 {
                return Err(Error::MetricViolation {
                    axiom: "positivity",
                    i,
                    j,
                    k: j,
                });
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if dist_matrix[i][j] > dist_matrix[i][k] + dist_matrix[k][j] + METRIC_TOL {
                    return Err(Error::MetricViolation {
                        axiom: "triangle inequality",
                        i,
                        j,
                        k,
                    });
                }
            }
        }
    }
    let mut a = subset_a;
    a.sort_unstable();
    a.dedup();
    if a.is_empty() {
        return Err(Error::EmptySubset);
    }
    if let Some(&m) = a.last() {
        if m >= n {
            return Err(Error::DimensionMismatch { expected: n, got: m + 1 });
        }
    }
    if a.len() == n {
        return Err(Error::SubsetCoversAll);
    }
    Ok(MetricPair {
        dist: dist_matrix,
        subset_a: a,
    })
}

/// The 1-strengthened quotient metric on (X\A) ∪ {[A]}.
///
/// Returned matrix is indexed so that entries 0..N correspond to the
/// off-diagonal points in increasing original index, and entry N is the
/// collapsed class [A].
pub fn quotient_metric_1(pair: &MetricPair) -> Vec<Vec<f64>> {
    let off = pair.offdiag_points();
    let n = off.len();
    let mut m = vec![vec![0.0; n + 1]; n + 1];
    for (u, &x) in off.iter().enumerate() {
        for (v, &y) in off.iter().enumerate() {
            if u == v {
                continue;
            }
            let direct = pair.dist(x, y);
            let via_a = pair.dist_to_a(x) + pair.dist_to_a(y);
            m[u][v] = direct.min(via_a);
        }
        m[u][n] = pair.dist_to_a(x);
        m[n][u] = m[u][n];
    }
    m
}

/// Weighted graph model of (X/A, d̄₁): the complete graph with
/// lengths and weights both equal to d̄₁.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuotientGraph {
    n_offdiag: usize,
    /// Quotient metric matrix, basepoint last.
    quotient: Vec<Vec<f64>>,
    edges: Vec<Edge>,
    w_min: f64,
    w_max: f64,
    d_min: f64,
    d_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub length: f64,
    pub weight: f64,
}

impl QuotientGraph {
    /// Number N of off-diagonal vertices (excluding the basepoint).
    pub fn n_offdiag(&self) -> usize {
        self.n_offdiag
    }

    /// Index of the collapsed class [A].
    pub fn basepoint(&self) -> usize {
        self.n_offdiag
    }

    /// Quotient distance between two vertices (basepoint index allowed).
    pub fn quotient_dist(&self, u: usize, v: usize) -> f64 {
        self.quotient[u][v]
    }

    /// Distance from an off-diagonal vertex to the basepoint.
    pub fn dist_to_basepoint(&self, u: usize) -> f64 {
        self.quotient[u][self.n_offdiag]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn w_min(&self) -> f64 {
        self.w_min
    }

    pub fn w_max(&self) -> f64 {
        self.w_max
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    /// Number M of realized edges.
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn quotient_matrix(&self) -> &[Vec<f64>] {
        &self.quotient
    }
}

/// Build the complete-graph model from a quotient metric matrix
/// (basepoint last, as produced by `quotient_metric_1`).
///
/// Rejects matrices with a zero off-diagonal entry: distinct classes at
/// distance 0 are not quotiented further.
pub fn build_graph_model(quotient_matrix: Vec<Vec<f64>>) -> Result<QuotientGraph> {
    let total = quotient_matrix.len();
    if total < 2 {
        return Err(Error::EmptySubset);
    }
    let n = total - 1;
    let mut edges = Vec::with_capacity(total * (total - 1) / 2);
    let (mut w_min, mut w_max) = (f64::INFINITY, 0.0f64);
    for u in 0..total {
        for v in (u + 1)..total {
            let d = quotient_matrix[u][v];
            if d <= 0.0 {
                return Err(Error::MetricViolation {
                    axiom: "positivity",
                    i: u,
                    j: v,
                    k: v,
                });
            }
            w_min = w_min.min(d);
            w_max = w_max.max(d);
            edges.push(Edge {
                u,
                v,
                length: d,
                weight: d,
            });
        }
    }
    Ok(QuotientGraph {
        n_offdiag: n,
        quotient: quotient_matrix,
        edges,
        w_min,
        w_max,
        d_min: w_min,
        d_max: w_max,
    })
}

/// Convenience: quotient metric + graph model in one step.
pub fn graph_model_of(pair: &MetricPair) -> Result<QuotientGraph> {
    build_graph_model(quotient_metric_1(pair))
}
