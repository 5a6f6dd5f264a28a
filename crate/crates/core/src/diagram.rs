//! Diagrams D(X,A), virtual diagrams K(X,A) ≅ ℤ^N, the W₁ matching
//! distance, and its translation-invariant lift ρ.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assignment;
use crate::error::{Error, Result};
use crate::metric_pair::QuotientGraph;

/// Multiset of off-diagonal vertices with nonnegative multiplicities.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagram {
    pub counts: BTreeMap<usize, u64>,
}

impl Diagram {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_counts(counts: impl IntoIterator<Item = (usize, u64)>) -> Self {
        let counts = counts.into_iter().filter(|&(_, m)| m > 0).collect();
        Self { counts }
    }

    pub fn total_mass(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Sum of two diagrams (multiset union).
    pub fn plus(&self, other: &Diagram) -> Diagram {
        let mut counts = self.counts.clone();
        for (&v, &m) in &other.counts {
            *counts.entry(v).or_insert(0) += m;
        }
        Diagram { counts }
    }

    /// Expand multiplicities into a flat list of vertex indices.
    pub fn expand(&self) -> Vec<usize> {
        let mut pts = Vec::with_capacity(self.total_mass() as usize);
        for (&v, &m) in &self.counts {
            for _ in 0..m {
                pts.push(v);
            }
        }
        pts
    }

    fn check_graph(&self, g: &QuotientGraph) -> Result<()> {
        for &v in self.counts.keys() {
            if v >= g.n_offdiag() {
                return Err(Error::GraphMismatch {
                    vertex: v,
                    n_offdiag: g.n_offdiag(),
                });
            }
        }
        Ok(())
    }
}

/// Element of K(X,A) ≅ ℤ^N: an integer coefficient vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VirtualDiagram {
    pub coeffs: Vec<i64>,
}

impl VirtualDiagram {
    pub fn zero(n: usize) -> Self {
        Self { coeffs: vec![0; n] }
    }

    pub fn new(coeffs: Vec<i64>) -> Self {
        Self { coeffs }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    pub fn plus(&self, other: &VirtualDiagram) -> VirtualDiagram {
        VirtualDiagram {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn minus(&self, other: &VirtualDiagram) -> VirtualDiagram {
        VirtualDiagram {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Embed a diagram into K(X,A).
    pub fn from_diagram(d: &Diagram, n: usize) -> Self {
        let mut coeffs = vec![0i64; n];
        for (&v, &m) in &d.counts {
            coeffs[v] += m as i64;
        }
        Self { coeffs }
    }
}

/// One matched unit: source, target (vertex index or basepoint) and multiplicity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchedPair {
    pub source: MatchEnd,
    pub target: MatchEnd,
    pub multiplicity: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MatchEnd {
    Vertex(usize),
    Basepoint,
}

/// An optimal matching realizing a W₁ distance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Matching {
    pub pairs: Vec<MatchedPair>,
    pub total_cost: f64,
}

fn end_dist(g: &QuotientGraph, a: MatchEnd, b: MatchEnd) -> f64 {
    match (a, b) {
        (MatchEnd::Vertex(u), MatchEnd::Vertex(v)) => g.quotient_dist(u, v),
        (MatchEnd::Vertex(u), MatchEnd::Basepoint) | (MatchEnd::Basepoint, MatchEnd::Vertex(u)) => {
            g.dist_to_basepoint(u)
        }
        (MatchEnd::Basepoint, MatchEnd::Basepoint) => 0.0,
    }
}

/// Exact W₁ distance between two diagrams, with an optimal matching.
///
/// Each point may match a point on the other side or the basepoint [A];
/// multiplicities are expanded into unit points and both sides padded with
/// basepoint copies to form a square assignment problem.
pub fn w1_distance(a: &Diagram, b: &Diagram, g: &QuotientGraph) -> Result<(f64, Matching)> {
    a.check_graph(g)?;
    b.check_graph(g)?;
    let pa = a.expand();
    let pb = b.expand();
    let (ka, kb) = (pa.len(), pb.len());
    let n = ka + kb;
    if n == 0 {
        return Ok((
            0.0,
            Matching {
                pairs: Vec::new(),
                total_cost: 0.0,
            },
        ));
    }
    // rows: a-points then kb basepoint copies; cols: b-points then ka copies
    let row_end = |i: usize| {
        if i < ka {
            MatchEnd::Vertex(pa[i])
        } else {
            MatchEnd::Basepoint
        }
    };
    let col_end = |j: usize| {
        if j < kb {
            MatchEnd::Vertex(pb[j])
        } else {
            MatchEnd::Basepoint
        }
    };
    let cost: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| end_dist(g, row_end(i), col_end(j))).collect())
        .collect();
    let (total, asg) = assignment::solve(&cost);

    let mut merged: BTreeMap<(MatchEnd, MatchEnd), u64> = BTreeMap::new();
    for (i, &j) in asg.iter().enumerate() {
        let (s, t) = (row_end(i), col_end(j));
        if s == MatchEnd::Basepoint && t == MatchEnd::Basepoint {
            continue;
        }
        *merged.entry((s, t)).or_insert(0) += 1;
    }
    let pairs = merged
        .into_iter()
        .map(|((source, target), multiplicity)| MatchedPair {
            source,
            target,
            multiplicity,
        })
        .collect();
    Ok((
        total,
        Matching {
            pairs,
            total_cost: total,
        },
    ))
}

/// Maximum total expanded points accepted by `w1_bruteforce`.
pub const BRUTEFORCE_LIMIT: usize = 6;

/// Exhaustive-enumeration W₁ oracle for tiny instances.
pub fn w1_bruteforce(a: &Diagram, b: &Diagram, g: &QuotientGraph) -> Result<f64> {
    a.check_graph(g)?;
    b.check_graph(g)?;
    let pa = a.expand();
    let pb = b.expand();
    let size = pa.len() + pb.len();
    if size > BRUTEFORCE_LIMIT {
        return Err(Error::TooLarge {
            size,
            limit: BRUTEFORCE_LIMIT,
        });
    }
    fn rec(i: usize, used: u32, pa: &[usize], pb: &[usize], g: &QuotientGraph) -> f64 {
        if i == pa.len() {
            // leftover b-points go to the basepoint
            return pb
                .iter()
                .enumerate()
                .filter(|(j, _)| used & (1 << j) == 0)
                .map(|(_, &v)| g.dist_to_basepoint(v))
                .sum();
        }
        // a-point to basepoint
        let mut best = g.dist_to_basepoint(pa[i]) + rec(i + 1, used, pa, pb, g);
        for (j, &v) in pb.iter().enumerate() {
            if used & (1 << j) == 0 {
                let c = g.quotient_dist(pa[i], v) + rec(i + 1, used | (1 << j), pa, pb, g);
                best = best.min(c);
            }
        }
        best
    }
    Ok(rec(0, 0, &pa, &pb, g))
}

/// Canonical representative of a virtual diagram: positive and negative
/// parts with disjoint supports and minimal total mass.
pub fn split(v: &VirtualDiagram) -> (Diagram, Diagram) {
    let mut pos = BTreeMap::new();
    let mut neg = BTreeMap::new();
    for (i, &c) in v.coeffs.iter().enumerate() {
        if c > 0 {
            pos.insert(i, c as u64);
        } else if c < 0 {
            neg.insert(i, (-c) as u64);
        }
    }
    (Diagram { counts: pos }, Diagram { counts: neg })
}

/// The translation-invariant metric ρ on K(X,A):
/// with u = a − b and v = c − e (canonical splits), ρ(u,v) = W₁(a+e, c+b).
pub fn rho(u: &VirtualDiagram, v: &VirtualDiagram, g: &QuotientGraph) -> Result<f64> {
    if u.dim() != g.n_offdiag() || v.dim() != g.n_offdiag() {
        return Err(Error::DimensionMismatch {
            expected: g.n_offdiag(),
            got: u.dim().max(v.dim()),
        });
    }
    let (a, b) = split(u);
    let (c, e) = split(v);
    let (cost, _) = w1_distance(&a.plus(&e), &c.plus(&b), g)?;
    Ok(cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_pair::{build_graph_model, build_metric_pair, graph_model_of};

    fn line_graph() -> QuotientGraph {
        let d = vec![
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 1.0],
            vec![2.0, 1.0, 0.0],
        ];
        graph_model_of(&build_metric_pair(d, vec![0]).unwrap()).unwrap()
    }

    #[test]
    fn single_point_to_empty() {
        let g = line_graph();
        let a = Diagram::from_counts([(0, 1)]);
        let b = Diagram::empty();
        let (cost, m) = w1_distance(&a, &b, &g).unwrap();
        assert_eq!(cost, 1.0);
        assert_eq!(m.pairs.len(), 1);
        assert_eq!(m.pairs[0].target, MatchEnd::Basepoint);
    }

    #[test]
    fn identical_diagrams_zero() {
        let g = line_graph();
        let a = Diagram::from_counts([(0, 2), (1, 1)]);
        let (cost, _) = w1_distance(&a, &a, &g).unwrap();
        assert!(cost.abs() < 1e-12);
    }

    #[test]
    fn empty_vs_empty_bruteforce() {
        let g = line_graph();
        assert_eq!(
            w1_bruteforce(&Diagram::empty(), &Diagram::empty(), &g).unwrap(),
            0.0
        );
    }

    #[test]
    fn bruteforce_rejects_large() {
        let g = line_graph();
        let a = Diagram::from_counts([(0, 5)]);
        let b = Diagram::from_counts([(1, 4)]);
        assert!(matches!(
            w1_bruteforce(&a, &b, &g),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn exact_matches_bruteforce_triangle() {
        let g = line_graph();
        let a = Diagram::from_counts([(0, 2)]);
        let b = Diagram::from_counts([(1, 1)]);
        let (cost, _) = w1_distance(&a, &b, &g).unwrap();
        let bf = w1_bruteforce(&a, &b, &g).unwrap();
        assert!((cost - bf).abs() < 1e-12);
    }

    #[test]
    fn birth_death_grid_diagonal_example() {
        // ground set: point (1,3) and its diagonal projection (2,2) under ℓ∞;
        // A = {(2,2)}. Matching (1,3) to the diagonal costs (3-1)/2 = 1.
        let d = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let pair = build_metric_pair(d, vec![1]).unwrap();
        let g = graph_model_of(&pair).unwrap();
        let a = Diagram::from_counts([(0, 1)]);
        let (cost, _) = w1_distance(&a, &Diagram::empty(), &g).unwrap();
        assert_eq!(cost, 1.0);
    }

    #[test]
    fn split_sign_cases() {
        let (p, n) = split(&VirtualDiagram::new(vec![3, -2]));
        assert_eq!(p, Diagram::from_counts([(0, 3)]));
        assert_eq!(n, Diagram::from_counts([(1, 2)]));

        let (p, n) = split(&VirtualDiagram::zero(4));
        assert!(p.counts.is_empty() && n.counts.is_empty());

        let (p, n) = split(&VirtualDiagram::new(vec![-1, 0, 5]));
        assert_eq!(p, Diagram::from_counts([(2, 5)]));
        assert_eq!(n, Diagram::from_counts([(0, 1)]));
    }

    #[test]
    fn rho_identity_and_elementary_move() {
        let g = line_graph();
        let v = VirtualDiagram::new(vec![2, -1]);
        assert_eq!(rho(&v, &v, &g).unwrap(), 0.0);
        // ρ(e_x − e_y, 0) = d̄₁(x,y) when direct matching is optimal
        let u = VirtualDiagram::new(vec![1, -1]);
        let z = VirtualDiagram::zero(2);
        assert_eq!(rho(&u, &z, &g).unwrap(), g.quotient_dist(0, 1));
    }

    #[test]
    fn rho_representative_independent() {
        // ρ computed from canonical splits must agree with W₁ of
        // non-canonical cross-sums.
        let g = line_graph();
        let u = VirtualDiagram::new(vec![2, -1]);
        let v = VirtualDiagram::new(vec![-1, 1]);
        let base = rho(&u, &v, &g).unwrap();
        // u = (a + w) − (b + w), v = (c + w) − (e + w) for w = {x₁:1, x₂:2}
        let w = Diagram::from_counts([(0, 1), (1, 2)]);
        let (a, b) = split(&u);
        let (c, e) = split(&v);
        let (alt, _) = w1_distance(&a.plus(&w).plus(&e.plus(&w)), &c.plus(&w).plus(&b.plus(&w)), &g)
            .unwrap();
        assert!((base - alt).abs() < 1e-12);
    }

    #[test]
    fn graph_mismatch_detected() {
        let q = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let g = build_graph_model(q).unwrap(); // N = 1
        let a = Diagram::from_counts([(3, 1)]);
        assert!(matches!(
            w1_distance(&a, &Diagram::empty(), &g),
            Err(Error::GraphMismatch { .. })
        ));
    }
}
