//! Shared generators and independent oracles for the acceptance suite.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use vpd::cubical::{GrayImage, RawDiagram};
use vpd::metric_pair::{build_metric_pair, graph_model_of, QuotientGraph};

/// Random metric pair from planar points (Euclidean distances are always a
/// metric); the first point forms A, the remaining n−1 are off-diagonal.
pub fn random_graph(rng: &mut ChaCha8Rng, n_points: usize) -> QuotientGraph {
    loop {
        let pts: Vec<(f64, f64)> = (0..n_points)
            .map(|_| (rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0)))
            .collect();
        let mut min_d = f64::INFINITY;
        for i in 0..n_points {
            for j in (i + 1)..n_points {
                let d = ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt();
                min_d = min_d.min(d);
            }
        }
        if n_points > 1 && min_d < 0.1 {
            continue;
        }
        let dist: Vec<Vec<f64>> = pts
            .iter()
            .map(|a| {
                pts.iter()
                    .map(|b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt())
                    .collect()
            })
            .collect();
        let pair = build_metric_pair(dist, vec![0]).unwrap();
        return graph_model_of(&pair).unwrap();
    }
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < sa.len() && j < sb.len() {
        if sa[i] <= sb[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let r = self.find(self.parent[x]);
            self.parent[x] = r;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Betti numbers (β₀, β₁) of the sublevel set at threshold `v`, computed
/// from scratch: union-find over pixels for components, then the Euler
/// characteristic of the V-construction complex for cycles
/// (β₁ = β₀ − V + E − F; no β₂ in 2D).
pub fn betti_oracle(img: &GrayImage, v: f64) -> (usize, usize) {
    let (h, w) = (img.height(), img.width());
    let in_sub = |r: usize, c: usize| img.pixel(r, c) <= v;
    let id = |r: usize, c: usize| r * w + c;
    let mut uf = UnionFind::new(h * w);
    let mut n_v = 0usize;
    let mut n_e = 0usize;
    let mut n_f = 0usize;
    for r in 0..h {
        for c in 0..w {
            if !in_sub(r, c) {
                continue;
            }
            n_v += 1;
            if c + 1 < w && in_sub(r, c + 1) {
                n_e += 1;
                uf.union(id(r, c), id(r, c + 1));
            }
            if r + 1 < h && in_sub(r + 1, c) {
                n_e += 1;
                uf.union(id(r, c), id(r + 1, c));
            }
            if r + 1 < h
                && c + 1 < w
                && in_sub(r, c + 1)
                && in_sub(r + 1, c)
                && in_sub(r + 1, c + 1)
            {
                n_f += 1;
            }
        }
    }
    let mut roots = std::collections::BTreeSet::new();
    for r in 0..h {
        for c in 0..w {
            if in_sub(r, c) {
                let root = uf.find(id(r, c));
                roots.insert(root);
            }
        }
    }
    let b0 = roots.len();
    let b1 = (b0 + n_e) as i64 - (n_v + n_f) as i64;
    assert!(b1 >= 0, "negative cycle count");
    (b0, b1 as usize)
}

/// Betti numbers read off a persistence diagram: points alive at `v`
/// (birth ≤ v < death; essential classes always alive once born).
pub fn betti_from_diagram(rd: &RawDiagram, v: f64) -> (usize, usize) {
    let alive = |dim: usize| {
        rd.points
            .iter()
            .filter(|p| p.dim == dim && p.birth <= v && v < p.death)
            .count()
    };
    (alive(0), alive(1))
}
