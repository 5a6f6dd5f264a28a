//! 2D cubical sublevel persistence (H₀, H₁) for small grayscale images,
//! and quantization of diagram points onto a finite ground grid.

use serde::{Deserialize, Serialize};

use crate::diagram::Diagram;
use crate::error::{Error, Result};
use crate::metric_pair::{build_metric_pair, graph_model_of, MetricPair, QuotientGraph};

pub const MAX_IMAGE_SIDE: usize = 128;

/// Row-major grayscale image; pixel values are the filtration values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || width > MAX_IMAGE_SIDE || height > MAX_IMAGE_SIDE {
            return Err(Error::TooLarge {
                size: width.max(height),
                limit: MAX_IMAGE_SIDE,
            });
        }
        if pixels.len() != width * height || pixels.iter().any(|p| !p.is_finite()) {
            return Err(Error::ShapeMismatch {
                a: (height, width),
                b: (1, pixels.len()),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawPoint {
    pub birth: f64,
    /// `f64::INFINITY` marks the essential H₀ class.
    #[serde(with = "death_serde")]
    pub death: f64,
    pub dim: usize,
}

/// JSON has no infinity; essential deaths round-trip as the string "inf".
mod death_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Death {
            Finite(f64),
            Tag(String),
        }
        match Death::deserialize(d)? {
            Death::Finite(v) => Ok(v),
            Death::Tag(t) if t == "inf" => Ok(f64::INFINITY),
            Death::Tag(t) => Err(serde::de::Error::custom(format!("bad death value {t:?}"))),
        }
    }
}

/// Persistence pairs of the sublevel filtration, both dimensions mixed.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RawDiagram {
    pub points: Vec<RawPoint>,
}

impl RawDiagram {
    pub fn in_dim(&self, dim: usize) -> impl Iterator<Item = &RawPoint> {
        self.points.iter().filter(move |p| p.dim == dim)
    }
}

/// Sublevel persistence of the V-construction cubical complex: pixels are
/// vertices, edges/squares enter at the max of their incident pixels.
/// Filtration order is lexicographic (value, dimension, index); reduction
/// is plain GF(2) column reduction without clearing.
pub fn cubical_diagrams(img: &GrayImage) -> RawDiagram {
    let (h, w) = (img.height, img.width);
    let vid = |r: usize, c: usize| r * w + c;
    let n_v = h * w;
    // edge ids: horizontal first (r, c)-(r, c+1), then vertical (r, c)-(r+1, c)
    let n_he = h * (w - 1);
    let heid = |r: usize, c: usize| r * (w - 1) + c;
    let veid = |r: usize, c: usize| n_he + r * w + c;
    let n_e = n_he + (h - 1) * w;
    let sqid = |r: usize, c: usize| r * (w - 1) + c;

    // (value, dim, local id, boundary as local ids of dim-1 cells)
    struct Cell {
        value: f64,
        dim: usize,
        id: usize,
        boundary: Vec<usize>,
    }
    let mut cells = Vec::with_capacity(n_v + n_e + n_v);
    for r in 0..h {
        for c in 0..w {
            cells.push(Cell {
                value: img.pixel(r, c),
                dim: 0,
                id: vid(r, c),
                boundary: Vec::new(),
            });
        }
    }
    for r in 0..h {
        for c in 0..w.saturating_sub(1) {
            cells.push(Cell {
                value: img.pixel(r, c).max(img.pixel(r, c + 1)),
                dim: 1,
                id: heid(r, c),
                boundary: vec![vid(r, c), vid(r, c + 1)],
            });
        }
    }
    for r in 0..h.saturating_sub(1) {
        for c in 0..w {
            cells.push(Cell {
                value: img.pixel(r, c).max(img.pixel(r + 1, c)),
                dim: 1,
                id: veid(r, c),
                boundary: vec![vid(r, c), vid(r + 1, c)],
            });
        }
    }
    for r in 0..h.saturating_sub(1) {
        for c in 0..w.saturating_sub(1) {
            let value = img
                .pixel(r, c)
                .max(img.pixel(r, c + 1))
                .max(img.pixel(r + 1, c))
                .max(img.pixel(r + 1, c + 1));
            cells.push(Cell {
                value,
                dim: 2,
                id: sqid(r, c),
                boundary: vec![heid(r, c), heid(r + 1, c), veid(r, c), veid(r, c + 1)],
            });
        }
    }

    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&a, &b| {
        let (ca, cb) = (&cells[a], &cells[b]);
        ca.value
            .partial_cmp(&cb.value)
            .unwrap()
            .then(ca.dim.cmp(&cb.dim))
            .then(ca.id.cmp(&cb.id))
    });
    // filtration position of each (dim, local id)
    let mut pos_of = vec![0usize; cells.len()];
    for (pos, &ci) in order.iter().enumerate() {
        pos_of[ci] = pos;
    }
    // map (dim, local id) -> global cell index
    let global = |dim: usize, id: usize| -> usize {
        match dim {
            0 => id,
            1 => n_v + id,
            _ => n_v + n_e + id,
        }
    };

    // columns as sorted position lists over GF(2)
    let mut columns: Vec<Vec<usize>> = Vec::with_capacity(cells.len());
    for &ci in &order {
        let cell = &cells[ci];
        let mut col: Vec<usize> = cell
            .boundary
            .iter()
            .map(|&b| pos_of[global(cell.dim - 1, b)])
            .collect();
        col.sort_unstable();
        columns.push(col);
    }
    let mut low_to_col: Vec<Option<usize>> = vec![None; cells.len()];
    let mut points = Vec::new();
    let mut paired = vec![false; cells.len()];
    for i in 0..columns.len() {
        loop {
            let Some(&low) = columns[i].last() else { break };
            let Some(j) = low_to_col[low] else {
                low_to_col[low] = Some(i);
                paired[low] = true;
                paired[i] = true;
                let birth = cells[order[low]].value;
                let death = cells[order[i]].value;
                if birth < death {
                    points.push(RawPoint {
                        birth,
                        death,
                        dim: cells[order[low]].dim,
                    });
                }
                break;
            };
            // symmetric difference with the earlier column sharing this low
            let merged = symmetric_difference(&columns[i], &columns[j]);
            columns[i] = merged;
        }
    }
    for (pos, &ci) in order.iter().enumerate() {
        if !paired[pos] && cells[ci].dim == 0 {
            points.push(RawPoint {
                birth: cells[ci].value,
                death: f64::INFINITY,
                dim: 0,
            });
        }
    }
    points.sort_by(|a, b| {
        a.dim
            .cmp(&b.dim)
            .then(a.birth.partial_cmp(&b.birth).unwrap())
            .then(a.death.partial_cmp(&b.death).unwrap())
    });
    RawDiagram { points }
}

fn symmetric_difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Finite ground set for diagrams: a regular grid of birth–death cell
/// centers above the diagonal under ℓ∞, with A = the diagonal projections,
/// so that d(x, A) = (death − birth)/2 exactly. H₀ and H₁ occupy two
/// copies of the grid separated along the diagonal, so optimal matchings
/// never cross dimensions.
#[derive(Debug, Clone)]
pub struct GroundGrid {
    reps: Vec<(f64, f64)>, // shifted coordinates, H₀ block then H₁ block
    lo: f64,
    hi: f64,
    cell: f64,
    dim_shift: f64,
    per_dim: usize,
    pair: MetricPair,
    graph: QuotientGraph,
}

impl GroundGrid {
    /// Regular grid over value range [lo, hi] with `cells` cells per axis.
    pub fn regular(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        assert!(hi > lo && cells >= 2, "need hi > lo and at least 2 cells");
        let cell = (hi - lo) / cells as f64;
        let dim_shift = 10.0 * (hi - lo);
        let mut reps = Vec::new();
        for dim in 0..2usize {
            let off = dim as f64 * dim_shift;
            for i in 0..cells {
                for j in (i + 1)..cells {
                    let b = lo + (i as f64 + 0.5) * cell + off;
                    let d = lo + (j as f64 + 0.5) * cell + off;
                    reps.push((b, d));
                }
            }
        }
        let per_dim = reps.len() / 2;
        // ground set: representatives, then deduplicated diagonal projections
        let mut diag: Vec<f64> = reps.iter().map(|&(b, d)| (b + d) / 2.0).collect();
        diag.sort_by(|a, b| a.partial_cmp(b).unwrap());
        diag.dedup();
        let mut points: Vec<(f64, f64)> = reps.clone();
        points.extend(diag.iter().map(|&m| (m, m)));
        let n = points.len();
        let dist: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let (a, b) = (points[i], points[j]);
                        (a.0 - b.0).abs().max((a.1 - b.1).abs())
                    })
                    .collect()
            })
            .collect();
        let subset_a = (reps.len()..n).collect();
        let pair = build_metric_pair(dist, subset_a)?;
        let graph = graph_model_of(&pair)?;
        Ok(Self {
            reps,
            lo,
            hi,
            cell,
            dim_shift,
            per_dim,
            pair,
            graph,
        })
    }

    pub fn graph(&self) -> &QuotientGraph {
        &self.graph
    }

    pub fn metric_pair(&self) -> &MetricPair {
        &self.pair
    }

    /// Representatives in shifted coordinates; index order matches the
    /// off-diagonal vertex numbering of `graph()`.
    pub fn reps(&self) -> &[(f64, f64)] {
        &self.reps
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn value_range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

/// Snap every diagram point to its nearest grid representative in ℓ∞,
/// after capping the essential H₀ death at `finite_death_cap`. Points made
/// degenerate by the cap are dropped. Returns the quantized diagram and
/// the maximum snapping displacement (always ≤ half the cell size).
pub fn quantize_to_ground(
    rd: &RawDiagram,
    gg: &GroundGrid,
    finite_death_cap: f64,
) -> Result<(Diagram, f64)> {
    let mut counts = std::collections::BTreeMap::new();
    let mut max_disp = 0.0f64;
    for p in &rd.points {
        let death = p.death.min(finite_death_cap);
        if death <= p.birth {
            continue;
        }
        let off = p.dim as f64 * gg.dim_shift;
        let (pb, pd) = (p.birth + off, death + off);
        let range = (p.dim * gg.per_dim)..((p.dim + 1) * gg.per_dim);
        let (best, disp) = range
            .map(|i| {
                let (rb, rd_) = gg.reps[i];
                (i, (rb - pb).abs().max((rd_ - pd).abs()))
            })
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        if disp > gg.cell / 2.0 + 1e-9 {
            return Err(Error::PointOutsideGrid {
                birth: p.birth,
                death,
            });
        }
        max_disp = max_disp.max(disp);
        *counts.entry(best).or_insert(0u64) += 1;
    }
    Ok((Diagram::from_counts(counts), max_disp))
}
