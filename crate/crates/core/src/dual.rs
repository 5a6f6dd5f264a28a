//! Characters on the dual torus, phase functions on X/A, edgewise
//! Lipschitz bounds, and the Dirichlet symbol λ(θ).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagram::{rho, VirtualDiagram};
use crate::error::{Error, Result};
use crate::metric_pair::QuotientGraph;
use crate::util::{circle_dist, wrap_angle};

/// A point θ ∈ [0,2π)^N indexing a character χ_θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    theta: Vec<f64>,
}

impl TorusPoint {
    /// Componentwise reduction to [0, 2π).
    pub fn new(theta: Vec<f64>) -> Self {
        Self {
            theta: theta.into_iter().map(wrap_angle).collect(),
        }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            theta: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.theta
    }

    fn check_dim(&self, g: &QuotientGraph) -> Result<()> {
        if self.theta.len() != g.n_offdiag() {
            return Err(Error::DimensionMismatch {
                expected: g.n_offdiag(),
                got: self.theta.len(),
            });
        }
        Ok(())
    }

    /// Pairing ⟨k, θ⟩ = Σ k_j θ_j.
    pub fn pairing(&self, v: &VirtualDiagram) -> Result<f64> {
        if v.dim() != self.theta.len() {
            return Err(Error::DimensionMismatch {
                expected: self.theta.len(),
                got: v.dim(),
            });
        }
        Ok(self
            .theta
            .iter()
            .zip(&v.coeffs)
            .map(|(&t, &k)| k as f64 * t)
            .sum())
    }

    /// Phase of vertex u under the phase function φ_θ (basepoint ↦ 0).
    pub fn phase(&self, u: usize, g: &QuotientGraph) -> f64 {
        if u == g.basepoint() {
            0.0
        } else {
            self.theta[u]
        }
    }
}

/// Character evaluation χ_θ(v) = exp(i⟨v,θ⟩).
pub fn character_eval(t: &TorusPoint, v: &VirtualDiagram) -> Result<Complex64> {
    let s = t.pairing(v)?;
    Ok(Complex64::from_polar(1.0, s))
}

/// Edgewise phase Lipschitz seminorm:
/// max over edges of circle distance of phases over edge length.
pub fn phase_lip(t: &TorusPoint, g: &QuotientGraph) -> Result<f64> {
    t.check_dim(g)?;
    let mut best = 0.0f64;
    for e in g.edges() {
        let d = circle_dist(t.phase(e.u, g), t.phase(e.v, g));
        best = best.max(d / e.length);
    }
    Ok(best)
}

/// Two-sided sandwich for Lip_ρ(χ_θ): ((2/π)·L, L) with L = `phase_lip`.
pub fn char_lip_bounds(t: &TorusPoint, g: &QuotientGraph) -> Result<(f64, f64)> {
    let l = phase_lip(t, g)?;
    Ok((2.0 / PI * l, l))
}

/// Maximum ‖γ‖_∞ accepted by `char_lip_bruteforce`.
pub const CHAR_LIP_MAX_RADIUS: i64 = 3;
/// Maximum torus dimension accepted by `char_lip_bruteforce`.
pub const CHAR_LIP_MAX_DIM: usize = 3;

/// Enumerated lower bound on Lip_ρ(χ_θ):
/// max over 0 ≠ γ ∈ ℤ^N with ‖γ‖_∞ ≤ radius of |χ_θ(γ) − 1| / ρ(γ, 0).
///
/// The true seminorm is a supremum over the infinite group, so this is a
/// certified lower bound only; it is ≤ `phase_lip` for every radius.
pub fn char_lip_bruteforce(t: &TorusPoint, g: &QuotientGraph, radius: i64) -> Result<f64> {
    t.check_dim(g)?;
    let n = g.n_offdiag();
    if n > CHAR_LIP_MAX_DIM || radius > CHAR_LIP_MAX_RADIUS {
        return Err(Error::TooLarge {
            size: n.max(radius as usize),
            limit: CHAR_LIP_MAX_DIM.max(CHAR_LIP_MAX_RADIUS as usize),
        });
    }
    let zero = VirtualDiagram::zero(n);
    let side = (2 * radius + 1) as usize;
    let total = side.pow(n as u32);
    let mut best = 0.0f64;
    for idx in 0..total {
        let mut rem = idx;
        let mut coeffs = vec![0i64; n];
        for c in coeffs.iter_mut() {
            *c = (rem % side) as i64 - radius;
            rem /= side;
        }
        let gamma = VirtualDiagram::new(coeffs);
        if gamma.is_zero() {
            continue;
        }
        let chi = character_eval(t, &gamma)?;
        let num = (chi - Complex64::new(1.0, 0.0)).norm();
        let den = rho(&gamma, &zero, g)?;
        best = best.max(num / den);
    }
    Ok(best)
}

/// Dirichlet symbol λ(θ) = Σ_edges w_uv (1 − cos dist(φ(u), φ(v))).
pub fn dirichlet_symbol(t: &TorusPoint, g: &QuotientGraph) -> Result<f64> {
    t.check_dim(g)?;
    let mut acc = 0.0;
    for e in g.edges() {
        let d = circle_dist(t.phase(e.u, g), t.phase(e.v, g));
        acc += e.weight * (1.0 - d.cos());
    }
    Ok(acc)
}

/// Graph-dependent constants (c_lo, c_hi) with
/// c_lo · Lip_ρ(χ_θ)² ≤ λ(θ) ≤ c_hi · Lip_ρ(χ_θ)².
pub fn lambda_lip_constants(g: &QuotientGraph) -> (f64, f64) {
    let c_lo = 2.0 * g.w_min() * g.d_min() * g.d_min() / (PI * PI);
    let c_hi = PI * PI / 4.0 * g.w_max() * g.n_edges() as f64 * g.d_max() * g.d_max();
    (c_lo, c_hi)
}

/// Quadratic-form cross-check for the Dirichlet symbol: build the dense
/// Laplacian L = D − A on the graph vertices and evaluate
/// ½⟨e^{iφ}, L e^{iφ}⟩ = ½ Σ w|e^{iφ(u)} − e^{iφ(v)}|².
/// Independent of the edgewise cosine formula.
pub fn dirichlet_symbol_quadratic_form(t: &TorusPoint, g: &QuotientGraph) -> Result<f64> {
    t.check_dim(g)?;
    let n = g.n_offdiag() + 1;
    let mut lap = vec![vec![0.0f64; n]; n];
    for e in g.edges() {
        lap[e.u][e.v] -= e.weight;
        lap[e.v][e.u] -= e.weight;
        lap[e.u][e.u] += e.weight;
        lap[e.v][e.v] += e.weight;
    }
    let f: Vec<Complex64> = (0..n)
        .map(|u| Complex64::from_polar(1.0, t.phase(u, g)))
        .collect();
    let mut acc = Complex64::new(0.0, 0.0);
    for u in 0..n {
        let mut lf = Complex64::new(0.0, 0.0);
        for v in 0..n {
            lf += lap[u][v] * f[v];
        }
        acc += f[u].conj() * lf;
    }
    Ok(acc.re / 2.0)
}
