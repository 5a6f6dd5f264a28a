//! Heat measures ν_t on the dual torus, the heat kernel k_t on K(X,A),
//! Gram matrices, and the Lipschitz prefactor integrals.

use std::f64::consts::TAU;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagram::VirtualDiagram;
use crate::dual::{dirichlet_symbol, phase_lip, TorusPoint};
use crate::error::{Error, Result};
use crate::metric_pair::QuotientGraph;
use crate::util::{mean_and_se, pairwise_sum};

/// Maximum torus dimension for tensor-grid quadrature.
pub const TENSOR_MAX_DIM: usize = 3;

/// Numerical scheme for torus integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuadratureSpec {
    /// Midpoint rule per dimension; spectrally accurate for the smooth
    /// periodic integrands here. Requires N ≤ 3.
    TensorGrid { points_per_dim: usize },
    /// Plain uniform Monte Carlo with standard errors.
    MonteCarlo { samples: usize, seed: u64 },
}

impl QuadratureSpec {
    pub fn tensor(points_per_dim: usize) -> Self {
        Self::TensorGrid {
            points_per_dim: points_per_dim.max(2),
        }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Self::MonteCarlo {
            samples: samples.max(2),
            seed,
        }
    }
}

/// A quadrature result: value plus a standard error in Monte Carlo mode.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: Option<f64>,
}

/// Integrate f over the torus against normalized Haar measure.
pub fn integrate(
    g: &QuotientGraph,
    q: &QuadratureSpec,
    f: impl Fn(&TorusPoint) -> f64,
) -> Result<Estimate> {
    let n = g.n_offdiag();
    match *q {
        QuadratureSpec::TensorGrid { points_per_dim } => {
            if n > TENSOR_MAX_DIM {
                return Err(Error::TensorTooHighDim { n });
            }
            let m = points_per_dim;
            let total = m.pow(n as u32);
            let step = TAU / m as f64;
            let mut vals = Vec::with_capacity(total);
            for idx in 0..total {
                let mut rem = idx;
                let mut theta = vec![0.0; n];
                for t in theta.iter_mut() {
                    *t = ((rem % m) as f64 + 0.5) * step;
                    rem /= m;
                }
                vals.push(f(&TorusPoint::new(theta)));
            }
            Ok(Estimate {
                value: pairwise_sum(&vals) / total as f64,
                std_err: None,
            })
        }
        QuadratureSpec::MonteCarlo { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut vals = Vec::with_capacity(samples);
            for _ in 0..samples {
                let theta: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..TAU)).collect();
                vals.push(f(&TorusPoint::new(theta)));
            }
            let (mean, se) = mean_and_se(&vals);
            Ok(Estimate {
                value: mean,
                std_err: Some(se),
            })
        }
    }
}

/// Total heat mass ν_t(𝕋^N) = ∫ e^{−tλ(θ)} dμ(θ) ∈ (0, 1].
pub fn heat_mass(t: f64, g: &QuotientGraph, q: &QuadratureSpec) -> Result<Estimate> {
    integrate(g, q, |th| (-t * dirichlet_symbol(th, g).unwrap()).exp())
}

/// Heat kernel k_t(u,v) = ∫ cos⟨u−v, θ⟩ e^{−tλ(θ)} dμ(θ).
///
/// Real by the reflection symmetry λ(θ) = λ(−θ); computed through the
/// difference u − v, so translation invariance is structural.
pub fn kernel_eval(
    t: f64,
    u: &VirtualDiagram,
    v: &VirtualDiagram,
    g: &QuotientGraph,
    q: &QuadratureSpec,
) -> Result<Estimate> {
    let n = g.n_offdiag();
    if u.dim() != n || v.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: u.dim().max(v.dim()),
        });
    }
    let gamma = u.minus(v);
    integrate(g, q, |th| {
        let phase = th.pairing(&gamma).unwrap();
        phase.cos() * (-t * dirichlet_symbol(th, g).unwrap()).exp()
    })
}

/// Gram matrix of the heat kernel on a list of virtual diagrams.
pub fn gram_matrix(
    t: f64,
    vs: &[VirtualDiagram],
    g: &QuotientGraph,
    q: &QuadratureSpec,
) -> Result<Vec<Vec<f64>>> {
    let m = vs.len();
    let mut out = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i..m {
            let k = kernel_eval(t, &vs[i], &vs[j], g, q)?.value;
            out[i][j] = k;
            out[j][i] = k;
        }
    }
    Ok(out)
}

/// Lipschitz prefactor ∫ L(θ)² e^{−tλ(θ)} dμ(θ) where L = `phase_lip`,
/// the computable upper bound on Lip_ρ(χ_θ). An upper bound on the
/// character-seminorm integral; nonincreasing in t.
pub fn lip_prefactor(t: f64, g: &QuotientGraph, q: &QuadratureSpec) -> Result<Estimate> {
    integrate(g, q, |th| {
        let l = phase_lip(th, g).unwrap();
        l * l * (-t * dirichlet_symbol(th, g).unwrap()).exp()
    })
}

/// Heat-weighted spectral moment ∫ λ(θ) e^{−tλ(θ)} dμ(θ).
pub fn spectral_moment(t: f64, g: &QuotientGraph, q: &QuadratureSpec) -> Result<Estimate> {
    integrate(g, q, |th| {
        let l = dirichlet_symbol(th, g).unwrap();
        l * (-t * l).exp()
    })
}

/// Check the RKHS Lipschitz bound for a finite kernel combination
/// f = Σ cᵢ k_t(·, vᵢ).
///
/// Returns (lip_bound, empirical_ratio_max) where
/// lip_bound = ‖f‖_{H_t} · sqrt(lip_prefactor) and the empirical ratio is
/// maximized over `n_pairs` randomly sampled pairs with coefficients in
/// [−2, 2].
pub fn rkhs_function_lip_check(
    t: f64,
    g: &QuotientGraph,
    q: &QuadratureSpec,
    coeff_diagrams: &[VirtualDiagram],
    coeffs: &[f64],
    n_pairs: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    assert_eq!(coeff_diagrams.len(), coeffs.len());
    let n = g.n_offdiag();
    let gram = gram_matrix(t, coeff_diagrams, g, q)?;
    let mut norm_sq = 0.0;
    for i in 0..coeffs.len() {
        for j in 0..coeffs.len() {
            norm_sq += coeffs[i] * coeffs[j] * gram[i][j];
        }
    }
    if norm_sq < -1e-8 {
        return Err(Error::NegativeNormSquared { value: norm_sq });
    }
    let norm = norm_sq.max(0.0).sqrt();
    let bound = norm * lip_prefactor(t, g, q)?.value.max(0.0).sqrt();

    let f_eval = |alpha: &VirtualDiagram| -> Result<f64> {
        let mut acc = 0.0;
        for (c, v) in coeffs.iter().zip(coeff_diagrams) {
            acc += c * kernel_eval(t, alpha, v, g, q)?.value;
        }
        Ok(acc)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_pairs {
        let a = VirtualDiagram::new((0..n).map(|_| rng.gen_range(-2..=2)).collect());
        let b = VirtualDiagram::new((0..n).map(|_| rng.gen_range(-2..=2)).collect());
        if a == b {
            continue;
        }
        let dist = crate::diagram::rho(&a, &b, g)?;
        let ratio = (f_eval(&a)? - f_eval(&b)?).abs() / dist;
        worst = worst.max(ratio);
    }
    Ok((bound, worst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_pair::build_graph_model;

    fn single_edge() -> QuotientGraph {
        build_graph_model(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    /// Modified Bessel function I₀ by its power series.
    fn bessel_i0(x: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            term *= (x / (2.0 * k as f64)) * (x / (2.0 * k as f64));
            sum += term;
        }
        sum
    }

    #[test]
    fn mass_at_zero_is_one() {
        let g = single_edge();
        let m = heat_mass(0.0, &g, &QuadratureSpec::tensor(64)).unwrap();
        assert!((m.value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mass_matches_bessel_closed_form() {
        let g = single_edge();
        let m = heat_mass(1.0, &g, &QuadratureSpec::tensor(10_000)).unwrap();
        let closed = (-1.0f64).exp() * bessel_i0(1.0);
        assert!((m.value - closed).abs() < 1e-10, "{} vs {closed}", m.value);
    }

    #[test]
    fn mass_monotone_in_t() {
        let g = single_edge();
        let q = QuadratureSpec::tensor(128);
        let ts = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0];
        let ms: Vec<f64> = ts.iter().map(|&t| heat_mass(t, &g, &q).unwrap().value).collect();
        for w in ms.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn kernel_orthogonality_at_t0() {
        let g = single_edge();
        let q = QuadratureSpec::tensor(64);
        let u = VirtualDiagram::new(vec![1]);
        let z = VirtualDiagram::zero(1);
        let k = kernel_eval(0.0, &u, &z, &g, &q).unwrap();
        assert!(k.value.abs() < 1e-12);
        let k = kernel_eval(0.0, &u, &u, &g, &q).unwrap();
        assert!((k.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_diagonal_equals_mass() {
        let g = single_edge();
        let q = QuadratureSpec::tensor(64);
        let v = VirtualDiagram::new(vec![3]);
        let k = kernel_eval(1.5, &v, &v, &g, &q).unwrap();
        let m = heat_mass(1.5, &g, &q).unwrap();
        assert!((k.value - m.value).abs() < 1e-14);
    }

    #[test]
    fn kernel_mc_within_three_se_of_grid() {
        let g = single_edge();
        let u = VirtualDiagram::new(vec![1]);
        let z = VirtualDiagram::zero(1);
        let exact = kernel_eval(1.0, &u, &z, &g, &QuadratureSpec::tensor(2048))
            .unwrap()
            .value;
        let mc = kernel_eval(1.0, &u, &z, &g, &QuadratureSpec::monte_carlo(40_000, 7)).unwrap();
        let se = mc.std_err.unwrap();
        assert!((mc.value - exact).abs() < 3.0 * se, "{} vs {exact} (se {se})", mc.value);
    }

    #[test]
    fn kernel_translation_invariant() {
        let g = single_edge();
        let q = QuadratureSpec::tensor(64);
        let u = VirtualDiagram::new(vec![2]);
        let v = VirtualDiagram::new(vec![-1]);
        let w = VirtualDiagram::new(vec![3]);
        let a = kernel_eval(0.7, &u, &v, &g, &q).unwrap().value;
        let b = kernel_eval(0.7, &u.plus(&w), &v.plus(&w), &g, &q).unwrap().value;
        assert_eq!(a, b);
    }

    #[test]
    fn lip_prefactor_t0_closed_form() {
        let g = single_edge();
        let p = lip_prefactor(0.0, &g, &QuadratureSpec::tensor(10_000)).unwrap();
        // the integrand kinks at θ = π, so the midpoint rule is only O(m⁻²)
        let closed = std::f64::consts::PI.powi(2) / 3.0;
        assert!((p.value - closed).abs() < 1e-6, "{} vs {closed}", p.value);
    }

    #[test]
    fn lip_prefactor_monotone() {
        let g = single_edge();
        let q = QuadratureSpec::tensor(128);
        let a = lip_prefactor(1.0, &g, &q).unwrap().value;
        let b = lip_prefactor(50.0, &g, &q).unwrap().value;
        assert!(b < a);
    }

    #[test]
    fn spectral_moment_t0_single_edge() {
        let g = single_edge();
        let s = spectral_moment(0.0, &g, &QuadratureSpec::tensor(4096)).unwrap();
        // ∫ (1 − cos dist(θ,0)) dμ = 1 (mean cosine vanishes by symmetry)
        assert!((s.value - 1.0).abs() < 1e-10);
        let s1 = spectral_moment(1.0, &g, &QuadratureSpec::tensor(4096)).unwrap();
        assert!(s1.value > 0.0);
        let mc = spectral_moment(1.0, &g, &QuadratureSpec::monte_carlo(40_000, 9)).unwrap();
        assert!((mc.value - s1.value).abs() < 3.0 * mc.std_err.unwrap());
    }

    #[test]
    fn lip_prefactor_spectral_comparison() {
        // lip_prefactor ≤ (π²/(2 w_min d_min²)) · spectral_moment
        let g = single_edge();
        let q = QuadratureSpec::tensor(1024);
        for t in [0.0, 0.5, 1.0, 4.0] {
            let lhs = lip_prefactor(t, &g, &q).unwrap().value;
            let c = std::f64::consts::PI.powi(2) / (2.0 * g.w_min() * g.d_min() * g.d_min());
            let rhs = c * spectral_moment(t, &g, &q).unwrap().value;
            assert!(lhs <= rhs + 1e-8, "t={t}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn gaussian_decay_variant() {
        // lip_prefactor ≤ ∫ L² exp(−t (8 w_min d_min²/π⁴) L²) dμ
        let g = single_edge();
        let q = QuadratureSpec::tensor(1024);
        let c = 8.0 * g.w_min() * g.d_min() * g.d_min() / std::f64::consts::PI.powi(4);
        for t in [0.5, 1.0, 4.0] {
            let lhs = lip_prefactor(t, &g, &q).unwrap().value;
            let rhs = integrate(&g, &q, |th| {
                let l = phase_lip(th, &g).unwrap();
                l * l * (-t * c * l * l).exp()
            })
            .unwrap()
            .value;
            assert!(lhs <= rhs + 1e-8);
        }
    }

    #[test]
    fn rkhs_lip_zero_function() {
        let g = single_edge();
        let q = QuadratureSpec::tensor(64);
        let vs = [VirtualDiagram::new(vec![1])];
        let (bound, emp) =
            rkhs_function_lip_check(1.0, &g, &q, &vs, &[0.0], 20, 1).unwrap();
        assert_eq!(bound, 0.0);
        assert_eq!(emp, 0.0);
    }

    #[test]
    fn rkhs_lip_representer() {
        let g = single_edge();
        let q = QuadratureSpec::tensor(256);
        let vs = [VirtualDiagram::zero(1)];
        let (bound, emp) =
            rkhs_function_lip_check(1.0, &g, &q, &vs, &[1.0], 50, 2).unwrap();
        assert!(emp <= bound + 1e-10, "{emp} > {bound}");
    }
}
