//! Sampling from the normalized heat law on the torus and the random
//! Fourier feature map, with unbiasedness and Lipschitz diagnostics.

use std::f64::consts::TAU;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::diagram::VirtualDiagram;
use crate::dual::{dirichlet_symbol, phase_lip, TorusPoint};
use crate::error::{Error, Result};
use crate::heat::{spectral_moment, QuadratureSpec};
use crate::metric_pair::QuotientGraph;
use crate::util::{mean_and_se, wrap_angle};

/// Samples used for the uniform-MC normalizing-mass estimate.
const MASS_MC_SAMPLES: usize = 20_000;
/// Grid resolution per dimension for the inverse-CDF sampler.
const ICDF_GRID: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMode {
    GridIcdf,
    Metropolis,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerMeta {
    pub mode: SamplerMode,
    pub seed: u64,
    pub burn_in: usize,
    pub thinning: usize,
    pub acceptance_rate: Option<f64>,
    pub proposal_sigma: Option<f64>,
}

/// R frequencies drawn from the normalized heat law, plus a uniform-MC
/// estimate of the heat mass ν̂_t and full sampler provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrequencySample {
    pub thetas: Vec<TorusPoint>,
    pub t: f64,
    pub mass_estimate: f64,
    pub mass_std_err: f64,
    pub sampler_meta: SamplerMeta,
}

impl FrequencySample {
    pub fn r(&self) -> usize {
        self.thetas.len()
    }
}

/// Cosine/sine features, interleaved per frequency, scaled by √(ν̂/R).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

fn estimate_mass(t: f64, g: &QuotientGraph, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let n = g.n_offdiag();
    let vals: Vec<f64> = (0..MASS_MC_SAMPLES)
        .map(|_| {
            let th = TorusPoint::new((0..n).map(|_| rng.gen_range(0.0..TAU)).collect());
            (-t * dirichlet_symbol(&th, g).unwrap()).exp()
        })
        .collect();
    mean_and_se(&vals)
}

fn uniform_draws(n: usize, r: usize, rng: &mut ChaCha8Rng) -> Vec<TorusPoint> {
    (0..r)
        .map(|_| TorusPoint::new((0..n).map(|_| rng.gen_range(0.0..TAU)).collect()))
        .collect()
}

fn grid_icdf_draws(
    t: f64,
    g: &QuotientGraph,
    r: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<TorusPoint>> {
    let n = g.n_offdiag();
    if n > 2 {
        return Err(Error::TooHighDimForGrid { n });
    }
    let cells = ICDF_GRID.pow(n as u32);
    let step = TAU / ICDF_GRID as f64;
    // cumulative weights over cell midpoints
    let mut cdf = Vec::with_capacity(cells);
    let mut acc = 0.0;
    let cell_theta = |idx: usize| -> Vec<f64> {
        let mut rem = idx;
        (0..n)
            .map(|_| {
                let c = rem % ICDF_GRID;
                rem /= ICDF_GRID;
                (c as f64 + 0.5) * step
            })
            .collect()
    };
    for idx in 0..cells {
        let th = TorusPoint::new(cell_theta(idx));
        acc += (-t * dirichlet_symbol(&th, g)?).exp();
        cdf.push(acc);
    }
    let total = acc;
    let draws = (0..r)
        .map(|_| {
            let u = rng.gen_range(0.0..total);
            let idx = cdf.partition_point(|&c| c <= u).min(cells - 1);
            // jitter uniformly within the chosen cell
            let mut rem = idx;
            let theta: Vec<f64> = (0..n)
                .map(|_| {
                    let c = rem % ICDF_GRID;
                    rem /= ICDF_GRID;
                    c as f64 * step + rng.gen_range(0.0..step)
                })
                .collect();
            TorusPoint::new(theta)
        })
        .collect();
    Ok(draws)
}

struct MetropolisResult {
    draws: Vec<TorusPoint>,
    acceptance: f64,
    sigma: f64,
}

fn metropolis_draws(
    t: f64,
    g: &QuotientGraph,
    r: usize,
    burn_in: usize,
    thinning: usize,
    rng: &mut ChaCha8Rng,
) -> Result<MetropolisResult> {
    let n = g.n_offdiag();
    let burn_in = burn_in.max(1000);
    let thinning = thinning.max(10);

    let log_density = |th: &TorusPoint| -> f64 { -t * dirichlet_symbol(th, g).unwrap() };

    // Tune the wrapped-Gaussian step toward acceptance in [0.2, 0.5]. Flat
    // targets (small t) cannot be pushed below ~0.5 even with a global
    // proposal, so once sigma covers the torus a high rate is accepted.
    let mut sigma = 1.0f64;
    let mut tuned = None;
    for _ in 0..24 {
        let rate = pilot_acceptance(&log_density, n, sigma, rng);
        if (0.2..=0.5).contains(&rate) || (rate > 0.5 && sigma >= TAU) {
            tuned = Some(rate);
            break;
        }
        if rate > 0.5 {
            sigma = (sigma * 1.8).min(TAU);
        } else {
            sigma /= 1.8;
        }
        if sigma < 1e-8 {
            break;
        }
    }
    let Some(_) = tuned else {
        let rate = pilot_acceptance(&log_density, n, sigma, rng);
        return Err(Error::BadAcceptanceRate { rate });
    };

    let normal = Normal::new(0.0, sigma).unwrap();
    let mut state: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..TAU)).collect();
    let mut state_ld = log_density(&TorusPoint::new(state.clone()));
    let mut accepted = 0usize;
    let mut proposed = 0usize;
    let mut step = |state: &mut Vec<f64>, state_ld: &mut f64, rng: &mut ChaCha8Rng| {
        let cand: Vec<f64> = state
            .iter()
            .map(|&x| wrap_angle(x + normal.sample(rng)))
            .collect();
        let cand_ld = log_density(&TorusPoint::new(cand.clone()));
        proposed += 1;
        if cand_ld - *state_ld >= rng.gen_range(0.0f64..1.0).ln() {
            *state = cand;
            *state_ld = cand_ld;
            accepted += 1;
        }
    };
    for _ in 0..burn_in {
        step(&mut state, &mut state_ld, rng);
    }
    let mut draws = Vec::with_capacity(r);
    for _ in 0..r {
        for _ in 0..thinning {
            step(&mut state, &mut state_ld, rng);
        }
        draws.push(TorusPoint::new(state.clone()));
    }
    Ok(MetropolisResult {
        draws,
        acceptance: accepted as f64 / proposed as f64,
        sigma,
    })
}

fn pilot_acceptance(
    log_density: &impl Fn(&TorusPoint) -> f64,
    n: usize,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let normal = Normal::new(0.0, sigma).unwrap();
    let mut state: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..TAU)).collect();
    let mut state_ld = log_density(&TorusPoint::new(state.clone()));
    let mut accepted = 0usize;
    let pilot = 400;
    for _ in 0..pilot {
        let cand: Vec<f64> = state
            .iter()
            .map(|&x| wrap_angle(x + normal.sample(rng)))
            .collect();
        let cand_ld = log_density(&TorusPoint::new(cand.clone()));
        if cand_ld - state_ld >= rng.gen_range(0.0f64..1.0).ln() {
            state = cand;
            state_ld = cand_ld;
            accepted += 1;
        }
    }
    accepted as f64 / pilot as f64
}

/// Draw R frequencies from the normalized heat law e^{−tλ}/ν_t.
///
/// At t = 0 the law is exactly uniform and both modes short-circuit to
/// direct uniform draws. The normalizing mass ν̂_t always comes from plain
/// uniform Monte Carlo (a Metropolis chain cannot estimate it).
pub fn sample_heat_law(
    t: f64,
    g: &QuotientGraph,
    r: usize,
    mode: SamplerMode,
    seed: u64,
    burn_in: usize,
    thinning: usize,
) -> Result<FrequencySample> {
    assert!(r >= 1, "R must be at least 1");
    let n = g.n_offdiag();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mass, mass_se) = if t == 0.0 {
        (1.0, 0.0)
    } else {
        estimate_mass(t, g, seed)
    };
    let (thetas, acceptance, sigma) = if t == 0.0 {
        (uniform_draws(n, r, &mut rng), None, None)
    } else {
        match mode {
            SamplerMode::GridIcdf => (grid_icdf_draws(t, g, r, &mut rng)?, None, None),
            SamplerMode::Metropolis => {
                let res = metropolis_draws(t, g, r, burn_in, thinning, &mut rng)?;
                (res.draws, Some(res.acceptance), Some(res.sigma))
            }
        }
    };
    Ok(FrequencySample {
        thetas,
        t,
        mass_estimate: mass,
        mass_std_err: mass_se,
        sampler_meta: SamplerMeta {
            mode,
            seed,
            burn_in,
            thinning,
            acceptance_rate: acceptance,
            proposal_sigma: sigma,
        },
    })
}

/// Feature map Φ_{t,R}(v) = √(ν̂/R)·(cos⟨v,θ^(r)⟩, sin⟨v,θ^(r)⟩)_r.
pub fn feature_map(v: &VirtualDiagram, fs: &FrequencySample) -> Result<FeatureVector> {
    let scale = (fs.mass_estimate / fs.r() as f64).sqrt();
    let mut values = Vec::with_capacity(2 * fs.r());
    for th in &fs.thetas {
        let p = th.pairing(v)?;
        values.push(scale * p.cos());
        values.push(scale * p.sin());
    }
    Ok(FeatureVector { values })
}

/// ⟨Φ(u), Φ(v)⟩ = (ν̂/R) Σ_r cos⟨u−v, θ^(r)⟩, the unbiased estimator of
/// the heat kernel k_t(u, v).
pub fn rff_kernel(u: &VirtualDiagram, v: &VirtualDiagram, fs: &FrequencySample) -> Result<f64> {
    let gamma = u.minus(v);
    let mut acc = 0.0;
    for th in &fs.thetas {
        acc += th.pairing(&gamma)?.cos();
    }
    Ok(fs.mass_estimate / fs.r() as f64 * acc)
}

/// Per-draw Lipschitz bound √(2ν̂)·(R⁻¹ Σ_r L(θ^(r))²)^{1/2} with
/// L = `phase_lip` standing in for the character seminorm (conservative).
pub fn rff_lip_bound(fs: &FrequencySample, g: &QuotientGraph) -> Result<f64> {
    let mut acc = 0.0;
    for th in &fs.thetas {
        let l = phase_lip(th, g)?;
        acc += l * l;
    }
    Ok((2.0 * fs.mass_estimate * acc / fs.r() as f64).sqrt())
}

/// Report from `rff_spectral_asymptotic_check`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralCheckReport {
    pub spectral_bound: f64,
    pub slack: f64,
    pub pass_fraction: f64,
    pub bounds: Vec<f64>,
}

/// Check the spectral asymptotic bound: fraction of independent samples
/// whose per-draw Lipschitz bound stays below the spectral constant
/// (π²/(2 d_min √w_min))·(∫λe^{−tλ}dμ)^{1/2}, with 5% slack.
pub fn rff_spectral_asymptotic_check(
    t: f64,
    g: &QuotientGraph,
    trials: usize,
    r: usize,
    mode: SamplerMode,
    seed: u64,
    q: &QuadratureSpec,
) -> Result<SpectralCheckReport> {
    assert!(t > 0.0, "the spectral asymptotic assumes t > 0");
    let pi = std::f64::consts::PI;
    let moment = spectral_moment(t, g, q)?.value;
    let spectral_bound = pi * pi / (2.0 * g.d_min() * g.w_min().sqrt()) * moment.sqrt();
    let slack = 0.05;
    let mut bounds = Vec::with_capacity(trials);
    let mut passed = 0usize;
    for trial in 0..trials {
        let fs = sample_heat_law(t, g, r, mode, seed.wrapping_add(trial as u64), 1000, 10)?;
        let b = rff_lip_bound(&fs, g)?;
        if b <= spectral_bound * (1.0 + slack) {
            passed += 1;
        }
        bounds.push(b);
    }
    Ok(SpectralCheckReport {
        spectral_bound,
        slack,
        pass_fraction: passed as f64 / trials as f64,
        bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::kernel_eval;
    use crate::metric_pair::build_graph_model;

    fn single_edge() -> QuotientGraph {
        build_graph_model(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn deterministic_given_seed() {
        let g = single_edge();
        let a = sample_heat_law(1.0, &g, 32, SamplerMode::Metropolis, 7, 1000, 10).unwrap();
        let b = sample_heat_law(1.0, &g, 32, SamplerMode::Metropolis, 7, 1000, 10).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn t_zero_uniform_and_mass_one() {
        let g = single_edge();
        let fs = sample_heat_law(0.0, &g, 2000, SamplerMode::GridIcdf, 5, 0, 0).unwrap();
        assert_eq!(fs.mass_estimate, 1.0);
        // crude uniformity: mean angle near π
        let mean: f64 =
            fs.thetas.iter().map(|t| t.coords()[0]).sum::<f64>() / fs.r() as f64;
        assert!((mean - std::f64::consts::PI).abs() < 0.15);
    }

    #[test]
    fn feature_norm_is_mass() {
        let g = single_edge();
        let fs = sample_heat_law(1.0, &g, 64, SamplerMode::GridIcdf, 11, 0, 0).unwrap();
        for coeff in [-3i64, 0, 2, 7] {
            let v = VirtualDiagram::new(vec![coeff]);
            let phi = feature_map(&v, &fs).unwrap();
            assert!((phi.norm_sq() - fs.mass_estimate).abs() < 1e-12);
        }
        // v = 0: cos entries √(ν̂/R), sin entries 0
        let phi = feature_map(&VirtualDiagram::zero(1), &fs).unwrap();
        let scale = (fs.mass_estimate / fs.r() as f64).sqrt();
        for pair in phi.values.chunks(2) {
            assert!((pair[0] - scale).abs() < 1e-15);
            assert!(pair[1].abs() < 1e-15);
        }
    }

    #[test]
    fn rff_kernel_diagonal_and_range() {
        let g = single_edge();
        let fs = sample_heat_law(1.0, &g, 64, SamplerMode::GridIcdf, 3, 0, 0).unwrap();
        let u = VirtualDiagram::new(vec![2]);
        let k = rff_kernel(&u, &u, &fs).unwrap();
        assert!((k - fs.mass_estimate).abs() < 1e-12);
        let v = VirtualDiagram::new(vec![-1]);
        let k = rff_kernel(&u, &v, &fs).unwrap();
        assert!(k.abs() <= fs.mass_estimate + 1e-12);
    }

    #[test]
    fn unbiased_against_quadrature() {
        let g = single_edge();
        let q = QuadratureSpec::tensor(1024);
        let gamma = VirtualDiagram::new(vec![1]);
        let zero = VirtualDiagram::zero(1);
        let exact = kernel_eval(1.0, &gamma, &zero, &g, &q).unwrap().value;
        let estimates: Vec<f64> = (0..200)
            .map(|s| {
                let fs =
                    sample_heat_law(1.0, &g, 64, SamplerMode::GridIcdf, 1000 + s, 0, 0).unwrap();
                rff_kernel(&gamma, &zero, &fs).unwrap()
            })
            .collect();
        let (mean, se) = crate::util::mean_and_se(&estimates);
        assert!((mean - exact).abs() < 3.0 * se, "{mean} vs {exact} (se {se})");
    }

    #[test]
    fn lip_bound_holds_empirically() {
        let g = single_edge();
        let fs = sample_heat_law(1.0, &g, 128, SamplerMode::GridIcdf, 21, 0, 0).unwrap();
        let bound = rff_lip_bound(&fs, &g).unwrap();
        let zero = VirtualDiagram::zero(1);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let u = VirtualDiagram::new(vec![rng.gen_range(-3..=3)]);
            let v = VirtualDiagram::new(vec![rng.gen_range(-3..=3)]);
            if u == v {
                continue;
            }
            let pu = feature_map(&u, &fs).unwrap();
            let pv = feature_map(&v, &fs).unwrap();
            let dist_feat: f64 = pu
                .values
                .iter()
                .zip(&pv.values)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let d = crate::diagram::rho(&u, &v, &g).unwrap();
            assert!(dist_feat <= bound * d + 1e-9);
            let _ = &zero;
        }
    }

    #[test]
    fn metropolis_matches_grid_in_distribution() {
        let g = single_edge();
        let r = 10_000;
        let a = sample_heat_law(2.0, &g, r, SamplerMode::GridIcdf, 7, 0, 0).unwrap();
        let b = sample_heat_law(2.0, &g, r, SamplerMode::Metropolis, 8, 1000, 10).unwrap();
        let ks = ks_distance(
            &a.thetas.iter().map(|t| t.coords()[0]).collect::<Vec<_>>(),
            &b.thetas.iter().map(|t| t.coords()[0]).collect::<Vec<_>>(),
        );
        assert!(ks < 0.02, "KS distance {ks}");
    }

    pub(crate) fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
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
}
