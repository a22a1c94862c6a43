//! Coherent-state fidelity under error filtration.
//!
//! A coherent pulse `|α⟩` is split over `N` lines, each line picks up an
//! independent phase `θ_k` and the lines are recombined. The signal port
//! holds `|α Σ e^{iθ_k}/N⟩`, so the fidelity with `|α⟩` is
//! `E[exp(−|α|² |1 − Σ e^{iθ_k}/N|²)]`.

use rayon::prelude::*;

use crate::error::invalid;
use crate::phase_noise::{stream_rng, PhaseDistribution, BATCH};
use crate::quad::{integrate, integrate_square};
use crate::{Error, Result, C64};

pub const DEFAULT_SAMPLES: usize = 100_000;

/// Gaussian laws are integrated over `±QUAD_WIDTH·σ`.
const QUAD_WIDTH: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoherentMethod {
    /// Deterministic integration; only for `N ≤ 2`.
    Quadrature,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherentConfig {
    /// Mean photon number `|α|²`.
    pub alpha_sq: f64,
    pub n_branches: usize,
    pub dist: PhaseDistribution,
    pub method: CoherentMethod,
}

impl CoherentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_sq >= 0.0) || !self.alpha_sq.is_finite() {
            return invalid(format!("alpha_sq {} must be finite and >= 0", self.alpha_sq));
        }
        if self.n_branches == 0 {
            return invalid("n_branches must be >= 1");
        }
        self.dist.validate()?;
        match self.method {
            CoherentMethod::MonteCarlo { samples: 0, .. } => invalid("Monte Carlo needs at least one sample"),
            CoherentMethod::Quadrature if self.n_branches > 2 => Err(Error::UnsupportedMethod(format!(
                "quadrature supports N <= 2, got N = {}",
                self.n_branches
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityEstimate {
    pub value: f64,
    /// Zero for quadrature.
    pub standard_error: f64,
    pub samples: usize,
}

/// `exp(−|α|² |1 − Σ e^{iθ_k}/N|²)`.
pub fn integrand(alpha_sq: f64, thetas: &[f64]) -> f64 {
    let n = thetas.len() as f64;
    let mean: C64 = thetas.iter().map(|t| C64::from_polar(1.0, *t)).sum::<C64>() / n;
    (-alpha_sq * (C64::new(1.0, 0.0) - mean).norm_sqr()).exp()
}

pub fn fidelity(config: &CoherentConfig) -> Result<FidelityEstimate> {
    config.validate()?;
    match config.method {
        CoherentMethod::Quadrature => Ok(FidelityEstimate { value: quadrature(config), standard_error: 0.0, samples: 0 }),
        CoherentMethod::MonteCarlo { samples, seed } => monte_carlo(config, samples, seed),
    }
}

fn quadrature(config: &CoherentConfig) -> f64 {
    let a2 = config.alpha_sq;
    match &config.dist {
        PhaseDistribution::GaussianZeroMean { sigma } => {
            let s = *sigma;
            if s == 0.0 {
                return integrand(a2, &vec![0.0; config.n_branches]);
            }
            let pdf = |t: f64| (-0.5 * (t / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
            let w = QUAD_WIDTH * s;
            if config.n_branches == 1 {
                integrate(|t| pdf(t) * integrand(a2, &[t]), -w, w)
            } else {
                integrate_square(|t, u| pdf(t) * pdf(u) * integrand(a2, &[t, u]), -w, w)
            }
        }
        PhaseDistribution::DiscreteAtoms { angles, weights } => {
            let atoms = || angles.iter().zip(weights);
            if config.n_branches == 1 {
                atoms().map(|(t, w)| w * integrand(a2, &[*t])).sum()
            } else {
                atoms()
                    .flat_map(|(t, w)| atoms().map(move |(u, v)| w * v * integrand(a2, &[*t, *u])))
                    .sum()
            }
        }
    }
}

/// Batch `b` of [`BATCH`] samples draws from stream `b`; sums are reduced in
/// batch order so the result does not depend on the worker count.
fn monte_carlo(config: &CoherentConfig, samples: usize, seed: u64) -> Result<FidelityEstimate> {
    let sampler = config.dist.sampler()?;
    let n = config.n_branches;
    let batches = samples.div_ceil(BATCH);
    let sums: Vec<(f64, f64)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let len = BATCH.min(samples - b * BATCH);
            let mut rng = stream_rng(seed, b as u64);
            let mut thetas = vec![0.0; n];
            let (mut s, mut ss) = (0.0, 0.0);
            for _ in 0..len {
                thetas.iter_mut().for_each(|t| *t = sampler.draw(&mut rng));
                let f = integrand(config.alpha_sq, &thetas);
                s += f;
                ss += f * f;
            }
            (s, ss)
        })
        .collect();
    let (s, ss) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let m = samples as f64;
    let mean = s / m;
    let var = if samples > 1 { ((ss - m * mean * mean) / (m - 1.0)).max(0.0) } else { 0.0 };
    Ok(FidelityEstimate { value: mean, standard_error: (var / m).sqrt(), samples })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub n_branches: usize,
    pub sigma: f64,
    pub estimate: FidelityEstimate,
}

/// Gaussian-noise fidelities on an `(N, σ)` grid, `N` outermost. Monte Carlo
/// points share one seed, so every `σ` reuses the same standard normals and
/// differences between points are not masked by independent noise.
pub fn sweep(alpha_sq: f64, ns: &[usize], sigmas: &[f64], method: CoherentMethod) -> Result<Vec<SweepPoint>> {
    let grid: Vec<(usize, f64)> = ns.iter().flat_map(|&n| sigmas.iter().map(move |&s| (n, s))).collect();
    grid.into_par_iter()
        .map(|(n, sigma)| {
            let config = CoherentConfig {
                alpha_sq,
                n_branches: n,
                dist: PhaseDistribution::gaussian(sigma)?,
                method,
            };
            Ok(SweepPoint { n_branches: n, sigma, estimate: fidelity(&config)? })
        })
        .collect()
}
