//! Phase-noise laws `p_θ`, the average dephasing parameter κ = E[e^{iθ}],
//! and reproducible sampling.
//!
//! Random streams are counter based: a `(seed, stream)` pair selects an
//! independent ChaCha8 keystream, so a Monte Carlo job split into fixed-size
//! batches gives the same numbers no matter how the batches are scheduled.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::invalid;
use crate::{Result, C64};

/// Number of draws produced by one counter-based stream in batched jobs.
pub const BATCH: usize = 4096;

const WEIGHT_TOL: f64 = 1e-12;

/// Probability law for a random phase shift.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseDistribution {
    /// Zero-mean normal law with standard deviation `sigma` (radians).
    GaussianZeroMean { sigma: f64 },
    /// Finite set of angles with probabilities.
    DiscreteAtoms { angles: Vec<f64>, weights: Vec<f64> },
}

impl PhaseDistribution {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        let d = Self::GaussianZeroMean { sigma };
        d.validate()?;
        Ok(d)
    }

    pub fn discrete(angles: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let d = Self::DiscreteAtoms { angles, weights };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::GaussianZeroMean { sigma } => {
                if !sigma.is_finite() || *sigma < 0.0 {
                    return invalid(format!("gaussian sigma must be finite and >= 0, got {sigma}"));
                }
            }
            Self::DiscreteAtoms { angles, weights } => {
                if angles.is_empty() {
                    return invalid("discrete distribution needs at least one atom");
                }
                if angles.len() != weights.len() {
                    return invalid(format!(
                        "{} angles but {} weights",
                        angles.len(),
                        weights.len()
                    ));
                }
                if angles.iter().any(|a| !a.is_finite()) {
                    return invalid("atom angles must be finite");
                }
                if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                    return invalid("atom weights must be finite and nonnegative");
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > WEIGHT_TOL {
                    return invalid(format!("atom weights sum to {total}, not 1"));
                }
            }
        }
        Ok(())
    }

    /// Convex combination `w·self + (1−w)·other` of two discrete laws.
    pub fn mixture(&self, other: &Self, w: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return invalid(format!("mixture weight {w} outside [0, 1]"));
        }
        match (self, other) {
            (
                Self::DiscreteAtoms { angles: a1, weights: w1 },
                Self::DiscreteAtoms { angles: a2, weights: w2 },
            ) => {
                let angles = a1.iter().chain(a2).copied().collect();
                let weights = w1
                    .iter()
                    .map(|x| w * x)
                    .chain(w2.iter().map(|x| (1.0 - w) * x))
                    .collect();
                Self::discrete(angles, weights)
            }
            _ => invalid("mixtures are only supported between discrete distributions"),
        }
    }

    /// Validated sampler borrowing this law.
    pub fn sampler(&self) -> Result<PhaseSampler<'_>> {
        self.validate()?;
        Ok(match self {
            Self::GaussianZeroMean { sigma } => PhaseSampler::Gaussian(*sigma),
            Self::DiscreteAtoms { angles, weights } => PhaseSampler::Discrete(
                angles,
                WeightedIndex::new(weights.iter().copied())
                    .map_err(|e| crate::Error::Validation(format!("atom weights: {e}")))?,
            ),
        })
    }
}

pub enum PhaseSampler<'a> {
    Gaussian(f64),
    Discrete(&'a [f64], WeightedIndex<f64>),
}

impl PhaseSampler<'_> {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            PhaseSampler::Gaussian(sigma) => {
                let z: f64 = rng.sample(StandardNormal);
                sigma * z
            }
            PhaseSampler::Discrete(angles, index) => angles[index.sample(rng)],
        }
    }
}

/// Average dephasing parameter κ = ∫ p_θ e^{iθ} dθ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kappa(C64);

impl Kappa {
    pub const ONE: Kappa = Kappa(C64::new(1.0, 0.0));

    pub fn new(value: C64) -> Result<Self> {
        if !value.re.is_finite() || !value.im.is_finite() {
            return invalid("kappa must be finite");
        }
        if value.norm() > 1.0 + 1e-12 {
            return invalid(format!("|kappa| = {} exceeds 1", value.norm()));
        }
        Ok(Kappa(value))
    }

    pub fn real(value: f64) -> Result<Self> {
        Self::new(C64::new(value, 0.0))
    }

    pub fn value(self) -> C64 {
        self.0
    }

    pub fn re(self) -> f64 {
        self.0.re
    }

    pub fn modulus(self) -> f64 {
        self.0.norm()
    }

    pub fn modulus_sq(self) -> f64 {
        self.0.norm_sqr()
    }
}

/// Computes κ analytically: `e^{−σ²/2}` for the Gaussian law, the weighted
/// sum of `e^{iθ}` for discrete atoms.
pub fn kappa(dist: &PhaseDistribution) -> Result<Kappa> {
    dist.validate()?;
    let value = match dist {
        PhaseDistribution::GaussianZeroMean { sigma } => C64::new((-0.5 * sigma * sigma).exp(), 0.0),
        PhaseDistribution::DiscreteAtoms { angles, weights } => angles
            .iter()
            .zip(weights)
            .map(|(a, w)| C64::from_polar(*w, *a))
            .sum(),
    };
    // Rounding in the weighted sum can push |κ| a hair above 1.
    let m = value.norm();
    Kappa::new(if m > 1.0 { value / m } else { value })
}

/// ChaCha8 keystream `stream` of the generator seeded by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Child seed for the `stream`-th independent sub-job of `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    stream_rng(seed, stream).next_u64()
}

/// Draws `count` phases; batch `b` of [`BATCH`] draws comes from stream `b`.
pub fn sample_phases(dist: &PhaseDistribution, count: usize, seed: u64) -> Result<Vec<f64>> {
    let sampler = dist.sampler()?;
    let batches = count.div_ceil(BATCH);
    let chunks: Vec<Vec<f64>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let len = BATCH.min(count - b * BATCH);
            let mut rng = stream_rng(seed, b as u64);
            (0..len).map(|_| sampler.draw(&mut rng)).collect()
        })
        .collect();
    Ok(chunks.concat())
}
