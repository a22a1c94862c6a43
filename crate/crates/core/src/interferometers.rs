//! Passive linear-optical unitaries used for encoding and decoding.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

use crate::error::invalid;
use crate::phase_noise::{derive_seed, stream_rng};
use crate::{CMatrix, Error, Result, C64};

const UNITARY_TOL: f64 = 1e-12;

/// A two-mode splitter on the adjacent pair `(mode, mode + 1)` (0-based),
/// with block `[[r, t], [t, −r]]`, `t = √(1 − r²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeSplitter {
    pub mode: usize,
    pub reflectivity: f64,
}

impl TwoModeSplitter {
    pub fn new(mode: usize, reflectivity: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&reflectivity) {
            return invalid(format!("reflectivity {reflectivity} outside [0, 1]"));
        }
        Ok(Self { mode, reflectivity })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Fourier,
    EvenSplitter,
    Cascade(Vec<TwoModeSplitter>),
    Inverse(Box<Provenance>),
    Raw,
}

/// Square unitary together with how it was built.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferometerMatrix {
    matrix: CMatrix,
    provenance: Provenance,
}

impl InterferometerMatrix {
    /// Wraps an arbitrary matrix after checking unitarity.
    pub fn from_raw(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return invalid("interferometer matrix must be square");
        }
        let u = Self { matrix, provenance: Provenance::Raw };
        let err = u.unitarity_error();
        if err > UNITARY_TOL {
            return invalid(format!("matrix is not unitary: max |U†U − I| = {err:e}"));
        }
        Ok(u)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Conjugate transpose, tagged as the inverse of `self`.
    pub fn inverse(&self) -> Self {
        let provenance = match &self.provenance {
            Provenance::Inverse(inner) => (**inner).clone(),
            other => Provenance::Inverse(Box::new(other.clone())),
        };
        Self { matrix: self.matrix.adjoint(), provenance }
    }

    /// `max |U†U − I|` over all entries.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.dim();
        let g = self.matrix.adjoint() * &self.matrix - CMatrix::identity(n, n);
        g.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 {
        return invalid("interferometer needs at least one mode");
    }
    Ok(())
}

/// Discrete Fourier transform, `F_{hk} = e^{i2πhk/n}/√n`.
pub fn fourier(n: usize) -> Result<InterferometerMatrix> {
    check_dim(n)?;
    let norm = 1.0 / (n as f64).sqrt();
    let matrix = DMatrix::from_fn(n, n, |h, k| {
        // reduce hk mod n first so large products keep full precision
        let phase = 2.0 * PI * ((h * k) % n) as f64 / n as f64;
        C64::from_polar(norm, phase)
    });
    Ok(InterferometerMatrix { matrix, provenance: Provenance::Fourier })
}

pub fn inverse_fourier(n: usize) -> Result<InterferometerMatrix> {
    Ok(fourier(n)?.inverse())
}

/// Reflectivities `r_i = 1/√(n + 1 − i)`, `i = 1..n−1`, of the even splitter.
pub fn even_splitter_reflectivities(n: usize) -> Vec<f64> {
    (1..n).map(|i| 1.0 / ((n + 1 - i) as f64).sqrt()).collect()
}

fn cascade(reflectivities: &[f64]) -> Result<Vec<TwoModeSplitter>> {
    reflectivities
        .iter()
        .enumerate()
        .map(|(i, r)| TwoModeSplitter::new(i, *r))
        .collect()
}

/// Ordered product `R_k ⋯ R_2 R_1` of embedded two-mode splitters.
pub fn compose(splitters: &[TwoModeSplitter], n: usize) -> Result<InterferometerMatrix> {
    check_dim(n)?;
    let mut m = CMatrix::identity(n, n);
    for s in splitters {
        if s.mode + 1 >= n {
            return Err(Error::Validation(format!(
                "splitter on modes ({}, {}) outside a {n}-mode device",
                s.mode,
                s.mode + 1
            )));
        }
        if !(0.0..=1.0).contains(&s.reflectivity) {
            return invalid(format!("reflectivity {} outside [0, 1]", s.reflectivity));
        }
        let r = s.reflectivity;
        let t = (1.0 - r * r).max(0.0).sqrt();
        let (i, j) = (s.mode, s.mode + 1);
        // left-multiply: only rows i and j change
        for col in 0..n {
            let a = m[(i, col)];
            let b = m[(j, col)];
            m[(i, col)] = a * r + b * t;
            m[(j, col)] = a * t - b * r;
        }
    }
    Ok(InterferometerMatrix { matrix: m, provenance: Provenance::Cascade(splitters.to_vec()) })
}

/// Even 1-to-`n` splitter: first column uniformly `1/√n`.
pub fn even_splitter(n: usize) -> Result<InterferometerMatrix> {
    check_dim(n)?;
    let mut u = compose(&cascade(&even_splitter_reflectivities(n))?, n)?;
    u.provenance = Provenance::EvenSplitter;
    Ok(u)
}

/// Even splitter whose reflectivities get i.i.d. `N(0, sigma_r²)` errors,
/// clamped to `[0, 1]`.
pub fn perturbed_even_splitter(n: usize, sigma_r: f64, seed: u64) -> Result<InterferometerMatrix> {
    check_dim(n)?;
    if !sigma_r.is_finite() || sigma_r < 0.0 {
        return invalid(format!("sigma_r must be finite and >= 0, got {sigma_r}"));
    }
    let mut rng = stream_rng(seed, 0);
    let noisy: Vec<f64> = even_splitter_reflectivities(n)
        .into_iter()
        .map(|r| {
            let g: f64 = rng.sample(StandardNormal);
            (r + sigma_r * g).clamp(0.0, 1.0)
        })
        .collect();
    compose(&cascade(&noisy)?, n)
}

/// Which `n`-port device encodes (and, inverted, decodes) each branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterferometerKind {
    Fourier,
    EvenSplitter,
    /// Even splitter with reflectivity noise. With `matched` the decoder is
    /// the exact inverse of the perturbed encoder; otherwise the decoder is
    /// the inverse of an independently perturbed device.
    Perturbed { sigma_r: f64, seed: u64, matched: bool },
}

impl InterferometerKind {
    /// Encoder and decoder for branch number `branch` of a multi-branch setup.
    pub fn encoder_decoder(
        &self,
        n: usize,
        branch: u64,
    ) -> Result<(InterferometerMatrix, InterferometerMatrix)> {
        let enc = match self {
            Self::Fourier => fourier(n)?,
            Self::EvenSplitter => even_splitter(n)?,
            Self::Perturbed { sigma_r, seed, matched } => {
                let enc = perturbed_even_splitter(n, *sigma_r, derive_seed(*seed, 2 * branch))?;
                let dec = if *matched {
                    enc.inverse()
                } else {
                    perturbed_even_splitter(n, *sigma_r, derive_seed(*seed, 2 * branch + 1))?
                        .inverse()
                };
                return Ok((enc, dec));
            }
        };
        let dec = enc.inverse();
        Ok((enc, dec))
    }
}
