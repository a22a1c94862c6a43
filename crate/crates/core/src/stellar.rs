//! Two-telescope stellar interferometry with error filtration.
//!
//! A single photon shared between telescopes `A` and `B` carries the phase
//! `φ` and visibility `γ` in its `(A₀, B₀)` coherence. Each arm is spread
//! over `N` lines (`N−1` vacuum ancillae), dephased line by line, and
//! recombined. The QFI for `(φ, γ)` is computed on the full decoded state,
//! ancilla outcomes included.
//!
//! Mode layout: `A_i` is mode `1 + i`, `B_i` is mode `1 + N + i`.

use nalgebra::{DMatrix, Matrix2};
use rayon::prelude::*;

use crate::error::invalid;
use crate::fock1::{dephasing_matrix, interferometer_matrix, ModeChannelSpec, PhotonSectorState};
use crate::interferometers::InterferometerKind;
use crate::phase_noise::{derive_seed, Kappa};
use crate::qfi::{
    central_difference, closed_j_dark, qfi_matrix, DerivativeMethod, QfiResult, StellarQfiParams,
    DEFAULT_CUTOFF,
};
use crate::{CMatrix, Result, C64};

/// `ρ_φ` over (vacuum, `A₀`, `B₀`): populations ½ and coherence `γe^{iφ}/2`.
pub fn stellar_state(phi: f64, gamma: f64) -> Result<PhotonSectorState> {
    if !(0.0..=1.0).contains(&gamma) {
        return invalid(format!("gamma {gamma} outside [0, 1]"));
    }
    PhotonSectorState::from_matrix(stellar_matrix(phi, gamma))
}

/// `ρ_φ` without range checks, so finite differences may step past `γ = 1`.
fn stellar_matrix(phi: f64, gamma: f64) -> CMatrix {
    let mut m = CMatrix::zeros(3, 3);
    m[(1, 1)] = C64::new(0.5, 0.0);
    m[(2, 2)] = C64::new(0.5, 0.0);
    let c = C64::from_polar(0.5 * gamma, phi);
    m[(1, 2)] = c;
    m[(2, 1)] = c.conj();
    m
}

/// `(∂_φ ρ_φ, ∂_γ ρ_φ)`.
fn stellar_derivatives(phi: f64, gamma: f64) -> (CMatrix, CMatrix) {
    let e = C64::from_polar(0.5, phi);
    let mut dphi = CMatrix::zeros(3, 3);
    dphi[(1, 2)] = C64::i() * e * gamma;
    dphi[(2, 1)] = dphi[(1, 2)].conj();
    let mut dgamma = CMatrix::zeros(3, 3);
    dgamma[(1, 2)] = e;
    dgamma[(2, 1)] = e.conj();
    (dphi, dgamma)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StellarScenario {
    pub params: StellarQfiParams,
    pub interferometer: InterferometerKind,
}

impl StellarScenario {
    pub fn ideal(params: StellarQfiParams) -> Self {
        Self { params, interferometer: InterferometerKind::Fourier }
    }

    pub fn with_interferometer(mut self, kind: InterferometerKind) -> Self {
        self.interferometer = kind;
        self
    }

    fn signal_modes(&self) -> [usize; 2] {
        [1, 1 + self.params.n_branches]
    }
}

/// Unnormalized 2×2 state over {photon in `A₀`, photon in `B₀`}.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalBlock {
    pub matrix: Matrix2<C64>,
}

impl SignalBlock {
    pub fn probability(&self) -> f64 {
        self.matrix.trace().re
    }

    fn to_dmatrix(&self) -> CMatrix {
        DMatrix::from_fn(2, 2, |i, j| self.matrix[(i, j)])
    }
}

/// Decoded state and its parameter derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    /// Full `(2N+1)`-dimensional state, dark counts applied to the signal
    /// block when `dark_count > 0`.
    pub state: CMatrix,
    pub d_phi: CMatrix,
    pub d_gamma: CMatrix,
    /// Signal block before dark counts.
    pub block: SignalBlock,
}

/// Linear map from the 2-mode input to the `2N`-mode decoded output.
struct Pipeline {
    n: usize,
    enc: [crate::interferometers::InterferometerMatrix; 2],
    dec: [crate::interferometers::InterferometerMatrix; 2],
    spec: ModeChannelSpec,
}

impl Pipeline {
    fn new(s: &StellarScenario) -> Result<Self> {
        s.params.validate()?;
        let n = s.params.n_branches;
        let (ea, da) = s.interferometer.encoder_decoder(n, 0)?;
        let (eb, db) = s.interferometer.encoder_decoder(n, 1)?;
        let spec = ModeChannelSpec::uniform(2 * n, Kappa::real(s.params.kappa)?, 1.0)?;
        Ok(Self { n, enc: [ea, eb], dec: [da, db], spec })
    }

    fn branch_modes(&self) -> [Vec<usize>; 2] {
        [(1..=self.n).collect(), (self.n + 1..=2 * self.n).collect()]
    }

    /// Applies encode, dephase, decode to a 3×3 input (state or derivative).
    fn apply(&self, input: &CMatrix) -> Result<CMatrix> {
        let dim = 2 * self.n + 1;
        let mut m = CMatrix::zeros(dim, dim);
        let idx = [0, 1, self.n + 1];
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                m[(ia, ib)] = input[(a, b)];
            }
        }
        let modes = self.branch_modes();
        for (u, md) in self.enc.iter().zip(&modes) {
            m = interferometer_matrix(&m, u, md)?;
        }
        m = dephasing_matrix(&m, &self.spec)?;
        for (u, md) in self.dec.iter().zip(&modes) {
            m = interferometer_matrix(&m, u, md)?;
        }
        Ok(m)
    }
}

fn extract_block(m: &CMatrix, modes: [usize; 2]) -> Matrix2<C64> {
    Matrix2::from_fn(|i, j| m[(modes[i], modes[j])])
}

/// Dark counts on the signal block of a full state: `S ρ S + (p/2) I_block`,
/// `S` scaling the signal modes by `√(1−p)`. On the block this is exactly
/// `(1−p)ϱ + p I/2`; coherences with other modes shrink by `√(1−p)`.
fn dark_counts_full(m: &CMatrix, modes: [usize; 2], p: f64, affine: bool) -> CMatrix {
    let s = (1.0 - p).sqrt();
    let scale = |i: usize| if modes.contains(&i) { s } else { 1.0 };
    let mut out = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (scale(i) * scale(j)));
    if affine {
        for &i in &modes {
            out[(i, i)] += 0.5 * p;
        }
    }
    out
}

pub fn run_pipeline(s: &StellarScenario) -> Result<PipelineOutput> {
    let pipe = Pipeline::new(s)?;
    let StellarQfiParams { phi, gamma, dark_count, .. } = s.params;
    let raw = pipe.apply(&stellar_matrix(phi, gamma))?;
    let (dphi_in, dgamma_in) = stellar_derivatives(phi, gamma);
    let modes = s.signal_modes();
    let block = SignalBlock { matrix: extract_block(&raw, modes) };
    let (mut state, mut d_phi, mut d_gamma) = (raw, pipe.apply(&dphi_in)?, pipe.apply(&dgamma_in)?);
    if dark_count > 0.0 {
        state = dark_counts_full(&state, modes, dark_count, true);
        d_phi = dark_counts_full(&d_phi, modes, dark_count, false);
        d_gamma = dark_counts_full(&d_gamma, modes, dark_count, false);
    }
    Ok(PipelineOutput { state, d_phi, d_gamma, block })
}

/// Probability that the photon leaves through `A₀` or `B₀`.
pub fn signal_probability(s: &StellarScenario) -> Result<f64> {
    let mut ideal = *s;
    ideal.params.dark_count = 0.0;
    Ok(run_pipeline(&ideal)?.block.probability())
}

/// `(1−p)ϱ + p I/2` on the block.
pub fn apply_dark_counts(block: &SignalBlock, p: f64) -> Result<SignalBlock> {
    if !(0.0..=1.0).contains(&p) {
        return invalid(format!("dark-count probability {p} outside [0, 1]"));
    }
    let half = C64::new(0.5 * p, 0.0);
    Ok(SignalBlock { matrix: block.matrix * C64::new(1.0 - p, 0.0) + Matrix2::identity() * half })
}

/// Closed-form block for ideal splitters: populations `(1+(N−1)κ²)/(2N)`,
/// coherence `γκ²e^{iφ}/2`.
pub fn ideal_block(p: &StellarQfiParams) -> SignalBlock {
    let (n, k2) = (p.n_branches as f64, p.kappa * p.kappa);
    let a = C64::new((1.0 + (n - 1.0) * k2) / (2.0 * n), 0.0);
    let c = C64::from_polar(0.5 * p.gamma * k2, p.phi);
    SignalBlock { matrix: Matrix2::new(a, c, c.conj(), a) }
}

fn to_result(j: DMatrix<f64>, method: DerivativeMethod) -> QfiResult {
    QfiResult { matrix: Matrix2::from_fn(|a, b| j[(a, b)]), cutoff: DEFAULT_CUTOFF, method }
}

/// `(φ, γ)` QFI matrix of the full decoded state with analytic derivatives.
pub fn stellar_qfi(s: &StellarScenario) -> Result<QfiResult> {
    let out = run_pipeline(s)?;
    let j = qfi_matrix(&out.state, &[out.d_phi, out.d_gamma], DEFAULT_CUTOFF)?;
    Ok(to_result(j, DerivativeMethod::Analytic))
}

/// As [`stellar_qfi`] with derivatives taken by central differences of the
/// simulated state.
pub fn stellar_qfi_numeric(s: &StellarScenario, h: f64) -> Result<QfiResult> {
    let out = run_pipeline(s)?;
    let pipe = Pipeline::new(s)?;
    let modes = s.signal_modes();
    let p = s.params;
    let full = |phi: f64, gamma: f64| -> Result<CMatrix> {
        let m = pipe.apply(&stellar_matrix(phi, gamma))?;
        Ok(if p.dark_count > 0.0 { dark_counts_full(&m, modes, p.dark_count, true) } else { m })
    };
    let d_phi = central_difference(|x| full(x, p.gamma), p.phi, h)?;
    let d_gamma = central_difference(|x| full(p.phi, x), p.gamma, h)?;
    let j = qfi_matrix(&out.state, &[d_phi, d_gamma], DEFAULT_CUTOFF)?;
    Ok(to_result(j, DerivativeMethod::CentralDifference(h)))
}

/// `(φ, γ)` QFI of the signal block alone (after dark counts). Equals the
/// full-state QFI whenever the decoded state is block diagonal.
pub fn block_qfi(block: &SignalBlock, p: &StellarQfiParams) -> Result<QfiResult> {
    let q = p.dark_count;
    let noisy = apply_dark_counts(block, q)?;
    let c = block.matrix[(0, 1)];
    let mut d_phi = CMatrix::zeros(2, 2);
    d_phi[(0, 1)] = C64::i() * c * (1.0 - q);
    d_phi[(1, 0)] = d_phi[(0, 1)].conj();
    // the coherence is linear in γ, so ∂_γ is the coherence divided by γ;
    // at γ = 0 take the ideal-splitter value κ²e^{iφ}/2
    let dc = if p.gamma > 0.0 {
        c / p.gamma
    } else {
        C64::from_polar(0.5 * p.kappa * p.kappa, p.phi)
    } * (1.0 - q);
    let mut d_gamma = CMatrix::zeros(2, 2);
    d_gamma[(0, 1)] = dc;
    d_gamma[(1, 0)] = dc.conj();
    let j = qfi_matrix(&noisy.to_dmatrix(), &[d_phi, d_gamma], DEFAULT_CUTOFF)?;
    Ok(to_result(j, DerivativeMethod::Analytic))
}

/// Closed-form `(J_φ, J_γ)` for ideal splitters.
pub fn closed_qfi(p: &StellarQfiParams) -> (f64, f64) {
    closed_j_dark(p)
}

/// Mean and standard deviation of the QFIs at one `κ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImperfectionRow {
    pub kappa: f64,
    pub mean_j_phi: f64,
    pub std_j_phi: f64,
    pub mean_j_gamma: f64,
    pub std_j_gamma: f64,
    pub ideal_j_phi: f64,
    pub ideal_j_gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImperfectionStudy {
    pub n_branches: usize,
    pub sigma_r: f64,
    pub runs: usize,
    pub seed: u64,
    pub gamma: f64,
    pub phi: f64,
    pub dark_count: f64,
    /// Decoder is the exact inverse of each perturbed encoder.
    pub matched: bool,
}

impl ImperfectionStudy {
    pub fn new(n_branches: usize, sigma_r: f64, runs: usize, seed: u64, gamma: f64) -> Self {
        Self { n_branches, sigma_r, runs, seed, gamma, phi: 0.0, dark_count: 0.0, matched: true }
    }

    /// Run `r` perturbs its splitters from `derive_seed(seed, r)`, so a longer
    /// study extends a shorter one with the same seed.
    pub fn run(&self, kappas: &[f64]) -> Result<Vec<ImperfectionRow>> {
        if self.runs == 0 {
            return invalid("imperfection study needs at least one run");
        }
        if !self.sigma_r.is_finite() || self.sigma_r < 0.0 {
            return invalid(format!("sigma_r {} must be finite and >= 0", self.sigma_r));
        }
        let params = |k: f64| StellarQfiParams {
            n_branches: self.n_branches,
            kappa: k,
            gamma: self.gamma,
            phi: self.phi,
            dark_count: self.dark_count,
        };
        for &k in kappas {
            params(k).validate()?;
        }
        let per_run: Vec<Vec<(f64, f64)>> = (0..self.runs)
            .into_par_iter()
            .map(|r| {
                let kind = InterferometerKind::Perturbed {
                    sigma_r: self.sigma_r,
                    seed: derive_seed(self.seed, r as u64),
                    matched: self.matched,
                };
                kappas
                    .iter()
                    .map(|&k| {
                        let q = stellar_qfi(&StellarScenario { params: params(k), interferometer: kind })?;
                        Ok((q.j_phi(), q.j_gamma()))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;

        kappas
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let (mp, sp) = mean_std(per_run.iter().map(|v| v[i].0));
                let (mg, sg) = mean_std(per_run.iter().map(|v| v[i].1));
                let ideal = stellar_qfi(&StellarScenario::ideal(params(k)).with_interferometer(InterferometerKind::EvenSplitter))?;
                Ok(ImperfectionRow {
                    kappa: k,
                    mean_j_phi: mp,
                    std_j_phi: sp,
                    mean_j_gamma: mg,
                    std_j_gamma: sg,
                    ideal_j_phi: ideal.j_phi(),
                    ideal_j_gamma: ideal.j_gamma(),
                })
            })
            .collect()
    }
}

/// Mean and sample standard deviation (0 for a single value).
fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
