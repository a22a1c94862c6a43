//! Density matrices on the ≤1-photon sector of `M` optical modes.
//!
//! Basis index 0 is the vacuum `|0…0⟩`; index `m ≥ 1` is one photon in mode
//! `m`. Passive optics, dephasing and loss never create a second photon, so
//! the `(M+1)`-dimensional space is closed under every map here.
//!
//! The channel maps are also exposed on raw matrices (`*_matrix`) because they
//! are linear and the QFI code pushes parameter derivatives through them.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::invalid;
use crate::interferometers::InterferometerMatrix;
use crate::phase_noise::Kappa;
use crate::{CMatrix, Error, Result, C64};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-12;

/// Per-mode dephasing and transmissivity for `M` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeChannelSpec {
    dephasing: Vec<Kappa>,
    transmissivity: Vec<f64>,
}

impl ModeChannelSpec {
    pub fn new(dephasing: Vec<Kappa>, transmissivity: Vec<f64>) -> Result<Self> {
        if dephasing.len() != transmissivity.len() {
            return Err(Error::Dimension { expected: dephasing.len(), got: transmissivity.len() });
        }
        if let Some(eta) = transmissivity.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return invalid(format!("transmissivity {eta} outside [0, 1]"));
        }
        Ok(Self { dephasing, transmissivity })
    }

    /// No dephasing and no loss on any of `modes` modes.
    pub fn noiseless(modes: usize) -> Self {
        Self { dephasing: vec![Kappa::ONE; modes], transmissivity: vec![1.0; modes] }
    }

    /// Same κ and η on every mode.
    pub fn uniform(modes: usize, kappa: Kappa, eta: f64) -> Result<Self> {
        Self::new(vec![kappa; modes], vec![eta; modes])
    }

    /// Sets κ on mode `mode` (1-based, as in the state basis).
    pub fn with_dephasing(mut self, mode: usize, kappa: Kappa) -> Result<Self> {
        let slot = mode
            .checked_sub(1)
            .and_then(|i| self.dephasing.get_mut(i))
            .ok_or_else(|| Error::Validation(format!("mode {mode} out of range")))?;
        *slot = kappa;
        Ok(self)
    }

    /// Sets η on mode `mode` (1-based).
    pub fn with_transmissivity(mut self, mode: usize, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return invalid(format!("transmissivity {eta} outside [0, 1]"));
        }
        let slot = mode
            .checked_sub(1)
            .and_then(|i| self.transmissivity.get_mut(i))
            .ok_or_else(|| Error::Validation(format!("mode {mode} out of range")))?;
        *slot = eta;
        Ok(self)
    }

    pub fn modes(&self) -> usize {
        self.dephasing.len()
    }

    pub fn dephasing(&self) -> &[Kappa] {
        &self.dephasing
    }

    pub fn transmissivity(&self) -> &[f64] {
        &self.transmissivity
    }
}

/// `(M+1)×(M+1)` density matrix, possibly unnormalized after post-selection.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonSectorState {
    matrix: CMatrix,
}

impl PhotonSectorState {
    /// `|ψ⟩⟨ψ|` for amplitudes over (vacuum, mode 1, …, mode M).
    pub fn pure(amplitudes: &[C64]) -> Result<Self> {
        if amplitudes.is_empty() {
            return invalid("empty amplitude vector");
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return invalid(format!("amplitudes have squared norm {norm}, expected 1"));
        }
        let v = nalgebra::DVector::from_column_slice(amplitudes);
        Ok(Self { matrix: &v * v.adjoint() })
    }

    pub fn vacuum(modes: usize) -> Self {
        let mut matrix = CMatrix::zeros(modes + 1, modes + 1);
        matrix[(0, 0)] = C64::new(1.0, 0.0);
        Self { matrix }
    }

    /// Validates and wraps a raw matrix.
    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return invalid("state matrix must be square and non-empty");
        }
        let s = Self { matrix };
        s.check_physical()?;
        Ok(s)
    }

    pub fn modes(&self) -> usize {
        self.matrix.nrows() - 1
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.trace() - 1.0).abs() <= TRACE_TOL
    }

    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if t <= 0.0 {
            return Err(Error::UndefinedFidelity);
        }
        Ok(Self { matrix: &self.matrix / C64::new(t, 0.0) })
    }

    /// Largest entry of `|ρ − ρ†|`.
    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        SymmetricEigen::new(h).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Hermitian, PSD and trace in `[0, 1]`, all within the module tolerances.
    pub fn check_physical(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return invalid(format!("state not Hermitian (error {herm:e})"));
        }
        let lmin = self.min_eigenvalue();
        if lmin < -PSD_TOL {
            return invalid(format!("state not positive semidefinite (min eigenvalue {lmin:e})"));
        }
        let t = self.trace();
        if !(-TRACE_TOL..=1.0 + TRACE_TOL).contains(&t) {
            return invalid(format!("state trace {t} outside [0, 1]"));
        }
        Ok(())
    }

    pub fn apply_interferometer(&self, u: &InterferometerMatrix, modes: &[usize]) -> Result<Self> {
        Ok(Self { matrix: interferometer_matrix(&self.matrix, u, modes)? })
    }

    pub fn apply_dephasing(&self, spec: &ModeChannelSpec) -> Result<Self> {
        Ok(Self { matrix: dephasing_matrix(&self.matrix, spec)? })
    }

    pub fn apply_loss(&self, spec: &ModeChannelSpec) -> Result<Self> {
        Ok(Self { matrix: loss_matrix(&self.matrix, spec)? })
    }

    /// Projects the ancilla single-photon components out. Returns the
    /// unnormalized remainder and its trace relative to the input trace.
    pub fn postselect_vacuum(&self, ancillae: &[usize]) -> Result<(Self, f64)> {
        let keep = complement(self.dim(), ancillae)?;
        let matrix = self.matrix.select_rows(&keep).select_columns(&keep);
        let before = self.trace();
        let out = Self { matrix };
        let p = if before > 0.0 { out.trace() / before } else { 0.0 };
        Ok((out, p))
    }

    /// Drops the vacuum row and column: the state conditioned on the photon
    /// still being present, unnormalized. The vacuum index stays in place
    /// with zero weight so the basis convention is unchanged.
    pub fn condition_on_photon(&self) -> Self {
        let mut matrix = self.matrix.clone();
        matrix.row_mut(0).fill(C64::new(0.0, 0.0));
        matrix.column_mut(0).fill(C64::new(0.0, 0.0));
        Self { matrix }
    }

    /// `⟨ψ|ρ|ψ⟩ / Tr ρ` against a normalized pure reference.
    pub fn fidelity(&self, reference: &[C64]) -> Result<f64> {
        if reference.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: reference.len() });
        }
        let norm: f64 = reference.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return invalid(format!("reference has squared norm {norm}, expected 1"));
        }
        let t = self.trace();
        if t <= 0.0 {
            return Err(Error::UndefinedFidelity);
        }
        let psi = nalgebra::DVector::from_column_slice(reference);
        let overlap = (psi.adjoint() * &self.matrix * &psi)[(0, 0)].re;
        Ok(overlap / t)
    }
}

pub(crate) fn hermiticity_error(m: &CMatrix) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn complement(dim: usize, removed: &[usize]) -> Result<Vec<usize>> {
    for &a in removed {
        if a == 0 || a >= dim {
            return invalid(format!("ancilla index {a} must be a mode in 1..{dim}"));
        }
    }
    Ok((0..dim).filter(|i| !removed.contains(i)).collect())
}

/// Full-space unitary acting as `u` on `modes` and as identity elsewhere.
pub fn embed(u: &InterferometerMatrix, modes: &[usize], dim: usize) -> Result<CMatrix> {
    if u.dim() != modes.len() {
        return Err(Error::Dimension { expected: modes.len(), got: u.dim() });
    }
    for (i, &m) in modes.iter().enumerate() {
        if m == 0 || m >= dim {
            return invalid(format!("mode index {m} must be in 1..{dim}"));
        }
        if modes[..i].contains(&m) {
            return invalid(format!("mode index {m} repeated"));
        }
    }
    let mut v = CMatrix::identity(dim, dim);
    for (a, &ma) in modes.iter().enumerate() {
        for (b, &mb) in modes.iter().enumerate() {
            v[(ma, mb)] = u.matrix()[(a, b)];
        }
    }
    Ok(v)
}

/// `V ρ V†` with `V` the embedding of `u` on `modes`.
pub fn interferometer_matrix(rho: &CMatrix, u: &InterferometerMatrix, modes: &[usize]) -> Result<CMatrix> {
    let v = embed(u, modes, rho.nrows())?;
    Ok(&v * rho * v.adjoint())
}

/// Mode-wise dephasing: entry `(j, k)`, `j ≠ k`, picks up `κ_j κ̄_k` with
/// `κ_0 = 1` for the vacuum index.
pub fn dephasing_matrix(rho: &CMatrix, spec: &ModeChannelSpec) -> Result<CMatrix> {
    let dim = rho.nrows();
    if spec.modes() + 1 != dim {
        return Err(Error::Dimension { expected: dim - 1, got: spec.modes() });
    }
    let factor: Vec<C64> = std::iter::once(C64::new(1.0, 0.0))
        .chain(spec.dephasing().iter().map(|k| k.value()))
        .collect();
    Ok(DMatrix::from_fn(dim, dim, |j, k| {
        if j == k {
            rho[(j, k)]
        } else {
            rho[(j, k)] * factor[j] * factor[k].conj()
        }
    }))
}

/// Pure loss on each mode; lost population moves to the vacuum.
pub fn loss_matrix(rho: &CMatrix, spec: &ModeChannelSpec) -> Result<CMatrix> {
    let dim = rho.nrows();
    if spec.modes() + 1 != dim {
        return Err(Error::Dimension { expected: dim - 1, got: spec.modes() });
    }
    let amp: Vec<f64> = std::iter::once(1.0)
        .chain(spec.transmissivity().iter().map(|e| e.sqrt()))
        .collect();
    let mut out = DMatrix::from_fn(dim, dim, |j, k| rho[(j, k)] * (amp[j] * amp[k]));
    let lost: C64 = (1..dim)
        .map(|m| rho[(m, m)] * (1.0 - spec.transmissivity()[m - 1]))
        .sum();
    out[(0, 0)] += lost;
    Ok(out)
}
