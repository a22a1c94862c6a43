//! Quantum Fisher information.
//!
//! For a state `ρ = Σ λ_i |i⟩⟨i|` and a derivative `∂ρ`,
//! `J = Σ_{λ_i+λ_j > cutoff} 2|⟨i|∂ρ|j⟩|² / (λ_i + λ_j)`. The symmetric
//! logarithmic derivative `L` solves `½(ρL + Lρ) = ∂ρ` on the support and the
//! multiparameter matrix is `J_jk = ½ Tr[ρ(L_j L_k + L_k L_j)]`.
//!
//! The second half of the module collects the closed-form QFIs of the
//! filtered stellar state, with and without detector dark counts.

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};

use crate::error::invalid;
use crate::fock1::hermiticity_error;
use crate::{CMatrix, Error, Result, C64};

/// Absolute cutoff on `λ_i + λ_j`.
pub const DEFAULT_CUTOFF: f64 = 1e-12;

/// Default central-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;

const INPUT_HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeMethod {
    Analytic,
    CentralDifference(f64),
}

/// QFI matrix for the stellar parameters `(φ, γ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QfiResult {
    pub matrix: Matrix2<f64>,
    pub cutoff: f64,
    pub method: DerivativeMethod,
}

impl QfiResult {
    pub fn j_phi(&self) -> f64 {
        self.matrix[(0, 0)]
    }

    pub fn j_gamma(&self) -> f64 {
        self.matrix[(1, 1)]
    }
}

/// Eigen-decomposition of a Hermitian matrix: eigenvalues and eigenvectors
/// as columns.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let e = SymmetricEigen::new(h);
    (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
}

fn check_pair(rho: &CMatrix, drho: &CMatrix) -> Result<()> {
    if !rho.is_square() {
        return invalid("state matrix must be square");
    }
    if drho.shape() != rho.shape() {
        return Err(Error::Dimension { expected: rho.nrows(), got: drho.nrows() });
    }
    let (hr, hd) = (hermiticity_error(rho), hermiticity_error(drho));
    if hr > INPUT_HERMITIAN_TOL || hd > INPUT_HERMITIAN_TOL {
        return invalid(format!("QFI inputs must be Hermitian (errors {hr:e}, {hd:e})"));
    }
    Ok(())
}

/// `∂ρ` rotated into the eigenbasis of `ρ`.
fn in_eigenbasis(vecs: &CMatrix, drho: &CMatrix) -> CMatrix {
    vecs.adjoint() * drho * vecs
}

pub fn qfi_scalar(rho: &CMatrix, drho: &CMatrix, cutoff: f64) -> Result<f64> {
    check_pair(rho, drho)?;
    let (lam, vecs) = eigh(rho);
    let d = in_eigenbasis(&vecs, drho);
    let mut j = 0.0;
    for a in 0..lam.len() {
        for b in 0..lam.len() {
            let s = lam[a] + lam[b];
            if s > cutoff {
                j += 2.0 * d[(a, b)].norm_sqr() / s;
            }
        }
    }
    Ok(j)
}

/// Symmetric logarithmic derivative in the original basis.
pub fn sld(rho: &CMatrix, drho: &CMatrix, cutoff: f64) -> Result<CMatrix> {
    check_pair(rho, drho)?;
    let (lam, vecs) = eigh(rho);
    let d = in_eigenbasis(&vecs, drho);
    let n = lam.len();
    let l = DMatrix::from_fn(n, n, |a, b| {
        let s = lam[a] + lam[b];
        if s > cutoff {
            d[(a, b)] * (2.0 / s)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Ok(&vecs * l * vecs.adjoint())
}

/// `J_jk = ½ Tr[ρ{L_j, L_k}]` for any number of parameters.
pub fn qfi_matrix(rho: &CMatrix, drhos: &[CMatrix], cutoff: f64) -> Result<DMatrix<f64>> {
    let slds = drhos.iter().map(|d| sld(rho, d, cutoff)).collect::<Result<Vec<_>>>()?;
    let k = slds.len();
    let mut j = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let v = (rho * &slds[a] * &slds[b]).trace().re;
            j[(a, b)] = v;
            j[(b, a)] = v;
        }
    }
    Ok(j)
}

/// `(f(x + h) − f(x − h)) / 2h`.
pub fn central_difference<F>(f: F, x: f64, h: f64) -> Result<CMatrix>
where
    F: Fn(f64) -> Result<CMatrix>,
{
    if !(h > 0.0) {
        return invalid(format!("difference step {h} must be positive"));
    }
    let plus = f(x + h)?;
    let minus = f(x - h)?;
    Ok((plus - minus) / C64::new(2.0 * h, 0.0))
}

/// Parameters of the filtered stellar state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StellarQfiParams {
    pub n_branches: usize,
    /// Real dephasing parameter `|κ|`.
    pub kappa: f64,
    /// Visibility.
    pub gamma: f64,
    pub phi: f64,
    /// Dark-count probability.
    pub dark_count: f64,
}

impl StellarQfiParams {
    pub fn new(n_branches: usize, kappa: f64, gamma: f64) -> Self {
        Self { n_branches, kappa, gamma, phi: 0.0, dark_count: 0.0 }
    }

    pub fn with_phi(mut self, phi: f64) -> Self {
        self.phi = phi;
        self
    }

    pub fn with_dark_count(mut self, p: f64) -> Self {
        self.dark_count = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_branches == 0 {
            return invalid("n_branches must be >= 1");
        }
        for (name, v) in [("kappa", self.kappa), ("gamma", self.gamma), ("dark_count", self.dark_count)] {
            if !(0.0..=1.0).contains(&v) {
                return invalid(format!("{name} = {v} outside [0, 1]"));
            }
        }
        if !self.phi.is_finite() {
            return invalid("phi must be finite");
        }
        Ok(())
    }
}

/// `J_φ = γ²κ⁴N / (κ²(N−1) + 1)`.
pub fn closed_j_phi(p: &StellarQfiParams) -> f64 {
    let (n, k2, g) = (p.n_branches as f64, p.kappa * p.kappa, p.gamma);
    g * g * k2 * k2 * n / (k2 * (n - 1.0) + 1.0)
}

/// `lim_{N→∞} J_φ = γ²κ²`.
pub fn closed_j_phi_limit(p: &StellarQfiParams) -> f64 {
    p.gamma * p.gamma * p.kappa * p.kappa
}

/// `J_γ = ½κ⁴N [1/(κ²(N − γN − 1) + 1) + 1/(κ²(γN + N − 1) + 1)]`.
///
/// Infinite where the first denominator vanishes (a pure state at `γ = 1`).
pub fn closed_j_gamma(p: &StellarQfiParams) -> f64 {
    let (n, k2, g) = (p.n_branches as f64, p.kappa * p.kappa, p.gamma);
    let d1 = k2 * (n - g * n - 1.0) + 1.0;
    let d2 = k2 * (g * n + n - 1.0) + 1.0;
    if d1 <= 0.0 {
        return f64::INFINITY;
    }
    0.5 * k2 * k2 * n * (1.0 / d1 + 1.0 / d2)
}

/// `lim_{N→∞} J_γ = κ²/(1 − γ²)`, infinite at `γ = 1` (for `κ > 0`).
pub fn closed_j_gamma_limit(p: &StellarQfiParams) -> f64 {
    let k2 = p.kappa * p.kappa;
    if k2 == 0.0 {
        return 0.0;
    }
    let d = 1.0 - p.gamma * p.gamma;
    if d <= 0.0 {
        f64::INFINITY
    } else {
        k2 / d
    }
}

/// `(J_φ, J_γ)` when the detectors depolarize the signal block with
/// probability `p.dark_count`.
pub fn closed_j_dark(p: &StellarQfiParams) -> (f64, f64) {
    let (n, k2, g, q) = (p.n_branches as f64, p.kappa * p.kappa, p.gamma, p.dark_count);
    if k2 == 0.0 || q == 1.0 {
        return (0.0, 0.0);
    }
    let k4 = k2 * k2;
    let j_phi = g * g * k4 * n * (1.0 - q).powi(2) / (1.0 - k2 * (n - 1.0) * (q - 1.0) + n * q - q);
    let denom = g * g * n * n / (k2 * (n - 1.0) * (q - 1.0) - n * q + q - 1.0)
        + ((n - 1.0) * q + 1.0) / (k4 * (q - 1.0).powi(2))
        + (1.0 - n) / (k2 * (q - 1.0));
    (j_phi, n / denom)
}

/// `N → ∞` limits of [`closed_j_dark`].
pub fn closed_j_dark_limit(p: &StellarQfiParams) -> (f64, f64) {
    let (k2, g, q) = (p.kappa * p.kappa, p.gamma, p.dark_count);
    if q == 0.0 {
        return (closed_j_phi_limit(p), closed_j_gamma_limit(p));
    }
    if k2 == 0.0 || q == 1.0 {
        return (0.0, 0.0);
    }
    let k4 = k2 * k2;
    let j_phi = g * g * k4 * (1.0 - q).powi(2) / (k2 + (1.0 - k2) * q);
    let j_gamma = k4 * (q - 1.0).powi(2) * (k2 * (q - 1.0) - q)
        / (-q * q + (g * g - 1.0) * k4 * (q - 1.0).powi(2) + 2.0 * k2 * (q - 1.0) * q);
    (j_phi, j_gamma)
}
