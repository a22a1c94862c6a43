//! Error filtration of a dual-rail single photon `(|10⟩ + |01⟩)/√2`.
//!
//! *Single rail*: only the `B` line is noisy. It is spread over `N` lines
//! (`B_0` plus `N−1` vacuum ancillae) by an encoder, each line dephases
//! independently, a decoder recombines them and the ancillae are
//! post-selected on vacuum.
//!
//! *Symmetric*: both `A` and `B` are noisy and each gets its own
//! encoder/decoder pair with `N−1` ancillae.
//!
//! Every protocol run carries both the simulated figures and the closed-form
//! values, so each run is a cross-check of the other.

use rayon::prelude::*;

use crate::error::invalid;
use crate::fock1::{ModeChannelSpec, PhotonSectorState};
use crate::interferometers::{InterferometerKind, InterferometerMatrix};
use crate::phase_noise::{kappa as kappa_of, stream_rng, Kappa, PhaseDistribution, BATCH};
use crate::{CMatrix, Error, Result, C64};

/// `F_N = ½(1 + 2N Re κ / (1 + N + (N−1)|κ|²))`.
pub fn closed_fidelity_single_rail(n: usize, kappa: Kappa) -> f64 {
    closed_fidelity_lossy(n, kappa, 1.0)
}

/// `F_∞ = ½(1 + 2 Re κ / (1 + |κ|²))`.
pub fn closed_fidelity_single_rail_limit(kappa: Kappa) -> f64 {
    0.5 * (1.0 + 2.0 * kappa.re() / (1.0 + kappa.modulus_sq()))
}

/// `P_N = ½(1 + (1 + (N−1)|κ|²)/N)`.
pub fn closed_probability_single_rail(n: usize, kappa: Kappa) -> f64 {
    closed_probability_lossy(n, kappa, 1.0)
}

/// `P_∞ = (1 + |κ|²)/2`.
pub fn closed_probability_single_rail_limit(kappa: Kappa) -> f64 {
    0.5 * (1.0 + kappa.modulus_sq())
}

/// Symmetric-case `(F_N, P_N)`.
pub fn closed_symmetric(n: usize, kappa: Kappa) -> (f64, f64) {
    let n = n as f64;
    let k2 = kappa.modulus_sq();
    let f = 0.5 * (1.0 + n * k2 / (1.0 + (n - 1.0) * k2));
    let p = k2 + (1.0 - k2) / n;
    (f, p)
}

/// Symmetric-case limits: `F_∞ = 1` (½ when κ = 0) and `P_∞ = |κ|²`.
pub fn closed_symmetric_limit(kappa: Kappa) -> (f64, f64) {
    let k2 = kappa.modulus_sq();
    let f = if k2 > 0.0 { 1.0 } else { 0.5 };
    (f, k2)
}

/// Fidelity with transmissivity `η` on every noisy line, conditioned on the
/// photon not being lost: `½(1 + 2N√η Re κ / (η + N + η(N−1)|κ|²))`.
pub fn closed_fidelity_lossy(n: usize, kappa: Kappa, eta: f64) -> f64 {
    0.5 * (1.0 + filtered_overlap(n, kappa, eta))
}

/// Probability that the photon survives and exits in a signal port:
/// `½(1 + η(1 + (N−1)|κ|²)/N)`.
pub fn closed_probability_lossy(n: usize, kappa: Kappa, eta: f64) -> f64 {
    let n = n as f64;
    0.5 * (1.0 + eta * (1.0 + (n - 1.0) * kappa.modulus_sq()) / n)
}

fn filtered_overlap(n: usize, kappa: Kappa, eta: f64) -> f64 {
    let n = n as f64;
    2.0 * n * eta.sqrt() * kappa.re() / (eta + n + eta * (n - 1.0) * kappa.modulus_sq())
}

/// Whether filtration through a lossy (`η`), noisier (`κ̃`) interferometer
/// still beats sending the photon unfiltered through a `κ` channel.
pub fn benefit_condition(n: usize, eta: f64, kappa_tilde: Kappa, kappa: Kappa) -> bool {
    filtered_overlap(n, kappa_tilde, eta) > kappa.re()
}

/// Where the phase noise comes from in a protocol run.
#[derive(Debug, Clone, PartialEq)]
pub enum Noise {
    /// Channel averaged exactly through κ.
    Exact(Kappa),
    /// Phases drawn per shot and the output averaged.
    Sampled { dist: PhaseDistribution, shots: usize, seed: u64 },
}

impl Noise {
    pub fn kappa(&self) -> Result<Kappa> {
        match self {
            Noise::Exact(k) => Ok(*k),
            Noise::Sampled { dist, .. } => kappa_of(dist),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub n_branches: usize,
    pub noise: Noise,
    /// Noise on both `A` and `B` (otherwise `B` only).
    pub symmetric: bool,
    pub eta: f64,
    pub interferometer: InterferometerKind,
}

impl ProtocolConfig {
    pub fn exact(n_branches: usize, kappa: Kappa) -> Self {
        Self {
            n_branches,
            noise: Noise::Exact(kappa),
            symmetric: false,
            eta: 1.0,
            interferometer: InterferometerKind::Fourier,
        }
    }

    pub fn with_interferometer(mut self, kind: InterferometerKind) -> Self {
        self.interferometer = kind;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn symmetric(mut self) -> Self {
        self.symmetric = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_branches == 0 {
            return invalid("n_branches must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return invalid(format!("eta {} outside [0, 1]", self.eta));
        }
        if let Noise::Sampled { dist, shots, .. } = &self.noise {
            dist.validate()?;
            if *shots == 0 {
                return invalid("sampled noise needs at least one shot");
            }
        }
        if let InterferometerKind::Perturbed { sigma_r, .. } = self.interferometer {
            if !sigma_r.is_finite() || sigma_r < 0.0 {
                return invalid(format!("sigma_r {sigma_r} must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// Outcome of one protocol run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolReport {
    pub fidelity: f64,
    pub probability: f64,
    /// Unnormalized post-selected state over (vacuum, `A_0`, `B_0`).
    pub state: PhotonSectorState,
    pub closed_fidelity: Option<f64>,
    pub closed_probability: Option<f64>,
    /// `max(|F − F_closed|, |P − P_closed|)` when closed forms apply.
    pub discrepancy: Option<f64>,
    /// Monte Carlo standard errors of `(fidelity, probability)`.
    pub standard_error: Option<(f64, f64)>,
}

/// Logical state `(|A_0⟩ + |B_0⟩)/√2` over (vacuum, `A_0`, `B_0`).
pub fn logical_state() -> [C64; 3] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [C64::new(0.0, 0.0), C64::new(h, 0.0), C64::new(h, 0.0)]
}

pub fn run_single_rail(config: &ProtocolConfig) -> Result<ProtocolReport> {
    let mut c = config.clone();
    c.symmetric = false;
    run(&c)
}

pub fn run_symmetric(config: &ProtocolConfig) -> Result<ProtocolReport> {
    let mut c = config.clone();
    c.symmetric = true;
    run(&c)
}

/// Runs the protocol selected by `config.symmetric`.
pub fn run(config: &ProtocolConfig) -> Result<ProtocolReport> {
    config.validate()?;
    let layout = Layout::new(config)?;
    let (fidelity, probability, state, standard_error) = match &config.noise {
        Noise::Exact(k) => {
            let (f, p, s) = layout.exact(*k, config.eta)?;
            (f, p, s, None)
        }
        Noise::Sampled { dist, shots, seed } => {
            let (f, p, s, se) = layout.sampled(dist, *shots, *seed, config.eta)?;
            (f, p, s, Some(se))
        }
    };

    let closed = closed_forms(config)?;
    let (closed_fidelity, closed_probability) = match closed {
        Some((f, p)) => (Some(f), Some(p)),
        None => (None, None),
    };
    let discrepancy = closed.map(|(f, p)| (fidelity - f).abs().max((probability - p).abs()));
    Ok(ProtocolReport {
        fidelity,
        probability,
        state,
        closed_fidelity,
        closed_probability,
        discrepancy,
        standard_error,
    })
}

fn closed_forms(config: &ProtocolConfig) -> Result<Option<(f64, f64)>> {
    if matches!(config.interferometer, InterferometerKind::Perturbed { .. }) {
        return Ok(None);
    }
    let k = config.noise.kappa()?;
    let n = config.n_branches;
    Ok(if config.symmetric {
        (config.eta == 1.0).then(|| closed_symmetric(n, k))
    } else {
        Some((closed_fidelity_lossy(n, k, config.eta), closed_probability_lossy(n, k, config.eta)))
    })
}

/// Mode bookkeeping. Branch `A` occupies modes `1..=n_a`, branch `B` the
/// following `n`; the first mode of each branch is the signal mode.
struct Layout {
    n: usize,
    symmetric: bool,
    a: Branch,
    b: Branch,
}

struct Branch {
    modes: Vec<usize>,
    devices: Option<(InterferometerMatrix, InterferometerMatrix)>,
}

impl Layout {
    fn new(config: &ProtocolConfig) -> Result<Self> {
        let n = config.n_branches;
        let n_a = if config.symmetric { n } else { 1 };
        let kind = config.interferometer;
        let a = Branch {
            modes: (1..=n_a).collect(),
            devices: if config.symmetric { Some(kind.encoder_decoder(n, 0)?) } else { None },
        };
        let b = Branch {
            modes: (n_a + 1..=n_a + n).collect(),
            devices: Some(kind.encoder_decoder(n, 1)?),
        };
        Ok(Self { n, symmetric: config.symmetric, a, b })
    }

    fn total_modes(&self) -> usize {
        self.a.modes.len() + self.b.modes.len()
    }

    fn noisy_modes(&self) -> impl Iterator<Item = usize> + '_ {
        let a = if self.symmetric { &self.a.modes[..] } else { &[][..] };
        a.iter().chain(&self.b.modes).copied()
    }

    fn ancillae(&self) -> Vec<usize> {
        self.a.modes[1..].iter().chain(&self.b.modes[1..]).copied().collect()
    }

    fn exact(&self, kappa: Kappa, eta: f64) -> Result<(f64, f64, PhotonSectorState)> {
        let m = self.total_modes();
        let mut amps = vec![C64::new(0.0, 0.0); m + 1];
        let reference = logical_state();
        amps[self.a.modes[0]] = reference[1];
        amps[self.b.modes[0]] = reference[2];
        let mut state = PhotonSectorState::pure(&amps)?;

        for br in [&self.a, &self.b] {
            if let Some((enc, _)) = &br.devices {
                state = state.apply_interferometer(enc, &br.modes)?;
            }
        }
        let mut spec = ModeChannelSpec::noiseless(m);
        for mode in self.noisy_modes() {
            spec = spec.with_dephasing(mode, kappa)?.with_transmissivity(mode, eta)?;
        }
        state = state.apply_dephasing(&spec)?.apply_loss(&spec)?;
        for br in [&self.a, &self.b] {
            if let Some((_, dec)) = &br.devices {
                state = state.apply_interferometer(dec, &br.modes)?;
            }
        }
        let (kept, _) = state.postselect_vacuum(&self.ancillae())?;
        let kept = kept.condition_on_photon();
        let probability = kept.trace();
        let fidelity = kept.fidelity(&reference)?;
        Ok((fidelity, probability, kept))
    }

    /// Transfer amplitude `Σ_k D_{0k} e^{iθ_k} U_{k0}` of one branch.
    fn branch_gain(devices: &(InterferometerMatrix, InterferometerMatrix), phases: &[f64]) -> C64 {
        let (enc, dec) = devices;
        let (u, d) = (enc.matrix(), dec.matrix());
        phases
            .iter()
            .enumerate()
            .map(|(k, t)| d[(0, k)] * u[(k, 0)] * C64::from_polar(1.0, *t))
            .sum()
    }

    fn sampled(
        &self,
        dist: &PhaseDistribution,
        shots: usize,
        seed: u64,
        eta: f64,
    ) -> Result<(f64, f64, PhotonSectorState, (f64, f64))> {
        let sampler = dist.sampler()?;
        let reference = logical_state();
        let loss_amp = eta.sqrt();
        let n = self.n;
        let batches = shots.div_ceil(BATCH);
        let partials: Vec<Moments> = (0..batches)
            .into_par_iter()
            .map(|bi| {
                let len = BATCH.min(shots - bi * BATCH);
                let mut rng = stream_rng(seed, bi as u64);
                let mut acc = Moments::default();
                let mut phases = vec![0.0; n];
                for _ in 0..len {
                    let a = match &self.a.devices {
                        Some(dev) if self.symmetric => {
                            phases.iter_mut().for_each(|p| *p = sampler.draw(&mut rng));
                            Self::branch_gain(dev, &phases) * loss_amp
                        }
                        _ => C64::new(1.0, 0.0),
                    } * reference[1];
                    phases.iter_mut().for_each(|p| *p = sampler.draw(&mut rng));
                    let b = Self::branch_gain(self.b.devices.as_ref().expect("B branch is always encoded"), &phases)
                        * loss_amp
                        * reference[2];
                    acc.push(a, b, reference[1].conj() * a + reference[2].conj() * b);
                }
                acc
            })
            .collect();
        let total = partials.into_iter().fold(Moments::default(), Moments::merge);
        total.finish()
    }
}

/// Running sums for the ratio estimator `F = E[n]/E[d]` and `P = E[d]`.
#[derive(Default)]
struct Moments {
    count: f64,
    n: f64,
    d: f64,
    nn: f64,
    dd: f64,
    nd: f64,
    rho: [[C64; 2]; 2],
}

impl Moments {
    fn push(&mut self, a: C64, b: C64, overlap: C64) {
        let num = overlap.norm_sqr();
        let den = a.norm_sqr() + b.norm_sqr();
        self.count += 1.0;
        self.n += num;
        self.d += den;
        self.nn += num * num;
        self.dd += den * den;
        self.nd += num * den;
        let v = [a, b];
        for i in 0..2 {
            for j in 0..2 {
                self.rho[i][j] += v[i] * v[j].conj();
            }
        }
    }

    fn merge(mut self, o: Moments) -> Moments {
        self.count += o.count;
        self.n += o.n;
        self.d += o.d;
        self.nn += o.nn;
        self.dd += o.dd;
        self.nd += o.nd;
        for i in 0..2 {
            for j in 0..2 {
                self.rho[i][j] += o.rho[i][j];
            }
        }
        self
    }

    fn finish(self) -> Result<(f64, f64, PhotonSectorState, (f64, f64))> {
        let c = self.count;
        let (en, ed) = (self.n / c, self.d / c);
        if ed <= 0.0 {
            return Err(Error::UndefinedFidelity);
        }
        let f = en / ed;
        let var_d = (self.dd / c - ed * ed).max(0.0);
        // delta method for the ratio: residual (n − F d)/E[d]
        let var_r = (self.nn / c - 2.0 * f * self.nd / c + f * f * self.dd / c).max(0.0) / (ed * ed);
        let se = ((var_r / c).sqrt(), (var_d / c).sqrt());
        let mut m = CMatrix::zeros(3, 3);
        for i in 0..2 {
            for j in 0..2 {
                m[(i + 1, j + 1)] = self.rho[i][j] / c;
            }
        }
        let state = PhotonSectorState::from_matrix(m)?;
        Ok((f, ed, state, se))
    }
}
