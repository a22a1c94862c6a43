//! Acceptance criteria, one PASS/FAIL line each. Reference values are
//! computed here from their own formulas, independently of the library's
//! closed-form functions.

use std::path::Path;
use std::process::Command as Process;

use errfilt::coherent::{self, CoherentConfig, CoherentMethod};
use errfilt::filtration::{self, benefit_condition, Noise, ProtocolConfig};
use errfilt::fock1::{ModeChannelSpec, PhotonSectorState};
use errfilt::interferometers::{
    compose, even_splitter, fourier, inverse_fourier, perturbed_even_splitter, InterferometerKind,
    InterferometerMatrix, TwoModeSplitter,
};
use errfilt::phase_noise::{Kappa, PhaseDistribution};
use errfilt::qfi::{
    closed_j_dark, closed_j_gamma, closed_j_gamma_limit, closed_j_phi, closed_j_phi_limit, qfi_scalar, sld,
    StellarQfiParams, DEFAULT_CUTOFF,
};
use errfilt::stellar::{self, ImperfectionStudy, SignalBlock, StellarScenario};
use errfilt::{CMatrix, C64};
use nalgebra::{DMatrix, Matrix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const KAPPAS: [f64; 11] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

fn k(x: f64) -> Kappa {
    Kappa::real(x).unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---- oracles -------------------------------------------------------------

fn f_single(n: f64, k: f64) -> f64 {
    0.5 * (1.0 + 2.0 * n * k / (1.0 + n + (n - 1.0) * k * k))
}

fn p_single(n: f64, k: f64) -> f64 {
    0.5 * (1.0 + (1.0 + (n - 1.0) * k * k) / n)
}

fn f_sym(n: f64, k: f64) -> f64 {
    0.5 * (1.0 + n * k * k / (1.0 + (n - 1.0) * k * k))
}

fn p_sym(n: f64, k: f64) -> f64 {
    k * k + (1.0 - k * k) / n
}

fn j_phi_oracle(n: f64, k: f64, g: f64) -> f64 {
    g * g * k.powi(4) * n / (k * k * (n - 1.0) + 1.0)
}

fn j_gamma_oracle(n: f64, k: f64, g: f64) -> f64 {
    let k2 = k * k;
    0.5 * k2 * k2 * n * (1.0 / (k2 * (n - g * n - 1.0) + 1.0) + 1.0 / (k2 * (g * n + n - 1.0) + 1.0))
}

fn j_phi_dep_oracle(n: f64, k: f64, g: f64, p: f64) -> f64 {
    let k2 = k * k;
    g * g * k2 * k2 * n * (1.0 - p).powi(2) / (1.0 - k2 * (n - 1.0) * (p - 1.0) + n * p - p)
}

fn j_gamma_dep_oracle(n: f64, k: f64, g: f64, p: f64) -> f64 {
    let k2 = k * k;
    n / (g * g * n * n / (k2 * (n - 1.0) * (p - 1.0) - n * p + p - 1.0)
        + ((n - 1.0) * p + 1.0) / (k2 * k2 * (p - 1.0).powi(2))
        + (1.0 - n) / (k2 * (p - 1.0)))
}

/// B₄ written out entry by entry.
fn b4() -> CMatrix {
    let s3 = 3f64.sqrt();
    let rows = [
        [0.5, s3 / 2.0, 0.0, 0.0],
        [0.5, -1.0 / (2.0 * s3), (2.0f64 / 3.0).sqrt(), 0.0],
        [0.5, -1.0 / (2.0 * s3), -1.0 / 6f64.sqrt(), 1.0 / 2f64.sqrt()],
        [0.5, -1.0 / (2.0 * s3), -1.0 / 6f64.sqrt(), -1.0 / 2f64.sqrt()],
    ];
    DMatrix::from_fn(4, 4, |i, j| C64::new(rows[i][j], 0.0))
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

// ---- criteria ------------------------------------------------------------

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [1usize, 2, 3, 4, 8, 10, 16] {
        let nf = n as f64;
        for x in KAPPAS {
            let single = filtration::run_single_rail(&ProtocolConfig::exact(n, k(x))).map_err(|e| e.to_string())?;
            let sym = filtration::run_symmetric(&ProtocolConfig::exact(n, k(x))).map_err(|e| e.to_string())?;
            for d in [
                single.fidelity - f_single(nf, x),
                single.probability - p_single(nf, x),
                sym.fidelity - f_sym(nf, x),
                sym.probability - p_sym(nf, x),
            ] {
                worst = worst.max(d.abs());
            }
        }
    }
    ensure(worst <= 1e-10, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.2e} over 154 single-rail and symmetric runs"))
}

fn criterion_2() -> Outcome {
    let r10 = filtration::run_symmetric(&ProtocolConfig::exact(10, k(0.8))).map_err(|e| e.to_string())?;
    let r1 = filtration::run_symmetric(&ProtocolConfig::exact(1, k(0.8))).map_err(|e| e.to_string())?;
    ensure((r10.fidelity - 0.9734).abs() <= 1e-4, || format!("F_10 = {}", r10.fidelity))?;
    ensure((r10.probability - 0.676).abs() <= 1e-4, || format!("P_10 = {}", r10.probability))?;
    ensure((r1.fidelity - 0.82).abs() <= 1e-4, || format!("F_1 = {}", r1.fidelity))?;
    Ok(format!("F_10 = {:.5}, P_10 = {:.5}, F_1 = {:.5}", r10.fidelity, r10.probability, r1.fidelity))
}

fn criterion_3() -> Outcome {
    let direct = max_abs(&(even_splitter(4).map_err(|e| e.to_string())?.matrix() - b4()));
    let splitters = [
        TwoModeSplitter::new(0, 0.5).unwrap(),
        TwoModeSplitter::new(1, 1.0 / 3f64.sqrt()).unwrap(),
        TwoModeSplitter::new(2, 1.0 / 2f64.sqrt()).unwrap(),
    ];
    let cascade = max_abs(&(compose(&splitters, 4).map_err(|e| e.to_string())?.matrix() - b4()));
    ensure(direct <= 1e-14 && cascade <= 1e-14, || format!("errors {direct:e}, {cascade:e}"))?;
    Ok(format!("even_splitter error {direct:.1e}, R3 R2 R1 error {cascade:.1e}"))
}

fn criterion_4() -> Outcome {
    let mut worst: f64 = 0.0;
    let even = InterferometerKind::EvenSplitter;
    for n in 1..=8 {
        for x in KAPPAS {
            let cfg = ProtocolConfig::exact(n, k(x));
            let a = filtration::run(&cfg).map_err(|e| e.to_string())?;
            let b = filtration::run(&cfg.clone().with_interferometer(even)).map_err(|e| e.to_string())?;
            worst = worst.max((a.fidelity - b.fidelity).abs()).max((a.probability - b.probability).abs());
            for g in [0.5, 0.8, 0.95] {
                let p = StellarQfiParams::new(n, x, g);
                let qa = stellar::stellar_qfi(&StellarScenario::ideal(p)).map_err(|e| e.to_string())?;
                let qb = stellar::stellar_qfi(&StellarScenario::ideal(p).with_interferometer(even))
                    .map_err(|e| e.to_string())?;
                worst = worst.max((qa.j_phi() - qb.j_phi()).abs()).max((qa.j_gamma() - qb.j_gamma()).abs());
            }
        }
    }
    ensure(worst <= 1e-10, || format!("max difference {worst:e}"))?;
    Ok(format!("max Fourier/even-splitter difference {worst:.2e} in F, P, J_phi, J_gamma"))
}

fn criterion_5() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [1usize, 2, 4, 10] {
        let nf = n as f64;
        for x in &KAPPAS[1..] {
            for g in [0.0, 0.5, 0.8, 0.95, 1.0] {
                let p = StellarQfiParams::new(n, *x, g).with_phi(0.37);
                let q = stellar::stellar_qfi(&StellarScenario::ideal(p)).map_err(|e| e.to_string())?;
                // N = 1 and N = 2 in their expanded forms
                let (want_phi, want_gamma) = match n {
                    1 => (g * g * x.powi(4), x.powi(4) / (1.0 - g * g * x.powi(4))),
                    2 => {
                        let (k2, k4) = (x * x, x.powi(4));
                        (2.0 * g * g * k4 / (1.0 + k2), 2.0 * (k4 * k2 + k4) / ((1.0 - 4.0 * g * g) * k4 + 2.0 * k2 + 1.0))
                    }
                    _ => (j_phi_oracle(nf, *x, g), j_gamma_oracle(nf, *x, g)),
                };
                worst = worst.max((q.j_phi() - want_phi).abs());
                if g < 1.0 {
                    worst = worst.max((q.j_gamma() - want_gamma).abs());
                }
                let lim_phi = closed_j_phi_limit(&p);
                ensure(lim_phi == g * g * x * x, || format!("J_phi limit {lim_phi} at kappa={x}, gamma={g}"))?;
                let lim_gamma = closed_j_gamma_limit(&p);
                let want = if g < 1.0 { x * x / (1.0 - g * g) } else { f64::INFINITY };
                ensure(lim_gamma == want, || format!("J_gamma limit {lim_gamma} vs {want}"))?;
            }
        }
    }
    ensure(worst <= 1e-8, || format!("max deviation {worst:e}"))?;
    Ok(format!("max |numeric - closed| = {worst:.2e}; limits exact"))
}

fn criterion_6() -> Outcome {
    let mut reduction: f64 = 0.0;
    for n in [1usize, 2, 4, 10] {
        for x in &KAPPAS[1..] {
            for g in [0.0, 0.5, 0.8, 0.95] {
                let p = StellarQfiParams::new(n, *x, g);
                let (a, b) = closed_j_dark(&p);
                reduction = reduction.max((a - closed_j_phi(&p)).abs()).max((b - closed_j_gamma(&p)).abs());
            }
        }
    }
    ensure(reduction <= 1e-14, || format!("p = 0 reduction error {reduction:e}"))?;

    let mut worst: f64 = 0.0;
    for n in [2usize, 10] {
        let nf = n as f64;
        for q in [0.001, 0.01, 0.1] {
            for x in &KAPPAS[1..] {
                for g in [0.5, 0.8, 0.95, 1.0] {
                    let p = StellarQfiParams::new(n, *x, g).with_dark_count(q);
                    let s = StellarScenario::ideal(p);
                    let out = stellar::run_pipeline(&s).map_err(|e| e.to_string())?;
                    let block = stellar::block_qfi(&out.block, &p).map_err(|e| e.to_string())?;
                    let full = stellar::stellar_qfi(&s).map_err(|e| e.to_string())?;
                    let want_phi = j_phi_dep_oracle(nf, *x, g, q);
                    worst = worst.max((block.j_phi() - want_phi).abs()).max((full.j_phi() - want_phi).abs());
                    if g < 1.0 {
                        let want_gamma = j_gamma_dep_oracle(nf, *x, g, q);
                        worst = worst.max((block.j_gamma() - want_gamma).abs()).max((full.j_gamma() - want_gamma).abs());
                    }
                }
            }
        }
    }
    ensure(worst <= 1e-8, || format!("max deviation {worst:e}"))?;
    Ok(format!("p = 0 reduction {reduction:.1e}; dark-count QFI max deviation {worst:.2e}"))
}

fn criterion_7() -> Outcome {
    let sigma: f64 = 0.3;
    let kap = (-sigma * sigma / 2.0).exp();
    let mut notes = Vec::new();
    for n in [2usize, 4, 10] {
        let cfg = ProtocolConfig {
            noise: Noise::Sampled { dist: PhaseDistribution::gaussian(sigma).unwrap(), shots: 100_000, seed: 2024 },
            ..ProtocolConfig::exact(n, Kappa::ONE)
        };
        let r = filtration::run_single_rail(&cfg).map_err(|e| e.to_string())?;
        let (se, _) = r.standard_error.ok_or("missing standard error")?;
        let z = (r.fidelity - f_single(n as f64, kap)).abs() / se;
        ensure(z <= 3.0, || format!("N={n}: {z:.2} standard errors off"))?;
        notes.push(format!("N={n} {z:.2}se"));
    }

    let config = |method| CoherentConfig {
        alpha_sq: 200.0,
        n_branches: 1,
        dist: PhaseDistribution::gaussian(0.01).unwrap(),
        method,
    };
    let quad = coherent::fidelity(&config(CoherentMethod::Quadrature)).map_err(|e| e.to_string())?.value;
    let mc = coherent::fidelity(&config(CoherentMethod::MonteCarlo { samples: 100_000, seed: 7 })).map_err(|e| e.to_string())?;
    // Simpson's rule on the exact integrand over ±10σ
    let simpson = {
        let (s, a2, m) = (0.01f64, 200.0, 4000);
        let (lo, h) = (-10.0 * s, 20.0 * s / m as f64);
        (0..=m)
            .map(|i| {
                let t = lo + i as f64 * h;
                let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                let pdf = (-0.5 * (t / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
                w * pdf * (-2.0 * a2 * (1.0 - t.cos())).exp()
            })
            .sum::<f64>()
            * h
            / 3.0
    };
    let small_angle = 1.0 / (1.0f64 + 2.0 * 0.01 * 0.01 * 200.0).sqrt();
    ensure((quad - simpson).abs() <= 1e-9, || format!("quadrature {quad} vs Simpson {simpson}"))?;
    ensure((mc.value - quad).abs() <= 3.0 * mc.standard_error, || format!("MC {} vs quadrature {quad}", mc.value))?;
    ensure((quad - small_angle).abs() <= 2e-4, || format!("quadrature {quad} vs {small_angle}"))?;
    Ok(format!("single rail {}; coherent quad {quad:.6}, MC {:.6}, oracle {small_angle:.6}", notes.join(", "), mc.value))
}

fn criterion_8() -> Outcome {
    let kappas: Vec<f64> = (0..=10).map(|i| 0.5 + 0.05 * i as f64).map(|x: f64| x.min(1.0)).collect();
    let mut worst: f64 = 0.0;
    for g in [1.0, 0.95] {
        let rows = ImperfectionStudy::new(4, 0.02, 100, 8, g).run(&kappas).map_err(|e| e.to_string())?;
        for r in rows {
            let ideal_phi = j_phi_oracle(4.0, r.kappa, g);
            let dev = (r.mean_j_phi - ideal_phi).abs() / ideal_phi;
            worst = worst.max(dev);
            // at γ = κ = 1 the visibility QFI is infinite; only φ is compared there
            if g < 1.0 || r.kappa < 1.0 {
                let ideal_gamma = j_gamma_oracle(4.0, r.kappa, g);
                worst = worst.max((r.mean_j_gamma - ideal_gamma).abs() / ideal_gamma);
            }
        }
    }
    ensure(worst < 0.05, || format!("max relative deviation {worst:.4}"))?;
    Ok(format!("max relative deviation of the mean QFI {:.3}%", 100.0 * worst))
}

fn random_state(rng: &mut ChaCha8Rng, dim: usize, rank: usize) -> CMatrix {
    let a = DMatrix::from_fn(dim, rank, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let m = &a * a.adjoint();
    let t = m.trace();
    m / t
}

fn random_kappa(rng: &mut ChaCha8Rng) -> Kappa {
    Kappa::new(C64::from_polar(rng.random_range(0.0..1.0), rng.random_range(-3.0..3.0))).unwrap()
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);

    // unitarity
    let mut unit: f64 = 0.0;
    for n in 1..=16 {
        let mut mats: Vec<InterferometerMatrix> = vec![
            fourier(n).unwrap(),
            inverse_fourier(n).unwrap(),
            even_splitter(n).unwrap(),
            perturbed_even_splitter(n, 0.05, n as u64).unwrap(),
        ];
        let count = if n > 1 { 3 * n } else { 0 };
        let splitters: Vec<TwoModeSplitter> = (0..count)
            .map(|_| TwoModeSplitter::new(rng.random_range(0..n - 1), rng.random_range(0.0..1.0)).unwrap())
            .collect();
        mats.push(compose(&splitters, n).unwrap());
        mats.push(mats[3].inverse());
        for m in &mats {
            unit = unit.max(m.unitarity_error());
        }
    }
    ensure(unit <= 1e-12, || format!("unitarity error {unit:e}"))?;

    // channels on 500 random states
    let mut herm: f64 = 0.0;
    let mut trace: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    for i in 0..500 {
        let modes = 1 + i % 6;
        let dim = modes + 1;
        let rho = PhotonSectorState::from_matrix(random_state(&mut rng, dim, 1 + i % dim)).unwrap();
        let spec = ModeChannelSpec::new(
            (0..modes).map(|_| random_kappa(&mut rng)).collect(),
            (0..modes).map(|_| rng.random_range(0.0..=1.0)).collect(),
        )
        .unwrap();
        let u = perturbed_even_splitter(modes, 0.1, i as u64).unwrap();
        let all: Vec<usize> = (1..=modes).collect();
        let outputs = [
            rho.apply_dephasing(&spec).unwrap(),
            rho.apply_loss(&spec).unwrap(),
            rho.apply_interferometer(&u, &all).unwrap(),
        ];
        for out in &outputs {
            herm = herm.max(out.hermiticity_error());
            trace = trace.max((out.trace() - rho.trace()).abs());
            min_eig = min_eig.min(out.min_eigenvalue());
        }
        // dark counts on a normalized 2×2 block
        let b = random_state(&mut rng, 2, 1 + i % 2);
        let block = SignalBlock { matrix: Matrix2::from_fn(|r, c| b[(r, c)]) };
        let noisy = stellar::apply_dark_counts(&block, rng.random_range(0.0..=1.0)).unwrap();
        let nm = DMatrix::from_fn(2, 2, |r, c| noisy.matrix[(r, c)]);
        let st = PhotonSectorState::from_matrix(DMatrix::from_fn(3, 3, |r, c| if r > 0 && c > 0 { nm[(r - 1, c - 1)] } else { C64::new(0.0, 0.0) })).unwrap();
        herm = herm.max(st.hermiticity_error());
        trace = trace.max((noisy.probability() - 1.0).abs());
        min_eig = min_eig.min(st.min_eigenvalue());
    }
    ensure(herm <= 1e-12 && trace <= 1e-12 && min_eig >= -1e-10, || {
        format!("hermiticity {herm:e}, trace {trace:e}, min eigenvalue {min_eig:e}")
    })?;

    // monotonicity in N
    for i in 1..=9 {
        let x = i as f64 / 10.0;
        let mut prev: Option<(f64, f64, f64, f64)> = None;
        for n in 1..=32 {
            let s = filtration::run_single_rail(&ProtocolConfig::exact(n, k(x))).unwrap();
            let y = filtration::run_symmetric(&ProtocolConfig::exact(n, k(x))).unwrap();
            let cur = (s.fidelity, s.probability, y.fidelity, y.probability);
            if let Some(p) = prev {
                ensure(cur.0 > p.0 && cur.1 < p.1 && cur.2 > p.2 && cur.3 < p.3, || format!("not monotone at N={n}, kappa={x}"))?;
            }
            prev = Some(cur);
        }
    }

    // SLD residual
    let mut sld_res: f64 = 0.0;
    for _ in 0..200 {
        let rho = random_state(&mut rng, 4, 4);
        let b = DMatrix::from_fn(4, 4, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let mut d = &b + b.adjoint();
        let t = d.trace() / C64::new(4.0, 0.0);
        for j in 0..4 {
            d[(j, j)] -= t;
        }
        let l = sld(&rho, &d, DEFAULT_CUTOFF).unwrap();
        let back = (&rho * &l + &l * &rho) * C64::new(0.5, 0.0);
        sld_res = sld_res.max(max_abs(&(back - &d)));
        ensure(qfi_scalar(&rho, &d, DEFAULT_CUTOFF).unwrap() >= 0.0, || "negative QFI".into())?;
    }
    ensure(sld_res <= 1e-10, || format!("SLD residual {sld_res:e}"))?;

    // benefit condition
    for n in 2..=32 {
        for i in 1..100 {
            let x = k(i as f64 / 100.0);
            ensure(benefit_condition(n, 1.0, x, x), || format!("benefit fails at N={n}, kappa={}", x.re()))?;
        }
    }
    Ok(format!(
        "unitarity {unit:.1e}; channels herm {herm:.1e} trace {trace:.1e} min eig {min_eig:.1e}; SLD residual {sld_res:.1e}; monotone; benefit holds"
    ))
}

fn run_cli(args: &[&str], threads: usize, out: &Path) -> Result<Vec<u8>, String> {
    let status = Process::new(env!("CARGO_BIN_EXE_errfilt"))
        .args(args)
        .args(["--threads", &threads.to_string(), "--out"])
        .arg(out)
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.code() == Some(0), || format!("{args:?} exited with {status}"))?;
    std::fs::read(out).map_err(|e| e.to_string())
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("sweep.toml");
    std::fs::write(&config, "command = \"fidelity-single\"\nseed = 5\nn = [2, 4]\nsigma = \"0.1:0.3:0.1\"\nshots = 20000\n")
        .map_err(|e| e.to_string())?;
    let config = config.to_str().ok_or("non-utf8 temp path")?.to_string();
    let commands: Vec<Vec<&str>> = vec![
        vec!["fidelity-single", "--n", "1,2,10", "--kappa", "0:1:0.1", "--seed", "3"],
        vec!["fidelity-single", "--n", "3", "--sigma", "0.2,0.4", "--shots", "30000", "--seed", "3"],
        vec!["fidelity-symmetric", "--n", "1:4", "--kappa", "0:1:0.25", "--interferometer", "perturbed", "--seed", "11"],
        vec!["fidelity-lossy", "--n", "2,5", "--kappa", "0.5,0.9", "--eta", "0.3,1", "--seed", "3"],
        vec!["fidelity-coherent", "--n", "1,3", "--sigma", "0:0.1:0.05", "--method", "monte-carlo", "--samples", "20000", "--seed", "9"],
        vec!["qfi-stellar", "--n", "2,4", "--gamma", "0.8", "--kappa", "0.5:1:0.25", "--interferometer", "perturbed", "--seed", "4"],
        vec!["imperfection-study", "--runs", "12", "--kappa", "0.5,0.9", "--seed", "21"],
        vec!["dark-count-study", "--n", "2", "--gamma", "0.9", "--kappa", "0.3,0.8", "--p", "0,0.1", "--seed", "1"],
        vec!["validate", "--seed", "1"],
        vec!["figure", "qfi-gamma-0.95", "--seed", "1"],
        vec!["--config", &config],
    ];
    for args in &commands {
        let a = run_cli(args, 1, &dir.path().join("a.csv"))?;
        let b = run_cli(args, 1, &dir.path().join("b.csv"))?;
        let c = run_cli(args, 4, &dir.path().join("c.csv"))?;
        ensure(!a.is_empty() && a == b && a == c, || format!("output differs for {args:?}"))?;
    }
    Ok(format!("{} commands byte-identical across repeat runs and 1 vs 4 threads", commands.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("closed-form/simulation equivalence", criterion_1),
        ("quoted symmetric-case numbers", criterion_2),
        ("B4 reproduction", criterion_3),
        ("Fourier/even-splitter equivalence", criterion_4),
        ("QFI engine vs closed forms", criterion_5),
        ("dark-count formulas", criterion_6),
        ("Monte Carlo consistency", criterion_7),
        ("beam-splitter imperfection study", criterion_8),
        ("property suites", criterion_9),
        ("CLI reproducibility", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(msg) => println!("criterion {:>2} PASS  {name}: {msg} ({secs:.1}s)", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {msg} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
