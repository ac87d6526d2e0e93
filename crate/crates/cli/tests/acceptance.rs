//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#[path = "../../core/tests/common/lindblad.rs"]
mod lindblad;

use std::f64::consts::PI;
use std::fs;
use std::panic;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use lindblad::Lindblad;
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use resfluor::correlation::{fit_rabi_from_g2, g2, g2_trace, simulate_coincidences, RabiFitOptions};
use resfluor::estimation::{fit_extinction, fit_saturation_curves, ExtinctionFit, ExtinctionFitOptions};
use resfluor::measurement::{interference_dip_rate, simulate_counts, snr_of_detection, trial_seed};
use resfluor::physics::{
    coherent_emission_rate, incoherent_emission_rate, linewidth_from_lifetime, rabi_for_saturation,
    total_emission_rate, DriveParams, IncidentRate, MoleculeParams,
};
use resfluor::polarization::{qwp_series, separate_components, ExtinctionTriple, Geometry, SeparationOptions};
use resfluor::spectra::{extinction_spectrum, fpc_transmission, mollow_density, mollow_spectrum, ExtinctionModel, FpcParams};
use resfluor::trace::{linspace, logspace, SpectrumTrace};
use resfluor_cli::config::RunConfig;
use resfluor_cli::reproduce::{intrinsic_triple, noisy_qwp_series, FIG2_CONFIG, FIG3_CONFIG, FIG4_CONFIG, FIG6_CONFIG};
use resfluor_cli::simulate::{rate_trace, sweep_data, transmission};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn paper_molecule() -> MoleculeParams {
    MoleculeParams::new(16.4, 16.4, 590.0, 0.25, 0.3).unwrap()
}

fn trials_passing(n: u64, f: impl Fn(u64) -> bool + Sync) -> usize {
    (0..n).into_par_iter().filter(|&k| f(k)).count()
}

fn counts_trace(cfg: &RunConfig, seed: u64) -> SpectrumTrace {
    let t = transmission(cfg).unwrap();
    simulate_counts(&rate_trace(cfg, &t).unwrap(), &cfg.detector_params().unwrap(), seed).unwrap()
}

fn criterion_1() -> Outcome {
    let mut worst_sum: f64 = 0.0;
    for s in logspace(1e-3, 1e3, 2001) {
        let (c, i, t) = (
            coherent_emission_rate(s).unwrap(),
            incoherent_emission_rate(s).unwrap(),
            total_emission_rate(s).unwrap(),
        );
        worst_sum = worst_sum.max((c + i - t).abs());
    }
    // parabolic vertex in ln S around the best grid point, refined with shrinking steps
    let f = |x: f64| coherent_emission_rate(x.exp()).unwrap();
    let grid = linspace(-3.0 * 10f64.ln(), 3.0 * 10f64.ln(), 4001);
    let mut x = grid.iter().copied().max_by(|a, b| f(*a).total_cmp(&f(*b))).unwrap();
    let mut h = grid[1] - grid[0];
    for _ in 0..4 {
        let (fm, f0, fp) = (f(x - h), f(x), f(x + h));
        x += h * (fm - fp) / (2.0 * (fm - 2.0 * f0 + fp));
        h /= 10.0;
    }
    let s_max = x.exp();
    let peak = f(x);
    check(
        worst_sum < 1e-15 && (s_max - 1.0).abs() < 1e-9 && (peak - 0.25).abs() < 1e-15,
        format!(
            "max |coh+inc-total| = {worst_sum:.1e}; coherent maximum {peak:.15} at S = 1 {:+.1e}",
            s_max - 1.0
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (gamma0, gamma) in [(16.4, 17.0), (16.4, 16.4)] {
        let mol = MoleculeParams::new(gamma0, gamma, 590.0, 0.25, 0.3).unwrap();
        for s in [0.1, 1.0, 10.0] {
            let rabi = rabi_for_saturation(s, &mol, 0.0).unwrap();
            let drive = DriveParams::new(rabi, 0.0, PI / 2.0, IncidentRate::CountsPerSecond(1.0)).unwrap();
            let model = ExtinctionModel::from_peak_fractions(0.0, 0.1, PI / 2.0, mol, drive).unwrap();
            let want = gamma * (1.0 + s).sqrt();
            let trace = extinction_spectrum(&model, linspace(-6.0 * want, 6.0 * want, 601)).unwrap();
            let fit = fit_extinction(&trace, &ExtinctionFitOptions::default()).unwrap();
            let got = fit.result.value("gamma");
            let rel = (got / want - 1.0).abs();
            ok &= rel < 1e-3 && fit.result.converged();
            if gamma == gamma0 && s == 1.0 {
                ok &= (got / (2f64.sqrt() * gamma0) - 1.0).abs() < 1e-3;
                lines.push(format!("S=1, γ=γ0: {got:.4} vs √2γ0 = {:.4}", 2f64.sqrt() * gamma0));
            }
            lines.push(format!("γ={gamma} S={s}: rel {rel:.1e}"));
        }
    }
    check(ok, lines.join("; "))
}

fn criterion_3() -> Outcome {
    let gamma0 = linewidth_from_lifetime(9.7).unwrap();
    let (lo, hi) = (17.0, 20.0);
    let distance = if gamma0 < lo { (lo - gamma0) / lo } else if gamma0 > hi { (gamma0 - hi) / hi } else { 0.0 };
    check(
        (gamma0 - 16.4).abs() < 0.05 && distance < 0.25,
        format!("9.7 ns -> {gamma0:.3} MHz, {:.1}% below the 17-20 MHz band", distance * 100.0),
    )
}

fn criterion_4() -> Outcome {
    let mol = paper_molecule();
    let drive = DriveParams::resonant(0.0).unwrap();
    let grid = linspace(-50.0, 50.0, 1001);
    let extreme = |a: f64, b: f64| {
        let t = extinction_spectrum(&ExtinctionModel::from_peak_fractions(a, b, PI / 2.0, mol, drive).unwrap(), grid.clone())
            .unwrap();
        let at_zero = t.iter().min_by(|a, b| a.0.abs().total_cmp(&b.0.abs())).unwrap().1;
        let min = t.values().iter().copied().fold(f64::INFINITY, f64::min);
        (at_zero, min)
    };
    let (total, total_min) = extreme(0.08, 0.30);
    let (a_only, _) = extreme(0.08, 0.0);
    let (b_only, _) = extreme(0.0, 0.30);
    check(
        (1.0 - total - 0.22).abs() < 1e-12
            && total_min == total
            && (a_only - 1.08).abs() < 1e-12
            && (1.0 - b_only - 0.30).abs() < 1e-12,
        format!(
            "net dip {:.15}, A-term peak {:.15}, B-term dip {:.15}",
            1.0 - total,
            a_only - 1.0,
            1.0 - b_only
        ),
    )
}

fn criterion_5() -> Outcome {
    let mol = paper_molecule();
    let mut worst: f64 = 0.0;
    for ratio in [0.5, 2.0, 10.0, 30.0] {
        let rabi = ratio * mol.gamma;
        let lind = Lindblad::new(mol.gamma0, mol.gamma, rabi, 0.0);
        let steady = lind.steady_state();
        let reach = 1.5 * rabi + 5.0 * mol.gamma;
        let err = linspace(-reach, reach, 41)
            .par_iter()
            .map(|&nu| {
                let want = lind.mollow_density(&steady, nu);
                ((mollow_density(&mol, rabi, nu, 1.0) - want) / want).abs()
            })
            .reduce(|| 0.0, f64::max);
        worst = worst.max(err);
    }
    let mut sideband_err: f64 = 0.0;
    for ratio in [10.0, 20.0, 30.0] {
        let rabi = ratio * mol.gamma;
        let trace = mollow_spectrum(&mol, &DriveParams::resonant(rabi).unwrap(), linspace(0.5 * rabi, 1.5 * rabi, 20001), 1.0)
            .unwrap();
        let peak = trace.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        let mirror = trace.values()[0];
        let lower = mollow_density(&mol, rabi, -peak, 1.0);
        sideband_err = sideband_err.max((peak / rabi - 1.0).abs());
        if !(lower > mirror) {
            return Err(format!("Ω/γ={ratio}: lower sideband missing"));
        }
    }
    check(
        worst < 1e-6 && sideband_err < 0.01,
        format!("max relative deviation from master equation {worst:.1e}; sidebands off ±Ω by at most {:.3}%", sideband_err * 100.0),
    )
}

fn criterion_6() -> Outcome {
    let mol = paper_molecule();
    let taus = linspace(0.0, 100.0, 501);
    let mut oracle_err: f64 = 0.0;
    let mut g0: f64 = 0.0;
    for rabi in [0.5, 5.0, 16.4, 50.0, 150.0] {
        let want = Lindblad::new(mol.gamma0, mol.gamma, rabi, 0.0).g2(&taus);
        let drive = DriveParams::resonant(rabi).unwrap();
        for (&tau, w) in taus.iter().zip(&want) {
            oracle_err = oracle_err.max((g2(tau, &mol, &drive).unwrap() - w).abs());
        }
        g0 = g0.max(g2(0.0, &mol, &drive).unwrap().abs());
    }
    let mut round_trip: f64 = 0.0;
    for rabi in [5.0, 20.0, 50.0, 100.0, 150.0] {
        let trace = g2_trace(&mol, &DriveParams::resonant(rabi).unwrap(), taus.clone()).unwrap();
        let fit = fit_rabi_from_g2(&trace, &mol, &RabiFitOptions::default()).unwrap();
        round_trip = round_trip.max((fit.rabi / rabi - 1.0).abs());
    }
    let rabi = 50.0;
    let ideal = g2_trace(&mol, &DriveParams::resonant(rabi).unwrap(), taus.clone()).unwrap();
    let passed = trials_passing(200, |k| {
        let noisy = simulate_coincidences(&ideal, 1e4, trial_seed(6, k)).unwrap();
        fit_rabi_from_g2(&noisy, &mol, &RabiFitOptions::default())
            .map(|f| (f.rabi / rabi - 1.0).abs() < 0.05)
            .unwrap_or(false)
    });
    check(
        oracle_err < 1e-8 && g0 == 0.0 && round_trip < 1e-3 && passed >= 190,
        format!(
            "oracle {oracle_err:.1e}, g2(0) = {g0}, noiseless round trip {round_trip:.1e}, noisy within 5%: {passed}/200"
        ),
    )
}

fn criterion_7() -> Outcome {
    let fpc = FpcParams::new(356.0, 14.0, 0.15).unwrap();
    let peak = fpc_transmission(0.0, &fpc);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut period: f64 = 0.0;
    for _ in 0..1000 {
        let nu: f64 = rng.random_range(-178.0..178.0);
        let k = rng.random_range(-5..=5) as f64;
        period = period.max((fpc_transmission(nu + k * 356.0, &fpc) - fpc_transmission(nu, &fpc)).abs());
    }
    let step = 0.01;
    let grid = linspace(-178.0, 178.0, 35601);
    let above: Vec<f64> = grid.iter().copied().filter(|&nu| fpc_transmission(nu, &fpc) >= peak / 2.0).collect();
    let width = above.last().unwrap() - above.first().unwrap();
    check(
        (peak - 0.15).abs() < 1e-15 && period < 1e-12 && (width - 14.0).abs() <= 2.0 * step,
        format!("peak {peak}, periodicity error {period:.1e}, FWHM {width:.2} MHz on a {step} MHz grid"),
    )
}

fn dip_snr(fit: &ExtinctionFit, data: &SpectrumTrace) -> (f64, f64) {
    let base = fit.result.value("baseline");
    let ss: f64 = data.iter().map(|(d, v)| (v - base * fit.shape(d)).powi(2)).sum();
    let dof = data.len() - fit.result.names.len() + 1;
    (fit.dip_depth * base, (ss / dof as f64).sqrt())
}

fn criterion_8() -> Outcome {
    let cfg = RunConfig::parse(FIG6_CONFIG).unwrap();
    let budget = interference_dip_rate(550.0, 1.1, 1.0).unwrap();
    let det = cfg.detector_params().unwrap();
    let snr = snr_of_detection(50.0, 550.0, &det, 4.0).unwrap();
    let results: Vec<(f64, f64)> = (0..500u64)
        .into_par_iter()
        .map(|k| {
            let data = counts_trace(&cfg, trial_seed(8, k));
            dip_snr(&fit_extinction(&data, &ExtinctionFitOptions::default()).unwrap(), &data)
        })
        .collect();
    let mean_dip = results.iter().map(|r| r.0).sum::<f64>() / 500.0;
    let rms = (results.iter().map(|r| r.1 * r.1).sum::<f64>() / 500.0).sqrt();
    let mc = mean_dip / rms;
    check(
        (budget / 50.0 - 1.0).abs() < 0.05 && (snr - 3.8).abs() < 0.05 && (mc / snr - 1.0).abs() < 0.2,
        format!(
            "2√(550·1.1) = {budget:.2} cps vs 50 cps ({:+.1}%); SNR {snr:.3}; Monte Carlo {mean_dip:.1}/{rms:.1} = {mc:.3} ({:+.1}%)",
            (budget / 50.0 - 1.0) * 100.0,
            (mc / snr - 1.0) * 100.0
        ),
    )
}

fn criterion_9() -> Outcome {
    let cfg = RunConfig::parse(FIG2_CONFIG).unwrap();
    let noise = 1.0 / cfg.detector_params().unwrap().expected_counts(cfg.drive.incident_rate).sqrt();
    let passed = trials_passing(200, |k| {
        let data = counts_trace(&cfg, trial_seed(9, k));
        let fit = fit_extinction(&data, &ExtinctionFitOptions::default()).unwrap();
        (fit.dip_depth - 0.115).abs() <= 0.007 && (fit.result.value("gamma") / 17.0 - 1.0).abs() < 0.05
    });
    check(passed >= 190, format!("shot noise {:.3}%; dip and γ recovered in {passed}/200", noise * 100.0))
}

/// Outer product u·uᵀ for a real unit vector.
fn projector(u: [f64; 2]) -> [[C; 2]; 2] {
    [[C::from(u[0] * u[0]), C::from(u[0] * u[1])], [C::from(u[1] * u[0]), C::from(u[1] * u[1])]]
}

fn matmul(a: &[[C; 2]; 2], b: &[[C; 2]; 2]) -> [[C; 2]; 2] {
    let mut out = [[C::from(0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Quarter waveplate (fast axis at theta from y) then a polarizer leaking `leak`.
fn jones(theta: f64, polarizer: f64, leak: f64) -> [[C; 2]; 2] {
    let element = |angle: f64, cross: C| {
        let along = projector([angle.sin(), angle.cos()]);
        let across = projector([angle.cos(), -angle.sin()]);
        let mut m = along;
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] += across[i][j] * cross;
            }
        }
        m
    };
    matmul(&element(polarizer, C::from(leak.sqrt())), &element(theta, C::i()))
}

/// Detected intensity from the fields: laser plus coherent dipole field, plus incoherent power.
fn brute_force(geo: &Geometry, theta: f64, a0: f64, b0: f64, psi0: f64, gamma: f64, d: f64) -> f64 {
    let j = jones(theta, geo.polarizer_angle, geo.polarizer_leakage);
    let apply = |v: [f64; 2], s: C| [(j[0][0] * v[0] + j[0][1] * v[1]) * s, (j[1][0] * v[0] + j[1][1] * v[1]) * s];
    let laser = [geo.laser_angle.sin(), geo.laser_angle.cos()];
    let dipole = [geo.dipole_angle.sin(), geo.dipole_angle.cos()];
    let amplitude = -(b0 / 2.0) * C::from_polar(1.0, -psi0) / C::new(d, -gamma / 2.0);
    let e_l = apply(laser, C::from(1.0));
    let e_d = apply(dipole, amplitude);
    let coherent = (e_l[0] + e_d[0]).norm_sqr() + (e_l[1] + e_d[1]).norm_sqr();
    let l = 1.0 / (d * d + gamma * gamma / 4.0);
    let dipole_out = apply(dipole, C::from(1.0));
    let incoherent = (a0 - b0 * b0 / 4.0) * l * (dipole_out[0].norm_sqr() + dipole_out[1].norm_sqr());
    (coherent + incoherent) / (e_l[0].norm_sqr() + e_l[1].norm_sqr())
}

fn criterion_10() -> Outcome {
    let cfg = RunConfig::parse(FIG4_CONFIG).unwrap();
    let (truth, _) = intrinsic_triple(&cfg).unwrap();
    let geo = cfg.geometry();
    let outcomes: Vec<(bool, f64)> = (0..200u64)
        .into_par_iter()
        .map(|k| {
            let series = noisy_qwp_series(&cfg, trial_seed(10, k)).unwrap();
            match separate_components(&series, &geo, &SeparationOptions::default()) {
                Ok(sep) => {
                    let dpsi = (sep.psi0 - truth.psi).to_degrees().abs();
                    let ok = dpsi < 2.0 && (sep.a0 / truth.a - 1.0).abs() < 0.03 && (sep.b0 / truth.b - 1.0).abs() < 0.03;
                    (ok, dpsi)
                }
                Err(_) => (false, f64::INFINITY),
            }
        })
        .collect();
    let passed = outcomes.iter().filter(|o| o.0).count();

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    while cases < 1000 {
        let geo = Geometry {
            laser_angle: rng.random_range(-PI..PI),
            dipole_angle: rng.random_range(-PI..PI),
            polarizer_angle: rng.random_range(-PI..PI),
            polarizer_leakage: if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..0.05) },
        };
        let theta = rng.random_range(-PI..PI);
        let b0: f64 = rng.random_range(0.0..2.0);
        let a0 = b0 * b0 / 4.0 + rng.random_range(0.0..1.0);
        let psi0 = rng.random_range(-PI..PI);
        let gamma = rng.random_range(5.0..40.0);
        if geo.components(theta, a0, b0, psi0).laser_transmission < 1e-3 {
            continue;
        }
        cases += 1;
        let grid = linspace(-4.0 * gamma, 4.0 * gamma, 41);
        let truth = ExtinctionTriple { a: a0, b: b0, psi: psi0 };
        let (_, trace) = qwp_series(&geo, &[theta], truth, gamma, 0.0, &grid).unwrap().remove(0);
        for (d, v) in trace.iter() {
            let want = brute_force(&geo, theta, a0, b0, psi0, gamma, d);
            worst = worst.max((v - want).abs() / want.abs().max(1.0));
        }
    }
    check(
        passed >= 190 && worst < 1e-10,
        format!("ψ within 2° and A, B within 3%: {passed}/200; Jones brute force vs triple over {cases} cases: {worst:.1e}"),
    )
}

fn criterion_11() -> Outcome {
    let cfg = RunConfig::parse(FIG3_CONFIG).unwrap();
    let errors: Vec<f64> = (0..50u64)
        .into_par_iter()
        .map(|k| {
            let fit = fit_saturation_curves(&sweep_data(&cfg, trial_seed(11, k)).unwrap()).unwrap();
            (fit.p_sat / 350e-12 - 1.0).abs()
        })
        .collect();
    let worst = errors.iter().copied().fold(0.0, f64::max);
    check(
        cfg.sweep.p_min == 5e-12 && cfg.sweep.p_max == 1e-8 && worst < 0.03,
        format!("P_sat recovered in 50 noisy sweeps, worst error {:.2}%", worst * 100.0),
    )
}

fn criterion_12() -> Outcome {
    let tmp = tempfile::TempDir::new().unwrap();
    let dir = tmp.path();
    fs::write(
        dir.join("noisy.ini"),
        "[drive]\nrabi = 40\nincident_rate = 2e4\n\n[detector]\nnoise = true\n\n[g2]\ncoincidences = 300\njitter_ns = 0.4\n",
    )
    .unwrap();
    let runs: &[&[&str]] = &[
        &["--config", "noisy.ini", "simulate", "extinction"],
        &["--config", "noisy.ini", "simulate", "mollow"],
        &["--config", "noisy.ini", "simulate", "g2"],
        &["--config", "noisy.ini", "simulate", "saturation-sweep"],
        &["--config", "noisy.ini", "simulate", "counts"],
        &["reproduce", "fig2"],
        &["reproduce", "fig3"],
        &["reproduce", "fig4"],
        &["reproduce", "fig5"],
        &["reproduce", "fig6"],
    ];
    let mut compared = 0;
    for (i, args) in runs.iter().enumerate() {
        for threads in ["1", "8"] {
            let out = format!("t{threads}/{i}");
            let mut full = vec!["--seed", "12", "--threads", threads, "--out", out.as_str()];
            full.extend_from_slice(args);
            let o = Command::new(env!("CARGO_BIN_EXE_resfluor")).args(&full).current_dir(dir).output().unwrap();
            if !o.status.success() {
                return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&o.stderr)));
            }
        }
        compared += compare_trees(&dir.join(format!("t1/{i}")), &dir.join(format!("t8/{i}")))
            .map_err(|e| format!("{args:?}: {e}"))?;
    }
    Ok(format!("{} commands, {compared} files bit-identical across --threads 1 and 8", runs.len()))
}

fn compare_trees(a: &Path, b: &Path) -> Result<usize, String> {
    let mut n = 0;
    for entry in fs::read_dir(a).unwrap() {
        let path = entry.unwrap().path();
        let other = b.join(path.file_name().unwrap());
        if path.is_dir() {
            n += compare_trees(&path, &other)?;
        } else {
            if fs::read(&path).unwrap() != fs::read(&other).map_err(|e| format!("{}: {e}", other.display()))? {
                return Err(format!("{} differs", path.display()));
            }
            n += 1;
        }
    }
    if fs::read_dir(b).unwrap().count() != fs::read_dir(a).unwrap().count() {
        return Err(format!("{} and {} hold different files", a.display(), b.display()));
    }
    Ok(n)
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("coherent/total split", criterion_1),
        ("power broadening", criterion_2),
        ("lifetime consistency", criterion_3),
        ("Fig. 4c arithmetic", criterion_4),
        ("Mollow oracle", criterion_5),
        ("g2 oracle and Rabi round trip", criterion_6),
        ("Fabry-Perot analyzer", criterion_7),
        ("Fig. 6 photon budget", criterion_8),
        ("Fig. 2 regime", criterion_9),
        ("component separation", criterion_10),
        ("saturation sweep", criterion_11),
        ("determinism across threads", criterion_12),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {id:>2} {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id:>2} {name} ({secs:.1}s): {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
