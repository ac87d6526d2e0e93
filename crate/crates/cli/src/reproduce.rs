//! `resfluor reproduce <figN>`: synthetic analogs of the figure data series.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use resfluor::correlation::{fit_rabi_from_g2, g2_oscillation_frequency, saturation_annotation, RabiFitOptions};
use resfluor::estimation::{fit_extinction, fit_saturation_curves, ExtinctionFitOptions};
use resfluor::measurement::{interference_dip_rate, simulate_counts, trial_seed, RNG_NAME};
use resfluor::physics::{coherent_emission_rate, total_emission_rate, MoleculeParams};
use resfluor::polarization::{qwp_series, separate_components, ExtinctionTriple, SeparationOptions};
use resfluor::spectra::{fpc_transmission, power_broadened_fwhm, ExtinctionModel};
use resfluor::trace::{logspace, GridKind, Provenance, SpectrumTrace, ValueUnit};
use serde_json::json;

use crate::config::{DriveStrength, RunConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::{sha256_hex, Anchored, FileEntry, Manifest};
use crate::simulate::{budget, g2_series, mollow_traces, rate_trace, sideband_position, sweep_data, transmission};
use crate::table::{sweep_to_table, Table};
use crate::{Figure, Output};

pub const FIG2_CONFIG: &str = "\
# Extinction dip in the shot-noise regime
seed = 2

[drive]
rabi = 0
psi_deg = 90
incident_rate = 127551

[extinction]
a_peak = 0
b_peak = 0.115

[grid]
start = -100
stop = 100
points = 801

[detector]
dark_rate = 150
integration_time = 0.16
noise = true

[output]
format = csv
";

pub const FIG3_CONFIG: &str = "\
# Coherent and total emission versus incident power
seed = 3

[drive]
p_sat = 350e-12

[sweep]
p_min = 5e-12
p_max = 1e-8
points = 40
coherent_rate = 4e4
fluorescence_rate = 1e5
integration_time = 1

[detector]
noise = true

[output]
format = csv
";

pub const FIG4_CONFIG: &str = "\
# Waveplate series and component separation
seed = 4

[drive]
rabi = 0
psi_deg = 90
incident_rate = 1e5

[extinction]
a_peak = 0.02
b_peak = 0.10

[grid]
start = -60
stop = 60
points = 241

[detector]
dark_rate = 0
integration_time = 1
noise = true

[geometry]
laser_deg = 0
dipole_deg = 45
polarizer_deg = 80
qwp_deg = 0, 36, 72, 108, 144

[output]
format = csv
";

pub const FIG5_CONFIG: &str = "\
# Mollow triplet through the analyzer and g2 at increasing drive
seed = 5

[mollow]
start = -400
stop = 400
points = 1601
emission_rate = 2000
laser_background = 400

[detector]
integration_time = 3
noise = true

[g2]
delay_max_ns = 100
points = 501
coincidences = 2000

[output]
format = csv
";

pub const FIG6_CONFIG: &str = "\
# Extinction with an ultra-faint probe
seed = 6

[drive]
rabi = 0
psi_deg = 90
incident_rate = 550

[extinction]
a_peak = 0
b_peak = 0.09090909090909091

[grid]
start = -60
stop = 60
points = 61

[detector]
dark_rate = 150
integration_time = 4
noise = true

[output]
format = csv
";

/// Rabi frequencies (MHz) of the seven spectrum/g² pairs.
pub const FIG5_RABI: [f64; 7] = [35.0, 50.0, 65.0, 80.0, 100.0, 120.0, 150.0];
/// Rabi frequency (MHz) of the weak-drive antibunching trace.
pub const FIG5_WEAK_RABI: f64 = 3.0;

pub fn builtin_config(figure: Figure) -> &'static str {
    match figure {
        Figure::Fig2 => FIG2_CONFIG,
        Figure::Fig3 => FIG3_CONFIG,
        Figure::Fig4 => FIG4_CONFIG,
        Figure::Fig5 => FIG5_CONFIG,
        Figure::Fig6 => FIG6_CONFIG,
    }
}

struct Builder {
    out: Output,
    files: Vec<(String, String, String)>,
    anchored: BTreeMap<String, Anchored>,
    synthetic: BTreeMap<String, String>,
    summary: BTreeMap<String, f64>,
    lines: Vec<String>,
}

impl Builder {
    fn file(&mut self, name: &str, content: &str, panel: &str, description: &str) -> CliResult<()> {
        self.out.text(name, content)?;
        self.files.push((name.into(), panel.into(), description.into()));
        Ok(())
    }

    fn json(&mut self, name: &str, value: &serde_json::Value, panel: &str, description: &str) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).expect("json value serializes") + "\n";
        self.file(name, &text, panel, description)
    }

    fn anchor(&mut self, key: &str, value: f64, source: &str) {
        self.anchored.insert(
            key.into(),
            Anchored {
                value,
                source: source.into(),
            },
        );
    }

    fn synth(&mut self, key: &str, value: impl ToString) {
        self.synthetic.insert(key.into(), value.to_string());
    }
}

pub fn run(figure: Figure, seed: Option<u64>, dir: &Path) -> CliResult<Vec<String>> {
    let mut cfg = RunConfig::parse(builtin_config(figure)).map_err(CliError::Config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let mut b = Builder {
        out: Output::new(dir, cfg.output.format)?,
        files: Vec::new(),
        anchored: BTreeMap::new(),
        synthetic: BTreeMap::new(),
        summary: BTreeMap::new(),
        lines: Vec::new(),
    };
    let config_text = cfg.to_ini();
    b.out.text("config.ini", &config_text)?;
    match figure {
        Figure::Fig2 => fig2(&cfg, &mut b)?,
        Figure::Fig3 => fig3(&cfg, &mut b)?,
        Figure::Fig4 => fig4(&cfg, &mut b)?,
        Figure::Fig5 => fig5(&cfg, &mut b)?,
        Figure::Fig6 => fig6(&cfg, &mut b)?,
    }
    let digests: BTreeMap<String, String> = b.out.written.iter().cloned().collect();
    let manifest = Manifest {
        figure: figure.name().into(),
        tool: format!("resfluor {}", env!("CARGO_PKG_VERSION")),
        seed: cfg.seed,
        rng: RNG_NAME.into(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        files: b
            .files
            .iter()
            .map(|(path, panel, description)| FileEntry {
                path: path.clone(),
                panel: panel.clone(),
                description: description.clone(),
                sha256: digests[path].clone(),
            })
            .collect(),
        paper_anchored: b.anchored,
        synthetic: b.synthetic,
        summary: b.summary,
    };
    b.out.text("manifest.json", &(manifest.to_json() + "\n"))?;
    b.lines.push(format!(
        "{}: {} data files and manifest.json in {}",
        figure.name(),
        manifest.files.len(),
        dir.display()
    ));
    Ok(b.lines)
}

fn molecule_anchors(b: &mut Builder, mol: &MoleculeParams) {
    b.anchor("gamma0_MHz", mol.gamma0, "natural linewidth from the 9.7 ns excited-state lifetime");
    b.anchor("gamma_MHz", mol.gamma, "near lifetime-limited linewidths of 17-20 MHz");
    b.anchor("lambda_nm", mol.lambda_nm, "zero-phonon line of DBATT in n-tetradecane at about 590 nm");
}

fn fig2(cfg: &RunConfig, b: &mut Builder) -> CliResult<()> {
    let t = transmission(cfg)?;
    let counts = simulate_counts(&rate_trace(cfg, &t)?, &cfg.detector_params()?, cfg.seed)?;
    b.file("fig2_model.csv", &t.to_csv(), "Fig. 2", "noiseless transmission I_d/I_e")?;
    b.file("fig2_counts.csv", &counts.to_csv(), "Fig. 2", "photon counts per 160 ms pixel")?;
    let fit = fit_extinction(&counts, &ExtinctionFitOptions::default())?;
    b.json(
        "fig2_fit.json",
        &json!({
            "dip_depth": fit.dip_depth,
            "dip_depth_error": fit.dip_depth_error,
            "fit": serde_json::from_str::<serde_json::Value>(&fit.result.to_json()).expect("valid json"),
        }),
        "Fig. 2",
        "extinction fit to the counts",
    )?;
    let det = cfg.detector_params()?;
    let baseline = det.expected_counts(cfg.drive.incident_rate);
    molecule_anchors(b, &cfg.molecule);
    b.anchor("dip_depth", cfg.extinction.b_peak, "a dip of 11.5% in the transmission");
    b.anchor("integration_time_s", det.integration_time, "integration time per pixel of 160 ms");
    b.anchor("relative_noise", 0.007, "noise amounts to 0.7%, the shot-noise limit");
    b.synth("incident_rate_cps", format!("{} (sets 1/0.007^2 counts per pixel)", cfg.drive.incident_rate));
    b.synth("grid_MHz", format!("{} to {} in {} points", cfg.grid.start, cfg.grid.stop, cfg.grid.points));
    b.synth("psi_deg", cfg.drive.psi_deg);
    b.synth("rabi_MHz", "0 (weak excitation)");
    b.summary.insert("fitted_dip_depth".into(), fit.dip_depth);
    b.summary.insert("fitted_gamma_MHz".into(), fit.result.value("gamma"));
    b.summary.insert("shot_noise".into(), 1.0 / baseline.sqrt());
    b.lines.push(format!(
        "fig2: fitted dip {:.4} ± {:.4}, γ = {:.3} MHz, shot noise {:.4}",
        fit.dip_depth,
        fit.dip_depth_error,
        fit.result.value("gamma"),
        1.0 / baseline.sqrt()
    ));
    Ok(())
}

fn fig3(cfg: &RunConfig, b: &mut Builder) -> CliResult<()> {
    let p_sat = cfg.drive.p_sat;
    let powers = logspace(cfg.sweep.p_min, cfg.sweep.p_max, 200);
    let mut coherent = Table::new(&["power_W", "saturation", "coherent_fraction"]);
    let mut total = Table::new(&["power_W", "saturation", "total_fraction"]);
    for &p in &powers {
        let s = p / p_sat;
        coherent.rows.push(vec![p, s, coherent_emission_rate(s)?]);
        total.rows.push(vec![p, s, total_emission_rate(s)?]);
    }
    b.file("fig3_coherent.csv", &coherent.to_csv(), "Fig. 3 black curve", "S/(1+S)^2 versus power")?;
    b.file("fig3_fluorescence.csv", &total.to_csv(), "Fig. 3 red curve", "S/(1+S) versus power")?;
    let data = sweep_data(cfg, cfg.seed)?;
    let mut table = sweep_to_table(&data);
    table.meta.push(("seed".into(), cfg.seed.to_string()));
    b.file("fig3_sweep.csv", &table.to_csv(), "Fig. 3 symbols", "Poisson-noisy coherent and fluorescence rates")?;
    let fit = fit_saturation_curves(&data)?;
    b.json(
        "fig3_fit.json",
        &json!({
            "p_sat": fit.p_sat,
            "p_sat_error": fit.p_sat_error,
            "inconsistency": fit.inconsistency,
            "joint": serde_json::from_str::<serde_json::Value>(&fit.joint.to_json()).expect("valid json"),
        }),
        "Fig. 3",
        "joint saturation fit",
    )?;
    b.anchor("p_sat_W", p_sat, "onset of saturation at S = 1 at 350 pW");
    b.anchor("p_min_W", cfg.sweep.p_min, "excitation varied between 5 pW and 10 nW");
    b.anchor("p_max_W", cfg.sweep.p_max, "excitation varied between 5 pW and 10 nW");
    b.synth("coherent_rate_cps", cfg.sweep.coherent_rate);
    b.synth("fluorescence_rate_cps", cfg.sweep.fluorescence_rate);
    b.synth("points", cfg.sweep.points);
    b.summary.insert("fitted_p_sat_W".into(), fit.p_sat);
    b.summary.insert("inconsistency".into(), fit.inconsistency);
    b.lines.push(format!("fig3: P_sat = {:.4e} ± {:.2e} W", fit.p_sat, fit.p_sat_error));
    Ok(())
}

/// Intrinsic triple with `a_peak`, `b_peak` expressed at the apparent width.
pub fn intrinsic_triple(cfg: &RunConfig) -> resfluor::Result<(ExtinctionTriple, f64)> {
    let gamma = power_broadened_fwhm(&cfg.molecule, cfg.rabi()?);
    let triple = ExtinctionTriple {
        a: cfg.extinction.a_peak * gamma * gamma / 4.0,
        b: cfg.extinction.b_peak * gamma / 2.0,
        psi: cfg.drive.psi_deg.to_radians(),
    };
    Ok((triple, gamma))
}

/// Poisson-noisy waveplate series; each trace's counts use their own seed.
pub fn noisy_qwp_series(cfg: &RunConfig, seed: u64) -> resfluor::Result<Vec<(f64, SpectrumTrace)>> {
    let (truth, gamma) = intrinsic_triple(cfg)?;
    let det = cfg.detector_params()?;
    let series = qwp_series(&cfg.geometry(), &cfg.qwp_angles(), truth, gamma, 0.0, &cfg.grid.values())?;
    series
        .into_iter()
        .enumerate()
        .map(|(k, (theta, t))| {
            let counts = simulate_counts(&rate_trace(cfg, &t)?, &det, trial_seed(seed, k as u64))?;
            Ok((theta, counts))
        })
        .collect()
}

fn fig4(cfg: &RunConfig, b: &mut Builder) -> CliResult<()> {
    let mol = cfg.molecule;
    let drive = cfg.drive_params()?;
    let grid = cfg.grid.values();
    let panel_c = [
        ("fig4c_total.csv", 0.08, 0.30, "A and B terms together: net dip"),
        ("fig4c_a_term.csv", 0.08, 0.0, "fluorescence (A) term alone"),
        ("fig4c_b_term.csv", 0.0, 0.30, "interference (B) term alone"),
    ];
    for (name, a, bb, what) in panel_c {
        let model = ExtinctionModel::from_peak_fractions(a, bb, PI / 2.0, mol, drive)?;
        let t = resfluor::spectra::extinction_spectrum(&model, grid.clone())?;
        b.file(name, &t.to_csv(), "Fig. 4c", what)?;
    }
    let series = noisy_qwp_series(cfg, cfg.seed)?;
    for (theta, t) in &series {
        let deg = theta.to_degrees().round() as i64;
        b.file(
            &format!("fig4_qwp_{deg:03}.csv"),
            &t.to_csv(),
            "Fig. 4a-b",
            &format!("counts behind the waveplate at {deg} deg and the polarizer"),
        )?;
    }
    let sep = separate_components(&series, &cfg.geometry(), &SeparationOptions::default())?;
    let (truth, _) = intrinsic_triple(cfg)?;
    b.json(
        "fig4_separation.json",
        &json!({
            "A0": sep.a0, "B0": sep.b0, "psi0": sep.psi0, "gamma": sep.gamma, "center": sep.center,
            "truth": {"A0": truth.a, "B0": truth.b, "psi0": truth.psi},
            "fit": serde_json::from_str::<serde_json::Value>(&sep.result.to_json()).expect("valid json"),
        }),
        "Fig. 4",
        "joint separation of A, B and psi from the series",
    )?;
    b.anchor("fig4c_a_peak", 0.08, "peak of 8% associated with the A-term");
    b.anchor("fig4c_b_peak", 0.30, "30% dip of the B-term");
    b.anchor("fig4c_net_dip", 0.22, "total observable dip of 22%");
    b.synth("qwp_deg", "0, 36, 72, 108, 144");
    b.synth("polarizer_deg", cfg.geometry.polarizer_deg);
    b.synth("dipole_deg", cfg.geometry.dipole_deg);
    b.synth("intrinsic_a_peak", cfg.extinction.a_peak);
    b.synth("intrinsic_b_peak", cfg.extinction.b_peak);
    b.synth("intrinsic_psi_deg", cfg.drive.psi_deg);
    b.synth("counts_per_pixel", cfg.drive.incident_rate * cfg.detector.integration_time);
    b.summary.insert("psi0_deg".into(), sep.psi0.to_degrees());
    b.summary.insert("A0_ratio".into(), sep.a0 / truth.a);
    b.summary.insert("B0_ratio".into(), sep.b0 / truth.b);
    b.lines.push(format!(
        "fig4: ψ0 = {:.3}° (truth {:.1}°), A0/true = {:.4}, B0/true = {:.4}",
        sep.psi0.to_degrees(),
        cfg.drive.psi_deg,
        sep.a0 / truth.a,
        sep.b0 / truth.b
    ));
    Ok(())
}

fn fig5(cfg: &RunConfig, b: &mut Builder) -> CliResult<()> {
    let fpc = cfg.fpc;
    let grid = cfg.mollow.grid.values();
    let laser: Vec<f64> = grid.iter().map(|&nu| fpc_transmission(nu, &fpc)).collect();
    let meta = Provenance::new("fpc_transmission")
        .with_param("fpc_fsr", fpc.fsr)
        .with_param("fpc_fwhm", fpc.fwhm)
        .with_param("fpc_peak_transmission", fpc.peak_transmission);
    let laser = SpectrumTrace::new(GridKind::AnalyzerScan, ValueUnit::Transmission, grid, laser, meta)?;
    b.file("fig5a_fpc.csv", &laser.to_csv(), "Fig. 5a", "analyzer transmission under laser illumination")?;

    let det = cfg.detector_params()?;
    let mut weak = cfg.clone();
    weak.drive.strength = DriveStrength::Rabi(FIG5_WEAK_RABI);
    let g2_weak = g2_series(&weak, trial_seed(cfg.seed, 100))?;
    b.file("fig5i_g2.csv", &g2_weak.to_csv(), "Fig. 5i", "antibunching under weak excitation")?;

    let mut separations = Vec::new();
    let mut fits = Vec::new();
    for (k, &rabi) in FIG5_RABI.iter().enumerate() {
        let mut c = cfg.clone();
        c.drive.strength = DriveStrength::Rabi(rabi);
        let (emission, analyzer) = mollow_traces(&c)?;
        let counts = simulate_counts(&analyzer, &det, trial_seed(cfg.seed, k as u64))?;
        let spectrum_panel = format!("Fig. 5{}", (b'b' + k as u8) as char);
        let g2_panel = format!("Fig. 5{}", (b'j' + k as u8) as char);
        b.file(
            &format!("fig5_spectrum_{}.csv", k + 1),
            &counts.to_csv(),
            &spectrum_panel,
            &format!("analyzer scan, counts per 3 s pixel, Omega = {rabi} MHz"),
        )?;
        b.file(
            &format!("fig5_emission_{}.csv", k + 1),
            &emission.to_csv(),
            &spectrum_panel,
            "calculated incoherent emission before the analyzer",
        )?;
        let g2 = g2_series(&c, trial_seed(cfg.seed, 50 + k as u64))?;
        b.file(&format!("fig5_g2_{}.csv", k + 1), &g2.to_csv(), &g2_panel, &format!("g2 at Omega = {rabi} MHz"))?;
        let fit = fit_rabi_from_g2(&g2, &c.molecule, &RabiFitOptions::default())?;
        let sideband = sideband_position(&emission).unwrap_or(0.0);
        separations.push(sideband);
        fits.push(json!({
            "rabi_true": rabi,
            "rabi_fit": fit.rabi,
            "rabi_error": fit.rabi_error,
            "annotation": saturation_annotation(fit.rabi, &c.molecule),
            "sideband_MHz": sideband,
            "g2_oscillation_MHz": g2_oscillation_frequency(&c.molecule, rabi),
        }));
    }
    b.json("fig5_rabi_fits.json", &json!(fits), "Fig. 5j-p", "Rabi frequencies fitted to the g2 traces")?;
    b.anchor("fpc_fsr_MHz", fpc.fsr, "free spectral range of 356 MHz");
    b.anchor("fpc_fwhm_MHz", fpc.fwhm, "instrumental linewidth of about 14 MHz");
    b.anchor("fpc_peak_transmission", fpc.peak_transmission, "transmission of approximately 15%");
    b.anchor("integration_time_s", det.integration_time, "integration time of 3 s per scan pixel");
    molecule_anchors(b, &cfg.molecule);
    b.synth("rabi_MHz", format!("{FIG5_RABI:?}"));
    b.synth("weak_rabi_MHz", FIG5_WEAK_RABI);
    b.synth("emission_rate_cps", cfg.mollow.emission_rate);
    b.synth("laser_background_cps", cfg.mollow.laser_background);
    b.synth("g2_plateau_coincidences", cfg.g2.coincidences);
    for (k, s) in separations.iter().enumerate() {
        b.summary.insert(format!("sideband_{}_MHz", k + 1), *s);
    }
    b.lines.push(format!("fig5: sidebands at {separations:.1?} MHz"));
    Ok(())
}

fn fig6(cfg: &RunConfig, b: &mut Builder) -> CliResult<()> {
    let t = transmission(cfg)?;
    let rate = rate_trace(cfg, &t)?;
    let counts = simulate_counts(&rate, &cfg.detector_params()?, cfg.seed)?;
    b.file("fig6_model.csv", &rate.to_csv(), "Fig. 6", "expected detected rate without dark counts")?;
    b.file("fig6_counts.csv", &counts.to_csv(), "Fig. 6", "raw counts per 4 s pixel including dark counts")?;
    let fit = fit_extinction(&counts, &ExtinctionFitOptions::default())?;
    let budget = budget(cfg)?;
    let stated_coherent = 1.1;
    let budget_dip = interference_dip_rate(cfg.drive.incident_rate, stated_coherent, 1.0)?;
    let fitted_dip = fit.dip_depth * fit.result.value("baseline") / cfg.detector.integration_time;
    b.json(
        "fig6_summary.json",
        &json!({
            "incident_rate": cfg.drive.incident_rate,
            "dark_rate": cfg.detector.dark_rate,
            "integration_time": cfg.detector.integration_time,
            "dip_rate": budget.dip_rate,
            "dip_from_1.1_cps_emission": budget_dip,
            "coherent_rate_for_dip": budget.coherent_rate,
            "snr_per_pixel": budget.snr_per_pixel,
            "fitted_dip_rate": fitted_dip,
        }),
        "Fig. 6",
        "photon budget and per-pixel SNR",
    )?;
    b.anchor("incident_rate_cps", cfg.drive.incident_rate, "incident power of merely 550 photons per second");
    b.anchor("dip_rate_cps", 50.0, "the dip of 50 counts per second");
    b.anchor("coherent_rate_cps", stated_coherent, "detected molecular emission of only 1.1 photons per second");
    b.anchor("dark_rate_cps", cfg.detector.dark_rate, "150 dark counts of our detector");
    b.anchor("integration_time_s", cfg.detector.integration_time, "integrated over 4 seconds at each pixel");
    b.synth("grid_MHz", format!("{} to {} in {} points", cfg.grid.start, cfg.grid.stop, cfg.grid.points));
    b.synth("b_peak", format!("{} (50/550)", cfg.extinction.b_peak));
    b.summary.insert("snr_per_pixel".into(), budget.snr_per_pixel);
    b.summary.insert("dip_from_1.1_cps".into(), budget_dip);
    b.summary.insert("fitted_dip_rate".into(), fitted_dip);
    b.lines.push(format!(
        "fig6: dip {:.1} cps (budget {budget_dip:.2} cps from 1.1 cps), SNR {:.2} per pixel, fitted dip {fitted_dip:.1} cps",
        budget.dip_rate, budget.snr_per_pixel
    ));
    Ok(())
}
