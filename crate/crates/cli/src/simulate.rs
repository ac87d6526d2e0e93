//! `resfluor simulate <sub>`.

use resfluor::correlation::{g2_oscillation_frequency, g2_trace, simulate_coincidences, G2Trace};
use resfluor::estimation::SaturationData;
use resfluor::measurement::{
    poisson_draw, simulate_counts, snr_of_detection, substream, SaturationCalibration,
};
use resfluor::physics::{coherent_emission_rate, saturation_parameter, total_emission_rate};
use resfluor::spectra::{
    coherent_weight, convolve_instrument, extinction_spectrum, mollow_spectrum, ExtinctionModel, InstrumentLines,
};
use resfluor::trace::{linspace, logspace, SpectrumTrace, ValueUnit};
use serde_json::json;

use crate::config::{DriveStrength, RunConfig};
use crate::error::CliResult;
use crate::table::sweep_to_table;
use crate::{Context, Output, SimulateCmd};

pub fn run(cmd: SimulateCmd, ctx: &Context) -> CliResult<Vec<String>> {
    let mut out = ctx.output()?;
    match cmd {
        SimulateCmd::Extinction => extinction(&ctx.cfg, &mut out),
        SimulateCmd::Mollow => mollow(&ctx.cfg, &mut out).map(|m| vec![m.summary]),
        SimulateCmd::G2 => g2(&ctx.cfg, &mut out),
        SimulateCmd::SaturationSweep => saturation_sweep(&ctx.cfg, &mut out),
        SimulateCmd::Counts => counts(&ctx.cfg, &mut out),
    }
}

pub fn extinction_model(cfg: &RunConfig) -> resfluor::Result<ExtinctionModel> {
    let drive = cfg.drive_params()?;
    ExtinctionModel::from_peak_fractions(
        cfg.extinction.a_peak,
        cfg.extinction.b_peak,
        drive.psi,
        cfg.molecule,
        drive,
    )
}

/// Transmission trace on `[grid]`, tagged with the incident power when the drive is set by power.
pub fn transmission(cfg: &RunConfig) -> resfluor::Result<SpectrumTrace> {
    let mut t = extinction_spectrum(&extinction_model(cfg)?, cfg.grid.values())?;
    if let DriveStrength::Power(p) = cfg.drive.strength {
        t.meta.params.insert("power_W".into(), p);
    }
    t.meta.params.insert("S".into(), saturation_parameter(&cfg.molecule, &cfg.drive_params()?));
    Ok(t)
}

/// Detected rate (counts/s) of a transmission trace at the configured incident rate.
pub fn rate_trace(cfg: &RunConfig, transmission: &SpectrumTrace) -> resfluor::Result<SpectrumTrace> {
    let values = transmission.values().iter().map(|v| v * cfg.drive.incident_rate).collect();
    let mut meta = transmission.meta.clone();
    meta.params.insert("incident_rate".into(), cfg.drive.incident_rate);
    transmission.with_values(ValueUnit::CountsPerSecond, values, meta)
}

fn minimum(trace: &SpectrumTrace) -> (f64, f64) {
    trace
        .iter()
        .fold((f64::NAN, f64::INFINITY), |best, (x, v)| if v < best.1 { (x, v) } else { best })
}

fn extinction(cfg: &RunConfig, out: &mut Output) -> CliResult<Vec<String>> {
    let t = transmission(cfg)?;
    out.trace("extinction", &t)?;
    let (at, min) = minimum(&t);
    let s = t.meta.params["S"];
    let mut lines = vec![format!("extinction: dip depth {:.4} at {at:.3} MHz, S = {s:.4}", 1.0 - min)];
    if cfg.detector.noise {
        let counts = simulate_counts(&rate_trace(cfg, &t)?, &cfg.detector_params()?, cfg.seed)?;
        out.trace("extinction_counts", &counts)?;
        let (_, cmin) = minimum(&counts);
        let det = cfg.detector_params()?;
        let baseline = det.expected_counts(cfg.drive.incident_rate);
        lines.push(format!(
            "counts: baseline {baseline:.1} per pixel, minimum {cmin}, shot noise {:.4}",
            baseline.sqrt() / baseline
        ));
    }
    Ok(lines)
}

pub struct MollowOutput {
    pub emission: SpectrumTrace,
    pub analyzer: SpectrumTrace,
    pub sideband: Option<f64>,
    pub summary: String,
}

/// Highest local maximum at positive detuning, if the trace has one.
pub fn sideband_position(trace: &SpectrumTrace) -> Option<f64> {
    let (x, v) = (trace.grid(), trace.values());
    let mut best: Option<(f64, f64)> = None;
    for i in 1..x.len().saturating_sub(1) {
        if x[i] > 0.0 && v[i] > v[i - 1] && v[i] >= v[i + 1] && best.is_none_or(|b| v[i] > b.1) {
            best = Some((x[i], v[i]));
        }
    }
    best.map(|b| b.0)
}

pub fn mollow_traces(cfg: &RunConfig) -> resfluor::Result<(SpectrumTrace, SpectrumTrace)> {
    let drive = cfg.drive_params()?;
    let scale = cfg.mollow.emission_rate;
    let emission = mollow_spectrum(&cfg.molecule, &drive, cfg.mollow.grid.values(), scale)?;
    let lines = InstrumentLines {
        laser_background_rate: cfg.mollow.laser_background,
        coherent_delta_weight: coherent_weight(&cfg.molecule, drive.rabi) * scale,
        pedestal_density: cfg.mollow.pedestal,
    };
    let analyzer = convolve_instrument(&emission, &cfg.fpc, &lines)?;
    Ok((emission, analyzer))
}

pub fn mollow(cfg: &RunConfig, out: &mut Output) -> CliResult<MollowOutput> {
    let (emission, analyzer) = mollow_traces(cfg)?;
    out.trace("mollow_emission", &emission)?;
    out.trace("mollow_analyzer", &analyzer)?;
    if cfg.detector.noise {
        let counts = simulate_counts(&analyzer, &cfg.detector_params()?, cfg.seed)?;
        out.trace("mollow_counts", &counts)?;
    }
    let sideband = sideband_position(&emission);
    let rabi = cfg.rabi()?;
    let summary = match sideband {
        Some(x) => format!("mollow: Ω = {rabi:.3} MHz, sidebands at ±{x:.3} MHz"),
        None => format!("mollow: Ω = {rabi:.3} MHz, single line (no sidebands)"),
    };
    Ok(MollowOutput {
        emission,
        analyzer,
        sideband,
        summary,
    })
}

pub fn g2_series(cfg: &RunConfig, seed: u64) -> resfluor::Result<G2Trace> {
    let delays = linspace(0.0, cfg.g2.delay_max_ns, cfg.g2.points);
    let mut trace = g2_trace(&cfg.molecule, &cfg.drive_params()?, delays)?;
    if cfg.g2.coincidences > 0.0 {
        trace = simulate_coincidences(&trace, cfg.g2.coincidences, seed)?;
    }
    if cfg.g2.jitter_ns > 0.0 {
        trace = trace.smooth_jitter(cfg.g2.jitter_ns)?;
    }
    Ok(trace)
}

fn g2(cfg: &RunConfig, out: &mut Output) -> CliResult<Vec<String>> {
    let trace = g2_series(cfg, cfg.seed)?;
    out.g2("g2", &trace)?;
    let rabi = cfg.rabi()?;
    let s = saturation_parameter(&cfg.molecule, &cfg.drive_params()?);
    Ok(vec![format!(
        "g2: g2(0) = {:.4}, Ω = {rabi:.3} MHz, oscillation {:.3} MHz, S = {s:.4}",
        trace.values()[0],
        g2_oscillation_frequency(&cfg.molecule, rabi)
    )])
}

/// Coherent and fluorescence rates over `[sweep]`, with Poisson noise when enabled.
pub fn sweep_data(cfg: &RunConfig, seed: u64) -> resfluor::Result<SaturationData> {
    let sw = &cfg.sweep;
    let cal = SaturationCalibration::new(cfg.drive.p_sat)?;
    let powers = logspace(sw.p_min, sw.p_max, sw.points);
    let n = powers.len() as u64;
    let mut coherent = Vec::with_capacity(powers.len());
    let mut fluorescence = Vec::with_capacity(powers.len());
    let mut sigmas = (Vec::new(), Vec::new());
    for (i, &p) in powers.iter().enumerate() {
        let s = cal.saturation(p)?;
        let c = sw.coherent_rate * coherent_emission_rate(s)?;
        let f = sw.fluorescence_rate * total_emission_rate(s)?;
        if cfg.detector.noise {
            let t = sw.integration_time;
            let nc = poisson_draw(&mut substream(seed, i as u64), c * t) as f64;
            let nf = poisson_draw(&mut substream(seed, n + i as u64), f * t) as f64;
            coherent.push(nc / t);
            fluorescence.push(nf / t);
            sigmas.0.push(nc.max(1.0).sqrt() / t);
            sigmas.1.push(nf.max(1.0).sqrt() / t);
        } else {
            coherent.push(c);
            fluorescence.push(f);
        }
    }
    let noisy = cfg.detector.noise;
    Ok(SaturationData {
        powers,
        coherent,
        fluorescence,
        coherent_sigma: noisy.then_some(sigmas.0),
        fluorescence_sigma: noisy.then_some(sigmas.1),
    })
}

fn saturation_sweep(cfg: &RunConfig, out: &mut Output) -> CliResult<Vec<String>> {
    let data = sweep_data(cfg, cfg.seed)?;
    let mut table = sweep_to_table(&data);
    table.meta.push(("generator".into(), "saturation_sweep".into()));
    table.meta.push(("param.p_sat".into(), format!("{:?}", cfg.drive.p_sat)));
    if cfg.detector.noise {
        table.meta.push(("seed".into(), cfg.seed.to_string()));
    }
    if cfg.output.format.csv() {
        out.text("saturation_sweep.csv", &table.to_csv())?;
    }
    if cfg.output.format.json() {
        let value = json!({
            "powers_W": data.powers,
            "coherent_cps": data.coherent,
            "fluorescence_cps": data.fluorescence,
            "coherent_sigma": data.coherent_sigma,
            "fluorescence_sigma": data.fluorescence_sigma,
            "p_sat_W": cfg.drive.p_sat,
        });
        out.json("saturation_sweep.json", &value)?;
    }
    let (imax, _) = data
        .coherent
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
    Ok(vec![format!(
        "saturation-sweep: {} powers from {:e} to {:e} W, coherent maximum at {:e} W (P_sat = {:e} W)",
        data.powers.len(),
        cfg.sweep.p_min,
        cfg.sweep.p_max,
        data.powers[imax],
        cfg.drive.p_sat
    )])
}

/// Photon budget of an extinction scan.
pub struct Budget {
    pub dip_rate: f64,
    pub coherent_rate: f64,
    pub snr_per_pixel: f64,
    pub baseline_counts: f64,
}

pub fn budget(cfg: &RunConfig) -> resfluor::Result<Budget> {
    let model = extinction_model(cfg)?;
    let incident = cfg.drive.incident_rate;
    let det = cfg.detector_params()?;
    let (_, min) = minimum(&extinction_spectrum(&model, cfg.grid.values())?);
    let dip_rate = (1.0 - min).max(0.0) * incident * det.quantum_efficiency;
    // molecular rate that interferes into this dip at unit mode overlap
    let coherent_rate = dip_rate * dip_rate / (4.0 * incident);
    Ok(Budget {
        dip_rate,
        coherent_rate,
        snr_per_pixel: snr_of_detection(dip_rate, incident * det.quantum_efficiency, &det, det.integration_time)?,
        baseline_counts: det.expected_counts(incident),
    })
}

fn counts(cfg: &RunConfig, out: &mut Output) -> CliResult<Vec<String>> {
    let t = transmission(cfg)?;
    let rate = rate_trace(cfg, &t)?;
    out.trace("counts_rate", &rate)?;
    let counts = simulate_counts(&rate, &cfg.detector_params()?, cfg.seed)?;
    out.trace("counts", &counts)?;
    let b = budget(cfg)?;
    out.json(
        "counts_summary.json",
        &json!({
            "incident_rate": cfg.drive.incident_rate,
            "dark_rate": cfg.detector.dark_rate,
            "integration_time": cfg.detector.integration_time,
            "dip_rate": b.dip_rate,
            "coherent_rate": b.coherent_rate,
            "snr_per_pixel": b.snr_per_pixel,
            "baseline_counts": b.baseline_counts,
            "seed": cfg.seed,
        }),
    )?;
    Ok(vec![format!(
        "counts: dip {:.2} cps from {:.3} cps coherent emission, SNR {:.3} per {} s pixel",
        b.dip_rate, b.coherent_rate, b.snr_per_pixel, cfg.detector.integration_time
    )])
}
