//! `resfluor analyze <sub>`: every fit writes `<sub>.json` and exits 4 unless converged.

use std::path::{Path, PathBuf};

use resfluor::correlation::{cross_check_saturation, fit_rabi_from_g2, saturation_annotation, RabiFitOptions};
use resfluor::estimation::{
    fit_extinction, fit_linewidth_vs_power, fit_saturation_curves, ExtinctionFitOptions, FitResult, MinimizeOptions,
    Weighting,
};
use resfluor::polarization::{separate_components, SeparationOptions};
use resfluor::trace::SpectrumTrace;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::table::{sweep_from_table, Table};
use crate::{read_g2, read_input, read_trace, AnalyzeCmd, Context};

pub fn run(cmd: &AnalyzeCmd, ctx: &Context) -> CliResult<Vec<String>> {
    let cfg = &ctx.cfg;
    // inputs are parsed before anything is written
    let (name, value, result, summary) = match cmd {
        AnalyzeCmd::FitSpectrum { input } => fit_spectrum(cfg, input)?,
        AnalyzeCmd::Separate { inputs } => separate(cfg, inputs)?,
        AnalyzeCmd::G2Fit { input } => g2_fit(cfg, input)?,
        AnalyzeCmd::LinewidthSweep { inputs } => linewidth_sweep(inputs)?,
        AnalyzeCmd::SaturationFit { input } => saturation_fit(input)?,
    };
    let mut out = ctx.output()?;
    out.json(&format!("{name}.json"), &value)?;
    let mut lines = vec![summary, result.table()];
    if !result.converged() {
        lines.push(format!("{name}: status {}", result.status));
        return Err(CliError::NotConverged(lines.join("\n")));
    }
    lines.push(format!("wrote {}", out.dir.join(format!("{name}.json")).display()));
    Ok(lines)
}

type Analysis = (&'static str, Value, FitResult, String);

fn fit_json(result: &FitResult) -> Value {
    serde_json::from_str(&result.to_json()).expect("fit result json is valid")
}

fn minimize_options(cfg: &RunConfig) -> MinimizeOptions {
    MinimizeOptions {
        max_iter: cfg.fit.max_iter,
        ..MinimizeOptions::default()
    }
}

fn input_error(path: &Path, msg: String) -> CliError {
    CliError::Input {
        path: path.to_path_buf(),
        source: resfluor::Error::Parse(msg),
    }
}

fn fit_spectrum(cfg: &RunConfig, input: &Path) -> CliResult<Analysis> {
    let trace = read_trace(input)?;
    let mut opts = ExtinctionFitOptions {
        minimize: minimize_options(cfg),
        ..ExtinctionFitOptions::default()
    };
    opts.fixed.a = cfg.fit.fix_a;
    let fit = fit_extinction(&trace, &opts)?;
    let value = json!({
        "input": input.display().to_string(),
        "dip_depth": fit.dip_depth,
        "dip_depth_error": fit.dip_depth_error,
        "psi_ambiguous": fit.psi_ambiguous,
        "fit": fit_json(&fit.result),
    });
    let summary = format!(
        "fit-spectrum: dip depth {:.5} ± {:.5}, γ = {:.3} MHz, ψ = {:.2}°{}",
        fit.dip_depth,
        fit.dip_depth_error,
        fit.result.value("gamma"),
        fit.result.value("psi").to_degrees(),
        if fit.psi_ambiguous { " (ψ ambiguous)" } else { "" }
    );
    Ok(("fit_spectrum", value, fit.result, summary))
}

fn theta_of(trace: &SpectrumTrace) -> Option<f64> {
    trace
        .meta
        .params
        .get("theta")
        .or_else(|| trace.meta.params.get("source.theta"))
        .copied()
}

fn separate(cfg: &RunConfig, inputs: &[PathBuf]) -> CliResult<Analysis> {
    let traces = inputs.iter().map(|p| read_trace(p)).collect::<CliResult<Vec<_>>>()?;
    let from_config = cfg.qwp_angles();
    let mut series = Vec::with_capacity(traces.len());
    for (i, (path, trace)) in inputs.iter().zip(traces).enumerate() {
        let theta = match theta_of(&trace) {
            Some(t) => t,
            None if from_config.len() == inputs.len() => from_config[i],
            None => {
                return Err(input_error(
                    path,
                    format!(
                        "no `theta` metadata and [geometry] qwp_deg lists {} angles for {} inputs",
                        from_config.len(),
                        inputs.len()
                    ),
                ))
            }
        };
        series.push((theta, trace));
    }
    let opts = SeparationOptions {
        weighting: Weighting::Auto,
        minimize: minimize_options(cfg),
    };
    let sep = separate_components(&series, &cfg.geometry(), &opts)?;
    let value = json!({
        "inputs": inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "theta_deg": series.iter().map(|(t, _)| t.to_degrees()).collect::<Vec<_>>(),
        "A0": sep.a0,
        "B0": sep.b0,
        "psi0": sep.psi0,
        "psi0_deg": sep.psi0.to_degrees(),
        "gamma": sep.gamma,
        "center": sep.center,
        "fit": fit_json(&sep.result),
    });
    let summary = format!(
        "separate: A0 = {:.5e}, B0 = {:.5e}, ψ0 = {:.3}° ± {:.3}°, γ = {:.3} MHz",
        sep.a0,
        sep.b0,
        sep.psi0.to_degrees(),
        sep.error("psi0").to_degrees(),
        sep.gamma
    );
    Ok(("separate", value, sep.result, summary))
}

fn g2_fit(cfg: &RunConfig, input: &Path) -> CliResult<Analysis> {
    let trace = read_g2(input)?;
    let opts = RabiFitOptions {
        float_gamma0: cfg.fit.float_gamma0,
    };
    let fit = fit_rabi_from_g2(&trace, &cfg.molecule, &opts)?;
    let value = json!({
        "input": input.display().to_string(),
        "rabi": fit.rabi,
        "rabi_error": fit.rabi_error,
        "saturation": cross_check_saturation(fit.rabi, &cfg.molecule),
        "annotation": saturation_annotation(fit.rabi, &cfg.molecule),
        "fit": fit_json(&fit.result),
    });
    let summary = format!(
        "g2-fit: Ω = {:.4} ± {:.4} MHz ({})",
        fit.rabi,
        fit.rabi_error,
        saturation_annotation(fit.rabi, &cfg.molecule)
    );
    Ok(("g2_fit", value, fit.result, summary))
}

fn power_of(trace: &SpectrumTrace) -> Option<f64> {
    trace
        .meta
        .params
        .get("power_W")
        .or_else(|| trace.meta.params.get("source.power_W"))
        .copied()
}

fn linewidth_sweep(inputs: &[PathBuf]) -> CliResult<Analysis> {
    let mut spectra = Vec::with_capacity(inputs.len());
    for path in inputs {
        let trace = read_trace(path)?;
        let p = power_of(&trace)
            .ok_or_else(|| input_error(path, "trace has no `param.power_W` metadata".into()))?;
        spectra.push((p, trace));
    }
    let sweep = fit_linewidth_vs_power(&spectra, &Weighting::Auto)?;
    let value = json!({
        "inputs": inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "gamma": sweep.gamma,
        "gamma_error": sweep.gamma_error,
        "p_sat": sweep.p_sat,
        "p_sat_error": sweep.p_sat_error,
        "table": sweep.table.iter().map(|p| json!({"power_W": p.power, "fwhm": p.fwhm, "fwhm_error": p.fwhm_error})).collect::<Vec<_>>(),
        "fit": fit_json(&sweep.result),
    });
    let summary = format!(
        "linewidth-sweep: γ = {:.3} ± {:.3} MHz, P_sat = {:.4e} ± {:.2e} W",
        sweep.gamma, sweep.gamma_error, sweep.p_sat, sweep.p_sat_error
    );
    Ok(("linewidth_sweep", value, sweep.result, summary))
}

fn saturation_fit(input: &Path) -> CliResult<Analysis> {
    let text = read_input(input)?;
    let data = Table::parse(&text)
        .and_then(|t| sweep_from_table(&t))
        .map_err(|source| CliError::Input {
            path: input.to_path_buf(),
            source,
        })?;
    let fit = fit_saturation_curves(&data)?;
    let value = json!({
        "input": input.display().to_string(),
        "p_sat": fit.p_sat,
        "p_sat_error": fit.p_sat_error,
        "inconsistency": fit.inconsistency,
        "joint": fit_json(&fit.joint),
        "coherent_only": fit_json(&fit.coherent_only),
        "fluorescence_only": fit_json(&fit.fluorescence_only),
    });
    let summary = format!(
        "saturation-fit: P_sat = {:.4e} ± {:.2e} W, channel inconsistency {:.3}",
        fit.p_sat, fit.p_sat_error, fit.inconsistency
    );
    Ok(("saturation_fit", value, fit.joint, summary))
}
