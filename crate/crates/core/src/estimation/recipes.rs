//! Fit recipes for the extinction spectrum, Lorentzian linewidths, power
//! broadening and the two-channel saturation curves.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{minimize, FitProblem, FitResult, FitStatus, MinimizeOptions, Parameter};
use crate::error::{invalid, Error, Result};
use crate::trace::{logspace, GridKind, SpectrumTrace, ValueUnit};
use crate::units::wrap_phase;

/// How data points are weighted.
#[derive(Debug, Clone, Default, PartialEq)]
pub enum Weighting {
    /// `1/max(counts, 1)` for [`ValueUnit::Counts`] traces, uniform otherwise.
    #[default]
    Auto,
    Uniform,
    /// Explicit inverse variances, one per point.
    Custom(Vec<f64>),
}

impl Weighting {
    pub(crate) fn resolve(&self, trace: &SpectrumTrace) -> Result<Vec<f64>> {
        match self {
            Weighting::Auto if trace.unit == ValueUnit::Counts => {
                Ok(trace.values().iter().map(|&c| 1.0 / c.max(1.0)).collect())
            }
            Weighting::Auto | Weighting::Uniform => Ok(vec![1.0; trace.len()]),
            Weighting::Custom(w) if w.len() == trace.len() => Ok(w.clone()),
            Weighting::Custom(w) => Err(invalid(
                "weights",
                format!("expected {} weights, got {}", trace.len(), w.len()),
            )),
        }
    }
}

/// Normalized extinction shape 1 + A·L − B·L·(d cos ψ + (γ/2) sin ψ) with
/// L = 1/(d² + γ²/4). Here γ is the apparent (possibly power-broadened) width.
pub(crate) fn extinction_shape(d: f64, a: f64, b: f64, psi: f64, gamma: f64) -> f64 {
    let l = 1.0 / (d * d + gamma * gamma / 4.0);
    1.0 + a * l - b * l * (d * psi.cos() + gamma / 2.0 * psi.sin())
}

/// Weighted linear least squares; returns coefficients and the weighted cost.
pub(crate) fn linear_lstsq(columns: &[Vec<f64>], y: &[f64], w: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = y.len();
    let k = columns.len();
    let a = DMatrix::from_fn(n, k, |i, j| columns[j][i] * w[i].sqrt());
    let b = DVector::from_fn(n, |i, _| y[i] * w[i].sqrt());
    let svd = a.clone().svd(true, true);
    let coef = svd.solve(&b, 1e-13).ok()?;
    let r = &a * &coef - &b;
    Some((coef.iter().copied().collect(), r.norm_squared()))
}

/// Best (center, width) over a coarse grid, scoring each candidate by a
/// linear least-squares fit of `columns(d, width)` to the data.
pub(crate) fn scan_center_width<const K: usize>(
    x: &[f64],
    y: &[f64],
    w: &[f64],
    columns: impl Fn(f64, f64) -> [f64; K],
) -> Option<(f64, f64, Vec<f64>)> {
    let (lo, hi) = (x[0], x[x.len() - 1]);
    let span = hi - lo;
    let step = span / (x.len() - 1) as f64;
    let widths = logspace((1.5 * step).max(1e-3 * span), span / 3.0, 36);
    let n_centers = x.len().min(121);
    let mut best: Option<(f64, f64, f64, Vec<f64>)> = None;
    let mut cols: Vec<Vec<f64>> = vec![vec![0.0; x.len()]; K];
    for ic in 0..n_centers {
        let c = lo + span * ic as f64 / (n_centers - 1) as f64;
        for &g in &widths {
            for (i, &xi) in x.iter().enumerate() {
                let v = columns(xi - c, g);
                for j in 0..K {
                    cols[j][i] = v[j];
                }
            }
            if let Some((coef, cost)) = linear_lstsq(&cols, y, w) {
                if best.as_ref().is_none_or(|b| cost < b.0) {
                    best = Some((cost, c, g, coef));
                }
            }
        }
    }
    best.map(|(_, c, g, coef)| (c, g, coef))
}

/// Optional starting values for [`fit_extinction`]; `None` means estimate from data.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExtinctionGuess {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub psi: Option<f64>,
    pub gamma: Option<f64>,
    pub center: Option<f64>,
    pub baseline: Option<f64>,
}

/// Which extinction parameters are held fixed.
///
/// `a` defaults to fixed at zero: in a single trace the A-term and the
/// absorptive part of the B-term have identical shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtinctionFixed {
    pub a: bool,
    pub b: bool,
    pub psi: bool,
    pub gamma: bool,
    pub center: bool,
    pub baseline: bool,
}

impl Default for ExtinctionFixed {
    fn default() -> Self {
        Self {
            a: true,
            b: false,
            psi: false,
            gamma: false,
            center: false,
            baseline: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtinctionFitOptions {
    pub guess: ExtinctionGuess,
    pub fixed: ExtinctionFixed,
    pub weighting: Weighting,
    pub minimize: MinimizeOptions,
}

/// Result of [`fit_extinction`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionFit {
    /// Parameters `A`, `B`, `psi`, `gamma`, `center`, `baseline`.
    pub result: FitResult,
    /// Largest fractional drop of the fitted curve below its baseline.
    pub dip_depth: f64,
    pub dip_depth_error: f64,
    /// ψ and π − ψ fit the data about equally well.
    pub psi_ambiguous: bool,
}

impl ExtinctionFit {
    /// Normalized fitted curve at laser detuning `delta`.
    pub fn shape(&self, delta: f64) -> f64 {
        let r = &self.result;
        extinction_shape(delta - r.value("center"), r.value("A"), r.value("B"), r.value("psi"), r.value("gamma"))
    }
}

/// Fits the extinction model `baseline · (1 + A·L − B·L·(Δ' cos ψ + (γ/2) sin ψ))`
/// with Δ' = Δ − center to a laser-detuning trace.
///
/// The window should cover at least three linewidths.
pub fn fit_extinction(data: &SpectrumTrace, opts: &ExtinctionFitOptions) -> Result<ExtinctionFit> {
    if data.grid_kind != GridKind::LaserDetuning {
        return Err(Error::UnitMismatch {
            expected: GridKind::LaserDetuning.to_string(),
            found: data.grid_kind.to_string(),
        });
    }
    if data.len() < 8 {
        return Err(Error::InsufficientData(format!("{} points, need at least 8", data.len())));
    }
    let x = data.grid();
    let y = data.values();
    let w = opts.weighting.resolve(data)?;
    let g = &opts.guess;
    let a_init = g.a.unwrap_or(0.0);

    let (mut center, mut gamma, coef) = scan_center_width(x, y, &w, |d, gm| {
        let l = 1.0 / (d * d + gm * gm / 4.0);
        [1.0, l, l * d]
    })
    .ok_or_else(|| Error::Degenerate("linear initialization failed".into()))?;
    center = g.center.unwrap_or(center);
    gamma = g.gamma.unwrap_or(gamma);
    let base = if coef[0].abs() > 0.0 { coef[0] } else { 1.0 };
    let p = (a_init - coef[1] / base) * 2.0 / gamma;
    let q = -coef[2] / base;
    let baseline = g.baseline.unwrap_or(base);
    let b = g.b.unwrap_or((p * p + q * q).sqrt());
    let psi = g.psi.unwrap_or(p.atan2(q));

    let f = &opts.fixed;
    let params = vec![
        Parameter::at_least("A", a_init.max(0.0), 0.0).fixed(f.a),
        Parameter::at_least("B", b.max(0.0), 0.0).fixed(f.b),
        Parameter::free("psi", psi).fixed(f.psi),
        Parameter::at_least("gamma", gamma.max(1e-9), 0.0).fixed(f.gamma),
        Parameter::free("center", center).fixed(f.center),
        Parameter::free("baseline", baseline).fixed(f.baseline),
    ];
    let residual = |p: &[f64], r: &mut [f64]| {
        for i in 0..x.len() {
            r[i] = p[5] * extinction_shape(x[i] - p[4], p[0], p[1], p[2], p[3]) - y[i];
        }
    };
    let problem = FitProblem::new(params, x.len(), residual).with_weights(w);
    let mut result = minimize(&problem, &opts.minimize)?;
    let ipsi = result.index("psi");
    result.values[ipsi] = wrap_phase(result.values[ipsi]);

    let v = result.values.clone();
    let depth_of = |p: &[f64]| dip_depth(p[0], p[1], p[2], p[3]);
    let dip = depth_of(&v);
    let dip_err = propagate(&result, depth_of);

    // cost of the mirrored phase with everything else held
    let mut alt = v.clone();
    alt[2] = std::f64::consts::PI - v[2];
    let mut r = vec![0.0; x.len()];
    residual(&alt, &mut r);
    let weights = opts.weighting.resolve(data)?;
    let alt_chi: f64 = r.iter().zip(&weights).map(|(ri, wi)| ri * ri * wi).sum();
    let scale = if result.reduced_chi_square().is_finite() && result.reduced_chi_square() > 0.0 {
        result.reduced_chi_square()
    } else {
        1.0
    };
    let psi_ambiguous = (alt_chi - result.chi_square) / scale < 4.0;

    Ok(ExtinctionFit {
        result,
        dip_depth: dip,
        dip_depth_error: dip_err,
        psi_ambiguous,
    })
}

/// 1 − min of the normalized shape, located by a dense scan and golden-section refinement.
fn dip_depth(a: f64, b: f64, psi: f64, gamma: f64) -> f64 {
    let f = |d: f64| extinction_shape(d, a, b, psi, gamma);
    let n = 2001;
    let half = 10.0 * gamma;
    let h = 2.0 * half / (n - 1) as f64;
    let mut imin = 0;
    let mut vmin = f64::INFINITY;
    for i in 0..n {
        let v = f(-half + h * i as f64);
        if v < vmin {
            vmin = v;
            imin = i;
        }
    }
    let (mut lo, mut hi) = (-half + h * (imin as f64 - 1.0), -half + h * (imin as f64 + 1.0));
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        if f(m1) < f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    (1.0 - vmin.min(f(0.5 * (lo + hi)))).max(0.0)
}

/// First-order error of a derived quantity from the free-parameter covariance.
fn propagate(result: &FitResult, g: impl Fn(&[f64]) -> f64) -> f64 {
    let free: Vec<usize> = (0..result.values.len()).filter(|&i| !result.fixed[i]).collect();
    let grad: Vec<f64> = free
        .iter()
        .map(|&i| {
            let h = 1e-6 * result.values[i].abs().max(1e-6);
            let mut p = result.values.clone();
            p[i] += h;
            let up = g(&p);
            p[i] -= 2.0 * h;
            let down = g(&p);
            (up - down) / (2.0 * h)
        })
        .collect();
    let mut var = 0.0;
    for (a, ga) in grad.iter().enumerate() {
        for (b, gb) in grad.iter().enumerate() {
            var += ga * result.covariance[a][b] * gb;
        }
    }
    var.max(0.0).sqrt()
}

/// Fits `baseline + height · (w/2)² / ((x − center)² + (w/2)²)`.
///
/// Parameters are `height` (negative for dips), `center`, `fwhm`, `baseline`.
pub fn fit_lorentzian_peak(data: &SpectrumTrace, weighting: &Weighting) -> Result<FitResult> {
    if data.len() < 6 {
        return Err(Error::InsufficientData(format!("{} points, need at least 6", data.len())));
    }
    let x = data.grid();
    let y = data.values();
    let w = weighting.resolve(data)?;
    let shape = |d: f64, fw: f64| {
        let h2 = fw * fw / 4.0;
        h2 / (d * d + h2)
    };
    let (center, fwhm, coef) = scan_center_width(x, y, &w, |d, fw| [1.0, shape(d, fw)])
        .ok_or_else(|| Error::Degenerate("linear initialization failed".into()))?;
    let params = vec![
        Parameter::free("height", coef[1]),
        Parameter::free("center", center),
        Parameter::at_least("fwhm", fwhm, 0.0),
        Parameter::free("baseline", coef[0]),
    ];
    let problem = FitProblem::new(params, x.len(), |p, r| {
        for i in 0..x.len() {
            r[i] = p[3] + p[0] * shape(x[i] - p[1], p[2]) - y[i];
        }
    })
    .with_weights(w);
    minimize(&problem, &MinimizeOptions::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinewidthPoint {
    pub power: f64,
    pub fwhm: f64,
    pub fwhm_error: f64,
}

/// Result of [`fit_linewidth_vs_power`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinewidthSweep {
    pub table: Vec<LinewidthPoint>,
    /// Parameters `gamma` and `ln_p_sat`.
    pub result: FitResult,
    pub gamma: f64,
    pub gamma_error: f64,
    pub p_sat: f64,
    pub p_sat_error: f64,
}

impl LinewidthSweep {
    /// Model FWHM γ√(1 + P/P_sat).
    pub fn fwhm_at(&self, power: f64) -> f64 {
        self.gamma * (1.0 + power / self.p_sat).sqrt()
    }
}

/// Measures the FWHM of each spectrum and fits γ√(1 + P/P_sat) to the table.
pub fn fit_linewidth_vs_power(spectra: &[(f64, SpectrumTrace)], weighting: &Weighting) -> Result<LinewidthSweep> {
    let mut table = Vec::with_capacity(spectra.len());
    for (power, trace) in spectra {
        let fit = fit_lorentzian_peak(trace, weighting)?;
        let err = fit.error("fwhm");
        table.push(LinewidthPoint {
            power: *power,
            fwhm: fit.value("fwhm"),
            fwhm_error: err,
        });
    }
    fit_linewidth_table(table)
}

/// Fits γ√(1 + P/P_sat) to a measured linewidth table.
///
/// Needs at least three distinct positive powers whose range brackets the
/// fitted P_sat; otherwise the status is `rank_deficient`.
pub fn fit_linewidth_table(table: Vec<LinewidthPoint>) -> Result<LinewidthSweep> {
    let mut powers: Vec<f64> = table.iter().map(|t| t.power).collect();
    if table.iter().any(|t| !(t.power > 0.0 && t.power.is_finite() && t.fwhm > 0.0 && t.fwhm.is_finite())) {
        return Err(invalid("linewidth table", "powers and widths must be positive and finite"));
    }
    powers.sort_by(f64::total_cmp);
    powers.dedup();
    if powers.len() < 3 {
        return Err(Error::RankDeficient(format!("{} distinct powers, need at least 3", powers.len())));
    }
    let (pmin, pmax) = (powers[0], powers[powers.len() - 1]);

    // width² is linear in P: w² = γ² + (γ²/P_sat)·P
    let cols = vec![vec![1.0; table.len()], table.iter().map(|t| t.power).collect()];
    let w2: Vec<f64> = table.iter().map(|t| t.fwhm * t.fwhm).collect();
    let (c, _) = linear_lstsq(&cols, &w2, &vec![1.0; table.len()]).unwrap_or((vec![w2[0], 0.0], 0.0));
    let gamma0 = if c[0] > 0.0 { c[0].sqrt() } else { table[0].fwhm };
    let psat0 = if c[1] > 0.0 && c[0] > 0.0 { c[0] / c[1] } else { (pmin * pmax).sqrt() };

    let weights: Vec<f64> = table
        .iter()
        .map(|t| {
            let s = if t.fwhm_error > 0.0 && t.fwhm_error.is_finite() {
                t.fwhm_error
            } else {
                1e-3 * t.fwhm
            };
            1.0 / (s * s)
        })
        .collect();
    let params = vec![
        Parameter::at_least("gamma", gamma0, 0.0),
        Parameter::free("ln_p_sat", psat0.ln()),
    ];
    let problem = FitProblem::new(params, table.len(), |p, r| {
        for (i, t) in table.iter().enumerate() {
            r[i] = p[0] * (1.0 + t.power / p[1].exp()).sqrt() - t.fwhm;
        }
    })
    .with_weights(weights);
    let mut result = minimize(&problem, &MinimizeOptions::default())?;
    drop(problem);
    let p_sat = result.value("ln_p_sat").exp();
    if !(pmin < p_sat && p_sat < pmax) {
        result.status = FitStatus::RankDeficient;
    }
    Ok(LinewidthSweep {
        gamma: result.value("gamma"),
        gamma_error: result.error("gamma"),
        p_sat,
        p_sat_error: p_sat * result.error("ln_p_sat"),
        table,
        result,
    })
}

/// Two-channel saturation data: detected coherent power and fluorescence rate vs incident power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationData {
    pub powers: Vec<f64>,
    pub coherent: Vec<f64>,
    pub fluorescence: Vec<f64>,
    /// Standard deviations; `None` weights each channel uniformly relative to its maximum.
    #[serde(default)]
    pub coherent_sigma: Option<Vec<f64>>,
    #[serde(default)]
    pub fluorescence_sigma: Option<Vec<f64>>,
}

/// Result of [`fit_saturation_curves`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationFit {
    /// Parameters `ln_p_sat`, `coherent_scale`, `fluorescence_scale`.
    pub joint: FitResult,
    pub coherent_only: FitResult,
    pub fluorescence_only: FitResult,
    pub p_sat: f64,
    pub p_sat_error: f64,
    /// Joint χ² over the sum of the single-channel χ²; large values flag
    /// channels that disagree on P_sat.
    pub inconsistency: f64,
}

fn coherent_curve(s: f64) -> f64 {
    s / ((1.0 + s) * (1.0 + s))
}

fn fluorescence_curve(s: f64) -> f64 {
    s / (1.0 + s)
}

/// Jointly fits `a·S/(1+S)²` to the coherent channel and `b·S/(1+S)` to the
/// fluorescence channel with S = P/P_sat shared.
pub fn fit_saturation_curves(data: &SaturationData) -> Result<SaturationFit> {
    let n = data.powers.len();
    if data.coherent.len() != n || data.fluorescence.len() != n {
        return Err(invalid("saturation data", "all channels need one value per power"));
    }
    if n < 3 {
        return Err(Error::InsufficientData(format!("{n} powers, need at least 3")));
    }
    if data.powers.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(invalid("powers", "must be positive and finite"));
    }
    let channel_weights = |values: &[f64], sigma: &Option<Vec<f64>>| -> Result<Vec<f64>> {
        match sigma {
            Some(s) if s.len() != n => Err(invalid("sigma", format!("expected {n} values, got {}", s.len()))),
            Some(s) if s.iter().any(|v| !(v.is_finite() && *v > 0.0)) => Err(invalid("sigma", "must be positive")),
            Some(s) => Ok(s.iter().map(|v| 1.0 / (v * v)).collect()),
            None => {
                let m = values.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
                Ok(vec![1.0 / (m * m); n])
            }
        }
    };
    let wc = channel_weights(&data.coherent, &data.coherent_sigma)?;
    let wf = channel_weights(&data.fluorescence, &data.fluorescence_sigma)?;

    // P_sat start: scan on a log grid with linear amplitudes
    let pmin = data.powers.iter().copied().fold(f64::INFINITY, f64::min);
    let pmax = data.powers.iter().copied().fold(0.0, f64::max);
    let mut best = (f64::INFINITY, pmin);
    for psat in logspace(pmin / 10.0, pmax * 10.0, 200) {
        let mut cost = 0.0;
        for (vals, w, curve) in [
            (&data.coherent, &wc, coherent_curve as fn(f64) -> f64),
            (&data.fluorescence, &wf, fluorescence_curve as fn(f64) -> f64),
        ] {
            let col: Vec<f64> = data.powers.iter().map(|p| curve(p / psat)).collect();
            if let Some((_, c)) = linear_lstsq(&[col], vals, w) {
                cost += c;
            }
        }
        if cost < best.0 {
            best = (cost, psat);
        }
    }
    let psat0 = best.1;
    let amp = |vals: &[f64], w: &[f64], curve: fn(f64) -> f64| {
        let col: Vec<f64> = data.powers.iter().map(|p| curve(p / psat0)).collect();
        linear_lstsq(&[col], vals, w).map(|(c, _)| c[0].max(1e-300)).unwrap_or(1.0)
    };
    let a0 = amp(&data.coherent, &wc, coherent_curve);
    let b0 = amp(&data.fluorescence, &wf, fluorescence_curve);

    let single = |vals: &[f64], w: &[f64], curve: fn(f64) -> f64, scale0: f64, name: &str| {
        let params = vec![Parameter::free("ln_p_sat", psat0.ln()), Parameter::at_least(name, scale0, 0.0)];
        let problem = FitProblem::new(params, n, |p, r| {
            let psat = p[0].exp();
            for i in 0..n {
                r[i] = p[1] * curve(data.powers[i] / psat) - vals[i];
            }
        })
        .with_weights(w.to_vec());
        minimize(&problem, &MinimizeOptions::default())
    };
    let coherent_only = single(&data.coherent, &wc, coherent_curve, a0, "coherent_scale")?;
    let fluorescence_only = single(&data.fluorescence, &wf, fluorescence_curve, b0, "fluorescence_scale")?;

    let params = vec![
        Parameter::free("ln_p_sat", psat0.ln()),
        Parameter::at_least("coherent_scale", a0, 0.0),
        Parameter::at_least("fluorescence_scale", b0, 0.0),
    ];
    let weights: Vec<f64> = wc.iter().chain(&wf).copied().collect();
    let problem = FitProblem::new(params, 2 * n, |p, r| {
        let psat = p[0].exp();
        for i in 0..n {
            let s = data.powers[i] / psat;
            r[i] = p[1] * coherent_curve(s) - data.coherent[i];
            r[n + i] = p[2] * fluorescence_curve(s) - data.fluorescence[i];
        }
    })
    .with_weights(weights);
    let joint = minimize(&problem, &MinimizeOptions::default())?;
    let p_sat = joint.value("ln_p_sat").exp();
    let singles = coherent_only.chi_square + fluorescence_only.chi_square;
    let inconsistency = if singles > 0.0 { joint.chi_square / singles } else { f64::INFINITY };
    Ok(SaturationFit {
        p_sat,
        p_sat_error: p_sat * joint.error("ln_p_sat"),
        joint,
        coherent_only,
        fluorescence_only,
        inconsistency,
    })
}
