//! Intensity correlation g²(τ) of the resonantly driven two-level system and
//! Rabi-frequency extraction from measured or synthetic traces.

use serde::{Deserialize, Serialize};

use crate::csvio;
use crate::error::{invalid, Error, Result};
use crate::estimation::{linear_lstsq, minimize, FitProblem, FitResult, MinimizeOptions, Parameter};
use crate::measurement::{poisson_draw, substream, RNG_NAME};
use crate::physics::{saturation_at, DriveParams, MoleculeParams};
use crate::trace::{logspace, Provenance};
use crate::units::angular;

/// Decay and oscillation rates (per ns) of the closed form.
#[derive(Debug, Clone, Copy)]
struct G2Rates {
    /// (Γ + γ⊥)/2
    a: f64,
    /// Ω² − (Γ − γ⊥)²/4, signed
    b2: f64,
    /// a² + b2 = Γγ⊥ + Ω², always positive
    a2_plus_b2: f64,
}

fn rates(mol: &MoleculeParams, rabi: f64) -> G2Rates {
    let gpop = angular(mol.gamma0) * 1e-3;
    let gcoh = angular(mol.gamma) * 0.5e-3;
    let om = angular(rabi) * 1e-3;
    G2Rates {
        a: 0.5 * (gpop + gcoh),
        b2: om * om - 0.25 * (gpop - gcoh) * (gpop - gcoh),
        a2_plus_b2: gpop * gcoh + om * om,
    }
}

fn g2_from_rates(r: G2Rates, tau_ns: f64) -> f64 {
    let t = tau_ns.abs();
    let G2Rates { a, b2, a2_plus_b2 } = r;
    let damped = if b2 >= 0.0 {
        let b = b2.sqrt();
        let x = b * t;
        // sin(bt)/b without the 0/0 at b = 0
        let sinc_t = if x.abs() < 1e-4 { t * (1.0 - x * x / 6.0) } else { x.sin() / b };
        (-a * t).exp() * (x.cos() + a * sinc_t)
    } else {
        let k = (-b2).sqrt();
        let x = k * t;
        if x < 20.0 {
            let sinhc_t = if x < 1e-4 { t * (1.0 + x * x / 6.0) } else { x.sinh() / k };
            (-a * t).exp() * (x.cosh() + a * sinhc_t)
        } else {
            // a − k = (a² − k²)/(a + k) avoids cancellation when Ω is small
            let slow = a2_plus_b2 / (a + k);
            let fast = a + k;
            0.5 * ((1.0 + a / k) * (-slow * t).exp() + (1.0 - a / k) * (-fast * t).exp())
        }
    };
    1.0 - damped
}

/// g²(τ) for a resonant drive, `tau_ns` in ns (negative delays are mirrored).
///
/// Population decay Γ = 2πγ₀ and coherence decay πγ enter separately:
/// g²(τ) = 1 − e^{−aτ}[cos bτ + (a/b) sin bτ], a = (Γ + πγ)/2,
/// b² = (2πΩ)² − (Γ − πγ)²/4.
pub fn g2(tau_ns: f64, mol: &MoleculeParams, drive: &DriveParams) -> Result<f64> {
    if drive.detuning != 0.0 {
        return Err(Error::OffResonance(drive.detuning));
    }
    if !tau_ns.is_finite() {
        return Err(invalid("tau", "must be finite"));
    }
    Ok(g2_from_rates(rates(mol, drive.rabi), tau_ns))
}

/// Oscillation frequency of g² in cyclic MHz, zero in the overdamped regime.
pub fn g2_oscillation_frequency(mol: &MoleculeParams, rabi: f64) -> f64 {
    let b2 = rates(mol, rabi).b2;
    if b2 > 0.0 {
        b2.sqrt() * 1e3 / (2.0 * std::f64::consts::PI)
    } else {
        0.0
    }
}

/// Normalized second-order correlation sampled at delays in ns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Trace {
    delays: Vec<f64>,
    values: Vec<f64>,
    pub meta: Provenance,
}

impl G2Trace {
    pub fn new(delays: Vec<f64>, values: Vec<f64>, meta: Provenance) -> Result<Self> {
        if delays.len() != values.len() {
            return Err(Error::InvalidGrid(format!(
                "{} delays but {} values",
                delays.len(),
                values.len()
            )));
        }
        if delays.is_empty() {
            return Err(Error::InvalidGrid("empty trace".into()));
        }
        if delays.iter().any(|d| !d.is_finite()) || delays.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("delays must be finite and strictly increasing".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(invalid("g2", format!("values must be finite and non-negative, got {v}")));
        }
        Ok(Self { delays, values, meta })
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    pub fn to_csv(&self) -> String {
        csvio::write(&self.meta.to_lines(), ("delay_ns", "g2"), &self.delays, &self.values)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let parsed = csvio::parse(text)?;
        if parsed.header != ("delay_ns".to_string(), "g2".to_string()) {
            return Err(Error::Parse(format!(
                "expected header `delay_ns,g2`, found `{},{}`",
                parsed.header.0, parsed.header.1
            )));
        }
        let mut meta = Provenance::default();
        for (k, v) in &parsed.meta {
            if !meta.absorb(k, v)? {
                return Err(Error::Parse(format!("unknown metadata key `{k}`")));
            }
        }
        Self::new(parsed.x, parsed.y, meta)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: G2Trace = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(raw.delays, raw.values, raw.meta)
    }

    /// Divides by the mean over the outer 20% of the delay window.
    pub fn normalize_plateau(&self) -> Result<Self> {
        let reach = self.delays.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        let tail: Vec<f64> = self
            .delays
            .iter()
            .zip(&self.values)
            .filter(|(d, _)| d.abs() >= 0.8 * reach)
            .map(|(_, v)| *v)
            .collect();
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        if !(mean > 0.0) {
            return Err(Error::Degenerate("plateau mean is zero".into()));
        }
        let mut meta = self.meta.clone();
        meta.notes.insert("normalization".into(), "plateau_last_20pct".into());
        Self::new(self.delays.clone(), self.values.iter().map(|v| v / mean).collect(), meta)
    }

    /// Gaussian smoothing with standard deviation `sigma_ns`, for detector jitter.
    ///
    /// Requires uniformly spaced delays; the kernel is renormalized at the edges.
    pub fn smooth_jitter(&self, sigma_ns: f64) -> Result<Self> {
        if !(sigma_ns.is_finite() && sigma_ns >= 0.0) {
            return Err(invalid("jitter", format!("must be non-negative, got {sigma_ns}")));
        }
        if sigma_ns == 0.0 || self.len() < 2 {
            return Ok(self.clone());
        }
        let step = self.delays[1] - self.delays[0];
        let uniform = self
            .delays
            .windows(2)
            .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step.abs().max(1.0));
        if !uniform {
            return Err(Error::InvalidGrid("jitter smoothing needs uniform delays".into()));
        }
        let reach = (4.0 * sigma_ns / step).ceil() as isize;
        let kernel: Vec<f64> = (-reach..=reach)
            .map(|k| (-0.5 * (k as f64 * step / sigma_ns).powi(2)).exp())
            .collect();
        let n = self.len() as isize;
        let values = (0..n)
            .map(|i| {
                let (mut acc, mut norm) = (0.0, 0.0);
                for (j, w) in (-reach..=reach).zip(&kernel) {
                    let k = i + j;
                    if (0..n).contains(&k) {
                        acc += w * self.values[k as usize];
                        norm += w;
                    }
                }
                acc / norm
            })
            .collect();
        let mut meta = self.meta.clone();
        meta.params.insert("jitter_ns".into(), sigma_ns);
        Self::new(self.delays.clone(), values, meta)
    }
}

/// Samples the closed-form g² at the given delays (ns).
pub fn g2_trace(mol: &MoleculeParams, drive: &DriveParams, delays: Vec<f64>) -> Result<G2Trace> {
    if drive.detuning != 0.0 {
        return Err(Error::OffResonance(drive.detuning));
    }
    let r = rates(mol, drive.rabi);
    let values = delays.iter().map(|&t| g2_from_rates(r, t)).collect();
    let meta = Provenance::new("g2")
        .with_param("rabi", drive.rabi)
        .with_param("gamma0", mol.gamma0)
        .with_param("gamma", mol.gamma);
    G2Trace::new(delays, values, meta)
}

/// Coincidence histogram with `plateau_counts` expected per bin at large delay,
/// one Poisson draw per bin, normalized by the plateau mean.
pub fn simulate_coincidences(ideal: &G2Trace, plateau_counts: f64, seed: u64) -> Result<G2Trace> {
    if !(plateau_counts.is_finite() && plateau_counts > 0.0) {
        return Err(invalid("plateau_counts", format!("must be positive, got {plateau_counts}")));
    }
    let counts: Vec<f64> = ideal
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| poisson_draw(&mut substream(seed, i as u64), v * plateau_counts) as f64)
        .collect();
    let mut meta = ideal.meta.clone();
    meta.generator = "simulate_coincidences".into();
    meta.params.insert("plateau_counts".into(), plateau_counts);
    meta.seed = Some(seed);
    meta.rng = Some(RNG_NAME.into());
    G2Trace::new(ideal.delays.clone(), counts, meta)?.normalize_plateau()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RabiFitOptions {
    /// Fit γ₀ as well instead of holding it at the molecule's value.
    pub float_gamma0: bool,
}

/// Result of [`fit_rabi_from_g2`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiFit {
    pub rabi: f64,
    pub rabi_error: f64,
    /// Parameters `rabi`, `gamma0`, `scale`, `offset`.
    pub result: FitResult,
}

/// Fits `offset + scale·g²(τ; Ω)` to a trace and returns Ω ≥ 0.
///
/// The trace must reach at least three decay times 1/a.
pub fn fit_rabi_from_g2(trace: &G2Trace, mol: &MoleculeParams, opts: &RabiFitOptions) -> Result<RabiFit> {
    let reach = trace.delays.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    let decay_ns = 1.0 / rates(mol, 0.0).a;
    if reach < 3.0 * decay_ns {
        return Err(Error::InsufficientData(format!(
            "trace reaches {reach:.3} ns, need at least 3 decay times ({:.3} ns)",
            3.0 * decay_ns
        )));
    }
    if trace.len() < 8 {
        return Err(Error::InsufficientData(format!("{} points, need at least 8", trace.len())));
    }
    let (x, y) = (&trace.delays, &trace.values);
    let ones = vec![1.0; x.len()];

    // Ω start: scan a log grid up to the sampling limit with linear scale/offset
    let min_step = x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let nyquist_mhz = 1e3 / (4.0 * min_step);
    let mut candidates = vec![0.0];
    candidates.extend(logspace(1e-2 * mol.gamma0, nyquist_mhz.max(mol.gamma0), 600));
    let mut best = (f64::INFINITY, 0.0, 1.0, 0.0);
    for &om in &candidates {
        let r = rates(mol, om);
        let col: Vec<f64> = x.iter().map(|&t| g2_from_rates(r, t)).collect();
        if let Some((c, cost)) = linear_lstsq(&[col, ones.clone()], y, &ones) {
            if cost < best.0 {
                best = (cost, om, c[0], c[1]);
            }
        }
    }

    let params = vec![
        Parameter::free("rabi", best.1),
        Parameter::at_least("gamma0", mol.gamma0, 0.0).fixed(!opts.float_gamma0),
        Parameter::free("scale", best.2),
        Parameter::free("offset", best.3),
    ];
    let problem = FitProblem::new(params, x.len(), |p, r| {
        let mut m = *mol;
        m.gamma0 = p[1];
        let rr = rates(&m, p[0]);
        for i in 0..x.len() {
            r[i] = p[3] + p[2] * g2_from_rates(rr, x[i]) - y[i];
        }
    });
    let mut result = minimize(&problem, &MinimizeOptions::default())?;
    let i = result.names.iter().position(|n| n == "rabi").expect("rabi parameter");
    result.values[i] = result.values[i].abs();
    Ok(RabiFit {
        rabi: result.values[i],
        rabi_error: result.std_errors[i],
        result,
    })
}

/// Resonant saturation parameter for Rabi frequency `rabi`.
pub fn cross_check_saturation(rabi: f64, mol: &MoleculeParams) -> f64 {
    saturation_at(mol, rabi, 0.0)
}

/// Figure-style label `Ω=… MHz, S=…`.
pub fn saturation_annotation(rabi: f64, mol: &MoleculeParams) -> String {
    format!("Ω={:.1} MHz, S={:.2}", rabi, cross_check_saturation(rabi, mol))
}
