//! Jones calculus for the detection path (quarter waveplate and polarizer) and
//! the resulting transformation of the extinction triple (A, B, ψ).
//!
//! Angles are radians from the lab y axis, which is the laser polarization.
//! A linear state at angle θ is (sin θ, cos θ) in the (x, y) basis.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimation::{extinction_shape, linear_lstsq, minimize, FitProblem, FitResult, MinimizeOptions, Parameter, Weighting};
use crate::trace::{GridKind, Provenance, SpectrumTrace, ValueUnit};
use crate::units::wrap_phase;

type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesVector {
    pub x: C64,
    pub y: C64,
}

impl JonesVector {
    pub fn new(x: C64, y: C64) -> Self {
        Self { x, y }
    }

    /// Unit linear polarization at `angle` from the y axis.
    pub fn linear(angle: f64) -> Self {
        Self::new(C64::new(angle.sin(), 0.0), C64::new(angle.cos(), 0.0))
    }

    pub fn intensity(&self) -> f64 {
        self.x.norm_sqr() + self.y.norm_sqr()
    }

    /// Hermitian product conj(self)·other.
    pub fn inner(&self, other: &JonesVector) -> C64 {
        self.x.conj() * other.x + self.y.conj() * other.y
    }

    fn as_vector(&self) -> Vector2<C64> {
        Vector2::new(self.x, self.y)
    }

    fn from_vector(v: Vector2<C64>) -> Self {
        Self::new(v[0], v[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    QuarterWaveplate,
    Polarizer,
    Rotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainElement {
    pub kind: ElementKind,
    /// Fast axis, transmission axis or rotation angle (radians from y).
    pub angle: f64,
    /// Intensity fraction a polarizer passes on its blocked axis.
    pub extinction_ratio: f64,
}

impl ChainElement {
    pub fn quarter_waveplate(angle: f64) -> Self {
        Self {
            kind: ElementKind::QuarterWaveplate,
            angle,
            extinction_ratio: 0.0,
        }
    }

    pub fn polarizer(angle: f64) -> Self {
        Self {
            kind: ElementKind::Polarizer,
            angle,
            extinction_ratio: 0.0,
        }
    }

    /// Polarizer leaking `extinction_ratio` of the intensity on its blocked axis
    /// (1/300 for a 300:1 polarizer).
    pub fn leaky_polarizer(angle: f64, extinction_ratio: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&extinction_ratio) {
            return Err(invalid(
                "extinction_ratio",
                format!("must lie in [0, 1], got {extinction_ratio}"),
            ));
        }
        Ok(Self {
            extinction_ratio,
            ..Self::polarizer(angle)
        })
    }

    pub fn rotation(angle: f64) -> Self {
        Self {
            kind: ElementKind::Rotation,
            angle,
            extinction_ratio: 0.0,
        }
    }

    pub fn matrix(&self) -> Matrix2<C64> {
        let (s, c) = self.angle.sin_cos();
        let along = Matrix2::new(s * s, s * c, s * c, c * c).map(|v| C64::new(v, 0.0));
        let across = Matrix2::new(c * c, -s * c, -s * c, s * s).map(|v| C64::new(v, 0.0));
        match self.kind {
            ElementKind::QuarterWaveplate => along + across * I,
            ElementKind::Polarizer => along + across * C64::new(self.extinction_ratio.sqrt(), 0.0),
            ElementKind::Rotation => Matrix2::new(c, s, -s, c).map(|v| C64::new(v, 0.0)),
        }
    }
}

/// Ordered optical elements, input side first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolarizationChain {
    pub elements: Vec<ChainElement>,
}

impl PolarizationChain {
    pub fn new(elements: Vec<ChainElement>) -> Self {
        Self { elements }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn then(mut self, element: ChainElement) -> Self {
        self.elements.push(element);
        self
    }

    pub fn matrix(&self) -> Matrix2<C64> {
        self.elements
            .iter()
            .fold(Matrix2::new(ONE, ZERO, ZERO, ONE), |acc, e| e.matrix() * acc)
    }
}

pub fn apply_chain(chain: &PolarizationChain, v: &JonesVector) -> JonesVector {
    JonesVector::from_vector(chain.matrix() * v.as_vector())
}

/// (A, B, ψ) of the extinction model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionTriple {
    pub a: f64,
    pub b: f64,
    pub psi: f64,
}

/// Triple after the chain, relative to the incident laser intensity.
///
/// The detected signal is `I_e·(T + a·L − b·L·(Δ cos ψ + (γ/2) sin ψ))` with
/// `T = laser_transmission`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformedTriple {
    pub a: f64,
    pub b: f64,
    pub psi: f64,
    pub laser_transmission: f64,
}

impl TransformedTriple {
    /// Triple relative to the detected laser intensity.
    ///
    /// Transmissions at or below 1e-20 count as a blocked laser.
    pub fn normalized(&self) -> Result<ExtinctionTriple> {
        if !(self.laser_transmission > 1e-20) {
            return Err(Error::Degenerate(
                "the chain blocks the laser, so the normalized triple is undefined".into(),
            ));
        }
        Ok(ExtinctionTriple {
            a: self.a / self.laser_transmission,
            b: self.b / self.laser_transmission,
            psi: self.psi,
        })
    }
}

/// Transforms (A₀, B₀, ψ₀), defined for a dipole parallel to the laser and no
/// optics, through `chain`.
///
/// The coherent field follows the dipole axis and interferes with the laser
/// through conj(J·e_laser)·(J·d); the incoherent A-term adds in intensity as
/// |J·d|². Never fails; a blocked laser shows up as zero transmission.
pub fn detected_components(
    chain: &PolarizationChain,
    e_laser: &JonesVector,
    dipole_angle: f64,
    a0: f64,
    b0: f64,
    psi0: f64,
) -> TransformedTriple {
    let out_laser = apply_chain(chain, e_laser);
    let out_dipole = apply_chain(chain, &JonesVector::linear(dipole_angle));
    let overlap = out_laser.inner(&out_dipole);
    TransformedTriple {
        a: a0 * out_dipole.intensity(),
        b: b0 * overlap.norm(),
        psi: wrap_phase(psi0 - overlap.arg()),
        laser_transmission: out_laser.intensity(),
    }
}

/// [`detected_components`] normalized by the detected laser intensity.
pub fn transform_extinction_triple(
    chain: &PolarizationChain,
    e_laser: &JonesVector,
    dipole_angle: f64,
    a0: f64,
    b0: f64,
    psi0: f64,
) -> Result<ExtinctionTriple> {
    detected_components(chain, e_laser, dipole_angle, a0, b0, psi0).normalized()
}

/// Laser, dipole and polarizer orientation of the component-separation setup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub laser_angle: f64,
    pub dipole_angle: f64,
    pub polarizer_angle: f64,
    pub polarizer_leakage: f64,
}

impl Default for Geometry {
    /// Dipole at 45° and polarizer at 80° from the laser.
    fn default() -> Self {
        Self {
            laser_angle: 0.0,
            dipole_angle: 45f64.to_radians(),
            polarizer_angle: 80f64.to_radians(),
            polarizer_leakage: 0.0,
        }
    }
}

impl Geometry {
    pub fn laser(&self) -> JonesVector {
        JonesVector::linear(self.laser_angle)
    }

    /// Quarter waveplate at `theta` followed by the polarizer.
    pub fn chain(&self, theta: f64) -> PolarizationChain {
        PolarizationChain::new(vec![
            ChainElement::quarter_waveplate(theta),
            ChainElement {
                kind: ElementKind::Polarizer,
                angle: self.polarizer_angle,
                extinction_ratio: self.polarizer_leakage,
            },
        ])
    }

    pub fn components(&self, theta: f64, a0: f64, b0: f64, psi0: f64) -> TransformedTriple {
        detected_components(&self.chain(theta), &self.laser(), self.dipole_angle, a0, b0, psi0)
    }
}

/// Normalized spectra of one sample seen through the QWP at each `theta`.
///
/// `gamma` is the linewidth entering L and the B-term.
pub fn qwp_series(
    geometry: &Geometry,
    thetas: &[f64],
    truth: ExtinctionTriple,
    gamma: f64,
    center: f64,
    grid: &[f64],
) -> Result<Vec<(f64, SpectrumTrace)>> {
    thetas
        .iter()
        .map(|&theta| {
            let t = geometry.components(theta, truth.a, truth.b, truth.psi).normalized()?;
            let meta = Provenance::new("qwp_series")
                .with_param("theta", theta)
                .with_param("A0", truth.a)
                .with_param("B0", truth.b)
                .with_param("psi0", truth.psi)
                .with_param("gamma", gamma);
            let trace = SpectrumTrace::from_fn(
                GridKind::LaserDetuning,
                ValueUnit::Transmission,
                grid.to_vec(),
                meta,
                |d| extinction_shape(d - center, t.a, t.b, t.psi, gamma),
            )?;
            Ok((theta, trace))
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeparationOptions {
    pub weighting: Weighting,
    pub minimize: MinimizeOptions,
}

/// Result of [`separate_components`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub a0: f64,
    pub b0: f64,
    pub psi0: f64,
    pub gamma: f64,
    pub center: f64,
    /// Parameters `A0`, `B0`, `psi0`, `gamma`, `center`, then `base_<i>` per trace.
    pub result: FitResult,
}

impl Separation {
    pub fn error(&self, name: &str) -> f64 {
        self.result.error(name)
    }
}

/// Jointly fits a QWP series with one (A₀, B₀, ψ₀, γ, center) and a baseline per trace.
///
/// Needs at least three distinct waveplate angles (mod π).
pub fn separate_components(
    series: &[(f64, SpectrumTrace)],
    geometry: &Geometry,
    opts: &SeparationOptions,
) -> Result<Separation> {
    let mut distinct: Vec<f64> = series.iter().map(|(t, _)| t.rem_euclid(PI)).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if distinct.len() > 1 && (distinct[0] + PI - distinct[distinct.len() - 1]).abs() < 1e-9 {
        distinct.pop();
    }
    if distinct.len() < 3 {
        return Err(Error::RankDeficient(format!(
            "{} distinct waveplate angles, need at least 3",
            distinct.len()
        )));
    }
    for (theta, trace) in series {
        if trace.grid_kind != GridKind::LaserDetuning {
            return Err(Error::UnitMismatch {
                expected: GridKind::LaserDetuning.to_string(),
                found: trace.grid_kind.to_string(),
            });
        }
        if trace.len() < 8 {
            return Err(Error::InsufficientData(format!("trace at θ={theta} has {} points", trace.len())));
        }
    }

    // per-trace unit-amplitude coefficients: A' = A₀·α, B'e^{iψ'} = B₀e^{iψ₀}·conj(c)
    let mut alpha = Vec::with_capacity(series.len());
    let mut coupling = Vec::with_capacity(series.len());
    for (theta, _) in series {
        let raw = geometry.components(*theta, 1.0, 1.0, 0.0);
        let unit = raw.normalized()?;
        alpha.push(unit.a);
        coupling.push(C64::from_polar(unit.b, unit.psi));
    }
    let weights: Vec<Vec<f64>> = series
        .iter()
        .map(|(_, t)| opts.weighting.resolve(t))
        .collect::<Result<_>>()?;

    let (center, gamma, (a0, p0, q0), bases) = initialize(series, &weights, &alpha, &coupling)?;
    let b0 = (p0 * p0 + q0 * q0).sqrt();
    let psi0 = p0.atan2(q0);

    let mut params = vec![
        Parameter::at_least("A0", a0.max(0.0), 0.0),
        Parameter::at_least("B0", b0, 0.0),
        Parameter::free("psi0", psi0),
        Parameter::at_least("gamma", gamma, 0.0),
        Parameter::free("center", center),
    ];
    for (i, b) in bases.iter().enumerate() {
        params.push(Parameter::free(&format!("base_{i}"), *b));
    }
    let offsets: Vec<usize> = series
        .iter()
        .scan(0, |acc, (_, t)| {
            let start = *acc;
            *acc += t.len();
            Some(start)
        })
        .collect();
    let n_total: usize = series.iter().map(|(_, t)| t.len()).sum();
    let problem = FitProblem::new(params, n_total, |p, r| {
        let z0 = C64::from_polar(p[1], p[2]);
        for (k, (_, trace)) in series.iter().enumerate() {
            let z = z0 * coupling[k];
            let (a, b, psi) = (p[0] * alpha[k], z.norm(), z.arg());
            let base = p[5 + k];
            for (j, (x, y)) in trace.iter().enumerate() {
                r[offsets[k] + j] = base * extinction_shape(x - p[4], a, b, psi, p[3]) - y;
            }
        }
    })
    .with_weights(weights.concat());
    let mut result = minimize(&problem, &opts.minimize)?;
    result.values[2] = wrap_phase(result.values[2]);
    Ok(Separation {
        a0: result.values[0],
        b0: result.values[1],
        psi0: result.values[2],
        gamma: result.values[3],
        center: result.values[4],
        result,
    })
}

type Init = (f64, f64, (f64, f64, f64), Vec<f64>);

/// Coarse (center, γ) scan with per-trace linear fits, then a linear solve for
/// (A₀, B₀ sin ψ₀, B₀ cos ψ₀).
fn initialize(series: &[(f64, SpectrumTrace)], weights: &[Vec<f64>], alpha: &[f64], coupling: &[C64]) -> Result<Init> {
    let first = &series[0].1;
    let (lo, hi) = (first.grid()[0], first.grid()[first.len() - 1]);
    let span = hi - lo;
    let step = span / (first.len() - 1) as f64;
    let widths = crate::trace::logspace((1.5 * step).max(1e-3 * span), span / 3.0, 30);
    let n_centers = first.len().min(81);
    let mut best: Option<(f64, f64, f64)> = None;
    for ic in 0..n_centers {
        let c = lo + span * ic as f64 / (n_centers - 1) as f64;
        for &g in &widths {
            let mut cost = 0.0;
            for ((_, t), w) in series.iter().zip(weights) {
                let cols = lorentz_columns(t, c, g);
                cost += linear_lstsq(&cols, t.values(), w).map(|(_, c)| c).unwrap_or(f64::INFINITY);
            }
            if best.is_none_or(|b| cost < b.0) {
                best = Some((cost, c, g));
            }
        }
    }
    let (_, center, gamma) = best.ok_or_else(|| Error::Degenerate("initialization scan failed".into()))?;

    let mut rows: Vec<[f64; 3]> = Vec::new();
    let mut rhs = Vec::new();
    let mut bases = Vec::new();
    for (k, ((_, t), w)) in series.iter().zip(weights).enumerate() {
        let cols = lorentz_columns(t, center, gamma);
        let (coef, _) = linear_lstsq(&cols, t.values(), w).ok_or_else(|| Error::Degenerate("linear fit failed".into()))?;
        let base = if coef[0] != 0.0 { coef[0] } else { 1.0 };
        bases.push(base);
        let (cr, ci) = (coupling[k].re, coupling[k].im);
        // P' = P₀ cr + Q₀ ci, Q' = Q₀ cr − P₀ ci with Z = Q + iP
        rows.push([alpha[k], -(gamma / 2.0) * cr, -(gamma / 2.0) * ci]);
        rhs.push(coef[1] / base);
        rows.push([0.0, ci, -cr]);
        rhs.push(coef[2] / base);
    }
    let cols: Vec<Vec<f64>> = (0..3).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let (sol, _) = linear_lstsq(&cols, &rhs, &vec![1.0; rhs.len()]).ok_or_else(|| Error::Degenerate("linear solve failed".into()))?;
    Ok((center, gamma, (sol[0], sol[1], sol[2]), bases))
}

fn lorentz_columns(t: &SpectrumTrace, center: f64, gamma: f64) -> Vec<Vec<f64>> {
    let mut ones = Vec::with_capacity(t.len());
    let mut l = Vec::with_capacity(t.len());
    let mut ld = Vec::with_capacity(t.len());
    for &x in t.grid() {
        let d = x - center;
        let v = 1.0 / (d * d + gamma * gamma / 4.0);
        ones.push(1.0);
        l.push(v);
        ld.push(v * d);
    }
    vec![ones, l, ld]
}
