//! Frequency-domain forward models: the power-broadened Lorentzian, the
//! extinction spectrum, the resonant Mollow spectrum and the scanning
//! Fabry–Perot analyzer.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::BlochSystem;
use crate::error::{invalid, Error, Result};
use crate::physics::{saturation_at, total_emission_rate, DriveParams, MoleculeParams};
use crate::trace::{GridKind, Provenance, SpectrumTrace, ValueUnit};
use crate::units::{angular, wrap_phase};

/// L(Δ) = 1/(Δ² + γ²/4 + Ω²γ/2γ₀), in MHz⁻².
pub fn lorentzian_profile(delta: f64, mol: &MoleculeParams, rabi: f64) -> f64 {
    1.0 / (delta * delta + mol.gamma * mol.gamma / 4.0 + rabi * rabi * mol.gamma / (2.0 * mol.gamma0))
}

/// FWHM of [`lorentzian_profile`], γ√(1+S) with S the on-resonance saturation.
pub fn power_broadened_fwhm(mol: &MoleculeParams, rabi: f64) -> f64 {
    2.0 * (mol.gamma * mol.gamma / 4.0 + rabi * rabi * mol.gamma / (2.0 * mol.gamma0)).sqrt()
}

/// Detected/incident intensity I_d/I_e = 1 + A·L − B·L·(Δ cos ψ + (γ/2) sin ψ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionModel {
    /// Fluorescence coefficient (MHz²).
    pub a: f64,
    /// Interference coefficient (MHz).
    pub b: f64,
    pub psi: f64,
    pub mol: MoleculeParams,
    pub drive: DriveParams,
}

impl ExtinctionModel {
    pub fn new(a: f64, b: f64, psi: f64, mol: MoleculeParams, drive: DriveParams) -> Result<Self> {
        if !(a.is_finite() && a >= 0.0) {
            return Err(invalid("A", format!("must be non-negative, got {a}")));
        }
        if !(b.is_finite() && b >= 0.0) {
            return Err(invalid("B", format!("must be non-negative, got {b}")));
        }
        if !psi.is_finite() {
            return Err(invalid("psi", "must be finite"));
        }
        mol.validate()?;
        Ok(Self {
            a,
            b,
            psi: wrap_phase(psi),
            mol,
            drive,
        })
    }

    /// Builds the model from on-resonance heights: `a_peak` = A·L(0) is the
    /// fluorescence peak and `b_peak` = B·L(0)·γ/2 the ψ = π/2 extinction dip.
    pub fn from_peak_fractions(a_peak: f64, b_peak: f64, psi: f64, mol: MoleculeParams, drive: DriveParams) -> Result<Self> {
        let l0 = lorentzian_profile(0.0, &mol, drive.rabi);
        Self::new(a_peak / l0, b_peak / (l0 * mol.gamma / 2.0), psi, mol, drive)
    }

    pub fn a_peak(&self) -> f64 {
        self.a * lorentzian_profile(0.0, &self.mol, self.drive.rabi)
    }

    pub fn b_peak(&self) -> f64 {
        self.b * lorentzian_profile(0.0, &self.mol, self.drive.rabi) * self.mol.gamma / 2.0
    }

    pub fn value(&self, delta: f64) -> f64 {
        let l = lorentzian_profile(delta, &self.mol, self.drive.rabi);
        1.0 + self.a * l - self.b * l * (delta * self.psi.cos() + self.mol.gamma / 2.0 * self.psi.sin())
    }

    fn provenance(&self) -> Provenance {
        Provenance::new("extinction_spectrum")
            .with_param("A", self.a)
            .with_param("B", self.b)
            .with_param("psi", self.psi)
            .with_param("gamma0", self.mol.gamma0)
            .with_param("gamma", self.mol.gamma)
            .with_param("rabi", self.drive.rabi)
    }
}

/// Samples the extinction model on a grid of laser detunings (MHz).
pub fn extinction_spectrum(model: &ExtinctionModel, grid: Vec<f64>) -> Result<SpectrumTrace> {
    SpectrumTrace::from_fn(
        GridKind::LaserDetuning,
        ValueUnit::Transmission,
        grid,
        model.provenance(),
        |d| model.value(d),
    )
}

/// Incoherent resonance-fluorescence spectral density at emission detuning `nu` (MHz).
///
/// Normalized so the integral over `nu` equals the incoherent share of the
/// emission relative to the saturated rate, times `emission_scale`.
pub fn mollow_density(mol: &MoleculeParams, rabi: f64, nu: f64, emission_scale: f64) -> f64 {
    let sys = BlochSystem::new(mol, rabi, 0.0);
    let steady = sys.steady_state();
    mollow_density_with(&sys, &steady, nu, emission_scale)
}

fn mollow_density_with(
    sys: &BlochSystem,
    steady: &nalgebra::Vector3<crate::bloch::C64>,
    nu: f64,
    emission_scale: f64,
) -> f64 {
    // two-sided density per cyclic MHz is 2 Re F; dividing by the saturated
    // excited population 1/2 gives 4 Re F
    4.0 * emission_scale * sys.fluctuation_transform(steady, angular(nu)).re
}

/// Resonant Mollow spectrum on a grid of emission detunings (MHz).
pub fn mollow_spectrum(mol: &MoleculeParams, drive: &DriveParams, grid: Vec<f64>, emission_scale: f64) -> Result<SpectrumTrace> {
    if drive.detuning != 0.0 {
        return Err(Error::OffResonance(drive.detuning));
    }
    if !(emission_scale.is_finite() && emission_scale >= 0.0) {
        return Err(invalid("emission_scale", "must be non-negative"));
    }
    let sys = BlochSystem::new(mol, drive.rabi, 0.0);
    let steady = sys.steady_state();
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&nu| mollow_density_with(&sys, &steady, nu, emission_scale))
        .collect();
    let meta = Provenance::new("mollow_spectrum")
        .with_param("gamma0", mol.gamma0)
        .with_param("gamma", mol.gamma)
        .with_param("rabi", drive.rabi)
        .with_param("S", saturation_at(mol, drive.rabi, 0.0))
        .with_param("emission_scale", emission_scale);
    SpectrumTrace::new(GridKind::EmissionDetuning, ValueUnit::DensityPerMhz, grid, values, meta)
}

/// Integral of the resonant incoherent spectrum: 2(ρ₂₂ − |⟨σ₋⟩|²).
///
/// Equals S²/(1+S)² when γ = γ₀; pure dephasing moves weight from the coherent
/// into the incoherent part.
pub fn incoherent_weight(mol: &MoleculeParams, rabi: f64) -> f64 {
    let sys = BlochSystem::new(mol, rabi, 0.0);
    let x = sys.steady_state();
    (1.0 + x[2].re) - 2.0 * x[0].norm_sqr()
}

/// Coherent (elastic) weight 2|⟨σ₋⟩|² of the resonant emission.
pub fn coherent_weight(mol: &MoleculeParams, rabi: f64) -> f64 {
    let sys = BlochSystem::new(mol, rabi, 0.0);
    2.0 * sys.steady_state()[0].norm_sqr()
}

/// Flat phonon-wing pedestal passed by the short-pass filter.
///
/// The weight (1 − α_DW)·`shortpass_fraction` of the total emission is spread
/// uniformly over `bandwidth_mhz`.
pub fn phonon_pedestal_density(
    mol: &MoleculeParams,
    s: f64,
    shortpass_fraction: f64,
    bandwidth_mhz: f64,
    emission_scale: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&shortpass_fraction) {
        return Err(invalid("shortpass_fraction", "must lie in [0, 1]"));
    }
    if !(bandwidth_mhz > 0.0) {
        return Err(invalid("bandwidth_mhz", "must be positive"));
    }
    Ok((1.0 - mol.alpha_dw) * shortpass_fraction * emission_scale * total_emission_rate(s)? / bandwidth_mhz)
}

/// Scanning Fabry–Perot analyzer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpcParams {
    /// Free spectral range (MHz).
    pub fsr: f64,
    /// Instrument linewidth (MHz).
    pub fwhm: f64,
    pub peak_transmission: f64,
}

impl FpcParams {
    pub fn new(fsr: f64, fwhm: f64, peak_transmission: f64) -> Result<Self> {
        if !(fwhm > 0.0 && fwhm < fsr && fsr.is_finite()) {
            return Err(invalid("fpc", format!("need 0 < fwhm < fsr, got fwhm={fwhm}, fsr={fsr}")));
        }
        if !(peak_transmission > 0.0 && peak_transmission <= 1.0) {
            return Err(invalid("peak_transmission", format!("must lie in (0, 1], got {peak_transmission}")));
        }
        Ok(Self {
            fsr,
            fwhm,
            peak_transmission,
        })
    }

    /// Coefficient of finesse fixed by the FWHM.
    pub fn coefficient(&self) -> f64 {
        let s = (PI * self.fwhm / (2.0 * self.fsr)).sin();
        1.0 / (s * s)
    }

    pub fn finesse(&self) -> f64 {
        self.fsr / self.fwhm
    }

    /// ∫ T(ν) dν over one free spectral range.
    pub fn area_per_fsr(&self) -> f64 {
        self.peak_transmission * self.fsr / (1.0 + self.coefficient()).sqrt()
    }
}

/// Airy transmission T_pk / (1 + F sin²(πν/FSR)).
pub fn fpc_transmission(nu: f64, fpc: &FpcParams) -> f64 {
    let s = (PI * nu / fpc.fsr).sin();
    fpc.peak_transmission / (1.0 + fpc.coefficient() * s * s)
}

/// Narrow lines and pedestal added to the continuous emission before the analyzer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct InstrumentLines {
    /// Scattered laser light at the laser frequency (counts/s).
    pub laser_background_rate: f64,
    /// Coherent (elastic) emission, a delta line at the laser frequency (counts/s).
    pub coherent_delta_weight: f64,
    /// Flat phonon-wing pedestal (counts/s per MHz).
    pub pedestal_density: f64,
}

/// Detected rate versus analyzer scan position.
///
/// The emission grid doubles as the scan grid. It must be uniform, no coarser
/// than fwhm/4, and span at least one free spectral range.
pub fn convolve_instrument(emission: &SpectrumTrace, fpc: &FpcParams, lines: &InstrumentLines) -> Result<SpectrumTrace> {
    emission.require_unit(ValueUnit::DensityPerMhz)?;
    for (name, v) in [
        ("laser_background_rate", lines.laser_background_rate),
        ("coherent_delta_weight", lines.coherent_delta_weight),
        ("pedestal_density", lines.pedestal_density),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(invalid(name, format!("must be non-negative, got {v}")));
        }
    }
    let step = emission
        .uniform_step()
        .ok_or_else(|| Error::InvalidGrid("convolution requires a uniform grid with at least two points".into()))?;
    if step > fpc.fwhm / 4.0 {
        return Err(Error::Undersampled {
            step,
            limit: fpc.fwhm / 4.0,
        });
    }
    let grid = emission.grid();
    let span = grid[grid.len() - 1] - grid[0] + step;
    if span < fpc.fsr * (1.0 - 1e-9) {
        return Err(Error::InvalidGrid(format!(
            "grid spans {span} MHz, less than one free spectral range ({} MHz)",
            fpc.fsr
        )));
    }
    let density = emission.values();
    let delta_rate = lines.laser_background_rate + lines.coherent_delta_weight;
    let pedestal = lines.pedestal_density * fpc.area_per_fsr();
    let out: Vec<f64> = grid
        .par_iter()
        .map(|&scan| {
            let continuous: f64 = grid
                .iter()
                .zip(density)
                .map(|(&nu, &d)| d * fpc_transmission(scan - nu, fpc))
                .sum::<f64>()
                * step;
            (continuous + pedestal + delta_rate * fpc_transmission(scan, fpc)).max(0.0)
        })
        .collect();
    let mut meta = emission.meta.clone();
    meta.generator = format!("convolve_instrument({})", emission.meta.generator);
    meta.params.insert("fpc_fsr".into(), fpc.fsr);
    meta.params.insert("fpc_fwhm".into(), fpc.fwhm);
    meta.params.insert("fpc_peak_transmission".into(), fpc.peak_transmission);
    meta.params.insert("laser_background_rate".into(), lines.laser_background_rate);
    meta.params.insert("coherent_delta_weight".into(), lines.coherent_delta_weight);
    meta.params.insert("pedestal_density".into(), lines.pedestal_density);
    SpectrumTrace::new(GridKind::AnalyzerScan, ValueUnit::CountsPerSecond, grid.to_vec(), out, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{incoherent_emission_rate, saturation_parameter, IncidentRate};
    use crate::trace::linspace;

    fn mol() -> MoleculeParams {
        MoleculeParams::new(16.4, 17.0, 590.0, 0.25, 0.3).unwrap()
    }

    fn ideal() -> MoleculeParams {
        MoleculeParams::lifetime_limited(16.4, 590.0).unwrap()
    }

    fn drive(rabi: f64) -> DriveParams {
        DriveParams::resonant(rabi).unwrap()
    }

    #[test]
    fn lorentzian_examples() {
        let m = mol();
        assert!((lorentzian_profile(0.0, &m, 0.0) - 4.0 / (17.0 * 17.0)).abs() < 1e-15);
        let g = ideal();
        let rabi = g.gamma0 / 2f64.sqrt();
        assert!((power_broadened_fwhm(&g, rabi) - 2f64.sqrt() * g.gamma0).abs() < 1e-12);
        let half = lorentzian_profile(0.0, &g, rabi) / 2.0;
        let hw = power_broadened_fwhm(&g, rabi) / 2.0;
        assert!((lorentzian_profile(hw, &g, rabi) - half).abs() < 1e-15);
        for i in 0..1000 {
            let d = (i as f64 * 0.731).sin() * 300.0;
            assert_eq!(lorentzian_profile(d, &m, 12.0), lorentzian_profile(-d, &m, 12.0));
        }
    }

    #[test]
    fn fwhm_is_gamma_sqrt_one_plus_s() {
        let m = mol();
        for &rabi in &[0.0, 3.0, 17.0, 80.0] {
            let s = saturation_parameter(&m, &drive(rabi));
            assert!((power_broadened_fwhm(&m, rabi) - m.gamma * (1.0 + s).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn extinction_examples() {
        let m = mol();
        let flat = ExtinctionModel::new(0.0, 0.0, 1.0, m, drive(0.0)).unwrap();
        assert!(extinction_spectrum(&flat, linspace(-50.0, 50.0, 11)).unwrap().values().iter().all(|&v| v == 1.0));

        let dip = ExtinctionModel::from_peak_fractions(0.08, 0.30, PI / 2.0, m, drive(0.0)).unwrap();
        assert!((dip.value(0.0) - 0.78).abs() < 1e-12);

        let disp = ExtinctionModel::new(30.0, 2.0, 0.0, m, drive(0.0)).unwrap();
        for &d in &[1.0, 7.5, 40.0] {
            let sum = (disp.value(d) - 1.0) + (disp.value(-d) - 1.0);
            assert!((sum - 2.0 * disp.a * lorentzian_profile(d, &m, 0.0)).abs() < 1e-14);
        }
        assert!(ExtinctionModel::new(-1.0, 0.0, 0.0, m, drive(0.0)).is_err());
    }

    #[test]
    fn extinction_far_wings() {
        let m = mol();
        let model = ExtinctionModel::from_peak_fractions(0.02, 0.115, 0.7, m, drive(5.0)).unwrap();
        for &d in &[-2000.0, -101.0 * m.gamma, 101.0 * m.gamma, 5000.0] {
            assert!((model.value(d) - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn extinction_parity() {
        let m = mol();
        let a_only = ExtinctionModel::new(12.0, 0.0, 0.3, m, drive(3.0)).unwrap();
        let b_cos = ExtinctionModel::new(0.0, 2.0, 0.0, m, drive(3.0)).unwrap();
        for &d in &[0.5, 3.0, 17.0, 60.0] {
            assert!((a_only.value(d) - a_only.value(-d)).abs() < 1e-15);
            assert!(((b_cos.value(d) - 1.0) + (b_cos.value(-d) - 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn mollow_rejects_detuning() {
        let d = DriveParams::new(10.0, 1.0, 0.0, IncidentRate::CountsPerSecond(1.0)).unwrap();
        assert!(matches!(
            mollow_spectrum(&mol(), &d, linspace(-1.0, 1.0, 3), 1.0),
            Err(Error::OffResonance(_))
        ));
    }

    #[test]
    fn mollow_integral_matches_incoherent_rate() {
        let g = ideal();
        for &rabi in &[5.0, 16.4, 60.0] {
            let grid = linspace(-40_000.0, 40_000.0, 400_001);
            let t = mollow_spectrum(&g, &drive(rabi), grid, 1.0).unwrap();
            let s = saturation_parameter(&g, &drive(rabi));
            let expect = incoherent_emission_rate(s).unwrap();
            // Lorentzian tails beyond ±40 GHz carry ~γ/(π·40000) of the weight
            let tail = 2.0 * expect * g.gamma / (PI * 40_000.0);
            let rel = (t.integral() + tail - expect).abs() / expect;
            assert!(rel < 1e-3, "rabi={rabi} rel={rel}");
        }
    }

    #[test]
    fn incoherent_weight_with_dephasing() {
        let g = ideal();
        for &rabi in &[1.0, 10.0, 100.0] {
            let s = saturation_parameter(&g, &drive(rabi));
            assert!((incoherent_weight(&g, rabi) - incoherent_emission_rate(s).unwrap()).abs() < 1e-14);
            assert!((coherent_weight(&g, rabi) - s / ((1.0 + s) * (1.0 + s))).abs() < 1e-14);
        }
        let m = mol();
        let s = saturation_parameter(&m, &drive(10.0));
        let total = coherent_weight(&m, 10.0) + incoherent_weight(&m, 10.0);
        assert!((total - s / (1.0 + s)).abs() < 1e-14);
        assert!(incoherent_weight(&m, 10.0) > incoherent_emission_rate(s).unwrap());
    }

    #[test]
    fn mollow_symmetric_on_symmetric_grid() {
        let grid = linspace(-300.0, 300.0, 601);
        let t = mollow_spectrum(&mol(), &drive(80.0), grid, 1.0).unwrap();
        let v = t.values();
        let n = v.len();
        for i in 0..n / 2 {
            let rel = (v[i] - v[n - 1 - i]).abs() / v[i].abs().max(1e-300);
            assert!(rel < 1e-12, "{i}: {} {}", v[i], v[n - 1 - i]);
        }
    }

    #[test]
    fn mollow_strong_drive_peak_ratio() {
        let g = ideal();
        let rabi = 60.0 * g.gamma0;
        let center = mollow_density(&g, rabi, 0.0, 1.0);
        let side = mollow_density(&g, rabi, rabi, 1.0);
        assert!((center / side - 3.0).abs() < 0.05, "{}", center / side);
    }

    #[test]
    fn fpc_examples() {
        let fpc = FpcParams::new(356.0, 14.0, 0.15).unwrap();
        assert!((fpc_transmission(0.0, &fpc) - 0.15).abs() < 1e-15);
        assert!((fpc_transmission(356.0, &fpc) - 0.15).abs() < 1e-12);
        assert!((fpc_transmission(7.0, &fpc) - 0.075).abs() < 1e-12);
        assert!((fpc_transmission(-7.0, &fpc) - 0.075).abs() < 1e-12);
        assert!(FpcParams::new(10.0, 14.0, 0.15).is_err());
        assert!(FpcParams::new(356.0, 14.0, 0.0).is_err());
    }

    #[test]
    fn fpc_periodicity() {
        let fpc = FpcParams::new(356.0, 14.0, 0.15).unwrap();
        for i in 0..1000 {
            let nu = -700.0 + 1.4 * i as f64;
            assert!((fpc_transmission(nu, &fpc) - fpc_transmission(nu + fpc.fsr, &fpc)).abs() < 1e-12);
        }
    }

    fn fpc() -> FpcParams {
        FpcParams::new(356.0, 14.0, 0.15).unwrap()
    }

    /// `periods` whole FSRs sampled with `per_fsr` points, endpoint excluded.
    fn periodic_grid(periods: usize, per_fsr: usize) -> Vec<f64> {
        let f = fpc();
        let n = periods * per_fsr;
        let step = f.fsr / per_fsr as f64;
        (0..n).map(|i| -(periods as f64) * f.fsr / 2.0 + step * i as f64).collect()
    }

    #[test]
    fn pure_laser_line_reproduces_kernel() {
        let f = fpc();
        let grid = periodic_grid(1, 200);
        let zero = SpectrumTrace::new(
            GridKind::EmissionDetuning,
            ValueUnit::DensityPerMhz,
            grid.clone(),
            vec![0.0; grid.len()],
            Provenance::new("zero"),
        )
        .unwrap();
        let lines = InstrumentLines {
            laser_background_rate: 1000.0,
            ..Default::default()
        };
        let out = convolve_instrument(&zero, &f, &lines).unwrap();
        for (nu, v) in out.iter() {
            assert!((v - 1000.0 * fpc_transmission(nu, &f)).abs() < 1e-12);
        }
    }

    #[test]
    fn white_emission_gives_flat_output() {
        let f = fpc();
        let grid = periodic_grid(2, 200);
        let n = grid.len();
        let white = SpectrumTrace::new(
            GridKind::EmissionDetuning,
            ValueUnit::DensityPerMhz,
            grid,
            vec![3.0; n],
            Provenance::new("white"),
        )
        .unwrap();
        let out = convolve_instrument(&white, &f, &InstrumentLines::default()).unwrap();
        let expect = 3.0 * f.area_per_fsr() * 2.0;
        for v in out.values() {
            assert!((v - expect).abs() / expect < 1e-6, "{v} vs {expect}");
        }
    }

    #[test]
    fn convolution_errors() {
        let f = fpc();
        let coarse = SpectrumTrace::new(
            GridKind::EmissionDetuning,
            ValueUnit::DensityPerMhz,
            linspace(-400.0, 400.0, 101),
            vec![1.0; 101],
            Provenance::new("c"),
        )
        .unwrap();
        assert!(matches!(
            convolve_instrument(&coarse, &f, &InstrumentLines::default()),
            Err(Error::Undersampled { .. })
        ));
        let narrow = SpectrumTrace::new(
            GridKind::EmissionDetuning,
            ValueUnit::DensityPerMhz,
            linspace(-50.0, 50.0, 101),
            vec![1.0; 101],
            Provenance::new("n"),
        )
        .unwrap();
        assert!(convolve_instrument(&narrow, &f, &InstrumentLines::default()).is_err());
        let wrong_unit = coarse.with_values(ValueUnit::Counts, vec![1.0; 101], Provenance::new("u")).unwrap();
        assert!(matches!(
            convolve_instrument(&wrong_unit, &f, &InstrumentLines::default()),
            Err(Error::UnitMismatch { .. })
        ));
        let neg = InstrumentLines {
            laser_background_rate: -1.0,
            ..Default::default()
        };
        let ok = SpectrumTrace::new(
            GridKind::EmissionDetuning,
            ValueUnit::DensityPerMhz,
            periodic_grid(1, 100),
            vec![0.0; 100],
            Provenance::new("z"),
        )
        .unwrap();
        assert!(convolve_instrument(&ok, &f, &neg).is_err());
    }

    #[test]
    fn convolution_preserves_rate_per_fsr() {
        let f = fpc();
        let g = ideal();
        let grid = periodic_grid(3, 400);
        let step = f.fsr / 400.0;
        let em = mollow_spectrum(&g, &drive(60.0), grid, 5000.0).unwrap();
        let lines = InstrumentLines {
            laser_background_rate: 800.0,
            coherent_delta_weight: 150.0,
            pedestal_density: 0.0,
        };
        let out = convolve_instrument(&em, &f, &lines).unwrap();
        let total_in: f64 = em.values().iter().sum::<f64>() * step + 950.0;
        // mean over the central FSR
        let central = &out.values()[400..800];
        let mean = central.iter().sum::<f64>() / 400.0;
        let expect = total_in * f.area_per_fsr() / f.fsr;
        assert!((mean - expect).abs() / expect < 1e-3, "{mean} vs {expect}");
    }

    #[test]
    fn pedestal_density_scaling() {
        let m = mol();
        assert_eq!(phonon_pedestal_density(&m, 1.0, 0.0, 1000.0, 1.0).unwrap(), 0.0);
        let p = phonon_pedestal_density(&m, 1.0, 0.5, 1000.0, 2000.0).unwrap();
        assert!((p - 0.75 * 0.5 * 2000.0 * 0.5 / 1000.0).abs() < 1e-12);
        assert!(phonon_pedestal_density(&m, 1.0, 1.5, 1000.0, 1.0).is_err());
    }
}
