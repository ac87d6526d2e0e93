//! Emitter and drive parameters with the closed-form steady-state quantities
//! of a driven two-level system.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::units::{nm_to_m, wrap_phase};

/// Constants of the emitter's zero-phonon transition.
///
/// Linewidths are FWHM cyclic frequencies in MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoleculeParams {
    /// Natural (lifetime-limited) linewidth.
    pub gamma0: f64,
    /// Homogeneous linewidth, including pure dephasing.
    pub gamma: f64,
    /// Transition wavelength in nm.
    pub lambda_nm: f64,
    /// Debye–Waller factor.
    pub alpha_dw: f64,
    /// Franck–Condon factor.
    pub alpha_fc: f64,
}

impl MoleculeParams {
    pub fn new(gamma0: f64, gamma: f64, lambda_nm: f64, alpha_dw: f64, alpha_fc: f64) -> Result<Self> {
        let m = Self {
            gamma0,
            gamma,
            lambda_nm,
            alpha_dw,
            alpha_fc,
        };
        m.validate()?;
        Ok(m)
    }

    /// An ideal lifetime-limited two-level system.
    pub fn lifetime_limited(gamma0: f64, lambda_nm: f64) -> Result<Self> {
        Self::new(gamma0, gamma0, lambda_nm, 1.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0.is_finite() && self.gamma0 > 0.0) {
            return Err(invalid("gamma0", format!("must be positive and finite, got {}", self.gamma0)));
        }
        if !(self.gamma.is_finite() && self.gamma >= self.gamma0) {
            return Err(invalid(
                "gamma",
                format!("must satisfy gamma >= gamma0 = {}, got {}", self.gamma0, self.gamma),
            ));
        }
        if !(self.lambda_nm.is_finite() && self.lambda_nm > 0.0) {
            return Err(invalid("lambda_nm", format!("must be positive, got {}", self.lambda_nm)));
        }
        for (name, v) in [("alpha_dw", self.alpha_dw), ("alpha_fc", self.alpha_fc)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(invalid(name, format!("must lie in (0, 1], got {v}")));
            }
        }
        Ok(())
    }

    /// Excited-state lifetime in ns.
    pub fn lifetime_ns(&self) -> f64 {
        lifetime_from_linewidth(self.gamma0)
    }

    /// Pure-dephasing contribution to the homogeneous linewidth (MHz FWHM).
    pub fn dephasing_width(&self) -> f64 {
        self.gamma - self.gamma0
    }
}

/// How the incident beam strength is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "unit", content = "value", rename_all = "snake_case")]
pub enum IncidentRate {
    /// Detected photon rate (counts/s).
    CountsPerSecond(f64),
    /// Optical power (W).
    Watts(f64),
}

impl IncidentRate {
    pub fn value(&self) -> f64 {
        match *self {
            IncidentRate::CountsPerSecond(v) | IncidentRate::Watts(v) => v,
        }
    }
}

/// State of the excitation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    /// Rabi frequency Ω (MHz).
    pub rabi: f64,
    /// Laser detuning Δ (MHz).
    pub detuning: f64,
    /// Phase between the incident and coherently scattered light, in (−π, π].
    pub psi: f64,
    pub incident: IncidentRate,
}

impl DriveParams {
    pub fn new(rabi: f64, detuning: f64, psi: f64, incident: IncidentRate) -> Result<Self> {
        if !(rabi.is_finite() && rabi >= 0.0) {
            return Err(invalid("rabi", format!("must be non-negative, got {rabi}")));
        }
        if !detuning.is_finite() {
            return Err(invalid("detuning", "must be finite"));
        }
        if !psi.is_finite() {
            return Err(invalid("psi", "must be finite"));
        }
        let v = incident.value();
        if !(v.is_finite() && v >= 0.0) {
            return Err(invalid("incident_rate", format!("must be non-negative, got {v}")));
        }
        Ok(Self {
            rabi,
            detuning,
            psi: wrap_phase(psi),
            incident,
        })
    }

    /// Resonant drive at Rabi frequency `rabi`, unit incident rate, ψ = π/2.
    pub fn resonant(rabi: f64) -> Result<Self> {
        Self::new(rabi, 0.0, PI / 2.0, IncidentRate::CountsPerSecond(1.0))
    }
}

/// Saturation parameter S = (γΩ²/2γ₀) / (Δ² + γ²/4).
pub fn saturation_parameter(mol: &MoleculeParams, drive: &DriveParams) -> f64 {
    saturation_at(mol, drive.rabi, drive.detuning)
}

pub(crate) fn saturation_at(mol: &MoleculeParams, rabi: f64, detuning: f64) -> f64 {
    let num = mol.gamma * rabi * rabi / (2.0 * mol.gamma0);
    num / (detuning * detuning + mol.gamma * mol.gamma / 4.0)
}

/// Rabi frequency that produces saturation `s` at detuning `detuning`.
pub fn rabi_for_saturation(s: f64, mol: &MoleculeParams, detuning: f64) -> Result<f64> {
    check_saturation(s)?;
    let denom = detuning * detuning + mol.gamma * mol.gamma / 4.0;
    Ok((s * denom * 2.0 * mol.gamma0 / mol.gamma).sqrt())
}

fn check_saturation(s: f64) -> Result<()> {
    if s.is_nan() || s < 0.0 {
        return Err(invalid("S", format!("saturation parameter must be >= 0, got {s}")));
    }
    Ok(())
}

/// Total emission rate factor S/(1+S), the excited-state population relative to its
/// saturated value of one half.
pub fn total_emission_rate(s: f64) -> Result<f64> {
    check_saturation(s)?;
    if s.is_infinite() {
        return Ok(1.0);
    }
    Ok(s / (1.0 + s))
}

/// Coherent (elastic) emission rate factor S/(1+S)².
pub fn coherent_emission_rate(s: f64) -> Result<f64> {
    check_saturation(s)?;
    if s.is_infinite() {
        return Ok(0.0);
    }
    Ok(s / ((1.0 + s) * (1.0 + s)))
}

/// Incoherent (inelastic) emission rate factor S²/(1+S)².
pub fn incoherent_emission_rate(s: f64) -> Result<f64> {
    check_saturation(s)?;
    if s.is_infinite() {
        return Ok(1.0);
    }
    let f = s / (1.0 + s);
    Ok(f * f)
}

/// Natural linewidth (MHz) from the excited-state lifetime (ns): γ₀ = 1/(2πτ).
pub fn linewidth_from_lifetime(tau_ns: f64) -> Result<f64> {
    if !(tau_ns.is_finite() && tau_ns > 0.0) {
        return Err(invalid("lifetime_ns", format!("must be positive, got {tau_ns}")));
    }
    Ok(1e3 / (2.0 * PI * tau_ns))
}

/// Inverse of [`linewidth_from_lifetime`]. Infallible for a validated linewidth.
pub fn lifetime_from_linewidth(gamma0_mhz: f64) -> f64 {
    1e3 / (2.0 * PI * gamma0_mhz)
}

/// Resonant absorption cross section σ = 3λ²/2π in m².
pub fn absorption_cross_section(lambda_nm: f64) -> f64 {
    let l = nm_to_m(lambda_nm);
    3.0 * l * l / (2.0 * PI)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWaveDip {
    /// Relative transmission 1 − σ/F. Not clamped.
    pub transmission: f64,
    /// Set when σ > F, where the weak-coupling expression no longer applies.
    pub beyond_weak_coupling: bool,
}

/// Plane-wave transmission past an absorber of cross section `sigma` in a beam of area `beam_area` (m²).
pub fn plane_wave_dip(sigma: f64, beam_area: f64) -> Result<PlaneWaveDip> {
    if !(beam_area.is_finite() && beam_area > 0.0) {
        return Err(invalid("beam_area", format!("must be positive, got {beam_area}")));
    }
    let transmission = 1.0 - sigma / beam_area;
    Ok(PlaneWaveDip {
        transmission,
        beyond_weak_coupling: transmission < 0.0,
    })
}

/// Area of a disk whose diameter equals the focal FWHM (nm), in m².
pub fn disk_area_from_fwhm(fwhm_nm: f64) -> f64 {
    let r = nm_to_m(fwhm_nm) / 2.0;
    PI * r * r
}

/// Factor by which the zero-phonon coherent coupling is weaker than for an ideal
/// two-level system: 1/(α_DW α_FC).
pub fn coherent_coupling_penalty(mol: &MoleculeParams) -> f64 {
    1.0 / (mol.alpha_dw * mol.alpha_fc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mol(gamma0: f64, gamma: f64) -> MoleculeParams {
        MoleculeParams::new(gamma0, gamma, 590.0, 0.25, 0.3).unwrap()
    }

    fn drive(rabi: f64, detuning: f64) -> DriveParams {
        DriveParams::new(rabi, detuning, 0.0, IncidentRate::CountsPerSecond(1.0)).unwrap()
    }

    #[test]
    fn saturation_examples() {
        let m = mol(16.4, 16.4);
        let s = saturation_parameter(&m, &drive(16.4 / 2f64.sqrt(), 0.0));
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(saturation_parameter(&m, &drive(0.0, 37.0)), 0.0);
        let s0 = saturation_parameter(&m, &drive(10.0, 0.0));
        let s_half = saturation_parameter(&m, &drive(10.0, m.gamma / 2.0));
        assert!((s_half - s0 / 2.0).abs() < 1e-12 * s0);
    }

    #[test]
    fn rabi_for_saturation_inverts() {
        let m = mol(16.4, 17.0);
        for &s in &[0.0, 0.3, 1.0, 28.6] {
            let r = rabi_for_saturation(s, &m, 5.0).unwrap();
            assert!((saturation_parameter(&m, &drive(r, 5.0)) - s).abs() < 1e-12 * s.max(1.0));
        }
    }

    #[test]
    fn emission_rate_examples() {
        assert_eq!(total_emission_rate(0.0).unwrap(), 0.0);
        assert_eq!(total_emission_rate(1.0).unwrap(), 0.5);
        assert_eq!(total_emission_rate(3.0).unwrap(), 0.75);
        assert_eq!(coherent_emission_rate(1.0).unwrap(), 0.25);
        assert_eq!(coherent_emission_rate(0.0).unwrap(), 0.0);
        assert!((coherent_emission_rate(9.0).unwrap() - 0.09).abs() < 1e-15);
        assert_eq!(incoherent_emission_rate(0.0).unwrap(), 0.0);
        assert_eq!(incoherent_emission_rate(1.0).unwrap(), 0.25);
        assert_eq!(incoherent_emission_rate(f64::INFINITY).unwrap(), 1.0);
        assert!((incoherent_emission_rate(1e12).unwrap() - 1.0).abs() < 1e-11);
        let s = 1e-9;
        let ratio = coherent_emission_rate(s).unwrap() / total_emission_rate(s).unwrap();
        assert!((ratio - 1.0).abs() < 1e-8);
        assert!(total_emission_rate(-1.0).is_err());
        assert!(coherent_emission_rate(-0.1).is_err());
    }

    #[test]
    fn coherent_maximum_on_dense_grid() {
        let n = 1_000_001;
        let mut best = (0.0, f64::MIN);
        for i in 0..n {
            let s = 100.0 * i as f64 / (n - 1) as f64;
            let c = coherent_emission_rate(s).unwrap();
            assert!(c <= 0.25);
            if (s - 1.0).abs() > 1e-9 {
                assert!(c < 0.25);
            }
            if c > best.1 {
                best = (s, c);
            }
        }
        assert!((best.0 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn lifetime_examples() {
        let g = linewidth_from_lifetime(9.7).unwrap();
        assert!((g - 16.4).abs() < 0.05, "{g}");
        assert!((linewidth_from_lifetime(1.0 / (2.0 * PI)).unwrap() - 1000.0).abs() < 1e-9);
        // 2π · 159.15 = 999.969 by hand, so 1000 / 999.969 = 1.000031
        assert!((linewidth_from_lifetime(159.15).unwrap() - 1.000_031).abs() < 1e-6);
        assert!(linewidth_from_lifetime(0.0).is_err());
        assert!(linewidth_from_lifetime(-3.0).is_err());
    }

    #[test]
    fn cross_section_examples() {
        let s = absorption_cross_section(590.0);
        assert!((s - 1.6621e-13).abs() < 1e-16, "{s}");
        assert!((absorption_cross_section(1180.0) / s - 4.0).abs() < 1e-12);
        let l_nm = (2.0 * PI / 3.0).sqrt() * 1e9;
        assert!((absorption_cross_section(l_nm) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn plane_wave_examples() {
        assert_eq!(plane_wave_dip(2.0, 2.0).unwrap().transmission, 0.0);
        assert_eq!(plane_wave_dip(0.0, 2.0).unwrap().transmission, 1.0);
        assert!(plane_wave_dip(1.0, 0.0).is_err());
        let sigma = absorption_cross_section(590.0);
        let dip = plane_wave_dip(sigma, disk_area_from_fwhm(370.0)).unwrap();
        assert!((1.0 - dip.transmission - 1.546).abs() < 0.005, "{}", dip.transmission);
        assert!(dip.beyond_weak_coupling);
    }

    #[test]
    fn coupling_penalty_examples() {
        let m = mol(16.4, 17.0);
        assert!((coherent_coupling_penalty(&m) - 13.333_333_333).abs() < 1e-8);
        let ideal = MoleculeParams::lifetime_limited(16.4, 590.0).unwrap();
        assert_eq!(coherent_coupling_penalty(&ideal), 1.0);
        let half = MoleculeParams::new(16.4, 16.4, 590.0, 0.5, 0.5).unwrap();
        assert_eq!(coherent_coupling_penalty(&half), 4.0);
    }

    #[test]
    fn parameter_validation() {
        assert!(MoleculeParams::new(16.4, 10.0, 590.0, 0.25, 0.3).is_err());
        assert!(MoleculeParams::new(0.0, 10.0, 590.0, 0.25, 0.3).is_err());
        assert!(MoleculeParams::new(16.4, 17.0, 590.0, 0.0, 0.3).is_err());
        assert!(MoleculeParams::new(16.4, 17.0, 590.0, 0.25, 1.5).is_err());
        assert!(DriveParams::new(-1.0, 0.0, 0.0, IncidentRate::Watts(1.0)).is_err());
        assert!(DriveParams::new(1.0, 0.0, 0.0, IncidentRate::Watts(-1.0)).is_err());
        let d = DriveParams::new(1.0, 0.0, 3.0 * PI, IncidentRate::Watts(1.0)).unwrap();
        assert!((d.psi - PI).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn split_is_exact(log_s in -3.0f64..3.0) {
            let s = 10f64.powf(log_s);
            let c = coherent_emission_rate(s).unwrap();
            let i = incoherent_emission_rate(s).unwrap();
            let t = total_emission_rate(s).unwrap();
            prop_assert!((c + i - t).abs() <= 2.0 * f64::EPSILON * t);
            prop_assert!(c <= t);
        }

        #[test]
        fn saturation_scales_with_rabi_squared(r in 0.0f64..200.0, k in 0.0f64..10.0, d in -100.0f64..100.0) {
            let m = mol(16.4, 17.0);
            let s1 = saturation_parameter(&m, &drive(r, d));
            let sk = saturation_parameter(&m, &drive(k * r, d));
            prop_assert!((sk - k * k * s1).abs() <= 1e-12 * sk.max(1e-300));
        }

        #[test]
        fn saturation_decreases_with_detuning(r in 0.1f64..200.0, d in 0.0f64..100.0, dd in 0.01f64..50.0) {
            let m = mol(16.4, 17.0);
            prop_assert!(saturation_parameter(&m, &drive(r, d + dd)) < saturation_parameter(&m, &drive(r, d)));
            prop_assert!(saturation_parameter(&m, &drive(r, -d)) == saturation_parameter(&m, &drive(r, d)));
        }

        #[test]
        fn lifetime_round_trip(tau in 1e-3f64..1e4) {
            let back = lifetime_from_linewidth(linewidth_from_lifetime(tau).unwrap());
            prop_assert!((back - tau).abs() <= 1e-12 * tau);
        }
    }
}
