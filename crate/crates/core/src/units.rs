//! Frequency and physical-constant conventions.
//!
//! Every public linewidth, detuning and Rabi frequency is a cyclic frequency
//! in MHz using the FWHM convention. Rate equations work with angular rates in
//! rad/µs, obtained as `2π × value`. Delays handed to those equations are in µs;
//! public delay arguments are in ns.

use std::f64::consts::PI;

/// Planck constant (J s), exact SI value.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum (m/s), exact SI value.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Cyclic MHz to angular rad/µs.
#[inline]
pub fn angular(cyclic_mhz: f64) -> f64 {
    2.0 * PI * cyclic_mhz
}

/// Angular rad/µs to cyclic MHz.
#[inline]
pub fn cyclic(angular_per_us: f64) -> f64 {
    angular_per_us / (2.0 * PI)
}

#[inline]
pub fn ns_to_us(ns: f64) -> f64 {
    ns * 1e-3
}

#[inline]
pub fn nm_to_m(nm: f64) -> f64 {
    nm * 1e-9
}

/// Wraps a phase to (−π, π].
pub fn wrap_phase(phase: f64) -> f64 {
    let mut p = phase.rem_euclid(2.0 * PI);
    if p > PI {
        p -= 2.0 * PI;
    }
    p
}
