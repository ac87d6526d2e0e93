//! Photon counting, detector noise and the interference photon budget.
//!
//! Every random draw comes from a ChaCha8 stream selected by `(seed, index)`,
//! so results do not depend on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::trace::{Provenance, SpectrumTrace, ValueUnit};
use crate::units::{nm_to_m, PLANCK, SPEED_OF_LIGHT};

/// Generator name written into every stochastic output.
pub const RNG_NAME: &str = "chacha8:seed_from_u64+stream";

/// Independent generator for item `index` of the run seeded with `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Seed for trial `trial` of a Monte Carlo study, distinct from the pixel streams of `seed`.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    use rand::RngCore;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7269_616c_7365_6564);
    rng.set_stream(trial);
    rng.next_u64()
}

/// One Poisson draw with mean `mean` (zero for a zero mean).
pub fn poisson_draw(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    // rand_distr returns integral values as f64
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    /// Dark count rate (counts/s).
    pub dark_rate: f64,
    pub quantum_efficiency: f64,
    /// Integration time per pixel (s).
    pub integration_time: f64,
}

impl DetectorParams {
    pub fn new(dark_rate: f64, quantum_efficiency: f64, integration_time: f64) -> Result<Self> {
        if !(dark_rate.is_finite() && dark_rate >= 0.0) {
            return Err(invalid("dark_rate", format!("must be non-negative, got {dark_rate}")));
        }
        if !(quantum_efficiency > 0.0 && quantum_efficiency <= 1.0) {
            return Err(invalid(
                "quantum_efficiency",
                format!("must lie in (0, 1], got {quantum_efficiency}"),
            ));
        }
        if !(integration_time.is_finite() && integration_time > 0.0) {
            return Err(invalid("integration_time", format!("must be positive, got {integration_time}")));
        }
        Ok(Self {
            dark_rate,
            quantum_efficiency,
            integration_time,
        })
    }

    /// Mean counts in one pixel for an incident `rate`.
    pub fn expected_counts(&self, rate: f64) -> f64 {
        (self.quantum_efficiency * rate + self.dark_rate) * self.integration_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub expected_rate: f64,
    pub sampled_counts: u64,
    pub seed: u64,
    pub integration_time: f64,
}

/// Poisson counts for each rate; pixel `i` draws from `substream(seed, i)`.
pub fn sample_counts(rates: &[f64], det: &DetectorParams, seed: u64) -> Result<Vec<CountRecord>> {
    if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
        return Err(invalid("rate", format!("must be non-negative, got {r}")));
    }
    Ok(rates
        .par_iter()
        .enumerate()
        .map(|(i, &rate)| {
            let mut rng = substream(seed, i as u64);
            CountRecord {
                expected_rate: rate,
                sampled_counts: poisson_draw(&mut rng, det.expected_counts(rate)),
                seed,
                integration_time: det.integration_time,
            }
        })
        .collect())
}

/// Replaces a rate trace (counts/s) by one Poisson draw per pixel.
pub fn simulate_counts(rate_trace: &SpectrumTrace, det: &DetectorParams, seed: u64) -> Result<SpectrumTrace> {
    rate_trace.require_unit(ValueUnit::CountsPerSecond)?;
    let records = sample_counts(rate_trace.values(), det, seed)?;
    let mut meta = Provenance::new("simulate_counts")
        .with_param("dark_rate", det.dark_rate)
        .with_param("quantum_efficiency", det.quantum_efficiency)
        .with_param("integration_time", det.integration_time);
    for (k, v) in &rate_trace.meta.params {
        meta.params.insert(format!("source.{k}"), *v);
    }
    meta.seed = Some(seed);
    meta.rng = Some(RNG_NAME.to_string());
    rate_trace.with_values(
        ValueUnit::Counts,
        records.iter().map(|r| r.sampled_counts as f64).collect(),
        meta,
    )
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive, got {v}")))
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be non-negative, got {v}")))
    }
}

/// Relative rms shot noise 1/√(rate·t).
pub fn shot_noise_contrast(incident_rate: f64, t: f64) -> Result<f64> {
    positive("incident_rate", incident_rate)?;
    positive("integration_time", t)?;
    Ok(1.0 / (incident_rate * t).sqrt())
}

/// Depth of the destructive-interference dip, 2·overlap·√(incident·coherent), in counts/s.
pub fn interference_dip_rate(incident_rate: f64, coherent_rate: f64, mode_overlap: f64) -> Result<f64> {
    non_negative("incident_rate", incident_rate)?;
    non_negative("coherent_rate", coherent_rate)?;
    if !(0.0..=1.0).contains(&mode_overlap) {
        return Err(invalid("mode_overlap", format!("must lie in [0, 1], got {mode_overlap}")));
    }
    Ok(2.0 * mode_overlap * (incident_rate * coherent_rate).sqrt())
}

/// Dip rate divided by the molecular rate that produces it.
pub fn amplification_factor(incident_rate: f64, coherent_rate: f64, mode_overlap: f64) -> Result<f64> {
    positive("coherent_rate", coherent_rate)?;
    Ok(interference_dip_rate(incident_rate, coherent_rate, mode_overlap)? / coherent_rate)
}

/// Per-pixel SNR = dip·t / √((incident + dark)·t).
pub fn snr_of_detection(dip_rate: f64, incident_rate: f64, det: &DetectorParams, t: f64) -> Result<f64> {
    non_negative("dip_rate", dip_rate)?;
    non_negative("incident_rate", incident_rate)?;
    positive("integration_time", t)?;
    let noise = ((incident_rate + det.dark_rate) * t).sqrt();
    if noise == 0.0 {
        return Err(invalid("incident_rate", "incident and dark rates are both zero"));
    }
    Ok(dip_rate * t / noise)
}

/// Optical power (W) of a photon flux at wavelength `lambda_nm`.
pub fn photon_rate_to_power(rate: f64, lambda_nm: f64) -> Result<f64> {
    non_negative("rate", rate)?;
    positive("lambda_nm", lambda_nm)?;
    Ok(rate * PLANCK * SPEED_OF_LIGHT / nm_to_m(lambda_nm))
}

/// Photon flux (1/s) carried by `power` watts at `lambda_nm`.
pub fn power_to_photon_rate(power: f64, lambda_nm: f64) -> Result<f64> {
    non_negative("power", power)?;
    positive("lambda_nm", lambda_nm)?;
    Ok(power * nm_to_m(lambda_nm) / (PLANCK * SPEED_OF_LIGHT))
}

/// Linear map from incident power to saturation parameter, S = P/P_sat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationCalibration {
    /// Power at S = 1 (W).
    pub p_sat: f64,
}

impl SaturationCalibration {
    pub fn new(p_sat: f64) -> Result<Self> {
        positive("p_sat", p_sat)?;
        Ok(Self { p_sat })
    }

    pub fn saturation(&self, power: f64) -> Result<f64> {
        non_negative("power", power)?;
        Ok(power / self.p_sat)
    }

    pub fn power(&self, s: f64) -> Result<f64> {
        non_negative("saturation", s)?;
        Ok(s * self.p_sat)
    }
}

/// Shorthand for [`SaturationCalibration::new`].
pub fn saturation_power_calibration(p_at_s1: f64) -> Result<SaturationCalibration> {
    SaturationCalibration::new(p_at_s1)
}
