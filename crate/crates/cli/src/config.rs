//! Run configuration: a flat INI dialect with a built-in `dbatt-paper` profile.
//!
//! The grammar is documented in the README. Every key has a default from the
//! profile; unknown sections and keys are errors.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;

use resfluor::measurement::{DetectorParams, SaturationCalibration};
use resfluor::physics::{rabi_for_saturation, DriveParams, IncidentRate, MoleculeParams};
use resfluor::polarization::Geometry;
use resfluor::spectra::FpcParams;
use resfluor::trace::linspace;

use crate::error::ConfigError;

pub const PROFILE: &str = "dbatt-paper";

/// One `key = value` line.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    /// Empty for keys above the first section header.
    pub section: String,
    pub key: String,
    pub value: String,
    pub line: usize,
}

fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some('a'..='z')) && chars.all(|c| matches!(c, 'a'..='z' | '0'..='9' | '_'))
}

fn trim_ws(s: &str) -> &str {
    s.trim_matches(|c| c == ' ' || c == '\t')
}

/// Tokenizes config text into entries. Checks syntax, section names and duplicates.
pub fn parse_entries(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut entries: Vec<Entry> = Vec::new();
    let mut section = String::new();
    let mut seen_sections: Vec<String> = Vec::new();
    for (idx, raw) in text.split('\n').enumerate() {
        let line = idx + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let content = trim_ws(content);
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::new(Some(line), None, "section header must end with `]`"))?;
            if !is_name(name) {
                return Err(ConfigError::new(
                    Some(line),
                    None,
                    format!("invalid section name `{name}` (expected [a-z][a-z0-9_]*)"),
                ));
            }
            if !SECTIONS.contains(&name) {
                return Err(ConfigError::new(Some(line), None, format!("unknown section [{name}]")));
            }
            if seen_sections.iter().any(|s| s == name) {
                return Err(ConfigError::new(Some(line), None, format!("duplicate section [{name}]")));
            }
            seen_sections.push(name.to_string());
            section = name.to_string();
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ConfigError::new(Some(line), None, "expected `key = value`, `[section]` or a comment"))?;
        let (key, value) = (trim_ws(key), trim_ws(value));
        if !is_name(key) {
            return Err(ConfigError::new(
                Some(line),
                None,
                format!("invalid key `{key}` (expected [a-z][a-z0-9_]*)"),
            ));
        }
        let field = field_name(&section, key);
        if value.is_empty() {
            return Err(ConfigError::new(Some(line), Some(field), "empty value"));
        }
        if let Some(prev) = entries.iter().find(|e| e.section == section && e.key == key) {
            return Err(ConfigError::new(
                Some(line),
                Some(field),
                format!("duplicate key (first set on line {})", prev.line),
            ));
        }
        entries.push(Entry {
            section: section.clone(),
            key: key.to_string(),
            value: value.to_string(),
            line,
        });
    }
    Ok(entries)
}

fn field_name(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("[{section}] {key}")
    }
}

/// How strongly the molecule is driven.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriveStrength {
    /// Rabi frequency (MHz).
    Rabi(f64),
    Saturation(f64),
    /// Incident power (W), converted through `p_sat`.
    Power(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriveSection {
    pub strength: DriveStrength,
    pub p_sat: f64,
    pub detuning: f64,
    pub psi_deg: f64,
    /// Detected incident photon rate (counts/s).
    pub incident_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSection {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl GridSection {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.start, self.stop, self.points)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtinctionSection {
    pub a_peak: f64,
    pub b_peak: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSection {
    pub dark_rate: f64,
    pub quantum_efficiency: f64,
    pub integration_time: f64,
    pub noise: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MollowSection {
    pub grid: GridSection,
    /// Emission rate (counts/s) at full saturation reaching the analyzer.
    pub emission_rate: f64,
    pub laser_background: f64,
    pub pedestal: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometrySection {
    pub laser_deg: f64,
    pub dipole_deg: f64,
    pub polarizer_deg: f64,
    pub leakage: f64,
    pub qwp_deg: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct G2Section {
    pub delay_max_ns: f64,
    pub points: usize,
    /// Mean coincidences per bin on the plateau; 0 disables noise.
    pub coincidences: f64,
    pub jitter_ns: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    pub p_min: f64,
    pub p_max: f64,
    pub points: usize,
    /// Coherent rate scale: the curve peaks at a quarter of this.
    pub coherent_rate: f64,
    pub fluorescence_rate: f64,
    pub integration_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSection {
    pub fix_a: bool,
    pub float_gamma0: bool,
    pub max_iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    fn tag(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Both => "both",
        }
    }

    pub fn csv(self) -> bool {
        self != Format::Json
    }

    pub fn json(self) -> bool {
        self != Format::Csv
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub format: Format,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub profile: String,
    pub seed: u64,
    pub molecule: MoleculeParams,
    pub drive: DriveSection,
    pub extinction: ExtinctionSection,
    pub grid: GridSection,
    pub detector: DetectorSection,
    pub fpc: FpcParams,
    pub mollow: MollowSection,
    pub geometry: GeometrySection,
    pub g2: G2Section,
    pub sweep: SweepSection,
    pub fit: FitSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    /// The `dbatt-paper` profile.
    fn default() -> Self {
        Self {
            profile: PROFILE.to_string(),
            seed: 1,
            molecule: MoleculeParams {
                gamma0: 16.4,
                gamma: 17.0,
                lambda_nm: 590.0,
                alpha_dw: 0.25,
                alpha_fc: 0.3,
            },
            drive: DriveSection {
                strength: DriveStrength::Rabi(0.0),
                p_sat: 350e-12,
                detuning: 0.0,
                psi_deg: 90.0,
                incident_rate: 550.0,
            },
            extinction: ExtinctionSection {
                a_peak: 0.0,
                b_peak: 0.115,
            },
            grid: GridSection {
                start: -100.0,
                stop: 100.0,
                points: 401,
            },
            detector: DetectorSection {
                dark_rate: 150.0,
                quantum_efficiency: 1.0,
                integration_time: 0.16,
                noise: false,
            },
            fpc: FpcParams {
                fsr: 356.0,
                fwhm: 14.0,
                peak_transmission: 0.15,
            },
            mollow: MollowSection {
                grid: GridSection {
                    start: -400.0,
                    stop: 400.0,
                    points: 1601,
                },
                emission_rate: 1e4,
                laser_background: 500.0,
                pedestal: 0.0,
            },
            geometry: GeometrySection {
                laser_deg: 0.0,
                dipole_deg: 45.0,
                polarizer_deg: 80.0,
                leakage: 0.0,
                qwp_deg: vec![0.0, 36.0, 72.0, 108.0, 144.0],
            },
            g2: G2Section {
                delay_max_ns: 100.0,
                points: 501,
                coincidences: 0.0,
                jitter_ns: 0.0,
            },
            sweep: SweepSection {
                p_min: 5e-12,
                p_max: 1e-8,
                points: 40,
                coherent_rate: 4e4,
                fluorescence_rate: 1e5,
                integration_time: 1.0,
            },
            fit: FitSection {
                fix_a: true,
                float_gamma0: false,
                max_iter: 500,
            },
            output: OutputSection {
                dir: PathBuf::from("resfluor-out"),
                format: Format::Both,
            },
        }
    }
}

struct Value<'a> {
    entry: &'a Entry,
}

impl Value<'_> {
    fn err(&self, msg: impl Into<String>) -> ConfigError {
        ConfigError::new(
            Some(self.entry.line),
            Some(field_name(&self.entry.section, &self.entry.key)),
            msg,
        )
    }

    fn number(&self) -> Result<f64, ConfigError> {
        let v: f64 = self
            .entry
            .value
            .parse()
            .map_err(|_| self.err(format!("expected a number, got `{}`", self.entry.value)))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.err(format!("must be finite, got `{}`", self.entry.value)))
        }
    }

    fn positive(&self) -> Result<f64, ConfigError> {
        let v = self.number()?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(self.err(format!("must be positive, got {v}")))
        }
    }

    fn non_negative(&self) -> Result<f64, ConfigError> {
        let v = self.number()?;
        if v >= 0.0 {
            Ok(v)
        } else {
            Err(self.err(format!("must be non-negative, got {v}")))
        }
    }

    fn integer(&self) -> Result<u64, ConfigError> {
        let s = &self.entry.value;
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(self.err(format!("expected a non-negative integer, got `{s}`")));
        }
        s.parse().map_err(|_| self.err(format!("integer out of range: `{s}`")))
    }

    fn count(&self, min: usize) -> Result<usize, ConfigError> {
        let v = self.integer()?;
        if v < min as u64 || v > 10_000_000 {
            return Err(self.err(format!("must lie in [{min}, 10000000], got {v}")));
        }
        Ok(v as usize)
    }

    fn boolean(&self) -> Result<bool, ConfigError> {
        match self.entry.value.as_str() {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(self.err(format!("expected `true` or `false`, got `{other}`"))),
        }
    }

    fn list(&self) -> Result<Vec<f64>, ConfigError> {
        self.entry
            .value
            .split(',')
            .map(|item| {
                let item = trim_ws(item);
                item.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.err(format!("list item `{item}` is not a finite number")))
            })
            .collect()
    }
}

impl RunConfig {
    /// Parses config bytes; input must be UTF-8.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ConfigError> {
        let text = std::str::from_utf8(bytes)
            .map_err(|e| ConfigError::new(None, None, format!("not valid UTF-8: {e}")))?;
        Self::parse(text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let entries = parse_entries(text)?;
        let mut cfg = RunConfig::default();
        if let Some(p) = entries.iter().find(|e| e.section.is_empty() && e.key == "profile") {
            if p.value != PROFILE {
                return Err(ConfigError::new(
                    Some(p.line),
                    Some("profile".into()),
                    format!("unknown profile `{}` (available: {PROFILE})", p.value),
                ));
            }
        }
        let mut strength_line: Option<usize> = None;
        for e in &entries {
            let v = Value { entry: e };
            match (e.section.as_str(), e.key.as_str()) {
                ("", "profile") => {}
                ("", "seed") => cfg.seed = v.integer()?,
                ("molecule", "gamma0") => cfg.molecule.gamma0 = v.positive()?,
                ("molecule", "gamma") => cfg.molecule.gamma = v.positive()?,
                ("molecule", "lambda_nm") => cfg.molecule.lambda_nm = v.positive()?,
                ("molecule", "alpha_dw") => cfg.molecule.alpha_dw = v.positive()?,
                ("molecule", "alpha_fc") => cfg.molecule.alpha_fc = v.positive()?,
                ("drive", key @ ("rabi" | "saturation" | "power")) => {
                    if let Some(first) = strength_line {
                        return Err(v.err(format!(
                            "drive strength already set on line {first}; use only one of rabi, saturation, power"
                        )));
                    }
                    strength_line = Some(e.line);
                    let x = v.non_negative()?;
                    cfg.drive.strength = match key {
                        "rabi" => DriveStrength::Rabi(x),
                        "saturation" => DriveStrength::Saturation(x),
                        _ => DriveStrength::Power(x),
                    };
                }
                ("drive", "p_sat") => cfg.drive.p_sat = v.positive()?,
                ("drive", "detuning") => cfg.drive.detuning = v.number()?,
                ("drive", "psi_deg") => cfg.drive.psi_deg = v.number()?,
                ("drive", "incident_rate") => cfg.drive.incident_rate = v.positive()?,
                ("extinction", "a_peak") => cfg.extinction.a_peak = v.non_negative()?,
                ("extinction", "b_peak") => cfg.extinction.b_peak = v.non_negative()?,
                ("grid", "start") => cfg.grid.start = v.number()?,
                ("grid", "stop") => cfg.grid.stop = v.number()?,
                ("grid", "points") => cfg.grid.points = v.count(2)?,
                ("detector", "dark_rate") => cfg.detector.dark_rate = v.non_negative()?,
                ("detector", "quantum_efficiency") => cfg.detector.quantum_efficiency = v.positive()?,
                ("detector", "integration_time") => cfg.detector.integration_time = v.positive()?,
                ("detector", "noise") => cfg.detector.noise = v.boolean()?,
                ("fpc", "fsr") => cfg.fpc.fsr = v.positive()?,
                ("fpc", "fwhm") => cfg.fpc.fwhm = v.positive()?,
                ("fpc", "peak_transmission") => cfg.fpc.peak_transmission = v.positive()?,
                ("mollow", "start") => cfg.mollow.grid.start = v.number()?,
                ("mollow", "stop") => cfg.mollow.grid.stop = v.number()?,
                ("mollow", "points") => cfg.mollow.grid.points = v.count(2)?,
                ("mollow", "emission_rate") => cfg.mollow.emission_rate = v.non_negative()?,
                ("mollow", "laser_background") => cfg.mollow.laser_background = v.non_negative()?,
                ("mollow", "pedestal") => cfg.mollow.pedestal = v.non_negative()?,
                ("geometry", "laser_deg") => cfg.geometry.laser_deg = v.number()?,
                ("geometry", "dipole_deg") => cfg.geometry.dipole_deg = v.number()?,
                ("geometry", "polarizer_deg") => cfg.geometry.polarizer_deg = v.number()?,
                ("geometry", "leakage") => cfg.geometry.leakage = v.non_negative()?,
                ("geometry", "qwp_deg") => cfg.geometry.qwp_deg = v.list()?,
                ("g2", "delay_max_ns") => cfg.g2.delay_max_ns = v.positive()?,
                ("g2", "points") => cfg.g2.points = v.count(2)?,
                ("g2", "coincidences") => cfg.g2.coincidences = v.non_negative()?,
                ("g2", "jitter_ns") => cfg.g2.jitter_ns = v.non_negative()?,
                ("sweep", "p_min") => cfg.sweep.p_min = v.positive()?,
                ("sweep", "p_max") => cfg.sweep.p_max = v.positive()?,
                ("sweep", "points") => cfg.sweep.points = v.count(2)?,
                ("sweep", "coherent_rate") => cfg.sweep.coherent_rate = v.positive()?,
                ("sweep", "fluorescence_rate") => cfg.sweep.fluorescence_rate = v.positive()?,
                ("sweep", "integration_time") => cfg.sweep.integration_time = v.positive()?,
                ("fit", "fix_a") => cfg.fit.fix_a = v.boolean()?,
                ("fit", "float_gamma0") => cfg.fit.float_gamma0 = v.boolean()?,
                ("fit", "max_iter") => cfg.fit.max_iter = v.count(1)?,
                ("output", "dir") => cfg.output.dir = PathBuf::from(&e.value),
                ("output", "format") => {
                    cfg.output.format = match e.value.as_str() {
                        "csv" => Format::Csv,
                        "json" => Format::Json,
                        "both" => Format::Both,
                        other => return Err(v.err(format!("expected csv, json or both, got `{other}`"))),
                    }
                }
                _ => return Err(v.err("unknown key")),
            }
        }
        cfg.validate(&entries)?;
        Ok(cfg)
    }

    fn validate(&self, entries: &[Entry]) -> Result<(), ConfigError> {
        let at = |section: &str, key: &str, msg: String| {
            let line = entries.iter().find(|e| e.section == section && e.key == key).map(|e| e.line);
            ConfigError::new(line, Some(field_name(section, key)), msg)
        };
        self.molecule.validate().map_err(|e| {
            let key = match &e {
                resfluor::Error::InvalidParameter { name, .. } => *name,
                _ => "gamma",
            };
            at("molecule", key, e.to_string())
        })?;
        if self.grid.stop <= self.grid.start {
            return Err(at("grid", "stop", "must exceed [grid] start".into()));
        }
        if self.mollow.grid.stop <= self.mollow.grid.start {
            return Err(at("mollow", "stop", "must exceed [mollow] start".into()));
        }
        if self.detector.quantum_efficiency > 1.0 {
            return Err(at("detector", "quantum_efficiency", "must not exceed 1".into()));
        }
        FpcParams::new(self.fpc.fsr, self.fpc.fwhm, self.fpc.peak_transmission)
            .map_err(|e| at("fpc", "fwhm", e.to_string()))?;
        if self.sweep.p_max <= self.sweep.p_min {
            return Err(at("sweep", "p_max", "must exceed [sweep] p_min".into()));
        }
        if self.geometry.qwp_deg.is_empty() {
            return Err(at("geometry", "qwp_deg", "needs at least one angle".into()));
        }
        if self.geometry.leakage >= 1.0 {
            return Err(at("geometry", "leakage", "must be below 1".into()));
        }
        Ok(())
    }

    /// Rabi frequency (MHz) implied by the drive section.
    pub fn rabi(&self) -> resfluor::Result<f64> {
        let s = match self.drive.strength {
            DriveStrength::Rabi(r) => return Ok(r),
            DriveStrength::Saturation(s) => s,
            DriveStrength::Power(p) => SaturationCalibration::new(self.drive.p_sat)?.saturation(p)?,
        };
        rabi_for_saturation(s, &self.molecule, self.drive.detuning)
    }

    pub fn drive_params(&self) -> resfluor::Result<DriveParams> {
        DriveParams::new(
            self.rabi()?,
            self.drive.detuning,
            self.drive.psi_deg.to_radians(),
            IncidentRate::CountsPerSecond(self.drive.incident_rate),
        )
    }

    pub fn detector_params(&self) -> resfluor::Result<DetectorParams> {
        DetectorParams::new(
            self.detector.dark_rate,
            self.detector.quantum_efficiency,
            self.detector.integration_time,
        )
    }

    pub fn geometry(&self) -> Geometry {
        Geometry {
            laser_angle: self.geometry.laser_deg.to_radians(),
            dipole_angle: self.geometry.dipole_deg.to_radians(),
            polarizer_angle: self.geometry.polarizer_deg.to_radians(),
            polarizer_leakage: self.geometry.leakage,
        }
    }

    pub fn qwp_angles(&self) -> Vec<f64> {
        self.geometry.qwp_deg.iter().map(|d| d * PI / 180.0).collect()
    }

    /// Canonical text: every key, fixed order, shortest round-trip floats.
    /// Parsing it yields an equal config.
    pub fn to_ini(&self) -> String {
        fn f(x: f64) -> String {
            format!("{x:?}")
        }
        let mut s = String::new();
        let _ = writeln!(s, "profile = {}", self.profile);
        let _ = writeln!(s, "seed = {}", self.seed);
        let m = &self.molecule;
        let _ = writeln!(s, "\n[molecule]");
        for (k, v) in [
            ("gamma0", m.gamma0),
            ("gamma", m.gamma),
            ("lambda_nm", m.lambda_nm),
            ("alpha_dw", m.alpha_dw),
            ("alpha_fc", m.alpha_fc),
        ] {
            let _ = writeln!(s, "{k} = {}", f(v));
        }
        let d = &self.drive;
        let _ = writeln!(s, "\n[drive]");
        match d.strength {
            DriveStrength::Rabi(x) => writeln!(s, "rabi = {}", f(x)),
            DriveStrength::Saturation(x) => writeln!(s, "saturation = {}", f(x)),
            DriveStrength::Power(x) => writeln!(s, "power = {}", f(x)),
        }
        .ok();
        for (k, v) in [
            ("p_sat", d.p_sat),
            ("detuning", d.detuning),
            ("psi_deg", d.psi_deg),
            ("incident_rate", d.incident_rate),
        ] {
            let _ = writeln!(s, "{k} = {}", f(v));
        }
        let _ = writeln!(s, "\n[extinction]\na_peak = {}\nb_peak = {}", f(self.extinction.a_peak), f(self.extinction.b_peak));
        let g = &self.grid;
        let _ = writeln!(s, "\n[grid]\nstart = {}\nstop = {}\npoints = {}", f(g.start), f(g.stop), g.points);
        let det = &self.detector;
        let _ = writeln!(
            s,
            "\n[detector]\ndark_rate = {}\nquantum_efficiency = {}\nintegration_time = {}\nnoise = {}",
            f(det.dark_rate),
            f(det.quantum_efficiency),
            f(det.integration_time),
            det.noise
        );
        let _ = writeln!(
            s,
            "\n[fpc]\nfsr = {}\nfwhm = {}\npeak_transmission = {}",
            f(self.fpc.fsr),
            f(self.fpc.fwhm),
            f(self.fpc.peak_transmission)
        );
        let mo = &self.mollow;
        let _ = writeln!(
            s,
            "\n[mollow]\nstart = {}\nstop = {}\npoints = {}\nemission_rate = {}\nlaser_background = {}\npedestal = {}",
            f(mo.grid.start),
            f(mo.grid.stop),
            mo.grid.points,
            f(mo.emission_rate),
            f(mo.laser_background),
            f(mo.pedestal)
        );
        let ge = &self.geometry;
        let angles: Vec<String> = ge.qwp_deg.iter().map(|&a| f(a)).collect();
        let _ = writeln!(
            s,
            "\n[geometry]\nlaser_deg = {}\ndipole_deg = {}\npolarizer_deg = {}\nleakage = {}\nqwp_deg = {}",
            f(ge.laser_deg),
            f(ge.dipole_deg),
            f(ge.polarizer_deg),
            f(ge.leakage),
            angles.join(", ")
        );
        let g2 = &self.g2;
        let _ = writeln!(
            s,
            "\n[g2]\ndelay_max_ns = {}\npoints = {}\ncoincidences = {}\njitter_ns = {}",
            f(g2.delay_max_ns),
            g2.points,
            f(g2.coincidences),
            f(g2.jitter_ns)
        );
        let sw = &self.sweep;
        let _ = writeln!(
            s,
            "\n[sweep]\np_min = {}\np_max = {}\npoints = {}\ncoherent_rate = {}\nfluorescence_rate = {}\nintegration_time = {}",
            f(sw.p_min),
            f(sw.p_max),
            sw.points,
            f(sw.coherent_rate),
            f(sw.fluorescence_rate),
            f(sw.integration_time)
        );
        let fi = &self.fit;
        let _ = writeln!(
            s,
            "\n[fit]\nfix_a = {}\nfloat_gamma0 = {}\nmax_iter = {}",
            fi.fix_a, fi.float_gamma0, fi.max_iter
        );
        let _ = writeln!(
            s,
            "\n[output]\ndir = {}\nformat = {}",
            self.output.dir.display(),
            self.output.format.tag()
        );
        s
    }

    /// Flat `section.key -> value` view used in manifests.
    pub fn flat(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        let mut section = String::new();
        for line in self.to_ini().lines() {
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.to_string();
            } else if let Some((k, v)) = line.split_once(" = ") {
                let key = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
                out.insert(key, v.to_string());
            }
        }
        out
    }
}

const SECTIONS: [&str; 12] = [
    "molecule",
    "drive",
    "extinction",
    "grid",
    "detector",
    "fpc",
    "mollow",
    "geometry",
    "g2",
    "sweep",
    "fit",
    "output",
];
