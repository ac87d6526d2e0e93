//! Sampled spectra with unit tags and provenance.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::csvio;
use crate::error::{Error, Result};

/// What the frequency axis of a trace means. Always MHz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// Laser detuning Δ from the transition.
    LaserDetuning,
    /// Emission frequency relative to the laser.
    EmissionDetuning,
    /// Scan position of the analyzing cavity.
    AnalyzerScan,
}

/// Physical unit of the trace values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueUnit {
    /// Detected over incident intensity.
    Transmission,
    CountsPerSecond,
    /// Integer photon counts per pixel.
    Counts,
    /// Spectral density per MHz, in emission-scale units per second.
    DensityPerMhz,
    /// Lorentzian profile values, MHz⁻².
    InverseMhzSquared,
    Dimensionless,
}

macro_rules! tag_enum {
    ($ty:ty { $($var:ident => $tag:literal),* $(,)? }) => {
        impl $ty {
            pub fn tag(&self) -> &'static str {
                match self { $(Self::$var => $tag),* }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.tag())
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($tag => Ok(Self::$var),)*
                    other => Err(Error::Parse(format!("unknown {} tag `{other}`", stringify!($ty)))),
                }
            }
        }
    };
}

tag_enum!(GridKind {
    LaserDetuning => "laser_detuning",
    EmissionDetuning => "emission_detuning",
    AnalyzerScan => "analyzer_scan",
});

tag_enum!(ValueUnit {
    Transmission => "transmission",
    CountsPerSecond => "counts_per_s",
    Counts => "counts",
    DensityPerMhz => "density_per_MHz",
    InverseMhzSquared => "MHz^-2",
    Dimensionless => "dimensionless",
});

/// Where a trace came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(generator: impl Into<String>) -> Self {
        Self {
            generator: generator.into(),
            ..Self::default()
        }
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub(crate) fn to_lines(&self) -> Vec<(String, String)> {
        let mut lines = vec![("generator".to_string(), self.generator.clone())];
        for (k, v) in &self.params {
            lines.push((format!("param.{k}"), format!("{v:?}")));
        }
        if let Some(seed) = self.seed {
            lines.push(("seed".into(), seed.to_string()));
        }
        if let Some(rng) = &self.rng {
            lines.push(("rng".into(), rng.clone()));
        }
        for (k, v) in &self.notes {
            lines.push((format!("note.{k}"), v.clone()));
        }
        lines
    }

    /// Absorbs one metadata line; returns false if the key is not provenance.
    pub(crate) fn absorb(&mut self, key: &str, value: &str) -> Result<bool> {
        if key == "generator" {
            self.generator = value.to_string();
        } else if let Some(name) = key.strip_prefix("param.") {
            let v: f64 = value
                .parse()
                .map_err(|_| Error::Parse(format!("metadata `{key}` is not a number")))?;
            self.params.insert(name.to_string(), v);
        } else if key == "seed" {
            self.seed = Some(
                value
                    .parse()
                    .map_err(|_| Error::Parse(format!("metadata `seed` is not an integer: `{value}`")))?,
            );
        } else if key == "rng" {
            self.rng = Some(value.to_string());
        } else if let Some(name) = key.strip_prefix("note.") {
            self.notes.insert(name.to_string(), value.to_string());
        } else {
            return Ok(false);
        }
        Ok(true)
    }
}

/// A function of frequency sampled on a strictly increasing grid (MHz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTrace {
    pub grid_kind: GridKind,
    pub unit: ValueUnit,
    grid: Vec<f64>,
    values: Vec<f64>,
    pub meta: Provenance,
}

impl SpectrumTrace {
    pub fn new(grid_kind: GridKind, unit: ValueUnit, grid: Vec<f64>, values: Vec<f64>, meta: Provenance) -> Result<Self> {
        csvio::check_samples(&grid, &values)?;
        Ok(Self {
            grid_kind,
            unit,
            grid,
            values,
            meta,
        })
    }

    /// Evaluates `f` on `grid`.
    pub fn from_fn(
        grid_kind: GridKind,
        unit: ValueUnit,
        grid: Vec<f64>,
        meta: Provenance,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let values = grid.iter().map(|&x| f(x)).collect();
        Self::new(grid_kind, unit, grid, values, meta)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.iter().copied().zip(self.values.iter().copied())
    }

    /// Grid spacing if the grid is uniform to 1e-9 relative.
    pub fn uniform_step(&self) -> Option<f64> {
        uniform_step(&self.grid)
    }

    pub fn require_unit(&self, unit: ValueUnit) -> Result<()> {
        if self.unit != unit {
            return Err(Error::UnitMismatch {
                expected: unit.to_string(),
                found: self.unit.to_string(),
            });
        }
        Ok(())
    }

    /// Pointwise sum. Units, grid kinds and grids must match exactly.
    pub fn try_add(&self, other: &SpectrumTrace) -> Result<SpectrumTrace> {
        other.require_unit(self.unit)?;
        if self.grid_kind != other.grid_kind {
            return Err(Error::UnitMismatch {
                expected: self.grid_kind.to_string(),
                found: other.grid_kind.to_string(),
            });
        }
        if self.grid != other.grid {
            return Err(Error::InvalidGrid("cannot add traces sampled on different grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        SpectrumTrace::new(self.grid_kind, self.unit, self.grid.clone(), values, self.meta.clone())
    }

    /// Same trace with values replaced; the unit tag changes only through `unit`.
    pub fn with_values(&self, unit: ValueUnit, values: Vec<f64>, meta: Provenance) -> Result<SpectrumTrace> {
        SpectrumTrace::new(self.grid_kind, unit, self.grid.clone(), values, meta)
    }

    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.values)
    }

    pub fn to_csv(&self) -> String {
        let mut meta = vec![
            ("grid".to_string(), self.grid_kind.tag().to_string()),
            ("unit".to_string(), self.unit.tag().to_string()),
        ];
        meta.extend(self.meta.to_lines());
        csvio::write(&meta, ("frequency_MHz", self.unit.tag()), &self.grid, &self.values)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let parsed = csvio::parse(text)?;
        if parsed.header.0 != "frequency_MHz" {
            return Err(Error::Parse(format!(
                "first column must be `frequency_MHz`, found `{}`",
                parsed.header.0
            )));
        }
        let mut grid_kind = None;
        let mut unit_tag = None;
        let mut meta = Provenance::default();
        for (k, v) in &parsed.meta {
            match k.as_str() {
                "grid" => grid_kind = Some(v.parse::<GridKind>()?),
                "unit" => unit_tag = Some(v.parse::<ValueUnit>()?),
                _ => {
                    if !meta.absorb(k, v)? {
                        return Err(Error::Parse(format!("unknown metadata key `{k}`")));
                    }
                }
            }
        }
        let column_unit: ValueUnit = parsed.header.1.parse()?;
        if let Some(u) = unit_tag {
            if u != column_unit {
                return Err(Error::UnitMismatch {
                    expected: u.to_string(),
                    found: column_unit.to_string(),
                });
            }
        }
        let grid_kind = grid_kind.ok_or_else(|| Error::Parse("missing `# grid:` metadata".into()))?;
        SpectrumTrace::new(grid_kind, column_unit, parsed.x, parsed.y, meta)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: SpectrumTrace = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        csvio::check_samples(&t.grid, &t.values)?;
        Ok(t)
    }
}

pub(crate) fn uniform_step(grid: &[f64]) -> Option<f64> {
    if grid.len() < 2 {
        return None;
    }
    let step = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    let scale = grid[0].abs().max(grid[grid.len() - 1].abs());
    let tol = 1e-9 * step.abs() + 8.0 * f64::EPSILON * scale;
    grid.windows(2)
        .all(|w| ((w[1] - w[0]) - step).abs() <= tol)
        .then_some(step)
}

pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1]))
        .sum()
}

/// `n` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (n - 1) as f64;
            (0..n).map(|i| start + step * i as f64).collect()
        }
    }
}

/// `n` points from `start` to `stop` inclusive, evenly spaced in log scale.
pub fn logspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    linspace(start.ln(), stop.ln(), n).into_iter().map(f64::exp).collect()
}
