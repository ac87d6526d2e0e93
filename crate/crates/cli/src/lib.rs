//! Command-line workflows around the `resfluor` library.

pub mod analyze;
pub mod config;
pub mod error;
pub mod manifest;
pub mod reproduce;
pub mod simulate;
pub mod table;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use resfluor::correlation::G2Trace;
use resfluor::trace::SpectrumTrace;

use crate::config::{Format, RunConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::sha256_hex;

#[derive(Debug, Parser)]
#[command(name = "resfluor", version, about = "Resonance fluorescence and extinction spectroscopy of a single emitter")]
pub struct Cli {
    /// Config file (INI dialect, see README).
    #[arg(long, global = true, env = "RESFLUOR_CONFIG")]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides `[output] dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Forward models.
    #[command(subcommand)]
    Simulate(SimulateCmd),
    /// Fits to data files.
    #[command(subcommand)]
    Analyze(AnalyzeCmd),
    /// Synthetic analog of a figure's data series, with a manifest.
    Reproduce { figure: Figure },
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum SimulateCmd {
    /// Transmission spectrum; counts too when `[detector] noise = true`.
    Extinction,
    /// Incoherent emission and its Fabry-Perot scan.
    Mollow,
    /// Intensity correlation g²(τ).
    G2,
    /// Coherent and total emission versus incident power.
    SaturationSweep,
    /// Photon counts of an extinction scan and the photon budget.
    Counts,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCmd {
    /// Fits the extinction model to one trace.
    FitSpectrum { input: PathBuf },
    /// Separates A, B, ψ from a waveplate series.
    Separate {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Rabi frequency from a g² trace.
    G2Fit { input: PathBuf },
    /// Linewidth and saturation power from traces at several powers.
    LinewidthSweep {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Joint fit of coherent and fluorescence saturation curves.
    SaturationFit { input: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
        }
    }
}

/// Writes files into one directory and remembers their digests.
pub struct Output {
    pub dir: PathBuf,
    pub format: Format,
    pub written: Vec<(String, String)>,
}

impl Output {
    pub fn new(dir: &Path, format: Format) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
            written: Vec::new(),
        })
    }

    pub fn text(&mut self, name: &str, content: &str) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, content).map_err(|e| CliError::io(&path, e))?;
        self.written.push((name.to_string(), sha256_hex(content.as_bytes())));
        Ok(path)
    }

    pub fn trace(&mut self, stem: &str, trace: &SpectrumTrace) -> CliResult<()> {
        if self.format.csv() {
            self.text(&format!("{stem}.csv"), &trace.to_csv())?;
        }
        if self.format.json() {
            self.text(&format!("{stem}.json"), &trace.to_json())?;
        }
        Ok(())
    }

    pub fn g2(&mut self, stem: &str, trace: &G2Trace) -> CliResult<()> {
        if self.format.csv() {
            self.text(&format!("{stem}.csv"), &trace.to_csv())?;
        }
        if self.format.json() {
            self.text(&format!("{stem}.json"), &trace.to_json())?;
        }
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &serde_json::Value) -> CliResult<PathBuf> {
        let text = serde_json::to_string_pretty(value).expect("json value serializes") + "\n";
        self.text(name, &text)
    }
}

/// Resolved config plus command-line overrides.
pub struct Context {
    pub cfg: RunConfig,
    pub out: PathBuf,
}

impl Context {
    pub fn seed(&self) -> u64 {
        self.cfg.seed
    }

    pub fn output(&self) -> CliResult<Output> {
        Output::new(&self.out, self.cfg.output.format)
    }
}

pub fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let bytes = fs::read(p).map_err(|e| CliError::io(p, e))?;
            RunConfig::from_bytes(&bytes).map_err(|e| CliError::Config(e.in_file(p)))
        }
    }
}

pub fn read_input(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    String::from_utf8(bytes).map_err(|_| CliError::Input {
        path: path.to_path_buf(),
        source: resfluor::Error::Parse("not valid UTF-8".into()),
    })
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

pub fn read_trace(path: &Path) -> CliResult<SpectrumTrace> {
    let text = read_input(path)?;
    let parsed = if is_json(path) {
        SpectrumTrace::from_json(&text)
    } else {
        SpectrumTrace::from_csv(&text)
    };
    parsed.map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_g2(path: &Path) -> CliResult<G2Trace> {
    let text = read_input(path)?;
    let parsed = if is_json(path) {
        G2Trace::from_json(&text)
    } else {
        G2Trace::from_csv(&text)
    };
    parsed.map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs a parsed command line and returns the summary lines to print.
pub fn run(cli: &Cli) -> CliResult<Vec<String>> {
    match cli.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n as usize)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
            pool.install(|| dispatch(cli))
        }
        None => dispatch(cli),
    }
}

fn dispatch(cli: &Cli) -> CliResult<Vec<String>> {
    if let Command::Reproduce { figure } = cli.command {
        let base = cli.out.clone().unwrap_or_else(|| PathBuf::from("resfluor-out"));
        return reproduce::run(figure, cli.seed, &base.join(figure.name()));
    }
    let mut cfg = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let ctx = Context { cfg, out };
    match &cli.command {
        Command::Simulate(cmd) => simulate::run(*cmd, &ctx),
        Command::Analyze(cmd) => analyze::run(cmd, &ctx),
        Command::Reproduce { .. } => unreachable!("handled above"),
    }
}
