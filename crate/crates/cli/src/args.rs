use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "cetm",
    version,
    about = "Segmented-potential eigenstates by continuous energy transfer"
)]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scan an energy window and bisect every divergence-sign flip.
    Spectrum(SpectrumArgs),
    /// Propagate at one energy and export the sampled wavefunction.
    Wavefunction(WavefunctionArgs),
    /// Collect the detuning dataset around one eigenstate and fit it.
    Uncertainty(UncertaintyArgs),
    /// Compare eigenvalues against Numerov or closed-form references.
    OracleCheck(OracleArgs),
    /// Re-solve one eigenvalue under several seeds and solver grids.
    Stability(StabilityArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PotentialKind {
    Harmonic,
    Well,
    Hydrogen,
    File,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long, value_enum, default_value = "harmonic")]
    pub potential: PotentialKind,
    #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
    pub xmin: f64,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    pub xmax: f64,
    #[arg(long, default_value_t = 10000)]
    pub segments: usize,
    /// Well depth (potential outside the well).
    #[arg(long, default_value_t = 10.0)]
    pub depth: f64,
    #[arg(long, default_value_t = 2.0)]
    pub width: f64,
    /// Forbidden region kept on each side of the well.
    #[arg(long, default_value_t = 4.0)]
    pub padding: f64,
    /// Soft-core length of the hydrogen potential.
    #[arg(long, default_value_t = 1.0)]
    pub softening: f64,
    /// Two-column sample file for `--potential file`.
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// `left`, `right`, `interior:J` or `interior:J:B` (0-based segment).
    #[arg(long, default_value = "right")]
    pub seed: String,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Onset threshold relative to the reference slope scale.
    #[arg(long, default_value_t = 10.0)]
    pub tau: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// `key = value` file; flags on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, allow_negative_numbers = true)]
    pub emin: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub emax: Option<f64>,
    /// Scan intervals; defaults to 100 per unit energy.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Verification half-width as a multiple of the tolerance.
    #[arg(long, default_value_t = 1e3)]
    pub verify_factor: f64,
}

#[derive(Debug, Clone, Args)]
pub struct WavefunctionArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, allow_negative_numbers = true, conflicts_with = "level")]
    pub energy: Option<f64>,
    /// Solve eigenvalue number LEVEL (0 = ground state) and use it.
    #[arg(long)]
    pub level: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub points_per_segment: usize,
    #[arg(long, default_value_t = 64, allow_negative_numbers = true)]
    pub tail_threshold: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Above,
    Below,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PcMode {
    Real,
    Magnitude,
}

#[derive(Debug, Clone, Args)]
pub struct UncertaintyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0)]
    pub level: usize,
    /// Detuning decades: `2..8` or `2,3,5` for ΔE = 10^-d.
    #[arg(long, default_value = "2..8")]
    pub decades: String,
    #[arg(long, value_enum, default_value = "both")]
    pub side: SideArg,
    #[arg(long, value_enum, default_value = "real")]
    pub pc_mode: PcMode,
    /// Take k_d this many segments away from the onset segment.
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    pub k_offset: isize,
    #[arg(long, default_value_t = 4)]
    pub points_per_segment: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleKind {
    /// Closed form when the family has one, Numerov otherwise.
    Auto,
    Numerov,
    Analytic,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, allow_negative_numbers = true)]
    pub emin: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub emax: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, value_enum, default_value = "auto")]
    pub oracle: OracleKind,
    #[arg(long, default_value_t = 2.5e-4)]
    pub numerov_step: f64,
}

#[derive(Debug, Clone, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0)]
    pub level: usize,
    /// Seeds to compare; `interior` alone means the middle segment.
    #[arg(long, default_value = "right,left,interior")]
    pub seeds: String,
    /// Solver grids as `points_per_segment:steps_per_unit` pairs.
    #[arg(long, default_value = "1:100,2:250")]
    pub refine: String,
    /// Additional segment counts; the spread across them is reported but
    /// does not decide the exit code.
    #[arg(long)]
    pub segment_counts: Option<String>,
    #[arg(long, default_value_t = 1e-4)]
    pub delta: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub max_spread: f64,
    /// Propagate with raw amplitudes as well and treat overflow as failure.
    #[arg(long)]
    pub no_scaling: bool,
}

/// Parses a `key = value` config file into flag tokens.
pub fn config_tokens(text: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected `key = value`", n + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key == "config" {
            return Err(format!("config line {}: invalid key", n + 1));
        }
        match value {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            _ => out.push(format!("--{key}={value}")),
        }
    }
    Ok(out)
}

/// The `--config` path, if any, from raw arguments.
pub fn config_path(args: &[String]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}
