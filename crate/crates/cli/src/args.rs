use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "meanfield-sync",
    version,
    about = "Synchronization and periodic locking analysis for mean-field oscillator models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the regularity and synchronization hypotheses.
    Check,
    /// Compute the dispersion curve and its parameters.
    Dispersion,
    /// Integrate one perturbed run and report the synchronization verdicts.
    Simulate(SimulateArgs),
    /// Find the periodically locked orbit through the return map.
    Lock,
    /// Classify a (kappa, omega) grid.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Kuramoto,
    Winfree,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PerturbKind {
    /// `H = 0`.
    Zero,
    /// Seeded random 1-periodic trigonometric `H` at `--perturb-scale` times the radius.
    Random,
}

/// Flags shared by every subcommand. Values given here override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    #[arg(long, global = true, value_enum)]
    pub model: Option<ModelKind>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub omega: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    /// Number of oscillators.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Panels of the diagonal profile and dispersion curve (even).
    #[arg(long, global = true, value_name = "M")]
    pub grid: Option<usize>,
    /// Integration step in normalized time.
    #[arg(long, global = true, value_name = "STEP", allow_hyphen_values = true)]
    pub h: Option<f64>,
    /// Simulation horizon in normalized time.
    #[arg(long, global = true, value_name = "T", allow_hyphen_values = true)]
    pub tmax: Option<f64>,
    /// Dispersion bound D (default D*).
    #[arg(long = "D", global = true, value_name = "VALUE", allow_hyphen_values = true)]
    pub d: Option<f64>,
    /// Choose D maximizing the perturbation radius.
    #[arg(long, global = true)]
    pub optimize_radius: bool,
    /// Stop a simulation at the first tube violation.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Attach a short in-tube simulation to every both-hold sweep cell.
    #[arg(long, global = true)]
    pub empirical: bool,
    /// Perturbation family, unless the config file gives one explicitly.
    #[arg(long, global = true, value_enum)]
    pub perturb: Option<PerturbKind>,
    /// Perturbation size as a fraction of the radius r.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub perturb_scale: Option<f64>,
    /// Skip SVG plots.
    #[arg(long, global = true)]
    pub no_plots: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimulateArgs {
    /// Write every STRIDE-th step to the CSV (default: at most about 10000 rows).
    #[arg(long)]
    pub stride: Option<usize>,
    /// Initial spread as a fraction of the tube width at nu.
    #[arg(long, allow_hyphen_values = true)]
    pub spread: Option<f64>,
    /// Companion start nu (default: seeded uniform in [0, 1)).
    #[arg(long, allow_hyphen_values = true)]
    pub nu: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    /// kappa axis as LO:HI:COUNT.
    #[arg(long, value_name = "LO:HI:COUNT")]
    pub kappa_range: Option<String>,
    /// omega axis as LO:HI:COUNT.
    #[arg(long, value_name = "LO:HI:COUNT")]
    pub omega_range: Option<String>,
}
