use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "spin-anneal", version, about = "Vector Ising spin annealing and gain-based Ising solvers")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Worker threads; never changes numeric output.
    #[arg(long, global = true, env = "SPIN_ANNEAL_THREADS")]
    pub threads: Option<usize>,

    /// Experiment file: `key = value` defaults plus `[solver.<name>]` sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Write a coupling matrix file.
    Gen(GenArgs),
    /// Run one solver once.
    Solve(SolveArgs),
    /// Ground-state probability over a parameter grid.
    Sweep(SweepArgs),
    /// Random-instance benchmark report.
    Bench(BenchArgs),
    /// Critical points of the frozen landscape.
    Critical(CriticalArgs),
    /// Basins of attraction of the frozen landscape.
    Basins(BasinsArgs),
    /// S0/S1 phase map over (gamma, P).
    Phasemap(PhasemapArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::Solve(_) => "solve",
            Command::Sweep(_) => "sweep",
            Command::Bench(_) => "bench",
            Command::Critical(_) => "critical",
            Command::Basins(_) => "basins",
            Command::Phasemap(_) => "phasemap",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Mobius,
    Jg,
    Sk,
    #[value(alias = "3reg", alias = "three-regular")]
    ThreeRegular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// Inline graph description.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GraphArgs {
    #[arg(long, value_enum, default_value = "mobius")]
    pub family: Family,
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    /// Cross-ring coupling.
    #[arg(long = "J", visible_alias = "j", default_value_t = 0.4, allow_hyphen_values = true)]
    pub j: f64,
    /// Distance-k coupling (jg family).
    #[arg(long = "G", visible_alias = "g", default_value_t = 0.0, allow_hyphen_values = true)]
    pub g: f64,
    /// Distance of the G edges (jg family).
    #[arg(long, default_value_t = 2)]
    pub k: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Instance seed for the random families.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Schedule flags of `solve`; unset flags keep the config-file or default
/// value.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ScheduleArgs {
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub p0: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub p_rate: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long)]
    pub damping: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta0: Option<f64>,
    #[arg(long)]
    pub init_scale: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
}

impl ScheduleArgs {
    pub fn settings(&self) -> Vec<(&'static str, String)> {
        let fields = [
            ("n_steps", self.steps.map(|v| v.to_string())),
            ("dt", self.dt.map(|v| format!("{v:?}"))),
            ("eps", self.eps.map(|v| format!("{v:?}"))),
            ("gamma0", self.gamma0.map(|v| format!("{v:?}"))),
            ("p0", self.p0.map(|v| format!("{v:?}"))),
            ("alpha", self.alpha.map(|v| format!("{v:?}"))),
            ("p_rate", self.p_rate.map(|v| format!("{v:?}"))),
            ("delta", self.delta.map(|v| format!("{v:?}"))),
            ("sigma", self.sigma.map(|v| format!("{v:?}"))),
            ("mass", self.mass.map(|v| format!("{v:?}"))),
            ("damping", self.damping.map(|v| format!("{v:?}"))),
            ("beta0", self.beta0.map(|v| format!("{v:?}"))),
            ("init_scale", self.init_scale.map(|v| format!("{v:?}"))),
            ("horizon", self.horizon.map(|v| format!("{v:?}"))),
        ];
        fields.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))).collect()
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SolveArgs {
    #[arg(long)]
    pub solver: String,
    /// Coupling matrix file; overrides the inline graph flags.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[command(flatten)]
    pub inline: GraphArgs,
    /// Instance seed for inline random families.
    #[arg(long, default_value_t = 0)]
    pub instance_seed: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    /// Extra solver settings, `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Trajectory CSV.
    #[arg(long)]
    pub traj: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub stride: usize,
    /// Result JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum Param {
    #[value(name = "J", alias = "j")]
    J,
    #[value(name = "G", alias = "g")]
    G,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, value_enum, default_value = "J")]
    pub param: Param,
    #[arg(long, allow_hyphen_values = true)]
    pub from: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub to: f64,
    #[arg(long)]
    pub step: f64,
    /// Comma-separated solver names.
    #[arg(long, default_value = "visa,cim")]
    pub solvers: String,
    #[arg(long, default_value_t = 1000)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep the configured CIM pump instead of `J - 2`.
    #[arg(long)]
    pub fixed_pump: bool,
    /// `index energy` lines, one per grid point.
    #[arg(long)]
    pub references: Option<PathBuf>,
    /// Solver settings, `key=value` or `solver.key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BenchArgs {
    /// Comma-separated: sk, three_regular.
    #[arg(long, default_value = "sk,three_regular")]
    pub families: String,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Instances per family.
    #[arg(long, default_value_t = 50)]
    pub instances: usize,
    #[arg(long, default_value = "visa,cim,mrcim,svl")]
    pub solvers: String,
    /// `oracle`, `best_found` or a path to `instance energy` lines.
    #[arg(long, default_value = "best_found")]
    pub reference: String,
    /// Best-of attempts per solver and instance.
    #[arg(long, default_value_t = 1)]
    pub attempts: usize,
    /// Long VISA runs added to best-found references.
    #[arg(long, default_value_t = 2)]
    pub reference_runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Visa,
    Cim,
}

/// Frozen landscape parameters.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct LandscapeArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, allow_hyphen_values = true, default_value_t = -0.087)]
    pub gamma: f64,
    /// Collinearity penalty.
    #[arg(long = "P", visible_alias = "p", default_value_t = 0.32)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CriticalArgs {
    #[command(flatten)]
    pub landscape: LandscapeArgs,
    #[arg(long, value_enum, default_value = "visa")]
    pub model: Model,
    #[arg(long, default_value_t = 1000)]
    pub starts: usize,
    /// Half-width of the uniform start box.
    #[arg(long, default_value_t = 1.0)]
    pub start_range: f64,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BasinsArgs {
    #[command(flatten)]
    pub landscape: LandscapeArgs,
    #[arg(long, default_value_t = 4000)]
    pub starts: usize,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PhasemapArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, allow_hyphen_values = true, default_value_t = -0.5)]
    pub gamma_from: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
    pub gamma_to: f64,
    #[arg(long, default_value_t = 0.1)]
    pub gamma_step: f64,
    #[arg(long, default_value_t = 0.0)]
    pub p_from: f64,
    #[arg(long, default_value_t = 1.2)]
    pub p_to: f64,
    #[arg(long, default_value_t = 0.1)]
    pub p_step: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 200)]
    pub starts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Output path; defaults to the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
