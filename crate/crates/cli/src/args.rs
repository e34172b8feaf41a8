use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use edm_core::blocked::DEFAULT_MEMORY_BUDGET;
use edm_core::lowlevel::DEFAULT_SAMPLE_BUDGET;
use edm_core::{Hyperparams, KernelConvention};

#[derive(Debug, Parser)]
#[command(name = "edm", version, about = "Diversity, learnability and image statistics for robot-learning datasets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Diversity entropy of the unified episode features
    Diversity {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        method: MethodArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Per-task memorization ease, expressiveness, priors and dataset learnability
    Learnability {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        task: TaskArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Normalized spread of five image statistics over sampled frames
    Lowlevel {
        #[arg(long)]
        manifest: PathBuf,
        /// Frames to sample
        #[arg(long, default_value_t = DEFAULT_SAMPLE_BUDGET)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Score fixture and directional scenarios; exit 2 if any check fails
    Validate {
        /// Allowed deviation from the reference correlations
        #[arg(long, default_value_t = 0.01)]
        tolerance: f64,
        /// Number of seeds for the directional scenarios
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// One summary row per dataset
    Report {
        #[arg(long = "manifest", required = true)]
        manifests: Vec<PathBuf>,
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        method: MethodArgs,
        #[command(flatten)]
        task: TaskArgs,
        /// Frames sampled for the image statistics
        #[arg(long, default_value_t = DEFAULT_SAMPLE_BUDGET)]
        budget: usize,
        /// Include wall-clock timings per stage (makes output run-dependent)
        #[arg(long)]
        timings: bool,
        /// Directory receiving one feature CSV per dataset
        #[arg(long)]
        emit_features: Option<PathBuf>,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Bandwidth {
    Fixed,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodKind {
    Exact,
    Subsample,
    Truncate,
    Knn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Convention {
    Unnormalized,
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct KernelArgs {
    /// Diversity bandwidth with `--bandwidth fixed`
    #[arg(long, default_value_t = Hyperparams::default().sigma_global)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value_t = Bandwidth::Fixed)]
    pub bandwidth: Bandwidth,
    #[arg(long, value_enum, default_value_t = Convention::Unnormalized)]
    pub kernel: Convention,
    /// Working-set ceiling for exact evaluation, in MiB
    #[arg(long, default_value_t = DEFAULT_MEMORY_BUDGET >> 20)]
    pub memory_mb: usize,
}

impl KernelArgs {
    pub fn convention(&self) -> KernelConvention {
        match self.kernel {
            Convention::Unnormalized => KernelConvention::Unnormalized,
            Convention::Normalized => KernelConvention::Normalized,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct MethodArgs {
    #[arg(long, value_enum, default_value_t = MethodKind::Exact)]
    pub method: MethodKind,
    /// Subsample size
    #[arg(long, default_value_t = 500)]
    pub m: usize,
    /// Subsample repeats
    #[arg(long, default_value_t = 8)]
    pub repeats: usize,
    /// Truncation radius; 5σ when omitted
    #[arg(long)]
    pub tau: Option<f64>,
    /// Neighbors per point
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct TaskArgs {
    #[arg(long, default_value_t = Hyperparams::default().beta)]
    pub beta: f64,
    #[arg(long, default_value_t = Hyperparams::default().sigma_task)]
    pub sigma_task: f64,
    #[arg(long, default_value_t = Hyperparams::default().sigma_center)]
    pub sigma_center: f64,
    #[arg(long, default_value_t = Hyperparams::default().sigma_model)]
    pub sigma_model: f64,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Worker threads; output does not depend on it
    #[arg(long)]
    pub threads: Option<usize>,
    /// Write here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}
