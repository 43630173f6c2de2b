//! `convmf` — mean-field theory of deep CNN signal propagation at the
//! command line.
//!
//! Scalar reports (fixed-point, verify-kernel, gen-kernel summaries) print
//! JSON to stdout; tables go to `--out` as CSV with a `<out>.meta.json`
//! sidecar. Output bodies are deterministic given the seed; the sidecar
//! carries the only timestamp. Exit codes: 0 success, 2 usage error,
//! 3 numerical failure.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// A command failure with its exit code: 2 for usage errors (bad flags,
/// malformed files), 3 for numerical failures (non-convergence, overflow,
/// failed verification).
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

#[derive(Parser)]
#[command(
    name = "convmf",
    version,
    about = "Mean-field signal propagation in deep convolutional networks",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the covariance-map fixed point (q*, c*) and its linearization.
    FixedPoint(FixedPointArgs),
    /// Sweep a (σ_w², σ_b²) grid and label each point ordered/critical/chaotic.
    PhaseDiagram(PhaseDiagramArgs),
    /// Per-Fourier-mode eigenvalues and depth scales for a tap profile.
    DepthScales(DepthScalesArgs),
    /// Draw a random convolution kernel and write it to a kernel file.
    GenKernel(GenKernelArgs),
    /// Re-read a kernel file and check norm preservation empirically.
    VerifyKernel(VerifyKernelArgs),
    /// Run a finite-channel simulation (covariance, gradients, or modes).
    Simulate(SimulateArgs),
    /// Singular-value spectrum of a random convolution or dense ensemble.
    Svd(SvdArgs),
}

#[derive(Args)]
pub struct FixedPointArgs {
    /// Activation profile: tanh, erf, or linear.
    #[arg(long)]
    pub activation: String,
    /// Weight variance σ_w².
    #[arg(long = "sigma-w2")]
    pub sigma_w2: f64,
    /// Bias variance σ_b².
    #[arg(long = "sigma-b2")]
    pub sigma_b2: f64,
    /// Fixed-point iteration tolerance.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Fixed-point iteration budget.
    #[arg(long = "max-iter", default_value_t = 10_000)]
    pub max_iter: usize,
}

#[derive(Args)]
pub struct PhaseDiagramArgs {
    /// Activation profile: tanh, erf, or linear.
    #[arg(long)]
    pub activation: String,
    /// σ_w² grid: a number or START:STOP:COUNT.
    #[arg(long = "sigma-w2-grid")]
    pub sigma_w2_grid: String,
    /// σ_b² grid: a number or START:STOP:COUNT.
    #[arg(long = "sigma-b2-grid")]
    pub sigma_b2_grid: String,
    /// Half-width of the critical band: |χ₁ − 1| ≤ tol labels "critical".
    #[arg(long = "phase-tol", default_value_t = 1e-6)]
    pub phase_tol: f64,
    /// Fixed-point iteration tolerance.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Fixed-point iteration budget.
    #[arg(long = "max-iter", default_value_t = 10_000)]
    pub max_iter: usize,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct DepthScalesArgs {
    /// Activation profile: tanh, erf, or linear.
    #[arg(long)]
    pub activation: String,
    /// Weight variance σ_w².
    #[arg(long = "sigma-w2")]
    pub sigma_w2: f64,
    /// Bias variance σ_b².
    #[arg(long = "sigma-b2")]
    pub sigma_b2: f64,
    /// Comma-separated tap variance profile (2k+1 values summing to 1).
    #[arg(long)]
    pub v: String,
    /// Spatial size n (number of Fourier modes).
    #[arg(long)]
    pub n: usize,
    /// Fixed-point iteration tolerance.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Fixed-point iteration budget.
    #[arg(long = "max-iter", default_value_t = 10_000)]
    pub max_iter: usize,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct GenKernelArgs {
    /// Kernel construction: orthogonal, delta, or gaussian.
    #[arg(long)]
    pub kind: String,
    /// Spatial kernel size 𝕜 (the kernel is 𝕜×𝕜).
    #[arg(long)]
    pub ksize: usize,
    /// Input channels.
    #[arg(long)]
    pub cin: usize,
    /// Output channels.
    #[arg(long)]
    pub cout: usize,
    /// Center-tap gain (delta kernels only; default 1).
    #[arg(long)]
    pub gain: Option<f64>,
    /// Weight variance σ_w² (gaussian kernels only; default 1).
    #[arg(long = "sigma-w2")]
    pub sigma_w2: Option<f64>,
    /// Variance grid for gaussian kernels: uniform or one-hot.
    #[arg(long)]
    pub grid: Option<String>,
    /// RNG seed.
    #[arg(long)]
    pub seed: u64,
    /// Output kernel file path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct VerifyKernelArgs {
    /// Kernel file to verify.
    #[arg(long)]
    pub file: PathBuf,
    /// Spatial size of the test inputs (default max(8, 𝕜)).
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of random inputs to test.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Seed for the test inputs.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Maximum allowed |‖K∗x‖/‖x‖ − gain|.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Experiment mode: covariance, gradients, or modes.
    #[arg(long)]
    pub mode: Option<String>,
    /// Flat key=value config file; flags override file values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Activation profile: tanh, erf, or linear.
    #[arg(long)]
    pub activation: Option<String>,
    /// Weight variance σ_w².
    #[arg(long = "sigma-w2")]
    pub sigma_w2: Option<f64>,
    /// Bias variance σ_b².
    #[arg(long = "sigma-b2")]
    pub sigma_b2: Option<f64>,
    /// Comma-separated tap variance profile.
    #[arg(long)]
    pub v: Option<String>,
    /// Spatial size n.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of layers L.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Channels per layer.
    #[arg(long)]
    pub channels: Option<usize>,
    /// Ensemble members (modes mode).
    #[arg(long)]
    pub members: Option<usize>,
    /// RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Initial variance q⁰ (covariance mode; optional for gradients).
    #[arg(long)]
    pub q0: Option<f64>,
    /// Initial correlation c⁰ (covariance mode).
    #[arg(long)]
    pub c0: Option<f64>,
    /// Comma-separated real DFT coefficients of the initial perturbation
    /// (modes mode; length n, symmetric under α ↔ n−α).
    #[arg(long = "eps-coeffs")]
    pub eps_coeffs: Option<String>,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SvdArgs {
    /// Matrix ensemble: blockcirc, dense, or kernel-file.
    #[arg(long)]
    pub ensemble: String,
    /// Spatial size n.
    #[arg(long)]
    pub n: Option<usize>,
    /// Channels c.
    #[arg(long)]
    pub c: Option<usize>,
    /// 1D kernel width (blockcirc; odd).
    #[arg(long)]
    pub ksize: Option<usize>,
    /// RNG seed (blockcirc, dense).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Kernel file (kernel-file ensemble).
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::FixedPoint(args) => commands::cmd_fixed_point(args),
        Command::PhaseDiagram(args) => commands::cmd_phase_diagram(args),
        Command::DepthScales(args) => commands::cmd_depth_scales(args),
        Command::GenKernel(args) => commands::cmd_gen_kernel(args),
        Command::VerifyKernel(args) => commands::cmd_verify_kernel(args),
        Command::Simulate(args) => commands::cmd_simulate(args),
        Command::Svd(args) => commands::cmd_svd(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.message);
            ExitCode::from(e.code)
        }
    }
}
