use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "mindiss", version, about = "Best unitary approximations of coarse-grained dynamics")]
pub struct Cli {
    /// Worker threads for restart and momentum loops.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    /// Where to write the run manifest (default: next to the first output
    /// file, or standard error when there is none).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Channel fidelity between the channel induced by U and a unitary U_IR.
    Fidelity(FidelityArgs),
    /// Mean-field effective unitary and predicted vs exact fidelity over θ.
    Meanfield(MeanfieldArgs),
    /// Direct fidelity maximization, compared with the mean-field unitary.
    Optimize(OptimizeArgs),
    /// Dissipation error of the coarse-grained Dirac walk.
    MuDirac(MuDiracArgs),
    /// Fine and effective dispersion relations of the Dirac walk.
    Dispersion(DispersionArgs),
    /// Momentum blocks of the effective Dirac walk.
    EffectiveWalk(EffectiveWalkArgs),
    /// Wave-packet trace-distance experiment.
    Wavepacket(WavepacketArgs),
    /// Run the acceptance suite.
    Selftest,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct UvStateArgs {
    /// UV density matrix in the text matrix format.
    #[arg(long, conflicts_with = "rho_seed")]
    pub rho: Option<PathBuf>,
    /// Draw a random UV density matrix with this seed instead.
    #[arg(long)]
    pub rho_seed: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FamilyArgs {
    /// Seeded random weak-coupling family `(V_IR ⊗ V_UV) exp(i(θA + θ²B))`.
    #[arg(long, conflicts_with_all = ["v_ir", "v_uv", "h_mix"])]
    pub random_family: Option<u64>,
    /// V_IR for an exponential family `(V_IR ⊗ V_UV) exp(iθH_MIX)`.
    #[arg(long, requires_all = ["v_uv", "h_mix"])]
    pub v_ir: Option<PathBuf>,
    #[arg(long)]
    pub v_uv: Option<PathBuf>,
    #[arg(long)]
    pub h_mix: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub d_ir: usize,
    #[arg(long, default_value_t = 2)]
    pub d_uv: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FidelityArgs {
    /// Full unitary on IR ⊗ UV (IR-major) in the text matrix format.
    #[arg(long)]
    pub u: PathBuf,
    /// IR dimension; the UV dimension follows from the size of U.
    #[arg(long)]
    pub d_ir: usize,
    #[command(flatten)]
    pub uv: UvStateArgs,
    /// Target IR unitary.
    #[arg(long)]
    pub u_ir: PathBuf,
    /// JSON report path (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MeanfieldArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    pub uv: UvStateArgs,
    /// Coupling values to sweep.
    #[arg(long, value_delimiter = ',', default_value = "0.04,0.02,0.01,0.005")]
    pub thetas: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    pub uv: UvStateArgs,
    #[arg(long, default_value_t = 0.01)]
    pub theta: f64,
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
    #[arg(long, default_value_t = 0.5)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub grad_tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Do not seed the first restart with the mean-field unitary.
    #[arg(long)]
    pub no_warm_start: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BlochArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub rx: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub ry: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rz: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MuDiracArgs {
    #[command(flatten)]
    pub r: BlochArgs,
    /// Ring half size for the generic computation.
    #[arg(long = "L", default_value_t = 4)]
    pub half_size: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DispersionArgs {
    #[arg(long)]
    pub theta: f64,
    /// Number of momenta on the grid `k = −π + 2πi/samples`.
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    #[command(flatten)]
    pub r: BlochArgs,
    /// CSV path (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EffectiveWalkArgs {
    #[arg(long)]
    pub theta: f64,
    #[arg(long = "L")]
    pub half_size: usize,
    #[command(flatten)]
    pub r: BlochArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WavepacketArgs {
    /// TOML experiment config.
    #[arg(long)]
    pub config: PathBuf,
    /// Override the Bloch vector of the effective walk.
    #[command(flatten)]
    pub r: BlochArgs,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}
