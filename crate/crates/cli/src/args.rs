use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kroninfer::denoiser::SvdMode;
use kroninfer::solver::{Method, SolverConfig};

#[derive(Debug, Parser)]
#[command(name = "kroninfer", version, about = "Kronecker graph generation and parameter inference")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a shuffled Kronecker graph.
    Generate(GenerateArgs),
    /// Estimate p and X from an adjacency file.
    Infer(InferArgs),
    /// Singular spectrum, quarter-circle reference and spike predictions.
    Spectrum(SpectrumArgs),
    /// Error and timing sweep over p, N, method and acceleration.
    Bench(BenchArgs),
    /// Per-graph Kronecker features of a TU dataset.
    Features(FeaturesArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output directory.
    #[arg(long, env = "KRONINFER_OUT", default_value = ".")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long = "K", alias = "k")]
    pub k: usize,
    #[arg(long)]
    pub p: f64,
    /// vec(X), column-major, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub x: Vec<f64>,
    /// Fraction of vertices to shuffle.
    #[arg(long, default_value_t = 0.0)]
    pub shuffle: f64,
    #[arg(long)]
    pub undirected: bool,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// File name stem for the outputs.
    #[arg(long, default_value = "graph")]
    pub name: String,
    /// Also write a text edge list.
    #[arg(long)]
    pub edge_list: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Iht,
    Relax,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SvdArg {
    Deterministic,
    Randomized,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Iht)]
    pub method: MethodArg,
    /// IHT step length.
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    /// Displaced-vertex budget for IHT.
    #[arg(long, default_value_t = 5)]
    pub s: usize,
    /// l1 penalty for Relax; defaults to the noise scale.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Number of sampled column blocks.
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Override the number of entries kept by hard thresholding.
    #[arg(long)]
    pub keep: Option<usize>,
    #[arg(long, value_enum, default_value_t = SvdArg::Deterministic)]
    pub svd: SvdArg,
    #[arg(long, default_value_t = 10)]
    pub oversample: usize,
    #[arg(long, default_value_t = 2)]
    pub power_q: usize,
    /// Randomized SVD plus 100 sampled blocks (unless --blocks is given).
    #[arg(long)]
    pub accelerate: bool,
}

impl SolverArgs {
    pub fn config(&self, seed: u64) -> SolverConfig {
        let randomized = SvdMode::Randomized {
            oversample: self.oversample,
            power_q: self.power_q,
        };
        let mut cfg = SolverConfig {
            method: match self.method {
                MethodArg::Iht => Method::Iht,
                MethodArg::Relax => Method::Relax,
            },
            eta: self.eta,
            s: self.s,
            gamma: self.gamma,
            max_iter: self.max_iter,
            tol: self.tol,
            block_count: self.blocks,
            keep_count: self.keep,
            svd_mode: match self.svd {
                SvdArg::Deterministic => SvdMode::Deterministic,
                SvdArg::Randomized => randomized,
            },
            seed,
        };
        if self.accelerate {
            cfg.svd_mode = randomized;
            cfg.block_count = Some(self.blocks.unwrap_or(100));
        }
        cfg
    }
}

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Adjacency file: `.bin` binary, anything else an edge list.
    #[arg(long)]
    pub adjacency: PathBuf,
    #[arg(long)]
    pub m: usize,
    /// True vec(X); adds an `mse` column.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub truth: Option<Vec<f64>>,
    #[arg(long, default_value = "inference")]
    pub name: String,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Adjacency file; otherwise a graph is generated from the flags below.
    #[arg(long)]
    pub adjacency: Option<PathBuf>,
    #[arg(long)]
    pub m: usize,
    #[arg(long = "K", alias = "k", required_unless_present = "adjacency")]
    pub k: Option<usize>,
    #[arg(long, required_unless_present = "adjacency")]
    pub p: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required_unless_present = "adjacency")]
    pub x: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.0)]
    pub shuffle: f64,
    #[arg(long)]
    pub undirected: bool,
    /// Points on the quarter-circle reference curve.
    #[arg(long, default_value_t = 512)]
    pub curve_points: usize,
    #[arg(long, default_value = "spectrum")]
    pub name: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AccelerateArg {
    Off,
    On,
    Both,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.8")]
    pub p: Vec<f64>,
    /// Graph sizes; each must be a power of m.
    #[arg(long, value_delimiter = ',', default_value = "1024")]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "5.25,0.25,2.25,-7.75")]
    pub x: Vec<f64>,
    #[arg(long, default_value_t = 0.2)]
    pub shuffle: f64,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "iht")]
    pub methods: Vec<MethodArg>,
    #[arg(long, value_enum, default_value_t = AccelerateArg::Off)]
    pub accelerate: AccelerateArg,
    #[arg(long, default_value_t = 5)]
    pub s: usize,
    /// Fresh graphs per configuration.
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, default_value = "bench")]
    pub name: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Directory holding DS_A.txt, DS_graph_indicator.txt and DS_graph_labels.txt.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    /// Skip standardization.
    #[arg(long)]
    pub raw: bool,
    #[arg(long, default_value = "features")]
    pub name: String,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}
