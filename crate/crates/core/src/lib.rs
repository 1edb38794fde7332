//! Parameter inference for Kronecker random graphs.
//!
//! A graph on `N = m^K` vertices is drawn from `P = P1 ⊗ ... ⊗ P1` with
//! `P1 = p 1 1^T + X / sqrt(N)`. Inference runs in two stages: spectral
//! denoising of the centered adjacency, then a sparse-outlier regression of
//! the denoised matrix on the linear map `x -> S_K(x)`.
//!
//! The numeric core is generic over `f32`/`f64`; the aliases below fix `f64`.

pub mod denoiser;
pub mod error;
pub mod ingest;
pub mod kron_model;
pub mod linalg;
pub mod linear_map;
pub mod rng;
pub mod scalar;
pub mod solver;

pub use error::{KronError, Result};
pub use ingest::{extract_features, parse_tu_dataset, standardize_features, FeatureTable, Graph, GraphCorpus};
pub use kron_model::{generate, Adjacency, KroneckerSample, Permutation};
pub use solver::{infer, Method, SolverConfig};

pub type Matrix = linalg::Matrix<f64>;
pub type GraphParams = kron_model::GraphParams<f64>;
pub type ProbabilityMatrix = kron_model::ProbabilityMatrix<f64>;
pub type ThetaMap = linear_map::ThetaMap<f64>;
pub type SignalMatrix = linear_map::SignalMatrix<f64>;
pub type SignalOperator = linear_map::SignalOperator<f64>;
pub type Denoised = denoiser::Denoised<f64>;
pub type CenteredOperator = denoiser::CenteredOperator<f64>;
pub type SvdTriple = denoiser::SvdTriple<f64>;
pub type InferenceResult = solver::InferenceResult<f64>;
