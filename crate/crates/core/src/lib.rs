//! Kolmogorov-Arnold network layers with B-spline and Gaussian RBF bases,
//! plus the tooling to compare them: basis fitting, microbenchmarks,
//! training and finite-difference gradient checks.

pub mod basis;
pub mod basisfit;
pub mod bench;
pub mod cli;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod network;
pub mod tensor;

pub use basis::{BSplineBasis, Basis, BasisFamily, Family, GaussianRbfBasis, GridSpec};
pub use error::{KanError, Result};
pub use layers::{KanLayer, Layer, LayerNorm, LinearLayer};
pub use network::{Network, NetworkSpec, TrainConfig};
pub use tensor::Matrix;
