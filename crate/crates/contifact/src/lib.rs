//! Spectral factorization of positive-definite matrix densities on the real
//! line.

pub mod completion;
pub mod config;
pub mod error;
pub mod grid;
pub mod io;
pub mod oracles;
pub mod pipeline;
pub mod scalar;
pub mod transforms;
pub mod trigpoly;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use grid::{fourier_forward, fourier_inverse, Domain, Grid, SampledFunction};
pub use oracles::{synth_density, RationalMatrixSpec};
pub use pipeline::{
    factorize, verify_factorization, FactorizationReport, MatrixFunction, PipelineParams,
    SpectralDensity,
};
