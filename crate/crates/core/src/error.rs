use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the numeric and symbolic layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("tau must lie in the upper half-plane (Im tau = {0})")]
    InvalidTau(f64),
    #[error("{what}: argument {at} lies on the lattice")]
    LatticePoint { what: String, at: Complex64 },
    #[error("contour hits singularity at node {node} (z = {z})")]
    ContourSingularity { node: usize, z: Complex64 },
    #[error("residue not converged: last extrapolants differ by {0:e}")]
    ResidueNotConverged(f64),
    #[error("extrapolation not converged: last extrapolants differ by {0:e}")]
    ExtrapolationNotConverged(f64),
    #[error("pole proximity: {0}")]
    PoleProximity(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("size overflow: {0}")]
    Overflow(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("internal consistency failure: {0}")]
    Consistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn lattice(what: impl Into<String>, at: Complex64) -> Error {
    Error::LatticePoint { what: what.into(), at }
}
