//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error in {path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("non-triangular face in {path} line {line} ({arity} vertices)")]
    NonTriangularFace {
        path: String,
        line: usize,
        arity: usize,
    },

    #[error("empty mesh: {0}")]
    EmptyMesh(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("empty source set for distance query")]
    EmptySourceSet,

    #[error("destination unreachable from vertex {src}")]
    Unreachable { src: u32 },

    #[error("no mesh vertex within radius {radius} nm of ({x}, {y}, {z})")]
    EmptyRegion { x: f64, y: f64, z: f64, radius: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("point count mismatch: expected {expected}, got {got}")]
    PointCountMismatch { expected: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training diverged: loss became non-finite at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("need at least {needed} distinct rows, got {got}")]
    TooFewDistinctRows { needed: usize, got: usize },

    #[error("{0}")]
    InvalidInput(String),

    #[error("synapse {id} lies off the mesh: {reason}")]
    SynapseOffMesh { id: u64, reason: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
