//! Geometry processing and shape analysis for neuron surface meshes.
//!
//! The crate covers the full path from a triangle mesh of a neuron to a
//! compact whole-cell descriptor:
//!
//! 1. [`mesh`] — mesh I/O, the edge graph, geodesic queries, local region
//!    extraction and surface point sampling.
//! 2. [`skeleton`] — farthest-point skeletonization on the mesh graph,
//!    producing a tree that follows the dendritic shafts.
//! 3. [`sdf`] — shape diameter function by interior ray casting and
//!    SDF-driven mesh segmentation.
//! 4. [`pss`] — extraction of the postsynaptic shape (PSS) around each
//!    synapse by merging segments along the path to the skeleton.
//! 5. [`encoder`] — a point-cloud autoencoder with max-pool latent codes
//!    and chamfer reconstruction loss, trained with hand-derived gradients.
//! 6. [`descriptor`] — codebook quantization of latent codes and the
//!    codeword-by-radius whole-cell histogram, plus the baseline branch-point
//!    and count features.
//! 7. [`analysis`] — k-means and kNN-graph clustering, an SMO-trained RBF
//!    SVM with cross-validation, and partition agreement metrics.
//! 8. [`synth`] — a deterministic generator of synthetic labeled cells used
//!    as the test substrate.
//!
//! All randomized operations take explicit seeds and are deterministic for a
//! given seed, independent of thread count.

pub mod analysis;
pub mod bvh;
pub mod descriptor;
pub mod encoder;
pub mod error;
pub mod kmeans;
pub mod mesh;
pub mod pss;
pub mod sdf;
pub mod skeleton;
pub mod synapse;
pub mod synth;

mod parallel;
pub(crate) mod seed;

pub use error::{Error, Result};
pub use mesh::{Component, PointCloud, TriMesh};
pub use synapse::{Synapse, SynapseSet};
