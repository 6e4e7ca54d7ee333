//! Equi-affine invariant spectral geometry on triangle meshes.
//!
//! The pipeline runs mesh → per-face metric → FEM matrices → generalized
//! eigenpairs → diffusion quantities, which feed retrieval, intrinsic
//! symmetry detection and correspondence evaluation.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod cholesky;
pub mod correspondence;
pub mod diffusion;
pub mod eigen;
pub mod error;
pub mod fem;
pub mod mesh;
pub mod metric;
pub mod pipeline;
pub mod retrieval;
pub mod shapes;
pub mod sparse;
pub mod symmetry;
pub mod transform;

pub use correspondence::{
    distortion, evaluate_matching, farthest_point_sample, gromov_hausdorff_bruteforce, Correspondence,
    SampledMetricSpace,
};
pub use diffusion::{
    commute_time, default_scales, diffusion_distance, heat_kernel, hks, DiffusionExponent, HksDescriptor,
};
pub use eigen::{smallest_eigenpairs, EigenOptions, SpectralDecomposition};
pub use error::{Error, ErrorClass, Result};
pub use fem::{assemble, FemSystem};
pub use mesh::{load_mesh, load_mesh_auto, MeshFormat, Point3, TriangleMesh};
pub use metric::{compute_metric_field, MetricField, MetricMode};
pub use pipeline::Analysis;
pub use retrieval::{BagOfFeatures, DatasetManifest, Vocabulary};
pub use symmetry::{detect_symmetries, signature_energy, SignSignature};
pub use transform::{apply_affine, AffineTransform};
