//! Basis adaptation for Hermite (homogeneous) chaos expansions of random
//! fields: multi-index sets, orthonormal Hermite bases, exact rotation of
//! expansions under input isometries, Gaussian/quadratic adaptation with
//! reduced-basis projection, Karhunen-Loeve sampling of log-normal
//! transmissivity fields, a TPFA pressure solver, Monte-Carlo coefficient
//! estimation, and an analytic geometric-series benchmark.

pub mod adaptation;
pub mod elliptic;
pub mod error;
pub mod estimation;
pub mod expansion;
pub mod geometric;
pub mod grid;
pub mod hermite;
pub mod index;
pub mod pipeline;
pub mod random_field;
pub mod rotation;
pub mod split;

pub use adaptation::{
    complete_isometry, eta_kernel, gaussian_adaptation, global_error_norm, project,
    projection_error, quadratic_adaptation, AdaptationScheme, AdaptedExpansion, IsometryField,
    KernelEigen, KernelMatrix,
};
pub use elliptic::{assemble_source, solve_pressure, velocity, EllipticProblem, SourceSpec};
pub use error::{Error, Result};
pub use estimation::{
    density_distance, fit_coefficients, kde, DensityEstimate, KdeSettings, SampleStore,
};
pub use expansion::{psi, ChaosExpansion, GaussianSample};
pub use geometric::{
    closed_form_l1, exact_adapted_coeffs, truncated_adapted_coeffs, GeometricModel,
};
pub use grid::SpatialGrid;
pub use hermite::hermite;
pub use index::{IndexSet, MultiIndex};
pub use pipeline::{Experiment, PipelineConfig};
pub use random_field::{kl_decompose, se_kernel, KLBasis, RandomFieldSpec};
pub use rotation::{gram_entry, gram_entry_1d, rotate_coefficients, GramMatrix, Isometry};
pub use split::{regroup, SplitExpansion, SplitSpec};
