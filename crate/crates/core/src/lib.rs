//! Spectral toolkit for one-dimensional Dirac operators `L = L⁰ + V` on
//! `[0, π]` with periodic, antiperiodic and Dirichlet-type boundary
//! conditions: Fourier–Galerkin truncations, Riesz projections by contour
//! quadrature, deviation reports, spectral decompositions and numerical
//! audits of the resolvent and projection estimates.

pub mod basis;
pub mod bounds;
pub mod decomposition;
pub mod error;
pub mod operator;
pub mod potential;
pub mod projections;
pub mod resolvent;
pub mod spectral;

pub use basis::{BasisIndex, BasisIndexSet, BoundaryCondition, Channel, Lattice};
pub use error::{Result, SpectralError};
pub use operator::{build, build_free, build_v, classify_bc, BcClassification, OperatorMatrix};
pub use potential::{tail_norm, PotentialSpec, RSequence};
pub use spectral::{eigen, eigenvalues, Eigen, SpectralFactorization};
pub use resolvent::{find_threshold_n, kvk_hs_norm, principal_sqrt, resolve, KOperator};
pub use projections::{
    deviation, deviation_report, deviation_report_with, free_projection, localization_counts, riesz_projection, select_cutoff,
    ContourSpec, CutoffChoice, CutoffCriterion, DeviationEntry, DeviationReport, ProjectionEngine,
    ProjectionResult,
};
pub use decomposition::{
    expand, reconstruct, reconstruction_sweep, synthesize, unconditionality_test, DecompositionParams,
    FunctionVector, Reconstruction, SampledFunction, UnconditionalityReport,
};
pub use bounds::{
    check_elementary, check_lemma2, check_prop1, check_t_lemma1, check_t_lemma2, run_battery, BatteryConfig,
    BatteryReport, BoundCheck,
};
pub use num_complex::Complex64;

/// Version of this library.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
