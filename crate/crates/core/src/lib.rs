//! Geometric multivariate distance matrix regression.
//!
//! The crate tests for association between a design matrix and a set of
//! subject responses that live on the manifold of symmetric positive definite
//! (SPD) matrices. Responses are compared with the affine-invariant geodesic
//! distance, the resulting dissimilarity matrix is Gower-centred, and a
//! permutation test on the pseudo-F statistic yields a p-value.
//!
//! Alongside the test itself the crate carries the machinery for a
//! simulation-based power study on functional-connectivity matrices:
//! block implantation of AR(1) signals that stays inside the SPD cone,
//! Wishart sampling noise, a synthetic base cohort, and a grid runner that
//! compares the geodesic method against the upper-triangle Euclidean and
//! correlation distances.
//!
//! The crate is `no_std` (with `alloc`) when built without the default
//! features. The `std` feature adds `std::error::Error` integration and the
//! `parallel` feature fans the permutation, pairwise-distance and replicate
//! loops out over rayon. Every result is a pure function of its inputs and
//! seed, whatever the worker count.

#![cfg_attr(not(feature = "std"), no_std)]
// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod distances;
mod error;
pub mod fcsim;
pub mod linalg;
pub mod mdmr;
pub mod power;
pub mod rng;

pub use distances::{
    dissimilarity_matrix, dist_affine_invariant, dist_correlation, dist_euclidean, dist_sphere,
    vectorize_upper, CorrelationDistance, DissimilarityMatrix, DistanceMeasure, Response,
};
pub use error::{Error, Result};
pub use fcsim::{
    generate_base_cohort, implant, sample_rho, signal_matrix, simulate_subject, wishart_sample,
    BaseTemplate, CohortConfig, CohortSource, Group, ImplantPlan, SignalParams, SubjectSpec,
};
pub use linalg::{
    cholesky, is_spd, normalize_to_correlation, sym_eigen, whiten, CorrelationMatrix,
    LowerTriangular, Matrix, SpdMatrix, SymMatrix,
};
pub use mdmr::{
    gower_center, hat_matrix, permutation_test, pseudo_f, DesignMatrix, GowerMatrix, HatMatrix,
    MdmrResult, PseudoFVariant,
};
pub use power::{
    estimate_power, run_cell, run_grid, ExperimentGrid, Method, PowerRow, PowerTable, Study,
};
