//! Numerical laboratory for the magnetic Neumann Laplacian `(i∇ + A)²` on a
//! planar domain and on the same domain with a small hole removed.
//!
//! The crate meshes both domains on a shared structured background grid,
//! assembles P1 magnetic stiffness and mass matrices, solves the lowest part
//! of the generalized Hermitian eigenproblem, and compares spectra in the
//! resolvent Hausdorff metric. The identification operators between
//! `L²(Ω)` and `L²(Ω \ K)` are implemented on the nested meshes so that the
//! quasi-unitary closeness conditions can be estimated directly, and the
//! auxiliary integral inequalities used to bound them are checked sample by
//! sample.

pub mod assembly;
pub mod config;
pub mod coupling;
pub mod eigen;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod lemmas;
pub mod linalg;
pub mod plot;
pub mod potential;
pub mod spectra;
pub mod sparse;

pub use error::{Error, Result};

/// Complex scalar used for all discrete fields.
pub type C64 = num_complex::Complex64;
