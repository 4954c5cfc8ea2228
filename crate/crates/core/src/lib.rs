//! Codes in the real Grassmann manifold `G(k, n)` under the chordal metric.
//!
//! The crate is split by concern:
//!
//! * [`geometry`]: subspaces, principal angles, chordal distance, projection
//!   matrices and the isometric embedding into a sphere of traceless
//!   symmetric matrices.
//! * [`bounds`]: asymptotic rate bounds (Gilbert-Varshamov, Hamming, linear
//!   programming and the Rankin-type bound), finite Rankin bounds and the
//!   crossing points of these curves.
//! * [`blichfeldt`]: the density functions used by the Blichfeldt argument
//!   and randomized checks of the total-density inequality.
//! * [`volume`]: the principal-angle volume form and Monte-Carlo estimates of
//!   the normalized ball mass.
//! * [`packing`]: random, greedy and optimized codes and their comparison
//!   against the bounds.
//! * [`cli`]: the command-line front end.

pub mod blichfeldt;
pub mod bounds;
pub mod cli;
mod error;
pub mod format;
pub mod geometry;
pub mod packing;
pub mod rng;
pub mod verify;
pub mod volume;

pub use error::{Error, Result};
pub use geometry::{
    chordal_distance, embed, orthonormalize, principal_angles, projection_matrix, EmbeddedPoint,
    PrincipalAngles, Subspace,
};
pub use packing::Code;
