//! Numerical symplectic homogenization on the cotangent bundle of the torus.
//!
//! The crate is organised bottom-up:
//!
//! - [`dynamics`]: Hamiltonian families, symplectic time-one maps, lifted orbits.
//! - [`genfunc`]: broken-orbit generating functions sampled as landscapes.
//! - [`selector`]: cubical sublevel persistence, min-max selectors, homogenized tables.
//! - [`subdiff`]: Clarke and strong (homological) differentials of sampled functions.
//! - [`measures`]: orbit measures, rotation vectors and average actions.
//! - [`oracle`]: independent reference values (Lax-Oleinik, pendulum action integrals,
//!   exhaustive relative homology).

pub mod dynamics;
pub mod error;
pub mod genfunc;
pub mod linalg;
pub mod measures;
pub mod oracle;
pub mod selector;
pub mod subdiff;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
