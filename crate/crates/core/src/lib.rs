//! Numerical laboratory for quasi-local dynamics on finite quantum lattices.
//!
//! The crate is organized bottom-up:
//! - [`lattice`]: finite metric graphs, balls, volume growth and summability checks;
//! - [`algebra`]: spin and fermion operators, tracial state, conditional expectations;
//! - [`localization`]: decay functions and weighted localization norms;
//! - [`zero_chain`]: time-dependent zero-chains, truncations and Liouvillians;
//! - [`propagator`]: Heisenberg dynamics generated by truncated zero-chains;
//! - [`quadratic`]: exact free-fermion engine for chains with quadratic terms;
//! - [`lab`]: scans that turn locality estimates into finite-size observables.

pub mod algebra;
pub mod error;
pub mod lab;
pub mod lattice;
pub mod linalg;
pub mod localization;
pub mod propagator;
pub mod quadratic;
pub mod zero_chain;

pub use error::{Error, Result};
