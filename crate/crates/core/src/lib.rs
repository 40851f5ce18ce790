//! Numerical laboratory for segregation in the asymmetric Hubbard model.
//!
//! The crate is organised bottom-up:
//!
//! - [`lattice`]: finite domains of `Z^d`, boundary counts, enumeration.
//! - [`spectral`]: discrete Laplacian / hopping matrices and their spectra.
//! - [`bulk`]: Brillouin-zone quantities `ε_F(ρ)`, `e(ρ)`, `ξ(ρ)`, `b(ρ)`.
//! - [`bounds`]: the two-sided surface-energy inequality and the search for
//!   the minimal surface energy `a(ρ)`.
//! - [`segregation`]: energy of segregated states and the restricted phase
//!   diagram in the `(ρ1/(1-ρ2), t)` plane.
//! - [`manybody`]: two-species Fock sectors, Falicov-Kimball ground
//!   configurations, exact diagonalization and segregation observables.

pub mod bounds;
pub mod bulk;
mod error;
pub mod lattice;
pub mod manybody;
pub mod segregation;
pub mod spectral;

pub use error::{Error, Result};
