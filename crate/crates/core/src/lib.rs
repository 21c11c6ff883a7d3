//! Computer-algebra and numerics for the long-term stability of the planar
//! secular Sun–Jupiter–Saturn–Uranus problem.
//!
//! The pipeline runs, in order:
//!
//! * [`orbits`]: ephemeris ingestion, Poincaré variables and a symplectic
//!   N-body integrator used to obtain the mean semi-major axes;
//! * [`expansion`]: expansion of the planar four-body Hamiltonian about
//!   circular orbits as a truncated [`PoissonSeries`];
//! * [`secular`]: two Lie-series normalization steps removing the fast
//!   angles at order two in the masses, plus the three-body resonant
//!   correction, producing the secular Hamiltonian;
//! * [`birkhoff`]: diagonalization of the quadratic part and Birkhoff normal
//!   form up to a chosen order;
//! * [`stability`]: weighted polydisk norms, remainder bounds and the
//!   estimated stability time curve.

pub mod birkhoff;
pub mod error;
pub mod expansion;
pub mod orbits;
pub mod pseries;
pub mod secular;
pub mod stability;

pub use error::{Error, Result};
pub use pseries::{
    BracketBlock, Frequencies, Harmonic, Monomial, PoissonSeries, Term, Trig, TruncationPolicy,
};
