//! Numerical library for robust growth-optimal investing.
//!
//! The library is organized around the generalized principal eigenpair
//! (lambda*, eta*) of the operator `L f = (1/2) sum c_ij d2f/dx_i dx_j` on an
//! open domain `E`: solve it in one dimension by shooting ([`eigen1d`]),
//! construct it in closed form for the geometric-Brownian and simplex
//! families ([`closedform`]), simulate the coordinate process under the
//! driftless dominating measure and under eigenfunction tilts ([`sde`]), and
//! assemble wealth processes together with the growth, numeraire and
//! finite-horizon arbitrage diagnostics that certify the eigenpair
//! ([`growth`]).

pub mod closedform;
pub mod eigen1d;
pub mod growth;
pub mod interp;
pub mod model;
pub mod quad;
pub mod registry;
pub mod report;
pub mod sde;
pub mod specfun;

pub use model::{CovarianceField, DomainKind, DomainSpec, DriftField, Eigenpair};
