//! Numerical laboratory for radial solutions of the biharmonic k-Hessian
//! equation `Δ²u = (-1)^k S_k[u] + λ f` on the unit ball and on all of `R^N`.
//!
//! After the radial reduction `v = u'`, `w(t) = -v(e^{-t})` and the rescaling
//! `w = e^{γt} z`, every boundary-value problem becomes a second-order
//! equation for `z(t)`,
//!
//! ```text
//! -z'' + b1 z' + b0 z = α z^k + λ F(t),
//! ```
//!
//! with constant coefficients. The modules below treat that equation from
//! several independent angles so that they can check each other:
//!
//! * [`problem`]: problem definition, derived coefficients, forcing, planar field.
//! * [`transform`]: conversions between `z`, `w` and the radial profile `u(r)`.
//! * [`integrate`]: adaptive Dormand–Prince integration with event location.
//! * [`phaseplane`]: equilibria, manifolds and crossing certificates.
//! * [`shoot`]: shooting on the truncated half-line.
//! * [`greens`]: exact inversion of the linear part, monotone iteration, bounds.
//! * [`branch`]: Newton on a finite-difference grid and natural continuation.
//! * [`acceptance`]: the verification battery run by `khessian verify`.

// NaN-rejecting comparisons are written as negations on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod acceptance;
pub mod branch;
mod error;
pub mod export;
pub mod greens;
pub mod integrate;
pub mod linalg;
pub mod phaseplane;
pub mod problem;
pub mod quadrature;
pub mod shoot;
pub mod transform;

pub use error::{Error, Result};
pub use integrate::{State, Trajectory};
pub use problem::{BoundaryKind, Coefficients, Datum, ProblemSpec};
pub use transform::SolutionProfile;
