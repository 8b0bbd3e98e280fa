//! Construction and verification of convex regions in power-injection space
//! within which the AC power flow equations are guaranteed to admit a
//! solution satisfying operational constraints.
//!
//! The pipeline, bottom to top:
//!
//! * [`netmodel`] — MATPOWER / native-JSON case parsing and the algebraic
//!   network model (admittance matrix, bus typing, limits).
//! * [`acpf`] — the power flow operator, its analytic and quadratic-form
//!   Jacobians, a Newton solver and operational-constraint evaluation.
//! * [`poly`] — multivariate polynomial machinery and assembly of the two
//!   polynomial infeasibility systems (Jacobian-singularity and
//!   per-constraint strict feasibility) in rectangular voltage coordinates.
//! * [`moment`] — order-2 moment relaxations of those systems: moment vector
//!   indexing, localizing matrices, and emission of conic feasibility
//!   problems.
//! * [`conic`] — a conic feasibility solver producing either a feasible
//!   moment vector or an independently verifiable infeasibility certificate.
//! * [`certify`] — the top-level procedures: line-limit tightening
//!   maximization, per-constraint certification, region scaling by
//!   bisection, box fitting, and an ODE-based empirical validator.
//! * [`oracle`] — brute-force ground truth on small networks: feasibility
//!   maps, containment checks and loadability fold points.

pub mod acpf;
pub mod certify;
pub mod conic;
pub mod linalg;
pub mod moment;
pub mod netmodel;
pub mod oracle;
pub mod poly;

pub use netmodel::Network;
