//! Generator and runtime for hidden-variable sparse-resultant polynomial
//! solvers.
//!
//! Offline, [`basis_search::generate`] turns a [`poly::PolySystem`] with
//! symbolic coefficients into a [`template::SolverTemplate`]. Online,
//! [`runtime::solve`] fills the template with numbers and returns every root
//! from one generalized eigenvalue problem.

pub mod basis_search;
mod exact;
pub mod numeric;
pub mod pencil;
pub mod poly;
pub mod polytope;
pub mod problems;
pub mod runtime;
pub mod template;

pub use basis_search::{generate, SearchConfig};
pub use poly::{parse_system, PolySystem};
pub use runtime::{solve, CoefficientInstance, SolveOptions};
pub use template::SolverTemplate;
