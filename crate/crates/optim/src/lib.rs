//! Self-contained linear and mixed-integer programming for desk-scale problems.
//!
//! The LP engine is a dense bounded-variable tableau simplex: a two-phase
//! primal method for cold solves and a dual method used to re-optimize after
//! bound changes. The MILP engine is a branch-and-bound over binary variables
//! that warm-starts every node from its parent's optimal tableau.
//!
//! Problems can also be written as fixed-format MPS so an external solver can
//! take over instances that are too large for the built-in engines.

mod error;
pub mod external;
mod lp;
mod milp;
mod propagate;
pub mod mps;
mod problem;
mod tableau;

pub use error::OptimError;
pub use lp::solve_lp;
pub use milp::{solve_milp, MilpOptions};
pub use problem::{
    Constraint, LinearProgram, MilpProblem, Relation, Sense, SolveResult, SolveStatus,
};

/// Default absolute tolerance for LP feasibility and optimality checks.
pub const DEFAULT_TOL: f64 = 1e-9;
