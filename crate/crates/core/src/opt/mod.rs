//! Optimization engines shared by the allocation solvers.

pub mod bnb;
pub mod flow;
pub mod simplex;

pub use bnb::{branch_and_bound, branch_and_bound_from, MilpSolution, MilpStatus, INTEGRALITY_TOL};
pub use flow::{min_cost_flow, Arc, Flow, FlowNetwork, FlowTarget};
pub use simplex::{simplex_solve, Constraint, LinearProgram, LpOutcome, Relation};
