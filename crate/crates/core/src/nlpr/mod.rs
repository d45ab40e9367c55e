//! Non-linear phase retrieval: amplitude objectives, the single-material
//! constraint, LBFGS and image extraction.

mod constraint;
mod lbfgs;
mod objective;
mod retrieve;

pub use constraint::{choose_constraint, ConstraintMode, ConstraintParams, DEFAULT_T_LOW};
pub use lbfgs::{
    lbfgs_minimize, FnObjective, IterationRecord, Objective, SolveTrace, SolverSettings, Termination,
};
pub use objective::{
    gradient_constrained, gradient_unconstrained, objective_constrained, objective_unconstrained,
    AmplitudeProblem, ConstrainedObjective, UnconstrainedObjective, MODULUS_GUARD,
};
pub use retrieve::{
    cnlpr_retrieve, cnlpr_retrieve_views, cnlpr_solve, unlpr_retrieve, unlpr_retrieve_views, unlpr_solve,
    z_from_phase, CnlprInit, Retrieval, UnlprInit, Z_INIT_MAX, Z_INIT_MIN,
};
