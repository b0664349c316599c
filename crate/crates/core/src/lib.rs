//! Solver library for protein side-chain packing posed as a quadratic
//! semi-assignment problem (QSAP).
//!
//! The pipeline: parse or generate an [`instance::Instance`], assemble
//! the sparse quadratic model with [`model::build_model`], solve the
//! continuous relaxation with the penalty method in [`solver`], and
//! round to a feasible binary assignment in [`rounding`]. The [`oracle`]
//! module provides exhaustive enumeration as ground truth at desk scale.

pub mod instance;
pub mod model;
pub mod oracle;
pub mod rounding;
pub mod solver;

pub use instance::{
    generate_random, parse_instance, parse_instance_json, serialize, serialize_json, validate,
    validate_nonnegative, Assignment, GenError, Instance, ParseError, Violation,
};
pub use model::{build_model, Feasibility, Point, QsapModel, SupportSet};
pub use oracle::{brute_force, enumerate_objectives, OracleError, OracleResult, DEFAULT_CAP};
pub use rounding::{round, round_report, RoundReport, RoundingError, RoundingMode};
pub use solver::{
    check_termination, penalty_gradient, penalty_objective, solve, solve_subproblem,
    PenaltyParams, SolveError, SolveReport, SolverState, Termination, TerminationReason,
    TraceEntry,
};

/// Shared test fixtures.
#[doc(hidden)]
pub mod fixtures {
    use crate::instance::{parse_instance, Instance};

    /// Two positions, two rotamers each; optimum 1 attained twice.
    pub const TINY_2X2: &str = "\
cpd 1
positions 2
rotamers 2 2
unary 1 1 1
unary 2 2 2
pair 1 1 2 2 3
pair 1 2 2 1 1
end
";

    pub fn tiny_2x2() -> Instance {
        parse_instance(TINY_2X2).expect("fixture parses")
    }
}
