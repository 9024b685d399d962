//! Performance estimation for decentralized optimization methods.

extern crate openblas_src;

pub mod consensus;
pub mod constraint;
pub mod error;
pub mod experiments;
pub mod function_class;
pub mod gram;
pub mod methods;
pub mod pep;
pub mod problem;
pub mod reconstruct;
pub mod sdp;
pub mod solver;
pub mod verification;

pub use consensus::{ConsensusRegistry, MatrixClassId, SpectralRange};
pub use constraint::{Constraint, Lmi, Relation};
pub use error::{PepError, Result};
pub use function_class::{EvalId, EvalPoint, Evaluation, EvaluationSet, FunctionClass};
pub use gram::{BlockTag, GramLayout, PointExpr, ScalarExpr};
pub use methods::{Method, MethodParams, MethodTrace, MatrixMode, TraceBuilder};
pub use problem::{ConsensusModel, PepBuilder, PepProblem};
pub use pep::{CriterionKind, InitialCondition, PerformanceCriterion, Scenario};
pub use reconstruct::{reconstruct, WorstCaseData};
pub use sdp::{to_standard_form, SdpStandardForm};
pub use solver::{solve, ClarabelAdapter, SolveStatus, Solution, SolverAdapter, SolverSettings};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/gram.md")]
    mod gram {}
    #[doc = include_str!("../../../book/src/function-classes.md")]
    mod function_classes {}
    #[doc = include_str!("../../../book/src/consensus.md")]
    mod consensus {}
    #[doc = include_str!("../../../book/src/methods.md")]
    mod methods {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
}
