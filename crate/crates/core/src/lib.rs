//! Maximal tail inequalities for independent steps in a metric semigroup:
//! exact verification on finite scenarios, a replay harness for the
//! underlying decomposition argument, Monte Carlo estimation for the
//! real-valued families, and a fuzzing front end that hunts for
//! counterexamples.

pub mod axioms;
pub mod bound;
pub mod exec;
pub mod fuzz;
pub mod mc;
pub mod prob;
pub mod proof;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod semigroup;

pub use bound::{
    branch_set, evaluate, hm_bound, hm_params, lt_bound, lt_params, main_term, tail_probability,
    tail_term, BoundParams, BoundValue, EngineError, EvaluationReport, PriorBoundReport,
    PriorKind, TailVariant,
};
pub use fuzz::{generate_case, run_fuzz, FuzzCase, FuzzFailure, FuzzLimits, FuzzSummary};
pub use mc::{
    confidence_z, mc_estimate, mc_verdict, verdict_for, wilson_interval, Estimate, McError,
    McReport, McScenario, McVerdict, RealBound, SamplableLaw,
};
pub use prob::{
    enumerate_outcomes, enumerate_range, event_probability, path_statistics, sample_outcome,
    DrawKey, FiniteDistribution, Outcome, PathStats, ProbError, Scenario, DEFAULT_BUDGET,
};
pub use proof::{
    check_passage_bounds, first_passage_probability, increment_first_passage,
    main_event_membership, passage_bound_battery, stopping_times, verify_decomposition,
    DecompositionReport, NamedCheck, PassageBounds, StoppingProfile,
};
pub use scalar::Scalar;
pub use semigroup::{Element, SemigroupError, SemigroupFamily, SemigroupInstance};
