//! Quantum SMT solving for fixed-width bit-vector formulas.
//!
//! The pipeline: parse an s-expression problem ([`formula`]), compile it
//! into a Grover oracle over a reversible gate set ([`oracle`], [`circuit`]),
//! run amplitude amplification on a dense state-vector engine or a
//! phase-table engine ([`simkernel`]), and report sampled measurements
//! cross-checked against classical brute force ([`solver`]).

pub mod circuit;
pub mod formula;
pub mod oracle;
pub mod simkernel;
pub mod solver;

pub use circuit::{Circuit, CircuitError, Gate, GateKind, QubitId, Register, RegisterRole};
pub use formula::{
    parse::{parse_problem, to_text, ParseError},
    Assignment, Atom, BVExpr, BVProblem, BinOp, Clause, CnfFormula, EvalError, Literal, Rel,
};
pub use oracle::{
    build_oracle, LayoutMode, LayoutRow, ModuleCategory, OracleError, OracleLayout, QubitCategory,
};
pub use simkernel::{
    extract_effective_oracle, sample, sample_from_probs, EffectiveOracle, MeasurementCounts,
    PhasedBitstring, SimError, StateVector, DEFAULT_DENSE_LIMIT,
};
pub use solver::{
    enumerate_solutions, plan_iterations, solve, success_probability, sweep, verify_circuit,
    Engine, IterationPlan, SolveOptions, SolveReport, SolverError, Status, SweepReport,
    VerifyReport,
};
