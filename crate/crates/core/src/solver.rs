//! Grover driver: classical solution enumeration, iteration planning, the
//! amplification loop on either engine, and measurement reports.
//!
//! Everything downstream of the oracle is checked against the classical
//! evaluator: planning needs the exact solution count, and verification
//! compares the oracle's phase table against brute force.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use thiserror::Error;

use crate::circuit::{Circuit, Gate, QubitId};
use crate::formula::{Assignment, BVProblem, EvalError};
use crate::oracle::{build_diffuser, build_oracle, LayoutMode, OracleError, OracleLayout};
use crate::simkernel::{
    dense_run_with_limit, extract_effective_oracle, sample_from_probs, EffectiveOracle, SimError,
    StateVector, DEFAULT_DENSE_LIMIT,
};

/// Brute-force enumeration cap, in search bits.
pub const ENUMERATION_LIMIT: usize = 28;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("{bits} search bits exceed the {limit}-bit enumeration budget")]
    BudgetExceeded { bits: usize, limit: usize },
    #[error("no solutions: the Grover iteration count is undefined")]
    NoSolutions,
    #[error(
        "{marked} of {space} basis states are marked; amplitude amplification \
         requires the marked states to be a strict minority"
    )]
    MajorityMarked { marked: u64, space: u64 },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Decode a search value (without the addition bit) into an assignment:
/// bit `i` is boolean `i`, then each variable's bits LSB-first.
pub fn decode_assignment(p: &BVProblem, v: u64) -> Assignment {
    let m = p.skeleton.var_count;
    let bools = (0..m).map(|i| v >> i & 1 == 1).collect();
    let mut pos = m;
    let mut bv = Vec::with_capacity(p.bv_vars.len());
    for (_, w) in &p.bv_vars {
        bv.push(v >> pos & crate::formula::mask(*w));
        pos += w;
    }
    Assignment { bools, bv }
}

pub fn encode_assignment(p: &BVProblem, a: &Assignment) -> u64 {
    let mut v = 0u64;
    for (i, b) in a.bools.iter().enumerate() {
        if *b {
            v |= 1 << i;
        }
    }
    let mut pos = p.skeleton.var_count;
    for (val, (_, w)) in a.bv.iter().zip(&p.bv_vars) {
        v |= val << pos;
        pos += w;
    }
    v
}

/// All satisfying assignments, by exhaustive search.
pub fn enumerate_solutions(p: &BVProblem) -> Result<Vec<Assignment>, SolverError> {
    let bits = p.search_bits();
    if bits > ENUMERATION_LIMIT {
        return Err(SolverError::BudgetExceeded {
            bits,
            limit: ENUMERATION_LIMIT,
        });
    }
    let mut out = Vec::new();
    for v in 0..1u64 << bits {
        let a = decode_assignment(p, v);
        if p.eval_formula(&a)? {
            out.push(a);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct IterationPlan {
    /// Search-register width including the search-space-doubling qubit.
    pub search_bits: usize,
    pub space_size: u64,
    pub solution_count: u64,
    pub iterations: u64,
    pub predicted_success: f64,
}

/// Theoretical success probability after `k` iterations with `m` marked
/// states out of `n`: `sin^2((2k+1) * asin(sqrt(m/n)))`.
pub fn success_probability(n: u64, m: u64, k: u64) -> f64 {
    let theta = (m as f64 / n as f64).sqrt().asin();
    ((2 * k + 1) as f64 * theta).sin().powi(2)
}

/// Plan the iteration count: `k = max(1, floor(pi/4 * sqrt(n/m)))`.
pub fn plan_iterations(search_bits: usize, solution_count: u64) -> Result<IterationPlan, SolverError> {
    let n = 1u64 << search_bits;
    if solution_count == 0 {
        return Err(SolverError::NoSolutions);
    }
    if 2 * solution_count >= n {
        return Err(SolverError::MajorityMarked {
            marked: solution_count,
            space: n,
        });
    }
    let raw = std::f64::consts::FRAC_PI_4 * (n as f64 / solution_count as f64).sqrt();
    let iterations = (raw.floor() as u64).max(1);
    Ok(IterationPlan {
        search_bits,
        space_size: n,
        solution_count,
        iterations,
        predicted_success: success_probability(n, solution_count, iterations),
    })
}

/// Exact Grover evolution against a phase table.
///
/// The whole circuit acts on the uniform-in-search, zero-in-ancilla
/// subspace as "apply oracle phases, invert about the mean", so the state
/// stays real and `n`-dimensional; this runs it directly.
pub fn grover_probabilities(oracle: &EffectiveOracle, iterations: u64) -> Vec<f64> {
    let n = oracle.phases().len();
    let mut amps = vec![1.0 / (n as f64).sqrt(); n];
    for _ in 0..iterations {
        for (a, p) in amps.iter_mut().zip(oracle.phases()) {
            if *p < 0 {
                *a = -*a;
            }
        }
        let mean = amps.iter().sum::<f64>() / n as f64;
        for a in amps.iter_mut() {
            *a = 2.0 * mean - *a;
        }
    }
    amps.iter().map(|a| a * a).collect()
}

/// Full dense Grover run: Hadamard preparation on the search register, then
/// `iterations` rounds of oracle plus diffuser.
pub fn run_grover_dense(
    oracle: &Circuit,
    search: &[QubitId],
    iterations: u64,
    dense_limit: usize,
) -> Result<StateVector, SolverError> {
    let n = oracle.qubit_count();
    let diffuser = build_diffuser(n, search)?;
    let mut prep = Circuit::new(n);
    for q in search {
        prep.push(Gate::H(*q));
    }
    let mut state = StateVector::zero_state(n);
    dense_run_with_limit(&mut state, &prep, dense_limit)?;
    for _ in 0..iterations {
        dense_run_with_limit(&mut state, oracle, dense_limit)?;
        dense_run_with_limit(&mut state, &diffuser, dense_limit)?;
    }
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Auto,
    Dense,
    Effective,
}

/// Resolve `Auto` against the circuit size.
pub fn resolve_engine(engine: Engine, total_qubits: usize, dense_limit: usize) -> Engine {
    match engine {
        Engine::Auto => {
            if total_qubits <= dense_limit {
                Engine::Dense
            } else {
                Engine::Effective
            }
        }
        other => other,
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub layout: LayoutMode,
    pub engine: Engine,
    /// Override the planned iteration count.
    pub iterations: Option<u64>,
    pub shots: u64,
    pub seed: u64,
    pub dense_limit: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            layout: LayoutMode::Paper,
            engine: Engine::Auto,
            iterations: None,
            shots: 1024,
            seed: 0,
            dense_limit: DEFAULT_DENSE_LIMIT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Sat,
    Unsat,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SolutionInfo {
    /// Booleans in index order, then each variable MSB-first.
    pub bitstring: String,
    pub bools: Vec<bool>,
    /// Declared variables with their unsigned values, in declaration order.
    pub values: Vec<(String, u64)>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct MeasurementRow {
    /// Raw search-register value, addition bit included.
    pub value: u64,
    pub bitstring: String,
    pub addition: bool,
    pub count: u64,
    /// Exact probability from the amplitude-level simulation.
    pub probability: f64,
    /// Probability above twice the uniform baseline.
    pub candidate: bool,
    /// Classically re-verified satisfying assignment. Sampling noise can
    /// never label a non-solution row as a solution.
    pub solution: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SolveReport {
    pub status: Status,
    pub layout_mode: LayoutMode,
    pub engine: Engine,
    pub total_qubits: usize,
    pub search_bits: usize,
    pub space_size: u64,
    pub solution_count: u64,
    pub iterations: u64,
    pub predicted_success: f64,
    pub observed_success: f64,
    pub shots: u64,
    pub seed: u64,
    pub solutions: Vec<SolutionInfo>,
    pub measurements: Vec<MeasurementRow>,
}

/// End-to-end solve: build the oracle, enumerate solutions classically, plan
/// and run Grover on the resolved engine, sample the search register.
pub fn solve(p: &BVProblem, opts: &SolveOptions) -> Result<SolveReport, SolverError> {
    let (circuit, layout) = build_oracle(p, opts.layout)?;
    let solutions = enumerate_solutions(p)?;
    let m = solutions.len() as u64;
    let engine = resolve_engine(opts.engine, layout.total_qubits, opts.dense_limit);

    let solution_infos: Vec<SolutionInfo> = solutions
        .iter()
        .map(|a| SolutionInfo {
            bitstring: p.format_bitstring(a),
            bools: a.bools.clone(),
            values: p
                .bv_vars
                .iter()
                .zip(&a.bv)
                .map(|((name, _), v)| (name.clone(), *v))
                .collect(),
        })
        .collect();

    let mut report = SolveReport {
        status: if m == 0 { Status::Unsat } else { Status::Sat },
        layout_mode: opts.layout,
        engine,
        total_qubits: layout.total_qubits,
        search_bits: layout.search_bits(),
        space_size: 1u64 << layout.search_bits(),
        solution_count: m,
        iterations: 0,
        predicted_success: 0.0,
        observed_success: 0.0,
        shots: opts.shots,
        seed: opts.seed,
        solutions: solution_infos,
        measurements: Vec::new(),
    };
    if m == 0 {
        return Ok(report);
    }

    let plan = plan_iterations(layout.search_bits(), m)?;
    let k = opts.iterations.unwrap_or(plan.iterations);
    report.iterations = k;
    report.predicted_success = success_probability(report.space_size, m, k);

    let probs = match engine {
        Engine::Dense => {
            let state = run_grover_dense(&circuit, &layout.search, k, opts.dense_limit)?;
            state.marginal(&layout.search)
        }
        _ => {
            let table = extract_effective_oracle(&circuit, &layout.search)?;
            grover_probabilities(&table, k)
        }
    };
    let counts = sample_from_probs(&probs, opts.shots, opts.seed);

    let marked: BTreeSet<u64> = solutions
        .iter()
        .map(|a| layout.assignment_to_value(a, false))
        .collect();
    let baseline = 2.0 / report.space_size as f64;
    // report the union of sampled values and high-probability candidates
    let mut rows: BTreeSet<u64> = counts.counts.keys().copied().collect();
    for (v, p) in probs.iter().enumerate() {
        if *p > baseline {
            rows.insert(v as u64);
        }
    }
    let mut hits = 0u64;
    for value in rows {
        let (a, addition) = layout.value_to_assignment(value);
        let count = counts.counts.get(&value).copied().unwrap_or(0);
        let solution = !addition && marked.contains(&value);
        if solution {
            hits += count;
        }
        report.measurements.push(MeasurementRow {
            value,
            bitstring: p.format_bitstring(&a),
            addition,
            count,
            probability: probs[value as usize],
            candidate: probs[value as usize] > baseline,
            solution,
        });
    }
    report.observed_success = hits as f64 / opts.shots as f64;
    Ok(report)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepRow {
    pub iterations: u64,
    pub predicted_success: f64,
    /// Exact amplitude-level success probability from simulation.
    pub exact_success: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepReport {
    pub search_bits: usize,
    pub space_size: u64,
    pub solution_count: u64,
    pub planned_iterations: u64,
    pub rows: Vec<SweepRow>,
}

/// Exact success probability for every iteration count in `range`.
pub fn sweep(
    p: &BVProblem,
    layout: LayoutMode,
    range: RangeInclusive<u64>,
) -> Result<SweepReport, SolverError> {
    let (circuit, map) = build_oracle(p, layout)?;
    let table = extract_effective_oracle(&circuit, &map.search)?;
    let m = table.marked_count() as u64;
    let plan = plan_iterations(map.search_bits(), m)?;
    let marked: Vec<u64> = table.marked().collect();
    let mut rows = Vec::new();
    for k in range {
        let probs = grover_probabilities(&table, k);
        let exact = marked.iter().map(|v| probs[*v as usize]).sum();
        rows.push(SweepRow {
            iterations: k,
            predicted_success: success_probability(plan.space_size, m, k),
            exact_success: exact,
        });
    }
    Ok(SweepReport {
        search_bits: map.search_bits(),
        space_size: plan.space_size,
        solution_count: m,
        planned_iterations: plan.iterations,
        rows,
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct VerifyReport {
    pub checked: u64,
    pub mismatch_count: u64,
    /// First few offending search values, for diagnostics.
    pub first_mismatches: Vec<u64>,
    /// Set when the circuit fails reversibility itself: an ancilla left
    /// dirty or a search qubit rewritten.
    pub structural_error: Option<String>,
    pub passed: bool,
}

/// Compare an oracle circuit's phase table against brute-force evaluation.
pub fn verify_circuit(
    p: &BVProblem,
    circuit: &Circuit,
    layout: &OracleLayout,
) -> Result<VerifyReport, SolverError> {
    let bits = layout.search_bits();
    if bits > ENUMERATION_LIMIT {
        return Err(SolverError::BudgetExceeded {
            bits,
            limit: ENUMERATION_LIMIT,
        });
    }
    let table = match extract_effective_oracle(circuit, &layout.search) {
        Ok(t) => t,
        Err(e @ (SimError::AncillaNotRestored { .. } | SimError::SearchModified { .. })) => {
            return Ok(VerifyReport {
                checked: 0,
                mismatch_count: 0,
                first_mismatches: Vec::new(),
                structural_error: Some(e.to_string()),
                passed: false,
            })
        }
        Err(e) => return Err(e.into()),
    };
    let mut mismatch_count = 0u64;
    let mut first_mismatches = Vec::new();
    let n = 1u64 << bits;
    for v in 0..n {
        let (a, addition) = layout.value_to_assignment(v);
        let expected = !addition && p.eval_formula(&a)?;
        let actual = table.phases()[v as usize] < 0;
        if expected != actual {
            mismatch_count += 1;
            if first_mismatches.len() < 8 {
                first_mismatches.push(v);
            }
        }
    }
    Ok(VerifyReport {
        checked: n,
        mismatch_count,
        first_mismatches,
        structural_error: None,
        passed: mismatch_count == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse::parse_problem;

    const F_EVAL: &str = "(problem (vars (a 2) (b 2))\n  (cnf (clause x y z) (clause x (not y) z))\n  (atom x (< (+ a b) (^ a b)))\n  (atom y (> (+ a b) (^ a b)))\n  (atom z (= (+ a b) 1)))";

    #[test]
    fn plans_match_hand_computation() {
        let plan = plan_iterations(8, 6).unwrap();
        assert_eq!(plan.iterations, 5);
        let plan = plan_iterations(7, 6).unwrap();
        assert_eq!(plan.iterations, 3);
        let plan = plan_iterations(6, 2).unwrap();
        assert_eq!(plan.iterations, 4);
    }

    #[test]
    fn planning_edge_cases() {
        assert_eq!(plan_iterations(4, 0), Err(SolverError::NoSolutions));
        assert_eq!(
            plan_iterations(4, 8),
            Err(SolverError::MajorityMarked {
                marked: 8,
                space: 16
            })
        );
        // tiny ratios still run at least one iteration
        assert_eq!(plan_iterations(2, 1).unwrap().iterations, 1);
    }

    #[test]
    fn success_probability_formula() {
        let p = success_probability(256, 6, 5);
        assert!((p - 0.985_698_339_767_934).abs() < 1e-12, "{p}");
    }

    #[test]
    fn enumeration_finds_the_fixture_solutions() {
        let p = parse_problem(F_EVAL).unwrap();
        let sols = enumerate_solutions(&p).unwrap();
        let values: Vec<u64> = sols.iter().map(|a| encode_assignment(&p, a)).collect();
        assert_eq!(values.len(), 6);
        for a in &sols {
            assert!(p.eval_formula(a).unwrap());
        }
    }

    #[test]
    fn decode_round_trips() {
        let p = parse_problem(F_EVAL).unwrap();
        for v in 0..1u64 << p.search_bits() {
            assert_eq!(encode_assignment(&p, &decode_assignment(&p, v)), v);
        }
    }

    #[test]
    fn solve_reports_high_success_on_fixture() {
        let p = parse_problem(F_EVAL).unwrap();
        let r = solve(&p, &SolveOptions::default()).unwrap();
        assert_eq!(r.status, Status::Sat);
        assert_eq!(r.solution_count, 6);
        assert_eq!(r.iterations, 5);
        assert!(r.observed_success > 0.9, "{}", r.observed_success);
        assert_eq!(r.engine, Engine::Effective); // 32 qubits exceeds dense
    }

    #[test]
    fn unsat_problem_reports_unsat() {
        let p = parse_problem(
            "(problem (vars (a 2)) (cnf (clause x)) (atom x (!= (& a a) a)))",
        )
        .unwrap();
        let r = solve(&p, &SolveOptions::default()).unwrap();
        assert_eq!(r.status, Status::Unsat);
        assert!(r.measurements.is_empty());
    }

    #[test]
    fn verify_passes_and_detects_corruption() {
        let p = parse_problem(F_EVAL).unwrap();
        let (c, layout) = build_oracle(&p, LayoutMode::Compact).unwrap();
        assert!(verify_circuit(&p, &c, &layout).unwrap().passed);

        // an extra X injected mid-circuit leaves the flag dirty at the end
        let mut gates: Vec<Gate> = c.gates().to_vec();
        gates.insert(gates.len() / 2, Gate::X(layout.smt_flag));
        let mut bad = Circuit::new(c.qubit_count());
        for g in gates {
            bad.append(g).unwrap();
        }
        let r = verify_circuit(&p, &bad, &layout).unwrap();
        assert!(!r.passed);
    }

    #[test]
    fn dense_and_effective_agree_on_a_small_instance() {
        let p = parse_problem(
            "(problem (vars (a 1) (b 1))\n  (cnf (clause x y z) (clause x (not y) z))\n  (atom x (< (+ a b) (^ a b)))\n  (atom y (> (+ a b) (^ a b)))\n  (atom z (= (+ a b) 1)))",
        )
        .unwrap();
        let dense = solve(
            &p,
            &SolveOptions {
                engine: Engine::Dense,
                layout: LayoutMode::Compact,
                ..Default::default()
            },
        )
        .unwrap();
        let eff = solve(
            &p,
            &SolveOptions {
                engine: Engine::Effective,
                layout: LayoutMode::Compact,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(dense.solution_count, eff.solution_count);
        assert_eq!(dense.iterations, eff.iterations);
        assert!((dense.observed_success - eff.observed_success).abs() < 0.05);
    }

    #[test]
    fn sweep_peaks_at_the_planned_count() {
        let p = parse_problem(F_EVAL).unwrap();
        let r = sweep(&p, LayoutMode::Paper, 1..=8).unwrap();
        assert_eq!(r.planned_iterations, 5);
        let best = r
            .rows
            .iter()
            .max_by(|a, b| a.exact_success.total_cmp(&b.exact_success))
            .unwrap();
        assert_eq!(best.iterations, 5);
        for row in &r.rows {
            assert!((row.exact_success - row.predicted_success).abs() < 1e-9);
        }
    }
}
