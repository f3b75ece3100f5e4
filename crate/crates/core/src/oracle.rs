//! Compiles a [`BVProblem`] into a Grover oracle circuit.
//!
//! The oracle is assembled from five stages: the SAT circuit over the CNF
//! skeleton, theory circuits for each atom's expressions (ripple-carry
//! adder, bitwise ops, constants), magnitude comparators, consistency
//! extractors tying each abstract boolean to its atom's truth value, and the
//! solution inverter that phase-flips consistent satisfying states. A
//! trailing reverse circuit uncomputes everything, restoring all ancillas.
//!
//! Net action on a basis state `|v> (x) |ancillas=0>` is
//! `(-1)^{f(v)} |v> (x) |0>`, where `f` is the classical formula evaluator
//! restricted to the branch where the extra search-space-doubling qubit is 0.

use std::collections::HashMap;

use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, Gate, QubitId, Register, RegisterRole};
use crate::formula::{Assignment, BVExpr, BVProblem, BinOp, CnfFormula, Literal, Rel};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("operand width mismatch: {left} vs {right} bits")]
    WidthMismatch { left: usize, right: usize },
    #[error("constant {value} does not fit in {width} bits")]
    ValueOutOfRange { value: u64, width: usize },
    #[error("comparator needs {needed} internal qubits, got {got}")]
    InsufficientInternals { needed: usize, got: usize },
    #[error("operand registers overlap at bit {bit}")]
    OperandOverlap { bit: usize },
    #[error("empty register")]
    EmptyRegister,
    #[error("solution inverter with no controls")]
    EmptyControls,
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Append a NOT with the given controls, choosing the narrowest gate kind.
fn mct(c: &mut Circuit, controls: &[QubitId], target: QubitId) {
    match controls {
        [] => c.push(Gate::X(target)),
        [a] => c.push(Gate::Cnot {
            control: *a,
            target,
        }),
        [a, b] => c.push(Gate::Ccnot {
            c1: *a,
            c2: *b,
            target,
        }),
        _ => c.push(Gate::Mcx {
            controls: controls.to_vec(),
            target,
        }),
    }
}

/// Quantum circuit for a clause `l1 v l2 v l3`.
///
/// `wires[i]` carries literal `i`'s variable (or a dedicated constant-0
/// qubit for the padding literal). Polarity handling: an `X` conjugation is
/// applied to positive and zero literals so each wire transiently carries
/// the literal's negation, then
/// `CCNOT(w1, w2 -> qa); CCNOT(w3, qa -> qo); X(qo)` computes the
/// disjunction and the ancilla is uncomputed.
pub fn build_clause_circuit(
    qubit_count: usize,
    literals: &[Literal; 3],
    wires: [QubitId; 3],
    qa: QubitId,
    qo: QubitId,
) -> Circuit {
    let mut c = Circuit::new(qubit_count);
    let conjugate = |c: &mut Circuit| {
        for (lit, w) in literals.iter().zip(wires) {
            match lit {
                Literal::Pos(_) | Literal::Zero => c.push(Gate::X(w)),
                Literal::Neg(_) => {}
            }
        }
    };
    conjugate(&mut c);
    c.push(Gate::Ccnot {
        c1: wires[0],
        c2: wires[1],
        target: qa,
    });
    c.push(Gate::Ccnot {
        c1: wires[2],
        c2: qa,
        target: qo,
    });
    c.push(Gate::X(qo));
    c.push(Gate::Ccnot {
        c1: wires[0],
        c2: wires[1],
        target: qa,
    });
    conjugate(&mut c);
    c
}

/// SAT circuit for a CNF formula: one clause circuit per clause, conjoined
/// by a left-deep fold of `CCNOT` gates. Returns the formula output qubit.
///
/// `zero_wires` supplies constant-0 qubits for padding literals, one per
/// zero position within a clause. `conj_outputs` must hold one qubit per
/// binary conjunction node (`clauses - 1` of them); for a single-clause
/// formula the clause output doubles as the formula output.
pub fn build_sat_circuit(
    qubit_count: usize,
    formula: &CnfFormula,
    var_qubits: &[QubitId],
    zero_wires: &[QubitId],
    clause_ancillas: &[QubitId],
    clause_outputs: &[QubitId],
    conj_outputs: &[QubitId],
) -> (Circuit, QubitId) {
    let mut c = Circuit::new(qubit_count);
    for (i, clause) in formula.clauses.iter().enumerate() {
        let mut zero_at = 0usize;
        let mut wires = [QubitId(0); 3];
        for (k, lit) in clause.literals.iter().enumerate() {
            wires[k] = match lit {
                Literal::Pos(v) | Literal::Neg(v) => var_qubits[*v],
                Literal::Zero => {
                    let w = zero_wires[zero_at];
                    zero_at += 1;
                    w
                }
            };
        }
        let cl = build_clause_circuit(
            qubit_count,
            &clause.literals,
            wires,
            clause_ancillas[i],
            clause_outputs[i],
        );
        c.extend(&cl);
    }
    let mut acc = clause_outputs[0];
    for (i, out) in conj_outputs.iter().enumerate() {
        c.push(Gate::Ccnot {
            c1: acc,
            c2: clause_outputs[i + 1],
            target: *out,
        });
        acc = *out;
    }
    (c, acc)
}

/// Ripple-carry modulo-sum: `sum = (a + b) mod 2^n`, operands restored,
/// internal carries computed and locally uncomputed. Qubit lists are
/// LSB-first; `carries` holds the `n - 1` internal carry qubits.
pub fn build_adder(
    qubit_count: usize,
    a: &[QubitId],
    b: &[QubitId],
    sum: &[QubitId],
    carries: &[QubitId],
) -> Result<Circuit, OracleError> {
    let n = a.len();
    if b.len() != n || sum.len() != n {
        return Err(OracleError::WidthMismatch {
            left: n,
            right: b.len().max(sum.len()),
        });
    }
    if carries.len() != n.saturating_sub(1) {
        return Err(OracleError::InsufficientInternals {
            needed: n.saturating_sub(1),
            got: carries.len(),
        });
    }
    check_disjoint(a, b)?;
    let mut c = Circuit::new(qubit_count);
    // half-sums: sum_i = a_i xor b_i
    for i in 0..n {
        c.push(Gate::Cnot {
            control: a[i],
            target: sum[i],
        });
        c.push(Gate::Cnot {
            control: b[i],
            target: sum[i],
        });
    }
    // carries upward: c_1 = a_0 b_0; c_{i+1} = a_i b_i xor (a_i xor b_i) c_i
    if n > 1 {
        c.push(Gate::Ccnot {
            c1: a[0],
            c2: b[0],
            target: carries[0],
        });
    }
    for i in 1..n.saturating_sub(1) {
        c.push(Gate::Ccnot {
            c1: a[i],
            c2: b[i],
            target: carries[i],
        });
        c.push(Gate::Ccnot {
            c1: sum[i],
            c2: carries[i - 1],
            target: carries[i],
        });
    }
    // fold carries into sums top-down, uncomputing each carry right after
    // its use; sum_{i-1} still holds a_{i-1} xor b_{i-1} at that point
    for i in (1..n).rev() {
        c.push(Gate::Cnot {
            control: carries[i - 1],
            target: sum[i],
        });
        if i >= 2 {
            c.push(Gate::Ccnot {
                c1: sum[i - 1],
                c2: carries[i - 2],
                target: carries[i - 1],
            });
        }
        c.push(Gate::Ccnot {
            c1: a[i - 1],
            c2: b[i - 1],
            target: carries[i - 1],
        });
    }
    Ok(c)
}

/// Operands of an adder or bitwise circuit must not share a wire at any bit
/// position; the assembler inserts a fan-out copy when they would.
fn check_disjoint(a: &[QubitId], b: &[QubitId]) -> Result<(), OracleError> {
    for (bit, (x, y)) in a.iter().zip(b).enumerate() {
        if x == y {
            return Err(OracleError::OperandOverlap { bit });
        }
    }
    Ok(())
}

/// Per-bit bitwise circuit; `out` must be fresh zeros, operands restored.
pub fn build_bitwise(
    qubit_count: usize,
    op: BinOp,
    a: &[QubitId],
    b: &[QubitId],
    out: &[QubitId],
) -> Result<Circuit, OracleError> {
    let n = a.len();
    if b.len() != n || out.len() != n {
        return Err(OracleError::WidthMismatch {
            left: n,
            right: b.len().max(out.len()),
        });
    }
    check_disjoint(a, b)?;
    let mut c = Circuit::new(qubit_count);
    for i in 0..n {
        match op {
            BinOp::Xor => {
                c.push(Gate::Cnot {
                    control: a[i],
                    target: out[i],
                });
                c.push(Gate::Cnot {
                    control: b[i],
                    target: out[i],
                });
            }
            BinOp::And => c.push(Gate::Ccnot {
                c1: a[i],
                c2: b[i],
                target: out[i],
            }),
            BinOp::Or => {
                // out = not(not a and not b)
                c.push(Gate::X(a[i]));
                c.push(Gate::X(b[i]));
                c.push(Gate::Ccnot {
                    c1: a[i],
                    c2: b[i],
                    target: out[i],
                });
                c.push(Gate::X(out[i]));
                c.push(Gate::X(a[i]));
                c.push(Gate::X(b[i]));
            }
            BinOp::Add | BinOp::Concat => unreachable!("not a bitwise operator"),
        }
    }
    Ok(c)
}

/// Loads an unsigned constant into fresh zero qubits (LSB-first).
pub fn build_constant(
    qubit_count: usize,
    value: u64,
    out: &[QubitId],
) -> Result<Circuit, OracleError> {
    let width = out.len();
    if width < 64 && value >> width != 0 {
        return Err(OracleError::ValueOutOfRange { value, width });
    }
    let mut c = Circuit::new(qubit_count);
    for (i, q) in out.iter().enumerate() {
        if value >> i & 1 == 1 {
            c.push(Gate::X(*q));
        }
    }
    Ok(c)
}

/// Unsigned magnitude comparator.
///
/// Sets `(o1, o2)` to `(1,0)` if `e1 > e2`, `(0,1)` if `e1 < e2` and
/// `(0,0)` on equality; `(1,1)` is unreachable. Operands are restored;
/// the per-position equality bits in `internals` are left computed for the
/// global reverse circuit to undo.
///
/// The cascade scans from the MSB: position `j` contributes to an output
/// exactly when all higher positions are pairwise equal and the operand
/// bits at `j` differ, so at most one position ever fires.
pub fn build_comparator(
    qubit_count: usize,
    e1: &[QubitId],
    e2: &[QubitId],
    o1: QubitId,
    o2: QubitId,
    internals: &[QubitId],
) -> Result<Circuit, OracleError> {
    let n = e1.len();
    if e2.len() != n {
        return Err(OracleError::WidthMismatch {
            left: n,
            right: e2.len(),
        });
    }
    if internals.len() < n.saturating_sub(1) {
        return Err(OracleError::InsufficientInternals {
            needed: n - 1,
            got: internals.len(),
        });
    }
    let mut c = Circuit::new(qubit_count);
    // eq_j = not (e1_j xor e2_j) for every position above the LSB
    for j in 1..n {
        let e = internals[j - 1];
        if e1[j] != e2[j] {
            c.push(Gate::Cnot {
                control: e1[j],
                target: e,
            });
            c.push(Gate::Cnot {
                control: e2[j],
                target: e,
            });
        }
        c.push(Gate::X(e));
    }
    for j in (0..n).rev() {
        if e1[j] == e2[j] {
            continue; // literally the same wire: never a difference
        }
        let prefix: Vec<QubitId> = (j + 1..n).map(|k| internals[k - 1]).collect();
        // e1_j = 1, e2_j = 0 under an equal prefix: e1 > e2
        c.push(Gate::X(e2[j]));
        let mut controls = prefix.clone();
        controls.push(e1[j]);
        controls.push(e2[j]);
        mct(&mut c, &controls, o1);
        c.push(Gate::X(e2[j]));
        // mirrored for e1 < e2
        c.push(Gate::X(e1[j]));
        let mut controls = prefix;
        controls.push(e2[j]);
        controls.push(e1[j]);
        mct(&mut c, &controls, o2);
        c.push(Gate::X(e1[j]));
    }
    Ok(c)
}

/// Derives the atom truth bit from comparator outputs.
///
/// `Lt`/`Gt` are plain copies of `o2`/`o1` (the assembled oracle aliases
/// them instead of copying); the remaining relations combine both outputs.
pub fn build_atom_circuit(
    qubit_count: usize,
    rel: Rel,
    o1: QubitId,
    o2: QubitId,
    atom_out: QubitId,
) -> Circuit {
    let mut c = Circuit::new(qubit_count);
    match rel {
        Rel::Lt => c.push(Gate::Cnot {
            control: o2,
            target: atom_out,
        }),
        Rel::Gt => c.push(Gate::Cnot {
            control: o1,
            target: atom_out,
        }),
        Rel::Eq => {
            c.push(Gate::X(o1));
            c.push(Gate::X(o2));
            c.push(Gate::Ccnot {
                c1: o1,
                c2: o2,
                target: atom_out,
            });
            c.push(Gate::X(o1));
            c.push(Gate::X(o2));
        }
        Rel::Ne => {
            c.push(Gate::Cnot {
                control: o1,
                target: atom_out,
            });
            c.push(Gate::Cnot {
                control: o2,
                target: atom_out,
            });
        }
        Rel::Le => {
            // not (e1 > e2)
            c.push(Gate::Cnot {
                control: o1,
                target: atom_out,
            });
            c.push(Gate::X(atom_out));
        }
        Rel::Ge => {
            c.push(Gate::Cnot {
                control: o2,
                target: atom_out,
            });
            c.push(Gate::X(atom_out));
        }
    }
    c
}

/// `CNOT(atom -> vB); X(vB)`: the boolean becomes 1 iff it agreed with its
/// atom's truth value.
pub fn build_consistency_extractor(
    qubit_count: usize,
    atom_q: QubitId,
    vb_q: QubitId,
) -> Circuit {
    let mut c = Circuit::new(qubit_count);
    c.push(Gate::Cnot {
        control: atom_q,
        target: vb_q,
    });
    c.push(Gate::X(vb_q));
    c
}

/// Phase-flips exactly the basis states whose consistency bits are all 1,
/// whose skeleton output is 1 and whose search-doubling qubit is 0:
/// a multi-controlled NOT onto the flag, `Z`, and the same multi-control to
/// restore the flag.
pub fn build_solution_inverter(
    qubit_count: usize,
    vb_qubits: &[QubitId],
    qo_f: QubitId,
    q_add: QubitId,
    q_smt: QubitId,
) -> Result<Circuit, OracleError> {
    let mut controls = vb_qubits.to_vec();
    controls.push(qo_f);
    controls.push(q_add);
    if controls.is_empty() {
        return Err(OracleError::EmptyControls);
    }
    let mut c = Circuit::new(qubit_count);
    c.push(Gate::X(q_add)); // condition on the doubling qubit being 0
    mct(&mut c, &controls, q_smt);
    c.push(Gate::Z(q_smt));
    mct(&mut c, &controls, q_smt);
    c.push(Gate::X(q_add));
    Ok(c)
}

/// Inversion about the mean over the search register, up to global phase:
/// `H* X* (H MCX H on the last qubit) X* H*`.
pub fn build_diffuser(qubit_count: usize, search: &[QubitId]) -> Result<Circuit, OracleError> {
    if search.is_empty() {
        return Err(OracleError::EmptyRegister);
    }
    let mut c = Circuit::new(qubit_count);
    for q in search {
        c.push(Gate::H(*q));
    }
    for q in search {
        c.push(Gate::X(*q));
    }
    let (&last, rest) = search.split_last().unwrap();
    c.push(Gate::H(last));
    if rest.is_empty() {
        // single-qubit register: the controlled-Z degenerates to Z
        c.push(Gate::Z(last));
    } else {
        mct(&mut c, rest, last);
    }
    c.push(Gate::H(last));
    for q in search {
        c.push(Gate::X(*q));
    }
    for q in search {
        c.push(Gate::H(*q));
    }
    Ok(c)
}

// ---------------------------------------------------------------------------
// Whole-oracle assembly
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutMode {
    /// Reproduces the reference qubit accounting: full comparator budget
    /// of `(n-1)*2` internal qubits plus one ancilla per comparator.
    Paper,
    /// Allocates only the qubits the constructions actually use.
    Compact,
}

/// Fine-grained qubit classification, one per layout row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QubitCategory {
    BoolVar,
    BvVar,
    SmtAncilla,
    SmtOutput,
    AdditionQubit,
    SatOutput,
    SatExtra,
    AdderOutput,
    BitwiseOutput,
    ComparatorOutput,
    ComparatorInternal,
    ComparatorAncilla,
}

/// Coarse module grouping used by the qubit-accounting report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuleCategory {
    Smt,
    Sat,
    Adder,
    Bitwise,
    Comparator,
}

impl QubitCategory {
    pub fn module(self) -> ModuleCategory {
        match self {
            QubitCategory::BoolVar
            | QubitCategory::BvVar
            | QubitCategory::SmtAncilla
            | QubitCategory::SmtOutput
            | QubitCategory::AdditionQubit => ModuleCategory::Smt,
            QubitCategory::SatOutput | QubitCategory::SatExtra => ModuleCategory::Sat,
            QubitCategory::AdderOutput => ModuleCategory::Adder,
            QubitCategory::BitwiseOutput => ModuleCategory::Bitwise,
            QubitCategory::ComparatorOutput
            | QubitCategory::ComparatorInternal
            | QubitCategory::ComparatorAncilla => ModuleCategory::Comparator,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LayoutRow {
    pub name: String,
    pub category: QubitCategory,
    pub qubits: Vec<QubitId>,
}

/// Qubit map of an assembled oracle.
#[derive(Debug, Clone)]
pub struct OracleLayout {
    pub mode: LayoutMode,
    pub total_qubits: usize,
    /// Measurement order: booleans, bit-vector bits (LSB-first within each
    /// variable), then the search-space-doubling qubit.
    pub search: Vec<QubitId>,
    pub bool_qubits: Vec<QubitId>,
    /// LSB-first qubits of each declared variable.
    pub bv_qubits: Vec<Vec<QubitId>>,
    pub addition: QubitId,
    pub smt_flag: QubitId,
    pub rows: Vec<LayoutRow>,
    bool_count: usize,
    bv_widths: Vec<usize>,
}

impl OracleLayout {
    /// Number of search qubits including the doubling qubit.
    pub fn search_bits(&self) -> usize {
        self.search.len()
    }

    /// Decode a search-table value into an assignment plus the doubling bit.
    /// Bit `j` of `v` is the value of `search[j]`.
    pub fn value_to_assignment(&self, v: u64) -> (Assignment, bool) {
        let bools = (0..self.bool_count).map(|i| v >> i & 1 == 1).collect();
        let mut pos = self.bool_count;
        let mut bv = Vec::with_capacity(self.bv_widths.len());
        for w in &self.bv_widths {
            let mut val = 0u64;
            for bit in 0..*w {
                if v >> (pos + bit) & 1 == 1 {
                    val |= 1 << bit;
                }
            }
            bv.push(val);
            pos += w;
        }
        let add = v >> pos & 1 == 1;
        (Assignment { bools, bv }, add)
    }

    pub fn assignment_to_value(&self, a: &Assignment, add: bool) -> u64 {
        let mut v = 0u64;
        for (i, b) in a.bools.iter().enumerate() {
            if *b {
                v |= 1 << i;
            }
        }
        let mut pos = self.bool_count;
        for (val, w) in a.bv.iter().zip(&self.bv_widths) {
            v |= val << pos;
            pos += w;
        }
        if add {
            v |= 1 << pos;
        }
        v
    }

    /// Per-module qubit totals, in a fixed order.
    pub fn module_totals(&self) -> Vec<(ModuleCategory, usize)> {
        let mut totals: Vec<(ModuleCategory, usize)> = [
            ModuleCategory::Smt,
            ModuleCategory::Sat,
            ModuleCategory::Adder,
            ModuleCategory::Bitwise,
            ModuleCategory::Comparator,
        ]
        .into_iter()
        .map(|m| (m, 0))
        .collect();
        for row in &self.rows {
            let m = row.category.module();
            let slot = totals.iter_mut().find(|(k, _)| *k == m).unwrap();
            slot.1 += row.qubits.len();
        }
        totals
    }

    fn registers(&self) -> Vec<Register> {
        let mut regs = vec![Register::new(
            "search",
            self.search.clone(),
            RegisterRole::Search,
        )];
        for row in &self.rows {
            if matches!(
                row.category,
                QubitCategory::BoolVar | QubitCategory::BvVar | QubitCategory::AdditionQubit
            ) {
                continue; // covered by the search register
            }
            let role = match row.category {
                QubitCategory::SmtOutput => RegisterRole::Flag,
                QubitCategory::SatOutput
                | QubitCategory::SatExtra
                | QubitCategory::AdderOutput
                | QubitCategory::BitwiseOutput
                | QubitCategory::ComparatorOutput => RegisterRole::Output,
                _ => RegisterRole::Ancilla,
            };
            regs.push(Register::new(row.name.clone(), row.qubits.clone(), role));
        }
        regs
    }
}

struct Allocator {
    next: usize,
    rows: Vec<LayoutRow>,
}

impl Allocator {
    fn alloc(&mut self, name: impl Into<String>, category: QubitCategory, count: usize) -> Vec<QubitId> {
        let qs: Vec<QubitId> = (self.next..self.next + count).map(QubitId).collect();
        self.next += count;
        if count > 0 {
            self.rows.push(LayoutRow {
                name: name.into(),
                category,
                qubits: qs.clone(),
            });
        }
        qs
    }

    fn alloc_one(&mut self, name: impl Into<String>, category: QubitCategory) -> QubitId {
        self.alloc(name, category, 1)[0]
    }
}

/// Build the full oracle circuit and its qubit layout.
pub fn build_oracle(
    problem: &BVProblem,
    mode: LayoutMode,
) -> Result<(Circuit, OracleLayout), OracleError> {
    let mut alloc = Allocator {
        next: 0,
        rows: Vec::new(),
    };
    let m = problem.skeleton.var_count;

    let bool_qubits = alloc.alloc("boolean abstract variables", QubitCategory::BoolVar, m);
    let mut bv_qubits = Vec::new();
    for (name, w) in &problem.bv_vars {
        bv_qubits.push(alloc.alloc(format!("variable {name}"), QubitCategory::BvVar, *w));
    }
    let addition = alloc.alloc_one("addition qubit", QubitCategory::AdditionQubit);

    let max_zeros = problem
        .skeleton
        .clauses
        .iter()
        .map(|c| {
            c.literals
                .iter()
                .filter(|l| matches!(l, Literal::Zero))
                .count()
        })
        .max()
        .unwrap_or(0);
    let zero_wires = alloc.alloc("constant-zero literals", QubitCategory::SmtAncilla, max_zeros);

    let n_clauses = problem.skeleton.clauses.len();
    let clause_ancillas = alloc.alloc("clause ancillas", QubitCategory::SmtAncilla, n_clauses);
    let clause_outputs = if n_clauses == 1 {
        alloc.alloc("formula output", QubitCategory::SatOutput, 1)
    } else {
        alloc.alloc("clause outputs", QubitCategory::SatExtra, n_clauses)
    };
    let conj_outputs = if n_clauses >= 2 {
        let mut inner = alloc.alloc(
            "conjunction outputs",
            QubitCategory::SatExtra,
            n_clauses - 2,
        );
        inner.push(alloc.alloc_one("formula output", QubitCategory::SatOutput));
        inner
    } else {
        Vec::new()
    };

    // Theory stage: compile expression trees bottom-up with structural
    // sharing, then one comparator per distinct operand pair.
    let mut expr_cache: HashMap<BVExpr, Vec<QubitId>> = HashMap::new();
    let mut comp_cache: HashMap<(Vec<QubitId>, Vec<QubitId>), (QubitId, QubitId)> = HashMap::new();
    let mut theory = Vec::new(); // deferred gate emission, see below
    enum TheoryStep {
        Expr(ExprPlan),
        Comparator {
            e1: Vec<QubitId>,
            e2: Vec<QubitId>,
            o1: QubitId,
            o2: QubitId,
            internals: Vec<QubitId>,
        },
    }
    enum ExprPlan {
        Const(u64, Vec<QubitId>),
        Adder {
            a: Vec<QubitId>,
            b: Vec<QubitId>,
            sum: Vec<QubitId>,
            carries: Vec<QubitId>,
        },
        Bitwise {
            op: BinOp,
            a: Vec<QubitId>,
            b: Vec<QubitId>,
            out: Vec<QubitId>,
        },
        /// Fan-out copy, used when both operands of an adder or bitwise
        /// circuit resolve to the same wires (e.g. `(+ a a)`).
        Copy {
            src: Vec<QubitId>,
            dst: Vec<QubitId>,
        },
    }

    fn compile_expr(
        e: &BVExpr,
        problem: &BVProblem,
        bv_qubits: &[Vec<QubitId>],
        alloc: &mut Allocator,
        cache: &mut HashMap<BVExpr, Vec<QubitId>>,
        steps: &mut Vec<TheoryStep>,
    ) -> Vec<QubitId> {
        if let Some(q) = cache.get(e) {
            return q.clone();
        }
        let qubits = match e {
            BVExpr::Var { name, .. } => {
                let idx = problem.bv_index(name).expect("validated by the parser");
                bv_qubits[idx].clone()
            }
            BVExpr::Const { value, width } => {
                let out = alloc.alloc(
                    format!("constant {value}"),
                    QubitCategory::SmtAncilla,
                    *width,
                );
                steps.push(TheoryStep::Expr(ExprPlan::Const(*value, out.clone())));
                out
            }
            BVExpr::BinOp { op, lhs, rhs } => {
                let a = compile_expr(lhs, problem, bv_qubits, alloc, cache, steps);
                let mut b = compile_expr(rhs, problem, bv_qubits, alloc, cache, steps);
                if *op != BinOp::Concat && a.iter().zip(&b).any(|(x, y)| x == y) {
                    let copy = alloc.alloc("operand copy", QubitCategory::SmtAncilla, b.len());
                    steps.push(TheoryStep::Expr(ExprPlan::Copy {
                        src: b,
                        dst: copy.clone(),
                    }));
                    b = copy;
                }
                match op {
                    BinOp::Concat => {
                        // high word occupies the upper bit positions
                        let mut q = b.clone();
                        q.extend(a.iter().copied());
                        q
                    }
                    BinOp::Add => {
                        let n = a.len();
                        let sum = alloc.alloc("adder sum", QubitCategory::AdderOutput, n);
                        let carries =
                            alloc.alloc("adder carries", QubitCategory::AdderOutput, n - 1);
                        steps.push(TheoryStep::Expr(ExprPlan::Adder {
                                a,
                                b,
                                sum: sum.clone(),
                                carries,
                            },
                        ));
                        sum
                    }
                    BinOp::Xor | BinOp::And | BinOp::Or => {
                        let n = a.len();
                        let label = match op {
                            BinOp::Xor => "bitwise xor",
                            BinOp::And => "bitwise and",
                            _ => "bitwise or",
                        };
                        let out = alloc.alloc(label, QubitCategory::BitwiseOutput, n);
                        steps.push(TheoryStep::Expr(ExprPlan::Bitwise {
                                op: *op,
                                a,
                                b,
                                out: out.clone(),
                            },
                        ));
                        out
                    }
                }
            }
        };
        cache.insert(e.clone(), qubits.clone());
        qubits
    }

    // atoms in declaration (id) order
    let mut atoms: Vec<(usize, &crate::formula::Atom)> =
        problem.atoms.iter().map(|(v, a)| (*v, a)).collect();
    atoms.sort_by_key(|(_, a)| a.id);

    let mut atom_bits: Vec<(usize, QubitId, Option<(Rel, QubitId, QubitId, QubitId)>)> =
        Vec::new();
    for (var, atom) in &atoms {
        let e1 = compile_expr(
            &atom.lhs,
            problem,
            &bv_qubits,
            &mut alloc,
            &mut expr_cache,
            &mut theory,
        );
        let e2 = compile_expr(
            &atom.rhs,
            problem,
            &bv_qubits,
            &mut alloc,
            &mut expr_cache,
            &mut theory,
        );
        let key = (e1.clone(), e2.clone());
        let (o1, o2) = match comp_cache.get(&key) {
            Some(pair) => *pair,
            None => {
                let w = e1.len();
                let idx = comp_cache.len() + 1;
                let outs = alloc.alloc(
                    format!("comparator {idx} outputs"),
                    QubitCategory::ComparatorOutput,
                    2,
                );
                let internal_count = match mode {
                    LayoutMode::Paper => (w - 1) * 2,
                    LayoutMode::Compact => w - 1,
                };
                let internals = alloc.alloc(
                    format!("comparator {idx} internals"),
                    QubitCategory::ComparatorInternal,
                    internal_count,
                );
                if mode == LayoutMode::Paper {
                    alloc.alloc(
                        format!("comparator {idx} ancilla"),
                        QubitCategory::ComparatorAncilla,
                        1,
                    );
                }
                theory.push(TheoryStep::Comparator {
                    e1,
                    e2,
                    o1: outs[0],
                    o2: outs[1],
                    internals,
                });
                comp_cache.insert(key, (outs[0], outs[1]));
                (outs[0], outs[1])
            }
        };
        // Lt and Gt read a comparator output directly; the other relations
        // derive a dedicated truth bit.
        let name = &problem.bool_names[*var];
        match atom.rel {
            Rel::Lt => atom_bits.push((*var, o2, None)),
            Rel::Gt => atom_bits.push((*var, o1, None)),
            rel => {
                let t = alloc.alloc_one(format!("atom bit {name}"), QubitCategory::SmtAncilla);
                atom_bits.push((*var, t, Some((rel, o1, o2, t))));
            }
        }
    }

    let smt_flag = alloc.alloc_one("SMT output", QubitCategory::SmtOutput);
    let total_qubits = alloc.next;

    let mut search = bool_qubits.clone();
    for q in &bv_qubits {
        search.extend(q.iter().copied());
    }
    search.push(addition);

    let layout = OracleLayout {
        mode,
        total_qubits,
        search,
        bool_qubits: bool_qubits.clone(),
        bv_qubits: bv_qubits.clone(),
        addition,
        smt_flag,
        rows: alloc.rows,
        bool_count: m,
        bv_widths: problem.bv_vars.iter().map(|(_, w)| *w).collect(),
    };

    // --- gate emission ---
    let mut compute = Circuit::new(total_qubits);

    let (sat, qo_f) = build_sat_circuit(
        total_qubits,
        &problem.skeleton,
        &bool_qubits,
        &zero_wires,
        &clause_ancillas,
        &clause_outputs,
        &conj_outputs,
    );
    compute.extend(&sat);

    for step in &theory {
        let part = match step {
            TheoryStep::Expr(ExprPlan::Const(value, out)) => {
                build_constant(total_qubits, *value, out)?
            }
            TheoryStep::Expr(ExprPlan::Adder { a, b, sum, carries }) => {
                build_adder(total_qubits, a, b, sum, carries)?
            }
            TheoryStep::Expr(ExprPlan::Bitwise { op, a, b, out }) => {
                build_bitwise(total_qubits, *op, a, b, out)?
            }
            TheoryStep::Expr(ExprPlan::Copy { src, dst }) => {
                let mut c = Circuit::new(total_qubits);
                for (s, d) in src.iter().zip(dst) {
                    c.push(Gate::Cnot {
                        control: *s,
                        target: *d,
                    });
                }
                c
            }
            TheoryStep::Comparator {
                e1,
                e2,
                o1,
                o2,
                internals,
            } => build_comparator(total_qubits, e1, e2, *o1, *o2, internals)?,
        };
        compute.extend(&part);
    }

    for (_, _, derived) in &atom_bits {
        if let Some((rel, o1, o2, t)) = derived {
            compute.extend(&build_atom_circuit(total_qubits, *rel, *o1, *o2, *t));
        }
    }

    for (var, atom_q, _) in &atom_bits {
        compute.extend(&build_consistency_extractor(
            total_qubits,
            *atom_q,
            bool_qubits[*var],
        ));
    }

    let final_qo_f = qo_f;
    let vb_controls: Vec<QubitId> = atom_bits.iter().map(|(var, _, _)| bool_qubits[*var]).collect();
    let inverter =
        build_solution_inverter(total_qubits, &vb_controls, final_qo_f, addition, smt_flag)?;

    let mut oracle = compute.clone();
    oracle.extend(&inverter);
    oracle.extend(&compute.inverse());

    let circuit = Circuit::with_registers(total_qubits, layout.registers())
        .concat(&oracle)
        .expect("same qubit count");
    Ok((circuit, layout))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse::parse_problem;
    use crate::simkernel::{bitstring_run, extract_effective_oracle, PhasedBitstring};

    const F_EVAL: &str = "(problem (vars (a 2) (b 2))\n  (cnf (clause x y z) (clause x (not y) z))\n  (atom x (< (+ a b) (^ a b)))\n  (atom y (> (+ a b) (^ a b)))\n  (atom z (= (+ a b) 1)))";

    #[test]
    fn paper_layout_qubit_accounting() {
        let p = parse_problem(F_EVAL).unwrap();
        let (_, layout) = build_oracle(&p, LayoutMode::Paper).unwrap();
        assert_eq!(layout.total_qubits, 32);
        let totals = layout.module_totals();
        assert_eq!(
            totals,
            vec![
                (ModuleCategory::Smt, 14),
                (ModuleCategory::Sat, 3),
                (ModuleCategory::Adder, 3),
                (ModuleCategory::Bitwise, 2),
                (ModuleCategory::Comparator, 10),
            ]
        );
    }

    #[test]
    fn compact_layout_is_smaller() {
        let p = parse_problem(F_EVAL).unwrap();
        let (_, layout) = build_oracle(&p, LayoutMode::Compact).unwrap();
        assert_eq!(layout.total_qubits, 28);
    }

    #[test]
    fn oracle_marks_exactly_the_solutions() {
        let p = parse_problem(F_EVAL).unwrap();
        let (c, layout) = build_oracle(&p, LayoutMode::Compact).unwrap();
        let table = extract_effective_oracle(&c, &layout.search).unwrap();
        assert_eq!(table.marked_count(), 6);
        for v in table.marked() {
            let (a, add) = layout.value_to_assignment(v);
            assert!(!add);
            assert!(p.eval_formula(&a).unwrap());
        }
    }

    #[test]
    fn oracle_applied_twice_is_identity() {
        let p = parse_problem(F_EVAL).unwrap();
        let (c, layout) = build_oracle(&p, LayoutMode::Compact).unwrap();
        let twice = c.concat(&c).unwrap();
        for v in [0u64, 0b0010001, 0b1010101, 0b11111111] {
            let mut bits = 0u64;
            for (j, q) in layout.search.iter().enumerate() {
                if v >> j & 1 == 1 {
                    bits |= 1 << q.0;
                }
            }
            let out = bitstring_run(PhasedBitstring::new(bits), &twice).unwrap();
            assert_eq!((out.bits, out.phase), (bits, 1));
        }
    }

    #[test]
    fn pure_sat_problem_has_no_comparator_qubits() {
        let p = parse_problem("(problem (vars) (cnf (clause x y z) (clause (not x) (not y) (not z))))").unwrap();
        let (c, layout) = build_oracle(&p, LayoutMode::Paper).unwrap();
        let totals = layout.module_totals();
        assert_eq!(totals.iter().find(|(m, _)| *m == ModuleCategory::Comparator).unwrap().1, 0);
        let table = extract_effective_oracle(&c, &layout.search).unwrap();
        // 6 satisfying boolean assignments, doubling qubit = 0 branch only
        assert_eq!(table.marked_count(), 6);
    }
}
