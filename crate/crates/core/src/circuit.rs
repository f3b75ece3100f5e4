//! Reversible quantum-circuit intermediate representation.
//!
//! Circuits are ordered gate programs over a fixed set of qubits, grouped
//! into named registers. The gate set is the minimal closure of what the
//! oracle constructions need: `X`, `Z`, `H`, `CNOT`, `CCNOT` and a native
//! multi-controlled `MCX`. Every gate in the set is self-inverse, so circuit
//! inversion is plain gate-list reversal.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Index into a circuit's qubit array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QubitId(pub usize);

impl fmt::Display for QubitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Gate {
    X(QubitId),
    Z(QubitId),
    H(QubitId),
    Cnot { control: QubitId, target: QubitId },
    Ccnot { c1: QubitId, c2: QubitId, target: QubitId },
    Mcx { controls: Vec<QubitId>, target: QubitId },
}

impl Gate {
    /// All qubits the gate touches, controls before target.
    pub fn qubits(&self) -> Vec<QubitId> {
        match self {
            Gate::X(t) | Gate::Z(t) | Gate::H(t) => vec![*t],
            Gate::Cnot { control, target } => vec![*control, *target],
            Gate::Ccnot { c1, c2, target } => vec![*c1, *c2, *target],
            Gate::Mcx { controls, target } => {
                let mut v = controls.clone();
                v.push(*target);
                v
            }
        }
    }

    pub fn kind(&self) -> GateKind {
        match self {
            Gate::X(_) => GateKind::X,
            Gate::Z(_) => GateKind::Z,
            Gate::H(_) => GateKind::H,
            Gate::Cnot { .. } => GateKind::Cnot,
            Gate::Ccnot { .. } => GateKind::Ccnot,
            Gate::Mcx { .. } => GateKind::Mcx,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum GateKind {
    X,
    Z,
    H,
    Cnot,
    Ccnot,
    Mcx,
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GateKind::X => "x",
            GateKind::Z => "z",
            GateKind::H => "h",
            GateKind::Cnot => "cx",
            GateKind::Ccnot => "ccx",
            GateKind::Mcx => "mcx",
        };
        f.write_str(s)
    }
}

/// What a register holds, for layout accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegisterRole {
    Search,
    Ancilla,
    Output,
    Flag,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Register {
    pub name: String,
    pub qubits: Vec<QubitId>,
    pub role: RegisterRole,
}

impl Register {
    pub fn new(name: impl Into<String>, qubits: Vec<QubitId>, role: RegisterRole) -> Self {
        Register {
            name: name.into(),
            qubits,
            role,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CircuitError {
    #[error("qubit {qubit} out of range for circuit with {count} qubits")]
    QubitOutOfRange { qubit: QubitId, count: usize },
    #[error("duplicate qubit {0} within a single gate")]
    DuplicateQubit(QubitId),
    #[error("multi-controlled gate with no controls")]
    EmptyControls,
    #[error("qubit count mismatch: {left} vs {right}")]
    QubitCountMismatch { left: usize, right: usize },
}

/// Ordered reversible-gate program over a fixed qubit array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    qubit_count: usize,
    gates: Vec<Gate>,
    registers: Vec<Register>,
}

impl Circuit {
    pub fn new(qubit_count: usize) -> Self {
        Circuit {
            qubit_count,
            gates: Vec::new(),
            registers: Vec::new(),
        }
    }

    pub fn with_registers(qubit_count: usize, registers: Vec<Register>) -> Self {
        Circuit {
            qubit_count,
            gates: Vec::new(),
            registers,
        }
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    fn check_gate(&self, g: &Gate) -> Result<(), CircuitError> {
        let qs = g.qubits();
        if let Gate::Mcx { controls, .. } = g {
            if controls.is_empty() {
                return Err(CircuitError::EmptyControls);
            }
        }
        for (i, q) in qs.iter().enumerate() {
            if q.0 >= self.qubit_count {
                return Err(CircuitError::QubitOutOfRange {
                    qubit: *q,
                    count: self.qubit_count,
                });
            }
            if qs[..i].contains(q) {
                return Err(CircuitError::DuplicateQubit(*q));
            }
        }
        Ok(())
    }

    pub fn append(&mut self, g: Gate) -> Result<(), CircuitError> {
        self.check_gate(&g)?;
        self.gates.push(g);
        Ok(())
    }

    /// Append with the caller vouching for gate validity. Used by the oracle
    /// builders, which only produce in-range distinct qubits.
    pub fn push(&mut self, g: Gate) {
        debug_assert!(self.check_gate(&g).is_ok(), "invalid gate {g:?}");
        self.gates.push(g);
    }

    /// Reversed gate list. Every gate in the set is self-inverse, so this is
    /// the exact circuit inverse.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            qubit_count: self.qubit_count,
            gates: self.gates.iter().rev().cloned().collect(),
            registers: self.registers.clone(),
        }
    }

    pub fn concat(&self, other: &Circuit) -> Result<Circuit, CircuitError> {
        if self.qubit_count != other.qubit_count {
            return Err(CircuitError::QubitCountMismatch {
                left: self.qubit_count,
                right: other.qubit_count,
            });
        }
        let mut gates = self.gates.clone();
        gates.extend(other.gates.iter().cloned());
        let registers = if self.registers.is_empty() {
            other.registers.clone()
        } else {
            self.registers.clone()
        };
        Ok(Circuit {
            qubit_count: self.qubit_count,
            gates,
            registers,
        })
    }

    /// Append all gates of `other` in place.
    pub fn extend(&mut self, other: &Circuit) {
        debug_assert_eq!(self.qubit_count, other.qubit_count);
        self.gates.extend(other.gates.iter().cloned());
    }

    pub fn stats(&self) -> LayoutReport {
        let mut gate_counts = BTreeMap::new();
        for g in &self.gates {
            *gate_counts.entry(g.kind()).or_insert(0usize) += 1;
        }
        LayoutReport {
            register_qubits: self
                .registers
                .iter()
                .map(|r| (r.name.clone(), r.role, r.qubits.len()))
                .collect(),
            gate_counts,
            total_qubits: self.qubit_count,
            total_gates: self.gates.len(),
        }
    }
}

/// Per-register qubit counts and per-kind gate counts.
#[derive(Debug, Clone)]
pub struct LayoutReport {
    pub register_qubits: Vec<(String, RegisterRole, usize)>,
    pub gate_counts: BTreeMap<GateKind, usize>,
    pub total_qubits: usize,
    pub total_gates: usize,
}

pub mod qasm;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn append_and_count() {
        let mut c = Circuit::new(1);
        c.append(Gate::X(QubitId(0))).unwrap();
        assert_eq!(c.gate_count(), 1);
    }

    #[test]
    fn append_rejects_duplicate_qubit() {
        let mut c = Circuit::new(2);
        let err = c
            .append(Gate::Ccnot {
                c1: QubitId(0),
                c2: QubitId(0),
                target: QubitId(1),
            })
            .unwrap_err();
        assert_eq!(err, CircuitError::DuplicateQubit(QubitId(0)));
    }

    #[test]
    fn append_rejects_out_of_range() {
        let mut c = Circuit::new(1);
        assert!(matches!(
            c.append(Gate::Cnot {
                control: QubitId(0),
                target: QubitId(1)
            }),
            Err(CircuitError::QubitOutOfRange { .. })
        ));
    }

    #[test]
    fn mcx_needs_controls() {
        let mut c = Circuit::new(1);
        assert_eq!(
            c.append(Gate::Mcx {
                controls: vec![],
                target: QubitId(0)
            }),
            Err(CircuitError::EmptyControls)
        );
    }

    #[test]
    fn inverse_reverses_gate_order() {
        let mut c = Circuit::new(2);
        c.append(Gate::X(QubitId(0))).unwrap();
        c.append(Gate::Cnot {
            control: QubitId(0),
            target: QubitId(1),
        })
        .unwrap();
        let inv = c.inverse();
        assert_eq!(
            inv.gates(),
            &[
                Gate::Cnot {
                    control: QubitId(0),
                    target: QubitId(1)
                },
                Gate::X(QubitId(0)),
            ]
        );
        assert_eq!(inv.inverse(), c);
    }

    #[test]
    fn concat_identity_and_counts() {
        let mut c = Circuit::new(2);
        c.append(Gate::X(QubitId(1))).unwrap();
        let empty = Circuit::new(2);
        assert_eq!(empty.concat(&c).unwrap(), c);
        let both = c.concat(&c).unwrap();
        assert_eq!(both.gate_count(), c.gate_count() * 2);
    }

    #[test]
    fn concat_rejects_width_mismatch() {
        let a = Circuit::new(2);
        let b = Circuit::new(3);
        assert!(matches!(
            a.concat(&b),
            Err(CircuitError::QubitCountMismatch { .. })
        ));
    }

    #[test]
    fn empty_stats() {
        let c = Circuit::new(0);
        let s = c.stats();
        assert_eq!(s.total_qubits, 0);
        assert_eq!(s.total_gates, 0);
        assert!(s.gate_counts.is_empty());
    }
}
