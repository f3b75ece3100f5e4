//! OpenQASM-3 subset export and a matching reader.
//!
//! The exported program uses only `x`, `z`, `h`, `cx`, `ccx` and
//! `ctrl(k) @ x`. Output is line-stable: the same circuit always serializes
//! to the same bytes. Multi-controlled X can optionally be lowered to a
//! `ccx` V-chain with borrowed ancillas appended after the circuit's own
//! qubits, for backends without native multi-controls.

use thiserror::Error;

use super::{Circuit, Gate, QubitId};

/// Serialize with native `ctrl(k) @ x` multi-controls.
pub fn export(c: &Circuit) -> String {
    export_with(c, false)
}

/// Serialize, optionally lowering every MCX with three or more controls to a
/// V-chain of `ccx` gates over fresh trailing ancillas.
pub fn export_with(c: &Circuit, decompose_mcx: bool) -> String {
    let mut body = String::new();
    let mut extra = 0usize;
    if decompose_mcx {
        // one shared ancilla block, sized for the widest MCX
        for g in c.gates() {
            if let Gate::Mcx { controls, .. } = g {
                if controls.len() >= 3 {
                    extra = extra.max(controls.len() - 2);
                }
            }
        }
    }
    let anc_base = c.qubit_count();
    for g in c.gates() {
        match g {
            Gate::X(t) => body.push_str(&format!("x q[{}];\n", t.0)),
            Gate::Z(t) => body.push_str(&format!("z q[{}];\n", t.0)),
            Gate::H(t) => body.push_str(&format!("h q[{}];\n", t.0)),
            Gate::Cnot { control, target } => {
                body.push_str(&format!("cx q[{}], q[{}];\n", control.0, target.0))
            }
            Gate::Ccnot { c1, c2, target } => body.push_str(&format!(
                "ccx q[{}], q[{}], q[{}];\n",
                c1.0, c2.0, target.0
            )),
            Gate::Mcx { controls, target } => {
                if decompose_mcx && controls.len() >= 3 {
                    for line in vchain(controls, *target, anc_base) {
                        body.push_str(&line);
                        body.push('\n');
                    }
                } else {
                    let args: Vec<String> = controls
                        .iter()
                        .chain(std::iter::once(target))
                        .map(|q| format!("q[{}]", q.0))
                        .collect();
                    body.push_str(&format!(
                        "ctrl({}) @ x {};\n",
                        controls.len(),
                        args.join(", ")
                    ));
                }
            }
        }
    }
    let mut out = String::new();
    out.push_str("OPENQASM 3.0;\n");
    out.push_str("include \"stdgates.inc\";\n");
    out.push_str(&format!("qubit[{}] q;\n", c.qubit_count() + extra));
    out.push_str(&body);
    out
}

/// V-chain lowering of an MCX with k >= 3 controls, using k-2 ancillas that
/// start and end in |0>.
fn vchain(controls: &[QubitId], target: QubitId, anc_base: usize) -> Vec<String> {
    let k = controls.len();
    let anc = |i: usize| anc_base + i;
    let mut fwd = Vec::new();
    fwd.push(format!(
        "ccx q[{}], q[{}], q[{}];",
        controls[0].0,
        controls[1].0,
        anc(0)
    ));
    for i in 2..k - 1 {
        fwd.push(format!(
            "ccx q[{}], q[{}], q[{}];",
            controls[i].0,
            anc(i - 2),
            anc(i - 1)
        ));
    }
    let mut lines = fwd.clone();
    lines.push(format!(
        "ccx q[{}], q[{}], q[{}];",
        controls[k - 1].0,
        anc(k - 3),
        target.0
    ));
    lines.extend(fwd.into_iter().rev());
    lines
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QasmReadError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// Read back a program produced by [`export`]. Intended for round-trip
/// checks, not as a general OpenQASM front end.
pub fn read(text: &str) -> Result<Circuit, QasmReadError> {
    let mut circuit: Option<Circuit> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = idx + 1;
        if line.is_empty() || line.starts_with("OPENQASM") || line.starts_with("include") {
            continue;
        }
        let err = |message: &str| QasmReadError::Malformed {
            line: lineno,
            message: message.to_string(),
        };
        if let Some(rest) = line.strip_prefix("qubit[") {
            let n: usize = rest
                .split(']')
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| err("bad qubit declaration"))?;
            circuit = Some(Circuit::new(n));
            continue;
        }
        let c = circuit.as_mut().ok_or_else(|| err("gate before qubit declaration"))?;
        let stmt = line.strip_suffix(';').ok_or_else(|| err("missing ';'"))?;
        let (head, args_text) = match stmt.find(" q[") {
            Some(pos) => (&stmt[..pos], &stmt[pos..]),
            None => return Err(err("missing operands")),
        };
        let args: Vec<QubitId> = args_text
            .split(',')
            .map(|a| {
                a.trim()
                    .strip_prefix("q[")
                    .and_then(|s| s.strip_suffix(']'))
                    .and_then(|s| s.parse().ok())
                    .map(QubitId)
            })
            .collect::<Option<_>>()
            .ok_or_else(|| err("bad operand"))?;
        let gate = match (head.trim(), args.len()) {
            ("x", 1) => Gate::X(args[0]),
            ("z", 1) => Gate::Z(args[0]),
            ("h", 1) => Gate::H(args[0]),
            ("cx", 2) => Gate::Cnot {
                control: args[0],
                target: args[1],
            },
            ("ccx", 3) => Gate::Ccnot {
                c1: args[0],
                c2: args[1],
                target: args[2],
            },
            (ctrl, n) if ctrl.starts_with("ctrl(") && ctrl.ends_with("@ x") && n >= 2 => {
                Gate::Mcx {
                    controls: args[..n - 1].to_vec(),
                    target: args[n - 1],
                }
            }
            _ => return Err(err("unrecognized instruction")),
        };
        c.append(gate)
            .map_err(|e| err(&format!("invalid gate: {e}")))?;
    }
    circuit.ok_or(QasmReadError::Malformed {
        line: 0,
        message: "no qubit declaration".to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_x_program() {
        let mut c = Circuit::new(1);
        c.append(Gate::X(QubitId(0))).unwrap();
        let text = export(&c);
        assert_eq!(text.matches("x q[").count(), 1);
        assert_eq!(export(&c), text);
    }

    #[test]
    fn round_trip_preserves_gates() {
        let mut c = Circuit::new(4);
        c.append(Gate::H(QubitId(0))).unwrap();
        c.append(Gate::Ccnot {
            c1: QubitId(0),
            c2: QubitId(1),
            target: QubitId(2),
        })
        .unwrap();
        c.append(Gate::Mcx {
            controls: vec![QubitId(0), QubitId(1), QubitId(2)],
            target: QubitId(3),
        })
        .unwrap();
        let back = read(&export(&c)).unwrap();
        assert_eq!(back.gates(), c.gates());
    }

    #[test]
    fn vchain_allocates_ancillas() {
        let mut c = Circuit::new(5);
        c.append(Gate::Mcx {
            controls: vec![QubitId(0), QubitId(1), QubitId(2), QubitId(3)],
            target: QubitId(4),
        })
        .unwrap();
        let text = export_with(&c, true);
        assert!(text.contains("qubit[7] q;"));
        assert!(!text.contains("ctrl"));
        // forward chain + tip + reverse chain
        assert_eq!(text.matches("ccx").count(), 5);
    }
}
