//! Execution engines for the gate set.
//!
//! Two engines share the circuit IR:
//!
//! * a dense state-vector simulator over `2^n` complex amplitudes, for full
//!   unitary evolution including `H`;
//! * a classical-reversible bitstring engine with a tracked ±1 phase, valid
//!   for H-free circuits. This is what makes 30+ qubit oracles tractable:
//!   the oracle is a permutation-with-phase on basis states, so its diagonal
//!   action can be tabulated one basis state at a time.
//!
//! Measurement sampling is seeded and deterministic.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::circuit::{Circuit, Gate, QubitId};

/// Largest dense simulation accepted by default: 2^26 amplitudes (1 GiB).
pub const DEFAULT_DENSE_LIMIT: usize = 26;

const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("qubit {qubit} out of range for a {count}-qubit state")]
    QubitOutOfRange { qubit: QubitId, count: usize },
    #[error(
        "circuit needs {qubits} qubits but the dense limit is {limit}; \
         use the effective-oracle engine for larger instances"
    )]
    DenseLimit { qubits: usize, limit: usize },
    #[error("non-classical gate {0} is not supported by the bitstring engine")]
    NonClassicalGate(String),
    #[error("ancilla {qubit} not restored to 0 on search basis state {state:#b}")]
    AncillaNotRestored { qubit: QubitId, state: u64 },
    #[error("search qubit {qubit} modified on basis state {state:#b}")]
    SearchModified { qubit: QubitId, state: u64 },
}

/// Dense state over `2^n` double-precision complex amplitudes.
///
/// Index bit `i` corresponds to qubit `i` (little-endian).
#[derive(Debug, Clone)]
pub struct StateVector {
    qubit_count: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// |0...0>
    pub fn zero_state(qubit_count: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << qubit_count];
        amps[0] = Complex64::new(1.0, 0.0);
        StateVector { qubit_count, amps }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Self {
        assert!(amps.len().is_power_of_two());
        let qubit_count = amps.len().trailing_zeros() as usize;
        StateVector { qubit_count, amps }
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_squared(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Marginal probability of each value of the given qubit list. Bit `j`
    /// of the returned index is the value of `qubits[j]`.
    pub fn marginal(&self, qubits: &[QubitId]) -> Vec<f64> {
        let mut probs = vec![0.0; 1 << qubits.len()];
        for (idx, amp) in self.amps.iter().enumerate() {
            let p = amp.norm_sqr();
            if p == 0.0 {
                continue;
            }
            let mut v = 0usize;
            for (j, q) in qubits.iter().enumerate() {
                if idx >> q.0 & 1 == 1 {
                    v |= 1 << j;
                }
            }
            probs[v] += p;
        }
        probs
    }
}

fn check_qubit(q: QubitId, count: usize) -> Result<(), SimError> {
    if q.0 >= count {
        Err(SimError::QubitOutOfRange { qubit: q, count })
    } else {
        Ok(())
    }
}

/// Apply one gate to a dense state.
pub fn dense_apply(state: &mut StateVector, gate: &Gate) -> Result<(), SimError> {
    let n = state.qubit_count;
    for q in gate.qubits() {
        check_qubit(q, n)?;
    }
    let amps = &mut state.amps;
    match gate {
        Gate::X(t) => {
            let mask = 1usize << t.0;
            for i in 0..amps.len() {
                if i & mask == 0 {
                    amps.swap(i, i | mask);
                }
            }
        }
        Gate::Z(t) => {
            let mask = 1usize << t.0;
            for (i, a) in amps.iter_mut().enumerate() {
                if i & mask != 0 {
                    *a = -*a;
                }
            }
        }
        Gate::H(t) => {
            let mask = 1usize << t.0;
            let s = std::f64::consts::FRAC_1_SQRT_2;
            for i in 0..amps.len() {
                if i & mask == 0 {
                    let lo = amps[i];
                    let hi = amps[i | mask];
                    amps[i] = s * (lo + hi);
                    amps[i | mask] = s * (lo - hi);
                }
            }
        }
        Gate::Cnot { control, target } => {
            let c = 1usize << control.0;
            let t = 1usize << target.0;
            for i in 0..amps.len() {
                if i & c != 0 && i & t == 0 {
                    amps.swap(i, i | t);
                }
            }
        }
        Gate::Ccnot { c1, c2, target } => {
            let c = (1usize << c1.0) | (1usize << c2.0);
            let t = 1usize << target.0;
            for i in 0..amps.len() {
                if i & c == c && i & t == 0 {
                    amps.swap(i, i | t);
                }
            }
        }
        Gate::Mcx { controls, target } => {
            let mut c = 0usize;
            for q in controls {
                c |= 1 << q.0;
            }
            let t = 1usize << target.0;
            for i in 0..amps.len() {
                if i & c == c && i & t == 0 {
                    amps.swap(i, i | t);
                }
            }
        }
    }
    Ok(())
}

/// Run a circuit on a dense state under the default qubit limit.
pub fn dense_run(state: &mut StateVector, c: &Circuit) -> Result<(), SimError> {
    dense_run_with_limit(state, c, DEFAULT_DENSE_LIMIT)
}

pub fn dense_run_with_limit(
    state: &mut StateVector,
    c: &Circuit,
    limit: usize,
) -> Result<(), SimError> {
    if c.qubit_count() > limit {
        return Err(SimError::DenseLimit {
            qubits: c.qubit_count(),
            limit,
        });
    }
    assert_eq!(c.qubit_count(), state.qubit_count);
    for g in c.gates() {
        dense_apply(state, g)?;
    }
    debug_assert!((state.norm_squared() - 1.0).abs() < NORM_TOLERANCE);
    Ok(())
}

/// One classical basis state with a tracked ±1 phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhasedBitstring {
    pub bits: u64,
    pub phase: i8,
}

impl PhasedBitstring {
    pub fn new(bits: u64) -> Self {
        PhasedBitstring { bits, phase: 1 }
    }

    pub fn bit(&self, q: QubitId) -> bool {
        self.bits >> q.0 & 1 == 1
    }
}

/// Classical-reversible execution with phase tracking. Rejects `H`.
pub fn bitstring_run(input: PhasedBitstring, c: &Circuit) -> Result<PhasedBitstring, SimError> {
    assert!(c.qubit_count() <= 64, "bitstring engine caps at 64 qubits");
    let mut s = input;
    for g in c.gates() {
        match g {
            Gate::X(t) => s.bits ^= 1 << t.0,
            Gate::Z(t) => {
                if s.bits >> t.0 & 1 == 1 {
                    s.phase = -s.phase;
                }
            }
            Gate::H(t) => return Err(SimError::NonClassicalGate(format!("H({t})"))),
            Gate::Cnot { control, target } => {
                if s.bits >> control.0 & 1 == 1 {
                    s.bits ^= 1 << target.0;
                }
            }
            Gate::Ccnot { c1, c2, target } => {
                if s.bits >> c1.0 & 1 == 1 && s.bits >> c2.0 & 1 == 1 {
                    s.bits ^= 1 << target.0;
                }
            }
            Gate::Mcx { controls, target } => {
                if controls.iter().all(|q| s.bits >> q.0 & 1 == 1) {
                    s.bits ^= 1 << target.0;
                }
            }
        }
    }
    Ok(s)
}

/// Diagonal ±1 action of an H-free oracle circuit on its search register.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EffectiveOracle {
    phases: Vec<i8>,
}

impl EffectiveOracle {
    pub fn phases(&self) -> &[i8] {
        &self.phases
    }

    pub fn search_bits(&self) -> usize {
        self.phases.len().trailing_zeros() as usize
    }

    pub fn marked(&self) -> impl Iterator<Item = u64> + '_ {
        self.phases
            .iter()
            .enumerate()
            .filter(|(_, p)| **p == -1)
            .map(|(v, _)| v as u64)
    }

    pub fn marked_count(&self) -> usize {
        self.phases.iter().filter(|p| **p == -1).count()
    }
}

/// Tabulate the oracle's phase on every search basis value.
///
/// Bit `j` of a table index is the value of `search[j]`. All non-search
/// qubits start at 0 and are required to return to 0; any deviation, or any
/// change to the search bits themselves, is reported as a construction bug
/// with the offending basis state.
pub fn extract_effective_oracle(
    c: &Circuit,
    search: &[QubitId],
) -> Result<EffectiveOracle, SimError> {
    let count = 1u64 << search.len();
    let mut phases = Vec::with_capacity(count as usize);
    for v in 0..count {
        let mut bits = 0u64;
        for (j, q) in search.iter().enumerate() {
            if v >> j & 1 == 1 {
                bits |= 1 << q.0;
            }
        }
        let out = bitstring_run(PhasedBitstring::new(bits), c)?;
        if out.bits != bits {
            let diff = out.bits ^ bits;
            let qubit = QubitId(diff.trailing_zeros() as usize);
            if search.contains(&qubit) {
                return Err(SimError::SearchModified { qubit, state: v });
            }
            return Err(SimError::AncillaNotRestored { qubit, state: v });
        }
        phases.push(out.phase);
    }
    Ok(EffectiveOracle { phases })
}

/// Shot counts keyed by measured register value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementCounts {
    pub counts: BTreeMap<u64, u64>,
    pub shots: u64,
    pub seed: u64,
}

/// Sample a register's marginal distribution.
pub fn sample(
    state: &StateVector,
    register: &[QubitId],
    shots: u64,
    seed: u64,
) -> MeasurementCounts {
    sample_from_probs(&state.marginal(register), shots, seed)
}

/// Sample from an explicit probability table by inverse CDF.
pub fn sample_from_probs(probs: &[f64], shots: u64, seed: u64) -> MeasurementCounts {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cdf.push(acc);
    }
    let total = acc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for _ in 0..shots {
        let r: f64 = rng.gen::<f64>() * total;
        let idx = cdf.partition_point(|&c| c < r).min(probs.len() - 1);
        *counts.entry(idx as u64).or_insert(0) += 1;
    }
    MeasurementCounts {
        counts,
        shots,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;

    fn sv1() -> StateVector {
        StateVector::zero_state(1)
    }

    #[test]
    fn hadamard_on_zero() {
        let mut s = sv1();
        dense_apply(&mut s, &Gate::H(QubitId(0))).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amplitudes()[0].re - r).abs() < 1e-12);
        assert!((s.amplitudes()[1].re - r).abs() < 1e-12);
    }

    #[test]
    fn x_flips_basis_state() {
        let mut s = sv1();
        dense_apply(&mut s, &Gate::X(QubitId(0))).unwrap();
        assert_eq!(s.amplitudes()[0], Complex64::new(0.0, 0.0));
        assert_eq!(s.amplitudes()[1], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn z_on_zero_is_identity() {
        let mut s = sv1();
        let before = s.amplitudes().to_vec();
        dense_apply(&mut s, &Gate::Z(QubitId(0))).unwrap();
        assert_eq!(s.amplitudes(), &before[..]);
    }

    #[test]
    fn empty_circuit_is_identity() {
        let mut s = StateVector::zero_state(3);
        let before = s.amplitudes().to_vec();
        dense_run(&mut s, &Circuit::new(3)).unwrap();
        assert_eq!(s.amplitudes(), &before[..]);
    }

    #[test]
    fn dense_limit_is_enforced() {
        let c = Circuit::new(5);
        let mut s = StateVector::zero_state(5);
        let err = dense_run_with_limit(&mut s, &c, 4).unwrap_err();
        assert!(matches!(err, SimError::DenseLimit { qubits: 5, limit: 4 }));
        assert!(err.to_string().contains("effective"));
    }

    #[test]
    fn bitstring_basics() {
        let mut c = Circuit::new(2);
        c.append(Gate::X(QubitId(0))).unwrap();
        let out = bitstring_run(PhasedBitstring::new(0), &c).unwrap();
        assert_eq!((out.bits, out.phase), (1, 1));

        let mut cz = Circuit::new(1);
        cz.append(Gate::Z(QubitId(0))).unwrap();
        let out = bitstring_run(PhasedBitstring::new(1), &cz).unwrap();
        assert_eq!((out.bits, out.phase), (1, -1));
    }

    #[test]
    fn bitstring_rejects_h() {
        let mut c = Circuit::new(1);
        c.append(Gate::H(QubitId(0))).unwrap();
        assert!(matches!(
            bitstring_run(PhasedBitstring::new(0), &c),
            Err(SimError::NonClassicalGate(_))
        ));
    }

    #[test]
    fn deterministic_state_samples_one_value() {
        let mut s = StateVector::zero_state(2);
        dense_apply(&mut s, &Gate::X(QubitId(0))).unwrap();
        let m = sample(&s, &[QubitId(0), QubitId(1)], 50, 7);
        assert_eq!(m.counts.len(), 1);
        assert_eq!(m.counts[&1], 50);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let mut s = StateVector::zero_state(2);
        dense_apply(&mut s, &Gate::H(QubitId(0))).unwrap();
        dense_apply(&mut s, &Gate::H(QubitId(1))).unwrap();
        let qs = [QubitId(0), QubitId(1)];
        let a = sample(&s, &qs, 1000, 42);
        let b = sample(&s, &qs, 1000, 42);
        assert_eq!(a, b);
        let c = sample(&s, &qs, 1000, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn uniform_sampling_frequencies() {
        let mut s = StateVector::zero_state(2);
        dense_apply(&mut s, &Gate::H(QubitId(0))).unwrap();
        dense_apply(&mut s, &Gate::H(QubitId(1))).unwrap();
        let m = sample(&s, &[QubitId(0), QubitId(1)], 100_000, 1);
        for v in 0..4u64 {
            let freq = *m.counts.get(&v).unwrap() as f64 / 100_000.0;
            // 5 sigma around 0.25 is well inside +-1%
            assert!((freq - 0.25).abs() < 0.01, "value {v} freq {freq}");
        }
    }
}
