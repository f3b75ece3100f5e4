//! SMT bit-vector abstract syntax, the 3-CNF Boolean skeleton, and classical
//! evaluation semantics.
//!
//! The classical evaluator is the ground truth everywhere else in the crate:
//! oracle circuits, the Grover driver and the reports are all checked
//! against it.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub mod parse;

/// Binary bit-vector operators admitted by the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    /// Modulo-sum: `(a + b) mod 2^width`.
    Add,
    Xor,
    And,
    Or,
    /// Word concatenation; result width is the sum of operand widths.
    Concat,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Xor => "^",
            BinOp::And => "&",
            BinOp::Or => "|",
            BinOp::Concat => "++",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BVExpr {
    Var { name: String, width: usize },
    Const { value: u64, width: usize },
    BinOp {
        op: BinOp,
        lhs: Box<BVExpr>,
        rhs: Box<BVExpr>,
    },
}

impl BVExpr {
    pub fn width(&self) -> usize {
        match self {
            BVExpr::Var { width, .. } | BVExpr::Const { width, .. } => *width,
            BVExpr::BinOp { op, lhs, rhs } => match op {
                BinOp::Concat => lhs.width() + rhs.width(),
                _ => lhs.width(),
            },
        }
    }
}

/// Unsigned comparison relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rel {
    Lt,
    Gt,
    Eq,
    Ge,
    Le,
    Ne,
}

impl Rel {
    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Lt => "<",
            Rel::Gt => ">",
            Rel::Eq => "=",
            Rel::Ge => ">=",
            Rel::Le => "<=",
            Rel::Ne => "!=",
        }
    }

    pub fn holds(self, lhs: u64, rhs: u64) -> bool {
        match self {
            Rel::Lt => lhs < rhs,
            Rel::Gt => lhs > rhs,
            Rel::Eq => lhs == rhs,
            Rel::Ge => lhs >= rhs,
            Rel::Le => lhs <= rhs,
            Rel::Ne => lhs != rhs,
        }
    }
}

/// A theory atom `lhs rel rhs` attached to one Boolean abstract variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub lhs: BVExpr,
    pub rel: Rel,
    pub rhs: BVExpr,
    /// Index in declaration order.
    pub id: usize,
}

/// A 3-CNF literal. `Zero` is the constant-false padding literal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Literal {
    Pos(usize),
    Neg(usize),
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Clause {
    pub literals: [Literal; 3],
}

impl Clause {
    pub fn eval(&self, bools: &[bool]) -> bool {
        self.literals.iter().any(|l| match l {
            Literal::Pos(v) => bools[*v],
            Literal::Neg(v) => !bools[*v],
            Literal::Zero => false,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfFormula {
    pub clauses: Vec<Clause>,
    pub var_count: usize,
}

impl CnfFormula {
    pub fn eval(&self, bools: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.eval(bools))
    }
}

/// A parsed SMT instance over fixed-width bit-vectors.
///
/// Boolean variable order defines the search-register bit order: skeleton
/// variables first, then each bit-vector variable MSB-first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BVProblem {
    pub skeleton: CnfFormula,
    /// Boolean-variable index -> atom. Variables without an atom are free
    /// booleans (pure-SAT mode).
    pub atoms: BTreeMap<usize, Atom>,
    /// Declared bit-vector variables, `(name, width)`, in declaration order.
    pub bv_vars: Vec<(String, usize)>,
    /// Common bit width shared by all declared variables.
    pub width: usize,
    /// Boolean variable names, by index.
    pub bool_names: Vec<String>,
}

/// Truth value per boolean variable plus an unsigned value per BV variable,
/// both in `BVProblem` index order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub bools: Vec<bool>,
    pub bv: Vec<u64>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("unbound variable '{0}'")]
    UnboundVariable(String),
}

impl BVProblem {
    pub fn bv_index(&self, name: &str) -> Option<usize> {
        self.bv_vars.iter().position(|(n, _)| n == name)
    }

    /// Total search bits excluding the addition qubit: booleans plus all
    /// bit-vector bits.
    pub fn search_bits(&self) -> usize {
        self.skeleton.var_count + self.bv_vars.iter().map(|(_, w)| w).sum::<usize>()
    }

    pub fn eval_expr(&self, e: &BVExpr, a: &Assignment) -> Result<u64, EvalError> {
        match e {
            BVExpr::Var { name, .. } => {
                let idx = self
                    .bv_index(name)
                    .ok_or_else(|| EvalError::UnboundVariable(name.clone()))?;
                a.bv
                    .get(idx)
                    .copied()
                    .ok_or_else(|| EvalError::UnboundVariable(name.clone()))
            }
            BVExpr::Const { value, .. } => Ok(*value),
            BVExpr::BinOp { op, lhs, rhs } => {
                let l = self.eval_expr(lhs, a)?;
                let r = self.eval_expr(rhs, a)?;
                Ok(match op {
                    BinOp::Add => l.wrapping_add(r) & mask(lhs.width()),
                    BinOp::Xor => l ^ r,
                    BinOp::And => l & r,
                    BinOp::Or => l | r,
                    BinOp::Concat => (l << rhs.width()) | r,
                })
            }
        }
    }

    pub fn eval_atom(&self, atom: &Atom, a: &Assignment) -> Result<bool, EvalError> {
        let l = self.eval_expr(&atom.lhs, a)?;
        let r = self.eval_expr(&atom.rhs, a)?;
        Ok(atom.rel.holds(l, r))
    }

    /// True iff every boolean agrees with its atom's theory truth value and
    /// the CNF skeleton is satisfied.
    pub fn eval_formula(&self, a: &Assignment) -> Result<bool, EvalError> {
        for (var, atom) in &self.atoms {
            if a.bools[*var] != self.eval_atom(atom, a)? {
                return Ok(false);
            }
        }
        Ok(self.skeleton.eval(&a.bools))
    }

    /// Presentation bit-string: skeleton booleans in index order, then each
    /// bit-vector variable MSB-first.
    pub fn format_bitstring(&self, a: &Assignment) -> String {
        let mut s = String::with_capacity(self.search_bits());
        for b in &a.bools {
            s.push(if *b { '1' } else { '0' });
        }
        for (idx, (_, w)) in self.bv_vars.iter().enumerate() {
            for bit in (0..*w).rev() {
                s.push(if a.bv[idx] >> bit & 1 == 1 { '1' } else { '0' });
            }
        }
        s
    }
}

pub fn mask(width: usize) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

impl fmt::Display for BVExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BVExpr::Var { name, .. } => f.write_str(name),
            BVExpr::Const { value, .. } => write!(f, "{value}"),
            BVExpr::BinOp { op, lhs, rhs } => write!(f, "({} {} {})", op.symbol(), lhs, rhs),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_bit_problem() -> BVProblem {
        // skeleton (x), atom x: (a + b = 1), widths 2
        let var = |n: &str| BVExpr::Var {
            name: n.into(),
            width: 2,
        };
        let add = BVExpr::BinOp {
            op: BinOp::Add,
            lhs: Box::new(var("a")),
            rhs: Box::new(var("b")),
        };
        let mut atoms = BTreeMap::new();
        atoms.insert(
            0,
            Atom {
                lhs: add,
                rel: Rel::Eq,
                rhs: BVExpr::Const { value: 1, width: 2 },
                id: 0,
            },
        );
        BVProblem {
            skeleton: CnfFormula {
                clauses: vec![Clause {
                    literals: [Literal::Pos(0), Literal::Zero, Literal::Zero],
                }],
                var_count: 1,
            },
            atoms,
            bv_vars: vec![("a".into(), 2), ("b".into(), 2)],
            width: 2,
            bool_names: vec!["x".into()],
        }
    }

    #[test]
    fn add_wraps_modulo_width() {
        let p = two_bit_problem();
        let a = Assignment {
            bools: vec![true],
            bv: vec![3, 2],
        };
        let e = BVExpr::BinOp {
            op: BinOp::Add,
            lhs: Box::new(BVExpr::Var {
                name: "a".into(),
                width: 2,
            }),
            rhs: Box::new(BVExpr::Var {
                name: "b".into(),
                width: 2,
            }),
        };
        assert_eq!(p.eval_expr(&e, &a).unwrap(), 1);
    }

    #[test]
    fn xor_and_zero_add() {
        let p = two_bit_problem();
        let a = Assignment {
            bools: vec![true],
            bv: vec![1, 3],
        };
        let e = BVExpr::BinOp {
            op: BinOp::Xor,
            lhs: Box::new(BVExpr::Var {
                name: "a".into(),
                width: 2,
            }),
            rhs: Box::new(BVExpr::Var {
                name: "b".into(),
                width: 2,
            }),
        };
        assert_eq!(p.eval_expr(&e, &a).unwrap(), 2);

        let z = Assignment {
            bools: vec![true],
            bv: vec![0, 0],
        };
        let add = BVExpr::BinOp {
            op: BinOp::Add,
            lhs: Box::new(BVExpr::Var {
                name: "a".into(),
                width: 2,
            }),
            rhs: Box::new(BVExpr::Var {
                name: "b".into(),
                width: 2,
            }),
        };
        assert_eq!(p.eval_expr(&add, &z).unwrap(), 0);
    }

    #[test]
    fn unbound_variable_is_reported() {
        let p = two_bit_problem();
        let a = Assignment {
            bools: vec![true],
            bv: vec![0, 0],
        };
        let e = BVExpr::Var {
            name: "zz".into(),
            width: 2,
        };
        assert_eq!(
            p.eval_expr(&e, &a),
            Err(EvalError::UnboundVariable("zz".into()))
        );
    }

    #[test]
    fn atom_truth_and_reflexivity() {
        let p = two_bit_problem();
        // a=0, b=1 => a+b = 1
        let a = Assignment {
            bools: vec![true],
            bv: vec![0, 1],
        };
        assert!(p.eval_atom(&p.atoms[&0], &a).unwrap());

        let refl = Atom {
            lhs: BVExpr::Var {
                name: "a".into(),
                width: 2,
            },
            rel: Rel::Eq,
            rhs: BVExpr::Var {
                name: "a".into(),
                width: 2,
            },
            id: 0,
        };
        for v in 0..4 {
            let a = Assignment {
                bools: vec![true],
                bv: vec![v, 0],
            };
            assert!(p.eval_atom(&refl, &a).unwrap());
        }
    }

    #[test]
    fn empty_clause_falsifies_everything() {
        let mut p = two_bit_problem();
        p.atoms.clear();
        p.skeleton.clauses.push(Clause {
            literals: [Literal::Zero, Literal::Zero, Literal::Zero],
        });
        for bits in 0..2u8 {
            let a = Assignment {
                bools: vec![bits == 1],
                bv: vec![0, 0],
            };
            assert!(!p.eval_formula(&a).unwrap());
        }
    }

    #[test]
    fn bitstring_is_msb_first_per_variable() {
        let p = two_bit_problem();
        let a = Assignment {
            bools: vec![true],
            bv: vec![0b01, 0b10],
        };
        assert_eq!(p.format_bitstring(&a), "10110");
    }
}
