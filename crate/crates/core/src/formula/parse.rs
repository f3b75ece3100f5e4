//! S-expression input format.
//!
//! ```text
//! (problem
//!   (vars (a 2) (b 2))
//!   (cnf (clause x y z) (clause x (not y) z))
//!   (atom x (< (+ a b) (^ a b)))
//!   (atom y (> (+ a b) (^ a b)))
//!   (atom z (= (+ a b) 1)))
//! ```
//!
//! All declared widths must be equal. Clauses hold one to three literals and
//! are padded to three with the constant-false literal `0`. Operators outside
//! `+ ^ & | ++` are rejected, as are relations outside `< > = >= <= !=`.

use std::collections::BTreeMap;

use thiserror::Error;

use super::{Atom, BVExpr, BVProblem, BinOp, Clause, CnfFormula, Literal, Rel};

/// Byte-oriented source position, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl std::fmt::Display for Pos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("{pos}: expected {expected}, found '{found}'")]
    Syntax {
        pos: Pos,
        expected: String,
        found: String,
    },
    #[error("{pos}: unsupported operator '{op}'")]
    UnsupportedOperator { pos: Pos, op: String },
    #[error("{pos}: clause has more than 3 literals")]
    ClauseTooLong { pos: Pos },
    #[error("{pos}: variable '{var}' appears more than once in a clause")]
    DuplicateClauseVariable { pos: Pos, var: String },
    #[error("{pos}: width mismatch: {detail}")]
    WidthMismatch { pos: Pos, detail: String },
    #[error("{pos}: unknown bit-vector variable '{name}'")]
    UnknownVariable { pos: Pos, name: String },
    #[error("{pos}: constant {value} does not fit in {width} bits")]
    ConstantOutOfRange { pos: Pos, value: u64, width: usize },
    #[error("{pos}: duplicate declaration of '{name}'")]
    DuplicateDeclaration { pos: Pos, name: String },
    #[error("{pos}: atom already declared for '{name}'")]
    DuplicateAtom { pos: Pos, name: String },
    #[error("{pos}: width must be between 1 and 63")]
    BadWidth { pos: Pos },
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    LParen,
    RParen,
    Word(String),
}

fn tokenize(text: &str) -> Vec<(Token, Pos)> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut col = 1;
    let mut word = String::new();
    let mut word_pos = Pos { line: 1, col: 1 };
    for ch in text.chars() {
        let here = Pos { line, col };
        if ch == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
        match ch {
            c if c == '(' || c == ')' || c.is_whitespace() => {
                if !word.is_empty() {
                    out.push((Token::Word(std::mem::take(&mut word)), word_pos));
                }
                if ch == '(' {
                    out.push((Token::LParen, here));
                } else if ch == ')' {
                    out.push((Token::RParen, here));
                }
            }
            _ => {
                if word.is_empty() {
                    word_pos = here;
                }
                word.push(ch);
            }
        }
    }
    if !word.is_empty() {
        out.push((Token::Word(word), word_pos));
    }
    out
}

struct Parser {
    tokens: Vec<(Token, Pos)>,
    idx: usize,
}

impl Parser {
    fn peek(&self) -> Option<&(Token, Pos)> {
        self.tokens.get(self.idx)
    }

    fn here(&self) -> Pos {
        self.peek()
            .map(|(_, p)| *p)
            .unwrap_or(Pos { line: 0, col: 0 })
    }

    fn syntax(&self, expected: &str) -> ParseError {
        let (found, pos) = match self.peek() {
            Some((Token::LParen, p)) => ("(".to_string(), *p),
            Some((Token::RParen, p)) => (")".to_string(), *p),
            Some((Token::Word(w), p)) => (w.clone(), *p),
            None => ("end of input".to_string(), Pos { line: 0, col: 0 }),
        };
        ParseError::Syntax {
            pos,
            expected: expected.to_string(),
            found,
        }
    }

    fn expect_lparen(&mut self) -> Result<Pos, ParseError> {
        match self.peek() {
            Some((Token::LParen, p)) => {
                let p = *p;
                self.idx += 1;
                Ok(p)
            }
            _ => Err(self.syntax("'('")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some((Token::RParen, _)) => {
                self.idx += 1;
                Ok(())
            }
            _ => Err(self.syntax("')'")),
        }
    }

    fn expect_word(&mut self, what: &str) -> Result<(String, Pos), ParseError> {
        match self.peek() {
            Some((Token::Word(w), p)) => {
                let r = (w.clone(), *p);
                self.idx += 1;
                Ok(r)
            }
            _ => Err(self.syntax(what)),
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        let (w, _) = self.expect_word(&format!("'{kw}'"))?;
        if w == kw {
            Ok(())
        } else {
            self.idx -= 1;
            Err(self.syntax(&format!("'{kw}'")))
        }
    }

    fn at_rparen(&self) -> bool {
        matches!(self.peek(), Some((Token::RParen, _)))
    }
}

/// Parse a textual problem description.
pub fn parse_problem(text: &str) -> Result<BVProblem, ParseError> {
    let mut p = Parser {
        tokens: tokenize(text),
        idx: 0,
    };

    p.expect_lparen()?;
    p.expect_keyword("problem")?;

    // (vars (name width)+)
    p.expect_lparen()?;
    p.expect_keyword("vars")?;
    let mut bv_vars: Vec<(String, usize)> = Vec::new();
    while !p.at_rparen() {
        p.expect_lparen()?;
        let (name, npos) = p.expect_word("variable name")?;
        let (wtext, wpos) = p.expect_word("bit width")?;
        let width: usize = wtext
            .parse()
            .map_err(|_| ParseError::BadWidth { pos: wpos })?;
        if width == 0 || width > 63 {
            return Err(ParseError::BadWidth { pos: wpos });
        }
        if bv_vars.iter().any(|(n, _)| *n == name) {
            return Err(ParseError::DuplicateDeclaration { pos: npos, name });
        }
        if let Some((_, w0)) = bv_vars.first() {
            if *w0 != width {
                return Err(ParseError::WidthMismatch {
                    pos: wpos,
                    detail: format!("'{name}' declared {width} bits, expected {w0}"),
                });
            }
        }
        bv_vars.push((name, width));
        p.expect_rparen()?;
    }
    // an empty (vars) list is legal: pure-SAT problems have no theory part
    p.expect_rparen()?;
    let width = bv_vars.first().map(|(_, w)| *w).unwrap_or(1);

    // (cnf (clause ...)+)
    p.expect_lparen()?;
    p.expect_keyword("cnf")?;
    let mut bool_names: Vec<String> = Vec::new();
    let mut clauses = Vec::new();
    let bool_index = |names: &mut Vec<String>, name: &str| -> usize {
        match names.iter().position(|n| n == name) {
            Some(i) => i,
            None => {
                names.push(name.to_string());
                names.len() - 1
            }
        }
    };
    if p.at_rparen() {
        return Err(p.syntax("at least one clause"));
    }
    while !p.at_rparen() {
        let clause_pos = p.expect_lparen()?;
        p.expect_keyword("clause")?;
        let mut lits: Vec<Literal> = Vec::new();
        let mut seen_vars: Vec<String> = Vec::new();
        while !p.at_rparen() {
            if lits.len() == 3 {
                return Err(ParseError::ClauseTooLong { pos: clause_pos });
            }
            match p.peek() {
                Some((Token::LParen, _)) => {
                    p.expect_lparen()?;
                    p.expect_keyword("not")?;
                    let (name, npos) = p.expect_word("variable name")?;
                    if seen_vars.contains(&name) {
                        return Err(ParseError::DuplicateClauseVariable {
                            pos: npos,
                            var: name,
                        });
                    }
                    seen_vars.push(name.clone());
                    lits.push(Literal::Neg(bool_index(&mut bool_names, &name)));
                    p.expect_rparen()?;
                }
                Some((Token::Word(w), _)) if w == "0" => {
                    p.idx += 1;
                    lits.push(Literal::Zero);
                }
                Some((Token::Word(_), _)) => {
                    let (name, npos) = p.expect_word("literal")?;
                    if seen_vars.contains(&name) {
                        return Err(ParseError::DuplicateClauseVariable {
                            pos: npos,
                            var: name,
                        });
                    }
                    seen_vars.push(name.clone());
                    lits.push(Literal::Pos(bool_index(&mut bool_names, &name)));
                }
                _ => return Err(p.syntax("literal or ')'")),
            }
        }
        p.expect_rparen()?;
        if lits.is_empty() {
            return Err(p.syntax("at least one literal"));
        }
        while lits.len() < 3 {
            lits.push(Literal::Zero);
        }
        clauses.push(Clause {
            literals: [lits[0], lits[1], lits[2]],
        });
    }
    p.expect_rparen()?;

    // (atom name (rel expr expr))*
    let mut atoms: BTreeMap<usize, Atom> = BTreeMap::new();
    let mut next_id = 0usize;
    while !p.at_rparen() {
        p.expect_lparen()?;
        p.expect_keyword("atom")?;
        let (name, npos) = p.expect_word("boolean variable name")?;
        let var = bool_index(&mut bool_names, &name);
        if atoms.contains_key(&var) {
            return Err(ParseError::DuplicateAtom { pos: npos, name });
        }
        p.expect_lparen()?;
        let (rel_text, rel_pos) = p.expect_word("comparison relation")?;
        let rel = match rel_text.as_str() {
            "<" => Rel::Lt,
            ">" => Rel::Gt,
            "=" => Rel::Eq,
            ">=" => Rel::Ge,
            "<=" => Rel::Le,
            "!=" => Rel::Ne,
            other => {
                return Err(ParseError::UnsupportedOperator {
                    pos: rel_pos,
                    op: other.to_string(),
                })
            }
        };
        let lhs = parse_expr(&mut p, &bv_vars, width)?;
        let lhs_pos = p.here();
        let rhs = parse_expr(&mut p, &bv_vars, width)?;
        if lhs.width() != rhs.width() {
            return Err(ParseError::WidthMismatch {
                pos: lhs_pos,
                detail: format!(
                    "atom compares {} bits with {} bits",
                    lhs.width(),
                    rhs.width()
                ),
            });
        }
        p.expect_rparen()?;
        p.expect_rparen()?;
        atoms.insert(
            var,
            Atom {
                lhs,
                rel,
                rhs,
                id: next_id,
            },
        );
        next_id += 1;
    }
    p.expect_rparen()?;
    if p.peek().is_some() {
        return Err(p.syntax("end of input"));
    }

    Ok(BVProblem {
        skeleton: CnfFormula {
            var_count: bool_names.len(),
            clauses,
        },
        atoms,
        bv_vars,
        width,
        bool_names,
    })
}

fn parse_expr(
    p: &mut Parser,
    bv_vars: &[(String, usize)],
    width: usize,
) -> Result<BVExpr, ParseError> {
    match p.peek() {
        Some((Token::LParen, _)) => {
            p.expect_lparen()?;
            let (op_text, op_pos) = p.expect_word("operator")?;
            let op = match op_text.as_str() {
                "+" => BinOp::Add,
                "^" => BinOp::Xor,
                "&" => BinOp::And,
                "|" => BinOp::Or,
                "++" => BinOp::Concat,
                other => {
                    return Err(ParseError::UnsupportedOperator {
                        pos: op_pos,
                        op: other.to_string(),
                    })
                }
            };
            let lhs = parse_expr(p, bv_vars, width)?;
            let rhs = parse_expr(p, bv_vars, width)?;
            if op != BinOp::Concat && lhs.width() != rhs.width() {
                return Err(ParseError::WidthMismatch {
                    pos: op_pos,
                    detail: format!(
                        "'{}' operands are {} and {} bits",
                        op.symbol(),
                        lhs.width(),
                        rhs.width()
                    ),
                });
            }
            p.expect_rparen()?;
            Ok(BVExpr::BinOp {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            })
        }
        Some((Token::Word(w), pos)) => {
            let pos = *pos;
            if w.chars().all(|c| c.is_ascii_digit()) {
                let value: u64 = w.parse().map_err(|_| ParseError::ConstantOutOfRange {
                    pos,
                    value: u64::MAX,
                    width,
                })?;
                p.idx += 1;
                if width < 64 && value >> width != 0 {
                    return Err(ParseError::ConstantOutOfRange { pos, value, width });
                }
                Ok(BVExpr::Const { value, width })
            } else {
                let (name, pos) = p.expect_word("expression")?;
                match bv_vars.iter().find(|(n, _)| *n == name) {
                    Some((_, w)) => Ok(BVExpr::Var {
                        name,
                        width: *w,
                    }),
                    None => Err(ParseError::UnknownVariable { pos, name }),
                }
            }
        }
        _ => Err(p.syntax("expression")),
    }
}

/// Render a problem back into the input grammar. `parse_problem` of the
/// output reconstructs a structurally identical problem.
pub fn to_text(problem: &BVProblem) -> String {
    let mut s = String::from("(problem\n  (vars");
    for (name, w) in &problem.bv_vars {
        s.push_str(&format!(" ({name} {w})"));
    }
    s.push_str(")\n  (cnf");
    for clause in &problem.skeleton.clauses {
        s.push_str("\n    (clause");
        for lit in &clause.literals {
            match lit {
                Literal::Pos(v) => s.push_str(&format!(" {}", problem.bool_names[*v])),
                Literal::Neg(v) => s.push_str(&format!(" (not {})", problem.bool_names[*v])),
                Literal::Zero => s.push_str(" 0"),
            }
        }
        s.push(')');
    }
    s.push(')');
    // declaration order, so re-parsing reproduces the same atom ids
    let mut atoms: Vec<(&usize, &crate::formula::Atom)> = problem.atoms.iter().collect();
    atoms.sort_by_key(|(_, a)| a.id);
    for (var, atom) in atoms {
        s.push_str(&format!(
            "\n  (atom {} ({} {} {}))",
            problem.bool_names[*var],
            atom.rel.symbol(),
            atom.lhs,
            atom.rhs
        ));
    }
    s.push_str(")\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const F_EVAL: &str = "(problem\n  (vars (a 2) (b 2))\n  (cnf (clause x y z) (clause x (not y) z))\n  (atom x (< (+ a b) (^ a b)))\n  (atom y (> (+ a b) (^ a b)))\n  (atom z (= (+ a b) 1)))\n";

    #[test]
    fn parses_evaluation_formula() {
        let p = parse_problem(F_EVAL).unwrap();
        assert_eq!(p.skeleton.var_count, 3);
        assert_eq!(p.skeleton.clauses.len(), 2);
        assert_eq!(p.atoms.len(), 3);
        assert_eq!(p.width, 2);
        assert_eq!(p.bool_names, vec!["x", "y", "z"]);
        assert_eq!(
            p.skeleton.clauses[1].literals,
            [Literal::Pos(0), Literal::Neg(1), Literal::Pos(2)]
        );
    }

    #[test]
    fn single_literal_clause_is_padded() {
        let p = parse_problem("(problem (vars (a 1)) (cnf (clause x)))").unwrap();
        assert_eq!(
            p.skeleton.clauses[0].literals,
            [Literal::Pos(0), Literal::Zero, Literal::Zero]
        );
    }

    #[test]
    fn multiplication_is_unsupported() {
        let err = parse_problem(
            "(problem (vars (a 2) (b 2)) (cnf (clause x)) (atom x (= (* a b) 1)))",
        )
        .unwrap_err();
        assert!(matches!(err, ParseError::UnsupportedOperator { op, .. } if op == "*"));
    }

    #[test]
    fn four_literal_clause_is_rejected() {
        let err = parse_problem("(problem (vars (a 1)) (cnf (clause w x y z)))").unwrap_err();
        assert!(matches!(err, ParseError::ClauseTooLong { .. }));
    }

    #[test]
    fn width_mismatch_in_declarations() {
        let err = parse_problem("(problem (vars (a 2) (b 3)) (cnf (clause x)))").unwrap_err();
        assert!(matches!(err, ParseError::WidthMismatch { .. }));
    }

    #[test]
    fn syntax_error_carries_position() {
        let err = parse_problem("(problem (vars (a 2))").unwrap_err();
        match err {
            ParseError::Syntax { expected, .. } => assert!(expected.contains('(')),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_bv_variable() {
        let err =
            parse_problem("(problem (vars (a 2)) (cnf (clause x)) (atom x (= c 1)))").unwrap_err();
        assert!(matches!(err, ParseError::UnknownVariable { name, .. } if name == "c"));
    }

    #[test]
    fn constant_must_fit_width() {
        let err =
            parse_problem("(problem (vars (a 2)) (cnf (clause x)) (atom x (= a 7)))").unwrap_err();
        assert!(matches!(
            err,
            ParseError::ConstantOutOfRange {
                value: 7,
                width: 2,
                ..
            }
        ));
    }

    #[test]
    fn duplicate_variable_in_clause_is_rejected() {
        let err = parse_problem("(problem (vars (a 1)) (cnf (clause x (not x))))").unwrap_err();
        assert!(matches!(err, ParseError::DuplicateClauseVariable { .. }));
    }

    #[test]
    fn round_trips_through_pretty_printer() {
        let p = parse_problem(F_EVAL).unwrap();
        let again = parse_problem(&to_text(&p)).unwrap();
        assert_eq!(p, again);
    }
}
