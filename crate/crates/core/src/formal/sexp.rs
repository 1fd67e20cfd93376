//! Minimal S-expression layer for SMT-LIB2 scripts.
//!
//! Scripts are built as trees and rendered, so a parse of the emitted text
//! must reproduce the tree exactly; the round-trip is part of the test suite.

use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SexpError {
    #[error("unbalanced parenthesis at byte {0}")]
    Unbalanced(usize),
    #[error("unterminated string literal starting at byte {0}")]
    UnterminatedString(usize),
}

pub fn atom(s: impl Into<String>) -> Sexp {
    Sexp::Atom(s.into())
}

pub fn list(items: impl IntoIterator<Item = Sexp>) -> Sexp {
    Sexp::List(items.into_iter().collect())
}

/// Variadic application; a single argument collapses to itself so sums over
/// one-variant classes stay plain variables.
pub fn apply(op: &str, args: Vec<Sexp>) -> Sexp {
    if args.len() == 1 && (op == "+" || op == "or" || op == "and") {
        return args.into_iter().next().unwrap();
    }
    let mut items = vec![atom(op)];
    items.extend(args);
    Sexp::List(items)
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(a) => f.write_str(a),
            Sexp::List(items) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Parses a full script: a sequence of S-expressions with `;` line comments.
pub fn parse_all(text: &str) -> Result<Vec<Sexp>, SexpError> {
    let bytes = text.as_bytes();
    let mut pos = 0;
    let mut stack: Vec<Vec<Sexp>> = Vec::new();
    let mut top: Vec<Sexp> = Vec::new();

    while pos < bytes.len() {
        let b = bytes[pos];
        match b {
            b';' => {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            }
            b'(' => {
                stack.push(std::mem::take(&mut top));
                pos += 1;
            }
            b')' => {
                let done = Sexp::List(std::mem::take(&mut top));
                top = stack.pop().ok_or(SexpError::Unbalanced(pos))?;
                top.push(done);
                pos += 1;
            }
            b'"' => {
                let start = pos;
                pos += 1;
                while pos < bytes.len() && bytes[pos] != b'"' {
                    pos += 1;
                }
                if pos >= bytes.len() {
                    return Err(SexpError::UnterminatedString(start));
                }
                pos += 1;
                top.push(Sexp::Atom(text[start..pos].to_string()));
            }
            b if b.is_ascii_whitespace() => pos += 1,
            _ => {
                let start = pos;
                while pos < bytes.len()
                    && !bytes[pos].is_ascii_whitespace()
                    && !matches!(bytes[pos], b'(' | b')' | b';' | b'"')
                {
                    pos += 1;
                }
                top.push(Sexp::Atom(text[start..pos].to_string()));
            }
        }
    }
    if !stack.is_empty() {
        return Err(SexpError::Unbalanced(text.len()));
    }
    Ok(top)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_and_reparses() {
        let expr = list([atom("assert"), list([atom(">="), atom("x_0"), atom("0.0")])]);
        let text = expr.to_string();
        assert_eq!(text, "(assert (>= x_0 0.0))");
        assert_eq!(parse_all(&text).unwrap(), vec![expr]);
    }

    #[test]
    fn skips_comments_and_whitespace() {
        let parsed = parse_all("; header\n(set-logic QF_LRA)\n  (check-sat)\n").unwrap();
        assert_eq!(
            parsed,
            vec![
                list([atom("set-logic"), atom("QF_LRA")]),
                list([atom("check-sat")]),
            ]
        );
    }

    #[test]
    fn rejects_unbalanced_input() {
        assert!(matches!(
            parse_all("(assert"),
            Err(SexpError::Unbalanced(_))
        ));
        assert!(matches!(parse_all("(a))"), Err(SexpError::Unbalanced(_))));
    }

    #[test]
    fn single_argument_sums_collapse() {
        assert_eq!(apply("+", vec![atom("x")]), atom("x"));
        let two = apply("+", vec![atom("x"), atom("y")]);
        assert_eq!(two.to_string(), "(+ x y)");
    }

    #[test]
    fn keeps_string_atoms_intact() {
        let parsed = parse_all("(set-info :source \"two words\")").unwrap();
        assert_eq!(
            parsed,
            vec![list([
                atom("set-info"),
                atom(":source"),
                atom("\"two words\"")
            ])]
        );
    }
}
