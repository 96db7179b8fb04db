//! Arithmetic expressions for potentials.
//!
//! Potentials are written as plain strings such as `x^2*(1+x)^2` (1D,
//! variable `x`) or `x1^2*x2/(1+x1^2+x2^2)` (2D, variables `x1`, `x2`).
//! Supported functions are `exp`, `tanh`, `sin`, `cos`, `sqrt` and `abs`;
//! the exponent of `^` must be a non-negative integer constant.

mod lexer;
mod parity;
mod parser;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use lexer::{tokenize, Token, TokenKind};
pub use parity::{detect_parity, Parity, Reflection, DEFAULT_PARITY_SEED};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("unexpected character '{character}' at position {position}")]
    Lex { position: usize, character: char },
    #[error("parse error at position {position}: expected {expected}")]
    Parse { position: usize, expected: String },
    #[error("evaluation error: {0}")]
    Eval(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Tanh,
    Sin,
    Cos,
    Sqrt,
    Abs,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "tanh" => Func::Tanh,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Tanh => "tanh",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

/// Expression tree. Variables are zero-based (`x`/`x1` is 0, `x2` is 1).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    /// Parses `source` with variables of the given dimension (1 or 2).
    pub fn parse(source: &str, dimension: usize) -> Result<Expr, ExprError> {
        Self::parse_with_constants(source, dimension, &BTreeMap::new())
    }

    /// Like [`Expr::parse`], but identifiers found in `constants` are
    /// replaced by their values at parse time.
    pub fn parse_with_constants(
        source: &str,
        dimension: usize,
        constants: &BTreeMap<String, f64>,
    ) -> Result<Expr, ExprError> {
        let tokens = tokenize(source)?;
        parse(&tokens, dimension, constants)
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<f64, ExprError> {
        Ok(match self {
            Expr::Const(v) => *v,
            Expr::Var(i) => *point.get(*i).ok_or_else(|| {
                ExprError::Eval(format!(
                    "variable x{} used with a {}-dimensional point",
                    i + 1,
                    point.len()
                ))
            })?,
            Expr::Neg(e) => -e.evaluate(point)?,
            Expr::Binary(op, a, b) => {
                let a = a.evaluate(point)?;
                let b = b.evaluate(point)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(ExprError::Eval("division by zero".into()));
                        }
                        a / b
                    }
                    BinOp::Pow => a.powi(b as i32),
                }
            }
            Expr::Call(f, args) => {
                let v = args[0].evaluate(point)?;
                match f {
                    Func::Exp => v.exp(),
                    Func::Tanh => v.tanh(),
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Abs => v.abs(),
                    Func::Sqrt => {
                        if v < 0.0 {
                            return Err(ExprError::Eval(format!("sqrt of negative value {v}")));
                        }
                        v.sqrt()
                    }
                }
            }
        })
    }

    /// Highest variable index used, if any.
    pub fn max_variable(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(e) => e.max_variable(),
            Expr::Binary(_, a, b) => a.max_variable().max(b.max_variable()),
            Expr::Call(_, args) => args.iter().filter_map(|a| a.max_variable()).max(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Binary(BinOp::Pow, ..) => 4,
            Expr::Const(_) | Expr::Var(_) | Expr::Call(..) => 5,
        }
    }
}

/// Parses a token stream produced by [`tokenize`].
pub fn parse(
    tokens: &[Token],
    dimension: usize,
    constants: &BTreeMap<String, f64>,
) -> Result<Expr, ExprError> {
    parser::Parser::new(tokens, dimension, constants).parse_all()
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Expr, min_prec: u8) -> fmt::Result {
    if child.precedence() < min_prec {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

/// Prints with the minimal parentheses needed to re-parse to the same tree.
/// Variables print in 2D form (`x1`, `x2`), which parses in either dimension
/// for `x1`.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) => write!(f, "{v:?}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(e) => {
                write!(f, "-")?;
                write_child(f, e, 3)
            }
            Expr::Binary(op, a, b) => {
                let (sym, prec) = match op {
                    BinOp::Add => ("+", 1),
                    BinOp::Sub => ("-", 1),
                    BinOp::Mul => ("*", 2),
                    BinOp::Div => ("/", 2),
                    BinOp::Pow => ("^", 4),
                };
                if *op == BinOp::Pow {
                    write_child(f, a, 5)?;
                    write!(f, "^")?;
                    write_child(f, b, 4)
                } else {
                    write_child(f, a, prec)?;
                    write!(f, " {sym} ")?;
                    write_child(f, b, prec + 1)
                }
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// A parsed potential together with its source text and dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    source: String,
    ast: Expr,
    dimension: usize,
    parity: Option<(Reflection, Parity)>,
}

impl Expression {
    pub fn parse(source: &str, dimension: usize) -> Result<Self, ExprError> {
        Self::parse_with_constants(source, dimension, &BTreeMap::new())
    }

    pub fn parse_with_constants(
        source: &str,
        dimension: usize,
        constants: &BTreeMap<String, f64>,
    ) -> Result<Self, ExprError> {
        if !(1..=2).contains(&dimension) {
            return Err(ExprError::Parse {
                position: 0,
                expected: format!("dimension 1 or 2, got {dimension}"),
            });
        }
        let ast = Expr::parse_with_constants(source, dimension, constants)?;
        Ok(Expression {
            source: source.trim().to_string(),
            ast,
            dimension,
            parity: None,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<f64, ExprError> {
        if point.len() != self.dimension {
            return Err(ExprError::Eval(format!(
                "expected a {}-dimensional point, got {}",
                self.dimension,
                point.len()
            )));
        }
        self.ast.evaluate(point)
    }

    /// Classifies the parity under `reflection` and records it on the value.
    pub fn classify(&mut self, reflection: &Reflection) -> Parity {
        let p = detect_parity(&self.ast, reflection, 64, DEFAULT_PARITY_SEED);
        self.parity = Some((reflection.clone(), p));
        p
    }

    /// Parity recorded by the last [`Expression::classify`] call.
    pub fn declared_parity(&self) -> Option<&(Reflection, Parity)> {
        self.parity.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(src: &str, dim: usize, p: &[f64]) -> f64 {
        Expr::parse(src, dim).unwrap().evaluate(p).unwrap()
    }

    #[test]
    fn two_dimensional_perturbation_tree() {
        let ast = Expr::parse("x1^2*x2/(1+x1^2+x2^2)", 2).unwrap();
        let pow = |v| {
            Expr::Binary(
                BinOp::Pow,
                Box::new(Expr::Var(v)),
                Box::new(Expr::Const(2.0)),
            )
        };
        let num = Expr::Binary(BinOp::Mul, Box::new(pow(0)), Box::new(Expr::Var(1)));
        let den = Expr::Binary(
            BinOp::Add,
            Box::new(Expr::Binary(
                BinOp::Add,
                Box::new(Expr::Const(1.0)),
                Box::new(pow(0)),
            )),
            Box::new(pow(1)),
        );
        assert_eq!(ast, Expr::Binary(BinOp::Div, Box::new(num), Box::new(den)));
        assert!((ast.evaluate(&[1.0, 1.0]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn unary_minus_is_weaker_than_power() {
        let ast = Expr::parse("-x1^2", 1).unwrap();
        match ast {
            Expr::Neg(inner) => assert!(matches!(*inner, Expr::Binary(BinOp::Pow, ..))),
            other => panic!("got {other:?}"),
        }
        assert_eq!(eval("-x^2", 1, &[3.0]), -9.0);
    }

    #[test]
    fn power_is_right_associative() {
        assert_eq!(eval("2^3^2", 1, &[0.0]), 512.0);
        assert_eq!(eval("8/2/2", 1, &[0.0]), 2.0);
        assert_eq!(eval("8-2-2", 1, &[0.0]), 4.0);
    }

    #[test]
    fn double_well_vanishes_at_second_minimum() {
        assert_eq!(eval("x^2*(1+x)^2", 1, &[-1.0]), 0.0);
        assert_eq!(eval("x/(1+x^2)", 1, &[1.0]), 0.5);
    }

    #[test]
    fn division_by_zero_is_reported() {
        let e = Expr::parse("1/x", 1).unwrap();
        assert!(matches!(e.evaluate(&[0.0]), Err(ExprError::Eval(_))));
        let e = Expr::parse("sqrt(x)", 1).unwrap();
        assert!(matches!(e.evaluate(&[-1.0]), Err(ExprError::Eval(_))));
    }

    #[test]
    fn exponent_restrictions() {
        assert!(Expr::parse("x^0.5", 1).is_err());
        assert!(Expr::parse("x^-1", 1).is_err());
        assert!(Expr::parse("x^x", 1).is_err());
        assert!(Expr::parse("x^(1+1)", 1).is_ok());
    }

    #[test]
    fn variables_respect_dimension() {
        assert!(Expr::parse("x2", 1).is_err());
        assert!(Expr::parse("x", 2).is_err());
        assert!(Expr::parse("x3", 2).is_err());
        assert!(Expr::parse("x1 + x2", 2).is_ok());
    }

    #[test]
    fn malformed_input() {
        for src in ["1+", "(x", "x)", "exp x", "exp(x, x)", "*2", "foo(x)", "x x"] {
            assert!(
                matches!(Expr::parse(src, 1), Err(ExprError::Parse { .. })),
                "{src}"
            );
        }
    }

    #[test]
    fn functions_and_constants() {
        let mut c = BTreeMap::new();
        c.insert("g".to_string(), 0.5);
        let e = Expr::parse_with_constants("x^2*(1+g*x)^2", 1, &c).unwrap();
        assert_eq!(e.evaluate(&[-2.0]).unwrap(), 0.0);
        assert!((eval("exp(0) + cos(0) + abs(-2) + tanh(0)", 1, &[0.0]) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn display_reparses() {
        for src in [
            "x1^2*x2/(1+x1^2+x2^2)",
            "-x1^2",
            "(-x1)^2",
            "2^3^2",
            "(2^3)^2",
            "a - (b - c)",
            "1 - -x1",
            "-(x1*x1)",
            "exp(-x1^2)/(1 + x1)",
        ] {
            let src = src.replace('a', "x1").replace('b', "2").replace('c', "3");
            let ast = Expr::parse(&src, 2).unwrap();
            let printed = ast.to_string();
            assert_eq!(Expr::parse(&printed, 2).unwrap(), ast, "{src} -> {printed}");
        }
    }

    #[test]
    fn expression_checks_point_dimension() {
        let e = Expression::parse("x1 + x2", 2).unwrap();
        assert!(e.evaluate(&[1.0]).is_err());
        assert_eq!(e.evaluate(&[1.0, 2.0]).unwrap(), 3.0);
    }
}
