//! Precedence-climbing parser.
//!
//! Binding strength, loosest first: `+ -` (left), `* /` (left), unary `-`,
//! `^` (right). So `-x^2` is `-(x^2)` and `2^3^2` is `2^(3^2)`.

use std::collections::BTreeMap;

use super::lexer::{Token, TokenKind};
use super::{BinOp, Expr, ExprError, Func};

const ADD_BP: (u8, u8) = (1, 2);
const MUL_BP: (u8, u8) = (3, 4);
const NEG_BP: u8 = 5;
const POW_BP: (u8, u8) = (8, 7);

pub(super) struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    dimension: usize,
    constants: &'a BTreeMap<String, f64>,
    end: usize,
}

impl<'a> Parser<'a> {
    pub(super) fn new(
        tokens: &'a [Token],
        dimension: usize,
        constants: &'a BTreeMap<String, f64>,
    ) -> Self {
        let end = tokens.last().map(|t| t.span.end).unwrap_or(0);
        Parser {
            tokens,
            pos: 0,
            dimension,
            constants,
            end,
        }
    }

    pub(super) fn parse_all(mut self) -> Result<Expr, ExprError> {
        if self.tokens.is_empty() {
            return Err(self.error("an expression"));
        }
        let expr = self.parse_bp(0)?;
        if self.pos < self.tokens.len() {
            return Err(self.error("an operator or end of input"));
        }
        Ok(expr)
    }

    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn position(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|t| t.span.start)
            .unwrap_or(self.end)
    }

    fn error(&self, expected: &str) -> ExprError {
        ExprError::Parse {
            position: self.position(),
            expected: expected.to_string(),
        }
    }

    fn parse_bp(&mut self, min_bp: u8) -> Result<Expr, ExprError> {
        let mut lhs = self.parse_prefix()?;
        loop {
            let (op, (lbp, rbp)) = match self.peek() {
                Some(TokenKind::Op('+')) => (BinOp::Add, ADD_BP),
                Some(TokenKind::Op('-')) => (BinOp::Sub, ADD_BP),
                Some(TokenKind::Op('*')) => (BinOp::Mul, MUL_BP),
                Some(TokenKind::Op('/')) => (BinOp::Div, MUL_BP),
                Some(TokenKind::Op('^')) => (BinOp::Pow, POW_BP),
                _ => break,
            };
            if lbp < min_bp {
                break;
            }
            self.pos += 1;
            let rhs_start = self.position();
            let rhs = self.parse_bp(rbp)?;
            if op == BinOp::Pow {
                check_exponent(&rhs, rhs_start)?;
            }
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_prefix(&mut self) -> Result<Expr, ExprError> {
        let token = match self.tokens.get(self.pos) {
            Some(t) => t.clone(),
            None => return Err(self.error("a number, variable, function or '('")),
        };
        match token.kind {
            TokenKind::Number(v) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            TokenKind::Op('-') => {
                self.pos += 1;
                let operand = self.parse_bp(NEG_BP)?;
                Ok(Expr::Neg(Box::new(operand)))
            }
            TokenKind::LParen => {
                self.pos += 1;
                let inner = self.parse_bp(0)?;
                self.expect_rparen()?;
                Ok(inner)
            }
            TokenKind::Ident(name) => {
                self.pos += 1;
                if let Some(func) = Func::from_name(&name) {
                    return self.parse_call(func);
                }
                if let Some(index) = self.variable_index(&name) {
                    return Ok(Expr::Var(index));
                }
                if let Some(&value) = self.constants.get(&name) {
                    return Ok(Expr::Const(value));
                }
                self.pos -= 1;
                Err(self.error(&format!(
                    "a known variable or function (unknown identifier '{name}')"
                )))
            }
            _ => Err(self.error("a number, variable, function or '('")),
        }
    }

    fn parse_call(&mut self, func: Func) -> Result<Expr, ExprError> {
        if self.peek() != Some(&TokenKind::LParen) {
            return Err(self.error(&format!("'(' after {}", func.name())));
        }
        self.pos += 1;
        let mut args = vec![self.parse_bp(0)?];
        while self.peek() == Some(&TokenKind::Comma) {
            self.pos += 1;
            args.push(self.parse_bp(0)?);
        }
        self.expect_rparen()?;
        if args.len() != 1 {
            return Err(ExprError::Parse {
                position: self.tokens[self.pos - 1].span.start,
                expected: format!("exactly one argument to {}", func.name()),
            });
        }
        Ok(Expr::Call(func, args))
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        if self.peek() == Some(&TokenKind::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error("')'"))
        }
    }

    fn variable_index(&self, name: &str) -> Option<usize> {
        match (name, self.dimension) {
            ("x", 1) | ("x1", _) => Some(0),
            ("x2", 2) => Some(1),
            _ => None,
        }
    }
}

/// Exponents must fold to a non-negative integer constant.
fn check_exponent(rhs: &Expr, position: usize) -> Result<(), ExprError> {
    let bad = || ExprError::Parse {
        position,
        expected: "a non-negative integer constant exponent".into(),
    };
    if rhs.max_variable().is_some() {
        return Err(bad());
    }
    let value = rhs.evaluate(&[]).map_err(|_| bad())?;
    if value < 0.0 || value.fract() != 0.0 || value > i32::MAX as f64 {
        return Err(bad());
    }
    Ok(())
}
