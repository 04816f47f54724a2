//! Parser and evaluator for scalar coefficient functions (weights,
//! potentials, spectral densities) written as text.
//!
//! Grammar: `+ - * / ^` with standard precedence (`^` binds tightest and is
//! right-associative, then unary minus, then `* /`, then `+ -`), parentheses,
//! one free variable whose name the caller declares, the constant `pi`, and
//! the function set `sqrt exp log sin cos cosh sinh atan abs sign`.
//!
//! Parsed trees are immutable and evaluation is pure, so expressions are safe
//! to share across threads. Printing an [`Expr`] yields text that re-parses
//! to a structurally identical tree.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

/// Binary operators in source precedence order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// The fixed function set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
    Cosh,
    Sinh,
    Atan,
    Abs,
    Sign,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "cosh" => Func::Cosh,
            "sinh" => Func::Sinh,
            "atan" => Func::Atan,
            "abs" => Func::Abs,
            "sign" => Func::Sign,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Cosh => "cosh",
            Func::Sinh => "sinh",
            Func::Atan => "atan",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }
}

/// AST of a parsed coefficient expression with a single free variable.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(Box::new(a))
    }
}

/// Parse failure with the byte offset where it happened.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    Empty,
    UnexpectedChar(char),
    UnexpectedEnd,
    UnexpectedToken(String),
    UnbalancedParen,
    BadNumber(String),
    UnknownFunction(String),
    UnknownVariable(String),
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::Empty => write!(f, "empty expression"),
            ParseErrorKind::UnexpectedChar(c) => {
                write!(f, "unexpected character '{}' at byte {}", c, self.offset)
            }
            ParseErrorKind::UnexpectedEnd => {
                write!(f, "unexpected end of input at byte {}", self.offset)
            }
            ParseErrorKind::UnexpectedToken(t) => {
                write!(f, "unexpected token '{}' at byte {}", t, self.offset)
            }
            ParseErrorKind::UnbalancedParen => {
                write!(f, "unbalanced parenthesis at byte {}", self.offset)
            }
            ParseErrorKind::BadNumber(t) => {
                write!(f, "malformed number '{}' at byte {}", t, self.offset)
            }
            ParseErrorKind::UnknownFunction(t) => {
                write!(f, "unknown function '{}' at byte {}", t, self.offset)
            }
            ParseErrorKind::UnknownVariable(t) => {
                write!(f, "unknown variable '{}' at byte {}", t, self.offset)
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ParseError {}

/// Evaluation failure: a sub-expression left its real domain.
///
/// Carries the printed offending sub-expression and the argument value that
/// triggered it, so callers can report exactly which coefficient misbehaved.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainError {
    pub subexpr: String,
    pub arg: f64,
    pub kind: DomainErrorKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainErrorKind {
    SqrtNegative,
    LogNonPositive,
    DivisionByZero,
    NegativeBaseFractionalPower,
    ZeroToNegativePower,
}

impl fmt::Display for DomainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            DomainErrorKind::SqrtNegative => "sqrt of negative value",
            DomainErrorKind::LogNonPositive => "log of non-positive value",
            DomainErrorKind::DivisionByZero => "division by zero",
            DomainErrorKind::NegativeBaseFractionalPower => {
                "negative base raised to fractional power"
            }
            DomainErrorKind::ZeroToNegativePower => "zero raised to negative power",
        };
        write!(f, "{} in `{}` (argument {})", what, self.subexpr, self.arg)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for DomainError {}

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            bytes: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Next token plus its starting byte offset. `Ok(None)` at end of input.
    fn next(&mut self) -> Result<Option<(Tok, usize)>, ParseError> {
        self.skip_ws();
        if self.pos >= self.bytes.len() {
            return Ok(None);
        }
        let start = self.pos;
        let c = self.bytes[self.pos] as char;
        let tok = match c {
            '+' => {
                self.pos += 1;
                Tok::Plus
            }
            '-' => {
                self.pos += 1;
                Tok::Minus
            }
            '*' => {
                self.pos += 1;
                Tok::Star
            }
            '/' => {
                self.pos += 1;
                Tok::Slash
            }
            '^' => {
                self.pos += 1;
                Tok::Caret
            }
            '(' => {
                self.pos += 1;
                Tok::LParen
            }
            ')' => {
                self.pos += 1;
                Tok::RParen
            }
            '0'..='9' | '.' => {
                while self.pos < self.bytes.len()
                    && matches!(self.bytes[self.pos], b'0'..=b'9' | b'.')
                {
                    self.pos += 1;
                }
                // optional exponent
                if self.pos < self.bytes.len() && matches!(self.bytes[self.pos], b'e' | b'E') {
                    let mut probe = self.pos + 1;
                    if probe < self.bytes.len() && matches!(self.bytes[probe], b'+' | b'-') {
                        probe += 1;
                    }
                    if probe < self.bytes.len() && self.bytes[probe].is_ascii_digit() {
                        self.pos = probe;
                        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                            self.pos += 1;
                        }
                    }
                }
                let text = &self.src[start..self.pos];
                match text.parse::<f64>() {
                    Ok(v) => Tok::Num(v),
                    Err(_) => {
                        return Err(ParseError {
                            offset: start,
                            kind: ParseErrorKind::BadNumber(text.to_string()),
                        })
                    }
                }
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                while self.pos < self.bytes.len()
                    && matches!(self.bytes[self.pos], b'a'..=b'z' | b'A'..=b'Z' | b'_' | b'0'..=b'9')
                {
                    self.pos += 1;
                }
                Tok::Ident(self.src[start..self.pos].to_string())
            }
            other => {
                return Err(ParseError {
                    offset: start,
                    kind: ParseErrorKind::UnexpectedChar(other),
                })
            }
        };
        Ok(Some((tok, start)))
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser<'a> {
    toks: alloc::vec::Vec<(Tok, usize)>,
    idx: usize,
    var: &'a str,
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&(Tok, usize)> {
        self.toks.get(self.idx)
    }

    fn bump(&mut self) -> Option<(Tok, usize)> {
        let t = self.toks.get(self.idx).cloned();
        if t.is_some() {
            self.idx += 1;
        }
        t
    }

    // sum := product (('+'|'-') product)*
    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        while let Some((tok, _)) = self.peek() {
            let op = match tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.product()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    // product := unary (('*'|'/') unary)*
    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some((tok, _)) = self.peek() {
            let op = match tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    // unary := '-' unary | power
    fn unary(&mut self) -> Result<Expr, ParseError> {
        if let Some((Tok::Minus, _)) = self.peek() {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr::neg(inner));
        }
        self.power()
    }

    // power := primary ('^' unary)?   -- right-associative, exponent may be signed
    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if let Some((Tok::Caret, _)) = self.peek() {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::bin(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.bump() {
            None => Err(ParseError {
                offset: self.end,
                kind: ParseErrorKind::UnexpectedEnd,
            }),
            Some((Tok::Num(v), _)) => Ok(Expr::Num(v)),
            Some((Tok::LParen, offset)) => {
                let inner = self.sum()?;
                match self.bump() {
                    Some((Tok::RParen, _)) => Ok(inner),
                    _ => Err(ParseError {
                        offset,
                        kind: ParseErrorKind::UnbalancedParen,
                    }),
                }
            }
            Some((Tok::Ident(name), offset)) => {
                if let Some((Tok::LParen, _)) = self.peek() {
                    let func = Func::from_name(&name).ok_or(ParseError {
                        offset,
                        kind: ParseErrorKind::UnknownFunction(name.clone()),
                    })?;
                    self.bump(); // '('
                    let arg = self.sum()?;
                    match self.bump() {
                        Some((Tok::RParen, _)) => Ok(Expr::call(func, arg)),
                        _ => Err(ParseError {
                            offset,
                            kind: ParseErrorKind::UnbalancedParen,
                        }),
                    }
                } else if name == self.var {
                    Ok(Expr::Var)
                } else if name == "pi" {
                    Ok(Expr::Num(core::f64::consts::PI))
                } else {
                    Err(ParseError {
                        offset,
                        kind: ParseErrorKind::UnknownVariable(name),
                    })
                }
            }
            Some((tok, offset)) => Err(ParseError {
                offset,
                kind: ParseErrorKind::UnexpectedToken(format!("{:?}", tok)),
            }),
        }
    }
}

/// Parse `text` as an expression in the single free variable `var`.
///
/// Any other identifier that is not a function name or `pi` is rejected.
pub fn parse(text: &str, var: &str) -> Result<Expr, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError {
            offset: 0,
            kind: ParseErrorKind::Empty,
        });
    }
    let mut lexer = Lexer::new(text);
    let mut toks = alloc::vec::Vec::new();
    while let Some(t) = lexer.next()? {
        toks.push(t);
    }
    let end = text.len();
    let mut parser = Parser {
        toks,
        idx: 0,
        var,
        end,
    };
    let expr = parser.sum()?;
    if let Some((tok, offset)) = parser.peek() {
        let kind = match tok {
            Tok::RParen => ParseErrorKind::UnbalancedParen,
            other => ParseErrorKind::UnexpectedToken(format!("{:?}", other)),
        };
        return Err(ParseError {
            offset: *offset,
            kind,
        });
    }
    Ok(expr)
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

fn domain_err(e: &Expr, arg: f64, kind: DomainErrorKind) -> DomainError {
    DomainError {
        subexpr: print(e),
        arg,
        kind,
    }
}

/// Raise `base^exponent` under the real-domain rules: a negative base is only
/// allowed with an exactly integral exponent.
fn pow_real(e: &Expr, base: f64, exponent: f64) -> Result<f64, DomainError> {
    if base == 0.0 && exponent < 0.0 {
        return Err(domain_err(e, base, DomainErrorKind::ZeroToNegativePower));
    }
    if base < 0.0 {
        if exponent.fract() != 0.0 {
            return Err(domain_err(
                e,
                base,
                DomainErrorKind::NegativeBaseFractionalPower,
            ));
        }
        let magnitude = (-base).powf(exponent);
        let odd = (exponent.abs() % 2.0) == 1.0;
        return Ok(if odd { -magnitude } else { magnitude });
    }
    Ok(base.powf(exponent))
}

/// Evaluate at the point `x`. Total except for domain violations, which are
/// reported rather than silently producing NaN.
pub fn eval(e: &Expr, x: f64) -> Result<f64, DomainError> {
    match e {
        Expr::Num(v) => Ok(*v),
        Expr::Var => Ok(x),
        Expr::Neg(inner) => Ok(-eval(inner, x)?),
        Expr::Bin(op, a, b) => {
            let va = eval(a, x)?;
            let vb = eval(b, x)?;
            match op {
                BinOp::Add => Ok(va + vb),
                BinOp::Sub => Ok(va - vb),
                BinOp::Mul => Ok(va * vb),
                BinOp::Div => {
                    if vb == 0.0 {
                        Err(domain_err(e, x, DomainErrorKind::DivisionByZero))
                    } else {
                        Ok(va / vb)
                    }
                }
                BinOp::Pow => pow_real(e, va, vb),
            }
        }
        Expr::Call(func, arg) => {
            let v = eval(arg, x)?;
            match func {
                Func::Sqrt => {
                    if v < 0.0 {
                        Err(domain_err(e, v, DomainErrorKind::SqrtNegative))
                    } else {
                        Ok(v.sqrt())
                    }
                }
                Func::Exp => Ok(v.exp()),
                Func::Log => {
                    if v <= 0.0 {
                        Err(domain_err(e, v, DomainErrorKind::LogNonPositive))
                    } else {
                        Ok(v.ln())
                    }
                }
                Func::Sin => Ok(v.sin()),
                Func::Cos => Ok(v.cos()),
                Func::Cosh => Ok(v.cosh()),
                Func::Sinh => Ok(v.sinh()),
                Func::Atan => Ok(v.atan()),
                Func::Abs => Ok(v.abs()),
                Func::Sign => Ok(if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Num(_) | Expr::Var | Expr::Call(..) => 4,
        Expr::Bin(BinOp::Pow, ..) => 3,
        Expr::Neg(_) => 2,
        Expr::Bin(BinOp::Mul, ..) | Expr::Bin(BinOp::Div, ..) => 1,
        Expr::Bin(BinOp::Add, ..) | Expr::Bin(BinOp::Sub, ..) => 0,
    }
}

fn write_child(out: &mut String, child: &Expr, var: &str, needs_paren: bool) {
    if needs_paren {
        out.push('(');
        write_expr(out, child, var);
        out.push(')');
    } else {
        write_expr(out, child, var);
    }
}

fn write_expr(out: &mut String, e: &Expr, var: &str) {
    match e {
        Expr::Num(v) => {
            // {:?} is the shortest representation that round-trips the f64
            out.push_str(&format!("{:?}", v));
        }
        Expr::Var => out.push_str(var),
        Expr::Neg(inner) => {
            out.push('-');
            // the operand of unary minus must bind at least as tightly
            write_child(out, inner, var, precedence(inner) < 2);
        }
        Expr::Bin(op, a, b) => {
            let (sym, prec) = match op {
                BinOp::Add => ("+", 0),
                BinOp::Sub => ("-", 0),
                BinOp::Mul => ("*", 1),
                BinOp::Div => ("/", 1),
                BinOp::Pow => ("^", 3),
            };
            match op {
                BinOp::Pow => {
                    // left child must be primary; right side may be any unary
                    write_child(out, a, var, precedence(a) < 4);
                    out.push_str(sym);
                    write_child(out, b, var, precedence(b) < 2);
                }
                _ => {
                    write_child(out, a, var, precedence(a) < prec);
                    out.push_str(sym);
                    // left-associative: right child needs parens at equal precedence
                    write_child(out, b, var, precedence(b) <= prec);
                }
            }
        }
        Expr::Call(func, arg) => {
            out.push_str(func.name());
            out.push('(');
            write_expr(out, arg, var);
            out.push(')');
        }
    }
}

/// Print with the variable spelled `x`. See [`print_with_var`].
pub fn print(e: &Expr) -> String {
    print_with_var(e, "x")
}

/// Print to text that re-parses (with the same variable name) to a
/// structurally identical tree.
pub fn print_with_var(e: &Expr, var: &str) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, var);
    out
}
