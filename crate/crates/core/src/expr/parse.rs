//! Recursive-descent parser for the expression grammar.
//!
//! Grammar: infix `+ - * / ^`, integer and decimal literals, identifiers,
//! function application `f(args)`, the elementary functions `exp` and `ln`,
//! and derivative notation `D(f, x, n)`.
//!
//! `D` resolves in three ways:
//! * `D(u, t, n)` for a plain variable `u` produces the jet variable `udot`
//!   (`uddot` for `n = 2`);
//! * `D(f(args), x, n)` for an opaque application bumps the formal derivative
//!   order at the slot named `x` (or at 1-based position when `x` is an
//!   integer); a name not among the arguments yields zero;
//! * `D(tau, x, n)` for a bare identifier declared in the [`SymbolTable`]
//!   first expands to `tau(declared args)` and then differentiates as above;
//! * any other first argument is differentiated symbolically `n` times.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::Signed;

use super::{Atom, Expr, Rat, Var};

/// Declared opaque functions: name to argument-variable list. Needed only for
/// the bare-name `D(tau, x, n)` shorthand and for arity checking.
#[derive(Clone, Debug, Default)]
pub struct SymbolTable {
    funcs: BTreeMap<String, Vec<String>>,
}

impl SymbolTable {
    pub fn new() -> Self {
        SymbolTable::default()
    }

    pub fn declare(mut self, name: &str, args: &[&str]) -> Self {
        self.funcs
            .insert(name.to_owned(), args.iter().map(|s| (*s).to_owned()).collect());
        self
    }

    fn lookup(&self, name: &str) -> Option<&Vec<String>> {
        self.funcs.get(name)
    }
}

/// Parse failure with byte offset into the input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseError {
    /// Unexpected input at `offset`; `expected` lists acceptable tokens.
    Syntax { offset: usize, expected: Vec<String> },
    /// A declared function applied with the wrong number of arguments.
    ArityMismatch { name: String, expected: usize, got: usize, offset: usize },
    /// `^` exponent did not evaluate to an integer constant.
    NonIntegerExponent { offset: usize },
    /// Unsupported derivative request (e.g. order 0 or non-`t` jet slot).
    BadDerivative { offset: usize, reason: String },
}

impl core::fmt::Display for ParseError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ParseError::Syntax { offset, expected } => {
                write!(f, "syntax error at byte {}: expected one of {:?}", offset, expected)
            }
            ParseError::ArityMismatch { name, expected, got, offset } => write!(
                f,
                "function {} expects {} argument(s), got {} (at byte {})",
                name, expected, got, offset
            ),
            ParseError::NonIntegerExponent { offset } => {
                write!(f, "exponent at byte {} is not an integer constant", offset)
            }
            ParseError::BadDerivative { offset, reason } => {
                write!(f, "bad derivative at byte {}: {}", offset, reason)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(Rat),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src: src.as_bytes(), pos: 0 }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Tok::End, start));
        }
        let c = self.src[self.pos];
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'0'..=b'9' => return self.lex_number(start),
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let mut end = self.pos;
                while end < self.src.len()
                    && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_')
                {
                    end += 1;
                }
                let name = core::str::from_utf8(&self.src[start..end])
                    .expect("ascii identifier")
                    .to_owned();
                self.pos = end;
                return Ok((Tok::Ident(name), start));
            }
            _ => {
                return Err(ParseError::Syntax {
                    offset: start,
                    expected: alloc::vec!["token".to_owned()],
                })
            }
        };
        self.pos += 1;
        Ok((tok, start))
    }

    fn lex_number(&mut self, start: usize) -> Result<(Tok, usize), ParseError> {
        let mut end = self.pos;
        while end < self.src.len() && self.src[end].is_ascii_digit() {
            end += 1;
        }
        let int_part = core::str::from_utf8(&self.src[start..end]).expect("digits");
        let mut numer: BigInt = int_part.parse().expect("integer literal");
        let mut denom = BigInt::from(1);
        if end < self.src.len() && self.src[end] == b'.' {
            let fstart = end + 1;
            let mut fend = fstart;
            while fend < self.src.len() && self.src[fend].is_ascii_digit() {
                fend += 1;
            }
            if fend == fstart {
                return Err(ParseError::Syntax {
                    offset: fstart,
                    expected: alloc::vec!["digit".to_owned()],
                });
            }
            let frac = core::str::from_utf8(&self.src[fstart..fend]).expect("digits");
            let scale = BigInt::from(10).pow((fend - fstart) as u32);
            numer = numer * &scale + frac.parse::<BigInt>().expect("fraction digits");
            denom = scale;
            end = fend;
        }
        self.pos = end;
        Ok((Tok::Num(Rat::new(numer, denom)), start))
    }
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    idx: usize,
    table: &'a SymbolTable,
}

/// Parse `text` into a normalized expression.
pub fn parse(text: &str, table: &SymbolTable) -> Result<Expr, ParseError> {
    let mut lexer = Lexer::new(text);
    let mut toks = Vec::new();
    loop {
        let (tok, off) = lexer.next()?;
        let end = tok == Tok::End;
        toks.push((tok, off));
        if end {
            break;
        }
    }
    let mut p = Parser { toks, idx: 0, table };
    let e = p.expr()?;
    p.expect(Tok::End, "end of input")?;
    Ok(e)
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &(Tok, usize) {
        &self.toks[self.idx]
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.idx].clone();
        if self.idx + 1 < self.toks.len() {
            self.idx += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, desc: &str) -> Result<usize, ParseError> {
        let (tok, off) = self.bump();
        if tok == want {
            Ok(off)
        } else {
            Err(ParseError::Syntax { offset: off, expected: alloc::vec![desc.to_owned()] })
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek().0 {
                Tok::Plus => {
                    self.bump();
                    acc = acc.add(&self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek().0 {
                Tok::Star => {
                    self.bump();
                    acc = acc.mul(&self.factor()?);
                }
                Tok::Slash => {
                    let (_, off) = self.bump();
                    let rhs = self.factor()?;
                    if rhs.is_zero_expr() {
                        return Err(ParseError::Syntax {
                            offset: off,
                            expected: alloc::vec!["nonzero divisor".to_owned()],
                        });
                    }
                    acc = acc.div(&rhs);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.peek().0 == Tok::Minus {
            self.bump();
            return Ok(self.factor()?.neg());
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek().0 == Tok::Caret {
            let (_, off) = self.bump();
            // exponent binds tighter than unary minus on its left, right-assoc
            let e = self.factor()?;
            let k = e
                .as_rational()
                .filter(|r| r.is_integer())
                .and_then(|r| i32::try_from(r.to_integer()).ok())
                .ok_or(ParseError::NonIntegerExponent { offset: off })?;
            if k < 0 && base.is_zero_expr() {
                return Err(ParseError::Syntax {
                    offset: off,
                    expected: alloc::vec!["nonzero base for negative power".to_owned()],
                });
            }
            return Ok(base.pow_i(k));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let (tok, off) = self.bump();
        match tok {
            Tok::Num(r) => Ok(Expr::rational(r)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, ")")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if self.peek().0 != Tok::LParen {
                    return Ok(Expr::var(&name));
                }
                self.bump();
                if name == "D" {
                    return self.derivative(off);
                }
                let mut args = Vec::new();
                if self.peek().0 != Tok::RParen {
                    loop {
                        args.push(self.expr()?);
                        if self.peek().0 == Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RParen, ")")?;
                match name.as_str() {
                    "exp" | "ln" => {
                        if args.len() != 1 {
                            return Err(ParseError::ArityMismatch {
                                name,
                                expected: 1,
                                got: args.len(),
                                offset: off,
                            });
                        }
                        if name == "exp" {
                            Ok(args[0].exp())
                        } else {
                            Ok(args[0].ln())
                        }
                    }
                    _ => {
                        if let Some(declared) = self.table.lookup(&name) {
                            if declared.len() != args.len() {
                                return Err(ParseError::ArityMismatch {
                                    name,
                                    expected: declared.len(),
                                    got: args.len(),
                                    offset: off,
                                });
                            }
                        }
                        Ok(Expr::opaque(&name, &args))
                    }
                }
            }
            _ => Err(ParseError::Syntax {
                offset: off,
                expected: alloc::vec![
                    "number".to_owned(),
                    "identifier".to_owned(),
                    "(".to_owned(),
                ],
            }),
        }
    }

    /// `D(f, x, n)` after the opening parenthesis has been consumed.
    fn derivative(&mut self, off: usize) -> Result<Expr, ParseError> {
        let target = self.expr()?;
        self.expect(Tok::Comma, ",")?;
        let (slot_tok, slot_off) = self.bump();
        let slot = match slot_tok {
            Tok::Ident(name) => Slot::Name(name),
            Tok::Num(r) if r.is_integer() && r.is_positive() => {
                Slot::Index(i32::try_from(r.to_integer()).unwrap_or(0) as usize)
            }
            _ => {
                return Err(ParseError::Syntax {
                    offset: slot_off,
                    expected: alloc::vec!["variable".to_owned(), "argument index".to_owned()],
                })
            }
        };
        self.expect(Tok::Comma, ",")?;
        let (n_tok, n_off) = self.bump();
        let order = match n_tok {
            Tok::Num(r) if r.is_integer() && r.is_positive() => {
                u32::try_from(r.to_integer()).map_err(|_| ParseError::BadDerivative {
                    offset: n_off,
                    reason: "order out of range".to_owned(),
                })?
            }
            _ => {
                return Err(ParseError::BadDerivative {
                    offset: n_off,
                    reason: "order must be a positive integer".to_owned(),
                })
            }
        };
        self.expect(Tok::RParen, ")")?;
        resolve_derivative(target, slot, order, off, self.table)
    }
}

enum Slot {
    Name(String),
    Index(usize),
}

fn resolve_derivative(
    target: Expr,
    slot: Slot,
    order: u32,
    off: usize,
    table: &SymbolTable,
) -> Result<Expr, ParseError> {
    // single pure opaque atom: bump the formal multi-index
    if let Some(call) = single_opaque(&target) {
        let pos = match &slot {
            Slot::Index(i) => {
                if *i == 0 || *i > call.args.len() {
                    return Err(ParseError::BadDerivative {
                        offset: off,
                        reason: format!("argument index {} out of range", i),
                    });
                }
                Some(i - 1)
            }
            Slot::Name(name) => call.args.iter().position(|a| is_var_named(a, name)),
        };
        return Ok(match pos {
            // derivative with respect to a non-argument is zero by construction
            None => Expr::zero(),
            Some(i) => {
                let mut orders = call.orders.clone();
                orders[i] += order;
                Expr::opaque_deriv(&call.name, &call.args, &orders)
            }
        });
    }
    // bare declared function name: expand to its declared application first
    if let Some(name) = single_var(&target) {
        if let Some(declared) = table.lookup(&name) {
            let args: Vec<Expr> = declared.iter().map(|a| Expr::var(a)).collect();
            return resolve_derivative(Expr::opaque(&name, &args), slot, order, off, table);
        }
        // jet shorthand: D(u, t, n) -> udot / uddot
        if let Slot::Name(s) = &slot {
            if s == "t" {
                return match order {
                    1 => Ok(Expr::var(&format!("{}dot", name))),
                    2 => Ok(Expr::var(&format!("{}ddot", name))),
                    _ => Err(ParseError::BadDerivative {
                        offset: off,
                        reason: "jet order above 2 is unsupported".to_owned(),
                    }),
                };
            }
        }
    }
    // fall back to symbolic partial differentiation
    match slot {
        Slot::Name(name) => {
            let v = Var::new(&name);
            let mut e = target;
            for _ in 0..order {
                e = e.differentiate(&v);
            }
            Ok(e)
        }
        Slot::Index(_) => Err(ParseError::BadDerivative {
            offset: off,
            reason: "positional derivative requires an opaque application".to_owned(),
        }),
    }
}

fn single_opaque(e: &Expr) -> Option<&super::OpaqueCall> {
    if !e.den().is_one() || e.num().0.len() != 1 {
        return None;
    }
    let (m, c) = e.num().0.iter().next()?;
    if !num_traits::One::is_one(c) || m.0.len() != 1 {
        return None;
    }
    match m.0.iter().next()? {
        (Atom::Opaque(call), 1) => Some(call),
        _ => None,
    }
}

fn single_var(e: &Expr) -> Option<String> {
    if !e.den().is_one() || e.num().0.len() != 1 {
        return None;
    }
    let (m, c) = e.num().0.iter().next()?;
    if !num_traits::One::is_one(c) || m.0.len() != 1 {
        return None;
    }
    match m.0.iter().next()? {
        (Atom::Var(v), 1) => Some(v.name().to_owned()),
        _ => None,
    }
}

fn is_var_named(e: &Expr, name: &str) -> bool {
    single_var(e).as_deref() == Some(name)
}
