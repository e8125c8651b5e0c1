//! IEEE double evaluation of symbolic expressions.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::cast::ToPrimitive;
#[cfg(not(test))]
#[allow(unused_imports)]
use num_traits::Float;

use super::{Atom, Binding, Expr, Poly, Rat, Var};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvalError {
    /// A variable or opaque function had no numeric binding.
    UnboundSymbol(String),
    /// Logarithm of a nonpositive value, or division by a vanishing
    /// denominator.
    Domain(String),
}

impl core::fmt::Display for EvalError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EvalError::UnboundSymbol(s) => write!(f, "unbound symbol: {}", s),
            EvalError::Domain(s) => write!(f, "domain error: {}", s),
        }
    }
}

/// Numeric environment: variables carry values, opaque functions carry
/// symbolic rules that are differentiated and then evaluated at the argument
/// values. A rule body may reference only its parameters and bound symbols.
#[derive(Clone, Debug, Default)]
pub struct NumBinding {
    vars: BTreeMap<Var, f64>,
    funcs: BTreeMap<String, (Vec<Var>, Expr)>,
}

impl NumBinding {
    pub fn new() -> Self {
        NumBinding::default()
    }

    pub fn var(mut self, name: &str, value: f64) -> Self {
        self.vars.insert(Var::new(name), value);
        self
    }

    pub fn set(&mut self, v: &Var, value: f64) {
        self.vars.insert(v.clone(), value);
    }

    pub fn func(mut self, name: &str, params: &[&str], body: Expr) -> Self {
        self.funcs.insert(
            name.to_owned(),
            (params.iter().map(|p| Var::new(p)).collect(), body),
        );
        self
    }

    /// The symbolic-substitution view of the function rules, used to
    /// eliminate opaque atoms before compilation.
    pub fn func_binding(&self) -> Binding {
        let mut b = Binding::new();
        for (name, (params, body)) in &self.funcs {
            let params: Vec<&str> = params.iter().map(|v| v.name()).collect();
            b = b.func(name, &params, body.clone());
        }
        b
    }

    /// Iterate over the bound variable values.
    pub fn var_values(&self) -> impl Iterator<Item = (&Var, &f64)> {
        self.vars.iter()
    }

    fn get(&self, v: &Var) -> Result<f64, EvalError> {
        self.vars
            .get(v)
            .copied()
            .ok_or_else(|| EvalError::UnboundSymbol(v.name().to_owned()))
    }
}

pub(crate) fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

impl Expr {
    /// Evaluate under a numeric binding. Every variable and opaque function
    /// reachable from the expression must be bound.
    pub fn evaluate(&self, b: &NumBinding) -> Result<f64, EvalError> {
        let n = eval_poly(self.num(), b)?;
        if self.den().is_one() {
            return Ok(n);
        }
        let d = eval_poly(self.den(), b)?;
        if d == 0.0 {
            return Err(EvalError::Domain("denominator evaluated to zero".to_owned()));
        }
        Ok(n / d)
    }
}

fn eval_poly(p: &Poly, b: &NumBinding) -> Result<f64, EvalError> {
    let mut acc = 0.0;
    for (m, c) in &p.0 {
        let mut term = rat_to_f64(c);
        for (a, &k) in &m.0 {
            term *= eval_atom(a, b)?.powi(k as i32);
        }
        acc += term;
    }
    Ok(acc)
}

fn eval_atom(a: &Atom, b: &NumBinding) -> Result<f64, EvalError> {
    match a {
        Atom::Var(v) => b.get(v),
        Atom::Exp(u) => Ok(u.evaluate(b)?.exp()),
        Atom::Ln(u) => {
            let x = u.evaluate(b)?;
            if x <= 0.0 {
                return Err(EvalError::Domain("ln of nonpositive value".to_owned()));
            }
            Ok(x.ln())
        }
        Atom::Opaque(call) => {
            let (params, body) = b
                .funcs
                .get(&call.name)
                .ok_or_else(|| EvalError::UnboundSymbol(call.name.clone()))?;
            let mut deriv = body.clone();
            for (param, &n) in params.iter().zip(call.orders.iter()) {
                for _ in 0..n {
                    deriv = deriv.differentiate(param);
                }
            }
            let mut inner = b.clone();
            for (param, arg) in params.iter().zip(call.args.iter()) {
                let value = arg.evaluate(b)?;
                inner.set(param, value);
            }
            deriv.evaluate(&inner)
        }
    }
}
