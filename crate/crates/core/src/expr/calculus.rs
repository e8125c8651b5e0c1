//! Differentiation and substitution over the canonical form.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use num_bigint::BigInt;

use super::{Atom, Expr, Monomial, Poly, Rat, Var};

/// A simultaneous substitution: variables map to expressions, opaque function
/// names map to symbolic rules `(params, body)`. Substituting an opaque node
/// with a formal derivative multi-index differentiates the rule body
/// accordingly before the arguments are plugged in.
#[derive(Clone, Debug, Default)]
pub struct Binding {
    vars: BTreeMap<Var, Expr>,
    funcs: BTreeMap<String, (Vec<Var>, Expr)>,
}

impl Binding {
    pub fn new() -> Self {
        Binding::default()
    }

    pub fn var(mut self, name: &str, e: Expr) -> Self {
        self.vars.insert(Var::new(name), e);
        self
    }

    pub fn set_var(&mut self, v: &Var, e: Expr) {
        self.vars.insert(v.clone(), e);
    }

    pub fn func(mut self, name: &str, params: &[&str], body: Expr) -> Self {
        self.funcs.insert(
            name.to_owned(),
            (params.iter().map(|p| Var::new(p)).collect(), body),
        );
        self
    }

    pub fn lookup_var(&self, v: &Var) -> Option<&Expr> {
        self.vars.get(v)
    }

    pub fn lookup_func(&self, name: &str) -> Option<&(Vec<Var>, Expr)> {
        self.funcs.get(name)
    }

    pub fn vars(&self) -> impl Iterator<Item = (&Var, &Expr)> {
        self.vars.iter()
    }
}

impl Expr {
    /// Partial derivative with respect to `v`. Total over the expression
    /// language: opaque functions produce formal-derivative nodes times the
    /// inner derivatives of their arguments.
    pub fn differentiate(&self, v: &Var) -> Expr {
        let dn = diff_poly(self.num(), v);
        if self.den().is_one() {
            return dn;
        }
        let dd = diff_poly(self.den(), v);
        let den_e = Expr { num: self.den().clone(), den: Poly::one() };
        let num_e = Expr { num: self.num().clone(), den: Poly::one() };
        // (n' d - n d') / d^2
        dn.mul(&den_e).sub(&num_e.mul(&dd)).div(&den_e.mul(&den_e))
    }

    /// Simultaneous capture-free substitution; the result is normalized.
    pub fn substitute(&self, b: &Binding) -> Expr {
        let n = subst_poly(self.num(), b);
        let d = subst_poly(self.den(), b);
        n.div(&d)
    }
}

fn diff_poly(p: &Poly, v: &Var) -> Expr {
    let mut acc = Expr::zero();
    for (m, c) in &p.0 {
        let entries: Vec<(&Atom, u32)> = m.0.iter().map(|(a, &k)| (a, k)).collect();
        for (i, (atom, k)) in entries.iter().enumerate() {
            let da = diff_atom(atom, v);
            if da.is_zero_expr() {
                continue;
            }
            // c * k * atom^(k-1) * da * (other atoms)
            let mut rest = BTreeMap::new();
            for (j, (aj, kj)) in entries.iter().enumerate() {
                let kk = if i == j { kj - 1 } else { *kj };
                if kk > 0 {
                    rest.insert((*aj).clone(), kk);
                }
            }
            let rest = Monomial::from_map(rest);
            let mut term_map = BTreeMap::new();
            term_map.insert(rest, c.clone() * Rat::from(BigInt::from(*k)));
            let term = Expr { num: Poly(term_map), den: Poly::one() };
            acc = acc.add(&term.mul(&da));
        }
    }
    acc
}

fn diff_atom(atom: &Atom, v: &Var) -> Expr {
    match atom {
        Atom::Var(w) => {
            if w == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Atom::Exp(u) => {
            let du = u.differentiate(v);
            if du.is_zero_expr() {
                Expr::zero()
            } else {
                u.exp().mul(&du)
            }
        }
        Atom::Ln(u) => {
            let du = u.differentiate(v);
            if du.is_zero_expr() {
                Expr::zero()
            } else {
                du.div(u)
            }
        }
        Atom::Opaque(call) => {
            let mut acc = Expr::zero();
            for (i, arg) in call.args.iter().enumerate() {
                let darg = arg.differentiate(v);
                if darg.is_zero_expr() {
                    continue;
                }
                let mut orders = call.orders.clone();
                orders[i] += 1;
                let bumped = Expr::opaque_deriv(&call.name, &call.args, &orders);
                acc = acc.add(&bumped.mul(&darg));
            }
            acc
        }
    }
}

fn subst_poly(p: &Poly, b: &Binding) -> Expr {
    let mut acc = Expr::zero();
    for (m, c) in &p.0 {
        let mut term = Expr::rational(c.clone());
        for (a, &k) in &m.0 {
            term = term.mul(&subst_atom(a, b).pow_i(k as i32));
        }
        acc = acc.add(&term);
    }
    acc
}

fn subst_atom(a: &Atom, b: &Binding) -> Expr {
    match a {
        Atom::Var(v) => b.lookup_var(v).cloned().unwrap_or_else(|| Expr::from_var(v)),
        Atom::Exp(u) => u.substitute(b).exp(),
        Atom::Ln(u) => u.substitute(b).ln(),
        Atom::Opaque(call) => {
            let args: Vec<Expr> = call.args.iter().map(|e| e.substitute(b)).collect();
            match b.lookup_func(&call.name) {
                None => Expr::opaque_deriv(&call.name, &args, &call.orders),
                Some((params, body)) => {
                    assert_eq!(
                        params.len(),
                        call.args.len(),
                        "rule arity mismatch for {}",
                        call.name
                    );
                    let mut e = body.clone();
                    for (param, &n) in params.iter().zip(call.orders.iter()) {
                        for _ in 0..n {
                            e = e.differentiate(param);
                        }
                    }
                    let mut inner = Binding::new();
                    for (param, arg) in params.iter().zip(args.iter()) {
                        inner.set_var(param, arg.clone());
                    }
                    e.substitute(&inner)
                }
            }
        }
    }
}

impl Expr {
    pub(crate) fn from_num_poly(num: Poly) -> Expr {
        Expr { num, den: Poly::one() }
    }
}
