//! Coefficient collection: partition a polynomial expression by monomials in
//! a chosen set of variables.

use alloc::collections::BTreeMap;
use alloc::string::String;

use super::{Atom, Expr, Monomial, Poly, Var};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CollectError {
    /// A collection variable occurs inside an opaque-function argument, under
    /// `exp`/`ln`, or in the denominator.
    NotPolynomial { var: String },
}

impl core::fmt::Display for CollectError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CollectError::NotPolynomial { var } => {
                write!(f, "expression is not polynomial in {}", var)
            }
        }
    }
}

impl Expr {
    /// Split into `Σ monomial · coefficient` where monomials range over
    /// `vars` and coefficients are free of them. Reassembling the map with
    /// [`Expr::reassemble`] restores the input exactly.
    pub fn collect(&self, vars: &[Var]) -> Result<BTreeMap<Monomial, Expr>, CollectError> {
        for v in vars {
            if self.den().mentions_var(v) {
                return Err(CollectError::NotPolynomial { var: v.name().into() });
            }
            if hidden_occurrence(self, v) {
                return Err(CollectError::NotPolynomial { var: v.name().into() });
            }
        }
        let mut buckets: BTreeMap<Monomial, Poly> = BTreeMap::new();
        for (m, c) in &self.num().0 {
            let mut key = BTreeMap::new();
            let mut rest = BTreeMap::new();
            for (a, &k) in &m.0 {
                let is_target = matches!(a, Atom::Var(v) if vars.contains(v));
                if is_target {
                    key.insert(a.clone(), k);
                } else {
                    rest.insert(a.clone(), k);
                }
            }
            let key = Monomial::from_map(key);
            let rest = Monomial::from_map(rest);
            let bucket = buckets.entry(key).or_insert_with(Poly::zero);
            let mut term = BTreeMap::new();
            term.insert(rest, c.clone());
            *bucket = bucket.add(&Poly(term));
        }
        let den = Expr::from_num_poly(self.den().clone());
        Ok(buckets
            .into_iter()
            .map(|(k, p)| (k, Expr::from_num_poly(p).div(&den)))
            .collect())
    }

    /// The monomial as a standalone expression with unit coefficient.
    pub fn from_monomial(m: &Monomial) -> Expr {
        Expr::from_num_poly(Poly(
            [(m.clone(), super::rat_int(1))]
                .into_iter()
                .collect(),
        ))
    }

    /// Inverse of [`Expr::collect`].
    pub fn reassemble(parts: &BTreeMap<Monomial, Expr>) -> Expr {
        let mut acc = Expr::zero();
        for (m, coeff) in parts {
            acc = acc.add(&Expr::from_monomial(m).mul(coeff));
        }
        acc
    }
}

/// True if `v` occurs inside any atom argument (not at the polynomial layer).
fn hidden_occurrence(e: &Expr, v: &Var) -> bool {
    let mut found = false;
    for p in [e.num(), e.den()] {
        for a in p.atoms() {
            match a {
                Atom::Exp(u) | Atom::Ln(u) => {
                    if u.mentions_var(v) {
                        found = true;
                    }
                }
                Atom::Opaque(call) => {
                    for arg in &call.args {
                        if arg.mentions_var(v) {
                            found = true;
                        }
                    }
                }
                Atom::Var(_) => {}
            }
        }
    }
    found
}

/// Build a monomial over plain variables, for looking up collected buckets.
pub fn monomial(vars: &[(&Var, u32)]) -> Monomial {
    let mut map = BTreeMap::new();
    for (v, k) in vars {
        if *k > 0 {
            map.insert(Atom::Var((*v).clone()), *k);
        }
    }
    Monomial::from_map(map)
}
