//! Minimal computer-algebra core.
//!
//! Expressions are kept in a canonical normal form at all times: a ratio of
//! two multivariate polynomials whose indeterminates ("atoms") are variables,
//! `exp`/`ln` applications, and opaque function applications carrying a formal
//! partial-derivative multi-index. Coefficients are exact big rationals, so
//! zero testing is a decision, not a tolerance. Floats enter only through
//! [`Expr::evaluate`].

mod calculus;
mod collect;
mod eval;
mod parse;
mod render;

pub use calculus::Binding;
pub use collect::{monomial, CollectError};
pub use eval::{EvalError, NumBinding};
pub use parse::{parse, ParseError, SymbolTable};

pub(crate) use eval::rat_to_f64;

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Exact rational coefficient type.
pub type Rat = BigRational;

/// Exact rational from a machine integer.
pub fn rat_int(n: i64) -> Rat {
    Rat::from(BigInt::from(n))
}

/// A named variable. Ordered lexicographically by name; this ordering is the
/// global tie-break used by the monomial order, so renders are reproducible.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Var(pub(crate) String);

impl Var {
    pub fn new(name: &str) -> Self {
        Var(name.to_owned())
    }
    pub fn name(&self) -> &str {
        &self.0
    }
}

/// An opaque function application with a formal partial-derivative
/// multi-index: `orders[i]` counts derivatives with respect to `args[i]`.
/// Mixed partials commute by construction since the multi-index is
/// position-based, not order-of-derivation based.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct OpaqueCall {
    pub name: String,
    pub args: Vec<Expr>,
    pub orders: Vec<u32>,
}

/// An indeterminate of the polynomial layer.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Atom {
    Var(Var),
    Exp(Expr),
    Ln(Expr),
    Opaque(OpaqueCall),
}

/// A power product of atoms. Exponents are strictly positive; at most one
/// `Exp` atom is present (with exponent 1), its argument carrying the merged
/// exponent sum, so `exp(u)·exp(v)` and `exp(u+v)` are node-identical.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Monomial(pub(crate) BTreeMap<Atom, u32>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(BTreeMap::new())
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u64 {
        self.0.values().map(|&k| k as u64).sum()
    }

    fn from_map(map: BTreeMap<Atom, u32>) -> Self {
        let mut m = Monomial(map);
        m.0.retain(|_, k| *k > 0);
        m.canonicalize_exp();
        m
    }

    /// Fold all `Exp` atoms into a single one with summed argument.
    fn canonicalize_exp(&mut self) {
        let exps: Vec<(Expr, u32)> = self
            .0
            .iter()
            .filter_map(|(a, &k)| match a {
                Atom::Exp(u) => Some((u.clone(), k)),
                _ => None,
            })
            .collect();
        if exps.is_empty() {
            return;
        }
        if exps.len() == 1 && exps[0].1 == 1 {
            return;
        }
        self.0.retain(|a, _| !matches!(a, Atom::Exp(_)));
        let mut total = Expr::zero();
        for (u, k) in exps {
            total = total.add(&u.scale(&Rat::from(BigInt::from(k))));
        }
        if !total.is_zero_expr() {
            self.0.insert(Atom::Exp(total), 1);
        }
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut map = self.0.clone();
        for (a, &k) in &other.0 {
            *map.entry(a.clone()).or_insert(0) += k;
        }
        Monomial::from_map(map)
    }

    /// Exact quotient `self / other`, if it exists as a monomial.
    fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut map = self.0.clone();
        for (a, &k) in &other.0 {
            match a {
                Atom::Exp(v) => {
                    // handled below via exp merge: multiply by exp(-v)
                    let _ = (a, k, v);
                }
                _ => {
                    let have = map.get(a).copied().unwrap_or(0);
                    if have < k {
                        return None;
                    }
                    if have == k {
                        map.remove(a);
                    } else {
                        map.insert(a.clone(), have - k);
                    }
                }
            }
        }
        // exp parts subtract on the argument
        for (a, &k) in &other.0 {
            if let Atom::Exp(v) = a {
                let neg = v.scale(&-Rat::from(BigInt::from(k)));
                if !neg.is_zero_expr() {
                    *map.entry(Atom::Exp(neg)).or_insert(0) += 1;
                }
            }
        }
        Some(Monomial::from_map(map))
    }
}

// Graded lexicographic order: total degree first, then the exponent vector
// compared atom-by-atom in ascending atom order.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {}
            o => return o,
        }
        let mut it_a = self.0.iter();
        let mut it_b = other.0.iter();
        loop {
            match (it_a.next(), it_b.next()) {
                (None, None) => return Ordering::Equal,
                (None, Some(_)) => return Ordering::Less,
                (Some(_), None) => return Ordering::Greater,
                (Some((aa, ka)), Some((ab, kb))) => match aa.cmp(ab) {
                    // earlier atom with nonzero power sorts higher
                    Ordering::Less => return Ordering::Greater,
                    Ordering::Greater => return Ordering::Less,
                    Ordering::Equal => match ka.cmp(kb) {
                        Ordering::Equal => continue,
                        o => return o,
                    },
                },
            }
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A multivariate polynomial over atoms; no explicit zero coefficients.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Default)]
pub struct Poly(pub(crate) BTreeMap<Monomial, Rat>);

impl Poly {
    pub fn zero() -> Self {
        Poly(BTreeMap::new())
    }

    pub fn one() -> Self {
        Poly::constant(Rat::one())
    }

    pub fn constant(c: Rat) -> Self {
        let mut map = BTreeMap::new();
        if !c.is_zero() {
            map.insert(Monomial::one(), c);
        }
        Poly(map)
    }

    pub fn from_atom(a: Atom) -> Self {
        let mut mono = BTreeMap::new();
        mono.insert(a, 1);
        let mut map = BTreeMap::new();
        map.insert(Monomial::from_map(mono), Rat::one());
        Poly(map)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.0.len() == 1 && self.0.get(&Monomial::one()).map(|c| c.is_one()).unwrap_or(false)
    }

    /// The constant value, if this polynomial is constant.
    pub fn as_constant(&self) -> Option<Rat> {
        if self.0.is_empty() {
            return Some(Rat::zero());
        }
        if self.0.len() == 1 {
            if let Some(c) = self.0.get(&Monomial::one()) {
                return Some(c.clone());
            }
        }
        None
    }

    fn insert_term(map: &mut BTreeMap<Monomial, Rat>, m: Monomial, c: Rat) {
        if c.is_zero() {
            return;
        }
        match map.entry(m) {
            alloc::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            alloc::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().clone() + c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut map = self.0.clone();
        for (m, c) in &other.0 {
            Poly::insert_term(&mut map, m.clone(), c.clone());
        }
        Poly(map)
    }

    pub fn neg(&self) -> Poly {
        Poly(self.0.iter().map(|(m, c)| (m.clone(), -c.clone())).collect())
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut map = BTreeMap::new();
        for (ma, ca) in &self.0 {
            for (mb, cb) in &other.0 {
                Poly::insert_term(&mut map, ma.mul(mb), ca.clone() * cb.clone());
            }
        }
        Poly(map)
    }

    pub fn scale(&self, c: &Rat) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly(self.0.iter().map(|(m, k)| (m.clone(), k.clone() * c.clone())).collect())
    }

    pub fn pow(&self, mut k: u32) -> Poly {
        let mut acc = Poly::one();
        let mut base = self.clone();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Leading term in the monomial order.
    pub fn leading(&self) -> Option<(&Monomial, &Rat)> {
        self.0.iter().next_back()
    }

    /// Exact polynomial quotient, or `None` if the division leaves a remainder.
    pub fn exact_div(&self, den: &Poly) -> Option<Poly> {
        if den.is_zero() {
            return None;
        }
        if den.is_one() {
            return Some(self.clone());
        }
        let (dm, dc) = den.leading().expect("nonzero divisor");
        let dm = dm.clone();
        let dc = dc.clone();
        let mut rem = self.clone();
        let mut quot = BTreeMap::new();
        while !rem.is_zero() {
            let (rm, rc) = rem.leading().expect("nonzero remainder");
            let qm = rm.div(&dm)?;
            let qc = rc.clone() / dc.clone();
            let mut qpoly = BTreeMap::new();
            qpoly.insert(qm.clone(), qc.clone());
            let qpoly = Poly(qpoly);
            let next = rem.sub(&qpoly.mul(den));
            // guard against non-terminating division in the exp-merged order
            if let Some((nm, _)) = next.leading() {
                if nm >= rm {
                    return None;
                }
            }
            Poly::insert_term(&mut quot, qm, qc);
            rem = next;
        }
        Some(Poly(quot))
    }

    /// Per-atom minimum power over all monomials (the monomial content).
    fn content_monomial(&self) -> Monomial {
        let mut iter = self.0.keys();
        let first = match iter.next() {
            Some(m) => m.clone(),
            None => return Monomial::one(),
        };
        let mut content = first.0;
        // exp atoms never participate in content extraction
        content.retain(|a, _| !matches!(a, Atom::Exp(_)));
        for m in iter {
            content.retain(|a, k| {
                if let Some(&have) = m.0.get(a) {
                    *k = (*k).min(have);
                    *k > 0
                } else {
                    false
                }
            });
            if content.is_empty() {
                break;
            }
        }
        Monomial(content)
    }

    /// True if some monomial contains the variable at the polynomial layer.
    pub fn mentions_var(&self, v: &Var) -> bool {
        self.0.keys().any(|m| m.0.contains_key(&Atom::Var(v.clone())))
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.0.keys().flat_map(|m| m.0.keys())
    }
}

/// An immutable symbolic expression in canonical normal form.
///
/// Invariants: `den` is nonzero and monic in the leading coefficient; the
/// numerator/denominator pair carries no common monomial factor; an exact
/// polynomial quotient is folded into the numerator; a single-monomial
/// denominator holds no `exp` factor (those move to the numerator negated).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Expr {
    num: Poly,
    den: Poly,
}

impl Expr {
    fn make(num: Poly, den: Poly) -> Expr {
        assert!(!den.is_zero(), "division by the zero polynomial");
        let mut e = Expr { num, den };
        e.reduce();
        e
    }

    pub fn zero() -> Expr {
        Expr { num: Poly::zero(), den: Poly::one() }
    }

    pub fn one() -> Expr {
        Expr { num: Poly::one(), den: Poly::one() }
    }

    pub fn int(n: i64) -> Expr {
        Expr::rational(Rat::from(BigInt::from(n)))
    }

    pub fn rational(c: Rat) -> Expr {
        Expr { num: Poly::constant(c), den: Poly::one() }
    }

    pub fn var(name: &str) -> Expr {
        Expr { num: Poly::from_atom(Atom::Var(Var::new(name))), den: Poly::one() }
    }

    pub fn from_var(v: &Var) -> Expr {
        Expr { num: Poly::from_atom(Atom::Var(v.clone())), den: Poly::one() }
    }

    /// Opaque application `name(args)` with no formal derivatives applied.
    pub fn opaque(name: &str, args: &[Expr]) -> Expr {
        Expr::opaque_deriv(name, args, &alloc::vec![0; args.len()])
    }

    /// Opaque application with a formal partial-derivative multi-index.
    pub fn opaque_deriv(name: &str, args: &[Expr], orders: &[u32]) -> Expr {
        assert_eq!(args.len(), orders.len(), "multi-index length mismatch");
        Expr {
            num: Poly::from_atom(Atom::Opaque(OpaqueCall {
                name: name.to_owned(),
                args: args.to_vec(),
                orders: orders.to_vec(),
            })),
            den: Poly::one(),
        }
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero_expr(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one_expr(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }

    /// The constant value, if the expression is a rational constant.
    pub fn as_rational(&self) -> Option<Rat> {
        match (self.num.as_constant(), self.den.as_constant()) {
            (Some(n), Some(d)) => Some(n / d),
            _ => {
                if self.den.is_one() {
                    self.num.as_constant()
                } else {
                    None
                }
            }
        }
    }

    pub fn add(&self, other: &Expr) -> Expr {
        if self.den == other.den {
            return Expr::make(self.num.add(&other.num), self.den.clone());
        }
        Expr::make(
            self.num.mul(&other.den).add(&other.num.mul(&self.den)),
            self.den.mul(&other.den),
        )
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Expr {
        Expr { num: self.num.neg(), den: self.den.clone() }
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        Expr::make(self.num.mul(&other.num), self.den.mul(&other.den))
    }

    pub fn div(&self, other: &Expr) -> Expr {
        assert!(!other.is_zero_expr(), "division by zero expression");
        Expr::make(self.num.mul(&other.den), self.den.mul(&other.num))
    }

    pub fn scale(&self, c: &Rat) -> Expr {
        Expr::make(self.num.scale(c), self.den.clone())
    }

    pub fn pow_i(&self, k: i32) -> Expr {
        if k == 0 {
            return Expr::one();
        }
        let p = k.unsigned_abs();
        let e = Expr::make(self.num.pow(p), self.den.pow(p));
        if k < 0 {
            Expr::one().div(&e)
        } else {
            e
        }
    }

    pub fn exp(&self) -> Expr {
        if self.is_zero_expr() {
            return Expr::one();
        }
        Expr { num: Poly::from_atom(Atom::Exp(self.clone())), den: Poly::one() }
    }

    pub fn ln(&self) -> Expr {
        if self.is_one_expr() {
            return Expr::zero();
        }
        Expr { num: Poly::from_atom(Atom::Ln(self.clone())), den: Poly::one() }
    }

    /// Restore the canonical-form invariants after raw arithmetic.
    fn reduce(&mut self) {
        if self.num.is_zero() {
            self.den = Poly::one();
            return;
        }
        // cancel common monomial content
        let content_n = self.num.content_monomial();
        let content_d = self.den.content_monomial();
        let mut common = BTreeMap::new();
        for (a, &k) in &content_n.0 {
            if let Some(&kd) = content_d.0.get(a) {
                common.insert(a.clone(), k.min(kd));
            }
        }
        let common = Monomial(common);
        if !common.is_one() {
            let strip = |p: &Poly| -> Poly {
                Poly(
                    p.0
                        .iter()
                        .map(|(m, c)| (m.div(&common).expect("content divides"), c.clone()))
                        .collect(),
                )
            };
            self.num = strip(&self.num);
            self.den = strip(&self.den);
        }
        // a single-monomial denominator sheds its exp factor into the numerator
        if self.den.0.len() == 1 {
            let (m, c) = self.den.0.iter().next().expect("single monomial");
            if m.0.keys().any(|a| matches!(a, Atom::Exp(_))) {
                let c = c.clone();
                let mut rest = m.clone();
                let mut exp_neg = Monomial::one();
                rest.0.retain(|a, k| match a {
                    Atom::Exp(u) => {
                        let neg = u.scale(&-Rat::from(BigInt::from(*k)));
                        exp_neg.0.insert(Atom::Exp(neg), 1);
                        false
                    }
                    _ => true,
                });
                let exp_neg = Monomial::from_map(exp_neg.0);
                let mut shift = BTreeMap::new();
                shift.insert(exp_neg, Rat::one());
                self.num = self.num.mul(&Poly(shift));
                let mut den = BTreeMap::new();
                den.insert(rest, c);
                self.den = Poly(den);
            }
        }
        // fold an exact quotient
        if !self.den.is_one() {
            if let Some(q) = self.num.exact_div(&self.den) {
                self.num = q;
                self.den = Poly::one();
            }
        }
        // monic denominator
        if let Some((_, lc)) = self.den.leading() {
            if !lc.is_one() {
                let inv = Rat::one() / lc.clone();
                self.den = self.den.scale(&inv);
                self.num = self.num.scale(&inv);
            }
        }
    }

    /// All atoms appearing at any nesting depth.
    pub fn walk_atoms(&self, f: &mut impl FnMut(&Atom)) {
        for p in [&self.num, &self.den] {
            for a in p.atoms() {
                f(a);
                match a {
                    Atom::Exp(u) | Atom::Ln(u) => u.walk_atoms(f),
                    Atom::Opaque(call) => {
                        for arg in &call.args {
                            arg.walk_atoms(f);
                        }
                    }
                    Atom::Var(_) => {}
                }
            }
        }
    }

    /// True if the variable occurs anywhere, including inside atom arguments.
    pub fn mentions_var(&self, v: &Var) -> bool {
        let mut found = false;
        self.walk_atoms(&mut |a| {
            if let Atom::Var(w) = a {
                if w == v {
                    found = true;
                }
            }
        });
        found
    }

    /// Free variables of the expression, sorted by name.
    pub fn variables(&self) -> Vec<Var> {
        let mut set = alloc::collections::BTreeSet::new();
        self.walk_atoms(&mut |a| {
            if let Atom::Var(v) = a {
                set.insert(v.clone());
            }
        });
        set.into_iter().collect()
    }

    /// Decide whether the expression is identically zero. The decision is
    /// structural (canonical form); a randomized numeric sample guards against
    /// normalization bugs but never overrides the structural verdict.
    pub fn is_zero(&self) -> bool {
        let verdict = self.num.is_zero();
        #[cfg(debug_assertions)]
        if !verdict {
            crate::guard::check_nonzero_guard(self);
        }
        verdict
    }
}
