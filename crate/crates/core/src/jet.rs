//! Jet-space bookkeeping: total time derivatives and prolongation of point
//! vector fields to second order.
//!
//! Jet coordinates follow the naming convention `u -> udot -> uddot`; they
//! are ordinary registered variables, distinct from the base variables by
//! construction of the context.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::expr::{Binding, Expr, Rat, Var};

/// One independent variable, a list of dependents, and their jet chains up
/// to second order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JetContext {
    indep: Var,
    deps: Vec<Var>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum JetError {
    /// The input already contains second-order jet variables, so its total
    /// derivative would exceed the context order.
    OrderOverflow { var: String },
}

impl core::fmt::Display for JetError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            JetError::OrderOverflow { var } => {
                write!(f, "total derivative would exceed jet order 2 (found {})", var)
            }
        }
    }
}

impl JetContext {
    /// Context over independent `t` with the given dependent names.
    pub fn new(indep: &str, deps: &[&str]) -> Self {
        JetContext {
            indep: Var::new(indep),
            deps: deps.iter().map(|d| Var::new(d)).collect(),
        }
    }

    pub fn indep(&self) -> &Var {
        &self.indep
    }

    pub fn dependents(&self) -> &[Var] {
        &self.deps
    }

    pub fn first_jet(&self, dep: &Var) -> Var {
        Var::new(&format!("{}dot", dep.name()))
    }

    pub fn second_jet(&self, dep: &Var) -> Var {
        Var::new(&format!("{}ddot", dep.name()))
    }

    pub fn first_jets(&self) -> Vec<Var> {
        self.deps.iter().map(|d| self.first_jet(d)).collect()
    }

    pub fn second_jets(&self) -> Vec<Var> {
        self.deps.iter().map(|d| self.second_jet(d)).collect()
    }

    /// All coordinates through second order, base variables first.
    pub fn all_vars(&self) -> Vec<Var> {
        let mut vars = alloc::vec![self.indep.clone()];
        vars.extend(self.deps.iter().cloned());
        vars.extend(self.first_jets());
        vars.extend(self.second_jets());
        vars
    }

    /// Total derivative `D_t e = ∂e/∂t + Σ_u (udot ∂e/∂u + uddot ∂e/∂udot)`.
    pub fn total_derivative(&self, e: &Expr) -> Result<Expr, JetError> {
        for d in &self.deps {
            let second = self.second_jet(d);
            if e.mentions_var(&second) {
                return Err(JetError::OrderOverflow { var: second.name().into() });
            }
        }
        let mut acc = e.differentiate(&self.indep);
        for d in &self.deps {
            let first = self.first_jet(d);
            let second = self.second_jet(d);
            acc = acc.add(&Expr::from_var(&first).mul(&e.differentiate(d)));
            acc = acc.add(&Expr::from_var(&second).mul(&e.differentiate(&first)));
        }
        Ok(acc)
    }
}

/// A point vector field `G = τ ∂_t + Σ_u ψ_u ∂_u` with coefficient
/// expressions in base variables only. Missing coefficients are zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VectorField {
    ctx: JetContext,
    coeffs: BTreeMap<Var, Expr>,
}

impl VectorField {
    pub fn new(ctx: &JetContext) -> Self {
        VectorField { ctx: ctx.clone(), coeffs: BTreeMap::new() }
    }

    /// Set the coefficient of `∂_v`; `v` must be the independent or a
    /// dependent of the context, and the coefficient must be jet-free.
    pub fn with(mut self, v: &str, coeff: Expr) -> Self {
        let v = Var::new(v);
        assert!(
            v == *self.ctx.indep() || self.ctx.dependents().contains(&v),
            "coefficient target {} is not a base variable",
            v.name()
        );
        for d in self.ctx.dependents() {
            let jet1 = self.ctx.first_jet(d);
            let jet2 = self.ctx.second_jet(d);
            assert!(
                !coeff.mentions_var(&jet1) && !coeff.mentions_var(&jet2),
                "point-field coefficient may not contain jet variables"
            );
        }
        if coeff.is_zero() {
            self.coeffs.remove(&v);
        } else {
            self.coeffs.insert(v, coeff);
        }
        self
    }

    pub fn context(&self) -> &JetContext {
        &self.ctx
    }

    /// Coefficient of `∂_v` (zero when absent).
    pub fn coeff(&self, v: &Var) -> Expr {
        self.coeffs.get(v).cloned().unwrap_or_else(Expr::zero)
    }

    pub fn time_coeff(&self) -> Expr {
        self.coeff(&self.ctx.indep.clone())
    }

    /// Coefficient-wise linear combination `a·self + b·other`.
    pub fn linear_combination(&self, a: &Rat, other: &VectorField, b: &Rat) -> VectorField {
        assert_eq!(self.ctx, other.ctx, "context mismatch");
        let mut out = VectorField::new(&self.ctx);
        let mut keys: Vec<Var> = self.coeffs.keys().cloned().collect();
        for k in other.coeffs.keys() {
            if !keys.contains(k) {
                keys.push(k.clone());
            }
        }
        for k in keys {
            let c = self.coeff(&k).scale(a).add(&other.coeff(&k).scale(b));
            if !c.is_zero() {
                out.coeffs.insert(k, c);
            }
        }
        out
    }

    /// Prolong to the given jet order (1 or 2) by the recursion
    /// `ψ_u^(n+1) = D_t ψ_u^(n) − D_t(τ) · u^(n+1)`.
    pub fn prolong(&self, order: u8) -> ProlongedField {
        assert!(order == 1 || order == 2, "prolongation order must be 1 or 2");
        let ctx = &self.ctx;
        let tau = self.time_coeff();
        let dtau = ctx.total_derivative(&tau).expect("base coefficient is jet-free");
        let mut extended = BTreeMap::new();
        for d in ctx.dependents() {
            let first = ctx.first_jet(d);
            let udot = Expr::from_var(&first);
            let c1 = ctx
                .total_derivative(&self.coeff(d))
                .expect("base coefficient is jet-free")
                .sub(&dtau.mul(&udot));
            extended.insert(first.clone(), c1.clone());
            if order == 2 {
                let second = ctx.second_jet(d);
                let uddot = Expr::from_var(&second);
                let c2 = ctx
                    .total_derivative(&c1)
                    .expect("first-order coefficient stays below order 2")
                    .sub(&dtau.mul(&uddot));
                extended.insert(second, c2);
            }
        }
        ProlongedField { base: self.clone(), extended }
    }
}

/// A vector field lifted to the jet space: base coefficients plus extended
/// coefficients for the jet coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProlongedField {
    base: VectorField,
    extended: BTreeMap<Var, Expr>,
}

impl ProlongedField {
    pub fn base(&self) -> &VectorField {
        &self.base
    }

    /// Extended coefficient for a jet variable (zero when absent).
    pub fn jet_coeff(&self, v: &Var) -> Expr {
        self.extended.get(v).cloned().unwrap_or_else(Expr::zero)
    }

    /// Directional derivative `Σ coeff · ∂e/∂var` over base and jet
    /// coordinates; the result is normalized.
    pub fn apply(&self, e: &Expr) -> Expr {
        let ctx = self.base.context();
        let mut acc = self.base.time_coeff().mul(&e.differentiate(ctx.indep()));
        for d in ctx.dependents() {
            acc = acc.add(&self.base.coeff(d).mul(&e.differentiate(d)));
        }
        for (v, c) in &self.extended {
            acc = acc.add(&c.mul(&e.differentiate(v)));
        }
        acc
    }
}

/// Substitute the system's solved second derivatives into `e` (simultaneous).
pub fn on_shell(e: &Expr, solved: &BTreeMap<Var, Expr>) -> Expr {
    let mut b = Binding::new();
    for (v, rhs) in solved {
        b.set_var(v, rhs.clone());
    }
    e.substitute(&b)
}
