//! Variational symmetries, Noether characteristics, and conservation-law
//! verification in characteristic form.
//!
//! Fluxes are verified, not derived: a candidate `P` is accepted when the
//! identity `c · D_t(P) = Σ_u Q_u · E_u(L)` holds identically for some
//! (unique) constant `c`, which is recorded. That pins down the constant
//! factor conventions in the flux without guessing.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::expr::{Binding, EvalError, Expr, NumBinding, Rat, Var};
use crate::integrate::Trajectory;
use crate::jet::{JetContext, VectorField};
use crate::models::{lagrangian, LapseMode, Lagrangian, ModelConfig};
use crate::symmetry::proportionality_factor;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NoetherError {
    ContextMismatch,
    /// The Noether identity failed for every constant factor; carries the
    /// defect `D_t(P) − Σ Q_u E_u(L)`.
    NotConserved(Expr),
}

impl core::fmt::Display for NoetherError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            NoetherError::ContextMismatch => write!(f, "jet context mismatch"),
            NoetherError::NotConserved(d) => {
                write!(f, "flux is not conserved; defect: {}", d.render())
            }
        }
    }
}

/// Noether characteristics `Q_u = ψ_u − τ · udot` of a point field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Characteristic {
    ctx: JetContext,
    q: BTreeMap<Var, Expr>,
}

impl Characteristic {
    pub fn context(&self) -> &JetContext {
        &self.ctx
    }

    pub fn q(&self, dep: &Var) -> Expr {
        self.q.get(dep).cloned().unwrap_or_else(Expr::zero)
    }
}

/// Characteristics of `g`: `Q_u = ψ_u − τ · udot` per dependent.
pub fn characteristics(g: &VectorField) -> Characteristic {
    let ctx = g.context().clone();
    let tau = g.time_coeff();
    let mut q = BTreeMap::new();
    for d in ctx.dependents() {
        let udot = Expr::from_var(&ctx.first_jet(d));
        q.insert(d.clone(), g.coeff(d).sub(&tau.mul(&udot)));
    }
    Characteristic { ctx, q }
}

/// `pr1(g)(L) + L · D_t(τ)`; zero iff `g` is a (strict) variational
/// symmetry of `L`.
pub fn variational_residual(
    g: &VectorField,
    lag: &Lagrangian,
) -> Result<Expr, NoetherError> {
    if g.context() != lag.context() {
        return Err(NoetherError::ContextMismatch);
    }
    let ctx = g.context();
    let dtau = ctx
        .total_derivative(&g.time_coeff())
        .expect("point-field coefficient is jet-free");
    Ok(g.prolong(1).apply(lag.expr()).add(&lag.expr().mul(&dtau)))
}

/// A verified conservation law: `factor · D_t(flux) = Σ Q_u E_u(L)`
/// identically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConservationLaw {
    pub flux: Expr,
    pub characteristic: Characteristic,
    pub lagrangian: Lagrangian,
    /// The unique constant making the identity hold (1 when the flux obeys
    /// the plain characteristic form).
    pub factor: Expr,
}

/// Check the characteristic-form Noether identity for a candidate flux,
/// accepting (and recording) a constant factor convention.
pub fn verify_conservation_law(
    p: &Expr,
    g: &VectorField,
    lag: &Lagrangian,
) -> Result<ConservationLaw, NoetherError> {
    if g.context() != lag.context() {
        return Err(NoetherError::ContextMismatch);
    }
    let ctx = g.context();
    let ch = characteristics(g);
    let mut rhs = Expr::zero();
    for d in ctx.dependents() {
        rhs = rhs.add(&ch.q(d).mul(&lag.euler_lagrange(d)));
    }
    let dtp = ctx
        .total_derivative(p)
        .expect("flux must be first order in jets");
    let defect = dtp.sub(&rhs);
    if defect.is_zero() {
        return Ok(ConservationLaw {
            flux: p.clone(),
            characteristic: ch,
            lagrangian: lag.clone(),
            factor: Expr::one(),
        });
    }
    // look for the unique constant c with c · D_t(P) = rhs
    let mut vars: Vec<Var> = alloc::vec![ctx.indep().clone()];
    for d in ctx.dependents() {
        vars.push(d.clone());
        vars.push(ctx.first_jet(d));
        vars.push(ctx.second_jet(d));
    }
    if !dtp.is_zero() {
        if let Some(c) = proportionality_factor(&rhs, &dtp, &vars) {
            return Ok(ConservationLaw {
                flux: p.clone(),
                characteristic: ch,
                lagrangian: lag.clone(),
                factor: c,
            });
        }
    }
    Err(NoetherError::NotConserved(defect))
}

fn half() -> Rat {
    Rat::new(num_bigint::BigInt::from(1), num_bigint::BigInt::from(2))
}

/// The unit-lapse flux `P = (1/2) a (adot² + k − 2a²V − a²phidot²)`, i.e.
/// `(1/2) a (E + k)`.
pub fn time_translation_flux_p(cfg: &ModelConfig) -> Expr {
    let e = crate::models::energy_expr(cfg);
    Expr::var("a").mul(&e.add(&cfg.k_expr())).scale(&half())
}

/// The lapse-system flux
/// `K = (a / 2N)(adot² + N²k − 2N²a²V − a²phidot²)`.
pub fn lapse_flux_k(cfg: &ModelConfig) -> Expr {
    let a = Expr::var("a");
    let n = Expr::var("N");
    let adot = Expr::var("adot");
    let phidot = Expr::var("phidot");
    let v = cfg.potential.as_expr(&Var::new("phi"));
    let bracket = adot
        .pow_i(2)
        .add(&n.pow_i(2).mul(&cfg.k_expr()))
        .sub(&Expr::int(2).mul(&n.pow_i(2)).mul(&a.pow_i(2)).mul(&v))
        .sub(&a.pow_i(2).mul(&phidot.pow_i(2)));
    a.div(&n.scale(&Rat::from(num_bigint::BigInt::from(2)))).mul(&bracket)
}

/// Reparameterize the unit-lapse Lagrangian with `a` as the independent
/// variable, take the conjugate momentum `∂L/∂t_a`, map back to the
/// `t`-parameterization, and return the difference against the flux `P`.
/// Zero iff the two conserved quantities agree.
pub fn conjugate_momentum_check(cfg: &ModelConfig) -> Expr {
    assert_eq!(cfg.lapse_mode, LapseMode::Unit, "unit lapse required");
    let l = lagrangian(cfg);
    let ta = Expr::var("ta");
    let phia = Expr::var("phia");
    // L~(a, t_a, phi_a) = L(a, adot = 1/t_a, phidot = phi_a/t_a) · t_a
    let sub = Binding::new()
        .var("adot", Expr::one().div(&ta))
        .var("phidot", phia.div(&ta));
    let reparam = l.expr().substitute(&sub).mul(&ta);
    let momentum = reparam.differentiate(&Var::new("ta"));
    // back to t-parameterization: t_a = 1/adot, phi_a = phidot/adot
    let adot = Expr::var("adot");
    let back = Binding::new()
        .var("ta", Expr::one().div(&adot))
        .var("phia", Expr::var("phidot").div(&adot));
    momentum.substitute(&back).sub(&time_translation_flux_p(cfg))
}

/// Max drift of the law's flux along a trajectory; `env` supplies numeric
/// rules for any opaque functions and free parameters in the flux.
pub fn numeric_conservation(
    traj: &Trajectory,
    law: &ConservationLaw,
    env: &NumBinding,
) -> Result<f64, EvalError> {
    let ctx = law.characteristic.context();
    let mut first: Option<f64> = None;
    let mut drift = 0.0f64;
    for s in &traj.samples {
        let mut nb = env.clone();
        nb.set(ctx.indep(), s.t);
        for d in ctx.dependents() {
            let (v, dv) = s
                .values
                .get(d)
                .copied()
                .ok_or_else(|| EvalError::UnboundSymbol(String::from(d.name())))?;
            nb.set(d, v);
            nb.set(&ctx.first_jet(d), dv);
        }
        let p = law.flux.evaluate(&nb)?;
        match first {
            None => first = Some(p),
            Some(p0) => drift = drift.max((p - p0).abs()),
        }
    }
    Ok(drift)
}
