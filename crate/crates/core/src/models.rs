//! Concrete cosmological systems: scale factor `a`, scalar field `phi`, an
//! optional dynamical lapse `N`, their equations of motion in solved form,
//! and the associated first-order Lagrangians.
//!
//! All systems record the side condition `a > 0`; divisions by `a` (and by
//! `N` in the lapse case) rely on it.

use alloc::string::String;
use alloc::vec::Vec;

use crate::expr::{Expr, Rat, Var};
use crate::jet::JetContext;

/// Self-interacting scalar potential.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Potential {
    /// An arbitrary function, kept as the opaque node `V(phi)`.
    Opaque,
    /// `c · exp(lambda · phi)`. `Exponential(c, -2)` is the distinguished
    /// branch that enlarges the symmetry group.
    Exponential { c: Rat, lambda: Rat },
    /// Constant `V0`.
    Constant(Rat),
    /// `Σ coeffs[i] · phi^i`.
    Polynomial(Vec<Rat>),
}

impl Potential {
    pub fn exponential_i(c: i64, lambda: i64) -> Self {
        Potential::Exponential {
            c: Rat::from(num_bigint::BigInt::from(c)),
            lambda: Rat::from(num_bigint::BigInt::from(lambda)),
        }
    }

    pub fn constant_f(v: Rat) -> Self {
        Potential::Constant(v)
    }

    /// The potential as an expression in the given field variable.
    pub fn as_expr(&self, phi: &Var) -> Expr {
        let phi_e = Expr::from_var(phi);
        match self {
            Potential::Opaque => Expr::opaque("V", &[phi_e]),
            Potential::Exponential { c, lambda } => {
                phi_e.scale(lambda).exp().scale(c)
            }
            Potential::Constant(v0) => Expr::rational(v0.clone()),
            Potential::Polynomial(coeffs) => {
                let mut acc = Expr::zero();
                for (i, c) in coeffs.iter().enumerate() {
                    acc = acc.add(&phi_e.pow_i(i as i32).scale(c));
                }
                acc
            }
        }
    }

    /// `dV/dphi` in the given field variable.
    pub fn derivative(&self, phi: &Var) -> Expr {
        self.as_expr(phi).differentiate(phi)
    }

    pub fn is_opaque(&self) -> bool {
        matches!(self, Potential::Opaque)
    }

    /// True for the `c·e^{-2 phi}` branch of the symmetry classification.
    pub fn is_distinguished_exponential(&self) -> bool {
        matches!(self, Potential::Exponential { lambda, .. }
            if *lambda == -Rat::from(num_bigint::BigInt::from(2)))
    }
}

/// Whether the lapse is gauge-fixed to 1 or kept as a dynamical variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LapseMode {
    Unit,
    Dynamical,
}

/// Curvature sign, potential, and lapse mode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub k: i8,
    pub potential: Potential,
    pub lapse_mode: LapseMode,
}

impl ModelConfig {
    pub fn new(k: i8, potential: Potential, lapse_mode: LapseMode) -> Self {
        assert!(matches!(k, -1 | 0 | 1), "curvature must be -1, 0 or +1");
        ModelConfig { k, potential, lapse_mode }
    }

    pub fn k_expr(&self) -> Expr {
        Expr::int(self.k as i64)
    }
}

/// A system of second-order equations in solved form `uddot = f(t, u, udot)`
/// over a jet context, plus optional first-order constraints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ODESystem {
    ctx: JetContext,
    /// `(dependent, rhs)`: the equation `ctx.second_jet(dependent) = rhs`.
    equations: Vec<(Var, Expr)>,
    /// First-order expressions required to vanish on solutions.
    constraints: Vec<Expr>,
    /// Human-readable side conditions under which the solved forms hold.
    side_conditions: Vec<String>,
}

impl ODESystem {
    pub fn new(
        ctx: JetContext,
        equations: Vec<(Var, Expr)>,
        constraints: Vec<Expr>,
        side_conditions: Vec<String>,
    ) -> Self {
        for (dep, rhs) in &equations {
            assert!(ctx.dependents().contains(dep), "unknown dependent {}", dep.name());
            for d in ctx.dependents() {
                assert!(
                    !rhs.mentions_var(&ctx.second_jet(d)),
                    "solved form for {} contains a second derivative",
                    dep.name()
                );
            }
        }
        for c in &constraints {
            for d in ctx.dependents() {
                assert!(
                    !c.mentions_var(&ctx.second_jet(d)),
                    "constraint contains a second derivative"
                );
            }
        }
        ODESystem { ctx, equations, constraints, side_conditions }
    }

    pub fn context(&self) -> &JetContext {
        &self.ctx
    }

    pub fn equations(&self) -> &[(Var, Expr)] {
        &self.equations
    }

    pub fn constraints(&self) -> &[Expr] {
        &self.constraints
    }

    pub fn side_conditions(&self) -> &[String] {
        &self.side_conditions
    }

    /// The residual form `uddot - f` of one equation.
    pub fn residual_expr(&self, idx: usize) -> Expr {
        let (dep, rhs) = &self.equations[idx];
        Expr::from_var(&self.ctx.second_jet(dep)).sub(rhs)
    }

    /// Map `uddot -> f` for on-shell substitution.
    pub fn solved_map(&self) -> alloc::collections::BTreeMap<Var, Expr> {
        self.equations
            .iter()
            .map(|(dep, rhs)| (self.ctx.second_jet(dep), rhs.clone()))
            .collect()
    }
}

/// A first-order Lagrangian over a jet context.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lagrangian {
    ctx: JetContext,
    l: Expr,
}

impl Lagrangian {
    pub fn new(ctx: JetContext, l: Expr) -> Self {
        for d in ctx.dependents() {
            assert!(
                !l.mentions_var(&ctx.second_jet(d)),
                "Lagrangian must be first order"
            );
        }
        Lagrangian { ctx, l }
    }

    pub fn context(&self) -> &JetContext {
        &self.ctx
    }

    pub fn expr(&self) -> &Expr {
        &self.l
    }

    /// Euler-Lagrange expression `E_u(L) = ∂L/∂u − D_t(∂L/∂udot)`,
    /// unscaled (second order in jets).
    pub fn euler_lagrange(&self, u: &Var) -> Expr {
        assert!(self.ctx.dependents().contains(u), "{} is not a dependent", u.name());
        let udot = self.ctx.first_jet(u);
        let dl_du = self.l.differentiate(u);
        let dl_dudot = self.l.differentiate(&udot);
        dl_du.sub(&self.ctx.total_derivative(&dl_dudot).expect("first-order Lagrangian"))
    }
}

fn half() -> Rat {
    Rat::new(num_bigint::BigInt::from(1), num_bigint::BigInt::from(2))
}

/// The conserved combination `E = adot^2 - 2 a^2 V - a^2 phidot^2`.
pub fn energy_expr(cfg: &ModelConfig) -> Expr {
    let a = Expr::var("a");
    let adot = Expr::var("adot");
    let phidot = Expr::var("phidot");
    let v = cfg.potential.as_expr(&Var::new("phi"));
    adot.pow_i(2)
        .sub(&a.pow_i(2).mul(&v).scale(&Rat::from(num_bigint::BigInt::from(2))))
        .sub(&a.pow_i(2).mul(&phidot.pow_i(2)))
}

/// Conformal-time form: `addot = 2aV - 2a phidot^2`,
/// `phiddot = -3 (adot/a) phidot - dV/dphi`, with the Einstein constraint
/// `E + k = 0` attached.
pub fn frw_system(cfg: &ModelConfig) -> ODESystem {
    assert_eq!(cfg.lapse_mode, LapseMode::Unit, "unit lapse required");
    let ctx = JetContext::new("t", &["a", "phi"]);
    let (a, phi) = (Var::new("a"), Var::new("phi"));
    let (a_e, phi_e) = (Expr::from_var(&a), Expr::from_var(&phi));
    let adot = Expr::var("adot");
    let phidot = Expr::var("phidot");
    let v = cfg.potential.as_expr(&phi);
    let vprime = cfg.potential.derivative(&phi);
    let _ = phi_e;
    let addot_rhs = Expr::int(2)
        .mul(&a_e)
        .mul(&v)
        .sub(&Expr::int(2).mul(&a_e).mul(&phidot.pow_i(2)));
    let phiddot_rhs = Expr::int(-3)
        .mul(&adot)
        .mul(&phidot)
        .div(&a_e)
        .sub(&vprime);
    let constraint = energy_expr(cfg).add(&cfg.k_expr());
    ODESystem::new(
        ctx,
        alloc::vec![(a, addot_rhs), (phi, phiddot_rhs)],
        alloc::vec![constraint],
        alloc::vec![String::from("a > 0")],
    )
}

/// Proper-time form from the reduced action: the `a` equation is kept in its
/// variational form (solved for `addot`) and no constraint is attached.
pub fn frw_proper_time_system(cfg: &ModelConfig) -> ODESystem {
    assert_eq!(cfg.lapse_mode, LapseMode::Unit, "unit lapse required");
    let ctx = JetContext::new("t", &["a", "phi"]);
    let (a, phi) = (Var::new("a"), Var::new("phi"));
    let a_e = Expr::from_var(&a);
    let adot = Expr::var("adot");
    let phidot = Expr::var("phidot");
    let v = cfg.potential.as_expr(&phi);
    let vprime = cfg.potential.derivative(&phi);
    // addot = (-adot^2 - k - 3 a^2 phidot^2 + 6 a^2 V) / (2a)
    let addot_rhs = adot
        .pow_i(2)
        .neg()
        .sub(&cfg.k_expr())
        .sub(&Expr::int(3).mul(&a_e.pow_i(2)).mul(&phidot.pow_i(2)))
        .add(&Expr::int(6).mul(&a_e.pow_i(2)).mul(&v))
        .div(&Expr::int(2).mul(&a_e));
    let phiddot_rhs = Expr::int(-3).mul(&adot).mul(&phidot).div(&a_e).sub(&vprime);
    ODESystem::new(
        ctx,
        alloc::vec![(a, addot_rhs), (phi, phiddot_rhs)],
        alloc::vec![],
        alloc::vec![String::from("a > 0")],
    )
}

/// Affine-time form with a dynamical lapse `N(t)`: two solved second-order
/// equations for `phi` and `a` plus the first-order constraint; `N` itself
/// carries no equation (it is gauge).
pub fn frw_lapse_system(cfg: &ModelConfig) -> ODESystem {
    assert_eq!(cfg.lapse_mode, LapseMode::Dynamical, "dynamical lapse required");
    let ctx = JetContext::new("t", &["a", "phi", "N"]);
    let (a, phi, n) = (Var::new("a"), Var::new("phi"), Var::new("N"));
    let a_e = Expr::from_var(&a);
    let n_e = Expr::from_var(&n);
    let adot = Expr::var("adot");
    let phidot = Expr::var("phidot");
    let ndot = Expr::var("Ndot");
    let v = cfg.potential.as_expr(&phi);
    let vprime = cfg.potential.derivative(&phi);
    // phiddot = (-3 N adot phidot + a Ndot phidot - N^3 a V') / (a N)
    let phiddot_rhs = Expr::int(-3)
        .mul(&n_e)
        .mul(&adot)
        .mul(&phidot)
        .add(&a_e.mul(&ndot).mul(&phidot))
        .sub(&n_e.pow_i(3).mul(&a_e).mul(&vprime))
        .div(&a_e.mul(&n_e));
    // addot = (Ndot adot + 2 N^3 a V - 2 N a phidot^2) / N
    let addot_rhs = ndot
        .mul(&adot)
        .add(&Expr::int(2).mul(&n_e.pow_i(3)).mul(&a_e).mul(&v))
        .sub(&Expr::int(2).mul(&n_e).mul(&a_e).mul(&phidot.pow_i(2)))
        .div(&n_e);
    // adot^2 + N^2 k - a^2 phidot^2 - 2 N^2 a^2 V = 0
    let constraint = adot
        .pow_i(2)
        .add(&n_e.pow_i(2).mul(&cfg.k_expr()))
        .sub(&a_e.pow_i(2).mul(&phidot.pow_i(2)))
        .sub(&Expr::int(2).mul(&n_e.pow_i(2)).mul(&a_e.pow_i(2)).mul(&v));
    ODESystem::new(
        ctx,
        alloc::vec![(a, addot_rhs), (phi, phiddot_rhs)],
        alloc::vec![constraint],
        alloc::vec![String::from("a > 0"), String::from("N != 0")],
    )
}

/// The first-order Lagrangian matching the configured lapse mode.
pub fn lagrangian(cfg: &ModelConfig) -> Lagrangian {
    let (a, phi) = (Var::new("a"), Var::new("phi"));
    let a_e = Expr::from_var(&a);
    let adot = Expr::var("adot");
    let phidot = Expr::var("phidot");
    let v = cfg.potential.as_expr(&phi);
    let k = cfg.k_expr();
    match cfg.lapse_mode {
        LapseMode::Unit => {
            // L = -1/2 a adot^2 + 1/2 k a + 1/2 a^3 phidot^2 - a^3 V
            let l = a_e
                .mul(&adot.pow_i(2))
                .scale(&-half())
                .add(&k.mul(&a_e).scale(&half()))
                .add(&a_e.pow_i(3).mul(&phidot.pow_i(2)).scale(&half()))
                .sub(&a_e.pow_i(3).mul(&v));
            Lagrangian::new(JetContext::new("t", &["a", "phi"]), l)
        }
        LapseMode::Dynamical => {
            let n_e = Expr::var("N");
            // L = -1/2 (a/N) adot^2 + 1/2 k N a + 1/2 a^3 phidot^2 / N - N a^3 V
            let l = a_e
                .div(&n_e)
                .mul(&adot.pow_i(2))
                .scale(&-half())
                .add(&k.mul(&n_e).mul(&a_e).scale(&half()))
                .add(&a_e.pow_i(3).mul(&phidot.pow_i(2)).div(&n_e).scale(&half()))
                .sub(&n_e.mul(&a_e.pow_i(3)).mul(&v));
            Lagrangian::new(JetContext::new("t", &["a", "phi", "N"]), l)
        }
    }
}
