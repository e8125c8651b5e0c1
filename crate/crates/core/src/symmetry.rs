//! Lie point symmetry machinery: deciding whether a candidate generator is a
//! symmetry of a solved second-order system, deriving the determining
//! equations by coefficient collection, commutators, and classification of
//! the resulting algebra by its structure constants.
//!
//! Symmetry is decided on-shell: the second prolongation is applied to each
//! residual `uddot - f` and the solved second derivatives are substituted
//! back before asking for zero. Off-shell residuals are not reported.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::expr::{CollectError, Expr, Monomial, Rat, Var};
use crate::jet::{on_shell, JetContext, VectorField};
use crate::models::ODESystem;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SymmetryError {
    /// Generator and system (or two generators) live in different jet
    /// contexts.
    ContextMismatch,
    /// `classify` was handed a basis whose pairwise commutators leave its
    /// span; the offending pair is recorded.
    NotClosed(usize, usize),
    /// `classify` was handed a linearly dependent basis.
    NotLinearlyIndependent,
    /// A coefficient could not be written as a polynomial in the base
    /// variables, so no rational coordinates exist for it.
    NonPolynomialCoefficient,
}

impl core::fmt::Display for SymmetryError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SymmetryError::ContextMismatch => write!(f, "jet context mismatch"),
            SymmetryError::NotClosed(i, j) => {
                write!(f, "basis is not closed: [g{}, g{}] leaves the span", i, j)
            }
            SymmetryError::NotLinearlyIndependent => {
                write!(f, "basis is linearly dependent")
            }
            SymmetryError::NonPolynomialCoefficient => {
                write!(f, "coefficient is not polynomial in the base variables")
            }
        }
    }
}

/// The three-parameter general solution of the determining equations:
/// `G = (mu t + c2) ∂_t + c1 a ∂_a + mu ∂_phi`. Parameters are expressions
/// so the family can be kept symbolic or pinned to rationals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorFamily {
    pub c1: Expr,
    pub c2: Expr,
    pub mu: Expr,
}

impl GeneratorFamily {
    pub fn new(c1: Expr, c2: Expr, mu: Expr) -> Self {
        GeneratorFamily { c1, c2, mu }
    }

    /// Parameters left as the symbols `c1`, `c2`, `mu`.
    pub fn symbolic() -> Self {
        GeneratorFamily {
            c1: Expr::var("c1"),
            c2: Expr::var("c2"),
            mu: Expr::var("mu"),
        }
    }

    pub fn vector_field(&self, ctx: &JetContext) -> VectorField {
        let t = Expr::from_var(ctx.indep());
        VectorField::new(ctx)
            .with(ctx.indep().name(), self.mu.mul(&t).add(&self.c2))
            .with("a", self.c1.mul(&Expr::var("a")))
            .with("phi", self.mu.clone())
    }
}

/// `X = t ∂_t + ∂_phi` (mu = 1, c1 = c2 = 0).
pub fn gen_x(ctx: &JetContext) -> VectorField {
    VectorField::new(ctx)
        .with(ctx.indep().name(), Expr::from_var(ctx.indep()))
        .with("phi", Expr::one())
}

/// `Y = ∂_t`.
pub fn gen_y(ctx: &JetContext) -> VectorField {
    VectorField::new(ctx).with(ctx.indep().name(), Expr::one())
}

/// `Z = a ∂_a`.
pub fn gen_z(ctx: &JetContext) -> VectorField {
    VectorField::new(ctx).with("a", Expr::var("a"))
}

/// Outcome of an on-shell symmetry check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymmetryReport {
    /// One residual per equation, after substituting the solved second
    /// derivatives.
    pub residuals: Vec<Expr>,
    /// True iff every residual is identically zero.
    pub verdict: bool,
    /// Conditions under which the verdict holds (inherited from the system,
    /// e.g. `a > 0`, plus any potential specialization baked into it).
    pub side_conditions: Vec<String>,
}

/// Apply the second prolongation of `g` to every equation of `sys` in
/// residual form and substitute the system back in.
pub fn symmetry_residual(
    g: &VectorField,
    sys: &ODESystem,
) -> Result<SymmetryReport, SymmetryError> {
    if g.context() != sys.context() {
        return Err(SymmetryError::ContextMismatch);
    }
    let pr = g.prolong(2);
    let solved = sys.solved_map();
    let mut residuals = Vec::new();
    for i in 0..sys.equations().len() {
        let r = pr.apply(&sys.residual_expr(i));
        residuals.push(on_shell(&r, &solved));
    }
    let verdict = residuals.iter().all(Expr::is_zero);
    Ok(SymmetryReport {
        residuals,
        verdict,
        side_conditions: sys.side_conditions().to_vec(),
    })
}

/// Name of the unknown coefficient function attached to a base variable in
/// the determining-equation ansatz: `tau` for the independent variable,
/// otherwise the dependent's name with its first letter upper-cased
/// (`a -> A`, `phi -> Phi`).
fn ansatz_name(ctx: &JetContext, v: &Var) -> String {
    if v == ctx.indep() {
        return String::from("tau");
    }
    let mut chars = v.name().chars();
    let mut s = String::new();
    if let Some(c) = chars.next() {
        s.extend(c.to_uppercase());
    }
    s.extend(chars);
    if s == v.name() {
        // already capitalized (e.g. the lapse): avoid clashing with the
        // variable itself
        let mut prefixed = String::from("Xi");
        prefixed.push_str(&s);
        return prefixed;
    }
    s
}

/// The generator ansatz with every coefficient an opaque function of all
/// base variables.
pub fn ansatz_field(ctx: &JetContext) -> VectorField {
    let args: Vec<Expr> = core::iter::once(ctx.indep())
        .chain(ctx.dependents().iter())
        .map(Expr::from_var)
        .collect();
    let mut g = VectorField::new(ctx);
    for v in core::iter::once(ctx.indep()).chain(ctx.dependents().iter()) {
        g = g.with(v.name(), Expr::opaque(&ansatz_name(ctx, v), &args));
    }
    g
}

/// Determining equations of `sys`: per equation, the on-shell symmetry
/// condition for the opaque ansatz collected as a polynomial in the first
/// jets. Each coefficient set to zero is one determining PDE.
pub fn determining_equations(
    sys: &ODESystem,
) -> Result<Vec<BTreeMap<Monomial, Expr>>, CollectError> {
    let ctx = sys.context();
    let g = ansatz_field(ctx);
    let report = symmetry_residual(&g, sys).expect("ansatz shares the system context");
    let jets = ctx.first_jets();
    report
        .residuals
        .iter()
        .map(|r| r.collect(&jets))
        .collect()
}

/// First-order action of the base field on an expression (no prolongation).
fn act(g: &VectorField, e: &Expr) -> Expr {
    let ctx = g.context();
    let mut acc = g.time_coeff().mul(&e.differentiate(ctx.indep()));
    for d in ctx.dependents() {
        acc = acc.add(&g.coeff(d).mul(&e.differentiate(d)));
    }
    acc
}

/// Lie bracket `[g1, g2]`, coefficient-wise `g1(coeffs of g2) − g2(coeffs
/// of g1)`.
pub fn commutator(g1: &VectorField, g2: &VectorField) -> Result<VectorField, SymmetryError> {
    if g1.context() != g2.context() {
        return Err(SymmetryError::ContextMismatch);
    }
    let ctx = g1.context();
    let mut out = VectorField::new(ctx);
    for v in core::iter::once(ctx.indep()).chain(ctx.dependents().iter()) {
        let c = act(g1, &g2.coeff(v)).sub(&act(g2, &g1.coeff(v)));
        out = out.with(v.name(), c);
    }
    Ok(out)
}

/// Apply the first prolongation of `g` to a scalar of at most first jet
/// order.
pub fn lie_action_on_scalar(g: &VectorField, e: &Expr) -> Expr {
    let ctx = g.context();
    for d in ctx.dependents() {
        assert!(
            !e.mentions_var(&ctx.second_jet(d)),
            "scalar must be first order at most"
        );
    }
    g.prolong(1).apply(e)
}

/// If `e == factor * base` with `factor` free of all of `vars`, return the
/// factor.
pub fn proportionality_factor(e: &Expr, base: &Expr, vars: &[Var]) -> Option<Expr> {
    if base.is_zero() {
        return None;
    }
    let ratio = e.div(base);
    if vars.iter().any(|v| ratio.mentions_var(v)) {
        return None;
    }
    Some(ratio)
}

/// A basis with its structure constants `[g_i, g_j] = Σ_k c[i][j][k] g_k`
/// and the classification flags derived from them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlgebraStructure {
    pub basis: Vec<VectorField>,
    pub constants: Vec<Vec<Vec<Rat>>>,
    pub abelian: bool,
    pub solvable: bool,
    pub nilpotent: bool,
}

/// Rational coordinates of a field: one slot per (base variable, monomial)
/// pair. Fails when a coefficient has a nontrivial denominator.
fn coordinates(g: &VectorField) -> Result<BTreeMap<(usize, Monomial), Rat>, SymmetryError> {
    let ctx = g.context();
    let mut out = BTreeMap::new();
    for (slot, v) in core::iter::once(ctx.indep())
        .chain(ctx.dependents().iter())
        .enumerate()
    {
        let c = g.coeff(v);
        if !c.den().is_one() {
            return Err(SymmetryError::NonPolynomialCoefficient);
        }
        for (m, r) in &c.num().0 {
            out.insert((slot, m.clone()), r.clone());
        }
    }
    Ok(out)
}

/// Reduce `rows` to row echelon form in place; returns the rank.
fn row_reduce(rows: &mut Vec<Vec<Rat>>) -> usize {
    use num_traits::Zero;
    let ncols = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..ncols {
        let pivot = (rank..rows.len()).find(|&r| !rows[r][col].is_zero());
        let Some(pivot) = pivot else { continue };
        rows.swap(rank, pivot);
        let lead = rows[rank][col].clone();
        for x in rows[rank].iter_mut() {
            *x = &*x / &lead;
        }
        for r in 0..rows.len() {
            if r != rank && !rows[r][col].is_zero() {
                let f = rows[r][col].clone();
                for c in 0..ncols {
                    let d = &rows[rank][c] * &f;
                    rows[r][c] = &rows[r][c] - &d;
                }
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

/// Solve `Σ_k x_k basis[k] = target` exactly; `None` when inconsistent.
fn solve_in_span(
    basis: &[Vec<Rat>],
    target: &[Rat],
) -> Option<Vec<Rat>> {
    use num_traits::Zero;
    let n = basis.len();
    let m = target.len();
    // augmented system over the unknowns x: rows indexed by coordinate slot
    let mut rows: Vec<Vec<Rat>> = (0..m)
        .map(|i| {
            let mut row: Vec<Rat> = basis.iter().map(|b| b[i].clone()).collect();
            row.push(target[i].clone());
            row
        })
        .collect();
    let mut pivots: Vec<Option<usize>> = alloc::vec![None; n];
    let mut rank = 0;
    for col in 0..n {
        let pivot = (rank..rows.len()).find(|&r| !rows[r][col].is_zero());
        let Some(pivot) = pivot else { continue };
        rows.swap(rank, pivot);
        let lead = rows[rank][col].clone();
        for x in rows[rank].iter_mut() {
            *x = &*x / &lead;
        }
        for r in 0..rows.len() {
            if r != rank && !rows[r][col].is_zero() {
                let f = rows[r][col].clone();
                for c in 0..=n {
                    let d = &rows[rank][c] * &f;
                    rows[r][c] = &rows[r][c] - &d;
                }
            }
        }
        pivots[col] = Some(rank);
        rank += 1;
    }
    // consistency: no row 0 = nonzero
    for r in rank..rows.len() {
        if !rows[r][n].is_zero() {
            return None;
        }
    }
    let mut x = alloc::vec![Rat::zero(); n];
    for (col, p) in pivots.iter().enumerate() {
        if let Some(r) = p {
            x[col] = rows[*r][n].clone();
        }
    }
    Some(x)
}

/// Bracket of two abstract elements (coefficient vectors in the basis)
/// through the structure constants.
fn abstract_bracket(u: &[Rat], v: &[Rat], c: &[Vec<Vec<Rat>>]) -> Vec<Rat> {
    use num_traits::Zero;
    let n = u.len();
    let mut out = alloc::vec![Rat::zero(); n];
    for i in 0..n {
        if u[i].is_zero() {
            continue;
        }
        for j in 0..n {
            if v[j].is_zero() {
                continue;
            }
            for (k, out_k) in out.iter_mut().enumerate() {
                let t = &(&u[i] * &v[j]) * &c[i][j][k];
                *out_k = &*out_k + &t;
            }
        }
    }
    out
}

/// Row-space basis of all brackets `[u, w]`, `u ∈ us`, `w ∈ ws`.
fn bracket_span(us: &[Vec<Rat>], ws: &[Vec<Rat>], c: &[Vec<Vec<Rat>>]) -> Vec<Vec<Rat>> {
    let mut rows: Vec<Vec<Rat>> = Vec::new();
    for u in us {
        for w in ws {
            rows.push(abstract_bracket(u, w, c));
        }
    }
    if rows.is_empty() {
        return rows;
    }
    let rank = row_reduce(&mut rows);
    rows.truncate(rank);
    rows
}

/// Extract structure constants and classification flags for a basis.
pub fn classify(basis: &[VectorField]) -> Result<AlgebraStructure, SymmetryError> {
    use num_traits::Zero;
    let n = basis.len();
    assert!(n > 0, "empty basis");
    for g in basis {
        if g.context() != basis[0].context() {
            return Err(SymmetryError::ContextMismatch);
        }
    }
    // shared coordinate slots across the whole basis and all brackets
    let coords: Vec<_> = basis.iter().map(coordinates).collect::<Result<_, _>>()?;
    let mut brackets = Vec::new();
    for i in 0..n {
        for j in 0..n {
            brackets.push(((i, j), coordinates(&commutator(&basis[i], &basis[j])?)?));
        }
    }
    let mut keys: Vec<(usize, Monomial)> = Vec::new();
    for c in coords.iter().chain(brackets.iter().map(|(_, c)| c)) {
        for k in c.keys() {
            if !keys.contains(k) {
                keys.push(k.clone());
            }
        }
    }
    keys.sort();
    let densify = |c: &BTreeMap<(usize, Monomial), Rat>| -> Vec<Rat> {
        keys.iter()
            .map(|k| c.get(k).cloned().unwrap_or_else(Rat::zero))
            .collect()
    };
    let rows: Vec<Vec<Rat>> = coords.iter().map(&densify).collect();
    {
        let mut probe = rows.clone();
        if row_reduce(&mut probe) < n {
            return Err(SymmetryError::NotLinearlyIndependent);
        }
    }
    let mut constants = alloc::vec![alloc::vec![alloc::vec![Rat::zero(); n]; n]; n];
    for ((i, j), b) in &brackets {
        let target = densify(b);
        let x = solve_in_span(&rows, &target).ok_or(SymmetryError::NotClosed(*i, *j))?;
        constants[*i][*j] = x;
    }
    let abelian = constants
        .iter()
        .flatten()
        .flatten()
        .all(|r| r.is_zero());
    // derived series: g ⊇ [g,g] ⊇ [[g,g],[g,g]] ⊇ ...
    let full: Vec<Vec<Rat>> = (0..n)
        .map(|i| {
            let mut e = alloc::vec![Rat::zero(); n];
            e[i] = Rat::from(num_bigint::BigInt::from(1));
            e
        })
        .collect();
    let mut solvable = false;
    let mut layer = full.clone();
    for _ in 0..=n {
        if layer.is_empty() {
            solvable = true;
            break;
        }
        let next = bracket_span(&layer, &layer, &constants);
        if next.len() == layer.len() {
            break;
        }
        layer = next;
    }
    if layer.is_empty() {
        solvable = true;
    }
    // lower central series: g ⊇ [g,g] ⊇ [g,[g,g]] ⊇ ...
    let mut nilpotent = false;
    let mut layer = full.clone();
    for _ in 0..=n {
        if layer.is_empty() {
            nilpotent = true;
            break;
        }
        let next = bracket_span(&full, &layer, &constants);
        if next.len() == layer.len() {
            break;
        }
        layer = next;
    }
    if layer.is_empty() {
        nilpotent = true;
    }
    Ok(AlgebraStructure {
        basis: basis.to_vec(),
        constants,
        abelian,
        solvable,
        nilpotent,
    })
}
