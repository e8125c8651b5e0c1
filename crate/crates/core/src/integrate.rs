//! Adaptive numerical integration of the solved second-order systems, with
//! conserved-quantity monitoring.
//!
//! Equations are compiled from their symbolic form to a flat numeric
//! representation once per run; opaque functions must be eliminated through
//! the supplied numeric environment before compilation. The stepper is the
//! Dormand-Prince embedded 5(4) pair with standard PI-free step control.

#[cfg(not(test))]
#[allow(unused_imports)]
use num_traits::Float;

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::expr::{Atom, Expr, NumBinding, Var};
use crate::models::{ModelConfig, ODESystem};

#[derive(Clone, Debug, PartialEq)]
pub enum IntegrateError {
    /// The constraint radicand went negative; carries its value.
    ConstraintInfeasible(f64),
    /// The step size underflowed before a single step was accepted.
    StepUnderflow { t: f64 },
    /// Right-hand side produced a non-finite value at the initial state.
    NonFiniteDerivative { t: f64 },
    /// A monitor (or equation) references a symbol with no numeric binding.
    MonitorUnbound(String),
    /// `monitor_drift` was asked about a monitor that was never attached.
    UnknownMonitor(String),
}

impl core::fmt::Display for IntegrateError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            IntegrateError::ConstraintInfeasible(r) => {
                write!(f, "constraint radicand is negative ({})", r)
            }
            IntegrateError::StepUnderflow { t } => write!(f, "step underflow at t = {}", t),
            IntegrateError::NonFiniteDerivative { t } => {
                write!(f, "non-finite derivative at t = {}", t)
            }
            IntegrateError::MonitorUnbound(s) => write!(f, "unbound symbol: {}", s),
            IntegrateError::UnknownMonitor(s) => write!(f, "unknown monitor: {}", s),
        }
    }
}

/// Instantaneous state: time plus `(value, first derivative)` per dependent.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub t: f64,
    pub values: BTreeMap<Var, (f64, f64)>,
}

impl State {
    pub fn new(t: f64) -> Self {
        State { t, values: BTreeMap::new() }
    }

    pub fn with(mut self, dep: &str, value: f64, deriv: f64) -> Self {
        self.values.insert(Var::new(dep), (value, deriv));
        self
    }

    pub fn get(&self, dep: &str) -> Option<(f64, f64)> {
        self.values.get(&Var::new(dep)).copied()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.values.values().all(|(v, d)| v.is_finite() && d.is_finite())
    }
}

/// Why an integration stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// Reached `t_end`.
    Complete,
    /// Scale factor fell below `1e-8` of its initial value.
    SingularApproach,
    /// Step size underflowed after at least one accepted step; the
    /// trajectory up to that point is reported.
    StepUnderflow,
}

/// A named conserved-quantity expression evaluated along the trajectory.
#[derive(Clone, Debug)]
pub struct Monitor {
    pub name: String,
    pub expr: Expr,
}

impl Monitor {
    pub fn new(name: &str, expr: Expr) -> Self {
        Monitor { name: name.to_owned(), expr }
    }
}

/// Integration output: samples with strictly increasing times, aligned
/// monitor series, and stepper statistics.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<State>,
    pub monitors: Vec<(String, Vec<f64>)>,
    pub steps: usize,
    pub rejections: usize,
    pub termination: Termination,
}

impl Trajectory {
    pub fn monitor_series(&self, name: &str) -> Option<&[f64]> {
        self.monitors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s.as_slice())
    }
}

/// Max absolute deviation of a monitor from its initial value.
pub fn monitor_drift(traj: &Trajectory, name: &str) -> Result<f64, IntegrateError> {
    let series = traj
        .monitor_series(name)
        .ok_or_else(|| IntegrateError::UnknownMonitor(name.to_owned()))?;
    let first = series.first().copied().unwrap_or(0.0);
    Ok(series
        .iter()
        .map(|v| (v - first).abs())
        .fold(0.0, f64::max))
}

/// Solver options; tolerances default to `rtol = 1e-10`, `atol = 1e-12`.
#[derive(Clone, Debug)]
pub struct IvpOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// When nonempty, record samples exactly at these times (the stepper
    /// lands on them); otherwise every accepted step is recorded.
    pub output_times: Vec<f64>,
}

impl Default for IvpOptions {
    fn default() -> Self {
        IvpOptions {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 10_000_000,
            output_times: Vec::new(),
        }
    }
}

// --- compiled numeric form -------------------------------------------------

enum CAtom {
    Slot(usize),
    Exp(CExpr),
    Ln(CExpr),
}

struct CTerm {
    coeff: f64,
    factors: Vec<(CAtom, i32)>,
}

struct CPoly(Vec<CTerm>);

impl CPoly {
    fn eval(&self, slots: &[f64]) -> f64 {
        let mut acc = 0.0;
        for t in &self.0 {
            let mut v = t.coeff;
            for (a, p) in &t.factors {
                let base = match a {
                    CAtom::Slot(i) => slots[*i],
                    CAtom::Exp(e) => e.eval(slots).exp(),
                    CAtom::Ln(e) => e.eval(slots).ln(),
                };
                v *= base.powi(*p);
            }
            acc += v;
        }
        acc
    }
}

struct CExpr {
    num: CPoly,
    den: Option<CPoly>,
}

impl CExpr {
    fn eval(&self, slots: &[f64]) -> f64 {
        let n = self.num.eval(slots);
        match &self.den {
            None => n,
            Some(d) => n / d.eval(slots),
        }
    }
}

struct Slots {
    index: BTreeMap<Var, usize>,
}

fn compile(e: &Expr, slots: &Slots) -> Result<CExpr, IntegrateError> {
    let num = compile_poly(e.num(), slots)?;
    let den = if e.den().is_one() {
        None
    } else {
        Some(compile_poly(e.den(), slots)?)
    };
    Ok(CExpr { num, den })
}

fn compile_poly(
    p: &crate::expr::Poly,
    slots: &Slots,
) -> Result<CPoly, IntegrateError> {
    let mut terms = Vec::new();
    for (m, c) in &p.0 {
        let mut factors = Vec::new();
        let coeff = crate::expr::rat_to_f64(c);
        for (a, &k) in &m.0 {
            match a {
                Atom::Var(v) => match slots.index.get(v) {
                    Some(&i) => factors.push((CAtom::Slot(i), k as i32)),
                    None => {
                        return Err(IntegrateError::MonitorUnbound(v.name().to_owned()))
                    }
                },
                Atom::Exp(u) => {
                    let inner = compile(u, slots)?;
                    if k == 1 {
                        factors.push((CAtom::Exp(inner), 1));
                    } else {
                        factors.push((CAtom::Exp(inner), k as i32));
                    }
                }
                Atom::Ln(u) => factors.push((CAtom::Ln(compile(u, slots)?), k as i32)),
                Atom::Opaque(call) => {
                    return Err(IntegrateError::MonitorUnbound(call.name.clone()))
                }
            }
        }
        terms.push(CTerm { coeff, factors });
    }
    Ok(CPoly(terms))
}

// --- constrained initial data ---------------------------------------------

/// Solve the Einstein constraint for the initial expansion rate:
/// `adot0 = branch · sqrt(2 a0² V(phi0) + a0² phidot0² − k)`.
pub fn constrained_initial_state(
    a0: f64,
    phi0: f64,
    phidot0: f64,
    cfg: &ModelConfig,
    branch: i8,
) -> Result<State, IntegrateError> {
    assert!(a0 > 0.0, "scale factor must be positive");
    assert!(!cfg.potential.is_opaque(), "potential must be numeric");
    let v = cfg
        .potential
        .as_expr(&Var::new("phi"))
        .evaluate(&NumBinding::new().var("phi", phi0))
        .map_err(|e| IntegrateError::MonitorUnbound(alloc::format!("{}", e)))?;
    let radicand = 2.0 * a0 * a0 * v + a0 * a0 * phidot0 * phidot0 - cfg.k as f64;
    if radicand < 0.0 {
        return Err(IntegrateError::ConstraintInfeasible(radicand));
    }
    let adot0 = branch.signum() as f64 * radicand.sqrt();
    Ok(State::new(0.0)
        .with("a", a0, adot0)
        .with("phi", phi0, phidot0))
}

// --- the stepper -----------------------------------------------------------

// Dormand-Prince 5(4) tableau.
pub(crate) const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
pub(crate) const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
pub(crate) const E5_4: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct CompiledSystem {
    deps: Vec<Var>,
    t_slot: usize,
    /// slot index of each dependent and of its first jet
    dep_slots: Vec<usize>,
    jet_slots: Vec<usize>,
    /// compiled rhs per dependent; `None` means no equation (the first
    /// derivative is held constant)
    rhs: Vec<Option<CExpr>>,
    monitors: Vec<(String, CExpr)>,
    fixed: Vec<(usize, f64)>,
    nslots: usize,
}

impl CompiledSystem {
    fn scratch(&self) -> Vec<f64> {
        let mut s = alloc::vec![0.0; self.nslots];
        for (i, v) in &self.fixed {
            s[*i] = *v;
        }
        s
    }

    fn load(&self, slots: &mut [f64], t: f64, y: &[f64]) {
        let n = self.deps.len();
        slots[self.t_slot] = t;
        for i in 0..n {
            slots[self.dep_slots[i]] = y[i];
            slots[self.jet_slots[i]] = y[n + i];
        }
    }

    fn derivative(&self, slots: &mut [f64], t: f64, y: &[f64], dy: &mut [f64]) {
        self.load(slots, t, y);
        let n = self.deps.len();
        for i in 0..n {
            dy[i] = y[n + i];
            dy[n + i] = match &self.rhs[i] {
                Some(c) => c.eval(slots),
                None => 0.0,
            };
        }
    }
}

fn compile_system(
    sys: &ODESystem,
    monitors: &[Monitor],
    env: &NumBinding,
) -> Result<CompiledSystem, IntegrateError> {
    let ctx = sys.context();
    let fb = env.func_binding();
    let deps: Vec<Var> = ctx.dependents().to_vec();
    let mut index = BTreeMap::new();
    let mut next = 0usize;
    let mut slot_of = |v: Var, index: &mut BTreeMap<Var, usize>| -> usize {
        *index.entry(v).or_insert_with(|| {
            let i = next;
            next += 1;
            i
        })
    };
    let t_slot = slot_of(ctx.indep().clone(), &mut index);
    let dep_slots: Vec<usize> = deps
        .iter()
        .map(|d| slot_of(d.clone(), &mut index))
        .collect();
    let jet_slots: Vec<usize> = deps
        .iter()
        .map(|d| slot_of(ctx.first_jet(d), &mut index))
        .collect();
    let mut fixed = Vec::new();
    for (v, value) in env.var_values() {
        let i = slot_of(v.clone(), &mut index);
        fixed.push((i, *value));
    }
    let nslots = next;
    let slots = Slots { index };
    let mut rhs = Vec::new();
    for d in &deps {
        let eq = sys.equations().iter().find(|(u, _)| u == d);
        rhs.push(match eq {
            Some((_, e)) => Some(compile(&e.substitute(&fb), &slots)?),
            None => None,
        });
    }
    let mut cmons = Vec::new();
    for m in monitors {
        cmons.push((m.name.clone(), compile(&m.expr.substitute(&fb), &slots)?));
    }
    Ok(CompiledSystem {
        deps,
        t_slot,
        dep_slots,
        jet_slots,
        rhs,
        monitors: cmons,
        fixed,
        nslots,
    })
}

/// Integrate `sys` from `s0` to `t_end` with DOPRI5. `env` supplies numeric
/// rules for opaque functions and values for free parameters.
pub fn solve_ivp(
    sys: &ODESystem,
    s0: &State,
    t_end: f64,
    opts: &IvpOptions,
    monitors: &[Monitor],
    env: &NumBinding,
) -> Result<Trajectory, IntegrateError> {
    assert!(opts.rtol > 0.0 && opts.atol > 0.0, "tolerances must be positive");
    assert!(s0.is_finite(), "initial state must be finite");
    let cs = compile_system(sys, monitors, env)?;
    let n = cs.deps.len();
    let dim = 2 * n;
    let mut slots = cs.scratch();

    let mut t = s0.t;
    let mut y = alloc::vec![0.0; dim];
    for (i, d) in cs.deps.iter().enumerate() {
        let (v, dv) = s0
            .values
            .get(d)
            .copied()
            .unwrap_or_else(|| panic!("initial state missing {}", d.name()));
        y[i] = v;
        y[n + i] = dv;
    }

    let a_index = cs.deps.iter().position(|d| d.name() == "a");
    let a_start = a_index.map(|i| y[i]).unwrap_or(1.0);
    let a_floor = a_index.map(|i| 1e-8 * y[i].abs());

    let mut k = alloc::vec![alloc::vec![0.0; dim]; 7];
    let mut ytmp = alloc::vec![0.0; dim];
    let mut ynew = alloc::vec![0.0; dim];

    cs.derivative(&mut slots, t, &y, &mut k[0]);
    if k[0].iter().any(|v| !v.is_finite()) {
        return Err(IntegrateError::NonFiniteDerivative { t });
    }

    let span = t_end - s0.t;
    let dir = if span >= 0.0 { 1.0 } else { -1.0 };
    let mut h = dir * (span.abs() * 1e-4).min(1e-2).max(1e-10);

    let mut samples: Vec<State> = Vec::new();
    let mut mon_series: Vec<(String, Vec<f64>)> = cs
        .monitors
        .iter()
        .map(|(name, _)| (name.clone(), Vec::new()))
        .collect();

    let grid = &opts.output_times;
    let mut next_out = 0usize;

    let record = |t: f64,
                      y: &[f64],
                      slots: &mut [f64],
                      samples: &mut Vec<State>,
                      mon: &mut Vec<(String, Vec<f64>)>| {
        let mut st = State::new(t);
        for (i, d) in cs.deps.iter().enumerate() {
            st.values.insert(d.clone(), (y[i], y[n + i]));
        }
        cs.load(slots, t, y);
        for (j, (_, c)) in cs.monitors.iter().enumerate() {
            mon[j].1.push(c.eval(slots));
        }
        samples.push(st);
    };

    // emit initial sample (grid mode: only if requested at t0)
    if grid.is_empty() {
        record(t, &y, &mut slots, &mut samples, &mut mon_series);
    } else {
        while next_out < grid.len() && (grid[next_out] - t) * dir <= 1e-14 * span.abs() {
            record(grid[next_out], &y, &mut slots, &mut samples, &mut mon_series);
            next_out += 1;
        }
    }

    let mut steps = 0usize;
    let mut rejections = 0usize;
    let mut termination = Termination::Complete;
    let hmin = 1e-14 * (1.0 + span.abs());

    'outer: while (t_end - t) * dir > 1e-14 * (1.0 + span.abs()) {
        if steps >= opts.max_steps {
            termination = Termination::StepUnderflow;
            break;
        }
        // clamp onto the end and onto the next requested output time
        if (t + h - t_end) * dir > 0.0 {
            h = t_end - t;
        }
        if !grid.is_empty() && next_out < grid.len() && (t + h - grid[next_out]) * dir > 0.0 {
            h = grid[next_out] - t;
        }

        for s in 0..6 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s + 1) {
                    acc += A[s][j] * kj[i];
                }
                ytmp[i] = y[i] + h * acc;
            }
            cs.derivative(&mut slots, t + C[s] * h, &ytmp, &mut k[s + 1]);
        }
        // 5th-order solution is stage 6's ytmp (FSAL layout)
        ynew.copy_from_slice(&ytmp);
        let mut err = 0.0f64;
        let mut finite = true;
        for i in 0..dim {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E5_4[j] * kj[i];
            }
            e *= h;
            let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            let r = e / sc;
            err += r * r;
            if !ynew[i].is_finite() {
                finite = false;
            }
        }
        err = (err / dim as f64).sqrt();

        if finite && err <= 1.0 {
            steps += 1;
            t += h;
            y.copy_from_slice(&ynew);
            k.swap(0, 6); // FSAL: last stage is the next first stage
            if let (Some(ai), Some(floor)) = (a_index, a_floor) {
                if y[ai] <= floor {
                    record(t, &y, &mut slots, &mut samples, &mut mon_series);
                    termination = Termination::SingularApproach;
                    break 'outer;
                }
            }
            if grid.is_empty() {
                record(t, &y, &mut slots, &mut samples, &mut mon_series);
            } else {
                while next_out < grid.len()
                    && (grid[next_out] - t) * dir <= 1e-12 * (1.0 + span.abs())
                {
                    record(grid[next_out], &y, &mut slots, &mut samples, &mut mon_series);
                    next_out += 1;
                }
            }
        } else {
            rejections += 1;
        }

        let order_scale = if err > 0.0 {
            0.9 * err.powf(-0.2)
        } else {
            5.0
        };
        let factor = order_scale.clamp(0.2, 5.0);
        h *= if finite { factor } else { 0.2 };
        if h.abs() < hmin {
            if steps == 0 {
                return Err(IntegrateError::StepUnderflow { t });
            }
            // an underflow while the scale factor has collapsed is the
            // singular approach, not a generic stepper failure
            let collapsed = match a_index {
                Some(ai) => y[ai].abs() <= 1e-3 * a_start.abs(),
                None => false,
            };
            termination = if collapsed {
                Termination::SingularApproach
            } else {
                Termination::StepUnderflow
            };
            break;
        }
    }

    Ok(Trajectory {
        samples,
        monitors: mon_series,
        steps,
        rejections,
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::models::{energy_expr, frw_system, LapseMode, Potential};
    use crate::expr::Rat;

    fn v0_cfg(k: i8) -> ModelConfig {
        ModelConfig::new(
            k,
            Potential::Constant(Rat::new(
                num_bigint::BigInt::from(1),
                num_bigint::BigInt::from(2),
            )),
            LapseMode::Unit,
        )
    }

    fn energy_monitor(cfg: &ModelConfig) -> Monitor {
        Monitor::new("E", energy_expr(cfg))
    }

    #[test]
    fn constrained_state_examples() {
        let s = constrained_initial_state(1.0, 0.0, 0.0, &v0_cfg(0), 1).unwrap();
        assert_eq!(s.get("a"), Some((1.0, 1.0)));
        let zero_v = ModelConfig::new(
            1,
            Potential::Constant(Rat::from(num_bigint::BigInt::from(0))),
            LapseMode::Unit,
        );
        assert!(matches!(
            constrained_initial_state(1.0, 0.0, 0.0, &zero_v, 1),
            Err(IntegrateError::ConstraintInfeasible(_))
        ));
        let flat_zero_v = ModelConfig::new(
            0,
            Potential::Constant(Rat::from(num_bigint::BigInt::from(0))),
            LapseMode::Unit,
        );
        let s = constrained_initial_state(1.0, 0.0, 1.0, &flat_zero_v, -1).unwrap();
        assert_eq!(s.get("a"), Some((1.0, -1.0)));
    }

    #[test]
    fn de_sitter_matches_closed_form() {
        let cfg = v0_cfg(0);
        let sys = frw_system(&cfg);
        let s0 = constrained_initial_state(1.0, 0.0, 0.0, &cfg, 1).unwrap();
        let opts = IvpOptions::default();
        let traj = solve_ivp(
            &sys,
            &s0,
            5.0,
            &opts,
            &[energy_monitor(&cfg)],
            &NumBinding::new(),
        )
        .unwrap();
        assert_eq!(traj.termination, Termination::Complete);
        let last = traj.samples.last().unwrap();
        let (a, _) = last.get("a").unwrap();
        let exact = (last.t).exp();
        assert!(
            ((a - exact) / exact).abs() <= 1e-6,
            "relative error {}",
            ((a - exact) / exact).abs()
        );
        let drift = monitor_drift(&traj, "E").unwrap();
        assert!(drift <= 1e-8, "E drift {}", drift);
    }

    #[test]
    fn exponential_potential_energy_drift() {
        let cfg = ModelConfig::new(
            0,
            Potential::exponential_i(1, -2),
            LapseMode::Unit,
        );
        let sys = frw_system(&cfg);
        let s0 = constrained_initial_state(1.0, 0.0, 0.3, &cfg, 1).unwrap();
        let traj = solve_ivp(
            &sys,
            &s0,
            10.0,
            &IvpOptions::default(),
            &[energy_monitor(&cfg)],
            &NumBinding::new(),
        )
        .unwrap();
        assert_eq!(traj.termination, Termination::Complete);
        let drift = monitor_drift(&traj, "E").unwrap();
        assert!(drift <= 1e-7, "E drift {}", drift);
    }

    #[test]
    fn fifth_order_convergence_on_de_sitter() {
        let cfg = v0_cfg(0);
        let sys = frw_system(&cfg);
        let s0 = constrained_initial_state(1.0, 0.0, 0.0, &cfg, 1).unwrap();
        let endpoint_error = |rtol: f64| {
            let opts = IvpOptions { rtol, atol: 1e-16, ..IvpOptions::default() };
            let traj =
                solve_ivp(&sys, &s0, 5.0, &opts, &[], &NumBinding::new()).unwrap();
            let last = traj.samples.last().unwrap();
            let (a, _) = last.get("a").unwrap();
            (a - last.t.exp()).abs()
        };
        let coarse = endpoint_error(1e-5);
        let fine = endpoint_error(1e-5 / 32.0);
        assert!(
            coarse / fine >= 16.0,
            "error ratio {} below 5th-order expectation",
            coarse / fine
        );
    }

    #[test]
    fn time_translation_equivariance() {
        let cfg = ModelConfig::new(0, Potential::exponential_i(1, -2), LapseMode::Unit);
        let sys = frw_system(&cfg);
        let opts = IvpOptions {
            output_times: (0..=20).map(|i| i as f64 * 0.25).collect(),
            ..IvpOptions::default()
        };
        let s0 = constrained_initial_state(1.0, 0.0, 0.3, &cfg, 1).unwrap();
        let base = solve_ivp(&sys, &s0, 5.0, &opts, &[], &NumBinding::new()).unwrap();
        let delta = 2.0;
        let mut s1 = s0.clone();
        s1.t += delta;
        let shifted_opts = IvpOptions {
            output_times: opts.output_times.iter().map(|t| t + delta).collect(),
            ..IvpOptions::default()
        };
        let shifted =
            solve_ivp(&sys, &s1, 5.0 + delta, &shifted_opts, &[], &NumBinding::new())
                .unwrap();
        assert_eq!(base.samples.len(), shifted.samples.len());
        for (p, q) in base.samples.iter().zip(shifted.samples.iter()) {
            let (pa, pad) = p.get("a").unwrap();
            let (qa, qad) = q.get("a").unwrap();
            assert!((pa - qa).abs() <= 1e-9 && (pad - qad).abs() <= 1e-9);
            let (pp, ppd) = p.get("phi").unwrap();
            let (qp, qpd) = q.get("phi").unwrap();
            assert!((pp - qp).abs() <= 1e-9 && (ppd - qpd).abs() <= 1e-9);
        }
    }

    #[test]
    fn scaling_equivariance_flat_universe() {
        let cfg = ModelConfig::new(0, Potential::exponential_i(1, -2), LapseMode::Unit);
        let sys = frw_system(&cfg);
        let opts = IvpOptions {
            output_times: (0..=10).map(|i| i as f64 * 0.3).collect(),
            ..IvpOptions::default()
        };
        let lambda = 3.0;
        let s0 = constrained_initial_state(1.0, 0.0, 0.3, &cfg, 1).unwrap();
        let base = solve_ivp(&sys, &s0, 3.0, &opts, &[], &NumBinding::new()).unwrap();
        let s1 = constrained_initial_state(lambda, 0.0, 0.3, &cfg, 1).unwrap();
        let scaled = solve_ivp(&sys, &s1, 3.0, &opts, &[], &NumBinding::new()).unwrap();
        for (p, q) in base.samples.iter().zip(scaled.samples.iter()) {
            let (pa, _) = p.get("a").unwrap();
            let (qa, _) = q.get("a").unwrap();
            assert!((lambda * pa - qa).abs() <= 1e-7 * qa.abs());
            let (pp, _) = p.get("phi").unwrap();
            let (qp, _) = q.get("phi").unwrap();
            assert!((pp - qp).abs() <= 1e-8);
        }
    }

    #[test]
    fn finite_time_singularity_is_detected() {
        // V = 0, k = 0, contracting branch: a = a0 (1 - 3 phidot0 t)^{1/3}
        // hits zero at t = 1/(3 phidot0).
        let cfg = ModelConfig::new(
            0,
            Potential::Constant(Rat::from(num_bigint::BigInt::from(0))),
            LapseMode::Unit,
        );
        let sys = frw_system(&cfg);
        let s0 = constrained_initial_state(1.0, 0.0, 1.0, &cfg, -1).unwrap();
        let traj =
            solve_ivp(&sys, &s0, 1.0, &IvpOptions::default(), &[], &NumBinding::new())
                .unwrap();
        assert_eq!(traj.termination, Termination::SingularApproach);
        let last = traj.samples.last().unwrap();
        assert!((last.t - 1.0 / 3.0).abs() < 0.05, "stopped at t = {}", last.t);
    }

    #[test]
    fn opaque_potential_needs_a_rule() {
        let cfg = ModelConfig::new(0, Potential::Opaque, LapseMode::Unit);
        let sys = frw_system(&cfg);
        let s0 = State::new(0.0).with("a", 1.0, 1.0).with("phi", 0.0, 0.0);
        let err = solve_ivp(&sys, &s0, 1.0, &IvpOptions::default(), &[], &NumBinding::new());
        assert!(matches!(err, Err(IntegrateError::MonitorUnbound(_))));
        let st = crate::expr::SymbolTable::new().declare("V", &["phi"]);
        let body = parse("(1/2)*phi^2", &st).unwrap();
        let env = NumBinding::new().func("V", &["phi"], body);
        let ok = solve_ivp(&sys, &s0, 0.5, &IvpOptions::default(), &[], &env);
        assert!(ok.is_ok());
    }

    #[test]
    fn monitor_bookkeeping() {
        let cfg = v0_cfg(0);
        let sys = frw_system(&cfg);
        let s0 = constrained_initial_state(1.0, 0.0, 0.0, &cfg, 1).unwrap();
        let constant = Monitor::new("seven", Expr::int(7));
        let traj = solve_ivp(
            &sys,
            &s0,
            1.0,
            &IvpOptions::default(),
            &[constant],
            &NumBinding::new(),
        )
        .unwrap();
        assert_eq!(monitor_drift(&traj, "seven").unwrap(), 0.0);
        assert!(matches!(
            monitor_drift(&traj, "nope"),
            Err(IntegrateError::UnknownMonitor(_))
        ));
        for w in traj.samples.windows(2) {
            assert!(w[1].t > w[0].t, "sample times must increase");
        }
        assert_eq!(traj.monitors[0].1.len(), traj.samples.len());
    }

    #[test]
    fn drift_scales_with_tolerance() {
        let cfg = ModelConfig::new(0, Potential::exponential_i(1, -2), LapseMode::Unit);
        let sys = frw_system(&cfg);
        let s0 = constrained_initial_state(1.0, 0.0, 0.3, &cfg, 1).unwrap();
        let drift_at = |rtol: f64| {
            let opts = IvpOptions { rtol, atol: rtol * 1e-2, ..IvpOptions::default() };
            let traj = solve_ivp(
                &sys,
                &s0,
                5.0,
                &opts,
                &[energy_monitor(&cfg)],
                &NumBinding::new(),
            )
            .unwrap();
            monitor_drift(&traj, "E").unwrap()
        };
        let loose = drift_at(1e-6);
        let tight = drift_at(1e-10);
        assert!(tight < loose, "tight {} vs loose {}", tight, loose);
    }
}
