//! `liefrw`: command-line front end for the symmetry toolkit. Six
//! subcommands share one flat key=value configuration; flags override file
//! values. Every report starts with the tool version, a hash of the merged
//! configuration, and the side conditions under which symbolic zeros hold,
//! so identical configs yield byte-identical output.

mod config;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use liefrw_core::expr::{parse as parse_expr, Expr, NumBinding, SymbolTable, Var};
use liefrw_core::integrate::{
    constrained_initial_state, monitor_drift, solve_ivp, IntegrateError, IvpOptions, Monitor,
    State, Termination, Trajectory,
};
use liefrw_core::jet::{JetContext, VectorField};
use liefrw_core::models::{
    energy_expr, frw_lapse_system, frw_proper_time_system, frw_system, lagrangian, LapseMode,
    ModelConfig, ODESystem,
};
use liefrw_core::noether::{
    conjugate_momentum_check, lapse_flux_k, numeric_conservation, time_translation_flux_p,
    variational_residual, verify_conservation_law,
};
use liefrw_core::reduce::{reconstruct, reduced_system, to_invariants, ReduceError, Variant};
use liefrw_core::symmetry::{classify, commutator, determining_equations, symmetry_residual};

use config::{ConfigError, RunConfig, SystemKind};

#[derive(Parser)]
#[command(name = "liefrw", version, about = "Lie symmetry toolkit for FRW cosmology")]
struct Cli {
    /// Flat key=value configuration file; flags below override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    system: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    k: Option<String>,
    #[arg(long, global = true)]
    potential: Option<String>,
    #[arg(long, global = true)]
    gens: Option<String>,
    #[arg(long, global = true)]
    lagrangian: Option<String>,
    #[arg(long, global = true)]
    a0: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    phi0: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    phidot0: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    adot0: Option<String>,
    #[arg(long, global = true)]
    n0: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    ndot0: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    branch: Option<String>,
    #[arg(long, global = true)]
    t_end: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    x_end: Option<String>,
    #[arg(long, global = true)]
    rtol: Option<String>,
    #[arg(long, global = true)]
    atol: Option<String>,
    #[arg(long, global = true)]
    tol: Option<String>,
    #[arg(long, global = true)]
    n_out: Option<String>,
    #[arg(long, global = true)]
    drift_max: Option<String>,
    #[arg(long, global = true)]
    out_dir: Option<String>,
    #[arg(long, global = true)]
    numeric: bool,
    #[arg(long, global = true)]
    verify_reassembly: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Verify whether each selected generator is a point symmetry.
    Check,
    /// Expand the symmetry condition into determining equations.
    Derive,
    /// Integrate the selected system and track conserved-quantity drift.
    Integrate,
    /// Solve the group-invariant reduction and reconstruct by quadrature.
    Reduce,
    /// Verify variational symmetries and conservation laws.
    Noether,
    /// Commutator table and structure of the selected generators.
    Algebra,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(seed) = std::env::var("LIEFRW_SEED") {
        match seed.parse::<u64>() {
            Ok(s) => liefrw_core::set_guard_seed(s),
            Err(_) => {
                eprintln!("error: LIEFRW_SEED must be an unsigned integer");
                return ExitCode::from(2);
            }
        }
    }
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e);
            2
        }
    };
    ExitCode::from(code)
}

fn merged_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let overrides: [(&str, &Option<String>); 19] = [
        ("system", &cli.system),
        ("k", &cli.k),
        ("potential", &cli.potential),
        ("gens", &cli.gens),
        ("lagrangian", &cli.lagrangian),
        ("a0", &cli.a0),
        ("phi0", &cli.phi0),
        ("phidot0", &cli.phidot0),
        ("adot0", &cli.adot0),
        ("n0", &cli.n0),
        ("ndot0", &cli.ndot0),
        ("branch", &cli.branch),
        ("t_end", &cli.t_end),
        ("x_end", &cli.x_end),
        ("rtol", &cli.rtol),
        ("atol", &cli.atol),
        ("tol", &cli.tol),
        ("n_out", &cli.n_out),
        ("drift_max", &cli.drift_max),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    if let Some(dir) = &cli.out_dir {
        cfg.set("out_dir", dir)?;
    }
    if cli.numeric {
        cfg.set("numeric", "true")?;
    }
    if cli.verify_reassembly {
        cfg.set("verify_reassembly", "true")?;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<u8, ConfigError> {
    let cfg = merged_config(cli)?;
    match cli.cmd {
        Cmd::Check => cmd_check(&cfg),
        Cmd::Derive => cmd_derive(&cfg),
        Cmd::Integrate => cmd_integrate(&cfg),
        Cmd::Reduce => cmd_reduce(&cfg),
        Cmd::Noether => cmd_noether(&cfg),
        Cmd::Algebra => cmd_algebra(&cfg),
    }
}

// --- shared plumbing -------------------------------------------------------

fn build_system(kind: SystemKind, model: &ModelConfig) -> ODESystem {
    match kind {
        SystemKind::Conformal => frw_system(model),
        SystemKind::Proper => frw_proper_time_system(model),
        SystemKind::Lapse => frw_lapse_system(model),
    }
}

fn header(cfg: &RunConfig, side_conditions: &[String]) -> String {
    let mut out = String::new();
    out.push_str(&format!("# liefrw {}\n", env!("CARGO_PKG_VERSION")));
    out.push_str(&format!("# config {:016x}\n", cfg.hash()));
    if side_conditions.is_empty() {
        out.push_str("# side conditions: none\n");
    } else {
        out.push_str(&format!("# side conditions: {}\n", side_conditions.join("; ")));
    }
    out
}

fn fmt17(v: f64) -> String {
    format!("{:.16e}", v)
}

fn emit(cfg: &RunConfig, name: &str, report: &str) -> Result<(), ConfigError> {
    print!("{}", report);
    let dir = PathBuf::from(cfg.get("out_dir").unwrap_or("."));
    std::fs::create_dir_all(&dir)
        .map_err(|e| ConfigError::Io(format!("{}: {}", dir.display(), e)))?;
    let path = dir.join(name);
    std::fs::write(&path, report)
        .map_err(|e| ConfigError::Io(format!("{}: {}", path.display(), e)))?;
    Ok(())
}

fn write_csv(
    cfg: &RunConfig,
    name: &str,
    columns: &[String],
    rows: &[Vec<f64>],
) -> Result<PathBuf, ConfigError> {
    let dir = PathBuf::from(cfg.get("out_dir").unwrap_or("."));
    std::fs::create_dir_all(&dir)
        .map_err(|e| ConfigError::Io(format!("{}: {}", dir.display(), e)))?;
    let path = dir.join(name);
    let mut text = columns.join(",");
    text.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt17(*v)).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    std::fs::write(&path, text)
        .map_err(|e| ConfigError::Io(format!("{}: {}", path.display(), e)))?;
    Ok(path)
}

fn linspace(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![t0, t1];
    }
    (0..=n).map(|i| t0 + (t1 - t0) * i as f64 / n as f64).collect()
}

fn render_field(g: &VectorField) -> String {
    let ctx = g.context();
    let mut parts = Vec::new();
    for v in std::iter::once(ctx.indep()).chain(ctx.dependents().iter()) {
        let c = g.coeff(v);
        if !c.is_zero() {
            parts.push(format!("({}) d/d{}", c.render(), v.name()));
        }
    }
    if parts.is_empty() {
        String::from("0")
    } else {
        parts.join(" + ")
    }
}

/// Numeric environment for a run. Opaque potentials get a concrete default
/// rule `V(phi) = exp(-2*phi)` so `--numeric` checks have something to
/// evaluate; closed-form potentials need no bindings.
fn numeric_env(model: &ModelConfig) -> NumBinding {
    if model.potential.is_opaque() {
        let body = parse_expr("exp(-2*phi)", &SymbolTable::new()).expect("literal parses");
        NumBinding::new().func("V", &["phi"], body)
    } else {
        NumBinding::new()
    }
}

/// The same default made concrete, for code paths (initial-data constraint)
/// that need a closed-form potential rather than a numeric rule.
fn numeric_model(model: &ModelConfig) -> ModelConfig {
    if model.potential.is_opaque() {
        ModelConfig::new(
            model.k,
            liefrw_core::models::Potential::exponential_i(1, -2),
            model.lapse_mode,
        )
    } else {
        model.clone()
    }
}

/// Outer error: bad configuration. Inner error: a numerically infeasible
/// start, which carries its own exit code.
fn initial_state(
    cfg: &RunConfig,
    model: &ModelConfig,
) -> Result<Result<State, IntegrateError>, ConfigError> {
    let a0 = cfg.f64_or("a0", 1.0)?;
    let phi0 = cfg.f64_or("phi0", 0.0)?;
    let phidot0 = cfg.f64_or("phidot0", 0.0)?;
    let mut s = if cfg.get("adot0").is_some() {
        let adot0 = cfg.f64_or("adot0", 0.0)?;
        State::new(0.0).with("a", a0, adot0).with("phi", phi0, phidot0)
    } else {
        match constrained_initial_state(a0, phi0, phidot0, model, cfg.branch()?) {
            Ok(s) => s,
            Err(e) => return Ok(Err(e)),
        }
    };
    if model.lapse_mode == LapseMode::Dynamical {
        s = s.with("N", cfg.f64_or("n0", 1.0)?, cfg.f64_or("ndot0", 0.0)?);
    }
    Ok(Ok(s))
}

fn integrate_exit(e: &IntegrateError) -> u8 {
    match e {
        IntegrateError::ConstraintInfeasible(_) => 3,
        IntegrateError::StepUnderflow { .. } | IntegrateError::NonFiniteDerivative { .. } => 4,
        _ => 2,
    }
}

// --- check -----------------------------------------------------------------

fn cmd_check(cfg: &RunConfig) -> Result<u8, ConfigError> {
    let model = cfg.model()?;
    let sys = build_system(cfg.system_kind()?, &model);
    let gens = cfg.generators(sys.context())?;
    let mut report = header(cfg, sys.side_conditions());
    let mut all_symmetries = true;
    for (name, g) in &gens {
        let r = symmetry_residual(g, &sys).map_err(|e| ConfigError::Io(format!("{}", e)))?;
        if r.verdict {
            report.push_str(&format!("{}: symmetry\n", name));
        } else {
            all_symmetries = false;
            report.push_str(&format!("{}: not a symmetry\n", name));
            for (i, res) in r.residuals.iter().enumerate() {
                if !res.is_zero() {
                    report.push_str(&format!("  residual[{}] = {}\n", i, res.render()));
                }
            }
        }
    }
    emit(cfg, "check.txt", &report)?;
    Ok(if all_symmetries { 0 } else { 1 })
}

// --- derive ----------------------------------------------------------------

/// Shorten rendered ansatz calls: `tau(t,a,phi)` reads as `tau`, and
/// likewise for the per-dependent coefficient functions.
fn abbreviate(text: &str, ctx: &JetContext) -> String {
    let args: Vec<&str> = std::iter::once(ctx.indep().name())
        .chain(ctx.dependents().iter().map(Var::name))
        .collect();
    let suffix = format!("({})", args.join(","));
    let mut out = text.to_string();
    for v in ctx.dependents() {
        let mut name: String = v.name().to_string();
        let mut chars = name.chars();
        let cap: String = chars
            .next()
            .map(|c| c.to_uppercase().chain(chars).collect())
            .unwrap_or_default();
        name = if cap == v.name() { format!("Xi{}", cap) } else { cap };
        out = out.replace(&format!("{}{}", name, suffix), &name);
    }
    out.replace(&format!("tau{}", suffix), "tau")
}

fn cmd_derive(cfg: &RunConfig) -> Result<u8, ConfigError> {
    let model = cfg.model()?;
    let sys = build_system(cfg.system_kind()?, &model);
    let deqs = determining_equations(&sys).map_err(|e| ConfigError::Io(format!("{}", e)))?;
    let mut report = header(cfg, sys.side_conditions());
    for (i, parts) in deqs.iter().enumerate() {
        let dep = &sys.equations()[i].0;
        report.push_str(&format!("equation for {}:\n", dep.name()));
        for (m, coeff) in parts.iter().rev() {
            let mono = Expr::from_monomial(m).render();
            let pde = abbreviate(&coeff.render(), sys.context());
            report.push_str(&format!("  [{}]  {}\n", mono, pde));
        }
    }
    if cfg.bool_or("verify_reassembly", false)? {
        let ok = deqs.iter().enumerate().all(|(i, parts)| {
            let g = liefrw_core::symmetry::ansatz_field(sys.context());
            let r = symmetry_residual(&g, &sys).expect("shared context");
            Expr::reassemble(parts).sub(&r.residuals[i]).is_zero()
        });
        report.push_str(&format!(
            "reassembly: {}\n",
            if ok { "ok" } else { "MISMATCH" }
        ));
        if !ok {
            emit(cfg, "derive.txt", &report)?;
            return Ok(1);
        }
    }
    emit(cfg, "derive.txt", &report)?;
    Ok(0)
}

// --- integrate -------------------------------------------------------------

fn monitors_for(kind: SystemKind, model: &ModelConfig, sys: &ODESystem) -> Vec<Monitor> {
    let mut out = Vec::new();
    match kind {
        SystemKind::Conformal => {
            out.push(Monitor::new("E", energy_expr(model)));
            out.push(Monitor::new("P", time_translation_flux_p(model)));
        }
        SystemKind::Proper => {
            // adot^2 + k - a^2 phidot^2 - 2 a^2 V; transported along the
            // flow as C/a, so it stays zero from a constrained start
            out.push(Monitor::new("C", energy_expr(model).add(&model.k_expr())));
        }
        SystemKind::Lapse => {
            for (i, c) in sys.constraints().iter().enumerate() {
                out.push(Monitor::new(&format!("C{}", i + 1), c.clone()));
            }
            out.push(Monitor::new("K", lapse_flux_k(model)));
        }
    }
    out
}

fn trajectory_rows(traj: &Trajectory, lapse: bool) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut columns = vec![
        "t".to_string(),
        "a".to_string(),
        "adot".to_string(),
        "phi".to_string(),
        "phidot".to_string(),
    ];
    if lapse {
        columns.push("N".to_string());
        columns.push("Ndot".to_string());
    }
    for (name, _) in &traj.monitors {
        columns.push(name.clone());
    }
    let mut rows = Vec::new();
    for (i, s) in traj.samples.iter().enumerate() {
        let (a, adot) = s.get("a").unwrap_or((f64::NAN, f64::NAN));
        let (phi, phidot) = s.get("phi").unwrap_or((f64::NAN, f64::NAN));
        let mut row = vec![s.t, a, adot, phi, phidot];
        if lapse {
            let (n, ndot) = s.get("N").unwrap_or((f64::NAN, f64::NAN));
            row.push(n);
            row.push(ndot);
        }
        for (_, series) in &traj.monitors {
            row.push(series.get(i).copied().unwrap_or(f64::NAN));
        }
        rows.push(row);
    }
    (columns, rows)
}

fn cmd_integrate(cfg: &RunConfig) -> Result<u8, ConfigError> {
    let kind = cfg.system_kind()?;
    let model = cfg.model()?;
    let sys = build_system(kind, &model);
    let env = numeric_env(&model);
    let t_end = cfg.f64_or("t_end", 1.0)?;
    let n_out = cfg.usize_or("n_out", 200)?;
    let opts = IvpOptions {
        rtol: cfg.f64_or("rtol", 1e-10)?,
        atol: cfg.f64_or("atol", 1e-12)?,
        output_times: linspace(0.0, t_end, n_out),
        ..IvpOptions::default()
    };
    let mut report = header(cfg, sys.side_conditions());

    let s0 = match initial_state(cfg, &numeric_model(&model))? {
        Ok(s) => s,
        Err(e) => {
            report.push_str(&format!("failed: {}\n", e));
            emit(cfg, "integrate.txt", &report)?;
            return Ok(integrate_exit(&e));
        }
    };
    let monitors = monitors_for(kind, &model, &sys);
    let traj = match solve_ivp(&sys, &s0, t_end, &opts, &monitors, &env) {
        Ok(t) => t,
        Err(e) => {
            report.push_str(&format!("failed: {}\n", e));
            emit(cfg, "integrate.txt", &report)?;
            return Ok(integrate_exit(&e));
        }
    };

    let (columns, rows) = trajectory_rows(&traj, kind == SystemKind::Lapse);
    let csv = write_csv(cfg, "trajectory.csv", &columns, &rows)?;
    report.push_str(&format!("trajectory: {}\n", csv.display()));
    report.push_str(&format!(
        "termination: {:?} after {} steps ({} rejected)\n",
        traj.termination, traj.steps, traj.rejections
    ));
    let drift_max = match cfg.get("drift_max") {
        Some(_) => Some(cfg.f64_or("drift_max", 0.0)?),
        None => None,
    };
    let mut exceeded = false;
    for (name, _) in &traj.monitors {
        let d = monitor_drift(&traj, name).map_err(|e| ConfigError::Io(format!("{}", e)))?;
        report.push_str(&format!("drift {} = {:e}\n", name, d));
        if let Some(limit) = drift_max {
            if d > limit {
                exceeded = true;
            }
        }
    }
    emit(cfg, "integrate.txt", &report)?;
    if traj.termination == Termination::StepUnderflow {
        return Ok(4);
    }
    Ok(if exceeded { 1 } else { 0 })
}

// --- reduce ----------------------------------------------------------------

fn cmd_reduce(cfg: &RunConfig) -> Result<u8, ConfigError> {
    let kind = cfg.system_kind()?;
    let variant = match kind {
        SystemKind::Conformal => Variant::Conformal,
        SystemKind::Proper => {
            if cfg.curvature()? != 0 {
                return Err(ConfigError::BadValue {
                    key: "k".to_string(),
                    value: cfg.get("k").unwrap_or("0").to_string(),
                    expected: "0 (the proper-time reduction needs a flat model)",
                });
            }
            Variant::Proper
        }
        SystemKind::Lapse => {
            return Err(ConfigError::BadValue {
                key: "system".to_string(),
                value: "lapse".to_string(),
                expected: "conformal or proper (no invariant reduction for the lapse system)",
            })
        }
    };
    let model = cfg.model()?;
    if model.potential.is_opaque() {
        return Err(ConfigError::BadValue {
            key: "potential".to_string(),
            value: "opaque".to_string(),
            expected: "a numeric potential (exp:..., const:... or poly:...)",
        });
    }
    let sys = build_system(kind, &model);
    let rsys = reduced_system(&model.potential, variant);
    let mut report = header(cfg, sys.side_conditions());
    report.push_str(&format!("dy/dx = {}\n", rsys.dy_dx.render()));
    report.push_str(&format!("dw/dx = {}\n", rsys.dw_dx.render()));

    let s0 = match initial_state(cfg, &model)? {
        Ok(s) => s,
        Err(e) => {
            report.push_str(&format!("failed: {}\n", e));
            emit(cfg, "reduce.txt", &report)?;
            return Ok(integrate_exit(&e));
        }
    };
    let r0 = match to_invariants(&s0) {
        Ok(r) => r,
        Err(e) => {
            report.push_str(&format!("failed: {}\n", e));
            emit(cfg, "reduce.txt", &report)?;
            return Ok(reduce_exit(&e));
        }
    };
    let a0 = s0.get("a").expect("state has a").0;
    let x_end = cfg.f64_or("x_end", r0.x + 1.0)?;
    let tol = cfg.f64_or("tol", 1e-10)?;
    let rec = match reconstruct(&rsys, &r0, a0, s0.t, x_end, tol) {
        Ok(t) => t,
        Err(e) => {
            report.push_str(&format!("failed: {}\n", e));
            emit(cfg, "reduce.txt", &report)?;
            return Ok(reduce_exit(&e));
        }
    };

    // reduced-coordinate table: x = phi, y = phidot, w = adot/a
    let reduced_rows: Vec<Vec<f64>> = rec
        .samples
        .iter()
        .map(|s| {
            let (a, adot) = s.get("a").unwrap_or((f64::NAN, f64::NAN));
            let (phi, phidot) = s.get("phi").unwrap_or((f64::NAN, f64::NAN));
            vec![phi, phidot, adot / a, s.t, a]
        })
        .collect();
    let reduced_cols: Vec<String> =
        ["x", "y", "w", "t", "a"].iter().map(|s| s.to_string()).collect();
    let reduced_csv = write_csv(cfg, "reduced.csv", &reduced_cols, &reduced_rows)?;
    let (rec_cols, rec_rows) = trajectory_rows(&rec, false);
    let rec_csv = write_csv(cfg, "reconstructed.csv", &rec_cols, &rec_rows)?;
    report.push_str(&format!("reduced: {}\n", reduced_csv.display()));
    report.push_str(&format!("reconstructed: {}\n", rec_csv.display()));

    // round-trip against direct integration on the reconstruction's grid
    if rec.samples.len() > 1 {
        let times: Vec<f64> = rec.samples.iter().map(|s| s.t).collect();
        let t_end = *times.last().expect("nonempty");
        let opts = IvpOptions {
            rtol: tol.min(1e-10),
            atol: tol.min(1e-10) * 1e-2,
            output_times: times,
            ..IvpOptions::default()
        };
        let env = numeric_env(&model);
        match solve_ivp(&sys, &s0, t_end, &opts, &[], &env) {
            Ok(direct) => {
                let mut dev = 0.0f64;
                for (r, d) in rec.samples.iter().zip(direct.samples.iter()) {
                    let (ar, _) = r.get("a").unwrap_or((f64::NAN, f64::NAN));
                    let (ad, _) = d.get("a").unwrap_or((f64::NAN, f64::NAN));
                    let (pr, _) = r.get("phi").unwrap_or((f64::NAN, f64::NAN));
                    let (pd, _) = d.get("phi").unwrap_or((f64::NAN, f64::NAN));
                    dev = dev.max(((ar - ad) / ad).abs()).max((pr - pd).abs());
                }
                report.push_str(&format!("round-trip max deviation = {:e}\n", dev));
            }
            Err(e) => report.push_str(&format!("direct comparison unavailable: {}\n", e)),
        }
    }
    emit(cfg, "reduce.txt", &report)?;
    Ok(0)
}

fn reduce_exit(e: &ReduceError) -> u8 {
    match e {
        ReduceError::TurningPoint { .. } => 5,
        ReduceError::QuadratureFailure { .. } => 4,
        ReduceError::NonPositiveScaleFactor(_) => 2,
    }
}

// --- noether ---------------------------------------------------------------

fn cmd_noether(cfg: &RunConfig) -> Result<u8, ConfigError> {
    let k = cfg.curvature()?;
    let potential = cfg.potential()?;
    let unit = ModelConfig::new(k, potential.clone(), LapseMode::Unit);
    let dynamical = ModelConfig::new(k, potential, LapseMode::Dynamical);
    let ctx = JetContext::new("t", &["a", "phi"]);
    let lapse_ctx = JetContext::new("t", &["a", "phi", "N"]);
    let l_unit = lagrangian(&unit);
    let l_lapse = lagrangian(&dynamical);
    let side = vec![String::from("a > 0"), String::from("N != 0")];
    let mut report = header(cfg, &side);
    let mut ok = true;
    let mut suite = |report: &mut String, label: &str, pass: bool| {
        report.push_str(&format!("{}: {}\n", label, if pass { "pass" } else { "FAIL" }));
        if !pass {
            ok = false;
        }
    };

    let vr = |g: &VectorField, l| variational_residual(g, l).expect("shared context");
    suite(
        &mut report,
        "Y variational (unit lapse)",
        vr(&liefrw_core::symmetry::gen_y(&ctx), &l_unit).is_zero(),
    );
    suite(
        &mut report,
        "Z not variational (unit lapse)",
        !vr(&liefrw_core::symmetry::gen_z(&ctx), &l_unit).is_zero(),
    );
    suite(
        &mut report,
        "Y variational (dynamical lapse)",
        vr(&liefrw_core::symmetry::gen_y(&lapse_ctx), &l_lapse).is_zero(),
    );
    suite(
        &mut report,
        "X not variational (dynamical lapse)",
        !vr(&liefrw_core::symmetry::gen_x(&lapse_ctx), &l_lapse).is_zero(),
    );

    let law_p = verify_conservation_law(
        &time_translation_flux_p(&unit),
        &liefrw_core::symmetry::gen_y(&ctx),
        &l_unit,
    );
    match &law_p {
        Ok(law) => suite(
            &mut report,
            &format!("flux P verified (factor {})", law.factor.render()),
            true,
        ),
        Err(e) => suite(&mut report, &format!("flux P verified ({})", e), false),
    }
    let law_k = verify_conservation_law(
        &lapse_flux_k(&dynamical),
        &liefrw_core::symmetry::gen_y(&lapse_ctx),
        &l_lapse,
    );
    match &law_k {
        Ok(law) => suite(
            &mut report,
            &format!("flux K verified (factor {})", law.factor.render()),
            true,
        ),
        Err(e) => suite(&mut report, &format!("flux K verified ({})", e), false),
    }
    suite(
        &mut report,
        "conjugate momentum matches P",
        conjugate_momentum_check(&unit).is_zero(),
    );

    // optional: custom generators against a chosen Lagrangian
    if cfg.get("gens").is_some() {
        let which = cfg.get("lagrangian").unwrap_or("unit");
        let (gctx, lag) = match which {
            "unit" => (&ctx, &l_unit),
            "lapse" => (&lapse_ctx, &l_lapse),
            v => {
                return Err(ConfigError::BadValue {
                    key: "lagrangian".to_string(),
                    value: v.to_string(),
                    expected: "unit or lapse",
                })
            }
        };
        for (name, g) in cfg.generators(gctx)? {
            let r = variational_residual(&g, lag)
                .map_err(|e| ConfigError::Io(format!("{}", e)))?;
            report.push_str(&format!(
                "{} ({} lapse): {}\n",
                name,
                which,
                if r.is_zero() { "variational" } else { "not variational" }
            ));
        }
    }

    if cfg.bool_or("numeric", false)? {
        let limit = cfg.f64_or("drift_max", 1e-7)?;
        let t_end = cfg.f64_or("t_end", 1.0)?;
        let n_out = cfg.usize_or("n_out", 200)?;
        let opts = IvpOptions {
            rtol: cfg.f64_or("rtol", 1e-10)?,
            atol: cfg.f64_or("atol", 1e-12)?,
            output_times: linspace(0.0, t_end, n_out),
            ..IvpOptions::default()
        };
        let numeric_law = |report: &mut String,
                               ok: &mut bool,
                               name: &str,
                               model: &ModelConfig,
                               kind: SystemKind,
                               law: &Result<_, _>|
         -> Result<(), ConfigError> {
            let law = match law {
                Ok(l) => l,
                Err(_) => return Ok(()),
            };
            let nmodel = numeric_model(model);
            let sys = build_system(kind, &nmodel);
            let env = numeric_env(model);
            let s0 = initial_state(cfg, &nmodel)?
                .map_err(|e| ConfigError::Io(format!("{}", e)))?;
            let traj = solve_ivp(&sys, &s0, t_end, &opts, &[], &env)
                .map_err(|e| ConfigError::Io(format!("{}", e)))?;
            let drift = numeric_conservation(&traj, law, &env)
                .map_err(|e| ConfigError::Io(format!("{}", e)))?;
            report.push_str(&format!("numeric {} drift = {:e}\n", name, drift));
            if drift > limit {
                *ok = false;
                report.push_str(&format!("numeric {} drift exceeds {:e}\n", name, limit));
            }
            Ok(())
        };
        numeric_law(&mut report, &mut ok, "P", &unit, SystemKind::Conformal, &law_p)?;
        numeric_law(&mut report, &mut ok, "K", &dynamical, SystemKind::Lapse, &law_k)?;
    }

    emit(cfg, "noether.txt", &report)?;
    Ok(if ok { 0 } else { 1 })
}

// --- algebra ---------------------------------------------------------------

fn cmd_algebra(cfg: &RunConfig) -> Result<u8, ConfigError> {
    let model = cfg.model()?;
    let sys = build_system(cfg.system_kind()?, &model);
    let gens = cfg.generators(sys.context())?;
    let names: Vec<&str> = gens.iter().map(|(n, _)| n.as_str()).collect();
    let fields: Vec<VectorField> = gens.iter().map(|(_, g)| g.clone()).collect();
    let mut report = header(cfg, &[]);

    for i in 0..fields.len() {
        for j in (i + 1)..fields.len() {
            let b = commutator(&fields[i], &fields[j])
                .map_err(|e| ConfigError::Io(format!("{}", e)))?;
            report.push_str(&format!(
                "[{}, {}] = {}\n",
                names[i],
                names[j],
                render_field(&b)
            ));
        }
    }

    match classify(&fields) {
        Ok(st) => {
            let mut any = false;
            for i in 0..names.len() {
                for j in 0..names.len() {
                    for (kk, c) in st.constants[i][j].iter().enumerate() {
                        use num_traits::Zero;
                        if !c.is_zero() {
                            any = true;
                            report.push_str(&format!(
                                "c^{}_{{{},{}}} = {}\n",
                                names[kk], names[i], names[j], c
                            ));
                        }
                    }
                }
            }
            if !any {
                report.push_str("all structure constants vanish\n");
            }
            report.push_str(&format!("abelian: {}\n", st.abelian));
            report.push_str(&format!("solvable: {}\n", st.solvable));
            report.push_str(&format!("nilpotent: {}\n", st.nilpotent));
            emit(cfg, "algebra.txt", &report)?;
            Ok(0)
        }
        Err(e) => {
            report.push_str(&format!("not a Lie algebra basis: {}\n", e));
            emit(cfg, "algebra.txt", &report)?;
            Ok(1)
        }
    }
}

// keep BTreeMap import honest when features shift
#[allow(unused)]
type _ReportMap = BTreeMap<String, String>;
