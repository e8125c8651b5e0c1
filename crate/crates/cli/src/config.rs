//! Flat key=value run configuration: file values first, command-line
//! overrides on top, unknown keys rejected before any computation runs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use liefrw_core::expr::{parse as parse_expr, Expr, Rat, SymbolTable};
use liefrw_core::jet::{JetContext, VectorField};
use liefrw_core::models::{LapseMode, ModelConfig, Potential};
use liefrw_core::symmetry::{gen_x, gen_y, gen_z, GeneratorFamily};

#[derive(Debug)]
pub enum ConfigError {
    Io(String),
    Syntax { line: usize, text: String },
    UnknownKey(String),
    BadValue { key: String, value: String, expected: &'static str },
    Missing(&'static str),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "cannot read config: {}", e),
            ConfigError::Syntax { line, text } => {
                write!(f, "config line {} is not `key = value`: {}", line, text)
            }
            ConfigError::UnknownKey(k) => write!(f, "unknown config key: {}", k),
            ConfigError::BadValue { key, value, expected } => {
                write!(f, "bad value for {}: {} (expected {})", key, value, expected)
            }
            ConfigError::Missing(k) => write!(f, "missing required key: {}", k),
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "system",
    "k",
    "potential",
    "gens",
    "lagrangian",
    "a0",
    "phi0",
    "phidot0",
    "adot0",
    "n0",
    "ndot0",
    "branch",
    "t_end",
    "x_end",
    "rtol",
    "atol",
    "tol",
    "n_out",
    "drift_max",
    "out_dir",
    "numeric",
    "verify_reassembly",
];

/// The merged configuration, kept as strings so the config hash covers
/// exactly what was supplied.
#[derive(Clone, Debug, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("{}: {}", path.display(), e)))?;
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax { line: i + 1, text: raw.to_string() });
            };
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Canonical serialization used for the report hash.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// FNV-1a over the canonical form.
    pub fn hash(&self) -> u64 {
        let mut h = 0xcbf29ce484222325u64;
        for b in self.canonical().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                value: v.to_string(),
                expected: "a number",
            }),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                value: v.to_string(),
                expected: "an integer",
            }),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(v) => Err(ConfigError::BadValue {
                key: key.to_string(),
                value: v.to_string(),
                expected: "true or false",
            }),
        }
    }

    pub fn curvature(&self) -> Result<i8, ConfigError> {
        match self.get("k").unwrap_or("0") {
            "-1" => Ok(-1),
            "0" => Ok(0),
            "1" | "+1" => Ok(1),
            v => Err(ConfigError::BadValue {
                key: "k".to_string(),
                value: v.to_string(),
                expected: "-1, 0 or +1",
            }),
        }
    }

    pub fn system_kind(&self) -> Result<SystemKind, ConfigError> {
        match self.get("system").unwrap_or("conformal") {
            "conformal" => Ok(SystemKind::Conformal),
            "proper" => Ok(SystemKind::Proper),
            "lapse" => Ok(SystemKind::Lapse),
            v => Err(ConfigError::BadValue {
                key: "system".to_string(),
                value: v.to_string(),
                expected: "conformal, proper or lapse",
            }),
        }
    }

    pub fn branch(&self) -> Result<i8, ConfigError> {
        match self.get("branch").unwrap_or("+") {
            "+" | "+1" | "1" => Ok(1),
            "-" | "-1" => Ok(-1),
            v => Err(ConfigError::BadValue {
                key: "branch".to_string(),
                value: v.to_string(),
                expected: "+ or -",
            }),
        }
    }

    pub fn potential(&self) -> Result<Potential, ConfigError> {
        let spec = self.get("potential").unwrap_or("opaque");
        parse_potential(spec).ok_or_else(|| ConfigError::BadValue {
            key: "potential".to_string(),
            value: spec.to_string(),
            expected: "opaque, exp:<lambda>[:<c>], const:<v0> or poly:<c0>,<c1>,...",
        })
    }

    pub fn model(&self) -> Result<ModelConfig, ConfigError> {
        let lapse = match self.system_kind()? {
            SystemKind::Lapse => LapseMode::Dynamical,
            _ => LapseMode::Unit,
        };
        Ok(ModelConfig::new(self.curvature()?, self.potential()?, lapse))
    }

    pub fn generators(&self, ctx: &JetContext) -> Result<Vec<(String, VectorField)>, ConfigError> {
        let spec = self.get("gens").unwrap_or("X,Y,Z");
        let mut out = Vec::new();
        for name in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let g = parse_generator(name, ctx).ok_or_else(|| ConfigError::BadValue {
                key: "gens".to_string(),
                value: name.to_string(),
                expected: "X, Y, Z, W, family:<c1>,<c2>,<mu> or custom:<tau>;<a>;<phi>",
            })?;
            out.push((name.to_string(), g));
        }
        if out.is_empty() {
            return Err(ConfigError::Missing("gens"));
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SystemKind {
    Conformal,
    Proper,
    Lapse,
}

fn parse_rat(s: &str) -> Option<Rat> {
    parse_expr(s, &SymbolTable::new()).ok()?.as_rational()
}

fn parse_potential(spec: &str) -> Option<Potential> {
    if spec == "opaque" {
        return Some(Potential::Opaque);
    }
    let (kind, rest) = spec.split_once(':')?;
    match kind {
        "exp" => {
            let mut parts = rest.split(':');
            let lambda = parse_rat(parts.next()?)?;
            let c = match parts.next() {
                Some(c) => parse_rat(c)?,
                None => liefrw_core::expr::rat_int(1),
            };
            Some(Potential::Exponential { c, lambda })
        }
        "const" => Some(Potential::Constant(parse_rat(rest)?)),
        "poly" => {
            let coeffs: Option<Vec<Rat>> = rest.split(',').map(parse_rat).collect();
            Some(Potential::Polynomial(coeffs?))
        }
        _ => None,
    }
}

fn parse_generator(name: &str, ctx: &JetContext) -> Option<VectorField> {
    match name {
        "X" => return Some(gen_x(ctx)),
        "Y" => return Some(gen_y(ctx)),
        "Z" => return Some(gen_z(ctx)),
        "W" => {
            let one = liefrw_core::expr::rat_int(1);
            return Some(gen_x(ctx).linear_combination(&one, &gen_y(ctx), &one));
        }
        _ => {}
    }
    if let Some(rest) = name.strip_prefix("family:") {
        let mut parts = rest.split(',');
        let c1 = parse_rat(parts.next()?)?;
        let c2 = parse_rat(parts.next()?)?;
        let mu = parse_rat(parts.next()?)?;
        let fam = GeneratorFamily::new(
            Expr::rational(c1),
            Expr::rational(c2),
            Expr::rational(mu),
        );
        return Some(fam.vector_field(ctx));
    }
    if let Some(rest) = name.strip_prefix("custom:") {
        let st = SymbolTable::new();
        let mut parts = rest.split(';');
        let tau = parse_expr(parts.next()?, &st).ok()?;
        let psi_a = parse_expr(parts.next()?, &st).ok()?;
        let psi_phi = parse_expr(parts.next()?, &st).ok()?;
        return Some(
            VectorField::new(ctx)
                .with(ctx.indep().name(), tau)
                .with("a", psi_a)
                .with("phi", psi_phi),
        );
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let mut cfg = RunConfig::default();
        assert!(cfg.set("flux_capacitor", "1").is_err());
        assert!(cfg.set("t_end", "5").is_ok());
    }

    #[test]
    fn potential_specs() {
        assert_eq!(parse_potential("opaque"), Some(Potential::Opaque));
        assert!(matches!(
            parse_potential("exp:-2"),
            Some(Potential::Exponential { .. })
        ));
        assert!(parse_potential("const:1/2").is_some());
        assert!(parse_potential("poly:0,0,1").is_some());
        assert!(parse_potential("magic").is_none());
    }

    #[test]
    fn hash_is_stable_under_key_order() {
        let mut a = RunConfig::default();
        a.set("t_end", "5").unwrap();
        a.set("k", "1").unwrap();
        let mut b = RunConfig::default();
        b.set("k", "1").unwrap();
        b.set("t_end", "5").unwrap();
        assert_eq!(a.hash(), b.hash());
    }
}
