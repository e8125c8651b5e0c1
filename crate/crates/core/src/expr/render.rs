//! Deterministic text output in the same grammar the parser accepts.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::{One, Signed};

use super::{Atom, Expr, Monomial, Poly, Rat};

impl Expr {
    /// Render to the surface grammar. Terms appear in descending monomial
    /// order, so equal expressions render to identical strings.
    pub fn render(&self) -> String {
        if self.den().is_one() {
            render_poly(self.num())
        } else {
            format!("({})/({})", render_poly(self.num()), render_poly(self.den()))
        }
    }
}

fn render_poly(p: &Poly) -> String {
    if p.is_zero() {
        return String::from("0");
    }
    let mut out = String::new();
    for (i, (m, c)) in p.0.iter().rev().enumerate() {
        let neg = c.is_negative();
        let mag = c.abs();
        if i == 0 {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        out.push_str(&render_term(&mag, m));
    }
    out
}

fn render_term(mag: &Rat, m: &Monomial) -> String {
    let mut parts: Vec<String> = Vec::new();
    if !mag.is_one() || m.is_one() {
        parts.push(render_rat(mag));
    }
    for (a, &k) in &m.0 {
        let base = render_atom(a);
        if k == 1 {
            parts.push(base);
        } else {
            parts.push(format!("{}^{}", base, k));
        }
    }
    parts.join("*")
}

fn render_rat(r: &Rat) -> String {
    if r.is_integer() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn render_atom(a: &Atom) -> String {
    match a {
        Atom::Var(v) => String::from(v.name()),
        Atom::Exp(u) => format!("exp({})", u.render()),
        Atom::Ln(u) => format!("ln({})", u.render()),
        Atom::Opaque(call) => {
            let plain_vars: Option<Vec<&str>> = call
                .args
                .iter()
                .map(|e| single_var_name(e))
                .collect();
            // a repeated argument name would make the named form ambiguous
            let plain_vars = plain_vars.filter(|names| {
                let mut seen = names.clone();
                seen.sort_unstable();
                seen.windows(2).all(|w| w[0] != w[1])
            });
            if call.orders.iter().all(|&k| k == 0) {
                let args: Vec<String> = call.args.iter().map(|e| e.render()).collect();
                return format!("{}({})", call.name, args.join(","));
            }
            let args: Vec<String> = call.args.iter().map(|e| e.render()).collect();
            let mut out = format!("{}({})", call.name, args.join(","));
            for (i, &k) in call.orders.iter().enumerate() {
                if k > 0 {
                    // derivative slot named by the argument when unambiguous,
                    // positional otherwise
                    match &plain_vars {
                        Some(names) => out = format!("D({},{},{})", out, names[i], k),
                        None => out = format!("D({},{},{})", out, i + 1, k),
                    }
                }
            }
            out
        }
    }
}

fn single_var_name(e: &Expr) -> Option<&str> {
    if !e.den().is_one() || e.num().0.len() != 1 {
        return None;
    }
    let (m, c) = e.num().0.iter().next()?;
    if !c.is_one() || m.0.len() != 1 {
        return None;
    }
    match m.0.iter().next()? {
        (Atom::Var(v), 1) => Some(v.name()),
        _ => None,
    }
}
