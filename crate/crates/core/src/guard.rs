//! Randomized numeric cross-check behind `is_zero`.
//!
//! The structural verdict is the decision; the sampler only flags the
//! suspicious combination "structurally nonzero, numerically zero at every
//! sample", which indicates a normalization bug.

#[cfg(not(test))]
#[allow(unused_imports)]
use num_traits::Float;
use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};


use crate::expr::{Atom, Expr, Poly};

static GUARD_SEED: AtomicU64 = AtomicU64::new(0x5DEECE66D);

/// Seed the randomized guard sampler (`LIEFRW_SEED` plumbs through here).
pub fn set_guard_seed(seed: u64) {
    GUARD_SEED.store(seed | 1, Ordering::Relaxed);
}

pub(crate) struct XorShift(u64);

impl XorShift {
    pub fn new(seed: u64) -> Self {
        XorShift(seed | 1)
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    /// Uniform in [0.5, 2.0) with random sign.
    pub fn sample(&mut self) -> f64 {
        let u = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        let mag = 0.5 + 1.5 * u;
        if self.next_u64() & 1 == 0 {
            mag
        } else {
            -mag
        }
    }
}

const SAMPLES: usize = 24;

/// Panics (debug builds) when a structurally nonzero expression evaluates to
/// ~0 at every random sample, with atoms treated as independent unknowns.
pub(crate) fn check_nonzero_guard(e: &Expr) {
    let mut atoms: Vec<Atom> = Vec::new();
    for p in [e.num(), e.den()] {
        for a in p.atoms() {
            if !atoms.contains(a) {
                atoms.push(a.clone());
            }
        }
    }
    let mut rng = XorShift::new(GUARD_SEED.load(Ordering::Relaxed));
    let mut max_abs = 0.0f64;
    for _ in 0..SAMPLES {
        let mut env: BTreeMap<&Atom, f64> = BTreeMap::new();
        for a in &atoms {
            env.insert(a, rng.sample());
        }
        let n = eval_poly_indep(e.num(), &env);
        let d = eval_poly_indep(e.den(), &env);
        if !n.is_finite() || !d.is_finite() || d.abs() < 1e-12 {
            return; // unlucky sample set, no verdict
        }
        max_abs = max_abs.max((n / d).abs());
    }
    debug_assert!(
        max_abs > 1e-9,
        "normalization guard: structurally nonzero expression vanished at {} random samples",
        SAMPLES
    );
}

fn eval_poly_indep(p: &Poly, env: &BTreeMap<&Atom, f64>) -> f64 {
    let mut acc = 0.0;
    for (m, c) in &p.0 {
        let mut term = crate::expr::rat_to_f64(c);
        for (a, &k) in &m.0 {
            term *= env.get(a).copied().unwrap_or(f64::NAN).powi(k as i32);
        }
        acc += term;
    }
    acc
}
