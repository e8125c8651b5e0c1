//! Symbolic and numerical toolkit for Lie point symmetries, conserved
//! quantities, and order reduction of the Friedmann-Robertson-Walker
//! Einstein equations.
//!
//! The crate is `no_std` (with `alloc`); IO, file formats, and the CLI live
//! in the companion `liefrw` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod expr;
pub mod jet;
pub mod models;
pub mod symmetry;
pub mod integrate;
pub mod noether;
pub mod reduce;
mod guard;

pub use guard::set_guard_seed;
