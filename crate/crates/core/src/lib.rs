//! Rough-path integration over the Malvenuto–Reutenauer algebra of permutations.
//!
//! Layers, bottom up: [`hopf`] (words, permutations, shuffles), [`tensor`]
//! (truncated tensor series and the permutation action), [`signature`],
//! [`one_form`], [`sewing`], [`integration`] and [`effects`]. [`verify`] runs
//! seeded self-checks and [`cli`] wraps everything in the `roughalg` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod effects;
pub mod error;
pub mod exec;
pub mod hopf;
pub mod integration;
pub mod one_form;
pub mod sewing;
pub mod signature;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use exec::Execution;
