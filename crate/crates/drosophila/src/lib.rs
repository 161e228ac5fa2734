//! Exact computational engine for drosophila restricted Lie algebras.
//!
//! The library builds species of binary words ("flies"), realizes pivot
//! derivations of divided-power truncated rings over F_p, computes brackets
//! and restricted p-th powers exactly, verifies the structural relations of
//! the construction, measures growth functions, and tests nillity — all on
//! finite truncations.
//!
//! Everything is organized around a [`Ctx`]: a prime field, a specie built to
//! some depth, and a tuple of divided-power cap exponents per fly.

pub mod deriv;
pub mod dpring;
pub mod grading;
pub mod growth;
pub mod nilcheck;
pub mod pivots;
pub mod species;

use dpring::{ExponentTuple, PrimeField};
use species::Specie;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("generation {needed} not constructed (specie has {have})")]
    NeedsExtension { needed: u32, have: u32 },
    #[error("depth violation: {0}")]
    DepthViolation(String),
    #[error("context mismatch: {0}")]
    ContextMismatch(String),
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Shared context for all algebraic operations: the prime field, the specie
/// (finite, built generation by generation), and the cap tuple assigning
/// `S_a >= 1` to every constructed fly.
#[derive(Debug, Clone)]
pub struct Ctx {
    pub fp: PrimeField,
    pub specie: Specie,
    pub tuple: ExponentTuple,
}

impl Ctx {
    /// Validates that the tuple covers every constructed generation.
    pub fn new(fp: PrimeField, specie: Specie, tuple: ExponentTuple) -> Result<Self> {
        tuple.check_covers(&specie)?;
        Ok(Ctx { fp, specie, tuple })
    }

    pub fn p(&self) -> u64 {
        self.fp.p()
    }

    /// Cap exponent `S_a` of a fly.
    pub fn cap(&self, a: species::FlyId) -> u32 {
        self.tuple.cap(a)
    }

    /// `p^{S_a}`, the exponent bound of the divided-power variable `t_a`.
    pub fn cap_pow(&self, a: species::FlyId) -> u64 {
        self.tuple.cap_pow(self.fp.p(), a)
    }
}
