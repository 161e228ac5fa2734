//! Helpers shared by the integration tests: independent oracles and random
//! element generators. Everything here is written from first principles so
//! the library under test never checks itself against its own code paths.
#![allow(dead_code)]

use drosophila::deriv::{operator_matrix, Derivation, PureKey, SmallRing, SparseOp};
use drosophila::dpring::{DPMonomial, ExponentTuple, PrimeField};
use drosophila::pivots;
use drosophila::species::{FlyId, Specie};
use drosophila::{Ctx, Result};
use num_bigint::BigUint;
use rand::Rng;

pub fn wild_ctx(k: u32, p: u64, depth: u32) -> Ctx {
    let sp = Specie::wild(k, depth).unwrap();
    let tuple = ExponentTuple::trivial(&sp);
    Ctx::new(PrimeField::new(p).unwrap(), sp, tuple).unwrap()
}

pub fn clover_ctx(p: u64, depth: u32) -> Ctx {
    let sp = Specie::clover(depth).unwrap();
    let tuple = ExponentTuple::trivial(&sp);
    Ctx::new(PrimeField::new(p).unwrap(), sp, tuple).unwrap()
}

/// Binomial coefficient by exact factorial arithmetic, reduced mod p at the
/// very end. Slow but unimpeachable; the Lucas implementation must agree.
pub fn factorial_binomial_mod(m: u64, n: u64, p: u64, fact: &[BigUint]) -> u64 {
    if n > m {
        return 0;
    }
    let num = &fact[m as usize];
    let den = &fact[n as usize] * &fact[(m - n) as usize];
    let q = num / &den;
    let r = q % BigUint::from(p);
    r.to_u64_digits().first().copied().unwrap_or(0)
}

pub fn factorial_table(up_to: u64) -> Vec<BigUint> {
    let mut fact = Vec::with_capacity(up_to as usize + 1);
    fact.push(BigUint::from(1u32));
    for i in 1..=up_to {
        let next = fact.last().unwrap() * BigUint::from(i);
        fact.push(next);
    }
    fact
}

/// Random pure ancestral monomial derivation: tail variables are proper
/// ancestors of the target, exponents below the per-fly cap. This is the
/// domain on which the single-term p-power rule is exact.
pub fn random_ancestral_term(ctx: &Ctx, depth: u32, rng: &mut impl Rng) -> (PureKey, u64) {
    let sp = &ctx.specie;
    loop {
        let gen = rng.gen_range(0..=depth);
        let idx = rng.gen_range(0..sp.gen_size(gen).unwrap());
        let target = FlyId::new(gen, idx);
        let power = rng.gen_range(0..ctx.cap(target));
        let mut entries = Vec::new();
        for a in sp.ancestors(target) {
            if rng.gen_bool(0.4) {
                let cap_pow = ctx.cap_pow(a);
                entries.push((a, rng.gen_range(1..cap_pow.min(16))));
            }
        }
        if let Ok(tail) = DPMonomial::from_entries(entries) {
            let coeff = rng.gen_range(1..ctx.p());
            return (PureKey::new(tail, target, power), coeff);
        }
    }
}

pub fn random_ancestral_derivation(
    ctx: &Ctx,
    depth: u32,
    max_terms: usize,
    rng: &mut impl Rng,
) -> Derivation {
    let n = rng.gen_range(1..=max_terms);
    let terms = (0..n).map(|_| random_ancestral_term(ctx, depth, rng)).collect();
    Derivation::from_terms(depth, terms, ctx.p())
}

/// Sparse row echelon over flattened operator coordinates; rows kept with
/// unit leads so reduction is a single scaled merge per collision.
pub struct FlatEchelon {
    rows: Vec<(u64, Vec<(u64, u64)>)>,
}

impl FlatEchelon {
    pub fn new() -> Self {
        FlatEchelon { rows: Vec::new() }
    }

    pub fn insert(&mut self, mut v: Vec<(u64, u64)>, fp: &PrimeField) -> bool {
        loop {
            if v.is_empty() {
                return false;
            }
            let lead = v[0].0;
            match self.rows.binary_search_by_key(&lead, |r| r.0) {
                Ok(i) => {
                    let c = fp.neg(v[0].1);
                    v = merge_flat(&v, &self.rows[i].1, c, fp.p());
                }
                Err(i) => {
                    let inv = fp.inv(v[0].1);
                    let unit: Vec<(u64, u64)> =
                        v.iter().map(|&(k, c)| (k, c * inv % fp.p())).collect();
                    self.rows.insert(i, (lead, unit));
                    return true;
                }
            }
        }
    }
}

fn merge_flat(a: &[(u64, u64)], b: &[(u64, u64)], scale: u64, p: u64) -> Vec<(u64, u64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let take_a = match (a.get(i), b.get(j)) {
            (Some(&(ka, _)), Some(&(kb, _))) => {
                if ka == kb {
                    let v = (a[i].1 + b[j].1 * scale) % p;
                    if v != 0 {
                        out.push((ka, v));
                    }
                    i += 1;
                    j += 1;
                    continue;
                }
                ka < kb
            }
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        if take_a {
            out.push(a[i]);
            i += 1;
        } else {
            let v = b[j].1 * scale % p;
            if v != 0 {
                out.push((b[j].0, v));
            }
            j += 1;
        }
    }
    out
}

/// Independent growth oracle: realize the generator pivots as matrices on the
/// full finite ring at `depth`, close the matrix set under commutators with
/// generators and p-th matrix powers, and count independent operators per
/// weight (word length; the two gradings agree for the all-ones tuple base).
/// Returns gamma(1..=max_weight), cumulative.
pub fn matrix_rank_gamma(
    ctx: &Ctx,
    max_weight: u64,
    depth: u32,
    limit: u64,
) -> Result<Vec<u64>> {
    let ring = SmallRing::full(ctx, depth, limit)?;
    let p = ctx.p();
    let k = ctx.specie.k();
    let mut gens: Vec<SparseOp> = Vec::new();
    for i in 0..k {
        let v = pivots::virtual_pivot(ctx, FlyId::new(0, i), depth)?;
        gens.push(operator_matrix(&v, &ring, ctx)?);
    }
    let mut ech = FlatEchelon::new();
    let mut layers: Vec<Vec<SparseOp>> = vec![Vec::new(); max_weight as usize + 1];
    for g in &gens {
        if ech.insert(g.flatten(), &ctx.fp) {
            layers[1].push(g.clone());
        }
    }
    let mut gamma = Vec::with_capacity(max_weight as usize);
    gamma.push(layers[1].len() as u64);
    for w in 2..=max_weight as usize {
        let mut candidates: Vec<SparseOp> = Vec::new();
        for x in &layers[w - 1] {
            for g in &gens {
                candidates.push(g.commutator(x, p));
            }
        }
        if w as u64 % p == 0 {
            for x in &layers[w / p as usize] {
                candidates.push(x.pow(p as u32, p));
            }
        }
        for cand in candidates {
            if ech.insert(cand.flatten(), &ctx.fp) {
                layers[w].push(cand);
            }
        }
        gamma.push(gamma.last().unwrap() + layers[w].len() as u64);
    }
    Ok(gamma)
}

/// Left-balanced iterated bracket over a power-of-two list of derivations:
/// one element is itself, a pair is their bracket, longer lists split in
/// half. Used for the independence family built from permuted pivots.
pub fn halved_bracket(xs: &[Derivation], ctx: &Ctx) -> Result<Derivation> {
    assert!(!xs.is_empty() && xs.len().is_power_of_two());
    if xs.len() == 1 {
        return Ok(xs[0].clone());
    }
    let (lo, hi) = xs.split_at(xs.len() / 2);
    let a = halved_bracket(lo, ctx)?;
    let b = halved_bracket(hi, ctx)?;
    a.bracket(&b, ctx)
}

/// Coordinates of a derivation in an external key order, for independence
/// checks without touching the library's own echelon code.
pub fn derivation_coords(
    w: &Derivation,
    index: &mut std::collections::HashMap<PureKey, u64>,
) -> Vec<(u64, u64)> {
    let mut out: Vec<(u64, u64)> = w
        .terms()
        .iter()
        .map(|(key, c)| {
            let next = index.len() as u64;
            let id = *index.entry(key.clone()).or_insert(next);
            (id, *c)
        })
        .collect();
    out.sort_unstable();
    out
}
