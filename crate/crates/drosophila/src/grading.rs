//! Weight functions and gradings: the k-dimensional space of weight
//! functions pinned by generation-0 values, per-generation weights of
//! uniform tuples, and the depletion statistic driving the nillity bound.

use crate::deriv::{Derivation, PureKey};
use crate::dpring::{p_adic_norm, ExponentTuple};
use crate::species::{FlyId, Specie};
use crate::{Ctx, Error, Result};
use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use std::collections::HashMap;
use std::sync::Mutex;

/// Memoized multidegrees of pivot elements. The recurrence
/// Gr(ab) = p^{S_a} Gr(a) + (p^{S_b} - 1) Gr(b) pins every weight function by
/// its generation-0 values; the basis functions take value delta_ij on the
/// generators, and any other base vector is a linear combination.
pub struct WeightTable<'a> {
    ctx: &'a Ctx,
    gr: Mutex<HashMap<FlyId, Vec<BigInt>>>,
}

/// Weight content of a derivation: zero, a single weight shared by all
/// terms, or a witness pair of distinct term weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Homogeneity {
    Zero,
    Homogeneous(BigInt),
    Mixed(BigInt, BigInt),
}

impl<'a> WeightTable<'a> {
    pub fn new(ctx: &'a Ctx) -> Self {
        WeightTable { ctx, gr: Mutex::new(HashMap::new()) }
    }

    /// Multidegree of the pivot element of `a` in the generator basis.
    pub fn fly_multidegree(&self, a: FlyId) -> Result<Vec<BigInt>> {
        self.ctx.specie.check_fly(a)?;
        if let Some(v) = self.gr.lock().unwrap().get(&a) {
            return Ok(v.clone());
        }
        let k = self.ctx.specie.k() as usize;
        let v = if a.gen == 0 {
            let mut e = vec![BigInt::zero(); k];
            e[a.idx as usize] = BigInt::one();
            e
        } else {
            let (f, m) = self.ctx.specie.parents(a).expect("non-root fly has parents");
            let gf = self.fly_multidegree(f)?;
            let gm = self.fly_multidegree(m)?;
            let pf = BigInt::from(self.ctx.cap_pow(f));
            let pm = BigInt::from(self.ctx.cap_pow(m) - 1);
            gf.iter()
                .zip(&gm)
                .map(|(x, y)| &pf * x + &pm * y)
                .collect()
        };
        self.gr.lock().unwrap().insert(a, v.clone());
        Ok(v)
    }

    /// Total degree weight of the pivot element of `a` (all-ones base).
    pub fn fly_weight(&self, a: FlyId) -> Result<BigInt> {
        Ok(self.fly_multidegree(a)?.iter().sum())
    }

    /// Multidegree of a pure Lie monomial t^tail D_b^(p^l):
    /// p^l Gr(b) minus the tail exponents times their flies' multidegrees.
    pub fn monomial_multidegree(&self, key: &PureKey) -> Result<Vec<BigInt>> {
        let pl = BigInt::from(self.ctx.p().pow(key.power));
        let mut out: Vec<BigInt> = self
            .fly_multidegree(key.target)?
            .into_iter()
            .map(|x| &pl * x)
            .collect();
        for &(c, e) in key.tail.entries() {
            let gc = self.fly_multidegree(c)?;
            let e = BigInt::from(e);
            for (o, x) in out.iter_mut().zip(&gc) {
                *o -= &e * x;
            }
        }
        Ok(out)
    }

    /// Total degree weight of a pure Lie monomial (all-ones base).
    pub fn monomial_weight(&self, key: &PureKey) -> Result<BigInt> {
        Ok(self.monomial_multidegree(key)?.iter().sum())
    }

    /// Weight of a pure Lie monomial under arbitrary generation-0 values.
    pub fn monomial_weight_with_base(&self, key: &PureKey, base: &[BigInt]) -> Result<BigInt> {
        if base.len() != self.ctx.specie.k() as usize {
            return Err(Error::InvalidArgument(format!(
                "base has {} entries for {} generators",
                base.len(),
                self.ctx.specie.k()
            )));
        }
        Ok(self
            .monomial_multidegree(key)?
            .iter()
            .zip(base)
            .map(|(g, b)| g * b)
            .sum())
    }

    /// Whether all terms share one total weight.
    pub fn homogeneity(&self, w: &Derivation) -> Result<Homogeneity> {
        let mut seen: Option<BigInt> = None;
        for (key, _) in w.terms() {
            let wt = self.monomial_weight(key)?;
            match &seen {
                None => seen = Some(wt),
                Some(prev) if *prev != wt => {
                    return Ok(Homogeneity::Mixed(prev.clone(), wt));
                }
                _ => {}
            }
        }
        Ok(match seen {
            None => Homogeneity::Zero,
            Some(wt) => Homogeneity::Homogeneous(wt),
        })
    }
}

/// Per-generation cap values and membership split of a uniform tuple.
/// `gen_caps[n] = (S_n, R_n)`; `split[n]` lists the fly indices carrying
/// S_n and R_n respectively (all flies in the first list when S_n = R_n).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniformStructure {
    pub gen_caps: Vec<(u32, u32)>,
    pub split: Vec<(Vec<u32>, Vec<u32>)>,
}

/// Detects the uniform structure: at most two cap values per generation,
/// and when they differ every child must have one parent of each value.
pub fn uniform_structure(specie: &Specie, tuple: &ExponentTuple) -> Option<UniformStructure> {
    let mut gen_caps = Vec::new();
    let mut split = Vec::new();
    for gen in 0..specie.generations() {
        let size = specie.gen_size(gen).ok()?;
        let s = tuple.cap(FlyId::new(gen, 0));
        let mut r = s;
        let mut in_s = Vec::new();
        let mut in_r = Vec::new();
        for i in 0..size {
            let c = tuple.cap(FlyId::new(gen, i));
            if c == s {
                in_s.push(i);
            } else if r == s || c == r {
                r = c;
                in_r.push(i);
            } else {
                return None;
            }
        }
        // Cross-pairing: with two distinct values, each child pairs one
        // parent of each.
        if s != r && gen + 1 < specie.generations() {
            for i in 0..specie.gen_size(gen + 1).ok()? {
                let (f, m) = specie.parents(FlyId::new(gen + 1, i))?;
                let cf = tuple.cap(f);
                let cm = tuple.cap(m);
                if !((cf == s && cm == r) || (cf == r && cm == s)) {
                    return None;
                }
            }
        }
        gen_caps.push((s, r));
        split.push((in_s, in_r));
    }
    Some(UniformStructure { gen_caps, split })
}

pub fn is_uniform(specie: &Specie, tuple: &ExponentTuple) -> bool {
    uniform_structure(specie, tuple).is_some()
}

/// Common weight of the generation-n pivot elements of a uniform tuple:
/// the product over earlier generations of (p^{S_m} + p^{R_m} - 1).
pub fn generation_weight(ctx: &Ctx, n: u32) -> Result<BigUint> {
    let st = uniform_structure(&ctx.specie, &ctx.tuple)
        .ok_or_else(|| Error::NotApplicable("tuple is not uniform".into()))?;
    if n as usize > st.gen_caps.len() {
        return Err(Error::NeedsExtension { needed: n, have: st.gen_caps.len() as u32 });
    }
    let p = BigUint::from(ctx.p());
    let mut wt = BigUint::one();
    for &(s, r) in &st.gen_caps[..n as usize] {
        wt *= p.pow(s) + p.pow(r) - BigUint::one();
    }
    Ok(wt)
}

/// Depletion of a pure Lie monomial: (p-1) times the power order, plus the
/// cap deficiency S_c(p-1) - |xi_c|_p summed over the paternal-by-one
/// ancestors c of the target only; other tail variables are ignored.
pub fn monomial_depletion(ctx: &Ctx, key: &PureKey) -> u64 {
    let p = ctx.p();
    let mut depl = (p - 1) * key.power as u64;
    for m in 0..key.target.gen {
        let pair = ctx
            .specie
            .paternal_by_one_at(key.target, m)
            .expect("constructed fly has paternal-by-one ancestors");
        for c in pair {
            let xi = key.tail.exponent_of(c);
            depl += ctx.cap(c) as u64 * (p - 1) - p_adic_norm(xi, p);
        }
    }
    depl
}

/// Maximum depletion over the terms of a derivation; None when zero.
pub fn depletion(ctx: &Ctx, w: &Derivation) -> Option<u64> {
    w.terms().iter().map(|(k, _)| monomial_depletion(ctx, k)).max()
}
