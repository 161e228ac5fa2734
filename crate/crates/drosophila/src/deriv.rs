//! Special derivations of the truncated ring at a fixed truncation depth:
//! pure Lie monomials, their action on the ring, the Lie bracket, the
//! restricted p-th power, restriction to shallower truncations, and a
//! brute-force operator-matrix representation used as an oracle.

use crate::dpring::{DPMonomial, RingElement};
use crate::species::{FlyId, Specie};
use crate::{Ctx, Error, Result};
use std::collections::{BTreeSet, HashMap};

/// Key of a pure Lie monomial `t^tail D_target^(p^power)`; the scalar lives in
/// the owning [`Derivation`]. Ordered by (target, power, tail).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PureKey {
    pub target: FlyId,
    pub power: u32,
    pub tail: DPMonomial,
}

impl PureKey {
    pub fn new(tail: DPMonomial, target: FlyId, power: u32) -> Self {
        PureKey { target, power, tail }
    }

    pub fn bare(target: FlyId, power: u32) -> Self {
        PureKey { target, power, tail: DPMonomial::unit() }
    }

    /// Every tail fly is a proper ancestor (binary subword) of the target.
    pub fn is_ancestral(&self, specie: &Specie) -> bool {
        self.tail
            .entries()
            .iter()
            .all(|&(a, _)| specie.is_ancestor(a, self.target))
    }
}

/// A depth-truncated sum of pure Lie monomials: every target has generation
/// at most `depth`. Coefficients are nonzero residues; terms are sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Derivation {
    depth: u32,
    terms: Vec<(PureKey, u64)>,
}

impl Derivation {
    pub fn zero(depth: u32) -> Self {
        Derivation { depth, terms: Vec::new() }
    }

    /// The bare partial `D_b^(p^l)`.
    pub fn partial(depth: u32, b: FlyId, l: u32) -> Self {
        Derivation { depth, terms: vec![(PureKey::bare(b, l), 1)] }
    }

    pub fn pure(depth: u32, coeff: u64, tail: DPMonomial, target: FlyId, power: u32) -> Self {
        if coeff == 0 {
            return Self::zero(depth);
        }
        Derivation { depth, terms: vec![(PureKey::new(tail, target, power), coeff)] }
    }

    pub fn from_terms(depth: u32, terms: Vec<(PureKey, u64)>, p: u64) -> Self {
        let mut d = Derivation { depth, terms };
        d.normalize(p);
        d
    }

    fn normalize(&mut self, p: u64) {
        self.terms.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        let mut out: Vec<(PureKey, u64)> = Vec::with_capacity(self.terms.len());
        for (k, c) in self.terms.drain(..) {
            let c = c % p;
            match out.last_mut() {
                Some((last, acc)) if *last == k => *acc = (*acc + c) % p,
                _ => out.push((k, c)),
            }
        }
        out.retain(|&(_, c)| c != 0);
        self.terms = out;
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn terms(&self) -> &[(PureKey, u64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn check_depth(&self, other: &Derivation) -> Result<()> {
        if self.depth != other.depth {
            return Err(Error::ContextMismatch(format!(
                "derivation depths differ: {} vs {}",
                self.depth, other.depth
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Derivation, p: u64) -> Result<Derivation> {
        self.check_depth(other)?;
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(Derivation::from_terms(self.depth, terms, p))
    }

    pub fn sub(&self, other: &Derivation, p: u64) -> Result<Derivation> {
        self.add(&other.scale(p - 1, p), p)
    }

    pub fn scale(&self, c: u64, p: u64) -> Derivation {
        let c = c % p;
        if c == 0 {
            return Derivation::zero(self.depth);
        }
        Derivation {
            depth: self.depth,
            terms: self.terms.iter().map(|(k, v)| (k.clone(), v * c % p)).collect(),
        }
    }

    /// Left-multiplies by a monomial: `t^m * w`. Cancellations follow the
    /// Lucas product; targets are untouched, so the depth is unchanged.
    pub fn mul_mono(&self, m: &DPMonomial, ctx: &Ctx) -> Derivation {
        if m.is_unit() {
            return self.clone();
        }
        let p = ctx.p();
        let mut terms = Vec::with_capacity(self.terms.len());
        for (k, c) in &self.terms {
            if let Some((coef, tail)) = m.mul(&k.tail, &ctx.fp, &ctx.tuple) {
                terms.push((PureKey::new(tail, k.target, k.power), c * coef % p));
            }
        }
        Derivation::from_terms(self.depth, terms, p)
    }

    /// Applies the derivation to a ring element supported on generations
    /// within this truncation depth.
    pub fn act(&self, r: &RingElement, ctx: &Ctx) -> Result<RingElement> {
        for (m, _) in r.terms() {
            if m.max_generation() > self.depth {
                return Err(Error::DepthViolation(format!(
                    "ring element touches generation {} beyond depth {}",
                    m.max_generation(),
                    self.depth
                )));
            }
        }
        let p = ctx.p();
        let mut out = Vec::new();
        for (key, c) in &self.terms {
            for (m, s) in r.terms() {
                let db = m.apply_partial(key.target, key.power, &ctx.fp, &ctx.tuple)?;
                if let Some(m1) = db {
                    if let Some((k, prod)) = key.tail.mul(&m1, &ctx.fp, &ctx.tuple) {
                        out.push((prod, c * s % p * k % p));
                    }
                }
            }
        }
        Ok(RingElement::from_terms(out, &ctx.fp))
    }

    /// The Lie bracket, expanded bilinearly over the two-term commutation rule
    /// for pure monomials.
    pub fn bracket(&self, other: &Derivation, ctx: &Ctx) -> Result<Derivation> {
        self.check_depth(other)?;
        let p = ctx.p();
        let mut acc: HashMap<PureKey, u64> = HashMap::new();
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                let c = ca * cb % p;
                // + t^a (D_a tail_b) D_b
                if let Some(b1) = kb.tail.apply_partial(ka.target, ka.power, &ctx.fp, &ctx.tuple)? {
                    if let Some((k, tail)) = ka.tail.mul(&b1, &ctx.fp, &ctx.tuple) {
                        let e = acc.entry(PureKey::new(tail, kb.target, kb.power)).or_insert(0);
                        *e = (*e + c * k) % p;
                    }
                }
                // - t^b (D_b tail_a) D_a
                if let Some(a1) = ka.tail.apply_partial(kb.target, kb.power, &ctx.fp, &ctx.tuple)? {
                    if let Some((k, tail)) = kb.tail.mul(&a1, &ctx.fp, &ctx.tuple) {
                        let e = acc.entry(PureKey::new(tail, ka.target, ka.power)).or_insert(0);
                        *e = (*e + (p - 1) * (c * k % p)) % p;
                    }
                }
            }
        }
        let terms: Vec<(PureKey, u64)> = acc.into_iter().filter(|&(_, c)| c != 0).collect();
        Ok(Derivation::from_terms(self.depth, terms, p))
    }

    /// The restricted p-th power. A single pure monomial powers to zero when
    /// it carries a tail, and to the next-order partial otherwise; sums
    /// recurse by halving with the correction terms s_i(x, y) read off as
    /// coefficients of the formal polynomial ad(tx + y)^(p-1) (x).
    pub fn p_power(&self, ctx: &Ctx) -> Result<Derivation> {
        let p = ctx.p();
        match self.terms.len() {
            0 => Ok(Derivation::zero(self.depth)),
            1 => {
                let (key, c) = &self.terms[0];
                if !key.tail.is_unit() {
                    return Ok(Derivation::zero(self.depth));
                }
                if key.power + 1 >= ctx.cap(key.target) {
                    return Ok(Derivation::zero(self.depth));
                }
                let coeff = ctx.fp.pow(*c, p);
                Ok(Derivation::pure(
                    self.depth,
                    coeff,
                    DPMonomial::unit(),
                    key.target,
                    key.power + 1,
                ))
            }
            n => {
                let x = Derivation { depth: self.depth, terms: self.terms[..n / 2].to_vec() };
                let y = Derivation { depth: self.depth, terms: self.terms[n / 2..].to_vec() };
                let mut out = x.p_power(ctx)?.add(&y.p_power(ctx)?, p)?;
                out = out.add(&jacobson_corrections(&x, &y, ctx)?, p)?;
                Ok(out)
            }
        }
    }

    /// Iterated restricted power `w^(p^m)`.
    pub fn p_power_iter(&self, m: u32, ctx: &Ctx) -> Result<Derivation> {
        let mut w = self.clone();
        for _ in 0..m {
            w = w.p_power(ctx)?;
        }
        Ok(w)
    }

    /// Restriction onto the subspecie of generations <= d2: drops every term
    /// whose target lies deeper. A homomorphism for bracket and p-power.
    pub fn restrict(&self, d2: u32) -> Result<Derivation> {
        if d2 > self.depth {
            return Err(Error::DepthViolation(format!(
                "cannot restrict depth {} to larger depth {}",
                self.depth, d2
            )));
        }
        Ok(Derivation {
            depth: d2,
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| k.target.gen <= d2)
                .cloned()
                .collect(),
        })
    }

    /// Re-tags the truncation depth upward without adding terms. Sound when
    /// the receiver is known to equal its own deeper truncation (e.g. sums of
    /// bare partials of low generation are exact at any depth).
    pub fn lift(&self, d2: u32) -> Result<Derivation> {
        if d2 < self.depth {
            return Err(Error::DepthViolation(format!(
                "lift target {} below current depth {}",
                d2, self.depth
            )));
        }
        Ok(Derivation { depth: d2, terms: self.terms.clone() })
    }

    pub fn is_ancestral(&self, specie: &Specie) -> bool {
        self.terms.iter().all(|(k, _)| k.is_ancestral(specie))
    }

    /// All flies appearing as targets or in tails.
    pub fn support_vars(&self) -> BTreeSet<FlyId> {
        let mut vars = BTreeSet::new();
        for (k, _) in &self.terms {
            vars.insert(k.target);
            for &(a, _) in k.tail.entries() {
                vars.insert(a);
            }
        }
        vars
    }

    /// Text dump `+ t[1]^(1)*D[12]^(2^0)`-style, deterministic term order.
    pub fn display(&self, ctx: &Ctx) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let p = ctx.p();
        self.terms
            .iter()
            .map(|(k, c)| {
                let mut s = String::from("+ ");
                if *c != 1 {
                    s.push_str(&format!("{c}*"));
                }
                if !k.tail.is_unit() {
                    s.push_str(&k.tail.display(&ctx.specie));
                    s.push('*');
                }
                s.push_str(&format!(
                    "D[{}]^({}^{})",
                    ctx.specie.word_string(k.target),
                    p,
                    k.power
                ));
                s
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Sum of the Jacobson correction terms s_1(x, y) + ... + s_{p-1}(x, y):
/// i * s_i is the coefficient of t^(i-1) in ad(tx + y)^(p-1) (x), computed
/// over a degree-tracked polynomial with derivation coefficients.
fn jacobson_corrections(x: &Derivation, y: &Derivation, ctx: &Ctx) -> Result<Derivation> {
    let p = ctx.p();
    let depth = x.depth;
    let mut poly: Vec<Derivation> = vec![x.clone()];
    for _ in 1..p {
        let mut next: Vec<Derivation> = Vec::with_capacity(poly.len() + 1);
        for j in 0..=poly.len() {
            let mut term = Derivation::zero(depth);
            if j >= 1 {
                term = term.add(&x.bracket(&poly[j - 1], ctx)?, p)?;
            }
            if j < poly.len() {
                term = term.add(&y.bracket(&poly[j], ctx)?, p)?;
            }
            next.push(term);
        }
        poly = next;
    }
    let mut total = Derivation::zero(depth);
    for i in 1..p {
        total = total.add(&poly[(i - 1) as usize].scale(ctx.fp.inv(i), p), p)?;
    }
    Ok(total)
}

/// Explicit basis of a finite divided-power ring on a chosen variable set,
/// encoded in mixed radix. The full matrix representation on this basis is
/// exact whenever the acting derivations are supported on the variable set.
#[derive(Clone, Debug)]
pub struct SmallRing {
    vars: Vec<FlyId>,
    cap_pows: Vec<u64>,
    strides: Vec<u64>,
    size: u64,
    index: HashMap<FlyId, usize>,
}

impl SmallRing {
    /// Ring on all flies of generation <= depth.
    pub fn full(ctx: &Ctx, depth: u32, limit: u64) -> Result<SmallRing> {
        let mut vars = Vec::new();
        for g in 0..=depth {
            for i in 0..ctx.specie.gen_size(g)? {
                vars.push(FlyId::new(g, i));
            }
        }
        Self::on_vars(ctx, vars, limit)
    }

    /// Ring on an explicit variable set.
    pub fn on_vars(ctx: &Ctx, mut vars: Vec<FlyId>, limit: u64) -> Result<SmallRing> {
        vars.sort_unstable();
        vars.dedup();
        let mut size: u64 = 1;
        let mut strides = Vec::with_capacity(vars.len());
        let mut cap_pows = Vec::with_capacity(vars.len());
        for &a in &vars {
            let cp = ctx.cap_pow(a);
            strides.push(size);
            cap_pows.push(cp);
            size = size.checked_mul(cp).filter(|&s| s <= limit).ok_or_else(|| {
                Error::ResourceLimit(format!(
                    "monomial basis exceeds limit {limit} on {} variables",
                    vars.len()
                ))
            })?;
        }
        let index = vars.iter().enumerate().map(|(i, &a)| (a, i)).collect();
        Ok(SmallRing { vars, cap_pows, strides, size, index })
    }

    pub fn size(&self) -> u64 {
        self.size
    }

    pub fn vars(&self) -> &[FlyId] {
        &self.vars
    }

    pub fn contains_var(&self, a: FlyId) -> bool {
        self.index.contains_key(&a)
    }

    pub fn encode(&self, m: &DPMonomial) -> Option<u64> {
        let mut code = 0;
        for &(a, e) in m.entries() {
            let i = *self.index.get(&a)?;
            debug_assert!(e < self.cap_pows[i]);
            code += e * self.strides[i];
        }
        Some(code)
    }

    pub fn decode(&self, mut code: u64) -> DPMonomial {
        let mut entries = Vec::new();
        for i in 0..self.vars.len() {
            let e = code % self.cap_pows[i];
            code /= self.cap_pows[i];
            if e != 0 {
                entries.push((self.vars[i], e));
            }
        }
        DPMonomial::from_entries(entries).unwrap()
    }
}

/// Column-sparse matrix of a linear operator on a [`SmallRing`] basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseOp {
    pub size: u64,
    /// cols[c] = sorted (row, value) pairs of the image of basis monomial c.
    pub cols: Vec<Vec<(u32, u64)>>,
}

impl SparseOp {
    pub fn zero(size: u64) -> Self {
        SparseOp { size, cols: vec![Vec::new(); size as usize] }
    }

    pub fn is_zero(&self) -> bool {
        self.cols.iter().all(|c| c.is_empty())
    }

    pub fn add(&self, other: &SparseOp, p: u64) -> SparseOp {
        assert_eq!(self.size, other.size);
        let cols = self
            .cols
            .iter()
            .zip(&other.cols)
            .map(|(a, b)| merge_scaled(a, b, 1, p))
            .collect();
        SparseOp { size: self.size, cols }
    }

    pub fn sub(&self, other: &SparseOp, p: u64) -> SparseOp {
        assert_eq!(self.size, other.size);
        let cols = self
            .cols
            .iter()
            .zip(&other.cols)
            .map(|(a, b)| merge_scaled(a, b, p - 1, p))
            .collect();
        SparseOp { size: self.size, cols }
    }

    /// Operator composition `self . other` (apply `other` first).
    pub fn compose(&self, other: &SparseOp, p: u64) -> SparseOp {
        assert_eq!(self.size, other.size);
        let mut cols = Vec::with_capacity(other.cols.len());
        let mut acc: HashMap<u32, u64> = HashMap::new();
        for bc in &other.cols {
            acc.clear();
            for &(k, v) in bc {
                for &(r, w) in &self.cols[k as usize] {
                    *acc.entry(r).or_insert(0) = (acc.get(&r).copied().unwrap_or(0) + v * w) % p;
                }
            }
            let mut col: Vec<(u32, u64)> =
                acc.iter().filter(|&(_, &v)| v != 0).map(|(&r, &v)| (r, v)).collect();
            col.sort_unstable();
            cols.push(col);
        }
        SparseOp { size: self.size, cols }
    }

    pub fn commutator(&self, other: &SparseOp, p: u64) -> SparseOp {
        self.compose(other, p).sub(&other.compose(self, p), p)
    }

    pub fn pow(&self, e: u32, p: u64) -> SparseOp {
        let mut out = self.clone();
        for _ in 1..e {
            out = out.compose(self, p);
        }
        out
    }

    /// Flattened sparse coordinates (col * size + row -> value), for rank
    /// computations over sets of operators.
    pub fn flatten(&self) -> Vec<(u64, u64)> {
        let mut out = Vec::new();
        for (c, col) in self.cols.iter().enumerate() {
            for &(r, v) in col {
                out.push(((c as u64) * self.size + r as u64, v));
            }
        }
        out
    }
}

fn merge_scaled(a: &[(u32, u64)], b: &[(u32, u64)], scale: u64, p: u64) -> Vec<(u32, u64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(&(ra, va)), Some(&(rb, vb))) if ra == rb => {
                let v = (va + vb * scale) % p;
                if v != 0 {
                    out.push((ra, v));
                }
                i += 1;
                j += 1;
            }
            (Some(&(ra, va)), Some(&(rb, _))) if ra < rb => {
                out.push((ra, va));
                i += 1;
            }
            (Some(_), Some(&(rb, vb))) => {
                let v = vb * scale % p;
                if v != 0 {
                    out.push((rb, v));
                }
                j += 1;
            }
            (Some(&(ra, va)), None) => {
                out.push((ra, va));
                i += 1;
            }
            (None, Some(&(rb, vb))) => {
                let v = vb * scale % p;
                if v != 0 {
                    out.push((rb, v));
                }
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

/// Matrix of the action of `w` on the full monomial basis of `ring`. The
/// derivation must be supported (targets and tails) on the ring variables;
/// subring columns are then exact because the action preserves the span.
pub fn operator_matrix(w: &Derivation, ring: &SmallRing, ctx: &Ctx) -> Result<SparseOp> {
    for a in w.support_vars() {
        if !ring.contains_var(a) {
            return Err(Error::ContextMismatch(format!(
                "derivation touches fly ({}, {}) outside the ring basis",
                a.gen, a.idx
            )));
        }
    }
    let p = ctx.p();
    let mut cols = Vec::with_capacity(ring.size() as usize);
    for code in 0..ring.size() {
        let m = ring.decode(code);
        let mut acc: HashMap<u32, u64> = HashMap::new();
        for (key, c) in w.terms() {
            if let Some(m1) = m.apply_partial(key.target, key.power, &ctx.fp, &ctx.tuple)? {
                if let Some((k, prod)) = key.tail.mul(&m1, &ctx.fp, &ctx.tuple) {
                    let row = ring.encode(&prod).expect("closed under supported action");
                    let e = acc.entry(row as u32).or_insert(0);
                    *e = (*e + c * k) % p;
                }
            }
        }
        let mut col: Vec<(u32, u64)> =
            acc.into_iter().filter(|&(_, v)| v != 0).collect();
        col.sort_unstable();
        cols.push(col);
    }
    Ok(SparseOp { size: ring.size(), cols })
}
