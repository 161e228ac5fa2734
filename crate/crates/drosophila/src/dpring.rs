//! Exact arithmetic in the divided power truncated ring over F_p: Lucas
//! products, p-adic norms, and partial-derivative actions on monomials.

use crate::species::{FlyId, Specie};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// The prime field F_p with scalars stored as residues in [0, p).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeField {
    p: u64,
}

impl PrimeField {
    pub fn new(p: u64) -> Result<Self> {
        if p < 2 || p >= (1 << 31) {
            return Err(Error::InvalidArgument(format!("characteristic {p} out of range")));
        }
        let mut d = 2;
        while d * d <= p {
            if p % d == 0 {
                return Err(Error::InvalidArgument(format!("{p} is not prime")));
            }
            d += 1;
        }
        Ok(PrimeField { p })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn reduce(&self, x: u64) -> u64 {
        x % self.p
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        (a + b) % self.p
    }

    pub fn sub(&self, a: u64, b: u64) -> u64 {
        (a + self.p - b) % self.p
    }

    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        a * b % self.p
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1;
        base %= self.p;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: u64) -> u64 {
        assert!(a % self.p != 0, "division by zero in F_{}", self.p);
        self.pow(a, self.p - 2)
    }
}

/// Binomial coefficient C(m, n) modulo p via the digit-by-digit product rule:
/// the product over base-p digits of C(m_i, n_i).
pub fn lucas_binomial(m: u64, n: u64, p: u64) -> u64 {
    let fp = PrimeField { p };
    let (mut m, mut n) = (m, n);
    let mut acc = 1;
    while (m > 0 || n > 0) && acc != 0 {
        let (md, nd) = (m % p, n % p);
        acc = fp.mul(acc, small_binomial(md, nd, &fp));
        m /= p;
        n /= p;
    }
    acc
}

/// C(a, b) mod p for digits a, b < p.
fn small_binomial(a: u64, b: u64, fp: &PrimeField) -> u64 {
    if b > a {
        return 0;
    }
    let b = b.min(a - b);
    let mut num = 1;
    let mut den = 1;
    for i in 0..b {
        num = fp.mul(num, fp.reduce(a - i));
        den = fp.mul(den, fp.reduce(i + 1));
    }
    fp.mul(num, fp.inv(den))
}

/// Base-p digit sum of a single exponent.
pub fn p_adic_norm(xi: u64, p: u64) -> u64 {
    let mut xi = xi;
    let mut s = 0;
    while xi > 0 {
        s += xi % p;
        xi /= p;
    }
    s
}

/// Cap exponents S_a >= 1 per fly, stored per generation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExponentTuple {
    caps: Vec<Vec<u32>>,
}

impl ExponentTuple {
    /// S_a = 1 for every fly.
    pub fn trivial(specie: &Specie) -> Self {
        Self::constant(specie, 1)
    }

    pub fn constant(specie: &Specie, s: u32) -> Self {
        assert!(s >= 1, "cap exponents must be positive");
        let caps = (0..specie.generations())
            .map(|g| vec![s; specie.gen_size(g).unwrap() as usize])
            .collect();
        ExponentTuple { caps }
    }

    /// Arbitrary assignment. The callback must return a positive cap.
    pub fn custom(specie: &Specie, f: impl Fn(FlyId) -> u32) -> Result<Self> {
        let mut caps = Vec::new();
        for g in 0..specie.generations() {
            let mut row = Vec::new();
            for i in 0..specie.gen_size(g).unwrap() {
                let s = f(FlyId::new(g, i));
                if s == 0 {
                    return Err(Error::InvalidArgument(format!(
                        "cap of fly ({g}, {i}) must be positive"
                    )));
                }
                row.push(s);
            }
            caps.push(row);
        }
        Ok(ExponentTuple { caps })
    }

    /// Per-generation (S_n, R_n) assignment. When S_n = R_n every fly of the
    /// generation receives S_n. When they differ the generation must carry
    /// clover labels; the a-fly receives S_n and the b-, c-flies R_n, so every
    /// child has one parent of each cap.
    pub fn from_generation_caps(specie: &Specie, pairs: &[(u32, u32)]) -> Result<Self> {
        if (pairs.len() as u32) < specie.generations() {
            return Err(Error::InvalidArgument(format!(
                "need caps for {} generations, got {}",
                specie.generations(),
                pairs.len()
            )));
        }
        let mut caps = Vec::new();
        for g in 0..specie.generations() {
            let (s, r) = pairs[g as usize];
            if s == 0 || r == 0 {
                return Err(Error::InvalidArgument(format!(
                    "caps at generation {g} must be positive, got ({s}, {r})"
                )));
            }
            let size = specie.gen_size(g).unwrap() as usize;
            if s == r {
                caps.push(vec![s; size]);
                continue;
            }
            let labels = specie.clover_labels(g).ok_or_else(|| {
                Error::NotApplicable(format!(
                    "distinct caps ({s}, {r}) at generation {g} require clover labels \
                     so that children pair across the split"
                ))
            })?;
            let mut row = vec![r; size];
            row[labels[0] as usize] = s;
            caps.push(row);
        }
        Ok(ExponentTuple { caps })
    }

    pub fn check_covers(&self, specie: &Specie) -> Result<()> {
        for g in 0..specie.generations() {
            let have = self.caps.get(g as usize).map(|r| r.len() as u32).unwrap_or(0);
            let need = specie.gen_size(g).unwrap();
            if have != need {
                return Err(Error::ContextMismatch(format!(
                    "tuple covers {have} flies of generation {g}, specie has {need}"
                )));
            }
        }
        Ok(())
    }

    pub fn cap(&self, a: FlyId) -> u32 {
        self.caps[a.gen as usize][a.idx as usize]
    }

    /// p^{S_a} as u64; caps in practical use keep this well under 2^63.
    pub fn cap_pow(&self, p: u64, a: FlyId) -> u64 {
        let s = self.cap(a);
        assert!(
            (s as f64) * (p as f64).log2() < 63.0,
            "exponent bound p^{s} overflows"
        );
        p.pow(s)
    }

    /// The tuple for a specie rerooted at generation m: caps shifted down.
    pub fn reroot(&self, m: u32) -> ExponentTuple {
        ExponentTuple { caps: self.caps[m as usize..].to_vec() }
    }
}

/// A divided-power monomial: a sparse exponent assignment fly -> exponent,
/// zero exponents never stored, entries sorted by fly. The empty monomial is
/// the ring unit.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct DPMonomial {
    entries: Vec<(FlyId, u64)>,
}

impl DPMonomial {
    pub fn unit() -> Self {
        DPMonomial { entries: Vec::new() }
    }

    pub fn var(a: FlyId, e: u64) -> Self {
        if e == 0 {
            Self::unit()
        } else {
            DPMonomial { entries: vec![(a, e)] }
        }
    }

    /// Builds from arbitrary (fly, exponent) pairs; repeated flies are
    /// rejected, zero exponents dropped.
    pub fn from_entries(mut entries: Vec<(FlyId, u64)>) -> Result<Self> {
        entries.retain(|&(_, e)| e != 0);
        entries.sort_unstable_by_key(|&(a, _)| a);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument("repeated fly in monomial".into()));
        }
        Ok(DPMonomial { entries })
    }

    pub fn is_unit(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(FlyId, u64)] {
        &self.entries
    }

    pub fn exponent_of(&self, a: FlyId) -> u64 {
        self.entries
            .binary_search_by_key(&a, |&(b, _)| b)
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    pub fn max_generation(&self) -> u32 {
        self.entries.last().map(|&(a, _)| a.gen).unwrap_or(0)
    }

    /// Sum of base-p digit sums over all entries.
    pub fn norm(&self, p: u64) -> u64 {
        self.entries.iter().map(|&(_, e)| p_adic_norm(e, p)).sum()
    }

    /// Checks every exponent against its cap.
    pub fn validate(&self, fp: &PrimeField, tuple: &ExponentTuple) -> Result<()> {
        for &(a, e) in &self.entries {
            let bound = tuple.cap_pow(fp.p(), a);
            if e >= bound {
                return Err(Error::ContextMismatch(format!(
                    "exponent {e} of fly ({}, {}) exceeds bound {bound}",
                    a.gen, a.idx
                )));
            }
        }
        Ok(())
    }

    /// Product of two monomials: zero (None) whenever some shared fly's
    /// exponents add to the cap or beyond, or the digit product vanishes;
    /// otherwise the Lucas coefficient and the merged monomial.
    pub fn mul(
        &self,
        other: &DPMonomial,
        fp: &PrimeField,
        tuple: &ExponentTuple,
    ) -> Option<(u64, DPMonomial)> {
        let p = fp.p();
        let mut coeff = 1u64;
        let mut entries = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() || j < other.entries.len() {
            let take_left = match (self.entries.get(i), other.entries.get(j)) {
                (Some(&(a, _)), Some(&(b, _))) => {
                    if a == b {
                        let (_, ea) = self.entries[i];
                        let (_, eb) = other.entries[j];
                        let sum = ea + eb;
                        if sum >= tuple.cap_pow(p, a) {
                            return None;
                        }
                        coeff = fp.mul(coeff, lucas_binomial(sum, ea, p));
                        if coeff == 0 {
                            return None;
                        }
                        entries.push((a, sum));
                        i += 1;
                        j += 1;
                        continue;
                    }
                    a < b
                }
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => unreachable!(),
            };
            if take_left {
                entries.push(self.entries[i]);
                i += 1;
            } else {
                entries.push(other.entries[j]);
                j += 1;
            }
        }
        Some((coeff, DPMonomial { entries }))
    }

    /// Applies the divided partial derivative of order p^l in the variable of
    /// fly b: decrements the b-exponent by p^l with coefficient exactly 1.
    /// None when the exponent is too small. Error when l >= S_b (the operator
    /// is identically zero there and callers must not construct it).
    pub fn apply_partial(
        &self,
        b: FlyId,
        l: u32,
        fp: &PrimeField,
        tuple: &ExponentTuple,
    ) -> Result<Option<DPMonomial>> {
        if l >= tuple.cap(b) {
            return Err(Error::InvalidArgument(format!(
                "derivative order exponent {l} >= cap {} of the target fly",
                tuple.cap(b)
            )));
        }
        let step = fp.p().pow(l);
        match self.entries.binary_search_by_key(&b, |&(a, _)| a) {
            Err(_) => Ok(None),
            Ok(pos) => {
                let e = self.entries[pos].1;
                if e < step {
                    return Ok(None);
                }
                let mut entries = self.entries.clone();
                if e == step {
                    entries.remove(pos);
                } else {
                    entries[pos].1 = e - step;
                }
                Ok(Some(DPMonomial { entries }))
            }
        }
    }

    /// Debug/golden rendering: `t[12]^(3)*t[(12)(31)]^(1)`, entries ordered
    /// by (generation, word); the unit renders as `1`.
    pub fn display(&self, specie: &Specie) -> String {
        if self.entries.is_empty() {
            return "1".into();
        }
        let mut entries = self.entries.clone();
        entries.sort_by(|&(a, _), &(b, _)| specie.cmp_words(a, b));
        entries
            .iter()
            .map(|&(a, e)| format!("t[{}]^({})", specie.word_string(a), e))
            .collect::<Vec<_>>()
            .join("*")
    }
}

/// A finite F_p-combination of monomials with nonzero coefficients, kept in
/// canonical sorted order.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct RingElement {
    terms: Vec<(DPMonomial, u64)>,
}

impl RingElement {
    pub fn zero() -> Self {
        RingElement { terms: Vec::new() }
    }

    pub fn unit() -> Self {
        RingElement { terms: vec![(DPMonomial::unit(), 1)] }
    }

    pub fn monomial(m: DPMonomial, c: u64) -> Self {
        if c == 0 {
            Self::zero()
        } else {
            RingElement { terms: vec![(m, c)] }
        }
    }

    pub fn from_terms(terms: Vec<(DPMonomial, u64)>, fp: &PrimeField) -> Self {
        let mut el = RingElement { terms };
        el.normalize(fp);
        el
    }

    fn normalize(&mut self, fp: &PrimeField) {
        self.terms.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        let mut out: Vec<(DPMonomial, u64)> = Vec::with_capacity(self.terms.len());
        for (m, c) in self.terms.drain(..) {
            let c = fp.reduce(c);
            match out.last_mut() {
                Some((last, acc)) if *last == m => *acc = fp.add(*acc, c),
                _ => out.push((m, c)),
            }
        }
        out.retain(|&(_, c)| c != 0);
        self.terms = out;
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[(DPMonomial, u64)] {
        &self.terms
    }

    pub fn add(&self, other: &RingElement, fp: &PrimeField) -> RingElement {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        RingElement::from_terms(terms, fp)
    }

    pub fn scale(&self, c: u64, fp: &PrimeField) -> RingElement {
        let c = fp.reduce(c);
        if c == 0 {
            return RingElement::zero();
        }
        RingElement {
            terms: self.terms.iter().map(|(m, k)| (m.clone(), fp.mul(*k, c))).collect(),
        }
    }

    pub fn mul(&self, other: &RingElement, fp: &PrimeField, tuple: &ExponentTuple) -> RingElement {
        let mut terms = Vec::new();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                if let Some((k, m)) = m1.mul(m2, fp, tuple) {
                    terms.push((m, fp.mul(fp.mul(*c1, *c2), k)));
                }
            }
        }
        RingElement::from_terms(terms, fp)
    }

    pub fn display(&self, specie: &Specie) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut terms: Vec<&(DPMonomial, u64)> = self.terms.iter().collect();
        terms.sort_by(|x, y| {
            x.0.entries()
                .len()
                .cmp(&y.0.entries().len())
                .then_with(|| x.0.cmp(&y.0))
        });
        terms
            .iter()
            .map(|(m, c)| {
                if *c == 1 && !m.is_unit() {
                    format!("+ {}", m.display(specie))
                } else if m.is_unit() {
                    format!("+ {c}")
                } else {
                    format!("+ {}*{}", c, m.display(specie))
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}
