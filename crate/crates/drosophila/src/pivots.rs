//! Virtual and actual pivot elements at a fixed truncation depth, and the
//! machine verification of their structural relations: power expansions,
//! bracket expansions, head decompositions, congruence supports, labelled
//! three-fly chain identities, and linear independence.

use crate::deriv::{Derivation, PureKey};
use crate::dpring::DPMonomial;
use crate::species::FlyId;
use crate::{Ctx, Error, Result};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

/// Memoized pivot elements of one species/tuple pair at one truncation depth.
/// Returned derivations are immutable snapshots; the memo tables sit behind
/// mutexes so a set can be shared across threads.
pub struct PivotSet<'a> {
    ctx: &'a Ctx,
    depth: u32,
    bracket_limit: u64,
    virtuals: Mutex<HashMap<FlyId, Derivation>>,
    actuals: Mutex<HashMap<FlyId, Derivation>>,
}

impl<'a> PivotSet<'a> {
    pub fn new(ctx: &'a Ctx, depth: u32) -> Result<Self> {
        if depth > ctx.specie.last_gen() {
            return Err(Error::NeedsExtension { needed: depth, have: ctx.specie.last_gen() });
        }
        Ok(PivotSet {
            ctx,
            depth,
            bracket_limit: 1 << 16,
            virtuals: Mutex::new(HashMap::new()),
            actuals: Mutex::new(HashMap::new()),
        })
    }

    pub fn with_bracket_limit(mut self, limit: u64) -> Self {
        self.bracket_limit = limit;
        self
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn ctx(&self) -> &Ctx {
        self.ctx
    }

    /// The truncated sum over paternal descendants of `a`: the term at
    /// descendant d carries one maximal-power variable for each of the two
    /// parents of every link in the father chain from d up to a.
    pub fn virtual_pivot(&self, a: FlyId) -> Result<Derivation> {
        self.ctx.specie.check_fly(a)?;
        if a.gen > self.depth {
            return Err(Error::DepthViolation(format!(
                "fly of generation {} above truncation depth {}",
                a.gen, self.depth
            )));
        }
        if let Some(v) = self.virtuals.lock().unwrap().get(&a) {
            return Ok(v.clone());
        }
        let p = self.ctx.p();
        let mut v = Derivation::partial(self.depth, a, 0);
        if a.gen < self.depth {
            let pa = self.ctx.cap_pow(a);
            let children: Vec<FlyId> = self
                .ctx
                .specie
                .children_as_father(a)
                .iter()
                .map(|&i| FlyId::new(a.gen + 1, i))
                .collect();
            for e in children {
                let (_, m) = self.ctx.specie.parents(e).expect("child has parents");
                let ve = self.virtual_pivot(e)?;
                let mono = DPMonomial::from_entries(vec![
                    (a, pa - 1),
                    (m, self.ctx.cap_pow(m) - 1),
                ])?;
                v = v.add(&ve.mul_mono(&mono, self.ctx), p)?;
            }
        }
        self.virtuals.lock().unwrap().insert(a, v.clone());
        Ok(v)
    }

    /// Generation-0 actual pivots coincide with virtual ones; deeper ones are
    /// built from parent actual pivots by the iterated bracket of the
    /// mother's pivot against the father's top p-power.
    pub fn actual_pivot(&self, c: FlyId) -> Result<Derivation> {
        self.ctx.specie.check_fly(c)?;
        if c.gen > self.depth {
            return Err(Error::DepthViolation(format!(
                "fly of generation {} above truncation depth {}",
                c.gen, self.depth
            )));
        }
        if c.gen == 0 {
            return self.virtual_pivot(c);
        }
        if let Some(v) = self.actuals.lock().unwrap().get(&c) {
            return Ok(v.clone());
        }
        let (a, b) = self.ctx.specie.parents(c).expect("non-root fly has parents");
        let va = self.actual_pivot(a)?;
        let vb = self.actual_pivot(b)?;
        let v = self.ad_power_bracket(&vb, &va, b, a)?;
        self.actuals.lock().unwrap().insert(c, v.clone());
        Ok(v)
    }

    /// (ad y)^(p^{S_b} - 1) (x^(p^{S_a})) for pivots y, x of flies b, a.
    fn ad_power_bracket(
        &self,
        y: &Derivation,
        x: &Derivation,
        b: FlyId,
        a: FlyId,
    ) -> Result<Derivation> {
        let times = self.ctx.cap_pow(b) - 1;
        if times > self.bracket_limit {
            return Err(Error::ResourceLimit(format!(
                "iterated bracket needs {} applications, limit {}",
                times, self.bracket_limit
            )));
        }
        let mut w = x.p_power_iter(self.ctx.cap(a), self.ctx)?;
        for _ in 0..times {
            w = y.bracket(&w, self.ctx)?;
        }
        Ok(w)
    }

    /// Mother-variable child sum of the power expansion:
    /// sum over children e = ac of t_c^(p^{S_c}-1) v_e.
    fn child_sum(&self, a: FlyId) -> Result<Derivation> {
        let p = self.ctx.p();
        let mut z = Derivation::zero(self.depth);
        if a.gen >= self.depth {
            return Ok(z);
        }
        for &i in self.ctx.specie.children_as_father(a) {
            let e = FlyId::new(a.gen + 1, i);
            let (_, c) = self.ctx.specie.parents(e).expect("child has parents");
            let ve = self.virtual_pivot(e)?;
            let mono = DPMonomial::var(c, self.ctx.cap_pow(c) - 1);
            z = z.add(&ve.mul_mono(&mono, self.ctx), p)?;
        }
        Ok(z)
    }

    /// Right-hand side of the power expansion of v_a^(p^m), 0 <= m <= S_a.
    pub fn power_expansion_rhs(&self, a: FlyId, m: u32) -> Result<Derivation> {
        let sa = self.ctx.cap(a);
        if m > sa {
            return Err(Error::InvalidArgument(format!("power {m} exceeds cap {sa}")));
        }
        let z = self.child_sum(a)?;
        if m == sa {
            return Ok(z);
        }
        let p = self.ctx.p();
        let pa = self.ctx.cap_pow(a);
        let head = Derivation::partial(self.depth, a, m);
        let factor = DPMonomial::var(a, pa - p.pow(m));
        head.add(&z.mul_mono(&factor, self.ctx), p)
    }
}

pub fn virtual_pivot(ctx: &Ctx, a: FlyId, depth: u32) -> Result<Derivation> {
    PivotSet::new(ctx, depth)?.virtual_pivot(a)
}

pub fn actual_pivot(ctx: &Ctx, c: FlyId, depth: u32) -> Result<Derivation> {
    PivotSet::new(ctx, depth)?.actual_pivot(c)
}

/// Enumeration caps for the verification suite; relations are checked on the
/// first flies/pairs of each generation in index order, so runs on large
/// species stay bounded while small species are covered exhaustively.
#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub max_flies_per_gen: usize,
    pub max_pairs_per_gen: usize,
    pub max_independence_flies: usize,
    pub bracket_limit: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            max_flies_per_gen: 16,
            max_pairs_per_gen: 60,
            max_independence_flies: 48,
            bracket_limit: 1 << 16,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, Serialize)]
pub struct RelationReport {
    pub relation: String,
    pub status: RelationStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub depth: u32,
    pub relations: Vec<RelationReport>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.relations.iter().all(|r| r.status != RelationStatus::Fail)
    }
}

struct SuiteRunner<'a> {
    ps: PivotSet<'a>,
    opts: SuiteOptions,
}

impl<'a> SuiteRunner<'a> {
    fn ctx(&self) -> &Ctx {
        self.ps.ctx
    }

    fn flies(&self, gen: u32, cap: usize) -> Vec<FlyId> {
        let size = self.ctx().specie.gen_size(gen).unwrap_or(0) as usize;
        (0..size.min(cap)).map(|i| FlyId::new(gen, i as u32)).collect()
    }

    fn pairs(&self, gen: u32) -> Vec<(FlyId, FlyId)> {
        let size = self.ctx().specie.gen_size(gen).unwrap_or(0);
        let mut out = Vec::new();
        'outer: for i in 0..size {
            for j in 0..size {
                if i == j {
                    continue;
                }
                out.push((FlyId::new(gen, i), FlyId::new(gen, j)));
                if out.len() >= self.opts.max_pairs_per_gen {
                    break 'outer;
                }
            }
        }
        out
    }

    fn name(&self, a: FlyId) -> String {
        self.ctx().specie.word_string(a)
    }

    /// v_a^(p^m) against its expansion, all m up to the cap.
    fn check_power_expansion(&self) -> Result<Option<String>> {
        let p = self.ctx().p();
        for gen in 0..=self.ps.depth {
            for a in self.flies(gen, self.opts.max_flies_per_gen) {
                let va = self.ps.virtual_pivot(a)?;
                for m in 0..=self.ctx().cap(a) {
                    let lhs = va.p_power_iter(m, self.ctx())?;
                    let rhs = self.ps.power_expansion_rhs(a, m)?;
                    if lhs != rhs {
                        return Ok(Some(format!(
                            "a={}, m={}: difference {}",
                            self.name(a),
                            m,
                            first_term(&lhs.sub(&rhs, p)?, self.ctx())
                        )));
                    }
                }
            }
        }
        Ok(None)
    }

    /// Correction sum over child pairs ac, bd: t_c^(max) t_d^(max) [v_bd, v_ac],
    /// with an optional pairwise-distinctness restriction on {a, b, c, d}.
    fn cross_bracket_sum(&self, a: FlyId, b: FlyId, distinct: bool) -> Result<Derivation> {
        let p = self.ctx().p();
        let mut sum = Derivation::zero(self.ps.depth);
        for &i in self.ctx().specie.children_as_father(a) {
            let ac = FlyId::new(a.gen + 1, i);
            let (_, c) = self.ctx().specie.parents(ac).unwrap();
            for &j in self.ctx().specie.children_as_father(b) {
                let bd = FlyId::new(b.gen + 1, j);
                let (_, d) = self.ctx().specie.parents(bd).unwrap();
                if distinct && (c == b || d == a || c == d) {
                    continue;
                }
                let term = self
                    .ps
                    .virtual_pivot(bd)?
                    .bracket(&self.ps.virtual_pivot(ac)?, self.ctx())?;
                let mono = DPMonomial::from_entries(vec![
                    (c, self.ctx().cap_pow(c) - 1),
                    (d, self.ctx().cap_pow(d) - 1),
                ]);
                // c = d would need merged exponents; that product vanishes.
                if let Ok(mono) = mono {
                    sum = sum.add(&term.mul_mono(&mono, self.ctx()), p)?;
                }
            }
        }
        Ok(sum)
    }

    fn virtual_or_zero(&self, child: Option<FlyId>) -> Result<Derivation> {
        match child {
            Some(c) if c.gen <= self.ps.depth => self.ps.virtual_pivot(c),
            _ => Ok(Derivation::zero(self.ps.depth)),
        }
    }

    /// (ad v_b)^(p^{S_b}-1)(v_a^(p^{S_a})) = v_ab + t_b^(1) * correction.
    fn check_power_bracket(&self) -> Result<Option<String>> {
        let p = self.ctx().p();
        for gen in 0..self.ps.depth {
            for (a, b) in self.pairs(gen) {
                let va = self.ps.virtual_pivot(a)?;
                let vb = self.ps.virtual_pivot(b)?;
                let lhs = self.ps.ad_power_bracket(&vb, &va, b, a)?;
                let vab = self.virtual_or_zero(self.ctx().specie.child_of(a, b))?;
                let corr = self
                    .cross_bracket_sum(a, b, false)?
                    .mul_mono(&DPMonomial::var(b, 1), self.ctx());
                let rhs = vab.add(&corr, p)?;
                if lhs != rhs {
                    return Ok(Some(format!(
                        "a={}, b={}: difference {}",
                        self.name(a),
                        self.name(b),
                        first_term(&lhs.sub(&rhs, p)?, self.ctx())
                    )));
                }
            }
        }
        Ok(None)
    }

    /// [v_b, v_a] head decomposition with the distinct-letter correction sum.
    fn check_bracket_head(&self) -> Result<Option<String>> {
        let p = self.ctx().p();
        for gen in 0..self.ps.depth {
            for (a, b) in self.pairs(gen) {
                let va = self.ps.virtual_pivot(a)?;
                let vb = self.ps.virtual_pivot(b)?;
                let lhs = vb.bracket(&va, self.ctx())?;
                let pa = self.ctx().cap_pow(a);
                let pb = self.ctx().cap_pow(b);
                let vab = self.virtual_or_zero(self.ctx().specie.child_of(a, b))?;
                let vba = self.virtual_or_zero(self.ctx().specie.child_of(b, a))?;
                let t1 = vab.mul_mono(
                    &DPMonomial::from_entries(vec![(a, pa - 1), (b, pb - 2)])?,
                    self.ctx(),
                );
                let t2 = vba.mul_mono(
                    &DPMonomial::from_entries(vec![(a, pa - 2), (b, pb - 1)])?,
                    self.ctx(),
                );
                let t3 = self.cross_bracket_sum(a, b, true)?.mul_mono(
                    &DPMonomial::from_entries(vec![(a, pa - 1), (b, pb - 1)])?,
                    self.ctx(),
                );
                let rhs = t1.sub(&t2, p)?.add(&t3, p)?;
                if lhs != rhs {
                    return Ok(Some(format!(
                        "a={}, b={}: difference {}",
                        self.name(a),
                        self.name(b),
                        first_term(&lhs.sub(&rhs, p)?, self.ctx())
                    )));
                }
            }
        }
        Ok(None)
    }

    /// The bracket expansion minus v_ab is supported on terms divisible by
    /// t_b with target generation >= gen + 2.
    fn check_difference_support(&self) -> Result<Option<String>> {
        let p = self.ctx().p();
        for gen in 0..self.ps.depth {
            for (a, b) in self.pairs(gen) {
                let va = self.ps.virtual_pivot(a)?;
                let vb = self.ps.virtual_pivot(b)?;
                let lhs = self.ps.ad_power_bracket(&vb, &va, b, a)?;
                let vab = self.virtual_or_zero(self.ctx().specie.child_of(a, b))?;
                let diff = lhs.sub(&vab, p)?;
                for (key, _) in diff.terms() {
                    if key.tail.exponent_of(b) == 0 || key.target.gen < gen + 2 {
                        return Ok(Some(format!(
                            "a={}, b={}: stray term {}",
                            self.name(a),
                            self.name(b),
                            Derivation::pure(
                                self.ps.depth,
                                1,
                                key.tail.clone(),
                                key.target,
                                key.power
                            )
                            .display(self.ctx())
                        )));
                    }
                }
            }
        }
        Ok(None)
    }

    /// Labels of a generation produced by the three-fly chain rule, if the
    /// next generation matches that rule's parent pattern exactly.
    fn chain_labels(&self, gen: u32) -> Option<[FlyId; 3]> {
        let labels = self.ctx().specie.clover_labels(gen)?;
        let [la, lb, lc] = labels;
        let a = FlyId::new(gen, la);
        let b = FlyId::new(gen, lb);
        let c = FlyId::new(gen, lc);
        if self.ctx().specie.gen_size(gen + 1).ok()? != 3 {
            return None;
        }
        self.ctx().specie.child_of(a, b)?;
        self.ctx().specie.child_of(b, a)?;
        self.ctx().specie.child_of(c, a)?;
        Some([a, b, c])
    }

    /// Six labelled-chain identities per generation: three power collapses
    /// and three exact bracket recurrences.
    fn check_chain_relations(&self) -> Result<(RelationStatus, Option<String>)> {
        let p = self.ctx().p();
        let mut checked = false;
        for gen in 0..self.ps.depth {
            let Some([a, b, c]) = self.chain_labels(gen) else { continue };
            checked = true;
            let next = [
                self.ctx().specie.child_of(a, b).unwrap(),
                self.ctx().specie.child_of(b, a).unwrap(),
                self.ctx().specie.child_of(c, a).unwrap(),
            ];
            // Power collapses: head fly sheds onto the mother variable, the
            // other two onto the head variable.
            let cases = [
                (a, b, next[0]),
                (b, a, next[1]),
                (c, a, next[2]),
            ];
            for (x, other, child) in cases {
                let lhs = self.ps.virtual_pivot(x)?.p_power_iter(self.ctx().cap(x), self.ctx())?;
                let rhs = self
                    .ps
                    .virtual_pivot(child)?
                    .mul_mono(&DPMonomial::var(other, self.ctx().cap_pow(other) - 1), self.ctx());
                if lhs != rhs {
                    return Ok((
                        RelationStatus::Fail,
                        Some(format!(
                            "gen {}: power collapse at {} differs by {}",
                            gen,
                            self.name(x),
                            first_term(&lhs.sub(&rhs, p)?, self.ctx())
                        )),
                    ));
                }
            }
            // Exact bracket recurrences.
            let brackets = [(b, a, next[0]), (a, b, next[1]), (a, c, next[2])];
            for (y, x, child) in brackets {
                let vy = self.ps.virtual_pivot(y)?;
                let vx = self.ps.virtual_pivot(x)?;
                let lhs = self.ps.ad_power_bracket(&vy, &vx, y, x)?;
                let rhs = self.ps.virtual_pivot(child)?;
                if lhs != rhs {
                    return Ok((
                        RelationStatus::Fail,
                        Some(format!(
                            "gen {}: bracket recurrence onto {} differs by {}",
                            gen,
                            self.name(child),
                            first_term(&lhs.sub(&rhs, p)?, self.ctx())
                        )),
                    ));
                }
            }
        }
        if checked {
            Ok((RelationStatus::Pass, None))
        } else {
            Ok((RelationStatus::Skipped, Some("no labelled three-fly generations".into())))
        }
    }

    /// Rank of the actual pivots over the coordinate space of pure Lie
    /// monomials equals their count.
    fn check_independence(&self) -> Result<Option<String>> {
        let p = self.ctx().p();
        let fp = &self.ctx().fp;
        let mut flies = Vec::new();
        'outer: for gen in 0..=self.ps.depth {
            for i in 0..self.ctx().specie.gen_size(gen)? {
                if flies.len() >= self.opts.max_independence_flies {
                    break 'outer;
                }
                flies.push(FlyId::new(gen, i));
            }
        }
        let mut columns: HashMap<PureKey, usize> = HashMap::new();
        let mut basis: BTreeMap<usize, BTreeMap<usize, u64>> = BTreeMap::new();
        for &c in &flies {
            let v = self.ps.actual_pivot(c)?;
            let mut row: BTreeMap<usize, u64> = BTreeMap::new();
            for (key, coeff) in v.terms() {
                let next = columns.len();
                let col = *columns.entry(key.clone()).or_insert(next);
                row.insert(col, *coeff);
            }
            // Sparse elimination against the accepted rows.
            loop {
                let Some((&lead, &val)) = row.iter().next() else { break };
                match basis.get(&lead) {
                    Some(pivot_row) => {
                        let factor = fp.mul(val, fp.inv(pivot_row[&lead]));
                        for (&col, &pv) in pivot_row {
                            let e = row.entry(col).or_insert(0);
                            *e = fp.sub(*e, fp.mul(factor, pv));
                            if *e == 0 {
                                row.remove(&col);
                            }
                        }
                    }
                    None => break,
                }
                let _ = p;
            }
            match row.iter().next() {
                Some((&lead, _)) => {
                    basis.insert(lead, row);
                }
                None => {
                    return Ok(Some(format!(
                        "actual pivot of {} depends on earlier ones",
                        self.name(c)
                    )));
                }
            }
        }
        Ok(None)
    }
}

fn first_term(d: &Derivation, ctx: &Ctx) -> String {
    match d.terms().first() {
        None => "0".into(),
        Some((key, c)) => {
            Derivation::pure(d.depth(), *c, key.tail.clone(), key.target, key.power).display(ctx)
        }
    }
}

/// Runs all structural-relation checks at the given depth and reports
/// pass/fail/skipped per relation, with a counterexample term on failure.
pub fn verify_suite(ctx: &Ctx, depth: u32, opts: &SuiteOptions) -> Result<VerifyReport> {
    if depth < 2 {
        return Err(Error::InvalidArgument("verification needs depth at least 2".into()));
    }
    let ps = PivotSet::new(ctx, depth)?.with_bracket_limit(opts.bracket_limit);
    let runner = SuiteRunner { ps, opts: opts.clone() };
    fn push_eq(rel: &mut Vec<RelationReport>, name: &str, res: Result<Option<String>>) {
        let (status, counterexample) = match res {
            Ok(None) => (RelationStatus::Pass, None),
            Ok(Some(ce)) => (RelationStatus::Fail, Some(ce)),
            Err(e) => (RelationStatus::Fail, Some(format!("aborted: {e}"))),
        };
        rel.push(RelationReport { relation: name.into(), status, counterexample });
    }
    let mut relations = Vec::new();
    push_eq(&mut relations, "power-expansion", runner.check_power_expansion());
    push_eq(&mut relations, "power-bracket-expansion", runner.check_power_bracket());
    push_eq(&mut relations, "bracket-head", runner.check_bracket_head());
    push_eq(&mut relations, "difference-support", runner.check_difference_support());
    match runner.check_chain_relations() {
        Ok((status, counterexample)) => relations.push(RelationReport {
            relation: "labelled-chain".into(),
            status,
            counterexample,
        }),
        Err(e) => relations.push(RelationReport {
            relation: "labelled-chain".into(),
            status: RelationStatus::Fail,
            counterexample: Some(format!("aborted: {e}")),
        }),
    }
    push_eq(&mut relations, "pivot-independence", runner.check_independence());
    Ok(VerifyReport { depth, relations })
}
