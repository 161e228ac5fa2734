//! Desk-scale nillity verification: iterate restricted p-th powers of
//! sampled elements of the truncated algebra until they vanish, tracking
//! the depletion trajectory and the generation bound it implies.

use crate::deriv::Derivation;
use crate::grading::{depletion, is_uniform};
use crate::growth::enumerate_with;
use crate::{Ctx, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Outcome of powering one element. Vanishing at the working depth proves
/// vanishing of the element's image in that quotient; a budget overrun is
/// reported as inconclusive, never as a counterexample.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NilReport {
    pub descriptor: String,
    pub depth: u32,
    /// Smallest N with w^(p^N) = 0 in the truncation, when reached.
    pub nil_index: Option<u32>,
    /// Depletion of each nonzero iterate w^(p^j), j = 0, 1, ...
    pub depletion_trajectory: Vec<u64>,
    /// Every step obeyed depl(w^(p^j)) <= depl(w) + j(p-1).
    pub trajectory_ok: bool,
    /// Bare partials in any power of w can only target generations up to
    /// [C log_{4/3}(p) / (p-1)] where C = depl(w).
    pub predicted_generation_bound: u64,
    /// Set when the cap tuple falls outside the nillity hypotheses.
    pub outside_hypotheses: bool,
}

/// Empirically generous power budget: S_max (depth+2) p.
pub fn default_power_budget(ctx: &Ctx, depth: u32) -> u32 {
    let mut s_max = 1;
    for g in 0..=depth.min(ctx.specie.last_gen()) {
        for i in 0..ctx.specie.gen_size(g).unwrap() {
            s_max = s_max.max(ctx.cap(crate::species::FlyId::new(g, i)));
        }
    }
    s_max * (depth + 2) * ctx.p() as u32
}

pub fn generation_bound(c: u64, p: u64) -> u64 {
    let log43 = (p as f64).ln() / (4f64 / 3f64).ln();
    (c as f64 * log43 / (p as f64 - 1.0)).floor() as u64
}

/// Iterates the restricted p-th power until zero or the budget runs out.
/// Refuses non-uniform tuples unless `allow_nonuniform` marks the run as
/// exploratory.
pub fn nil_index_with(
    w: &Derivation,
    ctx: &Ctx,
    max_n: Option<u32>,
    allow_nonuniform: bool,
) -> Result<NilReport> {
    let uniform = is_uniform(&ctx.specie, &ctx.tuple);
    if !uniform && !allow_nonuniform {
        return Err(Error::NotApplicable(
            "tuple is not uniform; enable the override to explore outside the \
             nillity hypotheses"
                .into(),
        ));
    }
    let depth = w.depth();
    let budget = max_n.unwrap_or_else(|| default_power_budget(ctx, depth));
    let p = ctx.p();
    let c = depletion(ctx, w).unwrap_or(0);
    let mut report = NilReport {
        descriptor: format!("{} terms at depth {depth}", w.terms().len()),
        depth,
        nil_index: None,
        depletion_trajectory: Vec::new(),
        trajectory_ok: true,
        predicted_generation_bound: generation_bound(c, p),
        outside_hypotheses: !uniform,
    };
    let mut cur = w.clone();
    let mut j = 0u32;
    while !cur.is_zero() {
        if j >= budget {
            return Ok(report);
        }
        let d = depletion(ctx, &cur).expect("nonzero derivation has terms");
        if d > c + j as u64 * (p - 1) {
            report.trajectory_ok = false;
        }
        report.depletion_trajectory.push(d);
        cur = cur.p_power(ctx)?;
        j += 1;
    }
    report.nil_index = Some(j);
    Ok(report)
}

pub fn nil_index(w: &Derivation, ctx: &Ctx, max_n: Option<u32>) -> Result<NilReport> {
    nil_index_with(w, ctx, max_n, false)
}

/// Reproducible pseudo-random F_p-combinations of growth basis rows of
/// weight up to `max_weight` at truncation depth `depth`. A fixed seed
/// yields an identical sample on every run.
pub fn sample_elements(
    ctx: &Ctx,
    depth: u32,
    max_weight: u64,
    count: usize,
    seed: u64,
) -> Result<Vec<Derivation>> {
    let (_, basis) = enumerate_with(ctx, max_weight, depth, &Default::default())?;
    let p = ctx.p();
    let mut rows: Vec<Derivation> = Vec::new();
    for w in basis.weights() {
        for i in 0..basis.rows(w).len() {
            rows.push(basis.decode_row(w, i, depth, p)?);
        }
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument("empty basis; nothing to sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let picks = rng.gen_range(1..=3usize.min(rows.len()));
        let mut acc = Derivation::zero(depth);
        for _ in 0..picks {
            let row = &rows[rng.gen_range(0..rows.len())];
            let coeff = rng.gen_range(1..p);
            acc = acc.add(&row.scale(coeff, p), p)?;
        }
        out.push(acc);
    }
    Ok(out)
}
