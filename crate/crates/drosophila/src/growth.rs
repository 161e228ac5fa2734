//! Graded growth tables: enumerate the restricted algebra generated by the
//! generation-0 pivots, organized by exact weight, plus cap-tuple
//! constructors, asymptotic scale fits, and cut-generation comparisons.

use crate::deriv::{Derivation, PureKey};
use crate::dpring::ExponentTuple;
use crate::pivots::PivotSet;
use crate::species::{FlyId, Specie};
use crate::{Ctx, Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

/// Cap schedule constructors. `Kappa` and `QKappa` realize the parametric
/// families with R_i = 1; `Constant` repeats one (S, R) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TupleGenerator {
    Trivial,
    Kappa { kappa: f64 },
    QKappa { q: u32, kappa: f64 },
    Constant { s: u32, r: u32 },
    Custom { pairs: Vec<(u32, u32)> },
}

/// S_i = floor((i+1)^{1/kappa - 1}) clamped to >= 1, R_i = 1.
pub fn tuple_kappa(kappa: f64, i: u32) -> Result<(u32, u32)> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "kappa must lie in (0, 1), got {kappa}"
        )));
    }
    let s = ((i + 1) as f64).powf(1.0 / kappa - 1.0).floor();
    if !s.is_finite() || s > u32::MAX as f64 {
        return Err(Error::ResourceLimit(format!("cap overflow at index {i}")));
    }
    Ok(((s as u32).max(1), 1))
}

fn exp_iter(x: f64, q: u32) -> f64 {
    (0..q).fold(x, |a, _| a.exp())
}

/// Iterated-exponential schedule: S_0 = 1 and
/// S_n = floor(exp^(q)(lambda (n+2))) + 1 - sum_{j<n} S_j with
/// lambda = ln(p^2)/kappa; R_n = 1 throughout. Degenerate parameters that
/// would force a non-positive cap are reported with the offending index.
pub fn tuple_q_kappa(q: u32, kappa: f64, p: u64, n: u32) -> Result<(u32, u32)> {
    if q < 1 || !(kappa > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need q >= 1 and kappa > 0, got q={q} kappa={kappa}"
        )));
    }
    let lambda = 2.0 * (p as f64).ln() / kappa;
    let mut sum: f64 = 0.0;
    let mut s_n: f64 = 1.0;
    for j in 0..=n {
        if j == 0 {
            s_n = 1.0;
        } else {
            let e = exp_iter(lambda * (j + 2) as f64, q);
            if !e.is_finite() {
                return Err(Error::ResourceLimit(format!(
                    "iterated exponential overflows at index {j}"
                )));
            }
            s_n = e.floor() + 1.0 - sum;
            if s_n < 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "schedule degenerates: cap {s_n} at index {j}"
                )));
            }
        }
        sum += s_n;
    }
    if s_n > u32::MAX as f64 {
        return Err(Error::ResourceLimit(format!("cap overflow at index {n}")));
    }
    Ok((s_n as u32, 1))
}

impl TupleGenerator {
    /// The (S_n, R_n) pair this generator assigns to generation n.
    pub fn pair(&self, p: u64, n: u32) -> Result<(u32, u32)> {
        match self {
            TupleGenerator::Trivial => Ok((1, 1)),
            TupleGenerator::Kappa { kappa } => tuple_kappa(*kappa, n),
            TupleGenerator::QKappa { q, kappa } => tuple_q_kappa(*q, *kappa, p, n),
            TupleGenerator::Constant { s, r } => {
                if *s == 0 || *r == 0 {
                    return Err(Error::InvalidArgument("caps must be positive".into()));
                }
                Ok((*s, *r))
            }
            TupleGenerator::Custom { pairs } => {
                pairs.get(n as usize).copied().ok_or_else(|| Error::NeedsExtension {
                    needed: n,
                    have: pairs.len() as u32,
                })
            }
        }
    }

    pub fn realize(&self, specie: &Specie, p: u64) -> Result<ExponentTuple> {
        let pairs: Result<Vec<(u32, u32)>> =
            (0..specie.generations()).map(|n| self.pair(p, n)).collect();
        ExponentTuple::from_generation_caps(specie, &pairs?)
    }

    pub fn describe(&self) -> String {
        match self {
            TupleGenerator::Trivial => "trivial".into(),
            TupleGenerator::Kappa { kappa } => format!("kappa:{kappa}"),
            TupleGenerator::QKappa { q, kappa } => format!("qkappa:{q},{kappa}"),
            TupleGenerator::Constant { s, r } => format!("constant:{s},{r}"),
            TupleGenerator::Custom { pairs } => format!("custom:{} entries", pairs.len()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stability {
    Unknown,
    Stable,
    ProvedStable,
    Unstable,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub n: u64,
    pub dim: u64,
    pub gamma: u64,
}

/// Per-weight dimensions of the generated algebra and the cumulative
/// growth function gamma(n) = sum of dims up to weight n.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthTable {
    pub p: u64,
    pub depth: u32,
    pub max_weight: u64,
    pub specie: String,
    pub tuple: String,
    pub status: Stability,
    pub rows: Vec<GrowthRow>,
}

impl GrowthTable {
    pub fn gamma(&self, n: u64) -> u64 {
        if n == 0 {
            return 0;
        }
        match self.rows.iter().rev().find(|r| r.n <= n) {
            Some(r) => r.gamma,
            None => 0,
        }
    }

    pub fn dims_match(&self, other: &GrowthTable) -> bool {
        self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.n == b.n && a.dim == b.dim)
    }
}

struct EchRow {
    lead: u32,
    coords: Vec<(u32, u64)>,
}

/// Reduced rows of one weight component; coords sorted by column id,
/// rows sorted by lead column, lead coefficients normalized to 1.
struct Component {
    dim: u64,
    rows: Vec<EchRow>,
    flushed: bool,
}

/// Span basis organized by weight over a global index of pure Lie
/// monomial columns.
pub struct GradedBasis {
    keys: Vec<PureKey>,
    index: HashMap<PureKey, u32>,
    components: BTreeMap<u64, Component>,
}

fn merge_scaled(a: &[(u32, u64)], b: &[(u32, u64)], c: u64, p: u64) -> Vec<(u32, u64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j >= b.len() || (i < a.len() && a[i].0 < b[j].0) {
            out.push(a[i]);
            i += 1;
        } else if i >= a.len() || b[j].0 < a[i].0 {
            let v = (b[j].1 * c) % p;
            if v != 0 {
                out.push((b[j].0, v));
            }
            j += 1;
        } else {
            let v = (a[i].1 + b[j].1 * c) % p;
            if v != 0 {
                out.push((a[i].0, v));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

impl GradedBasis {
    fn new() -> Self {
        GradedBasis { keys: Vec::new(), index: HashMap::new(), components: BTreeMap::new() }
    }

    fn intern(&mut self, key: &PureKey) -> u32 {
        if let Some(&id) = self.index.get(key) {
            return id;
        }
        let id = self.keys.len() as u32;
        self.keys.push(key.clone());
        self.index.insert(key.clone(), id);
        id
    }

    pub fn key(&self, col: u32) -> &PureKey {
        &self.keys[col as usize]
    }

    pub fn key_count(&self) -> usize {
        self.keys.len()
    }

    pub fn dim(&self, weight: u64) -> u64 {
        self.components.get(&weight).map_or(0, |c| c.dim)
    }

    pub fn weights(&self) -> Vec<u64> {
        self.components.keys().copied().collect()
    }

    /// Coordinate rows of one weight component (empty once flushed).
    pub fn rows(&self, weight: u64) -> Vec<&[(u32, u64)]> {
        match self.components.get(&weight) {
            Some(c) => c.rows.iter().map(|r| r.coords.as_slice()).collect(),
            None => Vec::new(),
        }
    }

    pub fn column(&self, key: &PureKey) -> Option<u32> {
        self.index.get(key).copied()
    }

    /// Whether a coordinate row reduces to zero against a component, i.e.
    /// lies in its span. Errors when the component rows were flushed.
    pub fn reduces_to_zero(
        &self,
        weight: u64,
        coords: &[(u32, u64)],
        fp: &crate::dpring::PrimeField,
    ) -> Result<bool> {
        let Some(comp) = self.components.get(&weight) else {
            return Ok(coords.is_empty());
        };
        if comp.flushed {
            return Err(Error::NotApplicable("component rows were flushed".into()));
        }
        let p = fp.p();
        let mut cur = coords.to_vec();
        loop {
            let Some(&(lead, coeff)) = cur.first() else { return Ok(true) };
            match comp.rows.binary_search_by_key(&lead, |r| r.lead) {
                Ok(i) => {
                    cur = merge_scaled(&cur, &comp.rows[i].coords, fp.neg(coeff), p);
                }
                Err(_) => return Ok(false),
            }
        }
    }

    /// Rebuild the derivation a stored row represents.
    pub fn decode_row(&self, weight: u64, row: usize, depth: u32, p: u64) -> Result<Derivation> {
        let c = self
            .components
            .get(&weight)
            .ok_or_else(|| Error::InvalidArgument(format!("no component of weight {weight}")))?;
        if c.flushed {
            return Err(Error::NotApplicable("component rows were flushed".into()));
        }
        let terms: Vec<(PureKey, u64)> = c.rows[row]
            .coords
            .iter()
            .map(|&(col, v)| (self.keys[col as usize].clone(), v))
            .collect();
        Ok(Derivation::from_terms(depth, terms, p))
    }

    /// Reduce a coordinate row against the component and adjoin it when
    /// independent; existing rows are back-reduced so the component stays
    /// in reduced echelon form. Returns whether the row was new.
    fn insert(&mut self, weight: u64, mut coords: Vec<(u32, u64)>, fp: &crate::dpring::PrimeField) -> bool {
        let p = fp.p();
        let comp = self.components.entry(weight).or_insert(Component {
            dim: 0,
            rows: Vec::new(),
            flushed: false,
        });
        loop {
            let Some(&(lead, coeff)) = coords.first() else { return false };
            match comp.rows.binary_search_by_key(&lead, |r| r.lead) {
                Ok(i) => {
                    let c = fp.neg(coeff);
                    coords = merge_scaled(&coords, &comp.rows[i].coords, c, p);
                }
                Err(pos) => {
                    let inv = fp.inv(coeff);
                    for e in coords.iter_mut() {
                        e.1 = (e.1 * inv) % p;
                    }
                    // Back-reduce earlier rows on the new lead column.
                    for r in comp.rows.iter_mut() {
                        if let Ok(j) = r.coords.binary_search_by_key(&lead, |e| e.0) {
                            let c = fp.neg(r.coords[j].1);
                            r.coords = merge_scaled(&r.coords, &coords, c, p);
                        }
                    }
                    comp.rows.insert(pos, EchRow { lead, coords });
                    comp.dim += 1;
                    return true;
                }
            }
        }
    }

    fn flush(&mut self, weight: u64) {
        if let Some(c) = self.components.get_mut(&weight) {
            c.rows = Vec::new();
            c.flushed = true;
        }
    }
}

#[derive(Clone, Debug)]
pub struct EnumerateOptions {
    /// Keep coordinate rows after a weight is fully processed. Disable for
    /// large sweeps: dims survive, rows are dropped once unreachable.
    pub keep_rows: bool,
    /// Cap on interned monomial columns.
    pub max_keys: usize,
}

impl Default for EnumerateOptions {
    fn default() -> Self {
        EnumerateOptions { keep_rows: true, max_keys: 1 << 26 }
    }
}

fn specie_summary(specie: &Specie) -> String {
    let sizes: Vec<u32> = (0..specie.generations())
        .map(|g| specie.gen_size(g).unwrap())
        .collect();
    format!("k={} sizes={:?}", specie.k(), sizes)
}

fn tuple_summary(ctx: &Ctx) -> String {
    let mut parts = Vec::new();
    for g in 0..ctx.specie.generations() {
        let mut caps: Vec<u32> = (0..ctx.specie.gen_size(g).unwrap())
            .map(|i| ctx.cap(FlyId::new(g, i)))
            .collect();
        caps.sort_unstable();
        caps.dedup();
        parts.push(format!("{caps:?}"));
    }
    format!("caps={}", parts.join(""))
}

/// Per-fly total weights as exact i128, refusing to proceed on overflow.
fn fly_weight_grid(ctx: &Ctx, depth: u32) -> Result<Vec<Vec<i128>>> {
    let mut grid: Vec<Vec<i128>> = Vec::new();
    for g in 0..=depth {
        let size = ctx.specie.gen_size(g)?;
        let mut row = Vec::with_capacity(size as usize);
        for i in 0..size {
            let a = FlyId::new(g, i);
            let w = if g == 0 {
                1i128
            } else {
                let (f, m) = ctx.specie.parents(a).expect("non-root fly");
                let pf = ctx.cap_pow(f) as i128;
                let pm = ctx.cap_pow(m) as i128 - 1;
                let wf = grid[f.gen as usize][f.idx as usize];
                let wm = grid[m.gen as usize][m.idx as usize];
                pf.checked_mul(wf)
                    .and_then(|x| pm.checked_mul(wm).and_then(|y| x.checked_add(y)))
                    .ok_or_else(|| Error::ResourceLimit("fly weight exceeds i128".into()))?
            };
            row.push(w);
        }
        grid.push(row);
    }
    Ok(grid)
}

fn monomial_weight_i128(ctx: &Ctx, grid: &[Vec<i128>], key: &PureKey) -> Result<i128> {
    let p = ctx.p() as i128;
    let pl = p
        .checked_pow(key.power)
        .ok_or_else(|| Error::ResourceLimit("power weight exceeds i128".into()))?;
    let mut w = pl
        .checked_mul(grid[key.target.gen as usize][key.target.idx as usize])
        .ok_or_else(|| Error::ResourceLimit("monomial weight exceeds i128".into()))?;
    for &(c, e) in key.tail.entries() {
        w -= e as i128 * grid[c.gen as usize][c.idx as usize];
    }
    Ok(w)
}

/// Closes the span of the generation-0 pivots under bracketing with the
/// generators and p-th powers, graded by exact weight, at truncation depth
/// `depth`, recording dimensions for weights up to `max_weight`.
///
/// Bracketing with generators suffices to reach every bracket: by the
/// Jacobi identity a bracket against a generator-bracket row unfolds into
/// generator brackets, and the adjoint of a p-th power is an iterated
/// adjoint, so the computed span is closed under all brackets and powers.
pub fn enumerate(ctx: &Ctx, max_weight: u64, depth: u32) -> Result<GrowthTable> {
    Ok(enumerate_with(ctx, max_weight, depth, &EnumerateOptions::default())?.0)
}

pub fn enumerate_with(
    ctx: &Ctx,
    max_weight: u64,
    depth: u32,
    opts: &EnumerateOptions,
) -> Result<(GrowthTable, GradedBasis)> {
    if max_weight == 0 {
        return Err(Error::InvalidArgument("max weight must be positive".into()));
    }
    let ps = PivotSet::new(ctx, depth)?;
    let grid = fly_weight_grid(ctx, depth)?;
    let k = ctx.specie.k();
    let gens: Vec<Derivation> = (0..k)
        .map(|i| ps.virtual_pivot(FlyId::new(0, i)))
        .collect::<Result<_>>()?;
    let mut basis = GradedBasis::new();
    let mut pending: BTreeMap<u64, Vec<Derivation>> = BTreeMap::new();
    pending.insert(1, gens.clone());
    let p = ctx.p();

    while let Some((&w, _)) = pending.iter().next() {
        let items = pending.remove(&w).unwrap();
        for x in items {
            let mut coords = Vec::with_capacity(x.terms().len());
            for (key, coeff) in x.terms() {
                let mw = monomial_weight_i128(ctx, &grid, key)?;
                if mw != w as i128 {
                    return Err(Error::InvalidArgument(format!(
                        "inhomogeneous product: term of weight {mw} in weight-{w} element"
                    )));
                }
                coords.push((basis.intern(key), *coeff));
            }
            if basis.keys.len() > opts.max_keys {
                return Err(Error::ResourceLimit(format!(
                    "monomial index exceeds {} columns",
                    opts.max_keys
                )));
            }
            coords.sort_unstable_by_key(|e| e.0);
            if !basis.insert(w, coords, &ctx.fp) {
                continue;
            }
            if w + 1 <= max_weight {
                for g in &gens {
                    let b = g.bracket(&x, ctx)?;
                    if !b.is_zero() {
                        pending.entry(w + 1).or_default().push(b);
                    }
                }
            }
            if w.saturating_mul(p) <= max_weight {
                let y = x.p_power(ctx)?;
                if !y.is_zero() {
                    pending.entry(w * p).or_default().push(y);
                }
            }
        }
        if !opts.keep_rows {
            basis.flush(w);
        }
    }

    let mut rows = Vec::with_capacity(max_weight as usize);
    let mut gamma = 0u64;
    for n in 1..=max_weight {
        let dim = basis.dim(n);
        gamma += dim;
        rows.push(GrowthRow { n, dim, gamma });
    }
    let table = GrowthTable {
        p,
        depth,
        max_weight,
        specie: specie_summary(&ctx.specie),
        tuple: tuple_summary(ctx),
        status: Stability::Unknown,
        rows,
    };
    Ok((table, basis))
}

/// Exact minimum weight over pure monomials targeting generation `gen`
/// with full ancestral tails. Nonpositive values mean low weights can in
/// principle reach arbitrarily deep targets, so no depth certificate.
pub fn min_ancestral_weight(ctx: &Ctx, gen: u32) -> Result<i128> {
    let grid = fly_weight_grid(ctx, gen)?;
    let mut best: Option<i128> = None;
    for i in 0..ctx.specie.gen_size(gen)? {
        let d = FlyId::new(gen, i);
        let mut w = grid[gen as usize][i as usize];
        for c in ctx.specie.ancestors(d) {
            let sub = (ctx.cap_pow(c) as i128 - 1) * grid[c.gen as usize][c.idx as usize];
            w -= sub;
        }
        best = Some(match best {
            None => w,
            Some(b) => b.min(w),
        });
    }
    best.ok_or_else(|| Error::InvalidArgument("empty generation".into()))
}

fn all_caps_trivial(ctx: &Ctx) -> bool {
    (0..ctx.specie.generations()).all(|g| {
        (0..ctx.specie.gen_size(g).unwrap()).all(|i| ctx.cap(FlyId::new(g, i)) == 1)
    })
}

/// Depth certificate: for p >= 3 trivial tuples, if every generation past
/// `depth` (up to the constructed budget) has strictly increasing minimal
/// monomial weight above `max_weight`, deeper truncations cannot add or
/// merge rows at the computed weights.
fn depth_certified(ctx: &Ctx, max_weight: u64, depth: u32) -> bool {
    if ctx.p() < 3 || !all_caps_trivial(ctx) {
        return false;
    }
    let last = ctx.specie.last_gen();
    if depth + 1 > last {
        return false;
    }
    let mut prev: Option<i128> = None;
    for g in depth + 1..=last {
        let Ok(m) = min_ancestral_weight(ctx, g) else { return false };
        if m <= max_weight as i128 {
            return false;
        }
        if let Some(p) = prev {
            if m <= p {
                return false;
            }
        }
        prev = Some(m);
    }
    true
}

/// Recomputes the table at increasing depths until per-weight dimensions
/// agree at two consecutive depths; flags the result. Runs within the
/// constructed generations of the specie.
pub fn stabilize_depth(ctx: &Ctx, max_weight: u64, start_depth: u32) -> Result<(u32, GrowthTable)> {
    let budget = ctx.specie.last_gen();
    if start_depth > budget {
        return Err(Error::NeedsExtension { needed: start_depth, have: budget });
    }
    let mut prev = enumerate(ctx, max_weight, start_depth)?;
    for d in start_depth..budget {
        let next = enumerate(ctx, max_weight, d + 1)?;
        if prev.dims_match(&next) {
            prev.status = if depth_certified(ctx, max_weight, d) {
                Stability::ProvedStable
            } else {
                Stability::Stable
            };
            return Ok((d, prev));
        }
        prev = next;
    }
    prev.status = Stability::Unstable;
    Ok((budget, prev))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GkFit {
    pub slope: f64,
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

/// Least-squares slope of ln(gamma) against ln(n) over the trailing
/// `window` points (0 picks max(16, quarter of the table)); the bracket is
/// slope +/- two standard errors.
pub fn gk_fit(table: &GrowthTable, window: usize) -> Result<GkFit> {
    let pts: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter(|r| r.gamma > 0 && r.n >= 2)
        .map(|r| ((r.n as f64).ln(), (r.gamma as f64).ln()))
        .collect();
    let want = if window == 0 { (pts.len() / 4).max(16) } else { window };
    if pts.len() < want.max(16) {
        return Err(Error::InvalidArgument(format!(
            "need at least {} usable points, have {}",
            want.max(16),
            pts.len()
        )));
    }
    let tail = &pts[pts.len() - want..];
    let n = tail.len() as f64;
    let mx = tail.iter().map(|p| p.0).sum::<f64>() / n;
    let my = tail.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("degenerate abscissa in fit window".into()));
    }
    let slope = sxy / sxx;
    let ss_res: f64 = tail
        .iter()
        .map(|p| {
            let pred = my + slope * (p.0 - mx);
            (p.1 - pred).powi(2)
        })
        .sum();
    let se = if tail.len() > 2 { (ss_res / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(GkFit { slope, lower: slope - 2.0 * se, upper: slope + 2.0 * se, points: tail.len() })
}

fn ln_iter(mut x: f64, q: u32) -> f64 {
    for _ in 0..q {
        x = x.ln();
    }
    x
}

/// Inverts the q-th dimension scale on the trailing quarter of the table:
/// for q = 3, gamma ~ exp(n^{a/(a+1)}); for q >= 4,
/// gamma ~ exp(n / (ln^{(q-3)} n)^{1/a}). Returns the averaged estimate.
pub fn q_dimension_fit(table: &GrowthTable, q: u32) -> Result<f64> {
    if q < 3 {
        return Err(Error::InvalidArgument(format!(
            "scale inversion defined for q >= 3, got {q}"
        )));
    }
    let pts: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter(|r| r.gamma > 2 && r.n >= 3)
        .map(|r| (r.n as f64, r.gamma as f64))
        .collect();
    if pts.len() < 16 {
        return Err(Error::InvalidArgument(format!(
            "need at least 16 usable points, have {}",
            pts.len()
        )));
    }
    let tail = &pts[pts.len() - (pts.len() / 4).max(16).min(pts.len())..];
    let mut acc = 0.0;
    let mut cnt = 0usize;
    for &(n, g) in tail {
        let est = if q == 3 {
            let beta = g.ln().ln() / n.ln();
            if !(0.0..1.0).contains(&beta) {
                continue;
            }
            beta / (1.0 - beta)
        } else {
            let num = ln_iter(n, q - 3).ln();
            let den = (n / g.ln()).ln();
            if !num.is_finite() || !den.is_finite() || den <= 0.0 || num <= 0.0 {
                continue;
            }
            num / den
        };
        if est.is_finite() && est > 0.0 {
            acc += est;
            cnt += 1;
        }
    }
    if cnt == 0 {
        return Err(Error::NotApplicable("no points in the invertible range".into()));
    }
    Ok(acc / cnt as f64)
}

/// lambda = log2(p - 1/2), the exponent scale of the wild lower bound.
pub fn lambda(p: u64) -> f64 {
    (p as f64 - 0.5).log2()
}

/// mu = log_{2p-1} 2; satisfies 1/mu = 1 + lambda.
pub fn mu(p: u64) -> f64 {
    2f64.ln() / ((2 * p - 1) as f64).ln()
}

/// Reference envelope exp(C n / (ln n)^lambda) for user-supplied constants;
/// the constants are free overlay parameters, not derived values.
pub fn bound_overlay(p: u64, n: u64, c_lower: f64, c_upper: f64) -> Result<(f64, f64)> {
    if n < 3 {
        return Err(Error::InvalidArgument("overlay needs n >= 3".into()));
    }
    let l = lambda(p);
    let base = n as f64 / (n as f64).ln().powf(l);
    Ok(((c_lower * base).exp(), (c_upper * base).exp()))
}

/// Quasi-linear reference n (ln^{(q)} n)^kappa.
pub fn quasi_linear_reference(n: u64, q: u32, kappa: f64) -> Result<f64> {
    let l = ln_iter(n as f64, q);
    if !l.is_finite() || l <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "iterated logarithm of {n} not positive at level {q}"
        )));
    }
    Ok(n as f64 * l.powf(kappa))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutPoint {
    pub n: u64,
    pub gamma_cut: u64,
    pub gamma_base: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutReport {
    pub cut_generation: u32,
    pub weight_factor: u64,
    pub degenerate: bool,
    pub holds: bool,
    pub points: Vec<CutPoint>,
}

/// Compares growth over the original generators against growth over a
/// deeper generation serving as fresh generators: with q the uniform weight
/// of generation `cut_gen`, checks gamma_cut(floor(n/q)) < gamma_base(n)
/// pointwise. Cutting at generation 0 reproduces the same algebra and is
/// reported as degenerate.
pub fn cut_compare(
    ctx: &Ctx,
    cut_gen: u32,
    max_weight: u64,
    depth_base: u32,
    depth_cut: u32,
) -> Result<CutReport> {
    let q_big = crate::grading::generation_weight(ctx, cut_gen)?;
    let q: u64 = q_big
        .try_into()
        .map_err(|_| Error::ResourceLimit("cut-generation weight exceeds u64".into()))?;
    let base = enumerate(ctx, max_weight, depth_base)?;
    let sp_cut = ctx.specie.reroot(cut_gen)?;
    let tuple_cut = ctx.tuple.reroot(cut_gen);
    let ctx_cut = Ctx::new(ctx.fp.clone(), sp_cut, tuple_cut)?;
    let cut = enumerate(&ctx_cut, (max_weight / q).max(1), depth_cut)?;
    let degenerate = cut_gen == 0;
    let mut holds = true;
    let mut points = Vec::new();
    for n in 1..=max_weight {
        let gc = cut.gamma(n / q);
        let gb = base.gamma(n);
        if gc >= gb {
            holds = false;
        }
        points.push(CutPoint { n, gamma_cut: gc, gamma_base: gb });
    }
    Ok(CutReport { cut_generation: cut_gen, weight_factor: q, degenerate, holds, points })
}

/// Growth computed straight from the span definition: ranks of all
/// left-normed generator words and their p^e-th powers with (word length)
/// times p^e at most n. Exponential in the weight; small cases only.
/// Weights equal word lengths only for caps that keep generation-0 pivots
/// at weight one, which holds for every tuple under the all-ones base.
pub fn direct_span_gamma(ctx: &Ctx, max_weight: u64, depth: u32) -> Result<Vec<u64>> {
    let ps = PivotSet::new(ctx, depth)?;
    let k = ctx.specie.k();
    let gens: Vec<Derivation> = (0..k)
        .map(|i| ps.virtual_pivot(FlyId::new(0, i)))
        .collect::<Result<_>>()?;
    // elements[s] holds the still-distinguishable words of length s.
    let mut layer = gens.clone();
    let mut staged: Vec<(u64, Derivation)> = Vec::new();
    for g in &gens {
        staged.push((1, g.clone()));
    }
    let mut s = 1u64;
    while s < max_weight {
        let mut next = Vec::new();
        for w in &layer {
            for g in &gens {
                let b = w.bracket(g, ctx)?;
                if !b.is_zero() {
                    next.push(b);
                }
            }
        }
        s += 1;
        for w in &next {
            staged.push((s, w.clone()));
        }
        layer = next;
        if layer.is_empty() {
            break;
        }
    }
    // p^e-th powers of every staged word while the nominal weight fits.
    let p = ctx.p();
    let mut all: Vec<(u64, Derivation)> = Vec::new();
    for (s, w) in staged {
        let mut cur = w;
        let mut nominal = s;
        loop {
            all.push((nominal, cur.clone()));
            if nominal.saturating_mul(p) > max_weight {
                break;
            }
            cur = cur.p_power(ctx)?;
            if cur.is_zero() {
                break;
            }
            nominal *= p;
        }
    }
    all.sort_by_key(|e| e.0);
    // Self-contained elimination over a dense column map.
    let mut cols: HashMap<PureKey, usize> = HashMap::new();
    let mut echelon: Vec<Vec<(usize, u64)>> = Vec::new();
    let mut leads: HashMap<usize, usize> = HashMap::new();
    let mut gamma = vec![0u64; max_weight as usize + 1];
    let mut rank = 0u64;
    let mut idx = 0usize;
    for n in 1..=max_weight {
        while idx < all.len() && all[idx].0 <= n {
            let (_, w) = &all[idx];
            idx += 1;
            let mut row: Vec<(usize, u64)> = w
                .terms()
                .iter()
                .map(|(key, v)| {
                    let next_id = cols.len();
                    (*cols.entry(key.clone()).or_insert(next_id), *v)
                })
                .collect();
            row.sort_unstable_by_key(|e| e.0);
            loop {
                let Some(&(lead, coeff)) = row.first() else { break };
                match leads.get(&lead) {
                    Some(&ri) => {
                        let c = ctx.fp.neg(coeff);
                        let merged: Vec<(u32, u64)> = merge_scaled(
                            &row.iter().map(|&(a, b)| (a as u32, b)).collect::<Vec<_>>(),
                            &echelon[ri].iter().map(|&(a, b)| (a as u32, b)).collect::<Vec<_>>(),
                            c,
                            p,
                        );
                        row = merged.into_iter().map(|(a, b)| (a as usize, b)).collect();
                    }
                    None => {
                        let inv = ctx.fp.inv(coeff);
                        for e in row.iter_mut() {
                            e.1 = (e.1 * inv) % p;
                        }
                        leads.insert(lead, echelon.len());
                        echelon.push(row);
                        rank += 1;
                        break;
                    }
                }
            }
        }
        gamma[n as usize] = rank;
    }
    Ok(gamma[1..].to_vec())
}
