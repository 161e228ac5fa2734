//! Species of fruit flies: binary words over an initial alphabet, organized
//! into generations with parent links, plus the genealogical relations and
//! purely combinatorial growth quantities.

use crate::{Error, Result};
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt::Write as _;

/// Largest generation we are willing to materialize.
const MAX_GENERATION_FLIES: u64 = 20_000_000;

/// Handle of a fly: generation plus dense index within the generation.
/// Ordering is (generation, index); within wild/clover generations the index
/// order coincides with lexicographic word order.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct FlyId {
    pub gen: u32,
    pub idx: u32,
}

impl FlyId {
    pub fn new(gen: u32, idx: u32) -> Self {
        FlyId { gen, idx }
    }
}

/// Selection rule producing the next generation from the current one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionRule {
    /// All ordered pairs of distinct flies: |next| = s(s-1).
    Wild,
    /// a' = ab, b' = ba. Always rejected: the resulting generation would have
    /// only two flies, violating the standing assumption of at least three.
    Duplex,
    /// a' = ab, b' = ba, c' = ca over the designated (a, b, c) labels.
    Clover,
    /// Explicit ordered parent pairs (father index, mother index).
    Custom(Vec<(u32, u32)>),
    /// A sequence of segments, each a rule applied for a number of steps.
    Hybrid(Vec<Segment>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub rule: SegmentRule,
    pub length: u32,
    /// Parent pairs, only for `custom` segments (applied at every step).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<(u32, u32)>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentRule {
    Wild,
    Duplex,
    Clover,
    Custom,
}

/// Schedule file contents: initial alphabet size plus segments.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub k: u32,
    pub segments: Vec<Segment>,
}

impl Schedule {
    /// Builds the specie described by the schedule. Clover segments that open
    /// on an unlabelled generation auto-label the lexicographically first
    /// three flies as (a, b, c).
    pub fn build(&self) -> Result<Specie> {
        let mut sp = Specie::new(self.k)?;
        sp.apply_schedule(&self.segments)?;
        Ok(sp)
    }
}

#[derive(Clone, Debug)]
struct Generation {
    /// (father idx, mother idx) in the previous generation; empty for gen 0.
    parents: Vec<(u32, u32)>,
    size: u32,
    /// Children in the NEXT generation grouped by father index here.
    /// Filled when the next generation is appended.
    children_as_father: Vec<Vec<u32>>,
    /// Designated (a, b, c) flies for the clover rule.
    clover_labels: Option<[u32; 3]>,
}

/// A specie: generations of flies with parent links.
#[derive(Clone, Debug)]
pub struct Specie {
    k: u32,
    gens: Vec<Generation>,
}

impl Specie {
    /// Fresh specie with the single generation {1, ..., k}.
    pub fn new(k: u32) -> Result<Self> {
        if k < 3 {
            return Err(Error::InvalidArgument(format!(
                "initial alphabet size {k} < 3 violates the standing assumption"
            )));
        }
        Ok(Specie {
            k,
            gens: vec![Generation {
                parents: Vec::new(),
                size: k,
                children_as_father: vec![Vec::new(); k as usize],
                clover_labels: None,
            }],
        })
    }

    /// Wild specie built to `depth` generations beyond generation 0.
    pub fn wild(k: u32, depth: u32) -> Result<Self> {
        let mut sp = Specie::new(k)?;
        for _ in 0..depth {
            sp.extend(&SelectionRule::Wild)?;
        }
        Ok(sp)
    }

    /// Clover specie on three letters built to `depth` generations.
    pub fn clover(depth: u32) -> Result<Self> {
        let mut sp = Specie::new(3)?;
        sp.set_clover_labels(0, [0, 1, 2])?;
        for _ in 0..depth {
            sp.extend(&SelectionRule::Clover)?;
        }
        Ok(sp)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Number of constructed generations (at least 1).
    pub fn generations(&self) -> u32 {
        self.gens.len() as u32
    }

    /// Index of the last constructed generation.
    pub fn last_gen(&self) -> u32 {
        self.gens.len() as u32 - 1
    }

    pub fn gen_size(&self, gen: u32) -> Result<u32> {
        self.gens
            .get(gen as usize)
            .map(|g| g.size)
            .ok_or(Error::NeedsExtension {
                needed: gen,
                have: self.generations(),
            })
    }

    pub fn contains(&self, a: FlyId) -> bool {
        (a.gen as usize) < self.gens.len() && a.idx < self.gens[a.gen as usize].size
    }

    pub(crate) fn check_fly(&self, a: FlyId) -> Result<()> {
        if self.contains(a) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "fly {a:?} not in specie ({} generations)",
                self.generations()
            )))
        }
    }

    /// Parents (father, mother) of a fly of generation >= 1.
    pub fn parents(&self, a: FlyId) -> Option<(FlyId, FlyId)> {
        if a.gen == 0 || !self.contains(a) {
            return None;
        }
        let (f, m) = self.gens[a.gen as usize].parents[a.idx as usize];
        Some((FlyId::new(a.gen - 1, f), FlyId::new(a.gen - 1, m)))
    }

    /// Children of `a` in the next generation having `a` as father.
    pub fn children_as_father(&self, a: FlyId) -> &[u32] {
        if !self.contains(a) || a.gen as usize + 1 >= self.gens.len() {
            return &[];
        }
        &self.gens[a.gen as usize].children_as_father[a.idx as usize]
    }

    pub fn clover_labels(&self, gen: u32) -> Option<[u32; 3]> {
        self.gens.get(gen as usize).and_then(|g| g.clover_labels)
    }

    /// The child with the given father and mother, if that pair was selected.
    pub fn child_of(&self, father: FlyId, mother: FlyId) -> Option<FlyId> {
        if father.gen != mother.gen {
            return None;
        }
        self.children_as_father(father)
            .iter()
            .map(|&i| FlyId::new(father.gen + 1, i))
            .find(|&c| self.gens[c.gen as usize].parents[c.idx as usize].1 == mother.idx)
    }

    /// Designates the (a, b, c) roles on a generation for the clover rule.
    pub fn set_clover_labels(&mut self, gen: u32, labels: [u32; 3]) -> Result<()> {
        let size = self.gen_size(gen)?;
        let mut seen = HashSet::new();
        for &l in &labels {
            if l >= size {
                return Err(Error::InvalidArgument(format!(
                    "label index {l} out of range for generation {gen} of size {size}"
                )));
            }
            if !seen.insert(l) {
                return Err(Error::InvalidArgument(
                    "clover labels must be three distinct flies".into(),
                ));
            }
        }
        self.gens[gen as usize].clover_labels = Some(labels);
        Ok(())
    }

    /// Appends the next generation according to the rule; returns its index.
    pub fn extend(&mut self, rule: &SelectionRule) -> Result<u32> {
        match rule {
            SelectionRule::Wild => {
                let s = self.gens.last().unwrap().size as u64;
                if s * (s - 1) > MAX_GENERATION_FLIES {
                    return Err(Error::ResourceLimit(format!(
                        "wild extension would create {} flies",
                        s * (s - 1)
                    )));
                }
                let mut pairs = Vec::with_capacity((s * (s - 1)) as usize);
                for f in 0..s as u32 {
                    for m in 0..s as u32 {
                        if f != m {
                            pairs.push((f, m));
                        }
                    }
                }
                self.push_generation(pairs, None)
            }
            SelectionRule::Duplex => Err(Error::InvalidArgument(
                "duplex rule yields a 2-fly generation, below the 3-fly minimum".into(),
            )),
            SelectionRule::Clover => {
                let last = self.gens.last().unwrap();
                let [a, b, c] = last.clover_labels.ok_or_else(|| {
                    Error::InvalidArgument(
                        "clover rule requires (a, b, c) labels on the current generation"
                            .into(),
                    )
                })?;
                // a' = ab, b' = ba, c' = ca; the new generation is labelled in turn.
                self.push_generation(vec![(a, b), (b, a), (c, a)], Some([0, 1, 2]))
            }
            SelectionRule::Custom(pairs) => {
                let size = self.gens.last().unwrap().size;
                let mut seen = HashSet::new();
                for &(f, m) in pairs {
                    if f >= size || m >= size {
                        return Err(Error::InvalidArgument(format!(
                            "custom pair ({f}, {m}) out of range for generation of size {size}"
                        )));
                    }
                    if f == m {
                        return Err(Error::InvalidArgument(format!(
                            "custom pair ({f}, {m}) must name distinct flies"
                        )));
                    }
                    if !seen.insert((f, m)) {
                        return Err(Error::InvalidArgument(format!(
                            "duplicate custom pair ({f}, {m})"
                        )));
                    }
                }
                self.push_generation(pairs.clone(), None)
            }
            SelectionRule::Hybrid(segments) => self.apply_schedule(segments),
        }
    }

    fn apply_schedule(&mut self, segments: &[Segment]) -> Result<u32> {
        for seg in segments {
            for step in 0..seg.length {
                let rule = match seg.rule {
                    SegmentRule::Wild => SelectionRule::Wild,
                    SegmentRule::Duplex => SelectionRule::Duplex,
                    SegmentRule::Clover => {
                        if step == 0 {
                            self.auto_label_clover()?;
                        }
                        SelectionRule::Clover
                    }
                    SegmentRule::Custom => SelectionRule::Custom(
                        seg.pairs
                            .clone()
                            .ok_or_else(|| {
                                Error::InvalidArgument(
                                    "custom segment requires explicit pairs".into(),
                                )
                            })?,
                    ),
                };
                self.extend(&rule)?;
            }
        }
        Ok(self.last_gen())
    }

    /// Labels the lexicographically first three flies of the last generation
    /// as (a, b, c) unless labels are already present.
    fn auto_label_clover(&mut self) -> Result<()> {
        let gen = self.last_gen();
        if self.gens[gen as usize].clover_labels.is_some() {
            return Ok(());
        }
        let size = self.gens[gen as usize].size;
        let mut order: Vec<u32> = (0..size).collect();
        order.sort_by(|&x, &y| self.cmp_words(FlyId::new(gen, x), FlyId::new(gen, y)));
        let first3: [u32; 3] = [order[0], order[1], order[2]];
        self.set_clover_labels(gen, first3)
    }

    fn push_generation(
        &mut self,
        parents: Vec<(u32, u32)>,
        labels: Option<[u32; 3]>,
    ) -> Result<u32> {
        if parents.len() < 3 {
            return Err(Error::InvalidArgument(format!(
                "resulting generation size {} < 3 violates the standing assumption",
                parents.len()
            )));
        }
        let prev_size = self.gens.last().unwrap().size as usize;
        let mut by_father = vec![Vec::new(); prev_size];
        for (i, &(f, _)) in parents.iter().enumerate() {
            by_father[f as usize].push(i as u32);
        }
        let prev = self.gens.last_mut().unwrap();
        prev.children_as_father = by_father;
        let size = parents.len() as u32;
        self.gens.push(Generation {
            parents,
            size,
            children_as_father: vec![Vec::new(); size as usize],
            clover_labels: labels,
        });
        Ok(self.last_gen())
    }

    /// Lexicographic comparison of the underlying binary words. Within one
    /// generation of a wild or clover specie this agrees with index order.
    pub fn cmp_words(&self, a: FlyId, b: FlyId) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        if a.gen != b.gen {
            // Shorter words first; only same-length words are truly comparable.
            return a.gen.cmp(&b.gen);
        }
        if a.idx == b.idx {
            return Ordering::Equal;
        }
        if a.gen == 0 {
            return a.idx.cmp(&b.idx);
        }
        let (fa, ma) = self.parents(a).unwrap();
        let (fb, mb) = self.parents(b).unwrap();
        self.cmp_words(fa, fb).then_with(|| self.cmp_words(ma, mb))
    }

    /// The word of a fly in display form: generation-0 letters are printed
    /// one-based, deeper components are parenthesized, e.g. `(12)(31)`.
    pub fn word_string(&self, a: FlyId) -> String {
        fn wrap(sp: &Specie, a: FlyId, out: &mut String) {
            if a.gen == 0 {
                write!(out, "{}", a.idx + 1).unwrap();
            } else {
                out.push('(');
                plain(sp, a, out);
                out.push(')');
            }
        }
        fn plain(sp: &Specie, a: FlyId, out: &mut String) {
            if a.gen == 0 {
                write!(out, "{}", a.idx + 1).unwrap();
            } else {
                let (f, m) = sp.parents(a).unwrap();
                wrap(sp, f, out);
                wrap(sp, m, out);
            }
        }
        let mut s = String::new();
        plain(self, a, &mut s);
        s
    }

    /// Proper-ancestor relation: `c` is a proper binary subword of `d`
    /// (obtained by repeatedly taking halves, at least once).
    pub fn is_ancestor(&self, c: FlyId, d: FlyId) -> bool {
        if c.gen >= d.gen || !self.contains(c) || !self.contains(d) {
            return false;
        }
        let mut frontier: HashSet<u32> = HashSet::from([d.idx]);
        for g in (c.gen + 1..=d.gen).rev() {
            let mut next = HashSet::with_capacity(frontier.len() * 2);
            for &i in &frontier {
                let (f, m) = self.gens[g as usize].parents[i as usize];
                next.insert(f);
                next.insert(m);
            }
            frontier = next;
        }
        frontier.contains(&c.idx)
    }

    /// Reflexive variant of [`Specie::is_ancestor`].
    pub fn is_ancestor_or_self(&self, c: FlyId, d: FlyId) -> bool {
        c == d || self.is_ancestor(c, d)
    }

    /// All proper ancestors of `d`, sorted by (generation, index).
    pub fn ancestors(&self, d: FlyId) -> Vec<FlyId> {
        let mut out = Vec::new();
        let mut frontier: HashSet<u32> = HashSet::from([d.idx]);
        for g in (1..=d.gen).rev() {
            let mut next = HashSet::new();
            for &i in &frontier {
                let (f, m) = self.gens[g as usize].parents[i as usize];
                next.insert(f);
                next.insert(m);
            }
            let mut layer: Vec<u32> = next.iter().copied().collect();
            layer.sort_unstable();
            out.extend(layer.into_iter().map(|i| FlyId::new(g - 1, i)));
            frontier = next;
        }
        out.sort_unstable();
        out
    }

    /// Paternal ancestor: `c` is a proper binary prefix of `d` (iterated father).
    pub fn paternal(&self, c: FlyId, d: FlyId) -> bool {
        if c.gen >= d.gen || !self.contains(c) || !self.contains(d) {
            return false;
        }
        let mut x = d;
        while x.gen > c.gen {
            x = self.parents(x).unwrap().0;
        }
        x == c
    }

    /// Maternal ancestor: `c` is a proper binary suffix of `d` (iterated mother).
    pub fn maternal(&self, c: FlyId, d: FlyId) -> bool {
        if c.gen >= d.gen || !self.contains(c) || !self.contains(d) {
            return false;
        }
        let mut x = d;
        while x.gen > c.gen {
            x = self.parents(x).unwrap().1;
        }
        x == c
    }

    /// Paternal-by-one ancestor: `c` is a parent of `d` or of a proper
    /// paternal ancestor of `d`. Every fly has exactly two such ancestors in
    /// each generation below its own.
    pub fn paternal_by_one(&self, c: FlyId, d: FlyId) -> bool {
        if c.gen >= d.gen {
            return false;
        }
        self.paternal_by_one_at(d, c.gen)
            .map(|[x, y]| x == c || y == c)
            .unwrap_or(false)
    }

    /// The two paternal-by-one ancestors of `d` at generation `m < gen d`:
    /// the parents of the paternal chain element of generation m + 1.
    pub fn paternal_by_one_at(&self, d: FlyId, m: u32) -> Option<[FlyId; 2]> {
        if m >= d.gen || !self.contains(d) {
            return None;
        }
        let mut x = d;
        while x.gen > m + 1 {
            x = self.parents(x).unwrap().0;
        }
        let (f, mo) = self.parents(x).unwrap();
        Some([f, mo])
    }

    /// Number of groupoid elements of length at most `n`:
    /// 1 + sum of generation sizes up to floor(log2 n).
    pub fn groupoid_growth(&self, n: u128) -> Result<u128> {
        if n == 0 {
            return Err(Error::InvalidArgument("length bound must be positive".into()));
        }
        let m = (127 - n.leading_zeros()) as u32; // floor(log2 n)
        if m >= self.generations() {
            return Err(Error::NeedsExtension {
                needed: m,
                have: self.generations(),
            });
        }
        Ok(1 + (0..=m).map(|g| self.gens[g as usize].size as u128).sum::<u128>())
    }

    /// The subexponential root f(n) = |gen n|^(1 / 2^n).
    pub fn subexp_root(&self, n: u32) -> Result<f64> {
        let size = self.gen_size(n)? as f64;
        Ok((size.ln() / 2f64.powi(n as i32)).exp())
    }

    /// Census rows for all constructed generations.
    pub fn census(&self) -> Vec<CensusRow> {
        (0..self.generations())
            .map(|g| CensusRow {
                generation: g,
                size: self.gens[g as usize].size,
                subexp_root: self.subexp_root(g).unwrap(),
            })
            .collect()
    }

    /// New specie whose generation 0 is generation `m` here, preserving all
    /// deeper generations. Pivot expansions of generation-m flies involve
    /// only flies of generation >= m, so the rerooted algebra is exact.
    pub fn reroot(&self, m: u32) -> Result<Specie> {
        self.gen_size(m)?;
        let mut gens: Vec<Generation> = self.gens[m as usize..].to_vec();
        gens[0].parents = Vec::new();
        let k = gens[0].size;
        if k < 3 {
            return Err(Error::InvalidArgument(format!(
                "generation {m} has {k} flies; a specie needs at least 3"
            )));
        }
        Ok(Specie { k, gens })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CensusRow {
    pub generation: u32,
    pub size: u32,
    pub subexp_root: f64,
}

/// (2^n)! / 2^(n(n-1)/2), the permutation-count formula for the coset family
/// cut out by the order constraints on block leaders at scales 2, 4, ....
pub fn sylow_coset_count(n: u32) -> Result<BigUint> {
    if n == 0 || n > 16 {
        return Err(Error::InvalidArgument(format!(
            "coset count defined for 1 <= n <= 16, got {n}"
        )));
    }
    let mut fact = BigUint::from(1u32);
    for i in 2..=(1u64 << n) {
        fact *= i;
    }
    Ok(fact >> (n * (n - 1) / 2))
}

/// Order constraints on positions (1-based): at every scale `2^l`,
/// `levels` selecting which l participate, the leader of each left block
/// must precede the leader of the adjacent right block.
pub fn leader_constraints(n: u32, levels: std::ops::Range<u32>) -> Vec<(usize, usize)> {
    let mut cons = Vec::new();
    for l in levels {
        let step = 1usize << l;
        let blocks = 1usize << (n - l);
        for j in (0..blocks).step_by(2) {
            cons.push((j * step, (j + 1) * step)); // 0-based positions
        }
    }
    cons
}

/// All permutations of {0, .., 2^n - 1} satisfying the given position
/// constraints `pi(i) < pi(j)`; usable only for tiny n.
pub fn constrained_permutations(n: u32, cons: &[(usize, usize)]) -> Vec<Vec<u32>> {
    let size = 1usize << n;
    assert!(size <= 8, "exhaustive permutation search limited to 2^n <= 8");
    let mut out = Vec::new();
    let mut perm: Vec<u32> = (0..size as u32).collect();
    permute(&mut perm, 0, &mut |p| {
        if cons.iter().all(|&(i, j)| p[i] < p[j]) {
            out.push(p.to_vec());
        }
    });
    out
}

fn permute(items: &mut [u32], k: usize, visit: &mut impl FnMut(&[u32])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// Parses a schedule from JSON text with line diagnostics.
pub fn parse_schedule(text: &str) -> Result<Schedule> {
    serde_json::from_str(text).map_err(|e| {
        Error::InvalidArgument(format!(
            "malformed schedule (line {}, column {}): {}",
            e.line(),
            e.column(),
            e
        ))
    })
}
