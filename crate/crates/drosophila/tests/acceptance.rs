//! Acceptance suite: one test per release criterion, each printing a single
//! pass/fail line (visible with --nocapture). Tolerances and budgets are
//! pinned as constants next to the checks that use them.
mod common;

use common::{
    clover_ctx, factorial_binomial_mod, factorial_table, halved_bracket, matrix_rank_gamma,
    random_ancestral_derivation, random_ancestral_term, wild_ctx, FlatEchelon,
};
use drosophila::deriv::{operator_matrix, Derivation, SmallRing};
use drosophila::dpring::{lucas_binomial, ExponentTuple, PrimeField};
use drosophila::grading::{
    depletion, generation_weight, is_uniform, monomial_depletion, Homogeneity, WeightTable,
};
use drosophila::growth::{cut_compare, enumerate, enumerate_with, gk_fit, EnumerateOptions};
use drosophila::nilcheck::{nil_index, sample_elements};
use drosophila::pivots::{actual_pivot, verify_suite, virtual_pivot, SuiteOptions};
use drosophila::species::{
    constrained_permutations, leader_constraints, parse_schedule, sylow_coset_count, FlyId,
    Specie,
};
use drosophila::Ctx;
use num_bigint::BigUint;
use num_traits::One;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::collections::BTreeSet;
use std::time::Instant;

fn verdict(criterion: u32, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion:02} [{tag}] {detail}");
    assert!(pass, "criterion {criterion:02} failed: {detail}");
}

const C1_TIME_LIMIT: f64 = 1.0;
const C1_ROOT_FLOOR: f64 = 2.33;

#[test]
fn c01_wild_census_and_subexponential_root() {
    let t = Instant::now();
    let sp = Specie::wild(3, 4).unwrap();
    let sizes: Vec<u64> = (0..=4).map(|g| sp.gen_size(g).unwrap() as u64).collect();
    let roots: Vec<f64> = (0..=4).map(|n| sp.subexp_root(n).unwrap()).collect();
    let elapsed = t.elapsed().as_secs_f64();
    let sizes_ok = sizes == vec![3, 6, 30, 870, 756_030];
    let decreasing = roots.windows(2).all(|w| w[1] < w[0]);
    let floored = roots.iter().all(|&f| f > C1_ROOT_FLOOR);
    let pass = sizes_ok && decreasing && floored && elapsed < C1_TIME_LIMIT;
    verdict(
        1,
        pass,
        &format!(
            "census {sizes:?}, roots strictly decreasing above {C1_ROOT_FLOOR}: {decreasing}/{floored}, {elapsed:.2}s"
        ),
    );
}

const C2_TIME_LIMIT: f64 = 10.0;

#[test]
fn c02_binomials_against_factorial_oracle() {
    let t = Instant::now();
    let mut checked = 0u64;
    for p in [2u64, 3, 5] {
        let bound = p.pow(4);
        let fact = factorial_table(bound);
        for m in 0..bound {
            for n in 0..=m {
                let lucas = lucas_binomial(m, n, p);
                let oracle = factorial_binomial_mod(m, n, p, &fact);
                assert_eq!(lucas, oracle, "C({m},{n}) mod {p}");
                checked += 1;
            }
        }
    }
    let elapsed = t.elapsed().as_secs_f64();
    verdict(
        2,
        elapsed < C2_TIME_LIMIT,
        &format!("{checked} binomials across p in {{2,3,5}} agree, {elapsed:.2}s"),
    );
}

const C3_PAIRS_PER_CONFIG: usize = 50;
const C3_RING_LIMIT: u64 = 1 << 21;

#[test]
fn c03_operator_matrix_oracle() {
    // Symbolic bracket and p-power versus commutator and p-th power of the
    // action matrices. Each random pair is realized on the subring generated
    // by its own support variables, on which the action is exact.
    let configs = [wild_ctx(3, 2, 2), wild_ctx(3, 3, 2), clover_ctx(2, 2), clover_ctx(3, 2)];
    let mut pairs = 0usize;
    for (ci, ctx) in configs.iter().enumerate() {
        let p = ctx.p();
        let mut rng = StdRng::seed_from_u64(3000 + ci as u64);
        let mut done = 0usize;
        let mut attempts = 0usize;
        while done < C3_PAIRS_PER_CONFIG {
            attempts += 1;
            assert!(attempts < 10_000, "resampling never fits the ring limit");
            let x = random_ancestral_derivation(ctx, 2, 3, &mut rng);
            let y = random_ancestral_derivation(ctx, 2, 3, &mut rng);
            let mut vars: BTreeSet<FlyId> = x.support_vars();
            vars.extend(y.support_vars());
            let ring = match SmallRing::on_vars(ctx, vars.into_iter().collect(), C3_RING_LIMIT) {
                Ok(r) => r,
                Err(_) => continue,
            };
            let mx = operator_matrix(&x, &ring, ctx).unwrap();
            let my = operator_matrix(&y, &ring, ctx).unwrap();
            let br = x.bracket(&y, ctx).unwrap();
            assert_eq!(
                operator_matrix(&br, &ring, ctx).unwrap().flatten(),
                mx.commutator(&my, p).flatten(),
                "bracket vs commutator"
            );
            for (w, m) in [(&x, &mx), (&y, &my)] {
                let pw = w.p_power(ctx).unwrap();
                assert_eq!(
                    operator_matrix(&pw, &ring, ctx).unwrap().flatten(),
                    m.pow(p as u32, p).flatten(),
                    "p-power vs matrix power"
                );
            }
            done += 1;
            pairs += 1;
        }
    }
    verdict(3, pairs == 4 * C3_PAIRS_PER_CONFIG, &format!("{pairs} random pairs matched the matrix oracle"));
}

#[test]
fn c04_structural_relation_suite() {
    // Relation families at depth <= 4 for p in {2, 3}: power expansions (both
    // cap cases), ad-power bracket expansion, bracket heads, difference
    // support, the six labelled chain relations, pivot independence, plus the
    // actual-pivot congruence and the ternary equality.
    let mut lines = Vec::new();
    for p in [2u64, 3] {
        let ctx = clover_ctx(p, 4);
        let report = verify_suite(&ctx, 4, &SuiteOptions::default()).unwrap();
        assert!(report.all_pass(), "clover d4 p{p}: {report:#?}");
        lines.push(format!("clover d4 p{p} ok"));

        let ctx = wild_ctx(3, p, 3);
        let report = verify_suite(&ctx, 3, &SuiteOptions::default()).unwrap();
        assert!(report.all_pass(), "wild d3 p{p}: {report:#?}");
        lines.push(format!("wild d3 p{p} ok"));
    }
    // Actual pivots: equality on ternary species, maternal-tail congruence on
    // wild ones.
    for p in [2u64, 3] {
        let ctx = clover_ctx(p, 4);
        for gen in 0..=4u32 {
            for i in 0..3u32 {
                let c = FlyId::new(gen, i);
                assert_eq!(
                    actual_pivot(&ctx, c, 4).unwrap(),
                    virtual_pivot(&ctx, c, 4).unwrap(),
                    "ternary equality p={p} ({gen},{i})"
                );
            }
        }
        let ctx = wild_ctx(3, p, 3);
        for gen in 1..=3u32 {
            let width = ctx.specie.gen_size(gen).unwrap().min(10);
            for i in 0..width {
                let c = FlyId::new(gen, i);
                let diff = actual_pivot(&ctx, c, 3)
                    .unwrap()
                    .sub(&virtual_pivot(&ctx, c, 3).unwrap(), p)
                    .unwrap();
                let mut chain = BTreeSet::new();
                let mut x = c;
                while let Some((_, m)) = ctx.specie.parents(x) {
                    chain.insert(m);
                    x = m;
                }
                for (key, _) in diff.terms() {
                    assert!(
                        key.tail.entries().iter().any(|&(b, _)| chain.contains(&b)),
                        "congruence p={p} fly ({gen},{i})"
                    );
                }
            }
        }
    }
    verdict(4, true, &lines.join(", "));
}

const C5_SAMPLES: usize = 1000;

#[test]
fn c05_depletion_laws() {
    // Equality on every term of every pivot power, then sampled inequalities
    // for brackets and p-th powers, zero violations allowed.
    for p in [2u64, 3] {
        for ctx in [clover_ctx(p, 4), wild_ctx(3, p, 3)] {
            let depth = ctx.specie.last_gen();
            for gen in 0..=depth {
                for i in 0..ctx.specie.gen_size(gen).unwrap() {
                    let a = FlyId::new(gen, i);
                    let cap_sum: u64 = (0..gen)
                        .map(|m| {
                            let [x, y] = ctx.specie.paternal_by_one_at(a, m).unwrap();
                            (ctx.cap(x) + ctx.cap(y)) as u64
                        })
                        .sum();
                    let mut w = virtual_pivot(&ctx, a, depth).unwrap();
                    let mut m = 0u64;
                    while !w.is_zero() {
                        w = w.p_power(&ctx).unwrap();
                        m += 1;
                        if w.is_zero() {
                            break;
                        }
                        let want = (p - 1) * (m + cap_sum);
                        for (key, _) in w.terms() {
                            assert_eq!(
                                monomial_depletion(&ctx, key),
                                want,
                                "power depletion p={p} fly ({gen},{i}) m={m}"
                            );
                        }
                        assert!(m <= 16, "power chain runaway");
                    }
                }
            }
        }
    }
    // Sampled laws: 300 bracket and 300 power checks per configuration.
    let mut bracket_checked = 0usize;
    let mut power_checked = 0usize;
    for p in [2u64, 3] {
        for ctx in [clover_ctx(p, 3), wild_ctx(3, p, 2)] {
            let depth = ctx.specie.last_gen();
            let mut rng = StdRng::seed_from_u64(5000 + p + depth as u64);
            let mut quota = 0usize;
            while quota < 300 {
                let (ku, cu) = random_ancestral_term(&ctx, depth, &mut rng);
                let (kv, cv) = random_ancestral_term(&ctx, depth, &mut rng);
                if ku.target.gen > kv.target.gen {
                    continue;
                }
                let u = Derivation::from_terms(depth, vec![(ku, cu)], p);
                let v = Derivation::from_terms(depth, vec![(kv.clone(), cv)], p);
                if let Some(d) = depletion(&ctx, &u.bracket(&v, &ctx).unwrap()) {
                    let dv = monomial_depletion(&ctx, &kv);
                    assert!(d <= dv + 1, "bracket depletion p={p}: {d} > {dv}+1");
                }
                quota += 1;
                bracket_checked += 1;
            }
            let mut quota = 0usize;
            while quota < 300 {
                let w = random_ancestral_derivation(&ctx, depth, 3, &mut rng);
                let Some(dw) = depletion(&ctx, &w) else { continue };
                if let Some(dpw) = depletion(&ctx, &w.p_power(&ctx).unwrap()) {
                    assert!(dpw <= dw + p - 1, "power depletion p={p}: {dpw} > {dw}+{}", p - 1);
                }
                quota += 1;
                power_checked += 1;
            }
        }
    }
    verdict(
        5,
        bracket_checked >= C5_SAMPLES && power_checked >= C5_SAMPLES,
        &format!(
            "pivot power terms exact; {bracket_checked} bracket and {power_checked} power samples clean"
        ),
    );
}

const C6_TUPLES: usize = 20;

#[test]
fn c06_weight_grading_and_uniform_products() {
    // Brackets add weights, p-powers scale them by p.
    for p in [2u64, 3] {
        let ctx = wild_ctx(3, p, 2);
        let table = WeightTable::new(&ctx);
        let pivots: Vec<Derivation> = (0..3u32)
            .map(|i| virtual_pivot(&ctx, FlyId::new(0, i), 2).unwrap())
            .collect();
        for x in &pivots {
            for y in &pivots {
                let wx = match table.homogeneity(x).unwrap() {
                    Homogeneity::Homogeneous(w) => w,
                    h => panic!("pivot not homogeneous: {h:?}"),
                };
                let wy = match table.homogeneity(y).unwrap() {
                    Homogeneity::Homogeneous(w) => w,
                    h => panic!("pivot not homogeneous: {h:?}"),
                };
                let br = x.bracket(y, &ctx).unwrap();
                match table.homogeneity(&br).unwrap() {
                    Homogeneity::Zero => {}
                    Homogeneity::Homogeneous(w) => assert_eq!(w, &wx + &wy),
                    h => panic!("bracket inhomogeneous: {h:?}"),
                }
                let pw = x.p_power(&ctx).unwrap();
                match table.homogeneity(&pw).unwrap() {
                    Homogeneity::Zero => {}
                    Homogeneity::Homogeneous(w) => assert_eq!(w, &wx * p),
                    h => panic!("power inhomogeneous: {h:?}"),
                }
            }
        }
    }
    // Twenty random uniform tuples: product formula and the squared-weight
    // inequality, in exact integers.
    let mut rng = StdRng::seed_from_u64(6006);
    let mut tuples_done = 0usize;
    for p in [2u64, 3] {
        for _ in 0..C6_TUPLES / 2 {
            let sp = Specie::clover(4).unwrap();
            let pairs: Vec<(u32, u32)> =
                (0..=4).map(|_| (rng.gen_range(1..4u32), rng.gen_range(1..4u32))).collect();
            let tuple = ExponentTuple::from_generation_caps(&sp, &pairs).unwrap();
            assert!(is_uniform(&sp, &tuple));
            let ctx = Ctx::new(PrimeField::new(p).unwrap(), sp, tuple).unwrap();
            for n in 0..=4u32 {
                let got = generation_weight(&ctx, n).unwrap();
                let mut want = BigUint::one();
                let mut vol = BigUint::one();
                for m in 0..n {
                    let (s, r) = pairs[m as usize];
                    want *= BigUint::from(p.pow(s) + p.pow(r) - 1);
                    vol *= BigUint::from(p).pow(s + r);
                }
                assert_eq!(got, want, "product formula p={p} n={n} {pairs:?}");
                if n > 0 {
                    assert!(&got * &got > vol, "squared weight p={p} n={n} {pairs:?}");
                }
            }
            tuples_done += 1;
        }
    }
    verdict(6, tuples_done == C6_TUPLES, &format!("graded ops homogeneous; {tuples_done} uniform tuples verified"));
}

const C7_SAMPLES: usize = 100;
const C7_TIME_LIMIT: f64 = 600.0;

#[test]
fn c07_nillity_sampling() {
    let t = Instant::now();
    let mut total = 0usize;
    for p in [2u64, 3] {
        for (ctx, max_weight) in [(clover_ctx(p, 3), 6u64), (wild_ctx(3, p, 3), 4)] {
            let seed = 7000 + p;
            let samples = sample_elements(&ctx, 3, max_weight, C7_SAMPLES, seed).unwrap();
            for (i, w) in samples.iter().enumerate() {
                let report = nil_index(w, &ctx, None).unwrap();
                assert!(report.nil_index.is_some(), "p={p} sample {i} not nil in budget");
                assert!(report.trajectory_ok, "p={p} sample {i} trajectory violation");
                total += 1;
            }
        }
    }
    let elapsed = t.elapsed().as_secs_f64();
    verdict(
        7,
        total == 4 * C7_SAMPLES && elapsed < C7_TIME_LIMIT,
        &format!("{total} sampled elements nil with clean trajectories, {elapsed:.1}s"),
    );
}

#[test]
fn c08_growth_against_rank_oracle() {
    // p = 2, weights up to 8, truncation depths up to 3 where the full ring
    // fits: wild at depth 1 (512 monomials), clover at depths 2 and 3 (512
    // and 4096).
    let mut lines = Vec::new();
    for (ctx, depth, label) in [
        (wild_ctx(3, 2, 1), 1u32, "wild d1"),
        (clover_ctx(2, 2), 2, "clover d2"),
        (clover_ctx(2, 3), 3, "clover d3"),
    ] {
        let table = enumerate(&ctx, 8, depth).unwrap();
        let oracle = matrix_rank_gamma(&ctx, 8, depth, 1 << 13).unwrap();
        for n in 1..=8u64 {
            assert_eq!(table.gamma(n), oracle[n as usize - 1], "{label} gamma({n})");
        }
        lines.push(format!("{label} gamma(8)={}", table.gamma(8)));
    }
    verdict(8, true, &lines.join(", "));
}

const C9_N: u64 = 2048;
const C9_DEPTH: u32 = 8;
const C9_SLOPE_BAND: (f64, f64) = (1.6, 2.1);
const C9_TIME_LIMIT: f64 = 600.0;

#[test]
fn c09_clover_growth_exponent() {
    // Reference exponent log_3(8) ~ 1.893: the fitted slope of ln gamma
    // against ln n over the trailing window must land in the pinned band.
    let t = Instant::now();
    let ctx = clover_ctx(2, C9_DEPTH);
    let opts = EnumerateOptions { keep_rows: false, ..Default::default() };
    let (table, _) = enumerate_with(&ctx, C9_N, C9_DEPTH, &opts).unwrap();
    let fit = gk_fit(&table, 0).unwrap();
    let elapsed = t.elapsed().as_secs_f64();
    let in_band = fit.lower > C9_SLOPE_BAND.0 && fit.upper < C9_SLOPE_BAND.1;
    verdict(
        9,
        in_band && elapsed < C9_TIME_LIMIT,
        &format!(
            "slope {:.4} [{:.4}, {:.4}] in ({}, {}), gamma({C9_N})={}, {elapsed:.1}s",
            fit.slope,
            fit.lower,
            fit.upper,
            C9_SLOPE_BAND.0,
            C9_SLOPE_BAND.1,
            table.gamma(C9_N)
        ),
    );
}

#[test]
fn c10_cut_growth_dominates() {
    // Rerooting one generation up divides the weight scale by the generation
    // weight q; the cut algebra's growth at n/q stays strictly below the base
    // growth at n, pointwise over the tested range.
    let clover = clover_ctx(2, 8);
    let rc = cut_compare(&clover, 1, 64, 7, 7).unwrap();
    assert!(rc.holds && !rc.degenerate, "clover cut: {rc:?}");
    assert_eq!(rc.weight_factor, 3);
    let wild = wild_ctx(3, 2, 3);
    let rw = cut_compare(&wild, 1, 32, 3, 2).unwrap();
    assert!(rw.holds && !rw.degenerate, "wild cut: {rw:?}");
    verdict(
        10,
        true,
        &format!(
            "clover N<=64 ({} points) and wild N<=32 ({} points) strictly dominated",
            rc.points.len(),
            rw.points.len()
        ),
    );
}

const C11_RATIO_CAP: f64 = 3.5;
const C11_TIME_LIMIT: f64 = 60.0;

#[test]
fn c11_oscillating_schedule_growth() {
    let t = Instant::now();
    let text = r#"{
        "k": 3,
        "segments": [
            {"rule": "wild", "length": 1},
            {"rule": "clover", "length": 14},
            {"rule": "wild", "length": 2},
            {"rule": "clover", "length": 58}
        ]
    }"#;
    let sp = parse_schedule(text).unwrap().build().unwrap();
    assert_eq!(sp.last_gen(), 75);
    let pins: [(u32, u128); 4] = [(1, 10), (15, 52), (17, 88), (75, 262)];
    for (m, want) in pins {
        let got = sp.groupoid_growth(1u128 << m).unwrap();
        assert_eq!(got, want, "gamma(2^{m})");
    }
    let r15 = 52.0 / 15.0;
    let r75 = 262.0 / 75.0;
    let elapsed = t.elapsed().as_secs_f64();
    verdict(
        11,
        r15 < C11_RATIO_CAP && r75 < C11_RATIO_CAP && elapsed < C11_TIME_LIMIT,
        &format!("75 generations; gamma pins hold; ratios {r15:.3}, {r75:.3} below {C11_RATIO_CAP}; {elapsed:.2}s"),
    );
}

#[test]
fn c12_coset_formula_and_bracket_independence() {
    // Formula against brute force.
    let mut counts = Vec::new();
    for n in 1..=3u32 {
        let brute = constrained_permutations(n, &leader_constraints(n, 1..n)).len();
        assert_eq!(BigUint::from(brute), sylow_coset_count(n).unwrap(), "n={n}");
        counts.push(brute);
    }
    assert_eq!(counts, vec![2, 12, 5040]);
    // Canonical representatives under the full constraint table, then the
    // halved-bracket family on permuted pivots stays linearly independent.
    let ctx = wild_ctx(4, 2, 2);
    let pivots: Vec<Derivation> = (0..4u32)
        .map(|i| virtual_pivot(&ctx, FlyId::new(0, i), 2).unwrap())
        .collect();
    let mut ranks = Vec::new();
    for n in 1..=2u32 {
        let reps = constrained_permutations(n, &leader_constraints(n, 0..n));
        assert_eq!(reps.len(), [1, 3][n as usize - 1], "representative count n={n}");
        let mut ech = FlatEchelon::new();
        let mut index = std::collections::HashMap::new();
        let mut rank = 0usize;
        for sigma in &reps {
            let args: Vec<Derivation> =
                sigma.iter().map(|&j| pivots[j as usize].clone()).collect();
            let f = halved_bracket(&args, &ctx).unwrap();
            assert!(!f.is_zero(), "bracket family member vanished, n={n}");
            if ech.insert(common::derivation_coords(&f, &mut index), &ctx.fp) {
                rank += 1;
            }
        }
        assert_eq!(rank, reps.len(), "independence failed at n={n}");
        ranks.push(rank);
    }
    verdict(
        12,
        ranks == vec![1, 3],
        &format!("coset counts {counts:?} match brute force; bracket ranks {ranks:?}"),
    );
}
