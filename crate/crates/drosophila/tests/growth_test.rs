mod common;

use common::{clover_ctx, matrix_rank_gamma, wild_ctx};
use drosophila::growth::{
    bound_overlay, cut_compare, direct_span_gamma, enumerate, gk_fit, quasi_linear_reference,
    stabilize_depth, Stability, TupleGenerator,
};
use drosophila::species::Specie;
use drosophila::Ctx;
use drosophila::dpring::PrimeField;

#[test]
fn enumerate_matches_matrix_rank_oracle_wild() {
    // Same truncation, two entirely different representations: symbolic
    // pure-monomial coordinates vs operators on the 512-element ring.
    let ctx = wild_ctx(3, 2, 1);
    let table = enumerate(&ctx, 8, 1).unwrap();
    let oracle = matrix_rank_gamma(&ctx, 8, 1, 1 << 12).unwrap();
    for n in 1..=8u64 {
        assert_eq!(table.gamma(n), oracle[n as usize - 1], "gamma({n})");
    }
}

#[test]
fn enumerate_matches_matrix_rank_oracle_clover() {
    for (p, depth, nmax) in [(2u64, 2u32, 8u64), (2, 3, 8), (3, 2, 6)] {
        let ctx = clover_ctx(p, depth);
        let table = enumerate(&ctx, nmax, depth).unwrap();
        let oracle = matrix_rank_gamma(&ctx, nmax, depth, 1 << 20).unwrap();
        for n in 1..=nmax {
            assert_eq!(
                table.gamma(n),
                oracle[n as usize - 1],
                "p={p} depth={depth} gamma({n})"
            );
        }
    }
}

#[test]
fn enumerate_matches_direct_span_clover() {
    for p in [2u64, 3] {
        let ctx = clover_ctx(p, 3);
        let table = enumerate(&ctx, 8, 3).unwrap();
        let span = direct_span_gamma(&ctx, 8, 3).unwrap();
        for n in 1..=8u64 {
            assert_eq!(table.gamma(n), span[n as usize - 1], "p={p} gamma({n})");
        }
    }
}

#[test]
fn stabilization_on_wild_p3() {
    // Dimensions at weight <= 6 settle once the truncation depth passes 2;
    // the stabilized table then agrees with the independent span oracle at
    // both the settled depth and one deeper.
    let ctx = wild_ctx(3, 3, 3);
    let (depth, table) = stabilize_depth(&ctx, 6, 1).unwrap();
    assert!(depth <= 2, "expected settling by depth 2, got {depth}");
    let span_lo = direct_span_gamma(&ctx, 6, depth).unwrap();
    let span_hi = direct_span_gamma(&ctx, 6, depth + 1).unwrap();
    for n in 1..=6u64 {
        assert_eq!(table.gamma(n), span_lo[n as usize - 1], "gamma({n}) at {depth}");
        assert_eq!(table.gamma(n), span_hi[n as usize - 1], "gamma({n}) at {}", depth + 1);
    }
    assert!(matches!(table.status, Stability::Stable | Stability::ProvedStable));
}

#[test]
fn unstable_when_budget_exhausted() {
    // A specie built only to depth 1 cannot settle weight-6 dimensions.
    let ctx = wild_ctx(3, 2, 1);
    let (depth, table) = stabilize_depth(&ctx, 6, 0).unwrap();
    assert_eq!(depth, 1);
    assert_eq!(table.status, Stability::Unstable);
}

#[test]
fn cut_report_holds_on_clover() {
    let ctx = clover_ctx(2, 6);
    let report = cut_compare(&ctx, 1, 24, 5, 5).unwrap();
    assert!(report.holds, "cut comparison failed: {report:?}");
    assert!(!report.degenerate);
    assert_eq!(report.cut_generation, 1);
    assert_eq!(report.weight_factor, 3);
    // Strict inequality at every recorded point.
    for pt in &report.points {
        assert!(pt.gamma_cut < pt.gamma_base, "n={}: {} !< {}", pt.n, pt.gamma_cut, pt.gamma_base);
    }
}

#[test]
fn gk_fit_on_real_clover_table() {
    // Small-N fit lands in a loose quadratic-ish band; the pinned tight check
    // at N = 2048 lives in the acceptance suite.
    let ctx = clover_ctx(2, 7);
    let table = enumerate(&ctx, 256, 7).unwrap();
    let fit = gk_fit(&table, 0).unwrap();
    assert!(fit.slope > 1.2 && fit.slope < 2.3, "slope {} out of band", fit.slope);
}

#[test]
fn tuple_generator_round_trip() {
    let gens = [
        TupleGenerator::Trivial,
        TupleGenerator::Kappa { kappa: 0.5 },
        TupleGenerator::QKappa { q: 1, kappa: std::f64::consts::LN_2 * 2.0 },
        TupleGenerator::Constant { s: 2, r: 1 },
    ];
    for g in &gens {
        let json = serde_json::to_string(g).unwrap();
        let back: TupleGenerator = serde_json::from_str(&json).unwrap();
        assert_eq!(format!("{back:?}"), format!("{g:?}"));
    }
    // Realization covers every generation of the target specie.
    let sp = Specie::clover(4).unwrap();
    let tuple = TupleGenerator::Kappa { kappa: 0.5 }.realize(&sp, 2).unwrap();
    assert!(tuple.check_covers(&sp).is_ok());
}

#[test]
fn growth_table_serializes_with_config() {
    let ctx = clover_ctx(2, 2);
    let table = enumerate(&ctx, 4, 2).unwrap();
    let json = serde_json::to_string(&table).unwrap();
    for field in ["\"p\":", "\"depth\":", "\"max_weight\":", "\"rows\":"] {
        assert!(json.contains(field), "missing {field} in {json}");
    }
}

#[test]
fn overlay_and_quasilinear_sanity() {
    let (lo, hi) = bound_overlay(2, 100, 0.5, 2.0).unwrap();
    assert!(lo < hi && lo > 0.0);
    let (lo3, _) = bound_overlay(3, 100, 0.5, 2.0).unwrap();
    // Larger p gives a higher log exponent, hence smaller envelope at n=100.
    assert!(lo3 < lo);
    let q1 = quasi_linear_reference(100, 1, 1.0).unwrap();
    let q2 = quasi_linear_reference(1000, 1, 1.0).unwrap();
    assert!(q2 > q1, "quasi-linear reference must grow");
}

#[test]
fn schedule_species_enumerate() {
    // Growth runs work on hybrid schedule species, not just the built-ins.
    let text = r#"{"k": 3, "segments": [{"rule": "wild", "length": 1}, {"rule": "clover", "length": 2}]}"#;
    let sp = drosophila::species::parse_schedule(text).unwrap().build().unwrap();
    let tuple = drosophila::dpring::ExponentTuple::trivial(&sp);
    let ctx = Ctx::new(PrimeField::new(2).unwrap(), sp, tuple).unwrap();
    let table = enumerate(&ctx, 6, 3).unwrap();
    assert!(table.gamma(6) > table.gamma(1));
    let span = direct_span_gamma(&ctx, 6, 3).unwrap();
    for n in 1..=6u64 {
        assert_eq!(table.gamma(n), span[n as usize - 1], "gamma({n})");
    }
}
