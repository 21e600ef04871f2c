mod common;

use std::collections::BTreeMap;

use chrono::{Days, NaiveDate};
use common::{grid_mbd, random_step_curve, seeded};
use proptest::prelude::*;
use tokencurves::depth::{betti_pivot, mbd, rolling_depth, ModifiedBandDepth};
use tokencurves::homology::BettiCurve;

#[test]
fn exact_matches_grid_on_random_triples() {
    let mut rng = seeded(2024);
    for _ in 0..60 {
        let curves: Vec<BettiCurve> = (0..3).map(|_| random_step_curve(&mut rng, 3, 5)).collect();
        let refs: Vec<&BettiCurve> = curves.iter().collect();
        for c in &curves {
            let exact = mbd(c, &refs).unwrap();
            let approx = grid_mbd(c, &refs, 1e-4);
            assert!((exact - approx).abs() < 1e-3, "{exact} vs {approx}");
        }
    }
}

#[test]
fn step_against_straddling_constants() {
    // 0 below 0.5, 3 above; constants 1 and 2 straddle neither half
    let y = BettiCurve::new(0, vec![0.0, 0.5], vec![0, 3], 1.0).unwrap();
    let (lo, hi) = (
        BettiCurve::constant(0, 1, 1.0),
        BettiCurve::constant(0, 2, 1.0),
    );
    let coll = [&y, &lo, &hi];
    let exact = mbd(&y, &coll).unwrap();
    // bands (y,lo) and (y,hi) always contain y, (lo,hi) never does
    assert!((exact - 2.0 / 3.0).abs() < 1e-15);
    assert!((grid_mbd(&y, &coll, 1e-4) - exact).abs() < 1e-3);
}

fn day(i: u64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2019, 1, 1).unwrap() + Days::new(i)
}

#[test]
fn rolling_depth_of_identical_window_is_one() {
    let c = BettiCurve::new(1, vec![0.0, 0.3, 0.6], vec![0, 2, 1], 1.0).unwrap();
    let series: BTreeMap<NaiveDate, BettiCurve> = (0..10).map(|i| (day(i), c.clone())).collect();
    for i in 0..10 {
        assert_eq!(
            rolling_depth(&ModifiedBandDepth::default(), &series, day(i), 7).unwrap(),
            Some(1.0)
        );
    }
}

#[test]
fn rolling_depth_skips_calendar_gaps() {
    let mut series = BTreeMap::new();
    series.insert(day(0), BettiCurve::constant(0, 9, 1.0));
    series.insert(day(5), BettiCurve::constant(0, 1, 1.0));
    series.insert(day(6), BettiCurve::constant(0, 2, 1.0));
    series.insert(day(7), BettiCurve::constant(0, 3, 1.0));
    let m = ModifiedBandDepth::default();
    // window of 3 days at day 7 is days 5..=7
    let rd = rolling_depth(&m, &series, day(7), 3).unwrap().unwrap();
    assert!((rd - 2.0 / 3.0).abs() < 1e-15);
    // a window of 8 days reaches back to day 0
    let rd8 = rolling_depth(&m, &series, day(7), 8).unwrap().unwrap();
    // pairs among {9,1,2,3}: containing 3 are (9,1),(9,2),(9,3),(1,3),(2,3)
    assert!((rd8 - 5.0 / 6.0).abs() < 1e-15);
}

fn curve_strategy() -> impl Strategy<Value = BettiCurve> {
    proptest::collection::vec((1u32..1000, 0usize..6), 0..4).prop_flat_map(|jumps| {
        (0usize..6).prop_map(move |first| {
            let mut pts: Vec<(f64, usize)> =
                jumps.iter().map(|&(x, v)| (x as f64 / 1000.0, v)).collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            pts.dedup_by(|a, b| a.0 == b.0);
            let mut bps = vec![0.0];
            let mut vals = vec![first];
            for (x, v) in pts {
                bps.push(x);
                vals.push(v);
            }
            BettiCurve::new(2, bps, vals, 1.0).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn scores_lie_in_unit_interval_and_ignore_order(
        coll in proptest::collection::vec(curve_strategy(), 2..7),
        rot in 0usize..7,
    ) {
        let refs: Vec<&BettiCurve> = coll.iter().collect();
        let mut rotated = refs.clone();
        rotated.rotate_left(rot % refs.len());
        rotated.reverse();
        for c in &coll {
            let a = mbd(c, &refs).unwrap();
            let b = mbd(c, &rotated).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicate_subject_never_lowers_depth(
        coll in proptest::collection::vec(curve_strategy(), 2..6),
        pick in 0usize..6,
    ) {
        let subject = &coll[pick % coll.len()];
        let refs: Vec<&BettiCurve> = coll.iter().collect();
        let mut with_dup = refs.clone();
        with_dup.push(subject);
        prop_assert!(mbd(subject, &with_dup).unwrap() >= mbd(subject, &refs).unwrap() - 1e-12);
    }

    #[test]
    fn pivot_is_an_argmax(coll in proptest::collection::vec(curve_strategy(), 1..7)) {
        let refs: Vec<&BettiCurve> = coll.iter().collect();
        let m = ModifiedBandDepth::default();
        let p = betti_pivot(&m, &refs).unwrap();
        if refs.len() >= 2 {
            let best = mbd(refs[p], &refs).unwrap();
            for (i, c) in refs.iter().enumerate() {
                let s = mbd(c, &refs).unwrap();
                prop_assert!(best >= s);
                if i < p {
                    prop_assert!(s < best, "earlier tie should have won");
                }
            }
        }
    }

    #[test]
    fn exact_agrees_with_grid(coll in proptest::collection::vec(curve_strategy(), 2..5)) {
        let refs: Vec<&BettiCurve> = coll.iter().collect();
        for c in &coll {
            prop_assert!((mbd(c, &refs).unwrap() - grid_mbd(c, &refs, 1e-4)).abs() < 1e-3);
        }
    }
}
