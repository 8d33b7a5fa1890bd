//! Property tests for the structural invariants: the probability law, the
//! matcher, the timing audit and the tick grid.

use belltag_core::*;
use proptest::prelude::*;

fn stream_strategy(max_len: usize) -> impl Strategy<Value = Vec<TimeTag>> {
    prop::collection::vec((1i64..5_000_000, 0u8..2, any::<bool>()), 0..max_len).prop_map(|raw| {
        let mut t = 0i64;
        raw.into_iter()
            .map(|(delta, setting, minus)| {
                t += delta;
                TimeTag {
                    timestamp_ps: t,
                    setting,
                    detector: if minus { Outcome::Minus } else { Outcome::Plus },
                }
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn probabilities_are_a_distribution(
        alpha in -10.0f64..10.0,
        beta in -10.0f64..10.0,
        v in 0.0f64..=1.0,
    ) {
        let params = EntangledStateParams { phase: std::f64::consts::PI, visibility: v };
        let p = outcome_probabilities(alpha, beta, &params).unwrap();
        for x in p.as_array() {
            prop_assert!(x >= 0.0 && x <= 1.0);
        }
        prop_assert!((p.as_array().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        prop_assert!((p.alice_plus_marginal() - 0.5).abs() < 1e-14);
        prop_assert!((p.bob_plus_marginal() - 0.5).abs() < 1e-14);
        let expected_e = -v * (2.0 * (beta - alpha)).cos();
        prop_assert!((p.correlation() - expected_e).abs() < 1e-13);
    }

    #[test]
    fn probabilities_are_rotation_invariant(
        delta in -6.0f64..6.0,
        rot in -6.0f64..6.0,
        v in 0.0f64..=1.0,
    ) {
        let params = EntangledStateParams { phase: std::f64::consts::PI, visibility: v };
        let base = outcome_probabilities(0.0, delta, &params).unwrap();
        let rotated = outcome_probabilities(rot, rot + delta, &params).unwrap();
        prop_assert!((base.pp - rotated.pp).abs() < 1e-12);
        prop_assert!((base.pm - rotated.pm).abs() < 1e-12);
    }

    #[test]
    fn quantize_lands_on_grid_at_nearest_point(t in -1_000_000_000i64..1_000_000_000, grid in 1i64..10_000) {
        let q = time::quantize_ps(t, grid);
        prop_assert_eq!(q.rem_euclid(grid), 0);
        prop_assert!((q - t).abs() * 2 <= grid);
    }

    #[test]
    fn sampled_outcome_matches_threshold_order(
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
        draw in 0.0f64..1.0,
    ) {
        let params = EntangledStateParams::ideal();
        let p = outcome_probabilities(alpha, beta, &params).unwrap();
        let j = sample_joint_outcome(alpha, beta, &params, draw).unwrap();
        let idx = if draw < p.pp { 0 } else if draw < p.pp + p.mm { 1 }
            else if draw < p.pp + p.mm + p.pm { 2 } else { 3 };
        let expect = [
            (Outcome::Plus, Outcome::Plus),
            (Outcome::Minus, Outcome::Minus),
            (Outcome::Plus, Outcome::Minus),
            (Outcome::Minus, Outcome::Plus),
        ][idx];
        prop_assert_eq!((j.alice, j.bob), expect);
    }

    #[test]
    fn matching_swaps_cleanly_and_stays_one_to_one(
        a in stream_strategy(300),
        b in stream_strategy(300),
        offset in -2_000_000i64..2_000_000,
        window_ns in 1i64..2_000,
    ) {
        let window = window_ns * time::PS_PER_NS;
        let fwd = match_coincidences(&a, &b, offset, window, MatchMode::OneToOne).unwrap();
        let mut a_used = std::collections::HashSet::new();
        let mut b_used = std::collections::HashSet::new();
        for p in &fwd.pairs {
            prop_assert!(a_used.insert(p.a_index));
            prop_assert!(b_used.insert(p.b_index));
            prop_assert!(2 * p.delta_ps.abs() <= window);
        }
        prop_assert_eq!(fwd.table.grand_total() as usize, fwd.pairs.len());

        let rev = match_coincidences(&b, &a, -offset, window, MatchMode::OneToOne).unwrap();
        let mut fwd_set: Vec<(usize, usize)> =
            fwd.pairs.iter().map(|p| (p.a_index, p.b_index)).collect();
        let mut rev_set: Vec<(usize, usize)> =
            rev.pairs.iter().map(|p| (p.b_index, p.a_index)).collect();
        fwd_set.sort_unstable();
        rev_set.sort_unstable();
        prop_assert_eq!(fwd_set, rev_set);
    }

    #[test]
    fn pair_count_grows_with_window(
        a in stream_strategy(200),
        b in stream_strategy(200),
        window_ns in 1i64..1_000,
    ) {
        let small = match_coincidences(&a, &b, 0, window_ns * time::PS_PER_NS, MatchMode::OneToOne)
            .unwrap()
            .pairs
            .len();
        let large =
            match_coincidences(&a, &b, 0, 2 * window_ns * time::PS_PER_NS, MatchMode::OneToOne)
                .unwrap()
                .pairs
                .len();
        prop_assert!(large >= small);
        // one-to-one never exceeds all-pairs
        let all = match_coincidences(&a, &b, 0, window_ns * time::PS_PER_NS, MatchMode::AllPairs)
            .unwrap()
            .pairs
            .len();
        prop_assert!(small <= all);
    }

    #[test]
    fn audit_is_monotone_and_scale_invariant(
        separation in 1.0f64..10_000.0,
        budget_ns in 0.0f64..10_000.0,
        scale in 0.01f64..100.0,
    ) {
        let g = Geometry { separation, ..Geometry::default() };
        let b = MeasurementBudget {
            choice_to_application: budget_ns * 1e-9,
            ..MeasurementBudget::default()
        };
        let r = audit(&g, &b).unwrap();
        prop_assert_eq!(r.pass, r.slack > 0.0);

        // more distance can only help; more budget can only hurt
        let farther = Geometry { separation: separation * 2.0, ..g };
        prop_assert!(audit(&farther, &b).unwrap().slack > r.slack);
        let slower = MeasurementBudget {
            choice_to_application: b.choice_to_application + 1e-9,
            ..b
        };
        prop_assert!(audit(&g, &slower).unwrap().slack < r.slack);

        // joint rescaling preserves the verdict
        let gk = Geometry { separation: separation * scale, ..g };
        let bk = MeasurementBudget {
            choice_to_application: b.choice_to_application * scale,
            application_to_registration: b.application_to_registration * scale,
            source_sync_skew: b.source_sync_skew * scale,
        };
        let rk = audit(&gk, &bk).unwrap();
        prop_assert_eq!(rk.pass, r.pass);
        prop_assert!((rk.margin_ratio - r.margin_ratio).abs() < 1e-9);
    }
}
