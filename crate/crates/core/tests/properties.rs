mod common;

use hybridcast::evaluation::{compute_metrics, dm_test, DmStatus};
use proptest::prelude::*;

fn pairs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..60).prop_flat_map(|n| (prop::collection::vec(1.0f64..500.0, n), prop::collection::vec(-100.0f64..600.0, n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rmse_never_below_mae((y, p) in pairs()) {
        let m = compute_metrics(&y, &p).unwrap();
        prop_assert!(m.rmse >= m.mae - 1e-12 * m.mae.max(1.0));
        prop_assert!(m.mape >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn metrics_ignore_sample_order((y, p) in pairs(), rot in 0usize..60) {
        let m = compute_metrics(&y, &p).unwrap();
        let k = rot % y.len();
        let mut y2 = y.clone();
        let mut p2 = p.clone();
        y2.rotate_left(k);
        p2.rotate_left(k);
        y2.reverse();
        p2.reverse();
        let r = compute_metrics(&y2, &p2).unwrap();
        prop_assert!((m.mape - r.mape).abs() <= 1e-12 * m.mape.max(1.0));
        prop_assert!((m.mae - r.mae).abs() <= 1e-12 * m.mae.max(1.0));
        prop_assert!((m.rmse - r.rmse).abs() <= 1e-12 * m.rmse.max(1.0));
    }

    #[test]
    fn scaling_moves_only_scale_dependent_metrics((y, p) in pairs(), c in 0.01f64..100.0) {
        let m = compute_metrics(&y, &p).unwrap();
        let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
        let ps: Vec<f64> = p.iter().map(|v| v * c).collect();
        let s = compute_metrics(&ys, &ps).unwrap();
        prop_assert!((s.mape - m.mape).abs() <= 1e-9 * m.mape.max(1.0));
        prop_assert!((s.mae - c * m.mae).abs() <= 1e-9 * (c * m.mae).max(1.0));
        prop_assert!((s.rmse - c * m.rmse).abs() <= 1e-9 * (c * m.rmse).max(1.0));
    }

    #[test]
    fn dm_swapping_models_flips_the_sign(
        (y, a) in (10usize..80).prop_flat_map(|n| (prop::collection::vec(1.0f64..300.0, n), prop::collection::vec(0.5f64..1.5, n))),
        noise in prop::collection::vec(-30.0f64..30.0, 80),
        h in 1usize..4,
    ) {
        let pa: Vec<f64> = y.iter().zip(&a).map(|(v, f)| v * f).collect();
        let pb: Vec<f64> = y.iter().zip(&noise).map(|(v, e)| v + e).collect();
        let ab = dm_test(&y, &pa, &pb, h, false).unwrap();
        let ba = dm_test(&y, &pb, &pa, h, false).unwrap();
        prop_assert_eq!(ab.status, ba.status);
        if ab.status == DmStatus::Ok {
            let (s1, s2) = (ab.statistic.unwrap(), ba.statistic.unwrap());
            prop_assert!((s1 + s2).abs() <= 1e-10 * s1.abs().max(1.0));
            prop_assert!((ab.p_value.unwrap() - ba.p_value.unwrap()).abs() <= 1e-12);
        }
    }
}

#[test]
fn metrics_match_straight_loops() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(40);
    for n in [1, 2, 7, 24, 100, 1000] {
        let (y, a, _) = common::forecast_triplet(&mut rng, n);
        let m = compute_metrics(&y, &a).unwrap();
        let o = common::metric_oracle(&y, &a);
        for (got, want) in m.criteria().iter().zip(o) {
            assert!((got - want).abs() <= 1e-12 * want.max(1.0), "n={n}: {got} vs {want}");
        }
    }
}

#[test]
fn dm_matches_banded_sum() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
    for n in [10, 50, 120] {
        for h in [1, 2, 3] {
            let (y, a, b) = common::forecast_triplet(&mut rng, n);
            let r = dm_test(&y, &a, &b, h, false).unwrap();
            let (stat, p) = common::dm_oracle(&y, &a, &b, h);
            if r.status == DmStatus::Ok {
                assert!((r.statistic.unwrap() - stat).abs() < 1e-10, "n={n} h={h}");
                assert!((r.p_value.unwrap() - p).abs() < 1e-8, "n={n} h={h}");
            } else {
                assert!(!(stat.is_finite()), "oracle finite where the test declined");
            }
        }
    }
}
