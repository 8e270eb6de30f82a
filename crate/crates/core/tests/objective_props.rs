use lamol_core::objectives::{
    coverage_loss, multiaccuracy_loss, multicalibration_loss, prediction_error_loss, quantile_pred_loss, BinGrid,
    CostKind, LabelRange, Sign,
};
use proptest::prelude::*;

/// A label range and three points inside it.
fn range_and_points() -> impl Strategy<Value = (LabelRange, f64, f64, f64)> {
    (-5.0..5.0f64, 0.01..10.0f64, 0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64).prop_map(|(a, w, u, v, s)| {
        let r = LabelRange::new(a, a + w).unwrap();
        (r, r.clip(a + u * w), r.clip(a + v * w), r.clip(a + s * w))
    })
}

fn sign() -> impl Strategy<Value = Sign> {
    prop_oneof![Just(Sign::Plus), Just(Sign::Minus)]
}

fn in_unit_ball(v: f64) -> bool {
    (-1.0..=1.0).contains(&v)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn losses_are_bounded(
        (range, p, y, base) in range_and_points(),
        f in 0.0..=1.0f64,
        s in sign(),
        bins in 1usize..40,
        bin_frac in 0.0..1.0f64,
        alpha in 0.001..0.999f64,
    ) {
        let bin = ((bin_frac * bins as f64) as usize).min(bins - 1);
        prop_assert!(in_unit_ball(multiaccuracy_loss(f, s, p, y, &range).unwrap()));
        prop_assert!(in_unit_ball(prediction_error_loss(p, base, y, CostKind::Squared, &range).unwrap()));
        prop_assert!(in_unit_ball(multicalibration_loss(f, s, bin, bins, p, y, &range).unwrap()));
        prop_assert!(in_unit_ball(coverage_loss(f, s, p, y, alpha).unwrap()));
        prop_assert!(in_unit_ball(quantile_pred_loss(p, base, y, alpha, &range).unwrap()));
    }

    #[test]
    fn multiaccuracy_signs_are_antisymmetric((range, p, y, _) in range_and_points(), f in 0.0..=1.0f64) {
        let plus = multiaccuracy_loss(f, Sign::Plus, p, y, &range).unwrap();
        let minus = multiaccuracy_loss(f, Sign::Minus, p, y, &range).unwrap();
        prop_assert_eq!(plus, -minus);
    }

    #[test]
    fn bins_partition_the_unit_interval(bins in 1usize..200, u in 0.0..=1.0f64) {
        let grid = BinGrid::new(bins).unwrap();
        let hits = (0..bins).filter(|&j| grid.contains(j, u)).count();
        prop_assert_eq!(hits, 1);
        let j = grid.bin_of(u);
        let (lo, hi) = grid.bounds(j);
        prop_assert!(lo <= u && (u < hi || (j == bins - 1 && u <= hi)));
        let mid = grid.midpoint(j);
        prop_assert!(lo < mid && mid < hi);
        prop_assert_eq!(grid.bin_of(mid), j);
    }

    /// Over a discrete distribution on a grid of labels, the squared-error
    /// minimiser found by grid search sits at the distribution mean.
    #[test]
    fn squared_error_is_proper(weights in prop::collection::vec(0.0..1.0f64, 2..8)) {
        prop_assume!(weights.iter().sum::<f64>() > 1e-3);
        let z: f64 = weights.iter().sum();
        let k = weights.len();
        let ys: Vec<f64> = (0..k).map(|i| i as f64 / (k - 1) as f64).collect();
        let mean: f64 = ys.iter().zip(&weights).map(|(y, w)| y * w / z).sum();
        let range = LabelRange::unit();
        let expected = |p: f64| -> f64 {
            ys.iter()
                .zip(&weights)
                .map(|(&y, w)| w / z * prediction_error_loss(p, 0.5, y, CostKind::Squared, &range).unwrap())
                .sum()
        };
        let n = 2000;
        let best = (0..=n)
            .map(|i| i as f64 / n as f64)
            .min_by(|a, b| expected(*a).total_cmp(&expected(*b)))
            .unwrap();
        prop_assert!((best - mean).abs() <= 1.0 / n as f64);
    }
}
