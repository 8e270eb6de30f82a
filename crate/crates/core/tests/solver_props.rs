use lamol_core::minimax::{
    loss_gradient, ogd_baseline_step, solve_mean_ma_pred, solve_zero_sum, BaselineParams, GameMatrix, SolverSettings,
};
use lamol_core::objectives::{CostKind, LabelRange};
use proptest::prelude::*;

fn matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..10, 1usize..10)
        .prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(-1.0..1.0f64, c), r))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// The returned row mixture guarantees `value`, and the column mixture
    /// leaves no row better than `value - tol`.
    #[test]
    fn game_solutions_are_sound(u in matrix()) {
        let game = GameMatrix::from_rows(&u).unwrap();
        let settings = SolverSettings::default();
        let sol = solve_zero_sum(&game, &settings).unwrap();
        prop_assert!((sol.row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!((sol.col.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(sol.row.iter().chain(&sol.col).all(|&v| v >= 0.0));
        prop_assert!(game.row_value(&sol.row) <= sol.value + settings.tol);
        prop_assert!(game.col_value(&sol.col) >= sol.value - settings.tol);
    }

    /// Against the best label the closed form is no worse than any of 1001
    /// grid predictions.
    #[test]
    fn closed_form_beats_the_grid(
        a_pressure in -1.0..=1.0f64,
        q_pred in 0.0..=1.0f64,
        base_frac in 0.0..=1.0f64,
        a in -3.0..3.0f64,
        w in 0.1..4.0f64,
    ) {
        let range = LabelRange::new(a, a + w).unwrap();
        let p_base = range.clip(a + base_frac * w);
        let worst = |p: f64| {
            [range.a, range.b]
                .iter()
                .map(|&y| a_pressure * (y - p) / w + q_pred * ((p - y).powi(2) - (p_base - y).powi(2)) / (w * w))
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let p = solve_mean_ma_pred(a_pressure, q_pred, p_base, &range, CostKind::Squared).unwrap();
        prop_assert!(range.contains(p));
        let grid = (0..=1000).map(|i| worst(a + w * i as f64 / 1000.0)).fold(f64::INFINITY, f64::min);
        prop_assert!(worst(p) <= grid + 1e-12);
        prop_assert!(grid - worst(p) <= 1e-3);
    }

    #[test]
    fn gradient_matches_finite_differences(
        beta in prop::collection::vec(-2.0..2.0f64, 1..6),
        xs in prop::collection::vec(-2.0..2.0f64, 6),
        y in 0.0..1.0f64,
    ) {
        let x = &xs[..beta.len()];
        let params = BaselineParams { beta: beta.clone(), step: 0.01 };
        let g = loss_gradient(&params, x, y, CostKind::Squared).unwrap();
        let loss = |b: &[f64]| {
            let pred: f64 = b.iter().zip(x).map(|(u, v)| u * v).sum();
            (pred - y).powi(2)
        };
        let h = 1e-5;
        for i in 0..beta.len() {
            let mut up = beta.clone();
            let mut down = beta.clone();
            up[i] += h;
            down[i] -= h;
            let fd = (loss(&up) - loss(&down)) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1.0));
        }
        let next = ogd_baseline_step(&params, x, y, CostKind::Squared).unwrap();
        for i in 0..beta.len() {
            prop_assert!((next.beta[i] - (beta[i] - 0.01 * g[i])).abs() < 1e-15);
        }
    }
}
