use chrono::{Duration, NaiveDate};
use lamol_core::engine::{run_episode, LearnerKind, RunConfig, RunTrace};
use lamol_core::evaluation::{
    day_windows_backward, day_windows_forward, global_ma_error, global_mc_error, local_multiaccuracy_error,
    sliding_sums, EvalMode, WindowSpec,
};
use lamol_core::ingest::{Record, SampleStream};
use lamol_core::objectives::{FeatureValue, Features, GroupFunction, GroupRule, LabelRange, ProblemSpec};
use lamol_core::weights::EtaMode;
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Step {
    y: f64,
    x: f64,
    gap_days: i64,
}

fn steps(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Step>> {
    prop::collection::vec(
        (0.0..=1.0f64, 0.0..1.0f64, prop_oneof![3 => Just(0i64), 2 => Just(1), 1 => 2i64..5])
            .prop_map(|(y, x, gap_days)| Step { y, x, gap_days }),
        len,
    )
}

/// Runs a Fixed Share multiaccuracy learner over the steps with three groups:
/// everything, `x < 0.5`, and the coordinate `x` itself.
fn trace(steps: &[Step], range: LabelRange, problem: ProblemSpec) -> RunTrace {
    let mut s = SampleStream::new("prop", range);
    let mut day = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    for st in steps {
        day += Duration::days(st.gap_days);
        s.records.push(Record {
            timestamp: Some(day.and_hms_opt(0, 0, 0).unwrap()),
            features: Features::from([("x".to_string(), FeatureValue::Num(st.x))]),
            y: range.a + st.y * range.width(),
            baseline: None,
            group_values: Vec::new(),
        });
    }
    s.set_groups(vec![
        GroupFunction::constant("all", 1.0),
        GroupFunction::new("low", GroupRule::Interval { feature: "x".into(), lo: 0.0, hi: 0.5 }),
        GroupFunction::new("x", GroupRule::Coordinate { feature: "x".into(), offset: 0.0, scale: 1.0 }),
    ])
    .unwrap();
    let cfg = RunConfig::new("prop", problem, LearnerKind::FixedShare, EtaMode::Fixed { value: 0.3 });
    run_episode(&cfg, &s).unwrap()
}

fn range() -> impl Strategy<Value = LabelRange> {
    (-2.0..2.0f64, 0.5..3.0f64).prop_map(|(a, w)| LabelRange::new(a, a + w).unwrap())
}

fn problem() -> impl Strategy<Value = ProblemSpec> {
    prop_oneof![Just(ProblemSpec::Ma), (1usize..6).prop_map(|bins| ProblemSpec::Mc { bins })]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn local_ma_matches_brute_force(steps in steps(1..200), r in range(), width_frac in 0.0..1.0f64) {
        let tr = trace(&steps, r, ProblemSpec::Ma);
        let n = tr.len();
        let width = 1 + ((n - 1) as f64 * width_frac) as usize;
        let series = local_multiaccuracy_error(&tr, None, &WindowSpec::steps(width), EvalMode::Realized).unwrap();
        prop_assert_eq!(series.len(), n - width + 1);
        for (k, &v) in series.values.iter().enumerate() {
            let mut best: f64 = 0.0;
            for g in 0..3 {
                for sign in [1.0, -1.0] {
                    let mean = tr.steps[k..k + width]
                        .iter()
                        .map(|s| sign * s.group_values[g] * (s.y - s.p) / r.width())
                        .sum::<f64>()
                        / width as f64;
                    best = best.max(mean);
                }
            }
            prop_assert!((v - best).abs() <= 1e-12);
            prop_assert_eq!(series.ends[k], k + width);
        }
    }

    #[test]
    fn fewer_groups_never_raise_the_error(steps in steps(10..150), r in range(), subset in prop::sample::subsequence(vec![0usize, 1, 2], 1..=3)) {
        let tr = trace(&steps, r, ProblemSpec::Ma);
        let spec = WindowSpec::steps(10);
        let all = local_multiaccuracy_error(&tr, None, &spec, EvalMode::Realized).unwrap();
        let some = local_multiaccuracy_error(&tr, Some(&subset), &spec, EvalMode::Realized).unwrap();
        for (a, s) in all.values.iter().zip(&some.values) {
            prop_assert!(s <= a);
        }
    }

    #[test]
    fn multicalibration_bounds_multiaccuracy(steps in steps(1..150), r in range(), p in problem(), m in 1usize..30) {
        let tr = trace(&steps, r, p);
        let ma = global_ma_error(&tr);
        let mc = global_mc_error(&tr, m).unwrap();
        prop_assert!(ma <= m as f64 * mc + 0.5 / m as f64 + 1e-12);
    }

    #[test]
    fn day_windows_agree_in_both_directions(steps in steps(1..300), width in 1i64..40) {
        let mut days = Vec::with_capacity(steps.len());
        let mut d = 0;
        for (i, s) in steps.iter().enumerate() {
            if i > 0 {
                d += s.gap_days;
            }
            days.push(d);
        }
        prop_assert_eq!(day_windows_forward(&days, width), day_windows_backward(&days, width));
    }
}

proptest! {
    #[test]
    fn sliding_sums_match_recomputation(x in prop::collection::vec(-1.0..1.0f64, 1..2000), frac in 0.0..1.0f64) {
        let width = 1 + ((x.len() - 1) as f64 * frac) as usize;
        let sums = sliding_sums(&x, width);
        prop_assert_eq!(sums.len(), x.len() - width + 1);
        for (k, s) in sums.iter().enumerate() {
            let direct: f64 = x[k..k + width].iter().sum();
            prop_assert!((s - direct).abs() <= 1e-9);
        }
    }
}
