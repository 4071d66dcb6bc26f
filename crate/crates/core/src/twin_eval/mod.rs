//! Criterion-based comparison of twin channels with the human channel.

mod baseline;
mod metrics;
mod replication;

pub use baseline::{null_answer, random_baseline, BaselineMetric};
pub use metrics::{
    error_slope, error_slopes, item_accuracy, item_level_correlations, profile_correlations, task_accuracy, AccuracyReport,
    BaselineInterval, CorrelationEntry, CorrelationLevel, CorrelationMethod, CorrelationReport, Exclusion, SlopeReport,
    TaskAccuracy, TaskSlope,
};
pub use replication::{
    replication_report, ArmSummary, Design, Direction, Experiment, ExperimentSpec, ReplicationOutcome, ReplicationTest,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{Answer, ItemKind, ItemMeta, ResponseDataset};
    use crate::stats::{fisher_z_mean, RngStream};
    use crate::Error;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    type Grid = Vec<Vec<Option<Answer>>>;

    fn build(items: Vec<ItemMeta>, human: Grid, twin: Grid) -> ResponseDataset {
        let participants = (0..human.len()).map(|i| format!("p{i:03}")).collect();
        let mut ch = BTreeMap::new();
        ch.insert("human".to_string(), human);
        ch.insert("twin".to_string(), twin);
        ResponseDataset::new(items, participants, ch, "human").unwrap()
    }

    fn values(rows: &[&[f64]]) -> Grid {
        rows.iter().map(|r| r.iter().map(|v| Some(Answer::Value(*v))).collect()).collect()
    }

    fn num(id: &str, task: &str, lo: f64, hi: f64) -> ItemMeta {
        ItemMeta::scalar(id, task, ItemKind::Numeric, lo, hi)
    }

    fn yes_no(id: &str, task: &str) -> ItemMeta {
        ItemMeta::choice(id, task, ItemKind::Binary, &["Yes", "No"])
    }

    #[test]
    fn item_accuracy_examples() {
        let b = yes_no("b", "t");
        assert_eq!(item_accuracy(&Answer::Choice(0), &Answer::Choice(0), &b).unwrap(), 1.0);
        assert_eq!(item_accuracy(&Answer::Choice(0), &Answer::Choice(1), &b).unwrap(), 0.0);
        let n = num("n", "t", 0.0, 100.0);
        assert_abs_diff_eq!(item_accuracy(&Answer::Value(70.0), &Answer::Value(30.0), &n).unwrap(), 0.6, epsilon = 1e-12);
        assert_eq!(item_accuracy(&Answer::Value(42.0), &Answer::Value(42.0), &n).unwrap(), 1.0);
    }

    #[test]
    fn item_accuracy_rejects_bad_input() {
        let mut flat = num("n", "t", 5.0, 5.0);
        assert!(matches!(
            item_accuracy(&Answer::Value(5.0), &Answer::Value(5.0), &flat),
            Err(Error::Config(_))
        ));
        flat.range = Some((0.0, 1.0));
        assert!(item_accuracy(&Answer::Value(3.0), &Answer::Value(0.5), &flat).is_err());
        assert!(item_accuracy(&Answer::Choice(0), &Answer::Value(0.5), &flat).is_err());
    }

    #[test]
    fn task_mean_of_respondents() {
        let ds = build(vec![num("q", "t", 0.0, 10.0)], values(&[&[5.0], &[5.0]]), values(&[&[7.0], &[9.0]]));
        let r = task_accuracy(&ds, "twin").unwrap();
        assert_eq!(r.tasks.len(), 1);
        assert_abs_diff_eq!(r.tasks[0].per_respondent["p000"], 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(r.tasks[0].per_respondent["p001"], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(r.tasks[0].mean, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(r.overall, 0.7, epsilon = 1e-12);
    }

    #[test]
    fn identical_twin_scores_one_everywhere() {
        let items = vec![num("a", "t1", 0.0, 10.0), num("b", "t1", 0.0, 10.0), num("c", "t1", 0.0, 10.0), yes_no("d", "t2")];
        let human: Grid = (0..5)
            .map(|p| {
                let mut row: Vec<Option<Answer>> = (0..3).map(|i| Some(Answer::Value(((p * 3 + i * 7) % 11) as f64 % 10.0))).collect();
                row.push(Some(Answer::Choice(p % 2)));
                row
            })
            .collect();
        let ds = build(items, human.clone(), human);
        let acc = task_accuracy(&ds, "twin").unwrap();
        assert!(acc.per_item.values().all(|&a| a == 1.0));
        assert_eq!(acc.overall, 1.0);
        let ic = item_level_correlations(&ds, "twin", CorrelationMethod::Spearman).unwrap();
        assert!(ic.entries.iter().all(|e| (e.rho - 1.0).abs() < 1e-12));
        let pc = profile_correlations(&ds, "twin", CorrelationMethod::Spearman).unwrap();
        assert!(!pc.entries.is_empty());
        assert!(pc.entries.iter().all(|e| (e.rho - 1.0).abs() < 1e-12));
        let slope = error_slope(&ds, "twin", "t1").unwrap();
        assert_abs_diff_eq!(slope.slope, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn item_correlation_fisher_aggregate() {
        let h = [1.0, 2.0, 3.0, 4.0, 5.0];
        let t0 = [2.0, 5.0, 3.0, 1.0, 4.0];
        let t8 = [2.0, 1.0, 4.0, 3.0, 5.0];
        let human: Grid = (0..5).map(|p| vec![Some(Answer::Value(h[p])), Some(Answer::Value(h[p]))]).collect();
        let twin: Grid = (0..5).map(|p| vec![Some(Answer::Value(t0[p])), Some(Answer::Value(t8[p]))]).collect();
        let ds = build(vec![num("a", "t", 0.0, 10.0), num("b", "t", 0.0, 10.0)], human, twin);
        let r = item_level_correlations(&ds, "twin", CorrelationMethod::Spearman).unwrap();
        assert_abs_diff_eq!(r.entries[0].rho, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.entries[1].rho, 0.8, epsilon = 1e-12);
        // tanh(atanh(0.8) / 2) = 0.5
        assert_abs_diff_eq!(r.overall.unwrap(), 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(r.by_task()["t"], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn constant_twin_items_are_excluded() {
        let human = values(&[&[1.0], &[2.0], &[3.0], &[4.0]]);
        let twin = values(&[&[2.0], &[2.0], &[2.0], &[2.0]]);
        let ds = build(vec![num("a", "t", 0.0, 10.0)], human, twin);
        let r = item_level_correlations(&ds, "twin", CorrelationMethod::Spearman).unwrap();
        assert!(r.entries.is_empty());
        assert_eq!(r.excluded.len(), 1);
        assert_eq!(r.excluded[0].reason, "zero variance");
        assert_eq!(r.overall, None);
    }

    #[test]
    fn profile_correlation_example() {
        let items: Vec<ItemMeta> = (0..4).map(|i| ItemMeta::scalar(&format!("q{i}"), "t", ItemKind::Ordinal, 1.0, 5.0)).collect();
        let ds = build(items, values(&[&[1.0, 2.0, 3.0, 4.0]]), values(&[&[1.0, 3.0, 2.0, 4.0]]));
        let r = profile_correlations(&ds, "twin", CorrelationMethod::Spearman).unwrap();
        assert_eq!(r.entries.len(), 1);
        assert_abs_diff_eq!(r.entries[0].rho, 0.8, epsilon = 1e-12);
        assert_eq!(r.entries[0].n, 4);
    }

    #[test]
    fn profile_needs_three_items() {
        let items: Vec<ItemMeta> = (0..3).map(|i| num(&format!("q{i}"), "t", 0.0, 10.0)).collect();
        let mut human = values(&[&[1.0, 2.0, 3.0], &[1.0, 5.0, 9.0]]);
        human[1][2] = None;
        let twin = values(&[&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]]);
        let ds = build(items, human, twin);
        let r = profile_correlations(&ds, "twin", CorrelationMethod::Spearman).unwrap();
        assert_eq!(r.entries.len(), 1);
        assert_eq!(r.excluded.len(), 1);
        assert_eq!(r.excluded[0].unit, "p001");
    }

    fn slope_fixture(f: impl Fn(f64) -> f64) -> ResponseDataset {
        let hs = [1.0, 3.0, 4.0, 6.0, 9.0];
        let human: Grid = hs.iter().map(|h| vec![Some(Answer::Value(*h))]).collect();
        let twin: Grid = hs.iter().map(|h| vec![Some(Answer::Value(f(*h)))]).collect();
        build(vec![num("q", "t", 0.0, 20.0)], human, twin)
    }

    #[test]
    fn slope_examples() {
        let c = slope_fixture(|_| 5.0);
        let s = error_slope(&c, "twin", "t").unwrap();
        assert_abs_diff_eq!(s.slope, -1.0, epsilon = 1e-12);
        assert!(s.ci95.0 <= s.slope && s.slope <= s.ci95.1);
        let half = slope_fixture(|h| 0.5 * h + 2.0);
        assert_abs_diff_eq!(error_slope(&half, "twin", "t").unwrap().slope, -0.5, epsilon = 1e-12);
    }

    #[test]
    fn slope_with_constant_human_is_degenerate() {
        let ds = build(vec![num("q", "t", 0.0, 10.0)], values(&[&[4.0], &[4.0], &[4.0]]), values(&[&[1.0], &[2.0], &[3.0]]));
        assert!(matches!(error_slope(&ds, "twin", "t"), Err(Error::DegenerateRegressor(_))));
        let report = error_slopes(&ds, "twin").unwrap();
        assert!(report.tasks.is_empty());
        assert_eq!(report.excluded.len(), 1);
    }

    #[test]
    fn binary_baseline_centers_on_half() {
        let items: Vec<ItemMeta> = (0..10).map(|i| yes_no(&format!("b{i}"), "t")).collect();
        let human: Grid = (0..40).map(|p| (0..10).map(|i| Some(Answer::Choice((p + i) % 2))).collect()).collect();
        let ds = build(items, human.clone(), human);
        let rng = RngStream::new(7);
        let b = random_baseline(&ds, BaselineMetric::Accuracy, 400, &rng, CorrelationMethod::Spearman).unwrap();
        assert!(b.lo < 0.5 && 0.5 < b.hi, "{b:?}");
        assert_abs_diff_eq!(b.mean, 0.5, epsilon = 0.01);
        let again = random_baseline(&ds, BaselineMetric::Accuracy, 400, &rng, CorrelationMethod::Spearman).unwrap();
        assert_eq!(b, again);
    }

    #[test]
    fn numeric_baseline_matches_analytic_mean() {
        // E|U - 5| / 10 = 0.25 for U ~ U[0, 10]
        let human: Grid = (0..200).map(|_| vec![Some(Answer::Value(5.0))]).collect();
        let ds = build(vec![num("q", "t", 0.0, 10.0)], human.clone(), human);
        let b = random_baseline(&ds, BaselineMetric::Accuracy, 1000, &RngStream::new(1), CorrelationMethod::Spearman).unwrap();
        assert_abs_diff_eq!(b.mean, 0.75, epsilon = 0.01);
        assert!(0.0 <= b.lo && b.lo <= b.hi && b.hi <= 1.0);
    }

    #[test]
    fn correlation_baseline_in_codomain() {
        let items: Vec<ItemMeta> = (0..4).map(|i| ItemMeta::scalar(&format!("q{i}"), "t", ItemKind::Ordinal, 1.0, 7.0)).collect();
        let human: Grid = (0..30).map(|p| (0..4).map(|i| Some(Answer::Value((1 + (p * 5 + i * 3) % 7) as f64))).collect()).collect();
        let ds = build(items, human.clone(), human);
        for m in [BaselineMetric::ItemCorr, BaselineMetric::ProfileCorr] {
            let b = random_baseline(&ds, m, 200, &RngStream::new(3), CorrelationMethod::Spearman).unwrap();
            let (lo, hi) = m.codomain();
            assert!(lo <= b.lo && b.lo <= b.hi && b.hi <= hi, "{m:?} {b:?}");
            assert!(b.lo < 0.0 && b.hi > 0.0);
        }
    }

    fn between_fixture(a: &[f64], b: &[f64]) -> ResponseDataset {
        let mut human: Grid = Vec::new();
        for v in a {
            human.push(vec![Some(Answer::Value(*v)), None]);
        }
        for v in b {
            human.push(vec![None, Some(Answer::Value(*v))]);
        }
        build(vec![num("arm1", "t", 0.0, 20.0), num("arm2", "t", 0.0, 20.0)], human.clone(), human)
    }

    fn welch_spec() -> ExperimentSpec {
        toml::from_str(
            r#"
            [[experiment]]
            name = "anchoring"
            design = "between"
            test = "welch_t"
            arms = ["arm1", "arm2"]
            expected = "arm2_greater"
            "#,
        )
        .unwrap()
    }

    #[test]
    fn welch_replication_flags() {
        let ds = between_fixture(&[10.0, 10.0, 10.0], &[14.0, 14.0, 15.0]);
        let out = replication_report(&ds, "twin", &welch_spec()).unwrap();
        let o = out[0].as_ref().unwrap();
        assert!(o.test.statistic > 0.0 && o.test.p_value < 0.05);
        assert!(o.replicated);
        assert_eq!(o.arms[0].n, 3);

        let same = between_fixture(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
        let o = replication_report(&same, "human", &welch_spec()).unwrap().remove(0).unwrap();
        assert_abs_diff_eq!(o.test.statistic, 0.0, epsilon = 1e-12);
        assert!(!o.replicated);
    }

    #[test]
    fn unknown_item_is_spec_error() {
        let ds = between_fixture(&[1.0, 2.0], &[3.0, 4.0]);
        let mut spec = welch_spec();
        spec.experiments[0].arms[1] = "nope".into();
        assert!(matches!(replication_report(&ds, "twin", &spec), Err(Error::Spec(m)) if m.contains("nope")));
        spec.experiments[0].arms[1] = "arm2".into();
        spec.experiments[0].design = Design::Within;
        assert!(matches!(replication_report(&ds, "twin", &spec), Err(Error::Spec(_))));
    }

    #[test]
    fn chi_square_and_paired_replications() {
        let items = vec![yes_no("c1", "t"), yes_no("c2", "t"), num("w1", "t", 0.0, 10.0), num("w2", "t", 0.0, 10.0)];
        let mut human: Grid = Vec::new();
        for p in 0..40 {
            let c1 = if p < 20 { Some(Answer::Choice(usize::from(p % 10 == 0))) } else { None };
            let c2 = if p >= 20 { Some(Answer::Choice(usize::from(p % 10 != 0))) } else { None };
            let w1 = (p % 5) as f64;
            human.push(vec![c1, c2, Some(Answer::Value(w1)), Some(Answer::Value(w1 + 2.0))]);
        }
        let ds = build(items, human.clone(), human);
        let spec: ExperimentSpec = serde_json::from_str(
            r#"{"alpha": 0.05, "experiment": [
                {"name": "framing", "design": "between", "test": "chi_square2x2", "arms": ["c1", "c2"],
                 "expected": "arm2_greater", "success_option": 2},
                {"name": "paired", "design": "within", "test": "paired_t", "arms": ["w1", "w2"], "expected": "arm2_greater"},
                {"name": "prop", "design": "between", "test": "proportion", "arms": ["c1"], "expected": "negative", "success_option": 2}
            ]}"#,
        )
        .unwrap();
        let out = replication_report(&ds, "twin", &spec).unwrap();
        let chi = out[0].as_ref().unwrap();
        assert_abs_diff_eq!(chi.effect, 0.9 - 0.1, epsilon = 1e-12);
        assert!(chi.replicated);
        // constant differences: paired t is undefined, the Wilcoxon fallback runs
        let paired = out[1].as_ref().unwrap();
        assert_eq!(paired.test.method, crate::stats::TestMethod::WilcoxonNormal);
        assert!(paired.replicated);
        let prop = out[2].as_ref().unwrap();
        assert!(prop.effect < 0.0 && prop.replicated);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn slope_recovers_a_minus_one(a in -3.0f64..3.0, b in -5.0f64..5.0, hs in proptest::collection::vec(0.0f64..10.0, 3..30)) {
            prop_assume!(crate::stats::variance(&hs) > 1e-3);
            let human: Grid = hs.iter().map(|h| vec![Some(Answer::Value(*h))]).collect();
            let twin: Grid = hs.iter().map(|h| vec![Some(Answer::Value(a * h + b))]).collect();
            let ds = build(vec![num("q", "t", -100.0, 100.0)], human, twin);
            let s = error_slope(&ds, "twin", "t").unwrap();
            prop_assert!((s.slope - (a - 1.0)).abs() < 1e-9);
            prop_assert!(s.ci95.0 <= s.slope + 1e-12 && s.slope <= s.ci95.1 + 1e-12);
        }

        #[test]
        fn accuracy_is_order_invariant_and_bounded(
            cells in proptest::collection::vec((0.0f64..10.0, 0.0f64..10.0, 0usize..2, 0usize..2), 2..15),
            rot in 0usize..15,
        ) {
            let items = vec![num("n", "t1", 0.0, 10.0), yes_no("b", "t2")];
            let human: Grid = cells.iter().map(|c| vec![Some(Answer::Value(c.0)), Some(Answer::Choice(c.2))]).collect();
            let twin: Grid = cells.iter().map(|c| vec![Some(Answer::Value(c.1)), Some(Answer::Choice(c.3))]).collect();
            let r1 = task_accuracy(&build(items.clone(), human.clone(), twin.clone()), "twin").unwrap();
            let k = rot % cells.len();
            let (mut h2, mut t2) = (human.clone(), twin.clone());
            h2.rotate_left(k);
            t2.rotate_left(k);
            let r2 = task_accuracy(&build(items, h2, t2), "twin").unwrap();
            prop_assert!((r1.overall - r2.overall).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&r1.overall));
            for t in &r1.tasks {
                let m = t.per_respondent.values().sum::<f64>() / t.per_respondent.len() as f64;
                prop_assert!((m - t.mean).abs() < 1e-12);
            }
        }

        #[test]
        fn numeric_accuracy_symmetric(h in 0.0f64..10.0, t in 0.0f64..10.0) {
            let m = num("n", "t", 0.0, 10.0);
            let a = item_accuracy(&Answer::Value(h), &Answer::Value(t), &m).unwrap();
            let b = item_accuracy(&Answer::Value(t), &Answer::Value(h), &m).unwrap();
            prop_assert_eq!(a, b);
            prop_assert_eq!(a == 1.0, h == t);
        }

        #[test]
        fn reported_overall_is_fisher_mean_of_parts(seed in 0u64..1000) {
            let items: Vec<ItemMeta> = (0..5).map(|i| num(&format!("q{i}"), "t", 0.0, 10.0)).collect();
            let mut x = seed;
            let mut next = || { x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); ((x >> 33) % 11) as f64 };
            let human: Grid = (0..8).map(|_| (0..5).map(|_| Some(Answer::Value(next().min(10.0)))).collect()).collect();
            let twin: Grid = (0..8).map(|_| (0..5).map(|_| Some(Answer::Value(next().min(10.0)))).collect()).collect();
            let ds = build(items, human, twin);
            for r in [
                item_level_correlations(&ds, "twin", CorrelationMethod::Spearman).unwrap(),
                profile_correlations(&ds, "twin", CorrelationMethod::Spearman).unwrap(),
            ] {
                let parts: Vec<f64> = r.entries.iter().map(|e| e.rho).collect();
                prop_assert_eq!(r.overall, fisher_z_mean(&parts).ok());
            }
        }
    }
}
