use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use xmaml_core::eval::{DeltaMatrix, EvalResult, Metric};
use xmaml_core::seed::rng_from;
use xmaml_core::typology::{
    baseline_distributional, baseline_most_frequent, bonferroni, condition_match_prediction,
    condition_value_prediction, ln_gamma, paired_t_test, planted_typology, reg_inc_beta, run_feature_scan,
    student_t_two_sided, Condition, ConditionConfig, PlantedSignal, PlantedSpec, TypologyTable,
};
use xmaml_core::Error;

fn zero_matrix(languages: &[&str]) -> DeltaMatrix {
    let names: Vec<String> = languages.iter().map(|s| s.to_string()).collect();
    let n = names.len();
    DeltaMatrix {
        metric: Metric::Accuracy,
        targets: names.clone(),
        auxiliaries: names.clone(),
        deltas: (0..n)
            .map(|i| (0..n).map(|j| (i != j).then_some(0.0)).collect())
            .collect(),
        baseline: names
            .iter()
            .map(|t| EvalResult::from_runs(t.as_str(), Metric::Accuracy, vec![0.5]).unwrap())
            .collect(),
    }
}

#[test]
fn identical_values_on_zero_deltas_are_trivially_predicted() {
    let langs = ["a", "b", "c", "d", "e"];
    let mut table = TypologyTable::new();
    for l in langs {
        table.insert(l, "f", "X");
    }
    let m = zero_matrix(&langs);
    let cfg = ConditionConfig::default();
    let v = condition_value_prediction(&table, &m, "f", 1, &cfg).unwrap();
    assert_eq!((v.model_accuracy, v.most_frequent), (1.0, 1.0));
    let p = condition_match_prediction(&table, &m, "f", 1, &cfg).unwrap();
    assert_eq!((p.model_accuracy, p.most_frequent), (1.0, 1.0));
}

#[test]
fn three_languages_are_too_few() {
    let langs = ["a", "b", "c"];
    let mut table = TypologyTable::new();
    for (l, v) in langs.iter().zip(["X", "Y", "X"]) {
        table.insert(l, "f", v);
    }
    let r = condition_value_prediction(&table, &zero_matrix(&langs), "f", 0, &ConditionConfig::default());
    assert!(matches!(r, Err(Error::InsufficientLanguages { available: 3, .. })));
}

#[test]
fn row_shift_is_predictable_from_deltas() {
    // every language in the split, so no split can leave a lone minority value
    let cfg = ConditionConfig {
        subsample: 1.0,
        ..ConditionConfig::default()
    };
    let wins = (0..10)
        .filter(|&seed| {
            let spec = PlantedSpec {
                null_features: 0,
                effect: 5.0,
                noise: 1.0,
                signal: PlantedSignal::RowShift,
                seed,
                ..PlantedSpec::default()
            };
            let (table, m) = planted_typology(&spec).unwrap();
            let o = condition_value_prediction(&table, &m, "planted", seed, &cfg).unwrap();
            o.model_accuracy > o.most_frequent
        })
        .count();
    assert!(wins >= 9, "{wins}/10");
}

#[test]
fn separable_match_deltas_are_predicted_perfectly() {
    let spec = PlantedSpec {
        null_features: 0,
        effect: 1.0,
        noise: 0.0,
        ..PlantedSpec::default()
    };
    let (table, m) = planted_typology(&spec).unwrap();
    let o = condition_match_prediction(&table, &m, "planted", 3, &ConditionConfig::default()).unwrap();
    assert_eq!(o.model_accuracy, 1.0);
}

#[test]
fn random_deltas_give_no_spurious_certainty() {
    let spec = PlantedSpec {
        null_features: 0,
        effect: 0.0,
        seed: 7,
        ..PlantedSpec::default()
    };
    let (table, m) = planted_typology(&spec).unwrap();
    let cfg = ConditionConfig::default();
    let mean = (0..100)
        .map(|s| condition_match_prediction(&table, &m, "planted", s, &cfg).unwrap().model_accuracy)
        .sum::<f64>()
        / 100.0;
    assert!((0.3..=0.7).contains(&mean), "{mean}");
}

#[test]
fn predictions_are_deterministic() {
    let (table, m) = planted_typology(&PlantedSpec::default()).unwrap();
    let cfg = ConditionConfig::default();
    for f in ["planted", "null03"] {
        assert_eq!(
            condition_value_prediction(&table, &m, f, 11, &cfg).unwrap(),
            condition_value_prediction(&table, &m, f, 11, &cfg).unwrap()
        );
    }
}

#[test]
fn most_frequent_examples() {
    assert_eq!(baseline_most_frequent(&["A", "A", "B"], &["A", "B"]).unwrap(), 0.5);
    assert_eq!(baseline_most_frequent(&["B", "A"], &["A"]).unwrap(), 1.0);
    assert_eq!(baseline_most_frequent(&["B", "A"], &["B"]).unwrap(), 0.0);
}

#[test]
fn distributional_examples() {
    let mut rng = rng_from(0, "dist", &[]);
    assert_eq!(
        baseline_distributional(&["A", "A"], &["A", "B"], &mut rng, 50).unwrap(),
        baseline_most_frequent(&["A", "A"], &["A", "B"]).unwrap()
    );
    let acc = baseline_distributional(&["A", "B"], &["A", "B"], &mut rng, 10_000).unwrap();
    assert!((acc - 0.5).abs() <= 0.02, "{acc}");
    let a = baseline_distributional(&["A", "B", "B"], &["A", "B"], &mut rng_from(4, "d", &[]), 30).unwrap();
    let b = baseline_distributional(&["A", "B", "B"], &["A", "B"], &mut rng_from(4, "d", &[]), 30).unwrap();
    assert_eq!(a, b);
}

#[test]
fn student_t_matches_statrs() {
    for df in [1.0, 2.0, 3.0, 4.0, 7.5, 30.0, 250.0] {
        let dist = StudentsT::new(0.0, 1.0, df).unwrap();
        for i in 0..=40 {
            let t = -4.0 + 0.2 * i as f64;
            let expected = 2.0 * (1.0 - dist.cdf(t.abs()));
            let got = student_t_two_sided(t, df);
            assert!((got - expected).abs() <= 1e-9, "df {df} t {t}: {got} vs {expected}");
        }
    }
}

#[test]
fn special_functions_match_statrs() {
    for x in [0.1, 0.5, 1.0, 2.5, 7.0, 42.0] {
        let expected = statrs::function::gamma::ln_gamma(x);
        assert!((ln_gamma(x) - expected).abs() <= 1e-10 * expected.abs().max(1.0));
    }
    for (a, b) in [(0.5, 0.5), (2.0, 3.0), (10.0, 0.5), (100.0, 0.5)] {
        for x in [0.01, 0.3, 0.5, 0.9, 0.999] {
            let expected = statrs::function::beta::beta_reg(a, b, x);
            assert!((reg_inc_beta(a, b, x) - expected).abs() <= 1e-10, "I_{x}({a}, {b})");
        }
    }
}

#[test]
fn student_t_approaches_normal_for_large_df() {
    let normal = Normal::standard();
    for df in [200.0, 500.0, 5000.0] {
        for i in 0..=30 {
            let t = 0.1 * i as f64;
            let gaussian = 2.0 * (1.0 - normal.cdf(t));
            assert!((student_t_two_sided(t, df) - gaussian).abs() <= 0.005);
        }
    }
}

#[test]
fn zero_matrix_flags_nothing_and_m_counts_eligible_features() {
    let langs = ["a", "b", "c", "d", "e", "f"];
    let mut table = TypologyTable::new();
    for (i, l) in langs.iter().enumerate() {
        table.insert(l, "parity", if i % 2 == 0 { "even" } else { "odd" });
        table.insert(l, "half", if i < 3 { "lo" } else { "hi" });
        if i < 3 {
            table.insert(l, "sparse", "x");
        }
    }
    let cfg = ConditionConfig {
        splits: 5,
        ..ConditionConfig::default()
    };
    let report = run_feature_scan(&table, &zero_matrix(&langs), Condition::Value, 0.05, 0, &cfg).unwrap();
    assert_eq!(report.significant().count(), 0);
    assert_eq!(report.results.len(), 2);
    assert_eq!(report.skipped.iter().map(|(f, _)| f.as_str()).collect::<Vec<_>>(), ["sparse"]);
    for r in &report.results {
        assert_eq!(r.num_tests, 2);
        assert_eq!(r.corrected_cutoff, 0.025);
    }
    assert!(report.to_csv().starts_with("feature,t,df,p,m,cutoff,significant,"));
}

#[test]
fn scan_results_are_sorted_by_p() {
    let (table, m) = planted_typology(&PlantedSpec {
        null_features: 4,
        seed: 2,
        ..PlantedSpec::default()
    })
    .unwrap();
    let report = run_feature_scan(&table, &m, Condition::Match, 0.05, 2, &ConditionConfig::default()).unwrap();
    assert!(report.results.windows(2).all(|w| w[0].p_value <= w[1].p_value));
    assert_eq!(report.results[0].feature_id, "planted");
}

proptest! {
    #[test]
    fn t_test_is_antisymmetric(pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..30)) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let ab = paired_t_test(&a, &b).unwrap();
        let ba = paired_t_test(&b, &a).unwrap();
        prop_assert!((ab.t + ba.t).abs() <= 1e-12 * ab.t.abs().max(1.0) || (ab.t.is_infinite() && ab.t == -ba.t));
        prop_assert!((ab.p - ba.p).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab.p));
    }

    #[test]
    fn bonferroni_rejections_shrink(base in 0.001f64..0.5, m in 1usize..500, ps in prop::collection::vec(0.0f64..1.0, 1..50)) {
        let small = bonferroni(base, m + 1).unwrap();
        let large = bonferroni(base, m).unwrap();
        prop_assert!(small < large);
        prop_assert!(large <= base);
        for p in ps {
            if p < large {
                prop_assert!(p < base);
            }
        }
    }
}
