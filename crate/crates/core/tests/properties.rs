use ordsoft::confusion::argmax;
use ordsoft::loss::{soft_ce, softmax};
use ordsoft::model::Architecture;
use ordsoft::softlabel::is_unimodal_at;
use ordsoft::split::stratified_split;
use ordsoft::synth::{generate, SynthSpec};
use ordsoft::train::{fit, TrainConfig};
use ordsoft::{build_target_matrix, LabelSpace, SmoothingParams, Strategy};
use proptest::prelude::*;
use proptest::strategy::Strategy as _;

fn params() -> impl proptest::strategy::Strategy<Value = (Strategy, SmoothingParams)> {
    (
        0usize..5,
        0.0f64..=1.0,
        0.001f64..0.333,
        0.1f64..4.0,
        0.5f64..50.0,
    )
        .prop_map(|(s, eta, alpha, p, c)| {
            let strategy = Strategy::ALL[s];
            let base = SmoothingParams::with_eta(eta);
            let params = match strategy {
                Strategy::Triangular => base.alpha(alpha),
                Strategy::Exponential => base.p(p),
                Strategy::Beta => base.concentration(c),
                _ => base,
            };
            (strategy, params)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn soft_rows_are_unimodal_distributions(classes in 2usize..=8, (strategy, params) in params()) {
        let m = build_target_matrix(LabelSpace::new(classes).unwrap(), strategy, params).unwrap();
        for (k, row) in m.rows().iter().enumerate() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            prop_assert!(is_unimodal_at(row, k), "{strategy} row {k}: {row:?}");
            prop_assert_eq!(argmax(row), k);
        }
    }

    #[test]
    fn wide_triangular_rows_stay_distributions(classes in 2usize..=8, eta in 0.0f64..=1.0, alpha in 0.34f64..0.5) {
        let params = SmoothingParams::with_eta(eta).alpha(alpha);
        let m = build_target_matrix(LabelSpace::new(classes).unwrap(), Strategy::Triangular, params).unwrap();
        for (k, row) in m.rows().iter().enumerate() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            let interior = k > 0 && k + 1 < classes;
            if interior && eta == 1.0 {
                prop_assert!(row[k] < row[k - 1]);
            }
        }
    }

    #[test]
    fn nominal_targets_reduce_to_categorical_cross_entropy(
        logits in prop::collection::vec(-6.0f64..6.0, 2..=6),
        pick in 0usize..6,
    ) {
        let classes = logits.len();
        let k = pick % classes;
        let m = build_target_matrix(LabelSpace::new(classes).unwrap(), Strategy::Nominal, SmoothingParams::default()).unwrap();
        let probs = softmax(&logits);
        prop_assert_eq!(soft_ce(&probs, m.row(k)).unwrap(), -probs[k].ln());
    }

    #[test]
    fn generated_labels_match_requested_counts(
        counts in prop::collection::vec(2usize..30, 2..=5),
        dim in 1usize..4,
        seed in any::<u64>(),
    ) {
        let spec = SynthSpec {
            classes: counts.len(),
            n_per_class: counts.clone(),
            dim,
            adjacent_flip_prob: 0.0,
            ..SynthSpec::benchmark(counts.len(), seed)
        };
        let data = generate(&spec).unwrap();
        prop_assert_eq!(data.class_counts(), counts);
        prop_assert_eq!(data.dim(), dim);
        let flipped = generate(&SynthSpec { adjacent_flip_prob: 0.3, ..spec }).unwrap();
        prop_assert!(flipped.labels().iter().all(|&l| l < flipped.space().classes()));
    }

    #[test]
    fn split_is_stratified_within_one(
        counts in prop::collection::vec(2usize..60, 2..=6),
        fraction in 0.1f64..0.9,
        seed in any::<u64>(),
    ) {
        let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(k, &n)| std::iter::repeat_n(k, n)).collect();
        let (train, test) = stratified_split(&labels, fraction, seed).unwrap();
        prop_assert_eq!(train.len() + test.len(), labels.len());
        for (k, &n) in counts.iter().enumerate() {
            let got = train.iter().filter(|&&i| labels[i] == k).count() as f64;
            prop_assert!((got - fraction * n as f64).abs() <= 1.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn early_stopping_returns_the_best_epoch(seed in any::<u64>(), patience in 1usize..6, s in 0usize..5) {
        let spec = SynthSpec {
            classes: 3,
            n_per_class: vec![30, 30, 30],
            dim: 3,
            ..SynthSpec::benchmark(3, seed)
        };
        let data = generate(&spec).unwrap();
        let (fit_idx, val_idx) = stratified_split(data.labels(), 0.7, seed).unwrap();
        let (train, validation) = (data.subset(&fit_idx), data.subset(&val_idx));
        let strategy = Strategy::ALL[s];
        let params = match strategy {
            Strategy::Triangular => SmoothingParams::default().alpha(0.05),
            Strategy::Exponential => SmoothingParams::default().p(1.0),
            Strategy::Beta => SmoothingParams::default().concentration(5.0),
            _ => SmoothingParams::default(),
        };
        let config = TrainConfig {
            learning_rate: 0.05,
            max_epochs: 25,
            patience,
            strategy,
            params,
            seed,
            architecture: Architecture::Mlp { hidden: 4 },
            ..TrainConfig::default()
        };
        let outcome = fit(&train, &validation, &config).unwrap();
        let best = outcome.history.iter().map(|e| e.validation_loss).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(outcome.best_validation_loss, best);
        prop_assert_eq!(outcome.history[outcome.best_epoch - 1].validation_loss, best);
        let targets = build_target_matrix(data.space(), strategy, params).unwrap();
        let reloaded = outcome.model.mean_loss(&validation, &targets);
        prop_assert!((reloaded - best).abs() <= 1e-12 * best.max(1.0));
        let again = fit(&train, &validation, &config).unwrap();
        prop_assert_eq!(again.model, outcome.model);
    }
}
