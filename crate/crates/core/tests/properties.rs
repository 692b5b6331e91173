mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::fast_classifiers;
use riskforge::classifiers::{fit_arrays, Algorithm, ClassifierSpec};
use riskforge::dataset::{fit_standardizer, load_csv, split_indices, stratified_folds, CsvSchema, Dataset, RatingMap};
use riskforge::ecoc::{fit_ecoc, hamming_distance, make_dense_random, make_one_vs_one, CodingMatrix};
use riskforge::lasso::{fit_lasso, objective, LassoModel};
use riskforge::pfi::{importance_table, permute_column, Permuter, PfiOptions, SeededShuffle};
use riskforge::{Matrix, Predictor};

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Labels where each of `k` classes has at least `min` rows.
fn labels_strategy(k: usize, min: usize, extra: usize) -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(0..k, 0..=extra).prop_map(move |mut tail| {
        let mut labels: Vec<usize> = (0..k * min).map(|i| i % k).collect();
        labels.append(&mut tail);
        labels
    })
}

fn class_counts(labels: &[usize], k: usize) -> Vec<usize> {
    let mut counts = vec![0; k];
    labels.iter().for_each(|&l| counts[l] += 1);
    counts
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_is_bit_identical(
        values in proptest::collection::vec(
            prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()), -1e3f64..1e3],
            12..=36,
        ),
        k in 2usize..4,
    ) {
        let cols = 3;
        let rows = values.len() / cols;
        prop_assume!(rows >= k);
        let x = Matrix::from_vec(rows, cols, values[..rows * cols].to_vec()).unwrap();
        let labels: Vec<usize> = (0..rows).map(|i| i % k).collect();
        let data = Dataset::new(x, names("f", cols), labels, names("class", k)).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        data.write_csv(&path, "Rating").unwrap();
        let mut columns = names("f", cols);
        columns.push("Rating".into());
        let schema = CsvSchema { columns, rating_column: "Rating".into(), categorical: vec![], ignored: vec![] };
        let back = load_csv(&path, &schema).unwrap()
            .into_dataset(&RatingMap::identity(data.class_names())).unwrap();

        let bits = |d: &Dataset| d.features().as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&data));
        prop_assert_eq!(back.labels(), data.labels());
        prop_assert_eq!(back.feature_names(), data.feature_names());
        prop_assert_eq!(back.class_names(), data.class_names());
    }

    #[test]
    fn folds_partition_rows_and_stratify(
        k in 2usize..=5,
        k_folds in 2usize..=5,
        extra in 0usize..150,
        seed in any::<u64>(),
    ) {
        let labels = labels_strategy_sample(k, k_folds, extra, seed);
        let folds = stratified_folds(&labels, &names("c", k), k_folds, seed).unwrap();
        let again = stratified_folds(&labels, &names("c", k), k_folds, seed).unwrap();
        prop_assert_eq!(&folds, &again);

        let counts = class_counts(&labels, k);
        let mut seen = vec![0usize; labels.len()];
        for f in 0..k_folds {
            let test = folds.test_indices(f);
            let train = folds.train_indices(f);
            prop_assert_eq!(test.len() + train.len(), labels.len());
            for &r in &test {
                seen[r] += 1;
            }
            let in_fold = class_counts(&test.iter().map(|&r| labels[r]).collect::<Vec<_>>(), k);
            for c in 0..k {
                let dev = (in_fold[c] as f64 - counts[c] as f64 / k_folds as f64).abs();
                prop_assert!(dev <= 1.0, "fold {} class {} deviates by {}", f, c, dev);
            }
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
    }

    #[test]
    fn train_test_split_allocates_floor_or_ceil(
        labels in labels_strategy(4, 2, 120),
        fraction in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let (train, test) = split_indices(&labels, &names("c", 4), fraction, seed).unwrap();
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        let total = class_counts(&labels, 4);
        let in_train = class_counts(&train.iter().map(|&r| labels[r]).collect::<Vec<_>>(), 4);
        for c in 0..4 {
            let ideal = fraction * total[c] as f64;
            let lo = (ideal.floor() as usize).clamp(1, total[c] - 1);
            let hi = (ideal.ceil() as usize).clamp(1, total[c] - 1);
            prop_assert!((lo..=hi).contains(&in_train[c]), "class {} got {} of {}", c, in_train[c], total[c]);
        }
        prop_assert_eq!(split_indices(&labels, &names("c", 4), fraction, seed).unwrap(), (train, test));
    }

    #[test]
    fn standardized_training_columns_have_zero_mean_unit_std(
        values in proptest::collection::vec(-50.0f64..50.0, 30..90),
    ) {
        let cols = 3;
        let rows = values.len() / cols;
        let x = Matrix::from_vec(rows, cols, values[..rows * cols].to_vec()).unwrap();
        let labels: Vec<usize> = (0..rows).map(|i| i % 2).collect();
        let data = Dataset::new(x, names("f", cols), labels, names("c", 2)).unwrap();
        let exempt = BTreeSet::from([2]);
        let stats = fit_standardizer(&data, &exempt).unwrap();
        let z = stats.transform(data.features()).unwrap();
        for j in 0..2 {
            let col = z.column(j);
            let mean = col.iter().sum::<f64>() / rows as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rows as f64;
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((var - 1.0).abs() < 1e-9);
        }
        prop_assert_eq!(z.column(2), data.features().column(2));
    }

    #[test]
    fn hamming_distance_is_a_symmetric_semimetric(
        a in proptest::collection::vec(-1i8..=1, 1..12),
        seed in any::<u64>(),
    ) {
        let mut rng = riskforge::seed::rng(seed);
        let b: Vec<i8> = a.iter().map(|_| rand::Rng::random_range(&mut rng, -1i8..=1)).collect();
        let dab = hamming_distance(&a, &b).unwrap();
        prop_assert_eq!(dab, hamming_distance(&b, &a).unwrap());
        prop_assert!(dab >= 0.0 && dab <= a.len() as f64);
        let zeros = a.iter().filter(|&&v| v == 0).count() as f64;
        prop_assert_eq!(hamming_distance(&a, &a).unwrap(), zeros / 2.0);
    }

    #[test]
    fn dense_codes_are_valid_and_reproducible(k in 3usize..=6, extra in 0usize..8, seed in any::<u64>()) {
        let capacity = (1usize << (k - 1)) - 1;
        let length = ((usize::BITS - (k - 1).leading_zeros()) as usize + extra).min(capacity);
        let code = make_dense_random(k, length, seed, 200).unwrap();
        prop_assert_eq!(&code, &make_dense_random(k, length, seed, 200).unwrap());
        prop_assert!(code.min_row_distance() >= 1.0);
        for l in 0..code.length() {
            let col = code.column(l);
            prop_assert!(col.contains(&1) && col.contains(&-1), "column {} is constant", l);
        }
        let round = CodingMatrix::from_json(&code.to_json().unwrap()).unwrap();
        prop_assert_eq!(round, code);
    }

    #[test]
    fn permuted_column_keeps_its_multiset(
        values in proptest::collection::vec(-10.0f64..10.0, 4..60),
        seed in any::<u64>(),
        repeat in 0usize..30,
    ) {
        let x = Matrix::from_vec(values.len() / 2, 2, values[..values.len() / 2 * 2].to_vec()).unwrap();
        let perm = SeededShuffle { seed }.permutation(x.rows(), 1, repeat);
        let shuffled = permute_column(&x, 1, &perm);
        let sorted = |mut v: Vec<f64>| { v.sort_by(f64::total_cmp); v };
        prop_assert_eq!(sorted(shuffled.column(1)), sorted(x.column(1)));
        prop_assert_eq!(shuffled.column(0), x.column(0));
    }
}

fn labels_strategy_sample(k: usize, min: usize, extra: usize, seed: u64) -> Vec<usize> {
    let mut rng = riskforge::seed::rng(seed);
    let mut labels: Vec<usize> = (0..k * min).map(|i| i % k).collect();
    labels.extend((0..extra).map(|_| rand::Rng::random_range(&mut rng, 0..k)));
    labels
}

/// Brute-force minimiser of the LASSO objective over a lattice for one or two
/// coefficients; the intercept is profiled out exactly.
fn lattice_minimum(x: &Matrix, y: &[f64], lambda: f64, centre: &[f64], radius: f64, step: f64) -> (Vec<f64>, f64) {
    let p = x.cols();
    let steps = (2.0 * radius / step).round() as i64;
    let eval = |beta: &[f64]| {
        let resid: Vec<f64> = (0..x.rows())
            .map(|i| y[i] - (0..p).map(|j| x.get(i, j) * beta[j]).sum::<f64>())
            .collect();
        let intercept = resid.iter().sum::<f64>() / resid.len() as f64;
        let model = LassoModel {
            coefficients: beta.to_vec(),
            intercept,
            lambda,
            n_iterations: 0,
            converged: true,
            objective_history: vec![],
        };
        objective(x, y, &model).unwrap()
    };
    let mut best = (centre.to_vec(), f64::INFINITY);
    let axis = |i: i64, j: usize| centre[j] - radius + i as f64 * step;
    for a in 0..=steps {
        if p == 1 {
            let beta = [axis(a, 0)];
            let v = eval(&beta);
            if v < best.1 {
                best = (beta.to_vec(), v);
            }
            continue;
        }
        for b in 0..=steps {
            let beta = [axis(a, 0), axis(b, 1)];
            let v = eval(&beta);
            if v < best.1 {
                best = (beta.to_vec(), v);
            }
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lasso_matches_lattice_search(
        p in 1usize..=2,
        n in 5usize..=8,
        data in proptest::collection::vec(-2.0f64..2.0, 24),
        noise in proptest::collection::vec(-0.5f64..0.5, 8),
        truth in proptest::collection::vec(-2.0f64..2.0, 2),
        lambda in 0.0f64..3.0,
    ) {
        let x = Matrix::from_vec(n, p, data[..n * p].to_vec()).unwrap();
        let y: Vec<f64> = (0..n)
            .map(|i| (0..p).map(|j| x.get(i, j) * truth[j]).sum::<f64>() + noise[i])
            .collect();
        let model = fit_lasso(&x, &y, lambda, 1e-10, 100_000).unwrap();
        let fitted = objective(&x, &y, &model).unwrap();

        // coarse pass over a wide box, then a fine pass around its best point
        let (coarse, _) = lattice_minimum(&x, &y, lambda, &vec![0.0; p], 10.0, 0.1);
        let step = 1e-3;
        let (fine, lattice) = lattice_minimum(&x, &y, lambda, &coarse, 0.15, step);
        prop_assert!(fitted <= lattice + 1e-9 * lattice.max(1.0), "objective {} vs lattice {}", fitted, lattice);
        let gap = model.coefficients.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(gap <= step, "coefficients {:?} vs lattice {:?}", model.coefficients, fine);
    }
}

#[test]
fn lasso_fit_is_bit_reproducible() {
    let mut rng = riskforge::seed::rng(4);
    let x = Matrix::from_vec(
        40,
        5,
        (0..200).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect(),
    )
    .unwrap();
    let y: Vec<f64> = (0..40).map(|i| x.get(i, 1) * 3.0 - x.get(i, 4)).collect();
    let a = fit_lasso(&x, &y, 0.5, 1e-7, 10_000).unwrap();
    let b = fit_lasso(&x, &y, 0.5, 1e-7, 10_000).unwrap();
    assert_eq!(a, b);
}

#[test]
fn every_algorithm_is_deterministic() {
    let data = common::Synthetic::new(&[30, 30, 30], 3, 2, 2.0, 5).dataset();
    for h in fast_classifiers() {
        let spec = ClassifierSpec::new(h, 17);
        let a = fit_arrays(&spec, data.features(), data.labels(), 3).unwrap();
        let b = fit_arrays(&spec, data.features(), data.labels(), 3).unwrap();
        assert_eq!(a.model, b.model, "{}", spec.algorithm());
        let sa = a.score(data.features()).unwrap();
        let sb = b.score(data.features()).unwrap();
        assert_eq!(sa, sb, "{}", spec.algorithm());
    }
}

#[test]
fn ecoc_fit_is_deterministic() {
    let data = common::Synthetic::new(&[25, 25, 25, 25], 3, 2, 2.0, 6).dataset();
    let spec = ClassifierSpec::default_for(Algorithm::RF, 3);
    for matrix in [make_one_vs_one(4).unwrap(), make_dense_random(4, 6, 9, 200).unwrap()] {
        let a = fit_ecoc(&spec, &matrix, &data).unwrap();
        let b = fit_ecoc(&spec, &matrix, &data).unwrap();
        assert_eq!(a.matrix, b.matrix);
        for (ma, mb) in a.column_models.iter().zip(&b.column_models) {
            assert_eq!(ma.model, mb.model);
        }
        assert_eq!(a.score(data.features()).unwrap(), b.score(data.features()).unwrap());
    }
}

#[test]
fn importance_is_seed_deterministic_and_leaves_input_untouched() {
    let data = common::Synthetic::new(&[30, 30, 30], 2, 2, 2.0, 8).dataset();
    let model = fit_arrays(
        &ClassifierSpec::default_for(Algorithm::DT, 1),
        data.features(),
        data.labels(),
        3,
    )
    .unwrap();
    let before = data.features().clone();
    let opts = PfiOptions {
        repeats: 5,
        seed: 21,
        ..Default::default()
    };
    let run = || {
        importance_table(
            &model,
            data.features(),
            data.labels(),
            data.feature_names(),
            data.class_names(),
            &opts,
        )
        .unwrap()
    };
    assert_eq!(run(), run());
    assert_eq!(data.features(), &before);
}
