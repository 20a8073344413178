use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{oracle_completion, random_records, ranking, to_matrix, Grid};

use riskrec::cf::{
    complete_matrix, frequency_scores, mean_center, CellSource, CfConfig, SimilarityKind,
    SimilarityTable,
};
use riskrec::change_risk::{
    cross_validate, fit_least_squares, fold_partition, predict_risk, CvConfig, METRIC_COUNT,
};
use riskrec::evaluation::{apfd, napfd, FaultMatrix};
use riskrec::prioritize::{
    order_tests_hcf, prioritize, ComponentRiskTable, CoverageMatrix, OrderingInputs,
    OrderingStrategy, PrioritizedSuite, Technique,
};

fn grid(max_users: usize, max_components: usize, max_count: u32) -> impl Strategy<Value = Grid> {
    (1..=max_users, 1..=max_components)
        .prop_flat_map(move |(nu, nc)| {
            proptest::collection::vec(
                proptest::collection::vec(proptest::option::of(1..=max_count), nc),
                nu,
            )
        })
        .prop_filter("at least one observed cell", |g| {
            g.iter().flatten().any(Option::is_some)
        })
}

proptest! {
    #[test]
    fn similarity_symmetric_and_bounded(g in grid(8, 8, 20), co_rated in any::<bool>()) {
        let kind = if co_rated { SimilarityKind::CoRated } else { SimilarityKind::AdjustedCosine };
        let sims = SimilarityTable::compute(&mean_center(&to_matrix(&g)), kind);
        for i in 0..sims.len() {
            for j in 0..sims.len() {
                prop_assert_eq!(sims.get(i, j), sims.get(j, i));
                prop_assert!(sims.get(i, j).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn completion_preserves_observed_cells(g in grid(8, 8, 20)) {
        let m = to_matrix(&g);
        let done = complete_matrix(&m, &CfConfig::default()).unwrap();
        for (u, row) in g.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                match cell {
                    Some(n) => {
                        prop_assert_eq!(done.value(u, c), f64::from(*n));
                        prop_assert_eq!(done.source(u, c), CellSource::Observed);
                    }
                    None => {
                        prop_assert!(done.value(u, c) >= 0.0);
                        prop_assert_eq!(done.source(u, c), CellSource::Predicted);
                    }
                }
            }
        }
    }

    #[test]
    fn frequency_ranking_invariant_under_scaling(g in grid(8, 8, 20), shift in 1u32..4) {
        let k = 1u32 << shift;
        let m = to_matrix(&g);
        let base = frequency_scores(&complete_matrix(&m, &CfConfig::default()).unwrap());
        let scaled = frequency_scores(&complete_matrix(&m.scaled(k), &CfConfig::default()).unwrap());
        prop_assert_eq!(ranking(&base.raw), ranking(&scaled.raw));
        for (a, b) in base.scaled.iter().zip(&scaled.scaled) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fold_partition_is_a_balanced_partition(n in 2usize..200, folds in 2usize..12, seed in any::<u64>()) {
        prop_assume!(n >= folds);
        let parts = fold_partition(n, folds, seed);
        prop_assert_eq!(parts.len(), folds);
        let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let sizes: Vec<usize> = parts.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert_eq!(parts, fold_partition(n, folds, seed));
    }

    #[test]
    fn least_squares_residuals_are_orthogonal(seed in any::<u64>(), n in 15usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let records = random_records(&mut rng, n);
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let model = fit_least_squares(&records, &y).unwrap();
        let resid: Vec<f64> = records.iter().zip(&y).map(|(r, t)| t - model.predict_linear(&r.metrics)).collect();
        let rnorm = resid.iter().map(|r| r * r).sum::<f64>().sqrt();
        prop_assert!(resid.iter().sum::<f64>().abs() <= 1e-6 * (1.0 + rnorm * (n as f64).sqrt()));
        for k in 0..METRIC_COUNT {
            let col: Vec<f64> = records.iter().map(|r| r.metrics.0[k]).collect();
            let cnorm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            let dot: f64 = resid.iter().zip(&col).map(|(r, x)| r * x).sum();
            prop_assert!(dot.abs() <= 1e-6 * (1.0 + rnorm * cnorm), "metric {} dot {}", k, dot);
        }
    }

    #[test]
    fn noiseless_coefficients_recovered(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let records = random_records(&mut rng, 40);
        let truth: Vec<f64> = (0..METRIC_COUNT).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b0 = rng.gen_range(-1.0..1.0);
        let y: Vec<f64> = records
            .iter()
            .map(|r| b0 + r.metrics.0.iter().zip(&truth).map(|(x, b)| x * b).sum::<f64>())
            .collect();
        let (raw, intercept) = fit_least_squares(&records, &y).unwrap().raw_coefficients();
        for k in 0..METRIC_COUNT {
            prop_assert!((raw[k] - truth[k]).abs() < 1e-6, "metric {}: {} vs {}", k, raw[k], truth[k]);
        }
        prop_assert!((intercept - b0).abs() < 1e-6);
    }

    #[test]
    fn risk_predictions_clamped(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let records = random_records(&mut rng, 20);
        let y: Vec<f64> = (0..20).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let model = fit_least_squares(&records, &y).unwrap();
        for r in random_records(&mut rng, 20) {
            let p = predict_risk(&model, &r.metrics);
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn every_technique_yields_a_permutation(
        (cov, table) in coverage_and_table(),
        seed in any::<u64>(),
        strategy in prop_oneof![
            Just(OrderingStrategy::DeferredTotal),
            Just(OrderingStrategy::Total),
            Just(OrderingStrategy::Additional)
        ],
    ) {
        let inputs = OrderingInputs { table: &table, coverage: &cov, strategy, seed };
        let mut expected: Vec<String> = cov.tests().iter().cloned().collect();
        expected.sort();
        for t in Technique::ALL {
            let mut order = prioritize(t, &inputs).unwrap().order;
            order.sort();
            prop_assert_eq!(&order, &expected);
        }
    }

    #[test]
    fn hcf_invariant_under_risk_rescaling((cov, table) in coverage_and_table(), shift in -4i32..5) {
        let k = 2f64.powi(shift);
        prop_assert_eq!(order_tests_hcf(&table, &cov).order, order_tests_hcf(&table.scale_risk(k), &cov).order);
    }

    #[test]
    fn hcf_with_one_component_per_test(risks in proptest::collection::vec(prop_oneof![Just(0.0), 0.0..1.0f64], 1..12)) {
        let ids: Vec<String> = (0..risks.len()).map(|i| format!("c{i}")).collect();
        let tests: Vec<String> = (0..risks.len()).map(|i| format!("t{i}")).collect();
        let id_refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let test_refs: Vec<&str> = tests.iter().map(String::as_str).collect();
        let mut cov = CoverageMatrix::new(&id_refs, &test_refs).unwrap();
        for i in 0..risks.len() {
            cov.set(i, i, true);
        }
        let pairs: Vec<(&str, f64)> = id_refs.iter().copied().zip(risks.iter().copied()).collect();
        let table = ComponentRiskTable::from_risks(&pairs);
        // Positive-risk tests by descending risk, then zero-risk tests by index.
        let mut expect: Vec<usize> = (0..risks.len()).collect();
        expect.sort_by(|&a, &b| {
            (risks[b] > 0.0).cmp(&(risks[a] > 0.0))
                .then(risks[b].partial_cmp(&risks[a]).unwrap())
                .then(a.cmp(&b))
        });
        let expect: Vec<String> = expect.into_iter().map(|i| tests[i].clone()).collect();
        prop_assert_eq!(order_tests_hcf(&table, &cov).order, expect);
    }

    #[test]
    fn napfd_bounded_and_monotone((fm, order) in faults_and_order()) {
        let suite = suite_of(&order);
        let mut last = f64::NEG_INFINITY;
        for b in 1..=20 {
            let v = napfd(&suite, &fm, b as f64 / 20.0).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!(v >= last - 1e-12, "budget {}: {} < {}", b, v, last);
            last = v;
        }
    }

    #[test]
    fn napfd_at_full_budget_equals_apfd((fm, order) in faults_and_order()) {
        let suite = suite_of(&order);
        let all_detected = (0..fm.faults().len()).all(|f| (0..fm.tests().len()).any(|t| fm.detects(t, f)));
        prop_assume!(all_detected);
        let a = apfd(&suite, &fm).unwrap();
        prop_assert!((napfd(&suite, &fm, 1.0).unwrap() - a).abs() <= 1e-12);
    }

    #[test]
    fn metrics_ignore_fault_column_order((fm, order) in faults_and_order(), seed in any::<u64>()) {
        let suite = suite_of(&order);
        let mut perm: Vec<usize> = (0..fm.faults().len()).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(seed));
        let shuffled = fm.with_fault_order(&perm);
        for b in [0.1, 0.35, 0.5, 1.0] {
            prop_assert_eq!(napfd(&suite, &fm, b).unwrap(), napfd(&suite, &shuffled, b).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn completion_matches_dense_oracle(g in grid(4, 4, 5)) {
        let done = complete_matrix(&to_matrix(&g), &CfConfig::default()).unwrap();
        let expect = oracle_completion(&g, 2);
        for (u, row) in expect.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                prop_assert!((done.value(u, c) - v).abs() < 1e-9, "cell ({}, {}): {} vs {}", u, c, done.value(u, c), v);
            }
        }
    }
}

fn coverage_and_table() -> impl Strategy<Value = (CoverageMatrix, ComponentRiskTable)> {
    (1usize..8, 1usize..10)
        .prop_flat_map(|(nc, nt)| {
            (
                proptest::collection::vec(proptest::collection::vec(any::<bool>(), nc), nt),
                proptest::collection::vec(prop_oneof![Just(0.0), 0.0..1.0f64], nc),
                proptest::collection::vec(0.0..1.0f64, nc),
            )
        })
        .prop_map(|(cells, r, f)| {
            let comps: Vec<String> = (0..r.len()).map(|i| format!("c{i}")).collect();
            let tests: Vec<String> = (0..cells.len()).map(|i| format!("t{i}")).collect();
            let cr: Vec<&str> = comps.iter().map(String::as_str).collect();
            let tr: Vec<&str> = tests.iter().map(String::as_str).collect();
            let mut cov = CoverageMatrix::new(&cr, &tr).unwrap();
            for (t, row) in cells.iter().enumerate() {
                for (c, &on) in row.iter().enumerate() {
                    cov.set(c, t, on);
                }
            }
            let mut table = ComponentRiskTable::new();
            for (c, id) in comps.iter().enumerate() {
                table.insert(id, f[c], r[c]);
            }
            (cov, table)
        })
}

fn faults_and_order() -> impl Strategy<Value = (FaultMatrix, Vec<String>)> {
    (1usize..15, 1usize..6)
        .prop_flat_map(|(nt, nf)| {
            (
                proptest::collection::vec(
                    proptest::collection::vec(proptest::bool::weighted(0.25), nf),
                    nt,
                ),
                Just((0..nt).collect::<Vec<usize>>()).prop_shuffle(),
            )
        })
        .prop_map(|(cells, order)| {
            let tests: Vec<String> = (0..cells.len()).map(|i| format!("t{i}")).collect();
            let faults: Vec<String> = (0..cells[0].len()).map(|i| format!("f{i}")).collect();
            let tr: Vec<&str> = tests.iter().map(String::as_str).collect();
            let fr: Vec<&str> = faults.iter().map(String::as_str).collect();
            let mut fm = FaultMatrix::new(&tr, &fr).unwrap();
            for (t, row) in cells.iter().enumerate() {
                for (f, &on) in row.iter().enumerate() {
                    fm.set(t, f, on);
                }
            }
            (fm, order.into_iter().map(|i| tests[i].clone()).collect())
        })
}

fn suite_of(order: &[String]) -> PrioritizedSuite {
    PrioritizedSuite {
        technique: Technique::Hcf,
        order: order.to_vec(),
        scores: vec![0.0; order.len()],
        seed: None,
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let grid: Grid = (0..30)
        .map(|_| {
            (0..25)
                .map(|_| (rng.gen::<f64>() < 0.5).then(|| rng.gen_range(1..20)))
                .collect()
        })
        .collect();
    let m = to_matrix(&grid);
    let mut records = random_records(&mut rng, 60);
    let labels: Vec<bool> = records.iter().map(|r| r.metrics.0[0] > 25.0).collect();
    for (r, &l) in records.iter_mut().zip(&labels) {
        r.label = Some(l);
    }
    let cfg = CvConfig {
        folds: 10,
        repeats: 20,
        seed: 5,
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let f = frequency_scores(&complete_matrix(&m, &CfConfig::default()).unwrap());
            let cv = cross_validate(&records, &labels, &cfg).unwrap();
            (f, cv)
        })
    };
    assert_eq!(run(1), run(4));
}
