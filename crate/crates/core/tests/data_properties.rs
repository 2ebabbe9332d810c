use procxai::dataset::{cv_fold_assignment, quality_check, split, ProcessDataset, DEFECTIVE};
use procxai::ice::ControlRange;
use procxai::smote::{minority_label, oversample, synthesize_minority, SmoteConfig};
use procxai::synth::{generate, SynthConfig};
use procxai::validate::{defect_rate, filter_in_range, validation_report, DefectRate};
use procxai::Matrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dataset() -> impl Strategy<Value = ProcessDataset> {
    (2usize..60, 1usize..4).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(-50.0f64..50.0, n * d),
            prop::collection::vec(0u8..=1, n),
        )
            .prop_map(move |(v, t)| {
                let names = (0..d).map(|j| format!("c{j}")).collect();
                ProcessDataset::new(Matrix::new(n, d, v).unwrap(), names, t).unwrap()
            })
    })
}

/// Minority class (label 0) with at least `k + 1` rows, majority strictly larger.
fn imbalanced(k: usize) -> impl Strategy<Value = ProcessDataset> {
    (k + 1..k + 12, 1usize..30, 1usize..4).prop_flat_map(|(m, extra, d)| {
        let n = 2 * m + extra;
        prop::collection::vec(-10.0f64..10.0, n * d).prop_map(move |v| {
            let mut t = vec![1u8; n];
            for label in t.iter_mut().step_by(2).take(m) {
                *label = 0;
            }
            let names = (0..d).map(|j| format!("c{j}")).collect();
            ProcessDataset::new(Matrix::new(n, d, v).unwrap(), names, t).unwrap()
        })
    })
}

fn sorted_rows(ds: &ProcessDataset) -> Vec<(Vec<u64>, u8)> {
    let mut v: Vec<(Vec<u64>, u8)> = (0..ds.n_rows())
        .map(|i| (ds.row(i).iter().map(|x| x.to_bits()).collect(), ds.target()[i]))
        .collect();
    v.sort();
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn split_halves_reassemble(ds in dataset(), frac in 0.1f64..0.9, seed in any::<u64>()) {
        if let Ok(sp) = split(&ds, frac, seed) {
            prop_assert_eq!(sorted_rows(&sp.train.concat(&sp.test).unwrap()), sorted_rows(&ds));
            prop_assert_eq!(sorted_rows(&sp.test.concat(&sp.train).unwrap()), sorted_rows(&ds));
        }
    }

    #[test]
    fn folds_partition_rows(n in 3usize..200, k in 2usize..8, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let folds = cv_fold_assignment(n, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn quality_check_is_pure(ds in dataset()) {
        let before = ds.clone();
        prop_assert_eq!(quality_check(&ds, 1.5).unwrap(), quality_check(&ds, 1.5).unwrap());
        prop_assert_eq!(ds, before);
    }

    #[test]
    fn smote_rows_stay_between_parents(ds in imbalanced(5), seed in any::<u64>()) {
        let cfg = SmoteConfig { k: 5, target_count: None, seed };
        let label = minority_label(&ds);
        prop_assert_eq!(label, DEFECTIVE);
        for s in synthesize_minority(&ds, &cfg).unwrap() {
            prop_assert_eq!(ds.target()[s.base], label);
            prop_assert_eq!(ds.target()[s.neighbor], label);
            let (a, b) = (ds.row(s.base), ds.row(s.neighbor));
            for j in 0..a.len() {
                let (lo, hi) = (a[j].min(b[j]), a[j].max(b[j]));
                prop_assert!(s.values[j] >= lo - 1e-9 && s.values[j] <= hi + 1e-9);
            }
        }
        let out = oversample(&ds, &cfg).unwrap();
        let (normal, defective) = out.class_counts();
        prop_assert_eq!(normal, ds.class_counts().0);
        prop_assert_eq!(defective, normal);
        prop_assert_eq!(&out.subset(&(0..ds.n_rows()).collect::<Vec<_>>()), &ds);
        prop_assert_eq!(out, oversample(&ds, &cfg).unwrap());
    }

    #[test]
    fn nested_ranges_nest_filtered_sets(ds in dataset(), a in -50.0f64..50.0, w1 in 0.0f64..40.0, w2 in 0.0f64..40.0) {
        let r = |alpha: f64, lo: f64, hi: f64| ControlRange {
            feature: 0,
            name: ds.feature_names()[0].clone(),
            alpha,
            lower: lo,
            upper: hi,
        };
        let tight = vec![r(0.05, a, a + w1)];
        let wide = vec![r(0.1, a - w2, a + w1 + w2)];
        let ft = filter_in_range(&ds, &tight).unwrap();
        let fw = filter_in_range(&ds, &wide).unwrap();
        prop_assert!(ft.n_rows() <= fw.n_rows() && fw.n_rows() <= ds.n_rows());
        // order preserved, so the tight rows form a subsequence of the wide rows
        let mut it = (0..fw.n_rows()).map(|i| fw.row(i));
        for i in 0..ft.n_rows() {
            prop_assert!(it.any(|row| row == ft.row(i)));
        }
        let rep = validation_report(&ds, &[(0.05, tight), (0.1, wide)]).unwrap();
        prop_assert_eq!(rep.baseline.rate, defect_rate(&ds));
    }
}

#[test]
fn synthetic_defect_rate_matches_mixture() {
    let mut cfg = SynthConfig {
        resolution: 0.0,
        ..Default::default()
    };
    let inside: f64 = cfg
        .relevant
        .iter()
        .map(|p| (p.upper - p.lower) / 100.0)
        .product();
    let p = inside * cfg.base_defect_prob + (1.0 - inside) * cfg.out_defect_prob;
    let (mut defects, mut total) = (0usize, 0usize);
    for seed in 0..50 {
        cfg.seed = seed;
        let (ds, _) = generate(&cfg).unwrap();
        defects += ds.class_counts().1;
        total += ds.n_rows();
    }
    let rate = defects as f64 / total as f64;
    let se = (p * (1.0 - p) / total as f64).sqrt();
    assert!((rate - p).abs() <= 3.0 * se, "rate {rate}, expected {p} ± {}", 3.0 * se);
}

#[test]
fn null_mechanism_and_irrelevant_features() {
    let cfg = SynthConfig {
        base_defect_prob: 0.3,
        out_defect_prob: 0.3,
        n_rows: 2000,
        ..Default::default()
    };
    let (ds, _) = generate(&cfg).unwrap();
    let rate = match defect_rate(&ds) {
        DefectRate::Rate { defective, total } => defective as f64 / total as f64,
        DefectRate::NotAvailable => unreachable!(),
    };
    assert!((rate - 0.3).abs() < 0.05);

    // permutation test of the class mean gap, Bonferroni over the irrelevant features
    let (ds, truth) = generate(&SynthConfig::default()).unwrap();
    let relevant: Vec<usize> = truth.relevant.iter().map(|p| p.feature).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let gap = |col: &[f64], labels: &[u8]| {
        let (mut s0, mut n0, mut s1, mut n1) = (0.0, 0.0, 0.0, 0.0);
        for (v, &l) in col.iter().zip(labels) {
            if l == 0 {
                s0 += v;
                n0 += 1.0;
            } else {
                s1 += v;
                n1 += 1.0;
            }
        }
        (s0 / n0 - s1 / n1).abs()
    };
    let irrelevant: Vec<usize> = (0..ds.n_features()).filter(|j| !relevant.contains(j)).collect();
    let mut min_p: f64 = 1.0;
    for &j in &irrelevant {
        let col = ds.features().column(j);
        let observed = gap(&col, ds.target());
        let mut labels = ds.target().to_vec();
        let perms = 200;
        let mut at_least = 0;
        for _ in 0..perms {
            labels.shuffle(&mut rng);
            if gap(&col, &labels) >= observed {
                at_least += 1;
            }
        }
        min_p = min_p.min((1 + at_least) as f64 / (1 + perms) as f64);
    }
    assert!(min_p * irrelevant.len() as f64 > 0.01, "min p {min_p}");
}
