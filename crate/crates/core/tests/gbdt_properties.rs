use procxai::dataset::ProcessDataset;
use procxai::gbdt::{
    best_split_exact, goss_sample, leaf_weight, log_loss, logistic_grad_hess, train_exact_greedy,
    ExactGreedyParams, GossParams, GradientPair, train_goss_leafwise,
};
use procxai::Matrix;
use proptest::prelude::*;

mod common;
use common::brute_force;

fn tiny_problem() -> impl Strategy<Value = (Matrix, Vec<GradientPair>)> {
    (1usize..=30, 1usize..=4).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(0u8..6, n * d),
            prop::collection::vec((-6i32..=6, 1i32..=8), n),
        )
            .prop_map(move |(vals, gh)| {
                let x = Matrix::new(n, d, vals.into_iter().map(f64::from).collect()).unwrap();
                let grads = gh
                    .into_iter()
                    .map(|(g, h)| GradientPair {
                        g: g as f64 / 4.0,
                        h: h as f64 / 8.0,
                    })
                    .collect();
                (x, grads)
            })
    })
}

fn labelled_dataset(max_rows: usize, max_features: usize) -> impl Strategy<Value = ProcessDataset> {
    (4usize..=max_rows, 1usize..=max_features).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(-3.0f64..3.0, n * d),
            prop::collection::vec(0u8..=1, n - 2),
        )
            .prop_map(move |(vals, mut target)| {
                target.push(0);
                target.push(1);
                let names = (0..d).map(|j| format!("f{j}")).collect();
                ProcessDataset::new(Matrix::new(n, d, vals).unwrap(), names, target).unwrap()
            })
    })
}

fn mean_loss(ens: &procxai::gbdt::BoostedEnsemble, ds: &ProcessDataset) -> f64 {
    (0..ds.n_rows())
        .map(|i| log_loss(ds.target()[i], ens.raw_score(ds.row(i))))
        .sum::<f64>()
        / ds.n_rows() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn split_search_matches_exhaustive_scan((x, grads) in tiny_problem(), lambda in 0u8..3) {
        let lambda = lambda as f64;
        let rows: Vec<usize> = (0..x.n_rows()).collect();
        let got = best_split_exact(&rows, &grads, &x, lambda, 0.0).unwrap();
        let want = brute_force(&x, &grads, lambda, 0.0);
        match (got, want) {
            (None, None) => {}
            (Some(s), Some((f, t, gain))) => {
                prop_assert_eq!(s.feature, f);
                prop_assert_eq!(s.threshold, t);
                prop_assert!((s.gain - gain).abs() <= 1e-9 * gain.abs().max(1e-12));
            }
            (a, b) => prop_assert!(false, "got {:?}, oracle {:?}", a, b),
        }
    }

    #[test]
    fn leaf_weight_minimises_quadratic(g in -10.0f64..10.0, h in 0.1f64..10.0, lambda in 0.0f64..5.0) {
        let w = leaf_weight(&[GradientPair { g, h }], lambda).unwrap();
        let obj = |w: f64| g * w + 0.5 * (h + lambda) * w * w;
        prop_assert!(obj(w + 1e-3) > obj(w));
        prop_assert!(obj(w - 1e-3) > obj(w));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn training_loss_never_increases(
        ds in labelled_dataset(20, 3),
        lr in 0.05f64..=0.3,
        depth in 1usize..=3,
    ) {
        let params = ExactGreedyParams {
            n_trees: 15,
            max_depth: depth,
            learning_rate: lr,
            gamma: 0.0,
            ..Default::default()
        };
        let ens = train_exact_greedy(&ds, &params).unwrap();
        let losses: Vec<f64> = (0..=ens.trees().len())
            .map(|t| mean_loss(&ens.truncated(t), &ds))
            .collect();
        for w in losses.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9, "{:?}", losses);
        }
    }

    #[test]
    fn training_is_deterministic(ds in labelled_dataset(30, 3), seed in any::<u64>()) {
        let p = ExactGreedyParams { n_trees: 5, ..Default::default() };
        prop_assert_eq!(train_exact_greedy(&ds, &p).unwrap(), train_exact_greedy(&ds, &p).unwrap());
        let g = GossParams { n_trees: 5, seed, min_child_samples: 1.0, ..Default::default() };
        prop_assert_eq!(train_goss_leafwise(&ds, &g).unwrap(), train_goss_leafwise(&ds, &g).unwrap());
    }
}

#[test]
fn gradients_match_finite_differences() {
    let e = 1e-4;
    for step in 0..=1000 {
        let r = -5.0 + step as f64 * 0.01;
        for y in [0u8, 1] {
            let gh = logistic_grad_hess(y, r);
            let l = |v: f64| log_loss(y, v);
            let g_fd = (l(r + e) - l(r - e)) / (2.0 * e);
            let h_fd = (l(r + e) - 2.0 * l(r) + l(r - e)) / (e * e);
            assert!((gh.g - g_fd).abs() < 1e-6, "g at {r}: {} vs {g_fd}", gh.g);
            assert!((gh.h - h_fd).abs() < 1e-6, "h at {r}: {} vs {h_fd}", gh.h);
        }
    }
}

#[test]
fn goss_sizes_follow_ceilings() {
    let pct = [1u64, 5, 10, 15, 20, 25, 30, 33, 40, 50, 60, 70, 80, 90, 99];
    for n in 1u64..=150 {
        let grads: Vec<GradientPair> = (0..n)
            .map(|i| GradientPair {
                g: ((i * 37) % 11) as f64 - 5.0,
                h: 1.0,
            })
            .collect();
        for &a in &pct {
            for &b in &pct {
                let (af, bf) = (a as f64 / 100.0, b as f64 / 100.0);
                let top = (a * n).div_ceil(100);
                let rest = (b * n).div_ceil(100);
                let res = goss_sample(&grads, af, bf, n ^ a ^ b);
                if a + b > 100 || top >= n || rest > n - top {
                    assert!(res.is_err(), "n={n} a={af} b={bf}");
                    continue;
                }
                let s = res.unwrap();
                assert_eq!(s.top.len() as u64, top, "n={n} a={af}");
                assert_eq!(s.rest.len() as u64, rest, "n={n} b={bf}");
                assert!((s.multiplier - (1.0 - af) / bf).abs() < 1e-12);
                let mut all: Vec<usize> = s.top.iter().chain(&s.rest).copied().collect();
                all.sort_unstable();
                all.dedup();
                assert_eq!(all.len() as u64, top + rest);
                let min_top = s.top.iter().map(|&i| grads[i].g.abs()).fold(f64::INFINITY, f64::min);
                assert!(s.rest.iter().all(|&i| grads[i].g.abs() <= min_top));
            }
        }
    }
}
