use procxai::dataset::ProcessDataset;
use procxai::ice::{control_range, ice_surface};
use procxai::Matrix;
use proptest::prelude::*;

fn dataset(vals: Vec<f64>, n: usize, d: usize) -> ProcessDataset {
    let names = (0..d).map(|j| format!("f{j}")).collect();
    let target = (0..n).map(|i| (i % 2) as u8).collect();
    ProcessDataset::new(Matrix::new(n, d, vals).unwrap(), names, target).unwrap()
}

fn data() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1usize..25).prop_flat_map(|n| (Just(n), prop::collection::vec(0u8..8, n * 3)))
        .prop_map(|(n, v)| (n, v.into_iter().map(|x| x as f64 * 0.5).collect()))
}

/// Uses features 0 and 1 only.
fn model(r: &[f64]) -> f64 {
    (r[0] - 1.5).sin() * 2.0 + 0.3 * r[1] * r[0] - 1.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn pdp_is_mean_of_curves((n, vals) in data(), feature in 0usize..3) {
        let ds = dataset(vals, n, 3);
        let s = ice_surface(&model, &ds, feature, 500, 0).unwrap();
        prop_assert!(s.grid.windows(2).all(|w| w[0] < w[1]));
        let col = ds.features().column(feature);
        for g in &s.grid {
            prop_assert!(col.contains(g));
        }
        for g in 0..s.grid.len() {
            let mut sum = 0.0;
            for q in 0..s.curves.n_rows() {
                let p = s.curves.get(q, g);
                prop_assert!((0.0..=1.0).contains(&p));
                sum += p;
            }
            prop_assert!((s.pdp[g] - sum / s.curves.n_rows() as f64).abs() <= 1e-12);
        }
        if feature == 2 {
            for q in 0..s.curves.n_rows() {
                let r = s.curves.row(q);
                let (lo, hi) = r.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
                prop_assert_eq!(hi - lo, 0.0);
            }
        }
    }

    #[test]
    fn pdp_ignores_instance_order((n, vals) in data(), rot in 0usize..25) {
        let ds = dataset(vals, n, 3);
        let mut order: Vec<usize> = (0..n).collect();
        order.rotate_left(rot % n);
        order.reverse();
        let shuffled = ds.subset(&order);
        let a = ice_surface(&model, &ds, 0, 500, 0).unwrap();
        let b = ice_surface(&model, &shuffled, 0, 500, 0).unwrap();
        prop_assert_eq!(a.pdp, b.pdp);
    }

    #[test]
    fn ranges_nest_and_hold_the_argmax(
        pdp in prop::collection::vec(0.0f64..1.0, 1..40),
    ) {
        let grid: Vec<f64> = (0..pdp.len()).map(|i| 100.0 + i as f64 * 0.4).collect();
        let r: Vec<(f64, f64)> = [0.05, 0.1, 0.2]
            .iter()
            .map(|&a| control_range(&pdp, &grid, a).unwrap())
            .collect();
        for w in r.windows(2) {
            prop_assert!(w[1].0 <= w[0].0 && w[0].1 <= w[1].1);
        }
        let arg = pdp.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        for &(lo, hi) in &r {
            prop_assert!(lo <= grid[arg] && grid[arg] <= hi);
            prop_assert!(grid.contains(&lo) && grid.contains(&hi));
        }
    }
}
