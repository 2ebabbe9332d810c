//! SMOTE oversampling of the minority class.
//!
//! A synthetic row is placed on the segment between a minority row and one of
//! its `k` nearest minority-class neighbours. Distances are plain Euclidean on
//! the raw feature values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{ProcessDataset, DEFECTIVE, NORMAL};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SmoteConfig {
    pub k: usize,
    /// Desired minority size; `None` balances to the majority count.
    pub target_count: Option<usize>,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig {
            k: 5,
            target_count: None,
            seed: 0,
        }
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the `k` points closest to `points[query]`, nearest first.
/// The query itself is excluded; equal distances go to the lower index.
pub fn nearest_neighbors<R: AsRef<[f64]>>(
    points: &[R],
    query: usize,
    k: usize,
) -> Result<Vec<usize>> {
    if query >= points.len() {
        return Err(Error::param(format!(
            "query index {query} out of range for {} points",
            points.len()
        )));
    }
    if k >= points.len() {
        return Err(Error::InsufficientData(format!(
            "k = {k} needs more than {} points",
            points.len()
        )));
    }
    let q = points[query].as_ref();
    let mut dist: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != query)
        .map(|(i, p)| (squared_distance(q, p.as_ref()), i))
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(dist.into_iter().take(k).map(|(_, i)| i).collect())
}

/// `x_i + w·(x_k − x_i)`, coordinate-wise. Exact at both endpoints and never
/// outside the parents' per-coordinate interval.
pub fn synthesize(x_i: &[f64], x_k: &[f64], w: f64) -> Result<Vec<f64>> {
    if x_i.len() != x_k.len() {
        return Err(Error::DimensionMismatch {
            expected: x_i.len(),
            found: x_k.len(),
        });
    }
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::param(format!("interpolation weight {w} outside [0, 1]")));
    }
    Ok(x_i
        .iter()
        .zip(x_k)
        .map(|(&a, &b)| {
            let v = (1.0 - w) * a + w * b;
            v.clamp(a.min(b), a.max(b))
        })
        .collect())
}

/// Label of the smaller class; defective on a tie.
pub fn minority_label(ds: &ProcessDataset) -> u8 {
    let (normal, defective) = ds.class_counts();
    if normal < defective {
        NORMAL
    } else {
        DEFECTIVE
    }
}

/// A synthetic row together with the minority-row indices (into the input
/// dataset) it was interpolated from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRow {
    pub values: Vec<f64>,
    pub base: usize,
    pub neighbor: usize,
    pub weight: f64,
}

/// Synthetic minority rows only, with their parentage.
pub fn synthesize_minority(train: &ProcessDataset, cfg: &SmoteConfig) -> Result<Vec<SyntheticRow>> {
    if cfg.k < 1 {
        return Err(Error::param("smote k must be >= 1"));
    }
    let label = minority_label(train);
    let minority: Vec<usize> = (0..train.n_rows())
        .filter(|&i| train.target()[i] == label)
        .collect();
    let majority = train.n_rows() - minority.len();
    let target = cfg.target_count.unwrap_or(majority);
    if target < minority.len() {
        return Err(Error::param(format!(
            "target count {target} is below the current minority count {}",
            minority.len()
        )));
    }
    let n_new = target - minority.len();
    if n_new == 0 {
        return Ok(Vec::new());
    }
    if minority.len() < 2 || minority.len() < cfg.k + 1 {
        return Err(Error::InsufficientData(format!(
            "minority class has {} rows; k = {} needs at least {}",
            minority.len(),
            cfg.k,
            (cfg.k + 1).max(2)
        )));
    }

    let points: Vec<&[f64]> = minority.iter().map(|&i| train.row(i)).collect();
    let neighbors = (0..points.len())
        .map(|q| nearest_neighbors(&points, q, cfg.k))
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(n_new);
    for _ in 0..n_new {
        let b = rng.random_range(0..points.len());
        let nb = neighbors[b][rng.random_range(0..cfg.k)];
        let w: f64 = rng.random_range(0.0..=1.0);
        out.push(SyntheticRow {
            values: synthesize(points[b], points[nb], w)?,
            base: minority[b],
            neighbor: minority[nb],
            weight: w,
        });
    }
    Ok(out)
}

/// Append synthetic minority rows until the minority class reaches the target
/// count. Original rows are kept unchanged, in order, ahead of the new rows.
pub fn oversample(train: &ProcessDataset, cfg: &SmoteConfig) -> Result<ProcessDataset> {
    let synthetic = synthesize_minority(train, cfg)?;
    if synthetic.is_empty() {
        return Ok(train.clone());
    }
    let label = minority_label(train);
    let rows: Vec<&[f64]> = synthetic.iter().map(|s| s.values.as_slice()).collect();
    let extra = ProcessDataset::new(
        Matrix::from_rows_with_width(&rows, train.n_features())?,
        train.feature_names().to_vec(),
        vec![label; synthetic.len()],
    )?;
    train.concat(&extra)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: &[Vec<f64>], target: Vec<u8>) -> ProcessDataset {
        let names = (0..rows[0].len()).map(|j| format!("f{j}")).collect();
        ProcessDataset::new(Matrix::from_rows(rows).unwrap(), names, target).unwrap()
    }

    #[test]
    fn neighbors_on_a_line() {
        let pts = vec![vec![0.0], vec![1.0], vec![10.0]];
        assert_eq!(nearest_neighbors(&pts, 0, 1).unwrap(), vec![1]);
        assert_eq!(nearest_neighbors(&pts, 2, 2).unwrap(), vec![1, 0]);
        assert!(nearest_neighbors(&pts, 0, 3).is_err());
    }

    #[test]
    fn neighbor_duplicates_and_ties() {
        let pts = vec![vec![5.0, 5.0], vec![1.0, 0.0], vec![5.0, 5.0]];
        assert_eq!(nearest_neighbors(&pts, 0, 1).unwrap(), vec![2]);
        let tie = vec![vec![0.0], vec![1.0], vec![-1.0]];
        assert_eq!(nearest_neighbors(&tie, 0, 2).unwrap(), vec![1, 2]);
    }

    #[test]
    fn synthesize_endpoints_and_midpoint() {
        let a = [0.1, -3.7, 1e9];
        let b = [0.3, 2.2, -1e-9];
        assert_eq!(synthesize(&a, &b, 0.0).unwrap(), a.to_vec());
        assert_eq!(synthesize(&a, &b, 1.0).unwrap(), b.to_vec());
        assert_eq!(synthesize(&[0.0, 0.0], &[2.0, 4.0], 0.5).unwrap(), vec![1.0, 2.0]);
        assert!(synthesize(&[0.0], &[1.0, 2.0], 0.5).is_err());
    }

    #[test]
    fn zero_synthesis_is_identity() {
        let d = ds(&[vec![1.0], vec![2.0], vec![3.0]], vec![1, 1, 0]);
        let cfg = SmoteConfig {
            k: 1,
            target_count: Some(1),
            seed: 3,
        };
        assert_eq!(oversample(&d, &cfg).unwrap(), d);
    }

    #[test]
    fn two_point_minority_stays_on_segment() {
        let mut rows = vec![vec![0.0, 0.0]; 20];
        rows.push(vec![1.0, 2.0]);
        rows.push(vec![4.0, -1.0]);
        let mut target = vec![1u8; 20];
        target.extend([0, 0]);
        let d = ds(&rows, target);
        let cfg = SmoteConfig {
            k: 1,
            target_count: None,
            seed: 11,
        };
        let out = oversample(&d, &cfg).unwrap();
        assert_eq!(out.class_counts(), (20, 20));
        let (p, q) = ([1.0, 2.0], [4.0, -1.0]);
        for i in 22..out.n_rows() {
            let r = out.row(i);
            // cross product of (r - p) and (q - p) vanishes on the segment
            let cross = (r[0] - p[0]) * (q[1] - p[1]) - (r[1] - p[1]) * (q[0] - p[0]);
            assert!(cross.abs() < 1e-9);
            assert!(r[0] >= 1.0 && r[0] <= 4.0);
        }
    }

    #[test]
    fn minority_too_small() {
        let d = ds(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]], vec![1, 1, 0, 0]);
        let cfg = SmoteConfig {
            k: 2,
            target_count: Some(3),
            seed: 0,
        };
        assert!(matches!(oversample(&d, &cfg), Err(Error::InsufficientData(_))));
        let below = SmoteConfig {
            k: 1,
            target_count: Some(1),
            seed: 0,
        };
        assert!(oversample(&d, &below).is_err());
    }
}
