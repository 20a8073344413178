//! Helpers shared by the property and acceptance suites.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use riskrec::change_risk::{ChangeMetrics, ChangeMetricsRecord, METRIC_COUNT};
use riskrec::telemetry::RatingMatrix;

pub type Grid = Vec<Vec<Option<u32>>>;

pub fn to_matrix(grid: &Grid) -> RatingMatrix {
    let mut m = RatingMatrix::new();
    for u in 0..grid.len() {
        m.add_user(&format!("u{u}"));
    }
    for c in 0..grid[0].len() {
        m.add_component(&format!("c{c}"));
    }
    for (u, row) in grid.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            if let Some(n) = cell {
                m.record(&format!("u{u}"), &format!("c{c}"), *n);
            }
        }
    }
    m
}

/// Straightforward dense re-derivation of the completed matrix: centre by
/// observed means, cosine over centred columns with blanks as 0, the two
/// best positive neighbours, weighted mean in centred space, add the mean
/// back and floor at 0.
pub fn oracle_completion(grid: &Grid, n_neighbors: usize) -> Vec<Vec<f64>> {
    let nu = grid.len();
    let nc = grid[0].len();
    let mean: Vec<f64> = (0..nc)
        .map(|c| {
            let seen: Vec<f64> = (0..nu).filter_map(|u| grid[u][c]).map(f64::from).collect();
            if seen.is_empty() {
                0.0
            } else {
                seen.iter().sum::<f64>() / seen.len() as f64
            }
        })
        .collect();
    let centred = |u: usize, c: usize| grid[u][c].map_or(0.0, |n| f64::from(n) - mean[c]);
    let sim = |i: usize, j: usize| {
        let dot: f64 = (0..nu).map(|u| centred(u, i) * centred(u, j)).sum();
        let ni: f64 = (0..nu).map(|u| centred(u, i).powi(2)).sum();
        let nj: f64 = (0..nu).map(|u| centred(u, j).powi(2)).sum();
        if ni == 0.0 || nj == 0.0 {
            0.0
        } else {
            (dot / (ni.sqrt() * nj.sqrt())).clamp(-1.0, 1.0)
        }
    };
    let mut out = vec![vec![0.0; nc]; nu];
    for c in 0..nc {
        let mut nbrs: Vec<(usize, f64)> = (0..nc)
            .filter(|&j| j != c)
            .map(|j| (j, sim(c, j)))
            .filter(|&(_, s)| s > 0.0)
            .collect();
        nbrs.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        nbrs.truncate(n_neighbors);
        for u in 0..nu {
            out[u][c] = match grid[u][c] {
                Some(n) => f64::from(n),
                None => {
                    let w: f64 = nbrs.iter().map(|&(_, s)| s).sum();
                    let pred = if w > 0.0 {
                        nbrs.iter().map(|&(j, s)| s * centred(u, j)).sum::<f64>() / w
                    } else {
                        0.0
                    };
                    (pred + mean[c]).max(0.0)
                }
            };
        }
    }
    out
}

pub fn ranking(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));
    idx
}

pub fn random_records(rng: &mut ChaCha8Rng, n: usize) -> Vec<ChangeMetricsRecord> {
    (0..n)
        .map(|i| {
            let mut m = [0.0; METRIC_COUNT];
            for v in &mut m {
                *v = rng.gen_range(0.0..50.0);
            }
            ChangeMetricsRecord {
                component_id: format!("c{i}"),
                metrics: ChangeMetrics(m),
                label: None,
            }
        })
        .collect()
}
