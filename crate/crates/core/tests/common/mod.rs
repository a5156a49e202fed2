#![allow(dead_code)]

use nhlat::c64;
use nhlat::model::ComplexMatrix;

/// Eigenvalues straight from the dense solver, unsorted.
pub fn eigenvalues(h: &ComplexMatrix) -> Vec<c64> {
    let evd = h.eigen().expect("eigendecomposition");
    let s = evd.S().column_vector();
    (0..h.nrows()).map(|i| s[i]).collect()
}

/// Largest distance in a greedy nearest-neighbour pairing of two equally
/// sized point sets.
pub fn set_distance(a: &[c64], b: &[c64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("unused partner");
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
