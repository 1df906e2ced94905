use std::collections::BTreeMap;

use dcl_core::rng::StreamKey;
use dcl_core::stabilizer::{sample_uniform_clifford1, sample_uniform_clifford2, SYMPLECTIC2_ORDER};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn chi_square_p(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(chi2)
}

#[test]
fn two_qubit_classes_are_uniform() {
    let mut classes = vec![0u64; SYMPLECTIC2_ORDER];
    let mut signs = [0u64; 16];
    let key = StreamKey::new(7);
    for i in 0..72_000u64 {
        let g = sample_uniform_clifford2(&mut key.with(i).rng());
        classes[g.symplectic_class()] += 1;
        signs[g.signs() as usize] += 1;
    }
    let p = chi_square_p(&classes);
    assert!(p > 1e-3, "symplectic classes p = {p}");
    let p = chi_square_p(&signs);
    assert!(p > 1e-3, "signs p = {p}");
}

#[test]
fn single_qubit_gates_are_uniform() {
    let mut counts = BTreeMap::new();
    let key = StreamKey::new(8);
    for i in 0..24_000u64 {
        let g = sample_uniform_clifford1(&mut key.with(i).rng());
        *counts.entry((g.images(), g.signs())).or_insert(0u64) += 1;
    }
    assert_eq!(counts.len(), 24);
    let counts: Vec<u64> = counts.into_values().collect();
    let p = chi_square_p(&counts);
    assert!(p > 1e-3, "p = {p}");
}
