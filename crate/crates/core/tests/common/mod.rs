#![allow(dead_code)]

use kcnet::rng::SeededRng;
use kcnet::Dataset;
use ndarray::Array2;

/// Noisy three-class problem where class `k` lifts every third feature.
pub fn toy_dataset(n: usize, d: usize, seed: u64) -> Dataset<f64> {
    let mut rng = SeededRng::new(seed);
    let mut x = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 3;
        for f in 0..d {
            x[[i, f]] = rng.uniform(-1.0, 1.0) + if f % 3 == class { 1.0 } else { 0.0 };
        }
        labels.push(class);
    }
    Dataset::new(x, labels, vec!["a".into(), "b".into(), "c".into()]).unwrap()
}
