mod common;

use std::path::PathBuf;

use common::toy_dataset;
use kcnet::data::{
    encode_idx_images, encode_idx_labels, load_csv, load_idx, split_indices, standardize, CsvOptions, SplitSpec,
};
use kcnet::{Dataset, KcError};
use ndarray::Array2;
use proptest::prelude::*;

fn mnist_dir() -> Option<PathBuf> {
    let dir = std::env::var_os("KCNET_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"));
    dir.join("t10k-labels-idx1-ubyte").is_file().then_some(dir)
}

#[test]
fn mnist_test_labels_match_raw_bytes() {
    let Some(dir) = mnist_dir() else {
        eprintln!("MNIST files not found; skipping");
        return;
    };
    let raw = std::fs::read(dir.join("t10k-labels-idx1-ubyte")).unwrap();
    assert_eq!(&raw[..4], &[0, 0, 8, 1]);
    let data: Dataset<f32> = load_idx(dir.join("t10k-images-idx3-ubyte"), dir.join("t10k-labels-idx1-ubyte")).unwrap();
    assert_eq!((data.n_samples(), data.n_features(), data.n_classes()), (10_000, 784, 10));
    // classes are the sorted digit values, so the index equals the digit
    assert_eq!(data.labels()[0], raw[8] as usize);
    assert_eq!(data.class_labels()[data.labels()[0]], raw[8].to_string());
    assert_eq!(data.image_shape(), Some((28, 28)));
}

#[test]
fn idx_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = kcnet::rng::SeededRng::new(3);
    let x = Array2::from_shape_fn((7, 6), |_| rng.below(256) as f64 / 255.0);
    let labels = vec![3, 0, 1, 2, 3, 0, 1];
    let classes = (0..4).map(|c| c.to_string()).collect();
    let data = Dataset::new(x, labels, classes).unwrap().with_image_shape(2, 3).unwrap();
    let (ip, lp) = (dir.path().join("i"), dir.path().join("l"));
    std::fs::write(&ip, encode_idx_images(&data)).unwrap();
    std::fs::write(&lp, encode_idx_labels(&data).unwrap()).unwrap();
    let back: Dataset<f64> = load_idx(&ip, &lp).unwrap();
    assert_eq!(back.features(), data.features());
    assert_eq!(back.labels(), data.labels());
    assert_eq!(back.image_shape(), Some((2, 3)));
}

#[test]
fn idx_errors_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let digits = |n: usize| {
        let labels = (0..n).map(|i| i % 2).collect();
        Dataset::new(Array2::<f64>::zeros((n, 4)), labels, vec!["0".into(), "1".into()]).unwrap()
    };
    let data = digits(3);
    let (ip, lp) = (dir.path().join("i"), dir.path().join("l"));
    let images = encode_idx_images(&data);
    let labels = encode_idx_labels(&data).unwrap();
    std::fs::write(&ip, &images[..images.len() - 1]).unwrap();
    std::fs::write(&lp, &labels).unwrap();
    assert!(matches!(load_idx::<f64>(&ip, &lp), Err(KcError::TruncatedPayload { .. })));
    std::fs::write(&ip, &labels).unwrap();
    assert!(matches!(load_idx::<f64>(&ip, &lp), Err(KcError::BadMagic { .. })));
    let more = digits(4);
    std::fs::write(&ip, encode_idx_images(&more)).unwrap();
    assert!(matches!(load_idx::<f64>(&ip, &lp), Err(KcError::CountMismatch { .. })));
    assert!(matches!(
        load_idx::<f64>(dir.path().join("absent"), &lp),
        Err(KcError::ReadFile { .. })
    ));
}

#[test]
fn csv_minimal_and_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.csv");
    std::fs::write(&p, "f1,f2,y\n1,2,a\n3,4,b\n5,6,a\n7,8,b\n").unwrap();
    let d: Dataset<f64> = load_csv(&p, &CsvOptions::new("y")).unwrap();
    assert_eq!((d.n_samples(), d.n_features(), d.n_classes()), (4, 2, 2));
    assert_eq!(d.one_hot().dim(), (4, 2));
    std::fs::write(&p, "f1,f2,y\n").unwrap();
    assert!(matches!(load_csv::<f64>(&p, &CsvOptions::new("y")), Err(KcError::EmptyDataset)));
}

#[test]
fn standardized_train_is_centered() {
    let data = toy_dataset(50, 7, 2);
    let (train, _, stats) = standardize(&data, &[]).unwrap();
    for col in train.features().columns() {
        assert!(col.mean().unwrap().abs() <= 1e-12);
    }
    assert_eq!(stats.dim(), 7);
}

proptest! {
    #[test]
    fn split_is_a_partition(n in 2usize..200, frac in 0.05f64..0.95, seed in any::<u64>(), strat in any::<bool>()) {
        let labels: Vec<usize> = (0..n).map(|i| (i * 7) % 3).collect();
        match split_indices(&labels, &SplitSpec::new(frac, seed).stratified(strat)) {
            Ok((a, b)) => {
                let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            }
            Err(e) => prop_assert!(matches!(e, KcError::EmptySplit { .. }), "unexpected error {}", e),
        }
    }

    #[test]
    fn one_hot_rows_sum_to_one(n in 1usize..40, c in 2usize..6, seed in any::<u64>()) {
        let mut rng = kcnet::rng::SeededRng::new(seed);
        let labels: Vec<usize> = (0..n).map(|_| rng.below(c)).collect();
        let classes = (0..c).map(|k| k.to_string()).collect();
        let d = Dataset::new(Array2::<f64>::zeros((n, 2)), labels, classes).unwrap();
        for row in d.one_hot().rows() {
            prop_assert_eq!(row.sum(), 1.0);
            prop_assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 1);
        }
    }
}
