//! Resolves the data flags into train and test sets.

use std::path::{Path, PathBuf};

use kcnet::data::{load_csv, load_idx_with, split, CsvOptions, IdxOptions, SplitSpec};
use kcnet::{Dataset, Scalar};
use log::info;

use crate::config::DataSection;
use crate::error::{CliError, CliResult};

pub const MNIST_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

pub struct TrainTest<T: Scalar> {
    pub train: Dataset<T>,
    pub test: Dataset<T>,
}

fn pair(v: &[PathBuf], flag: &str) -> CliResult<(PathBuf, PathBuf)> {
    match v {
        [a, b] => Ok((a.clone(), b.clone())),
        _ => Err(CliError::Usage(format!("{flag} takes an images file and a labels file"))),
    }
}

fn idx_paths(data: &DataSection, train: bool) -> CliResult<Option<(PathBuf, PathBuf)>> {
    let explicit = if train { &data.idx_train } else { &data.idx_test };
    if let Some(v) = explicit {
        return pair(v, if train { "--idx-train" } else { "--idx-test" }).map(Some);
    }
    Ok(data.idx_dir.as_ref().map(|dir| {
        let k = if train { 0 } else { 2 };
        (dir.join(MNIST_FILES[k]), dir.join(MNIST_FILES[k + 1]))
    }))
}

fn csv_options(data: &DataSection) -> CliResult<CsvOptions> {
    let delim = data.delimiter.unwrap_or(',');
    let delim = u8::try_from(delim).map_err(|_| CliError::Usage(format!("delimiter {delim:?} is not ASCII")))?;
    Ok(CsvOptions::new(data.label_column.clone().unwrap_or_else(|| "label".into())).delimiter(delim))
}

fn load_idx_pair<T: Scalar>(images: &Path, labels: &Path, data: &DataSection) -> CliResult<Dataset<T>> {
    let opts = IdxOptions {
        transpose: data.transpose.unwrap_or(false),
    };
    Ok(load_idx_with(images, labels, &opts)?)
}

/// Training and test sets. Without an explicit test source, a stratified
/// `test_fraction` of the training file is held out using `split_seed`.
pub fn load_train_test<T: Scalar>(data: &DataSection, split_seed: u64) -> CliResult<TrainTest<T>> {
    let has_idx = data.idx_dir.is_some() || data.idx_train.is_some();
    if has_idx && data.csv.is_some() {
        return Err(CliError::Usage("give either IDX or CSV training data, not both".into()));
    }
    let (train, test) = if let Some((img, lab)) = idx_paths(data, true)? {
        let train = load_idx_pair(&img, &lab, data)?;
        let test = match idx_paths(data, false)? {
            Some((img, lab)) => Some(load_idx_pair(&img, &lab, data)?),
            None => None,
        };
        (train, test)
    } else if let Some(path) = &data.csv {
        let opts = csv_options(data)?;
        let train = load_csv(path, &opts)?;
        let test = match &data.csv_test {
            Some(p) => Some(load_csv(p, &opts)?),
            None => None,
        };
        (train, test)
    } else {
        return Err(CliError::Usage(
            "no training data: pass --idx-dir, --idx-train or --csv".into(),
        ));
    };

    let (train, test) = match test {
        Some(test) => {
            let test = test.align_classes(train.class_labels())?;
            (train, test)
        }
        None => {
            let frac = data.test_fraction.unwrap_or(0.1);
            let spec = SplitSpec::new(1.0 - frac, split_seed).stratified(true);
            split(&train, &spec)?
        }
    };
    if test.n_features() != train.n_features() {
        return Err(kcnet::KcError::DimensionMismatch {
            context: "test features",
            expected: train.n_features(),
            actual: test.n_features(),
        }
        .into());
    }
    info!(
        "data: {} train / {} test samples, {} features, {} classes",
        train.n_samples(),
        test.n_samples(),
        train.n_features(),
        train.n_classes()
    );
    Ok(TrainTest { train, test })
}

/// Test set only: the IDX test pair, else the CSV test file, else the whole CSV.
pub fn load_test<T: Scalar>(data: &DataSection) -> CliResult<Dataset<T>> {
    if let Some((img, lab)) = idx_paths(data, false)? {
        return load_idx_pair(&img, &lab, data);
    }
    match data.csv_test.as_ref().or(data.csv.as_ref()) {
        Some(p) => Ok(load_csv(p, &csv_options(data)?)?),
        None => Err(CliError::Usage(
            "no test data: pass --idx-dir, --idx-test, --csv-test or --csv".into(),
        )),
    }
}
