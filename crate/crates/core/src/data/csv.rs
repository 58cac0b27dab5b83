use std::path::Path;

use ndarray::Array2;

use super::Dataset;
use crate::error::{KcError, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub label_column: String,
    pub delimiter: u8,
}

impl CsvOptions {
    pub fn new(label_column: impl Into<String>) -> Self {
        Self {
            label_column: label_column.into(),
            delimiter: b',',
        }
    }

    pub fn delimiter(mut self, delimiter: u8) -> Self {
        self.delimiter = delimiter;
        self
    }
}

/// Reads a headed, delimited table. Every column except the label column must
/// be numeric. Row numbers in errors are 1-based data rows.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(true)
        .flexible(true)
        .from_reader(std::fs::File::open(path.as_ref()).map_err(|source| KcError::ReadFile {
            path: path.as_ref().display().to_string(),
            source,
        })?);
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let label_at = headers
        .iter()
        .position(|h| h == &options.label_column)
        .ok_or_else(|| KcError::MissingColumn(options.label_column.clone()))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != label_at)
        .map(|(_, h)| h.clone())
        .collect();
    if feature_names.is_empty() {
        return Err(KcError::EmptyDataset);
    }

    let mut values: Vec<T> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != headers.len() {
            return Err(KcError::RaggedRow {
                row,
                expected: headers.len(),
                found: record.len(),
            });
        }
        for (k, field) in record.iter().enumerate() {
            if k == label_at {
                raw_labels.push(field.trim().to_string());
                continue;
            }
            let v: f64 = field.trim().parse().map_err(|_| KcError::NonNumeric {
                row,
                column: headers[k].clone(),
                value: field.to_string(),
            })?;
            values.push(T::from_f64_lossy(v));
        }
    }
    if raw_labels.is_empty() {
        return Err(KcError::EmptyDataset);
    }

    let mut classes: Vec<String> = raw_labels.clone();
    classes.sort();
    classes.dedup();
    let numeric: Option<Vec<f64>> = classes.iter().map(|c| c.parse::<f64>().ok()).collect();
    if let Some(nums) = numeric {
        let mut pairs: Vec<(f64, String)> = nums.into_iter().zip(classes).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        classes = pairs.into_iter().map(|(_, s)| s).collect();
    }
    let labels = raw_labels
        .iter()
        .map(|l| classes.iter().position(|c| c == l).expect("label collected above"))
        .collect();

    let features = Array2::from_shape_vec((raw_labels.len(), feature_names.len()), values)
        .expect("row lengths checked");
    Dataset::new(features, labels, classes)?.with_feature_names(feature_names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn minimal_file() {
        let f = file("a,b,label\n1,2,x\n3,4,y\n5,6,x\n7,8,y\n");
        let d: Dataset<f64> = load_csv(f.path(), &CsvOptions::new("label")).unwrap();
        assert_eq!(d.features().dim(), (4, 2));
        assert_eq!(d.one_hot().dim(), (4, 2));
        assert_eq!(d.feature_names().unwrap(), &["a".to_string(), "b".to_string()]);
        assert_eq!(d.labels(), &[0, 1, 0, 1]);
    }

    #[test]
    fn header_only_is_empty() {
        let f = file("a,b,label\n");
        assert!(matches!(
            load_csv::<f64>(f.path(), &CsvOptions::new("label")),
            Err(KcError::EmptyDataset)
        ));
    }

    #[test]
    fn missing_label_column() {
        let f = file("a,b\n1,2\n");
        assert!(matches!(
            load_csv::<f64>(f.path(), &CsvOptions::new("label")),
            Err(KcError::MissingColumn(_))
        ));
    }

    #[test]
    fn ragged_row_reports_row() {
        let f = file("a,label\n1,x\n2\n");
        match load_csv::<f64>(f.path(), &CsvOptions::new("label")) {
            Err(KcError::RaggedRow { row, .. }) => assert_eq!(row, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_numeric_reports_row() {
        let f = file("a,label\n1,x\nfoo,y\n");
        match load_csv::<f64>(f.path(), &CsvOptions::new("label")) {
            Err(KcError::NonNumeric { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "a");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn quoted_fields_and_custom_delimiter() {
        let f = file("\"x;1\";label\n\"1.5\";\"a b\"\n2;c\n");
        let d: Dataset<f64> = load_csv(f.path(), &CsvOptions::new("label").delimiter(b';')).unwrap();
        assert_eq!(d.feature_names().unwrap(), &["x;1".to_string()]);
        assert_eq!(d.class_labels(), &["a b".to_string(), "c".to_string()]);
        assert_eq!(d.features()[[0, 0]], 1.5);
    }

    #[test]
    fn numeric_labels_sort_numerically() {
        let f = file("a,label\n1,10\n2,2\n3,1\n");
        let d: Dataset<f64> = load_csv(f.path(), &CsvOptions::new("label")).unwrap();
        assert_eq!(d.class_labels(), &["1".to_string(), "2".to_string(), "10".to_string()]);
    }
}
