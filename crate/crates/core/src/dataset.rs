//! Labelled feature matrices and their CSV exchange format.
//!
//! CSV layout: a header row starting with `sample_id,label` followed by one
//! column per feature. Labels are arbitrary strings; they are mapped to
//! `0..K` in sorted order of their distinct values.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    features: DMatrix<f64>,
    labels: Vec<usize>,
    n_classes: usize,
    feature_names: Vec<String>,
    sample_ids: Vec<String>,
    /// Original label string for each class index.
    class_names: Vec<String>,
}

impl LabeledDataset {
    /// Validating constructor. Class presence is not required here: subsets
    /// produced by splitting may lack a class. See [`Self::require_all_classes`].
    pub fn new(
        features: DMatrix<f64>,
        labels: Vec<usize>,
        n_classes: usize,
        feature_names: Vec<String>,
        sample_ids: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        check_len("labels", features.nrows(), labels.len())?;
        check_len("sample ids", features.nrows(), sample_ids.len())?;
        check_len("feature names", features.ncols(), feature_names.len())?;
        check_len("class names", n_classes, class_names.len())?;
        if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(Error::Domain(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % features.nrows(), pos / features.nrows());
            return Err(Error::Domain(format!(
                "non-finite feature at sample {r}, feature {c}"
            )));
        }
        Ok(Self {
            features,
            labels,
            n_classes,
            feature_names,
            sample_ids,
            class_names,
        })
    }

    /// Constructor with generated names (`f0..`, `s0..`, class `"0".."K-1"`).
    pub fn from_parts(features: DMatrix<f64>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let fnames = (0..features.ncols()).map(|m| format!("f{m}")).collect();
        let ids = (0..features.nrows()).map(|i| format!("s{i}")).collect();
        let cnames = (0..n_classes).map(|k| k.to_string()).collect();
        Self::new(features, labels, n_classes, fnames, ids, cnames)
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn sample(&self, i: usize) -> DVector<f64> {
        self.features.row(i).transpose()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Errors unless every class in `0..K` has at least one sample.
    pub fn require_all_classes(&self) -> Result<()> {
        match self.class_counts().iter().position(|&c| c == 0) {
            Some(k) => Err(Error::Degenerate(format!(
                "class {k} ({}) has no samples",
                self.class_names[k]
            ))),
            None => Ok(()),
        }
    }

    /// Rows `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let features = self.features.select_rows(indices.iter());
        Self {
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
            feature_names: self.feature_names.clone(),
            sample_ids: indices.iter().map(|&i| self.sample_ids[i].clone()).collect(),
            class_names: self.class_names.clone(),
        }
    }

    /// Same samples and labels with a new feature matrix.
    pub fn with_features(&self, features: DMatrix<f64>, feature_names: Vec<String>) -> Result<Self> {
        Self::new(
            features,
            self.labels.clone(),
            self.n_classes,
            feature_names,
            self.sample_ids.clone(),
            self.class_names.clone(),
        )
    }

    /// Keeps only the listed feature columns, in the given order.
    pub fn select_features(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&c) = columns.iter().find(|&&c| c >= self.n_features()) {
            return Err(Error::Domain(format!("feature column {c} out of range")));
        }
        let features = self.features.select_columns(columns.iter());
        let names = columns.iter().map(|&c| self.feature_names[c].clone()).collect();
        self.with_features(features, names)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file)
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(input);
        let header = reader.headers()?.clone();
        let col = |i: usize| header.get(i).unwrap_or("").trim().to_owned();
        if col(0) != "sample_id" {
            return Err(Error::Parse {
                row: 1,
                column: col(0),
                message: "first column must be `sample_id`".into(),
            });
        }
        if col(1) != "label" {
            return Err(Error::Parse {
                row: 1,
                column: col(1),
                message: "second column must be `label`".into(),
            });
        }
        let feature_names: Vec<String> = (2..header.len()).map(col).collect();
        let m = feature_names.len();
        if m == 0 {
            return Err(Error::Parse {
                row: 1,
                column: String::new(),
                message: "no feature columns".into(),
            });
        }

        let mut ids = Vec::new();
        let mut raw_labels = Vec::new();
        let mut values = Vec::new();
        for (r, record) in reader.records().enumerate() {
            // Row numbers are 1-based and count the header.
            let row = r + 2;
            let record = record?;
            if record.len() != m + 2 {
                return Err(Error::Parse {
                    row,
                    column: String::new(),
                    message: format!("expected {} fields, found {}", m + 2, record.len()),
                });
            }
            ids.push(record[0].to_owned());
            raw_labels.push(record[1].trim().to_owned());
            for (j, cell) in record.iter().skip(2).enumerate() {
                let v = cell
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        row,
                        column: feature_names[j].clone(),
                        message: format!("not a finite number: {cell:?}"),
                    })?;
                values.push(v);
            }
        }
        if ids.is_empty() {
            return Err(Error::Empty("dataset has no rows"));
        }

        let class_names: Vec<String> = raw_labels
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let labels = raw_labels
            .iter()
            .map(|l| class_names.binary_search(l).expect("label is in its own set"))
            .collect();
        let features = DMatrix::from_row_slice(ids.len(), m, &values);
        Self::new(
            features,
            labels,
            class_names.len(),
            feature_names,
            ids,
            class_names,
        )
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Writes the CSV format; floats use the shortest representation that
    /// parses back to the same value.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["sample_id".to_owned(), "label".to_owned()];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.n_samples() {
            let mut rec = vec![
                self.sample_ids[i].clone(),
                self.class_names[self.labels[i]].clone(),
            ];
            rec.extend(self.features.row(i).iter().map(|v| format!("{v:?}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "sample_id,label,g1,g2\nx1,B,1.0,2.5\nx2,A,-1,0\nx3,B,3e-1,4\n";

    #[test]
    fn labels_map_in_sorted_order() {
        let d = LabeledDataset::read_csv(FIXTURE.as_bytes()).unwrap();
        assert_eq!(d.n_classes(), 2);
        assert_eq!(d.class_names(), &["A".to_owned(), "B".to_owned()]);
        assert_eq!(d.labels(), &[1, 0, 1]);
        assert_eq!(d.features()[(2, 0)], 0.3);
        assert_eq!(d.feature_names(), &["g1".to_owned(), "g2".to_owned()]);
    }

    #[test]
    fn nan_cell_names_row_and_column() {
        let text = "sample_id,label,g1,g2\nx1,A,1,2\nx2,B,NaN,3\n";
        match LabeledDataset::read_csv(text.as_bytes()) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "g1");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn ragged_rows_and_bad_header_rejected() {
        let ragged = "sample_id,label,g1\nx1,A,1,2\n";
        assert!(matches!(
            LabeledDataset::read_csv(ragged.as_bytes()),
            Err(Error::Parse { row: 2, .. })
        ));
        let header = "id,label,g1\nx1,A,1\n";
        assert!(matches!(
            LabeledDataset::read_csv(header.as_bytes()),
            Err(Error::Parse { row: 1, .. })
        ));
        let text = "sample_id,label,g1\nx1,A,abc\n";
        assert!(LabeledDataset::read_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let d = LabeledDataset::read_csv(FIXTURE.as_bytes()).unwrap();
        let d2 = d.with_features(
            d.features().map(|v| v / 3.0 + 1e-17),
            d.feature_names().to_vec(),
        )
        .unwrap();
        let mut buf = Vec::new();
        d2.write_csv(&mut buf).unwrap();
        let back = LabeledDataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, d2);
    }

    #[test]
    fn missing_class_detected() {
        let d = LabeledDataset::from_parts(DMatrix::zeros(2, 1), vec![0, 0], 2).unwrap();
        assert!(d.require_all_classes().is_err());
        assert!(LabeledDataset::from_parts(DMatrix::zeros(1, 1), vec![3], 2).is_err());
    }

    #[test]
    fn subset_keeps_order() {
        let d = LabeledDataset::read_csv(FIXTURE.as_bytes()).unwrap();
        let s = d.subset(&[2, 0]);
        assert_eq!(s.sample_ids(), &["x3".to_owned(), "x1".to_owned()]);
        assert_eq!(s.features()[(0, 1)], 4.0);
    }
}
