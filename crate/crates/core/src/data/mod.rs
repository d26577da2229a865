//! Datasets, ±1 label encoding, CSV ingestion and synthetic domain shift.
//!
//! Features are stored column-per-sample (`d × N`). Everything downstream of
//! the feature map works row-per-sample.

mod csv;
mod manifest;
mod synth;

pub use self::csv::{load_csv, load_features, load_labels, write_features, write_labels};
pub(crate) use self::csv::write_all;
pub use self::manifest::{
    load_manifest, load_multiview_manifest, write_manifest, write_multiview_manifest, Manifest,
};
pub use self::synth::{generate_shift, generate_two_view, SynthShiftSpec};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{EdaError, Result};

/// A feature matrix (`d × N`) with optional class ids.
///
/// `N = 0` is permitted so that an empty unlabeled split can be represented.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(EdaError::Shape("dataset must have d >= 1".into()));
        }
        if !features.iter().all(|v| v.is_finite()) {
            return Err(EdaError::Numeric("dataset contains non-finite features".into()));
        }
        if let Some(l) = &labels {
            if l.len() != features.ncols() {
                return Err(EdaError::Shape(format!(
                    "{} labels for {} samples",
                    l.len(),
                    features.ncols()
                )));
            }
        }
        Ok(Self { features, labels })
    }

    pub fn unlabeled(features: DMatrix<f64>) -> Result<Self> {
        Self::new(features, None)
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            features: DMatrix::zeros(dim.max(1), 0),
            labels: None,
        }
    }

    /// Builds a dataset from row-per-sample data.
    pub fn from_rows(rows: &[Vec<f64>], labels: Option<Vec<usize>>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(EdaError::Shape("ragged rows".into()));
        }
        let features = DMatrix::from_fn(dim, rows.len(), |i, j| rows[j][i]);
        Self::new(features, labels)
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.features.nrows()
    }

    pub fn len(&self) -> usize {
        self.features.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.features.ncols() == 0
    }

    pub fn without_labels(&self) -> Dataset {
        Dataset {
            features: self.features.clone(),
            labels: None,
        }
    }

    /// Columns `indices` (in that order) as a new dataset.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let features = self.features.select_columns(indices.iter());
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        Dataset { features, labels }
    }

    /// Sample-wise concatenation. Labels survive only if both sides carry them.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.dim() != other.dim() {
            return Err(EdaError::Dimension {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        let features = crate::linalg::hstack(&self.features, &other.features);
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        Ok(Dataset { features, labels })
    }

    /// Appends extra feature rows (for building additional views).
    pub fn with_extra_features(&self, extra: &DMatrix<f64>) -> Result<Dataset> {
        if extra.ncols() != self.len() {
            return Err(EdaError::Shape(format!(
                "extra features have {} samples, dataset has {}",
                extra.ncols(),
                self.len()
            )));
        }
        let features = crate::linalg::vstack(&self.features, extra);
        Dataset::new(features, self.labels.clone())
    }

    pub(crate) fn require_labels(&self, what: &str) -> Result<&[usize]> {
        self.labels
            .as_deref()
            .ok_or_else(|| EdaError::Shape(format!("{what} must be labeled")))
    }
}

/// `N × c` target matrix with `+1` at the true class and `−1` elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMatrix {
    #[serde(with = "crate::serde_matrix::matrix")]
    values: DMatrix<f64>,
    classes: usize,
}

impl LabelMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    /// Recovers class ids (argmax of every row).
    pub fn decode(&self) -> Vec<usize> {
        crate::linalg::row_argmax(&self.values)
    }

    pub fn stack(&self, other: &LabelMatrix) -> Result<LabelMatrix> {
        if self.classes != other.classes {
            return Err(EdaError::Shape(format!(
                "class counts differ: {} vs {}",
                self.classes, other.classes
            )));
        }
        Ok(LabelMatrix {
            values: crate::linalg::vstack(&self.values, &other.values),
            classes: self.classes,
        })
    }
}

/// One-hot ±1 encoding of class ids.
pub fn encode_labels(labels: &[usize], classes: usize) -> Result<LabelMatrix> {
    if classes < 2 {
        return Err(EdaError::Parameter(format!(
            "need at least 2 classes, got {classes}"
        )));
    }
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
        return Err(EdaError::InvalidLabel {
            index,
            label: label as i64,
            classes,
        });
    }
    let values = DMatrix::from_fn(labels.len(), classes, |i, j| {
        if labels[i] == j {
            1.0
        } else {
            -1.0
        }
    });
    Ok(LabelMatrix { values, classes })
}

/// Source data, the three target splits and the shared class count.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBundle {
    pub source: Dataset,
    pub target_labeled: Dataset,
    pub target_unlabeled: Dataset,
    pub target_test: Option<Dataset>,
    pub classes: usize,
}

impl DomainBundle {
    pub fn new(
        source: Dataset,
        target_labeled: Dataset,
        target_unlabeled: Dataset,
        target_test: Option<Dataset>,
        classes: usize,
    ) -> Result<Self> {
        let bundle = Self {
            source,
            target_labeled,
            target_unlabeled: target_unlabeled.without_labels(),
            target_test,
            classes,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(EdaError::Parameter("need at least 2 classes".into()));
        }
        if self.source.is_empty() || self.target_labeled.is_empty() {
            return Err(EdaError::Shape(
                "source and labeled target splits must be non-empty".into(),
            ));
        }
        let td = self.target_labeled.dim();
        let mut target_dims = vec![self.target_unlabeled.dim()];
        if let Some(t) = &self.target_test {
            target_dims.push(t.dim());
        }
        if let Some(&bad) = target_dims.iter().find(|&&d| d != td) {
            return Err(EdaError::Dimension {
                expected: td,
                actual: bad,
            });
        }
        let mut labeled = vec![
            ("source", &self.source),
            ("target_labeled", &self.target_labeled),
        ];
        if let Some(t) = &self.target_test {
            labeled.push(("target_test", t));
        }
        for (name, ds) in labeled {
            let labels = ds.require_labels(name)?;
            if let Some((index, &label)) =
                labels.iter().enumerate().find(|(_, &l)| l >= self.classes)
            {
                return Err(EdaError::InvalidLabel {
                    index,
                    label: label as i64,
                    classes: self.classes,
                });
            }
        }
        Ok(())
    }

    pub fn source_labels(&self) -> Result<LabelMatrix> {
        encode_labels(self.source.require_labels("source")?, self.classes)
    }

    pub fn target_labels(&self) -> Result<LabelMatrix> {
        encode_labels(
            self.target_labeled.require_labels("target_labeled")?,
            self.classes,
        )
    }

    /// `target_labeled ∥ target_unlabeled`, the order used by the graph.
    pub fn target_all(&self) -> Result<Dataset> {
        Ok(self
            .target_labeled
            .without_labels()
            .concat(&self.target_unlabeled)?)
    }

    /// `source ∪ target_labeled`, the training set of the pre-classifiers.
    pub fn labeled_union(&self) -> Result<Dataset> {
        if self.source.dim() != self.target_labeled.dim() {
            return Err(EdaError::HeterogeneousDims {
                source_dim: self.source.dim(),
                target_dim: self.target_labeled.dim(),
            });
        }
        self.source.concat(&self.target_labeled)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_three_classes() {
        let t = encode_labels(&[0, 2], 3).unwrap();
        let expected = DMatrix::from_row_slice(2, 3, &[1.0, -1.0, -1.0, -1.0, -1.0, 1.0]);
        assert_eq!(t.values(), &expected);
    }

    #[test]
    fn encode_smallest_case() {
        let t = encode_labels(&[0], 2).unwrap();
        assert_eq!(t.values(), &DMatrix::from_row_slice(1, 2, &[1.0, -1.0]));
    }

    #[test]
    fn encode_repeated_class() {
        let t = encode_labels(&[1, 1, 1], 2).unwrap();
        for row in t.values().row_iter() {
            assert_eq!(row.iter().copied().collect::<Vec<_>>(), vec![-1.0, 1.0]);
        }
    }

    #[test]
    fn encode_rejects_out_of_range() {
        match encode_labels(&[0, 1, 5], 3) {
            Err(EdaError::InvalidLabel { index, label, .. }) => {
                assert_eq!(index, 2);
                assert_eq!(label, 5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dataset_rejects_non_finite() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, f64::NAN]);
        assert!(Dataset::unlabeled(m).is_err());
    }

    #[test]
    fn bundle_rejects_mismatched_target_dims() {
        let src = Dataset::from_rows(&[vec![0.0, 1.0]], Some(vec![0])).unwrap();
        let tl = Dataset::from_rows(&[vec![0.0, 1.0]], Some(vec![1])).unwrap();
        let tu = Dataset::from_rows(&[vec![0.0, 1.0, 2.0]], None).unwrap();
        assert!(matches!(
            DomainBundle::new(src, tl, tu, None, 2),
            Err(EdaError::Dimension { .. })
        ));
    }

    #[test]
    fn unlabeled_split_is_stripped_of_labels() {
        let src = Dataset::from_rows(&[vec![0.0]], Some(vec![0])).unwrap();
        let tl = Dataset::from_rows(&[vec![1.0]], Some(vec![1])).unwrap();
        let tu = Dataset::from_rows(&[vec![2.0]], Some(vec![1])).unwrap();
        let b = DomainBundle::new(src, tl, tu, None, 2).unwrap();
        assert!(b.target_unlabeled.labels().is_none());
    }
}
