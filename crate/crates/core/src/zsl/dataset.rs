use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Feature rows with one global class label each.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledFeatures<T> {
    pub features: Matrix<T>,
    pub labels: Vec<usize>,
}

impl<T: Scalar> LabeledFeatures<T> {
    pub fn new(features: Matrix<T>, labels: Vec<usize>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::dim(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        Ok(Self { features, labels })
    }

    pub fn empty(d: usize) -> Self {
        Self {
            features: Matrix::zeros(0, d),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Rows whose label is in `classes`, in original order.
    pub fn filter_classes(&self, classes: &[usize]) -> Self {
        let keep: BTreeSet<usize> = classes.iter().copied().collect();
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep.contains(&self.labels[i])).collect();
        self.select(&idx)
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(Self {
            features: self.features.vstack(&other.features)?,
            labels,
        })
    }
}

/// All classes with their attributes and a fixed train/test split of the
/// examples of every class.
#[derive(Clone, Debug, PartialEq)]
pub struct Pool<T> {
    /// `K × d_a`, row `c` describes class `c`.
    pub attributes: Matrix<T>,
    pub train: LabeledFeatures<T>,
    pub test: LabeledFeatures<T>,
}

impl<T: Scalar> Pool<T> {
    pub fn new(attributes: Matrix<T>, train: LabeledFeatures<T>, test: LabeledFeatures<T>) -> Result<Self> {
        let k = attributes.rows();
        if train.dim() != test.dim() {
            return Err(Error::dim(format!(
                "train features have {} dims, test features {}",
                train.dim(),
                test.dim()
            )));
        }
        for &label in train.labels.iter().chain(&test.labels) {
            if label >= k {
                return Err(Error::Label { label, classes: k });
            }
        }
        Ok(Self { attributes, train, test })
    }

    pub fn n_classes(&self) -> usize {
        self.attributes.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.train.dim()
    }

    /// Dataset with `seen` as seen classes and every other class unseen.
    pub fn split(&self, seen: &[usize]) -> Result<ZslDataset<T>> {
        let seen_set: BTreeSet<usize> = seen.iter().copied().collect();
        let unseen: Vec<usize> = (0..self.n_classes()).filter(|c| !seen_set.contains(c)).collect();
        self.split_with(seen, &unseen)
    }

    /// Dataset restricted to the class universe `seen ∪ unseen`.
    pub fn split_with(&self, seen: &[usize], unseen: &[usize]) -> Result<ZslDataset<T>> {
        ZslDataset::new(
            self.attributes.clone(),
            seen.to_vec(),
            unseen.to_vec(),
            self.train.filter_classes(seen),
            self.test.filter_classes(seen),
            self.test.filter_classes(unseen),
        )
    }
}

/// Seen/unseen bookkeeping over a shared attribute matrix. The prediction
/// space of generalized evaluation is `seen_classes ∪ unseen_classes`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZslDataset<T> {
    pub attributes: Matrix<T>,
    pub seen_classes: Vec<usize>,
    pub unseen_classes: Vec<usize>,
    pub train: LabeledFeatures<T>,
    pub test_seen: LabeledFeatures<T>,
    pub test_unseen: LabeledFeatures<T>,
}

impl<T: Scalar> ZslDataset<T> {
    pub fn new(
        attributes: Matrix<T>,
        seen_classes: Vec<usize>,
        unseen_classes: Vec<usize>,
        train: LabeledFeatures<T>,
        test_seen: LabeledFeatures<T>,
        test_unseen: LabeledFeatures<T>,
    ) -> Result<Self> {
        let ds = Self {
            attributes,
            seen_classes,
            unseen_classes,
            train,
            test_seen,
            test_unseen,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.attributes.rows();
        let seen: BTreeSet<usize> = self.seen_classes.iter().copied().collect();
        let unseen: BTreeSet<usize> = self.unseen_classes.iter().copied().collect();
        if seen.len() != self.seen_classes.len() || unseen.len() != self.unseen_classes.len() {
            return Err(Error::data("duplicate class id in the seen or unseen list"));
        }
        if let Some(c) = seen.intersection(&unseen).next() {
            return Err(Error::data(format!("class {c} is both seen and unseen")));
        }
        if let Some(&c) = seen.iter().chain(&unseen).find(|&&c| c >= k) {
            return Err(Error::data(format!("class {c} has no attribute row ({k} rows)")));
        }
        let d = self.train.dim();
        for (name, part, allowed) in [
            ("train", &self.train, &seen),
            ("seen test", &self.test_seen, &seen),
            ("unseen test", &self.test_unseen, &unseen),
        ] {
            if part.dim() != d {
                return Err(Error::dim(format!("{name} features have {} dims, expected {d}", part.dim())));
            }
            if let Some(&l) = part.labels.iter().find(|l| !allowed.contains(l)) {
                return Err(Error::data(format!("{name} split contains label {l} outside its class set")));
            }
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.train.dim()
    }

    pub fn attribute_dim(&self) -> usize {
        self.attributes.cols()
    }

    /// Prediction space in column order: seen classes, then unseen.
    pub fn eval_classes(&self) -> Vec<usize> {
        self.seen_classes.iter().chain(&self.unseen_classes).copied().collect()
    }
}

/// Where each class of a dataset went.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seen: Vec<usize>,
    pub unseen: Vec<usize>,
}

/// Maps global ids to column positions in `classes`.
pub(crate) fn local_labels(labels: &[usize], classes: &[usize]) -> Result<Vec<usize>> {
    let max = classes.iter().copied().max().map_or(0, |m| m + 1);
    let mut map = vec![usize::MAX; max];
    for (i, &c) in classes.iter().enumerate() {
        map[c] = i;
    }
    labels
        .iter()
        .map(|&l| match map.get(l) {
            Some(&i) if i != usize::MAX => Ok(i),
            _ => Err(Error::Label {
                label: l,
                classes: classes.len(),
            }),
        })
        .collect()
}
