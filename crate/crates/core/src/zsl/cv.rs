use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::zsl::dataset::ZslDataset;
use crate::zsl::eval::gzsl_eval;
use crate::zsl::train::{train, TrainConfig};

/// Fractions used to carve a validation problem out of the seen classes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoldoutFractions {
    /// Share of seen classes that act as validation-unseen classes.
    pub unseen_classes: f64,
    /// Share of the remaining training examples held out as validation-seen.
    pub seen_examples: f64,
}

impl Default for HoldoutFractions {
    fn default() -> Self {
        Self {
            unseen_classes: 0.1,
            seen_examples: 0.1,
        }
    }
}

/// Validation problem built only from the seen part of `data`.
pub fn validation_split<T: Scalar>(data: &ZslDataset<T>, fractions: HoldoutFractions, seed: u64) -> Result<ZslDataset<T>> {
    for f in [fractions.unseen_classes, fractions.seen_examples] {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::config(format!("holdout fractions must lie in (0, 1), got {f}")));
        }
    }
    let k = data.seen_classes.len();
    let n_val_unseen = ((k as f64 * fractions.unseen_classes).round() as usize).max(1);
    if k < n_val_unseen + 2 {
        return Err(Error::data(format!(
            "{k} seen classes cannot spare {n_val_unseen} validation classes"
        )));
    }
    let mut rng = Rng::seed_from(seed);
    let mut classes = data.seen_classes.clone();
    rng.shuffle(&mut classes);
    let (val_unseen, val_seen) = classes.split_at(n_val_unseen);
    let mut val_unseen = val_unseen.to_vec();
    let mut val_seen = val_seen.to_vec();
    val_unseen.sort_unstable();
    val_seen.sort_unstable();

    let remaining = data.train.filter_classes(&val_seen);
    let mut train_idx = Vec::new();
    let mut hold_idx = Vec::new();
    for &c in &val_seen {
        let mut idx: Vec<usize> = (0..remaining.len()).filter(|&i| remaining.labels[i] == c).collect();
        rng.shuffle(&mut idx);
        if idx.len() < 2 {
            return Err(Error::data(format!("class {c} has fewer than 2 training examples")));
        }
        let n_hold = ((idx.len() as f64 * fractions.seen_examples).round() as usize).clamp(1, idx.len() - 1);
        hold_idx.extend_from_slice(&idx[..n_hold]);
        train_idx.extend_from_slice(&idx[n_hold..]);
    }
    train_idx.sort_unstable();
    hold_idx.sort_unstable();
    ZslDataset::new(
        data.attributes.clone(),
        val_seen,
        val_unseen.clone(),
        remaining.select(&train_idx),
        remaining.select(&hold_idx),
        data.train.filter_classes(&val_unseen),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub index: usize,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best_index: usize,
    pub best: TrainConfig,
    pub table: Vec<CvRow>,
}

/// Index of the highest score; ties go to lower gamma, then lower lr, then
/// earlier position in the grid.
pub fn select_best(grid: &[TrainConfig], scores: &[f64]) -> Result<usize> {
    if grid.is_empty() || grid.len() != scores.len() {
        return Err(Error::config("empty grid or score count mismatch"));
    }
    let mut best = 0;
    for i in 1..grid.len() {
        let better = match scores[i].total_cmp(&scores[best]) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => {
                (grid[i].gamma, grid[i].lr) < (grid[best].gamma, grid[best].lr)
            }
        };
        if better {
            best = i;
        }
    }
    Ok(best)
}

/// Scores every config with `evaluate` on the validation problem and keeps
/// the best one.
pub fn cross_validate_with<T: Scalar>(
    grid: &[TrainConfig],
    data: &ZslDataset<T>,
    fractions: HoldoutFractions,
    seed: u64,
    mut evaluate: impl FnMut(&TrainConfig, &ZslDataset<T>) -> Result<f64>,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::config("cross-validation grid is empty"));
    }
    let val = validation_split(data, fractions, seed)?;
    let scores = grid.iter().map(|cfg| evaluate(cfg, &val)).collect::<Result<Vec<f64>>>()?;
    let best_index = select_best(grid, &scores)?;
    Ok(CvResult {
        best_index,
        best: grid[best_index].clone(),
        table: scores
            .into_iter()
            .enumerate()
            .map(|(index, score)| CvRow { index, score })
            .collect(),
    })
}

/// Cross-validation by validation GZSL-H.
pub fn cross_validate<T: Scalar>(
    grid: &[TrainConfig],
    data: &ZslDataset<T>,
    fractions: HoldoutFractions,
    seed: u64,
) -> Result<CvResult> {
    cross_validate_with(grid, data, fractions, seed, |cfg, val| {
        let (model, _) = train(cfg, val)?;
        Ok(gzsl_eval(&model, val, 1.0)?.gzsl_h)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::zsl::dataset::{LabeledFeatures, Pool};

    fn pool(k: usize, per_class: usize) -> Pool<f64> {
        let mut rng = Rng::seed_from(1);
        let attributes: Matrix<f64> = rng.normal_matrix(k, 4);
        let labels: Vec<usize> = (0..k).flat_map(|c| std::iter::repeat_n(c, per_class)).collect();
        let train = LabeledFeatures::new(rng.normal_matrix(labels.len(), 6), labels.clone()).unwrap();
        let test = LabeledFeatures::new(rng.normal_matrix(labels.len(), 6), labels).unwrap();
        Pool::new(attributes, train, test).unwrap()
    }

    #[test]
    fn single_config_grid() {
        let data = pool(12, 10).split(&(0..10).collect::<Vec<_>>()).unwrap();
        let grid = vec![TrainConfig::default()];
        let r = cross_validate_with(&grid, &data, HoldoutFractions::default(), 0, |_, _| Ok(0.3)).unwrap();
        assert_eq!(r.best_index, 0);
        assert_eq!(r.best, grid[0]);
    }

    #[test]
    fn oracle_config_wins() {
        let data = pool(12, 10).split(&(0..10).collect::<Vec<_>>()).unwrap();
        let grid = vec![
            TrainConfig { lr: 0.1, ..TrainConfig::default() },
            TrainConfig { lr: 0.2, ..TrainConfig::default() },
        ];
        // The second config stands in for a predictor that reads the labels.
        let r = cross_validate_with(&grid, &data, HoldoutFractions::default(), 0, |cfg, _| {
            Ok(if cfg.lr == 0.2 { 1.0 } else { 0.4 })
        })
        .unwrap();
        assert_eq!(r.best_index, 1);
    }

    #[test]
    fn ties_prefer_lower_gamma_then_lr() {
        let base = TrainConfig::default();
        let grid = vec![
            TrainConfig { gamma: 6.0, lr: 0.001, ..base.clone() },
            TrainConfig { gamma: 5.0, lr: 0.01, ..base.clone() },
            TrainConfig { gamma: 5.0, lr: 0.002, ..base.clone() },
            TrainConfig { gamma: 5.0, lr: 0.002, ..base },
        ];
        assert_eq!(select_best(&grid, &[0.5; 4]).unwrap(), 2);
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let data = pool(20, 10).split(&(0..20).collect::<Vec<_>>()).unwrap();
        let a = validation_split(&data, HoldoutFractions::default(), 7).unwrap();
        let b = validation_split(&data, HoldoutFractions::default(), 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.unseen_classes.len(), 2);
        assert_eq!(a.seen_classes.len() + a.unseen_classes.len(), 20);
        assert_eq!(a.train.len() + a.test_seen.len(), 18 * 10);
    }

    #[test]
    fn infeasible_split() {
        let data = pool(3, 10).split(&[0, 1]).unwrap();
        assert!(matches!(
            validation_split(&data, HoldoutFractions::default(), 0),
            Err(Error::Data(_))
        ));
    }
}
