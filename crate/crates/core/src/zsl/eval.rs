use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::logits::{apply_seen_scale, SEEN_SCALE_GRID};
use crate::scalar::Scalar;
use crate::zsl::dataset::{local_labels, ZslDataset};
use crate::zsl::train::ZslModel;

/// `2US / (U + S)`, or 0 when both are 0.
pub fn harmonic_mean(u: f64, s: f64) -> f64 {
    if u + s > 0.0 {
        2.0 * u * s / (u + s)
    } else {
        0.0
    }
}

/// Mean over the classes present in `labels` of the fraction of their
/// examples predicted correctly, plus the per-class values.
pub fn mean_class_accuracy(predictions: &[usize], labels: &[usize]) -> Result<(f64, BTreeMap<usize, f64>)> {
    if predictions.len() != labels.len() {
        return Err(Error::dim(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::InsufficientData("accuracy over zero examples".into()));
    }
    let mut counts: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (&p, &l) in predictions.iter().zip(labels) {
        let e = counts.entry(l).or_default();
        e.1 += 1;
        if p == l {
            e.0 += 1;
        }
    }
    let per_class: BTreeMap<usize, f64> = counts
        .into_iter()
        .map(|(c, (hit, n))| (c, hit as f64 / n as f64))
        .collect();
    let mean = per_class.values().sum::<f64>() / per_class.len() as f64;
    Ok((mean, per_class))
}

/// How seen-class logits are adjusted before the argmax.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Calibration {
    /// Multiply seen logits by `s ∈ (0, 1]`.
    Scale(f64),
    /// Subtract a constant from seen logits.
    Bias(f64),
    /// Exclude seen classes from the prediction space.
    SuppressSeen,
}

/// One (U, S, H) evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GzslPoint {
    pub gzsl_u: f64,
    pub gzsl_s: f64,
    pub gzsl_h: f64,
    /// Keyed by global class id.
    pub per_class_accuracy: BTreeMap<usize, f64>,
}

/// Logits of the seen and unseen test sets over a prediction space whose
/// first `n_seen` columns are the seen classes.
#[derive(Clone, Debug)]
pub struct TestLogits<T> {
    pub classes: Vec<usize>,
    pub n_seen: usize,
    pub seen: Matrix<T>,
    pub seen_labels: Vec<usize>,
    pub unseen: Matrix<T>,
    pub unseen_labels: Vec<usize>,
}

fn calibrated_predictions<T: Scalar>(
    logits: &Matrix<T>,
    classes: &[usize],
    n_seen: usize,
    calibration: Calibration,
) -> Result<Vec<usize>> {
    let mask: Vec<bool> = (0..classes.len()).map(|c| c < n_seen).collect();
    let local = match calibration {
        Calibration::Scale(s) => apply_seen_scale(logits, &mask, s)?.argmax_rows(),
        Calibration::Bias(b) => {
            let mut adjusted = logits.clone();
            let b = T::lit(b);
            for i in 0..adjusted.rows() {
                for v in &mut adjusted.row_mut(i)[..n_seen] {
                    *v -= b;
                }
            }
            adjusted.argmax_rows()
        }
        Calibration::SuppressSeen => {
            if n_seen == classes.len() {
                return Err(Error::config("cannot suppress seen classes without unseen classes"));
            }
            logits
                .row_iter()
                .map(|row| {
                    let mut best = n_seen;
                    for j in n_seen..row.len() {
                        if row[j] > row[best] {
                            best = j;
                        }
                    }
                    best
                })
                .collect()
        }
    };
    Ok(local.into_iter().map(|j| classes[j]).collect())
}

impl<T: Scalar> TestLogits<T> {
    pub fn from_model(model: &ZslModel<T>, data: &ZslDataset<T>) -> Result<Self> {
        data.validate()?;
        if data.test_seen.is_empty() || data.test_unseen.is_empty() {
            return Err(Error::data("generalized evaluation needs seen and unseen test examples"));
        }
        let classes = data.eval_classes();
        let w = model.prototypes(&data.attributes, &classes)?;
        let logits = |f: &Matrix<T>| crate::logits::forward_logits(f, &w, &model.logit).map(|(l, _)| l);
        Ok(Self {
            n_seen: data.seen_classes.len(),
            seen: logits(&data.test_seen.features)?,
            seen_labels: data.test_seen.labels.clone(),
            unseen: logits(&data.test_unseen.features)?,
            unseen_labels: data.test_unseen.labels.clone(),
            classes,
        })
    }

    /// Checks shapes and that labels belong to the right half of the space.
    pub fn validate(&self) -> Result<()> {
        let k = self.classes.len();
        if self.n_seen > k || self.seen.cols() != k || self.unseen.cols() != k {
            return Err(Error::dim("logit columns do not match the prediction space"));
        }
        local_labels(&self.seen_labels, &self.classes[..self.n_seen])?;
        local_labels(&self.unseen_labels, &self.classes[self.n_seen..])?;
        Ok(())
    }

    pub fn point(&self, calibration: Calibration) -> Result<GzslPoint> {
        let ps = calibrated_predictions(&self.seen, &self.classes, self.n_seen, calibration)?;
        let pu = calibrated_predictions(&self.unseen, &self.classes, self.n_seen, calibration)?;
        let (s, mut per_class) = mean_class_accuracy(&ps, &self.seen_labels)?;
        let (u, per_unseen) = mean_class_accuracy(&pu, &self.unseen_labels)?;
        per_class.extend(per_unseen);
        Ok(GzslPoint {
            gzsl_u: u,
            gzsl_s: s,
            gzsl_h: harmonic_mean(u, s),
            per_class_accuracy: per_class,
        })
    }

    /// Area under the seen/unseen curve traced by multiplicative seen scales
    /// from `grid`, plus the suppressed-seen and `s = 1` extremes.
    pub fn ausuc(&self, grid: &[f64]) -> Result<f64> {
        check_grid(grid, |s| s > 0.0 && s <= 1.0)?;
        let mut cal: Vec<Calibration> = grid.iter().map(|&s| Calibration::Scale(s)).collect();
        cal.push(Calibration::Scale(1.0));
        self.area(&cal)
    }

    /// Additive counterpart of [`TestLogits::ausuc`]: seen logits are shifted
    /// down by each non-negative bias in `grid`.
    pub fn ausuc_additive(&self, grid: &[f64]) -> Result<f64> {
        check_grid(grid, |b| b >= 0.0 && b.is_finite())?;
        let mut cal: Vec<Calibration> = grid.iter().map(|&b| Calibration::Bias(b)).collect();
        cal.push(Calibration::Bias(0.0));
        self.area(&cal)
    }

    fn area(&self, calibrations: &[Calibration]) -> Result<f64> {
        let mut points = Vec::with_capacity(calibrations.len() + 1);
        for &c in calibrations.iter().chain([Calibration::SuppressSeen].iter()) {
            let p = self.point(c)?;
            points.push((p.gzsl_s, p.gzsl_u));
        }
        Ok(curve_area(&points))
    }
}

fn check_grid(grid: &[f64], valid: impl Fn(f64) -> bool) -> Result<()> {
    if grid.len() < 5 {
        return Err(Error::config(format!("calibration grid needs at least 5 points, got {}", grid.len())));
    }
    if let Some(v) = grid.iter().find(|&&v| !valid(v)) {
        return Err(Error::config(format!("calibration grid value {v} out of range")));
    }
    Ok(())
}

/// Trapezoidal area under `(x, y)` points after sorting by `x` (ties by `y`).
pub fn curve_area(points: &[(f64, f64)]) -> f64 {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub gzsl_u: f64,
    pub gzsl_s: f64,
    pub gzsl_h: f64,
    pub ausuc: f64,
    pub per_class_accuracy: BTreeMap<usize, f64>,
    pub seen_scale_used: f64,
}

/// Generalized evaluation over the prediction space `seen ∪ unseen` with
/// seen logits multiplied by `seen_scale`. AUSUC uses the default grid.
pub fn gzsl_eval<T: Scalar>(model: &ZslModel<T>, data: &ZslDataset<T>, seen_scale: f64) -> Result<EvalReport> {
    let logits = TestLogits::from_model(model, data)?;
    report_from_logits(&logits, seen_scale, &SEEN_SCALE_GRID)
}

pub fn report_from_logits<T: Scalar>(logits: &TestLogits<T>, seen_scale: f64, grid: &[f64]) -> Result<EvalReport> {
    let p = logits.point(Calibration::Scale(seen_scale))?;
    Ok(EvalReport {
        gzsl_u: p.gzsl_u,
        gzsl_s: p.gzsl_s,
        gzsl_h: p.gzsl_h,
        ausuc: logits.ausuc(grid)?,
        per_class_accuracy: p.per_class_accuracy,
        seen_scale_used: seen_scale,
    })
}

pub fn ausuc<T: Scalar>(model: &ZslModel<T>, data: &ZslDataset<T>, grid: &[f64]) -> Result<f64> {
    TestLogits::from_model(model, data)?.ausuc(grid)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub seen_scale: f64,
    pub gzsl_u: f64,
    pub gzsl_s: f64,
    pub gzsl_h: f64,
}

/// GZSL metrics at each seen scale in `grid`.
pub fn sweep_seen_scale<T: Scalar>(model: &ZslModel<T>, data: &ZslDataset<T>, grid: &[f64]) -> Result<Vec<SweepRow>> {
    let logits = TestLogits::from_model(model, data)?;
    grid.iter()
        .map(|&s| {
            let p = logits.point(Calibration::Scale(s))?;
            Ok(SweepRow {
                seen_scale: s,
                gzsl_u: p.gzsl_u,
                gzsl_s: p.gzsl_s,
                gzsl_h: p.gzsl_h,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(seen: Vec<Vec<f64>>, seen_labels: Vec<usize>, unseen: Vec<Vec<f64>>, unseen_labels: Vec<usize>) -> TestLogits<f64> {
        TestLogits {
            classes: vec![0, 1, 2, 3],
            n_seen: 2,
            seen: Matrix::from_rows(&seen).unwrap(),
            seen_labels,
            unseen: Matrix::from_rows(&unseen).unwrap(),
            unseen_labels,
        }
    }

    #[test]
    fn harmonic_mean_values() {
        assert!((harmonic_mean(0.4, 0.6) - 0.48).abs() < 1e-12);
        assert_eq!(harmonic_mean(0.0, 0.0), 0.0);
    }

    #[test]
    fn per_class_mean_ignores_class_sizes() {
        let (m, per) = mean_class_accuracy(&[0, 0, 0, 1], &[0, 0, 0, 1]).unwrap();
        assert_eq!(m, 1.0);
        assert_eq!(per.len(), 2);
        let (m, _) = mean_class_accuracy(&[0, 0, 0, 0], &[0, 0, 0, 1]).unwrap();
        assert_eq!(m, 0.5);
    }

    #[test]
    fn two_seen_two_unseen_by_hand() {
        // Seen test: class 0 right, class 0 wrong (→2), class 1 right.
        // Unseen test: class 2 right, class 3 wrong (→1).
        let t = toy(
            vec![vec![3.0, 1.0, 0.0, 0.0], vec![1.0, 0.0, 2.0, 0.0], vec![0.0, 2.0, 1.0, 1.5]],
            vec![0, 0, 1],
            vec![vec![0.0, 0.0, 1.0, 0.5], vec![0.0, 2.0, 0.0, 1.9]],
            vec![2, 3],
        );
        let p = t.point(Calibration::Scale(1.0)).unwrap();
        assert!((p.gzsl_s - 0.75).abs() < 1e-12);
        assert!((p.gzsl_u - 0.5).abs() < 1e-12);
        assert!((p.gzsl_h - 0.6).abs() < 1e-12);
        // At s = 0.9 the last unseen row flips to class 3 (1.8 < 1.9).
        let p = t.point(Calibration::Scale(0.9)).unwrap();
        assert!((p.gzsl_u - 1.0).abs() < 1e-12);
        assert!((p.gzsl_s - 0.75).abs() < 1e-12);
    }

    #[test]
    fn curve_area_examples() {
        assert!((curve_area(&[(0.0, 1.0), (0.5, 0.5), (1.0, 0.0)]) - 0.5).abs() < 1e-12);
        assert!((curve_area(&[(1.0, 0.0), (0.0, 1.0), (0.5, 0.5)]) - 0.5).abs() < 1e-12);
        assert_eq!(curve_area(&[(0.0, 1.0), (0.0, 0.3)]), 0.0);
    }

    #[test]
    fn perfect_and_constant_models() {
        let perfect = toy(
            vec![vec![5.0, 0.0, 0.0, 0.0], vec![0.0, 5.0, 0.0, 0.0]],
            vec![0, 1],
            vec![vec![0.0, 0.0, 5.0, 0.0], vec![0.0, 0.0, 0.0, 5.0]],
            vec![2, 3],
        );
        assert_eq!(perfect.ausuc(&SEEN_SCALE_GRID).unwrap(), 1.0);
        let constant = toy(
            vec![vec![0.0, 0.0, 1.0, 0.0]; 2],
            vec![0, 1],
            vec![vec![0.0, 0.0, 1.0, 0.0]; 2],
            vec![2, 3],
        );
        assert_eq!(constant.ausuc(&SEEN_SCALE_GRID).unwrap(), 0.0);
        assert!(matches!(perfect.ausuc(&[1.0, 0.9]), Err(Error::Config(_))));
    }

    fn lattice(vals: &[f64]) -> Vec<Vec<f64>> {
        let mut rows = Vec::new();
        for &a in vals {
            for &b in vals {
                for &c in vals {
                    for &d in vals {
                        rows.push(vec![a, b, c, d]);
                    }
                }
            }
        }
        rows
    }

    #[test]
    fn smaller_seen_scale_is_monotone_for_nonnegative_logits() {
        let rows = lattice(&[0.0, 0.25, 0.5, 1.0]);
        for (ls, lu) in [(0, 2), (1, 3), (0, 3)] {
            for row in &rows {
                let t = toy(vec![row.clone()], vec![ls], vec![row.clone()], vec![lu]);
                let base = t.point(Calibration::Scale(1.0)).unwrap();
                for s in [0.95, 0.8, 0.5, 0.1] {
                    let p = t.point(Calibration::Scale(s)).unwrap();
                    assert!(p.gzsl_s <= base.gzsl_s && p.gzsl_u >= base.gzsl_u, "{row:?} s={s}");
                }
            }
        }
    }

    #[test]
    fn negative_seen_logits_move_the_other_way() {
        let row = vec![-1.0, -2.0, -0.95, -3.0];
        let t = toy(vec![row.clone()], vec![0], vec![row], vec![2]);
        let base = t.point(Calibration::Scale(1.0)).unwrap();
        let p = t.point(Calibration::Scale(0.9)).unwrap();
        assert!(base.gzsl_u == 1.0 && p.gzsl_u == 0.0);
        assert!(base.gzsl_s == 0.0 && p.gzsl_s == 1.0);
    }

    #[test]
    fn duplicating_a_class_leaves_metrics_unchanged() {
        let seen = vec![vec![3.0, 1.0, 0.0, 0.0], vec![1.0, 0.0, 2.0, 0.0], vec![0.0, 2.0, 1.0, 1.5]];
        let unseen = vec![vec![0.0, 0.0, 1.0, 0.5], vec![0.0, 2.0, 0.0, 1.9]];
        let t = toy(seen.clone(), vec![0, 0, 1], unseen.clone(), vec![2, 3]);
        let mut seen2 = seen.clone();
        seen2.extend(seen[..2].iter().cloned());
        let t2 = toy(seen2, vec![0, 0, 1, 0, 0], unseen, vec![2, 3]);
        let a = t.point(Calibration::Scale(1.0)).unwrap();
        let b = t2.point(Calibration::Scale(1.0)).unwrap();
        assert_eq!(a, b);
    }
}
