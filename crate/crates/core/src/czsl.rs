//! Continual zero-shot learning: task sequences, the sequential and
//! multi-task baselines, and the averaged metrics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::zsl::{gzsl_eval, mean_class_accuracy, LabeledFeatures, Pool, TrainConfig, Trainer, ZslModel};

/// Ordered, pairwise disjoint class groups.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSequence {
    pub tasks: Vec<Vec<usize>>,
}

impl TaskSequence {
    pub fn new(tasks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for t in &tasks {
            if t.is_empty() {
                return Err(Error::config("empty task"));
            }
            for &c in t {
                if !seen.insert(c) {
                    return Err(Error::config(format!("class {c} appears in two tasks")));
                }
            }
        }
        Ok(Self { tasks })
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// Classes of tasks `0..=t`.
    pub fn seen_through(&self, t: usize) -> Vec<usize> {
        self.tasks[..=t].concat()
    }

    /// Classes of tasks after `t`.
    pub fn unseen_after(&self, t: usize) -> Vec<usize> {
        self.tasks[t + 1..].concat()
    }

    pub fn all_classes(&self) -> Vec<usize> {
        self.tasks.concat()
    }

    pub fn prefix(&self, n: usize) -> Self {
        Self {
            tasks: self.tasks[..n.min(self.len())].to_vec(),
        }
    }

    pub fn suffix_from(&self, n: usize) -> Self {
        Self {
            tasks: self.tasks[n.min(self.len())..].to_vec(),
        }
    }
}

/// Task sizes: `K / T` each, with the `K mod T` extra classes going to the
/// last tasks.
pub fn even_task_sizes(n_classes: usize, n_tasks: usize) -> Result<Vec<usize>> {
    if n_tasks == 0 || n_tasks > n_classes {
        return Err(Error::config(format!("cannot split {n_classes} classes into {n_tasks} tasks")));
    }
    let base = n_classes / n_tasks;
    let extra = n_classes % n_tasks;
    Ok((0..n_tasks).map(|t| base + usize::from(t >= n_tasks - extra)).collect())
}

/// Random class-to-task assignment of classes `0..n_classes`.
pub fn split_tasks(n_classes: usize, n_tasks: usize, sizes: Option<&[usize]>, rng: &mut Rng) -> Result<TaskSequence> {
    let sizes = match sizes {
        Some(s) => {
            if s.len() != n_tasks || s.iter().sum::<usize>() != n_classes || s.contains(&0) {
                return Err(Error::config(format!(
                    "task sizes {s:?} do not split {n_classes} classes into {n_tasks} tasks"
                )));
            }
            s.to_vec()
        }
        None => even_task_sizes(n_classes, n_tasks)?,
    };
    let perm = rng.permutation(n_classes);
    let mut tasks = Vec::with_capacity(n_tasks);
    let mut start = 0;
    for s in sizes {
        let mut t = perm[start..start + s].to_vec();
        t.sort_unstable();
        tasks.push(t);
        start += s;
    }
    TaskSequence::new(tasks)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Sequential,
    MultiTask,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Sequential => "sequential",
            Method::MultiTask => "multi_task",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(Method::Sequential),
            "multi_task" | "multitask" => Ok(Method::MultiTask),
            _ => Err(Error::config(format!("unknown CZSL method '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzslConfig {
    /// `epochs` is the number of passes over each task's own data.
    pub train: TrainConfig,
    /// Learning-rate multiplier applied after every task.
    pub lr_decay: f64,
}

impl CzslConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::config(format!("lr_decay must lie in (0, 1], got {}", self.lr_decay)));
        }
        Ok(())
    }
}

/// Evaluation after one task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimestepRecord {
    pub timestep: usize,
    pub gzsl_s: f64,
    /// Absent after the last task.
    pub gzsl_u: Option<f64>,
    pub gzsl_h: Option<f64>,
    pub ausuc: Option<f64>,
    /// Mean per-class accuracy on all test data over all classes.
    pub joint_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    pub records: Vec<TimestepRecord>,
    /// `task_accuracy[t][τ]`: accuracy on task `τ` test data after task `t`, `τ ≤ t`.
    pub task_accuracy: Vec<Vec<f64>>,
}

fn timestep_record<T: Scalar>(
    model: &ZslModel<T>,
    pool: &Pool<T>,
    seq: &TaskSequence,
    t: usize,
) -> Result<(TimestepRecord, Vec<f64>)> {
    let seen = seq.seen_through(t);
    let unseen = seq.unseen_after(t);
    let all = seq.all_classes();
    let test = pool.test.filter_classes(&all);
    if test.is_empty() {
        return Err(Error::data("no test examples for the sequence's classes"));
    }
    let logits = model.logits(&pool.attributes, &all, &test.features)?;
    let preds: Vec<usize> = logits.argmax_rows().into_iter().map(|j| all[j]).collect();
    let (joint, per_class) = mean_class_accuracy(&preds, &test.labels)?;
    let task_acc = seq.tasks[..=t]
        .iter()
        .map(|task| {
            let accs: Vec<f64> = task.iter().filter_map(|c| per_class.get(c).copied()).collect();
            if accs.is_empty() {
                Err(Error::data("a task has no test examples"))
            } else {
                Ok(accs.iter().sum::<f64>() / accs.len() as f64)
            }
        })
        .collect::<Result<Vec<f64>>>()?;

    let record = if unseen.is_empty() {
        let seen_test = pool.test.filter_classes(&seen);
        let l = model.logits(&pool.attributes, &seen, &seen_test.features)?;
        let p: Vec<usize> = l.argmax_rows().into_iter().map(|j| seen[j]).collect();
        TimestepRecord {
            timestep: t + 1,
            gzsl_s: mean_class_accuracy(&p, &seen_test.labels)?.0,
            gzsl_u: None,
            gzsl_h: None,
            ausuc: None,
            joint_accuracy: joint,
        }
    } else {
        let r = gzsl_eval(model, &pool.split_with(&seen, &unseen)?, 1.0)?;
        TimestepRecord {
            timestep: t + 1,
            gzsl_s: r.gzsl_s,
            gzsl_u: Some(r.gzsl_u),
            gzsl_h: Some(r.gzsl_h),
            ausuc: Some(r.ausuc),
            joint_accuracy: joint,
        }
    };
    Ok((record, task_acc))
}

/// Trains through the sequence and evaluates after every task.
///
/// Each task gets `epochs · ceil(|D^t| / batch_size)` steps. Sequential
/// training sees only the current task's data and classes; multi-task
/// training sees everything up to the current task.
pub fn run_sequence<T: Scalar>(method: Method, seq: &TaskSequence, pool: &Pool<T>, cfg: &CzslConfig) -> Result<AccuracyMatrix> {
    cfg.validate()?;
    if seq.is_empty() {
        return Err(Error::config("empty task sequence"));
    }
    let mut trainer = Trainer::new(&cfg.train, pool.attributes.cols(), pool.feature_dim())?;
    let mut records = Vec::with_capacity(seq.len());
    let mut task_accuracy = Vec::with_capacity(seq.len());
    for t in 0..seq.len() {
        let task_data = pool.train.filter_classes(&seq.tasks[t]);
        if task_data.is_empty() {
            return Err(Error::data(format!("task {} has no training examples", t + 1)));
        }
        let budget = cfg.train.epochs * trainer.steps_per_epoch(task_data.len());
        let (classes, data): (Vec<usize>, LabeledFeatures<T>) = match method {
            Method::Sequential => (seq.tasks[t].clone(), task_data),
            Method::MultiTask => {
                let c = seq.seen_through(t);
                let d = pool.train.filter_classes(&c);
                (c, d)
            }
        };
        trainer.run_steps(&pool.attributes, &classes, &data, budget, &mut [])?;
        let (record, acc) = timestep_record(&trainer.model, pool, seq, t)?;
        records.push(record);
        task_accuracy.push(acc);
        let lr = trainer.optimizer.lr() * cfg.lr_decay;
        trainer.optimizer.set_lr(lr);
    }
    Ok(AccuracyMatrix { records, task_accuracy })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzslMetrics {
    pub m_sa: f64,
    pub m_ja: f64,
    /// Defined only for at least two tasks.
    pub m_ua: Option<f64>,
    pub m_h: Option<f64>,
    pub m_auc: Option<f64>,
}

impl CzslMetrics {
    pub fn generalized(&self) -> Result<(f64, f64, f64)> {
        match (self.m_ua, self.m_h, self.m_auc) {
            (Some(u), Some(h), Some(a)) => Ok((u, h, a)),
            _ => Err(Error::InsufficientData(
                "mUA, mH and mAUC need at least two tasks".into(),
            )),
        }
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

pub fn czsl_metrics(acc: &AccuracyMatrix) -> Result<CzslMetrics> {
    let t = acc.records.len();
    if t == 0 {
        return Err(Error::InsufficientData("empty accuracy matrix".into()));
    }
    let head = &acc.records[..t - 1];
    let generalized = |f: fn(&TimestepRecord) -> Option<f64>| -> Result<Option<f64>> {
        if t < 2 {
            return Ok(None);
        }
        let vals = head
            .iter()
            .map(|r| f(r).ok_or_else(|| Error::data(format!("timestep {} lacks unseen metrics", r.timestep))))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Some(mean(vals.into_iter())))
    };
    Ok(CzslMetrics {
        m_sa: mean(acc.records.iter().map(|r| r.gzsl_s)),
        m_ja: mean(acc.records.iter().map(|r| r.joint_accuracy)),
        m_ua: generalized(|r| r.gzsl_u)?,
        m_h: generalized(|r| r.gzsl_h)?,
        m_auc: generalized(|r| r.ausuc)?,
    })
}

/// Average drop from the best earlier accuracy on each task to its final
/// accuracy, over all tasks but the last.
pub fn forgetting(task_accuracy: &[Vec<f64>]) -> Result<f64> {
    let t = task_accuracy.len();
    if t < 2 {
        return Err(Error::InsufficientData("forgetting needs at least two tasks".into()));
    }
    for (i, row) in task_accuracy.iter().enumerate() {
        if row.len() < i + 1 {
            return Err(Error::dim(format!("row {i} has {} entries, expected {}", row.len(), i + 1)));
        }
    }
    let last = &task_accuracy[t - 1];
    let total: f64 = (0..t - 1)
        .map(|tau| {
            let best = (tau..t - 1).map(|s| task_accuracy[s][tau]).fold(f64::NEG_INFINITY, f64::max);
            best - last[tau]
        })
        .sum();
    Ok(total / (t - 1) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzslCvResult {
    pub best_index: usize,
    pub best: CzslConfig,
    /// Validation mH of every grid entry.
    pub scores: Vec<f64>,
    /// Run of the remaining tasks with the winning config from scratch.
    pub result: AccuracyMatrix,
    pub metrics: CzslMetrics,
}

/// Grid search on the first `n_cv_tasks` tasks by mH, then a fresh run of the
/// remaining tasks with the winner.
pub fn czsl_cross_validate<T: Scalar>(
    grid: &[CzslConfig],
    method: Method,
    seq: &TaskSequence,
    pool: &Pool<T>,
    n_cv_tasks: usize,
) -> Result<CzslCvResult> {
    if grid.is_empty() {
        return Err(Error::config("empty CZSL grid"));
    }
    if n_cv_tasks < 2 || seq.len() <= n_cv_tasks {
        return Err(Error::config(format!(
            "need more than {n_cv_tasks} tasks (and at least 2 for validation), got {}",
            seq.len()
        )));
    }
    let cv_seq = seq.prefix(n_cv_tasks);
    let scores = grid
        .iter()
        .map(|cfg| {
            let acc = run_sequence(method, &cv_seq, pool, cfg)?;
            czsl_metrics(&acc)?.generalized().map(|(_, h, _)| h)
        })
        .collect::<Result<Vec<f64>>>()?;
    let train_grid: Vec<TrainConfig> = grid.iter().map(|c| c.train.clone()).collect();
    let best_index = crate::zsl::cv::select_best(&train_grid, &scores)?;
    let best = grid[best_index].clone();
    let rest = seq.suffix_from(n_cv_tasks);
    let result = run_sequence(method, &rest, pool, &best)?;
    let metrics = czsl_metrics(&result)?;
    Ok(CzslCvResult {
        best_index,
        best,
        scores,
        result,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zsl::harmonic_mean;

    fn record(s: f64, u: Option<f64>, auc: Option<f64>, ja: f64) -> TimestepRecord {
        TimestepRecord {
            timestep: 0,
            gzsl_s: s,
            gzsl_u: u,
            gzsl_h: u.map(|u| harmonic_mean(u, s)),
            ausuc: auc,
            joint_accuracy: ja,
        }
    }

    #[test]
    fn task_sizes() {
        assert_eq!(even_task_sizes(200, 10).unwrap(), vec![20; 10]);
        let sun = even_task_sizes(717, 15).unwrap();
        assert_eq!(&sun[..3], &[47, 47, 47]);
        assert!(sun[3..].iter().all(|&s| s == 48));
        assert_eq!(sun.iter().sum::<usize>(), 717);
        assert_eq!(even_task_sizes(5, 1).unwrap(), vec![5]);
        assert!(even_task_sizes(3, 4).is_err());
    }

    #[test]
    fn split_partitions_and_is_deterministic() {
        let a = split_tasks(50, 7, None, &mut Rng::seed_from(3)).unwrap();
        let b = split_tasks(50, 7, None, &mut Rng::seed_from(3)).unwrap();
        assert_eq!(a, b);
        let mut all = a.all_classes();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
        assert!(split_tasks(10, 2, Some(&[3, 3]), &mut Rng::seed_from(0)).is_err());
        assert_eq!(split_tasks(10, 1, None, &mut Rng::seed_from(0)).unwrap().tasks[0].len(), 10);
    }

    #[test]
    fn constant_metrics() {
        let mut records: Vec<_> = (0..4).map(|_| record(0.6, Some(0.4), Some(0.3), 0.5)).collect();
        records.push(record(0.6, None, None, 0.5));
        let m = czsl_metrics(&AccuracyMatrix {
            records,
            task_accuracy: vec![],
        })
        .unwrap();
        assert!((m.m_sa - 0.6).abs() < 1e-12);
        assert!((m.m_ua.unwrap() - 0.4).abs() < 1e-12);
        assert!((m.m_h.unwrap() - 0.48).abs() < 1e-12);
        assert!((m.m_auc.unwrap() - 0.3).abs() < 1e-12);
        assert!((m.m_ja - 0.5).abs() < 1e-12);
    }

    #[test]
    fn hand_built_three_tasks() {
        let acc = AccuracyMatrix {
            records: vec![
                record(0.9, Some(0.1), Some(0.2), 0.3),
                record(0.7, Some(0.3), Some(0.4), 0.5),
                record(0.5, None, None, 0.6),
            ],
            task_accuracy: vec![],
        };
        let m = czsl_metrics(&acc).unwrap();
        assert!((m.m_sa - 0.7).abs() < 1e-12);
        assert!((m.m_ua.unwrap() - 0.2).abs() < 1e-12);
        let h = (2.0 * 0.1 * 0.9 / 1.0 + 2.0 * 0.3 * 0.7 / 1.0) / 2.0;
        assert!((m.m_h.unwrap() - h).abs() < 1e-12);
        assert!((m.m_auc.unwrap() - 0.3).abs() < 1e-12);
        assert!((m.m_ja - (0.3 + 0.5 + 0.6) / 3.0).abs() < 1e-12);

        let single = AccuracyMatrix {
            records: vec![record(0.5, None, None, 0.5)],
            task_accuracy: vec![],
        };
        let m = czsl_metrics(&single).unwrap();
        assert_eq!(m.m_sa, 0.5);
        assert!(m.generalized().is_err());
    }

    #[test]
    fn forgetting_examples() {
        assert_eq!(forgetting(&[vec![0.8], vec![0.8, 0.7]]).unwrap(), 0.0);
        assert!((forgetting(&[vec![0.8], vec![0.5, 0.9]]).unwrap() - 0.3).abs() < 1e-12);
        let base = vec![vec![0.8], vec![0.6, 0.9], vec![0.5, 0.7, 0.4]];
        let f = forgetting(&base).unwrap();
        assert!((f - ((0.8 - 0.5) + (0.9 - 0.7)) / 2.0).abs() < 1e-12);
        assert!(forgetting(&[vec![1.0]]).is_err());
    }
}
