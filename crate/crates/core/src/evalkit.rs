//! Confusion-matrix metrics and k-fold cross-validation.

use std::io::Write;

use log::debug;
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featsel::Thresholds;
use crate::neuralnet::{Architecture, Model, TrainConfig};
use crate::textpipe::StemmedTweet;

/// Re-draws allowed when a shuffle leaves a training split with one class.
pub const MAX_FOLD_RETRIES: usize = 32;

/// Counts with the accident class as positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn precision_accident(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn precision_nonaccident(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fn_)
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// A precision is `None` when nothing was predicted for its class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub confusion: ConfusionCounts,
    pub accuracy: f64,
    pub precision_accident: Option<f64>,
    pub precision_nonaccident: Option<f64>,
}

impl Metrics {
    pub fn from_counts(confusion: ConfusionCounts) -> Result<Self> {
        let accuracy = confusion
            .accuracy()
            .ok_or_else(|| Error::invalid("metrics of an empty prediction set"))?;
        Ok(Metrics {
            confusion,
            accuracy,
            precision_accident: confusion.precision_accident(),
            precision_nonaccident: confusion.precision_nonaccident(),
        })
    }
}

pub fn confusion_counts(truth: &[bool], pred: &[bool]) -> Result<ConfusionCounts> {
    if truth.len() != pred.len() {
        return Err(Error::shape(format!(
            "{} true labels but {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&t, &p) in truth.iter().zip(pred) {
        match (t, p) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

pub fn classification_metrics(truth: &[bool], pred: &[bool]) -> Result<Metrics> {
    Metrics::from_counts(confusion_counts(truth, pred)?)
}

/// Fold index of every example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }
}

/// Seeded shuffle, then round-robin assignment, so fold sizes differ by at
/// most one.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::config(format!("k must be >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::invalid(format!("cannot split {n} examples into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignments = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignments[i] = pos % k;
    }
    Ok(FoldPlan { k, assignments })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub accuracy: f64,
    pub precision_accident: Option<f64>,
    pub precision_nonaccident: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub per_fold: Vec<Metrics>,
    /// Unweighted mean over folds; undefined precisions are left out.
    pub mean: MeanMetrics,
    /// Number of undefined fold precisions left out of the means.
    pub excluded_undefined: usize,
    /// Seed of the fold plan actually used, after any re-draws.
    pub plan_seed: u64,
}

impl CvReport {
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>, excluded: &mut usize) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        match v {
            Some(v) => {
                sum += v;
                n += 1;
            }
            None => *excluded += 1,
        }
    }
    (n > 0).then(|| sum / n as f64)
}

pub fn summarize_folds(per_fold: Vec<Metrics>, plan_seed: u64) -> CvReport {
    let mut excluded = 0;
    let accuracy = per_fold.iter().map(|m| m.accuracy).sum::<f64>() / per_fold.len() as f64;
    let precision_accident = mean_defined(per_fold.iter().map(|m| m.precision_accident), &mut excluded);
    let precision_nonaccident = mean_defined(per_fold.iter().map(|m| m.precision_nonaccident), &mut excluded);
    CvReport {
        per_fold,
        mean: MeanMetrics {
            accuracy,
            precision_accident,
            precision_nonaccident,
        },
        excluded_undefined: excluded,
        plan_seed,
    }
}

fn both_classes(labels: &[bool], idx: &[usize]) -> bool {
    let pos = idx.iter().filter(|&&i| labels[i]).count();
    pos > 0 && pos < idx.len()
}

/// A fold plan whose every training split holds both classes, with the seed
/// that produced it. The first attempt uses `seed`; re-draws take their
/// seeds from a generator seeded with it.
pub fn plan_folds(labels: &[bool], k: usize, seed: u64) -> Result<(FoldPlan, u64)> {
    let mut plan_seed = seed;
    let mut reseed = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 0..=MAX_FOLD_RETRIES {
        let plan = kfold_split(labels.len(), k, plan_seed)?;
        if (0..k).all(|f| both_classes(labels, &plan.train_indices(f))) {
            return Ok((plan, plan_seed));
        }
        debug!("fold plan {attempt} (seed {plan_seed}) has a single-class training split");
        plan_seed = reseed.next_u64();
    }
    Err(Error::invalid(format!(
        "class-degenerate folds: no valid {k}-fold plan after {MAX_FOLD_RETRIES} re-draws"
    )))
}

/// Runs `trainer(train_idx, test_idx)` once per fold. The trainer returns
/// predictions for `test_idx`, in order.
pub fn cross_validate<F>(labels: &[bool], k: usize, seed: u64, mut trainer: F) -> Result<CvReport>
where
    F: FnMut(&[usize], &[usize]) -> Result<Vec<bool>>,
{
    let (plan, plan_seed) = plan_folds(labels, k, seed)?;
    let mut per_fold = Vec::with_capacity(k);
    for f in 0..k {
        let train = plan.train_indices(f);
        let test = plan.test_indices(f);
        let pred = trainer(&train, &test)?;
        let truth: Vec<bool> = test.iter().map(|&i| labels[i]).collect();
        per_fold.push(classification_metrics(&truth, &pred)?);
    }
    Ok(summarize_folds(per_fold, plan_seed))
}

/// Cross-validates the full learner: feature selection and training run on
/// each training split only.
pub fn cross_validate_model(
    tweets: &[StemmedTweet],
    arch: &Architecture,
    thresholds: Thresholds,
    cfg: &TrainConfig,
    k: usize,
    seed: u64,
) -> Result<CvReport> {
    let labels: Vec<bool> = tweets
        .iter()
        .map(|t| {
            t.label
                .map(|l| l.is_accident())
                .ok_or_else(|| Error::invalid(format!("post {} has no label", t.id)))
        })
        .collect::<Result<_>>()?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| tweets[i].clone()).collect::<Vec<_>>();
    cross_validate(&labels, k, seed, |train, test| {
        let model = Model::fit(arch, &pick(train), thresholds, cfg)?;
        model.predict_all(&pick(test))
    })
}
