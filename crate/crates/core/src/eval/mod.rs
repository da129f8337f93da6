//! Zero-shot and few-shot evaluation, delta matrices and auxiliary sweeps.

mod matrix;
mod sweep;

use std::fmt;
use std::str::FromStr;

pub use matrix::{
    aggregate_avg_max, aggregate_scores, read_eval_results_csv, write_aggregates_csv, write_eval_results_csv, DeltaMatrix,
    RowAggregate,
};
pub use sweep::{
    meta_learn_for_run, pretrain_for_sweep, run_seed, score_run, sweep_pair_aux, sweep_single_aux, BestPair, ExperimentData,
    SweepSetup,
};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::meta::train_supervised;
use crate::model::{argmax_rows, Model, Targets};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    Accuracy,
    MacroF1,
    Mse,
}

impl Metric {
    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::Mse)
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::MacroF1 => "macro_f1",
            Metric::Mse => "mse",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" => Ok(Metric::Accuracy),
            "macro_f1" => Ok(Metric::MacroF1),
            "mse" => Ok(Metric::Mse),
            other => Err(Error::Argument(format!("unknown metric `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EvalMode {
    #[default]
    Zero,
    Few,
}

impl FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(EvalMode::Zero),
            "few" => Ok(EvalMode::Few),
            other => Err(Error::Argument(format!("unknown mode `{other}` (expected zero|few)"))),
        }
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalMode::Zero => "zero",
            EvalMode::Few => "few",
        })
    }
}

/// Metric of one group, averaged over runs.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub group_id: String,
    pub metric: Metric,
    pub value: f64,
    pub num_runs: usize,
    pub per_run_values: Vec<f64>,
}

impl EvalResult {
    pub fn from_runs(group_id: impl Into<String>, metric: Metric, per_run_values: Vec<f64>) -> Result<Self> {
        if per_run_values.is_empty() {
            return Err(Error::EmptyInput);
        }
        let value = per_run_values.iter().sum::<f64>() / per_run_values.len() as f64;
        Ok(EvalResult {
            group_id: group_id.into(),
            metric,
            value,
            num_runs: per_run_values.len(),
            per_run_values,
        })
    }
}

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::EmptyInput);
    }
    if predictions.len() != labels.len() {
        return Err(Error::Structure(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Unweighted mean of per-class F1.
///
/// Classes absent from both predictions and labels are left out of the mean.
pub fn macro_f1(predictions: &[usize], labels: &[usize], num_classes: usize) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::EmptyInput);
    }
    if predictions.len() != labels.len() {
        return Err(Error::Structure(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fn_ = vec![0usize; num_classes];
    for (&p, &l) in predictions.iter().zip(labels) {
        if p >= num_classes || l >= num_classes {
            return Err(Error::Label {
                row: 0,
                label: p.max(l),
                num_classes,
            });
        }
        if p == l {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[l] += 1;
        }
    }
    let mut sum = 0.0;
    let mut counted = 0;
    for c in 0..num_classes {
        if tp[c] + fp[c] + fn_[c] == 0 {
            continue;
        }
        sum += 2.0 * tp[c] as f64 / (2 * tp[c] + fp[c] + fn_[c]) as f64;
        counted += 1;
    }
    Ok(sum / counted as f64)
}

/// Single-run metric of `model` over every record of `group`.
pub fn evaluate(model: &Model, corpus: &Corpus, group: &str, metric: Metric) -> Result<EvalResult> {
    let idx = corpus.group_indices(group).map_err(|e| match e {
        Error::UnknownGroup(g) => Error::EmptyGroup(g),
        other => other,
    })?;
    let batch = corpus.batch(&idx);
    let out = model.forward(&batch.inputs)?;
    let value = match (&batch.targets, metric) {
        (Targets::Classes(labels), Metric::Accuracy) => accuracy(&argmax_rows(&out), labels)?,
        (Targets::Classes(labels), Metric::MacroF1) => macro_f1(&argmax_rows(&out), labels, model.spec.output_dim)?,
        (Targets::Values(values), Metric::Mse) => {
            let pred: Vec<f64> = (0..out.rows()).map(|i| out.row(i)[0]).collect();
            pred.iter().zip(values).map(|(p, v)| (p - v) * (p - v)).sum::<f64>() / values.len() as f64
        }
        _ => {
            return Err(Error::Argument(format!(
                "metric {metric} does not apply to this corpus kind"
            )))
        }
    };
    EvalResult::from_runs(group, metric, vec![value])
}

/// Supervised fine-tuning used by few-shot evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct FineTuneConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        FineTuneConfig {
            epochs: 3,
            batch_size: 32,
            lr: 1e-3,
            seed: 0,
        }
    }
}

/// Fine-tunes a copy of `model` on `group`'s records in `dev`, then evaluates on `test`.
pub fn few_shot_eval(
    model: &Model,
    dev: &Corpus,
    test: &Corpus,
    group: &str,
    cfg: &FineTuneConfig,
    metric: Metric,
) -> Result<EvalResult> {
    if cfg.epochs == 0 {
        return evaluate(model, test, group, metric);
    }
    let pool = dev.restrict(group).map_err(|e| match e {
        Error::UnknownGroup(g) => Error::EmptyGroup(g),
        other => other,
    })?;
    let tuned = train_supervised(model, &pool, cfg.epochs, cfg.batch_size, cfg.lr, cfg.seed)?;
    evaluate(&tuned, test, group, metric)
}
