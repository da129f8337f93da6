use std::fmt::Write as _;

use rayon::prelude::*;

use super::{evaluate, few_shot_eval, DeltaMatrix, EvalMode, EvalResult, FineTuneConfig, Metric};
use crate::corpus::Corpus;
use crate::episode::LanguagePlan;
use crate::error::{Error, Result};
use crate::meta::{pretrain, xmaml_meta_learn, MetaConfig, PretrainConfig};
use crate::model::{init_model, Model, ModelSpec};
use crate::seed::{derive_seed, fnv1a};

/// Train, development and test splits of one multilingual corpus.
#[derive(Clone, Debug)]
pub struct ExperimentData {
    pub train: Corpus,
    pub dev: Corpus,
    pub test: Corpus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSetup {
    pub model: ModelSpec,
    pub pretrain: PretrainConfig,
    pub meta: MetaConfig,
    pub finetune: FineTuneConfig,
    pub mode: EvalMode,
    pub metric: Metric,
}

/// Winning auxiliary pair for one target.
#[derive(Clone, Debug, PartialEq)]
pub struct BestPair {
    pub target: String,
    pub pair: (String, String),
    pub score: f64,
    pub baseline: f64,
}

impl BestPair {
    pub fn to_csv(pairs: &[BestPair]) -> String {
        let mut out = String::from("target,aux1,aux2,score,baseline\n");
        for p in pairs {
            writeln!(out, "{},{},{},{:?},{:?}", p.target, p.pair.0, p.pair.1, p.score, p.baseline).unwrap();
        }
        out
    }
}

/// Initializes and pretrains the model on the plan's source language.
pub fn pretrain_for_sweep(data: &ExperimentData, plan: &LanguagePlan, setup: &SweepSetup) -> Result<Model> {
    let init = init_model(&setup.model, setup.pretrain.seed)?;
    Ok(pretrain(&init, &data.train, &plan.source, &setup.pretrain)?.model)
}

/// Meta-learning seed of one run; depends on the auxiliary set and run index only.
pub fn run_seed(meta_seed: u64, auxiliary: &[String], run: usize) -> u64 {
    let key = fnv1a(auxiliary.join("\u{1f}").as_bytes());
    derive_seed(meta_seed, "run", &[key, run as u64])
}

/// Meta-learns from `pretrained` for one run; the seed depends on the auxiliary set and run only.
pub fn meta_learn_for_run(
    pretrained: &Model,
    data: &ExperimentData,
    plan: &LanguagePlan,
    meta: &MetaConfig,
    run: usize,
) -> Result<Model> {
    let cfg = MetaConfig {
        seed: run_seed(meta.seed, plan.auxiliary(), run),
        ..meta.clone()
    };
    Ok(xmaml_meta_learn(pretrained, &data.dev, plan, &cfg)?.model)
}

/// One run's metric on `target`.
///
/// Few-shot fine-tuning seeds depend on (target, run) only, so baseline and
/// X-MAML runs see the same mini-batch order.
pub fn score_run(model: &Model, dev: &Corpus, test: &Corpus, target: &str, setup: &SweepSetup, run: usize) -> Result<f64> {
    match setup.mode {
        EvalMode::Zero => Ok(evaluate(model, test, target, setup.metric)?.value),
        EvalMode::Few => {
            let ft = FineTuneConfig {
                seed: derive_seed(setup.finetune.seed, "finetune", &[fnv1a(target.as_bytes()), run as u64]),
                ..setup.finetune.clone()
            };
            Ok(few_shot_eval(model, dev, test, target, &ft, setup.metric)?.value)
        }
    }
}

fn baseline(pretrained: &Model, data: &ExperimentData, targets: &[String], setup: &SweepSetup) -> Result<Vec<EvalResult>> {
    let runs = setup.meta.num_runs;
    targets
        .par_iter()
        .map(|t| {
            let values = match setup.mode {
                EvalMode::Zero => vec![score_run(pretrained, &data.dev, &data.test, t, setup, 0)?; runs],
                EvalMode::Few => (0..runs)
                    .map(|r| score_run(pretrained, &data.dev, &data.test, t, setup, r))
                    .collect::<Result<Vec<_>>>()?,
            };
            EvalResult::from_runs(t.as_str(), setup.metric, values)
        })
        .collect()
}

/// Mean score over runs on every target outside `aux`, for each auxiliary set.
fn run_aux_sets(
    pretrained: &Model,
    data: &ExperimentData,
    plan: &LanguagePlan,
    aux_sets: &[Vec<String>],
    setup: &SweepSetup,
) -> Result<Vec<Vec<(String, f64)>>> {
    let runs = setup.meta.num_runs;
    let cells: Vec<(usize, usize)> = (0..aux_sets.len()).flat_map(|a| (0..runs).map(move |r| (a, r))).collect();
    let per_cell: Vec<Vec<(String, f64)>> = cells
        .par_iter()
        .map(|&(a, r)| {
            let p = plan.with_auxiliary(aux_sets[a].clone())?;
            let model = meta_learn_for_run(pretrained, data, &p, &setup.meta, r)?;
            p.targets()
                .into_iter()
                .map(|t| score_run(&model, &data.dev, &data.test, &t, setup, r).map(|s| (t, s)))
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_cell
        .chunks(runs)
        .map(|chunk| {
            let mut mean: Vec<(String, f64)> = chunk[0].iter().map(|(t, _)| (t.clone(), 0.0)).collect();
            for run in chunk {
                for (m, (_, s)) in mean.iter_mut().zip(run) {
                    m.1 += s;
                }
            }
            for m in &mut mean {
                m.1 /= runs as f64;
            }
            mean
        })
        .collect())
}

fn check_pool(data: &ExperimentData, plan: &LanguagePlan, setup: &SweepSetup, min: usize) -> Result<()> {
    setup.meta.validate()?;
    if plan.pool.len() < min {
        return Err(Error::Argument(format!(
            "sweep needs at least {min} groups in the pool, got {}",
            plan.pool.len()
        )));
    }
    for g in &plan.pool {
        if !data.test.has_group(g) {
            return Err(Error::EmptyGroup(g.clone()));
        }
    }
    Ok(())
}

/// Meta-learns once per single auxiliary and run; rows and columns follow the pool order.
///
/// `plan`'s own auxiliary set is ignored. When `pretrained` is `None` the
/// model is pretrained here.
pub fn sweep_single_aux(
    data: &ExperimentData,
    plan: &LanguagePlan,
    setup: &SweepSetup,
    pretrained: Option<&Model>,
) -> Result<DeltaMatrix> {
    check_pool(data, plan, setup, 2)?;
    let owned;
    let pretrained = match pretrained {
        Some(m) => m,
        None => {
            owned = pretrain_for_sweep(data, plan, setup)?;
            &owned
        }
    };
    let pool = plan.pool.clone();
    let base = baseline(pretrained, data, &pool, setup)?;
    let aux_sets: Vec<Vec<String>> = pool.iter().map(|a| vec![a.clone()]).collect();
    let scores = run_aux_sets(pretrained, data, plan, &aux_sets, setup)?;
    let deltas = pool
        .iter()
        .zip(&base)
        .map(|(t, b)| {
            scores
                .iter()
                .map(|col| col.iter().find(|(g, _)| g == t).map(|(_, s)| s - b.value))
                .collect()
        })
        .collect();
    Ok(DeltaMatrix {
        metric: setup.metric,
        targets: pool.clone(),
        auxiliaries: pool,
        deltas,
        baseline: base,
    })
}

/// Best unordered auxiliary pair per target.
///
/// Each pair is meta-learned once and scored on every target outside it.
/// Ties go to the lexicographically smallest pair.
pub fn sweep_pair_aux(
    data: &ExperimentData,
    plan: &LanguagePlan,
    setup: &SweepSetup,
    pretrained: Option<&Model>,
) -> Result<Vec<BestPair>> {
    check_pool(data, plan, setup, 3)?;
    let owned;
    let pretrained = match pretrained {
        Some(m) => m,
        None => {
            owned = pretrain_for_sweep(data, plan, setup)?;
            &owned
        }
    };
    let mut sorted = plan.pool.clone();
    sorted.sort();
    let mut pairs = Vec::new();
    for i in 0..sorted.len() {
        for j in i + 1..sorted.len() {
            pairs.push(vec![sorted[i].clone(), sorted[j].clone()]);
        }
    }
    let base = baseline(pretrained, data, &plan.pool, setup)?;
    let scores = run_aux_sets(pretrained, data, plan, &pairs, setup)?;
    let better = |a: f64, b: f64| if setup.metric.higher_is_better() { a > b } else { a < b };
    plan.pool
        .iter()
        .zip(&base)
        .map(|(t, b)| {
            // pairs are enumerated in lexicographic order, so strict improvement keeps the smallest on ties
            let mut best: Option<(usize, f64)> = None;
            for (k, col) in scores.iter().enumerate() {
                if let Some(&(_, s)) = col.iter().find(|(g, _)| g == t) {
                    if best.is_none_or(|(_, bs)| better(s, bs)) {
                        best = Some((k, s));
                    }
                }
            }
            let (k, s) = best.ok_or_else(|| Error::EmptyRow(t.clone()))?;
            Ok(BestPair {
                target: t.clone(),
                pair: (pairs[k][0].clone(), pairs[k][1].clone()),
                score: s,
                baseline: b.value,
            })
        })
        .collect()
}
