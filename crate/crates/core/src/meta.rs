//! MAML inner/outer loops and the X-MAML pipeline.
//!
//! The inner loop is plain gradient descent, `theta' = theta - alpha * grad L_support(theta)`,
//! iterated `inner_steps` times. The meta-gradient differentiates the query
//! loss at `theta'` with respect to `theta`: with [`MetaOrder::Full`] the inner
//! steps are recorded on the tape and differentiated through (the Hessian
//! terms included), with [`MetaOrder::First`] the adapted parameters are
//! treated as fresh leaves. Per-episode meta-gradients are summed, and one
//! outer optimizer step is taken per meta-iteration.

use rayon::prelude::*;

use crate::autodiff::{self, collect, leaves, LossFn};
use crate::corpus::{subsample_fraction, Corpus};
use crate::episode::{sample_episode, Episode, LanguagePlan, SinusoidTask};
use crate::error::{Error, Result};
use crate::model::{task_loss_on_tape, Model, ModelSpec};
use crate::optim::{Adam, AdamParams};
use crate::params::ParamVector;
use crate::seed;
use crate::tape::{Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MetaOrder {
    #[default]
    Full,
    First,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OuterOptimizer {
    Sgd,
    #[default]
    Adam,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetaConfig {
    /// Inner-loop step size.
    pub alpha: f64,
    /// Outer learning rate.
    pub beta: f64,
    pub inner_steps: usize,
    pub meta_iterations: usize,
    /// Episodes drawn from each auxiliary group per iteration.
    pub tasks_per_meta_batch: usize,
    pub k_support: usize,
    pub q_query: usize,
    pub order: MetaOrder,
    pub outer_optimizer: OuterOptimizer,
    pub adam: AdamParams,
    pub seed: u64,
    pub num_runs: usize,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig {
            alpha: 1e-4,
            beta: 1e-5,
            inner_steps: 1,
            meta_iterations: 100,
            tasks_per_meta_batch: 4,
            k_support: 16,
            q_query: 16,
            order: MetaOrder::Full,
            outer_optimizer: OuterOptimizer::Adam,
            adam: AdamParams::default(),
            seed: 0,
            num_runs: 10,
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::Argument(format!("alpha must be positive, got {}", self.alpha)));
        }
        // beta = 0 is accepted: it freezes theta, which the equivalence tests rely on.
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::Argument(format!("beta must be non-negative, got {}", self.beta)));
        }
        if self.inner_steps == 0 || self.k_support == 0 || self.q_query == 0 {
            return Err(Error::Argument("inner_steps, K and Q must be at least 1".into()));
        }
        if self.tasks_per_meta_batch == 0 || self.num_runs == 0 {
            return Err(Error::Argument("tasks_per_meta_batch and num_runs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Supervised training on the source language.
#[derive(Clone, Debug, PartialEq)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            epochs: 10,
            batch_size: 32,
            lr: 1e-3,
            train_fraction: 1.0,
            seed: 0,
        }
    }
}

/// Mini-batch Adam on the task loss over shuffled records of `corpus`.
pub fn train_supervised(
    model: &Model,
    corpus: &Corpus,
    epochs: usize,
    batch_size: usize,
    lr: f64,
    seed: u64,
) -> Result<Model> {
    if batch_size == 0 {
        return Err(Error::Argument("batch_size must be at least 1".into()));
    }
    if epochs == 0 {
        return Ok(model.clone());
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut adam = Adam::new(lr, AdamParams::default());
    let mut theta = model.params.clone();
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    for epoch in 0..epochs {
        let mut rng = seed::rng_from(seed, "shuffle", &[epoch as u64]);
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        for chunk in order.chunks(batch_size) {
            let batch = corpus.batch(chunk);
            let g = autodiff::grad(|t: &mut Tape, p: &[Var]| task_loss_on_tape(t, &model.spec, p, &batch), &theta)?;
            theta = adam.step(&theta, &g)?;
        }
    }
    model.with_params(theta)
}

#[derive(Clone, Debug)]
pub struct Pretrained {
    pub model: Model,
    /// Records actually trained on after fraction subsampling.
    pub train_size: usize,
}

/// Trains `model` on the `source` group of `corpus`.
pub fn pretrain(model: &Model, corpus: &Corpus, source: &str, cfg: &PretrainConfig) -> Result<Pretrained> {
    let pool = corpus.restrict(source).map_err(|e| match e {
        Error::UnknownGroup(_) => Error::EmptyCorpus,
        other => other,
    })?;
    let train = subsample_fraction(&pool, cfg.train_fraction, seed::derive_seed(cfg.seed, "fraction", &[]))?;
    let model = train_supervised(
        model,
        &train,
        cfg.epochs,
        cfg.batch_size,
        cfg.lr,
        seed::derive_seed(cfg.seed, "pretrain", &[]),
    )?;
    Ok(Pretrained {
        model,
        train_size: train.len(),
    })
}

fn check_step(alpha: f64, steps: usize) -> Result<()> {
    if !(alpha > 0.0) || steps == 0 {
        return Err(Error::Argument(format!(
            "inner adaptation needs alpha > 0 and steps >= 1, got alpha={alpha}, steps={steps}"
        )));
    }
    Ok(())
}

/// `steps` plain gradient-descent steps of size `alpha`.
pub fn inner_adapt(theta: &ParamVector, loss_fn: impl LossFn, alpha: f64, steps: usize) -> Result<ParamVector> {
    check_step(alpha, steps)?;
    let mut current = theta.clone();
    for _ in 0..steps {
        let g = autodiff::grad(&loss_fn, &current)?;
        current = current.axpy(-alpha, &g)?;
    }
    Ok(current)
}

/// Differentiable inner adaptation: the returned vars depend on `params`
/// through every recorded gradient step.
pub fn inner_adapt_on_tape(
    tape: &mut Tape,
    params: &[Var],
    loss_fn: impl LossFn,
    alpha: f64,
    steps: usize,
) -> Result<Vec<Var>> {
    check_step(alpha, steps)?;
    let mut current = params.to_vec();
    for _ in 0..steps {
        let loss = loss_fn(tape, &current)?;
        let grads = tape.grad(loss, &current);
        current = current
            .iter()
            .zip(grads)
            .map(|(&p, g)| {
                let step = tape.scale(g, alpha);
                tape.sub(p, step)
            })
            .collect();
    }
    Ok(current)
}

/// Meta-gradient of `query(adapt(theta, support))` with respect to `theta`,
/// and the query loss at the adapted parameters.
pub fn meta_gradient_with(
    theta: &ParamVector,
    support: impl LossFn,
    query: impl LossFn,
    alpha: f64,
    steps: usize,
    order: MetaOrder,
) -> Result<(ParamVector, f64)> {
    let mut tape = Tape::new();
    let (wrt, adapted) = match order {
        MetaOrder::Full => {
            let vars = leaves(&mut tape, theta);
            let adapted = inner_adapt_on_tape(&mut tape, &vars, &support, alpha, steps)?;
            (vars, adapted)
        }
        MetaOrder::First => {
            let adapted = inner_adapt(theta, &support, alpha, steps)?;
            let vars = leaves(&mut tape, &adapted);
            (vars.clone(), vars)
        }
    };
    let loss = query(&mut tape, &adapted)?;
    let value = tape.value(loss).item();
    if !value.is_finite() {
        return Err(Error::NonFinite {
            segment: "query loss".into(),
        });
    }
    let grads = tape.grad(loss, &wrt);
    let g = collect(&tape, theta, &grads)?;
    g.ensure_finite()?;
    Ok((g, value))
}

/// Meta-gradient for one episode of a model's task loss.
pub fn meta_gradient(
    spec: &ModelSpec,
    theta: &ParamVector,
    episode: &Episode,
    cfg: &MetaConfig,
) -> Result<(ParamVector, f64)> {
    let support = |t: &mut Tape, p: &[Var]| task_loss_on_tape(t, spec, p, &episode.support);
    let query = |t: &mut Tape, p: &[Var]| task_loss_on_tape(t, spec, p, &episode.query);
    meta_gradient_with(
        theta,
        support,
        query,
        cfg.alpha,
        cfg.inner_steps,
        cfg.order,
    )
}

/// Meta-parameters across outer updates.
#[derive(Clone, Debug)]
pub struct MetaState {
    pub theta: ParamVector,
    /// Number of meta-updates applied so far.
    pub iteration: usize,
    /// `(iteration, summed query loss)` per update.
    pub loss_history: Vec<(usize, f64)>,
    adam: Option<Adam>,
}

impl MetaState {
    pub fn new(theta: ParamVector) -> Self {
        MetaState {
            theta,
            iteration: 0,
            loss_history: Vec::new(),
            adam: None,
        }
    }
}

/// One outer step on the summed meta-gradients of `episodes`.
pub fn meta_update(state: MetaState, spec: &ModelSpec, episodes: &[Episode], cfg: &MetaConfig) -> Result<MetaState> {
    if episodes.is_empty() {
        return Err(Error::EmptyInput);
    }
    let per_episode: Vec<(ParamVector, f64)> = episodes
        .par_iter()
        .map(|ep| meta_gradient(spec, &state.theta, ep, cfg))
        .collect::<Result<_>>()?;

    let mut total = state.theta.zeros_like();
    let mut query_loss = 0.0;
    for (g, l) in &per_episode {
        total = total.add(g)?;
        query_loss += l;
    }

    let MetaState {
        theta,
        iteration,
        mut loss_history,
        adam,
    } = state;
    let (theta, adam) = match cfg.outer_optimizer {
        OuterOptimizer::Sgd => (theta.axpy(-cfg.beta, &total)?, adam),
        OuterOptimizer::Adam => {
            let mut opt = adam.unwrap_or_else(|| Adam::new(cfg.beta, cfg.adam));
            let next = opt.step(&theta, &total)?;
            (next, Some(opt))
        }
    };
    loss_history.push((iteration, query_loss));
    Ok(MetaState {
        theta,
        iteration: iteration + 1,
        loss_history,
        adam,
    })
}

/// Supplies the episodes of one meta-iteration.
pub trait EpisodeSource: Sync {
    fn episodes(&self, iteration: usize, seed: u64) -> Result<Vec<Episode>>;
}

/// Round-robin over auxiliary groups of a development corpus.
pub struct AuxiliarySampler<'a> {
    pub corpus: &'a Corpus,
    pub auxiliary: &'a [String],
    pub tasks_per_group: usize,
    pub k: usize,
    pub q: usize,
}

impl EpisodeSource for AuxiliarySampler<'_> {
    fn episodes(&self, iteration: usize, seed: u64) -> Result<Vec<Episode>> {
        let mut out = Vec::with_capacity(self.auxiliary.len() * self.tasks_per_group);
        for (a, group) in self.auxiliary.iter().enumerate() {
            for task in 0..self.tasks_per_group {
                let mut rng = seed::rng_from(seed, "episode", &[iteration as u64, a as u64, task as u64]);
                out.push(sample_episode(self.corpus, group, self.k, self.q, &mut rng)?);
            }
        }
        Ok(out)
    }
}

/// Fresh sinusoid tasks every iteration.
pub struct SinusoidSampler {
    pub tasks: usize,
    pub k: usize,
    pub q: usize,
}

impl EpisodeSource for SinusoidSampler {
    fn episodes(&self, iteration: usize, seed: u64) -> Result<Vec<Episode>> {
        Ok((0..self.tasks)
            .map(|task| {
                let mut rng = seed::rng_from(seed, "sinusoid", &[iteration as u64, task as u64]);
                SinusoidTask::sample(&mut rng).episode(&mut rng, self.k, self.q)
            })
            .collect())
    }
}

#[derive(Clone, Debug)]
pub struct MetaRun {
    pub model: Model,
    pub state: MetaState,
}

/// Runs `cfg.meta_iterations` meta-updates from `model`'s parameters.
pub fn meta_learn(model: &Model, source: &impl EpisodeSource, cfg: &MetaConfig) -> Result<MetaRun> {
    cfg.validate()?;
    let mut state = MetaState::new(model.params.clone());
    for it in 0..cfg.meta_iterations {
        let episodes = source.episodes(it, cfg.seed)?;
        state = meta_update(state, &model.spec, &episodes, cfg)?;
    }
    Ok(MetaRun {
        model: model.with_params(state.theta.clone())?,
        state,
    })
}

/// Meta-learning on the development sets of the plan's auxiliary languages.
pub fn xmaml_meta_learn(model: &Model, dev: &Corpus, plan: &LanguagePlan, cfg: &MetaConfig) -> Result<MetaRun> {
    cfg.validate()?;
    if plan.auxiliary().is_empty() {
        return Err(Error::Argument("meta-learning needs at least one auxiliary language".into()));
    }
    let needed = cfg.k_support + cfg.q_query;
    for group in plan.auxiliary() {
        let available = dev.group_indices(group)?.len();
        if available < needed {
            return Err(Error::InsufficientData {
                group: group.clone(),
                needed,
                available,
            });
        }
    }
    let sampler = AuxiliarySampler {
        corpus: dev,
        auxiliary: plan.auxiliary(),
        tasks_per_group: cfg.tasks_per_meta_batch,
        k: cfg.k_support,
        q: cfg.q_query,
    };
    meta_learn(model, &sampler, cfg)
}
