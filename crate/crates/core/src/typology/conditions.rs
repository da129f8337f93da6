use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::logistic::fit_logistic;
use super::stats::{bonferroni, paired_t_test};
use super::TypologyTable;
use crate::error::{Error, Result};
use crate::eval::{DeltaMatrix, EvalResult, Metric};
use crate::seed::{derive_seed, rng_from, Rng};

const MIN_INSTANCES: usize = 4;

/// What the classifier predicts from the deltas.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Condition {
    /// A language's feature value, from its delta row and column.
    Value,
    /// Whether target and auxiliary share a value, from their delta.
    Match,
}

impl std::str::FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "value" => Ok(Condition::Value),
            "match" => Ok(Condition::Match),
            other => Err(Error::Argument(format!("unknown condition `{other}` (expected value|match)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionConfig {
    pub lr: f64,
    pub epochs: usize,
    /// Sampling trials of the distributional baseline per held-out instance.
    pub trials: usize,
    /// Share of instances kept in each resampled split. Half-size splits vary
    /// enough that the t-test across splits stays calibrated on null features.
    pub subsample: f64,
    /// Resampled splits per feature in a scan.
    pub splits: usize,
}

impl Default for ConditionConfig {
    fn default() -> Self {
        ConditionConfig {
            lr: 0.1,
            epochs: 100,
            trials: 100,
            subsample: 0.5,
            splits: 20,
        }
    }
}

/// Leave-one-out accuracies of the classifier and both baselines on one split.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionOutcome {
    pub instances: usize,
    pub model_accuracy: f64,
    pub most_frequent: f64,
    pub distributional: f64,
}

impl ConditionOutcome {
    pub fn best_baseline(&self) -> f64 {
        self.most_frequent.max(self.distributional)
    }
}

/// Accuracy of always predicting the modal training label; ties go to the smallest label.
pub fn baseline_most_frequent<T: Ord>(labels_train: &[T], labels_test: &[T]) -> Result<f64> {
    if labels_train.is_empty() || labels_test.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut counts: BTreeMap<&T, usize> = BTreeMap::new();
    for l in labels_train {
        *counts.entry(l).or_default() += 1;
    }
    let mut mode = None;
    let mut best = 0;
    for (l, &c) in &counts {
        if c > best {
            best = c;
            mode = Some(*l);
        }
    }
    let mode = mode.expect("non-empty");
    Ok(labels_test.iter().filter(|l| *l == mode).count() as f64 / labels_test.len() as f64)
}

/// Mean accuracy of predictions drawn from the empirical training distribution.
pub fn baseline_distributional<T: PartialEq>(
    labels_train: &[T],
    labels_test: &[T],
    rng: &mut Rng,
    trials: usize,
) -> Result<f64> {
    if labels_train.is_empty() || labels_test.is_empty() || trials == 0 {
        return Err(Error::EmptyInput);
    }
    let mut hits = 0usize;
    for _ in 0..trials {
        for l in labels_test {
            if labels_train[rng.random_range(0..labels_train.len())] == *l {
                hits += 1;
            }
        }
    }
    Ok(hits as f64 / (trials * labels_test.len()) as f64)
}

type Instances = (Vec<Vec<f64>>, Vec<String>);

fn value_instances(table: &TypologyTable, matrix: &DeltaMatrix, feature: &str) -> Instances {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (ti, lang) in matrix.targets.iter().enumerate() {
        let Some(v) = table.get(lang, feature) else { continue };
        let mut x: Vec<f64> = matrix.deltas[ti].iter().map(|d| d.unwrap_or(0.0)).collect();
        match matrix.auxiliaries.iter().position(|a| a == lang) {
            Some(ai) => x.extend(matrix.deltas.iter().map(|row| row[ai].unwrap_or(0.0))),
            None => x.extend(std::iter::repeat_n(0.0, matrix.targets.len())),
        }
        xs.push(x);
        ys.push(v.to_string());
    }
    (xs, ys)
}

fn match_instances(table: &TypologyTable, matrix: &DeltaMatrix, feature: &str) -> Instances {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (ti, t) in matrix.targets.iter().enumerate() {
        let Some(vt) = table.get(t, feature) else { continue };
        for (ai, a) in matrix.auxiliaries.iter().enumerate() {
            let (Some(d), Some(va)) = (matrix.deltas[ti][ai], table.get(a, feature)) else {
                continue;
            };
            xs.push(vec![d]);
            ys.push(if vt == va { "same" } else { "different" }.to_string());
        }
    }
    (xs, ys)
}

fn instances(table: &TypologyTable, matrix: &DeltaMatrix, feature: &str, condition: Condition) -> Instances {
    match condition {
        Condition::Value => value_instances(table, matrix, feature),
        Condition::Match => match_instances(table, matrix, feature),
    }
}

/// Subsamples one split and runs leave-one-out over it.
fn run_split(
    (xs, ys): &Instances,
    feature: &str,
    split_seed: u64,
    cfg: &ConditionConfig,
) -> Result<ConditionOutcome> {
    let n = xs.len();
    if n < MIN_INSTANCES {
        return Err(Error::InsufficientLanguages {
            feature: feature.to_string(),
            needed: MIN_INSTANCES,
            available: n,
        });
    }
    let keep = ((cfg.subsample * n as f64).ceil() as usize).clamp(MIN_INSTANCES, n);
    let mut chosen = index::sample(&mut rng_from(split_seed, "split", &[]), n, keep).into_vec();
    chosen.sort_unstable();
    // label ids follow lexicographic order of the values, so index ties match string ties
    let mut domain: Vec<&String> = chosen.iter().map(|&i| &ys[i]).collect();
    domain.sort();
    domain.dedup();
    let label = |i: usize| domain.binary_search(&&ys[i]).expect("value in domain");
    let x: Vec<&Vec<f64>> = chosen.iter().map(|&i| &xs[i]).collect();
    let y: Vec<usize> = chosen.iter().map(|&i| label(i)).collect();

    let mut model_hits = 0usize;
    let mut mf = 0.0;
    let mut dist = 0.0;
    for held in 0..keep {
        let train_x: Vec<Vec<f64>> = (0..keep).filter(|&j| j != held).map(|j| x[j].clone()).collect();
        let train_y: Vec<usize> = (0..keep).filter(|&j| j != held).map(|j| y[j]).collect();
        let model = fit_logistic(&train_x, &train_y, cfg.lr, cfg.epochs)?;
        if model.predict(x[held]) == y[held] {
            model_hits += 1;
        }
        mf += baseline_most_frequent(&train_y, &y[held..=held])?;
        let mut rng = rng_from(split_seed, "distributional", &[held as u64]);
        dist += baseline_distributional(&train_y, &y[held..=held], &mut rng, cfg.trials)?;
    }
    Ok(ConditionOutcome {
        instances: keep,
        model_accuracy: model_hits as f64 / keep as f64,
        most_frequent: mf / keep as f64,
        distributional: dist / keep as f64,
    })
}

/// Predicts each language's value of `feature` from its delta row and column.
///
/// Languages are the matrix targets with a value in the table. Missing cells
/// are imputed as 0. `split_seed` picks the resampled subset that is then
/// evaluated leave-one-language-out.
pub fn condition_value_prediction(
    table: &TypologyTable,
    matrix: &DeltaMatrix,
    feature: &str,
    split_seed: u64,
    cfg: &ConditionConfig,
) -> Result<ConditionOutcome> {
    run_split(&value_instances(table, matrix, feature), feature, split_seed, cfg)
}

/// Predicts whether target and auxiliary share `feature`'s value from their delta.
///
/// One instance per ordered pair with a defined delta and both values known;
/// evaluated leave-one-pair-out on the subset picked by `split_seed`.
pub fn condition_match_prediction(
    table: &TypologyTable,
    matrix: &DeltaMatrix,
    feature: &str,
    split_seed: u64,
    cfg: &ConditionConfig,
) -> Result<ConditionOutcome> {
    run_split(&match_instances(table, matrix, feature), feature, split_seed, cfg)
}

/// Per-feature significance of the classifier over the stronger baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct TestResult {
    pub feature_id: String,
    pub t_statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub num_tests: usize,
    pub corrected_cutoff: f64,
    /// `p < corrected_cutoff` and the classifier beat the baseline on average.
    pub significant: bool,
    pub zero_variance: bool,
    pub model_acc_mean: f64,
    pub baseline_acc_mean: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanReport {
    /// Sorted by ascending p-value, then feature id.
    pub results: Vec<TestResult>,
    /// Features without enough labeled instances, with the reason.
    pub skipped: Vec<(String, String)>,
}

impl ScanReport {
    pub fn significant(&self) -> impl Iterator<Item = &TestResult> {
        self.results.iter().filter(|r| r.significant)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,t,df,p,m,cutoff,significant,model_acc_mean,baseline_acc_mean\n");
        for r in &self.results {
            writeln!(
                out,
                "{},{:?},{},{:?},{},{:?},{},{:?},{:?}",
                r.feature_id,
                r.t_statistic,
                r.degrees_of_freedom,
                r.p_value,
                r.num_tests,
                r.corrected_cutoff,
                r.significant,
                r.model_acc_mean,
                r.baseline_acc_mean
            )
            .unwrap();
        }
        out
    }
}

/// Runs `condition` over `cfg.splits` resampled splits for every eligible feature.
///
/// Model and best-baseline accuracies are compared with a paired t-test across
/// splits; the cutoff is Bonferroni-corrected by the number of eligible features.
pub fn run_feature_scan(
    table: &TypologyTable,
    matrix: &DeltaMatrix,
    condition: Condition,
    base_cutoff: f64,
    seed: u64,
    cfg: &ConditionConfig,
) -> Result<ScanReport> {
    bonferroni(base_cutoff, 1)?;
    if cfg.splits < 2 {
        return Err(Error::InsufficientSamples(cfg.splits));
    }
    let per_feature: Vec<(String, std::result::Result<(Vec<f64>, Vec<f64>), String>)> = table
        .features()
        .par_iter()
        .map(|f| {
            let inst = instances(table, matrix, f, condition);
            if inst.0.len() < MIN_INSTANCES {
                return Ok((
                    f.clone(),
                    Err(format!("{} labeled instances, need {MIN_INSTANCES}", inst.0.len())),
                ));
            }
            let mut model = Vec::with_capacity(cfg.splits);
            let mut base = Vec::with_capacity(cfg.splits);
            for s in 0..cfg.splits {
                let o = run_split(&inst, f, derive_seed(seed, "scan-split", &[s as u64]), cfg)?;
                model.push(o.model_accuracy);
                base.push(o.best_baseline());
            }
            Ok((f.clone(), Ok((model, base))))
        })
        .collect::<Result<_>>()?;

    let m = per_feature.iter().filter(|(_, r)| r.is_ok()).count();
    let mut results = Vec::with_capacity(m);
    let mut skipped = Vec::new();
    for (feature, r) in per_feature {
        match r {
            Err(reason) => skipped.push((feature, reason)),
            Ok((model, base)) => {
                let cutoff = bonferroni(base_cutoff, m)?;
                let test = paired_t_test(&model, &base)?;
                results.push(TestResult {
                    feature_id: feature,
                    t_statistic: test.t,
                    degrees_of_freedom: test.df,
                    p_value: test.p,
                    num_tests: m,
                    corrected_cutoff: cutoff,
                    significant: test.p < cutoff && test.t > 0.0,
                    zero_variance: test.zero_variance,
                    model_acc_mean: model.iter().sum::<f64>() / model.len() as f64,
                    baseline_acc_mean: base.iter().sum::<f64>() / base.len() as f64,
                });
            }
        }
    }
    results.sort_by(|a, b| {
        a.p_value
            .partial_cmp(&b.p_value)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.feature_id.cmp(&b.feature_id))
    });
    Ok(ScanReport { results, skipped })
}

/// How the planted feature shapes the deltas.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlantedSignal {
    /// `effect * ±1` by whether target and auxiliary share the planted value.
    Match,
    /// Rows of languages with value `B` are shifted up by `effect`.
    RowShift,
}

/// Synthetic table and delta matrix with one informative feature among null ones.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedSpec {
    pub num_languages: usize,
    pub null_features: usize,
    pub effect: f64,
    pub noise: f64,
    pub signal: PlantedSignal,
    /// Redraw null features until they agree with the planted feature on
    /// `n/2 ± max(1, n/10)` languages. With few languages an independent draw
    /// often nearly copies the planted partition and then carries real signal.
    pub decorrelate_nulls: bool,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            num_languages: 10,
            null_features: 20,
            effect: 1.0,
            noise: 1.0,
            signal: PlantedSignal::Match,
            decorrelate_nulls: true,
            seed: 0,
        }
    }
}

/// The informative feature is named `planted` and split evenly between values `A` and `B`;
/// null features `null00`, `null01`, ... take `A` or `B` at random (see
/// [`PlantedSpec::decorrelate_nulls`]).
pub fn planted_typology(spec: &PlantedSpec) -> Result<(TypologyTable, DeltaMatrix)> {
    if spec.num_languages < 2 {
        return Err(Error::Argument("planted typology needs at least 2 languages".into()));
    }
    let langs: Vec<String> = (0..spec.num_languages).map(|i| format!("l{i:02}")).collect();
    let mut rng = rng_from(spec.seed, "planted", &[]);
    let mut planted: Vec<&str> = (0..spec.num_languages).map(|i| if i % 2 == 0 { "A" } else { "B" }).collect();
    planted.shuffle(&mut rng);

    let mut table = TypologyTable::new();
    for (l, v) in langs.iter().zip(&planted) {
        table.insert(l, "planted", v);
    }
    let n = spec.num_languages;
    let slack = (n / 10).max(1);
    for f in 0..spec.null_features {
        let name = format!("null{f:02}");
        let values: Vec<&str> = loop {
            let draw: Vec<&str> = (0..n).map(|_| if rng.random_bool(0.5) { "A" } else { "B" }).collect();
            let agree = draw.iter().zip(&planted).filter(|(a, b)| a == b).count();
            if !spec.decorrelate_nulls || agree.abs_diff(n / 2) <= slack {
                break draw;
            }
        };
        for (l, v) in langs.iter().zip(values) {
            table.insert(l, &name, v);
        }
    }

    let deltas = (0..spec.num_languages)
        .map(|t| {
            (0..spec.num_languages)
                .map(|a| {
                    if t == a {
                        return None;
                    }
                    let noise: f64 = rng.sample(StandardNormal);
                    let signal = match spec.signal {
                        PlantedSignal::Match if planted[t] == planted[a] => spec.effect,
                        PlantedSignal::Match => -spec.effect,
                        PlantedSignal::RowShift if planted[t] == "B" => spec.effect,
                        PlantedSignal::RowShift => 0.0,
                    };
                    Some(signal + spec.noise * noise)
                })
                .collect()
        })
        .collect();
    let baseline = langs
        .iter()
        .map(|l| EvalResult::from_runs(l.as_str(), Metric::Accuracy, vec![0.0]))
        .collect::<Result<_>>()?;
    let matrix = DeltaMatrix {
        metric: Metric::Accuracy,
        targets: langs.clone(),
        auxiliaries: langs,
        deltas,
        baseline,
    };
    Ok((table, matrix))
}
