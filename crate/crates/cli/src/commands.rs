use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use xmaml_core::checkpoint::Checkpoint;
use xmaml_core::corpus::Corpus;
use xmaml_core::episode::LanguagePlan;
use xmaml_core::eval::{
    aggregate_avg_max, read_eval_results_csv, run_seed, score_run, sweep_pair_aux, sweep_single_aux,
    write_aggregates_csv, write_eval_results_csv, BestPair, DeltaMatrix, EvalMode, EvalResult, ExperimentData,
};
use xmaml_core::meta::{pretrain, xmaml_meta_learn, MetaConfig};
use xmaml_core::model::{init_model, Model, ModelSpec, TaskKind};
use xmaml_core::typology::{run_feature_scan, Condition, TypologyTable};
use xmaml_core::ParamVector;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::RunDir;

pub const PRETRAIN_CKPT: &str = "pretrain.ckpt";

fn load_corpus(cfg: &ExperimentConfig, path: &Option<PathBuf>, split: &str) -> Result<Corpus, CliError> {
    let path = path
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("no `data.{split}` corpus configured")))?;
    let path = cfg.resolve(path);
    if !path.exists() {
        return Err(CliError::MissingInput(path));
    }
    Ok(Corpus::load(&path)?)
}

fn output_dim(corpus: &Corpus) -> usize {
    match corpus.kind() {
        TaskKind::Classification => corpus.num_classes(),
        TaskKind::Regression => 1,
    }
}

/// Sorted, deduplicated auxiliary set; the command line wins over the config.
pub fn auxiliary_set(cfg: &ExperimentConfig, cli: &[String]) -> Vec<String> {
    let mut aux: Vec<String> = if cli.is_empty() {
        cfg.languages.auxiliary.clone()
    } else {
        cli.to_vec()
    };
    aux.sort();
    aux.dedup();
    aux
}

pub fn aux_tag(aux: &[String]) -> String {
    if aux.is_empty() {
        "baseline".into()
    } else {
        aux.join("+")
    }
}

fn plan(cfg: &ExperimentConfig, corpus: &Corpus, aux: Vec<String>) -> Result<LanguagePlan, CliError> {
    let source = &cfg.languages.source;
    let pool = if cfg.languages.pool.is_empty() {
        corpus.groups().into_iter().filter(|g| g != source).collect()
    } else {
        cfg.languages.pool.clone()
    };
    Ok(LanguagePlan::new(source.clone(), pool, aux)?)
}

/// Rebuilds the architecture from a checkpoint's `w{i}` shapes.
fn spec_from_params(cfg: &ExperimentConfig, params: &ParamVector, kind: TaskKind) -> Result<ModelSpec, CliError> {
    let mut widths = Vec::new();
    for i in 0.. {
        let Some(w) = params.get(&format!("w{i}")) else { break };
        if w.rank() != 2 {
            return Err(xmaml_core::Error::Checkpoint(format!("w{i} is not a matrix")).into());
        }
        if i == 0 {
            widths.push(w.rows());
        }
        widths.push(w.cols());
    }
    if widths.len() < 2 {
        return Err(xmaml_core::Error::Checkpoint("no weight matrices".into()).into());
    }
    let hidden = widths[1..widths.len() - 1].to_vec();
    let mut spec = cfg.model_spec(widths[0], *widths.last().unwrap(), kind)?;
    spec.hidden_dims = hidden;
    Ok(spec)
}

fn load_model(cfg: &ExperimentConfig, path: &Path, hash: u64, kind: TaskKind) -> Result<Model, CliError> {
    if !path.exists() {
        return Err(CliError::MissingInput(path.to_path_buf()));
    }
    let ck = Checkpoint::load_matching(path, hash)?;
    let spec = spec_from_params(cfg, &ck.params, kind)?;
    Ok(Model::new(spec, ck.params)?)
}

fn meta_dir(aux: &[String]) -> String {
    format!("meta/{}", aux_tag(aux))
}

fn run_ckpt(aux: &[String], run: usize) -> String {
    format!("{}/run-{run:02}.ckpt", meta_dir(aux))
}

fn seeds(cfg: &ExperimentConfig) -> BTreeMap<String, u64> {
    BTreeMap::from([
        ("root".to_string(), cfg.seed),
        ("pretrain".to_string(), cfg.pretrain_seed()),
        ("meta".to_string(), cfg.meta_seed()),
        ("finetune".to_string(), cfg.finetune_seed()),
    ])
}

fn finish(
    run: RunDir,
    name: &str,
    command: &str,
    cfg: &ExperimentConfig,
    seeds: BTreeMap<String, u64>,
    details: BTreeMap<String, serde_json::Value>,
) -> Result<(), CliError> {
    let path = run.finish(name, command, cfg.hash(), cfg.canonical_json(), seeds, details)?;
    println!("manifest: {}", path.display());
    Ok(())
}

pub fn cmd_pretrain(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let train = load_corpus(cfg, &cfg.data.train, "train")?;
    let spec = cfg.model_spec(train.input_dim(), output_dim(&train), train.kind())?;
    let pcfg = cfg.pretrain_config();
    let mut run = RunDir::open(&cfg.out_dir())?;
    let init = init_model(&spec, pcfg.seed)?;
    let pre = run.timed("pretrain", || pretrain(&init, &train, &cfg.languages.source, &pcfg))?;
    let path = run.write(PRETRAIN_CKPT, Checkpoint::new(cfg.pretrain_hash(), pre.model.params).to_bytes())?;
    println!(
        "pretrained on {} `{}` records -> {}",
        pre.train_size,
        cfg.languages.source,
        path.display()
    );
    let details = BTreeMap::from([
        ("source".to_string(), json!(cfg.languages.source)),
        ("train_fraction".to_string(), json!(pcfg.train_fraction)),
        ("train_size".to_string(), json!(pre.train_size)),
        ("widths".to_string(), json!(spec.widths())),
        ("pretrain_hash".to_string(), json!(format!("{:016x}", cfg.pretrain_hash()))),
    ]);
    finish(run, "pretrain", "pretrain", cfg, seeds(cfg), details)
}

pub fn cmd_meta(cfg: &ExperimentConfig, cli_aux: &[String]) -> Result<(), CliError> {
    let aux = auxiliary_set(cfg, cli_aux);
    if aux.is_empty() {
        return Err(CliError::Config(
            "meta-learning needs auxiliary languages (--aux or languages.auxiliary)".into(),
        ));
    }
    let dev = load_corpus(cfg, &cfg.data.dev, "dev")?;
    let mut out = RunDir::open(&cfg.out_dir())?;
    let pre = load_model(cfg, &out.path(PRETRAIN_CKPT), cfg.pretrain_hash(), dev.kind())?;
    let plan = plan(cfg, &dev, aux)?;
    let mcfg = cfg.meta_config()?;
    let runs: Vec<(u64, _)> = out.timed("meta", || {
        (0..mcfg.num_runs)
            .into_par_iter()
            .map(|r| {
                let seed = run_seed(mcfg.seed, plan.auxiliary(), r);
                let run_cfg = MetaConfig { seed, ..mcfg.clone() };
                xmaml_meta_learn(&pre, &dev, &plan, &run_cfg).map(|m| (seed, m))
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let hash = cfg.meta_hash(plan.auxiliary());
    let mut run_seeds = seeds(cfg);
    for (r, (seed, result)) in runs.into_iter().enumerate() {
        out.write(&run_ckpt(plan.auxiliary(), r), Checkpoint::new(hash, result.model.params).to_bytes())?;
        let mut history = String::from("iteration,loss\n");
        for (it, loss) in &result.state.loss_history {
            writeln!(history, "{it},{loss:?}").unwrap();
        }
        out.write(&format!("{}/loss-{r:02}.csv", meta_dir(plan.auxiliary())), history)?;
        run_seeds.insert(format!("run-{r:02}"), seed);
    }
    println!(
        "meta-learned {} run(s) on {{{}}} -> {}",
        mcfg.num_runs,
        plan.auxiliary().join(","),
        out.path(&meta_dir(plan.auxiliary())).display()
    );
    let details = BTreeMap::from([
        ("auxiliary".to_string(), json!(plan.auxiliary())),
        ("runs".to_string(), json!(mcfg.num_runs)),
        ("meta_hash".to_string(), json!(format!("{hash:016x}"))),
    ]);
    finish(out, &format!("meta-{}", aux_tag(plan.auxiliary())), "meta", cfg, run_seeds, details)
}

pub fn cmd_eval(cfg: &ExperimentConfig, cli_aux: &[String]) -> Result<(), CliError> {
    let aux = auxiliary_set(cfg, cli_aux);
    let mode = cfg.mode()?;
    let test = load_corpus(cfg, &cfg.data.test, "test")?;
    let dev = match mode {
        EvalMode::Few => load_corpus(cfg, &cfg.data.dev, "dev")?,
        EvalMode::Zero => test.clone(),
    };
    let mut out = RunDir::open(&cfg.out_dir())?;
    let runs = cfg.meta.runs;
    let models: Vec<Model> = if aux.is_empty() {
        vec![load_model(cfg, &out.path(PRETRAIN_CKPT), cfg.pretrain_hash(), test.kind())?]
    } else {
        let hash = cfg.meta_hash(&aux);
        (0..runs)
            .map(|r| load_model(cfg, &out.path(&run_ckpt(&aux, r)), hash, test.kind()))
            .collect::<Result<_, _>>()?
    };
    let plan = plan(cfg, &test, aux)?;
    let setup = cfg.sweep_setup(models[0].spec.clone())?;
    let results: Vec<EvalResult> = out.timed("eval", || {
        plan.targets()
            .par_iter()
            .map(|t| {
                let values = (0..runs)
                    .map(|r| score_run(&models[r.min(models.len() - 1)], &dev, &test, t, &setup, r))
                    .collect::<Result<Vec<_>, _>>()?;
                EvalResult::from_runs(t.as_str(), setup.metric, values)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let rel = format!("eval/{mode}-{}.csv", aux_tag(plan.auxiliary()));
    let path = out.write(&rel, write_eval_results_csv(&results))?;
    for r in &results {
        println!("{:>12}  {} = {:.4}", r.group_id, r.metric, r.value);
    }
    println!("metrics -> {}", path.display());
    let details = BTreeMap::from([
        ("auxiliary".to_string(), json!(plan.auxiliary())),
        ("mode".to_string(), json!(mode.to_string())),
        ("targets".to_string(), json!(plan.targets())),
    ]);
    finish(out, &format!("eval-{mode}-{}", aux_tag(plan.auxiliary())), "eval", cfg, seeds(cfg), details)
}

pub fn cmd_sweep(cfg: &ExperimentConfig, pairs: bool) -> Result<(), CliError> {
    let data = ExperimentData {
        train: load_corpus(cfg, &cfg.data.train, "train")?,
        dev: load_corpus(cfg, &cfg.data.dev, "dev")?,
        test: load_corpus(cfg, &cfg.data.test, "test")?,
    };
    let mode = cfg.mode()?;
    let spec = cfg.model_spec(data.train.input_dim(), output_dim(&data.train), data.train.kind())?;
    let setup = cfg.sweep_setup(spec)?;
    let plan = plan(cfg, &data.test, Vec::new())?;
    let mut out = RunDir::open(&cfg.out_dir())?;
    // reuse a pretrained model only if it was built from this configuration
    let ckpt = out.path(PRETRAIN_CKPT);
    let pretrained = match Checkpoint::load_matching(&ckpt, cfg.pretrain_hash()) {
        Ok(ck) => Some(Model::new(setup.model.clone(), ck.params)?),
        Err(_) => None,
    };
    let matrix = out.timed("single", || sweep_single_aux(&data, &plan, &setup, pretrained.as_ref()))?;
    let dir = format!("sweep/{mode}");
    out.write(&format!("{dir}/delta.csv"), matrix.to_csv())?;
    out.write(&format!("{dir}/baseline.csv"), write_eval_results_csv(&matrix.baseline))?;
    let aggregates = aggregate_avg_max(&matrix)?;
    out.write(&format!("{dir}/aggregates.csv"), write_aggregates_csv(&aggregates))?;
    for a in &aggregates {
        println!("{:>12}  avg {:.4}  max {:.4} ({})", a.target, a.avg, a.max, a.argmax);
    }
    if pairs {
        let best = out.timed("pairs", || sweep_pair_aux(&data, &plan, &setup, pretrained.as_ref()))?;
        out.write(&format!("{dir}/pairs.csv"), BestPair::to_csv(&best))?;
        for b in &best {
            println!("{:>12}  best pair ({},{}) {:.4}", b.target, b.pair.0, b.pair.1, b.score);
        }
    }
    println!("sweep -> {}", out.path(&dir).display());
    let details = BTreeMap::from([
        ("pool".to_string(), json!(plan.pool)),
        ("pairs".to_string(), json!(pairs)),
        ("reused_pretrain_checkpoint".to_string(), json!(pretrained.is_some())),
    ]);
    finish(out, &format!("sweep-{mode}"), "sweep", cfg, seeds(cfg), details)
}

pub fn cmd_typology(
    cfg: &ExperimentConfig,
    wals: &Path,
    matrix_path: &Path,
    condition: Condition,
) -> Result<(), CliError> {
    for p in [wals, matrix_path] {
        if !p.exists() {
            return Err(CliError::MissingInput(p.to_path_buf()));
        }
    }
    let table = TypologyTable::load(wals)?;
    let text = std::fs::read_to_string(matrix_path).map_err(|e| CliError::io(matrix_path, e))?;
    let baseline_path = matrix_path.with_file_name("baseline.csv");
    let baseline = match std::fs::read_to_string(&baseline_path) {
        Ok(b) => read_eval_results_csv(&b, &baseline_path)?,
        Err(_) => Vec::new(),
    };
    let matrix = DeltaMatrix::from_csv(&text, matrix_path, cfg.metric()?, baseline)?;
    let mut out = RunDir::open(&cfg.out_dir())?;
    let report = out.timed("scan", || {
        run_feature_scan(
            &table,
            &matrix,
            condition,
            cfg.typology.cutoff,
            cfg.typology_seed(),
            &cfg.condition_config(),
        )
    })?;
    let name = match condition {
        Condition::Value => "value",
        Condition::Match => "match",
    };
    let path = out.write(&format!("typology/{name}.csv"), report.to_csv())?;
    let mut skipped = String::from("feature,reason\n");
    for (f, reason) in &report.skipped {
        writeln!(skipped, "{f},\"{}\"", reason.replace('"', "'")).unwrap();
    }
    out.write(&format!("typology/{name}-skipped.csv"), skipped)?;
    let significant: Vec<&str> = report.significant().map(|r| r.feature_id.as_str()).collect();
    let cutoff = report.results.first().map_or(cfg.typology.cutoff, |r| r.corrected_cutoff);
    println!(
        "{} feature(s) tested, {} skipped; corrected cutoff {cutoff}; significant: {}",
        report.results.len(),
        report.skipped.len(),
        if significant.is_empty() {
            "none".to_string()
        } else {
            significant.join(", ")
        }
    );
    println!("report -> {}", path.display());
    let details = BTreeMap::from([
        ("condition".to_string(), json!(name)),
        ("wals".to_string(), json!(wals)),
        ("matrix".to_string(), json!(matrix_path)),
        ("significant".to_string(), json!(significant)),
    ]);
    let seeds = BTreeMap::from([("root".to_string(), cfg.seed), ("typology".to_string(), cfg.typology_seed())]);
    finish(out, &format!("typology-{name}"), "typology", cfg, seeds, details)
}
