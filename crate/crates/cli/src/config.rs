//! Experiment configuration: TOML on disk, canonical JSON for hashing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use xmaml_core::eval::{EvalMode, FineTuneConfig, Metric, SweepSetup};
use xmaml_core::meta::{MetaConfig, MetaOrder, OuterOptimizer, PretrainConfig};
use xmaml_core::model::{Activation, ModelSpec, TaskKind};
use xmaml_core::seed::derive_seed;
use xmaml_core::typology::{Condition, ConditionConfig};

use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root of every derived seed.
    pub seed: u64,
    /// Output directory; not part of any hash.
    pub out: PathBuf,
    pub data: DataSection,
    pub model: ModelSection,
    pub pretrain: PretrainSection,
    pub meta: MetaSection,
    pub languages: LanguageSection,
    pub eval: EvalSection,
    pub typology: TypologySection,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base: PathBuf,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hidden: Vec<usize>,
    pub activation: String,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            hidden: vec![16],
            activation: "tanh".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub train_fraction: f64,
}

impl Default for PretrainSection {
    fn default() -> Self {
        let d = PretrainConfig::default();
        PretrainSection {
            epochs: d.epochs,
            batch_size: d.batch_size,
            lr: d.lr,
            train_fraction: d.train_fraction,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaSection {
    pub alpha: f64,
    pub beta: f64,
    pub inner_steps: usize,
    pub iterations: usize,
    pub tasks_per_batch: usize,
    pub k: usize,
    pub q: usize,
    pub order: String,
    pub optimizer: String,
    pub runs: usize,
}

impl Default for MetaSection {
    fn default() -> Self {
        let d = MetaConfig::default();
        MetaSection {
            alpha: d.alpha,
            beta: d.beta,
            inner_steps: d.inner_steps,
            iterations: d.meta_iterations,
            tasks_per_batch: d.tasks_per_meta_batch,
            k: d.k_support,
            q: d.q_query,
            order: "full".into(),
            optimizer: "adam".into(),
            runs: d.num_runs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LanguageSection {
    pub source: String,
    /// Candidate targets and auxiliaries; empty means every group of the
    /// corpus at hand except the source.
    pub pool: Vec<String>,
    pub auxiliary: Vec<String>,
}

impl Default for LanguageSection {
    fn default() -> Self {
        LanguageSection {
            source: "en".into(),
            pool: Vec::new(),
            auxiliary: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub mode: String,
    pub metric: String,
    pub finetune_epochs: usize,
    pub finetune_batch_size: usize,
    pub finetune_lr: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        let d = FineTuneConfig::default();
        EvalSection {
            mode: "zero".into(),
            metric: "accuracy".into(),
            finetune_epochs: d.epochs,
            finetune_batch_size: d.batch_size,
            finetune_lr: d.lr,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TypologySection {
    pub condition: String,
    pub cutoff: f64,
    pub lr: f64,
    pub epochs: usize,
    pub trials: usize,
    pub subsample: f64,
    pub splits: usize,
}

impl Default for TypologySection {
    fn default() -> Self {
        let d = ConditionConfig::default();
        TypologySection {
            condition: "match".into(),
            cutoff: 0.05,
            lr: d.lr,
            epochs: d.epochs,
            trials: d.trials,
            subsample: d.subsample,
            splits: d.splits,
        }
    }
}

/// First 8 bytes of SHA-256 over canonical JSON (object keys sorted).
pub fn hash_value(value: &serde_json::Value) -> u64 {
    let digest = Sha256::digest(canonical(value).as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Compact JSON with sorted keys; `serde_json::Map` keeps keys ordered.
pub fn canonical(value: &serde_json::Value) -> String {
    serde_json::to_string(value).expect("JSON values always serialize")
}

fn json(value: &impl Serialize) -> serde_json::Value {
    serde_json::to_value(value).expect("config sections serialize")
}

fn parse_activation(s: &str) -> Result<Activation, CliError> {
    match s {
        "tanh" => Ok(Activation::Tanh),
        "relu" => Ok(Activation::Relu),
        other => Err(CliError::Config(format!("unknown activation `{other}` (expected tanh|relu)"))),
    }
}

pub fn parse_order(s: &str) -> Result<MetaOrder, CliError> {
    match s {
        "full" => Ok(MetaOrder::Full),
        "first" => Ok(MetaOrder::First),
        other => Err(CliError::Config(format!("unknown order `{other}` (expected full|first)"))),
    }
}

fn parse_optimizer(s: &str) -> Result<OuterOptimizer, CliError> {
    match s {
        "adam" => Ok(OuterOptimizer::Adam),
        "sgd" => Ok(OuterOptimizer::Sgd),
        other => Err(CliError::Config(format!("unknown optimizer `{other}` (expected adam|sgd)"))),
    }
}

impl ExperimentConfig {
    /// Reads a config; relative paths in it resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        Ok(cfg)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_relative() {
            self.base.join(path)
        } else {
            path.to_path_buf()
        }
    }

    /// Output directory, `runs` when unset.
    pub fn out_dir(&self) -> PathBuf {
        if self.out.as_os_str().is_empty() {
            PathBuf::from("runs")
        } else {
            self.resolve(&self.out)
        }
    }

    /// Canonical form of the config as hashed, without the output directory.
    pub fn canonical_json(&self) -> serde_json::Value {
        let mut v = json(self);
        v.as_object_mut().expect("config is an object").remove("out");
        v
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every enumerated string field up front.
    pub fn validate(&self) -> Result<(), CliError> {
        parse_activation(&self.model.activation)?;
        parse_order(&self.meta.order)?;
        parse_optimizer(&self.meta.optimizer)?;
        self.mode()?;
        self.metric()?;
        self.condition()?;
        self.meta_config()?.validate()?;
        Ok(())
    }

    /// Hash of the whole configuration.
    pub fn hash(&self) -> u64 {
        hash_value(&self.canonical_json())
    }

    /// Hash of everything that determines the pretrained weights.
    pub fn pretrain_hash(&self) -> u64 {
        hash_value(&serde_json::json!({
            "seed": self.seed,
            "train": self.data.train,
            "model": json(&self.model),
            "pretrain": json(&self.pretrain),
            "source": self.languages.source,
        }))
    }

    /// Hash of everything that determines meta-learned weights for `auxiliary`.
    pub fn meta_hash(&self, auxiliary: &[String]) -> u64 {
        hash_value(&serde_json::json!({
            "pretrain": self.pretrain_hash(),
            "dev": self.data.dev,
            "meta": json(&self.meta),
            "auxiliary": auxiliary,
        }))
    }

    pub fn pretrain_seed(&self) -> u64 {
        derive_seed(self.seed, "pretrain", &[])
    }

    pub fn meta_seed(&self) -> u64 {
        derive_seed(self.seed, "meta", &[])
    }

    pub fn finetune_seed(&self) -> u64 {
        derive_seed(self.seed, "finetune", &[])
    }

    pub fn typology_seed(&self) -> u64 {
        derive_seed(self.seed, "typology", &[])
    }

    pub fn mode(&self) -> Result<EvalMode, CliError> {
        Ok(self.eval.mode.parse()?)
    }

    pub fn metric(&self) -> Result<Metric, CliError> {
        Ok(self.eval.metric.parse()?)
    }

    pub fn condition(&self) -> Result<Condition, CliError> {
        Ok(self.typology.condition.parse()?)
    }

    pub fn model_spec(&self, input_dim: usize, output_dim: usize, kind: TaskKind) -> Result<ModelSpec, CliError> {
        Ok(ModelSpec {
            activation: parse_activation(&self.model.activation)?,
            ..ModelSpec::new(input_dim, self.model.hidden.clone(), output_dim, kind)
        })
    }

    pub fn pretrain_config(&self) -> PretrainConfig {
        PretrainConfig {
            epochs: self.pretrain.epochs,
            batch_size: self.pretrain.batch_size,
            lr: self.pretrain.lr,
            train_fraction: self.pretrain.train_fraction,
            seed: self.pretrain_seed(),
        }
    }

    pub fn meta_config(&self) -> Result<MetaConfig, CliError> {
        Ok(MetaConfig {
            alpha: self.meta.alpha,
            beta: self.meta.beta,
            inner_steps: self.meta.inner_steps,
            meta_iterations: self.meta.iterations,
            tasks_per_meta_batch: self.meta.tasks_per_batch,
            k_support: self.meta.k,
            q_query: self.meta.q,
            order: parse_order(&self.meta.order)?,
            outer_optimizer: parse_optimizer(&self.meta.optimizer)?,
            seed: self.meta_seed(),
            num_runs: self.meta.runs,
            ..MetaConfig::default()
        })
    }

    pub fn finetune_config(&self) -> FineTuneConfig {
        FineTuneConfig {
            epochs: self.eval.finetune_epochs,
            batch_size: self.eval.finetune_batch_size,
            lr: self.eval.finetune_lr,
            seed: self.finetune_seed(),
        }
    }

    pub fn condition_config(&self) -> ConditionConfig {
        ConditionConfig {
            lr: self.typology.lr,
            epochs: self.typology.epochs,
            trials: self.typology.trials,
            subsample: self.typology.subsample,
            splits: self.typology.splits,
        }
    }

    pub fn sweep_setup(&self, model: ModelSpec) -> Result<SweepSetup, CliError> {
        Ok(SweepSetup {
            model,
            pretrain: self.pretrain_config(),
            meta: self.meta_config()?,
            finetune: self.finetune_config(),
            mode: self.mode()?,
            metric: self.metric()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 3
[data]
train = "train.csv"
[meta]
iterations = 5
order = "first"
[languages]
source = "src"
auxiliary = ["b", "a"]
"#;

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg: ExperimentConfig = toml::from_str(SAMPLE).unwrap();
        assert_eq!(cfg.meta.k, 16);
        assert_eq!(cfg.meta.order, "first");
        assert_eq!(cfg.eval.mode, "zero");
        cfg.validate().unwrap();
        assert_eq!(cfg.meta_config().unwrap().order, MetaOrder::First);
    }

    #[test]
    fn hash_ignores_key_order() {
        let reordered = r#"
[languages]
auxiliary = ["b", "a"]
source = "src"
[meta]
order = "first"
iterations = 5
[data]
train = "train.csv"
"#;
        let a: ExperimentConfig = toml::from_str(SAMPLE).unwrap();
        let mut b: ExperimentConfig = toml::from_str(reordered).unwrap();
        assert_ne!(a.hash(), b.hash());
        b.seed = 3;
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.pretrain_hash(), b.pretrain_hash());
    }

    #[test]
    fn pretrain_hash_ignores_downstream_sections() {
        let a: ExperimentConfig = toml::from_str(SAMPLE).unwrap();
        let mut b = a.clone();
        b.meta.iterations = 50;
        b.eval.mode = "few".into();
        assert_eq!(a.pretrain_hash(), b.pretrain_hash());
        assert_ne!(a.meta_hash(&[]), b.meta_hash(&[]));
        b.pretrain.epochs += 1;
        assert_ne!(a.pretrain_hash(), b.pretrain_hash());
    }

    #[test]
    fn unknown_keys_and_values_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("[meta]\nalpah = 1.0\n").is_err());
        let cfg: ExperimentConfig = toml::from_str("[meta]\norder = \"second\"\n").unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn output_directory_is_not_hashed() {
        let a: ExperimentConfig = toml::from_str(SAMPLE).unwrap();
        let mut b = a.clone();
        b.out = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn toml_round_trip() {
        let cfg: ExperimentConfig = toml::from_str(SAMPLE).unwrap();
        let back: ExperimentConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }
}
