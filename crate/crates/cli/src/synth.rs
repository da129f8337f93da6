//! Synthetic corpora and typology tables for trying the pipeline end to end.

use std::fs;
use std::path::Path;

use rand::Rng as _;

use xmaml_core::episode::{gen_synthetic_family, SyntheticFamilySpec, SyntheticLanguage};
use xmaml_core::eval::write_eval_results_csv;
use xmaml_core::seed::rng_from;
use xmaml_core::typology::{planted_typology, PlantedSpec};

use crate::config::ExperimentConfig;
use crate::error::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthOptions {
    pub languages: usize,
    pub bits: usize,
    pub dim: usize,
    pub strength: f64,
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    pub seed: u64,
    pub planted: bool,
}

fn write(path: &Path, text: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes `train.csv`, `dev.csv`, `test.csv` and a matching `config.toml` to `dir`;
/// with `planted`, also `wals.csv`, `matrix.csv` and `baseline.csv`.
pub fn cmd_synth(dir: &Path, opts: &SynthOptions) -> Result<(), CliError> {
    if opts.languages < 2 || opts.dim == 0 {
        return Err(CliError::Config("synth needs at least 2 languages and dim >= 1".into()));
    }
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut rng = rng_from(opts.seed, "synth-bits", &[]);
    let mut languages = vec![SyntheticLanguage {
        id: "src".into(),
        feature_bits: vec![false; opts.bits],
    }];
    for i in 1..opts.languages {
        languages.push(SyntheticLanguage {
            id: format!("l{i}"),
            feature_bits: (0..opts.bits).map(|_| rng.random_bool(0.5)).collect(),
        });
    }
    let family = SyntheticFamilySpec {
        languages,
        input_dim: opts.dim,
        bit_strength: opts.strength,
        base_seed: opts.seed,
        sample_seed: 0,
        samples_per_language: 0,
        noise_std: 0.1,
    };
    for (name, sample_seed, n) in [("train", 1, opts.train), ("dev", 2, opts.dev), ("test", 3, opts.test)] {
        let corpus = gen_synthetic_family(&SyntheticFamilySpec {
            sample_seed,
            samples_per_language: n,
            ..family.clone()
        })?;
        write(&dir.join(format!("{name}.csv")), corpus.to_csv())?;
    }
    let mut cfg = ExperimentConfig::default();
    cfg.seed = opts.seed;
    cfg.out = "runs".into();
    cfg.data.train = Some("train.csv".into());
    cfg.data.dev = Some("dev.csv".into());
    cfg.data.test = Some("test.csv".into());
    cfg.languages.source = "src".into();
    write(&dir.join("config.toml"), cfg.to_toml())?;
    println!(
        "wrote {} languages ({} train / {} dev / {} test records each) to {}",
        opts.languages,
        opts.train,
        opts.dev,
        opts.test,
        dir.display()
    );
    if opts.planted {
        let (table, matrix) = planted_typology(&PlantedSpec {
            seed: opts.seed,
            ..PlantedSpec::default()
        })?;
        table.save(dir.join("wals.csv"))?;
        write(&dir.join("matrix.csv"), matrix.to_csv())?;
        write(&dir.join("baseline.csv"), write_eval_results_csv(&matrix.baseline))?;
        println!("wrote planted typology table and delta matrix (feature `planted`)");
    }
    Ok(())
}
