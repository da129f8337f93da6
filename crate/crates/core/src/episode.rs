//! Task distributions: episodic sampling from grouped corpora, sinusoid
//! regression tasks, and synthetic language families with planted
//! typological structure.

use std::f64::consts::PI;

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus::{Corpus, Label, Record};
use crate::error::{Error, Result};
use crate::model::{Batch, TaskKind, Targets};
use crate::seed::{self, Rng};
use crate::tensor::Tensor;

/// One task instance: `support` adapts, `query` scores the adapted model.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub group_id: String,
    pub support: Batch,
    pub query: Batch,
    /// Positions of the support points in the source pool.
    pub support_indices: Vec<usize>,
    /// Positions of the query points in the source pool.
    pub query_indices: Vec<usize>,
}

/// Draws `k + q` distinct records of `group`; the first `k` form the support set.
pub fn sample_episode(corpus: &Corpus, group: &str, k: usize, q: usize, rng: &mut Rng) -> Result<Episode> {
    let pool = corpus.group_indices(group)?;
    let needed = k + q;
    if pool.len() < needed {
        return Err(Error::InsufficientData {
            group: group.to_string(),
            needed,
            available: pool.len(),
        });
    }
    let picks = index::sample(rng, pool.len(), needed).into_vec();
    let support_indices: Vec<usize> = picks[..k].iter().map(|&p| pool[p]).collect();
    let query_indices: Vec<usize> = picks[k..].iter().map(|&p| pool[p]).collect();
    Ok(Episode {
        group_id: group.to_string(),
        support: corpus.batch(&support_indices),
        query: corpus.batch(&query_indices),
        support_indices,
        query_indices,
    })
}

/// Source language, candidate pool and chosen auxiliary languages.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LanguagePlan {
    pub source: String,
    pub pool: Vec<String>,
    auxiliary: Vec<String>,
}

impl LanguagePlan {
    /// Auxiliary ids are sorted and deduplicated so `{a, b}` and `{b, a}` are one plan.
    pub fn new(source: impl Into<String>, pool: Vec<String>, auxiliary: Vec<String>) -> Result<Self> {
        let source = source.into();
        if pool.contains(&source) {
            return Err(Error::Argument(format!("source `{source}` must not be in the pool")));
        }
        for (i, g) in pool.iter().enumerate() {
            if pool[..i].contains(g) {
                return Err(Error::Argument(format!("pool lists `{g}` twice")));
            }
        }
        let mut auxiliary = auxiliary;
        auxiliary.sort();
        auxiliary.dedup();
        if let Some(a) = auxiliary.iter().find(|a| !pool.contains(a)) {
            return Err(Error::Argument(format!("auxiliary `{a}` is not in the pool")));
        }
        Ok(LanguagePlan {
            source,
            pool,
            auxiliary,
        })
    }

    pub fn auxiliary(&self) -> &[String] {
        &self.auxiliary
    }

    pub fn with_auxiliary(&self, auxiliary: Vec<String>) -> Result<Self> {
        LanguagePlan::new(self.source.clone(), self.pool.clone(), auxiliary)
    }

    /// Pool members not used as auxiliaries, in pool order.
    pub fn targets(&self) -> Vec<String> {
        self.pool.iter().filter(|g| !self.auxiliary.contains(g)).cloned().collect()
    }
}

/// Regression task `y = amplitude * sin(x + phase)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinusoidTask {
    pub amplitude: f64,
    pub phase: f64,
}

impl SinusoidTask {
    pub const AMPLITUDE: (f64, f64) = (0.1, 5.0);
    pub const PHASE: (f64, f64) = (0.0, PI);
    pub const INPUT: (f64, f64) = (-5.0, 5.0);

    pub fn sample(rng: &mut Rng) -> Self {
        SinusoidTask {
            amplitude: rng.random_range(Self::AMPLITUDE.0..=Self::AMPLITUDE.1),
            phase: rng.random_range(Self::PHASE.0..=Self::PHASE.1),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.amplitude * (x + self.phase).sin()
    }

    pub fn batch(&self, xs: &[f64]) -> Batch {
        Batch {
            inputs: Tensor::from_parts(vec![xs.len(), 1], xs.to_vec()),
            targets: Targets::Values(xs.iter().map(|&x| self.value(x)).collect()),
        }
    }

    /// `k` support and `q` query points drawn uniformly from the input range.
    pub fn episode(&self, rng: &mut Rng, k: usize, q: usize) -> Episode {
        let xs: Vec<f64> = (0..k + q)
            .map(|_| rng.random_range(Self::INPUT.0..=Self::INPUT.1))
            .collect();
        Episode {
            group_id: "sinusoid".into(),
            support: self.batch(&xs[..k]),
            query: self.batch(&xs[k..]),
            support_indices: (0..k).collect(),
            query_indices: (k..k + q).collect(),
        }
    }
}

pub fn gen_sinusoid_episode(rng: &mut Rng, k: usize, q: usize) -> (SinusoidTask, Episode) {
    let task = SinusoidTask::sample(rng);
    let episode = task.episode(rng, k, q);
    (task, episode)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntheticLanguage {
    pub id: String,
    pub feature_bits: Vec<bool>,
}

/// A family of binary-classification "languages".
///
/// Each language's decision boundary `(w, b)` is a shared base boundary plus
/// `bit_strength` times one orthonormal direction per set typological bit,
/// so boundary distance between two languages is
/// `bit_strength * sqrt(hamming distance)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticFamilySpec {
    pub languages: Vec<SyntheticLanguage>,
    pub input_dim: usize,
    pub bit_strength: f64,
    /// Seeds the base boundary and bit directions.
    pub base_seed: u64,
    /// Seeds the sampled points; vary it to draw train/dev/test splits.
    pub sample_seed: u64,
    pub samples_per_language: usize,
    pub noise_std: f64,
}

impl SyntheticFamilySpec {
    pub fn num_languages(&self) -> usize {
        self.languages.len()
    }

    pub fn num_bits(&self) -> usize {
        self.languages.first().map_or(0, |l| l.feature_bits.len())
    }

    fn validate(&self) -> Result<()> {
        let bits = self.num_bits();
        if self.languages.iter().any(|l| l.feature_bits.len() != bits) {
            return Err(Error::Argument("feature_bits lengths differ across languages".into()));
        }
        if self.input_dim == 0 || self.input_dim < bits {
            return Err(Error::Argument(format!(
                "input_dim {} cannot host {bits} orthogonal bit directions",
                self.input_dim
            )));
        }
        if self.noise_std < 0.0 || !self.noise_std.is_finite() {
            return Err(Error::Argument("noise_std must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Base boundary followed by one unit direction per bit, all mutually
    /// orthogonal in `(w, b)` space.
    fn directions(&self) -> Vec<Vec<f64>> {
        let dim = self.input_dim + 1;
        let mut rng = seed::rng_from(self.base_seed, "family-directions", &[]);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(self.num_bits() + 1);
        while basis.len() < self.num_bits() + 1 {
            let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            if basis.is_empty() {
                // Base boundary passes near the origin.
                v[dim - 1] *= 0.1;
            }
            for b in &basis {
                let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= proj * y;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                basis.push(v.into_iter().map(|x| x / norm).collect());
            }
        }
        basis
    }

    /// Boundary parameters `(w_0, ..., w_{d-1}, b)` of every language.
    pub fn boundaries(&self) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        let basis = self.directions();
        Ok(self
            .languages
            .iter()
            .map(|lang| {
                let mut p = basis[0].clone();
                for (bit, dir) in lang.feature_bits.iter().zip(&basis[1..]) {
                    if *bit {
                        for (x, d) in p.iter_mut().zip(dir) {
                            *x += self.bit_strength * d;
                        }
                    }
                }
                p
            })
            .collect())
    }
}

/// Samples `samples_per_language` labeled points per language.
///
/// Points are standard normal; the label is the side of the language's
/// boundary the clean point falls on, then Gaussian input noise is added.
pub fn gen_synthetic_family(spec: &SyntheticFamilySpec) -> Result<Corpus> {
    let boundaries = spec.boundaries()?;
    let d = spec.input_dim;
    let mut records = Vec::with_capacity(spec.num_languages() * spec.samples_per_language);
    for (li, (lang, p)) in spec.languages.iter().zip(&boundaries).enumerate() {
        let mut rng = seed::rng_from(spec.sample_seed, "family-samples", &[spec.base_seed, li as u64]);
        for _ in 0..spec.samples_per_language {
            let x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let score: f64 = x.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() + p[d];
            let label = usize::from(score > 0.0);
            let features = x
                .into_iter()
                .map(|v| {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    v + spec.noise_std * n
                })
                .collect();
            records.push(Record {
                group: lang.id.clone(),
                features,
                label: Label::Class(label),
            });
        }
    }
    Corpus::new(d, TaskKind::Classification, records)
}
