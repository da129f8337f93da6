//! Grouped labeled feature vectors and their CSV form.
//!
//! File layout: header `group,label,f0,...,f{d-1}`, one record per line.
//! Integer labels mark a classification corpus; any label with a decimal
//! point or exponent makes the whole file a regression corpus.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::model::{Batch, TaskKind, Targets};
use crate::seed;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Label {
    Class(usize),
    Value(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub group: String,
    pub features: Vec<f64>,
    pub label: Label,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    input_dim: usize,
    kind: TaskKind,
    records: Vec<Record>,
}

impl Corpus {
    pub fn new(input_dim: usize, kind: TaskKind, records: Vec<Record>) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if r.features.len() != input_dim {
                return Err(Error::Structure(format!(
                    "record {i} has {} features, corpus width is {input_dim}",
                    r.features.len()
                )));
            }
            match (r.label, kind) {
                (Label::Class(_), TaskKind::Classification) | (Label::Value(_), TaskKind::Regression) => {}
                _ => return Err(Error::Structure(format!("record {i} label kind differs from corpus kind"))),
            }
        }
        Ok(Corpus {
            input_dim,
            kind,
            records,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn kind(&self) -> TaskKind {
        self.kind
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// One more than the largest class label (0 for regression or empty corpora).
    pub fn num_classes(&self) -> usize {
        self.records
            .iter()
            .filter_map(|r| match r.label {
                Label::Class(c) => Some(c + 1),
                Label::Value(_) => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Group ids in first-appearance order.
    pub fn groups(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.records {
            if !out.contains(&r.group) {
                out.push(r.group.clone());
            }
        }
        out
    }

    pub fn has_group(&self, group: &str) -> bool {
        self.records.iter().any(|r| r.group == group)
    }

    /// Record indices of `group`, in file order.
    pub fn group_indices(&self, group: &str) -> Result<Vec<usize>> {
        let idx: Vec<usize> = (0..self.records.len()).filter(|&i| self.records[i].group == group).collect();
        if idx.is_empty() {
            return Err(Error::UnknownGroup(group.to_string()));
        }
        Ok(idx)
    }

    /// Sub-corpus holding only `group`.
    pub fn restrict(&self, group: &str) -> Result<Corpus> {
        let idx = self.group_indices(group)?;
        Ok(self.select(&idx))
    }

    pub fn select(&self, indices: &[usize]) -> Corpus {
        Corpus {
            input_dim: self.input_dim,
            kind: self.kind,
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    /// Materializes the given records as a batch.
    pub fn batch(&self, indices: &[usize]) -> Batch {
        let mut data = Vec::with_capacity(indices.len() * self.input_dim);
        for &i in indices {
            data.extend_from_slice(&self.records[i].features);
        }
        let inputs = Tensor::from_parts(vec![indices.len(), self.input_dim], data);
        let targets = match self.kind {
            TaskKind::Classification => Targets::Classes(
                indices
                    .iter()
                    .map(|&i| match self.records[i].label {
                        Label::Class(c) => c,
                        Label::Value(_) => unreachable!("checked at construction"),
                    })
                    .collect(),
            ),
            TaskKind::Regression => Targets::Values(
                indices
                    .iter()
                    .map(|&i| match self.records[i].label {
                        Label::Value(v) => v,
                        Label::Class(_) => unreachable!("checked at construction"),
                    })
                    .collect(),
            ),
        };
        Batch { inputs, targets }
    }

    pub fn full_batch(&self) -> Batch {
        let all: Vec<usize> = (0..self.len()).collect();
        self.batch(&all)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Corpus> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Corpus> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let Some((_, header)) = lines.next() else {
            return Err(Error::format(path, 1, "missing header"));
        };
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 2 || cols[0] != "group" || cols[1] != "label" {
            return Err(Error::format(path, 1, "header must start with `group,label`"));
        }
        let input_dim = cols.len() - 2;
        for (j, c) in cols[2..].iter().enumerate() {
            if *c != format!("f{j}") {
                return Err(Error::format(path, 1, format!("expected column `f{j}`, found `{c}`")));
            }
        }

        let mut rows = Vec::new();
        let mut any_real = false;
        for (lineno, line) in lines {
            let line_no = lineno + 1;
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != cols.len() {
                return Err(Error::format(
                    path,
                    line_no,
                    format!("expected {} fields, found {}", cols.len(), fields.len()),
                ));
            }
            let group = fields[0];
            if group.is_empty() {
                return Err(Error::format(path, line_no, "empty group id"));
            }
            let label_text = fields[1];
            let label: f64 = label_text
                .parse()
                .map_err(|_| Error::format(path, line_no, format!("bad label `{label_text}`")))?;
            if !label.is_finite() {
                return Err(Error::format(path, line_no, "non-finite label"));
            }
            any_real |= label_text.parse::<usize>().is_err();
            let features = fields[2..]
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::format(path, line_no, format!("bad feature `{f}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push((group.to_string(), label, features));
        }

        let kind = if any_real {
            TaskKind::Regression
        } else {
            TaskKind::Classification
        };
        let records = rows
            .into_iter()
            .map(|(group, label, features)| Record {
                group,
                features,
                label: match kind {
                    TaskKind::Classification => Label::Class(label as usize),
                    TaskKind::Regression => Label::Value(label),
                },
            })
            .collect();
        Corpus::new(input_dim, kind, records)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("group,label");
        for j in 0..self.input_dim {
            let _ = write!(out, ",f{j}");
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.group);
            match r.label {
                Label::Class(c) => {
                    let _ = write!(out, ",{c}");
                }
                Label::Value(v) => {
                    let _ = write!(out, ",{v:?}");
                }
            }
            for f in &r.features {
                let _ = write!(out, ",{f:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Stratum key: group, then class label (regression corpora stratify by group only).
fn stratum(r: &Record) -> (String, Option<usize>) {
    match r.label {
        Label::Class(c) => (r.group.clone(), Some(c)),
        Label::Value(_) => (r.group.clone(), None),
    }
}

/// Uniform sample of `ceil(fraction * n)` records, stratified by (group, class).
///
/// Stratum quotas use largest-remainder rounding so every stratum receives
/// its proportional share rounded down or up. Output keeps file order.
pub fn subsample_fraction(corpus: &Corpus, fraction: f64, seed: u64) -> Result<Corpus> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Argument(format!("fraction {fraction} not in (0, 1]")));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let n = corpus.len();
    let target = ((fraction * n as f64).ceil() as usize).min(n);
    if target == n {
        return Ok(corpus.clone());
    }

    let mut strata: BTreeMap<(String, Option<usize>), Vec<usize>> = BTreeMap::new();
    for (i, r) in corpus.records().iter().enumerate() {
        strata.entry(stratum(r)).or_default().push(i);
    }
    let strata: Vec<Vec<usize>> = strata.into_values().collect();

    let exact: Vec<f64> = strata.iter().map(|s| fraction * s.len() as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|q| q.floor() as usize).collect();
    let mut remaining = target - quota.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..strata.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - quota[a] as f64;
        let rb = exact[b] - quota[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &s in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        if quota[s] < strata[s].len() {
            quota[s] += 1;
            remaining -= 1;
        }
    }

    let mut chosen = Vec::with_capacity(target);
    for (s, members) in strata.iter().enumerate() {
        let mut rng = seed::rng_from(seed, "subsample", &[s as u64]);
        let picks = index::sample(&mut rng, members.len(), quota[s]);
        chosen.extend(picks.into_iter().map(|k| members[k]));
    }
    chosen.sort_unstable();
    Ok(corpus.select(&chosen))
}
