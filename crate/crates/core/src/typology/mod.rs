//! Predicting typological features from transfer deltas.

mod conditions;
mod logistic;
mod stats;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub use conditions::{
    baseline_distributional, baseline_most_frequent, condition_match_prediction, condition_value_prediction,
    planted_typology, run_feature_scan, Condition, ConditionConfig, ConditionOutcome, PlantedSignal, PlantedSpec,
    ScanReport, TestResult,
};
pub use logistic::{fit_logistic, LogisticModel};
pub use stats::{bonferroni, ln_gamma, paired_t_test, reg_inc_beta, student_t_two_sided, TTest};

use crate::error::{Error, Result};

/// Categorical feature values per language; cells may be absent.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TypologyTable {
    languages: Vec<String>,
    features: Vec<String>,
    values: HashMap<(String, String), String>,
}

impl TypologyTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a cell; returns the previous value if the cell was already set.
    pub fn insert(&mut self, language: &str, feature: &str, value: &str) -> Option<String> {
        if !self.languages.iter().any(|l| l == language) {
            self.languages.push(language.to_string());
        }
        if !self.features.iter().any(|f| f == feature) {
            self.features.push(feature.to_string());
        }
        self.values
            .insert((language.to_string(), feature.to_string()), value.to_string())
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn num_cells(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, language: &str, feature: &str) -> Option<&str> {
        self.values
            .get(&(language.to_string(), feature.to_string()))
            .map(String::as_str)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TypologyTable> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parses `language,feature,value` CSV.
    pub fn parse(text: &str, path: &Path) -> Result<TypologyTable> {
        let mut table = TypologyTable::new();
        let mut seen: HashMap<(String, String), usize> = HashMap::new();
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "language,feature,value" => {}
            _ => return Err(Error::format(path, 1, "header must be `language,feature,value`")),
        }
        for (i, line) in lines {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != 3 || cells.iter().any(|c| c.is_empty()) {
                return Err(Error::format(path, line_no, "expected three non-empty fields"));
            }
            let key = (cells[0].to_string(), cells[1].to_string());
            if let Some(&first_line) = seen.get(&key) {
                return Err(Error::DuplicateCell {
                    language: key.0,
                    feature: key.1,
                    first_line,
                    second_line: line_no,
                });
            }
            seen.insert(key, line_no);
            table.insert(cells[0], cells[1], cells[2]);
        }
        Ok(table)
    }

    /// Cells in language-then-feature insertion order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("language,feature,value\n");
        for l in &self.languages {
            for f in &self.features {
                if let Some(v) = self.get(l, f) {
                    writeln!(out, "{l},{f},{v}").unwrap();
                }
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
