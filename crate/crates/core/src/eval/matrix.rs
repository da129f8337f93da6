use std::fmt::Write as _;
use std::path::Path;

use super::{EvalResult, Metric};
use crate::error::{Error, Result};

/// Target-by-auxiliary table of metric deltas over the baseline.
///
/// `deltas[t][a]` is `None` when target and auxiliary coincide.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaMatrix {
    pub metric: Metric,
    pub targets: Vec<String>,
    pub auxiliaries: Vec<String>,
    pub deltas: Vec<Vec<Option<f64>>>,
    /// One entry per target, in `targets` order.
    pub baseline: Vec<EvalResult>,
}

/// Summary of one row: mean and best absolute score over its defined cells.
#[derive(Clone, Debug, PartialEq)]
pub struct RowAggregate {
    pub target: String,
    pub avg: f64,
    pub max: f64,
    pub argmax: String,
}

impl DeltaMatrix {
    pub fn get(&self, target: &str, aux: &str) -> Option<f64> {
        let t = self.targets.iter().position(|x| x == target)?;
        let a = self.auxiliaries.iter().position(|x| x == aux)?;
        self.deltas[t][a]
    }

    pub fn baseline_of(&self, target: &str) -> Option<&EvalResult> {
        self.baseline.iter().find(|r| r.group_id == target)
    }

    /// `target,<aux...>` header, then one row per target; undefined cells are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("target");
        for a in &self.auxiliaries {
            out.push(',');
            out.push_str(a);
        }
        out.push('\n');
        for (t, row) in self.targets.iter().zip(&self.deltas) {
            out.push_str(t);
            for cell in row {
                out.push(',');
                if let Some(d) = cell {
                    write!(out, "{d:?}").unwrap();
                }
            }
            out.push('\n');
        }
        out
    }

    /// Rebuilds a matrix from [`DeltaMatrix::to_csv`] output plus its baseline.
    pub fn from_csv(text: &str, path: &Path, metric: Metric, baseline: Vec<EvalResult>) -> Result<DeltaMatrix> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::format(path, 1, "missing header"))?;
        let mut cols = header.split(',');
        if cols.next() != Some("target") {
            return Err(Error::format(path, 1, "header must start with `target`"));
        }
        let auxiliaries: Vec<String> = cols.map(str::to_string).collect();
        let mut targets = Vec::new();
        let mut deltas = Vec::new();
        for (i, line) in lines {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != auxiliaries.len() + 1 {
                return Err(Error::format(
                    path,
                    i + 1,
                    format!("expected {} fields, found {}", auxiliaries.len() + 1, cells.len()),
                ));
            }
            targets.push(cells[0].to_string());
            let row = cells[1..]
                .iter()
                .map(|c| {
                    if c.is_empty() {
                        Ok(None)
                    } else {
                        c.parse::<f64>()
                            .map(Some)
                            .map_err(|_| Error::format(path, i + 1, format!("bad number `{c}`")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            deltas.push(row);
        }
        Ok(DeltaMatrix {
            metric,
            targets,
            auxiliaries,
            deltas,
            baseline,
        })
    }

    pub fn aggregate(&self) -> Result<Vec<RowAggregate>> {
        aggregate_avg_max(self)
    }
}

/// Mean and maximum of named scores; ties on the maximum go to the smallest name.
pub fn aggregate_scores(target: &str, scores: &[(String, f64)]) -> Result<RowAggregate> {
    if scores.is_empty() {
        return Err(Error::EmptyRow(target.to_string()));
    }
    let avg = scores.iter().map(|(_, s)| s).sum::<f64>() / scores.len() as f64;
    let (argmax, max) = scores
        .iter()
        .fold(None::<(&String, f64)>, |best, (name, s)| match best {
            Some((bn, bs)) if bs > *s || (bs == *s && bn <= name) => Some((bn, bs)),
            _ => Some((name, *s)),
        })
        .expect("non-empty");
    Ok(RowAggregate {
        target: target.to_string(),
        avg,
        max,
        argmax: argmax.clone(),
    })
}

/// Per-target AVG and MAX of absolute scores (baseline plus delta) over defined cells.
pub fn aggregate_avg_max(matrix: &DeltaMatrix) -> Result<Vec<RowAggregate>> {
    matrix
        .targets
        .iter()
        .zip(&matrix.deltas)
        .map(|(t, row)| {
            let base = matrix
                .baseline_of(t)
                .ok_or_else(|| Error::Argument(format!("no baseline for target `{t}`")))?
                .value;
            let scores: Vec<(String, f64)> = matrix
                .auxiliaries
                .iter()
                .zip(row)
                .filter_map(|(a, d)| d.map(|d| (a.clone(), base + d)))
                .collect();
            aggregate_scores(t, &scores)
        })
        .collect()
}

/// `target,avg,max,argmax_aux`
pub fn write_aggregates_csv(rows: &[RowAggregate]) -> String {
    let mut out = String::from("target,avg,max,argmax_aux\n");
    for r in rows {
        writeln!(out, "{},{:?},{:?},{}", r.target, r.avg, r.max, r.argmax).unwrap();
    }
    out
}

/// `target,metric,value,num_runs,run_0,...` with one row per result.
pub fn write_eval_results_csv(results: &[EvalResult]) -> String {
    let runs = results.iter().map(|r| r.per_run_values.len()).max().unwrap_or(0);
    let mut out = String::from("target,metric,value,num_runs");
    for i in 0..runs {
        write!(out, ",run_{i}").unwrap();
    }
    out.push('\n');
    for r in results {
        write!(out, "{},{},{:?},{}", r.group_id, r.metric, r.value, r.num_runs).unwrap();
        for i in 0..runs {
            out.push(',');
            if let Some(v) = r.per_run_values.get(i) {
                write!(out, "{v:?}").unwrap();
            }
        }
        out.push('\n');
    }
    out
}

pub fn read_eval_results_csv(text: &str, path: &Path) -> Result<Vec<EvalResult>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::format(path, 1, "missing header"))?;
    if !header.starts_with("target,metric,value,num_runs") {
        return Err(Error::format(path, 1, "unexpected header"));
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() < 4 {
            return Err(Error::format(path, i + 1, "too few fields"));
        }
        let metric: Metric = cells[1].parse().map_err(|e: Error| Error::format(path, i + 1, e.to_string()))?;
        let num = |c: &str| c.parse::<f64>().map_err(|_| Error::format(path, i + 1, format!("bad number `{c}`")));
        let value = num(cells[2])?;
        let runs = cells[4..]
            .iter()
            .filter(|c| !c.is_empty())
            .map(|c| num(c))
            .collect::<Result<Vec<_>>>()?;
        let num_runs: usize = cells[3]
            .parse()
            .map_err(|_| Error::format(path, i + 1, "bad run count"))?;
        if runs.len() != num_runs {
            return Err(Error::format(
                path,
                i + 1,
                format!("{num_runs} runs declared, {} listed", runs.len()),
            ));
        }
        out.push(EvalResult {
            group_id: cells[0].to_string(),
            metric,
            value,
            num_runs,
            per_run_values: runs,
        });
    }
    Ok(out)
}
