//! Run artifacts. Everything is buffered and written in one go at the end,
//! so a run that fails early leaves no partial output directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use kcnet::doa::DoaHistory;
use kcnet::eval::mean_std;
use kcnet::EvalReport;
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub struct RunOutput {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl RunOutput {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            files: Vec::new(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn file_names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn commit(self) -> CliResult<PathBuf> {
        fs::create_dir_all(&self.dir).map_err(CliError::file(&self.dir))?;
        for (name, bytes) in &self.files {
            let path = self.dir.join(name);
            fs::write(&path, bytes).map_err(CliError::file(&path))?;
        }
        Ok(self.dir)
    }
}

fn csv_bytes<R: Serialize>(rows: impl IntoIterator<Item = R>) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Usage(e.to_string()))
}

/// One JSON object per report.
pub fn reports_jsonl(reports: &[EvalReport]) -> CliResult<Vec<u8>> {
    let mut out = Vec::new();
    for r in reports {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub model: String,
    pub hidden_dim: usize,
    pub reps: usize,
    pub accuracy_mean: f64,
    pub accuracy_sd: f64,
    pub weighted_f1_mean: f64,
    pub weighted_f1_sd: f64,
    pub configure_s_mean: f64,
    pub train_s_mean: f64,
    pub evaluate_s_mean: f64,
    pub total_s_mean: f64,
}

/// Replicate means and sample deviations, one row per `(model, hidden_dim)`.
pub fn summarize(reports: &[EvalReport]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, usize), Vec<&EvalReport>> = BTreeMap::new();
    for r in reports {
        groups.entry((r.model.clone(), r.hidden_dim)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((model, hidden_dim), rs)| {
            let col = |f: fn(&EvalReport) -> f64| mean_std(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (accuracy_mean, accuracy_sd) = col(|r| r.accuracy);
            let (weighted_f1_mean, weighted_f1_sd) = col(|r| r.weighted_f1);
            SummaryRow {
                model,
                hidden_dim,
                reps: rs.len(),
                accuracy_mean,
                accuracy_sd,
                weighted_f1_mean,
                weighted_f1_sd,
                configure_s_mean: col(|r| r.timings.configure_s).0,
                train_s_mean: col(|r| r.timings.train_s).0,
                evaluate_s_mean: col(|r| r.timings.evaluate_s).0,
                total_s_mean: col(|r| r.timings.total()).0,
            }
        })
        .collect()
}

pub fn summary_csv(reports: &[EvalReport]) -> CliResult<Vec<u8>> {
    csv_bytes(summarize(reports))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoryRow {
    pub rep: usize,
    pub submodel: usize,
    pub epoch: usize,
    pub val_metric: f64,
    pub flipped: usize,
    pub connections: usize,
}

pub fn history_rows(rep: usize, submodel: usize, h: &DoaHistory) -> impl Iterator<Item = HistoryRow> + '_ {
    h.epochs.iter().map(move |e| HistoryRow {
        rep,
        submodel,
        epoch: e.epoch,
        val_metric: e.val_metric,
        flipped: e.flipped,
        connections: e.connections,
    })
}

pub fn history_csv(rows: &[HistoryRow]) -> CliResult<Vec<u8>> {
    csv_bytes(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub model: String,
    pub hidden_dim: usize,
    pub seed: u64,
    pub configure_s: f64,
    pub train_s: f64,
    pub evaluate_s: f64,
    pub total_s: f64,
    pub accuracy: f64,
}

impl From<&EvalReport> for BenchRow {
    fn from(r: &EvalReport) -> Self {
        Self {
            model: r.model.clone(),
            hidden_dim: r.hidden_dim,
            seed: r.seed,
            configure_s: r.timings.configure_s,
            train_s: r.timings.train_s,
            evaluate_s: r.timings.evaluate_s,
            total_s: r.timings.total(),
            accuracy: r.accuracy,
        }
    }
}

pub fn bench_csv(reports: &[EvalReport]) -> CliResult<Vec<u8>> {
    csv_bytes(reports.iter().map(BenchRow::from))
}

#[cfg(test)]
mod tests {
    use super::*;
    use kcnet::PhaseTimings;

    fn report(model: &str, b: usize, seed: u64, pred: &[usize]) -> EvalReport {
        let t = PhaseTimings {
            configure_s: 1.0,
            train_s: 2.0,
            evaluate_s: 0.5,
        };
        EvalReport::new(model, b, seed, pred, &[0, 1, 1, 0], 2, t).unwrap()
    }

    #[test]
    fn summary_groups_and_averages() {
        let rs = vec![
            report("kcnet", 10, 0, &[0, 1, 1, 0]),
            report("kcnet", 10, 1, &[0, 1, 0, 0]),
            report("elm", 10, 0, &[0, 1, 1, 0]),
        ];
        let s = summarize(&rs);
        assert_eq!(s.len(), 2);
        let k = s.iter().find(|r| r.model == "kcnet").unwrap();
        assert_eq!(k.reps, 2);
        assert!((k.accuracy_mean - 0.875).abs() < 1e-12);
        assert!((k.total_s_mean - 3.5).abs() < 1e-12);
        let text = String::from_utf8(summary_csv(&rs).unwrap()).unwrap();
        assert!(text.starts_with(
            "model,hidden_dim,reps,accuracy_mean,accuracy_sd,weighted_f1_mean,weighted_f1_sd,configure_s_mean,train_s_mean,evaluate_s_mean,total_s_mean\n"
        ));
    }

    #[test]
    fn nothing_written_before_commit() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("run");
        let mut out = RunOutput::new(&dir);
        out.add("a.txt", b"x".to_vec());
        assert!(!dir.exists());
        out.commit().unwrap();
        assert_eq!(fs::read(dir.join("a.txt")).unwrap(), b"x");
    }

    #[test]
    fn jsonl_one_line_per_report() {
        let rs = vec![report("kcnet", 4, 0, &[0, 0, 0, 0]), report("kcnet", 4, 1, &[1, 1, 1, 1])];
        let text = String::from_utf8(reports_jsonl(&rs).unwrap()).unwrap();
        assert_eq!(text.lines().count(), 2);
        let v: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(v["accuracy"], 0.5);
    }
}
