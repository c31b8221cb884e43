use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ReportError;
use crate::ledger::EntryLabel;
use crate::scoring::ScoreRecord;

/// Mean and population standard deviation of AS for one entry class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub label: EntryLabel,
    pub count: usize,
    pub mean: f64,
    pub std_dev: f64,
}

/// Classes present in a scored table, ordered global, local, regular.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScoreSummary {
    pub classes: Vec<ClassScore>,
}

impl ClassScoreSummary {
    pub fn get(&self, label: EntryLabel) -> Option<&ClassScore> {
        self.classes.iter().find(|c| c.label == label)
    }

    pub fn total(&self) -> usize {
        self.classes.iter().map(|c| c.count).sum()
    }
}

fn labels_of(records: &[ScoreRecord]) -> Result<Vec<EntryLabel>, ReportError> {
    records
        .iter()
        .map(|r| r.label.ok_or(ReportError::MissingLabels))
        .collect()
}

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn per_class_mean_scores(records: &[ScoreRecord]) -> Result<ClassScoreSummary, ReportError> {
    let labels = labels_of(records)?;
    let classes = EntryLabel::ALL
        .into_iter()
        .filter_map(|label| {
            let values: Vec<f64> = records
                .iter()
                .zip(&labels)
                .filter(|(_, l)| **l == label)
                .map(|(r, _)| r.score)
                .collect();
            if values.is_empty() {
                return None;
            }
            let (mean, std_dev) = mean_and_sd(&values);
            Some(ClassScore {
                label,
                count: values.len(),
                mean,
                std_dev,
            })
        })
        .collect();
    Ok(ClassScoreSummary { classes })
}

/// Per-class mean of the per-run means and their population standard
/// deviation across runs (for example one run per seed).
pub fn aggregate_runs(runs: &[ClassScoreSummary]) -> ClassScoreSummary {
    let classes = EntryLabel::ALL
        .into_iter()
        .filter_map(|label| {
            let found: Vec<&ClassScore> = runs.iter().filter_map(|r| r.get(label)).collect();
            if found.is_empty() {
                return None;
            }
            let means: Vec<f64> = found.iter().map(|c| c.mean).collect();
            let (mean, std_dev) = mean_and_sd(&means);
            Some(ClassScore {
                label,
                count: found.iter().map(|c| c.count).sum(),
                mean,
                std_dev,
            })
        })
        .collect();
    ClassScoreSummary { classes }
}

#[derive(Debug, Serialize, Deserialize)]
struct SummaryRow<'a> {
    run: &'a str,
    class: EntryLabel,
    count: usize,
    mean_as: f64,
    sd_as: f64,
}

/// One row per run and class, then `all` rows aggregating across runs
/// when there is more than one run.
pub fn write_summary_csv(path: impl AsRef<Path>, runs: &[(String, ClassScoreSummary)]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut emit = |run: &str, summary: &ClassScoreSummary| -> Result<(), ReportError> {
        for c in &summary.classes {
            w.serialize(SummaryRow {
                run,
                class: c.label,
                count: c.count,
                mean_as: c.mean,
                sd_as: c.std_dev,
            })?;
        }
        Ok(())
    };
    for (name, summary) in runs {
        emit(name, summary)?;
    }
    if runs.len() > 1 {
        let all: Vec<ClassScoreSummary> = runs.iter().map(|(_, s)| s.clone()).collect();
        emit("all", &aggregate_runs(&all))?;
    }
    w.flush()?;
    Ok(())
}

fn by_rank(a: &ScoreRecord, b: &ScoreRecord) -> Ordering {
    b.score.total_cmp(&a.score).then(a.id.cmp(&b.id))
}

/// Highest AS first, ties by ascending id, optionally restricted to one
/// closest mode (1-based).
pub fn rank_entries(records: &[ScoreRecord], top_n: usize, mode: Option<usize>) -> Vec<ScoreRecord> {
    let mut selected: Vec<&ScoreRecord> = records
        .iter()
        .filter(|r| mode.is_none_or(|m| r.closest_mode == m))
        .collect();
    selected.sort_by(|a, b| by_rank(a, b));
    selected.into_iter().take(top_n).cloned().collect()
}

/// Area under the ROC curve with ties counted as one half.
///
/// Accumulates `2 * (#lower negatives) + (#tied negatives)` per positive
/// as an integer, so the result is a single rounding of an exact ratio.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Result<f64, ReportError> {
    if scores.len() != positive.len() {
        return Err(ReportError::Argument(format!(
            "{} scores for {} labels",
            scores.len(),
            positive.len()
        )));
    }
    let mut negatives: Vec<f64> = scores.iter().zip(positive).filter(|(_, p)| !**p).map(|(s, _)| *s).collect();
    let n_pos = positive.iter().filter(|p| **p).count();
    if n_pos == 0 || negatives.is_empty() {
        return Err(ReportError::SingleClass);
    }
    negatives.sort_by(f64::total_cmp);
    let mut doubled: u128 = 0;
    for (s, _) in scores.iter().zip(positive).filter(|(_, p)| **p) {
        let below = negatives.partition_point(|v| v.total_cmp(s) == Ordering::Less);
        let not_above = negatives.partition_point(|v| v.total_cmp(s) != Ordering::Greater);
        doubled += 2 * below as u128 + (not_above - below) as u128;
    }
    Ok(doubled as f64 / (2 * n_pos as u128 * negatives.len() as u128) as f64)
}

/// Share of anomalies among the `k` highest-ranked entries (fewer if the
/// table is smaller).
pub fn precision_at_k(records: &[ScoreRecord], k: usize) -> Result<f64, ReportError> {
    labels_of(records)?;
    let top = rank_entries(records, k, None);
    if top.is_empty() {
        return Err(ReportError::Argument("precision at k needs k > 0 and a non-empty table".into()));
    }
    let hits = top.iter().filter(|r| r.label.is_some_and(|l| l.is_anomaly())).count();
    Ok(hits as f64 / top.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingMetrics {
    pub auc: f64,
    /// `(k, precision)` pairs.
    pub precision: Vec<(usize, f64)>,
    pub anomalies: usize,
    pub regular: usize,
}

pub const PRECISION_KS: [usize; 3] = [25, 50, 100];

/// ROC-AUC of global and local anomalies against regular entries, plus
/// precision at 25, 50 and 100.
pub fn auc_and_precision_at_k(records: &[ScoreRecord]) -> Result<RankingMetrics, ReportError> {
    let labels = labels_of(records)?;
    let positive: Vec<bool> = labels.iter().map(|l| l.is_anomaly()).collect();
    let scores: Vec<f64> = records.iter().map(|r| r.score).collect();
    let auc = roc_auc(&scores, &positive)?;
    let precision = PRECISION_KS
        .iter()
        .map(|&k| Ok((k, precision_at_k(records, k)?)))
        .collect::<Result<_, ReportError>>()?;
    let anomalies = positive.iter().filter(|p| **p).count();
    Ok(RankingMetrics {
        auc,
        precision,
        anomalies,
        regular: records.len() - anomalies,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct ScoreRow {
    id: u64,
    closest_mode: usize,
    divergence: f64,
    md: f64,
    error: f64,
    re: f64,
    #[serde(rename = "as")]
    score: f64,
    z1: f64,
    z2: f64,
    label: Option<EntryLabel>,
}

/// One row per entry; `label` is empty when unknown.
pub fn write_score_csv(path: impl AsRef<Path>, records: &[ScoreRecord]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(ScoreRow {
            id: r.id,
            closest_mode: r.closest_mode,
            divergence: r.divergence,
            md: r.md,
            error: r.error,
            re: r.re,
            score: r.score,
            z1: r.latent[0],
            z2: r.latent[1],
            label: r.label,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_score_csv(path: impl AsRef<Path>) -> Result<Vec<ScoreRecord>, ReportError> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| {
            let row: ScoreRow = row?;
            Ok(ScoreRecord {
                id: row.id,
                closest_mode: row.closest_mode,
                divergence: row.divergence,
                md: row.md,
                error: row.error,
                re: row.re,
                score: row.score,
                latent: [row.z1, row.z2],
                label: row.label,
            })
        })
        .collect()
}
