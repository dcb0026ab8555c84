//! Report rendering over a persisted run directory: metric tables, the
//! model-by-topic accuracy matrix, per-prompt accuracies, error-type
//! breakdowns, and the ablation table.
//!
//! Rendering is a pure function of the run directory contents; report files
//! are written under `<run>/reports/` and never touch run data.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{read_jsonl, Label};
use crate::metrics::{ErrorBreakdown, ErrorType};
use crate::orchestrator::{AblationRow, MetricsRow, VoteLine};
use crate::prompts::PromptKind;

/// The renderable outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportOutput {
    MetricsTable,
    HeatmapMatrix,
    PromptAccuracy,
    ErrorTypes,
    AblationTable,
}

impl ReportOutput {
    pub fn file_stem(&self) -> &'static str {
        match self {
            ReportOutput::MetricsTable => "metrics_table",
            ReportOutput::HeatmapMatrix => "heatmap_matrix",
            ReportOutput::PromptAccuracy => "prompt_accuracy",
            ReportOutput::ErrorTypes => "error_types",
            ReportOutput::AblationTable => "ablation_table",
        }
    }
}

impl FromStr for ReportOutput {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "metrics_table" => Ok(ReportOutput::MetricsTable),
            "heatmap_matrix" => Ok(ReportOutput::HeatmapMatrix),
            "prompt_accuracy" => Ok(ReportOutput::PromptAccuracy),
            "error_types" => Ok(ReportOutput::ErrorTypes),
            "ablation_table" => Ok(ReportOutput::AblationTable),
            _ => Err(format!("unknown report output: {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Csv,
    Markdown,
}

impl ReportFormat {
    fn extension(&self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "md",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            _ => Err(format!("unknown report format: {s:?} (use csv|markdown)")),
        }
    }
}

/// Grouping axis for the error-type breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorGrouping {
    #[default]
    Prompt,
    Topic,
    Model,
}

impl FromStr for ErrorGrouping {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "prompt" => Ok(ErrorGrouping::Prompt),
            "topic" => Ok(ErrorGrouping::Topic),
            "model" => Ok(ErrorGrouping::Model),
            _ => Err(format!("unknown grouping: {s:?} (use prompt|topic|model)")),
        }
    }
}

/// What to render from which run.
#[derive(Debug, Clone)]
pub struct ReportSpec {
    pub run_dir: PathBuf,
    pub outputs: Vec<ReportOutput>,
    pub format: ReportFormat,
    /// Metrics mode feeding the heatmap; default averages the base prompts.
    pub heatmap_mode: Option<String>,
    pub group_by: ErrorGrouping,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("missing data: {0}")]
    MissingData(String),
    #[error("io error at {path}: {detail}")]
    Io { path: String, detail: String },
    #[error("malformed file {path}: {detail}")]
    Malformed { path: String, detail: String },
}

fn io_error(path: &Path, detail: impl fmt::Display) -> ReportError {
    ReportError::Io {
        path: path.display().to_string(),
        detail: detail.to_string(),
    }
}

/// Percent with one decimal, half-up, as printed in the tables.
pub fn percent(value: f64) -> String {
    format!("{:.1}", (value * 1000.0).round() / 10.0)
}

fn load_metrics(run_dir: &Path) -> Result<Vec<MetricsRow>, ReportError> {
    let path = run_dir.join("metrics.csv");
    if !path.exists() {
        return Err(ReportError::MissingData(format!(
            "metrics.csv not found in {}",
            run_dir.display()
        )));
    }
    let mut reader = csv::Reader::from_path(&path).map_err(|e| io_error(&path, e))?;
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row.map_err(|e| ReportError::Malformed {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?);
    }
    Ok(rows)
}

fn first_seen<T: Clone + PartialEq>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut seen = Vec::new();
    for item in items {
        if !seen.contains(&item) {
            seen.push(item);
        }
    }
    seen
}

fn group_label(row: &MetricsRow) -> String {
    format!("{}/{}", row.dataset, row.topic)
}

fn md_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&format!("| {} |\n", header.join(" | ")));
    out.push_str(&format!(
        "|{}\n",
        header.iter().map(|_| " --- |").collect::<String>()
    ));
    for row in rows {
        out.push_str(&format!("| {} |\n", row.join(" | ")));
    }
    out
}

fn csv_line(fields: &[String]) -> String {
    let quoted: Vec<String> = fields
        .iter()
        .map(|f| {
            if f.contains(',') || f.contains('"') || f.contains('\n') {
                format!("\"{}\"", f.replace('"', "\"\""))
            } else {
                f.clone()
            }
        })
        .collect();
    quoted.join(",")
}

fn tabulate(format: ReportFormat, header: Vec<String>, rows: Vec<Vec<String>>) -> String {
    match format {
        ReportFormat::Csv => {
            let mut out = csv_line(&header);
            out.push('\n');
            for row in rows {
                out.push_str(&csv_line(&row));
                out.push('\n');
            }
            out
        }
        ReportFormat::Markdown => md_table(&header, &rows),
    }
}

/// Model-by-topic accuracy matrix (rows: models, columns: dataset topics,
/// cells: percent with one decimal). Row and column order follow the run's
/// metrics table, which follows the config.
pub fn render_heatmap_matrix(
    rows: &[MetricsRow],
    mode: Option<&str>,
    format: ReportFormat,
) -> Result<String, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::MissingData(
            "the run has no metric rows".to_string(),
        ));
    }
    // Only models and groups with rows for the selected mode become matrix
    // axes (the ensemble pseudo-model, for instance, has no per-prompt rows).
    let relevant: Vec<&MetricsRow> = rows
        .iter()
        .filter(|r| match mode {
            Some(mode) => r.mode == mode,
            None => r.mode == "Certainty" || PromptKind::BASE.iter().any(|k| k.as_str() == r.mode),
        })
        .collect();
    if relevant.is_empty() {
        return Err(ReportError::MissingData(match mode {
            Some(mode) => format!("the run has no {mode} metric rows"),
            None => "the run has no per-prompt or Certainty metric rows".to_string(),
        }));
    }
    let models = first_seen(relevant.iter().map(|r| r.model.clone()));
    let groups = first_seen(relevant.iter().map(|r| group_label(r)));

    let accuracy_for = |model: &str, group: &str| -> Result<f64, ReportError> {
        let cell_rows: Vec<&MetricsRow> = rows
            .iter()
            .filter(|r| r.model == model && group_label(r) == group)
            .collect();
        if let Some(mode) = mode {
            return cell_rows
                .iter()
                .find(|r| r.mode == mode)
                .map(|r| r.accuracy)
                .ok_or_else(|| {
                    ReportError::MissingData(format!(
                        "no {mode} metrics for model {model} on {group}"
                    ))
                });
        }
        let base: Vec<f64> = PromptKind::BASE
            .iter()
            .filter_map(|kind| {
                cell_rows
                    .iter()
                    .find(|r| r.mode == kind.as_str())
                    .map(|r| r.accuracy)
            })
            .collect();
        if !base.is_empty() {
            return Ok(base.iter().sum::<f64>() / base.len() as f64);
        }
        cell_rows
            .iter()
            .find(|r| r.mode == "Certainty")
            .map(|r| r.accuracy)
            .ok_or_else(|| {
                ReportError::MissingData(format!(
                    "no per-prompt or Certainty metrics for model {model} on {group}; \
                     pass an explicit mode"
                ))
            })
    };

    let mut header = vec!["model".to_string()];
    header.extend(groups.iter().cloned());
    let mut body = Vec::new();
    for model in &models {
        let mut row = vec![model.clone()];
        for group in &groups {
            row.push(percent(accuracy_for(model, group)?));
        }
        body.push(row);
    }
    Ok(tabulate(format, header, body))
}

/// Per-prompt accuracy rows (the data behind per-prompt distribution plots).
pub fn render_prompt_accuracy(
    rows: &[MetricsRow],
    format: ReportFormat,
) -> Result<String, ReportError> {
    let prompt_rows: Vec<&MetricsRow> = rows
        .iter()
        .filter(|r| PromptKind::BASE.iter().any(|k| k.as_str() == r.mode))
        .collect();
    if prompt_rows.is_empty() {
        return Err(ReportError::MissingData(
            "the run has no per-prompt metric rows".to_string(),
        ));
    }
    let header = ["dataset", "topic", "model", "prompt", "accuracy"]
        .map(String::from)
        .to_vec();
    let body: Vec<Vec<String>> = prompt_rows
        .iter()
        .map(|r| {
            vec![
                r.dataset.clone(),
                r.topic.clone(),
                r.model.clone(),
                r.mode.clone(),
                percent(r.accuracy),
            ]
        })
        .collect();
    Ok(tabulate(format, header, body))
}

/// Metric tables, one per measure, rows keyed by (dataset/topic, mode) with
/// one column per model.
pub fn render_metrics_table(
    rows: &[MetricsRow],
    format: ReportFormat,
) -> Result<String, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::MissingData(
            "the run has no metric rows".to_string(),
        ));
    }
    if format == ReportFormat::Csv {
        let header = [
            "dataset",
            "topic",
            "model",
            "mode",
            "accuracy",
            "precision",
            "recall",
            "f1",
        ]
        .map(String::from)
        .to_vec();
        let body = rows
            .iter()
            .map(|r| {
                vec![
                    r.dataset.clone(),
                    r.topic.clone(),
                    r.model.clone(),
                    r.mode.clone(),
                    percent(r.accuracy),
                    percent(r.precision),
                    percent(r.recall),
                    percent(r.f1),
                ]
            })
            .collect();
        return Ok(tabulate(format, header, body));
    }

    let models = first_seen(rows.iter().map(|r| r.model.clone()));
    let keys = first_seen(rows.iter().map(|r| (group_label(r), r.mode.clone())));
    let mut out = String::new();
    for (title, pick) in [
        ("Accuracy", 0usize),
        ("Precision", 1),
        ("Recall", 2),
        ("F1", 3),
    ] {
        out.push_str(&format!("### {title} (percent)\n\n"));
        let mut header = vec!["group".to_string(), "mode".to_string()];
        header.extend(models.iter().cloned());
        let mut body = Vec::new();
        for (group, mode) in &keys {
            let mut line = vec![group.clone(), mode.clone()];
            for model in &models {
                let cell = rows
                    .iter()
                    .find(|r| &group_label(r) == group && &r.mode == mode && &r.model == model)
                    .map(|r| {
                        percent(match pick {
                            0 => r.accuracy,
                            1 => r.precision,
                            2 => r.recall,
                            _ => r.f1,
                        })
                    })
                    .unwrap_or_else(|| "-".to_string());
                line.push(cell);
            }
            body.push(line);
        }
        out.push_str(&md_table(&header, &body));
        out.push('\n');
    }
    Ok(out)
}

fn load_votes(run_dir: &Path) -> Result<Vec<VoteLine>, ReportError> {
    let path = run_dir.join("votes.jsonl");
    if !path.exists() {
        return Err(ReportError::MissingData(format!(
            "votes.jsonl not found in {}",
            run_dir.display()
        )));
    }
    let data = std::fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
    let mut votes = Vec::new();
    for (i, line) in data.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        votes.push(
            serde_json::from_str(line).map_err(|e| ReportError::Malformed {
                path: path.display().to_string(),
                detail: format!("line {}: {e}", i + 1),
            })?,
        );
    }
    Ok(votes)
}

/// Gold labels and group keys from the persisted sample.
fn load_gold(run_dir: &Path) -> Result<BTreeMap<String, (Label, String)>, ReportError> {
    let path = run_dir.join("sample.jsonl");
    if !path.exists() {
        return Err(ReportError::MissingData(format!(
            "sample.jsonl not found in {}",
            run_dir.display()
        )));
    }
    let records = read_jsonl(&path).map_err(|e| ReportError::Malformed {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    Ok(records
        .into_iter()
        .map(|r| {
            let group = format!("{}/{}", r.dataset, r.topic);
            (r.id, (r.gold, group))
        })
        .collect())
}

/// Error-type proportions per group (prompt kind, topic, or model), one row
/// per group value; each row's proportions sum to 1. An all-correct run
/// yields only the header.
pub fn render_error_types(
    run_dir: &Path,
    group_by: ErrorGrouping,
    format: ReportFormat,
) -> Result<String, ReportError> {
    let votes = load_votes(run_dir)?;
    let gold = load_gold(run_dir)?;

    let mut breakdowns: BTreeMap<String, ErrorBreakdown> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for vote in &votes {
        let Some((gold_label, group)) = gold.get(&vote.record_id) else {
            continue;
        };
        let Some(predicted) = vote.label else {
            continue;
        };
        let key = match group_by {
            ErrorGrouping::Prompt => vote.kind.to_string(),
            ErrorGrouping::Topic => group.clone(),
            ErrorGrouping::Model => vote.model.clone(),
        };
        if !order.contains(&key) {
            order.push(key.clone());
        }
        breakdowns
            .entry(key)
            .or_default()
            .observe(*gold_label, predicted);
    }

    let mut header = vec!["group".to_string()];
    header.extend(ErrorType::ALL.iter().map(|t| t.to_string()));
    let mut body = Vec::new();
    for key in order {
        let breakdown = &breakdowns[&key];
        if breakdown.is_empty() {
            continue;
        }
        let mut row = vec![key];
        for error_type in ErrorType::ALL {
            row.push(format!("{:.6}", breakdown.proportion(error_type)));
        }
        body.push(row);
    }
    Ok(tabulate(format, header, body))
}

fn load_ablation(run_dir: &Path) -> Result<Vec<AblationRow>, ReportError> {
    let path = run_dir.join("ablation.csv");
    if !path.exists() {
        return Err(ReportError::MissingData(format!(
            "ablation.csv not found in {} (run the ablation first)",
            run_dir.display()
        )));
    }
    let mut reader = csv::Reader::from_path(&path).map_err(|e| io_error(&path, e))?;
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row.map_err(|e| ReportError::Malformed {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?);
    }
    Ok(rows)
}

/// The leave-one-out ablation table in percent form.
pub fn render_ablation_table(run_dir: &Path, format: ReportFormat) -> Result<String, ReportError> {
    let rows = load_ablation(run_dir)?;
    if rows.is_empty() {
        return Err(ReportError::MissingData(
            "the ablation table is empty".to_string(),
        ));
    }
    let header = [
        "dataset", "topic", "model", "P2_3_4", "P1_3_4", "P1_2_4", "P1_2_3", "avg", "P1_2_3_4",
    ]
    .map(String::from)
    .to_vec();
    let body = rows
        .iter()
        .map(|r| {
            vec![
                r.dataset.clone(),
                r.topic.clone(),
                r.model.clone(),
                percent(r.p2_3_4),
                percent(r.p1_3_4),
                percent(r.p1_2_4),
                percent(r.p1_2_3),
                percent(r.avg),
                percent(r.p1_2_3_4),
            ]
        })
        .collect();
    Ok(tabulate(format, header, body))
}

/// Renders every requested output into `<run>/reports/`, returning the
/// written paths in request order.
pub fn write_reports(spec: &ReportSpec) -> Result<Vec<PathBuf>, ReportError> {
    let metrics = if spec.outputs.iter().any(|o| {
        matches!(
            o,
            ReportOutput::MetricsTable | ReportOutput::HeatmapMatrix | ReportOutput::PromptAccuracy
        )
    }) {
        Some(load_metrics(&spec.run_dir)?)
    } else {
        None
    };

    let reports_dir = spec.run_dir.join("reports");
    std::fs::create_dir_all(&reports_dir).map_err(|e| io_error(&reports_dir, e))?;

    let mut written = Vec::new();
    for output in &spec.outputs {
        let content = match output {
            ReportOutput::MetricsTable => {
                render_metrics_table(metrics.as_ref().unwrap(), spec.format)?
            }
            ReportOutput::HeatmapMatrix => render_heatmap_matrix(
                metrics.as_ref().unwrap(),
                spec.heatmap_mode.as_deref(),
                spec.format,
            )?,
            ReportOutput::PromptAccuracy => {
                render_prompt_accuracy(metrics.as_ref().unwrap(), spec.format)?
            }
            ReportOutput::ErrorTypes => {
                render_error_types(&spec.run_dir, spec.group_by, spec.format)?
            }
            ReportOutput::AblationTable => render_ablation_table(&spec.run_dir, spec.format)?,
        };
        let path = reports_dir.join(format!(
            "{}.{}",
            output.file_stem(),
            spec.format.extension()
        ));
        std::fs::write(&path, content).map_err(|e| io_error(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(model: &str, topic: &str, mode: &str, accuracy: f64) -> MetricsRow {
        MetricsRow {
            dataset: "ukp".to_string(),
            topic: topic.to_string(),
            model: model.to_string(),
            mode: mode.to_string(),
            accuracy,
            precision: accuracy,
            recall: accuracy,
            f1: accuracy,
        }
    }

    #[test]
    fn heatmap_single_cell_formats_percent() {
        let rows = vec![row("m1", "t1", "Certainty", 0.825)];
        let csv = render_heatmap_matrix(&rows, Some("Certainty"), ReportFormat::Csv).unwrap();
        assert_eq!(csv, "model,ukp/t1\nm1,82.5\n");
    }

    #[test]
    fn heatmap_defaults_to_base_prompt_average() {
        let rows = vec![
            row("m1", "t1", "P1", 0.80),
            row("m1", "t1", "P2", 0.60),
            row("m1", "t1", "P3", 0.70),
            row("m1", "t1", "P4", 0.90),
        ];
        let csv = render_heatmap_matrix(&rows, None, ReportFormat::Csv).unwrap();
        assert_eq!(csv, "model,ukp/t1\nm1,75.0\n");
    }

    #[test]
    fn heatmap_missing_mode_is_precise() {
        // No rows at all for the requested mode: named at the run level.
        let rows = vec![row("m1", "t1", "P1", 0.8)];
        let err = render_heatmap_matrix(&rows, Some("CoT"), ReportFormat::Csv).unwrap_err();
        assert!(err.to_string().contains("CoT"), "{err}");

        // A hole in an otherwise-present mode: named per cell.
        let rows = vec![
            row("m1", "t1", "CoT", 0.8),
            row("m1", "t2", "CoT", 0.7),
            row("m2", "t1", "CoT", 0.6),
        ];
        let err = render_heatmap_matrix(&rows, Some("CoT"), ReportFormat::Csv).unwrap_err();
        let message = err.to_string();
        assert!(
            message.contains("m2") && message.contains("t2"),
            "{message}"
        );
    }

    #[test]
    fn heatmap_preserves_row_and_column_order() {
        let mut rows = Vec::new();
        for model in ["b-model", "a-model", "c-model"] {
            for topic in ["zeta", "alpha"] {
                rows.push(row(model, topic, "P1", 0.5));
            }
        }
        let csv = render_heatmap_matrix(&rows, Some("P1"), ReportFormat::Csv).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "model,ukp/zeta,ukp/alpha");
        assert_eq!(lines[1].split(',').next().unwrap(), "b-model");
        assert_eq!(lines[3].split(',').next().unwrap(), "c-model");
    }

    #[test]
    fn percent_rounds_half_up() {
        assert_eq!(percent(0.825), "82.5");
        assert_eq!(percent(0.8255), "82.6");
        assert_eq!(percent(1.0), "100.0");
        assert_eq!(percent(0.0), "0.0");
        assert_eq!(percent(1.0 / 3.0), "33.3");
    }

    #[test]
    fn markdown_table_shape() {
        let rows = vec![row("m1", "t1", "P1", 0.5)];
        let md = render_prompt_accuracy(&rows, ReportFormat::Markdown).unwrap();
        assert!(md.starts_with("| dataset | topic | model | prompt | accuracy |"));
        assert!(md.contains("| ukp | t1 | m1 | P1 | 50.0 |"));
    }

    #[test]
    fn empty_rows_are_missing_data() {
        assert!(matches!(
            render_heatmap_matrix(&[], None, ReportFormat::Csv),
            Err(ReportError::MissingData(_))
        ));
        assert!(matches!(
            render_prompt_accuracy(&[row("m", "t", "Certainty", 0.5)], ReportFormat::Csv),
            Err(ReportError::MissingData(_))
        ));
    }
}
