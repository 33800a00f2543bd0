//! Report rendering: CSV rows, markdown tables and per-sample attribution files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::experiment::{AttributionSet, ExperimentReport};
use super::plot::emit_attribution_plot;
use crate::attribution::Method;
use crate::error::{Error, Result};
use crate::metrics::{write_rows_csv, MetricRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::InvalidParams(format!(
                "unknown report format {other:?}"
            ))),
        }
    }
}

/// Table heading for a space id such as `time_frequency[w=16]`.
pub fn space_display_name(id: &str) -> String {
    let (kind, rest) = id.split_at(id.find('[').unwrap_or(id.len()));
    let name = match kind {
        "time" => "Time",
        "frequency" => "Freq.",
        "time_frequency" => "Time/Freq.",
        "min_zero" => "Min Zero",
        "difference" => "Difference",
        "decomposition" => "Decomposition",
        other => other,
    };
    format!("{name}{rest}")
}

fn method_heading(id: &str) -> String {
    id.parse::<Method>()
        .map_or_else(|_| id.to_string(), |m| m.display_name().to_string())
}

/// Renders `faithfulness% (sparsity)`, with `(-)` for a suppressed sparsity.
pub fn format_cell(row: &MetricRow) -> String {
    let faith = format!("{:.0}%", row.faithfulness_pct);
    match row.sparsity {
        Some(s) => format!("{faith} ({s:.2})"),
        None => format!("{faith} (-)"),
    }
}

/// Methods in report column order, then any unrecognized ids in order of appearance.
fn method_columns(rows: &[MetricRow]) -> Vec<String> {
    let mut cols: Vec<String> = Method::ALL
        .iter()
        .map(|m| m.as_str().to_string())
        .filter(|m| rows.iter().any(|r| &r.method == m))
        .collect();
    for r in rows {
        if !cols.contains(&r.method) {
            cols.push(r.method.clone());
        }
    }
    cols
}

/// (dataset, space) pairs in order of first appearance.
fn row_keys(rows: &[MetricRow]) -> Vec<(String, String)> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in rows {
        let k = (r.dataset.clone(), r.space.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys
}

fn table_header(out: &mut String, lead: &[&str], cols: &[String]) {
    let headings: Vec<String> = lead
        .iter()
        .map(|s| s.to_string())
        .chain(cols.iter().map(|c| method_heading(c)))
        .collect();
    let _ = writeln!(out, "| {} |", headings.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(headings.len()));
}

/// Markdown with two tables: faithfulness and sparsity per method, then
/// classifier and explainer robustness.
pub fn render_markdown(rows: &[MetricRow]) -> String {
    let cols = method_columns(rows);
    let keys = row_keys(rows);
    let find = |key: &(String, String), method: &str| {
        rows.iter()
            .find(|r| r.dataset == key.0 && r.space == key.1 && r.method == method)
    };
    let mut out = String::new();
    let _ = writeln!(out, "## Faithfulness (sparsity)");
    let _ = writeln!(out);
    if let Some(r) = rows.first() {
        let _ = writeln!(
            out,
            "Cells show the label-flip percentage and, in parentheses, the sparsity (beta = {}, eps = {}). Sparsity is shown as (-) when faithfulness is below 50%.",
            r.beta, r.eps
        );
        let _ = writeln!(out);
    }
    table_header(&mut out, &["Dataset", "Space"], &cols);
    for key in &keys {
        let cells: Vec<String> = cols
            .iter()
            .map(|m| find(key, m).map(format_cell).unwrap_or_default())
            .collect();
        let _ = writeln!(
            out,
            "| {} | {} | {} |",
            key.0,
            space_display_name(&key.1),
            cells.join(" | ")
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "## Robustness");
    let _ = writeln!(out);
    if let Some(r) = rows.first() {
        let _ = writeln!(
            out,
            "Mean change under perturbations of relative size lambda = {}; lower is better.",
            r.lambda
        );
        let _ = writeln!(out);
    }
    table_header(&mut out, &["Dataset", "Space", "Classifier"], &cols);
    for key in &keys {
        let cls = rows
            .iter()
            .find(|r| r.dataset == key.0 && r.space == key.1)
            .map(|r| format!("{:.3e}", r.cls_robustness))
            .unwrap_or_default();
        let cells: Vec<String> = cols
            .iter()
            .map(|m| {
                find(key, m)
                    .map(|r| format!("{:.3e}", r.xai_robustness))
                    .unwrap_or_default()
            })
            .collect();
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} |",
            key.0,
            space_display_name(&key.1),
            cls,
            cells.join(" | ")
        );
    }
    out
}

pub fn render_csv(rows: &[MetricRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_rows_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

pub fn render_report(rows: &[MetricRow], format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => render_csv(rows),
        ReportFormat::Markdown => Ok(render_markdown(rows)),
    }
}

/// Writes the report rows to `path` in `format`.
pub fn emit_report(rows: &[MetricRow], format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = render_report(rows, format)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn file_stem(set: &AttributionSet) -> String {
    let space: String = set
        .space
        .id()
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '=' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{}__{}", space.trim_end_matches('_'), set.method)
}

/// Per-sample scores with one column per space coordinate.
pub fn write_attribution_csv(set: &AttributionSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut wtr = csv::Writer::from_path(path)
        .map_err(|e| Error::MalformedFile(format!("{}: {e}", path.display())))?;
    let csv_err = |e: csv::Error| Error::MalformedFile(format!("{}: {e}", path.display()));
    let mut header = vec!["sample".to_string(), "label".into(), "predicted".into()];
    header.extend(set.space.bin_labels());
    wtr.write_record(&header).map_err(csv_err)?;
    for s in &set.samples {
        let mut rec = vec![
            s.index.to_string(),
            s.label.map(|l| l.to_string()).unwrap_or_default(),
            s.predicted.to_string(),
        ];
        rec.extend(s.scores.iter().map(|v| v.to_string()));
        wtr.write_record(&rec).map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

/// Writes `report.csv`, `report.md`, and optionally attribution CSVs and
/// SVG plots under `dir`. Returns the written paths.
pub fn write_outputs(
    report: &ExperimentReport,
    dir: impl AsRef<Path>,
    attributions: bool,
    plots: usize,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for (name, format) in [
        ("report.csv", ReportFormat::Csv),
        ("report.md", ReportFormat::Markdown),
    ] {
        let p = dir.join(name);
        emit_report(&report.rows, format, &p)?;
        written.push(p);
    }
    if attributions {
        let adir = dir.join("attributions");
        fs::create_dir_all(&adir).map_err(|e| Error::io(&adir, e))?;
        for set in &report.attributions {
            let p = adir.join(format!("{}.csv", file_stem(set)));
            write_attribution_csv(set, &p)?;
            written.push(p);
        }
    }
    if plots > 0 {
        let pdir = dir.join("plots");
        fs::create_dir_all(&pdir).map_err(|e| Error::io(&pdir, e))?;
        for set in &report.attributions {
            for s in set.samples.iter().take(plots) {
                let p = pdir.join(format!("{}__sample{}.svg", file_stem(set), s.index));
                emit_attribution_plot(&report.samples[s.index], &set.space, &s.scores, &p)?;
                written.push(p);
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn row(space: &str, method: &str, faith: f64, spars: Option<f64>) -> MetricRow {
        let mut r = MetricRow {
            dataset: "Synth".into(),
            space: space.into(),
            method: method.into(),
            faithfulness_pct: faith,
            sparsity: spars,
            cls_robustness: 0.0012,
            xai_robustness: 0.00034,
            shannon_entropy: Some(2.0),
            beta: 2.0,
            eps: 0.05,
            lambda: 0.01,
        };
        r.apply_suppression();
        r
    }

    #[test]
    fn cells() {
        assert_eq!(
            format_cell(&row("time", "deeplift", 88.0, Some(0.87))),
            "88% (0.87)"
        );
        assert_eq!(
            format_cell(&row("time", "deeplift", 45.0, Some(0.87))),
            "45% (-)"
        );
        assert_eq!(
            format_cell(&row("time", "deeplift", 100.0, Some(0.3))),
            "100% (0.30)"
        );
    }

    #[test]
    fn empty_report_is_header_only() {
        let md = render_markdown(&[]);
        assert!(md.contains("| Dataset | Space |"));
        assert_eq!(md.lines().filter(|l| l.starts_with("| ")).count(), 2);
        let csv = render_csv(&[]).unwrap();
        assert_eq!(csv.lines().count(), 1);
    }

    #[test]
    fn columns_follow_method_order() {
        let rows = vec![
            row("time", "saliency", 60.0, Some(0.5)),
            row("time", "deeplift", 70.0, Some(0.4)),
            row("frequency", "deeplift", 80.0, Some(0.6)),
        ];
        let md = render_markdown(&rows);
        assert!(md.contains("| Dataset | Space | DeepLIFT | Saliency |"));
        assert!(md.contains("| Synth | Time | 70% (0.40) | 60% (0.50) |"));
        assert!(md.contains("| Synth | Freq. | 80% (0.60) |  |"));
        assert_eq!(
            space_display_name("time_frequency[w=16]"),
            "Time/Freq.[w=16]"
        );
    }
}
