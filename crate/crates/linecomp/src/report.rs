//! Result serialization: the sweep CSV (the machine-readable contract), its
//! parser (used when macro-averaging several systems), and a self-contained
//! SVG line chart of precision, conditional recall, and F1 against k.

use std::fmt::Write as _;

use thiserror::Error;

use crate::eval::{EvalRow, PairCounts};

/// Column order is part of the format contract; golden files depend on it.
pub const CSV_HEADER: &str = "k,total_added,suggestible,short_excluded,queries,\
retrieved_total,relevant_total,hits,recall_global_pct,recall_conditional_pct,\
precision_pct,f1_pct";

/// Marker recorded in the metadata header: the index deduplicates candidate
/// lines by normalized text, which affects precision denominators.
pub const DEDUP_NOTE: &str = "by-normalized-text";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("malformed-csv at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Settings echoed as `#` comment lines so any two result files can be
/// checked for comparability before averaging.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportMeta {
    pub policy: String,
    pub filter: String,
    pub cohort: String,
    pub dedup: String,
}

impl ReportMeta {
    pub fn new(policy: String, filter: String, cohort: String) -> Self {
        ReportMeta {
            policy,
            filter,
            cohort,
            dedup: DEDUP_NOTE.to_string(),
        }
    }
}

fn fmt_pct(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.4}"),
        None => String::new(),
    }
}

/// Renders the sweep CSV: metadata comments, the fixed header, one row per
/// k. Undefined percentages are blank fields, never zeros. Output is
/// byte-deterministic for identical inputs.
pub fn render_csv(meta: &ReportMeta, rows: &[EvalRow]) -> String {
    let lines = [
        format!("policy: {}", meta.policy),
        format!("filter: {}", meta.filter),
        format!("cohort: {}", meta.cohort),
        format!("dedup: {}", meta.dedup),
    ];
    render_csv_lines(&lines, rows)
}

/// [`render_csv`] with caller-supplied metadata comment lines (each written
/// as `# line`); used when averaging files whose metadata must be carried
/// through verbatim.
pub fn render_csv_lines(meta_lines: &[String], rows: &[EvalRow]) -> String {
    let mut out = String::new();
    for line in meta_lines {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        let c = &row.counts;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            row.k,
            c.total_added,
            c.suggestible,
            c.short_excluded,
            c.queries,
            c.retrieved_total,
            c.relevant_total,
            c.hits,
            fmt_pct(row.recall_global_pct),
            fmt_pct(row.recall_conditional_pct),
            fmt_pct(row.precision_pct),
            fmt_pct(row.f1_pct),
        );
    }
    out
}

/// A parsed result file: its metadata comments and data rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCsv {
    pub meta: Vec<String>,
    pub rows: Vec<EvalRow>,
}

fn parse_count(field: &str, line: usize, name: &str) -> Result<u64, ReportError> {
    field.parse().map_err(|_| ReportError::Parse {
        line,
        reason: format!("{name} is not a count: {field:?}"),
    })
}

fn parse_pct(field: &str, line: usize, name: &str) -> Result<Option<f64>, ReportError> {
    if field.is_empty() {
        return Ok(None);
    }
    field.parse().map(Some).map_err(|_| ReportError::Parse {
        line,
        reason: format!("{name} is not a percentage: {field:?}"),
    })
}

/// Parses a file produced by [`render_csv`]. The stored percentages are kept
/// as-is rather than recomputed from the counts, because macro-averaged
/// files carry means that pooled counts cannot reproduce.
pub fn parse_csv(text: &str) -> Result<ParsedCsv, ReportError> {
    let mut meta = Vec::new();
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            meta.push(comment.trim().to_string());
            continue;
        }
        if !saw_header {
            if line != CSV_HEADER {
                return Err(ReportError::Parse {
                    line: line_no,
                    reason: format!("expected header {CSV_HEADER:?}"),
                });
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(ReportError::Parse {
                line: line_no,
                reason: format!("expected 12 fields, found {}", fields.len()),
            });
        }
        let k = fields[0].parse().map_err(|_| ReportError::Parse {
            line: line_no,
            reason: format!("k is not a count: {:?}", fields[0]),
        })?;
        let counts = PairCounts {
            total_added: parse_count(fields[1], line_no, "total_added")?,
            suggestible: parse_count(fields[2], line_no, "suggestible")?,
            short_excluded: parse_count(fields[3], line_no, "short_excluded")?,
            queries: parse_count(fields[4], line_no, "queries")?,
            retrieved_total: parse_count(fields[5], line_no, "retrieved_total")?,
            relevant_total: parse_count(fields[6], line_no, "relevant_total")?,
            hits: parse_count(fields[7], line_no, "hits")?,
        };
        rows.push(EvalRow {
            k,
            counts,
            recall_global_pct: parse_pct(fields[8], line_no, "recall_global_pct")?,
            recall_conditional_pct: parse_pct(fields[9], line_no, "recall_conditional_pct")?,
            precision_pct: parse_pct(fields[10], line_no, "precision_pct")?,
            f1_pct: parse_pct(fields[11], line_no, "f1_pct")?,
        });
    }
    if !saw_header {
        return Err(ReportError::Parse {
            line: text.lines().count().max(1),
            reason: "missing header row".to_string(),
        });
    }
    Ok(ParsedCsv { meta, rows })
}

// ---------------------------------------------------------------------------
// SVG chart

const CHART_WIDTH: f64 = 720.0;
const CHART_HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 190.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 56.0;

struct Series<'a> {
    name: &'a str,
    color: &'a str,
    points: Vec<(usize, f64)>,
}

fn x_for(k: usize, k_min: usize, k_max: usize) -> f64 {
    let plot_width = CHART_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    if k_max == k_min {
        return MARGIN_LEFT + plot_width / 2.0;
    }
    MARGIN_LEFT + plot_width * (k - k_min) as f64 / (k_max - k_min) as f64
}

fn y_for(pct: f64) -> f64 {
    let plot_height = CHART_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    MARGIN_TOP + plot_height * (1.0 - pct / 100.0)
}

/// Renders a self-contained SVG line chart: x-axis = prefix length k,
/// y-axis = percent 0..100, one series each for precision, conditional
/// recall, and F1. Every data point is a `<circle>` carrying `data-series`,
/// `data-k`, and `data-value` attributes (formatted exactly like the CSV),
/// so chart values can be checked structurally against the CSV.
pub fn render_svg(rows: &[EvalRow]) -> String {
    let k_min = rows.first().map_or(1, |r| r.k);
    let k_max = rows.last().map_or(1, |r| r.k);
    let series = [
        Series {
            name: "precision",
            color: "#1f77b4",
            points: rows
                .iter()
                .filter_map(|r| r.precision_pct.map(|v| (r.k, v)))
                .collect(),
        },
        Series {
            name: "recall_conditional",
            color: "#d62728",
            points: rows
                .iter()
                .filter_map(|r| r.recall_conditional_pct.map(|v| (r.k, v)))
                .collect(),
        },
        Series {
            name: "f1",
            color: "#2ca02c",
            points: rows
                .iter()
                .filter_map(|r| r.f1_pct.map(|v| (r.k, v)))
                .collect(),
        },
    ];

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {CHART_WIDTH} {CHART_HEIGHT}\" \
         width=\"{CHART_WIDTH}\" height=\"{CHART_HEIGHT}\" font-family=\"sans-serif\" \
         font-size=\"12\">"
    );
    let _ = writeln!(
        svg,
        "  <rect width=\"{CHART_WIDTH}\" height=\"{CHART_HEIGHT}\" fill=\"white\"/>"
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">\
         Precision, recall and F1 by prefix length</text>",
        MARGIN_LEFT + (CHART_WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / 2.0
    );

    // Gridlines and y-axis labels every 20 percentage points.
    for step in 0..=5 {
        let pct = (step * 20) as f64;
        let y = y_for(pct);
        let _ = writeln!(
            svg,
            "  <line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#dddddd\"/>",
            MARGIN_LEFT,
            CHART_WIDTH - MARGIN_RIGHT
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{pct}</text>",
            MARGIN_LEFT - 8.0,
            y + 4.0
        );
    }
    // Axes.
    let _ = writeln!(
        svg,
        "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        MARGIN_LEFT,
        MARGIN_TOP,
        MARGIN_LEFT,
        CHART_HEIGHT - MARGIN_BOTTOM
    );
    let _ = writeln!(
        svg,
        "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        MARGIN_LEFT,
        CHART_HEIGHT - MARGIN_BOTTOM,
        CHART_WIDTH - MARGIN_RIGHT,
        CHART_HEIGHT - MARGIN_BOTTOM
    );
    // x ticks: one per k.
    for row in rows {
        let x = x_for(row.k, k_min, k_max);
        let _ = writeln!(
            svg,
            "  <line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"black\"/>",
            CHART_HEIGHT - MARGIN_BOTTOM,
            CHART_HEIGHT - MARGIN_BOTTOM + 5.0
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            CHART_HEIGHT - MARGIN_BOTTOM + 20.0,
            row.k
        );
    }
    let _ = writeln!(
        svg,
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">number of characters (k)</text>",
        MARGIN_LEFT + (CHART_WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / 2.0,
        CHART_HEIGHT - 14.0
    );
    let _ = writeln!(
        svg,
        "  <text x=\"18\" y=\"{}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 18 {})\">percentage</text>",
        MARGIN_TOP + (CHART_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM) / 2.0,
        MARGIN_TOP + (CHART_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM) / 2.0
    );

    for s in &series {
        if s.points.len() > 1 {
            let path: Vec<String> = s
                .points
                .iter()
                .map(|&(k, v)| format!("{:.2},{:.2}", x_for(k, k_min, k_max), y_for(v)))
                .collect();
            let _ = writeln!(
                svg,
                "  <polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>",
                s.color,
                path.join(" ")
            );
        }
        for &(k, v) in &s.points {
            let _ = writeln!(
                svg,
                "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3.5\" fill=\"{}\" \
                 data-series=\"{}\" data-k=\"{k}\" data-value=\"{v:.4}\"/>",
                x_for(k, k_min, k_max),
                y_for(v),
                s.color,
                s.name
            );
        }
    }

    // Legend.
    let legend_x = CHART_WIDTH - MARGIN_RIGHT + 18.0;
    for (i, s) in series.iter().enumerate() {
        let y = MARGIN_TOP + 12.0 + i as f64 * 22.0;
        let _ = writeln!(
            svg,
            "  <line x1=\"{legend_x}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{}\" \
             stroke-width=\"2\"/>",
            legend_x + 26.0,
            s.color
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{}\" y=\"{}\">{}</text>",
            legend_x + 32.0,
            y + 4.0,
            s.name
        );
    }
    svg.push_str("</svg>\n");
    svg
}
