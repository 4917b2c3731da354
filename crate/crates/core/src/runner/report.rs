use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::RewardKind;

/// One cell of the experiment matrix. Metric fields are `None` when the
/// cell failed, in which case `error` says why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub learner: String,
    pub reward_kind: RewardKind,
    pub seed: u64,
    pub mean_return: Option<f64>,
    pub stderr: Option<f64>,
    pub escape_probability: Option<f64>,
    pub support_violation: Option<f64>,
    #[serde(default)]
    pub runtime_ms: u64,
    pub error: Option<String>,
    /// Learner warnings, `; `-joined.
    #[serde(default)]
    pub warnings: String,
}

impl ResultRow {
    pub fn failed(learner: &str, reward_kind: RewardKind, seed: u64, error: String) -> Self {
        Self {
            learner: learner.into(),
            reward_kind,
            seed,
            mean_return: None,
            stderr: None,
            escape_probability: None,
            support_violation: None,
            runtime_ms: 0,
            error: Some(error),
            warnings: String::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Markdown => "md",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "markdown-table" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::Config(format!("unknown report format {other:?} (expected csv|json|markdown)"))),
        }
    }
}

const COLUMNS: [&str; 9] = [
    "learner",
    "reward_kind",
    "seed",
    "mean_return",
    "stderr",
    "escape_probability",
    "support_violation",
    "error",
    "warnings",
];

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Renders `rows` with `digest` in the header. Wall-clock runtimes make
/// output nondeterministic, so they are only written when asked for (as a
/// trailing `runtime_ms` column / field).
pub fn emit_report(rows: &[ResultRow], format: ReportFormat, digest: &str, include_runtime: bool) -> Result<String> {
    match format {
        ReportFormat::Csv => {
            let mut out = format!("# config_digest={digest}\n");
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
            let mut header: Vec<&str> = COLUMNS.to_vec();
            if include_runtime {
                header.push("runtime_ms");
            }
            w.write_record(&header).map_err(csv_err)?;
            for r in rows {
                let mut rec = vec![
                    r.learner.clone(),
                    r.reward_kind.to_string(),
                    r.seed.to_string(),
                    opt(r.mean_return),
                    opt(r.stderr),
                    opt(r.escape_probability),
                    opt(r.support_violation),
                    r.error.clone().unwrap_or_default(),
                    r.warnings.clone(),
                ];
                if include_runtime {
                    rec.push(r.runtime_ms.to_string());
                }
                w.write_record(&rec).map_err(csv_err)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
            out.push_str(std::str::from_utf8(&bytes).expect("csv output is utf-8"));
            Ok(out)
        }
        ReportFormat::Json => {
            let rows: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    let mut v = serde_json::to_value(r)?;
                    if !include_runtime {
                        v.as_object_mut().expect("row is an object").remove("runtime_ms");
                    }
                    Ok(v)
                })
                .collect::<Result<_>>()?;
            let doc = serde_json::json!({ "config_digest": digest, "rows": rows });
            Ok(serde_json::to_string_pretty(&doc)? + "\n")
        }
        ReportFormat::Markdown => Ok(markdown_table(rows, digest)),
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

/// Parses the CSV written by [`emit_report`]; returns the digest and rows.
pub fn parse_report_csv(text: &str) -> Result<(String, Vec<ResultRow>)> {
    let mut lines = text.splitn(2, '\n');
    let first = lines.next().unwrap_or_default();
    let digest = first
        .strip_prefix("# config_digest=")
        .ok_or_else(|| Error::parse(1, "missing `# config_digest=` header"))?
        .to_string();
    let body = lines.next().unwrap_or_default();
    let mut reader = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    let header = reader.headers().map_err(|e| Error::parse(2, e.to_string()))?.clone();
    let with_runtime = match header.len() {
        9 => false,
        10 if &header[9] == "runtime_ms" => true,
        _ => return Err(Error::parse(2, format!("unexpected columns {header:?}"))),
    };
    if header.iter().take(9).ne(COLUMNS) {
        return Err(Error::parse(2, format!("unexpected columns {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 3;
        let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
        let num = |j: usize| -> Result<Option<f64>> {
            match &rec[j] {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| Error::parse(line, format!("bad number {s:?} in {}", COLUMNS[j]))),
            }
        };
        rows.push(ResultRow {
            learner: rec[0].to_string(),
            reward_kind: rec[1].parse().map_err(|e: Error| Error::parse(line, e.to_string()))?,
            seed: rec[2].parse().map_err(|_| Error::parse(line, "bad seed"))?,
            mean_return: num(3)?,
            stderr: num(4)?,
            escape_probability: num(5)?,
            support_violation: num(6)?,
            error: Some(rec[7].to_string()).filter(|e| !e.is_empty()),
            warnings: rec[8].to_string(),
            runtime_ms: if with_runtime {
                rec[9].parse().map_err(|_| Error::parse(line, "bad runtime_ms"))?
            } else {
                0
            },
        });
    }
    Ok((digest, rows))
}

/// Parses the JSON written by [`emit_report`]; returns the digest and rows.
pub fn parse_report_json(text: &str) -> Result<(String, Vec<ResultRow>)> {
    #[derive(Deserialize)]
    struct Doc {
        config_digest: String,
        rows: Vec<ResultRow>,
    }
    let doc: Doc = serde_json::from_str(text)?;
    Ok((doc.config_digest, doc.rows))
}

fn learner_heading(label: &str) -> String {
    match label {
        "bc" => "Behavior Cloning".into(),
        "pevi" => "PEVI".into(),
        "vi-lcb" => "VI-LCB".into(),
        "pqi" => "PQI".into(),
        "ppi" => "PPI".into(),
        other => other.into(),
    }
}

fn kind_heading(kind: RewardKind) -> &'static str {
    match kind {
        RewardKind::Original => "Original Reward",
        RewardKind::Zero => "Zero Reward",
        RewardKind::Random => "Random Reward",
        RewardKind::Negative => "Negative Reward",
    }
}

/// Reward kinds down, learners across, `mean ± stderr` in each cell. With
/// several seeds the cell shows the mean over seeds and the standard error
/// across seeds; failed cells show `error`.
fn markdown_table(rows: &[ResultRow], digest: &str) -> String {
    let mut learners: Vec<&str> = Vec::new();
    let mut kinds: Vec<RewardKind> = Vec::new();
    for r in rows {
        if !learners.contains(&r.learner.as_str()) {
            learners.push(&r.learner);
        }
        if !kinds.contains(&r.reward_kind) {
            kinds.push(r.reward_kind);
        }
    }
    kinds.sort();
    let mut out = format!("<!-- config_digest={digest} -->\n");
    let headings: Vec<String> = learners.iter().map(|l| learner_heading(l)).collect();
    writeln!(out, "| Reward Type | {} |", headings.join(" | ")).unwrap();
    writeln!(out, "|---|{}", "---|".repeat(learners.len())).unwrap();
    for kind in kinds {
        let cells: Vec<String> = learners
            .iter()
            .map(|l| {
                let cell: Vec<&ResultRow> = rows.iter().filter(|r| r.learner == *l && r.reward_kind == kind).collect();
                format_cell(&cell)
            })
            .collect();
        writeln!(out, "| {} | {} |", kind_heading(kind), cells.join(" | ")).unwrap();
    }
    out
}

fn format_cell(rows: &[&ResultRow]) -> String {
    if rows.is_empty() {
        return "n/a".into();
    }
    if rows.iter().any(|r| r.error.is_some() || r.mean_return.is_none()) {
        return "error".into();
    }
    let means: Vec<f64> = rows.iter().filter_map(|r| r.mean_return).collect();
    let (mean, se) = if let [r] = rows {
        (r.mean_return.unwrap_or(f64::NAN), r.stderr.unwrap_or(0.0))
    } else {
        let n = means.len() as f64;
        let m = means.iter().sum::<f64>() / n;
        let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (var / n).sqrt())
    };
    // avoid printing "-0.00"
    let fix = |x: f64| if x.abs() < 0.005 { 0.0 } else { x };
    format!("{:.2} ± {:.2}", fix(mean), fix(se))
}
