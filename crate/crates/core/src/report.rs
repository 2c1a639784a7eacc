//! Table assembly and rendering as aligned text, TSV or markdown.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::analysis::{CorrelationReport, GroupTable, ModelRanking};
use crate::corpus::Grade;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Tsv,
    Md,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Text => "txt",
            Format::Tsv => "tsv",
            Format::Md => "md",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" | "txt" => Ok(Format::Text),
            "tsv" => Ok(Format::Tsv),
            "md" | "markdown" => Ok(Format::Md),
            other => Err(format!(
                "unknown format {other:?} (expected text, tsv or md)"
            )),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Text => "text",
            Format::Tsv => "tsv",
            Format::Md => "md",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Table {
    pub title: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub footnotes: Vec<String>,
}

impl Table {
    pub fn new(title: impl Into<String>, headers: Vec<String>) -> Self {
        Table {
            title: title.into(),
            headers,
            ..Default::default()
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.render_text(),
            Format::Tsv => self.render_tsv(),
            Format::Md => self.render_md(),
        }
    }

    fn render_text(&self) -> String {
        let cols = self.headers.len();
        let mut widths: Vec<usize> = self.headers.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let mut s = String::new();
            for (i, c) in cells.iter().enumerate().take(cols) {
                if i > 0 {
                    s.push_str("  ");
                }
                let pad = widths[i] - c.chars().count();
                if i == 0 {
                    s.push_str(c);
                    s.extend(std::iter::repeat_n(' ', pad));
                } else {
                    s.extend(std::iter::repeat_n(' ', pad));
                    s.push_str(c);
                }
            }
            s.trim_end().to_string()
        };
        let mut out = String::new();
        if !self.title.is_empty() {
            let _ = writeln!(out, "{}", self.title);
        }
        let _ = writeln!(out, "{}", line(&self.headers));
        let total: usize = widths.iter().sum::<usize>() + 2 * cols.saturating_sub(1);
        let _ = writeln!(out, "{}", "-".repeat(total));
        for row in &self.rows {
            let _ = writeln!(out, "{}", line(row));
        }
        for f in &self.footnotes {
            let _ = writeln!(out, "{f}");
        }
        out
    }

    fn render_tsv(&self) -> String {
        let mut out = String::new();
        if !self.title.is_empty() {
            let _ = writeln!(out, "# {}", self.title);
        }
        let _ = writeln!(out, "{}", self.headers.join("\t"));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join("\t"));
        }
        for f in &self.footnotes {
            let _ = writeln!(out, "# {f}");
        }
        out
    }

    fn render_md(&self) -> String {
        let esc = |c: &String| c.replace('|', "\\|");
        let mut out = String::new();
        if !self.title.is_empty() {
            let _ = writeln!(out, "### {}\n", self.title);
        }
        let _ = writeln!(
            out,
            "| {} |",
            self.headers.iter().map(esc).collect::<Vec<_>>().join(" | ")
        );
        let align: Vec<&str> = (0..self.headers.len())
            .map(|i| if i == 0 { "---" } else { "---:" })
            .collect();
        let _ = writeln!(out, "|{}|", align.join("|"));
        for row in &self.rows {
            let _ = writeln!(
                out,
                "| {} |",
                row.iter().map(esc).collect::<Vec<_>>().join(" | ")
            );
        }
        if !self.footnotes.is_empty() {
            out.push('\n');
            for f in &self.footnotes {
                let _ = writeln!(out, "{f}");
            }
        }
        out
    }
}

/// Renders several tables separated by blank lines.
pub fn render_all(tables: &[Table], format: Format) -> String {
    tables
        .iter()
        .map(|t| t.render(format))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn fmt3(v: f64) -> String {
    format!("{v:.3}")
}

/// Model by metric rank matrix. Rows follow the first ranking's order.
pub fn ranking_table(rankings: &[ModelRanking]) -> Table {
    let mut headers = vec!["model".to_string()];
    headers.extend(rankings.iter().map(|r| r.metric_id.clone()));
    let mut t = Table::new("Ranking (1 = best)", headers);
    let Some(first) = rankings.first() else {
        return t;
    };
    let mut models: Vec<&str> = first.entries.iter().map(|e| e.model_id.as_str()).collect();
    let listed: BTreeSet<&str> = models.iter().copied().collect();
    let extra: BTreeSet<&str> = rankings
        .iter()
        .flat_map(|r| r.entries.iter().map(|e| e.model_id.as_str()))
        .filter(|m| !listed.contains(m))
        .collect();
    models.extend(extra);
    for m in models {
        let mut row = vec![m.to_string()];
        for r in rankings {
            row.push(
                r.rank_of(m)
                    .map_or_else(|| "-".to_string(), |k| k.to_string()),
            );
        }
        t.rows.push(row);
    }
    for r in rankings {
        let tied: Vec<&str> = r
            .entries
            .iter()
            .filter(|e| e.tied)
            .map(|e| e.model_id.as_str())
            .collect();
        if !tied.is_empty() {
            t.footnotes.push(format!(
                "{}: exact ties broken by model id among {}",
                r.metric_id,
                tied.join(", ")
            ));
        }
    }
    t
}

/// Mean score per model and metric, as traced from the score files.
pub fn means_table(rankings: &[ModelRanking]) -> Table {
    let mut headers = vec!["model".to_string()];
    headers.extend(rankings.iter().map(|r| r.metric_id.clone()));
    let mut t = Table::new("Mean score per model", headers);
    let models: BTreeSet<&str> = rankings
        .iter()
        .flat_map(|r| r.entries.iter().map(|e| e.model_id.as_str()))
        .collect();
    let order: Vec<&str> = match rankings.first() {
        Some(first) => {
            let mut o: Vec<&str> = first.entries.iter().map(|e| e.model_id.as_str()).collect();
            o.extend(
                models
                    .iter()
                    .filter(|m| !o.contains(m))
                    .copied()
                    .collect::<Vec<_>>(),
            );
            o
        }
        None => Vec::new(),
    };
    for m in order {
        let mut row = vec![m.to_string()];
        for r in rankings {
            let v = r
                .entries
                .iter()
                .find(|e| e.model_id == m)
                .map(|e| e.mean_score);
            row.push(v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}")));
        }
        t.rows.push(row);
    }
    t
}

/// |τ| and |r| per metric; metrics with excluded models carry a `*`.
pub fn correlation_table(report: &CorrelationReport) -> Table {
    let headers = ["metric", "|tau|", "|r|", "models"]
        .map(String::from)
        .to_vec();
    let mut t = Table::new("Correlation with human scores (absolute values)", headers);
    for row in &report.rows {
        let mark = if row.excluded_models.is_empty() {
            ""
        } else {
            "*"
        };
        t.rows.push(vec![
            format!("{}{mark}", row.metric_id),
            fmt3(row.reported_tau),
            fmt3(row.reported_r),
            row.models.to_string(),
        ]);
    }
    for row in report.rows.iter().filter(|r| !r.excluded_models.is_empty()) {
        t.footnotes.push(format!(
            "* {}: excludes evaluations of {} (self-evaluation)",
            row.metric_id,
            row.excluded_models.join(", ")
        ));
    }
    for row in report.rows.iter().filter(|r| r.unscored > 0) {
        t.footnotes.push(format!(
            "{}: {} unscored record(s) dropped",
            row.metric_id, row.unscored
        ));
    }
    t
}

/// Per-group |τ|; `n/a` where one side is constant across models.
pub fn group_table(table: &GroupTable, excluded: &BTreeMap<String, BTreeSet<String>>) -> Table {
    let mut headers = vec!["group".to_string(), "instances".to_string()];
    headers.extend(table.metrics.iter().map(|m| {
        let star = excluded.get(m).is_some_and(|s| !s.is_empty());
        format!("{m}{}", if star { "*" } else { "" })
    }));
    let mut t = Table::new("Kendall tau per task group (absolute values)", headers);
    for row in &table.rows {
        let mut cells = vec![row.task_group.clone(), row.instances.to_string()];
        for m in &table.metrics {
            cells.push(match row.taus.get(m).copied().flatten() {
                Some(v) => fmt3(v.abs()),
                None => "n/a".to_string(),
            });
        }
        t.rows.push(cells);
    }
    if !table.omitted.is_empty() {
        let list: Vec<String> = table
            .omitted
            .iter()
            .map(|(g, n)| format!("{g} ({n})"))
            .collect();
        t.footnotes
            .push(format!("omitted below threshold: {}", list.join(", ")));
    }
    t
}

pub fn kappa_table(first: &str, second: &str, shared: usize, kappa: Option<f64>) -> Table {
    let headers = ["annotator_a", "annotator_b", "shared", "kappa"]
        .map(String::from)
        .to_vec();
    let mut t = Table::new("Inter-annotator agreement (Cohen's kappa)", headers);
    t.rows.push(vec![
        first.to_string(),
        second.to_string(),
        shared.to_string(),
        kappa.map_or_else(|| "undefined".to_string(), fmt3),
    ]);
    t
}

/// Share of each grade per model.
pub fn grade_distribution_table(dist: &BTreeMap<String, [usize; 4]>) -> Table {
    let mut headers = vec!["model".to_string()];
    headers.extend(Grade::ALL.iter().map(|g| g.to_string()));
    let mut t = Table::new("Grade distribution", headers);
    for (model, counts) in dist {
        let n: usize = counts.iter().sum();
        let mut row = vec![model.clone()];
        row.extend(
            counts
                .iter()
                .map(|&c| format!("{:.4}", c as f64 / n as f64)),
        );
        t.rows.push(row);
    }
    t
}
