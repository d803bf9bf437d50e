//! Recomputes the published GMS and consistency table from the published
//! per-framework results.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::metrics::{consistency, gms, ntu, MetricsError};
use super::tasks::TaskKind;

/// Slack for inputs printed with three decimals.
pub const TABLE_TOLERANCE: f64 = 0.002;

#[derive(Debug, Clone, Deserialize)]
pub struct PublishedTables {
    pub description: String,
    pub tasks: Vec<TaskTable>,
    pub published: Vec<PublishedCell>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct TaskTable {
    pub task: String,
    pub source: String,
    /// Metric columns multiplied into the performance term.
    pub performance: Vec<String>,
    pub rows: Vec<FrameworkRow>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct FrameworkRow {
    pub framework: String,
    pub token_usage: f64,
    /// Column name to `[0 retries, 2 retries]`; must include `reliability`.
    #[serde(flatten)]
    pub metrics: BTreeMap<String, [f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PublishedCell {
    pub framework: String,
    pub task: String,
    pub gms: [f64; 2],
    pub consistency: Option<f64>,
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("fixture missing: {0}")]
    FixtureMissing(String),
    #[error("malformed fixture: {0}")]
    Malformed(String),
    #[error("task `{task}`: {source}")]
    Metrics { task: String, source: MetricsError },
}

/// The fixture shipped with the crate.
pub const SHIPPED_TABLES_JSON: &str = include_str!("../../fixtures/published_tables.json");

pub fn shipped_tables() -> PublishedTables {
    serde_json::from_str(SHIPPED_TABLES_JSON).expect("shipped fixture parses")
}

pub fn load_tables(path: &Path) -> Result<PublishedTables, TableError> {
    let text = std::fs::read_to_string(path).map_err(|e| TableError::FixtureMissing(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| TableError::Malformed(e.to_string()))
}

#[derive(Debug, Clone, Serialize)]
pub struct GmsRow {
    pub framework: String,
    pub task: TaskKind,
    pub ntu: f64,
    pub gms: [f64; 2],
    pub consistency: Option<f64>,
    pub published_gms: [f64; 2],
    pub published_consistency: Option<f64>,
    pub gms_deviation: [f64; 2],
    /// `None` when either side is undefined.
    pub consistency_deviation: Option<f64>,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GmsTable {
    pub tolerance: f64,
    pub rows: Vec<GmsRow>,
}

impl GmsTable {
    pub fn failures(&self) -> impl Iterator<Item = &GmsRow> {
        self.rows.iter().filter(|r| !r.within_tolerance)
    }

    pub fn all_within_tolerance(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn row(&self, framework: &str, task: TaskKind) -> Option<&GmsRow> {
        self.rows.iter().find(|r| r.framework == framework && r.task == task)
    }

    pub fn max_gms_deviation(&self) -> f64 {
        self.rows.iter().flat_map(|r| r.gms_deviation).fold(0.0, f64::max)
    }

    pub fn render_text(&self) -> String {
        fn cons(c: Option<f64>) -> String {
            c.map_or_else(|| "NaN".to_string(), |c| format!("{c:.3}"))
        }
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<12} {:<10} {:>6} | {:>6} {:>6} {:>7} | {:>6} {:>6} {:>7} | {:>6} {:>6} | status",
            "framework", "task", "ntu", "gms0", "pub", "dev", "gms2", "pub", "dev", "cons", "pub"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<12} {:<10} {:>6.4} | {:>6.4} {:>6.3} {:>7.4} | {:>6.4} {:>6.3} {:>7.4} | {:>6} {:>6} | {}",
                r.framework,
                r.task.as_str(),
                r.ntu,
                r.gms[0],
                r.published_gms[0],
                r.gms_deviation[0],
                r.gms[1],
                r.published_gms[1],
                r.gms_deviation[1],
                cons(r.consistency),
                cons(r.published_consistency),
                if r.within_tolerance { "ok" } else { "OUT OF TOLERANCE" }
            );
        }
        let failed = self.failures().count();
        let _ = writeln!(
            out,
            "{} of {} rows within ±{}; max GMS deviation {:.4}",
            self.rows.len() - failed,
            self.rows.len(),
            self.tolerance,
            self.max_gms_deviation()
        );
        out
    }
}

/// Computes NTU within each task, GMS at both retry settings, and
/// consistency, and compares every cell against the published table.
/// Undefined consistency must match exactly; defined values within
/// `tolerance`.
pub fn reproduce_gms_table(tables: &PublishedTables, tolerance: f64) -> Result<GmsTable, TableError> {
    let mut rows = Vec::new();
    for table in &tables.tasks {
        let task: TaskKind = table.task.parse().map_err(TableError::Malformed)?;
        let usages = table.rows.iter().map(|r| r.token_usage);
        let min = usages.clone().fold(f64::INFINITY, f64::min);
        let max = usages.fold(f64::NEG_INFINITY, f64::max);
        for row in &table.rows {
            let metric = |name: &str| {
                row.metrics.get(name).copied().ok_or_else(|| {
                    TableError::Malformed(format!("{} / {}: missing column `{name}`", table.task, row.framework))
                })
            };
            let norm = ntu(row.token_usage, min, max).map_err(|source| TableError::Metrics { task: table.task.clone(), source })?;
            let reliability = metric("reliability")?;
            let mut scores = [0.0; 2];
            for (setting, score) in scores.iter_mut().enumerate() {
                let factors = table
                    .performance
                    .iter()
                    .map(|name| metric(name).map(|v| v[setting]))
                    .collect::<Result<Vec<_>, _>>()?;
                *score = gms(reliability[setting], &factors, norm);
            }
            let published = tables
                .published
                .iter()
                .find(|c| c.framework == row.framework && c.task == table.task)
                .ok_or_else(|| TableError::Malformed(format!("no published cell for {} / {}", row.framework, table.task)))?;
            let cons = consistency(scores[0], scores[1]);
            let gms_deviation = [(scores[0] - published.gms[0]).abs(), (scores[1] - published.gms[1]).abs()];
            let consistency_deviation = match (cons, published.consistency) {
                (Some(a), Some(b)) => Some((a - b).abs()),
                _ => None,
            };
            let consistency_ok = match (cons, published.consistency) {
                (None, None) => true,
                (Some(_), Some(_)) => consistency_deviation.is_some_and(|d| d <= tolerance),
                _ => false,
            };
            rows.push(GmsRow {
                framework: row.framework.clone(),
                task,
                ntu: norm,
                gms: scores,
                consistency: cons,
                published_gms: published.gms,
                published_consistency: published.consistency,
                gms_deviation,
                consistency_deviation,
                within_tolerance: gms_deviation.iter().all(|d| *d <= tolerance) && consistency_ok,
            });
        }
    }
    Ok(GmsTable { tolerance, rows })
}
