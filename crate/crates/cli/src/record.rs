//! Per-run result rows shared by `solve` and `bench`, with the CSV
//! schema and the aligned-text rendering.

use std::fmt::Write as _;

pub const CSV_HEADER: &str =
    "name,n,m,objective,relaxation,ratio_pct,time_ms,reason,outer_iters,inner_iters";

/// One solver run over one instance. `objective`/`relaxation` are empty
/// for rows that record a per-instance failure.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub objective: Option<i64>,
    pub relaxation: Option<f64>,
    /// reference/solver * 100, rounded to two decimals.
    pub ratio_pct: Option<f64>,
    pub time_ms: u64,
    pub reason: String,
    pub outer_iters: usize,
    pub inner_iters: usize,
}

impl RunRecord {
    pub fn ratio_against(&mut self, reference: i64) {
        if let Some(obj) = self.objective {
            if obj != 0 {
                let pct = reference as f64 / obj as f64 * 100.0;
                self.ratio_pct = Some((pct * 100.0).round() / 100.0);
            }
        }
    }

    pub fn to_csv_row(&self) -> String {
        let opt_i = |v: &Option<i64>| v.map(|x| x.to_string()).unwrap_or_default();
        let opt_f = |v: &Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.name,
            self.n,
            self.m,
            opt_i(&self.objective),
            opt_f(&self.relaxation),
            opt_f(&self.ratio_pct),
            self.time_ms,
            self.reason,
            self.outer_iters,
            self.inner_iters
        )
    }

    #[cfg(test)]
    pub fn from_csv_row(row: &str) -> Option<RunRecord> {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 10 {
            return None;
        }
        let opt_i = |s: &str| {
            if s.is_empty() {
                Some(None)
            } else {
                s.parse().ok().map(Some)
            }
        };
        let opt_f = |s: &str| {
            if s.is_empty() {
                Some(None)
            } else {
                s.parse().ok().map(Some)
            }
        };
        Some(RunRecord {
            name: fields[0].to_string(),
            n: fields[1].parse().ok()?,
            m: fields[2].parse().ok()?,
            objective: opt_i(fields[3])?,
            relaxation: opt_f(fields[4])?,
            ratio_pct: opt_f(fields[5])?,
            time_ms: fields[6].parse().ok()?,
            reason: fields[7].to_string(),
            outer_iters: fields[8].parse().ok()?,
            inner_iters: fields[9].parse().ok()?,
        })
    }
}

/// Milliseconds rendered as h:mm:ss for the text tables.
pub fn format_hms(ms: u64) -> String {
    let secs = ms / 1000;
    format!("{}:{:02}:{:02}", secs / 3600, (secs / 60) % 60, secs % 60)
}

/// Aligned text table over a set of rows.
pub fn text_table(rows: &[RunRecord]) -> String {
    let mut out = String::new();
    let header = [
        "name", "n", "m", "objective", "relaxation", "ratio", "time", "reason", "outer", "inner",
    ];
    let mut cells: Vec<[String; 10]> = Vec::with_capacity(rows.len());
    for r in rows {
        cells.push([
            r.name.clone(),
            r.n.to_string(),
            r.m.to_string(),
            r.objective.map(|o| o.to_string()).unwrap_or_else(|| "-".into()),
            r.relaxation
                .map(|f| format!("{f:.2}"))
                .unwrap_or_else(|| "-".into()),
            r.ratio_pct
                .map(|p| format!("{p:.2}%"))
                .unwrap_or_else(|| "-".into()),
            format_hms(r.time_ms),
            r.reason.clone(),
            r.outer_iters.to_string(),
            r.inner_iters.to_string(),
        ]);
    }
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row.iter()) {
            *w = (*w).max(c.len());
        }
    }
    for (i, h) in header.iter().enumerate() {
        let _ = write!(out, "{:w$}  ", h, w = widths[i]);
    }
    out.push('\n');
    for row in &cells {
        for (i, c) in row.iter().enumerate() {
            let _ = write!(out, "{:w$}  ", c, w = widths[i]);
        }
        out.push('\n');
    }
    out
}
