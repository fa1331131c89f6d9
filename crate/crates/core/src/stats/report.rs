use std::fmt::Write as _;

use crate::{Error, Result};

/// Per-system values for a set of named columns, e.g. BWS next to automatic metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl MetricTable {
    /// CSV with a header; the first column names the system, the rest are numeric.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header = rdr.headers()?.clone();
        if header.len() < 2 {
            return Err(Error::parse(1, "table needs a system column and at least one value column"));
        }
        let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            if rec.len() != header.len() {
                return Err(Error::parse(line, format!("expected {} fields, got {}", header.len(), rec.len())));
            }
            let values = rec
                .iter()
                .skip(1)
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::parse(line, format!("bad number {v:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push((rec[0].to_string(), values));
        }
        Ok(MetricTable { columns, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns.iter().position(|c| c == name).ok_or_else(|| Error::Unknown {
            what: "column",
            id: name.to_string(),
        })
    }

    /// Stable sort on one column; equal values keep input order.
    pub fn sort_by_column(&mut self, name: &str, descending: bool) -> Result<()> {
        let c = self.column(name)?;
        self.rows.sort_by(|a, b| {
            let ord = a.1[c].total_cmp(&b.1[c]);
            if descending {
                ord.reverse()
            } else {
                ord
            }
        });
        Ok(())
    }

    pub fn systems(&self) -> Vec<&str> {
        self.rows.iter().map(|(s, _)| s.as_str()).collect()
    }

    pub fn render_text(&self, decimals: usize) -> String {
        let mut header = vec!["system".to_string()];
        header.extend(self.columns.iter().cloned());
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|(s, v)| {
                let mut row = vec![s.clone()];
                row.extend(v.iter().map(|x| format!("{x:.decimals$}")));
                row
            })
            .collect();
        format_table(&header, &body)
    }

    pub fn to_csv(&self, decimals: usize) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["system".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for (s, v) in &self.rows {
            let mut row = vec![s.clone()];
            row.extend(v.iter().map(|x| format!("{x:.decimals$}")));
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("utf-8"))
    }
}

/// Left-aligned first column, right-aligned others, a rule under the header.
pub fn format_table(header: &[String], rows: &[Vec<String>]) -> String {
    let n = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut out = String::new();
        for (i, cell) in cells.iter().enumerate().take(n) {
            let pad = widths[i] - cell.chars().count();
            if i > 0 {
                out.push_str("  ");
            }
            if i == 0 {
                out.push_str(cell);
                out.extend(std::iter::repeat_n(' ', pad));
            } else {
                out.extend(std::iter::repeat_n(' ', pad));
                out.push_str(cell);
            }
        }
        out.trim_end().to_string()
    };
    let mut out = String::new();
    let _ = writeln!(out, "{}", line(header));
    let total: usize = widths.iter().sum::<usize>() + 2 * n.saturating_sub(1);
    let _ = writeln!(out, "{}", "-".repeat(total));
    for row in rows {
        let _ = writeln!(out, "{}", line(row));
    }
    out
}
