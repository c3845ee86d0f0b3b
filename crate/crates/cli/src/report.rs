//! Per-object result tables with a summary row, rendered as Markdown or CSV.
//!
//! Cells are kept at full precision and rounded only when rendered. The
//! summary cell of a column is the mean of its defined cells, summed in row
//! order; undefined cells print as "—" in Markdown and empty in CSV.

use std::fmt::Write as _;

use thiserror::Error;

pub const UNDEFINED: &str = "—";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("row {label} has {actual} cells, table has {expected} columns")]
    RowWidth {
        label: String,
        expected: usize,
        actual: usize,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Markdown,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub label: String,
    pub decimals: usize,
}

impl Column {
    pub fn new(label: impl Into<String>, decimals: usize) -> Self {
        Self {
            label: label.into(),
            decimals,
        }
    }

    /// ADD recall in [0, 1], two decimals.
    pub fn recall(label: impl Into<String>) -> Self {
        Self::new(label, 2)
    }

    /// Percentage in [0, 100], one decimal.
    pub fn percent(label: impl Into<String>) -> Self {
        Self::new(label, 1)
    }

    pub fn format(&self, value: Option<f64>) -> Option<String> {
        value.map(|v| format!("{:.*}", self.decimals, v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub label: String,
    pub cells: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub key_label: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
    pub summary_label: String,
}

impl ReportTable {
    pub fn new(
        key_label: impl Into<String>,
        columns: Vec<Column>,
        summary_label: impl Into<String>,
    ) -> Self {
        Self {
            key_label: key_label.into(),
            columns,
            rows: Vec::new(),
            summary_label: summary_label.into(),
        }
    }

    pub fn push_row(
        &mut self,
        label: impl Into<String>,
        cells: Vec<Option<f64>>,
    ) -> Result<(), ReportError> {
        let label = label.into();
        if cells.len() != self.columns.len() {
            return Err(ReportError::RowWidth {
                label,
                expected: self.columns.len(),
                actual: cells.len(),
            });
        }
        self.rows.push(Row { label, cells });
        Ok(())
    }

    /// Mean of the defined cells of each column; `None` if there are none.
    pub fn summary(&self) -> Vec<Option<f64>> {
        (0..self.columns.len())
            .map(|c| {
                let mut sum = 0.0;
                let mut n = 0usize;
                for v in self.rows.iter().filter_map(|r| r.cells[c]) {
                    sum += v;
                    n += 1;
                }
                (n > 0).then(|| sum / n as f64)
            })
            .collect()
    }

    /// Rendered summary cells, `None` where undefined.
    pub fn summary_rendered(&self) -> Vec<Option<String>> {
        self.columns
            .iter()
            .zip(self.summary())
            .map(|(col, v)| col.format(v))
            .collect()
    }

    fn rendered_rows(&self) -> Vec<(String, Vec<Option<String>>)> {
        let mut out: Vec<(String, Vec<Option<String>>)> = self
            .rows
            .iter()
            .map(|r| {
                let cells = self
                    .columns
                    .iter()
                    .zip(&r.cells)
                    .map(|(col, v)| col.format(*v))
                    .collect();
                (r.label.clone(), cells)
            })
            .collect();
        out.push((self.summary_label.clone(), self.summary_rendered()));
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let header: Vec<&str> = std::iter::once(self.key_label.as_str())
            .chain(self.columns.iter().map(|c| c.label.as_str()))
            .collect();
        let _ = writeln!(s, "| {} |", header.join(" | "));
        let _ = writeln!(s, "|{}", " --- |".repeat(header.len()));
        for (label, cells) in self.rendered_rows() {
            let cells: Vec<String> = cells
                .into_iter()
                .map(|c| c.unwrap_or_else(|| UNDEFINED.to_string()))
                .collect();
            let _ = writeln!(s, "| {} | {} |", label, cells.join(" | "));
        }
        s
    }

    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(
            std::iter::once(self.key_label.as_str())
                .chain(self.columns.iter().map(|c| c.label.as_str())),
        )?;
        for (label, cells) in self.rendered_rows() {
            w.write_record(
                std::iter::once(label).chain(cells.into_iter().map(Option::unwrap_or_default)),
            )?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| ReportError::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn render(&self, format: ReportFormat) -> Result<String, ReportError> {
        match format {
            ReportFormat::Markdown => Ok(self.to_markdown()),
            ReportFormat::Csv => self.to_csv(),
        }
    }
}
