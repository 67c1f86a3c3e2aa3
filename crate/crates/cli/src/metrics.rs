//! Per-iteration metrics as CSV.

use std::io::Write;

use slicedict::{MetricsRow, MetricsSink};

pub const HEADER: &str = "iter,data_term,l1_term,objective,slice_data_term,max_primal_residual,time_ms";

/// Writes the header on creation and one line per recorded row.
///
/// Write failures are kept and reported by [`CsvSink::finish`] since the
/// sink interface cannot return errors.
pub struct CsvSink<W: Write> {
    out: W,
    error: Option<std::io::Error>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(mut out: W) -> Self {
        let error = writeln!(out, "{HEADER}").err();
        Self { out, error }
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Rust's float formatting is locale-independent and round-trips.
pub fn format_row(r: &MetricsRow) -> String {
    format!(
        "{},{},{},{},{},{},{:.3}",
        r.iter, r.data_term, r.l1_term, r.objective, r.slice_data_term, r.max_primal_residual, r.time_ms
    )
}

impl<W: Write> MetricsSink for CsvSink<W> {
    fn record(&mut self, row: &MetricsRow) {
        if self.error.is_none() {
            self.error = writeln!(self.out, "{}", format_row(row)).err();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_then_rows() {
        let mut sink = CsvSink::new(Vec::new());
        sink.record(&MetricsRow {
            iter: 1,
            data_term: 0.5,
            l1_term: 0.25,
            objective: 0.75,
            slice_data_term: 0.5,
            max_primal_residual: 1e-7,
            time_ms: 2.0,
        });
        let text = String::from_utf8(sink.finish().unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines, vec![HEADER, "1,0.5,0.25,0.75,0.5,0.0000001,2.000"]);
    }
}
