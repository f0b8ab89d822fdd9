//! Per-epoch training record, the in-memory trace, and streaming sinks.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;

pub const CSV_HEADER: &str = "epoch,d_loss,g_loss,fid,seconds,xai_active";

/// One completed epoch. `fid` is present only on epochs where the caller's
/// evaluator ran; `seconds` is wall-clock for the whole epoch, always > 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub d_loss: f64,
    pub g_loss: f64,
    pub fid: Option<f64>,
    pub seconds: f64,
    pub xai_active: bool,
}

impl EpochRecord {
    /// Matching row for [`CSV_HEADER`]; an absent FID keeps its column empty.
    pub fn csv_line(&self) -> String {
        let fid = self.fid.map(|v| format!("{v:.6}")).unwrap_or_default();
        format!(
            "{},{:.6},{:.6},{},{:.3},{}",
            self.epoch, self.d_loss, self.g_loss, fid, self.seconds, self.xai_active
        )
    }
}

/// Records in epoch order, 0..n with no gaps; `train` builds it that way.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainTrace {
    pub records: Vec<EpochRecord>,
}

impl TrainTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// (epoch, fid) for the epochs that were scored.
    pub fn fid_series(&self) -> Vec<(usize, f64)> {
        self.records.iter().filter_map(|r| r.fid.map(|f| (r.epoch, f))).collect()
    }
}

/// Receives each record as soon as its epoch finishes, so an aborted run
/// still leaves the completed rows behind.
pub trait TraceSink {
    fn record(&mut self, rec: &EpochRecord) -> Result<()>;
}

/// Discards everything; for callers that only want the returned trace.
pub struct NullSink;

impl TraceSink for NullSink {
    fn record(&mut self, _rec: &EpochRecord) -> Result<()> {
        Ok(())
    }
}

/// Writes the header before the first row and flushes after every row.
pub struct CsvSink<W: Write> {
    out: W,
    header_written: bool,
}

impl<W: Write> CsvSink<W> {
    pub fn new(out: W) -> Self {
        CsvSink { out, header_written: false }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> TraceSink for CsvSink<W> {
    fn record(&mut self, rec: &EpochRecord) -> Result<()> {
        if !self.header_written {
            writeln!(self.out, "{CSV_HEADER}")?;
            self.header_written = true;
        }
        writeln!(self.out, "{}", rec.csv_line())?;
        self.out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(epoch: usize, fid: Option<f64>) -> EpochRecord {
        EpochRecord {
            epoch,
            d_loss: 1.3862943611,
            g_loss: 0.6931471805,
            fid,
            seconds: 2.5,
            xai_active: epoch >= 1,
        }
    }

    #[test]
    fn csv_line_matches_header_and_leaves_missing_fid_empty() {
        assert_eq!(CSV_HEADER.split(',').count(), 6);
        let with = rec(0, Some(231.4));
        assert_eq!(with.csv_line(), "0,1.386294,0.693147,231.400000,2.500,false");
        let without = rec(1, None);
        assert_eq!(without.csv_line(), "1,1.386294,0.693147,,2.500,true");
    }

    #[test]
    fn csv_sink_writes_header_once_and_all_rows() {
        let mut sink = CsvSink::new(Vec::new());
        sink.record(&rec(0, Some(10.0))).unwrap();
        sink.record(&rec(1, None)).unwrap();
        let text = String::from_utf8(sink.into_inner()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].starts_with("0,"));
        assert!(lines[2].starts_with("1,"));
    }

    #[test]
    fn fid_series_skips_unscored_epochs() {
        let trace = TrainTrace {
            records: vec![rec(0, Some(5.0)), rec(1, None), rec(2, Some(3.0))],
        };
        assert_eq!(trace.fid_series(), vec![(0, 5.0), (2, 3.0)]);
    }
}
