//! Minute-bar ingestion, validation, and the relative (percent-of-open)
//! encoding consumed by the agent.
//!
//! Input files are CSV with a header row naming the six columns. Timestamps
//! are either integer epoch-seconds or ISO-8601 (auto-detected from the
//! first data row; a file must use one format throughout). Errors carry
//! 1-based file line numbers, counting the header as line 1.

use std::io::{Read, Write};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("line {0}: malformed row: {1}")]
    MalformedRow(usize, String),
    #[error("line {0}: bar invariant violated (OHLC ordering / positivity)")]
    InvariantViolation(usize),
    #[error("line {0}: timestamp does not strictly increase")]
    NonMonotonicTimestamp(usize),
    #[error("empty series")]
    EmptySeries,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One minute of raw market data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    /// Epoch-seconds, UTC.
    pub timestamp: i64,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl Bar {
    /// OHLC ordering, positive open, non-negative volume, finite fields.
    pub fn is_valid(&self) -> bool {
        let finite = self.open.is_finite()
            && self.high.is_finite()
            && self.low.is_finite()
            && self.close.is_finite()
            && self.volume.is_finite();
        finite
            && self.open > 0.0
            && self.low <= self.open
            && self.open <= self.high
            && self.low <= self.close
            && self.close <= self.high
            && self.low <= self.high
            && self.volume >= 0.0
    }
}

/// A bar re-expressed relative to its own open price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeBar {
    /// (high - open) / open, always >= 0 for a valid bar.
    pub rel_high: f64,
    /// (low - open) / open, always <= 0 for a valid bar.
    pub rel_low: f64,
    /// (close - open) / open.
    pub rel_close: f64,
    /// volume / volume_scale, >= 0.
    pub norm_volume: f64,
}

/// Column names for the six fields of an input CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BarFormat {
    pub timestamp: String,
    pub open: String,
    pub high: String,
    pub low: String,
    pub close: String,
    pub volume: String,
}

impl Default for BarFormat {
    fn default() -> Self {
        Self {
            timestamp: "timestamp".into(),
            open: "open".into(),
            high: "high".into(),
            low: "low".into(),
            close: "close".into(),
            volume: "volume".into(),
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum TimestampKind {
    Epoch,
    Iso,
}

const ISO_FORMATS: &[&str] = &[
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d %H:%M",
];

fn parse_iso(s: &str) -> Option<i64> {
    ISO_FORMATS
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .map(|dt| dt.and_utc().timestamp())
}

/// Parses bars from a CSV stream, enforcing per-bar invariants and strictly
/// increasing timestamps.
pub fn parse_bars<R: Read>(reader: R, format: &BarFormat) -> Result<Vec<Bar>, MarketDataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);

    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize, MarketDataError> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| MarketDataError::MalformedRow(1, format!("missing column '{name}'")))
    };
    let c_ts = col(&format.timestamp)?;
    let c_open = col(&format.open)?;
    let c_high = col(&format.high)?;
    let c_low = col(&format.low)?;
    let c_close = col(&format.close)?;
    let c_vol = col(&format.volume)?;

    let mut bars = Vec::new();
    let mut ts_kind: Option<TimestampKind> = None;

    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(i + 2);

        let field = |idx: usize| -> Result<&str, MarketDataError> {
            record
                .get(idx)
                .map(str::trim)
                .ok_or_else(|| MarketDataError::MalformedRow(line, "too few fields".into()))
        };
        let number = |idx: usize, name: &str| -> Result<f64, MarketDataError> {
            field(idx)?.parse::<f64>().map_err(|_| {
                MarketDataError::MalformedRow(line, format!("bad {name} value"))
            })
        };

        let ts_raw = field(c_ts)?;
        let kind = match ts_kind {
            Some(k) => k,
            None => {
                let k = if ts_raw.parse::<i64>().is_ok() {
                    TimestampKind::Epoch
                } else if parse_iso(ts_raw).is_some() {
                    TimestampKind::Iso
                } else {
                    return Err(MarketDataError::MalformedRow(
                        line,
                        "unrecognized timestamp format".into(),
                    ));
                };
                ts_kind = Some(k);
                k
            }
        };
        let timestamp = match kind {
            TimestampKind::Epoch => ts_raw.parse::<i64>().map_err(|_| {
                MarketDataError::MalformedRow(line, "expected epoch-seconds timestamp".into())
            })?,
            TimestampKind::Iso => parse_iso(ts_raw).ok_or_else(|| {
                MarketDataError::MalformedRow(line, "expected ISO-8601 timestamp".into())
            })?,
        };

        let bar = Bar {
            timestamp,
            open: number(c_open, "open")?,
            high: number(c_high, "high")?,
            low: number(c_low, "low")?,
            close: number(c_close, "close")?,
            volume: number(c_vol, "volume")?,
        };
        if !bar.is_valid() {
            return Err(MarketDataError::InvariantViolation(line));
        }
        if let Some(prev) = bars.last() {
            let prev: &Bar = prev;
            if bar.timestamp <= prev.timestamp {
                return Err(MarketDataError::NonMonotonicTimestamp(line));
            }
        }
        bars.push(bar);
    }
    Ok(bars)
}

/// Writes bars back to CSV (epoch-second timestamps). Inverse of
/// [`parse_bars`] on field values.
pub fn write_bars<W: Write>(
    bars: &[Bar],
    writer: W,
    format: &BarFormat,
) -> Result<(), MarketDataError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        format.timestamp.as_str(),
        format.open.as_str(),
        format.high.as_str(),
        format.low.as_str(),
        format.close.as_str(),
        format.volume.as_str(),
    ])?;
    for b in bars {
        w.write_record([
            b.timestamp.to_string(),
            b.open.to_string(),
            b.high.to_string(),
            b.low.to_string(),
            b.close.to_string(),
            b.volume.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Re-expresses a bar relative to its open; volume divided by `volume_scale`.
pub fn encode_relative(bar: &Bar, volume_scale: f64) -> RelativeBar {
    debug_assert!(bar.is_valid());
    debug_assert!(volume_scale > 0.0);
    RelativeBar {
        rel_high: (bar.high - bar.open) / bar.open,
        rel_low: (bar.low - bar.open) / bar.open,
        rel_close: (bar.close - bar.open) / bar.open,
        norm_volume: bar.volume / volume_scale,
    }
}

/// Mean volume of the series, or 1.0 when the mean is zero, so that
/// `norm_volume` is mean-relative and the degenerate all-zero case stays
/// well defined.
pub fn volume_scale_of(bars: &[Bar]) -> Result<f64, MarketDataError> {
    if bars.is_empty() {
        return Err(MarketDataError::EmptySeries);
    }
    let mean = bars.iter().map(|b| b.volume).sum::<f64>() / bars.len() as f64;
    Ok(if mean == 0.0 { 1.0 } else { mean })
}

/// Validated bar sequence plus its relative encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    bars: Vec<Bar>,
    rel: Vec<RelativeBar>,
    volume_scale: f64,
    pub source_id: String,
}

impl PriceSeries {
    /// Builds a series, validating bar invariants and strict timestamp
    /// ordering. Error line numbers here are 1-based bar indices.
    pub fn from_bars(bars: Vec<Bar>, source_id: impl Into<String>) -> Result<Self, MarketDataError> {
        for (i, b) in bars.iter().enumerate() {
            if !b.is_valid() {
                return Err(MarketDataError::InvariantViolation(i + 1));
            }
            if i > 0 && b.timestamp <= bars[i - 1].timestamp {
                return Err(MarketDataError::NonMonotonicTimestamp(i + 1));
            }
        }
        let volume_scale = if bars.is_empty() {
            1.0
        } else {
            volume_scale_of(&bars)?
        };
        let rel = bars.iter().map(|b| encode_relative(b, volume_scale)).collect();
        Ok(Self {
            bars,
            rel,
            volume_scale,
            source_id: source_id.into(),
        })
    }

    pub fn bars(&self) -> &[Bar] {
        &self.bars
    }

    pub fn rel(&self) -> &[RelativeBar] {
        &self.rel
    }

    pub fn volume_scale(&self) -> f64 {
        self.volume_scale
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    /// First `max_len` bars, keeping the parent's volume scale so the
    /// relative encoding is unchanged.
    pub fn truncated(&self, max_len: usize) -> PriceSeries {
        let n = max_len.min(self.len());
        PriceSeries {
            bars: self.bars[..n].to_vec(),
            rel: self.rel[..n].to_vec(),
            volume_scale: self.volume_scale,
            source_id: self.source_id.clone(),
        }
    }
}

/// Splits at `boundary_timestamp`: bars strictly before it go left, the rest
/// right. Both parts keep the parent's source id and volume scale, so their
/// concatenation reproduces the input exactly.
pub fn split_series(series: &PriceSeries, boundary_timestamp: i64) -> (PriceSeries, PriceSeries) {
    let idx = series
        .bars
        .partition_point(|b| b.timestamp < boundary_timestamp);
    let left = PriceSeries {
        bars: series.bars[..idx].to_vec(),
        rel: series.rel[..idx].to_vec(),
        volume_scale: series.volume_scale,
        source_id: series.source_id.clone(),
    };
    let right = PriceSeries {
        bars: series.bars[idx..].to_vec(),
        rel: series.rel[idx..].to_vec(),
        volume_scale: series.volume_scale,
        source_id: series.source_id.clone(),
    };
    (left, right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bar(ts: i64, o: f64, h: f64, l: f64, c: f64, v: f64) -> Bar {
        Bar {
            timestamp: ts,
            open: o,
            high: h,
            low: l,
            close: c,
            volume: v,
        }
    }

    fn seq_bars(n: usize) -> Vec<Bar> {
        (0..n)
            .map(|i| bar(60 * i as i64, 100.0, 101.0, 99.0, 100.5, 1000.0))
            .collect()
    }

    #[test]
    fn parses_iso_header_row() {
        let csv = "timestamp,open,high,low,close,volume\n\
                   2018-01-02T09:30,2695.0,2696.5,2694.0,2696.0,1200\n";
        let bars = parse_bars(csv.as_bytes(), &BarFormat::default()).unwrap();
        assert_eq!(bars.len(), 1);
        assert_eq!(bars[0].open, 2695.0);
        assert_eq!(bars[0].volume, 1200.0);
        // 2018-01-02T09:30:00Z
        assert_eq!(bars[0].timestamp, 1_514_885_400);
    }

    #[test]
    fn parses_epoch_timestamps() {
        let csv = "timestamp,open,high,low,close,volume\n\
                   1000,10.0,11.0,9.0,10.5,5\n\
                   1060,10.5,11.0,10.0,10.7,6\n";
        let bars = parse_bars(csv.as_bytes(), &BarFormat::default()).unwrap();
        assert_eq!(bars.len(), 2);
        assert_eq!(bars[1].timestamp, 1060);
    }

    #[test]
    fn high_below_low_is_invariant_violation() {
        let csv = "timestamp,open,high,low,close,volume\n\
                   1000,10.0,9.0,11.0,10.0,5\n";
        match parse_bars(csv.as_bytes(), &BarFormat::default()) {
            Err(MarketDataError::InvariantViolation(2)) => {}
            other => panic!("expected InvariantViolation(2), got {other:?}"),
        }
    }

    #[test]
    fn duplicate_timestamp_reports_line_number() {
        let csv = "timestamp,open,high,low,close,volume\n\
                   1000,10.0,11.0,9.0,10.5,5\n\
                   1000,10.5,11.0,10.0,10.7,6\n";
        match parse_bars(csv.as_bytes(), &BarFormat::default()) {
            Err(MarketDataError::NonMonotonicTimestamp(3)) => {}
            other => panic!("expected NonMonotonicTimestamp(3), got {other:?}"),
        }
    }

    #[test]
    fn mixed_timestamp_formats_rejected() {
        let csv = "timestamp,open,high,low,close,volume\n\
                   1000,10.0,11.0,9.0,10.5,5\n\
                   2018-01-02T09:30,10.5,11.0,10.0,10.7,6\n";
        match parse_bars(csv.as_bytes(), &BarFormat::default()) {
            Err(MarketDataError::MalformedRow(3, _)) => {}
            other => panic!("expected MalformedRow(3), got {other:?}"),
        }
    }

    #[test]
    fn renamed_columns_respected() {
        let csv = "time,o,h,l,c,vol\n1000,10.0,11.0,9.0,10.5,5\n";
        let fmt = BarFormat {
            timestamp: "time".into(),
            open: "o".into(),
            high: "h".into(),
            low: "l".into(),
            close: "c".into(),
            volume: "vol".into(),
        };
        let bars = parse_bars(csv.as_bytes(), &fmt).unwrap();
        assert_eq!(bars[0].close, 10.5);
    }

    #[test]
    fn encode_flat_bar_is_all_zero() {
        let b = bar(0, 100.0, 100.0, 100.0, 100.0, 0.0);
        let r = encode_relative(&b, 1.0);
        assert_eq!(
            (r.rel_high, r.rel_low, r.rel_close, r.norm_volume),
            (0.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn encode_hand_checked_ratios() {
        let b = bar(0, 100.0, 102.0, 99.0, 101.0, 500.0);
        let r = encode_relative(&b, 1000.0);
        assert!((r.rel_high - 0.02).abs() < 1e-12);
        assert!((r.rel_low - (-0.01)).abs() < 1e-12);
        assert!((r.rel_close - 0.01).abs() < 1e-12);
        assert!((r.norm_volume - 0.5).abs() < 1e-12);
    }

    #[test]
    fn encode_matches_ratio_arithmetic() {
        let b = bar(0, 2695.0, 2696.5, 2694.0, 2696.0, 1200.0);
        let r = encode_relative(&b, 1200.0);
        assert_eq!(r.rel_high, 1.5 / 2695.0);
        assert_eq!(r.rel_low, -1.0 / 2695.0);
        assert_eq!(r.rel_close, 1.0 / 2695.0);
        assert!((r.rel_high - 5.566e-4).abs() < 1e-6);
        assert!((r.rel_low - (-3.711e-4)).abs() < 1e-6);
    }

    #[test]
    fn volume_scale_examples() {
        let two = vec![
            bar(0, 1.0, 1.0, 1.0, 1.0, 100.0),
            bar(60, 1.0, 1.0, 1.0, 1.0, 300.0),
        ];
        assert_eq!(volume_scale_of(&two).unwrap(), 200.0);

        let zeros = vec![
            bar(0, 1.0, 1.0, 1.0, 1.0, 0.0),
            bar(60, 1.0, 1.0, 1.0, 1.0, 0.0),
        ];
        assert_eq!(volume_scale_of(&zeros).unwrap(), 1.0);

        let one = vec![bar(0, 1.0, 1.0, 1.0, 1.0, 1200.0)];
        assert_eq!(volume_scale_of(&one).unwrap(), 1200.0);

        assert!(matches!(
            volume_scale_of(&[]),
            Err(MarketDataError::EmptySeries)
        ));
    }

    #[test]
    fn split_partitions_by_boundary() {
        let s = PriceSeries::from_bars(seq_bars(10), "t").unwrap();
        let (a, b) = split_series(&s, 60 * 7);
        assert_eq!((a.len(), b.len()), (7, 3));

        let (a, b) = split_series(&s, -1);
        assert_eq!((a.len(), b.len()), (0, 10));

        let (a, b) = split_series(&s, 60 * 100);
        assert_eq!((a.len(), b.len()), (10, 0));
    }

    #[test]
    fn write_then_parse_is_identity() {
        let bars = vec![
            bar(1000, 10.0, 11.25, 9.5, 10.125, 42.0),
            bar(1060, 10.125, 10.5, 10.0, 10.25, 0.0),
        ];
        let mut buf = Vec::new();
        write_bars(&bars, &mut buf, &BarFormat::default()).unwrap();
        let back = parse_bars(buf.as_slice(), &BarFormat::default()).unwrap();
        assert_eq!(bars, back);
    }

    prop_compose! {
        fn valid_bar()(
            ts in 0i64..1_000_000,
            open in 0.01f64..10_000.0,
            up in 0.0f64..0.2,
            down in 0.0f64..0.2,
            blend in 0.0f64..1.0,
            volume in 0.0f64..1e7,
        ) -> Bar {
            let high = open * (1.0 + up);
            let low = open * (1.0 - down);
            let close = low + blend * (high - low);
            Bar { timestamp: ts, open, high, low, close, volume }
        }
    }

    proptest! {
        #[test]
        fn relative_encoding_invariants(b in valid_bar(), scale in 0.01f64..1e6) {
            prop_assume!(b.is_valid());
            let r = encode_relative(&b, scale);
            prop_assert!(r.rel_low <= 0.0 && 0.0 <= r.rel_high);
            prop_assert!(r.rel_low <= r.rel_close && r.rel_close <= r.rel_high);
            prop_assert!(r.norm_volume >= 0.0);
            // reconstruct close from the encoding
            let close = b.open * (1.0 + r.rel_close);
            prop_assert!((close - b.close).abs() <= 1e-9 * b.close.abs().max(1.0));
        }

        #[test]
        fn split_concat_reproduces_input(n in 1usize..40, frac in 0.0f64..1.2) {
            let s = PriceSeries::from_bars(seq_bars(n), "t").unwrap();
            let boundary = (60.0 * n as f64 * frac) as i64;
            let (a, b) = split_series(&s, boundary);
            let mut bars = a.bars().to_vec();
            bars.extend_from_slice(b.bars());
            prop_assert_eq!(bars, s.bars().to_vec());
            let mut rel = a.rel().to_vec();
            rel.extend_from_slice(b.rel());
            prop_assert_eq!(rel, s.rel().to_vec());
            prop_assert_eq!(a.source_id, s.source_id.clone());
        }
    }
}
