//! On-disk artifact formats: metrics CSV, step log, evaluation curve CSV,
//! and the sweep summary table. Every CSV starts with a
//! `# format_version=1` comment line followed by the header row.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use super::{EpisodeMetrics, SummaryRow};

pub const CSV_FORMAT_VERSION: u32 = 1;

pub(crate) struct CsvSink {
    inner: BufWriter<File>,
}

impl CsvSink {
    pub(crate) fn create(path: &Path, header: &str) -> io::Result<Self> {
        let mut inner = BufWriter::new(File::create(path)?);
        writeln!(inner, "# format_version={CSV_FORMAT_VERSION}")?;
        writeln!(inner, "{header}")?;
        Ok(Self { inner })
    }

    pub(crate) fn row(&mut self, line: std::fmt::Arguments<'_>) -> io::Result<()> {
        writeln!(self.inner, "{line}")
    }

    pub(crate) fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

pub(crate) const METRICS_HEADER: &str =
    "episode_index,global_step,cumulative_reward_pct,trades,epsilon,mean_loss";
pub(crate) const STEP_LOG_HEADER: &str = "global_step,epsilon,loss";
pub(crate) const CURVE_HEADER: &str = "step,cumulative_reward_pct";
pub(crate) const TRAIN_EVAL_HEADER: &str = "global_step,eval_return_pct";
pub(crate) const SUMMARY_HEADER: &str =
    "arch,batch_size,return_no_commission_pct,return_with_commission_pct";

pub(crate) fn metrics_row(m: &EpisodeMetrics) -> String {
    format!(
        "{},{},{},{},{},{}",
        m.episode_index, m.global_step, m.cumulative_reward, m.trades, m.epsilon, m.mean_loss
    )
}

/// Writes a whole metrics table at a path.
pub fn write_metrics_csv(path: &Path, rows: &[EpisodeMetrics]) -> io::Result<()> {
    let mut sink = CsvSink::create(path, METRICS_HEADER)?;
    for m in rows {
        sink.row(format_args!("{}", metrics_row(m)))?;
    }
    sink.flush()
}

/// Writes a cumulative-reward curve.
pub fn write_curve_csv(path: &Path, points: &[(u64, f64)]) -> io::Result<()> {
    let mut sink = CsvSink::create(path, CURVE_HEADER)?;
    for (step, value) in points {
        sink.row(format_args!("{step},{value}"))?;
    }
    sink.flush()
}

/// Writes the sweep summary table (one row per arch x batch cell).
pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> io::Result<()> {
    let mut sink = CsvSink::create(path, SUMMARY_HEADER)?;
    for r in rows {
        let no_c = r
            .return_no_commission_pct
            .map(|v| v.to_string())
            .unwrap_or_default();
        let with_c = r
            .return_with_commission_pct
            .map(|v| v.to_string())
            .unwrap_or_default();
        sink.row(format_args!("{},{},{no_c},{with_c}", r.arch, r.batch_size))?;
    }
    sink.flush()
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>, io::Error> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .from_reader(File::open(path)?))
}

fn parse_err(path: &Path, what: &str) -> io::Error {
    io::Error::new(
        io::ErrorKind::InvalidData,
        format!("{}: {what}", path.display()),
    )
}

/// Reads a metrics CSV written by [`write_metrics_csv`] / the trainer.
pub fn read_metrics_csv(path: &Path) -> io::Result<Vec<EpisodeMetrics>> {
    let mut rdr = csv_reader(path)?;
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(path, &e.to_string()))?
        .clone();
    let idx = |name: &str| -> io::Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(path, &format!("missing column {name}")))
    };
    let (ci_ep, ci_step, ci_rew, ci_trades, ci_eps, ci_loss) = (
        idx("episode_index")?,
        idx("global_step")?,
        idx("cumulative_reward_pct")?,
        idx("trades")?,
        idx("epsilon")?,
        idx("mean_loss")?,
    );
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(path, &e.to_string()))?;
        let get = |i: usize| rec.get(i).unwrap_or("");
        out.push(EpisodeMetrics {
            episode_index: get(ci_ep).parse().map_err(|_| parse_err(path, "bad episode_index"))?,
            global_step: get(ci_step).parse().map_err(|_| parse_err(path, "bad global_step"))?,
            cumulative_reward: get(ci_rew)
                .parse()
                .map_err(|_| parse_err(path, "bad cumulative_reward_pct"))?,
            trades: get(ci_trades).parse().map_err(|_| parse_err(path, "bad trades"))?,
            steps: 0,
            epsilon: get(ci_eps).parse().map_err(|_| parse_err(path, "bad epsilon"))?,
            mean_loss: get(ci_loss).parse().map_err(|_| parse_err(path, "bad mean_loss"))?,
        });
    }
    Ok(out)
}

/// Reads a two-column curve CSV (step, value).
pub fn read_curve_csv(path: &Path) -> io::Result<Vec<(u64, f64)>> {
    let mut rdr = csv_reader(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(path, &e.to_string()))?;
        let step: u64 = rec
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(path, "bad step column"))?;
        let value: f64 = rec
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(path, "bad value column"))?;
        out.push((step, value));
    }
    Ok(out)
}

/// Column names of a CSV, ignoring leading comment lines.
pub fn csv_header(path: &Path) -> io::Result<Vec<String>> {
    let mut rdr = csv_reader(path)?;
    Ok(rdr
        .headers()
        .map_err(|e| parse_err(path, &e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect())
}
