//! Smoothed weather error tables and yield error statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use thiserror::Error;

use crate::data::{DataError, WeatherSeries};
use crate::sampler::Ensemble;

#[derive(Debug, Error)]
pub enum EvaluateError {
    #[error("truth covers {truth_start}..={truth_end} but the ensemble spans {start}..={end}")]
    RangeMismatch {
        start: NaiveDate,
        end: NaiveDate,
        truth_start: NaiveDate,
        truth_end: NaiveDate,
    },
    #[error("ensemble is too short for a {0} table")]
    TooShort(Period),
    #[error("no sample yields")]
    EmptySamples,
    #[error("metric sets differ: {0}")]
    KeyMismatch(String),
    #[error("no true yield for {crop}/{slot}")]
    MissingTruth { crop: String, slot: String },
    #[error("line {line}: {message}")]
    Format { line: u64, message: String },
    #[error("unknown period {0:?} (expected day, week or month)")]
    UnknownPeriod(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Period {
    Day,
    Week,
    Month,
}

impl Period {
    pub const ALL: [Period; 3] = [Period::Day, Period::Week, Period::Month];

    pub fn name(self) -> &'static str {
        match self {
            Period::Day => "day",
            Period::Week => "week",
            Period::Month => "month",
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Period {
    type Err = EvaluateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "day" => Ok(Period::Day),
            "week" => Ok(Period::Week),
            "month" => Ok(Period::Month),
            _ => Err(EvaluateError::UnknownPeriod(s.to_string())),
        }
    }
}

/// Raw variables in table column order.
pub const TABLE_COLUMNS: [&str; 4] = ["radn", "mint", "maxt", "rain"];

const MONTHS: [&str; 12] = [
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];

pub const WEEKS_PER_YEAR: usize = 52;

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow {
    pub label: String,
    /// radn, mint, maxt, rain
    pub errors: [f64; 4],
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorTable {
    pub period: Period,
    pub rows: Vec<ErrorRow>,
    /// Average of the rows.
    pub summary: [f64; 4],
}

impl ErrorTable {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "period,{}", TABLE_COLUMNS.join(","))?;
        for r in self
            .rows
            .iter()
            .map(|r| (&r.label, &r.errors))
            .chain([(&"Average".to_string(), &self.summary)])
        {
            writeln!(out, "{},{},{},{},{}", r.0, r.1[0], r.1[1], r.1[2], r.1[3])?;
        }
        Ok(())
    }

    /// `<period>/<variable>` summary entries, for [`compare_methods`].
    pub fn metrics(&self) -> BTreeMap<String, f64> {
        TABLE_COLUMNS
            .iter()
            .zip(self.summary)
            .map(|(v, e)| (format!("{}/{v}", self.period), e))
            .collect()
    }
}

/// Groups of day indices, one group per period occurrence, each tagged
/// with the row it folds into.
fn period_groups(dates: &[NaiveDate], period: Period) -> Vec<(usize, Vec<usize>)> {
    match period {
        Period::Day => (0..dates.len()).map(|t| (t, vec![t])).collect(),
        Period::Week => (0..dates.len() / 7)
            .map(|b| (b % WEEKS_PER_YEAR, (7 * b..7 * b + 7).collect()))
            .collect(),
        Period::Month => {
            let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
            let mut current: Option<(i32, u32)> = None;
            for (t, d) in dates.iter().enumerate() {
                let key = (d.year(), d.month0());
                if current != Some(key) {
                    groups.push((d.month0() as usize, Vec::new()));
                    current = Some(key);
                }
                groups.last_mut().expect("pushed").1.push(t);
            }
            groups
        }
    }
}

fn row_label(period: Period, row: usize) -> String {
    match period {
        Period::Day => format!("Day {:03}", row + 1),
        Period::Week => format!("Week {:02}", row + 1),
        Period::Month => MONTHS[row].to_string(),
    }
}

/// Per period occurrence: average generated and true values within the
/// period for each member, take the absolute difference, average over
/// members. Occurrences sharing a row (the same week index or calendar
/// month in later years) are averaged into that row; the summary averages
/// the rows.
pub fn smoothed_abs_error(
    ensemble: &Ensemble,
    truth: &WeatherSeries,
    period: Period,
) -> Result<ErrorTable, EvaluateError> {
    let (start, end) = (ensemble.start_date(), ensemble.end_date());
    let mismatch = || EvaluateError::RangeMismatch {
        start,
        end,
        truth_start: truth.start_date().unwrap_or(start),
        truth_end: truth.end_date().unwrap_or(end),
    };
    let truth = match (truth.index_of(start), truth.index_of(end)) {
        (Some(_), Some(_)) => truth.slice_dates(start, end)?,
        _ => return Err(mismatch()),
    };
    let dates: Vec<NaiveDate> = truth.records().iter().map(|r| r.date).collect();
    let groups = period_groups(&dates, period);
    if groups.is_empty() {
        return Err(EvaluateError::TooShort(period));
    }
    let n_members = ensemble.len() as f64;
    let truth_vals: Vec<[f64; 4]> = truth.records().iter().map(|r| r.values()).collect();

    let n_rows = groups.iter().map(|g| g.0).max().expect("non-empty") + 1;
    let mut row_sum = vec![[0.0; 4]; n_rows];
    let mut row_count = vec![0usize; n_rows];
    for (row, days) in &groups {
        let len = days.len() as f64;
        let mut true_mean = [0.0; 4];
        for &t in days {
            for v in 0..4 {
                true_mean[v] += truth_vals[t][v];
            }
        }
        true_mean.iter_mut().for_each(|x| *x /= len);
        let mut err = [0.0; 4];
        for m in ensemble.members() {
            let recs = m.records();
            let mut gen_mean = [0.0; 4];
            for &t in days {
                let vals = recs[t].values();
                for v in 0..4 {
                    gen_mean[v] += vals[v];
                }
            }
            for v in 0..4 {
                err[v] += (gen_mean[v] / len - true_mean[v]).abs();
            }
        }
        for v in 0..4 {
            row_sum[*row][v] += err[v] / n_members;
        }
        row_count[*row] += 1;
    }
    let rows: Vec<ErrorRow> = (0..n_rows)
        .filter(|&r| row_count[r] > 0)
        .map(|r| ErrorRow {
            label: row_label(period, r),
            errors: row_sum[r].map(|s| s / row_count[r] as f64),
        })
        .collect();
    let mut summary = [0.0; 4];
    for r in &rows {
        for v in 0..4 {
            summary[v] += r.errors[v];
        }
    }
    summary.iter_mut().for_each(|s| *s /= rows.len() as f64);
    Ok(ErrorTable { period, rows, summary })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct YieldErrorStats {
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation of `|y - truth|`.
pub fn yield_error_stats(samples: &[f64], truth: f64) -> Result<YieldErrorStats, EvaluateError> {
    if samples.is_empty() {
        return Err(EvaluateError::EmptySamples);
    }
    let n = samples.len() as f64;
    let errs: Vec<f64> = samples.iter().map(|y| (y - truth).abs()).collect();
    let mean = errs.iter().sum::<f64>() / n;
    let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    Ok(YieldErrorStats { mean, std: var.sqrt() })
}

/// `(crop, slot)`, where a slot is a year or a rotation label.
pub type YieldKey = (String, String);

/// Simulated yields per key, in file order.
pub type YieldSamples = BTreeMap<YieldKey, Vec<f64>>;

fn yield_reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(bytes)
}

fn header_index(headers: &csv::StringRecord, name: &'static str) -> Result<usize, EvaluateError> {
    headers.iter().position(|h| h == name).ok_or(EvaluateError::Format {
        line: 1,
        message: format!("missing column {name:?}"),
    })
}

fn parse_yield_value(s: &str, line: u64) -> Result<f64, EvaluateError> {
    let y: f64 = s.parse().map_err(|_| EvaluateError::Format {
        line,
        message: format!("bad yield {s:?}"),
    })?;
    if !(y.is_finite() && y >= 0.0) {
        return Err(EvaluateError::Format {
            line,
            message: format!("yield must be finite and non-negative, got {y}"),
        });
    }
    Ok(y)
}

/// Reads `member,crop,slot,yield_kg_ha`.
pub fn parse_yield_csv(bytes: &[u8]) -> Result<YieldSamples, EvaluateError> {
    let mut rdr = yield_reader(bytes);
    let h = rdr.headers()?.clone();
    let (im, ic, is, iy) = (
        header_index(&h, "member")?,
        header_index(&h, "crop")?,
        header_index(&h, "slot")?,
        header_index(&h, "yield_kg_ha")?,
    );
    let mut out = YieldSamples::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| {
            row.get(i).ok_or_else(|| EvaluateError::Format {
                line,
                message: "missing field".into(),
            })
        };
        field(im)?.parse::<usize>().map_err(|_| EvaluateError::Format {
            line,
            message: format!("bad member index {:?}", row.get(im)),
        })?;
        let y = parse_yield_value(field(iy)?, line)?;
        out.entry((field(ic)?.to_string(), field(is)?.to_string()))
            .or_default()
            .push(y);
    }
    if out.is_empty() {
        return Err(EvaluateError::EmptySamples);
    }
    Ok(out)
}

/// Reads `crop,slot,yield_kg_ha` (the simulation under observed weather).
pub fn parse_truth_yield_csv(bytes: &[u8]) -> Result<BTreeMap<YieldKey, f64>, EvaluateError> {
    let mut rdr = yield_reader(bytes);
    let h = rdr.headers()?.clone();
    let (ic, is, iy) = (
        header_index(&h, "crop")?,
        header_index(&h, "slot")?,
        header_index(&h, "yield_kg_ha")?,
    );
    let mut out = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let get = |i| row.get(i).unwrap_or_default();
        let key = (get(ic).to_string(), get(is).to_string());
        let y = parse_yield_value(get(iy), line)?;
        if out.insert(key.clone(), y).is_some() {
            return Err(EvaluateError::Format {
                line,
                message: format!("duplicate truth for {}/{}", key.0, key.1),
            });
        }
    }
    Ok(out)
}

pub fn yield_table(
    samples: &YieldSamples,
    truth: &BTreeMap<YieldKey, f64>,
) -> Result<BTreeMap<YieldKey, YieldErrorStats>, EvaluateError> {
    samples
        .iter()
        .map(|(key, ys)| {
            let t = truth.get(key).ok_or_else(|| EvaluateError::MissingTruth {
                crop: key.0.clone(),
                slot: key.1.clone(),
            })?;
            Ok((key.clone(), yield_error_stats(ys, *t)?))
        })
        .collect()
}

/// `<crop>/<slot>/mean` and `<crop>/<slot>/std` entries.
pub fn yield_metrics(table: &BTreeMap<YieldKey, YieldErrorStats>) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for ((crop, slot), s) in table {
        out.insert(format!("{crop}/{slot}/mean"), s.mean);
        out.insert(format!("{crop}/{slot}/std"), s.std);
    }
    out
}

/// Table rows `slot,method,<crop> mean,<crop> std,...` for two methods.
pub fn write_yield_comparison<W: Write>(
    a_name: &str,
    a: &BTreeMap<YieldKey, YieldErrorStats>,
    b_name: &str,
    b: &BTreeMap<YieldKey, YieldErrorStats>,
    mut out: W,
) -> std::io::Result<()> {
    let crops: BTreeSet<&String> = a.keys().map(|k| &k.0).collect();
    let slots: BTreeSet<&String> = a.keys().map(|k| &k.1).collect();
    write!(out, "slot,method")?;
    for c in &crops {
        write!(out, ",{c} mean,{c} std")?;
    }
    writeln!(out)?;
    for slot in slots {
        for (name, table) in [(a_name, a), (b_name, b)] {
            write!(out, "{slot},{name}")?;
            for c in &crops {
                match table.get(&((*c).clone(), slot.clone())) {
                    Some(s) => write!(out, ",{:.0},{:.0}", s.mean, s.std)?,
                    None => write!(out, ",,")?,
                }
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Comparison {
    pub a_wins: usize,
    pub b_wins: usize,
    pub ties: usize,
    /// Keys where `b` is strictly smaller.
    pub b_better: Vec<String>,
}

impl Comparison {
    pub fn total(&self) -> usize {
        self.a_wins + self.b_wins + self.ties
    }
}

/// Smaller is better on every metric; equal values are ties.
pub fn compare_methods(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> Result<Comparison, EvaluateError> {
    if !a.keys().eq(b.keys()) {
        let only_a: Vec<&String> = a.keys().filter(|k| !b.contains_key(*k)).collect();
        let only_b: Vec<&String> = b.keys().filter(|k| !a.contains_key(*k)).collect();
        return Err(EvaluateError::KeyMismatch(format!(
            "only in first: {only_a:?}; only in second: {only_b:?}"
        )));
    }
    let mut c = Comparison {
        a_wins: 0,
        b_wins: 0,
        ties: 0,
        b_better: Vec::new(),
    };
    for (k, x) in a {
        let y = b[k];
        if *x < y {
            c.a_wins += 1;
        } else if y < *x {
            c.b_wins += 1;
            c.b_better.push(k.clone());
        } else {
            c.ties += 1;
        }
    }
    Ok(c)
}
