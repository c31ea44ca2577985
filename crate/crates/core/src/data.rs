//! Daily weather ingestion, the model-space transform, standardization and
//! training-window slicing.

use std::io::Write;

use chrono::NaiveDate;
use thiserror::Error;

/// Value substituted for zeros in the gamma-distributed variables.
pub const DEFAULT_ZERO_FLOOR: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("gap in daily series: {missing} missing between {after} and {before}")]
    Gap {
        after: NaiveDate,
        before: NaiveDate,
        missing: NaiveDate,
    },
    #[error("line {line}: date {date} does not follow {previous}")]
    NotAscending {
        line: u64,
        date: NaiveDate,
        previous: NaiveDate,
    },
    #[error("line {line}: constraint violated: {message}")]
    Constraint { line: u64, message: String },
    #[error("line {line}: {message}")]
    Format { line: u64, message: String },
    #[error("missing column {0:?} in header")]
    MissingColumn(&'static str),
    #[error("no data rows")]
    Empty,
    #[error("{variable} has zero variance over the fitted range")]
    Degenerate { variable: &'static str },
    #[error("insufficient data: series has {available} days, window needs {required}")]
    InsufficientData { available: usize, required: usize },
    #[error("invalid window geometry: {0}")]
    InvalidWindow(String),
    #[error("date {date} outside series range {start}..={end}")]
    OutOfRange {
        date: NaiveDate,
        start: NaiveDate,
        end: NaiveDate,
    },
    #[error("temperature range must be positive, got {0}")]
    NonPositiveDiff(f64),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One observed day in raw units: MJ/m², °C, °C, mm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DailyRecord {
    pub date: NaiveDate,
    pub radn: f64,
    pub mint: f64,
    pub maxt: f64,
    pub rain: f64,
}

impl DailyRecord {
    pub(crate) fn check(&self, line: u64) -> Result<(), DataError> {
        let violation = |message: String| Err(DataError::Constraint { line, message });
        for (name, v) in [
            ("radn", self.radn),
            ("mint", self.mint),
            ("maxt", self.maxt),
            ("rain", self.rain),
        ] {
            if !v.is_finite() {
                return violation(format!("{name} is not finite"));
            }
        }
        if self.maxt < self.mint {
            return violation(format!("maxt {} < mint {}", self.maxt, self.mint));
        }
        if self.radn < 0.0 {
            return violation(format!("radn {} < 0", self.radn));
        }
        if self.rain < 0.0 {
            return violation(format!("rain {} < 0", self.rain));
        }
        Ok(())
    }

    pub fn values(&self) -> [f64; 4] {
        [self.radn, self.mint, self.maxt, self.rain]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Location {
    pub name: String,
    pub latitude: f64,
}

impl Default for Location {
    fn default() -> Self {
        Self {
            name: "unknown".into(),
            latitude: 0.0,
        }
    }
}

/// Gap-free run of consecutive calendar days.
#[derive(Clone, Debug, PartialEq)]
pub struct WeatherSeries {
    records: Vec<DailyRecord>,
    pub location: Location,
}

impl WeatherSeries {
    /// Validates day continuity and the per-day constraints.
    pub fn new(records: Vec<DailyRecord>, location: Location) -> Result<Self, DataError> {
        for (i, r) in records.iter().enumerate() {
            let line = i as u64 + 1;
            r.check(line)?;
            if i > 0 {
                check_successor(records[i - 1].date, r.date, line)?;
            }
        }
        Ok(Self { records, location })
    }

    pub fn records(&self) -> &[DailyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn start_date(&self) -> Option<NaiveDate> {
        self.records.first().map(|r| r.date)
    }

    pub fn end_date(&self) -> Option<NaiveDate> {
        self.records.last().map(|r| r.date)
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let start = self.start_date()?;
        let offset = (date - start).num_days();
        (offset >= 0 && (offset as usize) < self.len()).then_some(offset as usize)
    }

    fn range_error(&self, date: NaiveDate) -> DataError {
        DataError::OutOfRange {
            date,
            start: self.start_date().unwrap_or(date),
            end: self.end_date().unwrap_or(date),
        }
    }

    /// Inclusive date slice.
    pub fn slice_dates(&self, start: NaiveDate, end: NaiveDate) -> Result<WeatherSeries, DataError> {
        let i = self.index_of(start).ok_or_else(|| self.range_error(start))?;
        let j = self.index_of(end).ok_or_else(|| self.range_error(end))?;
        if j < i {
            return Err(DataError::InvalidWindow(format!("end {end} precedes start {start}")));
        }
        Ok(Self {
            records: self.records[i..=j].to_vec(),
            location: self.location.clone(),
        })
    }

    /// The `count` days ending on `last` inclusive.
    pub fn tail_ending(&self, last: NaiveDate, count: usize) -> Result<WeatherSeries, DataError> {
        let j = self.index_of(last).ok_or_else(|| self.range_error(last))?;
        if j + 1 < count {
            return Err(DataError::InsufficientData {
                available: j + 1,
                required: count,
            });
        }
        Ok(Self {
            records: self.records[j + 1 - count..=j].to_vec(),
            location: self.location.clone(),
        })
    }
}

pub(crate) fn check_successor(previous: NaiveDate, date: NaiveDate, line: u64) -> Result<(), DataError> {
    let Some(next) = previous.succ_opt() else {
        return Err(DataError::NotAscending { line, date, previous });
    };
    if date == next {
        Ok(())
    } else if date > next {
        Err(DataError::Gap {
            after: previous,
            before: date,
            missing: next,
        })
    } else {
        Err(DataError::NotAscending { line, date, previous })
    }
}

const CSV_COLUMNS: [&str; 5] = ["date", "radn", "mint", "maxt", "rain"];

/// Parses `date,radn,mint,maxt,rain` text (columns located by header name,
/// extra columns ignored). Dates are ISO-8601 and must be consecutive.
pub fn parse_weather_csv(bytes: &[u8]) -> Result<WeatherSeries, DataError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = reader.headers()?.clone();
    let mut index = [0usize; 5];
    for (slot, name) in index.iter_mut().zip(CSV_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or(DataError::MissingColumn(name))?;
    }

    let mut records: Vec<DailyRecord> = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| {
            row.get(index[i]).ok_or_else(|| DataError::Format {
                line,
                message: format!("missing {} field", CSV_COLUMNS[i]),
            })
        };
        let date = NaiveDate::parse_from_str(field(0)?, "%Y-%m-%d").map_err(|e| DataError::Format {
            line,
            message: format!("bad date {:?}: {e}", field(0).unwrap_or_default()),
        })?;
        let mut vals = [0.0; 4];
        for (k, v) in vals.iter_mut().enumerate() {
            let text = field(k + 1)?;
            *v = text.parse::<f64>().map_err(|_| DataError::Format {
                line,
                message: format!("cannot parse {} value {text:?}", CSV_COLUMNS[k + 1]),
            })?;
        }
        let record = DailyRecord {
            date,
            radn: vals[0],
            mint: vals[1],
            maxt: vals[2],
            rain: vals[3],
        };
        record.check(line)?;
        if let Some(prev) = records.last() {
            check_successor(prev.date, date, line)?;
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(WeatherSeries {
        records,
        location: Location::default(),
    })
}

pub fn write_weather_csv<W: Write>(series: &WeatherSeries, mut out: W) -> Result<(), DataError> {
    writeln!(out, "date,radn,mint,maxt,rain")?;
    for r in series.records() {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.date.format("%Y-%m-%d"),
            r.radn,
            r.mint,
            r.maxt,
            r.rain
        )?;
    }
    Ok(())
}

/// Series in model space: per day `[radn, mint, diff, rain]` with the
/// gamma-distributed entries floored at `zero_floor`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformedSeries {
    pub start: NaiveDate,
    pub days: Vec<[f64; 4]>,
    pub zero_floor: f64,
}

impl TransformedSeries {
    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn end_date(&self) -> NaiveDate {
        self.start + chrono::Days::new(self.days.len().saturating_sub(1) as u64)
    }
}

/// `diff = maxt - mint`; radn, diff and rain below `zero_floor` (in practice,
/// exact zeros) are raised to it. mint is untouched.
pub fn to_model_space(series: &WeatherSeries, zero_floor: f64) -> TransformedSeries {
    let days = series
        .records()
        .iter()
        .map(|r| {
            [
                r.radn.max(zero_floor),
                r.mint,
                (r.maxt - r.mint).max(zero_floor),
                r.rain.max(zero_floor),
            ]
        })
        .collect();
    TransformedSeries {
        start: series.start_date().unwrap_or_default(),
        days,
        zero_floor,
    }
}

/// Inverse transform of one day: `[radn, mint, diff, rain]` to
/// `[radn, mint, maxt, rain]`.
pub fn from_model_space(day: [f64; 4]) -> Result<[f64; 4], DataError> {
    if !(day[2] > 0.0) {
        return Err(DataError::NonPositiveDiff(day[2]));
    }
    Ok([day[0], day[1], day[1] + day[2], day[3]])
}

/// Per-variable mean and population standard deviation of network inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardizationStats {
    pub mean: [f64; 4],
    pub std: [f64; 4],
    pub fitted_start: NaiveDate,
    pub fitted_end: NaiveDate,
}

impl StandardizationStats {
    pub fn apply(&self, day: &[f64; 4]) -> [f64; 4] {
        std::array::from_fn(|v| (day[v] - self.mean[v]) / self.std[v])
    }

    pub fn apply_value(&self, var: usize, value: f64) -> f64 {
        (value - self.mean[var]) / self.std[var]
    }
}

pub fn fit_standardization(train: &TransformedSeries) -> Result<StandardizationStats, DataError> {
    let n = train.len();
    if n < 2 {
        return Err(DataError::InsufficientData {
            available: n,
            required: 2,
        });
    }
    let mut mean = [0.0; 4];
    let mut std = [0.0; 4];
    for v in 0..4 {
        let m = train.days.iter().map(|d| d[v]).sum::<f64>() / n as f64;
        let var = train.days.iter().map(|d| (d[v] - m).powi(2)).sum::<f64>() / n as f64;
        if !(var > 0.0) {
            return Err(DataError::Degenerate {
                variable: crate::Variable::ALL[v].name(),
            });
        }
        mean[v] = m;
        std[v] = var.sqrt();
    }
    Ok(StandardizationStats {
        mean,
        std,
        fitted_start: train.start,
        fitted_end: train.end_date(),
    })
}

/// Every length-`window_len` slice of a transformed series. Within a window
/// the first `t0` days only condition; days `t0+1..=window_len` are targets.
#[derive(Clone, Debug)]
pub struct TrainingWindowSet<'a> {
    series: &'a TransformedSeries,
    window_len: usize,
    t0: usize,
}

impl<'a> TrainingWindowSet<'a> {
    pub fn series(&self) -> &'a TransformedSeries {
        self.series
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn t0(&self) -> usize {
        self.t0
    }

    pub fn horizon(&self) -> usize {
        self.window_len - self.t0
    }

    pub fn len(&self) -> usize {
        self.series.len() - self.window_len + 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Offsets into the series at which windows start.
    pub fn starts(&self) -> std::ops::Range<usize> {
        0..self.len()
    }

    pub fn window(&self, k: usize) -> &'a [[f64; 4]] {
        &self.series.days[k..k + self.window_len]
    }

    pub fn targets(&self, k: usize) -> &'a [[f64; 4]] {
        &self.series.days[k + self.t0..k + self.window_len]
    }
}

pub fn make_windows(
    series: &TransformedSeries,
    window_len: usize,
    t0: usize,
) -> Result<TrainingWindowSet<'_>, DataError> {
    if t0 == 0 || t0 >= window_len {
        return Err(DataError::InvalidWindow(format!(
            "need 0 < t0 < T, got t0={t0} T={window_len}"
        )));
    }
    if series.len() < window_len {
        return Err(DataError::InsufficientData {
            available: series.len(),
            required: window_len,
        });
    }
    Ok(TrainingWindowSet { series, window_len, t0 })
}

/// Splits after `boundary`: the first part ends on it, the second starts the
/// following day (and may be empty).
pub fn split_by_date(series: &WeatherSeries, boundary: NaiveDate) -> Result<(WeatherSeries, WeatherSeries), DataError> {
    let i = series.index_of(boundary).ok_or_else(|| series.range_error(boundary))?;
    let (a, b) = series.records.split_at(i + 1);
    Ok((
        WeatherSeries {
            records: a.to_vec(),
            location: series.location.clone(),
        },
        WeatherSeries {
            records: b.to_vec(),
            location: series.location.clone(),
        },
    ))
}
