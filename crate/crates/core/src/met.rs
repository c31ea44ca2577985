//! Crop-simulator weather files (`.met`).
//!
//! ```text
//! [weather.met.weather]
//! ! location: Waite
//! latitude = -34.97
//! tav = 16.37 (oC)
//! amp = 10.81 (oC)
//!
//! year day radn maxt mint rain
//! () () (MJ/m^2) (oC) (oC) (mm)
//! 2021 78 18.20 27.40 12.10 0.00
//! ```
//!
//! Values are written with two decimals, and `tav`/`amp` are computed from
//! the written (rounded) values so that emit, parse, emit is byte-stable.

use std::io::Write;

use chrono::{Datelike, NaiveDate};
use thiserror::Error;

use crate::data::{check_successor, DailyRecord, DataError, Location, WeatherSeries};

#[derive(Debug, Error)]
pub enum MetError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("missing {0} in header")]
    MissingHeader(&'static str),
    #[error("no data rows")]
    Empty,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetFile {
    pub series: WeatherSeries,
    pub tav: f64,
    pub amp: f64,
}

fn round2(v: f64) -> f64 {
    format!("{v:.2}").parse().expect("formatted float parses")
}

/// `tav`: mean of the monthly means of daily mean temperature; `amp`: the
/// spread between the warmest and coldest monthly means. Months are pooled
/// across years.
pub fn tav_amp(records: &[DailyRecord]) -> (f64, f64) {
    let mut sum = [0.0; 12];
    let mut count = [0usize; 12];
    for r in records {
        let m = r.date.month0() as usize;
        sum[m] += (r.maxt + r.mint) / 2.0;
        count[m] += 1;
    }
    let means: Vec<f64> = (0..12)
        .filter(|&m| count[m] > 0)
        .map(|m| sum[m] / count[m] as f64)
        .collect();
    if means.is_empty() {
        return (0.0, 0.0);
    }
    let tav = means.iter().sum::<f64>() / means.len() as f64;
    let max = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = means.iter().copied().fold(f64::INFINITY, f64::min);
    (tav, max - min)
}

pub fn emit_met<W: Write>(series: &WeatherSeries, mut out: W) -> Result<(), MetError> {
    let rounded: Vec<DailyRecord> = series
        .records()
        .iter()
        .map(|r| DailyRecord {
            date: r.date,
            radn: round2(r.radn),
            mint: round2(r.mint),
            maxt: round2(r.maxt),
            rain: round2(r.rain),
        })
        .collect();
    let (tav, amp) = tav_amp(&rounded);
    let loc = &series.location;
    writeln!(out, "[weather.met.weather]")?;
    writeln!(out, "! location: {}", loc.name)?;
    writeln!(out, "latitude = {}", loc.latitude)?;
    writeln!(out, "tav = {tav:.2} (oC)")?;
    writeln!(out, "amp = {amp:.2} (oC)")?;
    writeln!(out)?;
    writeln!(out, "year day radn maxt mint rain")?;
    writeln!(out, "() () (MJ/m^2) (oC) (oC) (mm)")?;
    for r in &rounded {
        writeln!(
            out,
            "{} {} {:.2} {:.2} {:.2} {:.2}",
            r.date.year(),
            r.date.ordinal(),
            r.radn,
            r.maxt,
            r.mint,
            r.rain
        )?;
    }
    Ok(())
}

pub fn write_met_file(series: &WeatherSeries, path: impl AsRef<std::path::Path>) -> Result<(), MetError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    emit_met(series, &mut w)?;
    w.flush()?;
    Ok(())
}

fn header_value(rest: &str) -> &str {
    // Drop a trailing unit annotation such as "(oC)" or "(DECIMAL DEGREES)".
    let rest = rest.trim();
    match rest.find('(') {
        Some(i) => rest[..i].trim(),
        None => rest,
    }
}

/// Reads the columns `year day radn maxt mint rain` (any order, extra
/// columns ignored). Lines starting with `!` are comments; `! location:`
/// names the site.
pub fn parse_met(text: &str) -> Result<MetFile, MetError> {
    let mut location = Location::default();
    let mut latitude = None;
    let mut tav = None;
    let mut amp = None;
    let mut columns: Option<Vec<String>> = None;
    let mut units_skipped = false;
    let mut records: Vec<DailyRecord> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let fmt = |message: String| MetError::Format { line, message };
        let l = raw.trim();
        if l.is_empty() {
            continue;
        }
        if let Some(comment) = l.strip_prefix('!') {
            if let Some(name) = comment.trim().strip_prefix("location:") {
                location.name = name.trim().to_string();
            }
            continue;
        }
        if l.starts_with('[') {
            continue;
        }
        let Some(cols) = &columns else {
            if let Some((key, value)) = l.split_once('=') {
                let v = header_value(value.split('!').next().unwrap_or(""));
                let parse = |what: &str| v.parse::<f64>().map_err(|_| fmt(format!("bad {what} value {v:?}")));
                match key.trim().to_ascii_lowercase().as_str() {
                    "latitude" => latitude = Some(parse("latitude")?),
                    "tav" => tav = Some(parse("tav")?),
                    "amp" => amp = Some(parse("amp")?),
                    _ => {}
                }
                continue;
            }
            let names: Vec<String> = l.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
            for need in ["year", "day", "radn", "maxt", "mint", "rain"] {
                if !names.iter().any(|n| n == need) {
                    return Err(fmt(format!("column line lacks {need:?}")));
                }
            }
            columns = Some(names);
            continue;
        };
        if !units_skipped && l.starts_with('(') {
            units_skipped = true;
            continue;
        }
        units_skipped = true;
        let fields: Vec<&str> = l.split_whitespace().collect();
        if fields.len() < cols.len() {
            return Err(fmt(format!("expected {} fields, found {}", cols.len(), fields.len())));
        }
        let get = |name: &str| {
            let idx = cols.iter().position(|c| c == name).expect("checked above");
            fields[idx]
        };
        let num = |name: &str| {
            let s = get(name);
            s.parse::<f64>().map_err(|_| fmt(format!("bad {name} value {s:?}")))
        };
        let year: i32 = get("year")
            .parse()
            .map_err(|_| fmt(format!("bad year {:?}", get("year"))))?;
        let doy: u32 = get("day")
            .parse()
            .map_err(|_| fmt(format!("bad day {:?}", get("day"))))?;
        let date = NaiveDate::from_yo_opt(year, doy).ok_or_else(|| fmt(format!("no day {doy} in {year}")))?;
        let rec = DailyRecord {
            date,
            radn: num("radn")?,
            mint: num("mint")?,
            maxt: num("maxt")?,
            rain: num("rain")?,
        };
        rec.check(line as u64)?;
        if let Some(prev) = records.last() {
            check_successor(prev.date, date, line as u64)?;
        }
        records.push(rec);
    }
    if columns.is_none() {
        return Err(MetError::MissingHeader("column line"));
    }
    if records.is_empty() {
        return Err(MetError::Empty);
    }
    location.latitude = latitude.ok_or(MetError::MissingHeader("latitude"))?;
    let (calc_tav, calc_amp) = tav_amp(&records);
    Ok(MetFile {
        series: WeatherSeries::new(records, location)?,
        tav: tav.unwrap_or(calc_tav),
        amp: amp.unwrap_or(calc_amp),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series() -> WeatherSeries {
        let d0 = NaiveDate::from_ymd_opt(2020, 12, 30).unwrap();
        let recs = (0..3)
            .map(|i| DailyRecord {
                date: d0 + chrono::Days::new(i),
                radn: 20.123 + i as f64,
                mint: 10.0 / 3.0 - i as f64 * 4.0,
                maxt: 25.456,
                rain: if i == 1 { 0.0 } else { 3.149 },
            })
            .collect();
        WeatherSeries::new(
            recs,
            Location {
                name: "Test site".into(),
                latitude: -34.97,
            },
        )
        .unwrap()
    }

    fn emit(s: &WeatherSeries) -> String {
        let mut buf = Vec::new();
        emit_met(s, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn three_days_three_rows() {
        let text = emit(&series());
        let rows: Vec<&str> = text.lines().skip(8).collect();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0], "2020 365 20.12 25.46 3.33 3.15");
        assert_eq!(rows[2], "2021 1 22.12 25.46 -4.67 3.15");
    }

    #[test]
    fn emit_parse_emit_is_stable() {
        let first = emit(&series());
        let parsed = parse_met(&first).unwrap();
        assert_eq!(parsed.series.location.name, "Test site");
        assert_eq!(parsed.series.location.latitude, -34.97);
        assert_eq!(emit(&parsed.series), first);
    }

    #[test]
    fn tav_amp_from_monthly_means() {
        let recs: Vec<DailyRecord> = [(1, 10.0), (1, 20.0), (2, 30.0)]
            .iter()
            .enumerate()
            .map(|(i, &(m, t))| DailyRecord {
                date: NaiveDate::from_ymd_opt(2000, m, 1 + i as u32).unwrap(),
                radn: 1.0,
                mint: t,
                maxt: t,
                rain: 0.0,
            })
            .collect();
        let (tav, amp) = tav_amp(&recs);
        assert!((tav - 22.5).abs() < 1e-12);
        assert!((amp - 15.0).abs() < 1e-12);
    }

    #[test]
    fn tolerant_header_parsing() {
        let text = "[weather.met.weather]\nlatitude = -27.5 (DECIMAL DEGREES)  ! site\n\
                    tav = 20 (oC)\nyear day radn maxt mint rain\n() () () () () ()\n\
                    2000 1 10 30 20 0\n2000 2 11 31 21 1.5\n";
        let m = parse_met(text).unwrap();
        assert_eq!(m.series.len(), 2);
        assert_eq!(m.series.location.latitude, -27.5);
        assert_eq!(m.tav, 20.0);
    }

    #[test]
    fn parse_errors() {
        assert!(parse_met("").is_err());
        assert!(parse_met("latitude = 1\nyear day radn maxt mint rain\n").is_err());
        assert!(parse_met("latitude = 1\nyear day radn maxt mint rain\n2000 400 1 2 1 0\n").is_err());
        assert!(parse_met("latitude = 1\nyear day radn maxt mint rain\n2000 1 1 1 2 0\n").is_err());
        assert!(parse_met("year day radn maxt mint rain\n2000 1 1 2 1 0\n").is_err());
    }
}
