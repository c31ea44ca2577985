//! Historical resampling: each member is a verbatim run of past weather
//! starting on the target's month and day in a randomly drawn earlier year.

use chrono::{Datelike, NaiveDate};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::data::{DataError, WeatherSeries};
use crate::sampler::{member_rng, Ensemble, Provenance, SamplerError};

pub const DEFAULT_YEARS_BACK: usize = 30;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("years_back must be >= 1")]
    NoYears,
    #[error("need at least one member")]
    NoMembers,
    #[error("history has no window for start year {year}: {reason}")]
    Uncovered { year: i32, reason: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

#[derive(Clone, Debug)]
pub struct BaselineRequest<'a> {
    pub history: &'a WeatherSeries,
    pub target_start: NaiveDate,
    pub horizon: usize,
    pub years_back: usize,
    pub n_samples: usize,
    pub master_seed: u64,
}

/// Start years eligible for a target: the `years_back` years before it.
pub fn candidate_years(target_start: NaiveDate, years_back: usize) -> std::ops::RangeInclusive<i32> {
    let y = target_start.year();
    (y - years_back as i32)..=(y - 1)
}

/// The target's month and day in `year`; 29 February becomes 1 March in
/// non-leap years.
pub fn aligned_start(target_start: NaiveDate, year: i32) -> Option<NaiveDate> {
    NaiveDate::from_ymd_opt(year, target_start.month(), target_start.day())
        .or_else(|| NaiveDate::from_ymd_opt(year, 3, 1).filter(|_| target_start.month() == 2))
}

fn copy_window(history: &WeatherSeries, start: NaiveDate, horizon: usize) -> Result<WeatherSeries, BaselineError> {
    let year = start.year();
    let i = history.index_of(start).ok_or_else(|| BaselineError::Uncovered {
        year,
        reason: format!("{start} is outside the history"),
    })?;
    if i + horizon > history.len() {
        return Err(BaselineError::Uncovered {
            year,
            reason: format!("{horizon} days from {start} run past the end of history"),
        });
    }
    let end = history.records()[i + horizon - 1].date;
    Ok(history.slice_dates(start, end)?)
}

/// Members are redated onto the target's calendar days, so that every
/// member of an ensemble is aligned; the values stay verbatim.
pub fn baseline_generate(req: &BaselineRequest<'_>) -> Result<Ensemble, BaselineError> {
    if req.years_back == 0 {
        return Err(BaselineError::NoYears);
    }
    if req.n_samples == 0 || req.horizon == 0 {
        return Err(BaselineError::NoMembers);
    }
    let years = candidate_years(req.target_start, req.years_back);
    // Refuse up front if any candidate year is uncovered, so the outcome
    // does not depend on which years happen to be drawn.
    for year in years.clone() {
        let start = aligned_start(req.target_start, year).ok_or_else(|| BaselineError::Uncovered {
            year,
            reason: "no aligned start date".into(),
        })?;
        copy_window(req.history, start, req.horizon)?;
    }
    let members: Vec<Result<WeatherSeries, BaselineError>> = (0..req.n_samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = member_rng(req.master_seed, k);
            let year = rng.random_range(years.clone());
            let start = aligned_start(req.target_start, year).expect("checked above");
            let window = copy_window(req.history, start, req.horizon)?;
            let mut recs = window.records().to_vec();
            let mut date = req.target_start;
            for r in recs.iter_mut() {
                r.date = date;
                date = date.succ_opt().unwrap_or(date);
            }
            Ok(WeatherSeries::new(recs, req.history.location.clone())?)
        })
        .collect();
    let members = members.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(Ensemble::new(
        members,
        Provenance {
            method: "conventional".into(),
            seed: Some(req.master_seed),
            conditioning: None,
            checkpoint: None,
        },
    )?)
}

/// Start year drawn for member `k`; exposed for frequency checks.
pub fn drawn_year(target_start: NaiveDate, years_back: usize, master_seed: u64, k: usize) -> i32 {
    member_rng(master_seed, k).random_range(candidate_years(target_start, years_back))
}
