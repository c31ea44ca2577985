mod common;

use chrono::{Datelike, NaiveDate};
use common::synthetic_series;
use wxgen::baseline::{aligned_start, baseline_generate, candidate_years, drawn_year, BaselineError, BaselineRequest};
use wxgen::data::{DailyRecord, Location, WeatherSeries};

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

/// 2000-01-01 through 2010-12-31 of synthetic weather.
fn history() -> WeatherSeries {
    let s = synthetic_series(4018, 8);
    assert_eq!(s.end_date(), Some(date(2010, 12, 31)));
    s
}

fn request(history: &WeatherSeries, start: NaiveDate, years_back: usize, n: usize) -> BaselineRequest<'_> {
    BaselineRequest {
        history,
        target_start: start,
        horizon: 30,
        years_back,
        n_samples: n,
        master_seed: 3,
    }
}

#[test]
fn members_are_verbatim_history() {
    let h = history();
    let target = date(2011, 3, 19);
    let ens = baseline_generate(&request(&h, target, 10, 40)).unwrap();
    assert_eq!(ens.provenance.method, "conventional");
    assert_eq!(ens.start_date(), target);
    assert_eq!(ens.horizon(), 30);
    for (k, m) in ens.members().iter().enumerate() {
        let year = drawn_year(target, 10, 3, k);
        assert!(candidate_years(target, 10).contains(&year));
        let src = h.index_of(date(year, 3, 19)).unwrap();
        for (i, r) in m.records().iter().enumerate() {
            let orig = &h.records()[src + i];
            assert_eq!(r.values(), orig.values(), "member {k} day {i}");
            assert_eq!(r.date, target + chrono::Days::new(i as u64));
        }
    }
}

#[test]
fn years_are_drawn_uniformly() {
    let target = date(2021, 1, 1);
    let n = 100_000;
    let mut counts = [0usize; 30];
    for k in 0..n {
        let y = drawn_year(target, 30, 11, k);
        counts[(y - 1991) as usize] += 1;
    }
    let p = 1.0 / 30.0;
    let expected = n as f64 * p;
    let se = (n as f64 * p * (1.0 - p)).sqrt();
    for (i, &c) in counts.iter().enumerate() {
        assert!((c as f64 - expected).abs() < 3.0 * se, "year {}: {c}", 1991 + i);
    }
}

#[test]
fn identical_years_give_identical_members() {
    // Every year repeats the same values on the same calendar day.
    let recs: Vec<DailyRecord> = (0..(366 + 365 * 3))
        .map(|i| {
            let d = date(2000, 1, 1) + chrono::Days::new(i);
            let o = d.ordinal() as f64;
            DailyRecord {
                date: d,
                radn: 10.0 + o / 100.0,
                mint: 5.0,
                maxt: 15.0 + o / 50.0,
                rain: 0.0,
            }
        })
        .collect();
    let h = WeatherSeries::new(recs, Location::default()).unwrap();
    let req = BaselineRequest {
        horizon: 20,
        ..request(&h, date(2004, 6, 1), 3, 25)
    };
    let ens = baseline_generate(&req).unwrap();
    // June 1 is day 152 in common years and day 153 in 2000.
    let years: Vec<i32> = (0..25).map(|k| drawn_year(req.target_start, 3, 3, k)).collect();
    for (m, y) in ens.members().iter().zip(&years) {
        let o0 = date(*y, 6, 1).ordinal() as f64;
        assert_eq!(m.records()[0].radn, 10.0 + o0 / 100.0);
    }
    let nonleap: Vec<_> = ens
        .members()
        .iter()
        .zip(&years)
        .filter(|(_, y)| **y != 2000)
        .map(|(m, _)| m)
        .collect();
    assert!(nonleap.len() > 1);
    assert!(nonleap.windows(2).all(|w| w[0].records() == w[1].records()));
}

#[test]
fn default_window_is_the_thirty_years_before() {
    assert_eq!(candidate_years(date(2021, 3, 19), 30), 1991..=2020);
    assert_eq!(aligned_start(date(2024, 2, 29), 2021), Some(date(2021, 3, 1)));
}

#[test]
fn uncovered_years_are_refused_up_front() {
    let h = history();
    // 1999 is before the history starts.
    let err = baseline_generate(&request(&h, date(2011, 3, 19), 12, 5)).unwrap_err();
    assert!(matches!(err, BaselineError::Uncovered { year: 1999, .. }), "{err}");
    // The window from the last candidate year runs past the end.
    let err = baseline_generate(&request(&h, date(2011, 12, 20), 5, 5)).unwrap_err();
    assert!(matches!(err, BaselineError::Uncovered { year: 2010, .. }), "{err}");
    assert!(matches!(
        baseline_generate(&request(&h, date(2011, 3, 1), 0, 5)),
        Err(BaselineError::NoYears)
    ));
    assert!(matches!(
        baseline_generate(&request(&h, date(2011, 3, 1), 3, 0)),
        Err(BaselineError::NoMembers)
    ));
}
