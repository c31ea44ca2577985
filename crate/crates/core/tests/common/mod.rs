//! Fixtures shared by the integration tests: toy networks and a seeded
//! synthetic seasonal climate with known monthly means.

#![allow(dead_code)]

pub mod tables;

use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, Normal};
use wxgen::data::{DailyRecord, Location, WeatherSeries};
use wxgen::model::{plan_architecture, ArchitectureSpec, ChannelLadder, WeatherNet};

pub fn spec(horizon: usize, l: usize, m: usize, ladder: &[usize]) -> ArchitectureSpec {
    let plan = plan_architecture(horizon, l, m, 1..=usize::MAX).expect("valid plan");
    ArchitectureSpec::with_default_eps(plan, ChannelLadder::from_flat(ladder, m).expect("valid ladder"))
        .expect("valid spec")
}

pub fn toy_net(horizon: usize, l: usize, m: usize, ladder: &[usize], seed: u64) -> WeatherNet {
    WeatherNet::build(&spec(horizon, l, m, ladder), seed).expect("build")
}

pub fn zero_net(horizon: usize, l: usize, m: usize, ladder: &[usize]) -> WeatherNet {
    let mut net = toy_net(horizon, l, m, ladder, 0);
    let zeros = vec![0.0; net.param_count()];
    net.params_mut().assign_flat(&zeros).unwrap();
    net
}

/// Random model-space days in plausible ranges.
pub fn random_days(n: usize, seed: u64) -> Vec<[f64; 4]> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            [
                rng.random_range(1.0..30.0),
                rng.random_range(-5.0..20.0),
                rng.random_range(1.0..15.0),
                rng.random_range(0.001..20.0),
            ]
        })
        .collect()
}

pub const SYNTH_START: (i32, u32, u32) = (2000, 1, 1);
/// Standard deviation of the day-to-day mint noise.
pub const MINT_NOISE_SD: f64 = 2.0;

fn season(date: NaiveDate) -> f64 {
    (2.0 * PI * (date.ordinal0() as f64) / 365.25).cos()
}

/// Expected mint on `date`: warm in January, cold in July.
pub fn mint_mean(date: NaiveDate) -> f64 {
    8.0 + 5.0 * season(date)
}

/// Daily synthetic weather: sinusoidal temperatures with Gaussian noise,
/// seasonal gamma radiation, and rain that is dry on about half the days.
pub fn synthetic_series(n_days: usize, seed: u64) -> WeatherSeries {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, MINT_NOISE_SD).unwrap();
    let start = NaiveDate::from_ymd_opt(SYNTH_START.0, SYNTH_START.1, SYNTH_START.2).unwrap();
    let records = (0..n_days)
        .map(|i| {
            let date = start + chrono::Days::new(i as u64);
            let s = season(date);
            let radn_mean = 17.0 + 8.0 * s;
            let radn = Gamma::new(12.0, radn_mean / 12.0).unwrap().sample(&mut rng);
            let mint = mint_mean(date) + noise.sample(&mut rng);
            let diff = Gamma::new(9.0, (10.0 + 3.0 * s) / 9.0).unwrap().sample(&mut rng);
            let rain = if rng.random::<f64>() < 0.5 {
                0.0
            } else {
                Gamma::new(0.7, 5.0).unwrap().sample(&mut rng)
            };
            DailyRecord {
                date,
                radn,
                mint,
                maxt: mint + diff,
                rain,
            }
        })
        .collect();
    WeatherSeries::new(
        records,
        Location {
            name: "synthetic".into(),
            latitude: -35.0,
        },
    )
    .unwrap()
}

pub const FD_STEP: f64 = 1e-4;
/// Central differences carry roundoff of about `eps * |loss| / h`, which is
/// `2.2e-8 * |loss|` relative-error units at the 1e-4 threshold. Gradients
/// below `FD_FLOOR_REL * |loss|` are therefore compared on that absolute
/// scale rather than relative to themselves.
pub const FD_FLOOR_REL: f64 = 1e-7;

#[derive(Debug)]
pub struct GradCheck {
    pub params: usize,
    pub max_rel: f64,
    pub worst: usize,
}

/// Random small network with every parameter (biases included) drawn
/// uniformly, so no ReLU sits exactly at its kink on padded positions.
pub fn random_grad_net(seed: u64) -> WeatherNet {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let l = rng.random_range(2..=3usize);
    let m = rng.random_range(1..=2usize);
    let horizon = rng.random_range(1..=l.pow(m as u32));
    let n_pointwise = rng.random_range(1..=4usize);
    let mut ladder: Vec<usize> = (0..1 + m + n_pointwise - 1).map(|_| rng.random_range(1..=8)).collect();
    ladder.push(2);
    let mut net = toy_net(horizon, l, m, &ladder, seed);
    let flat: Vec<f64> = (0..net.param_count()).map(|_| rng.random_range(-0.5..0.5)).collect();
    net.params_mut().assign_flat(&flat).unwrap();
    net
}

/// Central differences of the full window loss against the tape gradient.
pub fn gradient_check(net: &WeatherNet, seed: u64) -> GradCheck {
    let days = random_days(net.window_len(), seed ^ 0x5eed);
    let targets = &days[net.spec().t0()..];
    let (loss, grads) = net.loss_and_gradient(&days, targets).unwrap();
    let floor = FD_FLOOR_REL * loss.abs().max(1.0);
    let base = net.params().flatten();
    let mut probe = net.clone();
    let mut max_rel = 0.0;
    let mut worst = 0;
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + FD_STEP;
        probe.params_mut().assign_flat(&p).unwrap();
        let up = probe.loss_and_gradient(&days, targets).unwrap().0;
        p[i] = base[i] - FD_STEP;
        probe.params_mut().assign_flat(&p).unwrap();
        let down = probe.loss_and_gradient(&days, targets).unwrap().0;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let analytic = grads.as_slice()[i];
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor);
        if rel > max_rel {
            max_rel = rel;
            worst = i;
        }
    }
    GradCheck {
        params: base.len(),
        max_rel,
        worst,
    }
}

/// `sqrt(-ln(a/2)/2) / sqrt(n)` for a = 1e-3, n = 1e4.
pub const KS_CRITICAL: f64 = 0.019_495;
pub const KS_DRAWS: usize = 10_000;

/// Two-sided Kolmogorov-Smirnov statistic of a sample against `cdf`.
pub fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}
