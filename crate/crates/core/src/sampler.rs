//! Autoregressive ensemble generation and the ensemble file format.

use std::io::Write;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::autodiff::SequenceGrid;
use crate::data::{
    check_successor, from_model_space, DailyRecord, DataError, Location, TransformedSeries, WeatherSeries,
};
use crate::likelihood::{sample_gamma, sample_normal, GammaParams, NormalParams};
use crate::model::{ModelError, WeatherNet};
use crate::Variable;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error(
        "network was trained for a {trained}-day horizon and will not generate {requested} days; \
         train a network for that horizon instead"
    )]
    HorizonMismatch { requested: usize, trained: usize },
    #[error("conditioning has {available} days, need at least {required}")]
    ShortConditioning { available: usize, required: usize },
    #[error("conditioning ends {conditioning_end}, so generation must start {expected}, not {start}")]
    StartMismatch {
        start: NaiveDate,
        expected: NaiveDate,
        conditioning_end: NaiveDate,
    },
    #[error("ensemble needs at least one member")]
    NoMembers,
    #[error("ensemble members differ: {0}")]
    Ragged(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug)]
pub struct GenerationRequest {
    /// Model-space observations; the last `t0` days condition generation.
    pub conditioning: TransformedSeries,
    pub horizon: usize,
    pub n_samples: usize,
    pub master_seed: u64,
    /// Must be the day after the conditioning ends.
    pub start_date: NaiveDate,
    /// Copied onto every member.
    pub location: Location,
}

/// Where an ensemble came from. Written as `# key=value` lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Provenance {
    pub method: String,
    pub seed: Option<u64>,
    pub conditioning: Option<(NaiveDate, NaiveDate)>,
    pub checkpoint: Option<String>,
}

/// Equal-length members on the same calendar days, in raw units.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    members: Vec<WeatherSeries>,
    pub provenance: Provenance,
}

/// Independent rng for member `k`: the master seed selects the key, the
/// member index selects the ChaCha stream.
pub fn member_rng(master_seed: u64, k: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(k as u64);
    rng
}

impl Ensemble {
    pub fn new(members: Vec<WeatherSeries>, provenance: Provenance) -> Result<Self, SamplerError> {
        let first = members.first().ok_or(SamplerError::NoMembers)?;
        let (start, len) = (first.start_date(), first.len());
        if len == 0 {
            return Err(SamplerError::Ragged("members are empty".into()));
        }
        for (k, m) in members.iter().enumerate() {
            if m.len() != len || m.start_date() != start {
                return Err(SamplerError::Ragged(format!(
                    "member {k} covers {} days from {:?}, member 0 covers {len} from {start:?}",
                    m.len(),
                    m.start_date()
                )));
            }
        }
        Ok(Self { members, provenance })
    }

    pub fn members(&self) -> &[WeatherSeries] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.members[0].len()
    }

    pub fn start_date(&self) -> NaiveDate {
        self.members[0].start_date().expect("non-empty member")
    }

    pub fn end_date(&self) -> NaiveDate {
        self.members[0].end_date().expect("non-empty member")
    }

    /// Value of raw variable `col` (0 radn, 1 mint, 2 maxt, 3 rain) on
    /// day `t` of every member.
    pub fn day_values(&self, t: usize, col: usize) -> Vec<f64> {
        self.members.iter().map(|m| m.records()[t].values()[col]).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), SamplerError> {
        let p = &self.provenance;
        writeln!(out, "# method={}", p.method)?;
        if let Some(seed) = p.seed {
            writeln!(out, "# seed={seed}")?;
        }
        if let Some((a, b)) = p.conditioning {
            writeln!(out, "# conditioning={a}..{b}")?;
        }
        if let Some(c) = &p.checkpoint {
            writeln!(out, "# checkpoint={c}")?;
        }
        let loc = &self.members[0].location;
        writeln!(out, "# location={}", loc.name)?;
        writeln!(out, "# latitude={}", loc.latitude)?;
        writeln!(out, "member,date,radn,mint,maxt,rain")?;
        for (k, m) in self.members.iter().enumerate() {
            for r in m.records() {
                writeln!(out, "{k},{},{},{},{},{}", r.date, r.radn, r.mint, r.maxt, r.rain)?;
            }
        }
        Ok(())
    }
}

fn parse_date(s: &str, line: usize) -> Result<NaiveDate, SamplerError> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| SamplerError::Format {
        line,
        message: format!("bad date {s:?}: {e}"),
    })
}

/// Reads the format produced by [`Ensemble::write_csv`]. Members must be
/// numbered `0..n` in order.
pub fn parse_ensemble_csv(text: &str) -> Result<Ensemble, SamplerError> {
    let mut prov = Provenance::default();
    let mut location = Location::default();
    let mut members: Vec<Vec<DailyRecord>> = Vec::new();
    let mut header_seen = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let fmt = |message: String| SamplerError::Format { line, message };
        let l = raw.trim();
        if l.is_empty() {
            continue;
        }
        if let Some(meta) = l.strip_prefix('#') {
            if header_seen {
                return Err(fmt("metadata after the column header".into()));
            }
            let Some((key, value)) = meta.split_once('=') else {
                continue;
            };
            let value = value.trim();
            match key.trim() {
                "method" => prov.method = value.to_string(),
                "seed" => prov.seed = Some(value.parse().map_err(|_| fmt(format!("bad seed {value:?}")))?),
                "conditioning" => {
                    let (a, b) = value
                        .split_once("..")
                        .ok_or_else(|| fmt("conditioning needs a..b".into()))?;
                    prov.conditioning = Some((parse_date(a, line)?, parse_date(b, line)?));
                }
                "checkpoint" => prov.checkpoint = Some(value.to_string()),
                "location" => location.name = value.to_string(),
                "latitude" => location.latitude = value.parse().map_err(|_| fmt(format!("bad latitude {value:?}")))?,
                _ => {}
            }
            continue;
        }
        if !header_seen {
            let cols: Vec<&str> = l.split(',').map(str::trim).collect();
            if cols != ["member", "date", "radn", "mint", "maxt", "rain"] {
                return Err(fmt(format!("unexpected header {l:?}")));
            }
            header_seen = true;
            continue;
        }
        let f: Vec<&str> = l.split(',').map(str::trim).collect();
        if f.len() != 6 {
            return Err(fmt(format!("expected 6 fields, found {}", f.len())));
        }
        let k: usize = f[0].parse().map_err(|_| fmt(format!("bad member index {:?}", f[0])))?;
        let date = parse_date(f[1], line)?;
        let mut v = [0.0; 4];
        for (slot, s) in v.iter_mut().zip(&f[2..]) {
            *slot = s.parse().map_err(|_| fmt(format!("bad number {s:?}")))?;
        }
        let rec = DailyRecord {
            date,
            radn: v[0],
            mint: v[1],
            maxt: v[2],
            rain: v[3],
        };
        rec.check(line as u64)?;
        if k == members.len() {
            members.push(vec![rec]);
        } else if k + 1 == members.len() {
            let prev = members[k].last().expect("member has a row").date;
            check_successor(prev, date, line as u64)?;
            members[k].push(rec);
        } else {
            return Err(fmt(format!("member {k} out of order")));
        }
    }
    if !header_seen {
        return Err(SamplerError::Format {
            line: 0,
            message: "missing column header".into(),
        });
    }
    let series = members
        .into_iter()
        .map(|m| WeatherSeries::new(m, location.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    Ensemble::new(series, prov)
}

/// Samples one day in within-day order. `grid` is the standardized `4×T`
/// input whose last column is the day being generated; each sampled value
/// is written back into that column before the next variable's head runs.
///
/// `draw` turns a head's parameters into a model-space value. Gamma draws
/// are raised to the network's zero floor. Returns the model-space day.
pub fn sample_day<F>(net: &WeatherNet, grid: &mut SequenceGrid, mut draw: F) -> Result<[f64; 4], SamplerError>
where
    F: FnMut(Variable, (f64, f64)) -> f64,
{
    let last = grid.length() - 1;
    let mut day = [0.0; 4];
    for var in Variable::ALL {
        let params = net.last_params(var, grid)?;
        let mut x = draw(var, params);
        if var != Variable::Mint {
            x = x.max(net.zero_floor());
        }
        day[var.index()] = x;
        grid.set(var.index(), last, net.stats().apply_value(var.index(), x));
    }
    Ok(day)
}

/// Draws from the head distribution of `var`.
pub fn draw_from_head<R: Rng + ?Sized>(var: Variable, (a, b): (f64, f64), rng: &mut R) -> f64 {
    match var {
        Variable::Mint => sample_normal(&NormalParams { mu: a, sigma: b }, rng),
        _ => sample_gamma(&GammaParams { alpha: a, beta: b }, rng),
    }
}

/// Model-space trajectory of one member.
pub fn generate_member<R: Rng + ?Sized>(
    net: &WeatherNet,
    conditioning: &[[f64; 4]],
    horizon: usize,
    rng: &mut R,
) -> Result<Vec<[f64; 4]>, SamplerError> {
    let t = net.window_len();
    let t0 = net.spec().t0();
    if conditioning.len() < t0 {
        return Err(SamplerError::ShortConditioning {
            available: conditioning.len(),
            required: t0,
        });
    }
    // Standardized columns: zero padding, the conditioning tail, then
    // generated days. The model input is always the last T of them.
    let mut cols: Vec<[f64; 4]> = vec![[0.0; 4]; net.spec().plan.padding()];
    let stats = net.stats();
    cols.extend(conditioning[conditioning.len() - t0..].iter().map(|d| stats.apply(d)));
    let mut out = Vec::with_capacity(horizon);
    let mut grid = SequenceGrid::zeros(4, t);
    for _ in 0..horizon {
        let base = cols.len() + 1 - t;
        for (p, col) in cols[base..].iter().enumerate() {
            for v in 0..4 {
                grid.set(v, p, col[v]);
            }
        }
        for v in 0..4 {
            grid.set(v, t - 1, 0.0);
        }
        let day = sample_day(net, &mut grid, |var, params| draw_from_head(var, params, rng))?;
        cols.push(stats.apply(&day));
        out.push(day);
    }
    Ok(out)
}

/// Generates `n_samples` members in parallel; member `k` depends only on
/// the master seed and `k`.
pub fn generate(net: &WeatherNet, req: &GenerationRequest) -> Result<Ensemble, SamplerError> {
    if req.horizon != net.horizon() {
        return Err(SamplerError::HorizonMismatch {
            requested: req.horizon,
            trained: net.horizon(),
        });
    }
    if req.n_samples == 0 {
        return Err(SamplerError::NoMembers);
    }
    let t0 = net.spec().t0();
    if req.conditioning.len() < t0 {
        return Err(SamplerError::ShortConditioning {
            available: req.conditioning.len(),
            required: t0,
        });
    }
    let cond_end = req.conditioning.end_date();
    let expected = cond_end.succ_opt().ok_or(SamplerError::NoMembers)?;
    if req.start_date != expected {
        return Err(SamplerError::StartMismatch {
            start: req.start_date,
            expected,
            conditioning_end: cond_end,
        });
    }
    let cond_start = cond_end - chrono::Days::new(t0 as u64 - 1);
    let members: Vec<Result<WeatherSeries, SamplerError>> = (0..req.n_samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = member_rng(req.master_seed, k);
            let days = generate_member(net, &req.conditioning.days, req.horizon, &mut rng)?;
            to_raw_series(&days, req.start_date, &req.location)
        })
        .collect();
    let members = members.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ensemble::new(
        members,
        Provenance {
            method: "generative".into(),
            seed: Some(req.master_seed),
            conditioning: Some((cond_start, cond_end)),
            checkpoint: Some(net.checkpoint_id()),
        },
    )
}

fn to_raw_series(days: &[[f64; 4]], start: NaiveDate, location: &Location) -> Result<WeatherSeries, SamplerError> {
    let mut records = Vec::with_capacity(days.len());
    let mut date = start;
    for (i, d) in days.iter().enumerate() {
        let [radn, mint, maxt, rain] = from_model_space(*d)?;
        records.push(DailyRecord {
            date,
            radn,
            mint,
            maxt,
            rain,
        });
        if i + 1 < days.len() {
            date = date.succ_opt().ok_or(SamplerError::NoMembers)?;
        }
    }
    Ok(WeatherSeries::new(records, location.clone())?)
}
