//! Sectioned `key = value` run configuration.
//!
//! ```text
//! [paths]
//! data = robe.csv
//! checkpoint = out/model.ckpt
//!
//! [architecture]
//! l = 7
//! m = 4
//! channels = 8,16,32,64,64,32,16,8,2
//! horizon = 365
//! ```
//!
//! `#` and `;` start comments. Unknown sections and keys are errors so that
//! typos do not silently fall back to defaults. Relative paths resolve
//! against the config file's directory when loaded with [`RunConfig::load`].

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use thiserror::Error;

use crate::baseline::DEFAULT_YEARS_BACK;
use crate::data::{Location, DEFAULT_ZERO_FLOOR};
use crate::evaluate::Period;
use crate::likelihood::DEFAULT_HEAD_EPS;
use crate::model::{plan_architecture, ArchitectureSpec, ChannelLadder, ModelError};
use crate::trainer::TrainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: [{section}] {key}: {message}")]
    Value {
        line: usize,
        section: String,
        key: String,
        message: String,
    },
    #[error("missing [{section}] {key}")]
    Missing { section: &'static str, key: &'static str },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathsConfig {
    pub data: PathBuf,
    pub checkpoint: PathBuf,
    pub history: PathBuf,
    pub output_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArchitectureConfig {
    pub l: usize,
    pub m: usize,
    pub channels: Vec<usize>,
    pub horizon: usize,
    pub t0_min: usize,
    pub t0_max: usize,
    pub epsilon: f64,
}

impl ArchitectureConfig {
    pub fn spec(&self) -> Result<ArchitectureSpec, ModelError> {
        let plan = plan_architecture(self.horizon, self.l, self.m, self.t0_min..=self.t0_max)?;
        ArchitectureSpec::new(plan, ChannelLadder::from_flat(&self.channels, self.m)?, self.epsilon)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    /// Last day of the training period.
    pub split_date: NaiveDate,
    pub zero_floor: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationConfig {
    pub n_samples: usize,
    pub master_seed: u64,
    /// First generated day; conditioning ends the day before.
    pub start_date: NaiveDate,
    pub write_met: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationConfig {
    pub periods: Vec<Period>,
    pub generative_ensemble: PathBuf,
    pub conventional_ensemble: PathBuf,
    /// Observed weather; defaults to `[paths] data`.
    pub truth: PathBuf,
    pub generative_yields: Option<PathBuf>,
    pub conventional_yields: Option<PathBuf>,
    pub truth_yields: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub paths: PathsConfig,
    pub architecture: ArchitectureConfig,
    pub data: DataConfig,
    pub training: TrainConfig,
    pub generation: GenerationConfig,
    pub years_back: usize,
    pub evaluation: EvaluationConfig,
    pub location: Location,
}

const SECTIONS: [&str; 8] = [
    "paths",
    "architecture",
    "data",
    "training",
    "generation",
    "baseline",
    "evaluation",
    "location",
];

struct Entry {
    line: usize,
    section: String,
    key: String,
    value: String,
}

struct Entries(Vec<Entry>);

impl Entries {
    fn take(&self, section: &str, key: &str) -> Option<&Entry> {
        self.0.iter().rev().find(|e| e.section == section && e.key == key)
    }

    fn parse<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.take(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|err| value_error(e, err.to_string())),
        }
    }

    fn required<T: std::str::FromStr>(&self, section: &'static str, key: &'static str) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.parse(section, key)?.ok_or(ConfigError::Missing { section, key })
    }

    fn path(&self, section: &str, key: &str) -> Option<PathBuf> {
        self.take(section, key).map(|e| PathBuf::from(&e.value))
    }

    fn date(&self, section: &str, key: &str) -> Result<Option<NaiveDate>, ConfigError> {
        match self.take(section, key) {
            None => Ok(None),
            Some(e) => NaiveDate::parse_from_str(&e.value, "%Y-%m-%d")
                .map(Some)
                .map_err(|err| value_error(e, format!("expected YYYY-MM-DD: {err}"))),
        }
    }
}

fn value_error(e: &Entry, message: String) -> ConfigError {
    ConfigError::Value {
        line: e.line,
        section: e.section.clone(),
        key: e.key.clone(),
        message,
    }
}

fn tokenize(text: &str) -> Result<Entries, ConfigError> {
    let mut section: Option<String> = None;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.split(['#', ';']).next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        if let Some(rest) = l.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Syntax {
                    line,
                    message: format!("unterminated section header {l:?}"),
                })?
                .trim()
                .to_ascii_lowercase();
            if !SECTIONS.contains(&name.as_str()) {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("unknown section [{name}]"),
                });
            }
            section = Some(name);
            continue;
        }
        let (k, v) = l.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            message: format!("expected key = value, found {l:?}"),
        })?;
        let section = section.clone().ok_or_else(|| ConfigError::Syntax {
            line,
            message: "key outside any section".into(),
        })?;
        out.push(Entry {
            line,
            section,
            key: k.trim().to_ascii_lowercase(),
            value: v.trim().to_string(),
        });
    }
    Ok(Entries(out))
}

const KNOWN_KEYS: &[(&str, &[&str])] = &[
    ("paths", &["data", "checkpoint", "history", "output_dir"]),
    (
        "architecture",
        &["l", "m", "channels", "horizon", "t0_min", "t0_max", "epsilon"],
    ),
    ("data", &["split_date", "zero_floor"]),
    ("training", &["epochs", "batch_size", "lr", "seed"]),
    ("generation", &["n_samples", "master_seed", "start_date", "write_met"]),
    ("baseline", &["years_back"]),
    (
        "evaluation",
        &[
            "periods",
            "generative_ensemble",
            "conventional_ensemble",
            "truth",
            "generative_yields",
            "conventional_yields",
            "truth_yields",
        ],
    ),
    ("location", &["name", "latitude"]),
];

fn parse_channels(e: &Entry) -> Result<Vec<usize>, ConfigError> {
    let inner = e.value.trim_start_matches('(').trim_end_matches(')');
    inner
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| value_error(e, format!("bad channel count {:?}", s.trim())))
        })
        .collect()
}

fn parse_bool(e: &Entry) -> Result<bool, ConfigError> {
    match e.value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(value_error(e, format!("expected true or false, found {other:?}"))),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let entries = tokenize(text)?;
        for e in &entries.0 {
            let known = KNOWN_KEYS
                .iter()
                .find(|(s, _)| *s == e.section)
                .is_some_and(|(_, keys)| keys.contains(&e.key.as_str()));
            if !known {
                return Err(value_error(e, "unknown key".into()));
            }
        }

        let data_path = entries.path("paths", "data").ok_or(ConfigError::Missing {
            section: "paths",
            key: "data",
        })?;
        let output_dir = entries
            .path("paths", "output_dir")
            .unwrap_or_else(|| PathBuf::from("out"));
        let paths = PathsConfig {
            checkpoint: entries
                .path("paths", "checkpoint")
                .unwrap_or_else(|| output_dir.join("model.ckpt")),
            history: entries
                .path("paths", "history")
                .unwrap_or_else(|| output_dir.join("history.csv")),
            data: data_path,
            output_dir,
        };

        let channels = match entries.take("architecture", "channels") {
            Some(e) => parse_channels(e)?,
            None => {
                return Err(ConfigError::Missing {
                    section: "architecture",
                    key: "channels",
                })
            }
        };
        let architecture = ArchitectureConfig {
            l: entries.required("architecture", "l")?,
            m: entries.required("architecture", "m")?,
            channels,
            horizon: entries.required("architecture", "horizon")?,
            t0_min: entries.parse("architecture", "t0_min")?.unwrap_or(1),
            t0_max: entries.parse("architecture", "t0_max")?.unwrap_or(usize::MAX),
            epsilon: entries.parse("architecture", "epsilon")?.unwrap_or(DEFAULT_HEAD_EPS),
        };

        let split_date = entries.date("data", "split_date")?.ok_or(ConfigError::Missing {
            section: "data",
            key: "split_date",
        })?;
        let zero_floor: f64 = entries.parse("data", "zero_floor")?.unwrap_or(DEFAULT_ZERO_FLOOR);
        if !(zero_floor > 0.0 && zero_floor.is_finite()) {
            let e = entries.take("data", "zero_floor").expect("value was parsed");
            return Err(value_error(e, "must be positive".into()));
        }
        let data = DataConfig { split_date, zero_floor };

        let d = TrainConfig::default();
        let training = TrainConfig {
            epochs: entries.parse("training", "epochs")?.unwrap_or(d.epochs),
            batch_size: entries.parse("training", "batch_size")?.unwrap_or(d.batch_size),
            lr: entries.parse("training", "lr")?.unwrap_or(d.lr),
            seed: entries.parse("training", "seed")?.unwrap_or(d.seed),
            checkpoint_path: Some(paths.checkpoint.clone()),
        };

        let generation = GenerationConfig {
            n_samples: entries.parse("generation", "n_samples")?.unwrap_or(1000),
            master_seed: entries.parse("generation", "master_seed")?.unwrap_or(1),
            start_date: match entries.date("generation", "start_date")? {
                Some(d) => d,
                None => split_date.succ_opt().ok_or(ConfigError::Missing {
                    section: "generation",
                    key: "start_date",
                })?,
            },
            write_met: entries
                .take("generation", "write_met")
                .map(parse_bool)
                .transpose()?
                .unwrap_or(false),
        };

        let years_back = entries.parse("baseline", "years_back")?.unwrap_or(DEFAULT_YEARS_BACK);

        let periods = match entries.take("evaluation", "periods") {
            None => Period::ALL.to_vec(),
            Some(e) => e
                .value
                .split(',')
                .map(|p| p.parse::<Period>().map_err(|err| value_error(e, err.to_string())))
                .collect::<Result<Vec<_>, _>>()?,
        };
        let evaluation = EvaluationConfig {
            periods,
            generative_ensemble: entries
                .path("evaluation", "generative_ensemble")
                .unwrap_or_else(|| paths.output_dir.join("generative.csv")),
            conventional_ensemble: entries
                .path("evaluation", "conventional_ensemble")
                .unwrap_or_else(|| paths.output_dir.join("conventional.csv")),
            truth: entries
                .path("evaluation", "truth")
                .unwrap_or_else(|| paths.data.clone()),
            generative_yields: entries.path("evaluation", "generative_yields"),
            conventional_yields: entries.path("evaluation", "conventional_yields"),
            truth_yields: entries.path("evaluation", "truth_yields"),
        };

        let location = Location {
            name: entries
                .take("location", "name")
                .map_or_else(|| Location::default().name, |e| e.value.clone()),
            latitude: entries.parse("location", "latitude")?.unwrap_or(0.0),
        };

        Ok(Self {
            paths,
            architecture,
            data,
            training,
            generation,
            years_back,
            evaluation,
            location,
        })
    }

    /// Reads and parses `path`, resolving relative paths against its
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_relative_to(base);
        }
        Ok(cfg)
    }

    pub fn resolve_relative_to(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.data);
        fix(&mut self.paths.checkpoint);
        fix(&mut self.paths.history);
        fix(&mut self.paths.output_dir);
        if let Some(p) = self.training.checkpoint_path.as_mut() {
            fix(p);
        }
        fix(&mut self.evaluation.generative_ensemble);
        fix(&mut self.evaluation.conventional_ensemble);
        fix(&mut self.evaluation.truth);
        for p in [
            &mut self.evaluation.generative_yields,
            &mut self.evaluation.conventional_yields,
            &mut self.evaluation.truth_yields,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }
}
