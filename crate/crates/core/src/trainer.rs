//! Mini-batch teacher-forced training with Adam.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::autodiff::{adam_step, AdamState, AutodiffError, Gradients};
use crate::data::TrainingWindowSet;
use crate::model::{ModelError, WeatherNet};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("windows have T={found_t}, t0={found_t0}; model expects T={expected_t}, t0={expected_t0}")]
    WindowMismatch {
        expected_t: usize,
        expected_t0: usize,
        found_t: usize,
        found_t0: usize,
    },
    #[error("non-finite loss in epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Written whenever the epoch loss improves.
    pub checkpoint_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            batch_size: 32,
            lr: 0.001,
            seed: 1,
            checkpoint_path: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(TrainError::Config(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean day NLL over the epoch's windows and horizon days, accumulated
    /// batch by batch as the parameters move.
    pub loss: f64,
    pub secs: f64,
}

impl EpochRecord {
    pub fn progress_line(&self) -> String {
        format!("epoch {} loss {:.6} secs {:.3}", self.epoch, self.loss, self.secs)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    best: Option<usize>,
}

impl TrainHistory {
    /// Appends a record; returns true when it is a new minimum.
    pub fn record(&mut self, rec: EpochRecord) -> bool {
        self.epochs.push(rec);
        let improved = match self.best {
            None => true,
            Some(b) => rec.loss < self.epochs[b].loss,
        };
        if improved {
            self.best = Some(self.epochs.len() - 1);
        }
        improved
    }

    /// 1-based epoch with the lowest loss (earliest on ties).
    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|b| self.epochs[b].epoch)
    }

    pub fn best_loss(&self) -> Option<f64> {
        self.best.map(|b| self.epochs[b].loss)
    }

    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }

    /// `epoch,loss` rows. Timings are left out so reruns write identical
    /// files.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "epoch,loss")?;
        for e in &self.epochs {
            writeln!(out, "{},{}", e.epoch, e.loss)?;
        }
        Ok(())
    }
}

fn check_windows(net: &WeatherNet, windows: &TrainingWindowSet<'_>) -> Result<(), TrainError> {
    let spec = net.spec();
    if windows.window_len() != spec.window_len() || windows.t0() != spec.t0() {
        return Err(TrainError::WindowMismatch {
            expected_t: spec.window_len(),
            expected_t0: spec.t0(),
            found_t: windows.window_len(),
            found_t0: windows.t0(),
        });
    }
    Ok(())
}

/// Summed loss and gradient over the given window indices.
///
/// Items are evaluated in parallel; their gradients are added in index
/// order so the result does not depend on the thread count.
pub fn batch_loss_and_gradient(
    net: &WeatherNet,
    windows: &TrainingWindowSet<'_>,
    indices: &[usize],
) -> Result<(f64, Gradients), TrainError> {
    let items: Vec<Result<(f64, Gradients), ModelError>> = indices
        .par_iter()
        .map(|&k| net.loss_and_gradient(windows.window(k), windows.targets(k)))
        .collect();
    let mut loss = 0.0;
    let mut grads = Gradients::zeros(net.param_count());
    for item in items {
        let (l, g) = item?;
        loss += l;
        grads.accumulate(&g)?;
    }
    Ok((loss, grads))
}

/// Trains in place. `observer` sees every completed epoch.
///
/// On return the network holds the final-epoch parameters; the best epoch's
/// parameters are in the checkpoint file, if one was configured.
pub fn train<F: FnMut(&EpochRecord)>(
    net: &mut WeatherNet,
    windows: &TrainingWindowSet<'_>,
    cfg: &TrainConfig,
    mut observer: F,
) -> Result<TrainHistory, TrainError> {
    cfg.validate()?;
    check_windows(net, windows)?;
    if windows.is_empty() {
        return Err(TrainError::Config("no training windows".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(net.param_count(), cfg.lr);
    let mut order: Vec<usize> = windows.starts().collect();
    let denom = (windows.len() * windows.horizon()) as f64;
    let mut history = TrainHistory::default();

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let nonfinite = || TrainError::NonFiniteLoss { epoch, batch };
            let (loss, grads) = match batch_loss_and_gradient(net, windows, chunk) {
                Ok(r) => r,
                Err(TrainError::Model(ModelError::Autodiff(AutodiffError::NonFiniteLoss(_)))) => {
                    return Err(nonfinite())
                }
                Err(e) => return Err(e),
            };
            if !loss.is_finite() || grads.as_slice().iter().any(|g| !g.is_finite()) {
                return Err(nonfinite());
            }
            total += loss;
            adam_step(net.params_mut(), &grads, &mut adam)?;
        }
        let rec = EpochRecord {
            epoch,
            loss: total / denom,
            secs: started.elapsed().as_secs_f64(),
        };
        if history.record(rec) {
            if let Some(path) = &cfg.checkpoint_path {
                net.save(path)?;
            }
        }
        observer(&rec);
    }
    Ok(history)
}

/// Mean day NLL over every window's horizon days; no parameter updates.
pub fn evaluate_loss(net: &WeatherNet, windows: &TrainingWindowSet<'_>) -> Result<f64, TrainError> {
    check_windows(net, windows)?;
    if windows.is_empty() {
        return Err(TrainError::Config("no windows to evaluate".into()));
    }
    let losses: Vec<Result<f64, ModelError>> = windows
        .starts()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&k| net.window_loss(windows.window(k), windows.targets(k)))
        .collect();
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / (windows.len() * windows.horizon()) as f64)
}
