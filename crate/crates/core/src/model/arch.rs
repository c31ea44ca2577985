use std::fmt;
use std::ops::RangeInclusive;

use super::ModelError;
use crate::likelihood::DEFAULT_HEAD_EPS;

/// Window geometry implied by a horizon and a dilated stack.
///
/// With base filter length `l` and `m` dilated layers the receptive field is
/// `l^m`, the training window is `T = l^m + 1` days and the conditioning
/// length is `t0 = T - horizon`. The first generated day sees `T - t0 - 1`
/// zero-padded days ahead of the conditioning data.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Plan {
    pub base_filter: usize,
    pub dilated_layers: usize,
    pub window_len: usize,
    pub t0: usize,
    pub horizon: usize,
}

impl Plan {
    pub fn receptive_field(&self) -> usize {
        self.window_len - 1
    }

    pub fn padding(&self) -> usize {
        self.window_len - self.t0 - 1
    }

    /// Dilation of dilated layer `k` (0-based): `l^k`.
    pub fn dilation(&self, k: usize) -> usize {
        self.base_filter.pow(k as u32)
    }
}

pub fn plan_architecture(
    horizon: usize,
    base_filter: usize,
    dilated_layers: usize,
    t0_range: RangeInclusive<usize>,
) -> Result<Plan, ModelError> {
    if base_filter < 2 {
        return Err(ModelError::Architecture(format!(
            "base filter length must be >= 2, got {base_filter}"
        )));
    }
    if dilated_layers < 1 {
        return Err(ModelError::Architecture("need at least one dilated layer".into()));
    }
    if horizon < 1 {
        return Err(ModelError::Architecture("horizon must be >= 1".into()));
    }
    let receptive_field = u32::try_from(dilated_layers)
        .ok()
        .and_then(|m| base_filter.checked_pow(m))
        .filter(|r| *r < usize::MAX)
        .ok_or_else(|| ModelError::Architecture(format!("{base_filter}^{dilated_layers} overflows")))?;
    let window_len = receptive_field + 1;
    if horizon > receptive_field {
        return Err(ModelError::HorizonTooLong {
            horizon,
            receptive_field,
        });
    }
    let t0 = window_len - horizon;
    if !t0_range.contains(&t0) {
        return Err(ModelError::T0OutOfRange {
            achieved: t0,
            min: *t0_range.start(),
            max: *t0_range.end(),
        });
    }
    Ok(Plan {
        base_filter,
        dilated_layers,
        window_len,
        t0,
        horizon,
    })
}

/// Output channels per layer: masked convolution, each dilated layer, then
/// the 1×1 layers (the last of which must emit 2).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelLadder {
    pub masked: usize,
    pub dilated: Vec<usize>,
    pub pointwise: Vec<usize>,
}

impl ChannelLadder {
    /// Splits a flat ladder such as `(8,16,32,64,64,32,16,8,2)` given the
    /// number of dilated layers.
    pub fn from_flat(flat: &[usize], dilated_layers: usize) -> Result<Self, ModelError> {
        if flat.len() < dilated_layers + 2 {
            return Err(ModelError::Architecture(format!(
                "channel ladder has {} entries, need 1 masked + {dilated_layers} dilated + at least 1 pointwise",
                flat.len()
            )));
        }
        let ladder = Self {
            masked: flat[0],
            dilated: flat[1..=dilated_layers].to_vec(),
            pointwise: flat[dilated_layers + 1..].to_vec(),
        };
        ladder.validate()?;
        Ok(ladder)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.pointwise.last() != Some(&2) {
            return Err(ModelError::Architecture("last 1x1 layer must output 2 channels".into()));
        }
        if self.masked == 0 || self.dilated.contains(&0) || self.pointwise.contains(&0) {
            return Err(ModelError::Architecture("channel counts must be positive".into()));
        }
        Ok(())
    }

    pub fn flat(&self) -> Vec<usize> {
        let mut v = vec![self.masked];
        v.extend(&self.dilated);
        v.extend(&self.pointwise);
        v
    }
}

impl fmt::Display for ChannelLadder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.flat().iter().map(usize::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Every structural hyperparameter of a [`WeatherNet`](super::WeatherNet).
/// Variable order and same-day masks are fixed (see
/// [`Variable::same_day_mask`](crate::Variable::same_day_mask)).
#[derive(Clone, Debug, PartialEq)]
pub struct ArchitectureSpec {
    pub plan: Plan,
    pub channels: ChannelLadder,
    pub epsilon: f64,
}

impl ArchitectureSpec {
    pub fn new(plan: Plan, channels: ChannelLadder, epsilon: f64) -> Result<Self, ModelError> {
        channels.validate()?;
        if channels.dilated.len() != plan.dilated_layers {
            return Err(ModelError::Architecture(format!(
                "{} dilated channel counts for {} dilated layers",
                channels.dilated.len(),
                plan.dilated_layers
            )));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(ModelError::Architecture(format!(
                "head epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(Self {
            plan,
            channels,
            epsilon,
        })
    }

    pub fn with_default_eps(plan: Plan, channels: ChannelLadder) -> Result<Self, ModelError> {
        Self::new(plan, channels, DEFAULT_HEAD_EPS)
    }

    pub fn window_len(&self) -> usize {
        self.plan.window_len
    }

    pub fn t0(&self) -> usize {
        self.plan.t0
    }

    pub fn horizon(&self) -> usize {
        self.plan.horizon
    }

    /// Layer shapes in parameter order.
    pub fn layers(&self) -> Vec<LayerShape> {
        let mut out = Vec::new();
        for var in crate::Variable::ALL {
            out.push(LayerShape {
                name: format!("masked.{var}"),
                in_channels: 4,
                out_channels: self.channels.masked,
                width: 2,
                dilation: 1,
                bias: false,
            });
        }
        let mut prev = self.channels.masked;
        for (k, &c) in self.channels.dilated.iter().enumerate() {
            out.push(LayerShape {
                name: format!("dilated.{}", k + 1),
                in_channels: prev,
                out_channels: c,
                width: self.plan.base_filter,
                dilation: self.plan.dilation(k),
                bias: true,
            });
            prev = c;
        }
        for (k, &c) in self.channels.pointwise.iter().enumerate() {
            out.push(LayerShape {
                name: format!("pointwise.{}", k + 1),
                in_channels: prev,
                out_channels: c,
                width: 1,
                dilation: 1,
                bias: true,
            });
            prev = c;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerShape {
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub width: usize,
    pub dilation: usize,
    pub bias: bool,
}

impl LayerShape {
    pub fn param_count(&self) -> usize {
        self.in_channels * self.out_channels * self.width + if self.bias { self.out_channels } else { 0 }
    }
}

/// Trainable parameters: four bias-free 4×2 masked kernels plus one shared
/// dilated and pointwise stack.
pub fn param_count(spec: &ArchitectureSpec) -> usize {
    let masked = 4 * (4 * 2 * spec.channels.masked);
    let mut total = masked;
    let mut prev = spec.channels.masked;
    for &c in &spec.channels.dilated {
        total += prev * c * spec.plan.base_filter + c;
        prev = c;
    }
    for &c in &spec.channels.pointwise {
        total += prev * c + c;
        prev = c;
    }
    total
}
