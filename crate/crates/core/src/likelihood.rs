//! Per-day distribution heads: gamma (shape–rate) for radiation, temperature
//! range and rain, normal for minimum temperature.

use rand::Rng;
use rand_distr::{Open01, StandardNormal};
use statrs::function::gamma::{digamma, ln_gamma};
use thiserror::Error;

use crate::autodiff::ops::{sigmoid, softplus};
use crate::Variable;

/// Offset added after softplus so positive parameters stay away from zero.
pub const DEFAULT_HEAD_EPS: f64 = 1e-3;

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Error, PartialEq)]
pub enum LikelihoodError {
    #[error("{variable}: observation must be positive, got {value}")]
    NonPositiveObservation { variable: &'static str, value: f64 },
    #[error("{variable}: parameter {name} must be positive and finite, got {value}")]
    InvalidParameter {
        variable: &'static str,
        name: &'static str,
        value: f64,
    },
}

impl LikelihoodError {
    fn with_variable(self, var: &'static str) -> Self {
        match self {
            Self::NonPositiveObservation { value, .. } => Self::NonPositiveObservation { variable: var, value },
            Self::InvalidParameter { name, value, .. } => Self::InvalidParameter {
                variable: var,
                name,
                value,
            },
        }
    }
}

/// Gamma with shape `alpha` and rate `beta` (density ∝ x^(α-1) e^(-βx)).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl GammaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, LikelihoodError> {
        for (name, value) in [("alpha", alpha), ("beta", beta)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(LikelihoodError::InvalidParameter {
                    variable: "gamma",
                    name,
                    value,
                });
            }
        }
        Ok(Self { alpha, beta })
    }

    pub fn mean(&self) -> f64 {
        self.alpha / self.beta
    }

    pub fn variance(&self) -> f64 {
        self.alpha / (self.beta * self.beta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalParams {
    pub mu: f64,
    pub sigma: f64,
}

impl NormalParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self, LikelihoodError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(LikelihoodError::InvalidParameter {
                variable: "normal",
                name: "sigma",
                value: sigma,
            });
        }
        if !mu.is_finite() {
            return Err(LikelihoodError::InvalidParameter {
                variable: "normal",
                name: "mu",
                value: mu,
            });
        }
        Ok(Self { mu, sigma })
    }
}

/// The eight per-day parameters, in variable order radn, mint, diff, rain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DayDistribution {
    pub radn: GammaParams,
    pub mint: NormalParams,
    pub diff: GammaParams,
    pub rain: GammaParams,
}

impl DayDistribution {
    /// `[α_radn, β_radn, μ_mint, σ_mint, α_diff, β_diff, α_rain, β_rain]`
    pub fn to_array(&self) -> [f64; 8] {
        [
            self.radn.alpha,
            self.radn.beta,
            self.mint.mu,
            self.mint.sigma,
            self.diff.alpha,
            self.diff.beta,
            self.rain.alpha,
            self.rain.beta,
        ]
    }

    pub fn from_array(p: [f64; 8]) -> Result<Self, LikelihoodError> {
        Ok(Self {
            radn: GammaParams::new(p[0], p[1]).map_err(|e| e.with_variable("radn"))?,
            mint: NormalParams::new(p[2], p[3]).map_err(|e| e.with_variable("mint"))?,
            diff: GammaParams::new(p[4], p[5]).map_err(|e| e.with_variable("diff"))?,
            rain: GammaParams::new(p[6], p[7]).map_err(|e| e.with_variable("rain"))?,
        })
    }

    /// The two parameters of one variable's head.
    pub fn pair(&self, var: Variable) -> (f64, f64) {
        match var {
            Variable::Radn => (self.radn.alpha, self.radn.beta),
            Variable::Mint => (self.mint.mu, self.mint.sigma),
            Variable::Diff => (self.diff.alpha, self.diff.beta),
            Variable::Rain => (self.rain.alpha, self.rain.beta),
        }
    }
}

/// `-[α ln β - ln Γ(α) + (α-1) ln x - βx]`
pub fn gamma_nll(x: f64, p: &GammaParams) -> Result<f64, LikelihoodError> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(LikelihoodError::NonPositiveObservation {
            variable: "gamma",
            value: x,
        });
    }
    Ok(gamma_nll_unchecked(x, p.alpha, p.beta))
}

#[inline]
fn gamma_nll_unchecked(x: f64, alpha: f64, beta: f64) -> f64 {
    -alpha * beta.ln() + ln_gamma(alpha) - (alpha - 1.0) * x.ln() + beta * x
}

/// `(∂/∂α, ∂/∂β)` of [`gamma_nll`].
pub fn gamma_nll_grad(x: f64, p: &GammaParams) -> (f64, f64) {
    (-p.beta.ln() + digamma(p.alpha) - x.ln(), -p.alpha / p.beta + x)
}

/// `½ ln 2π + ln σ + ½((x-μ)/σ)²`
pub fn normal_nll(x: f64, p: &NormalParams) -> Result<f64, LikelihoodError> {
    if !(p.sigma > 0.0) {
        return Err(LikelihoodError::InvalidParameter {
            variable: "normal",
            name: "sigma",
            value: p.sigma,
        });
    }
    let z = (x - p.mu) / p.sigma;
    Ok(HALF_LN_TWO_PI + p.sigma.ln() + 0.5 * z * z)
}

/// `(∂/∂μ, ∂/∂σ)` of [`normal_nll`].
pub fn normal_nll_grad(x: f64, p: &NormalParams) -> (f64, f64) {
    let r = x - p.mu;
    let s2 = p.sigma * p.sigma;
    (-r / s2, 1.0 / p.sigma - r * r / (s2 * p.sigma))
}

/// Sum of the four component negative log-likelihoods for one model-space day
/// `[radn, mint, diff, rain]`.
pub fn day_nll(x: &[f64; 4], d: &DayDistribution) -> Result<f64, LikelihoodError> {
    let radn = gamma_nll(x[0], &d.radn).map_err(|e| e.with_variable("radn"))?;
    let mint = normal_nll(x[1], &d.mint).map_err(|e| e.with_variable("mint"))?;
    let diff = gamma_nll(x[2], &d.diff).map_err(|e| e.with_variable("diff"))?;
    let rain = gamma_nll(x[3], &d.rain).map_err(|e| e.with_variable("rain"))?;
    Ok(radn + mint + diff + rain)
}

/// Gradient of [`day_nll`] in [`DayDistribution::to_array`] order.
pub fn day_nll_grad(x: &[f64; 4], d: &DayDistribution) -> [f64; 8] {
    let (a0, b0) = gamma_nll_grad(x[0], &d.radn);
    let (m, s) = normal_nll_grad(x[1], &d.mint);
    let (a2, b2) = gamma_nll_grad(x[2], &d.diff);
    let (a3, b3) = gamma_nll_grad(x[3], &d.rain);
    [a0, b0, m, s, a2, b2, a3, b3]
}

/// Maps eight raw network outputs to distribution parameters: identity for
/// μ, `softplus + eps` for everything else.
pub fn head_activation(raw: &[f64; 8], eps: f64) -> DayDistribution {
    let sp = |z: f64| softplus(z) + eps;
    DayDistribution {
        radn: GammaParams {
            alpha: sp(raw[0]),
            beta: sp(raw[1]),
        },
        mint: NormalParams {
            mu: raw[2],
            sigma: sp(raw[3]),
        },
        diff: GammaParams {
            alpha: sp(raw[4]),
            beta: sp(raw[5]),
        },
        rain: GammaParams {
            alpha: sp(raw[6]),
            beta: sp(raw[7]),
        },
    }
}

/// Which distribution a two-output head parameterizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadFamily {
    Gamma,
    Normal,
}

impl HeadFamily {
    pub fn for_variable(var: Variable) -> Self {
        match var {
            Variable::Mint => Self::Normal,
            _ => Self::Gamma,
        }
    }

    /// Head parameters from the two raw outputs.
    pub fn activate(self, r0: f64, r1: f64, eps: f64) -> (f64, f64) {
        match self {
            Self::Gamma => (softplus(r0) + eps, softplus(r1) + eps),
            Self::Normal => (r0, softplus(r1) + eps),
        }
    }

    pub(crate) fn nll_from_raw(self, x: f64, r0: f64, r1: f64, eps: f64) -> Result<f64, LikelihoodError> {
        let (a, b) = self.activate(r0, r1, eps);
        match self {
            Self::Gamma => gamma_nll(x, &GammaParams { alpha: a, beta: b }),
            Self::Normal => normal_nll(x, &NormalParams { mu: a, sigma: b }),
        }
    }

    /// Chain rule through the head activation.
    pub(crate) fn nll_grad_raw(self, x: f64, r0: f64, r1: f64, eps: f64) -> (f64, f64) {
        let (a, b) = self.activate(r0, r1, eps);
        match self {
            Self::Gamma => {
                let (da, db) = gamma_nll_grad(x, &GammaParams { alpha: a, beta: b });
                (da * sigmoid(r0), db * sigmoid(r1))
            }
            Self::Normal => {
                let (dm, ds) = normal_nll_grad(x, &NormalParams { mu: a, sigma: b });
                (dm, ds * sigmoid(r1))
            }
        }
    }
}

/// Marsaglia–Tsang squeeze sampler, with the `U^(1/α)` boost for `α < 1`.
///
/// Draws are strictly positive: an underflowing boosted draw is returned as
/// the smallest positive normal `f64`.
pub fn sample_gamma<R: Rng + ?Sized>(p: &GammaParams, rng: &mut R) -> f64 {
    let (shape, boost) = if p.alpha < 1.0 {
        (p.alpha + 1.0, true)
    } else {
        (p.alpha, false)
    };
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    let unit = loop {
        let z: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * z;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = rng.sample(Open01);
        let z2 = z * z;
        if u < 1.0 - 0.0331 * z2 * z2 || u.ln() < 0.5 * z2 + d * (1.0 - v + v.ln()) {
            break d * v;
        }
    };
    let mut x = unit / p.beta;
    if boost {
        let u: f64 = rng.sample(Open01);
        x = (x.ln() + u.ln() / p.alpha).exp();
    }
    if x > 0.0 {
        x
    } else {
        f64::MIN_POSITIVE
    }
}

pub fn sample_normal<R: Rng + ?Sized>(p: &NormalParams, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    p.mu + p.sigma * z
}
