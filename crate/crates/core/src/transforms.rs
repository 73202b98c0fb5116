//! Streaming normalization transforms for training loops.
//!
//! These are the pieces a learner embeds directly: symmetric log squashing
//! for targets spanning orders of magnitude, zero-mean batch
//! normalization, running observation whitening, and percentile-based
//! return scaling with an exponential moving band.

use crate::error::{Error, Result};
use crate::scoring::interpolated_quantile;

/// sign(x) * ln(|x| + 1). Odd, monotone, identity-like near zero,
/// logarithmic in the tails; defined for every finite x.
pub fn symlog(x: f64) -> f64 {
    x.signum() * (x.abs() + 1.0).ln()
}

/// sign(x) * (exp(|x|) - 1), the exact inverse of [`symlog`].
pub fn symexp(x: f64) -> f64 {
    x.signum() * (x.abs().exp() - 1.0)
}

/// Squash a raw regression target into symlog space before computing the
/// loss.
pub fn symlog_target(v: f64) -> f64 {
    symlog(v)
}

/// Map a prediction made in symlog space back to the raw scale.
pub fn symexp_prediction(raw: f64) -> f64 {
    symexp(raw)
}

/// Elementwise [`symlog`] over an observation vector.
pub fn observation_symlog(obs: &[f64]) -> Vec<f64> {
    obs.iter().map(|&x| symlog(x)).collect()
}

/// Centers a batch and divides by its population standard deviation plus
/// `eps`. Constant batches (and singletons) map to zeros.
pub fn zero_mean_normalize(batch: &[f64], eps: f64) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let n = batch.len() as f64;
    let mean = batch.iter().sum::<f64>() / n;
    let var = batch.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let denom = var.sqrt() + eps;
    Ok(batch.iter().map(|&x| (x - mean) / denom).collect())
}

/// Streaming mean and variance (Welford), population convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunningMoments {
    count: u64,
    mean: f64,
    m2: f64,
    eps: f64,
}

impl RunningMoments {
    pub fn new(eps: f64) -> Self {
        RunningMoments {
            count: 0,
            mean: 0.0,
            m2: 0.0,
            eps,
        }
    }

    pub fn update(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population variance m2/count; zero before any update.
    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.m2 / self.count as f64
        }
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }

    /// (x - mean) / (std + eps) under the current statistics.
    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.mean) / (self.std() + self.eps)
    }
}

impl Default for RunningMoments {
    fn default() -> Self {
        RunningMoments::new(1e-8)
    }
}

/// Per-dimension running whitening of observation vectors. The first
/// observation fixes the dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationNormalizer {
    dims: Vec<RunningMoments>,
    eps: f64,
}

impl ObservationNormalizer {
    pub fn new(eps: f64) -> Result<Self> {
        if eps.is_nan() || eps <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "eps must be positive, got {eps}"
            )));
        }
        Ok(ObservationNormalizer {
            dims: Vec::new(),
            eps,
        })
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    /// Folds the observation into the running statistics, then normalizes
    /// it under the updated statistics. The very first observation
    /// therefore comes back as all zeros.
    pub fn normalize(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        if obs.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if self.dims.is_empty() {
            self.dims = vec![RunningMoments::new(self.eps); obs.len()];
        } else if self.dims.len() != obs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dims.len(),
                got: obs.len(),
            });
        }
        let mut out = Vec::with_capacity(obs.len());
        for (m, &x) in self.dims.iter_mut().zip(obs) {
            m.update(x);
            out.push(m.normalize(x));
        }
        Ok(out)
    }
}

/// Convenience free function mirroring [`ObservationNormalizer::normalize`].
pub fn observation_normalize(state: &mut ObservationNormalizer, obs: &[f64]) -> Result<Vec<f64>> {
    state.normalize(obs)
}

const SCALER_Q_LO: f64 = 5.0;
const SCALER_Q_HI: f64 = 95.0;

/// Scales advantages by an exponential moving estimate of the 5th-95th
/// percentile spread of returns.
///
/// The plain variant divides by the spread itself and fails on a zero
/// spread; the lower-bounded variant divides by `max(L, spread)`, which
/// leaves small-scale advantages untouched instead of amplifying noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PercentileScaler {
    decay: f64,
    lower_bound: Option<f64>,
    ema_lo: Option<f64>,
    ema_hi: Option<f64>,
}

impl PercentileScaler {
    /// Plain variant. `decay` in (0, 1); 0.99 is customary.
    pub fn new(decay: f64) -> Result<Self> {
        if !(decay > 0.0 && decay < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "decay must lie in (0, 1), got {decay}"
            )));
        }
        Ok(PercentileScaler {
            decay,
            lower_bound: None,
            ema_lo: None,
            ema_hi: None,
        })
    }

    /// Lower-bounded variant: the divisor never falls below `bound`.
    pub fn with_lower_bound(decay: f64, bound: f64) -> Result<Self> {
        let mut s = PercentileScaler::new(decay)?;
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lower bound must be positive and finite, got {bound}"
            )));
        }
        s.lower_bound = Some(bound);
        Ok(s)
    }

    /// Current EMA band, if any batch has been folded in.
    pub fn band(&self) -> Option<(f64, f64)> {
        Some((self.ema_lo?, self.ema_hi?))
    }

    /// Folds one batch of returns into the EMA band and scales the given
    /// advantages by it. Needs at least two returns; the first batch seeds
    /// the band directly.
    pub fn scale(&mut self, returns: &[f64], advantages: &[f64]) -> Result<Vec<f64>> {
        if returns.len() < 2 {
            return Err(Error::TooFewReturns {
                len: returns.len(),
            });
        }
        if returns.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidConfig(
                "returns must be finite to estimate percentiles".into(),
            ));
        }
        let mut sorted = returns.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("checked finite"));
        let p_lo = interpolated_quantile(&sorted, SCALER_Q_LO);
        let p_hi = interpolated_quantile(&sorted, SCALER_Q_HI);

        let (lo, hi) = match (self.ema_lo, self.ema_hi) {
            (Some(lo), Some(hi)) => (
                self.decay * lo + (1.0 - self.decay) * p_lo,
                self.decay * hi + (1.0 - self.decay) * p_hi,
            ),
            _ => (p_lo, p_hi),
        };
        self.ema_lo = Some(lo);
        self.ema_hi = Some(hi);

        let spread = hi - lo;
        let denom = match self.lower_bound {
            Some(bound) => spread.max(bound),
            None => {
                if spread == 0.0 {
                    return Err(Error::ZeroDenominator);
                }
                spread
            }
        };
        Ok(advantages.iter().map(|&a| a / denom).collect())
    }
}

/// Convenience free function mirroring [`PercentileScaler::scale`].
pub fn percentile_scale(
    scaler: &mut PercentileScaler,
    returns: &[f64],
    advantages: &[f64],
) -> Result<Vec<f64>> {
    scaler.scale(returns, advantages)
}
