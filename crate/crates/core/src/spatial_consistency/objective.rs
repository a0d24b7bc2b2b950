//! Generator objective composition and the discriminator hinge loss.

use crate::error::{Error, Result};

/// Weights of the generator loss terms. Only `q`, `mel` and `sc` have
/// established defaults; `adv` and `feat` must be supplied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub q: f64,
    pub mel: f64,
    pub adv: f64,
    pub feat: f64,
    pub sc: f64,
}

impl LossWeights {
    pub const DEFAULT_Q: f64 = 1000.0;
    pub const DEFAULT_MEL: f64 = 45.0;
    pub const DEFAULT_SC: f64 = 1.0;

    /// `λ_q = 1000`, `λ_mel = 45`, `λ_sc = 1` with caller-chosen adversarial
    /// and feature-matching weights.
    pub fn new(adv: f64, feat: f64) -> Self {
        Self {
            q: Self::DEFAULT_Q,
            mel: Self::DEFAULT_MEL,
            adv,
            feat,
            sc: Self::DEFAULT_SC,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("q", self.q),
            ("mel", self.mel),
            ("adv", self.adv),
            ("feat", self.feat),
            ("sc", self.sc),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "loss weight {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossComponents {
    pub q: f64,
    pub mel: f64,
    pub adv: f64,
    pub feat: f64,
    pub sc: f64,
}

pub fn generator_total(c: &LossComponents, w: &LossWeights) -> Result<f64> {
    w.validate()?;
    Ok(w.q * c.q + w.mel * c.mel + w.adv * c.adv + w.feat * c.feat + w.sc * c.sc)
}

/// Hinge loss averaged over `K` discriminator outputs; each output's
/// scores are mean-reduced first.
pub fn hinge_discriminator_loss(real: &[Vec<f64>], fake: &[Vec<f64>]) -> Result<f64> {
    if real.is_empty() {
        return Err(Error::Empty("discriminator outputs"));
    }
    if real.len() != fake.len() {
        return Err(Error::LengthMismatch(real.len(), fake.len()));
    }
    let mut total = 0.0;
    for (r, f) in real.iter().zip(fake) {
        if r.is_empty() {
            return Err(Error::Empty("discriminator scores"));
        }
        if r.len() != f.len() {
            return Err(Error::LengthMismatch(r.len(), f.len()));
        }
        let n = r.len() as f64;
        let real_term: f64 = r.iter().map(|d| (1.0 - d).max(0.0)).sum::<f64>() / n;
        let fake_term: f64 = f.iter().map(|d| (1.0 + d).max(0.0)).sum::<f64>() / n;
        total += real_term + fake_term;
    }
    Ok(total / real.len() as f64)
}
