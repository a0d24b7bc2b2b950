//! Spatial consistency loss between an input FOA spectrum and its
//! reconstruction.
//!
//! Per bin the intensity vectors of input and reconstruction are compared
//! by cosine similarity `s`. Only bins where the input is energetic and
//! not diffuse count, weighted by `E · (1 − D)` of the input:
//!
//! ```text
//! s = (I_in · I_rec) / (‖I_in‖ ‖I_rec‖ + ε)
//! m = [E_in > τ_E] · [D_in < τ_D]
//! w = m · E_in · (1 − D_in)
//! L = (1 / TK) Σ w (1 − s)
//! ```
//!
//! The normalizer counts every bin, masked or not.

mod grad;
pub mod gradcheck;
mod objective;

use std::io::Write;

pub use grad::SpectrumGradient;
pub use objective::{generator_total, hinge_discriminator_loss, LossComponents, LossWeights};

use crate::dirac::{self, dot3, Vec3};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::tf_transform::FoaSpectrum;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScConfig {
    /// `τ_E`: bins at or below this input energy are masked out.
    pub energy_threshold: f64,
    /// `τ_D`: bins at or above this input diffuseness are masked out.
    pub diffuseness_threshold: f64,
    /// `ε` in the cosine denominator. Zero is accepted; a zero denominator
    /// then yields `s = 0`.
    pub epsilon: f64,
    /// Diffuseness smoothing window in frames (odd).
    pub window: usize,
}

impl Default for ScConfig {
    fn default() -> Self {
        Self {
            energy_threshold: 1e-6,
            diffuseness_threshold: 0.95,
            epsilon: 1e-8,
            window: dirac::DEFAULT_WINDOW,
        }
    }
}

impl ScConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.energy_threshold.is_finite() && self.energy_threshold > 0.0) {
            return bad(format!("tau_E must be > 0, got {}", self.energy_threshold));
        }
        if !(self.diffuseness_threshold > 0.0 && self.diffuseness_threshold <= 1.0) {
            return bad(format!("tau_D must be in (0, 1], got {}", self.diffuseness_threshold));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return bad(format!("epsilon must be >= 0, got {}", self.epsilon));
        }
        if self.window == 0 || self.window.is_multiple_of(2) {
            return bad(format!("window must be odd and >= 1, got {}", self.window));
        }
        Ok(())
    }
}

/// Cosine similarity of one pair of vectors with `ε` added to the norm
/// product. `‖a‖‖b‖` is formed as `sqrt(‖a‖²‖b‖²)` so identical inputs
/// give exactly 1 when `ε = 0`.
pub fn cosine(a: &Vec3, b: &Vec3, epsilon: f64) -> f64 {
    let den = (dot3(a, a) * dot3(b, b)).sqrt() + epsilon;
    if den > 0.0 {
        dot3(a, b) / den
    } else {
        0.0
    }
}

pub fn alignment(i_in: &Grid<Vec3>, i_rec: &Grid<Vec3>, epsilon: f64) -> Result<Grid<f64>> {
    i_in.zip_map(i_rec, |a, b| cosine(a, b, epsilon))
}

pub fn mask(e_in: &Grid<f64>, d_in: &Grid<f64>, cfg: &ScConfig) -> Result<Grid<bool>> {
    e_in.zip_map(d_in, |&e, &d| e > cfg.energy_threshold && d < cfg.diffuseness_threshold)
}

pub fn weights(m: &Grid<bool>, e_in: &Grid<f64>, d_in: &Grid<f64>) -> Result<Grid<f64>> {
    let ed = e_in.zip_map(d_in, |&e, &d| e * (1.0 - d))?;
    m.zip_map(&ed, |&on, &v| if on { v } else { 0.0 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScBreakdown {
    pub alignment: Grid<f64>,
    pub mask: Grid<bool>,
    pub weights: Grid<f64>,
    pub loss: f64,
}

impl ScBreakdown {
    /// Per-bin terms `w (1 − s)`, before the `1 / TK` normalization.
    pub fn contribution(&self) -> Grid<f64> {
        self.weights
            .zip_map(&self.alignment, |w, s| w * (1.0 - s))
            .expect("breakdown grids share a shape")
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Writes `s.csv`, `m.csv`, `w.csv` and `contribution.csv` into `dir`.
    pub fn dump_csv(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let write = |name: &str, g: &Grid<f64>| -> Result<()> {
            let mut buf = Vec::new();
            g.write_csv(&mut buf)?;
            crate::io_util::write_bytes_atomic(&dir.join(name), &buf)
        };
        write("s.csv", &self.alignment)?;
        write("m.csv", &self.mask.map(|&m| if m { 1.0 } else { 0.0 }))?;
        write("w.csv", &self.weights)?;
        write("contribution.csv", &self.contribution())
    }
}

/// The input side of the loss, analyzed once and reused for any number of
/// reconstructions. Mask and weights depend on the input alone.
#[derive(Debug, Clone)]
pub struct ScTarget {
    cfg: ScConfig,
    shape: (usize, usize),
    intensity: Grid<Vec3>,
    mask: Grid<bool>,
    weights: Grid<f64>,
}

impl ScTarget {
    pub fn new(input: &FoaSpectrum, cfg: ScConfig) -> Result<Self> {
        cfg.validate()?;
        let field = dirac::analyze(input, cfg.window)?;
        let mask = mask(&field.energy, &field.diffuseness, &cfg)?;
        let weights = weights(&mask, &field.energy, &field.diffuseness)?;
        Ok(Self {
            cfg,
            shape: input.shape(),
            intensity: field.intensity,
            mask,
            weights,
        })
    }

    pub fn config(&self) -> &ScConfig {
        &self.cfg
    }

    pub fn intensity(&self) -> &Grid<Vec3> {
        &self.intensity
    }

    pub fn mask(&self) -> &Grid<bool> {
        &self.mask
    }

    pub fn weights(&self) -> &Grid<f64> {
        &self.weights
    }

    fn check(&self, recon: &FoaSpectrum) -> Result<()> {
        if recon.shape() != self.shape {
            return Err(Error::ShapeMismatch {
                left: self.shape,
                right: recon.shape(),
            });
        }
        Ok(())
    }

    fn normalizer(&self) -> f64 {
        (self.shape.0 * self.shape.1) as f64
    }

    /// Loss from precomputed reconstruction intensities. Summation runs in
    /// row-major bin order.
    fn loss_from(&self, s: &Grid<f64>) -> f64 {
        let total: f64 = self.weights.iter().zip(s.iter()).map(|(w, s)| w * (1.0 - s)).sum();
        if self.normalizer() > 0.0 {
            total / self.normalizer()
        } else {
            0.0
        }
    }

    pub fn evaluate(&self, recon: &FoaSpectrum) -> Result<ScBreakdown> {
        self.check(recon)?;
        let s = alignment(&self.intensity, &dirac::intensity(recon), self.cfg.epsilon)?;
        Ok(ScBreakdown {
            loss: self.loss_from(&s),
            alignment: s,
            mask: self.mask.clone(),
            weights: self.weights.clone(),
        })
    }

    pub fn loss(&self, recon: &FoaSpectrum) -> Result<f64> {
        self.check(recon)?;
        let s = alignment(&self.intensity, &dirac::intensity(recon), self.cfg.epsilon)?;
        Ok(self.loss_from(&s))
    }
}

fn check_pair(input: &FoaSpectrum, recon: &FoaSpectrum) -> Result<()> {
    input.ensure_same_shape(recon)?;
    if input.params() != recon.params() {
        return Err(Error::InvalidArgument(
            "input and reconstruction were analyzed with different STFT parameters".into(),
        ));
    }
    Ok(())
}

pub fn sc_loss(input: &FoaSpectrum, recon: &FoaSpectrum, cfg: &ScConfig) -> Result<ScBreakdown> {
    check_pair(input, recon)?;
    ScTarget::new(input, *cfg)?.evaluate(recon)
}

/// `∂L/∂Re + i ∂L/∂Im` for every reconstruction bin of all four channels.
pub fn sc_loss_grad(input: &FoaSpectrum, recon: &FoaSpectrum, cfg: &ScConfig) -> Result<SpectrumGradient> {
    check_pair(input, recon)?;
    ScTarget::new(input, *cfg)?.gradient(recon)
}

/// Gradient with respect to the reconstruction's time-domain samples. The
/// reconstruction spectrum must come from [`FoaSpectrum::analyze`].
pub fn sc_loss_grad_time(input: &FoaSpectrum, recon: &FoaSpectrum, cfg: &ScConfig) -> Result<[Vec<f64>; 4]> {
    sc_loss_grad(input, recon, cfg)?.to_time_domain(recon)
}

/// `key,value` summary rows: loss, masked bin count, total bins, weight sum.
pub fn write_breakdown_summary<W: Write>(b: &ScBreakdown, mut out: W) -> Result<()> {
    let masked = b.mask.iter().filter(|&&m| m).count();
    writeln!(out, "loss,{}", b.loss)?;
    writeln!(out, "masked_bins,{masked}")?;
    writeln!(out, "total_bins,{}", b.mask.as_slice().len())?;
    writeln!(out, "weight_sum,{}", b.weight_sum())?;
    Ok(())
}
