//! Analytic gradient of the spatial consistency loss.
//!
//! Mask and weights come from the input and are constants. For one bin with
//! input intensity `a`, reconstruction intensity `b` and `d = ‖a‖‖b‖ + ε`:
//!
//! ```text
//! ∂s/∂b = a / d − (a·b) ‖a‖ b̂ / d²
//! ∂L/∂b = −w / (TK) · ∂s/∂b
//! ```
//!
//! and `b_j = Re(W)Re(V_j) + Im(W)Im(V_j)` carries it to the channel bins.

use num_complex::Complex64;

use super::ScTarget;
use crate::dirac::{self, dipoles, dot3, Vec3};
use crate::error::{Error, Result};
use crate::foa_signal::Channel;
use crate::grid::Grid;
use crate::tf_transform::{ComplexGrid, FoaSpectrum, Stft, StftParams};

/// Per-bin loss gradient stored as `∂L/∂Re + i ∂L/∂Im`, ACN channel order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGradient {
    params: StftParams,
    channels: [ComplexGrid; 4],
}

impl SpectrumGradient {
    pub fn channels(&self) -> &[ComplexGrid; 4] {
        &self.channels
    }

    pub fn params(&self) -> &StftParams {
        &self.params
    }

    /// Largest absolute partial derivative.
    pub fn max_abs(&self) -> f64 {
        self.channels
            .iter()
            .flat_map(|g| g.iter())
            .map(|c| c.re.abs().max(c.im.abs()))
            .fold(0.0, f64::max)
    }

    /// Negates every entry. Only useful to exercise gradient checkers.
    pub fn negated(&self) -> Self {
        Self {
            params: self.params,
            channels: self.channels.each_ref().map(|g| g.map(|c| -c)),
        }
    }

    /// Pulls the gradient back through the STFT to the time samples of the
    /// reconstruction.
    pub fn to_time_domain(&self, recon: &FoaSpectrum) -> Result<[Vec<f64>; 4]> {
        let len = recon
            .signal_len()
            .ok_or_else(|| Error::InvalidArgument("reconstruction spectrum has no time signal to chain to".into()))?;
        let engine = Stft::new(self.params);
        let mut out: [Vec<f64>; 4] = Default::default();
        for (o, g) in out.iter_mut().zip(&self.channels) {
            *o = engine.adjoint(g, len)?;
        }
        Ok(out)
    }
}

/// `∂s/∂b` for one bin.
fn cosine_grad(a: &Vec3, b: &Vec3, epsilon: f64) -> Vec3 {
    let na = dirac::norm3(a);
    let nb = dirac::norm3(b);
    let den = na * nb + epsilon;
    if den == 0.0 {
        return [0.0; 3];
    }
    let first = a.map(|v| v / den);
    if nb == 0.0 {
        return first;
    }
    let coef = dot3(a, b) * na / (nb * den * den);
    [first[0] - coef * b[0], first[1] - coef * b[1], first[2] - coef * b[2]]
}

impl ScTarget {
    pub fn gradient(&self, recon: &FoaSpectrum) -> Result<SpectrumGradient> {
        self.check(recon)?;
        let (frames, bins) = self.shape;
        let scale = -1.0 / self.normalizer();
        let w_grid = &recon.channels()[Channel::W.index()];
        let zero = Complex64::default();
        let mut out: [ComplexGrid; 4] = std::array::from_fn(|_| Grid::filled(frames, bins, zero));
        for t in 0..frames {
            for k in 0..bins {
                let weight = self.weights[(t, k)];
                if weight == 0.0 {
                    continue;
                }
                let w = w_grid[(t, k)];
                let v = dipoles(recon, t, k);
                let b = dirac::bin_intensity(w, &v);
                let ds = cosine_grad(&self.intensity[(t, k)], &b, self.cfg.epsilon);
                let g = ds.map(|d| scale * weight * d);
                let mut dw = zero;
                for (j, ch) in [Channel::X, Channel::Y, Channel::Z].into_iter().enumerate() {
                    out[ch.index()][(t, k)] = Complex64::new(g[j] * w.re, g[j] * w.im);
                    dw += Complex64::new(g[j] * v[j].re, g[j] * v[j].im);
                }
                out[Channel::W.index()][(t, k)] = dw;
            }
        }
        Ok(SpectrumGradient {
            params: *recon.params(),
            channels: out,
        })
    }
}
