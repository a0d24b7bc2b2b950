//! Per-bin DirAC parameters: energy, active intensity and diffuseness.
//!
//! With SN3D gains a plane wave has `‖I‖ = E`, so diffuseness is a pure
//! ratio with no acoustic constants:
//!
//! ```text
//! I = Re{ conj(W) · [X, Y, Z] }
//! E = ½ (|W|² + |X|² + |Y|² + |Z|²)
//! D = 1 − ‖⟨I⟩‖ / (⟨E⟩ + 1e-12)
//! ```
//!
//! where `⟨·⟩` is a centered moving average over `L` frames, truncated at
//! the edges.

use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::foa_signal::Channel;
use crate::grid::Grid;
use crate::tf_transform::FoaSpectrum;

/// Default smoothing length for diffuseness, in frames.
pub const DEFAULT_WINDOW: usize = 5;

const DIFFUSENESS_EPS: f64 = 1e-12;

pub type Vec3 = [f64; 3];

pub fn norm3(v: &Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub fn dot3(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// The dipole channels of one bin in intensity component order `(x, y, z)`.
pub(crate) fn dipoles(spec: &FoaSpectrum, t: usize, k: usize) -> [Complex64; 3] {
    let ch = spec.channels();
    [
        ch[Channel::X.index()][(t, k)],
        ch[Channel::Y.index()][(t, k)],
        ch[Channel::Z.index()][(t, k)],
    ]
}

/// Active intensity of a single bin.
pub fn bin_intensity(w: Complex64, v: &[Complex64; 3]) -> Vec3 {
    v.map(|c| w.re * c.re + w.im * c.im)
}

pub fn intensity(spec: &FoaSpectrum) -> Grid<Vec3> {
    let (frames, bins) = spec.shape();
    let w = &spec.channels()[Channel::W.index()];
    Grid::from_fn(frames, bins, |t, k| bin_intensity(w[(t, k)], &dipoles(spec, t, k)))
}

pub fn energy(spec: &FoaSpectrum) -> Grid<f64> {
    let (frames, bins) = spec.shape();
    let ch = spec.channels();
    Grid::from_fn(frames, bins, |t, k| {
        0.5 * ch.iter().map(|g| g[(t, k)].norm_sqr()).sum::<f64>()
    })
}

fn check_window(window: usize) -> Result<()> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "diffuseness window must be odd and >= 1, got {window}"
        )));
    }
    Ok(())
}

/// Centered moving average along the frame axis, edge-truncated.
fn smooth<T, const N: usize>(grid: &Grid<T>, window: usize, get: impl Fn(&T) -> [f64; N]) -> Grid<[f64; N]> {
    let half = window / 2;
    let frames = grid.frames();
    Grid::from_fn(frames, grid.bins(), |t, k| {
        let lo = t.saturating_sub(half);
        let hi = (t + half).min(frames - 1);
        let mut acc = [0.0; N];
        for s in lo..=hi {
            for (a, v) in acc.iter_mut().zip(get(&grid[(s, k)])) {
                *a += v;
            }
        }
        let n = (hi - lo + 1) as f64;
        acc.map(|a| a / n)
    })
}

/// Centered moving average of the intensity over `window` frames.
pub fn smoothed_intensity(intensity: &Grid<Vec3>, window: usize) -> Result<Grid<Vec3>> {
    check_window(window)?;
    Ok(smooth(intensity, window, |v| *v))
}

pub fn diffuseness(energy: &Grid<f64>, intensity: &Grid<Vec3>, window: usize) -> Result<Grid<f64>> {
    check_window(window)?;
    energy.ensure_shape(intensity.shape())?;
    let e_avg = smooth(energy, window, |e| [*e]);
    let i_avg = smooth(intensity, window, |v| *v);
    e_avg.zip_map(&i_avg, |e, i| {
        (1.0 - norm3(i) / (e[0] + DIFFUSENESS_EPS)).clamp(0.0, 1.0)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiracField {
    pub energy: Grid<f64>,
    pub intensity: Grid<Vec3>,
    pub diffuseness: Grid<f64>,
    pub window: usize,
}

pub fn analyze(spec: &FoaSpectrum, window: usize) -> Result<DiracField> {
    let e = energy(spec);
    let i = intensity(spec);
    let d = diffuseness(&e, &i, window)?;
    Ok(DiracField {
        energy: e,
        intensity: i,
        diffuseness: d,
        window,
    })
}

impl DiracField {
    pub fn shape(&self) -> (usize, usize) {
        self.energy.shape()
    }

    pub fn intensity_magnitude(&self) -> Grid<f64> {
        self.intensity.map(norm3)
    }

    /// `‖⟨I⟩‖` per bin, averaged over the field's smoothing window. This is
    /// the map plotted when visualizing where directional energy sits.
    pub fn averaged_intensity_magnitude(&self) -> Grid<f64> {
        smooth(&self.intensity, self.window, |v| *v).map(norm3)
    }

    /// Sum of intensity vectors over all bins. Each vector already scales
    /// with its bin's energy.
    pub fn dominant_vector(&self) -> Vec3 {
        let mut acc = [0.0; 3];
        for v in self.intensity.iter() {
            for (a, c) in acc.iter_mut().zip(v) {
                *a += c;
            }
        }
        acc
    }

    /// Averaged intensity magnitude as CSV: one row per frame, one column
    /// per bin.
    pub fn write_intensity_csv<W: Write>(&self, out: W) -> Result<()> {
        self.averaged_intensity_magnitude().write_csv(out)
    }
}
