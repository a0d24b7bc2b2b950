//! Short-time Fourier analysis, its inverse and adjoint, and HTK mel filterbanks.
//!
//! Frames use a periodic Hann window of `win_length` samples, zero-padded
//! and centered inside `fft_size`. With `center` set the signal is
//! zero-padded by `fft_size / 2` on the left so frame `t` is centered on
//! sample `t * hop`. The inverse uses the analysis window for synthesis and
//! normalizes by the overlapped squared window, which is exact wherever
//! that sum is nonzero.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::foa_signal::FoaSignal;
use crate::grid::Grid;

pub type ComplexGrid = Grid<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StftParams {
    fft_size: usize,
    hop: usize,
    win_length: usize,
    center: bool,
}

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let s = (PI * i as f64 / n as f64).sin();
            s * s
        })
        .collect()
}

impl StftParams {
    /// Validates the frame layout. Besides the size constraints, the
    /// squared window overlapped at `hop` must be nonzero everywhere, so
    /// the overlap-add inverse is exact.
    pub fn new(fft_size: usize, hop: usize, win_length: usize, center: bool) -> Result<Self> {
        if fft_size < 2 || !fft_size.is_multiple_of(2) {
            return Err(Error::InvalidStft(format!(
                "fft_size must be even and >= 2, got {fft_size}"
            )));
        }
        if win_length < 2 || win_length > fft_size {
            return Err(Error::InvalidStft(format!(
                "win_length must be in [2, fft_size], got {win_length}"
            )));
        }
        if hop == 0 || hop > win_length {
            return Err(Error::InvalidStft(format!("hop must be in [1, win_length], got {hop}")));
        }
        let p = Self {
            fft_size,
            hop,
            win_length,
            center,
        };
        let overlap = p.overlap_profile(|w| w * w);
        let max = overlap.iter().cloned().fold(0.0, f64::max);
        let min = overlap.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min > 1e-8 * max) {
            return Err(Error::InvalidStft(format!(
                "window {win_length} with hop {hop} does not overlap-add to a nonzero sum"
            )));
        }
        Ok(p)
    }

    /// Hann 1024 / hop 256, centered.
    pub fn dirac_default() -> Self {
        Self::new(1024, 256, 1024, true).expect("default parameters are valid")
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn win_length(&self) -> usize {
        self.win_length
    }

    pub fn center(&self) -> bool {
        self.center
    }

    /// Number of one-sided frequency bins.
    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Window zero-padded and centered to `fft_size`.
    pub fn window(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.fft_size];
        let off = self.window_offset();
        w[off..off + self.win_length].copy_from_slice(&hann(self.win_length));
        w
    }

    fn window_offset(&self) -> usize {
        (self.fft_size - self.win_length) / 2
    }

    fn pad_left(&self) -> usize {
        if self.center {
            self.fft_size / 2
        } else {
            0
        }
    }

    /// Frames needed so every sample of a `len`-sample signal falls under
    /// at least one window.
    pub fn num_frames(&self, len: usize) -> usize {
        let end = self.pad_left() + len;
        let off = self.window_offset();
        if end <= off {
            1
        } else {
            (end - off).div_ceil(self.hop).max(1)
        }
    }

    /// `sum_t f(w[n - t*hop])` over one hop period in steady state.
    fn overlap_profile(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let w = self.window();
        let mut acc = vec![0.0; self.hop];
        for (m, &v) in w.iter().enumerate() {
            acc[m % self.hop] += f(v);
        }
        acc
    }

    /// Constant overlap-add of the window itself.
    pub fn is_cola(&self) -> bool {
        let p = self.overlap_profile(|w| w);
        let max = p.iter().cloned().fold(0.0, f64::max);
        let min = p.iter().cloned().fold(f64::INFINITY, f64::min);
        max > 0.0 && (max - min) <= 1e-10 * max
    }
}

/// Reusable forward/inverse transform for one parameter set.
pub struct Stft {
    params: StftParams,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Stft {
    pub fn new(params: StftParams) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            params,
            window: params.window(),
            forward: planner.plan_fft_forward(params.fft_size),
            inverse: planner.plan_fft_inverse(params.fft_size),
        }
    }

    pub fn params(&self) -> &StftParams {
        &self.params
    }

    pub fn forward(&self, signal: &[f64]) -> ComplexGrid {
        let p = &self.params;
        let n_fft = p.fft_size;
        let frames = p.num_frames(signal.len());
        let bins = p.bins();
        let pad = p.pad_left() as isize;
        let mut out = Grid::filled(frames, bins, Complex64::default());
        let mut buf = vec![Complex64::default(); n_fft];
        for t in 0..frames {
            let start = (t * p.hop) as isize - pad;
            for (m, slot) in buf.iter_mut().enumerate() {
                let idx = start + m as isize;
                let x = if idx >= 0 && (idx as usize) < signal.len() {
                    signal[idx as usize]
                } else {
                    0.0
                };
                *slot = Complex64::new(x * self.window[m], 0.0);
            }
            self.forward.process(&mut buf);
            out.row_mut(t).copy_from_slice(&buf[..bins]);
        }
        out
    }

    fn check_grid(&self, grid: &ComplexGrid, len: usize) -> Result<()> {
        grid.ensure_shape((self.params.num_frames(len), self.params.bins()))
    }

    /// Weighted overlap-add inverse, returning `len` samples.
    pub fn inverse(&self, grid: &ComplexGrid, len: usize) -> Result<Vec<f64>> {
        self.check_grid(grid, len)?;
        let p = &self.params;
        let n_fft = p.fft_size;
        let pad = p.pad_left();
        let total = pad + len;
        let mut acc = vec![0.0; total];
        let mut norm = vec![0.0; total];
        let mut buf = vec![Complex64::default(); n_fft];
        for t in 0..grid.frames() {
            let row = grid.row(t);
            buf[..row.len()].copy_from_slice(row);
            for k in 1..n_fft - row.len() + 1 {
                buf[n_fft - k] = row[k].conj();
            }
            self.inverse.process(&mut buf);
            let start = t * p.hop;
            for m in 0..n_fft {
                let i = start + m;
                if i >= total {
                    break;
                }
                let w = self.window[m];
                acc[i] += w * buf[m].re / n_fft as f64;
                norm[i] += w * w;
            }
        }
        Ok(acc[pad..]
            .iter()
            .zip(&norm[pad..])
            .map(|(&a, &n)| if n > 1e-10 { a / n } else { 0.0 })
            .collect())
    }

    /// Adjoint of [`Stft::forward`] with respect to the real and imaginary
    /// parts of every retained bin: given `g = dL/dRe + i dL/dIm` per bin,
    /// returns `dL/dx` for each of the `len` input samples.
    pub fn adjoint(&self, grad: &ComplexGrid, len: usize) -> Result<Vec<f64>> {
        self.check_grid(grad, len)?;
        let p = &self.params;
        let n_fft = p.fft_size;
        let pad = p.pad_left() as isize;
        let mut out = vec![0.0; len];
        let mut buf = vec![Complex64::default(); n_fft];
        for t in 0..grad.frames() {
            buf.fill(Complex64::default());
            buf[..grad.bins()].copy_from_slice(grad.row(t));
            self.inverse.process(&mut buf);
            let start = (t * p.hop) as isize - pad;
            for (m, v) in buf.iter().enumerate() {
                let idx = start + m as isize;
                if idx >= 0 && (idx as usize) < len {
                    out[idx as usize] += self.window[m] * v.re;
                }
            }
        }
        Ok(out)
    }
}

pub fn stft(channel: &[f64], params: &StftParams) -> ComplexGrid {
    Stft::new(*params).forward(channel)
}

pub fn istft(grid: &ComplexGrid, params: &StftParams, len: usize) -> Result<Vec<f64>> {
    Stft::new(*params).inverse(grid, len)
}

/// Time-frequency representation of all four FOA channels.
#[derive(Debug, Clone, PartialEq)]
pub struct FoaSpectrum {
    params: StftParams,
    sample_rate: u32,
    signal_len: Option<usize>,
    channels: [ComplexGrid; 4],
}

impl FoaSpectrum {
    pub fn analyze(signal: &FoaSignal, params: &StftParams) -> Self {
        let engine = Stft::new(*params);
        Self {
            params: *params,
            sample_rate: signal.sample_rate(),
            signal_len: Some(signal.len()),
            channels: signal.channels().each_ref().map(|ch| engine.forward(ch)),
        }
    }

    /// Wraps precomputed grids in ACN order. All four must be `T × K`
    /// with `K` matching `params`, and finite.
    pub fn from_grids(params: StftParams, sample_rate: u32, channels: [ComplexGrid; 4]) -> Result<Self> {
        let shape = channels[0].shape();
        if shape.1 != params.bins() {
            return Err(Error::ShapeMismatch {
                left: shape,
                right: (shape.0, params.bins()),
            });
        }
        for ch in &channels {
            ch.ensure_shape(shape)?;
            if let Some(index) = ch.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
                return Err(Error::NonFinite {
                    what: "spectrum",
                    index,
                });
            }
        }
        Ok(Self {
            params,
            sample_rate,
            signal_len: None,
            channels,
        })
    }

    pub fn params(&self) -> &StftParams {
        &self.params
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Length of the analyzed time signal, when known.
    pub fn signal_len(&self) -> Option<usize> {
        self.signal_len
    }

    pub fn channels(&self) -> &[ComplexGrid; 4] {
        &self.channels
    }

    pub fn into_channels(self) -> [ComplexGrid; 4] {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize) {
        self.channels[0].shape()
    }

    pub fn ensure_same_shape(&self, other: &FoaSpectrum) -> Result<()> {
        self.channels[0].ensure_shape(other.shape())
    }

    /// Resynthesizes the time signal.
    pub fn synthesize(&self, len: usize) -> Result<FoaSignal> {
        let engine = Stft::new(self.params);
        let mut out: [Vec<f64>; 4] = Default::default();
        for (o, ch) in out.iter_mut().zip(&self.channels) {
            *o = engine.inverse(ch, len)?;
        }
        FoaSignal::new(self.sample_rate, out)
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular HTK-scale filterbank spanning 0 Hz to Nyquist, without area
/// normalization. Rows are bands, columns are one-sided FFT bins.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    weights: Grid<f64>,
}

impl MelFilterbank {
    pub fn new(sample_rate: u32, fft_size: usize, n_mels: usize) -> Result<Self> {
        let bins = fft_size / 2 + 1;
        if n_mels == 0 {
            return Err(Error::InvalidArgument("n_mels must be >= 1".into()));
        }
        if n_mels > bins {
            return Err(Error::InvalidArgument(format!(
                "n_mels {n_mels} exceeds the {bins} available bins"
            )));
        }
        let nyquist = sample_rate as f64 / 2.0;
        let top = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
            .collect();
        let weights = Grid::from_fn(n_mels, bins, |m, k| {
            let f = k as f64 * sample_rate as f64 / fft_size as f64;
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let rising = (f - lo) / (mid - lo);
            let falling = (hi - f) / (hi - mid);
            rising.min(falling).max(0.0)
        });
        if let Some(m) = (0..n_mels).find(|&m| weights.row(m).iter().sum::<f64>() <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "mel band {m} covers no FFT bin; use fewer bands or a larger fft_size"
            )));
        }
        Ok(Self { weights })
    }

    pub fn n_mels(&self) -> usize {
        self.weights.frames()
    }

    pub fn weights(&self) -> &Grid<f64> {
        &self.weights
    }

    /// Maps a `T × K` power grid to `T × n_mels`.
    pub fn apply(&self, power: &Grid<f64>) -> Result<Grid<f64>> {
        if power.bins() != self.weights.bins() {
            return Err(Error::ShapeMismatch {
                left: power.shape(),
                right: (power.frames(), self.weights.bins()),
            });
        }
        Ok(Grid::from_fn(power.frames(), self.n_mels(), |t, m| {
            self.weights.row(m).iter().zip(power.row(t)).map(|(w, p)| w * p).sum()
        }))
    }
}

/// Mel-band power spectrogram (`|STFT|²` through the filterbank).
pub fn mel_spectrogram(channel: &[f64], sample_rate: u32, n_mels: usize, params: &StftParams) -> Result<Grid<f64>> {
    let bank = MelFilterbank::new(sample_rate, params.fft_size(), n_mels)?;
    let power = stft(channel, params).map(|c| c.norm_sqr());
    bank.apply(&power)
}
