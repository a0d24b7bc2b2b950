//! Central-difference verification of the analytic spatial consistency
//! gradient on random spectra.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{cosine, ScConfig, ScTarget, SpectrumGradient};
use crate::dirac;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::tf_transform::{ComplexGrid, FoaSpectrum, StftParams};

/// Pass threshold on the maximum relative error.
pub const TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub cases: usize,
    pub frames: usize,
    pub bins: usize,
    pub seed: u64,
    /// Finite-difference step relative to the case's amplitude scale.
    pub relative_step: f64,
    pub sc: ScConfig,
    /// Negate the analytic gradient before comparing. A working checker
    /// must then fail.
    pub inject_sign_flip: bool,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            cases: 100,
            frames: 8,
            bins: 9,
            seed: 0,
            relative_step: 1e-6,
            sc: ScConfig::default(),
            inject_sign_flip: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub cases: usize,
    pub entries_checked: usize,
    pub max_relative_error: f64,
    pub worst_case: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error < TOLERANCE
    }
}

/// Placeholder STFT layout whose bin count is `bins`.
fn params_for(bins: usize) -> Result<StftParams> {
    if bins < 2 {
        return Err(Error::InvalidArgument("gradient check needs at least 2 bins".into()));
    }
    let n = 2 * (bins - 1);
    StftParams::new(n, (n / 4).max(1), n, true)
}

/// A spectrum with independent complex Gaussian bins of standard deviation
/// `scale`.
pub fn random_spectrum(rng: &mut impl Rng, frames: usize, bins: usize, scale: f64) -> Result<FoaSpectrum> {
    let params = params_for(bins)?;
    let channels: [ComplexGrid; 4] = std::array::from_fn(|_| {
        Grid::from_fn(frames, bins, |_, _| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(scale * re, scale * im)
        })
    });
    FoaSpectrum::from_grids(params, 24_000, channels)
}

/// The loss term of bin `(t, k)` of `recon` with entry `ch` offset by
/// `delta`, already divided by the `T·K` normalizer.
fn bin_term(target: &ScTarget, recon: &FoaSpectrum, ch: usize, t: usize, k: usize, delta: Complex64) -> f64 {
    let w = target.weights()[(t, k)];
    if w == 0.0 {
        return 0.0;
    }
    let mut bins: [Complex64; 4] = std::array::from_fn(|c| recon.channels()[c][(t, k)]);
    bins[ch] += delta;
    // ACN order is W, Y, Z, X; intensity wants X, Y, Z
    let i_rec = dirac::bin_intensity(bins[0], &[bins[3], bins[1], bins[2]]);
    let s = cosine(&target.intensity()[(t, k)], &i_rec, target.config().epsilon);
    let (frames, nbins) = recon.shape();
    w * (1.0 - s) / (frames * nbins) as f64
}

/// Largest relative error between `analytic` and central differences of
/// the loss over every real and imaginary coordinate of `recon`.
///
/// The loss is a sum of per-bin terms and a recon entry only enters its
/// own bin, so the difference is taken on that term. Differencing the full
/// total would bury small derivatives under the rounding of the sum.
///
/// Relative error is `|a − n| / max(|a|, |n|, 1e-6 · max|n|)`; the floor
/// keeps coordinates whose true derivative is zero from dividing noise by
/// noise.
pub fn max_relative_error(
    target: &ScTarget,
    recon: &FoaSpectrum,
    analytic: &SpectrumGradient,
    step: f64,
) -> Result<(f64, usize)> {
    recon.ensure_same_shape(&FoaSpectrum::from_grids(
        *recon.params(),
        recon.sample_rate(),
        analytic.channels().clone(),
    )?)?;
    target.weights().ensure_shape(recon.shape())?;
    let (frames, bins) = recon.shape();
    let mut numeric = Vec::new();
    let mut computed = Vec::new();
    for ch in 0..4 {
        for t in 0..frames {
            for k in 0..bins {
                let a = analytic.channels()[ch][(t, k)];
                for (unit, a_part) in [(Complex64::new(1.0, 0.0), a.re), (Complex64::new(0.0, 1.0), a.im)] {
                    let up = bin_term(target, recon, ch, t, k, unit * step);
                    let down = bin_term(target, recon, ch, t, k, -unit * step);
                    numeric.push((up - down) / (2.0 * step));
                    computed.push(a_part);
                }
            }
        }
    }
    let floor = 1e-6 * numeric.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let worst = numeric
        .iter()
        .zip(&computed)
        .map(|(n, a)| {
            let den = n.abs().max(a.abs()).max(floor);
            if den > 0.0 {
                (a - n).abs() / den
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    Ok((worst, numeric.len()))
}

pub fn run(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    if cfg.cases == 0 || cfg.frames == 0 {
        return Err(Error::InvalidArgument("need at least one case and one frame".into()));
    }
    if !(cfg.relative_step > 0.0 && cfg.relative_step.is_finite()) {
        return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = GradCheckReport {
        cases: cfg.cases,
        entries_checked: 0,
        max_relative_error: 0.0,
        worst_case: 0,
    };
    for case in 0..cfg.cases {
        let scale = 10f64.powf(rng.random_range(-1.0..1.0));
        let input = random_spectrum(&mut rng, cfg.frames, cfg.bins, scale)?;
        let recon = random_spectrum(&mut rng, cfg.frames, cfg.bins, scale)?;
        let target = ScTarget::new(&input, cfg.sc)?;
        let mut grad = target.gradient(&recon)?;
        if cfg.inject_sign_flip {
            grad = grad.negated();
        }
        let (err, n) = max_relative_error(&target, &recon, &grad, cfg.relative_step * scale)?;
        report.entries_checked += n;
        if err > report.max_relative_error || case == 0 {
            report.max_relative_error = err;
            report.worst_case = case;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sized_run_passes() {
        let r = run(&GradCheckConfig {
            cases: 10,
            ..Default::default()
        })
        .unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.entries_checked, 10 * 4 * 8 * 9 * 2);
    }

    #[test]
    fn tiny_grid_passes() {
        let r = run(&GradCheckConfig {
            cases: 20,
            frames: 2,
            bins: 3,
            ..Default::default()
        })
        .unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn sign_flip_is_caught() {
        let r = run(&GradCheckConfig {
            cases: 2,
            inject_sign_flip: true,
            ..Default::default()
        })
        .unwrap();
        assert!(!r.passed());
        assert!((r.max_relative_error - 2.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_degenerate_configs() {
        assert!(run(&GradCheckConfig {
            bins: 1,
            ..Default::default()
        })
        .is_err());
        assert!(run(&GradCheckConfig {
            cases: 0,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn bin_term_matches_full_loss_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let input = random_spectrum(&mut rng, 3, 5, 1.0).unwrap();
        let recon = random_spectrum(&mut rng, 3, 5, 1.0).unwrap();
        let target = ScTarget::new(&input, ScConfig::default()).unwrap();
        let base = target.loss(&recon).unwrap();
        let delta = Complex64::new(0.3, -0.2);
        for (ch, t, k) in [(0, 0, 0), (1, 2, 4), (3, 1, 2)] {
            let mut channels = recon.channels().clone();
            channels[ch][(t, k)] += delta;
            let moved = FoaSpectrum::from_grids(*recon.params(), 24_000, channels).unwrap();
            let full = target.loss(&moved).unwrap() - base;
            let local = bin_term(&target, &recon, ch, t, k, delta)
                - bin_term(&target, &recon, ch, t, k, Complex64::new(0.0, 0.0));
            assert!((full - local).abs() < 1e-12, "{full} vs {local}");
        }
    }
}
