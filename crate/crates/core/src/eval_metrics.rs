//! Reconstruction metrics: intensity-based direction of arrival, angular
//! errors, and multi-resolution STFT and mel distances.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dirac::{self, norm3, Vec3};
use crate::error::{Error, Result};
use crate::foa_signal::{read_wav, Direction, FoaSignal, TruthFile};
use crate::io_util::KahanSum;
use crate::spatial_consistency::{mask, weights, ScConfig};
use crate::tf_transform::{mel_spectrogram, stft, FoaSpectrum, StftParams};

/// `(fft_size, hop, win_length)` of the multi-resolution STFT distance.
/// These are auraloss' `MultiResolutionSTFTLoss` defaults.
pub const STFT_RESOLUTIONS: [(usize, usize, usize); 3] = [(1024, 120, 600), (2048, 240, 1200), (512, 50, 240)];
/// Magnitude floor (applied to power) of the STFT distance.
pub const STFT_EPS: f64 = 1e-8;
pub const MEL_BANDS: usize = 80;
pub const MEL_FFT: usize = 1024;
pub const MEL_HOP: usize = 256;
/// Offset inside `log(eps + mel power)`.
pub const MEL_EPS: f64 = 1e-5;

/// Weighted sum of intensity vectors over the bins the SC mask keeps.
pub fn doa_vector(s: &FoaSignal, cfg: &ScConfig, params: &StftParams) -> Result<Vec3> {
    cfg.validate()?;
    let field = dirac::analyze(&FoaSpectrum::analyze(s, params), cfg.window)?;
    let m = mask(&field.energy, &field.diffuseness, cfg)?;
    let w = weights(&m, &field.energy, &field.diffuseness)?;
    let mut v = [KahanSum::default(), KahanSum::default(), KahanSum::default()];
    for (wi, i) in w.iter().zip(field.intensity.iter()) {
        if *wi > 0.0 {
            for (acc, c) in v.iter_mut().zip(i) {
                acc.add(wi * c);
            }
        }
    }
    Ok(v.map(|acc| acc.total()))
}

/// One direction per signal from the weighted intensity sum.
pub fn estimate_doa(s: &FoaSignal, cfg: &ScConfig, params: &StftParams) -> Result<Direction> {
    let v = doa_vector(s, cfg, params)?;
    if norm3(&v) == 0.0 {
        return Err(Error::NoDirectionalEnergy);
    }
    Direction::from_vector(v)
}

/// Great-circle angle in degrees, computed as `atan2(|a×b|, a·b)` so that
/// small angles keep full precision.
pub fn angular_error(a: &Direction, b: &Direction) -> f64 {
    let (u, v) = (a.unit_vector(), b.unit_vector());
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    norm3(&cross).atan2(dirac::dot3(&u, &v)).to_degrees()
}

/// Circular azimuth difference in `[0°, 180°]`.
pub fn azimuth_error(a: &Direction, b: &Direction) -> f64 {
    crate::foa_signal::wrap_angle(a.azimuth() - b.azimuth())
        .abs()
        .to_degrees()
}

pub fn elevation_error(a: &Direction, b: &Direction) -> f64 {
    (a.elevation() - b.elevation()).abs().to_degrees()
}

fn check_pair(x: &FoaSignal, y: &FoaSignal) -> Result<()> {
    if x.sample_rate() != y.sample_rate() {
        return Err(Error::SampleRateMismatch(x.sample_rate(), y.sample_rate()));
    }
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    Ok(())
}

/// Terms of the multi-resolution STFT distance, each averaged over
/// resolutions and channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StftDistance {
    pub spectral_convergence: f64,
    pub log_magnitude: f64,
}

impl StftDistance {
    pub fn total(&self) -> f64 {
        self.spectral_convergence + self.log_magnitude
    }
}

fn magnitudes(x: &[f64], params: &StftParams) -> Vec<f64> {
    stft(x, params)
        .iter()
        .map(|c| c.norm_sqr().max(STFT_EPS).sqrt())
        .collect()
}

pub fn stft_distance_terms(x: &FoaSignal, y: &FoaSignal) -> Result<StftDistance> {
    check_pair(x, y)?;
    let resolutions = STFT_RESOLUTIONS
        .iter()
        .map(|&(fft, hop, win)| StftParams::new(fft, hop, win, true))
        .collect::<Result<Vec<_>>>()?;
    let (mut sc, mut lm) = (0.0, 0.0);
    for (cx, cy) in x.channels().iter().zip(y.channels()) {
        for params in &resolutions {
            let (mx, my) = (magnitudes(cx, params), magnitudes(cy, params));
            let (mut diff, mut reference, mut log_l1) = (0.0, 0.0, 0.0);
            for (a, b) in mx.iter().zip(&my) {
                diff += (b - a) * (b - a);
                reference += a * a;
                log_l1 += (b.ln() - a.ln()).abs();
            }
            sc += diff.sqrt() / reference.sqrt();
            lm += log_l1 / mx.len() as f64;
        }
    }
    let n = (4 * resolutions.len()) as f64;
    Ok(StftDistance {
        spectral_convergence: sc / n,
        log_magnitude: lm / n,
    })
}

pub fn stft_distance(x: &FoaSignal, y: &FoaSignal) -> Result<f64> {
    Ok(stft_distance_terms(x, y)?.total())
}

/// Mean absolute difference of `ln(1e-5 + mel power)` over frames, bands
/// and channels.
pub fn mel_distance(x: &FoaSignal, y: &FoaSignal) -> Result<f64> {
    check_pair(x, y)?;
    let params = StftParams::new(MEL_FFT, MEL_HOP, MEL_FFT, true)?;
    let mut total = 0.0;
    for (cx, cy) in x.channels().iter().zip(y.channels()) {
        let mx = mel_spectrogram(cx, x.sample_rate(), MEL_BANDS, &params)?;
        let my = mel_spectrogram(cy, y.sample_rate(), MEL_BANDS, &params)?;
        let l1: f64 = mx
            .iter()
            .zip(my.iter())
            .map(|(a, b)| ((MEL_EPS + b).ln() - (MEL_EPS + a).ln()).abs())
            .sum();
        total += l1 / mx.as_slice().len() as f64;
    }
    Ok(total / 4.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub sc: ScConfig,
    pub doa_params: StftParams,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            sc: ScConfig::default(),
            doa_params: StftParams::dirac_default(),
        }
    }
}

/// Metrics for one input/reconstruction pair. Spatial fields are `None`
/// when a direction could not be estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub input_azimuth_deg: Option<f64>,
    pub input_elevation_deg: Option<f64>,
    pub recon_azimuth_deg: Option<f64>,
    pub recon_elevation_deg: Option<f64>,
    /// `"truth"` or `"input"`: what the recon estimate was compared with.
    pub reference: Option<String>,
    pub azimuth_error_deg: Option<f64>,
    pub elevation_error_deg: Option<f64>,
    pub angular_error_deg: Option<f64>,
    pub stft_distance: f64,
    pub mel_distance: f64,
}

fn optional_doa(s: &FoaSignal, cfg: &EvalConfig) -> Result<Option<Direction>> {
    match estimate_doa(s, &cfg.sc, &cfg.doa_params) {
        Ok(d) => Ok(Some(d)),
        Err(Error::NoDirectionalEnergy) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn evaluate_pair(
    input: &FoaSignal,
    recon: &FoaSignal,
    truth: Option<Direction>,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    check_pair(input, recon)?;
    let est_in = optional_doa(input, cfg)?;
    let est_rec = optional_doa(recon, cfg)?;
    let (reference, label) = match truth {
        Some(t) => (Some(t), "truth"),
        None => (est_in, "input"),
    };
    let errors = match (reference, est_rec) {
        (Some(r), Some(e)) => Some((azimuth_error(&e, &r), elevation_error(&e, &r), angular_error(&e, &r))),
        _ => None,
    };
    Ok(EvalReport {
        input_azimuth_deg: est_in.map(|d| d.azimuth_deg()),
        input_elevation_deg: est_in.map(|d| d.elevation_deg()),
        recon_azimuth_deg: est_rec.map(|d| d.azimuth_deg()),
        recon_elevation_deg: est_rec.map(|d| d.elevation_deg()),
        reference: errors.map(|_| label.to_string()),
        azimuth_error_deg: errors.map(|e| e.0),
        elevation_error_deg: errors.map(|e| e.1),
        angular_error_deg: errors.map(|e| e.2),
        stft_distance: stft_distance(input, recon)?,
        mel_distance: mel_distance(input, recon)?,
    })
}

/// Files making up one evaluation pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPaths {
    pub name: String,
    pub input: PathBuf,
    pub recon: PathBuf,
    /// Truth sidecar; used only when it lists exactly one source.
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileReport {
    pub name: String,
    #[serde(flatten)]
    pub report: EvalReport,
}

pub fn evaluate_files(pairs: &[PairPaths], cfg: &EvalConfig) -> Result<Vec<FileReport>> {
    if pairs.is_empty() {
        return Err(Error::Empty("pair list"));
    }
    pairs
        .par_iter()
        .map(|p| {
            let input = read_wav(&p.input)?;
            let recon = read_wav(&p.recon)?;
            let truth = match &p.truth {
                Some(path) => TruthFile::load(path)?.single_direction(),
                None => None,
            };
            Ok(FileReport {
                name: p.name.clone(),
                report: evaluate_pair(&input, &recon, truth, cfg)?,
            })
        })
        .collect()
}

/// Arithmetic means over files. Spatial means cover only the files that
/// have spatial errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub files: usize,
    pub spatial_files: usize,
    pub azimuth_error_deg: Option<f64>,
    pub elevation_error_deg: Option<f64>,
    pub angular_error_deg: Option<f64>,
    pub stft_distance: f64,
    pub mel_distance: f64,
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (KahanSum::default(), 0usize);
    for v in values {
        sum.add(v);
        n += 1;
    }
    (n > 0).then(|| sum.total() / n as f64)
}

pub fn aggregate(reports: &[FileReport]) -> Result<Aggregate> {
    if reports.is_empty() {
        return Err(Error::Empty("report list"));
    }
    let r = || reports.iter().map(|f| &f.report);
    Ok(Aggregate {
        files: reports.len(),
        spatial_files: r().filter(|e| e.angular_error_deg.is_some()).count(),
        azimuth_error_deg: mean_of(r().filter_map(|e| e.azimuth_error_deg)),
        elevation_error_deg: mean_of(r().filter_map(|e| e.elevation_error_deg)),
        angular_error_deg: mean_of(r().filter_map(|e| e.angular_error_deg)),
        stft_distance: mean_of(r().map(|e| e.stft_distance)).unwrap_or(0.0),
        mel_distance: mean_of(r().map(|e| e.mel_distance)).unwrap_or(0.0),
    })
}

pub const CSV_HEADER: [&str; 11] = [
    "name",
    "input_azimuth_deg",
    "input_elevation_deg",
    "recon_azimuth_deg",
    "recon_elevation_deg",
    "reference",
    "azimuth_error_deg",
    "elevation_error_deg",
    "angular_error_deg",
    "stft_distance",
    "mel_distance",
];

/// One CSV row per file; missing values are empty cells.
pub fn write_reports_csv<W: Write>(reports: &[FileReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(io)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for f in reports {
        let r = &f.report;
        w.write_record([
            f.name.clone(),
            opt(r.input_azimuth_deg),
            opt(r.input_elevation_deg),
            opt(r.recon_azimuth_deg),
            opt(r.recon_elevation_deg),
            r.reference.clone().unwrap_or_default(),
            opt(r.azimuth_error_deg),
            opt(r.elevation_error_deg),
            opt(r.angular_error_deg),
            r.stft_distance.to_string(),
            r.mel_distance.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Pairs files with the same name in two directories. Truth sidecars are
/// looked up as `<stem>.truth.json` in `truth_dir` (or next to the input
/// when `truth_dir` is `None`).
pub fn pairs_from_dirs(input_dir: &Path, recon_dir: &Path, truth_dir: Option<&Path>) -> Result<Vec<PairPaths>> {
    let mut names: Vec<String> = std::fs::read_dir(input_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.to_ascii_lowercase().ends_with(".wav"))
        .collect();
    names.sort();
    let mut pairs = Vec::with_capacity(names.len());
    for name in names {
        let recon = recon_dir.join(&name);
        if !recon.exists() {
            return Err(Error::InvalidArgument(format!(
                "no reconstruction for {name} in {}",
                recon_dir.display()
            )));
        }
        let stem = &name[..name.len() - 4];
        let truth = truth_dir.unwrap_or(input_dir).join(format!("{stem}.truth.json"));
        pairs.push(PairPaths {
            name: name.clone(),
            input: input_dir.join(&name),
            recon,
            truth: truth.exists().then_some(truth),
        });
    }
    Ok(pairs)
}
