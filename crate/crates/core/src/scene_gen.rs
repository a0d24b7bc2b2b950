//! Synthetic FOA scenes: point sources at known directions plus an
//! optional diffuse background made of many uncorrelated noise sources
//! spread evenly over the sphere.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::foa_signal::{encode_source, mix, Channel, Direction, FoaSignal, SceneManifest};

pub const DEFAULT_DIFFUSE_DIRECTIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    White,
    Pink,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffuseFieldSpec {
    pub n_directions: usize,
    /// Target RMS of the W channel.
    pub level: f64,
    pub noise: NoiseKind,
    pub seed: u64,
}

impl DiffuseFieldSpec {
    pub fn new(level: f64, seed: u64) -> Self {
        Self {
            n_directions: DEFAULT_DIFFUSE_DIRECTIONS,
            level,
            noise: NoiseKind::White,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_directions < 4 {
            return Err(Error::InvalidArgument(format!(
                "diffuse field needs >= 4 directions, got {}",
                self.n_directions
            )));
        }
        if !(self.level.is_finite() && self.level >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "diffuse level must be >= 0, got {}",
                self.level
            )));
        }
        Ok(())
    }
}

/// Uniformly distributed random rotation (unit quaternion method).
fn random_rotation(rng: &mut impl Rng) -> [[f64; 3]; 3] {
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (w, x, y, z) = (
        a * (2.0 * PI * u2).sin(),
        a * (2.0 * PI * u2).cos(),
        b * (2.0 * PI * u3).sin(),
        b * (2.0 * PI * u3).cos(),
    );
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
        ],
        [
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
        ],
        [
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

/// Fibonacci-sphere layout of `n` points under a seeded random rotation.
pub fn uniform_sphere_directions(n: usize, seed: u64) -> Result<Vec<Direction>> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one direction".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rot = random_rotation(&mut rng);
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            let p = [r * phi.cos(), r * phi.sin(), z];
            let q: [f64; 3] = std::array::from_fn(|row| rot[row][0] * p[0] + rot[row][1] * p[1] + rot[row][2] * p[2]);
            // rotation keeps |q| = 1, so elevation stays in range after clamping rounding
            let el = q[2].clamp(-1.0, 1.0).asin();
            Direction::new(q[1].atan2(q[0]), el)
        })
        .collect()
}

/// Unit-variance noise of `len` samples.
pub fn noise(kind: NoiseKind, len: usize, rng: &mut impl Rng) -> Vec<f64> {
    let white = (0..len).map(|_| StandardNormal.sample(rng));
    match kind {
        NoiseKind::White => white.collect(),
        NoiseKind::Pink => {
            // Paul Kellet's economy pink filter
            let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
            let raw: Vec<f64> = white
                .map(|w: f64| {
                    b0 = 0.99765 * b0 + w * 0.0990460;
                    b1 = 0.96300 * b1 + w * 0.2965164;
                    b2 = 0.57000 * b2 + w * 1.0526913;
                    b0 + b1 + b2 + w * 0.1848
                })
                .collect();
            let rms = (raw.iter().map(|v| v * v).sum::<f64>() / len.max(1) as f64).sqrt();
            if rms > 0.0 {
                raw.into_iter().map(|v| v / rms).collect()
            } else {
                raw
            }
        }
    }
}

fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

fn samples_for(duration: f64, sample_rate: u32) -> Result<usize> {
    if !(duration.is_finite() && duration > 0.0) || sample_rate == 0 {
        return Err(Error::InvalidArgument(format!(
            "duration must be > 0 s at a positive sample rate, got {duration} s"
        )));
    }
    Ok(((duration * sample_rate as f64).round() as usize).max(1))
}

/// Sum of `n_directions` independently seeded noise sources, each encoded
/// at its own direction, scaled so the W channel has RMS `level`.
pub fn generate_diffuse(spec: &DiffuseFieldSpec, duration: f64, sample_rate: u32) -> Result<FoaSignal> {
    spec.validate()?;
    let len = samples_for(duration, sample_rate)?;
    if spec.level == 0.0 {
        return FoaSignal::silence(sample_rate, len);
    }
    let dirs = uniform_sphere_directions(spec.n_directions, spec.seed)?;
    let parts = dirs
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64 + 1);
            encode_source(&noise(spec.noise, len, &mut rng), d, sample_rate)
        })
        .collect::<Result<Vec<_>>>()?;
    let field = mix(&parts)?;
    let w_rms = rms(field.channel(Channel::W));
    if w_rms == 0.0 {
        return FoaSignal::silence(sample_rate, len);
    }
    field.scaled(spec.level / w_rms)
}

/// Renders a manifest. `audio` maps each source's `file` id to mono
/// samples at the manifest's sample rate. Returns the scene and the
/// ground-truth direction of each source in manifest order.
pub fn generate_scene(
    manifest: &SceneManifest,
    audio: &HashMap<String, Vec<f64>>,
) -> Result<(FoaSignal, Vec<Direction>)> {
    manifest.validate()?;
    let mut sources = Vec::with_capacity(manifest.sources.len());
    for s in &manifest.sources {
        let mono = audio.get(&s.file).ok_or_else(|| Error::MissingAudio(s.file.clone()))?;
        if mono.is_empty() {
            return Err(Error::Empty("source audio"));
        }
        sources.push((s, mono));
    }
    let len = match manifest.duration_s {
        Some(d) => samples_for(d, manifest.sample_rate)?,
        None => sources.iter().map(|(_, m)| m.len()).max().unwrap_or(1),
    };
    let rate = manifest.sample_rate;
    let mut parts = Vec::with_capacity(sources.len() + 1);
    let mut truth = Vec::with_capacity(sources.len());
    for (entry, mono) in sources {
        let dir = entry.direction()?;
        let mut scaled: Vec<f64> = mono.iter().take(len).map(|v| entry.gain * v).collect();
        scaled.resize(len, 0.0);
        parts.push(encode_source(&scaled, dir, rate)?);
        truth.push(dir);
    }
    if manifest.diffuse_level > 0.0 {
        let spec = DiffuseFieldSpec {
            n_directions: manifest.diffuse_directions,
            level: manifest.diffuse_level,
            noise: manifest.diffuse_noise,
            seed: manifest.seed,
        };
        parts.push(generate_diffuse(&spec, len as f64 / rate as f64, rate)?.resized(len)?);
    }
    Ok((mix(&parts)?, truth))
}
