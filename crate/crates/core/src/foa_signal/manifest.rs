//! JSON scene manifests and ground-truth sidecars.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Direction;
use crate::error::{Error, Result};
use crate::scene_gen::NoiseKind;

/// Most directional sources a scene may hold.
pub const MAX_SOURCES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceEntry {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub gain: f64,
    /// Source id; the CLI resolves it as a mono WAV path relative to the
    /// audio directory.
    pub file: String,
}

impl SourceEntry {
    pub fn direction(&self) -> Result<Direction> {
        Direction::from_degrees(self.azimuth_deg, self.elevation_deg)
    }
}

fn default_sample_rate() -> u32 {
    super::DEFAULT_SAMPLE_RATE
}

fn default_directions() -> usize {
    crate::scene_gen::DEFAULT_DIFFUSE_DIRECTIONS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub sources: Vec<SourceEntry>,
    /// W-channel RMS of the diffuse background; 0 disables it.
    #[serde(default)]
    pub diffuse_level: f64,
    pub seed: u64,
    /// Output length. Defaults to the longest source.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: u32,
    #[serde(default = "default_directions")]
    pub diffuse_directions: usize,
    #[serde(default)]
    pub diffuse_noise: NoiseKind,
}

impl SceneManifest {
    pub fn validate(&self) -> Result<()> {
        if self.sources.is_empty() || self.sources.len() > MAX_SOURCES {
            return Err(Error::SourceCount(self.sources.len()));
        }
        for s in &self.sources {
            s.direction()?;
            if !(s.gain.is_finite() && s.gain > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "source {:?}: gain must be positive, got {}",
                    s.file, s.gain
                )));
            }
        }
        if !(self.diffuse_level.is_finite() && self.diffuse_level >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "diffuse_level must be >= 0, got {}",
                self.diffuse_level
            )));
        }
        if let Some(d) = self.duration_s {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::InvalidArgument(format!("duration_s must be > 0, got {d}")));
            }
        }
        if self.sample_rate == 0 {
            return Err(Error::InvalidArgument("sample_rate must be positive".into()));
        }
        Ok(())
    }

    /// Parses and validates a manifest.
    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSource {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

/// Contents of a `*.truth.json` sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthFile {
    pub sources: Vec<TruthSource>,
    pub diffuse_level: f64,
    pub seed: u64,
}

impl TruthFile {
    pub fn from_directions(dirs: &[Direction], diffuse_level: f64, seed: u64) -> Self {
        Self {
            sources: dirs
                .iter()
                .map(|d| TruthSource {
                    azimuth_deg: d.azimuth_deg(),
                    elevation_deg: d.elevation_deg(),
                })
                .collect(),
            diffuse_level,
            seed,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text)?;
        for s in &t.sources {
            Direction::from_degrees(s.azimuth_deg, s.elevation_deg)?;
        }
        Ok(t)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The ground-truth direction of a single-source scene.
    pub fn single_direction(&self) -> Option<Direction> {
        match self.sources.as_slice() {
            [s] => Direction::from_degrees(s.azimuth_deg, s.elevation_deg).ok(),
            _ => None,
        }
    }
}
