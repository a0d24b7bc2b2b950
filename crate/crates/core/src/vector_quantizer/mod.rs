//! Single-layer vector quantizer: k-means initialization, nearest-code
//! assignment, EMA codebook updates and dead-code reactivation.

mod io;

pub use io::{decode_tokens, encode_tokens, read_tokens, write_tokens, MAX_TOKEN_CODES};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Codebook size used when none is given.
pub const DEFAULT_CODES: usize = 4096;
pub const DEFAULT_DECAY: f64 = 0.99;
pub const DEFAULT_SMOOTHING: f64 = 1e-5;
pub const DEFAULT_STALENESS: u32 = 2;
/// Latent vectors per second of audio at the reference operating point.
pub const DEFAULT_FRAME_RATE: f32 = 75.0;

fn check_finite(values: &[f32], what: &'static str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = *x as f64 - *y as f64;
            d * d
        })
        .sum()
}

/// `B × D` row-major latent vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBatch {
    dim: usize,
    data: Vec<f32>,
    frame_rate: f32,
}

impl LatentBatch {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        Self::with_frame_rate(dim, data, DEFAULT_FRAME_RATE)
    }

    pub fn with_frame_rate(dim: usize, data: Vec<f32>, frame_rate: f32) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("latent dimension must be >= 1".into()));
        }
        if data.is_empty() {
            return Err(Error::Empty("latent batch"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::LengthMismatch(data.len().div_ceil(dim) * dim, data.len()));
        }
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "frame rate must be > 0, got {frame_rate}"
            )));
        }
        check_finite(&data, "latent batch")?;
        Ok(Self { dim, data, frame_rate })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(Error::Empty("latent batch"))?;
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                codebook: dim,
                latents: bad.len(),
            });
        }
        Self::new(dim, rows.concat())
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame_rate(&self) -> f32 {
        self.frame_rate
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, b: usize) -> &[f32] {
        &self.data[b * self.dim..(b + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dim)
    }
}

/// Codebook entries plus the EMA statistics that drive their updates.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    dim: usize,
    entries: Vec<f32>,
    ema_cluster_size: Vec<f64>,
    ema_sum: Vec<f64>,
    /// Batches in which each code was assigned, since its last reactivation.
    usage: Vec<u32>,
    /// Consecutive batches without an assignment.
    staleness: Vec<u32>,
    decay: f64,
    smoothing: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quantized {
    pub indices: Vec<u32>,
    pub quantized: Vec<f32>,
    pub commitment_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodebookStats {
    pub perplexity: f64,
    pub usage_fraction: f64,
}

impl Codebook {
    /// Codebook with explicit entries. Each code starts with an EMA
    /// cluster size of 1 and an EMA sum equal to its entry.
    pub fn from_entries(dim: usize, entries: Vec<f32>) -> Result<Self> {
        if dim == 0 || entries.is_empty() || !entries.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "{} values do not form a codebook of dimension {dim}",
                entries.len()
            )));
        }
        check_finite(&entries, "codebook")?;
        let n = entries.len() / dim;
        Ok(Self {
            dim,
            ema_sum: entries.iter().map(|&v| v as f64).collect(),
            entries,
            ema_cluster_size: vec![1.0; n],
            usage: vec![0; n],
            staleness: vec![0; n],
            decay: DEFAULT_DECAY,
            smoothing: DEFAULT_SMOOTHING,
        })
    }

    pub fn with_ema(mut self, decay: f64, smoothing: f64) -> Result<Self> {
        if !(decay > 0.0 && decay < 1.0) {
            return Err(Error::InvalidArgument(format!("decay must be in (0, 1), got {decay}")));
        }
        if !(smoothing > 0.0 && smoothing.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "smoothing must be > 0, got {smoothing}"
            )));
        }
        self.decay = decay;
        self.smoothing = smoothing;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.entries.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn entries(&self) -> &[f32] {
        &self.entries
    }

    pub fn entry(&self, n: usize) -> &[f32] {
        &self.entries[n * self.dim..(n + 1) * self.dim]
    }

    pub fn ema_cluster_size(&self) -> &[f64] {
        &self.ema_cluster_size
    }

    pub fn ema_sum(&self) -> &[f64] {
        &self.ema_sum
    }

    pub fn usage(&self) -> &[u32] {
        &self.usage
    }

    pub fn staleness(&self) -> &[u32] {
        &self.staleness
    }

    fn check_dim(&self, latents: &LatentBatch) -> Result<()> {
        if latents.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                codebook: self.dim,
                latents: latents.dim(),
            });
        }
        Ok(())
    }

    fn check_indices(&self, latents: &LatentBatch, indices: &[u32]) -> Result<()> {
        self.check_dim(latents)?;
        if indices.len() != latents.len() {
            return Err(Error::LengthMismatch(latents.len(), indices.len()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i as usize >= self.len()) {
            return Err(Error::IndexOutOfRange {
                index: bad as usize,
                size: self.len(),
            });
        }
        Ok(())
    }

    /// Index of the closest entry; ties go to the lowest index.
    pub fn nearest(&self, v: &[f32]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (n, e) in self.entries.chunks_exact(self.dim).enumerate() {
            let d = sq_dist(v, e);
            if d < best.1 {
                best = (n, d);
            }
        }
        best
    }

    pub fn quantize(&self, latents: &LatentBatch) -> Result<Quantized> {
        self.check_dim(latents)?;
        let hits: Vec<(usize, f64)> = latents
            .as_slice()
            .par_chunks_exact(self.dim)
            .map(|v| self.nearest(v))
            .collect();
        let mut quantized = Vec::with_capacity(latents.as_slice().len());
        for &(n, _) in &hits {
            quantized.extend_from_slice(self.entry(n));
        }
        let commitment_loss = hits.iter().map(|h| h.1).sum::<f64>() / hits.len() as f64;
        Ok(Quantized {
            indices: hits.iter().map(|h| h.0 as u32).collect(),
            quantized,
            commitment_loss,
        })
    }

    /// Looks up entries for a token stream.
    pub fn decode(&self, indices: &[u32]) -> Result<LatentBatch> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i as usize >= self.len() {
                return Err(Error::IndexOutOfRange {
                    index: i as usize,
                    size: self.len(),
                });
            }
            data.extend_from_slice(self.entry(i as usize));
        }
        LatentBatch::new(self.dim, data)
    }

    /// One EMA step from a batch and its assignments.
    ///
    /// Entries are recomputed only for codes assigned in this batch;
    /// unassigned codes keep their entries bit for bit while their
    /// statistics decay.
    pub fn ema_update(&mut self, latents: &LatentBatch, indices: &[u32]) -> Result<()> {
        self.check_indices(latents, indices)?;
        let (n_codes, dim, g) = (self.len(), self.dim, self.decay);
        let mut counts = vec![0usize; n_codes];
        let mut sums = vec![0.0f64; n_codes * dim];
        for (v, &i) in latents.rows().zip(indices) {
            let i = i as usize;
            counts[i] += 1;
            for (s, x) in sums[i * dim..(i + 1) * dim].iter_mut().zip(v) {
                *s += *x as f64;
            }
        }
        for n in 0..n_codes {
            self.ema_cluster_size[n] = g * self.ema_cluster_size[n] + (1.0 - g) * counts[n] as f64;
        }
        for (e, s) in self.ema_sum.iter_mut().zip(&sums) {
            *e = g * *e + (1.0 - g) * s;
        }
        let total: f64 = self.ema_cluster_size.iter().sum();
        let eta = self.smoothing;
        for n in 0..n_codes {
            if counts[n] == 0 {
                self.staleness[n] = self.staleness[n].saturating_add(1);
                continue;
            }
            self.usage[n] = self.usage[n].saturating_add(1);
            self.staleness[n] = 0;
            let size = (self.ema_cluster_size[n] + eta) / (total + n_codes as f64 * eta) * total;
            for d in 0..dim {
                self.entries[n * dim + d] = (self.ema_sum[n * dim + d] / size) as f32;
            }
        }
        Ok(())
    }

    /// Overwrites every code idle for at least `threshold` batches with a
    /// latent drawn from `latents` (distinct rows while the batch has
    /// enough of them). Returns how many codes were replaced.
    pub fn reactivate_dead_codes(
        &mut self,
        latents: &LatentBatch,
        threshold: u32,
        rng: &mut impl Rng,
    ) -> Result<usize> {
        self.check_dim(latents)?;
        let dead: Vec<usize> = (0..self.len()).filter(|&n| self.staleness[n] >= threshold).collect();
        if dead.is_empty() {
            return Ok(0);
        }
        let b = latents.len();
        let picks: Vec<usize> = if dead.len() <= b {
            index::sample(rng, b, dead.len()).into_vec()
        } else {
            (0..dead.len()).map(|_| rng.random_range(0..b)).collect()
        };
        let dim = self.dim;
        for (&n, &row) in dead.iter().zip(&picks) {
            let v = latents.row(row);
            self.entries[n * dim..(n + 1) * dim].copy_from_slice(v);
            for (s, x) in self.ema_sum[n * dim..(n + 1) * dim].iter_mut().zip(v) {
                *s = *x as f64;
            }
            self.ema_cluster_size[n] = 1.0;
            self.usage[n] = 0;
            self.staleness[n] = 0;
        }
        Ok(dead.len())
    }
}

/// k-means++ seeding followed by up to `iters` Lloyd iterations. The EMA
/// state starts from the final assignment counts and sums.
pub fn kmeans_init(latents: &LatentBatch, n_codes: usize, iters: usize, seed: u64) -> Result<Codebook> {
    if n_codes == 0 {
        return Err(Error::InvalidArgument("codebook needs at least one entry".into()));
    }
    if iters == 0 {
        return Err(Error::InvalidArgument("k-means needs at least one iteration".into()));
    }
    let b = latents.len();
    if b < n_codes {
        return Err(Error::NotEnoughLatents { have: b, want: n_codes });
    }
    let dim = latents.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centers: Vec<f32> = Vec::with_capacity(n_codes * dim);
    centers.extend_from_slice(latents.row(rng.random_range(0..b)));
    let mut d2: Vec<f64> = latents.rows().map(|v| sq_dist(v, &centers[..dim])).collect();
    while centers.len() < n_codes * dim {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = b - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            // never pick a point that already is a center
            if d2[chosen] == 0.0 {
                d2.iter().rposition(|&d| d > 0.0).unwrap_or(chosen)
            } else {
                chosen
            }
        } else {
            rng.random_range(0..b)
        };
        let start = centers.len();
        centers.extend_from_slice(latents.row(pick));
        for (d, v) in d2.iter_mut().zip(latents.rows()) {
            *d = d.min(sq_dist(v, &centers[start..]));
        }
    }

    let mut cb = Codebook::from_entries(dim, centers)?;
    let mut assignment = vec![u32::MAX; b];
    for _ in 0..iters {
        let q = cb.quantize(latents)?;
        let converged = q.indices == assignment;
        assignment = q.indices;
        if converged {
            break;
        }
        let (counts, sums) = cluster_sums(latents, &assignment, n_codes);
        for n in 0..n_codes {
            if counts[n] > 0 {
                for d in 0..dim {
                    cb.entries[n * dim + d] = (sums[n * dim + d] / counts[n] as f64) as f32;
                }
            }
        }
    }
    let final_assignment = cb.quantize(latents)?.indices;
    let (counts, sums) = cluster_sums(latents, &final_assignment, n_codes);
    cb.ema_cluster_size = counts.iter().map(|&c| c as f64).collect();
    cb.ema_sum = sums;
    Ok(cb)
}

fn cluster_sums(latents: &LatentBatch, indices: &[u32], n_codes: usize) -> (Vec<usize>, Vec<f64>) {
    let dim = latents.dim();
    let mut counts = vec![0usize; n_codes];
    let mut sums = vec![0.0; n_codes * dim];
    for (v, &i) in latents.rows().zip(indices) {
        let i = i as usize;
        counts[i] += 1;
        for (s, x) in sums[i * dim..(i + 1) * dim].iter_mut().zip(v) {
            *s += *x as f64;
        }
    }
    (counts, sums)
}

/// Perplexity and fraction of codes used by an assignment.
pub fn codebook_stats(n_codes: usize, indices: &[u32]) -> Result<CodebookStats> {
    if n_codes == 0 {
        return Err(Error::InvalidArgument("codebook size must be >= 1".into()));
    }
    if indices.is_empty() {
        return Err(Error::Empty("index stream"));
    }
    let mut counts = vec![0usize; n_codes];
    for &i in indices {
        let i = i as usize;
        if i >= n_codes {
            return Err(Error::IndexOutOfRange {
                index: i,
                size: n_codes,
            });
        }
        counts[i] += 1;
    }
    let total = indices.len() as f64;
    let entropy: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum();
    Ok(CodebookStats {
        perplexity: entropy.exp(),
        usage_fraction: counts.iter().filter(|&&c| c > 0).count() as f64 / n_codes as f64,
    })
}
