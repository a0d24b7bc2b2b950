//! The `foa` command-line tool.
//!
//! Exit codes: 0 success, 1 failed check (gradcheck), 2 usage or input
//! error. Angles are degrees on the command line and in every output.

use std::collections::HashMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dirac::{self, norm3};
use crate::error::{Error, Result};
use crate::eval_metrics::{self, Aggregate, EvalConfig, FileReport, PairPaths};
use crate::foa_signal::{read_mono_wav, read_wav, write_wav, Direction, SceneManifest, TruthFile, WavEncoding};
use crate::io_util::write_atomic;
use crate::scene_gen::generate_scene;
use crate::spatial_consistency::gradcheck::{self, GradCheckConfig};
use crate::spatial_consistency::{sc_loss, write_breakdown_summary, ScConfig};
use crate::tf_transform::{FoaSpectrum, StftParams};
use crate::vector_quantizer::{self as vq, Codebook, LatentBatch, DEFAULT_STALENESS, MAX_TOKEN_CODES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "foa",
    version,
    about = "First-order ambisonics analysis, losses, quantization and metrics"
)]
pub struct Cli {
    /// JSON file with default settings; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Seed for every randomized step (default 0, or the manifest seed for
    /// `spatialize`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a scene manifest to a 4-channel WAV plus a truth sidecar.
    Spatialize(SpatializeArgs),
    /// Write DirAC energy/diffuseness summary and averaged intensity map.
    Analyze(AnalyzeArgs),
    /// Print the spatial consistency loss between two FOA files.
    Scloss(SclossArgs),
    /// Check the analytic loss gradient against finite differences.
    Gradcheck(GradcheckArgs),
    /// Vector quantizer tools.
    #[command(subcommand)]
    Vq(VqCommand),
    /// Compute reconstruction metrics over file pairs.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EncodingArg {
    F32,
    Pcm16,
}

impl From<EncodingArg> for WavEncoding {
    fn from(e: EncodingArg) -> Self {
        match e {
            EncodingArg::F32 => WavEncoding::Float32,
            EncodingArg::Pcm16 => WavEncoding::Pcm16,
        }
    }
}

#[derive(Debug, Args)]
pub struct SpatializeArgs {
    /// Scene manifest JSON.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory holding the mono WAV named by each source's `file`.
    #[arg(long)]
    pub audio_dir: PathBuf,
    /// Output WAV; the truth sidecar is written next to it as
    /// `<stem>.truth.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Sample format of the output WAV.
    #[arg(long, value_enum, default_value = "f32")]
    pub encoding: EncodingArg,
}

#[derive(Debug, Args, Default)]
pub struct StftFlags {
    /// STFT size in samples [default: 1024].
    #[arg(long)]
    pub fft_size: Option<usize>,
    /// Hop in samples [default: 256].
    #[arg(long)]
    pub hop: Option<usize>,
    /// Hann window length [default: fft size].
    #[arg(long)]
    pub win_length: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct ScFlags {
    /// Energy threshold tau_E (bins need E > tau_E).
    #[arg(long)]
    pub energy_threshold: Option<f64>,
    /// Diffuseness threshold tau_D (bins need D < tau_D).
    #[arg(long)]
    pub diffuseness_threshold: Option<f64>,
    /// Cosine-similarity denominator offset.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Odd diffuseness averaging window in frames.
    #[arg(long)]
    pub window: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// 4-channel FOA WAV (ACN/SN3D).
    #[arg(long)]
    pub input: PathBuf,
    /// Averaged intensity magnitude, one row per frame.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-frame energy/diffuseness summary [default: `<out stem>.summary.csv`].
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[command(flatten)]
    pub stft: StftFlags,
    #[command(flatten)]
    pub sc: ScFlags,
}

#[derive(Debug, Args)]
pub struct SclossArgs {
    /// Reference FOA WAV; the mask and weights come from it.
    #[arg(long)]
    pub input: PathBuf,
    /// Reconstructed FOA WAV of the same length.
    #[arg(long)]
    pub recon: PathBuf,
    /// Directory for s.csv, m.csv, w.csv, contribution.csv and summary.csv.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    #[command(flatten)]
    pub stft: StftFlags,
    #[command(flatten)]
    pub sc: ScFlags,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Random spectra to check [default: 100].
    #[arg(long)]
    pub cases: Option<usize>,
    /// Frames per spectrum [default: 8].
    #[arg(long)]
    pub frames: Option<usize>,
    /// Bins per frame [default: 9].
    #[arg(long)]
    pub bins: Option<usize>,
    /// Negate the analytic gradient; the check must then fail.
    #[arg(long)]
    pub inject_sign_flip: bool,
    #[command(flatten)]
    pub sc: ScFlags,
}

#[derive(Debug, Subcommand)]
pub enum VqCommand {
    /// k-means a codebook from a latent file.
    Train(VqTrainArgs),
    /// Quantize latents to a u16 token stream.
    Encode(VqEncodeArgs),
    /// Look tokens up in a codebook and write the latents.
    Decode(VqDecodeArgs),
    /// Print perplexity and usage of an assignment.
    Stats(VqStatsArgs),
}

#[derive(Debug, Args)]
pub struct VqTrainArgs {
    /// Latent batch file.
    #[arg(long)]
    pub latents: PathBuf,
    /// Codebook file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of codes N [default: 4096].
    #[arg(long)]
    pub codes: Option<usize>,
    /// Expected latent dimension; checked against the file.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Lloyd iterations after k-means++ seeding [default: 20].
    #[arg(long)]
    pub iters: Option<usize>,
    /// EMA passes over the data after k-means, with dead-code reactivation.
    #[arg(long, default_value_t = 0)]
    pub ema_epochs: usize,
    /// Latents per EMA batch.
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
}

#[derive(Debug, Args)]
pub struct VqEncodeArgs {
    /// Codebook file.
    #[arg(long)]
    pub codebook: PathBuf,
    /// Latent batch file.
    #[arg(long)]
    pub latents: PathBuf,
    /// Token file (little-endian u16 per latent).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VqDecodeArgs {
    /// Codebook file.
    #[arg(long)]
    pub codebook: PathBuf,
    /// Token file.
    #[arg(long)]
    pub tokens: PathBuf,
    /// Latent batch file with the looked-up entries.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VqStatsArgs {
    /// Codebook file.
    #[arg(long)]
    pub codebook: PathBuf,
    /// Token stream to summarize.
    #[arg(long, conflicts_with = "latents", required_unless_present = "latents")]
    pub tokens: Option<PathBuf>,
    /// Latents to quantize and summarize.
    #[arg(long)]
    pub latents: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// CSV with header `input,recon[,truth]`; relative paths resolve
    /// against the CSV's directory.
    #[arg(long, conflicts_with_all = ["input_dir", "recon_dir"])]
    pub pairs: Option<PathBuf>,
    /// Directory of input WAVs, paired with recon files by name.
    #[arg(long, requires = "recon_dir")]
    pub input_dir: Option<PathBuf>,
    /// Directory of reconstructed WAVs.
    #[arg(long, requires = "input_dir")]
    pub recon_dir: Option<PathBuf>,
    /// Where `<stem>.truth.json` sidecars live [default: the input dir].
    #[arg(long)]
    pub truth_dir: Option<PathBuf>,
    /// Aggregate (and per-file) report as JSON.
    #[arg(long)]
    pub out_json: PathBuf,
    /// One CSV row per pair.
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[command(flatten)]
    pub sc: ScFlags,
}

/// Defaults loadable with `--config`. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub seed: Option<u64>,
    pub stft: Option<StftConfig>,
    pub sc: Option<ScOverrides>,
    pub vq: Option<VqConfig>,
    pub gradcheck: Option<GradcheckConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftConfig {
    pub fft_size: Option<usize>,
    pub hop: Option<usize>,
    pub win_length: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScOverrides {
    pub energy_threshold: Option<f64>,
    pub diffuseness_threshold: Option<f64>,
    pub epsilon: Option<f64>,
    pub window: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VqConfig {
    pub codes: Option<usize>,
    pub iters: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckConfig {
    pub cases: Option<usize>,
    pub frames: Option<usize>,
    pub bins: Option<usize>,
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    fn stft(&self, flags: &StftFlags) -> Result<StftParams> {
        let base = StftParams::dirac_default();
        let file = self.stft.clone().unwrap_or_default();
        let fft = flags.fft_size.or(file.fft_size).unwrap_or(base.fft_size());
        // a changed FFT size drags the defaults for window and hop along
        let win = flags.win_length.or(file.win_length).unwrap_or(fft);
        let hop = flags.hop.or(file.hop).unwrap_or(win / 4);
        StftParams::new(fft, hop, win, true)
    }

    fn sc(&self, flags: &ScFlags) -> Result<ScConfig> {
        let base = ScConfig::default();
        let file = self.sc.clone().unwrap_or_default();
        let cfg = ScConfig {
            energy_threshold: flags
                .energy_threshold
                .or(file.energy_threshold)
                .unwrap_or(base.energy_threshold),
            diffuseness_threshold: flags
                .diffuseness_threshold
                .or(file.diffuseness_threshold)
                .unwrap_or(base.diffuseness_threshold),
            epsilon: flags.epsilon.or(file.epsilon).unwrap_or(base.epsilon),
            window: flags.window.or(file.window).unwrap_or(base.window),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Formats with six significant digits; zero prints as `0.000000`.
pub fn six_significant(x: f64) -> String {
    if x == 0.0 {
        return "0.000000".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        format!("{:.*}", (5 - mag) as usize, x)
    } else {
        format!("{x:.5e}")
    }
}

struct Ctx<'a> {
    config: CliConfig,
    seed: Option<u64>,
    out: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn seed(&self) -> u64 {
        self.seed.or(self.config.seed).unwrap_or(0)
    }

    fn line(&mut self, text: impl AsRef<str>) -> Result<()> {
        writeln!(self.out, "{}", text.as_ref())?;
        Ok(())
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code. Normal output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    let config = match &cli.config {
        Some(p) => CliConfig::load(p)?,
        None => CliConfig::default(),
    };
    let mut ctx = Ctx {
        config,
        seed: cli.seed,
        out,
    };
    match cli.command {
        Command::Spatialize(a) => spatialize(&mut ctx, a),
        Command::Analyze(a) => analyze(&mut ctx, a),
        Command::Scloss(a) => scloss(&mut ctx, a),
        Command::Gradcheck(a) => run_gradcheck(&mut ctx, a),
        Command::Vq(c) => run_vq(&mut ctx, c),
        Command::Evaluate(a) => evaluate(&mut ctx, a),
    }
}

/// `<dir>/<stem>.truth.json` next to a WAV path.
pub fn truth_path(wav: &Path) -> PathBuf {
    let stem = wav
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    wav.with_file_name(format!("{stem}.truth.json"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

fn spatialize(ctx: &mut Ctx, a: SpatializeArgs) -> Result<i32> {
    let mut manifest = SceneManifest::load(&a.manifest)?;
    if let Some(seed) = ctx.seed.or(ctx.config.seed) {
        manifest.seed = seed;
    }
    manifest.validate()?;
    let mut audio = HashMap::new();
    for s in &manifest.sources {
        if audio.contains_key(&s.file) {
            continue;
        }
        let path = a.audio_dir.join(&s.file);
        if !path.is_file() {
            return Err(Error::MissingAudio(s.file.clone()));
        }
        let (rate, samples) = read_mono_wav(&path)?;
        if rate != manifest.sample_rate {
            return Err(Error::SampleRateMismatch(manifest.sample_rate, rate));
        }
        audio.insert(s.file.clone(), samples);
    }
    let (scene, dirs) = generate_scene(&manifest, &audio)?;
    write_wav(&a.out, &scene, a.encoding.into())?;
    let truth = truth_path(&a.out);
    write_json(
        &truth,
        &TruthFile::from_directions(&dirs, manifest.diffuse_level, manifest.seed),
    )?;
    ctx.line(format!("seed: {}", manifest.seed))?;
    ctx.line(format!(
        "wrote {} ({} samples, 4 channels)",
        a.out.display(),
        scene.len()
    ))?;
    ctx.line(format!("wrote {}", truth.display()))?;
    Ok(EXIT_OK)
}

fn analyze(ctx: &mut Ctx, a: AnalyzeArgs) -> Result<i32> {
    let params = ctx.config.stft(&a.stft)?;
    let sc = ctx.config.sc(&a.sc)?;
    let signal = read_wav(&a.input)?;
    let field = dirac::analyze(&FoaSpectrum::analyze(&signal, &params), sc.window)?;
    write_atomic(&a.out, |w| field.write_intensity_csv(w))?;
    let summary = a.summary.unwrap_or_else(|| {
        let stem = a
            .out
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        a.out.with_file_name(format!("{stem}.summary.csv"))
    });
    write_atomic(&summary, |w| {
        writeln!(w, "frame,energy,diffuseness")?;
        let (frames, bins) = field.shape();
        for t in 0..frames {
            let e: f64 = field.energy.row(t).iter().sum();
            let d: f64 = field.diffuseness.row(t).iter().sum::<f64>() / bins as f64;
            writeln!(w, "{t},{e},{d}")?;
        }
        Ok(())
    })?;
    let v = field.dominant_vector();
    ctx.line(format!("seed: {}", ctx.seed()))?;
    ctx.line(format!("frames: {} bins: {}", field.shape().0, field.shape().1))?;
    match Direction::from_vector(v) {
        Ok(d) => {
            let n = norm3(&v);
            ctx.line(format!(
                "dominant_direction: {:.6} {:.6} {:.6}",
                v[0] / n,
                v[1] / n,
                v[2] / n
            ))?;
            ctx.line(format!("dominant_azimuth_deg: {:.3}", d.azimuth_deg()))?;
            ctx.line(format!("dominant_elevation_deg: {:.3}", d.elevation_deg()))?;
        }
        Err(_) => ctx.line("dominant_direction: none")?,
    }
    ctx.line(format!("wrote {}", a.out.display()))?;
    ctx.line(format!("wrote {}", summary.display()))?;
    Ok(EXIT_OK)
}

fn scloss(ctx: &mut Ctx, a: SclossArgs) -> Result<i32> {
    let params = ctx.config.stft(&a.stft)?;
    let sc = ctx.config.sc(&a.sc)?;
    let (input, recon) = (read_wav(&a.input)?, read_wav(&a.recon)?);
    if input.sample_rate() != recon.sample_rate() {
        return Err(Error::SampleRateMismatch(input.sample_rate(), recon.sample_rate()));
    }
    let b = sc_loss(
        &FoaSpectrum::analyze(&input, &params),
        &FoaSpectrum::analyze(&recon, &params),
        &sc,
    )?;
    if let Some(dir) = &a.dump {
        std::fs::create_dir_all(dir)?;
        b.dump_csv(dir)?;
        write_atomic(&dir.join("summary.csv"), |w| write_breakdown_summary(&b, w))?;
    }
    ctx.line(format!("seed: {}", ctx.seed()))?;
    ctx.line(format!("loss: {}", six_significant(b.loss)))?;
    ctx.line(format!("loss_full: {:?}", b.loss))?;
    ctx.line(format!(
        "masked_bins: {} / {}",
        b.mask.iter().filter(|&&m| m).count(),
        b.mask.as_slice().len()
    ))?;
    Ok(EXIT_OK)
}

fn run_gradcheck(ctx: &mut Ctx, a: GradcheckArgs) -> Result<i32> {
    let file = ctx.config.gradcheck.clone().unwrap_or_default();
    let base = GradCheckConfig::default();
    let cfg = GradCheckConfig {
        cases: a.cases.or(file.cases).unwrap_or(base.cases),
        frames: a.frames.or(file.frames).unwrap_or(base.frames),
        bins: a.bins.or(file.bins).unwrap_or(base.bins),
        seed: ctx.seed(),
        sc: ctx.config.sc(&a.sc)?,
        inject_sign_flip: a.inject_sign_flip,
        ..base
    };
    let r = gradcheck::run(&cfg)?;
    ctx.line(format!("seed: {}", cfg.seed))?;
    ctx.line(format!("cases: {} entries: {}", r.cases, r.entries_checked))?;
    ctx.line(format!(
        "max_relative_error: {:e} (case {})",
        r.max_relative_error, r.worst_case
    ))?;
    ctx.line(format!("tolerance: {:e}", gradcheck::TOLERANCE))?;
    if r.passed() {
        ctx.line("result: pass")?;
        Ok(EXIT_OK)
    } else {
        ctx.line("result: FAIL")?;
        Ok(EXIT_CHECK_FAILED)
    }
}

fn run_vq(ctx: &mut Ctx, cmd: VqCommand) -> Result<i32> {
    let seed = ctx.seed();
    ctx.line(format!("seed: {seed}"))?;
    match cmd {
        VqCommand::Train(a) => {
            let file = ctx.config.vq.clone().unwrap_or_default();
            let codes = a.codes.or(file.codes).unwrap_or(vq::DEFAULT_CODES);
            let iters = a.iters.or(file.iters).unwrap_or(20);
            if codes > MAX_TOKEN_CODES {
                return Err(Error::InvalidArgument(format!(
                    "{codes} codes exceed the {MAX_TOKEN_CODES} addressable by 16-bit tokens"
                )));
            }
            let latents = LatentBatch::load(&a.latents)?;
            if let Some(d) = a.dim.filter(|&d| d != latents.dim()) {
                return Err(Error::DimensionMismatch {
                    codebook: d,
                    latents: latents.dim(),
                });
            }
            let mut cb = vq::kmeans_init(&latents, codes, iters, seed)?;
            if a.ema_epochs > 0 {
                if a.batch_size == 0 {
                    return Err(Error::InvalidArgument("batch size must be >= 1".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let rate = latents.frame_rate();
                for _ in 0..a.ema_epochs {
                    for chunk in latents.as_slice().chunks(a.batch_size * latents.dim()) {
                        let batch = LatentBatch::with_frame_rate(latents.dim(), chunk.to_vec(), rate)?;
                        let q = cb.quantize(&batch)?;
                        cb.ema_update(&batch, &q.indices)?;
                        cb.reactivate_dead_codes(&batch, DEFAULT_STALENESS, &mut rng)?;
                    }
                }
            }
            cb.save(&a.out)?;
            let q = cb.quantize(&latents)?;
            let stats = vq::codebook_stats(cb.len(), &q.indices)?;
            ctx.line(format!("codes: {} dim: {}", cb.len(), cb.dim()))?;
            ctx.line(format!("commitment_loss: {:e}", q.commitment_loss))?;
            ctx.line(format!("perplexity: {:.6}", stats.perplexity))?;
            ctx.line(format!("usage_fraction: {:.6}", stats.usage_fraction))?;
            ctx.line(format!("wrote {}", a.out.display()))?;
        }
        VqCommand::Encode(a) => {
            let cb = Codebook::load(&a.codebook)?;
            let latents = LatentBatch::load(&a.latents)?;
            let q = cb.quantize(&latents)?;
            vq::write_tokens(&a.out, &q.indices)?;
            ctx.line(format!("tokens: {}", q.indices.len()))?;
            ctx.line(format!("commitment_loss: {:e}", q.commitment_loss))?;
            ctx.line(format!("wrote {}", a.out.display()))?;
        }
        VqCommand::Decode(a) => {
            let cb = Codebook::load(&a.codebook)?;
            let tokens = vq::read_tokens(&a.tokens)?;
            let latents = cb.decode(&tokens)?;
            latents.save(&a.out)?;
            ctx.line(format!("vectors: {} dim: {}", latents.len(), latents.dim()))?;
            ctx.line(format!("wrote {}", a.out.display()))?;
        }
        VqCommand::Stats(a) => {
            let cb = Codebook::load(&a.codebook)?;
            let indices = match (&a.tokens, &a.latents) {
                (Some(t), _) => vq::read_tokens(t)?,
                (None, Some(l)) => cb.quantize(&LatentBatch::load(l)?)?.indices,
                (None, None) => unreachable!("clap requires one of --tokens/--latents"),
            };
            let stats = vq::codebook_stats(cb.len(), &indices)?;
            ctx.line(format!("codes: {} assignments: {}", cb.len(), indices.len()))?;
            ctx.line(format!("perplexity: {:.6}", stats.perplexity))?;
            ctx.line(format!("usage_fraction: {:.6}", stats.usage_fraction))?;
        }
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Deserialize)]
struct PairRow {
    input: PathBuf,
    recon: PathBuf,
    #[serde(default)]
    truth: Option<PathBuf>,
}

/// Reads a pairs CSV; relative paths resolve against its directory.
pub fn read_pairs_csv(path: &Path) -> Result<Vec<PairPaths>> {
    let base = path.parent().unwrap_or(Path::new(""));
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut pairs = Vec::new();
    for row in reader.deserialize::<PairRow>() {
        let row = row.map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        let name = row
            .input
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        pairs.push(PairPaths {
            name,
            input: base.join(row.input),
            recon: base.join(row.recon),
            truth: row.truth.filter(|t| !t.as_os_str().is_empty()).map(|t| base.join(t)),
        });
    }
    Ok(pairs)
}

/// JSON written by `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationOutput {
    pub seed: u64,
    pub aggregate: Aggregate,
    pub files: Vec<FileReport>,
}

fn evaluate(ctx: &mut Ctx, a: EvaluateArgs) -> Result<i32> {
    let pairs = match (&a.pairs, &a.input_dir, &a.recon_dir) {
        (Some(p), _, _) => read_pairs_csv(p)?,
        (None, Some(i), Some(r)) => eval_metrics::pairs_from_dirs(i, r, a.truth_dir.as_deref())?,
        _ => {
            return Err(Error::InvalidArgument(
                "give --pairs or both --input-dir and --recon-dir".into(),
            ))
        }
    };
    if pairs.is_empty() {
        return Err(Error::Empty("pair list"));
    }
    let cfg = EvalConfig {
        sc: ctx.config.sc(&a.sc)?,
        ..EvalConfig::default()
    };
    let files = eval_metrics::evaluate_files(&pairs, &cfg)?;
    let output = EvaluationOutput {
        seed: ctx.seed(),
        aggregate: eval_metrics::aggregate(&files)?,
        files,
    };
    write_json(&a.out_json, &output)?;
    if let Some(csv_path) = &a.out_csv {
        write_atomic(csv_path, |w| eval_metrics::write_reports_csv(&output.files, w))?;
    }
    let agg = &output.aggregate;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into());
    ctx.line(format!("seed: {}", output.seed))?;
    ctx.line(format!("files: {} (spatial: {})", agg.files, agg.spatial_files))?;
    ctx.line(format!("azimuth_error_deg: {}", opt(agg.azimuth_error_deg)))?;
    ctx.line(format!("elevation_error_deg: {}", opt(agg.elevation_error_deg)))?;
    ctx.line(format!("angular_error_deg: {}", opt(agg.angular_error_deg)))?;
    ctx.line(format!("stft_distance: {:.6}", agg.stft_distance))?;
    ctx.line(format!("mel_distance: {:.6}", agg.mel_distance))?;
    ctx.line(format!("wrote {}", a.out_json.display()))?;
    Ok(EXIT_OK)
}
