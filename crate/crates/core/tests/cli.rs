//! Runs the `foa` binary end to end on small fixtures.

use std::path::{Path, PathBuf};
use std::process::Command;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::Value;

use foa_spatial::eval_metrics::{evaluate_pair, EvalConfig};
use foa_spatial::foa_signal::{
    encode_source, read_wav, write_mono_wav, write_wav, Direction, FoaSignal, TruthFile, WavEncoding,
};
use foa_spatial::spatial_consistency::{sc_loss, ScConfig};
use foa_spatial::tf_transform::{FoaSpectrum, StftParams};
use foa_spatial::vector_quantizer::{read_tokens, Codebook, LatentBatch};

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn foa<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_foa")).args(args).output().unwrap();
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// The value after `key: ` on the first matching stdout line.
fn field<'a>(stdout: &'a str, key: &str) -> &'a str {
    let prefix = format!("{key}: ");
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(prefix.as_str()))
        .unwrap_or_else(|| panic!("no {key:?} in output:\n{stdout}"))
}

fn noise(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            0.2 * v
        })
        .collect()
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(name);
    let s: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&s).unwrap()
}

fn assert_valid(validator: &jsonschema::Validator, doc: &Value) {
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}\n{doc:#}");
}

fn load_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn write_scene(path: &Path, az: f64, el: f64, seed: u64) -> FoaSignal {
    let s = encode_source(&noise(12_000, seed), Direction::from_degrees(az, el).unwrap(), 24_000).unwrap();
    write_wav(path, &s, WavEncoding::Float32).unwrap();
    read_wav(path).unwrap()
}

struct SpatializeFixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    manifest: PathBuf,
}

fn spatialize_fixture(manifest: &str) -> SpatializeFixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    std::fs::create_dir_all(root.join("audio")).unwrap();
    write_mono_wav(
        root.join("audio/voice.wav"),
        24_000,
        &noise(9_000, 1),
        WavEncoding::Pcm16,
    )
    .unwrap();
    write_mono_wav(
        root.join("audio/drum.wav"),
        24_000,
        &noise(6_000, 2),
        WavEncoding::Float32,
    )
    .unwrap();
    let m = root.join("scene.json");
    std::fs::write(&m, manifest).unwrap();
    SpatializeFixture {
        _dir: dir,
        root,
        manifest: m,
    }
}

const TWO_SOURCES: &str = r#"{
  "sources": [
    {"azimuth_deg": 30, "elevation_deg": 10, "gain": 1.0, "file": "voice.wav"},
    {"azimuth_deg": -120, "elevation_deg": 0, "gain": 0.5, "file": "drum.wav"}
  ],
  "diffuse_level": 0.05,
  "seed": 11
}"#;

fn spatialize(fx: &SpatializeFixture, out: &Path, extra: &[&str]) -> Run {
    let mut args = vec!["spatialize", "--manifest", p(&fx.manifest), "--out", p(out)];
    let audio = fx.root.join("audio");
    args.extend(["--audio-dir", p(&audio)]);
    args.extend(extra);
    foa(&args)
}

#[test]
fn spatialize_writes_scene_and_truth() {
    let fx = spatialize_fixture(TWO_SOURCES);
    assert_valid(&schema("manifest.schema.json"), &load_json(&fx.manifest));
    let out = fx.root.join("out/scene.wav");
    let r = spatialize(&fx, &out, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(field(&r.stdout, "seed"), "11");

    let s = read_wav(&out).unwrap();
    assert_eq!(s.len(), 9_000);
    assert_eq!(s.sample_rate(), 24_000);
    let truth_json = load_json(&fx.root.join("out/scene.truth.json"));
    assert_valid(&schema("truth.schema.json"), &truth_json);
    let truth = TruthFile::from_json(&truth_json.to_string()).unwrap();
    assert_eq!(truth.seed, 11);
    assert_eq!(truth.sources.len(), 2);
    assert!((truth.sources[0].azimuth_deg - 30.0).abs() < 1e-9);
    assert!((truth.sources[1].azimuth_deg + 120.0).abs() < 1e-9);
    assert_eq!(truth.diffuse_level, 0.05);
}

#[test]
fn spatialize_is_deterministic_and_seed_overridable() {
    let fx = spatialize_fixture(TWO_SOURCES);
    let (a, b, c) = (fx.root.join("a.wav"), fx.root.join("b.wav"), fx.root.join("c.wav"));
    assert_eq!(spatialize(&fx, &a, &[]).code, 0);
    assert_eq!(spatialize(&fx, &b, &[]).code, 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(
        std::fs::read(fx.root.join("a.truth.json")).unwrap(),
        std::fs::read(fx.root.join("b.truth.json")).unwrap()
    );

    let r = spatialize(&fx, &c, &["--seed", "12"]);
    assert_eq!(r.code, 0);
    assert_eq!(field(&r.stdout, "seed"), "12");
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
    assert_eq!(TruthFile::load(fx.root.join("c.truth.json")).unwrap().seed, 12);
}

#[test]
fn spatialize_pcm16_output() {
    let fx = spatialize_fixture(TWO_SOURCES);
    let out = fx.root.join("pcm.wav");
    assert_eq!(spatialize(&fx, &out, &["--encoding", "pcm16"]).code, 0);
    let spec = hound::WavReader::open(&out).unwrap().spec();
    assert_eq!((spec.channels, spec.bits_per_sample), (4, 16));
}

#[test]
fn spatialize_missing_audio_names_the_source() {
    let fx = spatialize_fixture(
        r#"{"sources":[{"azimuth_deg":0,"elevation_deg":0,"gain":1,"file":"nowhere.wav"}],"seed":1}"#,
    );
    let out = fx.root.join("x.wav");
    let r = spatialize(&fx, &out, &[]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("nowhere.wav"), "{}", r.stderr);
    assert!(!out.exists());
}

#[test]
fn spatialize_rejects_too_many_sources() {
    let src = r#"{"azimuth_deg":0,"elevation_deg":0,"gain":1,"file":"voice.wav"}"#;
    let fx = spatialize_fixture(&format!(r#"{{"sources":[{}],"seed":1}}"#, [src; 6].join(",")));
    let r = spatialize(&fx, &fx.root.join("x.wav"), &[]);
    assert_eq!(r.code, 2);
}

fn summary_rows(path: &Path) -> Vec<(f64, f64)> {
    let mut rows = Vec::new();
    let mut reader = csv::Reader::from_path(path).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["frame", "energy", "diffuseness"]);
    for rec in reader.records() {
        let rec = rec.unwrap();
        rows.push((rec[1].parse().unwrap(), rec[2].parse().unwrap()));
    }
    rows
}

#[test]
fn analyze_silence_is_fully_diffuse() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("silence.wav");
    write_wav(&wav, &FoaSignal::silence(24_000, 4_800).unwrap(), WavEncoding::Float32).unwrap();
    let out = dir.path().join("i.csv");
    let r = foa(&["analyze", "--input", p(&wav), "--out", p(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(field(&r.stdout, "dominant_direction"), "none");
    assert_eq!(field(&r.stdout, "seed"), "0");
    let rows = summary_rows(&dir.path().join("i.summary.csv"));
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|&(e, d)| e == 0.0 && d == 1.0), "{rows:?}");
    assert!(out.exists());
}

#[test]
fn analyze_front_source() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("front.wav");
    write_scene(&wav, 0.0, 0.0, 5);
    let out = dir.path().join("i.csv");
    let summary = dir.path().join("frames.csv");
    let r = foa(&[
        "analyze",
        "--input",
        p(&wav),
        "--out",
        p(&out),
        "--summary",
        p(&summary),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(field(&r.stdout, "dominant_direction"), "1.000000 0.000000 0.000000");
    let rows = summary_rows(&summary);
    assert!(rows.iter().filter(|r| r.0 > 1e-6).all(|r| r.1 < 1e-6), "{rows:?}");
}

#[test]
fn analyze_rejects_non_wav() {
    let dir = tempfile::tempdir().unwrap();
    let bogus = dir.path().join("notes.wav");
    std::fs::write(&bogus, b"this is not audio").unwrap();
    let r = foa(&["analyze", "--input", p(&bogus), "--out", p(&dir.path().join("o.csv"))]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.starts_with("error:"), "{}", r.stderr);
}

#[test]
fn scloss_of_identical_files_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("a.wav");
    write_scene(&wav, 40.0, 20.0, 6);
    let r = foa(&["scloss", "--input", p(&wav), "--recon", p(&wav), "--epsilon", "0"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(field(&r.stdout, "loss"), "0.000000");
    assert_eq!(field(&r.stdout, "seed"), "0");
}

#[test]
fn scloss_matches_library_on_mirrored_scene() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.wav"), dir.path().join("b.wav"));
    let input = write_scene(&a, 35.0, 0.0, 7);
    let [w, y, z, x] = input.clone().into_channels();
    let neg = |v: Vec<f64>| v.into_iter().map(|s| -s).collect::<Vec<_>>();
    write_wav(
        &b,
        &FoaSignal::new(24_000, [w, neg(y), z, neg(x)]).unwrap(),
        WavEncoding::Float32,
    )
    .unwrap();
    let recon = read_wav(&b).unwrap();

    let dump = dir.path().join("dump");
    let r = foa(&["scloss", "--input", p(&a), "--recon", p(&b), "--dump", p(&dump)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let params = StftParams::dirac_default();
    let expected = sc_loss(
        &FoaSpectrum::analyze(&input, &params),
        &FoaSpectrum::analyze(&recon, &params),
        &ScConfig::default(),
    )
    .unwrap();
    let got: f64 = field(&r.stdout, "loss_full").parse().unwrap();
    assert_eq!(got, expected.loss);
    assert!(got > 1.0);
    for name in ["s.csv", "m.csv", "w.csv", "contribution.csv", "summary.csv"] {
        assert!(dump.join(name).is_file(), "{name}");
    }
    let summary = std::fs::read_to_string(dump.join("summary.csv")).unwrap();
    assert!(summary.starts_with(&format!("loss,{}", expected.loss)), "{summary}");
}

#[test]
fn scloss_shape_mismatch_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.wav"), dir.path().join("b.wav"));
    write_scene(&a, 0.0, 0.0, 1);
    write_wav(&b, &FoaSignal::silence(24_000, 3_000).unwrap(), WavEncoding::Float32).unwrap();
    let r = foa(&["scloss", "--input", p(&a), "--recon", p(&b)]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.starts_with("error:"));
}

#[test]
fn gradcheck_exit_codes() {
    let ok = foa(&["gradcheck"]);
    assert_eq!(ok.code, 0, "{}", ok.stdout);
    assert_eq!(field(&ok.stdout, "result"), "pass");
    assert_eq!(field(&ok.stdout, "cases"), "100 entries: 57600");

    let flipped = foa(&["gradcheck", "--cases", "3", "--inject-sign-flip"]);
    assert_eq!(flipped.code, 1);
    assert_eq!(field(&flipped.stdout, "result"), "FAIL");

    let tiny = foa(&["gradcheck", "--frames", "2", "--bins", "3", "--seed", "9"]);
    assert_eq!(tiny.code, 0, "{}", tiny.stdout);
    assert_eq!(field(&tiny.stdout, "seed"), "9");

    assert_eq!(foa(&["gradcheck", "--bins", "1"]).code, 2);
}

fn four_clusters(path: &Path) -> LatentBatch {
    let centers = [[4.0f32, 0.0, 0.0], [-4.0, 0.0, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, -4.0]];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut data = Vec::new();
    for i in 0..400 {
        for c in centers[i % 4] {
            let n: f32 = StandardNormal.sample(&mut rng);
            data.push(c + 0.1 * n);
        }
    }
    let b = LatentBatch::new(3, data).unwrap();
    b.save(path).unwrap();
    b
}

#[test]
fn vq_train_encode_decode_stats() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let latents = d.join("z.bin");
    four_clusters(&latents);
    let cb = d.join("cb.bin");
    let r = foa(&[
        "vq",
        "train",
        "--latents",
        p(&latents),
        "--out",
        p(&cb),
        "--codes",
        "4",
        "--dim",
        "3",
        "--seed",
        "5",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(field(&r.stdout, "seed"), "5");
    let perplexity: f64 = field(&r.stdout, "perplexity").parse().unwrap();
    assert!((perplexity - 4.0).abs() < 1e-3, "{perplexity}");
    assert_eq!(field(&r.stdout, "usage_fraction"), "1.000000");

    let tokens = d.join("t.u16");
    let r = foa(&[
        "vq",
        "encode",
        "--codebook",
        p(&cb),
        "--latents",
        p(&latents),
        "--out",
        p(&tokens),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(std::fs::metadata(&tokens).unwrap().len(), 800);
    let decoded = d.join("zq.bin");
    let r = foa(&[
        "vq",
        "decode",
        "--codebook",
        p(&cb),
        "--tokens",
        p(&tokens),
        "--out",
        p(&decoded),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);

    // decoded rows are exactly the looked-up entries
    let book = Codebook::load(&cb).unwrap();
    let idx = read_tokens(&tokens).unwrap();
    let out = LatentBatch::load(&decoded).unwrap();
    assert_eq!(out.len(), 400);
    for (row, &i) in out.rows().zip(&idx) {
        assert_eq!(row, book.entry(i as usize));
    }
    assert_eq!(out, book.decode(&idx).unwrap());

    for which in ["--tokens", "--latents"] {
        let src = if which == "--tokens" { &tokens } else { &latents };
        let r = foa(&["vq", "stats", "--codebook", p(&cb), which, p(src)]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        let px: f64 = field(&r.stdout, "perplexity").parse().unwrap();
        assert!((px - perplexity).abs() < 1e-6);
    }
}

#[test]
fn vq_train_with_ema_epochs() {
    let dir = tempfile::tempdir().unwrap();
    let latents = dir.path().join("z.bin");
    four_clusters(&latents);
    let cb = dir.path().join("cb.bin");
    let r = foa(&[
        "vq",
        "train",
        "--latents",
        p(&latents),
        "--out",
        p(&cb),
        "--codes",
        "4",
        "--ema-epochs",
        "3",
        "--batch-size",
        "64",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let book = Codebook::load(&cb).unwrap();
    assert!(book.ema_cluster_size().iter().all(|&n| n > 1.0));
}

#[test]
fn vq_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let latents = dir.path().join("z.bin");
    four_clusters(&latents);
    let cb = dir.path().join("cb.bin");
    let r = foa(&[
        "vq",
        "train",
        "--latents",
        p(&latents),
        "--out",
        p(&cb),
        "--codes",
        "65537",
    ]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("65537"), "{}", r.stderr);
    assert!(!cb.exists());
    let r = foa(&[
        "vq",
        "train",
        "--latents",
        p(&latents),
        "--out",
        p(&cb),
        "--codes",
        "4",
        "--dim",
        "8",
    ]);
    assert_eq!(r.code, 2);
    let r = foa(&[
        "vq",
        "train",
        "--latents",
        p(&latents),
        "--out",
        p(&cb),
        "--codes",
        "401",
    ]);
    assert_eq!(r.code, 2);
    std::fs::write(dir.path().join("odd.u16"), [1u8, 2, 3]).unwrap();
    assert_eq!(
        foa(&["vq", "train", "--latents", p(&latents), "--out", p(&cb), "--codes", "2"]).code,
        0
    );
    let r = foa(&[
        "vq",
        "decode",
        "--codebook",
        p(&cb),
        "--tokens",
        p(&dir.path().join("odd.u16")),
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(r.code, 2);
}

struct EvalFixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

/// Three scenes with truth sidecars, and recon copies that are either
/// identical or lightly perturbed.
fn eval_fixture(perturb: bool) -> EvalFixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    for sub in ["in", "rec"] {
        std::fs::create_dir_all(root.join(sub)).unwrap();
    }
    for (i, (az, el)) in [(10.0, 0.0), (-75.0, 20.0), (150.0, -30.0)].into_iter().enumerate() {
        let name = format!("s{i}.wav");
        let input = write_scene(&root.join("in").join(&name), az, el, 20 + i as u64);
        let dir = Direction::from_degrees(az, el).unwrap();
        let truth = TruthFile::from_directions(&[dir], 0.0, i as u64);
        std::fs::write(
            root.join(format!("in/s{i}.truth.json")),
            serde_json::to_string(&truth).unwrap(),
        )
        .unwrap();
        let recon = if perturb {
            let n = noise(input.len(), 70 + i as u64);
            let ch = input
                .channels()
                .clone()
                .map(|c| c.iter().zip(&n).map(|(a, b)| a + 0.05 * b).collect());
            FoaSignal::new(24_000, ch).unwrap()
        } else {
            input
        };
        write_wav(root.join("rec").join(&name), &recon, WavEncoding::Float32).unwrap();
    }
    EvalFixture { _dir: dir, root }
}

#[test]
fn evaluate_identical_pairs() {
    let fx = eval_fixture(false);
    let json = fx.root.join("report.json");
    let csv_out = fx.root.join("report.csv");
    let r = foa(&[
        "evaluate",
        "--input-dir",
        p(&fx.root.join("in")),
        "--recon-dir",
        p(&fx.root.join("rec")),
        "--out-json",
        p(&json),
        "--out-csv",
        p(&csv_out),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let doc = load_json(&json);
    assert_valid(&schema("evaluation.schema.json"), &doc);
    let agg = &doc["aggregate"];
    assert_eq!(agg["files"], 3);
    assert_eq!(agg["spatial_files"], 3);
    assert_eq!(agg["stft_distance"], 0.0);
    assert_eq!(agg["mel_distance"], 0.0);
    assert!(agg["angular_error_deg"].as_f64().unwrap() < 1.0);
    for f in doc["files"].as_array().unwrap() {
        assert_eq!(f["reference"], "truth");
    }
    let rows = csv::Reader::from_path(&csv_out).unwrap().records().count();
    assert_eq!(rows, 3);
}

#[test]
fn evaluate_pairs_csv_matches_library() {
    let fx = eval_fixture(true);
    let list = fx.root.join("pairs.csv");
    let mut lines = vec!["input,recon,truth".to_string()];
    for i in 0..3 {
        // the last row leaves the truth empty, so the input is the reference
        let truth = if i < 2 {
            format!("in/s{i}.truth.json")
        } else {
            String::new()
        };
        lines.push(format!("in/s{i}.wav,rec/s{i}.wav,{truth}"));
    }
    std::fs::write(&list, lines.join("\n")).unwrap();
    let json = fx.root.join("report.json");
    let r = foa(&["evaluate", "--pairs", p(&list), "--out-json", p(&json), "--seed", "4"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(field(&r.stdout, "seed"), "4");
    let doc = load_json(&json);
    assert_valid(&schema("evaluation.schema.json"), &doc);
    assert_eq!(doc["seed"], 4);

    let cfg = EvalConfig::default();
    for (i, f) in doc["files"].as_array().unwrap().iter().enumerate() {
        let input = read_wav(fx.root.join(format!("in/s{i}.wav"))).unwrap();
        let recon = read_wav(fx.root.join(format!("rec/s{i}.wav"))).unwrap();
        let truth = (i < 2).then(|| {
            TruthFile::load(fx.root.join(format!("in/s{i}.truth.json")))
                .unwrap()
                .single_direction()
                .unwrap()
        });
        let expected = evaluate_pair(&input, &recon, truth, &cfg).unwrap();
        assert_eq!(f["name"], format!("s{i}.wav"));
        assert_eq!(f["stft_distance"].as_f64().unwrap(), expected.stft_distance);
        assert_eq!(f["mel_distance"].as_f64().unwrap(), expected.mel_distance);
        assert_eq!(f["angular_error_deg"].as_f64(), expected.angular_error_deg);
        assert_eq!(f["reference"].as_str(), expected.reference.as_deref());
        assert!(expected.stft_distance > 0.0);
    }
    assert_eq!(doc["files"][2]["reference"], "input");
}

#[test]
fn evaluate_empty_pair_list_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let list = dir.path().join("pairs.csv");
    std::fs::write(&list, "input,recon\n").unwrap();
    let json = dir.path().join("r.json");
    let r = foa(&["evaluate", "--pairs", p(&list), "--out-json", p(&json)]);
    assert_eq!(r.code, 2);
    assert!(!json.exists());

    std::fs::create_dir_all(dir.path().join("a")).unwrap();
    std::fs::create_dir_all(dir.path().join("b")).unwrap();
    let r = foa(&[
        "evaluate",
        "--input-dir",
        p(&dir.path().join("a")),
        "--recon-dir",
        p(&dir.path().join("b")),
        "--out-json",
        p(&json),
    ]);
    assert_eq!(r.code, 2);
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let text = r#"{"seed": 42, "gradcheck": {"cases": 2, "frames": 3, "bins": 4}, "sc": {"window": 3}}"#;
    std::fs::write(&cfg, text).unwrap();
    assert_valid(&schema("config.schema.json"), &serde_json::from_str(text).unwrap());

    let r = foa(&["--config", p(&cfg), "gradcheck"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(field(&r.stdout, "seed"), "42");
    assert_eq!(field(&r.stdout, "cases"), "2 entries: 192");

    // flags win over the file
    let r = foa(&["gradcheck", "--config", p(&cfg), "--seed", "1", "--cases", "1"]);
    assert_eq!(field(&r.stdout, "seed"), "1");
    assert_eq!(field(&r.stdout, "cases"), "1 entries: 96");

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"sede": 1}"#).unwrap();
    assert!(!schema("config.schema.json").is_valid(&serde_json::from_str(r#"{"sede": 1}"#).unwrap()));
    assert_eq!(foa(&["--config", p(&bad), "gradcheck"]).code, 2);
}

#[test]
fn usage_and_help() {
    assert_eq!(foa(&["frobnicate"]).code, 2);
    assert_eq!(foa::<&str>(&[]).code, 2);
    let help = foa(&["--help"]);
    assert_eq!(help.code, 0);
    for cmd in ["spatialize", "analyze", "scloss", "gradcheck", "vq", "evaluate"] {
        assert!(help.stdout.contains(cmd), "{cmd}");
    }
}

#[test]
fn every_flag_has_help_text() {
    let subcommands: [&[&str]; 9] = [
        &["spatialize"],
        &["analyze"],
        &["scloss"],
        &["gradcheck"],
        &["evaluate"],
        &["vq", "train"],
        &["vq", "encode"],
        &["vq", "decode"],
        &["vq", "stats"],
    ];
    for cmd in subcommands {
        let mut args = cmd.to_vec();
        args.push("--help");
        let help = foa(&args).stdout;
        let lines: Vec<&str> = help.lines().skip_while(|l| *l != "Options:").skip(1).collect();
        for (i, line) in lines.iter().enumerate() {
            let t = line.trim_start();
            if !t.starts_with('-') {
                continue;
            }
            // either "  --flag <X>   text" on one line, or text on the next
            let inline = t.split("  ").filter(|s| !s.trim().is_empty()).count() > 1;
            let below = lines.get(i + 1).is_some_and(|n| {
                let n_indent = n.len() - n.trim_start().len();
                n_indent > line.len() - t.len() && !n.trim_start().starts_with('-')
            });
            assert!(inline || below, "{cmd:?}: {line:?} has no help text");
        }
    }
}
