//! RIFF/WAV input and output for FOA and mono signals.
//!
//! Supported encodings are 16-bit PCM and 32-bit IEEE float. Samples are
//! held as `f64` in memory; PCM16 maps `i16` to `[-1, 1)` by dividing by
//! 32768.

use std::fs::File;
use std::io::{self, BufReader, Read, Seek, Write};
use std::path::Path;

use hound::{SampleFormat, WavSpec};

use super::FoaSignal;
use crate::error::{Error, Result};

/// On-disk sample encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WavEncoding {
    #[default]
    Float32,
    Pcm16,
}

impl WavEncoding {
    fn spec(self, channels: u16, sample_rate: u32) -> WavSpec {
        match self {
            WavEncoding::Float32 => WavSpec {
                channels,
                sample_rate,
                bits_per_sample: 32,
                sample_format: SampleFormat::Float,
            },
            WavEncoding::Pcm16 => WavSpec {
                channels,
                sample_rate,
                bits_per_sample: 16,
                sample_format: SampleFormat::Int,
            },
        }
    }
}

fn map_hound(err: hound::Error) -> Error {
    match err {
        // hound reports a short read as a custom `Other` error
        hound::Error::IoError(e)
            if e.kind() == io::ErrorKind::UnexpectedEof || e.to_string().contains("enough bytes") =>
        {
            Error::Truncated("WAV data ends early".into())
        }
        hound::Error::IoError(e) => Error::Io(e),
        hound::Error::UnfinishedSample => Error::Truncated("partial sample at end of data".into()),
        hound::Error::FormatError(msg) => Error::MalformedWav(msg.to_string()),
        hound::Error::Unsupported => Error::UnsupportedEncoding("unsupported WAV feature".into()),
        hound::Error::TooWide => Error::UnsupportedEncoding("sample too wide".into()),
        hound::Error::InvalidSampleFormat => Error::UnsupportedEncoding("invalid sample format".into()),
    }
}

fn encoding_of(spec: &WavSpec) -> Result<WavEncoding> {
    match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => Ok(WavEncoding::Pcm16),
        (SampleFormat::Float, 32) => Ok(WavEncoding::Float32),
        (fmt, bits) => Err(Error::UnsupportedEncoding(format!("{fmt:?} {bits}-bit"))),
    }
}

/// Reads interleaved samples and splits them into `n` channels.
fn read_channels<R: Read>(reader: R, want: u16) -> Result<(u32, Vec<Vec<f64>>)> {
    let mut wav = hound::WavReader::new(reader).map_err(map_hound)?;
    let spec = wav.spec();
    if spec.channels != want {
        return Err(Error::ChannelCount(spec.channels));
    }
    if spec.sample_rate == 0 {
        return Err(Error::MalformedWav("sample rate is zero".into()));
    }
    let encoding = encoding_of(&spec)?;
    let n = want as usize;
    let mut channels = vec![Vec::new(); n];
    let mut push = |i: usize, v: f64| -> Result<()> {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "WAV data",
                index: i,
            });
        }
        channels[i % n].push(v);
        Ok(())
    };
    match encoding {
        WavEncoding::Pcm16 => {
            for (i, s) in wav.samples::<i16>().enumerate() {
                push(i, s.map_err(map_hound)? as f64 / 32768.0)?;
            }
        }
        WavEncoding::Float32 => {
            for (i, s) in wav.samples::<f32>().enumerate() {
                push(i, s.map_err(map_hound)? as f64)?;
            }
        }
    }
    if channels[0].len() != channels[n - 1].len() {
        return Err(Error::Truncated("incomplete final frame".into()));
    }
    if channels[0].is_empty() {
        return Err(Error::Empty("WAV data chunk"));
    }
    Ok((spec.sample_rate, channels))
}

/// Parses a 4-channel WAV stream in ACN order.
pub fn read_wav_from<R: Read>(reader: R) -> Result<FoaSignal> {
    let (rate, channels) = read_channels(reader, 4)?;
    let channels: [Vec<f64>; 4] = channels.try_into().map_err(|_| Error::ChannelCount(0))?;
    FoaSignal::new(rate, channels)
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<FoaSignal> {
    read_wav_from(BufReader::new(File::open(path)?))
}

/// Reads a single-channel WAV file, returning `(sample_rate, samples)`.
pub fn read_mono_wav(path: impl AsRef<Path>) -> Result<(u32, Vec<f64>)> {
    let (rate, mut channels) = read_channels(BufReader::new(File::open(path)?), 1)?;
    Ok((rate, channels.pop().unwrap_or_default()))
}

fn pcm16(v: f64) -> i16 {
    (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

fn write_interleaved<W: Write + Seek>(
    out: W,
    sample_rate: u32,
    channels: &[&[f64]],
    encoding: WavEncoding,
) -> Result<()> {
    let spec = encoding.spec(channels.len() as u16, sample_rate);
    let mut writer = hound::WavWriter::new(out, spec).map_err(map_hound)?;
    let len = channels.first().map_or(0, |c| c.len());
    for i in 0..len {
        for ch in channels {
            match encoding {
                WavEncoding::Float32 => writer.write_sample(ch[i] as f32),
                WavEncoding::Pcm16 => writer.write_sample(pcm16(ch[i])),
            }
            .map_err(map_hound)?;
        }
    }
    writer.finalize().map_err(map_hound)
}

/// Serializes a signal as a 4-channel WAV stream.
pub fn write_wav_to<W: Write + Seek>(out: W, signal: &FoaSignal, encoding: WavEncoding) -> Result<()> {
    let chans: Vec<&[f64]> = signal.channels().iter().map(Vec::as_slice).collect();
    write_interleaved(out, signal.sample_rate(), &chans, encoding)
}

/// Writes atomically: the file appears at `path` only once complete.
pub fn write_wav(path: impl AsRef<Path>, signal: &FoaSignal, encoding: WavEncoding) -> Result<()> {
    crate::io_util::write_atomic(path.as_ref(), |f| write_wav_to(f, signal, encoding))
}

pub fn write_mono_wav(path: impl AsRef<Path>, sample_rate: u32, samples: &[f64], encoding: WavEncoding) -> Result<()> {
    crate::io_util::write_atomic(path.as_ref(), |f| {
        write_interleaved(f, sample_rate, &[samples], encoding)
    })
}
