//! First-order ambisonic signals in ACN channel order with SN3D normalization.
//!
//! Channel `0` is the omnidirectional `W`, followed by the dipoles `Y`, `Z`
//! and `X`. A plane wave from direction `(az, el)` has dipole gains equal to
//! the direction cosines, so `Y² + Z² + X² = 1` and `W = 1`.

mod manifest;
mod wav;

use std::f64::consts::{FRAC_PI_2, PI, TAU};

pub use manifest::{SceneManifest, SourceEntry, TruthFile, TruthSource};
pub use wav::{read_mono_wav, read_wav, read_wav_from, write_mono_wav, write_wav, write_wav_to, WavEncoding};

use crate::error::{Error, Result};

/// Default FOA sample rate.
pub const DEFAULT_SAMPLE_RATE: u32 = 24_000;

/// ACN channel slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    W = 0,
    Y = 1,
    Z = 2,
    X = 3,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::W, Channel::Y, Channel::Z, Channel::X];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// A direction on the sphere. Azimuth is counterclockwise from the front
/// (+x toward +y) and lies in (-pi, pi]; elevation is upward positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    azimuth: f64,
    elevation: f64,
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(angle: f64) -> f64 {
    let a = angle.rem_euclid(TAU);
    if a > PI {
        a - TAU
    } else {
        a
    }
}

impl Direction {
    /// Builds a direction from radians. Azimuth is wrapped; an elevation
    /// outside `[-pi/2, pi/2]` is rejected.
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        if !azimuth.is_finite() || !elevation.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "direction must be finite, got ({azimuth}, {elevation})"
            )));
        }
        if !(-FRAC_PI_2..=FRAC_PI_2).contains(&elevation) {
            return Err(Error::ElevationOutOfRange(elevation));
        }
        Ok(Self {
            azimuth: wrap_angle(azimuth),
            elevation,
        })
    }

    pub fn from_degrees(azimuth_deg: f64, elevation_deg: f64) -> Result<Self> {
        Self::new(azimuth_deg.to_radians(), elevation_deg.to_radians())
    }

    /// Direction of a nonzero cartesian vector `(x, y, z)`.
    pub fn from_vector(v: [f64; 3]) -> Result<Self> {
        let [x, y, z] = v;
        let horizontal = x.hypot(y);
        if !(horizontal.is_finite() && z.is_finite()) || (horizontal == 0.0 && z == 0.0) {
            return Err(Error::InvalidArgument(
                "cannot take the direction of a zero or non-finite vector".into(),
            ));
        }
        Self::new(y.atan2(x), z.atan2(horizontal))
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth.to_degrees()
    }

    pub fn elevation_deg(&self) -> f64 {
        self.elevation.to_degrees()
    }

    /// Cartesian unit vector `(x, y, z)`.
    pub fn unit_vector(&self) -> [f64; 3] {
        let (sa, ca) = self.azimuth.sin_cos();
        let (se, ce) = self.elevation.sin_cos();
        [ca * ce, sa * ce, se]
    }

    /// SN3D first-order gains in ACN order `[W, Y, Z, X]`.
    pub fn sn3d_gains(&self) -> [f64; 4] {
        let [x, y, z] = self.unit_vector();
        [1.0, y, z, x]
    }
}

/// A 4-channel FOA waveform in ACN order `[W, Y, Z, X]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FoaSignal {
    sample_rate: u32,
    channels: [Vec<f64>; 4],
}

fn check_finite(what: &'static str, samples: &[f64]) -> Result<()> {
    match samples.iter().position(|s| !s.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

impl FoaSignal {
    pub fn new(sample_rate: u32, channels: [Vec<f64>; 4]) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        let len = channels[0].len();
        if len == 0 {
            return Err(Error::Empty("FOA signal"));
        }
        for ch in &channels[1..] {
            if ch.len() != len {
                return Err(Error::LengthMismatch(len, ch.len()));
            }
        }
        for ch in &channels {
            check_finite("FOA signal", ch)?;
        }
        Ok(Self { sample_rate, channels })
    }

    /// An all-zero signal of `len` samples.
    pub fn silence(sample_rate: u32, len: usize) -> Result<Self> {
        Self::new(sample_rate, std::array::from_fn(|_| vec![0.0; len]))
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    pub fn channels(&self) -> &[Vec<f64>; 4] {
        &self.channels
    }

    pub fn channel(&self, ch: Channel) -> &[f64] {
        &self.channels[ch.index()]
    }

    pub fn into_channels(self) -> [Vec<f64>; 4] {
        self.channels
    }

    /// Multiplies every sample by `gain`.
    pub fn scaled(&self, gain: f64) -> Result<Self> {
        let channels = self
            .channels
            .clone()
            .map(|ch| ch.into_iter().map(|s| s * gain).collect());
        Self::new(self.sample_rate, channels)
    }

    /// Zero-pads or truncates every channel to `len` samples.
    pub fn resized(&self, len: usize) -> Result<Self> {
        let channels = self.channels.clone().map(|mut ch| {
            ch.resize(len, 0.0);
            ch
        });
        Self::new(self.sample_rate, channels)
    }
}

/// Pans a mono signal to `dir` with SN3D first-order gains.
pub fn encode_source(mono: &[f64], dir: Direction, sample_rate: u32) -> Result<FoaSignal> {
    if mono.is_empty() {
        return Err(Error::Empty("mono source"));
    }
    check_finite("mono source", mono)?;
    let gains = dir.sn3d_gains();
    let channels = gains.map(|g| mono.iter().map(|s| g * s).collect());
    FoaSignal::new(sample_rate, channels)
}

/// Sample-wise sum. Shorter signals are zero-padded at the tail.
pub fn mix(signals: &[FoaSignal]) -> Result<FoaSignal> {
    let first = signals.first().ok_or(Error::Empty("signal list"))?;
    let sample_rate = first.sample_rate;
    let len = signals.iter().map(FoaSignal::len).max().unwrap_or(0);
    let mut out: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; len]);
    for s in signals {
        if s.sample_rate != sample_rate {
            return Err(Error::SampleRateMismatch(sample_rate, s.sample_rate));
        }
        for (acc, ch) in out.iter_mut().zip(&s.channels) {
            for (a, v) in acc.iter_mut().zip(ch) {
                *a += v;
            }
        }
    }
    FoaSignal::new(sample_rate, out)
}

/// Rotates the sound field about the vertical axis by `angle` radians.
pub fn rotate_azimuth(signal: &FoaSignal, angle: f64) -> Result<FoaSignal> {
    if !angle.is_finite() {
        return Err(Error::InvalidArgument("rotation angle must be finite".into()));
    }
    let (s, c) = angle.sin_cos();
    let [w, y, z, x] = &signal.channels;
    let (x_rot, y_rot): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .map(|(&xv, &yv)| (c * xv - s * yv, s * xv + c * yv))
        .unzip();
    FoaSignal::new(signal.sample_rate, [w.clone(), y_rot, z.clone(), x_rot])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn impulse() -> Vec<f64> {
        vec![1.0, 0.0, 0.0]
    }

    fn gains_at_zero(s: &FoaSignal) -> [f64; 4] {
        std::array::from_fn(|c| s.channels()[c][0])
    }

    fn assert_gains(actual: [f64; 4], expected: [f64; 4]) {
        for (a, e) in actual.iter().zip(expected) {
            assert!((a - e).abs() < 1e-15, "{actual:?} vs {expected:?}");
        }
    }

    #[test]
    fn encode_front_left_zenith() {
        let front = encode_source(&impulse(), Direction::new(0.0, 0.0).unwrap(), 24_000).unwrap();
        assert_gains(gains_at_zero(&front), [1.0, 0.0, 0.0, 1.0]);
        let left = encode_source(&impulse(), Direction::new(FRAC_PI_2, 0.0).unwrap(), 24_000).unwrap();
        assert_gains(gains_at_zero(&left), [1.0, 1.0, 0.0, 0.0]);
        let up = encode_source(&impulse(), Direction::new(0.0, FRAC_PI_2).unwrap(), 24_000).unwrap();
        assert_gains(gains_at_zero(&up), [1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn encode_rejects_bad_input() {
        let d = Direction::new(0.0, 0.0).unwrap();
        assert!(matches!(encode_source(&[], d, 24_000), Err(Error::Empty(_))));
        assert!(matches!(
            encode_source(&[0.0, f64::NAN], d, 24_000),
            Err(Error::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn direction_wraps_azimuth_and_rejects_elevation() {
        let d = Direction::new(3.0 * PI, 0.0).unwrap();
        assert!((d.azimuth() - PI).abs() < 1e-12);
        let d = Direction::new(-PI, 0.0).unwrap();
        assert_eq!(d.azimuth(), PI);
        let d = Direction::new(-0.5 * PI - 0.1, 0.0).unwrap();
        assert!(d.azimuth() < 0.0);
        assert!(matches!(Direction::new(0.0, 1.6), Err(Error::ElevationOutOfRange(_))));
        assert!(Direction::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn mix_examples() {
        let d = Direction::new(0.4, -0.2).unwrap();
        let s = encode_source(&[0.5, -1.0, 0.25], d, 24_000).unwrap();
        assert_eq!(mix(std::slice::from_ref(&s)).unwrap(), s);

        let neg = s.scaled(-1.0).unwrap();
        let zero = mix(&[s.clone(), neg]).unwrap();
        assert!(zero.channels().iter().flatten().all(|&v| v == 0.0));

        let front = encode_source(&impulse(), Direction::new(0.0, 0.0).unwrap(), 24_000).unwrap();
        let left = encode_source(&impulse(), Direction::new(FRAC_PI_2, 0.0).unwrap(), 24_000).unwrap();
        let both = mix(&[front, left]).unwrap();
        assert_eq!(both.channel(Channel::W)[0], 2.0);
    }

    #[test]
    fn mix_pads_and_checks_rate() {
        let d = Direction::new(0.0, 0.0).unwrap();
        let a = encode_source(&[1.0; 4], d, 24_000).unwrap();
        let b = encode_source(&[1.0; 2], d, 24_000).unwrap();
        let m = mix(&[a, b.clone()]).unwrap();
        assert_eq!(m.channel(Channel::W), &[2.0, 2.0, 1.0, 1.0]);
        let c = encode_source(&[1.0; 2], d, 48_000).unwrap();
        assert!(matches!(mix(&[b, c]), Err(Error::SampleRateMismatch(..))));
        assert!(mix(&[]).is_err());
    }

    #[test]
    fn rotation_examples() {
        let mono = [0.3, -0.7, 1.1];
        let front = encode_source(&mono, Direction::new(0.0, 0.0).unwrap(), 24_000).unwrap();
        assert_eq!(rotate_azimuth(&front, 0.0).unwrap(), front);

        let rotated = rotate_azimuth(&front, FRAC_PI_2).unwrap();
        let left = encode_source(&mono, Direction::new(FRAC_PI_2, 0.0).unwrap(), 24_000).unwrap();
        for (a, b) in rotated
            .channels()
            .iter()
            .flatten()
            .zip(left.channels().iter().flatten())
        {
            assert!((a - b).abs() < 1e-15);
        }

        let full = rotate_azimuth(&front, TAU).unwrap();
        for (a, b) in full.channels().iter().flatten().zip(front.channels().iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn signal_validation() {
        assert!(matches!(
            FoaSignal::new(24_000, [vec![0.0; 2], vec![0.0; 2], vec![0.0; 3], vec![0.0; 2]]),
            Err(Error::LengthMismatch(2, 3))
        ));
        assert!(FoaSignal::new(0, std::array::from_fn(|_| vec![0.0])).is_err());
        assert!(FoaSignal::new(24_000, std::array::from_fn(|_| vec![f64::INFINITY])).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn direction() -> impl Strategy<Value = Direction> {
            (-PI..PI, -FRAC_PI_2..FRAC_PI_2).prop_map(|(a, e)| Direction::new(a, e).unwrap())
        }

        proptest! {
            #[test]
            fn dipole_gains_have_unit_norm(d in direction()) {
                let [_, y, z, x] = d.sn3d_gains();
                prop_assert!((x * x + y * y + z * z - 1.0).abs() < 1e-12);
                let u = d.unit_vector();
                prop_assert!(((u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt() - 1.0).abs() < 1e-12);
            }

            #[test]
            fn rotation_matches_reencoding(
                d in direction(),
                phi in -10.0f64..10.0,
                mono in prop::collection::vec(-1.0f64..1.0, 1..32),
            ) {
                let s = encode_source(&mono, d, 24_000).unwrap();
                let r = rotate_azimuth(&s, phi).unwrap();
                let target = Direction::new(d.azimuth() + phi, d.elevation()).unwrap();
                let e = encode_source(&mono, target, 24_000).unwrap();
                for (a, b) in r.channels().iter().flatten().zip(e.channels().iter().flatten()) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
            }

            #[test]
            fn mix_commutes_and_associates(
                a in prop::collection::vec(-1.0f64..1.0, 1..16),
                b in prop::collection::vec(-1.0f64..1.0, 1..16),
                c in prop::collection::vec(-1.0f64..1.0, 1..16),
                da in direction(), db in direction(), dc in direction(),
            ) {
                let sa = encode_source(&a, da, 24_000).unwrap();
                let sb = encode_source(&b, db, 24_000).unwrap();
                let sc = encode_source(&c, dc, 24_000).unwrap();
                let ab = mix(&[sa.clone(), sb.clone()]).unwrap();
                let ba = mix(&[sb.clone(), sa.clone()]).unwrap();
                let left = mix(&[ab.clone(), sc.clone()]).unwrap();
                let right = mix(&[sa, mix(&[sb, sc]).unwrap()]).unwrap();
                for (x, y) in ab.channels().iter().flatten().zip(ba.channels().iter().flatten()) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
                for (x, y) in left.channels().iter().flatten().zip(right.channels().iter().flatten()) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }
}
