//! Multichannel PCM recordings (WAV container).

use std::io::{Read, Seek};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Signal,
    Silence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecording {
    /// One sequence per mic, amplitudes in `[-1, 1)`.
    pub channels: Vec<Vec<f64>>,
    pub sample_rate: u32,
    /// Bits per sample of the source encoding (32 for float).
    pub bit_depth: u16,
    pub source_angle_deg: Option<f64>,
    pub label: Label,
}

impl MeasurementRecording {
    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// What a recording must match; `None` accepts anything.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Expected {
    pub sample_rate: Option<u32>,
    pub num_channels: Option<usize>,
}

/// Decodes a WAV stream. Integer samples are divided by `2^(b-1)`.
pub fn decode_recording<R: Read>(reader: R, expected: Expected) -> Result<MeasurementRecording> {
    let mut wav = WavReader::new(reader)?;
    let spec = wav.spec();
    let m = spec.channels as usize;
    if m == 0 {
        return Err(Error::param("channels", "recording has no channels"));
    }
    if let Some(fs) = expected.sample_rate {
        if fs != spec.sample_rate {
            return Err(Error::param("sample_rate", format!("expected {fs} Hz, found {} Hz", spec.sample_rate)));
        }
    }
    if let Some(want) = expected.num_channels {
        if want != m {
            return Err(Error::ChannelCount { expected: want, actual: m });
        }
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, b @ (16 | 24)) => {
            let scale = 1.0 / (1u32 << (b - 1)) as f64;
            wav.samples::<i32>().map(|s| s.map(|v| v as f64 * scale)).collect::<Result<_, _>>()?
        }
        (SampleFormat::Float, 32) => wav.samples::<f32>().map(|s| s.map(f64::from)).collect::<Result<_, _>>()?,
        (f, b) => {
            return Err(Error::param("encoding", format!("unsupported {b}-bit {f:?} samples")));
        }
    };
    if !interleaved.len().is_multiple_of(m) {
        return Err(Error::param("samples", "truncated final frame"));
    }
    let frames = interleaved.len() / m;
    let channels = (0..m).map(|c| (0..frames).map(|f| interleaved[f * m + c]).collect()).collect();
    Ok(MeasurementRecording {
        channels,
        sample_rate: spec.sample_rate,
        bit_depth: spec.bits_per_sample,
        source_angle_deg: None,
        label: Label::Signal,
    })
}

pub fn load_recording(path: &Path, expected: Expected) -> Result<MeasurementRecording> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    decode_recording(std::io::BufReader::new(file), expected).map_err(|e| match e {
        Error::Io { .. } => e,
        other => Error::Recording { path: path.to_path_buf(), reason: other.to_string() },
    })
}

/// Writes channels as 16- or 24-bit integer PCM (`x * 2^(b-1)`, rounded and
/// saturated) or 32-bit float.
pub fn write_recording<W: std::io::Write + Seek>(
    out: W,
    channels: &[Vec<f64>],
    sample_rate: u32,
    bits: u16,
    float: bool,
) -> Result<()> {
    let m = channels.len();
    if m == 0 || m > u16::MAX as usize {
        return Err(Error::param("channels", format!("cannot write {m} channels")));
    }
    let len = channels[0].len();
    if let Some(c) = channels.iter().find(|c| c.len() != len) {
        return Err(Error::LengthMismatch { expected: len, actual: c.len() });
    }
    let spec = match (float, bits) {
        (false, 16 | 24) => WavSpec { channels: m as u16, sample_rate, bits_per_sample: bits, sample_format: SampleFormat::Int },
        (true, 32) => WavSpec { channels: m as u16, sample_rate, bits_per_sample: 32, sample_format: SampleFormat::Float },
        _ => return Err(Error::param("bits", format!("cannot write {bits}-bit {} samples", if float { "float" } else { "integer" }))),
    };
    let mut w = WavWriter::new(out, spec)?;
    let full = (1i64 << (bits - 1)) as f64;
    for f in 0..len {
        for ch in channels {
            if float {
                w.write_sample(ch[f] as f32)?;
            } else {
                let code = (ch[f] * full).round().clamp(-full, full - 1.0);
                w.write_sample(code as i32)?;
            }
        }
    }
    w.finalize()?;
    Ok(())
}

pub fn save_recording(path: &Path, channels: &[Vec<f64>], sample_rate: u32, bits: u16, float: bool) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_recording(std::io::BufWriter::new(file), channels, sample_rate, bits, float)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn encode(channels: &[Vec<f64>], bits: u16, float: bool) -> Vec<u8> {
        let mut buf = Cursor::new(Vec::new());
        write_recording(&mut buf, channels, 44100, bits, float).unwrap();
        buf.into_inner()
    }

    #[test]
    fn silent_stereo() {
        let bytes = encode(&[vec![0.0; 10], vec![0.0; 10]], 16, false);
        let r = decode_recording(Cursor::new(bytes), Expected::default()).unwrap();
        assert_eq!(r.channels, vec![vec![0.0; 10]; 2]);
        assert_eq!((r.sample_rate, r.bit_depth), (44100, 16));
    }

    #[test]
    fn most_negative_code_is_minus_one() {
        let bytes = encode(&[vec![-1.0, 0.5, 1.0]], 16, false);
        let r = decode_recording(Cursor::new(bytes), Expected::default()).unwrap();
        assert_eq!(r.channels[0], vec![-1.0, 0.5, 32767.0 / 32768.0]);
    }

    #[test]
    fn integer_codes_round_trip_exactly() {
        for bits in [16u16, 24] {
            let step = 2.0 / (1u64 << bits) as f64;
            let ch: Vec<Vec<f64>> =
                (0..3).map(|c| (0..100).map(|n| ((n * 37 + c * 11) % 201) as f64 * step - 100.0 * step).collect()).collect();
            let r = decode_recording(Cursor::new(encode(&ch, bits, false)), Expected::default()).unwrap();
            assert_eq!(r.channels, ch);
        }
        let ch = vec![vec![0.25f32 as f64, -0.1f32 as f64]];
        let r = decode_recording(Cursor::new(encode(&ch, 32, true)), Expected::default()).unwrap();
        assert_eq!(r.channels, ch);
    }

    #[test]
    fn checks_expectations() {
        let bytes = encode(&[vec![0.0; 4], vec![0.0; 4]], 16, false);
        let e = Expected { num_channels: Some(3), ..Default::default() };
        assert!(matches!(decode_recording(Cursor::new(bytes.clone()), e), Err(Error::ChannelCount { .. })));
        let e = Expected { sample_rate: Some(48000), ..Default::default() };
        assert!(decode_recording(Cursor::new(bytes), e).is_err());
        assert!(decode_recording(Cursor::new(b"RIFF garbage".to_vec()), Expected::default()).is_err());
        assert!(load_recording(Path::new("/nonexistent/x.wav"), Expected::default()).is_err());
    }

    #[test]
    fn rejects_unsupported_widths() {
        let mut buf = Cursor::new(Vec::new());
        assert!(write_recording(&mut buf, &[vec![0.0]], 44100, 8, false).is_err());
        let spec = WavSpec { channels: 1, sample_rate: 8000, bits_per_sample: 8, sample_format: SampleFormat::Int };
        let mut buf = Cursor::new(Vec::new());
        let mut w = WavWriter::new(&mut buf, spec).unwrap();
        w.write_sample(3i8).unwrap();
        w.finalize().unwrap();
        assert!(decode_recording(Cursor::new(buf.into_inner()), Expected::default()).is_err());
    }
}
