//! WAV read/write (16-bit integer PCM and 32-bit float PCM).

use std::path::Path;

use crate::error::{Error, Result};

/// Deinterleaved audio with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct WavData {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate: u32,
}

/// On-disk sample format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Int16,
    Float32,
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<WavData> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let n_channels = spec.channels as usize;
    let mut channels: Vec<Vec<f64>> = vec![Vec::new(); n_channels];

    match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => {
            for (i, s) in reader.samples::<i16>().enumerate() {
                channels[i % n_channels].push(s? as f64 / 32768.0);
            }
        }
        (hound::SampleFormat::Float, 32) => {
            for (i, s) in reader.samples::<f32>().enumerate() {
                channels[i % n_channels].push(s? as f64);
            }
        }
        (fmt, bits) => {
            return Err(Error::InvalidParameter(format!(
                "unsupported WAV format {fmt:?}/{bits} bits (expected 16-bit int or 32-bit float)"
            )));
        }
    }
    if channels.iter().any(|c| c.is_empty()) {
        return Err(Error::EmptySignal);
    }
    Ok(WavData {
        channels,
        sample_rate: spec.sample_rate,
    })
}

pub fn write_wav(
    path: impl AsRef<Path>,
    channels: &[Vec<f64>],
    sample_rate: u32,
    format: WavFormat,
) -> Result<()> {
    if channels.is_empty() || channels[0].is_empty() {
        return Err(Error::EmptySignal);
    }
    let len = channels[0].len();
    for (i, ch) in channels.iter().enumerate() {
        if ch.len() != len {
            return Err(Error::ChannelLengthMismatch {
                channel: i,
                got: ch.len(),
                expected: len,
            });
        }
    }
    let spec = hound::WavSpec {
        channels: channels.len() as u16,
        sample_rate,
        bits_per_sample: match format {
            WavFormat::Int16 => 16,
            WavFormat::Float32 => 32,
        },
        sample_format: match format {
            WavFormat::Int16 => hound::SampleFormat::Int,
            WavFormat::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    match format {
        WavFormat::Int16 => {
            for i in 0..len {
                for ch in channels {
                    let v = (ch[i] * 32768.0).round().clamp(-32768.0, 32767.0);
                    writer.write_sample(v as i16)?;
                }
            }
        }
        WavFormat::Float32 => {
            for i in 0..len {
                for ch in channels {
                    writer.write_sample(ch[i] as f32)?;
                }
            }
        }
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn float32_round_trip_preserves_samples_and_rate() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let chans: Vec<Vec<f64>> = (0..3)
            .map(|_| {
                (0..256)
                    .map(|_| (rng.random::<f64>() - 0.5) as f32 as f64)
                    .collect()
            })
            .collect();
        write_wav(&path, &chans, 22050, WavFormat::Float32).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate, 22050);
        assert_eq!(back.channels, chans);
    }

    #[test]
    fn int16_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let chans = vec![vec![0.0, 0.5, -0.5, 0.25]];
        write_wav(&path, &chans, 16000, WavFormat::Int16).unwrap();
        let back = read_wav(&path).unwrap();
        for (a, b) in chans[0].iter().zip(&back.channels[0]) {
            assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }

    #[test]
    fn mismatched_channel_lengths_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let err = write_wav(
            &path,
            &[vec![0.0; 4], vec![0.0; 5]],
            16000,
            WavFormat::Float32,
        );
        assert!(matches!(err, Err(Error::ChannelLengthMismatch { .. })));
    }
}
