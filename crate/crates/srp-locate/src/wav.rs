//! Minimal WAV I/O: 16-bit PCM and 32-bit IEEE float, little-endian.
//!
//! Only the two encodings used by the pipeline are supported; anything else
//! is rejected. Multichannel files are de-interleaved on read and
//! interleaved on write.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Decoded multichannel audio. `channels[m][t]` is sample `t` of channel `m`.
#[derive(Debug, Clone)]
pub struct WavData {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate: u32,
}

impl WavData {
    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;

fn u16_at(bytes: &[u8], at: usize) -> Result<u16> {
    let b: [u8; 2] = bytes
        .get(at..at + 2)
        .and_then(|s| s.try_into().ok())
        .ok_or_else(|| Error::Wav("truncated file".into()))?;
    Ok(u16::from_le_bytes(b))
}

fn u32_at(bytes: &[u8], at: usize) -> Result<u32> {
    let b: [u8; 4] = bytes
        .get(at..at + 4)
        .and_then(|s| s.try_into().ok())
        .ok_or_else(|| Error::Wav("truncated file".into()))?;
    Ok(u32::from_le_bytes(b))
}

/// Read a WAV file, accepting 16-bit PCM or 32-bit float encodings.
pub fn read_wav(path: impl AsRef<Path>) -> Result<WavData> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::Wav(format!("{}: not a RIFF/WAVE file", path.display())));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // format, channels, rate, bits
    let mut data: Option<&[u8]> = None;
    let mut at = 12;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let size = u32_at(&bytes, at + 4)? as usize;
        let body_start = at + 8;
        let body_end = body_start + size;
        if body_end > bytes.len() {
            return Err(Error::Wav("truncated chunk".into()));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::Wav("fmt chunk too small".into()));
                }
                fmt = Some((
                    u16_at(&bytes, body_start)?,
                    u16_at(&bytes, body_start + 2)?,
                    u32_at(&bytes, body_start + 4)?,
                    u16_at(&bytes, body_start + 14)?,
                ));
            }
            b"data" => data = Some(&bytes[body_start..body_end]),
            _ => {} // fact, LIST, ... skipped
        }
        at = body_end + (size & 1); // chunks are word-aligned
    }

    let (format, n_channels, sample_rate, bits) =
        fmt.ok_or_else(|| Error::Wav("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::Wav("missing data chunk".into()))?;
    let n_channels = n_channels as usize;
    if n_channels == 0 {
        return Err(Error::Wav("zero channels".into()));
    }

    let channels = match (format, bits) {
        (FORMAT_PCM, 16) => {
            let n_frames = data.len() / (2 * n_channels);
            let mut channels = vec![Vec::with_capacity(n_frames); n_channels];
            for frame in 0..n_frames {
                for (ch, out) in channels.iter_mut().enumerate() {
                    let at = (frame * n_channels + ch) * 2;
                    let v = i16::from_le_bytes([data[at], data[at + 1]]);
                    out.push(f64::from(v) / 32768.0);
                }
            }
            channels
        }
        (FORMAT_IEEE_FLOAT, 32) => {
            let n_frames = data.len() / (4 * n_channels);
            let mut channels = vec![Vec::with_capacity(n_frames); n_channels];
            for frame in 0..n_frames {
                for (ch, out) in channels.iter_mut().enumerate() {
                    let at = (frame * n_channels + ch) * 4;
                    let v = f32::from_le_bytes([data[at], data[at + 1], data[at + 2], data[at + 3]]);
                    out.push(f64::from(v));
                }
            }
            channels
        }
        (format, bits) => {
            return Err(Error::Wav(format!(
                "unsupported encoding: format tag {format}, {bits} bits (expected 16-bit PCM or 32-bit float)"
            )))
        }
    };

    Ok(WavData {
        channels,
        sample_rate,
    })
}

/// Write a multichannel 32-bit float WAV file.
///
/// All channels must have equal length.
pub fn write_wav_f32(
    path: impl AsRef<Path>,
    channels: &[Vec<f64>],
    sample_rate: u32,
) -> Result<()> {
    let path = path.as_ref();
    let n_channels = channels.len();
    if n_channels == 0 {
        return Err(Error::Wav("no channels to write".into()));
    }
    let n_frames = channels[0].len();
    for ch in channels {
        if ch.len() != n_frames {
            return Err(Error::LengthMismatch {
                left: n_frames,
                right: ch.len(),
            });
        }
    }

    let data_len = (n_frames * n_channels * 4) as u32;
    let mut out = Vec::with_capacity(data_len as usize + 58);
    out.extend_from_slice(b"RIFF");
    // RIFF size: WAVE + fmt(8+16) + fact(8+4) + data(8+len)
    out.extend_from_slice(&(4 + 24 + 12 + 8 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");

    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_IEEE_FLOAT.to_le_bytes());
    out.extend_from_slice(&(n_channels as u16).to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * n_channels as u32 * 4).to_le_bytes()); // byte rate
    out.extend_from_slice(&(n_channels as u16 * 4).to_le_bytes()); // block align
    out.extend_from_slice(&32u16.to_le_bytes());

    // fact chunk is required for non-PCM encodings
    out.extend_from_slice(b"fact");
    out.extend_from_slice(&4u32.to_le_bytes());
    out.extend_from_slice(&(n_frames as u32).to_le_bytes());

    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for frame in 0..n_frames {
        for ch in channels {
            out.extend_from_slice(&(ch[frame] as f32).to_le_bytes());
        }
    }

    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Write a mono 16-bit PCM WAV file. Samples are clamped to [-1, 1).
pub fn write_wav_i16_mono(path: impl AsRef<Path>, samples: &[f64], sample_rate: u32) -> Result<()> {
    let path = path.as_ref();
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(data_len as usize + 44);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(4 + 24 + 8 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0 - 1.0 / 32768.0) * 32768.0).round() as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))?;
    Ok(())
}
