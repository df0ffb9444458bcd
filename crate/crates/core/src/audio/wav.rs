//! RIFF/WAVE reader and writer for 16-bit PCM and 32-bit IEEE float.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AudioClip;
use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WavFormat {
    Pcm16,
    Float32,
}

pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    read_wav_bytes(&bytes, path)
}

struct Fmt {
    tag: u16,
    channels: u16,
    rate: u32,
    bits: u16,
}

/// Decodes an in-memory WAV file; `path` only labels errors.
pub fn read_wav_bytes(bytes: &[u8], path: &Path) -> Result<AudioClip> {
    let err = |offset: usize, reason: String| Error::Decode {
        path: path.to_path_buf(),
        offset: offset as u64,
        reason,
    };
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());

    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(err(0, "not a RIFF/WAVE file".into()));
    }
    let mut pos = 12;
    let mut fmt: Option<Fmt> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(pos + 4) as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body + size > bytes.len() {
                    return Err(err(pos, format!("fmt chunk of {size} bytes is malformed")));
                }
                let mut tag = u16_at(body);
                if tag == FORMAT_EXTENSIBLE {
                    if size < 40 {
                        return Err(err(pos, "extensible fmt chunk shorter than 40 bytes".into()));
                    }
                    tag = u16_at(body + 24);
                }
                fmt = Some(Fmt {
                    tag,
                    channels: u16_at(body + 2),
                    rate: u32_at(body + 4),
                    bits: u16_at(body + 14),
                });
            }
            b"data" => {
                let fmt = fmt.as_ref().ok_or_else(|| err(pos, "data chunk before fmt chunk".into()))?;
                if body + size > bytes.len() {
                    return Err(err(
                        body,
                        format!(
                            "data chunk declares {size} bytes but only {} remain",
                            bytes.len() - body
                        ),
                    ));
                }
                return decode(fmt, &bytes[body..body + size], body).map_err(|(o, r)| err(o, r));
            }
            _ => {}
        }
        pos = body + size + (size & 1);
    }
    Err(err(pos, "no data chunk".into()))
}

fn decode(fmt: &Fmt, data: &[u8], base: usize) -> std::result::Result<AudioClip, (usize, String)> {
    let channels = fmt.channels as usize;
    if channels == 0 || fmt.rate == 0 {
        return Err((base, "zero channels or sample rate".into()));
    }
    let width = match (fmt.tag, fmt.bits) {
        (FORMAT_PCM, 16) => 2,
        (FORMAT_FLOAT, 32) => 4,
        (tag, bits) => return Err((base, format!("unsupported codec: tag {tag}, {bits} bits"))),
    };
    let frame = width * channels;
    if data.len() % frame != 0 {
        return Err((base + data.len() - data.len() % frame, "partial sample frame at end of data".into()));
    }
    let frames = data.len() / frame;
    let mut samples = vec![Vec::with_capacity(frames); channels];
    for chunk in data.chunks_exact(frame) {
        for (c, s) in chunk.chunks_exact(width).enumerate() {
            let v = if width == 2 {
                i16::from_le_bytes([s[0], s[1]]) as f32 / 32768.0
            } else {
                f32::from_le_bytes(s.try_into().unwrap())
            };
            samples[c].push(v);
        }
    }
    AudioClip::new(fmt.rate, samples).map_err(|e| (base, e.to_string()))
}

/// Clamps to `[-1, 1 - 2^-15]` and rounds half away from zero.
pub fn encode_pcm16(v: f32) -> i16 {
    let clamped = v.clamp(-1.0, 1.0 - 1.0 / 32768.0);
    (clamped * 32768.0).round() as i16
}

pub fn write_wav_bytes(clip: &AudioClip, format: WavFormat) -> Vec<u8> {
    let channels = clip.channels();
    let (tag, width) = match format {
        WavFormat::Pcm16 => (FORMAT_PCM, 2usize),
        WavFormat::Float32 => (FORMAT_FLOAT, 4usize),
    };
    let data_len = clip.len() * channels * width;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&(channels as u16).to_le_bytes());
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate * (channels * width) as u32).to_le_bytes());
    out.extend_from_slice(&((channels * width) as u16).to_le_bytes());
    out.extend_from_slice(&((width * 8) as u16).to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for t in 0..clip.len() {
        for c in 0..channels {
            let v = clip.channel(c)[t];
            match format {
                WavFormat::Pcm16 => out.extend_from_slice(&encode_pcm16(v).to_le_bytes()),
                WavFormat::Float32 => out.extend_from_slice(&v.to_le_bytes()),
            }
        }
    }
    if data_len % 2 == 1 {
        out.push(0);
    }
    out
}

pub fn write_wav(clip: &AudioClip, path: &Path, format: WavFormat) -> Result<()> {
    if clip.channels_iter().any(|c| c.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite(format!("samples written to {}", path.display())));
    }
    std::fs::write(path, write_wav_bytes(clip, format))
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
