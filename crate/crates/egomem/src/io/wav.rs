//! PCM 16-bit little-endian WAV encoding and decoding.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Interleaved 16-bit PCM audio.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcmAudio {
    pub samples: Vec<i16>,
    pub channels: u16,
    pub sample_rate: u32,
}

impl PcmAudio {
    /// Duration in seconds (frames / rate).
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.channels as f64 / self.sample_rate as f64
    }
}

pub fn encode(audio: &PcmAudio) -> Vec<u8> {
    let data_len = audio.samples.len() * 2;
    let byte_rate = audio.sample_rate * audio.channels as u32 * 2;
    let block_align = audio.channels * 2;

    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&audio.channels.to_le_bytes());
    out.extend_from_slice(&audio.sample_rate.to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes()); // bits per sample
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for s in &audio.samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], origin: &Path) -> Result<PcmAudio> {
    let bad = |reason: &str| Error::malformed(origin, reason);
    if bytes.len() < 44 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(bad("not a RIFF/WAVE file"));
    }

    let mut pos = 12;
    let mut format: Option<(u16, u16, u32)> = None; // (audio format, channels, rate)
    let mut bits_per_sample = 0u16;
    let mut data: Option<&[u8]> = None;

    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        if body_start + size > bytes.len() {
            return Err(bad("chunk overruns file"));
        }
        let body = &bytes[body_start..body_start + size];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(bad("fmt chunk too short"));
                }
                let audio_format = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                bits_per_sample = u16::from_le_bytes(body[14..16].try_into().unwrap());
                format = Some((audio_format, channels, rate));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word-aligned
        pos = body_start + size + (size & 1);
    }

    let (audio_format, channels, sample_rate) = format.ok_or_else(|| bad("missing fmt chunk"))?;
    if audio_format != 1 || bits_per_sample != 16 {
        return Err(bad("only PCM 16-bit supported"));
    }
    let body = data.ok_or_else(|| bad("missing data chunk"))?;
    if body.len() % 2 != 0 {
        return Err(bad("odd data chunk length"));
    }
    let samples = body
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]))
        .collect();
    Ok(PcmAudio {
        samples,
        channels,
        sample_rate,
    })
}

pub fn write(path: &Path, audio: &PcmAudio) -> Result<()> {
    fs::write(path, encode(audio)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<PcmAudio> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_stereo() {
        let audio = PcmAudio {
            samples: vec![0, 100, -100, i16::MAX, i16::MIN, 7],
            channels: 2,
            sample_rate: 16_000,
        };
        let back = decode(&encode(&audio), Path::new("t.wav")).unwrap();
        assert_eq!(back, audio);
    }

    #[test]
    fn duration_counts_frames() {
        let audio = PcmAudio {
            samples: vec![0; 32_000],
            channels: 2,
            sample_rate: 16_000,
        };
        assert!((audio.duration() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode(b"not a wav", Path::new("t.wav")).is_err());
    }
}
