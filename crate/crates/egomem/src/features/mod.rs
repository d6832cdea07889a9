//! Preprocessing for recognition: face alignment to a fixed 180x180 patch,
//! audio chunking with a 250 ms hop, energy-based voice activity gating, and
//! gammatonegram extraction on an ERB-spaced filterbank.

mod gammatone;

pub use gammatone::{erb_bandwidth, gammatonegram, Gammatonegram, FRAMES_PER_CHANNEL};

use crate::error::{Error, Result};
use crate::io::pgm::GrayImage;
use crate::mot::BoundingBox;

pub const ALIGNED_SIZE: usize = 180;
pub const CHUNK_SECONDS: f64 = 1.0;
pub const HOP_SECONDS: f64 = 0.25;
pub const VAD_SUBFRAME_SECONDS: f64 = 0.03;
/// Minimum voiced fraction for a chunk to enter the feature set.
pub const VAD_KEEP_FRACTION: f64 = 0.8;

/// A face crop aligned to the fixed input size of the face models.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedFace {
    image: GrayImage,
}

impl AlignedFace {
    pub fn image(&self) -> &GrayImage {
        &self.image
    }

    pub fn pixels(&self) -> &[u8] {
        &self.image.pixels
    }
}

/// Crops a square region centered on the bounding box and resizes it to
/// 180x180 with bilinear sampling; regions outside the image are zero.
pub fn align_face(image: &GrayImage, bbox: &BoundingBox) -> Result<AlignedFace> {
    if bbox.x1() >= image.width as f64 || bbox.y1() >= image.height as f64 {
        return Err(Error::Domain(format!(
            "bounding box starts at ({}, {}) outside a {}x{} image",
            bbox.x1(),
            bbox.y1(),
            image.width,
            image.height
        )));
    }

    let (cx, cy) = bbox.center();
    let side = bbox.width().max(bbox.height());
    let x0 = cx - side / 2.0;
    let y0 = cy - side / 2.0;
    let scale = side / ALIGNED_SIZE as f64;

    let mut pixels = Vec::with_capacity(ALIGNED_SIZE * ALIGNED_SIZE);
    for oy in 0..ALIGNED_SIZE {
        for ox in 0..ALIGNED_SIZE {
            let sx = x0 + (ox as f64 + 0.5) * scale - 0.5;
            let sy = y0 + (oy as f64 + 0.5) * scale - 0.5;
            pixels.push(bilinear(image, sx, sy));
        }
    }
    Ok(AlignedFace {
        image: GrayImage::new(ALIGNED_SIZE, ALIGNED_SIZE, pixels)?,
    })
}

fn bilinear(image: &GrayImage, x: f64, y: f64) -> u8 {
    let x0 = x.floor() as i64;
    let y0 = y.floor() as i64;
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;

    let sample = |xi: i64, yi: i64| -> f64 {
        if xi < 0 || yi < 0 || xi >= image.width as i64 || yi >= image.height as i64 {
            0.0
        } else {
            image.get(xi as usize, yi as usize) as f64
        }
    };

    let v = sample(x0, y0) * (1.0 - fx) * (1.0 - fy)
        + sample(x0 + 1, y0) * fx * (1.0 - fy)
        + sample(x0, y0 + 1) * (1.0 - fx) * fy
        + sample(x0 + 1, y0 + 1) * fx * fy;
    v.round().clamp(0.0, 255.0) as u8
}

/// Splits a normalized mono signal into 1 s chunks with a 250 ms hop.
/// Signals shorter than one chunk yield an empty list.
pub fn chunk_audio(signal: &[f64], sample_rate: u32) -> Vec<Vec<f64>> {
    let chunk_len = (CHUNK_SECONDS * sample_rate as f64).round() as usize;
    let hop = (HOP_SECONDS * sample_rate as f64).round() as usize;
    if signal.len() < chunk_len || chunk_len == 0 || hop == 0 {
        return Vec::new();
    }
    let mut chunks = Vec::new();
    let mut start = 0;
    while start + chunk_len <= signal.len() {
        chunks.push(signal[start..start + chunk_len].to_vec());
        start += hop;
    }
    chunks
}

/// Energy-threshold voice activity detector.
///
/// A subframe counts as voiced when its mean-square energy exceeds
/// `noise_floor * ratio`. The floor defaults to the expected ego-noise level
/// of the simulated sessions; `from_noise_sample` adapts it to a measured
/// noise recording instead.
#[derive(Debug, Clone)]
pub struct Vad {
    pub noise_floor: f64,
    pub ratio: f64,
}

impl Default for Vad {
    fn default() -> Self {
        Vad {
            noise_floor: 5e-3,
            ratio: 4.0,
        }
    }
}

impl Vad {
    /// Calibrates the floor from a recording known to contain only noise.
    pub fn from_noise_sample(noise: &[f64]) -> Self {
        let floor = mean_square(noise).max(1e-12);
        Vad {
            noise_floor: floor,
            ratio: 4.0,
        }
    }

    /// Fraction of 30 ms subframes whose energy exceeds the threshold.
    pub fn vad_fraction(&self, chunk: &[f64], sample_rate: u32) -> f64 {
        let sub_len = ((VAD_SUBFRAME_SECONDS * sample_rate as f64).round() as usize).max(1);
        let n_subframes = chunk.len() / sub_len;
        if n_subframes == 0 {
            return 0.0;
        }
        let threshold = self.noise_floor * self.ratio;
        let voiced = chunk
            .chunks_exact(sub_len)
            .filter(|sub| mean_square(sub) > threshold)
            .count();
        voiced as f64 / n_subframes as f64
    }

    /// Whether a chunk passes the 80% voiced-data rule.
    pub fn keeps(&self, chunk: &[f64], sample_rate: u32) -> bool {
        self.vad_fraction(chunk, sample_rate) >= VAD_KEEP_FRACTION
    }
}

fn mean_square(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64
}

/// ERB-rate (Glasberg-Moore): number of equivalent rectangular bandwidths
/// below frequency `hz`.
pub fn erb_rate(hz: f64) -> f64 {
    21.4 * (0.00437 * hz + 1.0).log10()
}

/// Inverse of `erb_rate`.
pub fn erb_rate_inverse(rate: f64) -> f64 {
    (10f64.powf(rate / 21.4) - 1.0) / 0.00437
}

/// `n` center frequencies equally spaced on the ERB-rate scale, endpoints
/// exactly `f_min` and `f_max`, strictly increasing.
pub fn erb_center_frequencies(n: usize, f_min: f64, f_max: f64) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Domain("need at least two center frequencies".into()));
    }
    if !(f_min > 0.0 && f_max > f_min) {
        return Err(Error::Domain(format!(
            "invalid frequency range [{f_min}, {f_max}]"
        )));
    }
    let e_min = erb_rate(f_min);
    let e_max = erb_rate(f_max);
    let mut centers = Vec::with_capacity(n);
    for i in 0..n {
        let e = e_min + (e_max - e_min) * i as f64 / (n - 1) as f64;
        centers.push(erb_rate_inverse(e));
    }
    centers[0] = f_min;
    centers[n - 1] = f_max;
    Ok(centers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn flat_image(w: usize, h: usize, v: u8) -> GrayImage {
        GrayImage::filled(w, h, v)
    }

    #[test]
    fn full_frame_alignment_is_identity() {
        let mut img = flat_image(180, 180, 0);
        for y in 0..180 {
            for x in 0..180 {
                img.set(x, y, ((x * 7 + y * 13) % 256) as u8);
            }
        }
        let bbox = BoundingBox::new(0.0, 0.0, 180.0, 180.0).unwrap();
        let aligned = align_face(&img, &bbox).unwrap();
        assert_eq!(aligned.image().pixels, img.pixels);
    }

    #[test]
    fn small_bbox_scales_to_fixed_size() {
        let img = flat_image(640, 480, 128);
        let bbox = BoundingBox::new(300.0, 200.0, 332.0, 257.0).unwrap();
        let aligned = align_face(&img, &bbox).unwrap();
        assert_eq!(aligned.image().width, 180);
        assert_eq!(aligned.image().height, 180);
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = flat_image(100, 100, 77);
        let bbox = BoundingBox::new(20.0, 20.0, 60.0, 60.0).unwrap();
        let aligned = align_face(&img, &bbox).unwrap();
        assert!(aligned.pixels().iter().all(|&p| p == 77));
    }

    #[test]
    fn bbox_outside_image_is_rejected() {
        let img = flat_image(100, 100, 0);
        let bbox = BoundingBox::new(200.0, 10.0, 230.0, 40.0).unwrap();
        assert!(align_face(&img, &bbox).is_err());
    }

    #[test]
    fn partially_out_of_frame_is_zero_padded() {
        let img = flat_image(100, 100, 200);
        // Square crop extends above the top edge.
        let bbox = BoundingBox::new(10.0, 0.0, 40.0, 10.0).unwrap();
        let aligned = align_face(&img, &bbox).unwrap();
        assert_eq!(aligned.image().get(90, 0), 0);
        assert_eq!(aligned.image().get(90, 179), 200);
    }

    #[test]
    fn chunk_counts_match_hop_arithmetic() {
        let fs = 16_000u32;
        let one_sec = vec![0.0; fs as usize];
        assert_eq!(chunk_audio(&one_sec, fs).len(), 1);

        let ten_sec = vec![0.0; 10 * fs as usize];
        assert_eq!(chunk_audio(&ten_sec, fs).len(), 37);

        let half_sec = vec![0.0; fs as usize / 2];
        assert_eq!(chunk_audio(&half_sec, fs).len(), 0);
    }

    #[test]
    fn chunk_windows_cover_the_hop_grid() {
        let fs = 8_000u32;
        let signal: Vec<f64> = (0..fs * 3).map(|i| i as f64).collect();
        let chunks = chunk_audio(&signal, fs);
        for (k, chunk) in chunks.iter().enumerate() {
            assert_eq!(chunk.len(), fs as usize);
            assert_eq!(chunk[0], (k as f64) * 0.25 * fs as f64);
        }
    }

    #[test]
    fn vad_on_silence_and_tone() {
        let fs = 16_000u32;
        let vad = Vad::default();
        let silence = vec![0.0; fs as usize];
        assert_eq!(vad.vad_fraction(&silence, fs), 0.0);

        let tone: Vec<f64> = (0..fs)
            .map(|i| (2.0 * PI * 440.0 * i as f64 / fs as f64).sin())
            .collect();
        assert_eq!(vad.vad_fraction(&tone, fs), 1.0);
        assert!(vad.keeps(&tone, fs));
        assert!(!vad.keeps(&silence, fs));
    }

    #[test]
    fn vad_half_voiced_chunk() {
        let fs = 16_000u32;
        let vad = Vad::default();
        let n = fs as usize;
        let signal: Vec<f64> = (0..n)
            .map(|i| {
                if i < n / 2 {
                    (2.0 * PI * 500.0 * i as f64 / fs as f64).sin() * 0.5
                } else {
                    0.0
                }
            })
            .collect();
        let frac = vad.vad_fraction(&signal, fs);
        // 33 subframes of 30 ms; the boundary subframe may fall either way.
        assert!((frac - 0.5).abs() <= 1.0 / 33.0 + 1e-9, "fraction {frac}");
    }

    #[test]
    fn erb_endpoints_are_exact() {
        let f = erb_center_frequencies(2, 50.0, 8000.0).unwrap();
        assert_eq!(f, vec![50.0, 8000.0]);
    }

    #[test]
    fn erb_spacing_is_uniform_and_monotone() {
        let f = erb_center_frequencies(128, 50.0, 8000.0).unwrap();
        assert_eq!(f.len(), 128);
        let e: Vec<f64> = f.iter().map(|&hz| erb_rate(hz)).collect();
        let step = (e[127] - e[0]) / 127.0;
        for i in 1..128 {
            assert!(f[i] > f[i - 1]);
            assert!(((e[i] - e[i - 1]) - step).abs() < 1e-9);
        }
    }

    #[test]
    fn erb_midpoint_straddles_the_inverse() {
        let f = erb_center_frequencies(128, 50.0, 8000.0).unwrap();
        let midpoint = erb_rate_inverse((erb_rate(50.0) + erb_rate(8000.0)) / 2.0);
        assert!(f[63] <= midpoint && midpoint <= f[64]);
    }

    #[test]
    fn erb_rejects_bad_ranges() {
        assert!(erb_center_frequencies(1, 50.0, 8000.0).is_err());
        assert!(erb_center_frequencies(4, 0.0, 8000.0).is_err());
        assert!(erb_center_frequencies(4, 900.0, 100.0).is_err());
    }
}
