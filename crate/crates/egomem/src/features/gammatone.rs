//! Gammatonegram extraction: a bank of 4th-order gammatone filters spaced on
//! the ERB scale, per-filter energy integrated into fixed time frames, the
//! two channels stacked along the time axis.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::erb_center_frequencies;

/// Frames per channel; two channels side by side give 192 columns.
pub const FRAMES_PER_CHANNEL: usize = 96;
pub const DEFAULT_FILTERS: usize = 128;

/// Bandwidth correction for a 4th-order gammatone built from cascaded
/// one-pole sections (Patterson/Holdsworth).
const BANDWIDTH_FACTOR: f64 = 1.019;

/// Time-frequency energy map: rows are filters ordered low to high center
/// frequency, columns are time frames with the channels concatenated.
#[derive(Debug, Clone, PartialEq)]
pub struct Gammatonegram {
    values: Matrix,
    center_frequencies: Vec<f64>,
}

impl Gammatonegram {
    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn n_filters(&self) -> usize {
        self.values.rows()
    }

    pub fn n_frames(&self) -> usize {
        self.values.cols()
    }

    pub fn center_frequencies(&self) -> &[f64] {
        &self.center_frequencies
    }

    /// Mean energy per filter row; the reference voice embedding.
    pub fn row_means(&self) -> Vec<f64> {
        (0..self.values.rows())
            .map(|r| {
                let row = self.values.row(r);
                row.iter().sum::<f64>() / row.len() as f64
            })
            .collect()
    }

    /// Natural-log compression with a floor, for classifiers that prefer
    /// compressed dynamics. Entries may be negative afterwards.
    pub fn log_compressed(&self, floor: f64) -> Matrix {
        let data = self.values.data().iter().map(|&v| v.max(floor).ln()).collect();
        Matrix::from_vec(self.values.rows(), self.values.cols(), data)
            .expect("shape preserved")
    }
}

/// Equivalent rectangular bandwidth of the auditory filter at `hz`
/// (Glasberg-Moore).
pub fn erb_bandwidth(hz: f64) -> f64 {
    24.7 * (0.00437 * hz + 1.0)
}

/// Computes the gammatonegram of a 1 s chunk.
///
/// `channels` holds one or two equal-length channels; a mono chunk is
/// duplicated onto both sides. Each channel must be exactly one second at
/// `sample_rate`. Output shape is `n_filters x (2 * FRAMES_PER_CHANNEL)`.
pub fn gammatonegram(
    channels: &[&[f64]],
    sample_rate: u32,
    n_filters: usize,
) -> Result<Gammatonegram> {
    if channels.is_empty() || channels.len() > 2 {
        return Err(Error::Domain(format!(
            "expected 1 or 2 channels, got {}",
            channels.len()
        )));
    }
    let chunk_len = sample_rate as usize;
    for ch in channels {
        if ch.len() != chunk_len {
            return Err(Error::Domain(format!(
                "chunk must be exactly 1 s ({} samples), got {}",
                chunk_len,
                ch.len()
            )));
        }
    }
    if n_filters < 2 {
        return Err(Error::Domain("need at least two filters".into()));
    }

    let f_min = 50.0;
    let f_max = sample_rate as f64 / 2.0 * 0.95;
    let centers = erb_center_frequencies(n_filters, f_min, f_max)?;

    let left = channels[0];
    let right = *channels.get(1).unwrap_or(&channels[0]);

    let mut values = Matrix::zeros(n_filters, 2 * FRAMES_PER_CHANNEL);
    for (row, &fc) in centers.iter().enumerate() {
        let frames_l = filter_energy_frames(left, sample_rate, fc);
        let frames_r = filter_energy_frames(right, sample_rate, fc);
        for (i, &e) in frames_l.iter().enumerate() {
            values.set(row, i, e);
        }
        for (i, &e) in frames_r.iter().enumerate() {
            values.set(row, FRAMES_PER_CHANNEL + i, e);
        }
    }

    Ok(Gammatonegram {
        values,
        center_frequencies: centers,
    })
}

/// Runs one gammatone filter over a channel and integrates the squared
/// envelope into FRAMES_PER_CHANNEL mean-energy frames.
fn filter_energy_frames(samples: &[f64], sample_rate: u32, center_hz: f64) -> Vec<f64> {
    let fs = sample_rate as f64;
    let omega = 2.0 * std::f64::consts::PI * center_hz / fs;
    let bw = 2.0 * std::f64::consts::PI * BANDWIDTH_FACTOR * erb_bandwidth(center_hz) / fs;
    let r = (-bw).exp();
    let (cos_w, sin_w) = (omega.cos(), omega.sin());
    let gain = (1.0 - r).powi(4);

    // Four cascaded complex one-pole resonators; the envelope is the
    // magnitude of the final stage.
    let mut state = [(0.0f64, 0.0f64); 4];
    let n = samples.len();
    let mut frames = vec![0.0f64; FRAMES_PER_CHANNEL];
    let mut counts = vec![0usize; FRAMES_PER_CHANNEL];

    for (i, &x) in samples.iter().enumerate() {
        let mut re = x * gain;
        let mut im = 0.0;
        for stage in &mut state {
            let (sr, si) = *stage;
            let nr = re + r * (cos_w * sr - sin_w * si);
            let ni = im + r * (sin_w * sr + cos_w * si);
            *stage = (nr, ni);
            re = nr;
            im = ni;
        }
        let frame = (i * FRAMES_PER_CHANNEL) / n;
        frames[frame] += re * re + im * im;
        counts[frame] += 1;
    }

    for (f, c) in frames.iter_mut().zip(counts) {
        if c > 0 {
            *f /= c as f64;
        }
    }
    frames
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const FS: u32 = 16_000;

    fn tone(freq: f64, amplitude: f64) -> Vec<f64> {
        (0..FS)
            .map(|i| (2.0 * PI * freq * i as f64 / FS as f64).sin() * amplitude)
            .collect()
    }

    #[test]
    fn silence_yields_all_zero() {
        let silence = vec![0.0; FS as usize];
        let g = gammatonegram(&[&silence], FS, 32).unwrap();
        assert!(g.values().iter().all(|v| v == 0.0));
    }

    #[test]
    fn shape_is_filters_by_192() {
        let chunk = tone(500.0, 0.3);
        let g = gammatonegram(&[&chunk, &chunk], FS, 128).unwrap();
        assert_eq!(g.values().rows(), 128);
        assert_eq!(g.values().cols(), 192);

        let mono = gammatonegram(&[&chunk], FS, 128).unwrap();
        assert_eq!(mono.values().cols(), 192);
        // duplicated mono: both halves identical
        for r in 0..128 {
            for c in 0..96 {
                assert_eq!(mono.values().get(r, c), mono.values().get(r, 96 + c));
            }
        }
    }

    #[test]
    fn tone_peaks_in_its_own_filter_row() {
        let n_filters = 64;
        let f_min = 50.0;
        let f_max = FS as f64 / 2.0 * 0.95;
        let centers = erb_center_frequencies(n_filters, f_min, f_max).unwrap();
        for &k in &[8usize, 32, 55] {
            let chunk = tone(centers[k], 0.3);
            let g = gammatonegram(&[&chunk], FS, n_filters).unwrap();
            let peak = g.values().argmax_row_by_sum();
            assert!(
                peak.abs_diff(k) <= 1,
                "tone at filter {k} peaked in row {peak}"
            );
        }
    }

    #[test]
    fn energy_scales_quadratically_with_amplitude() {
        let quiet = tone(700.0, 0.2);
        let loud = tone(700.0, 0.4);
        let gq = gammatonegram(&[&quiet], FS, 32).unwrap();
        let gl = gammatonegram(&[&loud], FS, 32).unwrap();
        let sum_q: f64 = gq.values().iter().sum();
        let sum_l: f64 = gl.values().iter().sum();
        let ratio = sum_l / sum_q;
        assert!((ratio - 4.0).abs() < 0.04, "ratio {ratio}");
    }

    #[test]
    fn rejects_wrong_duration_or_channel_count() {
        let short = vec![0.0; FS as usize - 1];
        assert!(gammatonegram(&[&short], FS, 32).is_err());
        let ok = vec![0.0; FS as usize];
        assert!(gammatonegram(&[], FS, 32).is_err());
        assert!(gammatonegram(&[&ok, &ok, &ok], FS, 32).is_err());
    }

    #[test]
    fn row_means_have_filter_dimension() {
        let chunk = tone(900.0, 0.25);
        let g = gammatonegram(&[&chunk], FS, 48).unwrap();
        assert_eq!(g.row_means().len(), 48);
    }
}
