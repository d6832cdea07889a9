//! Deterministic scenario generator standing in for the robot's sensors.
//!
//! Scripted participants arrive in the left region, position themselves at
//! their home bins when invited, present themselves, and play the describe/
//! answer rounds. The generator emits camera frames (procedural face
//! detections), one-second voice segments, name-extraction results, buzzer
//! and hot-word events, and the virtual timer expiries that pace the game —
//! all on one timestamp-ordered timeline, next to a ground-truth log naming
//! the true identity of every emitted sample.
//!
//! Identical master seeds replay byte-identically.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::game::{turn_order, GameConfig, NameOutcome, TimerId};
use crate::io::pgm::GrayImage;
use crate::memory::ColorLabel;
use crate::mot::BoundingBox;
use crate::sls::{AzimuthBin, AudioEvent};

pub const FRAME_WIDTH: usize = 640;
pub const FRAME_HEIGHT: usize = 480;
/// Movement speed during repositioning, degrees of azimuth per second.
const MOVE_DEG_PER_SEC: f64 = 5.0;
/// Delay between an invitation and the player starting to move.
const REACT_SECONDS: f64 = 1.0;
/// Rest margin after a move so the tracker can settle and report stability.
const SETTLE_SECONDS: f64 = 5.0;
/// RMS of the voice signature before noise, full scale = 1.
const SIGNATURE_RMS: f64 = 0.15;
const MEAN_FACE_W: f64 = 32.0;
const MEAN_FACE_H: f64 = 57.0;

// substream tags
const TAG_FACE: u64 = 0x11;
const TAG_VOICE: u64 = 0x22;
const TAG_NAMES: u64 = 0x33;
const TAG_GAME: u64 = 0x44;

/// Maps an azimuth in [-90, 90] to a horizontal pixel in the panoramic frame.
pub fn azimuth_to_cx(azimuth_deg: f64) -> f64 {
    (azimuth_deg + 90.0) / 180.0 * FRAME_WIDTH as f64
}

/// Inverse of `azimuth_to_cx`, clamped to the valid azimuth range.
pub fn cx_to_azimuth(cx: f64) -> f64 {
    (cx / FRAME_WIDTH as f64 * 180.0 - 90.0).clamp(-90.0, 90.0)
}

/// Sinusoid-mixture voice signature with analytically known spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct VoiceSignature {
    /// (frequency Hz, amplitude) pairs, normalized to `SIGNATURE_RMS`.
    pub components: Vec<(f64, f64)>,
    pub phases: Vec<f64>,
}

impl VoiceSignature {
    pub fn from_seed(seed: u64, sample_rate: u32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nyquist = sample_rate as f64 / 2.0;
        let n = 4;
        let mut components: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let f = rng.random_range(180.0..2400.0_f64.min(nyquist * 0.6));
                let a = rng.random_range(0.5..1.0);
                (f, a)
            })
            .collect();
        let phases = (0..n)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        // normalize to the target RMS: sum of sinusoids has power sum(a^2)/2
        let power: f64 = components.iter().map(|(_, a)| a * a / 2.0).sum();
        let scale = SIGNATURE_RMS / power.sqrt();
        for (_, a) in &mut components {
            *a *= scale;
        }
        VoiceSignature { components, phases }
    }

    fn sample(&self, t: f64) -> f64 {
        self.components
            .iter()
            .zip(&self.phases)
            .map(|((f, a), phi)| a * (std::f64::consts::TAU * f * t + phi).sin())
            .sum()
    }
}

/// Per-identity procedural face: a coarse random grid upsampled to the
/// detection size, plus per-frame pixel noise.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceAppearance {
    pub grid: Vec<u8>,
    pub grid_side: usize,
    /// Vertical face center in the frame; differs per identity.
    pub center_y: f64,
}

impl FaceAppearance {
    pub fn from_seed(seed: u64, participant_index: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid_side = 6;
        let grid = (0..grid_side * grid_side)
            .map(|_| rng.random_range(40..=215_u16) as u8)
            .collect();
        let center_y = FRAME_HEIGHT as f64 / 2.0 - 24.0 + 24.0 * participant_index as f64;
        FaceAppearance {
            grid,
            grid_side,
            center_y,
        }
    }

    fn value_at(&self, u: f64, v: f64) -> f64 {
        // bilinear over the coarse grid; u, v in [0, 1]
        let side = self.grid_side;
        let x = u * (side - 1) as f64;
        let y = v * (side - 1) as f64;
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(side - 1);
        let y1 = (y0 + 1).min(side - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let g = |xx: usize, yy: usize| self.grid[yy * side + xx] as f64;
        g(x0, y0) * (1.0 - fx) * (1.0 - fy)
            + g(x1, y0) * fx * (1.0 - fy)
            + g(x0, y1) * (1.0 - fx) * fy
            + g(x1, y1) * fx * fy
    }
}

/// One scripted participant.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantSpec {
    pub name: String,
    pub color: ColorLabel,
    pub home_bin: AzimuthBin,
    pub face_seed: u64,
    pub voice_seed: u64,
    pub appearance: FaceAppearance,
    pub signature: VoiceSignature,
}

impl ParticipantSpec {
    pub fn new(
        name: impl Into<String>,
        color: ColorLabel,
        home_bin: AzimuthBin,
        face_seed: u64,
        voice_seed: u64,
        participant_index: usize,
        sample_rate: u32,
    ) -> Self {
        ParticipantSpec {
            name: name.into(),
            color,
            home_bin,
            face_seed,
            voice_seed,
            appearance: FaceAppearance::from_seed(face_seed, participant_index),
            signature: VoiceSignature::from_seed(voice_seed, sample_rate),
        }
    }
}

/// A simulated face detector hit: the cropped patch and its frame bbox.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceDetection {
    pub image: GrayImage,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub participants: Vec<ParticipantSpec>,
    pub azimuth_noise_sigma: f64,
    pub detector_miss_rate: f64,
    pub name_failure_rate: f64,
    /// Signal-to-noise ratio of voice against ego-noise; `f64::INFINITY`
    /// disables the noise entirely.
    pub ego_noise_snr_db: f64,
    pub frame_rate: f64,
    pub sample_rate: u32,
    pub master_seed: u64,
}

impl ScenarioConfig {
    /// The standard three-player session.
    pub fn default_three_player(master_seed: u64) -> Self {
        let names = ["Alice", "Bruno", "Carla"];
        let bins = [AzimuthBin::Left, AzimuthBin::Center, AzimuthBin::Right];
        let sample_rate = 16_000;
        let participants = names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                ParticipantSpec::new(
                    *name,
                    ColorLabel::ALL[i],
                    bins[i],
                    crate::seeds::substream2(master_seed, 100, i as u64),
                    crate::seeds::substream2(master_seed, 200, i as u64),
                    i,
                    sample_rate,
                )
            })
            .collect();
        ScenarioConfig {
            participants,
            azimuth_noise_sigma: 5.0,
            detector_miss_rate: 0.1,
            name_failure_rate: 1.0 / 6.0,
            ego_noise_snr_db: 9.0,
            frame_rate: 2.0,
            sample_rate,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.participants.len();
        if !(2..=3).contains(&n) {
            return Err(Error::Config(format!(
                "need 2 or 3 participants (one color each), got {n}"
            )));
        }
        for (i, p) in self.participants.iter().enumerate() {
            if p.color != ColorLabel::ALL[i] {
                return Err(Error::Config(
                    "participants must be listed in color order blue, green, red".into(),
                ));
            }
            if p.name.is_empty() || p.name.contains(char::is_whitespace) {
                return Err(Error::Config(format!("bad participant name '{}'", p.name)));
            }
            if p.name == "unassigned" || p.name.starts_with("unknown-") {
                return Err(Error::Config(format!(
                    "participant name '{}' collides with reserved labels",
                    p.name
                )));
            }
            for (f, _) in &p.signature.components {
                if *f >= self.sample_rate as f64 / 2.0 {
                    return Err(Error::Config("signature frequency above Nyquist".into()));
                }
            }
        }
        let mut names: Vec<&str> = self.participants.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != n {
            return Err(Error::Config("participant names must be distinct".into()));
        }
        let mut seeds: Vec<u64> = self
            .participants
            .iter()
            .flat_map(|p| [p.face_seed, p.voice_seed])
            .collect();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != 2 * n {
            return Err(Error::Config("participant seeds must be distinct".into()));
        }
        let mut bins: Vec<AzimuthBin> = self.participants.iter().map(|p| p.home_bin).collect();
        bins.sort_unstable();
        bins.dedup();
        if bins.len() != n {
            return Err(Error::Config("home bins must be distinct".into()));
        }
        if !(0.0..1.0).contains(&self.detector_miss_rate)
            || !(0.0..=1.0).contains(&self.name_failure_rate)
        {
            return Err(Error::Config("rates out of range".into()));
        }
        if self.azimuth_noise_sigma < 0.0 || !self.azimuth_noise_sigma.is_finite() {
            return Err(Error::Config("azimuth noise sigma must be finite and >= 0".into()));
        }
        if self.ego_noise_snr_db.is_nan() || self.ego_noise_snr_db == f64::NEG_INFINITY {
            return Err(Error::Config("ego noise SNR must be finite or +inf".into()));
        }
        if self.frame_rate <= 0.0 || self.sample_rate == 0 {
            return Err(Error::Config("frame and sample rates must be positive".into()));
        }
        Ok(())
    }

    /// Line-oriented `key = value` scenario file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_str(&text, path)
    }

    fn from_str(text: &str, origin: &Path) -> Result<Self> {
        let mut master_seed = 0u64;
        let mut azimuth_noise_sigma = 5.0;
        let mut detector_miss_rate = 0.1;
        let mut name_failure_rate = 1.0 / 6.0;
        let mut ego_noise_snr_db = 9.0;
        let mut frame_rate = 2.0;
        let mut sample_rate = 16_000u32;
        let mut raw_participants: Vec<(String, ColorLabel, AzimuthBin)> = Vec::new();

        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: String| Error::malformed(origin, format!("line {}: {msg}", lineno + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad("expected key = value".into()))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "master_seed" => {
                    master_seed = value.parse().map_err(|_| bad("bad master_seed".into()))?
                }
                "azimuth_noise_sigma" => {
                    azimuth_noise_sigma = value.parse().map_err(|_| bad("bad sigma".into()))?
                }
                "detector_miss_rate" => {
                    detector_miss_rate = value.parse().map_err(|_| bad("bad miss rate".into()))?
                }
                "name_failure_rate" => {
                    name_failure_rate =
                        value.parse().map_err(|_| bad("bad name failure rate".into()))?
                }
                "ego_noise_snr_db" => {
                    ego_noise_snr_db = if value == "inf" {
                        f64::INFINITY
                    } else {
                        value.parse().map_err(|_| bad("bad snr".into()))?
                    }
                }
                "frame_rate" => {
                    frame_rate = value.parse().map_err(|_| bad("bad frame rate".into()))?
                }
                "sample_rate" => {
                    sample_rate = value.parse().map_err(|_| bad("bad sample rate".into()))?
                }
                "participant" => {
                    let mut fields = value.split_ascii_whitespace();
                    let name = fields.next().ok_or_else(|| bad("missing name".into()))?;
                    let color = fields
                        .next()
                        .ok_or_else(|| bad("missing color".into()))
                        .and_then(ColorLabel::parse)?;
                    let bin = fields
                        .next()
                        .ok_or_else(|| bad("missing home bin".into()))
                        .and_then(AzimuthBin::parse)?;
                    raw_participants.push((name.to_string(), color, bin));
                }
                other => return Err(bad(format!("unknown key '{other}'"))),
            }
        }

        let participants = raw_participants
            .into_iter()
            .enumerate()
            .map(|(i, (name, color, bin))| {
                ParticipantSpec::new(
                    name,
                    color,
                    bin,
                    crate::seeds::substream2(master_seed, 100, i as u64),
                    crate::seeds::substream2(master_seed, 200, i as u64),
                    i,
                    sample_rate,
                )
            })
            .collect();

        let config = ScenarioConfig {
            participants,
            azimuth_noise_sigma,
            detector_miss_rate,
            name_failure_rate,
            ego_noise_snr_db,
            frame_rate,
            sample_rate,
            master_seed,
        };
        config.validate()?;
        Ok(config)
    }

    /// Serializes back to the scenario file format.
    pub fn to_file_format(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "master_seed = {}", self.master_seed);
        let _ = writeln!(out, "azimuth_noise_sigma = {}", self.azimuth_noise_sigma);
        let _ = writeln!(out, "detector_miss_rate = {}", self.detector_miss_rate);
        let _ = writeln!(out, "name_failure_rate = {}", self.name_failure_rate);
        if self.ego_noise_snr_db.is_finite() {
            let _ = writeln!(out, "ego_noise_snr_db = {}", self.ego_noise_snr_db);
        } else {
            let _ = writeln!(out, "ego_noise_snr_db = inf");
        }
        let _ = writeln!(out, "frame_rate = {}", self.frame_rate);
        let _ = writeln!(out, "sample_rate = {}", self.sample_rate);
        for p in &self.participants {
            let _ = writeln!(out, "participant = {} {} {}", p.name, p.color, p.home_bin);
        }
        out
    }
}

/// Synthesizes one face detection for a participant at a given azimuth.
/// Returns `None` with probability `miss_rate`, modeling detector misses.
/// Deterministic in (spec, frame index).
pub fn synth_face(
    spec: &ParticipantSpec,
    frame: u64,
    azimuth_deg: f64,
    miss_rate: f64,
) -> Option<FaceDetection> {
    let mut rng = ChaCha8Rng::seed_from_u64(crate::seeds::substream2(
        spec.face_seed,
        TAG_FACE,
        frame,
    ));
    if rng.random::<f64>() < miss_rate {
        return None;
    }

    let w = (MEAN_FACE_W * (1.0 + rng.random_range(-0.1..0.1))).round().max(4.0);
    let h = (MEAN_FACE_H * (1.0 + rng.random_range(-0.1..0.1))).round().max(4.0);
    let cx = azimuth_to_cx(azimuth_deg) + rng.random_range(-1.0..1.0);
    let cy = spec.appearance.center_y + rng.random_range(-2.0..2.0);

    let x1 = (cx - w / 2.0).max(0.0);
    let y1 = (cy - h / 2.0).max(0.0);
    let x2 = (x1 + w).min(FRAME_WIDTH as f64 - 1.0);
    let y2 = (y1 + h).min(FRAME_HEIGHT as f64 - 1.0);
    let bbox = BoundingBox::new(x1, y1, x2, y2).ok()?;

    let pw = bbox.width().round() as usize;
    let ph = bbox.height().round() as usize;
    let noise = Normal::new(0.0, 8.0).expect("valid sigma");
    let mut pixels = Vec::with_capacity(pw * ph);
    for y in 0..ph {
        for x in 0..pw {
            let u = x as f64 / (pw - 1).max(1) as f64;
            let v = y as f64 / (ph - 1).max(1) as f64;
            let value = spec.appearance.value_at(u, v) + noise.sample(&mut rng);
            pixels.push(value.round().clamp(0.0, 255.0) as u8);
        }
    }
    Some(FaceDetection {
        image: GrayImage::new(pw, ph, pixels).expect("sized buffer"),
        bbox,
    })
}

/// Signature and exactly-scaled noise components of one utterance.
pub fn synth_voice_parts(
    spec: &ParticipantSpec,
    duration_s: f64,
    utterance: u64,
    config: &ScenarioConfig,
) -> (Vec<f64>, Vec<f64>) {
    let n = (duration_s * config.sample_rate as f64).round() as usize;
    let signature: Vec<f64> = (0..n)
        .map(|i| spec.signature.sample(i as f64 / config.sample_rate as f64))
        .collect();

    let noise = if config.ego_noise_snr_db.is_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::seeds::substream2(
            spec.voice_seed,
            TAG_VOICE,
            utterance,
        ));
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let raw: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let p_signal = signature.iter().map(|x| x * x).sum::<f64>() / n as f64;
        let p_noise_target = p_signal * 10f64.powf(-config.ego_noise_snr_db / 10.0);
        let p_raw = raw.iter().map(|x| x * x).sum::<f64>() / n as f64;
        let scale = (p_noise_target / p_raw).sqrt();
        raw.into_iter().map(|x| x * scale).collect()
    } else {
        vec![0.0; n]
    };
    (signature, noise)
}

/// Synthesizes one mono voice segment: the participant's sinusoid signature
/// mixed with white ego-noise at exactly the configured SNR.
pub fn synth_voice(
    spec: &ParticipantSpec,
    duration_s: f64,
    azimuth_deg: f64,
    utterance: u64,
    timestamp: f64,
    config: &ScenarioConfig,
) -> Result<AudioEvent> {
    if duration_s <= 0.0 {
        return Err(Error::Domain("duration must be positive".into()));
    }
    let (signature, noise) = synth_voice_parts(spec, duration_s, utterance, config);
    let samples: Vec<i16> = signature
        .iter()
        .zip(&noise)
        .map(|(s, w)| ((s + w) * i16::MAX as f64).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16)
        .collect();
    AudioEvent::new(samples, 1, config.sample_rate, azimuth_deg, timestamp)
}

/// Pure ego-noise recording at the power the configured SNR implies against
/// the standard signature level; source for the background voice class.
pub fn synth_background(
    seed: u64,
    duration_s: f64,
    config: &ScenarioConfig,
) -> Result<AudioEvent> {
    if duration_s <= 0.0 {
        return Err(Error::Domain("duration must be positive".into()));
    }
    let n = (duration_s * config.sample_rate as f64).round() as usize;
    let p_noise = if config.ego_noise_snr_db.is_finite() {
        SIGNATURE_RMS * SIGNATURE_RMS * 10f64.powf(-config.ego_noise_snr_db / 10.0)
    } else {
        1e-6
    };
    let sigma = p_noise.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("valid sigma");
    let samples: Vec<i16> = (0..n)
        .map(|_| {
            (normal.sample(&mut rng) * i16::MAX as f64)
                .round()
                .clamp(i16::MIN as f64, i16::MAX as f64) as i16
        })
        .collect();
    AudioEvent::new(samples, 1, config.sample_rate, 0.0, 0.0)
}

/// A face detection with its ground-truth sample id attached. The id ties
/// the sample to the ground-truth log; the pipeline must not use
/// `participant` for anything but scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDetection {
    pub face: FaceDetection,
    pub sample_id: u64,
    pub participant: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SensorKind {
    Frame { detections: Vec<SimDetection> },
    Utterance {
        audio: AudioEvent,
        sample_id: u64,
        participant: usize,
    },
    NameSpoken { outcome: NameOutcome },
    Buzzer { bin: AzimuthBin },
    Hotword { yes: bool },
    Timer(TimerId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorItem {
    pub t: f64,
    pub kind: SensorKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorTimeline {
    pub items: Vec<SensorItem>,
    pub duration: f64,
}

/// Maps every emitted sample to its true identity, and fixes the label each
/// participant's data should end up under (their name, or the unknown
/// fallback when the seeded name extraction failed).
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub face_samples: BTreeMap<u64, usize>,
    pub voice_samples: BTreeMap<u64, usize>,
    pub participant_names: Vec<String>,
    pub expected_labels: Vec<String>,
}

impl GroundTruth {
    pub fn export(&self) -> String {
        let mut out = String::new();
        for (i, name) in self.participant_names.iter().enumerate() {
            let _ = writeln!(out, "label {} {}", name, self.expected_labels[i]);
        }
        for (id, p) in &self.face_samples {
            let _ = writeln!(out, "face {} {}", id, self.participant_names[*p]);
        }
        for (id, p) in &self.voice_samples {
            let _ = writeln!(out, "voice {} {}", id, self.participant_names[*p]);
        }
        out
    }
}

/// Piecewise-linear azimuth path.
#[derive(Debug, Clone)]
struct AzimuthPath {
    keyframes: Vec<(f64, f64)>,
}

impl AzimuthPath {
    fn constant(az: f64) -> Self {
        AzimuthPath {
            keyframes: vec![(0.0, az)],
        }
    }

    fn move_to(&mut self, start: f64, end: f64, target_az: f64) {
        let from = self.at(start);
        self.keyframes.push((start, from));
        self.keyframes.push((end, target_az));
    }

    fn at(&self, t: f64) -> f64 {
        let kf = &self.keyframes;
        if t <= kf[0].0 {
            return kf[0].1;
        }
        for pair in kf.windows(2) {
            let (t0, a0) = pair[0];
            let (t1, a1) = pair[1];
            if t <= t1 {
                if t1 - t0 < 1e-12 {
                    return a1;
                }
                return a0 + (a1 - a0) * (t - t0) / (t1 - t0);
            }
        }
        kf.last().unwrap().1
    }
}

fn arrival_azimuths(n: usize) -> Vec<f64> {
    match n {
        2 => vec![-85.0, -60.0],
        _ => vec![-85.0, -64.0, -43.0],
    }
}

/// Generates the full session timeline and its ground-truth log.
pub fn run_scenario(
    config: &ScenarioConfig,
    game: &GameConfig,
) -> Result<(SensorTimeline, GroundTruth)> {
    config.validate()?;
    game.validate()?;

    let n = config.participants.len();
    let colors: Vec<ColorLabel> = config.participants.iter().map(|p| p.color).collect();
    let order = turn_order(game.turn_order_seed, &colors);
    let idx_of_color =
        |color: ColorLabel| config.participants.iter().position(|p| p.color == color).unwrap();

    let arrivals = arrival_azimuths(n);
    let mut paths: Vec<AzimuthPath> =
        arrivals.iter().map(|&az| AzimuthPath::constant(az)).collect();

    let mut events: Vec<SensorItem> = Vec::new();
    let mut voice_truth = BTreeMap::new();
    let mut next_sample = 1u64;
    let mut utterances = vec![0u64; n];

    let mut name_rng =
        ChaCha8Rng::seed_from_u64(crate::seeds::substream(config.master_seed, TAG_NAMES));
    let expected_labels: Vec<String> = config
        .participants
        .iter()
        .map(|p| {
            if name_rng.random::<f64>() < config.name_failure_rate {
                format!("unknown-{}", p.color)
            } else {
                p.name.clone()
            }
        })
        .collect();

    let mut game_rng =
        ChaCha8Rng::seed_from_u64(crate::seeds::substream(config.master_seed, TAG_GAME));

    let mut speak = |events: &mut Vec<SensorItem>,
                     voice_truth: &mut BTreeMap<u64, usize>,
                     utterances: &mut Vec<u64>,
                     next_sample: &mut u64,
                     paths: &[AzimuthPath],
                     p: usize,
                     t: f64|
     -> Result<()> {
        let audio = synth_voice(
            &config.participants[p],
            1.0,
            paths[p].at(t),
            utterances[p],
            t,
            config,
        )?;
        utterances[p] += 1;
        let sample_id = *next_sample;
        *next_sample += 1;
        voice_truth.insert(sample_id, p);
        events.push(SensorItem {
            t,
            kind: SensorKind::Utterance {
                audio,
                sample_id,
                participant: p,
            },
        });
        Ok(())
    };

    // Arrival: the group calls for attention from the left region.
    speak(
        &mut events,
        &mut voice_truth,
        &mut utterances,
        &mut next_sample,
        &paths,
        0,
        0.5,
    )?;

    // Positioning invitations, one player at a time in turn order.
    let mut t = 6.0;
    for &color in &order {
        let p = idx_of_color(color);
        let home_az = config.participants[p].home_bin.center_deg();
        let from = paths[p].at(t);
        let move_dur = (home_az - from).abs() / MOVE_DEG_PER_SEC;
        paths[p].move_to(t + REACT_SECONDS, t + REACT_SECONDS + move_dur, home_az);
        t += REACT_SECONDS + move_dur + SETTLE_SECONDS;
    }

    // Presentations in turn order, one timer per presenter.
    t += 1.0;
    for &color in &order {
        let p = idx_of_color(color);
        let window = game.presentation_seconds;
        for j in 0..window.floor() as usize {
            speak(
                &mut events,
                &mut voice_truth,
                &mut utterances,
                &mut next_sample,
                &paths,
                p,
                t + 0.5 + j as f64,
            )?;
        }
        events.push(SensorItem {
            t: t + 6.25,
            kind: SensorKind::NameSpoken {
                outcome: if expected_labels[p] == config.participants[p].name {
                    NameOutcome::Recognized(config.participants[p].name.clone())
                } else {
                    NameOutcome::Failed
                },
            },
        });
        events.push(SensorItem {
            t: t + window + 0.75,
            kind: SensorKind::Timer(TimerId::Presentation),
        });
        t += window + 1.0;
    }

    // Rounds: describe, time out, buzz, answer, verify.
    let rounds = game.cards_per_player * n as u32;
    for _round in 1..=rounds {
        let describer = order[((_round - 1) as usize) % n];
        let d = idx_of_color(describer);
        let others: Vec<usize> = (0..n).filter(|&p| p != d).collect();
        let guesser = others[game_rng.random_range(0..others.len())];
        let window = game.description_seconds;

        for j in 0..window.floor() as usize {
            speak(
                &mut events,
                &mut voice_truth,
                &mut utterances,
                &mut next_sample,
                &paths,
                d,
                t + 0.5 + j as f64,
            )?;
        }
        events.push(SensorItem {
            t: t + window + 1.0,
            kind: SensorKind::Timer(TimerId::Description),
        });
        events.push(SensorItem {
            t: t + window + 2.0,
            kind: SensorKind::Buzzer {
                bin: config.participants[guesser].home_bin,
            },
        });
        speak(
            &mut events,
            &mut voice_truth,
            &mut utterances,
            &mut next_sample,
            &paths,
            guesser,
            t + window + 3.0,
        )?;
        events.push(SensorItem {
            t: t + window + 4.5,
            kind: SensorKind::Hotword {
                yes: game_rng.random::<f64>() < 0.5,
            },
        });
        t += window + 6.0;
    }
    let duration = t + 2.0;

    // Camera frames across the whole session.
    let mut face_truth = BTreeMap::new();
    let mut items: Vec<SensorItem> = Vec::new();
    let n_frames = (duration * config.frame_rate).floor() as u64;
    for k in 0..=n_frames {
        let ft = k as f64 / config.frame_rate;
        let mut detections = Vec::new();
        for (p, spec) in config.participants.iter().enumerate() {
            if let Some(face) = synth_face(spec, k, paths[p].at(ft), config.detector_miss_rate) {
                let sample_id = next_sample;
                next_sample += 1;
                face_truth.insert(sample_id, p);
                detections.push(SimDetection {
                    face,
                    sample_id,
                    participant: p,
                });
            }
        }
        items.push(SensorItem {
            t: ft,
            kind: SensorKind::Frame { detections },
        });
    }

    items.extend(events);
    items.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());

    let truth = GroundTruth {
        face_samples: face_truth,
        voice_samples: voice_truth,
        participant_names: config.participants.iter().map(|p| p.name.clone()).collect(),
        expected_labels,
    };
    Ok((SensorTimeline { items, duration }, truth))
}
