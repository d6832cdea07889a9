//! The data collector: files face and voice samples under the identity the
//! memory system resolves for them, quarantines what it cannot resolve, and
//! writes the structured on-disk dataset.
//!
//! Samples are keyed internally by track id; the exported directory name is
//! the slot's final label at write time, so data gathered under a color
//! label ends up under the name learned later. Nothing is ever dropped
//! silently: what cannot be attributed goes to the `unassigned` record.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::pgm::{self, GrayImage};
use crate::io::wav::{self, PcmAudio};
use crate::memory::{Occupancy, SpatialMemory};
use crate::mot::BoundingBox;
use crate::sim::FaceDetection;
use crate::sls::{AzimuthBin, AudioEvent};

/// Smallest voice segment worth keeping, seconds.
pub const MIN_VOICE_SECONDS: f64 = 0.1;
/// Label for quarantined samples.
pub const UNASSIGNED_LABEL: &str = "unassigned";

#[derive(Debug, Clone, PartialEq)]
pub struct StoredFace {
    pub image: GrayImage,
    pub bbox: BoundingBox,
    pub sample_id: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredVoice {
    pub audio: PcmAudio,
    pub sample_id: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleBuffer {
    pub faces: Vec<StoredFace>,
    pub voices: Vec<StoredVoice>,
}

/// Intake and storage counters; `in = stored + quarantined` always.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CollectorStats {
    pub faces_in: usize,
    pub faces_stored: usize,
    pub faces_quarantined: usize,
    pub voices_in: usize,
    pub voices_stored: usize,
    pub voices_quarantined: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Collector {
    by_track: BTreeMap<u64, SampleBuffer>,
    quarantine: SampleBuffer,
    stats: CollectorStats,
}

impl Collector {
    pub fn new() -> Self {
        Collector::default()
    }

    pub fn stats(&self) -> CollectorStats {
        self.stats
    }

    pub fn quarantine(&self) -> &SampleBuffer {
        &self.quarantine
    }

    pub fn tracks(&self) -> impl Iterator<Item = (u64, &SampleBuffer)> {
        self.by_track.iter().map(|(id, buf)| (*id, buf))
    }

    /// Files a face under the person its source track resolves to, or
    /// quarantines it when the track is not bound in memory.
    pub fn collect_face(
        &mut self,
        face: FaceDetection,
        source_track: u64,
        memory: &SpatialMemory,
        sample_id: u64,
    ) {
        self.stats.faces_in += 1;
        let stored = StoredFace {
            image: face.image,
            bbox: face.bbox,
            sample_id,
        };
        if memory.find(source_track).is_some() {
            self.by_track.entry(source_track).or_default().faces.push(stored);
            self.stats.faces_stored += 1;
        } else {
            self.quarantine.faces.push(stored);
            self.stats.faces_quarantined += 1;
        }
    }

    /// Files a voice segment under the unique occupant of the gazed bin;
    /// empty or ambiguous bins, or segments below the minimum duration,
    /// go to quarantine.
    pub fn collect_voice(
        &mut self,
        event: &AudioEvent,
        bin: AzimuthBin,
        memory: &SpatialMemory,
        sample_id: u64,
    ) {
        self.stats.voices_in += 1;
        let stored = StoredVoice {
            audio: PcmAudio {
                samples: event.samples().to_vec(),
                channels: event.channels(),
                sample_rate: event.sample_rate(),
            },
            sample_id,
        };
        let resolvable = event.duration() >= MIN_VOICE_SECONDS;
        match (resolvable, memory.identity_at(bin)) {
            (true, Occupancy::Unique(slot)) => {
                self.by_track
                    .entry(slot.track_id)
                    .or_default()
                    .voices
                    .push(stored);
                self.stats.voices_stored += 1;
            }
            _ => {
                self.quarantine.voices.push(stored);
                self.stats.voices_quarantined += 1;
            }
        }
    }

    /// Stored samples with the labels their tracks resolve to now.
    pub fn labeled_samples(
        &self,
        memory: &SpatialMemory,
    ) -> (Vec<(u64, String)>, Vec<(u64, String)>) {
        let mut faces = Vec::new();
        let mut voices = Vec::new();
        for (track, buffer) in &self.by_track {
            let label = final_label(*track, memory);
            for f in &buffer.faces {
                faces.push((f.sample_id, label.clone()));
            }
            for v in &buffer.voices {
                voices.push((v.sample_id, label.clone()));
            }
        }
        (faces, voices)
    }

    /// Resolves every buffer to its final label and merges into records,
    /// sorted by label. Quarantined samples become the `unassigned` record.
    pub fn records(&self, memory: &SpatialMemory) -> Vec<PersonRecord> {
        let mut by_label: BTreeMap<String, PersonRecord> = BTreeMap::new();
        for (track, buffer) in &self.by_track {
            let label = final_label(*track, memory);
            let record = by_label
                .entry(label.clone())
                .or_insert_with(|| PersonRecord::empty(label));
            record.absorb(buffer);
        }
        if !self.quarantine.faces.is_empty() || !self.quarantine.voices.is_empty() {
            let record = by_label
                .entry(UNASSIGNED_LABEL.to_string())
                .or_insert_with(|| PersonRecord::empty(UNASSIGNED_LABEL.to_string()));
            record.absorb(&self.quarantine);
        }
        by_label.into_values().collect()
    }
}

fn final_label(track: u64, memory: &SpatialMemory) -> String {
    memory
        .find(track)
        .map(|(_, slot)| slot.label())
        .unwrap_or_else(|| UNASSIGNED_LABEL.to_string())
}

/// One identity's accumulated samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonRecord {
    pub label: String,
    pub faces: Vec<(GrayImage, BoundingBox)>,
    pub voices: Vec<PcmAudio>,
}

impl PersonRecord {
    pub fn empty(label: String) -> Self {
        PersonRecord {
            label,
            faces: Vec::new(),
            voices: Vec::new(),
        }
    }

    fn absorb(&mut self, buffer: &SampleBuffer) {
        for f in &buffer.faces {
            self.faces.push((f.image.clone(), f.bbox));
        }
        for v in &buffer.voices {
            self.voices.push(v.audio.clone());
        }
    }

    pub fn voice_seconds(&self) -> f64 {
        self.voices.iter().map(PcmAudio::duration).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub label: String,
    pub n_faces: usize,
    pub voice_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub session_id: String,
    pub rows: Vec<ManifestRow>,
}

impl DatasetManifest {
    fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# session {}", self.session_id);
        let _ = writeln!(out, "# generator egomem {}", env!("CARGO_PKG_VERSION"));
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{:.3}",
                row.label, row.n_faces, row.voice_seconds
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub records: Vec<PersonRecord>,
}

/// Writes records as `<out>/<label>/faces/NNNN.pgm` + `faces.idx`,
/// `<out>/<label>/voices/NNNN.wav`, and `<out>/manifest.txt`.
pub fn write_dataset(
    records: &[PersonRecord],
    session_id: &str,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    let mut labels: Vec<&str> = records.iter().map(|r| r.label.as_str()).collect();
    labels.sort_unstable();
    labels.dedup();
    if labels.len() != records.len() {
        return Err(Error::Consistency("record labels must be unique".into()));
    }

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut rows = Vec::with_capacity(records.len());

    let mut sorted: Vec<&PersonRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.label.cmp(&b.label));

    for record in sorted {
        if record.label.is_empty() {
            return Err(Error::Consistency("empty record label".into()));
        }
        let label_dir = out_dir.join(&record.label);
        let faces_dir = label_dir.join("faces");
        let voices_dir = label_dir.join("voices");
        fs::create_dir_all(&faces_dir).map_err(|e| Error::io(&faces_dir, e))?;
        fs::create_dir_all(&voices_dir).map_err(|e| Error::io(&voices_dir, e))?;

        let mut idx = String::new();
        for (i, (image, bbox)) in record.faces.iter().enumerate() {
            let file = format!("{i:04}.pgm");
            pgm::write(&faces_dir.join(&file), image)?;
            let _ = writeln!(
                idx,
                "{file} {} {} {} {}",
                bbox.x1(),
                bbox.y1(),
                bbox.x2(),
                bbox.y2()
            );
        }
        let idx_path = label_dir.join("faces.idx");
        fs::write(&idx_path, idx).map_err(|e| Error::io(&idx_path, e))?;

        for (i, audio) in record.voices.iter().enumerate() {
            let file = format!("{i:04}.wav");
            wav::write(&voices_dir.join(&file), audio)?;
        }

        rows.push(ManifestRow {
            label: record.label.clone(),
            n_faces: record.faces.len(),
            voice_seconds: record.voice_seconds(),
        });
    }

    let manifest = DatasetManifest {
        session_id: session_id.to_string(),
        rows,
    };
    let manifest_path = out_dir.join("manifest.txt");
    fs::write(&manifest_path, manifest.render()).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest)
}

/// Reads a dataset back; the returned records reproduce what was written,
/// and the manifest is verified against the on-disk content.
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join("manifest.txt");
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;

    let mut session_id = String::new();
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# session ") {
            session_id = rest.to_string();
            continue;
        }
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let bad = || Error::malformed(&manifest_path, format!("bad row '{line}'"));
        let label = fields.next().ok_or_else(bad)?.to_string();
        let n_faces: usize = fields.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let voice_seconds: f64 = fields.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        rows.push(ManifestRow {
            label,
            n_faces,
            voice_seconds,
        });
    }

    let mut records = Vec::with_capacity(rows.len());
    for row in &rows {
        let label_dir = dir.join(&row.label);
        let faces_dir = label_dir.join("faces");
        let idx_path = label_dir.join("faces.idx");
        let idx = fs::read_to_string(&idx_path).map_err(|e| Error::io(&idx_path, e))?;

        let mut faces = Vec::new();
        for line in idx.lines() {
            let mut fields = line.split_ascii_whitespace();
            let bad = || Error::malformed(&idx_path, format!("bad line '{line}'"));
            let file = fields.next().ok_or_else(bad)?;
            let coords: Vec<f64> = fields
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad())?;
            if coords.len() != 4 {
                return Err(bad());
            }
            let image = pgm::read(&faces_dir.join(file))?;
            let bbox = BoundingBox::new(coords[0], coords[1], coords[2], coords[3])?;
            faces.push((image, bbox));
        }

        let voices_dir = label_dir.join("voices");
        let mut voices = Vec::new();
        for i in 0.. {
            let path = voices_dir.join(format!("{i:04}.wav"));
            if !path.exists() {
                break;
            }
            voices.push(wav::read(&path)?);
        }

        let record = PersonRecord {
            label: row.label.clone(),
            faces,
            voices,
        };
        if record.faces.len() != row.n_faces
            || (record.voice_seconds() - row.voice_seconds).abs() > 5e-4
        {
            return Err(Error::malformed(
                &manifest_path,
                format!("manifest row '{}' does not match on-disk content", row.label),
            ));
        }
        records.push(record);
    }

    Ok(Dataset {
        manifest: DatasetManifest { session_id, rows },
        records,
    })
}
