//! Multi-object face tracking: one constant-velocity Kalman filter per face
//! with Hungarian data association on IoU cost, so each participant keeps a
//! persistent track id for the whole session.

mod bbox;
pub mod hungarian;
mod kalman;

pub use bbox::{iou, BoundingBox};
pub use hungarian::hungarian_assign;
pub use kalman::{Covariance, KalmanBoxFilter, StateVector};

use crate::error::Result;
use crate::matrix::Matrix;

/// Association and lifecycle parameters.
#[derive(Debug, Clone)]
pub struct TrackerParams {
    /// Minimum IoU for a track/detection pair to count as a match.
    pub iou_gate: f64,
    /// Consecutive unmatched frames before a track is dropped.
    pub max_misses: u32,
    /// Matched updates before a track counts as confirmed.
    pub min_hits: u32,
    pub process_noise: f64,
    pub measurement_noise: f64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        TrackerParams {
            iou_gate: 0.3,
            max_misses: 5,
            min_hits: 3,
            process_noise: 1.0,
            measurement_noise: 1.0,
        }
    }
}

impl TrackerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_gate > 0.0 && self.iou_gate < 1.0) {
            return Err(crate::error::Error::Config(
                "iou_gate must lie in (0, 1)".into(),
            ));
        }
        if self.max_misses < 1 || self.min_hits < 1 {
            return Err(crate::error::Error::Config(
                "max_misses and min_hits must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One tracked face: filter state plus lifecycle counters.
#[derive(Debug, Clone)]
pub struct Track {
    id: u64,
    filter: KalmanBoxFilter,
    hits: u32,
    age: u32,
    misses: u32,
}

impl Track {
    fn new(id: u64, detection: &BoundingBox) -> Self {
        Track {
            id,
            filter: KalmanBoxFilter::from_detection(detection),
            hits: 1,
            age: 0,
            misses: 0,
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn bbox(&self) -> BoundingBox {
        self.filter.bbox()
    }

    pub fn state(&self) -> &StateVector {
        self.filter.state()
    }

    pub fn covariance(&self) -> &Covariance {
        self.filter.covariance()
    }

    pub fn hits(&self) -> u32 {
        self.hits
    }

    pub fn age(&self) -> u32 {
        self.age
    }

    pub fn misses(&self) -> u32 {
        self.misses
    }

    pub fn is_confirmed(&self, params: &TrackerParams) -> bool {
        self.hits >= params.min_hits
    }

    /// Advances the motion model one frame: state moves by its velocities,
    /// covariance grows by process noise, age increments.
    pub fn predict(&mut self, params: &TrackerParams) {
        self.filter.predict(params);
        self.age += 1;
    }

    pub fn update(&mut self, detection: &BoundingBox, params: &TrackerParams) {
        self.filter.update(detection, params);
        self.hits += 1;
        self.misses = 0;
    }
}

/// Outcome of one tracker step.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrackerUpdate {
    /// (track id, detection index) pairs accepted by the IoU gate.
    pub matched: Vec<(u64, usize)>,
    pub new_track_ids: Vec<u64>,
    pub removed_track_ids: Vec<u64>,
}

/// Owns the live track set and allocates ids; ids are never reused
/// within one tracker instance.
#[derive(Debug, Clone)]
pub struct Tracker {
    params: TrackerParams,
    tracks: Vec<Track>,
    next_id: u64,
}

impl Tracker {
    pub fn new(params: TrackerParams) -> Result<Self> {
        params.validate()?;
        Ok(Tracker {
            params,
            tracks: Vec::new(),
            next_id: 1,
        })
    }

    pub fn params(&self) -> &TrackerParams {
        &self.params
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn track(&self, id: u64) -> Option<&Track> {
        self.tracks.iter().find(|t| t.id == id)
    }

    /// Runs one frame: predict all tracks, associate detections by maximum
    /// IoU (Hungarian on cost 1 - IoU), update matches, spawn tracks for
    /// unmatched detections, drop tracks that exceeded `max_misses`.
    pub fn step(&mut self, detections: &[BoundingBox]) -> TrackerUpdate {
        for track in &mut self.tracks {
            track.predict(&self.params);
        }

        let mut update = TrackerUpdate::default();
        let mut det_matched = vec![false; detections.len()];
        let mut track_matched = vec![false; self.tracks.len()];

        if !self.tracks.is_empty() && !detections.is_empty() {
            let mut cost = Matrix::zeros(self.tracks.len(), detections.len());
            for (ti, track) in self.tracks.iter().enumerate() {
                let tb = track.bbox();
                for (di, det) in detections.iter().enumerate() {
                    cost.set(ti, di, 1.0 - iou(&tb, det));
                }
            }
            let pairs = hungarian_assign(&cost).expect("IoU costs are finite");
            for (ti, di) in pairs {
                if 1.0 - cost.get(ti, di) < self.params.iou_gate {
                    continue;
                }
                self.tracks[ti].update(&detections[di], &self.params);
                update.matched.push((self.tracks[ti].id, di));
                det_matched[di] = true;
                track_matched[ti] = true;
            }
        }

        for (ti, track) in self.tracks.iter_mut().enumerate() {
            if !track_matched[ti] {
                track.misses += 1;
            }
        }

        for (di, det) in detections.iter().enumerate() {
            if !det_matched[di] {
                let track = Track::new(self.next_id, det);
                update.new_track_ids.push(track.id);
                self.next_id += 1;
                self.tracks.push(track);
            }
        }

        let max_misses = self.params.max_misses;
        let removed: Vec<u64> = self
            .tracks
            .iter()
            .filter(|t| t.misses > max_misses)
            .map(|t| t.id)
            .collect();
        self.tracks.retain(|t| t.misses <= max_misses);
        update.removed_track_ids = removed;
        update
    }
}
