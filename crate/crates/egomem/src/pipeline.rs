//! Session driver: feeds the simulated sensor timeline through the
//! perception stack (tracker, sound localization), the game supervisor, and
//! the data collector, producing the dataset, the trace, and accuracy
//! figures against the simulator's ground truth.
//!
//! Perception-derived events follow two stability rules. A track reports
//! `PositionStable` after `STABLE_FRAMES` calm frames following a movement
//! episode. During the welcome, binding waits until every expected face is
//! simultaneously stable and then reports them left to right, so detector
//! dropouts cannot reorder the color assignment. Face storage is sampled at
//! most once per simulated second per person.

use std::collections::BTreeMap;

use crate::collector::{Collector, CollectorStats, PersonRecord};
use crate::error::{Error, Result};
use crate::game::{
    advance, CollectTarget, Effect, GameConfig, GameEvent, GameEventKind, GameState, GameTrace,
    TraceStep,
};
use crate::memory::SpatialMemory;
use crate::mot::{Tracker, TrackerParams};
use crate::seeds::substream;
use crate::sim::{
    cx_to_azimuth, run_scenario, GroundTruth, ScenarioConfig, SensorKind, SimDetection,
};
use crate::sls::{bin_azimuth, AzimuthBin, AzimuthEstimator, NoisyOracleEstimator};

/// Calm frames required before a track counts as position-stable.
const STABLE_FRAMES: u32 = 4;
/// Horizontal speed (px/frame) above which a track counts as moving.
const MOVING_SPEED: f64 = 4.0;
/// Horizontal speed below which a frame counts as calm.
const CALM_SPEED: f64 = 2.0;

const TAG_SLS: u64 = 0x55;

#[derive(Debug, Default, Clone)]
struct TrackMotion {
    calm_frames: u32,
    reported: bool,
}

/// Everything a finished session produces.
#[derive(Debug, Clone)]
pub struct SessionOutcome {
    pub trace: GameTrace,
    pub records: Vec<PersonRecord>,
    pub stats: CollectorStats,
    pub accuracy: LabelAccuracy,
    pub per_participant: Vec<ParticipantTotals>,
    pub ground_truth: GroundTruth,
    pub session_id: String,
}

/// Stored-sample label correctness against ground truth.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LabelAccuracy {
    pub faces_correct: usize,
    pub faces_total: usize,
    pub voices_correct: usize,
    pub voices_total: usize,
}

impl LabelAccuracy {
    pub fn face_rate(&self) -> Option<f64> {
        (self.faces_total > 0).then(|| self.faces_correct as f64 / self.faces_total as f64)
    }

    pub fn voice_rate(&self) -> Option<f64> {
        (self.voices_total > 0).then(|| self.voices_correct as f64 / self.voices_total as f64)
    }
}

/// Collected volume filed under one participant's final label.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantTotals {
    pub name: String,
    pub expected_label: String,
    pub faces: usize,
    pub voice_seconds: f64,
}

/// Runs one full simulated session.
pub fn run_session(scenario: &ScenarioConfig, game: &GameConfig) -> Result<SessionOutcome> {
    let (timeline, truth) = run_scenario(scenario, game)?;

    let mut tracker = Tracker::new(TrackerParams::default())?;
    let mut estimator = NoisyOracleEstimator::new(
        scenario.azimuth_noise_sigma,
        substream(scenario.master_seed, TAG_SLS),
    );
    let mut memory = SpatialMemory::new();
    let mut collector = Collector::new();
    let mut state = GameState::Idle;
    let mut steps: Vec<TraceStep> = Vec::new();

    let mut motion: BTreeMap<u64, TrackMotion> = BTreeMap::new();
    let mut current_frame: BTreeMap<u64, SimDetection> = BTreeMap::new();
    let mut face_last_second: BTreeMap<u64, i64> = BTreeMap::new();
    let mut count_history: Vec<usize> = Vec::new();
    let mut welcome_count_sent = false;

    let mut dispatch = |t: f64,
                        kind: GameEventKind,
                        state: &mut GameState,
                        memory: &mut SpatialMemory,
                        collector: &mut Collector,
                        current_frame: &BTreeMap<u64, SimDetection>,
                        face_last_second: &mut BTreeMap<u64, i64>,
                        steps: &mut Vec<TraceStep>,
                        audio_ctx: Option<(&crate::sls::AudioEvent, AzimuthBin, u64)>|
     -> Result<()> {
        let event = GameEvent::new(t, kind);
        let (next, effects) = advance(state, &event, memory, game);
        for effect in &effects {
            match effect {
                Effect::UpdateMemory(op) => op.apply(memory)?,
                Effect::CollectVoice(_) => {
                    if let Some((audio, bin, sample_id)) = audio_ctx {
                        collector.collect_voice(audio, bin, memory, sample_id);
                    }
                }
                Effect::CollectFace(target) => {
                    collect_face_sample(
                        t,
                        target,
                        memory,
                        collector,
                        current_frame,
                        face_last_second,
                    );
                }
                _ => {}
            }
        }
        steps.push(TraceStep {
            t,
            state: state.clone(),
            event: event.kind,
            effects,
            next: next.clone(),
        });
        *state = next;
        Ok(())
    };

    for item in &timeline.items {
        if state == GameState::GameEnd {
            break;
        }
        match &item.kind {
            SensorKind::Frame { detections } => {
                let boxes: Vec<_> = detections.iter().map(|d| d.face.bbox).collect();
                let update = tracker.step(&boxes);

                // detection index -> track id (matched plus newborn in order)
                let mut det_track: Vec<Option<u64>> = vec![None; boxes.len()];
                for (tid, di) in &update.matched {
                    det_track[*di] = Some(*tid);
                }
                let unmatched: Vec<usize> =
                    (0..boxes.len()).filter(|&i| det_track[i].is_none()).collect();
                for (tid, di) in update.new_track_ids.iter().zip(unmatched) {
                    det_track[di] = Some(*tid);
                }

                current_frame.clear();
                for (i, det) in detections.iter().enumerate() {
                    if let Some(tid) = det_track[i] {
                        current_frame.insert(tid, det.clone());
                    }
                }

                let live: Vec<u64> = tracker.tracks().iter().map(|t| t.id()).collect();
                motion.retain(|id, _| live.contains(id));
                for track in tracker.tracks() {
                    let m = motion.entry(track.id()).or_default();
                    let speed = track.state()[4].abs();
                    if speed >= MOVING_SPEED {
                        m.calm_frames = 0;
                        m.reported = false;
                    } else if speed < CALM_SPEED {
                        m.calm_frames += 1;
                    } else {
                        m.calm_frames = 0;
                    }
                }

                let mut events: Vec<GameEventKind> = Vec::new();
                match &state {
                    GameState::Welcome {
                        expected_players: None,
                    } => {
                        let confirmed = tracker
                            .tracks()
                            .iter()
                            .filter(|t| t.is_confirmed(tracker.params()))
                            .count();
                        count_history.push(confirmed);
                        let window = STABLE_FRAMES as usize;
                        if !welcome_count_sent
                            && confirmed >= 1
                            && count_history.len() >= window
                            && count_history[count_history.len() - window..]
                                .iter()
                                .all(|&c| c == confirmed)
                        {
                            events.push(GameEventKind::FacesDetected(confirmed));
                            welcome_count_sent = true;
                        }
                    }
                    GameState::Welcome {
                        expected_players: Some(expected),
                    } => {
                        // Bind everyone at once, left to right, so detector
                        // dropouts cannot scramble the color order.
                        let mut stable: Vec<u64> = tracker
                            .tracks()
                            .iter()
                            .filter(|t| {
                                t.is_confirmed(tracker.params())
                                    && motion
                                        .get(&t.id())
                                        .map_or(false, |m| !m.reported && m.calm_frames >= STABLE_FRAMES)
                            })
                            .map(|t| t.id())
                            .collect();
                        if stable.len() >= *expected {
                            stable.sort_by(|a, b| {
                                let cx = |id: &u64| tracker.track(*id).unwrap().state()[0];
                                cx(a).partial_cmp(&cx(b)).unwrap()
                            });
                            for id in stable {
                                let track = tracker.track(id).unwrap();
                                let bin = bin_azimuth(cx_to_azimuth(track.state()[0]))?;
                                motion.get_mut(&id).unwrap().reported = true;
                                events.push(GameEventKind::PositionStable { track_id: id, bin });
                            }
                        }
                    }
                    _ => {
                        events.push(GameEventKind::FacesDetected(detections.len()));
                        for track in tracker.tracks() {
                            let id = track.id();
                            let stable = motion
                                .get(&id)
                                .map_or(false, |m| !m.reported && m.calm_frames >= STABLE_FRAMES);
                            if stable && track.is_confirmed(tracker.params()) {
                                let bin = bin_azimuth(cx_to_azimuth(track.state()[0]))?;
                                motion.get_mut(&id).unwrap().reported = true;
                                events.push(GameEventKind::PositionStable { track_id: id, bin });
                            }
                        }
                    }
                }

                for kind in events {
                    dispatch(
                        item.t,
                        kind,
                        &mut state,
                        &mut memory,
                        &mut collector,
                        &current_frame,
                        &mut face_last_second,
                        &mut steps,
                        None,
                    )?;
                }
            }

            SensorKind::Utterance {
                audio, sample_id, ..
            } => {
                let azimuth = estimator.estimate_azimuth(audio)?;
                let bin = bin_azimuth(azimuth)?;
                dispatch(
                    item.t,
                    GameEventKind::SoundDetected(bin),
                    &mut state,
                    &mut memory,
                    &mut collector,
                    &current_frame,
                    &mut face_last_second,
                    &mut steps,
                    Some((audio, bin, *sample_id)),
                )?;
            }

            SensorKind::NameSpoken { outcome } => {
                // The extraction service reports a name for whoever is
                // presenting; attribute it to the presenter's track.
                let track_id = match &state {
                    GameState::PlayersPresentation { current } => memory
                        .find_by_color(*current)
                        .map(|(_, slot)| slot.track_id)
                        .unwrap_or(0),
                    _ => 0,
                };
                dispatch(
                    item.t,
                    GameEventKind::NamePresented {
                        track_id,
                        outcome: outcome.clone(),
                    },
                    &mut state,
                    &mut memory,
                    &mut collector,
                    &current_frame,
                    &mut face_last_second,
                    &mut steps,
                    None,
                )?;
            }

            SensorKind::Buzzer { bin } => dispatch(
                item.t,
                GameEventKind::BuzzerCall(*bin),
                &mut state,
                &mut memory,
                &mut collector,
                &current_frame,
                &mut face_last_second,
                &mut steps,
                None,
            )?,

            SensorKind::Hotword { yes } => dispatch(
                item.t,
                GameEventKind::HotWord(*yes),
                &mut state,
                &mut memory,
                &mut collector,
                &current_frame,
                &mut face_last_second,
                &mut steps,
                None,
            )?,

            SensorKind::Timer(id) => dispatch(
                item.t,
                GameEventKind::TimerElapsed(*id),
                &mut state,
                &mut memory,
                &mut collector,
                &current_frame,
                &mut face_last_second,
                &mut steps,
                None,
            )?,
        }
    }

    let complete = state == GameState::GameEnd;
    let trace = GameTrace {
        steps,
        final_state: state,
        final_memory: memory.clone(),
        complete,
    };

    let accuracy = score_labels(&collector, &memory, &truth);
    let records = collector.records(&memory);
    let per_participant = participant_totals(&records, &truth);

    Ok(SessionOutcome {
        trace,
        records,
        stats: collector.stats(),
        accuracy,
        per_participant,
        ground_truth: truth,
        session_id: format!("session-{:016x}", scenario.master_seed),
    })
}

/// Fetches the current-frame detection of the track the target label
/// resolves to and stores it, at most once per simulated second per track.
fn collect_face_sample(
    t: f64,
    target: &CollectTarget,
    memory: &SpatialMemory,
    collector: &mut Collector,
    current_frame: &BTreeMap<u64, SimDetection>,
    face_last_second: &mut BTreeMap<u64, i64>,
) {
    let CollectTarget::Resolved(label) = target else {
        return;
    };
    let Some(track_id) = memory
        .slots()
        .find(|(_, slot)| slot.label() == *label)
        .map(|(_, slot)| slot.track_id)
    else {
        return;
    };
    let second = t.floor() as i64;
    if face_last_second.get(&track_id).is_some_and(|&s| s >= second) {
        return;
    }
    let Some(det) = current_frame.get(&track_id) else {
        return;
    };
    collector.collect_face(det.face.clone(), track_id, memory, det.sample_id);
    face_last_second.insert(track_id, second);
}

fn score_labels(
    collector: &Collector,
    memory: &SpatialMemory,
    truth: &GroundTruth,
) -> LabelAccuracy {
    let (faces, voices) = collector.labeled_samples(memory);
    let mut acc = LabelAccuracy::default();
    for (sample_id, label) in faces {
        acc.faces_total += 1;
        if truth
            .face_samples
            .get(&sample_id)
            .is_some_and(|&p| truth.expected_labels[p] == label)
        {
            acc.faces_correct += 1;
        }
    }
    for (sample_id, label) in voices {
        acc.voices_total += 1;
        if truth
            .voice_samples
            .get(&sample_id)
            .is_some_and(|&p| truth.expected_labels[p] == label)
        {
            acc.voices_correct += 1;
        }
    }
    acc
}

fn participant_totals(records: &[PersonRecord], truth: &GroundTruth) -> Vec<ParticipantTotals> {
    truth
        .participant_names
        .iter()
        .zip(&truth.expected_labels)
        .map(|(name, label)| {
            let record = records.iter().find(|r| &r.label == label);
            ParticipantTotals {
                name: name.clone(),
                expected_label: label.clone(),
                faces: record.map_or(0, |r| r.faces.len()),
                voice_seconds: record.map_or(0.0, |r| r.voice_seconds()),
            }
        })
        .collect()
}

/// Human-readable session summary for the CLI.
pub fn render_summary(outcome: &SessionOutcome) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "session {}", outcome.session_id);
    let _ = writeln!(
        out,
        "final state: {} ({})",
        outcome.trace.final_state,
        if outcome.trace.complete {
            "complete"
        } else {
            "incomplete"
        }
    );
    let _ = writeln!(out, "label\tfaces\tvoice_seconds");
    for p in &outcome.per_participant {
        let _ = writeln!(
            out,
            "{}\t{}\t{:.1}",
            p.expected_label, p.faces, p.voice_seconds
        );
    }
    let stats = outcome.stats;
    let _ = writeln!(
        out,
        "quarantined: {} faces, {} voices",
        stats.faces_quarantined, stats.voices_quarantined
    );
    if let (Some(f), Some(v)) = (outcome.accuracy.face_rate(), outcome.accuracy.voice_rate()) {
        let _ = writeln!(
            out,
            "label accuracy: faces {:.1}%, voices {:.1}%",
            f * 100.0,
            v * 100.0
        );
    }
    out
}

/// Convenience entry: run the default scenario for a master seed.
pub fn run_default_session(master_seed: u64) -> Result<SessionOutcome> {
    let scenario = ScenarioConfig::default_three_player(master_seed);
    let game = GameConfig {
        turn_order_seed: substream(master_seed, TAG_SLS ^ 0xff),
        ..GameConfig::default()
    };
    run_session(&scenario, &game)
}

/// Fails unless the session reached the end of the game.
pub fn require_complete(outcome: &SessionOutcome) -> Result<()> {
    if outcome.trace.complete {
        Ok(())
    } else {
        Err(Error::IncompleteSession(format!(
            "stopped in state {}",
            outcome.trace.final_state
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_session_completes_and_labels_accurately() {
        let outcome = run_default_session(7).unwrap();
        assert!(
            outcome.trace.complete,
            "final state {} after {} steps\n{}",
            outcome.trace.final_state,
            outcome.trace.steps.len(),
            outcome
                .trace
                .steps
                .iter()
                .rev()
                .take(12)
                .map(|s| format!("{:.2} {} -> {}", s.t, s.state, s.next))
                .collect::<Vec<_>>()
                .join("\n")
        );

        let acc = outcome.accuracy;
        assert!(acc.faces_total > 0 && acc.voices_total > 0);
        assert!(acc.face_rate().unwrap() >= 0.95, "{acc:?}");
        assert!(acc.voice_rate().unwrap() >= 0.97, "{acc:?}");

        for p in &outcome.per_participant {
            assert!(
                (p.voice_seconds - 110.0).abs() <= 15.0,
                "{}: {}s",
                p.name,
                p.voice_seconds
            );
            assert!(
                (p.faces as f64 - 93.0).abs() <= 15.0,
                "{}: {} faces",
                p.name,
                p.faces
            );
        }
    }

    #[test]
    fn noiseless_session_is_perfect() {
        let mut scenario = ScenarioConfig::default_three_player(11);
        scenario.azimuth_noise_sigma = 0.0;
        scenario.detector_miss_rate = 0.0;
        scenario.name_failure_rate = 0.0;
        let outcome = run_session(&scenario, &GameConfig::default()).unwrap();
        assert!(outcome.trace.complete);
        assert_eq!(outcome.accuracy.face_rate(), Some(1.0));
        assert_eq!(outcome.accuracy.voice_rate(), Some(1.0));
        assert_eq!(outcome.stats.voices_quarantined, 0);
    }

    #[test]
    fn sessions_are_deterministic() {
        let a = run_default_session(3).unwrap();
        let b = run_default_session(3).unwrap();
        assert_eq!(a.trace.export(), b.trace.export());
        assert_eq!(a.records, b.records);
        assert_eq!(a.stats, b.stats);
    }

    #[test]
    fn no_sample_loss_in_a_full_session() {
        let outcome = run_default_session(5).unwrap();
        let s = outcome.stats;
        assert_eq!(s.faces_in, s.faces_stored + s.faces_quarantined);
        assert_eq!(s.voices_in, s.voices_stored + s.voices_quarantined);
    }
}

#[cfg(test)]
mod debug_tests {
    use super::*;

    #[test]
    #[ignore]
    fn dump_positioning_trace() {
        let scenario = ScenarioConfig::default_three_player(7);
        let game = GameConfig {
            turn_order_seed: substream(7, TAG_SLS ^ 0xff),
            ..GameConfig::default()
        };
        let outcome = run_session(&scenario, &game).unwrap();
        for step in &outcome.trace.steps {
            let interesting = !matches!(step.event, GameEventKind::FacesDetected(_))
                || step.state.to_string().starts_with("welcome");
            if interesting && step.t < 120.0 {
                println!(
                    "{:.2} [{}] {:?} -> {}  effects={}",
                    step.t,
                    step.state,
                    step.event,
                    step.next,
                    step.effects.len()
                );
            }
        }
    }
}
