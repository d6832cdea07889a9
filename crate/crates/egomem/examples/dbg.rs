// temp debug: track lifecycle during movement
use egomem::mot::{Tracker, TrackerParams};
use egomem::sim::{synth_face, ScenarioConfig};

fn main() {
    let cfg = ScenarioConfig::default_three_player(7);
    let mut tracker = Tracker::new(TrackerParams::default()).unwrap();
    // replicate red (participant 2) moving from -43 to +60 at 5 deg/s, 2 fps,
    // others standing
    let arrivals = [-85.0, -64.0, -43.0];
    for k in 0..80u64 {
        let t = k as f64 / 2.0;
        let mut boxes = Vec::new();
        let mut who = Vec::new();
        for (p, spec) in cfg.participants.iter().enumerate() {
            let az = if p == 2 {
                let start = 7.0;
                let end = start + 103.0 / 5.0;
                if t <= start { arrivals[2] }
                else if t >= end { 60.0 }
                else { arrivals[2] + (t - start) * 5.0 }
            } else {
                arrivals[p]
            };
            if let Some(f) = synth_face(spec, k, az, cfg.detector_miss_rate) {
                boxes.push(f.bbox);
                who.push(p);
            }
        }
        let update = tracker.step(&boxes);
        if !update.new_track_ids.is_empty() || !update.removed_track_ids.is_empty() {
            println!(
                "t={t:5.1} frame={k:3} dets={:?} new={:?} removed={:?}",
                who, update.new_track_ids, update.removed_track_ids
            );
            for tr in tracker.tracks() {
                let b = tr.bbox();
                println!(
                    "    track {} cx={:7.1} vcx={:6.2} hits={} misses={}",
                    tr.id(), (b.x1()+b.x2())/2.0, tr.state()[4], tr.hits(), tr.misses()
                );
            }
        }
    }
}
