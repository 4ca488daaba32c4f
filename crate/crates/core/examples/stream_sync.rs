//! Synchronizing sensor streams with ApproximateTime and TimeFrame.
//!
//! Left and right camera frames arrive with independent jitter and are
//! paired by ApproximateTime; ITD values arrive ten times faster and are
//! attached to each paired frame with TimeFrame.
//!
//! Run with: `cargo run --example stream_sync`

use avfusion::event_sync::{approximate_time, time_frame, TimedEvent};
use rand::{Rng, SeedableRng};
use std::collections::BTreeMap;

fn main() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);

    // 15 FPS cameras, each with up to ±8 ms of grabbing jitter.
    let mut streams: BTreeMap<String, Vec<TimedEvent>> = BTreeMap::new();
    for camera in ["camera_left", "camera_right"] {
        let events = (0..8)
            .map(|i| {
                let t = i as f64 / 15.0 + rng.random_range(-0.008..0.008);
                TimedEvent::new(camera, t, Vec::new())
            })
            .collect();
        streams.insert(camera.into(), events);
    }

    let pairs = approximate_time(streams).unwrap();
    println!("{} frame pairs:", pairs.len());
    for set in &pairs {
        println!(
            "  pivot {:+.4}s span {:.1} ms",
            set.pivot_timestamp,
            set.span() * 1e3
        );
    }

    // ITD values every 20 ms attach to the frame pair covering them.
    let itds: Vec<TimedEvent> = (0..25)
        .map(|i| TimedEvent::new("itd", 0.02 * i as f64, Vec::new()))
        .collect();
    let mut secondaries = BTreeMap::new();
    secondaries.insert("itd".to_string(), itds);

    let primaries: Vec<TimedEvent> = pairs
        .iter()
        .map(|set| TimedEvent::new("frame_pair", set.pivot_timestamp, Vec::new()))
        .collect();
    let framed = time_frame(&primaries, &secondaries, 1.0 / 30.0, 1.0 / 30.0).unwrap();
    for set in &framed {
        let count = set.events.get("itd").map(|v| v.len()).unwrap_or(0);
        println!(
            "frame pair at {:.3}s carries {count} ITD values",
            set.pivot_timestamp
        );
    }
}
