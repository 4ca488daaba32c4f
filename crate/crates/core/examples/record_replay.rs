//! Record a simulated sensor flow to disk and replay it into the pipeline.
//!
//! The generated intervals are flattened into a timestamped event stream
//! (`frame`, `visual3d`, `itd` scopes), persisted in the line-delimited
//! replay format, loaded back, and regrouped into intervals with the
//! TimeFrame strategy. The reconstruction is observation-exact.
//!
//! Run with: `cargo run --example record_replay`

use avfusion::event_sync::{load_replay, save_replay};
use avfusion::geometry::{MicPairConfig, ScenePoint};
use avfusion::io::{events_from_intervals, intervals_from_events};
use avfusion::simulator::{generate, ObjectTrack, ScenarioSpec};

fn main() {
    let spec = ScenarioSpec {
        duration_s: 2.0,
        interval_s: 0.4,
        objects: vec![ObjectTrack {
            waypoints: vec![(0.0, ScenePoint::new(-0.4, 0.0, 1.8))],
            visible: vec![(0.0, 2.0)],
            speaking: vec![(0.0, 2.0)],
        }],
        visual_noise_sigma: 0.02,
        itd_noise_sigma: 1e-5,
        visual_outlier_rate: 3.0,
        itd_outlier_rate: 0.5,
        visual_points_per_object: 40.0,
        itd_points_per_speaking_object: 10.0,
        seed: 99,
    };
    let cfg = MicPairConfig::default();
    let intervals = generate(&spec, &cfg, 0.1).unwrap();

    let events = events_from_intervals(&intervals).unwrap();
    let path = std::env::temp_dir().join("avfusion_replay_demo.log");
    save_replay(&path, &events).unwrap();
    println!("recorded {} events to {}", events.len(), path.display());

    let loaded = load_replay(&path).unwrap();
    let rebuilt = intervals_from_events(loaded).unwrap();
    println!("replayed {} intervals:", rebuilt.len());
    for (orig, back) in intervals.iter().zip(&rebuilt) {
        let same = orig.observations.visual_3d == back.visual_3d
            && orig.observations.auditory == back.auditory;
        println!(
            "  interval {}: {} visual, {} auditory, exact: {same}",
            back.interval_index,
            back.visual_3d.len(),
            back.auditory.len()
        );
    }
    std::fs::remove_file(&path).ok();
}
