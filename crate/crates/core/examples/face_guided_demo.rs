//! Speaking-state assessment from detected faces.
//!
//! Three faces are visible; the middle one emits a burst of ITD values.
//! One auditory-only EM per interval decides who is talking.
//!
//! Run with: `cargo run --example face_guided_demo`

use avfusion::geometry::{MicPairConfig, ScenePoint};
use avfusion::pipeline::{face_guided_interval, PipelineKnobs};
use avfusion::ItdValue;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn main() {
    let cfg = MicPairConfig::default();
    let faces = [
        ScenePoint::new(-0.8, 0.0, 1.8),
        ScenePoint::new(0.0, 0.0, 2.0),
        ScenePoint::new(0.8, 0.0, 1.8),
    ];

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
    let center = cfg.corrected_itd(&faces[1]).unwrap().0;
    let voice = Normal::new(center, 1.5e-5).unwrap();
    let mut itds: Vec<ItdValue> = (0..16).map(|_| ItdValue(voice.sample(&mut rng))).collect();
    itds.push(ItdValue(-4.8e-4)); // stray reverberation

    let knobs = PipelineKnobs::default();
    let objects = face_guided_interval(&faces, &itds, &cfg, &knobs).unwrap();
    for obj in &objects {
        println!(
            "face at ({:+.1}, {:.1}, {:.1}) m -> speaking: {:5}, auditory mass {:.2}",
            obj.position.x, obj.position.y, obj.position.z, obj.speaking, obj.auditory_mass
        );
    }

    // Silence: without auditory observations nobody can be speaking.
    let silent = face_guided_interval(&faces, &[], &cfg, &knobs).unwrap();
    assert!(silent.iter().all(|o| !o.speaking));
    println!("with zero ITD values every face stays silent");
}
