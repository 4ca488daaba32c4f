//! Synthetic scene generator with ground truth.
//!
//! Produces per-interval observation sets (3D visual points plus ITD values,
//! both with timestamps and generating-object tags) for configurable
//! multi-speaker scenarios: static or moving speakers, visibility and
//! speaking windows, Gaussian feature noise and uniform outliers. Generation
//! is fully deterministic under the scenario seed.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ItdValue, MicPairConfig, ScenePoint};
use crate::mixture::OutlierDomain;
use crate::pipeline::{IntervalObservations, DEFAULT_INTERVAL_S};

/// Box from which uniform 3D outliers are drawn: a ~5×5 m room with the
/// speakers in front of the sensor head.
pub const SCENE_BOX: [(f64, f64); 3] = [(-2.0, 2.0), (-1.0, 1.0), (0.5, 5.0)];

/// One simulated speaker: piecewise-linear motion plus visibility and
/// speaking windows (half-open, seconds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectTrack {
    /// `(time_s, position)` waypoints with strictly increasing times.
    pub waypoints: Vec<(f64, ScenePoint)>,
    pub visible: Vec<(f64, f64)>,
    pub speaking: Vec<(f64, f64)>,
}

impl ObjectTrack {
    /// A speaker that never moves.
    pub fn static_at(position: ScenePoint) -> Self {
        Self {
            waypoints: vec![(0.0, position)],
            visible: Vec::new(),
            speaking: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.waypoints.is_empty() {
            return Err(Error::InvalidInput("track needs ≥ 1 waypoint".into()));
        }
        for pair in self.waypoints.windows(2) {
            if !(pair[1].0 > pair[0].0) {
                return Err(Error::InvalidInput(
                    "waypoint times must be strictly increasing".into(),
                ));
            }
        }
        for (name, windows) in [("visible", &self.visible), ("speaking", &self.speaking)] {
            for (a, b) in windows {
                if !(a <= b) || !a.is_finite() || !b.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "malformed {name} window ({a}, {b})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Linearly interpolated position, clamped to the first/last waypoint.
    pub fn position_at(&self, t: f64) -> ScenePoint {
        let wp = &self.waypoints;
        if t <= wp[0].0 {
            return wp[0].1;
        }
        if t >= wp[wp.len() - 1].0 {
            return wp[wp.len() - 1].1;
        }
        let idx = wp.partition_point(|(wt, _)| *wt <= t);
        let (t0, p0) = wp[idx - 1];
        let (t1, p1) = wp[idx];
        let u = (t - t0) / (t1 - t0);
        ScenePoint::from_vector(p0.to_vector() * (1.0 - u) + p1.to_vector() * u)
    }

    pub fn visible_at(&self, t: f64) -> bool {
        self.visible.iter().any(|(a, b)| *a <= t && t < *b)
    }

    pub fn speaking_at(&self, t: f64) -> bool {
        self.speaking.iter().any(|(a, b)| *a <= t && t < *b)
    }
}

/// Full description of a synthetic scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub duration_s: f64,
    #[serde(default = "default_interval")]
    pub interval_s: f64,
    pub objects: Vec<ObjectTrack>,
    /// Isotropic σ of the 3D feature noise, meters.
    pub visual_noise_sigma: f64,
    /// σ of the ITD observation noise, seconds.
    pub itd_noise_sigma: f64,
    /// Uniform 3D outliers per interval.
    pub visual_outlier_rate: f64,
    /// Uniform ITD outliers per interval.
    pub itd_outlier_rate: f64,
    /// 3D points emitted per visible object per interval.
    pub visual_points_per_object: f64,
    /// ITD values emitted per speaking object per interval.
    pub itd_points_per_speaking_object: f64,
    pub seed: u64,
}

fn default_interval() -> f64 {
    DEFAULT_INTERVAL_S
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) || !(self.interval_s > 0.0) {
            return Err(Error::InvalidInput(
                "duration and interval must be positive".into(),
            ));
        }
        for rate in [
            self.visual_noise_sigma,
            self.itd_noise_sigma,
            self.visual_outlier_rate,
            self.itd_outlier_rate,
            self.visual_points_per_object,
            self.itd_points_per_speaking_object,
        ] {
            if !(rate >= 0.0) || !rate.is_finite() {
                return Err(Error::InvalidInput(
                    "rates and noise levels must be non-negative and finite".into(),
                ));
            }
        }
        for track in &self.objects {
            track.validate()?;
        }
        Ok(())
    }

    pub fn n_intervals(&self) -> usize {
        (self.duration_s / self.interval_s).round() as usize
    }
}

/// State of one object at one interval midpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthObject {
    pub id: usize,
    pub position: ScenePoint,
    pub visible: bool,
    pub speaking: bool,
}

/// Ground truth of one interval: object states plus per-observation source
/// tags (`None` marks an outlier).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub objects: Vec<TruthObject>,
    pub visual_sources: Vec<Option<usize>>,
    pub auditory_sources: Vec<Option<usize>>,
}

impl GroundTruth {
    /// `(position, speaking)` of the visible objects, the reference set of
    /// the evaluation protocol.
    pub fn visible_objects(&self) -> Vec<(ScenePoint, bool)> {
        self.objects
            .iter()
            .filter(|o| o.visible)
            .map(|o| (o.position, o.speaking))
            .collect()
    }
}

/// One generated interval: observations, ground truth, and per-observation
/// timestamps for replaying the interval as an event stream.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedInterval {
    pub observations: IntervalObservations,
    pub truth: GroundTruth,
    pub visual_times: Vec<f64>,
    pub auditory_times: Vec<f64>,
}

/// Deterministic fractional-rate counter: emits `floor` counts while
/// carrying the remainder, so long-run totals match the configured rate
/// exactly.
#[derive(Debug, Default, Clone, Copy)]
struct RateAccumulator {
    carry: f64,
}

impl RateAccumulator {
    fn next_count(&mut self, rate: f64) -> usize {
        self.carry += rate;
        let n = self.carry.floor();
        self.carry -= n;
        n as usize
    }
}

/// Generates the full scenario against a microphone configuration.
///
/// The outlier domain (shared with the pipelines) must leave enough margin
/// for the ITD noise: specs with `margin < 5·itd_noise_sigma` are rejected
/// so that noise draws, clamped at ±5σ, can never leave the domain.
pub fn generate(
    spec: &ScenarioSpec,
    cfg: &MicPairConfig,
    domain_margin: f64,
) -> Result<Vec<GeneratedInterval>> {
    spec.validate()?;
    cfg.validate()?;
    let domain = OutlierDomain::from_mic_config(cfg, domain_margin)?;
    let base_width = domain.width() / (1.0 + 2.0 * domain_margin);
    let margin_abs = domain_margin * base_width;
    if margin_abs < 5.0 * spec.itd_noise_sigma {
        return Err(Error::InvalidInput(format!(
            "domain margin {margin_abs:.3e}s cannot absorb 5σ of ITD noise ({:.3e}s)",
            5.0 * spec.itd_noise_sigma
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let vis_noise = Normal::new(0.0, spec.visual_noise_sigma.max(f64::MIN_POSITIVE)).unwrap();
    let itd_noise = Normal::new(0.0, spec.itd_noise_sigma.max(f64::MIN_POSITIVE)).unwrap();
    let itd_clamp = 5.0 * spec.itd_noise_sigma;

    let mut vis_acc: Vec<RateAccumulator> = vec![RateAccumulator::default(); spec.objects.len()];
    let mut itd_acc: Vec<RateAccumulator> = vec![RateAccumulator::default(); spec.objects.len()];
    let mut vis_out_acc = RateAccumulator::default();
    let mut itd_out_acc = RateAccumulator::default();

    let n_intervals = spec.n_intervals();
    let mut intervals = Vec::with_capacity(n_intervals);

    for idx in 0..n_intervals {
        let t0 = idx as f64 * spec.interval_s;
        let t_mid = t0 + 0.5 * spec.interval_s;

        let truth_objects: Vec<TruthObject> = spec
            .objects
            .iter()
            .enumerate()
            .map(|(id, track)| TruthObject {
                id,
                position: track.position_at(t_mid),
                visible: track.visible_at(t_mid),
                speaking: track.speaking_at(t_mid),
            })
            .collect();

        // (time, point, source) triplets, sorted by time before storing.
        let mut visual: Vec<(f64, ScenePoint, Option<usize>)> = Vec::new();
        let mut auditory: Vec<(f64, ItdValue, Option<usize>)> = Vec::new();

        for obj in &truth_objects {
            if obj.visible {
                let count = vis_acc[obj.id].next_count(spec.visual_points_per_object);
                for _ in 0..count {
                    let p = ScenePoint::new(
                        obj.position.x + vis_noise.sample(&mut rng),
                        obj.position.y + vis_noise.sample(&mut rng),
                        obj.position.z + vis_noise.sample(&mut rng),
                    );
                    let t = t0 + spec.interval_s * rng.random_range(0.02..0.98);
                    visual.push((t, p, Some(obj.id)));
                }
            }
            if obj.speaking {
                let count = itd_acc[obj.id].next_count(spec.itd_points_per_speaking_object);
                let center = cfg.corrected_itd(&obj.position)?.0;
                for j in 0..count {
                    let noise = itd_noise.sample(&mut rng).clamp(-itd_clamp, itd_clamp);
                    let t = t0 + spec.interval_s * (j as f64 + 0.5) / count as f64;
                    auditory.push((t, ItdValue(center + noise), Some(obj.id)));
                }
            }
        }

        for _ in 0..vis_out_acc.next_count(spec.visual_outlier_rate) {
            let p = ScenePoint::new(
                rng.random_range(SCENE_BOX[0].0..SCENE_BOX[0].1),
                rng.random_range(SCENE_BOX[1].0..SCENE_BOX[1].1),
                rng.random_range(SCENE_BOX[2].0..SCENE_BOX[2].1),
            );
            let t = t0 + spec.interval_s * rng.random_range(0.02..0.98);
            visual.push((t, p, None));
        }
        for _ in 0..itd_out_acc.next_count(spec.itd_outlier_rate) {
            let v = ItdValue(rng.random_range(domain.lo..domain.hi));
            let t = t0 + spec.interval_s * rng.random_range(0.02..0.98);
            auditory.push((t, v, None));
        }

        visual.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        auditory.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        let observations = IntervalObservations {
            visual_3d: visual.iter().map(|(_, p, _)| *p).collect(),
            auditory: auditory.iter().map(|(_, v, _)| *v).collect(),
            interval_index: idx,
            duration: spec.interval_s,
        };
        let truth = GroundTruth {
            objects: truth_objects,
            visual_sources: visual.iter().map(|(_, _, s)| *s).collect(),
            auditory_sources: auditory.iter().map(|(_, _, s)| *s).collect(),
        };
        intervals.push(GeneratedInterval {
            observations,
            truth,
            visual_times: visual.iter().map(|(t, _, _)| *t).collect(),
            auditory_times: auditory.iter().map(|(t, _, _)| *t).collect(),
        });
    }

    Ok(intervals)
}

fn always(duration: f64) -> Vec<(f64, f64)> {
    vec![(0.0, duration)]
}

/// Periodic speaking windows: object `slot` of `n_slots` talks for
/// `window_s` seconds per cycle, with a small overlap between consecutive
/// talkers and half a window of shared silence at the end of each cycle.
fn turn_taking(duration: f64, slot: usize, n_slots: usize, window_s: f64) -> Vec<(f64, f64)> {
    let period = window_s * (n_slots as f64 + 0.5);
    let overlap = 0.2 * window_s;
    let mut windows = Vec::new();
    let mut start = slot as f64 * window_s;
    while start < duration {
        windows.push((start, (start + window_s + overlap).min(duration)));
        start += period;
    }
    windows
}

fn desk_positions() -> [ScenePoint; 3] {
    [
        ScenePoint::new(-1.0, 0.0, 2.0),
        ScenePoint::new(0.0, 0.1, 2.2),
        ScenePoint::new(1.0, -0.1, 2.0),
    ]
}

fn motion_spec(duration: f64, objects: Vec<ObjectTrack>, seed: u64) -> ScenarioSpec {
    // Observation densities follow the reported setup: ~2000 visual and
    // ~20 auditory observations per 0.4 s interval, 5% outliers.
    ScenarioSpec {
        duration_s: duration,
        interval_s: DEFAULT_INTERVAL_S,
        objects,
        visual_noise_sigma: 0.03,
        itd_noise_sigma: 1e-5,
        visual_outlier_rate: 100.0,
        itd_outlier_rate: 1.0,
        visual_points_per_object: 2000.0 / 3.0,
        itd_points_per_speaking_object: 15.0,
        seed,
    }
}

fn face_spec(duration: f64, objects: Vec<ObjectTrack>, seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        duration_s: duration,
        interval_s: DEFAULT_INTERVAL_S,
        objects,
        visual_noise_sigma: 0.01,
        itd_noise_sigma: 1e-5,
        visual_outlier_rate: 0.05,
        itd_outlier_rate: 0.5,
        visual_points_per_object: 1.0,
        itd_points_per_speaking_object: 15.0,
        seed,
    }
}

/// The built-in scenario catalogue.
///
/// `stacon`/`dyncon`/`stavar`/`dynvar` are desk-scale motion-guided
/// benchmarks (static/dynamic speakers, constant/varying count); `s1`–`s5`
/// target the face-guided pipeline, `s4` featuring a speaker that is audible
/// but never visible.
pub fn builtin_scenarios() -> BTreeMap<String, ScenarioSpec> {
    let mut map = BTreeMap::new();
    let d = 160.0;
    let [left, mid, right] = desk_positions();

    // Static speakers, constant count.
    let stacon_objects: Vec<ObjectTrack> = [left, mid, right]
        .iter()
        .enumerate()
        .map(|(i, p)| ObjectTrack {
            waypoints: vec![(0.0, *p)],
            visible: always(d),
            speaking: turn_taking(d, i, 3, 4.0),
        })
        .collect();
    map.insert("stacon".into(), motion_spec(d, stacon_objects, 101));

    // Moving speakers, constant count.
    let dyncon_objects = vec![
        ObjectTrack {
            waypoints: vec![
                (0.0, ScenePoint::new(-1.3, 0.0, 1.8)),
                (d / 2.0, ScenePoint::new(-0.8, 0.1, 2.4)),
                (d, ScenePoint::new(-1.3, 0.0, 1.8)),
            ],
            visible: always(d),
            speaking: turn_taking(d, 0, 3, 4.0),
        },
        ObjectTrack {
            waypoints: vec![
                (0.0, ScenePoint::new(0.0, 0.1, 2.4)),
                (d / 2.0, ScenePoint::new(0.2, -0.1, 1.9)),
                (d, ScenePoint::new(0.0, 0.1, 2.4)),
            ],
            visible: always(d),
            speaking: turn_taking(d, 1, 3, 4.0),
        },
        ObjectTrack {
            waypoints: vec![
                (0.0, ScenePoint::new(1.3, -0.1, 2.0)),
                (d / 2.0, ScenePoint::new(0.9, 0.0, 2.5)),
                (d, ScenePoint::new(1.3, -0.1, 2.0)),
            ],
            visible: always(d),
            speaking: turn_taking(d, 2, 3, 4.0),
        },
    ];
    map.insert("dyncon".into(), motion_spec(d, dyncon_objects, 102));

    // Static speakers, varying count: visibility gaps.
    let stavar_objects: Vec<ObjectTrack> = [left, mid, right]
        .iter()
        .enumerate()
        .map(|(i, p)| ObjectTrack {
            waypoints: vec![(0.0, *p)],
            visible: match i {
                0 => vec![(0.0, 0.6 * d)],
                1 => vec![(0.2 * d, d)],
                _ => vec![(0.0, 0.4 * d), (0.5 * d, d)],
            },
            speaking: turn_taking(d, i, 3, 4.0),
        })
        .collect();
    map.insert("stavar".into(), motion_spec(d, stavar_objects, 103));

    // Moving speakers, varying count.
    let mut dynvar_objects = map["dyncon"].objects.clone();
    dynvar_objects[0].visible = vec![(0.0, 0.7 * d)];
    dynvar_objects[2].visible = vec![(0.0, 0.35 * d), (0.55 * d, d)];
    map.insert("dynvar".into(), motion_spec(d, dynvar_objects, 104));

    // Face-guided scenarios.
    let fd = 60.0;
    let sofa = [
        ScenePoint::new(-0.8, 0.0, 1.8),
        ScenePoint::new(0.0, 0.0, 2.0),
        ScenePoint::new(0.8, 0.0, 1.8),
    ];

    let s1 = vec![ObjectTrack {
        waypoints: vec![(0.0, ScenePoint::new(0.0, 0.0, 1.5))],
        visible: always(fd),
        speaking: turn_taking(fd, 0, 2, 3.0),
    }];
    map.insert("s1".into(), face_spec(fd, s1, 201));

    let s2: Vec<ObjectTrack> = sofa
        .iter()
        .enumerate()
        .map(|(i, p)| ObjectTrack {
            waypoints: vec![(0.0, *p)],
            visible: always(fd),
            speaking: turn_taking(fd, i, 3, 3.0),
        })
        .collect();
    map.insert("s2".into(), face_spec(fd, s2, 202));

    // One person standing (elevated).
    let mut s3 = map["s2"].objects.clone();
    s3[1].waypoints = vec![(0.0, ScenePoint::new(0.0, 0.45, 2.0))];
    map.insert("s3".into(), face_spec(fd, s3, 203));

    // One speaker outside the field of view: audible, never visible.
    let mut s4 = map["s2"].objects.clone();
    s4[2].visible = Vec::new();
    map.insert("s4".into(), face_spec(fd, s4, 204));

    // Independent overlapping speech, one speaker moving while talking.
    let s5 = vec![
        ObjectTrack {
            waypoints: vec![(0.0, sofa[0])],
            visible: always(fd),
            speaking: turn_taking(fd, 0, 2, 2.5),
        },
        ObjectTrack {
            waypoints: vec![(0.0, sofa[1])],
            visible: always(fd),
            speaking: turn_taking(fd, 1, 2, 3.5),
        },
        ObjectTrack {
            waypoints: vec![
                (0.0, sofa[2]),
                (fd / 2.0, ScenePoint::new(1.2, 0.0, 2.6)),
                (fd, sofa[2]),
            ],
            visible: always(fd),
            speaking: vec![(5.0, 15.0), (25.0, 40.0), (48.0, 58.0)],
        },
    ];
    map.insert("s5".into(), face_spec(fd, s5, 205));

    map
}
