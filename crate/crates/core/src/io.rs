//! Line-delimited data files: observation datasets, per-interval results,
//! ITD histograms, replayable event streams and run manifests.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::event_sync::{group_by_scope, time_frame, TimedEvent};
use crate::geometry::{ItdValue, ScenePoint};
use crate::pipeline::{AVObject, IntervalObservations};
use crate::simulator::{GeneratedInterval, TruthObject};

/// Scope names used when serializing simulated streams.
pub const FRAME_SCOPE: &str = "frame";
pub const VISUAL_SCOPE: &str = "visual3d";
pub const ITD_SCOPE: &str = "itd";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualRecord {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub t: f64,
    pub source: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditoryRecord {
    pub itd: f64,
    pub t: f64,
    pub source: Option<usize>,
}

/// One interval of a generated dataset: observations plus ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub interval_index: usize,
    pub duration: f64,
    pub visual: Vec<VisualRecord>,
    pub auditory: Vec<AuditoryRecord>,
    pub truth: Vec<TruthObject>,
}

impl DatasetRecord {
    pub fn from_generated(interval: &GeneratedInterval) -> Self {
        let obs = &interval.observations;
        Self {
            interval_index: obs.interval_index,
            duration: obs.duration,
            visual: obs
                .visual_3d
                .iter()
                .zip(&interval.visual_times)
                .zip(&interval.truth.visual_sources)
                .map(|((p, t), source)| VisualRecord {
                    x: p.x,
                    y: p.y,
                    z: p.z,
                    t: *t,
                    source: *source,
                })
                .collect(),
            auditory: obs
                .auditory
                .iter()
                .zip(&interval.auditory_times)
                .zip(&interval.truth.auditory_sources)
                .map(|((v, t), source)| AuditoryRecord {
                    itd: v.0,
                    t: *t,
                    source: *source,
                })
                .collect(),
            truth: interval.truth.objects.clone(),
        }
    }

    pub fn observations(&self) -> IntervalObservations {
        IntervalObservations {
            visual_3d: self
                .visual
                .iter()
                .map(|v| ScenePoint::new(v.x, v.y, v.z))
                .collect(),
            auditory: self.auditory.iter().map(|a| ItdValue(a.itd)).collect(),
            interval_index: self.interval_index,
            duration: self.duration,
        }
    }

    /// `(position, speaking)` of the visible objects, the evaluation
    /// reference.
    pub fn visible_truth(&self) -> Vec<(ScenePoint, bool)> {
        self.truth
            .iter()
            .filter(|o| o.visible)
            .map(|o| (o.position, o.speaking))
            .collect()
    }
}

/// One detected object, flattened for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub position: ScenePoint,
    pub covariance: [[f64; 3]; 3],
    pub weight: f64,
    pub speaking: bool,
    pub auditory_mass: f64,
}

impl From<&AVObject> for ObjectRecord {
    fn from(obj: &AVObject) -> Self {
        let mut cov = [[0.0; 3]; 3];
        for (r, row) in cov.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = obj.covariance[(r, c)];
            }
        }
        Self {
            position: obj.position,
            covariance: cov,
            weight: obj.weight,
            speaking: obj.speaking,
            auditory_mass: obj.auditory_mass,
        }
    }
}

/// Pipeline output for one interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub interval_index: usize,
    pub n_objects: usize,
    pub objects: Vec<ObjectRecord>,
    pub wall_ms: f64,
}

/// Histogram of one interval's ITD values plus the fitted components,
/// the plottable content of the ITD-space panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRecord {
    pub interval_index: usize,
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
    pub components: Vec<ComponentSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub mean: f64,
    pub stddev: f64,
    pub weight: f64,
}

impl HistogramRecord {
    pub fn from_values(
        interval_index: usize,
        values: &[ItdValue],
        lo: f64,
        hi: f64,
        bins: usize,
        components: Vec<ComponentSummary>,
    ) -> Self {
        let mut counts = vec![0usize; bins];
        let width = hi - lo;
        for v in values {
            if v.0 < lo || v.0 > hi || width <= 0.0 {
                continue;
            }
            let bin = (((v.0 - lo) / width) * bins as f64) as usize;
            counts[bin.min(bins - 1)] += 1;
        }
        Self {
            interval_index,
            lo,
            hi,
            counts,
            components,
        }
    }
}

/// Writes one JSON document per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut file = BufWriter::new(std::fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut file, item)?;
        file.write_all(b"\n")?;
    }
    file.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = BufReader::new(std::fs::File::open(path)?);
    let mut items = Vec::new();
    for (lineno, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        items.push(item);
    }
    Ok(items)
}

/// Serializes generated intervals as a timestamped event stream: one
/// `frame` event per interval (at the interval midpoint) plus one event per
/// observation, ordered by timestamp.
pub fn events_from_intervals(intervals: &[GeneratedInterval]) -> Result<Vec<TimedEvent>> {
    #[derive(Serialize)]
    struct FramePayload {
        interval_index: usize,
        duration: f64,
    }

    let mut events = Vec::new();
    for interval in intervals {
        let obs = &interval.observations;
        let t0 = obs.interval_index as f64 * obs.duration;
        let frame = FramePayload {
            interval_index: obs.interval_index,
            duration: obs.duration,
        };
        events.push(TimedEvent::new(
            FRAME_SCOPE,
            t0 + 0.5 * obs.duration,
            serde_json::to_vec(&frame)?,
        ));
        for (p, t) in obs.visual_3d.iter().zip(&interval.visual_times) {
            events.push(TimedEvent::new(VISUAL_SCOPE, *t, serde_json::to_vec(p)?));
        }
        for (v, t) in obs.auditory.iter().zip(&interval.auditory_times) {
            events.push(TimedEvent::new(ITD_SCOPE, *t, serde_json::to_vec(v)?));
        }
    }
    events.sort_by(|a, b| a.timestamp.partial_cmp(&b.timestamp).unwrap());
    Ok(events)
}

/// Rebuilds per-interval observations from a recorded event stream by
/// attaching every observation event to its interval's `frame` event with
/// the TimeFrame strategy (window ±duration/2).
pub fn intervals_from_events(events: Vec<TimedEvent>) -> Result<Vec<IntervalObservations>> {
    #[derive(Deserialize)]
    struct FramePayload {
        interval_index: usize,
        duration: f64,
    }

    let mut by_scope = group_by_scope(events);
    let frames = by_scope.remove(FRAME_SCOPE).unwrap_or_default();
    if frames.is_empty() {
        return Err(Error::Format(
            "event stream carries no frame events".into(),
        ));
    }
    let duration: f64 = serde_json::from_slice::<FramePayload>(&frames[0].payload)?.duration;
    let sets = time_frame(&frames, &by_scope, duration / 2.0, duration / 2.0)?;

    let mut intervals = Vec::with_capacity(sets.len());
    for set in sets {
        let frame: FramePayload =
            serde_json::from_slice(&set.single(FRAME_SCOPE).unwrap().payload)?;
        let visual_3d = set
            .events
            .get(VISUAL_SCOPE)
            .map(|events| {
                events
                    .iter()
                    .map(|e| serde_json::from_slice::<ScenePoint>(&e.payload))
                    .collect::<std::result::Result<Vec<_>, _>>()
            })
            .transpose()?
            .unwrap_or_default();
        let auditory = set
            .events
            .get(ITD_SCOPE)
            .map(|events| {
                events
                    .iter()
                    .map(|e| serde_json::from_slice::<ItdValue>(&e.payload))
                    .collect::<std::result::Result<Vec<_>, _>>()
            })
            .transpose()?
            .unwrap_or_default();
        intervals.push(IntervalObservations {
            visual_3d,
            auditory,
            interval_index: frame.interval_index,
            duration: frame.duration,
        });
    }
    Ok(intervals)
}

/// One calibration observation: a 3D position with the ITD measured there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPair {
    pub position: ScenePoint,
    pub itd: f64,
}

/// Reproducibility manifest emitted next to every run's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub config_sha256: String,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, config: serde_json::Value) -> Self {
        let canonical = config.to_string();
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            config_sha256: hex::encode(hasher.finalize()),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut file = BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(&mut file, self)?;
        file.write_all(b"\n")?;
        file.flush()?;
        Ok(())
    }
}
