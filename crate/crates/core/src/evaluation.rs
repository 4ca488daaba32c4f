//! Evaluation protocol: detection-to-truth matching, FP/FN/TP counting,
//! localization error and speaking-state scoring.
//!
//! Matching is performed per interval on a detection-to-truth distance
//! matrix: every detection is assigned to its nearest ground-truth cluster
//! unless farther than `τ_loc`; unmatched truths are false negatives; among
//! multiple assignees of one truth only the closest counts as true positive.
//! Speaking state is scored on the localization true positives only.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::geometry::ScenePoint;
use crate::pipeline::AVObject;

/// Maximum detection-to-truth distance for a true positive, meters.
pub const DEFAULT_TAU_LOC: f64 = 0.35;

/// Per-interval match outcome.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IntervalScore {
    pub loc_fp: usize,
    pub loc_fn: usize,
    pub loc_tp: usize,
    /// Euclidean errors of the true-positive pairs; one entry per TP.
    pub loc_errors: Vec<f64>,
    pub audio_fp: usize,
    pub audio_fn: usize,
    pub audio_tp: usize,
}

/// Matches one interval's detections against ground truth.
///
/// `truth` holds `(position, speaking)` of every present (visible) object.
pub fn match_clusters(
    detected: &[AVObject],
    truth: &[(ScenePoint, bool)],
    tau_loc: f64,
) -> IntervalScore {
    let mut score = IntervalScore::default();
    // assignments[t] = detections whose nearest truth is t, within tau_loc.
    let mut assignments: Vec<Vec<(usize, f64)>> = vec![Vec::new(); truth.len()];

    for (d_idx, det) in detected.iter().enumerate() {
        let mut nearest: Option<(usize, f64)> = None;
        for (t_idx, (pos, _)) in truth.iter().enumerate() {
            let dist = det.position.distance(pos);
            if nearest.is_none() || dist < nearest.unwrap().1 {
                nearest = Some((t_idx, dist));
            }
        }
        match nearest {
            Some((t_idx, dist)) if dist <= tau_loc => assignments[t_idx].push((d_idx, dist)),
            _ => score.loc_fp += 1,
        }
    }

    for (t_idx, assigned) in assignments.iter().enumerate() {
        if assigned.is_empty() {
            score.loc_fn += 1;
            continue;
        }
        let (best_det, best_dist) = assigned
            .iter()
            .copied()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        score.loc_tp += 1;
        score.loc_errors.push(best_dist);
        score.loc_fp += assigned.len() - 1;

        // Speaking state, scored on the true positive only.
        let detected_speaking = detected[best_det].speaking;
        let truth_speaking = truth[t_idx].1;
        match (detected_speaking, truth_speaking) {
            (true, false) => score.audio_fp += 1,
            (false, true) => score.audio_fn += 1,
            _ => score.audio_tp += 1,
        }
    }

    score
}

/// Aggregated counts and rates over a whole run, mirroring the benchmark
/// table layout (FP, FN with rate, TP with rate, ALE).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub intervals: usize,
    pub loc_fp: usize,
    pub loc_fn: usize,
    pub loc_tp: usize,
    /// FN/(FN+TP); zero when undefined.
    pub loc_fn_rate: f64,
    /// TP/(FN+TP); zero when undefined.
    pub loc_tp_rate: f64,
    /// Mean localization error over all true positives, meters.
    pub ale: f64,
    pub audio_fp: usize,
    pub audio_fn: usize,
    pub audio_tp: usize,
    pub audio_fn_rate: f64,
    pub audio_tp_rate: f64,
}

fn rate(num: usize, denom: usize) -> f64 {
    if denom == 0 {
        0.0
    } else {
        num as f64 / denom as f64
    }
}

/// Percentage with one decimal, the table convention (0.96078… → "96.1%").
pub fn format_percent(fraction: f64) -> String {
    format!("{:.1}%", fraction * 100.0)
}

/// Sums interval scores and derives the table rates; the localization error
/// is pooled over every true positive of the run.
pub fn aggregate(scores: &[IntervalScore]) -> SummaryTable {
    let mut t = SummaryTable {
        intervals: scores.len(),
        ..SummaryTable::default()
    };
    let mut error_sum = 0.0;
    let mut error_count = 0usize;
    for s in scores {
        t.loc_fp += s.loc_fp;
        t.loc_fn += s.loc_fn;
        t.loc_tp += s.loc_tp;
        t.audio_fp += s.audio_fp;
        t.audio_fn += s.audio_fn;
        t.audio_tp += s.audio_tp;
        error_sum += s.loc_errors.iter().sum::<f64>();
        error_count += s.loc_errors.len();
    }
    t.loc_fn_rate = rate(t.loc_fn, t.loc_fn + t.loc_tp);
    t.loc_tp_rate = rate(t.loc_tp, t.loc_fn + t.loc_tp);
    t.audio_fn_rate = rate(t.audio_fn, t.audio_fn + t.audio_tp);
    t.audio_tp_rate = rate(t.audio_tp, t.audio_fn + t.audio_tp);
    t.ale = if error_count == 0 {
        0.0
    } else {
        error_sum / error_count as f64
    };
    t
}

impl fmt::Display for SummaryTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<10} {:>6} {:>14} {:>14} {:>10}",
            "", "FP", "FN", "TP", "ALE [m]"
        )?;
        writeln!(
            f,
            "{:<10} {:>6} {:>6} ({:>5}) {:>6} ({:>5}) {:>10.3}",
            "location",
            self.loc_fp,
            self.loc_fn,
            format_percent(self.loc_fn_rate),
            self.loc_tp,
            format_percent(self.loc_tp_rate),
            self.ale,
        )?;
        write!(
            f,
            "{:<10} {:>6} {:>6} ({:>5}) {:>6} ({:>5}) {:>10}",
            "audio",
            self.audio_fp,
            self.audio_fn,
            format_percent(self.audio_fn_rate),
            self.audio_tp,
            format_percent(self.audio_tp_rate),
            "-",
        )
    }
}
