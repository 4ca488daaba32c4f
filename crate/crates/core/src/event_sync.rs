//! Timestamped multi-stream synchronization.
//!
//! Two strategies align observation streams that arrive at different rates:
//!
//! * **ApproximateTime** emits sets containing exactly one event per scope,
//!   greedily keeping each set's timestamp span small: the pivot is the
//!   largest queue-head timestamp (the earliest possible "latest element" of
//!   the next set), and every other scope contributes its event nearest the
//!   pivot. Skipped events are dropped; sets never overlap and are emitted
//!   in pivot order.
//! * **TimeFrame** declares one stream primary and attaches to each of its
//!   events all secondary events within a window around its timestamp;
//!   secondary events may appear in several sets.
//!
//! Recorded streams can be persisted to a line-delimited replay file
//! (`scope timestamp_ns payload_hex`) and later drive the pipelines offline.

use std::collections::{BTreeMap, VecDeque};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// One timestamped event on a named stream.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedEvent {
    pub scope: String,
    /// Seconds on a shared monotonic clock.
    pub timestamp: f64,
    pub payload: Vec<u8>,
}

impl TimedEvent {
    pub fn new(scope: impl Into<String>, timestamp: f64, payload: Vec<u8>) -> Self {
        Self {
            scope: scope.into(),
            timestamp,
            payload,
        }
    }
}

/// A synchronized bundle of events, one or more per scope.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncSet {
    pub pivot_timestamp: f64,
    pub events: BTreeMap<String, Vec<TimedEvent>>,
}

impl SyncSet {
    /// Latest minus earliest timestamp in the set.
    pub fn span(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for e in self.events.values().flatten() {
            lo = lo.min(e.timestamp);
            hi = hi.max(e.timestamp);
        }
        if hi >= lo {
            hi - lo
        } else {
            0.0
        }
    }

    /// The single event of `scope`, when exactly one is present.
    pub fn single(&self, scope: &str) -> Option<&TimedEvent> {
        match self.events.get(scope) {
            Some(events) if events.len() == 1 => Some(&events[0]),
            _ => None,
        }
    }
}

/// Incremental ApproximateTime synchronizer.
///
/// Events are submitted per scope in timestamp order; sets become available
/// once every scope can no longer contribute a closer event. A scope whose
/// queue has fallen behind blocks emission until it catches up or the
/// stream is [`flush`](Self::flush)ed.
#[derive(Debug)]
pub struct ApproximateTimeSync {
    queues: BTreeMap<String, VecDeque<TimedEvent>>,
}

impl ApproximateTimeSync {
    pub fn new<I, S>(scopes: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let queues: BTreeMap<String, VecDeque<TimedEvent>> = scopes
            .into_iter()
            .map(|s| (s.into(), VecDeque::new()))
            .collect();
        if queues.len() < 2 {
            return Err(Error::InvalidInput(
                "ApproximateTime needs at least two scopes".into(),
            ));
        }
        Ok(Self { queues })
    }

    /// Submits one event; timestamps within a scope must be non-decreasing.
    pub fn push(&mut self, event: TimedEvent) -> Result<()> {
        if !event.timestamp.is_finite() {
            return Err(Error::InvalidInput("non-finite event timestamp".into()));
        }
        let queue = self
            .queues
            .get_mut(&event.scope)
            .ok_or_else(|| Error::InvalidInput(format!("unknown scope '{}'", event.scope)))?;
        if let Some(last) = queue.back() {
            if event.timestamp < last.timestamp {
                return Err(Error::InvalidInput(format!(
                    "scope '{}' timestamps must be non-decreasing ({} after {})",
                    event.scope, event.timestamp, last.timestamp
                )));
            }
        }
        queue.push_back(event);
        Ok(())
    }

    fn try_emit(&mut self, end_of_stream: bool) -> Option<SyncSet> {
        if self.queues.values().any(|q| q.is_empty()) {
            return None;
        }
        // Pivot: the largest head timestamp, i.e. the smallest possible
        // "latest element" of any feasible next set.
        let (pivot_scope, pivot_t) = self
            .queues
            .iter()
            .map(|(s, q)| (s.clone(), q[0].timestamp))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then_with(|| b.0.cmp(&a.0)))?;

        let mut choices: BTreeMap<String, usize> = BTreeMap::new();
        for (scope, queue) in &self.queues {
            if *scope == pivot_scope {
                choices.insert(scope.clone(), 0);
                continue;
            }
            let mut best_idx = 0;
            let mut best_d = (queue[0].timestamp - pivot_t).abs();
            for (i, e) in queue.iter().enumerate().skip(1) {
                let d = (e.timestamp - pivot_t).abs();
                if d < best_d {
                    best_idx = i;
                    best_d = d;
                }
            }
            // A not-yet-seen event could land nearer the pivot as long as
            // this queue has nothing at or beyond it.
            if !end_of_stream && best_d > 0.0 && queue.back().unwrap().timestamp < pivot_t {
                return None;
            }
            choices.insert(scope.clone(), best_idx);
        }

        let mut events = BTreeMap::new();
        for (scope, idx) in choices {
            let queue = self.queues.get_mut(&scope).unwrap();
            let chosen = queue.drain(..=idx).next_back().unwrap();
            events.insert(scope, vec![chosen]);
        }
        Some(SyncSet {
            pivot_timestamp: pivot_t,
            events,
        })
    }

    /// Emits every set that is already determined by the queued events.
    pub fn ready_sets(&mut self) -> Vec<SyncSet> {
        let mut out = Vec::new();
        while let Some(set) = self.try_emit(false) {
            out.push(set);
        }
        out
    }

    /// Declares end of stream and emits the remaining feasible sets.
    pub fn flush(&mut self) -> Vec<SyncSet> {
        let mut out = Vec::new();
        while let Some(set) = self.try_emit(true) {
            out.push(set);
        }
        out
    }
}

/// Batch ApproximateTime over complete queues.
pub fn approximate_time(streams: BTreeMap<String, Vec<TimedEvent>>) -> Result<Vec<SyncSet>> {
    let mut sync = ApproximateTimeSync::new(streams.keys().cloned())?;
    for (scope, events) in streams {
        for e in events {
            if e.scope != scope {
                return Err(Error::InvalidInput(format!(
                    "event scoped '{}' queued under '{}'",
                    e.scope, scope
                )));
            }
            sync.push(e)?;
        }
    }
    Ok(sync.flush())
}

/// Batch TimeFrame: attaches to every primary event all secondary events
/// with timestamps in `[t − window_before, t + window_after]`.
pub fn time_frame(
    primary: &[TimedEvent],
    secondaries: &BTreeMap<String, Vec<TimedEvent>>,
    window_before: f64,
    window_after: f64,
) -> Result<Vec<SyncSet>> {
    if !(window_before >= 0.0) || !(window_after >= 0.0) {
        return Err(Error::InvalidInput(
            "time frame windows must be non-negative".into(),
        ));
    }
    for events in std::iter::once(primary).chain(secondaries.values().map(|v| v.as_slice())) {
        for pair in events.windows(2) {
            if pair[1].timestamp < pair[0].timestamp {
                return Err(Error::InvalidInput(
                    "queue timestamps must be non-decreasing".into(),
                ));
            }
        }
    }

    let mut out = Vec::with_capacity(primary.len());
    for p in primary {
        let lo = p.timestamp - window_before;
        let hi = p.timestamp + window_after;
        let mut events = BTreeMap::new();
        events.insert(p.scope.clone(), vec![p.clone()]);
        for (scope, queue) in secondaries {
            let start = queue.partition_point(|e| e.timestamp < lo);
            let matched: Vec<TimedEvent> = queue[start..]
                .iter()
                .take_while(|e| e.timestamp <= hi)
                .cloned()
                .collect();
            if !matched.is_empty() {
                events.insert(scope.clone(), matched);
            }
        }
        out.push(SyncSet {
            pivot_timestamp: p.timestamp,
            events,
        });
    }
    Ok(out)
}

/// Groups an interleaved event list by scope, preserving order.
pub fn group_by_scope(events: Vec<TimedEvent>) -> BTreeMap<String, Vec<TimedEvent>> {
    let mut map: BTreeMap<String, Vec<TimedEvent>> = BTreeMap::new();
    for e in events {
        map.entry(e.scope.clone()).or_default().push(e);
    }
    map
}

fn timestamp_to_ns(seconds: f64) -> i64 {
    (seconds * 1e9).round() as i64
}

/// Writes events as line-delimited `scope timestamp_ns payload_hex` records.
pub fn save_replay(path: &Path, events: &[TimedEvent]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for e in events {
        if e.scope.is_empty() || e.scope.contains(char::is_whitespace) {
            return Err(Error::InvalidInput(format!(
                "scope '{}' cannot be written to a replay file",
                e.scope
            )));
        }
        writeln!(
            file,
            "{} {} {}",
            e.scope,
            timestamp_to_ns(e.timestamp),
            hex::encode(&e.payload)
        )?;
    }
    Ok(())
}

/// Reads a replay file, validating per-scope timestamp monotonicity.
pub fn load_replay(path: &Path) -> Result<Vec<TimedEvent>> {
    let file = BufReader::new(std::fs::File::open(path)?);
    let mut events = Vec::new();
    let mut last_per_scope: BTreeMap<String, f64> = BTreeMap::new();
    for (lineno, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let scope = parts
            .next()
            .ok_or_else(|| Error::Format(format!("line {}: missing scope", lineno + 1)))?;
        let ns: i64 = parts
            .next()
            .ok_or_else(|| Error::Format(format!("line {}: missing timestamp", lineno + 1)))?
            .parse()
            .map_err(|e| Error::Format(format!("line {}: bad timestamp: {e}", lineno + 1)))?;
        let payload = match parts.next() {
            Some(hex_str) => hex::decode(hex_str)
                .map_err(|e| Error::Format(format!("line {}: bad payload: {e}", lineno + 1)))?,
            None => Vec::new(),
        };
        let timestamp = ns as f64 / 1e9;
        if let Some(last) = last_per_scope.get(scope) {
            if timestamp < *last {
                return Err(Error::Format(format!(
                    "line {}: scope '{scope}' timestamps decrease",
                    lineno + 1
                )));
            }
        }
        last_per_scope.insert(scope.to_string(), timestamp);
        events.push(TimedEvent::new(scope, timestamp, payload));
    }
    Ok(events)
}
