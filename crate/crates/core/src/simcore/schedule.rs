use std::collections::HashMap;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{JobId, SegmentId, Tick};

/// Half-open execution interval `[start, end)`, serialized as `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Interval(pub Tick, pub Tick);

impl Interval {
    pub fn start(&self) -> Tick {
        self.0
    }

    pub fn end(&self) -> Tick {
        self.1
    }

    pub fn len(&self) -> Tick {
        self.1.saturating_sub(self.0)
    }

    pub fn is_empty(&self) -> bool {
        self.1 <= self.0
    }

    /// Length of the intersection with `[a, b)`.
    pub fn overlap(&self, a: Tick, b: Tick) -> Tick {
        let lo = self.0.max(a);
        let hi = self.1.min(b);
        hi.saturating_sub(lo)
    }
}

/// Total length of ordered, pairwise disjoint intervals.
pub fn measure(intervals: &[Interval]) -> Result<Tick> {
    let mut prev_end = 0;
    let mut total = 0;
    for (i, iv) in intervals.iter().enumerate() {
        if iv.1 < iv.0 || (i > 0 && iv.0 < prev_end) {
            return Err(Error::OverlappingIntervals(iv.0, iv.1));
        }
        prev_end = iv.1;
        total += iv.len();
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    #[serde(flatten)]
    pub id: SegmentId,
    /// Execution time the segment asked for (WCET nominally, the drawn
    /// actual execution time online).
    pub demand: Tick,
    pub release: Option<Tick>,
    pub start: Option<Tick>,
    /// `None` if the segment was still unfinished when the run stopped.
    pub finish: Option<Tick>,
    pub intervals: Vec<Interval>,
}

impl ScheduleEntry {
    pub fn is_complete(&self) -> bool {
        self.finish.is_some()
    }

    pub fn executed(&self) -> Tick {
        self.intervals.iter().map(Interval::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Nominal,
    Online,
}

/// Per-segment release, start, finish and execution intervals.
///
/// Serializes as a bare array of entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub horizon: Tick,
    pub kind: ScheduleKind,
    entries: Vec<ScheduleEntry>,
    index: HashMap<SegmentId, usize>,
}

impl Schedule {
    pub fn from_entries(horizon: Tick, kind: ScheduleKind, entries: Vec<ScheduleEntry>) -> Self {
        let index = entries.iter().enumerate().map(|(i, e)| (e.id, i)).collect();
        Self {
            horizon,
            kind,
            entries,
            index,
        }
    }

    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.entries
    }

    pub fn entry(&self, id: &SegmentId) -> Option<&ScheduleEntry> {
        self.index.get(id).map(|&i| &self.entries[i])
    }

    pub fn finish(&self, id: &SegmentId) -> Option<Tick> {
        self.entry(id).and_then(|e| e.finish)
    }

    pub fn intervals(&self, id: &SegmentId) -> &[Interval] {
        self.entry(id).map_or(&[], |e| &e.intervals)
    }

    /// Finishing time of the job's last segment, `None` if any segment of
    /// the job is incomplete or the job is unknown.
    pub fn job_finish(&self, job: JobId) -> Option<Tick> {
        let mut seg = 0;
        let mut last = None;
        while let Some(e) = self.entry(&SegmentId::new(job.task, job.job, seg)) {
            last = Some(e.finish?);
            seg += 1;
        }
        last
    }

    pub fn is_complete(&self) -> bool {
        self.entries.iter().all(ScheduleEntry::is_complete)
    }

    /// All execution slices of all segments, ordered by start time.
    pub fn slices(&self) -> Vec<(Interval, SegmentId)> {
        let mut v: Vec<_> = self
            .entries
            .iter()
            .flat_map(|e| e.intervals.iter().map(move |iv| (*iv, e.id)))
            .collect();
        v.sort();
        v
    }

    /// Checks the uniprocessor invariant: no two slices overlap.
    pub fn is_uniprocessor(&self) -> bool {
        self.slices()
            .windows(2)
            .all(|w| w[0].0.end() <= w[1].0.start())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.entries)?)
    }

    /// Reads the entry array written by [`Schedule::to_json`].
    pub fn from_json(s: &str, horizon: Tick, kind: ScheduleKind) -> Result<Self> {
        let entries: Vec<ScheduleEntry> = serde_json::from_str(s)?;
        Ok(Self::from_entries(horizon, kind, entries))
    }
}

impl Serialize for Schedule {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.entries.serialize(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_sums_lengths() {
        assert_eq!(measure(&[Interval(0, 3), Interval(5, 7)]).unwrap(), 5);
        assert_eq!(measure(&[]).unwrap(), 0);
        assert_eq!(measure(&[Interval(3, 5)]).unwrap(), 2);
    }

    #[test]
    fn measure_rejects_overlap() {
        assert!(matches!(
            measure(&[Interval(0, 3), Interval(2, 7)]),
            Err(Error::OverlappingIntervals(2, 7))
        ));
        assert!(measure(&[Interval(4, 3)]).is_err());
    }

    #[test]
    fn entry_json_layout() {
        let e = ScheduleEntry {
            id: SegmentId::new(2, 0, 1),
            demand: 2,
            release: Some(7),
            start: Some(7),
            finish: None,
            intervals: vec![Interval(7, 8)],
        };
        let v: serde_json::Value = serde_json::to_value(&e).unwrap();
        assert_eq!(v["task"], 2);
        assert_eq!(v["seg"], 1);
        assert!(v["finish"].is_null());
        assert_eq!(v["intervals"], serde_json::json!([[7, 8]]));
        let s = Schedule::from_entries(10, ScheduleKind::Online, vec![e]);
        let arr: serde_json::Value = serde_json::from_str(&s.to_json().unwrap()).unwrap();
        assert!(arr.is_array());
    }
}
