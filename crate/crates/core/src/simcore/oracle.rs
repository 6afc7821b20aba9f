//! Interference queries and the fixed-point finishing-time oracle.
//!
//! Nothing here looks at how a schedule was produced. The oracle only uses
//! the recorded execution slices, releases and demands, and recomputes each
//! finishing time as the least `t` with `t >= r + W(r, t) + C`, where
//! `W(r, t)` is the time higher-ranked segments execute inside `[r, t)`.

use crate::error::{Error, Result};
use crate::model::{SegmentId, Tick};

use super::order::PriorityOrder;
use super::schedule::{Interval, Schedule};

/// Execution slices of a schedule annotated with the rank of their owner.
#[derive(Debug, Clone)]
pub struct Timeline {
    slices: Vec<(Interval, usize)>,
}

impl Timeline {
    pub fn new(sched: &Schedule, order: &PriorityOrder) -> Result<Self> {
        let mut slices = Vec::new();
        for e in sched.entries() {
            let r = order.rank(&e.id).ok_or(Error::MissingRank(e.id))?;
            slices.extend(e.intervals.iter().map(|iv| (*iv, r)));
        }
        slices.sort();
        Ok(Self { slices })
    }

    fn first_ending_after(&self, a: Tick) -> usize {
        self.slices.partition_point(|(iv, _)| iv.end() <= a)
    }

    /// Time in `[a, b)` during which segments ranked strictly above `rank`
    /// execute.
    pub fn interference(&self, rank: usize, a: Tick, b: Tick) -> Tick {
        self.slices[self.first_ending_after(a)..]
            .iter()
            .take_while(|(iv, _)| iv.start() < b)
            .filter(|(_, r)| *r < rank)
            .map(|(iv, _)| iv.overlap(a, b))
            .sum()
    }

    /// Least `t >= release + demand` with
    /// `t >= release + interference(rank, release, t) + demand`.
    ///
    /// Returns `None` if more than `max_iter` iterations are needed.
    pub fn least_fixed_point(
        &self,
        rank: usize,
        release: Tick,
        demand: Tick,
        max_iter: u64,
    ) -> Option<Tick> {
        let mut pos = self.first_ending_after(release);
        let mut scanned = release;
        let mut w = 0;
        let mut t = release + demand;
        for _ in 0..max_iter {
            // extend W(release, scanned) to W(release, t)
            while let Some(&(iv, r)) = self.slices.get(pos) {
                if iv.start() >= t {
                    break;
                }
                if r < rank {
                    w += iv.overlap(scanned, t);
                }
                if iv.end() <= t {
                    pos += 1;
                } else {
                    break;
                }
            }
            scanned = t;
            let next = release + w + demand;
            if next == t {
                return Some(t);
            }
            t = next;
        }
        None
    }
}

/// `W(a, b)` of segment `id`: time higher-ranked segments execute in `[a, b)`.
pub fn interference(
    sched: &Schedule,
    order: &PriorityOrder,
    id: &SegmentId,
    window: (Tick, Tick),
) -> Result<Tick> {
    sched.entry(id).ok_or(Error::UnknownSegment(*id))?;
    let rank = order.rank(id).ok_or(Error::MissingRank(*id))?;
    Ok(Timeline::new(sched, order)?.interference(rank, window.0, window.1))
}

/// Recomputes the finishing time of a completed segment from its release,
/// its demand and the execution of higher-ranked segments.
pub fn fixed_point_finish(sched: &Schedule, order: &PriorityOrder, id: &SegmentId) -> Result<Tick> {
    let timeline = Timeline::new(sched, order)?;
    fixed_point_with(&timeline, sched, order, id)
}

pub(crate) fn fixed_point_with(
    timeline: &Timeline,
    sched: &Schedule,
    order: &PriorityOrder,
    id: &SegmentId,
) -> Result<Tick> {
    let e = sched.entry(id).ok_or(Error::UnknownSegment(*id))?;
    let (Some(release), Some(_)) = (e.release, e.finish) else {
        return Err(Error::Incomplete(*id));
    };
    let rank = order.rank(id).ok_or(Error::MissingRank(*id))?;
    let max_iter = sched.horizon.max(1).saturating_mul(10);
    timeline
        .least_fixed_point(rank, release, e.demand, max_iter)
        .ok_or(Error::NoConvergence(*id))
}

impl Timeline {
    /// Segments whose recorded finish differs from the oracle's.
    pub fn finish_mismatches(
        &self,
        sched: &Schedule,
        order: &PriorityOrder,
    ) -> Result<Vec<(SegmentId, Tick, Tick)>> {
        let mut out = Vec::new();
        for e in sched.entries().iter().filter(|e| e.is_complete()) {
            let oracle = fixed_point_with(self, sched, order, &e.id)?;
            let recorded = e.finish.unwrap_or(Tick::MAX);
            if oracle != recorded {
                out.push((e.id, recorded, oracle));
            }
        }
        Ok(out)
    }
}

/// Segments violating work conservation: somewhere in `[release, finish)`
/// neither the segment nor a higher-ranked one executes.
pub fn audit_work_conservation(sched: &Schedule, order: &PriorityOrder) -> Result<Vec<SegmentId>> {
    let timeline = Timeline::new(sched, order)?;
    let mut bad = Vec::new();
    for e in sched.entries() {
        let (Some(r), Some(f)) = (e.release, e.finish) else {
            continue;
        };
        let rank = order.rank(&e.id).ok_or(Error::MissingRank(e.id))?;
        let own: Tick = e.intervals.iter().map(|iv| iv.overlap(r, f)).sum();
        if timeline.interference(rank, r, f) + own != f - r {
            bad.push(e.id);
        }
    }
    Ok(bad)
}

/// Segments violating the nominal lower bound on interference:
/// `W(s, f) >= sum of C over segments finishing strictly inside (s, f)`.
pub fn audit_interference_lower_bound(
    sched: &Schedule,
    order: &PriorityOrder,
) -> Result<Vec<SegmentId>> {
    let timeline = Timeline::new(sched, order)?;
    let mut finishes: Vec<(Tick, Tick)> = sched
        .entries()
        .iter()
        .filter_map(|e| e.finish.map(|f| (f, e.demand)))
        .collect();
    finishes.sort();
    let mut prefix = Vec::with_capacity(finishes.len() + 1);
    prefix.push(0);
    for (_, c) in &finishes {
        prefix.push(prefix.last().unwrap() + c);
    }
    // sum of demands with finish in the open interval (a, b)
    let between = |a: Tick, b: Tick| {
        let lo = finishes.partition_point(|(f, _)| *f <= a);
        let hi = finishes.partition_point(|(f, _)| *f < b);
        if hi > lo {
            prefix[hi] - prefix[lo]
        } else {
            0
        }
    };
    let mut bad = Vec::new();
    for e in sched.entries() {
        let (Some(s), Some(f)) = (e.start, e.finish) else {
            continue;
        };
        let rank = order.rank(&e.id).ok_or(Error::MissingRank(e.id))?;
        if timeline.interference(rank, s, f) < between(s, f) {
            bad.push(e.id);
        }
    }
    Ok(bad)
}
