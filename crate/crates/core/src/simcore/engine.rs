use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use crate::behavior::RuntimeBehavior;
use crate::error::{Error, Result};
use crate::model::{expand_jobs, SegmentId, TaskSet, Tick};

use super::order::PriorityOrder;
use super::schedule::{Interval, Schedule, ScheduleEntry, ScheduleKind};

/// Execution and suspension lengths used by a run.
#[derive(Debug, Clone, Copy)]
pub enum Demand<'a> {
    /// WCETs, maximum suspensions and maximum jitter: the nominal schedule.
    WorstCase,
    /// Per-segment actual values.
    Actual(&'a RuntimeBehavior),
}

/// When a segment counts as released.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReleaseRule {
    /// Once its job is released and the preceding suspension is over.
    Natural,
    /// Additionally never before the given floor (the nominal release).
    Enforced(HashMap<SegmentId, Tick>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    /// Stop at the horizon; unfinished segments are recorded as incomplete.
    AtHorizon,
    /// Run until every segment released before the horizon has finished.
    Drain,
}

/// Simulates preemptive S-FP scheduling of every job released before
/// `horizon`.
///
/// At each instant completions are processed first, then releases and
/// suspension expiries, then the ready segment with the smallest rank is
/// dispatched. A newly released segment with a smaller rank preempts the
/// running one immediately.
pub fn simulate(
    ts: &TaskSet,
    order: &PriorityOrder,
    demand: Demand<'_>,
    rule: &ReleaseRule,
    horizon: Tick,
    stop: Stop,
) -> Result<Schedule> {
    let instances = expand_jobs(ts, horizon);
    let n = instances.len();
    let index: HashMap<SegmentId, usize> = instances
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id, i))
        .collect();

    let mut rank = Vec::with_capacity(n);
    let mut exec = Vec::with_capacity(n);
    let mut susp = Vec::with_capacity(n);
    let mut floor = Vec::with_capacity(n);
    let mut next = Vec::with_capacity(n);
    for s in &instances {
        rank.push(order.rank(&s.id).ok_or(Error::MissingRank(s.id))?);
        let (c, sb) = match demand {
            Demand::WorstCase => (s.wcet, s.max_susp_before),
            Demand::Actual(b) => {
                let d = b.draw(&s.id).ok_or_else(|| {
                    Error::BehaviorMismatch(format!("no draw for segment {}", s.id))
                })?;
                (d.exec, d.susp)
            }
        };
        exec.push(c);
        susp.push(sb);
        floor.push(match rule {
            ReleaseRule::Natural => 0,
            ReleaseRule::Enforced(f) => *f.get(&s.id).ok_or(Error::MissingFloor(s.id))?,
        });
        next.push(if s.last {
            None
        } else {
            Some(index[&SegmentId::new(s.id.task, s.id.job, s.id.seg + 1)])
        });
    }

    let mut entries: Vec<ScheduleEntry> = instances
        .iter()
        .zip(&exec)
        .map(|(s, &c)| ScheduleEntry {
            id: s.id,
            demand: c,
            release: None,
            start: None,
            finish: None,
            intervals: Vec::new(),
        })
        .collect();

    let mut events: BinaryHeap<Reverse<(Tick, usize)>> = BinaryHeap::new();
    for (i, s) in instances.iter().enumerate() {
        if s.id.seg == 0 {
            events.push(Reverse(((s.job_release + susp[i]).max(floor[i]), i)));
        }
    }

    let mut remaining = exec.clone();
    let mut ready: BinaryHeap<Reverse<(usize, usize)>> = BinaryHeap::new();
    let limit = match stop {
        Stop::AtHorizon => horizon,
        Stop::Drain => Tick::MAX,
    };
    let mut t: Tick = 0;

    loop {
        while let Some(&Reverse((rt, i))) = events.peek() {
            if rt > t {
                break;
            }
            events.pop();
            entries[i].release = Some(rt);
            ready.push(Reverse((rank[i], i)));
        }
        if t >= limit {
            break;
        }
        let Some(&Reverse((_, cur))) = ready.peek() else {
            match events.peek() {
                Some(&Reverse((rt, _))) => {
                    t = rt.min(limit);
                    continue;
                }
                None => break,
            }
        };
        let next_event = events.peek().map_or(Tick::MAX, |e| e.0 .0);
        let until = next_event.min(t + remaining[cur]).min(limit);

        let e = &mut entries[cur];
        e.start.get_or_insert(t);
        match e.intervals.last_mut() {
            Some(iv) if iv.1 == t => iv.1 = until,
            _ => e.intervals.push(Interval(t, until)),
        }
        remaining[cur] -= until - t;
        t = until;

        if remaining[cur] == 0 {
            ready.pop();
            entries[cur].finish = Some(t);
            if let Some(nx) = next[cur] {
                events.push(Reverse(((t + susp[nx]).max(floor[nx]), nx)));
            }
        }
    }

    let kind = match demand {
        Demand::WorstCase => ScheduleKind::Nominal,
        Demand::Actual(_) => ScheduleKind::Online,
    };
    Ok(Schedule::from_entries(horizon, kind, entries))
}
