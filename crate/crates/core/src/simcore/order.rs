use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{expand_jobs, SegmentId, SegmentInstance, TaskId, TaskSet, Tick};

/// A strict total order over segment instances. Rank 0 is the highest
/// priority (or preference).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SegmentId>", into = "Vec<SegmentId>")]
pub struct PriorityOrder {
    ranking: Vec<SegmentId>,
    rank: HashMap<SegmentId, usize>,
}

impl PriorityOrder {
    /// Builds an order from a list sorted from highest to lowest.
    pub fn from_ranking(ranking: Vec<SegmentId>) -> Result<Self> {
        let mut rank = HashMap::with_capacity(ranking.len());
        for (r, id) in ranking.iter().enumerate() {
            if rank.insert(*id, r).is_some() {
                return Err(Error::DuplicateRank(*id));
            }
        }
        Ok(Self { ranking, rank })
    }

    pub fn rank(&self, id: &SegmentId) -> Option<usize> {
        self.rank.get(id).copied()
    }

    /// `true` if `a` is ranked strictly above `b`.
    pub fn precedes(&self, a: &SegmentId, b: &SegmentId) -> bool {
        match (self.rank(a), self.rank(b)) {
            (Some(x), Some(y)) => x < y,
            _ => false,
        }
    }

    pub fn len(&self) -> usize {
        self.ranking.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranking.is_empty()
    }

    /// Segments from highest to lowest rank.
    pub fn iter(&self) -> impl Iterator<Item = &SegmentId> {
        self.ranking.iter()
    }

    /// Checks that every instance is ranked.
    pub fn ensure_total(&self, instances: &[SegmentInstance]) -> Result<()> {
        match instances.iter().find(|s| !self.rank.contains_key(&s.id)) {
            Some(s) => Err(Error::MissingRank(s.id)),
            None => Ok(()),
        }
    }
}

impl TryFrom<Vec<SegmentId>> for PriorityOrder {
    type Error = Error;

    fn try_from(v: Vec<SegmentId>) -> Result<Self> {
        Self::from_ranking(v)
    }
}

impl From<PriorityOrder> for Vec<SegmentId> {
    fn from(o: PriorityOrder) -> Self {
        o.ranking
    }
}

/// How segment priorities are assigned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Policy {
    /// Rate monotonic: shorter period first.
    Rm,
    /// Earliest job deadline first, fixed per segment instance.
    Edf,
    /// Task-level fixed priority, tasks listed from highest to lowest.
    TaskFixed(Vec<TaskId>),
    /// A complete segment-level order.
    Explicit(PriorityOrder),
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Rm => "RM",
            Policy::Edf => "EDF",
            Policy::TaskFixed(_) => "T-FP",
            Policy::Explicit(_) => "explicit",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ranks every segment instance released before `horizon`.
///
/// Ties are broken lexicographically by task id, job index and segment
/// index, so RM ranks by `(period, task, job, seg)` and EDF by
/// `(absolute deadline, task, job, seg)`.
pub fn assign_priorities(ts: &TaskSet, policy: &Policy, horizon: Tick) -> Result<PriorityOrder> {
    let instances = expand_jobs(ts, horizon);
    let mut ids: Vec<SegmentId> = instances.iter().map(|s| s.id).collect();
    match policy {
        Policy::Rm => {
            let period: HashMap<TaskId, Tick> = ts.tasks.iter().map(|t| (t.id, t.period)).collect();
            ids.sort_by_key(|id| (period[&id.task], id.task, id.job, id.seg));
        }
        Policy::Edf => {
            let deadline: HashMap<SegmentId, Tick> =
                instances.iter().map(|s| (s.id, s.job_deadline)).collect();
            ids.sort_by_key(|id| (deadline[id], id.task, id.job, id.seg));
        }
        Policy::TaskFixed(list) => {
            let level: HashMap<TaskId, usize> =
                list.iter().enumerate().map(|(i, &t)| (t, i)).collect();
            for t in list {
                if ts.task(*t).is_none() {
                    return Err(Error::UnknownTask(*t));
                }
            }
            if let Some(t) = ts.tasks.iter().find(|t| !level.contains_key(&t.id)) {
                return Err(Error::UnknownTask(t.id));
            }
            ids.sort_by_key(|id| (level[&id.task], id.job, id.seg));
        }
        Policy::Explicit(order) => {
            order.ensure_total(&instances)?;
            return Ok(order.clone());
        }
    }
    PriorityOrder::from_ranking(ids)
}
