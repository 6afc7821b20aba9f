//! Nominal plans and the exact schedulability test.
//!
//! A [`NominalPlan`] is the offline half of the approach: the worst-case
//! schedule over one hyperperiod plus what the online treatments need from
//! it, namely the nominal release time of every segment (release
//! enforcement) and the order of nominal finishing times (preference
//! scheduling). For synchronous periodic tasks with constrained deadlines
//! the nominal schedule repeats every hyperperiod, so a plan without misses
//! is a proof that both treated online schedules meet every deadline.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{expand_jobs, hyperperiod, JobId, SegmentId, TaskSet, Tick};
use crate::simcore::{
    assign_priorities, simulate, Demand, Policy, PriorityOrder, ReleaseRule, Schedule,
    ScheduleEntry, ScheduleKind, Stop,
};

#[derive(Debug, Clone)]
pub struct NominalPlan {
    pub taskset: TaskSet,
    pub policy: Policy,
    pub horizon: Tick,
    /// Segment priorities derived from `policy`.
    pub order: PriorityOrder,
    pub nominal: Schedule,
    /// Nominal release time of every segment.
    pub release_floors: HashMap<SegmentId, Tick>,
    /// Segments ordered by nominal finishing time, earliest first.
    pub preference: PriorityOrder,
    pub feasible: bool,
    /// Jobs that finished late or not at all, earliest deadline first.
    pub misses: Vec<JobId>,
}

impl NominalPlan {
    pub fn first_miss(&self) -> Option<JobId> {
        self.misses.first().copied()
    }
}

/// Simulates the nominal schedule over `horizon` (one hyperperiod by
/// default) and extracts release floors and the preference order.
pub fn build_nominal(ts: &TaskSet, policy: &Policy, horizon: Option<Tick>) -> Result<NominalPlan> {
    ts.ensure_valid()?;
    let horizon = match horizon {
        Some(h) => h,
        None => hyperperiod(ts)?,
    };
    let order = assign_priorities(ts, policy, horizon)?;
    let nominal = simulate(
        ts,
        &order,
        Demand::WorstCase,
        &ReleaseRule::Natural,
        horizon,
        Stop::AtHorizon,
    )?;
    derive_plan(ts.clone(), policy.clone(), horizon, order, nominal)
}

fn derive_plan(
    taskset: TaskSet,
    policy: Policy,
    horizon: Tick,
    order: PriorityOrder,
    nominal: Schedule,
) -> Result<NominalPlan> {
    let release_floors = nominal
        .entries()
        .iter()
        .map(|e| (e.id, e.release.unwrap_or(horizon)))
        .collect();

    let mut by_finish: Vec<(Tick, usize, SegmentId)> = Vec::with_capacity(nominal.entries().len());
    for e in nominal.entries() {
        let rank = order.rank(&e.id).ok_or(Error::MissingRank(e.id))?;
        by_finish.push((e.finish.unwrap_or(Tick::MAX), rank, e.id));
    }
    by_finish.sort_unstable();
    let preference = PriorityOrder::from_ranking(by_finish.into_iter().map(|x| x.2).collect())?;

    let mut misses: Vec<(Tick, JobId)> = expand_jobs(&taskset, horizon)
        .into_iter()
        .filter(|s| s.last)
        .filter(|s| {
            nominal
                .job_finish(s.id.job_id())
                .is_none_or(|f| f > s.job_deadline)
        })
        .map(|s| (s.job_deadline, s.id.job_id()))
        .collect();
    misses.sort();

    Ok(NominalPlan {
        feasible: misses.is_empty(),
        misses: misses.into_iter().map(|m| m.1).collect(),
        taskset,
        policy,
        horizon,
        order,
        nominal,
        release_floors,
        preference,
    })
}

#[derive(Debug, Clone)]
pub enum Verdict {
    Schedulable(Box<NominalPlan>),
    Miss(JobId),
}

impl Verdict {
    pub fn is_schedulable(&self) -> bool {
        matches!(self, Verdict::Schedulable(_))
    }
}

/// Exact test for the treated system: schedulable iff the nominal schedule
/// of the first hyperperiod meets every deadline.
///
/// Exactness relies on synchronous periodic releases and constrained
/// deadlines; with release offsets the verdict only covers the simulated
/// window.
pub fn exact_schedulability(ts: &TaskSet, policy: &Policy) -> Result<Verdict> {
    let plan = build_nominal(ts, policy, None)?;
    Ok(match plan.first_miss() {
        None => Verdict::Schedulable(Box::new(plan)),
        Some(job) => Verdict::Miss(job),
    })
}

#[derive(Debug, Clone)]
pub enum CombOutcome {
    /// The first feasible plan; `plan.policy` records which policy won.
    Feasible(Box<NominalPlan>),
    Infeasible,
}

/// Tries each policy in turn and returns the first feasible plan.
pub fn comb(ts: &TaskSet, policies: &[Policy]) -> Result<CombOutcome> {
    for p in policies {
        if let Verdict::Schedulable(plan) = exact_schedulability(ts, p)? {
            return Ok(CombOutcome::Feasible(plan));
        }
    }
    Ok(CombOutcome::Infeasible)
}

/// Default COMB policy list: EDF first, then RM.
pub fn comb_default(ts: &TaskSet) -> Result<CombOutcome> {
    comb(ts, &[Policy::Edf, Policy::Rm])
}

#[derive(Debug, Serialize, Deserialize)]
struct FloorRecord {
    #[serde(flatten)]
    id: SegmentId,
    floor: Tick,
}

#[derive(Debug, Serialize, Deserialize)]
struct RankRecord {
    #[serde(flatten)]
    id: SegmentId,
    rank: usize,
}

/// On-disk plan: the task set, the nominal schedule, the release floors and
/// the preference ranks (0 = highest), i.e. everything an online scheduler
/// needs as lookup tables.
#[derive(Debug, Serialize, Deserialize)]
struct PlanFile {
    taskset: TaskSet,
    policy: Policy,
    horizon: Tick,
    feasible: bool,
    misses: Vec<JobId>,
    schedule: Vec<ScheduleEntry>,
    release_floors: Vec<FloorRecord>,
    preference: Vec<RankRecord>,
}

impl NominalPlan {
    pub fn to_json(&self) -> Result<String> {
        let mut release_floors: Vec<_> = self
            .release_floors
            .iter()
            .map(|(id, f)| FloorRecord { id: *id, floor: *f })
            .collect();
        release_floors.sort_by_key(|r| r.id);
        let preference = self
            .preference
            .iter()
            .enumerate()
            .map(|(rank, id)| RankRecord { id: *id, rank })
            .collect();
        let file = PlanFile {
            taskset: self.taskset.clone(),
            policy: self.policy.clone(),
            horizon: self.horizon,
            feasible: self.feasible,
            misses: self.misses.clone(),
            schedule: self.nominal.entries().to_vec(),
            release_floors,
            preference,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Loads a plan and checks it against its own task set: every segment
    /// instance of the horizon must have a schedule entry, a floor and a
    /// unique preference rank.
    pub fn from_json(s: &str) -> Result<Self> {
        let file: PlanFile = serde_json::from_str(s)?;
        file.taskset.ensure_valid()?;
        let order = assign_priorities(&file.taskset, &file.policy, file.horizon)?;
        let instances = expand_jobs(&file.taskset, file.horizon);

        let nominal = Schedule::from_entries(file.horizon, ScheduleKind::Nominal, file.schedule);
        let release_floors: HashMap<_, _> = file
            .release_floors
            .iter()
            .map(|r| (r.id, r.floor))
            .collect();
        let mut ranked: Vec<_> = file.preference.iter().map(|r| (r.rank, r.id)).collect();
        ranked.sort();
        if ranked.iter().enumerate().any(|(i, (r, _))| *r != i) {
            return Err(Error::MalformedPlan("preference ranks are not 0..n".into()));
        }
        let preference = PriorityOrder::from_ranking(ranked.into_iter().map(|x| x.1).collect())?;

        if nominal.entries().len() != instances.len()
            || release_floors.len() != instances.len()
            || preference.len() != instances.len()
        {
            return Err(Error::MalformedPlan(format!(
                "expected {} segment instances",
                instances.len()
            )));
        }
        for s in &instances {
            if nominal.entry(&s.id).is_none() || !release_floors.contains_key(&s.id) {
                return Err(Error::MalformedPlan(format!("segment {} missing", s.id)));
            }
        }
        preference.ensure_total(&instances)?;

        Ok(Self {
            taskset: file.taskset,
            policy: file.policy,
            horizon: file.horizon,
            order,
            nominal,
            release_floors,
            preference,
            feasible: file.feasible,
            misses: file.misses,
        })
    }
}
