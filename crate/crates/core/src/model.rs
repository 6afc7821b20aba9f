//! Task, job and segment model.
//!
//! A task alternates computation segments and suspension intervals:
//! `C0, S0, C1, S1, ..., C(M-1)`. Release jitter is treated as one more
//! suspension *in front of* the first segment whose maximum length is the
//! task's `jitter_max`; it may be zero, every other suspension is at least
//! one tick.
//!
//! All times are integer ticks. A task set carries `tick_scale`, the number
//! of ticks per model time unit, so that fractional figure values such as
//! 9.6 stay exact.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Type of time instants and durations, in ticks.
pub type Tick = u64;

pub type TaskId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuspendingTask {
    pub id: TaskId,
    pub period: Tick,
    pub deadline: Tick,
    #[serde(default)]
    pub jitter_max: Tick,
    #[serde(default)]
    pub first_release: Tick,
    /// Worst-case execution time of every computation segment.
    pub execs: Vec<Tick>,
    /// Maximum length of the suspension between consecutive segments.
    pub susps: Vec<Tick>,
}

impl SuspendingTask {
    /// Implicit-deadline, jitter-free task released at time zero.
    pub fn new(id: TaskId, period: Tick, execs: Vec<Tick>, susps: Vec<Tick>) -> Self {
        Self {
            id,
            period,
            deadline: period,
            jitter_max: 0,
            first_release: 0,
            execs,
            susps,
        }
    }

    pub fn with_deadline(self, deadline: Tick) -> Self {
        Self { deadline, ..self }
    }

    pub fn with_jitter(self, jitter_max: Tick) -> Self {
        Self { jitter_max, ..self }
    }

    /// Builds a task from the interleaved `(C0, S0, C1, ..., C(M-1))` notation.
    ///
    /// # Panics
    /// If `pattern` has even length.
    pub fn from_pattern(id: TaskId, period: Tick, pattern: &[Tick]) -> Self {
        assert!(
            pattern.len() % 2 == 1,
            "pattern must start and end with a segment"
        );
        let execs = pattern.iter().step_by(2).copied().collect();
        let susps = pattern.iter().skip(1).step_by(2).copied().collect();
        Self::new(id, period, execs, susps)
    }

    pub fn segment_count(&self) -> usize {
        self.execs.len()
    }

    pub fn total_exec(&self) -> Tick {
        self.execs.iter().sum()
    }

    pub fn total_susp(&self) -> Tick {
        self.susps.iter().sum()
    }

    pub fn utilization(&self) -> f64 {
        self.total_exec() as f64 / self.period as f64
    }

    /// Release time of job `k`.
    pub fn release(&self, k: u32) -> Tick {
        self.first_release + u64::from(k) * self.period
    }

    /// Number of jobs released strictly before `horizon`.
    pub fn jobs_before(&self, horizon: Tick) -> u32 {
        if horizon <= self.first_release || self.period == 0 {
            return 0;
        }
        let span = horizon - self.first_release;
        u32::try_from(span.div_ceil(self.period)).unwrap_or(u32::MAX)
    }

    /// Maximum suspension in front of segment `j`: the jitter bound for the
    /// first segment, the preceding suspension interval otherwise.
    pub fn max_susp_before(&self, j: usize) -> Tick {
        if j == 0 {
            self.jitter_max
        } else {
            self.susps[j - 1]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSet {
    pub tick_scale: u64,
    pub tasks: Vec<SuspendingTask>,
}

impl TaskSet {
    pub fn new(tick_scale: u64, tasks: Vec<SuspendingTask>) -> Self {
        Self { tick_scale, tasks }
    }

    pub fn task(&self, id: TaskId) -> Option<&SuspendingTask> {
        self.tasks.iter().find(|t| t.id == id)
    }

    pub fn utilization(&self) -> f64 {
        self.tasks.iter().map(SuspendingTask::utilization).sum()
    }

    /// Copy of the set with every release jitter bound set to zero.
    pub fn without_jitter(&self) -> Self {
        let mut ts = self.clone();
        for t in &mut ts.tasks {
            t.jitter_max = 0;
        }
        ts
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Fails with every violated invariant unless the set is valid.
    pub fn ensure_valid(&self) -> Result<()> {
        let v = validate_taskset(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidTaskSet(v))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JobId {
    pub task: TaskId,
    pub job: u32,
}

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tau{}/J{}", self.task, self.job)
    }
}

/// Identity of one computation segment of one job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SegmentId {
    pub task: TaskId,
    pub job: u32,
    pub seg: u32,
}

impl SegmentId {
    pub fn new(task: TaskId, job: u32, seg: u32) -> Self {
        Self { task, job, seg }
    }

    pub fn job_id(&self) -> JobId {
        JobId {
            task: self.task,
            job: self.job,
        }
    }
}

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tau{}/J{}/s{}", self.task, self.job, self.seg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentInstance {
    pub id: SegmentId,
    pub wcet: Tick,
    /// Jitter bound for the first segment of a job, the preceding
    /// suspension bound otherwise.
    pub max_susp_before: Tick,
    pub job_release: Tick,
    pub job_deadline: Tick,
    /// Whether this is the job's last segment.
    pub last: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    EmptyTaskSet,
    ZeroTickScale,
    DuplicateId,
    ZeroPeriod,
    NoSegments,
    SuspensionCount,
    ZeroExecution,
    ZeroSuspension,
    DeadlineExceedsPeriod,
    ZeroDeadline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub task: Option<TaskId>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ViolationKind::*;
        let msg = match self.kind {
            EmptyTaskSet => "task set is empty",
            ZeroTickScale => "tick scale must be positive",
            DuplicateId => "task id is not unique",
            ZeroPeriod => "period must be positive",
            NoSegments => "task needs at least one segment",
            SuspensionCount => "need exactly one suspension between consecutive segments",
            ZeroExecution => "execution must be ≥ 1 tick",
            ZeroSuspension => "suspension must be ≥ 1 tick",
            DeadlineExceedsPeriod => "constrained deadline required",
            ZeroDeadline => "deadline must be positive",
        };
        match self.task {
            Some(id) => write!(f, "task {id}: {msg}"),
            None => f.write_str(msg),
        }
    }
}

/// Returns every violated invariant; an empty list means the set is valid.
///
/// Feasibility is *not* checked here: a task whose jitter, execution and
/// suspension do not fit its deadline is still a valid task.
pub fn validate_taskset(ts: &TaskSet) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |task, kind| out.push(Violation { task, kind });
    if ts.tasks.is_empty() {
        push(None, ViolationKind::EmptyTaskSet);
    }
    if ts.tick_scale == 0 {
        push(None, ViolationKind::ZeroTickScale);
    }
    let mut seen = HashSet::new();
    for t in &ts.tasks {
        let id = Some(t.id);
        if !seen.insert(t.id) {
            push(id, ViolationKind::DuplicateId);
        }
        if t.period == 0 {
            push(id, ViolationKind::ZeroPeriod);
        }
        if t.deadline == 0 {
            push(id, ViolationKind::ZeroDeadline);
        }
        if t.deadline > t.period {
            push(id, ViolationKind::DeadlineExceedsPeriod);
        }
        if t.execs.is_empty() {
            push(id, ViolationKind::NoSegments);
        } else if t.susps.len() != t.execs.len() - 1 {
            push(id, ViolationKind::SuspensionCount);
        }
        if t.execs.contains(&0) {
            push(id, ViolationKind::ZeroExecution);
        }
        if t.susps.contains(&0) {
            push(id, ViolationKind::ZeroSuspension);
        }
    }
    out
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Least common multiple of all periods.
pub fn hyperperiod(ts: &TaskSet) -> Result<Tick> {
    ts.tasks.iter().try_fold(1u64, |acc, t| {
        if t.period == 0 {
            return Err(Error::InvalidTaskSet(vec![Violation {
                task: Some(t.id),
                kind: ViolationKind::ZeroPeriod,
            }]));
        }
        (acc / gcd(acc, t.period))
            .checked_mul(t.period)
            .ok_or(Error::HyperperiodOverflow)
    })
}

/// One instance per segment of every job released before `horizon`,
/// ordered by job release, then task id, then segment index.
///
/// Inclusion is by release only: the segments of a job released just before
/// the horizon are all present even if they cannot finish before it.
pub fn expand_jobs(ts: &TaskSet, horizon: Tick) -> Vec<SegmentInstance> {
    let mut out = Vec::new();
    for t in &ts.tasks {
        for k in 0..t.jobs_before(horizon) {
            let r = t.release(k);
            let m = t.segment_count();
            for j in 0..m {
                out.push(SegmentInstance {
                    id: SegmentId::new(t.id, k, j as u32),
                    wcet: t.execs[j],
                    max_susp_before: t.max_susp_before(j),
                    job_release: r,
                    job_deadline: r + t.deadline,
                    last: j + 1 == m,
                });
            }
        }
    }
    out.sort_by_key(|s| (s.job_release, s.id.task, s.id.seg, s.id.job));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig3() -> TaskSet {
        TaskSet::new(
            1,
            vec![
                SuspendingTask::from_pattern(1, 10, &[3, 2, 2]),
                SuspendingTask::from_pattern(2, 11, &[2, 2, 2]),
            ],
        )
    }

    #[test]
    fn figure_task_is_valid() {
        let ts = TaskSet::new(1, vec![SuspendingTask::from_pattern(1, 10, &[3, 2, 2])]);
        assert!(validate_taskset(&ts).is_empty());
    }

    #[test]
    fn zero_suspension_is_reported() {
        let ts = TaskSet::new(1, vec![SuspendingTask::from_pattern(1, 10, &[3, 0, 2])]);
        let v = validate_taskset(&ts);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::ZeroSuspension);
        assert!(v[0].to_string().contains("suspension must be ≥ 1 tick"));
    }

    #[test]
    fn deadline_past_period_is_reported() {
        let t = SuspendingTask::from_pattern(1, 10, &[3, 2, 2]).with_deadline(11);
        let v = validate_taskset(&TaskSet::new(1, vec![t]));
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().contains("constrained deadline required"));
    }

    #[test]
    fn every_violation_is_listed() {
        let mut bad = SuspendingTask::new(1, 0, vec![0, 2], vec![]);
        bad.deadline = 5;
        let ts = TaskSet::new(0, vec![bad.clone(), bad]);
        let kinds: Vec<_> = validate_taskset(&ts).into_iter().map(|v| v.kind).collect();
        for k in [
            ViolationKind::ZeroTickScale,
            ViolationKind::DuplicateId,
            ViolationKind::ZeroPeriod,
            ViolationKind::DeadlineExceedsPeriod,
            ViolationKind::SuspensionCount,
            ViolationKind::ZeroExecution,
        ] {
            assert!(kinds.contains(&k), "{k:?} missing from {kinds:?}");
        }
        assert!(validate_taskset(&TaskSet::new(1, vec![]))
            .iter()
            .any(|v| v.kind == ViolationKind::EmptyTaskSet));
    }

    #[test]
    fn hyperperiods() {
        assert_eq!(hyperperiod(&fig3()).unwrap(), 110);
        let menu = [1, 2, 5, 10, 20, 50, 100, 200, 1000];
        let ts = TaskSet::new(
            1,
            menu.iter()
                .enumerate()
                .map(|(i, &p)| SuspendingTask::new(i as u32, p, vec![1], vec![]))
                .collect(),
        );
        assert_eq!(hyperperiod(&ts).unwrap(), 1000);
        let single = TaskSet::new(1, vec![SuspendingTask::new(0, 12, vec![1], vec![])]);
        assert_eq!(hyperperiod(&single).unwrap(), 12);
    }

    #[test]
    fn hyperperiod_overflow_is_an_error() {
        let primes = [4_294_967_291u64, 4_294_967_279, 4_294_967_231];
        let ts = TaskSet::new(
            1,
            primes
                .iter()
                .enumerate()
                .map(|(i, &p)| SuspendingTask::new(i as u32, p, vec![1], vec![]))
                .collect(),
        );
        assert!(matches!(hyperperiod(&ts), Err(Error::HyperperiodOverflow)));
    }

    #[test]
    fn expansion_of_figure_set() {
        let inst = expand_jobs(&fig3(), 26);
        assert_eq!(inst.len(), 12);
        assert_eq!(inst.iter().filter(|s| s.id.task == 1).count(), 6);
        assert!(inst.iter().all(|s| s.job_release < 26));
        // ordered by (release, task, seg)
        let keys: Vec<_> = inst
            .iter()
            .map(|s| (s.job_release, s.id.task, s.id.seg))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(inst[0].id, SegmentId::new(1, 0, 0));
        assert_eq!(inst[2].id, SegmentId::new(2, 0, 0));
        let last_job = inst.iter().filter(|s| s.job_release == 22).count();
        assert_eq!(last_job, 2);
    }

    #[test]
    fn expansion_edge_cases() {
        assert!(expand_jobs(&fig3(), 0).is_empty());
        let ts = TaskSet::new(1, vec![SuspendingTask::from_pattern(0, 12, &[1, 1, 1])]);
        assert_eq!(expand_jobs(&ts, 24).len(), 4);
    }

    #[test]
    fn first_segment_carries_jitter_bound() {
        let t = SuspendingTask::from_pattern(0, 10, &[1, 2, 3]).with_jitter(2);
        let inst = expand_jobs(&TaskSet::new(1, vec![t]), 10);
        assert_eq!(inst[0].max_susp_before, 2);
        assert_eq!(inst[1].max_susp_before, 2);
        assert!(inst[1].last && !inst[0].last);
        assert_eq!(inst[0].job_deadline, 10);
    }

    #[test]
    fn json_schema_fields() {
        let json = r#"{ "tick_scale": 10, "tasks": [ { "id": 3, "period": 100,
            "deadline": 90, "jitter_max": 5, "first_release": 0,
            "execs": [30, 20], "susps": [20] } ] }"#;
        let ts = TaskSet::from_json(json).unwrap();
        assert_eq!(ts.tasks[0].deadline, 90);
        assert_eq!(ts.tasks[0].jitter_max, 5);
        let back = TaskSet::from_json(&ts.to_json().unwrap()).unwrap();
        assert_eq!(back, ts);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn task_strategy(id: TaskId) -> impl Strategy<Value = SuspendingTask> {
        (1u64..40, 1usize..4, 0u64..20).prop_map(move |(period, m, offset)| {
            let mut t = SuspendingTask::new(id, period, vec![1; m], vec![1; m - 1]);
            t.first_release = offset;
            t
        })
    }

    proptest! {
        #[test]
        fn expansion_count_matches_formula(
            tasks in (1usize..5).prop_flat_map(|n| {
                (0..n).map(|i| task_strategy(i as u32)).collect::<Vec<_>>()
            }),
            horizon in 0u64..200,
        ) {
            let ts = TaskSet::new(1, tasks);
            let expected: u64 = ts.tasks.iter().map(|t| {
                let jobs = if horizon > t.first_release {
                    (horizon - t.first_release).div_ceil(t.period)
                } else {
                    0
                };
                jobs * t.segment_count() as u64
            }).sum();
            prop_assert_eq!(expand_jobs(&ts, horizon).len() as u64, expected);
            let h = hyperperiod(&ts).unwrap();
            for t in &ts.tasks {
                prop_assert_eq!(h % t.period, 0);
            }
        }
    }
}
