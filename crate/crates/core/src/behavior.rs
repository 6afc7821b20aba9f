//! Runtime behaviors and online runs.
//!
//! A [`RuntimeBehavior`] fixes, for every segment instance, how long it
//! actually executes and how long it was suspended before becoming ready
//! (for the first segment of a job: its actual release jitter). Online runs
//! replay a behavior against a [`NominalPlan`] with or without a treatment,
//! and [`check_anomaly_free`] compares the result with the nominal
//! finishing times.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{expand_jobs, SegmentId, SegmentInstance, TaskSet, Tick};
use crate::seeds;
use crate::simcore::{simulate, Demand, Policy, ReleaseRule, Schedule, Stop};
use crate::treatments::{build_nominal, NominalPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentDraw {
    #[serde(flatten)]
    pub id: SegmentId,
    /// Actual execution time, `1..=wcet`.
    pub exec: Tick,
    /// Actual suspension before the segment: jitter in `0..=jitter_max` for
    /// the first segment of a job, `1..=max` otherwise.
    pub susp: Tick,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "BehaviorFile", into = "BehaviorFile")]
pub struct RuntimeBehavior {
    pub seed: Option<u64>,
    draws: Vec<SegmentDraw>,
    index: HashMap<SegmentId, usize>,
}

#[derive(Serialize, Deserialize)]
struct BehaviorFile {
    seed: Option<u64>,
    draws: Vec<SegmentDraw>,
}

impl From<BehaviorFile> for RuntimeBehavior {
    fn from(f: BehaviorFile) -> Self {
        Self::from_draws(f.seed, f.draws)
    }
}

impl From<RuntimeBehavior> for BehaviorFile {
    fn from(b: RuntimeBehavior) -> Self {
        Self {
            seed: b.seed,
            draws: b.draws,
        }
    }
}

impl RuntimeBehavior {
    pub fn from_draws(seed: Option<u64>, draws: Vec<SegmentDraw>) -> Self {
        let index = draws.iter().enumerate().map(|(i, d)| (d.id, i)).collect();
        Self { seed, draws, index }
    }

    /// Every segment at its worst case: WCET, maximum suspension, maximum
    /// jitter. Replaying it reproduces the nominal schedule.
    pub fn worst_case(ts: &TaskSet, horizon: Tick) -> Self {
        let draws = expand_jobs(ts, horizon)
            .into_iter()
            .map(|s| SegmentDraw {
                id: s.id,
                exec: s.wcet,
                susp: s.max_susp_before,
            })
            .collect();
        Self::from_draws(None, draws)
    }

    pub fn draw(&self, id: &SegmentId) -> Option<&SegmentDraw> {
        self.index.get(id).map(|&i| &self.draws[i])
    }

    pub fn draws(&self) -> &[SegmentDraw] {
        &self.draws
    }

    fn draw_mut(&mut self, id: &SegmentId) -> Result<&mut SegmentDraw> {
        let i = *self.index.get(id).ok_or(Error::UnknownSegment(*id))?;
        Ok(&mut self.draws[i])
    }

    /// Replaces the actual execution time of one segment.
    pub fn with_exec(mut self, id: SegmentId, exec: Tick) -> Result<Self> {
        self.draw_mut(&id)?.exec = exec;
        Ok(self)
    }

    /// Replaces the suspension (or, for a first segment, jitter) in front of
    /// one segment.
    pub fn with_susp(mut self, id: SegmentId, susp: Tick) -> Result<Self> {
        self.draw_mut(&id)?.susp = susp;
        Ok(self)
    }

    /// Checks that the behavior covers exactly the given instances and that
    /// every draw respects its bounds.
    pub fn validate(&self, instances: &[SegmentInstance]) -> Result<()> {
        if instances.len() != self.draws.len() {
            return Err(Error::BehaviorMismatch(format!(
                "{} draws for {} segment instances",
                self.draws.len(),
                instances.len()
            )));
        }
        for s in instances {
            let d = self
                .draw(&s.id)
                .ok_or_else(|| Error::BehaviorMismatch(format!("no draw for segment {}", s.id)))?;
            if d.exec == 0 || d.exec > s.wcet {
                return Err(Error::DrawOutOfBounds {
                    id: s.id,
                    detail: format!("execution {} not in [1, {}]", d.exec, s.wcet),
                });
            }
            let min_susp = if s.id.seg == 0 { 0 } else { 1 };
            if d.susp < min_susp || d.susp > s.max_susp_before {
                return Err(Error::DrawOutOfBounds {
                    id: s.id,
                    detail: format!(
                        "suspension {} not in [{min_susp}, {}]",
                        d.susp, s.max_susp_before
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Lower ends of the sampling ranges as fractions of the maxima.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    /// Actual execution is drawn from `[ceil(exec_floor * C), C]`.
    pub exec_floor: f64,
    /// Actual suspension is drawn from `[ceil(susp_floor * S), S]`.
    pub susp_floor: f64,
}

impl Default for Profile {
    fn default() -> Self {
        Self {
            exec_floor: 0.5,
            susp_floor: 0.5,
        }
    }
}

impl Profile {
    pub fn new(exec_floor: f64, susp_floor: f64) -> Result<Self> {
        for (name, v) in [("exec_floor", exec_floor), ("susp_floor", susp_floor)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be in (0, 1], got {v}"
                )));
            }
        }
        Ok(Self {
            exec_floor,
            susp_floor,
        })
    }

    /// Every value from one tick up to the maximum.
    pub fn full_range() -> Self {
        Self {
            exec_floor: f64::MIN_POSITIVE,
            susp_floor: f64::MIN_POSITIVE,
        }
    }
}

fn lower_bound(floor: f64, max: Tick) -> Tick {
    ((floor * max as f64).ceil() as Tick).clamp(1, max.max(1))
}

/// Draws uniform actual execution, suspension and jitter values for every
/// segment instance released before `horizon`. Jitter is drawn
/// independently per job from `[0, jitter_max]`.
pub fn sample_behavior(
    ts: &TaskSet,
    horizon: Tick,
    profile: Profile,
    seed: u64,
) -> RuntimeBehavior {
    let mut rng = seeds::rng(seed);
    let draws = expand_jobs(ts, horizon)
        .into_iter()
        .map(|s| {
            let exec = rng.random_range(lower_bound(profile.exec_floor, s.wcet)..=s.wcet);
            let susp = if s.id.seg == 0 {
                rng.random_range(0..=s.max_susp_before)
            } else {
                rng.random_range(
                    lower_bound(profile.susp_floor, s.max_susp_before)..=s.max_susp_before,
                )
            };
            SegmentDraw {
                id: s.id,
                exec,
                susp,
            }
        })
        .collect();
    RuntimeBehavior::from_draws(Some(seed), draws)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Original priorities, natural releases.
    Untreated,
    /// Original priorities, no segment released before its nominal release.
    Enforce,
    /// Segments ranked by nominal finishing time, natural releases.
    Preference,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Untreated, Mode::Enforce, Mode::Preference];
}

/// Runs the online schedule of `plan` under behavior `b`. The run continues
/// past the horizon until every job of the hyperperiod has finished.
pub fn run_online(plan: &NominalPlan, b: &RuntimeBehavior, mode: Mode) -> Result<Schedule> {
    b.validate(&expand_jobs(&plan.taskset, plan.horizon))?;
    let natural = ReleaseRule::Natural;
    let enforced;
    let (order, rule) = match mode {
        Mode::Untreated => (&plan.order, &natural),
        Mode::Enforce => {
            enforced = ReleaseRule::Enforced(plan.release_floors.clone());
            (&plan.order, &enforced)
        }
        Mode::Preference => (&plan.preference, &natural),
    };
    simulate(
        &plan.taskset,
        order,
        Demand::Actual(b),
        rule,
        plan.horizon,
        Stop::Drain,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinishViolation {
    #[serde(flatten)]
    pub id: SegmentId,
    pub nominal_finish: Option<Tick>,
    pub online_finish: Option<Tick>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub violations: Vec<FinishViolation>,
    pub anomaly_free: bool,
}

/// Lists every segment that finishes later online than nominally. An
/// incomplete online segment counts as finishing at infinity.
pub fn check_anomaly_free(plan: &NominalPlan, online: &Schedule) -> AnomalyReport {
    let violations: Vec<_> = plan
        .nominal
        .entries()
        .iter()
        .filter_map(|e| {
            let nominal = e.finish.unwrap_or(Tick::MAX);
            let online_finish = online.finish(&e.id);
            (online_finish.unwrap_or(Tick::MAX) > nominal).then_some(FinishViolation {
                id: e.id,
                nominal_finish: e.finish,
                online_finish,
            })
        })
        .collect();
    AnomalyReport {
        anomaly_free: violations.is_empty(),
        violations,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub trial: u64,
    pub behavior: RuntimeBehavior,
    pub report: AnomalyReport,
}

/// Seed of trial `trial` of a search started with `seed`.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    seeds::derive(&[seed, trial])
}

/// Samples `trials` behaviors and runs each untreated; returns the
/// lowest-indexed behavior that produces a timing anomaly. Trials run in
/// parallel but the result does not depend on the thread count.
pub fn anomaly_search(
    ts: &TaskSet,
    policy: &Policy,
    trials: u64,
    seed: u64,
    profile: Profile,
) -> Result<Option<Witness>> {
    let plan = build_nominal(ts, policy, None)?;
    let found = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<Option<Witness>> {
            let b = sample_behavior(ts, plan.horizon, profile, trial_seed(seed, trial));
            let online = run_online(&plan, &b, Mode::Untreated)?;
            let report = check_anomaly_free(&plan, &online);
            Ok((!report.anomaly_free).then_some(Witness {
                trial,
                behavior: b,
                report,
            }))
        })
        .find_first(|r| !matches!(r, Ok(None)));
    found.unwrap_or(Ok(None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SuspendingTask;
    use crate::simcore::Interval;

    fn fig1() -> TaskSet {
        TaskSet::new(
            10,
            vec![
                SuspendingTask::from_pattern(1, 100, &[30, 20, 20]),
                SuspendingTask::from_pattern(2, 100, &[20, 20, 20]),
            ],
        )
    }

    #[test]
    fn worst_case_replay_is_nominal() {
        let plan = build_nominal(&fig1(), &Policy::Rm, None).unwrap();
        let b = RuntimeBehavior::worst_case(&plan.taskset, plan.horizon);
        for mode in Mode::ALL {
            let online = run_online(&plan, &b, mode).unwrap();
            for e in plan.nominal.entries() {
                assert_eq!(
                    online.entry(&e.id).unwrap().intervals,
                    e.intervals,
                    "{mode:?}"
                );
            }
        }
    }

    #[test]
    fn degenerate_profile_is_worst_case() {
        let ts = fig1();
        let b = sample_behavior(&ts, 100, Profile::new(1.0, 1.0).unwrap(), 42);
        let wc = RuntimeBehavior::worst_case(&ts, 100);
        assert_eq!(b.draws(), wc.draws());
    }

    #[test]
    fn sampling_is_deterministic() {
        let ts = fig1();
        let a = sample_behavior(&ts, 100, Profile::default(), 9);
        let b = sample_behavior(&ts, 100, Profile::default(), 9);
        assert_eq!(a, b);
        let c = sample_behavior(&ts, 100, Profile::full_range(), 10);
        assert_ne!(a.draws(), c.draws());
    }

    #[test]
    fn draws_respect_bounds() {
        let ts = TaskSet::new(
            1,
            vec![
                SuspendingTask::from_pattern(1, 20, &[3, 5, 2, 1, 4]).with_jitter(3),
                SuspendingTask::from_pattern(2, 10, &[1, 1, 1]),
            ],
        );
        let inst = expand_jobs(&ts, 20);
        for seed in 0..10_000 {
            let profile = Profile::new(
                0.05 + (seed % 19) as f64 * 0.05,
                0.05 + (seed % 7) as f64 * 0.15,
            )
            .unwrap();
            sample_behavior(&ts, 20, profile, seed)
                .validate(&inst)
                .unwrap();
        }
    }

    #[test]
    fn mismatched_behavior_is_rejected() {
        let plan = build_nominal(&fig1(), &Policy::Rm, None).unwrap();
        let other = RuntimeBehavior::worst_case(&fig1(), 300);
        assert!(matches!(
            run_online(&plan, &other, Mode::Untreated),
            Err(Error::BehaviorMismatch(_))
        ));
        let bad = RuntimeBehavior::worst_case(&fig1(), 100)
            .with_exec(SegmentId::new(1, 0, 0), 31)
            .unwrap();
        assert!(matches!(
            run_online(&plan, &bad, Mode::Enforce),
            Err(Error::DrawOutOfBounds { .. })
        ));
        assert!(Profile::new(0.0, 1.0).is_err());
    }

    #[test]
    fn figure_one_untreated_anomaly() {
        let plan = build_nominal(&fig1(), &Policy::Rm, None).unwrap();
        let b = RuntimeBehavior::worst_case(&plan.taskset, plan.horizon)
            .with_susp(SegmentId::new(1, 0, 1), 15)
            .unwrap();
        let online = run_online(&plan, &b, Mode::Untreated).unwrap();
        assert_eq!(
            online.intervals(&SegmentId::new(2, 0, 0)),
            &[Interval(30, 45), Interval(65, 70)]
        );
        assert_eq!(online.finish(&SegmentId::new(2, 0, 1)), Some(110));
        let report = check_anomaly_free(&plan, &online);
        assert!(!report.anomaly_free);
        assert!(report.violations.contains(&FinishViolation {
            id: SegmentId::new(2, 0, 1),
            nominal_finish: Some(90),
            online_finish: Some(110),
        }));
        assert!(check_anomaly_free(&plan, &plan.nominal).anomaly_free);
    }

    #[test]
    fn search_finds_figure_one_anomaly() {
        let w = anomaly_search(
            &fig1(),
            &Policy::Rm,
            1000,
            1,
            Profile::new(1.0, 0.5).unwrap(),
        )
        .unwrap()
        .expect("witness");
        let d = w.behavior.draw(&SegmentId::new(1, 0, 1)).unwrap();
        assert!(d.susp < 20);
        // the witness replays
        let plan = build_nominal(&fig1(), &Policy::Rm, None).unwrap();
        let online = run_online(&plan, &w.behavior, Mode::Untreated).unwrap();
        assert_eq!(check_anomaly_free(&plan, &online), w.report);
    }

    #[test]
    fn search_is_deterministic() {
        let p = Profile::new(1.0, 0.5).unwrap();
        let a = anomaly_search(&fig1(), &Policy::Rm, 200, 5, p).unwrap();
        let b = anomaly_search(&fig1(), &Policy::Rm, 200, 5, p).unwrap();
        assert_eq!(a, b);
    }

    /// Enumerates every tick-quantized behavior of one small task: without
    /// other tasks nothing can interfere, so no draw may delay a segment.
    #[test]
    fn single_task_has_no_anomaly_exhaustively() {
        let ts = TaskSet::new(
            1,
            vec![SuspendingTask::from_pattern(0, 20, &[3, 2, 2, 3, 1]).with_jitter(2)],
        );
        let plan = build_nominal(&ts, &Policy::Rm, None).unwrap();
        let ids: Vec<_> = (0..3).map(|j| SegmentId::new(0, 0, j)).collect();
        let mut count = 0;
        for jit in 0..=2 {
            for c0 in 1..=3 {
                for s1 in 1..=2 {
                    for c1 in 1..=2 {
                        for s2 in 1..=3 {
                            for c2 in 1..=1 {
                                let b = RuntimeBehavior::worst_case(&ts, plan.horizon)
                                    .with_susp(ids[0], jit)
                                    .and_then(|b| b.with_exec(ids[0], c0))
                                    .and_then(|b| b.with_susp(ids[1], s1))
                                    .and_then(|b| b.with_exec(ids[1], c1))
                                    .and_then(|b| b.with_susp(ids[2], s2))
                                    .and_then(|b| b.with_exec(ids[2], c2))
                                    .unwrap();
                                let online = run_online(&plan, &b, Mode::Untreated).unwrap();
                                assert!(check_anomaly_free(&plan, &online).anomaly_free);
                                count += 1;
                            }
                        }
                    }
                }
            }
        }
        assert_eq!(count, 3 * 3 * 2 * 2 * 3);
        assert!(
            anomaly_search(&ts, &Policy::Rm, 500, 3, Profile::full_range())
                .unwrap()
                .is_none()
        );
    }
}
