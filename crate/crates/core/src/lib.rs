//! Segment-level fixed-priority (S-FP) scheduling of periodic, segmented
//! self-suspending tasks with release jitter.
//!
//! The crate builds a *nominal* schedule offline (worst-case execution,
//! maximum suspension and maximum jitter everywhere), derives two online
//! treatments from it that rule out timing anomalies, and checks them:
//!
//! * **release enforcement** keeps every segment from becoming ready before
//!   its nominal release time;
//! * **preference scheduling** replaces the segment priorities with the
//!   order of nominal finishing times.
//!
//! Either way a segment never finishes later online than it did in the
//! nominal schedule, so simulating one hyperperiod of the nominal schedule is
//! an exact schedulability test for the treated system.
//!
//! Modules, bottom up:
//!
//! * [`model`]: tasks, jobs, segment instances, hyperperiods.
//! * [`simcore`]: priority orders, the event-driven simulator, schedules and
//!   the fixed-point finishing-time oracle.
//! * [`treatments`]: nominal plans, the exact test and policy combination.
//! * [`behavior`]: runtime draws, online runs, anomaly checks and search.
//! * [`synth`]: task-set synthesis.
//! * [`exper`]: acceptance-ratio sweeps.
//! * [`scenarios`]: small hand-built task sets with known schedules.

pub mod behavior;
mod error;
pub mod exper;
pub mod model;
pub mod scenarios;
mod seeds;
pub mod simcore;
pub mod synth;
pub mod treatments;

pub use behavior::{
    anomaly_search, check_anomaly_free, run_online, sample_behavior, AnomalyReport, Mode, Profile,
    RuntimeBehavior, SegmentDraw, Witness,
};
pub use error::{Error, Result};
pub use exper::{
    acceptance_curve, emit_results, render_results, Algorithm, OutputFormat, SweepResult, SweepRow,
    SweepSpec,
};
pub use model::{
    expand_jobs, hyperperiod, validate_taskset, JobId, SegmentId, SegmentInstance, SuspendingTask,
    TaskId, TaskSet, Tick, Violation,
};
pub use simcore::{
    assign_priorities, audit_interference_lower_bound, audit_work_conservation, fixed_point_finish,
    interference, measure, simulate, Demand, Interval, Policy, PriorityOrder, ReleaseRule,
    Schedule, ScheduleEntry, ScheduleKind, Stop, Timeline,
};
pub use synth::{
    drs_split, generate_taskset, GenConfig, JitterClass, SegmentClass, SuspensionClass,
};
pub use treatments::{
    build_nominal, comb, exact_schedulability, CombOutcome, NominalPlan, Verdict,
};
