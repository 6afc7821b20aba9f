//! Event-driven S-FP simulation.
//!
//! [`simulate`] produces nominal and online schedules; [`Timeline`] answers
//! interference queries over a finished schedule and recomputes every
//! finishing time as the least fixed point of `t = r + W(r, t) + C`, which
//! is how the simulator is cross-checked.

mod engine;
mod oracle;
mod order;
mod schedule;

pub use engine::{simulate, Demand, ReleaseRule, Stop};
pub use oracle::{
    audit_interference_lower_bound, audit_work_conservation, fixed_point_finish, interference,
    Timeline,
};
pub use order::{assign_priorities, Policy, PriorityOrder};
pub use schedule::{measure, Interval, Schedule, ScheduleEntry, ScheduleKind};
