//! Small hand-made examples: the motivating task sets together with the
//! runtime behavior that exposes (or rules out) a timing anomaly.

use crate::behavior::RuntimeBehavior;
use crate::error::{Error, Result};
use crate::model::{hyperperiod, SegmentId, SuspendingTask, TaskSet, Tick};
use crate::simcore::Policy;

/// One override of the worst-case behavior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Override {
    Exec(SegmentId, Tick),
    /// Suspension in front of the segment; jitter for a first segment.
    Susp(SegmentId, Tick),
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub figure: u8,
    pub title: &'static str,
    pub taskset: TaskSet,
    pub policy: Policy,
    pub overrides: Vec<Override>,
}

impl Scenario {
    pub fn horizon(&self) -> Result<Tick> {
        hyperperiod(&self.taskset)
    }

    /// Worst-case behavior with the scenario's overrides applied.
    pub fn behavior(&self) -> Result<RuntimeBehavior> {
        let mut b = RuntimeBehavior::worst_case(&self.taskset, self.horizon()?);
        for o in &self.overrides {
            b = match *o {
                Override::Exec(id, c) => b.with_exec(id, c)?,
                Override::Susp(id, s) => b.with_susp(id, s)?,
            };
        }
        Ok(b)
    }
}

pub const FIGURES: [u8; 5] = [1, 2, 3, 5, 8];

pub fn figure(n: u8) -> Result<Scenario> {
    let seg = SegmentId::new;
    let s = match n {
        1 => Scenario {
            figure: 1,
            title: "shorter suspension delays a lower-priority task",
            taskset: TaskSet::new(
                10,
                vec![
                    SuspendingTask::from_pattern(1, 100, &[30, 20, 20]),
                    SuspendingTask::from_pattern(2, 100, &[20, 20, 20]),
                ],
            ),
            policy: Policy::Rm,
            overrides: vec![Override::Susp(seg(1, 0, 1), 15)],
        },
        2 => Scenario {
            figure: 2,
            title: "smaller release jitter delays a lower-priority task",
            taskset: TaskSet::new(
                10,
                vec![
                    SuspendingTask::from_pattern(1, 100, &[10, 20, 30]).with_jitter(20),
                    SuspendingTask::from_pattern(2, 100, &[30, 30, 16]).with_jitter(10),
                ],
            ),
            policy: Policy::Rm,
            overrides: vec![
                Override::Susp(seg(1, 0, 0), 10),
                Override::Susp(seg(2, 0, 0), 10),
                Override::Exec(seg(2, 0, 1), 10),
            ],
        },
        3 => Scenario {
            figure: 3,
            title: "nominal rate-monotonic schedule over one hyperperiod",
            taskset: TaskSet::new(
                1,
                vec![
                    SuspendingTask::from_pattern(1, 10, &[3, 2, 2]),
                    SuspendingTask::from_pattern(2, 11, &[2, 2, 2]),
                ],
            ),
            policy: Policy::Rm,
            overrides: Vec::new(),
        },
        5 => Scenario {
            figure: 5,
            title: "enforcement delays work that could have run early",
            taskset: TaskSet::new(
                10,
                vec![
                    SuspendingTask::from_pattern(1, 100, &[30, 20, 20]),
                    SuspendingTask::from_pattern(2, 100, &[20, 10, 20]),
                ],
            ),
            policy: Policy::Rm,
            overrides: vec![
                Override::Exec(seg(1, 0, 0), 10),
                Override::Exec(seg(1, 0, 1), 10),
                Override::Susp(seg(1, 0, 1), 10),
                Override::Exec(seg(2, 0, 0), 10),
                Override::Exec(seg(2, 0, 1), 10),
                Override::Susp(seg(2, 0, 1), 5),
            ],
        },
        8 => Scenario {
            figure: 8,
            title: "task-level fixed priorities versus the preference order",
            taskset: TaskSet::new(
                1,
                vec![
                    SuspendingTask::from_pattern(1, 12, &[3, 5, 3]),
                    SuspendingTask::new(2, 6, vec![1], vec![]),
                ],
            ),
            policy: Policy::TaskFixed(vec![1, 2]),
            overrides: vec![
                Override::Exec(seg(1, 0, 0), 1),
                Override::Susp(seg(1, 0, 1), 4),
            ],
        },
        _ => {
            return Err(Error::InvalidConfig(format!(
                "no example {n}; available: {FIGURES:?}"
            )))
        }
    };
    Ok(s)
}
