use std::path::PathBuf;

use crate::model::{SegmentId, TaskId, Violation};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid task set: {}", format_violations(.0))]
    InvalidTaskSet(Vec<Violation>),

    #[error("hyperperiod overflows the tick type")]
    HyperperiodOverflow,

    #[error("priority order does not rank segment {0}")]
    MissingRank(SegmentId),

    #[error("segment {0} appears twice in a priority order")]
    DuplicateRank(SegmentId),

    #[error("unknown task {0} in task-level priority list")]
    UnknownTask(TaskId),

    #[error("release floor missing for segment {0}")]
    MissingFloor(SegmentId),

    #[error("runtime behavior does not match the segment instances: {0}")]
    BehaviorMismatch(String),

    #[error("runtime draw for segment {id} out of bounds: {detail}")]
    DrawOutOfBounds { id: SegmentId, detail: String },

    #[error("segment {0} is not part of the schedule")]
    UnknownSegment(SegmentId),

    #[error("segment {0} did not complete")]
    Incomplete(SegmentId),

    #[error("intervals overlap or are out of order at [{0}, {1})")]
    OverlappingIntervals(u64, u64),

    #[error("fixed-point iteration for segment {0} did not converge")]
    NoConvergence(SegmentId),

    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),

    #[error("invalid generator configuration: {0}")]
    InvalidConfig(String),

    #[error("task generation gave up after {retries} retries: {reason}")]
    GenerationFailed { retries: u32, reason: String },

    #[error("malformed plan: {0}")]
    MalformedPlan(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
