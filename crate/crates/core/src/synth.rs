//! Task-set synthesis.
//!
//! Utilizations are split among tasks with a bounded Dirichlet split, periods
//! come from a semi-harmonic menu, each task's total suspension is drawn from
//! a fraction of its slack `T - C`, and execution and suspension totals are
//! split into segments the same way. Release jitter bounds are drawn from a
//! fraction of the shortest period in the set.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SuspendingTask, TaskSet, Tick};
use crate::seeds;

/// Utilization resolution used when splitting the total utilization.
const UTIL_QUANTUM: u64 = 1_000_000;

/// Retries per task before generation gives up.
const RETRY_CAP: u32 = 100;

pub const DEFAULT_PERIODS: [u64; 9] = [1, 2, 5, 10, 20, 50, 100, 200, 1000];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentClass {
    Rare,
    Moderate,
    Frequent,
}

impl SegmentClass {
    pub fn segments(self) -> usize {
        match self {
            SegmentClass::Rare => 2,
            SegmentClass::Moderate => 5,
            SegmentClass::Frequent => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuspensionClass {
    Short,
    Medium,
    Long,
}

impl SuspensionClass {
    /// Total suspension range as per-mille of `T - C`.
    pub fn permille(self) -> (u64, u64) {
        match self {
            SuspensionClass::Short => (10, 100),
            SuspensionClass::Medium => (100, 300),
            SuspensionClass::Long => (300, 600),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JitterClass {
    None,
    Minor,
    Mild,
    Serious,
}

impl JitterClass {
    /// Jitter bound range as per-mille of the shortest period in the set.
    pub fn permille(self) -> (u64, u64) {
        match self {
            JitterClass::None => (0, 0),
            JitterClass::Minor => (10, 100),
            JitterClass::Mild => (100, 200),
            JitterClass::Serious => (200, 300),
        }
    }
}

macro_rules! parse_enum {
    ($ty:ident, $($name:literal => $v:ident),+) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($name => Ok($ty::$v),)+
                    _ => Err(Error::InvalidConfig(format!("unknown {}: {s}", stringify!($ty)))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let name = match self { $($ty::$v => $name,)+ };
                f.write_str(name)
            }
        }
    };
}

parse_enum!(SegmentClass, "rare" => Rare, "moderate" => Moderate,
    "frequent" => Frequent);
parse_enum!(SuspensionClass, "short" => Short, "medium" => Medium,
    "long" => Long);
parse_enum!(JitterClass, "none" => None, "minor" => Minor,
    "mild" => Mild, "serious" => Serious);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub total_utilization: f64,
    pub n_tasks: usize,
    pub segments: SegmentClass,
    pub suspension: SuspensionClass,
    pub jitter: JitterClass,
    /// Candidate periods in model time units.
    pub period_menu: Vec<u64>,
    pub tick_scale: u64,
    /// Relative deadline as a fraction of the period, in `(0, 1]`.
    pub deadline_ratio: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            total_utilization: 0.5,
            n_tasks: 10,
            segments: SegmentClass::Moderate,
            suspension: SuspensionClass::Medium,
            jitter: JitterClass::None,
            period_menu: DEFAULT_PERIODS.to_vec(),
            tick_scale: 1000,
            deadline_ratio: 1.0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(0.0..=1.0).contains(&self.total_utilization) {
            return bad("total utilization must be in [0, 1]");
        }
        if self.n_tasks == 0 {
            return bad("need at least one task");
        }
        if self.period_menu.is_empty() || self.period_menu.contains(&0) {
            return bad("period menu must be non-empty and positive");
        }
        if self.tick_scale == 0 {
            return bad("tick scale must be positive");
        }
        if !(self.deadline_ratio > 0.0 && self.deadline_ratio <= 1.0) {
            return bad("deadline ratio must be in (0, 1]");
        }
        Ok(())
    }
}

/// Splits `total` into `n` integers with `lowers[i] <= v[i] <= uppers[i]`
/// summing exactly to `total`.
///
/// The slack above the lower bounds is distributed by a flat Dirichlet draw
/// (normalized exponentials); components exceeding their upper bound are
/// clamped and the excess is redistributed over the remaining ones until
/// nothing exceeds. Largest-remainder rounding keeps the sum exact.
pub fn drs_split(
    n: usize,
    total: u64,
    lowers: &[u64],
    uppers: &[u64],
    seed: u64,
) -> Result<Vec<u64>> {
    drs_split_with(&mut seeds::rng(seed), n, total, lowers, uppers)
}

pub(crate) fn drs_split_with<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    total: u64,
    lowers: &[u64],
    uppers: &[u64],
) -> Result<Vec<u64>> {
    if lowers.len() != n || uppers.len() != n {
        return Err(Error::InfeasibleSplit(format!(
            "expected {n} bounds, got {} lower and {} upper",
            lowers.len(),
            uppers.len()
        )));
    }
    if lowers.iter().zip(uppers).any(|(l, u)| l > u) {
        return Err(Error::InfeasibleSplit(
            "a lower bound exceeds its upper bound".into(),
        ));
    }
    let lo_sum: u64 = lowers.iter().sum();
    let hi_sum: u64 = uppers.iter().sum();
    if total < lo_sum || total > hi_sum {
        return Err(Error::InfeasibleSplit(format!(
            "total {total} outside [{lo_sum}, {hi_sum}]"
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }

    let weights: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let slack = (total - lo_sum) as f64;
    let mut x: Vec<f64> = lowers.iter().map(|&l| l as f64).collect();
    let mut clamped = vec![false; n];
    loop {
        let used: f64 = (0..n)
            .filter(|&i| clamped[i])
            .map(|i| (uppers[i] - lowers[i]) as f64)
            .sum();
        let wsum: f64 = (0..n).filter(|&i| !clamped[i]).map(|i| weights[i]).sum();
        let rem = (slack - used).max(0.0);
        let mut changed = false;
        let free: Vec<usize> = (0..n).filter(|&i| !clamped[i]).collect();
        for i in free {
            x[i] = lowers[i] as f64
                + if wsum > 0.0 {
                    rem * weights[i] / wsum
                } else {
                    0.0
                };
            if x[i] > uppers[i] as f64 {
                x[i] = uppers[i] as f64;
                clamped[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut v: Vec<u64> = (0..n)
        .map(|i| (x[i].floor() as u64).clamp(lowers[i], uppers[i]))
        .collect();
    let mut by_remainder: Vec<usize> = (0..n).collect();
    by_remainder.sort_by(|&a, &b| {
        let fa = x[a] - x[a].floor();
        let fb = x[b] - x[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut sum: u64 = v.iter().sum();
    while sum < total {
        let before = sum;
        for &i in &by_remainder {
            if sum == total {
                break;
            }
            if v[i] < uppers[i] {
                v[i] += 1;
                sum += 1;
            }
        }
        debug_assert!(sum > before);
    }
    while sum > total {
        for &i in by_remainder.iter().rev() {
            if sum == total {
                break;
            }
            if v[i] > lowers[i] {
                v[i] -= 1;
                sum -= 1;
            }
        }
    }
    Ok(v)
}

/// Uniform integer in `[ceil(lo * x / 1000), floor(hi * x / 1000)]`,
/// falling back to the rounded lower end when that range is empty.
fn permille_draw<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (u64, u64), x: u64) -> u64 {
    let a = (lo * x).div_ceil(1000);
    let b = hi * x / 1000;
    if a <= b {
        rng.random_range(a..=b)
    } else {
        (lo * x + 500) / 1000
    }
}

/// Generates one task set. Deterministic in `(cfg, seed)`.
pub fn generate_taskset(cfg: &GenConfig, seed: u64) -> Result<TaskSet> {
    cfg.validate()?;
    let mut rng = seeds::rng(seed);
    let n = cfg.n_tasks;
    let m = cfg.segments.segments();

    let total_u = (cfg.total_utilization * UTIL_QUANTUM as f64).round() as u64;
    let utils = drs_split_with(&mut rng, n, total_u, &vec![0; n], &vec![UTIL_QUANTUM; n])?;

    let mut shapes = Vec::with_capacity(n);
    for &u in &utils {
        let mut retries = 0;
        let (period, wcet) = loop {
            let period =
                cfg.period_menu[rng.random_range(0..cfg.period_menu.len())] * cfg.tick_scale;
            let wcet = ((u as f64 / UTIL_QUANTUM as f64) * period as f64).round() as u64;
            let wcet = wcet.max(m as u64);
            if wcet < period {
                break (period, wcet);
            }
            retries += 1;
            if retries >= RETRY_CAP {
                return Err(Error::GenerationFailed {
                    retries,
                    reason: format!("utilization {u}/{UTIL_QUANTUM} leaves no room in any period"),
                });
            }
        };
        shapes.push((period, wcet));
    }

    let reference = shapes.iter().map(|s| s.0).min().unwrap_or(0);
    let mut tasks = Vec::with_capacity(n);
    for (i, &(period, wcet)) in shapes.iter().enumerate() {
        let susp_total =
            permille_draw(&mut rng, cfg.suspension.permille(), period - wcet).max(m as u64 - 1);
        let execs = drs_split_with(&mut rng, m, wcet, &vec![1; m], &vec![wcet; m])?;
        let susps = drs_split_with(
            &mut rng,
            m - 1,
            susp_total,
            &vec![1; m - 1],
            &vec![susp_total; m - 1],
        )?;
        let jitter = match cfg.jitter {
            JitterClass::None => 0,
            class => permille_draw(&mut rng, class.permille(), reference),
        };
        let deadline = ((cfg.deadline_ratio * period as f64).floor() as Tick).clamp(1, period);
        tasks.push(SuspendingTask {
            id: i as u32 + 1,
            period,
            deadline,
            jitter_max: jitter,
            first_release: 0,
            execs,
            susps,
        });
    }
    Ok(TaskSet::new(cfg.tick_scale, tasks))
}
