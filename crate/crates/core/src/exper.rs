//! Acceptance-ratio sweeps over synthetic task sets.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TaskSet;
use crate::seeds;
use crate::simcore::Policy;
use crate::synth::{generate_taskset, GenConfig};
use crate::treatments::exact_schedulability;

/// Schedulability tests compared in a sweep.
///
/// The `Jt` variants analyze the set with its release jitter; the others
/// drop the jitter first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "NOM-EDF")]
    NomEdf,
    #[serde(rename = "NOM-RM")]
    NomRm,
    #[serde(rename = "COMB")]
    Comb,
    #[serde(rename = "NOM-EDF-JT")]
    NomEdfJt,
    #[serde(rename = "NOM-RM-JT")]
    NomRmJt,
    #[serde(rename = "COMB-JT")]
    CombJt,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::NomEdf,
        Algorithm::NomRm,
        Algorithm::Comb,
        Algorithm::NomEdfJt,
        Algorithm::NomRmJt,
        Algorithm::CombJt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::NomEdf => "NOM-EDF",
            Algorithm::NomRm => "NOM-RM",
            Algorithm::Comb => "COMB",
            Algorithm::NomEdfJt => "NOM-EDF-JT",
            Algorithm::NomRmJt => "NOM-RM-JT",
            Algorithm::CombJt => "COMB-JT",
        }
    }

    pub fn with_jitter(self) -> bool {
        matches!(
            self,
            Algorithm::NomEdfJt | Algorithm::NomRmJt | Algorithm::CombJt
        )
    }

    /// The base policies the test accepts with, in order of preference.
    fn policies(self) -> &'static [Base] {
        match self {
            Algorithm::NomEdf | Algorithm::NomEdfJt => &[Base::Edf],
            Algorithm::NomRm | Algorithm::NomRmJt => &[Base::Rm],
            Algorithm::Comb | Algorithm::CombJt => &[Base::Edf, Base::Rm],
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown algorithm {s}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Base {
    Edf,
    Rm,
}

/// Evaluates algorithms on one task set, sharing the underlying exact tests.
struct Evaluator<'a> {
    taskset: &'a TaskSet,
    stripped: Option<TaskSet>,
    cache: BTreeMap<(Base, bool), bool>,
}

impl<'a> Evaluator<'a> {
    fn new(taskset: &'a TaskSet) -> Self {
        Self {
            taskset,
            stripped: None,
            cache: BTreeMap::new(),
        }
    }

    fn base(&mut self, base: Base, jitter: bool) -> Result<bool> {
        if let Some(&v) = self.cache.get(&(base, jitter)) {
            return Ok(v);
        }
        let ts = if jitter {
            self.taskset
        } else {
            self.stripped
                .get_or_insert_with(|| self.taskset.without_jitter())
        };
        let policy = match base {
            Base::Edf => Policy::Edf,
            Base::Rm => Policy::Rm,
        };
        let ok = exact_schedulability(ts, &policy)?.is_schedulable();
        self.cache.insert((base, jitter), ok);
        Ok(ok)
    }

    fn accepts(&mut self, alg: Algorithm) -> Result<bool> {
        for &b in alg.policies() {
            if self.base(b, alg.with_jitter())? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Whether `alg` deems the task set schedulable.
pub fn accepts(alg: Algorithm, ts: &TaskSet) -> Result<bool> {
    Evaluator::new(ts).accepts(alg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub grid: Vec<f64>,
    pub sets_per_point: usize,
    /// Generator settings; `total_utilization` is overwritten per grid point.
    pub template: GenConfig,
    pub algorithms: Vec<Algorithm>,
    pub master_seed: u64,
}

/// Utilization points `0, 0.05, ..., 1`.
pub fn default_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            grid: default_grid(),
            sets_per_point: 20,
            template: GenConfig::default(),
            algorithms: vec![Algorithm::NomEdf, Algorithm::NomRm, Algorithm::Comb],
            master_seed: 0,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.grid.is_empty() {
            return bad("empty utilization grid");
        }
        if self.grid.iter().any(|u| !(0.0..=1.0).contains(u)) {
            return bad("utilization grid must lie in [0, 1]");
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("utilization grid must be strictly increasing");
        }
        if self.sets_per_point == 0 {
            return bad("need at least one task set per point");
        }
        if self.algorithms.is_empty() {
            return bad("no algorithms selected");
        }
        self.template.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub utilization: f64,
    pub algorithm: Algorithm,
    pub accepted: usize,
    pub total: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Task sets the generator could not produce; they count as rejected.
    #[serde(default)]
    pub generation_failures: usize,
}

impl SweepResult {
    pub fn ratio(&self, utilization: f64, alg: Algorithm) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.algorithm == alg && (r.utilization - utilization).abs() < 1e-9)
            .map(|r| r.ratio)
    }

    /// Ratios of one algorithm in grid order.
    pub fn curve(&self, alg: Algorithm) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.algorithm == alg)
            .map(|r| (r.utilization, r.ratio))
            .collect()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Generates `sets_per_point` task sets at every grid point and counts how
/// many each algorithm accepts. Set `j` at point `i` is generated from a seed
/// derived from `(master_seed, i, j)`, so results do not depend on thread
/// scheduling.
pub fn acceptance_curve(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.grid.len())
        .flat_map(|i| (0..spec.sets_per_point).map(move |j| (i, j)))
        .collect();

    let outcomes: Vec<(usize, Option<Vec<bool>>)> = jobs
        .par_iter()
        .map(|&(i, j)| -> Result<_> {
            let cfg = GenConfig {
                total_utilization: spec.grid[i],
                ..spec.template.clone()
            };
            let seed = seeds::derive(&[spec.master_seed, i as u64, j as u64]);
            let ts = match generate_taskset(&cfg, seed) {
                Ok(ts) => ts,
                Err(e @ Error::GenerationFailed { .. }) => {
                    log::warn!("u={} set {j}: {e}", spec.grid[i]);
                    return Ok((i, None));
                }
                Err(e) => return Err(e),
            };
            let mut eval = Evaluator::new(&ts);
            let verdicts = spec
                .algorithms
                .iter()
                .map(|&a| eval.accepts(a))
                .collect::<Result<Vec<_>>>()?;
            Ok((i, Some(verdicts)))
        })
        .collect::<Result<_>>()?;

    let k = spec.algorithms.len();
    let mut accepted = vec![vec![0usize; k]; spec.grid.len()];
    let mut failures = 0;
    for (i, v) in outcomes {
        match v {
            Some(v) => {
                for (a, ok) in v.into_iter().enumerate() {
                    accepted[i][a] += ok as usize;
                }
            }
            None => failures += 1,
        }
    }

    let mut rows = Vec::with_capacity(spec.grid.len() * k);
    for (i, &u) in spec.grid.iter().enumerate() {
        for (a, &alg) in spec.algorithms.iter().enumerate() {
            rows.push(SweepRow {
                utilization: u,
                algorithm: alg,
                accepted: accepted[i][a],
                total: spec.sets_per_point,
                ratio: accepted[i][a] as f64 / spec.sets_per_point as f64,
            });
        }
    }
    rows.sort_by(|a, b| {
        a.utilization
            .total_cmp(&b.utilization)
            .then_with(|| a.algorithm.name().cmp(b.algorithm.name()))
    });
    Ok(SweepResult {
        rows,
        generation_failures: failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::InvalidConfig(format!("unknown format {s}"))),
        }
    }
}

pub const CSV_HEADER: [&str; 5] = ["utilization", "algorithm", "accepted", "total", "ratio"];

/// Renders the sweep as CSV (fixed three-decimal floats) or JSON.
pub fn render_results(res: &SweepResult, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => Ok(serde_json::to_string_pretty(res)?),
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_HEADER)?;
            for r in &res.rows {
                w.write_record([
                    format!("{:.3}", r.utilization),
                    r.algorithm.name().to_string(),
                    r.accepted.to_string(),
                    r.total.to_string(),
                    format!("{:.3}", r.ratio),
                ])?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| Error::InvalidConfig(format!("csv buffer: {e}")))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
    }
}

pub fn emit_results(res: &SweepResult, format: OutputFormat, path: &Path) -> Result<()> {
    let text = render_results(res, format)?;
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
