use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use segsched::behavior::trial_seed;
use segsched::scenarios::{self, Scenario};
use segsched::synth::DEFAULT_PERIODS;
use segsched::{
    acceptance_curve, anomaly_search, build_nominal, check_anomaly_free, generate_taskset,
    render_results, run_online, sample_behavior, Algorithm, AnomalyReport, GenConfig, JitterClass,
    Mode, NominalPlan, OutputFormat, Policy, Profile, RuntimeBehavior, Schedule, ScheduleKind,
    SegmentClass, SegmentId, SuspensionClass, SweepSpec, TaskSet, Tick,
};

/// Exit code when an anomaly (a segment finishing later online) is found.
const EXIT_VIOLATION: u8 = 2;

#[derive(Parser)]
#[command(
    name = "segsched",
    version,
    about = "Segment-level fixed-priority scheduling of self-suspending tasks"
)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Seed for every random choice made by the command.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Args, Clone)]
struct DrawArgs {
    /// Smallest actual execution time as a fraction of the WCET.
    #[arg(long, default_value_t = 0.5)]
    exec_floor: f64,
    /// Smallest actual suspension as a fraction of its maximum.
    #[arg(long, default_value_t = 0.5)]
    susp_floor: f64,
}

impl DrawArgs {
    fn profile(&self) -> Result<Profile> {
        Ok(Profile::new(self.exec_floor, self.susp_floor)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Untreated,
    Enforce,
    Preference,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Untreated => Mode::Untreated,
            ModeArg::Enforce => Mode::Enforce,
            ModeArg::Preference => Mode::Preference,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic task set.
    Gen {
        #[arg(long)]
        utilization: f64,
        #[arg(long, default_value_t = 10)]
        tasks: usize,
        /// rare (2), moderate (5) or frequent (8) segments per task.
        #[arg(long, default_value = "moderate")]
        segments: SegmentClass,
        /// short, medium or long.
        #[arg(long, default_value = "medium")]
        suspension: SuspensionClass,
        /// none, minor, mild or serious.
        #[arg(long, default_value = "none")]
        jitter: JitterClass,
        #[arg(long, default_value_t = 1000)]
        tick_scale: u64,
        /// Comma-separated period menu in model units.
        #[arg(long, value_delimiter = ',')]
        periods: Option<Vec<u64>>,
        #[command(flatten)]
        common: Common,
    },
    /// Build the nominal schedule, release floors and preference order.
    Plan {
        #[arg(long)]
        taskset: PathBuf,
        /// rm, edf or tfp:<task,task,...> (highest first).
        #[arg(long, default_value = "rm")]
        policy: String,
        /// Simulation window in ticks; one hyperperiod by default.
        #[arg(long)]
        horizon: Option<Tick>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a plan online under a given or sampled behavior.
    Simulate {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, value_enum, default_value = "untreated")]
        mode: ModeArg,
        /// Behavior file; sampled from --seed if omitted.
        #[arg(long)]
        behavior: Option<PathBuf>,
        /// Write the behavior used to this file.
        #[arg(long)]
        save_behavior: Option<PathBuf>,
        #[command(flatten)]
        draws: DrawArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Compare an online run against the nominal schedule. Exits with 2 if
    /// some segment finishes later than nominally.
    Check {
        #[arg(long)]
        plan: PathBuf,
        /// Previously simulated online schedule.
        #[arg(long, conflicts_with = "behavior")]
        schedule: Option<PathBuf>,
        /// Behavior to run; sampled from --seed if neither this nor
        /// --schedule is given.
        #[arg(long)]
        behavior: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "untreated")]
        mode: ModeArg,
        #[command(flatten)]
        draws: DrawArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Search random behaviors for a timing anomaly of the untreated
    /// scheduler. Exits with 2 if one is found.
    Fuzz {
        #[arg(long)]
        taskset: PathBuf,
        #[arg(long, default_value = "rm")]
        policy: String,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[command(flatten)]
        draws: DrawArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Acceptance ratios over a utilization grid.
    Sweep {
        #[arg(long, default_value_t = 20)]
        sets: usize,
        /// Use 100 sets per point.
        #[arg(long, conflicts_with = "sets")]
        full_scale: bool,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        #[arg(long, default_value_t = 10)]
        tasks: usize,
        #[arg(long, default_value = "moderate")]
        segments: SegmentClass,
        #[arg(long, default_value = "medium")]
        suspension: SuspensionClass,
        #[arg(long, default_value = "none")]
        jitter: JitterClass,
        #[arg(long, default_value_t = 1000)]
        tick_scale: u64,
        #[arg(long, value_delimiter = ',')]
        periods: Option<Vec<u64>>,
        /// Comma-separated algorithm names.
        #[arg(long, value_delimiter = ',', default_value = "NOM-EDF,NOM-RM,COMB")]
        algorithms: Vec<Algorithm>,
        #[command(flatten)]
        common: Common,
    },
    /// Replay one of the built-in example scenarios.
    Demo {
        #[arg(long, value_parser = clap::value_parser!(u8))]
        figure: u8,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_policy(s: &str) -> Result<Policy> {
    let lower = s.to_ascii_lowercase();
    Ok(match lower.as_str() {
        "rm" => Policy::Rm,
        "edf" => Policy::Edf,
        _ => match lower.strip_prefix("tfp:") {
            Some(list) => Policy::TaskFixed(
                list.split(',')
                    .map(|t| {
                        t.trim()
                            .parse()
                            .with_context(|| format!("bad task id {t:?}"))
                    })
                    .collect::<Result<_>>()?,
            ),
            None => bail!("unknown policy {s:?}; expected rm, edf or tfp:<ids>"),
        },
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(common: &Common, text: &str) -> Result<()> {
    match &common.out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                out.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

fn pick(common: &Common, default: Format, allowed: &[Format]) -> Result<Format> {
    let f = common.format.unwrap_or(default);
    if !allowed.contains(&f) {
        bail!("this command cannot write that format");
    }
    Ok(f)
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

fn gen_config(
    tasks: usize,
    segments: SegmentClass,
    suspension: SuspensionClass,
    jitter: JitterClass,
    tick_scale: u64,
    periods: Option<Vec<u64>>,
) -> GenConfig {
    GenConfig {
        n_tasks: tasks,
        segments,
        suspension,
        jitter,
        tick_scale,
        period_menu: periods.unwrap_or_else(|| DEFAULT_PERIODS.to_vec()),
        ..GenConfig::default()
    }
}

fn taskset_text(ts: &TaskSet) -> String {
    let mut s = format!(
        "{} tasks, tick scale {}, utilization {:.4}\n",
        ts.tasks.len(),
        ts.tick_scale,
        ts.utilization()
    );
    for t in &ts.tasks {
        s += &format!(
            "tau{}: T={} D={} J={} C={:?} S={:?}\n",
            t.id, t.period, t.deadline, t.jitter_max, t.execs, t.susps
        );
    }
    s
}

fn schedule_text(sched: &Schedule) -> String {
    let mut s = String::new();
    for e in sched.entries() {
        let ivs: Vec<String> = e
            .intervals
            .iter()
            .map(|iv| format!("[{},{})", iv.0, iv.1))
            .collect();
        let opt = |v: Option<Tick>| v.map_or("-".to_string(), |x| x.to_string());
        s += &format!(
            "{:<14} release={:<6} finish={:<6} {}\n",
            e.id.to_string(),
            opt(e.release),
            opt(e.finish),
            ivs.join(" ")
        );
    }
    s
}

fn plan_text(plan: &NominalPlan) -> String {
    let mut s = format!(
        "policy {}, horizon {}, {}\n",
        plan.policy,
        plan.horizon,
        if plan.feasible {
            "feasible"
        } else {
            "infeasible"
        }
    );
    for j in &plan.misses {
        s += &format!("deadline miss: tau{}/J{}\n", j.task, j.job);
    }
    s += &schedule_text(&plan.nominal);
    s += "preference order:";
    for id in plan.preference.iter() {
        s += &format!(" {id}");
    }
    s.push('\n');
    s
}

fn report_text(r: &AnomalyReport) -> String {
    if r.anomaly_free {
        return "anomaly-free\n".into();
    }
    let mut s = format!(
        "{} segment(s) finish later than nominally\n",
        r.violations.len()
    );
    let opt = |v: Option<Tick>| v.map_or("never".to_string(), |x| x.to_string());
    for v in &r.violations {
        s += &format!(
            "{}: nominal {} online {}\n",
            v.id,
            opt(v.nominal_finish),
            opt(v.online_finish)
        );
    }
    s
}

#[derive(Serialize)]
struct CheckOutput<'a> {
    behavior: Option<&'a RuntimeBehavior>,
    #[serde(flatten)]
    report: &'a AnomalyReport,
}

fn load_plan(path: &Path) -> Result<NominalPlan> {
    NominalPlan::from_json(&read(path)?).with_context(|| format!("loading plan {}", path.display()))
}

fn behavior_for(
    plan: &NominalPlan,
    file: Option<&Path>,
    draws: &DrawArgs,
    seed: u64,
) -> Result<RuntimeBehavior> {
    match file {
        Some(p) => {
            serde_json::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))
        }
        None => Ok(sample_behavior(
            &plan.taskset,
            plan.horizon,
            draws.profile()?,
            seed,
        )),
    }
}

#[derive(Serialize)]
struct DemoRun {
    mode: Mode,
    schedule: Schedule,
    report: AnomalyReport,
}

#[derive(Serialize)]
struct DemoOutput<'a> {
    figure: u8,
    title: &'a str,
    taskset: &'a TaskSet,
    nominal: &'a Schedule,
    preference: Vec<SegmentId>,
    behavior: Option<RuntimeBehavior>,
    online: Vec<DemoRun>,
}

fn demo(sc: &Scenario, format: Format) -> Result<String> {
    let plan = build_nominal(&sc.taskset, &sc.policy, None)?;
    let behavior = (!sc.overrides.is_empty())
        .then(|| sc.behavior())
        .transpose()?;
    let mut runs = Vec::new();
    if let Some(b) = &behavior {
        for mode in Mode::ALL {
            let schedule = run_online(&plan, b, mode)?;
            let report = check_anomaly_free(&plan, &schedule);
            runs.push(DemoRun {
                mode,
                schedule,
                report,
            });
        }
    }
    if format == Format::Json {
        return json(&DemoOutput {
            figure: sc.figure,
            title: sc.title,
            taskset: &sc.taskset,
            nominal: &plan.nominal,
            preference: plan.preference.iter().copied().collect(),
            behavior,
            online: runs,
        });
    }
    let mut s = format!(
        "example {}: {}\n{}\n",
        sc.figure,
        sc.title,
        taskset_text(&sc.taskset)
    );
    s += "nominal:\n";
    s += &plan_text(&plan);
    for r in &runs {
        s += &format!("\nonline ({:?}):\n", r.mode);
        s += &schedule_text(&r.schedule);
        s += &report_text(&r.report);
    }
    Ok(s)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen {
            utilization,
            tasks,
            segments,
            suspension,
            jitter,
            tick_scale,
            periods,
            common,
        } => {
            let cfg = GenConfig {
                total_utilization: utilization,
                ..gen_config(tasks, segments, suspension, jitter, tick_scale, periods)
            };
            let ts = generate_taskset(&cfg, common.seed)?;
            let text = match pick(&common, Format::Json, &[Format::Json, Format::Text])? {
                Format::Text => taskset_text(&ts),
                _ => ts.to_json()?,
            };
            emit(&common, &text)?;
        }
        Command::Plan {
            taskset,
            policy,
            horizon,
            common,
        } => {
            let ts = TaskSet::from_json(&read(&taskset)?)?;
            let plan = build_nominal(&ts, &parse_policy(&policy)?, horizon)?;
            log::info!("plan {} feasible={}", plan.policy, plan.feasible);
            let text = match pick(&common, Format::Json, &[Format::Json, Format::Text])? {
                Format::Text => plan_text(&plan),
                _ => plan.to_json()?,
            };
            emit(&common, &text)?;
        }
        Command::Simulate {
            plan,
            mode,
            behavior,
            save_behavior,
            draws,
            common,
        } => {
            let plan = load_plan(&plan)?;
            let b = behavior_for(&plan, behavior.as_deref(), &draws, common.seed)?;
            if let Some(p) = save_behavior {
                fs::write(&p, json(&b)?).with_context(|| format!("writing {}", p.display()))?;
            }
            let online = run_online(&plan, &b, mode.into())?;
            let text = match pick(&common, Format::Json, &[Format::Json, Format::Text])? {
                Format::Text => schedule_text(&online),
                _ => online.to_json()?,
            };
            emit(&common, &text)?;
        }
        Command::Check {
            plan,
            schedule,
            behavior,
            mode,
            draws,
            common,
        } => {
            let plan = load_plan(&plan)?;
            let (online, b) = match schedule {
                Some(p) => (
                    Schedule::from_json(&read(&p)?, plan.horizon, ScheduleKind::Online)?,
                    None,
                ),
                None => {
                    let b = behavior_for(&plan, behavior.as_deref(), &draws, common.seed)?;
                    (run_online(&plan, &b, mode.into())?, Some(b))
                }
            };
            let report = check_anomaly_free(&plan, &online);
            let text = match pick(&common, Format::Text, &[Format::Json, Format::Text])? {
                Format::Text => report_text(&report),
                _ => json(&CheckOutput {
                    behavior: b.as_ref(),
                    report: &report,
                })?,
            };
            emit(&common, &text)?;
            if !report.anomaly_free {
                return Ok(ExitCode::from(EXIT_VIOLATION));
            }
        }
        Command::Fuzz {
            taskset,
            policy,
            trials,
            draws,
            common,
        } => {
            let ts = TaskSet::from_json(&read(&taskset)?)?;
            let found = anomaly_search(
                &ts,
                &parse_policy(&policy)?,
                trials,
                common.seed,
                draws.profile()?,
            )?;
            let format = pick(&common, Format::Text, &[Format::Json, Format::Text])?;
            let text = match (&found, format) {
                (Some(w), Format::Json) => json(w)?,
                (None, Format::Json) => "null".to_string(),
                (Some(w), _) => format!(
                    "anomaly in trial {} (behavior seed {})\n{}",
                    w.trial,
                    trial_seed(common.seed, w.trial),
                    report_text(&w.report)
                ),
                (None, _) => format!("no anomaly in {trials} trials\n"),
            };
            emit(&common, &text)?;
            if found.is_some() {
                return Ok(ExitCode::from(EXIT_VIOLATION));
            }
        }
        Command::Sweep {
            sets,
            full_scale,
            step,
            tasks,
            segments,
            suspension,
            jitter,
            tick_scale,
            periods,
            algorithms,
            common,
        } => {
            if !(step > 0.0 && step <= 1.0) {
                bail!("--step must be in (0, 1]");
            }
            let points = (1.0 / step).round() as usize;
            let spec = SweepSpec {
                grid: (0..=points).map(|i| (i as f64 * step).min(1.0)).collect(),
                sets_per_point: if full_scale { 100 } else { sets },
                template: gen_config(tasks, segments, suspension, jitter, tick_scale, periods),
                algorithms,
                master_seed: common.seed,
            };
            let res = acceptance_curve(&spec)?;
            if res.generation_failures > 0 {
                log::warn!(
                    "{} task sets could not be generated",
                    res.generation_failures
                );
            }
            let format = match pick(&common, Format::Csv, &[Format::Csv, Format::Json])? {
                Format::Json => OutputFormat::Json,
                _ => OutputFormat::Csv,
            };
            emit(&common, &render_results(&res, format)?)?;
        }
        Command::Demo { figure, common } => {
            let sc = scenarios::figure(figure)?;
            let format = pick(&common, Format::Text, &[Format::Json, Format::Text])?;
            emit(&common, &demo(&sc, format)?)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
