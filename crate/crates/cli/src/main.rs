//! `myo`: synthesize, train, decode and evaluate myoelectric sessions.
//!
//! Exit codes: 0 success, 2 usage or invalid input, 3 I/O or unreadable
//! file contents, 4 numerical failure.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use myo_core::datastore::{self, read_session_file, SessionLog};
use myo_core::decoder::{KalmanModel, TrainConfig};
use myo_core::dsp::FilterVariant;
use myo_core::evalkit::{
    dof_sweep, percent_equivalence, segment_means, snr, sweep_table_csv, tost_min_bounds,
    MovementClass,
};
use myo_core::runtime::{
    record_training_session, run_pipeline, trace_csv, train_on_session, ExecutionMode,
    PipelineConfig, Source,
};
use myo_core::synthemg::{make_profile, MovementSchedule, SynergyModel};
use myo_core::{Error, N_DOFS, N_ELECTRODES};

/// Seed used when `--seed` is omitted.
const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(
    name = "myo",
    version,
    about = "Myoelectric decoding pipeline on synthetic or replayed EMG"
)]
struct Cli {
    /// Seed for every random choice (signal synthesis, train/test split).
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Filter front end. Defaults to the session's own filter where one is
    /// recorded, otherwise lowcost.
    #[arg(long, global = true, value_enum)]
    filter: Option<FilterArg>,

    /// Output directory for all artifacts.
    #[arg(long, global = true, env = "MYO_OUT_DIR", default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FilterArg {
    Lowcost,
    Research,
}

impl From<FilterArg> for FilterVariant {
    fn from(f: FilterArg) -> Self {
        match f {
            FilterArg::Lowcost => FilterVariant::LowCost,
            FilterArg::Research => FilterVariant::ResearchGrade,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SynergyArg {
    Forearm,
    Disjoint,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ClassArg {
    Digits,
    Grasp,
    Wrist,
}

impl From<ClassArg> for MovementClass {
    fn from(c: ClassArg) -> Self {
        match c {
            ClassArg::Digits => MovementClass::Digits,
            ClassArg::Grasp => MovementClass::Grasp,
            ClassArg::Wrist => MovementClass::Wrist,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Record a synthetic training session (CSV plus .meta and .raw sidecars).
    Synth {
        /// TOML movement schedule; defaults to every DOF, both directions, 3 reps.
        #[arg(long)]
        schedule: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "forearm")]
        synergy: SynergyArg,
        /// Base name of the session file.
        #[arg(long, default_value = "session")]
        name: String,
    },
    /// Fit a Kalman decoder on a session; writes model.txt.
    Train { session: PathBuf },
    /// Replay a session's raw stream through a model; writes trace.csv and timing.txt.
    Decode {
        session: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Pace the producer at wall-clock speed.
        #[arg(long)]
        paced: bool,
    },
    /// Intended/unintended RMSE over all k-DOF subsets on a 50/50 split; writes eval.csv.
    Eval {
        session: PathBuf,
        #[arg(long, default_value_t = N_DOFS)]
        k: usize,
    },
    /// Per-electrode movement/rest MAV ratio; writes snr.csv.
    Snr {
        session: PathBuf,
        #[arg(long, value_enum, default_value = "digits")]
        class: ClassArg,
    },
    /// Minimum equivalence bounds from paired differences (one per line); writes tost.csv.
    Tost {
        diffs: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Reference-system mean for expressing bounds as a percentage.
        #[arg(long, allow_hyphen_values = true)]
        reference_mean: Option<f64>,
    },
    /// RMSE for k = 1..6; writes sweep.csv and sweep_subsets.csv.
    Sweep { session: PathBuf },
    /// Synthesize, train and replay through the control loop; writes bench.txt.
    Bench {
        #[arg(long, default_value_t = 60)]
        duration_s: u64,
        /// Pace the producer at wall-clock speed.
        #[arg(long)]
        paced: bool,
    },
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

const USAGE: u8 = 2;
const IO: u8 = 3;
const NUMERIC: u8 = 4;

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) | Error::Parse { .. } => IO,
            Error::Singular(_) | Error::Numerical(_) => NUMERIC,
            Error::InvalidInput(_)
            | Error::DimensionMismatch { .. }
            | Error::UnknownMovement(_) => USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

type Outcome = Result<(), Failure>;

fn require(paths: &[&Path]) -> Outcome {
    for p in paths {
        if !p.is_file() {
            return Err(Failure {
                code: USAGE,
                message: format!("no such file: {}", p.display()),
            });
        }
    }
    Ok(())
}

fn load(session: &Path) -> Result<SessionLog, Failure> {
    read_session_file(session).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", session.display(), f.message);
        f
    })
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

/// Numbers one per line; blank lines and `#` comments are skipped.
fn read_numbers(path: &Path) -> Result<Vec<f64>, Failure> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v = line.parse::<f64>().map_err(|_| Error::Parse {
            line: i + 1,
            message: format!("not a number: `{line}`"),
        })?;
        out.push(v);
    }
    Ok(out)
}

fn run(cli: Cli) -> Outcome {
    let filter_flag = cli.filter.map(FilterVariant::from);
    let out = cli.out.as_path();
    let seed = cli.seed;

    // validate referenced inputs before creating anything
    match &cli.command {
        Command::Synth {
            schedule: Some(path),
            ..
        } => require(&[path])?,
        Command::Train { session }
        | Command::Eval { session, .. }
        | Command::Snr { session, .. }
        | Command::Sweep { session } => require(&[session])?,
        Command::Decode { session, model, .. } => {
            require(&[session, &datastore::raw_path(session), model])?
        }
        Command::Tost { diffs, .. } => require(&[diffs])?,
        _ => {}
    }
    fs::create_dir_all(out)?;

    match cli.command {
        Command::Synth {
            schedule,
            synergy,
            name,
        } => {
            let schedule = match schedule {
                Some(p) => MovementSchedule::from_toml(&fs::read_to_string(p)?)?,
                None => MovementSchedule::default(),
            };
            let profile = make_profile(&schedule)?;
            let synergy = match synergy {
                SynergyArg::Forearm => SynergyModel::forearm_default(),
                SynergyArg::Disjoint => SynergyModel::disjoint_three_dof(),
            };
            let path = out.join(format!("{name}.csv"));
            let filter = filter_flag.unwrap_or(FilterVariant::LowCost);
            let (log, _) = record_training_session(&profile, &synergy, filter, seed, Some(&path))?;
            println!(
                "wrote {} ({} rows, {} bytes, filter {filter}, seed {seed})",
                path.display(),
                log.len(),
                fs::metadata(&path)?.len()
            );
        }
        Command::Train { session } => {
            let log = load(&session)?;
            let model = train_on_session(&log.labeled(), &TrainConfig::default())?;
            let path = write_artifact(out, "model.txt", &model.to_text())?;
            println!(
                "wrote {} ({} DOFs, {} features)",
                path.display(),
                model.dofs(),
                model.features()
            );
        }
        Command::Decode {
            session,
            model,
            paced,
        } => {
            let log = load(&session)?;
            let model = KalmanModel::from_text(&fs::read_to_string(&model)?)?;
            let samples = datastore::read_raw_stream(File::open(datastore::raw_path(&session))?)?;
            let filter = filter_flag.unwrap_or(log.meta.filter);
            let duration = samples.len() as u64;
            let mode = if paced {
                ExecutionMode::Threaded { paced: true }
            } else {
                ExecutionMode::Deterministic
            };
            let dofs = model.dofs();
            let cfg = PipelineConfig::new(Source::Replay(samples), filter, model).with_mode(mode);
            let (trace, timing) = run_pipeline(cfg, duration)?;
            let trace_path = write_artifact(out, "trace.csv", &trace_csv(&trace, dofs))?;
            let timing_path = write_artifact(out, "timing.txt", &timing.to_string())?;
            println!(
                "wrote {} and {}",
                trace_path.display(),
                timing_path.display()
            );
            print!("{timing}");
        }
        Command::Eval { session, k } => {
            let log = load(&session)?;
            let report = dof_sweep(&log.labeled(), k, seed)?;
            write_artifact(out, "eval.csv", &report.to_csv())?;
            println!("{report}");
        }
        Command::Snr { session, class } => {
            let log = load(&session)?;
            let features: Vec<_> = log.rows.iter().map(|r| r.mav).collect();
            let (mov, rest) = segment_means(&features, &log.rest_mask(), 0..N_ELECTRODES)?;
            let report = snr(&mov, &rest, class.into())?;
            write_artifact(out, "snr.csv", &report.to_csv())?;
            println!("{report}");
        }
        Command::Tost {
            diffs,
            alpha,
            reference_mean,
        } => {
            let values = read_numbers(&diffs)?;
            let result = tost_min_bounds(&values, alpha)?;
            let mut text = result.to_string();
            if let Some(r) = reference_mean {
                let lo = percent_equivalence(result.lower_bound, r)?;
                let hi = percent_equivalence(result.upper_bound, r)?;
                let _ = write!(
                    text,
                    "\npercent of reference: lower {lo:.1}% upper {hi:.1}%"
                );
            }
            write_artifact(out, "tost.csv", &result.to_csv())?;
            println!("{text}");
        }
        Command::Sweep { session } => {
            let log = load(&session)?;
            let labeled = log.labeled();
            let reports = (1..=N_DOFS)
                .map(|k| dof_sweep(&labeled, k, seed))
                .collect::<Result<Vec<_>, _>>()?;
            let subsets: String = reports.iter().map(|r| r.to_csv()).collect();
            write_artifact(out, "sweep.csv", &sweep_table_csv(&reports))?;
            write_artifact(out, "sweep_subsets.csv", &subsets)?;
            print!("{}", sweep_table_csv(&reports));
        }
        Command::Bench { duration_s, paced } => {
            let filter = filter_flag.unwrap_or(FilterVariant::LowCost);
            let profile = make_profile(&MovementSchedule::default())?;
            let (log, samples) = record_training_session(
                &profile,
                &SynergyModel::forearm_default(),
                filter,
                seed,
                None,
            )?;
            let model = train_on_session(&log.labeled(), &TrainConfig::default())?;
            let mode = ExecutionMode::Threaded { paced };
            let cfg = PipelineConfig::new(Source::Replay(samples), filter, model).with_mode(mode);
            let (_, timing) = run_pipeline(cfg, duration_s * 1000)?;
            let path = write_artifact(out, "bench.txt", &timing.to_string())?;
            print!("{timing}");
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("myo: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
