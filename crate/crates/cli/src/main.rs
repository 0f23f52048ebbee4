//! `codesign`: motor evaluation, co-design runs and re-simulation.
//!
//! Exit codes: 0 success, 1 configuration error, 2 infeasible, 3 solver
//! failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use codesign_core::artifacts::{write_run, DesignFile, Manifest};
use codesign_core::mec::{MotorConstants, MotorConstantsDoc, MotorDesign, MotorEvalDoc};
use codesign_core::pipeline::{ApplicationSet, Mode, Pipeline, PipelineError, Strategy};
use codesign_core::plant::Drivetrain;
use codesign_core::robot::ArmModel;
use codesign_core::simulate::{resimulate, SimulationOptions};
use codesign_core::spmsm::OperationalLimits;
use codesign_core::trajectory::Trajectory;
use codesign_cli::config::{load_json, parse_grid, ConfigError, RunConfig};
use codesign_cli::report::{motor_report, simulation_text};
use log::info;

const EXIT_CONFIG: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "codesign", version, about = "Multi-task motor and motion co-design for robot arms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one motor design: derived parameters and constraint residuals.
    MotorEval {
        /// JSON with `design` and optional `constants` and `bounds`.
        file: PathBuf,
    },
    /// Run a co-design strategy over a task grid and write its artifacts.
    Codesign(CodesignArgs),
    /// Replay a stored trajectory through the plant and check its limits.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Time,
    Energy,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Empirical,
    WorstCase,
    MultiTask,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Empirical => Strategy::Empirical,
            StrategyArg::WorstCase => Strategy::WorstCase,
            StrategyArg::MultiTask => Strategy::MultiTask,
        }
    }
}

#[derive(Args)]
struct CodesignArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    /// Start scales and payloads, e.g. `0.6,1:2,4`.
    #[arg(long)]
    grid: Option<String>,
    /// Collocation intervals per task.
    #[arg(long)]
    nw: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also run this strategy and write the improvement matrix.
    #[arg(long, value_enum)]
    compare: Option<StrategyArg>,
    /// Keep only the first axes of the arm.
    #[arg(long)]
    axes: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Run directory written by `codesign`; replays every stored task.
    #[arg(long, conflicts_with = "trajectory")]
    run: Option<PathBuf>,
    /// Replay only this task of the run.
    #[arg(long, requires = "run")]
    task: Option<usize>,
    /// Single trajectory CSV.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Arm description; the bundled arm, cut to the trajectory's axes, by default.
    #[arg(long)]
    robot: Option<PathBuf>,
    /// `design.json` of a run; the reference motor on every axis by default.
    #[arg(long)]
    design: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    payload: f64,
    /// Violation above which the replay counts as infeasible.
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    /// Reporting points per trajectory interval.
    #[arg(long, default_value_t = 10)]
    refine: usize,
}

/// An error together with the exit code it maps to.
struct Failure(u8, anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(EXIT_CONFIG, e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let r = match cli.command {
        Command::MotorEval { file } => motor_eval(&file),
        Command::Codesign(a) => codesign(a),
        Command::Simulate(a) => simulate(a),
    };
    match r {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

fn motor_eval(file: &Path) -> Result<u8, Failure> {
    let doc: MotorEvalDoc = load_json(file)?;
    let r = motor_report(&doc).with_context(|| format!("{}", file.display()))?;
    print!("{}", r.text);
    Ok(if r.feasible { 0 } else { EXIT_INFEASIBLE })
}

fn pipeline_code(e: &PipelineError) -> u8 {
    match e {
        PipelineError::Solve { .. } | PipelineError::Reconcile { .. } => EXIT_SOLVER,
        PipelineError::Transcription { .. } => EXIT_INFEASIBLE,
        _ => EXIT_CONFIG,
    }
}

fn codesign(a: CodesignArgs) -> Result<u8, Failure> {
    let (mut cfg, origin) = match &a.config {
        Some(p) => (RunConfig::load(p)?, p.clone()),
        None => (RunConfig::default(), PathBuf::from("<defaults>")),
    };
    if let Some(m) = a.mode {
        cfg.mode = match m {
            ModeArg::Time => Mode::Time,
            ModeArg::Energy => Mode::Energy,
        };
    }
    if let Some(s) = a.strategy {
        cfg.strategy = s.into();
    }
    if let Some(g) = &a.grid {
        cfg.grid = parse_grid(g).map_err(|e| anyhow::anyhow!("--grid: {e}"))?;
    }
    if let Some(n) = a.nw {
        cfg.pipeline.transcription.intervals = n;
    }
    if let Some(s) = a.seed {
        cfg.pipeline.seed = s;
    }
    if let Some(o) = a.out {
        cfg.out = o;
    }
    if let Some(c) = a.compare {
        cfg.compare = Some(c.into());
    }
    if a.axes.is_some() {
        cfg.axes = a.axes;
    }
    let loaded = cfg.resolve(&origin)?;
    let app = ApplicationSet::new(loaded.arm.n_axes(), cfg.grid.clone())?;
    let arm = loaded.arm.clone();
    let consts = loaded.consts.clone();
    let pipe = Pipeline::new(loaded.arm, loaded.consts, loaded.bounds, cfg.pipeline.clone())?;

    let run = |s: Strategy| -> Result<_, Failure> {
        info!("running {s} over {} tasks", app.tasks.len());
        pipe.run_application(&app, s, cfg.mode).map_err(|e| Failure(pipeline_code(&e), e.into()))
    };
    let main = run(cfg.strategy)?;
    let other = match cfg.compare {
        Some(s) => Some(run(s)?),
        None => None,
    };
    let out = &cfg.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("arm.json"), serde_json::to_string_pretty(&arm)? + "\n")?;
    fs::write(out.join("motor_constants.json"), serde_json::to_string_pretty(&MotorConstantsDoc::from(&consts))? + "\n")?;
    let manifest = write_run(out, &main, &cfg.pipeline, other.as_ref())?;
    if let Some(o) = &other {
        write_run(&out.join(o.strategy.to_string()), o, &cfg.pipeline, None)?;
    }

    println!("{} ({}) over {} tasks -> {}", main.strategy, main.mode, app.tasks.len(), out.display());
    for ax in DesignFile::from_result(&main).axes {
        println!("axis {}: {:?}", ax.axis, ax.design.to_design().to_mm());
    }
    print!("{}", main.objective_matrix().to_csv());
    if let Some(o) = &other {
        println!("improvement over {} (percent, positive = {} better):", o.strategy, main.strategy);
        print!("{}", main.objective_matrix().improvement_over(&o.objective_matrix())?.to_csv());
    }
    let incomplete = !manifest.complete || other.as_ref().is_some_and(|o| !o.is_complete());
    if incomplete {
        for f in &manifest.failures {
            eprintln!("task {} failed at {}: {}", f.task_id, f.stage, f.message);
        }
        return Ok(EXIT_SOLVER);
    }
    Ok(0)
}

fn simulate(a: SimulateArgs) -> Result<u8, Failure> {
    let opts = SimulationOptions { refine: a.refine, ..Default::default() };
    let mut feasible = true;
    if let Some(dir) = &a.run {
        let manifest = Manifest::load(&dir.join("manifest.json"))?;
        let arm: ArmModel = load_json(&dir.join("arm.json"))?;
        let consts = load_json::<MotorConstantsDoc>(&dir.join("motor_constants.json"))?.to_constants()?;
        let designs = designs_from(&dir.join("design.json"))?;
        let drive = manifest.settings.transcription.drive_limits();
        let tasks: Vec<_> = manifest.tasks.iter().filter(|t| a.task.map_or(true, |id| id == t.id)).collect();
        if tasks.is_empty() {
            return Err(Failure(EXIT_CONFIG, anyhow::anyhow!("no such task in {}", dir.display())));
        }
        for t in tasks {
            let Some(file) = &t.trajectory else {
                println!("task {}: no trajectory (failed)", t.id);
                continue;
            };
            let traj = read_trajectory(&dir.join(file))?;
            println!("task {} (lambda {}, payload {} kg):", t.id, t.lambda, t.payload_kg);
            feasible &= replay(&arm, &designs, &consts, t.payload_kg, &traj, &drive, &opts, a.tol)?;
        }
    } else {
        let Some(path) = &a.trajectory else {
            return Err(Failure(EXIT_CONFIG, anyhow::anyhow!("give --run DIR or --trajectory FILE")));
        };
        let traj = read_trajectory(path)?;
        let arm = match &a.robot {
            Some(p) => load_json::<ArmModel>(p)?,
            None => {
                let arm = ArmModel::standin();
                if traj.n_axes > arm.n_axes() {
                    return Err(anyhow::anyhow!("trajectory has {} axes, the bundled arm {}", traj.n_axes, arm.n_axes()).into());
                }
                arm.truncated(traj.n_axes)
            }
        };
        arm.validate()?;
        let designs = match &a.design {
            Some(p) => designs_from(p)?,
            None => vec![MotorDesign::reference(); arm.n_axes()],
        };
        feasible = replay(&arm, &designs, &MotorConstants::default(), a.payload, &traj, &OperationalLimits::default(), &opts, a.tol)?;
    }
    Ok(if feasible { 0 } else { EXIT_INFEASIBLE })
}

fn designs_from(path: &Path) -> Result<Vec<MotorDesign<f64>>, ConfigError> {
    let f: DesignFile = load_json(path)?;
    Ok(f.axes.iter().map(|a| a.design.to_design()).collect())
}

fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Trajectory::read_csv(f).with_context(|| format!("reading {}", path.display()))
}

#[allow(clippy::too_many_arguments)]
fn replay(
    arm: &ArmModel,
    designs: &[MotorDesign<f64>],
    consts: &MotorConstants,
    payload: f64,
    traj: &Trajectory,
    drive: &OperationalLimits,
    opts: &SimulationOptions,
    tol: f64,
) -> Result<bool> {
    let plant = Drivetrain::new(arm, designs, consts, payload)?;
    let r = resimulate(&plant, traj, &arm.limits(), drive, opts)?;
    print!("{}", simulation_text(&r, tol));
    Ok(r.is_feasible(tol))
}
