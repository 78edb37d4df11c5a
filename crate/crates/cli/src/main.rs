use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use epvshape::epv::{default_chain, load_epv, save_epv, solve_epv, EPVGrid};
use epvshape::pitch_control::{fit_pass_model, read_pass_events, PassModelParams};
use epvshape::render::{build_scene, render_ppm, render_svg, FieldKind};
use epvshape::sim::{record_episode, reset, step, write_trajectory, GameState, PitchSpec, ScenarioConfig};
use epvshape::trainer::{
    agent_observations, build_epv_grid, checkpoint_config, evaluate, greedy_actions, learning_curve, read_metrics, run_training,
    write_curve_csv, ExperimentConfig, EPV_TOL,
};
use epvshape::vdn::{Checkpoint, QNetwork};
use epvshape::Error;

/// Reward shaping with pitch control and EPV for cooperative defenders.
#[derive(Parser)]
#[command(name = "epvshape", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of an experiment config.
    Train(TrainArgs),
    /// Greedy evaluation of a checkpoint.
    Eval(EvalArgs),
    /// Fit the pass-probability model to labelled pass events.
    FitPassModel(FitArgs),
    /// Solve the default possession chain into an EPV grid.
    SolveEpv(SolveArgs),
    /// Render a control, EPV or overlay image.
    RenderField(RenderArgs),
    /// Dump a greedy episode as JSON lines.
    Replay(ReplayArgs),
    /// Aggregate evaluation curves across run directories.
    Curve(CurveArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; each seed gets its own run directory inside.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated seeds overriding the config.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Train without shaping (weight 0).
    #[arg(long)]
    baseline: bool,
    /// Worker threads for seeds and evaluation episodes [default: all cores].
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 0.95)]
    difficulty: f64,
    #[arg(long, default_value_t = 32)]
    episodes: usize,
    /// Base episode seed [default: the one training used for this checkpoint].
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct FitArgs {
    /// CSV with header `x,k`.
    #[arg(long)]
    events: PathBuf,
    /// Fitted parameters as JSON.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.45)]
    sigma0: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda0: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Args)]
struct PitchArgs {
    #[arg(long, default_value_t = 105.0)]
    length: f64,
    #[arg(long, default_value_t = 68.0)]
    width: f64,
    #[arg(long, default_value_t = 32)]
    grid_m: usize,
    #[arg(long, default_value_t = 20)]
    grid_n: usize,
    #[arg(long, default_value_t = 3.66)]
    goal_half_width: f64,
}

impl PitchArgs {
    fn spec(&self) -> PitchSpec {
        PitchSpec {
            length: self.length,
            width: self.width,
            grid_m: self.grid_m,
            grid_n: self.grid_n,
            goal_half_width: self.goal_half_width,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    pitch: PitchArgs,
    #[arg(long, default_value_t = EPV_TOL)]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum What {
    Control,
    Epv,
    Overlay,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["checkpoint", "state"]))]
struct RenderArgs {
    /// Plays the checkpoint's greedy policy from `--seed` for `--step` steps.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Game state as JSON.
    #[arg(long)]
    state: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "control")]
    what: What,
    /// `.ppm` or `.svg`.
    #[arg(long)]
    out: PathBuf,
    /// EPV grid file [default: the checkpoint's grid, else the default chain].
    #[arg(long)]
    epv: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    step: u64,
    #[arg(long, default_value_t = 8.0)]
    px_per_meter: f64,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Attacker difficulty [default: the checkpoint's training difficulty].
    #[arg(long)]
    difficulty: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CurveArgs {
    /// Run directories containing `metrics.jsonl`.
    #[arg(long, num_args = 1.., required = true)]
    runs: Vec<PathBuf>,
    /// Only evaluations at this difficulty [default: the runs' training difficulty].
    #[arg(long)]
    difficulty: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

/// Exit 2 for configuration problems, 3 for everything that fails at run time.
enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::FitPassModel(a) => fit(a),
        Command::SolveEpv(a) => solve(a),
        Command::RenderField(a) => render(a),
        Command::Replay(a) => replay(a),
        Command::Curve(a) => curve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Outcome {
    std::fs::write(path, bytes).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn train(a: TrainArgs) -> Outcome {
    // Any problem reading the config is a configuration error.
    let mut config = ExperimentConfig::load(&a.config).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(seeds) = a.seeds {
        config.seeds = seeds;
    }
    if a.baseline {
        config.reward = config.reward.baseline();
    }
    config.validate()?;
    let reports = run_training(&config, &a.out, a.jobs)?;
    let mut failed = 0;
    for r in &reports {
        match &r.result {
            Ok(run) => {
                let finals: Vec<String> = run
                    .final_evals
                    .iter()
                    .map(|e| format!("{}: {:.3}", e.difficulty, e.mean_goal_difference))
                    .collect();
                println!("seed {} -> {} [{}]", r.seed, r.run_dir.display(), finals.join(", "));
            }
            Err(msg) => {
                failed += 1;
                println!("seed {} FAILED: {msg}", r.seed);
            }
        }
    }
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} of {} seeds failed", reports.len())));
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Outcome {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let ev = epvshape::par::with_jobs(a.jobs, || evaluate(&ck, None, a.difficulty, a.episodes, a.seed))?;
    println!(
        "difficulty {} episodes {} mean goal difference {}",
        ev.difficulty,
        ev.records.len(),
        ev.mean_goal_difference
    );
    Ok(())
}

fn fit(a: FitArgs) -> Outcome {
    let init = PassModelParams {
        sigma: a.sigma0,
        lambda: a.lambda0,
    };
    init.validate()?;
    let events = read_pass_events(&a.events)?;
    let fitted = fit_pass_model(&events, init, a.tol)?;
    let json = serde_json::to_string_pretty(&fitted).map_err(|e| Failure::Runtime(e.to_string()))?;
    write_file(&a.out, json.as_bytes())?;
    println!("sigma {} lambda {} from {} events", fitted.sigma, fitted.lambda, events.len());
    Ok(())
}

fn solve(a: SolveArgs) -> Outcome {
    let spec = a.pitch.spec();
    spec.validate()?;
    let grid = solve_epv(&default_chain(&spec), a.tol)?;
    save_epv(&grid, &a.out)?;
    let max = grid.values.iter().cloned().fold(0.0, f64::max);
    println!("{}x{} grid, max {max:.4}, total {:.4}", grid.m, grid.n, grid.total());
    Ok(())
}

fn greedy_rollout(nets: &[QNetwork], config: &ExperimentConfig, seed: u64, steps: u64) -> Result<GameState, Error> {
    let mut state = reset(&config.scenario, seed)?;
    while state.step_index < steps && !state.is_terminal() {
        let actions = greedy_actions(nets, &agent_observations(&state, config.train.egocentric))?;
        state = step(&state, &actions)?.0;
    }
    Ok(state)
}

fn render(a: RenderArgs) -> Outcome {
    let (state, config) = match (&a.checkpoint, &a.state) {
        (Some(path), _) => {
            let ck = Checkpoint::load(path)?;
            let config = checkpoint_config(&ck)?;
            let state = greedy_rollout(&ck.networks()?, &config, a.seed, a.step)?;
            (state, Some(config))
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let state: GameState =
                serde_json::from_str(&text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
            (state, None)
        }
        (None, None) => unreachable!("clap requires a source"),
    };
    let spec = state.scenario.pitch;
    let grid: Option<EPVGrid> = match (&a.what, &a.epv, &config) {
        (What::Control, _, _) => None,
        (_, Some(path), _) => Some(load_epv(path)?),
        (_, None, Some(c)) => Some(build_epv_grid(c)?),
        (_, None, None) => Some(solve_epv(&default_chain(&spec), EPV_TOL)?),
    };
    let params = config.map(|c| c.pass_model).unwrap_or_default();
    let what = match a.what {
        What::Control => FieldKind::Control,
        What::Epv => FieldKind::Epv,
        What::Overlay => FieldKind::Overlay,
    };
    let scene = build_scene(what, &spec, Some(&state), grid.as_ref(), &params)?;
    let bytes = match a.out.extension().and_then(|e| e.to_str()) {
        Some("ppm") => render_ppm(&scene, a.px_per_meter),
        Some("svg") => render_svg(&scene, a.px_per_meter).into_bytes(),
        _ => return Err(Failure::Config(format!("{}: output must end in .ppm or .svg", a.out.display()))),
    };
    write_file(&a.out, &bytes)
}

fn replay(a: ReplayArgs) -> Outcome {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let config = checkpoint_config(&ck)?;
    let scenario = ScenarioConfig {
        difficulty: a.difficulty.unwrap_or(config.scenario.difficulty),
        ..config.scenario
    };
    scenario.validate()?;
    let nets = ck.networks()?;
    let (frames, last) = record_episode(reset(&scenario, a.seed)?, |s| {
        greedy_actions(&nets, &agent_observations(s, config.train.egocentric)).expect("checkpoint networks match the scenario")
    })?;
    write_trajectory(&frames, &a.out)?;
    let outcome = last.outcome.map(|o| format!("{:?}", o.kind)).unwrap_or_default();
    println!("{} frames, outcome {outcome}", frames.len());
    Ok(())
}

fn curve(a: CurveArgs) -> Outcome {
    let mut records = Vec::new();
    let mut training_difficulty = None;
    for dir in &a.runs {
        records.extend(read_metrics(&dir.join("metrics.jsonl"))?);
        if training_difficulty.is_none() {
            let cfg = dir.join("config.toml");
            if cfg.is_file() {
                training_difficulty = Some(ExperimentConfig::load(&cfg)?.scenario.difficulty);
            }
        }
    }
    let points = learning_curve(&records, a.difficulty.or(training_difficulty))?;
    write_curve_csv(&points, &a.out)?;
    println!("{} evaluation steps from {} runs", points.len(), a.runs.len());
    Ok(())
}
