//! Experiment protocol: per-seed VDN training on the shaped reward,
//! periodic greedy evaluation, metrics, checkpoints and learning curves.

mod config;
mod curve;
mod metrics;

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::epv::{default_chain, game_state_epv, load_epv, solve_epv, EPVGrid};
use crate::error::{Error, Result};
use crate::par;
use crate::pitch_control::{compute_control_field, PassModelParams};
use crate::reward::{shaped_reward, sparse_reward, RewardConfig};
use crate::sim::{egocentric, observation_len, observe, reset, step, DefenderAction, GameState, OutcomeKind, ScenarioConfig};
use crate::vdn::{argmax, Checkpoint, QNetwork, ReplayBuffer, Transition, VdnLearner};

pub use config::{EpvSource, ExperimentConfig};
pub use curve::{learning_curve, percentile, write_curve_csv, CurvePoint};
pub use metrics::{read_metrics, write_record, EpisodeRecord, Phase};

/// Tolerance used when solving the default possession chain.
pub const EPV_TOL: f64 = 1e-8;

const EVAL_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;
const EXPLORE_SALT: u64 = 0xD1B5_4A32_D192_ED03;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Base seed for evaluation episodes of a training seed; disjoint from training seeds.
pub fn eval_seed(training_seed: u64) -> u64 {
    training_seed ^ EVAL_SEED_SALT
}

/// Environment seed of the `index`-th episode drawn from `base`.
pub fn episode_seed(base: u64, index: u64) -> u64 {
    splitmix64(base.wrapping_add(index.wrapping_mul(0x2545_F491_4F6C_DD1D)))
}

/// The EPV grid an experiment shapes with.
pub fn build_epv_grid(config: &ExperimentConfig) -> Result<EPVGrid> {
    let pitch = config.scenario.pitch;
    let grid = match &config.epv_source {
        EpvSource::DefaultChain => solve_epv(&default_chain(&pitch), EPV_TOL)?,
        EpvSource::File { path } => load_epv(path)?,
    };
    if grid.m != pitch.grid_m || grid.n != pitch.grid_n {
        return Err(Error::config(
            "epv_source",
            format!(
                "EPV grid is {}x{} but the pitch grid is {}x{}",
                grid.m, grid.n, pitch.grid_m, pitch.grid_n
            ),
        ));
    }
    Ok(grid)
}

/// Everything needed to play an episode: the agents' observation view and
/// the inputs that turn a state transition into a shaped reward.
#[derive(Debug, Clone)]
pub struct EpisodeContext {
    pub pass_model: PassModelParams,
    pub grid: EPVGrid,
    pub reward: RewardConfig,
    pub field_stride: u64,
    pub egocentric: bool,
}

impl EpisodeContext {
    pub fn new(config: &ExperimentConfig, grid: EPVGrid) -> Self {
        EpisodeContext {
            pass_model: config.pass_model,
            grid,
            reward: config.reward,
            field_stride: config.field_stride,
            egocentric: config.train.egocentric,
        }
    }

    /// Game-state EPV of `state`: attacking control contracted with the EPV grid.
    pub fn game_epv(&self, state: &GameState) -> Result<f64> {
        let field = compute_control_field(state, &state.scenario.pitch, &self.pass_model);
        game_state_epv(&field, &self.grid)
    }

    /// Game-state EPV after a step, recomputed only on stride boundaries.
    fn next_epv(&self, next: &GameState, held: f64) -> Result<f64> {
        if next.step_index % self.field_stride == 0 {
            self.game_epv(next)
        } else {
            Ok(held)
        }
    }
}

#[derive(Default)]
struct EpisodeAcc {
    steps: u64,
    shaped: f64,
    sparse: f64,
    epv_sum: f64,
}

impl EpisodeAcc {
    fn add(&mut self, shaped: f64, sparse: f64, epv: f64) {
        self.steps += 1;
        self.shaped += shaped;
        self.sparse += sparse;
        self.epv_sum += epv;
    }

    fn record(&self, seed: u64, phase: Phase, episode: u64, step: u64, difficulty: f64, outcome: OutcomeKind) -> EpisodeRecord {
        let goal_difference = if outcome == OutcomeKind::GoalConceded { -1 } else { 0 };
        EpisodeRecord {
            seed,
            phase,
            episode,
            step,
            difficulty,
            steps: self.steps,
            outcome,
            goal_difference,
            shaped_return: self.shaped,
            sparse_return: self.sparse,
            mean_game_epv: if self.steps > 0 { self.epv_sum / self.steps as f64 } else { 0.0 },
        }
    }
}

/// One observation per defender: the global view, or each agent's egocentric permutation of it.
pub fn agent_observations(state: &GameState, egocentric_view: bool) -> Vec<Vec<f64>> {
    let obs = observe(state);
    let n = state.scenario.n_defenders;
    if egocentric_view {
        (0..n).map(|k| egocentric(&obs, &state.scenario, k)).collect()
    } else {
        vec![obs; n]
    }
}

/// Greedy joint action: per-agent argmax over each agent's observation.
pub fn greedy_actions(nets: &[QNetwork], obs: &[Vec<f64>]) -> Result<Vec<DefenderAction>> {
    if nets.len() != obs.len() {
        return Err(Error::ShapeMismatch(format!("{} networks but {} observations", nets.len(), obs.len())));
    }
    nets.iter()
        .zip(obs)
        .map(|(n, o)| {
            let a = argmax(&n.forward(o)?);
            Ok(DefenderAction::from_index(a).expect("network outputs one value per action"))
        })
        .collect()
}

/// Result of a batch of greedy evaluation episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub difficulty: f64,
    pub mean_goal_difference: f64,
    pub records: Vec<EpisodeRecord>,
}

/// Plays `n_episodes` greedy episodes at `difficulty`. Episode `e` starts from
/// `episode_seed(base_seed, e)`; `record_seed` and `record_step` label the records.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_policy(
    nets: &[QNetwork],
    scenario: &ScenarioConfig,
    difficulty: f64,
    n_episodes: usize,
    base_seed: u64,
    ctx: &EpisodeContext,
    record_seed: u64,
    record_step: u64,
) -> Result<Evaluation> {
    let scenario = ScenarioConfig { difficulty, ..*scenario };
    scenario.validate()?;
    let records = par::map_range(n_episodes, |e| {
        let mut state = reset(&scenario, episode_seed(base_seed, e as u64))?;
        let mut epv_prev = ctx.game_epv(&state)?;
        let mut acc = EpisodeAcc::default();
        loop {
            let actions = greedy_actions(nets, &agent_observations(&state, ctx.egocentric))?;
            let (next, events) = step(&state, &actions)?;
            let epv_curr = ctx.next_epv(&next, epv_prev)?;
            let sparse = sparse_reward(&events);
            acc.add(shaped_reward(sparse, epv_prev, epv_curr, &ctx.reward), sparse, epv_curr);
            if let Some(o) = events.outcome {
                return Ok(acc.record(record_seed, Phase::Eval, e as u64, record_step, difficulty, o.kind));
            }
            state = next;
            epv_prev = epv_curr;
        }
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mean = records.iter().map(|r| r.goal_difference as f64).sum::<f64>() / records.len().max(1) as f64;
    Ok(Evaluation {
        difficulty,
        mean_goal_difference: mean,
        records,
    })
}

/// Greedy evaluation of a checkpoint. With `seed = None` the episodes are
/// the ones the trainer used for that checkpoint's training seed.
pub fn evaluate(
    checkpoint: &Checkpoint,
    scenario: Option<&ScenarioConfig>,
    difficulty: f64,
    n_episodes: usize,
    seed: Option<u64>,
) -> Result<Evaluation> {
    if n_episodes < 1 {
        return Err(Error::config("episodes", "must be at least 1"));
    }
    let config = checkpoint_config(checkpoint)?;
    let scenario = scenario.copied().unwrap_or(config.scenario);
    let grid = build_epv_grid(&config)?;
    let nets = checkpoint.networks()?;
    let ctx = EpisodeContext::new(&config, grid);
    evaluate_policy(
        &nets,
        &scenario,
        difficulty,
        n_episodes,
        seed.unwrap_or_else(|| eval_seed(checkpoint.seed)),
        &ctx,
        checkpoint.seed,
        checkpoint.training_step,
    )
}

/// Experiment configuration echoed inside a checkpoint.
pub fn checkpoint_config(checkpoint: &Checkpoint) -> Result<ExperimentConfig> {
    serde_json::from_value(checkpoint.config.clone())
        .map_err(|e| Error::CheckpointFormat(format!("config echo: {e}")))
}

/// Outcome of training one seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub records: Vec<EpisodeRecord>,
    /// `(step, mean goal difference)` at each evaluation of the training difficulty.
    pub curve: Vec<(u64, f64)>,
    pub final_evals: Vec<Evaluation>,
    pub losses: Vec<f64>,
    pub networks: Vec<QNetwork>,
}

impl SeedRun {
    pub fn final_eval(&self, difficulty: f64) -> Option<&Evaluation> {
        self.final_evals.iter().find(|e| e.difficulty == difficulty)
    }
}

struct Sink {
    writer: Option<std::io::BufWriter<std::fs::File>>,
    path: PathBuf,
}

impl Sink {
    fn open(run_dir: Option<&Path>) -> Result<Self> {
        match run_dir {
            Some(dir) => {
                let path = dir.join("metrics.jsonl");
                let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                Ok(Sink {
                    writer: Some(std::io::BufWriter::new(file)),
                    path,
                })
            }
            None => Ok(Sink {
                writer: None,
                path: PathBuf::new(),
            }),
        }
    }

    fn write(&mut self, records: &[EpisodeRecord]) -> Result<()> {
        if let Some(w) = self.writer.as_mut() {
            for r in records {
                write_record(w, r).map_err(|e| Error::io(&self.path, e))?;
            }
        }
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        if let Some(w) = self.writer.as_mut() {
            w.flush().map_err(|e| Error::io(&self.path, e))?;
        }
        Ok(())
    }
}

fn save_checkpoint(config: &ExperimentConfig, seed: u64, nets: &[QNetwork], step: u64, path: &Path) -> Result<()> {
    let echo = serde_json::to_value(config).map_err(|e| Error::Format(e.to_string()))?;
    Checkpoint::new(echo, seed, nets, step).save(path)
}

/// Trains one seed. With a `run_dir`, streams `metrics.jsonl` there and
/// writes checkpoints (`checkpoints/step_<n>.json` and `final.json`).
pub fn train_seed(config: &ExperimentConfig, seed: u64, grid: &EPVGrid, run_dir: Option<&Path>) -> Result<SeedRun> {
    config.validate()?;
    let sc = config.scenario;
    let tc = &config.train;
    let ctx = EpisodeContext::new(config, grid.clone());
    let n_agents = sc.n_defenders;
    let total = tc.total_steps;

    let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut learner = VdnLearner::new(n_agents, observation_len(&sc), &tc.hidden, DefenderAction::COUNT, &mut init_rng)?;
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ EXPLORE_SALT));
    let mut buffer = ReplayBuffer::new(tc.buffer_capacity);
    if let Some(dir) = run_dir {
        if config.checkpoint_every.is_some() {
            let ck = dir.join("checkpoints");
            std::fs::create_dir_all(&ck).map_err(|e| Error::io(&ck, e))?;
        }
    }
    let mut sink = Sink::open(run_dir)?;
    let eval_base = eval_seed(seed);

    let mut records = Vec::new();
    let mut curve = Vec::new();
    let mut losses = Vec::new();
    let mut episode = 0u64;
    let mut state = reset(&sc, episode_seed(seed, episode))?;
    let mut epv_prev = ctx.game_epv(&state)?;
    let mut acc = EpisodeAcc::default();

    for t in 0..total {
        if t % config.eval_every == 0 {
            let ev = evaluate_policy(&learner.online, &sc, sc.difficulty, config.eval_episodes, eval_base, &ctx, seed, t)?;
            sink.write(&ev.records)?;
            curve.push((t, ev.mean_goal_difference));
            records.extend(ev.records);
        }

        let per_agent = agent_observations(&state, ctx.egocentric);
        let actions = learner.select_actions(&per_agent, tc.epsilon.value(t, total), &mut rng)?;
        let joint: Vec<DefenderAction> = actions
            .iter()
            .map(|&a| DefenderAction::from_index(a).expect("valid action index"))
            .collect();
        let (next, events) = step(&state, &joint)?;
        let epv_curr = ctx.next_epv(&next, epv_prev)?;
        let sparse = sparse_reward(&events);
        let reward = shaped_reward(sparse, epv_prev, epv_curr, &config.reward);
        acc.add(reward, sparse, epv_curr);

        // Time-limit truncation still bootstraps.
        let cut = events.outcome.map_or(false, |o| o.kind != OutcomeKind::StepLimit);
        buffer.push(Transition {
            obs: per_agent,
            actions,
            reward,
            next_obs: agent_observations(&next, ctx.egocentric),
            terminal: cut,
        });

        let done = t + 1;
        if done >= tc.learning_starts && done % tc.update_every == 0 && buffer.len() >= tc.batch_size {
            let batch = buffer.sample(tc.batch_size, &mut rng)?;
            losses.push(learner.td_update(&batch, tc)?);
        }
        if done % tc.target_sync_period == 0 {
            learner.sync_target();
        }
        if let (Some(every), Some(dir)) = (config.checkpoint_every, run_dir) {
            if done % every == 0 {
                let path = dir.join("checkpoints").join(format!("step_{done}.json"));
                save_checkpoint(config, seed, &learner.online, done, &path)?;
            }
        }

        if let Some(o) = events.outcome {
            let rec = acc.record(seed, Phase::Train, episode, done, sc.difficulty, o.kind);
            sink.write(std::slice::from_ref(&rec))?;
            records.push(rec);
            episode += 1;
            state = reset(&sc, episode_seed(seed, episode))?;
            epv_prev = ctx.game_epv(&state)?;
            acc = EpisodeAcc::default();
        } else {
            state = next;
            epv_prev = epv_curr;
        }
    }

    let mut final_evals = Vec::new();
    for d in config.final_difficulties() {
        let ev = evaluate_policy(&learner.online, &sc, d, config.eval_episodes, eval_base, &ctx, seed, total)?;
        if d == sc.difficulty {
            curve.push((total, ev.mean_goal_difference));
        }
        sink.write(&ev.records)?;
        records.extend(ev.records.iter().cloned());
        final_evals.push(ev);
    }
    sink.finish()?;
    if let Some(dir) = run_dir {
        save_checkpoint(config, seed, &learner.online, total, &dir.join("final.json"))?;
    }

    Ok(SeedRun {
        seed,
        records,
        curve,
        final_evals,
        losses,
        networks: learner.online,
    })
}

/// Per-seed result of [`run_training`].
#[derive(Debug)]
pub struct SeedReport {
    pub seed: u64,
    pub run_dir: PathBuf,
    pub result: std::result::Result<SeedRun, String>,
}

/// Directory of one seed's artifacts under `out`.
pub fn run_dir(out: &Path, config: &ExperimentConfig, seed: u64) -> PathBuf {
    out.join(format!("{}-seed{seed}", config.hash()))
}

/// Trains every seed (in parallel across `jobs` threads when built with
/// the `parallel` feature). A failing seed is recorded in its
/// `failure.txt` without stopping the others.
pub fn run_training(config: &ExperimentConfig, out: &Path, jobs: Option<usize>) -> Result<Vec<SeedReport>> {
    config.validate()?;
    let grid = build_epv_grid(config)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let echo = config.to_toml_string()?;
    let reports = par::with_jobs(jobs, || {
        par::map_slice(&config.seeds, |&seed| {
            let dir = run_dir(out, config, seed);
            let result = std::fs::create_dir_all(&dir)
                .map_err(|e| Error::io(&dir, e))
                .and_then(|_| std::fs::write(dir.join("config.toml"), &echo).map_err(|e| Error::io(&dir, e)))
                .and_then(|_| train_seed(config, seed, &grid, Some(&dir)));
            let result = result.map_err(|e| {
                let msg = e.to_string();
                let _ = std::fs::write(dir.join("failure.txt"), format!("{msg}\n"));
                msg
            });
            SeedReport { seed, run_dir: dir, result }
        })
    });
    Ok(reports)
}

/// Evaluation steps for a run: every `eval_every` steps before `total`, plus `total`.
pub fn evaluation_steps(total: u64, eval_every: u64) -> Vec<u64> {
    let mut v: Vec<u64> = (0..total).step_by(eval_every.max(1) as usize).collect();
    v.push(total);
    v
}
