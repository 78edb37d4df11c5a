//! Deterministic 2D football-defense environment.
//!
//! Controllable defenders and one immobile goalkeeper defend the goal at
//! `x = 0` against scripted attackers. Players are point masses with
//! instantaneous heading changes and a speed clamp; the ball is either
//! carried, in flight (pass or shot, decelerating linearly) or loose.

mod attacker;
mod observe;
mod trajectory;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{closest_on_segment, Vec2};

pub use attacker::{attacker_policy, carrier_decision, AttackerPlan, CarrierChoice, Decision, Kick, KickKind};
pub use observe::{egocentric, observation_len, observe};
pub use trajectory::{record_episode, write_trajectory, TrajectoryFrame};

/// Pitch geometry and the resolution of the control/EPV grids laid over it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PitchSpec {
    /// Meters along x; the defended goal sits at `x = 0`.
    pub length: f64,
    pub width: f64,
    pub grid_m: usize,
    pub grid_n: usize,
    pub goal_half_width: f64,
}

impl Default for PitchSpec {
    fn default() -> Self {
        PitchSpec {
            length: 105.0,
            width: 68.0,
            grid_m: 32,
            grid_n: 20,
            goal_half_width: 3.66,
        }
    }
}

impl PitchSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::config("pitch.length", "must be positive"));
        }
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::config("pitch.width", "must be positive"));
        }
        if self.grid_m < 2 {
            return Err(Error::config("pitch.grid_m", "must be at least 2"));
        }
        if self.grid_n < 2 {
            return Err(Error::config("pitch.grid_n", "must be at least 2"));
        }
        if !(self.goal_half_width > 0.0 && self.goal_half_width < self.width / 2.0) {
            return Err(Error::config("pitch.goal_half_width", "must lie in (0, width/2)"));
        }
        Ok(())
    }

    pub fn goal_center(&self) -> Vec2 {
        Vec2::new(0.0, self.width / 2.0)
    }

    pub fn cell_size(&self) -> (f64, f64) {
        (self.length / self.grid_m as f64, self.width / self.grid_n as f64)
    }

    /// Center of grid cell `(i, j)`; `i` runs along x, `j` along y.
    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        let (dx, dy) = self.cell_size();
        Vec2::new((i as f64 + 0.5) * dx, (j as f64 + 0.5) * dy)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        (0.0..=self.length).contains(&p.x) && (0.0..=self.width).contains(&p.y)
    }

    pub fn clamp(&self, p: Vec2) -> Vec2 {
        Vec2::new(p.x.clamp(0.0, self.length), p.y.clamp(0.0, self.width))
    }

    pub fn in_goal_mouth(&self, y: f64) -> bool {
        (y - self.width / 2.0).abs() <= self.goal_half_width
    }
}

/// Movement and ball-physics constants of the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Physics {
    pub defender_max_speed: f64,
    pub attacker_max_speed: f64,
    /// Carrier speed while dribbling.
    pub dribble_speed: f64,
    pub reaction_time: f64,
    pub tackle_radius: f64,
    /// Chance a Press within `tackle_radius` wins the ball on a given step.
    pub tackle_success: f64,
    /// Chance a failed tackle is a foul, which ends the episode.
    pub foul_probability: f64,
    /// A carrier with a defender this close counts as pressed.
    pub press_radius: f64,
    /// Depth of the shooting zone in front of goal.
    pub scoring_zone: f64,
    /// Radius within which a player collects or intercepts the ball.
    pub control_radius: f64,
    pub keeper_reach: f64,
    pub pass_speed_max: f64,
    pub shot_speed: f64,
    /// Linear deceleration of a ball in flight, m/s².
    pub ball_deceleration: f64,
    /// Kick direction noise (radians, standard deviation) at difficulty 0.
    pub noise_max: f64,
    /// Steps between carrier decisions.
    pub decision_period: u64,
}

impl Default for Physics {
    fn default() -> Self {
        Physics {
            defender_max_speed: 8.0,
            attacker_max_speed: 7.0,
            dribble_speed: 5.5,
            reaction_time: 0.5,
            tackle_radius: 1.5,
            tackle_success: 0.35,
            foul_probability: 0.1,
            press_radius: 4.0,
            scoring_zone: 20.0,
            control_radius: 1.0,
            keeper_reach: 1.0,
            pass_speed_max: 25.0,
            shot_speed: 26.0,
            ball_deceleration: 6.0,
            noise_max: 0.3,
            decision_period: 3,
        }
    }
}

/// Team sizes, attacker strength and episode timing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Controllable defenders, not counting the goalkeeper.
    pub n_defenders: usize,
    pub n_attackers: usize,
    pub difficulty: f64,
    pub max_episode_steps: u64,
    pub dt: f64,
    pub pitch: PitchSpec,
    pub physics: Physics,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_defenders: 2,
            n_attackers: 3,
            difficulty: 0.95,
            max_episode_steps: 400,
            dt: 0.1,
            pitch: PitchSpec::default(),
            physics: Physics::default(),
        }
    }
}

impl ScenarioConfig {
    /// Four defenders plus the lazy goalkeeper against six attackers.
    pub fn full_scale() -> Self {
        ScenarioConfig {
            n_defenders: 4,
            n_attackers: 6,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_defenders < 1 {
            return Err(Error::config("scenario.n_defenders", "must be at least 1"));
        }
        if self.n_attackers < 1 {
            return Err(Error::config("scenario.n_attackers", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.difficulty) {
            return Err(Error::config("scenario.difficulty", "must lie in [0, 1]"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config("scenario.dt", "must be positive"));
        }
        if self.max_episode_steps < 1 {
            return Err(Error::config("scenario.max_episode_steps", "must be at least 1"));
        }
        self.pitch.validate()
    }

    pub fn n_players(&self) -> usize {
        self.n_defenders + 1 + self.n_attackers
    }

    pub fn keeper_id(&self) -> usize {
        self.n_defenders
    }

    pub fn attacker_ids(&self) -> std::ops::Range<usize> {
        self.n_defenders + 1..self.n_players()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Team {
    Defending,
    Attacking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Outfield,
    LazyGoalkeeper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlayerState {
    pub id: usize,
    pub team: Team,
    pub role: Role,
    pub position: Vec2,
    pub velocity: Vec2,
    pub max_speed: f64,
    pub reaction_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlightKind {
    Pass { receiver: usize },
    Shot,
    Loose,
}

/// A ball that is not carried.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flight {
    pub kind: FlightKind,
    pub kicker: Option<usize>,
    /// Steps since the kick; the kicker cannot touch the ball again until this passes a threshold.
    pub age: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub carrier: Option<usize>,
    pub flight: Option<Flight>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreEvent {
    pub step: u64,
    pub team: Team,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutcomeKind {
    GoalConceded,
    OutOfBounds,
    Turnover,
    StepLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub kind: OutcomeKind,
    /// Defending goals minus attacking goals.
    pub goal_difference: i32,
}

impl EpisodeOutcome {
    pub fn new(kind: OutcomeKind) -> Self {
        let goal_difference = if kind == OutcomeKind::GoalConceded { -1 } else { 0 };
        EpisodeOutcome { kind, goal_difference }
    }
}

/// Eight compass bearings; north is +y, east is +x (away from the defended goal).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Compass {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
}

impl Compass {
    pub const ALL: [Compass; 8] = [
        Compass::N,
        Compass::NE,
        Compass::E,
        Compass::SE,
        Compass::S,
        Compass::SW,
        Compass::W,
        Compass::NW,
    ];

    pub fn unit(self) -> Vec2 {
        let d = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Compass::N => Vec2::new(0.0, 1.0),
            Compass::NE => Vec2::new(d, d),
            Compass::E => Vec2::new(1.0, 0.0),
            Compass::SE => Vec2::new(d, -d),
            Compass::S => Vec2::new(0.0, -1.0),
            Compass::SW => Vec2::new(-d, -d),
            Compass::W => Vec2::new(-1.0, 0.0),
            Compass::NW => Vec2::new(-d, d),
        }
    }
}

/// Per-step choice of one controllable defender.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DefenderAction {
    Stay,
    Move(Compass),
    /// Run at the ball at full speed and tackle the carrier when within reach.
    Press,
}

impl DefenderAction {
    pub const COUNT: usize = 10;

    /// Index layout: 0 = Stay, 1..=8 = moves N..NW, 9 = Press.
    pub fn from_index(index: usize) -> Option<Self> {
        match index {
            0 => Some(DefenderAction::Stay),
            1..=8 => Some(DefenderAction::Move(Compass::ALL[index - 1])),
            9 => Some(DefenderAction::Press),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            DefenderAction::Stay => 0,
            DefenderAction::Move(c) => 1 + Compass::ALL.iter().position(|&x| x == c).unwrap_or(0),
            DefenderAction::Press => 9,
        }
    }
}

/// What happened during one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StepEvents {
    pub goal: bool,
    pub out_of_bounds: bool,
    pub turnover: bool,
    pub tackle: bool,
    pub foul: bool,
    pub interception: bool,
    pub terminal: bool,
    pub outcome: Option<EpisodeOutcome>,
}

/// Complete, resumable snapshot of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    pub scenario: ScenarioConfig,
    pub players: Vec<PlayerState>,
    pub ball: BallState,
    pub step_index: u64,
    pub rng: ChaCha8Rng,
    pub score_events: Vec<ScoreEvent>,
    pub outcome: Option<EpisodeOutcome>,
    /// Step at which the ball carrier next reconsiders dribble/pass/shoot.
    pub next_decision_step: u64,
}

const KICKER_IMMUNITY_STEPS: u32 = 3;

impl GameState {
    pub fn is_terminal(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn defenders(&self) -> &[PlayerState] {
        &self.players[..self.scenario.n_defenders]
    }

    pub fn keeper(&self) -> &PlayerState {
        &self.players[self.scenario.keeper_id()]
    }

    pub fn attackers(&self) -> &[PlayerState] {
        &self.players[self.scenario.attacker_ids()]
    }

    /// Defenders and goalkeeper.
    pub fn defending_team(&self) -> &[PlayerState] {
        &self.players[..=self.scenario.n_defenders]
    }
}

/// Starts a new episode: attackers kick off from the halfway line, defenders
/// spread across their own half, the goalkeeper stands on the goal line.
pub fn reset(scenario: &ScenarioConfig, seed: u64) -> Result<GameState> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pitch = scenario.pitch;
    let phys = scenario.physics;
    let (l, w) = (pitch.length, pitch.width);
    let mut players = Vec::with_capacity(scenario.n_players());

    for k in 0..scenario.n_defenders {
        let y = w * (k as f64 + 1.0) / (scenario.n_defenders as f64 + 1.0);
        let pos = Vec2::new(0.3 * l + rng.gen_range(-3.0..3.0), y + rng.gen_range(-3.0..3.0));
        players.push(PlayerState {
            id: k,
            team: Team::Defending,
            role: Role::Outfield,
            position: pitch.clamp(pos),
            velocity: Vec2::ZERO,
            max_speed: phys.defender_max_speed,
            reaction_time: phys.reaction_time,
        });
    }
    players.push(PlayerState {
        id: scenario.keeper_id(),
        team: Team::Defending,
        role: Role::LazyGoalkeeper,
        position: pitch.goal_center(),
        velocity: Vec2::ZERO,
        max_speed: phys.defender_max_speed,
        reaction_time: phys.reaction_time,
    });

    let kickoff = Vec2::new(l / 2.0, w / 2.0);
    let support = scenario.n_attackers - 1;
    for (k, id) in scenario.attacker_ids().enumerate() {
        let pos = if k == 0 {
            kickoff
        } else {
            let y = w * k as f64 / (support as f64 + 1.0);
            Vec2::new(l / 2.0 + rng.gen_range(2.0..12.0), y + rng.gen_range(-3.0..3.0))
        };
        players.push(PlayerState {
            id,
            team: Team::Attacking,
            role: Role::Outfield,
            position: pitch.clamp(pos),
            velocity: Vec2::ZERO,
            max_speed: phys.attacker_max_speed,
            reaction_time: phys.reaction_time,
        });
    }

    let carrier = scenario.n_defenders + 1;
    Ok(GameState {
        scenario: *scenario,
        ball: BallState {
            position: players[carrier].position,
            velocity: Vec2::ZERO,
            carrier: Some(carrier),
            flight: None,
        },
        players,
        step_index: 0,
        rng,
        score_events: Vec::new(),
        outcome: None,
        next_decision_step: 0,
    })
}

/// Advances the episode by one `dt`.
pub fn step(state: &GameState, actions: &[DefenderAction]) -> Result<(GameState, StepEvents)> {
    if state.is_terminal() {
        return Err(Error::SteppedTerminal);
    }
    let sc = state.scenario;
    if actions.len() != sc.n_defenders {
        return Err(Error::ActionArity {
            expected: sc.n_defenders,
            got: actions.len(),
        });
    }
    let mut s = state.clone();
    let mut rng = s.rng.clone();
    let mut events = StepEvents::default();
    let dt = sc.dt;
    let phys = sc.physics;
    let pitch = sc.pitch;

    let plan = attacker_policy(&s, sc.difficulty, &mut rng);
    if plan.decided {
        s.next_decision_step = s.step_index + phys.decision_period;
    }

    // Defender velocities.
    let ball_pos = s.ball.position;
    for (k, action) in actions.iter().enumerate() {
        let p = &s.players[k];
        let v = match action {
            DefenderAction::Stay => Vec2::ZERO,
            DefenderAction::Move(c) => c.unit() * p.max_speed,
            DefenderAction::Press => ((ball_pos - p.position) * (1.0 / dt)).clamp_norm(p.max_speed),
        };
        s.players[k].velocity = v;
    }
    for (k, id) in sc.attacker_ids().enumerate() {
        s.players[id].velocity = plan.velocities[k];
    }

    for p in s.players.iter_mut() {
        if p.role == Role::LazyGoalkeeper {
            p.velocity = Vec2::ZERO;
            continue;
        }
        let old = p.position;
        p.position = pitch.clamp(old + p.velocity * dt);
        p.velocity = (p.position - old) * (1.0 / dt);
    }

    let mut outcome = None;
    if let Some(carrier) = s.ball.carrier {
        if let Some(kick) = plan.kick {
            s.players[carrier].velocity = Vec2::ZERO;
            s.ball = BallState {
                position: s.players[carrier].position,
                velocity: kick.velocity,
                carrier: None,
                flight: Some(Flight {
                    kind: match kick.kind {
                        KickKind::Pass { receiver } => FlightKind::Pass { receiver },
                        KickKind::Shot => FlightKind::Shot,
                    },
                    kicker: Some(carrier),
                    age: 0,
                }),
            };
        } else {
            s.ball.position = s.players[carrier].position;
            s.ball.velocity = s.players[carrier].velocity;
            outcome = resolve_tackles(&s, actions, &mut rng, &mut events);
        }
    } else {
        outcome = advance_ball(&mut s, &mut events);
    }

    s.step_index += 1;
    if outcome.is_none() && s.step_index >= sc.max_episode_steps {
        outcome = Some(EpisodeOutcome::new(OutcomeKind::StepLimit));
    }
    if let Some(o) = outcome {
        if o.kind == OutcomeKind::GoalConceded {
            s.score_events.push(ScoreEvent {
                step: s.step_index,
                team: Team::Attacking,
            });
        }
        events.terminal = true;
        events.outcome = Some(o);
        s.outcome = Some(o);
    }
    s.rng = rng;
    Ok((s, events))
}

fn resolve_tackles(
    s: &GameState,
    actions: &[DefenderAction],
    rng: &mut ChaCha8Rng,
    events: &mut StepEvents,
) -> Option<EpisodeOutcome> {
    let phys = s.scenario.physics;
    let carrier_pos = s.ball.position;
    for (k, action) in actions.iter().enumerate() {
        if *action != DefenderAction::Press {
            continue;
        }
        if s.players[k].position.distance(carrier_pos) > phys.tackle_radius {
            continue;
        }
        if rng.gen::<f64>() < phys.tackle_success {
            events.tackle = true;
            events.turnover = true;
            return Some(EpisodeOutcome::new(OutcomeKind::Turnover));
        }
        if rng.gen::<f64>() < phys.foul_probability {
            events.foul = true;
            events.turnover = true;
            return Some(EpisodeOutcome::new(OutcomeKind::Turnover));
        }
    }
    None
}

/// Moves an uncarried ball and resolves the first thing it meets along its
/// path: a player, the goal, or the boundary.
fn advance_ball(s: &mut GameState, events: &mut StepEvents) -> Option<EpisodeOutcome> {
    let sc = s.scenario;
    let phys = sc.physics;
    let pitch = sc.pitch;
    let dt = sc.dt;
    let mut flight = s.ball.flight.unwrap_or(Flight {
        kind: FlightKind::Loose,
        kicker: None,
        age: 0,
    });

    let a = s.ball.position;
    let speed = s.ball.velocity.norm();
    let new_speed = (speed - phys.ball_deceleration * dt).max(0.0);
    let dir = s.ball.velocity.normalized();
    let b = a + dir * ((speed + new_speed) * 0.5 * dt);

    // Earliest boundary crossing along a→b.
    let mut exit: Option<(f64, bool)> = None;
    let mut consider_exit = |t: f64, goal: bool| {
        if (0.0..=1.0).contains(&t) && exit.map_or(true, |(best, _)| t < best) {
            exit = Some((t, goal));
        }
    };
    if b.x < 0.0 {
        let t = a.x / (a.x - b.x);
        let y = a.y + (b.y - a.y) * t;
        consider_exit(t, pitch.in_goal_mouth(y));
    }
    if b.x > pitch.length {
        consider_exit((pitch.length - a.x) / (b.x - a.x), false);
    }
    if b.y < 0.0 {
        consider_exit(a.y / (a.y - b.y), false);
    }
    if b.y > pitch.width {
        consider_exit((pitch.width - a.y) / (b.y - a.y), false);
    }

    // Earliest player touch along a→b.
    let mut touch: Option<(f64, f64, usize)> = None;
    for p in &s.players {
        if flight.kicker == Some(p.id) && flight.age < KICKER_IMMUNITY_STEPS {
            continue;
        }
        let reach = if p.role == Role::LazyGoalkeeper {
            phys.keeper_reach
        } else {
            phys.control_radius
        };
        let (t, d) = closest_on_segment(a, b, p.position);
        if d <= reach && touch.map_or(true, |(bt, bd, _)| (t, d) < (bt, bd)) {
            touch = Some((t, d, p.id));
        }
    }

    let touch_first = match (touch, exit) {
        (Some((tt, _, _)), Some((te, _))) => tt <= te,
        (Some(_), None) => true,
        _ => false,
    };
    if touch_first {
        let (_, _, id) = touch.expect("touch present");
        let player = s.players[id];
        if player.team == Team::Defending {
            events.interception = true;
            events.turnover = true;
            s.ball.position = player.position;
            s.ball.velocity = Vec2::ZERO;
            return Some(EpisodeOutcome::new(OutcomeKind::Turnover));
        }
        s.ball = BallState {
            position: player.position,
            velocity: player.velocity,
            carrier: Some(id),
            flight: None,
        };
        s.next_decision_step = s.step_index + 1;
        return None;
    }
    if let Some((_, goal)) = exit {
        s.ball.position = b;
        s.ball.velocity = dir * new_speed;
        if goal {
            events.goal = true;
            return Some(EpisodeOutcome::new(OutcomeKind::GoalConceded));
        }
        events.out_of_bounds = true;
        return Some(EpisodeOutcome::new(OutcomeKind::OutOfBounds));
    }

    flight.age = flight.age.saturating_add(1);
    if new_speed == 0.0 {
        flight.kind = FlightKind::Loose;
    }
    s.ball.position = b;
    s.ball.velocity = dir * new_speed;
    s.ball.flight = Some(flight);
    None
}
