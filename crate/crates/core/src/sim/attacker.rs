//! Scripted attacking team.
//!
//! The carrier picks among dribbling toward goal, passing to the
//! best-placed teammate, or shooting. With probability `0.5 + 0.5·difficulty`
//! it takes the greedy option, otherwise one of the others at random; kick
//! directions carry Gaussian noise with σ = `(1 − difficulty)·noise_max`.
//! Off-ball attackers run to the open point of greatest arrival-time
//! advantage in their lane.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{FlightKind, GameState, PlayerState};
use crate::geom::{closest_on_segment, Vec2};
use crate::pitch_control::arrival_time;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CarrierChoice {
    Dribble,
    Pass,
    Shoot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub chosen: CarrierChoice,
    pub greedy: CarrierChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KickKind {
    Pass { receiver: usize },
    Shot,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kick {
    pub kind: KickKind,
    pub velocity: Vec2,
}

/// Attacker movement for one step, indexed in attacker order.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackerPlan {
    pub velocities: Vec<Vec2>,
    pub kick: Option<Kick>,
    /// Whether the carrier made a fresh dribble/pass/shoot decision.
    pub decided: bool,
    pub decision: Option<Decision>,
}

const MIN_PASS_LANE: f64 = 2.0;
const SUPPORT_DEPTH: f64 = 12.0;
const SUPPORT_SPREAD: f64 = 6.0;
const PASS_ARRIVAL_SPEED: f64 = 6.0;

fn nearest_defender_distance(state: &GameState, p: Vec2) -> f64 {
    state
        .defending_team()
        .iter()
        .map(|d| d.position.distance(p))
        .fold(f64::INFINITY, f64::min)
}

fn in_scoring_zone(state: &GameState, p: Vec2) -> bool {
    let pitch = state.scenario.pitch;
    let box_half_width = 20.16_f64.min(pitch.width / 2.0);
    p.x <= state.scenario.physics.scoring_zone && (p.y - pitch.width / 2.0).abs() <= box_half_width
}

/// Best-placed teammate of the carrier and whether its passing lane is open.
fn best_receiver(state: &GameState, carrier: usize) -> Option<(usize, bool)> {
    let from = state.players[carrier].position;
    let mut best: Option<(f64, usize, bool)> = None;
    for t in state.attackers() {
        if t.id == carrier {
            continue;
        }
        let lane = state
            .defending_team()
            .iter()
            .map(|d| closest_on_segment(from, t.position, d.position).1)
            .fold(f64::INFINITY, f64::min);
        let openness = nearest_defender_distance(state, t.position).min(10.0);
        let progress = from.x - t.position.x;
        let open_lane = lane >= MIN_PASS_LANE;
        let mut score = openness + 1.5 * lane.min(5.0) + 0.3 * progress;
        if !open_lane {
            score -= 20.0;
        }
        if best.map_or(true, |(b, _, _)| score > b) {
            best = Some((score, t.id, open_lane));
        }
    }
    best.map(|(_, id, open)| (id, open))
}

fn greedy_choice(state: &GameState, carrier: usize) -> CarrierChoice {
    let pos = state.players[carrier].position;
    if in_scoring_zone(state, pos) {
        return CarrierChoice::Shoot;
    }
    let pressed = nearest_defender_distance(state, pos) <= state.scenario.physics.press_radius;
    match best_receiver(state, carrier) {
        Some((_, true)) if pressed => CarrierChoice::Pass,
        _ => CarrierChoice::Dribble,
    }
}

/// Carrier's dribble/pass/shoot choice with the difficulty-dependent mixing
/// between greedy and non-greedy options.
pub fn carrier_decision(state: &GameState, difficulty: f64, rng: &mut ChaCha8Rng) -> Option<Decision> {
    let carrier = state.ball.carrier?;
    let greedy = greedy_choice(state, carrier);
    let p_greedy = 0.5 + 0.5 * difficulty;
    let chosen = if rng.gen::<f64>() < p_greedy {
        greedy
    } else {
        let can_pass = state.scenario.n_attackers > 1;
        let others: Vec<CarrierChoice> = [CarrierChoice::Dribble, CarrierChoice::Pass, CarrierChoice::Shoot]
            .into_iter()
            .filter(|&c| c != greedy && (can_pass || c != CarrierChoice::Pass))
            .collect();
        if others.is_empty() {
            greedy
        } else {
            others[rng.gen_range(0..others.len())]
        }
    };
    Some(Decision { chosen, greedy })
}

fn noisy_direction(direction: Vec2, sigma: f64, rng: &mut ChaCha8Rng) -> Vec2 {
    let noise = if sigma > 0.0 {
        Normal::new(0.0, sigma).map(|n| n.sample(rng)).unwrap_or(0.0)
    } else {
        0.0
    };
    Vec2::from_angle(direction.angle() + noise)
}

fn dribble_velocity(state: &GameState, carrier: &PlayerState) -> Vec2 {
    let pitch = state.scenario.pitch;
    let mut dir = (pitch.goal_center() - carrier.position).normalized();
    let nearest = state
        .defending_team()
        .iter()
        .filter(|d| d.position.distance(carrier.position) < 6.0)
        .filter(|d| (d.position - carrier.position).dot(dir) > 0.0)
        .min_by(|a, b| {
            a.position
                .distance(carrier.position)
                .total_cmp(&b.position.distance(carrier.position))
        });
    if let Some(d) = nearest {
        let side = (carrier.position - d.position).dot(dir.perp());
        let away = if side >= 0.0 { dir.perp() } else { -dir.perp() };
        dir = (dir + away * 0.8).normalized();
    }
    dir * state.scenario.physics.dribble_speed
}

/// Open point in a lane ahead of the ball with the largest arrival-time
/// advantage for `player` over the nearest defender.
fn support_target(state: &GameState, player: &PlayerState, lane_y: f64) -> Vec2 {
    let pitch = state.scenario.pitch;
    let base = Vec2::new(
        (state.ball.position.x - SUPPORT_DEPTH).clamp(11.0, pitch.length - 1.0),
        lane_y,
    );
    let mut best = (f64::NEG_INFINITY, base);
    for dx in [-SUPPORT_SPREAD, 0.0, SUPPORT_SPREAD] {
        for dy in [-SUPPORT_SPREAD, 0.0, SUPPORT_SPREAD] {
            let c = Vec2::new(base.x + dx, base.y + dy);
            if !pitch.contains(c) {
                continue;
            }
            let defend = state
                .defending_team()
                .iter()
                .map(|d| arrival_time(d, c))
                .fold(f64::INFINITY, f64::min);
            let gap = defend - arrival_time(player, c);
            if gap > best.0 {
                best = (gap, c);
            }
        }
    }
    best.1
}

fn seek(player: &PlayerState, target: Vec2, dt: f64) -> Vec2 {
    ((target - player.position) * (1.0 / dt)).clamp_norm(player.max_speed)
}

/// Movement and kicks of the scripted attackers for the current step.
pub fn attacker_policy(state: &GameState, difficulty: f64, rng: &mut ChaCha8Rng) -> AttackerPlan {
    let sc = state.scenario;
    let phys = sc.physics;
    let pitch = sc.pitch;
    let dt = sc.dt;
    let sigma = (1.0 - difficulty) * phys.noise_max;
    let attackers = state.attackers();
    let mut velocities = vec![Vec2::ZERO; attackers.len()];
    let mut kick = None;
    let mut decided = false;
    let mut decision = None;

    let carrier = state.ball.carrier;
    if let Some(cid) = carrier {
        let cp = state.players[cid];
        let k = cid - sc.n_defenders - 1;
        velocities[k] = dribble_velocity(state, &cp);
        if state.step_index >= state.next_decision_step {
            decided = true;
            decision = carrier_decision(state, difficulty, rng);
            match decision.map(|d| d.chosen) {
                Some(CarrierChoice::Shoot) => {
                    let side = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    let aim = Vec2::new(0.0, pitch.width / 2.0 + side * 0.6 * pitch.goal_half_width);
                    let dir = noisy_direction(aim - cp.position, sigma, rng);
                    kick = Some(Kick {
                        kind: KickKind::Shot,
                        velocity: dir * phys.shot_speed,
                    });
                    velocities[k] = Vec2::ZERO;
                }
                Some(CarrierChoice::Pass) => {
                    if let Some((rid, _)) = best_receiver(state, cid) {
                        let r = state.players[rid];
                        let d = r.position.distance(cp.position);
                        let speed = (PASS_ARRIVAL_SPEED.powi(2) + 2.0 * phys.ball_deceleration * d)
                            .sqrt()
                            .clamp(8.0, phys.pass_speed_max);
                        let lead = r.position + r.velocity * (0.5 * d / speed);
                        let dir = noisy_direction(lead - cp.position, sigma, rng);
                        kick = Some(Kick {
                            kind: KickKind::Pass { receiver: rid },
                            velocity: dir * speed,
                        });
                        velocities[k] = Vec2::ZERO;
                    }
                }
                _ => {}
            }
        }
    }

    // The attacker chasing an uncarried ball: the intended receiver, or the nearest one.
    let chaser = match state.ball.flight.map(|f| f.kind) {
        Some(FlightKind::Pass { receiver }) if carrier.is_none() => Some(receiver),
        Some(FlightKind::Loose) if carrier.is_none() => attackers
            .iter()
            .min_by(|a, b| {
                a.position
                    .distance(state.ball.position)
                    .total_cmp(&b.position.distance(state.ball.position))
            })
            .map(|p| p.id),
        _ => None,
    };

    let support: Vec<&PlayerState> = attackers
        .iter()
        .filter(|p| Some(p.id) != carrier && Some(p.id) != chaser)
        .collect();
    let lanes = support.len() as f64 + 1.0;
    for (rank, p) in support.iter().enumerate() {
        let lane_y = pitch.width * (rank as f64 + 1.0) / lanes;
        let target = support_target(state, p, lane_y);
        velocities[p.id - sc.n_defenders - 1] = seek(p, target, dt);
    }
    if let Some(cid) = chaser {
        let p = &state.players[cid];
        velocities[cid - sc.n_defenders - 1] = seek(p, state.ball.position, dt);
    }

    AttackerPlan {
        velocities,
        kick,
        decided,
        decision,
    }
}
