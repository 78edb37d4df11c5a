use super::{GameState, ScenarioConfig};

/// Length of the flat observation vector for a scenario:
/// four slots per player, four for the ball, and a carrier one-hot.
pub fn observation_len(scenario: &ScenarioConfig) -> usize {
    let players = scenario.n_players();
    players * 4 + 4 + players
}

/// Flat observation: `[x, y, vx, vy]` per player (defenders, goalkeeper,
/// attackers), then the ball, then a one-hot of the carrier. Positions map
/// the pitch onto `[-1, 1]`; velocities are divided by the fastest player
/// (ball: by shot speed) and clipped.
pub fn observe(state: &GameState) -> Vec<f64> {
    let sc = &state.scenario;
    let pitch = sc.pitch;
    let phys = sc.physics;
    let speed_scale = phys.defender_max_speed.max(phys.attacker_max_speed);
    let ball_scale = phys.shot_speed.max(phys.pass_speed_max);
    let px = |x: f64| (2.0 * x / pitch.length - 1.0).clamp(-1.0, 1.0);
    let py = |y: f64| (2.0 * y / pitch.width - 1.0).clamp(-1.0, 1.0);

    let mut obs = Vec::with_capacity(observation_len(sc));
    for p in &state.players {
        obs.push(px(p.position.x));
        obs.push(py(p.position.y));
        obs.push((p.velocity.x / speed_scale).clamp(-1.0, 1.0));
        obs.push((p.velocity.y / speed_scale).clamp(-1.0, 1.0));
    }
    let b = state.ball;
    obs.push(px(b.position.x));
    obs.push(py(b.position.y));
    obs.push((b.velocity.x / ball_scale).clamp(-1.0, 1.0));
    obs.push((b.velocity.y / ball_scale).clamp(-1.0, 1.0));
    for p in &state.players {
        obs.push(if b.carrier == Some(p.id) { 1.0 } else { 0.0 });
    }
    obs
}

/// `obs` with defender `agent`'s player slots and carrier flag swapped into
/// the first defender position, so every agent sees itself first.
pub fn egocentric(obs: &[f64], scenario: &ScenarioConfig, agent: usize) -> Vec<f64> {
    let mut out = obs.to_vec();
    if agent != 0 {
        for k in 0..4 {
            out.swap(k, agent * 4 + k);
        }
        let flags = scenario.n_players() * 4 + 4;
        out.swap(flags, flags + agent);
    }
    out
}
