use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{step, DefenderAction, GameState, StepEvents};
use crate::error::{Error, Result};

/// One line of a trajectory dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFrame {
    pub step: u64,
    /// `[x, y, vx, vy]` per player, in id order.
    pub players: Vec<[f64; 4]>,
    pub ball: [f64; 4],
    pub carrier: Option<usize>,
    /// Action indices taken from this state (empty on the final frame).
    pub actions: Vec<usize>,
    pub events: Option<StepEvents>,
}

impl TrajectoryFrame {
    fn of(state: &GameState) -> Self {
        TrajectoryFrame {
            step: state.step_index,
            players: state
                .players
                .iter()
                .map(|p| [p.position.x, p.position.y, p.velocity.x, p.velocity.y])
                .collect(),
            ball: [
                state.ball.position.x,
                state.ball.position.y,
                state.ball.velocity.x,
                state.ball.velocity.y,
            ],
            carrier: state.ball.carrier,
            actions: Vec::new(),
            events: None,
        }
    }
}

/// Plays one episode from `start` with `policy`, recording every state.
/// Returns the frames and the terminal state.
pub fn record_episode<F>(start: GameState, mut policy: F) -> Result<(Vec<TrajectoryFrame>, GameState)>
where
    F: FnMut(&GameState) -> Vec<DefenderAction>,
{
    let mut frames = Vec::new();
    let mut state = start;
    while !state.is_terminal() {
        let actions = policy(&state);
        let (next, events) = step(&state, &actions)?;
        let mut frame = TrajectoryFrame::of(&state);
        frame.actions = actions.iter().map(|a| a.index()).collect();
        frame.events = Some(events);
        frames.push(frame);
        state = next;
    }
    frames.push(TrajectoryFrame::of(&state));
    Ok((frames, state))
}

/// Writes frames as JSON lines.
pub fn write_trajectory(frames: &[TrajectoryFrame], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for f in frames {
        let line = serde_json::to_string(f).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
