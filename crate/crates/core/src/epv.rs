//! Expected possession value on the pitch grid.
//!
//! Attacking possession is modelled as a Markov chain over cells: from each
//! cell the ball moves to a 4-neighbour or stays, a shot is taken (scoring
//! with a per-cell probability), or possession is lost. The EPV of a cell is
//! the probability the possession ends in a goal, obtained by value
//! iteration. Contracting the EPV grid with a control field gives the
//! game-state EPV used for reward shaping.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pitch_control::ScalarField;
use crate::sim::PitchSpec;

/// Move slots within a cell's move distribution.
pub const STAY: usize = 0;
pub const UP_X: usize = 1;
pub const DOWN_X: usize = 2;
pub const UP_Y: usize = 3;
pub const DOWN_Y: usize = 4;

const SIMPLEX_TOL: f64 = 1e-9;

/// Probability that attacking possession at each cell eventually yields a goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EPVGrid {
    pub m: usize,
    pub n: usize,
    /// Row-major over `(i, j)`, `i` along the pitch length.
    pub values: Vec<f64>,
}

impl EPVGrid {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Per-cell transition structure of an attacking possession.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PossessionChain {
    pub m: usize,
    pub n: usize,
    /// `[stay, +i, −i, +j, −j]` probabilities per cell.
    pub moves: Vec<[f64; 5]>,
    pub shot: Vec<f64>,
    /// Probability a shot from the cell scores.
    pub score: Vec<f64>,
    pub turnover: Vec<f64>,
}

impl PossessionChain {
    fn neighbour(&self, i: usize, j: usize, slot: usize) -> Option<usize> {
        let (m, n) = (self.m, self.n);
        match slot {
            STAY => Some(i * n + j),
            UP_X if i + 1 < m => Some((i + 1) * n + j),
            DOWN_X if i > 0 => Some((i - 1) * n + j),
            UP_Y if j + 1 < n => Some(i * n + j + 1),
            DOWN_Y if j > 0 => Some(i * n + j - 1),
            _ => None,
        }
    }

    /// Checks non-negativity, no mass off the grid, and `Σ moves + shot + turnover = 1` per cell.
    pub fn validate(&self) -> Result<()> {
        let cells = self.m * self.n;
        if self.m == 0 || self.n == 0 {
            return Err(Error::DimensionMismatch("chain has an empty grid".into()));
        }
        if self.moves.len() != cells || self.shot.len() != cells || self.score.len() != cells || self.turnover.len() != cells {
            return Err(Error::DimensionMismatch(format!("chain arrays must have {cells} entries")));
        }
        for i in 0..self.m {
            for j in 0..self.n {
                let c = i * self.n + j;
                let bad = |reason: &str| Error::NonStochasticChain {
                    i,
                    j,
                    reason: reason.to_string(),
                };
                let mv = &self.moves[c];
                let all = mv.iter().chain([&self.shot[c], &self.score[c], &self.turnover[c]]);
                if all.clone().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(bad("negative or non-finite probability"));
                }
                if self.score[c] > 1.0 {
                    return Err(bad("score-given-shot probability above 1"));
                }
                for slot in 0..5 {
                    if self.neighbour(i, j, slot).is_none() && mv[slot] != 0.0 {
                        return Err(bad("move probability leads off the grid"));
                    }
                }
                let total: f64 = mv.iter().sum::<f64>() + self.shot[c] + self.turnover[c];
                if (total - 1.0).abs() > SIMPLEX_TOL {
                    return Err(bad(&format!("probabilities sum to {total}")));
                }
            }
        }
        Ok(())
    }

    /// One Bellman sweep for row `i`.
    fn sweep_row(&self, v: &[f64], i: usize) -> Vec<f64> {
        (0..self.n)
            .map(|j| {
                let c = i * self.n + j;
                let mut acc = self.shot[c] * self.score[c];
                for slot in 0..5 {
                    let p = self.moves[c][slot];
                    if p != 0.0 {
                        if let Some(d) = self.neighbour(i, j, slot) {
                            acc += p * v[d];
                        }
                    }
                }
                acc
            })
            .collect()
    }
}

/// Constants of the synthetic possession chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DefaultChainParams {
    pub shot_max: f64,
    /// Decay length of shot probability with goal distance, meters.
    pub shot_scale: f64,
    pub turnover: f64,
    pub score_min: f64,
    pub score_max: f64,
    pub score_scale: f64,
}

impl Default for DefaultChainParams {
    fn default() -> Self {
        DefaultChainParams {
            shot_max: 0.9,
            shot_scale: 12.0,
            turnover: 0.04,
            score_min: 0.02,
            score_max: 0.35,
            score_scale: 8.0,
        }
    }
}

/// Synthetic possession chain: shots and conversions grow toward the goal at
/// `x = 0`, ball movement drifts toward goal and the center, turnover is constant.
pub fn default_chain(spec: &PitchSpec) -> PossessionChain {
    default_chain_with(spec, &DefaultChainParams::default())
}

pub fn default_chain_with(spec: &PitchSpec, cp: &DefaultChainParams) -> PossessionChain {
    let (m, n) = (spec.grid_m, spec.grid_n);
    let (cell_x, cell_y) = spec.cell_size();
    let mut chain = PossessionChain {
        m,
        n,
        moves: Vec::with_capacity(m * n),
        shot: Vec::with_capacity(m * n),
        score: Vec::with_capacity(m * n),
        turnover: Vec::with_capacity(m * n),
    };
    for i in 0..m {
        for j in 0..n {
            // Lateral offset in half-cell units keeps mirror cells bit-identical.
            let x = (i as f64 + 0.5) * cell_x;
            let lateral = (2.0 * j as f64 + 1.0 - n as f64).abs() * 0.5 * cell_y;
            let d = x.hypot(lateral);
            // Angle is measured from the nearer post; zero in front of the mouth.
            let off_axis = (lateral - spec.goal_half_width).max(0.0).atan2(x);
            let shot = cp.shot_max * (-d / cp.shot_scale).exp();
            let score = cp.score_min + (cp.score_max - cp.score_min) * (-d / cp.score_scale).exp() * off_axis.cos().powi(2);

            // Lateral drift toward the long axis; mirror cells get mirrored weights.
            let mirror = n - 1 - j;
            let (toward_center_up, toward_center_down) = match j.cmp(&mirror) {
                std::cmp::Ordering::Less => (0.2, 0.1),
                std::cmp::Ordering::Greater => (0.1, 0.2),
                std::cmp::Ordering::Equal => (0.15, 0.15),
            };
            let mut w = [0.2, 0.1, 0.4, toward_center_up, toward_center_down];
            for (slot, wt) in w.iter_mut().enumerate() {
                let valid = match slot {
                    UP_X => i + 1 < m,
                    DOWN_X => i > 0,
                    UP_Y => j + 1 < n,
                    DOWN_Y => j > 0,
                    _ => true,
                };
                if !valid {
                    *wt = 0.0;
                }
            }
            let wsum: f64 = w.iter().sum();
            let move_total = 1.0 - shot - cp.turnover;
            let moves = w.map(|x| x / wsum * move_total);
            chain.moves.push(moves);
            chain.shot.push(shot);
            chain.score.push(score);
            chain.turnover.push(cp.turnover);
        }
    }
    chain
}

/// Chains with fewer cells than this are swept on the calling thread.
pub const PAR_MIN_CELLS: usize = 4096;
const MAX_SWEEPS: usize = 1_000_000;

fn solve_with<F>(chain: &PossessionChain, tol: f64, sweep: F) -> Result<EPVGrid>
where
    F: Fn(&PossessionChain, &[f64]) -> Vec<f64>,
{
    if !(tol > 0.0) {
        return Err(Error::config("tol", "must be positive"));
    }
    chain.validate()?;
    let mut v = vec![0.0; chain.m * chain.n];
    for _ in 0..MAX_SWEEPS {
        let next = sweep(chain, &v);
        let residual = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if residual <= tol {
            return Ok(EPVGrid {
                m: chain.m,
                n: chain.n,
                values: v.into_iter().map(|x| x.clamp(0.0, 1.0)).collect(),
            });
        }
    }
    let residual = {
        let next = sweep(chain, &v);
        next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    Err(Error::NonConvergence {
        iterations: MAX_SWEEPS,
        residual,
    })
}

/// Value iteration from `V = 0` until successive sweeps differ by at most `tol` (sup norm).
pub fn solve_epv_seq(chain: &PossessionChain, tol: f64) -> Result<EPVGrid> {
    solve_with(chain, tol, |c, v| {
        let mut out = Vec::with_capacity(v.len());
        for i in 0..c.m {
            out.extend(c.sweep_row(v, i));
        }
        out
    })
}

/// [`solve_epv_seq`] with each sweep's rows spread over the rayon pool.
#[cfg(feature = "parallel")]
pub fn solve_epv_par(chain: &PossessionChain, tol: f64) -> Result<EPVGrid> {
    solve_with(chain, tol, |c, v| crate::par::map_range(c.m, |i| c.sweep_row(v, i)).concat())
}

pub fn solve_epv(chain: &PossessionChain, tol: f64) -> Result<EPVGrid> {
    #[cfg(feature = "parallel")]
    if chain.m * chain.n >= PAR_MIN_CELLS {
        return solve_epv_par(chain, tol);
    }
    solve_epv_seq(chain, tol)
}

/// Game-state EPV: `Σ_ij EPV_ij · a_ij`, summed row-major.
pub fn game_state_epv(field: &ScalarField, grid: &EPVGrid) -> Result<f64> {
    if field.m() != grid.m || field.n() != grid.n || field.values.len() != grid.values.len() {
        return Err(Error::DimensionMismatch(format!(
            "control field is {}x{}, EPV grid is {}x{}",
            field.m(),
            field.n(),
            grid.m,
            grid.n
        )));
    }
    Ok(field.values.iter().zip(&grid.values).map(|(a, e)| a * e).sum())
}

pub const EPV_FILE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct EpvFile {
    version: u32,
    m: usize,
    n: usize,
    values: Vec<f64>,
}

pub fn save_epv(grid: &EPVGrid, path: &Path) -> Result<()> {
    let file = EpvFile {
        version: EPV_FILE_VERSION,
        m: grid.m,
        n: grid.n,
        values: grid.values.clone(),
    };
    let text = serde_json::to_string(&file).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_epv(path: &Path) -> Result<EPVGrid> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_epv(&text)
}

pub fn parse_epv(text: &str) -> Result<EPVGrid> {
    let file: EpvFile = serde_json::from_str(text).map_err(|e| Error::Format(format!("EPV grid: {e}")))?;
    if file.version != EPV_FILE_VERSION {
        return Err(Error::Format(format!("unsupported EPV grid version {}", file.version)));
    }
    if file.m == 0 || file.n == 0 || file.values.len() != file.m * file.n {
        return Err(Error::Format(format!(
            "EPV grid declares {}x{} but carries {} values",
            file.m,
            file.n,
            file.values.len()
        )));
    }
    if let Some((k, v)) = file.values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Format(format!("EPV value {v} at index {k} outside [0, 1]")));
    }
    Ok(EPVGrid {
        m: file.m,
        n: file.n,
        values: file.values,
    })
}
