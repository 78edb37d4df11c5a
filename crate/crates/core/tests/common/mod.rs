//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use epvshape::epv::PossessionChain;
use epvshape::geom::Vec2;
use epvshape::sim::{reset, GameState, ScenarioConfig, Team};
use rand::Rng;

/// Offsets for the `[stay, +i, −i, +j, −j]` move slots.
pub const OFFSETS: [(i64, i64); 5] = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)];

fn target(m: usize, n: usize, cell: usize, slot: usize) -> Option<usize> {
    let (i, j) = ((cell / n) as i64, (cell % n) as i64);
    let (di, dj) = OFFSETS[slot];
    let (a, b) = (i + di, j + dj);
    (a >= 0 && b >= 0 && (a as usize) < m && (b as usize) < n).then(|| a as usize * n + b as usize)
}

/// Random chain satisfying the simplex constraint, with no mass leaving the grid.
pub fn random_chain<R: Rng>(m: usize, n: usize, rng: &mut R) -> PossessionChain {
    let cells = m * n;
    let mut chain = PossessionChain {
        m,
        n,
        moves: Vec::with_capacity(cells),
        shot: Vec::with_capacity(cells),
        score: Vec::with_capacity(cells),
        turnover: Vec::with_capacity(cells),
    };
    for c in 0..cells {
        let s = rng.gen_range(0.05..0.5);
        let u = rng.gen_range(0.0..0.3);
        let mut w = [0.0; 5];
        for (slot, x) in w.iter_mut().enumerate() {
            if target(m, n, c, slot).is_some() {
                *x = rng.gen_range(0.0..1.0);
            }
        }
        let total: f64 = w.iter().sum();
        let left = 1.0 - s - u;
        for x in w.iter_mut() {
            *x *= left / total;
        }
        chain.moves.push(w);
        chain.shot.push(s);
        chain.score.push(rng.gen_range(0.0..1.0));
        chain.turnover.push(u);
    }
    chain
}

/// Solves `(I − M) V = s∘q` by Gaussian elimination with partial pivoting.
pub fn direct_solve(chain: &PossessionChain) -> Vec<f64> {
    let k = chain.m * chain.n;
    let mut a = vec![vec![0.0; k + 1]; k];
    for c in 0..k {
        a[c][c] += 1.0;
        for slot in 0..5 {
            if let Some(t) = target(chain.m, chain.n, c, slot) {
                a[c][t] -= chain.moves[c][slot];
            }
        }
        a[c][k] = chain.shot[c] * chain.score[c];
    }
    for col in 0..k {
        let pivot = (col..k).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, pivot);
        for row in 0..k {
            if row != col {
                let f = a[row][col] / a[col][col];
                for x in col..=k {
                    a[row][x] -= f * a[col][x];
                }
            }
        }
    }
    (0..k).map(|c| a[c][k] / a[c][c]).collect()
}

/// Fraction of `rollouts` possessions starting in each cell that end in a goal.
pub fn monte_carlo<R: Rng>(chain: &PossessionChain, rollouts: usize, rng: &mut R) -> Vec<f64> {
    let k = chain.m * chain.n;
    (0..k)
        .map(|start| {
            let mut goals = 0usize;
            for _ in 0..rollouts {
                let mut c = start;
                loop {
                    let r: f64 = rng.gen();
                    if r < chain.shot[c] {
                        if rng.gen::<f64>() < chain.score[c] {
                            goals += 1;
                        }
                        break;
                    }
                    let mut acc = chain.shot[c] + chain.turnover[c];
                    if r < acc {
                        break;
                    }
                    let mut next = c;
                    for slot in 0..5 {
                        acc += chain.moves[c][slot];
                        if r < acc {
                            next = target(chain.m, chain.n, c, slot).unwrap();
                            break;
                        }
                    }
                    c = next;
                }
            }
            goals as f64 / rollouts as f64
        })
        .collect()
}

/// Double loop over `(i, j)` with explicit indexing.
pub fn brute_force_epv(field: &[f64], grid: &[f64], m: usize, n: usize) -> f64 {
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..n {
            total += grid[i * n + j] * field[i * n + j];
        }
    }
    total
}

/// One defender, the keeper and one attacker at the given spots.
pub fn one_v_one(defender: Vec2, keeper: Vec2, attacker: Vec2) -> GameState {
    let sc = ScenarioConfig {
        n_defenders: 1,
        n_attackers: 1,
        ..Default::default()
    };
    let mut st = reset(&sc, 0).unwrap();
    let keeper_id = sc.keeper_id();
    for (k, p) in st.players.iter_mut().enumerate() {
        p.velocity = Vec2::ZERO;
        p.position = match p.team {
            Team::Attacking => attacker,
            Team::Defending if k == keeper_id => keeper,
            Team::Defending => defender,
        };
    }
    st
}
