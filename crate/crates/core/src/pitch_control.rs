//! Pitch control: a logistic pass-success model over arrival-time advantage,
//! its maximum-likelihood fit, and the team-control scalar field.
//!
//! A pass to a point succeeds with probability `p(x) = logistic((x − λ)/σ)`
//! where `x` is how much earlier the attacking team can reach the point than
//! the defending team. Evaluating `p` at every grid cell gives the attacking
//! team's control field; the defending field is its complement.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::sim::{GameState, PitchSpec, PlayerState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassModelParams {
    /// Logistic temperature, seconds.
    pub sigma: f64,
    /// Logistic offset, seconds.
    pub lambda: f64,
}

impl Default for PassModelParams {
    fn default() -> Self {
        PassModelParams {
            sigma: 0.45,
            lambda: 0.0,
        }
    }
}

impl PassModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::config("pass_model.sigma", "must be positive and finite"));
        }
        if !self.lambda.is_finite() {
            return Err(Error::config("pass_model.lambda", "must be finite"));
        }
        Ok(())
    }
}

/// One observed pass: the receiver's arrival-time advantage `x` and whether it succeeded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassEvent {
    pub x: f64,
    pub k: u8,
}

/// Attacking-team control probability per grid cell, row-major over `(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub spec: PitchSpec,
    pub values: Vec<f64>,
    pub step_index: u64,
}

impl ScalarField {
    pub fn m(&self) -> usize {
        self.spec.grid_m
    }

    pub fn n(&self) -> usize {
        self.spec.grid_n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.spec.grid_n + j]
    }

    /// Defending-team control at `(i, j)`.
    pub fn defending(&self, i: usize, j: usize) -> f64 {
        1.0 - self.get(i, j)
    }

    pub fn defending_values(&self) -> Vec<f64> {
        self.values.iter().map(|a| 1.0 - a).collect()
    }
}

const P_MIN: f64 = f64::MIN_POSITIVE;
const P_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Probability that a pass with arrival-time advantage `x` succeeds. Kept
/// strictly inside (0, 1) even where the logistic saturates in f64.
pub fn pass_success_probability(params: &PassModelParams, x: f64) -> f64 {
    logistic((x - params.lambda) / params.sigma).clamp(P_MIN, P_MAX)
}

/// Mean Bernoulli log-likelihood of the events.
pub fn log_likelihood(params: &PassModelParams, events: &[PassEvent]) -> f64 {
    let sum: f64 = events
        .iter()
        .map(|e| {
            let z = (e.x - params.lambda) / params.sigma;
            if e.k == 1 {
                -softplus(-z)
            } else {
                -softplus(z)
            }
        })
        .sum();
    sum / events.len() as f64
}

/// Gradient of [`log_likelihood`] with respect to `(sigma, lambda)`.
pub fn log_likelihood_gradient(params: &PassModelParams, events: &[PassEvent]) -> [f64; 2] {
    let (s, l) = (params.sigma, params.lambda);
    let mut g = [0.0; 2];
    for e in events {
        let z = (e.x - l) / s;
        let resid = e.k as f64 - logistic(z);
        g[0] -= resid * (e.x - l) / (s * s);
        g[1] -= resid / s;
    }
    let n = events.len() as f64;
    [g[0] / n, g[1] / n]
}

const FIT_MAX_ITERATIONS: usize = 500;

/// Maximum-likelihood `(σ, λ)` by damped Newton ascent.
///
/// The model is linear in `(1/σ, −λ/σ)`, where the log-likelihood is
/// concave, so steps are taken in that space with backtracking and mapped
/// back. Stops once the `(σ, λ)` gradient norm is at most `tol`.
pub fn fit_pass_model(events: &[PassEvent], init: PassModelParams, tol: f64) -> Result<PassModelParams> {
    init.validate()?;
    if events.is_empty() {
        return Err(Error::InsufficientData("no pass events".into()));
    }
    if let Some(e) = events.iter().find(|e| e.k > 1 || !e.x.is_finite()) {
        return Err(Error::Format(format!("invalid pass event x={} k={}", e.x, e.k)));
    }
    let max_fail = events.iter().filter(|e| e.k == 0).map(|e| e.x).fold(f64::NEG_INFINITY, f64::max);
    let min_success = events.iter().filter(|e| e.k == 1).map(|e| e.x).fold(f64::INFINITY, f64::min);
    if max_fail == f64::NEG_INFINITY || min_success == f64::INFINITY {
        return Err(Error::InsufficientData("events contain a single outcome class".into()));
    }
    if max_fail < min_success {
        return Err(Error::InsufficientData(
            "outcomes are perfectly separated by x; the likelihood has no interior maximum".into(),
        ));
    }

    let n = events.len() as f64;
    let to_params = |a: f64, b: f64| PassModelParams {
        sigma: 1.0 / a,
        lambda: -b / a,
    };
    let mut a = 1.0 / init.sigma;
    let mut b = -init.lambda / init.sigma;
    let mut ll = log_likelihood(&init, events);

    for _ in 0..FIT_MAX_ITERATIONS {
        let params = to_params(a, b);
        let g = log_likelihood_gradient(&params, events);
        if g[0].hypot(g[1]) <= tol {
            return Ok(params);
        }

        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for e in events {
            let p = logistic(a * e.x + b);
            let r = e.k as f64 - p;
            let w = p * (1.0 - p);
            ga += r * e.x;
            gb += r;
            haa += w * e.x * e.x;
            hab += w * e.x;
            hbb += w;
        }
        let (ga, gb, haa, hab, hbb) = (ga / n, gb / n, haa / n, hab / n, hbb / n);
        let det = haa * hbb - hab * hab;
        let (mut da, mut db) = if det > 1e-300 {
            ((hbb * ga - hab * gb) / det, (haa * gb - hab * ga) / det)
        } else {
            (ga, gb)
        };

        let mut accepted = false;
        for _ in 0..60 {
            let (na, nb) = (a + da, b + db);
            if na > 0.0 && na.is_finite() && nb.is_finite() {
                let cand = log_likelihood(&to_params(na, nb), events);
                if cand >= ll {
                    a = na;
                    b = nb;
                    ll = cand;
                    accepted = true;
                    break;
                }
            }
            da *= 0.5;
            db *= 0.5;
        }
        if !accepted {
            let params = to_params(a, b);
            let g = log_likelihood_gradient(&params, events);
            let residual = g[0].hypot(g[1]);
            if residual <= tol {
                return Ok(params);
            }
            return Err(Error::NonConvergence {
                iterations: FIT_MAX_ITERATIONS,
                residual,
            });
        }
    }
    let params = to_params(a, b);
    let g = log_likelihood_gradient(&params, events);
    let residual = g[0].hypot(g[1]);
    if residual <= tol {
        Ok(params)
    } else {
        Err(Error::NonConvergence {
            iterations: FIT_MAX_ITERATIONS,
            residual,
        })
    }
}

/// Draws `n` pass events whose outcomes follow `params`. Features are
/// `N(0, 0.75²)` seconds.
pub fn synthetic_pass_events(params: &PassModelParams, n: usize, seed: u64) -> Vec<PassEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let feature = Normal::new(0.0, 0.75).expect("valid normal");
    (0..n)
        .map(|_| {
            let x = feature.sample(&mut rng);
            let k = (rng.gen::<f64>() < pass_success_probability(params, x)) as u8;
            PassEvent { x, k }
        })
        .collect()
}

/// Reads a CSV with header `x,k`.
pub fn read_pass_events(path: &Path) -> Result<Vec<PassEvent>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let headers = reader.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "k" {
        return Err(Error::Format(format!("{}: expected header `x,k`", path.display())));
    }
    let mut events = Vec::new();
    for (line, record) in reader.deserialize::<PassEvent>().enumerate() {
        let e = record.map_err(|e| Error::Format(format!("{} row {}: {e}", path.display(), line + 1)))?;
        if e.k > 1 || !e.x.is_finite() {
            return Err(Error::Format(format!("{} row {}: k must be 0 or 1 and x finite", path.display(), line + 1)));
        }
        events.push(e);
    }
    Ok(events)
}

pub fn write_pass_events(events: &[PassEvent], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "x,k").map_err(|e| Error::io(path, e))?;
    for e in events {
        writeln!(w, "{},{}", e.x, e.k).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Time for `player` to reach `target`: reaction time plus straight-line run at top speed.
pub fn arrival_time(player: &PlayerState, target: Vec2) -> f64 {
    player.reaction_time + player.position.distance(target) / player.max_speed
}

/// Grids with fewer cells than this are always computed on the calling thread.
pub const PAR_MIN_CELLS: usize = 4096;

#[derive(Clone, Copy)]
struct Runner {
    position: Vec2,
    reaction: f64,
    inv_speed: f64,
}

impl Runner {
    fn time(&self, c: Vec2) -> f64 {
        self.reaction + self.position.distance(c) * self.inv_speed
    }
}

struct Teams {
    defending: Vec<Runner>,
    attacking: Vec<Runner>,
}

impl Teams {
    fn of(state: &GameState) -> Self {
        let r = |p: &PlayerState| Runner {
            position: p.position,
            reaction: p.reaction_time,
            inv_speed: 1.0 / p.max_speed,
        };
        Teams {
            defending: state.defending_team().iter().map(r).collect(),
            attacking: state.attackers().iter().map(r).collect(),
        }
    }

    fn control(&self, params: &PassModelParams, c: Vec2) -> f64 {
        let t_def = self.defending.iter().map(|p| p.time(c)).fold(f64::INFINITY, f64::min);
        let t_att = self.attacking.iter().map(|p| p.time(c)).fold(f64::INFINITY, f64::min);
        pass_success_probability(params, t_def - t_att)
    }

    fn row(&self, spec: &PitchSpec, params: &PassModelParams, i: usize) -> Vec<f64> {
        (0..spec.grid_n)
            .map(|j| self.control(params, spec.cell_center(i, j)))
            .collect()
    }
}

/// Attacking-team control at an arbitrary point.
pub fn control_at(state: &GameState, params: &PassModelParams, point: Vec2) -> f64 {
    Teams::of(state).control(params, point)
}

/// Attacking-team control at every cell center, computed on the calling thread.
pub fn compute_control_field_seq(state: &GameState, spec: &PitchSpec, params: &PassModelParams) -> ScalarField {
    let teams = Teams::of(state);
    let mut values = Vec::with_capacity(spec.grid_m * spec.grid_n);
    for i in 0..spec.grid_m {
        values.extend(teams.row(spec, params, i));
    }
    ScalarField {
        spec: *spec,
        values,
        step_index: state.step_index,
    }
}

/// Same as [`compute_control_field_seq`], with rows spread over the rayon pool.
#[cfg(feature = "parallel")]
pub fn compute_control_field_par(state: &GameState, spec: &PitchSpec, params: &PassModelParams) -> ScalarField {
    let teams = Teams::of(state);
    let rows = crate::par::map_range(spec.grid_m, |i| teams.row(spec, params, i));
    ScalarField {
        spec: *spec,
        values: rows.concat(),
        step_index: state.step_index,
    }
}

/// Attacking-team control field `a(c) = p(t_def(c) − t_att(c))` over the grid.
pub fn compute_control_field(state: &GameState, spec: &PitchSpec, params: &PassModelParams) -> ScalarField {
    #[cfg(feature = "parallel")]
    if spec.grid_m * spec.grid_n >= PAR_MIN_CELLS {
        return compute_control_field_par(state, spec, params);
    }
    compute_control_field_seq(state, spec, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{reset, ScenarioConfig};

    fn params() -> PassModelParams {
        PassModelParams::default()
    }

    #[test]
    fn midpoint_is_half() {
        let p = PassModelParams { sigma: 0.3, lambda: 0.7 };
        assert_eq!(pass_success_probability(&p, 0.7), 0.5);
    }

    #[test]
    fn limits_stay_inside_open_interval() {
        let p = params();
        let hi = pass_success_probability(&p, 1e6);
        let lo = pass_success_probability(&p, -1e6);
        assert!(hi < 1.0 && hi > 0.999_999);
        assert!(lo > 0.0 && lo < 1e-6);
    }

    #[test]
    fn closed_form_value() {
        let p = PassModelParams { sigma: 0.45, lambda: 0.0 };
        let expected = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((pass_success_probability(&p, 0.9) - expected).abs() < 1e-15);
        assert!((expected - 0.88080).abs() < 1e-5);
    }

    #[test]
    fn arrival_time_examples() {
        let st = reset(&ScenarioConfig::default(), 1).unwrap();
        let mut p = st.players[0];
        p.position = Vec2::new(10.0, 10.0);
        p.reaction_time = 0.5;
        p.max_speed = 8.0;
        assert_eq!(arrival_time(&p, p.position), 0.5);
        assert!((arrival_time(&p, Vec2::new(18.0, 10.0)) - 1.5).abs() < 1e-12);
        assert!((arrival_time(&p, Vec2::new(10.0, 30.0)) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_empty_and_single_class() {
        assert!(matches!(
            fit_pass_model(&[], params(), 1e-8),
            Err(Error::InsufficientData(_))
        ));
        let all_success: Vec<_> = (0..10).map(|i| PassEvent { x: i as f64 * 0.1, k: 1 }).collect();
        assert!(matches!(
            fit_pass_model(&all_success, params(), 1e-8),
            Err(Error::InsufficientData(_))
        ));
        let separated = vec![PassEvent { x: -1.0, k: 0 }, PassEvent { x: 1.0, k: 1 }];
        assert!(matches!(
            fit_pass_model(&separated, params(), 1e-8),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn fit_improves_likelihood_and_is_stationary() {
        let truth = PassModelParams { sigma: 0.6, lambda: -0.3 };
        let events = synthetic_pass_events(&truth, 2_000, 11);
        let init = PassModelParams { sigma: 2.0, lambda: 1.0 };
        let fit = fit_pass_model(&events, init, 1e-10).unwrap();
        assert!(log_likelihood(&fit, &events) >= log_likelihood(&init, &events));
        let g = log_likelihood_gradient(&fit, &events);
        assert!(g[0].hypot(g[1]) <= 1e-10);
    }

    #[test]
    fn defender_on_cell_dominates() {
        let mut st = reset(&ScenarioConfig::default(), 3).unwrap();
        let spec = st.scenario.pitch;
        let cell = spec.cell_center(10, 10);
        for p in st.players.iter_mut() {
            p.position = match p.team {
                crate::sim::Team::Defending => cell,
                crate::sim::Team::Attacking => cell + Vec2::new(40.0, 0.0),
            };
        }
        let f = compute_control_field_seq(&st, &spec, &params());
        assert!(f.get(10, 10) < 0.01);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.csv");
        let events = synthetic_pass_events(&params(), 50, 5);
        write_pass_events(&events, &path).unwrap();
        assert_eq!(read_pass_events(&path).unwrap(), events);
    }

    #[test]
    fn csv_rejects_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b\n1,0\n").unwrap();
        assert!(matches!(read_pass_events(&path), Err(Error::Format(_))));
    }
}
