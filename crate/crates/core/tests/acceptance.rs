//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Pass criterion numbers to run a subset:
//! `cargo test --release --test acceptance -- 1 5`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use epvshape::epv::*;
use epvshape::geom::Vec2;
use epvshape::par;
use epvshape::pitch_control::*;
use epvshape::sim::{reset, PitchSpec, ScenarioConfig};
use epvshape::trainer::*;
use epvshape::vdn::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn field(m: usize, n: usize, values: Vec<f64>) -> ScalarField {
    let spec = PitchSpec {
        grid_m: m,
        grid_n: n,
        ..PitchSpec::default()
    };
    ScalarField {
        spec,
        values,
        step_index: 0,
    }
}

fn game_state_epv_contraction() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (m, n) = (rng.gen_range(1..=64), rng.gen_range(1..=64));
        let a: Vec<f64> = (0..m * n).map(|_| rng.gen()).collect();
        let e: Vec<f64> = (0..m * n).map(|_| rng.gen()).collect();
        let got = game_state_epv(&field(m, n, a.clone()), &EPVGrid { m, n, values: e.clone() }).map_err(|e| e.to_string())?;
        worst = worst.max(rel_err(got, brute_force_epv(&a, &e, m, n)));
    }
    ensure(worst <= 1e-12, || format!("worst relative error {worst:e}"))?;

    let grid = EPVGrid {
        m: 2,
        n: 2,
        values: vec![0.1, 0.2, 0.3, 0.4],
    };
    let total = 0.1 + 0.2 + 0.3 + 0.4;
    let e = |values| game_state_epv(&field(2, 2, values), &grid).unwrap();
    ensure(e(vec![1.0; 4]) == total, || "unit field".into())?;
    ensure(e(vec![0.0; 4]) == 0.0, || "zero field".into())?;
    ensure(e(vec![1.0, 0.0, 0.0, 0.5]) == 0.1 * 1.0 + 0.4 * 0.5, || "2x2 example".into())?;
    Ok(format!("100 random pairs, worst relative error {worst:e}"))
}

fn pass_model_mle() -> Result<String, String> {
    let truth = PassModelParams { sigma: 0.45, lambda: 0.2 };
    let events = synthetic_pass_events(&truth, 10_000, 2024);
    let fit = fit_pass_model(&events, PassModelParams::default(), 1e-10).map_err(|e| e.to_string())?;
    let ds = (fit.sigma - truth.sigma).abs() / truth.sigma;
    let dl = (fit.lambda - truth.lambda).abs() / truth.lambda;
    ensure(ds <= 0.1 && dl <= 0.1, || format!("fit {fit:?}"))?;

    let h = 1e-5;
    let mut worst = 0.0f64;
    for p in [truth, fit, PassModelParams { sigma: 1.3, lambda: -0.6 }, PassModelParams { sigma: 0.2, lambda: 0.5 }] {
        let g = log_likelihood_gradient(&p, &events);
        let fd = [
            (log_likelihood(&PassModelParams { sigma: p.sigma + h, ..p }, &events)
                - log_likelihood(&PassModelParams { sigma: p.sigma - h, ..p }, &events))
                / (2.0 * h),
            (log_likelihood(&PassModelParams { lambda: p.lambda + h, ..p }, &events)
                - log_likelihood(&PassModelParams { lambda: p.lambda - h, ..p }, &events))
                / (2.0 * h),
        ];
        for k in 0..2 {
            worst = worst.max((g[k] - fd[k]).abs() / fd[k].abs().max(1.0));
        }
    }
    ensure(worst <= 1e-6, || format!("gradient mismatch {worst:e}"))?;
    Ok(format!(
        "sigma {:.4} ({:.1}%), lambda {:.4} ({:.1}%), gradient error {worst:.1e}",
        fit.sigma,
        100.0 * ds,
        fit.lambda,
        100.0 * dl
    ))
}

fn epv_solver() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_direct = 0.0f64;
    for _ in 0..50 {
        let chain = random_chain(4, 4, &mut rng);
        let grid = solve_epv(&chain, 1e-13).map_err(|e| e.to_string())?;
        for (a, b) in grid.values.iter().zip(direct_solve(&chain)) {
            worst_direct = worst_direct.max((a - b).abs());
        }
    }
    ensure(worst_direct <= 1e-8, || format!("direct solve gap {worst_direct:e}"))?;

    let chain = random_chain(3, 3, &mut rng);
    let grid = solve_epv(&chain, 1e-12).map_err(|e| e.to_string())?;
    let mc = monte_carlo(&chain, 1_000_000, &mut rng);
    let worst_mc = grid.values.iter().zip(&mc).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(worst_mc <= 1e-2, || format!("Monte Carlo gap {worst_mc}"))?;
    Ok(format!("direct gap {worst_direct:.1e} on 50 chains, Monte Carlo gap {worst_mc:.1e}"))
}

fn control_field() -> Result<String, String> {
    let params = PassModelParams::default();
    for seed in 0..50 {
        for sc in [ScenarioConfig::default(), ScenarioConfig::full_scale()] {
            let st = reset(&sc, seed).unwrap();
            let f = compute_control_field(&st, &sc.pitch, &params);
            let comp = f.defending_values();
            for (a, d) in f.values.iter().zip(&comp) {
                ensure((0.0..=1.0).contains(a), || format!("value {a} outside [0,1]"))?;
                ensure(*a + *d == 1.0 && *d == 1.0 - *a, || "complement".into())?;
            }
        }
    }

    let cell = Vec2::new(60.0, 34.0);
    let mut st = one_v_one(cell + Vec2::new(-5.0, -5.0), Vec2::new(0.0, 34.0), cell + Vec2::new(5.0, 5.0));
    let (speed, reaction) = (st.players[0].max_speed, st.players[0].reaction_time);
    for p in st.players.iter_mut() {
        p.max_speed = speed;
        p.reaction_time = reaction;
    }
    let sym = control_at(&st, &params, cell);
    ensure((sym - 0.5).abs() <= 1e-12, || format!("symmetric value {sym}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut pt = || Vec2::new(rng.gen_range(0.0..105.0), rng.gen_range(0.0..68.0));
    for _ in 0..1000 {
        let (def, att, target) = (pt(), pt(), pt());
        let frac = pt().x / 105.0;
        let keeper = Vec2::new(0.0, 34.0);
        let before = control_at(&one_v_one(def, keeper, att), &params, target);
        let after = control_at(&one_v_one(def, keeper, att + (target - att) * frac.max(1e-3)), &params, target);
        ensure(after >= before, || format!("approach lowered control {before} -> {after}"))?;
    }
    Ok(format!("range and complement on 100 fields, symmetric value {sym}, 1000 approach configurations"))
}

fn vdn_structure() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let q: Vec<f64> = (0..rng.gen_range(1..6)).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let manual = q.iter().fold(0.0, |acc, x| acc + x);
        ensure(joint_q(&q) == manual, || "joint value is not the sum".into())?;
    }

    let mut instances = 0;
    for agents in 1..=3usize {
        for actions in 1..=4usize {
            for _ in 0..200 {
                let tables: Vec<Vec<f64>> = (0..agents)
                    .map(|_| (0..actions).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect();
                let decomposed: Vec<usize> = tables.iter().map(|t| argmax(t)).collect();
                let mut best = (f64::NEG_INFINITY, vec![]);
                for code in 0..actions.pow(agents as u32) {
                    let joint: Vec<usize> = (0..agents).map(|k| code / actions.pow(k as u32) % actions).collect();
                    let v = joint_q(&joint.iter().zip(&tables).map(|(&a, t)| t[a]).collect::<Vec<_>>());
                    if v > best.0 {
                        best = (v, joint);
                    }
                }
                ensure(decomposed == best.1, || format!("argmax mismatch on {tables:?}"))?;
                instances += 1;
            }
        }
    }

    let learner = VdnLearner::new(3, 5, &[8, 6], 4, &mut rng).unwrap();
    let target = VdnLearner::new(3, 5, &[8, 6], 4, &mut rng).unwrap().online;
    let batch: Vec<Transition> = (0..6)
        .map(|b| Transition {
            obs: (0..3).map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
            actions: (0..3).map(|_| rng.gen_range(0..4)).collect(),
            reward: rng.gen_range(-1.0..1.0),
            next_obs: (0..3).map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
            terminal: b % 3 == 0,
        })
        .collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    let grads = td_loss_and_gradients(&learner.online, &target, &refs, 0.95).unwrap().grads;
    let h = 1e-6;
    let mut worst = 0.0f64;
    for k in 0..3 {
        for p in 0..learner.online[k].params().len() {
            let mut plus = learner.online.clone();
            plus[k].params_mut()[p] += h;
            let mut minus = learner.online.clone();
            minus[k].params_mut()[p] -= h;
            let fd = (td_loss_and_gradients(&plus, &target, &refs, 0.95).unwrap().loss
                - td_loss_and_gradients(&minus, &target, &refs, 0.95).unwrap().loss)
                / (2.0 * h);
            let g = grads[k][p];
            if g.abs().max(fd.abs()) > 1e-7 {
                worst = worst.max(rel_err(g, fd));
            }
        }
    }
    ensure(worst <= 1e-4, || format!("gradient relative error {worst:e}"))?;
    Ok(format!("{instances} argmax instances, gradient relative error {worst:.1e}"))
}

fn matrix_game() -> Result<String, String> {
    let payoff = [[0.0, 0.6, 0.2], [0.5, 0.1, 0.9]];
    let optimum = vec![1, 2];
    let mut worst_updates = 0;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut learner = VdnLearner::new(2, 1, &[16], 3, &mut rng).unwrap();
        let config = TrainConfig {
            learning_rate: 0.02,
            batch_size: 32,
            ..TrainConfig::default()
        };
        let mut buffer = ReplayBuffer::new(1000);
        let mut converged = None;
        for update in 1..=5000 {
            let obs = vec![vec![1.0]; 2];
            let actions = learner.select_actions(&obs, 1.0, &mut rng).unwrap();
            let reward = payoff[0][actions[0]] + payoff[1][actions[1]];
            buffer.push(Transition {
                obs: obs.clone(),
                actions,
                reward,
                next_obs: obs,
                terminal: true,
            });
            if buffer.len() < config.batch_size {
                continue;
            }
            let batch = buffer.sample(config.batch_size, &mut rng).unwrap();
            learner.td_update(&batch, &config).unwrap();
            let greedy = learner.select_actions(&[vec![1.0], vec![1.0]], 0.0, &mut rng).unwrap();
            match (greedy == optimum, converged) {
                (true, None) => converged = Some(update),
                (false, _) => converged = None,
                _ => {}
            }
        }
        let at = converged.ok_or_else(|| format!("seed {seed} did not settle on {optimum:?}"))?;
        worst_updates = worst_updates.max(at);
    }
    Ok(format!("all 5 seeds settled on the optimum, latest after {worst_updates} updates"))
}

fn desk_config(weight: f64) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.seeds = vec![1, 2, 3];
    c.eval_every = 50_000;
    c.reward.shaping_weight = weight;
    c
}

fn shaping_direction() -> Result<String, String> {
    let shaped = desk_config(ExperimentConfig::default().reward.shaping_weight);
    let baseline = desk_config(0.0);
    if shaped.train.total_steps != 200_000 || shaped.eval_episodes != 32 || shaped.scenario.n_defenders != 2 || shaped.scenario.n_attackers != 3 {
        return Err("desk defaults changed".into());
    }
    let grid = build_epv_grid(&shaped).map_err(|e| e.to_string())?;
    let jobs: Vec<(bool, u64)> = [true, false].iter().flat_map(|&s| shaped.seeds.iter().map(move |&seed| (s, seed))).collect();
    let runs = par::map_slice(&jobs, |&(is_shaped, seed)| {
        let config = if is_shaped { &shaped } else { &baseline };
        train_seed(config, seed, &grid, None).map_err(|e| e.to_string())
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let (s_runs, b_runs) = runs.split_at(3);
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for d in shaped.final_difficulties() {
        let gd = |rs: &[SeedRun]| rs.iter().map(|r| r.final_eval(d).unwrap().mean_goal_difference).collect::<Vec<_>>();
        let (s, b) = (gd(s_runs), gd(b_runs));
        let (sm, bm) = (s.iter().sum::<f64>() / 3.0, b.iter().sum::<f64>() / 3.0);
        let wins = s.iter().zip(&b).filter(|(x, y)| x >= y).count();
        lines.push(format!("d={d}: shaped {sm:.3} {s:?} vs baseline {bm:.3} {b:?}, {wins}/3 paired"));
        let ok = if d == shaped.scenario.difficulty { wins >= 2 } else { sm >= bm };
        if !ok {
            failures.push(d);
        }
    }
    let summary = lines.join("; ");
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("ordering broken at {failures:?}: {summary}"))
    }
}

fn reproducibility() -> Result<String, String> {
    let mut config = ExperimentConfig::default();
    config.seeds = vec![7];
    config.train.total_steps = 20_000;
    config.eval_every = 5000;
    config.eval_episodes = 8;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut logs = Vec::new();
    for out in [a.path(), b.path()] {
        let reports = run_training(&config, out, Some(1)).map_err(|e| e.to_string())?;
        reports[0].result.as_ref().map_err(|e| e.clone())?;
        logs.push(std::fs::read(reports[0].run_dir.join("metrics.jsonl")).map_err(|e| e.to_string())?);
    }
    ensure(!logs[0].is_empty() && logs[0] == logs[1], || "metrics logs differ".into())?;
    Ok(format!("{} identical bytes", logs[0].len()))
}

fn round_trips() -> Result<String, String> {
    let dir = tempfile::tempdir().unwrap();
    let grid = solve_epv(&default_chain(&PitchSpec::default()), EPV_TOL).unwrap();
    let epv_path = dir.path().join("epv.json");
    save_epv(&grid, &epv_path).map_err(|e| e.to_string())?;
    let loaded = load_epv(&epv_path).map_err(|e| e.to_string())?;
    ensure(
        loaded.values.iter().zip(&grid.values).all(|(a, b)| a.to_bits() == b.to_bits()) && loaded == grid,
        || "EPV grid changed on reload".into(),
    )?;

    let mut config = ExperimentConfig::default();
    config.seeds = vec![11];
    config.train.total_steps = 5000;
    config.eval_every = 5000;
    let reports = run_training(&config, dir.path(), Some(1)).map_err(|e| e.to_string())?;
    let run = reports[0].result.as_ref().map_err(|e| e.clone())?;
    let ck = Checkpoint::load(&reports[0].run_dir.join("final.json")).map_err(|e| e.to_string())?;
    let nets = ck.networks().map_err(|e| e.to_string())?;
    ensure(nets.len() == run.networks.len(), || "agent count".into())?;
    for (a, b) in nets.iter().zip(&run.networks) {
        ensure(
            a.layer_shapes() == b.layer_shapes() && a.params().iter().zip(b.params()).all(|(x, y)| x.to_bits() == y.to_bits()),
            || "checkpoint parameters changed on reload".into(),
        )?;
    }
    let mut episodes = 0;
    for d in config.final_difficulties() {
        let replay = evaluate(&ck, None, d, config.eval_episodes, None).map_err(|e| e.to_string())?;
        let original = run.final_eval(d).unwrap();
        ensure(replay.records == original.records, || format!("evaluation at {d} diverged"))?;
        episodes += replay.records.len();
    }
    Ok(format!("EPV grid and checkpoint bit-exact, {episodes} evaluation episodes replayed"))
}

const CRITERIA: [(&str, Check, Duration); 9] = [
    ("game-state EPV contraction", game_state_epv_contraction, Duration::from_secs(1)),
    ("pass-model MLE", pass_model_mle, Duration::from_secs(10)),
    ("EPV solver", epv_solver, Duration::from_secs(60)),
    ("pitch-control field", control_field, Duration::from_secs(5)),
    ("VDN structure", vdn_structure, Duration::from_secs(30)),
    ("learning sanity", matrix_game, Duration::from_secs(60)),
    ("shaping direction at desk scale", shaping_direction, Duration::from_secs(30 * 60)),
    ("reproducibility", reproducibility, Duration::from_secs(180)),
    ("round trips", round_trips, Duration::from_secs(600)),
];

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (k, (name, check, budget)) in CRITERIA.iter().enumerate() {
        let id = k + 1;
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|msg| {
            if elapsed <= *budget {
                Ok(msg)
            } else {
                Err(format!("{msg}; took {:.1}s, budget {}s", elapsed.as_secs_f64(), budget.as_secs()))
            }
        });
        match outcome {
            Ok(msg) => println!("criterion {id} PASS [{name}] ({:.2}s) {msg}", elapsed.as_secs_f64()),
            Err(msg) => {
                failed += 1;
                println!("criterion {id} FAIL [{name}] ({:.2}s) {msg}", elapsed.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
