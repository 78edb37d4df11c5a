use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn bias_net(biases: &[f64]) -> QNetwork {
    let n = biases.len();
    let mut params = vec![0.0; n];
    params.extend_from_slice(biases);
    QNetwork::from_parts(vec![1, n], params).unwrap()
}

fn transition(n_agents: usize, obs_len: usize, reward: f64, terminal: bool, rng: &mut ChaCha8Rng, n_actions: usize) -> Transition {
    let mut obs = || (0..n_agents).map(|_| (0..obs_len).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect::<Vec<Vec<f64>>>();
    let o = obs();
    let next = obs();
    Transition {
        obs: o,
        actions: (0..n_agents).map(|k| (k * 3 + 1) % n_actions).collect(),
        reward,
        next_obs: next,
        terminal,
    }
}

#[test]
fn joint_q_is_a_sum() {
    assert_eq!(joint_q(&[1.0, 2.0, -0.5]), 2.5);
    assert_eq!(joint_q(&[]), 0.0);
}

#[test]
fn argmax_breaks_ties_low() {
    assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
    assert_eq!(argmax(&[0.0; 5]), 0);
    assert_eq!(argmax(&[-2.0, -1.0]), 1);
}

#[test]
fn greedy_selection_draws_nothing() {
    let nets = vec![bias_net(&[0.0, 0.5, 0.2]), bias_net(&[0.9, 0.1, 0.9])];
    let obs = vec![vec![0.3], vec![-0.3]];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let before = rng.clone();
    assert_eq!(select_actions(&nets, &obs, 0.0, &mut rng).unwrap(), vec![1, 0]);
    assert_eq!(rng, before);
    assert!(select_actions(&nets, &obs[..1], 0.0, &mut rng).is_err());
}

#[test]
fn full_exploration_is_uniform() {
    let nets = vec![bias_net(&[0.0; 10])];
    let obs = vec![vec![0.0]];
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 100_000;
    let mut counts = [0usize; 10];
    for _ in 0..n {
        counts[select_actions(&nets, &obs, 1.0, &mut rng).unwrap()[0]] += 1;
    }
    let p = 0.1;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    for c in counts {
        assert!((c as f64 - n as f64 * p).abs() <= 3.0 * sigma, "{counts:?}");
    }
}

#[test]
fn td_target_cases() {
    let target = vec![bias_net(&[0.4, 0.1]), bias_net(&[-1.0, 0.6])];
    let base = Transition {
        obs: vec![vec![0.0], vec![0.0]],
        actions: vec![0, 0],
        reward: 0.5,
        next_obs: vec![vec![0.0], vec![0.0]],
        terminal: false,
    };
    assert!((td_target(&target, &base, 0.9).unwrap() - 1.4).abs() < 1e-12);
    let terminal = Transition {
        reward: -1.0,
        terminal: true,
        ..base.clone()
    };
    assert_eq!(td_target(&target, &terminal, 0.9).unwrap(), -1.0);
    assert_eq!(td_target(&target, &base, 0.0).unwrap(), 0.5);
}

#[test]
fn target_only_moves_on_sync() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut learner = VdnLearner::new(2, 4, &[8], 3, &mut rng).unwrap();
    let frozen = learner.target.clone();
    let batch: Vec<Transition> = (0..8).map(|_| transition(2, 4, 1.0, false, &mut rng, 3)).collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    let config = TrainConfig::default();
    for _ in 0..5 {
        learner.td_update(&refs, &config).unwrap();
    }
    assert_eq!(learner.target, frozen);
    assert_ne!(learner.online, frozen);
    learner.sync_target();
    assert_eq!(learner.target, learner.online);
}

#[test]
fn td_update_lowers_loss_on_fixed_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut learner = VdnLearner::new(2, 3, &[16], 4, &mut rng).unwrap();
    let batch: Vec<Transition> = (0..16).map(|i| transition(2, 3, i as f64 / 8.0 - 1.0, i % 2 == 0, &mut rng, 4)).collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    let config = TrainConfig {
        learning_rate: 0.05,
        gamma: 0.0,
        ..Default::default()
    };
    let first = learner.td_update(&refs, &config).unwrap();
    let mut last = first;
    for _ in 0..2000 {
        last = learner.td_update(&refs, &config).unwrap();
    }
    assert!(last < 0.5 * first, "{first} -> {last}");
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let learner = VdnLearner::new(2, 3, &[5, 4], 3, &mut rng).unwrap();
    let target = VdnLearner::new(2, 3, &[5, 4], 3, &mut rng).unwrap().online;
    let batch: Vec<Transition> = (0..4).map(|i| transition(2, 3, 0.3 * i as f64, i == 3, &mut rng, 3)).collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    let analytic = td_loss_and_gradients(&learner.online, &target, &refs, 0.9).unwrap();
    let h = 1e-6;
    for k in 0..2 {
        for p in 0..learner.online[k].params().len() {
            let mut plus = learner.online.clone();
            plus[k].params_mut()[p] += h;
            let mut minus = learner.online.clone();
            minus[k].params_mut()[p] -= h;
            let lp = td_loss_and_gradients(&plus, &target, &refs, 0.9).unwrap().loss;
            let lm = td_loss_and_gradients(&minus, &target, &refs, 0.9).unwrap().loss;
            let numeric = (lp - lm) / (2.0 * h);
            let g = analytic.grads[k][p];
            let rel = (g - numeric).abs() / g.abs().max(numeric.abs()).max(1e-6);
            assert!(rel <= 1e-4, "agent {k} param {p}: {g} vs {numeric}");
        }
    }
}

#[test]
fn bad_batches_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let learner = VdnLearner::new(2, 3, &[4], 3, &mut rng).unwrap();
    assert!(td_loss_and_gradients(&learner.online, &learner.target, &[], 0.9).is_err());
    let mut t = transition(2, 3, 0.0, false, &mut rng, 3);
    t.actions[1] = 7;
    assert!(td_loss_and_gradients(&learner.online, &learner.target, &[&t], 0.9).is_err());
}

proptest! {
    #[test]
    fn decomposed_argmax_is_joint_argmax(
        tables in (1usize..=3, 1usize..=4).prop_flat_map(|(n, a)| proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, a), n))
    ) {
        let greedy: Vec<usize> = tables.iter().map(|q| argmax(q)).collect();
        let greedy_value = joint_q(&greedy.iter().zip(&tables).map(|(&a, q)| q[a]).collect::<Vec<_>>());
        let n_actions = tables[0].len();
        let mut best = f64::NEG_INFINITY;
        for code in 0..n_actions.pow(tables.len() as u32) {
            let mut c = code;
            let value: f64 = tables.iter().map(|q| {
                let a = c % n_actions;
                c /= n_actions;
                q[a]
            }).sum();
            best = best.max(value);
        }
        prop_assert!((greedy_value - best).abs() <= 1e-12);
    }

    #[test]
    fn joint_q_is_additive(a in proptest::collection::vec(-1e3f64..1e3, 0..8), b in proptest::collection::vec(-1e3f64..1e3, 0..8)) {
        let mut ab = a.clone();
        ab.extend_from_slice(&b);
        prop_assert!((joint_q(&ab) - (joint_q(&a) + joint_q(&b))).abs() <= 1e-9);
    }
}
