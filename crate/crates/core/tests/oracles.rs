mod common;

use common::*;
use deceptive_lq::belief::BeliefTable;
use deceptive_lq::game::{check_controllability, GameSpec, JointType, TypeSpace};
use deceptive_lq::riccati::backward_pass;
use deceptive_lq::simulator::{run_episode, EpisodeConfig, PolicyKind};
use nalgebra::DVector;

const TOL: f64 = 1e-8;

#[test]
fn single_player_matches_reference_lqr() {
    for seed in 0..100 {
        let g = random_spec(seed, &Shape::single_player());
        let sol = backward_pass(&g, &BeliefTable::uniform(&g.type_space()), 0).unwrap();
        let o = lqr_oracle(&g);
        for k in 0..=g.horizon {
            assert!(rel_err(sol.s(k, 0, 0), &o.p[k]) < TOL, "seed {seed} S at {k}");
            assert!(rel_err_vec(sol.n(k, 0, 0), &o.v[k]) < TOL, "seed {seed} N at {k}");
            assert!(rel_err_scalar(sol.q(k, 0, 0), o.c[k]) < TOL, "seed {seed} q at {k}");
        }
        for k in 0..g.horizon {
            assert!(rel_err(sol.feedback(k, 0, 0), &o.k[k]) < TOL, "seed {seed} K at {k}");
            assert!(rel_err_vec(sol.feedforward(k, 0, 0), &o.g[k]) < TOL, "seed {seed} g at {k}");
        }
    }
}

fn assert_matches_nash(g: &GameSpec, beliefs: &BeliefTable, theta: &JointType, label: &str) {
    let sol = backward_pass(g, beliefs, 0).unwrap();
    let o = nash_oracle(g, theta);
    for k in 0..g.horizon {
        for i in 0..g.num_players() {
            let l = theta.of(i);
            assert!(rel_err(sol.feedback(k, i, l), &o.k[k][i]) < TOL, "{label}: K[{k}][{i}]");
            assert!(rel_err_vec(sol.feedforward(k, i, l), &o.g[k][i]) < TOL, "{label}: g[{k}][{i}]");
            assert!(rel_err(sol.s(k, i, l), &o.p[k][i]) < TOL, "{label}: S[{k}][{i}]");
            assert!(rel_err_vec(sol.n(k, i, l), &o.v[k][i]) < TOL, "{label}: N[{k}][{i}]");
            assert!(rel_err_scalar(sol.q(k, i, l), o.c[k][i]) < TOL, "{label}: q[{k}][{i}]");
        }
    }
}

#[test]
fn single_type_games_match_reference_nash() {
    for n in [1, 2] {
        let shape = Shape { players: 2..3, types: 1..2, state: n..n + 1, horizon: 1..11, max_control: n, type_dependent_a: false };
        for seed in 0..30 {
            let g = random_spec(seed, &shape);
            let theta = JointType(vec![0, 0]);
            assert_matches_nash(&g, &BeliefTable::uniform(&g.type_space()), &theta, &format!("n={n} seed={seed}"));
        }
    }
}

#[test]
fn degenerate_beliefs_match_reference_nash_for_the_true_types() {
    let shape = Shape { players: 2..4, types: 2..4, state: 1..4, horizon: 1..8, max_control: 2, type_dependent_a: true };
    for seed in 0..30 {
        let g = random_spec(seed, &shape);
        let ts = g.type_space();
        let theta = ts.joint_from_index(seed as usize % ts.joint_count());
        assert_matches_nash(&g, &BeliefTable::degenerate(&ts, &theta), &theta, &format!("seed={seed}"));
    }
}

#[test]
fn complete_information_play_is_time_consistent() {
    let shape = Shape { players: 2..4, types: 1..3, state: 1..5, horizon: 2..11, max_control: 2, type_dependent_a: true };
    for seed in 0..20 {
        let g = random_spec(seed, &shape);
        let ts = g.type_space();
        let theta = ts.joint_from_index(seed as usize % ts.joint_count());
        let run = |t: usize| {
            let cfg = EpisodeConfig {
                true_types: theta.clone(),
                initial_state: DVector::from_element(g.state_dim, 1.0),
                initial_beliefs: BeliefTable::degenerate(&ts, &theta),
                policies: vec![PolicyKind::Level { t }; g.num_players()],
                seed: 77 + seed,
            };
            run_episode(&g, &cfg).unwrap()
        };
        let (a, b) = (run(0), run(g.horizon));
        assert_eq!(a.states, b.states, "seed {seed}");
        assert_eq!(a.actions, b.actions, "seed {seed}");
    }
}

#[test]
fn controllability_verdict_ignores_type_labels() {
    for seed in 0..20 {
        let g = random_spec(seed, &Shape { players: 1..3, types: 2..4, state: 1..4, horizon: 1..5, max_control: 1, type_dependent_a: false });
        let mut relabeled = g.clone();
        for p in &mut relabeled.players {
            p.types.reverse();
        }
        let a = check_controllability(&g);
        let b = check_controllability(&relabeled);
        assert_eq!(a.controllable, b.controllable, "seed {seed}");
        for i in 0..g.num_players() {
            assert_eq!(a.player_controllable(i), b.player_controllable(i));
        }
    }
}

#[test]
fn type_space_indexing_round_trips() {
    let ts = TypeSpace::new(vec![2, 3, 2]);
    for idx in 0..ts.joint_count() {
        let theta = ts.joint_from_index(idx);
        assert_eq!(ts.joint_index(&theta), idx);
        for i in 0..3 {
            let o = ts.opponent_index(i, &theta);
            assert_eq!(ts.with_opponents(i, theta.of(i), o), theta);
        }
    }
}
