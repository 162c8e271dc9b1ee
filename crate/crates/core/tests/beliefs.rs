mod common;

use common::*;
use deceptive_lq::belief::{bayes_update, closed_form_belief, likelihood, update_table, LikelihoodProfile};
use deceptive_lq::riccati::backward_pass;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn step(b: f64, e: f64) -> f64 {
    bayes_update(&[b, 1.0 - b], &LikelihoodProfile::from_values(&[1.0, e]).unwrap()).unwrap()[0]
}

fn grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

#[test]
fn evidence_ratio_sets_the_direction_of_change() {
    for b in grid() {
        for e in [0.01, 0.3, 0.99] {
            assert!(step(b, e) > b, "b={b} e={e}");
        }
        for e in [1.01, 3.0, 100.0] {
            assert!(step(b, e) < b, "b={b} e={e}");
        }
        assert!((step(b, 1.0) - b).abs() <= 1e-15);
    }
}

#[test]
fn larger_mismatch_moves_the_belief_further() {
    for e in [0.05, 0.5, 0.9] {
        let ratios: Vec<f64> = grid().into_iter().map(|b| step(b, e) / b).collect();
        for w in ratios.windows(2) {
            assert!(w[1] < w[0], "e={e}");
        }
        for (b, r) in grid().into_iter().zip(&ratios) {
            assert!((r - 1.0 / (b + (1.0 - b) * e)).abs() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn evidence_order_does_not_matter(b0 in 0.01f64..0.99, e in prop::collection::vec(0.05f64..20.0, 1..40), seed in any::<u64>()) {
        let mut shuffled = e.clone();
        shuffled.shuffle(&mut rng(seed));
        let run = |es: &[f64]| es.iter().fold(b0, |b, &x| step(b, x));
        prop_assert!((run(&e) - run(&shuffled)).abs() <= 1e-12);
        prop_assert!((closed_form_belief(b0, &e).unwrap() - closed_form_belief(b0, &shuffled).unwrap()).abs() <= 1e-12);
    }
}

#[test]
fn table_update_matches_closed_form_on_two_types() {
    let shape = Shape { players: 2..3, types: 2..3, state: 1..4, horizon: 3..8, max_control: 2, type_dependent_a: true };
    for seed in 0..30 {
        let g = random_spec(seed, &shape);
        let ts = g.type_space();
        let mut table = random_beliefs(&ts, seed);
        let sol = backward_pass(&g, &table, 0).unwrap();
        let (observer, own) = (0, 1);
        let b0 = table.row(observer, own)[0];
        let mut r = rng(seed);
        let mut ratios = Vec::new();
        let mut x = vector(&mut r, g.state_dim, 1.0);
        for k in 0..g.horizon {
            let next = &x + vector(&mut r, g.state_dim, 0.5);
            let acts = |th: &deceptive_lq::game::JointType| -> Option<Vec<DVector<f64>>> {
                Some((0..2).map(|j| sol.equilibrium_action(k, &x, j, th.of(j)).unwrap()).collect())
            };
            let lik = likelihood(&g, k, &x, &next, (observer, own), acts).unwrap();
            let v = lik.values();
            ratios.push(v[1] / v[0]);
            table = update_table(&table, &g, k, &x, &next, &sol, &[false, false]).unwrap();
            let closed = closed_form_belief(b0, &ratios).unwrap();
            assert!((table.row(observer, own)[0] - closed).abs() <= 1e-12, "seed {seed} k {k}");
            x = next;
        }
    }
}
