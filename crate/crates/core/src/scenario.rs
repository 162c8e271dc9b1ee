//! The two-player pursuit-evasion game with a deceptive evader.
//!
//! State `x = [p_x, p_y, e_x, e_y]`: pursuer position, then evader
//! position. Both move with integrator dynamics `x+ = x + B1 u1 + B2 u2 + w`.
//! The evader (player 1) wants to reach one of two targets, `g` or `b`, and
//! its type says which. Before the horizon it is pulled toward both targets
//! with nearly equal weights, so its early motion reveals little. The
//! pursuer (player 0) has a private maneuverability type `H` or `L` and
//! wants to be close to the evader at the horizon.
//!
//! Player and type indices:
//!
//! | player | index | types (index order) |
//! |--------|-------|---------------------|
//! | pursuer | 0 | `H`, `L` |
//! | evader | 1 | `g`, `b` |

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Dynamics, GameSpec, JointType, PlayerSpec, TypeSpec};
use crate::noise::GaussianNoise;

pub const PURSUER: usize = 0;
pub const EVADER: usize = 1;
pub const HIGH: usize = 0;
pub const LOW: usize = 1;
pub const TARGET_G: usize = 0;
pub const TARGET_B: usize = 1;

const DEFAULT_TOML: &str = include_str!("../data/pursuit_evasion_default.toml");

/// How the evader's distance-keeping weight `d21` evolves over stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evasion {
    /// `d21 = 0`: the evader ignores the pursuer's position.
    None,
    Constant { d21: f64 },
    /// `d21 = alpha * k`.
    Linear { alpha: f64 },
}

impl Evasion {
    pub fn weight(&self, k: usize) -> f64 {
        match *self {
            Evasion::None => 0.0,
            Evasion::Constant { d21 } => d21,
            Evasion::Linear { alpha } => alpha * k as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PursuitEvasionParams {
    pub horizon: usize,
    pub target_g: [f64; 2],
    pub target_b: [f64; 2],
    pub evader_start: [f64; 2],
    pub pursuer_start: [f64; 2],
    /// `B1` scale for the `H` and `L` pursuer.
    pub pursuer_gain: [f64; 2],
    pub evader_gain: f64,
    /// Standard deviation of each position coordinate's noise per stage.
    pub noise_std: f64,
    /// Ambiguity bound: before the horizon the evader's weights on its true
    /// and misleading targets differ by at most this ratio.
    pub epsilon0: f64,
    /// Running weight toward the true target.
    pub evader_running: f64,
    /// Terminal weight toward the true target.
    pub evader_terminal: f64,
    pub f22: f64,
    /// Weight on the pursuer's control in the evader's cost (enters as a
    /// reward).
    pub f21: f64,
    pub evasion: Evasion,
    /// Terminal proximity weight `d12^K`.
    pub pursuer_terminal: f64,
    pub f11: f64,
    /// Weight on the evader's control in the pursuer's cost (enters as a
    /// reward).
    pub f12: f64,
    /// Initial pursuer beliefs in the evader's true type.
    #[serde(default)]
    pub belief_grid: Vec<f64>,
    /// Initial pursuer belief mismatch `1 - l(true evader type)`, swept in
    /// experiments.
    #[serde(default)]
    pub mismatch_grid: Vec<f64>,
    /// `H` pursuer gains, swept in experiments.
    #[serde(default)]
    pub pursuer_gain_grid: Vec<f64>,
}

/// Parameters shipped with the crate.
pub fn default_params() -> PursuitEvasionParams {
    toml::from_str(DEFAULT_TOML).expect("embedded default parameters parse")
}

impl PursuitEvasionParams {
    /// Same game with the evader's cost made independent of the pursuer:
    /// `d21 = 0` and `f21 = 0`.
    pub fn decoupled(mut self) -> Self {
        self.evasion = Evasion::None;
        self.f21 = 0.0;
        self
    }

    pub fn target(&self, evader_type: usize) -> [f64; 2] {
        if evader_type == TARGET_B {
            self.target_b
        } else {
            self.target_g
        }
    }

    pub fn initial_state(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.pursuer_start[0], self.pursuer_start[1], self.evader_start[0], self.evader_start[1]])
    }

    /// Weights `(d_b, d_g)` of an evader of `evader_type` at stage `k`.
    pub fn target_weights(&self, k: usize, evader_type: usize) -> (f64, f64) {
        let (true_w, other_w) = if k < self.horizon {
            (self.evader_running, self.evader_running / (1.0 + self.epsilon0))
        } else {
            (self.evader_terminal, 0.0)
        };
        if evader_type == TARGET_B {
            (true_w, other_w)
        } else {
            (other_w, true_w)
        }
    }

    /// Pursuer proximity weight `d12^k`: zero before the horizon.
    pub fn proximity_weight(&self, k: usize) -> f64 {
        if k < self.horizon {
            0.0
        } else {
            self.pursuer_terminal
        }
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(m.to_string()));
        if self.horizon == 0 {
            return bad("horizon must be positive");
        }
        let [h, l] = self.pursuer_gain;
        if !(l > 0.0 && h >= l) {
            return bad("pursuer gains must satisfy H >= L > 0");
        }
        if self.evader_gain <= 0.0 {
            return bad("evader gain must be positive");
        }
        if !(self.noise_std > 0.0) {
            return bad("noise_std must be positive");
        }
        if self.epsilon0 < 0.0 || self.evader_running < 0.0 {
            return bad("epsilon0 and evader_running must be non-negative");
        }
        if self.evader_terminal <= self.evader_running {
            return bad("evader_terminal must exceed evader_running");
        }
        if self.f11 <= 0.0 || self.f22 <= 0.0 || self.f12 < 0.0 || self.f21 < 0.0 || self.pursuer_terminal < 0.0 {
            return bad("control weights must be non-negative, own weights positive");
        }
        if self.belief_grid.iter().chain(&self.mismatch_grid).any(|&p| !(0.0..=1.0).contains(&p)) {
            return bad("belief grid entries must lie in [0, 1]");
        }
        for ty in [TARGET_G, TARGET_B] {
            for k in 0..self.horizon {
                let (db, dg) = self.target_weights(k, ty);
                let (t, o) = if ty == TARGET_B { (db, dg) } else { (dg, db) };
                if o > 0.0 && (t / o - 1.0).abs() > self.epsilon0 + 1e-12 {
                    return Err(Error::invalid(format!("target weights of evader type {ty} violate the ambiguity bound at stage {k}")));
                }
            }
        }
        Ok(())
    }

    /// Builds the game. Fails if the parameters are inconsistent.
    pub fn build(&self) -> Result<GameSpec> {
        self.check()?;
        let kk = self.horizon;
        let i2 = DMatrix::<f64>::identity(2, 2);
        let stack = |top: &DMatrix<f64>, bottom: &DMatrix<f64>| {
            let mut m = DMatrix::zeros(4, 2);
            m.view_mut((0, 0), (2, 2)).copy_from(top);
            m.view_mut((2, 0), (2, 2)).copy_from(bottom);
            m
        };
        let blocks = |a: f64, b: f64, c: f64, d: f64| {
            let mut m = DMatrix::zeros(4, 4);
            m.view_mut((0, 0), (2, 2)).copy_from(&(&i2 * a));
            m.view_mut((0, 2), (2, 2)).copy_from(&(&i2 * b));
            m.view_mut((2, 0), (2, 2)).copy_from(&(&i2 * c));
            m.view_mut((2, 2), (2, 2)).copy_from(&(&i2 * d));
            m
        };
        let z2 = DMatrix::zeros(2, 2);

        let pursuer_types = [("H", self.pursuer_gain[HIGH]), ("L", self.pursuer_gain[LOW])]
            .into_iter()
            .map(|(label, gain)| {
                let mut t = TypeSpec {
                    label: label.into(),
                    b: vec![stack(&(&i2 * gain), &z2); kk],
                    d: Vec::with_capacity(kk + 1),
                    f: Vec::with_capacity(kk + 1),
                    reference: vec![DVector::zeros(4); kk + 1],
                    offset: vec![0.0; kk + 1],
                };
                for k in 0..=kk {
                    let w = self.proximity_weight(k);
                    t.d.push(blocks(w, -w, -w, w));
                    t.f.push(if k < kk { vec![&i2 * self.f11, &i2 * -self.f12] } else { vec![z2.clone(), z2.clone()] });
                }
                t
            })
            .collect();

        let gb = DVector::from_row_slice(&self.target_b);
        let gg = DVector::from_row_slice(&self.target_g);
        let evader_types = [("g", TARGET_G), ("b", TARGET_B)]
            .into_iter()
            .map(|(label, ty)| {
                let mut t = TypeSpec {
                    label: label.into(),
                    b: vec![stack(&z2, &(&i2 * self.evader_gain)); kk],
                    d: Vec::with_capacity(kk + 1),
                    f: Vec::with_capacity(kk + 1),
                    reference: Vec::with_capacity(kk + 1),
                    offset: Vec::with_capacity(kk + 1),
                };
                for k in 0..=kk {
                    let (db, dg) = self.target_weights(k, ty);
                    let s = db + dg;
                    let d21 = self.evasion.weight(k);
                    t.d.push(blocks(-d21, d21, d21, s - d21));
                    let (blend, fd) = if s > 0.0 {
                        ((&gb * db + &gg * dg) / s, db * dg * (&gb - &gg).norm_squared() / s)
                    } else {
                        (DVector::zeros(2), 0.0)
                    };
                    t.reference.push(DVector::from_iterator(4, blend.iter().chain(blend.iter()).copied()));
                    t.offset.push(fd);
                    t.f.push(if k < kk { vec![&i2 * -self.f21, &i2 * self.f22] } else { vec![z2.clone(), z2.clone()] });
                }
                t
            })
            .collect();

        Ok(GameSpec {
            horizon: kk,
            state_dim: 4,
            players: vec![
                PlayerSpec { name: "pursuer".into(), control_dim: 2, types: pursuer_types },
                PlayerSpec { name: "evader".into(), control_dim: 2, types: evader_types },
            ],
            dynamics: Dynamics::Shared(vec![DMatrix::identity(4, 4); kk]),
            noise: Arc::new(GaussianNoise::isotropic(4, self.noise_std * self.noise_std)?),
            state_partition: Some(vec![0..2, 2..4]),
        })
    }
}

/// The pursuer's and evader's positions in a state vector.
pub fn positions(x: &DVector<f64>) -> ([f64; 2], [f64; 2]) {
    ([x[0], x[1]], [x[2], x[3]])
}

/// `|| e^K - gamma(theta_2) ||`: how far the evader ends from its target.
pub fn evader_final_distance(params: &PursuitEvasionParams, x_final: &DVector<f64>, evader_type: usize) -> f64 {
    let t = params.target(evader_type);
    (x_final[2] - t[0]).hypot(x_final[3] - t[1])
}

/// `|| e^K - p^K ||`: how far the pursuer ends from the evader.
pub fn pursuer_final_distance(x_final: &DVector<f64>) -> f64 {
    (x_final[2] - x_final[0]).hypot(x_final[3] - x_final[1])
}

/// Joint type from pursuer and evader type indices.
pub fn joint(pursuer_type: usize, evader_type: usize) -> JointType {
    JointType(vec![pursuer_type, evader_type])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::BeliefTable;
    use crate::game::{check_controllability, validate_spec};
    use crate::riccati::{backward_pass, is_decoupled};

    fn scalar_evader_cost(p: &PursuitEvasionParams, k: usize, ty: usize, x: &DVector<f64>, u: &[DVector<f64>]) -> f64 {
        let (db, dg) = p.target_weights(k, ty);
        let e = [x[2], x[3]];
        let dist2 = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
        let mut c = db * dist2(e, p.target_b) + dg * dist2(e, p.target_g) - p.evasion.weight(k) * dist2([x[0], x[1]], e);
        if k < p.horizon {
            c += p.f22 * u[1].norm_squared() - p.f21 * u[0].norm_squared();
        }
        c
    }

    fn scalar_pursuer_cost(p: &PursuitEvasionParams, k: usize, x: &DVector<f64>, u: &[DVector<f64>]) -> f64 {
        let mut c = p.proximity_weight(k) * ((x[0] - x[2]).powi(2) + (x[1] - x[3]).powi(2));
        if k < p.horizon {
            c += p.f11 * u[0].norm_squared() - p.f12 * u[1].norm_squared();
        }
        c
    }

    #[test]
    fn default_parameters_build_and_validate() {
        let p = default_params();
        let g = p.build().unwrap();
        let report = validate_spec(&g).unwrap();
        assert!(report.is_valid(), "{:?}", report.issues);
        assert!(check_controllability(&g).controllable);
        let ts = g.type_space();
        backward_pass(&g, &BeliefTable::uniform(&ts), 0).unwrap();
        for &b in p.belief_grid.iter().chain(&[0.01, 0.99]) {
            let table = BeliefTable::from_rows(&ts, vec![vec![vec![1.0 - b, b]; 2], vec![vec![b, 1.0 - b]; 2]]).unwrap();
            for spec in [&g, &p.clone().decoupled().build().unwrap()] {
                let sol = backward_pass(spec, &table, 0).unwrap();
                assert!(sol.diagnostics.iter().all(|d| d.w0_rcond > 1e-3));
            }
        }
        assert_eq!(p.belief_grid, vec![0.1, 0.5, 0.9]);
        assert_eq!(p.horizon, 40);
        assert_eq!(p.pursuer_gain[LOW], 0.3);
    }

    #[test]
    fn matrix_costs_match_scalar_expansion() {
        let p = default_params();
        let g = p.build().unwrap();
        let x = DVector::from_vec(vec![0.7, -1.3, 2.2, 5.1]);
        let u = vec![DVector::from_vec(vec![0.4, -0.2]), DVector::from_vec(vec![-0.9, 1.5])];
        for k in [0, 7, p.horizon - 1, p.horizon] {
            for ty in [TARGET_G, TARGET_B] {
                let m = if k < p.horizon { g.stage_cost(k, EVADER, ty, &x, &u).unwrap() } else { g.terminal_cost(EVADER, ty, &x) };
                let s = scalar_evader_cost(&p, k, ty, &x, &u);
                assert!((m - s).abs() < 1e-9 * (1.0 + s.abs()), "evader k={k} ty={ty}: {m} vs {s}");
            }
            for ty in [HIGH, LOW] {
                let m = if k < p.horizon { g.stage_cost(k, PURSUER, ty, &x, &u).unwrap() } else { g.terminal_cost(PURSUER, ty, &x) };
                let s = scalar_pursuer_cost(&p, k, &x, &u);
                assert!((m - s).abs() < 1e-9 * (1.0 + s.abs()), "pursuer k={k}: {m} vs {s}");
            }
        }
    }

    #[test]
    fn evasion_term_vanishes_at_equal_positions() {
        let mut p = default_params();
        p.evasion = Evasion::Constant { d21: 0.3 };
        let with = p.build().unwrap();
        let without = p.clone().decoupled().build().unwrap();
        let x = DVector::from_vec(vec![1.0, 2.0, 1.0, 2.0]);
        let u = vec![DVector::zeros(2), DVector::from_vec(vec![0.1, 0.1])];
        for ty in [TARGET_G, TARGET_B] {
            let a = with.stage_cost(3, EVADER, ty, &x, &u).unwrap();
            let b = without.stage_cost(3, EVADER, ty, &x, &u).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn evader_heads_for_the_midpoint_early() {
        let p = default_params().decoupled();
        let g = p.build().unwrap();
        let sol = backward_pass(&g, &BeliefTable::uniform(&g.type_space()), 0).unwrap();
        let x = p.initial_state();
        let mid = [(p.target_b[0] + p.target_g[0]) / 2.0 - x[2], (p.target_b[1] + p.target_g[1]) / 2.0 - x[3]];
        for ty in [TARGET_G, TARGET_B] {
            let u = sol.equilibrium_action(0, &x, EVADER, ty).unwrap();
            let cos = (u[0] * mid[0] + u[1] * mid[1]) / (u.norm() * mid[0].hypot(mid[1]));
            assert!(cos > 15f64.to_radians().cos(), "type {ty}: heading off by {} deg", cos.acos().to_degrees());
        }
    }

    #[test]
    fn decoupled_variant_is_decoupled_for_the_evader_only() {
        let p = default_params();
        assert!(!is_decoupled(&p.build().unwrap(), EVADER));
        let g = p.decoupled().build().unwrap();
        assert!(is_decoupled(&g, EVADER));
        assert!(!is_decoupled(&g, PURSUER));
    }

    #[test]
    fn decoupled_evader_gains_ignore_beliefs() {
        let g = default_params().decoupled().build().unwrap();
        let ts = g.type_space();
        let a = backward_pass(&g, &BeliefTable::uniform(&ts), 0).unwrap();
        let skew = BeliefTable::from_rows(
            &ts,
            vec![vec![vec![0.9, 0.1], vec![0.2, 0.8]], vec![vec![0.05, 0.95], vec![0.7, 0.3]]],
        )
        .unwrap();
        let b = backward_pass(&g, &skew, 0).unwrap();
        for k in 0..g.horizon {
            for ty in [TARGET_G, TARGET_B] {
                assert_eq!(a.feedback(k, EVADER, ty), b.feedback(k, EVADER, ty));
                assert_eq!(a.feedforward(k, EVADER, ty), b.feedforward(k, EVADER, ty));
            }
        }
    }

    #[test]
    fn inconsistent_parameters_are_rejected() {
        let mut p = default_params();
        p.pursuer_gain = [0.2, 0.3];
        assert!(p.build().is_err());
        let mut p = default_params();
        p.evader_terminal = 0.0;
        assert!(p.build().is_err());
    }
}
