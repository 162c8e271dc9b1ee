//! The game data model: players, private types, stage-varying linear
//! dynamics, quadratic costs and additive noise.
//!
//! Stages are 0-based. Controls exist at stages `0..K`, costs and
//! references at `0..=K`. At stage `K` the control weights are zero.

mod controllability;
mod types;
mod validate;

use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

pub use controllability::{check_controllability, ControllabilityEntry, ControllabilityReport};
pub use types::{JointType, TypeSpace};
pub use validate::{validate_spec, ValidationIssue, ValidationReport, SYMMETRY_TOLERANCE};

use crate::error::{Error, Result};
use crate::noise::NoiseDensity;

/// Everything that depends on one player's private type.
#[derive(Debug, Clone)]
pub struct TypeSpec {
    pub label: String,
    /// `B_i^k(theta_i)`, `n x m_i`, stages `0..K`.
    pub b: Vec<DMatrix<f64>>,
    /// `D_i^k(theta_i)`, `n x n`, stages `0..=K`.
    pub d: Vec<DMatrix<f64>>,
    /// `F_ij^k(theta_i)` indexed `[k][j]`, `m_j x m_j`, stages `0..=K`.
    pub f: Vec<Vec<DMatrix<f64>>>,
    /// Reference `x_{d_i}^k(theta_i)`, stages `0..=K`.
    pub reference: Vec<DVector<f64>>,
    /// Scalar offset `f_{d_i}^k`, stages `0..=K`.
    pub offset: Vec<f64>,
}

impl TypeSpec {
    /// A type whose matrices do not change over the horizon. The terminal
    /// stage gets its own state weight and reference; its control weights
    /// are zero.
    #[allow(clippy::too_many_arguments)]
    pub fn time_invariant(
        label: impl Into<String>,
        horizon: usize,
        b: DMatrix<f64>,
        d: DMatrix<f64>,
        f: Vec<DMatrix<f64>>,
        reference: DVector<f64>,
        offset: f64,
        d_terminal: DMatrix<f64>,
        reference_terminal: DVector<f64>,
        offset_terminal: f64,
    ) -> Self {
        let zeros: Vec<DMatrix<f64>> = f.iter().map(|m| DMatrix::zeros(m.nrows(), m.ncols())).collect();
        let mut fs = vec![f; horizon];
        fs.push(zeros);
        let mut ds = vec![d; horizon];
        ds.push(d_terminal);
        let mut refs = vec![reference; horizon];
        refs.push(reference_terminal);
        let mut offs = vec![offset; horizon];
        offs.push(offset_terminal);
        TypeSpec { label: label.into(), b: vec![b; horizon], d: ds, f: fs, reference: refs, offset: offs }
    }
}

#[derive(Debug, Clone)]
pub struct PlayerSpec {
    pub name: String,
    pub control_dim: usize,
    pub types: Vec<TypeSpec>,
}

/// `A^k(theta)`. A type-independent system stores one matrix per stage.
#[derive(Debug, Clone)]
pub enum Dynamics {
    Shared(Vec<DMatrix<f64>>),
    /// Indexed `[k][joint type index]`.
    PerJointType(Vec<Vec<DMatrix<f64>>>),
}

#[derive(Debug, Clone)]
pub struct GameSpec {
    pub horizon: usize,
    pub state_dim: usize,
    pub players: Vec<PlayerSpec>,
    pub dynamics: Dynamics,
    pub noise: Arc<dyn NoiseDensity>,
    /// State coordinates owned by each player, when the state is a stack of
    /// per-player local states.
    pub state_partition: Option<Vec<Range<usize>>>,
}

impl GameSpec {
    pub fn num_players(&self) -> usize {
        self.players.len()
    }

    pub fn type_space(&self) -> TypeSpace {
        TypeSpace::new(self.players.iter().map(|p| p.types.len()).collect())
    }

    pub fn control_dims(&self) -> Vec<usize> {
        self.players.iter().map(|p| p.control_dim).collect()
    }

    pub fn is_type_independent(&self) -> bool {
        matches!(self.dynamics, Dynamics::Shared(_))
    }

    pub fn a(&self, k: usize, theta: &JointType) -> &DMatrix<f64> {
        match &self.dynamics {
            Dynamics::Shared(a) => &a[k],
            Dynamics::PerJointType(a) => &a[k][self.type_space().joint_index(theta)],
        }
    }

    pub fn b(&self, k: usize, player: usize, ty: usize) -> &DMatrix<f64> {
        &self.players[player].types[ty].b[k]
    }

    pub fn d(&self, k: usize, player: usize, ty: usize) -> &DMatrix<f64> {
        &self.players[player].types[ty].d[k]
    }

    pub fn f(&self, k: usize, player: usize, other: usize, ty: usize) -> &DMatrix<f64> {
        &self.players[player].types[ty].f[k][other]
    }

    pub fn reference(&self, k: usize, player: usize, ty: usize) -> &DVector<f64> {
        &self.players[player].types[ty].reference[k]
    }

    pub fn offset(&self, k: usize, player: usize, ty: usize) -> f64 {
        self.players[player].types[ty].offset[k]
    }

    pub fn q(&self, k: usize) -> &DMatrix<f64> {
        self.noise.covariance(k)
    }

    fn check_stage(&self, k: usize, inclusive: bool) -> Result<()> {
        let ok = if inclusive { k <= self.horizon } else { k < self.horizon };
        if ok {
            Ok(())
        } else {
            Err(Error::StageOutOfRange { stage: k, horizon: self.horizon })
        }
    }

    /// Noise-free successor `A^k(theta) x + sum_i B_i^k(theta_i) u_i`.
    pub fn mean_successor(&self, k: usize, x: &DVector<f64>, u: &[DVector<f64>], theta: &JointType) -> Result<DVector<f64>> {
        self.check_stage(k, false)?;
        if u.len() != self.num_players() {
            return Err(Error::invalid(format!("expected {} actions, got {}", self.num_players(), u.len())));
        }
        let mut next = self.a(k, theta) * x;
        for (i, ui) in u.iter().enumerate() {
            next += self.b(k, i, theta.of(i)) * ui;
        }
        Ok(next)
    }

    /// `x^{k+1} = A^k(theta) x + sum_i B_i^k(theta_i) u_i + w`.
    pub fn step_dynamics(
        &self,
        k: usize,
        x: &DVector<f64>,
        u: &[DVector<f64>],
        theta: &JointType,
        w: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        Ok(self.mean_successor(k, x, u, theta)? + w)
    }

    /// Stage cost `g_i^k(x, u, theta_i)`; at `k = K` only the state term
    /// and offset are charged.
    pub fn stage_cost(&self, k: usize, player: usize, ty: usize, x: &DVector<f64>, u: &[DVector<f64>]) -> Result<f64> {
        self.check_stage(k, true)?;
        let e = x - self.reference(k, player, ty);
        let mut cost = e.dot(&(self.d(k, player, ty) * &e)) + self.offset(k, player, ty);
        if k < self.horizon {
            for (j, uj) in u.iter().enumerate() {
                cost += uj.dot(&(self.f(k, player, j, ty) * uj));
            }
        }
        Ok(cost)
    }

    pub fn terminal_cost(&self, player: usize, ty: usize, x: &DVector<f64>) -> f64 {
        let k = self.horizon;
        let e = x - self.reference(k, player, ty);
        e.dot(&(self.d(k, player, ty) * &e)) + self.offset(k, player, ty)
    }
}
