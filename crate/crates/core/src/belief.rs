//! Type-conditioned beliefs and their Bayesian update from public state
//! observations.
//!
//! Player `i` of own type `theta_i` holds a distribution over the joint
//! opponent types `Theta_{-i}`. After observing `x^{k+1}`, each entry is
//! reweighted by the noise density of the residual between the observed
//! state and the successor that candidate would have produced:
//!
//! ```text
//! l^{k+1}(t) ∝ l^k(t) * d_w(x^{k+1} - f^k(x^k, u^k(theta_i, t), (theta_i, t)))
//! ```
//!
//! Players only see states, not controls, so `u^k(theta_i, t)` is the
//! action the candidate types would take under the current equilibrium
//! gains. This is an interpretation of the update rule, made explicit by
//! the [`ActionModel`] argument.
//!
//! Updates run in log space with max-subtraction, so beliefs can approach
//! 0 or 1 over long horizons without underflowing. Nothing is clamped:
//! an entry that starts at exactly 0 stays 0 forever, and so a row with a
//! single positive entry is absorbing.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameSpec, JointType, TypeSpace};

/// Rows must sum to one within this tolerance.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefTable {
    sizes: Vec<usize>,
    /// `[player][own type][opponent tuple index]`
    rows: Vec<Vec<Vec<f64>>>,
}

impl BeliefTable {
    pub fn uniform(ts: &TypeSpace) -> Self {
        let rows = (0..ts.num_players())
            .map(|i| {
                let m = ts.opponent_count(i);
                vec![vec![1.0 / m as f64; m]; ts.num_types(i)]
            })
            .collect();
        BeliefTable { sizes: ts.sizes().to_vec(), rows }
    }

    /// Every row puts all its mass on the opponents' entries of `truth`.
    pub fn degenerate(ts: &TypeSpace, truth: &JointType) -> Self {
        let mut t = Self::uniform(ts);
        for i in 0..ts.num_players() {
            let hit = ts.opponent_index(i, truth);
            for row in t.rows[i].iter_mut() {
                row.iter_mut().enumerate().for_each(|(o, v)| *v = if o == hit { 1.0 } else { 0.0 });
            }
        }
        t
    }

    /// Builds a table from explicit rows. Rows that sum to one within 1e-9
    /// are renormalized; anything else is rejected.
    pub fn from_rows(ts: &TypeSpace, rows: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if rows.len() != ts.num_players() {
            return Err(Error::invalid(format!("belief rows for {} players, expected {}", rows.len(), ts.num_players())));
        }
        let mut t = BeliefTable { sizes: ts.sizes().to_vec(), rows };
        for i in 0..ts.num_players() {
            if t.rows[i].len() != ts.num_types(i) {
                return Err(Error::InvalidBelief {
                    player: i,
                    type_index: 0,
                    reason: format!("{} rows, expected {}", t.rows[i].len(), ts.num_types(i)),
                });
            }
            for l in 0..ts.num_types(i) {
                let row = std::mem::take(&mut t.rows[i][l]);
                t.rows[i][l] = check_row(i, l, row, ts.opponent_count(i))?;
            }
        }
        Ok(t)
    }

    pub fn type_space(&self) -> TypeSpace {
        TypeSpace::new(self.sizes.clone())
    }

    pub fn num_players(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, player: usize, own: usize) -> &[f64] {
        &self.rows[player][own]
    }

    pub fn set_row(&mut self, player: usize, own: usize, row: Vec<f64>) -> Result<()> {
        let m = self.rows[player][own].len();
        self.rows[player][own] = check_row(player, own, row, m)?;
        Ok(())
    }

    /// Probability that player `player` of type `own` assigns to the
    /// opponents' part of `theta`.
    pub fn prob(&self, player: usize, own: usize, theta: &JointType) -> f64 {
        let idx = self.type_space().opponent_index(player, theta);
        self.rows[player][own][idx]
    }

    /// Marginal `l_i(theta_j | theta_i)` over a single opponent's types.
    pub fn marginal(&self, player: usize, own: usize, other: usize) -> Vec<f64> {
        assert_ne!(player, other, "a player holds no belief about itself");
        let ts = self.type_space();
        let mut out = vec![0.0; ts.num_types(other)];
        for (o, &p) in self.rows[player][own].iter().enumerate() {
            let theta = ts.with_opponents(player, own, o);
            out[theta.of(other)] += p;
        }
        out
    }

    /// Compact belief matrix `L_ij`: row `l` is the marginal over player
    /// `j`'s types held by player `i` of type `l`. The block form used in
    /// the coupling system is `kron(L_ij, I_n)`.
    pub fn belief_matrix(&self, player: usize, other: usize) -> DMatrix<f64> {
        let ni = self.sizes[player];
        let nj = self.sizes[other];
        let mut m = DMatrix::zeros(ni, nj);
        for l in 0..ni {
            for (c, v) in self.marginal(player, l, other).into_iter().enumerate() {
                m[(l, c)] = v;
            }
        }
        m
    }

    /// True when the row puts all its mass on one opponent tuple.
    pub fn is_degenerate_row(&self, player: usize, own: usize) -> bool {
        self.rows[player][own].iter().filter(|&&p| p > 0.0).count() <= 1
    }

    pub fn is_degenerate(&self) -> bool {
        (0..self.rows.len()).all(|i| (0..self.rows[i].len()).all(|l| self.is_degenerate_row(i, l)))
    }

    /// Largest deviation of any row sum from one.
    pub fn max_normalization_error(&self) -> f64 {
        self.rows
            .iter()
            .flatten()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

fn check_row(player: usize, own: usize, mut row: Vec<f64>, expected: usize) -> Result<Vec<f64>> {
    let bad = |reason: String| Error::InvalidBelief { player, type_index: own, reason };
    if row.len() != expected {
        return Err(bad(format!("length {} but {} opponent tuples", row.len(), expected)));
    }
    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(bad("entries must be finite and nonnegative".into()));
    }
    let s: f64 = row.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(bad(format!("sums to {s}")));
    }
    row.iter_mut().for_each(|p| *p /= s);
    Ok(row)
}

/// Densities `Pr(x^{k+1} | theta_{-i}, x^k, theta_i)` for every opponent
/// tuple, held as logs.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodProfile {
    pub log_values: Vec<f64>,
}

impl LikelihoodProfile {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("likelihood entries must be finite and strictly positive"));
        }
        Ok(LikelihoodProfile { log_values: values.iter().map(|v| v.ln()).collect() })
    }

    pub fn values(&self) -> Vec<f64> {
        self.log_values.iter().map(|v| v.exp()).collect()
    }
}

/// Evaluates the noise density at the residual each candidate opponent
/// tuple would leave. `actions` maps a joint type to the joint action that
/// type profile would play at stage `k`.
pub fn likelihood<F>(
    spec: &GameSpec,
    k: usize,
    x: &DVector<f64>,
    x_next: &DVector<f64>,
    observer: (usize, usize),
    actions: F,
) -> Result<LikelihoodProfile>
where
    F: Fn(&JointType) -> Option<Vec<DVector<f64>>>,
{
    let ts = spec.type_space();
    let (i, own) = observer;
    let mut log_values = Vec::with_capacity(ts.opponent_count(i));
    for o in 0..ts.opponent_count(i) {
        let theta = ts.with_opponents(i, own, o);
        let u = actions(&theta).ok_or_else(|| Error::MissingAction { joint_type: theta.0.clone() })?;
        let residual = x_next - spec.mean_successor(k, x, &u, &theta)?;
        let lv = spec.noise.log_density(k, &residual)?;
        if !lv.is_finite() {
            return Err(Error::invalid(format!("non-finite log-density for joint type {:?}", theta.0)));
        }
        log_values.push(lv);
    }
    Ok(LikelihoodProfile { log_values })
}

/// Posterior `prior * lik`, renormalized, computed in log space.
pub fn bayes_update(prior: &[f64], lik: &LikelihoodProfile) -> Result<Vec<f64>> {
    if prior.len() != lik.log_values.len() {
        return Err(Error::invalid("prior and likelihood lengths differ"));
    }
    let logs: Vec<f64> = prior
        .iter()
        .zip(&lik.log_values)
        .map(|(&p, &ll)| if p > 0.0 { p.ln() + ll } else { f64::NEG_INFINITY })
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::invalid("posterior has no mass"));
    }
    let w: Vec<f64> = logs.iter().map(|&v| (v - max).exp()).collect();
    let s: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / s).collect())
}

/// Two-type closed form `1 / (1 + (1/b0 - 1) * prod e)`, where each `e` is
/// the ratio of the misleading type's likelihood to the true type's.
pub fn closed_form_belief(b0: f64, ratios: &[f64]) -> Result<f64> {
    if !(b0 > 0.0 && b0 < 1.0) {
        return Err(Error::invalid(format!("initial belief {b0} outside (0, 1)")));
    }
    if ratios.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::invalid("likelihood ratios must be finite and positive"));
    }
    let log_prod: f64 = ratios.iter().map(|e| e.ln()).sum();
    let odds = (1.0 / b0 - 1.0).ln() + log_prod;
    Ok(1.0 / (1.0 + odds.exp()))
}

/// Source of the actions candidate types are predicted to take.
pub trait ActionModel {
    /// Action of `player` with type `ty` at stage `k` and state `x`, as
    /// predicted by `observer`.
    fn predicted_action(&self, observer: usize, k: usize, x: &DVector<f64>, player: usize, ty: usize) -> Option<DVector<f64>>;
}

/// Updates every `(i, theta_i)` row after observing `x -> x_next`.
/// Players with `frozen[i] == true` keep their rows, as do degenerate rows.
pub fn update_table<M: ActionModel + ?Sized>(
    table: &BeliefTable,
    spec: &GameSpec,
    k: usize,
    x: &DVector<f64>,
    x_next: &DVector<f64>,
    model: &M,
    frozen: &[bool],
) -> Result<BeliefTable> {
    let mut out = table.clone();
    for i in 0..spec.num_players() {
        if frozen.get(i).copied().unwrap_or(false) {
            continue;
        }
        for own in 0..spec.players[i].types.len() {
            if table.is_degenerate_row(i, own) {
                continue;
            }
            let lik = likelihood(spec, k, x, x_next, (i, own), |theta| {
                (0..spec.num_players()).map(|j| model.predicted_action(i, k, x, j, theta.of(j))).collect()
            })?;
            out.rows[i][own] = bayes_update(&table.rows[i][own], &lik)?;
        }
    }
    Ok(out)
}
