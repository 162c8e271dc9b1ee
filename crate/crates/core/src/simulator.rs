//! Receding-horizon play: backward passes on frozen beliefs, execution of
//! the planned actions, noisy transitions, Bayesian updates and cost
//! accounting.
//!
//! A level-`t` player replans at stages `0, t, 2t, ...` and in between
//! keeps the gains of its last pass, evaluated at the realized state.
//! `t = 0` replans at every stage. `t = K` plans once, at stage 0.

use std::collections::HashMap;
use std::rc::Rc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::belief::{update_table, ActionModel, BeliefTable};
use crate::error::{Error, Result};
use crate::game::{GameSpec, JointType};
use crate::riccati::{backward_pass, RiccatiSolution};
use crate::rng::episode_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind {
    /// Level-`t` equilibrium play with Bayesian belief updates.
    Level { t: usize },
    /// Level-`t` play, but the player never updates its own beliefs.
    FrozenBelief { t: usize },
    /// Level-0 play with the opponents' true types known from the start.
    CompleteInfo,
    /// Pursuer heuristic: move onto the evader's current position.
    DirectFollowing,
    /// Pursuer heuristic: wait until the belief mismatch about the
    /// evader's true type drops to `delta`, then pursue.
    Conservative { delta: f64 },
}

impl PolicyKind {
    pub fn is_heuristic(&self) -> bool {
        matches!(self, PolicyKind::DirectFollowing | PolicyKind::Conservative { .. })
    }

    /// Replanning period; heuristic players plan nothing themselves.
    fn level(&self) -> Option<usize> {
        match *self {
            PolicyKind::Level { t } | PolicyKind::FrozenBelief { t } => Some(t),
            PolicyKind::CompleteInfo => Some(0),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeConfig {
    pub true_types: JointType,
    pub initial_state: DVector<f64>,
    pub initial_beliefs: BeliefTable,
    pub policies: Vec<PolicyKind>,
    pub seed: u64,
}

/// Everything that happened in one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub true_types: JointType,
    /// `x^0 .. x^K`.
    pub states: Vec<DVector<f64>>,
    /// `[k][i]` for `k < K`.
    pub actions: Vec<Vec<DVector<f64>>>,
    /// `w^k = x^{k+1} - f^k(x^k, u^k, theta)`.
    pub noise: Vec<DVector<f64>>,
    /// Belief tables at stages `0..=K`.
    pub beliefs: Vec<BeliefTable>,
    /// `[k][i]`; the entry at `K` is the terminal cost.
    pub stage_costs: Vec<Vec<f64>>,
    /// `[k][i] = sum_{j <= k} stage_costs[j][i]`.
    pub cumulative: Vec<Vec<f64>>,
    /// Stage at which a conservative player started pursuing.
    pub revealed_at: Vec<Option<usize>>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    /// Probability player `observer` (of its true type) assigns to the
    /// opponents' true types, at every stage.
    pub fn belief_in_truth(&self, observer: usize) -> Vec<f64> {
        let own = self.true_types.of(observer);
        self.beliefs.iter().map(|t| t.prob(observer, own, &self.true_types)).collect()
    }

    /// Marginal probability `observer` assigns to `other`'s true type.
    pub fn marginal_in_truth(&self, observer: usize, other: usize) -> Vec<f64> {
        let own = self.true_types.of(observer);
        let truth = self.true_types.of(other);
        self.beliefs.iter().map(|t| t.marginal(observer, own, other)[truth]).collect()
    }

    /// Total realized cost of `player`, terminal cost included.
    pub fn total_cost(&self, player: usize) -> f64 {
        self.cumulative.last().map_or(0.0, |c| c[player])
    }
}

/// Own and opponent state rows of a pursuer in a two-player game with a
/// state partition.
fn pursuit_rows(spec: &GameSpec, player: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let parts = spec
        .state_partition
        .as_ref()
        .ok_or_else(|| Error::invalid("heuristic pursuers need a state partition"))?;
    if spec.num_players() != 2 {
        return Err(Error::invalid("heuristic pursuers are defined for two-player games"));
    }
    let own: Vec<usize> = parts[player].clone().collect();
    let other: Vec<usize> = parts[1 - player].clone().collect();
    if own.len() != other.len() {
        return Err(Error::invalid("pursuer and evader state blocks differ in size"));
    }
    Ok((own, other))
}

struct EpisodeModel<'a> {
    passes: Vec<Rc<RiccatiSolution>>,
    actual: &'a [Option<DVector<f64>>],
}

impl ActionModel for EpisodeModel<'_> {
    fn predicted_action(&self, observer: usize, k: usize, x: &DVector<f64>, player: usize, ty: usize) -> Option<DVector<f64>> {
        if player == observer {
            if let Some(u) = &self.actual[player] {
                return Some(u.clone());
            }
        }
        self.passes[observer].equilibrium_action(k, x, player, ty).ok()
    }
}

fn check_config(spec: &GameSpec, cfg: &EpisodeConfig) -> Result<()> {
    let np = spec.num_players();
    let ts = spec.type_space();
    if cfg.policies.len() != np || cfg.true_types.0.len() != np {
        return Err(Error::invalid("one policy and one true type per player are required"));
    }
    if cfg.true_types.0.iter().enumerate().any(|(i, &t)| t >= ts.num_types(i)) {
        return Err(Error::invalid(format!("true types {:?} outside the type sets", cfg.true_types.0)));
    }
    if cfg.initial_state.len() != spec.state_dim {
        return Err(Error::invalid("initial state has the wrong dimension"));
    }
    if cfg.initial_beliefs.type_space() != ts {
        return Err(Error::invalid("initial beliefs do not match the type space"));
    }
    if cfg.initial_beliefs.max_normalization_error() > 1e-12 {
        return Err(Error::invalid("initial beliefs are not normalized"));
    }
    for p in &cfg.policies {
        if let Some(t) = p.level() {
            if t > spec.horizon {
                return Err(Error::invalid(format!("level {t} exceeds horizon {}", spec.horizon)));
            }
        }
        if let PolicyKind::Conservative { delta } = p {
            if !(*delta > 0.0 && *delta <= 1.0) {
                return Err(Error::invalid("conservative threshold must lie in (0, 1]"));
            }
        }
    }
    if cfg.policies.iter().all(PolicyKind::is_heuristic) {
        return Err(Error::invalid("at least one player must play an equilibrium policy"));
    }
    Ok(())
}

/// Plays one episode.
pub fn run_episode(spec: &GameSpec, cfg: &EpisodeConfig) -> Result<Trajectory> {
    check_config(spec, cfg)?;
    let kk = spec.horizon;
    let np = spec.num_players();
    let ts = spec.type_space();
    let theta = &cfg.true_types;
    let mut rng = episode_rng(cfg.seed);

    let mut beliefs = cfg.initial_beliefs.clone();
    for (i, p) in cfg.policies.iter().enumerate() {
        if *p == PolicyKind::CompleteInfo {
            let hit = ts.opponent_index(i, theta);
            for own in 0..ts.num_types(i) {
                let row = (0..ts.opponent_count(i)).map(|o| if o == hit { 1.0 } else { 0.0 }).collect();
                beliefs.set_row(i, own, row)?;
            }
        }
    }
    let frozen: Vec<bool> = cfg.policies.iter().map(|p| matches!(p, PolicyKind::FrozenBelief { .. })).collect();
    // Heuristic players predict others with the first equilibrium player's pass.
    let reference = cfg.policies.iter().position(|p| !p.is_heuristic()).unwrap();

    // Conservative pursuers pursue with complete-information gains, one
    // set per hypothesis about the evader's type.
    let mut pursuit_passes: Vec<Option<Vec<RiccatiSolution>>> = vec![None; np];
    for (i, p) in cfg.policies.iter().enumerate() {
        if p.is_heuristic() {
            pursuit_rows(spec, i)?;
        }
        if let PolicyKind::Conservative { .. } = p {
            let other = 1 - i;
            let mut per = Vec::new();
            for t2 in 0..ts.num_types(other) {
                let mut hyp = theta.clone();
                hyp.0[other] = t2;
                per.push(backward_pass(spec, &BeliefTable::degenerate(&ts, &hyp), 0)?);
            }
            pursuit_passes[i] = Some(per);
        }
    }

    let mut x = cfg.initial_state.clone();
    let mut states = vec![x.clone()];
    let mut actions = Vec::with_capacity(kk);
    let mut noise = Vec::with_capacity(kk);
    let mut belief_log = vec![beliefs.clone()];
    let mut stage_costs = Vec::with_capacity(kk + 1);
    let mut cumulative: Vec<Vec<f64>> = Vec::with_capacity(kk + 1);
    let mut revealed_at = vec![None; np];
    let mut cache: HashMap<usize, Rc<RiccatiSolution>> = HashMap::new();

    for k in 0..kk {
        // Passes per player, replanned at the start of each block.
        let mut passes: Vec<Option<Rc<RiccatiSolution>>> = vec![None; np];
        for (i, p) in cfg.policies.iter().enumerate() {
            if let Some(t) = p.level() {
                let k0 = if t == 0 { k } else { (k / t) * t };
                if k0 == k && !cache.contains_key(&k0) {
                    cache.insert(k0, Rc::new(backward_pass(spec, &beliefs, k0)?));
                }
                passes[i] = Some(cache[&k0].clone());
            }
        }
        cache.retain(|k0, _| passes.iter().flatten().any(|p| p.from_stage == *k0));
        let reference_pass = passes[reference].clone().unwrap();

        let mut u: Vec<Option<DVector<f64>>> = vec![None; np];
        for i in 0..np {
            if let Some(pass) = &passes[i] {
                u[i] = Some(pass.equilibrium_action(k, &x, i, theta.of(i))?);
            }
        }
        let mut actual: Vec<Option<DVector<f64>>> = vec![None; np];
        for (i, p) in cfg.policies.iter().enumerate() {
            let m = spec.players[i].control_dim;
            match *p {
                PolicyKind::DirectFollowing => {
                    let (own, other) = pursuit_rows(spec, i)?;
                    let mut drift = spec.a(k, theta) * &x;
                    for (j, uj) in u.iter().enumerate() {
                        if let Some(uj) = uj {
                            drift += spec.b(k, j, theta.of(j)) * uj;
                        }
                    }
                    let target = DVector::from_iterator(own.len(), other.iter().map(|&r| x[r]));
                    let rhs = target - DVector::from_iterator(own.len(), own.iter().map(|&r| drift[r]));
                    let b_own = spec.b(k, i, theta.of(i)).select_rows(own.iter());
                    if b_own.nrows() != b_own.ncols() {
                        return Err(Error::invalid("direct following needs a square pursuer control map"));
                    }
                    let ui = b_own
                        .lu()
                        .solve(&rhs)
                        .ok_or_else(|| Error::invalid(format!("pursuer control map is singular at stage {k}")))?;
                    u[i] = Some(ui.clone());
                    actual[i] = Some(ui);
                }
                PolicyKind::Conservative { delta } => {
                    let other = 1 - i;
                    if revealed_at[i].is_none() {
                        let b = beliefs.marginal(i, theta.of(i), other)[theta.of(other)];
                        if 1.0 - b <= delta {
                            revealed_at[i] = Some(k);
                        }
                    }
                    let ui = if revealed_at[i].is_some() {
                        let marg = beliefs.marginal(i, theta.of(i), other);
                        let per = pursuit_passes[i].as_ref().unwrap();
                        let mut acc = DVector::zeros(m);
                        for (t2, pass) in per.iter().enumerate() {
                            if marg[t2] > 0.0 {
                                acc += pass.equilibrium_action(k, &x, i, theta.of(i))? * marg[t2];
                            }
                        }
                        acc
                    } else {
                        DVector::zeros(m)
                    };
                    u[i] = Some(ui.clone());
                    actual[i] = Some(ui);
                }
                _ => {}
            }
        }
        let u: Vec<DVector<f64>> = u.into_iter().map(Option::unwrap).collect();

        let costs: Vec<f64> = (0..np).map(|i| spec.stage_cost(k, i, theta.of(i), &x, &u)).collect::<Result<_>>()?;
        let w = spec.noise.sample(k, &mut rng);
        let x_next = spec.step_dynamics(k, &x, &u, theta, &w)?;

        let model = EpisodeModel {
            passes: (0..np).map(|i| passes[i].clone().unwrap_or_else(|| reference_pass.clone())).collect(),
            actual: &actual,
        };
        beliefs = update_table(&beliefs, spec, k, &x, &x_next, &model, &frozen)?;

        let prev = cumulative.last().cloned().unwrap_or_else(|| vec![0.0; np]);
        cumulative.push(prev.iter().zip(&costs).map(|(a, b)| a + b).collect());
        stage_costs.push(costs);
        actions.push(u);
        noise.push(w);
        x = x_next;
        states.push(x.clone());
        belief_log.push(beliefs.clone());
    }

    let terminal: Vec<f64> = (0..np).map(|i| spec.terminal_cost(i, theta.of(i), &x)).collect();
    let prev = cumulative.last().cloned().unwrap_or_else(|| vec![0.0; np]);
    cumulative.push(prev.iter().zip(&terminal).map(|(a, b)| a + b).collect());
    stage_costs.push(terminal);

    Ok(Trajectory {
        seed: cfg.seed,
        true_types: theta.clone(),
        states,
        actions,
        noise,
        beliefs: belief_log,
        stage_costs,
        cumulative,
        revealed_at,
    })
}

/// Plays an episode in which `pursuer` follows a heuristic `kind`.
pub fn run_heuristic_pursuer(spec: &GameSpec, cfg: &EpisodeConfig, pursuer: usize, kind: PolicyKind) -> Result<Trajectory> {
    if !kind.is_heuristic() {
        return Err(Error::invalid("run_heuristic_pursuer expects direct_following or conservative"));
    }
    let mut cfg = cfg.clone();
    cfg.policies[pursuer] = kind;
    run_episode(spec, &cfg)
}

/// Mean, variance and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance; 0 for a single sample.
    pub variance: f64,
    pub std_error: f64,
}

impl SummaryStats {
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::invalid("no samples"));
        }
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        Ok(SummaryStats { n, mean, variance, std_error: (variance / n as f64).sqrt() })
    }
}

/// Independent replications with seeds `seed_of(rep)`.
pub fn monte_carlo(spec: &GameSpec, cfg: &EpisodeConfig, n_reps: usize, seed_of: impl Fn(u64) -> u64) -> Result<Vec<Trajectory>> {
    if n_reps == 0 {
        return Err(Error::invalid("n_reps must be at least 1"));
    }
    (0..n_reps as u64)
        .map(|rep| {
            let seed = seed_of(rep);
            let mut c = cfg.clone();
            c.seed = seed;
            run_episode(spec, &c).map_err(|e| Error::Episode { seed, source: Box::new(e) })
        })
        .collect()
}

/// Realized cost of `player` of type `ty` along a rollout of a single
/// frozen-belief pass, with the opponents' types redrawn from the belief
/// at every stage.
///
/// This is the process whose expected cost the level-0 value function
/// describes: the recursion averages over opponent types afresh at each
/// stage rather than conditioning on one fixed draw.
pub fn frozen_belief_rollout<R: rand::Rng>(
    spec: &GameSpec,
    solution: &RiccatiSolution,
    player: usize,
    ty: usize,
    x0: &DVector<f64>,
    rng: &mut R,
) -> Result<f64> {
    let ts = spec.type_space();
    let row = solution.beliefs.row(player, ty);
    let cdf: Vec<f64> = row
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let mut x = x0.clone();
    let mut total = 0.0;
    for k in solution.from_stage..spec.horizon {
        let r: f64 = rng.random();
        let o = cdf.iter().position(|&c| r < c).unwrap_or(cdf.len() - 1);
        let theta = ts.with_opponents(player, ty, o);
        let u: Vec<DVector<f64>> =
            (0..spec.num_players()).map(|j| solution.equilibrium_action(k, &x, j, theta.of(j))).collect::<Result<_>>()?;
        total += spec.stage_cost(k, player, ty, &x, &u)?;
        let w = spec.noise.sample(k, rng);
        x = spec.step_dynamics(k, &x, &u, &theta, &w)?;
    }
    Ok(total + spec.terminal_cost(player, ty, &x))
}

/// Noise-free rollout of one pass with every player at its true type.
pub fn nominal_rollout(spec: &GameSpec, solution: &RiccatiSolution, theta: &JointType, x0: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
    let mut x = x0.clone();
    let mut out = vec![x.clone()];
    for k in solution.from_stage..spec.horizon {
        let u: Vec<DVector<f64>> =
            (0..spec.num_players()).map(|j| solution.equilibrium_action(k, &x, j, theta.of(j))).collect::<Result<_>>()?;
        x = spec.mean_successor(k, &x, &u, theta)?;
        out.push(x.clone());
    }
    Ok(out)
}

/// Recomputes every stage cost from a trajectory's states and actions.
pub fn recompute_costs(spec: &GameSpec, traj: &Trajectory) -> Result<Vec<Vec<f64>>> {
    let kk = traj.horizon();
    let np = spec.num_players();
    let mut out = Vec::with_capacity(kk + 1);
    for k in 0..kk {
        out.push((0..np).map(|i| spec.stage_cost(k, i, traj.true_types.of(i), &traj.states[k], &traj.actions[k])).collect::<Result<_>>()?);
    }
    out.push((0..np).map(|i| spec.terminal_cost(i, traj.true_types.of(i), &traj.states[kk])).collect());
    Ok(out)
}
