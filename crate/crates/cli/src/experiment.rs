//! Expands a configuration into episodes, runs them and computes metrics.

use deceptive_lq::belief::BeliefTable;
use deceptive_lq::game::{GameSpec, JointType};
use deceptive_lq::metrics::{complete_info_costs, price_of_deception, ReplicationMetrics};
use deceptive_lq::rng::derive_seed;
use deceptive_lq::scenario::{evader_final_distance, pursuer_final_distance, PursuitEvasionParams, EVADER};
use deceptive_lq::simulator::{run_episode, EpisodeConfig, PolicyKind, Trajectory};
use nalgebra::DVector;
use rayon::prelude::*;

use crate::config::{Cell, ExperimentConfig};
use crate::CliError;

/// A cell with its game built and its inputs resolved.
pub struct PreparedCell {
    pub cell: Cell,
    pub spec: GameSpec,
    pub params: Option<PursuitEvasionParams>,
    pub truth: JointType,
    pub initial_state: DVector<f64>,
    pub beliefs: BeliefTable,
    /// Every player plays an equilibrium policy with all types known, so
    /// replanning cannot change the outcome.
    pub strongly_time_consistent: bool,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Vec<PreparedCell>, CliError> {
    cfg.cells()
        .into_iter()
        .map(|cell| {
            let spec = cfg.build_game(&cell)?;
            if cell.policies.len() != spec.num_players() {
                return Err(CliError::Config(format!("policies needs {} entries", spec.num_players())));
            }
            let params = cfg.scenario_params(&cell)?;
            let truth = cfg.true_types(&cell, &spec)?;
            let initial_state = cfg.initial_state(&cell, &spec)?;
            let beliefs = cfg.initial_beliefs(&cell, &spec, &truth)?;
            let all_complete = cell.policies.iter().all(|p| *p == PolicyKind::CompleteInfo);
            let degenerate_equilibrium = beliefs.is_degenerate()
                && cell.policies.iter().all(|p| matches!(p, PolicyKind::Level { .. } | PolicyKind::FrozenBelief { .. } | PolicyKind::CompleteInfo));
            Ok(PreparedCell {
                strongly_time_consistent: all_complete || degenerate_equilibrium,
                cell,
                spec,
                params,
                truth,
                initial_state,
                beliefs,
            })
        })
        .collect()
}

pub struct Replication {
    pub cell: usize,
    pub rep: usize,
    pub trajectory: Trajectory,
    pub metrics: ReplicationMetrics,
    /// Realized costs of the same seed with every type public.
    pub complete_costs: Option<Vec<f64>>,
}

/// Seed of one episode. It depends on the replication index and not on the
/// cell, so every cell of a sweep sees the same noise sequences.
pub fn episode_seed(config_key: u64, rep: usize) -> u64 {
    derive_seed(config_key, 0, rep as u64)
}

/// Runs `reps` episodes per cell on the current rayon pool. Results come
/// back ordered by cell, then replication.
pub fn run_all(cfg: &ExperimentConfig, cells: &[PreparedCell], reps: usize, config_key: u64) -> Result<Vec<Replication>, CliError> {
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..reps).map(move |r| (c, r))).collect();
    jobs.par_iter()
        .map(|&(c, rep)| {
            let pc = &cells[c];
            let seed = episode_seed(config_key, rep);
            let ep = EpisodeConfig {
                true_types: pc.truth.clone(),
                initial_state: pc.initial_state.clone(),
                initial_beliefs: pc.beliefs.clone(),
                policies: pc.cell.policies.clone(),
                seed,
            };
            let solver = |e| CliError::Solver(format!("cell {c}, replication {rep}, seed {seed}: {e}"));
            let trajectory = run_episode(&pc.spec, &ep).map_err(solver)?;
            let mut metrics = ReplicationMetrics::from_trajectory(&trajectory, cfg.metrics.delta).map_err(|e| CliError::Config(format!("metrics: {e}")))?;
            if let Some(p) = &pc.params {
                let last = trajectory.states.last().unwrap();
                metrics.x2_fd = Some(evader_final_distance(p, last, pc.truth.of(EVADER)));
                metrics.x1_fd = Some(pursuer_final_distance(last));
            }
            let mut complete_costs = None;
            if let Some(eta) = &cfg.metrics.eta {
                let complete = complete_info_costs(&pc.spec, &pc.truth, &pc.initial_state, &[seed], 0).map_err(solver)?.remove(0);
                metrics.price_of_deception =
                    Some(price_of_deception(&metrics.total_costs, &complete, cfg.metrics.eta0, eta).map_err(|e| CliError::Config(format!("metrics: {e}")))?);
                complete_costs = Some(complete);
            }
            Ok(Replication { cell: c, rep, trajectory, metrics, complete_costs })
        })
        .collect()
}
