//! Deception-assessment metrics computed from trajectories.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::belief::BeliefTable;
use crate::error::{Error, Result};
use crate::game::{GameSpec, JointType};
use crate::simulator::{run_episode, EpisodeConfig, PolicyKind, SummaryStats, Trajectory};

/// First stage from which the belief mismatch `1 - l^k` stays at or below
/// `delta` for good. `belief_seq` holds `l^0..l^K`; `K + 1` means the
/// truth was never revealed. Transient dips below `delta` do not count.
pub fn truth_revealing_stage(belief_seq: &[f64], delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1], got {delta}")));
    }
    if belief_seq.is_empty() {
        return Err(Error::invalid("empty belief sequence"));
    }
    let mut first = belief_seq.len();
    for (k, l) in belief_seq.iter().enumerate().rev() {
        if 1.0 - l <= delta {
            first = k;
        } else {
            break;
        }
    }
    Ok(first)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeceivabilityVerdict {
    /// Estimated `Pr(k_tr < k_tilde)`, one per initial belief.
    pub probabilities: Vec<f64>,
    pub max_probability: f64,
    /// `true` when every estimate is at most `epsilon`; otherwise the
    /// type is learnable.
    pub deceivable: bool,
}

/// `samples[b]` are the truth-revealing stages observed under the `b`-th
/// initial belief of the grid.
pub fn deceivability(samples: &[Vec<usize>], k_tilde: usize, epsilon: f64) -> Result<DeceivabilityVerdict> {
    if samples.is_empty() || samples.iter().any(Vec::is_empty) {
        return Err(Error::invalid("deceivability needs samples for every initial belief"));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::invalid("epsilon must lie in [0, 1]"));
    }
    let probabilities: Vec<f64> =
        samples.iter().map(|s| s.iter().filter(|&&k| k < k_tilde).count() as f64 / s.len() as f64).collect();
    let max_probability = probabilities.iter().cloned().fold(0.0, f64::max);
    Ok(DeceivabilityVerdict { deceivable: max_probability <= epsilon, probabilities, max_probability })
}

/// `(sum eta_i V_hat_i + eta_0) / (sum eta_i V_bar_i + eta_0)`, with
/// `V_hat` the complete-information costs.
pub fn price_of_deception(v_incomplete: &[f64], v_complete: &[f64], eta0: f64, eta: &[f64]) -> Result<f64> {
    if !(eta0 > 0.0) {
        return Err(Error::invalid("eta0 must be positive"));
    }
    if eta.len() != v_incomplete.len() || eta.len() != v_complete.len() {
        return Err(Error::invalid("one weight per player"));
    }
    if eta.iter().any(|e| !(0.0..=1.0).contains(e)) || (eta.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("weights must lie in [0, 1] and sum to 1"));
    }
    let num: f64 = eta.iter().zip(v_complete).map(|(e, v)| e * v).sum::<f64>() + eta0;
    let den: f64 = eta.iter().zip(v_incomplete).map(|(e, v)| e * v).sum::<f64>() + eta0;
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReachCapture {
    /// Estimated `Pr(x2_fd >= threshold)`.
    pub p_target_missed: f64,
    /// Estimated `Pr(x1_fd >= threshold)`.
    pub p_evader_escaped: f64,
    pub target_reachable: bool,
    pub evader_capturable: bool,
}

/// Empirical reachability and capturability from endpoint distances
/// (evader to target, pursuer to evader).
pub fn reach_capture(target_distances: &[f64], capture_distances: &[f64], threshold: f64, epsilon: f64) -> Result<ReachCapture> {
    if target_distances.is_empty() || capture_distances.is_empty() {
        return Err(Error::invalid("reach_capture needs at least one trajectory"));
    }
    let frac = |xs: &[f64]| xs.iter().filter(|&&d| d >= threshold).count() as f64 / xs.len() as f64;
    let p_target_missed = frac(target_distances);
    let p_evader_escaped = frac(capture_distances);
    Ok(ReachCapture {
        p_target_missed,
        p_evader_escaped,
        target_reachable: p_target_missed <= epsilon,
        evader_capturable: p_evader_escaped <= epsilon,
    })
}

/// Euclidean distance between two equally sized blocks of the final state.
pub fn block_distance(x: &DVector<f64>, a: &[usize], b: &[usize]) -> f64 {
    a.iter().zip(b).map(|(&i, &j)| (x[i] - x[j]).powi(2)).sum::<f64>().sqrt()
}

/// Distance of a block of the final state from a fixed point.
pub fn point_distance(x: &DVector<f64>, rows: &[usize], point: &[f64]) -> f64 {
    rows.iter().zip(point).map(|(&i, p)| (x[i] - p).powi(2)).sum::<f64>().sqrt()
}

/// Mean realized total cost per player when every type is public, over
/// the given seeds.
pub fn complete_info_baseline(
    spec: &GameSpec,
    true_types: &JointType,
    initial_state: &DVector<f64>,
    seeds: &[u64],
    level: usize,
) -> Result<Vec<f64>> {
    if seeds.is_empty() {
        return Err(Error::invalid("no seeds"));
    }
    let costs = complete_info_costs(spec, true_types, initial_state, seeds, level)?;
    let np = spec.num_players();
    Ok((0..np).map(|i| costs.iter().map(|c| c[i]).sum::<f64>() / seeds.len() as f64).collect())
}

/// Per-seed total costs of the complete-information episodes.
pub fn complete_info_costs(
    spec: &GameSpec,
    true_types: &JointType,
    initial_state: &DVector<f64>,
    seeds: &[u64],
    level: usize,
) -> Result<Vec<Vec<f64>>> {
    let ts = spec.type_space();
    let np = spec.num_players();
    seeds
        .iter()
        .map(|&seed| {
            let cfg = EpisodeConfig {
                true_types: true_types.clone(),
                initial_state: initial_state.clone(),
                initial_beliefs: BeliefTable::degenerate(&ts, true_types),
                policies: vec![PolicyKind::Level { t: level }; np],
                seed,
            };
            let t = run_episode(spec, &cfg).map_err(|e| Error::Episode { seed, source: Box::new(e) })?;
            Ok((0..np).map(|i| t.total_cost(i)).collect())
        })
        .collect()
}

/// Metrics of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationMetrics {
    pub seed: u64,
    /// `k_tr[i][j]` for `i != j`; the diagonal is unused and set to 0.
    pub k_tr: Vec<Vec<usize>>,
    pub total_costs: Vec<f64>,
    /// Distance from each player's own state block to its own target, if
    /// one is defined.
    pub x2_fd: Option<f64>,
    pub x1_fd: Option<f64>,
    pub price_of_deception: Option<f64>,
}

impl ReplicationMetrics {
    pub fn from_trajectory(traj: &Trajectory, delta: f64) -> Result<Self> {
        let np = traj.true_types.0.len();
        let mut k_tr = vec![vec![0; np]; np];
        for (i, row) in k_tr.iter_mut().enumerate() {
            for (j, slot) in row.iter_mut().enumerate() {
                if i != j {
                    *slot = truth_revealing_stage(&traj.marginal_in_truth(i, j), delta)?;
                }
            }
        }
        Ok(ReplicationMetrics {
            seed: traj.seed,
            k_tr,
            total_costs: (0..np).map(|i| traj.total_cost(i)).collect(),
            x2_fd: None,
            x1_fd: None,
            price_of_deception: None,
        })
    }
}

/// Aggregates over replications of one experiment cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub replications: usize,
    /// Mean truth-revealing stage per ordered pair `[i][j]`.
    pub k_tr: Vec<Vec<SummaryStats>>,
    pub total_costs: Vec<SummaryStats>,
    pub x2_fd: Option<SummaryStats>,
    pub x1_fd: Option<SummaryStats>,
    /// Per-replication price of deception.
    pub price_of_deception: Option<SummaryStats>,
    /// Price of deception of the mean costs.
    pub price_of_deception_of_means: Option<f64>,
}

impl MetricsReport {
    pub fn from_replications(rows: &[ReplicationMetrics], complete_means: Option<(&[f64], f64, &[f64])>) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::invalid("no replications"))?;
        let np = first.total_costs.len();
        let stat = |f: &dyn Fn(&ReplicationMetrics) -> f64| SummaryStats::from_samples(&rows.iter().map(f).collect::<Vec<_>>());
        let mut k_tr = Vec::with_capacity(np);
        for i in 0..np {
            k_tr.push((0..np).map(|j| stat(&|r| r.k_tr[i][j] as f64)).collect::<Result<Vec<_>>>()?);
        }
        let total_costs = (0..np).map(|i| stat(&|r| r.total_costs[i])).collect::<Result<Vec<_>>>()?;
        let opt = |f: &dyn Fn(&ReplicationMetrics) -> Option<f64>| -> Result<Option<SummaryStats>> {
            let v: Option<Vec<f64>> = rows.iter().map(f).collect();
            v.map(|v| SummaryStats::from_samples(&v)).transpose()
        };
        let pod_of_means = match complete_means {
            Some((v_hat, eta0, eta)) => {
                let means: Vec<f64> = total_costs.iter().map(|s| s.mean).collect();
                Some(price_of_deception(&means, v_hat, eta0, eta)?)
            }
            None => None,
        };
        Ok(MetricsReport {
            replications: rows.len(),
            k_tr,
            total_costs,
            x2_fd: opt(&|r| r.x2_fd)?,
            x1_fd: opt(&|r| r.x1_fd)?,
            price_of_deception: opt(&|r| r.price_of_deception)?,
            price_of_deception_of_means: pod_of_means,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn truth_revealing_examples() {
        assert_eq!(truth_revealing_stage(&[0.2, 0.96, 0.97, 0.98], 0.05).unwrap(), 1);
        assert_eq!(truth_revealing_stage(&[0.2, 0.96, 0.90, 0.97], 0.05).unwrap(), 3);
        assert_eq!(truth_revealing_stage(&[0.2, 0.3, 0.5, 0.9], 0.05).unwrap(), 4);
        assert_eq!(truth_revealing_stage(&[1.0, 1.0], 0.05).unwrap(), 0);
        assert!(truth_revealing_stage(&[0.5], 0.0).is_err());
    }

    #[test]
    fn deceivability_examples() {
        let v = deceivability(&[vec![41; 10]], 41, 0.0).unwrap();
        assert!(v.deceivable);
        assert_eq!(v.max_probability, 0.0);
        let v = deceivability(&[vec![3, 3, 20, 20]], 10, 0.4).unwrap();
        assert_eq!(v.probabilities, vec![0.5]);
        assert!(!v.deceivable);
        assert!(deceivability(&[], 1, 0.1).is_err());
    }

    #[test]
    fn pod_examples() {
        assert_eq!(price_of_deception(&[3.0, 4.0], &[3.0, 4.0], 1.0, &[0.5, 0.5]).unwrap(), 1.0);
        let p = price_of_deception(&[4.0, 8.0], &[2.0, 4.0], 1e-12, &[0.5, 0.5]).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        assert!(price_of_deception(&[1.0], &[1.0], 0.0, &[1.0]).is_err());
        assert!(price_of_deception(&[1.0, 1.0], &[1.0, 1.0], 1.0, &[0.5, 0.6]).is_err());
    }

    #[test]
    fn reach_capture_examples() {
        let r = reach_capture(&[0.0], &[0.0], 0.1, 0.0).unwrap();
        assert!(r.target_reachable && r.evader_capturable);
        let r = reach_capture(&[2.0, 3.0], &[2.0, 3.0], 1.0, 0.5).unwrap();
        assert_eq!(r.p_target_missed, 1.0);
        assert!(!r.target_reachable);
    }

    proptest! {
        #[test]
        fn k_tr_is_monotone_in_delta(seq in prop::collection::vec(0.0f64..=1.0, 1..30), d1 in 0.01f64..1.0, d2 in 0.01f64..1.0) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(truth_revealing_stage(&seq, hi).unwrap() <= truth_revealing_stage(&seq, lo).unwrap());
        }

        #[test]
        fn pod_is_scale_invariant(v in prop::collection::vec(0.0f64..100.0, 4), eta0 in 0.01f64..10.0, w in 0.0f64..=1.0, c in 0.1f64..50.0) {
            let eta = [w, 1.0 - w];
            let a = price_of_deception(&v[..2], &v[2..], eta0, &eta).unwrap();
            let sc: Vec<f64> = v.iter().map(|x| x * c).collect();
            let b = price_of_deception(&sc[..2], &sc[2..], eta0 * c, &eta).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
            prop_assert!(a >= 0.0);
        }

        #[test]
        fn deceivability_is_antitone_in_epsilon(s in prop::collection::vec(0usize..42, 1..50), kt in 0usize..42, e1 in 0.0f64..=1.0, e2 in 0.0f64..=1.0) {
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            if deceivability(&[s.clone()], kt, lo).unwrap().deceivable {
                prop_assert!(deceivability(&[s], kt, hi).unwrap().deceivable);
            }
        }
    }
}
