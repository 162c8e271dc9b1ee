use nalgebra::DMatrix;

use super::{GameSpec, JointType};
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub struct ControllabilityEntry {
    pub player: usize,
    pub joint_type: JointType,
    /// `k` in `H_i^k`, i.e. the number of control stages stacked.
    pub stage: usize,
    pub rank: usize,
    pub required: usize,
}

impl ControllabilityEntry {
    pub fn full_rank(&self) -> bool {
        self.rank == self.required
    }
}

#[derive(Debug, Clone)]
pub struct ControllabilityReport {
    pub entries: Vec<ControllabilityEntry>,
    /// Per `(player, joint type)`: first stage at which `H` has full rank.
    pub first_full: Vec<(usize, JointType, Option<usize>)>,
    pub controllable: bool,
    /// Whether the test was restricted to each player's own state block.
    pub local: bool,
}

impl ControllabilityReport {
    pub fn player_controllable(&self, player: usize) -> bool {
        self.first_full.iter().filter(|(p, _, _)| *p == player).all(|(p, theta, first)| {
            first.is_some_and(|f| {
                self.entries
                    .iter()
                    .filter(|e| e.player == *p && &e.joint_type == theta && e.stage >= f)
                    .all(ControllabilityEntry::full_rank)
            })
        })
    }
}

/// Rank test of the stacked reachability matrices
/// `H_i^k(theta) = [B^{k-1}, A^{k-1} B^{k-2}, ..., A^{k-1}...A^1 B^0]`.
///
/// Without a state partition every `H` must reach rank `n`. With one, each
/// player's `H` is restricted to the rows of the state block it owns, since
/// a player cannot be expected to steer another player's local state.
pub fn check_controllability(spec: &GameSpec) -> ControllabilityReport {
    let ts = spec.type_space();
    let mut entries = Vec::new();
    let mut first_full = Vec::new();
    let local = spec.state_partition.is_some();

    for i in 0..spec.num_players() {
        let rows: Vec<usize> = match &spec.state_partition {
            Some(parts) => parts[i].clone().collect(),
            None => (0..spec.state_dim).collect(),
        };
        let m = spec.players[i].control_dim;
        for theta in ts.joint_types() {
            let mut h: DMatrix<f64> = DMatrix::zeros(spec.state_dim, 0);
            let mut first = None;
            for k in 1..=spec.horizon {
                // H^{k} = [B^{k-1}, A^{k-1} H^{k-1}]
                let b = spec.b(k - 1, i, theta.of(i));
                let shifted = if k == 1 { h.clone() } else { spec.a(k - 1, &theta) * &h };
                let mut next = DMatrix::zeros(spec.state_dim, m + shifted.ncols());
                next.columns_mut(0, m).copy_from(b);
                next.columns_mut(m, shifted.ncols()).copy_from(&shifted);
                h = next;
                let sub = h.select_rows(rows.iter());
                let rank = linalg::numerical_rank(&sub);
                if rank == rows.len() && first.is_none() {
                    first = Some(k);
                }
                entries.push(ControllabilityEntry { player: i, joint_type: theta.clone(), stage: k, rank, required: rows.len() });
            }
            first_full.push((i, theta, first));
        }
    }

    let mut report = ControllabilityReport { entries, first_full, controllable: false, local };
    report.controllable = (0..spec.num_players()).all(|i| report.player_controllable(i));
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::test_support::identity_game;

    #[test]
    fn identity_input_is_controllable_in_one_stage() {
        let g = identity_game(2, 2, 3, 0.0);
        let r = check_controllability(&g);
        assert!(r.controllable);
        assert!(r.first_full.iter().all(|(_, _, f)| *f == Some(1)));
    }

    #[test]
    fn zero_input_player_is_not_controllable() {
        let mut g = identity_game(2, 2, 3, 0.0);
        for b in g.players[1].types[0].b.iter_mut() {
            *b = DMatrix::zeros(2, 2);
        }
        let r = check_controllability(&g);
        assert!(r.player_controllable(0));
        assert!(!r.player_controllable(1));
        assert!(!r.controllable);
        assert!(r.entries.iter().filter(|e| e.player == 1).all(|e| e.rank == 0));
    }

    #[test]
    fn single_column_input_needs_two_stages_through_rotation() {
        let mut g = identity_game(1, 2, 3, 0.0);
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        g.dynamics = crate::game::Dynamics::Shared(vec![rot; 3]);
        g.players[0].control_dim = 1;
        let t = &mut g.players[0].types[0];
        t.b = vec![DMatrix::from_row_slice(2, 1, &[1.0, 0.0]); 3];
        for fk in t.f.iter_mut() {
            fk[0] = DMatrix::zeros(1, 1);
        }
        let r = check_controllability(&g);
        assert_eq!(r.first_full[0].2, Some(2));
        assert!(r.controllable);
    }
}
