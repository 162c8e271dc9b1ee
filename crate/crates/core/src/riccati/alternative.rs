//! Independent recomputations of the value matrices, used as oracles.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::game::{Dynamics, GameSpec};
use crate::linalg;

use super::pass::RiccatiSolution;
use super::PD_TOLERANCE;

fn r_inverse(spec: &GameSpec, k: usize, i: usize, l: usize, s_next: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let b = spec.b(k, i, l);
    let r = spec.f(k, i, i, l) + b.transpose() * s_next * b;
    let (ok, min) = linalg::is_positive_definite(&r, PD_TOLERANCE);
    if !ok {
        return Err(Error::NoEquilibrium { stage: k, player: i, type_index: l, min_eigenvalue: min });
    }
    r.cholesky().map(|c| c.inverse()).ok_or(Error::NoEquilibrium { stage: k, player: i, type_index: l, min_eigenvalue: min })
}

/// `S` recomputed by eliminating player `i`'s own gain through
/// `G = I - B R^{-1} B' S+`, with the opponents' gains taken from
/// `solution`.
///
/// Writing `At = A + sum_{j != i} B_j K_j` and `Ab = E[At]`:
///
/// ```text
/// S = D + Ab' G' S+ Ab + E[(At - Ab)' S+ (At - Ab)] + E[sum_{j != i} K_j' F_ij K_j]
/// ```
///
/// The dispersion term vanishes when `At` does not depend on the
/// opponents' types, which recovers [`alternative_s_literal`]. The result
/// is indexed `[k - from_stage][i][l]` for `k` in `from_stage..=K`.
pub fn alternative_s(spec: &GameSpec, solution: &RiccatiSolution) -> Result<Vec<Vec<Vec<DMatrix<f64>>>>> {
    recompute(spec, solution, false)
}

/// The same recursion with the expectation taken of `At' G' S+ At`
/// directly. Exact only when `At` is the same for every opponent type
/// profile that carries weight.
pub fn alternative_s_literal(spec: &GameSpec, solution: &RiccatiSolution) -> Result<Vec<Vec<Vec<DMatrix<f64>>>>> {
    recompute(spec, solution, true)
}

fn recompute(spec: &GameSpec, solution: &RiccatiSolution, literal: bool) -> Result<Vec<Vec<Vec<DMatrix<f64>>>>> {
    let kk = spec.horizon;
    let from = solution.from_stage;
    let ts = spec.type_space();
    let np = spec.num_players();
    let n = spec.state_dim;
    let beliefs = &solution.beliefs;

    let mut out: Vec<Vec<Vec<DMatrix<f64>>>> = vec![Vec::new(); kk - from + 1];
    out[kk - from] = (0..np).map(|i| (0..ts.num_types(i)).map(|l| linalg::symmetrize(spec.d(kk, i, l))).collect()).collect();

    for k in (from..kk).rev() {
        let mut s_k = Vec::with_capacity(np);
        for i in 0..np {
            let mut si = Vec::new();
            for l in 0..ts.num_types(i) {
                let sp = &out[k + 1 - from][i][l];
                let b = spec.b(k, i, l);
                let g = DMatrix::identity(n, n) - b * r_inverse(spec, k, i, l, sp)? * b.transpose() * sp;
                let gts = g.transpose() * sp;

                let mut tilde = Vec::new();
                let mut ctrl = Vec::new();
                for (o, &p) in beliefs.row(i, l).iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    let theta = ts.with_opponents(i, l, o);
                    let mut at = spec.a(k, &theta).clone();
                    let mut c = DMatrix::zeros(n, n);
                    for j in (0..np).filter(|&j| j != i) {
                        let kj = solution.feedback(k, j, theta.of(j));
                        at += spec.b(k, j, theta.of(j)) * kj;
                        c += kj.transpose() * spec.f(k, i, j, l) * kj;
                    }
                    tilde.push((p, at));
                    ctrl.push((p, c));
                }
                let ectrl = linalg::weighted_mean(ctrl.iter().map(|(p, m)| (*p, m)), n, n);
                let s = if literal {
                    let quad: Vec<(f64, DMatrix<f64>)> = tilde.iter().map(|(p, at)| (*p, at.transpose() * &gts * at)).collect();
                    spec.d(k, i, l) + linalg::weighted_mean(quad.iter().map(|(p, m)| (*p, m)), n, n) + ectrl
                } else {
                    let ab = linalg::weighted_mean(tilde.iter().map(|(p, m)| (*p, m)), n, n);
                    let disp: Vec<(f64, DMatrix<f64>)> = tilde
                        .iter()
                        .map(|(p, at)| {
                            let dev = at - &ab;
                            (*p, dev.transpose() * sp * dev)
                        })
                        .collect();
                    spec.d(k, i, l) + ab.transpose() * &gts * &ab + linalg::weighted_mean(disp.iter().map(|(p, m)| (*p, m)), n, n) + ectrl
                };
                si.push(linalg::symmetrize(&s));
            }
            s_k.push(si);
        }
        out[k - from] = s_k;
    }
    Ok(out)
}

/// Whether `player` has decoupled dynamics and a decoupled cost with
/// respect to the game's state partition, at every stage and type.
///
/// Besides the structural zeros on `player`'s own rows and columns of
/// `A`, `B_i`, `D_i` and `F_ij`, no other player's input may reach
/// `player`'s state block; otherwise the block is not self-contained.
pub fn is_decoupled(spec: &GameSpec, player: usize) -> bool {
    let Some(parts) = &spec.state_partition else { return false };
    let own = parts[player].clone();
    let outside: Vec<usize> = (0..spec.state_dim).filter(|c| !own.contains(c)).collect();
    let ts = spec.type_space();

    for k in 0..spec.horizon {
        let a_mats: Vec<&DMatrix<f64>> = match &spec.dynamics {
            Dynamics::Shared(a) => vec![&a[k]],
            Dynamics::PerJointType(a) => a[k].iter().collect(),
        };
        for a in &a_mats {
            if own.clone().any(|r| outside.iter().any(|&c| a[(r, c)] != 0.0 || a[(c, r)] != 0.0)) {
                return false;
            }
        }
        // The own block may only depend on the player's own type.
        for theta in ts.joint_types() {
            let base = ts.with_opponents(player, theta.of(player), 0);
            let a = spec.a(k, &theta);
            let a0 = spec.a(k, &base);
            if own.clone().any(|r| own.clone().any(|c| a[(r, c)] != a0[(r, c)])) {
                return false;
            }
        }
        for j in 0..spec.num_players() {
            for l in 0..ts.num_types(j) {
                let b = spec.b(k, j, l);
                let zero_rows: Vec<usize> = if j == player { outside.clone() } else { own.clone().collect() };
                if zero_rows.iter().any(|&r| b.row(r).iter().any(|&v| v != 0.0)) {
                    return false;
                }
            }
        }
    }
    for k in 0..=spec.horizon {
        for l in 0..ts.num_types(player) {
            let d = spec.d(k, player, l);
            for r in 0..spec.state_dim {
                for c in 0..spec.state_dim {
                    if !(own.contains(&r) && own.contains(&c)) && d[(r, c)] != 0.0 {
                        return false;
                    }
                }
            }
            for j in (0..spec.num_players()).filter(|&j| j != player) {
                if spec.f(k, player, j, l).iter().any(|&v| v != 0.0) {
                    return false;
                }
            }
        }
    }
    true
}

/// Single-player LQ control on `player`'s own state block.
#[derive(Debug, Clone)]
pub struct DecoupledSolution {
    /// `S_bar`, `N_bar` for stages `0..=K`.
    pub s: Vec<DMatrix<f64>>,
    pub n: Vec<DVector<f64>>,
    /// Feedback on the own block (`m_i x n_i`) and feedforward, stages `0..K`.
    pub feedback: Vec<DMatrix<f64>>,
    pub feedforward: Vec<DVector<f64>>,
}

/// The recursion a decoupled player degenerates to:
///
/// ```text
/// R = F_ii + B' S+ B,  G' = I - S+ B R^{-1} B'
/// S = A' G' S+ A + D,  N = A' G' N+ - 2 D x_d
/// u = -R^{-1} B' S+ A x - 1/2 R^{-1} B' N+
/// ```
///
/// with every matrix restricted to the player's state block.
pub fn decoupled_lqr(spec: &GameSpec, player: usize, ty: usize) -> Result<DecoupledSolution> {
    if !is_decoupled(spec, player) {
        return Err(Error::invalid(format!("player {player} is not decoupled")));
    }
    let own: Vec<usize> = spec.state_partition.as_ref().unwrap()[player].clone().collect();
    let ni = own.len();
    let kk = spec.horizon;
    let theta = spec.type_space().with_opponents(player, ty, 0);
    let block = |m: &DMatrix<f64>| m.select_rows(own.iter()).select_columns(own.iter());
    let sub = |v: &DVector<f64>| DVector::from_iterator(ni, own.iter().map(|&r| v[r]));

    let mut s = vec![DMatrix::zeros(ni, ni); kk + 1];
    let mut n = vec![DVector::zeros(ni); kk + 1];
    let mut feedback = vec![DMatrix::zeros(0, 0); kk];
    let mut feedforward = vec![DVector::zeros(0); kk];
    s[kk] = block(spec.d(kk, player, ty));
    n[kk] = &s[kk] * sub(spec.reference(kk, player, ty)) * -2.0;
    for k in (0..kk).rev() {
        let a = block(spec.a(k, &theta));
        let b = spec.b(k, player, ty).select_rows(own.iter());
        let sp = &s[k + 1];
        let r = spec.f(k, player, player, ty) + b.transpose() * sp * &b;
        let (ok, min) = linalg::is_positive_definite(&r, PD_TOLERANCE);
        if !ok {
            return Err(Error::NoEquilibrium { stage: k, player, type_index: ty, min_eigenvalue: min });
        }
        let rinv = r.clone().try_inverse().ok_or(Error::NoEquilibrium { stage: k, player, type_index: ty, min_eigenvalue: min })?;
        let gt = DMatrix::identity(ni, ni) - sp * &b * &rinv * b.transpose();
        let d = block(spec.d(k, player, ty));
        feedback[k] = -(&rinv * b.transpose() * sp * &a);
        feedforward[k] = -(&rinv * b.transpose() * &n[k + 1]) * 0.5;
        let s_new = a.transpose() * &gt * sp * &a + &d;
        n[k] = a.transpose() * &gt * &n[k + 1] - &d * sub(spec.reference(k, player, ty)) * 2.0;
        s[k] = linalg::symmetrize(&s_new);
    }
    Ok(DecoupledSolution { s, n, feedback, feedforward })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::BeliefTable;
    use crate::game::test_support::identity_game;
    use crate::riccati::backward_pass;

    #[test]
    fn literal_and_corrected_forms_agree_for_type_free_opponents() {
        let g = identity_game(2, 2, 4, 0.1);
        let sol = backward_pass(&g, &BeliefTable::uniform(&g.type_space()), 0).unwrap();
        let a = alternative_s(&g, &sol).unwrap();
        let b = alternative_s_literal(&g, &sol).unwrap();
        for k in 0..=4 {
            for i in 0..2 {
                assert!(linalg::relative_frobenius(&a[k][i][0], &b[k][i][0]) < 1e-13);
                assert!(linalg::relative_frobenius(&a[k][i][0], sol.s(k, i, 0)) < 1e-12);
            }
        }
        assert_eq!(a[4][0][0], g.players[0].types[0].d[4]);
    }

    #[test]
    fn identity_game_players_are_not_decoupled_without_partition() {
        let mut g = identity_game(2, 2, 2, 0.1);
        assert!(!is_decoupled(&g, 0));
        g.state_partition = Some(vec![0..1, 1..2]);
        // every player actuates every coordinate
        assert!(!is_decoupled(&g, 0));
    }
}
