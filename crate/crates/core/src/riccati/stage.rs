use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::belief::BeliefTable;
use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::linalg;

use super::{PD_TOLERANCE, RCOND_GUARD};

/// Row layout of the stacked action vector: player-major, then type, then
/// control coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageLayout {
    dims: Vec<usize>,
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl StageLayout {
    pub fn new(dims: Vec<usize>, sizes: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(dims.len());
        let mut acc = 0;
        for (m, s) in dims.iter().zip(&sizes) {
            offsets.push(acc);
            acc += m * s;
        }
        StageLayout { dims, sizes, offsets }
    }

    pub fn for_spec(spec: &GameSpec) -> Self {
        Self::new(spec.control_dims(), spec.type_space().sizes().to_vec())
    }

    pub fn total(&self) -> usize {
        self.offsets.last().map_or(0, |o| o + self.dims.last().unwrap() * self.sizes.last().unwrap())
    }

    /// Rows of `u_i(theta_i^l)`.
    pub fn block(&self, player: usize, ty: usize) -> Range<usize> {
        let start = self.offsets[player] + self.dims[player] * ty;
        start..start + self.dims[player]
    }

    /// Rows of every type of `player`.
    pub fn player_rows(&self, player: usize) -> Range<usize> {
        self.offsets[player]..self.offsets[player] + self.dims[player] * self.sizes[player]
    }
}

/// The stacked first-order conditions `-W0 u = W1 x + W2` of one stage.
#[derive(Debug, Clone)]
pub struct StageSystem {
    pub stage: usize,
    pub layout: StageLayout,
    pub w0: DMatrix<f64>,
    pub w1: DMatrix<f64>,
    pub w2: DVector<f64>,
    /// Compact `L_ij` (`N_i x N_j`), `None` on the diagonal.
    pub belief_matrices: Vec<Vec<Option<DMatrix<f64>>>>,
    /// `R_i(theta_i^l) = F_ii + B' S B`, indexed `[i][l]`.
    pub r: Vec<Vec<DMatrix<f64>>>,
}

impl StageSystem {
    /// Smallest eigenvalue of every `R`, indexed `[i][l]`.
    pub fn r_min_eigenvalues(&self) -> Vec<Vec<f64>> {
        self.r
            .iter()
            .map(|per| per.iter().map(|r| linalg::symmetric_eigen_extremes(r).0).collect())
            .collect()
    }

    /// Fails with `NoEquilibrium` on the first `R` that is not positive definite.
    pub fn check_definiteness(&self) -> Result<()> {
        for (i, per) in self.r.iter().enumerate() {
            for (l, r) in per.iter().enumerate() {
                let (ok, min) = linalg::is_positive_definite(r, PD_TOLERANCE);
                if !ok {
                    return Err(Error::NoEquilibrium { stage: self.stage, player: i, type_index: l, min_eigenvalue: min });
                }
            }
        }
        Ok(())
    }

    pub fn w0_rcond(&self) -> f64 {
        linalg::reciprocal_condition(&self.w0)
    }
}

/// Affine equilibrium gains `u_i(theta_i) = K x + g` for one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageGains {
    /// `[i][l]`, `m_i x n`.
    pub feedback: Vec<Vec<DMatrix<f64>>>,
    /// `[i][l]`, length `m_i`.
    pub feedforward: Vec<Vec<DVector<f64>>>,
}

impl StageGains {
    pub fn action(&self, player: usize, ty: usize, x: &DVector<f64>) -> DVector<f64> {
        &self.feedback[player][ty] * x + &self.feedforward[player][ty]
    }

    /// Stacked action vector in [`StageLayout`] order.
    pub fn stacked_action(&self, layout: &StageLayout, x: &DVector<f64>) -> DVector<f64> {
        let mut u = DVector::zeros(layout.total());
        for (i, per) in self.feedback.iter().enumerate() {
            for l in 0..per.len() {
                u.rows_mut(layout.block(i, l).start, layout.dims[i]).copy_from(&self.action(i, l, x));
            }
        }
        u
    }
}

/// Assembles `W0`, `W1`, `W2` at stage `k` from next-stage value
/// coefficients `s_next[i][l]`, `n_next[i][l]` and the frozen beliefs.
pub fn assemble_stage_system(
    spec: &GameSpec,
    k: usize,
    s_next: &[Vec<DMatrix<f64>>],
    n_next: &[Vec<DVector<f64>>],
    beliefs: &BeliefTable,
) -> Result<StageSystem> {
    if k >= spec.horizon {
        return Err(Error::StageOutOfRange { stage: k, horizon: spec.horizon });
    }
    let ts = spec.type_space();
    let np = spec.num_players();
    let n = spec.state_dim;
    if s_next.len() != np || n_next.len() != np {
        return Err(Error::invalid("value coefficients must cover every player"));
    }
    for i in 0..np {
        if s_next[i].len() != ts.num_types(i) || n_next[i].len() != ts.num_types(i) {
            return Err(Error::invalid(format!("value coefficients for player {i} must cover every type")));
        }
    }
    if beliefs.type_space() != ts {
        return Err(Error::invalid("belief table does not match the game's type space"));
    }

    let layout = StageLayout::for_spec(spec);
    let total = layout.total();
    let mut w0 = DMatrix::zeros(total, total);
    let mut w1 = DMatrix::zeros(total, n);
    let mut w2 = DVector::zeros(total);
    let mut r = Vec::with_capacity(np);
    let mut belief_matrices = vec![vec![None; np]; np];

    for i in 0..np {
        let mut r_i = Vec::with_capacity(ts.num_types(i));
        for l in 0..ts.num_types(i) {
            let b = spec.b(k, i, l);
            let bts = b.transpose() * &s_next[i][l];
            let rows = layout.block(i, l);
            let rm = spec.f(k, i, i, l) + &bts * b;
            w0.view_mut((rows.start, rows.start), (rows.len(), rows.len())).copy_from(&rm);
            r_i.push(rm);

            let row = beliefs.row(i, l);
            let a_mats: Vec<(f64, &DMatrix<f64>)> =
                (0..row.len()).map(|o| (row[o], spec.a(k, &ts.with_opponents(i, l, o)))).collect();
            let ea = linalg::weighted_mean(a_mats, n, n);
            w1.view_mut((rows.start, 0), (rows.len(), n)).copy_from(&(&bts * ea));
            w2.rows_mut(rows.start, rows.len()).copy_from(&(b.transpose() * &n_next[i][l] * 0.5));

            for j in (0..np).filter(|&j| j != i) {
                let marg = beliefs.marginal(i, l, j);
                for (lj, p) in marg.into_iter().enumerate() {
                    let cols = layout.block(j, lj);
                    let blk = &bts * spec.b(k, j, lj) * p;
                    w0.view_mut((rows.start, cols.start), (rows.len(), cols.len())).copy_from(&blk);
                }
            }
        }
        r.push(r_i);
        for j in (0..np).filter(|&j| j != i) {
            belief_matrices[i][j] = Some(beliefs.belief_matrix(i, j));
        }
    }

    Ok(StageSystem { stage: k, layout, w0, w1, w2, belief_matrices, r })
}

/// Solves `u = (-W0)^{-1} (W1 x + W2)` for the gain pair of every
/// `(player, type)`.
///
/// The solve is block-triangular at the player level: players are grouped
/// into strongly connected components of the "appears in my first-order
/// condition" graph and solved sinks first. A player whose conditions do
/// not involve anyone else is solved from its own blocks alone, so its
/// gains do not move, even in the last bit, when others' beliefs change.
pub fn solve_stage(sys: &StageSystem) -> Result<StageGains> {
    let rcond = sys.w0_rcond();
    if !(rcond > RCOND_GUARD) {
        return Err(Error::SingularCoupling { stage: sys.stage, rcond });
    }
    let np = sys.r.len();
    let n = sys.w1.ncols();
    let total = sys.layout.total();

    let mut rhs = DMatrix::zeros(total, n + 1);
    rhs.columns_mut(0, n).copy_from(&sys.w1);
    rhs.column_mut(n).copy_from(&sys.w2);

    let mut graph = DiGraph::<usize, ()>::new();
    let nodes: Vec<_> = (0..np).map(|i| graph.add_node(i)).collect();
    for i in 0..np {
        let ri = sys.layout.player_rows(i);
        for j in (0..np).filter(|&j| j != i) {
            let rj = sys.layout.player_rows(j);
            let blk = sys.w0.view((ri.start, rj.start), (ri.len(), rj.len()));
            if blk.iter().any(|&v| v != 0.0) {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }

    let mut solution: DMatrix<f64> = DMatrix::zeros(total, n + 1);
    let mut solved = vec![false; np];
    // tarjan_scc yields components in reverse topological order: every
    // component a player depends on comes first.
    for comp in tarjan_scc(&graph) {
        let mut players: Vec<usize> = comp.iter().map(|&v| graph[v]).collect();
        players.sort_unstable();
        let idx: Vec<usize> = players.iter().flat_map(|&p| sys.layout.player_rows(p)).collect();
        let a = -sys.w0.select_rows(idx.iter()).select_columns(idx.iter());
        let mut b = rhs.select_rows(idx.iter());
        for j in (0..np).filter(|j| solved[*j]) {
            let rj = sys.layout.player_rows(j);
            let coupling = sys.w0.select_rows(idx.iter()).columns(rj.start, rj.len()).into_owned();
            if coupling.iter().any(|&v| v != 0.0) {
                b += coupling * solution.rows(rj.start, rj.len());
            }
        }
        let x = a.lu().solve(&b).ok_or(Error::SingularCoupling { stage: sys.stage, rcond })?;
        for (r, &row) in idx.iter().enumerate() {
            solution.row_mut(row).copy_from(&x.row(r));
        }
        for p in players {
            solved[p] = true;
        }
    }

    let mut feedback = Vec::with_capacity(np);
    let mut feedforward = Vec::with_capacity(np);
    for i in 0..np {
        let types = sys.r[i].len();
        let mut fb = Vec::with_capacity(types);
        let mut ff = Vec::with_capacity(types);
        for l in 0..types {
            let rows = sys.layout.block(i, l);
            fb.push(solution.view((rows.start, 0), (rows.len(), n)).into_owned());
            ff.push(solution.view((rows.start, n), (rows.len(), 1)).column(0).into_owned());
        }
        feedback.push(fb);
        feedforward.push(ff);
    }
    Ok(StageGains { feedback, feedforward })
}
