use nalgebra::{DMatrix, DVector};

use crate::belief::{ActionModel, BeliefTable};
use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::linalg;

use super::stage::{assemble_stage_system, solve_stage, StageGains};

/// Conditioning of one stage of a backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct StageDiagnostics {
    pub stage: usize,
    /// Smallest eigenvalue of each `R_i(theta_i^l)`, indexed `[i][l]`.
    pub r_min_eigenvalue: Vec<Vec<f64>>,
    pub w0_rcond: f64,
}

/// Value coefficients and equilibrium gains from one backward pass with
/// beliefs frozen at their values at `from_stage`.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub from_stage: usize,
    pub horizon: usize,
    pub beliefs: BeliefTable,
    /// `[k - from_stage][i][l]` for `k` in `from_stage..=K`.
    s: Vec<Vec<Vec<DMatrix<f64>>>>,
    n: Vec<Vec<Vec<DVector<f64>>>>,
    q: Vec<Vec<Vec<f64>>>,
    /// `[k - from_stage]` for `k` in `from_stage..K`.
    gains: Vec<StageGains>,
    pub diagnostics: Vec<StageDiagnostics>,
}

impl RiccatiSolution {
    fn slot(&self, k: usize, inclusive: bool) -> Result<usize> {
        let hi = if inclusive { self.horizon + 1 } else { self.horizon };
        if k < self.from_stage || k >= hi {
            return Err(Error::StageOutOfRange { stage: k, horizon: self.horizon });
        }
        Ok(k - self.from_stage)
    }

    pub fn s(&self, k: usize, player: usize, ty: usize) -> &DMatrix<f64> {
        &self.s[k - self.from_stage][player][ty]
    }

    pub fn n(&self, k: usize, player: usize, ty: usize) -> &DVector<f64> {
        &self.n[k - self.from_stage][player][ty]
    }

    pub fn q(&self, k: usize, player: usize, ty: usize) -> f64 {
        self.q[k - self.from_stage][player][ty]
    }

    pub fn gains(&self, k: usize) -> Result<&StageGains> {
        Ok(&self.gains[self.slot(k, false)?])
    }

    pub fn feedback(&self, k: usize, player: usize, ty: usize) -> &DMatrix<f64> {
        &self.gains[k - self.from_stage].feedback[player][ty]
    }

    pub fn feedforward(&self, k: usize, player: usize, ty: usize) -> &DVector<f64> {
        &self.gains[k - self.from_stage].feedforward[player][ty]
    }

    /// `u_i(theta_i) = K x + g` at stage `k < K`.
    pub fn equilibrium_action(&self, k: usize, x: &DVector<f64>, player: usize, ty: usize) -> Result<DVector<f64>> {
        Ok(self.gains(k)?.action(player, ty, x))
    }

    /// `V_i^k(x) = q + x'N + x'S x`.
    pub fn value_function(&self, k: usize, x: &DVector<f64>, player: usize, ty: usize) -> Result<f64> {
        let t = self.slot(k, true)?;
        let s = &self.s[t][player][ty];
        Ok(self.q[t][player][ty] + x.dot(&self.n[t][player][ty]) + x.dot(&(s * x)))
    }
}

impl ActionModel for RiccatiSolution {
    fn predicted_action(&self, _observer: usize, k: usize, x: &DVector<f64>, player: usize, ty: usize) -> Option<DVector<f64>> {
        self.equilibrium_action(k, x, player, ty).ok()
    }
}

/// Runs the extended Riccati recursions from `K - 1` down to `from_stage`
/// with beliefs held fixed.
///
/// With `K_j`, `g_j` the gains of player `j`, `Acl = A + sum_j B_j K_j`
/// and `c = sum_j B_j g_j`, each `(i, theta_i)` is updated as
///
/// ```text
/// S = D + E[Acl' S+ Acl + sum_j K_j' F_ij K_j]
/// N = -2 D x_d + E[Acl' (N+ + 2 S+ c) + 2 sum_j K_j' F_ij g_j]
/// q = Tr(S+ Q) + q+ + x_d' D x_d + f_d + E[c' N+ + c' S+ c + sum_j g_j' F_ij g_j]
/// ```
///
/// where the expectation is over `theta_{-i}` under player `i`'s belief.
pub fn backward_pass(spec: &GameSpec, beliefs: &BeliefTable, from_stage: usize) -> Result<RiccatiSolution> {
    let kk = spec.horizon;
    if from_stage > kk {
        return Err(Error::StageOutOfRange { stage: from_stage, horizon: kk });
    }
    let ts = spec.type_space();
    let np = spec.num_players();
    let n = spec.state_dim;
    let len = kk - from_stage + 1;

    let mut s_all = vec![Vec::new(); len];
    let mut n_all = vec![Vec::new(); len];
    let mut q_all = vec![Vec::new(); len];
    let mut gains_rev = Vec::with_capacity(len - 1);
    let mut diags_rev = Vec::with_capacity(len - 1);

    let (mut s_next, mut n_next, mut q_next) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..np {
        let (mut si, mut ni, mut qi) = (Vec::new(), Vec::new(), Vec::new());
        for l in 0..ts.num_types(i) {
            let d = spec.d(kk, i, l);
            let xd = spec.reference(kk, i, l);
            si.push(linalg::symmetrize(d));
            ni.push(d * xd * -2.0);
            qi.push(xd.dot(&(d * xd)) + spec.offset(kk, i, l));
        }
        s_next.push(si);
        n_next.push(ni);
        q_next.push(qi);
    }
    s_all[len - 1] = s_next.clone();
    n_all[len - 1] = n_next.clone();
    q_all[len - 1] = q_next.clone();

    for k in (from_stage..kk).rev() {
        let sys = assemble_stage_system(spec, k, &s_next, &n_next, beliefs)?;
        sys.check_definiteness()?;
        let gains = solve_stage(&sys)?;
        diags_rev.push(StageDiagnostics { stage: k, r_min_eigenvalue: sys.r_min_eigenvalues(), w0_rcond: sys.w0_rcond() });

        let trace_q: Vec<Vec<f64>> =
            s_next.iter().map(|per| per.iter().map(|s| (s * spec.q(k)).trace()).collect()).collect();

        let (mut s_k, mut n_k, mut q_k) = (Vec::with_capacity(np), Vec::with_capacity(np), Vec::with_capacity(np));
        for i in 0..np {
            let (mut si, mut ni, mut qi) = (Vec::new(), Vec::new(), Vec::new());
            for l in 0..ts.num_types(i) {
                let sp = &s_next[i][l];
                let npl = &n_next[i][l];
                let row = beliefs.row(i, l);
                let mut terms_s = Vec::new();
                let mut terms_n = Vec::new();
                let mut terms_q = Vec::new();
                for (o, &p) in row.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    let theta = ts.with_opponents(i, l, o);
                    let mut acl = spec.a(k, &theta).clone();
                    let mut c = DVector::zeros(n);
                    let mut ctrl_s = DMatrix::zeros(n, n);
                    let mut ctrl_n = DVector::zeros(n);
                    let mut ctrl_q = 0.0;
                    for j in 0..np {
                        let tj = theta.of(j);
                        let kj = &gains.feedback[j][tj];
                        let gj = &gains.feedforward[j][tj];
                        let bj = spec.b(k, j, tj);
                        acl += bj * kj;
                        c += bj * gj;
                        let f = spec.f(k, i, j, l);
                        let fk = f * kj;
                        let fg = f * gj;
                        ctrl_s += kj.transpose() * &fk;
                        ctrl_n += kj.transpose() * &fg * 2.0;
                        ctrl_q += gj.dot(&fg);
                    }
                    let s_c = sp * &c;
                    terms_s.push((p, acl.transpose() * sp * &acl + ctrl_s));
                    terms_n.push((p, acl.transpose() * (npl + &s_c * 2.0) + ctrl_n));
                    terms_q.push((p, c.dot(npl) + c.dot(&s_c) + ctrl_q));
                }
                let d = spec.d(k, i, l);
                let xd = spec.reference(k, i, l);
                let es = linalg::weighted_mean(terms_s.iter().map(|(p, m)| (*p, m)), n, n);
                let en = linalg::weighted_mean_vec(terms_n.iter().map(|(p, v)| (*p, v)), n);
                let eq = linalg::weighted_mean_scalar(terms_q.iter().copied());
                si.push(linalg::symmetrize(&(d + es)));
                ni.push(d * xd * -2.0 + en);
                qi.push(trace_q[i][l] + q_next[i][l] + xd.dot(&(d * xd)) + spec.offset(k, i, l) + eq);
            }
            s_k.push(si);
            n_k.push(ni);
            q_k.push(qi);
        }
        gains_rev.push(gains);
        let t = k - from_stage;
        s_all[t] = s_k.clone();
        n_all[t] = n_k.clone();
        q_all[t] = q_k.clone();
        s_next = s_k;
        n_next = n_k;
        q_next = q_k;
    }

    gains_rev.reverse();
    diags_rev.reverse();
    Ok(RiccatiSolution {
        from_stage,
        horizon: kk,
        beliefs: beliefs.clone(),
        s: s_all,
        n: n_all,
        q: q_all,
        gains: gains_rev,
        diagnostics: diags_rev,
    })
}
