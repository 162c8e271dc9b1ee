//! Random game generators and reference solvers shared by the integration
//! tests. The solvers here are written from the textbook recursions and do
//! not call into the crate's Riccati code.

#![allow(dead_code)]

use std::ops::Range;
use std::sync::Arc;

use deceptive_lq::belief::BeliefTable;
use deceptive_lq::game::{Dynamics, GameSpec, JointType, PlayerSpec, TypeSpace, TypeSpec};
use deceptive_lq::noise::GaussianNoise;
use deceptive_lq::riccati::RiccatiSolution;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone)]
pub struct Shape {
    pub players: Range<usize>,
    pub types: Range<usize>,
    pub state: Range<usize>,
    pub horizon: Range<usize>,
    pub max_control: usize,
    pub type_dependent_a: bool,
}

impl Shape {
    pub fn small() -> Self {
        Shape { players: 1..4, types: 1..4, state: 1..7, horizon: 1..11, max_control: 3, type_dependent_a: true }
    }

    pub fn single_player() -> Self {
        Shape { players: 1..2, types: 1..2, state: 1..5, horizon: 1..21, max_control: 4, type_dependent_a: false }
    }
}

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha20Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-scale..scale))
}

pub fn psd(rng: &mut ChaCha20Rng, n: usize, scale: f64) -> DMatrix<f64> {
    let m = uniform(rng, n, n, 1.0);
    &m * m.transpose() * (scale / n as f64)
}

pub fn pd(rng: &mut ChaCha20Rng, n: usize) -> DMatrix<f64> {
    psd(rng, n, 1.0) + DMatrix::identity(n, n) * 0.5
}

pub fn vector(rng: &mut ChaCha20Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

fn stable_ish(rng: &mut ChaCha20Rng, n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n) * 0.8 + uniform(rng, n, n, 0.6 / (n as f64).sqrt())
}

/// A random game with positive definite own control weights and positive
/// semidefinite state and cross control weights.
pub fn random_spec(seed: u64, shape: &Shape) -> GameSpec {
    let mut r = rng(seed);
    let np = r.random_range(shape.players.clone());
    let n = r.random_range(shape.state.clone());
    let kk = r.random_range(shape.horizon.clone());
    let dims: Vec<usize> = (0..np).map(|_| r.random_range(1..=shape.max_control.min(n))).collect();
    let sizes: Vec<usize> = (0..np).map(|_| r.random_range(shape.types.clone())).collect();
    let players = (0..np)
        .map(|i| PlayerSpec {
            name: format!("p{i}"),
            control_dim: dims[i],
            types: (0..sizes[i])
                .map(|l| TypeSpec {
                    label: format!("t{l}"),
                    b: (0..kk).map(|_| uniform(&mut r, n, dims[i], 1.0)).collect(),
                    d: (0..=kk).map(|_| psd(&mut r, n, 1.0)).collect(),
                    f: (0..=kk)
                        .map(|k| {
                            (0..np)
                                .map(|j| {
                                    if k == kk {
                                        DMatrix::zeros(dims[j], dims[j])
                                    } else if j == i {
                                        pd(&mut r, dims[j])
                                    } else {
                                        psd(&mut r, dims[j], 0.3)
                                    }
                                })
                                .collect()
                        })
                        .collect(),
                    reference: (0..=kk).map(|_| vector(&mut r, n, 2.0)).collect(),
                    offset: (0..=kk).map(|_| r.random_range(0.0..1.0)).collect(),
                })
                .collect(),
        })
        .collect();
    let ts = TypeSpace::new(sizes);
    let dynamics = if shape.type_dependent_a && ts.joint_count() > 1 {
        Dynamics::PerJointType((0..kk).map(|_| (0..ts.joint_count()).map(|_| stable_ish(&mut r, n)).collect()).collect())
    } else {
        Dynamics::Shared((0..kk).map(|_| stable_ish(&mut r, n)).collect())
    };
    let variance = r.random_range(0.01..0.5);
    GameSpec {
        horizon: kk,
        state_dim: n,
        players,
        dynamics,
        noise: Arc::new(GaussianNoise::isotropic(n, variance).unwrap()),
        state_partition: None,
    }
}

/// Strictly positive random rows.
pub fn random_beliefs(ts: &TypeSpace, seed: u64) -> BeliefTable {
    let mut r = rng(seed ^ 0x5eed);
    let rows = (0..ts.num_players())
        .map(|i| {
            (0..ts.num_types(i))
                .map(|_| {
                    let raw: Vec<f64> = (0..ts.opponent_count(i)).map(|_| r.random_range(0.05..1.0)).collect();
                    let s: f64 = raw.iter().sum();
                    raw.into_iter().map(|v| v / s).collect()
                })
                .collect()
        })
        .collect();
    BeliefTable::from_rows(ts, rows).unwrap()
}

/// Shifts every entry by `+-0.2` (random sign), clamps at a small floor
/// and renormalizes.
pub fn perturb(table: &BeliefTable, seed: u64) -> BeliefTable {
    let ts = table.type_space();
    let mut r = rng(seed);
    let rows = (0..ts.num_players())
        .map(|i| {
            (0..ts.num_types(i))
                .map(|l| {
                    let raw: Vec<f64> = table
                        .row(i, l)
                        .iter()
                        .map(|&p| (p + if r.random::<bool>() { 0.2 } else { -0.2 }).max(0.01))
                        .collect();
                    let s: f64 = raw.iter().sum();
                    raw.into_iter().map(|v| v / s).collect()
                })
                .collect()
        })
        .collect();
    BeliefTable::from_rows(&ts, rows).unwrap()
}

/// Reference single-player tracking LQR, solved stage by stage through the
/// joint quadratic form in `(x, u)`:
///
/// ```text
/// Q(x, u) = [x; u]' H [x; u] + h' [x; u] + c
/// ```
///
/// minimized over `u` by a Schur complement.
pub struct Lqr {
    pub p: Vec<DMatrix<f64>>,
    pub v: Vec<DVector<f64>>,
    pub c: Vec<f64>,
    pub k: Vec<DMatrix<f64>>,
    pub g: Vec<DVector<f64>>,
}

pub fn lqr_oracle(spec: &GameSpec) -> Lqr {
    assert_eq!(spec.num_players(), 1);
    let t = &spec.players[0].types[0];
    let theta = JointType(vec![0]);
    let n = spec.state_dim;
    let m = spec.players[0].control_dim;
    let kk = spec.horizon;
    let mut p = vec![DMatrix::zeros(n, n); kk + 1];
    let mut v = vec![DVector::zeros(n); kk + 1];
    let mut c = vec![0.0; kk + 1];
    let mut gains_k = vec![DMatrix::zeros(m, n); kk];
    let mut gains_g = vec![DVector::zeros(m); kk];

    let xd = &t.reference[kk];
    p[kk] = t.d[kk].clone();
    v[kk] = -(&t.d[kk] * xd) * 2.0;
    c[kk] = xd.dot(&(&t.d[kk] * xd)) + t.offset[kk];
    for k in (0..kk).rev() {
        let a = spec.a(k, &theta);
        let b = &t.b[k];
        let mut ab = DMatrix::zeros(n, n + m);
        ab.columns_mut(0, n).copy_from(a);
        ab.columns_mut(n, m).copy_from(b);
        let mut h = ab.transpose() * &p[k + 1] * &ab;
        let mut dx = h.view_mut((0, 0), (n, n));
        dx += &t.d[k];
        let mut du = h.view_mut((n, n), (m, m));
        du += &t.f[k][0];
        let xd = &t.reference[k];
        let mut lin = ab.transpose() * &v[k + 1];
        let mut lx = lin.rows_mut(0, n);
        lx -= &t.d[k] * xd * 2.0;
        let cst = c[k + 1] + (&p[k + 1] * spec.q(k)).trace() + xd.dot(&(&t.d[k] * xd)) + t.offset[k];

        let hxx = h.view((0, 0), (n, n)).into_owned();
        let hux = h.view((n, 0), (m, n)).into_owned();
        let huu = h.view((n, n), (m, m)).into_owned();
        let lx = lin.rows(0, n).into_owned();
        let lu = lin.rows(n, m).into_owned();
        let huu_inv = huu.clone().try_inverse().unwrap();
        // u* = -Huu^{-1} (Hux x + lu / 2)
        let kg = -(&huu_inv * &hux);
        let gg = -(&huu_inv * &lu) * 0.5;
        p[k] = &hxx - hux.transpose() * &huu_inv * &hux;
        p[k] = (&p[k] + p[k].transpose()) * 0.5;
        v[k] = &lx - hux.transpose() * &huu_inv * &lu;
        c[k] = cst - 0.25 * lu.dot(&(&huu_inv * &lu));
        gains_k[k] = kg;
        gains_g[k] = gg;
    }
    Lqr { p, v, c, k: gains_k, g: gains_g }
}

/// Reference feedback Nash solution of a complete-information game where
/// each player has exactly the type given in `theta`.
///
/// Gains come from the stacked first-order conditions
/// `(F_ii + B_i' P_i B_i) K_i + B_i' P_i sum_{j != i} B_j K_j = -B_i' P_i A`,
/// then each value is propagated along the closed loop.
pub struct Nash {
    /// `[k][i]`
    pub p: Vec<Vec<DMatrix<f64>>>,
    pub v: Vec<Vec<DVector<f64>>>,
    pub c: Vec<Vec<f64>>,
    pub k: Vec<Vec<DMatrix<f64>>>,
    pub g: Vec<Vec<DVector<f64>>>,
}

pub fn nash_oracle(spec: &GameSpec, theta: &JointType) -> Nash {
    let np = spec.num_players();
    let n = spec.state_dim;
    let kk = spec.horizon;
    let dims = spec.control_dims();
    let offs: Vec<usize> = dims.iter().scan(0, |acc, &m| { let o = *acc; *acc += m; Some(o) }).collect();
    let total: usize = dims.iter().sum();
    let ty = |i: usize| &spec.players[i].types[theta.of(i)];

    let mut p = vec![vec![DMatrix::zeros(n, n); np]; kk + 1];
    let mut v = vec![vec![DVector::zeros(n); np]; kk + 1];
    let mut c = vec![vec![0.0; np]; kk + 1];
    let mut gk = vec![Vec::new(); kk];
    let mut gg = vec![Vec::new(); kk];
    for i in 0..np {
        let t = ty(i);
        p[kk][i] = t.d[kk].clone();
        v[kk][i] = -(&t.d[kk] * &t.reference[kk]) * 2.0;
        c[kk][i] = t.reference[kk].dot(&(&t.d[kk] * &t.reference[kk])) + t.offset[kk];
    }
    for k in (0..kk).rev() {
        let a = spec.a(k, theta);
        let bs: Vec<&DMatrix<f64>> = (0..np).map(|i| &ty(i).b[k]).collect();
        let mut lhs = DMatrix::zeros(total, total);
        let mut rhs = DMatrix::zeros(total, n + 1);
        for i in 0..np {
            let bp = bs[i].transpose() * &p[k + 1][i];
            for j in 0..np {
                let mut blk = &bp * bs[j];
                if i == j {
                    blk += &ty(i).f[k][i];
                }
                lhs.view_mut((offs[i], offs[j]), (dims[i], dims[j])).copy_from(&blk);
            }
            rhs.view_mut((offs[i], 0), (dims[i], n)).copy_from(&(-(&bp * a)));
            rhs.view_mut((offs[i], n), (dims[i], 1)).copy_from(&(-(bs[i].transpose() * &v[k + 1][i]) * 0.5));
        }
        let sol = lhs.lu().solve(&rhs).unwrap();
        let ks: Vec<DMatrix<f64>> = (0..np).map(|i| sol.view((offs[i], 0), (dims[i], n)).into_owned()).collect();
        let gs: Vec<DVector<f64>> = (0..np).map(|i| sol.view((offs[i], n), (dims[i], 1)).column(0).into_owned()).collect();
        let mut acl = a.clone();
        let mut drift = DVector::zeros(n);
        for j in 0..np {
            acl += bs[j] * &ks[j];
            drift += bs[j] * &gs[j];
        }
        for i in 0..np {
            let t = ty(i);
            let pn = &p[k + 1][i];
            let vn = &v[k + 1][i];
            let mut pi = &t.d[k] + acl.transpose() * pn * &acl;
            let mut vi = acl.transpose() * (vn + pn * &drift * 2.0) - &t.d[k] * &t.reference[k] * 2.0;
            let mut ci = c[k + 1][i]
                + (pn * spec.q(k)).trace()
                + t.reference[k].dot(&(&t.d[k] * &t.reference[k]))
                + t.offset[k]
                + drift.dot(vn)
                + drift.dot(&(pn * &drift));
            for j in 0..np {
                let f = &t.f[k][j];
                pi += ks[j].transpose() * f * &ks[j];
                vi += ks[j].transpose() * f * &gs[j] * 2.0;
                ci += gs[j].dot(&(f * &gs[j]));
            }
            p[k][i] = (&pi + pi.transpose()) * 0.5;
            v[k][i] = vi;
            c[k][i] = ci;
        }
        gk[k] = ks;
        gg[k] = gs;
    }
    Nash { p, v, c, k: gk, g: gg }
}

/// Player `i` (type `l`)'s expected stage-`k` objective when it plays `ui`
/// and everyone else follows `sol`, up to terms that do not depend on `ui`.
pub fn stage_objective(spec: &GameSpec, sol: &RiccatiSolution, k: usize, x: &DVector<f64>, i: usize, l: usize, ui: &DVector<f64>) -> f64 {
    let ts = spec.type_space();
    let mut total = 0.0;
    for (o, &prob) in sol.beliefs.row(i, l).iter().enumerate() {
        let theta = ts.with_opponents(i, l, o);
        let u: Vec<DVector<f64>> = (0..spec.num_players())
            .map(|j| if j == i { ui.clone() } else { sol.equilibrium_action(k, x, j, theta.of(j)).unwrap() })
            .collect();
        let next = spec.mean_successor(k, x, &u, &theta).unwrap();
        total += prob * (spec.stage_cost(k, i, l, x, &u).unwrap() + sol.value_function(k + 1, &next, i, l).unwrap());
    }
    total
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-12)
}

pub fn rel_err_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-12)
}

pub fn rel_err_scalar(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

/// Two players; player 0 owns coordinates `0..n0` and neither affects nor
/// cares about the rest. Player 1 is unrestricted apart from not acting on
/// player 0's block.
pub fn decoupled_game(seed: u64) -> GameSpec {
    let mut r = rng(seed);
    let n0 = r.random_range(1..4);
    let n1 = r.random_range(1..4);
    let n = n0 + n1;
    let m0 = r.random_range(1..=n0);
    let m1 = r.random_range(1..=n1);
    let sizes = [r.random_range(1..4), r.random_range(2..4)];
    let kk = r.random_range(1..9);
    let embed = |m: &DMatrix<f64>, row: usize, col: usize, rows: usize, cols: usize| {
        let mut out = DMatrix::zeros(rows, cols);
        out.view_mut((row, col), (m.nrows(), m.ncols())).copy_from(m);
        out
    };
    let p0 = (0..sizes[0])
        .map(|l| TypeSpec {
            label: format!("a{l}"),
            b: (0..kk).map(|_| embed(&uniform(&mut r, n0, m0, 1.0), 0, 0, n, m0)).collect(),
            d: (0..=kk).map(|_| embed(&psd(&mut r, n0, 1.0), 0, 0, n, n)).collect(),
            f: (0..=kk)
                .map(|k| if k == kk { vec![DMatrix::zeros(m0, m0), DMatrix::zeros(m1, m1)] } else { vec![pd(&mut r, m0), DMatrix::zeros(m1, m1)] })
                .collect(),
            reference: (0..=kk).map(|_| vector(&mut r, n, 2.0)).collect(),
            offset: (0..=kk).map(|_| r.random_range(0.0..1.0)).collect(),
        })
        .collect();
    let p1 = (0..sizes[1])
        .map(|l| TypeSpec {
            label: format!("b{l}"),
            b: (0..kk).map(|_| embed(&uniform(&mut r, n1, m1, 1.0), n0, 0, n, m1)).collect(),
            d: (0..=kk).map(|_| psd(&mut r, n, 1.0)).collect(),
            f: (0..=kk)
                .map(|k| if k == kk { vec![DMatrix::zeros(m0, m0), DMatrix::zeros(m1, m1)] } else { vec![psd(&mut r, m0, 0.3), pd(&mut r, m1)] })
                .collect(),
            reference: (0..=kk).map(|_| vector(&mut r, n, 2.0)).collect(),
            offset: (0..=kk).map(|_| r.random_range(0.0..1.0)).collect(),
        })
        .collect();
    let ts = TypeSpace::new(sizes.to_vec());
    // Own block depends only on player 0's type; the rest on both.
    let a = (0..kk)
        .map(|_| {
            let own: Vec<DMatrix<f64>> = (0..sizes[0]).map(|_| DMatrix::identity(n0, n0) * 0.9 + uniform(&mut r, n0, n0, 0.3)).collect();
            ts.joint_types()
                .map(|th| {
                    let mut m = embed(&own[th.of(0)], 0, 0, n, n);
                    m.view_mut((n0, n0), (n1, n1)).copy_from(&(DMatrix::identity(n1, n1) * 0.9 + uniform(&mut r, n1, n1, 0.3)));
                    m
                })
                .collect()
        })
        .collect();
    GameSpec {
        horizon: kk,
        state_dim: n,
        players: vec![
            PlayerSpec { name: "own".into(), control_dim: m0, types: p0 },
            PlayerSpec { name: "other".into(), control_dim: m1, types: p1 },
        ],
        dynamics: Dynamics::PerJointType(a),
        noise: Arc::new(GaussianNoise::isotropic(n, 0.1).unwrap()),
        state_partition: Some(vec![0..n0, n0..n]),
    }
}
