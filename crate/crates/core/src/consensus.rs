//! Consensus form of VLS.
//!
//! With `u_i = x_i/α_i` and `v_j = y_j/β_j`, one VLS iteration becomes
//! `u_{t+1} = B_t (1/v_t)` and `1/v_t = C_t u_t`, where
//!
//! ```text
//! b_ij = y_j² 1(i~j) / Σ_{k~i} y_k²            (rows i, columns j)
//! c_ji = α_i x_i 1(i~j) / Σ_{k~j} α_k x_k      (columns j, rows i)
//! ```
//!
//! so `u_{t+1} = P_t u_t` with `P_t = B_t C_t`. `P_t` is reversible with
//! respect to `π̂_i = α_i x_i Σ_{k~i} y_k²`.
//!
//! Timing: `B_t` and `C_t` are both built from the pair `(x_t, y_t)`. The
//! identity `1/v_t = C_t u_t` needs `y_t` to be the column update of `x_t`,
//! which Algorithm order guarantees for every `t ≥ 1`. The initial `y_0` is
//! drawn independently, so the transition out of `t = 0` satisfies only
//! `u_1 = B_0 (1/v_0)`; [`verify_dynamics`] checks `t ≥ 1`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::instance::RankOneInstance;
use crate::matrix::Matrix;
use crate::vls::{Trajectory, VlsState};

/// `(u, v)` with `u_i = x_i/α_i`, `v_j = y_j/β_j`.
pub fn lift(state: &VlsState, inst: &RankOneInstance) -> (Vec<f64>, Vec<f64>) {
    let u = state.x.iter().zip(inst.alpha()).map(|(x, a)| x / a).collect();
    let v = state.y.iter().zip(inst.beta()).map(|(y, b)| y / b).collect();
    (u, v)
}

#[derive(Debug, Clone)]
pub struct ConsensusSnapshot {
    pub t: u64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub b_mat: Matrix,
    pub c_mat: Matrix,
    pub p: Matrix,
    pub pi_hat: Vec<f64>,
    pub pi: Vec<f64>,
}

impl ConsensusSnapshot {
    pub fn row_sum_error(&self) -> f64 {
        [&self.b_mat, &self.c_mat, &self.p]
            .iter()
            .flat_map(|m| m.row_sums())
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn balance_residual(&self) -> f64 {
        detailed_balance_residual(&self.p, &self.pi)
    }

    /// Debug dump: `t`, then `u`, `v`, `pi` and `P` (row-major), one
    /// whitespace-separated row per line.
    pub fn dump(&self) -> String {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:e}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut out = String::new();
        let _ = writeln!(out, "t {}", self.t);
        let _ = writeln!(out, "n {}", self.u.len());
        let _ = writeln!(out, "u {}", join(&self.u));
        let _ = writeln!(out, "v {}", join(&self.v));
        let _ = writeln!(out, "pi {}", join(&self.pi));
        out.push_str("P\n");
        for i in 0..self.p.rows() {
            let _ = writeln!(out, "{}", join(self.p.row(i)));
        }
        out
    }
}

/// Builds `B_t`, `C_t`, `P_t = B_t C_t` and the stationary vector from the
/// pair `(x_t, y_t)` held in `state`.
pub fn build_matrices(state: &VlsState, inst: &RankOneInstance) -> ConsensusSnapshot {
    let n = inst.n();
    let g = inst.graph();
    let alpha = inst.alpha();
    let (x, y) = (&state.x, &state.y);

    let mut b_mat = Matrix::zeros(n, n);
    let mut row_y2 = vec![0.0; n];
    for i in 0..n {
        let denom: f64 = g.row_neighbors(i).iter().map(|&k| y[k] * y[k]).sum();
        row_y2[i] = denom;
        for &j in g.row_neighbors(i) {
            b_mat[(i, j)] = y[j] * y[j] / denom;
        }
    }
    let mut c_mat = Matrix::zeros(n, n);
    for j in 0..n {
        let denom: f64 = g.col_neighbors(j).iter().map(|&k| alpha[k] * x[k]).sum();
        for &i in g.col_neighbors(j) {
            c_mat[(j, i)] = alpha[i] * x[i] / denom;
        }
    }
    let p = b_mat.matmul(&c_mat);
    let pi_hat: Vec<f64> = (0..n).map(|i| alpha[i] * x[i] * row_y2[i]).collect();
    let pi = normalize(&pi_hat);
    let (u, v) = lift(state, inst);
    ConsensusSnapshot {
        t: state.t,
        u,
        v,
        b_mat,
        c_mat,
        p,
        pi_hat,
        pi,
    }
}

/// Entrywise closed form of `P = BC`,
/// `p_ij = α_j x_j / Σ_{k~i} y_k² · Σ_{l: i~l, j~l} y_l² / Σ_{k~l} α_k x_k`,
/// together with `π̂`. Independent of [`build_matrices`]; no matrix product.
pub fn transition_closed_form(x: &[f64], y: &[f64], inst: &RankOneInstance) -> (Matrix, Vec<f64>) {
    let n = inst.n();
    let g = inst.graph();
    let alpha = inst.alpha();
    let row_y2: Vec<f64> = (0..n)
        .map(|i| g.row_neighbors(i).iter().map(|&k| y[k] * y[k]).sum())
        .collect();
    let col_ax: Vec<f64> = (0..n)
        .map(|l| g.col_neighbors(l).iter().map(|&k| alpha[k] * x[k]).sum())
        .collect();
    let mut p = Matrix::zeros(n, n);
    for l in 0..n {
        let w = y[l] * y[l] / col_ax[l];
        let rows = g.col_neighbors(l);
        for &i in rows {
            for &j in rows {
                p[(i, j)] += w;
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if p[(i, j)] != 0.0 {
                p[(i, j)] *= alpha[j] * x[j] / row_y2[i];
            }
        }
    }
    let pi_hat = (0..n).map(|i| alpha[i] * x[i] * row_y2[i]).collect();
    (p, pi_hat)
}

pub fn normalize(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

/// `max_ij |π_i P_ij − π_j P_ji|`.
pub fn detailed_balance_residual(p: &Matrix, pi: &[f64]) -> f64 {
    let n = p.rows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((pi[i] * p[(i, j)] - pi[j] * p[(j, i)]).abs());
        }
    }
    worst
}

/// Fills `traj.u_errors` with `‖u_t − u*‖₂`, taking `u*` as the last
/// recorded `u`.
pub fn fill_u_errors(traj: &mut Trajectory, inst: &RankOneInstance) {
    let u_star = traj.final_state().u(inst);
    traj.u_errors = traj
        .states
        .iter()
        .map(|s| l2_distance(&s.u(inst), &u_star))
        .collect();
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// Worst-case residuals of the consensus identities over a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsCheck {
    /// `max_t ‖u_{t+1} − P_t u_t‖_∞` over `t ≥ 1`.
    pub max_residual: f64,
    /// `max_t |π_i P_ij − π_j P_ji|`.
    pub max_balance: f64,
    /// `max_t |row sum − 1|` over `B_t`, `C_t`, `P_t`.
    pub max_row_sum_error: f64,
    /// Number of transitions checked.
    pub steps: usize,
    pub within_tol: bool,
}

/// Replays a stride-1 trajectory through the matrix recursion.
pub fn verify_dynamics(traj: &Trajectory, inst: &RankOneInstance, tol: f64) -> Result<DynamicsCheck> {
    if traj.stride != 1 {
        return Err(Error::StrideNotOne(traj.stride));
    }
    let mut check = DynamicsCheck {
        max_residual: 0.0,
        max_balance: 0.0,
        max_row_sum_error: 0.0,
        steps: 0,
        within_tol: true,
    };
    for pair in traj.states.windows(2) {
        let (cur, next) = (&pair[0], &pair[1]);
        debug_assert_eq!(cur.t + 1, next.t);
        let snap = build_matrices(cur, inst);
        check.max_balance = check.max_balance.max(snap.balance_residual());
        check.max_row_sum_error = check.max_row_sum_error.max(snap.row_sum_error());
        if cur.t == 0 {
            continue;
        }
        let predicted = snap.p.mul_vec(&snap.u);
        let actual = next.u(inst);
        let r = predicted
            .iter()
            .zip(&actual)
            .map(|(p, a)| (p - a).abs())
            .fold(0.0, f64::max);
        check.max_residual = check.max_residual.max(r);
        check.steps += 1;
    }
    check.within_tol = check.max_residual <= tol;
    Ok(check)
}
