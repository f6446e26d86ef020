//! Spectrum of the limit consensus matrix and the closed-form rate bounds.
//!
//! At a fixed point `x = cα`, `y = β/c` the consensus matrix no longer
//! depends on `c`; its spectrum governs the asymptotic rate. Because `P`
//! satisfies detailed balance with respect to `π`, the conjugate
//! `S = D^{1/2} P D^{-1/2}` (`D = diag π`) is symmetric and has the same
//! eigenvalues, so a symmetric eigensolver applies.
//!
//! For `z` with `Σ π_i z_i = 0` and `Σ π_i z_i² = 1` the Dirichlet form obeys
//! `Σ_ij π_i p_ij (z_i − z_j)² = 2 − 2⟨z, Pz⟩_π`, so its minimum over that set
//! is `2(1 − λ2)`. Reports keep both the raw form and `1 − λ2`.

use crate::consensus::{detailed_balance_residual, normalize, transition_closed_form};
use crate::error::{Error, Result};
use crate::graph::{Family, GraphStats};
use crate::instance::{check_b, RankOneInstance};
use crate::jacobi::{symmetric_eigen, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};
use crate::matrix::Matrix;

/// Detailed-balance residual above which a matrix is refused.
pub const REVERSIBILITY_TOL: f64 = 1e-10;

/// Limit matrix `P` and its stationary distribution, from the fixed point
/// `x = α`, `y = β`.
pub fn limit_matrix(inst: &RankOneInstance) -> (Matrix, Vec<f64>) {
    limit_matrix_scaled(inst, 1.0)
}

/// Same as [`limit_matrix`] at the representative `x = cα`, `y = β/c`.
pub fn limit_matrix_scaled(inst: &RankOneInstance, c: f64) -> (Matrix, Vec<f64>) {
    let x: Vec<f64> = inst.alpha().iter().map(|a| c * a).collect();
    let y: Vec<f64> = inst.beta().iter().map(|b| b / c).collect();
    let (p, pi_hat) = transition_closed_form(&x, &y, inst);
    (p, normalize(&pi_hat))
}

/// Eigendecomposition of a reversible stochastic matrix.
#[derive(Debug, Clone)]
pub struct ReversibleEigen {
    /// Descending; `values[0]` is the Perron eigenvalue 1.
    pub values: Vec<f64>,
    /// Column `k` is the right eigenvector `z_k` of `P`, normalized so that
    /// `Σ π_i z_ik² = 1`. Columns are π-orthogonal.
    pub vectors: Matrix,
    /// `max |S_ij − S_ji|` of the symmetrized matrix before averaging.
    pub asymmetry: f64,
}

impl ReversibleEigen {
    pub fn lambda2(&self) -> f64 {
        self.values.get(1).copied().unwrap_or(f64::NAN)
    }

    pub fn lambda_n(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }

    /// `ρ(P − 1π) = max(λ2, −λn)`.
    pub fn rho(&self) -> f64 {
        self.lambda2().max(-self.lambda_n())
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        (0..self.vectors.rows()).map(|r| self.vectors[(r, k)]).collect()
    }
}

pub fn eig_reversible(p: &Matrix, pi: &[f64]) -> Result<ReversibleEigen> {
    let residual = detailed_balance_residual(p, pi);
    if !(residual <= REVERSIBILITY_TOL) {
        return Err(Error::NotReversible(residual));
    }
    let n = p.rows();
    let sq: Vec<f64> = pi.iter().map(|x| x.sqrt()).collect();
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] = sq[i] * p[(i, j)] / sq[j];
        }
    }
    let mut asymmetry: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            asymmetry = asymmetry.max((s[(i, j)] - s[(j, i)]).abs());
            let avg = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = avg;
            s[(j, i)] = avg;
        }
    }
    let eig = symmetric_eigen(&s, DEFAULT_TOL, DEFAULT_MAX_SWEEPS)?;
    let mut vectors = Matrix::zeros(n, n);
    for r in 0..n {
        for k in 0..n {
            vectors[(r, k)] = eig.vectors[(r, k)] / sq[r];
        }
    }
    Ok(ReversibleEigen {
        values: eig.values,
        vectors,
        asymmetry,
    })
}

/// `Σ_ij π_i p_ij (x_i − x_j)²`.
pub fn dirichlet_form(p: &Matrix, pi: &[f64], x: &[f64]) -> f64 {
    let n = p.rows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = x[i] - x[j];
            sum += pi[i] * p[(i, j)] * d * d;
        }
    }
    sum
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletGap {
    /// Form value at the second eigenvector; equals `2(1 − λ2)`.
    pub raw_form: f64,
    /// `1 − λ2`.
    pub gap: f64,
}

/// Minimum of the Dirichlet form over π-centered, π-unit vectors, taken at
/// the second eigenvector.
pub fn dirichlet_gap(p: &Matrix, pi: &[f64]) -> Result<DirichletGap> {
    let eig = eig_reversible(p, pi)?;
    Ok(dirichlet_gap_from(p, pi, &eig))
}

pub fn dirichlet_gap_from(p: &Matrix, pi: &[f64], eig: &ReversibleEigen) -> DirichletGap {
    if p.rows() < 2 {
        return DirichletGap {
            raw_form: f64::NAN,
            gap: f64::NAN,
        };
    }
    DirichletGap {
        raw_form: dirichlet_form(p, pi, &eig.vector(1)),
        gap: 1.0 - eig.lambda2(),
    }
}

/// Closed-form rate bound `1 − b¹²/(n(n−1)Δ)` and its degree-free
/// relaxation `1 − b¹²/n³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBound {
    /// `b¹²/(n(n−1)Δ)`, kept separately since `1 − gap` rounds it.
    pub gap: f64,
    pub bound: f64,
    pub weaker_gap: f64,
    pub weaker_bound: f64,
}

pub fn theorem2_bound(n: usize, delta: usize, b: f64) -> Result<RateBound> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("bound needs n ≥ 2, got {n}")));
    }
    if delta < 1 {
        return Err(Error::InvalidParameter("maximum degree must be at least 1".into()));
    }
    check_b(b)?;
    let nf = n as f64;
    let gap = b.powi(12) / (nf * (nf - 1.0) * delta as f64);
    let weaker_gap = b.powi(12) / (nf * nf * nf);
    if delta <= n {
        assert!(gap >= weaker_gap, "degree bound must refine the n³ bound");
    }
    Ok(RateBound {
        gap,
        bound: 1.0 - gap,
        weaker_gap,
        weaker_bound: 1.0 - weaker_gap,
    })
}

/// Lower bounds on `λn`: the analytic `−1 + b⁸/Δ` and the Gershgorin floor
/// `−1 + min_i P_ii` of a particular matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GershgorinFloor {
    pub analytic: f64,
    pub empirical: f64,
    pub diag_min: f64,
    /// `b⁸/Δ`.
    pub diag_bound: f64,
}

impl GershgorinFloor {
    pub fn diag_bound_holds(&self) -> bool {
        self.diag_min >= self.diag_bound
    }

    /// `λn` at or above both floors (strictly above the analytic one).
    pub fn admits(&self, lambda_n: f64) -> bool {
        lambda_n >= self.empirical && lambda_n > self.analytic
    }
}

/// Lower bound `b⁸/Δ` on every diagonal entry of the limit matrix.
pub fn diag_bound(delta: usize, b: f64) -> Result<f64> {
    check_b(b)?;
    if delta < 1 {
        return Err(Error::InvalidParameter("maximum degree must be at least 1".into()));
    }
    Ok(b.powi(8) / delta as f64)
}

pub fn gershgorin_floor(p: &Matrix, delta: usize, b: f64) -> Result<GershgorinFloor> {
    let diag_bound = diag_bound(delta, b)?;
    let diag_min = p.diagonal().into_iter().fold(f64::INFINITY, f64::min);
    Ok(GershgorinFloor {
        analytic: -1.0 + diag_bound,
        empirical: -1.0 + diag_min,
        diag_min,
        diag_bound,
    })
}

/// Per-instance spectral summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub n: usize,
    pub family: String,
    pub b: f64,
    pub max_degree: usize,
    pub diameter: usize,
    pub lambda2: f64,
    pub lambda_n: f64,
    pub rho: f64,
    pub dirichlet_gap: f64,
    pub dirichlet_raw: f64,
    pub theorem2_bound: f64,
    pub theorem2_gap: f64,
    pub gershgorin_floor: f64,
    pub diag_min: f64,
    pub balance_residual: f64,
}

impl SpectralReport {
    pub const CSV_HEADER: &'static str =
        "n,family,b,delta,diameter,lambda2,lambda_n,rho,dirichlet_gap,theorem2_bound,gershgorin_floor,diag_min";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.n,
            self.family,
            self.b,
            self.max_degree,
            self.diameter,
            self.lambda2,
            self.lambda_n,
            self.rho,
            self.dirichlet_gap,
            self.theorem2_bound,
            self.gershgorin_floor,
            self.diag_min
        )
    }
}

/// Limit matrix, spectrum, Dirichlet gap and both closed-form bounds for one
/// instance. `family` is a free label (`custom` for loaded masks).
pub fn spectral_report(inst: &RankOneInstance, family: &str) -> Result<SpectralReport> {
    let n = inst.n();
    let GraphStats {
        max_degree,
        diameter,
    } = inst.graph().stats()?;
    let bound = theorem2_bound(n, max_degree, inst.b())?;
    let (p, pi) = limit_matrix(inst);
    let eig = eig_reversible(&p, &pi)?;
    let dg = dirichlet_gap_from(&p, &pi, &eig);
    let floor = gershgorin_floor(&p, max_degree, inst.b())?;
    Ok(SpectralReport {
        n,
        family: family.to_string(),
        b: inst.b(),
        max_degree,
        diameter,
        lambda2: eig.lambda2(),
        lambda_n: eig.lambda_n(),
        rho: eig.rho(),
        dirichlet_gap: dg.gap,
        dirichlet_raw: dg.raw_form,
        theorem2_bound: bound.bound,
        theorem2_gap: bound.gap,
        gershgorin_floor: floor.analytic,
        diag_min: floor.diag_min,
        balance_residual: detailed_balance_residual(&p, &pi),
    })
}

pub fn family_label(family: Option<Family>) -> String {
    family.map_or_else(|| "custom".to_string(), |f| f.to_string())
}
