//! Rank-one completion problems `M = αβᵀ` observed on a revealed-entry graph.

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::RevealedGraph;

/// Seeded generator used for every random draw in the crate.
///
/// ChaCha8 output is specified independently of platform and word size, so a
/// 64-bit seed reproduces bit-identical instances and initializations.
pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn check_b(b: f64) -> Result<()> {
    if b > 0.0 && b < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("b must lie in (0, 1), got {b}")))
    }
}

/// Draws `n` values i.i.d. uniform on `[b, 1/b]`.
pub fn uniform_in_band<R: Rng + ?Sized>(rng: &mut R, n: usize, b: f64) -> Vec<f64> {
    let dist = Uniform::new_inclusive(b, 1.0 / b);
    (0..n).map(|_| dist.sample(rng)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankOneInstance {
    graph: RevealedGraph,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    b: f64,
    seed: Option<u64>,
    // M_ij aligned with graph.row_neighbors(i) / graph.col_neighbors(j)
    row_vals: Vec<Vec<f64>>,
    col_vals: Vec<Vec<f64>>,
}

impl RankOneInstance {
    /// Wraps explicit factors. The graph must be a valid mask and every
    /// factor entry must lie in `[b, 1/b]`.
    pub fn new(graph: RevealedGraph, alpha: Vec<f64>, beta: Vec<f64>, b: f64) -> Result<Self> {
        check_b(b)?;
        graph.require_valid_mask()?;
        let n = graph.n();
        if alpha.len() != n || beta.len() != n {
            return Err(Error::InvalidParameter(format!(
                "factor lengths ({}, {}) do not match n = {n}",
                alpha.len(),
                beta.len()
            )));
        }
        let (lo, hi) = (b, 1.0 / b);
        for (name, v) in [("alpha", &alpha), ("beta", &beta)] {
            if let Some((k, &x)) = v.iter().enumerate().find(|(_, &x)| !(lo..=hi).contains(&x)) {
                return Err(Error::InvalidParameter(format!(
                    "{name}[{}] = {x} outside [{lo}, {hi}]",
                    k + 1
                )));
            }
        }
        let row_vals = (0..n)
            .map(|i| graph.row_neighbors(i).iter().map(|&j| alpha[i] * beta[j]).collect())
            .collect();
        let col_vals = (0..n)
            .map(|j| graph.col_neighbors(j).iter().map(|&i| alpha[i] * beta[j]).collect())
            .collect();
        Ok(RankOneInstance {
            graph,
            alpha,
            beta,
            b,
            seed: None,
            row_vals,
            col_vals,
        })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn graph(&self) -> &RevealedGraph {
        &self.graph
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// `M_ij` if the entry is revealed.
    pub fn revealed(&self, i: usize, j: usize) -> Option<f64> {
        let cols = self.graph.row_neighbors(i);
        cols.binary_search(&j).ok().map(|k| self.row_vals[i][k])
    }

    /// Revealed values of row `i`, aligned with `graph().row_neighbors(i)`.
    pub fn row_values(&self, i: usize) -> &[f64] {
        &self.row_vals[i]
    }

    /// Revealed values of column `j`, aligned with `graph().col_neighbors(j)`.
    pub fn col_values(&self, j: usize) -> &[f64] {
        &self.col_vals[j]
    }

    /// Sum of squared residuals over revealed entries,
    /// `Σ_{(i,j)∈E} (x_i y_j − M_ij)²`.
    pub fn project_revealed(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut cost = 0.0;
        for i in 0..self.n() {
            for (&j, &m) in self.graph.row_neighbors(i).iter().zip(&self.row_vals[i]) {
                let r = x[i] * y[j] - m;
                cost += r * r;
            }
        }
        cost
    }

    /// `(1/n)·‖xyᵀ − αβᵀ‖_F` over all n² entries.
    pub fn frobenius_error(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.n();
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                let r = x[i] * y[j] - self.alpha[i] * self.beta[j];
                sum += r * r;
            }
        }
        sum.sqrt() / n as f64
    }

    /// Scale of floating-point noise in [`Self::project_revealed`] near a
    /// zero-cost point: `64 ε² Σ_E M_ij²`.
    pub fn cost_noise_floor(&self) -> f64 {
        let sum_sq: f64 = self.row_vals.iter().flatten().map(|m| m * m).sum();
        64.0 * f64::EPSILON * f64::EPSILON * sum_sq
    }

    pub fn to_json(&self) -> String {
        let file = InstanceFile {
            n: self.n(),
            b: self.b,
            seed: self.seed,
            alpha: self.alpha.clone(),
            beta: self.beta.clone(),
            edges: self.graph.edges().iter().map(|&(i, j)| (i + 1, j + 1)).collect(),
        };
        serde_json::to_string_pretty(&file).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let mut edges = Vec::with_capacity(file.edges.len());
        for (i, j) in file.edges {
            if i == 0 || j == 0 {
                return Err(Error::Parse("edge indices are 1-based".into()));
            }
            edges.push((i - 1, j - 1));
        }
        let graph = RevealedGraph::new(file.n, edges)?;
        let mut inst = RankOneInstance::new(graph, file.alpha, file.beta, file.b)?;
        inst.seed = file.seed;
        Ok(inst)
    }
}

/// On-disk form of an instance; edges are 1-based.
#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    n: usize,
    b: f64,
    seed: Option<u64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    edges: Vec<(usize, usize)>,
}

/// Samples `α` then `β`, each i.i.d. uniform on `[b, 1/b]`, from `seed`.
pub fn sample_instance(graph: &RevealedGraph, b: f64, seed: u64) -> Result<RankOneInstance> {
    let mut rng = rng_from_seed(seed);
    let mut inst = sample_instance_with(graph, b, &mut rng)?;
    inst.seed = Some(seed);
    Ok(inst)
}

/// Same as [`sample_instance`] but draws from a caller-owned generator, so
/// the initialization can continue on the same stream.
pub fn sample_instance_with<R: Rng + ?Sized>(
    graph: &RevealedGraph,
    b: f64,
    rng: &mut R,
) -> Result<RankOneInstance> {
    check_b(b)?;
    let n = graph.n();
    let alpha = uniform_in_band(rng, n, b);
    let beta = uniform_in_band(rng, n, b);
    RankOneInstance::new(graph.clone(), alpha, beta, b)
}
