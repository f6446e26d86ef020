//! Vertex Least Squares: exact alternating minimization over row and
//! column factors.
//!
//! One iteration solves every row's scalar least-squares problem against the
//! current column factors, then every column's problem against the *new* row
//! factors:
//!
//! ```text
//! x_i ← Σ_{j~i} M_ij y_j / Σ_{j~i} y_j²
//! y_j ← Σ_{i~j} M_ij x_i / Σ_{i~j} x_i²
//! ```

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::instance::{rng_from_seed, uniform_in_band, RankOneInstance};

const INIT_STREAM: u64 = 1;

/// Row and column factor estimates after `t` iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct VlsState {
    pub t: u64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl VlsState {
    /// Explicit initialization; every entry must lie in `[b, 1/b]`.
    pub fn explicit(inst: &RankOneInstance, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = inst.n();
        if x.len() != n || y.len() != n {
            return Err(Error::InvalidParameter(format!(
                "initial vectors have lengths ({}, {}), expected {n}",
                x.len(),
                y.len()
            )));
        }
        let (lo, hi) = (inst.b(), 1.0 / inst.b());
        for (name, v) in [("x", &x), ("y", &y)] {
            for (k, &value) in v.iter().enumerate() {
                if !(lo..=hi).contains(&value) {
                    return Err(Error::InitOutOfRange {
                        which: format!("{name}[{}]", k + 1),
                        value,
                        lo,
                        hi,
                    });
                }
            }
        }
        Ok(VlsState { t: 0, x, y })
    }

    /// Draws `x` then `y` uniform on `[b, 1/b]` from `rng`.
    pub fn random<R: Rng + ?Sized>(inst: &RankOneInstance, rng: &mut R) -> Self {
        let x = uniform_in_band(rng, inst.n(), inst.b());
        let y = uniform_in_band(rng, inst.n(), inst.b());
        VlsState { t: 0, x, y }
    }

    /// Draws from stream 1 of `seed`; instances sampled from the same seed
    /// use stream 0, so the two never coincide.
    pub fn seeded(inst: &RankOneInstance, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        rng.set_stream(INIT_STREAM);
        VlsState::random(inst, &mut rng)
    }

    pub fn cost(&self, inst: &RankOneInstance) -> f64 {
        inst.project_revealed(&self.x, &self.y)
    }

    /// One full VLS iteration (rows, then columns).
    pub fn step(&self, inst: &RankOneInstance) -> VlsState {
        let mut next = self.clone();
        next.step_in_place(inst);
        next
    }

    pub fn step_in_place(&mut self, inst: &RankOneInstance) {
        let g = inst.graph();
        for i in 0..inst.n() {
            let (mut num, mut den) = (0.0, 0.0);
            for (&j, &m) in g.row_neighbors(i).iter().zip(inst.row_values(i)) {
                num += m * self.y[j];
                den += self.y[j] * self.y[j];
            }
            assert!(den > 0.0, "row {i}: zero denominator");
            self.x[i] = num / den;
        }
        for j in 0..inst.n() {
            let (mut num, mut den) = (0.0, 0.0);
            for (&i, &m) in g.col_neighbors(j).iter().zip(inst.col_values(j)) {
                num += m * self.x[i];
                den += self.x[i] * self.x[i];
            }
            assert!(den > 0.0, "column {j}: zero denominator");
            self.y[j] = num / den;
        }
        self.t += 1;
    }

    /// Lifted row variable `u_i = x_i / α_i`.
    pub fn u(&self, inst: &RankOneInstance) -> Vec<f64> {
        self.x.iter().zip(inst.alpha()).map(|(x, a)| x / a).collect()
    }

    /// `(max u − min u) / max u`.
    pub fn relative_spread(&self, inst: &RankOneInstance) -> f64 {
        let (lo, hi) = self
            .x
            .iter()
            .zip(inst.alpha())
            .map(|(x, a)| x / a)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), u| {
                (lo.min(u), hi.max(u))
            });
        (hi - lo) / hi
    }
}

/// Tracks the per-iteration guarantees of the iteration:
/// non-increasing cost, `b³ ≤ x, y ≤ b⁻³` and `b² ≤ u, v ≤ b⁻²`.
///
/// Cost increases up to the rounding floor of the cost evaluation
/// ([`RankOneInstance::cost_noise_floor`]) plus a relative `1e-12` are
/// treated as ties; box checks allow a relative `1e-12`.
#[derive(Debug, Clone)]
pub struct InvariantMonitor {
    lo3: f64,
    hi3: f64,
    lo2: f64,
    hi2: f64,
    noise: f64,
    last_cost: Option<f64>,
    pub checked: u64,
    pub cost_increases: u64,
    pub factor_box_violations: u64,
    pub lifted_box_violations: u64,
}

const BOX_SLACK: f64 = 1e-12;

impl InvariantMonitor {
    pub fn new(inst: &RankOneInstance) -> Self {
        let b = inst.b();
        InvariantMonitor {
            lo3: b.powi(3) * (1.0 - BOX_SLACK),
            hi3: b.powi(-3) * (1.0 + BOX_SLACK),
            lo2: b.powi(2) * (1.0 - BOX_SLACK),
            hi2: b.powi(-2) * (1.0 + BOX_SLACK),
            noise: inst.cost_noise_floor(),
            last_cost: None,
            checked: 0,
            cost_increases: 0,
            factor_box_violations: 0,
            lifted_box_violations: 0,
        }
    }

    pub fn observe(&mut self, state: &VlsState, cost: f64, inst: &RankOneInstance) {
        if let Some(prev) = self.last_cost {
            if cost > prev + prev * 1e-12 + self.noise {
                self.cost_increases += 1;
            }
        }
        self.last_cost = Some(cost);
        let in3 = |v: &f64| (self.lo3..=self.hi3).contains(v);
        let in2 = |v: f64| (self.lo2..=self.hi2).contains(&v);
        if !state.x.iter().chain(&state.y).all(in3) {
            self.factor_box_violations += 1;
        }
        let u_ok = state.x.iter().zip(inst.alpha()).all(|(x, a)| in2(x / a));
        let v_ok = state.y.iter().zip(inst.beta()).all(|(y, b)| in2(y / b));
        if !(u_ok && v_ok) {
            self.lifted_box_violations += 1;
        }
        self.checked += 1;
    }

    pub fn ok(&self) -> bool {
        self.cost_increases == 0 && self.factor_box_violations == 0 && self.lifted_box_violations == 0
    }
}

/// Seeded random initialization, or explicit starting vectors.
pub enum Init {
    Seed(u64),
    Explicit { x: Vec<f64>, y: Vec<f64> },
}

pub fn init_state(inst: &RankOneInstance, init: Init) -> Result<VlsState> {
    match init {
        Init::Seed(seed) => Ok(VlsState::seeded(inst, seed)),
        Init::Explicit { x, y } => VlsState::explicit(inst, x, y),
    }
}

/// Stopping rule; a run ends when any active criterion fires.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub max_iters: Option<u64>,
    pub cost_tol: Option<f64>,
    /// Tolerance on the relative spread of `u` (see [`VlsState::relative_spread`]).
    pub u_consensus_tol: Option<f64>,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            max_iters: Some(1_000_000),
            cost_tol: Some(1e-16),
            u_consensus_tol: None,
        }
    }
}

impl StopRule {
    fn validate(&self) -> Result<()> {
        if self.max_iters.is_none() && self.cost_tol.is_none() && self.u_consensus_tol.is_none() {
            return Err(Error::NoStopCriterion);
        }
        Ok(())
    }

    fn check(&self, state: &VlsState, cost: f64, inst: &RankOneInstance) -> Option<StopReason> {
        if self.cost_tol.is_some_and(|tol| cost <= tol) {
            return Some(StopReason::CostTol);
        }
        if self
            .u_consensus_tol
            .is_some_and(|tol| state.relative_spread(inst) <= tol)
        {
            return Some(StopReason::ConsensusTol);
        }
        if self.max_iters.is_some_and(|m| state.t >= m) {
            return Some(StopReason::MaxIters);
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    CostTol,
    ConsensusTol,
    /// Ran out of iterations. A normal outcome, not an error.
    MaxIters,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::CostTol => "cost_tol",
            StopReason::ConsensusTol => "consensus_tol",
            StopReason::MaxIters => "max_iters",
        }
    }
}

/// Outcome of a run that did not keep its states.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub final_state: VlsState,
    pub final_cost: f64,
    pub reason: StopReason,
}

/// Iterates from `state` until `stop` fires, calling `observe` with every
/// state (including the initial one) and its cost.
pub fn run_observed(
    mut state: VlsState,
    inst: &RankOneInstance,
    stop: &StopRule,
    mut observe: impl FnMut(&VlsState, f64),
) -> Result<RunSummary> {
    stop.validate()?;
    loop {
        let cost = state.cost(inst);
        observe(&state, cost);
        if let Some(reason) = stop.check(&state, cost, inst) {
            return Ok(RunSummary {
                final_state: state,
                final_cost: cost,
                reason,
            });
        }
        state.step_in_place(inst);
    }
}

/// Recorded iterates of one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub stride: usize,
    pub states: Vec<VlsState>,
    pub costs: Vec<f64>,
    /// `‖u_t − u*‖₂` per recorded state; empty until filled by
    /// [`crate::consensus::fill_u_errors`].
    pub u_errors: Vec<f64>,
    pub reason: StopReason,
}

impl Trajectory {
    pub fn final_state(&self) -> &VlsState {
        self.states.last().expect("trajectory holds at least one state")
    }

    pub fn final_cost(&self) -> f64 {
        *self.costs.last().expect("trajectory holds at least one cost")
    }

    /// Every recorded cost is at most its predecessor plus `slack`.
    pub fn is_cost_monotone(&self, slack: f64) -> bool {
        self.costs.windows(2).all(|w| w[1] <= w[0] + slack)
    }

    /// CSV with columns `t,cost,frobenius_error,u_error`; `u_error` is blank
    /// when the trajectory has not been lifted.
    pub fn to_csv(&self, inst: &RankOneInstance) -> String {
        let mut out = String::from("t,cost,frobenius_error,u_error\n");
        for (k, (s, c)) in self.states.iter().zip(&self.costs).enumerate() {
            let fro = inst.frobenius_error(&s.x, &s.y);
            let _ = write!(out, "{},{:e},{:e},", s.t, c, fro);
            if let Some(e) = self.u_errors.get(k) {
                let _ = write!(out, "{e:e}");
            }
            out.push('\n');
        }
        out
    }
}

/// Runs to completion, keeping every `stride`-th state plus the last one.
pub fn run(
    state: VlsState,
    inst: &RankOneInstance,
    stop: &StopRule,
    stride: usize,
) -> Result<Trajectory> {
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be at least 1".into()));
    }
    let mut states = Vec::new();
    let mut costs = Vec::new();
    let summary = run_observed(state, inst, stop, |s, c| {
        if s.t % stride as u64 == 0 {
            states.push(s.clone());
            costs.push(c);
        }
    })?;
    if states.last().map(|s| s.t) != Some(summary.final_state.t) {
        states.push(summary.final_state);
        costs.push(summary.final_cost);
    }
    Ok(Trajectory {
        stride,
        states,
        costs,
        u_errors: Vec::new(),
        reason: summary.reason,
    })
}
