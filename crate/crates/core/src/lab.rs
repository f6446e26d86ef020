//! Monte Carlo rate experiments.
//!
//! Each trial samples an instance and an initialization, runs VLS to
//! consensus, measures the empirical asymptotic rate `γ` of
//! `‖u_t − u*‖₂`, and compares `η = 1/(1 − γ)` with the spectral radius of the
//! limit matrix and the closed-form degree bound.
//!
//! Rate estimation takes two passes over the same deterministic iteration.
//! The first runs until the relative spread of `u` falls to
//! [`CONSENSUS_TOL`] and fixes `u*` as the final iterate. Since consensus
//! iterates stay in the convex hull of the current values, `u*` is then
//! within the final spread of the true limit. The second pass replays the
//! run and keeps the last `tail_window` errors above a resolution floor a few
//! decades over that uncertainty.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::consensus::l2_distance;
use crate::error::{Error, Result};
use crate::graph::{generate_family, Family, RevealedGraph};
use crate::instance::{check_b, rng_from_seed, sample_instance_with, RankOneInstance};
use crate::spectral::{spectral_report, theorem2_bound};
use crate::vls::{InvariantMonitor, Trajectory, VlsState};

/// Relative spread of `u` at which the first pass stops.
pub const CONSENSUS_TOL: f64 = 1e-13;

/// Errors within this factor of the `u*` uncertainty are not used.
const FLOOR_FACTOR: f64 = 1e4;

/// Absolute lower guard on usable errors.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

/// Sweep definition. Every `(n, b)` cell runs `trials` independent trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: Family,
    pub n_values: Vec<usize>,
    pub b_values: Vec<f64>,
    #[serde(default = "defaults::trials")]
    pub trials: usize,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default = "defaults::max_iters")]
    pub max_iters: u64,
    #[serde(default = "defaults::tail_window")]
    pub tail_window: usize,
    /// A trial counts as converged when its final cost is below this.
    #[serde(default = "defaults::rate_tol")]
    pub rate_tol: f64,
}

mod defaults {
    pub fn trials() -> usize {
        50
    }
    pub fn seed() -> u64 {
        super::DEFAULT_SEED
    }
    pub fn max_iters() -> u64 {
        10_000_000
    }
    pub fn tail_window() -> usize {
        20
    }
    pub fn rate_tol() -> f64 {
        1e-18
    }
}

/// Seed used whenever none is given.
pub const DEFAULT_SEED: u64 = 20_210_301;

impl ExperimentConfig {
    pub fn new(family: Family, n_values: Vec<usize>, b_values: Vec<f64>) -> Self {
        ExperimentConfig {
            family,
            n_values,
            b_values,
            trials: defaults::trials(),
            seed: defaults::seed(),
            max_iters: defaults::max_iters(),
            tail_window: defaults::tail_window(),
            rate_tol: defaults::rate_tol(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.tail_window < 2 {
            return Err(Error::InvalidParameter("tail_window must be at least 2".into()));
        }
        if self.n_values.is_empty() || self.b_values.is_empty() {
            return Err(Error::InvalidParameter("n_values and b_values must be non-empty".into()));
        }
        if self.n_values.contains(&0) || self.n_values.contains(&1) {
            return Err(Error::InvalidParameter("every n must be at least 2".into()));
        }
        for &b in &self.b_values {
            check_b(b)?;
        }
        if !(self.rate_tol > 0.0) {
            return Err(Error::InvalidParameter("rate_tol must be positive".into()));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    /// Final cost below `rate_tol` and a full tail window available.
    Converged,
    /// Converged too fast to leave a tail (e.g. the complete graph); `γ = 0`.
    InsufficientTail,
    /// Hit `max_iters`. `γ` is the decay rate of the successive differences
    /// `‖u_{t+1} − u_t‖` between the windows ending at `max_iters/2` and at
    /// `max_iters`; while the slowest mode has not yet taken over this
    /// underestimates the asymptotic rate.
    NotConverged,
    /// Spectral analysis of the limit matrix failed.
    NumericalFailure,
    /// Any other per-trial error; numeric fields are NaN.
    Failed,
}

/// One row of experiment output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub family: Family,
    pub n: usize,
    pub b: f64,
    pub trial: usize,
    pub seed: u64,
    pub max_degree: usize,
    pub gamma_est: f64,
    pub eta: f64,
    pub rho_limit: f64,
    pub theorem2_bound: f64,
    pub iters: u64,
    pub final_cost: f64,
    /// Iteration at which the rate window starts.
    pub tail_start: u64,
    pub status: TrialStatus,
    pub invariants_ok: bool,
}

impl TrialRecord {
    pub fn is_converged(&self) -> bool {
        self.status == TrialStatus::Converged
    }
}

/// splitmix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial seed, a fixed hash of the cell coordinates and trial index.
pub fn derive_seed(base: u64, family: Family, n: usize, b: f64, trial: usize) -> u64 {
    let family_tag = Family::ALL.iter().position(|&f| f == family).unwrap_or(0) as u64;
    [family_tag, n as u64, b.to_bits(), trial as u64]
        .into_iter()
        .fold(mix64(base), |h, v| mix64(h ^ v))
}

/// Geometric mean of successive error ratios over the last `tail_window`
/// samples whose error exceeds `floor`, clamped to `[0, 1)`.
///
/// Samples are `(t, error)` pairs in increasing `t`; gaps in `t` (strided
/// recording) are accounted for per iteration.
pub fn estimate_gamma(samples: &[(u64, f64)], tail_window: usize, floor: f64) -> Result<f64> {
    let floor = floor.max(UNDERFLOW_FLOOR);
    let usable: Vec<(u64, f64)> = samples
        .iter()
        .copied()
        .take_while(|&(_, e)| e > floor)
        .collect();
    if tail_window < 2 || usable.len() < tail_window {
        return Err(Error::InsufficientTail {
            available: usable.len(),
            needed: tail_window.max(2),
        });
    }
    let window = &usable[usable.len() - tail_window..];
    Ok(window_rate(window))
}

fn window_rate(window: &[(u64, f64)]) -> f64 {
    let (t0, e0) = window[0];
    let (t1, e1) = window[window.len() - 1];
    let span = (t1 - t0) as f64;
    let gamma = ((e1.ln() - e0.ln()) / span).exp();
    gamma.clamp(0.0, 1.0 - f64::EPSILON)
}

/// Mean iteration and mean log error of a window.
fn log_centroid(window: &VecDeque<(u64, f64)>) -> Option<(f64, f64)> {
    if window.is_empty() || window.iter().any(|&(_, e)| e <= UNDERFLOW_FLOOR) {
        return None;
    }
    let k = window.len() as f64;
    let t = window.iter().map(|&(t, _)| t as f64).sum::<f64>() / k;
    let l = window.iter().map(|&(_, e)| e.ln()).sum::<f64>() / k;
    Some((t, l))
}

/// Resolution floor for errors measured against a `u*` whose own spread is
/// `spread` (absolute).
pub fn resolution_floor(u_star: &[f64], spread: f64) -> f64 {
    let scale = u_star.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let n = u_star.len() as f64;
    (FLOOR_FACTOR * n.sqrt() * (spread + 8.0 * f64::EPSILON * scale)).max(UNDERFLOW_FLOOR)
}

fn abs_spread(u: &[f64]) -> f64 {
    let lo = u.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

/// [`estimate_gamma`] on a recorded trajectory with lifted errors, taking
/// the floor from the final state's spread.
pub fn estimate_gamma_from_trajectory(
    traj: &Trajectory,
    inst: &RankOneInstance,
    tail_window: usize,
) -> Result<f64> {
    let u_star = traj.final_state().u(inst);
    let floor = resolution_floor(&u_star, abs_spread(&u_star));
    let samples: Vec<(u64, f64)> = traj
        .states
        .iter()
        .zip(&traj.u_errors)
        .map(|(s, &e)| (s.t, e))
        .collect();
    estimate_gamma(&samples, tail_window, floor)
}

/// Detects when the spread of `u` stops shrinking because it has hit the
/// rounding floor: at every power-of-two iteration `T`, the minimum over
/// `(T/2, T]` must be at most half the minimum over `[0, T/2]`.
struct Stagnation {
    checkpoint: u64,
    best_before: f64,
    best_since: f64,
}

impl Stagnation {
    fn new() -> Self {
        Stagnation {
            checkpoint: 1,
            best_before: f64::INFINITY,
            best_since: f64::INFINITY,
        }
    }

    fn observe(&mut self, t: u64, spread: f64) -> bool {
        self.best_since = self.best_since.min(spread);
        if t < self.checkpoint {
            return false;
        }
        let stalled = self.best_since > 0.5 * self.best_before;
        self.best_before = self.best_before.min(self.best_since);
        self.best_since = f64::INFINITY;
        self.checkpoint *= 2;
        stalled
    }
}

/// Runs one trial of a cell on a pre-built graph.
pub fn run_trial(
    graph: &RevealedGraph,
    family: Family,
    b: f64,
    trial: usize,
    cfg: &ExperimentConfig,
) -> Result<TrialRecord> {
    let n = graph.n();
    let seed = derive_seed(cfg.seed, family, n, b, trial);
    let mut rng = rng_from_seed(seed);
    let inst = sample_instance_with(graph, b, &mut rng)?;
    let start = VlsState::random(&inst, &mut rng);

    // pass 1: run to consensus, checking invariants and keeping windows of
    // successive differences for the non-converged fallback
    let mut monitor = InvariantMonitor::new(&inst);
    let mut diffs: VecDeque<(u64, f64)> = VecDeque::with_capacity(cfg.tail_window + 1);
    let mut state = start.clone();
    let mut u = state.u(&inst);
    let mut cost = state.cost(&inst);
    let mut mid_diffs = VecDeque::new();
    let mut stagnation = Stagnation::new();
    monitor.observe(&state, cost, &inst);
    loop {
        let spread = state.relative_spread(&inst);
        if spread <= CONSENSUS_TOL
            || state.t >= cfg.max_iters
            || (stagnation.observe(state.t, spread) && cost < cfg.rate_tol)
        {
            break;
        }
        state.step_in_place(&inst);
        cost = state.cost(&inst);
        monitor.observe(&state, cost, &inst);
        let next_u = state.u(&inst);
        if diffs.len() == cfg.tail_window {
            diffs.pop_front();
        }
        diffs.push_back((state.t, l2_distance(&next_u, &u)));
        if state.t == cfg.max_iters / 2 {
            mid_diffs = diffs.clone();
        }
        u = next_u;
    }
    let iters = state.t;
    let final_cost = cost;

    let u_star = u;
    let (status, gamma_est, tail_start) = if final_cost >= cfg.rate_tol {
        let gamma = match (log_centroid(&mid_diffs), log_centroid(&diffs)) {
            (Some((t0, l0)), Some((t1, l1))) if t1 > t0 => {
                ((l1 - l0) / (t1 - t0)).exp().clamp(0.0, 1.0 - f64::EPSILON)
            }
            _ => 0.0,
        };
        let start = mid_diffs.front().map_or(0, |p| p.0);
        (TrialStatus::NotConverged, gamma, start)
    } else {
        // pass 2: replay and stream errors against u*
        let floor = resolution_floor(&u_star, abs_spread(&u_star));
        let mut tail: VecDeque<(u64, f64)> = VecDeque::with_capacity(cfg.tail_window);
        let mut state = start;
        loop {
            let e = l2_distance(&state.u(&inst), &u_star);
            if e <= floor || state.t >= iters {
                break;
            }
            if tail.len() == cfg.tail_window {
                tail.pop_front();
            }
            tail.push_back((state.t, e));
            state.step_in_place(&inst);
        }
        let samples: Vec<(u64, f64)> = tail.into_iter().collect();
        match estimate_gamma(&samples, cfg.tail_window, floor) {
            Ok(g) => (TrialStatus::Converged, g, samples[0].0),
            Err(Error::InsufficientTail { .. }) => (TrialStatus::InsufficientTail, 0.0, 0),
            Err(e) => return Err(e),
        }
    };

    let bound = theorem2_bound(n, graph.max_degree(), b)?;
    let (status, rho_limit) = match spectral_report(&inst, family.name()) {
        Ok(r) => (status, r.rho),
        Err(e) if e.is_numerical() => (TrialStatus::NumericalFailure, f64::NAN),
        Err(e) => return Err(e),
    };
    Ok(TrialRecord {
        family,
        n,
        b,
        trial,
        seed,
        max_degree: graph.max_degree(),
        gamma_est,
        eta: 1.0 / (1.0 - gamma_est),
        rho_limit,
        theorem2_bound: bound.bound,
        iters,
        final_cost,
        tail_start,
        status,
        invariants_ok: monitor.ok(),
    })
}

/// Runs every trial of every `(n, b)` cell. Output is sorted by
/// `(n, b, trial)` and identical for identical configs. A failing trial is
/// recorded with a failure status and does not stop the sweep.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let graphs: BTreeMap<usize, RevealedGraph> = cfg
        .n_values
        .iter()
        .map(|&n| generate_family(cfg.family, n).map(|g| (n, g)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, f64, usize)> = cfg
        .n_values
        .iter()
        .flat_map(|&n| {
            cfg.b_values
                .iter()
                .flat_map(move |&b| (0..cfg.trials).map(move |t| (n, b, t)))
        })
        .collect();
    let work = |&(n, b, t): &(usize, f64, usize)| {
        let graph = &graphs[&n];
        run_trial(graph, cfg.family, b, t, cfg).unwrap_or_else(|e| TrialRecord {
            family: cfg.family,
            n,
            b,
            trial: t,
            seed: derive_seed(cfg.seed, cfg.family, n, b, t),
            max_degree: graph.max_degree(),
            gamma_est: f64::NAN,
            eta: f64::NAN,
            rho_limit: f64::NAN,
            theorem2_bound: f64::NAN,
            iters: 0,
            final_cost: f64::NAN,
            tail_start: 0,
            status: if e.is_numerical() {
                TrialStatus::NumericalFailure
            } else {
                TrialStatus::Failed
            },
            invariants_ok: false,
        })
    };

    #[cfg(feature = "parallel")]
    let mut records: Vec<TrialRecord> = {
        use rayon::prelude::*;
        jobs.par_iter().map(work).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let mut records: Vec<TrialRecord> = jobs.iter().map(work).collect();

    records.sort_by(|a, b| {
        (a.family, a.n)
            .cmp(&(b.family, b.n))
            .then(a.b.total_cmp(&b.b))
            .then(a.trial.cmp(&b.trial))
    });
    Ok(records)
}

pub fn records_to_csv(records: &[TrialRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn records_from_csv(text: &str) -> Result<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// One row per `(family, b, n)`, x = n.
    EtaVsN,
    /// One row per `(family, n, b)`, x = b.
    EtaVsB,
}

impl std::str::FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eta_vs_n" | "eta-vs-n" => Ok(Figure::EtaVsN),
            "eta_vs_b" | "eta-vs-b" => Ok(Figure::EtaVsB),
            _ => Err(Error::InvalidParameter(format!("unknown figure `{s}`"))),
        }
    }
}

/// Aggregate of one experiment cell over its successful trials.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub family: Family,
    pub n: usize,
    pub b: f64,
    pub trials: usize,
    pub max_eta: f64,
    pub mean_eta: f64,
    pub median_eta: f64,
    /// `1/(1 − ρ)` with the largest limit-matrix `ρ` in the cell.
    pub eta_spec: f64,
    /// `1/(1 − bound) = n(n−1)Δ/b¹²`.
    pub eta_bound: f64,
}

pub fn summarize_cells(records: &[TrialRecord]) -> Result<Vec<CellSummary>> {
    let mut cells: BTreeMap<(Family, usize, u64), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        cells.entry((r.family, r.n, r.b.to_bits())).or_default().push(r);
    }
    cells
        .into_values()
        .map(|rs| {
            let first = rs[0];
            let mut etas: Vec<f64> = rs.iter().map(|r| r.eta).filter(|e| e.is_finite()).collect();
            if etas.is_empty() {
                return Err(Error::EmptyCell(format!(
                    "{} n={} b={}: no successful trials",
                    first.family, first.n, first.b
                )));
            }
            etas.sort_by(f64::total_cmp);
            let k = etas.len();
            let median = if k % 2 == 1 {
                etas[k / 2]
            } else {
                0.5 * (etas[k / 2 - 1] + etas[k / 2])
            };
            let rho = rs
                .iter()
                .map(|r| r.rho_limit)
                .filter(|r| r.is_finite())
                .fold(f64::NEG_INFINITY, f64::max);
            let bound = theorem2_bound(first.n, first.max_degree, first.b)?;
            Ok(CellSummary {
                family: first.family,
                n: first.n,
                b: first.b,
                trials: k,
                max_eta: etas[k - 1],
                mean_eta: etas.iter().sum::<f64>() / k as f64,
                median_eta: median,
                eta_spec: 1.0 / (1.0 - rho),
                eta_bound: 1.0 / bound.gap,
            })
        })
        .collect()
}

/// Plot-ready CSV for one figure axis.
pub fn emit_figure_data(records: &[TrialRecord], figure: Figure) -> Result<String> {
    if records.is_empty() {
        return Err(Error::EmptyCell("no trial records".into()));
    }
    let mut cells = summarize_cells(records)?;
    let mut out = String::new();
    match figure {
        Figure::EtaVsN => {
            cells.sort_by(|a, b| {
                a.family
                    .cmp(&b.family)
                    .then(a.b.total_cmp(&b.b))
                    .then(a.n.cmp(&b.n))
            });
            out.push_str("family,b,n,trials,max_eta,mean_eta,median_eta,eta_spec,eta_bound\n");
            for c in &cells {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{:e},{:e},{:e},{:e},{:e}",
                    c.family, c.b, c.n, c.trials, c.max_eta, c.mean_eta, c.median_eta, c.eta_spec, c.eta_bound
                );
            }
        }
        Figure::EtaVsB => {
            cells.sort_by(|a, b| {
                (a.family, a.n)
                    .cmp(&(b.family, b.n))
                    .then(a.b.total_cmp(&b.b))
            });
            out.push_str("family,n,b,trials,max_eta,mean_eta,median_eta,eta_spec,eta_bound\n");
            for c in &cells {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{:e},{:e},{:e},{:e},{:e}",
                    c.family, c.n, c.b, c.trials, c.max_eta, c.mean_eta, c.median_eta, c.eta_spec, c.eta_bound
                );
            }
        }
    }
    Ok(out)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
