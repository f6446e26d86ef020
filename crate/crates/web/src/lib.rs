//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export returns a JSON string so the page needs no generated
//! TypeScript types. The `*_json` functions hold the logic and run natively.

use rank1_vls::consensus::fill_u_errors;
use rank1_vls::lab::{summarize_cells, CONSENSUS_TOL};
use rank1_vls::spectral::eig_reversible;
use rank1_vls::vls::run_observed;
use rank1_vls::{
    generate_family, init_state, limit_matrix, run, run_experiment, sample_instance, spectral_report,
    ExperimentConfig, Family, Init, StopRule,
};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest sweep the page will run synchronously.
const MAX_SWEEP_TRIALS: usize = 2000;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn family(name: &str) -> Result<Family, String> {
    name.parse().map_err(err)
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

/// One VLS run to consensus. Returns `{t, cost, u_error}` arrays sampled at
/// most `points` times, plus the stop reason.
#[wasm_bindgen]
pub fn simulate(
    family_name: &str,
    n: usize,
    b: f64,
    seed: u64,
    max_iters: u64,
    points: usize,
) -> Result<String, JsError> {
    js(simulate_json(family_name, n, b, seed, max_iters, points))
}

pub fn simulate_json(
    family_name: &str,
    n: usize,
    b: f64,
    seed: u64,
    max_iters: u64,
    points: usize,
) -> Result<String, String> {
    let graph = generate_family(family(family_name)?, n).map_err(err)?;
    let inst = sample_instance(&graph, b, seed).map_err(err)?;
    let state = init_state(&inst, Init::Seed(seed)).map_err(err)?;
    let stop = StopRule {
        max_iters: Some(max_iters),
        cost_tol: None,
        u_consensus_tol: Some(CONSENSUS_TOL),
    };
    let probe = run_observed(state.clone(), &inst, &stop, |_, _| {}).map_err(err)?;
    let total = probe.final_state.t as usize;
    let stride = total.div_ceil(points.max(1)).max(1);
    let mut traj = run(state, &inst, &stop, stride).map_err(err)?;
    fill_u_errors(&mut traj, &inst);
    let t: Vec<u64> = traj.states.iter().map(|s| s.t).collect();
    Ok(json!({
        "t": t,
        "cost": traj.costs,
        "u_error": traj.u_errors,
        "iters": total,
        "reason": traj.reason.as_str(),
    })
    .to_string())
}

/// Limit-matrix spectrum and bounds for one sampled instance.
#[wasm_bindgen]
pub fn spectrum(family_name: &str, n: usize, b: f64, seed: u64) -> Result<String, JsError> {
    js(spectrum_json(family_name, n, b, seed))
}

pub fn spectrum_json(family_name: &str, n: usize, b: f64, seed: u64) -> Result<String, String> {
    let f = family(family_name)?;
    let graph = generate_family(f, n).map_err(err)?;
    let inst = sample_instance(&graph, b, seed).map_err(err)?;
    let r = spectral_report(&inst, f.name()).map_err(err)?;
    let (p, pi) = limit_matrix(&inst);
    let eig = eig_reversible(&p, &pi).map_err(err)?;
    Ok(json!({
        "eigenvalues": eig.values,
        "lambda2": r.lambda2,
        "lambda_n": r.lambda_n,
        "rho": r.rho,
        "eta_spec": 1.0 / (1.0 - r.rho),
        "theorem2_gap": r.theorem2_gap,
        "gershgorin_floor": r.gershgorin_floor,
        "diag_min": r.diag_min,
        "max_degree": r.max_degree,
        "diameter": r.diameter,
    })
    .to_string())
}

/// Small Monte Carlo sweep over `n` for one family and band.
#[wasm_bindgen]
pub fn eta_sweep(family_name: &str, n_values: &[u32], b: f64, trials: usize, seed: u64) -> Result<String, JsError> {
    js(eta_sweep_json(family_name, n_values, b, trials, seed))
}

pub fn eta_sweep_json(
    family_name: &str,
    n_values: &[u32],
    b: f64,
    trials: usize,
    seed: u64,
) -> Result<String, String> {
    let ns: Vec<usize> = n_values.iter().map(|&n| n as usize).collect();
    if ns.len() * trials > MAX_SWEEP_TRIALS {
        return Err(format!("at most {MAX_SWEEP_TRIALS} trials per sweep"));
    }
    let mut cfg = ExperimentConfig::new(family(family_name)?, ns, vec![b]);
    cfg.trials = trials;
    cfg.seed = seed;
    cfg.max_iters = 1_000_000;
    let records = run_experiment(&cfg).map_err(err)?;
    let cells: Vec<_> = summarize_cells(&records)
        .map_err(err)?
        .into_iter()
        .map(|c| {
            json!({
                "n": c.n,
                "max_eta": c.max_eta,
                "mean_eta": c.mean_eta,
                "median_eta": c.median_eta,
                "eta_spec": c.eta_spec,
                "eta_bound": c.eta_bound,
            })
        })
        .collect();
    Ok(json!({ "cells": cells }).to_string())
}
