//! The five subcommands. Each validates the whole config before computing,
//! writes its artifacts and a manifest, and reports an exit status.

use std::fmt::Write as _;
use std::time::Instant;

use mfgbelief_core::belief::{belief_holder_modulus, push_forward, weak_solution_residual};
use mfgbelief_core::filter::{payments, simulate_observed};
use mfgbelief_core::monotonicity::{run_trial, witness_scan, PairingReport, Trial};
use mfgbelief_core::solver::{equilibrium_gap, solve_blind_from, IterationRecord};
use mfgbelief_core::{Belief, DriftField, EquilibriumSolution, FilterTrace, Game};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{Format, RunConfig};
use crate::error::LabError;
use crate::output::{density_csv, float, slices_csv, value_csv, Artifacts};

/// How a command ended once its artifacts are written.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    NotConverged,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::NotConverged => 3,
        }
    }
}

fn status(converged: bool) -> Status {
    if converged {
        Status::Success
    } else {
        Status::NotConverged
    }
}

fn history_csv(history: &[(IterationRecord, f64)]) -> String {
    let mut out = String::from("iter,drift_gap,value_change,wall_time\n");
    for (r, wall) in history {
        let _ = writeln!(out, "{},{},{},{}", r.iteration, float(r.drift_gap), float(r.value_change), float(*wall));
    }
    out
}

fn solve(initial: &Belief, game: &Game, cfg: &RunConfig) -> Result<(EquilibriumSolution, Vec<(IterationRecord, f64)>), LabError> {
    let solver = cfg.solver.resolve()?;
    let start = Instant::now();
    let mut history = Vec::new();
    let sol = solve_blind_from(initial, game, &solver, None, &mut |r| history.push((*r, start.elapsed().as_secs_f64())))?;
    Ok((sol, history))
}

fn summary(command: &str, sol: &EquilibriumSolution, game: &Game, tol: f64) -> Result<serde_json::Value, LabError> {
    let d = &sol.diagnostics;
    Ok(json!({
        "command": command,
        "converged": d.converged,
        "iterations": d.iterations,
        "gap": d.final_gap,
        "tol": tol,
        "equilibrium_gap": equilibrium_gap(sol, game)?,
        "hjb_residual": d.hjb_residual,
        "mass_error": d.mass_error,
    }))
}

/// Classical game from a single initial density.
pub fn solve_complete(cfg: &RunConfig, out: &mut Artifacts) -> Result<Status, LabError> {
    let (game, belief, solver) = cfg.game()?;
    if belief.len() != 1 {
        return Err(LabError::Validation("belief: solve-complete takes a single density".into()));
    }
    let (sol, history) = solve(&belief, &game, cfg)?;
    if cfg.wants(Format::Csv) {
        out.write("u.csv", value_csv(&sol.value).as_bytes())?;
        out.write("m.csv", density_csv(&sol.belief.atom_paths()[0]).as_bytes())?;
        out.write("history.csv", history_csv(&history).as_bytes())?;
    }
    out.write_json("summary.json", &summary("solve-complete", &sol, &game, solver.tol)?)?;
    Ok(status(sol.diagnostics.converged))
}

/// Blind game over an atomic belief.
pub fn solve_blind(cfg: &RunConfig, out: &mut Artifacts) -> Result<Status, LabError> {
    let (game, belief, solver) = cfg.game()?;
    let (sol, history) = solve(&belief, &game, cfg)?;
    let path = &sol.belief;
    let grid = *belief.grid();
    if cfg.wants(Format::Csv) {
        out.write("u.csv", value_csv(&sol.value).as_bytes())?;
        let averaged: Vec<Vec<f64>> = (0..game.time.nodes())
            .map(|k| {
                let mut acc = vec![0.0; grid.len()];
                for (w, atom) in path.weights_at(k).iter().zip(path.atom_paths()) {
                    acc.iter_mut().zip(atom.slices[k].values()).for_each(|(a, v)| *a += w * v);
                }
                acc
            })
            .collect();
        out.write("m.csv", slices_csv(&grid, &game.time, &averaged).as_bytes())?;
        for (i, atom) in path.atom_paths().iter().enumerate() {
            out.write(&format!("m_{i}.csv"), density_csv(atom).as_bytes())?;
        }
        out.write("history.csv", history_csv(&history).as_bytes())?;
    }
    if cfg.wants(Format::Json) {
        let holder = if grid.dim() == 1 { Some(belief_holder_modulus(path)?) } else { None };
        let report = json!({
            "times": (0..game.time.nodes()).map(|k| game.time.time(k)).collect::<Vec<_>>(),
            "weights": belief.weights(),
            "atoms": (0..belief.len()).map(|i| format!("m_{i}.csv")).collect::<Vec<_>>(),
            "mass_error": path.max_mass_error(),
            "holder_modulus": holder,
        });
        out.write_json("belief_path.json", &report)?;
    }
    out.write_json("summary.json", &summary("solve-blind", &sol, &game, solver.tol)?)?;
    Ok(status(sol.diagnostics.converged))
}

fn trace_report(trace: &FilterTrace, game: &Game, initial_gap: f64) -> serde_json::Value {
    let atoms = trace.atom_ids[0].len();
    let weights_by_id = |j: usize| {
        let mut w = vec![0.0; atoms];
        for (&id, &x) in trace.atom_ids[j].iter().zip(trace.beliefs[j].weights()) {
            w[id] = x;
        }
        w
    };
    let observations: Vec<_> = (0..trace.nodes.len())
        .map(|j| {
            let gap = if j == 0 { initial_gap } else { trace.observations[j - 1].sup_gap };
            json!({
                "node": trace.nodes[j],
                "t": trace.times[j],
                "n_atoms": trace.beliefs[j].len(),
                "weights": weights_by_id(j),
                "payment_sup_gap": gap,
            })
        })
        .collect();
    let events: Vec<_> =
        trace.events.iter().map(|e| json!({ "node": e.node, "t": e.time, "eliminated": e.eliminated })).collect();
    let segments: Vec<_> = trace
        .segments
        .iter()
        .map(|s| {
            let d = &s.solution.diagnostics;
            json!({
                "start_node": s.start_node,
                "t": game.time.time(s.start_node),
                "converged": d.converged,
                "iterations": d.iterations,
                "gap": d.final_gap,
            })
        })
        .collect();
    json!({
        "replanning": "heuristic: blind equilibrium re-solved on the remaining horizon",
        "true_atom": trace.true_atom,
        "events": events,
        "segments": segments,
        "observations": observations,
    })
}

fn trace_csv(trace: &FilterTrace, initial_gap: f64) -> String {
    let atoms = trace.atom_ids[0].len();
    let mut out = String::from("t,n_atoms");
    for i in 0..atoms {
        let _ = write!(out, ",weight_{i}");
    }
    out.push_str(",payment_sup_gap\n");
    for j in 0..trace.nodes.len() {
        let mut w = vec![0.0; atoms];
        for (&id, &x) in trace.atom_ids[j].iter().zip(trace.beliefs[j].weights()) {
            w[id] = x;
        }
        let _ = write!(out, "{},{}", float(trace.times[j]), trace.beliefs[j].len());
        for x in w {
            let _ = write!(out, ",{}", float(x));
        }
        let gap = if j == 0 { initial_gap } else { trace.observations[j - 1].sup_gap };
        let _ = writeln!(out, ",{}", float(gap));
    }
    out
}

/// Receding-horizon play with observed payments.
pub fn simulate(cfg: &RunConfig, out: &mut Artifacts) -> Result<Status, LabError> {
    let (game, belief, solver) = cfg.game()?;
    let spec = cfg.filter_spec()?;
    let fc = spec.resolve(&game.time)?;
    if spec.true_atom >= belief.len() {
        return Err(LabError::Validation(format!(
            "filter.true_atom: index {} out of range for {} atoms",
            spec.true_atom,
            belief.len()
        )));
    }
    let trace = simulate_observed(&belief, spec.true_atom, &game, &fc, &solver)?;
    let truth = &payments(&belief, &game.cost)?[spec.true_atom];
    let initial_gap = payments(&belief, &game.cost)?.iter().map(|p| p.sup_distance(truth)).fold(0.0, f64::max);
    if cfg.wants(Format::Csv) {
        out.write("trace.csv", trace_csv(&trace, initial_gap).as_bytes())?;
    }
    out.write_json("trace.json", &trace_report(&trace, &game, initial_gap))?;
    Ok(status(trace.segments.iter().all(|s| s.converged())))
}

fn belief_json(mu: &Belief) -> serde_json::Value {
    json!({
        "weights": mu.weights(),
        "atoms": mu.atoms().iter().map(|m| m.values().to_vec()).collect::<Vec<_>>(),
    })
}

/// Sampling certificate of the lifted monotonicity condition.
pub fn certify_monotone(cfg: &RunConfig, out: &mut Artifacts) -> Result<Status, LabError> {
    let grid = cfg.grid()?;
    let cost = cfg.cost_model(grid)?;
    let trials = cfg.certify_spec()?.trials;
    let seed = cfg.seed.unwrap_or(0);
    let samples =
        (0..trials).into_par_iter().map(|i| run_trial(&cost, grid, seed, i)).collect::<Result<Vec<Trial>, _>>()?;
    let report = PairingReport::from_trials(seed, witness_scan(&cost, grid)?, samples)?;
    let model = cfg.cost.as_ref().map(|c| c.running.name()).unwrap_or("unknown");
    let violation = report.value < 0.0;
    let witness = report.witness.as_ref().map(|(a, b)| json!({ "mu1": belief_json(a), "mu2": belief_json(b) }));
    out.write_json(
        "report.json",
        &json!({
            "model": model,
            "trials": report.trials,
            "seed": report.seed,
            "min_pairing": report.value,
            "min_over_trials": report.min_over_trials,
            "violation": violation,
            "certificate": "sampling: a nonnegative minimum is evidence, not proof",
            "witness": witness,
        }),
    )?;
    println!(
        "{model}: min pairing {:.6e} over {trials} trials{}",
        report.value,
        if violation { " (monotonicity violated)" } else { "" }
    );
    Ok(Status::Success)
}

/// Weak-solution residual over a refinement ladder, with an optional
/// weight-perturbed path on the finest rung.
pub fn validate_weak(cfg: &RunConfig, out: &mut Artifacts) -> Result<Status, LabError> {
    let weak = cfg.weak.as_ref().ok_or_else(|| LabError::Validation("weak: missing".into()))?;
    let rungs = weak.rungs(cfg)?;
    let sigma = cfg.diffusion()?;
    let mut rows = Vec::new();
    let mut finest = None;
    for rung in &rungs {
        let b = DriftField::stationary(rung.drift.clone(), rung.time);
        let path = push_forward(&rung.belief, &b, sigma, rung.time)?;
        let residual = weak_solution_residual(&path, &b, sigma, &rung.test)?;
        rows.push((rung.grid, rung.time.steps(), rung.time.dt(), residual));
        finest = Some((path, b));
    }
    let orders: Vec<f64> = rows.windows(2).map(|w| (w[0].3 / w[1].3).ln() / (w[0].2 / w[1].2).ln()).collect();
    let baseline = rows.last().expect("at least two rungs").3;
    let perturbed = match (&weak.perturbation, finest) {
        (Some(p), Some((path, b))) => {
            let rung = rungs.last().expect("at least two rungs");
            let from = (p.from_fraction * rung.time.steps() as f64).round() as usize;
            let path = path.with_weights_from(from, p.weights.clone())?;
            let residual = weak_solution_residual(&path, &b, sigma, &rung.test)?;
            Some((residual, residual / baseline))
        }
        _ => None,
    };
    let violation = perturbed.is_some_and(|(_, ratio)| ratio >= 10.0);
    if cfg.wants(Format::Csv) {
        let mut csv = String::from("n,steps,dt,residual\n");
        for (grid, steps, dt, r) in &rows {
            let _ = writeln!(csv, "{},{steps},{},{}", grid.points_per_axis(), float(*dt), float(*r));
        }
        out.write("weak.csv", csv.as_bytes())?;
    }
    let ladder: Vec<_> = rows
        .iter()
        .map(|(g, steps, dt, r)| json!({ "n": g.points_per_axis(), "steps": steps, "dt": dt, "residual": r }))
        .collect();
    out.write_json(
        "report.json",
        &json!({
            "ladder": ladder,
            "orders": orders,
            "perturbed": perturbed.map(|(r, ratio)| json!({ "residual": r, "ratio_to_baseline": ratio })),
            "violation_detected": violation,
        }),
    )?;
    let order_text: Vec<String> = orders.iter().map(|p| format!("{p:.3}")).collect();
    println!("residual orders in dt: {}", order_text.join(", "));
    if violation {
        println!("violation detected: perturbed path is not a weak solution");
    }
    Ok(Status::Success)
}
