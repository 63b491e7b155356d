//! Blind-game equilibria by iterating the best-response map
//! `drift -> belief path -> aggregated costs -> HJB -> drift`.
//!
//! The iteration starts from the best response to the belief transported
//! without drift. Each round compares the best response with the current
//! drift; once they agree to `tol` the best response itself is returned, so
//! the solution's drift is exactly a best response to its value function
//! and its belief is exactly the pushforward of the initial belief.
//!
//! Where the optimal control is not unique (`H = |p|` with a flat value
//! function) the current drift is kept. Otherwise the iteration can cycle in
//! games whose costs vanish along the equilibrium.

use alloc::vec::Vec;

use crate::belief::{aggregate_running, aggregate_terminal, push_forward, Belief, BeliefPath, CostModel};
use crate::error::{Error, Result};
use crate::hjb_fp::{self, solve_hjb_backward, Diffusion, DriftField, Hamiltonian, TimeGrid, ValuePath};
use crate::torus::{Density, ScalarField};

/// Everything that defines an instance apart from the initial belief.
#[derive(Debug, Clone)]
pub struct Game {
    pub cost: CostModel,
    pub hamiltonian: Hamiltonian,
    pub sigma: Diffusion,
    pub time: TimeGrid,
}

impl Game {
    pub fn new(cost: CostModel, hamiltonian: Hamiltonian, sigma: Diffusion, time: TimeGrid) -> Self {
        Game { cost, hamiltonian, sigma, time }
    }

    /// Same game restricted to `[t_k, end]`.
    pub fn tail(&self, k: usize) -> Result<Game> {
        Ok(Game { time: self.time.tail(k)?, ..self.clone() })
    }
}

/// Update rule between best-response rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Averaging {
    /// `b <- (1 - theta) b + theta BR(b)`.
    #[default]
    Picard,
    /// `b <- b + (BR(b) - b) / (k + 1)` at round `k`.
    FictitiousPlay,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub relaxation: f64,
    /// Stop once the sup-norm drift change falls below this.
    pub tol: f64,
    pub max_iter: usize,
    pub averaging: Averaging,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { relaxation: 0.5, tol: 1e-6, max_iter: 500, averaging: Averaging::Picard }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::param("relaxation", "must lie in (0, 1]"));
        }
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::param("tol", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `sup |BR(b) - b|`.
    pub drift_gap: f64,
    /// `sup |u_k - u_{k-1}|`; the first round compares against zero.
    pub value_change: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub iterations: usize,
    pub final_gap: f64,
    /// Sup-norm change of the value when the HJB is re-solved against the
    /// returned belief path.
    pub hjb_residual: f64,
    pub mass_error: f64,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSolution {
    pub value: ValuePath,
    pub belief: BeliefPath,
    pub drift: DriftField,
    pub diagnostics: Diagnostics,
}

/// Value function against a belief path.
fn value_against(path: &BeliefPath, game: &Game) -> Result<ValuePath> {
    let running = (0..game.time.nodes())
        .map(|k| aggregate_running(&path.slice(k), &game.cost))
        .collect::<Result<Vec<ScalarField>>>()?;
    let terminal = aggregate_terminal(&path.final_belief(), &game.cost)?;
    solve_hjb_backward(&running, &terminal, &game.hamiltonian, game.sigma, game.time)
}

fn best_response(initial: &Belief, drift: &DriftField, game: &Game) -> Result<(ValuePath, DriftField)> {
    let path = push_forward(initial, drift, game.sigma, game.time)?;
    let value = value_against(&path, game)?;
    let br = hjb_fp::best_response(&value, &game.hamiltonian, drift)?;
    Ok((value, br))
}

fn value_distance(a: &ValuePath, b: Option<&ValuePath>) -> f64 {
    match b {
        Some(b) => a.slices.iter().zip(&b.slices).map(|(x, y)| x.sup_distance(y)).fold(0.0, f64::max),
        None => a.slices.iter().map(ScalarField::sup_norm).fold(0.0, f64::max),
    }
}

/// Blind equilibrium from `initial` with the default starting drift.
pub fn solve_blind(initial: &Belief, game: &Game, cfg: &SolverConfig) -> Result<EquilibriumSolution> {
    solve_blind_from(initial, game, cfg, None, &mut |_| {})
}

/// Blind equilibrium starting the iteration at `start` (or the best response
/// to the undriven belief), reporting every round to `observer`.
///
/// Running out of iterations is not an error: the last best response is
/// returned with `converged = false`.
pub fn solve_blind_from(
    initial: &Belief,
    game: &Game,
    cfg: &SolverConfig,
    start: Option<&DriftField>,
    observer: &mut dyn FnMut(&IterationRecord),
) -> Result<EquilibriumSolution> {
    cfg.validate()?;
    let grid = *initial.grid();
    let mut drift = match start {
        Some(b) => {
            grid.ensure_same(b.grid())?;
            if b.slices.len() != game.time.nodes() {
                return Err(Error::SliceCount { expected: game.time.nodes(), got: b.slices.len() });
            }
            b.clone()
        }
        None => best_response(initial, &DriftField::zeros(grid, game.time), game)?.1,
    };
    let mut history = Vec::new();
    let mut previous: Option<ValuePath> = None;
    let mut iteration = 0;
    loop {
        iteration += 1;
        let (value, br) = best_response(initial, &drift, game)?;
        let record = IterationRecord {
            iteration,
            drift_gap: br.sup_distance(&drift),
            value_change: value_distance(&value, previous.as_ref()),
        };
        observer(&record);
        history.push(record);
        let converged = record.drift_gap < cfg.tol;
        if converged || iteration >= cfg.max_iter {
            let belief = push_forward(initial, &br, game.sigma, game.time)?;
            let hjb_residual = value_distance(&value_against(&belief, game)?, Some(&value));
            let diagnostics = Diagnostics {
                iterations: iteration,
                final_gap: record.drift_gap,
                hjb_residual,
                mass_error: belief.max_mass_error(),
                converged,
                history,
            };
            return Ok(EquilibriumSolution { value, belief, drift: br, diagnostics });
        }
        drift = match cfg.averaging {
            Averaging::Picard => drift.lerp(cfg.relaxation, &br),
            Averaging::FictitiousPlay => drift.lerp(1.0 / (iteration as f64 + 1.0), &br),
        };
        previous = Some(value);
    }
}

/// Classical MFG: the blind game with a single-atom belief.
pub fn solve_complete_info(m0: &Density, game: &Game, cfg: &SolverConfig) -> Result<EquilibriumSolution> {
    solve_blind(&Belief::dirac(m0.clone()), game, cfg)
}

/// One application of the best-response map to `sol.belief`, measured
/// against `sol.drift` in sup-norm.
pub fn equilibrium_gap(sol: &EquilibriumSolution, game: &Game) -> Result<f64> {
    let value = value_against(&sol.belief, game)?;
    Ok(hjb_fp::best_response(&value, &game.hamiltonian, &sol.drift)?.sup_distance(&sol.drift))
}
