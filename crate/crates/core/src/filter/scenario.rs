use alloc::vec;

use crate::belief::{Belief, CostMap, CostModel};
use crate::error::{Error, Result};
use crate::hjb_fp::{Diffusion, Hamiltonian, TimeGrid};
use crate::solver::Game;
use crate::torus::{mollified_dirac, TorusGrid};

/// Horizon of the illustrative game.
pub const ILLUSTRATIVE_HORIZON: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioParams {
    /// Offset of the second candidate population, in `(0, 1/4)`.
    pub epsilon: f64,
    /// Prior weight of the population at 0.
    pub p1: f64,
    pub coupling: f64,
    pub n: usize,
    /// Time steps; defaults to `2n`, which puts `dt` at the grid spacing.
    pub steps: Option<usize>,
    /// Width of the mollified Diracs; defaults to the grid spacing.
    pub bandwidth: Option<f64>,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams { epsilon: 0.1, p1: 0.5, coupling: 0.5, n: 256, steps: None, bandwidth: None }
    }
}

/// Two candidate populations concentrated at 0 and `epsilon`, both paying
/// `f0` until one of them reaches the support of `f0`.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub belief: Belief,
    pub game: Game,
    /// `[1/4 - epsilon, 5/16 - epsilon]`: from the time the `epsilon`
    /// population reaches the support of `f0` to the time it reaches the
    /// plateau.
    pub predicted_window: (f64, f64),
}

pub fn illustrative_scenario(params: &ScenarioParams) -> Result<Scenario> {
    let ScenarioParams { epsilon, p1, coupling, n, steps, bandwidth } = *params;
    if !(epsilon > 0.0 && epsilon < 0.25) {
        return Err(Error::param("epsilon", "must lie in (0, 1/4)"));
    }
    if !(p1 > 0.0 && p1 < 1.0) {
        return Err(Error::param("p1", "must lie in (0, 1)"));
    }
    let grid = TorusGrid::new(1, n)?;
    let cost = CostModel::running_only(CostMap::illustrative(grid, coupling)?, grid);
    let time = TimeGrid::new(ILLUSTRATIVE_HORIZON, steps.unwrap_or(2 * n))?;
    let width = bandwidth.unwrap_or(grid.spacing());
    let atoms = vec![mollified_dirac(grid, &[0.0], width)?, mollified_dirac(grid, &[epsilon], width)?];
    let belief = Belief::new(vec![p1, 1.0 - p1], atoms)?;
    let game = Game::new(cost, Hamiltonian::Abs, Diffusion::new(0.0)?, time);
    Ok(Scenario { belief, game, predicted_window: (0.25 - epsilon, 0.3125 - epsilon) })
}
