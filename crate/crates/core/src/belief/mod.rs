//! Atomic beliefs `mu = sum_i w_i δ_{m_i}` over population densities.
//!
//! A belief moves by pushing every candidate density along one common
//! Fokker-Planck flow; weights never change under transport. Costs are
//! averaged linearly over the belief, and beliefs are compared with the
//! Wasserstein-1 distance whose ground metric is itself the circle W1.

mod cost;
mod cylinder;
mod transport;

use alloc::vec::Vec;

pub use cost::{illustrative_f0, illustrative_profile, CostMap, CostModel, ScalarFn};
pub use cylinder::{CylinderFunctional, OuterFunction, TimeFactor};
pub use transport::{solve_transport, TransportPlan};

pub(crate) use cylinder::InnerDerivatives;

use crate::error::{Error, Result};
use crate::hjb_fp::{holder_sample_nodes, solve_fp_forward, Diffusion, DensityPath, DriftField, TimeGrid};
use crate::math;
use crate::torus::{wasserstein1_circle, Density, ScalarField, TorusGrid};

/// Largest supported number of atoms.
pub const MAX_ATOMS: usize = 64;

/// Tolerance on `sum w_i = 1`.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

/// Finitely supported probability measure over densities on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    weights: Vec<f64>,
    atoms: Vec<Density>,
}

impl Belief {
    pub fn new(weights: Vec<f64>, atoms: Vec<Density>) -> Result<Self> {
        validate_weights(&weights, atoms.len())?;
        let grid = *atoms[0].grid();
        for m in &atoms[1..] {
            grid.ensure_same(m.grid())?;
        }
        Ok(Belief { weights, atoms })
    }

    /// `δ_m`.
    pub fn dirac(m: Density) -> Self {
        Belief { weights: alloc::vec![1.0], atoms: alloc::vec![m] }
    }

    /// Equal weights on every atom.
    pub fn uniform(atoms: Vec<Density>) -> Result<Self> {
        let k = atoms.len().max(1);
        Self::new(alloc::vec![1.0 / k as f64; atoms.len()], atoms)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atoms(&self) -> &[Density] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn grid(&self) -> &TorusGrid {
        self.atoms[0].grid()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &Density)> {
        self.weights.iter().copied().zip(&self.atoms)
    }

    /// `lambda self + (1 - lambda) other`, atoms concatenated.
    pub fn mix(&self, lambda: f64, other: &Belief) -> Result<Belief> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::param("lambda", "must lie in [0, 1]"));
        }
        let mut weights = Vec::new();
        let mut atoms = Vec::new();
        for (w, m) in self.iter() {
            if lambda * w > 0.0 {
                weights.push(lambda * w);
                atoms.push(m.clone());
            }
        }
        for (w, m) in other.iter() {
            if (1.0 - lambda) * w > 0.0 {
                weights.push((1.0 - lambda) * w);
                atoms.push(m.clone());
            }
        }
        Belief::new(weights, atoms)
    }

    /// Conditions on the atoms in `keep`, renormalizing their weights.
    pub fn restrict(&self, keep: &[usize]) -> Result<Belief> {
        if keep.is_empty() {
            return Err(Error::InvalidBelief("conditioning on an empty set of atoms"));
        }
        let total: f64 = keep.iter().map(|&i| self.weights[i]).sum();
        let weights = keep.iter().map(|&i| self.weights[i] / total).collect();
        let atoms = keep.iter().map(|&i| self.atoms[i].clone()).collect();
        Ok(Belief { weights, atoms })
    }
}

fn validate_weights(weights: &[f64], atoms: usize) -> Result<()> {
    if atoms == 0 {
        return Err(Error::InvalidBelief("no atoms"));
    }
    if atoms > MAX_ATOMS {
        return Err(Error::InvalidBelief("more than 64 atoms"));
    }
    if weights.len() != atoms {
        return Err(Error::InvalidBelief("one weight per atom required"));
    }
    if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidBelief("weights must be positive"));
    }
    if (weights.iter().sum::<f64>() - 1.0).abs() > WEIGHT_TOLERANCE {
        return Err(Error::InvalidBelief("weights must sum to 1"));
    }
    Ok(())
}

/// Belief at every time node: atom `i` follows its own density path.
///
/// Paths produced by [`push_forward`] have the same weights at every node;
/// [`BeliefPath::with_weights_from`] builds paths that do not, which is only
/// useful to exercise the weak-solution residual.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefPath {
    pub time: TimeGrid,
    weights: Vec<Vec<f64>>,
    atoms: Vec<DensityPath>,
}

impl BeliefPath {
    pub fn new(weights: Vec<f64>, atoms: Vec<DensityPath>) -> Result<Self> {
        validate_weights(&weights, atoms.len())?;
        let time = atoms[0].time;
        if atoms.iter().any(|p| p.time != time) {
            return Err(Error::InvalidBelief("atom paths on different time grids"));
        }
        Ok(BeliefPath { time, weights: alloc::vec![weights; time.nodes()], atoms })
    }

    pub fn atom_paths(&self) -> &[DensityPath] {
        &self.atoms
    }

    pub fn weights_at(&self, k: usize) -> &[f64] {
        &self.weights[k]
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn has_constant_weights(&self) -> bool {
        self.weights.iter().all(|w| w == &self.weights[0])
    }

    pub fn slice(&self, k: usize) -> Belief {
        Belief {
            weights: self.weights[k].clone(),
            atoms: self.atoms.iter().map(|p| p.slices[k].clone()).collect(),
        }
    }

    pub fn final_belief(&self) -> Belief {
        self.slice(self.time.steps())
    }

    /// Replaces the weights from node `from` onwards.
    pub fn with_weights_from(mut self, from: usize, weights: Vec<f64>) -> Result<Self> {
        validate_weights(&weights, self.atoms.len())?;
        for w in self.weights.iter_mut().skip(from) {
            *w = weights.clone();
        }
        Ok(self)
    }

    pub fn max_mass_error(&self) -> f64 {
        self.atoms.iter().map(DensityPath::max_mass_error).fold(0.0, f64::max)
    }
}

/// `mu_t = (K_t)_# mu_0`: each atom follows the Fokker-Planck flow of `b`.
pub fn push_forward(initial: &Belief, b: &DriftField, sigma: Diffusion, time: TimeGrid) -> Result<BeliefPath> {
    let atoms = initial
        .atoms
        .iter()
        .map(|m| solve_fp_forward(m, b, sigma, time))
        .collect::<Result<Vec<_>>>()?;
    BeliefPath::new(initial.weights.clone(), atoms)
}

fn aggregate(belief: &Belief, map: &CostMap) -> Result<ScalarField> {
    if map.is_density_independent() {
        return map.eval(&belief.atoms[0]);
    }
    let mut acc = ScalarField::zeros(*belief.grid());
    for (w, m) in belief.iter() {
        acc = acc.axpy(w, &map.eval(m)?);
    }
    Ok(acc)
}

/// `f~(mu) = ∫ f(m) mu(dm)`.
pub fn aggregate_running(belief: &Belief, cost: &CostModel) -> Result<ScalarField> {
    aggregate(belief, &cost.running)
}

/// `U0~(mu) = ∫ U0(m) mu(dm)`.
pub fn aggregate_terminal(belief: &Belief, cost: &CostModel) -> Result<ScalarField> {
    aggregate(belief, &cost.terminal)
}

/// Wasserstein-1 distance between beliefs with the circle W1 as ground
/// metric, solved exactly as a transportation problem (`d = 1`).
///
/// Both orientations of the problem are solved and the smaller optimum is
/// returned, which makes the result exactly symmetric.
pub fn belief_distance(mu: &Belief, nu: &Belief) -> Result<f64> {
    let grid = *mu.grid();
    grid.ensure_same(nu.grid())?;
    if grid.dim() != 1 {
        return Err(Error::UnsupportedDimension(grid.dim()));
    }
    let mut forward = Vec::with_capacity(mu.len() * nu.len());
    for a in &mu.atoms {
        for b in &nu.atoms {
            forward.push(wasserstein1_circle(a, b)?);
        }
    }
    let mut backward = Vec::with_capacity(forward.len());
    for j in 0..nu.len() {
        for i in 0..mu.len() {
            backward.push(forward[i * nu.len() + j]);
        }
    }
    let a = solve_transport(&mu.weights, &nu.weights, &forward)?.cost;
    let b = solve_transport(&nu.weights, &mu.weights, &backward)?.cost;
    Ok(a.min(b))
}

/// `max d(mu_s, mu_t) / sqrt|t - s|` over pairs of sampled times (`d = 1`).
pub fn belief_holder_modulus(path: &BeliefPath) -> Result<f64> {
    let dim = path.atoms[0].slices[0].grid().dim();
    if dim != 1 {
        return Err(Error::UnsupportedDimension(dim));
    }
    let nodes = holder_sample_nodes(&path.time);
    let slices: Vec<Belief> = nodes.iter().map(|&k| path.slice(k)).collect();
    let mut best = 0.0f64;
    for a in 0..nodes.len() {
        for b in a + 1..nodes.len() {
            let d = belief_distance(&slices[a], &slices[b])?;
            let gap = path.time.time(nodes[b]) - path.time.time(nodes[a]);
            best = best.max(d / math::sqrt(gap));
        }
    }
    Ok(best)
}

/// Discrete weak formulation of the continuity equation on beliefs,
///
/// `|Σ_n dt Σ_i w_i [-∂_t phi - phi'(∫(σΔh + b·∇h) dm_i)] - Σ_i w_i phi(0, m_i)|`,
///
/// left-endpoint in time. Vanishes to scheme order on pushforward paths.
pub fn weak_solution_residual(
    path: &BeliefPath,
    b: &DriftField,
    sigma: Diffusion,
    phi: &CylinderFunctional,
) -> Result<f64> {
    let time = path.time;
    cylinder::require_vanishing(phi, time.end())?;
    if b.slices.len() != time.nodes() {
        return Err(Error::SliceCount { expected: time.nodes(), got: b.slices.len() });
    }
    let derivs = InnerDerivatives::new(phi);
    let mut integral = 0.0;
    for k in 0..time.steps() {
        let t = time.time(k);
        let mut slice_sum = 0.0;
        for (i, atom) in path.atoms.iter().enumerate() {
            let m = &atom.slices[k];
            let generator = derivs.generator(&b.slices[k], sigma.value(), m)?;
            let term = -phi.time_derivative(m)? - phi.outer_slope(t, m)? * generator;
            slice_sum += path.weights[k][i] * term;
        }
        integral += time.dt() * slice_sum;
    }
    let mut initial = 0.0;
    for (i, atom) in path.atoms.iter().enumerate() {
        initial += path.weights[0][i] * phi.value(time.start(), &atom.slices[0])?;
    }
    Ok((integral - initial).abs())
}
