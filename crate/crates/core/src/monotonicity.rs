//! Numerical certificates for the monotonicity conditions behind uniqueness.
//!
//! Everything here evaluates pairings of cost differences against measure
//! differences. The lifted pairing on beliefs uses that `f~` is linear in the
//! belief, so `f~(mu1 - mu2) = Σ_j s_j f(m_j)` over the signed atoms of the
//! difference.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::belief::{aggregate_running, aggregate_terminal, Belief, BeliefPath, CostMap, CostModel, CylinderFunctional, ScalarFn};
use crate::belief::InnerDerivatives;
use crate::error::{Error, Result};
use crate::hjb_fp::Diffusion;
use crate::math;
use crate::torus::{integrate, mollified_dirac, Density, ScalarField, TorusGrid, VectorField};

/// Largest number of atoms drawn per random belief.
pub const MAX_SAMPLED_ATOMS: usize = 8;

/// `mu1 - mu2` as a list of signed atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedBeliefDiff {
    atoms: Vec<(f64, Density)>,
}

impl SignedBeliefDiff {
    /// Signed weights must sum to zero within `1e-12`.
    pub fn new(atoms: Vec<(f64, Density)>) -> Result<Self> {
        let Some((_, first)) = atoms.first() else {
            return Err(Error::InvalidBelief("no atoms"));
        };
        let grid = *first.grid();
        for (s, m) in &atoms {
            grid.ensure_same(m.grid())?;
            if !s.is_finite() {
                return Err(Error::InvalidBelief("weights must be finite"));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.0).sum();
        if total.abs() > 1e-12 {
            return Err(Error::InvalidBelief("signed weights must sum to zero"));
        }
        Ok(SignedBeliefDiff { atoms })
    }

    pub fn between(mu1: &Belief, mu2: &Belief) -> Result<Self> {
        mu1.grid().ensure_same(mu2.grid())?;
        let atoms = mu1
            .iter()
            .map(|(w, m)| (w, m.clone()))
            .chain(mu2.iter().map(|(w, m)| (-w, m.clone())))
            .collect();
        Ok(SignedBeliefDiff { atoms })
    }

    pub fn atoms(&self) -> &[(f64, Density)] {
        &self.atoms
    }

    pub fn grid(&self) -> &TorusGrid {
        self.atoms[0].1.grid()
    }
}

/// `∫ (f(m1) - f(m2)) d(m1 - m2)` for the running cost.
pub fn l2_pairing(cost: &CostModel, m1: &Density, m2: &Density) -> Result<f64> {
    m1.grid().ensure_same(m2.grid())?;
    let df = cost.running.eval(m1)?.axpy(-1.0, &cost.running.eval(m2)?);
    let dm: Vec<f64> = m1.values().iter().zip(m2.values()).map(|(a, b)| a - b).collect();
    Ok(df.inner(&dm))
}

fn signed_pairing(map: &CostMap, diff: &SignedBeliefDiff) -> Result<f64> {
    // f~ annihilates differences when f ignores the density
    if map.is_density_independent() {
        return Ok(0.0);
    }
    let mut lifted = ScalarField::zeros(*diff.grid());
    for (s, m) in &diff.atoms {
        lifted = lifted.axpy(*s, &map.eval(m)?);
    }
    duality_pairing(&lifted, diff)
}

/// `Σ_i s_i ∫ f~(mu1 - mu2) dm_i` for the running cost.
pub fn lifted_pairing(cost: &CostModel, mu1: &Belief, mu2: &Belief) -> Result<f64> {
    signed_pairing(&cost.running, &SignedBeliefDiff::between(mu1, mu2)?)
}

/// `(½(g(x) + g(y)) - g(z)) ((x + y)/2 - z)`: the lifted pairing of
/// `½δ_{δx} + ½δ_{δy}` against `δ_{δz}` for `f(m)(w) = w g(∫ y m(dy))`.
pub fn counterexample_gap(g: impl Fn(f64) -> f64, x: f64, y: f64, z: f64) -> f64 {
    (0.5 * (g(x) + g(y)) - g(z)) * (0.5 * (x + y) - z)
}

/// `Σ_i s_i ∫ phi dm_i`.
pub fn duality_pairing(phi: &ScalarField, diff: &SignedBeliefDiff) -> Result<f64> {
    let mut acc = 0.0;
    for (s, m) in &diff.atoms {
        acc += s * integrate(phi, m)?;
    }
    Ok(acc)
}

/// Operator `A` on a cylinder functional at time `t`:
/// `Σ_i w_i tau(t) g'(∫ h dm_i) ∫ (sigma Δh + b·∇h) dm_i`.
pub fn operator_a_cylinder(
    belief: &Belief,
    b: &VectorField,
    sigma: Diffusion,
    phi: &CylinderFunctional,
    t: f64,
) -> Result<f64> {
    let derivs = InnerDerivatives::new(phi);
    let mut acc = 0.0;
    for (w, m) in belief.iter() {
        acc += w * phi.outer_slope(t, m)? * derivs.generator(b, sigma.value(), m)?;
    }
    Ok(acc)
}

/// Coupling term of the uniqueness computation for two belief paths on the
/// same time grid: `Σ_k dt <f~(mu1_k) - f~(mu2_k), mu1_k - mu2_k>` plus the
/// terminal pairing of `U0~`. Left-endpoint rule in time.
pub fn cross_pairing(cost: &CostModel, a: &BeliefPath, b: &BeliefPath) -> Result<f64> {
    if a.time != b.time {
        return Err(Error::param("paths", "must share the time grid"));
    }
    let time = a.time;
    let mut acc = 0.0;
    for k in 0..time.steps() {
        let (ma, mb) = (a.slice(k), b.slice(k));
        let df = aggregate_running(&ma, cost)?.axpy(-1.0, &aggregate_running(&mb, cost)?);
        acc += time.dt() * duality_pairing(&df, &SignedBeliefDiff::between(&ma, &mb)?)?;
    }
    let (ma, mb) = (a.final_belief(), b.final_belief());
    let du = aggregate_terminal(&ma, cost)?.axpy(-1.0, &aggregate_terminal(&mb, cost)?);
    Ok(acc + duality_pairing(&du, &SignedBeliefDiff::between(&ma, &mb)?)?)
}

/// One sampled pair and its lifted pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub index: usize,
    pub pairing: f64,
    pub mu1: Belief,
    pub mu2: Belief,
}

/// Outcome of a sampling certificate. A negative `value` certifies a
/// violation; a nonnegative one is evidence only.
#[derive(Debug, Clone, PartialEq)]
pub struct PairingReport {
    /// Smallest pairing found, scan included.
    pub value: f64,
    /// Beliefs achieving `value`.
    pub witness: Option<(Belief, Belief)>,
    pub trials: usize,
    /// Smallest pairing over the random trials alone.
    pub min_over_trials: f64,
    pub seed: u64,
}

impl PairingReport {
    /// Combines trials (in any order) and an optional scan witness; ties go
    /// to the scan, then to the lowest trial index.
    pub fn from_trials(seed: u64, scan: Option<Trial>, trials: Vec<Trial>) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::param("trials", "must be at least 1"));
        }
        let count = trials.len();
        let best = trials
            .into_iter()
            .min_by(|a, b| a.pairing.total_cmp(&b.pairing).then(a.index.cmp(&b.index)))
            .expect("nonempty");
        let min_over_trials = best.pairing;
        let overall = match scan {
            Some(s) if s.pairing <= best.pairing => s,
            _ => best,
        };
        Ok(PairingReport {
            value: overall.pairing,
            witness: Some((overall.mu1, overall.mu2)),
            trials: count,
            min_over_trials,
            seed,
        })
    }
}

fn dirichlet(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| -math::ln(1.0 - rng.random::<f64>())).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|d| d / total).collect()
}

fn random_atom(rng: &mut ChaCha8Rng, grid: TorusGrid) -> Result<Density> {
    let width = 2.0 * grid.spacing();
    let center = |rng: &mut ChaCha8Rng| [rng.random::<f64>(), if grid.dim() == 2 { rng.random::<f64>() } else { 0.0 }];
    if rng.random::<bool>() {
        let c = center(rng);
        return mollified_dirac(grid, &c[..grid.dim()], width);
    }
    let parts = 2 + (rng.random::<u32>() % 3) as usize;
    let centers: Vec<[f64; 2]> = (0..parts).map(|_| center(rng)).collect();
    let weights = dirichlet(rng, parts);
    let mut values = alloc::vec![0.0; grid.len()];
    for (c, w) in centers.iter().zip(&weights) {
        let bump = mollified_dirac(grid, &c[..grid.dim()], width)?;
        values.iter_mut().zip(bump.values()).for_each(|(v, b)| *v += w * b);
    }
    Density::normalized(grid, values)
}

/// Random atomic belief with Dirichlet(1, ..., 1) weights over up to eight
/// atoms.
pub fn random_belief(rng: &mut ChaCha8Rng, grid: TorusGrid) -> Result<Belief> {
    let k = 1 + (rng.random::<u32>() as usize % MAX_SAMPLED_ATOMS);
    let weights = dirichlet(rng, k);
    let atoms = (0..k).map(|_| random_atom(rng, grid)).collect::<Result<Vec<_>>>()?;
    Belief::new(weights, atoms)
}

/// Generator for trial `index`: stream `index` of the ChaCha generator keyed
/// by `seed`, so trials are independent of evaluation order.
pub fn trial_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn run_trial(cost: &CostModel, grid: TorusGrid, seed: u64, index: usize) -> Result<Trial> {
    let mut rng = trial_rng(seed, index);
    let mu1 = random_belief(&mut rng, grid)?;
    let mu2 = random_belief(&mut rng, grid)?;
    let pairing = lifted_pairing(cost, &mu1, &mu2)?;
    Ok(Trial { index, pairing, mu1, mu2 })
}

/// Number of points per axis of the closed-form witness scan.
const SCAN_POINTS: usize = 24;

/// Closed-form scan over `(x, y, z)` for moment-form costs: evaluates the
/// Dirac formula on a lattice and, at its minimum, the lifted pairing of the
/// corresponding mollified-Dirac beliefs.
pub fn witness_scan(cost: &CostModel, grid: TorusGrid) -> Result<Option<Trial>> {
    let CostMap::MomentForm { g, .. } = &cost.running else { return Ok(None) };
    let g: &ScalarFn = g;
    let lattice: Vec<f64> = (0..SCAN_POINTS).map(|i| 0.05 + 0.9 * i as f64 / (SCAN_POINTS - 1) as f64).collect();
    let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
    for &x in &lattice {
        for &y in &lattice {
            for &z in &lattice {
                let v = counterexample_gap(|s| g.eval(s), x, y, z);
                if v < best.0 {
                    best = (v, x, y, z);
                }
            }
        }
    }
    let (_, x, y, z) = best;
    let width = grid.spacing();
    let mu1 = Belief::uniform(alloc::vec![mollified_dirac(grid, &[x], width)?, mollified_dirac(grid, &[y], width)?])?;
    let mu2 = Belief::dirac(mollified_dirac(grid, &[z], width)?);
    let pairing = lifted_pairing(cost, &mu1, &mu2)?;
    Ok(Some(Trial { index: usize::MAX, pairing, mu1, mu2 }))
}

/// Sampling certificate for the lifted monotonicity condition: the witness
/// scan (moment-form costs only), then `trials` random belief pairs.
pub fn certify_blind_monotone(cost: &CostModel, grid: TorusGrid, seed: u64, trials: usize) -> Result<PairingReport> {
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let scan = witness_scan(cost, grid)?;
    let samples = (0..trials).map(|i| run_trial(cost, grid, seed, i)).collect::<Result<Vec<_>>>()?;
    PairingReport::from_trials(seed, scan, samples)
}
