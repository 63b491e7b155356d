//! Learning from observed payments.
//!
//! Players see the payment field `f(m_t)` of the true population. An atomic
//! belief is conditioned on it with a 0/1 likelihood: atoms whose payment
//! matches the observation survive and are renormalized. `tolerance` only
//! stands in for float equality. Matching is done by grouping, so the
//! conditioned beliefs of all atoms always come from one partition and the
//! tower identity holds up to rounding.

mod scenario;

use alloc::vec;
use alloc::vec::Vec;

pub use scenario::{illustrative_scenario, Scenario, ScenarioParams};

use crate::belief::{push_forward, Belief, CostModel, CylinderFunctional};
use crate::error::{Error, Result};
use crate::hjb_fp::{fp_step, Diffusion, DriftField, TimeGrid};
use crate::math;
use crate::solver::{solve_blind, EquilibriumSolution, Game, SolverConfig};
use crate::torus::ScalarField;

/// How atoms with (numerically) equal payments are grouped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Grouping {
    /// Payments quantized to `tolerance`-cells; equal cells share a group.
    Exact,
    /// Connected components of the "sup-norm distance ≤ tolerance" graph.
    #[default]
    UnionFind,
}

/// When the simulator re-solves the remaining game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Replan {
    /// Only when an observation changes the belief.
    #[default]
    OnChange,
    EveryObservation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub tolerance: f64,
    pub observation_dt: f64,
    pub grouping: Grouping,
    pub replan: Replan,
}

impl FilterConfig {
    pub fn new(observation_dt: f64) -> Self {
        FilterConfig { tolerance: 1e-6, observation_dt, grouping: Grouping::default(), replan: Replan::default() }
    }

    pub fn validate(&self, time: &TimeGrid) -> Result<()> {
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::param("tolerance", "must be positive"));
        }
        if !(self.observation_dt >= time.dt() * (1.0 - 1e-12)) || !self.observation_dt.is_finite() {
            return Err(Error::param("observation_dt", "must be at least the solver time step"));
        }
        Ok(())
    }
}

/// The observed payment field `g = f(m)` on the whole torus.
#[derive(Debug, Clone, PartialEq)]
pub struct PaymentSignature {
    pub field: ScalarField,
}

/// Running-cost payment of every atom.
pub fn payments(belief: &Belief, cost: &CostModel) -> Result<Vec<ScalarField>> {
    belief.atoms().iter().map(|m| cost.running.eval(m)).collect()
}

/// Whether all atoms pay the same within `tolerance` (sup-norm, pairwise).
pub fn in_consistency_set(belief: &Belief, cost: &CostModel, tolerance: f64) -> Result<bool> {
    let pay = payments(belief, cost)?;
    for (i, a) in pay.iter().enumerate() {
        for b in &pay[i + 1..] {
            if a.sup_distance(b) > tolerance {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn quantize(field: &ScalarField, tolerance: f64) -> Vec<i64> {
    field.values().iter().map(|v| math::round(v / tolerance) as i64).collect()
}

/// Groups `fields` by payment; groups are listed by smallest member.
fn group_fields(fields: &[&ScalarField], tolerance: f64, grouping: Grouping) -> Vec<Vec<usize>> {
    let n = fields.len();
    let mut label = vec![0usize; n];
    match grouping {
        Grouping::UnionFind => {
            let mut sets = DisjointSets::new(n);
            for i in 0..n {
                for j in i + 1..n {
                    if fields[i].sup_distance(fields[j]) <= tolerance {
                        sets.union(i, j);
                    }
                }
            }
            for (i, l) in label.iter_mut().enumerate() {
                *l = sets.find(i);
            }
        }
        Grouping::Exact => {
            let keys: Vec<Vec<i64>> = fields.iter().map(|f| quantize(f, tolerance)).collect();
            for i in 0..n {
                label[i] = (0..=i).find(|&j| keys[j] == keys[i]).expect("i matches itself");
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut leaders: Vec<usize> = Vec::new();
    for (i, &l) in label.iter().enumerate() {
        match leaders.iter().position(|&x| x == l) {
            Some(g) => groups[g].push(i),
            None => {
                leaders.push(l);
                groups.push(vec![i]);
            }
        }
    }
    groups
}

/// Partition of the atoms into payment classes.
pub fn partition_by_payment(belief: &Belief, cost: &CostModel, tolerance: f64, grouping: Grouping) -> Result<Vec<Vec<usize>>> {
    let pay = payments(belief, cost)?;
    let refs: Vec<&ScalarField> = pay.iter().collect();
    Ok(group_fields(&refs, tolerance, grouping))
}

/// Indices of the atoms consistent with `observed`: the observation joins the
/// grouping as one more element and its group is kept.
pub fn matching_atoms(belief: &Belief, observed: &PaymentSignature, cost: &CostModel, fc: &FilterConfig) -> Result<Vec<usize>> {
    belief.grid().ensure_same(observed.field.grid())?;
    let pay = payments(belief, cost)?;
    let mut refs: Vec<&ScalarField> = pay.iter().collect();
    refs.push(&observed.field);
    let obs = refs.len() - 1;
    let groups = group_fields(&refs, fc.tolerance, fc.grouping);
    let keep: Vec<usize> = groups.into_iter().find(|g| g.contains(&obs)).expect("observation is grouped").into_iter().filter(|&i| i != obs).collect();
    if keep.is_empty() {
        return Err(Error::InconsistentObservation);
    }
    Ok(keep)
}

/// Conditions `belief` on the observed payments.
pub fn filter_step(belief: &Belief, observed: &PaymentSignature, cost: &CostModel, fc: &FilterConfig) -> Result<Belief> {
    let keep = matching_atoms(belief, observed, cost, fc)?;
    if keep.len() == belief.len() {
        return Ok(belief.clone());
    }
    belief.restrict(&keep)
}

/// `|Σ_i w_i E_{mu^{m_i}_t}[phi] - E_{(K_t)#mu}[phi]|` where `mu^{m_i}_t` is
/// the pushed-forward belief conditioned on the payment of atom `i` at the
/// time node `t`.
#[allow(clippy::too_many_arguments)]
pub fn tower_check(
    belief: &Belief,
    b: &DriftField,
    sigma: Diffusion,
    time: TimeGrid,
    t: f64,
    phi: &CylinderFunctional,
    cost: &CostModel,
    fc: &FilterConfig,
) -> Result<f64> {
    let k = time.nearest_node(t);
    if (time.time(k) - t).abs() > 1e-9 * time.dt() {
        return Err(Error::param("t", "must be a time node"));
    }
    let pushed = push_forward(belief, b, sigma, time)?.slice(k);
    let pay = payments(&pushed, cost)?;
    let mut conditioned = 0.0;
    for (w, g) in pushed.weights().iter().zip(pay) {
        let posterior = filter_step(&pushed, &PaymentSignature { field: g }, cost, fc)?;
        conditioned += w * phi.on_belief(t, &posterior)?;
    }
    Ok((conditioned - phi.on_belief(t, &pushed)?).abs())
}

/// One observation of the simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub node: usize,
    pub time: f64,
    pub payment: PaymentSignature,
    /// Largest sup-norm distance between the observation and an atom's
    /// payment before conditioning.
    pub sup_gap: f64,
}

/// Atoms dropped by one observation, as indices into the initial belief.
#[derive(Debug, Clone, PartialEq)]
pub struct EliminationEvent {
    pub node: usize,
    pub time: f64,
    pub eliminated: Vec<usize>,
}

/// A stretch of play under one equilibrium solve, from `start_node` on.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start_node: usize,
    pub solution: EquilibriumSolution,
}

impl Segment {
    pub fn converged(&self) -> bool {
        self.solution.diagnostics.converged
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterTrace {
    /// Node and time of every recorded belief: the start, then each
    /// observation.
    pub nodes: Vec<usize>,
    pub times: Vec<f64>,
    /// Belief after conditioning at each recorded time.
    pub beliefs: Vec<Belief>,
    /// Indices into the initial belief of the atoms of `beliefs[j]`.
    pub atom_ids: Vec<Vec<usize>>,
    /// One per recorded time after the start.
    pub observations: Vec<Observation>,
    pub events: Vec<EliminationEvent>,
    pub true_atom: usize,
    pub segments: Vec<Segment>,
}

impl FilterTrace {
    /// Position of the true atom within `beliefs[j]`.
    pub fn true_position(&self, j: usize) -> Option<usize> {
        self.atom_ids[j].iter().position(|&i| i == self.true_atom)
    }
}

/// Observation nodes `ceil(j observation_dt / dt)`, `j = 1, 2, ...`, up to the
/// final node.
pub fn observation_nodes(time: &TimeGrid, observation_dt: f64) -> Vec<usize> {
    let mut nodes = Vec::new();
    for j in 1.. {
        let ratio = j as f64 * observation_dt / time.dt();
        // absorb rounding so that exact multiples stay on their node
        let k = math::ceil(ratio - 1e-9 * ratio.max(1.0)) as usize;
        if k > time.steps() {
            break;
        }
        if nodes.last() != Some(&k) {
            nodes.push(k);
        }
    }
    nodes
}

/// Receding-horizon play with observed payments.
///
/// All atoms move under the drift of the current equilibrium solve. At each
/// observation the payment of the true atom is revealed, the belief is
/// conditioned, and the blind game on the remaining horizon is re-solved
/// (on change, or at every observation, per `fc.replan`).
pub fn simulate_observed(
    initial: &Belief,
    true_atom: usize,
    game: &Game,
    fc: &FilterConfig,
    cfg: &SolverConfig,
) -> Result<FilterTrace> {
    fc.validate(&game.time)?;
    cfg.validate()?;
    if true_atom >= initial.len() {
        return Err(Error::param("true_atom", "must index an atom of the initial belief"));
    }
    if !in_consistency_set(initial, &game.cost, fc.tolerance)? {
        return Err(Error::param("belief", "initial atoms must share their payments"));
    }
    let time = game.time;
    let first = solve_blind(initial, game, cfg)?;
    let mut trace = FilterTrace {
        nodes: vec![0],
        times: vec![time.time(0)],
        beliefs: vec![initial.clone()],
        atom_ids: vec![(0..initial.len()).collect()],
        observations: Vec::new(),
        events: Vec::new(),
        true_atom,
        segments: vec![Segment { start_node: 0, solution: first }],
    };
    let mut belief = initial.clone();
    let mut ids: Vec<usize> = (0..initial.len()).collect();
    let mut node = 0;
    for next in observation_nodes(&time, fc.observation_dt) {
        let segment = trace.segments.last().expect("at least one segment");
        let drift = &segment.solution.drift;
        let mut atoms = belief.atoms().to_vec();
        for k in node..next {
            let slice = &drift.slices[k - segment.start_node];
            for m in atoms.iter_mut() {
                *m = fp_step(m, slice, game.sigma, time.dt())?;
            }
        }
        node = next;
        let moved = Belief::new(belief.weights().to_vec(), atoms)?;
        let true_pos = ids.iter().position(|&i| i == true_atom).expect("true atom is never eliminated");
        let observed = PaymentSignature { field: game.cost.running.eval(&moved.atoms()[true_pos])? };
        let sup_gap = payments(&moved, &game.cost)?.iter().map(|p| p.sup_distance(&observed.field)).fold(0.0, f64::max);
        let keep = matching_atoms(&moved, &observed, &game.cost, fc)?;
        debug_assert!(keep.contains(&true_pos));
        let changed = keep.len() < moved.len();
        belief = if changed { moved.restrict(&keep)? } else { moved };
        if changed {
            let eliminated = (0..ids.len()).filter(|i| !keep.contains(i)).map(|i| ids[i]).collect();
            trace.events.push(EliminationEvent { node, time: time.time(node), eliminated });
            ids = keep.iter().map(|&i| ids[i]).collect();
        }
        trace.observations.push(Observation { node, time: time.time(node), payment: observed, sup_gap });
        trace.nodes.push(node);
        trace.times.push(time.time(node));
        trace.beliefs.push(belief.clone());
        trace.atom_ids.push(ids.clone());
        let replan = changed || fc.replan == Replan::EveryObservation;
        if replan && node < time.steps() {
            let solution = solve_blind(&belief, &game.tail(node)?, cfg)?;
            trace.segments.push(Segment { start_node: node, solution });
        }
    }
    Ok(trace)
}
