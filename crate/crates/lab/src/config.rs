//! Run configuration: a strict JSON schema and its resolution into core types.

use std::f64::consts::PI;
use std::path::Path;

use mfgbelief_core::belief::ScalarFn;
use mfgbelief_core::filter::{FilterConfig, Grouping, Replan};
use mfgbelief_core::hjb_fp::check_hjb_cfl;
use mfgbelief_core::torus::mollified_dirac;
use mfgbelief_core::{
    Averaging, Belief, CostMap, CostModel, CylinderFunctional, Density, Diffusion, Game, Hamiltonian, OuterFunction,
    ScalarField, SolverConfig, TimeFactor, TimeGrid, TorusGrid, VectorField,
};
use serde::{Deserialize, Serialize};

use crate::error::LabError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<HamiltonianSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub belief: Option<BeliefSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certify: Option<CertifySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weak: Option<WeakSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianSpec {
    Abs,
    SmoothedAbs { delta: f64 },
    CappedQuadratic { cap: f64 },
}

/// A scalar field given by a formula on `[0, 1)^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Zero,
    Constant { value: f64 },
    /// `constant + Σ amplitude trig(2π k·x)`.
    Fourier {
        #[serde(default)]
        constant: f64,
        terms: Vec<FourierTerm>,
    },
    /// Nodal values in row-major order.
    Values { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    pub amplitude: f64,
    pub mode: Vec<i64>,
    pub trig: Trig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trig {
    Sin,
    Cos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostMapSpec {
    Zero,
    Constant { field: FieldSpec },
    /// `f(m) = base + phi ∫ phi dm`.
    ProductForm { base: FieldSpec, phi: FieldSpec },
    /// `f(m)(x) = x g(∫ y m(dy))`.
    MomentForm { g: ScalarFnSpec },
    /// Plateau profile `f0` with `f(m) = f0 + c f0 ∫ f0 dm`.
    Illustrative { coupling: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarFnSpec {
    Sqrt,
    Affine { slope: f64, intercept: f64 },
    Power { exponent: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    pub running: CostMapSpec,
    #[serde(default = "zero_cost")]
    pub terminal: CostMapSpec,
}

fn zero_cost() -> CostMapSpec {
    CostMapSpec::Zero
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    Uniform,
    /// Periodized Gaussian; `bandwidth` defaults to the grid spacing.
    MollifiedDirac {
        center: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bandwidth: Option<f64>,
    },
    /// Nodal density values; must integrate to one.
    Values { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub weight: f64,
    pub density: DensitySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeliefSpec {
    pub atoms: Vec<AtomSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub relaxation: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub averaging: AveragingSpec,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSpec {
            relaxation: d.relaxation,
            tol: d.tol,
            max_iter: d.max_iter,
            averaging: AveragingSpec::Picard,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AveragingSpec {
    Picard,
    FictitiousPlay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    pub observation_dt: f64,
    #[serde(default)]
    pub grouping: GroupingSpec,
    #[serde(default)]
    pub replan: ReplanSpec,
    #[serde(default)]
    pub true_atom: usize,
}

fn default_tolerance() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupingSpec {
    Exact,
    #[default]
    UnionFind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplanSpec {
    #[default]
    OnChange,
    EveryObservation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySpec {
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakSpec {
    /// Refinement ladder of `(n, steps)` pairs, coarsest first.
    pub ladder: Vec<Rung>,
    /// Drift components, constant in time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<Vec<FieldSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_function: Option<TestFunctionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rung {
    pub n: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunctionSpec {
    pub inner: FieldSpec,
    pub outer: OuterSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterSpec {
    Identity,
    Square,
    Sin,
    Exp,
}

/// Replaces the belief weights from `from_fraction` of the horizon on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub from_fraction: f64,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_directory")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { directory: default_directory(), formats: default_formats() }
    }
}

fn default_directory() -> String {
    "out".into()
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// Reads and parses a config file, reporting the path of the offending
/// field on schema errors.
pub fn load(path: &Path) -> Result<RunConfig, LabError> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<RunConfig, LabError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        LabError::Validation(format!("{path}: {}", e.into_inner()))
    })
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> LabError {
    LabError::Validation(format!("{field}: {msg}"))
}

fn require<'a, T>(value: &'a Option<T>, field: &str) -> Result<&'a T, LabError> {
    value.as_ref().ok_or_else(|| invalid(field, "missing"))
}

impl FieldSpec {
    pub fn resolve(&self, grid: TorusGrid, field: &str) -> Result<ScalarField, LabError> {
        let out = match self {
            FieldSpec::Zero => Ok(ScalarField::zeros(grid)),
            FieldSpec::Constant { value } => ScalarField::new(grid, vec![*value; grid.len()]),
            FieldSpec::Fourier { constant, terms } => {
                for (i, t) in terms.iter().enumerate() {
                    if t.mode.len() != grid.dim() {
                        return Err(invalid(&format!("{field}.terms[{i}].mode"), "length must equal grid.dim"));
                    }
                }
                ScalarField::from_fn(grid, |x| {
                    let mut v = *constant;
                    for t in terms {
                        let phase: f64 = t.mode.iter().zip(x.iter()).map(|(&k, &xi)| k as f64 * xi).sum::<f64>() * 2.0 * PI;
                        v += t.amplitude
                            * match t.trig {
                                Trig::Sin => phase.sin(),
                                Trig::Cos => phase.cos(),
                            };
                    }
                    v
                })
            }
            FieldSpec::Values { values } => ScalarField::new(grid, values.clone()),
        };
        out.map_err(|e| invalid(field, e))
    }
}

impl DensitySpec {
    pub fn resolve(&self, grid: TorusGrid, field: &str) -> Result<Density, LabError> {
        match self {
            DensitySpec::Uniform => Ok(Density::uniform(grid)),
            DensitySpec::MollifiedDirac { center, bandwidth } => {
                if center.len() != grid.dim() {
                    return Err(invalid(&format!("{field}.center"), "length must equal grid.dim"));
                }
                mollified_dirac(grid, center, bandwidth.unwrap_or(grid.spacing())).map_err(|e| invalid(field, e))
            }
            DensitySpec::Values { values } => Density::new(grid, values.clone()).map_err(|e| invalid(field, e)),
        }
    }
}

impl BeliefSpec {
    pub fn resolve(&self, grid: TorusGrid) -> Result<Belief, LabError> {
        let weights = self.atoms.iter().map(|a| a.weight).collect();
        let atoms = self
            .atoms
            .iter()
            .enumerate()
            .map(|(i, a)| a.density.resolve(grid, &format!("belief.atoms[{i}].density")))
            .collect::<Result<Vec<_>, _>>()?;
        Belief::new(weights, atoms).map_err(|e| invalid("belief", e))
    }
}

impl CostMapSpec {
    pub fn resolve(&self, grid: TorusGrid, field: &str) -> Result<CostMap, LabError> {
        let map = match self {
            CostMapSpec::Zero => Ok(CostMap::zero(grid)),
            CostMapSpec::Constant { field: f } => Ok(CostMap::constant(f.resolve(grid, &format!("{field}.field"))?)),
            CostMapSpec::ProductForm { base, phi } => CostMap::product_form(
                base.resolve(grid, &format!("{field}.base"))?,
                phi.resolve(grid, &format!("{field}.phi"))?,
            ),
            CostMapSpec::MomentForm { g } => CostMap::moment_form(grid, g.resolve()),
            CostMapSpec::Illustrative { coupling } => CostMap::illustrative(grid, *coupling),
        };
        map.map_err(|e| invalid(field, e))
    }

    pub fn name(&self) -> &'static str {
        match self {
            CostMapSpec::Zero => "zero",
            CostMapSpec::Constant { .. } => "constant",
            CostMapSpec::ProductForm { .. } => "product_form",
            CostMapSpec::MomentForm { .. } => "moment_form",
            CostMapSpec::Illustrative { .. } => "illustrative",
        }
    }
}

impl ScalarFnSpec {
    fn resolve(&self) -> ScalarFn {
        match *self {
            ScalarFnSpec::Sqrt => ScalarFn::Sqrt,
            ScalarFnSpec::Affine { slope, intercept } => ScalarFn::Affine { slope, intercept },
            ScalarFnSpec::Power { exponent } => ScalarFn::Power { exponent },
        }
    }
}

impl CostSpec {
    pub fn resolve(&self, grid: TorusGrid) -> Result<CostModel, LabError> {
        Ok(CostModel::new(self.running.resolve(grid, "cost.running")?, self.terminal.resolve(grid, "cost.terminal")?))
    }
}

impl HamiltonianSpec {
    pub fn resolve(&self) -> Result<Hamiltonian, LabError> {
        match *self {
            HamiltonianSpec::Abs => Ok(Hamiltonian::Abs),
            HamiltonianSpec::SmoothedAbs { delta } => Hamiltonian::smoothed_abs(delta),
            HamiltonianSpec::CappedQuadratic { cap } => Hamiltonian::capped_quadratic(cap),
        }
        .map_err(|e| invalid("hamiltonian", e))
    }
}

impl SolverSpec {
    pub fn resolve(&self) -> Result<SolverConfig, LabError> {
        let cfg = SolverConfig {
            relaxation: self.relaxation,
            tol: self.tol,
            max_iter: self.max_iter,
            averaging: match self.averaging {
                AveragingSpec::Picard => Averaging::Picard,
                AveragingSpec::FictitiousPlay => Averaging::FictitiousPlay,
            },
        };
        cfg.validate().map_err(|e| invalid("solver", e))?;
        Ok(cfg)
    }
}

impl FilterSpec {
    pub fn resolve(&self, time: &TimeGrid) -> Result<FilterConfig, LabError> {
        let fc = FilterConfig {
            tolerance: self.tolerance,
            observation_dt: self.observation_dt,
            grouping: match self.grouping {
                GroupingSpec::Exact => Grouping::Exact,
                GroupingSpec::UnionFind => Grouping::UnionFind,
            },
            replan: match self.replan {
                ReplanSpec::OnChange => Replan::OnChange,
                ReplanSpec::EveryObservation => Replan::EveryObservation,
            },
        };
        fc.validate(time).map_err(|e| invalid("filter", e))?;
        Ok(fc)
    }
}

impl OuterSpec {
    fn resolve(&self) -> OuterFunction {
        match self {
            OuterSpec::Identity => OuterFunction::Identity,
            OuterSpec::Square => OuterFunction::Square,
            OuterSpec::Sin => OuterFunction::Sin,
            OuterSpec::Exp => OuterFunction::Exp,
        }
    }
}

impl RunConfig {
    pub fn grid(&self) -> Result<TorusGrid, LabError> {
        let g = require(&self.grid, "grid")?;
        TorusGrid::new(g.dim, g.n).map_err(|e| invalid("grid", e))
    }

    pub fn time_grid(&self) -> Result<TimeGrid, LabError> {
        let t = require(&self.time, "time")?;
        TimeGrid::new(t.horizon, t.steps).map_err(|e| invalid("time", e))
    }

    pub fn diffusion(&self) -> Result<Diffusion, LabError> {
        Diffusion::new(*require(&self.sigma, "sigma")?).map_err(|e| invalid("sigma", e))
    }

    pub fn cost_model(&self, grid: TorusGrid) -> Result<CostModel, LabError> {
        require(&self.cost, "cost")?.resolve(grid)
    }

    pub fn initial_belief(&self, grid: TorusGrid) -> Result<Belief, LabError> {
        require(&self.belief, "belief")?.resolve(grid)
    }

    /// Game, initial belief and solver settings, all validated.
    pub fn game(&self) -> Result<(Game, Belief, SolverConfig), LabError> {
        let grid = self.grid()?;
        let time = self.time_grid()?;
        let hamiltonian = require(&self.hamiltonian, "hamiltonian")?.resolve()?;
        check_hjb_cfl(&grid, &hamiltonian, time.dt()).map_err(|e| invalid("time.steps", e))?;
        let game = Game::new(self.cost_model(grid)?, hamiltonian, self.diffusion()?, time);
        let belief = self.initial_belief(grid)?;
        Ok((game, belief, self.solver.resolve()?))
    }

    pub fn filter_spec(&self) -> Result<&FilterSpec, LabError> {
        require(&self.filter, "filter")
    }

    pub fn certify_spec(&self) -> Result<&CertifySpec, LabError> {
        let spec = require(&self.certify, "certify")?;
        if spec.trials == 0 {
            return Err(invalid("certify.trials", "must be at least 1"));
        }
        Ok(spec)
    }

    pub fn wants(&self, format: Format) -> bool {
        self.output.formats.contains(&format)
    }
}

/// One rung of a weak-residual ladder, fully resolved.
pub struct WeakRung {
    pub grid: TorusGrid,
    pub time: TimeGrid,
    pub belief: Belief,
    pub drift: VectorField,
    pub test: CylinderFunctional,
}

impl WeakSpec {
    pub fn rungs(&self, cfg: &RunConfig) -> Result<Vec<WeakRung>, LabError> {
        if self.ladder.len() < 2 {
            return Err(invalid("weak.ladder", "needs at least two rungs"));
        }
        let dim = require(&cfg.grid, "grid")?.dim;
        let horizon = require(&cfg.time, "time")?.horizon;
        let test = require(&self.test_function, "weak.test_function")?;
        let belief = require(&cfg.belief, "belief")?;
        if belief.atoms.iter().any(|a| matches!(a.density, DensitySpec::Values { .. })) {
            return Err(invalid("belief", "nodal densities cannot be refined; use formulas"));
        }
        if let Some(drift) = &self.drift {
            if drift.len() != dim {
                return Err(invalid("weak.drift", "needs one component per dimension"));
            }
        }
        if let Some(p) = &self.perturbation {
            if !(p.from_fraction > 0.0 && p.from_fraction < 1.0) {
                return Err(invalid("weak.perturbation.from_fraction", "must lie in (0, 1)"));
            }
            if p.weights.len() != belief.atoms.len() {
                return Err(invalid("weak.perturbation.weights", "needs one weight per atom"));
            }
        }
        self.ladder
            .iter()
            .enumerate()
            .map(|(i, rung)| {
                let at = format!("weak.ladder[{i}]");
                let grid = TorusGrid::new(dim, rung.n).map_err(|e| invalid(&at, e))?;
                let time = TimeGrid::new(horizon, rung.steps).map_err(|e| invalid(&at, e))?;
                let components = match &self.drift {
                    Some(d) => {
                        d.iter().enumerate().map(|(a, f)| f.resolve(grid, &format!("weak.drift[{a}]"))).collect::<Result<Vec<_>, _>>()?
                    }
                    None => vec![ScalarField::zeros(grid); dim],
                };
                let mut values = Vec::with_capacity(grid.len() * dim);
                for k in 0..grid.len() {
                    values.extend(components.iter().map(|c| c.values()[k]));
                }
                let drift = VectorField::new(grid, values).map_err(|e| invalid("weak.drift", e))?;
                let inner = test.inner.resolve(grid, "weak.test_function.inner")?;
                let test = CylinderFunctional::new(inner, test.outer.resolve(), TimeFactor::Decay { horizon });
                Ok(WeakRung { grid, time, belief: belief.resolve(grid)?, drift, test })
            })
            .collect()
    }
}
