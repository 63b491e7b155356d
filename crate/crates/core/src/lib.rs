//! Numerical laboratory for mean field games whose initial population
//! distribution is unknown to the players.
//!
//! Players hold a *belief*, a probability measure over candidate population
//! densities, and the crate provides:
//!
//! * a periodic finite-difference toolkit on the unit torus ([`torus`]),
//! * monotone HJB and adjoint Fokker-Planck solvers ([`hjb_fp`]),
//! * atomic beliefs, their pushforward along a common flow and the
//!   Wasserstein-over-Wasserstein distance between them ([`belief`]),
//! * equilibrium solvers for the blind game and the classical game
//!   ([`solver`]),
//! * sampling certificates for the lifted monotonicity condition
//!   ([`monotonicity`]),
//! * hard Bayesian filtering of beliefs on observed payments and a
//!   receding-horizon simulator ([`filter`]).
//!
//! The crate is `no_std` and only needs an allocator.

#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod belief;
pub mod error;
pub mod filter;
pub mod hjb_fp;
pub mod monotonicity;
pub mod solver;
pub mod torus;

mod math;

pub use belief::{Belief, BeliefPath, CostMap, CostModel, CylinderFunctional, OuterFunction, ScalarFn, TimeFactor};
pub use error::{Error, Result};
pub use filter::{FilterConfig, FilterTrace, Grouping, Replan, Scenario, ScenarioParams};
pub use hjb_fp::{Diffusion, DensityPath, DriftField, Hamiltonian, TimeGrid, ValuePath};
pub use monotonicity::{PairingReport, SignedBeliefDiff};
pub use solver::{Averaging, EquilibriumSolution, Game, SolverConfig};
pub use torus::{Density, ScalarField, TorusGrid, VectorField};
