//! Cylinder test functions `phi(t, m) = tau(t) g(∫ h dm)` on the space of
//! densities, with their flat derivative
//! `∇_m phi(t, m, x) = tau(t) g'(∫ h dm) (h(x) - ∫ h dm)`.

use crate::error::{Error, Result};
use crate::math;
use crate::torus::{gradient, integrate, laplacian, Density, ScalarField, VectorField};

use super::Belief;

/// Outer profile `g` of a cylinder functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OuterFunction {
    Zero,
    Identity,
    Square,
    Sin,
    Exp,
}

impl OuterFunction {
    pub fn value(&self, s: f64) -> f64 {
        match self {
            OuterFunction::Zero => 0.0,
            OuterFunction::Identity => s,
            OuterFunction::Square => s * s,
            OuterFunction::Sin => math::sin(s),
            OuterFunction::Exp => math::exp(s),
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match self {
            OuterFunction::Zero => 0.0,
            OuterFunction::Identity => 1.0,
            OuterFunction::Square => 2.0 * s,
            OuterFunction::Sin => math::cos(s),
            OuterFunction::Exp => math::exp(s),
        }
    }

    pub fn second_derivative(&self, s: f64) -> f64 {
        match self {
            OuterFunction::Zero | OuterFunction::Identity => 0.0,
            OuterFunction::Square => 2.0,
            OuterFunction::Sin => -math::sin(s),
            OuterFunction::Exp => math::exp(s),
        }
    }
}

/// Explicit time factor `tau(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeFactor {
    Constant,
    /// `tau(t) = horizon - t`, vanishing at the horizon.
    Decay { horizon: f64 },
}

impl TimeFactor {
    fn value(&self, t: f64) -> f64 {
        match *self {
            TimeFactor::Constant => 1.0,
            TimeFactor::Decay { horizon } => horizon - t,
        }
    }

    fn derivative(&self) -> f64 {
        match self {
            TimeFactor::Constant => 0.0,
            TimeFactor::Decay { .. } => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CylinderFunctional {
    pub inner: ScalarField,
    pub outer: OuterFunction,
    pub time: TimeFactor,
}

impl CylinderFunctional {
    pub fn new(inner: ScalarField, outer: OuterFunction, time: TimeFactor) -> Self {
        CylinderFunctional { inner, outer, time }
    }

    /// `V(m) = ∫ h dm`, the linear functional.
    pub fn linear(inner: ScalarField) -> Self {
        Self::new(inner, OuterFunction::Identity, TimeFactor::Constant)
    }

    pub fn moment(&self, m: &Density) -> Result<f64> {
        integrate(&self.inner, m)
    }

    pub fn value(&self, t: f64, m: &Density) -> Result<f64> {
        Ok(self.time.value(t) * self.outer.value(self.moment(m)?))
    }

    /// `∂_t phi(t, m)` at fixed `m`.
    pub fn time_derivative(&self, m: &Density) -> Result<f64> {
        Ok(self.time.derivative() * self.outer.value(self.moment(m)?))
    }

    /// `tau(t) g'(∫ h dm)`, the factor multiplying `h` in the flat derivative.
    pub fn outer_slope(&self, t: f64, m: &Density) -> Result<f64> {
        Ok(self.time.value(t) * self.outer.derivative(self.moment(m)?))
    }

    /// Flat derivative `∇_m phi(t, m, ·)`, normalized to have zero `m`-mean.
    pub fn flat_derivative(&self, t: f64, m: &Density) -> Result<ScalarField> {
        let s = self.moment(m)?;
        let slope = self.time.value(t) * self.outer.derivative(s);
        Ok(self.inner.map(|h| slope * (h - s)))
    }

    /// `∫ phi(t, m) mu(dm)`.
    pub fn on_belief(&self, t: f64, belief: &Belief) -> Result<f64> {
        belief.iter().map(|(w, m)| Ok(w * self.value(t, m)?)).sum()
    }

    /// Whether `phi(t_end, ·) ≡ 0`.
    pub fn vanishes_at(&self, t_end: f64) -> bool {
        match self.time {
            _ if self.outer == OuterFunction::Zero => true,
            TimeFactor::Decay { horizon } => (horizon - t_end).abs() <= 1e-12 * horizon.abs().max(1.0),
            TimeFactor::Constant => false,
        }
    }
}

/// Precomputed `Δh` and centered `∇h` for generator evaluations.
pub(crate) struct InnerDerivatives {
    laplacian: ScalarField,
    gradient: VectorField,
}

impl InnerDerivatives {
    pub(crate) fn new(phi: &CylinderFunctional) -> Self {
        InnerDerivatives { laplacian: laplacian(&phi.inner), gradient: gradient(&phi.inner) }
    }

    /// `∫ (sigma Δh + b·∇h) dm`.
    pub(crate) fn generator(&self, b: &VectorField, sigma: f64, m: &Density) -> Result<f64> {
        let grid = *m.grid();
        grid.ensure_same(b.grid())?;
        grid.ensure_same(self.laplacian.grid())?;
        let d = grid.dim();
        let lap = self.laplacian.values();
        let mut acc = 0.0;
        for (k, &mk) in m.values().iter().enumerate() {
            let mut transport = 0.0;
            for axis in 0..d {
                transport += b.component(k, axis) * self.gradient.component(k, axis);
            }
            acc += (sigma * lap[k] + transport) * mk;
        }
        Ok(acc * grid.cell_volume())
    }
}

pub(crate) fn require_vanishing(phi: &CylinderFunctional, t_end: f64) -> Result<()> {
    if phi.vanishes_at(t_end) {
        Ok(())
    } else {
        Err(Error::NonVanishingTest)
    }
}
