//! Payment (running cost) and terminal cost maps `m -> f(m)`.

use alloc::sync::Arc;
use core::fmt;

use crate::error::{Error, Result};
use crate::math;
use crate::torus::{integrate, Density, ScalarField, TorusGrid};

/// A real function of one real variable.
#[derive(Clone, Copy)]
pub enum ScalarFn {
    Sqrt,
    Affine { slope: f64, intercept: f64 },
    Power { exponent: f64 },
    Custom(fn(f64) -> f64),
}

impl ScalarFn {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            ScalarFn::Sqrt => math::sqrt(s),
            ScalarFn::Affine { slope, intercept } => slope * s + intercept,
            ScalarFn::Power { exponent } => math::pow(s, exponent),
            ScalarFn::Custom(f) => f(s),
        }
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFn::Sqrt => f.write_str("Sqrt"),
            ScalarFn::Affine { slope, intercept } => {
                f.debug_struct("Affine").field("slope", slope).field("intercept", intercept).finish()
            }
            ScalarFn::Power { exponent } => f.debug_struct("Power").field("exponent", exponent).finish(),
            ScalarFn::Custom(_) => f.write_str("Custom"),
        }
    }
}

type CustomMap = Arc<dyn Fn(&Density) -> ScalarField + Send + Sync>;

/// A cost depending on the population density.
#[derive(Clone)]
pub enum CostMap {
    /// `f(m) = base + phi ∫ phi dm`.
    ProductForm { base: ScalarField, phi: ScalarField },
    /// `f(m)(x) = x g(∫ y m(dy))`, one-dimensional, coordinates in `[0, 1)`.
    MomentForm { coordinate: ScalarField, g: ScalarFn },
    /// `f(m) = f0 + c f0 ∫ f0 dm` with the plateau profile of
    /// [`illustrative_profile`].
    Illustrative { profile: ScalarField, coupling: f64 },
    Custom(CustomMap),
}

impl fmt::Debug for CostMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostMap::ProductForm { .. } => f.write_str("ProductForm"),
            CostMap::MomentForm { g, .. } => f.debug_struct("MomentForm").field("g", g).finish(),
            CostMap::Illustrative { coupling, .. } => {
                f.debug_struct("Illustrative").field("coupling", coupling).finish()
            }
            CostMap::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl CostMap {
    pub fn product_form(base: ScalarField, phi: ScalarField) -> Result<Self> {
        base.grid().ensure_same(phi.grid())?;
        Ok(CostMap::ProductForm { base, phi })
    }

    /// A cost that ignores the density.
    pub fn constant(field: ScalarField) -> Self {
        let phi = ScalarField::zeros(*field.grid());
        CostMap::ProductForm { base: field, phi }
    }

    pub fn zero(grid: TorusGrid) -> Self {
        Self::constant(ScalarField::zeros(grid))
    }

    pub fn moment_form(grid: TorusGrid, g: ScalarFn) -> Result<Self> {
        if grid.dim() != 1 {
            return Err(Error::UnsupportedDimension(grid.dim()));
        }
        let coordinate = ScalarField::from_fn(grid, |x| x[0])?;
        Ok(CostMap::MomentForm { coordinate, g })
    }

    pub fn illustrative(grid: TorusGrid, coupling: f64) -> Result<Self> {
        if grid.dim() != 1 {
            return Err(Error::UnsupportedDimension(grid.dim()));
        }
        if !(coupling > 0.0 && coupling < 1.0) {
            return Err(Error::param("c", "must lie in (0, 1)"));
        }
        Ok(CostMap::Illustrative { profile: illustrative_profile(grid), coupling })
    }

    pub fn custom(f: impl Fn(&Density) -> ScalarField + Send + Sync + 'static) -> Self {
        CostMap::Custom(Arc::new(f))
    }

    pub fn eval(&self, m: &Density) -> Result<ScalarField> {
        match self {
            CostMap::ProductForm { base, phi } => {
                let s = integrate(phi, m)?;
                Ok(base.axpy(s, phi))
            }
            CostMap::MomentForm { coordinate, g } => {
                let mean = integrate(coordinate, m)?;
                Ok(coordinate.scale(g.eval(mean)))
            }
            CostMap::Illustrative { profile, coupling } => {
                let s = integrate(profile, m)?;
                Ok(profile.scale(1.0 + coupling * s))
            }
            CostMap::Custom(f) => {
                let out = f(m);
                out.grid().ensure_same(m.grid())?;
                Ok(out)
            }
        }
    }

    /// True when `f` does not depend on the density at all.
    pub fn is_density_independent(&self) -> bool {
        matches!(self, CostMap::ProductForm { phi, .. } if phi.sup_norm() == 0.0)
    }
}

/// Running and terminal costs of a game.
#[derive(Clone, Debug)]
pub struct CostModel {
    pub running: CostMap,
    pub terminal: CostMap,
}

impl CostModel {
    pub fn new(running: CostMap, terminal: CostMap) -> Self {
        CostModel { running, terminal }
    }

    /// Running cost `f`, zero terminal cost.
    pub fn running_only(running: CostMap, grid: TorusGrid) -> Self {
        CostModel { running, terminal: CostMap::zero(grid) }
    }

    pub fn is_density_independent(&self) -> bool {
        self.running.is_density_independent() && self.terminal.is_density_independent()
    }
}

/// Quintic smoothstep, `C^2` with zero first and second derivative at both ends.
fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

/// The plateau profile `f0`: zero outside `(1/4, 7/16)`, `-2` on
/// `[5/16, 3/8]`, decreasing on `[1/4, 5/16]` and increasing on `[3/8, 7/16]`.
pub fn illustrative_f0(x: f64) -> f64 {
    let x = math::wrap_unit(x);
    const RAMP: f64 = 1.0 / 16.0;
    if x <= 0.25 || x >= 0.4375 {
        0.0
    } else if x < 0.3125 {
        -2.0 * smoothstep((x - 0.25) / RAMP)
    } else if x <= 0.375 {
        -2.0
    } else {
        -2.0 * smoothstep((0.4375 - x) / RAMP)
    }
}

pub fn illustrative_profile(grid: TorusGrid) -> ScalarField {
    ScalarField::from_raw(grid, (0..grid.len()).map(|k| illustrative_f0(grid.coords(k)[0])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::mollified_dirac;

    #[test]
    fn profile_plateaus_and_ramps() {
        assert_eq!(illustrative_f0(0.1), 0.0);
        assert_eq!(illustrative_f0(0.25), 0.0);
        assert_eq!(illustrative_f0(0.35), -2.0);
        assert_eq!(illustrative_f0(0.34), -2.0);
        assert_eq!(illustrative_f0(0.5), 0.0);
        let v = illustrative_f0(0.29);
        assert!(v > -2.0 && v < 0.0);
        let mut prev = 0.0;
        for i in 0..=100 {
            let x = 0.25 + i as f64 * 0.0625 / 100.0;
            let v = illustrative_f0(x);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
        for i in 0..=100 {
            let x = 0.375 + i as f64 * 0.0625 / 100.0;
            let v = illustrative_f0(x);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn illustrative_payment_is_f0_away_from_support() {
        let g = TorusGrid::new(1, 128).unwrap();
        let cm = CostMap::illustrative(g, 0.7).unwrap();
        let m = mollified_dirac(g, &[0.1], g.spacing()).unwrap();
        assert!(cm.eval(&m).unwrap().sup_distance(&illustrative_profile(g)) < 1e-300);
        assert!(CostMap::illustrative(g, 1.0).is_err());
    }

    #[test]
    fn product_form_matches_definition() {
        let g = TorusGrid::new(1, 32).unwrap();
        let base = ScalarField::from_fn(g, |x| x[0] * x[0]).unwrap();
        let phi = ScalarField::from_fn(g, |x| (6.0 * x[0]).sin()).unwrap();
        let cm = CostMap::product_form(base.clone(), phi.clone()).unwrap();
        let m = mollified_dirac(g, &[0.4], 2.0 * g.spacing()).unwrap();
        let s: f64 = (0..32).map(|i| phi.values()[i] * m.values()[i]).sum::<f64>() / 32.0;
        let out = cm.eval(&m).unwrap();
        for i in 0..32 {
            assert!((out.values()[i] - (base.values()[i] + phi.values()[i] * s)).abs() < 1e-14);
        }
    }

    #[test]
    fn moment_form_uses_mean_position() {
        let g = TorusGrid::new(1, 256).unwrap();
        let cm = CostMap::moment_form(g, ScalarFn::Sqrt).unwrap();
        let m = mollified_dirac(g, &[0.36], g.spacing()).unwrap();
        let out = cm.eval(&m).unwrap();
        let x = 100.0 / 256.0;
        assert!((out.values()[100] - x * 0.6).abs() < 1e-3);
        assert!(CostMap::moment_form(TorusGrid::new(2, 8).unwrap(), ScalarFn::Sqrt).is_err());
    }
}
