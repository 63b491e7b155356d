use crate::error::{Error, Result};
use crate::math;

/// Radial, convex Hamiltonians `H(x, p) = h(|p|)` with `h(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Hamiltonian {
    /// `H = |p|`: controls in the unit ball at zero cost.
    Abs,
    /// `H = sqrt(|p|^2 + delta^2) - delta`.
    SmoothedAbs { delta: f64 },
    /// `H = |p|^2 / 2` for `|p| <= cap`, continued affinely beyond.
    CappedQuadratic { cap: f64 },
}

impl Hamiltonian {
    pub fn smoothed_abs(delta: f64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::param("delta", "must be finite and nonnegative"));
        }
        Ok(Hamiltonian::SmoothedAbs { delta })
    }

    pub fn capped_quadratic(cap: f64) -> Result<Self> {
        if !(cap > 0.0) || !cap.is_finite() {
            return Err(Error::param("cap", "must be finite and positive"));
        }
        Ok(Hamiltonian::CappedQuadratic { cap })
    }

    /// Global Lipschitz constant in `p`.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            Hamiltonian::Abs | Hamiltonian::SmoothedAbs { .. } => 1.0,
            Hamiltonian::CappedQuadratic { cap } => cap,
        }
    }

    /// Profile `h(r)` for `r = |p| >= 0`.
    pub fn radial(&self, r: f64) -> f64 {
        match *self {
            Hamiltonian::Abs => r,
            Hamiltonian::SmoothedAbs { delta } => math::sqrt(r * r + delta * delta) - delta,
            Hamiltonian::CappedQuadratic { cap } => {
                if r <= cap {
                    0.5 * r * r
                } else {
                    cap * r - 0.5 * cap * cap
                }
            }
        }
    }

    /// `h'(r)`, with the convention `h'(0) = 0` for the kink of `|p|`.
    pub fn radial_slope(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match *self {
            Hamiltonian::Abs => 1.0,
            Hamiltonian::SmoothedAbs { delta } => r / math::sqrt(r * r + delta * delta),
            Hamiltonian::CappedQuadratic { cap } => r.min(cap),
        }
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        self.radial(norm(p))
    }

    /// Whether `H` has a corner at the origin, so that the set of optimal
    /// controls at `p = 0` is the whole ball of radius `Lip(H)`.
    pub fn is_kinked_at_zero(&self) -> bool {
        match *self {
            Hamiltonian::Abs => true,
            Hamiltonian::SmoothedAbs { delta } => delta == 0.0,
            Hamiltonian::CappedQuadratic { .. } => false,
        }
    }

    /// `D_p H(p)`; zero at `p = 0`.
    pub fn gradient(&self, p: &[f64]) -> [f64; 2] {
        let r = norm(p);
        let mut out = [0.0; 2];
        if r > 0.0 {
            let s = self.radial_slope(r) / r;
            for (o, &pi) in out.iter_mut().zip(p) {
                *o = s * pi;
            }
        }
        out
    }
}

#[inline]
pub(crate) fn norm(p: &[f64]) -> f64 {
    math::sqrt(p.iter().map(|v| v * v).sum())
}
