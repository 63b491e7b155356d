//! Backward HJB and forward Fokker-Planck solvers on the torus.
//!
//! Both schemes split the explicit first-order part from implicit diffusion.
//! The HJB step is Godunov-upwinded; for a frozen drift `b` its linear part
//! is `u_n = M^{-1} E_b u_{n+1}` with `M = I - sigma dt Δ_h`. The Fokker-Planck
//! step is built as the exact transpose, `m_{n+1} = E_b^T M^{-1} m_n`, which
//! makes `<u_n, m_n> = <u_{n+1}, m_{n+1}>` hold to rounding. `E_b^T` is the
//! donor-cell scheme: positive and mass preserving under the CFL condition.
//!
//! Drift slice `k` drives the step `t_k -> t_{k+1}` and is computed from the
//! value at `t_{k+1}`, the gradient the explicit HJB step sees.

mod diffusion;
mod hamiltonian;

use alloc::vec;
use alloc::vec::Vec;

pub use hamiltonian::Hamiltonian;

pub(crate) use diffusion::ImplicitDiffusion;

use crate::error::{Error, Result};
use crate::math;
use crate::torus::{wasserstein1_circle, Density, ScalarField, TorusGrid, VectorField};

/// Slack on Courant numbers so that `dt = h` is accepted despite rounding.
const CFL_SLACK: f64 = 1e-12;

/// Relative tolerance under which the two upwind candidates count as a tie.
const TIE_TOLERANCE: f64 = 1e-12;

/// Uniform time grid `t_k = start + k dt`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    start: f64,
    dt: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::param("horizon", "must be finite and positive"));
        }
        if steps == 0 {
            return Err(Error::param("steps", "must be at least 1"));
        }
        Ok(TimeGrid { start: 0.0, dt: horizon / steps as f64, steps })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of time nodes, `steps + 1`.
    pub fn nodes(&self) -> usize {
        self.steps + 1
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.time(self.steps)
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start + k as f64 * self.dt
    }

    /// The grid restricted to `[t_k, end]`, with the same step.
    pub fn tail(&self, k: usize) -> Result<TimeGrid> {
        if k >= self.steps {
            return Err(Error::param("start node", "must leave at least one step"));
        }
        Ok(TimeGrid { start: self.time(k), dt: self.dt, steps: self.steps - k })
    }

    /// Node nearest to `t` (clamped to the grid).
    pub fn nearest_node(&self, t: f64) -> usize {
        let k = math::round((t - self.start) / self.dt);
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.steps)
        }
    }
}

/// Diffusion coefficient `sigma >= 0` (`sigma = 0` is pure transport).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Diffusion(f64);

impl Diffusion {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::param("sigma", "must be finite and nonnegative"));
        }
        Ok(Diffusion(sigma))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Value function `u(t_k, ·)` at every time node.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuePath {
    pub time: TimeGrid,
    pub slices: Vec<ScalarField>,
}

/// Density `m(t_k, ·)` at every time node.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityPath {
    pub time: TimeGrid,
    pub slices: Vec<Density>,
}

impl DensityPath {
    pub fn last(&self) -> &Density {
        self.slices.last().expect("density path has at least one slice")
    }

    pub fn max_mass_error(&self) -> f64 {
        self.slices.iter().map(|m| (m.mass() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Feedback drift `b(t_k, ·)` at every time node.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftField {
    pub time: TimeGrid,
    pub slices: Vec<VectorField>,
}

impl DriftField {
    pub fn zeros(grid: TorusGrid, time: TimeGrid) -> Self {
        DriftField { time, slices: vec![VectorField::zeros(grid); time.nodes()] }
    }

    /// Time-independent drift.
    pub fn stationary(field: VectorField, time: TimeGrid) -> Self {
        DriftField { time, slices: vec![field; time.nodes()] }
    }

    pub fn grid(&self) -> &TorusGrid {
        self.slices[0].grid()
    }

    pub fn sup_norm(&self) -> f64 {
        self.slices.iter().map(VectorField::sup_norm).fold(0.0, f64::max)
    }

    /// Largest componentwise difference over all slices.
    pub fn sup_distance(&self, other: &DriftField) -> f64 {
        self.slices.iter().zip(&other.slices).map(|(a, b)| a.sup_distance(b)).fold(0.0, f64::max)
    }

    pub fn lerp(&self, theta: f64, other: &DriftField) -> DriftField {
        let slices = self.slices.iter().zip(&other.slices).map(|(a, b)| a.lerp(theta, b)).collect();
        DriftField { time: self.time, slices }
    }

    /// Drift on `[t_k, end]`.
    pub fn tail(&self, k: usize) -> Result<DriftField> {
        Ok(DriftField { time: self.time.tail(k)?, slices: self.slices[k..].to_vec() })
    }
}

/// Courant condition `dt Lip(H) sqrt(d) / h <= 1` of the HJB scheme, which
/// also covers transport along any optimal drift.
pub fn check_hjb_cfl(grid: &TorusGrid, hamiltonian: &Hamiltonian, dt: f64) -> Result<()> {
    let courant = dt * hamiltonian.lipschitz() * math::sqrt(grid.dim() as f64) / grid.spacing();
    if courant > 1.0 + CFL_SLACK {
        return Err(Error::Cfl { courant });
    }
    Ok(())
}

fn check_transport_cfl(b: &VectorField, dt: f64) -> Result<()> {
    let courant = dt * b.max_l1() / b.grid().spacing();
    if courant > 1.0 + CFL_SLACK {
        return Err(Error::Cfl { courant });
    }
    Ok(())
}

/// Upwind gradient seen by the Godunov flux at `node`: per axis, the one-sided
/// difference along which information arrives, or 0 if neither side is active.
fn upwind_gradient(u: &[f64], grid: &TorusGrid, node: usize) -> [f64; 2] {
    let inv_h = 1.0 / grid.spacing();
    let mut p = [0.0; 2];
    for (axis, pa) in p.iter_mut().enumerate().take(grid.dim()) {
        let back = (u[node] - u[grid.neighbor(node, axis, -1)]) * inv_h;
        let fwd = (u[grid.neighbor(node, axis, 1)] - u[node]) * inv_h;
        let a = back.max(0.0);
        let b = (-fwd).max(0.0);
        if (a - b).abs() <= TIE_TOLERANCE * a.max(b).max(1.0) {
            *pa = 0.0;
        } else if a > b {
            *pa = back;
        } else {
            *pa = fwd;
        }
    }
    p
}

/// Godunov numerical Hamiltonian at `node`, `h(|q|)` with
/// `q_a = max(max(D^- u, 0), max(-D^+ u, 0))`.
fn godunov_hamiltonian(u: &[f64], grid: &TorusGrid, node: usize, hamiltonian: &Hamiltonian) -> f64 {
    let inv_h = 1.0 / grid.spacing();
    let mut q2 = 0.0;
    for axis in 0..grid.dim() {
        let back = (u[node] - u[grid.neighbor(node, axis, -1)]) * inv_h;
        let fwd = (u[grid.neighbor(node, axis, 1)] - u[node]) * inv_h;
        let q = back.max(0.0).max((-fwd).max(0.0));
        q2 += q * q;
    }
    hamiltonian.radial(math::sqrt(q2))
}

/// One backward step of the nonlinear HJB scheme:
/// `u_n = M^{-1}(u_{n+1} - dt H(∇u_{n+1}) + dt f_n)`.
pub fn hjb_step(
    u_next: &ScalarField,
    running: &ScalarField,
    hamiltonian: &Hamiltonian,
    sigma: Diffusion,
    dt: f64,
) -> Result<ScalarField> {
    let grid = *u_next.grid();
    grid.ensure_same(running.grid())?;
    check_hjb_cfl(&grid, hamiltonian, dt)?;
    let diffusion = ImplicitDiffusion::new(grid, sigma.value(), dt);
    Ok(hjb_step_with(u_next, running, hamiltonian, &diffusion, dt))
}

fn hjb_step_with(
    u_next: &ScalarField,
    running: &ScalarField,
    hamiltonian: &Hamiltonian,
    diffusion: &ImplicitDiffusion,
    dt: f64,
) -> ScalarField {
    let grid = *u_next.grid();
    let u = u_next.values();
    let f = running.values();
    let mut w: Vec<f64> = (0..grid.len())
        .map(|k| u[k] - dt * godunov_hamiltonian(u, &grid, k, hamiltonian) + dt * f[k])
        .collect();
    diffusion.apply_inverse(&mut w);
    ScalarField::from_raw(grid, w)
}

/// `E_b phi`: explicit upwind transport part of the linearized HJB step.
fn upwind_apply(phi: &[f64], b: &VectorField, dt: f64) -> Vec<f64> {
    let grid = *b.grid();
    let nu = dt / grid.spacing();
    (0..grid.len())
        .map(|k| {
            let mut acc = phi[k];
            for axis in 0..grid.dim() {
                let v = b.component(k, axis);
                if v > 0.0 {
                    acc += nu * v * (phi[grid.neighbor(k, axis, 1)] - phi[k]);
                } else if v < 0.0 {
                    acc += nu * v * (phi[k] - phi[grid.neighbor(k, axis, -1)]);
                }
            }
            acc
        })
        .collect()
}

/// `E_b^T y`: donor-cell transport.
fn upwind_transpose(y: &[f64], b: &VectorField, dt: f64) -> Vec<f64> {
    let grid = *b.grid();
    let nu = dt / grid.spacing();
    let mut out = y.to_vec();
    for k in 0..grid.len() {
        for axis in 0..grid.dim() {
            let v = b.component(k, axis);
            if v > 0.0 {
                let moved = nu * v * y[k];
                out[k] -= moved;
                out[grid.neighbor(k, axis, 1)] += moved;
            } else if v < 0.0 {
                let moved = -nu * v * y[k];
                out[k] -= moved;
                out[grid.neighbor(k, axis, -1)] += moved;
            }
        }
    }
    out
}

/// Linearized HJB step for a frozen drift: `M^{-1} E_b phi`.
pub fn linear_hjb_step(phi: &ScalarField, b: &VectorField, sigma: Diffusion, dt: f64) -> Result<ScalarField> {
    let grid = *phi.grid();
    grid.ensure_same(b.grid())?;
    check_transport_cfl(b, dt)?;
    let mut w = upwind_apply(phi.values(), b, dt);
    ImplicitDiffusion::new(grid, sigma.value(), dt).apply_inverse(&mut w);
    Ok(ScalarField::from_raw(grid, w))
}

/// Forward Fokker-Planck step, the transpose of [`linear_hjb_step`]:
/// `E_b^T M^{-1} m`.
pub fn fp_step(m: &Density, b: &VectorField, sigma: Diffusion, dt: f64) -> Result<Density> {
    let grid = *m.grid();
    grid.ensure_same(b.grid())?;
    check_transport_cfl(b, dt)?;
    let diffusion = ImplicitDiffusion::new(grid, sigma.value(), dt);
    Ok(fp_step_with(m, b, &diffusion, dt))
}

fn fp_step_with(m: &Density, b: &VectorField, diffusion: &ImplicitDiffusion, dt: f64) -> Density {
    let mut y = m.values().to_vec();
    diffusion.apply_inverse(&mut y);
    Density::from_raw(*m.grid(), upwind_transpose(&y, b, dt))
}

/// Solves the HJB equation backward from `terminal`.
///
/// `running` holds one slice per time node; step `t_{k+1} -> t_k` uses
/// slice `k` (left-constant sampling).
pub fn solve_hjb_backward(
    running: &[ScalarField],
    terminal: &ScalarField,
    hamiltonian: &Hamiltonian,
    sigma: Diffusion,
    time: TimeGrid,
) -> Result<ValuePath> {
    if running.len() != time.nodes() {
        return Err(Error::SliceCount { expected: time.nodes(), got: running.len() });
    }
    let grid = *terminal.grid();
    for f in running {
        grid.ensure_same(f.grid())?;
    }
    check_hjb_cfl(&grid, hamiltonian, time.dt())?;
    let diffusion = ImplicitDiffusion::new(grid, sigma.value(), time.dt());
    let mut slices = vec![terminal.clone(); time.nodes()];
    for k in (0..time.steps()).rev() {
        slices[k] = hjb_step_with(&slices[k + 1], &running[k], hamiltonian, &diffusion, time.dt());
    }
    Ok(ValuePath { time, slices })
}

/// Feedback drift `b = -D_p H(∇u)` using the upwind gradient of the HJB step.
pub fn optimal_drift(value: &ValuePath, hamiltonian: &Hamiltonian) -> DriftField {
    let time = value.time;
    let slices = (0..time.nodes())
        .map(|k| drift_from_value(&value.slices[(k + 1).min(time.steps())], hamiltonian))
        .collect();
    DriftField { time, slices }
}

/// Like [`optimal_drift`], but where the optimal control is not unique
/// (a kinked `H` at a vanishing upwind gradient) the incumbent drift is kept.
/// Every control of norm at most `Lip(H)` is optimal there.
pub fn best_response(value: &ValuePath, hamiltonian: &Hamiltonian, incumbent: &DriftField) -> Result<DriftField> {
    let time = value.time;
    if incumbent.slices.len() != time.nodes() {
        return Err(Error::SliceCount { expected: time.nodes(), got: incumbent.slices.len() });
    }
    let mut slices = Vec::with_capacity(time.nodes());
    for k in 0..time.nodes() {
        let u = &value.slices[(k + 1).min(time.steps())];
        u.grid().ensure_same(incumbent.slices[k].grid())?;
        slices.push(drift_with(u, hamiltonian, Some(&incumbent.slices[k])));
    }
    Ok(DriftField { time, slices })
}

/// Drift of a single value slice.
pub fn drift_from_value(u: &ScalarField, hamiltonian: &Hamiltonian) -> VectorField {
    drift_with(u, hamiltonian, None)
}

fn drift_with(u: &ScalarField, hamiltonian: &Hamiltonian, incumbent: Option<&VectorField>) -> VectorField {
    let grid = *u.grid();
    let d = grid.dim();
    let keep = hamiltonian.is_kinked_at_zero();
    let mut values = Vec::with_capacity(grid.len() * d);
    for k in 0..grid.len() {
        let p = upwind_gradient(u.values(), &grid, k);
        match incumbent {
            Some(b) if keep && p[..d].iter().all(|&v| v == 0.0) => {
                let cap = hamiltonian.lipschitz();
                let r = math::sqrt((0..d).map(|a| b.component(k, a) * b.component(k, a)).sum());
                let s = if r > cap { cap / r } else { 1.0 };
                values.extend((0..d).map(|a| s * b.component(k, a)));
            }
            _ => {
                let g = hamiltonian.gradient(&p[..d]);
                values.extend(g[..d].iter().map(|v| -v));
            }
        }
    }
    VectorField::from_raw(grid, values)
}

/// Evolves `m0` forward along the drift.
pub fn solve_fp_forward(m0: &Density, b: &DriftField, sigma: Diffusion, time: TimeGrid) -> Result<DensityPath> {
    if b.slices.len() != time.nodes() {
        return Err(Error::SliceCount { expected: time.nodes(), got: b.slices.len() });
    }
    let grid = *m0.grid();
    for slice in &b.slices[..time.steps()] {
        grid.ensure_same(slice.grid())?;
        check_transport_cfl(slice, time.dt())?;
    }
    let diffusion = ImplicitDiffusion::new(grid, sigma.value(), time.dt());
    let mut slices = Vec::with_capacity(time.nodes());
    slices.push(m0.clone());
    for k in 0..time.steps() {
        let next = fp_step_with(&slices[k], &b.slices[k], &diffusion, time.dt());
        slices.push(next);
    }
    Ok(DensityPath { time, slices })
}

/// Number of physical sample times used by the Hölder diagnostics.
pub const HOLDER_SAMPLES: usize = 33;

/// Time nodes nearest to `HOLDER_SAMPLES` equally spaced physical times.
pub(crate) fn holder_sample_nodes(time: &TimeGrid) -> Vec<usize> {
    let mut nodes: Vec<usize> = (0..HOLDER_SAMPLES)
        .map(|i| time.nearest_node(time.start() + time.horizon() * i as f64 / (HOLDER_SAMPLES - 1) as f64))
        .collect();
    nodes.dedup();
    nodes
}

/// `max W1(m_s, m_t) / sqrt|t - s|` over pairs of sampled times (`d = 1`).
pub fn fp_holder_modulus(path: &DensityPath) -> Result<f64> {
    let dim = path.slices[0].grid().dim();
    if dim != 1 {
        return Err(Error::UnsupportedDimension(dim));
    }
    let nodes = holder_sample_nodes(&path.time);
    let mut best = 0.0f64;
    for (a, &s) in nodes.iter().enumerate() {
        for &t in &nodes[a + 1..] {
            let w = wasserstein1_circle(&path.slices[s], &path.slices[t])?;
            let gap = path.time.time(t) - path.time.time(s);
            best = best.max(w / math::sqrt(gap));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests;
